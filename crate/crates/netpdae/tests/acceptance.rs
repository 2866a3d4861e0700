//! Acceptance suite for the solver stack.
//!
//! Each `criterion_*` test checks one acceptance criterion end to end on the
//! shipped default configurations; the harness output — one ok/FAILED line
//! per test — is the acceptance report. Every tolerance is written at its
//! assertion site. The numeric baselines embedded below are frozen
//! regression values for the exact default configurations; a correct build
//! must reproduce them within the stated bands.
//!
//! Criteria 1–3 share a single run of the time-step refinement study (it is
//! by far the most expensive piece), guarded by a `OnceLock`.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use netpdae::assembly::{assemble, Loads, MeshParams};
use netpdae::experiments::{
    defect_refinement, run_convergence_eps, run_convergence_tau, run_eps_order_study,
    run_oracle_comparison, EpsOrderConfig, ModalDecayConfig, OracleComparisonConfig, TauStudy,
    TauStudyConfig,
};
use netpdae::network::{builtin, InitialFluxSpec, Polynomial, TimeProfile};
use netpdae::norms::fit_power_law;
use netpdae::series::{self, SeriesCase, SeriesParams};
use netpdae::stepping::{
    hamiltonian, initial_state, make_generic_stepper, make_stepper, ModelForm, RunConfig,
};
use netpdae::tableau::by_name;

/// Frozen per-level error norms of the default time-step study on the demo
/// network. Columns follow the study rows:
/// `(tau, [potential/backward-Euler, corrected/backward-Euler,
///         potential/two-stage-Radau, corrected/two-stage-Radau])`.
const EXPECTED_TAU_ERRORS: [(f64, [f64; 4]); 14] = [
    (0.2, [0.0124936496581605, 0.0123649025725807, 0.000215808716391835, 0.000250709059872132]),
    (0.1, [0.00702667100993455, 0.00688921513620136, 0.000138142376310191, 9.25083828710109e-05]),
    (0.05, [0.00380745429361191, 0.00366085699669655, 0.000153400266856253, 2.73692551904481e-05]),
    (0.025, [0.00204287079597019, 0.00189190089444856, 0.000155724706324736, 8.68765525316826e-06]),
    (0.0125, [0.00111435391685351, 0.000961024159488122, 0.000155979657777239, 3.13419952106706e-06]),
    (0.00625, [0.000639055708623285, 0.000484506333908571, 0.000156025372083365, 1.91129877636189e-06]),
    (0.003125, [0.000398522128928422, 0.000243337090630523, 0.000156030416623089, 1.96006333160555e-06]),
    (0.0015625, [0.000277524966771344, 0.00012201931870917, 0.000156032381869654, 2.09026659416377e-06]),
    (0.00078125, [0.000216840315550603, 6.11748419376243e-05, 0.000156032445197912, 2.0933359627572e-06]),
    (0.000390625, [0.000186451812303794, 3.07069365466615e-05, 0.000156032454893568, 2.09522028395319e-06]),
    (0.0001953125, [0.000171246009680683, 1.5462758052717e-05, 0.000156032485628268, 2.0954837721248e-06]),
    (9.765625e-05, [0.000163640212960962, 7.84035084668304e-06, 0.000156032485751988, 2.09551885055916e-06]),
    (4.8828125e-05, [0.000159836590899132, 4.03286438126604e-06, 0.000156032485767387, 2.09552338684882e-06]),
    (2.44140625e-05, [0.000157934598244863, 2.13573782634654e-06, 0.000156032485769495, 2.09552396349777e-06]),
];

/// Frozen decay exponents of the semidiscrete study, per mesh, for the
/// default configuration (rough initial flux, spectral exponent 0.55).
const EXPECTED_DECAY_EXPONENTS: [(usize, f64); 9] = [
    (6, 0.774071912560396),
    (11, 0.714349547832569),
    (21, 0.664539118688238),
    (41, 0.629840041467353),
    (81, 0.606529674139336),
    (161, 0.590460840349867),
    (321, 0.579161728995493),
    (641, 0.570638150591638),
    (1281, 0.563924960309423),
];

/// Runs the default time-step study once; criteria 1–3 all read the result.
fn tau_study() -> &'static (TauStudy, Duration) {
    static STUDY: OnceLock<(TauStudy, Duration)> = OnceLock::new();
    STUDY.get_or_init(|| {
        let (net, scenario) = builtin("demo-network").expect("built-in network");
        let start = Instant::now();
        let study = run_convergence_tau(&net, &scenario, &TauStudyConfig::default())
            .expect("time-step study completes");
        (study, start.elapsed())
    })
}

fn relative_deviation(measured: f64, expected: f64) -> f64 {
    ((measured - expected) / expected).abs()
}

/// Criterion 1: the default time-step study reproduces every frozen error
/// norm within 10% relative, finishes within its time budget, and its
/// reference is demonstrably far more accurate than anything it measures.
#[test]
fn criterion_1_tau_study_reproduces_baseline_error_table() {
    let (study, elapsed) = tau_study();
    assert_eq!(study.rows.len(), EXPECTED_TAU_ERRORS.len());

    let mut worst = 0.0f64;
    let mut smallest_error = f64::INFINITY;
    for (row, (tau, expected)) in study.rows.iter().zip(EXPECTED_TAU_ERRORS) {
        assert!(
            relative_deviation(row.tau, tau) < 1e-12,
            "level mismatch: got tau={}, expected {}",
            row.tau,
            tau
        );
        let measured = [row.err_p0_euler, row.err_phat_euler, row.err_p0_radau, row.err_phat_radau];
        for (m, e) in measured.iter().zip(expected) {
            let dev = relative_deviation(*m, e);
            worst = worst.max(dev);
            smallest_error = smallest_error.min(*m);
            assert!(
                dev <= 0.10,
                "tau={tau}: measured {m:.6e} deviates {:.1}% from baseline {e:.6e} (allowed 10%)",
                100.0 * dev
            );
        }
    }
    assert!(
        study.reference_gap < 0.01 * smallest_error,
        "reference self-distance {:.3e} is not below 1% of the smallest measured error {:.3e}",
        study.reference_gap,
        smallest_error
    );
    assert!(
        *elapsed < Duration::from_secs(600),
        "study took {elapsed:?}, budget is 600 s"
    );
    println!(
        "criterion 1: 56/56 errors within 10% (worst deviation {:.2}%), reference gap {:.2e}, {:.1} s",
        100.0 * worst,
        study.reference_gap,
        elapsed.as_secs_f64()
    );
}

/// Criterion 2: with the backward Euler scheme the corrected potential
/// converges at first order in the step before its model plateau: the fitted
/// exponent over the mid-range levels lies in 1.0 +/- 0.1.
#[test]
fn criterion_2_backward_euler_corrected_error_is_first_order_in_step() {
    let (study, _) = tau_study();
    // Levels 4..=13: below level 4 the coarse-step transient still bends the
    // curve, and the Euler corrected error at these levels sits far above its
    // model plateau, so the fit isolates the O(tau) regime.
    let taus: Vec<f64> = study.rows[4..=13].iter().map(|r| r.tau).collect();
    let errs: Vec<f64> = study.rows[4..=13].iter().map(|r| r.err_phat_euler).collect();
    let fit = fit_power_law(&taus, &errs);
    assert!(
        (fit.exponent - 1.0).abs() <= 0.1,
        "fitted step-size exponent {:.4} outside 1.0 +/- 0.1",
        fit.exponent
    );
    println!("criterion 2: backward Euler corrected-potential step exponent {:.4}", fit.exponent);
}

/// Criterion 3: once the time error is refined away, the remaining plateau
/// is the model error. The first-order limit plateaus in the frozen band,
/// the corrected solution plateaus roughly two orders lower, and the ratio
/// between the two exceeds 50.
#[test]
fn criterion_3_model_error_plateaus_separate_by_expansion_order() {
    let (study, _) = tau_study();
    let last = study.rows.len() - 1;
    let p0_plateau = 0.5 * (study.rows[last - 1].err_p0_radau + study.rows[last].err_p0_radau);
    let phat_plateau =
        0.5 * (study.rows[last - 1].err_phat_radau + study.rows[last].err_phat_radau);
    assert!(
        (1.4e-4..=1.8e-4).contains(&p0_plateau),
        "first-order plateau {p0_plateau:.6e} outside [1.4e-4, 1.8e-4]"
    );
    assert!(
        (1.8e-6..=2.4e-6).contains(&phat_plateau),
        "corrected plateau {phat_plateau:.6e} outside [1.8e-6, 2.4e-6]"
    );
    let ratio = p0_plateau / phat_plateau;
    assert!(ratio > 50.0, "plateau ratio {ratio:.1} does not exceed 50");
    println!(
        "criterion 3: plateaus {p0_plateau:.4e} / {phat_plateau:.4e}, ratio {ratio:.1}"
    );
}

/// Criterion 4: the semidiscrete decay study reproduces the frozen decay
/// exponent of every mesh within +/- 0.02 and finishes within its budget.
#[test]
fn criterion_4_semidiscrete_decay_exponents_match_baseline() {
    let start = Instant::now();
    let rows = run_convergence_eps(&ModalDecayConfig::default()).expect("decay study completes");
    let elapsed = start.elapsed();
    assert_eq!(rows.len(), EXPECTED_DECAY_EXPONENTS.len());
    let mut worst = 0.0f64;
    for (row, (elements, expected)) in rows.iter().zip(EXPECTED_DECAY_EXPONENTS) {
        assert_eq!(row.elements, elements);
        let dev = (row.exponent - expected).abs();
        worst = worst.max(dev);
        assert!(
            dev <= 0.02,
            "mesh {elements}: exponent {:.6} deviates {dev:.4} from baseline {expected:.6} (allowed 0.02)",
            row.exponent
        );
    }
    assert!(
        elapsed < Duration::from_secs(900),
        "study took {elapsed:?}, budget is 900 s"
    );
    println!(
        "criterion 4: 9/9 exponents within 0.02 (worst deviation {worst:.2e}), {:.1} s",
        elapsed.as_secs_f64()
    );
}

/// Criterion 5: at a fixed fine step, the distance between the limit models
/// and the stiff solution scales with the relaxation parameter: the
/// first-order limit at exponent 1.0 +/- 0.15 and the corrected solution at
/// 2.0 +/- 0.2.
#[test]
fn criterion_5_model_error_orders_in_relaxation_parameter() {
    let (net, scenario) = builtin("demo-network").expect("built-in network");
    let study = run_eps_order_study(&net, &scenario, &EpsOrderConfig::default())
        .expect("order study completes");
    for row in &study.rows {
        assert!(
            row.reference_gap < 0.01 * row.err_phat,
            "eps={:.1e}: reference gap {:.2e} not below 1% of the smallest error {:.2e}",
            row.eps,
            row.reference_gap,
            row.err_phat
        );
    }
    println!(
        "criterion 5: exponents {:.4} (first-order limit) / {:.4} (corrected)",
        study.slope_p0, study.slope_phat
    );
    assert!(
        (study.slope_p0 - 1.0).abs() <= 0.15,
        "first-order limit: expected exponent within 1.0 +/- 0.15, measured {:.4}",
        study.slope_p0
    );
    assert!(
        (study.slope_phat - 2.0).abs() <= 0.2,
        "corrected solution: expected exponent within 2.0 +/- 0.2, measured {:.4}. \
         The full second-order rate additionally requires the time derivative of the \
         data to satisfy the stationary flux relation at t = 0; the demo scenario's \
         exponentially decaying sources violate that, and the observable exponent \
         settles near 1.7 no matter how far the step and the reference are refined.",
        study.slope_phat
    );
}

/// Criterion 6a: every solver (three model forms, every registered scheme)
/// satisfies its boundary constraint at every stored node to 1e-10 — the
/// limit forms up to their recorded slack, the stiff form exactly — and the
/// correction tier obeys its homogeneous constraint. Checked on the demo
/// scenario and on a variant with time-varying boundary data.
#[test]
fn criterion_6a_boundary_constraints_hold_at_every_stored_node() {
    let (net, base_scenario) = builtin("demo-network").expect("built-in network");
    let mut wavy_scenario = base_scenario.clone();
    wavy_scenario.dirichlet = vec![
        TimeProfile::Sine { amplitude: 0.3, omega: 2.0 },
        TimeProfile::Sine { amplitude: 0.2, omega: 3.0 },
    ];
    let sys = assemble(&net, &MeshParams { elements_per_edge: 4 }).expect("assembly");
    let cfg = RunConfig::new(0.02, 50);
    let mut worst = 0.0f64;
    for scenario in [&base_scenario, &wavy_scenario] {
        let loads = Loads::new(&sys, scenario);
        let init = initial_state(&loads).expect("consistent initial state");
        for form in [
            ModelForm::LimitFirstOrder,
            ModelForm::LimitSecondOrder,
            ModelForm::Stiff { eps: 1e-3 },
        ] {
            for scheme in ["implicit-euler", "radau-iia-2", "radau-iia-3"] {
                let stepper = make_stepper(form, scheme).expect("stepper");
                let traj = stepper.run(&loads, &init, &cfg).expect("run completes");
                for idx in 0..traj.len() {
                    let bp = sys.b.matvec(&traj.potential[idx]);
                    let h = loads.boundary_values(traj.times[idx]);
                    for (v, (a, hv)) in bp.iter().zip(&h).enumerate() {
                        // Limit forms enforce B p - u = h with the stored
                        // slack u; the stiff form enforces B p = h directly.
                        let slack = traj.defect.as_ref().map_or(0.0, |d| d[idx][v]);
                        let residual = (a - slack - hv).abs();
                        worst = worst.max(residual);
                        assert!(
                            residual <= 1e-10,
                            "{}: node {idx}, boundary vertex {v}: residual {residual:.2e}",
                            stepper.describe()
                        );
                    }
                    if let Some(p1) = &traj.correction_potential {
                        for v in sys.b.matvec(&p1[idx]) {
                            worst = worst.max(v.abs());
                            assert!(
                                v.abs() <= 1e-10,
                                "{}: node {idx}: correction constraint residual {:.2e}",
                                stepper.describe(),
                                v.abs()
                            );
                        }
                    }
                }
            }
        }
    }
    println!("criterion 6a: worst constraint residual {worst:.2e} over 18 runs (bound 1e-10)");
}

/// Criterion 6b: for the undriven stiff system the discrete energy is
/// non-increasing from node to node under every registered scheme.
#[test]
fn criterion_6b_undriven_stiff_energy_never_increases() {
    let (net, mut scenario) = builtin("single-pipe").expect("built-in network");
    scenario.initial_potential = vec![Polynomial::new(vec![0.0, 1.0, -1.0])];
    scenario.initial_flux =
        InitialFluxSpec::Polynomials { values: vec![Polynomial::constant(0.3)] };
    let sys = assemble(&net, &MeshParams { elements_per_edge: 16 }).expect("assembly");
    let loads = Loads::new(&sys, &scenario);
    let init = initial_state(&loads).expect("consistent initial state");
    let cfg = RunConfig::new(0.01, 200);
    for eps in [1e-2, 1e-3] {
        for scheme in ["implicit-euler", "radau-iia-2", "radau-iia-3"] {
            let stepper = make_stepper(ModelForm::Stiff { eps }, scheme).expect("stepper");
            let traj = stepper.run(&loads, &init, &cfg).expect("run completes");
            let energies: Vec<f64> = (0..traj.len())
                .map(|i| hamiltonian(&sys, eps, &traj.potential[i], &traj.flux[i]))
                .collect();
            assert!(energies[0] > 0.0, "initial data must carry energy");
            for w in energies.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-12) + 1e-15,
                    "{} (eps={eps}): energy rose from {:.12e} to {:.12e}",
                    stepper.describe(),
                    w[0],
                    w[1]
                );
            }
            assert!(
                energies.last().unwrap() < &(0.5 * energies[0]),
                "{} (eps={eps}): energy barely decayed over the run",
                stepper.describe()
            );
        }
    }
    println!("criterion 6b: energy monotone for 6 scheme/eps combinations");
}

/// Criterion 6c: the scheme registry is honest about its schemes. The
/// two-stage Radau tableau passes full validation with sharp orders (3, 2)
/// and a stiffly-accurate final stage; backward Euler validates but is
/// rejected as a second-order scheme; the three-stage Radau validates at
/// orders (5, 3).
#[test]
fn criterion_6c_scheme_validation_accepts_and_rejects_correctly() {
    let radau2 = by_name("radau-iia-2").expect("registered scheme");
    radau2.validate().expect("two-stage Radau passes validation");
    assert!(radau2.check_order_conditions(3, 2), "two-stage Radau satisfies orders (3, 2)");
    assert!(!radau2.check_order_conditions(4, 2), "order 4 must fail: order 3 is sharp");
    assert!(radau2.check_algebraic_stability(), "two-stage Radau is algebraically stable");
    // Stiffly accurate: the node update reads off the final stage, which is
    // equivalent to b^T A^{-1} summing to the last unit vector.
    let weights = radau2.node_update_weights();
    let expected = [0.0, 1.0];
    for (w, e) in weights.iter().zip(expected) {
        assert!((w - e).abs() <= 1e-12, "node-update weights {weights:?} differ from {expected:?}");
    }

    let euler = by_name("implicit-euler").expect("registered scheme");
    euler.validate().expect("backward Euler passes validation");
    assert!(euler.check_order_conditions(1, 1), "backward Euler satisfies orders (1, 1)");
    assert!(!euler.check_order_conditions(2, 1), "backward Euler must fail order 2");

    let radau3 = by_name("radau-iia-3").expect("registered scheme");
    radau3.validate().expect("three-stage Radau passes validation");
    assert!(radau3.check_order_conditions(5, 3), "three-stage Radau satisfies orders (5, 3)");

    assert!(by_name("no-such-scheme").is_err(), "unknown names are rejected");
    println!("criterion 6c: registry validation accepts/rejects as specified");
}

/// Criterion 6d: the generic Runge-Kutta path with the one-stage backward
/// Euler tableau reproduces the hand-written backward Euler implementation
/// to 1e-12 in every stored field, for all three model forms.
#[test]
fn criterion_6d_one_stage_generic_path_matches_direct_euler() {
    let (net, scenario) = builtin("demo-network").expect("built-in network");
    let sys = assemble(&net, &MeshParams { elements_per_edge: 5 }).expect("assembly");
    let loads = Loads::new(&sys, &scenario);
    let init = initial_state(&loads).expect("consistent initial state");
    let cfg = RunConfig::new(0.05, 20);
    let mut worst = 0.0f64;
    for form in [
        ModelForm::LimitFirstOrder,
        ModelForm::LimitSecondOrder,
        ModelForm::Stiff { eps: 1e-3 },
    ] {
        let direct = make_stepper(form, "implicit-euler").expect("direct stepper");
        let generic = make_generic_stepper(form, "implicit-euler").expect("generic stepper");
        assert_ne!(
            direct.describe(),
            generic.describe(),
            "the two constructors must select different implementations"
        );
        let a = direct.run(&loads, &init, &cfg).expect("direct run");
        let b = generic.run(&loads, &init, &cfg).expect("generic run");
        let fields = [
            (Some(&a.potential), Some(&b.potential)),
            (Some(&a.flux), Some(&b.flux)),
            (Some(&a.multiplier), Some(&b.multiplier)),
            (a.defect.as_ref(), b.defect.as_ref()),
            (a.correction_potential.as_ref(), b.correction_potential.as_ref()),
            (a.correction_flux.as_ref(), b.correction_flux.as_ref()),
        ];
        for (fa, fb) in fields {
            assert_eq!(fa.is_some(), fb.is_some(), "field presence differs between paths");
            let (Some(fa), Some(fb)) = (fa, fb) else { continue };
            for (ra, rb) in fa.iter().zip(fb) {
                for (va, vb) in ra.iter().zip(rb) {
                    let d = (va - vb).abs();
                    worst = worst.max(d);
                    assert!(d <= 1e-12, "paths disagree by {d:.2e}");
                }
            }
        }
    }
    println!("criterion 6d: generic one-stage path matches direct Euler, worst gap {worst:.2e}");
}

/// Criterion 6e: the closed-form series solution is trustworthy and the
/// stiff solver converges to it. Every mode satisfies its second-order ODE
/// to 1e-9 relative across all damping regimes, the series hits its t = 0
/// data exactly, and the solver's final-time error against the series
/// shrinks with the mesh at an order well above one.
#[test]
fn criterion_6e_stiff_solver_converges_to_closed_form_series() {
    // Critical mode 4 puts modes 1..=3 in the overdamped regime, mode 4 on
    // the critical boundary, and modes 5..=8 in the oscillatory regime.
    let params = SeriesParams::with_critical_mode(4, 1.1, 8).expect("valid series parameters");
    let times = [0.0, 1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0];
    for case in [SeriesCase::FluxSeries, SeriesCase::PotentialSeries] {
        for k in 1..=params.max_mode {
            let theta = series::mode_stiffness(k);
            for t in times {
                let state = series::potential_mode(&params, case, k, t);
                let residual =
                    params.eps * state.second_derivative + state.derivative + theta * state.value;
                let scale = params.eps * state.second_derivative.abs()
                    + state.derivative.abs()
                    + theta * state.value.abs();
                assert!(
                    residual.abs() <= 1e-9 * scale.max(1.0),
                    "mode {k}, t={t}: ODE residual {:.2e} exceeds 1e-9 of scale {:.2e}",
                    residual.abs(),
                    scale
                );
            }
        }
    }

    // t = 0 traces match the prescribed initial data.
    for i in 0..=20 {
        let x = i as f64 / 20.0;
        assert!(
            series::potential(&params, SeriesCase::FluxSeries, x, 0.0).abs() <= 1e-12,
            "flux-driven case must start from zero potential"
        );
        let expected_flux: f64 = (1..=params.max_mode)
            .map(|k| {
                let kf = k as f64;
                (std::f64::consts::PI * kf * x).cos()
                    / (std::f64::consts::PI * kf.powf(params.alpha))
            })
            .sum();
        let got = series::flux(&params, SeriesCase::FluxSeries, x, 0.0);
        assert!(
            (got - expected_flux).abs() <= 1e-12,
            "x={x}: initial flux {got} differs from its cosine series {expected_flux}"
        );
        let expected_potential: f64 = (1..=params.max_mode)
            .map(|k| {
                let kf = k as f64;
                (std::f64::consts::PI * kf * x).sin() / kf.powf(1.0 + params.alpha)
            })
            .sum();
        let got = series::potential(&params, SeriesCase::PotentialSeries, x, 0.0);
        assert!(
            (got - expected_potential).abs() <= 1e-12,
            "x={x}: initial potential {got} differs from its sine series {expected_potential}"
        );
    }

    // The solver's final-time error against the series decays with the mesh.
    let cmp = run_oracle_comparison(&OracleComparisonConfig::default())
        .expect("comparison completes");
    for w in cmp.rows.windows(2) {
        assert!(
            w[1].error < w[0].error,
            "error did not decrease from {} to {} elements",
            w[0].elements,
            w[1].elements
        );
    }
    assert!(
        cmp.order > 1.5,
        "fitted spatial order {:.4} is not above 1.5",
        cmp.order
    );
    println!("criterion 6e: series self-consistent; solver-vs-series spatial order {:.4}", cmp.order);
}

/// Criterion 6f: the limit solvers' boundary slack vanishes to rounding for
/// boundary data their stages interpolate exactly, and refines at least at
/// first order in the step for smooth data.
#[test]
fn criterion_6f_boundary_slack_vanishes_or_refines_with_step() {
    let linear = TimeProfile::Polynomial { coefficients: vec![0.0, 1.0] };
    for scheme in ["implicit-euler", "radau-iia-2"] {
        let rows = defect_refinement(scheme, linear.clone(), &[0.1, 0.05], 1.0, 8)
            .expect("refinement completes");
        for (tau, defect) in rows {
            assert!(
                defect < 1e-12,
                "{scheme}, tau={tau}: slack {defect:.2e} for stage-interpolable data"
            );
        }
    }

    let smooth = TimeProfile::Sine { amplitude: 1.0, omega: 3.0 };
    let taus = [0.1, 0.05, 0.025, 0.0125, 0.00625];
    let mut slopes = Vec::new();
    for scheme in ["implicit-euler", "radau-iia-2"] {
        let rows = defect_refinement(scheme, smooth.clone(), &taus, 1.0, 8)
            .expect("refinement completes");
        for (tau, defect) in &rows {
            assert!(*defect > 1e-14, "{scheme}, tau={tau}: slack too small to fit a slope");
        }
        let fit = fit_power_law(
            &rows.iter().map(|r| r.0).collect::<Vec<_>>(),
            &rows.iter().map(|r| r.1).collect::<Vec<_>>(),
        );
        assert!(
            fit.exponent >= 0.9,
            "{scheme}: slack refines at exponent {:.4}, below the required 0.9",
            fit.exponent
        );
        slopes.push((scheme, fit.exponent));
    }
    println!(
        "criterion 6f: slack exact for linear data; refinement exponents {} {:.3}, {} {:.3}",
        slopes[0].0, slopes[0].1, slopes[1].0, slopes[1].1
    );
}
