//! Prebuilt numerical studies: convergence measurements and solver/oracle
//! comparisons, with CSV serialization for plotting.
//!
//! Four studies are provided.
//!
//! * [`run_convergence_tau`]: time-step refinement of the two limit solvers
//!   against a finely resolved stiff reference on a fixed network and mesh.
//!   Shows each scheme's time order and the model-error plateaus where the
//!   limit approximations stop improving.
//! * [`run_eps_order_study`]: relaxation-parameter refinement at a fixed
//!   time step, measuring how fast the first- and second-order limit
//!   solutions approach the stiff solution as `eps` shrinks.
//! * [`run_convergence_eps`]: a semidiscrete study on a single pipe with
//!   rough initial flux data, solved mode-exactly through the generalized
//!   eigendecomposition — no time discretization at all. Measures the
//!   observed power `err ~ eps^alpha` on a sequence of meshes.
//! * [`run_oracle_comparison`]: the stiff solver against the closed-form
//!   mode series under mesh refinement, isolating the spatial order.
//!
//! Error measurement follows one rule throughout: differences are formed at
//! the solver's own time nodes first and those difference vectors are then
//! reconstructed in time (degree matched to the scheme's stage order), so
//! the interpolation error of the reconstruction cancels structurally
//! instead of polluting the measurement.

use thiserror::Error;

use crate::assembly::{assemble, AssemblyError, Loads, MeshParams};
use crate::network::{builtin, EdgeSource, InitialFluxSpec, NetworkError, Polynomial, Scenario, TimeProfile};
use crate::norms::{fit_power_law, sup_weighted_norm, weighted_norm, SampleRule};
use crate::reconstruct::{ReconstructError, Reconstruction, ReconstructionKind};
use crate::series::{self, SeriesCase, SeriesParams};
use crate::sparse::CsrMatrix;
use crate::stepping::{initial_state, make_stepper, ModelForm, RunConfig, SteppingError, Trajectory};
use crate::tableau::by_name;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Stepping(#[from] SteppingError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
    #[error(transparent)]
    Tableau(#[from] crate::tableau::TableauError),
    #[error("invalid study configuration: {0}")]
    BadConfig(String),
}

/// Formats floats for CSV output with full round-trip precision.
fn csv_float(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------------
// Time-step refinement study
// ---------------------------------------------------------------------------

/// Configuration of the time-step refinement study.
#[derive(Debug, Clone)]
pub struct TauStudyConfig {
    pub elements_per_edge: usize,
    /// Relaxation parameter of the stiff reference model.
    pub eps: f64,
    pub final_time: f64,
    /// Coarsest step; level k uses `base_tau / 2^k`.
    pub base_tau: f64,
    /// Number of halvings (levels 0 .. levels-1).
    pub levels: usize,
    /// The reference runs at `tau_min / reference_substeps` and keeps every
    /// `reference_substeps`-th node, so its stored lattice contains every
    /// node of every level. A second reference at twice that step provides
    /// an internal accuracy estimate ([`TauStudy::reference_gap`]).
    pub reference_substeps: usize,
    /// Scheme of the reference runs.
    pub reference_scheme: String,
}

impl Default for TauStudyConfig {
    fn default() -> Self {
        TauStudyConfig {
            elements_per_edge: 10,
            eps: 1e-3,
            final_time: 1.0,
            base_tau: 0.2,
            levels: 14,
            reference_substeps: 25,
            reference_scheme: "radau-iia-2".to_string(),
        }
    }
}

/// One refinement level of the time-step study.
#[derive(Debug, Clone, Copy)]
pub struct TauStudyRow {
    pub tau: f64,
    pub err_p0_euler: f64,
    pub err_phat_euler: f64,
    pub err_p0_radau: f64,
    pub err_phat_radau: f64,
}

#[derive(Debug, Clone)]
pub struct TauStudy {
    pub rows: Vec<TauStudyRow>,
    /// Largest nodal distance between the two reference runs (common
    /// lattice): an upper estimate of the reference's own inaccuracy. Must
    /// be far below the smallest tabulated error for the study to be valid.
    pub reference_gap: f64,
    pub eps: f64,
}

/// Forms solver-minus-reference differences at the solver's nodes,
/// reconstructs them at the scheme's degree, and takes the supremum of the
/// mass-weighted norm over nodes and midpoints (optionally refined near zero).
fn c_norm_of_node_diff(
    solver_rows: &[Vec<f64>],
    reference_rows: &[Vec<f64>],
    stride: usize,
    tau: f64,
    degree: usize,
    weight: &CsrMatrix,
    rule: &SampleRule,
) -> Result<f64, ExperimentError> {
    let diffs: Vec<Vec<f64>> = solver_rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .zip(&reference_rows[i * stride])
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    let recon = Reconstruction::new(ReconstructionKind::of_degree(degree), tau, diffs)?;
    Ok(sup_weighted_norm(&recon, weight, rule))
}

/// Runs the time-step refinement study on a network and scenario.
pub fn run_convergence_tau(
    network: &crate::network::Network,
    scenario: &Scenario,
    cfg: &TauStudyConfig,
) -> Result<TauStudy, ExperimentError> {
    if cfg.levels == 0 {
        return Err(ExperimentError::BadConfig("need at least one level".into()));
    }
    let base_steps_f = cfg.final_time / cfg.base_tau;
    let base_steps = base_steps_f.round() as usize;
    if base_steps == 0 || (base_steps_f - base_steps as f64).abs() > 1e-9 {
        return Err(ExperimentError::BadConfig(format!(
            "final time {} is not an integer multiple of base step {}",
            cfg.final_time, cfg.base_tau
        )));
    }
    if cfg.reference_substeps < 2 {
        return Err(ExperimentError::BadConfig(
            "reference must run at least two substeps per finest level step".into(),
        ));
    }
    let sys = assemble(network, &MeshParams { elements_per_edge: cfg.elements_per_edge })?;
    let loads = Loads::new(&sys, scenario);
    let init = initial_state(&loads)?;

    let finest_steps = base_steps << (cfg.levels - 1);
    let tau_min = cfg.base_tau / (1 << (cfg.levels - 1)) as f64;
    let ref_steps = finest_steps * cfg.reference_substeps;
    if ref_steps % 2 != 0 {
        return Err(ExperimentError::BadConfig(
            "reference step count must be even for the halved-step check".into(),
        ));
    }

    // Reference: stiff solve at tau_min / substeps, stored on the tau_min
    // lattice; a second run at twice the step, stored on the 2 tau_min
    // lattice, estimates the reference's own error.
    let stiff = make_stepper(ModelForm::Stiff { eps: cfg.eps }, &cfg.reference_scheme)?;
    let tau_ref = tau_min / cfg.reference_substeps as f64;
    let reference = stiff.run(
        &loads,
        &init,
        &RunConfig::with_thinning(tau_ref, ref_steps, cfg.reference_substeps),
    )?;
    let reference_half = stiff.run(
        &loads,
        &init,
        &RunConfig::with_thinning(2.0 * tau_ref, ref_steps / 2, cfg.reference_substeps),
    )?;
    let mut reference_gap: f64 = 0.0;
    for (j, row) in reference_half.potential.iter().enumerate() {
        let diff: Vec<f64> = row.iter().zip(&reference.potential[2 * j]).map(|(a, b)| a - b).collect();
        reference_gap = reference_gap.max(weighted_norm(&sys.m2, &diff));
    }

    let rule = SampleRule::with_midpoints();
    let mut rows = Vec::with_capacity(cfg.levels);
    for level in 0..cfg.levels {
        let tau = cfg.base_tau / (1 << level) as f64;
        let steps = base_steps << level;
        let stride = 1 << (cfg.levels - 1 - level);
        let run_cfg = RunConfig::new(tau, steps);
        let mut errs = [0.0f64; 4];
        for (si, scheme) in ["implicit-euler", "radau-iia-2"].iter().enumerate() {
            let degree = by_name(scheme)?.order.1;
            let first = make_stepper(ModelForm::LimitFirstOrder, scheme)?.run(&loads, &init, &run_cfg)?;
            errs[2 * si] = c_norm_of_node_diff(
                &first.potential,
                &reference.potential,
                stride,
                tau,
                degree,
                &sys.m2,
                &rule,
            )?;
            let second = make_stepper(ModelForm::LimitSecondOrder, scheme)?.run(&loads, &init, &run_cfg)?;
            errs[2 * si + 1] = c_norm_of_node_diff(
                &second.corrected_potential(cfg.eps),
                &reference.potential,
                stride,
                tau,
                degree,
                &sys.m2,
                &rule,
            )?;
        }
        rows.push(TauStudyRow {
            tau,
            err_p0_euler: errs[0],
            err_phat_euler: errs[1],
            err_p0_radau: errs[2],
            err_phat_radau: errs[3],
        });
    }
    Ok(TauStudy { rows, reference_gap, eps: cfg.eps })
}

pub fn tau_study_csv(study: &TauStudy) -> String {
    let mut out = String::from("tau,err_p0_euler,err_phat_euler,err_p0_radau,err_phat_radau\n");
    for r in &study.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_float(r.tau),
            csv_float(r.err_p0_euler),
            csv_float(r.err_phat_euler),
            csv_float(r.err_p0_radau),
            csv_float(r.err_phat_radau),
        ));
    }
    out.push_str(&format!("# eps = {}\n", csv_float(study.eps)));
    out.push_str(&format!("# reference_gap = {}\n", csv_float(study.reference_gap)));
    out
}

// ---------------------------------------------------------------------------
// Relaxation-parameter order study
// ---------------------------------------------------------------------------

/// Configuration of the eps-refinement study at fixed time step.
#[derive(Debug, Clone)]
pub struct EpsOrderConfig {
    pub elements_per_edge: usize,
    pub final_time: f64,
    /// Fixed time step of the limit runs (fine enough that the time error
    /// sits far below the model errors being measured).
    pub tau: f64,
    pub eps_values: Vec<f64>,
    /// Each per-eps stiff reference runs at `tau / reference_substeps` and
    /// stores the half-step lattice; a second run at twice that step gives
    /// the per-eps reference gap. Must be divisible by 4.
    pub reference_substeps: usize,
    pub scheme: String,
}

impl Default for EpsOrderConfig {
    fn default() -> Self {
        EpsOrderConfig {
            elements_per_edge: 10,
            final_time: 1.0,
            tau: 1.953125e-4,
            eps_values: vec![1e-2, 1e-3, 1e-4],
            reference_substeps: 64,
            scheme: "radau-iia-2".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpsOrderRow {
    pub eps: f64,
    /// Distance of the first-order limit potential from the stiff solution.
    pub err_p0: f64,
    /// Distance of the corrected potential `p + eps p1` from the stiff solution.
    pub err_phat: f64,
    /// Nodal distance between the reference and its halved-step rerun.
    pub reference_gap: f64,
}

#[derive(Debug, Clone)]
pub struct EpsOrderStudy {
    pub rows: Vec<EpsOrderRow>,
    /// Fitted exponent of `err_p0 ~ eps^a`.
    pub slope_p0: f64,
    /// Fitted exponent of `err_phat ~ eps^a`.
    pub slope_phat: f64,
}

pub fn run_eps_order_study(
    network: &crate::network::Network,
    scenario: &Scenario,
    cfg: &EpsOrderConfig,
) -> Result<EpsOrderStudy, ExperimentError> {
    if cfg.eps_values.len() < 2 {
        return Err(ExperimentError::BadConfig("need at least two eps values to fit a slope".into()));
    }
    if cfg.reference_substeps % 4 != 0 {
        return Err(ExperimentError::BadConfig("reference_substeps must be divisible by 4".into()));
    }
    let steps_f = cfg.final_time / cfg.tau;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 {
        return Err(ExperimentError::BadConfig(format!(
            "final time {} is not an integer multiple of tau {}",
            cfg.final_time, cfg.tau
        )));
    }
    let sys = assemble(network, &MeshParams { elements_per_edge: cfg.elements_per_edge })?;
    let loads = Loads::new(&sys, scenario);
    let init = initial_state(&loads)?;
    let degree = by_name(&cfg.scheme)?.order.1;

    // The limit solutions do not depend on eps: solve them once.
    let run_cfg = RunConfig::new(cfg.tau, steps);
    let first = make_stepper(ModelForm::LimitFirstOrder, &cfg.scheme)?.run(&loads, &init, &run_cfg)?;
    let second = make_stepper(ModelForm::LimitSecondOrder, &cfg.scheme)?.run(&loads, &init, &run_cfg)?;

    let stiff_scheme = &cfg.scheme;
    let sub = cfg.reference_substeps;
    let mut rows = Vec::with_capacity(cfg.eps_values.len());
    for &eps in &cfg.eps_values {
        let stiff = make_stepper(ModelForm::Stiff { eps }, stiff_scheme)?;
        // Reference on the tau/2 lattice, plus a halved-step consistency run.
        let reference = stiff.run(
            &loads,
            &init,
            &RunConfig::with_thinning(cfg.tau / sub as f64, steps * sub, sub / 2),
        )?;
        let reference_half = stiff.run(
            &loads,
            &init,
            &RunConfig::with_thinning(2.0 * cfg.tau / sub as f64, steps * sub / 2, sub / 4),
        )?;
        let mut gap: f64 = 0.0;
        for (j, row) in reference_half.potential.iter().enumerate() {
            let diff: Vec<f64> = row.iter().zip(&reference.potential[j]).map(|(a, b)| a - b).collect();
            gap = gap.max(weighted_norm(&sys.m2, &diff));
        }
        // Solver nodes sit on every second stored reference row.
        let rule = SampleRule { midpoints: true, log_refine_scale: Some(eps) };
        let err_p0 =
            c_norm_of_node_diff(&first.potential, &reference.potential, 2, cfg.tau, degree, &sys.m2, &rule)?;
        let err_phat = c_norm_of_node_diff(
            &second.corrected_potential(eps),
            &reference.potential,
            2,
            cfg.tau,
            degree,
            &sys.m2,
            &rule,
        )?;
        rows.push(EpsOrderRow { eps, err_p0, err_phat, reference_gap: gap });
    }

    let eps_list: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let slope_p0 = fit_power_law(&eps_list, &rows.iter().map(|r| r.err_p0).collect::<Vec<_>>()).exponent;
    let slope_phat = fit_power_law(&eps_list, &rows.iter().map(|r| r.err_phat).collect::<Vec<_>>()).exponent;
    Ok(EpsOrderStudy { rows, slope_p0, slope_phat })
}

pub fn eps_order_csv(study: &EpsOrderStudy) -> String {
    let mut out = String::from("eps,err_p0,err_phat,reference_gap\n");
    for r in &study.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_float(r.eps),
            csv_float(r.err_p0),
            csv_float(r.err_phat),
            csv_float(r.reference_gap),
        ));
    }
    out.push_str(&format!("# slope_p0 = {:.6}\n", study.slope_p0));
    out.push_str(&format!("# slope_phat = {:.6}\n", study.slope_phat));
    out
}

// ---------------------------------------------------------------------------
// Semidiscrete eps-decay study (mode-exact, no time stepping)
// ---------------------------------------------------------------------------

/// Configuration of the semidiscrete decay study on a single pipe.
#[derive(Debug, Clone)]
pub struct ModalDecayConfig {
    /// Element counts of the meshes to sweep.
    pub meshes: Vec<usize>,
    /// Spectral decay exponent of the rough initial flux data.
    pub data_exponent: f64,
    /// Truncation of the cosine series defining the initial flux.
    pub truncation: usize,
    /// Number of eps samples: `eps_i = 1 / (8 sqrt(2)^i)`, i = 1..=count.
    pub eps_count: usize,
    pub final_time: f64,
}

impl Default for ModalDecayConfig {
    fn default() -> Self {
        ModalDecayConfig {
            meshes: vec![6, 11, 21, 41, 81, 161, 321, 641, 1281],
            data_exponent: 0.55,
            truncation: 12810,
            eps_count: 16,
            final_time: 1.0,
        }
    }
}

/// Result for one mesh of the semidiscrete decay study.
#[derive(Debug, Clone)]
pub struct ModalDecayRow {
    pub elements: usize,
    pub h: f64,
    /// Fitted exponent of `sup_t ||p_eps(t)|| ~ C eps^alpha`.
    pub exponent: f64,
    pub prefactor: f64,
    pub fit_residual: f64,
    /// The measured `(eps, error)` samples behind the fit.
    pub errors: Vec<(f64, f64)>,
}

/// Eigendecomposition of the interior Laplacian generalized by the mass
/// matrix: returns the eigenvalues and the matrix of mass-orthonormal
/// eigenvector columns.
fn interior_modes(elements: usize) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    use nalgebra::DMatrix;
    let n = elements - 1;
    let h = 1.0 / elements as f64;
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 / h
        } else if i.abs_diff(j) == 1 {
            -1.0 / h
        } else {
            0.0
        }
    });
    let m2 = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            4.0 * h / 6.0
        } else if i.abs_diff(j) == 1 {
            h / 6.0
        } else {
            0.0
        }
    });
    let chol = m2.cholesky().expect("interior mass matrix is positive definite");
    let l = chol.l();
    let x = l.solve_lower_triangular(&a).expect("triangular solve");
    let b = l.solve_lower_triangular(&x.transpose()).expect("triangular solve").transpose();
    let b = 0.5 * (&b + &b.transpose());
    let se = nalgebra::SymmetricEigen::new(b);
    let v = l
        .transpose()
        .solve_upper_triangular(&se.eigenvectors)
        .expect("triangular solve");
    (se.eigenvalues.iter().copied().collect(), v)
}

/// Time samples resolving both the O(eps) initial layer and the slow decay.
fn decay_time_samples(eps: f64, final_time: f64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..=2000).map(|i| final_time * i as f64 / 2000.0).collect();
    let lo = (0.01 * eps).ln();
    let hi = (100.0 * eps).min(final_time).ln();
    for i in 0..1500 {
        times.push((lo + (hi - lo) * i as f64 / 1499.0).exp());
    }
    let layer = (12.0 * eps).min(final_time);
    for i in 0..=4000 {
        times.push(layer * i as f64 / 4000.0);
    }
    times
}

/// Runs the semidiscrete decay study: for each mesh, how fast the exact
/// semidiscrete solution (zero initial potential, rough cosine-series flux)
/// collapses onto its (zero) parabolic limit as `eps -> 0`.
pub fn run_convergence_eps(cfg: &ModalDecayConfig) -> Result<Vec<ModalDecayRow>, ExperimentError> {
    if cfg.meshes.iter().any(|&n| n < 2) {
        return Err(ExperimentError::BadConfig("meshes need at least 2 elements".into()));
    }
    if cfg.eps_count < 2 {
        return Err(ExperimentError::BadConfig("need at least two eps samples".into()));
    }
    let mut rows = Vec::with_capacity(cfg.meshes.len());
    for &elements in &cfg.meshes {
        let (eigenvalues, modes) = interior_modes(elements);
        // Initial flux: exact element averages of the truncated cosine series.
        let m0 = series::cosine_series_element_averages(cfg.data_exponent, cfg.truncation, elements);
        // Interior rows of the incidence form: (K' m)_i = m_{i-1} - m_i.
        let n = elements - 1;
        let ktm = nalgebra::DVector::from_fn(n, |i, _| m0[i] - m0[i + 1]);
        // Modal initial velocities (the initial potential is zero).
        let dy0 = modes.tr_mul(&ktm);

        let mut errors = Vec::with_capacity(cfg.eps_count);
        for i in 1..=cfg.eps_count {
            let eps = 1.0 / (8.0 * 2.0f64.sqrt().powi(i as i32));
            let mut sup: f64 = 0.0;
            for t in decay_time_samples(eps, cfg.final_time) {
                let mut sq = 0.0;
                for k in 0..n {
                    let s = series::mode_unit_responses(eps, eigenvalues[k], t).0;
                    let y = dy0[k] * s.value;
                    sq += y * y;
                }
                sup = sup.max(sq);
            }
            errors.push((eps, sup.sqrt()));
        }
        let fit = fit_power_law(
            &errors.iter().map(|e| e.0).collect::<Vec<_>>(),
            &errors.iter().map(|e| e.1).collect::<Vec<_>>(),
        );
        rows.push(ModalDecayRow {
            elements,
            h: 1.0 / elements as f64,
            exponent: fit.exponent,
            prefactor: fit.prefactor,
            fit_residual: fit.residual,
            errors,
        });
    }
    Ok(rows)
}

pub fn modal_decay_csv(rows: &[ModalDecayRow]) -> String {
    let mut out = String::from("h,alpha,prefactor,fit_residual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_float(r.h),
            csv_float(r.exponent),
            csv_float(r.prefactor),
            csv_float(r.fit_residual),
        ));
    }
    out
}

/// The raw `(eps, error)` samples of every mesh, long format.
pub fn modal_decay_samples_csv(rows: &[ModalDecayRow]) -> String {
    let mut out = String::from("elements,eps,error\n");
    for r in rows {
        for (eps, err) in &r.errors {
            out.push_str(&format!("{},{},{}\n", r.elements, csv_float(*eps), csv_float(*err)));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Stiff solver vs. closed-form series: spatial order
// ---------------------------------------------------------------------------

/// Configuration of the solver-against-series comparison.
#[derive(Debug, Clone)]
pub struct OracleComparisonConfig {
    /// Mode rendered critically damped by the chosen eps.
    pub critical_mode: usize,
    /// Spectral decay exponent of the initial flux data.
    pub alpha: f64,
    /// Truncation of the series (same truncation on both sides).
    pub modes: usize,
    pub final_time: f64,
    pub steps: usize,
    pub meshes: Vec<usize>,
    pub scheme: String,
}

impl Default for OracleComparisonConfig {
    fn default() -> Self {
        OracleComparisonConfig {
            critical_mode: 4,
            alpha: 1.1,
            modes: 8,
            final_time: 5e-3,
            steps: 4096,
            meshes: vec![16, 32, 64, 128],
            scheme: "radau-iia-2".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleComparisonRow {
    pub elements: usize,
    pub h: f64,
    /// Mass-weighted node error of the final-time potential against the
    /// closed-form series.
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub rows: Vec<OracleComparisonRow>,
    /// Fitted spatial order of the final-time error.
    pub order: f64,
}

/// Runs the stiff solver on a single pipe with cosine-series initial flux
/// and compares the final-time potential against the closed-form series,
/// mesh by mesh.
pub fn run_oracle_comparison(cfg: &OracleComparisonConfig) -> Result<OracleComparison, ExperimentError> {
    if cfg.meshes.len() < 2 {
        return Err(ExperimentError::BadConfig("need at least two meshes to fit an order".into()));
    }
    let params = SeriesParams::with_critical_mode(cfg.critical_mode, cfg.alpha, cfg.modes)?;
    let scenario = Scenario {
        initial_potential: vec![Polynomial::zero()],
        initial_flux: InitialFluxSpec::CosineSeries { exponent: cfg.alpha, modes: cfg.modes },
        source_flux: vec![EdgeSource::zero()],
        source_potential: vec![EdgeSource::zero()],
        dirichlet: vec![TimeProfile::zero(), TimeProfile::zero()],
        demand: vec![],
    };
    let (net, _) = builtin("single-pipe")?;
    let tau = cfg.final_time / cfg.steps as f64;
    let mut rows = Vec::with_capacity(cfg.meshes.len());
    for &elements in &cfg.meshes {
        let sys = assemble(&net, &MeshParams { elements_per_edge: elements })?;
        let loads = Loads::new(&sys, &scenario);
        let init = initial_state(&loads)?;
        let stepper = make_stepper(ModelForm::Stiff { eps: params.eps }, &cfg.scheme)?;
        let traj = stepper.run(&loads, &init, &RunConfig::with_thinning(tau, cfg.steps, cfg.steps))?;
        let p_final = traj.potential.last().expect("trajectory has rows");
        let mut diff = vec![0.0; sys.n_potential()];
        for node in 0..=elements {
            let x = node as f64 / elements as f64;
            let dof = sys.dofs.potential_dof(0, node);
            diff[dof] = p_final[dof] - series::potential(&params, SeriesCase::FluxSeries, x, cfg.final_time);
        }
        rows.push(OracleComparisonRow {
            elements,
            h: 1.0 / elements as f64,
            error: weighted_norm(&sys.m2, &diff),
        });
    }
    let order = fit_power_law(
        &rows.iter().map(|r| r.h).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error).collect::<Vec<_>>(),
    )
    .exponent;
    Ok(OracleComparison { rows, order })
}

pub fn oracle_comparison_csv(cmp: &OracleComparison) -> String {
    let mut out = String::from("h,error\n");
    for r in &cmp.rows {
        out.push_str(&format!("{},{}\n", csv_float(r.h), csv_float(r.error)));
    }
    out.push_str(&format!("# order = {:.6}\n", cmp.order));
    out
}

// ---------------------------------------------------------------------------
// Boundary-defect refinement (slack variable of the limit solvers)
// ---------------------------------------------------------------------------

/// Maximum absolute boundary defect of a first-order limit run.
pub fn max_defect(traj: &Trajectory) -> f64 {
    traj.defect
        .as_ref()
        .map(|rows| rows.iter().flatten().fold(0.0f64, |acc, &v| acc.max(v.abs())))
        .unwrap_or(0.0)
}

/// Runs the first-order limit solver on a single pipe driven purely by a
/// boundary profile and reports the maximum defect for each step size.
/// The defect vanishes identically for boundary data the stages interpolate
/// exactly and shrinks at the scheme's stage order otherwise.
pub fn defect_refinement(
    scheme: &str,
    boundary: TimeProfile,
    taus: &[f64],
    final_time: f64,
    elements: usize,
) -> Result<Vec<(f64, f64)>, ExperimentError> {
    let (net, _) = builtin("single-pipe")?;
    let scenario = Scenario {
        initial_potential: vec![Polynomial::zero()],
        initial_flux: InitialFluxSpec::Consistent,
        source_flux: vec![EdgeSource::zero()],
        source_potential: vec![EdgeSource::zero()],
        dirichlet: vec![TimeProfile::zero(), boundary],
        demand: vec![],
    };
    let sys = assemble(&net, &MeshParams { elements_per_edge: elements })?;
    let loads = Loads::new(&sys, &scenario);
    let init = initial_state(&loads)?;
    let stepper = make_stepper(ModelForm::LimitFirstOrder, scheme)?;
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let steps = (final_time / tau).round() as usize;
        if steps == 0 || (final_time / tau - steps as f64).abs() > 1e-9 {
            return Err(ExperimentError::BadConfig(format!(
                "final time {final_time} is not an integer multiple of tau {tau}"
            )));
        }
        let traj = stepper.run(&loads, &init, &RunConfig::new(tau, steps))?;
        out.push((tau, max_defect(&traj)));
    }
    Ok(out)
}
