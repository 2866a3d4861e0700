//! Time integrators for the semi-discrete network systems.
//!
//! Three model forms are integrated:
//!
//! * **Stiff (hyperbolic) form** — the full system with the flux relaxation
//!   time `eps`. This is the reference model; it is an index-2
//!   differential-algebraic system because the boundary potentials are
//!   enforced as constraints.
//! * **First-order limit form** — the flux is eliminated through the
//!   stationary relation `Md m = f - K p`, leaving a constrained parabolic
//!   evolution for the potential. Its solution approximates the stiff model
//!   to first order in `eps`.
//! * **Second-order limit form** — additionally evolves correction fields
//!   `(p1, m1)` so that `p + eps*p1`, `m + eps*m1` approximate the stiff
//!   model to second order in `eps`. The corrections are driven by the time
//!   derivative of the limit flux, so both tiers are advanced together in
//!   one coupled linear system per step.
//!
//! Every integrator is an implicit Runge-Kutta scheme from
//! [`crate::tableau`]. The limit forms impose the boundary constraint twice
//! over: once as stated and once differentiated in time (which pins down the
//! multiplier). A slack variable reconciles the two; it vanishes when the
//! boundary data is compatible with the scheme's interpolation and shrinks
//! at the scheme's stage order otherwise, which makes it a useful on-line
//! defect indicator. Backward Euler also ships as a hand-written one-stage
//! implementation of each form, kept separate from the Runge-Kutta code path
//! so the two can be cross-checked against each other.

use thiserror::Error;

use crate::assembly::{self, AssembledSystem, AssemblyError, Loads};
use crate::sparse::{factorize, LuFactorization, SparseError, TripletBuilder};
use crate::tableau::{by_name, ButcherTableau, TableauError};

/// Largest allowed violation of `B p(0) = h(0)`; starting from potentials
/// that break the boundary constraint makes the multiplier meaningless.
pub const INITIAL_BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SteppingError {
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("initial potential violates the boundary values (residual {residual:.3e})")]
    InconsistentBoundaryData { residual: f64 },
    #[error("invalid run configuration: {0}")]
    BadConfig(String),
    #[error("state length mismatch: expected {expected} {what} values, got {got}")]
    StateLength { what: &'static str, expected: usize, got: usize },
}

/// Uniform time grid and storage thinning for one integrator run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub tau: f64,
    pub steps: usize,
    /// Store every this-many-th node (the initial state is always stored).
    pub keep_every: usize,
}

impl RunConfig {
    pub fn new(tau: f64, steps: usize) -> Self {
        RunConfig { tau, steps, keep_every: 1 }
    }

    pub fn with_thinning(tau: f64, steps: usize, keep_every: usize) -> Self {
        RunConfig { tau, steps, keep_every }
    }

    fn validate(&self) -> Result<(), SteppingError> {
        if !(self.tau > 0.0) {
            return Err(SteppingError::BadConfig(format!("step size must be positive, got {}", self.tau)));
        }
        if self.steps == 0 {
            return Err(SteppingError::BadConfig("need at least one step".into()));
        }
        if self.keep_every == 0 {
            return Err(SteppingError::BadConfig("keep_every must be at least 1".into()));
        }
        if self.steps % self.keep_every != 0 {
            return Err(SteppingError::BadConfig(format!(
                "steps ({}) must be a multiple of keep_every ({}) so the final time is stored",
                self.steps, self.keep_every
            )));
        }
        Ok(())
    }
}

/// Initial data for a run: nodal potential and elementwise flux.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub potential: Vec<f64>,
    pub flux: Vec<f64>,
}

/// Builds the initial state a scenario describes (nodal interpolation of the
/// potential, element averages or the consistent closure for the flux).
pub fn initial_state(loads: &Loads) -> Result<InitialState, AssemblyError> {
    let sys = loads.system();
    let potential = assembly::initial_potential(sys, loads.scenario())?;
    let flux = assembly::initial_flux(sys, loads, &potential);
    Ok(InitialState { potential, flux })
}

/// Discrete solution on the stored time nodes.
///
/// `potential`/`flux`/`multiplier` always hold one row per stored node. The
/// limit-form integrators also record the constraint slack (`defect`) and,
/// for the second-order form, the correction fields. Rows at t = 0 hold the
/// initial data with zero multiplier/defect entries, since those quantities
/// are produced by the first step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub potential: Vec<Vec<f64>>,
    pub flux: Vec<Vec<f64>>,
    pub multiplier: Vec<Vec<f64>>,
    pub defect: Option<Vec<Vec<f64>>>,
    pub correction_potential: Option<Vec<Vec<f64>>>,
    pub correction_flux: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Spacing of the stored nodes (run step size x keep_every).
    pub fn stored_tau(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Potential with the second-order correction folded in: `p + eps * p1`.
    /// Requires a trajectory from the second-order limit form.
    pub fn corrected_potential(&self, eps: f64) -> Vec<Vec<f64>> {
        let p1 = self.correction_potential.as_ref().expect("trajectory has no correction fields");
        self.potential
            .iter()
            .zip(p1)
            .map(|(p, q)| p.iter().zip(q).map(|(a, b)| a + eps * b).collect())
            .collect()
    }

    /// Flux with the second-order correction folded in: `m + eps * m1`.
    pub fn corrected_flux(&self, eps: f64) -> Vec<Vec<f64>> {
        let m1 = self.correction_flux.as_ref().expect("trajectory has no correction fields");
        self.flux
            .iter()
            .zip(m1)
            .map(|(m, q)| m.iter().zip(q).map(|(a, b)| a + eps * b).collect())
            .collect()
    }
}

/// Total energy of a state: `(p^T M2 p + eps * m^T M1 m) / 2`. For
/// homogeneous data the continuous stiff model dissipates it, and the
/// algebraically stable integrators preserve that monotonicity.
pub fn hamiltonian(sys: &AssembledSystem, eps: f64, p: &[f64], m: &[f64]) -> f64 {
    let m2p = sys.m2.matvec(p);
    let m1m = sys.m1.matvec(m);
    let pp: f64 = p.iter().zip(&m2p).map(|(a, b)| a * b).sum();
    let mm: f64 = m.iter().zip(&m1m).map(|(a, b)| a * b).sum();
    0.5 * (pp + eps * mm)
}

/// A time integrator for one model form and scheme.
pub trait Stepper {
    /// Human-readable description (model form plus scheme).
    fn describe(&self) -> String;

    /// Integrates `cfg.steps` steps from `init` and returns the stored nodes.
    fn run(&self, loads: &Loads, init: &InitialState, cfg: &RunConfig) -> Result<Trajectory, SteppingError>;
}

/// Which model form a stepper integrates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelForm {
    /// Constrained parabolic limit; flux recovered algebraically.
    LimitFirstOrder,
    /// Limit plus correction fields for second-order accuracy in `eps`.
    LimitSecondOrder,
    /// Full stiff system with relaxation time `eps`.
    Stiff { eps: f64 },
}

/// Creates the integrator for a model form and scheme name.
///
/// `implicit-euler` returns the dedicated one-stage implementation; every
/// other name is resolved through the tableau registry and run through the
/// generic Runge-Kutta path. The tableau is fully validated first.
pub fn make_stepper(form: ModelForm, scheme: &str) -> Result<Box<dyn Stepper>, SteppingError> {
    let tableau = by_name(scheme)?;
    tableau.validate()?;
    Ok(match (form, scheme) {
        (ModelForm::LimitFirstOrder, "implicit-euler") => Box::new(EulerLimitFirstOrder),
        (ModelForm::LimitSecondOrder, "implicit-euler") => Box::new(EulerLimitSecondOrder),
        (ModelForm::Stiff { eps }, "implicit-euler") => Box::new(EulerStiff { eps }),
        (ModelForm::LimitFirstOrder, _) => Box::new(RkLimitFirstOrder { tableau }),
        (ModelForm::LimitSecondOrder, _) => Box::new(RkLimitSecondOrder { tableau }),
        (ModelForm::Stiff { eps }, _) => Box::new(RkStiff { tableau, eps }),
    })
}

/// Creates the integrator through the generic Runge-Kutta path regardless of
/// the scheme name.
///
/// `make_stepper` special-cases `implicit-euler` to a hand-written one-stage
/// implementation; this constructor skips that shortcut so the two code paths
/// can be cross-validated against each other. For every other scheme it is
/// equivalent to `make_stepper`.
pub fn make_generic_stepper(
    form: ModelForm,
    scheme: &str,
) -> Result<Box<dyn Stepper>, SteppingError> {
    let tableau = by_name(scheme)?;
    tableau.validate()?;
    Ok(match form {
        ModelForm::LimitFirstOrder => Box::new(RkLimitFirstOrder { tableau }),
        ModelForm::LimitSecondOrder => Box::new(RkLimitSecondOrder { tableau }),
        ModelForm::Stiff { eps } => Box::new(RkStiff { tableau, eps }),
    })
}

fn check_init(loads: &Loads, init: &InitialState, cfg: &RunConfig) -> Result<(), SteppingError> {
    cfg.validate()?;
    let sys = loads.system();
    if init.potential.len() != sys.n_potential() {
        return Err(SteppingError::StateLength {
            what: "potential",
            expected: sys.n_potential(),
            got: init.potential.len(),
        });
    }
    if init.flux.len() != sys.n_flux() {
        return Err(SteppingError::StateLength { what: "flux", expected: sys.n_flux(), got: init.flux.len() });
    }
    let h0 = loads.boundary_values(0.0);
    let residual = sys
        .b
        .matvec(&init.potential)
        .iter()
        .zip(&h0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = 1.0 + h0.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if residual > INITIAL_BOUNDARY_TOL * scale {
        return Err(SteppingError::InconsistentBoundaryData { residual });
    }
    Ok(())
}

/// The algebraic flux of the limit form: `m = Md^{-1} (F(t) - K p)`.
fn limit_flux(sys: &AssembledSystem, loads: &Loads, t: f64, p: &[f64]) -> Vec<f64> {
    let f = loads.flux_source(t);
    let kp = sys.k.matvec(p);
    (0..sys.n_flux()).map(|i| (f[i] - kp[i]) / sys.m_d.get(i, i)).collect()
}

/// Row sums of the inverse stage matrix; these weight the previous node
/// value in the stage-derivative representation.
fn inverse_row_sums(ainv: &[Vec<f64>]) -> Vec<f64> {
    ainv.iter().map(|row| row.iter().sum()).collect()
}

fn segment(x: &[f64], offset: usize, len: usize) -> &[f64] {
    &x[offset..offset + len]
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Combines stage segments with the node-update weights.
fn combine_stages(solution: &[f64], offset: usize, len: usize, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            axpy(&mut out, w, segment(solution, offset + i * len, len));
        }
    }
    out
}

struct StoreBuffers {
    times: Vec<f64>,
    potential: Vec<Vec<f64>>,
    flux: Vec<Vec<f64>>,
    multiplier: Vec<Vec<f64>>,
    defect: Vec<Vec<f64>>,
    correction_potential: Vec<Vec<f64>>,
    correction_flux: Vec<Vec<f64>>,
}

impl StoreBuffers {
    fn with_capacity(n: usize) -> Self {
        StoreBuffers {
            times: Vec::with_capacity(n),
            potential: Vec::with_capacity(n),
            flux: Vec::with_capacity(n),
            multiplier: Vec::with_capacity(n),
            defect: Vec::with_capacity(n),
            correction_potential: Vec::with_capacity(n),
            correction_flux: Vec::with_capacity(n),
        }
    }
}

// ---------------------------------------------------------------------------
// Limit form, first order: Runge-Kutta path.
// ---------------------------------------------------------------------------

/// Generic Runge-Kutta integrator for the first-order limit form.
///
/// Stage unknowns per step, in block order: potentials `P`, fluxes `M`,
/// multipliers `L`, constraint slack `U`. With `Ai = A^{-1}` the blocks read
///
/// ```text
/// (Ai (x) M2)/tau P + Ma P - K^T M + B^T L + B^T U = g - C^T r + prev
/// K P + Md M                                       = F
/// B P - U                                          = h
/// (Ai (x) B)/tau P                                 = h' + prev
/// ```
pub struct RkLimitFirstOrder {
    pub tableau: ButcherTableau,
}

impl RkLimitFirstOrder {
    fn build_matrix(&self, sys: &AssembledSystem, tau: f64) -> Result<LuFactorization, SparseError> {
        let s = self.tableau.stages();
        let (np, nm, nb) = (sys.n_potential(), sys.n_flux(), sys.n_boundary());
        let ainv = self.tableau.a_inverse().expect("validated tableau");
        let kt = sys.k.transpose();
        let bt = sys.b.transpose();

        let (op, om, ol, ou) = (0, s * np, s * (np + nm), s * (np + nm) + s * nb);
        let total = s * (np + nm + 2 * nb);
        let mut tb = TripletBuilder::new(total, total);
        // Potential rows.
        tb.add_kron(op, op, &ainv, &sys.m2, 1.0 / tau);
        tb.add_block_diag(op, op, s, &sys.m_a, 1.0);
        tb.add_block_diag(op, om, s, &kt, -1.0);
        tb.add_block_diag(op, ol, s, &bt, 1.0);
        tb.add_block_diag(op, ou, s, &bt, 1.0);
        // Flux rows.
        tb.add_block_diag(om, op, s, &sys.k, 1.0);
        tb.add_block_diag(om, om, s, &sys.m_d, 1.0);
        // Constraint rows.
        tb.add_block_diag(ol, op, s, &sys.b, 1.0);
        tb.add_identity(ol, ou, s * nb, -1.0);
        // Differentiated constraint rows.
        tb.add_kron(ou, op, &ainv, &sys.b, 1.0 / tau);
        factorize(&tb.build())
    }
}

impl Stepper for RkLimitFirstOrder {
    fn describe(&self) -> String {
        format!("limit-1 [{}]", self.tableau.name)
    }

    fn run(&self, loads: &Loads, init: &InitialState, cfg: &RunConfig) -> Result<Trajectory, SteppingError> {
        check_init(loads, init, cfg)?;
        let sys = loads.system();
        let s = self.tableau.stages();
        let (np, nm, nb) = (sys.n_potential(), sys.n_flux(), sys.n_boundary());
        let ainv = self.tableau.a_inverse().expect("validated tableau");
        let ainv1 = inverse_row_sums(&ainv);
        let weights = self.tableau.node_update_weights();
        let tau = cfg.tau;
        let lu = self.build_matrix(sys, tau)?;

        let (op, om, ol, ou) = (0, s * np, s * (np + nm), s * (np + nm) + s * nb);
        let total = s * (np + nm + 2 * nb);

        let mut p = init.potential.clone();
        let mut buf = StoreBuffers::with_capacity(cfg.steps / cfg.keep_every + 1);
        buf.times.push(0.0);
        buf.potential.push(p.clone());
        buf.flux.push(limit_flux(sys, loads, 0.0, &p));
        buf.multiplier.push(vec![0.0; nb]);
        buf.defect.push(vec![0.0; nb]);

        let mut rhs = vec![0.0; total];
        for step in 0..cfg.steps {
            let t_prev = step as f64 * tau;
            let m2p = sys.m2.matvec(&p);
            let bp = sys.b.matvec(&p);
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..s {
                let t = t_prev + self.tableau.c[i] * tau;
                let g = loads.potential_rhs(t);
                let seg = &mut rhs[op + i * np..op + (i + 1) * np];
                seg.copy_from_slice(&g);
                axpy(seg, ainv1[i] / tau, &m2p);
                rhs[om + i * nm..om + (i + 1) * nm].copy_from_slice(&loads.flux_source(t));
                rhs[ol + i * nb..ol + (i + 1) * nb].copy_from_slice(&loads.boundary_values(t));
                let seg = &mut rhs[ou + i * nb..ou + (i + 1) * nb];
                seg.copy_from_slice(&loads.boundary_values_derivative(t));
                axpy(seg, ainv1[i] / tau, &bp);
            }
            let sol = lu.solve(&rhs);
            p = combine_stages(&sol, op, np, &weights);
            if (step + 1) % cfg.keep_every == 0 {
                buf.times.push((step + 1) as f64 * tau);
                buf.potential.push(p.clone());
                buf.flux.push(combine_stages(&sol, om, nm, &weights));
                buf.multiplier.push(combine_stages(&sol, ol, nb, &weights));
                buf.defect.push(combine_stages(&sol, ou, nb, &weights));
            }
        }
        Ok(Trajectory {
            times: buf.times,
            potential: buf.potential,
            flux: buf.flux,
            multiplier: buf.multiplier,
            defect: Some(buf.defect),
            correction_potential: None,
            correction_flux: None,
        })
    }
}

// ---------------------------------------------------------------------------
// Limit form, first order: dedicated backward Euler.
// ---------------------------------------------------------------------------

/// Hand-written backward Euler for the first-order limit form (difference
/// quotients instead of stage algebra; cross-checks the Runge-Kutta path).
pub struct EulerLimitFirstOrder;

impl Stepper for EulerLimitFirstOrder {
    fn describe(&self) -> String {
        "limit-1 [implicit-euler, direct]".to_string()
    }

    fn run(&self, loads: &Loads, init: &InitialState, cfg: &RunConfig) -> Result<Trajectory, SteppingError> {
        check_init(loads, init, cfg)?;
        let sys = loads.system();
        let (np, nm, nb) = (sys.n_potential(), sys.n_flux(), sys.n_boundary());
        let tau = cfg.tau;
        let kt = sys.k.transpose();
        let bt = sys.b.transpose();

        let (op, om, ol, ou) = (0, np, np + nm, np + nm + nb);
        let total = np + nm + 2 * nb;
        let mut tb = TripletBuilder::new(total, total);
        tb.add_matrix(op, op, &sys.m2, 1.0 / tau);
        tb.add_matrix(op, op, &sys.m_a, 1.0);
        tb.add_matrix(op, om, &kt, -1.0);
        tb.add_matrix(op, ol, &bt, 1.0);
        tb.add_matrix(op, ou, &bt, 1.0);
        tb.add_matrix(om, op, &sys.k, 1.0);
        tb.add_matrix(om, om, &sys.m_d, 1.0);
        tb.add_matrix(ol, op, &sys.b, 1.0);
        tb.add_identity(ol, ou, nb, -1.0);
        tb.add_matrix(ou, op, &sys.b, 1.0 / tau);
        let lu = factorize(&tb.build())?;

        let mut p = init.potential.clone();
        let mut buf = StoreBuffers::with_capacity(cfg.steps / cfg.keep_every + 1);
        buf.times.push(0.0);
        buf.potential.push(p.clone());
        buf.flux.push(limit_flux(sys, loads, 0.0, &p));
        buf.multiplier.push(vec![0.0; nb]);
        buf.defect.push(vec![0.0; nb]);

        let mut rhs = vec![0.0; total];
        for step in 0..cfg.steps {
            let t = (step + 1) as f64 * tau;
            rhs[op..op + np].copy_from_slice(&loads.potential_rhs(t));
            sys.m2.matvec_acc(&p, 1.0 / tau, &mut rhs[op..op + np]);
            rhs[om..om + nm].copy_from_slice(&loads.flux_source(t));
            rhs[ol..ol + nb].copy_from_slice(&loads.boundary_values(t));
            rhs[ou..ou + nb].copy_from_slice(&loads.boundary_values_derivative(t));
            sys.b.matvec_acc(&p, 1.0 / tau, &mut rhs[ou..ou + nb]);
            let sol = lu.solve(&rhs);
            p = sol[op..op + np].to_vec();
            if (step + 1) % cfg.keep_every == 0 {
                buf.times.push(t);
                buf.potential.push(p.clone());
                buf.flux.push(sol[om..om + nm].to_vec());
                buf.multiplier.push(sol[ol..ol + nb].to_vec());
                buf.defect.push(sol[ou..ou + nb].to_vec());
            }
        }
        Ok(Trajectory {
            times: buf.times,
            potential: buf.potential,
            flux: buf.flux,
            multiplier: buf.multiplier,
            defect: Some(buf.defect),
            correction_potential: None,
            correction_flux: None,
        })
    }
}

// ---------------------------------------------------------------------------
// Limit form, second order: Runge-Kutta path.
// ---------------------------------------------------------------------------

/// Generic Runge-Kutta integrator for the second-order limit form.
///
/// Stage unknown blocks: `P0, P1, M0, M1, L0, L1, U`. The first tier is the
/// first-order limit system; the second tier evolves the corrections, driven
/// by the time derivative of the limit flux:
///
/// ```text
/// (Ai (x) M2)/tau P1 + Ma P1 - K^T M1 + B^T L1 = prev1
/// -(Ai (x) Kd)/tau P0 + K P1 + Md M1           = -F'_d + prev0
/// B P1                                         = 0
/// ```
///
/// with `Kd = diag(1/d) K` and `F'_d` the damping-weighted source derivative
/// loads. The correction fields start from zero.
pub struct RkLimitSecondOrder {
    pub tableau: ButcherTableau,
}

struct SecondOrderLayout {
    p0: usize,
    p1: usize,
    m0: usize,
    m1: usize,
    l0: usize,
    l1: usize,
    u: usize,
    total: usize,
}

fn second_order_layout(s: usize, np: usize, nm: usize, nb: usize) -> SecondOrderLayout {
    let p0 = 0;
    let p1 = p0 + s * np;
    let m0 = p1 + s * np;
    let m1 = m0 + s * nm;
    let l0 = m1 + s * nm;
    let l1 = l0 + s * nb;
    let u = l1 + s * nb;
    SecondOrderLayout { p0, p1, m0, m1, l0, l1, u, total: u + s * nb }
}

impl RkLimitSecondOrder {
    fn build_matrix(&self, sys: &AssembledSystem, tau: f64) -> Result<LuFactorization, SparseError> {
        let s = self.tableau.stages();
        let (np, nm, nb) = (sys.n_potential(), sys.n_flux(), sys.n_boundary());
        let ainv = self.tableau.a_inverse().expect("validated tableau");
        let kt = sys.k.transpose();
        let bt = sys.b.transpose();
        let lay = second_order_layout(s, np, nm, nb);

        let mut tb = TripletBuilder::new(lay.total, lay.total);
        // Tier-0 potential rows.
        let r = lay.p0;
        tb.add_kron(r, lay.p0, &ainv, &sys.m2, 1.0 / tau);
        tb.add_block_diag(r, lay.p0, s, &sys.m_a, 1.0);
        tb.add_block_diag(r, lay.m0, s, &kt, -1.0);
        tb.add_block_diag(r, lay.l0, s, &bt, 1.0);
        tb.add_block_diag(r, lay.u, s, &bt, 1.0);
        // Tier-1 potential rows.
        let r = lay.p1;
        tb.add_kron(r, lay.p1, &ainv, &sys.m2, 1.0 / tau);
        tb.add_block_diag(r, lay.p1, s, &sys.m_a, 1.0);
        tb.add_block_diag(r, lay.m1, s, &kt, -1.0);
        tb.add_block_diag(r, lay.l1, s, &bt, 1.0);
        // Tier-1 flux rows (correction driven by the limit-flux derivative).
        let r = lay.m0;
        tb.add_kron(r, lay.p0, &ainv, &sys.k_tilde, -1.0 / tau);
        tb.add_block_diag(r, lay.p1, s, &sys.k, 1.0);
        tb.add_block_diag(r, lay.m1, s, &sys.m_d, 1.0);
        // Tier-0 flux rows (the stationary relation).
        let r = lay.m1;
        tb.add_block_diag(r, lay.p0, s, &sys.k, 1.0);
        tb.add_block_diag(r, lay.m0, s, &sys.m_d, 1.0);
        // Tier-0 constraint rows.
        let r = lay.l0;
        tb.add_block_diag(r, lay.p0, s, &sys.b, 1.0);
        tb.add_identity(r, lay.u, s * nb, -1.0);
        // Tier-0 differentiated constraint rows.
        let r = lay.l1;
        tb.add_kron(r, lay.p0, &ainv, &sys.b, 1.0 / tau);
        // Tier-1 constraint rows.
        let r = lay.u;
        tb.add_block_diag(r, lay.p1, s, &sys.b, 1.0);
        factorize(&tb.build())
    }
}

impl Stepper for RkLimitSecondOrder {
    fn describe(&self) -> String {
        format!("limit-2 [{}]", self.tableau.name)
    }

    fn run(&self, loads: &Loads, init: &InitialState, cfg: &RunConfig) -> Result<Trajectory, SteppingError> {
        check_init(loads, init, cfg)?;
        let sys = loads.system();
        let s = self.tableau.stages();
        let (np, nm, nb) = (sys.n_potential(), sys.n_flux(), sys.n_boundary());
        let ainv = self.tableau.a_inverse().expect("validated tableau");
        let ainv1 = inverse_row_sums(&ainv);
        let weights = self.tableau.node_update_weights();
        let tau = cfg.tau;
        let lay = second_order_layout(s, np, nm, nb);
        let lu = self.build_matrix(sys, tau)?;

        let mut p0 = init.potential.clone();
        let mut p1 = vec![0.0; np];
        let mut buf = StoreBuffers::with_capacity(cfg.steps / cfg.keep_every + 1);
        buf.times.push(0.0);
        buf.potential.push(p0.clone());
        buf.flux.push(limit_flux(sys, loads, 0.0, &p0));
        buf.multiplier.push(vec![0.0; nb]);
        buf.defect.push(vec![0.0; nb]);
        buf.correction_potential.push(p1.clone());
        buf.correction_flux.push(vec![0.0; nm]);

        let mut rhs = vec![0.0; lay.total];
        for step in 0..cfg.steps {
            let t_prev = step as f64 * tau;
            let m2p0 = sys.m2.matvec(&p0);
            let m2p1 = sys.m2.matvec(&p1);
            let ktp0 = sys.k_tilde.matvec(&p0);
            let bp0 = sys.b.matvec(&p0);
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..s {
                let t = t_prev + self.tableau.c[i] * tau;
                let seg = &mut rhs[lay.p0 + i * np..lay.p0 + (i + 1) * np];
                seg.copy_from_slice(&loads.potential_rhs(t));
                axpy(seg, ainv1[i] / tau, &m2p0);
                let seg = &mut rhs[lay.p1 + i * np..lay.p1 + (i + 1) * np];
                axpy(seg, ainv1[i] / tau, &m2p1);
                let seg = &mut rhs[lay.m0 + i * nm..lay.m0 + (i + 1) * nm];
                seg.copy_from_slice(&loads.flux_source_derivative_weighted(t));
                seg.iter_mut().for_each(|v| *v = -*v);
                axpy(seg, -ainv1[i] / tau, &ktp0);
                rhs[lay.m1 + i * nm..lay.m1 + (i + 1) * nm].copy_from_slice(&loads.flux_source(t));
                rhs[lay.l0 + i * nb..lay.l0 + (i + 1) * nb].copy_from_slice(&loads.boundary_values(t));
                let seg = &mut rhs[lay.l1 + i * nb..lay.l1 + (i + 1) * nb];
                seg.copy_from_slice(&loads.boundary_values_derivative(t));
                axpy(seg, ainv1[i] / tau, &bp0);
                // Tier-1 constraint rows stay zero.
            }
            let sol = lu.solve(&rhs);
            p0 = combine_stages(&sol, lay.p0, np, &weights);
            p1 = combine_stages(&sol, lay.p1, np, &weights);
            if (step + 1) % cfg.keep_every == 0 {
                buf.times.push((step + 1) as f64 * tau);
                buf.potential.push(p0.clone());
                buf.flux.push(combine_stages(&sol, lay.m0, nm, &weights));
                buf.multiplier.push(combine_stages(&sol, lay.l0, nb, &weights));
                buf.defect.push(combine_stages(&sol, lay.u, nb, &weights));
                buf.correction_potential.push(p1.clone());
                buf.correction_flux.push(combine_stages(&sol, lay.m1, nm, &weights));
            }
        }
        Ok(Trajectory {
            times: buf.times,
            potential: buf.potential,
            flux: buf.flux,
            multiplier: buf.multiplier,
            defect: Some(buf.defect),
            correction_potential: Some(buf.correction_potential),
            correction_flux: Some(buf.correction_flux),
        })
    }
}

// ---------------------------------------------------------------------------
// Limit form, second order: dedicated backward Euler.
// ---------------------------------------------------------------------------

/// Hand-written backward Euler for the second-order limit form.
pub struct EulerLimitSecondOrder;

impl Stepper for EulerLimitSecondOrder {
    fn describe(&self) -> String {
        "limit-2 [implicit-euler, direct]".to_string()
    }

    fn run(&self, loads: &Loads, init: &InitialState, cfg: &RunConfig) -> Result<Trajectory, SteppingError> {
        check_init(loads, init, cfg)?;
        let sys = loads.system();
        let (np, nm, nb) = (sys.n_potential(), sys.n_flux(), sys.n_boundary());
        let tau = cfg.tau;
        let kt = sys.k.transpose();
        let bt = sys.b.transpose();
        let lay = second_order_layout(1, np, nm, nb);

        let mut tb = TripletBuilder::new(lay.total, lay.total);
        tb.add_matrix(lay.p0, lay.p0, &sys.m2, 1.0 / tau);
        tb.add_matrix(lay.p0, lay.p0, &sys.m_a, 1.0);
        tb.add_matrix(lay.p0, lay.m0, &kt, -1.0);
        tb.add_matrix(lay.p0, lay.l0, &bt, 1.0);
        tb.add_matrix(lay.p0, lay.u, &bt, 1.0);
        tb.add_matrix(lay.p1, lay.p1, &sys.m2, 1.0 / tau);
        tb.add_matrix(lay.p1, lay.p1, &sys.m_a, 1.0);
        tb.add_matrix(lay.p1, lay.m1, &kt, -1.0);
        tb.add_matrix(lay.p1, lay.l1, &bt, 1.0);
        tb.add_matrix(lay.m0, lay.p0, &sys.k_tilde, -1.0 / tau);
        tb.add_matrix(lay.m0, lay.p1, &sys.k, 1.0);
        tb.add_matrix(lay.m0, lay.m1, &sys.m_d, 1.0);
        tb.add_matrix(lay.m1, lay.p0, &sys.k, 1.0);
        tb.add_matrix(lay.m1, lay.m0, &sys.m_d, 1.0);
        tb.add_matrix(lay.l0, lay.p0, &sys.b, 1.0);
        tb.add_identity(lay.l0, lay.u, nb, -1.0);
        tb.add_matrix(lay.l1, lay.p0, &sys.b, 1.0 / tau);
        tb.add_matrix(lay.u, lay.p1, &sys.b, 1.0);
        let lu = factorize(&tb.build())?;

        let mut p0 = init.potential.clone();
        let mut p1 = vec![0.0; np];
        let mut buf = StoreBuffers::with_capacity(cfg.steps / cfg.keep_every + 1);
        buf.times.push(0.0);
        buf.potential.push(p0.clone());
        buf.flux.push(limit_flux(sys, loads, 0.0, &p0));
        buf.multiplier.push(vec![0.0; nb]);
        buf.defect.push(vec![0.0; nb]);
        buf.correction_potential.push(p1.clone());
        buf.correction_flux.push(vec![0.0; nm]);

        let mut rhs = vec![0.0; lay.total];
        for step in 0..cfg.steps {
            let t = (step + 1) as f64 * tau;
            rhs.iter_mut().for_each(|v| *v = 0.0);
            rhs[lay.p0..lay.p0 + np].copy_from_slice(&loads.potential_rhs(t));
            sys.m2.matvec_acc(&p0, 1.0 / tau, &mut rhs[lay.p0..lay.p0 + np]);
            sys.m2.matvec_acc(&p1, 1.0 / tau, &mut rhs[lay.p1..lay.p1 + np]);
            let fd = loads.flux_source_derivative_weighted(t);
            let seg = &mut rhs[lay.m0..lay.m0 + nm];
            seg.iter_mut().zip(&fd).for_each(|(v, w)| *v = -w);
            sys.k_tilde.matvec_acc(&p0, -1.0 / tau, &mut rhs[lay.m0..lay.m0 + nm]);
            rhs[lay.m1..lay.m1 + nm].copy_from_slice(&loads.flux_source(t));
            rhs[lay.l0..lay.l0 + nb].copy_from_slice(&loads.boundary_values(t));
            rhs[lay.l1..lay.l1 + nb].copy_from_slice(&loads.boundary_values_derivative(t));
            sys.b.matvec_acc(&p0, 1.0 / tau, &mut rhs[lay.l1..lay.l1 + nb]);
            let sol = lu.solve(&rhs);
            p0 = sol[lay.p0..lay.p0 + np].to_vec();
            p1 = sol[lay.p1..lay.p1 + np].to_vec();
            if (step + 1) % cfg.keep_every == 0 {
                buf.times.push(t);
                buf.potential.push(p0.clone());
                buf.flux.push(sol[lay.m0..lay.m0 + nm].to_vec());
                buf.multiplier.push(sol[lay.l0..lay.l0 + nb].to_vec());
                buf.defect.push(sol[lay.u..lay.u + nb].to_vec());
                buf.correction_potential.push(p1.clone());
                buf.correction_flux.push(sol[lay.m1..lay.m1 + nm].to_vec());
            }
        }
        Ok(Trajectory {
            times: buf.times,
            potential: buf.potential,
            flux: buf.flux,
            multiplier: buf.multiplier,
            defect: Some(buf.defect),
            correction_potential: Some(buf.correction_potential),
            correction_flux: Some(buf.correction_flux),
        })
    }
}

// ---------------------------------------------------------------------------
// Stiff form: Runge-Kutta path and dedicated backward Euler.
// ---------------------------------------------------------------------------

/// Generic Runge-Kutta integrator for the stiff form (index-2 system).
///
/// Stage unknown blocks `M, P, L`:
///
/// ```text
/// (eps/tau)(Ai (x) M1) M + Md M + K P      = F + prev
/// -(K^T) M + (Ai (x) M2)/tau P + Ma P + B^T L = g - C^T r + prev
/// B P                                      = h
/// ```
pub struct RkStiff {
    pub tableau: ButcherTableau,
    pub eps: f64,
}

impl RkStiff {
    fn build_matrix(&self, sys: &AssembledSystem, tau: f64) -> Result<LuFactorization, SparseError> {
        let s = self.tableau.stages();
        let (np, nm, nb) = (sys.n_potential(), sys.n_flux(), sys.n_boundary());
        let ainv = self.tableau.a_inverse().expect("validated tableau");
        let kt = sys.k.transpose();
        let bt = sys.b.transpose();
        let (om, op, ol) = (0, s * nm, s * (nm + np));
        let total = s * (nm + np + nb);
        let mut tb = TripletBuilder::new(total, total);
        tb.add_kron(om, om, &ainv, &sys.m1, self.eps / tau);
        tb.add_block_diag(om, om, s, &sys.m_d, 1.0);
        tb.add_block_diag(om, op, s, &sys.k, 1.0);
        tb.add_block_diag(op, om, s, &kt, -1.0);
        tb.add_kron(op, op, &ainv, &sys.m2, 1.0 / tau);
        tb.add_block_diag(op, op, s, &sys.m_a, 1.0);
        tb.add_block_diag(op, ol, s, &bt, 1.0);
        tb.add_block_diag(ol, op, s, &sys.b, 1.0);
        factorize(&tb.build())
    }
}

impl Stepper for RkStiff {
    fn describe(&self) -> String {
        format!("stiff [{}], eps = {:.3e}", self.tableau.name, self.eps)
    }

    fn run(&self, loads: &Loads, init: &InitialState, cfg: &RunConfig) -> Result<Trajectory, SteppingError> {
        check_init(loads, init, cfg)?;
        let sys = loads.system();
        let s = self.tableau.stages();
        let (np, nm, nb) = (sys.n_potential(), sys.n_flux(), sys.n_boundary());
        let ainv = self.tableau.a_inverse().expect("validated tableau");
        let ainv1 = inverse_row_sums(&ainv);
        let weights = self.tableau.node_update_weights();
        let tau = cfg.tau;
        let lu = self.build_matrix(sys, tau)?;
        let (om, op, ol) = (0, s * nm, s * (nm + np));
        let total = s * (nm + np + nb);

        let mut p = init.potential.clone();
        let mut m = init.flux.clone();
        let mut buf = StoreBuffers::with_capacity(cfg.steps / cfg.keep_every + 1);
        buf.times.push(0.0);
        buf.potential.push(p.clone());
        buf.flux.push(m.clone());
        buf.multiplier.push(vec![0.0; nb]);

        let mut rhs = vec![0.0; total];
        for step in 0..cfg.steps {
            let t_prev = step as f64 * tau;
            let m1m = sys.m1.matvec(&m);
            let m2p = sys.m2.matvec(&p);
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..s {
                let t = t_prev + self.tableau.c[i] * tau;
                let seg = &mut rhs[om + i * nm..om + (i + 1) * nm];
                seg.copy_from_slice(&loads.flux_source(t));
                axpy(seg, ainv1[i] * self.eps / tau, &m1m);
                let seg = &mut rhs[op + i * np..op + (i + 1) * np];
                seg.copy_from_slice(&loads.potential_rhs(t));
                axpy(seg, ainv1[i] / tau, &m2p);
                rhs[ol + i * nb..ol + (i + 1) * nb].copy_from_slice(&loads.boundary_values(t));
            }
            let sol = lu.solve(&rhs);
            m = combine_stages(&sol, om, nm, &weights);
            p = combine_stages(&sol, op, np, &weights);
            if (step + 1) % cfg.keep_every == 0 {
                buf.times.push((step + 1) as f64 * tau);
                buf.potential.push(p.clone());
                buf.flux.push(m.clone());
                buf.multiplier.push(combine_stages(&sol, ol, nb, &weights));
            }
        }
        Ok(Trajectory {
            times: buf.times,
            potential: buf.potential,
            flux: buf.flux,
            multiplier: buf.multiplier,
            defect: None,
            correction_potential: None,
            correction_flux: None,
        })
    }
}

/// Hand-written backward Euler for the stiff form.
pub struct EulerStiff {
    pub eps: f64,
}

impl Stepper for EulerStiff {
    fn describe(&self) -> String {
        format!("stiff [implicit-euler, direct], eps = {:.3e}", self.eps)
    }

    fn run(&self, loads: &Loads, init: &InitialState, cfg: &RunConfig) -> Result<Trajectory, SteppingError> {
        check_init(loads, init, cfg)?;
        let sys = loads.system();
        let (np, nm, nb) = (sys.n_potential(), sys.n_flux(), sys.n_boundary());
        let tau = cfg.tau;
        let kt = sys.k.transpose();
        let bt = sys.b.transpose();
        let (om, op, ol) = (0, nm, nm + np);
        let total = nm + np + nb;
        let mut tb = TripletBuilder::new(total, total);
        tb.add_matrix(om, om, &sys.m1, self.eps / tau);
        tb.add_matrix(om, om, &sys.m_d, 1.0);
        tb.add_matrix(om, op, &sys.k, 1.0);
        tb.add_matrix(op, om, &kt, -1.0);
        tb.add_matrix(op, op, &sys.m2, 1.0 / tau);
        tb.add_matrix(op, op, &sys.m_a, 1.0);
        tb.add_matrix(op, ol, &bt, 1.0);
        tb.add_matrix(ol, op, &sys.b, 1.0);
        let lu = factorize(&tb.build())?;

        let mut p = init.potential.clone();
        let mut m = init.flux.clone();
        let mut buf = StoreBuffers::with_capacity(cfg.steps / cfg.keep_every + 1);
        buf.times.push(0.0);
        buf.potential.push(p.clone());
        buf.flux.push(m.clone());
        buf.multiplier.push(vec![0.0; nb]);

        let mut rhs = vec![0.0; total];
        for step in 0..cfg.steps {
            let t = (step + 1) as f64 * tau;
            rhs[om..om + nm].copy_from_slice(&loads.flux_source(t));
            sys.m1.matvec_acc(&m, self.eps / tau, &mut rhs[om..om + nm]);
            rhs[op..op + np].copy_from_slice(&loads.potential_rhs(t));
            sys.m2.matvec_acc(&p, 1.0 / tau, &mut rhs[op..op + np]);
            rhs[ol..ol + nb].copy_from_slice(&loads.boundary_values(t));
            let sol = lu.solve(&rhs);
            m = sol[om..om + nm].to_vec();
            p = sol[op..op + np].to_vec();
            if (step + 1) % cfg.keep_every == 0 {
                buf.times.push(t);
                buf.potential.push(p.clone());
                buf.flux.push(m.clone());
                buf.multiplier.push(sol[ol..ol + nb].to_vec());
            }
        }
        Ok(Trajectory {
            times: buf.times,
            potential: buf.potential,
            flux: buf.flux,
            multiplier: buf.multiplier,
            defect: None,
            correction_potential: None,
            correction_flux: None,
        })
    }
}
