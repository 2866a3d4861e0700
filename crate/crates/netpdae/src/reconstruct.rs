//! Time reconstruction of discrete trajectories.
//!
//! Integrator output lives on time nodes; error measurement in a continuous
//! norm needs values between them. Reconstructions interpolate the node data
//! with local polynomials whose degree is matched to the integrator's stage
//! order, so the interpolation never dominates the time-discretization error:
//! piecewise constants (degree 0) for order-zero data, piecewise linears for
//! one-stage schemes, and centered local stencils of higher degree for
//! multi-stage schemes.
//!
//! A first-order limit solution and its second-order correction combine into
//! `p(t) + eps * p1(t)`; [`EpsCombination`] pairs a degree-q reconstruction
//! of the base field with a degree-(q-1) reconstruction of the correction,
//! one degree lower because the correction enters shrunk by `eps`.

use thiserror::Error;

use crate::stepping::Trajectory;

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("reconstruction of degree {degree} needs at least {needed} nodes, got {got}")]
    TooFewNodes { degree: usize, needed: usize, got: usize },
    #[error("node spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("node rows have inconsistent lengths ({first} vs {second})")]
    RaggedRows { first: usize, second: usize },
    #[error("trajectory does not carry the field {0:?}")]
    MissingField(Field),
    #[error("cannot combine reconstructions: {0}")]
    Incompatible(String),
}

/// Which stored field of a [`Trajectory`] to reconstruct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Potential,
    Flux,
    Multiplier,
    Defect,
    CorrectionPotential,
    CorrectionFlux,
}

/// Interpolation rule applied to node data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionKind {
    /// Right-endpoint value on each interval (t_{j-1}, t_j]; t = 0 maps to
    /// the initial node.
    PiecewiseConstant,
    /// Linear interpolation between neighboring nodes.
    PiecewiseLinear,
    /// Lagrange interpolation of this degree on a local stencil around the
    /// interval containing t: the interval's nodes plus the nearest further
    /// nodes (centered for odd degree, trailing for even degree, clamped at
    /// the ends of the grid). Degrees 0 and 1 coincide with the two rules
    /// above.
    LocalPolynomial { degree: usize },
}

impl ReconstructionKind {
    /// Polynomial degree of the rule.
    pub fn degree(&self) -> usize {
        match self {
            ReconstructionKind::PiecewiseConstant => 0,
            ReconstructionKind::PiecewiseLinear => 1,
            ReconstructionKind::LocalPolynomial { degree } => *degree,
        }
    }

    /// The rule of a given degree (0 and 1 normalize to the dedicated kinds).
    pub fn of_degree(degree: usize) -> Self {
        match degree {
            0 => ReconstructionKind::PiecewiseConstant,
            1 => ReconstructionKind::PiecewiseLinear,
            d => ReconstructionKind::LocalPolynomial { degree: d },
        }
    }
}

/// Reconstruction degrees matched to a scheme of stage order `q`: degree `q`
/// for the base field and `q - 1` for the `eps`-weighted correction.
pub fn paired_kinds(stage_order: usize) -> (ReconstructionKind, ReconstructionKind) {
    (ReconstructionKind::of_degree(stage_order), ReconstructionKind::of_degree(stage_order.saturating_sub(1)))
}

/// A vector-valued function of time defined on `[0, final_time]`.
pub trait TimeEval {
    /// Length of the value vectors.
    fn dim(&self) -> usize;
    /// Spacing of the underlying time nodes.
    fn node_spacing(&self) -> f64;
    /// Number of node intervals.
    fn intervals(&self) -> usize;
    fn eval(&self, t: f64) -> Vec<f64>;

    fn final_time(&self) -> f64 {
        self.node_spacing() * self.intervals() as f64
    }
}

/// Node data equipped with an interpolation rule.
pub struct Reconstruction {
    kind: ReconstructionKind,
    tau: f64,
    values: Vec<Vec<f64>>,
}

impl Reconstruction {
    /// Wraps node rows (`values[j]` at time `j * tau`).
    pub fn new(kind: ReconstructionKind, tau: f64, values: Vec<Vec<f64>>) -> Result<Self, ReconstructError> {
        if !(tau > 0.0) {
            return Err(ReconstructError::BadSpacing(tau));
        }
        let degree = kind.degree();
        if values.len() < degree + 1 || values.len() < 2 {
            return Err(ReconstructError::TooFewNodes {
                degree,
                needed: (degree + 1).max(2),
                got: values.len(),
            });
        }
        let first = values[0].len();
        for row in &values {
            if row.len() != first {
                return Err(ReconstructError::RaggedRows { first, second: row.len() });
            }
        }
        Ok(Reconstruction { kind, tau, values })
    }

    /// Reconstructs one stored field of a trajectory.
    pub fn from_trajectory(traj: &Trajectory, field: Field, kind: ReconstructionKind) -> Result<Self, ReconstructError> {
        let rows = match field {
            Field::Potential => &traj.potential,
            Field::Flux => &traj.flux,
            Field::Multiplier => &traj.multiplier,
            Field::Defect => traj.defect.as_ref().ok_or(ReconstructError::MissingField(field))?,
            Field::CorrectionPotential => {
                traj.correction_potential.as_ref().ok_or(ReconstructError::MissingField(field))?
            }
            Field::CorrectionFlux => traj.correction_flux.as_ref().ok_or(ReconstructError::MissingField(field))?,
        };
        Reconstruction::new(kind, traj.stored_tau(), rows.clone())
    }

    pub fn kind(&self) -> ReconstructionKind {
        self.kind
    }

    /// The node indices a degree >= 2 evaluation at time `t` interpolates.
    /// Exposed for inspection; `eval` uses the same stencil.
    pub fn stencil(&self, t: f64) -> (usize, usize) {
        let n = self.values.len() - 1;
        let degree = self.kind.degree();
        // Interval index: t in (t_{j-1}, t_j]; nodes resolve to the interval
        // on their left so the stencil never reaches past data that a
        // causal reading of the trajectory has produced at that node.
        let j = ((t / self.tau).ceil() as isize).clamp(1, n as isize) as usize;
        let (lo, hi) = if degree % 2 == 1 {
            (j as isize - ((degree + 1) / 2) as isize, j as isize + ((degree - 1) / 2) as isize)
        } else {
            (j as isize - 1 - (degree / 2) as isize, j as isize - 1 + (degree / 2) as isize)
        };
        if lo < 0 {
            (0, degree)
        } else if hi > n as isize {
            (n - degree, n)
        } else {
            (lo as usize, hi as usize)
        }
    }
}

impl TimeEval for Reconstruction {
    fn dim(&self) -> usize {
        self.values[0].len()
    }

    fn node_spacing(&self) -> f64 {
        self.tau
    }

    fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.intervals();
        let end = self.final_time();
        debug_assert!(
            t >= -1e-12 * end && t <= end * (1.0 + 1e-12),
            "evaluation time {t} outside [0, {end}]"
        );
        let t = t.clamp(0.0, end);
        match self.kind {
            ReconstructionKind::PiecewiseConstant => {
                let j = ((t / self.tau).ceil() as isize).clamp(0, n as isize) as usize;
                self.values[j].clone()
            }
            ReconstructionKind::PiecewiseLinear => {
                let j = ((t / self.tau).floor() as isize).clamp(0, n as isize - 1) as usize;
                let theta = (t - j as f64 * self.tau) / self.tau;
                self.values[j]
                    .iter()
                    .zip(&self.values[j + 1])
                    .map(|(a, b)| (1.0 - theta) * a + theta * b)
                    .collect()
            }
            ReconstructionKind::LocalPolynomial { degree } => match degree {
                0 => Reconstruction { kind: ReconstructionKind::PiecewiseConstant, tau: self.tau, values: self.values.clone() }.eval(t),
                1 => Reconstruction { kind: ReconstructionKind::PiecewiseLinear, tau: self.tau, values: self.values.clone() }.eval(t),
                _ => {
                    let (lo, hi) = self.stencil(t);
                    // Lagrange weights on the stencil nodes.
                    let mut out = vec![0.0; self.dim()];
                    for k in lo..=hi {
                        let tk = k as f64 * self.tau;
                        let mut w = 1.0;
                        for l in lo..=hi {
                            if l != k {
                                let tl = l as f64 * self.tau;
                                w *= (t - tl) / (tk - tl);
                            }
                        }
                        for (o, v) in out.iter_mut().zip(&self.values[k]) {
                            *o += w * v;
                        }
                    }
                    out
                }
            },
        }
    }
}

/// `base(t) + eps * correction(t)`: the second-order-in-eps approximation
/// assembled from its two reconstructed tiers.
pub struct EpsCombination {
    pub base: Reconstruction,
    pub correction: Reconstruction,
    pub eps: f64,
}

impl EpsCombination {
    pub fn new(base: Reconstruction, correction: Reconstruction, eps: f64) -> Result<Self, ReconstructError> {
        if base.dim() != correction.dim() {
            return Err(ReconstructError::Incompatible(format!(
                "value dimensions differ ({} vs {})",
                base.dim(),
                correction.dim()
            )));
        }
        if (base.tau - correction.tau).abs() > 1e-14 * base.tau || base.intervals() != correction.intervals() {
            return Err(ReconstructError::Incompatible("time grids differ".to_string()));
        }
        Ok(EpsCombination { base, correction, eps })
    }

    /// Builds the combination from a second-order limit trajectory with the
    /// degree pairing for a scheme of stage order `q`.
    pub fn from_trajectory(traj: &Trajectory, eps: f64, stage_order: usize) -> Result<Self, ReconstructError> {
        let (base_kind, corr_kind) = paired_kinds(stage_order);
        let base = Reconstruction::from_trajectory(traj, Field::Potential, base_kind)?;
        let correction = Reconstruction::from_trajectory(traj, Field::CorrectionPotential, corr_kind)?;
        EpsCombination::new(base, correction, eps)
    }
}

impl TimeEval for EpsCombination {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn node_spacing(&self) -> f64 {
        self.base.node_spacing()
    }

    fn intervals(&self) -> usize {
        self.base.intervals()
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = self.base.eval(t);
        let corr = self.correction.eval(t);
        for (o, c) in out.iter_mut().zip(&corr) {
            *o += self.eps * c;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_rows(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    fn sample(kind: ReconstructionKind, tau: f64, data: &[f64], t: f64) -> f64 {
        Reconstruction::new(kind, tau, scalar_rows(data)).unwrap().eval(t)[0]
    }

    #[test]
    fn piecewise_constant_takes_right_endpoint() {
        let data = [10.0, 20.0, 30.0];
        let tau = 1.0;
        assert_eq!(sample(ReconstructionKind::PiecewiseConstant, tau, &data, 0.0), 10.0);
        assert_eq!(sample(ReconstructionKind::PiecewiseConstant, tau, &data, 0.5), 20.0);
        assert_eq!(sample(ReconstructionKind::PiecewiseConstant, tau, &data, 1.0), 20.0);
        assert_eq!(sample(ReconstructionKind::PiecewiseConstant, tau, &data, 1.01), 30.0);
        assert_eq!(sample(ReconstructionKind::PiecewiseConstant, tau, &data, 2.0), 30.0);
    }

    #[test]
    fn piecewise_linear_interpolates_nodes() {
        let data = [0.0, 1.0, 4.0];
        let tau = 0.5;
        assert_eq!(sample(ReconstructionKind::PiecewiseLinear, tau, &data, 0.25), 0.5);
        assert_eq!(sample(ReconstructionKind::PiecewiseLinear, tau, &data, 0.75), 2.5);
        for (j, &v) in data.iter().enumerate() {
            assert_eq!(sample(ReconstructionKind::PiecewiseLinear, tau, &data, j as f64 * tau), v);
        }
    }

    #[test]
    fn degree_two_stencil_uses_trailing_nodes() {
        let data = [0.0; 6];
        let r = Reconstruction::new(ReconstructionKind::LocalPolynomial { degree: 2 }, 1.0, scalar_rows(&data)).unwrap();
        // t in (t3, t4] interpolates nodes {t2, t3, t4}.
        assert_eq!(r.stencil(3.5), (2, 4));
        assert_eq!(r.stencil(4.0), (2, 4));
        assert_eq!(r.stencil(4.1), (3, 5));
        // Clamped at the left end: the first interval still needs 3 nodes.
        assert_eq!(r.stencil(0.3), (0, 2));
        // Clamped at the right end.
        assert_eq!(r.stencil(5.9), (3, 5));
    }

    #[test]
    fn degree_three_stencil_is_centered() {
        let data = [0.0; 8];
        let r = Reconstruction::new(ReconstructionKind::LocalPolynomial { degree: 3 }, 1.0, scalar_rows(&data)).unwrap();
        // t in (t3, t4]: two nodes either side.
        assert_eq!(r.stencil(3.5), (2, 5));
        assert_eq!(r.stencil(0.1), (0, 3));
        assert_eq!(r.stencil(7.0), (4, 7));
    }

    #[test]
    fn reproduces_polynomials_up_to_its_degree() {
        let tau = 0.25;
        let n = 12;
        for degree in [2usize, 3, 4] {
            let kind = ReconstructionKind::LocalPolynomial { degree };
            // Exact polynomial data of matching degree.
            let poly = |t: f64| (1.0 + t).powi(degree as i32);
            let data: Vec<f64> = (0..=n).map(|j| poly(j as f64 * tau)).collect();
            let r = Reconstruction::new(kind, tau, scalar_rows(&data)).unwrap();
            for i in 0..100 {
                let t = i as f64 * (n as f64 * tau) / 99.0;
                let got = r.eval(t)[0];
                assert!((got - poly(t)).abs() < 1e-11, "deg {degree}, t {t}: {got} vs {}", poly(t));
            }
        }
    }

    #[test]
    fn degree_zero_and_one_match_dedicated_kinds() {
        let data = [3.0, -1.0, 2.0, 5.0];
        let tau = 0.1;
        for i in 0..50 {
            let t = i as f64 * 0.3 / 49.0;
            let d0 = sample(ReconstructionKind::LocalPolynomial { degree: 0 }, tau, &data, t);
            let c = sample(ReconstructionKind::PiecewiseConstant, tau, &data, t);
            assert_eq!(d0, c);
            let d1 = sample(ReconstructionKind::LocalPolynomial { degree: 1 }, tau, &data, t);
            let l = sample(ReconstructionKind::PiecewiseLinear, tau, &data, t);
            assert!((d1 - l).abs() < 1e-15);
        }
    }

    #[test]
    fn too_few_nodes_rejected() {
        let err = Reconstruction::new(ReconstructionKind::LocalPolynomial { degree: 3 }, 1.0, scalar_rows(&[1.0, 2.0, 3.0]));
        assert!(matches!(err, Err(ReconstructError::TooFewNodes { degree: 3, needed: 4, got: 3 })));
    }

    #[test]
    fn eps_combination_mixes_degrees() {
        let tau = 0.5;
        // base: quadratic data reconstructed with degree 2 (exact);
        // correction: linear data with degree 1 (exact). The combination
        // must equal base(t) + eps * corr(t) everywhere.
        let base_poly = |t: f64| 2.0 - t + 0.5 * t * t;
        let corr_poly = |t: f64| 1.0 + 3.0 * t;
        let n = 8;
        let base_data: Vec<f64> = (0..=n).map(|j| base_poly(j as f64 * tau)).collect();
        let corr_data: Vec<f64> = (0..=n).map(|j| corr_poly(j as f64 * tau)).collect();
        let (bk, ck) = paired_kinds(2);
        assert_eq!(bk, ReconstructionKind::LocalPolynomial { degree: 2 });
        assert_eq!(ck, ReconstructionKind::PiecewiseLinear);
        let comb = EpsCombination::new(
            Reconstruction::new(bk, tau, scalar_rows(&base_data)).unwrap(),
            Reconstruction::new(ck, tau, scalar_rows(&corr_data)).unwrap(),
            1e-3,
        )
        .unwrap();
        for i in 0..=40 {
            let t = i as f64 * (n as f64 * tau) / 40.0;
            let expect = base_poly(t) + 1e-3 * corr_poly(t);
            assert!((comb.eval(t)[0] - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn eps_combination_rejects_mismatched_grids() {
        let a = Reconstruction::new(ReconstructionKind::PiecewiseLinear, 0.5, scalar_rows(&[0.0, 1.0, 2.0])).unwrap();
        let b = Reconstruction::new(ReconstructionKind::PiecewiseLinear, 0.25, scalar_rows(&[0.0, 1.0, 2.0])).unwrap();
        assert!(EpsCombination::new(a, b, 0.1).is_err());
        let a = Reconstruction::new(ReconstructionKind::PiecewiseLinear, 0.5, scalar_rows(&[0.0, 1.0, 2.0])).unwrap();
        let b = Reconstruction::new(ReconstructionKind::PiecewiseLinear, 0.5, vec![vec![0.0; 2]; 3]).unwrap();
        assert!(EpsCombination::new(a, b, 0.1).is_err());
    }
}
