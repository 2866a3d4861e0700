//! Error norms for network fields and time-dependent trajectories.
//!
//! Spatial norms are discrete counterparts of the continuous L2 and H1 norms
//! on the network: quadratic forms in the finite-element mass matrices. Time
//! is handled either by a supremum over a sample rule (the C-norm used in
//! convergence studies) or by Gauss quadrature of the squared spatial norm
//! (an L2-in-time norm). A least-squares power-law fit turns measured error
//! curves into convergence rates.

use crate::assembly::AssembledSystem;
use crate::reconstruct::TimeEval;
use crate::sparse::CsrMatrix;

/// `sqrt(x' M x)` for a symmetric positive semidefinite weight matrix.
///
/// With the potential mass matrix this is the discrete L2 norm of the
/// piecewise-linear potential; with the flux mass matrix, the L2 norm of the
/// piecewise-constant flux.
pub fn weighted_norm(weight: &CsrMatrix, x: &[f64]) -> f64 {
    quadratic_form(weight, x).max(0.0).sqrt()
}

/// `x' M x`.
pub fn quadratic_form(weight: &CsrMatrix, x: &[f64]) -> f64 {
    let mx = weight.matvec(x);
    x.iter().zip(&mx).map(|(a, b)| a * b).sum()
}

/// Discrete H1 norm of a potential vector: L2 norm plus the L2 norm of the
/// elementwise space derivative, `sqrt(p' M2 p + (K p)' M1^{-1} (K p))`.
pub fn h1_norm(sys: &AssembledSystem, p: &[f64]) -> f64 {
    let kp = sys.k.matvec(p);
    let mut grad = 0.0;
    for (e, edge) in sys.network.edges.iter().enumerate() {
        let h = edge.length / sys.dofs.elements_per_edge as f64;
        for elem in 0..sys.dofs.elements_per_edge {
            let v = kp[sys.dofs.flux_dof(e, elem)];
            grad += v * v / h;
        }
    }
    (quadratic_form(&sys.m2, p) + grad).max(0.0).sqrt()
}

/// Where in time a supremum norm samples a reconstructed trajectory.
#[derive(Debug, Clone, Copy)]
pub struct SampleRule {
    /// Sample interval midpoints in addition to the nodes.
    pub midpoints: bool,
    /// Additionally sample a geometric sequence of early times
    /// `scale/4 * 2^i` (while below the final time). Resolves initial
    /// layers of width `scale` that a uniform grid would step over.
    pub log_refine_scale: Option<f64>,
}

impl SampleRule {
    pub fn nodes_only() -> Self {
        SampleRule { midpoints: false, log_refine_scale: None }
    }

    pub fn with_midpoints() -> Self {
        SampleRule { midpoints: true, log_refine_scale: None }
    }

    /// All sample times for a grid of `intervals` steps of size `tau`.
    pub fn sample_times(&self, tau: f64, intervals: usize) -> Vec<f64> {
        let end = tau * intervals as f64;
        let mut times = Vec::with_capacity(2 * intervals + 2);
        for j in 0..=intervals {
            times.push(j as f64 * tau);
            if self.midpoints && j < intervals {
                times.push((j as f64 + 0.5) * tau);
            }
        }
        if let Some(scale) = self.log_refine_scale {
            let mut t = 0.25 * scale;
            while t < end {
                times.push(t);
                t *= 2.0;
            }
        }
        times
    }
}

/// Supremum over sampled times of the weighted spatial norm:
/// `max_t sqrt(f(t)' M f(t))`. The discrete stand-in for the norm of
/// C([0, T]; L2) when `weight` is a mass matrix.
pub fn sup_weighted_norm(f: &dyn TimeEval, weight: &CsrMatrix, rule: &SampleRule) -> f64 {
    let mut sup: f64 = 0.0;
    for t in rule.sample_times(f.node_spacing(), f.intervals()) {
        sup = sup.max(weighted_norm(weight, &f.eval(t)));
    }
    sup
}

/// 5-point Gauss-Legendre nodes and weights on [-1, 1]; exact through
/// degree 9, ample for squared low-degree reconstructions per interval.
const GAUSS_NODES: [f64; 5] = [
    -0.906179845938664,
    -0.538469310105683,
    0.0,
    0.538469310105683,
    0.906179845938664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236926885056189,
    0.478628670499366,
    0.568888888888889,
    0.478628670499366,
    0.236926885056189,
];

/// L2-in-time norm `sqrt(int_0^T f(t)' M f(t) dt)`, integrated by Gauss
/// quadrature on each node interval of `f`.
pub fn l2_time_norm(f: &dyn TimeEval, weight: &CsrMatrix) -> f64 {
    let tau = f.node_spacing();
    let mut total = 0.0;
    for j in 0..f.intervals() {
        let mid = (j as f64 + 0.5) * tau;
        for (node, w) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS) {
            let t = mid + 0.5 * tau * node;
            total += 0.5 * tau * w * quadratic_form(weight, &f.eval(t));
        }
    }
    total.max(0.0).sqrt()
}

/// Result of fitting `y = prefactor * x^exponent` by least squares in
/// log-log coordinates.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of log(y) around the fitted line.
    pub residual: f64,
}

/// Fits a power law through positive data points. Panics if fewer than two
/// points or any datum is non-positive (a power law cannot pass through
/// zero or negative values).
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> PowerLawFit {
    assert_eq!(xs.len(), ys.len(), "mismatched sample lengths");
    assert!(xs.len() >= 2, "need at least two points to fit a line");
    assert!(
        xs.iter().chain(ys.iter()).all(|&v| v > 0.0),
        "power-law fit needs strictly positive data"
    );
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    PowerLawFit { exponent: slope, prefactor: intercept.exp(), residual }
}

/// Least-squares slope between consecutive points, useful for checking that
/// a convergence order has stabilized: returns `log(y_i / y_{i+1}) /
/// log(x_i / x_{i+1})` for each adjacent pair.
pub fn pairwise_orders(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[0] / y[1]).ln() / (x[0] / x[1]).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, MeshParams};
    use crate::network;
    use crate::reconstruct::{Reconstruction, ReconstructionKind};

    fn unit_pipe_system(elements: usize) -> AssembledSystem {
        let (net, _) = network::builtin("single-pipe").unwrap();
        assemble(&net, &MeshParams { elements_per_edge: elements }).unwrap()
    }

    #[test]
    fn constant_potential_has_unit_l2_norm_on_unit_pipe() {
        // ||1||_{L2(0,1)} = 1; the mass matrix reproduces it exactly.
        let sys = unit_pipe_system(7);
        let ones = vec![1.0; sys.n_potential()];
        assert!((weighted_norm(&sys.m2, &ones) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn h1_norm_of_linear_ramp() {
        // p(x) = x on the unit pipe: ||p||_L2^2 = 1/3, ||p'||_L2^2 = 1,
        // so the H1 norm is sqrt(4/3). Nodal interpolation is exact.
        let sys = unit_pipe_system(9);
        let n = sys.dofs.elements_per_edge;
        let mut p = vec![0.0; sys.n_potential()];
        for node in 0..=n {
            p[sys.dofs.potential_dof(0, node)] = node as f64 / n as f64;
        }
        assert!((h1_norm(&sys, &p) - (4.0f64 / 3.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn sample_rule_places_nodes_midpoints_and_log_points() {
        let rule = SampleRule { midpoints: true, log_refine_scale: Some(0.01) };
        let times = rule.sample_times(0.25, 4);
        // 5 nodes + 4 midpoints + log points 0.0025 * 2^i < 1.
        for t in [0.0, 0.125, 0.25, 0.375, 0.5, 0.75, 1.0] {
            assert!(times.iter().any(|&s| (s - t).abs() < 1e-15), "missing {t}");
        }
        for t in [0.0025, 0.005, 0.01, 0.02, 0.64] {
            assert!(times.iter().any(|&s| (s - t).abs() < 1e-15), "missing log point {t}");
        }
        assert!(times.iter().all(|&s| s <= 1.0));
    }

    #[test]
    fn sup_norm_finds_interior_peak() {
        // Hat-shaped scalar signal peaking between nodes: the midpoint rule
        // sees the peak that nodes alone would miss.
        let tau = 1.0;
        let rows = vec![vec![0.0], vec![0.0], vec![0.0]];
        let mut rows_peak = rows.clone();
        rows_peak[1][0] = 2.0;
        let weight = CsrMatrix::identity(1);
        let f = Reconstruction::new(ReconstructionKind::PiecewiseLinear, tau, rows_peak).unwrap();
        let nodes_only = sup_weighted_norm(&f, &weight, &SampleRule::nodes_only());
        assert!((nodes_only - 2.0).abs() < 1e-15);
        let with_mid = sup_weighted_norm(&f, &weight, &SampleRule::with_midpoints());
        assert!((with_mid - 2.0).abs() < 1e-15);
    }

    #[test]
    fn l2_time_norm_of_linear_signal() {
        // f(t) = t on [0, 1] with unit weight: integral of t^2 is 1/3.
        let rows: Vec<Vec<f64>> = (0..=10).map(|j| vec![j as f64 / 10.0]).collect();
        let f = Reconstruction::new(ReconstructionKind::PiecewiseLinear, 0.1, rows).unwrap();
        let norm = l2_time_norm(&f, &CsrMatrix::identity(1));
        assert!((norm - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn l2_time_norm_against_brute_force_quadrature() {
        // Degree-3 reconstruction of sin(t) data; compare Gauss quadrature
        // against a dense trapezoid evaluation of the same reconstruction.
        let tau = 0.2;
        let n = 10;
        let rows: Vec<Vec<f64>> = (0..=n).map(|j| vec![(j as f64 * tau).sin()]).collect();
        let f = Reconstruction::new(ReconstructionKind::LocalPolynomial { degree: 3 }, tau, rows).unwrap();
        let weight = CsrMatrix::identity(1);
        let gauss = l2_time_norm(&f, &weight);
        let m = 20000;
        let dt = (n as f64 * tau) / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let t = i as f64 * dt;
            let v = f.eval(t)[0];
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            acc += w * v * v * dt;
        }
        assert!((gauss - acc.sqrt()).abs() < 1e-6, "gauss {gauss} vs trapezoid {}", acc.sqrt());
    }

    #[test]
    fn power_law_fit_recovers_exact_law() {
        // y = 3 x^2 fits with exponent 2, prefactor 3, zero residual.
        let xs: Vec<f64> = (1..=8).map(|i| 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let fit = fit_power_law(&xs, &ys);
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-12);
        assert!(fit.residual < 1e-13);
    }

    #[test]
    fn pairwise_orders_of_halving_grid() {
        let xs = [0.4, 0.2, 0.1];
        let ys = [1.6, 0.4, 0.1];
        for order in pairwise_orders(&xs, &ys) {
            assert!((order - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "strictly positive")]
    fn power_law_fit_rejects_zero_data() {
        fit_power_law(&[0.1, 0.2], &[0.0, 1.0]);
    }
}
