//! Butcher tableaus for implicit Runge-Kutta methods and the structural
//! checks the time integrators rely on.
//!
//! Every scheme offered here is stiffly accurate (last stage = step end) with
//! an invertible stage matrix, so it can integrate differential-algebraic
//! systems: the constraint equations are imposed at the stages and the step
//! ends exactly on a stage. Validation additionally checks algebraic
//! stability, which guarantees contractivity for the damped wave systems this
//! crate integrates.

use thiserror::Error;

/// Tolerance for the exact algebraic identities a tableau must satisfy
/// (order conditions, row sums, stiff-accuracy weights).
pub const TABLEAU_IDENTITY_TOL: f64 = 1e-12;

/// Eigenvalues of the algebraic-stability matrix may dip this far below zero
/// before the tableau is rejected; covers rounding in the s x s eigensolve.
pub const STABILITY_EIG_TOL: f64 = -1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum TableauError {
    #[error("tableau '{name}': stage matrix is singular")]
    SingularStageMatrix { name: String },
    #[error("tableau '{name}': weights b^T A^-1 1 = {value:.6} (must be 1, so the stability function vanishes at infinity)")]
    NotStiffWeights { name: String, value: f64 },
    #[error("tableau '{name}': quadrature order condition fails at k={k}")]
    QuadratureOrder { name: String, k: usize },
    #[error("tableau '{name}': stage order condition fails at k={k}, stage {stage}")]
    StageOrder { name: String, k: usize, stage: usize },
    #[error("tableau '{name}': not algebraically stable (negative weight or indefinite stability matrix)")]
    NotAlgebraicallyStable { name: String },
    #[error("tableau '{name}': quadrature order {p} must exceed stage order {q} for a multi-stage scheme")]
    OrderGap { name: String, p: usize, q: usize },
    #[error("unknown tableau '{name}' (available: {available})")]
    UnknownName { name: String, available: String },
}

/// An implicit Runge-Kutta scheme: stage matrix `a`, weights `b`, abscissae
/// `c`, and the (quadrature, stage) order pair the scheme claims.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// (quadrature order p, stage order q).
    pub order: (usize, usize),
}

/// Backward Euler viewed as a one-stage Runge-Kutta scheme; order (1, 1).
pub fn implicit_euler() -> ButcherTableau {
    ButcherTableau {
        name: "implicit-euler".to_string(),
        a: vec![vec![1.0]],
        b: vec![1.0],
        c: vec![1.0],
        order: (1, 1),
    }
}

/// Two-stage Radau IIA collocation scheme; order (3, 2).
pub fn radau_iia_2() -> ButcherTableau {
    ButcherTableau {
        name: "radau-iia-2".to_string(),
        a: vec![vec![5.0 / 12.0, -1.0 / 12.0], vec![3.0 / 4.0, 1.0 / 4.0]],
        b: vec![3.0 / 4.0, 1.0 / 4.0],
        c: vec![1.0 / 3.0, 1.0],
        order: (3, 2),
    }
}

/// Three-stage Radau IIA collocation scheme; order (5, 3).
pub fn radau_iia_3() -> ButcherTableau {
    let s6 = 6.0f64.sqrt();
    ButcherTableau {
        name: "radau-iia-3".to_string(),
        a: vec![
            vec![(88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0],
            vec![(296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0],
            vec![(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0],
        ],
        b: vec![(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0],
        c: vec![(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0],
        order: (5, 3),
    }
}

/// Names accepted by [`by_name`].
pub const TABLEAU_NAMES: [&str; 3] = ["implicit-euler", "radau-iia-2", "radau-iia-3"];

/// Looks up a built-in tableau by name.
pub fn by_name(name: &str) -> Result<ButcherTableau, TableauError> {
    match name {
        "implicit-euler" => Ok(implicit_euler()),
        "radau-iia-2" => Ok(radau_iia_2()),
        "radau-iia-3" => Ok(radau_iia_3()),
        _ => Err(TableauError::UnknownName { name: name.to_string(), available: TABLEAU_NAMES.join(", ") }),
    }
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Inverse of the stage matrix, or `None` if it is singular.
    pub fn a_inverse(&self) -> Option<Vec<Vec<f64>>> {
        invert_dense(&self.a)
    }

    /// Checks the quadrature conditions sum_i b_i c_i^(k-1) = 1/k for
    /// k = 1..=p and the stage conditions sum_j a_ij c_j^(k-1) = c_i^k / k
    /// for k = 1..=q at every stage.
    pub fn check_order_conditions(&self, p: usize, q: usize) -> bool {
        self.first_failed_order_condition(p, q).is_none()
    }

    fn first_failed_order_condition(&self, p: usize, q: usize) -> Option<(usize, Option<usize>)> {
        let s = self.stages();
        for k in 1..=p {
            let sum: f64 = (0..s).map(|i| self.b[i] * self.c[i].powi(k as i32 - 1)).sum();
            if (sum - 1.0 / k as f64).abs() > TABLEAU_IDENTITY_TOL {
                return Some((k, None));
            }
        }
        for k in 1..=q {
            for i in 0..s {
                let sum: f64 = (0..s).map(|j| self.a[i][j] * self.c[j].powi(k as i32 - 1)).sum();
                if (sum - self.c[i].powi(k as i32) / k as f64).abs() > TABLEAU_IDENTITY_TOL {
                    return Some((k, Some(i)));
                }
            }
        }
        None
    }

    /// Algebraic stability: all weights nonnegative and the matrix
    /// M = diag(b) A + A^T diag(b) - b b^T positive semidefinite.
    pub fn check_algebraic_stability(&self) -> bool {
        let s = self.stages();
        if self.b.iter().any(|&bi| bi < 0.0) {
            return false;
        }
        let mut m = vec![vec![0.0; s]; s];
        for i in 0..s {
            for j in 0..s {
                m[i][j] = self.b[i] * self.a[i][j] + self.b[j] * self.a[j][i] - self.b[i] * self.b[j];
            }
        }
        symmetric_eigenvalues(&m).into_iter().all(|lambda| lambda >= STABILITY_EIG_TOL)
    }

    /// Stability function R(z) = 1 + z b^T (I - z A)^{-1} 1 evaluated at a
    /// complex argument, returned as (re, im).
    pub fn stability_function(&self, z: (f64, f64)) -> (f64, f64) {
        let s = self.stages();
        // Complex system (I - zA) w = 1 solved by Gaussian elimination.
        let mut m: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 0.0); s]; s];
        let mut rhs: Vec<(f64, f64)> = vec![(1.0, 0.0); s];
        for i in 0..s {
            for j in 0..s {
                let delta = if i == j { 1.0 } else { 0.0 };
                m[i][j] = (delta - cmul(z, (self.a[i][j], 0.0)).0, -cmul(z, (self.a[i][j], 0.0)).1);
            }
        }
        for k in 0..s {
            let piv = (k..s)
                .max_by(|&i, &j| cabs2(m[i][k]).partial_cmp(&cabs2(m[j][k])).unwrap())
                .unwrap();
            m.swap(k, piv);
            rhs.swap(k, piv);
            for i in k + 1..s {
                let f = cdiv(m[i][k], m[k][k]);
                for j in k..s {
                    m[i][j] = csub(m[i][j], cmul(f, m[k][j]));
                }
                rhs[i] = csub(rhs[i], cmul(f, rhs[k]));
            }
        }
        let mut w = vec![(0.0, 0.0); s];
        for k in (0..s).rev() {
            let mut acc = rhs[k];
            for j in k + 1..s {
                acc = csub(acc, cmul(m[k][j], w[j]));
            }
            w[k] = cdiv(acc, m[k][k]);
        }
        let mut btw = (0.0, 0.0);
        for i in 0..s {
            btw = cadd(btw, cmul((self.b[i], 0.0), w[i]));
        }
        cadd((1.0, 0.0), cmul(z, btw))
    }

    /// Full structural validation; every integrator constructor calls this.
    ///
    /// Checks, in order: invertible stage matrix; b^T A^{-1} 1 = 1 (the
    /// stability function vanishes at infinity, required for the stiff
    /// algebraic variables); the claimed order conditions; p >= q + 1 for
    /// multi-stage schemes; algebraic stability.
    pub fn validate(&self) -> Result<(), TableauError> {
        let name = self.name.clone();
        let ainv = self.a_inverse().ok_or(TableauError::SingularStageMatrix { name: name.clone() })?;
        let s = self.stages();
        let mut bta1 = 0.0;
        for j in 0..s {
            for i in 0..s {
                bta1 += self.b[i] * ainv[i][j];
            }
        }
        if (bta1 - 1.0).abs() > TABLEAU_IDENTITY_TOL {
            return Err(TableauError::NotStiffWeights { name, value: bta1 });
        }
        let (p, q) = self.order;
        if let Some((k, stage)) = self.first_failed_order_condition(p, q) {
            return match stage {
                None => Err(TableauError::QuadratureOrder { name, k }),
                Some(stage) => Err(TableauError::StageOrder { name, k, stage }),
            };
        }
        if s >= 2 && p < q + 1 {
            return Err(TableauError::OrderGap { name, p, q });
        }
        if !self.check_algebraic_stability() {
            return Err(TableauError::NotAlgebraicallyStable { name });
        }
        Ok(())
    }

    /// Node-update weights w = A^{-T} b. For a stiffly accurate tableau this
    /// is the last unit vector, so combining stage values with these weights
    /// reproduces the final stage exactly.
    pub fn node_update_weights(&self) -> Vec<f64> {
        let ainv = self.a_inverse().expect("validated tableau has invertible stage matrix");
        let s = self.stages();
        (0..s).map(|j| (0..s).map(|i| self.b[i] * ainv[i][j]).sum()).collect()
    }
}

fn cadd(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

fn csub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.0, a.1 - b.1)
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn cdiv(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let d = cabs2(b);
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}

fn cabs2(a: (f64, f64)) -> f64 {
    a.0 * a.0 + a.1 * a.1
}

/// Dense inverse by Gauss-Jordan with partial pivoting (stage matrices are
/// at most 3 x 3).
fn invert_dense(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut inv = vec![vec![0.0; n]; n];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap())?;
        if m[piv][k].abs() <= 1e-14 * scale {
            return None;
        }
        m.swap(k, piv);
        inv.swap(k, piv);
        let d = m[k][k];
        for j in 0..n {
            m[k][j] /= d;
            inv[k][j] /= d;
        }
        for i in 0..n {
            if i != k && m[i][k] != 0.0 {
                let f = m[i][k];
                for j in 0..n {
                    m[i][j] -= f * m[k][j];
                    inv[i][j] -= f * inv[k][j];
                }
            }
        }
    }
    Some(inv)
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off <= 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cos * akp - sin * akq;
                    a[k][q] = sin * akp + cos * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cos * apk - sin * aqk;
                    a[q][k] = sin * apk + cos * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}
