//! Mixed finite-element semi-discretization on networks.
//!
//! Potentials are approximated with continuous piecewise-linear functions
//! (continuity across junctions built into the global numbering), fluxes
//! with piecewise constants. The semi-discrete system keeps the boundary
//! conditions as explicit constraints with multipliers, so the time
//! integrators see a differential-algebraic structure:
//!
//! ```text
//! M2 p' + Ma p - K^T m + B^T lambda = g - C^T r
//! eps M1 m' + K p + Md m            = f          (flux relaxation)
//! B p                               = h          (boundary potentials)
//! ```
//!
//! All matrices are assembled exactly: the damping coefficients are constant
//! per edge and the separable source terms have polynomial spatial profiles,
//! so every element integral has a closed form.

use thiserror::Error;

use crate::network::{InitialFluxSpec, Network, Polynomial, Scenario};
use crate::sparse::{row_rank, CsrMatrix, TripletBuilder};

/// Agreement tolerance for the initial potential where edges meet.
pub const VERTEX_CONTINUITY_TOL: f64 = 1e-10;

/// Rank tolerance when checking that the boundary constraint has full row
/// rank against the potential mass matrix.
pub const CONSTRAINT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("initial potential is discontinuous at vertex {vertex}: {first} vs {second}")]
    DiscontinuousInitialPotential { vertex: usize, first: f64, second: f64 },
    #[error("boundary constraint is rank deficient: rank {rank} < {expected} rows, so the multiplier is not unique")]
    ConstraintRankDeficient { rank: usize, expected: usize },
    #[error("mesh needs at least one element per edge")]
    EmptyMesh,
}

/// Mesh resolution: every edge is split into this many equal elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshParams {
    pub elements_per_edge: usize,
}

/// Global degree-of-freedom numbering.
///
/// Potential dofs: the network vertices come first (index = vertex id), then
/// the interior nodes edge by edge. Flux dofs: elements edge by edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMaps {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub elements_per_edge: usize,
    edge_tails: Vec<usize>,
    edge_heads: Vec<usize>,
}

impl DofMaps {
    pub fn new(network: &Network, mesh: &MeshParams) -> Self {
        DofMaps {
            vertex_count: network.vertex_count,
            edge_count: network.edge_count(),
            elements_per_edge: mesh.elements_per_edge,
            edge_tails: network.edges.iter().map(|e| e.tail).collect(),
            edge_heads: network.edges.iter().map(|e| e.head).collect(),
        }
    }

    /// Global potential dof of mesh node `node` (0..=elements_per_edge) on
    /// `edge`; endpoint nodes resolve to the shared vertex dofs.
    pub fn potential_dof(&self, edge: usize, node: usize) -> usize {
        let ne = self.elements_per_edge;
        if node == 0 {
            self.edge_tails[edge]
        } else if node == ne {
            self.edge_heads[edge]
        } else {
            self.vertex_count + edge * (ne - 1) + (node - 1)
        }
    }

    /// Global flux dof of `element` (0..elements_per_edge) on `edge`.
    pub fn flux_dof(&self, edge: usize, element: usize) -> usize {
        edge * self.elements_per_edge + element
    }

    pub fn n_potential(&self) -> usize {
        self.vertex_count + self.edge_count * (self.elements_per_edge - 1)
    }

    pub fn n_flux(&self) -> usize {
        self.edge_count * self.elements_per_edge
    }
}

/// The assembled semi-discrete operators for one network and mesh.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub network: Network,
    pub dofs: DofMaps,
    /// Piecewise-linear mass matrix (potential inner product).
    pub m2: CsrMatrix,
    /// Piecewise-constant mass matrix (flux inner product), diag of element lengths.
    pub m1: CsrMatrix,
    /// Potential-damping form: mass matrix weighted by each edge's damping.
    pub m_a: CsrMatrix,
    /// Flux-damping form: diag of (element length x edge damping).
    pub m_d: CsrMatrix,
    /// Derivative map (flux x potential): row per element, entries -1/+1 at its end nodes.
    pub k: CsrMatrix,
    /// Damping-weighted derivative map diag(1/d) K, used by the limit flux and its correction.
    pub k_tilde: CsrMatrix,
    /// Boundary selector (one row per boundary vertex).
    pub b: CsrMatrix,
    /// Junction selector (one row per junction vertex).
    pub c: CsrMatrix,
}

/// Assembles all semi-discrete operators.
pub fn assemble(network: &Network, mesh: &MeshParams) -> Result<AssembledSystem, AssemblyError> {
    if mesh.elements_per_edge == 0 {
        return Err(AssemblyError::EmptyMesh);
    }
    let ne = mesh.elements_per_edge;
    let dofs = DofMaps::new(network, mesh);
    let np = dofs.n_potential();
    let nm = dofs.n_flux();

    let mut m2 = TripletBuilder::new(np, np);
    let mut m_a = TripletBuilder::new(np, np);
    let mut k = TripletBuilder::new(nm, np);
    let mut k_tilde = TripletBuilder::new(nm, np);
    let mut m1_diag = vec![0.0; nm];
    let mut m_d_diag = vec![0.0; nm];

    for (e, edge) in network.edges.iter().enumerate() {
        let h = edge.length / ne as f64;
        // Element mass for linear hat functions: (h/6) [[2,1],[1,2]].
        let local = [[2.0 * h / 6.0, h / 6.0], [h / 6.0, 2.0 * h / 6.0]];
        for elem in 0..ne {
            let left = dofs.potential_dof(e, elem);
            let right = dofs.potential_dof(e, elem + 1);
            for (li, gi) in [left, right].into_iter().enumerate() {
                for (lj, gj) in [left, right].into_iter().enumerate() {
                    m2.push(gi, gj, local[li][lj]);
                    if edge.damping_potential != 0.0 {
                        m_a.push(gi, gj, edge.damping_potential * local[li][lj]);
                    }
                }
            }
            let f = dofs.flux_dof(e, elem);
            // Pairing derivative-of-hat against the element indicator is just
            // the difference of endpoint values, independent of h.
            k.push(f, left, -1.0);
            k.push(f, right, 1.0);
            k_tilde.push(f, left, -1.0 / edge.damping_flux);
            k_tilde.push(f, right, 1.0 / edge.damping_flux);
            m1_diag[f] = h;
            m_d_diag[f] = h * edge.damping_flux;
        }
    }

    let mut b = TripletBuilder::new(network.boundary_vertices.len(), np);
    for (row, &v) in network.boundary_vertices.iter().enumerate() {
        b.push(row, v, 1.0);
    }
    let mut c = TripletBuilder::new(network.junction_vertices.len(), np);
    for (row, &v) in network.junction_vertices.iter().enumerate() {
        c.push(row, v, 1.0);
    }

    Ok(AssembledSystem {
        network: network.clone(),
        dofs,
        m2: m2.build(),
        m1: CsrMatrix::from_diagonal(&m1_diag),
        m_a: m_a.build(),
        m_d: CsrMatrix::from_diagonal(&m_d_diag),
        k: k.build(),
        k_tilde: k_tilde.build(),
        b: b.build(),
        c: c.build(),
    })
}

impl AssembledSystem {
    pub fn n_potential(&self) -> usize {
        self.dofs.n_potential()
    }

    pub fn n_flux(&self) -> usize {
        self.dofs.n_flux()
    }

    pub fn n_boundary(&self) -> usize {
        self.network.boundary_vertices.len()
    }

    pub fn n_junction(&self) -> usize {
        self.network.junction_vertices.len()
    }

    /// Named operator list, e.g. for dumping to files.
    pub fn matrices(&self) -> Vec<(&'static str, &CsrMatrix)> {
        vec![
            ("m2", &self.m2),
            ("m1", &self.m1),
            ("m_a", &self.m_a),
            ("m_d", &self.m_d),
            ("k", &self.k),
            ("k_tilde", &self.k_tilde),
            ("b", &self.b),
            ("c", &self.c),
        ]
    }

    /// Checks the saddle-point structure is well posed: the boundary
    /// constraint must have full row rank (equivalently, B M2^-1 B^T is
    /// nonsingular; with independent selector rows the two coincide).
    pub fn verify_constraint_rank(&self) -> Result<(), AssemblyError> {
        let expected = self.b.nrows();
        let rank = row_rank(&self.b, CONSTRAINT_RANK_TOL);
        if rank < expected {
            return Err(AssemblyError::ConstraintRankDeficient { rank, expected });
        }
        Ok(())
    }
}

fn poly_integral(p: &Polynomial, x0: f64, x1: f64) -> f64 {
    let anti = |x: f64| -> f64 {
        p.coeffs.iter().enumerate().map(|(k, &c)| c * x.powi(k as i32 + 1) / (k as f64 + 1.0)).sum()
    };
    anti(x1) - anti(x0)
}

fn poly_mul_x(p: &Polynomial) -> Polynomial {
    let mut coeffs = vec![0.0];
    coeffs.extend_from_slice(&p.coeffs);
    Polynomial::new(coeffs)
}

/// Time-dependent load vectors for one scenario on one assembled system.
///
/// The spatial integrals are precomputed once; evaluating at a time only
/// scales them by the source time profiles.
pub struct Loads<'a> {
    sys: &'a AssembledSystem,
    scenario: &'a Scenario,
    /// Per edge: spatial flux-source loads (flux dof, integral of space profile).
    f_space: Vec<Vec<(usize, f64)>>,
    /// Per edge: same integrals divided by the edge's flux damping, for the
    /// damping-weighted source derivative the second-order correction needs.
    f_space_over_d: Vec<Vec<(usize, f64)>>,
    /// Per edge: spatial potential-source loads (potential dof, integral against hat function).
    g_space: Vec<Vec<(usize, f64)>>,
}

impl<'a> Loads<'a> {
    pub fn new(sys: &'a AssembledSystem, scenario: &'a Scenario) -> Self {
        let ne = sys.dofs.elements_per_edge;
        let mut f_space = Vec::with_capacity(sys.network.edge_count());
        let mut f_space_over_d = Vec::with_capacity(sys.network.edge_count());
        let mut g_space = Vec::with_capacity(sys.network.edge_count());
        for (e, edge) in sys.network.edges.iter().enumerate() {
            let h = edge.length / ne as f64;
            let f_profile = &scenario.source_flux[e].space;
            let g_profile = &scenario.source_potential[e].space;
            let g_profile_x = poly_mul_x(g_profile);
            let mut f_edge = Vec::new();
            let mut fd_edge = Vec::new();
            let mut g_edge = Vec::new();
            for elem in 0..ne {
                let (x0, x1) = (elem as f64 * h, (elem + 1) as f64 * h);
                let fint = poly_integral(f_profile, x0, x1);
                if fint != 0.0 {
                    f_edge.push((sys.dofs.flux_dof(e, elem), fint));
                    fd_edge.push((sys.dofs.flux_dof(e, elem), fint / edge.damping_flux));
                }
                // Hat-function loads: integral of space * (x1 - x)/h and
                // space * (x - x0)/h, both exact for polynomial profiles.
                let gint = poly_integral(g_profile, x0, x1);
                let gxint = poly_integral(&g_profile_x, x0, x1);
                let left = (x1 * gint - gxint) / h;
                let right = (gxint - x0 * gint) / h;
                if left != 0.0 {
                    g_edge.push((sys.dofs.potential_dof(e, elem), left));
                }
                if right != 0.0 {
                    g_edge.push((sys.dofs.potential_dof(e, elem + 1), right));
                }
            }
            f_space.push(f_edge);
            f_space_over_d.push(fd_edge);
            g_space.push(g_edge);
        }
        Loads { sys, scenario, f_space, f_space_over_d, g_space }
    }

    /// Flux-source load vector: per element integral of f(t, .).
    pub fn flux_source(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.sys.n_flux()];
        for (e, entries) in self.f_space.iter().enumerate() {
            let scale = self.scenario.source_flux[e].time.eval(t);
            for &(dof, w) in entries {
                out[dof] += scale * w;
            }
        }
        out
    }

    /// Damping-weighted time derivative of the flux source: per element
    /// integral of (1/d) df/dt(t, .).
    pub fn flux_source_derivative_weighted(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.sys.n_flux()];
        for (e, entries) in self.f_space_over_d.iter().enumerate() {
            let scale = self.scenario.source_flux[e].time.eval_derivative(t);
            for &(dof, w) in entries {
                out[dof] += scale * w;
            }
        }
        out
    }

    /// Potential-source load vector: integrals of g(t, .) against the hat basis.
    pub fn potential_source(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.sys.n_potential()];
        for (e, entries) in self.g_space.iter().enumerate() {
            let scale = self.scenario.source_potential[e].time.eval(t);
            for &(dof, w) in entries {
                out[dof] += scale * w;
            }
        }
        out
    }

    /// Boundary potential values h(t), ordered like the boundary vertices.
    pub fn boundary_values(&self, t: f64) -> Vec<f64> {
        self.scenario.dirichlet.iter().map(|p| p.eval(t)).collect()
    }

    /// Time derivative of the boundary values (the differentiated constraint).
    pub fn boundary_values_derivative(&self, t: f64) -> Vec<f64> {
        self.scenario.dirichlet.iter().map(|p| p.eval_derivative(t)).collect()
    }

    /// Junction demands r(t), ordered like the junction vertices.
    pub fn demands(&self, t: f64) -> Vec<f64> {
        self.scenario.demand.iter().map(|p| p.eval(t)).collect()
    }

    /// Right-hand side of the potential equation: g(t) - C^T r(t).
    pub fn potential_rhs(&self, t: f64) -> Vec<f64> {
        let mut out = self.potential_source(t);
        let r = self.demands(t);
        self.sys.c.transpose().matvec_acc(&r, -1.0, &mut out);
        out
    }

    pub fn system(&self) -> &AssembledSystem {
        self.sys
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }
}

/// Nodal initial potential vector; fails if the per-edge polynomials
/// disagree where edges share a vertex.
pub fn initial_potential(sys: &AssembledSystem, scenario: &Scenario) -> Result<Vec<f64>, AssemblyError> {
    let ne = sys.dofs.elements_per_edge;
    let np = sys.n_potential();
    let mut p: Vec<f64> = vec![0.0; np];
    let mut written = vec![false; np];
    for (e, edge) in sys.network.edges.iter().enumerate() {
        let h = edge.length / ne as f64;
        let poly = &scenario.initial_potential[e];
        for node in 0..=ne {
            let dof = sys.dofs.potential_dof(e, node);
            let value = poly.eval(node as f64 * h);
            if written[dof] {
                let scale = 1.0f64.max(p[dof].abs());
                if (p[dof] - value).abs() > VERTEX_CONTINUITY_TOL * scale {
                    return Err(AssemblyError::DiscontinuousInitialPotential {
                        vertex: dof,
                        first: p[dof],
                        second: value,
                    });
                }
            } else {
                p[dof] = value;
                written[dof] = true;
            }
        }
    }
    Ok(p)
}

/// Elementwise initial flux according to the scenario's specification.
pub fn initial_flux(sys: &AssembledSystem, loads: &Loads, p0: &[f64]) -> Vec<f64> {
    let ne = sys.dofs.elements_per_edge;
    match &loads.scenario().initial_flux {
        InitialFluxSpec::Consistent => consistent_initial_flux(sys, loads, p0),
        InitialFluxSpec::Polynomials { values } => {
            let mut m = vec![0.0; sys.n_flux()];
            for (e, edge) in sys.network.edges.iter().enumerate() {
                let h = edge.length / ne as f64;
                for elem in 0..ne {
                    m[sys.dofs.flux_dof(e, elem)] = values[e].average(elem as f64 * h, (elem + 1) as f64 * h);
                }
            }
            m
        }
        InitialFluxSpec::CosineSeries { exponent, modes } => {
            let mut m = vec![0.0; sys.n_flux()];
            for (e, edge) in sys.network.edges.iter().enumerate() {
                let len = edge.length;
                let h = len / ne as f64;
                for elem in 0..ne {
                    let (x0, x1) = (elem as f64 * h, (elem + 1) as f64 * h);
                    // Exact element average of cos(pi k x / len) / (pi k^alpha).
                    let mut avg = 0.0;
                    for k in 1..=*modes {
                        let kk = k as f64;
                        let arg = std::f64::consts::PI * kk / len;
                        avg += ((arg * x1).sin() - (arg * x0).sin()) * len
                            / (std::f64::consts::PI.powi(2) * kk.powf(1.0 + exponent) * h);
                    }
                    m[sys.dofs.flux_dof(e, elem)] = avg;
                }
            }
            m
        }
    }
}

/// The flux the stationary relation dictates at t = 0:
/// `m = Md^-1 (F(0) - K p0)`, the discrete version of `(f - dp/dx) / d`.
pub fn consistent_initial_flux(sys: &AssembledSystem, loads: &Loads, p0: &[f64]) -> Vec<f64> {
    let f0 = loads.flux_source(0.0);
    let kp = sys.k.matvec(p0);
    (0..sys.n_flux()).map(|i| (f0[i] - kp[i]) / sys.m_d.get(i, i)).collect()
}

/// Residuals of the two pointwise consistency conditions on initial data.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyReport {
    /// max |B p0 - h(0)|: the initial potential must satisfy the boundary values.
    pub boundary_residual: f64,
    /// max |K p0 + Md m0 - F(0)| over elements, scaled by element length:
    /// distance from the stationary flux relation at t = 0.
    pub flux_relation_residual: f64,
}

impl ConsistencyReport {
    pub fn is_consistent(&self, tol: f64) -> bool {
        self.boundary_residual <= tol && self.flux_relation_residual <= tol
    }
}

/// Evaluates both consistency residuals for given initial data.
pub fn check_consistency(sys: &AssembledSystem, loads: &Loads, p0: &[f64], m0: &[f64]) -> ConsistencyReport {
    let h0 = loads.boundary_values(0.0);
    let bp = sys.b.matvec(p0);
    let boundary_residual =
        bp.iter().zip(&h0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let f0 = loads.flux_source(0.0);
    let mut resid = sys.k.matvec(p0);
    sys.m_d.matvec_acc(m0, 1.0, &mut resid);
    let flux_relation_residual = resid
        .iter()
        .zip(&f0)
        .enumerate()
        .map(|(i, (lhs, rhs))| (lhs - rhs).abs() / sys.m1.get(i, i))
        .fold(0.0, f64::max);

    ConsistencyReport { boundary_residual, flux_relation_residual }
}
