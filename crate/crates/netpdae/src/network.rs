//! Directed networks of one-dimensional pipes and the problem data posed on
//! them.
//!
//! A network couples damped linear wave equations, one per edge, through its
//! vertices: boundary vertices prescribe the potential (reservoirs), interior
//! vertices enforce flux balance against a prescribed demand (junctions).
//! This module owns the graph structure, its validity invariants, and the
//! scenario data (initial conditions, sources, boundary values); the
//! finite-element realization lives in [`crate::assembly`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("edge {edge}: endpoint {vertex} out of range (network has {count} vertices)")]
    EndpointOutOfRange { edge: usize, vertex: usize, count: usize },
    #[error("edge {edge}: tail and head coincide at vertex {vertex} (self-loops are not supported)")]
    SelfLoop { edge: usize, vertex: usize },
    #[error("edge {edge}: length must be positive, got {value}")]
    NonPositiveLength { edge: usize, value: f64 },
    #[error("edge {edge}: flux damping must be positive, got {value} (the parabolic limit divides by it)")]
    NonPositiveFluxDamping { edge: usize, value: f64 },
    #[error("edge {edge}: potential damping must be nonnegative, got {value}")]
    NegativePotentialDamping { edge: usize, value: f64 },
    #[error("vertex {vertex} appears in both the boundary and junction sets")]
    OverlappingVertexSets { vertex: usize },
    #[error("vertex {vertex} is assigned to neither the boundary nor the junction set")]
    UnassignedVertex { vertex: usize },
    #[error("vertex {vertex} listed twice in the same vertex set")]
    DuplicateVertex { vertex: usize },
    #[error("vertex {vertex} has no incident edge")]
    IsolatedVertex { vertex: usize },
    #[error("network needs at least one boundary vertex so the stationary potential is determined")]
    NoBoundaryVertex,
    #[error("network has no edges")]
    NoEdges,
    #[error("vertex {vertex} is not an endpoint of edge {edge}")]
    NotIncident { edge: usize, vertex: usize },
    #[error("scenario: expected {expected} entries for {what}, got {got}")]
    ScenarioLength { what: &'static str, expected: usize, got: usize },
    #[error("unknown built-in network '{name}' (available: {available})")]
    UnknownBuiltin { name: String, available: String },
}

/// Real polynomial in one variable, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial { coeffs: vec![c] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        Polynomial { coeffs: self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect() }
    }

    /// Exact mean value over `[x0, x1]` via the antiderivative.
    pub fn average(&self, x0: f64, x1: f64) -> f64 {
        assert!(x1 > x0);
        let anti = |x: f64| -> f64 {
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c * x.powi(k as i32 + 1) / (k as f64 + 1.0))
                .sum()
        };
        (anti(x1) - anti(x0)) / (x1 - x0)
    }
}

/// Scalar function of time used for sources and boundary values; every
/// variant has a closed-form derivative, which the integrators need for the
/// differentiated boundary constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TimeProfile {
    Constant { value: f64 },
    Polynomial { coefficients: Vec<f64> },
    /// `amplitude * exp(-rate * t)`.
    ExpDecay { amplitude: f64, rate: f64 },
    /// `amplitude * sin(omega * t)`.
    Sine { amplitude: f64, omega: f64 },
}

impl TimeProfile {
    pub fn zero() -> Self {
        TimeProfile::Constant { value: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, &c| acc * t + c),
            TimeProfile::ExpDecay { amplitude, rate } => amplitude * (-rate * t).exp(),
            TimeProfile::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
        }
    }

    pub fn eval_derivative(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant { .. } => 0.0,
            TimeProfile::Polynomial { coefficients } => Polynomial::new(coefficients.clone()).derivative().eval(t),
            TimeProfile::ExpDecay { amplitude, rate } => -rate * amplitude * (-rate * t).exp(),
            TimeProfile::Sine { amplitude, omega } => amplitude * omega * (omega * t).cos(),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            TimeProfile::Constant { value } => *value == 0.0,
            TimeProfile::Polynomial { coefficients } => coefficients.iter().all(|&c| c == 0.0),
            TimeProfile::ExpDecay { amplitude, .. } | TimeProfile::Sine { amplitude, .. } => *amplitude == 0.0,
        }
    }
}

/// Separable source term on one edge: `value(t, x) = space(x) * time(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSource {
    pub space: Polynomial,
    pub time: TimeProfile,
}

impl EdgeSource {
    pub fn zero() -> Self {
        EdgeSource { space: Polynomial::zero(), time: TimeProfile::zero() }
    }

    pub fn constant_in_space(time: TimeProfile) -> Self {
        EdgeSource { space: Polynomial::constant(1.0), time }
    }
}

/// One directed pipe. Damping coefficients are constant along the edge:
/// `damping_potential` multiplies the potential in its evolution equation and
/// `damping_flux` is the friction coefficient that defines the parabolic
/// limit (the limit flux divides by it, hence the positivity invariant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default)]
    pub damping_potential: f64,
    #[serde(default = "default_damping_flux")]
    pub damping_flux: f64,
}

fn default_length() -> f64 {
    1.0
}

fn default_damping_flux() -> f64 {
    1.0
}

/// Validated network: a directed graph whose vertex set is partitioned into
/// boundary (prescribed potential) and junction (flux balance) vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
    /// Vertices with prescribed potential, in the order boundary data is given.
    pub boundary_vertices: Vec<usize>,
    /// Vertices with a flux-balance condition, in the order demand data is given.
    pub junction_vertices: Vec<usize>,
}

/// Builds and validates a network.
///
/// Invariants enforced: edges nonempty with valid distinct endpoints,
/// positive lengths, positive flux damping, nonnegative potential damping;
/// the two vertex sets partition `0..vertex_count` without duplicates; no
/// isolated vertices; at least one boundary vertex.
pub fn build_network(
    vertex_count: usize,
    edges: Vec<Edge>,
    boundary_vertices: Vec<usize>,
    junction_vertices: Vec<usize>,
) -> Result<Network, NetworkError> {
    if edges.is_empty() {
        return Err(NetworkError::NoEdges);
    }
    let mut incident = vec![false; vertex_count];
    for (e, edge) in edges.iter().enumerate() {
        for v in [edge.tail, edge.head] {
            if v >= vertex_count {
                return Err(NetworkError::EndpointOutOfRange { edge: e, vertex: v, count: vertex_count });
            }
        }
        if edge.tail == edge.head {
            return Err(NetworkError::SelfLoop { edge: e, vertex: edge.tail });
        }
        if !(edge.length > 0.0) {
            return Err(NetworkError::NonPositiveLength { edge: e, value: edge.length });
        }
        if !(edge.damping_flux > 0.0) {
            return Err(NetworkError::NonPositiveFluxDamping { edge: e, value: edge.damping_flux });
        }
        if edge.damping_potential < 0.0 {
            return Err(NetworkError::NegativePotentialDamping { edge: e, value: edge.damping_potential });
        }
        incident[edge.tail] = true;
        incident[edge.head] = true;
    }

    let mut role = vec![0u8; vertex_count]; // 0 unassigned, 1 boundary, 2 junction
    for &v in &boundary_vertices {
        if v >= vertex_count {
            return Err(NetworkError::UnassignedVertex { vertex: v });
        }
        if role[v] == 1 {
            return Err(NetworkError::DuplicateVertex { vertex: v });
        }
        role[v] = 1;
    }
    for &v in &junction_vertices {
        if v >= vertex_count {
            return Err(NetworkError::UnassignedVertex { vertex: v });
        }
        match role[v] {
            1 => return Err(NetworkError::OverlappingVertexSets { vertex: v }),
            2 => return Err(NetworkError::DuplicateVertex { vertex: v }),
            _ => role[v] = 2,
        }
    }
    for v in 0..vertex_count {
        if role[v] == 0 {
            return Err(NetworkError::UnassignedVertex { vertex: v });
        }
        if !incident[v] {
            return Err(NetworkError::IsolatedVertex { vertex: v });
        }
    }
    if boundary_vertices.is_empty() {
        return Err(NetworkError::NoBoundaryVertex);
    }
    Ok(Network { vertex_count, edges, boundary_vertices, junction_vertices })
}

impl Network {
    /// Sign of edge `e` at vertex `v`: -1 at the tail, +1 at the head.
    ///
    /// Flux balance at a junction sums `sign * flux_at_endpoint` over the
    /// incident edges, so outgoing flow counts negatively at the tail.
    pub fn incidence_sign(&self, edge: usize, vertex: usize) -> Result<f64, NetworkError> {
        let e = &self.edges[edge];
        if vertex == e.tail {
            Ok(-1.0)
        } else if vertex == e.head {
            Ok(1.0)
        } else {
            Err(NetworkError::NotIncident { edge, vertex })
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// How the initial flux is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialFluxSpec {
    /// Derive the flux from the initial potential and the flux source at
    /// t = 0 through the stationary flux relation (the parabolic limit at
    /// the initial time). This is the natural choice for well-prepared data.
    Consistent,
    /// One polynomial per edge in the local coordinate.
    Polynomials { values: Vec<Polynomial> },
    /// `sum_{k=1..modes} cos(pi k x / length) / (pi k^exponent)` on each
    /// edge; the slow algebraic decay makes it a rough-data stress case.
    CosineSeries { exponent: f64, modes: usize },
}

/// Problem data on a network: initial conditions, sources, and boundary data.
///
/// Vector fields are ordered like the network's edge / vertex lists:
/// `dirichlet[i]` belongs to `boundary_vertices[i]`, `demand[i]` to
/// `junction_vertices[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Initial potential, one polynomial per edge (local coordinate).
    pub initial_potential: Vec<Polynomial>,
    pub initial_flux: InitialFluxSpec,
    /// Source in the flux equation, one per edge.
    pub source_flux: Vec<EdgeSource>,
    /// Source in the potential equation, one per edge.
    pub source_potential: Vec<EdgeSource>,
    /// Prescribed potential at each boundary vertex.
    pub dirichlet: Vec<TimeProfile>,
    /// Prescribed in/outflow at each junction vertex.
    pub demand: Vec<TimeProfile>,
}

impl Scenario {
    /// All-zero data for a given network shape.
    pub fn homogeneous(network: &Network) -> Scenario {
        let ne = network.edge_count();
        Scenario {
            initial_potential: vec![Polynomial::zero(); ne],
            initial_flux: InitialFluxSpec::Consistent,
            source_flux: vec![EdgeSource::zero(); ne],
            source_potential: vec![EdgeSource::zero(); ne],
            dirichlet: vec![TimeProfile::zero(); network.boundary_vertices.len()],
            demand: vec![TimeProfile::zero(); network.junction_vertices.len()],
        }
    }

    /// Checks that every per-edge / per-vertex list has the right length.
    pub fn validate_against(&self, network: &Network) -> Result<(), NetworkError> {
        let ne = network.edge_count();
        let checks: [(&'static str, usize, usize); 5] = [
            ("initial_potential", ne, self.initial_potential.len()),
            ("source_flux", ne, self.source_flux.len()),
            ("source_potential", ne, self.source_potential.len()),
            ("dirichlet", network.boundary_vertices.len(), self.dirichlet.len()),
            ("demand", network.junction_vertices.len(), self.demand.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(NetworkError::ScenarioLength { what, expected, got });
            }
        }
        if let InitialFluxSpec::Polynomials { values } = &self.initial_flux {
            if values.len() != ne {
                return Err(NetworkError::ScenarioLength { what: "initial_flux", expected: ne, got: values.len() });
            }
        }
        Ok(())
    }
}

/// Serializable description of a network plus scenario, the on-disk config
/// format of the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
    pub boundary_vertices: Vec<usize>,
    pub junction_vertices: Vec<usize>,
    pub scenario: Scenario,
}

impl NetworkConfig {
    pub fn build(self) -> Result<(Network, Scenario), NetworkError> {
        let network = build_network(self.vertex_count, self.edges, self.boundary_vertices, self.junction_vertices)?;
        self.scenario.validate_against(&network)?;
        Ok((network, self.scenario))
    }

    pub fn from_parts(network: &Network, scenario: &Scenario) -> NetworkConfig {
        NetworkConfig {
            vertex_count: network.vertex_count,
            edges: network.edges.clone(),
            boundary_vertices: network.boundary_vertices.clone(),
            junction_vertices: network.junction_vertices.clone(),
            scenario: scenario.clone(),
        }
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 2] = ["demo-network", "single-pipe"];

/// Returns a built-in (network, scenario) pair by name.
///
/// `demo-network`: six unit pipes joining two reservoirs through four
/// junctions with constant demands; the flux source on two interior pipes
/// decays exponentially from an initially stationary state, so the solution
/// relaxes between two equilibria. `single-pipe`: one unit pipe with both
/// ends held at zero potential and homogeneous data.
pub fn builtin(name: &str) -> Result<(Network, Scenario), NetworkError> {
    match name {
        "demo-network" => Ok(demo_network()),
        "single-pipe" => Ok(single_pipe()),
        _ => Err(NetworkError::UnknownBuiltin { name: name.to_string(), available: BUILTIN_NAMES.join(", ") }),
    }
}

/// Six-edge demonstration network; see [`builtin`].
pub fn demo_network() -> (Network, Scenario) {
    let edge = |tail, head| Edge { tail, head, length: 1.0, damping_potential: 0.0, damping_flux: 1.0 };
    let network = build_network(
        6,
        vec![edge(0, 1), edge(1, 2), edge(1, 3), edge(2, 4), edge(3, 4), edge(3, 5)],
        vec![0, 5],
        vec![1, 2, 3, 4],
    )
    .expect("built-in network is valid");

    // Initial state: stationary for the t = 0 sources. The potential ramps
    // up pipe 0, is flat across the interior, and ramps down pipe 5; the
    // constant initial fluxes balance the t = 0 flux sources and demands.
    let initial_potential = vec![
        Polynomial::new(vec![0.0, 1.0]),
        Polynomial::constant(1.0),
        Polynomial::constant(1.0),
        Polynomial::constant(1.0),
        Polynomial::constant(1.0),
        Polynomial::new(vec![1.0, -1.0]),
    ];
    let initial_flux = InitialFluxSpec::Polynomials {
        values: [-1.0, 1.0, 0.0, 1.0, 0.0, 1.0].iter().map(|&v| Polynomial::constant(v)).collect(),
    };
    let decay = TimeProfile::ExpDecay { amplitude: 1.0, rate: 1.0 };
    let source_flux = vec![
        EdgeSource::zero(),
        EdgeSource::constant_in_space(decay.clone()),
        EdgeSource::zero(),
        EdgeSource::constant_in_space(decay),
        EdgeSource::zero(),
        EdgeSource::zero(),
    ];
    let scenario = Scenario {
        initial_potential,
        initial_flux,
        source_flux,
        source_potential: vec![EdgeSource::zero(); 6],
        dirichlet: vec![TimeProfile::zero(), TimeProfile::zero()],
        demand: [-2.0, 0.0, -1.0, 1.0].iter().map(|&v| TimeProfile::Constant { value: v }).collect(),
    };
    scenario.validate_against(&network).expect("built-in scenario matches its network");
    (network, scenario)
}

/// One unit pipe with both endpoints boundary vertices; see [`builtin`].
pub fn single_pipe() -> (Network, Scenario) {
    let network = build_network(
        2,
        vec![Edge { tail: 0, head: 1, length: 1.0, damping_potential: 0.0, damping_flux: 1.0 }],
        vec![0, 1],
        vec![],
    )
    .expect("built-in network is valid");
    let scenario = Scenario::homogeneous(&network);
    (network, scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_eval_and_derivative() {
        let p = Polynomial::new(vec![1.0, -2.0, 3.0]); // 1 - 2x + 3x^2
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(2.0), 9.0);
        assert_eq!(p.derivative().coeffs, vec![-2.0, 6.0]);
        assert_eq!(Polynomial::constant(4.0).derivative(), Polynomial::zero());
    }

    #[test]
    fn polynomial_average_is_exact() {
        // mean of x^2 on [0,1] is 1/3; mean of x on [0.25, 0.75] is 0.5.
        assert!((Polynomial::new(vec![0.0, 0.0, 1.0]).average(0.0, 1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((Polynomial::new(vec![0.0, 1.0]).average(0.25, 0.75) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn time_profile_derivatives() {
        let e = TimeProfile::ExpDecay { amplitude: 2.0, rate: 3.0 };
        assert!((e.eval(0.5) - 2.0 * (-1.5f64).exp()).abs() < 1e-15);
        assert!((e.eval_derivative(0.5) + 6.0 * (-1.5f64).exp()).abs() < 1e-15);
        let s = TimeProfile::Sine { amplitude: 1.5, omega: 2.0 };
        assert!((s.eval_derivative(0.0) - 3.0).abs() < 1e-15);
        let p = TimeProfile::Polynomial { coefficients: vec![1.0, 0.0, 4.0] };
        assert!((p.eval_derivative(0.5) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn demo_network_incidence_signs() {
        let (net, _) = demo_network();
        assert_eq!(net.incidence_sign(0, 0).unwrap(), -1.0);
        assert_eq!(net.incidence_sign(0, 1).unwrap(), 1.0);
        assert_eq!(net.incidence_sign(5, 5).unwrap(), 1.0);
        assert_eq!(net.incidence_sign(0, 5), Err(NetworkError::NotIncident { edge: 0, vertex: 5 }));
    }

    #[test]
    fn vertex_partition_is_enforced() {
        let edges = vec![Edge { tail: 0, head: 1, length: 1.0, damping_potential: 0.0, damping_flux: 1.0 }];
        assert_eq!(
            build_network(2, edges.clone(), vec![0, 1], vec![1]),
            Err(NetworkError::OverlappingVertexSets { vertex: 1 })
        );
        assert_eq!(build_network(2, edges.clone(), vec![0], vec![]), Err(NetworkError::UnassignedVertex { vertex: 1 }));
        assert_eq!(
            build_network(2, edges.clone(), vec![0, 0], vec![1]),
            Err(NetworkError::DuplicateVertex { vertex: 0 })
        );
        assert_eq!(build_network(2, edges, vec![], vec![0, 1]), Err(NetworkError::NoBoundaryVertex));
    }

    #[test]
    fn isolated_vertex_rejected() {
        let edges = vec![Edge { tail: 0, head: 1, length: 1.0, damping_potential: 0.0, damping_flux: 1.0 }];
        assert_eq!(
            build_network(3, edges, vec![0, 2], vec![1]),
            Err(NetworkError::IsolatedVertex { vertex: 2 })
        );
    }

    #[test]
    fn bad_edge_data_rejected() {
        let mk = |length, d, a| {
            build_network(
                2,
                vec![Edge { tail: 0, head: 1, length, damping_potential: a, damping_flux: d }],
                vec![0],
                vec![1],
            )
        };
        assert_eq!(mk(0.0, 1.0, 0.0), Err(NetworkError::NonPositiveLength { edge: 0, value: 0.0 }));
        assert_eq!(mk(1.0, 0.0, 0.0), Err(NetworkError::NonPositiveFluxDamping { edge: 0, value: 0.0 }));
        assert_eq!(mk(1.0, -1.0, 0.0), Err(NetworkError::NonPositiveFluxDamping { edge: 0, value: -1.0 }));
        assert_eq!(mk(1.0, 1.0, -0.5), Err(NetworkError::NegativePotentialDamping { edge: 0, value: -0.5 }));
        let self_loop = build_network(
            2,
            vec![Edge { tail: 1, head: 1, length: 1.0, damping_potential: 0.0, damping_flux: 1.0 }],
            vec![0],
            vec![1],
        );
        assert_eq!(self_loop, Err(NetworkError::SelfLoop { edge: 0, vertex: 1 }));
    }

    #[test]
    fn scenario_length_mismatch_reported() {
        let (net, mut scenario) = demo_network();
        scenario.demand.pop();
        assert_eq!(
            scenario.validate_against(&net),
            Err(NetworkError::ScenarioLength { what: "demand", expected: 4, got: 3 })
        );
    }

    #[test]
    fn config_json_round_trip() {
        let (net, scenario) = demo_network();
        let config = NetworkConfig::from_parts(&net, &scenario);
        let json = serde_json::to_string_pretty(&config).unwrap();
        let parsed: NetworkConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, config);
        let (net2, scenario2) = parsed.build().unwrap();
        assert_eq!(net2, net);
        assert_eq!(scenario2, scenario);
    }

    #[test]
    fn config_defaults_fill_in() {
        let json = r#"{
            "vertex_count": 2,
            "edges": [{"tail": 0, "head": 1}],
            "boundary_vertices": [0, 1],
            "junction_vertices": [],
            "scenario": {
                "initial_potential": [[0.0, 1.0]],
                "initial_flux": {"type": "consistent"},
                "source_flux": [{"space": [1.0], "time": {"type": "constant", "value": 0.0}}],
                "source_potential": [{"space": [], "time": {"type": "constant", "value": 0.0}}],
                "dirichlet": [{"type": "constant", "value": 0.0}, {"type": "constant", "value": 1.0}],
                "demand": []
            }
        }"#;
        let parsed: NetworkConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.edges[0].length, 1.0);
        assert_eq!(parsed.edges[0].damping_flux, 1.0);
        assert_eq!(parsed.edges[0].damping_potential, 0.0);
        parsed.build().unwrap();
    }

    #[test]
    fn builtin_lookup() {
        assert!(builtin("demo-network").is_ok());
        assert!(builtin("single-pipe").is_ok());
        let err = builtin("nope").unwrap_err();
        assert!(err.to_string().contains("single-pipe"));
    }
}
