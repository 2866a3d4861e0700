//! Simulation of damped linear wave systems on directed networks.
//!
//! The continuous model couples, on every edge of a directed graph, a pair of
//! first-order equations for a potential `p` and a flux `m`,
//!
//! ```text
//!     p' + a p + m_x = g,        eps m' + p_x + d m = f,
//! ```
//!
//! with continuity of `p` across vertices, prescribed potential at boundary
//! (Dirichlet) vertices, and prescribed net flux at interior coupling
//! vertices. For small `eps` the system is a singular perturbation of a
//! constrained heat equation; this crate implements
//!
//! * a mixed P1/P0 finite element semi-discretization ([`assembly`]),
//! * implicit Runge-Kutta time integrators for the limit system, for its
//!   first-order correction in `eps`, and for the full wave system as an
//!   index-2 differential-algebraic equation ([`stepping`]),
//! * interpolation-in-time reconstructions and the discrete norms used to
//!   measure convergence ([`reconstruct`], [`norms`]),
//! * an analytic separation-of-variables oracle on a single pipe
//!   ([`series`]), and
//! * batch convergence studies with CSV output ([`experiments`]).
//!
//! Everything rests on a small self-contained sparse kernel ([`sparse`]) and
//! a validated Butcher-tableau registry ([`tableau`]).

pub mod assembly;
pub mod experiments;
pub mod network;
pub mod norms;
pub mod reconstruct;
pub mod series;
pub mod sparse;
pub mod stepping;
pub mod tableau;
