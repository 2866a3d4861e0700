//! Closed-form mode-series solutions on a single unit pipe.
//!
//! With unit flux damping, no potential damping, zero sources, and zero
//! boundary values, separation of variables turns the damped wave system on
//! the unit interval into independent mode oscillators
//!
//! ```text
//!     eps * y_k'' + y_k' + (pi k)^2 y_k = 0,
//! ```
//!
//! one per sine mode of the potential. Each mode is underdamped, critically
//! damped, or overdamped depending on the sign of `1/4 - eps (pi k)^2`, and
//! all three regimes have elementary solutions. Summing them gives exact
//! space-time solutions for two families of initial data — a cosine series
//! on the flux or a sine series on the potential — together with the exact
//! parabolic limits. These series serve as reference solutions ("oracles")
//! for validating the time integrators and measuring spatial convergence.

use thiserror::Error;

/// Discriminant threshold separating the damping regimes of one mode; modes
/// with `|1/4 - eps * theta|` below it are treated as critically damped
/// (the closed forms of the neighbouring regimes degrade as `omega -> 0`).
pub const MODE_REGIME_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("relaxation parameter must be positive, got {0}")]
    BadEps(f64),
    #[error("series needs at least one mode")]
    NoModes,
}

/// Which family of initial data the series solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesCase {
    /// Zero potential, cosine-series flux: `m(x, 0) = sum_k cos(pi k x) / (pi k^alpha)`.
    /// Its parabolic limit is identically zero.
    FluxSeries,
    /// Sine-series potential, zero flux: `p(x, 0) = sum_k sin(pi k x) / k^(1+alpha)`.
    /// Its parabolic limit is the decaying heat series.
    PotentialSeries,
}

/// Parameters of a truncated mode series.
#[derive(Debug, Clone, Copy)]
pub struct SeriesParams {
    /// Relaxation parameter of the flux time-derivative term.
    pub eps: f64,
    /// Spectral decay exponent of the initial data amplitudes.
    pub alpha: f64,
    /// Truncation: modes `1..=max_mode` are summed.
    pub max_mode: usize,
}

impl SeriesParams {
    pub fn new(eps: f64, alpha: f64, max_mode: usize) -> Result<Self, SeriesError> {
        if !(eps > 0.0) {
            return Err(SeriesError::BadEps(eps));
        }
        if max_mode == 0 {
            return Err(SeriesError::NoModes);
        }
        Ok(SeriesParams { eps, alpha, max_mode })
    }

    /// Chooses `eps = 1 / (2 pi k)^2` so that mode `k` is exactly critically
    /// damped — every lower mode oscillation-free, every higher one
    /// oscillatory.
    pub fn with_critical_mode(k: usize, alpha: f64, max_mode: usize) -> Result<Self, SeriesError> {
        if k == 0 {
            return Err(SeriesError::NoModes);
        }
        let omega0 = 2.0 * std::f64::consts::PI * k as f64;
        SeriesParams::new(1.0 / (omega0 * omega0), alpha, max_mode)
    }

    /// The mode index rendered critically damped by `eps`, if it is an
    /// integer (within [`MODE_REGIME_TOL`] of the discriminant).
    pub fn critical_mode(&self) -> Option<usize> {
        let k = (0.5 / (std::f64::consts::PI * self.eps.sqrt())).round();
        if k >= 1.0 && (0.25 - self.eps * mode_stiffness(k as usize)).abs() <= MODE_REGIME_TOL {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Amplitude of mode `k` in the potential: the coefficient multiplying
    /// the unit-response solution of the mode oscillator.
    fn mode_amplitude(&self, case: SeriesCase, k: usize) -> f64 {
        let kf = k as f64;
        match case {
            // m(x,0) = sum cos(pi k x)/(pi k^alpha) drives p'(0) = k^(1-alpha).
            SeriesCase::FluxSeries => kf.powf(1.0 - self.alpha),
            // p(x,0) = sum sin(pi k x)/k^(1+alpha).
            SeriesCase::PotentialSeries => kf.powf(-(1.0 + self.alpha)),
        }
    }
}

/// `theta_k = (pi k)^2`, the mode's stiffness.
pub fn mode_stiffness(k: usize) -> f64 {
    let w = std::f64::consts::PI * k as f64;
    w * w
}

/// Value and first two time derivatives of one mode amplitude.
#[derive(Debug, Clone, Copy)]
pub struct ModeState {
    pub value: f64,
    pub derivative: f64,
    pub second_derivative: f64,
}

/// Unit responses of the oscillator `eps y'' + y' + theta y = 0`:
/// `(s, c)` with `s(0) = 0, s'(0) = 1` and `c(0) = 1, c'(0) = 0`,
/// each as value and two derivatives.
///
/// `theta` may be any positive stiffness — a continuous mode `(pi k)^2` or a
/// discrete eigenvalue of an assembled operator. Evaluated through
/// `exp(((+-omega) - 1/2) t / eps)` whose exponents are never positive, so
/// no intermediate overflows even deep in a regime.
pub fn mode_unit_responses(eps: f64, theta: f64, t: f64) -> (ModeState, ModeState) {
    let disc = 0.25 - eps * theta;
    if disc > MODE_REGIME_TOL {
        // Overdamped: two real decay rates (+-omega - 1/2)/eps.
        let omega = disc.sqrt();
        let ep = ((omega - 0.5) * t / eps).exp();
        let em = ((-omega - 0.5) * t / eps).exp();
        let rp = (omega - 0.5) / eps;
        let rm = (-omega - 0.5) / eps;
        let s = ModeState {
            value: eps * (ep - em) / (2.0 * omega),
            derivative: ((omega - 0.5) * ep + (omega + 0.5) * em) / (2.0 * omega),
            second_derivative: (rp * (omega - 0.5) * ep + rm * (omega + 0.5) * em) / (2.0 * omega),
        };
        let c = ModeState {
            value: ((0.5 + omega) * ep + (omega - 0.5) * em) / (2.0 * omega),
            derivative: -theta * (ep - em) / (2.0 * omega),
            second_derivative: -theta * (rp * ep - rm * em) / (2.0 * omega),
        };
        (s, c)
    } else if disc >= -MODE_REGIME_TOL {
        // Critically damped: double root -1/(2 eps).
        let e = (-0.5 * t / eps).exp();
        let s = ModeState {
            value: t * e,
            derivative: e * (1.0 - 0.5 * t / eps),
            second_derivative: e * (0.25 * t / (eps * eps) - 1.0 / eps),
        };
        let c = ModeState {
            value: e * (1.0 + 0.5 * t / eps),
            derivative: -e * 0.25 * t / (eps * eps),
            second_derivative: -e * (1.0 - 0.5 * t / eps) * 0.25 / (eps * eps),
        };
        (s, c)
    } else {
        // Underdamped: decaying oscillation at frequency omega/eps.
        let omega = (-disc).sqrt();
        let e = (-0.5 * t / eps).exp();
        let (sin, cos) = (omega * t / eps).sin_cos();
        let s = ModeState {
            value: eps * e * sin / omega,
            derivative: e * (cos - sin / (2.0 * omega)),
            second_derivative: e * (-cos + sin * (1.0 - 4.0 * omega * omega) / (4.0 * omega)) / eps,
        };
        let c = ModeState {
            value: e * (cos + sin / (2.0 * omega)),
            derivative: -theta * e * sin / omega,
            second_derivative: -theta * e * (cos - sin / (2.0 * omega)) / eps,
        };
        (s, c)
    }
}

/// Amplitude `y_k(t)` of mode `k` in the potential, with derivatives.
pub fn potential_mode(params: &SeriesParams, case: SeriesCase, k: usize, t: f64) -> ModeState {
    let a = params.mode_amplitude(case, k);
    let (s, c) = mode_unit_responses(params.eps, mode_stiffness(k), t);
    let r = match case {
        SeriesCase::FluxSeries => s,
        SeriesCase::PotentialSeries => c,
    };
    ModeState {
        value: a * r.value,
        derivative: a * r.derivative,
        second_derivative: a * r.second_derivative,
    }
}

/// `p(x, t) = sum_k y_k(t) sin(pi k x)`.
pub fn potential(params: &SeriesParams, case: SeriesCase, x: f64, t: f64) -> f64 {
    (1..=params.max_mode)
        .map(|k| potential_mode(params, case, k, t).value * (std::f64::consts::PI * k as f64 * x).sin())
        .sum()
}

/// `m(x, t) = sum_k y_k'(t) / (pi k) * cos(pi k x)` (the flux that balances
/// the potential's rate of change).
pub fn flux(params: &SeriesParams, case: SeriesCase, x: f64, t: f64) -> f64 {
    (1..=params.max_mode)
        .map(|k| {
            let w = std::f64::consts::PI * k as f64;
            potential_mode(params, case, k, t).derivative / w * (w * x).cos()
        })
        .sum()
}

/// The boundary multiplier pair `(-m(0, t), m(1, t))`: signed flux traces at
/// the two pipe ends (outward normal convention, tail negative).
pub fn multiplier(params: &SeriesParams, case: SeriesCase, t: f64) -> [f64; 2] {
    [-flux(params, case, 0.0, t), flux(params, case, 1.0, t)]
}

/// Potential of the parabolic limit system (`eps = 0`): the heat semigroup
/// applied to the initial potential. Zero for [`SeriesCase::FluxSeries`].
pub fn limit_potential(params: &SeriesParams, case: SeriesCase, x: f64, t: f64) -> f64 {
    match case {
        SeriesCase::FluxSeries => 0.0,
        SeriesCase::PotentialSeries => (1..=params.max_mode)
            .map(|k| {
                let w = std::f64::consts::PI * k as f64;
                (-(w * w) * t).exp() * (k as f64).powf(-(1.0 + params.alpha)) * (w * x).sin()
            })
            .sum(),
    }
}

/// Flux of the parabolic limit system: minus the space derivative of
/// [`limit_potential`].
pub fn limit_flux(params: &SeriesParams, case: SeriesCase, x: f64, t: f64) -> f64 {
    match case {
        SeriesCase::FluxSeries => 0.0,
        SeriesCase::PotentialSeries => (1..=params.max_mode)
            .map(|k| {
                let w = std::f64::consts::PI * k as f64;
                -(-(w * w) * t).exp() * (k as f64).powf(-(1.0 + params.alpha)) * w * (w * x).cos()
            })
            .sum(),
    }
}

/// Supremum over the given times of the spatial L2 norm of the potential,
/// `max_t sqrt(sum_k y_k(t)^2 / 2)` (orthogonality of the sine modes).
pub fn sup_potential_l2(params: &SeriesParams, case: SeriesCase, times: &[f64]) -> f64 {
    let mut sup: f64 = 0.0;
    for &t in times {
        let sq: f64 = (1..=params.max_mode)
            .map(|k| {
                let y = potential_mode(params, case, k, t).value;
                y * y
            })
            .sum();
        sup = sup.max((0.5 * sq).sqrt());
    }
    sup
}

/// Exact element averages of `sum_{k=1..max_mode} cos(pi k x) / (pi k^alpha)`
/// on a uniform mesh of the unit interval: the projection onto a
/// piecewise-constant space, via antiderivative differences.
pub fn cosine_series_element_averages(alpha: f64, max_mode: usize, elements: usize) -> Vec<f64> {
    let h = 1.0 / elements as f64;
    (0..elements)
        .map(|e| {
            let (x0, x1) = (e as f64 * h, (e + 1) as f64 * h);
            (1..=max_mode)
                .map(|k| {
                    let w = std::f64::consts::PI * k as f64;
                    // (1/h) * integral of cos(pi k x)/(pi k^alpha)
                    ((w * x1).sin() - (w * x0).sin()) / (std::f64::consts::PI * w * (k as f64).powf(alpha) * h)
                })
                .sum()
        })
        .collect()
}

/// Exact element averages of the initial flux on a uniform mesh of the unit
/// pipe — the projection a piecewise-constant flux space uses as initial
/// data. Zero for [`SeriesCase::PotentialSeries`].
pub fn initial_flux_averages(params: &SeriesParams, case: SeriesCase, elements: usize) -> Vec<f64> {
    match case {
        SeriesCase::PotentialSeries => vec![0.0; elements],
        SeriesCase::FluxSeries => cosine_series_element_averages(params.alpha, params.max_mode, elements),
    }
}

/// Initial potential at the mesh nodes `x_j = j / elements` (zero for
/// [`SeriesCase::FluxSeries`]).
pub fn initial_potential_nodes(params: &SeriesParams, case: SeriesCase, elements: usize) -> Vec<f64> {
    (0..=elements)
        .map(|j| {
            let x = j as f64 / elements as f64;
            match case {
                SeriesCase::FluxSeries => 0.0,
                SeriesCase::PotentialSeries => (1..=params.max_mode)
                    .map(|k| (std::f64::consts::PI * k as f64 * x).sin() * (k as f64).powf(-(1.0 + params.alpha)))
                    .sum(),
            }
        })
        .collect()
}
