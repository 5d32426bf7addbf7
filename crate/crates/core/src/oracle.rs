//! Solitary waves from the planar traveling-wave ODE.
//!
//! Eliminating `zeta` from the traveling-wave system leaves
//! `v'' = v/beta - G'(v)` with
//!
//! ```text
//! g(v) = K v^2 / 2 + c_crit^2 v / (c - K v),     G(v) = int_0^v g / (beta c)
//! ```
//!
//! The equation is conservative with energy `E = (v')^2 / 2 + U(v)`,
//! `U(v) = -v^2 / (2 beta) + G(v)`. For `c^2 > c_crit^2` the origin is a
//! saddle, and the solitary wave is the zero-energy homoclinic orbit through
//! the turning point `v*` (`U(v*) = 0`, `v*` between 0 and the pole `c/K`).
//!
//! Everything here is independent of the spectral machinery and serves as
//! the reference the Petviashvili solver is checked against.
//!
//! Speeds are handled in the positive frame: `(zeta, v, u)` at speed `-c`
//! equals `(zeta, -v, -u)` at speed `c`. [`PotentialCurve`] works with
//! `|c|`; profile values and the `reconstruct_*` methods use physical signs.

use serde::Serialize;
use thiserror::Error;

use crate::params::ModelParameters;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no solitary wave: speed {speed} does not exceed the critical speed {c_crit} in magnitude")]
    NoSolitaryWave { speed: f64, c_crit: f64 },
    #[error("nonlinearity coefficient vanishes (delta^2 == gamma)")]
    DegenerateNonlinearity,
    #[error("could not bracket the turning point of the potential")]
    NoBracket,
    #[error("energy drift {drift:e} exceeds tolerance {tolerance:e}; reduce the step")]
    StepSizeTooLarge { drift: f64, tolerance: f64 },
    #[error("invalid integration range or step (x_max {x_max}, step {step})")]
    InvalidStep { x_max: f64, step: f64 },
    #[error("value {v} is too close to the pole {pole}")]
    PoleProximity { v: f64, pole: f64 },
    #[error("value {v} lies beyond the pole {pole}")]
    BeyondPole { v: f64, pole: f64 },
}

/// Speed and parameters for which a solitary wave is sought.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelingWaveProblem {
    params: ModelParameters,
    speed: f64,
}

impl TravelingWaveProblem {
    pub fn new(params: ModelParameters, speed: f64) -> Result<Self, OracleError> {
        if params.k_coeff() == 0.0 {
            return Err(OracleError::DegenerateNonlinearity);
        }
        if !(speed * speed > params.c_crit_sq()) || !speed.is_finite() {
            return Err(OracleError::NoSolitaryWave {
                speed,
                c_crit: params.c_crit(),
            });
        }
        Ok(TravelingWaveProblem { params, speed })
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// `+1` or `-1`: the sign applied to `v` and `u` by the speed map.
    pub fn speed_sign(&self) -> f64 {
        self.speed.signum()
    }

    /// Saddle eigenvalue `sqrt(-U''(0)) = sqrt((c^2 - c_crit^2) / (beta c^2))`,
    /// the exponential decay rate of the wave.
    pub fn decay_rate(&self) -> f64 {
        let c2 = self.speed * self.speed;
        ((c2 - self.params.c_crit_sq()) / (self.params.beta() * c2)).sqrt()
    }
}

/// Potential of the traveling-wave ODE in the positive-speed frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialCurve {
    #[serde(skip)]
    problem: TravelingWaveProblem,
    speed: f64,
    beta: f64,
    k: f64,
    c_crit_sq: f64,
    depth_sum: f64,
    pole: f64,
    turning_point: f64,
}

const SERIES_SWITCH: f64 = 0.1;

/// `-r - ln(1 - r) = sum_{n >= 2} r^n / n`, accurate for small `r`.
fn log_remainder(r: f64) -> f64 {
    if r.abs() < SERIES_SWITCH {
        let mut sum = 0.0;
        let mut pow = r * r;
        let mut n = 2.0;
        loop {
            let term = pow / n;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() || n > 60.0 {
                break;
            }
            pow *= r;
            n += 1.0;
        }
        sum
    } else {
        -r - (-r).ln_1p()
    }
}

impl PotentialCurve {
    pub fn new(problem: TravelingWaveProblem) -> Result<Self, OracleError> {
        let p = problem.params;
        let speed = problem.speed.abs();
        let k = p.k_coeff();
        let mut curve = PotentialCurve {
            problem,
            speed,
            beta: p.beta(),
            k,
            c_crit_sq: p.c_crit_sq(),
            depth_sum: p.depth_sum(),
            pole: speed / k,
            turning_point: f64::NAN,
        };
        curve.turning_point = curve.find_turning_point()?;
        Ok(curve)
    }

    pub fn problem(&self) -> &TravelingWaveProblem {
        &self.problem
    }

    /// Pole `c/K` of `g` (positive frame).
    pub fn pole(&self) -> f64 {
        self.pole
    }

    /// Nonzero root `v*` of `U` (positive frame).
    pub fn turning_point(&self) -> f64 {
        self.turning_point
    }

    pub fn g(&self, v: f64) -> f64 {
        self.k * v * v / 2.0 + self.c_crit_sq * v / (self.speed - self.k * v)
    }

    #[allow(non_snake_case)]
    pub fn G(&self, v: f64) -> f64 {
        let r = self.k * v / self.speed;
        self.k * v * v * v / (6.0 * self.beta * self.speed)
            + self.c_crit_sq / (self.beta * self.k * self.k) * log_remainder(r)
    }

    /// `G'(v) = g(v) / (beta c)`.
    pub fn g_prime(&self, v: f64) -> f64 {
        self.g(v) / (self.beta * self.speed)
    }

    pub fn potential(&self, v: f64) -> f64 {
        -v * v / (2.0 * self.beta) + self.G(v)
    }

    pub fn potential_prime(&self, v: f64) -> f64 {
        -v / self.beta + self.g_prime(v)
    }

    /// `U''(0) = -(c^2 - c_crit^2) / (beta c^2)`.
    pub fn curvature_at_origin(&self) -> f64 {
        let c2 = self.speed * self.speed;
        -(c2 - self.c_crit_sq) / (self.beta * c2)
    }

    /// Right-hand side `v'' = v/beta - G'(v)` of the profile equation.
    pub fn acceleration(&self, v: f64) -> f64 {
        v / self.beta - self.g_prime(v)
    }

    pub fn energy(&self, v: f64, dv: f64) -> f64 {
        0.5 * dv * dv + self.potential(v)
    }

    fn find_turning_point(&self) -> Result<f64, OracleError> {
        let pole = self.pole;
        let mut lo = 1e-12 * pole;
        if self.potential(lo) >= 0.0 {
            return Err(OracleError::NoBracket);
        }
        let mut hi = f64::NAN;
        for gap in [1e-9, 1e-12, 1e-15] {
            let cand = (1.0 - gap) * pole;
            let u = self.potential(cand);
            if u.is_finite() && u > 0.0 {
                hi = cand;
                break;
            }
        }
        if hi.is_nan() {
            return Err(OracleError::NoBracket);
        }
        // Bisect until the bracket stops shrinking.
        loop {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.potential(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(if self.potential(lo).abs() <= self.potential(hi).abs() {
            lo
        } else {
            hi
        })
    }

    fn to_frame(&self, v: f64) -> f64 {
        self.problem.speed_sign() * v
    }

    fn check_orbit(&self, v_frame: f64) -> Result<(), OracleError> {
        let pole = self.pole;
        // Small values of the wrong sign (round-off in the tails) are fine:
        // the algebraic relations only break down at and past the pole.
        if v_frame.signum() == pole.signum() && v_frame.abs() > pole.abs() {
            return Err(OracleError::BeyondPole { v: v_frame, pole });
        }
        if (v_frame - pole).abs() < 1e-12 * pole.abs() {
            return Err(OracleError::PoleProximity { v: v_frame, pole });
        }
        Ok(())
    }

    /// `zeta_s = v / ((delta + gamma)(c - K v))`, from the first traveling-wave
    /// equation. `v` is the physical velocity.
    pub fn reconstruct_zeta(&self, v: f64) -> Result<f64, OracleError> {
        let w = self.to_frame(v);
        self.check_orbit(w)?;
        Ok(w / (self.depth_sum * (self.speed - self.k * w)))
    }

    /// `u_s = (1 - beta d^2/dx^2) v = beta G'(v)`. `v` is physical.
    pub fn reconstruct_u(&self, v: f64) -> Result<f64, OracleError> {
        let w = self.to_frame(v);
        self.check_orbit(w)?;
        Ok(self.problem.speed_sign() * self.beta * self.g_prime(w))
    }

    /// Zero-energy orbit on `[0, x_max]` starting from `(v*, 0)`.
    ///
    /// RK4 on the second-order equation while `|v| >= 1e-2 |v*|`, then RK4
    /// on the energy-reduced equation `v' = -sign(v*) sqrt(-2 U(v))`, which
    /// follows the stable branch into the saddle. The second-order form alone
    /// amplifies round-off like `exp(lambda x)` near the origin.
    pub fn integrate_profile(&self, x_max: f64, step: f64) -> Result<OracleProfile, OracleError> {
        if !(step > 0.0 && x_max > 0.0 && x_max.is_finite()) || step > x_max {
            return Err(OracleError::InvalidStep { x_max, step });
        }
        let steps = (x_max / step).round() as usize;
        let vstar = self.turning_point;
        let dir = vstar.signum();
        let switch = 1e-2 * vstar.abs();

        let mut v = Vec::with_capacity(steps + 1);
        let mut dv = Vec::with_capacity(steps + 1);
        v.push(vstar);
        dv.push(0.0);

        let mut y = [vstar, 0.0];
        let mut drift: f64 = 0.0;
        let mut scale: f64 = 1.0;
        let mut i = 0;
        let f2 = |s: [f64; 2]| [s[1], self.acceleration(s[0])];
        while i < steps && y[0].abs() >= switch {
            let k1 = f2(y);
            let k2 = f2([y[0] + 0.5 * step * k1[0], y[1] + 0.5 * step * k1[1]]);
            let k3 = f2([y[0] + 0.5 * step * k2[0], y[1] + 0.5 * step * k2[1]]);
            let k4 = f2([y[0] + step * k3[0], y[1] + step * k3[1]]);
            for c in 0..2 {
                y[c] += step / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            scale = scale.max(self.potential(y[0]).abs());
            drift = drift.max(self.energy(y[0], y[1]).abs());
            v.push(y[0]);
            dv.push(y[1]);
            i += 1;
        }
        let tolerance = 1e-10 * scale;
        if drift > tolerance {
            return Err(OracleError::StepSizeTooLarge { drift, tolerance });
        }
        let switch_index = i;

        let slope = |w: f64| -dir * (-2.0 * self.potential(w)).max(0.0).sqrt();
        let mut w = y[0];
        while i < steps {
            let k1 = slope(w);
            let k2 = slope(w + 0.5 * step * k1);
            let k3 = slope(w + 0.5 * step * k2);
            let k4 = slope(w + step * k3);
            w += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            v.push(w);
            dv.push(slope(w));
            i += 1;
        }

        let sign = self.problem.speed_sign();
        v.iter_mut().for_each(|x| *x *= sign);
        dv.iter_mut().for_each(|x| *x *= sign);
        Ok(OracleProfile {
            step,
            v,
            dv,
            energy_drift: drift,
            switch_index,
            decay_rate: self.problem.decay_rate(),
        })
    }
}

/// Convenience wrapper: `PotentialCurve::new(TravelingWaveProblem::new(..))`.
pub fn potential(params: ModelParameters, speed: f64) -> Result<PotentialCurve, OracleError> {
    PotentialCurve::new(TravelingWaveProblem::new(params, speed)?)
}

/// Samples `v(x_i)`, `v'(x_i)` at `x_i = i * step`, `i = 0..=n`, in physical
/// sign. The profile is even; [`OracleProfile::value_at`] mirrors negative `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleProfile {
    step: f64,
    v: Vec<f64>,
    dv: Vec<f64>,
    energy_drift: f64,
    switch_index: usize,
    decay_rate: f64,
}

impl OracleProfile {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn x_max(&self) -> f64 {
        (self.v.len() - 1) as f64 * self.step
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn dv(&self) -> &[f64] {
        &self.dv
    }

    /// Largest `|E|` seen while integrating the second-order form.
    pub fn energy_drift(&self) -> f64 {
        self.energy_drift
    }

    /// First sample produced by the energy-reduced equation.
    pub fn switch_index(&self) -> usize {
        self.switch_index
    }

    /// `v` at arbitrary `x` by cubic Hermite interpolation of `(v, v')`,
    /// using evenness for `x < 0` and the linear decay rate past `x_max`.
    pub fn value_at(&self, x: f64) -> f64 {
        let ax = x.abs();
        let last = self.v.len() - 1;
        let xm = self.x_max();
        if ax >= xm {
            return self.v[last] * (-self.decay_rate * (ax - xm)).exp();
        }
        let s = ax / self.step;
        let i = (s.floor() as usize).min(last - 1);
        let t = s - i as f64;
        let h = self.step;
        let (p0, p1) = (self.v[i], self.v[i + 1]);
        let (m0, m1) = (self.dv[i] * h, self.dv[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1
    }
}
