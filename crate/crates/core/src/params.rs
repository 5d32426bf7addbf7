//! Parameter algebra of the two-layer system.
//!
//! Everything downstream works in nondimensional variables: the density
//! ratio `gamma = rho1/rho2`, the depth ratio `delta = d1/d2`, and the three
//! constants derived from them (dispersion `beta`, nonlinearity `K` and the
//! critical linear speed `c_crit`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("density ratio gamma must lie in (0, 1), got {0}")]
    GammaOutOfRange(f64),
    #[error("depth ratio delta must be positive, got {0}")]
    DeltaNotPositive(f64),
}

/// Character of the solitary waves selected by the sign of `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveType {
    Elevation,
    Depression,
    /// `delta^2 == gamma`: the quadratic terms vanish identically.
    Degenerate,
}

/// Validated `(gamma, delta)` pair with all derived constants precomputed.
///
/// Serializes as `{"gamma": .., "delta": ..}`; the derived fields are never
/// read back, they are recomputed on deserialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameters", into = "RawParameters")]
pub struct ModelParameters {
    gamma: f64,
    delta: f64,
    beta: f64,
    k_coeff: f64,
    c_crit: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParameters {
    gamma: f64,
    delta: f64,
}

impl TryFrom<RawParameters> for ModelParameters {
    type Error = ParamError;

    fn try_from(raw: RawParameters) -> Result<Self, Self::Error> {
        ModelParameters::new(raw.gamma, raw.delta)
    }
}

impl From<ModelParameters> for RawParameters {
    fn from(p: ModelParameters) -> Self {
        RawParameters {
            gamma: p.gamma,
            delta: p.delta,
        }
    }
}

impl ModelParameters {
    pub fn new(gamma: f64, delta: f64) -> Result<Self, ParamError> {
        // NaN fails both comparisons and is rejected here as well.
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(ParamError::GammaOutOfRange(gamma));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ParamError::DeltaNotPositive(delta));
        }
        Ok(Self::from_ratios_unchecked(gamma, delta))
    }

    /// Surface-wave limit `gamma = 0, delta = 1` (classical Boussinesq).
    ///
    /// Not admissible for the two-layer theory (`gamma` must be positive), but
    /// handy as a reference point for the formulas.
    pub fn surface_limit() -> Self {
        Self::from_ratios_unchecked(0.0, 1.0)
    }

    fn from_ratios_unchecked(gamma: f64, delta: f64) -> Self {
        let sum = gamma + delta;
        ModelParameters {
            gamma,
            delta,
            beta: (1.0 + gamma * delta) / (3.0 * delta * sum),
            k_coeff: (delta * delta - gamma) / (sum * sum),
            c_crit: ((1.0 - gamma) / sum).sqrt(),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Nonlinearity coefficient `K = (delta^2 - gamma) / (delta + gamma)^2`.
    pub fn k_coeff(&self) -> f64 {
        self.k_coeff
    }

    pub fn c_crit(&self) -> f64 {
        self.c_crit
    }

    /// `c_crit^2 = (1 - gamma) / (delta + gamma)`, computed without the root.
    pub fn c_crit_sq(&self) -> f64 {
        (1.0 - self.gamma) / (self.gamma + self.delta)
    }

    /// `delta + gamma`, the combination appearing in every linear term.
    pub fn depth_sum(&self) -> f64 {
        self.gamma + self.delta
    }

    pub fn wave_type(&self) -> WaveType {
        let disc = self.delta * self.delta - self.gamma;
        if disc > 0.0 {
            WaveType::Elevation
        } else if disc < 0.0 {
            WaveType::Depression
        } else {
            WaveType::Degenerate
        }
    }

    /// `+1` for elevation, `-1` for depression, `0` when degenerate.
    pub fn polarity(&self) -> f64 {
        match self.wave_type() {
            WaveType::Elevation => 1.0,
            WaveType::Depression => -1.0,
            WaveType::Degenerate => 0.0,
        }
    }
}
