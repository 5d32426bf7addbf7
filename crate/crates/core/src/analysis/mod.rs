//! Post-processing of computed waves: amplitudes, speed sweeps, decay fits
//! and phase portraits.

pub mod fit;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, GridFunction, SpectralGrid};
use crate::oracle::{self, OracleError};
use crate::params::ModelParameters;
use crate::solver::{self, SolveReport, SolverConfig, SolverError, WaveState};

pub use fit::{fit_log_linear, fit_power_law, fit_speed_amplitude, FitModel, FitResult};

/// Left end of the default spatial fitting window.
pub const SPACE_WINDOW_START: f64 = 5.0;
/// Right end of the default spatial window as a fraction of `l`.
pub const SPACE_WINDOW_FRACTION: f64 = 0.8;
/// Samples below this fraction of the peak are excluded from the spatial fit.
pub const SPACE_FLOOR: f64 = 1e-10;
/// Spectral samples below this fraction of the peak are excluded.
pub const SPECTRUM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("minimum of the misfit is not bracketed in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("data changes sign (or vanishes) at {at}")]
    SignChange { at: f64 },
    #[error("sample ({t}, {y}) is outside the model's domain")]
    InvalidSample { t: f64, y: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Signed extremum of largest magnitude of each component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Amplitudes {
    pub zeta: f64,
    pub v: f64,
    pub u: f64,
}

pub fn signed_extremum(f: &[f64]) -> f64 {
    f.iter()
        .copied()
        .fold(0.0, |best: f64, x| if x.abs() > best.abs() { x } else { best })
}

pub fn amplitude(state: &WaveState) -> Amplitudes {
    Amplitudes {
        zeta: signed_extremum(&state.zeta),
        v: signed_extremum(&state.v),
        u: signed_extremum(&state.u),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub speed: f64,
    pub amplitudes: Amplitudes,
    pub iterations: usize,
    pub final_residual: f64,
}

/// `n` equally spaced speeds `c_crit + offsets.0 ..= c_crit + offsets.1`.
pub fn speed_grid(params: &ModelParameters, offsets: (f64, f64), n: usize) -> Vec<f64> {
    let c0 = params.c_crit();
    match n {
        0 => Vec::new(),
        1 => vec![c0 + offsets.0],
        _ => (0..n)
            .map(|i| c0 + offsets.0 + (offsets.1 - offsets.0) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Solve at each speed in parallel, keeping the input order.
pub fn speed_sweep(
    grid: &SpectralGrid,
    params: &ModelParameters,
    speeds: &[f64],
    template: &SolverConfig,
) -> Vec<Result<(SweepPoint, WaveState, SolveReport), SolverError>> {
    speeds
        .par_iter()
        .map(|&speed| {
            let mut cfg = template.clone();
            cfg.speed = speed;
            let (state, report) = solver::solve(grid, params, &cfg)?;
            let point = SweepPoint {
                speed,
                amplitudes: amplitude(&state),
                iterations: report.iterations,
                final_residual: report.final_residual,
            };
            Ok((point, state, report))
        })
        .collect()
}

/// `(x_j, zeta_j)` samples for `x_j > 0`.
pub fn positive_half(grid: &SpectralGrid, f: &[f64]) -> Vec<(f64, f64)> {
    grid.nodes()
        .iter()
        .zip(f)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, y)| (*x, *y))
        .collect()
}

/// Default spatial window: `[5, 0.8 l]`, cut where the profile first drops
/// below `SPACE_FLOOR` times its peak or changes sign (aliasing noise on
/// coarse grids).
pub fn default_space_window(samples: &[(f64, f64)], half_length: f64) -> (f64, f64) {
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.1.abs()));
    let sign = signed_extremum(&samples.iter().map(|s| s.1).collect::<Vec<_>>()).signum();
    let mut end = SPACE_WINDOW_START;
    for s in samples
        .iter()
        .filter(|s| s.0 >= SPACE_WINDOW_START && s.0 <= SPACE_WINDOW_FRACTION * half_length)
    {
        if s.1.abs() <= SPACE_FLOOR * peak || s.1.signum() != sign {
            break;
        }
        end = s.0;
    }
    (SPACE_WINDOW_START, end)
}

/// Fit `|zeta| = a x^b e^{c x}` on the positive half of a profile.
pub fn fit_decay_space(
    samples: &[(f64, f64)],
    window: (f64, f64),
) -> Result<FitResult, AnalysisError> {
    fit_log_linear(samples, window)
}

/// `(k', h |zeta_hat(k')|)` for the positive wavenumbers below Nyquist.
/// The factor `h` makes the magnitudes approximate the continuous transform.
pub fn spectrum_samples(grid: &SpectralGrid, f: &[f64]) -> Result<Vec<(f64, f64)>, GridError> {
    let spec = grid.forward_transform(f)?;
    let h = grid.spacing();
    Ok((1..grid.len() / 2)
        .map(|i| (grid.wavenumbers()[i], h * spec[i].norm()))
        .collect())
}

/// Default spectral window: `k'` in `[1, k'_max / 2]`, cut where the
/// magnitudes first reach `SPECTRUM_FLOOR` times their peak.
pub fn default_spectrum_window(samples: &[(f64, f64)]) -> (f64, f64) {
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.1.abs()));
    let kmax = samples.iter().fold(0.0f64, |m, s| m.max(s.0));
    let upper = 0.5 * kmax;
    let mut last = 1.0;
    for s in samples.iter().filter(|s| s.0 >= 1.0 && s.0 <= upper) {
        if s.1.abs() <= SPECTRUM_FLOOR * peak {
            break;
        }
        last = s.0;
    }
    (1.0, last)
}

/// Fit `|zeta_hat| = a k^b e^{c k}` on spectrum samples.
pub fn fit_decay_spectrum(
    samples: &[(f64, f64)],
    window: (f64, f64),
) -> Result<FitResult, AnalysisError> {
    fit_log_linear(samples, window)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStudyPoint {
    pub delta: f64,
    pub k_coeff: f64,
    pub speed: f64,
    pub zeta_max: Option<f64>,
    /// Why the point has no amplitude.
    pub error: Option<String>,
}

/// Amplitude as a function of `K` at `c_s = c_crit + speed_offset`, one
/// solve per depth ratio, sorted by `K`. Failed points are kept with their
/// error message.
pub fn amplitude_vs_k_study(
    grid: &SpectralGrid,
    gamma: f64,
    deltas: &[f64],
    speed_offset: f64,
    template: &SolverConfig,
) -> Vec<KStudyPoint> {
    let mut points: Vec<KStudyPoint> = deltas
        .par_iter()
        .map(|&delta| {
            let params = match ModelParameters::new(gamma, delta) {
                Ok(p) => p,
                Err(e) => {
                    return KStudyPoint {
                        delta,
                        k_coeff: f64::NAN,
                        speed: f64::NAN,
                        zeta_max: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            let speed = params.c_crit() + speed_offset;
            let mut cfg = template.clone();
            cfg.speed = speed;
            let (zeta_max, error) = match solver::solve(grid, &params, &cfg) {
                Ok((state, _)) => (Some(amplitude(&state).zeta), None),
                Err(e) => (None, Some(e.to_string())),
            };
            KStudyPoint {
                delta,
                k_coeff: params.k_coeff(),
                speed,
                zeta_max,
                error,
            }
        })
        .collect();
    points.sort_by(|a, b| a.k_coeff.total_cmp(&b.k_coeff));
    points
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePortrait {
    pub v: GridFunction,
    pub dv: GridFunction,
}

/// `(v_h(x_j), (D_N v_h)(x_j))` with pseudospectral differentiation.
pub fn phase_portrait(state: &WaveState, grid: &SpectralGrid) -> Result<PhasePortrait, GridError> {
    Ok(PhasePortrait {
        v: state.v.clone(),
        dv: grid.differentiate(&state.v, 1)?,
    })
}

/// `max_j |(v'_j)^2 / 2 + U(v_j)|` along a portrait: zero on the exact
/// homoclinic orbit.
pub fn phase_energy_residual(
    portrait: &PhasePortrait,
    params: ModelParameters,
    speed: f64,
) -> Result<f64, AnalysisError> {
    let curve = oracle::potential(params, speed)?;
    let s = curve.problem().speed_sign();
    Ok(portrait
        .v
        .iter()
        .zip(portrait.dv.iter())
        .map(|(v, dv)| curve.energy(s * v, s * dv).abs())
        .fold(0.0, f64::max))
}
