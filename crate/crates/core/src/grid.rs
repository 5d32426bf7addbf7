//! Periodic collocation grid on `(-l, l)` with FFT-based pseudospectral
//! operators.
//!
//! Conventions:
//! - nodes `x_j = -l + j h`, `h = 2l/N`, `j = 0..N-1`;
//! - spectra are stored in FFT order: index `i < N/2` holds mode `k = i`,
//!   index `i >= N/2` holds mode `k = i - N` (so `i = N/2` is the Nyquist
//!   mode `k = -N/2`); the scaled wavenumber is `k' = pi k / l`;
//! - the forward transform is unnormalized, the inverse carries `1/N`, so
//!   `sum |f_j|^2 = (1/N) sum |f_hat_k|^2`.
//!
//! Coefficients refer to the phase origin at the first node `x_0 = -l`. All
//! operators here are Fourier multipliers, which do not care about that phase.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ModelParameters;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("mode count must be even and at least 8, got {0}")]
    InvalidModes(usize),
    #[error("half length must be positive and finite, got {0}")]
    InvalidHalfLength(f64),
    #[error("size mismatch: grid has {expected} nodes, data has {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("differentiation order must be positive")]
    InvalidOrder,
}

/// Real samples on the grid nodes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        GridFunction(values)
    }

    pub fn zeros(n: usize) -> Self {
        GridFunction(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        GridFunction(self.0.iter().map(|v| v * factor).collect())
    }

    /// `max_j |f_j - g_j|`.
    pub fn max_diff(&self, other: &GridFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Deref for GridFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for GridFunction {
    fn from(values: Vec<f64>) -> Self {
        GridFunction(values)
    }
}

impl FromIterator<f64> for GridFunction {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        GridFunction(iter.into_iter().collect())
    }
}

/// Uniform periodic grid plus FFT plans.
///
/// Plans are `Arc<dyn Fft>`, which are `Send + Sync` and allocate their own
/// scratch, so one grid can serve concurrent transforms of distinct data.
#[derive(Clone)]
pub struct SpectralGrid {
    half_length: f64,
    n: usize,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    padded_forward: Arc<dyn Fft<f64>>,
    padded_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("half_length", &self.half_length)
            .field("n", &self.n)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(half_length: f64, n: usize) -> Result<Self, GridError> {
        if n < 8 || n % 2 != 0 {
            return Err(GridError::InvalidModes(n));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(GridError::InvalidHalfLength(half_length));
        }
        let h = 2.0 * half_length / n as f64;
        let nodes = (0..n).map(|j| -half_length + j as f64 * h).collect();
        let wavenumbers = (0..n)
            .map(|i| PI * mode_index(i, n) as f64 / half_length)
            .collect();
        let mut planner = FftPlanner::new();
        let padded = 3 * n / 2;
        Ok(SpectralGrid {
            half_length,
            n,
            nodes,
            wavenumbers,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            padded_forward: planner.plan_fft_forward(padded),
            padded_inverse: planner.plan_fft_inverse(padded),
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Scaled wavenumbers `k' = pi k / l` in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Signed integer mode index stored at FFT slot `i`.
    pub fn mode_index(&self, i: usize) -> i64 {
        mode_index(i, self.n)
    }

    pub fn nyquist_slot(&self) -> usize {
        self.n / 2
    }

    /// Largest resolved scaled wavenumber `pi (N/2) / l`.
    pub fn max_wavenumber(&self) -> f64 {
        PI * (self.n / 2) as f64 / self.half_length
    }

    pub fn check(&self, f: &[f64]) -> Result<(), GridError> {
        if f.len() != self.n {
            return Err(GridError::SizeMismatch {
                expected: self.n,
                got: f.len(),
            });
        }
        Ok(())
    }

    fn check_spectrum(&self, s: &[Complex64]) -> Result<(), GridError> {
        if s.len() != self.n {
            return Err(GridError::SizeMismatch {
                expected: self.n,
                got: s.len(),
            });
        }
        Ok(())
    }

    /// Sample a closure on the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Unnormalized DFT of real samples.
    pub fn forward_transform(&self, f: &[f64]) -> Result<Vec<Complex64>, GridError> {
        self.check(f)?;
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        Ok(buf)
    }

    /// Inverse DFT (with the `1/N` factor), complex output.
    pub fn inverse_transform(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>, GridError> {
        self.check_spectrum(spectrum)?;
        let mut buf = spectrum.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        Ok(buf)
    }

    /// Inverse DFT keeping the real part, for spectra of real functions.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Result<GridFunction, GridError> {
        Ok(self
            .inverse_transform(spectrum)?
            .into_iter()
            .map(|z| z.re)
            .collect())
    }

    /// Apply a Fourier multiplier `symbol(slot, k')` to real data.
    pub fn apply_multiplier(
        &self,
        f: &[f64],
        symbol: impl Fn(usize, f64) -> Complex64,
    ) -> Result<GridFunction, GridError> {
        let mut spec = self.forward_transform(f)?;
        for (i, z) in spec.iter_mut().enumerate() {
            *z *= symbol(i, self.wavenumbers[i]);
        }
        self.inverse_real(&spec)
    }

    /// Pseudospectral derivative: multiply mode `k` by `(i k')^order`.
    ///
    /// For odd orders the Nyquist mode is zeroed, since its partner `+N/2`
    /// is not represented and keeping it would make the result complex.
    pub fn differentiate(&self, f: &[f64], order: u32) -> Result<GridFunction, GridError> {
        if order == 0 {
            return Err(GridError::InvalidOrder);
        }
        let nyq = self.nyquist_slot();
        let odd = order % 2 == 1;
        self.apply_multiplier(f, |i, k| {
            if odd && i == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(order)
            }
        })
    }

    /// Symbol `1 + beta k'^2` of `I - beta D^2` at slot `i`.
    pub fn helmholtz_symbol(&self, beta: f64, i: usize) -> f64 {
        let k = self.wavenumbers[i];
        1.0 + beta * k * k
    }

    /// `u = (I - beta D_N^2) f`.
    pub fn helmholtz_apply(
        &self,
        params: &ModelParameters,
        f: &[f64],
    ) -> Result<GridFunction, GridError> {
        let beta = params.beta();
        self.apply_multiplier(f, |_, k| Complex64::new(1.0 + beta * k * k, 0.0))
    }

    /// `(I - beta D_N^2)^{-1} f`; the symbol is at least 1, so this is safe.
    pub fn helmholtz_solve(
        &self,
        params: &ModelParameters,
        f: &[f64],
    ) -> Result<GridFunction, GridError> {
        let beta = params.beta();
        self.apply_multiplier(f, |_, k| Complex64::new(1.0 / (1.0 + beta * k * k), 0.0))
    }

    /// Pointwise product `a * b`, optionally de-aliased by 3/2-rule zero
    /// padding of both factors.
    pub fn product(&self, a: &[f64], b: &[f64], dealias: bool) -> Result<GridFunction, GridError> {
        self.check(a)?;
        self.check(b)?;
        if !dealias {
            return Ok(a.iter().zip(b).map(|(x, y)| x * y).collect());
        }
        let pa = self.pad(&self.forward_transform(a)?);
        let pb = self.pad(&self.forward_transform(b)?);
        let mut prod: Vec<Complex64> = pa
            .iter()
            .zip(&pb)
            .map(|(x, y)| Complex64::new(x.re * y.re, 0.0))
            .collect();
        self.padded_forward.process(&mut prod);
        self.inverse_real(&self.truncate(&prod))
    }

    /// Zero-pad an N-spectrum to M = 3N/2 and return physical samples on the
    /// fine grid (scaled so values match the coarse samples).
    fn pad(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let m = 3 * n / 2;
        let half = n / 2;
        let mut fine = vec![Complex64::new(0.0, 0.0); m];
        fine[..half].copy_from_slice(&spec[..half]);
        // Nyquist is split evenly between +N/2 and -N/2 on the fine grid.
        let nyq = spec[half] * 0.5;
        fine[half] = nyq;
        fine[m - half] = nyq;
        for i in half + 1..n {
            fine[m - (n - i)] = spec[i];
        }
        self.padded_inverse.process(&mut fine);
        let scale = 1.0 / n as f64;
        fine.iter_mut().for_each(|z| *z *= scale);
        fine
    }

    fn truncate(&self, fine_spec: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let m = 3 * n / 2;
        let half = n / 2;
        let scale = n as f64 / m as f64;
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..half {
            spec[i] = fine_spec[i] * scale;
        }
        spec[half] = (fine_spec[half] + fine_spec[m - half]) * scale;
        for i in half + 1..n {
            spec[i] = fine_spec[m - (n - i)] * scale;
        }
        spec
    }
}

fn mode_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
