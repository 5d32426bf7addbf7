//! Exact linear theory of the `(zeta, u)` system.
//!
//! In Fourier variables the linearized system is
//! `d/dt (zeta_hat, u_hat) + i k A(k) (zeta_hat, u_hat) = 0` with
//! `A(k) = [[0, omega(k)], [1 - gamma, 0]]` and
//! `omega(k) = 1 / ((delta + gamma)(1 + beta k^2))`. The propagator
//! `exp(-i k A(k) t)` is available in closed form, so evolution is exact per
//! mode and no time stepping is involved.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::grid::{GridError, GridFunction, SpectralGrid};
use crate::params::ModelParameters;

pub type Propagator = Matrix2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSymbols {
    params: ModelParameters,
}

/// Growth order `l` of `sigma(k) ~ |k|^l` and the Sobolev shifts
/// `m1 = max(0, -l)`, `m2 = max(0, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SigmaOrder {
    pub order: i32,
    pub m1: i32,
    pub m2: i32,
}

impl DispersionSymbols {
    pub fn new(params: ModelParameters) -> Self {
        DispersionSymbols { params }
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn omega(&self, k: f64) -> f64 {
        let p = &self.params;
        1.0 / (p.depth_sum() * (1.0 + p.beta() * k * k))
    }

    pub fn sigma(&self, k: f64) -> f64 {
        ((1.0 - self.params.gamma()) * self.omega(k)).sqrt()
    }

    /// Limit of `|k| sigma(k)` as `|k| -> infinity`.
    pub fn sigma_tail_constant(&self) -> f64 {
        let p = &self.params;
        ((1.0 - p.gamma()) / (p.depth_sum() * p.beta())).sqrt()
    }

    /// `exp(-i k A(k) t) = cos(k sigma t) I - i sin(k sigma t) A / sigma`.
    pub fn propagator(&self, k: f64, t: f64) -> Propagator {
        let one_minus_gamma = 1.0 - self.params.gamma();
        let omega = self.omega(k);
        let phase = k * self.sigma(k) * t;
        let (s, c) = phase.sin_cos();
        let a = (omega / one_minus_gamma).sqrt();
        Matrix2::new(
            Complex64::new(c, 0.0),
            Complex64::new(0.0, -a * s),
            Complex64::new(0.0, -s / a),
            Complex64::new(c, 0.0),
        )
    }

    /// Per-mode conserved quadratic form `(1 - gamma)|zeta|^2 + omega(k)|u|^2`.
    pub fn mode_energy(&self, k: f64, zeta_hat: Complex64, u_hat: Complex64) -> f64 {
        (1.0 - self.params.gamma()) * zeta_hat.norm_sqr() + self.omega(k) * u_hat.norm_sqr()
    }

    /// Evolve paired spectra by `t`. The Nyquist slot is zeroed: the
    /// propagator is odd in `k` off the diagonal and the slot stands for both
    /// `+-N/2`, so it cannot be evolved consistently.
    pub fn evolve_spectra(
        &self,
        grid: &SpectralGrid,
        zeta_hat: &[Complex64],
        u_hat: &[Complex64],
        t: f64,
    ) -> Result<(Vec<Complex64>, Vec<Complex64>), GridError> {
        for s in [zeta_hat, u_hat] {
            if s.len() != grid.len() {
                return Err(GridError::SizeMismatch {
                    expected: grid.len(),
                    got: s.len(),
                });
            }
        }
        let nyq = grid.nyquist_slot();
        let zero = Complex64::new(0.0, 0.0);
        let mut zeta_out = Vec::with_capacity(grid.len());
        let mut u_out = Vec::with_capacity(grid.len());
        for (i, &k) in grid.wavenumbers().iter().enumerate() {
            if i == nyq {
                zeta_out.push(zero);
                u_out.push(zero);
                continue;
            }
            let m = self.propagator(k, t);
            zeta_out.push(m[(0, 0)] * zeta_hat[i] + m[(0, 1)] * u_hat[i]);
            u_out.push(m[(1, 0)] * zeta_hat[i] + m[(1, 1)] * u_hat[i]);
        }
        Ok((zeta_out, u_out))
    }

    /// Exact solution of the linear system at time `t` from `(zeta0, u0)`.
    pub fn evolve_linear(
        &self,
        grid: &SpectralGrid,
        zeta0: &[f64],
        u0: &[f64],
        t: f64,
    ) -> Result<(GridFunction, GridFunction), GridError> {
        let zh = grid.forward_transform(zeta0)?;
        let uh = grid.forward_transform(u0)?;
        let (zt, ut) = self.evolve_spectra(grid, &zh, &uh, t)?;
        Ok((grid.inverse_real(&zt)?, grid.inverse_real(&ut)?))
    }

    /// `sigma(k) ~ |k|^{-1}` whenever `beta > 0`, which every admissible
    /// parameter set satisfies.
    pub fn sigma_order(&self) -> SigmaOrder {
        debug_assert!(self.params.beta() > 0.0);
        let order = -1;
        SigmaOrder {
            order,
            m1: 0.max(-order),
            m2: 0.max(order),
        }
    }
}
