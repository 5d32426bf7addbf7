//! Petviashvili iteration for the discrete traveling-wave system.
//!
//! On the collocation grid the unknown is the stacked `2N` vector
//! `x = (zeta_h, v_h)` and the system reads `L x = N(x)` with
//!
//! ```text
//! L = [[ c I,        -1/(delta+gamma) I ],      N(x) = K [ zeta_h . v_h     ]
//!      [ (gamma-1) I, c (I - beta D_N^2) ]]              [ v_h . v_h / 2   ]
//! ```
//!
//! `L` is diagonal in Fourier space (one 2x2 block per mode), so each step
//!
//! ```text
//! m = <L x, x> / <N(x), x>,     L x_next = m^2 N(x)
//! ```
//!
//! costs a handful of FFTs. `m` is 1 at a solution; the `m^2` factor removes
//! the unstable direction along `x` itself that plain fixed-point iteration
//! would follow to zero or infinity.

pub mod extrapolation;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, GridFunction, SpectralGrid};
use crate::oracle::{self, OracleError};
use crate::params::ModelParameters;

/// Per-mode determinants smaller than this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-14;

/// Converged profiles must decay to this fraction of their peak at `x = -l`.
pub const BOUNDARY_DECAY: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("no solitary wave: |speed| {speed} must exceed the critical speed {c_crit}")]
    NoSolitaryWave { speed: f64, c_crit: f64 },
    #[error("nonlinearity coefficient vanishes (delta^2 == gamma)")]
    DegenerateNonlinearity,
    #[error("mode {slot} has singular 2x2 system (det = {det:e})")]
    SingularMode { slot: usize, det: f64 },
    #[error("<N(x), x> = {value:e}: the iterate has collapsed")]
    DegenerateInnerProduct { value: f64 },
    #[error("not converged after {iterations} iterations (residual {residual:e}, update {update:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        update: f64,
    },
    #[error("profile has not decayed at the boundary (|zeta(-l)| / max|zeta| = {ratio:e}); enlarge the domain")]
    DomainTooSmall { ratio: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("initial guess: {0}")]
    InitialGuess(#[from] OracleError),
}

/// Discrete solitary-wave candidate `(zeta_h, v_h)` with `u_h = (I - beta D^2) v_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub zeta: GridFunction,
    pub v: GridFunction,
    pub u: GridFunction,
}

impl WaveState {
    /// Build a state from `(zeta, v)`, deriving `u`.
    pub fn new(
        grid: &SpectralGrid,
        params: &ModelParameters,
        zeta: GridFunction,
        v: GridFunction,
    ) -> Result<Self, GridError> {
        grid.check(&zeta)?;
        let u = grid.helmholtz_apply(params, &v)?;
        Ok(WaveState { zeta, v, u })
    }

    pub fn zeros(n: usize) -> Self {
        WaveState {
            zeta: GridFunction::zeros(n),
            v: GridFunction::zeros(n),
            u: GridFunction::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// `(zeta_h, v_h)` concatenated.
    pub fn stacked(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.len());
        x.extend_from_slice(&self.zeta);
        x.extend_from_slice(&self.v);
        x
    }

    pub fn from_stacked(
        grid: &SpectralGrid,
        params: &ModelParameters,
        x: &[f64],
    ) -> Result<Self, GridError> {
        let n = grid.len();
        if x.len() != 2 * n {
            return Err(GridError::SizeMismatch {
                expected: 2 * n,
                got: x.len(),
            });
        }
        Self::new(grid, params, x[..n].to_vec().into(), x[n..].to_vec().into())
    }

    /// `alpha * (zeta, v, u)`; `u` stays consistent because the map is linear.
    pub fn scaled(&self, alpha: f64) -> Self {
        WaveState {
            zeta: self.zeta.scaled(alpha),
            v: self.v.scaled(alpha),
            u: self.u.scaled(alpha),
        }
    }

    /// The speed map: the same profile traveling at `-c` has `(zeta, -v, -u)`.
    pub fn reflect_velocity(&self) -> Self {
        WaveState {
            zeta: self.zeta.clone(),
            v: self.v.scaled(-1.0),
            u: self.u.scaled(-1.0),
        }
    }

    /// `max_j |x_j - x_{N-j}| / max |x|` over `zeta` and `v`: zero for
    /// profiles even about `x = 0`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.len();
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for f in [&self.zeta, &self.v] {
            scale = scale.max(f.max_abs());
            for j in 1..n {
                diff = diff.max((f[j] - f[n - j]).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }
}

/// Acceleration applied on top of the plain iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Extrapolation {
    Off,
    /// Minimal polynomial extrapolation restarted every `cycle + 1` steps.
    Mpe { cycle: usize },
}

impl fmt::Display for Extrapolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extrapolation::Off => write!(f, "off"),
            Extrapolation::Mpe { cycle } => write!(f, "mpe:{cycle}"),
        }
    }
}

impl TryFrom<String> for Extrapolation {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Extrapolation> for String {
    fn from(e: Extrapolation) -> String {
        e.to_string()
    }
}

impl FromStr for Extrapolation {
    type Err = String;

    /// `off` or `mpe:K` with `K >= 2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("off") {
            return Ok(Extrapolation::Off);
        }
        let rest = s
            .strip_prefix("mpe:")
            .or_else(|| s.strip_prefix("MPE:"))
            .ok_or_else(|| format!("expected `off` or `mpe:K`, got `{s}`"))?;
        let cycle: usize = rest
            .parse()
            .map_err(|_| format!("invalid MPE cycle length `{rest}`"))?;
        if cycle < 2 {
            return Err(format!("MPE cycle length must be at least 2, got {cycle}"));
        }
        Ok(Extrapolation::Mpe { cycle })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialGuess {
    /// sech^2 seed scaled from the ODE turning point.
    #[default]
    Auto,
    Provided(WaveState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub speed: f64,
    pub tol_residual: f64,
    pub tol_update: f64,
    pub max_iter: usize,
    pub extrapolation: Extrapolation,
    pub initial_guess: InitialGuess,
    /// 3/2-rule zero padding of the quadratic products.
    pub dealias: bool,
    /// Escalate the boundary-decay warning to [`SolverError::DomainTooSmall`].
    pub strict: bool,
}

impl SolverConfig {
    pub fn new(speed: f64) -> Self {
        SolverConfig {
            speed,
            tol_residual: 1e-12,
            tol_update: 1e-10,
            max_iter: 300,
            extrapolation: Extrapolation::Mpe { cycle: 6 },
            initial_guess: InitialGuess::Auto,
            dealias: false,
            strict: false,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !self.speed.is_finite() {
            return Err(SolverError::InvalidConfig(format!("speed {}", self.speed)));
        }
        if !(self.tol_residual > 0.0 && self.tol_update > 0.0) {
            return Err(SolverError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be positive".into()));
        }
        if let Extrapolation::Mpe { cycle } = self.extrapolation {
            if cycle < 2 {
                return Err(SolverError::InvalidConfig(
                    "MPE cycle length must be at least 2".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Iteration history and post-checks of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// `||L x - N(x)||_inf` after each iteration.
    pub residual_history: Vec<f64>,
    /// Stabilizing factor used by each iteration.
    pub m_history: Vec<f64>,
    /// `||x_{nu+1} - x_nu||_inf` for each iteration.
    pub update_history: Vec<f64>,
    pub extrapolations: usize,
    pub final_residual: f64,
    /// Stabilizing factor evaluated at the returned state.
    pub final_m: f64,
    /// `|zeta(-l)| / max|zeta|`.
    pub boundary_ratio: f64,
    pub asymmetry: f64,
    pub warnings: Vec<String>,
    pub wall_time: f64,
}

/// The discrete operators `L` and `N` at fixed parameters and speed.
#[derive(Debug, Clone)]
pub struct TravelingWaveSystem<'g> {
    grid: &'g SpectralGrid,
    params: ModelParameters,
    speed: f64,
    dealias: bool,
    /// `c (1 + beta k'^2)` per slot.
    a22: Vec<f64>,
    det: Vec<f64>,
}

impl<'g> TravelingWaveSystem<'g> {
    pub fn new(
        grid: &'g SpectralGrid,
        params: ModelParameters,
        speed: f64,
    ) -> Result<Self, SolverError> {
        let beta = params.beta();
        let off = params.c_crit_sq();
        let mut a22 = Vec::with_capacity(grid.len());
        let mut det = Vec::with_capacity(grid.len());
        for (slot, &k) in grid.wavenumbers().iter().enumerate() {
            let d = speed * speed * (1.0 + beta * k * k) - off;
            if d.abs() < SINGULAR_DET {
                return Err(SolverError::SingularMode { slot, det: d });
            }
            a22.push(speed * (1.0 + beta * k * k));
            det.push(d);
        }
        Ok(TravelingWaveSystem {
            grid,
            params,
            speed,
            dealias: false,
            a22,
            det,
        })
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.grid
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// 2x2 block of `L` at FFT slot `i`.
    pub fn mode_matrix(&self, i: usize) -> [[f64; 2]; 2] {
        [
            [self.speed, -1.0 / self.params.depth_sum()],
            [self.params.gamma() - 1.0, self.a22[i]],
        ]
    }

    /// `c^2 (1 + beta k'^2) - c_crit^2` at slot `i`.
    pub fn determinant(&self, i: usize) -> f64 {
        self.det[i]
    }

    /// `L x` mode by mode, as `(row 1, row 2)` spectra.
    pub fn apply_linear_lhs(
        &self,
        state: &WaveState,
    ) -> Result<(Vec<Complex64>, Vec<Complex64>), GridError> {
        let zh = self.grid.forward_transform(&state.zeta)?;
        let vh = self.grid.forward_transform(&state.v)?;
        let a12 = -1.0 / self.params.depth_sum();
        let a21 = self.params.gamma() - 1.0;
        let r1 = zh.iter().zip(&vh).map(|(z, v)| z * self.speed + v * a12).collect();
        let r2 = zh
            .iter()
            .zip(&vh)
            .zip(&self.a22)
            .map(|((z, v), a)| z * a21 + v * *a)
            .collect();
        Ok((r1, r2))
    }

    /// `L x` in physical space using the stored `u`.
    pub fn linear_lhs(&self, state: &WaveState) -> (GridFunction, GridFunction) {
        let a12 = -1.0 / self.params.depth_sum();
        let a21 = self.params.gamma() - 1.0;
        let r1 = state
            .zeta
            .iter()
            .zip(state.v.iter())
            .map(|(z, v)| self.speed * z + a12 * v)
            .collect();
        let r2 = state
            .zeta
            .iter()
            .zip(state.u.iter())
            .map(|(z, u)| a21 * z + self.speed * u)
            .collect();
        (r1, r2)
    }

    /// `N(x) = K (zeta . v, v . v / 2)` in physical space.
    pub fn nonlinear_rhs(&self, state: &WaveState) -> Result<(GridFunction, GridFunction), GridError> {
        let k = self.params.k_coeff();
        let zv = self.grid.product(&state.zeta, &state.v, self.dealias)?;
        let vv = self.grid.product(&state.v, &state.v, self.dealias)?;
        Ok((zv.scaled(k), vv.scaled(0.5 * k)))
    }

    /// `||L x - N(x)||_inf`.
    pub fn residual(&self, state: &WaveState) -> Result<f64, GridError> {
        let (l1, l2) = self.linear_lhs(state);
        let (n1, n2) = self.nonlinear_rhs(state)?;
        Ok(l1.max_diff(&n1).max(l2.max_diff(&n2)))
    }

    /// `m = <L x, x> / <N(x), x>` with the Euclidean product on `R^{2N}`.
    pub fn stabilizing_factor(&self, state: &WaveState) -> Result<f64, SolverError> {
        let (l1, l2) = self.linear_lhs(state);
        let (n1, n2) = self.nonlinear_rhs(state)?;
        self.factor_from(state, &l1, &l2, &n1, &n2)
    }

    fn factor_from(
        &self,
        state: &WaveState,
        l1: &[f64],
        l2: &[f64],
        n1: &[f64],
        n2: &[f64],
    ) -> Result<f64, SolverError> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let num = dot(l1, &state.zeta) + dot(l2, &state.v);
        let den = dot(n1, &state.zeta) + dot(n2, &state.v);
        if !(den.abs() >= 1e-300) || !den.is_finite() {
            return Err(SolverError::DegenerateInnerProduct { value: den });
        }
        Ok(num / den)
    }

    /// One Petviashvili step: returns the next state and the factor `m` used.
    pub fn step(&self, state: &WaveState) -> Result<(WaveState, f64), SolverError> {
        let (l1, l2) = self.linear_lhs(state);
        let (n1, n2) = self.nonlinear_rhs(state)?;
        let m = self.factor_from(state, &l1, &l2, &n1, &n2)?;
        let scale = m * m;
        let r1 = self.grid.forward_transform(&n1)?;
        let r2 = self.grid.forward_transform(&n2)?;
        let a11 = self.speed;
        let a12 = -1.0 / self.params.depth_sum();
        let a21 = self.params.gamma() - 1.0;
        let beta = self.params.beta();
        let n = self.grid.len();
        let mut zh = Vec::with_capacity(n);
        let mut vh = Vec::with_capacity(n);
        let mut uh = Vec::with_capacity(n);
        for i in 0..n {
            let inv = scale / self.det[i];
            let z = (r1[i] * self.a22[i] - r2[i] * a12) * inv;
            let v = (r2[i] * a11 - r1[i] * a21) * inv;
            let k = self.grid.wavenumbers()[i];
            zh.push(z);
            vh.push(v);
            uh.push(v * (1.0 + beta * k * k));
        }
        let next = WaveState {
            zeta: self.grid.inverse_real(&zh)?,
            v: self.grid.inverse_real(&vh)?,
            u: self.grid.inverse_real(&uh)?,
        };
        Ok((next, m))
    }

    /// sech^2 seed: `zeta = sign(K) a0 sech^2(x / w0)`, `v = c (gamma+delta) zeta`,
    /// with `a0 = |zeta_s(v*)|` and `w0 = 2 / sqrt(-U''(0))`.
    pub fn auto_guess(&self) -> Result<WaveState, SolverError> {
        let curve = oracle::potential(self.params, self.speed)?;
        let vstar = curve.problem().speed_sign() * curve.turning_point();
        let a0 = curve.reconstruct_zeta(vstar)?.abs();
        let w0 = 2.0 / (-curve.curvature_at_origin()).sqrt();
        let sign = self.params.polarity();
        let zeta = self.grid.sample(|x| {
            let s = 1.0 / (x / w0).cosh();
            sign * a0 * s * s
        });
        let factor = self.speed * self.params.depth_sum();
        let v = zeta.scaled(factor);
        Ok(WaveState::new(self.grid, &self.params, zeta, v)?)
    }
}

/// Compute a solitary wave of speed `cfg.speed`.
///
/// Negative speeds are solved at `|c|` and mapped by
/// [`WaveState::reflect_velocity`].
pub fn solve(
    grid: &SpectralGrid,
    params: &ModelParameters,
    cfg: &SolverConfig,
) -> Result<(WaveState, SolveReport), SolverError> {
    cfg.validate()?;
    if params.k_coeff() == 0.0 {
        return Err(SolverError::DegenerateNonlinearity);
    }
    if !(cfg.speed * cfg.speed > params.c_crit_sq()) {
        return Err(SolverError::NoSolitaryWave {
            speed: cfg.speed,
            c_crit: params.c_crit(),
        });
    }
    if cfg.speed < 0.0 {
        let mut mirrored = cfg.clone();
        mirrored.speed = -cfg.speed;
        if let InitialGuess::Provided(s) = &cfg.initial_guess {
            mirrored.initial_guess = InitialGuess::Provided(s.reflect_velocity());
        }
        let (state, report) = solve(grid, params, &mirrored)?;
        return Ok((state.reflect_velocity(), report));
    }

    let start = Instant::now();
    let system = TravelingWaveSystem::new(grid, *params, cfg.speed)?.with_dealias(cfg.dealias);
    let mut state = match &cfg.initial_guess {
        InitialGuess::Auto => system.auto_guess()?,
        InitialGuess::Provided(s) => {
            grid.check(&s.zeta)?;
            WaveState::new(grid, params, s.zeta.clone(), s.v.clone())?
        }
    };

    let cycle = match cfg.extrapolation {
        Extrapolation::Off => None,
        Extrapolation::Mpe { cycle } => Some(extrapolation::history_len(cycle)),
    };
    let mut history: Vec<Vec<f64>> = vec![state.stacked()];
    let mut report = SolveReport::default();

    loop {
        if report.iterations >= cfg.max_iter {
            return Err(SolverError::NotConverged {
                iterations: report.iterations,
                residual: report.residual_history.last().copied().unwrap_or(f64::NAN),
                update: report.update_history.last().copied().unwrap_or(f64::NAN),
            });
        }
        let (next, m) = system.step(&state)?;
        let residual = system.residual(&next)?;
        let update = next.zeta.max_diff(&state.zeta).max(next.v.max_diff(&state.v));
        report.iterations += 1;
        report.residual_history.push(residual);
        report.m_history.push(m);
        report.update_history.push(update);
        state = next;
        if !residual.is_finite() {
            return Err(SolverError::NotConverged {
                iterations: report.iterations,
                residual,
                update,
            });
        }
        if residual <= cfg.tol_residual && update <= cfg.tol_update {
            report.converged = true;
            break;
        }
        if let Some(len) = cycle {
            history.push(state.stacked());
            if history.len() == len {
                let out = extrapolation::mpe(&history);
                if !out.fell_back {
                    state = WaveState::from_stacked(grid, params, &out.point)?;
                    report.extrapolations += 1;
                }
                history.clear();
                history.push(state.stacked());
            }
        }
    }

    report.final_residual = *report.residual_history.last().unwrap_or(&f64::NAN);
    report.final_m = system.stabilizing_factor(&state)?;
    let peak = state.zeta.max_abs();
    report.boundary_ratio = if peak > 0.0 { state.zeta[0].abs() / peak } else { 0.0 };
    report.asymmetry = state.asymmetry();
    if report.boundary_ratio > BOUNDARY_DECAY {
        if cfg.strict {
            return Err(SolverError::DomainTooSmall {
                ratio: report.boundary_ratio,
            });
        }
        report.warnings.push(format!(
            "profile not decayed at the boundary: |zeta(-l)|/max|zeta| = {:e}",
            report.boundary_ratio
        ));
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SpectralGrid, ModelParameters) {
        (
            SpectralGrid::new(64.0, 256).unwrap(),
            ModelParameters::new(0.5, 0.8).unwrap(),
        )
    }

    #[test]
    fn extrapolation_flag_parsing() {
        assert_eq!("off".parse::<Extrapolation>(), Ok(Extrapolation::Off));
        assert_eq!(
            "mpe:6".parse::<Extrapolation>(),
            Ok(Extrapolation::Mpe { cycle: 6 })
        );
        assert!("mpe:1".parse::<Extrapolation>().is_err());
        assert!("mpe:".parse::<Extrapolation>().is_err());
        assert!("rre:3".parse::<Extrapolation>().is_err());
        assert_eq!(Extrapolation::Mpe { cycle: 4 }.to_string(), "mpe:4");
    }

    #[test]
    fn mode_determinants() {
        let (g, p) = setup();
        let c = p.c_crit() + 0.05;
        let sys = TravelingWaveSystem::new(&g, p, c).unwrap();
        assert!((sys.determinant(0) - (c * c - p.c_crit_sq())).abs() < 1e-15);
        for i in 0..g.len() {
            let m = sys.mode_matrix(i);
            let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            assert!((d - sys.determinant(i)).abs() < 1e-12 * d.abs());
            assert!(sys.determinant(i) > 0.0);
        }
        // increasing in k'^2
        let mut slots: Vec<usize> = (0..g.len()).collect();
        slots.sort_by(|a, b| g.wavenumbers()[*a].abs().total_cmp(&g.wavenumbers()[*b].abs()));
        for w in slots.windows(2) {
            assert!(sys.determinant(w[1]) >= sys.determinant(w[0]));
        }
    }

    #[test]
    fn determinant_at_unit_wavenumber() {
        // l = pi, so slot 1 carries k' = 1.
        let g = SpectralGrid::new(std::f64::consts::PI, 16).unwrap();
        let p = ModelParameters::new(0.5, 0.8).unwrap();
        let sys = TravelingWaveSystem::new(&g, p, 0.6702).unwrap();
        let expected = 0.6702f64.powi(2) * (1.0 + p.beta()) - p.c_crit_sq();
        assert!(expected > 0.0);
        assert!((sys.determinant(1) - expected).abs() < 1e-15);
    }

    #[test]
    fn critical_speed_is_singular() {
        let (g, p) = setup();
        // c^2 = c_crit^2 exactly, computed the same way as the determinant.
        let c = p.c_crit_sq().sqrt();
        match TravelingWaveSystem::new(&g, p, c) {
            Err(SolverError::SingularMode { slot, .. }) => assert_eq!(slot, 0),
            other => panic!("expected SingularMode, got {other:?}"),
        }
    }

    #[test]
    fn nonlinear_rhs_simple_cases() {
        let (g, p) = setup();
        let sys = TravelingWaveSystem::new(&g, p, 1.0).unwrap();
        let zero = WaveState::zeros(g.len());
        let (a, b) = sys.nonlinear_rhs(&zero).unwrap();
        assert_eq!(a.max_abs() + b.max_abs(), 0.0);

        let ones = WaveState::new(&g, &p, vec![1.0; 256].into(), vec![1.0; 256].into()).unwrap();
        let (a, b) = sys.nonlinear_rhs(&ones).unwrap();
        assert!(a.iter().all(|x| (x - p.k_coeff()).abs() < 1e-16));
        assert!(b.iter().all(|x| (x - p.k_coeff() / 2.0).abs() < 1e-16));

        let degenerate = ModelParameters::new(0.25, 0.5).unwrap();
        let sys = TravelingWaveSystem::new(&g, degenerate, 2.0).unwrap();
        let (a, b) = sys.nonlinear_rhs(&ones).unwrap();
        assert_eq!(a.max_abs() + b.max_abs(), 0.0);
    }

    #[test]
    fn zero_state_has_degenerate_factor() {
        let (g, p) = setup();
        let sys = TravelingWaveSystem::new(&g, p, 1.0).unwrap();
        assert!(matches!(
            sys.step(&WaveState::zeros(g.len())),
            Err(SolverError::DegenerateInnerProduct { .. })
        ));
    }

    #[test]
    fn precondition_errors() {
        let (g, p) = setup();
        let cfg = SolverConfig::new(0.9 * p.c_crit());
        assert!(matches!(solve(&g, &p, &cfg), Err(SolverError::NoSolitaryWave { .. })));
        let degenerate = ModelParameters::new(0.25, 0.5).unwrap();
        assert_eq!(
            solve(&g, &degenerate, &SolverConfig::new(2.0)).unwrap_err(),
            SolverError::DegenerateNonlinearity
        );
        let mut bad = SolverConfig::new(1.0);
        bad.tol_residual = 0.0;
        assert!(matches!(solve(&g, &p, &bad), Err(SolverError::InvalidConfig(_))));
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let (g, p) = setup();
        let mut cfg = SolverConfig::new(p.c_crit() + 0.05);
        cfg.max_iter = 3;
        cfg.extrapolation = Extrapolation::Off;
        assert!(matches!(
            solve(&g, &p, &cfg),
            Err(SolverError::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn small_domain_warns_or_fails_in_strict_mode() {
        let p = ModelParameters::new(0.5, 0.8).unwrap();
        let g = SpectralGrid::new(12.0, 128).unwrap();
        let cfg = SolverConfig::new(p.c_crit() + 0.02);
        let (_, report) = solve(&g, &p, &cfg).unwrap();
        assert!(!report.warnings.is_empty());
        let mut strict = cfg.clone();
        strict.strict = true;
        assert!(matches!(
            solve(&g, &p, &strict),
            Err(SolverError::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn converged_state_is_fixed_point() {
        let (g, p) = setup();
        let cfg = SolverConfig::new(p.c_crit() + 0.1);
        let (state, report) = solve(&g, &p, &cfg).unwrap();
        assert!(report.converged);
        assert_eq!(report.residual_history.len(), report.iterations);
        let sys = TravelingWaveSystem::new(&g, p, cfg.speed).unwrap();
        let (next, m) = sys.step(&state).unwrap();
        assert!((m - 1.0).abs() < 1e-10);
        assert!(next.zeta.max_diff(&state.zeta) < 1e-10);
        assert!(next.v.max_diff(&state.v) < 1e-10);
    }

    #[test]
    fn factor_scales_inversely_with_state() {
        let (g, p) = setup();
        let sys = TravelingWaveSystem::new(&g, p, p.c_crit() + 0.05).unwrap();
        let x = sys.auto_guess().unwrap();
        let m = sys.stabilizing_factor(&x).unwrap();
        for alpha in [0.5, 2.0, -3.0, 1e-3] {
            let ma = sys.stabilizing_factor(&x.scaled(alpha)).unwrap();
            assert!(((ma - m / alpha) / (m / alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_speed_uses_velocity_map() {
        let (g, p) = setup();
        let c = p.c_crit() + 0.1;
        let (pos, _) = solve(&g, &p, &SolverConfig::new(c)).unwrap();
        let (neg, _) = solve(&g, &p, &SolverConfig::new(-c)).unwrap();
        assert_eq!(pos.zeta, neg.zeta);
        assert_eq!(pos.v, neg.v.scaled(-1.0));
    }

    #[test]
    fn dealiased_products_give_same_wave_when_resolved() {
        let (_, p) = setup();
        let g = SpectralGrid::new(64.0, 1024).unwrap();
        let mut cfg = SolverConfig::new(p.c_crit() + 0.1);
        let (plain, _) = solve(&g, &p, &cfg).unwrap();
        cfg.dealias = true;
        let (padded, report) = solve(&g, &p, &cfg).unwrap();
        assert!(report.converged);
        let d = plain.zeta.max_diff(&padded.zeta);
        assert!(d < 1e-10, "{d:e} {}", plain.zeta.max_abs());
    }
}
