//! Least-squares curve fits with goodness-of-fit statistics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Default search interval for the exponent of the power law.
pub const POWER_BRACKET: (f64, f64) = (0.5, 6.0);

/// Golden-section termination width for the exponent.
pub const POWER_TOL: f64 = 1e-10;

const SCAN_POINTS: usize = 56;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `y = A t^B + C`
    PowerPlusConstant,
    /// `y = a t^b e^{c t}`
    PowerTimesExponential,
}

impl FitModel {
    pub fn names(self) -> [&'static str; 3] {
        match self {
            FitModel::PowerPlusConstant => ["A", "B", "C"],
            FitModel::PowerTimesExponential => ["a", "b", "c"],
        }
    }

    pub fn eval(self, coefficients: [f64; 3], t: f64) -> f64 {
        let [p, q, r] = coefficients;
        match self {
            FitModel::PowerPlusConstant => p * t.powf(q) + r,
            FitModel::PowerTimesExponential => p * t.powf(q) * (r * t).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    /// `(A, B, C)` or `(a, b, c)`, in the order of [`FitModel::names`].
    pub coefficients: [f64; 3],
    pub sse: f64,
    pub r_squared: f64,
    pub rmse: f64,
    /// Range of the independent variable actually used.
    pub window: (f64, f64),
    pub n_points: usize,
}

impl FitResult {
    fn from_residuals(
        model: FitModel,
        coefficients: [f64; 3],
        samples: &[(f64, f64)],
    ) -> FitResult {
        let n = samples.len();
        let mean = samples.iter().map(|s| s.1).sum::<f64>() / n as f64;
        let sse: f64 = samples
            .iter()
            .map(|&(t, y)| (y - model.eval(coefficients, t)).powi(2))
            .sum();
        let sst: f64 = samples.iter().map(|&(_, y)| (y - mean).powi(2)).sum();
        let r_squared = if sst > 0.0 {
            1.0 - sse / sst
        } else if sse <= 1e-28 * samples.iter().map(|s| s.1 * s.1).sum::<f64>() {
            1.0
        } else {
            0.0
        };
        let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        FitResult {
            model,
            coefficients,
            sse,
            r_squared,
            rmse: (sse / n as f64).sqrt(),
            window: (lo, hi),
            n_points: n,
        }
    }

    /// Coefficient by name (`"A"`, `"b"`, ...).
    pub fn get(&self, name: &str) -> Option<f64> {
        self.model
            .names()
            .iter()
            .position(|n| *n == name)
            .map(|i| self.coefficients[i])
    }
}

/// Best `(A, C)` for fixed exponent and the resulting SSE.
fn linear_part(samples: &[(f64, f64)], b: f64) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let basis: Vec<f64> = samples.iter().map(|s| s.0.powf(b)).collect();
    let mx = basis.iter().sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, s) in basis.iter().zip(samples) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (s.1 - my);
    }
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c = my - a * mx;
    let sse = basis
        .iter()
        .zip(samples)
        .map(|(x, s)| (s.1 - a * x - c).powi(2))
        .sum();
    (a, c, sse)
}

/// Fit `y = A t^B + C` over the default exponent bracket.
pub fn fit_speed_amplitude(samples: &[(f64, f64)]) -> Result<FitResult, AnalysisError> {
    fit_power_law(samples, POWER_BRACKET)
}

/// Fit `y = A t^B + C`: linear least squares in `(A, C)` nested inside a
/// golden-section search over `B` in `bracket`.
pub fn fit_power_law(
    samples: &[(f64, f64)],
    bracket: (f64, f64),
) -> Result<FitResult, AnalysisError> {
    if samples.len() < 4 {
        return Err(AnalysisError::InsufficientData {
            needed: 4,
            got: samples.len(),
        });
    }
    if let Some(s) = samples
        .iter()
        .find(|s| !(s.0 > 0.0 && s.0.is_finite() && s.1.is_finite()))
    {
        return Err(AnalysisError::InvalidSample { t: s.0, y: s.1 });
    }
    let (lo, hi) = bracket;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(AnalysisError::NoBracket { lo, hi });
    }
    let sse = |b: f64| linear_part(samples, b).2;

    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let scan: Vec<f64> = (0..SCAN_POINTS).map(|i| sse(lo + step * i as f64)).collect();
    let best = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if best == 0 || best == SCAN_POINTS - 1 {
        return Err(AnalysisError::NoBracket { lo, hi });
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = lo + step * (best - 1) as f64;
    let mut d = lo + step * (best + 1) as f64;
    let mut b = d - inv_phi * (d - a);
    let mut c = a + inv_phi * (d - a);
    let mut fb = sse(b);
    let mut fc = sse(c);
    while d - a > POWER_TOL {
        if fb <= fc {
            d = c;
            c = b;
            fc = fb;
            b = d - inv_phi * (d - a);
            fb = sse(b);
        } else {
            a = b;
            b = c;
            fb = fc;
            c = a + inv_phi * (d - a);
            fc = sse(c);
        }
    }
    let exponent = if fb <= fc { b } else { c };
    let (amp, offset, _) = linear_part(samples, exponent);
    Ok(FitResult::from_residuals(
        FitModel::PowerPlusConstant,
        [amp, exponent, offset],
        samples,
    ))
}

/// Fit `|y| = a t^b e^{c t}` over samples with `t` in `window`, via the
/// linear model `ln|y| = ln a + b ln t + c t`.
///
/// All samples in the window must share one sign; `a` carries that sign
/// in the result so the fitted curve overlays the data. Statistics are
/// computed in the original scale.
pub fn fit_log_linear(
    samples: &[(f64, f64)],
    window: (f64, f64),
) -> Result<FitResult, AnalysisError> {
    let inside: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|s| s.0 >= window.0 && s.0 <= window.1)
        .collect();
    if inside.len() < 3 {
        return Err(AnalysisError::InsufficientData {
            needed: 3,
            got: inside.len(),
        });
    }
    if let Some(s) = inside
        .iter()
        .find(|s| !(s.0 > 0.0 && s.0.is_finite() && s.1.is_finite()))
    {
        return Err(AnalysisError::InvalidSample { t: s.0, y: s.1 });
    }
    let sign = inside[0].1.signum();
    if let Some(s) = inside.iter().find(|s| s.1 == 0.0 || s.1.signum() != sign) {
        return Err(AnalysisError::SignChange { at: s.0 });
    }

    let n = inside.len();
    let design = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => 1.0,
        1 => inside[r].0.ln(),
        _ => inside[r].0,
    });
    let rhs = DVector::from_iterator(n, inside.iter().map(|s| s.1.abs().ln()));
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let coef = svd
        .solve(&rhs, 1e-14 * smax)
        .map_err(|_| AnalysisError::InsufficientData { needed: 3, got: n })?;
    let coefficients = [sign * coef[0].exp(), coef[1], coef[2]];
    Ok(FitResult::from_residuals(
        FitModel::PowerTimesExponential,
        coefficients,
        &inside,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn power_law_recovers_generator() {
        let truth = [18.0, 2.75, -4.626];
        let samples: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let c = 0.72 + 0.03 * i as f64;
                (c, FitModel::PowerPlusConstant.eval(truth, c))
            })
            .collect();
        let fit = fit_speed_amplitude(&samples).unwrap();
        for (got, want) in fit.coefficients.iter().zip(truth) {
            assert!(rel(*got, want) < 1e-6, "{:?}", fit.coefficients);
        }
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert_eq!(fit.get("B"), Some(fit.coefficients[1]));
        assert_eq!(fit.window, (0.72, 0.72 + 0.27));
    }

    #[test]
    fn linear_data_gives_unit_exponent() {
        let samples: Vec<(f64, f64)> = (1..8).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        let fit = fit_speed_amplitude(&samples).unwrap();
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-8);
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn power_law_errors() {
        let few = [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        assert!(matches!(
            fit_speed_amplitude(&few),
            Err(AnalysisError::InsufficientData { needed: 4, got: 3 })
        ));
        // exponent 8 lies outside the bracket: SSE decreases toward the edge
        let steep: Vec<(f64, f64)> = (1..8).map(|i| (i as f64, (i as f64).powi(8))).collect();
        assert!(matches!(
            fit_speed_amplitude(&steep),
            Err(AnalysisError::NoBracket { .. })
        ));
        let neg = [(-1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)];
        assert!(matches!(
            fit_speed_amplitude(&neg),
            Err(AnalysisError::InvalidSample { .. })
        ));
    }

    #[test]
    fn log_linear_recovers_generators() {
        for truth in [[2.8176, 0.0114, -0.5323], [1261.4, -0.1728, -0.1023], [1.0, 0.0, -1.0]] {
            let samples: Vec<(f64, f64)> = (0..200)
                .map(|i| {
                    let t = 0.5 + 0.25 * i as f64;
                    (t, FitModel::PowerTimesExponential.eval(truth, t))
                })
                .collect();
            let fit = fit_log_linear(&samples, (1.0, 40.0)).unwrap();
            assert!(rel(fit.coefficients[0], truth[0]) < 1e-10);
            for i in 1..3 {
                assert!((fit.coefficients[i] - truth[i]).abs() < 1e-10, "{:?}", fit.coefficients);
            }
            assert_eq!(fit.window, (1.0, 40.0));
            assert!(fit.sse < 1e-20);
        }
    }

    #[test]
    fn log_linear_flat_and_negative_data() {
        let flat: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, 0.25)).collect();
        let fit = fit_log_linear(&flat, (0.0, 100.0)).unwrap();
        assert!(fit.coefficients[1].abs() < 1e-12 && fit.coefficients[2].abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);

        let neg: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, -(-(i as f64)).exp())).collect();
        let fit = fit_log_linear(&neg, (0.0, 100.0)).unwrap();
        assert!((fit.coefficients[0] + 1.0).abs() < 1e-12);
        assert!((fit.coefficients[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_linear_errors() {
        let mixed: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, (i as f64).sin())).collect();
        assert!(matches!(
            fit_log_linear(&mixed, (0.5, 30.0)),
            Err(AnalysisError::SignChange { .. })
        ));
        let pos: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(
            fit_log_linear(&pos, (100.0, 200.0)),
            Err(AnalysisError::InsufficientData { .. })
        ));
    }

    proptest! {
        #[test]
        fn log_linear_is_exact_on_model_family(
            a in 0.01f64..1e3, b in -2.0f64..2.0, c in -1.0f64..0.5,
        ) {
            let truth = [a, b, c];
            let samples: Vec<(f64, f64)> = (1..60)
                .map(|i| {
                    let t = 0.3 * i as f64;
                    (t, FitModel::PowerTimesExponential.eval(truth, t))
                })
                .collect();
            let fit = fit_log_linear(&samples, (0.0, 100.0)).unwrap();
            prop_assert!(rel(fit.coefficients[0], a) < 1e-9);
            prop_assert!((fit.coefficients[1] - b).abs() < 1e-9);
            prop_assert!((fit.coefficients[2] - c).abs() < 1e-9);
            prop_assert!(fit.r_squared <= 1.0 && fit.sse >= 0.0);
            prop_assert!((fit.rmse - (fit.sse / fit.n_points as f64).sqrt()).abs() == 0.0);
        }
    }
}
