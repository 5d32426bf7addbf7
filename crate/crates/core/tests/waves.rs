//! Spectral solutions checked against the ODE oracle away from the
//! reference configuration.

use isw::analysis;
use isw::grid::SpectralGrid;
use isw::oracle;
use isw::params::ModelParameters;
use isw::solver::{self, Extrapolation, InitialGuess, SolverConfig};

fn oracle_gap(grid: &SpectralGrid, params: ModelParameters, speed: f64) -> f64 {
    let (state, report) = solver::solve(grid, &params, &SolverConfig::new(speed)).unwrap();
    assert!(report.converged);
    let curve = oracle::potential(params, speed).unwrap();
    let profile = curve.integrate_profile(grid.half_length(), 0.005).unwrap();
    grid.nodes()
        .iter()
        .zip(state.v.iter())
        .map(|(&x, v)| (profile.value_at(x) - v).abs())
        .fold(0.0, f64::max)
}

#[test]
fn depression_wave_matches_oracle() {
    let p = ModelParameters::new(0.5, 0.5).unwrap();
    let g = SpectralGrid::new(128.0, 1024).unwrap();
    assert!(oracle_gap(&g, p, p.c_crit() + 0.05) < 1e-6);
}

#[test]
fn negative_speed_matches_oracle() {
    let p = ModelParameters::new(0.3, 1.1).unwrap();
    let g = SpectralGrid::new(100.0, 1024).unwrap();
    let c = p.c_crit() + 0.08;
    let (pos, neg) = (oracle_gap(&g, p, c), oracle_gap(&g, p, -c));
    assert!(pos < 1e-6 && neg < 1e-6, "{pos:e} {neg:e}");
}

#[test]
fn amplitude_tracks_turning_point_across_parameters() {
    let g = SpectralGrid::new(100.0, 1024).unwrap();
    for (gamma, delta, offset) in [(0.2, 0.9, 0.04), (0.8, 1.5, 0.06), (0.5, 0.6, 0.1), (0.9, 0.5, 0.05)] {
        let p = ModelParameters::new(gamma, delta).unwrap();
        let c = p.c_crit() + offset;
        let (state, _) = solver::solve(&g, &p, &SolverConfig::new(c)).unwrap();
        let vstar = oracle::potential(p, c).unwrap().turning_point();
        let amp = analysis::amplitude(&state).v;
        assert!((amp - vstar).abs() < 1e-8 * vstar.abs(), "({gamma}, {delta}): {amp} vs {vstar}");
    }
}

#[test]
fn extrapolation_settings_agree() {
    let p = ModelParameters::new(0.5, 0.8).unwrap();
    let g = SpectralGrid::new(128.0, 1024).unwrap();
    let c = p.c_crit() + 0.08;
    let mut cfg = SolverConfig::new(c);
    let mut states = Vec::new();
    for e in [Extrapolation::Off, Extrapolation::Mpe { cycle: 3 }, Extrapolation::Mpe { cycle: 6 }, Extrapolation::Mpe { cycle: 10 }] {
        cfg.extrapolation = e;
        let (s, r) = solver::solve(&g, &p, &cfg).unwrap();
        assert!(r.converged, "{e}");
        states.push(s);
    }
    for s in &states[1..] {
        assert!(s.zeta.max_diff(&states[0].zeta) < 1e-10);
    }
}

#[test]
fn provided_guess_converges_to_same_wave() {
    let p = ModelParameters::new(0.5, 0.8).unwrap();
    let g = SpectralGrid::new(64.0, 512).unwrap();
    let c = p.c_crit() + 0.1;
    let (reference, _) = solver::solve(&g, &p, &SolverConfig::new(c)).unwrap();
    let mut cfg = SolverConfig::new(c);
    // a wider, taller Gaussian
    let zeta = g.sample(|x| 2.0 * (-x * x / 40.0).exp());
    let v = zeta.scaled(c * p.depth_sum());
    cfg.initial_guess = InitialGuess::Provided(solver::WaveState::new(&g, &p, zeta, v).unwrap());
    let (state, report) = solver::solve(&g, &p, &cfg).unwrap();
    assert!(report.converged);
    assert!(state.zeta.max_diff(&reference.zeta) < 1e-9);
}

#[test]
fn amplitude_falls_with_k_on_elevation_branch() {
    // At a fixed offset above the critical speed the computed amplitude
    // decreases as K grows, on each sign branch, and agrees with the
    // oracle's turning point at every point.
    let g = SpectralGrid::new(128.0, 1024).unwrap();
    let deltas = [0.8, 0.9, 1.0, 1.2];
    let pts = analysis::amplitude_vs_k_study(&g, 0.5, &deltas, 0.05, &SolverConfig::new(1.0));
    assert_eq!(pts.len(), deltas.len());
    assert!(pts.windows(2).all(|w| w[0].k_coeff < w[1].k_coeff));
    let amps: Vec<f64> = pts.iter().map(|p| p.zeta_max.unwrap()).collect();
    assert!(amps.iter().all(|a| *a > 0.0));
    assert!(amps.windows(2).all(|w| w[1] < w[0]), "{amps:?}");
    for pt in &pts {
        let p = ModelParameters::new(0.5, pt.delta).unwrap();
        let curve = oracle::potential(p, pt.speed).unwrap();
        let zs = curve.reconstruct_zeta(curve.turning_point()).unwrap();
        assert!((zs - pt.zeta_max.unwrap()).abs() < 1e-8 * zs);
    }
}

#[test]
fn spectral_accuracy_improves_with_resolution() {
    let p = ModelParameters::new(0.5, 0.8).unwrap();
    let c = p.c_crit() + 0.1;
    let vstar = oracle::potential(p, c).unwrap().turning_point();
    let err = |n: usize| {
        let g = SpectralGrid::new(64.0, n).unwrap();
        let (s, _) = solver::solve(&g, &p, &SolverConfig::new(c)).unwrap();
        (analysis::amplitude(&s).v - vstar).abs()
    };
    let coarse = err(128);
    let fine = err(256);
    assert!(fine < 1e-2 * coarse, "{coarse:e} -> {fine:e}");
}
