use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use isw::analysis::{self, AnalysisError, FitResult};
use isw::dispersion::DispersionSymbols;
use isw::grid::SpectralGrid;
use isw::io::{self, CsvTable, IoError, RunConfig};
use isw::oracle::{self, OracleError};
use isw::params::ModelParameters;
use isw::solver::{self, Extrapolation, SolveReport, SolverConfig, SolverError, WaveState};

const THREADS_VAR: &str = "ISW_THREADS";

#[derive(Parser, Debug)]
#[command(name = "isw", version, about = "Solitary internal waves: spectral solver, ODE oracle and analysis")]
struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Record wall-clock timings in output headers.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct ModelArgs {
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Wave speed (default: critical speed + 0.05).
    #[arg(long, allow_hyphen_values = true)]
    cs: Option<f64>,
    #[arg(long)]
    half_length: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    /// Residual tolerance (max norm).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    tol_update: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// `off` or `mpe:K`.
    #[arg(long)]
    extrapolation: Option<Extrapolation>,
    /// Zero-pad quadratic products (3/2 rule).
    #[arg(long)]
    dealias: bool,
    /// Fail instead of warning when the profile has not decayed at the boundary.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute one solitary wave; writes (x, zeta, v, u).
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// Output file (.csv or .json); standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Amplitudes over a range of speeds plus the power-law fit.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// Smallest speed offset above the critical speed.
        #[arg(long)]
        from: Option<f64>,
        /// Largest speed offset above the critical speed.
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the traveling-wave ODE; writes (x, v, dv, zeta, u) for x >= 0.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        /// Integration range (default: the grid half-length).
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linear dispersion relation; writes (k, omega, sigma).
    Dispersion {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        k_min: f64,
        #[arg(long, default_value_t = 50.0, allow_hyphen_values = true)]
        k_max: f64,
        #[arg(long, default_value_t = 501)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Post-process a profile written by `solve`.
    Analyze {
        #[arg(value_enum)]
        kind: AnalyzeKind,
        #[arg(long = "in")]
        input: PathBuf,
        /// Fit window `lo,hi` (x for decay, k' for spectrum).
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the data behind a figure or table.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
        /// Output directory (default: `output.dir` from the config, else `reproduce`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AnalyzeKind {
    Decay,
    Spectrum,
    Phase,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Target {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig3c,
    Fig4,
    Fig5,
    Fig6,
    Table1,
    All,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("invalid number `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("invalid number `{b}`"))?;
    if !(lo < hi) {
        return Err("window must satisfy lo < hi".into());
    }
    Ok((lo, hi))
}

/// Error with its exit status: 1 for invalid input, 2 for numerical failure.
#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn invalid(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind,
            message: message.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let kind = match e {
            IoError::File { .. } => "io",
            IoError::Parse { .. } | IoError::MissingColumn(_) | IoError::NotAGrid(_) => "input",
            IoError::Config(_) => "config",
            IoError::Params(_) => "domain",
            IoError::Grid(_) => "grid",
        };
        Failure::invalid(kind, e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let (code, kind) = match e {
            SolverError::NotConverged { .. } => (2, "not_converged"),
            SolverError::DegenerateInnerProduct { .. } => (2, "degenerate_iterate"),
            SolverError::DomainTooSmall { .. } => (2, "domain_too_small"),
            SolverError::NoSolitaryWave { .. } => (1, "no_solitary_wave"),
            SolverError::DegenerateNonlinearity => (1, "degenerate_nonlinearity"),
            SolverError::SingularMode { .. } => (1, "singular_mode"),
            SolverError::InvalidConfig(_) => (1, "config"),
            SolverError::Grid(_) => (1, "grid"),
            SolverError::InitialGuess(_) => (1, "initial_guess"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let kind = match e {
            OracleError::NoSolitaryWave { .. } => "no_solitary_wave",
            OracleError::DegenerateNonlinearity => "degenerate_nonlinearity",
            _ => "oracle",
        };
        Failure::invalid(kind, e.to_string())
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::invalid("analysis", e.to_string())
    }
}

struct Context {
    config: RunConfig,
    timings: bool,
}

impl Context {
    fn new(cli_config: Option<&Path>, model: &ModelArgs, timings: bool) -> Result<Self, Failure> {
        let mut config = match cli_config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        apply_overrides(&mut config, model);
        config.output.timings |= timings;
        config.validate()?;
        let timings = config.output.timings;
        Ok(Context { config, timings })
    }

    fn params(&self) -> ModelParameters {
        self.config.model().expect("validated")
    }

    fn grid(&self) -> SpectralGrid {
        self.config.spectral_grid().expect("validated")
    }

    fn solver(&self) -> SolverConfig {
        self.config.solver_config().expect("validated")
    }

    /// `--out` if given, else `output.path` from the config.
    fn out(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| self.config.output.path.as_ref().map(PathBuf::from))
    }

    fn header(&self, command: &str, extra: Value) -> Value {
        let mut h = json!({
            "tool": "isw",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": self.config,
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut h, extra) {
            m.extend(e);
        }
        h
    }

    fn report_json(&self, report: &SolveReport) -> Value {
        let mut v = serde_json::to_value(report).expect("report serializes");
        if !self.timings {
            if let Value::Object(m) = &mut v {
                m.remove("wall_time");
            }
        }
        v
    }
}

fn apply_overrides(c: &mut RunConfig, m: &ModelArgs) {
    if let Some(g) = m.gamma {
        c.params.gamma = g;
    }
    if let Some(d) = m.delta {
        c.params.delta = d;
    }
    if let Some(cs) = m.cs {
        c.solver.cs = Some(cs);
    }
    if let Some(l) = m.half_length {
        c.grid.half_length = l;
    }
    if let Some(n) = m.modes {
        c.grid.modes = n;
    }
    if let Some(t) = m.tol {
        c.solver.tol_residual = t;
    }
    if let Some(t) = m.tol_update {
        c.solver.tol_update = t;
    }
    if let Some(n) = m.max_iter {
        c.solver.max_iter = n;
    }
    if let Some(e) = m.extrapolation {
        c.solver.extrapolation = e;
    }
    c.solver.dealias |= m.dealias;
    c.solver.strict |= m.strict;
}

fn write_table(table: &CsvTable, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => Ok(table.write(p)?),
        None => {
            print!("{}", table.to_csv_string());
            Ok(())
        }
    }
}

fn write_json(value: &Value, path: &Path) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("json serializes") + "\n";
    std::fs::write(path, text).map_err(|e| {
        Failure::from(IoError::File {
            path: path.display().to_string(),
            source: e,
        })
    })
}

/// `dir/name`, creating `dir` if needed.
fn in_dir(dir: &Path, name: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Failure::from(IoError::File {
            path: dir.display().to_string(),
            source: e,
        })
    })?;
    Ok(dir.join(name))
}

/// Sidecar path for a fit: `out.csv` -> `out.fit.json`.
fn fit_path(out: &Path) -> PathBuf {
    out.with_extension("fit.json")
}

fn solve_logged(
    grid: &SpectralGrid,
    params: &ModelParameters,
    cfg: &SolverConfig,
) -> Result<(WaveState, SolveReport), Failure> {
    let t0 = Instant::now();
    let (state, report) = solver::solve(grid, params, cfg)?;
    eprintln!(
        "solve: c = {:.6}, {} iterations, residual {:.3e}, {:.3}s",
        cfg.speed,
        report.iterations,
        report.final_residual,
        t0.elapsed().as_secs_f64()
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok((state, report))
}

fn cmd_solve(ctx: &Context, out: Option<&Path>) -> Result<(), Failure> {
    let (grid, params, cfg) = (ctx.grid(), ctx.params(), ctx.solver());
    let (state, report) = solve_logged(&grid, &params, &cfg)?;
    let header = ctx.header(
        "solve",
        json!({
            "speed": cfg.speed,
            "report": ctx.report_json(&report),
            "amplitudes": analysis::amplitude(&state),
        }),
    );
    match out {
        Some(p) if p.extension().is_some_and(|e| e == "json") => {
            let mut doc = header;
            doc["x"] = json!(grid.nodes());
            doc["zeta"] = json!(state.zeta);
            doc["v"] = json!(state.v);
            doc["u"] = json!(state.u);
            write_json(&doc, p)
        }
        _ => write_table(&io::profile_table(&grid, &state, header), out),
    }
}

fn sweep_table(
    ctx: &Context,
    command: &str,
    speeds: &[f64],
) -> Result<(CsvTable, FitResult), Failure> {
    let (grid, params, cfg) = (ctx.grid(), ctx.params(), ctx.solver());
    let t0 = Instant::now();
    let mut points = Vec::with_capacity(speeds.len());
    for run in analysis::speed_sweep(&grid, &params, speeds, &cfg) {
        points.push(run?.0);
    }
    eprintln!("sweep: {} speeds in {:.3}s", points.len(), t0.elapsed().as_secs_f64());
    let samples: Vec<(f64, f64)> = points.iter().map(|p| (p.speed, p.amplitudes.zeta)).collect();
    let fit = analysis::fit_speed_amplitude(&samples)?;
    let header = ctx.header(
        command,
        json!({
            "fit": fit,
            "iterations": points.iter().map(|p| p.iterations).collect::<Vec<_>>(),
        }),
    );
    let cols = |f: fn(&analysis::SweepPoint) -> f64| points.iter().map(f).collect::<Vec<f64>>();
    let table = CsvTable::from_columns(
        header,
        &[
            ("cs", &cols(|p| p.speed)),
            ("zeta_max", &cols(|p| p.amplitudes.zeta)),
            ("v_max", &cols(|p| p.amplitudes.v)),
            ("u_max", &cols(|p| p.amplitudes.u)),
        ],
    );
    Ok((table, fit))
}

fn sweep_speeds(ctx: &Context, from: Option<f64>, to: Option<f64>, count: Option<usize>) -> Result<Vec<f64>, Failure> {
    let a = &ctx.config.analysis;
    let lo = from.unwrap_or(a.speed_offsets.0);
    let hi = to.unwrap_or(a.speed_offsets.1);
    let n = count.unwrap_or(a.speed_count);
    if !(lo > 0.0 && hi >= lo) || n < 4 {
        return Err(Failure::invalid(
            "config",
            format!("sweep needs 0 < from <= to and count >= 4 (got {lo}, {hi}, {n})"),
        ));
    }
    Ok(analysis::speed_grid(&ctx.params(), (lo, hi), n))
}

fn cmd_oracle(ctx: &Context, x_max: Option<f64>, step: f64, out: Option<&Path>) -> Result<(), Failure> {
    let params = ctx.params();
    let speed = ctx.config.speed()?;
    let curve = oracle::potential(params, speed)?;
    let x_max = x_max.unwrap_or(ctx.config.grid.half_length);
    let profile = curve.integrate_profile(x_max, step)?;
    let s = curve.problem().speed_sign();
    let n = profile.len();
    let x: Vec<f64> = (0..n).map(|i| profile.x(i)).collect();
    let v = profile.v().to_vec();
    let dv = profile.dv().to_vec();
    let zeta = v.iter().map(|&w| curve.reconstruct_zeta(w)).collect::<Result<Vec<_>, _>>()?;
    let u = v.iter().map(|&w| curve.reconstruct_u(w)).collect::<Result<Vec<_>, _>>()?;
    let header = ctx.header(
        "oracle",
        json!({
            "speed": speed,
            "turning_point": s * curve.turning_point(),
            "decay_rate": curve.problem().decay_rate(),
            "step": step,
            "energy_drift": profile.energy_drift(),
        }),
    );
    let table = CsvTable::from_columns(
        header,
        &[("x", &x), ("v", &v), ("dv", &dv), ("zeta", &zeta), ("u", &u)],
    );
    write_table(&table, out)
}

fn cmd_dispersion(ctx: &Context, k_min: f64, k_max: f64, count: usize, out: Option<&Path>) -> Result<(), Failure> {
    if !(k_min.is_finite() && k_max.is_finite() && k_max >= k_min) || count == 0 {
        return Err(Failure::invalid("config", "need k_min <= k_max and count >= 1"));
    }
    let d = DispersionSymbols::new(ctx.params());
    let k: Vec<f64> = (0..count)
        .map(|i| {
            if count == 1 {
                k_min
            } else {
                k_min + (k_max - k_min) * i as f64 / (count - 1) as f64
            }
        })
        .collect();
    let omega: Vec<f64> = k.iter().map(|&k| d.omega(k)).collect();
    let sigma: Vec<f64> = k.iter().map(|&k| d.sigma(k)).collect();
    let order = d.sigma_order();
    let header = ctx.header(
        "dispersion",
        json!({
            "sigma_order": order,
            "sigma_tail_constant": d.sigma_tail_constant(),
        }),
    );
    let table = CsvTable::from_columns(header, &[("k", &k), ("omega", &omega), ("sigma", &sigma)]);
    write_table(&table, out)
}

/// Parameters and speed of a profile: explicit flags, then the file
/// header, then the run configuration.
fn profile_physics(ctx: &Context, model: &ModelArgs, header: Option<&Value>) -> Result<(ModelParameters, f64), Failure> {
    let from_header = |key: &str| -> Option<f64> {
        let h = header?;
        match key {
            "gamma" | "delta" => h["config"]["params"][key].as_f64(),
            _ => h["speed"].as_f64(),
        }
    };
    let gamma = model.gamma.or_else(|| from_header("gamma")).unwrap_or(ctx.config.params.gamma);
    let delta = model.delta.or_else(|| from_header("delta")).unwrap_or(ctx.config.params.delta);
    let params = ModelParameters::new(gamma, delta).map_err(IoError::from)?;
    let speed = match model.cs.or_else(|| from_header("speed")) {
        Some(c) => c,
        None => params.c_crit() + 0.05,
    };
    Ok((params, speed))
}

fn cmd_analyze(
    ctx: &Context,
    kind: AnalyzeKind,
    input: &Path,
    window: Option<(f64, f64)>,
    model: &ModelArgs,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let text = std::fs::read_to_string(input).map_err(|e| {
        Failure::from(IoError::File {
            path: input.display().to_string(),
            source: e,
        })
    })?;
    let source = json!({ "input": input.display().to_string() });
    match kind {
        AnalyzeKind::Decay => {
            let p = io::parse_profile(&text)?;
            let half = analysis::positive_half(&p.grid, &p.state.zeta);
            let window = window
                .or(ctx.config.analysis.space_window)
                .unwrap_or_else(|| analysis::default_space_window(&half, p.grid.half_length()));
            let fit = analysis::fit_decay_space(&half, window)?;
            let rows: Vec<(f64, f64)> = half.into_iter().filter(|s| s.0 >= window.0 && s.0 <= window.1).collect();
            emit_fit(ctx, "analyze decay", source, &fit, ("x", "zeta"), &rows, out)
        }
        AnalyzeKind::Spectrum => {
            let (samples, raw) = match io::parse_profile(&text) {
                Ok(p) => {
                    let spec = p.grid.forward_transform(&p.state.zeta).map_err(IoError::from)?;
                    let h = p.grid.spacing();
                    let raw: Vec<[f64; 4]> = (1..p.grid.len() / 2)
                        .map(|i| [p.grid.mode_index(i) as f64, p.grid.wavenumbers()[i], h * spec[i].re, h * spec[i].im])
                        .collect();
                    (analysis::spectrum_samples(&p.grid, &p.state.zeta).map_err(IoError::from)?, Some(raw))
                }
                Err(_) => (io::parse_spectrum(&text)?, None),
            };
            let window = window
                .or(ctx.config.analysis.spectrum_window)
                .unwrap_or_else(|| analysis::default_spectrum_window(&samples));
            let fit = analysis::fit_decay_spectrum(&samples, window)?;
            match raw {
                Some(raw) => {
                    let header = ctx.header("analyze spectrum", merge(source, json!({ "fit": fit })));
                    let col = |i: usize| raw.iter().map(|r| r[i]).collect::<Vec<f64>>();
                    let mag: Vec<f64> = samples.iter().map(|s| s.1).collect();
                    let fitted: Vec<f64> = samples.iter().map(|s| fit.model.eval(fit.coefficients, s.0)).collect();
                    let table = CsvTable::from_columns(
                        header,
                        &[
                            ("k", &col(0)),
                            ("k_scaled", &col(1)),
                            ("re", &col(2)),
                            ("im", &col(3)),
                            ("magnitude", &mag),
                            ("fit", &fitted),
                        ],
                    );
                    write_table(&table, out)?;
                    if let Some(p) = out {
                        write_json(&json!(fit), &fit_path(p))?;
                    }
                    Ok(())
                }
                None => emit_fit(ctx, "analyze spectrum", source, &fit, ("k_scaled", "magnitude"), &samples, out),
            }
        }
        AnalyzeKind::Phase => {
            let p = io::parse_profile(&text)?;
            let (params, speed) = profile_physics(ctx, model, p.header.as_ref())?;
            let portrait = analysis::phase_portrait(&p.state, &p.grid).map_err(IoError::from)?;
            let energy = analysis::phase_energy_residual(&portrait, params, speed)?;
            let header = ctx.header(
                "analyze phase",
                merge(source, json!({ "speed": speed, "energy_residual": energy })),
            );
            let table = CsvTable::from_columns(
                header,
                &[("x", p.grid.nodes()), ("v", &portrait.v), ("dv", &portrait.dv)],
            );
            write_table(&table, out)
        }
    }
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(m), Value::Object(e)) = (&mut a, b) {
        m.extend(e);
    }
    a
}

/// Samples in the fit window next to the fitted curve, plus a `.fit.json`
/// sidecar when writing to a file.
fn emit_fit(
    ctx: &Context,
    command: &str,
    extra: Value,
    fit: &FitResult,
    names: (&str, &str),
    rows: &[(f64, f64)],
    out: Option<&Path>,
) -> Result<(), Failure> {
    let header = ctx.header(command, merge(extra, json!({ "fit": fit })));
    let t: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fitted: Vec<f64> = t.iter().map(|&t| fit.model.eval(fit.coefficients, t)).collect();
    let table = CsvTable::from_columns(header, &[(names.0, &t), (names.1, &y), ("fit", &fitted)]);
    write_table(&table, out)?;
    if let Some(p) = out {
        write_json(&json!(fit), &fit_path(p))?;
    }
    Ok(())
}

/// Speeds used for the profile figures.
const FIG2_OFFSETS: [f64; 3] = [0.02, 0.05, 0.10];

fn reproduce(ctx: &Context, target: Target, dir: &Path) -> Result<(), Failure> {
    let all = target == Target::All;
    let grid = ctx.grid();
    let template = ctx.solver();
    let gamma = ctx.config.params.gamma;

    let profiles = |delta: f64, name: &str| -> Result<Vec<(f64, WaveState, SolveReport)>, Failure> {
        let params = ModelParameters::new(gamma, delta).map_err(IoError::from)?;
        let speeds: Vec<f64> = FIG2_OFFSETS.iter().map(|o| params.c_crit() + o).collect();
        let mut out = Vec::new();
        for run in analysis::speed_sweep(&grid, &params, &speeds, &template) {
            let (point, state, report) = run?;
            let header = ctx.header(
                &format!("reproduce {name}"),
                json!({
                    "params": params,
                    "speed": point.speed,
                    "report": ctx.report_json(&report),
                    "amplitudes": point.amplitudes,
                }),
            );
            let file = format!("{name}_cs{:.4}.csv", point.speed);
            io::profile_table(&grid, &state, header).write(&in_dir(dir, &file)?)?;
            out.push((point.speed, state, report));
        }
        Ok(out)
    };

    if all || target == Target::Fig2a || target == Target::Fig4 {
        let runs = profiles(0.8, "fig2a")?;
        if all || target == Target::Fig4 {
            let params = ModelParameters::new(gamma, 0.8).map_err(IoError::from)?;
            for (speed, state, _) in &runs {
                let portrait = analysis::phase_portrait(state, &grid).map_err(IoError::from)?;
                let energy = analysis::phase_energy_residual(&portrait, params, *speed)?;
                let header = ctx.header("reproduce fig4", json!({ "speed": speed, "energy_residual": energy }));
                CsvTable::from_columns(header, &[("x", grid.nodes()), ("v", &portrait.v), ("dv", &portrait.dv)])
                    .write(&in_dir(dir, &format!("fig4_cs{speed:.4}.csv"))?)?;
            }
        }
    }
    if all || target == Target::Fig2b {
        profiles(0.5, "fig2b")?;
    }
    let mut table1 = serde_json::Map::new();
    if all || matches!(target, Target::Fig3a | Target::Fig3b | Target::Table1) {
        let speeds = sweep_speeds(ctx, None, None, None)?;
        let (table, fit) = sweep_table(ctx, "reproduce fig3", &speeds)?;
        table.write(&in_dir(dir, "fig3a_sweep.csv")?)?;
        write_json(&json!(fit), &in_dir(dir, "fig3b_fit.json")?)?;
        table1.insert("speed_amplitude".into(), json!(fit));
    }
    if all || target == Target::Fig3c {
        let a = &ctx.config.analysis;
        let pts = analysis::amplitude_vs_k_study(&grid, gamma, &a.k_study_deltas, a.k_study_offset, &template);
        for p in pts.iter().filter(|p| p.error.is_some()) {
            eprintln!("warning: delta = {}: {}", p.delta, p.error.as_deref().unwrap_or(""));
        }
        let ok: Vec<_> = pts.iter().filter(|p| p.zeta_max.is_some()).collect();
        let header = ctx.header("reproduce fig3c", json!({ "gamma": gamma, "offset": a.k_study_offset, "points": pts }));
        let col = |f: fn(&analysis::KStudyPoint) -> f64| ok.iter().map(|p| f(p)).collect::<Vec<f64>>();
        CsvTable::from_columns(
            header,
            &[
                ("k_coeff", &col(|p| p.k_coeff)),
                ("delta", &col(|p| p.delta)),
                ("cs", &col(|p| p.speed)),
                ("zeta_max", &col(|p| p.zeta_max.unwrap_or(f64::NAN))),
            ],
        )
        .write(&in_dir(dir, "fig3c_amplitude_vs_k.csv")?)?;
    }
    if all || matches!(target, Target::Fig5 | Target::Fig6 | Target::Table1) {
        let params = ModelParameters::new(gamma, 0.8).map_err(IoError::from)?;
        let mut cfg = template.clone();
        cfg.speed = params.c_crit() + 0.05;
        let (state, _) = solve_logged(&grid, &params, &cfg)?;
        let a = &ctx.config.analysis;
        let half = analysis::positive_half(&grid, &state.zeta);
        let sw = a.space_window.unwrap_or_else(|| analysis::default_space_window(&half, grid.half_length()));
        let space = analysis::fit_decay_space(&half, sw)?;
        let spec = analysis::spectrum_samples(&grid, &state.zeta).map_err(IoError::from)?;
        let kw = a.spectrum_window.unwrap_or_else(|| analysis::default_spectrum_window(&spec));
        let spectrum = analysis::fit_decay_spectrum(&spec, kw)?;
        if all || target == Target::Fig5 {
            let fitted: Vec<f64> = half.iter().map(|s| space.model.eval(space.coefficients, s.0)).collect();
            let header = ctx.header("reproduce fig5", json!({ "speed": cfg.speed, "fit": space }));
            let x: Vec<f64> = half.iter().map(|s| s.0).collect();
            let z: Vec<f64> = half.iter().map(|s| s.1).collect();
            CsvTable::from_columns(header, &[("x", &x), ("zeta", &z), ("fit", &fitted)])
                .write(&in_dir(dir, "fig5_space_decay.csv")?)?;
        }
        if all || target == Target::Fig6 {
            let fitted: Vec<f64> = spec.iter().map(|s| spectrum.model.eval(spectrum.coefficients, s.0)).collect();
            let header = ctx.header("reproduce fig6", json!({ "speed": cfg.speed, "fit": spectrum }));
            let k: Vec<f64> = spec.iter().map(|s| s.0).collect();
            let m: Vec<f64> = spec.iter().map(|s| s.1).collect();
            CsvTable::from_columns(header, &[("k_scaled", &k), ("magnitude", &m), ("fit", &fitted)])
                .write(&in_dir(dir, "fig6_spectrum.csv")?)?;
        }
        table1.insert("space_decay".into(), json!(space));
        table1.insert("spectrum_decay".into(), json!(spectrum));
    }
    if all || target == Target::Table1 {
        let doc = ctx.header("reproduce table1", json!({ "fits": table1 }));
        write_json(&doc, &in_dir(dir, "table1.json")?)?;
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::invalid("config", format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::invalid("config", e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Solve { model, out } => {
            let ctx = Context::new(config, model, cli.timings)?;
            cmd_solve(&ctx, ctx.out(out).as_deref())
        }
        Command::Sweep { model, from, to, count, out } => {
            let ctx = Context::new(config, model, cli.timings)?;
            let speeds = sweep_speeds(&ctx, *from, *to, *count)?;
            let (table, fit) = sweep_table(&ctx, "sweep", &speeds)?;
            let out = ctx.out(out);
            write_table(&table, out.as_deref())?;
            if let Some(p) = &out {
                write_json(&json!(fit), &fit_path(p))?;
            }
            Ok(())
        }
        Command::Oracle { model, x_max, step, out } => {
            let ctx = Context::new(config, model, cli.timings)?;
            cmd_oracle(&ctx, *x_max, *step, ctx.out(out).as_deref())
        }
        Command::Dispersion { model, k_min, k_max, count, out } => {
            let ctx = Context::new(config, model, cli.timings)?;
            cmd_dispersion(&ctx, *k_min, *k_max, *count, ctx.out(out).as_deref())
        }
        Command::Analyze { kind, input, window, model, out } => {
            let ctx = Context::new(config, model, cli.timings)?;
            cmd_analyze(&ctx, *kind, input, *window, model, ctx.out(out).as_deref())
        }
        Command::Reproduce { target, out_dir, model } => {
            let ctx = Context::new(config, model, cli.timings)?;
            let dir = out_dir
                .clone()
                .or_else(|| ctx.config.output.dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("reproduce"));
            reproduce(&ctx, *target, &dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", io::error_json("usage", e.to_string().trim()));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", io::error_json(f.kind, &f.message));
            ExitCode::from(f.code)
        }
    }
}
