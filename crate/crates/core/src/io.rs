//! File formats: CSV tables with a JSON header line, run configuration,
//! and machine-readable errors.
//!
//! A table looks like
//!
//! ```text
//! # {"command":"solve",...}
//! x,zeta,v,u
//! -1.2800000000000000e2,1.2e-60,...
//! ```
//!
//! Floats are written with 17 significant digits so that a value read back
//! is bit-identical to the one written.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::grid::{GridError, GridFunction, SpectralGrid};
use crate::params::{ModelParameters, ParamError};
use crate::solver::{Extrapolation, SolverConfig, SolverError, WaveState};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("nodes are not a periodic grid on [-l, l): {0}")]
    NotAGrid(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Format one value with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Option<Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: Value, columns: &[&str]) -> Self {
        CsvTable {
            header: Some(header),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Build from equally long columns.
    pub fn from_columns(header: Value, columns: &[(&str, &[f64])]) -> Self {
        let n = columns.first().map_or(0, |c| c.1.len());
        debug_assert!(columns.iter().all(|c| c.1.len() == n));
        let mut t = CsvTable::new(header, &columns.iter().map(|c| c.0).collect::<Vec<_>>());
        t.rows = (0..n).map(|i| columns.iter().map(|c| c.1[i]).collect()).collect();
        t
    }

    pub fn column_index(&self, name: &str) -> Result<usize, IoError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| IoError::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, IoError> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.header {
            let _ = writeln!(out, "# {h}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format_float(*x)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Parse a table. Blank lines are skipped; only the first line may be a
    /// `#` header, and it must hold a JSON value.
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut table = CsvTable::default();
        let mut saw_columns = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if saw_columns || table.header.is_some() {
                    return Err(IoError::Parse {
                        line: line_no,
                        message: "header comment after the start of the table".into(),
                    });
                }
                let value = serde_json::from_str(rest.trim()).map_err(|e| IoError::Parse {
                    line: line_no,
                    message: format!("header is not JSON: {e}"),
                })?;
                table.header = Some(value);
                continue;
            }
            if !saw_columns {
                table.columns = line.split(',').map(|c| c.trim().to_string()).collect();
                if table.columns.iter().any(|c| c.is_empty()) {
                    return Err(IoError::Parse {
                        line: line_no,
                        message: "empty column name".into(),
                    });
                }
                saw_columns = true;
                continue;
            }
            let row = line
                .split(',')
                .map(|cell| {
                    let cell = cell.trim();
                    cell.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| IoError::Parse {
                            line: line_no,
                            message: format!("`{cell}` is not a finite number"),
                        })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if row.len() != table.columns.len() {
                return Err(IoError::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", table.columns.len(), row.len()),
                });
            }
            table.rows.push(row);
        }
        if !saw_columns {
            return Err(IoError::Parse {
                line: 0,
                message: "no column header".into(),
            });
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| file_error(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
        Self::parse(&text)
    }
}

fn file_error(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

/// A profile read back from disk together with the grid it lives on.
#[derive(Debug, Clone)]
pub struct Profile {
    pub grid: SpectralGrid,
    pub state: WaveState,
    pub header: Option<Value>,
}

/// Recover `(l, N)` from nodes `x_j = -l + j h`, `h = 2l / N`.
pub fn grid_from_nodes(x: &[f64]) -> Result<SpectralGrid, IoError> {
    let n = x.len();
    if n < 8 {
        return Err(IoError::NotAGrid(format!("{n} nodes")));
    }
    let l = -x[0];
    if !(l > 0.0 && l.is_finite()) {
        return Err(IoError::NotAGrid(format!("first node {} is not negative", x[0])));
    }
    let h = 2.0 * l / n as f64;
    for (j, &xj) in x.iter().enumerate() {
        let expected = -l + j as f64 * h;
        if (xj - expected).abs() > 1e-9 * l {
            return Err(IoError::NotAGrid(format!("node {j} is {xj}, expected {expected}")));
        }
    }
    Ok(SpectralGrid::new(l, n)?)
}

/// Parse a profile table with columns `x, zeta, v, u`.
pub fn parse_profile(text: &str) -> Result<Profile, IoError> {
    let table = CsvTable::parse(text)?;
    let grid = grid_from_nodes(&table.column("x")?)?;
    let state = WaveState {
        zeta: GridFunction::new(table.column("zeta")?),
        v: GridFunction::new(table.column("v")?),
        u: GridFunction::new(table.column("u")?),
    };
    Ok(Profile {
        grid,
        state,
        header: table.header,
    })
}

pub fn profile_table(grid: &SpectralGrid, state: &WaveState, header: Value) -> CsvTable {
    CsvTable::from_columns(
        header,
        &[
            ("x", grid.nodes()),
            ("zeta", &state.zeta),
            ("v", &state.v),
            ("u", &state.u),
        ],
    )
}

/// Parse `(k', magnitude)` pairs from a spectrum table. Accepts either a
/// `magnitude` column or `re`/`im` columns.
pub fn parse_spectrum(text: &str) -> Result<Vec<(f64, f64)>, IoError> {
    let table = CsvTable::parse(text)?;
    let k = table.column("k_scaled")?;
    let mag = match table.column("magnitude") {
        Ok(m) => m,
        Err(_) => {
            let re = table.column("re")?;
            let im = table.column("im")?;
            re.iter().zip(&im).map(|(a, b)| a.hypot(*b)).collect()
        }
    };
    Ok(k.into_iter().zip(mag).collect())
}

/// Physical, grid and solver settings of a run. Every block and field is
/// optional in the JSON form; command-line flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ParamsBlock,
    pub grid: GridBlock,
    pub solver: SolverBlock,
    pub analysis: AnalysisBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsBlock {
    pub gamma: f64,
    pub delta: f64,
}

impl Default for ParamsBlock {
    fn default() -> Self {
        ParamsBlock {
            gamma: 0.5,
            delta: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    pub half_length: f64,
    pub modes: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            half_length: 128.0,
            modes: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    /// Wave speed; `None` means `c_crit + 0.05`.
    pub cs: Option<f64>,
    pub tol_residual: f64,
    pub tol_update: f64,
    pub max_iter: usize,
    pub extrapolation: Extrapolation,
    pub dealias: bool,
    pub strict: bool,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::new(0.0);
        SolverBlock {
            cs: None,
            tol_residual: d.tol_residual,
            tol_update: d.tol_update,
            max_iter: d.max_iter,
            extrapolation: d.extrapolation,
            dealias: d.dealias,
            strict: d.strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    /// Speed offsets above `c_crit` spanned by `sweep`.
    pub speed_offsets: (f64, f64),
    pub speed_count: usize,
    /// Offset above `c_crit` used by the amplitude-vs-K study.
    pub k_study_offset: f64,
    pub k_study_deltas: Vec<f64>,
    pub space_window: Option<(f64, f64)>,
    pub spectrum_window: Option<(f64, f64)>,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        AnalysisBlock {
            speed_offsets: (0.01, 0.3),
            speed_count: 10,
            k_study_offset: 0.05,
            k_study_deltas: vec![0.5, 0.6, 0.75, 0.8, 0.9, 1.0, 1.2, 1.5],
            space_window: None,
            spectrum_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub path: Option<String>,
    pub dir: Option<String>,
    /// Record wall-clock timings in output headers (breaks byte-identical
    /// reruns).
    pub timings: bool,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, IoError> {
        serde_json::from_str(text).map_err(|e| IoError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn model(&self) -> Result<ModelParameters, IoError> {
        Ok(ModelParameters::new(self.params.gamma, self.params.delta)?)
    }

    pub fn spectral_grid(&self) -> Result<SpectralGrid, IoError> {
        Ok(SpectralGrid::new(self.grid.half_length, self.grid.modes)?)
    }

    pub fn speed(&self) -> Result<f64, IoError> {
        Ok(match self.solver.cs {
            Some(c) => c,
            None => self.model()?.c_crit() + 0.05,
        })
    }

    pub fn solver_config(&self) -> Result<SolverConfig, IoError> {
        let mut cfg = SolverConfig::new(self.speed()?);
        cfg.tol_residual = self.solver.tol_residual;
        cfg.tol_update = self.solver.tol_update;
        cfg.max_iter = self.solver.max_iter;
        cfg.extrapolation = self.solver.extrapolation;
        cfg.dealias = self.solver.dealias;
        cfg.strict = self.solver.strict;
        cfg.validate().map_err(|e| match e {
            SolverError::InvalidConfig(m) => IoError::Config(m),
            other => IoError::Config(other.to_string()),
        })?;
        Ok(cfg)
    }

    /// Check every block that a command may use.
    pub fn validate(&self) -> Result<(), IoError> {
        self.model()?;
        self.spectral_grid()?;
        self.solver_config()?;
        let a = &self.analysis;
        if !(a.speed_offsets.0 > 0.0 && a.speed_offsets.1 >= a.speed_offsets.0) {
            return Err(IoError::Config(format!(
                "speed offsets {:?} must be positive and ordered",
                a.speed_offsets
            )));
        }
        if !(a.k_study_offset > 0.0) {
            return Err(IoError::Config("k_study_offset must be positive".into()));
        }
        for w in [a.space_window, a.spectrum_window].into_iter().flatten() {
            if !(w.0 > 0.0 && w.1 > w.0) {
                return Err(IoError::Config(format!("fit window {w:?} must satisfy 0 < lo < hi")));
            }
        }
        Ok(())
    }
}

/// `{"error": kind, "message": ...}` for standard error.
pub fn error_json(kind: &str, message: &str) -> Value {
    serde_json::json!({ "error": kind, "message": message })
}
