//! Run configuration: a TOML file plus `key=value` overrides.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use filamentlab_core::dynamics::{Renormalize, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    SweepEps,
    CheckCompat,
    CorrectDatum,
    Diagnose,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::SweepEps => "sweep-eps",
            Mode::CheckCompat => "check-compat",
            Mode::CorrectDatum => "correct-datum",
            Mode::Diagnose => "diagnose",
        }
    }
}

/// Initial datum: a builtin by name, or a snapshot CSV by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumConfig {
    pub name: Option<String>,
    pub path: Option<PathBuf>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: f64,
}

fn default_delta() -> f64 {
    0.1
}
fn default_alpha() -> f64 {
    0.5
}
fn default_k() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub eps: Option<f64>,
    pub dt: Option<f64>,
    /// Defaults to semi-implicit for `eps > 0` and midpoint for `eps = 0`.
    pub scheme: Option<Scheme>,
    pub renormalize: Option<Renormalize>,
    #[serde(default = "default_picard")]
    pub picard_iters: usize,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_fp_iters")]
    pub max_fixed_point_iters: usize,
}

fn default_picard() -> usize {
    2
}
fn default_newton_tol() -> f64 {
    1e-12
}
fn default_fp_iters() -> usize {
    50
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            eps: None,
            dt: None,
            scheme: None,
            renormalize: None,
            picard_iters: default_picard(),
            newton_tol: default_newton_tol(),
            max_fixed_point_iters: default_fp_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eps: Option<Vec<f64>>,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default = "default_order")]
    pub target_order: usize,
}

fn default_threads() -> usize {
    4
}
fn default_order() -> usize {
    1
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            eps: None,
            threads: default_threads(),
            target_order: default_order(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompatSection {
    #[serde(default = "default_order")]
    pub up_to: usize,
    /// Defaults to `max(1e-8, 10 h²)`.
    pub tol: Option<f64>,
}

impl Default for CompatSection {
    fn default() -> Self {
        Self {
            up_to: default_order(),
            tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectSection {
    #[serde(default = "default_order")]
    pub target_order: usize,
    #[serde(default = "default_eps_star")]
    pub eps_star: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_iters")]
    pub max_iter: usize,
}

fn default_eps_star() -> f64 {
    0.2
}
fn default_newton_iters() -> usize {
    50
}

impl Default for CorrectSection {
    fn default() -> Self {
        Self {
            target_order: default_order(),
            eps_star: default_eps_star(),
            newton_tol: default_newton_tol(),
            max_iter: default_newton_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    /// Output directory of an earlier `simulate` run.
    pub input: Option<PathBuf>,
    #[serde(default = "default_kappa_floor")]
    pub kappa_floor: f64,
}

fn default_kappa_floor() -> f64 {
    filamentlab_core::diagnostics::DEFAULT_KAPPA_FLOOR
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self {
            input: None,
            kappa_floor: default_kappa_floor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub datum: Option<DatumConfig>,
    /// Boundary vector at `s = 0`; defaults to the datum's value there.
    pub a: Option<[f64; 3]>,
    /// Defaults to 128 for builtin data and to the file's grid for CSV data.
    pub n_cells: Option<usize>,
    pub t_end: Option<f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Keep every `stride`-th step as a snapshot.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Seed of the perturbation generators.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub compat: CompatSection,
    #[serde(default)]
    pub correct: CorrectSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("filamentlab-out")
}
fn default_stride() -> usize {
    10
}

pub const OUT_ENV: &str = "FILAMENTLAB_OUT";

impl RunConfig {
    /// Reads `path` (if any), applies the overrides in order, then sets the
    /// mode. Overrides win over the file; the positional mode wins over
    /// both.
    pub fn load(mode: Mode, path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("config {}: {}", p.display(), one_line(&e))))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        table.insert("mode".into(), toml::Value::String(mode.as_str().into()));
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(one_line(&e)))?;
        if let Ok(dir) = std::env::var(OUT_ENV) {
            if !dir.is_empty() {
                cfg.out_dir = PathBuf::from(dir);
            }
        }
        Ok(cfg)
    }

    /// Fields each mode cannot do without.
    pub fn check_required(&self) -> CliResult<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(format!("mode {} needs {what}", self.mode.as_str())))
            }
        };
        match self.mode {
            Mode::Simulate => {
                need(self.datum.is_some(), "datum")?;
                need(self.t_end.is_some(), "t_end")?;
                need(self.solver.eps.is_some(), "solver.eps")?;
                need(self.solver.dt.is_some(), "solver.dt")
            }
            Mode::SweepEps => {
                need(self.datum.is_some(), "datum")?;
                need(self.t_end.is_some(), "t_end")?;
                need(self.sweep.eps.is_some(), "sweep.eps")?;
                need(self.solver.dt.is_some(), "solver.dt")
            }
            Mode::CheckCompat => need(self.datum.is_some(), "datum"),
            Mode::CorrectDatum => {
                need(self.datum.is_some(), "datum")?;
                need(self.solver.eps.is_some(), "solver.eps")
            }
            Mode::Diagnose => need(self.diagnose.input.is_some(), "diagnose.input"),
        }?;
        if let Some(d) = &self.datum {
            if d.name.is_some() == d.path.is_some() {
                return Err(CliError::Config(
                    "datum needs exactly one of datum.name and datum.path".into(),
                ));
            }
        }
        if self.stride == 0 {
            return Err(CliError::Config("stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

fn one_line(e: &dyn std::fmt::Display) -> String {
    e.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `a.b.c=value`; the value is read as a TOML literal when it parses as
/// one and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> CliResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{spec}' is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override '{spec}' has an empty key")));
    }
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override '{key}': '{p}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
