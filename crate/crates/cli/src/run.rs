//! Mode dispatch and artifact writing.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use filamentlab_core::compat::{check_compat, check_compat_jets, correct_datum, default_tol, CompatReport, CorrectorOptions};
use filamentlab_core::datum::{builtin, BuiltinParams, Datum, GridDatum};
use filamentlab_core::diagnostics::{
    boundary_identity_check, hasimoto, nls_residual, BoundaryIdentityReport, InvariantSeries, NlsResidual,
};
use filamentlab_core::dynamics::{epsilon_sweep, evolve, step_plan, FilamentState, SolverConfig, SweepOptions};
use filamentlab_core::snapshot::{read_snapshot_file, write_snapshot_file, SnapshotIndex};
use filamentlab_core::{FilamentError, GridSpec, UnitVecField, Vec3};
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, CliResult};

pub const DEFAULT_N_CELLS: usize = 128;
/// `|a|` may be off by this much and still be normalized.
pub const A_NORMALIZE_TOL: f64 = 1e-6;
/// Unit tolerance for fields read back from snapshots.
pub const SNAPSHOT_UNIT_TOL: f64 = 1e-6;

/// What a successful run produced.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    /// Configuration echo with defaulted fields filled in.
    echo: serde_json::Value,
    outcome: RunOutcome,
}

impl Ctx<'_> {
    fn resolved(&mut self, a: Vec3, grid: GridSpec) {
        self.echo["a"] = serde_json::json!([a.x, a.y, a.z]);
        self.echo["n_cells"] = serde_json::json!(grid.n_cells());
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let p = self.path(name);
        let mut f = File::create(&p).map_err(|e| CliError::io(&p, e))?;
        serde_json::to_writer_pretty(&mut f, value).map_err(FilamentError::from)?;
        f.write_all(b"\n").map_err(|e| CliError::io(&p, e))?;
        self.outcome.files.push(p);
        Ok(())
    }

    fn snapshot(&mut self, name: &str, v: &UnitVecField, x: Option<&filamentlab_core::VecField>) -> CliResult<()> {
        let p = self.path(name);
        write_snapshot_file(&p, v.field(), x)?;
        self.outcome.files.push(p);
        Ok(())
    }

    fn warn(&mut self, w: String) {
        self.outcome.warnings.push(w);
    }
}

pub fn run(cfg: &RunConfig) -> CliResult<RunOutcome> {
    cfg.check_required()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let mut ctx = Ctx {
        cfg,
        out: cfg.out_dir.clone(),
        echo: cfg.echo(),
        outcome: RunOutcome::default(),
    };
    match cfg.mode {
        Mode::Simulate => simulate(&mut ctx)?,
        Mode::SweepEps => sweep(&mut ctx)?,
        Mode::CheckCompat => compat(&mut ctx)?,
        Mode::CorrectDatum => correct(&mut ctx)?,
        Mode::Diagnose => diagnose(&mut ctx)?,
    }
    Ok(ctx.outcome)
}

fn load_datum(cfg: &RunConfig) -> CliResult<(Arc<dyn Datum>, GridSpec)> {
    let d = cfg
        .datum
        .as_ref()
        .ok_or_else(|| CliError::Config("no datum configured".into()))?;
    if let Some(name) = &d.name {
        let p = BuiltinParams {
            delta: d.delta,
            seed: cfg.seed,
            alpha: d.alpha,
            k: d.k,
        };
        let grid = GridSpec::new(cfg.n_cells.unwrap_or(DEFAULT_N_CELLS))?;
        return Ok((builtin(name, p)?, grid));
    }
    let path = d.path.as_ref().expect("checked by check_required");
    let snap = read_snapshot_file(path).map_err(|e| match e {
        FilamentError::Io(io) => CliError::io(path, io),
        other => other.into(),
    })?;
    let file_grid = snap.v.grid();
    if let Some(n) = cfg.n_cells {
        file_grid.ensure_same(&GridSpec::new(n)?)?;
    }
    let field = UnitVecField::new(snap.v, SNAPSHOT_UNIT_TOL)?;
    let label = path.display().to_string();
    Ok((Arc::new(GridDatum::new(field, label)), file_grid))
}

/// The configured `a`, normalized if it is within [`A_NORMALIZE_TOL`] of
/// unit length; the datum's value at `s = 0` if none is configured.
fn resolve_a(ctx: &mut Ctx, datum: &dyn Datum) -> CliResult<Vec3> {
    let Some(a) = ctx.cfg.a else {
        return Ok(datum.eval(0.0).normalize());
    };
    let a = Vec3::new(a[0], a[1], a[2]);
    let off = (a.norm() - 1.0).abs();
    if !(off <= A_NORMALIZE_TOL) {
        return Err(CliError::Config(format!(
            "boundary vector a has |a| = {} (off by more than {A_NORMALIZE_TOL:e})",
            a.norm()
        )));
    }
    if off > 1e-12 {
        ctx.warn(format!("normalized a (|a| was {})", a.norm()));
        return Ok(a.normalize());
    }
    Ok(a)
}

fn solver_config(cfg: &RunConfig, eps: f64, a: Vec3) -> CliResult<SolverConfig> {
    let s = &cfg.solver;
    let dt = s.dt.ok_or_else(|| CliError::Config("solver.dt is required".into()))?;
    let mut sc = match s.scheme {
        Some(scheme) => SolverConfig::new(scheme, eps, dt, a),
        None => SolverConfig::for_eps(eps, dt, a),
    };
    if let Some(r) = s.renormalize {
        sc.renormalize = r;
    }
    sc.picard_iters = s.picard_iters;
    sc.newton_tol = s.newton_tol;
    sc.max_fixed_point_iters = s.max_fixed_point_iters;
    sc.validate()?;
    Ok(sc)
}

fn corrector_options(cfg: &RunConfig) -> CorrectorOptions {
    CorrectorOptions {
        eps_star: cfg.correct.eps_star,
        newton_tol: cfg.correct.newton_tol,
        max_iter: cfg.correct.max_iter,
        ..CorrectorOptions::default()
    }
}

fn t_end(cfg: &RunConfig) -> CliResult<f64> {
    let t = cfg.t_end.ok_or_else(|| CliError::Config("t_end is required".into()))?;
    if !(t.is_finite() && t > 0.0) {
        return Err(CliError::Config(format!("t_end must be > 0, got {t}")));
    }
    Ok(t)
}

#[derive(Serialize)]
struct SimulateSummary {
    t_end: f64,
    steps: usize,
    dt: f64,
    snapshots: usize,
    /// Max node displacement of the tangent field between the first and
    /// last state.
    max_displacement: f64,
    unit_drift: f64,
    warnings: Vec<String>,
}

fn simulate(ctx: &mut Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    let (datum, grid) = load_datum(cfg)?;
    let a = resolve_a(ctx, datum.as_ref())?;
    ctx.resolved(a, grid);
    let eps = cfg.solver.eps.expect("checked by check_required");
    let sc = solver_config(cfg, eps, a)?;
    let t_end = t_end(cfg)?;
    let (steps, dt) = step_plan(&sc, grid, t_end);
    if dt < sc.dt * (1.0 - 1e-12) {
        ctx.warn(format!("time step reduced from {} to {dt} for stability", sc.dt));
    }
    let initial = FilamentState::new(datum.sample(grid)?).with_positions();
    let hist = evolve(initial, &sc, t_end, cfg.stride)?;

    let mut files = Vec::with_capacity(hist.len());
    for (k, st) in hist.iter().enumerate() {
        let name = format!("snap_{k:05}.csv");
        ctx.snapshot(&name, &st.v, st.x.as_ref())?;
        files.push(name);
    }
    let series = InvariantSeries::from_states(&hist)?;
    let inv_path = ctx.path("invariants.csv");
    series.write_csv(File::create(&inv_path).map_err(|e| CliError::io(&inv_path, e))?)?;
    ctx.outcome.files.push(inv_path);

    let index = SnapshotIndex {
        times: hist.iter().map(|s| s.t).collect(),
        files,
        config: ctx.echo.clone(),
        invariants: series.entries.clone(),
    };
    let index_path = ctx.path("index.json");
    index.write_file(&index_path)?;
    ctx.outcome.files.push(index_path);

    let (first, last) = (&hist[0], hist.last().expect("history is never empty"));
    let disp = last.v.max_abs_diff(&first.v)?;
    let mut warnings = ctx.outcome.warnings.clone();
    warnings.extend(last.warnings.iter().cloned());
    let summary = SimulateSummary {
        t_end,
        steps,
        dt,
        snapshots: hist.len(),
        max_displacement: disp,
        unit_drift: last.v.unit_drift(),
        warnings,
    };
    ctx.json("summary.json", &serde_json::json!({ "config": ctx.echo, "summary": summary }))?;
    ctx.outcome.summary = format!(
        "simulate: {steps} steps of {dt:e} to t = {t_end}, max displacement {disp:e}"
    );
    Ok(())
}

fn sweep(ctx: &mut Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    let (datum, grid) = load_datum(cfg)?;
    let a = resolve_a(ctx, datum.as_ref())?;
    ctx.resolved(a, grid);
    let eps = cfg.sweep.eps.clone().expect("checked by check_required");
    let first = *eps.first().ok_or_else(|| CliError::Config("sweep.eps is empty".into()))?;
    let sc = solver_config(cfg, first, a)?;
    let opts = SweepOptions {
        target_order: cfg.sweep.target_order,
        threads: cfg.sweep.threads,
        corrector: corrector_options(cfg),
    };
    let t_end = t_end(cfg)?;
    let rep = epsilon_sweep(datum, grid, &eps, t_end, &sc, &opts)?;
    for (i, v) in rep.finals.iter().enumerate() {
        ctx.snapshot(&format!("final_{i:02}.csv"), v, None)?;
    }
    ctx.snapshot("extrapolated.csv", &rep.extrapolated, None)?;
    let summary = rep.summary();
    ctx.json("sweep.json", &serde_json::json!({ "config": ctx.echo, "sweep": summary }))?;
    ctx.outcome.summary = format!("sweep-eps: H1 slope {:.4}", rep.slope_h1);
    Ok(())
}

#[derive(Serialize)]
struct CompatOutput {
    eps: f64,
    tol: f64,
    all_passed: bool,
    /// Reports from finite differences on the sampled grid.
    reports: Vec<CompatReport>,
    /// Reports from closed-form boundary jets, when the datum has them.
    jet_reports: Option<Vec<CompatReport>>,
}

fn compat(ctx: &mut Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    let (datum, grid) = load_datum(cfg)?;
    let a = resolve_a(ctx, datum.as_ref())?;
    ctx.resolved(a, grid);
    let eps = cfg.solver.eps.unwrap_or(0.0);
    let up_to = cfg.compat.up_to;
    let tol = cfg.compat.tol.unwrap_or_else(|| default_tol(grid));
    let v0 = datum.sample(grid)?;
    let reports = check_compat(&v0, a, eps, up_to, tol)?;
    let len = 2 * up_to + 1;
    let jet_reports = match (datum.jet(0.0, len), datum.jet(1.0, len)) {
        (Some(l), Some(r)) => Some(check_compat_jets(&l, &r, a, eps, up_to, tol)?),
        _ => None,
    };
    let all_passed = reports.iter().all(|r| r.passed);
    let out = CompatOutput {
        eps,
        tol,
        all_passed,
        reports,
        jet_reports,
    };
    ctx.json("compat.json", &serde_json::json!({ "config": ctx.echo, "compat": out }))?;
    ctx.outcome.summary = format!(
        "check-compat: orders 0..={up_to} {}",
        if all_passed { "passed" } else { "FAILED" }
    );
    Ok(())
}

fn correct(ctx: &mut Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    let (datum, grid) = load_datum(cfg)?;
    let a = resolve_a(ctx, datum.as_ref())?;
    ctx.resolved(a, grid);
    let eps = cfg.solver.eps.expect("checked by check_required");
    let order = cfg.correct.target_order;
    let out = correct_datum(datum, grid, a, eps, order, &corrector_options(cfg))?;
    ctx.snapshot("corrected.csv", &out.corrected, None)?;
    let summary = out.summary(eps, order);
    ctx.json("correction.json", &serde_json::json!({ "config": ctx.echo, "correction": summary }))?;
    ctx.outcome.summary = format!(
        "correct-datum: order {order} at eps = {eps}, max coefficient {:e}",
        out.correction.max_coefficient()
    );
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseOutput {
    eps: f64,
    identities: Vec<IdentityRow>,
    nls: Option<NlsResidual>,
    nls_note: Option<String>,
}

#[derive(Serialize)]
struct IdentityRow {
    t: f64,
    #[serde(flatten)]
    report: BoundaryIdentityReport,
}

fn read_states(input: &Path) -> CliResult<(SnapshotIndex, Vec<FilamentState>)> {
    let index_path = input.join("index.json");
    let index = SnapshotIndex::read_file(&index_path).map_err(|e| match e {
        FilamentError::Io(io) => CliError::io(&index_path, io),
        other => other.into(),
    })?;
    if index.times.len() != index.files.len() || index.files.is_empty() {
        return Err(CliError::Config(format!(
            "{}: times and files disagree or are empty",
            index_path.display()
        )));
    }
    let mut states = Vec::with_capacity(index.files.len());
    for (t, f) in index.times.iter().zip(&index.files) {
        let p = input.join(f);
        let snap = read_snapshot_file(&p).map_err(|e| match e {
            FilamentError::Io(io) => CliError::io(&p, io),
            other => other.into(),
        })?;
        if let Some(first) = states.first() {
            let first: &FilamentState = first;
            first.grid().ensure_same(&snap.v.grid())?;
        }
        let mut st = FilamentState::new(UnitVecField::new(snap.v, SNAPSHOT_UNIT_TOL)?);
        st.t = *t;
        st.x = snap.x;
        states.push(st);
    }
    Ok((index, states))
}

/// Longest prefix of `times` with uniform spacing.
fn uniform_prefix(times: &[f64]) -> usize {
    if times.len() < 3 {
        return times.len();
    }
    let dt = times[1] - times[0];
    let mut n = 2;
    while n < times.len() && ((times[n] - times[n - 1]) - dt).abs() <= 1e-9 * dt {
        n += 1;
    }
    n
}

fn diagnose(ctx: &mut Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    let input = cfg.diagnose.input.clone().expect("checked by check_required");
    let floor = cfg.diagnose.kappa_floor;
    let (index, states) = read_states(&input)?;
    let eps = index
        .config
        .get("solver")
        .and_then(|s| s.get("eps"))
        .and_then(|e| e.as_f64())
        .or(cfg.solver.eps)
        .unwrap_or(0.0);

    let series = InvariantSeries::from_states(&states)?;
    let inv_path = ctx.path("invariants.csv");
    series.write_csv(File::create(&inv_path).map_err(|e| CliError::io(&inv_path, e))?)?;
    ctx.outcome.files.push(inv_path);

    let identities = states
        .iter()
        .map(|st| Ok(IdentityRow { t: st.t, report: boundary_identity_check(st, eps)? }))
        .collect::<CliResult<Vec<_>>>()?;

    let profiles = hasimoto(&states, floor)?;
    for (k, p) in profiles.iter().enumerate() {
        let path = ctx.path(&format!("hasimoto_{k:05}.csv"));
        p.write_csv(File::create(&path).map_err(|e| CliError::io(&path, e))?)?;
        ctx.outcome.files.push(path);
    }
    let n_uniform = uniform_prefix(&index.times);
    let (nls, nls_note) = if n_uniform >= 3 {
        let note = (n_uniform < profiles.len())
            .then(|| format!("residual uses the first {n_uniform} uniformly spaced levels"));
        (Some(nls_residual(&profiles[..n_uniform], floor)?), note)
    } else {
        (None, Some("fewer than three uniformly spaced time levels".to_string()))
    };
    let out = DiagnoseOutput {
        eps,
        identities,
        nls,
        nls_note,
    };
    ctx.json("diagnose.json", &serde_json::json!({ "config": ctx.echo, "source": index.config, "diagnose": out }))?;
    ctx.outcome.summary = match nls {
        Some(r) => format!("diagnose: {} states, NLS residual {:e} (opposite sign {:e})", states.len(), r.stated, r.opposite),
        None => format!("diagnose: {} states", states.len()),
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_prefix_drops_a_short_last_interval() {
        assert_eq!(uniform_prefix(&[0.0, 0.1, 0.2, 0.3, 0.35]), 4);
        assert_eq!(uniform_prefix(&[0.0, 0.1]), 2);
        assert_eq!(uniform_prefix(&[0.0, 0.1, 0.2]), 3);
    }
}
