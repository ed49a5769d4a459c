//! Time stepping for the tangent field.
//!
//! The regularized equation is advanced by implicit Euler on the
//! frozen-coefficient linear problem `u_t = ε u_ss + b × u_ss + f`, iterated
//! a few Picard passes per step. The unregularized equation (`ε = 0`) uses
//! implicit midpoint, which rotates every node and so keeps `|v| = 1`.
//!
//! Both schemes only couple neighbouring nodes through the central second
//! difference, so each linear solve is block tridiagonal in the interior
//! unknowns `1..n-1`; the end nodes are Dirichlet and move to the
//! right-hand side.

use std::sync::Arc;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BlockTridiag;
use crate::compat::{correct_datum, CorrectorOptions};
use crate::datum::{e3, Datum};
use crate::error::{FilamentError, Result};
use crate::grid::{cumulative_integral, derivative, sobolev_norm, GridSpec, UnitVecField, Vec3, VecField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SemiImplicitLinearized,
    ImplicitMidpointSphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Renormalize {
    Off,
    ProjectEachStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub a: Vec3,
    pub renormalize: Renormalize,
    pub picard_iters: usize,
    /// Fixed-point tolerance of the midpoint iteration.
    pub newton_tol: f64,
    pub unit_tol: f64,
    pub max_fixed_point_iters: usize,
}

impl SolverConfig {
    /// Defaults for the given scheme: projection on for the semi-implicit
    /// scheme, off for midpoint.
    pub fn new(scheme: Scheme, eps: f64, dt: f64, a: Vec3) -> Self {
        let renormalize = match scheme {
            Scheme::SemiImplicitLinearized => Renormalize::ProjectEachStep,
            Scheme::ImplicitMidpointSphere => Renormalize::Off,
        };
        Self {
            eps,
            dt,
            scheme,
            a,
            renormalize,
            picard_iters: 2,
            newton_tol: 1e-12,
            unit_tol: UnitVecField::DEFAULT_UNIT_TOL,
            max_fixed_point_iters: 50,
        }
    }

    /// Semi-implicit for `eps > 0`, midpoint for `eps = 0`.
    pub fn for_eps(eps: f64, dt: f64, a: Vec3) -> Self {
        let scheme = if eps > 0.0 {
            Scheme::SemiImplicitLinearized
        } else {
            Scheme::ImplicitMidpointSphere
        };
        Self::new(scheme, eps, dt, a)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FilamentError::Validation(m));
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return bad(format!("eps must be finite and >= 0, got {}", self.eps));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be finite and > 0, got {}", self.dt));
        }
        if !((self.a.norm() - 1.0).abs() <= 1e-12) {
            return bad(format!("boundary vector a must be a unit vector, |a| = {}", self.a.norm()));
        }
        if self.picard_iters == 0 {
            return bad("picard_iters must be at least 1".into());
        }
        match self.scheme {
            Scheme::SemiImplicitLinearized if self.eps == 0.0 => {
                bad("the semi-implicit scheme needs eps > 0".into())
            }
            Scheme::ImplicitMidpointSphere if self.eps != 0.0 => {
                bad("the midpoint scheme integrates the eps = 0 equation only".into())
            }
            _ => Ok(()),
        }
    }

    /// `min(0.25 h² / max(eps, h), dt)`.
    pub fn effective_dt(&self, grid: GridSpec) -> f64 {
        let h = grid.h();
        (0.25 * h * h / self.eps.max(h)).min(self.dt)
    }
}

#[derive(Debug, Clone)]
pub struct FilamentState {
    pub t: f64,
    pub v: UnitVecField,
    pub x: Option<VecField>,
    pub step_count: usize,
    pub warnings: Vec<String>,
}

impl FilamentState {
    pub fn new(v: UnitVecField) -> Self {
        Self {
            t: 0.0,
            v,
            x: None,
            step_count: 0,
            warnings: Vec::new(),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.v.grid()
    }

    /// Starts position tracking at `x = ∫_0^s v`; the steppers then carry
    /// `x` along by the trapezoid rule.
    pub fn with_positions(mut self) -> Self {
        self.x = Some(integrate_tangent(self.v.field()));
        self
    }
}

/// `v × v_ss` at every node.
pub fn rhs_lie(v: &UnitVecField) -> Result<VecField> {
    v.cross(&derivative(v, 2)?)
}

/// `v × v_ss + ε v_ss + ε |v_s|² v` at every node.
pub fn rhs_regularized(v: &UnitVecField, eps: f64) -> Result<VecField> {
    let d1 = derivative(v, 1)?;
    let d2 = derivative(v, 2)?;
    let data = v
        .data()
        .iter()
        .zip(d1.data())
        .zip(d2.data())
        .map(|((v, v1), v2)| v.cross(v2) + (v2 + v * v1.norm_squared()) * eps)
        .collect();
    VecField::new(v.grid(), data)
}

fn cross_matrix(b: &Vec3) -> Matrix3<f64> {
    b.cross_matrix()
}

/// Interior system `u_i − c·K_i (u_{i−1} − 2u_i + u_{i+1}) = rhs_i` with
/// `K_i = kappa·I + [b_i]×`, Dirichlet ends folded into the right-hand side.
fn solve_interior(
    b: &[Vec3],
    kappa: f64,
    c: f64,
    mut rhs: Vec<Vec3>,
    left: Vec3,
    right: Vec3,
) -> Result<Vec<Vec3>> {
    let n = b.len() - 1;
    let m = n - 1;
    let mut sys = BlockTridiag::zeros(m);
    let id = Matrix3::identity();
    for row in 0..m {
        let i = row + 1;
        let k = (id * kappa + cross_matrix(&b[i])) * c;
        sys.diag[row] = id + k * 2.0;
        if row > 0 {
            sys.lower[row] = -k;
        } else {
            rhs[row] += k * left;
        }
        if row + 1 < m {
            sys.upper[row] = -k;
        } else {
            rhs[row] += k * right;
        }
    }
    sys.solve(&rhs)
}

/// `½(|D₊u|² + |D₋u|²)` at interior nodes; exact for discrete circles.
fn stretch(u: &[Vec3], h: f64) -> Vec<f64> {
    let n = u.len() - 1;
    (1..n)
        .map(|i| 0.5 * ((u[i + 1] - u[i]).norm_squared() + (u[i] - u[i - 1]).norm_squared()) / (h * h))
        .collect()
}

fn with_ends(interior: Vec<Vec3>, left: Vec3, right: Vec3) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(interior.len() + 2);
    out.push(left);
    out.extend(interior);
    out.push(right);
    out
}

fn finish_step(
    state: &FilamentState,
    data: Vec<Vec3>,
    dt: f64,
    project: bool,
    unit_tol: f64,
    warnings: Vec<String>,
) -> Result<FilamentState> {
    let grid = state.grid();
    let mut data = data;
    if project {
        for v in data.iter_mut() {
            *v = v.normalize();
        }
    }
    let field = VecField::new(grid, data)?;
    let v = if project {
        UnitVecField::new(field, unit_tol)?
    } else {
        // drift without projection is a diagnostic, not an error
        UnitVecField::new_unchecked(field)
    };
    let x = match &state.x {
        Some(x) => {
            let w = &filament_velocity(&state.v)? + &filament_velocity(&v)?;
            Some(x + &w.scaled(0.5 * dt))
        }
        None => None,
    };
    let mut all = state.warnings.clone();
    all.extend(warnings);
    Ok(FilamentState {
        t: state.t + dt,
        v,
        x,
        step_count: state.step_count + 1,
        warnings: all,
    })
}

/// One implicit-Euler step of the regularized equation with
/// `cfg.picard_iters` frozen-coefficient passes.
pub fn step_semi_implicit(state: &FilamentState, cfg: &SolverConfig) -> Result<FilamentState> {
    let dt = cfg.effective_dt(state.grid());
    step_semi_implicit_dt(state, cfg, dt)
}

fn step_semi_implicit_dt(state: &FilamentState, cfg: &SolverConfig, dt: f64) -> Result<FilamentState> {
    if !(cfg.eps > 0.0) {
        return Err(FilamentError::Validation("the semi-implicit scheme needs eps > 0".into()));
    }
    let grid = state.grid();
    let h = grid.h();
    let old = state.v.data();
    let n = grid.n_cells();
    let (left, right) = (cfg.a, e3());
    let c = dt / (h * h);
    let mut u = old.to_vec();
    let mut warnings = Vec::new();
    let mut prev_change = f64::INFINITY;
    for pass in 0..cfg.picard_iters {
        let s = stretch(&u, h);
        let rhs: Vec<Vec3> = (1..n)
            .map(|i| old[i] + u[i] * (dt * cfg.eps * s[i - 1]))
            .collect();
        let next = with_ends(solve_interior(&u, cfg.eps, c, rhs, left, right)?, left, right);
        let change = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if pass >= 2 && change > prev_change {
            warnings.push(format!(
                "step {}: Picard update grew from {prev_change:e} to {change:e}",
                state.step_count + 1
            ));
        }
        prev_change = change;
        u = next;
    }
    let project = cfg.renormalize == Renormalize::ProjectEachStep;
    finish_step(state, u, dt, project, cfg.unit_tol, warnings)
}

/// One implicit-midpoint step of `v_t = v × v_ss`:
/// `v⁺ − v = dt·m × D₂ m` with `m = (v⁺ + v)/2`, solved by fixed-point
/// iteration on the frozen factor `m ×`.
pub fn step_midpoint_sphere(state: &FilamentState, cfg: &SolverConfig) -> Result<FilamentState> {
    let dt = cfg.effective_dt(state.grid());
    step_midpoint_dt(state, cfg, dt)
}

fn step_midpoint_dt(state: &FilamentState, cfg: &SolverConfig, dt: f64) -> Result<FilamentState> {
    if cfg.eps != 0.0 {
        return Err(FilamentError::Validation(
            "the midpoint scheme integrates the eps = 0 equation only".into(),
        ));
    }
    let grid = state.grid();
    let h = grid.h();
    let old = state.v.data();
    let n = grid.n_cells();
    let (left, right) = (cfg.a, e3());
    let c = 0.5 * dt / (h * h);
    let d2_old: Vec<Vec3> = (1..n).map(|i| old[i + 1] - old[i] * 2.0 + old[i - 1]).collect();
    let mut new = old.to_vec();
    let mut change = f64::INFINITY;
    for it in 0..cfg.max_fixed_point_iters {
        let mid: Vec<Vec3> = new.iter().zip(old).map(|(a, b)| (a + b) * 0.5).collect();
        let rhs: Vec<Vec3> = (1..n)
            .map(|i| old[i] + mid[i].cross(&d2_old[i - 1]) * c)
            .collect();
        let next = with_ends(solve_interior(&mid, 0.0, c, rhs, left, right)?, left, right);
        change = next
            .iter()
            .zip(&new)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        new = next;
        if change <= cfg.newton_tol {
            let project = cfg.renormalize == Renormalize::ProjectEachStep;
            let mut st = finish_step(state, new, dt, project, cfg.unit_tol, Vec::new())?;
            if it + 1 == cfg.max_fixed_point_iters {
                st.warnings.push("midpoint iteration converged on its last pass".into());
            }
            return Ok(st);
        }
    }
    Err(FilamentError::FixedPoint {
        residual: change,
        iterations: cfg.max_fixed_point_iters,
    })
}

/// One step of whichever scheme `cfg` selects, with an explicit `dt`.
pub fn step(state: &FilamentState, cfg: &SolverConfig, dt: f64) -> Result<FilamentState> {
    match cfg.scheme {
        Scheme::SemiImplicitLinearized => step_semi_implicit_dt(state, cfg, dt),
        Scheme::ImplicitMidpointSphere => step_midpoint_dt(state, cfg, dt),
    }
}

/// Number of steps and uniform step size to reach `t_end` without
/// exceeding the effective `dt`.
pub fn step_plan(cfg: &SolverConfig, grid: GridSpec, t_end: f64) -> (usize, f64) {
    let dt = cfg.effective_dt(grid);
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}

/// Advances to `t_end`, keeping every `stride`-th state (and always the
/// first and last).
pub fn evolve(
    initial: FilamentState,
    cfg: &SolverConfig,
    t_end: f64,
    stride: usize,
) -> Result<Vec<FilamentState>> {
    cfg.validate()?;
    check_boundary(&initial.v, cfg.a)?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(FilamentError::Validation(format!("final time must be >= 0, got {t_end}")));
    }
    let stride = stride.max(1);
    let mut history = vec![initial.clone()];
    if t_end == 0.0 {
        return Ok(history);
    }
    let (steps, dt) = step_plan(cfg, initial.grid(), t_end);
    let mut state = initial;
    for k in 1..=steps {
        state = step(&state, cfg, dt)?;
        if k % stride == 0 || k == steps {
            history.push(state.clone());
        }
    }
    Ok(history)
}

/// Final state only.
pub fn evolve_to(initial: FilamentState, cfg: &SolverConfig, t_end: f64) -> Result<FilamentState> {
    cfg.validate()?;
    check_boundary(&initial.v, cfg.a)?;
    let (steps, dt) = step_plan(cfg, initial.grid(), t_end);
    let mut state = initial;
    if t_end > 0.0 {
        for _ in 0..steps {
            state = step(&state, cfg, dt)?;
        }
    }
    Ok(state)
}

fn check_boundary(v: &UnitVecField, a: Vec3) -> Result<()> {
    if (v.first() - a).norm() > 1e-12 || (v.last() - e3()).norm() > 1e-12 {
        return Err(FilamentError::Validation(format!(
            "initial field does not match the boundary data: v(0) = {:?}, v(1) = {:?}",
            v.first().as_slice(),
            v.last().as_slice()
        )));
    }
    Ok(())
}

/// `x0(s) = ∫_0^s v`, the curve through the origin with tangent `v`.
pub fn integrate_tangent(v: &VecField) -> VecField {
    VecField::from_parts(v.grid(), cumulative_integral(v.grid(), v.data()))
}

/// `x_t = v × v_s`.
pub fn filament_velocity(v: &VecField) -> Result<VecField> {
    v.cross(&derivative(v, 1)?)
}

/// Positions along a history by trapezoid-in-time accumulation of the
/// filament velocity `x_t = x_s × x_ss = v × v_s`.
pub fn reconstruct_position(history: &[FilamentState], x0: &VecField) -> Result<Vec<VecField>> {
    if history.len() < 2 {
        return Err(FilamentError::Validation(
            "position reconstruction needs at least two states".into(),
        ));
    }
    let grid = history[0].grid();
    grid.ensure_same(&x0.grid())?;
    let dt = history[1].t - history[0].t;
    for w in history.windows(2) {
        let d = w[1].t - w[0].t;
        if !(d > 0.0) || (d - dt).abs() > 1e-9 * dt.abs().max(1e-300) + 1e-12 {
            return Err(FilamentError::Validation(
                "position reconstruction needs uniformly spaced states".into(),
            ));
        }
    }
    let vel = history
        .iter()
        .map(|st| filament_velocity(&st.v))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![x0.clone()];
    let mut x = x0.clone();
    for (w, st) in vel.windows(2).zip(history.windows(2)) {
        let dt = st[1].t - st[0].t;
        x = &x + &(&w[0] + &w[1]).scaled(0.5 * dt);
        out.push(x.clone());
    }
    Ok(out)
}

/// Maximum node displacement between two fields.
pub fn max_displacement(a: &VecField, b: &VecField) -> Result<f64> {
    a.max_abs_diff(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Compatibility order the datum is corrected to before each run; 0
    /// skips correction.
    pub target_order: usize,
    pub threads: usize,
    pub corrector: CorrectorOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            target_order: 1,
            threads: 4,
            corrector: CorrectorOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    pub t_end: f64,
    pub finals: Vec<UnitVecField>,
    /// `‖v^{eps_i} − v^{eps_{i+1}}‖_{H¹}`.
    pub diffs_h1: Vec<f64>,
    /// Same in H²; recorded without a rate claim.
    pub diffs_h2: Vec<f64>,
    /// Least-squares slope of `log diffs_h1` against `log eps_i`.
    pub slope_h1: f64,
    /// Richardson extrapolation to `eps = 0` with the fitted order.
    pub extrapolated: UnitVecField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub eps: Vec<f64>,
    pub t_end: f64,
    pub diffs_h1: Vec<f64>,
    pub diffs_h2: Vec<f64>,
    pub slope_h1: f64,
}

impl SweepReport {
    pub fn summary(&self) -> SweepSummary {
        SweepSummary {
            eps: self.eps.clone(),
            t_end: self.t_end,
            diffs_h1: self.diffs_h1.clone(),
            diffs_h2: self.diffs_h2.clone(),
            slope_h1: self.slope_h1,
        }
    }
}

/// Least-squares slope of `ys` against `xs` in log-log coordinates. Pairs
/// with a non-positive entry are skipped; NaN if fewer than two remain.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs the regularized problem for each `eps` (corrected datum, same grid
/// and time), in parallel on at most `opts.threads` workers.
pub fn epsilon_sweep(
    datum: Arc<dyn Datum>,
    grid: GridSpec,
    eps_list: &[f64],
    t_end: f64,
    cfg: &SolverConfig,
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if eps_list.len() < 2 {
        return Err(FilamentError::Validation("an eps sweep needs at least two values".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(FilamentError::Validation("eps values must be strictly descending".into()));
    }
    if let Some(e) = eps_list.iter().find(|e| !(**e > 0.0 && **e <= opts.corrector.eps_star)) {
        return Err(FilamentError::Validation(format!(
            "eps = {e} is outside (0, eps_star = {}]",
            opts.corrector.eps_star
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| FilamentError::Validation(format!("thread pool: {e}")))?;
    let finals: Vec<UnitVecField> = pool.install(|| {
        eps_list
            .par_iter()
            .map(|&eps| {
                let v0 = if opts.target_order == 0 {
                    datum.sample(grid)?
                } else {
                    correct_datum(datum.clone(), grid, cfg.a, eps, opts.target_order, &opts.corrector)?
                        .corrected
                };
                let mut c = *cfg;
                c.eps = eps;
                c.scheme = Scheme::SemiImplicitLinearized;
                Ok(evolve_to(FilamentState::new(v0), &c, t_end)?.v)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut diffs_h1 = Vec::new();
    let mut diffs_h2 = Vec::new();
    for w in finals.windows(2) {
        let d = w[0].field() - w[1].field();
        diffs_h1.push(sobolev_norm(&d, 1)?);
        diffs_h2.push(sobolev_norm(&d, 2)?);
    }
    let slope_h1 = loglog_slope(&eps_list[..eps_list.len() - 1], &diffs_h1);

    let k = finals.len() - 1;
    let ratio = eps_list[k - 1] / eps_list[k];
    let p = if slope_h1.is_finite() && slope_h1 > 0.0 { slope_h1 } else { 1.0 };
    let denom = ratio.powf(p) - 1.0;
    let last = finals[k].field();
    let extrap = &last.clone() + &(last - finals[k - 1].field()).scaled(1.0 / denom);
    let extrapolated = UnitVecField::normalized(extrap)?;

    Ok(SweepReport {
        eps: eps_list.to_vec(),
        t_end,
        finals,
        diffs_h1,
        diffs_h2,
        slope_h1,
        extrapolated,
    })
}
