//! Compatibility conditions at the corners `s ∈ {0, 1}, t = 0`.
//!
//! `P_m` (original problem) and `Q_m` (regularized problem) express `∂_t^m v`
//! through `s`-derivatives. Both recursions are evaluated on Taylor jets:
//! on the grid every node gets a jet built from finite-difference
//! derivatives, and for closed-form data the jets are exact.
//!
//! The corrector perturbs a datum by `h` with prescribed even-order boundary
//! derivatives, found by a Newton solve on the jet, so that the regularized
//! compatibility conditions hold.

use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::datum::{e3, Datum};
use crate::error::{FilamentError, Result};
use crate::grid::{DiffOperator, GridSpec, UnitVecField, Vec3, VecField};
use crate::jet::{Jet3, ScalarJet};

/// Highest compatibility order handled.
pub const M_MAX: usize = 3;

/// Default tolerance for compatibility checks: stencil error floor.
pub fn default_tol(grid: GridSpec) -> f64 {
    (10.0 * grid.h() * grid.h()).max(1e-8)
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_order(m: usize) -> Result<()> {
    if m > M_MAX {
        return Err(FilamentError::UnsupportedOrder { order: m, max: M_MAX });
    }
    Ok(())
}

/// `[Q_0, ..., Q_m]` on a jet; `eps = 0` gives `P_j`. `Q_j` has length
/// `v.len() - 2j`.
pub fn q_sequence(v: &Jet3, eps: f64, m: usize) -> Vec<Jet3> {
    assert!(v.len() > 2 * m, "jet of length {} is too short for order {m}", v.len());
    let mut q = vec![v.clone()];
    let mut dq = vec![v.ds()];
    let mut d2q = vec![dq[0].ds()];
    for n in 1..=m {
        let mut acc = Jet3::constant(Vec3::zeros(), v.len() - 2 * n);
        for j in 0..n {
            let term = q[j].cross(&d2q[n - 1 - j]).scaled(binom(n - 1, j));
            acc = acc.add(&term);
        }
        if eps != 0.0 {
            acc = acc.add(&d2q[n - 1].scaled(eps));
            for j in 0..n {
                for k in 0..n - j {
                    let w = binom(n - 1, j) * binom(n - 1 - j, k) * eps;
                    let dot = dq[j].dot(&dq[k]);
                    acc = acc.add(&q[n - 1 - j - k].scale_by(&dot).scaled(w));
                }
            }
        }
        dq.push(acc.ds());
        d2q.push(dq[n].ds());
        q.push(acc);
    }
    q
}

/// Jets of length `len` at every node, from finite-difference derivatives.
fn node_jets(v: &VecField, len: usize) -> Result<Vec<Jet3>> {
    let grid = v.grid();
    let mut derivs = vec![v.data().to_vec()];
    for k in 1..len {
        derivs.push(DiffOperator::new(grid, k)?.apply(v.data()));
    }
    Ok((0..grid.n_nodes())
        .map(|i| {
            let d: Vec<Vec3> = derivs.iter().map(|dk| dk[i]).collect();
            Jet3::from_derivatives(&d)
        })
        .collect())
}

/// Jet of length `len` at a single node.
pub fn grid_jet(v: &VecField, node: usize, len: usize) -> Result<Jet3> {
    let grid = v.grid();
    let mut d = vec![v.data()[node]];
    for k in 1..len {
        d.push(DiffOperator::new(grid, k)?.apply_at(v.data(), node));
    }
    Ok(Jet3::from_derivatives(&d))
}

fn eval_recursion(v: &UnitVecField, eps: f64, m: usize) -> Result<VecField> {
    check_order(m)?;
    let jets = node_jets(v.field(), 2 * m + 1)?;
    let data = jets.iter().map(|j| q_sequence(j, eps, m)[m].value()).collect();
    VecField::new(v.grid(), data)
}

/// `P_m(v)` at every node.
pub fn eval_p(v: &UnitVecField, m: usize) -> Result<VecField> {
    eval_recursion(v, 0.0, m)
}

/// `Q_m(v)` at every node for the regularization parameter `eps`.
pub fn eval_q(v: &UnitVecField, eps: f64, m: usize) -> Result<VecField> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(FilamentError::Validation(format!("eps must be finite and >= 0, got {eps}")));
    }
    eval_recursion(v, eps, m)
}

/// Pointwise `Σ_k C(m,k) Q_k·Q_{m−k}`, which vanishes for unit fields
/// because `∂_t^m |v|² = 0`.
pub fn orthogonality_defect(v: &UnitVecField, eps: f64, m: usize) -> Result<Vec<f64>> {
    check_order(m)?;
    let jets = node_jets(v.field(), 2 * m + 1)?;
    Ok(jets
        .iter()
        .map(|j| {
            let q = q_sequence(j, eps, m);
            (0..=m)
                .map(|k| binom(m, k) * q[k].value().dot(&q[m - k].value()))
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    pub order: usize,
    pub residual_left: Vec3,
    pub residual_right: Vec3,
    pub norm_left: f64,
    pub norm_right: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CompatReport {
    fn new(order: usize, left: Vec3, right: Vec3, tol: f64) -> Self {
        let (nl, nr) = (left.norm(), right.norm());
        Self {
            order,
            residual_left: left,
            residual_right: right,
            norm_left: nl,
            norm_right: nr,
            tol,
            passed: nl.max(nr) <= tol,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.norm_left.max(self.norm_right)
    }
}

pub fn all_passed(reports: &[CompatReport]) -> bool {
    reports.iter().all(|r| r.passed)
}

fn validate_a(a: &Vec3) -> Result<()> {
    if !((a.norm() - 1.0).abs() <= 1e-12) {
        return Err(FilamentError::Validation(format!(
            "boundary vector a must be a unit vector, |a| = {}",
            a.norm()
        )));
    }
    Ok(())
}

/// Compatibility reports for orders `0..=up_to` from boundary jets.
/// `eps = 0` checks the original problem, `eps > 0` the regularized one.
pub fn check_compat_jets(
    left: &Jet3,
    right: &Jet3,
    a: Vec3,
    eps: f64,
    up_to: usize,
    tol: f64,
) -> Result<Vec<CompatReport>> {
    validate_a(&a)?;
    check_order(up_to)?;
    let mut out = vec![CompatReport::new(0, left.value() - a, right.value() - e3(), tol)];
    if up_to > 0 {
        let ql = q_sequence(&left.truncated(2 * up_to + 1), eps, up_to);
        let qr = q_sequence(&right.truncated(2 * up_to + 1), eps, up_to);
        for k in 1..=up_to {
            out.push(CompatReport::new(k, ql[k].value(), qr[k].value(), tol));
        }
    }
    Ok(out)
}

/// Compatibility reports for a grid field; boundary derivatives come from
/// one-sided stencils.
pub fn check_compat(
    v0: &UnitVecField,
    a: Vec3,
    eps: f64,
    up_to: usize,
    tol: f64,
) -> Result<Vec<CompatReport>> {
    validate_a(&a)?;
    check_order(up_to)?;
    let len = 2 * up_to + 1;
    let left = grid_jet(v0.field(), 0, len)?;
    let right = grid_jet(v0.field(), v0.grid().n_cells(), len)?;
    check_compat_jets(&left, &right, a, eps, up_to, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Boundary derivatives `∂_s^j h` for `j = 0..=2m`; only even `j ≥ 2` are
/// nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryJet {
    pub side: Side,
    pub coefficients: Vec<Vec3>,
}

impl BoundaryJet {
    pub fn zero(side: Side, order: usize) -> Self {
        Self {
            side,
            coefficients: vec![Vec3::zeros(); 2 * order + 1],
        }
    }

    pub fn max_coefficient(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// The even polynomial `Σ c_{2j} x^{2j} / (2j)!` as a jet in `x`.
    fn poly_jet(&self, x: &ScalarJet) -> Jet3 {
        let len = x.len();
        let mut out = Jet3::constant(Vec3::zeros(), len);
        let mut fact = 1.0;
        for (j, c) in self.coefficients.iter().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            if c.norm() > 0.0 {
                let p = x.powi(j as u32).scaled(1.0 / fact);
                out = out.add(&Jet3::constant(*c, len).scale_by(&p));
            }
        }
        out
    }

    fn poly(&self, x: f64) -> Vec3 {
        let mut out = Vec3::zeros();
        let mut term = 1.0;
        for (j, c) in self.coefficients.iter().enumerate() {
            if j > 0 {
                term *= x / j as f64;
            }
            out += c * term;
        }
        out
    }
}

fn smooth_step(x: f64) -> f64 {
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let (a, b) = (f(x), f(1.0 - x));
    a / (a + b)
}

/// Smooth cut-off equal to 1 on `[0, 1/3]` and 0 on `[2/3, 1]`.
pub fn psi0(s: f64) -> f64 {
    smooth_step(3.0 * (2.0 / 3.0 - s))
}

/// Mirror of [`psi0`]; `psi0 + psi1 = 1`.
pub fn psi1(s: f64) -> f64 {
    1.0 - psi0(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorOptions {
    pub eps_star: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Tolerance of the incoming compatibility check; `None` uses
    /// [`default_tol`].
    pub tol_in: Option<f64>,
    pub tol_out: Option<f64>,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        Self {
            eps_star: 0.2,
            newton_tol: 1e-12,
            max_iter: 50,
            tol_in: None,
            tol_out: None,
        }
    }
}

/// The perturbation `h = ψ0·poly_left(s) + ψ1·poly_right(s − 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCorrection {
    pub left: BoundaryJet,
    pub right: BoundaryJet,
}

impl BoundaryCorrection {
    pub fn h(&self, s: f64) -> Vec3 {
        let (p0, p1) = (psi0(s), psi1(s));
        let mut out = Vec3::zeros();
        if p0 > 0.0 {
            out += self.left.poly(s) * p0;
        }
        if p1 > 0.0 {
            out += self.right.poly(s - 1.0) * p1;
        }
        out
    }

    /// Jet of `h` about `s`, where the cut-offs are locally constant.
    pub fn h_jet(&self, s: f64, len: usize) -> Option<Jet3> {
        if s <= 1.0 / 3.0 {
            Some(self.left.poly_jet(&ScalarJet::variable(s, len)))
        } else if s >= 2.0 / 3.0 {
            Some(self.right.poly_jet(&ScalarJet::variable(s - 1.0, len)))
        } else {
            None
        }
    }

    pub fn max_coefficient(&self) -> f64 {
        self.left.max_coefficient().max(self.right.max_coefficient())
    }
}

/// Solve statistics for one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetSolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Finds the even boundary derivatives of `h` making
/// `Q_k(N(v + h)) = 0` at the boundary point for `k = 1..=order`.
///
/// Each order is solved in turn for its top coefficient `c = ∂^{2k} h`.
/// The component of `c` along `v` is invisible after normalization, so the
/// residual is augmented by `(v·c) v`, which pins `c ⊥ v`.
pub fn solve_boundary_jet(
    v_jet: &Jet3,
    eps: f64,
    order: usize,
    side: Side,
    opts: &CorrectorOptions,
) -> Result<(BoundaryJet, JetSolveStats)> {
    check_order(order)?;
    let v = v_jet.value();
    let mut jet = BoundaryJet::zero(side, order);
    let mut stats = JetSolveStats {
        iterations: 0,
        residual: 0.0,
    };
    for k in 1..=order {
        let len = 2 * k + 1;
        let base = v_jet.truncated(len);
        let lower = jet.coefficients[..len].to_vec();
        let resid = |c: &Vec3| -> Vec3 {
            let mut d = lower.clone();
            d[2 * k] = *c;
            let w = base.add(&Jet3::from_derivatives(&d)).normalized();
            q_sequence(&w, eps, k)[k].value() + v * v.dot(c)
        };
        let (c, its, res) = newton3(resid, opts).map_err(|(residual, iterations)| {
            FilamentError::JetSolve {
                side: side.label(),
                order: k,
                residual,
                iterations,
            }
        })?;
        jet.coefficients[2 * k] = c;
        stats.iterations += its;
        stats.residual = stats.residual.max(res);
    }
    Ok((jet, stats))
}

/// Damped Newton on a map `R³ → R³` with a central-difference Jacobian.
/// On failure returns `(residual, iterations)`.
fn newton3(
    f: impl Fn(&Vec3) -> Vec3,
    opts: &CorrectorOptions,
) -> std::result::Result<(Vec3, usize, f64), (f64, usize)> {
    let mut c = Vec3::zeros();
    let mut r = f(&c);
    let scale = r.norm().max(1.0);
    let mut rn = r.norm();
    for it in 0..opts.max_iter {
        if rn <= opts.newton_tol * scale {
            return Ok((c, it, rn));
        }
        let delta = 1e-4 * c.norm().max(1.0);
        let mut jac = Matrix3::zeros();
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = delta;
            let col = (f(&(c + e)) - f(&(c - e))) / (2.0 * delta);
            jac.set_column(i, &col);
        }
        let Some(step) = jac.lu().solve(&r) else {
            return Err((rn, it));
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = c - step * lambda;
            let rt = f(&trial);
            if rt.norm() < rn {
                c = trial;
                r = rt;
                rn = r.norm();
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn <= opts.newton_tol * scale {
        Ok((c, opts.max_iter, rn))
    } else {
        Err((rn, opts.max_iter))
    }
}

/// `N(base + h)` for a closed-form or sampled base datum.
#[derive(Debug, Clone)]
pub struct CorrectedDatum {
    base: Arc<dyn Datum>,
    correction: BoundaryCorrection,
    label: String,
}

impl CorrectedDatum {
    pub fn new(base: Arc<dyn Datum>, correction: BoundaryCorrection) -> Self {
        let label = format!("corrected({})", base.name());
        Self {
            base,
            correction,
            label,
        }
    }

    pub fn correction(&self) -> &BoundaryCorrection {
        &self.correction
    }
}

impl Datum for CorrectedDatum {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn eval(&self, s: f64) -> Vec3 {
        (self.base.eval(s) + self.correction.h(s)).normalize()
    }

    fn jet(&self, s: f64, len: usize) -> Option<Jet3> {
        let b = self.base.jet(s, len)?;
        let h = self.correction.h_jet(s, len)?;
        Some(b.add(&h).normalized())
    }
}

/// Result of [`correct_datum`].
#[derive(Debug, Clone)]
pub struct DatumCorrection {
    pub corrected: UnitVecField,
    pub correction: BoundaryCorrection,
    /// Regularized compatibility of the corrected boundary jets (exact
    /// algebra, before grid sampling).
    pub jet_reports: Vec<CompatReport>,
    /// The same check on the sampled field with one-sided stencils.
    pub grid_reports: Vec<CompatReport>,
    pub stats: [JetSolveStats; 2],
    /// `max |coefficient| / eps`.
    pub coefficient_constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionSummary {
    pub eps: f64,
    pub target_order: usize,
    pub correction: BoundaryCorrection,
    pub coefficient_constant: f64,
    pub newton_iterations: [usize; 2],
    pub newton_residual: [f64; 2],
    pub jet_reports: Vec<CompatReport>,
    pub grid_reports: Vec<CompatReport>,
}

impl DatumCorrection {
    pub fn summary(&self, eps: f64, target_order: usize) -> CorrectionSummary {
        CorrectionSummary {
            eps,
            target_order,
            correction: self.correction.clone(),
            coefficient_constant: self.coefficient_constant,
            newton_iterations: [self.stats[0].iterations, self.stats[1].iterations],
            newton_residual: [self.stats[0].residual, self.stats[1].residual],
            jet_reports: self.jet_reports.clone(),
            grid_reports: self.grid_reports.clone(),
        }
    }
}

/// Boundary jets for solving: closed form when the datum has one,
/// otherwise one-sided stencils on the sampled field.
fn boundary_jets(datum: &dyn Datum, sampled: &UnitVecField, len: usize) -> Result<(Jet3, Jet3)> {
    match (datum.jet(0.0, len), datum.jet(1.0, len)) {
        (Some(l), Some(r)) => Ok((l, r)),
        _ => Ok((
            grid_jet(sampled.field(), 0, len)?,
            grid_jet(sampled.field(), sampled.grid().n_cells(), len)?,
        )),
    }
}

fn solve_correction(
    left: &Jet3,
    right: &Jet3,
    eps: f64,
    order: usize,
    opts: &CorrectorOptions,
) -> Result<(BoundaryCorrection, [JetSolveStats; 2])> {
    let (lj, ls) = solve_boundary_jet(left, eps, order, Side::Left, opts)?;
    let (rj, rs) = solve_boundary_jet(right, eps, order, Side::Right, opts)?;
    Ok((BoundaryCorrection { left: lj, right: rj }, [ls, rs]))
}

/// Builds the corrected datum `N(v0 + h)` satisfying the regularized
/// compatibility conditions up to `target_order`.
///
/// `v0` must satisfy the original compatibility conditions up to the same
/// order (checked on its boundary jets first).
pub fn correct_datum(
    datum: Arc<dyn Datum>,
    grid: GridSpec,
    a: Vec3,
    eps: f64,
    target_order: usize,
    opts: &CorrectorOptions,
) -> Result<DatumCorrection> {
    validate_a(&a)?;
    check_order(target_order)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(FilamentError::Validation(format!("eps must be positive, got {eps}")));
    }
    if eps > opts.eps_star {
        return Err(FilamentError::EpsTooLarge {
            eps,
            eps_star: opts.eps_star,
        });
    }
    let sampled = datum.sample(grid)?;
    let len = 2 * target_order + 1;
    let (left, right) = boundary_jets(datum.as_ref(), &sampled, len)?;

    let tol_in = opts.tol_in.unwrap_or_else(|| default_tol(grid));
    let incoming = check_compat_jets(&left, &right, a, 0.0, target_order, tol_in)?;
    if let Some(bad) = incoming.iter().find(|r| !r.passed) {
        return Err(FilamentError::Validation(format!(
            "datum is not compatible at order {} (residual {:e} > tol {:e})",
            bad.order,
            bad.max_norm(),
            tol_in
        )));
    }

    let (correction, stats) = solve_correction(&left, &right, eps, target_order, opts)?;
    let data: Vec<Vec3> = sampled
        .data()
        .iter()
        .zip(grid.nodes())
        .map(|(v, s)| (v + correction.h(s)).normalize())
        .collect();
    let corrected = UnitVecField::new(VecField::new(grid, data)?, UnitVecField::DEFAULT_UNIT_TOL)?;

    let tol_out = opts.tol_out.unwrap_or_else(|| default_tol(grid));
    let lc = left.add(&correction.h_jet(0.0, len).expect("left plateau")).normalized();
    let rc = right.add(&correction.h_jet(1.0, len).expect("right plateau")).normalized();
    let jet_reports = check_compat_jets(&lc, &rc, a, eps, target_order, tol_out)?;
    let grid_reports = check_compat(&corrected, a, eps, target_order, tol_out)?;
    let coefficient_constant = correction.max_coefficient() / eps;
    Ok(DatumCorrection {
        corrected,
        correction,
        jet_reports,
        grid_reports,
        stats,
        coefficient_constant,
    })
}

/// Makes a closed-form datum compatible for the original problem up to
/// `order` with the same boundary-jet construction at `eps = 0`.
///
/// Used to manufacture test data whose regularized correction is
/// nontrivial.
pub fn make_compatible(
    datum: Arc<dyn Datum>,
    order: usize,
    opts: &CorrectorOptions,
) -> Result<CorrectedDatum> {
    let len = 2 * order + 1;
    let (Some(left), Some(right)) = (datum.jet(0.0, len), datum.jet(1.0, len)) else {
        return Err(FilamentError::Validation(
            "make_compatible needs a datum with closed-form boundary jets".into(),
        ));
    };
    let (correction, _) = solve_correction(&left, &right, 0.0, order, opts)?;
    Ok(CorrectedDatum::new(datum, correction))
}
