//! Initial tangent fields: closed-form builtins with exact boundary jets,
//! and grid-sampled data read from files.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FilamentError, Result};
use crate::grid::{GridSpec, UnitVecField, Vec3, VecField};
use crate::jet::{Jet3, ScalarJet};

/// Samples closer than this to the prescribed boundary vector are snapped
/// onto it, so boundary rows hold exactly.
const PIN_TOL: f64 = 1e-12;

pub fn e3() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// A tangent field on [0, 1].
pub trait Datum: Send + Sync + std::fmt::Debug {
    fn name(&self) -> String;

    fn eval(&self, s: f64) -> Vec3;

    /// Taylor jet of length `len` about `s`, when available in closed form.
    fn jet(&self, _s: f64, _len: usize) -> Option<Jet3> {
        None
    }

    /// Node samples, normalized, with the end values snapped onto the
    /// exact boundary vectors when they agree to round-off.
    fn sample(&self, grid: GridSpec) -> Result<UnitVecField> {
        let mut data: Vec<Vec3> = grid.nodes().map(|s| self.eval(s)).collect();
        for v in data.iter_mut() {
            let n = v.norm();
            if !(n.is_finite() && n > 0.0) {
                return Err(FilamentError::InvalidField(format!(
                    "datum '{}' has a zero or non-finite sample",
                    self.name()
                )));
            }
            *v /= n;
        }
        let last = data.len() - 1;
        if (data[last] - e3()).norm() <= PIN_TOL {
            data[last] = e3();
        }
        if let Some(j) = self.jet(0.0, 1) {
            let a = j.value();
            if (data[0] - a).norm() <= PIN_TOL {
                data[0] = a;
            }
        }
        UnitVecField::new(VecField::new(grid, data)?, UnitVecField::DEFAULT_UNIT_TOL)
    }
}

fn cos_jet(w: f64, s0: f64, len: usize) -> ScalarJet {
    ScalarJet::sin_affine(w, FRAC_PI_2, s0, len)
}

fn sin_jet(w: f64, s0: f64, len: usize) -> ScalarJet {
    ScalarJet::sin_affine(w, 0.0, s0, len)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantE3;

impl Datum for ConstantE3 {
    fn name(&self) -> String {
        "constant-e3".into()
    }

    fn eval(&self, _s: f64) -> Vec3 {
        e3()
    }

    fn jet(&self, _s: f64, len: usize) -> Option<Jet3> {
        Some(Jet3::constant(e3(), len))
    }
}

/// `(cos(πs/2), 0, sin(πs/2))`, running from `(1,0,0)` to `e3`. A steady
/// state of both the original and the regularized equation.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuarterCircle;

impl QuarterCircle {
    pub fn jet_at(s: f64, len: usize) -> Jet3 {
        let zero = ScalarJet::constant(0.0, len);
        Jet3::from_components(&cos_jet(FRAC_PI_2, s, len), &zero, &sin_jet(FRAC_PI_2, s, len))
    }
}

impl Datum for QuarterCircle {
    fn name(&self) -> String {
        "quarter-circle".into()
    }

    fn eval(&self, s: f64) -> Vec3 {
        let t = FRAC_PI_2 * s;
        Vec3::new(t.cos(), 0.0, t.sin())
    }

    fn jet(&self, s: f64, len: usize) -> Option<Jet3> {
        Some(Self::jet_at(s, len))
    }
}

/// Tangent of a circular helix, `(cosα cos ks, cosα sin ks, sinα)`.
#[derive(Debug, Clone, Copy)]
pub struct HelixTangent {
    pub alpha: f64,
    pub k: f64,
}

impl Default for HelixTangent {
    fn default() -> Self {
        Self { alpha: 0.5, k: 3.0 }
    }
}

impl Datum for HelixTangent {
    fn name(&self) -> String {
        "helix-tangent".into()
    }

    fn eval(&self, s: f64) -> Vec3 {
        let (ca, sa) = (self.alpha.cos(), self.alpha.sin());
        Vec3::new(ca * (self.k * s).cos(), ca * (self.k * s).sin(), sa)
    }

    fn jet(&self, s: f64, len: usize) -> Option<Jet3> {
        let (ca, sa) = (self.alpha.cos(), self.alpha.sin());
        Some(Jet3::from_components(
            &cos_jet(self.k, s, len).scaled(ca),
            &sin_jet(self.k, s, len).scaled(ca),
            &ScalarJet::constant(sa, len),
        ))
    }
}

/// One Fourier mode of the perturbation: `amp * sin(freq π s + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub amp: Vec3,
    pub freq: f64,
    pub phase: f64,
}

/// Quarter circle plus a seeded smooth perturbation
/// `δ·(4s(1−s))^p·Σ modes`, renormalized.
///
/// The envelope vanishes to order `p` at both ends, so the boundary jets
/// agree with the quarter circle through derivative `p − 1` and the field
/// inherits its compatibility up to that order.
#[derive(Debug, Clone)]
pub struct PerturbedQuarterCircle {
    pub delta: f64,
    pub power: u32,
    pub seed: u64,
    modes: Vec<Mode>,
}

impl PerturbedQuarterCircle {
    pub const DEFAULT_POWER: u32 = 8;
    pub const DEFAULT_MODES: usize = 3;

    pub fn new(delta: f64, seed: u64) -> Self {
        Self::with_shape(delta, seed, Self::DEFAULT_POWER, Self::DEFAULT_MODES)
    }

    pub fn with_shape(delta: f64, seed: u64, power: u32, n_modes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = (0..n_modes)
            .map(|j| {
                let amp = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                Mode {
                    amp: amp / (j + 1) as f64,
                    freq: (j + 1) as f64,
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect();
        Self {
            delta,
            power,
            seed,
            modes,
        }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    fn envelope(&self, s: f64) -> f64 {
        (4.0 * s * (1.0 - s)).powi(self.power as i32)
    }

    fn raw(&self, s: f64) -> Vec3 {
        let bump: Vec3 = self
            .modes
            .iter()
            .map(|m| m.amp * (m.freq * std::f64::consts::PI * s + m.phase).sin())
            .sum();
        QuarterCircle.eval(s) + bump * (self.delta * self.envelope(s))
    }
}

impl Datum for PerturbedQuarterCircle {
    fn name(&self) -> String {
        "perturbed-quarter-circle".into()
    }

    fn eval(&self, s: f64) -> Vec3 {
        self.raw(s).normalize()
    }

    fn jet(&self, s: f64, len: usize) -> Option<Jet3> {
        let x = ScalarJet::variable(s, len);
        let four_s_1ms = x.mul(&x.scaled(-1.0).add_constant(1.0)).scaled(4.0);
        let env = four_s_1ms.powi(self.power).scaled(self.delta);
        let mut w = QuarterCircle::jet_at(s, len);
        for m in &self.modes {
            let wave = ScalarJet::sin_affine(m.freq * std::f64::consts::PI, m.phase, s, len).mul(&env);
            let term = Jet3::constant(m.amp, len).scale_by(&wave);
            w = w.add(&term);
        }
        Some(w.normalized())
    }
}

/// Quarter circle plus `δ·(0, s²(1−s)², 0)`, renormalized. Its end values
/// are unchanged but the first compatibility condition fails.
#[derive(Debug, Clone, Copy)]
pub struct BumpedQuarterCircle {
    pub delta: f64,
}

impl Datum for BumpedQuarterCircle {
    fn name(&self) -> String {
        "bumped-quarter-circle".into()
    }

    fn eval(&self, s: f64) -> Vec3 {
        let b = s * s * (1.0 - s) * (1.0 - s);
        (QuarterCircle.eval(s) + Vec3::new(0.0, self.delta * b, 0.0)).normalize()
    }

    fn jet(&self, s: f64, len: usize) -> Option<Jet3> {
        let x = ScalarJet::variable(s, len);
        let q = x.mul(&x.scaled(-1.0).add_constant(1.0));
        let b = q.mul(&q).scaled(self.delta);
        let zero = ScalarJet::constant(0.0, len);
        let bump = Jet3::from_components(&zero, &b, &zero);
        Some(QuarterCircle::jet_at(s, len).add(&bump).normalized())
    }
}

/// Data given only by node samples (for example read from CSV). Off-node
/// evaluation interpolates linearly; boundary jets must come from stencils.
#[derive(Debug, Clone)]
pub struct GridDatum {
    field: UnitVecField,
    label: String,
}

impl GridDatum {
    pub fn new(field: UnitVecField, label: impl Into<String>) -> Self {
        Self {
            field,
            label: label.into(),
        }
    }

    pub fn field(&self) -> &UnitVecField {
        &self.field
    }
}

impl Datum for GridDatum {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn eval(&self, s: f64) -> Vec3 {
        let g = self.field.grid();
        let x = (s.clamp(0.0, 1.0) * g.n_cells() as f64).min(g.n_cells() as f64);
        let i = (x.floor() as usize).min(g.n_cells() - 1);
        let t = x - i as f64;
        let d = self.field.data();
        d[i] * (1.0 - t) + d[i + 1] * t
    }

    fn sample(&self, grid: GridSpec) -> Result<UnitVecField> {
        self.field.grid().ensure_same(&grid)?;
        Ok(self.field.clone())
    }
}

/// Builtin data by name, with the parameters the CLI exposes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuiltinParams {
    pub delta: f64,
    pub seed: u64,
    pub alpha: f64,
    pub k: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self {
            delta: 0.1,
            seed: 0,
            alpha: 0.5,
            k: 3.0,
        }
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "constant-e3",
    "quarter-circle",
    "helix-tangent",
    "perturbed-quarter-circle",
    "bumped-quarter-circle",
];

pub fn builtin(name: &str, p: BuiltinParams) -> Result<Arc<dyn Datum>> {
    Ok(match name {
        "constant-e3" => Arc::new(ConstantE3),
        "quarter-circle" => Arc::new(QuarterCircle),
        "helix-tangent" => Arc::new(HelixTangent {
            alpha: p.alpha,
            k: p.k,
        }),
        "perturbed-quarter-circle" => Arc::new(PerturbedQuarterCircle::new(p.delta, p.seed)),
        "bumped-quarter-circle" => Arc::new(BumpedQuarterCircle { delta: p.delta }),
        other => {
            return Err(FilamentError::Validation(format!(
                "unknown datum '{other}' (expected one of {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    })
}
