//! Truncated Taylor series ("jets") of scalar and 3-vector functions of
//! arclength about a single point.
//!
//! Coefficients are stored normalized, `c_k = f^(k)(s0) / k!`. Products are
//! Cauchy products truncated to the shorter operand; differentiation drops
//! the highest coefficient.

use crate::grid::Vec3;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarJet(Vec<f64>);

impl ScalarJet {
    pub fn from_coefficients(c: Vec<f64>) -> Self {
        Self(c)
    }

    pub fn from_derivatives(d: &[f64]) -> Self {
        Self(d.iter().enumerate().map(|(k, v)| v / factorial(k)).collect())
    }

    pub fn constant(value: f64, len: usize) -> Self {
        let mut c = vec![0.0; len];
        if len > 0 {
            c[0] = value;
        }
        Self(c)
    }

    /// The identity function `s` expanded about `s0`.
    pub fn variable(s0: f64, len: usize) -> Self {
        let mut c = vec![0.0; len];
        if len > 0 {
            c[0] = s0;
        }
        if len > 1 {
            c[1] = 1.0;
        }
        Self(c)
    }

    /// Jet of `sin(w s + phase)` about `s0`.
    pub fn sin_affine(w: f64, phase: f64, s0: f64, len: usize) -> Self {
        let x = w * s0 + phase;
        let d: Vec<f64> = (0..len)
            .map(|k| {
                let base = match k % 4 {
                    0 => x.sin(),
                    1 => x.cos(),
                    2 => -x.sin(),
                    _ => -x.cos(),
                };
                base * w.powi(k as i32)
            })
            .collect();
        Self::from_derivatives(&d)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn derivative_value(&self, k: usize) -> f64 {
        self.0[k] * factorial(k)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|c| c * a).collect())
    }

    pub fn add_constant(&self, a: f64) -> Self {
        let mut c = self.0.clone();
        c[0] += a;
        Self(c)
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.len().min(o.len());
        Self(
            (0..n)
                .map(|k| (0..=k).map(|j| self.0[j] * o.0[k - j]).sum())
                .collect(),
        )
    }

    pub fn powi(&self, p: u32) -> Self {
        let mut out = Self::constant(1.0, self.len());
        for _ in 0..p {
            out = out.mul(self);
        }
        out
    }

    pub fn recip(&self) -> Self {
        let a = &self.0;
        let mut r = vec![0.0; a.len()];
        r[0] = 1.0 / a[0];
        for k in 1..a.len() {
            let s: f64 = (1..=k).map(|j| a[j] * r[k - j]).sum();
            r[k] = -s / a[0];
        }
        Self(r)
    }

    pub fn sqrt(&self) -> Self {
        let a = &self.0;
        let mut r = vec![0.0; a.len()];
        r[0] = a[0].sqrt();
        for k in 1..a.len() {
            let s: f64 = (1..k).map(|j| r[j] * r[k - j]).sum();
            r[k] = (a[k] - s) / (2.0 * r[0]);
        }
        Self(r)
    }

    pub fn ds(&self) -> Self {
        Self(
            (1..self.len())
                .map(|k| k as f64 * self.0[k])
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet3(Vec<Vec3>);

impl Jet3 {
    pub fn from_coefficients(c: Vec<Vec3>) -> Self {
        Self(c)
    }

    /// Builds a jet from derivative values `[f, f', f'', ...]`.
    pub fn from_derivatives(d: &[Vec3]) -> Self {
        Self(d.iter().enumerate().map(|(k, v)| v / factorial(k)).collect())
    }

    pub fn from_components(x: &ScalarJet, y: &ScalarJet, z: &ScalarJet) -> Self {
        let n = x.len().min(y.len()).min(z.len());
        Self(
            (0..n)
                .map(|k| Vec3::new(x.0[k], y.0[k], z.0[k]))
                .collect(),
        )
    }

    pub fn constant(value: Vec3, len: usize) -> Self {
        let mut c = vec![Vec3::zeros(); len];
        if len > 0 {
            c[0] = value;
        }
        Self(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coefficients(&self) -> &[Vec3] {
        &self.0
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self(self.0[..len.min(self.len())].to_vec())
    }

    pub fn value(&self) -> Vec3 {
        self.0[0]
    }

    pub fn derivative_value(&self, k: usize) -> Vec3 {
        self.0[k] * factorial(k)
    }

    pub fn derivatives(&self) -> Vec<Vec3> {
        (0..self.len()).map(|k| self.derivative_value(k)).collect()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|c| c * a).collect())
    }

    pub fn scale_by(&self, s: &ScalarJet) -> Self {
        let n = self.len().min(s.len());
        Self(
            (0..n)
                .map(|k| (0..=k).map(|j| self.0[j] * s.0[k - j]).sum())
                .collect(),
        )
    }

    pub fn cross(&self, o: &Self) -> Self {
        let n = self.len().min(o.len());
        Self(
            (0..n)
                .map(|k| (0..=k).map(|j| self.0[j].cross(&o.0[k - j])).sum())
                .collect(),
        )
    }

    pub fn dot(&self, o: &Self) -> ScalarJet {
        let n = self.len().min(o.len());
        ScalarJet(
            (0..n)
                .map(|k| (0..=k).map(|j| self.0[j].dot(&o.0[k - j])).sum())
                .collect(),
        )
    }

    pub fn ds(&self) -> Self {
        Self(
            (1..self.len())
                .map(|k| self.0[k] * k as f64)
                .collect(),
        )
    }

    /// `w / |w|` as a jet. Requires `w(s0) != 0`.
    pub fn normalized(&self) -> Self {
        let inv_norm = self.dot(self).sqrt().recip();
        self.scale_by(&inv_norm)
    }
}
