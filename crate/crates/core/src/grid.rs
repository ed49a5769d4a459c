//! Uniform mesh of the unit interval, finite-difference operators with
//! one-sided boundary closures, quadrature and discrete Sobolev norms.

use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{FilamentError, Result};

pub type Vec3 = Vector3<f64>;

/// Highest derivative order the stencil generator supports. The public
/// [`derivative`] is restricted to orders 1..=4; boundary jet estimates use
/// the higher ones.
pub(crate) const MAX_STENCIL_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n_cells: usize,
    h: f64,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 8;

    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < Self::MIN_CELLS {
            return Err(FilamentError::InvalidGrid(format!(
                "n_cells = {n_cells} is below the minimum of {}",
                Self::MIN_CELLS
            )));
        }
        Ok(Self {
            n_cells,
            h: 1.0 / n_cells as f64,
        })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node coordinate `s_i = i h`; the last node is exactly 1.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            1.0
        } else {
            i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |i| self.node(i))
    }

    /// Grid with twice as many cells.
    pub fn refined(&self) -> Self {
        Self {
            n_cells: 2 * self.n_cells,
            h: 0.5 / self.n_cells as f64,
        }
    }

    /// `GridMismatch` unless both grids have the same number of cells.
    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self.n_cells != other.n_cells {
            return Err(FilamentError::GridMismatch {
                left: self.n_cells,
                right: other.n_cells,
            });
        }
        Ok(())
    }
}

/// A 3-vector sampled at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VecField {
    grid: GridSpec,
    data: Vec<Vec3>,
}

impl VecField {
    pub fn new(grid: GridSpec, data: Vec<Vec3>) -> Result<Self> {
        if data.len() != grid.n_nodes() {
            return Err(FilamentError::InvalidField(format!(
                "expected {} samples, got {}",
                grid.n_nodes(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(FilamentError::InvalidField(format!(
                "non-finite entry at node {i}"
            )));
        }
        Ok(Self { grid, data })
    }

    /// Internal constructor for data produced by finite arithmetic on valid fields.
    pub(crate) fn from_parts(grid: GridSpec, data: Vec<Vec3>) -> Self {
        debug_assert_eq!(data.len(), grid.n_nodes());
        Self { grid, data }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64) -> Vec3) -> Result<Self> {
        Self::new(grid, grid.nodes().map(&mut f).collect())
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, Vec3::zeros())
    }

    pub fn constant(grid: GridSpec, value: Vec3) -> Self {
        Self {
            grid,
            data: vec![value; grid.n_nodes()],
        }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn data(&self) -> &[Vec3] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Vec3> {
        self.data
    }

    #[inline]
    pub fn first(&self) -> Vec3 {
        self.data[0]
    }

    #[inline]
    pub fn last(&self) -> Vec3 {
        self.data[self.data.len() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.iter().all(|c| c.is_finite()))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|v| v * alpha)
    }

    pub fn map(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self::from_parts(self.grid, self.data.iter().map(f).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(&Vec3, &Vec3) -> Vec3) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_parts(
            self.grid,
            self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        ))
    }

    pub fn cross(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a.cross(b))
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> Result<Vec<f64>> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.dot(b)).collect())
    }

    /// Pointwise product with a scalar field.
    pub fn scale_by(&self, weights: &[f64]) -> Self {
        debug_assert_eq!(weights.len(), self.data.len());
        Self::from_parts(
            self.grid,
            self.data.iter().zip(weights).map(|(v, w)| v * *w).collect(),
        )
    }

    pub fn norms(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm()).collect()
    }

    /// Discrete sup norm, `max_i |f_i|`.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest deviation of `|f_i|` from one.
    pub fn unit_drift(&self) -> f64 {
        self.data
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

impl Add<&VecField> for &VecField {
    type Output = VecField;
    fn add(self, rhs: &VecField) -> VecField {
        self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in field addition")
    }
}

impl Sub<&VecField> for &VecField {
    type Output = VecField;
    fn sub(self, rhs: &VecField) -> VecField {
        self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in field subtraction")
    }
}

/// A field whose samples are unit vectors to within `unit_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVecField(VecField);

impl UnitVecField {
    pub const DEFAULT_UNIT_TOL: f64 = 1e-10;

    pub fn new(field: VecField, unit_tol: f64) -> Result<Self> {
        let drift = field.unit_drift();
        if drift > unit_tol {
            return Err(FilamentError::InvalidField(format!(
                "field is not unit length: max | |v| - 1 | = {drift:e} > {unit_tol:e}"
            )));
        }
        Ok(Self(field))
    }

    /// Projects every sample onto the unit sphere.
    pub fn normalized(field: VecField) -> Result<Self> {
        if let Some(i) = field.data.iter().position(|v| v.norm() == 0.0) {
            return Err(FilamentError::InvalidField(format!(
                "cannot normalize zero vector at node {i}"
            )));
        }
        Ok(Self(field.map(|v| v.normalize())))
    }

    pub(crate) fn new_unchecked(field: VecField) -> Self {
        Self(field)
    }

    #[inline]
    pub fn field(&self) -> &VecField {
        &self.0
    }

    pub fn into_field(self) -> VecField {
        self.0
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.0.grid
    }

    #[inline]
    pub fn data(&self) -> &[Vec3] {
        &self.0.data
    }
}

impl std::ops::Deref for UnitVecField {
    type Target = VecField;
    fn deref(&self) -> &VecField {
        &self.0
    }
}

/// Finite-difference weights for the `m`-th derivative at `z` on the points
/// `x` (Fornberg's recursion).
pub(crate) fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    assert!(n > m, "need more than {m} points for derivative order {m}");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Stencil rows for one derivative order on one grid: a shared interior row
/// plus explicit rows for the boundary nodes where it does not fit.
#[derive(Debug, Clone)]
pub(crate) struct DiffOperator {
    n_cells: usize,
    half_width: usize,
    interior: Vec<f64>,
    left: Vec<(usize, Vec<f64>)>,
    right: Vec<(usize, Vec<f64>)>,
}

impl DiffOperator {
    pub(crate) fn new(grid: GridSpec, order: usize) -> Result<Self> {
        if order == 0 || order > MAX_STENCIL_ORDER {
            return Err(FilamentError::UnsupportedOrder {
                order,
                max: MAX_STENCIL_ORDER,
            });
        }
        let needed = order + 4;
        let n = grid.n_cells();
        if n < needed {
            return Err(FilamentError::InsufficientResolution {
                order,
                needed,
                n_cells: n,
            });
        }
        let scale = grid.h().powi(-(order as i32));
        let r = (order + 1) / 2;
        let offsets: Vec<f64> = (-(r as i64)..=r as i64).map(|o| o as f64).collect();
        let interior: Vec<f64> = fd_weights(0.0, &offsets, order)
            .into_iter()
            .map(|w| w * scale)
            .collect();

        // One-sided closures use order + 2 points, which keeps formal order 2.
        let width = order + 2;
        let pts: Vec<f64> = (0..width).map(|p| p as f64).collect();
        let left = (0..r)
            .map(|i| {
                let w = fd_weights(i as f64, &pts, order);
                (i, w.into_iter().map(|w| w * scale).collect())
            })
            .collect();
        let right = (0..r)
            .map(|k| {
                // node n - k, points n - width + 1 ..= n
                let w = fd_weights((width - 1 - k) as f64, &pts, order);
                (n - k, w.into_iter().map(|w| w * scale).collect())
            })
            .collect();
        Ok(Self {
            n_cells: n,
            half_width: r,
            interior,
            left,
            right,
        })
    }

    pub(crate) fn apply<T>(&self, values: &[T]) -> Vec<T>
    where
        T: Copy + AddAssign + Mul<f64, Output = T> + Default,
    {
        let n = self.n_cells;
        let r = self.half_width;
        debug_assert_eq!(values.len(), n + 1);
        let mut out = vec![T::default(); n + 1];
        for i in r..=n - r {
            let mut acc = T::default();
            for (k, w) in self.interior.iter().enumerate() {
                acc += values[i + k - r] * *w;
            }
            out[i] = acc;
        }
        for (i, w) in &self.left {
            let mut acc = T::default();
            for (k, wk) in w.iter().enumerate() {
                acc += values[k] * *wk;
            }
            out[*i] = acc;
        }
        let width = self.right.first().map_or(0, |(_, w)| w.len());
        for (i, w) in &self.right {
            let mut acc = T::default();
            for (k, wk) in w.iter().enumerate() {
                acc += values[n + 1 - width + k] * *wk;
            }
            out[*i] = acc;
        }
        out
    }

    /// Value of the derivative at a single node.
    pub(crate) fn apply_at<T>(&self, values: &[T], i: usize) -> T
    where
        T: Copy + AddAssign + Mul<f64, Output = T> + Default,
    {
        let n = self.n_cells;
        let r = self.half_width;
        let mut acc = T::default();
        if let Some((_, w)) = self.left.iter().find(|(j, _)| *j == i) {
            for (k, wk) in w.iter().enumerate() {
                acc += values[k] * *wk;
            }
        } else if let Some((_, w)) = self.right.iter().find(|(j, _)| *j == i) {
            let width = w.len();
            for (k, wk) in w.iter().enumerate() {
                acc += values[n + 1 - width + k] * *wk;
            }
        } else {
            for (k, w) in self.interior.iter().enumerate() {
                acc += values[i + k - r] * *w;
            }
        }
        acc
    }
}

/// `k`-th derivative of a vector field, `k` in 1..=4.
///
/// Interior nodes use central differences, the nodes next to the ends use
/// one-sided stencils; both are second order.
pub fn derivative(f: &VecField, order: usize) -> Result<VecField> {
    if !(1..=4).contains(&order) {
        return Err(FilamentError::UnsupportedOrder { order, max: 4 });
    }
    let op = DiffOperator::new(f.grid, order)?;
    Ok(VecField::from_parts(f.grid, op.apply(&f.data)))
}

/// Derivative of arbitrary node values (scalars, vectors, complex numbers).
pub fn derivative_values<T>(grid: GridSpec, values: &[T], order: usize) -> Result<Vec<T>>
where
    T: Copy + AddAssign + Mul<f64, Output = T> + Default,
{
    if values.len() != grid.n_nodes() {
        return Err(FilamentError::InvalidField(format!(
            "expected {} samples, got {}",
            grid.n_nodes(),
            values.len()
        )));
    }
    Ok(DiffOperator::new(grid, order)?.apply(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    #[default]
    Trapezoid,
    Simpson,
}

/// Integral over [0, 1] of node values.
pub fn integrate(grid: GridSpec, values: &[f64], rule: Quadrature) -> Result<f64> {
    let n = grid.n_cells();
    if values.len() != n + 1 {
        return Err(FilamentError::InvalidField(format!(
            "expected {} samples, got {}",
            n + 1,
            values.len()
        )));
    }
    let h = grid.h();
    match rule {
        Quadrature::Trapezoid => {
            let inner: f64 = values[1..n].iter().sum();
            Ok(h * (inner + 0.5 * (values[0] + values[n])))
        }
        Quadrature::Simpson => {
            if n % 2 != 0 {
                return Err(FilamentError::InvalidGrid(format!(
                    "Simpson quadrature needs an even number of cells, got {n}"
                )));
            }
            let mut acc = values[0] + values[n];
            for (i, v) in values.iter().enumerate().take(n).skip(1) {
                acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            Ok(acc * h / 3.0)
        }
    }
}

/// Cumulative trapezoid integral `F_i = ∫_0^{s_i} f ds`.
pub fn cumulative_integral<T>(grid: GridSpec, values: &[T]) -> Vec<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
{
    let h = grid.h();
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::default();
    out.push(acc);
    for w in values.windows(2) {
        acc = acc + (w[0] + w[1]) * (0.5 * h);
        out.push(acc);
    }
    out
}

/// L² inner product `(f, g)` with the trapezoid rule.
pub fn l2_inner(f: &VecField, g: &VecField) -> Result<f64> {
    l2_inner_with(f, g, Quadrature::Trapezoid)
}

pub fn l2_inner_with(f: &VecField, g: &VecField, rule: Quadrature) -> Result<f64> {
    let pointwise = f.dot(g)?;
    integrate(f.grid, &pointwise, rule)
}

pub fn l2_norm(f: &VecField) -> Result<f64> {
    Ok(l2_inner(f, f)?.max(0.0).sqrt())
}

/// Discrete H^m norm: `sqrt(sum_{j<=m} ||d^j f||^2)`.
pub fn sobolev_norm(f: &VecField, m: usize) -> Result<f64> {
    let mut total = l2_inner(f, f)?;
    for j in 1..=m {
        let d = derivative(f, j)?;
        total += l2_inner(&d, &d)?;
    }
    Ok(total.max(0.0).sqrt())
}
