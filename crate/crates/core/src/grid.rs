//! Periodic grid geometry and field storage.
//!
//! The domain is the flat torus `[-1, 1)²` sampled at `x_k = -1 + k·dx`,
//! `y_j = -1 + j·dy`. Fields are stored row-major with the x-index `k`
//! fastest, so the flat offset of `(k, j)` is `j·K + k`.

use std::fmt;

use crate::error::{Error, Result};

/// Geometry of a `K × J` periodic grid on `[-1, 1]²` plus the Helmholtz length `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    k: usize,
    j: usize,
    dx: f64,
    dy: f64,
    alpha: f64,
}

impl GridSpec {
    pub fn new(k: usize, j: usize, alpha: f64) -> Result<Self> {
        if k < 3 || j < 3 {
            return Err(Error::invalid(format!(
                "grid must be at least 3x3, got {k}x{j}"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            k,
            j,
            dx: 2.0 / k as f64,
            dy: 2.0 / j as f64,
            alpha,
        })
    }

    pub fn square(n: usize, alpha: f64) -> Result<Self> {
        Self::new(n, n, alpha)
    }

    /// Number of points in x.
    pub fn nx(&self) -> usize {
        self.k
    }

    /// Number of points in y.
    pub fn ny(&self) -> usize {
        self.j
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same geometry with a different Helmholtz length.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.k, self.j, alpha)
    }

    pub fn len(&self) -> usize {
        self.k * self.j
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell area `dx·dy`.
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn x(&self, k: usize) -> f64 {
        -1.0 + k as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.dy
    }

    /// Flat offset of `(k, j)`, both taken modulo the grid size.
    #[inline]
    pub fn index(&self, k: isize, j: isize) -> usize {
        let k = k.rem_euclid(self.k as isize) as usize;
        let j = j.rem_euclid(self.j as isize) as usize;
        j * self.k + k
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{} (alpha={})", self.k, self.j, self.alpha)
    }
}

/// Compensated (Neumaier) summation in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Samples of one scalar on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "expected {} values for grid {grid}, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at offset {pos}")));
        }
        Ok(Self { grid, values })
    }

    /// Wraps values produced by an operator; finiteness is the caller's concern.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    /// Samples `f(x_k, y_j)` at every grid point.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y(j);
            for k in 0..grid.nx() {
                values.push(f(grid.x(k), y));
            }
        }
        Self { grid, values }
    }

    /// Builds a field from `f(k, j)` over grid indices.
    pub fn from_index_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for k in 0..grid.nx() {
                values.push(f(k, j));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at `(k, j)` with periodic wraparound.
    pub fn at(&self, k: isize, j: isize) -> f64 {
        self.values[self.grid.index(k, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `Σ f_{k,j} dx dy`.
    pub fn integral(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_area()
    }

    /// Largest `|f(k, j) - f(k, 0)|`: zero exactly when the field is constant in y.
    pub fn y_variation(&self) -> f64 {
        let nx = self.grid.nx();
        let first = &self.values[..nx];
        self.values
            .chunks_exact(nx)
            .flat_map(|row| row.iter().zip(first).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.zip_raw(other, |x, y| a * x + b * y))
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.zip_raw(other, |x, y| x + y))
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.zip_raw(other, |x, y| x - y))
    }

    pub(crate) fn zip_raw(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        )
    }

    /// Field shifted so that `out(k, j) = self(k - a, j - b)`.
    pub fn translate(&self, a: isize, b: isize) -> Self {
        Self::from_index_fn(self.grid, |k, j| self.at(k as isize - a, j as isize - b))
    }
}

/// Grid inner product `Σ v w dx dy`.
pub fn inner(v: &ScalarField, w: &ScalarField) -> Result<f64> {
    v.grid.ensure_same(&w.grid)?;
    Ok(dot(&v.values, &w.values) * v.grid.cell_area())
}

/// Grid norm `sqrt(inner(w, w))`.
pub fn norm(w: &ScalarField) -> f64 {
    (dot(&w.values, &w.values) * w.grid.cell_area()).sqrt()
}

/// Pointwise product.
pub fn hadamard(v: &ScalarField, w: &ScalarField) -> Result<ScalarField> {
    v.grid.ensure_same(&w.grid)?;
    Ok(v.zip_raw(w, |a, b| a * b))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// A two-component vector field (velocity `U` or momentum `M`).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub c1: ScalarField,
    pub c2: ScalarField,
}

impl FieldPair {
    pub fn new(c1: ScalarField, c2: ScalarField) -> Result<Self> {
        c1.grid.ensure_same(&c2.grid)?;
        Ok(Self { c1, c2 })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            c1: ScalarField::zeros(grid),
            c2: ScalarField::zeros(grid),
        }
    }

    pub fn constant(grid: GridSpec, a: f64, b: f64) -> Self {
        Self {
            c1: ScalarField::constant(grid, a),
            c2: ScalarField::constant(grid, b),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.c1.grid()
    }

    pub fn components(&self) -> [&ScalarField; 2] {
        [&self.c1, &self.c2]
    }

    pub fn is_finite(&self) -> bool {
        self.c1.is_finite() && self.c2.is_finite()
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self {
            c1: f(&self.c1),
            c2: f(&self.c2),
        }
    }

    pub fn try_map_components(
        &self,
        f: impl Fn(&ScalarField) -> Result<ScalarField>,
    ) -> Result<Self> {
        Ok(Self {
            c1: f(&self.c1)?,
            c2: f(&self.c2)?,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_components(|f| f.scale(c))
    }

    pub fn lincomb(&self, a: f64, other: &FieldPair, b: f64) -> Result<Self> {
        Ok(Self {
            c1: self.c1.lincomb(a, &other.c1, b)?,
            c2: self.c2.lincomb(a, &other.c2, b)?,
        })
    }

    pub fn add(&self, other: &FieldPair) -> Result<Self> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &FieldPair) -> Result<Self> {
        self.lincomb(1.0, other, -1.0)
    }

    /// Both components summed: `inner(a.c1, b.c1) + inner(a.c2, b.c2)`.
    pub fn inner(&self, other: &FieldPair) -> Result<f64> {
        Ok(inner(&self.c1, &other.c1)? + inner(&self.c2, &other.c2)?)
    }

    /// `sqrt(norm(c1)² + norm(c2)²)`.
    pub fn norm(&self) -> f64 {
        let a = norm(&self.c1);
        let b = norm(&self.c2);
        (a * a + b * b).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.c1.max_abs().max(self.c2.max_abs())
    }

    /// Concatenated values `[c1..., c2...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.grid().len());
        out.extend_from_slice(self.c1.values());
        out.extend_from_slice(self.c2.values());
        out
    }

    pub fn from_flat(grid: GridSpec, flat: &[f64]) -> Result<Self> {
        let n = grid.len();
        if flat.len() != 2 * n {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                2 * n,
                flat.len()
            )));
        }
        Ok(Self {
            c1: ScalarField::from_raw(grid, flat[..n].to_vec()),
            c2: ScalarField::from_raw(grid, flat[n..].to_vec()),
        })
    }
}
