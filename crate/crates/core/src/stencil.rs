//! Periodic finite-difference stencils.

use crate::grid::{GridSpec, ScalarField};

#[inline]
fn prev(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

#[inline]
fn next(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

/// Applies `f(left, centre, right)` along x for every point, writing into `out`.
#[inline]
pub(crate) fn sweep_x(g: &GridSpec, src: &[f64], out: &mut [f64], f: impl Fn(f64, f64, f64) -> f64) {
    let nx = g.nx();
    for (row, orow) in src.chunks_exact(nx).zip(out.chunks_exact_mut(nx)) {
        orow[0] = f(row[nx - 1], row[0], row[1]);
        for k in 1..nx - 1 {
            orow[k] = f(row[k - 1], row[k], row[k + 1]);
        }
        orow[nx - 1] = f(row[nx - 2], row[nx - 1], row[0]);
    }
}

/// Applies `f(below, centre, above)` along y for every point, writing into `out`.
#[inline]
pub(crate) fn sweep_y(g: &GridSpec, src: &[f64], out: &mut [f64], f: impl Fn(f64, f64, f64) -> f64) {
    let (nx, ny) = (g.nx(), g.ny());
    for j in 0..ny {
        let lo = &src[prev(j, ny) * nx..][..nx];
        let mid = &src[j * nx..][..nx];
        let hi = &src[next(j, ny) * nx..][..nx];
        let orow = &mut out[j * nx..][..nx];
        for k in 0..nx {
            orow[k] = f(lo[k], mid[k], hi[k]);
        }
    }
}

fn apply_x(f: &ScalarField, op: impl Fn(f64, f64, f64) -> f64) -> ScalarField {
    let g = *f.grid();
    let mut out = vec![0.0; g.len()];
    sweep_x(&g, f.values(), &mut out, op);
    ScalarField::from_raw(g, out)
}

fn apply_y(f: &ScalarField, op: impl Fn(f64, f64, f64) -> f64) -> ScalarField {
    let g = *f.grid();
    let mut out = vec![0.0; g.len()];
    sweep_y(&g, f.values(), &mut out, op);
    ScalarField::from_raw(g, out)
}

/// Centered difference in x: `(f[k+1] - f[k-1]) / (2 dx)`.
pub fn d1x(f: &ScalarField) -> ScalarField {
    let c = 0.5 / f.grid().dx();
    apply_x(f, |l, _, r| (r - l) * c)
}

/// Centered difference in y.
pub fn d1y(f: &ScalarField) -> ScalarField {
    let c = 0.5 / f.grid().dy();
    apply_y(f, |l, _, r| (r - l) * c)
}

/// Second difference in x only.
pub fn d2x(f: &ScalarField) -> ScalarField {
    let c = 1.0 / (f.grid().dx() * f.grid().dx());
    apply_x(f, |l, m, r| (r - 2.0 * m + l) * c)
}

/// Second difference in y only.
pub fn d2y(f: &ScalarField) -> ScalarField {
    let c = 1.0 / (f.grid().dy() * f.grid().dy());
    apply_y(f, |l, m, r| (r - 2.0 * m + l) * c)
}

/// Five-point Laplacian.
pub fn d2(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let mut out = vec![0.0; g.len()];
    laplacian_into(&g, f.values(), &mut out);
    ScalarField::from_raw(g, out)
}

pub(crate) fn laplacian_into(g: &GridSpec, src: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let cx = 1.0 / (g.dx() * g.dx());
    let cy = 1.0 / (g.dy() * g.dy());
    for j in 0..ny {
        let lo = &src[prev(j, ny) * nx..][..nx];
        let mid = &src[j * nx..][..nx];
        let hi = &src[next(j, ny) * nx..][..nx];
        let orow = &mut out[j * nx..][..nx];
        for k in 0..nx {
            let (kl, kr) = (prev(k, nx), next(k, nx));
            orow[k] = (mid[kr] - 2.0 * mid[k] + mid[kl]) * cx + (hi[k] - 2.0 * mid[k] + lo[k]) * cy;
        }
    }
}

pub fn dplus_x(f: &ScalarField) -> ScalarField {
    let c = 1.0 / f.grid().dx();
    apply_x(f, |_, m, r| (r - m) * c)
}

pub fn dminus_x(f: &ScalarField) -> ScalarField {
    let c = 1.0 / f.grid().dx();
    apply_x(f, |l, m, _| (m - l) * c)
}

pub fn dplus_y(f: &ScalarField) -> ScalarField {
    let c = 1.0 / f.grid().dy();
    apply_y(f, |_, m, r| (r - m) * c)
}

pub fn dminus_y(f: &ScalarField) -> ScalarField {
    let c = 1.0 / f.grid().dy();
    apply_y(f, |l, m, _| (m - l) * c)
}
