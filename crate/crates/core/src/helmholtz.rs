//! The discrete Helmholtz operator `Q = 1 - α² Δ_h` and its inverse.
//!
//! `Q` is diagonal in the discrete Fourier basis of the periodic grid, so the
//! inverse is a forward 2D FFT, a pointwise divide and an inverse FFT.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{dot, GridSpec, ScalarField};
use crate::stencil::laplacian_into;

/// Relative residual the spectral solve must reach.
pub const SOLVE_RTOL: f64 = 1e-12;

const MAX_REFINEMENTS: usize = 2;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Symbol of `Q` at wavenumber `(p, q)`.
pub fn eigenvalue(g: &GridSpec, p: usize, q: usize) -> f64 {
    let a2 = g.alpha() * g.alpha();
    let sx = (PI * p as f64 / g.nx() as f64).sin();
    let sy = (PI * q as f64 / g.ny() as f64).sin();
    1.0 + 4.0 * a2 / (g.dx() * g.dx()) * sx * sx + 4.0 * a2 / (g.dy() * g.dy()) * sy * sy
}

/// `u - α² d2(u)`.
pub fn apply_q(u: &ScalarField) -> ScalarField {
    let g = *u.grid();
    let mut out = vec![0.0; g.len()];
    apply_q_into(&g, u.values(), &mut out);
    ScalarField::from_raw(g, out)
}

pub(crate) fn apply_q_into(g: &GridSpec, u: &[f64], out: &mut [f64]) {
    laplacian_into(g, u, out);
    let a2 = g.alpha() * g.alpha();
    for (o, &v) in out.iter_mut().zip(u) {
        *o = v - a2 * *o;
    }
}

/// Solves `Q u = m` spectrally, checking the residual.
pub fn solve_q(m: &ScalarField) -> Result<ScalarField> {
    let g = *m.grid();
    let mut out = vec![0.0; g.len()];
    solve_q_into(&g, m.values(), &mut out)?;
    Ok(ScalarField::from_raw(g, out))
}

pub(crate) fn solve_q_into(g: &GridSpec, m: &[f64], out: &mut [f64]) -> Result<()> {
    let m_norm = dot(m, m).sqrt();
    if m_norm == 0.0 {
        out.fill(0.0);
        return Ok(());
    }
    spectral_inverse(g, m, out);
    let mut resid = vec![0.0; g.len()];
    let mut correction = vec![0.0; g.len()];
    for pass in 0..=MAX_REFINEMENTS {
        apply_q_into(g, out, &mut resid);
        for (r, &b) in resid.iter_mut().zip(m) {
            *r = b - *r;
        }
        let rel = dot(&resid, &resid).sqrt() / m_norm;
        if !rel.is_finite() {
            return Err(Error::NumericalFailure {
                what: "Helmholtz solve",
                residual: rel,
            });
        }
        if rel <= SOLVE_RTOL {
            return Ok(());
        }
        if pass == MAX_REFINEMENTS {
            return Err(Error::NumericalFailure {
                what: "Helmholtz solve",
                residual: rel,
            });
        }
        spectral_inverse(g, &resid, &mut correction);
        for (o, c) in out.iter_mut().zip(&correction) {
            *o += c;
        }
    }
    unreachable!()
}

fn spectral_inverse(g: &GridSpec, m: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let (fx, fy, ix, iy) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (
            p.plan_fft_forward(nx),
            p.plan_fft_forward(ny),
            p.plan_fft_inverse(nx),
            p.plan_fft_inverse(ny),
        )
    });
    let mut rows: Vec<Complex<f64>> = m.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fx.process(&mut rows);
    let mut cols = vec![Complex::new(0.0, 0.0); nx * ny];
    transpose(&rows, &mut cols, nx, ny);
    fy.process(&mut cols);

    let ex: Vec<f64> = (0..nx).map(|p| eigenvalue(g, p, 0) - 1.0).collect();
    let ey: Vec<f64> = (0..ny).map(|q| eigenvalue(g, 0, q) - 1.0).collect();
    let scale = 1.0 / (nx * ny) as f64;
    for (p, col) in cols.chunks_exact_mut(ny).enumerate() {
        for (q, c) in col.iter_mut().enumerate() {
            *c *= scale / (1.0 + ex[p] + ey[q]);
        }
    }

    iy.process(&mut cols);
    transpose(&cols, &mut rows, ny, nx);
    ix.process(&mut rows);
    for (o, c) in out.iter_mut().zip(&rows) {
        *o = c.re;
    }
}

/// `src` is `rows × width` row-major; `dst` receives its transpose.
fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], width: usize, rows: usize) {
    for r in 0..rows {
        for c in 0..width {
            dst[c * rows + r] = src[r * width + c];
        }
    }
}

/// Assembles `Q` as a dense `KJ × KJ` matrix.
pub fn dense_q(g: &GridSpec) -> DMatrix<f64> {
    let n = g.len();
    let a2 = g.alpha() * g.alpha();
    let cx = a2 / (g.dx() * g.dx());
    let cy = a2 / (g.dy() * g.dy());
    let mut q = DMatrix::zeros(n, n);
    for j in 0..g.ny() as isize {
        for k in 0..g.nx() as isize {
            let row = g.index(k, j);
            q[(row, row)] += 1.0 + 2.0 * cx + 2.0 * cy;
            q[(row, g.index(k + 1, j))] -= cx;
            q[(row, g.index(k - 1, j))] -= cx;
            q[(row, g.index(k, j + 1))] -= cy;
            q[(row, g.index(k, j - 1))] -= cy;
        }
    }
    q
}

/// Direct solve through a dense Cholesky factorisation; meant for small grids.
pub fn solve_q_dense(m: &ScalarField) -> Result<ScalarField> {
    let g = *m.grid();
    let chol = dense_q(&g).cholesky().ok_or(Error::NumericalFailure {
        what: "dense Cholesky factorisation",
        residual: f64::NAN,
    })?;
    let rhs = nalgebra::DVector::from_column_slice(m.values());
    let u = chol.solve(&rhs);
    Ok(ScalarField::from_raw(g, u.as_slice().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norm;

    fn field(g: GridSpec, seed: u64) -> ScalarField {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ScalarField::from_index_fn(g, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn constant_is_fixed() {
        let g = GridSpec::new(10, 12, 0.7).unwrap();
        let c = ScalarField::constant(g, -2.5);
        assert_eq!(apply_q(&c), c);
        let u = solve_q(&c).unwrap();
        for v in u.values() {
            assert!((v + 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn delta_example() {
        let g = GridSpec::new(4, 4, 1.0).unwrap();
        let f = ScalarField::from_index_fn(g, |k, j| if k == 0 && j == 0 { 1.0 } else { 0.0 });
        assert_eq!(apply_q(&f).at(0, 0), 17.0);
    }

    #[test]
    fn spectral_matches_dense() {
        for (k, j, a) in [(8, 8, 1.0), (5, 7, 0.3), (16, 12, 0.05)] {
            let g = GridSpec::new(k, j, a).unwrap();
            let m = field(g, k as u64 * 31 + j as u64);
            let s = solve_q(&m).unwrap();
            let d = solve_q_dense(&m).unwrap();
            assert!(norm(&s.sub(&d).unwrap()) <= 1e-12 * norm(&d));
        }
    }

    #[test]
    fn inverse_round_trip_rectangular() {
        let g = GridSpec::new(24, 10, 2.0).unwrap();
        let u = field(g, 9);
        let back = solve_q(&apply_q(&u)).unwrap();
        assert!(norm(&back.sub(&u).unwrap()) <= 1e-11 * norm(&u));
    }

    #[test]
    fn eigenvalues_match_dense_spectrum() {
        let g = GridSpec::new(6, 5, 0.8).unwrap();
        let mut dense: Vec<f64> = dense_q(&g).symmetric_eigenvalues().iter().copied().collect();
        let mut spec: Vec<f64> = (0..6)
            .flat_map(|p| (0..5).map(move |q| (p, q)))
            .map(|(p, q)| eigenvalue(&g, p, q))
            .collect();
        dense.sort_by(f64::total_cmp);
        spec.sort_by(f64::total_cmp);
        for (a, b) in dense.iter().zip(&spec) {
            assert!((a - b).abs() < 1e-10 * b);
        }
        assert!(spec[0] >= 1.0);
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = GridSpec::new(5, 5, 1.0).unwrap();
        assert_eq!(solve_q(&ScalarField::zeros(g)).unwrap().max_abs(), 0.0);
    }
}
