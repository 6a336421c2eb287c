//! Restarted GMRES with right preconditioning, matrix-free.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Target relative residual.
    pub rtol: f64,
    /// Largest relative residual still reported as success when the iteration
    /// stagnates or runs out of budget before reaching `rtol`.
    pub accept: f64,
    pub max_iter: usize,
    pub restart: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    /// True relative residual `‖b - A x‖ / ‖b‖` at exit.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn nrm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from the contents of `x`.
///
/// `apply_a(x, out)` writes `A x`; `precond(r, out)` writes `P⁻¹ r`. The method
/// iterates on `A P⁻¹ y = b` and returns `x = P⁻¹ y`.
pub fn gmres<A, P>(
    mut apply_a: A,
    mut precond: P,
    b: &[f64],
    x: &mut [f64],
    opts: GmresOptions,
) -> Result<GmresOutcome>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
    P: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = b.len();
    let b_norm = nrm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(GmresOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let m = opts.restart.max(1);
    let tol = opts.rtol * b_norm;

    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut gvec = vec![0.0; m + 1];
    let mut iterations = 0;
    let mut last_beta = f64::INFINITY;
    let mut saved = x.to_vec();

    loop {
        apply_a(x, &mut r)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = nrm(&r);
        if !beta.is_finite() {
            return Err(Error::NumericalFailure {
                what: "GMRES",
                residual: beta,
            });
        }
        if beta <= tol {
            return Ok(GmresOutcome {
                iterations,
                residual: beta / b_norm,
            });
        }
        if iterations >= opts.max_iter || beta > 0.9 * last_beta {
            if beta > last_beta {
                x.copy_from_slice(&saved);
            }
            let residual = beta.min(last_beta) / b_norm;
            if residual <= opts.accept {
                return Ok(GmresOutcome {
                    iterations,
                    residual,
                });
            }
            return Err(Error::NumericalFailure {
                what: "GMRES",
                residual,
            });
        }
        last_beta = beta;

        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        gvec.fill(0.0);
        gvec[0] = beta;
        let mut used = 0;
        for i in 0..m {
            precond(&basis[i], &mut z)?;
            apply_a(&z, &mut w)?;
            for (l, v) in basis.iter().enumerate() {
                let hl = dot(&w, v);
                h[l][i] = hl;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hl * vi;
                }
            }
            let hn = nrm(&w);
            h[i + 1][i] = hn;
            for l in 0..i {
                let t = cs[l] * h[l][i] + sn[l] * h[l + 1][i];
                h[l + 1][i] = -sn[l] * h[l][i] + cs[l] * h[l + 1][i];
                h[l][i] = t;
            }
            let d = h[i][i].hypot(h[i + 1][i]);
            if d == 0.0 {
                break;
            }
            cs[i] = h[i][i] / d;
            sn[i] = h[i + 1][i] / d;
            h[i][i] = d;
            h[i + 1][i] = 0.0;
            gvec[i + 1] = -sn[i] * gvec[i];
            gvec[i] *= cs[i];
            used = i + 1;
            iterations += 1;
            if gvec[i + 1].abs() <= tol || hn == 0.0 || iterations >= opts.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        if used == 0 {
            return Err(Error::NumericalFailure {
                what: "GMRES",
                residual: beta / b_norm,
            });
        }

        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|l| h[i][l] * y[l]).sum();
            y[i] = (gvec[i] - s) / h[i][i];
        }
        w.fill(0.0);
        for (yl, v) in y.iter().zip(&basis) {
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi += yl * vi;
            }
        }
        precond(&w, &mut z)?;
        saved.copy_from_slice(x);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
    }
}
