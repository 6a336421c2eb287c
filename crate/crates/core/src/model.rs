//! The discrete Poisson operator, variational derivatives and invariants.

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, FieldPair, GridSpec, ScalarField};
use crate::helmholtz::{apply_q, solve_q};

/// Velocity and momentum at one time level, with `m = Q u`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: FieldPair,
    pub m: FieldPair,
    pub t: f64,
}

impl State {
    /// Builds the state from velocity, computing `M = Q U`.
    pub fn from_velocity(u: FieldPair, t: f64) -> Result<Self> {
        if !u.is_finite() {
            return Err(Error::invalid("velocity contains non-finite values"));
        }
        let m = u.map_components(apply_q);
        Ok(Self { u, m, t })
    }

    /// Builds the state from momentum, solving `Q U = M`.
    pub fn from_momentum(m: FieldPair, t: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NumericalFailure {
                what: "momentum update",
                residual: f64::NAN,
            });
        }
        let u = m.try_map_components(solve_q)?;
        Ok(Self { u, m, t })
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    /// The same fields with both `u` and `m` negated.
    pub fn negated(&self) -> Self {
        Self {
            u: self.u.scale(-1.0),
            m: self.m.scale(-1.0),
            t: self.t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.m.is_finite()
    }
}

/// Discrete `Γ_m v`:
///
/// ```text
/// c1 = m1·δx v1 + m2·δx v2 + δx(m1 v1) + δy(m1 v2)
/// c2 = m1·δy v1 + m2·δy v2 + δx(m2 v1) + δy(m2 v2)
/// ```
pub fn gamma_apply(m: &FieldPair, v: &FieldPair) -> Result<FieldPair> {
    m.grid().ensure_same(v.grid())?;
    let g = *m.grid();
    let mut o1 = vec![0.0; g.len()];
    let mut o2 = vec![0.0; g.len()];
    gamma_into(
        &g,
        [m.c1.values(), m.c2.values()],
        [v.c1.values(), v.c2.values()],
        [&mut o1, &mut o2],
    );
    Ok(FieldPair {
        c1: ScalarField::from_raw(g, o1),
        c2: ScalarField::from_raw(g, o2),
    })
}

pub(crate) fn gamma_into(g: &GridSpec, m: [&[f64]; 2], v: [&[f64]; 2], out: [&mut [f64]; 2]) {
    let (nx, ny) = (g.nx(), g.ny());
    let cx = 0.5 / g.dx();
    let cy = 0.5 / g.dy();
    let [m1, m2] = m;
    let [v1, v2] = v;
    let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
    let p11 = prod(m1, v1);
    let p12 = prod(m1, v2);
    let p21 = prod(m2, v1);
    let p22 = prod(m2, v2);
    let [o1, o2] = out;
    for j in 0..ny {
        let row = j * nx;
        let lo = if j == 0 { ny - 1 } else { j - 1 } * nx;
        let hi = if j + 1 == ny { 0 } else { j + 1 } * nx;
        for k in 0..nx {
            let kl = if k == 0 { nx - 1 } else { k - 1 };
            let kr = if k + 1 == nx { 0 } else { k + 1 };
            let i = row + k;
            let (il, ir, id, iu) = (row + kl, row + kr, lo + k, hi + k);
            let dx_v1 = (v1[ir] - v1[il]) * cx;
            let dx_v2 = (v2[ir] - v2[il]) * cx;
            let dy_v1 = (v1[iu] - v1[id]) * cy;
            let dy_v2 = (v2[iu] - v2[id]) * cy;
            o1[i] = m1[i] * dx_v1
                + m2[i] * dx_v2
                + (p11[ir] - p11[il]) * cx
                + (p12[iu] - p12[id]) * cy;
            o2[i] = m1[i] * dy_v1
                + m2[i] * dy_v2
                + (p21[ir] - p21[il]) * cx
                + (p22[iu] - p22[id]) * cy;
        }
    }
}

fn average(a: &FieldPair, b: &FieldPair) -> Result<FieldPair> {
    a.lincomb(0.5, b, 0.5)
}

/// Discrete variational derivative of the one-step scheme: `(U^n + U^{n+1}) / 2`.
pub fn dvd_scheme1(u_n: &FieldPair, u_np1: &FieldPair) -> Result<FieldPair> {
    average(u_n, u_np1)
}

/// Discrete variational derivative of the explicit two-step scheme: `U^n`.
pub fn dvd_scheme2(u_n: &FieldPair) -> FieldPair {
    u_n.clone()
}

/// Discrete variational derivative of the linearly implicit scheme: `(U^{n-1} + U^{n+1}) / 2`.
pub fn dvd_scheme3(u_nm1: &FieldPair, u_np1: &FieldPair) -> Result<FieldPair> {
    average(u_nm1, u_np1)
}

/// `dM/dt = -Γ_M U`.
pub fn semi_discrete_rhs(s: &State) -> FieldPair {
    gamma_apply(&s.m, &s.u)
        .expect("state components share a grid")
        .scale(-1.0)
}

fn pair_dot(a: &FieldPair, b: &FieldPair) -> f64 {
    compensated_sum(
        a.c1.values()
            .iter()
            .zip(b.c1.values())
            .chain(a.c2.values().iter().zip(b.c2.values()))
            .map(|(x, y)| x * y),
    )
}

/// `Σ (M·U)/2 dx dy`.
pub fn energy_scheme1(s: &State) -> f64 {
    0.5 * pair_dot(&s.m, &s.u) * s.grid().cell_area()
}

/// Cross-averaged energy `Σ (M^{n+1}·U^n + M^n·U^{n+1})/4 dx dy`.
pub fn energy_half_scheme2(s_n: &State, s_np1: &State) -> Result<f64> {
    s_n.grid().ensure_same(s_np1.grid())?;
    let a = pair_dot(&s_np1.m, &s_n.u);
    let b = pair_dot(&s_n.m, &s_np1.u);
    Ok(0.25 * compensated_sum([a, b]) * s_n.grid().cell_area())
}

/// Level-averaged energy `Σ (M^{n+1}·U^{n+1} + M^n·U^n)/4 dx dy`.
pub fn energy_half_scheme3(s_n: &State, s_np1: &State) -> Result<f64> {
    s_n.grid().ensure_same(s_np1.grid())?;
    let a = pair_dot(&s_np1.m, &s_np1.u);
    let b = pair_dot(&s_n.m, &s_n.u);
    Ok(0.25 * compensated_sum([a, b]) * s_n.grid().cell_area())
}

/// `(Σ U1 dx dy, Σ U2 dx dy)`.
pub fn linear_momenta(s: &State) -> (f64, f64) {
    (s.u.c1.integral(), s.u.c2.integral())
}
