//! Time steppers and the integration driver.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::diagnostics::{RunRecord, SeriesRow};
use crate::model::{
    energy_half_scheme2, energy_half_scheme3, energy_scheme1, gamma_apply, gamma_into,
    linear_momenta, semi_discrete_rhs, State,
};
use crate::error::{Error, Result};
use crate::grid::FieldPair;
use crate::helmholtz::{apply_q, apply_q_into, solve_q_into};
use crate::krylov::{gmres, GmresOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Implicit one-step scheme solved by predictor-corrector iteration.
    Scheme1PC,
    /// Explicit two-step scheme.
    Scheme2,
    /// Linearly implicit two-step scheme.
    Scheme3,
    Rk4,
}

impl SchemeKind {
    pub fn is_multistep(self) -> bool {
        matches!(self, SchemeKind::Scheme2 | SchemeKind::Scheme3)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Scheme1PC => "scheme1",
            SchemeKind::Scheme2 => "scheme2",
            SchemeKind::Scheme3 => "scheme3",
            SchemeKind::Rk4 => "rk4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectorMode {
    FixedCount(usize),
    /// Iterate until successive momentum iterates differ by at most `rtol` relative.
    Tolerance { rtol: f64, max_iter: usize },
}

impl Default for CorrectorMode {
    fn default() -> Self {
        CorrectorMode::Tolerance {
            rtol: 1e-14,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bootstrap {
    #[default]
    Rk4,
    Scheme1FixedPoint,
}

/// Default target residual for the linearly implicit solve.
pub const DEFAULT_KRYLOV_RTOL: f64 = 1e-14;
/// Largest relative residual the linearly implicit solve may report as success.
pub const KRYLOV_ACCEPT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub dt: f64,
    pub corrector_mode: CorrectorMode,
    pub bootstrap: Bootstrap,
    pub krylov_rtol: f64,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, dt: f64) -> Result<Self> {
        let cfg = Self {
            kind,
            dt,
            corrector_mode: CorrectorMode::default(),
            bootstrap: Bootstrap::default(),
            krylov_rtol: DEFAULT_KRYLOV_RTOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_corrector(mut self, mode: CorrectorMode) -> Result<Self> {
        self.corrector_mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn with_bootstrap(mut self, bootstrap: Bootstrap) -> Self {
        self.bootstrap = bootstrap;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        match self.corrector_mode {
            CorrectorMode::FixedCount(0) => {
                return Err(Error::invalid("corrector count must be at least 1"))
            }
            CorrectorMode::Tolerance { rtol, max_iter } => {
                if !(rtol > 0.0 && rtol < 1.0) {
                    return Err(Error::invalid(format!("corrector rtol must lie in (0, 1), got {rtol}")));
                }
                if max_iter == 0 {
                    return Err(Error::invalid("corrector max_iter must be at least 1"));
                }
            }
            CorrectorMode::FixedCount(_) => {}
        }
        if !(self.krylov_rtol > 0.0 && self.krylov_rtol <= KRYLOV_ACCEPT) {
            return Err(Error::invalid(format!(
                "linear solve tolerance must lie in (0, {KRYLOV_ACCEPT:e}], got {}",
                self.krylov_rtol
            )));
        }
        Ok(())
    }
}

/// Scheme names used on the command line: `scheme1`, `scheme1-fixed=N`,
/// `scheme2`, `scheme3`, `rk4`.
impl FromStr for SchemeConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, mode) = match s {
            "scheme1" => (SchemeKind::Scheme1PC, CorrectorMode::default()),
            "scheme2" => (SchemeKind::Scheme2, CorrectorMode::default()),
            "scheme3" => (SchemeKind::Scheme3, CorrectorMode::default()),
            "rk4" => (SchemeKind::Rk4, CorrectorMode::default()),
            _ => match s.strip_prefix("scheme1-fixed=") {
                Some(n) => {
                    let n: usize = n
                        .parse()
                        .map_err(|_| Error::Config(format!("bad corrector count in {s:?}")))?;
                    (SchemeKind::Scheme1PC, CorrectorMode::FixedCount(n))
                }
                None => return Err(Error::Config(format!("unknown scheme {s:?}"))),
            },
        };
        SchemeConfig::new(kind, 1.0)?
            .with_corrector(mode)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

impl SchemeConfig {
    /// Inverse of the `FromStr` parser.
    pub fn label(&self) -> String {
        match (self.kind, self.corrector_mode) {
            (SchemeKind::Scheme1PC, CorrectorMode::FixedCount(n)) => format!("scheme1-fixed={n}"),
            (kind, _) => kind.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: State,
    /// Corrector passes taken; zero for the explicit and linearly implicit schemes.
    pub corrector_iters: usize,
    /// Relative residual of the linear solve, or the last corrector increment for Scheme 1.
    pub linear_solve_residual: f64,
    /// Relative momentum increments of each corrector pass.
    pub corrector_increments: Vec<f64>,
}

impl StepResult {
    fn plain(state: State, residual: f64) -> Self {
        Self {
            state,
            corrector_iters: 0,
            linear_solve_residual: residual,
            corrector_increments: Vec::new(),
        }
    }
}

fn check_consecutive(s_nm1: &State, s_n: &State, dt: f64) -> Result<()> {
    s_nm1.grid().ensure_same(s_n.grid())?;
    let gap = s_n.t - s_nm1.t;
    if (gap - dt).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "states are not consecutive: t_n - t_(n-1) = {gap}, dt = {dt}"
        )));
    }
    Ok(())
}

/// Explicit two-step update `M^{n+1} = M^{n-1} - 2Δt Γ(M^n) U^n`.
pub fn step_scheme2(s_nm1: &State, s_n: &State, dt: f64) -> Result<StepResult> {
    check_consecutive(s_nm1, s_n, dt)?;
    let tendency = gamma_apply(&s_n.m, &s_n.u)?;
    let m = s_nm1.m.lincomb(1.0, &tendency, -2.0 * dt)?;
    Ok(StepResult::plain(State::from_momentum(m, s_n.t + dt)?, 0.0))
}

fn krylov_budget(points: usize) -> usize {
    (10.0 * ((2 * points) as f64).sqrt()).ceil() as usize
}

/// Linearly implicit two-step update.
///
/// Solves `Q U^{n+1} + Δt Γ(M^n) U^{n+1} = M^{n-1} - Δt Γ(M^n) U^{n-1}` by GMRES,
/// right-preconditioned with `Q⁻¹`, then sets `M^{n+1} = Q U^{n+1}`.
pub fn step_scheme3(s_nm1: &State, s_n: &State, dt: f64) -> Result<StepResult> {
    step_scheme3_with(s_nm1, s_n, dt, DEFAULT_KRYLOV_RTOL)
}

pub(crate) fn step_scheme3_with(
    s_nm1: &State,
    s_n: &State,
    dt: f64,
    rtol: f64,
) -> Result<StepResult> {
    check_consecutive(s_nm1, s_n, dt)?;
    let g = *s_n.grid();
    let n = g.len();
    let m_n = [s_n.m.c1.values(), s_n.m.c2.values()];

    let rhs = {
        let gm = gamma_apply(&s_n.m, &s_nm1.u)?;
        s_nm1.m.lincomb(1.0, &gm, -dt)?.to_flat()
    };
    let apply_a = |x: &[f64], out: &mut [f64]| -> Result<()> {
        let (x1, x2) = x.split_at(n);
        let mut gm = vec![0.0; 2 * n];
        {
            let (g1, g2) = gm.split_at_mut(n);
            gamma_into(&g, m_n, [x1, x2], [g1, g2]);
        }
        let (o1, o2) = out.split_at_mut(n);
        apply_q_into(&g, x1, o1);
        apply_q_into(&g, x2, o2);
        for (o, v) in out.iter_mut().zip(&gm) {
            *o += dt * v;
        }
        Ok(())
    };
    let precond = |r: &[f64], out: &mut [f64]| -> Result<()> {
        let (r1, r2) = r.split_at(n);
        let (o1, o2) = out.split_at_mut(n);
        solve_q_into(&g, r1, o1)?;
        solve_q_into(&g, r2, o2)
    };
    let mut x = s_n.u.lincomb(2.0, &s_nm1.u, -1.0)?.to_flat();
    let max_iter = krylov_budget(n);
    let outcome = gmres(
        apply_a,
        precond,
        &rhs,
        &mut x,
        GmresOptions {
            rtol,
            accept: KRYLOV_ACCEPT,
            max_iter,
            restart: max_iter.min(40),
        },
    )?;
    let u = FieldPair::from_flat(g, &x)?;
    let m = u.map_components(apply_q);
    Ok(StepResult::plain(
        State {
            u,
            m,
            t: s_n.t + dt,
        },
        outcome.residual,
    ))
}

/// Predictor-corrector iteration for the implicit one-step scheme.
///
/// The predictor is a Scheme 2 step when `s_nm1` is given; otherwise the
/// iteration is seeded with the current state. Each corrector pass evaluates
/// `M^c = M^n - (Δt/4) Γ(M^n + M^p) (U^n + U^p)` and recomputes `U^p = Q⁻¹ M^c`.
pub fn step_scheme1_pc(
    s_nm1: Option<&State>,
    s_n: &State,
    dt: f64,
    cfg: &SchemeConfig,
) -> Result<StepResult> {
    let (mut m_p, mut u_p) = match s_nm1 {
        Some(prev) => {
            let pred = step_scheme2(prev, s_n, dt)?.state;
            (pred.m, pred.u)
        }
        None => (s_n.m.clone(), s_n.u.clone()),
    };
    let g = *s_n.grid();
    let n = g.len();
    let (limit, rtol) = match cfg.corrector_mode {
        CorrectorMode::FixedCount(c) => (c, None),
        CorrectorMode::Tolerance { rtol, max_iter } => (max_iter, Some(rtol)),
    };
    let mut increments = Vec::new();
    let mut msum = FieldPair::zeros(g);
    let mut usum = FieldPair::zeros(g);
    let mut tend = vec![0.0; 2 * n];
    for iter in 1..=limit {
        sum_into(&mut msum, &s_n.m, &m_p);
        sum_into(&mut usum, &s_n.u, &u_p);
        {
            let (t1, t2) = tend.split_at_mut(n);
            gamma_into(
                &g,
                [msum.c1.values(), msum.c2.values()],
                [usum.c1.values(), usum.c2.values()],
                [t1, t2],
            );
        }
        let c = 0.25 * dt;
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for (comp, (mc, mn)) in [
            (&mut m_p.c1, &s_n.m.c1),
            (&mut m_p.c2, &s_n.m.c2),
        ]
        .into_iter()
        .enumerate()
        {
            let t = &tend[comp * n..(comp + 1) * n];
            for ((p, &base), &tv) in mc.values_mut().iter_mut().zip(mn.values()).zip(t) {
                let new = base - c * tv;
                diff2 += (new - *p) * (new - *p);
                norm2 += new * new;
                *p = new;
            }
        }
        if !(diff2.is_finite() && norm2.is_finite()) {
            return Err(Error::NumericalFailure {
                what: "corrector",
                residual: f64::NAN,
            });
        }
        let rel = if norm2 > 0.0 {
            (diff2 / norm2).sqrt()
        } else if diff2 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        increments.push(rel);
        solve_q_into(&g, m_p.c1.values(), u_p.c1.values_mut())?;
        solve_q_into(&g, m_p.c2.values(), u_p.c2.values_mut())?;
        let done = match rtol {
            Some(tol) => rel <= tol,
            None => iter == limit,
        };
        if done {
            return Ok(StepResult {
                state: State {
                    u: u_p,
                    m: m_p,
                    t: s_n.t + dt,
                },
                corrector_iters: iter,
                linear_solve_residual: rel,
                corrector_increments: increments,
            });
        }
    }
    Err(Error::NonConvergence {
        iters: limit,
        residual: increments.last().copied().unwrap_or(f64::NAN),
    })
}

fn sum_into(out: &mut FieldPair, a: &FieldPair, b: &FieldPair) {
    for (o, (x, y)) in [
        (&mut out.c1, (&a.c1, &b.c1)),
        (&mut out.c2, (&a.c2, &b.c2)),
    ] {
        for ((ov, xv), yv) in o.values_mut().iter_mut().zip(x.values()).zip(y.values()) {
            *ov = xv + yv;
        }
    }
}

/// Classical four-stage Runge-Kutta on `dM/dt = -Γ(M) Q⁻¹M`.
pub fn step_rk4(s_n: &State, dt: f64) -> Result<StepResult> {
    let stage = |m: FieldPair| -> Result<(State, FieldPair)> {
        let s = State::from_momentum(m, s_n.t)?;
        let k = semi_discrete_rhs(&s);
        Ok((s, k))
    };
    let k1 = semi_discrete_rhs(s_n);
    let (_, k2) = stage(s_n.m.lincomb(1.0, &k1, 0.5 * dt)?)?;
    let (_, k3) = stage(s_n.m.lincomb(1.0, &k2, 0.5 * dt)?)?;
    let (_, k4) = stage(s_n.m.lincomb(1.0, &k3, dt)?)?;
    let incr = k1
        .add(&k4)?
        .lincomb(1.0, &k2.add(&k3)?, 2.0)?;
    let m = s_n.m.lincomb(1.0, &incr, dt / 6.0)?;
    Ok(StepResult::plain(State::from_momentum(m, s_n.t + dt)?, 0.0))
}

/// Produces the second time level for the two-step schemes.
pub fn bootstrap_first_step(s_0: &State, dt: f64, cfg: &SchemeConfig) -> Result<State> {
    match cfg.bootstrap {
        Bootstrap::Rk4 => Ok(step_rk4(s_0, dt)?.state),
        Bootstrap::Scheme1FixedPoint => {
            let inner = SchemeConfig {
                kind: SchemeKind::Scheme1PC,
                dt,
                corrector_mode: CorrectorMode::Tolerance {
                    rtol: 1e-14,
                    max_iter: 200,
                },
                ..*cfg
            };
            Ok(step_scheme1_pc(None, s_0, dt, &inner)?.state)
        }
    }
}

/// Step size below which the Scheme 1 fixed point exists, is unique and the
/// corrector contracts. Infinite for a zero momentum field.
pub fn solvability_dt_bound(m_n: &FieldPair) -> f64 {
    let g = m_n.grid();
    let k = m_n.norm();
    if k == 0.0 {
        return f64::INFINITY;
    }
    let (dx, dy) = (g.dx(), g.dy());
    let c = (2.0 * (5f64.sqrt() - 2.0)).sqrt() / 5.0;
    c * (dx.powi(3) * dy.powi(3) / (dx * dx + dy * dy)).sqrt() / k
}

/// Defect of the one-step scheme relation between levels `a` and `c`.
pub fn scheme1_residual(a: &State, c: &State, dt: f64) -> Result<FieldPair> {
    let mavg = a.m.lincomb(0.5, &c.m, 0.5)?;
    let uavg = a.u.lincomb(0.5, &c.u, 0.5)?;
    c.m.lincomb(1.0 / dt, &a.m, -1.0 / dt)?
        .add(&gamma_apply(&mavg, &uavg)?)
}

/// Defect of the explicit two-step relation across levels `a`, `b`, `c`.
pub fn scheme2_residual(a: &State, b: &State, c: &State, dt: f64) -> Result<FieldPair> {
    c.m.lincomb(0.5 / dt, &a.m, -0.5 / dt)?
        .add(&gamma_apply(&b.m, &b.u)?)
}

/// Defect of the linearly implicit two-step relation across levels `a`, `b`, `c`.
pub fn scheme3_residual(a: &State, b: &State, c: &State, dt: f64) -> Result<FieldPair> {
    let uavg = a.u.lincomb(0.5, &c.u, 0.5)?;
    c.m.lincomb(0.5 / dt, &a.m, -0.5 / dt)?
        .add(&gamma_apply(&b.m, &uavg)?)
}

/// Where an integration starts.
#[derive(Debug, Clone)]
pub enum Start {
    /// A single level; two-step schemes bootstrap their second level.
    Single(State),
    /// Two consecutive levels, used directly by two-step schemes.
    Pair { previous: State, current: State },
}

/// The record of a run together with its final level(s).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub record: RunRecord,
    pub previous: Option<State>,
    pub last: State,
}

/// Number of steps of size `dt` covering `span`, if it is integral to 1e-9 relative.
pub fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(span > 0.0) {
        return Err(Error::invalid(format!(
            "final time must exceed the initial time (span {span})"
        )));
    }
    let ratio = span / dt;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(format!(
            "time span {span} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Integrates `initial` to `t_final`, calling `observer(step, result)` after every step.
pub fn integrate(
    initial: &State,
    cfg: &SchemeConfig,
    t_final: f64,
    observer: impl FnMut(usize, &StepResult),
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = step_count(t_final - initial.t, cfg.dt)?;
    integrate_steps(Start::Single(initial.clone()), cfg, n, observer)
}

/// Runs exactly `n_steps` steps from `start`.
pub fn integrate_steps(
    start: Start,
    cfg: &SchemeConfig,
    n_steps: usize,
    mut observer: impl FnMut(usize, &StepResult),
) -> Result<Trajectory> {
    cfg.validate()?;
    if n_steps == 0 {
        return Err(Error::invalid("integration needs at least one step"));
    }
    let dt = cfg.dt;
    let clock = Instant::now();
    let (mut prev, mut cur, t0) = match start {
        Start::Single(s) => {
            let t0 = s.t;
            (None, s, t0)
        }
        Start::Pair { previous, current } => {
            check_consecutive(&previous, &current, dt)?;
            let t0 = previous.t;
            (Some(previous), current, t0)
        }
    };
    let offset = usize::from(prev.is_some());
    let grid = *cur.grid();
    let mut record = RunRecord::new(cfg.kind, grid, dt);
    let time_at = |step: usize| t0 + (step + offset) as f64 * dt;

    let energy = |kind: SchemeKind, prev: Option<&State>, cur: &State| -> Result<Option<f64>> {
        Ok(match (kind, prev) {
            (SchemeKind::Scheme2, Some(p)) => Some(energy_half_scheme2(p, cur)?),
            (SchemeKind::Scheme3, Some(p)) => Some(energy_half_scheme3(p, cur)?),
            (SchemeKind::Scheme2 | SchemeKind::Scheme3, None) => None,
            _ => Some(energy_scheme1(cur)),
        })
    };
    let push = |record: &mut RunRecord, step: usize, s: &State, e: Option<f64>, iters: usize| {
        if let Some(e) = e {
            let (px, py) = linear_momenta(s);
            record.series.push(SeriesRow {
                step,
                t: s.t,
                energy: e,
                momentum_x: px,
                momentum_y: py,
                corrector_iters: iters,
                wall_seconds: clock.elapsed().as_secs_f64(),
            });
        }
    };
    push(&mut record, 0, &cur, energy(cfg.kind, prev.as_ref(), &cur)?, 0);

    for step in 1..=n_steps {
        let t_next = time_at(step);
        let result = match (cfg.kind, prev.as_ref()) {
            (SchemeKind::Scheme2 | SchemeKind::Scheme3, None) => {
                bootstrap_first_step(&cur, dt, cfg).map(|s| StepResult::plain(s, 0.0))
            }
            (SchemeKind::Scheme2, Some(p)) => step_scheme2(p, &cur, dt),
            (SchemeKind::Scheme3, Some(p)) => step_scheme3_with(p, &cur, dt, cfg.krylov_rtol),
            (SchemeKind::Scheme1PC, p) => step_scheme1_pc(p, &cur, dt, cfg),
            (SchemeKind::Rk4, _) => step_rk4(&cur, dt),
        };
        let mut result = result.map_err(|e| Error::Step {
            step,
            source: Box::new(e),
        })?;
        if !result.state.is_finite() {
            return Err(Error::Step {
                step,
                source: Box::new(Error::NumericalFailure {
                    what: "time step",
                    residual: f64::NAN,
                }),
            });
        }
        result.state.t = t_next;
        let e = energy(cfg.kind, Some(&cur), &result.state)?;
        push(&mut record, step, &result.state, e, result.corrector_iters);
        observer(step, &result);
        prev = Some(std::mem::replace(&mut cur, result.state));
    }
    Ok(Trajectory {
        record,
        previous: prev,
        last: cur,
    })
}
