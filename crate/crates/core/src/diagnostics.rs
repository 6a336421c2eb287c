//! Invariant statistics, error norms, reversibility and convergence studies.

use std::thread;

use serde::Serialize;

use crate::model::State;
use crate::error::{Error, Result};
use crate::grid::{FieldPair, GridSpec, ScalarField};
use crate::schemes::{integrate, integrate_steps, step_count, SchemeConfig, SchemeKind, Start};

/// One row of the invariant time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub momentum_x: f64,
    pub momentum_y: f64,
    pub corrector_iters: usize,
    pub wall_seconds: f64,
}

/// Output of one integration.
///
/// The energy column holds the scheme's own discrete energy. For the two-step
/// schemes it is the half-level energy between consecutive levels, so their
/// series starts once two levels exist.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scheme: SchemeKind,
    pub grid: GridSpec,
    pub dt: f64,
    pub series: Vec<SeriesRow>,
    pub snapshots: Vec<(f64, FieldPair)>,
}

impl RunRecord {
    pub fn new(scheme: SchemeKind, grid: GridSpec, dt: f64) -> Self {
        Self {
            scheme,
            grid,
            dt,
            series: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn energies(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.energy).collect()
    }

    pub fn momenta_x(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.momentum_x).collect()
    }

    pub fn momenta_y(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.momentum_y).collect()
    }

    /// Steps actually taken (the last step index in the series).
    pub fn steps(&self) -> usize {
        self.series.last().map_or(0, |r| r.step)
    }

    /// Mean corrector passes over the rows after the first.
    pub fn mean_corrector_iters(&self) -> f64 {
        let rows = &self.series[1.min(self.series.len())..];
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|r| r.corrector_iters as f64).sum::<f64>() / rows.len() as f64
    }

    pub fn summary(&self) -> Result<RunSummary> {
        Ok(RunSummary {
            steps: self.steps(),
            mean_corrector_iters: self.mean_corrector_iters(),
            energy: InvariantStats::of(&self.energies())?,
            momentum_x: InvariantStats::of(&self.momenta_x())?,
            momentum_y: InvariantStats::of(&self.momenta_y())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantStats {
    pub total_variation: f64,
    pub sup_deviation: f64,
}

impl InvariantStats {
    pub fn of(series: &[f64]) -> Result<Self> {
        let (total_variation, sup_deviation) = invariant_stats(series)?;
        Ok(Self {
            total_variation,
            sup_deviation,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub mean_corrector_iters: f64,
    pub energy: InvariantStats,
    pub momentum_x: InvariantStats,
    pub momentum_y: InvariantStats,
}

/// `(Σ |s[i+1] - s[i]|, max |s[i] - s[0]|)`.
pub fn invariant_stats(series: &[f64]) -> Result<(f64, f64)> {
    let first = *series
        .first()
        .ok_or_else(|| Error::invalid("invariant series is empty"))?;
    let tv = series.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let sup = series.iter().map(|s| (s - first).abs()).fold(0.0, f64::max);
    Ok((tv, sup))
}

/// `‖a - b‖ / ‖b‖`.
pub fn relative_l2_error(a: &FieldPair, b: &FieldPair) -> Result<f64> {
    let denom = b.norm();
    if denom == 0.0 {
        return Err(Error::invalid("relative error against a zero reference"));
    }
    Ok(a.sub(b)?.norm() / denom)
}

/// How a finished run is turned around for the backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReversalProtocol {
    /// Negate the last level (two-step schemes: the last two levels, swapped)
    /// and continue without a fresh bootstrap. Exact up to rounding for the
    /// two-step schemes.
    NegateSwap,
    /// Negate only the last level and start again with the configured bootstrap.
    #[default]
    Restart,
}

/// Forward to `t_final`, reverse, forward again, and compare with the start.
pub fn reversibility_test(initial: &State, cfg: &SchemeConfig, t_final: f64) -> Result<f64> {
    reversibility_test_with(initial, cfg, t_final, ReversalProtocol::default())
}

pub fn reversibility_test_with(
    initial: &State,
    cfg: &SchemeConfig,
    t_final: f64,
    protocol: ReversalProtocol,
) -> Result<f64> {
    Ok(reversibility_run(initial, cfg, t_final, protocol)?.error)
}

/// Result of a forward-and-back run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReversalOutcome {
    /// Relative L2 distance between the returned and the initial velocity.
    pub error: f64,
    pub forward: RunSummary,
    pub backward: RunSummary,
}

/// As [`reversibility_test_with`], also returning the statistics of both legs.
pub fn reversibility_run(
    initial: &State,
    cfg: &SchemeConfig,
    t_final: f64,
    protocol: ReversalProtocol,
) -> Result<ReversalOutcome> {
    let n = step_count(t_final - initial.t, cfg.dt)?;
    let forward = integrate(initial, cfg, t_final, |_, _| {})?;
    let t0 = initial.t;
    let reseed = |s: &State, t: f64| State {
        t,
        ..s.negated()
    };
    let back = match (protocol, cfg.kind.is_multistep(), forward.previous.as_ref()) {
        (ReversalProtocol::NegateSwap, true, Some(prev)) if n >= 2 => {
            let start = Start::Pair {
                previous: reseed(&forward.last, t0),
                current: reseed(prev, t0 + cfg.dt),
            };
            let tr = integrate_steps(start, cfg, n - 1, |_, _| {})?;
            (tr.record.summary()?, tr.last)
        }
        (ReversalProtocol::NegateSwap, true, Some(prev)) => {
            let s = reseed(prev, t0 + cfg.dt);
            let mut record = RunRecord::new(cfg.kind, *s.grid(), cfg.dt);
            let (px, py) = crate::model::linear_momenta(&s);
            record.series.push(SeriesRow {
                step: 0,
                t: s.t,
                energy: crate::model::energy_scheme1(&s),
                momentum_x: px,
                momentum_y: py,
                corrector_iters: 0,
                wall_seconds: 0.0,
            });
            (record.summary()?, s)
        }
        _ => {
            let tr = integrate_steps(Start::Single(reseed(&forward.last, t0)), cfg, n, |_, _| {})?;
            (tr.record.summary()?, tr.last)
        }
    };
    let (backward, back) = back;
    Ok(ReversalOutcome {
        error: relative_l2_error(&back.u.scale(-1.0), &initial.u)?,
        forward: forward.record.summary()?,
        backward,
    })
}

/// Pointwise restriction of a field on a fine grid to a nested coarse grid.
pub fn restrict(fine: &FieldPair, coarse: &GridSpec) -> Result<FieldPair> {
    let fg = fine.grid();
    if fg.nx() % coarse.nx() != 0 || fg.ny() % coarse.ny() != 0 {
        return Err(Error::invalid(format!(
            "grid {coarse} is not nested in {fg}"
        )));
    }
    let (fx, fy) = (fg.nx() / coarse.nx(), fg.ny() / coarse.ny());
    let sample = |f: &ScalarField| {
        ScalarField::from_index_fn(*coarse, |k, j| f.at((k * fx) as isize, (j * fy) as isize))
    };
    Ok(FieldPair {
        c1: sample(&fine.c1),
        c2: sample(&fine.c2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub h: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub points: Vec<ConvergencePoint>,
    /// Invariant statistics of every level that was run, reference included.
    pub levels: Vec<(usize, RunSummary)>,
    /// Least-squares slope of `log error` against `log h`; absent with fewer
    /// than two levels or a zero error.
    pub slope: Option<f64>,
}

/// Runs each square grid in `sizes` and the `reference` grid to `t_final` with
/// `dt = dt_over_dx · dx` and reports the relative L2 distance of the final
/// velocity to the restricted reference.
pub fn convergence_study<F>(
    profile: F,
    template: &SchemeConfig,
    sizes: &[usize],
    reference: usize,
    alpha: f64,
    t_final: f64,
    dt_over_dx: f64,
) -> Result<ConvergenceResult>
where
    F: Fn(&GridSpec) -> Result<State> + Sync,
{
    if sizes.is_empty() {
        return Err(Error::invalid("no grid sizes given"));
    }
    for &n in sizes {
        if n == 0 || n > reference || reference % n != 0 {
            return Err(Error::invalid(format!(
                "grid size {n} does not divide the reference size {reference}"
            )));
        }
    }
    let run = |n: usize| -> Result<(FieldPair, RunSummary)> {
        let grid = GridSpec::square(n, alpha)?;
        let cfg = template.with_dt(dt_over_dx * grid.dx())?;
        let s0 = profile(&grid)?;
        let tr = integrate(&s0, &cfg, s0.t + t_final, |_, _| {})?;
        Ok((tr.last.u, tr.record.summary()?))
    };
    let mut all: Vec<usize> = sizes.to_vec();
    if !all.contains(&reference) {
        all.push(reference);
    }
    let finals: Vec<Result<(FieldPair, RunSummary)>> = thread::scope(|scope| {
        let handles: Vec<_> = all.iter().map(|&n| scope.spawn(move || run(n))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("convergence level panicked"))
            .collect()
    });
    let mut finals = all.iter().copied().zip(finals);
    let mut by_size = Vec::new();
    let mut levels = Vec::new();
    let mut reference_u = None;
    for (n, run) in &mut finals {
        let (u, summary) = run?;
        levels.push((n, summary));
        if n == reference {
            reference_u = Some(u.clone());
        }
        by_size.push((n, u));
    }
    let reference_u = reference_u.expect("reference level was run");

    let mut points = Vec::new();
    for &n in sizes {
        let u = &by_size.iter().find(|(m, _)| *m == n).expect("level was run").1;
        let r = restrict(&reference_u, u.grid())?;
        points.push(ConvergencePoint {
            n,
            h: u.grid().dx(),
            error: relative_l2_error(u, &r)?,
        });
    }
    let slope = fit_slope(&points);
    Ok(ConvergenceResult {
        points,
        levels,
        slope,
    })
}

fn fit_slope(points: &[ConvergencePoint]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|p| !(p.error > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.h).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error).collect();
    log_log_slope(&xs, &ys)
}

/// Least-squares slope of `ln ys` against `ln xs`. All values must be positive.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
