//! The five experiment commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Instant;

use serde_json::{json, Value};

use crate::diagnostics::{
    convergence_study, log_log_slope, reversibility_run, RunRecord, RunSummary,
};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::State;
use crate::profiles::{sine_profile, wavefront_profile, FrontKind, WaveFrontSpec};
use crate::schemes::{integrate, integrate_steps, SchemeConfig, Start};

use super::config::{reversal_name, Command, DtRule, ExperimentConfig, ProfileKind};
use super::snapshot::write_snapshot;

/// Steps discarded before timing starts.
pub const BENCH_WARMUP: usize = 5;
/// Timed repetitions; the median is reported.
pub const BENCH_REPEATS: usize = 3;
/// Largest acceptable fitted exponent of per-step cost against point count.
pub const BENCH_MAX_EXPONENT: f64 = 1.3;

/// What a command did. Failed runs are listed in `failures`; the files of the
/// runs that succeeded are still written.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
    pub summary: Value,
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Report> {
    fs::create_dir_all(&cfg.out).map_err(|e| {
        Error::Config(format!("cannot create output directory {}: {e}", cfg.out.display()))
    })?;
    let mut report = match cfg.command {
        Command::Run => cmd_run(cfg)?,
        Command::Conserve => cmd_conserve(cfg)?,
        Command::Convergence => cmd_convergence(cfg)?,
        Command::Reversibility => cmd_reversibility(cfg)?,
        Command::Bench => cmd_bench(cfg)?,
    };
    if let Value::Object(map) = &mut report.summary {
        map.insert("config".into(), cfg.describe());
        map.insert("failures".into(), json!(report.failures));
    }
    let path = cfg.out.join("summary.json");
    let text = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    report.files.push(path);
    Ok(report)
}

pub fn initial_state(profile: ProfileKind, cfg: &ExperimentConfig, g: &GridSpec) -> Result<State> {
    match profile {
        ProfileKind::Sine => Ok(sine_profile(g)),
        ProfileKind::Front(kind) => {
            let mut spec = WaveFrontSpec::new(kind, cfg.sigma);
            spec.cross_section = cfg.cross_section;
            wavefront_profile(&spec, g)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_invariants(path: &Path, record: &RunRecord) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "step,t,energy,momentum_x,momentum_y,corrector_iters,wall_seconds").map_err(io)?;
    for r in &record.series {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            r.step, r.t, r.energy, r.momentum_x, r.momentum_y, r.corrector_iters, r.wall_seconds
        )
        .map_err(io)?;
    }
    finish(path, w)
}

fn write_rows(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for r in rows {
        writeln!(w, "{r}").map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

fn run_entry(label: &str, g: &GridSpec, dt: f64, outcome: std::result::Result<&RunSummary, &Error>) -> Value {
    let mut v = json!({
        "scheme": label,
        "grid": format!("{}x{}", g.nx(), g.ny()),
        "dt": dt,
    });
    let map = v.as_object_mut().expect("object");
    match outcome {
        Ok(s) => {
            map.insert("status".into(), json!("ok"));
            if let Value::Object(stats) = serde_json::to_value(s).expect("summary serializes") {
                map.extend(stats);
            }
        }
        Err(e) => {
            map.insert("status".into(), json!("failed"));
            map.insert("error".into(), json!(e.to_string()));
        }
    }
    v
}

/// Numerical failures are recorded and the command goes on; anything else aborts.
fn triage<T>(r: Result<T>, what: &str, failures: &mut Vec<String>) -> Result<std::result::Result<T, Error>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) if e.is_numerical() => {
            failures.push(format!("{what}: {e}"));
            Ok(Err(e))
        }
        Err(e) => Err(e),
    }
}

fn cmd_run(cfg: &ExperimentConfig) -> Result<Report> {
    let g = cfg.grid_spec()?;
    let scheme = cfg.schemes_for(&g)?[0];
    let s0 = initial_state(cfg.profile, cfg, &g)?;
    let mut report = Report::default();
    let snap_path = |step: usize| cfg.out.join(snapshot_name(step));
    let mut snap_error = None;
    if cfg.snapshot_every > 0 {
        write_snapshot(&s0.u, s0.t, &snap_path(0))?;
        report.files.push(snap_path(0));
    }
    let mut u2_max = s0.u.c2.max_abs();
    let run = integrate(&s0, &scheme, s0.t + cfg.t_final, |step, r| {
        u2_max = u2_max.max(r.state.u.c2.max_abs());
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 && snap_error.is_none() {
            match write_snapshot(&r.state.u, r.state.t, &snap_path(step)) {
                Ok(()) => report.files.push(snap_path(step)),
                Err(e) => snap_error = Some(e),
            }
        }
    });
    if let Some(e) = snap_error {
        return Err(e);
    }
    let label = scheme.label();
    let entry = match triage(run, &label, &mut report.failures)? {
        Ok(tr) => {
            let path = cfg.out.join("invariants.csv");
            write_invariants(&path, &tr.record)?;
            report.files.push(path);
            let mut e = run_entry(&label, &g, scheme.dt, Ok(&tr.record.summary()?));
            e["max_abs_u2"] = json!(u2_max);
            e
        }
        Err(e) => run_entry(&label, &g, scheme.dt, Err(&e)),
    };
    report.summary = json!({ "runs": [entry] });
    Ok(report)
}

fn cmd_conserve(cfg: &ExperimentConfig) -> Result<Report> {
    let g = cfg.grid_spec()?;
    let schemes = cfg.schemes_for(&g)?;
    let s0 = initial_state(cfg.profile, cfg, &g)?;
    let t_end = s0.t + cfg.t_final;
    let results: Vec<(Result<_>, f64)> = thread::scope(|scope| {
        let handles: Vec<_> = schemes
            .iter()
            .map(|scheme| {
                let s0 = &s0;
                scope.spawn(move || {
                    let mut u2_max = s0.u.c2.max_abs();
                    let r = integrate(s0, scheme, t_end, |_, r| {
                        u2_max = u2_max.max(r.state.u.c2.max_abs());
                    });
                    (r, u2_max)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("conservation run panicked"))
            .collect()
    });

    let mut report = Report::default();
    let mut runs = Vec::new();
    for (scheme, (run, u2_max)) in schemes.iter().zip(results) {
        let label = scheme.label();
        match triage(run, &label, &mut report.failures)? {
            Ok(tr) => {
                let dir = cfg.out.join(&label);
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let path = dir.join("invariants.csv");
                write_invariants(&path, &tr.record)?;
                report.files.push(path);
                let mut e = run_entry(&label, &g, scheme.dt, Ok(&tr.record.summary()?));
                e["max_abs_u2"] = json!(u2_max);
                runs.push(e);
            }
            Err(e) => runs.push(run_entry(&label, &g, scheme.dt, Err(&e))),
        }
    }
    report.summary = json!({ "runs": runs });
    Ok(report)
}

fn cmd_convergence(cfg: &ExperimentConfig) -> Result<Report> {
    let DtRule::DxRatio(ratio) = cfg.dt_rule else {
        return Err(Error::Config("convergence needs dt_dx_ratio".into()));
    };
    let mut report = Report::default();
    let mut studies = Vec::new();
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for scheme in &cfg.schemes {
        let label = scheme.label();
        let study = convergence_study(
            |g| initial_state(cfg.profile, cfg, g),
            scheme,
            &cfg.grids,
            cfg.reference,
            cfg.alpha,
            cfg.t_final,
            ratio,
        );
        match triage(study, &label, &mut report.failures)? {
            Ok(r) => {
                for p in &r.points {
                    rows.push(format!("{:.16e},{:.16e}", p.h, p.error));
                }
                for (n, s) in &r.levels {
                    let g = GridSpec::square(*n, cfg.alpha)?;
                    runs.push(run_entry(&label, &g, ratio * g.dx(), Ok(s)));
                }
                studies.push(json!({
                    "scheme": label,
                    "points": r.points,
                    "slope": r.slope,
                }));
            }
            Err(e) => studies.push(json!({ "scheme": label, "error": e.to_string() })),
        }
    }
    let path = cfg.out.join("convergence.csv");
    write_rows(&path, "h,error", &rows)?;
    report.files.push(path);
    report.summary = json!({ "runs": runs, "convergence": studies });
    Ok(report)
}

/// One row of the reversibility table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversalCase {
    pub scheme: SchemeConfig,
    pub profile: FrontKind,
    pub alpha_over_sigma: f64,
    pub dt_rule: DtRule,
}

fn case(name: &str, profile: FrontKind, alpha_over_sigma: f64, dt_over_dx: f64) -> ReversalCase {
    ReversalCase {
        scheme: name.parse().expect("built-in scheme name"),
        profile,
        alpha_over_sigma,
        dt_rule: DtRule::DxRatio(dt_over_dx),
    }
}

/// The cases a reversibility command runs.
pub fn reversal_cases(cfg: &ExperimentConfig) -> Vec<ReversalCase> {
    use FrontKind::*;
    if cfg.custom_case {
        let ProfileKind::Front(kind) = cfg.profile else {
            return Vec::new();
        };
        return cfg
            .schemes
            .iter()
            .map(|&scheme| ReversalCase {
                scheme,
                profile: kind,
                alpha_over_sigma: cfg.alpha / cfg.sigma,
                dt_rule: cfg.dt_rule,
            })
            .collect();
    }
    let mut cases = Vec::new();
    if cfg.full_scale {
        for name in ["scheme1-fixed=5", "scheme2", "scheme3"] {
            for kind in [Plate, Parallel, Star] {
                for r in [1.0, 0.5, 0.25, 0.125] {
                    cases.push(case(name, kind, r, 0.25));
                }
            }
        }
    } else {
        cases.push(case("scheme2", Plate, 1.0, 0.25));
        cases.push(case("scheme3", Star, 1.0, 0.25));
        cases.push(case("scheme2", Plate, 0.125, 0.25));
        cases.push(case("scheme1-fixed=5", Parallel, 0.125, 0.25));
    }
    cases.push(case("scheme2", Plate, 0.125, 0.0625));
    cases.push(case("scheme1", Parallel, 0.125, 0.25));
    cases
}

fn cmd_reversibility(cfg: &ExperimentConfig) -> Result<Report> {
    let cases = reversal_cases(cfg);
    let setups = cases
        .iter()
        .map(|c| {
            let g = GridSpec::new(cfg.grid.0, cfg.grid.1, c.alpha_over_sigma * cfg.sigma)
                .map_err(|e| Error::Config(e.to_string()))?;
            let scheme = c
                .scheme
                .with_dt(c.dt_rule.dt(&g))
                .map_err(|e| Error::Config(e.to_string()))?;
            let s0 = initial_state(ProfileKind::Front(c.profile), cfg, &g)?;
            Ok((g, scheme, s0))
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<_> = thread::scope(|scope| {
        let handles: Vec<_> = setups
            .iter()
            .map(|(_, scheme, s0)| {
                scope.spawn(move || reversibility_run(s0, scheme, s0.t + cfg.t_final, cfg.reversal))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("reversibility run panicked"))
            .collect()
    });

    let mut report = Report::default();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut table = Vec::new();
    for ((c, (g, scheme, _)), res) in cases.iter().zip(&setups).zip(results) {
        let label = scheme.label();
        let dt_over_dx = scheme.dt / g.dx();
        let what = format!("{label} {} alpha/sigma={}", c.profile, c.alpha_over_sigma);
        match triage(res, &what, &mut report.failures)? {
            Ok(out) => {
                let percent = 100.0 * out.error;
                rows.push(format!(
                    "{label},{},{:.16e},{:.16e},{:.16e}",
                    c.profile, c.alpha_over_sigma, dt_over_dx, percent
                ));
                table.push(json!({
                    "scheme": label,
                    "profile": c.profile.to_string(),
                    "alpha_over_sigma": c.alpha_over_sigma,
                    "dt_over_dx": dt_over_dx,
                    "rel_error_percent": percent,
                }));
                runs.push(run_entry(&label, g, scheme.dt, Ok(&out.forward)));
            }
            Err(e) => runs.push(run_entry(&label, g, scheme.dt, Err(&e))),
        }
    }
    let path = cfg.out.join("reversibility.csv");
    write_rows(
        &path,
        "scheme,profile,alpha_over_sigma,dt_over_dx,rel_error_percent",
        &rows,
    )?;
    report.files.push(path);
    report.summary = json!({
        "runs": runs,
        "reversibility": table,
        "protocol": reversal_name(cfg.reversal),
        "t_final": cfg.t_final,
    });
    Ok(report)
}

/// Median over repetitions of the mean wall time per step, after a warmup.
pub fn time_steps(s0: &State, scheme: &SchemeConfig, steps: usize) -> Result<(f64, RunRecord)> {
    let total = BENCH_WARMUP + BENCH_REPEATS * steps;
    let mut stamps = Vec::with_capacity(total);
    let tr = integrate_steps(Start::Single(s0.clone()), scheme, total, |_, _| {
        stamps.push(Instant::now());
    })?;
    let mut means: Vec<f64> = (0..BENCH_REPEATS)
        .map(|r| {
            let start = stamps[BENCH_WARMUP + r * steps - 1];
            let end = stamps[BENCH_WARMUP + (r + 1) * steps - 1];
            end.duration_since(start).as_secs_f64() / steps as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    Ok((means[BENCH_REPEATS / 2], tr.record))
}

fn cmd_bench(cfg: &ExperimentConfig) -> Result<Report> {
    let mut grids = cfg.grids.clone();
    grids.sort_unstable();
    grids.dedup();
    let mut report = Report::default();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut timings: Vec<(String, usize, f64)> = Vec::new();
    for &n in &grids {
        let g = GridSpec::square(n, cfg.alpha).map_err(|e| Error::Config(e.to_string()))?;
        let s0 = initial_state(cfg.profile, cfg, &g)?;
        for scheme in cfg.schemes_for(&g)? {
            let label = scheme.label();
            match triage(time_steps(&s0, &scheme, cfg.steps), &format!("{label} {g}"), &mut report.failures)? {
                Ok((secs, record)) => {
                    rows.push(format!("{},{label},{secs:.16e}", g.len()));
                    timings.push((label.clone(), g.len(), secs));
                    runs.push(run_entry(&label, &g, scheme.dt, Ok(&record.summary()?)));
                }
                Err(e) => runs.push(run_entry(&label, &g, scheme.dt, Err(&e))),
            }
        }
    }
    let path = cfg.out.join("bench.csv");
    write_rows(&path, "grid_points,scheme,seconds_per_step", &rows)?;
    report.files.push(path);

    let mut scaling = Vec::new();
    for scheme in &cfg.schemes {
        let label = scheme.label();
        let (pts, secs): (Vec<f64>, Vec<f64>) = timings
            .iter()
            .filter(|t| t.0 == label)
            .map(|t| (t.1 as f64, t.2))
            .unzip();
        let exponent = if pts.len() >= 2 { log_log_slope(&pts, &secs) } else { None };
        scaling.push(json!({
            "scheme": label,
            "exponent": exponent,
            "exponent_skipped": exponent.is_none(),
            "sub_quadratic": exponent.map(|e| e <= BENCH_MAX_EXPONENT),
        }));
    }
    let mut ratios = Vec::new();
    for &n in &grids {
        let find = |name: &str| {
            timings
                .iter()
                .find(|t| t.0 == name && t.1 == n * n)
                .map(|t| t.2)
        };
        if let (Some(s2), Some(s3)) = (find("scheme2"), find("scheme3")) {
            ratios.push(json!({ "grid_points": n * n, "scheme2_over_scheme3": s2 / s3 }));
        }
    }
    report.summary = json!({
        "runs": runs,
        "scaling": scaling,
        "ratios": ratios,
        "warmup_steps": BENCH_WARMUP,
        "repeats": BENCH_REPEATS,
    });
    Ok(report)
}

/// Field snapshots written by `run` are named after their step.
pub fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step:06}.epdf")
}
