//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::thread;

use common::{field, pair, rng, state};
use epdiff::harness::{self, Command, Settings};
use epdiff::helmholtz::dense_q;
use epdiff::profiles::DEFAULT_SIGMA;
use epdiff::stencil::{d2x, d2y};
use epdiff::{
    apply_q, convergence_study, d1x, d1y, d2, dminus_x, dminus_y, dplus_x, dplus_y, dvd_scheme1,
    dvd_scheme3, energy_half_scheme2, energy_half_scheme3, energy_scheme1, gamma_apply, hadamard,
    inner, integrate, integrate_steps, norm, reversibility_test_with, sine_profile,
    solvability_dt_bound, solve_q, solve_q_dense, step_scheme3, wavefront_profile, CorrectorMode,
    FieldPair, FrontKind, GridSpec, ReversalProtocol, ScalarField, SchemeConfig, SchemeKind, Start,
    State, WaveFrontSpec,
};
use nalgebra::{DMatrix, DVector};
use serde_json::Value;

const RANDOM_CASES: u64 = 128;
const SLACK: f64 = 1.0 + 1e-14;
const REVERSAL_T: f64 = 0.25;
const CONVERGENCE_T: f64 = 0.375;
const CONVERGENCE_DT_DX: f64 = 0.5;
const ALL: [&str; 5] = ["scheme1", "scheme1-fixed=5", "scheme2", "scheme3", "rk4"];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn check(id: u32, pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { id, pass, detail: detail.into() }
}

fn scheme(name: &str, dt: f64) -> SchemeConfig {
    name.parse::<SchemeConfig>().unwrap().with_dt(dt).unwrap()
}

fn random_grid(seed: u64, max: usize) -> GridSpec {
    use rand::Rng;
    let mut r = rng(seed ^ 0x9e37_79b9);
    GridSpec::new(r.gen_range(3..=max), r.gen_range(3..=max), r.gen_range(0.05..2.0)).unwrap()
}

fn run_command(command: Command, pairs: &[(&str, &str)]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Settings::new();
    s.set("out", dir.path().display()).unwrap();
    for (k, v) in pairs {
        s.set(k, v).unwrap();
    }
    let cfg = harness::load(command, None, &s).unwrap();
    harness::execute(&cfg).unwrap().summary
}

fn stat(run: &Value, invariant: &str, which: &str) -> f64 {
    run[invariant][which].as_f64().unwrap_or(f64::NAN)
}

fn conservation() -> Vec<Outcome> {
    let summary = run_command(Command::Conserve, &[]);
    let runs = summary["runs"].as_array().unwrap();
    let get = |label: &str| runs.iter().find(|r| r["scheme"] == label).unwrap();
    let (s1, s1f, s2, s3, rk) = (get("scheme1"), get("scheme1-fixed=5"), get("scheme2"), get("scheme3"), get("rk4"));
    let ok = runs.iter().all(|r| r["status"] == "ok");
    let tv = |r: &Value, inv: &str| stat(r, inv, "total_variation");
    let sup = |r: &Value, inv: &str| stat(r, inv, "sup_deviation");
    let u2_max = runs.iter().map(|r| r["max_abs_u2"].as_f64().unwrap_or(f64::NAN)).fold(0.0, f64::max);
    vec![
        check(
            1,
            ok && tv(s2, "energy") <= 1e-8 && sup(s2, "energy") <= 1e-10,
            format!("scheme2 energy tv {:.3e} sup {:.3e}", tv(s2, "energy"), sup(s2, "energy")),
        ),
        check(2, ok && tv(s3, "energy") <= 1e-8, format!("scheme3 energy tv {:.3e}", tv(s3, "energy"))),
        check(3, ok && tv(s1, "energy") <= 1e-7, format!("scheme1 energy tv {:.3e}", tv(s1, "energy"))),
        check(
            4,
            ok && tv(s1f, "energy") >= 1e-2 && tv(s1f, "momentum_x") <= 1e-7,
            format!(
                "scheme1-fixed=5 energy tv {:.3e}, momentum_x tv {:.3e}",
                tv(s1f, "energy"),
                tv(s1f, "momentum_x")
            ),
        ),
        check(5, ok && tv(rk, "energy") >= 1e-3, format!("rk4 energy tv {:.3e}", tv(rk, "energy"))),
        check(
            6,
            ok && tv(s1, "momentum_x") <= 1e-7
                && tv(s2, "momentum_x") <= 1e-7
                && tv(s3, "momentum_x") >= 1e-2
                && sup(s3, "momentum_x") >= 1e-3,
            format!(
                "momentum_x tv scheme1 {:.3e} scheme2 {:.3e}; scheme3 tv {:.3e} sup {:.3e}",
                tv(s1, "momentum_x"),
                tv(s2, "momentum_x"),
                tv(s3, "momentum_x"),
                sup(s3, "momentum_x")
            ),
        ),
        check(
            7,
            ok && sup(s1, "momentum_y") <= 1e-12 && sup(s2, "momentum_y") <= 1e-12 && u2_max <= 1e-12,
            format!(
                "momentum_y sup scheme1 {:.3e} scheme2 {:.3e}; max |U2| {:.3e}",
                sup(s1, "momentum_y"),
                sup(s2, "momentum_y"),
                u2_max
            ),
        ),
    ]
}

/// Relative reversal error in percent.
fn reversal(n: usize, name: &str, kind: FrontKind, alpha_over_sigma: f64, dt_over_dx: f64) -> f64 {
    let g = GridSpec::square(n, alpha_over_sigma * DEFAULT_SIGMA).unwrap();
    let s0 = wavefront_profile(&WaveFrontSpec::new(kind, DEFAULT_SIGMA), &g).unwrap();
    let cfg = scheme(name, dt_over_dx * g.dx());
    reversibility_test_with(&s0, &cfg, REVERSAL_T, ReversalProtocol::Restart)
        .map_or(f64::NAN, |e| 100.0 * e)
}

fn reversibility() -> Outcome {
    let cases = [
        ("scheme2", FrontKind::Plate, 1.0, 0.25),
        ("scheme3", FrontKind::Star, 1.0, 0.25),
        ("scheme2", FrontKind::Plate, 0.125, 0.25),
        ("scheme2", FrontKind::Plate, 0.125, 0.0625),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [200, 100] {
        let e: Vec<f64> = thread::scope(|scope| {
            let handles: Vec<_> = cases
                .iter()
                .map(|&(name, kind, a, r)| scope.spawn(move || reversal(n, name, kind, a, r)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        pass &= e[0] <= 0.1 && e[1] <= 0.1 && e[3] < e[2];
        detail.push(format!(
            "{n}x{n}: plate {:.4}%, star {:.4}%, plate a/8 {:.4}% -> {:.4}%",
            e[0], e[1], e[2], e[3]
        ));
    }
    check(8, pass, detail.join("; "))
}

fn convergence() -> Outcome {
    let alpha = DEFAULT_SIGMA;
    let study = convergence_study(
        |g| wavefront_profile(&WaveFrontSpec::new(FrontKind::Plate, DEFAULT_SIGMA), g),
        &scheme("scheme2", 0.01),
        &[32, 64, 128],
        256,
        alpha,
        CONVERGENCE_T,
        CONVERGENCE_DT_DX,
    );
    match study {
        Ok(r) => {
            let slope = r.slope.unwrap_or(f64::NAN);
            let errors: Vec<String> = r.points.iter().map(|p| format!("{:.3}", p.error)).collect();
            check(
                9,
                (0.8..=1.3).contains(&slope),
                format!("slope {slope:.3}, errors [{}]", errors.join(", ")),
            )
        }
        Err(e) => check(9, false, e.to_string()),
    }
}

fn bench() -> Outcome {
    let summary = run_command(Command::Bench, &[("scheme", "scheme1,scheme1-fixed=3,scheme2,scheme3,rk4")]);
    let mut pass = true;
    let mut detail = Vec::new();
    for s in summary["scaling"].as_array().unwrap() {
        let e = s["exponent"].as_f64().unwrap_or(f64::NAN);
        pass &= e <= 1.3;
        detail.push(format!("{} exponent {e:.3}", s["scheme"].as_str().unwrap()));
    }
    let ratios = summary["ratios"].as_array().unwrap();
    let large: Vec<&Value> = ratios.iter().filter(|r| r["grid_points"].as_u64().unwrap() >= 200 * 200).collect();
    pass &= !large.is_empty();
    for r in large {
        let q = r["scheme2_over_scheme3"].as_f64().unwrap();
        pass &= q <= 0.5;
        detail.push(format!("scheme2/scheme3 at {} points {q:.3}", r["grid_points"]));
    }
    pass &= summary["failures"].as_array().unwrap().is_empty();
    check(10, pass, detail.join("; "))
}

fn rel_close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale
}

fn adjointness() -> Outcome {
    let mut bad = 0;
    for seed in 0..RANDOM_CASES {
        let g = random_grid(seed, 20);
        let mut r = rng(seed);
        let (f, h) = (field(g, &mut r), field(g, &mut r));
        for d in [d1x, d1y] {
            bad += usize::from(!rel_close(inner(&f, &d(&h)).unwrap(), -inner(&d(&f), &h).unwrap(), norm(&f) * norm(&d(&h)), 1e-12));
        }
        for op in [d2, apply_q] {
            bad += usize::from(!rel_close(inner(&f, &op(&h)).unwrap(), inner(&op(&f), &h).unwrap(), norm(&f) * norm(&op(&h)), 1e-12));
        }
        let (m, u, v) = (pair(g, &mut r), pair(g, &mut r), pair(g, &mut r));
        let a = v.inner(&gamma_apply(&m, &u).unwrap()).unwrap();
        let b = u.inner(&gamma_apply(&m, &v).unwrap()).unwrap();
        let scale = m.norm() * u.norm() * v.norm() / g.cell_area().sqrt();
        bad += usize::from((a + b).abs() > 1e-12 * scale);
    }
    check(11, bad == 0, format!("{RANDOM_CASES} random cases, {bad} violations"))
}

fn zero_sum_and_parts() -> Outcome {
    let mut bad = 0;
    for seed in 0..RANDOM_CASES {
        let g = random_grid(seed + 1000, 20);
        let mut r = rng(seed + 1000);
        let (f, h) = (field(g, &mut r), field(g, &mut r));
        let ones = ScalarField::constant(g, 1.0);
        for d in [d1x, d1y, d2] {
            bad += usize::from(inner(&ones, &d(&f)).unwrap().abs() > 1e-12 * norm(&f));
        }
        let s = state(g, &mut r);
        let flux = gamma_apply(&s.m, &s.u).unwrap();
        let scale = s.m.norm() * s.u.norm() / g.cell_area().sqrt();
        bad += usize::from(flux.c1.integral().abs() > 1e-12 * scale || flux.c2.integral().abs() > 1e-12 * scale);
        type Op = fn(&ScalarField) -> ScalarField;
        let parts: [(Op, Op, Op); 2] = [(d2x, dplus_x, dminus_x), (d2y, dplus_y, dminus_y)];
        for (second, plus, minus) in parts {
            let lhs = inner(&f, &second(&h)).unwrap();
            let rhs = -(inner(&plus(&f), &plus(&h)).unwrap() + inner(&minus(&f), &minus(&h)).unwrap()) / 2.0;
            bad += usize::from(!rel_close(lhs, rhs, norm(&f) * norm(&second(&h)), 1e-12));
        }
    }
    check(12, bad == 0, format!("{RANDOM_CASES} random cases, {bad} violations"))
}

fn norm_bounds() -> Outcome {
    let mut bad = 0;
    for seed in 0..RANDOM_CASES {
        let g = random_grid(seed + 2000, 24);
        let mut r = rng(seed + 2000);
        let (v, w) = (field(g, &mut r), field(g, &mut r));
        let n = norm(&v);
        let (dx, dy) = (g.dx(), g.dy());
        bad += usize::from(norm(&d1x(&v)) > n / dx * SLACK);
        bad += usize::from(norm(&d1y(&v)) > n / dy * SLACK);
        bad += usize::from(norm(&d2(&v)) > 4.0 * (1.0 / (dx * dx) + 1.0 / (dy * dy)) * n * SLACK);
        bad += usize::from(norm(&solve_q(&v).unwrap()) > n * SLACK);
        bad += usize::from(norm(&hadamard(&v, &w).unwrap()) > n * norm(&w) / g.cell_area().sqrt() * SLACK);
    }
    check(13, bad == 0, format!("{RANDOM_CASES} random cases, {bad} violations"))
}

fn energy_identities() -> Outcome {
    let mut bad = 0;
    for seed in 0..RANDOM_CASES {
        let g = random_grid(seed + 3000, 16);
        let mut r = rng(seed + 3000);
        let (a, b, c) = (state(g, &mut r), state(g, &mut r), state(g, &mut r));
        let dt = 0.01 + (seed as f64) / RANDOM_CASES as f64;

        let lhs = energy_scheme1(&c) - energy_scheme1(&a);
        let rate = c.m.lincomb(1.0 / dt, &a.m, -1.0 / dt).unwrap();
        let rhs = dt * dvd_scheme1(&a.u, &c.u).unwrap().inner(&rate).unwrap();
        bad += usize::from(!rel_close(lhs, rhs, energy_scheme1(&a).abs() + energy_scheme1(&c).abs(), 1e-11));

        let half = c.m.lincomb(0.5, &a.m, -0.5).unwrap();
        let (new, old) = (energy_half_scheme2(&b, &c).unwrap(), energy_half_scheme2(&a, &b).unwrap());
        bad += usize::from(!rel_close(new - old, b.u.inner(&half).unwrap(), new.abs() + old.abs(), 1e-11));

        let (new, old) = (energy_half_scheme3(&b, &c).unwrap(), energy_half_scheme3(&a, &b).unwrap());
        let rhs = dvd_scheme3(&a.u, &c.u).unwrap().inner(&half).unwrap();
        bad += usize::from(!rel_close(new - old, rhs, new.abs() + old.abs(), 1e-11));
    }
    check(14, bad == 0, format!("{RANDOM_CASES} random triples, {bad} violations"))
}

fn contraction() -> Outcome {
    let g = GridSpec::square(20, 1.0).unwrap();
    let s0 = sine_profile(&g);
    let dt = 0.99 * solvability_dt_bound(&s0.m);
    let cfg = SchemeConfig::new(SchemeKind::Scheme1PC, dt)
        .unwrap()
        .with_corrector(CorrectorMode::FixedCount(8))
        .unwrap();
    let (mut steps, mut bad, mut over_bound) = (0, 0, 0);
    let run = integrate_steps(Start::Single(s0), &cfg, 100, |_, r| {
        steps += 1;
        over_bound += usize::from(dt > solvability_dt_bound(&r.state.m));
        bad += usize::from(!r.corrector_increments.windows(2).all(|w| w[1] <= w[0]));
    });
    check(
        15,
        run.is_ok() && steps == 100 && bad == 0 && over_bound == 0,
        format!("dt {dt:.4e}, {steps} steps, {bad} non-monotone, {over_bound} above the bound"),
    )
}

fn equilibrium_and_reduction() -> Outcome {
    let mut worst = 0.0f64;
    let g = GridSpec::new(9, 7, 0.4).unwrap();
    let c = State::from_velocity(FieldPair::constant(g, 0.7, -1.3), 0.0).unwrap();
    let sine = sine_profile(&GridSpec::square(20, 1.0).unwrap());
    for name in ALL {
        match integrate(&c, &scheme(name, 0.05), 1.0, |_, _| {}) {
            Ok(tr) => worst = worst.max(tr.last.u.sub(&c.u).unwrap().max_abs()),
            Err(_) => worst = f64::INFINITY,
        }
        let run = integrate(&sine, &scheme(name, 0.01), 1.0, |_, r| {
            worst = worst.max(r.state.u.c2.max_abs()).max(r.state.u.c1.y_variation());
        });
        if run.is_err() {
            worst = f64::INFINITY;
        }
    }
    check(16, worst <= 1e-12, format!("largest deviation {worst:.3e} over all schemes"))
}

fn dense_scheme3(prev: &State, cur: &State, dt: f64) -> FieldPair {
    let g = *cur.grid();
    let n = g.len();
    let q = dense_q(&g);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&q);
    a.view_mut((n, n), (n, n)).copy_from(&q);
    for col in 0..2 * n {
        let mut e = vec![0.0; 2 * n];
        e[col] = 1.0;
        let ge = gamma_apply(&cur.m, &FieldPair::from_flat(g, &e).unwrap()).unwrap().to_flat();
        for (row, v) in ge.iter().enumerate() {
            a[(row, col)] += dt * v;
        }
    }
    let rhs = prev.m.lincomb(1.0, &gamma_apply(&cur.m, &prev.u).unwrap(), -dt).unwrap().to_flat();
    let x = a.lu().solve(&DVector::from_vec(rhs)).expect("nonsingular");
    FieldPair::from_flat(g, x.as_slice()).unwrap()
}

fn cross_validation() -> Outcome {
    let (mut linear, mut helmholtz) = (0.0f64, 0.0f64);
    for (k, j, alpha, seed) in [(8, 8, 1.0, 1), (12, 10, 0.3, 2), (16, 16, 0.15, 3), (16, 9, 2.0, 4)] {
        let g = GridSpec::new(k, j, alpha).unwrap();
        let mut r = rng(seed);
        let dt = 0.02;
        let prev = State::from_velocity(pair(g, &mut r), 0.0).unwrap();
        let cur = State::from_velocity(pair(g, &mut r), dt).unwrap();
        let want = dense_scheme3(&prev, &cur, dt);
        linear = match step_scheme3(&prev, &cur, dt) {
            Ok(next) => linear.max(next.state.u.sub(&want).unwrap().norm() / want.norm()),
            Err(_) => f64::INFINITY,
        };
        let m = field(g, &mut r);
        let (fast, slow) = (solve_q(&m).unwrap(), solve_q_dense(&m).unwrap());
        let diff = fast.sub(&slow).unwrap();
        helmholtz = helmholtz.max(norm(&diff) / norm(&slow));
    }
    check(
        17,
        linear <= 1e-10 && helmholtz <= 1e-12,
        format!("scheme3 vs dense {linear:.3e}, spectral vs dense Q {helmholtz:.3e}"),
    )
}

fn main() -> ExitCode {
    let mut outcomes = conservation();
    outcomes.push(reversibility());
    outcomes.push(convergence());
    outcomes.push(bench());
    outcomes.extend([
        adjointness(),
        zero_sum_and_parts(),
        norm_bounds(),
        energy_identities(),
        contraction(),
        equilibrium_and_reduction(),
        cross_validation(),
    ]);
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    for o in &outcomes {
        println!("{} criterion {:>2}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
