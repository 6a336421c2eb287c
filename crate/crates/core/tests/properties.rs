mod common;

use common::{field, grids, pair, rng, state};
use epdiff::schemes::{scheme1_residual, scheme2_residual, scheme3_residual};
use epdiff::stencil::{d2x, d2y};
use epdiff::{
    d1x, d1y, d2, dminus_x, dminus_y, dplus_x, dplus_y, dvd_scheme1, dvd_scheme3,
    energy_half_scheme2, energy_half_scheme3, energy_scheme1, gamma_apply, hadamard, inner,
    norm, solve_q, FieldPair, ScalarField,
};
use proptest::prelude::*;

const SLACK: f64 = 1.0 + 1e-14;

fn close(a: f64, b: f64, scale: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn laplacian_is_self_adjoint((g, seed) in grids(16)) {
        let mut r = rng(seed);
        let (f, h) = (field(g, &mut r), field(g, &mut r));
        let lhs = inner(&f, &d2(&h)).unwrap();
        let rhs = inner(&d2(&f), &h).unwrap();
        prop_assert!(close(lhs, rhs, norm(&f) * norm(&d2(&h)), 1e-12));
    }

    #[test]
    fn first_differences_are_skew_adjoint((g, seed) in grids(16)) {
        let mut r = rng(seed);
        let (f, h) = (field(g, &mut r), field(g, &mut r));
        for d in [d1x, d1y] {
            let lhs = inner(&f, &d(&h)).unwrap();
            let rhs = -inner(&h, &d(&f)).unwrap();
            prop_assert!(close(lhs, rhs, norm(&f) * norm(&d(&h)), 1e-12));
        }
    }

    #[test]
    fn differences_sum_to_zero((g, seed) in grids(16)) {
        let f = field(g, &mut rng(seed));
        let ones = ScalarField::constant(g, 1.0);
        for d in [d1x, d1y, d2] {
            prop_assert!(inner(&ones, &d(&f)).unwrap().abs() <= 1e-12 * norm(&f));
        }
    }

    #[test]
    fn summation_by_parts((g, seed) in grids(16)) {
        let mut r = rng(seed);
        let (f, h) = (field(g, &mut r), field(g, &mut r));
        let cases = [(d2x as fn(&ScalarField) -> ScalarField, dplus_x as fn(&ScalarField) -> ScalarField, dminus_x as fn(&ScalarField) -> ScalarField), (d2y, dplus_y, dminus_y)];
        for (second, plus, minus) in cases {
            let lhs = inner(&f, &second(&h)).unwrap();
            let rhs = -(inner(&plus(&f), &plus(&h)).unwrap() + inner(&minus(&f), &minus(&h)).unwrap()) / 2.0;
            prop_assert!(close(lhs, rhs, norm(&f) * norm(&second(&h)), 1e-12));
        }
    }

    #[test]
    fn operator_norm_bounds((g, seed) in grids(24)) {
        let v = field(g, &mut rng(seed));
        let n = norm(&v);
        let (dx, dy) = (g.dx(), g.dy());
        prop_assert!(norm(&d1x(&v)) <= n / dx * SLACK);
        prop_assert!(norm(&d1y(&v)) <= n / dy * SLACK);
        prop_assert!(norm(&d2(&v)) <= 4.0 * (1.0 / (dx * dx) + 1.0 / (dy * dy)) * n * SLACK);
        prop_assert!(norm(&solve_q(&v).unwrap()) <= n * SLACK);
    }

    #[test]
    fn hadamard_inequality((g, seed) in grids(24)) {
        let mut r = rng(seed);
        let (v, w) = (field(g, &mut r), field(g, &mut r));
        let bound = norm(&v) * norm(&w) / g.cell_area().sqrt();
        prop_assert!(norm(&hadamard(&v, &w).unwrap()) <= bound * SLACK);
    }

    #[test]
    fn gamma_is_skew_symmetric((g, seed) in grids(32)) {
        let mut r = rng(seed);
        let (m, u, v) = (pair(g, &mut r), pair(g, &mut r), pair(g, &mut r));
        let a = v.inner(&gamma_apply(&m, &u).unwrap()).unwrap();
        let b = u.inner(&gamma_apply(&m, &v).unwrap()).unwrap();
        let scale = m.norm() * u.norm() * v.norm() / g.cell_area().sqrt();
        prop_assert!((a + b).abs() <= 1e-12 * scale);
    }

    #[test]
    fn gamma_is_bilinear((g, seed) in grids(12), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let (m, m2, u, v) = (pair(g, &mut r), pair(g, &mut r), pair(g, &mut r), pair(g, &mut r));
        let lin_v = gamma_apply(&m, &u.lincomb(a, &v, b).unwrap()).unwrap();
        let want_v = gamma_apply(&m, &u).unwrap().lincomb(a, &gamma_apply(&m, &v).unwrap(), b).unwrap();
        prop_assert!(lin_v.sub(&want_v).unwrap().max_abs() <= 1e-12 * (1.0 + want_v.max_abs()));
        let lin_m = gamma_apply(&m.lincomb(a, &m2, b).unwrap(), &u).unwrap();
        let want_m = gamma_apply(&m, &u).unwrap().lincomb(a, &gamma_apply(&m2, &u).unwrap(), b).unwrap();
        prop_assert!(lin_m.sub(&want_m).unwrap().max_abs() <= 1e-12 * (1.0 + want_m.max_abs()));
    }

    #[test]
    fn gamma_commutes_with_translation((g, seed) in grids(12), sa in -7isize..7, sb in -7isize..7) {
        let mut r = rng(seed);
        let (m, u) = (pair(g, &mut r), pair(g, &mut r));
        let shift = |p: &FieldPair| p.map_components(|c| c.translate(sa, sb));
        let lhs = gamma_apply(&shift(&m), &shift(&u)).unwrap();
        let rhs = shift(&gamma_apply(&m, &u).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn gamma_momentum_flux_vanishes((g, seed) in grids(16)) {
        let s = state(g, &mut rng(seed));
        let flux = gamma_apply(&s.m, &s.u).unwrap();
        let scale = s.m.norm() * s.u.norm() / g.cell_area().sqrt();
        prop_assert!(flux.c1.integral().abs() <= 1e-12 * scale);
        prop_assert!(flux.c2.integral().abs() <= 1e-12 * scale);
    }

    #[test]
    fn one_step_energy_identity((g, seed) in grids(16), dt in 1e-3f64..1.0) {
        let mut r = rng(seed);
        let (a, c) = (state(g, &mut r), state(g, &mut r));
        let lhs = energy_scheme1(&c) - energy_scheme1(&a);
        let rate = c.m.lincomb(1.0 / dt, &a.m, -1.0 / dt).unwrap();
        let rhs = dt * dvd_scheme1(&a.u, &c.u).unwrap().inner(&rate).unwrap();
        let scale = energy_scheme1(&a).abs() + energy_scheme1(&c).abs();
        prop_assert!(close(lhs, rhs, scale, 1e-11));
    }

    #[test]
    fn explicit_two_step_energy_identity((g, seed) in grids(16)) {
        let mut r = rng(seed);
        let (a, b, c) = (state(g, &mut r), state(g, &mut r), state(g, &mut r));
        let h_new = energy_half_scheme2(&b, &c).unwrap();
        let h_old = energy_half_scheme2(&a, &b).unwrap();
        let rhs = b.u.inner(&c.m.lincomb(0.5, &a.m, -0.5).unwrap()).unwrap();
        prop_assert!(close(h_new - h_old, rhs, h_new.abs() + h_old.abs(), 1e-11));
    }

    #[test]
    fn linearly_implicit_energy_identity((g, seed) in grids(16)) {
        let mut r = rng(seed);
        let (a, b, c) = (state(g, &mut r), state(g, &mut r), state(g, &mut r));
        let h_new = energy_half_scheme3(&b, &c).unwrap();
        let h_old = energy_half_scheme3(&a, &b).unwrap();
        let rhs = dvd_scheme3(&a.u, &c.u).unwrap().inner(&c.m.lincomb(0.5, &a.m, -0.5).unwrap()).unwrap();
        prop_assert!(close(h_new - h_old, rhs, h_new.abs() + h_old.abs(), 1e-11));
    }

    #[test]
    fn stencils_are_time_symmetric((g, seed) in grids(12), dt in 1e-3f64..1.0) {
        let mut r = rng(seed);
        let (a, b, c) = (state(g, &mut r), state(g, &mut r), state(g, &mut r));
        let pairs = [
            (scheme1_residual(&a, &c, dt).unwrap(), scheme1_residual(&c, &a, -dt).unwrap()),
            (scheme2_residual(&a, &b, &c, dt).unwrap(), scheme2_residual(&c, &b, &a, -dt).unwrap()),
            (scheme3_residual(&a, &b, &c, dt).unwrap(), scheme3_residual(&c, &b, &a, -dt).unwrap()),
        ];
        for (fwd, back) in pairs {
            prop_assert!(fwd.sub(&back).unwrap().max_abs() <= 1e-12 * (1.0 + fwd.max_abs()));
        }
    }
}
