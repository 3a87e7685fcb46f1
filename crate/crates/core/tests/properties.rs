//! Property tests over seeded random symbols, kernels and diffeomorphisms.

use circle_opcalc::cocycle::{EpsilonConvention, EpsilonSpec};
use circle_opcalc::operator::Operator;
use circle_opcalc::quantize::{diffeo_matrix, min_quadrature, ModeGrid, OpMatrix, Sector};
use circle_opcalc::sampling::{random_classical, random_diffeo, random_kernel, random_odd, rng};
use circle_opcalc::symbol::{
    bracket_log_weight, commutator, compose, parity_class, split_minus, split_plus, wodzicki_res, FormalSymbol, Parity,
};
use circle_opcalc::symbol::add as symbol_add;
use circle_opcalc::zetatrace::{tr_q, zeta_laurent, Weight};
use proptest::prelude::*;

fn rel(a: &FormalSymbol, b: &FormalSymbol) -> f64 {
    a.distance(b) / (1.0 + a.max_abs().max(b.max_abs()))
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn compose_is_associative(seed in any::<u64>(), rank in 1usize..=2, oa in -1i64..=1, ob in -1i64..=1, oc in -1i64..=1) {
        let mut r = rng(seed);
        let a = random_classical(&mut r, rank, oa, 3, 2).unwrap();
        let b = random_classical(&mut r, rank, ob, 3, 2).unwrap();
        let c = random_classical(&mut r, rank, oc, 3, 2).unwrap();
        let depth = 6;
        let left = compose(&compose(&a, &b, depth).unwrap(), &c, depth).unwrap();
        let right = compose(&a, &compose(&b, &c, depth).unwrap(), depth).unwrap();
        prop_assert!(rel(&left, &right) <= 1e-12, "defect {}", rel(&left, &right));
    }

    #[test]
    fn commutators_have_no_residue(seed in any::<u64>(), rank in 1usize..=2, oa in -2i64..=1, ob in -2i64..=1) {
        let mut r = rng(seed);
        let a = random_classical(&mut r, rank, oa, 4, 2).unwrap();
        let b = random_classical(&mut r, rank, ob, 4, 2).unwrap();
        let c = commutator(&a, &b, 6).unwrap();
        let scale = 1.0 + a.max_abs() * b.max_abs();
        prop_assert!(wodzicki_res(&c).unwrap().norm() <= 1e-11 * scale);
    }

    #[test]
    fn branch_split_is_a_pair_of_projections(seed in any::<u64>(), rank in 1usize..=2, order in -2i64..=2) {
        let a = random_classical(&mut rng(seed), rank, order, 3, 2).unwrap();
        let (p, m) = (split_plus(&a), split_minus(&a));
        prop_assert_eq!(symbol_add(&p, &m).unwrap().distance(&a), 0.0);
        prop_assert_eq!(split_plus(&p).distance(&p), 0.0);
        prop_assert!(split_plus(&m).is_zero() || split_plus(&m).max_abs() == 0.0);
        prop_assert!(split_minus(&p).max_abs() == 0.0);
    }

    #[test]
    fn odd_class_is_closed_under_products(seed in any::<u64>(), rank in 1usize..=2, oa in -2i64..=1, ob in -2i64..=1) {
        let mut r = rng(seed);
        let a = random_odd(&mut r, rank, oa, 3, 2).unwrap();
        let b = random_odd(&mut r, rank, ob, 3, 2).unwrap();
        prop_assert_eq!(parity_class(&compose(&a, &b, 5).unwrap()).unwrap(), Parity::Odd);
    }

    #[test]
    fn components_are_homogeneous(seed in any::<u64>(), order in -3i64..=2, x in 0.0f64..std::f64::consts::TAU, xi in 1.0f64..50.0, lambda in 1.0f64..20.0) {
        let a = random_classical(&mut rng(seed), 2, order, 3, 2).unwrap();
        for c in a.components() {
            for s in [1.0, -1.0] {
                let lhs = c.eval(x, s * lambda * xi);
                let rhs = c.eval(x, s * xi) * num_complex::Complex64::new(lambda.powi(c.degree as i32), 0.0);
                let d = (lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
                prop_assert!(d <= 1e-12 * (1.0 + rhs.iter().map(|z| z.norm()).fold(0.0, f64::max)));
            }
        }
    }

    #[test]
    fn bracket_with_log_weight_lowers_order(seed in any::<u64>(), rank in 1usize..=2, order in -2i64..=2) {
        let b = random_classical(&mut rng(seed), rank, order, 3, 2).unwrap();
        let q = Weight::laplace(Sector::Periodic);
        let c = bracket_log_weight(&b, &q, 4).unwrap();
        prop_assert!(c.order() < order);
        prop_assert!(c.components().all(|k| k.degree < order && k.logpow == 0));
    }

    #[test]
    fn smoothing_traces_ignore_sector_and_weight(seed in any::<u64>(), rank in 1usize..=2, support in 0usize..6) {
        let mut r = rng(seed);
        let k = random_kernel(&mut r, Sector::Periodic, rank, support, 5);
        let plain = k.trace();
        let mut twisted = circle_opcalc::quantize::FiniteRankKernel::new(Sector::Twisted, rank);
        for (&(m, n), b) in k.blocks() {
            twisted.insert(m, n, b.clone());
        }
        for (op, sector) in [(Operator::Smoothing(k.clone()), Sector::Periodic), (Operator::Smoothing(twisted), Sector::Twisted)] {
            for q in [Weight::laplace(sector), Weight::abs(sector)] {
                prop_assert!((tr_q(&op, &q).unwrap() - plain).norm() <= 1e-13 * (1.0 + plain.norm()));
            }
        }
    }

    #[test]
    fn diffeo_matrices_reverse_composition(seed in any::<u64>(), based in any::<bool>()) {
        let mut r = rng(seed);
        let g1 = random_diffeo(&mut r, 2, based).unwrap();
        let g2 = random_diffeo(&mut r, 2, based).unwrap();
        let n = 48;
        let sector = if based { Sector::Twisted } else { Sector::Periodic };
        let grid = ModeGrid::new(n, sector, 1);
        let quad = min_quadrature(n);
        let prod = diffeo_matrix(&g1, &grid, quad).unwrap().mul(&diffeo_matrix(&g2, &grid, quad).unwrap()).unwrap();
        let direct = diffeo_matrix(&g2.compose(&g1).unwrap(), &grid, quad).unwrap();
        prop_assert!(inner_defect(&prod, &direct, n as i64 / 4) <= 1e-10);
    }

    #[test]
    fn based_diffeos_are_closed(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g1 = random_diffeo(&mut r, 3, true).unwrap();
        let g2 = random_diffeo(&mut r, 3, true).unwrap();
        prop_assert!(g1.compose(&g2).unwrap().is_based());
        prop_assert!(g1.inverse().unwrap().is_based());
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn pole_is_residue_over_weight_order(seed in any::<u64>(), rank in 1usize..=2, order in -2i64..=0, abs in any::<bool>()) {
        let a = random_classical(&mut rng(seed), rank, order, 3, 2).unwrap();
        let q = if abs { Weight::abs(Sector::Periodic) } else { Weight::laplace(Sector::Periodic) };
        let z = zeta_laurent(&Operator::Symbol(a.clone()), &q).unwrap();
        let expected = wodzicki_res(&a).unwrap() / q.order() as f64;
        prop_assert!((z.c_m1 - expected).norm() <= 1e-12 * (1.0 + expected.norm()), "{} vs {}", z.c_m1, expected);
    }
}

#[test]
fn twisted_sign_squares_to_minus_one() {
    for (cutoff, rank) in [(4, 1), (16, 2), (64, 3)] {
        let e = EpsilonSpec::new(EpsilonConvention::Twisted, cutoff, rank).matrix();
        let sq = e.mul(&e).unwrap();
        let id = OpMatrix::identity(*e.grid());
        assert_eq!(sq.add(&id).unwrap().max_abs(), 0.0);
    }
}

fn inner_defect(a: &OpMatrix, b: &OpMatrix, half: i64) -> f64 {
    let mut worst: f64 = 0.0;
    for m in -half..=half {
        for n in -half..=half {
            let d = (a.block(m, n) - b.block(m, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
    }
    worst
}
