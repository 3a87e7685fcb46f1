//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Every expected value is produced on the test side (closed forms,
//! telescoping sums, dense matrix products, brute-force sums) rather than
//! read back from the library.

use std::error::Error as StdError;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use circle_opcalc::cocycle::{cocycle_identity_check, schwinger, EpsilonConvention, EpsilonSpec};
use circle_opcalc::fiogroup::{
    exactness_check, phase_projection, pseudolocality_witness, Diffeo, ExactnessConfig, FIOElement, PSEUDOLOCAL_BAND,
};
use circle_opcalc::hurwitz::EULER_GAMMA;
use circle_opcalc::operator::Operator;
use circle_opcalc::quantize::{
    diffeo_matrix, gl_res_witness, loglog_slope, min_quadrature, multiplication_matrix, realize, reflection_matrix,
    sign_plus_diagonal, HsVerdict, ModeGrid, OpMatrix, Sector,
};
use circle_opcalc::sampling::{
    random_classical, random_diffeo, random_fio, random_kernel, random_odd, random_real_poly, random_rotation,
    random_trig_poly, rng,
};
use circle_opcalc::symbol::{builtin, compose, wodzicki_res, Builtin, FormalSymbol};
use circle_opcalc::trigpoly::{c64, Block, TrigPoly};
use circle_opcalc::zetatrace::{
    bracket_trace_check, default_heat_times, heat_trace_oracle, kv_trace, kv_weights, tr_q, trace_power, zeta_direct,
    zeta_laurent, Weight,
};
use num_complex::Complex64;
use rand::Rng;

type Outcome = Result<String, Box<dyn StdError>>;
type Criterion = (&'static str, fn() -> Outcome);

// Written as a negation so that a NaN fails the check.
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+).into());
        }
    };
}

const SECTORS: [Sector; 2] = [Sector::Periodic, Sector::Twisted];

fn sym(b: Builtin) -> FormalSymbol {
    builtin(&b, 1).expect("builtin")
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("residue/zeta calibration", c01_calibration),
        ("trace-class consistency", c02_trace_class),
        ("bracket-trace identity", c03_bracket),
        ("Kontsevich-Vishik weight independence", c04_kv),
        ("compact-by-order-zero commutators", c05_compact_commutators),
        ("Schwinger cocycle suite", c06_schwinger),
        ("smoothing commutator with the sign", c07_smoothing_commutator),
        ("GL_res dichotomy", c08_gl_res),
        ("group coherence", c09_group),
        ("symbol/matrix consistency", c10_consistency),
        ("conjugation invariance", c11_conjugation),
        ("heat/zeta cross-oracle", c12_heat),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match outcome {
            Ok(Ok(d)) => ("PASS", d),
            Ok(Err(e)) => ("FAIL", e.to_string()),
            Err(p) => ("FAIL", format!("panic: {}", p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("criterion {:02} {name}: {status} [{detail}] ({secs:.2}s)", i + 1);
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}

fn c01_calibration() -> Outcome {
    let a = sym(Builtin::AbsDInverse);
    let q = Weight::laplace(Sector::Periodic);
    let l = zeta_laurent(&Operator::Symbol(a.clone()), &q)?;
    ensure!((l.c_m1 - c64(1.0, 0.0)).norm() <= 1e-8, "c_-1 = {}", l.c_m1);
    let res = wodzicki_res(&a)?;
    ensure!(res == c64(2.0, 0.0), "res = {res}");
    // 2ζ(1+2s) = 1/s + 2γ + O(s), plus the clamped zero mode contributing 1.
    ensure!((l.c0.re - (1.0 + 2.0 * EULER_GAMMA)).abs() <= 1e-10, "c_0 = {}", l.c0);
    // zeta_direct at s = 1 against a brute-force sum with an integral tail bound.
    let m = 2_000_000u64;
    let brute: f64 = 1.0 + 2.0 * (1..=m).rev().map(|n| { let n = n as f64; 1.0 / (n * (1.0 + n * n)) }).sum::<f64>()
        + 2.0 / (2.0 * (m as f64).powi(2));
    let direct = zeta_direct(&Operator::Symbol(a), &q, c64(1.0, 0.0))?;
    ensure!((direct.re - brute).abs() <= 1e-11, "zeta_direct(1) = {direct}, brute {brute}");
    Ok(format!("c_-1 = {:.3e} + 1, res = {}, direct-sum delta {:.1e}", l.c_m1.re - 1.0, res.re, (direct.re - brute).abs()))
}

fn c02_trace_class() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let sector = SECTORS[i % 2];
        let rank = 1 + i % 2;
        let k = random_kernel(&mut r, sector, rank, 6, 8);
        let plain: Complex64 = k.blocks().filter(|((m, n), _)| m == n).map(|(_, b)| b.trace()).sum();
        for q in [Weight::laplace(sector), Weight::abs(sector)] {
            let v = tr_q(&Operator::Smoothing(k.clone()), &q)?;
            let d = (v - plain).norm();
            worst = worst.max(d);
            ensure!(d <= 1e-10, "sample {i}, weight {}: tr_q = {v}, trace = {plain}", q.name());
        }
    }
    Ok(format!("20 kernels x 2 weights, max delta {worst:.1e}"))
}

/// Brute-force `tr[A, B]` for `A = e^{ix}D`, `B = e^{-ix}|D|^{-1}` with the
/// clamp `|ξ| ↦ max(|ξ|, 1)`; the diagonal is summable, so this is `tr^Q`.
fn telescoping_oracle() -> f64 {
    let absc = |n: i64| (n.abs() as f64).max(1.0);
    let d = |n: i64| (n - 1) as f64 / absc(n) - n as f64 / absc(n + 1);
    let m = 1_000_000i64;
    let mut s = 0.0;
    for n in (1..=m).rev() {
        s += d(n) + d(-n);
    }
    s += d(0);
    // Tails: Σ_{n>M} (1/(n+1) - 1/n) = -1/(M+1) and Σ_{n>M} (1/(n-1) - 1/n) = 1/M.
    s - 1.0 / (m + 1) as f64 + 1.0 / m as f64
}

fn c03_bracket() -> Outcome {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for i in 0..50 {
        let rank = 1 + i % 2;
        let sector = SECTORS[(i / 2) % 2];
        let q = if i % 3 == 2 { Weight::abs(sector) } else { Weight::laplace(sector) };
        let oa = r.gen_range(-1..=1);
        let ob = r.gen_range(-1..=1);
        let a = random_classical(&mut r, rank, oa, 10, 2)?;
        let b = random_classical(&mut r, rank, ob, 10, 2)?;
        let t = Instant::now();
        let c = bracket_trace_check(&a, &b, &q, 10)?;
        slowest = slowest.max(t.elapsed());
        worst = worst.max(c.delta);
        ensure!(c.delta <= 1e-6, "pair {i} (orders {oa}, {ob}): lhs {} rhs {}", c.lhs, c.rhs);
    }
    ensure!(slowest <= Duration::from_secs(10), "slowest pair took {slowest:?}");
    // A nonzero instance with a hand-computed value.
    let q = Weight::laplace(Sector::Periodic);
    let a = compose(&FormalSymbol::multiplication(TrigPoly::exponential(1, 1)), &sym(Builtin::D), 10)?;
    let b = compose(&FormalSymbol::multiplication(TrigPoly::exponential(1, -1)), &sym(Builtin::AbsDInverse), 10)?;
    let c = bracket_trace_check(&a, &b, &q, 10)?;
    let oracle = telescoping_oracle();
    ensure!((oracle + 2.0).abs() <= 1e-9, "telescoping oracle {oracle}");
    ensure!((c.lhs - oracle).norm() <= 1e-6 && (c.rhs - oracle).norm() <= 1e-6, "lhs {} rhs {} oracle {oracle}", c.lhs, c.rhs);
    // With |D| in place of D both routes vanish (odd residue density).
    let a0 = compose(&FormalSymbol::multiplication(TrigPoly::exponential(1, 1)), &sym(Builtin::AbsD), 10)?;
    let c0 = bracket_trace_check(&a0, &b, &q, 10)?;
    ensure!(c0.lhs.norm() <= 1e-6 && c0.rhs.norm() <= 1e-6, "|D| instance: lhs {} rhs {}", c0.lhs, c0.rhs);
    Ok(format!(
        "50 pairs max delta {worst:.1e}, slowest {:.0} ms; e^{{ix}}D vs e^{{-ix}}|D|^-1: lhs {:.9} rhs {:.9} oracle {oracle:.9}",
        slowest.as_secs_f64() * 1e3,
        c.lhs.re,
        c.rhs.re
    ))
}

fn c04_kv() -> Outcome {
    let mut r = rng(4);
    let mut worst_pole: f64 = 0.0;
    let mut worst_delta: f64 = 0.0;
    for i in 0..20 {
        let sector = SECTORS[i % 2];
        let rank = 1 + (i / 2) % 2;
        let order = r.gen_range(-2..=2);
        let a = Operator::Symbol(random_odd(&mut r, rank, order, 8, 2)?);
        let (q1, q2) = kv_weights(sector);
        let l1 = zeta_laurent(&a, &q1)?;
        let l2 = zeta_laurent(&a, &q2)?;
        let pole = l1.c_m1.norm().max(l2.c_m1.norm());
        let delta = (l1.c0 - l2.c0).norm();
        worst_pole = worst_pole.max(pole);
        worst_delta = worst_delta.max(delta);
        ensure!(pole <= 1e-8, "sample {i}: poles {} {}", l1.c_m1, l2.c_m1);
        ensure!(delta <= 1e-6, "sample {i}: finite parts {} {}", l1.c0, l2.c0);
        kv_trace(&a, sector)?;
    }
    // Mean-zero multiplication: zero diagonal; D: no pole.
    let f = TrigPoly::from_modes([(1, c64(0.3, 0.2)), (-2, c64(-0.1, 0.0))]);
    let v = kv_trace(&Operator::multiplication(f), Sector::Periodic)?;
    ensure!(v.norm() <= 1e-12, "kv(M_f) = {v}");
    kv_trace(&Operator::Symbol(sym(Builtin::D)), Sector::Periodic)?;
    let a = Operator::Symbol(random_odd(&mut r, 1, 1, 8, 2)?);
    let b = Operator::Symbol(random_odd(&mut r, 1, 0, 8, 2)?);
    let comm = kv_trace(&Operator::commutator(&a, &b), Sector::Periodic)?;
    ensure!(comm.norm() <= 1e-6, "kv([A,B]) = {comm}");
    Ok(format!("20 odd symbols: max |c_-1| {worst_pole:.1e}, max finite-part delta {worst_delta:.1e}; kv([A,B]) = {:.1e}", comm.norm()))
}

fn c05_compact_commutators() -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let rank = 1 + i % 2;
        let sector = SECTORS[(i / 2) % 2];
        let q = if i % 4 == 3 { Weight::abs(sector) } else { Weight::laplace(sector) };
        let a = random_classical(&mut r, rank, -1 - (i as i64 % 2), 10, 2)?;
        let b = random_classical(&mut r, rank, 0, 10, 2)?;
        let lhs = tr_q(&Operator::commutator(&Operator::Symbol(a), &Operator::Symbol(b)), &q)?;
        worst = worst.max(lhs.norm());
        ensure!(lhs.norm() <= 1e-6, "pair {i}: tr_q[A,B] = {lhs}");
    }
    Ok(format!("20 pairs, max |tr_q[A,B]| {worst:.1e}"))
}

/// `½ tr(ε [ε, A] [ε, B])` by dense products.
fn dense_schwinger(a: &OpMatrix, b: &OpMatrix, eps: &EpsilonSpec) -> Complex64 {
    let e = eps.matrix();
    let ca = e.commutator(a).unwrap();
    let cb = e.commutator(b).unwrap();
    e.mul(&ca).unwrap().mul(&cb).unwrap().trace() * 0.5
}

fn c06_schwinger() -> Outcome {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    let mut worst_kz: f64 = 0.0;
    for i in 0..50 {
        let rank = 1 + i % 2;
        let mut syms = Vec::new();
        for _ in 0..3 {
            syms.push(random_classical(&mut r, rank, 0, 1, 3)?);
        }
        for conv in [EpsilonConvention::SignPlus, EpsilonConvention::Twisted, EpsilonConvention::KernelZero] {
            let eps = EpsilonSpec::new(conv, 128, rank);
            let m: Vec<OpMatrix> = syms.iter().map(|s| realize(s, &eps.grid)).collect::<Result<_, _>>()?;
            let rep = cocycle_identity_check(&m[0], &m[1], &m[2], &eps)?;
            if conv == EpsilonConvention::KernelZero {
                worst_kz = worst_kz.max(rep.cocycle_defect);
                continue;
            }
            worst = worst.max(rep.cocycle_defect);
            ensure!(rep.cocycle_defect <= 1e-10, "triple {i} ({}): defect {:e}", conv.name(), rep.cocycle_defect);
            let ab = schwinger(&m[0], &m[1], &eps)?.value;
            let ba = schwinger(&m[1], &m[0], &eps)?.value;
            ensure!(ab == -ba, "triple {i} ({}): c(A,B) = {ab}, c(B,A) = {ba}", conv.name());
        }
    }
    for n in [4usize, 8, 16, 64, 128] {
        for (conv, expect) in [(EpsilonConvention::SignPlus, -2.0), (EpsilonConvention::KernelZero, -0.5)] {
            let eps = EpsilonSpec::new(conv, n, 1);
            let a = multiplication_matrix(&TrigPoly::exponential(1, 1), &eps.grid)?;
            let b = multiplication_matrix(&TrigPoly::exponential(1, -1), &eps.grid)?;
            let oracle = dense_schwinger(&a, &b, &eps);
            ensure!((oracle - c64(expect, 0.0)).norm() <= 1e-14, "dense oracle {oracle} at N = {n}");
            let v = schwinger(&a, &b, &eps)?.value;
            ensure!(v == c64(expect, 0.0), "{} at N = {n}: {v}", conv.name());
        }
    }
    let mut worst_im: f64 = 0.0;
    let eps = EpsilonSpec::new(EpsilonConvention::Twisted, 64, 1);
    for _ in 0..20 {
        let f = random_real_poly(&mut r, 4, 1.0);
        let g = random_real_poly(&mut r, 4, 1.0);
        let v = schwinger(&multiplication_matrix(&f, &eps.grid)?, &multiplication_matrix(&g, &eps.grid)?, &eps)?.value;
        worst_im = worst_im.max(v.im.abs());
        ensure!(v.im.abs() <= 1e-12, "twisted c(f, g) = {v}");
    }
    let cos = TrigPoly::from_modes([(1, c64(0.5, 0.0)), (-1, c64(0.5, 0.0))]);
    let sin = TrigPoly::from_modes([(1, c64(0.0, -0.5)), (-1, c64(0.0, 0.5))]);
    let witness = schwinger(&multiplication_matrix(&cos, &eps.grid)?, &multiplication_matrix(&sin, &eps.grid)?, &eps)?.value;
    ensure!(witness.norm() > 0.1, "c(cos, sin) = {witness}");
    Ok(format!(
        "identity defect {worst:.1e} (kernel-zero, reported only: {worst_kz:.1e}); shift pair -2 / -0.5 exact; max |Im c| {worst_im:.1e}; twisted c(cos, sin) = {:.6}",
        witness.re
    ))
}

fn c07_smoothing_commutator() -> Outcome {
    let mut r = rng(7);
    let mut cases = 0;
    for bw in 1..=4usize {
        for conv in [EpsilonConvention::SignPlus, EpsilonConvention::KernelZero, EpsilonConvention::Twisted] {
            let rank = 1 + bw % 2;
            let order = r.gen_range(-1..=1);
            let a = random_classical(&mut r, rank, order, 3, bw)?;
            let mut norms = Vec::new();
            for n in [64usize, 128, 256] {
                let eps = EpsilonSpec::new(conv, n, rank);
                let m = realize(&a, &eps.grid)?;
                let c = m.diagonal_commutator(&eps.diagonal())?;
                let g = eps.grid;
                let mut radius: f64 = 0.0;
                for i in g.modes() {
                    for j in g.modes() {
                        if c.block(i, j).iter().any(|z| z.norm() != 0.0) {
                            radius = radius.max(g.xi(i).abs().max(g.xi(j).abs()));
                        }
                    }
                }
                ensure!(radius <= bw as f64, "bandwidth {bw}, {}: support radius {radius}", conv.name());
                norms.push(c.hs_norm());
            }
            ensure!(norms[0] == norms[1] && norms[1] == norms[2], "bandwidth {bw}, {}: HS norms {norms:?}", conv.name());
            cases += 1;
        }
    }
    Ok(format!("{cases} symbols: support within |xi| <= M, HS norms bitwise equal at N = 64, 128, 256"))
}

fn c08_gl_res() -> Outcome {
    let mut r = rng(8);
    let ns = [128usize, 256, 512];
    let mut diffeos: Vec<Diffeo> = Vec::new();
    for i in 0..10 {
        diffeos.push(random_diffeo(&mut r, 1 + i % 4, i % 2 == 0)?);
    }
    for _ in 0..3 {
        diffeos.push(random_rotation(&mut r));
    }
    let mut worst: f64 = 0.0;
    for (i, g) in diffeos.iter().enumerate() {
        let us: Vec<OpMatrix> = ns
            .iter()
            .map(|&n| diffeo_matrix(g, &ModeGrid::scalar(n, Sector::Periodic), min_quadrature(n)))
            .collect::<Result<_, _>>()?;
        let rep = gl_res_witness(&us, sign_plus_diagonal, 1e-3)?;
        let spread = rep.hs_norms.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        worst = worst.max(spread);
        ensure!(matches!(rep.verdict, HsVerdict::BoundedHs { .. }) && spread <= 1e-3, "diffeo {i}: {:?}", rep.hs_norms);
    }
    let us: Vec<OpMatrix> =
        ns.iter().map(|&n| reflection_matrix(&ModeGrid::scalar(n, Sector::Periodic))).collect::<Result<_, _>>()?;
    let rep = gl_res_witness(&us, sign_plus_diagonal, 1e-3)?;
    let HsVerdict::GrowingHs { exponent } = rep.verdict else {
        return Err(format!("reflection classified bounded: {:?}", rep.hs_norms).into());
    };
    ensure!((exponent - 0.5).abs() <= 0.05, "reflection exponent {exponent}");
    // [ε, R] has 2N entries of modulus 2 (n ≠ 0).
    for (n, hs) in ns.iter().zip(&rep.hs_norms) {
        ensure!((hs - (8.0 * *n as f64).sqrt()).abs() <= 1e-12, "reflection HS {hs} at N = {n}");
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&xs, &rep.hs_norms).unwrap_or(f64::NAN);
    Ok(format!("13 diffeos bounded (max increment {worst:.1e}); reflection HS = 2 sqrt(2N), exponent {exponent:.4} (fit {slope:.4})"))
}

fn c09_group() -> Outcome {
    let mut r = rng(9);
    let quad = min_quadrature(128);
    let mut chain = Vec::new();
    for i in 0..22 {
        let mut e = random_fio(&mut r, 1 + i % 2, i % 3 != 2)?;
        if i % 5 == 4 {
            let g = ModeGrid::new(128, Sector::Periodic, e.rank());
            let s = random_kernel(&mut r, Sector::Periodic, e.rank(), 4, 3).realize(&g)?.scale(c64(0.05, 0.0));
            e = FIOElement::new(e.phase().clone(), e.symbol().clone(), Some(s))?;
        }
        chain.push(e);
    }
    // Triples must share a rank: regroup by rank.
    let (odd, even): (Vec<FIOElement>, Vec<FIOElement>) = chain.into_iter().partition(|e| e.rank() == 1);
    let cfg = ExactnessConfig { hs_cutoffs: vec![32, 64, 128], ..ExactnessConfig::default() };
    let rep1 = exactness_check(&odd, &cfg)?;
    let rep2 = exactness_check(&even, &cfg)?;
    let triples = (odd.len() - 2) + (even.len() - 2);
    let assoc = rep1.associativity_defect.max(rep2.associativity_defect);
    ensure!(triples >= 18 && assoc <= 1e-8, "associativity defect {assoc:e} over {triples} triples");

    let mut samples: Vec<(FIOElement, bool)> = Vec::new();
    for i in 0..15 {
        let e = random_fio(&mut r, 1 + i % 2, false)?;
        let e = if i % 3 == 0 {
            let g = ModeGrid::new(128, Sector::Periodic, e.rank());
            let s = random_kernel(&mut r, Sector::Periodic, e.rank(), 4, 3).realize(&g)?.scale(c64(0.1, 0.0));
            FIOElement::new(Diffeo::identity(), e.symbol().clone(), Some(s))?
        } else {
            e
        };
        samples.push((e, true));
    }
    for i in 0..15 {
        samples.push((random_fio(&mut r, 1 + i % 2, true)?, false));
    }
    for i in 0..10 {
        let e = FIOElement::new(random_rotation(&mut r), random_fio(&mut r, 1 + i % 2, false)?.symbol().clone(), None)?;
        samples.push((e, false));
    }
    let mut correct = 0;
    let mut section: f64 = 0.0;
    for (e, in_kernel) in &samples {
        let g = ModeGrid::new(128, Sector::Periodic, e.rank());
        let w = pseudolocality_witness(&e.realize(&g, quad)?, PSEUDOLOCAL_BAND);
        if w.pseudolocal == *in_kernel {
            correct += 1;
        }
        let s = FIOElement::from_diffeo(phase_projection(e), e.rank());
        section = section.max(phase_projection(&s).distance(e.phase()));
        let d = s.realize(&g, quad)?.sub(&diffeo_matrix(e.phase(), &g, quad)?)?.max_abs();
        section = section.max(d);
    }
    ensure!(section <= 1e-10, "section defect {section:e}");
    ensure!(correct == samples.len(), "pseudolocality classified {correct}/{}", samples.len());
    Ok(format!("associativity {assoc:.1e} over {triples} triples; section defect {section:.1e}; kernel witness {correct}/40"))
}

fn c10_consistency() -> Outcome {
    let mut r = rng(10);
    let ns = [32usize, 64, 128, 256];
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let mut lines = Vec::new();
    for (i, (oa, ob)) in [(-1i64, -1i64), (0, -1), (1, -1)].into_iter().enumerate() {
        let rank = 1 + i % 2;
        let a = random_classical(&mut r, rank, oa, 12, 2)?;
        let b = random_classical(&mut r, rank, ob, 12, 2)?;
        let mut slopes = Vec::new();
        for k in [4usize, 8] {
            let c = compose(&a, &b, k)?;
            let mut ys = Vec::new();
            for &n in &ns {
                let g = ModeGrid::new(n, Sector::Periodic, rank);
                let d = realize(&c, &g)?.sub(&realize(&a, &g)?.mul(&realize(&b, &g)?)?)?;
                let shell = g.modes().filter(|m| (n / 4..=n / 2).contains(&(m.unsigned_abs() as usize)));
                ys.push(d.op_norm_on_columns(shell));
            }
            let slope = loglog_slope(&xs, &ys).ok_or("degenerate fit")?;
            let bound = (oa + ob - k as i64) as f64 + 0.5;
            ensure!(slope <= bound, "orders ({oa}, {ob}), K = {k}: slope {slope:.3} > {bound}");
            slopes.push(slope);
        }
        ensure!(slopes[1] < slopes[0], "orders ({oa}, {ob}): slope did not improve {slopes:?}");
        lines.push(format!("({oa},{ob}) K=4 {:.2} K=8 {:.2}", slopes[0], slopes[1]));
    }
    Ok(lines.join("; "))
}

/// `C = U(f) L(g)` with `U(f) = [[1, f], [0, 1]]`, `L(g) = [[1, 0], [g, 1]]`,
/// and its inverse `L(-g) U(-f)`, both trigonometric polynomials.
fn unipotent_pair<R: Rng>(r: &mut R) -> (TrigPoly, TrigPoly) {
    let f = random_trig_poly(r, 1, 1);
    let g = random_trig_poly(r, 1, 1);
    let lift = |p: &TrigPoly, upper: bool, sign: f64| {
        let mut out = TrigPoly::identity(2);
        for (k, c) in p.iter() {
            let mut b = Block::zeros(2, 2);
            if upper {
                b[(0, 1)] = c[(0, 0)] * sign;
            } else {
                b[(1, 0)] = c[(0, 0)] * sign;
            }
            out = out.try_add(&TrigPoly::monomial(k, b)).unwrap();
        }
        out
    };
    let c = lift(&f, true, 1.0).try_mul(&lift(&g, false, 1.0), 64).unwrap();
    let c_inv = lift(&g, false, -1.0).try_mul(&lift(&f, true, -1.0), 64).unwrap();
    (c, c_inv)
}

fn c11_conjugation() -> Outcome {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let sector = SECTORS[i % 2];
        let (c, c_inv) = unipotent_pair(&mut r);
        let defect = c.try_mul(&c_inv, 64)?.axpy(c64(-1.0, 0.0), &TrigPoly::identity(2))?.max_abs();
        ensure!(defect <= 1e-14, "C C^-1 - Id = {defect:e}");
        let order = r.gen_range(-1..=1);
        let a = random_classical(&mut r, 2, order, 8, 2)?;
        let q = if i % 3 == 0 { Weight::abs(sector) } else { Weight::laplace(sector) };
        let qc = q.conjugated(c.clone(), c_inv.clone())?;
        let op = Operator::Symbol(a.clone());
        let opc = op.conjugate(&c, &c_inv);
        let t0 = tr_q(&op, &q)?;
        let t1 = tr_q(&opc, &qc)?;
        let r0 = wodzicki_res(&a)?;
        let r1 = wodzicki_res(&opc.symbol(12)?.ok_or("no symbol")?)?;
        let p0 = trace_power(&op, 2, &q)?;
        let p1 = trace_power(&opc, 2, &qc)?;
        let d = (t0 - t1).norm().max((r0 - r1).norm()).max((p0 - p1).norm());
        worst = worst.max(d);
        ensure!(d <= 1e-6, "sample {i}: tr {t0} vs {t1}, res {r0} vs {r1}, tr(A^2) {p0} vs {p1}");
    }
    Ok(format!("20 conjugations by x-dependent unipotent products: max delta {worst:.1e}"))
}

fn c12_heat() -> Outcome {
    let p = Sector::Periodic;
    let t = Sector::Twisted;
    let id = || Operator::Symbol(FormalSymbol::identity(1));
    let proj = {
        let mut k = circle_opcalc::quantize::FiniteRankKernel::new(p, 1);
        k.insert(2, 2, Block::identity(1, 1));
        Operator::Smoothing(k)
    };
    let weighted = compose(
        &FormalSymbol::multiplication(TrigPoly::from_modes([(0, c64(2.0, 0.0)), (1, c64(0.5, 0.0)), (-1, c64(0.5, 0.0))])),
        &sym(Builtin::AbsDInverse),
        12,
    )?;
    let cases: Vec<(&str, Operator, Weight, Option<f64>)> = vec![
        ("Id, 1+Delta, theta=0", id(), Weight::laplace(p), Some(0.0)),
        ("Id, 1+Delta, theta=1/2", id(), Weight::laplace(t), Some(0.0)),
        ("Id, |D|, theta=0", id(), Weight::abs(p), Some(0.0)),
        ("|D|^-1, 1+Delta", Operator::Symbol(sym(Builtin::AbsDInverse)), Weight::laplace(p), Some(1.0 + 2.0 * EULER_GAMMA)),
        ("|D|^-1, |D|, theta=1/2", Operator::Symbol(sym(Builtin::AbsDInverse)), Weight::abs(t), None),
        ("|D|, 1+Delta", Operator::Symbol(sym(Builtin::AbsD)), Weight::laplace(p), Some(-1.0 / 6.0)),
        ("1+Delta, 1+Delta", Operator::Symbol(sym(Builtin::OnePlusLaplacian)), Weight::laplace(p), None),
        ("rank-one projection", proj, Weight::laplace(p), Some(1.0)),
        ("Id, 4+Delta", id(), Weight::laplace_with(4.0, 1, p)?, Some(0.0)),
        ("(2+cos x)|D|^-1, 1+Delta", Operator::Symbol(weighted), Weight::laplace(p), None),
    ];
    let ts = default_heat_times();
    let mut worst: f64 = 0.0;
    for (name, op, q, closed) in &cases {
        let z = zeta_laurent(op, q)?;
        let h = heat_trace_oracle(op, q, &ts)?;
        ensure!(h.conclusive, "{name}: heat fit inconclusive (rms {:e})", h.rms_residual);
        let d = (z.c0.re - h.finite_part).abs();
        worst = worst.max(d);
        ensure!(d <= 1e-4, "{name}: zeta {} heat {}", z.c0.re, h.finite_part);
        if let Some(v) = closed {
            ensure!((z.c0.re - v).abs() <= 1e-10, "{name}: zeta {} closed form {v}", z.c0.re);
        }
    }
    Ok(format!("{} cases, max |zeta - heat| {worst:.1e}", cases.len()))
}
