//! Seeded random generators for symbols, diffeomorphisms and kernels.
//!
//! Everything is driven by `ChaCha8Rng` so that a seed reproduces the same
//! objects on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fiogroup::{Diffeo, FIOElement};
use crate::quantize::{FiniteRankKernel, Sector};
use crate::symbol::FormalSymbol;
use crate::trigpoly::{c64, Block, TrigPoly};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_block<R: Rng>(r: &mut R, rank: usize, scale: f64) -> Block {
    Block::from_fn(rank, rank, |_, _| c64(r.gen_range(-1.0..1.0) * scale, r.gen_range(-1.0..1.0) * scale))
}

/// Trigonometric polynomial with modes `|k| ≤ bandwidth` and entries decaying like `2^{-|k|}`.
pub fn random_trig_poly<R: Rng>(r: &mut R, rank: usize, bandwidth: usize) -> TrigPoly {
    let mut p = TrigPoly::zero(rank);
    for k in -(bandwidth as i64)..=(bandwidth as i64) {
        let scale = 0.5f64.powi(k.unsigned_abs() as i32);
        p.add_coeff(k, &random_block(r, rank, scale));
    }
    p
}

/// Real scalar polynomial: `c_{-k} = conj(c_k)`.
pub fn random_real_poly<R: Rng>(r: &mut R, bandwidth: usize, scale: f64) -> TrigPoly {
    let mut modes = vec![(0, c64(r.gen_range(-1.0..1.0) * scale, 0.0))];
    for k in 1..=(bandwidth as i64) {
        let s = scale * 0.5f64.powi(k as i32 - 1);
        let z = c64(r.gen_range(-1.0..1.0) * s, r.gen_range(-1.0..1.0) * s);
        modes.push((k, z));
        modes.push((-k, z.conj()));
    }
    TrigPoly::from_modes(modes)
}

/// Classical symbol with `depth` homogeneous terms from degree `order` down,
/// independent branches on `ξ > 0` and `ξ < 0`.
pub fn random_classical<R: Rng>(r: &mut R, rank: usize, order: i64, depth: usize, bandwidth: usize) -> Result<FormalSymbol> {
    let mut s = FormalSymbol::zero(rank, order);
    for j in 0..depth as i64 {
        s.add_component(order - j, 0, random_trig_poly(r, rank, bandwidth), random_trig_poly(r, rank, bandwidth))?;
    }
    s.truncate_below(order - depth as i64 + 1).with_order(order)
}

/// Odd-class symbol: `a_{d}(x, -ξ) = (-1)^d a_d(x, ξ)`, i.e. minus branch `(-1)^d` times plus.
pub fn random_odd<R: Rng>(r: &mut R, rank: usize, order: i64, depth: usize, bandwidth: usize) -> Result<FormalSymbol> {
    let mut s = FormalSymbol::zero(rank, order);
    for j in 0..depth as i64 {
        let d = order - j;
        let plus = random_trig_poly(r, rank, bandwidth);
        let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let minus = plus.scale(c64(sign, 0.0));
        s.add_component(d, 0, plus, minus)?;
    }
    s.truncate_below(order - depth as i64 + 1).with_order(order)
}

/// Degree-zero symbol `c·Id + small` on each branch, invertible by construction.
pub fn random_invertible_degree0<R: Rng>(r: &mut R, rank: usize, bandwidth: usize) -> Result<FormalSymbol> {
    let branch = |r: &mut R| {
        let mut p = random_trig_poly(r, rank, bandwidth).scale(c64(0.1, 0.0));
        p.add_coeff(0, &Block::identity(rank, rank).scale(1.5));
        p
    };
    let plus = branch(r);
    let minus = branch(r);
    FormalSymbol::homogeneous(0, 0, plus, minus)
}

/// Diffeomorphism with `sup |u - mean u| ≥ 0.15` and `min g' ≥ 0.3`.
/// A based one has `u(0) = 0`.
pub fn random_diffeo<R: Rng>(r: &mut R, bandwidth: usize, based: bool) -> Result<Diffeo> {
    let bandwidth = bandwidth.max(1);
    loop {
        let mut u = random_real_poly(r, bandwidth, 1.0);
        // Bound Σ |k c_k| to keep g' = 1 + u' ≥ 0.3.
        let slope: f64 = u.iter().map(|(k, c)| k.unsigned_abs() as f64 * c[(0, 0)].norm()).sum();
        let target = r.gen_range(0.3..0.7);
        if slope > 0.0 {
            u = u.scale(c64(target / slope, 0.0));
        }
        if based {
            let shift = u.eval_scalar(0.0);
            u.add_coeff(0, &Block::from_element(1, 1, -shift));
        }
        let mean = u.mean()[(0, 0)];
        let spread = (0..256)
            .map(|j| (u.eval_scalar(2.0 * std::f64::consts::PI * j as f64 / 256.0) - mean).norm())
            .fold(0.0, f64::max);
        if spread < 0.15 {
            continue;
        }
        return Diffeo::from_displacement(u);
    }
}

/// Rotation by an angle in `[0.3, 2.5]`.
pub fn random_rotation<R: Rng>(r: &mut R) -> Diffeo {
    Diffeo::rotation(r.gen_range(0.3..2.5))
}

/// Finite-rank kernel with `terms` random blocks supported on `|m|, |n| ≤ support`.
pub fn random_kernel<R: Rng>(r: &mut R, sector: Sector, rank: usize, support: usize, terms: usize) -> FiniteRankKernel {
    let mut k = FiniteRankKernel::new(sector, rank);
    let s = support as i64;
    for _ in 0..terms {
        let m = r.gen_range(-s..=s);
        let n = r.gen_range(-s..=s);
        k.insert(m, n, random_block(r, rank, 1.0));
    }
    k
}

/// Group element with random phase (identity when `with_phase` is false).
pub fn random_fio<R: Rng>(r: &mut R, rank: usize, with_phase: bool) -> Result<FIOElement> {
    let symbol = random_invertible_degree0(r, rank, 2)?;
    let phase = if with_phase { random_diffeo(r, 2, false)? } else { Diffeo::identity() };
    FIOElement::new(phase, symbol, None)
}
