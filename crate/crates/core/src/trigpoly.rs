//! Matrix-valued trigonometric polynomials `a(x) = Σ_m c_m e^{imx}`.
//!
//! These carry the x-dependence of every symbol component. Coefficients are
//! stored sparsely; a mode whose matrix is identically zero is never stored,
//! so two polynomials are equal exactly when their coefficient maps are.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// An `r × r` complex coefficient block.
pub type Block = DMatrix<Complex64>;

/// Shorthand for `Complex64::new`.
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn block_is_zero(b: &Block) -> bool {
    b.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

pub(crate) fn block_max_abs(b: &Block) -> f64 {
    b.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    rank: usize,
    coeffs: BTreeMap<i64, Block>,
}

impl TrigPoly {
    pub fn zero(rank: usize) -> Self {
        assert!(rank > 0, "rank must be positive");
        Self { rank, coeffs: BTreeMap::new() }
    }

    pub fn constant(value: Block) -> Self {
        assert_eq!(value.nrows(), value.ncols(), "coefficient blocks are square");
        let mut p = Self::zero(value.nrows());
        p.add_coeff(0, &value);
        p
    }

    pub fn identity(rank: usize) -> Self {
        Self::constant(Block::identity(rank, rank))
    }

    /// Rank-one constant.
    pub fn scalar(value: Complex64) -> Self {
        Self::constant(Block::from_element(1, 1, value))
    }

    /// Rank-one polynomial from `(mode, coefficient)` pairs; repeated modes accumulate.
    pub fn from_modes<I: IntoIterator<Item = (i64, Complex64)>>(modes: I) -> Self {
        let mut p = Self::zero(1);
        for (k, c) in modes {
            p.add_coeff(k, &Block::from_element(1, 1, c));
        }
        p
    }

    pub fn monomial(mode: i64, value: Block) -> Self {
        let mut p = Self::zero(value.nrows());
        p.add_coeff(mode, &value);
        p
    }

    /// `e^{imx}` times the identity of the given rank.
    pub fn exponential(rank: usize, mode: i64) -> Self {
        Self::monomial(mode, Block::identity(rank, rank))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coeff(&self, mode: i64) -> Option<&Block> {
        self.coeffs.get(&mode)
    }

    pub fn coeff_or_zero(&self, mode: i64) -> Block {
        self.coeffs
            .get(&mode)
            .cloned()
            .unwrap_or_else(|| Block::zeros(self.rank, self.rank))
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Block)> {
        self.coeffs.iter().map(|(k, b)| (*k, b))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|m|` with a stored coefficient (0 for the zero polynomial).
    pub fn bandwidth(&self) -> usize {
        self.coeffs.keys().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// The mean `c_0`.
    pub fn mean(&self) -> Block {
        self.coeff_or_zero(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(block_max_abs).fold(0.0, f64::max)
    }

    pub(crate) fn add_coeff(&mut self, mode: i64, value: &Block) {
        assert_eq!(value.nrows(), self.rank, "coefficient rank");
        match self.coeffs.get_mut(&mode) {
            Some(existing) => {
                *existing += value;
                if block_is_zero(existing) {
                    self.coeffs.remove(&mode);
                }
            }
            None => {
                if !block_is_zero(value) {
                    self.coeffs.insert(mode, value.clone());
                }
            }
        }
    }

    fn check_rank(&self, other: &Self) -> Result<()> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch { left: self.rank, right: other.rank });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_rank(other)?;
        let mut out = self.clone();
        for (k, b) in &other.coeffs {
            out.add_coeff(*k, b);
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = Self::zero(self.rank);
        for (k, b) in &self.coeffs {
            out.add_coeff(*k, &(b * factor));
        }
        out
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: Complex64, other: &Self) -> Result<Self> {
        self.check_rank(other)?;
        let mut out = self.clone();
        for (k, b) in &other.coeffs {
            out.add_coeff(*k, &(b * factor));
        }
        Ok(out)
    }

    /// Pointwise product `self(x) · other(x)` (matrix product, left factor first).
    pub fn try_mul(&self, other: &Self, cap: usize) -> Result<Self> {
        self.check_rank(other)?;
        let found = self.bandwidth() + other.bandwidth();
        if found > cap && !self.is_zero() && !other.is_zero() {
            return Err(Error::BandwidthOverflow { found, cap });
        }
        let mut acc: BTreeMap<i64, Block> = BTreeMap::new();
        for (ka, a) in &self.coeffs {
            for (kb, b) in &other.coeffs {
                let prod = a * b;
                acc.entry(ka + kb)
                    .and_modify(|e| *e += &prod)
                    .or_insert(prod);
            }
        }
        acc.retain(|_, b| !block_is_zero(b));
        Ok(Self { rank: self.rank, coeffs: acc })
    }

    /// `D_x^α` with `D_x = -i ∂_x`: multiplies `c_m` by `m^α`.
    pub fn dx_power(&self, alpha: u32) -> Self {
        if alpha == 0 {
            return self.clone();
        }
        let mut out = Self::zero(self.rank);
        for (k, b) in &self.coeffs {
            let f = (*k as f64).powi(alpha as i32);
            out.add_coeff(*k, &(b * c64(f, 0.0)));
        }
        out
    }

    /// Ordinary derivative `∂_x`.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zero(self.rank);
        for (k, b) in &self.coeffs {
            out.add_coeff(*k, &(b * c64(0.0, *k as f64)));
        }
        out
    }

    /// Translate: `x ↦ a(x - shift)`, i.e. `c_m ↦ c_m e^{-im·shift}`.
    pub fn translate(&self, shift: f64) -> Self {
        let mut out = Self::zero(self.rank);
        for (k, b) in &self.coeffs {
            let phase = Complex64::from_polar(1.0, -(*k as f64) * shift);
            out.add_coeff(*k, &(b * phase));
        }
        out
    }

    pub fn eval(&self, x: f64) -> Block {
        let mut out = Block::zeros(self.rank, self.rank);
        for (k, b) in &self.coeffs {
            out += b * Complex64::from_polar(1.0, *k as f64 * x);
        }
        out
    }

    /// Evaluate a rank-one polynomial.
    pub fn eval_scalar(&self, x: f64) -> Complex64 {
        debug_assert_eq!(self.rank, 1);
        self.coeffs
            .iter()
            .map(|(k, b)| b[(0, 0)] * Complex64::from_polar(1.0, *k as f64 * x))
            .sum()
    }

    /// Drop coefficients whose entries are all at most `tol` in modulus.
    pub fn prune(&self, tol: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.retain(|_, b| block_max_abs(b) > tol);
        out
    }

    /// True when the polynomial takes real (rank one) values.
    pub fn is_real_scalar(&self, tol: f64) -> bool {
        if self.rank != 1 {
            return false;
        }
        self.coeffs.iter().all(|(k, b)| {
            let mirror = self.coeff(-k).map(|m| m[(0, 0)]).unwrap_or_default();
            (b[(0, 0)] - mirror.conj()).norm() <= tol
        })
    }

    /// Fit from equispaced samples `x_j = 2πj/P`. Returns the polynomial
    /// truncated to `bandwidth` together with the largest discarded
    /// coefficient modulus (a truncation error indicator).
    pub fn from_samples(rank: usize, samples: &[Block], bandwidth: usize) -> (Self, f64) {
        let p = samples.len();
        assert!(p > 2 * bandwidth, "need more samples than 2*bandwidth");
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(p);
        let mut coeff_blocks: BTreeMap<i64, Block> = BTreeMap::new();
        let mut dropped: f64 = 0.0;
        for i in 0..rank {
            for j in 0..rank {
                let mut buf: Vec<Complex64> = samples.iter().map(|s| s[(i, j)]).collect();
                fft.process(&mut buf);
                for (idx, v) in buf.iter().enumerate() {
                    let k = if idx <= p / 2 { idx as i64 } else { idx as i64 - p as i64 };
                    let c = v / p as f64;
                    if k.unsigned_abs() as usize <= bandwidth {
                        coeff_blocks
                            .entry(k)
                            .or_insert_with(|| Block::zeros(rank, rank))[(i, j)] = c;
                    } else {
                        dropped = dropped.max(c.norm());
                    }
                }
            }
        }
        let mut out = Self::zero(rank);
        for (k, b) in coeff_blocks {
            out.add_coeff(k, &b);
        }
        (out, dropped)
    }

    /// Fit a rank-one polynomial to a function sampled at `samples` points.
    pub fn from_fn<F: Fn(f64) -> Complex64>(f: F, samples: usize, bandwidth: usize) -> (Self, f64) {
        let blocks: Vec<Block> = (0..samples)
            .map(|j| Block::from_element(1, 1, f(2.0 * PI * j as f64 / samples as f64)))
            .collect();
        Self::from_samples(1, &blocks, bandwidth)
    }
}
