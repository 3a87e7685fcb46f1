use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::trigpoly::{c64, Block, TrigPoly};

/// Resampling parameters for composition and inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffeoConfig {
    pub bandwidth: usize,
    pub samples: usize,
    /// Lower bound required of `g'` after every operation.
    pub margin: f64,
}

impl Default for DiffeoConfig {
    fn default() -> Self {
        Self { bandwidth: 128, samples: 1024, margin: 1e-6 }
    }
}

/// An orientation preserving diffeomorphism `g(x) = x + u(x)` of the circle,
/// with `u` a real trigonometric polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffeo {
    u: TrigPoly,
}

const BASED_TOL: f64 = 1e-12;
const CHECK_POINTS: usize = 1024;

impl Diffeo {
    pub fn identity() -> Self {
        Self { u: TrigPoly::zero(1) }
    }

    /// `x ↦ x + α`.
    pub fn rotation(alpha: f64) -> Self {
        Self { u: TrigPoly::scalar(c64(alpha, 0.0)).prune(0.0) }
    }

    /// `x ↦ x + a sin(kx)`; based, and orientation preserving iff `|a k| < 1`.
    pub fn sine(amplitude: f64, mode: i64) -> Result<Self> {
        let half = amplitude / 2.0;
        Self::from_displacement(TrigPoly::from_modes([(mode, c64(0.0, -half)), (-mode, c64(0.0, half))]))
    }

    /// Validates that `u` is real, rank one, and that `1 + u' > margin`.
    pub fn from_displacement(u: TrigPoly) -> Result<Self> {
        if u.rank() != 1 {
            return Err(Error::RankMismatch { left: 1, right: u.rank() });
        }
        if !u.is_real_scalar(1e-13 * (1.0 + u.max_abs())) {
            return Err(Error::ComplexDisplacement);
        }
        let g = Self { u: symmetrize(&u) };
        g.check_orientation_with(DiffeoConfig::default().margin)?;
        Ok(g)
    }

    pub fn displacement(&self) -> &TrigPoly {
        &self.u
    }

    pub fn bandwidth(&self) -> usize {
        self.u.bandwidth()
    }

    /// `g(0) = 0`.
    pub fn is_based(&self) -> bool {
        self.u.eval_scalar(0.0).re.abs() <= BASED_TOL
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.u.max_abs() <= tol
    }

    /// The lift `g(x) = x + u(x)` on the real line.
    pub fn eval(&self, x: f64) -> f64 {
        x + self.u.eval_scalar(x).re
    }

    pub fn derivative(&self, x: f64) -> f64 {
        1.0 + self
            .u
            .iter()
            .map(|(k, b)| (b[(0, 0)] * Complex64::new(0.0, k as f64) * Complex64::from_polar(1.0, k as f64 * x)).re)
            .sum::<f64>()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.u
            .iter()
            .map(|(k, b)| (b[(0, 0)] * (-(k * k) as f64) * Complex64::from_polar(1.0, k as f64 * x)).re)
            .sum()
    }

    /// Minimum of `g'` on a fine equispaced grid.
    pub fn min_derivative(&self) -> f64 {
        let pts = CHECK_POINTS.max(16 * self.bandwidth());
        (0..pts)
            .map(|j| self.derivative(2.0 * PI * j as f64 / pts as f64))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_orientation(&self) -> Result<()> {
        self.check_orientation_with(DiffeoConfig::default().margin)
    }

    fn check_orientation_with(&self, margin: f64) -> Result<()> {
        let min_derivative = self.min_derivative();
        if min_derivative > margin {
            Ok(())
        } else {
            Err(Error::NotOrientationPreserving { min_derivative })
        }
    }

    /// Solve `x + u(x) = y` by safeguarded Newton iteration.
    pub fn inverse_point(&self, y: f64) -> Result<f64> {
        self.inverse_point_at(y, 0)
    }

    fn inverse_point_at(&self, y: f64, node: usize) -> Result<f64> {
        if self.u.is_zero() {
            return Ok(y);
        }
        // g(x) - y is increasing; u is bounded by the sum of its coefficients.
        let bound: f64 = self.u.iter().map(|(_, b)| b[(0, 0)].norm()).sum::<f64>() + 1e-9;
        let (mut lo, mut hi) = (y - bound, y + bound);
        let mut x = y - self.u.eval_scalar(y).re;
        for _ in 0..200 {
            let f = self.eval(x) - y;
            if f.abs() <= 4.0 * f64::EPSILON * (1.0 + y.abs()) {
                return Ok(x);
            }
            if f > 0.0 {
                hi = hi.min(x);
            } else {
                lo = lo.max(x);
            }
            let step = f / self.derivative(x);
            let mut next = x - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) {
                return Ok(next);
            }
            x = next;
        }
        let residual = (self.eval(x) - y).abs();
        if residual <= 1e-13 * (1.0 + y.abs()) {
            Ok(x)
        } else {
            Err(Error::NewtonFailure { node, y })
        }
    }

    /// `(self ∘ other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Diffeo) -> Result<Diffeo> {
        self.compose_with(other, &DiffeoConfig::default()).map(|(g, _)| g)
    }

    /// Composition with the largest discarded Fourier coefficient.
    pub fn compose_with(&self, other: &Diffeo, cfg: &DiffeoConfig) -> Result<(Diffeo, f64)> {
        let fit = |x: f64| -> Complex64 {
            let inner = other.eval(x);
            c64(other.u.eval_scalar(x).re + self.u.eval_scalar(inner).re, 0.0)
        };
        self.refit(fit, cfg)
    }

    pub fn inverse(&self) -> Result<Diffeo> {
        self.inverse_with(&DiffeoConfig::default()).map(|(g, _)| g)
    }

    /// `g^{-1}(y) = y + v(y)` with `v` fitted from per-node Newton solves.
    pub fn inverse_with(&self, cfg: &DiffeoConfig) -> Result<(Diffeo, f64)> {
        let p = cfg.samples.max(2 * cfg.bandwidth + 2);
        let mut values = Vec::with_capacity(p);
        for j in 0..p {
            let y = 2.0 * PI * j as f64 / p as f64;
            values.push(self.inverse_point_at(y, j)? - y);
        }
        let fit = |y: f64| {
            let j = (y * p as f64 / (2.0 * PI)).round() as usize % p;
            c64(values[j], 0.0)
        };
        let (mut g, dropped) = self.refit(fit, &DiffeoConfig { samples: p, ..*cfg })?;
        if self.is_based() {
            // g(0) = 0 forces g^{-1}(0) = 0; the fit only misses it by truncation.
            let shift = g.u.eval_scalar(0.0).re;
            g.u.add_coeff(0, &Block::from_element(1, 1, c64(-shift, 0.0)));
        }
        Ok((g, dropped))
    }

    fn refit<F: Fn(f64) -> Complex64>(&self, f: F, cfg: &DiffeoConfig) -> Result<(Diffeo, f64)> {
        let p = cfg.samples.max(2 * cfg.bandwidth + 2);
        let (u, dropped) = TrigPoly::from_fn(f, p, cfg.bandwidth);
        let g = Diffeo { u: symmetrize(&u.prune(1e-17)) };
        g.check_orientation_with(cfg.margin)?;
        Ok((g, dropped))
    }

    /// Sup-norm distance between the lifts, sampled on a fine grid.
    pub fn distance(&self, other: &Diffeo) -> f64 {
        let pts = CHECK_POINTS.max(16 * self.bandwidth().max(other.bandwidth()));
        (0..pts)
            .map(|j| {
                let x = 2.0 * PI * j as f64 / pts as f64;
                (self.eval(x) - other.eval(x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Enforce `c_{-m} = conj(c_m)` so the displacement is exactly real.
fn symmetrize(u: &TrigPoly) -> TrigPoly {
    let mut modes = Vec::new();
    for (k, b) in u.iter() {
        let mirror = u.coeff(-k).map(|m| m[(0, 0)]).unwrap_or_default();
        let v = 0.5 * (b[(0, 0)] + mirror.conj());
        let v = if k == 0 { c64(v.re, 0.0) } else { v };
        modes.push((k, v));
    }
    for (k, _) in u.iter() {
        if u.coeff(-k).is_none() {
            let v = 0.5 * u.coeff(k).map(|m| m[(0, 0)]).unwrap_or_default().conj();
            modes.push((-k, v));
        }
    }
    TrigPoly::from_modes(modes).prune(0.0)
}

/// `g₁ ∘ g₂`.
pub fn diffeo_compose(g1: &Diffeo, g2: &Diffeo) -> Result<Diffeo> {
    g1.compose(g2)
}

pub fn diffeo_invert(g: &Diffeo) -> Result<Diffeo> {
    g.inverse()
}
