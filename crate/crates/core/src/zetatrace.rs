//! Weights, ζ-functions `ζ(A, Q, s) = tr(A Q^{-s})`, their continuation to
//! `s = 0`, and the traces built on the finite part.
//!
//! Weights are diagonal in the mode basis, `Q e_n = w(n+θ) e_n`. The
//! continuation splits the diagonal of `A` into
//!
//! * the low modes `|ξ| < ξ_cut`, summed directly,
//! * the homogeneous terms of the symbol on the two half-line tails, each a
//!   binomial series of Hurwitz zeta values, and
//! * a remainder (exact diagonal minus symbol diagonal) that is absolutely
//!   summable and is added mode by mode.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hurwitz::{hurwitz_expansion, Taylor3, EULER_GAMMA};
use crate::operator::Operator;
use crate::quantize::{PreparedSymbol, Sector};
use crate::symbol::{self, builtin, parity_class, wodzicki_res, Builtin, FormalSymbol, Parity};
use crate::trigpoly::{c64, Block, TrigPoly};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// `w(ξ) = (μ² + ξ²)^p`, order `2p`.
    Laplace { mass_sq: f64, power: u32 },
    /// `w(ξ) = |ξ|^p` with `w(0) = 1`, order `p`.
    Abs { power: u32 },
}

/// A positive diagonal weight, optionally conjugated by a multiplication
/// operator: `Q' = C^{-1} Q C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    name: String,
    kind: WeightKind,
    sector: Sector,
    conjugator: Option<(TrigPoly, TrigPoly)>,
}

impl Weight {
    pub fn new(name: impl Into<String>, kind: WeightKind, sector: Sector) -> Result<Self> {
        match kind {
            WeightKind::Laplace { mass_sq, power } => {
                if !(mass_sq.is_finite() && mass_sq > 0.0) || power == 0 {
                    return Err(Error::InvalidArgument("Laplace weight needs μ² > 0 and p ≥ 1".into()));
                }
            }
            WeightKind::Abs { power } => {
                if power == 0 {
                    return Err(Error::InvalidArgument("weight order must be positive".into()));
                }
            }
        }
        Ok(Self { name: name.into(), kind, sector, conjugator: None })
    }

    /// `1 + Δ`, order 2.
    pub fn laplace(sector: Sector) -> Self {
        Self::new("1+Delta", WeightKind::Laplace { mass_sq: 1.0, power: 1 }, sector).expect("valid")
    }

    /// `(μ² + Δ)^p`.
    pub fn laplace_with(mass_sq: f64, power: u32, sector: Sector) -> Result<Self> {
        Self::new(format!("({mass_sq:?}+Delta)^{power}"), WeightKind::Laplace { mass_sq, power }, sector)
    }

    /// `|D|` with the kernel filled in by the identity, order 1.
    pub fn abs(sector: Sector) -> Self {
        Self::new("|D|", WeightKind::Abs { power: 1 }, sector).expect("valid")
    }

    /// `C^{-1} Q C` for `C = M_c`; `c_inv` must be the pointwise inverse of `c`.
    pub fn conjugated(&self, c: TrigPoly, c_inv: TrigPoly) -> Result<Self> {
        if self.conjugator.is_some() {
            return Err(Error::InvalidArgument("weight is already conjugated".into()));
        }
        if c.rank() != c_inv.rank() {
            return Err(Error::RankMismatch { left: c.rank(), right: c_inv.rank() });
        }
        Ok(Self { name: format!("Ad({})", self.name), conjugator: Some((c, c_inv)), ..self.clone() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn is_conjugated(&self) -> bool {
        self.conjugator.is_some()
    }

    /// The order `q`.
    pub fn order(&self) -> u32 {
        match self.kind {
            WeightKind::Laplace { power, .. } => 2 * power,
            WeightKind::Abs { power } => power,
        }
    }

    /// `w(ξ)`.
    pub fn spectral(&self, xi: f64) -> f64 {
        match self.kind {
            WeightKind::Laplace { mass_sq, power } => (mass_sq + xi * xi).powi(power as i32),
            WeightKind::Abs { power } => {
                if xi == 0.0 {
                    1.0
                } else {
                    xi.abs().powi(power as i32)
                }
            }
        }
    }

    /// Modes with `|ξ| < ξ_cut` are summed directly; beyond it the binomial
    /// expansion of `w^{-s}` converges.
    fn cut(&self) -> f64 {
        match self.kind {
            WeightKind::Laplace { mass_sq, .. } => (2.0 * mass_sq.sqrt()).max(1.0),
            WeightKind::Abs { .. } => 1.0,
        }
    }

    /// The classical symbol of the (unconjugated) weight; exact.
    pub fn symbol(&self, rank: usize) -> FormalSymbol {
        let id = |v: f64| TrigPoly::constant(Block::identity(rank, rank) * c64(v, 0.0));
        match self.kind {
            WeightKind::Laplace { mass_sq, power } => {
                let p = power as i64;
                let mut s = FormalSymbol::zero(rank, 2 * p);
                let mut binom = 1.0;
                for k in 0..=p {
                    let v = binom * mass_sq.powi(k as i32);
                    s.add_component(2 * (p - k), 0, id(v), id(v)).expect("valid component");
                    binom = binom * (p - k) as f64 / (k + 1) as f64;
                }
                s
            }
            WeightKind::Abs { power } => {
                FormalSymbol::homogeneous(power as i64, 0, id(1.0), id(1.0)).expect("valid component")
            }
        }
    }

    /// `σ(log Q)`, exact down to at least degree `-depth`.
    pub fn log_symbol(&self, rank: usize, depth: usize) -> Result<FormalSymbol> {
        if self.conjugator.is_some() {
            return Err(Error::InvalidArgument("log symbol needs a scalar diagonal weight".into()));
        }
        match self.kind {
            WeightKind::Laplace { mass_sq, power } => {
                symbol::log_laplace_symbol(rank, mass_sq, power as f64, depth / 2 + 1)
            }
            WeightKind::Abs { power } => {
                let id = TrigPoly::constant(Block::identity(rank, rank) * c64(power as f64, 0.0));
                FormalSymbol::homogeneous(0, 1, id.clone(), id)
            }
        }
    }

    pub fn is_odd_class(&self) -> bool {
        self.conjugator.is_none()
            && parity_class(&self.symbol(1)).map(|p| p == Parity::Odd).unwrap_or(false)
    }

    /// Laurent data of `Σ_{ξ ∈ a + ℕ} ξ^d w(ξ)^{-s}` at `s = 0`.
    fn tail_laurent(&self, d: i64, a: f64) -> LaurentAtZero {
        match self.kind {
            WeightKind::Abs { power } => hurwitz_in_s(-d, a, power as f64),
            WeightKind::Laplace { mass_sq, power } => {
                // Σ ξ^{d - 2ps} (1 + μ²/ξ²)^{-ps} = Σ_k binom(-ps, k) μ^{2k} ζ(2ps + 2k - d, a)
                let p = power as f64;
                let mut total = LaurentAtZero::zero();
                let mut binom = Taylor3::constant(1.0);
                let mut mu_pow = 1.0;
                for k in 0..400_i64 {
                    if k > 0 {
                        let kf = k as f64;
                        binom = binom * Taylor3::linear(-(kf - 1.0) / kf, -p / kf);
                        mu_pow *= mass_sq;
                    }
                    let z = hurwitz_in_s(2 * k - d, a, 2.0 * p);
                    let term = LaurentAtZero::from_taylor(binom.scale(mu_pow)).mul_taylor_laurent(&z);
                    total = total.add(&term);
                    let size = term.c_m1.norm().max(term.c0.norm()).max(term.c1.norm());
                    if k > (d + 1) / 2 + 1 && size <= 1e-18 * (1.0 + total.c0.norm() + total.c1.norm()) {
                        break;
                    }
                }
                total
            }
        }
    }
}

/// `ζ(s₀ + λs, a)` as a Laurent series in `s`.
fn hurwitz_in_s(s0: i64, a: f64, lambda: f64) -> LaurentAtZero {
    let e = hurwitz_expansion(s0, a);
    LaurentAtZero {
        c_m1: c64(e.pole / lambda, 0.0),
        c0: c64(e.regular.0[0], 0.0),
        c1: c64(e.regular.0[1] * lambda, 0.0),
    }
}

/// `c₋₁/s + c₀ + c₁ s`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaurentAtZero {
    pub c_m1: Complex64,
    pub c0: Complex64,
    pub c1: Complex64,
}

impl LaurentAtZero {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(c_m1: Complex64, c0: Complex64, c1: Complex64) -> Self {
        Self { c_m1, c0, c1 }
    }

    fn from_taylor(t: Taylor3) -> TaylorSeries {
        TaylorSeries(t)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { c_m1: self.c_m1 + o.c_m1, c0: self.c0 + o.c0, c1: self.c1 + o.c1 }
    }

    pub fn scale(&self, f: Complex64) -> Self {
        Self { c_m1: self.c_m1 * f, c0: self.c0 * f, c1: self.c1 * f }
    }

    /// Product truncated after `s¹`. Two poles would produce an `s^{-2}` term
    /// that this representation cannot hold; that case is rejected.
    pub fn checked_mul(&self, o: &Self) -> Option<Self> {
        let zero = Complex64::default();
        if self.c_m1 != zero && o.c_m1 != zero {
            return None;
        }
        // (a₋₁/s + a₀ + a₁s)(b₋₁/s + b₀ + b₁s) with a₋₁b₋₁ = 0; the s¹ term
        // would also need a₂, b₂ when a pole is present, so c₁ is only exact
        // for pole-free factors.
        Some(Self {
            c_m1: self.c_m1 * o.c0 + self.c0 * o.c_m1,
            c0: self.c0 * o.c0 + self.c_m1 * o.c1 + self.c1 * o.c_m1,
            c1: self.c0 * o.c1 + self.c1 * o.c0,
        })
    }
}

/// A pole-free series in `s` known to order `s²`.
struct TaylorSeries(Taylor3);

impl TaylorSeries {
    fn mul_taylor_laurent(&self, l: &LaurentAtZero) -> LaurentAtZero {
        let [t0, t1, t2] = self.0 .0;
        LaurentAtZero {
            c_m1: l.c_m1 * t0,
            c0: l.c0 * t0 + l.c_m1 * t1,
            c1: l.c1 * t0 + l.c0 * t1 + l.c_m1 * t2,
        }
    }
}

/// Numerical knobs of the continuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaConfig {
    /// Symbol depth used for products.
    pub depth: usize,
    /// Remainder modes summed directly (`|n| ≤ remainder_modes`).
    pub remainder_modes: usize,
    /// Allowed `|c₋₁ - res/q|`.
    pub coherence_tol: f64,
}

impl Default for ZetaConfig {
    fn default() -> Self {
        Self { depth: 12, remainder_modes: 512, coherence_tol: 1e-8 }
    }
}

struct Prepared {
    effective: Operator,
    symbol: Option<FormalSymbol>,
}

fn prepare(a: &Operator, q: &Weight, depth: usize) -> Result<Prepared> {
    let effective = match &q.conjugator {
        // tr(A (C^{-1}QC)^{-s}) = tr(C A C^{-1} Q^{-s})
        Some((c, c_inv)) => Operator::Product(vec![
            Operator::multiplication(c.clone()),
            a.clone(),
            Operator::multiplication(c_inv.clone()),
        ]),
        None => a.clone(),
    };
    let symbol = effective.symbol(depth)?;
    if let Some(s) = &symbol {
        s.require_classical()?;
    }
    Ok(Prepared { effective, symbol })
}

fn mode_range(bound: f64) -> std::ops::RangeInclusive<i64> {
    let b = bound.ceil() as i64 + 1;
    -b..=b
}

/// Laurent expansion of `ζ(A, Q, s)` at `s = 0`.
pub fn zeta_laurent(a: &Operator, q: &Weight) -> Result<LaurentAtZero> {
    zeta_laurent_with(a, q, &ZetaConfig::default())
}

pub fn zeta_laurent_with(a: &Operator, q: &Weight, cfg: &ZetaConfig) -> Result<LaurentAtZero> {
    let p = prepare(a, q, cfg.depth)?;
    let sector = q.sector;
    let ev = p.effective.evaluator(sector)?;
    if let Some(s) = &p.symbol {
        if s.order() >= -1 {
            if let Some(floor) = s.floor() {
                if floor > -1 {
                    return Err(Error::DepthTooShallow { floor });
                }
            }
        }
    }
    let prepared = p.symbol.as_ref().map(PreparedSymbol::new);
    let cut = q.cut();
    let mut out = LaurentAtZero::zero();

    // Low modes and remainder, mode by mode.
    let remainder_bound = if p.effective.has_remainder() {
        (cfg.remainder_modes as f64).max(p.effective.smoothing_support() as f64 + 1.0)
    } else {
        cut
    };
    for n in mode_range(remainder_bound.max(cut)) {
        let xi = sector.xi(n);
        let low = xi.abs() < cut;
        if !low && xi.abs() > remainder_bound + 0.5 {
            continue;
        }
        let exact = ev.diagonal(n).trace();
        let value = if low {
            exact
        } else {
            let sym = prepared.as_ref().map_or(Complex64::default(), |ps| ps.mean_at(xi).trace());
            exact - sym
        };
        if value != Complex64::default() {
            let lw = q.spectral(xi).ln();
            out.c0 += value;
            out.c1 -= value * lw;
        }
    }

    // Homogeneous terms on the two tails.
    if let Some(s) = &p.symbol {
        let first_plus = (cut - sector.theta()).ceil() as i64;
        let a_plus = sector.xi(first_plus);
        let first_minus = (-cut - sector.theta()).floor() as i64;
        let a_minus = -sector.xi(first_minus);
        for c in s.components() {
            let mp = c.plus.mean().trace();
            let mm = c.minus.mean().trace();
            if mp != Complex64::default() {
                out = out.add(&q.tail_laurent(c.degree, a_plus).scale(mp));
            }
            if mm != Complex64::default() {
                out = out.add(&q.tail_laurent(c.degree, a_minus).scale(mm));
            }
        }
    }
    Ok(out)
}

/// `tr^Q(A)`, the finite part at `s = 0`, after checking the pole against the residue.
pub fn tr_q(a: &Operator, q: &Weight) -> Result<Complex64> {
    tr_q_with(a, q, &ZetaConfig::default())
}

pub fn tr_q_with(a: &Operator, q: &Weight, cfg: &ZetaConfig) -> Result<Complex64> {
    let l = zeta_laurent_with(a, q, cfg)?;
    let residue = match a.symbol(cfg.depth)? {
        Some(s) => wodzicki_res(&s)?,
        None => Complex64::default(),
    };
    let expected = residue / q.order() as f64;
    let scale = 1.0 + expected.norm();
    if (l.c_m1 - expected).norm() > cfg.coherence_tol * scale {
        return Err(Error::ResidueCoherence { pole: l.c_m1.re, expected: expected.re });
    }
    Ok(l.c0)
}

/// `tr(A Q^{-s})` in the convergent half-plane, by direct summation plus an
/// Euler–Maclaurin tail.
pub fn zeta_direct(a: &Operator, q: &Weight, s: Complex64) -> Result<Complex64> {
    let cfg = ZetaConfig::default();
    let p = prepare(a, q, cfg.depth)?;
    let sector = q.sector;
    let ev = p.effective.evaluator(sector)?;
    let qf = q.order() as f64;
    let Some(sym) = &p.symbol else {
        // Smoothing: a finite sum.
        let bound = p.effective.smoothing_support() as f64 + 1.0;
        let mut total = Complex64::default();
        for n in mode_range(bound) {
            let d = ev.diagonal(n).trace();
            if d != Complex64::default() {
                total += d * (-s * q.spectral(sector.xi(n)).ln()).exp();
            }
        }
        return Ok(total);
    };
    let order = sym.components().map(|c| c.degree).max().unwrap_or(i64::MIN);
    let bound = (order as f64 + 1.0) / qf;
    if order != i64::MIN && s.re <= bound {
        return Err(Error::DivergentRegion { re: s.re, bound });
    }
    let prepared = PreparedSymbol::new(sym);
    let big_m: i64 = 4000;
    let direct_bound = big_m as f64;
    let mut total = Complex64::default();
    let remainder = p.effective.has_remainder();
    for n in mode_range(direct_bound) {
        let xi = sector.xi(n);
        if xi.abs() >= direct_bound {
            continue;
        }
        let d = if remainder && xi.abs() <= cfg.remainder_modes as f64 + 1.0 || xi.abs() < 1.0 {
            ev.diagonal(n).trace()
        } else {
            prepared.mean_at(xi).trace()
        };
        total += d * (-s * q.spectral(xi).ln()).exp();
    }
    if order == i64::MIN {
        return Ok(total);
    }
    // Tails ξ ≥ X on both sides: Σ_{k≥0} f(X + k) with f smooth.
    let x0 = direct_bound;
    for sign in [1.0, -1.0] {
        let start = if sign > 0.0 {
            sector.xi((x0 - sector.theta()).ceil() as i64)
        } else {
            -sector.xi((-x0 - sector.theta()).floor() as i64)
        };
        let f = |t: f64| -> Complex64 {
            let xi = sign * t;
            prepared.mean_at(xi).trace() * (-s * q.spectral(xi).ln()).exp()
        };
        total += euler_maclaurin_tail(&f, start, (s.re * qf - order as f64).max(1.0 + 1e-6));
    }
    Ok(total)
}

/// `Σ_{k≥0} f(x₀ + k)` for `f` decaying like `t^{-decay}`.
fn euler_maclaurin_tail<F: Fn(f64) -> Complex64>(f: &F, x0: f64, decay: f64) -> Complex64 {
    // ∫_{x₀}^∞ f with t = x₀ e^u, Gauss–Legendre on panels of width 1/2 in u.
    let (nodes, weights) = gauss_legendre(20);
    let u_max = (45.0 / (decay - 1.0)).min(2000.0);
    let panels = (u_max / 0.5).ceil() as usize;
    let mut integral = Complex64::default();
    for p in 0..panels {
        let (lo, hi) = (p as f64 * 0.5, (p as f64 + 1.0) * 0.5);
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        for (x, w) in nodes.iter().zip(&weights) {
            let u = mid + half * x;
            let t = x0 * u.exp();
            integral += f(t) * (t * half * w);
        }
    }
    let h = 1e-3 * x0;
    let deriv = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
    integral + f(x0) * 0.5 - deriv / 12.0
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Outcome of fitting the small-`t` expansion of `tr(A e^{-tQ})`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatReport {
    /// Constant term `c`.
    pub constant: f64,
    /// Coefficient `b` of `log t`.
    pub log_coeff: f64,
    /// `c - γ b`, the finite part of the ζ-function at zero.
    pub finite_part: f64,
    /// `-b`, the pole of the ζ-function at zero.
    pub pole: f64,
    pub rms_residual: f64,
    /// Rms of the residual relative to `1 + |value|`; false when it exceeds [`HEAT_FIT_TOL`].
    pub conclusive: bool,
}

/// Default time samples for [`heat_trace_oracle`].
pub fn default_heat_times() -> Vec<f64> {
    (0..40).map(|k| 1e-4 * (1.17f64).powi(k)).collect()
}

/// `tr(A e^{-tQ})` for operators with real diagonal, summed until `e^{-tw}` is negligible.
pub fn heat_trace(a: &Operator, q: &Weight, t: f64) -> Result<f64> {
    heat_traces(a, q, &[t]).map(|v| v[0])
}

fn heat_traces(a: &Operator, q: &Weight, ts: &[f64]) -> Result<Vec<f64>> {
    let cfg = ZetaConfig::default();
    let p = prepare(a, q, cfg.depth)?;
    let sector = q.sector;
    let ev = p.effective.evaluator(sector)?;
    let prepared = p.symbol.as_ref().map(PreparedSymbol::new);
    let t_min = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let exact_bound = if p.effective.has_remainder() {
        (cfg.remainder_modes as f64).max(p.effective.smoothing_support() as f64 + 1.0)
    } else {
        1.0
    };
    // Largest ξ with t_min·w(ξ) ≤ 60.
    let mut xi_max = 1.0_f64;
    while t_min * q.spectral(xi_max) <= 60.0 {
        xi_max *= 1.25;
    }
    let xi_max = if prepared.is_some() { xi_max.max(exact_bound) } else { exact_bound };
    let mut sums = vec![0.0; ts.len()];
    for n in mode_range(xi_max) {
        let xi = sector.xi(n);
        if xi.abs() > xi_max + 1.0 {
            continue;
        }
        let d = if xi.abs() <= exact_bound + 0.5 {
            ev.diagonal(n).trace()
        } else {
            prepared.as_ref().map_or(Complex64::default(), |ps| ps.mean_at(xi).trace())
        };
        if d == Complex64::default() {
            continue;
        }
        if d.im.abs() > 1e-12 * (1.0 + d.re.abs()) {
            return Err(Error::InvalidArgument("heat oracle needs a real diagonal".into()));
        }
        let w = q.spectral(xi);
        for (acc, t) in sums.iter_mut().zip(ts) {
            *acc += d.re * (-t * w).exp();
        }
    }
    Ok(sums)
}

/// Independent estimate of the ζ finite part from the small-`t` heat expansion
/// `Σ a_j t^{(j-m-1)/q} + Σ_k (b_k log t + c_k) t^k`.
///
/// The expansion is truncated at `t^{e_max}`. The smallest cut in
/// [`HEAT_EXPONENT_CUTS`] whose fit is conclusive is reported: higher cuts only
/// lower the residual by trading accuracy of the constant for conditioning.
pub fn heat_trace_oracle(a: &Operator, q: &Weight, ts: &[f64]) -> Result<HeatReport> {
    if ts.len() < 6 {
        return Err(Error::InvalidArgument("heat oracle needs at least six times".into()));
    }
    if ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument("heat times must be positive".into()));
    }
    let cfg = ZetaConfig::default();
    let order = match a.symbol(cfg.depth)? {
        Some(s) => s.components().map(|c| c.degree).max().unwrap_or(-100),
        None => -100,
    };
    let values = heat_traces(a, q, ts)?;
    let mut last = None;
    for &e_max in HEAT_EXPONENT_CUTS {
        let report = heat_fit(order, q.order() as i64, ts, &values, e_max)?;
        if report.conclusive {
            return Ok(report);
        }
        last = Some(report);
    }
    Ok(last.expect("at least one cut"))
}

/// Largest accepted rms of the relative fit residual.
pub const HEAT_FIT_TOL: f64 = 1e-13;

pub const HEAT_EXPONENT_CUTS: &[f64] = &[2.5, 3.5, 4.5, 5.5];

fn heat_fit(order: i64, qf: i64, ts: &[f64], values: &[f64], e_max: f64) -> Result<HeatReport> {
    let t_max = ts.iter().cloned().fold(0.0, f64::max);
    let mut exponents: Vec<f64> = Vec::new();
    let mut j = 0i64;
    loop {
        let e = (j - order - 1) as f64 / qf as f64;
        if e > e_max {
            break;
        }
        let is_nonneg_int = e >= 0.0 && (e - e.round()).abs() < 1e-12;
        if !is_nonneg_int {
            exponents.push(e);
        }
        j += 1;
    }
    let int_powers: Vec<i32> = (0..=(e_max.floor() as i32)).collect();
    let ncols = exponents.len() + 2 * int_powers.len();
    if ts.len() < ncols + 1 {
        return Err(Error::InvalidArgument(format!("heat oracle needs more than {ncols} times")));
    }
    let scale_t = |t: f64| t / t_max;
    let mut m = DMatrix::<f64>::zeros(ts.len(), ncols);
    let mut rhs = DVector::<f64>::zeros(ts.len());
    for (i, (&t, &v)) in ts.iter().zip(values).enumerate() {
        let tau = scale_t(t);
        let lt = t.ln();
        let mut col = 0;
        for &e in &exponents {
            m[(i, col)] = tau.powf(e);
            col += 1;
        }
        for &k in &int_powers {
            m[(i, col)] = tau.powi(k);
            m[(i, col + 1)] = tau.powi(k) * lt;
            col += 2;
        }
        rhs[i] = v;
        // Summation error is relative to the value.
        let w = 1.0 / (1.0 + v.abs());
        m.row_mut(i).scale_mut(w);
        rhs[i] *= w;
    }
    // Column equilibration before the SVD solve.
    let norms: Vec<f64> = (0..ncols).map(|c| m.column(c).norm().max(1e-300)).collect();
    for (c, nrm) in norms.iter().enumerate() {
        m.column_mut(c).scale_mut(1.0 / nrm);
    }
    let svd = m.clone().svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidArgument(format!("heat fit failed: {e}")))?;
    let coeffs: Vec<f64> = sol.iter().zip(&norms).map(|(c, n)| c / n).collect();
    let fitted = &m * &sol;
    let rms = ((fitted - &rhs).norm_squared() / ts.len() as f64).sqrt();
    // The constant and log t columns of k = 0; rescaling t only shifts c by b·log(t_max).
    let base = exponents.len();
    let constant_scaled = coeffs[base];
    let log_coeff = coeffs[base + 1];
    let constant = constant_scaled;
    Ok(HeatReport {
        constant,
        log_coeff,
        finite_part: constant - EULER_GAMMA * log_coeff,
        pole: -log_coeff,
        rms_residual: rms,
        conclusive: rms <= HEAT_FIT_TOL,
    })
}

/// The weight pair used by [`kv_trace`]: `1 + Δ` and `(4 + Δ)²`.
pub fn kv_weights(sector: Sector) -> (Weight, Weight) {
    (Weight::laplace(sector), Weight::laplace_with(4.0, 2, sector).expect("valid"))
}

/// Kontsevich–Vishik trace of an odd-class operator, computed with two odd-class
/// weights and checked for weight independence.
pub fn kv_trace(a: &Operator, sector: Sector) -> Result<Complex64> {
    let (q1, q2) = kv_weights(sector);
    kv_trace_with(a, &q1, &q2)
}

pub fn kv_trace_with(a: &Operator, q1: &Weight, q2: &Weight) -> Result<Complex64> {
    let cfg = ZetaConfig::default();
    if let Some(s) = a.symbol(cfg.depth)? {
        if parity_class(&s)? != Parity::Odd {
            return Err(Error::NotOddClass);
        }
    }
    for q in [q1, q2] {
        if !q.is_odd_class() {
            return Err(Error::WeightNotOddClass(q.name().to_string()));
        }
    }
    let l1 = zeta_laurent_with(a, q1, &cfg)?;
    let l2 = zeta_laurent_with(a, q2, &cfg)?;
    let pole = l1.c_m1.norm().max(l2.c_m1.norm());
    let delta = (l1.c0 - l2.c0).norm();
    let scale = 1.0 + l1.c0.norm();
    if pole > 1e-8 || delta > 1e-6 * scale {
        return Err(Error::KvMismatch { pole, delta });
    }
    Ok(l1.c0)
}

/// Both sides of `tr^Q[A, B] = -(1/q) res(A [B, log Q])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub delta: f64,
}

pub fn bracket_trace_check(a: &FormalSymbol, b: &FormalSymbol, q: &Weight, depth: usize) -> Result<BracketCheck> {
    a.require_classical()?;
    b.require_classical()?;
    let cfg = ZetaConfig { depth, ..ZetaConfig::default() };
    let comm = Operator::commutator(&Operator::Symbol(a.clone()), &Operator::Symbol(b.clone()));
    let lhs = tr_q_with(&comm, q, &cfg)?;
    let bracket = symbol::bracket_log_weight(b, q, depth)?;
    let needed = (a.order() + bracket.order() + 2).max(1) as usize;
    let prod = symbol::compose(a, &bracket, needed.max(depth))?;
    let rhs = -wodzicki_res(&prod)? / q.order() as f64;
    Ok(BracketCheck { lhs, rhs, delta: (lhs - rhs).norm() })
}

/// `φ(A) = tr^Q(A^k)`.
pub fn trace_power(a: &Operator, k: usize, q: &Weight) -> Result<Complex64> {
    tr_q(&a.power(k)?, q)
}

/// The sign operator `ε(D)` realized with the `ξ = 0 ↦ +1` policy.
pub fn sign_operator(rank: usize) -> Operator {
    Operator::Symbol(builtin(&Builtin::Sign, rank).expect("builtin"))
}
