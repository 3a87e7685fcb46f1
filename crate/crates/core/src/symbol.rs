//! Truncated formal symbols on the circle and their algebra.
//!
//! A symbol is a finite list of positively homogeneous components
//! `a^±(x) |ξ|^d (log|ξ|)^j`, with independent coefficients on the two
//! half-lines `ξ > 0` and `ξ < 0`. Products follow the one-dimensional
//! Leibniz expansion
//!
//! ```text
//! σ_A ⋆ σ_B ~ Σ_α (1/α!) ∂_ξ^α σ_A · D_x^α σ_B,   D_x = -i ∂_x,
//! ```
//!
//! applied branch by branch. Every symbol carries a truncation floor: the
//! lowest degree whose component is known. Exact symbols (differential
//! operators, the sign, the spectral projections) have no floor.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fiogroup::Diffeo;
use crate::trigpoly::{c64, Block, TrigPoly};
use crate::zetatrace::Weight;

/// Bandwidth cap applied to coefficient products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub bandwidth_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { bandwidth_cap: 4096 }
    }
}

/// `a⁺(x) ξ^d (log ξ)^j` on `ξ > 0` and `a⁻(x) |ξ|^d (log|ξ|)^j` on `ξ < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogComponent {
    pub degree: i64,
    pub logpow: u32,
    pub plus: TrigPoly,
    pub minus: TrigPoly,
}

impl HomogComponent {
    pub fn branch(&self, xi: f64) -> &TrigPoly {
        if xi > 0.0 {
            &self.plus
        } else {
            &self.minus
        }
    }

    /// `|ξ|^d (log|ξ|)^j`.
    pub fn radial(&self, abs_xi: f64) -> f64 {
        let mut v = abs_xi.powi(self.degree as i32);
        if self.logpow > 0 {
            v *= abs_xi.ln().powi(self.logpow as i32);
        }
        v
    }

    /// Analytic evaluation at `ξ ≠ 0`.
    pub fn eval(&self, x: f64, xi: f64) -> Block {
        self.branch(xi).eval(x) * c64(self.radial(xi.abs()), 0.0)
    }

    /// A component equal to `a(x) ξ^d` for a non-negative integer `d`: a
    /// polynomial in `ξ`, smooth through `ξ = 0`.
    pub fn is_polynomial(&self) -> bool {
        if self.degree < 0 || self.logpow != 0 {
            return false;
        }
        let sign = if self.degree % 2 == 0 { 1.0 } else { -1.0 };
        self.minus == self.plus.scale(c64(sign, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.plus.max_abs().max(self.minus.max_abs())
    }

    fn is_zero(&self) -> bool {
        self.plus.is_zero() && self.minus.is_zero()
    }
}

/// Parity of a classical symbol under `ξ ↦ -ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// `σ_d(x,-ξ) = (-1)^d σ_d(x,ξ)` for every component.
    Odd,
    /// `σ_d(x,-ξ) = (-1)^{d+1} σ_d(x,ξ)` for every component.
    Even,
    Neither,
}

type Key = (i64, u32);

#[derive(Debug, Clone, PartialEq)]
pub struct FormalSymbol {
    rank: usize,
    order: i64,
    floor: Option<i64>,
    components: BTreeMap<Key, HomogComponent>,
}

impl FormalSymbol {
    /// The zero symbol of the given order; exact.
    pub fn zero(rank: usize, order: i64) -> Self {
        assert!(rank > 0, "rank must be positive");
        Self { rank, order, floor: None, components: BTreeMap::new() }
    }

    /// A single homogeneous component, exact.
    pub fn homogeneous(degree: i64, logpow: u32, plus: TrigPoly, minus: TrigPoly) -> Result<Self> {
        let mut s = Self::zero(plus.rank(), degree);
        s.add_component(degree, logpow, plus, minus)?;
        Ok(s)
    }

    /// Multiplication by `f`: degree 0 with equal branches.
    pub fn multiplication(f: TrigPoly) -> Self {
        let mut s = Self::zero(f.rank(), 0);
        s.add_component(0, 0, f.clone(), f).expect("rank is consistent");
        s
    }

    pub fn identity(rank: usize) -> Self {
        Self::multiplication(TrigPoly::identity(rank))
    }

    /// Accumulate a component. Fails on rank mismatch or if `degree` exceeds the order.
    pub fn add_component(&mut self, degree: i64, logpow: u32, plus: TrigPoly, minus: TrigPoly) -> Result<()> {
        for p in [&plus, &minus] {
            if p.rank() != self.rank {
                return Err(Error::RankMismatch { left: self.rank, right: p.rank() });
            }
        }
        if degree > self.order {
            return Err(Error::InvalidArgument(format!(
                "component degree {degree} exceeds symbol order {}",
                self.order
            )));
        }
        if let Some(floor) = self.floor {
            if degree < floor {
                return Ok(());
            }
        }
        self.accumulate(degree, logpow, &plus, &minus);
        Ok(())
    }

    fn accumulate(&mut self, degree: i64, logpow: u32, plus: &TrigPoly, minus: &TrigPoly) {
        let key = (degree, logpow);
        let entry = self.components.entry(key).or_insert_with(|| HomogComponent {
            degree,
            logpow,
            plus: TrigPoly::zero(plus.rank()),
            minus: TrigPoly::zero(plus.rank()),
        });
        entry.plus = entry.plus.try_add(plus).expect("rank checked");
        entry.minus = entry.minus.try_add(minus).expect("rank checked");
        if entry.is_zero() {
            self.components.remove(&key);
        }
    }

    pub fn with_order(mut self, order: i64) -> Result<Self> {
        if let Some(top) = self.components.keys().map(|k| k.0).max() {
            if top > order {
                return Err(Error::InvalidArgument(format!("order {order} below component degree {top}")));
            }
        }
        self.order = order;
        Ok(self)
    }

    /// Keep only degrees `>= floor` and mark everything below as unknown.
    pub fn truncate_below(&self, floor: i64) -> Self {
        let floor = self.floor.map_or(floor, |f| f.max(floor));
        let mut out = self.clone();
        out.floor = Some(floor);
        out.components.retain(|k, _| k.0 >= floor);
        out
    }

    /// Keep `depth` homogeneous degrees: `order, …, order - depth + 1`.
    pub fn truncate(&self, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::ZeroDepth);
        }
        Ok(self.truncate_below(self.order - depth as i64 + 1))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    /// Lowest degree that is known; `None` for exact symbols.
    pub fn floor(&self) -> Option<i64> {
        self.floor
    }

    /// Number of retained degrees, `None` for exact symbols.
    pub fn depth(&self) -> Option<usize> {
        self.floor.map(|f| (self.order - f + 1).max(0) as usize)
    }

    pub fn components(&self) -> impl DoubleEndedIterator<Item = &HomogComponent> {
        self.components.values().rev()
    }

    pub fn component(&self, degree: i64, logpow: u32) -> Option<&HomogComponent> {
        self.components.get(&(degree, logpow))
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_classical(&self) -> bool {
        self.components.keys().all(|k| k.1 == 0)
    }

    pub fn require_classical(&self) -> Result<()> {
        match self.components.keys().find(|k| k.1 > 0) {
            Some(&(degree, logpow)) => Err(Error::NotClassical { degree, logpow }),
            None => Ok(()),
        }
    }

    /// Largest coefficient bandwidth over all components and branches.
    pub fn bandwidth(&self) -> usize {
        self.components
            .values()
            .map(|c| c.plus.bandwidth().max(c.minus.bandwidth()))
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.components.values().map(HomogComponent::max_abs).fold(0.0, f64::max)
    }

    /// Analytic evaluation at `ξ ≠ 0`.
    pub fn eval(&self, x: f64, xi: f64) -> Block {
        let mut out = Block::zeros(self.rank, self.rank);
        for c in self.components.values() {
            out += c.eval(x, xi);
        }
        out
    }

    /// Largest entry of `self - other` over all components (ignores order and floor).
    pub fn distance(&self, other: &Self) -> f64 {
        let diff = linear_combine(&[(c64(1.0, 0.0), self), (c64(-1.0, 0.0), other)]);
        match diff {
            Ok(d) => d.max_abs(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Drop coefficients of modulus at most `tol`.
    pub fn prune(&self, tol: f64) -> Self {
        let mut out = self.clone();
        for c in out.components.values_mut() {
            c.plus = c.plus.prune(tol);
            c.minus = c.minus.prune(tol);
        }
        out.components.retain(|_, c| !c.is_zero());
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = Self { components: BTreeMap::new(), ..self.clone() };
        for c in self.components.values() {
            out.accumulate(c.degree, c.logpow, &c.plus.scale(factor), &c.minus.scale(factor));
        }
        out
    }
}

/// `∂_ξ^α` of `|ξ|^d (log|ξ|)^j`, as `(degree, logpow, plus factor, minus factor)`.
///
/// On `ξ < 0`, `d|ξ|/dξ = -1` so every derivative flips the sign of the minus branch.
fn xi_derivatives(degree: i64, logpow: u32, alpha: u32) -> Vec<(i64, u32, f64, f64)> {
    let mut terms: BTreeMap<Key, (f64, f64)> = BTreeMap::new();
    terms.insert((degree, logpow), (1.0, 1.0));
    for _ in 0..alpha {
        let mut next: BTreeMap<Key, (f64, f64)> = BTreeMap::new();
        for (&(d, j), &(p, m)) in &terms {
            if d != 0 {
                let e = next.entry((d - 1, j)).or_insert((0.0, 0.0));
                e.0 += d as f64 * p;
                e.1 -= d as f64 * m;
            }
            if j > 0 {
                let e = next.entry((d - 1, j - 1)).or_insert((0.0, 0.0));
                e.0 += j as f64 * p;
                e.1 -= j as f64 * m;
            }
        }
        next.retain(|_, v| v.0 != 0.0 || v.1 != 0.0);
        terms = next;
    }
    terms.into_iter().map(|((d, j), (p, m))| (d, j, p, m)).collect()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Leibniz product truncated to `depth` homogeneous degrees.
pub fn compose(a: &FormalSymbol, b: &FormalSymbol, depth: usize) -> Result<FormalSymbol> {
    compose_with(a, b, depth, &Limits::default())
}

pub fn compose_with(a: &FormalSymbol, b: &FormalSymbol, depth: usize, limits: &Limits) -> Result<FormalSymbol> {
    if a.rank != b.rank {
        return Err(Error::RankMismatch { left: a.rank, right: b.rank });
    }
    if depth == 0 {
        return Err(Error::ZeroDepth);
    }
    let order = a.order + b.order;
    let mut floor = order - depth as i64 + 1;
    if let Some(fa) = a.floor {
        floor = floor.max(fa + b.order);
    }
    if let Some(fb) = b.floor {
        floor = floor.max(fb + a.order);
    }
    let mut out = FormalSymbol { rank: a.rank, order, floor: Some(floor), components: BTreeMap::new() };
    let max_alpha = (order - floor).max(0) as u32;
    for alpha in 0..=max_alpha {
        let inv_fact = 1.0 / factorial(alpha);
        let b_derivs: Vec<(&HomogComponent, TrigPoly, TrigPoly)> = b
            .components
            .values()
            .map(|cb| (cb, cb.plus.dx_power(alpha), cb.minus.dx_power(alpha)))
            .filter(|(_, p, m)| !(p.is_zero() && m.is_zero()))
            .collect();
        if b_derivs.is_empty() {
            continue;
        }
        for ca in a.components.values() {
            if ca.degree - alpha as i64 + b.order < floor {
                continue;
            }
            for (d, j, pf, mf) in xi_derivatives(ca.degree, ca.logpow, alpha) {
                for (cb, bp, bm) in &b_derivs {
                    let degree = d + cb.degree;
                    if degree < floor {
                        continue;
                    }
                    let plus = ca
                        .plus
                        .try_mul(bp, limits.bandwidth_cap)?
                        .scale(c64(pf * inv_fact, 0.0));
                    let minus = ca
                        .minus
                        .try_mul(bm, limits.bandwidth_cap)?
                        .scale(c64(mf * inv_fact, 0.0));
                    out.accumulate(degree, j + cb.logpow, &plus, &minus);
                }
            }
        }
    }
    Ok(out)
}

/// `Σ λ_i A_i`, merged component-wise. The floor of the result is the
/// highest floor among the inputs.
pub fn linear_combine(terms: &[(Complex64, &FormalSymbol)]) -> Result<FormalSymbol> {
    let first = terms
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?
        .1;
    let rank = first.rank;
    let mut order = i64::MIN;
    let mut floor: Option<i64> = None;
    for (_, s) in terms {
        if s.rank != rank {
            return Err(Error::RankMismatch { left: rank, right: s.rank });
        }
        order = order.max(s.order);
        if let Some(f) = s.floor {
            floor = Some(floor.map_or(f, |g: i64| g.max(f)));
        }
    }
    let mut out = FormalSymbol { rank, order, floor, components: BTreeMap::new() };
    for (lambda, s) in terms {
        for c in s.components.values() {
            if floor.is_some_and(|f| c.degree < f) {
                continue;
            }
            out.accumulate(c.degree, c.logpow, &c.plus.scale(*lambda), &c.minus.scale(*lambda));
        }
    }
    Ok(out)
}

pub fn add(a: &FormalSymbol, b: &FormalSymbol) -> Result<FormalSymbol> {
    linear_combine(&[(c64(1.0, 0.0), a), (c64(1.0, 0.0), b)])
}

pub fn sub(a: &FormalSymbol, b: &FormalSymbol) -> Result<FormalSymbol> {
    linear_combine(&[(c64(1.0, 0.0), a), (c64(-1.0, 0.0), b)])
}

/// `A ⋆ B - B ⋆ A` to `depth` degrees.
pub fn commutator(a: &FormalSymbol, b: &FormalSymbol, depth: usize) -> Result<FormalSymbol> {
    let ab = compose(a, b, depth)?;
    let ba = compose(b, a, depth)?;
    sub(&ab, &ba)
}

fn keep_branch(a: &FormalSymbol, plus: bool) -> FormalSymbol {
    let mut out = FormalSymbol { components: BTreeMap::new(), ..a.clone() };
    for c in a.components.values() {
        let zero = TrigPoly::zero(a.rank);
        let (p, m) = if plus { (c.plus.clone(), zero) } else { (zero, c.minus.clone()) };
        out.accumulate(c.degree, c.logpow, &p, &m);
    }
    out
}

/// Zero every `ξ < 0` branch.
pub fn split_plus(a: &FormalSymbol) -> FormalSymbol {
    keep_branch(a, true)
}

/// Zero every `ξ > 0` branch.
pub fn split_minus(a: &FormalSymbol) -> FormalSymbol {
    keep_branch(a, false)
}

/// Classify a classical symbol as odd class, even class or neither.
pub fn parity_class(a: &FormalSymbol) -> Result<Parity> {
    a.require_classical()?;
    let tol = 1e-12 * (1.0 + a.max_abs());
    let holds = |flip_extra: bool| {
        a.components.values().all(|c| {
            let odd_degree = c.degree.rem_euclid(2) == 1;
            let sign = if odd_degree ^ flip_extra { -1.0 } else { 1.0 };
            let expected = c.plus.scale(c64(sign, 0.0));
            match c.minus.axpy(c64(-1.0, 0.0), &expected) {
                Ok(diff) => diff.max_abs() <= tol,
                Err(_) => false,
            }
        })
    };
    Ok(if holds(false) {
        Parity::Odd
    } else if holds(true) {
        Parity::Even
    } else {
        Parity::Neither
    })
}

/// Wodzicki residue on the circle:
/// `res A = tr[ mean(a⁺_{-1}) + mean(a⁻_{-1}) ]`.
///
/// With this normalisation `ζ(A, Q, s)` has residue `res(A)/q` at `s = 0`;
/// for instance `res |D|^{-1} = 2` and the pole of `Σ |n|^{-1}(1+n²)^{-s}` is `1/s`.
pub fn wodzicki_res(a: &FormalSymbol) -> Result<Complex64> {
    if a.components.iter().any(|(k, c)| k.0 == -1 && k.1 > 0 && !c.is_zero()) {
        return Err(Error::LogResidue);
    }
    if let Some(floor) = a.floor {
        if floor > -1 && a.order >= -1 {
            return Err(Error::Truncated { degree: -1, floor });
        }
    }
    Ok(match a.components.get(&(-1, 0)) {
        Some(c) => (c.plus.mean() + c.minus.mean()).trace(),
        None => Complex64::new(0.0, 0.0),
    })
}

/// The built-in symbols of the canonical operators.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Identity,
    /// `σ(D) = ξ`.
    D,
    /// `σ(|D|) = |ξ|`.
    AbsD,
    /// `σ(|D|^{-1}) = |ξ|^{-1}`.
    AbsDInverse,
    /// `σ(ε(D)) = ξ/|ξ|`.
    Sign,
    /// `σ(ε(∇)) = iξ/|ξ|`, the real-bundle convention.
    SignNabla,
    /// `½(1 + ξ/|ξ|)`.
    ProjPlus,
    /// `½(1 - ξ/|ξ|)`.
    ProjMinus,
    /// `σ(1 + Δ) = 1 + ξ²`.
    OnePlusLaplacian,
    /// `σ(log(1+Δ)) = 2 log|ξ| + Σ_{k=1..terms} (-1)^{k+1} ξ^{-2k}/k`.
    LogOnePlusLaplacian { terms: usize },
    Multiplication(TrigPoly),
}

impl Builtin {
    pub fn from_name(name: &str, terms: usize) -> Result<Self> {
        Ok(match name {
            "id" | "identity" => Builtin::Identity,
            "D" => Builtin::D,
            "absD" | "|D|" => Builtin::AbsD,
            "absDinv" | "|D|^-1" => Builtin::AbsDInverse,
            "eps" | "sign" => Builtin::Sign,
            "eps_nabla" => Builtin::SignNabla,
            "p_plus" => Builtin::ProjPlus,
            "p_minus" => Builtin::ProjMinus,
            "one_plus_laplacian" | "1+Delta" => Builtin::OnePlusLaplacian,
            "log_one_plus_laplacian" | "log(1+Delta)" => Builtin::LogOnePlusLaplacian { terms },
            other => return Err(Error::UnknownBuiltin(other.to_string())),
        })
    }
}

fn scalar_branch(rank: usize, value: Complex64) -> TrigPoly {
    TrigPoly::constant(Block::identity(rank, rank) * value)
}

/// Construct a built-in symbol acting on `C^rank`-valued functions.
pub fn builtin(which: &Builtin, rank: usize) -> Result<FormalSymbol> {
    let one = |v: f64| scalar_branch(rank, c64(v, 0.0));
    Ok(match which {
        Builtin::Identity => FormalSymbol::identity(rank),
        Builtin::D => FormalSymbol::homogeneous(1, 0, one(1.0), one(-1.0))?,
        Builtin::AbsD => FormalSymbol::homogeneous(1, 0, one(1.0), one(1.0))?,
        Builtin::AbsDInverse => FormalSymbol::homogeneous(-1, 0, one(1.0), one(1.0))?,
        Builtin::Sign => FormalSymbol::homogeneous(0, 0, one(1.0), one(-1.0))?,
        Builtin::SignNabla => FormalSymbol::homogeneous(
            0,
            0,
            scalar_branch(rank, c64(0.0, 1.0)),
            scalar_branch(rank, c64(0.0, -1.0)),
        )?,
        Builtin::ProjPlus => FormalSymbol::homogeneous(0, 0, one(1.0), one(0.0))?,
        Builtin::ProjMinus => FormalSymbol::homogeneous(0, 0, one(0.0), one(1.0))?,
        Builtin::OnePlusLaplacian => {
            let mut s = FormalSymbol::zero(rank, 2);
            s.add_component(2, 0, one(1.0), one(1.0))?;
            s.add_component(0, 0, one(1.0), one(1.0))?;
            s
        }
        Builtin::LogOnePlusLaplacian { terms } => log_laplace_symbol(rank, 1.0, 1.0, *terms)?,
        Builtin::Multiplication(f) => FormalSymbol::multiplication(f.clone()),
    })
}

/// `p·log(μ² + ξ²) = 2p log|ξ| + p Σ_{k=1..terms} (-1)^{k+1} μ^{2k} |ξ|^{-2k} / k`,
/// exact down to degree `-2·terms - 1`.
pub(crate) fn log_laplace_symbol(rank: usize, mass_sq: f64, power: f64, terms: usize) -> Result<FormalSymbol> {
    if terms == 0 {
        return Err(Error::ZeroDepth);
    }
    let one = |v: f64| scalar_branch(rank, c64(v, 0.0));
    let mut s = FormalSymbol::zero(rank, 0);
    s.add_component(0, 1, one(2.0 * power), one(2.0 * power))?;
    for k in 1..=terms {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let v = power * sign * mass_sq.powi(k as i32) / k as f64;
        s.add_component(-2 * k as i64, 0, one(v), one(v))?;
    }
    Ok(s.truncate_below(-2 * terms as i64 - 1))
}

/// `[σ(B), σ(log Q)]` for a scalar weight `Q`. The logarithmic terms cancel
/// and the result is a classical symbol of order `ord B - 1` with `depth`
/// retained degrees.
pub fn bracket_log_weight(b: &FormalSymbol, q: &Weight, depth: usize) -> Result<FormalSymbol> {
    b.require_classical()?;
    if depth == 0 {
        return Err(Error::ZeroDepth);
    }
    let log_q = q.log_symbol(b.rank(), depth + 1)?;
    let c = commutator(b, &log_q, depth + 1)?;
    let scale = 1.0 + b.max_abs();
    let mut leftover: f64 = 0.0;
    let mut out = FormalSymbol::zero(b.rank(), b.order() - 1);
    for comp in c.components.values() {
        if comp.logpow > 0 || comp.degree > b.order() - 1 {
            leftover = leftover.max(comp.max_abs());
            continue;
        }
        out.add_component(comp.degree, 0, comp.plus.clone(), comp.minus.clone())?;
    }
    if leftover > 1e-10 * scale {
        return Err(Error::SurvivingLogTerms(leftover));
    }
    Ok(match c.floor {
        Some(f) => out.truncate_below(f),
        None => out,
    })
}

/// Bandwidth and sampling used when re-expanding transported coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportConfig {
    pub bandwidth: usize,
    pub samples: usize,
    /// Coefficients below this modulus (relative to the largest) are dropped.
    pub prune: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self { bandwidth: 128, samples: 1024, prune: 1e-16 }
    }
}

/// Symbol of `T_g^{-1} A T_g`, where `T_g f = f ∘ g`, to leading order.
///
/// Each component `a^±(x)|ξ|^d` becomes `a^±(g^{-1}(x)) g'(g^{-1}(x))^d |ξ|^d`.
pub fn pushforward_diffeo_leading(a: &FormalSymbol, g: &Diffeo) -> Result<FormalSymbol> {
    pushforward_diffeo(a, g, 1, &TransportConfig::default()).map(|(s, _)| s)
}

/// Symbol of `T_g^{-1} A T_g` with `terms` ∈ {1, 2} terms of the change of
/// variables expansion. The second term is
/// `½ ∂_ξ²σ(x, g'ξ) · (-i g''(x)) ξ` evaluated at `x = g^{-1}(y)`, one order below
/// the leading one. Returns the symbol and the largest discarded Fourier
/// coefficient from the resampling.
pub fn pushforward_diffeo(
    a: &FormalSymbol,
    g: &Diffeo,
    terms: usize,
    cfg: &TransportConfig,
) -> Result<(FormalSymbol, f64)> {
    a.require_classical()?;
    if !(1..=2).contains(&terms) {
        return Err(Error::InvalidArgument(format!("transport terms must be 1 or 2, got {terms}")));
    }
    g.check_orientation()?;
    let p = cfg.samples.max(2 * cfg.bandwidth + 2);
    let nodes: Vec<f64> = (0..p).map(|j| 2.0 * PI * j as f64 / p as f64).collect();
    let pre: Vec<f64> = nodes.iter().map(|&y| g.inverse_point(y)).collect::<Result<_>>()?;
    let dg: Vec<f64> = pre.iter().map(|&x| g.derivative(x)).collect();
    let d2g: Vec<f64> = pre.iter().map(|&x| g.second_derivative(x)).collect();

    let mut out = FormalSymbol::zero(a.rank, a.order);
    let mut dropped: f64 = 0.0;
    let mut refit = |samples: Vec<Block>| -> TrigPoly {
        let (poly, lost) = TrigPoly::from_samples(a.rank, &samples, cfg.bandwidth);
        dropped = dropped.max(lost);
        let scale = poly.max_abs();
        poly.prune(cfg.prune * scale)
    };
    let mut exact = true;
    for c in a.components.values() {
        let d = c.degree;
        let lead = |branch: &TrigPoly| -> Vec<Block> {
            pre.iter()
                .zip(&dg)
                .map(|(&x, &gp)| branch.eval(x) * c64(gp.powi(d as i32), 0.0))
                .collect()
        };
        let plus = refit(lead(&c.plus));
        let minus = refit(lead(&c.minus));
        out.add_component(d, 0, plus, minus)?;
        // ∂_ξ^α |ξ|^d vanishes for α > d when d ∈ {0, 1, 2, …}; otherwise the
        // dropped terms are nonzero.
        let highest_kept_alpha = if terms == 1 { 1 } else { 2 };
        if !(0..=highest_kept_alpha).contains(&d) {
            exact = false;
        }
        if terms == 2 && d * (d - 1) != 0 {
            let factor = 0.5 * (d * (d - 1)) as f64;
            let corr = |branch: &TrigPoly, sign: f64| -> Vec<Block> {
                pre.iter()
                    .zip(dg.iter().zip(&d2g))
                    .map(|(&x, (&gp, &gpp))| {
                        branch.eval(x) * (c64(0.0, -gpp) * (sign * factor * gp.powi((d - 2) as i32)))
                    })
                    .collect()
            };
            let plus = refit(corr(&c.plus, 1.0));
            let minus = refit(corr(&c.minus, -1.0));
            out.add_component(d - 1, 0, plus, minus)?;
        }
    }
    let out = match (exact, a.floor) {
        (true, None) => out,
        (true, Some(f)) => out.truncate_below(f),
        (false, f) => {
            let lowest = a.order - terms as i64 + 1;
            out.truncate_below(f.map_or(lowest, |f| f.max(lowest)))
        }
    };
    Ok((out, dropped))
}
