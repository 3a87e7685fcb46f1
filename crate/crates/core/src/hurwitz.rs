//! Hurwitz zeta `ζ(s, a) = Σ_{n≥0} (n+a)^{-s}` near integer arguments,
//! by Euler–Maclaurin summation carried out on truncated Taylor series in
//! `u = s - s₀`.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const MAX_BERNOULLI: usize = 40;

/// Taylor coefficients `[f₀, f₁, f₂]` of a function of a small parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Taylor3(pub [f64; 3]);

impl Taylor3 {
    pub fn constant(v: f64) -> Self {
        Self([v, 0.0, 0.0])
    }

    pub fn linear(v: f64, slope: f64) -> Self {
        Self([v, slope, 0.0])
    }

    pub fn scale(self, f: f64) -> Self {
        Self([self.0[0] * f, self.0[1] * f, self.0[2] * f])
    }

    /// `x^{-(s₀+u)}` for `x > 0`.
    fn inv_power(x: f64, s0: i64) -> Self {
        let base = x.powi(-s0 as i32);
        let l = x.ln();
        Self([base, -base * l, base * l * l / 2.0])
    }

    fn max_abs(self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Add for Taylor3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

/// Truncated product.
impl std::ops::Mul for Taylor3 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Self([a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[0] * b[2] + a[1] * b[1] + a[2] * b[0]])
    }
}

/// `ζ(s₀ + u, a) ≈ pole/u + f₀ + f₁ u + f₂ u²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzExpansion {
    pub pole: f64,
    pub regular: Taylor3,
}

/// `B_{2j}/(2j)!` for `j = 1..=MAX_BERNOULLI`, via `(-1)^{j+1} 2ζ(2j)/(2π)^{2j}`.
fn bernoulli_ratios() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (1..=MAX_BERNOULLI)
            .map(|j| {
                let z = riemann_zeta_even(2 * j as i32);
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * 2.0 * z / (2.0 * PI).powi(2 * j as i32)
            })
            .collect()
    })
}

/// `ζ(k)` for even `k ≥ 2`.
fn riemann_zeta_even(k: i32) -> f64 {
    match k {
        2 => PI * PI / 6.0,
        4 => PI.powi(4) / 90.0,
        _ => {
            // Tail beyond M is below M^{1-k}/(k-1) ≤ 1e-17 for k ≥ 6 and M = 2000.
            let m = 2000;
            let tail = (m as f64).powi(1 - k) / (k - 1) as f64;
            (1..=m).rev().map(|n| (n as f64).powi(-k)).sum::<f64>() + tail
        }
    }
}

/// Laurent/Taylor data of `ζ(s₀ + u, a)` at `u = 0`, for integer `s₀` and `a > 0`.
pub fn hurwitz_expansion(s0: i64, a: f64) -> HurwitzExpansion {
    assert!(a > 0.0, "Hurwitz offset must be positive");
    // For s₀ ≤ 0 keep N small: the direct terms grow like N^{1-s₀} and cancel.
    let n_direct: i64 = if s0 <= 0 { 12 } else { 16 + s0.min(40) };
    let mut regular = Taylor3::default();
    for n in (0..n_direct).rev() {
        regular = regular + Taylor3::inv_power(n as f64 + a, s0);
    }
    let x = n_direct as f64 + a;
    let l = x.ln();
    let pole;
    if s0 == 1 {
        // x^{-u}/u = 1/u - L + u L²/2 - u² L³/6
        pole = 1.0;
        regular = regular + Taylor3([-l, l * l / 2.0, -l * l * l / 6.0]);
    } else {
        pole = 0.0;
        let c = (s0 - 1) as f64;
        let inv = Taylor3([1.0 / c, -1.0 / (c * c), 1.0 / (c * c * c)]);
        regular = regular + Taylor3::inv_power(x, s0 - 1) * inv;
    }
    regular = regular + Taylor3::inv_power(x, s0).scale(0.5);

    // Σ_j B_{2j}/(2j)! (s)_{2j-1} x^{-s-2j+1}, stopping once terms stop shrinking.
    let ratios = bernoulli_ratios();
    let s_lin = |shift: i64| Taylor3::linear((s0 + shift) as f64, 1.0);
    let mut rising = s_lin(0);
    let mut prev = f64::INFINITY;
    for (j, ratio) in ratios.iter().enumerate() {
        let j = j as i64 + 1;
        if j > 1 {
            rising = rising * s_lin(2 * j - 3) * s_lin(2 * j - 2);
        }
        let term = (rising * Taylor3::inv_power(x, s0 + 2 * j - 1)).scale(*ratio);
        let size = term.max_abs();
        if size > prev {
            break;
        }
        regular = regular + term;
        if size <= 1e-18 * regular.max_abs().max(1e-300) {
            break;
        }
        prev = size;
    }
    HurwitzExpansion { pole, regular }
}

/// `ζ(s, a)` at an integer `s ≠ 1`.
pub fn hurwitz_value(s: i64, a: f64) -> f64 {
    assert_ne!(s, 1, "pole at s = 1");
    hurwitz_expansion(s, a).regular.0[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riemann_values() {
        assert!((hurwitz_value(2, 1.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((hurwitz_value(4, 1.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((hurwitz_value(0, 1.0) + 0.5).abs() < 1e-14);
        assert!((hurwitz_value(-1, 1.0) + 1.0 / 12.0).abs() < 1e-14);
        assert!((hurwitz_value(-3, 1.0) - 1.0 / 120.0).abs() < 1e-14);
        assert!((hurwitz_value(3, 1.0) - 1.202_056_903_159_594_2).abs() < 1e-14);
    }

    #[test]
    fn bernoulli_polynomial_values() {
        // ζ(-k, a) = -B_{k+1}(a)/(k+1)
        for a in [0.5, 1.5, 2.25, 7.0] {
            let b1 = a - 0.5;
            let b2 = a * a - a + 1.0 / 6.0;
            let b3 = a * a * a - 1.5 * a * a + 0.5 * a;
            assert!((hurwitz_value(0, a) + b1).abs() < 1e-13, "a = {a}");
            assert!((hurwitz_value(-1, a) + b2 / 2.0).abs() < 1e-12, "a = {a}");
            assert!((hurwitz_value(-2, a) + b3 / 3.0).abs() < 1e-11, "a = {a}");
        }
    }

    #[test]
    fn pole_data_at_one() {
        // ζ(1+u, 1) = 1/u + γ₀ - γ₁ u + γ₂ u²/2, with Stieltjes γ₁ < 0 and γ₂ < 0
        // ζ(1+u, ½) = 1/u - ψ(½) + …
        let e = hurwitz_expansion(1, 1.0);
        assert_eq!(e.pole, 1.0);
        assert!((e.regular.0[0] - EULER_GAMMA).abs() < 1e-14);
        assert!((e.regular.0[1] - 0.072_815_845_483_676_72).abs() < 1e-12);
        assert!((e.regular.0[2] + 0.009_690_363_192_872_318 / 2.0).abs() < 1e-12);
        let half = hurwitz_expansion(1, 0.5);
        let digamma_half = -EULER_GAMMA - 2.0 * 2f64.ln();
        assert!((half.regular.0[0] + digamma_half).abs() < 1e-14);
    }

    #[test]
    fn derivative_at_zero() {
        // ∂_s ζ(0, a) = ln Γ(a) - ½ ln 2π
        let e = hurwitz_expansion(0, 1.0);
        assert!((e.regular.0[1] + 0.5 * (2.0 * PI).ln()).abs() < 1e-12);
        let e = hurwitz_expansion(0, 0.5);
        assert!((e.regular.0[1] - (0.5 * PI.ln() - 0.5 * (2.0 * PI).ln())).abs() < 1e-12);
    }

    #[test]
    fn shift_relation() {
        for s in [-2, 0, 2, 5] {
            let a = 0.75;
            let lhs = hurwitz_value(s, a);
            let rhs = a.powi(-s as i32) + hurwitz_value(s, a + 1.0);
            assert!((lhs - rhs).abs() < 1e-12, "s = {s}");
        }
    }
}
