//! The sign operator on the mode lattice and the Schwinger cocycle
//! `c(A, B) = ½ tr(ε [ε, A] [ε, B])`.
//!
//! All three conventions for `ε` are diagonal, so with `ε = diag(e_n)`
//!
//! ```text
//! c(A, B) = -½ Σ_{m,n} e_m (e_m - e_n)² tr(A_{mn} B_{nm}),
//! ```
//!
//! which only involves pairs of modes on opposite sides of the splitting.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantize::{ModeGrid, OpMatrix, Sector};
use crate::trigpoly::c64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpsilonConvention {
    /// `ε = D|D|^{-1}` with `|D| = Id` on constants: `ε e₀ = 0`, `ε² = Id - P₀`.
    KernelZero,
    /// `sign(0) = +1`: `ε² = Id`.
    SignPlus,
    /// `ε(∇) = i·sign(n+½)` on the anti-periodic sector: `ε² = -Id`.
    Twisted,
}

impl EpsilonConvention {
    pub fn name(self) -> &'static str {
        match self {
            EpsilonConvention::KernelZero => "kernel-zero",
            EpsilonConvention::SignPlus => "sign-plus",
            EpsilonConvention::Twisted => "twisted",
        }
    }

    pub fn sector(self) -> Sector {
        match self {
            EpsilonConvention::Twisted => Sector::Twisted,
            _ => Sector::Periodic,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "kernel-zero" | "kernelZero" | "paperKernelZero" => Some(EpsilonConvention::KernelZero),
            "sign-plus" | "signPlus" => Some(EpsilonConvention::SignPlus),
            "twisted" => Some(EpsilonConvention::Twisted),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSpec {
    pub convention: EpsilonConvention,
    pub grid: ModeGrid,
}

impl EpsilonSpec {
    pub fn new(convention: EpsilonConvention, cutoff: usize, rank: usize) -> Self {
        Self { convention, grid: ModeGrid::new(cutoff, convention.sector(), rank) }
    }

    /// `e_n` for `n = -N..=N`.
    pub fn diagonal(&self) -> Vec<Complex64> {
        epsilon_diagonal(self.convention, &self.grid)
    }

    pub fn matrix(&self) -> OpMatrix {
        let e = self.diagonal();
        let n0 = self.grid.cutoff as i64;
        OpMatrix::diagonal(self.grid, |n| e[(n + n0) as usize])
    }
}

/// Diagonal of `ε` on an arbitrary grid of the matching sector.
pub fn epsilon_diagonal(convention: EpsilonConvention, grid: &ModeGrid) -> Vec<Complex64> {
    grid.modes()
        .map(|n| {
            let xi = grid.xi(n);
            let s = if xi > 0.0 {
                1.0
            } else if xi < 0.0 {
                -1.0
            } else {
                match convention {
                    EpsilonConvention::KernelZero => 0.0,
                    _ => 1.0,
                }
            };
            match convention {
                EpsilonConvention::Twisted => c64(0.0, s),
                _ => c64(s, 0.0),
            }
        })
        .collect()
}

/// A cocycle value together with the convention it was computed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocycleValue {
    pub value: Complex64,
    pub convention: EpsilonConvention,
}

/// Fraction of `‖[ε, A]‖²_HS` allowed in the outer quarter of the grid.
const EDGE_FRACTION: f64 = 1e-24;

fn check_grid(a: &OpMatrix, eps: &EpsilonSpec) -> Result<()> {
    if *a.grid() != eps.grid {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Hilbert–Schmidt certificate on the grid: the commutator with `ε` must not
/// reach the outer quarter of the modes.
fn check_hs(a: &OpMatrix, e: &[Complex64]) -> Result<()> {
    let g = a.grid();
    let r = g.rank;
    let n0 = g.cutoff as i64;
    let edge = (3 * g.cutoff / 4) as i64;
    let (mut total, mut outer) = (0.0, 0.0);
    for m in g.modes() {
        for n in g.modes() {
            let d = e[(m + n0) as usize] - e[(n + n0) as usize];
            if d == Complex64::default() {
                continue;
            }
            let (om, on) = (g.offset_of(m), g.offset_of(n));
            let mut w = 0.0;
            for i in 0..r {
                for j in 0..r {
                    w += a.entries()[(om + i, on + j)].norm_sqr();
                }
            }
            let w = w * d.norm_sqr();
            total += w;
            if m.abs().max(n.abs()) > edge {
                outer += w;
            }
        }
    }
    if outer > EDGE_FRACTION.max(1e-30) * total.max(1e-300) && outer > 1e-28 {
        Err(Error::NotHilbertSchmidt)
    } else {
        Ok(())
    }
}

/// `½ tr(ε [ε, A] [ε, B])` on the grid of `eps`.
pub fn schwinger(a: &OpMatrix, b: &OpMatrix, eps: &EpsilonSpec) -> Result<CocycleValue> {
    check_grid(a, eps)?;
    check_grid(b, eps)?;
    let e = eps.diagonal();
    check_hs(a, &e)?;
    check_hs(b, &e)?;
    Ok(CocycleValue { value: schwinger_unchecked(a, b, &e), convention: eps.convention })
}

// Summed over unordered pairs of modes with a swap-symmetric block trace, so
// that exchanging A and B negates every term exactly when e_n = -e_m.
fn schwinger_unchecked(a: &OpMatrix, b: &OpMatrix, e: &[Complex64]) -> Complex64 {
    let g = a.grid();
    let modes: Vec<i64> = g.modes().collect();
    let n0 = g.cutoff as i64;
    let mut total = Complex64::default();
    for (i, &m) in modes.iter().enumerate() {
        let em = e[(m + n0) as usize];
        for &n in &modes[i + 1..] {
            let en = e[(n + n0) as usize];
            let d = em - en;
            if d == Complex64::default() {
                continue;
            }
            let d2 = d * d;
            // c collects e_m d² tr(A_mn B_nm) + e_n d² tr(A_nm B_mn).
            let y = pair_trace(a, b, m, n);
            let x = pair_trace(a, b, n, m);
            if x == Complex64::default() && y == Complex64::default() {
                continue;
            }
            total += em * d2 * y + en * d2 * x;
        }
    }
    total * -0.5
}

/// `tr(A_mn B_nm)`. Entries `(i, j)` and `(j, i)` are added pairwise, so
/// `pair_trace(b, a, m, n) == pair_trace(a, b, n, m)` bit for bit.
fn pair_trace(a: &OpMatrix, b: &OpMatrix, m: i64, n: i64) -> Complex64 {
    let g = a.grid();
    let r = g.rank;
    let (om, on) = (g.offset_of(m), g.offset_of(n));
    let (ea, eb) = (a.entries(), b.entries());
    let prod = |i: usize, j: usize| ea[(om + i, on + j)] * eb[(on + j, om + i)];
    let mut tr = Complex64::default();
    for i in 0..r {
        tr += prod(i, i);
        for j in i + 1..r {
            tr += prod(i, j) + prod(j, i);
        }
    }
    tr
}

/// Defects of the 2-cocycle identity and of antisymmetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `|c([A,B],C) + c([B,C],A) + c([C,A],B)|`.
    pub cocycle_defect: f64,
    /// `|c(A,B) + c(B,A)|`.
    pub antisymmetry_defect: f64,
    pub convention: EpsilonConvention,
}

pub fn cocycle_identity_check(a: &OpMatrix, b: &OpMatrix, c: &OpMatrix, eps: &EpsilonSpec) -> Result<IdentityReport> {
    let ab = a.commutator(b)?;
    let bc = b.commutator(c)?;
    let ca = c.commutator(a)?;
    let s = |x: &OpMatrix, y: &OpMatrix| schwinger(x, y, eps).map(|v| v.value);
    let cocycle = s(&ab, c)? + s(&bc, a)? + s(&ca, b)?;
    let anti = s(a, b)? + s(b, a)?;
    Ok(IdentityReport { cocycle_defect: cocycle.norm(), antisymmetry_defect: anti.norm(), convention: eps.convention })
}

/// A value computed along increasing cutoffs, with the last increment as certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergedValue {
    pub value: Complex64,
    pub increment: f64,
    pub history: Vec<(usize, Complex64)>,
    pub convention: EpsilonConvention,
}

/// Cocycle of operators that are not banded (e.g. diffeomorphism matrices):
/// evaluate at each cutoff and report the last increment.
pub fn schwinger_converged<F>(build: F, convention: EpsilonConvention, cutoffs: &[usize], rank: usize) -> Result<ConvergedValue>
where
    F: Fn(&ModeGrid) -> Result<(OpMatrix, OpMatrix)>,
{
    if cutoffs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two cutoffs".into()));
    }
    let mut history = Vec::new();
    for &n in cutoffs {
        let eps = EpsilonSpec::new(convention, n, rank);
        let (a, b) = build(&eps.grid)?;
        check_grid(&a, &eps)?;
        check_grid(&b, &eps)?;
        history.push((n, schwinger_unchecked(&a, &b, &eps.diagonal())));
    }
    let k = history.len();
    let increment = (history[k - 1].1 - history[k - 2].1).norm();
    Ok(ConvergedValue { value: history[k - 1].1, increment, history, convention })
}
