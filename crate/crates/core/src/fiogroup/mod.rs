//! The group of Fourier integral operators `T_g ∘ A` with `g ∈ Diff₊(S¹)` and
//! `A` an invertible classical operator of order zero.
//!
//! `T_g f = f ∘ g`, hence `T_{g₁} T_{g₂} = T_{g₂∘g₁}` and
//!
//! ```text
//! (T_{g₁} A₁)(T_{g₂} A₂) = T_{g₂∘g₁} · (T_{g₂}^{-1} A₁ T_{g₂}) A₂.
//! ```
//!
//! The phase map `T_g A ↦ g` therefore reverses products.

mod diffeo;

pub use diffeo::{diffeo_compose, diffeo_invert, Diffeo, DiffeoConfig};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quantize::{diffeo_matrix, gl_res_witness, realize, sign_plus_diagonal, HsVerdict, ModeGrid, OpMatrix, Sector};
use crate::symbol::{compose, pushforward_diffeo, FormalSymbol, TransportConfig};
use crate::trigpoly::{Block, TrigPoly};

/// Numerical settings shared by the group operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FioConfig {
    /// Symbol depth for products.
    pub depth: usize,
    /// Terms of the change-of-variables expansion (1 or 2).
    pub transport_terms: usize,
    pub transport: TransportConfig,
    pub diffeo: DiffeoConfig,
    /// Smallest accepted `|det σ₀|` on both branches.
    pub invertibility_tol: f64,
    /// Cutoff of the grid on which products track their smoothing remainder.
    /// Without it, products of elements lacking a smoothing part are taken
    /// modulo smoothing operators.
    pub working_cutoff: Option<usize>,
}

impl Default for FioConfig {
    fn default() -> Self {
        Self {
            depth: 8,
            transport_terms: 2,
            transport: TransportConfig::default(),
            diffeo: DiffeoConfig::default(),
            invertibility_tol: 1e-8,
            working_cutoff: None,
        }
    }
}

/// `T_g ∘ (A + S)` with `A` classical of order zero and `S` a smoothing
/// correction stored on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FIOElement {
    phase: Diffeo,
    symbol: FormalSymbol,
    smoothing: Option<OpMatrix>,
    /// `min |det σ₀(x, ±1)|` over the sampling grid.
    certificate: f64,
}

impl FIOElement {
    pub fn new(phase: Diffeo, symbol: FormalSymbol, smoothing: Option<OpMatrix>) -> Result<Self> {
        symbol.require_classical()?;
        if symbol.order() != 0 {
            return Err(Error::InvalidArgument(format!("operator part must have order 0, got {}", symbol.order())));
        }
        if let Some(s) = &smoothing {
            if s.grid().rank != symbol.rank() {
                return Err(Error::RankMismatch { left: symbol.rank(), right: s.grid().rank });
            }
        }
        let certificate = leading_certificate(&symbol);
        if certificate <= FioConfig::default().invertibility_tol {
            return Err(Error::NotInvertible(certificate));
        }
        Ok(Self { phase, symbol, smoothing, certificate })
    }

    pub fn identity(rank: usize) -> Self {
        Self::new(Diffeo::identity(), FormalSymbol::identity(rank), None).expect("identity is invertible")
    }

    /// The section `g ↦ T_g`.
    pub fn from_diffeo(g: Diffeo, rank: usize) -> Self {
        Self::new(g, FormalSymbol::identity(rank), None).expect("identity is invertible")
    }

    pub fn from_symbol(symbol: FormalSymbol) -> Result<Self> {
        Self::new(Diffeo::identity(), symbol, None)
    }

    pub fn phase(&self) -> &Diffeo {
        &self.phase
    }

    pub fn symbol(&self) -> &FormalSymbol {
        &self.symbol
    }

    pub fn smoothing(&self) -> Option<&OpMatrix> {
        self.smoothing.as_ref()
    }

    pub fn certificate(&self) -> f64 {
        self.certificate
    }

    pub fn rank(&self) -> usize {
        self.symbol.rank()
    }

    /// `U_g (R(A) + S)` on the grid.
    pub fn realize(&self, grid: &ModeGrid, quadrature: usize) -> Result<OpMatrix> {
        let mut inner = realize(&self.symbol, grid)?;
        if let Some(s) = &self.smoothing {
            inner = if s.grid() == grid { inner.add(s)? } else { inner.add(&s.regrid(grid)?)? };
        }
        if self.phase.is_identity(0.0) {
            return Ok(inner);
        }
        diffeo_matrix(&self.phase, grid, quadrature)?.mul(&inner)
    }
}

/// `min_{x, ±} |det σ₀^±(x)|` of the degree-zero component.
fn leading_certificate(symbol: &FormalSymbol) -> f64 {
    let r = symbol.rank();
    let Some(c) = symbol.component(0, 0) else { return 0.0 };
    let pts = 256.max(8 * symbol.bandwidth());
    let mut min_det = f64::INFINITY;
    for j in 0..pts {
        let x = 2.0 * PI * j as f64 / pts as f64;
        for branch in [&c.plus, &c.minus] {
            let v: Block = branch.eval(x);
            let det = if r == 1 { v[(0, 0)].norm() } else { v.determinant().norm() };
            min_det = min_det.min(det);
        }
    }
    min_det
}

/// Product in the group.
pub fn fio_multiply(e1: &FIOElement, e2: &FIOElement) -> Result<FIOElement> {
    fio_multiply_with(e1, e2, &FioConfig::default(), None)
}

/// Product with explicit settings.
///
/// The symbol of the product is `(g₂^* A₁) # A₂`. When a working grid is known
/// (from `cfg.working_cutoff` or from a factor's smoothing part) the product
/// also carries the exact remainder
///
/// ```text
/// S₁₂ = T_{g₂}^{-1} (R(A₁)+S₁) T_{g₂} (R(A₂)+S₂) - R((g₂^* A₁) # A₂),
/// ```
///
/// evaluated on a grid wide enough to hold `T_{g₂}` applied to the cutoff
/// modes and then cropped back. `quadrature` overrides the size used for the
/// wide composition matrices.
pub fn fio_multiply_with(e1: &FIOElement, e2: &FIOElement, cfg: &FioConfig, quadrature: Option<usize>) -> Result<FIOElement> {
    if e1.rank() != e2.rank() {
        return Err(Error::RankMismatch { left: e1.rank(), right: e2.rank() });
    }
    let (g1, g2) = (&e1.phase, &e2.phase);
    let (phase, _) = g2.compose_with(g1, &cfg.diffeo)?;
    let (a1t, _) = if g2.is_identity(0.0) {
        (e1.symbol.clone(), 0.0)
    } else {
        pushforward_diffeo(&e1.symbol, g2, cfg.transport_terms, &cfg.transport)?
    };
    let symbol = compose(&a1t, &e2.symbol, cfg.depth)?;

    let grid = match (cfg.working_cutoff, e1.smoothing.as_ref().or(e2.smoothing.as_ref())) {
        (Some(n), _) => Some(ModeGrid::new(n, Sector::Periodic, e1.rank())),
        (None, Some(s)) => Some(*s.grid()),
        (None, None) => None,
    };
    let smoothing = match grid {
        Some(grid) => Some(exact_remainder(e1, e2, &symbol, &grid, cfg, quadrature)?),
        None => None,
    };
    let certificate = leading_certificate(&symbol);
    if certificate <= cfg.invertibility_tol {
        return Err(Error::NotInvertible(certificate));
    }
    Ok(FIOElement { phase, symbol, smoothing, certificate })
}

/// Extra modes beyond `max g₂' · N` on the working grid.
const WORKING_MARGIN: usize = 32;

fn exact_remainder(
    e1: &FIOElement,
    e2: &FIOElement,
    symbol: &FormalSymbol,
    grid: &ModeGrid,
    cfg: &FioConfig,
    quadrature: Option<usize>,
) -> Result<OpMatrix> {
    let g2 = &e2.phase;
    let reach = grid.cutoff + e2.symbol.bandwidth() + e1.symbol.bandwidth();
    let stretch = (0..1024)
        .map(|j| g2.derivative(2.0 * PI * j as f64 / 1024.0))
        .fold(1.0, f64::max);
    let wide = ModeGrid::new((stretch * reach as f64).ceil() as usize + WORKING_MARGIN, grid.sector, grid.rank);
    let lift = |e: &FIOElement| -> Result<OpMatrix> {
        let r = realize(&e.symbol, &wide)?;
        match &e.smoothing {
            Some(s) => r.add(&s.regrid(&wide)?),
            None => Ok(r),
        }
    };
    // Only the columns |n| ≤ N of the product are kept.
    let mut right = lift(e2)?;
    for n in wide.modes().filter(|n| !grid.contains(*n)) {
        for m in wide.modes() {
            right.set_block(m, n, &Block::zeros(grid.rank, grid.rank));
        }
    }
    let left = lift(e1)?;
    let product = if g2.is_identity(0.0) {
        left.mul(&right)?
    } else {
        let quad = quadrature.unwrap_or_else(|| crate::quantize::min_quadrature(wide.cutoff));
        let (g2inv, _) = g2.inverse_with(&cfg.diffeo)?;
        let moved = diffeo_matrix(g2, &wide, quad)?.mul(&right)?;
        diffeo_matrix(&g2inv, &wide, quad)?.mul(&left.mul(&moved)?)?
    };
    product.sub(&realize(symbol, &wide)?)?.restrict(grid)
}

/// Inverse of an element whose operator part is a degree-zero symbol without
/// smoothing correction: `(T_g A)^{-1} = T_{g^{-1}} · (T_g A^{-1} T_g^{-1})`.
pub fn fio_inverse(e: &FIOElement) -> Result<FIOElement> {
    fio_inverse_with(e, &FioConfig::default())
}

pub fn fio_inverse_with(e: &FIOElement, cfg: &FioConfig) -> Result<FIOElement> {
    if e.smoothing.is_some() || e.symbol.components().any(|c| c.degree != 0) {
        return Err(Error::InvalidArgument(
            "inversion is implemented for degree-zero symbols without smoothing part".into(),
        ));
    }
    let inv_symbol = pointwise_inverse(&e.symbol, &cfg.transport)?;
    let (ginv, _) = e.phase.inverse_with(&cfg.diffeo)?;
    let transported = if e.phase.is_identity(0.0) {
        inv_symbol
    } else {
        pushforward_diffeo(&inv_symbol, &ginv, cfg.transport_terms, &cfg.transport)?.0
    };
    FIOElement::new(ginv, transported, None)
}

/// Branch-wise pointwise inverse of a degree-zero symbol, refitted.
fn pointwise_inverse(symbol: &FormalSymbol, cfg: &TransportConfig) -> Result<FormalSymbol> {
    let r = symbol.rank();
    let c = symbol.component(0, 0).ok_or(Error::NotInvertible(0.0))?;
    let p = cfg.samples.max(2 * cfg.bandwidth + 2);
    let invert = |branch: &TrigPoly| -> Result<TrigPoly> {
        let mut samples = Vec::with_capacity(p);
        for j in 0..p {
            let x = 2.0 * PI * j as f64 / p as f64;
            let v = branch.eval(x);
            samples.push(v.clone().try_inverse().ok_or(Error::NotInvertible(0.0))?);
        }
        let (poly, _) = TrigPoly::from_samples(r, &samples, cfg.bandwidth);
        let scale = poly.max_abs();
        Ok(poly.prune(cfg.prune * scale))
    };
    FormalSymbol::homogeneous(0, 0, invert(&c.plus)?, invert(&c.minus)?)
}

/// The phase map `π̃`.
pub fn phase_projection(e: &FIOElement) -> Diffeo {
    e.phase.clone()
}

/// Numerical test of pseudolocality on the shell of modes `N/4 ≤ |n| ≤ N/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudolocalityReport {
    /// Energy outside `|m - n| ≤ band` relative to the total, over the shell columns.
    pub off_band_ratio: f64,
    /// `max |ĉ_k(n) - ĉ_k(n_ref)| / max |ĉ|` along each half of the shell.
    pub variation: f64,
    pub pseudolocal: bool,
}

pub const PSEUDOLOCAL_BAND: usize = 16;
const OFF_BAND_TOL: f64 = 1e-6;
const VARIATION_TOL: f64 = 0.25;

/// A classical operator of order zero has entries `ĉ_{m-n}(n)` that are
/// concentrated near the diagonal and vary slowly in `n` on each half-line.
/// Composition with a nontrivial diffeomorphism breaks one or the other.
pub fn pseudolocality_witness(m: &OpMatrix, band: usize) -> PseudolocalityReport {
    let g = *m.grid();
    let big_n = g.cutoff as i64;
    let (lo, hi) = (big_n / 4, big_n / 2);
    let mut total = 0.0;
    let mut off = 0.0;
    let mut scale: f64 = 0.0;
    for side in [1i64, -1] {
        for n in lo..=hi {
            let n = side * n;
            for mm in g.modes() {
                let b = m.block(mm, n);
                let e: f64 = b.iter().map(|z| z.norm_sqr()).sum();
                total += e;
                if (mm - n).unsigned_abs() as usize > band {
                    off += e;
                }
                scale = scale.max(e.sqrt());
            }
        }
    }
    let off_band_ratio = if total > 0.0 { off / total } else { 0.0 };
    let mut variation: f64 = 0.0;
    if scale > 0.0 {
        for side in [1i64, -1] {
            let n_ref = side * hi;
            for k in -(band as i64)..=(band as i64) {
                if !g.contains(n_ref + k) {
                    continue;
                }
                let reference = m.block(n_ref + k, n_ref);
                for n in lo..=hi {
                    let n = side * n;
                    if !g.contains(n + k) {
                        continue;
                    }
                    let d = (m.block(n + k, n) - &reference).iter().map(|z| z.norm()).fold(0.0, f64::max);
                    variation = variation.max(d / scale);
                }
            }
        }
    }
    PseudolocalityReport {
        off_band_ratio,
        variation,
        pseudolocal: off_band_ratio <= OFF_BAND_TOL && variation <= VARIATION_TOL,
    }
}

/// Settings of [`exactness_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessConfig {
    pub cutoff: usize,
    pub quadrature: usize,
    /// Cutoffs for the Hilbert–Schmidt sequence.
    pub hs_cutoffs: Vec<usize>,
    pub hs_tol: f64,
    pub fio: FioConfig,
}

impl Default for ExactnessConfig {
    fn default() -> Self {
        Self {
            cutoff: 128,
            quadrature: 1024,
            hs_cutoffs: vec![128, 256, 512],
            hs_tol: 1e-3,
            fio: FioConfig { working_cutoff: Some(128), ..FioConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessReport {
    pub samples: usize,
    /// Elements whose pseudolocality verdict agrees with `phase = id`.
    pub kernel_agreements: usize,
    /// `max d(π̃(s(π̃(E))), π̃(E))` for the section `s(g) = T_g`.
    pub section_defect: f64,
    /// Largest entry of `R((E₁E₂)E₃) - R(E₁(E₂E₃))` over consecutive triples.
    pub associativity_defect: f64,
    /// Elements over `Diff₊` with a bounded `‖[ε, R(E)]‖_HS` sequence.
    pub bounded_hs: usize,
}

/// Computable shadow of the exact sequence `Cl^{0,*} → FCl^{0,*}_{Diff} → Diff₊`.
pub fn exactness_check(samples: &[FIOElement], cfg: &ExactnessConfig) -> Result<ExactnessReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    let rank = samples[0].rank();
    let grid = ModeGrid::new(cfg.cutoff, Sector::Periodic, rank);
    let mut kernel_agreements = 0;
    let mut section_defect: f64 = 0.0;
    let mut bounded_hs = 0;
    for e in samples {
        let m = e.realize(&grid, cfg.quadrature)?;
        let w = pseudolocality_witness(&m, PSEUDOLOCAL_BAND);
        if w.pseudolocal == phase_projection(e).is_identity(0.0) {
            kernel_agreements += 1;
        }
        let s = FIOElement::from_diffeo(phase_projection(e), rank);
        section_defect = section_defect.max(phase_projection(&s).distance(e.phase()));
        let mats: Vec<OpMatrix> = cfg
            .hs_cutoffs
            .iter()
            .map(|&n| e.realize(&ModeGrid::new(n, Sector::Periodic, rank), crate::quantize::min_quadrature(n)))
            .collect::<Result<_>>()?;
        let report = gl_res_witness(&mats, sign_plus_diagonal, cfg.hs_tol)?;
        if matches!(report.verdict, HsVerdict::BoundedHs { .. }) {
            bounded_hs += 1;
        }
    }
    let mut associativity_defect: f64 = 0.0;
    for t in samples.windows(3) {
        let left = fio_multiply_with(&fio_multiply_with(&t[0], &t[1], &cfg.fio, None)?, &t[2], &cfg.fio, None)?;
        let right = fio_multiply_with(&t[0], &fio_multiply_with(&t[1], &t[2], &cfg.fio, None)?, &cfg.fio, None)?;
        let d = left.realize(&grid, cfg.quadrature)?.sub(&right.realize(&grid, cfg.quadrature)?)?.max_abs();
        associativity_defect = associativity_defect.max(d);
    }
    Ok(ExactnessReport {
        samples: samples.len(),
        kernel_agreements,
        section_defect,
        associativity_defect,
        bounded_hs,
    })
}

/// The holonomy section on the anti-periodic sector: for a based `g`, the
/// flat parallel transport is trivial in the holonomy trivialization and
/// `H_g` is the composition operator `f ↦ f ∘ g` on modes `n + ½`.
pub fn holonomy_section(g: &Diffeo, cutoff: usize, rank: usize, quadrature: usize) -> Result<OpMatrix> {
    if !g.is_based() {
        return Err(Error::NotBased(g.eval(0.0)));
    }
    diffeo_matrix(g, &ModeGrid::new(cutoff, Sector::Twisted, rank), quadrature)
}

/// How far `g ↦ H_g` is from a morphism and from an anti-morphism, measured
/// as the largest entry on the inner half of the modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionDefect {
    /// `H_{g₁} H_{g₂}` against `H_{g₁∘g₂}`.
    pub morphism: f64,
    /// `H_{g₁} H_{g₂}` against `H_{g₂∘g₁}`.
    pub anti_morphism: f64,
}

pub fn section_defect(g1: &Diffeo, g2: &Diffeo, cutoff: usize, quadrature: usize) -> Result<SectionDefect> {
    let h1 = holonomy_section(g1, cutoff, 1, quadrature)?;
    let h2 = holonomy_section(g2, cutoff, 1, quadrature)?;
    let prod = h1.mul(&h2)?;
    let forward = holonomy_section(&g1.compose(g2)?, cutoff, 1, quadrature)?;
    let backward = holonomy_section(&g2.compose(g1)?, cutoff, 1, quadrature)?;
    let inner = |m: &OpMatrix| -> f64 {
        let half = (cutoff / 2) as i64;
        let mut worst: f64 = 0.0;
        for i in -half..=half {
            for j in -half..=half {
                worst = worst.max(m.block(i, j)[(0, 0)].norm());
            }
        }
        worst
    };
    Ok(SectionDefect {
        morphism: inner(&prod.sub(&forward)?),
        anti_morphism: inner(&prod.sub(&backward)?),
    })
}
