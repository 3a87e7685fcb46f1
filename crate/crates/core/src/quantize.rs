//! Truncated Fourier-mode matrices: the numeric oracle every symbolic
//! identity is checked against.
//!
//! Modes are `n + θ` for `n = -N..=N`, with `θ = 0` (periodic sections) or
//! `θ = ½` (the anti-periodic sector of the Möbius line bundle). A symbol
//! `σ(x, ξ) = Σ_k ĉ_k(ξ) e^{ikx}` realizes as the matrix with block
//! `ĉ_{m-n}(n+θ)` at `(m, n)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fiogroup::Diffeo;
use crate::symbol::FormalSymbol;
use crate::trigpoly::{block_max_abs, c64, Block, TrigPoly};

/// Mode offset `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    /// `θ = 0`.
    Periodic,
    /// `θ = ½`.
    Twisted,
}

impl Sector {
    pub fn theta(self) -> f64 {
        match self {
            Sector::Periodic => 0.0,
            Sector::Twisted => 0.5,
        }
    }

    pub fn xi(self, n: i64) -> f64 {
        n as f64 + self.theta()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeGrid {
    pub cutoff: usize,
    pub sector: Sector,
    pub rank: usize,
}

impl ModeGrid {
    pub fn new(cutoff: usize, sector: Sector, rank: usize) -> Self {
        assert!(rank > 0, "rank must be positive");
        Self { cutoff, sector, rank }
    }

    pub fn scalar(cutoff: usize, sector: Sector) -> Self {
        Self::new(cutoff, sector, 1)
    }

    pub fn dim(&self) -> usize {
        self.rank * (2 * self.cutoff + 1)
    }

    pub fn modes(&self) -> std::ops::RangeInclusive<i64> {
        let n = self.cutoff as i64;
        -n..=n
    }

    pub fn contains(&self, n: i64) -> bool {
        n.unsigned_abs() as usize <= self.cutoff
    }

    /// Position of the first component of mode `n`.
    pub fn offset_of(&self, n: i64) -> usize {
        debug_assert!(self.contains(n));
        (n + self.cutoff as i64) as usize * self.rank
    }

    pub fn xi(&self, n: i64) -> f64 {
        self.sector.xi(n)
    }
}

/// A dense operator on the span of the grid modes.
#[derive(Debug, Clone, PartialEq)]
pub struct OpMatrix {
    grid: ModeGrid,
    entries: DMatrix<Complex64>,
}

impl OpMatrix {
    pub fn zeros(grid: ModeGrid) -> Self {
        Self { grid, entries: DMatrix::zeros(grid.dim(), grid.dim()) }
    }

    pub fn identity(grid: ModeGrid) -> Self {
        Self { grid, entries: DMatrix::identity(grid.dim(), grid.dim()) }
    }

    pub fn from_entries(grid: ModeGrid, entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != grid.dim() || entries.ncols() != grid.dim() {
            return Err(Error::GridMismatch);
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self { grid, entries })
    }

    /// Diagonal operator with the given value on every component of mode `n`.
    pub fn diagonal<F: Fn(i64) -> Complex64>(grid: ModeGrid, f: F) -> Self {
        let mut out = Self::zeros(grid);
        for n in grid.modes() {
            let v = f(n);
            let o = grid.offset_of(n);
            for a in 0..grid.rank {
                out.entries[(o + a, o + a)] = v;
            }
        }
        out
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn block(&self, m: i64, n: i64) -> Block {
        let r = self.grid.rank;
        self.entries
            .view((self.grid.offset_of(m), self.grid.offset_of(n)), (r, r))
            .into_owned()
    }

    pub fn set_block(&mut self, m: i64, n: i64, value: &Block) {
        let r = self.grid.rank;
        let (om, on) = (self.grid.offset_of(m), self.grid.offset_of(n));
        self.entries.view_mut((om, on), (r, r)).copy_from(value);
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let dim = self.entries.nrows();
        let zero = Complex64::default();
        let nnz = other.entries.iter().filter(|z| **z != zero).count();
        if nnz * 8 >= dim * dim {
            return Ok(Self { grid: self.grid, entries: dense_product(&self.entries, &other.entries) });
        }
        // Column-wise axpy over the nonzeros of the right factor.
        let mut out = DMatrix::<Complex64>::zeros(dim, dim);
        for j in 0..dim {
            for k in 0..dim {
                let b = other.entries[(k, j)];
                if b == zero {
                    continue;
                }
                let src = self.entries.column(k);
                let mut dst = out.column_mut(j);
                for (d, a) in dst.iter_mut().zip(src.iter()) {
                    *d += a * b;
                }
            }
        }
        Ok(Self { grid: self.grid, entries: out })
    }

    /// Entries on the modes shared with `grid`, dropping everything else.
    pub fn restrict(&self, grid: &ModeGrid) -> Result<Self> {
        if grid.sector != self.grid.sector || grid.rank != self.grid.rank {
            return Err(Error::GridMismatch);
        }
        let mut out = Self::zeros(*grid);
        for m in grid.modes().filter(|m| self.grid.contains(*m)) {
            for n in grid.modes().filter(|n| self.grid.contains(*n)) {
                out.set_block(m, n, &self.block(m, n));
            }
        }
        Ok(out)
    }

    /// The same finite-rank operator on another grid of the same sector and rank.
    /// Fails if a nonzero block would fall outside the target grid.
    pub fn regrid(&self, grid: &ModeGrid) -> Result<Self> {
        if grid.sector != self.grid.sector || grid.rank != self.grid.rank {
            return Err(Error::GridMismatch);
        }
        let mut out = Self::zeros(*grid);
        for m in self.grid.modes() {
            for n in self.grid.modes() {
                let b = self.block(m, n);
                if block_max_abs(&b) == 0.0 {
                    continue;
                }
                if !(grid.contains(m) && grid.contains(n)) {
                    return Err(Error::GridMismatch);
                }
                out.set_block(m, n, &b);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { grid: self.grid, entries: &self.entries + &other.entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { grid: self.grid, entries: &self.entries - &other.entries })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self { grid: self.grid, entries: &self.entries * factor }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn hs_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    /// Largest singular value of the columns belonging to `modes`.
    pub fn op_norm_on_columns<I: IntoIterator<Item = i64>>(&self, modes: I) -> f64 {
        let r = self.grid.rank;
        let cols: Vec<usize> = modes
            .into_iter()
            .filter(|n| self.grid.contains(*n))
            .flat_map(|n| {
                let o = self.grid.offset_of(n);
                (0..r).map(move |a| o + a)
            })
            .collect();
        if cols.is_empty() {
            return 0.0;
        }
        spectral_norm(&self.entries.select_columns(cols.iter()))
    }

    /// `[E, self]` for a diagonal `E = diag(e_n)`, computed entrywise.
    pub fn diagonal_commutator(&self, e: &[Complex64]) -> Result<Self> {
        if e.len() != 2 * self.grid.cutoff + 1 {
            return Err(Error::GridMismatch);
        }
        let mut out = self.clone();
        let r = self.grid.rank;
        for (i, em) in e.iter().enumerate() {
            for (j, en) in e.iter().enumerate() {
                let d = em - en;
                for a in 0..r {
                    for b in 0..r {
                        out.entries[(i * r + a, j * r + b)] *= d;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Plain-text export: a header line `grid N theta r` followed by
    /// `row col re im` lines for every nonzero entry. Floats use the shortest
    /// representation that round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "grid {} {:?} {}", self.grid.cutoff, self.grid.sector.theta(), self.grid.rank);
        for j in 0..self.entries.ncols() {
            for i in 0..self.entries.nrows() {
                let z = self.entries[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    let _ = writeln!(s, "{i} {j} {:?} {:?}", z.re, z.im);
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::InvalidArgument(format!("matrix text: {what}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("missing header"))?.split_whitespace().collect();
        if header.len() != 4 || header[0] != "grid" {
            return Err(bad("malformed header"));
        }
        let cutoff: usize = header[1].parse().map_err(|_| bad("cutoff"))?;
        let sector = match header[2] {
            "0.0" | "0" => Sector::Periodic,
            "0.5" => Sector::Twisted,
            _ => return Err(bad("offset must be 0 or 0.5")),
        };
        let rank: usize = header[3].parse().map_err(|_| bad("rank"))?;
        if rank == 0 {
            return Err(bad("rank"));
        }
        let grid = ModeGrid::new(cutoff, sector, rank);
        let mut out = Self::zeros(grid);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("entry line"));
            }
            let i: usize = f[0].parse().map_err(|_| bad("row"))?;
            let j: usize = f[1].parse().map_err(|_| bad("column"))?;
            let re: f64 = f[2].parse().map_err(|_| bad("real part"))?;
            let im: f64 = f[3].parse().map_err(|_| bad("imaginary part"))?;
            if i >= grid.dim() || j >= grid.dim() || !re.is_finite() || !im.is_finite() {
                return Err(bad("entry out of range"));
            }
            out.entries[(i, j)] = c64(re, im);
        }
        Ok(out)
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    // The Gram matrix is smaller when the matrix is tall.
    let gram = if m.nrows() >= m.ncols() { m.adjoint() * m } else { m * m.adjoint() };
    let eig = nalgebra::SymmetricEigen::new(gram);
    eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b)).max(0.0).sqrt()
}

/// A symbol prepared for evaluation at integer-spaced modes.
#[derive(Debug, Clone)]
pub(crate) struct PreparedSymbol {
    rank: usize,
    parts: Vec<PreparedComponent>,
}

#[derive(Debug, Clone)]
struct PreparedComponent {
    degree: i64,
    logpow: u32,
    plus: Vec<(i64, Block)>,
    minus: Vec<(i64, Block)>,
    polynomial: bool,
}

impl PreparedSymbol {
    pub(crate) fn new(a: &FormalSymbol) -> Self {
        let parts = a
            .components()
            .map(|c| PreparedComponent {
                degree: c.degree,
                logpow: c.logpow,
                plus: c.plus.iter().map(|(k, b)| (k, b.clone())).collect(),
                minus: c.minus.iter().map(|(k, b)| (k, b.clone())).collect(),
                polynomial: c.is_polynomial(),
            })
            .collect();
        Self { rank: a.rank(), parts }
    }

    /// Branch and radial factor of one component at `ξ` under the
    /// realization policy.
    fn weight<'a>(&self, c: &'a PreparedComponent, xi: f64) -> (&'a [(i64, Block)], f64) {
        if c.polynomial {
            return (&c.plus, xi.powi(c.degree as i32));
        }
        let radial = |r: f64| {
            let mut v = r.powi(c.degree as i32);
            if c.logpow > 0 {
                v *= r.ln().powi(c.logpow as i32);
            }
            v
        };
        if xi == 0.0 {
            (&c.plus, radial(1.0))
        } else {
            let branch = if xi > 0.0 { &c.plus } else { &c.minus };
            (branch, radial(xi.abs().max(1.0)))
        }
    }

    /// Fourier coefficients in `x` of `σ(x, ξ)`.
    pub(crate) fn at(&self, xi: f64) -> BTreeMap<i64, Block> {
        let mut out: BTreeMap<i64, Block> = BTreeMap::new();
        for c in &self.parts {
            let (branch, f) = self.weight(c, xi);
            if f == 0.0 {
                continue;
            }
            for (k, b) in branch {
                let v = b * c64(f, 0.0);
                out.entry(*k).and_modify(|e| *e += &v).or_insert(v);
            }
        }
        out
    }

    /// The mean coefficient `ĉ_0(ξ)`.
    pub(crate) fn mean_at(&self, xi: f64) -> Block {
        let mut out = Block::zeros(self.rank, self.rank);
        for c in &self.parts {
            let (branch, f) = self.weight(c, xi);
            if f == 0.0 {
                continue;
            }
            if let Some((_, b)) = branch.iter().find(|(k, _)| *k == 0) {
                out += b * c64(f, 0.0);
            }
        }
        out
    }
}

/// Complex product through four real products, which use the blocked kernel.
fn dense_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, Complex64::new)
}

/// Realize a symbol on the grid. Polynomial components `a(x)ξ^d` are
/// evaluated exactly; the others at `sign(ξ)·max(|ξ|, 1)`, and at `ξ = 0` on
/// the `ξ > 0` branch at `ξ = 1`.
pub fn realize(a: &FormalSymbol, grid: &ModeGrid) -> Result<OpMatrix> {
    if a.rank() != grid.rank {
        return Err(Error::RankMismatch { left: grid.rank, right: a.rank() });
    }
    let prepared = PreparedSymbol::new(a);
    let mut out = OpMatrix::zeros(*grid);
    for n in grid.modes() {
        for (k, b) in prepared.at(grid.xi(n)) {
            let m = n + k;
            if grid.contains(m) {
                out.set_block(m, n, &b);
            }
        }
    }
    Ok(out)
}

/// A finite-rank smoothing operator given by finitely many mode blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteRankKernel {
    sector: Sector,
    rank: usize,
    blocks: BTreeMap<(i64, i64), Block>,
}

impl FiniteRankKernel {
    pub fn new(sector: Sector, rank: usize) -> Self {
        assert!(rank > 0, "rank must be positive");
        Self { sector, rank, blocks: BTreeMap::new() }
    }

    /// Projection onto mode `n` (identity block).
    pub fn mode_projection(sector: Sector, rank: usize, n: i64) -> Self {
        let mut k = Self::new(sector, rank);
        k.insert(n, n, Block::identity(rank, rank));
        k
    }

    pub fn insert(&mut self, m: i64, n: i64, value: Block) {
        assert_eq!(value.nrows(), self.rank);
        self.blocks.insert((m, n), value);
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&(i64, i64), &Block)> {
        self.blocks.iter()
    }

    pub fn block(&self, m: i64, n: i64) -> Option<&Block> {
        self.blocks.get(&(m, n))
    }

    /// Largest `|m|`, `|n|` among stored blocks.
    pub fn support(&self) -> usize {
        self.blocks
            .keys()
            .map(|(m, n)| m.unsigned_abs().max(n.unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn trace(&self) -> Complex64 {
        self.blocks.iter().filter(|((m, n), _)| m == n).map(|(_, b)| b.trace()).sum()
    }

    pub fn realize(&self, grid: &ModeGrid) -> Result<OpMatrix> {
        if grid.sector != self.sector || grid.rank != self.rank {
            return Err(Error::GridMismatch);
        }
        let mut out = OpMatrix::zeros(*grid);
        for ((m, n), b) in &self.blocks {
            if grid.contains(*m) && grid.contains(*n) {
                out.set_block(*m, *n, b);
            }
        }
        Ok(out)
    }

    /// Read every nonzero block of a matrix.
    pub fn from_matrix(m: &OpMatrix) -> Self {
        let g = m.grid();
        let mut k = Self::new(g.sector, g.rank);
        for i in g.modes() {
            for j in g.modes() {
                let b = m.block(i, j);
                if block_max_abs(&b) > 0.0 {
                    k.insert(i, j, b);
                }
            }
        }
        k
    }
}

/// Smallest quadrature accepted by [`diffeo_matrix`] for a given cutoff.
pub fn min_quadrature(cutoff: usize) -> usize {
    (8 * cutoff).max(16)
}

/// Realize `T_g f = f ∘ g`:
/// block `(m, n)` is `(1/2π) ∫ e^{i((n+θ) g(x) - (m+θ) x)} dx · Id`, by the
/// trapezoidal rule on `quadrature` nodes (one FFT per column).
pub fn diffeo_matrix(g: &Diffeo, grid: &ModeGrid, quadrature: usize) -> Result<OpMatrix> {
    let required = min_quadrature(grid.cutoff);
    if quadrature < required {
        return Err(Error::QuadratureTooSmall { given: quadrature, required });
    }
    g.check_orientation()?;
    if grid.sector == Sector::Twisted && !g.is_based() {
        return Err(Error::NotBased(g.eval(0.0)));
    }
    let q = quadrature;
    let u: Vec<f64> = (0..q)
        .map(|j| g.displacement().eval_scalar(2.0 * PI * j as f64 / q as f64).re)
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(q);
    let mut out = OpMatrix::zeros(*grid);
    let r = grid.rank;
    let mut buf = vec![Complex64::default(); q];
    for n in grid.modes() {
        let xi = grid.xi(n);
        for (b, uj) in buf.iter_mut().zip(&u) {
            *b = Complex64::from_polar(1.0, xi * uj);
        }
        fft.process(&mut buf);
        let on = grid.offset_of(n);
        for m in grid.modes() {
            let k = m - n;
            let idx = k.rem_euclid(q as i64) as usize;
            let v = buf[idx] / q as f64;
            let om = grid.offset_of(m);
            for a in 0..r {
                out.entries[(om + a, on + a)] = v;
            }
        }
    }
    Ok(out)
}

/// `f(x) ↦ f(-x)` on the periodic sector: `E_{-n,n}`.
pub fn reflection_matrix(grid: &ModeGrid) -> Result<OpMatrix> {
    if grid.sector != Sector::Periodic {
        return Err(Error::InvalidArgument("reflection needs a mode-symmetric grid".into()));
    }
    let mut out = OpMatrix::zeros(*grid);
    let id = Block::identity(grid.rank, grid.rank);
    for n in grid.modes() {
        out.set_block(-n, n, &id);
    }
    Ok(out)
}

/// Decay summary of a (putatively smoothing) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub max_abs: f64,
    /// Largest `|m - n|` over nonzero blocks.
    pub band: usize,
    /// Largest `max(|m+θ|, |n+θ|)` over nonzero blocks.
    pub support_radius: f64,
    /// Nonzero blocks stay away from the edge of the grid.
    pub finite_support: bool,
    /// Fitted `p` in `max_{max(|m|,|n|)=ρ} |K| ~ C ρ^{-p}`; infinite for finite support.
    pub exponent: f64,
    pub fit_residual: f64,
}

/// Measure the decay of a matrix away from the low modes.
pub fn smoothing_decay_profile(k: &OpMatrix) -> DecayReport {
    let g = *k.grid();
    let max_abs = k.max_abs();
    let tol = 1e-14 * max_abs;
    let big_n = g.cutoff;
    let mut envelope = vec![0.0_f64; big_n + 1];
    let mut band = 0usize;
    let mut support_radius: f64 = 0.0;
    if max_abs > 0.0 {
        for m in g.modes() {
            for n in g.modes() {
                let v = block_max_abs(&k.block(m, n));
                if v <= tol {
                    continue;
                }
                let rho = m.unsigned_abs().max(n.unsigned_abs()) as usize;
                envelope[rho] = envelope[rho].max(v);
                band = band.max((m - n).unsigned_abs() as usize);
                support_radius = support_radius.max(g.xi(m).abs().max(g.xi(n).abs()));
            }
        }
    }
    let edge = big_n.saturating_sub((big_n / 8).max(1));
    let finite_support = envelope[edge..].iter().all(|&v| v == 0.0);
    let (exponent, fit_residual) = if finite_support {
        (f64::INFINITY, 0.0)
    } else {
        let lo = (big_n / 8).max(2);
        let pts: Vec<(f64, f64)> = (lo..=edge.max(lo))
            .filter(|&r| envelope[r] > 0.0)
            .map(|r| ((r as f64).ln(), envelope[r].ln()))
            .collect();
        match linear_fit(&pts) {
            Some((slope, _, res)) => (-slope, res),
            None => (0.0, f64::INFINITY),
        }
    };
    DecayReport { max_abs, band, support_radius, finite_support, exponent, fit_residual }
}

/// Least-squares line `y = slope x + intercept`; returns the RMS residual too.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res = (pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Some((slope, intercept, res))
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    linear_fit(&pts).map(|f| f.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HsVerdict {
    BoundedHs { limit: f64 },
    GrowingHs { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlResReport {
    pub cutoffs: Vec<usize>,
    pub hs_norms: Vec<f64>,
    pub verdict: HsVerdict,
}

/// `‖[ε, U_N]‖_HS` along a sequence of grids. The sequence is bounded when
/// successive norms differ by at most `tol`; otherwise a growth exponent is fitted.
pub fn gl_res_witness<E>(us: &[OpMatrix], eps: E, tol: f64) -> Result<GlResReport>
where
    E: Fn(&ModeGrid) -> Vec<Complex64>,
{
    if us.len() < 3 {
        return Err(Error::InvalidArgument("need at least three cutoffs".into()));
    }
    for w in us.windows(2) {
        let (a, b) = (w[0].grid(), w[1].grid());
        if a.sector != b.sector || a.rank != b.rank || a.cutoff >= b.cutoff {
            return Err(Error::GridMismatch);
        }
    }
    let mut hs_norms = Vec::with_capacity(us.len());
    for u in us {
        let e = eps(u.grid());
        hs_norms.push(u.diagonal_commutator(&e)?.hs_norm());
    }
    let cutoffs: Vec<usize> = us.iter().map(|u| u.grid().cutoff).collect();
    let cauchy = hs_norms.windows(2).skip(hs_norms.len() - 3).all(|w| (w[1] - w[0]).abs() <= tol);
    let verdict = if cauchy {
        HsVerdict::BoundedHs { limit: *hs_norms.last().expect("nonempty") }
    } else {
        let xs: Vec<f64> = cutoffs.iter().map(|&n| n as f64).collect();
        HsVerdict::GrowingHs { exponent: loglog_slope(&xs, &hs_norms).unwrap_or(f64::NAN) }
    };
    Ok(GlResReport { cutoffs, hs_norms, verdict })
}

/// `sign(n+θ)` with `sign(0) = +1`.
pub fn sign_plus_diagonal(grid: &ModeGrid) -> Vec<Complex64> {
    grid.modes()
        .map(|n| c64(if grid.xi(n) >= 0.0 { 1.0 } else { -1.0 }, 0.0))
        .collect()
}

/// A symbol realized and multiplied by a trigonometric polynomial on the left.
pub fn multiplication_matrix(f: &TrigPoly, grid: &ModeGrid) -> Result<OpMatrix> {
    realize(&FormalSymbol::multiplication(f.clone()), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{builtin, Builtin};

    #[test]
    fn d_is_diagonal_in_both_sectors() {
        for sector in [Sector::Periodic, Sector::Twisted] {
            let g = ModeGrid::scalar(6, sector);
            let m = realize(&builtin(&Builtin::D, 1).unwrap(), &g).unwrap();
            let expected = OpMatrix::diagonal(g, |n| c64(g.xi(n), 0.0));
            assert_eq!(m, expected);
        }
    }

    #[test]
    fn multiplication_is_a_shift() {
        let g = ModeGrid::scalar(5, Sector::Periodic);
        let m = multiplication_matrix(&TrigPoly::exponential(1, 1), &g).unwrap();
        for i in g.modes() {
            for j in g.modes() {
                let expected = if i == j + 1 { 1.0 } else { 0.0 };
                assert_eq!(m.block(i, j)[(0, 0)], c64(expected, 0.0));
            }
        }
    }

    #[test]
    fn sign_policy_at_zero() {
        let g = ModeGrid::scalar(3, Sector::Periodic);
        let e = realize(&builtin(&Builtin::Sign, 1).unwrap(), &g).unwrap();
        assert_eq!(e.block(0, 0)[(0, 0)], c64(1.0, 0.0));
        assert_eq!(e.block(-1, -1)[(0, 0)], c64(-1.0, 0.0));
        let abs = realize(&builtin(&Builtin::AbsD, 1).unwrap(), &g).unwrap();
        assert_eq!(abs.block(0, 0)[(0, 0)], c64(1.0, 0.0));
    }

    #[test]
    fn twisted_sign_nabla_squares_to_minus_one() {
        let g = ModeGrid::scalar(16, Sector::Twisted);
        let e = realize(&builtin(&Builtin::SignNabla, 1).unwrap(), &g).unwrap();
        let sq = e.mul(&e).unwrap();
        assert_eq!(sq, OpMatrix::identity(g).scale(c64(-1.0, 0.0)));
    }

    #[test]
    fn rotation_matrix_is_diagonal_phase() {
        let g = ModeGrid::scalar(12, Sector::Periodic);
        let alpha = 0.7;
        let u = diffeo_matrix(&Diffeo::rotation(alpha), &g, min_quadrature(12)).unwrap();
        let expected = OpMatrix::diagonal(g, |n| Complex64::from_polar(1.0, n as f64 * alpha));
        assert!(u.sub(&expected).unwrap().max_abs() < 1e-13);
        let id = diffeo_matrix(&Diffeo::identity(), &g, 96).unwrap();
        assert!(id.sub(&OpMatrix::identity(g)).unwrap().max_abs() < 1e-14);
        assert!(matches!(diffeo_matrix(&Diffeo::identity(), &g, 10), Err(Error::QuadratureTooSmall { .. })));
    }

    #[test]
    fn twisted_sector_needs_based_diffeos() {
        let g = ModeGrid::scalar(4, Sector::Twisted);
        assert!(matches!(diffeo_matrix(&Diffeo::rotation(0.3), &g, 64), Err(Error::NotBased(_))));
        assert!(diffeo_matrix(&Diffeo::sine(0.2, 1).unwrap(), &g, 64).is_ok());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let g = ModeGrid::new(3, Sector::Twisted, 2);
        let mut m = OpMatrix::zeros(g);
        m.set_block(1, -2, &Block::from_fn(2, 2, |i, j| c64(0.1 * i as f64 + 1.0 / 3.0, -(j as f64) / 7.0)));
        let back = OpMatrix::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn reflection_commutator_norm() {
        for n in [8usize, 32] {
            let g = ModeGrid::scalar(n, Sector::Periodic);
            let u = reflection_matrix(&g).unwrap();
            let hs = u.diagonal_commutator(&sign_plus_diagonal(&g)).unwrap().hs_norm();
            assert!((hs * hs - 8.0 * n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let g = ModeGrid::scalar(4, Sector::Periodic);
        let d = OpMatrix::diagonal(g, |n| c64(n as f64, 1.0));
        assert!((d.op_norm() - 17f64.sqrt()).abs() < 1e-12);
        assert!((d.op_norm_on_columns([1, 2]) - 5f64.sqrt()).abs() < 1e-12);
    }
}
