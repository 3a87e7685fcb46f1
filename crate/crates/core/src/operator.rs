//! Infinite banded operators on the mode lattice, evaluated lazily.
//!
//! An [`Operator`] is an expression tree over realized symbols and
//! finite-rank kernels. Columns are exact (no truncation at any cutoff), so
//! diagonals of products and commutators are the diagonals of the true
//! operators, not of products of truncated matrices.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantize::{FiniteRankKernel, ModeGrid, OpMatrix, PreparedSymbol, Sector};
use crate::symbol::{compose, linear_combine, FormalSymbol};
use crate::trigpoly::{c64, Block, TrigPoly};

#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    /// Realized with the low-mode policy of [`crate::quantize::realize`].
    Symbol(FormalSymbol),
    Smoothing(FiniteRankKernel),
    Sum(Vec<(Complex64, Operator)>),
    /// Left to right: `Product([A, B])` is `A ∘ B`.
    Product(Vec<Operator>),
}

impl From<FormalSymbol> for Operator {
    fn from(s: FormalSymbol) -> Self {
        Operator::Symbol(s)
    }
}

impl From<FiniteRankKernel> for Operator {
    fn from(k: FiniteRankKernel) -> Self {
        Operator::Smoothing(k)
    }
}

pub type Column = BTreeMap<i64, Block>;

impl Operator {
    pub fn multiplication(f: TrigPoly) -> Self {
        Operator::Symbol(FormalSymbol::multiplication(f))
    }

    pub fn product(a: Operator, b: Operator) -> Self {
        Operator::Product(vec![a, b])
    }

    pub fn sum(a: Operator, b: Operator) -> Self {
        Operator::Sum(vec![(c64(1.0, 0.0), a), (c64(1.0, 0.0), b)])
    }

    /// `AB - BA`.
    pub fn commutator(a: &Operator, b: &Operator) -> Self {
        Operator::Sum(vec![
            (c64(1.0, 0.0), Operator::product(a.clone(), b.clone())),
            (c64(-1.0, 0.0), Operator::product(b.clone(), a.clone())),
        ])
    }

    /// `C^{-1} A C` for multiplication operators `C = M_c`, `C^{-1} = M_{c_inv}`.
    pub fn conjugate(&self, c: &TrigPoly, c_inv: &TrigPoly) -> Self {
        Operator::Product(vec![
            Operator::multiplication(c_inv.clone()),
            self.clone(),
            Operator::multiplication(c.clone()),
        ])
    }

    pub fn power(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("power must be at least 1".into()));
        }
        Ok(if k == 1 { self.clone() } else { Operator::Product(vec![self.clone(); k]) })
    }

    pub fn rank(&self) -> usize {
        match self {
            Operator::Symbol(s) => s.rank(),
            Operator::Smoothing(k) => k.rank(),
            Operator::Sum(terms) => terms.first().map_or(1, |t| t.1.rank()),
            Operator::Product(fs) => fs.first().map_or(1, Operator::rank),
        }
    }

    fn check(&self, sector: Sector) -> Result<usize> {
        match self {
            Operator::Symbol(s) => Ok(s.rank()),
            Operator::Smoothing(k) => {
                if k.sector() != sector {
                    return Err(Error::GridMismatch);
                }
                Ok(k.rank())
            }
            _ if self.children().is_empty() => Err(Error::InvalidArgument("empty operator expression".into())),
            _ => {
                let ranks: Vec<usize> = self.children().iter().map(|c| c.check(sector)).collect::<Result<_>>()?;
                let r = ranks[0];
                if let Some(&bad) = ranks.iter().find(|&&x| x != r) {
                    return Err(Error::RankMismatch { left: r, right: bad });
                }
                Ok(r)
            }
        }
    }

    fn children(&self) -> Vec<&Operator> {
        match self {
            Operator::Sum(terms) => terms.iter().map(|t| &t.1).collect(),
            Operator::Product(fs) => fs.iter().collect(),
            _ => Vec::new(),
        }
    }

    /// Formal symbol to `depth` degrees; `None` for a smoothing operator.
    pub fn symbol(&self, depth: usize) -> Result<Option<FormalSymbol>> {
        match self {
            Operator::Symbol(s) => Ok(Some(s.clone())),
            Operator::Smoothing(_) => Ok(None),
            Operator::Sum(terms) => {
                let mut parts = Vec::new();
                for (lambda, t) in terms {
                    if let Some(s) = t.symbol(depth)? {
                        parts.push((*lambda, s));
                    }
                }
                if parts.is_empty() {
                    return Ok(None);
                }
                let refs: Vec<(Complex64, &FormalSymbol)> = parts.iter().map(|(l, s)| (*l, s)).collect();
                linear_combine(&refs).map(Some)
            }
            Operator::Product(fs) => {
                let mut acc: Option<FormalSymbol> = None;
                for f in fs {
                    let Some(s) = f.symbol(depth)? else { return Ok(None) };
                    acc = Some(match acc {
                        None => s,
                        Some(a) => compose(&a, &s, depth)?,
                    });
                }
                Ok(acc)
            }
        }
    }

    /// True when the exact diagonal may differ from the diagonal of the
    /// formal symbol at modes with `|ξ| ≥ 1`.
    pub(crate) fn has_remainder(&self) -> bool {
        match self {
            Operator::Symbol(_) => false,
            Operator::Smoothing(_) => true,
            Operator::Sum(terms) => terms.iter().any(|t| t.1.has_remainder()),
            Operator::Product(fs) => fs.len() > 1 || fs.iter().any(Operator::has_remainder),
        }
    }

    /// Largest mode touched by a smoothing kernel anywhere in the tree.
    pub(crate) fn smoothing_support(&self) -> usize {
        match self {
            Operator::Symbol(_) => 0,
            Operator::Smoothing(k) => k.support(),
            _ => self.children().iter().map(|c| c.smoothing_support()).max().unwrap_or(0),
        }
    }

    pub(crate) fn evaluator(&self, sector: Sector) -> Result<Evaluator> {
        self.check(sector)?;
        Ok(Evaluator::build(self, sector))
    }

    /// Exact compression to the grid: the block `(m, n)` of the infinite operator.
    pub fn realize(&self, grid: &ModeGrid) -> Result<OpMatrix> {
        let ev = self.evaluator(grid.sector)?;
        if ev.rank != grid.rank {
            return Err(Error::RankMismatch { left: grid.rank, right: ev.rank });
        }
        let mut out = OpMatrix::zeros(*grid);
        for n in grid.modes() {
            for (m, b) in ev.column(n) {
                if grid.contains(m) {
                    out.set_block(m, n, &b);
                }
            }
        }
        Ok(out)
    }
}

/// A prepared operator tree.
pub(crate) struct Evaluator {
    rank: usize,
    sector: Sector,
    node: Node,
}

enum Node {
    Symbol(PreparedSymbol),
    Smoothing(BTreeMap<i64, Column>),
    Sum(Vec<(Complex64, Node)>),
    Product(Vec<Node>),
}

impl Evaluator {
    fn build(op: &Operator, sector: Sector) -> Self {
        fn node(op: &Operator) -> Node {
            match op {
                Operator::Symbol(s) => Node::Symbol(PreparedSymbol::new(s)),
                Operator::Smoothing(k) => {
                    let mut cols: BTreeMap<i64, Column> = BTreeMap::new();
                    for ((m, n), b) in k.blocks() {
                        cols.entry(*n).or_default().insert(*m, b.clone());
                    }
                    Node::Smoothing(cols)
                }
                Operator::Sum(terms) => Node::Sum(terms.iter().map(|(l, t)| (*l, node(t))).collect()),
                Operator::Product(fs) => Node::Product(fs.iter().map(node).collect()),
            }
        }
        Self { rank: op.rank(), sector, node: node(op) }
    }

    /// Column `n` of the infinite matrix, as sparse blocks keyed by row mode.
    pub(crate) fn column(&self, n: i64) -> Column {
        let mut unit = Column::new();
        unit.insert(n, Block::identity(self.rank, self.rank));
        self.apply(&self.node, &unit)
    }

    pub(crate) fn diagonal(&self, n: i64) -> Block {
        self.column(n)
            .remove(&n)
            .unwrap_or_else(|| Block::zeros(self.rank, self.rank))
    }

    fn node_column(&self, node: &Node, n: i64) -> Column {
        match node {
            Node::Symbol(p) => p
                .at(self.sector.xi(n))
                .into_iter()
                .map(|(k, b)| (n + k, b))
                .collect(),
            Node::Smoothing(cols) => cols.get(&n).cloned().unwrap_or_default(),
            _ => {
                let mut unit = Column::new();
                unit.insert(n, Block::identity(self.rank, self.rank));
                self.apply(node, &unit)
            }
        }
    }

    fn apply(&self, node: &Node, v: &Column) -> Column {
        match node {
            Node::Product(fs) => {
                let mut cur = v.clone();
                for f in fs.iter().rev() {
                    cur = self.apply(f, &cur);
                }
                cur
            }
            Node::Sum(terms) => {
                let mut out = Column::new();
                for (lambda, t) in terms {
                    for (m, b) in self.apply(t, v) {
                        let b = b * *lambda;
                        accumulate(&mut out, m, b);
                    }
                }
                out.retain(|_, b| b.iter().any(|z| z.re != 0.0 || z.im != 0.0));
                out
            }
            _ => {
                let mut out = Column::new();
                for (k, vk) in v {
                    for (m, b) in self.node_column(node, *k) {
                        accumulate(&mut out, m, &b * vk);
                    }
                }
                out
            }
        }
    }
}

fn accumulate(col: &mut Column, m: i64, b: Block) {
    match col.get_mut(&m) {
        Some(e) => *e += b,
        None => {
            col.insert(m, b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::realize;
    use crate::symbol::{builtin, Builtin};

    #[test]
    fn product_columns_are_exact() {
        // D M_{e^{ix}} has column n equal to (n+1) e_{n+1}.
        let d = Operator::Symbol(builtin(&Builtin::D, 1).unwrap());
        let m = Operator::multiplication(TrigPoly::exponential(1, 1));
        let ev = Operator::product(d, m).evaluator(Sector::Periodic).unwrap();
        for n in [-5, 0, 3] {
            let col = ev.column(n);
            assert_eq!(col.len(), 1);
            assert_eq!(col[&(n + 1)][(0, 0)], c64((n + 1) as f64, 0.0));
        }
    }

    #[test]
    fn realize_matches_symbol_realization() {
        let f = TrigPoly::from_modes([(1, c64(0.5, 0.1)), (-2, c64(0.2, 0.0))]);
        let mut s = FormalSymbol::zero(1, 1);
        s.add_component(1, 0, f.clone(), f.scale(c64(-1.0, 0.0))).unwrap();
        s.add_component(-1, 0, f.clone(), f.clone()).unwrap();
        let g = ModeGrid::scalar(10, Sector::Twisted);
        let direct = realize(&s, &g).unwrap();
        let lazy = Operator::Symbol(s).realize(&g).unwrap();
        assert_eq!(direct, lazy);
    }

    #[test]
    fn smoothing_times_symbol_is_smoothing() {
        let p0 = Operator::Smoothing(FiniteRankKernel::mode_projection(Sector::Periodic, 1, 0));
        let d = Operator::Symbol(builtin(&Builtin::AbsD, 1).unwrap());
        let prod = Operator::product(d, p0);
        assert!(prod.symbol(4).unwrap().is_none());
        let ev = prod.evaluator(Sector::Periodic).unwrap();
        assert_eq!(ev.diagonal(0)[(0, 0)], c64(1.0, 0.0));
        assert_eq!(ev.diagonal(1)[(0, 0)], c64(0.0, 0.0));
    }

    #[test]
    fn rank_mismatch_in_tree() {
        let a = Operator::Symbol(FormalSymbol::identity(1));
        let b = Operator::Symbol(FormalSymbol::identity(2));
        assert!(matches!(Operator::sum(a, b).evaluator(Sector::Periodic), Err(Error::RankMismatch { .. })));
    }
}
