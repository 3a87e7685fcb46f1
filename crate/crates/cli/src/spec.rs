//! Line-oriented spec files: `[symbols]`, `[diffeos]`, `[weights]`,
//! `[elements]` and `[jobs]` sections. See the README for the grammar.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use circle_opcalc::cocycle::EpsilonConvention;
use circle_opcalc::quantize::{OpMatrix, Sector};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

/// One coefficient line of an explicit symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffLine {
    pub degree: i64,
    pub logpow: u32,
    /// `+`, `-`, or both branches.
    pub plus: bool,
    pub minus: bool,
    pub mode: i64,
    pub re: f64,
    pub im: f64,
    /// Matrix entry; `None` means a multiple of the identity.
    pub entry: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolDef {
    Explicit { rank: usize, coeffs: Vec<CoeffLine> },
    Builtin { kind: String, rank: usize, terms: usize },
    Random { rank: usize, order: i64, depth: usize, bandwidth: usize, odd: bool },
}

impl SymbolDef {
    pub fn rank(&self) -> usize {
        match self {
            SymbolDef::Explicit { rank, .. } | SymbolDef::Builtin { rank, .. } | SymbolDef::Random { rank, .. } => *rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiffeoDef {
    /// Displacement modes `k ≥ 0`; negative modes are the conjugates.
    Modes(Vec<(i64, f64, f64)>),
    Rotation(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightDef {
    /// `laplace` or `abs`.
    pub kind: String,
    pub order: u32,
    pub sector: Sector,
    pub mass_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementDef {
    pub phase: String,
    pub symbol: String,
    pub smoothing: Option<OpMatrix>,
}

/// A definition with its line number and canonical text (used for hashing).
#[derive(Debug, Clone, PartialEq)]
pub struct Def<T> {
    pub line: usize,
    pub text: String,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Symbol,
    Diffeo,
    Weight,
    Element,
}

impl ArgKind {
    fn name(self) -> &'static str {
        match self {
            ArgKind::Symbol => "symbol",
            ArgKind::Diffeo => "diffeo",
            ArgKind::Weight => "weight",
            ArgKind::Element => "element",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operation {
    Res,
    Zeta,
    TrQ,
    Heat,
    Kv,
    Bracket,
    Cocycle,
    CocycleIdentity,
    Multiply,
    Assoc,
    Pseudolocal,
    GlRes,
}

impl Operation {
    pub const ALL: [Operation; 12] = [
        Operation::Res,
        Operation::Zeta,
        Operation::TrQ,
        Operation::Heat,
        Operation::Kv,
        Operation::Bracket,
        Operation::Cocycle,
        Operation::CocycleIdentity,
        Operation::Multiply,
        Operation::Assoc,
        Operation::Pseudolocal,
        Operation::GlRes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operation::Res => "res",
            Operation::Zeta => "zeta",
            Operation::TrQ => "trq",
            Operation::Heat => "heat",
            Operation::Kv => "kv",
            Operation::Bracket => "bracket",
            Operation::Cocycle => "cocycle",
            Operation::CocycleIdentity => "cocycle_identity",
            Operation::Multiply => "multiply",
            Operation::Assoc => "assoc",
            Operation::Pseudolocal => "pseudolocal",
            Operation::GlRes => "glres",
        }
    }

    pub fn args(self) -> &'static [ArgKind] {
        use ArgKind::*;
        match self {
            Operation::Res | Operation::Kv => &[Symbol],
            Operation::Zeta | Operation::TrQ | Operation::Heat => &[Symbol, Weight],
            Operation::Bracket => &[Symbol, Symbol, Weight],
            Operation::Cocycle => &[Symbol, Symbol],
            Operation::CocycleIdentity => &[Symbol, Symbol, Symbol],
            Operation::Multiply => &[Element, Element],
            Operation::Assoc => &[Element, Element, Element],
            Operation::Pseudolocal => &[Element],
            Operation::GlRes => &[Diffeo],
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == s)
    }
}

/// Per-job overrides of the command-line settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Knobs {
    pub modes: Option<usize>,
    pub depth: Option<usize>,
    pub quadrature: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub convention: Option<EpsilonConvention>,
    pub sector: Option<Sector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub line: usize,
    pub id: String,
    pub operation: Operation,
    pub args: Vec<String>,
    pub knobs: Knobs,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpecFile {
    pub symbols: BTreeMap<String, Def<SymbolDef>>,
    pub diffeos: BTreeMap<String, Def<DiffeoDef>>,
    pub weights: BTreeMap<String, Def<WeightDef>>,
    pub elements: BTreeMap<String, Def<ElementDef>>,
    pub jobs: Vec<JobSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Symbols,
    Diffeos,
    Weights,
    Elements,
    Jobs,
}

fn finite(line: usize, s: &str) -> Result<f64, ParseError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => err(line, format!("non-finite number `{s}`")),
        Err(_) => err(line, format!("expected a number, got `{s}`")),
    }
}

fn int<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T, ParseError> {
    s.parse::<T>().or_else(|_| err(line, format!("expected {what}, got `{s}`")))
}

fn sector(line: usize, s: &str) -> Result<Sector, ParseError> {
    match s {
        "0" => Ok(Sector::Periodic),
        "1/2" | "0.5" => Ok(Sector::Twisted),
        _ => err(line, format!("theta must be 0 or 1/2, got `{s}`")),
    }
}

/// `key value` pairs after a fixed prefix; every key must be listed in `allowed`.
fn options<'a>(line: usize, toks: &[&'a str], allowed: &[&str]) -> Result<BTreeMap<&'a str, &'a str>, ParseError> {
    let mut out = BTreeMap::new();
    let mut i = 0;
    while i < toks.len() {
        let key = toks[i];
        if !allowed.contains(&key) {
            return err(line, format!("unknown key `{key}`"));
        }
        // Flags without a value.
        if key == "odd" {
            out.insert(key, "");
            i += 1;
            continue;
        }
        let Some(v) = toks.get(i + 1) else {
            return err(line, format!("key `{key}` needs a value"));
        };
        if out.insert(key, *v).is_some() {
            return err(line, format!("key `{key}` given twice"));
        }
        i += 2;
    }
    Ok(out)
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

fn insert<T>(map: &mut BTreeMap<String, Def<T>>, line: usize, name: &str, text: String, value: T) -> Result<(), ParseError> {
    if !valid_name(name) {
        return err(line, format!("invalid name `{name}`"));
    }
    if let Some(prev) = map.get(name) {
        return err(line, format!("`{name}` is already defined on line {}", prev.line));
    }
    map.insert(name.to_string(), Def { line, text, value });
    Ok(())
}

/// Parse a spec; smoothing matrix references are resolved relative to `base`.
pub fn parse(text: &str, base: &Path) -> Result<SpecFile, ParseError> {
    let mut spec = SpecFile::default();
    let mut section = Section::None;
    // Block being filled by indented lines: (kind, name).
    let mut open: Option<(Section, String)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let indented = content.starts_with(' ') || content.starts_with('\t');
        let toks: Vec<&str> = content.split_whitespace().collect();
        if !indented && toks[0].starts_with('[') {
            section = match toks.as_slice() {
                ["[symbols]"] => Section::Symbols,
                ["[diffeos]"] => Section::Diffeos,
                ["[weights]"] => Section::Weights,
                ["[elements]"] => Section::Elements,
                ["[jobs]"] => Section::Jobs,
                _ => return err(line, format!("unknown section `{}`", content.trim())),
            };
            open = None;
            continue;
        }
        if indented {
            match &open {
                Some((Section::Symbols, name)) => {
                    let c = coeff_line(line, &toks)?;
                    let def = spec.symbols.get_mut(name).expect("open block exists");
                    if let SymbolDef::Explicit { rank, coeffs } = &mut def.value {
                        if let Some((i, j)) = c.entry {
                            if i >= *rank || j >= *rank {
                                return err(line, format!("entry ({i}, {j}) outside rank {rank}"));
                            }
                        }
                        coeffs.push(c);
                    }
                    def.text.push('\n');
                    def.text.push_str(&toks.join(" "));
                }
                Some((Section::Diffeos, name)) => {
                    let [k, re, im] = toks.as_slice() else {
                        return err(line, "diffeo mode lines are `MODE RE IM`");
                    };
                    let k: i64 = int(line, k, "a mode")?;
                    let (re, im) = (finite(line, re)?, finite(line, im)?);
                    if k < 0 {
                        return err(line, "give modes k >= 0; negative modes are the conjugates");
                    }
                    if k == 0 && im != 0.0 {
                        return err(line, "mode 0 of a displacement must be real");
                    }
                    let def = spec.diffeos.get_mut(name).expect("open block exists");
                    if let DiffeoDef::Modes(m) = &mut def.value {
                        if m.iter().any(|(j, _, _)| *j == k) {
                            return err(line, format!("mode {k} given twice"));
                        }
                        m.push((k, re, im));
                    }
                    def.text.push('\n');
                    def.text.push_str(&toks.join(" "));
                }
                _ => return err(line, "indented line outside a symbol or diffeo block"),
            }
            continue;
        }
        open = None;
        let canonical = toks.join(" ");
        match section {
            Section::None => return err(line, "content before the first section header"),
            Section::Symbols => {
                let (Some(kw), Some(name)) = (toks.first(), toks.get(1)) else {
                    return err(line, "expected `symbol`, `builtin` or `random` followed by a name");
                };
                let value = match *kw {
                    "symbol" => {
                        let o = options(line, &toks[2..], &["rank"])?;
                        let rank = o.get("rank").map_or(Ok(1), |v| int(line, v, "a rank"))?;
                        open = Some((Section::Symbols, name.to_string()));
                        SymbolDef::Explicit { rank, coeffs: Vec::new() }
                    }
                    "builtin" => {
                        let Some(kind) = toks.get(2) else {
                            return err(line, "builtin needs a kind");
                        };
                        circle_opcalc::symbol::Builtin::from_name(kind, 1)
                            .or_else(|e| err(line, e.to_string()))?;
                        let o = options(line, &toks[3..], &["rank", "terms"])?;
                        let rank = o.get("rank").map_or(Ok(1), |v| int(line, v, "a rank"))?;
                        let terms = o.get("terms").map_or(Ok(6), |v| int(line, v, "a term count"))?;
                        SymbolDef::Builtin { kind: kind.to_string(), rank, terms }
                    }
                    "random" => {
                        let o = options(line, &toks[2..], &["rank", "order", "depth", "bandwidth", "odd"])?;
                        SymbolDef::Random {
                            rank: o.get("rank").map_or(Ok(1), |v| int(line, v, "a rank"))?,
                            order: o.get("order").map_or(Ok(0), |v| int(line, v, "an order"))?,
                            depth: o.get("depth").map_or(Ok(3), |v| int(line, v, "a depth"))?,
                            bandwidth: o.get("bandwidth").map_or(Ok(2), |v| int(line, v, "a bandwidth"))?,
                            odd: o.contains_key("odd"),
                        }
                    }
                    other => return err(line, format!("unknown symbol definition `{other}`")),
                };
                if value.rank() == 0 {
                    return err(line, "rank must be positive");
                }
                if let SymbolDef::Random { depth: 0, .. } = value {
                    return err(line, "depth must be positive");
                }
                insert(&mut spec.symbols, line, name, canonical, value)?;
            }
            Section::Diffeos => match toks.as_slice() {
                ["diffeo", name] => {
                    insert(&mut spec.diffeos, line, name, canonical, DiffeoDef::Modes(Vec::new()))?;
                    open = Some((Section::Diffeos, name.to_string()));
                }
                ["rotation", name, alpha] => {
                    let a = finite(line, alpha)?;
                    insert(&mut spec.diffeos, line, name, canonical, DiffeoDef::Rotation(a))?;
                }
                _ => return err(line, "expected `diffeo NAME` or `rotation NAME ANGLE`"),
            },
            Section::Weights => {
                let ["weight", name, kind, rest @ ..] = toks.as_slice() else {
                    return err(line, "expected `weight NAME KIND ...`");
                };
                if !matches!(*kind, "laplace" | "abs") {
                    return err(line, format!("unknown weight kind `{kind}`"));
                }
                let o = options(line, rest, &["q", "theta", "mass"])?;
                let order: u32 = o.get("q").map_or(Ok(if *kind == "laplace" { 2 } else { 1 }), |v| int(line, v, "an order"))?;
                if order == 0 || (*kind == "laplace" && order % 2 == 1) {
                    return err(line, format!("invalid order {order} for a {kind} weight"));
                }
                let sector = o.get("theta").map_or(Ok(Sector::Periodic), |v| sector(line, v))?;
                let mass_sq = match o.get("mass") {
                    Some(v) if *kind == "laplace" => finite(line, v)?,
                    Some(_) => return err(line, "`mass` applies to laplace weights only"),
                    None => 1.0,
                };
                if mass_sq <= 0.0 {
                    return err(line, "mass must be positive");
                }
                let value = WeightDef { kind: kind.to_string(), order, sector, mass_sq };
                insert(&mut spec.weights, line, name, canonical, value)?;
            }
            Section::Elements => {
                let ["element", name, rest @ ..] = toks.as_slice() else {
                    return err(line, "expected `element NAME phase DIFFEO symbol SYMBOL [smoothing PATH]`");
                };
                let o = options(line, rest, &["phase", "symbol", "smoothing"])?;
                let phase = o.get("phase").map_or_else(|| err(line, "element needs `phase`"), |v| Ok(v.to_string()))?;
                let symbol = o.get("symbol").map_or_else(|| err(line, "element needs `symbol`"), |v| Ok(v.to_string()))?;
                resolve(&spec.diffeos, line, &phase, "diffeo")?;
                let rank = resolve(&spec.symbols, line, &symbol, "symbol")?.value.rank();
                let mut text = canonical;
                let smoothing = match o.get("smoothing") {
                    Some(p) => {
                        let path = base.join(p);
                        let body = std::fs::read_to_string(&path)
                            .or_else(|e| err(line, format!("cannot read `{}`: {e}", path.display())))?;
                        let m = OpMatrix::from_text(&body).or_else(|e| err(line, format!("bad matrix `{p}`: {e}")))?;
                        if m.grid().rank != rank {
                            return err(line, format!("smoothing matrix has rank {}, symbol has rank {rank}", m.grid().rank));
                        }
                        text.push('\n');
                        text.push_str(&body);
                        Some(m)
                    }
                    None => None,
                };
                insert(&mut spec.elements, line, name, text, ElementDef { phase, symbol, smoothing })?;
            }
            Section::Jobs => spec.jobs.push(job_line(line, &toks, &spec)?),
        }
    }
    let mut ids = BTreeMap::new();
    for j in &spec.jobs {
        if let Some(prev) = ids.insert(j.id.clone(), j.line) {
            return err(j.line, format!("job id `{}` already used on line {prev}", j.id));
        }
    }
    Ok(spec)
}

fn resolve<'a, T>(map: &'a BTreeMap<String, Def<T>>, line: usize, name: &str, kind: &str) -> Result<&'a Def<T>, ParseError> {
    map.get(name).map_or_else(|| err(line, format!("undefined {kind} `{name}`")), Ok)
}

fn coeff_line(line: usize, toks: &[&str]) -> Result<CoeffLine, ParseError> {
    if toks.len() != 6 && toks.len() != 8 {
        return err(line, "coefficient lines are `DEG LOGPOW BRANCH MODE RE IM [I J]`");
    }
    let (plus, minus) = match toks[2] {
        "+" => (true, false),
        "-" => (false, true),
        "both" | "+-" => (true, true),
        other => return err(line, format!("branch must be `+`, `-` or `both`, got `{other}`")),
    };
    let entry = if toks.len() == 8 {
        Some((int(line, toks[6], "a row index")?, int(line, toks[7], "a column index")?))
    } else {
        None
    };
    Ok(CoeffLine {
        degree: int(line, toks[0], "a degree")?,
        logpow: int(line, toks[1], "a log power")?,
        plus,
        minus,
        mode: int(line, toks[3], "a mode")?,
        re: finite(line, toks[4])?,
        im: finite(line, toks[5])?,
        entry,
    })
}

fn job_line(line: usize, toks: &[&str], spec: &SpecFile) -> Result<JobSpec, ParseError> {
    let ["job", id, op, rest @ ..] = toks else {
        return err(line, "expected `job ID OPERATION ARGS... [key=value ...]`");
    };
    if !valid_name(id) {
        return err(line, format!("invalid job id `{id}`"));
    }
    let operation = Operation::parse(op).map_or_else(|| err(line, format!("unknown operation `{op}`")), Ok)?;
    let (kv, args): (Vec<&str>, Vec<&str>) = rest.iter().partition(|t| t.contains('='));
    let kinds = operation.args();
    if args.len() != kinds.len() {
        return err(line, format!("`{op}` takes {} argument(s), got {}", kinds.len(), args.len()));
    }
    let mut ranks = Vec::new();
    for (name, kind) in args.iter().zip(kinds) {
        match kind {
            ArgKind::Symbol => ranks.push(resolve(&spec.symbols, line, name, kind.name())?.value.rank()),
            ArgKind::Diffeo => {
                resolve(&spec.diffeos, line, name, kind.name())?;
            }
            ArgKind::Weight => {
                resolve(&spec.weights, line, name, kind.name())?;
            }
            ArgKind::Element => {
                let e = resolve(&spec.elements, line, name, kind.name())?;
                ranks.push(spec.symbols[&e.value.symbol].value.rank());
            }
        }
    }
    if ranks.windows(2).any(|w| w[0] != w[1]) {
        return err(line, format!("arguments of `{op}` have different ranks"));
    }
    let mut knobs = Knobs::default();
    for t in kv {
        let (k, v) = t.split_once('=').expect("partitioned on '='");
        match k {
            "N" | "modes" => knobs.modes = Some(int(line, v, "a mode cutoff")?),
            "depth" => knobs.depth = Some(int(line, v, "a depth")?),
            "quadrature" => knobs.quadrature = Some(int(line, v, "a quadrature size")?),
            "tolerance" => knobs.tolerance = Some(finite(line, v)?),
            "seed" => knobs.seed = Some(int(line, v, "a seed")?),
            "convention" => {
                knobs.convention = Some(
                    EpsilonConvention::parse(v).map_or_else(|| err(line, format!("unknown convention `{v}`")), Ok)?,
                )
            }
            "theta" => knobs.sector = Some(sector(line, v)?),
            _ => return err(line, format!("unknown knob `{k}`")),
        }
    }
    Ok(JobSpec { line, id: id.to_string(), operation, args: args.iter().map(|s| s.to_string()).collect(), knobs })
}
