//! Job execution: resolve names, build library objects, run one operation.

use std::time::Instant;

use circle_opcalc::cocycle::{cocycle_identity_check, schwinger, EpsilonConvention, EpsilonSpec};
use circle_opcalc::fiogroup::{fio_multiply_with, pseudolocality_witness, Diffeo, FIOElement, FioConfig, PSEUDOLOCAL_BAND};
use circle_opcalc::operator::Operator;
use circle_opcalc::quantize::{
    diffeo_matrix, gl_res_witness, min_quadrature, realize, sign_plus_diagonal, HsVerdict, ModeGrid, OpMatrix, Sector,
};
use circle_opcalc::sampling::{random_classical, random_odd, rng};
use circle_opcalc::symbol::{builtin, wodzicki_res, Builtin, FormalSymbol};
use circle_opcalc::trigpoly::{c64, Block, TrigPoly};
use circle_opcalc::zetatrace::{
    bracket_trace_check, default_heat_times, heat_trace_oracle, kv_trace, tr_q_with, zeta_laurent_with, Weight,
    WeightKind, ZetaConfig,
};
use circle_opcalc::Error;
use sha2::{Digest, Sha256};

use crate::spec::{ArgKind, DiffeoDef, JobSpec, Operation, SpecFile, SymbolDef};

/// Command-line defaults; every field can be overridden per job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub modes: usize,
    pub depth: usize,
    pub quadrature: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { modes: 128, depth: 12, quadrature: None, tolerance: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub job_id: String,
    pub operation: &'static str,
    pub inputs_hash: String,
    pub status: &'static str,
    pub value: (f64, f64),
    pub aux: String,
    pub oracle_delta: Option<f64>,
    pub convention: String,
    pub seed: u64,
    pub seconds: f64,
}

impl Row {
    pub fn failed(&self) -> bool {
        self.status != "ok"
    }
}

/// Knobs after merging job overrides into the defaults.
struct Resolved {
    modes: usize,
    depth: usize,
    quadrature: usize,
    tolerance: Option<f64>,
    seed: u64,
    convention: EpsilonConvention,
    sector: Sector,
}

/// What an operation produced before the tolerance verdict.
struct Outcome {
    value: (f64, f64),
    aux: String,
    oracle_delta: Option<f64>,
    convention: String,
}

/// Tolerance applied to `oracle_delta` when neither the job nor the command line sets one.
fn default_tolerance(op: Operation) -> f64 {
    match op {
        Operation::Heat => 1e-4,
        Operation::Bracket => 1e-6,
        Operation::CocycleIdentity => 1e-10,
        _ => 1e-8,
    }
}

type JobResult<T> = Result<T, String>;

fn lib<T>(r: Result<T, Error>) -> JobResult<T> {
    r.map_err(|e| e.to_string())
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn run_job(spec: &SpecFile, job: &JobSpec, settings: &Settings) -> Row {
    let start = Instant::now();
    let k = &job.knobs;
    let modes = k.modes.unwrap_or(settings.modes);
    let r = Resolved {
        modes,
        depth: k.depth.unwrap_or(settings.depth),
        quadrature: k.quadrature.or(settings.quadrature).unwrap_or_else(|| min_quadrature(modes)),
        tolerance: k.tolerance.or(settings.tolerance),
        seed: k.seed.unwrap_or(settings.seed),
        convention: k.convention.unwrap_or(EpsilonConvention::SignPlus),
        sector: k.sector.unwrap_or(Sector::Periodic),
    };
    let inputs_hash = inputs_hash(spec, job, &r);
    let outcome = execute(spec, job, &r);
    let tol = r.tolerance.unwrap_or_else(|| default_tolerance(job.operation));
    let (status, value, aux, oracle_delta, convention) = match outcome {
        Ok(o) => {
            let ok = o.oracle_delta.is_none_or(|d| d <= tol);
            (if ok { "ok" } else { "check_failed" }, o.value, o.aux, o.oracle_delta, o.convention)
        }
        Err(msg) => ("error", (f64::NAN, f64::NAN), msg, None, String::new()),
    };
    Row {
        job_id: job.id.clone(),
        operation: job.operation.name(),
        inputs_hash,
        status,
        value,
        aux,
        oracle_delta,
        convention,
        seed: r.seed,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// First 16 hex digits of SHA-256 over the operation, resolved knobs and
/// the canonical text of every definition the job touches.
fn inputs_hash(spec: &SpecFile, job: &JobSpec, r: &Resolved) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "{}\nN={} depth={} quadrature={} tolerance={:?} seed={} convention={} theta={}\n",
        job.operation.name(),
        r.modes,
        r.depth,
        r.quadrature,
        r.tolerance,
        r.seed,
        r.convention.name(),
        r.sector.theta()
    ));
    for (name, kind) in job.args.iter().zip(job.operation.args()) {
        let text = match kind {
            ArgKind::Symbol => spec.symbols[name].text.clone(),
            ArgKind::Diffeo => spec.diffeos[name].text.clone(),
            ArgKind::Weight => spec.weights[name].text.clone(),
            ArgKind::Element => {
                let e = &spec.elements[name];
                format!("{}\n{}\n{}", e.text, spec.diffeos[&e.value.phase].text, spec.symbols[&e.value.symbol].text)
            }
        };
        h.update(text.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn name_seed(seed: u64, name: &str) -> u64 {
    let d = Sha256::digest(name.as_bytes());
    seed ^ u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
}

fn symbol(spec: &SpecFile, name: &str, seed: u64) -> JobResult<FormalSymbol> {
    match &spec.symbols[name].value {
        SymbolDef::Builtin { kind, rank, terms } => lib(Builtin::from_name(kind, *terms).and_then(|b| builtin(&b, *rank))),
        SymbolDef::Random { rank, order, depth, bandwidth, odd } => {
            let mut g = rng(name_seed(seed, name));
            lib(if *odd {
                random_odd(&mut g, *rank, *order, *depth, *bandwidth)
            } else {
                random_classical(&mut g, *rank, *order, *depth, *bandwidth)
            })
        }
        SymbolDef::Explicit { rank, coeffs } => {
            let mut comps: std::collections::BTreeMap<(i64, u32), (TrigPoly, TrigPoly)> = Default::default();
            for c in coeffs {
                let v = c64(c.re, c.im);
                let block = match c.entry {
                    Some((i, j)) => Block::from_fn(*rank, *rank, |a, b| if (a, b) == (i, j) { v } else { c64(0.0, 0.0) }),
                    None => Block::identity(*rank, *rank) * v,
                };
                let slot = comps
                    .entry((c.degree, c.logpow))
                    .or_insert_with(|| (TrigPoly::zero(*rank), TrigPoly::zero(*rank)));
                let term = TrigPoly::monomial(c.mode, block);
                if c.plus {
                    slot.0 = lib(slot.0.try_add(&term))?;
                }
                if c.minus {
                    slot.1 = lib(slot.1.try_add(&term))?;
                }
            }
            let order = comps.keys().map(|k| k.0).max().ok_or("symbol has no coefficients")?;
            let mut s = FormalSymbol::zero(*rank, order);
            for ((d, l), (p, m)) in comps {
                lib(s.add_component(d, l, p, m))?;
            }
            Ok(s)
        }
    }
}

fn diffeo(spec: &SpecFile, name: &str) -> JobResult<Diffeo> {
    match &spec.diffeos[name].value {
        DiffeoDef::Rotation(a) => Ok(Diffeo::rotation(*a)),
        DiffeoDef::Modes(m) => {
            let mut modes = Vec::new();
            for &(k, re, im) in m {
                modes.push((k, c64(re, im)));
                if k > 0 {
                    modes.push((-k, c64(re, -im)));
                }
            }
            lib(Diffeo::from_displacement(TrigPoly::from_modes(modes)))
        }
    }
}

fn weight(spec: &SpecFile, name: &str) -> JobResult<Weight> {
    let w = &spec.weights[name].value;
    let kind = match w.kind.as_str() {
        "laplace" => WeightKind::Laplace { mass_sq: w.mass_sq, power: w.order / 2 },
        _ => WeightKind::Abs { power: w.order },
    };
    lib(Weight::new(name, kind, w.sector))
}

fn element(spec: &SpecFile, name: &str, seed: u64) -> JobResult<FIOElement> {
    let e = &spec.elements[name].value;
    lib(FIOElement::new(diffeo(spec, &e.phase)?, symbol(spec, &e.symbol, seed)?, e.smoothing.clone()))
}

fn theta_tag(s: Sector) -> String {
    match s {
        Sector::Periodic => "theta=0".into(),
        Sector::Twisted => "theta=1/2".into(),
    }
}

fn inner_max(m: &OpMatrix, half: i64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in -half..=half {
        for j in -half..=half {
            worst = m.block(i, j).iter().map(|z| z.norm()).fold(worst, f64::max);
        }
    }
    worst
}

fn execute(spec: &SpecFile, job: &JobSpec, r: &Resolved) -> JobResult<Outcome> {
    let a = &job.args;
    let zcfg = ZetaConfig { depth: r.depth, ..ZetaConfig::default() };
    let sym = |i: usize| symbol(spec, &a[i], r.seed);
    let out = |value: (f64, f64), aux: String, oracle_delta: Option<f64>, convention: String| Outcome {
        value,
        aux,
        oracle_delta,
        convention,
    };
    match job.operation {
        Operation::Res => {
            let v = lib(wodzicki_res(&sym(0)?))?;
            Ok(out((v.re, v.im), String::new(), None, String::new()))
        }
        Operation::Zeta => {
            let (s, q) = (sym(0)?, weight(spec, &a[1])?);
            let l = lib(zeta_laurent_with(&Operator::Symbol(s.clone()), &q, &zcfg))?;
            let expected = lib(wodzicki_res(&s))? / q.order() as f64;
            let aux = format!("c_m1={};c1={}", num(l.c_m1.re), num(l.c1.re));
            Ok(out((l.c0.re, l.c0.im), aux, Some((l.c_m1 - expected).norm()), theta_tag(q.sector())))
        }
        Operation::TrQ => {
            let q = weight(spec, &a[1])?;
            let v = lib(tr_q_with(&Operator::Symbol(sym(0)?), &q, &zcfg))?;
            Ok(out((v.re, v.im), String::new(), None, theta_tag(q.sector())))
        }
        Operation::Heat => {
            let (op, q) = (Operator::Symbol(sym(0)?), weight(spec, &a[1])?);
            let h = lib(heat_trace_oracle(&op, &q, &default_heat_times()))?;
            let z = lib(zeta_laurent_with(&op, &q, &zcfg))?;
            let aux = format!("pole={};rms={};conclusive={}", num(h.pole), num(h.rms_residual), h.conclusive);
            Ok(out((h.finite_part, 0.0), aux, Some((h.finite_part - z.c0.re).abs()), theta_tag(q.sector())))
        }
        Operation::Kv => {
            let v = lib(kv_trace(&Operator::Symbol(sym(0)?), r.sector))?;
            Ok(out((v.re, v.im), String::new(), None, theta_tag(r.sector)))
        }
        Operation::Bracket => {
            let q = weight(spec, &a[2])?;
            let b = lib(bracket_trace_check(&sym(0)?, &sym(1)?, &q, r.depth))?;
            let aux = format!("rhs_re={};rhs_im={}", num(b.rhs.re), num(b.rhs.im));
            Ok(out((b.lhs.re, b.lhs.im), aux, Some(b.delta), theta_tag(q.sector())))
        }
        Operation::Cocycle | Operation::CocycleIdentity => {
            let eps = EpsilonSpec::new(r.convention, r.modes, spec.symbols[&a[0]].value.rank());
            let mats: Vec<OpMatrix> =
                (0..a.len()).map(|i| lib(realize(&sym(i)?, &eps.grid))).collect::<JobResult<_>>()?;
            if job.operation == Operation::Cocycle {
                let ab = lib(schwinger(&mats[0], &mats[1], &eps))?.value;
                let ba = lib(schwinger(&mats[1], &mats[0], &eps))?.value;
                Ok(out((ab.re, ab.im), String::new(), Some((ab + ba).norm()), r.convention.name().into()))
            } else {
                let rep = lib(cocycle_identity_check(&mats[0], &mats[1], &mats[2], &eps))?;
                let aux = format!("antisymmetry={}", num(rep.antisymmetry_defect));
                Ok(out((rep.cocycle_defect, 0.0), aux, Some(rep.cocycle_defect), r.convention.name().into()))
            }
        }
        Operation::Multiply | Operation::Assoc => {
            let es: Vec<FIOElement> = a.iter().map(|n| element(spec, n, r.seed)).collect::<JobResult<_>>()?;
            let rank = es[0].rank();
            let cfg = FioConfig { depth: r.depth.max(1), working_cutoff: Some(r.modes), ..FioConfig::default() };
            let grid = ModeGrid::new(r.modes, Sector::Periodic, rank);
            let mul = |x: &FIOElement, y: &FIOElement| lib(fio_multiply_with(x, y, &cfg, None));
            let real = |x: &FIOElement| lib(x.realize(&grid, r.quadrature));
            if job.operation == Operation::Multiply {
                let p = mul(&es[0], &es[1])?;
                let direct = lib(real(&es[0])?.mul(&real(&es[1])?))?;
                let d = inner_max(&lib(real(&p)?.sub(&direct))?, r.modes as i64 / 2);
                let aux = format!("phase_bandwidth={}", p.phase().bandwidth());
                Ok(out((p.certificate(), 0.0), aux, Some(d), String::new()))
            } else {
                let left = mul(&mul(&es[0], &es[1])?, &es[2])?;
                let right = mul(&es[0], &mul(&es[1], &es[2])?)?;
                let d = lib(real(&left)?.sub(&real(&right)?))?.max_abs();
                Ok(out((d, 0.0), String::new(), Some(d), String::new()))
            }
        }
        Operation::Pseudolocal => {
            let e = element(spec, &a[0], r.seed)?;
            let m = lib(e.realize(&ModeGrid::new(r.modes, Sector::Periodic, e.rank()), r.quadrature))?;
            let w = pseudolocality_witness(&m, PSEUDOLOCAL_BAND);
            let aux = format!("variation={};pseudolocal={}", num(w.variation), w.pseudolocal);
            Ok(out((w.off_band_ratio, 0.0), aux, None, String::new()))
        }
        Operation::GlRes => {
            let g = diffeo(spec, &a[0])?;
            let cutoffs = [r.modes, 2 * r.modes, 4 * r.modes];
            let mats: Vec<OpMatrix> = cutoffs
                .iter()
                .map(|&n| {
                    let grid = ModeGrid::scalar(n, Sector::Periodic);
                    lib(diffeo_matrix(&g, &grid, r.quadrature.max(min_quadrature(n))))
                })
                .collect::<JobResult<_>>()?;
            let rep = lib(gl_res_witness(&mats, sign_plus_diagonal, r.tolerance.unwrap_or(1e-3)))?;
            let last = *rep.hs_norms.last().expect("three norms");
            let aux = match rep.verdict {
                HsVerdict::BoundedHs { limit } => format!("bounded;limit={}", num(limit)),
                HsVerdict::GrowingHs { exponent } => format!("growing;exponent={}", num(exponent)),
            };
            Ok(out((last, 0.0), aux, None, "sign-plus".into()))
        }
    }
}
