//! One function per subcommand. Each returns a [`RunManifest`] or a classified error.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ayang_core::cartan::{augmented_rank, gamma_vector, mu_vector, solve_t_coefficients, supported_types, t_system_residual, PivotRule};
use ayang_core::cato::{drinfeld_tensor, exp_distance, normalized_samples, rational_fit, CatOContext, DiagonalModuleData, R0Evaluator};
use ayang_core::exact::ExactPoly;
use ayang_core::qcartan::golden;
use ayang_core::resum::{verify_asymptotics, Eta, LogTerm, PoleTerm, RationalLogInput, RaySolver, RealDifferenceOperator};
use ayang_core::rminus::{
    generic_h, recurse_rminus, verify_cocycle, verify_intertwiner, JsonMatrix, Mode, OperatorData, OperatorDataSpec, RMinusResult,
    TripleData, TripleDataSpec,
};
use ayang_core::series::FormalContext;
use ayang_core::{analyze, build_cartan, AffineTypeId, Error, LaurentPoly};
use num_complex::Complex64 as C64;
use num_traits::Zero;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::report::{exact_q, Check, RunManifest, Tolerance};
use crate::selftest;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io { path: String, msg: String },
    Parse { path: String, msg: String },
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, msg } => write!(f, "cannot read {path}: {msg}"),
            CliError::Parse { path, msg } => write!(f, "cannot parse {path}: {msg}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

/// Exit status 1 means "ran, but a check failed"; 2 is a usage error.
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => 3,
            CliError::Parse { .. } => 4,
            CliError::Core(e) => match e {
                Error::UnsupportedType(_) => 10,
                Error::ZeroPolynomial => 11,
                Error::NoSolution => 12,
                Error::NotSolvable(_) => 13,
                Error::RayTooCloseToKernelPoles { .. } => 14,
                Error::DomainViolation { .. } => 15,
                Error::QuadratureFailure { .. } => 16,
                Error::ContinuationDepth(_) => 17,
                Error::PoleEncountered { .. } => 18,
                Error::BranchCutProximity(_) => 19,
                Error::RegularizationMismatch(_) => 20,
                Error::InvalidData(_) => 21,
                Error::FitDegreeExceeded { .. } => 22,
                Error::SingularPencil(_) => 23,
                Error::MissingRootBlock(_) => 24,
                Error::ShapeMismatch(_) => 25,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: p.clone(), msg: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| {
        // validation failures inside `try_from` surface as serde errors; keep their class
        let msg = e.to_string();
        if msg.contains("unsupported affine type") {
            CliError::Core(Error::UnsupportedType(msg))
        } else {
            CliError::Parse { path: p, msg }
        }
    })
}

/// `"re,im"` or `"re"`.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |x: &str| x.parse::<f64>().map_err(|_| format!("not a number: {x:?}"));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected re,im but got {s:?}")),
    }
}

fn params(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn cartan(type_id: &str) -> CliResult<RunManifest> {
    let id: AffineTypeId = type_id.parse()?;
    let d = build_cartan(id)?;
    let mu = mu_vector(&d);
    let rank = augmented_rank(&d);
    let t = solve_t_coefficients(&d, &PivotRule::MinNorm)?;
    let (gamma, rule) = gamma_vector(&d);
    let mut checks = vec![
        Check::exact("rank(B|mu) = |I|", rank == d.n_nodes()),
        Check::exact("zeta system residual vanishes", t_system_residual(&d, &t).iter().all(Zero::is_zero)),
        Check::exact("gamma is a positive integer vector", gamma.iter().all(|&x| x > 0)),
    ];
    checks.push(Check::exact("datum invariants", d.validate().is_ok()));
    let result = json!({
        "type": id.to_string(),
        "nodes": d.n_nodes(),
        "a": d.a,
        "b": d.b(),
        "d": d.d,
        "marks": d.marks,
        "comarks": d.comarks,
        "mu": mu,
        "augmented_rank": rank,
        "zeta": exact_q(&t.zeta),
        "zeta_i": t.zeta_i.iter().map(exact_q).collect::<Vec<_>>(),
        "gamma": gamma,
        "gamma_rule": rule,
    });
    Ok(RunManifest::new("cartan", params(&[("type", json!(id.to_string()))]), checks, result))
}

pub fn tables(max_rank: u32) -> CliResult<RunManifest> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut text = String::new();
    text += &format!("{:<7} {:>6} {:>6} {:>5}  {:<5} {:<5} {:<5}  det B(T)\n", "type", "q0bar", "c0bar", "rank", "det", "q0", "c0");
    for id in supported_types(max_rank) {
        let d = build_cartan(id)?;
        let rep = analyze(&d);
        let rank = augmented_rank(&d);
        let table = golden::table_det(&id);
        let det_ok = table.as_ref().map(|(p, _)| *p == rep.det_bt);
        let q_ok = table.as_ref().map(|(_, q)| *q == rep.qdzero);
        let c_ok = golden::table_czero(&id).map(|c| c == rep.czero);
        let derived_ok = golden::derived_det(&id).is_some_and(|(p, q)| p == rep.det_bt && q == rep.qdzero);
        let verdict = |x: Option<bool>| match x {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "-",
        };
        if let Some(ok) = det_ok {
            checks.push(Check::exact(format!("{id} det B(T) table row"), ok));
        }
        if let Some(ok) = q_ok {
            checks.push(Check::exact(format!("{id} q0bar table row"), ok));
        }
        if let Some(ok) = c_ok {
            checks.push(Check::exact(format!("{id} c0bar table row"), ok));
        }
        checks.push(Check::exact(format!("{id} rank(B|mu) = |I|"), rank == d.n_nodes()));
        checks.push(Check::bound(
            format!("{id} zeros of det B(T) on the unit circle"),
            rep.zero_moduli.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max),
            1e-9,
        ));
        text += &format!(
            "{:<7} {:>6} {:>6} {:>5}  {:<5} {:<5} {:<5}  {}\n",
            id.to_string(),
            rep.qdzero.to_string(),
            rep.czero.to_string(),
            rank,
            verdict(det_ok),
            verdict(q_ok),
            verdict(c_ok),
            rep.det_bt.to_string_in("T")
        );
        rows.push(json!({
            "type": id.to_string(),
            "nodes": d.n_nodes(),
            "det_bt": ExactPoly::from(&rep.det_bt),
            "det_bt_text": rep.det_bt.to_string_in("T"),
            "qdzero": exact_q(&rep.qdzero),
            "czero": exact_q(&rep.czero),
            "mu": mu_vector(&d),
            "augmented_rank": rank,
            "table_det": verdict(det_ok),
            "table_qdzero": verdict(q_ok),
            "table_czero": verdict(c_ok),
            "matches_recomputed_closed_form": derived_ok,
            "known_table_conflict": golden::known_table_conflict(&id),
        }));
    }
    let mut m = RunManifest::new("tables", params(&[("max_rank", json!(max_rank))]), checks, json!({ "rows": rows }));
    m.text_body = Some(text);
    Ok(m)
}

pub fn formal_r0(type_id: &str, order: usize) -> CliResult<RunManifest> {
    let id: AffineTypeId = type_id.parse()?;
    let ctx = FormalContext::new(&build_cartan(id)?);
    let l = ctx.solve_l(order)?;
    let k = ctx.dop.order();
    let checks = vec![
        Check::exact("D(T) L = g_reg", ctx.dop.apply(&l.pad(order + k)) == ctx.g_reg_formal(order + k)),
        Check::exact("F_0 closed form", l.coeff(0) == &ctx.leading_l_closed_form()),
        Check::exact("flip L(s) = -L(-s)", l.flip() == l.reflect().scale(&-LaurentPoly::one())),
    ];
    let coeffs: Vec<Value> = l
        .coeffs()
        .iter()
        .enumerate()
        .map(|(n, f)| {
            let mut terms = Vec::new();
            for (&(i, a, j, b), c) in f.iter() {
                for (e, x) in c.terms() {
                    terms.push(json!({"i": i, "a": a, "j": j, "b": b, "hbar_exp": e, "num": x.numer().to_string(), "den": x.denom().to_string()}));
                }
            }
            json!({"power": -(n as i64) - 1, "terms": terms})
        })
        .collect();
    let result = json!({
        "type": id.to_string(),
        "qdzero": exact_q(&ctx.report.qdzero),
        "czero": exact_q(&ctx.report.czero),
        "difference_operator": ExactPoly::from(&ctx.dop.d),
        "coefficients": coeffs,
    });
    Ok(RunManifest::new("formal-r0", params(&[("type", json!(id.to_string())), ("order", json!(order))]), checks, result))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DSpec {
    Pairs(Vec<(i64, f64)>),
    Map(BTreeMap<String, f64>),
}

#[derive(Deserialize)]
struct AsymptoticsSpec {
    #[serde(default = "default_order")]
    order: usize,
    radii: Vec<f64>,
    #[serde(default)]
    center: Option<f64>,
    #[serde(default = "default_half")]
    half_width: f64,
    #[serde(default = "default_angles")]
    n_angles: usize,
}

fn default_order() -> usize {
    8
}
fn default_half() -> f64 {
    0.5
}
fn default_angles() -> usize {
    3
}

#[derive(Deserialize)]
struct ResumSpec {
    d: DSpec,
    /// Defaults to `ħ/2` with `ħ = 1`.
    #[serde(default)]
    chi: Option<C64>,
    #[serde(default)]
    log_terms: Vec<LogTerm>,
    #[serde(default)]
    pole_terms: Vec<PoleTerm>,
    points: Vec<C64>,
    #[serde(default)]
    eta: Option<Eta>,
    #[serde(default)]
    asymptotics: Option<AsymptoticsSpec>,
}

pub fn resum(path: &Path) -> CliResult<RunManifest> {
    let spec: ResumSpec = read_json(path)?;
    let terms = match spec.d {
        DSpec::Pairs(p) => p,
        DSpec::Map(m) => m
            .into_iter()
            .map(|(k, v)| k.trim().parse::<i64>().map(|e| (e, v)).map_err(|_| CliError::Parse { path: path.display().to_string(), msg: format!("bad exponent {k:?}") }))
            .collect::<CliResult<Vec<_>>>()?,
    };
    let d = RealDifferenceOperator::new(terms)?;
    let chi = spec.chi.unwrap_or(C64::new(0.5, 0.0));
    let eta = spec.eta.unwrap_or(Eta::Up);
    let input = RationalLogInput { log_terms: spec.log_terms, pole_terms: spec.pole_terms };
    let solver = RaySolver::from_input(d, chi, &input)?;
    let mut checks = Vec::new();
    let mut values = Vec::new();
    for &s in &spec.points {
        let entry = match (solver.evaluate(eta, s), solver.residual(eta, s)) {
            (Ok(v), Ok(r)) => {
                checks.push(Check::bound(format!("functional equation at {s}"), r, 1e-8));
                json!({"s": s, "value": v, "residual": r})
            }
            (Err(e), _) | (_, Err(e)) => {
                checks.push(Check::error(format!("evaluation at {s}"), Tolerance::Bound(1e-8), &e));
                json!({"s": s, "error": e.to_string()})
            }
        };
        values.push(entry);
    }
    let formal = solver.formal_coefficients();
    let mut result = json!({
        "order_at_one": solver.order(),
        "eta": eta,
        "chi": chi,
        "values": values,
        "formal_coefficients": formal.iter().take(9).collect::<Vec<_>>(),
    });
    if let Some(a) = spec.asymptotics {
        let n = (a.order + 1).min(formal.len());
        let center = a.center.unwrap_or(solver.canonical_psi(eta));
        let rep = verify_asymptotics(|s| solver.evaluate(eta, s), &formal[..n], (center, a.half_width), &a.radii, a.n_angles)?;
        checks.push(Check::exact(format!("Watson remainders decay through order {}", n - 1), rep.all_decay));
        result["asymptotics"] = serde_json::to_value(&rep).expect("finite report");
    }
    Ok(RunManifest::new("resum", params(&[("spec", json!(path.display().to_string()))]), checks, result))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalCheck {
    Unitarity,
    Cabling,
    Rational,
}

fn opposite(eta: Eta) -> Eta {
    match eta {
        Eta::Up => Eta::Down,
        Eta::Down => Eta::Up,
    }
}

pub fn eval(type_id: &str, v1: &Path, v2: &Path, eta: Eta, s: C64, check: Option<EvalCheck>) -> CliResult<RunManifest> {
    let id: AffineTypeId = type_id.parse()?;
    let datum = build_cartan(id)?;
    let d1: DiagonalModuleData = read_json(v1)?;
    let d2: DiagonalModuleData = read_json(v2)?;
    for d in [&d1, &d2] {
        if d.type_id != id {
            return Err(Error::ShapeMismatch(format!("module data are for {}, not {id}", d.type_id)).into());
        }
        d.validate(&datum)?;
    }
    let ctx = CatOContext::new(&datum)?;
    let e12 = R0Evaluator::new(&ctx, &d1, &d2)?;
    let f = e12.exponents(eta, s)?;
    let mut basis = Vec::new();
    for a in &d1.vectors {
        for b in &d2.vectors {
            basis.push(json!([a.name, b.name]));
        }
    }
    let mut checks = Vec::new();
    let mut result = json!({
        "basis": basis,
        "exponents": f,
        "diagonal": f.iter().map(|x| x.exp()).collect::<Vec<_>>(),
    });
    match check {
        None => {}
        Some(EvalCheck::Unitarity) => {
            let e21 = R0Evaluator::new(&ctx, &d2, &d1)?;
            let back = e21.exponents(opposite(eta), -s)?;
            let mut worst: f64 = 0.0;
            for v in 0..d1.dim() {
                for w in 0..d2.dim() {
                    worst = worst.max(((f[v * d2.dim() + w] + back[w * d1.dim() + v]).exp() - 1.0).norm());
                }
            }
            checks.push(Check::bound("unitarity", worst, 1e-8));
        }
        Some(EvalCheck::Cabling) => {
            // V3 = V1, s1 = s2 = s
            let t = drinfeld_tensor(&d1, s, &d2)?;
            let big = R0Evaluator::new(&ctx, &t, &d1)?.exponents(eta, s)?;
            let f13 = R0Evaluator::new(&ctx, &d1, &d1)?.exponents(eta, s + s)?;
            let f23 = R0Evaluator::new(&ctx, &d2, &d1)?.exponents(eta, s)?;
            let n3 = d1.dim();
            let mut rhs = Vec::new();
            for a in 0..d1.dim() {
                for b in 0..d2.dim() {
                    for w in 0..n3 {
                        rhs.push(f13[a * n3 + w] + f23[b * n3 + w]);
                    }
                }
            }
            checks.push(Check::bound("cabling with V3 = V1 and s1 = s2 = s", exp_distance(&big, &rhs), 1e-8));
        }
        Some(EvalCheck::Rational) => {
            let up: Vec<C64> = (0..30).map(|k| C64::from_polar(5.0, -1.2 + 2.4 * k as f64 / 29.0) + 4.0).collect();
            let down: Vec<C64> = up.iter().map(|p| -p).collect();
            let probes = [C64::new(0.0, 9.0), C64::new(-7.0, -3.0), C64::new(6.0, 2.0)];
            let (mut resid, mut gap): (f64, f64) = (0.0, 0.0);
            let mut degrees = Vec::new();
            for v in 0..d1.dim() {
                for w in 0..d2.dim() {
                    let fu = rational_fit(&normalized_samples(&e12, (0, 0), (v, w), Eta::Up, &up)?, 10, 1e-6)?;
                    let fd = rational_fit(&normalized_samples(&e12, (0, 0), (v, w), Eta::Down, &down)?, 10, 1e-6)?;
                    resid = resid.max(fu.residual).max(fd.residual);
                    gap = probes.iter().fold(gap, |g, &p| g.max((fu.eval(p) - fd.eval(p)).norm()));
                    degrees.push(fu.degree);
                }
            }
            checks.push(Check::bound("rational fit residual", resid, 1e-6));
            checks.push(Check::bound("eta-independence of the fitted normalized entries", gap, 1e-6));
            result["fit_degrees"] = json!(degrees);
        }
    }
    let p = params(&[
        ("type", json!(id.to_string())),
        ("v1", json!(v1.display().to_string())),
        ("v2", json!(v2.display().to_string())),
        ("eta", json!(eta)),
        ("s", json!(s)),
        ("check", json!(check.map(|c| format!("{c:?}").to_lowercase()))),
    ]);
    Ok(RunManifest::new("eval", p, checks, result))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RMinusVerify {
    Intertwiner,
    Cocycle,
}

/// Default sample points for residual checks.
pub fn default_samples() -> Vec<C64> {
    (0..20).map(|k| C64::from_polar(3.0 + 0.35 * k as f64, 0.9 * k as f64)).collect()
}

fn rminus_components(r: &RMinusResult) -> Value {
    let mut out = Vec::new();
    for (k, beta) in r.betas.iter().enumerate() {
        let mut entry = json!({"beta": beta, "height": beta.iter().sum::<i64>()});
        if let Some(ex) = &r.exact {
            entry["blocks"] = json!(ex[k]
                .iter()
                .map(|b| {
                    json!({
                        "src": b.src,
                        "tgt": b.tgt,
                        "den": b.den,
                        "num": b.num.iter().map(JsonMatrix::from_matrix).collect::<Vec<_>>(),
                    })
                })
                .collect::<Vec<_>>());
        }
        if let Some(se) = &r.series {
            entry["series"] = json!(se[k].iter().map(JsonMatrix::from_matrix).collect::<Vec<_>>());
        }
        out.push(entry);
    }
    Value::Array(out)
}

pub struct RMinusArgs<'a> {
    pub data: &'a Path,
    pub height: i64,
    pub mode: Mode,
    pub verify: Option<RMinusVerify>,
    pub points: Vec<C64>,
    pub s1: C64,
    pub s2: C64,
}

pub fn rminus(args: &RMinusArgs) -> CliResult<RunManifest> {
    let raw: Value = read_json(args.data)?;
    let parse_err = |e: serde_json::Error| CliError::Parse { path: args.data.display().to_string(), msg: e.to_string() };
    let mode_s = match args.mode {
        Mode::Exact => "exact".to_string(),
        Mode::Series(n) => format!("series:{n}"),
    };
    let mut p = params(&[
        ("data", json!(args.data.display().to_string())),
        ("height", json!(args.height)),
        ("mode", json!(mode_s)),
        ("verify", json!(args.verify.map(|v| format!("{v:?}").to_lowercase()))),
    ]);
    if raw.get("w12").is_some() {
        if args.verify != Some(RMinusVerify::Cocycle) {
            return Err(CliError::Usage("three-factor data are only used with --verify cocycle".into()));
        }
        let spec: TripleDataSpec = serde_json::from_value(raw).map_err(parse_err)?;
        let triple = TripleData::try_from(&spec)?;
        let r = verify_cocycle(&triple, args.height, args.s1, args.s2)?;
        p.insert("s1".into(), json!(args.s1));
        p.insert("s2".into(), json!(args.s2));
        let checks = vec![Check::bound("cocycle", r, 1e-8)];
        return Ok(RunManifest::new("rminus", p, checks, json!({"cocycle_residual": r})));
    }
    let spec: OperatorDataSpec = serde_json::from_value(raw).map_err(parse_err)?;
    let data = OperatorData::try_from(&spec)?;
    let res = recurse_rminus(&data, args.height, args.mode)?;
    let mut checks = Vec::new();
    match args.verify {
        None => {}
        Some(RMinusVerify::Cocycle) => return Err(CliError::Usage("--verify cocycle needs three-factor data (w12, w13, w23)".into())),
        Some(RMinusVerify::Intertwiner) => {
            // a truncated series only satisfies the relation asymptotically
            let pts: Vec<C64> = match args.mode {
                Mode::Exact => args.points.clone(),
                Mode::Series(_) => args.points.iter().map(|s| s * 4.0).collect(),
            };
            checks.push(Check::bound("intertwiner at rho", verify_intertwiner(&data, &res, &data.rho(), &pts), 1e-10));
            checks.push(Check::bound("intertwiner at a generic h", verify_intertwiner(&data, &res, &generic_h(data.n_simple), &pts), 1e-10));
        }
    }
    let values: Vec<Value> = args.points.iter().map(|&s| json!({"s": s, "matrix": JsonMatrix::from_matrix(&res.eval(s))})).collect();
    p.insert("points".into(), json!(args.points));
    let result = json!({
        "dim": res.dim,
        "consistent": data.consistent,
        "components": rminus_components(&res),
        "values": values,
    });
    Ok(RunManifest::new("rminus", p, checks, result))
}

pub fn selftest(ids: &[u32], timing: bool) -> CliResult<RunManifest> {
    for &k in ids {
        if !(1..=7).contains(&k) {
            return Err(CliError::Usage(format!("criterion {k} does not exist; use 1..=7")));
        }
    }
    let reports = selftest::run_all(ids, timing);
    let mut checks = Vec::new();
    let mut text = String::new();
    for r in &reports {
        text += &r.line();
        text.push('\n');
        for c in &r.checks {
            let mut c = c.clone();
            c.name = format!("C{} {}", r.id, c.name);
            checks.push(c);
        }
        for (k, v) in &r.reports {
            text += &format!("  report: {k} = {v:.3e}\n");
        }
    }
    let result = json!({
        "criteria": reports.iter().map(|r| json!({"id": r.id, "title": r.title, "pass": r.pass, "reports": r.reports, "seconds": r.seconds})).collect::<Vec<_>>(),
    });
    let mut m = RunManifest::new("selftest", params(&[("criteria", json!(ids)), ("timing", json!(timing))]), checks, result);
    m.text_body = Some(text);
    Ok(m)
}
