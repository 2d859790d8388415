//! The acceptance suite. Each criterion returns its checks; `ayang selftest` and the
//! `acceptance` test target both run these functions.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use ayang_core::cartan::{augmented_rank, gamma_vector, mu_brute, mu_closed_form, solve_t_coefficients, supported_types, PivotRule};
use ayang_core::cato::{
    drinfeld_tensor, evaluate_formal, exp_distance, normalized_samples, rational_fit, toy_a2_modules, unitarity_residual, CatOContext,
    DiagonalModuleData, R0Evaluator,
};
use ayang_core::laurent::{q, qr};
use ayang_core::qcartan::{czero_of, golden};
use ayang_core::resum::{verify_asymptotics, Eta, PoleTerm, RationalLogInput, RaySolver, RealDifferenceOperator};
use ayang_core::rminus::{
    assemble_full_r, flip_matrix, generic_h, qybe_residual, recurse_rminus, sl2_triple, synthetic_instance, verify_cocycle,
    verify_intertwiner, MaxAbs, Mode, OperatorData, Weight,
};
use ayang_core::series::{FormalContext, Series};
use ayang_core::{analyze, build_b, build_cartan, AffineTypeId, LaurentPoly, Q};
use num_complex::Complex64 as C64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::oracles::{brute_force_rminus, det_q, rank_q};
use crate::report::{Check, Tolerance};

pub const CRITERIA: [(u32, &str, f64); 7] = [
    (1, "determinant tables: det B(T) and q0bar", 10.0),
    (2, "c0bar values", 1.0),
    (3, "mu closed form, rank of (B|mu), gamma vectors", 1.0),
    (4, "formal solver for L(s)", 60.0),
    (5, "resummation properties", 120.0),
    (6, "abelian R-matrix identities on toy modules", 600.0),
    (7, "R^- recursion on the bundled synthetic instance", 300.0),
];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Quantities that are reported but carry no pass/fail verdict.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub reports: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        let mut s = format!("{} criterion {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.title);
        if !failed.is_empty() {
            s += &format!(" [{} of {} checks failed: {}]", failed.len(), self.checks.len(), failed.join("; "));
        }
        s
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A runtime check; the measured value is only recorded with `timing`.
fn runtime(name: &str, secs: f64, budget: f64, timing: bool) -> Check {
    let mut ch = Check::bound(name, secs, budget);
    if !timing {
        ch.value = None;
    }
    ch
}

fn datum(id: AffineTypeId) -> ayang_core::AffineCartanDatum {
    build_cartan(id).expect("supported_types only lists buildable types")
}

pub fn run_criterion(id: u32, timing: bool) -> CriterionReport {
    let (_, title, budget) = CRITERIA.iter().copied().find(|(k, _, _)| *k == id).expect("criterion ids are 1..=7");
    let start = Instant::now();
    let mut reports = BTreeMap::new();
    let mut checks = match id {
        1 => criterion_1(timing),
        2 => criterion_2(timing),
        3 => criterion_3(timing),
        4 => criterion_4(timing),
        5 => criterion_5(),
        6 => criterion_6(),
        _ => criterion_7(&mut reports),
    };
    let secs = start.elapsed().as_secs_f64();
    if matches!(id, 5..=7) {
        checks.push(runtime("runtime", secs, budget, timing));
    }
    CriterionReport {
        id,
        title: title.into(),
        pass: checks.iter().all(|c| c.pass),
        checks,
        reports,
        seconds: timing.then_some(secs),
    }
}

pub fn run_all(ids: &[u32], timing: bool) -> Vec<CriterionReport> {
    ids.iter().map(|&k| run_criterion(k, timing)).collect()
}

/// Exact `det B(T)` at rational points, by elimination on the evaluated matrix.
fn det_at_points(id: AffineTypeId, det: &LaurentPoly) -> bool {
    let b = build_b(&datum(id));
    [q(2), q(-3), qr(1, 2), qr(5, 3)].iter().all(|t| det_q(b.eval_q(t)) == det.eval_q(t))
}

fn criterion_1(timing: bool) -> Vec<Check> {
    let mut checks = Vec::new();
    for id in supported_types(8) {
        let start = Instant::now();
        let rep = analyze(&datum(id));
        let secs = start.elapsed().as_secs_f64();
        checks.push(Check::exact(format!("{id} det B(T) agrees with direct evaluation"), det_at_points(id, &rep.det_bt)));
        if let Some((det, qd)) = golden::table_det(&id) {
            let flagged = id.family == 'C' && id.rank == 2;
            let suffix = if flagged { " (flagged row)" } else { "" };
            let mut ch = Check::exact(format!("{id} det B(T) equals the table{suffix}"), det == rep.det_bt);
            if !ch.pass {
                let derived = golden::derived_det(&id).is_some_and(|(d, _)| d == rep.det_bt);
                ch = ch.with_detail(format!("computed {}; recomputed closed form matches: {derived}", rep.det_bt.to_string_in("T")));
            }
            checks.push(ch);
            let mut ch = Check::exact(format!("{id} q0bar equals the table{suffix}"), qd == rep.qdzero);
            if !ch.pass {
                ch = ch.with_detail(format!("computed {}, table {}", rep.qdzero, qd));
            }
            checks.push(ch);
        }
        checks.push(runtime(&format!("{id} runtime"), secs, 10.0, timing));
    }
    checks
}

/// `adj(B(1))` from exact minors.
fn adjugate_at_one(id: AffineTypeId) -> Vec<Vec<Q>> {
    let b = build_b(&datum(id)).eval_q(&q(1));
    let n = b.len();
    let minor = |r: usize, col: usize| -> Vec<Vec<Q>> {
        (0..n).filter(|&i| i != r).map(|i| (0..n).filter(|&j| j != col).map(|j| b[i][j].clone()).collect()).collect()
    };
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = det_q(minor(j, i));
                    if (i + j) % 2 == 0 {
                        d
                    } else {
                        -d
                    }
                })
                .collect()
        })
        .collect()
}

fn criterion_2(timing: bool) -> Vec<Check> {
    let mut checks = Vec::new();
    for id in supported_types(8) {
        let Some(table) = golden::table_czero(&id) else { continue };
        let start = Instant::now();
        let d = datum(id);
        let computed = czero_of(&adjugate_at_one(id), &d.marks);
        let secs = start.elapsed().as_secs_f64();
        let mut ch = Check::exact(format!("{id} c0bar equals the table"), computed.as_ref() == Some(&table));
        if !ch.pass {
            ch = ch.with_detail(format!("computed {computed:?}, table {table}"));
        }
        checks.push(ch);
        checks.push(runtime(&format!("{id} runtime"), secs, 1.0, timing));
    }
    // the same value through the Taylor expansion of B(T)* used everywhere else
    for id in [AffineTypeId::new('A', 2, 1), AffineTypeId::new('G', 2, 1), AffineTypeId::new('D', 4, 3)] {
        let rep = analyze(&datum(id));
        checks.push(Check::exact(format!("{id} c0bar from B(T)* expansion"), Some(rep.czero) == golden::table_czero(&id)));
    }
    checks
}

fn criterion_3(timing: bool) -> Vec<Check> {
    let mut checks = Vec::new();
    for id in supported_types(8) {
        let start = Instant::now();
        let d = datum(id);
        let n = d.n_nodes();
        let mu = mu_brute(&d);
        checks.push(Check::exact(format!("{id} mu closed form"), mu == mu_closed_form(&d)));
        let b = d.b();
        let aug: Vec<Vec<Q>> = b.iter().zip(&mu).map(|(row, &m)| row.iter().chain([&m]).map(|&x| q(x)).collect()).collect();
        let r = rank_q(aug);
        checks.push(Check::exact(format!("{id} rank(B|mu) = |I|"), r == n && augmented_rank(&d) == n));
        // every solution of the zeta system has zeta = 4 a_0 / (a . mu)
        let zeta_ok = solve_t_coefficients(&d, &PivotRule::MinNorm).is_ok_and(|t| {
            let am: i64 = d.marks.iter().zip(&mu).map(|(a, m)| a * m).sum();
            t.zeta == Q::new((4 * d.marks[0]).into(), am.into())
        });
        checks.push(Check::exact(format!("{id} zeta = 4 a_0 / (a . mu)"), zeta_ok));
        let secs = start.elapsed().as_secs_f64();
        checks.push(runtime(&format!("{id} runtime"), secs, 1.0, timing));
    }
    for (id, expect) in [("C2~1", vec![46, 2, 46]), ("G2~1", vec![]), ("D4~3", vec![])] {
        let id: AffineTypeId = id.parse().expect("valid ids");
        let (g, rule) = gamma_vector(&datum(id));
        let positive = g.iter().all(|&x| x > 0);
        let matches = expect.is_empty() || g == expect;
        checks.push(Check::exact(format!("{id} gamma = {rule} is a positive integer vector"), positive && matches).with_detail(format!("{g:?}")));
    }
    checks
}

fn criterion_4(timing: bool) -> Vec<Check> {
    let order = 12;
    let mut checks = Vec::new();
    for id in ["A2~1", "C2~1", "G2~1"] {
        let start = Instant::now();
        let ctx = FormalContext::new(&datum(id.parse().expect("valid ids")));
        let k = ctx.dop.order();
        match ctx.solve_l(order) {
            Ok(l) => {
                checks.push(Check::exact(
                    format!("{id} D(T) L - g_reg = 0 through s^-{}", order + k + 1),
                    ctx.dop.apply(&l.pad(order + k)) == ctx.g_reg_formal(order + k),
                ));
                checks.push(Check::exact(format!("{id} F_0 closed form"), l.coeff(0) == &ctx.leading_l_closed_form()));
                checks.push(Check::exact(format!("{id} flip L(s) = -L(-s)"), l.flip() == l.reflect().scale(&-LaurentPoly::one())));
                let reversed = ctx.solve_l_with(&ctx.dop, order, true);
                checks.push(Check::exact(format!("{id} solution independent of elimination order"), reversed.is_ok_and(|r| r == l)));
            }
            Err(e) => checks.push(Check::error(format!("{id} solve"), Tolerance::Exact(crate::report::ExactTag::Exact), e)),
        }
        for node in 0..ctx.datum.n_nodes() {
            let rep = ctx.verify_commutation(node, 6, 6);
            let mut ch = Check::exact(format!("{id} commutation with x_{node} at (6,6)"), rep.ok);
            if let Some(m) = rep.mismatch {
                ch = ch.with_detail(m);
            }
            checks.push(ch);
        }
        checks.push(runtime(&format!("{id} runtime"), start.elapsed().as_secs_f64(), 60.0, timing));
    }
    checks
}

fn a2_setup() -> (CatOContext, DiagonalModuleData, DiagonalModuleData) {
    let ctx = CatOContext::new(&datum(AffineTypeId::new('A', 2, 1))).expect("A2~1 has a valid difference operator");
    let (v1, v2) = toy_a2_modules(c(1.0, 0.0));
    (ctx, v1, v2)
}

fn criterion_5() -> Vec<Check> {
    let mut checks = Vec::new();
    // manufactured: D = T - T^{-1} applied to 1/s
    let d1 = RealDifferenceOperator::new(vec![(1, 1.0), (-1, -1.0)]).expect("nonzero");
    for chi in [c(0.5, 0.0), c(0.3, 0.4)] {
        let g = RationalLogInput {
            log_terms: vec![],
            pole_terms: vec![PoleTerm { a: chi, l: 0, c: c(1.0, 0.0) }, PoleTerm { a: -chi, l: 0, c: c(-1.0, 0.0) }],
        };
        let name = format!("manufactured 1/s recovery, chi = {chi}");
        match RaySolver::from_input(d1.clone(), chi, &g) {
            Ok(sv) => {
                let dir = chi / chi.norm();
                let worst = [c(3.0, 0.5), c(7.0, -4.0), dir * c(3.0, 4.0)]
                    .iter()
                    .map(|&s| sv.evaluate(Eta::Up, s).map(|f| ((f - 1.0 / s) * s).norm()).unwrap_or(f64::INFINITY))
                    .fold(0.0, f64::max);
                checks.push(Check::bound(name, worst, 1e-8));
            }
            Err(e) => checks.push(Check::error(name, Tolerance::Bound(1e-8), e)),
        }
    }
    let (ctx, v1, v2) = a2_setup();
    let ev = match R0Evaluator::new(&ctx, &v1, &v2) {
        Ok(ev) => ev,
        Err(e) => {
            checks.push(Check::error("A2 toy block solver", Tolerance::Bound(1e-8), e));
            return checks;
        }
    };
    let sv = ev.block(0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let points: Vec<C64> = (0..50).map(|_| c(rng.gen_range(3.0..9.0), rng.gen_range(-6.0..6.0))).collect();
    let worst = points.iter().map(|&s| sv.residual(Eta::Up, s).unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    checks.push(Check::bound("functional equation residual at 50 random admissible s (A2 block, up)", worst, 1e-8));
    let worst = points[..10].iter().map(|&s| sv.residual(Eta::Down, -s).unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    checks.push(Check::bound("functional equation residual at 10 random admissible s (A2 block, down)", worst, 1e-8));
    // ψ ∈ {arg χ - π/3, arg χ, arg χ + π/3}, at points inside all three half-planes
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for &s in points.iter().filter(|s| s.re > 5.0 && s.im.abs() < 2.5).take(10) {
        let psis = [-PI / 3.0, 0.0, PI / 3.0];
        if !psis.iter().all(|&p| sv.in_domain(p, s)) {
            continue;
        }
        let vals: Vec<C64> = psis.iter().map(|&p| sv.evaluate_on_ray(p, s).unwrap_or(c(f64::NAN, 0.0))).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                worst = worst.max((vals[i] - vals[j]).norm() / vals[0].norm().max(1e-3));
            }
        }
        used += 1;
    }
    checks.push(Check::bound("ray independence, pairwise over three rays", if used > 0 { worst } else { f64::INFINITY }, 1e-8).with_detail(format!("{used} points")));
    // Watson: numeric kernel coefficients against the exact formal series, and decay of remainders
    match ctx.formal.solve_l(8) {
        Ok(l) => {
            let formal = evaluate_formal(&l, &v1, 0, &v2, 0);
            let numeric = sv.formal_coefficients();
            let worst = (0..=8).map(|n| (formal[n] - numeric[n]).norm() / formal[n].norm().max(1.0)).fold(0.0, f64::max);
            checks.push(Check::bound("Watson coefficients equal the formal series through order 8", worst, 1e-6));
            match verify_asymptotics(|s| sv.evaluate(Eta::Up, s), &formal[..9], (0.0, 0.5), &[8.0, 10.0, 12.5, 15.0], 3) {
                Ok(rep) => checks.push(Check::exact("Watson remainders decay monotonically through order 8", rep.all_decay).with_detail(format!("{:?}", rep.decays))),
                Err(e) => checks.push(Check::error("Watson remainders", Tolerance::Exact(crate::report::ExactTag::Exact), e)),
            }
        }
        Err(e) => checks.push(Check::error("formal L", Tolerance::Bound(1e-6), e)),
    }
    checks
}

fn criterion_6() -> Vec<Check> {
    let mut checks = Vec::new();
    let (ctx, v1, v2) = a2_setup();
    let run = || -> ayang_core::Result<Vec<Check>> {
        let mut out = Vec::new();
        let e12 = R0Evaluator::new(&ctx, &v1, &v2)?;
        let e21 = R0Evaluator::new(&ctx, &v2, &v1)?;
        let mut worst: f64 = 0.0;
        for s in [c(5.0, 1.0), c(3.7, -2.5), c(0.4, 6.0), c(-2.0, 5.5)] {
            worst = worst.max(unitarity_residual(&e12, &e21, s)?);
        }
        out.push(Check::bound("unitarity", worst, 1e-8));
        let (a, b) = (c(0.7, 0.2), c(-0.4, 0.3));
        let moved = R0Evaluator::new(&ctx, &v1.translated(a), &v2.translated(b))?;
        let mut worst: f64 = 0.0;
        for (eta, s) in [(Eta::Up, c(5.0, 1.0)), (Eta::Down, c(-4.0, 2.0)), (Eta::Up, c(1.0, 5.0))] {
            worst = worst.max(exp_distance(&moved.exponents(eta, s)?, &e12.exponents(eta, s + a - b)?));
        }
        out.push(Check::bound("shift covariance", worst, 1e-8));
        let v3 = v1.translated(c(0.3, -0.2));
        let s1 = c(2.5, 0.5);
        let big = R0Evaluator::new(&ctx, &drinfeld_tensor(&v1, s1, &v2)?, &v3)?;
        let e13 = R0Evaluator::new(&ctx, &v1, &v3)?;
        let e23 = R0Evaluator::new(&ctx, &v2, &v3)?;
        let mut worst: f64 = 0.0;
        for (eta, s2) in [(Eta::Up, c(5.0, 0.5)), (Eta::Down, c(-8.0, 1.0))] {
            let lhs = big.exponents(eta, s2)?;
            let f13 = e13.exponents(eta, s1 + s2)?;
            let f23 = e23.exponents(eta, s2)?;
            let n3 = v3.dim();
            let mut rhs = Vec::new();
            for x in 0..v1.dim() {
                for y in 0..v2.dim() {
                    for w in 0..n3 {
                        rhs.push(f13[x * n3 + w] + f23[y * n3 + w]);
                    }
                }
            }
            worst = worst.max(exp_distance(&lhs, &rhs));
        }
        out.push(Check::bound("cabling on a triple product", worst, 1e-8));
        let up: Vec<C64> = (0..30).map(|k| C64::from_polar(5.0, -1.2 + 2.4 * k as f64 / 29.0) + 4.0).collect();
        let down: Vec<C64> = up.iter().map(|s| -s).collect();
        let probes = [c(0.0, 9.0), c(-7.0, -3.0), c(6.0, 2.0)];
        let (mut resid, mut eta_gap, mut infinity): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for x in 0..v1.dim() {
            for y in 0..v2.dim() {
                let fu = rational_fit(&normalized_samples(&e12, (0, 0), (x, y), Eta::Up, &up)?, 10, 1e-6)?;
                let fd = rational_fit(&normalized_samples(&e12, (0, 0), (x, y), Eta::Down, &down)?, 10, 1e-6)?;
                resid = resid.max(fu.residual).max(fd.residual);
                for p in probes {
                    eta_gap = eta_gap.max((fu.eval(p) - fd.eval(p)).norm());
                }
                infinity = infinity.max((fu.at_infinity() - 1.0).norm());
            }
        }
        out.push(Check::bound("rational fit residual of normalized entries", resid, 1e-6));
        out.push(Check::bound("rational fit eta-independence", eta_gap, 1e-6));
        out.push(Check::bound("normalized entries tend to 1 at infinity", infinity, 1e-6));
        let l = ctx.formal.solve_l(8)?;
        let mut worst: f64 = 0.0;
        for x in 0..v1.dim() {
            for y in 0..v2.dim() {
                let formal = evaluate_formal(&l, &v1, x, &v2, y);
                let numeric = e12.block(x, y).formal_coefficients();
                for n in 0..=8 {
                    worst = worst.max((formal[n] - numeric[n]).norm() / formal[n].norm().max(1.0));
                }
            }
        }
        out.push(Check::bound("asymptotic match with formal L through order 8", worst, 1e-6));
        let lead = evaluate_formal(&Series::from_coeffs(vec![ctx.formal.leading_l_closed_form()]), &v1, 0, &v2, 0);
        out.push(Check::bound("leading coefficient against its closed form", (lead[0] - e12.block(0, 0).formal_coefficients()[0]).norm(), 1e-9));
        Ok(out)
    };
    match run() {
        Ok(cs) => checks.extend(cs),
        Err(e) => checks.push(Check::error("catO suite", Tolerance::Bound(1e-8), e)),
    }
    checks
}

fn samples() -> Vec<C64> {
    (0..20).map(|k| C64::from_polar(3.0 + 0.35 * k as f64, 0.9 * k as f64)).collect()
}

fn criterion_7(reports: &mut BTreeMap<String, f64>) -> Vec<Check> {
    let mut checks = Vec::new();
    let data = synthetic_instance();
    let cap = 4;
    let run = |checks: &mut Vec<Check>, reports: &mut BTreeMap<String, f64>| -> ayang_core::Result<()> {
        let exact = recurse_rminus(&data, cap, Mode::Exact)?;
        let series = recurse_rminus(&data, cap, Mode::Series(60))?;
        let pts = samples();
        let worst = pts.iter().map(|&s| (exact.eval(s) - brute_force_rminus(&data, cap, s)).cmax()).fold(0.0, f64::max);
        checks.push(Check::bound("exact mode equals the dense-solve oracle at 20 points", worst, 1e-10));
        let far: Vec<C64> = pts.iter().map(|s| s * 3.0).collect();
        let worst = far.iter().map(|&s| (exact.eval(s) - series.eval(s)).cmax()).fold(0.0, f64::max);
        checks.push(Check::bound("series mode equals exact mode", worst, 1e-10));
        let pw = data.product_weights();
        let mut tri = true;
        for beta in &exact.betas {
            for &s in &pts[..4] {
                for m in [exact.component(beta, s), series.component(beta, s)] {
                    let m = m.expect("beta is in the cone");
                    for i in 0..data.dim() {
                        for j in 0..data.dim() {
                            let on = pw[i].0.iter().zip(&pw[j].0).zip(beta).all(|((t, s), b)| *t == s - b)
                                && pw[i].1.iter().zip(&pw[j].1).zip(beta).all(|((t, s), b)| *t == s + b);
                            if !on && m[(i, j)] != c(0.0, 0.0) {
                                tri = false;
                            }
                        }
                    }
                }
            }
        }
        checks.push(Check::exact("triangularity", tri));
        let n = data.dim();
        let id = ayang_core::rminus::CMat::identity(n, n);
        let trivial = recurse_rminus(&data.abelian(), cap, Mode::Exact)?;
        let norm_ok = series.series.as_ref().is_some_and(|s| s.iter().all(|co| co[0].iter().all(|z| z.is_zero())))
            && pts.iter().all(|&s| trivial.eval(s) == id);
        checks.push(Check::exact("normalization", norm_ok));
        checks.push(Check::bound("intertwiner residual at rho", verify_intertwiner(&data, &exact, &data.rho(), &pts), 1e-10));
        checks.push(Check::bound("intertwiner residual at a generic h", verify_intertwiner(&data, &exact, &generic_h(2), &pts), 1e-10));
        let mut bad: OperatorData = data.clone();
        let w = &mut bad.support[0].1;
        let pos = w.iter().position(|z| z.norm() > 0.0).expect("W is nonzero");
        w[pos] += c(0.5, 0.0);
        let rb = recurse_rminus(&bad, cap, Mode::Exact)?;
        let r = verify_intertwiner(&bad, &rb, &generic_h(2), &pts);
        checks.push(Check::exact("fault-injected W is flagged (residual above 1e-3)", r > 1e-3).with_detail(format!("residual {r:.3e}")));
        // cocycle on evaluation-type data, including the degenerate probe s2 = 0
        let triple = sl2_triple(c(1.0, 0.0), [c(0.3, 0.0), c(-0.5, 0.2), c(0.1, -0.4)]);
        let mut worst: f64 = 0.0;
        for (s1, s2) in [(c(2.0, 0.5), c(-1.5, 1.0)), (c(0.7, -2.0), c(3.0, 0.1)), (c(1.1, 0.3), c(0.0, 0.0))] {
            worst = worst.max(verify_cocycle(&triple, 3, s1, s2)?);
        }
        checks.push(Check::bound("cocycle on an evaluation-type triple", worst, 1e-8));
        abelian_assembly(checks)?;
        // nonabelian QYBE is a report: no R^0 is available for these data, so R = R^+ R^-
        let pair = |w: &[(Weight, ayang_core::rminus::CMat)], i: usize, j: usize| OperatorData {
            n_simple: 1,
            hbar: triple.hbar,
            f1: triple.factors[i].clone(),
            f2: triple.factors[j].clone(),
            support: w.to_vec(),
            missing: vec![],
            consistent: false,
        };
        let full = |i: usize, j: usize, w: &[(Weight, ayang_core::rminus::CMat)], s: C64| -> ayang_core::Result<ayang_core::rminus::CMat> {
            let fwd = recurse_rminus(&pair(w, i, j), 3, Mode::Exact)?.eval(s);
            let swapped_w: Vec<_> = w.iter().map(|(a, m)| (a.clone(), flip_matrix(2, 2) * m * flip_matrix(2, 2).transpose())).collect();
            let back = recurse_rminus(&pair(&swapped_w, j, i), 3, Mode::Exact)?.eval(-s);
            assemble_full_r(&fwd, &back, &ayang_core::rminus::CMat::identity(4, 4), 2, 2)
        };
        let (s1, s2) = (c(2.0, 0.5), c(1.5, -1.0));
        let q = qybe_residual(&full(0, 1, &triple.w12, s1)?, &full(0, 2, &triple.w13, s1 + s2)?, &full(1, 2, &triple.w23, s2)?, [2, 2, 2]);
        reports.insert("qybe residual, evaluation triple with R0 = 1 (report only)".into(), q);
        Ok(())
    };
    if let Err(e) = run(&mut checks, reports) {
        checks.push(Check::error("R^- suite", Tolerance::Bound(1e-10), e));
    }
    checks
}

/// With every `x` and `W` zero, `R = R^0`; QYBE and unitarity on three toy modules.
fn abelian_assembly(checks: &mut Vec<Check>) -> ayang_core::Result<()> {
    let (ctx, v1, v2) = a2_setup();
    let v3 = v2.translated(c(0.3, -0.2));
    let e12 = R0Evaluator::new(&ctx, &v1, &v2)?;
    let e21 = R0Evaluator::new(&ctx, &v2, &v1)?;
    let e13 = R0Evaluator::new(&ctx, &v1, &v3)?;
    let e23 = R0Evaluator::new(&ctx, &v2, &v3)?;
    let full = |e: &R0Evaluator, s: C64| -> ayang_core::Result<ayang_core::rminus::CMat> {
        let n = e.dim1 * e.dim2;
        let id = ayang_core::rminus::CMat::identity(n, n);
        assemble_full_r(&id, &id, &e.matrix(Eta::Up, s)?, e.dim1, e.dim2)
    };
    let (s1, s2) = (c(4.0, 1.0), c(3.0, -2.0));
    let r12 = full(&e12, s1)?;
    let q = qybe_residual(&r12, &full(&e13, s1 + s2)?, &full(&e23, s2)?, [v1.dim(), v2.dim(), v3.dim()]);
    checks.push(Check::bound("abelian assembled R satisfies QYBE", q, 1e-8));
    let p = flip_matrix(v1.dim(), v2.dim());
    let down = e21.matrix(Eta::Down, -s1)?;
    let n = v1.dim() * v2.dim();
    let u = (&r12 * &p * down * p.transpose() - ayang_core::rminus::CMat::identity(n, n)).cmax();
    checks.push(Check::bound("abelian assembled R is unitary", u, 1e-8));
    Ok(())
}
