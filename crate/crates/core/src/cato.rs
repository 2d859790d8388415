//! The abelian R-matrix on diagonal category-O data.
//!
//! Each basis vector carries, per node `i`, the zeros `Z` and poles `P` of the eigenvalue of
//! `ξ_i(u) = Π(u-z)/(u-p)`. All blocks are then closed-form `RationalLogInput`s and the
//! resummation module turns them into the meromorphic `R^{0,η}`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cartan::{build_cartan, AffineCartanDatum, AffineTypeId};
use crate::error::{Error, Result};
use crate::exact::ExactQ;
use crate::laurent::{q_to_f64, Q};
use crate::resum::{Eta, LogTerm, PoleTerm, RationalLogInput, RaySolver, RealDifferenceOperator};
use crate::series::{FormalContext, PrimTensorSeries};

/// Zeros closer than this to a pole cancel against it.
const CANCEL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub zeros: Vec<C64>,
    pub poles: Vec<C64>,
}

impl Spectrum {
    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty() && self.poles.is_empty()
    }

    /// Cancel coincident zero/pole pairs.
    pub fn reduced(&self) -> Spectrum {
        let mut zeros = self.zeros.clone();
        let mut poles = Vec::new();
        for &p in &self.poles {
            if let Some(k) = zeros.iter().position(|&z| (z - p).norm() < CANCEL_TOL) {
                zeros.remove(k);
            } else {
                poles.push(p);
            }
        }
        Spectrum { zeros, poles }
    }

    pub fn translated(&self, a: C64) -> Spectrum {
        Spectrum { zeros: self.zeros.iter().map(|z| z + a).collect(), poles: self.poles.iter().map(|p| p + a).collect() }
    }

    /// `Σ_{(z,p)} log((u-z)/(u-p))`, pairing zeros and poles in order.
    pub fn log_eval(&self, u: C64) -> Result<C64> {
        let g = RationalLogInput {
            log_terms: self.zeros.iter().zip(&self.poles).map(|(&a, &b)| LogTerm { a, b, c: C64::new(1.0, 0.0) }).collect(),
            pole_terms: vec![],
        };
        g.eval(u)
    }

    /// `Π (u-z)/(u-p)`.
    pub fn xi(&self, u: C64) -> C64 {
        let num: C64 = self.zeros.iter().map(|z| u - z).product();
        let den: C64 = self.poles.iter().map(|p| u - p).product();
        num / den
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModuleVector {
    pub name: String,
    /// `μ(h_i)` per node.
    pub weight_h: Vec<Q>,
    /// `μ(d)`.
    pub weight_d: Q,
    /// One spectrum per node.
    pub spectra: Vec<Spectrum>,
}

/// Validated diagonal module data. Serialized with string node keys and `{num, den}` weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModuleData", into = "RawModuleData")]
pub struct DiagonalModuleData {
    pub type_id: AffineTypeId,
    pub hbar: C64,
    pub vectors: Vec<ModuleVector>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawVector {
    name: String,
    weight: BTreeMap<String, ExactQ>,
    spectra: BTreeMap<String, Spectrum>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawModuleData {
    #[serde(rename = "type")]
    type_id: String,
    hbar: C64,
    vectors: Vec<RawVector>,
}

impl TryFrom<RawModuleData> for DiagonalModuleData {
    type Error = Error;
    fn try_from(raw: RawModuleData) -> Result<Self> {
        let type_id: AffineTypeId = raw.type_id.parse()?;
        let datum = build_cartan(type_id)?;
        let n = datum.n_nodes();
        let mut vectors = Vec::with_capacity(raw.vectors.len());
        for rv in raw.vectors {
            let mut weight_h = vec![Q::from_integer(0.into()); n];
            let mut weight_d = Q::from_integer(0.into());
            for (key, val) in &rv.weight {
                let x = Q::try_from(val)?;
                if key == "d" {
                    weight_d = x;
                } else {
                    let i = parse_node(key.strip_prefix('h').unwrap_or(key), n)?;
                    weight_h[i] = x;
                }
            }
            let mut spectra = vec![Spectrum::default(); n];
            for (key, sp) in rv.spectra {
                spectra[parse_node(&key, n)?] = sp;
            }
            vectors.push(ModuleVector { name: rv.name, weight_h, weight_d, spectra });
        }
        let data = DiagonalModuleData { type_id, hbar: raw.hbar, vectors };
        data.validate(&datum)?;
        Ok(data)
    }
}

impl From<DiagonalModuleData> for RawModuleData {
    fn from(d: DiagonalModuleData) -> Self {
        RawModuleData {
            type_id: d.type_id.to_string(),
            hbar: d.hbar,
            vectors: d
                .vectors
                .into_iter()
                .map(|v| {
                    let mut weight: BTreeMap<String, ExactQ> =
                        v.weight_h.iter().enumerate().map(|(i, x)| (format!("h{i}"), ExactQ::from(x))).collect();
                    weight.insert("d".into(), ExactQ::from(&v.weight_d));
                    let spectra = v
                        .spectra
                        .into_iter()
                        .enumerate()
                        .filter(|(_, s)| !s.is_empty())
                        .map(|(i, s)| (i.to_string(), s))
                        .collect();
                    RawVector { name: v.name, weight, spectra }
                })
                .collect(),
        }
    }
}

fn parse_node(key: &str, n: usize) -> Result<usize> {
    match key.parse::<usize>() {
        Ok(i) if i < n => Ok(i),
        _ => Err(Error::InvalidData(format!("bad node key {key:?}"))),
    }
}

impl DiagonalModuleData {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn validate(&self, datum: &AffineCartanDatum) -> Result<()> {
        if datum.id != self.type_id {
            return Err(Error::InvalidData(format!("data is for {} but datum is {}", self.type_id, datum.id)));
        }
        if self.hbar.norm() == 0.0 || !self.hbar.is_finite() {
            return Err(Error::InvalidData("ħ must be a nonzero finite number".into()));
        }
        let n = datum.n_nodes();
        for v in &self.vectors {
            if v.spectra.len() != n || v.weight_h.len() != n {
                return Err(Error::InvalidData(format!("vector {} does not cover all {n} nodes", v.name)));
            }
            for (i, sp) in v.spectra.iter().enumerate() {
                if sp.zeros.len() != sp.poles.len() {
                    return Err(Error::InvalidData(format!("vector {} node {i}: |Z| != |P|", v.name)));
                }
                if sp.reduced().zeros.len() != sp.zeros.len() {
                    return Err(Error::InvalidData(format!("vector {} node {i}: Z and P overlap", v.name)));
                }
                let lhs = self.hbar * datum.d[i] as f64 * q_to_f64(&v.weight_h[i]);
                let rhs: C64 = sp.poles.iter().sum::<C64>() - sp.zeros.iter().sum::<C64>();
                let scale = 1.0 + sp.poles.iter().chain(&sp.zeros).map(|z| z.norm()).sum::<f64>();
                if (lhs - rhs).norm() > 1e-9 * scale {
                    return Err(Error::InvalidData(format!(
                        "vector {} node {i}: ħ d_i μ(h_i) = {lhs} but ΣP - ΣZ = {rhs}",
                        v.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// All spectra translated by `a`: the data of `V(a)`.
    pub fn translated(&self, a: C64) -> DiagonalModuleData {
        let mut out = self.clone();
        for v in &mut out.vectors {
            for sp in &mut v.spectra {
                *sp = sp.translated(a);
            }
        }
        out
    }
}

/// Eigenvalue of `ħ t_{i,r}` on vector `v`: `Σ (p^{r+1} - z^{r+1})/(r+1)`.
pub fn t_mode(data: &DiagonalModuleData, v: usize, i: usize, r: u32) -> C64 {
    let sp = &data.vectors[v].spectra[i];
    let s: C64 = sp.poles.iter().map(|p| p.powu(r + 1)).sum::<C64>() - sp.zeros.iter().map(|z| z.powu(r + 1)).sum::<C64>();
    s / (r as f64 + 1.0)
}

/// Eigenvalue of `ħ c_r = ħ Σ a_i t_{i,r}`.
pub fn c_mode(datum: &AffineCartanDatum, data: &DiagonalModuleData, v: usize, r: u32) -> C64 {
    (0..datum.n_nodes()).map(|i| datum.marks[i] as f64 * t_mode(data, v, i, r)).sum()
}

/// `τ_ij(s)` on `v ⊗ w` as a sum of logarithms: `Σ_{a∈Z} t_j(a+s) - Σ_{b∈P} t_j(b+s)`.
pub fn tau_input(d1: &DiagonalModuleData, v: usize, d2: &DiagonalModuleData, w: usize, i: usize, j: usize) -> RationalLogInput {
    let si = &d1.vectors[v].spectra[i];
    let sj = &d2.vectors[w].spectra[j];
    let mut g = RationalLogInput::default();
    for (sign, points) in [(1.0, &si.zeros), (-1.0, &si.poles)] {
        for &a in points.iter() {
            for (&z, &p) in sj.zeros.iter().zip(&sj.poles) {
                // log((s + a - z)/(s + a - p))
                g.log_terms.push(LogTerm { a: z - a, b: p - a, c: C64::new(sign, 0.0) });
            }
        }
    }
    g
}

pub fn tau_eval(d1: &DiagonalModuleData, v: usize, d2: &DiagonalModuleData, w: usize, i: usize, j: usize, s: C64) -> Result<C64> {
    tau_input(d1, v, d2, w, i, j).eval(s)
}

/// Merge log terms with identical endpoints and drop the ones that cancel.
fn simplify(g: &RationalLogInput) -> RationalLogInput {
    let mut merged: Vec<LogTerm> = Vec::new();
    for t in &g.log_terms {
        if t.a == t.b {
            continue;
        }
        if let Some(m) = merged.iter_mut().find(|m| m.a == t.a && m.b == t.b) {
            m.c += t.c;
        } else if let Some(m) = merged.iter_mut().find(|m| m.a == t.b && m.b == t.a) {
            m.c -= t.c;
        } else {
            merged.push(*t);
        }
    }
    merged.retain(|t| t.c.norm() > 1e-14);
    let mut poles: Vec<PoleTerm> = Vec::new();
    for t in &g.pole_terms {
        if let Some(m) = poles.iter_mut().find(|m| m.a == t.a && m.l == t.l) {
            m.c += t.c;
        } else {
            poles.push(*t);
        }
    }
    poles.retain(|t| t.c.norm() > 0.0);
    RationalLogInput { log_terms: merged, pole_terms: poles }
}

/// Type-level data shared by every block: `B(T)*`, `c̄₀`, and `D = (T - T^{-1}) det B(T)`.
#[derive(Clone, Debug)]
pub struct CatOContext {
    pub formal: FormalContext,
    pub d: RealDifferenceOperator,
}

impl CatOContext {
    pub fn new(datum: &AffineCartanDatum) -> Result<Self> {
        let formal = FormalContext::new(datum);
        let d = RealDifferenceOperator::from_laurent(&formal.dop.d)?;
        Ok(CatOContext { formal, d })
    }

    pub fn datum(&self) -> &AffineCartanDatum {
        &self.formal.datum
    }

    fn check(&self, data: &DiagonalModuleData) -> Result<()> {
        data.validate(self.datum())
    }
}

/// `g_reg` on the block `v ⊗ w`, in closed form.
pub fn g_reg_block(ctx: &CatOContext, d1: &DiagonalModuleData, v: usize, d2: &DiagonalModuleData, w: usize) -> Result<RationalLogInput> {
    if d1.hbar != d2.hbar {
        return Err(Error::ShapeMismatch("the two modules use different ħ".into()));
    }
    let hbar = d1.hbar;
    let chi = hbar / 2.0;
    let n = ctx.datum().n_nodes();
    let mut g = RationalLogInput::default();
    for i in 0..n {
        for j in 0..n {
            let entry = ctx.formal.bstar().get(j, i);
            if entry.is_zero() {
                continue;
            }
            let tau = tau_input(d1, v, d2, w, i, j);
            if tau.log_terms.is_empty() {
                continue;
            }
            // T^r τ(s) = τ(s - rχ)
            for (r, c) in entry.terms() {
                g = g.add(&tau.translate(-chi * r as f64).scale(C64::new(q_to_f64(c), 0.0)));
            }
        }
    }
    let cz = q_to_f64(&ctx.formal.report.czero);
    let c0v = c_mode(ctx.datum(), d1, v, 0);
    let c1v = c_mode(ctx.datum(), d1, v, 1);
    let c0w = c_mode(ctx.datum(), d2, w, 0);
    let c1w = c_mode(ctx.datum(), d2, w, 1);
    let zero = C64::new(0.0, 0.0);
    g.pole_terms.push(PoleTerm { a: zero, l: 1, c: -cz * c0v * c0w });
    g.pole_terms.push(PoleTerm { a: zero, l: 2, c: -2.0 * cz * (c0v * c1w - c1v * c0w) });
    let g = simplify(&g);
    let taylor = g.taylor_at_infinity(2);
    let scale = g.magnitude().max(1.0) * g.scale_bound().powi(3);
    for co in &taylor {
        if co.norm() > 1e-10 * scale {
            return Err(Error::RegularizationMismatch(co.norm()));
        }
    }
    Ok(g)
}

/// Resummation solvers for every block of `V1 ⊗ V2`, row-major in `(v, w)`.
#[derive(Clone, Debug)]
pub struct R0Evaluator {
    pub dim1: usize,
    pub dim2: usize,
    pub solvers: Vec<RaySolver>,
}

impl R0Evaluator {
    pub fn new(ctx: &CatOContext, d1: &DiagonalModuleData, d2: &DiagonalModuleData) -> Result<Self> {
        ctx.check(d1)?;
        ctx.check(d2)?;
        let chi = d1.hbar / 2.0;
        let pairs: Vec<(usize, usize)> = (0..d1.dim()).flat_map(|v| (0..d2.dim()).map(move |w| (v, w))).collect();
        let solvers = pairs
            .par_iter()
            .map(|&(v, w)| RaySolver::from_input(ctx.d.clone(), chi, &g_reg_block(ctx, d1, v, d2, w)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(R0Evaluator { dim1: d1.dim(), dim2: d2.dim(), solvers })
    }

    pub fn block(&self, v: usize, w: usize) -> &RaySolver {
        &self.solvers[v * self.dim2 + w]
    }

    /// `f^η_{v,w}(s)`, the exponent of the `(v,w)` entry.
    pub fn exponent(&self, v: usize, w: usize, eta: Eta, s: C64) -> Result<C64> {
        self.block(v, w).evaluate(eta, s)
    }

    /// All exponents, row-major.
    pub fn exponents(&self, eta: Eta, s: C64) -> Result<Vec<C64>> {
        self.solvers.par_iter().map(|sv| sv.evaluate(eta, s)).collect()
    }

    /// The diagonal matrix `R^{0,η}(s)` on the product basis.
    pub fn matrix(&self, eta: Eta, s: C64) -> Result<DMatrix<C64>> {
        let f = self.exponents(eta, s)?;
        Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(f.len(), f.into_iter().map(|x| x.exp()))))
    }
}

pub fn r0_block(ctx: &CatOContext, d1: &DiagonalModuleData, d2: &DiagonalModuleData, eta: Eta, s: C64) -> Result<DMatrix<C64>> {
    R0Evaluator::new(ctx, d1, d2)?.matrix(eta, s)
}

/// `V1 ⊗_s V2`: `ξ_i(u) ↦ ξ_i(u - s) ⊗ ξ_i(u)` on the product basis.
pub fn drinfeld_tensor(d1: &DiagonalModuleData, s: C64, d2: &DiagonalModuleData) -> Result<DiagonalModuleData> {
    if d1.type_id != d2.type_id || d1.hbar != d2.hbar {
        return Err(Error::ShapeMismatch("tensor factors disagree on type or ħ".into()));
    }
    let mut vectors = Vec::with_capacity(d1.dim() * d2.dim());
    for v in &d1.vectors {
        for w in &d2.vectors {
            let spectra = v
                .spectra
                .iter()
                .zip(&w.spectra)
                .map(|(a, b)| {
                    let a = a.translated(s);
                    Spectrum {
                        zeros: a.zeros.iter().chain(&b.zeros).copied().collect(),
                        poles: a.poles.iter().chain(&b.poles).copied().collect(),
                    }
                    .reduced()
                })
                .collect();
            vectors.push(ModuleVector {
                name: format!("{}⊗{}", v.name, w.name),
                weight_h: v.weight_h.iter().zip(&w.weight_h).map(|(x, y)| x + y).collect(),
                weight_d: &v.weight_d + &w.weight_d,
                spectra,
            });
        }
    }
    Ok(DiagonalModuleData { type_id: d1.type_id, hbar: d1.hbar, vectors })
}

/// Formal series coefficients evaluated on `v ⊗ w`: `t_{i,a} ↦ t_mode/ħ`, `ħ ↦ data.hbar`.
pub fn evaluate_formal(series: &PrimTensorSeries, d1: &DiagonalModuleData, v: usize, d2: &DiagonalModuleData, w: usize) -> Vec<C64> {
    let h = d1.hbar;
    series
        .coeffs()
        .iter()
        .map(|c| {
            c.iter()
                .map(|(&(i, a, j, b), coef)| coef.eval_c(h) * t_mode(d1, v, i, a) / h * t_mode(d2, w, j, b) / h)
                .sum()
        })
        .collect()
}

/// Barycentric rational interpolant `r(s) = Σ w_j y_j/(s - z_j) / Σ w_j/(s - z_j)`.
#[derive(Clone, Debug, Serialize)]
pub struct RationalFit {
    pub degree: usize,
    pub support: Vec<C64>,
    pub values: Vec<C64>,
    pub weights: Vec<C64>,
    /// Largest relative error over the held-out samples.
    pub residual: f64,
}

impl RationalFit {
    pub fn eval(&self, s: C64) -> C64 {
        let mut num = C64::new(0.0, 0.0);
        let mut den = C64::new(0.0, 0.0);
        for ((z, y), w) in self.support.iter().zip(&self.values).zip(&self.weights) {
            if s == *z {
                return *y;
            }
            let k = w / (s - z);
            num += k * y;
            den += k;
        }
        num / den
    }

    pub fn at_infinity(&self) -> C64 {
        let num: C64 = self.weights.iter().zip(&self.values).map(|(w, y)| w * y).sum();
        let den: C64 = self.weights.iter().sum();
        num / den
    }
}

fn fit_fixed_degree(fit: &[(C64, C64)], d: usize) -> Option<RationalFit> {
    let m = d + 1;
    if fit.len() < 2 * m {
        return None;
    }
    // greedy support selection, as in AAA
    let mut support: Vec<usize> = Vec::new();
    let mean: C64 = fit.iter().map(|p| p.1).sum::<C64>() / fit.len() as f64;
    let mut current: Vec<C64> = vec![mean; fit.len()];
    let mut weights: Vec<C64> = Vec::new();
    for _ in 0..m {
        let next = (0..fit.len())
            .filter(|k| !support.contains(k))
            .max_by(|&a, &b| (fit[a].1 - current[a]).norm().total_cmp(&(fit[b].1 - current[b]).norm()))?;
        support.push(next);
        let rows: Vec<usize> = (0..fit.len()).filter(|k| !support.contains(k)).collect();
        let nr = rows.len().max(support.len());
        let mut loewner = DMatrix::<C64>::zeros(nr, support.len());
        for (ri, &k) in rows.iter().enumerate() {
            for (ci, &j) in support.iter().enumerate() {
                loewner[(ri, ci)] = (fit[k].1 - fit[j].1) / (fit[k].0 - fit[j].0);
            }
        }
        let svd = loewner.svd(false, true);
        let vt = svd.v_t?;
        let imin = (0..svd.singular_values.len()).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))?;
        weights = vt.row(imin).iter().map(|x| x.conj()).collect();
        let r = RationalFit {
            degree: support.len() - 1,
            support: support.iter().map(|&k| fit[k].0).collect(),
            values: support.iter().map(|&k| fit[k].1).collect(),
            weights: weights.clone(),
            residual: 0.0,
        };
        current = fit.iter().map(|p| r.eval(p.0)).collect();
    }
    Some(RationalFit {
        degree: d,
        support: support.iter().map(|&k| fit[k].0).collect(),
        values: support.iter().map(|&k| fit[k].1).collect(),
        weights,
        residual: 0.0,
    })
}

/// Fit samples by a barycentric rational function of the smallest degree `≤ max_degree` whose
/// relative error on every third (held-out) sample is below `tol`.
pub fn rational_fit(samples: &[(C64, C64)], max_degree: usize, tol: f64) -> Result<RationalFit> {
    let (holdout, fit): (Vec<_>, Vec<_>) = samples.iter().enumerate().partition(|(k, _)| k % 3 == 2);
    let holdout: Vec<(C64, C64)> = holdout.into_iter().map(|(_, p)| *p).collect();
    let fit: Vec<(C64, C64)> = fit.into_iter().map(|(_, p)| *p).collect();
    let mut best = f64::INFINITY;
    for d in 0..=max_degree {
        let Some(mut r) = fit_fixed_degree(&fit, d) else { break };
        let res = holdout.iter().map(|&(s, y)| (r.eval(s) - y).norm() / y.norm().max(1.0)).fold(0.0, f64::max);
        r.residual = res;
        if res < tol {
            return Ok(r);
        }
        best = best.min(res);
    }
    Err(Error::FitDegreeExceeded { degree: max_degree, residual: best })
}

/// Lower `v` by `α_k` at position `c`: `ξ_i(u)` gains `(u - c - ħB_ik/2)/(u - c + ħB_ik/2)`.
pub fn lower(datum: &AffineCartanDatum, hbar: C64, v: &ModuleVector, k: usize, c: C64, name: &str) -> ModuleVector {
    let b = datum.b();
    let spectra = v
        .spectra
        .iter()
        .enumerate()
        .map(|(i, sp)| {
            let half = hbar * b[i][k] as f64 / 2.0;
            if b[i][k] == 0 {
                return sp.clone();
            }
            let mut s = sp.clone();
            s.zeros.push(c + half);
            s.poles.push(c - half);
            s.reduced()
        })
        .collect();
    ModuleVector {
        name: name.to_string(),
        weight_h: v.weight_h.iter().enumerate().map(|(i, x)| x - Q::from_integer(datum.a[i][k].into())).collect(),
        weight_d: v.weight_d.clone(),
        spectra,
    }
}

/// Highest vector of a level-zero toy module: `μ(h_p) = 1`, `μ(h_0) = -1`, spectra centred at
/// `c` and `c0`.
fn toy_top(n: usize, hbar: C64, p: usize, c: C64, c0: C64) -> ModuleVector {
    let mut spectra = vec![Spectrum::default(); n];
    spectra[p] = Spectrum { zeros: vec![c - hbar / 2.0], poles: vec![c + hbar / 2.0] };
    spectra[0] = Spectrum { zeros: vec![c0 + hbar / 2.0], poles: vec![c0 - hbar / 2.0] };
    let mut weight_h = vec![Q::from_integer(0.into()); n];
    weight_h[p] = Q::from_integer(1.into());
    weight_h[0] = Q::from_integer((-1).into());
    ModuleVector { name: "top".into(), weight_h, weight_d: Q::from_integer(0.into()), spectra }
}

/// Two level-zero diagonal modules for `A2~1`, of dimensions 3 and 2, built by lowering.
pub fn toy_a2_modules(hbar: C64) -> (DiagonalModuleData, DiagonalModuleData) {
    let datum = build_cartan(AffineTypeId::new('A', 2, 1)).expect("A2~1 is supported");
    let n = datum.n_nodes();
    let c = C64::new(0.2, 0.1);
    let v0 = toy_top(n, hbar, 1, c, C64::new(-0.4, 0.05));
    let v1 = lower(&datum, hbar, &v0, 1, c - hbar / 2.0, "f1");
    let v2 = lower(&datum, hbar, &v1, 2, C64::new(-0.3, 0.2), "f2f1");
    let e = C64::new(-0.15, -0.1);
    let w0 = toy_top(n, hbar, 2, e, C64::new(0.35, 0.0));
    let w1 = lower(&datum, hbar, &w0, 2, e - hbar / 2.0, "f2");
    let id = datum.id;
    (
        DiagonalModuleData { type_id: id, hbar, vectors: vec![v0, v1, v2] },
        DiagonalModuleData { type_id: id, hbar, vectors: vec![w0, w1] },
    )
}

/// `max |R^{0,↑}_{V1,V2}(s) · flip R^{0,↓}_{V2,V1}(-s) flip - 1|` over the diagonal.
pub fn unitarity_residual(e12: &R0Evaluator, e21: &R0Evaluator, s: C64) -> Result<f64> {
    let up = e12.exponents(Eta::Up, s)?;
    let down = e21.exponents(Eta::Down, -s)?;
    let mut worst: f64 = 0.0;
    for v in 0..e12.dim1 {
        for w in 0..e12.dim2 {
            let x = (up[v * e12.dim2 + w] + down[w * e21.dim2 + v]).exp() - 1.0;
            worst = worst.max(x.norm());
        }
    }
    Ok(worst)
}

/// Largest relative entrywise difference between two diagonal exponent lists, compared after
/// exponentiation.
pub fn exp_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((x - y).exp() - 1.0).norm()).fold(0.0, f64::max)
}

/// Normalized `(v,w)` entries `exp(f_{v,w} - f_{v★,w★})` sampled at the given points.
pub fn normalized_samples(
    ev: &R0Evaluator,
    star: (usize, usize),
    entry: (usize, usize),
    eta: Eta,
    points: &[C64],
) -> Result<Vec<(C64, C64)>> {
    points
        .par_iter()
        .map(|&s| {
            let f = ev.exponent(entry.0, entry.1, eta, s)? - ev.exponent(star.0, star.1, eta, s)?;
            Ok((s, f.exp()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::qr;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn a2() -> AffineCartanDatum {
        build_cartan(AffineTypeId::new('A', 2, 1)).unwrap()
    }

    #[test]
    fn t_mode_examples() {
        let (v1, _) = toy_a2_modules(c(1.0, 0.0));
        let sp = Spectrum { zeros: vec![c(0.0, 0.0)], poles: vec![c(1.0, 0.0)] };
        let mut d = v1.clone();
        d.vectors[0].spectra[1] = sp;
        assert_eq!(t_mode(&d, 0, 1, 0), c(1.0, 0.0));
        assert_eq!(t_mode(&d, 0, 1, 1), c(0.5, 0.0));
        assert_eq!(t_mode(&d, 0, 2, 3), c(0.0, 0.0));
        // oracle: expand log ξ(u) at ∞ numerically
        let sp = &v1.vectors[2].spectra[0];
        let u = c(300.0, 40.0);
        let direct = sp.log_eval(u).unwrap();
        let series: C64 = (0..8).map(|r| t_mode(&v1, 2, 0, r) / u.powu(r + 1)).sum();
        assert!((direct - series).norm() < 1e-15);
    }

    #[test]
    fn toy_modules_are_valid_and_level_zero() {
        let datum = a2();
        let (v1, v2) = toy_a2_modules(c(1.0, 0.0));
        v1.validate(&datum).unwrap();
        v2.validate(&datum).unwrap();
        for d in [&v1, &v2] {
            for v in 0..d.dim() {
                assert!(c_mode(&datum, d, v, 0).norm() < 1e-14);
            }
        }
        assert_eq!(v1.vectors[1].weight_h, vec![qr(0, 1), qr(-1, 1), qr(1, 1)]);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let (v1, _) = toy_a2_modules(c(1.0, 0.0));
        let s = serde_json::to_string(&v1).unwrap();
        let back: DiagonalModuleData = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v1);
        let bad = s.replacen("\"h1\":{\"num\":\"1\",\"den\":\"1\"}", "\"h1\":{\"num\":\"1\",\"den\":\"3\"}", 1);
        assert_ne!(bad, s);
        assert!(serde_json::from_str::<DiagonalModuleData>(&bad).is_err());
        let unknown = s.replace("A2~1", "Q7~1");
        assert!(serde_json::from_str::<DiagonalModuleData>(&unknown).is_err());
    }

    #[test]
    fn tau_residue_sum_matches_formal_series() {
        let (v1, v2) = toy_a2_modules(c(1.0, 0.0));
        for (i, j) in [(0, 1), (1, 1), (2, 0)] {
            let g = tau_input(&v1, 2, &v2, 1, i, j);
            let numeric = g.taylor_at_infinity(8);
            let formal = evaluate_formal(&crate::series::tau_formal(i, j, 8), &v1, 2, &v2, 1);
            for n in 0..=8 {
                assert!((numeric[n] - formal[n]).norm() < 1e-9, "τ_{i}{j} n={n}: {} vs {}", numeric[n], formal[n]);
            }
            // swap: τ^{12}_ij(s) = τ^{21}_ji(-s)
            let s = c(7.0, 2.0);
            let lhs = tau_eval(&v1, 2, &v2, 1, i, j, s).unwrap();
            let rhs = tau_eval(&v2, 1, &v1, 2, j, i, -s).unwrap();
            assert!((lhs - rhs).norm() < 1e-13);
        }
        let empty = DiagonalModuleData { vectors: vec![ModuleVector { spectra: vec![Spectrum::default(); 3], ..v1.vectors[0].clone() }], ..v1.clone() };
        assert_eq!(tau_eval(&empty, 0, &v2, 0, 0, 0, c(3.0, 0.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn g_reg_block_matches_formal() {
        let ctx = CatOContext::new(&a2()).unwrap();
        // nonzero level, so the regularization is exercised
        let mut v1 = toy_a2_modules(c(1.0, 0.0)).0;
        v1.vectors[0].spectra[0] = Spectrum { zeros: vec![], poles: vec![] };
        v1.vectors[0].weight_h[0] = qr(0, 1);
        v1.validate(ctx.datum()).unwrap();
        assert!(c_mode(ctx.datum(), &v1, 0, 0).norm() > 0.5);
        let (_, v2) = toy_a2_modules(c(1.0, 0.0));
        let mut v2 = v2;
        v2.vectors[0].spectra[0] = Spectrum::default();
        v2.vectors[0].weight_h[0] = qr(0, 1);
        let g = g_reg_block(&ctx, &v1, 0, &v2, 0).unwrap();
        let numeric = g.taylor_at_infinity(8);
        let formal = evaluate_formal(&ctx.formal.g_reg_formal(8), &v1, 0, &v2, 0);
        for n in 0..=8 {
            assert!((numeric[n] - formal[n]).norm() < 1e-9 * formal[n].norm().max(1.0), "n={n}");
        }
        assert!(numeric[0].norm() < 1e-12 && numeric[1].norm() < 1e-12);
        assert!(numeric[3].norm() > 1e-3);
    }

    #[test]
    fn trivial_factor_gives_zero_input() {
        let ctx = CatOContext::new(&a2()).unwrap();
        let (v1, _) = toy_a2_modules(c(1.0, 0.0));
        let trivial = DiagonalModuleData {
            vectors: vec![ModuleVector {
                name: "1".into(),
                weight_h: vec![qr(0, 1); 3],
                weight_d: qr(0, 1),
                spectra: vec![Spectrum::default(); 3],
            }],
            ..v1.clone()
        };
        assert!(g_reg_block(&ctx, &trivial, 0, &v1, 2).unwrap().is_zero());
        let t = drinfeld_tensor(&trivial, c(0.7, 0.0), &v1).unwrap();
        assert_eq!(t.vectors.iter().map(|v| v.spectra.clone()).collect::<Vec<_>>(), v1.vectors.iter().map(|v| v.spectra.clone()).collect::<Vec<_>>());
    }

    #[test]
    fn drinfeld_tensor_preserves_mode_zero() {
        let datum = a2();
        let (v1, v2) = toy_a2_modules(c(1.0, 0.0));
        let t = drinfeld_tensor(&v1, c(1.3, -0.2), &v2).unwrap();
        t.validate(&datum).unwrap();
        assert_eq!(t.dim(), 6);
        for i in 0..3 {
            let lhs = t_mode(&t, 4, i, 0);
            assert!((lhs - t_mode(&v1, 2, i, 0) - t_mode(&v2, 0, i, 0)).norm() < 1e-14);
        }
    }

    #[test]
    fn r0_tends_to_identity() {
        let ctx = CatOContext::new(&a2()).unwrap();
        let (v1, v2) = toy_a2_modules(c(1.0, 0.0));
        let ev = R0Evaluator::new(&ctx, &v1, &v2).unwrap();
        let id = DMatrix::<C64>::identity(6, 6);
        for (eta, s) in [(Eta::Up, c(4e9, 3e8)), (Eta::Down, c(-4e9, 3e8)), (Eta::Up, c(1e9, -2e9))] {
            assert!((ev.matrix(eta, s).unwrap() - &id).norm() < 1e-8);
        }
        // and the approach is like 1/s
        let near = (ev.matrix(Eta::Up, c(400.0, 0.0)).unwrap() - &id).norm();
        let far = (ev.matrix(Eta::Up, c(4000.0, 0.0)).unwrap() - &id).norm();
        assert!((near / far - 10.0).abs() < 0.1, "{near} {far}");
    }

    /// Lowering `v` by `α_k` at `c` changes the exponent by `-log ξ_k^{(w)}(s + c)`.
    #[test]
    fn lowering_oracle() {
        let ctx = CatOContext::new(&a2()).unwrap();
        let (v1, v2) = toy_a2_modules(c(1.0, 0.0));
        let ev = R0Evaluator::new(&ctx, &v1, &v2).unwrap();
        let pos = c(0.2, 0.1) - 0.5;
        for s in [c(6.0, 1.0), c(4.5, -3.0)] {
            for w in 0..2 {
                let diff = ev.exponent(1, w, Eta::Up, s).unwrap() - ev.exponent(0, w, Eta::Up, s).unwrap();
                let expect = 1.0 / v2.vectors[w].spectra[1].xi(s + pos);
                assert!((diff.exp() - expect).norm() < 1e-9, "{} vs {}", diff.exp(), expect);
            }
        }
    }

    #[test]
    fn rational_fit_recovers_rational_function() {
        let f = |s: C64| (s - c(0.3, 0.1)) * (s + 1.0) / ((s - c(0.2, -0.4)) * (s + c(0.5, 0.5)));
        let pts: Vec<(C64, C64)> = (0..24).map(|k| {
            let s = C64::from_polar(6.0, k as f64 * 0.26) + 2.0;
            (s, f(s))
        }).collect();
        let r = rational_fit(&pts, 6, 1e-10).unwrap();
        assert_eq!(r.degree, 2);
        assert!((r.eval(c(-3.0, 2.0)) - f(c(-3.0, 2.0))).norm() < 1e-9);
        assert!((r.at_infinity() - 1.0).norm() < 1e-9);
        let ones: Vec<(C64, C64)> = pts.iter().map(|p| (p.0, c(1.0, 0.0))).collect();
        let r = rational_fit(&ones, 4, 1e-12).unwrap();
        assert_eq!((r.degree, r.residual), (0, 0.0));
        let noisy: Vec<(C64, C64)> = pts.iter().map(|p| (p.0, p.1.exp().exp())).collect();
        assert!(matches!(rational_fit(&noisy, 1, 1e-10), Err(Error::FitDegreeExceeded { .. })));
    }

    fn setup() -> (CatOContext, DiagonalModuleData, DiagonalModuleData) {
        let ctx = CatOContext::new(&a2()).unwrap();
        let (v1, v2) = toy_a2_modules(c(1.0, 0.0));
        (ctx, v1, v2)
    }

    #[test]
    fn unitarity() {
        let (ctx, v1, v2) = setup();
        let e12 = R0Evaluator::new(&ctx, &v1, &v2).unwrap();
        let e21 = R0Evaluator::new(&ctx, &v2, &v1).unwrap();
        for s in [c(5.0, 1.0), c(3.7, -2.5), c(0.4, 6.0), c(-2.0, 5.5)] {
            let r = unitarity_residual(&e12, &e21, s).unwrap();
            assert!(r < 1e-8, "s={s}: {r}");
        }
    }

    #[test]
    fn shift_covariance() {
        let (ctx, v1, v2) = setup();
        let (a, b) = (c(0.7, 0.2), c(-0.4, 0.3));
        let base = R0Evaluator::new(&ctx, &v1, &v2).unwrap();
        let moved = R0Evaluator::new(&ctx, &v1.translated(a), &v2.translated(b)).unwrap();
        for (eta, s) in [(Eta::Up, c(5.0, 1.0)), (Eta::Down, c(-4.0, 2.0)), (Eta::Up, c(1.0, 5.0))] {
            let lhs = moved.exponents(eta, s).unwrap();
            let rhs = base.exponents(eta, s + a - b).unwrap();
            assert!(exp_distance(&lhs, &rhs) < 1e-8);
        }
    }

    #[test]
    fn cabling() {
        let (ctx, v1, v2) = setup();
        let v3 = v1.translated(c(0.3, -0.2));
        let s1 = c(2.5, 0.5);
        let t = drinfeld_tensor(&v1, s1, &v2).unwrap();
        let big = R0Evaluator::new(&ctx, &t, &v3).unwrap();
        let e13 = R0Evaluator::new(&ctx, &v1, &v3).unwrap();
        let e23 = R0Evaluator::new(&ctx, &v2, &v3).unwrap();
        for (eta, s2) in [(Eta::Up, c(5.0, 0.5)), (Eta::Down, c(-8.0, 1.0))] {
            let lhs = big.exponents(eta, s2).unwrap();
            let f13 = e13.exponents(eta, s1 + s2).unwrap();
            let f23 = e23.exponents(eta, s2).unwrap();
            let mut rhs = Vec::new();
            for a in 0..v1.dim() {
                for b in 0..v2.dim() {
                    for w in 0..v3.dim() {
                        rhs.push(f13[a * v3.dim() + w] + f23[b * v3.dim() + w]);
                    }
                }
            }
            let d = exp_distance(&lhs, &rhs);
            assert!(d < 1e-8, "{eta:?}: {d}");
        }
    }

    #[test]
    fn rational_normalized_entries() {
        let (ctx, v1, v2) = setup();
        let ev = R0Evaluator::new(&ctx, &v1, &v2).unwrap();
        let up: Vec<C64> = (0..30).map(|k| C64::from_polar(5.0, -1.2 + 2.4 * k as f64 / 29.0) + 4.0).collect();
        let down: Vec<C64> = up.iter().map(|s| -s).collect();
        let probes = [c(0.0, 9.0), c(-7.0, -3.0), c(6.0, 2.0)];
        for entry in [(0, 0), (1, 0), (2, 1), (1, 1)] {
            let fu = rational_fit(&normalized_samples(&ev, (0, 0), entry, Eta::Up, &up).unwrap(), 10, 1e-6).unwrap();
            let fd = rational_fit(&normalized_samples(&ev, (0, 0), entry, Eta::Down, &down).unwrap(), 10, 1e-6).unwrap();
            for p in probes {
                assert!((fu.eval(p) - fd.eval(p)).norm() < 1e-6, "{entry:?} at {p}");
            }
            assert!((fu.at_infinity() - 1.0).norm() < 1e-6);
        }
    }

    #[test]
    fn asymptotic_match_with_formal_l() {
        let (ctx, v1, v2) = setup();
        let ev = R0Evaluator::new(&ctx, &v1, &v2).unwrap();
        let l = ctx.formal.solve_l(8).unwrap();
        for (v, w) in [(0, 0), (2, 1), (1, 0)] {
            let formal = evaluate_formal(&l, &v1, v, &v2, w);
            let numeric = ev.block(v, w).formal_coefficients();
            for n in 0..=8 {
                assert!((formal[n] - numeric[n]).norm() < 1e-6 * formal[n].norm().max(1.0), "({v},{w}) n={n}");
            }
            let lead = evaluate_formal(&crate::series::Series::from_coeffs(vec![ctx.formal.leading_l_closed_form()]), &v1, v, &v2, w);
            assert!((lead[0] - numeric[0]).norm() < 1e-9);
            let sv = ev.block(v, w);
            let rep = crate::resum::verify_asymptotics(|s| sv.evaluate(Eta::Up, s), &formal, (0.0, 0.5), &[8.0, 10.0, 12.5, 15.0], 3).unwrap();
            assert!(rep.all_decay, "{:?}", rep.decays);
        }
    }
}
