//! The lower-triangular twist `R^-(s)` on graded operator data, built by recursion on height.
//!
//! Weights are integer vectors `μ(w_k)` against coweights dual to the simple roots, so
//! `α(ρ^∨) = ht α` and `T(h) = Σ_k c_k T(w_k)` for `h = Σ_k c_k w_k`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type Weight = Vec<i64>;

/// Largest weight block the exact pencil inversion accepts.
pub const MAX_PENCIL_DIM: usize = 64;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Largest entry modulus of a complex matrix.
pub trait MaxAbs {
    fn cmax(&self) -> f64;
}

impl MaxAbs for CMat {
    fn cmax(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn ht(w: &[i64]) -> i64 {
    w.iter().sum()
}

/// Dense matrix as JSON rows of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JsonMatrix(pub Vec<Vec<C64>>);

impl JsonMatrix {
    pub fn to_matrix(&self, rows: usize, cols: usize) -> Result<CMat> {
        if self.0.len() != rows || self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch(format!("expected a {rows}x{cols} matrix")));
        }
        Ok(CMat::from_fn(rows, cols, |i, j| self.0[i][j]))
    }

    pub fn from_matrix(m: &CMat) -> Self {
        JsonMatrix((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub label: String,
    pub coords: Weight,
    pub dim: usize,
}

/// One tensor factor. The basis is ordered weight by weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub weights: Vec<WeightEntry>,
    /// `T(w_k)` for each simple root `k`.
    pub t: Vec<JsonMatrix>,
    /// `x^±_{k,r}` for `r = 0..=R`, indexed `[k][r]`. Optional.
    #[serde(default)]
    pub x_plus: Vec<Vec<JsonMatrix>>,
    #[serde(default)]
    pub x_minus: Vec<Vec<JsonMatrix>>,
    /// `ξ_{k,r}`, indexed `[k][r]`. Optional.
    #[serde(default)]
    pub xi: Vec<Vec<JsonMatrix>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSpec {
    pub alpha: Weight,
    /// Optional redundant height, checked against `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ht: Option<i64>,
    /// `W_α` on `V1 ⊗ V2`, row-major in the product basis `a·dim2 + b`. A root may be
    /// declared without its block; the recursion then refuses height caps that reach it.
    #[serde(default)]
    pub w: Option<JsonMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorDataSpec {
    pub n_simple: usize,
    pub hbar: C64,
    pub factors: Vec<FactorSpec>,
    pub support: Vec<RootSpec>,
    /// The supplier vouches that the data come from a genuine module pair.
    #[serde(default)]
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    /// Weight of each basis vector.
    pub weights: Vec<Weight>,
    pub t: Vec<CMat>,
    pub x_plus: Vec<Vec<CMat>>,
    pub x_minus: Vec<Vec<CMat>>,
    pub xi: Vec<Vec<CMat>>,
}

impl Factor {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `T(h)` for `h = Σ c_k w_k`.
    pub fn t_of(&self, h: &[f64]) -> CMat {
        let n = self.dim();
        self.t.iter().zip(h).fold(CMat::zeros(n, n), |acc, (t, c)| acc + t * C64::new(*c, 0.0))
    }

    /// `h` acting diagonally by `μ(h)`.
    pub fn h_of(&self, h: &[f64]) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.weights.iter().map(|w| C64::new(w.iter().zip(h).map(|(x, c)| *x as f64 * c).sum(), 0.0)),
        ))
    }

    /// The trivial one-dimensional factor.
    pub fn trivial(n_simple: usize) -> Factor {
        Factor { weights: vec![vec![0; n_simple]], t: vec![CMat::zeros(1, 1); n_simple], x_plus: vec![], x_minus: vec![], xi: vec![] }
    }

    /// `T(h) ↦ T(h) + a h`.
    pub fn shifted(&self, a: C64) -> Factor {
        let mut f = self.clone();
        for (k, t) in f.t.iter_mut().enumerate() {
            let mut e = vec![0.0; self.weights.first().map_or(0, |w| w.len())];
            e[k] = 1.0;
            *t += self.h_of(&e) * a;
        }
        f
    }

    fn to_spec(&self) -> FactorSpec {
        let mut weights: Vec<WeightEntry> = Vec::new();
        for w in &self.weights {
            match weights.last_mut() {
                Some(e) if &e.coords == w => e.dim += 1,
                _ => weights.push(WeightEntry { label: format!("{w:?}"), coords: w.clone(), dim: 1 }),
            }
        }
        let js = |v: &Vec<Vec<CMat>>| v.iter().map(|r| r.iter().map(JsonMatrix::from_matrix).collect()).collect();
        FactorSpec {
            weights,
            t: self.t.iter().map(JsonMatrix::from_matrix).collect(),
            x_plus: js(&self.x_plus),
            x_minus: js(&self.x_minus),
            xi: js(&self.xi),
        }
    }
}

/// Validated operator data for a pair `V1 ⊗ V2`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorData {
    pub n_simple: usize,
    pub hbar: C64,
    pub f1: Factor,
    pub f2: Factor,
    /// `(α, W_α)` with `W_α` on `V1 ⊗ V2`.
    pub support: Vec<(Weight, CMat)>,
    /// Roots declared without a `W` block.
    pub missing: Vec<Weight>,
    pub consistent: bool,
}

impl TryFrom<&OperatorDataSpec> for OperatorData {
    type Error = Error;
    fn try_from(spec: &OperatorDataSpec) -> Result<Self> {
        if spec.factors.len() != 2 {
            return Err(Error::ShapeMismatch("operator data needs exactly two factors".into()));
        }
        let r = spec.n_simple;
        let f1 = factor_from_spec(&spec.factors[0], r)?;
        let f2 = factor_from_spec(&spec.factors[1], r)?;
        let n = f1.dim() * f2.dim();
        let mut support = Vec::new();
        let mut missing = Vec::new();
        for rs in &spec.support {
            match support_entry(rs, n)? {
                (a, Some(w)) => support.push((a, w)),
                (a, None) => missing.push(a),
            }
        }
        let data = OperatorData { n_simple: r, hbar: spec.hbar, f1, f2, support, missing, consistent: spec.consistent };
        data.validate()?;
        Ok(data)
    }
}

fn support_entry(rs: &RootSpec, n: usize) -> Result<(Weight, Option<CMat>)> {
    if let Some(h) = rs.ht {
        if h != ht(&rs.alpha) {
            return Err(Error::InvalidData(format!("root {:?} does not have height {h}", rs.alpha)));
        }
    }
    Ok((rs.alpha.clone(), rs.w.as_ref().map(|w| w.to_matrix(n, n)).transpose()?))
}

fn root_spec(a: &Weight, w: &CMat) -> RootSpec {
    RootSpec { alpha: a.clone(), ht: Some(ht(a)), w: Some(JsonMatrix::from_matrix(w)) }
}

fn factor_from_spec(f: &FactorSpec, r: usize) -> Result<Factor> {
    let mut weights = Vec::new();
    for w in &f.weights {
        if w.coords.len() != r {
            return Err(Error::ShapeMismatch(format!("weight {} has {} coordinates", w.label, w.coords.len())));
        }
        weights.extend(std::iter::repeat_n(w.coords.clone(), w.dim));
    }
    let n = weights.len();
    if f.t.len() != r {
        return Err(Error::ShapeMismatch(format!("expected {r} matrices T(w_k)")));
    }
    let mats = |v: &Vec<Vec<JsonMatrix>>| -> Result<Vec<Vec<CMat>>> {
        v.iter().map(|row| row.iter().map(|m| m.to_matrix(n, n)).collect()).collect()
    };
    Ok(Factor {
        t: f.t.iter().map(|m| m.to_matrix(n, n)).collect::<Result<_>>()?,
        x_plus: mats(&f.x_plus)?,
        x_minus: mats(&f.x_minus)?,
        xi: mats(&f.xi)?,
        weights,
    })
}

impl From<&OperatorData> for OperatorDataSpec {
    fn from(d: &OperatorData) -> Self {
        OperatorDataSpec {
            n_simple: d.n_simple,
            hbar: d.hbar,
            factors: vec![d.f1.to_spec(), d.f2.to_spec()],
            support: d
                .support
                .iter()
                .map(|(a, w)| root_spec(a, w))
                .chain(d.missing.iter().map(|a| RootSpec { alpha: a.clone(), ht: Some(ht(a)), w: None }))
                .collect(),
            consistent: d.consistent,
        }
    }
}

/// Entries below this are treated as structural zeros when validating data.
const STRUCT_TOL: f64 = 1e-12;

impl OperatorData {
    pub fn dim(&self) -> usize {
        self.f1.dim() * self.f2.dim()
    }

    /// `(μ1, μ2)` of each product basis vector.
    pub fn product_weights(&self) -> Vec<(Weight, Weight)> {
        let mut out = Vec::with_capacity(self.dim());
        for a in &self.f1.weights {
            for b in &self.f2.weights {
                out.push((a.clone(), b.clone()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.n_simple;
        for f in [&self.f1, &self.f2] {
            if f.weights.iter().any(|w| w.len() != r) || f.t.len() != r {
                return Err(Error::ShapeMismatch("factor does not match the number of simple roots".into()));
            }
            // T preserves weights
            for t in &f.t {
                check_shift(t, &f.weights, &f.weights, &vec![0; r], "T(w_k)")?;
            }
            let mut ts = f.t.iter();
            if let Some(t0) = ts.next() {
                for t in ts {
                    if (t0 * t - t * t0).cmax() > 1e-9 * (1.0 + t0.cmax() * t.cmax()) {
                        return Err(Error::InvalidData("the T(w_k) do not commute".into()));
                    }
                }
            }
            for x in f.xi.iter().flatten() {
                check_shift(x, &f.weights, &f.weights, &vec![0; r], "ξ")?;
            }
            for (sign, xs) in [(1i64, &f.x_plus), (-1, &f.x_minus)] {
                for (k, modes) in xs.iter().enumerate() {
                    let mut alpha = vec![0; r];
                    alpha[k] = sign;
                    for (m, x) in modes.iter().enumerate() {
                        check_shift(x, &f.weights, &f.weights, &alpha, "x^±")?;
                        if let Some(next) = modes.get(m + 1) {
                            // [T(h), x^±_{k,m}] = ±α_k(h) x^±_{k,m+1}
                            for (j, t) in f.t.iter().enumerate() {
                                let lhs = t * x - x * t;
                                let rhs = if j == k { next * C64::new(sign as f64, 0.0) } else { CMat::zeros(x.nrows(), x.ncols()) };
                                if (lhs - rhs).cmax() > 1e-9 * (1.0 + x.cmax() + next.cmax()) {
                                    return Err(Error::InvalidData(format!("[T(w_{j}), x_{k},{m}] violates the mode relation")));
                                }
                            }
                        }
                    }
                }
            }
        }
        let pw = self.product_weights();
        for (alpha, w) in &self.support {
            if alpha.len() != r || alpha.iter().any(|&x| x < 0) || ht(alpha) <= 0 {
                return Err(Error::InvalidData(format!("support root {alpha:?} is not positive")));
            }
            if w.nrows() != self.dim() || w.ncols() != self.dim() {
                return Err(Error::ShapeMismatch("W_α has the wrong size".into()));
            }
            for i in 0..self.dim() {
                for j in 0..self.dim() {
                    if w[(i, j)].norm() > STRUCT_TOL && !is_shift(&pw[j], &pw[i], alpha) {
                        return Err(Error::InvalidData(format!("W_{alpha:?} has an entry outside its weight blocks")));
                    }
                }
            }
        }
        Ok(())
    }

    /// `□T(h) = T1(h) ⊗ 1 + 1 ⊗ T2(h)`.
    pub fn box_t(&self, h: &[f64]) -> CMat {
        let (n1, n2) = (self.f1.dim(), self.f2.dim());
        self.f1.t_of(h).kronecker(&CMat::identity(n2, n2)) + CMat::identity(n1, n1).kronecker(&self.f2.t_of(h))
    }

    /// `h ⊗ 1`.
    pub fn h1(&self, h: &[f64]) -> CMat {
        let n2 = self.f2.dim();
        self.f1.h_of(h).kronecker(&CMat::identity(n2, n2))
    }

    pub fn w_total(&self) -> CMat {
        self.support.iter().fold(CMat::zeros(self.dim(), self.dim()), |acc, (_, w)| acc + w)
    }

    pub fn rho(&self) -> Vec<f64> {
        vec![1.0; self.n_simple]
    }

    /// Data with every `W_α` set to zero.
    pub fn abelian(&self) -> OperatorData {
        let mut d = self.clone();
        for (_, w) in &mut d.support {
            w.fill(zero());
        }
        d
    }

    /// `T1 ↦ T1 + a h`, `T2 ↦ T2 + b h`.
    pub fn shifted(&self, a: C64, b: C64) -> OperatorData {
        OperatorData { f1: self.f1.shifted(a), f2: self.f2.shifted(b), ..self.clone() }
    }
}

/// Is `target = source + (-β, +β)`?
fn is_shift(source: &(Weight, Weight), target: &(Weight, Weight), beta: &[i64]) -> bool {
    source.0.iter().zip(&target.0).zip(beta).all(|((s, t), b)| t == &(s - b))
        && source.1.iter().zip(&target.1).zip(beta).all(|((s, t), b)| t == &(s + b))
}

fn check_shift(m: &CMat, src: &[Weight], tgt: &[Weight], shift: &[i64], what: &str) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)].norm() > STRUCT_TOL && tgt[i].iter().zip(&src[j]).zip(shift).any(|((t, s), d)| t != &(s + d)) {
                return Err(Error::InvalidData(format!("{what} does not shift weights by {shift:?}")));
            }
        }
    }
    Ok(())
}

/// All nonzero sums of support roots with height at most `cap`, ordered by height.
pub fn weight_cone(support: &[Weight], cap: i64) -> Vec<Weight> {
    let r = support.first().map_or(0, |a| a.len());
    let mut seen: BTreeSet<Weight> = BTreeSet::new();
    let mut frontier = vec![vec![0; r]];
    while let Some(b) = frontier.pop() {
        for a in support {
            let c: Weight = b.iter().zip(a).map(|(x, y)| x + y).collect();
            if ht(&c) <= cap && seen.insert(c.clone()) {
                frontier.push(c);
            }
        }
    }
    let mut out: Vec<Weight> = seen.into_iter().collect();
    out.sort_by_key(|b| (ht(b), b.clone()));
    out
}

/// `ν(β)`: the least number of support roots summing to `β`.
pub fn nu(support: &[Weight], beta: &[i64]) -> Option<usize> {
    let cone = weight_cone(support, ht(beta));
    let mut best: BTreeMap<Weight, usize> = BTreeMap::new();
    best.insert(vec![0; beta.len()], 0);
    for b in &cone {
        let v = support
            .iter()
            .filter_map(|a| {
                let prev: Weight = b.iter().zip(a).map(|(x, y)| x - y).collect();
                best.get(&prev).map(|n| n + 1)
            })
            .min();
        if let Some(v) = v {
            best.insert(b.clone(), v);
        }
    }
    best.get(beta).copied()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Series(usize),
    Exact,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        if s == "exact" {
            return Ok(Mode::Exact);
        }
        s.strip_prefix("series:")
            .and_then(|n| n.parse().ok())
            .map(Mode::Series)
            .ok_or_else(|| Error::InvalidData(format!("mode must be exact or series:N, got {s:?}")))
    }
}

/// Polynomial in `s` with matrix coefficients, lowest degree first.
pub type PolyMat = Vec<CMat>;

/// `num(s) / den(s)` on one weight block `src → tgt` of the product basis.
#[derive(Clone, Debug)]
pub struct RationalBlock {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
    pub num: PolyMat,
    pub den: Vec<C64>,
}

fn horner(p: &[C64], s: C64) -> C64 {
    p.iter().rev().fold(zero(), |acc, c| acc * s + c)
}

fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn polymat_scale_poly(m: &PolyMat, p: &[C64]) -> PolyMat {
    let (r, c) = m[0].shape();
    let mut out = vec![CMat::zeros(r, c); m.len() + p.len() - 1];
    for (i, x) in m.iter().enumerate() {
        for (j, y) in p.iter().enumerate() {
            out[i + j] += x * *y;
        }
    }
    out
}

fn polymat_add(a: &PolyMat, b: &PolyMat) -> PolyMat {
    let (r, c) = a[0].shape();
    (0..a.len().max(b.len()))
        .map(|k| {
            let mut m = CMat::zeros(r, c);
            if let Some(x) = a.get(k) {
                m += x;
            }
            if let Some(x) = b.get(k) {
                m += x;
            }
            m
        })
        .collect()
}

impl RationalBlock {
    pub fn eval(&self, s: C64) -> CMat {
        let d = horner(&self.den, s);
        let (r, c) = self.num[0].shape();
        self.num.iter().rev().fold(CMat::zeros(r, c), |acc, m| acc * s + m) / d
    }

    /// `self + other` over a common denominator; identical denominators are shared.
    fn add(&self, other: &RationalBlock) -> RationalBlock {
        if self.den == other.den {
            return RationalBlock { num: polymat_add(&self.num, &other.num), ..self.clone() };
        }
        RationalBlock {
            src: self.src.clone(),
            tgt: self.tgt.clone(),
            num: polymat_add(&polymat_scale_poly(&self.num, &other.den), &polymat_scale_poly(&other.num, &self.den)),
            den: poly_mul(&self.den, &other.den),
        }
    }

    /// Make the denominator monic.
    fn normalized(mut self) -> RationalBlock {
        while self.den.len() > 1 && self.den.last().unwrap().norm() == 0.0 {
            self.den.pop();
        }
        let lead = *self.den.last().unwrap();
        for c in &mut self.den {
            *c /= lead;
        }
        for m in &mut self.num {
            *m /= lead;
        }
        self
    }
}

/// Faddeev–LeVerrier: `adj(λ - M) = Σ_k λ^{m-1-k} B_k` and `det(λ - M) = Σ_k c_k λ^{m-k}`.
pub fn faddeev_leverrier(m: &CMat) -> (Vec<CMat>, Vec<C64>) {
    let n = m.nrows();
    let mut bs = Vec::with_capacity(n);
    let mut cs = vec![C64::new(1.0, 0.0)];
    let mut b = CMat::identity(n, n);
    for k in 1..=n {
        let mb = m * &b;
        let c = -mb.trace() / k as f64;
        cs.push(c);
        bs.push(b);
        b = mb + CMat::identity(n, n) * c;
    }
    (bs, cs)
}

/// The recursion output for every `β` in the cone up to the height cap.
#[derive(Clone, Debug)]
pub struct RMinusResult {
    pub dim: usize,
    pub betas: Vec<Weight>,
    /// `series[β][n]` is the `s^{-n}` coefficient of `R^-_β`.
    pub series: Option<Vec<Vec<CMat>>>,
    pub exact: Option<Vec<Vec<RationalBlock>>>,
}

impl RMinusResult {
    /// `R^-_β(s)` as a full matrix; `β` must be in `betas`.
    pub fn component(&self, beta: &[i64], s: C64) -> Option<CMat> {
        let k = self.betas.iter().position(|b| b == beta)?;
        Some(self.component_at(k, s))
    }

    fn component_at(&self, k: usize, s: C64) -> CMat {
        let n = self.dim;
        if let Some(ex) = &self.exact {
            let mut m = CMat::zeros(n, n);
            for blk in &ex[k] {
                let v = blk.eval(s);
                for (a, &i) in blk.tgt.iter().enumerate() {
                    for (b, &j) in blk.src.iter().enumerate() {
                        m[(i, j)] = v[(a, b)];
                    }
                }
            }
            m
        } else {
            let coeffs = &self.series.as_ref().expect("one mode is always present")[k];
            let inv = s.inv();
            coeffs.iter().rev().fold(CMat::zeros(n, n), |acc, c| acc * inv + c)
        }
    }

    /// `R^-(s) = 1 + Σ_β R^-_β(s)`.
    pub fn eval(&self, s: C64) -> CMat {
        (0..self.betas.len()).fold(CMat::identity(self.dim, self.dim), |acc, k| acc + self.component_at(k, s))
    }
}

/// Source/target index blocks of `R^-_β`: one per source weight pair whose target exists.
fn beta_blocks(pw: &[(Weight, Weight)], beta: &[i64]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut groups: BTreeMap<&(Weight, Weight), Vec<usize>> = BTreeMap::new();
    for (i, w) in pw.iter().enumerate() {
        groups.entry(w).or_default().push(i);
    }
    let mut out = Vec::new();
    for (w, src) in &groups {
        let tgt: Vec<usize> = (0..pw.len()).filter(|&i| is_shift(w, &pw[i], beta)).collect();
        if !tgt.is_empty() {
            out.push((src.clone(), tgt));
        }
    }
    out
}

fn sub_matrix(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// `R^-_β = ħ Σ_k ad(□T(ρ^∨))^k / (s ht β)^{k+1} Σ_α ht α R^-_{β-α} W_α`, for every `β` up
/// to height `cap`. `order` permutes the accumulation over the support.
pub fn recurse_rminus_ordered(data: &OperatorData, cap: i64, mode: Mode, order: &[usize]) -> Result<RMinusResult> {
    if let Some(a) = data.missing.iter().find(|a| ht(a) <= cap) {
        return Err(Error::MissingRootBlock(format!("{a:?}")));
    }
    let support: Vec<Weight> = data.support.iter().map(|(a, _)| a.clone()).collect();
    let betas = weight_cone(&support, cap);
    let n = data.dim();
    let bt = data.box_t(&data.rho());
    let index: BTreeMap<&Weight, usize> = betas.iter().enumerate().map(|(k, b)| (b, k)).collect();
    let hbar = data.hbar;
    // `(ht α, W_α, index of β - α or None for β = α)` for each support root
    let terms = |beta: &Weight| -> Vec<(f64, &CMat, Option<usize>)> {
        order
            .iter()
            .filter_map(|&a| {
                let (alpha, w) = &data.support[a];
                let prev: Weight = beta.iter().zip(alpha).map(|(x, y)| x - y).collect();
                if prev.iter().all(|&x| x == 0) {
                    Some((ht(alpha) as f64, w, None))
                } else {
                    index.get(&prev).map(|&k| (ht(alpha) as f64, w, Some(k)))
                }
            })
            .collect()
    };
    match mode {
        Mode::Series(nmax) => {
            let mut series: Vec<Vec<CMat>> = Vec::with_capacity(betas.len());
            for beta in &betas {
                let h = ht(beta) as f64;
                let ts = terms(beta);
                let mut coeffs = vec![CMat::zeros(n, n); nmax + 1];
                for m in 0..nmax {
                    // ħ Σ ht α R_{β-α, m} W_α
                    let mut rhs = CMat::zeros(n, n);
                    for (ha, w, prev) in &ts {
                        match prev {
                            None if m == 0 => rhs += *w * (hbar * *ha),
                            None => {}
                            Some(k) => rhs += &series[*k][m] * *w * (hbar * *ha),
                        }
                    }
                    let x = &coeffs[m];
                    coeffs[m + 1] = (&bt * x - x * &bt + rhs) / C64::new(h, 0.0);
                }
                series.push(coeffs);
            }
            Ok(RMinusResult { dim: n, betas, series: Some(series), exact: None })
        }
        Mode::Exact => {
            let pw = data.product_weights();
            let mut exact: Vec<Vec<RationalBlock>> = Vec::with_capacity(betas.len());
            for beta in &betas {
                let h = ht(beta);
                if h == 0 {
                    return Err(Error::SingularPencil(format!("{beta:?}")));
                }
                let ts = terms(beta);
                let blocks = beta_blocks(&pw, beta);
                let solved = blocks
                    .par_iter()
                    .map(|(src, tgt)| {
                        let mut rhs: Option<RationalBlock> = None;
                        for (ha, w, prev) in &ts {
                            let scale = hbar * *ha;
                            let term = match prev {
                                None => {
                                    let m = sub_matrix(w, tgt, src) * scale;
                                    RationalBlock { src: src.clone(), tgt: tgt.clone(), num: vec![m], den: vec![C64::new(1.0, 0.0)] }
                                }
                                Some(k) => {
                                    // R_{β-α} on the block whose target is `tgt`
                                    let Some(blk) = exact[*k].iter().find(|b| b.tgt == *tgt) else { continue };
                                    let wpart = sub_matrix(w, &blk.src, src) * scale;
                                    if wpart.iter().all(|z| z.norm() == 0.0) {
                                        continue;
                                    }
                                    RationalBlock {
                                        src: src.clone(),
                                        tgt: tgt.clone(),
                                        num: blk.num.iter().map(|m| m * &wpart).collect(),
                                        den: blk.den.clone(),
                                    }
                                }
                            };
                            rhs = Some(match rhs {
                                None => term,
                                Some(r) => r.add(&term),
                            });
                        }
                        let rhs = rhs.unwrap_or_else(|| RationalBlock {
                            src: src.clone(),
                            tgt: tgt.clone(),
                            num: vec![CMat::zeros(tgt.len(), src.len())],
                            den: vec![C64::new(1.0, 0.0)],
                        });
                        solve_pencil(&bt, src, tgt, h as f64, rhs)
                    })
                    .collect::<Result<Vec<_>>>()?;
                exact.push(solved);
            }
            Ok(RMinusResult { dim: n, betas, series: None, exact: Some(exact) })
        }
    }
}

pub fn recurse_rminus(data: &OperatorData, cap: i64, mode: Mode) -> Result<RMinusResult> {
    let order: Vec<usize> = (0..data.support.len()).collect();
    recurse_rminus_ordered(data, cap, mode, &order)
}

/// Solve `(s h - ad □T) X = rhs` on one block, exactly in `s`.
fn solve_pencil(bt: &CMat, src: &[usize], tgt: &[usize], h: f64, rhs: RationalBlock) -> Result<RationalBlock> {
    let (ns, nt) = (src.len(), tgt.len());
    let m = ns * nt;
    if m > MAX_PENCIL_DIM {
        return Err(Error::ShapeMismatch(format!("weight block of size {m} exceeds {MAX_PENCIL_DIM}")));
    }
    let mt = sub_matrix(bt, tgt, tgt);
    let ms = sub_matrix(bt, src, src);
    // column-major vec: vec(M_t X - X M_s) = (I ⊗ M_t - M_sᵀ ⊗ I) vec X
    let l = CMat::identity(ns, ns).kronecker(&mt) - ms.transpose().kronecker(&CMat::identity(nt, nt));
    let (bs, cs) = faddeev_leverrier(&l);
    // det(λ - L) with λ = h s, as a polynomial in s
    let det_s: Vec<C64> = (0..=m).map(|j| cs[m - j] * h.powi(j as i32)).collect();
    if det_s.iter().all(|c| c.norm() == 0.0) {
        return Err(Error::SingularPencil(format!("block {src:?} -> {tgt:?}")));
    }
    // adj(λ - L) vec N(s) = Σ_k (h s)^{m-1-k} B_k vec N(s)
    let mut num: Vec<CMat> = vec![CMat::zeros(nt, ns); m + rhs.num.len()];
    for (k, b) in bs.iter().enumerate() {
        let p = m - 1 - k;
        let f = h.powi(p as i32);
        for (j, nj) in rhs.num.iter().enumerate() {
            let v = b * CMat::from_column_slice(m, 1, nj.as_slice());
            num[p + j] += CMat::from_column_slice(nt, ns, v.as_slice()) * C64::new(f, 0.0);
        }
    }
    Ok(RationalBlock { src: src.to_vec(), tgt: tgt.to_vec(), num, den: poly_mul(&rhs.den, &det_s) }.normalized())
}

/// `max |[□T(h) + s h⊗1, R] - ħ R [h⊗1, W]|` over the samples, relative to `max(1, |R|)`.
pub fn verify_intertwiner(data: &OperatorData, result: &RMinusResult, h: &[f64], samples: &[C64]) -> f64 {
    let bt = data.box_t(h);
    let h1 = data.h1(h);
    let w = data.w_total();
    let hw = &h1 * &w - &w * &h1;
    samples
        .par_iter()
        .map(|&s| {
            let r = result.eval(s);
            let a = &bt + &h1 * s;
            let res = (&a * &r - &r * &a) - &r * &hw * data.hbar;
            res.cmax() / r.cmax().max(1.0)
        })
        .reduce(|| 0.0, f64::max)
}

/// Intertwiner residual for each of the standard test directions: `ρ^∨` and a generic `h`.
pub fn generic_h(n_simple: usize) -> Vec<f64> {
    (0..n_simple).map(|k| 1.0 + 0.37 * k as f64 + 0.11 * (k * k) as f64).collect()
}

/// Embed an operator on factors `(i, j)` of `V1 ⊗ V2 ⊗ V3` (with `i < j`).
pub fn embed_pair(m: &CMat, dims: [usize; 3], pair: (usize, usize)) -> CMat {
    let n = dims[0] * dims[1] * dims[2];
    let split = |x: usize| [x / (dims[1] * dims[2]), (x / dims[2]) % dims[1], x % dims[2]];
    let other = 3 - pair.0 - pair.1;
    let dj = dims[pair.1];
    CMat::from_fn(n, n, |r, c| {
        let (a, b) = (split(r), split(c));
        if a[other] != b[other] {
            return zero();
        }
        m[(a[pair.0] * dj + a[pair.1], b[pair.0] * dj + b[pair.1])]
    })
}

/// `P: V2 ⊗ V1 → V1 ⊗ V2`.
pub fn flip_matrix(n1: usize, n2: usize) -> CMat {
    let n = n1 * n2;
    CMat::from_fn(n, n, |r, c| {
        // r = a·n2 + b in V1⊗V2, c = b·n1 + a in V2⊗V1
        let (a, b) = (r / n2, r % n2);
        if c == b * n1 + a {
            C64::new(1.0, 0.0)
        } else {
            zero()
        }
    })
}

/// `R(s) = R^+(s) R^0(s) R^-(s)` with `R^+(s) = flip ∘ R^-_{21}(-s)^{-1} ∘ flip`.
/// `rm21_neg` is `R^-_{V2,V1}(-s)`.
pub fn assemble_full_r(rm12: &CMat, rm21_neg: &CMat, r0: &CMat, n1: usize, n2: usize) -> Result<CMat> {
    let n = n1 * n2;
    for m in [rm12, rm21_neg, r0] {
        if m.shape() != (n, n) {
            return Err(Error::ShapeMismatch(format!("expected {n}x{n} operators")));
        }
    }
    let p = flip_matrix(n1, n2);
    let inv = rm21_neg.clone().try_inverse().ok_or_else(|| Error::SingularPencil("R^-_21(-s) is not invertible".into()))?;
    let rplus = &p * inv * p.transpose();
    Ok(rplus * r0 * rm12)
}

/// `‖R12(s1) R13(s1+s2) R23(s2) - R23(s2) R13(s1+s2) R12(s1)‖` with each `R_ij` supplied on
/// its own pair space.
pub fn qybe_residual(r12: &CMat, r13: &CMat, r23: &CMat, dims: [usize; 3]) -> f64 {
    let a = embed_pair(r12, dims, (0, 1));
    let b = embed_pair(r13, dims, (0, 2));
    let c = embed_pair(r23, dims, (1, 2));
    (&a * &b * &c - &c * &b * &a).cmax()
}

/// Data for three factors with pairwise `W` operators, for the cocycle check.
#[derive(Clone, Debug)]
pub struct TripleData {
    pub n_simple: usize,
    pub hbar: C64,
    pub factors: [Factor; 3],
    /// `(α, W_α)` on `V_i ⊗ V_j` for the pairs `(1,2)`, `(1,3)`, `(2,3)`.
    pub w12: Vec<(Weight, CMat)>,
    pub w13: Vec<(Weight, CMat)>,
    pub w23: Vec<(Weight, CMat)>,
}

/// JSON form of [`TripleData`]: three factors and the `W` lists for pairs 12, 13, 23.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleDataSpec {
    pub n_simple: usize,
    pub hbar: C64,
    pub factors: Vec<FactorSpec>,
    pub w12: Vec<RootSpec>,
    pub w13: Vec<RootSpec>,
    pub w23: Vec<RootSpec>,
}

impl TryFrom<&TripleDataSpec> for TripleData {
    type Error = Error;
    fn try_from(spec: &TripleDataSpec) -> Result<Self> {
        let r = spec.n_simple;
        let fs = spec.factors.iter().map(|f| factor_from_spec(f, r)).collect::<Result<Vec<_>>>()?;
        let [f1, f2, f3]: [Factor; 3] = fs.try_into().map_err(|_| Error::ShapeMismatch("triple data needs exactly three factors".into()))?;
        let list = |v: &[RootSpec], n: usize| {
            v.iter()
                .map(|rs| match support_entry(rs, n)? {
                    (a, Some(w)) => Ok((a, w)),
                    (a, None) => Err(Error::MissingRootBlock(format!("{a:?}"))),
                })
                .collect::<Result<Vec<_>>>()
        };
        let t = TripleData {
            n_simple: r,
            hbar: spec.hbar,
            w12: list(&spec.w12, f1.dim() * f2.dim())?,
            w13: list(&spec.w13, f1.dim() * f3.dim())?,
            w23: list(&spec.w23, f2.dim() * f3.dim())?,
            factors: [f1, f2, f3],
        };
        t.pair(0, 1, &t.w12)?;
        t.pair(0, 2, &t.w13)?;
        t.pair(1, 2, &t.w23)?;
        Ok(t)
    }
}

impl From<&TripleData> for TripleDataSpec {
    fn from(t: &TripleData) -> Self {
        let list = |v: &[(Weight, CMat)]| v.iter().map(|(a, w)| root_spec(a, w)).collect();
        TripleDataSpec {
            n_simple: t.n_simple,
            hbar: t.hbar,
            factors: t.factors.iter().map(Factor::to_spec).collect(),
            w12: list(&t.w12),
            w13: list(&t.w13),
            w23: list(&t.w23),
        }
    }
}

impl TripleData {
    fn pair(&self, i: usize, j: usize, w: &[(Weight, CMat)]) -> Result<OperatorData> {
        let d = OperatorData {
            n_simple: self.n_simple,
            hbar: self.hbar,
            f1: self.factors[i].clone(),
            f2: self.factors[j].clone(),
            support: w.to_vec(),
            missing: vec![],
            consistent: false,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.factors[0].dim(), self.factors[1].dim(), self.factors[2].dim()]
    }
}

/// `V_a ⊗_s V_b` as a single factor: weights add and `T(h) = (T_a(h) + s h) ⊗ 1 + 1 ⊗ T_b(h)`.
pub fn drinfeld_factor(fa: &Factor, s: C64, fb: &Factor) -> Factor {
    let (na, nb) = (fa.dim(), fb.dim());
    let mut weights = Vec::with_capacity(na * nb);
    for a in &fa.weights {
        for b in &fb.weights {
            weights.push(a.iter().zip(b).map(|(x, y)| x + y).collect());
        }
    }
    let shifted = fa.shifted(s);
    let t = shifted
        .t
        .iter()
        .zip(&fb.t)
        .map(|(ta, tb)| ta.kronecker(&CMat::identity(nb, nb)) + CMat::identity(na, na).kronecker(tb))
        .collect();
    Factor { weights, t, x_plus: vec![], x_minus: vec![], xi: vec![] }
}

/// Residual of `R^-_{(12)3}(s2) (R^-_{12}(s1) ⊗ 1) = R^-_{1(23)}(s1+s2) (1 ⊗ R^-_{23}(s2))`.
/// The composed data are transported by conjugation with the inner `R^-`.
pub fn verify_cocycle(triple: &TripleData, cap: i64, s1: C64, s2: C64) -> Result<f64> {
    let dims = triple.dims();
    let [n1, n2, n3] = dims;
    let r12 = recurse_rminus(&triple.pair(0, 1, &triple.w12)?, cap, Mode::Exact)?.eval(s1);
    let r23 = recurse_rminus(&triple.pair(1, 2, &triple.w23)?, cap, Mode::Exact)?.eval(s2);
    let y = r12.kronecker(&CMat::identity(n3, n3));
    let z = CMat::identity(n1, n1).kronecker(&r23);
    let yi = y.clone().try_inverse().ok_or_else(|| Error::SingularPencil("R^-_12(s1)".into()))?;
    let zi = z.clone().try_inverse().ok_or_else(|| Error::SingularPencil("R^-_23(s2)".into()))?;
    let roots: BTreeSet<Weight> = triple.w12.iter().chain(&triple.w13).chain(&triple.w23).map(|(a, _)| a.clone()).collect();
    let find = |w: &[(Weight, CMat)], a: &Weight, n: usize| w.iter().find(|(b, _)| b == a).map_or(CMat::zeros(n, n), |(_, m)| m.clone());
    let mut left_support = Vec::new();
    let mut right_support = Vec::new();
    for a in &roots {
        let w13 = embed_pair(&find(&triple.w13, a, n1 * n3), dims, (0, 2));
        let w23 = embed_pair(&find(&triple.w23, a, n2 * n3), dims, (1, 2));
        let w12 = embed_pair(&find(&triple.w12, a, n1 * n2), dims, (0, 1));
        left_support.push((a.clone(), &y * (w13.clone() + w23) * &yi));
        right_support.push((a.clone(), &z * (w12 + w13) * &zi));
    }
    let left = OperatorData {
        n_simple: triple.n_simple,
        hbar: triple.hbar,
        f1: drinfeld_factor(&triple.factors[0], s1, &triple.factors[1]),
        f2: triple.factors[2].clone(),
        support: left_support,
        missing: vec![],
        consistent: false,
    };
    let right = OperatorData {
        n_simple: triple.n_simple,
        hbar: triple.hbar,
        f1: triple.factors[0].clone(),
        f2: drinfeld_factor(&triple.factors[1], s2, &triple.factors[2]),
        support: right_support,
        missing: vec![],
        consistent: false,
    };
    left.validate()?;
    right.validate()?;
    let lhs = recurse_rminus(&left, cap, Mode::Exact)?.eval(s2) * &y;
    let rhs = recurse_rminus(&right, cap, Mode::Exact)?.eval(s1 + s2) * &z;
    Ok((lhs - rhs).cmax())
}

fn e2() -> CMat {
    CMat::from_row_slice(2, 2, &[zero(), C64::new(1.0, 0.0), zero(), zero()])
}

fn kron_all(ms: &[CMat]) -> CMat {
    ms.iter().skip(1).fold(ms[0].clone(), |acc, m| acc.kronecker(m))
}

/// Two-dimensional evaluation-type factor: weights `1` (index 0) and `0`, `T(h) = a h`.
pub fn sl2_factor(a: C64) -> Factor {
    let h = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), zero()]));
    Factor { weights: vec![vec![1], vec![0]], t: vec![h * a], x_plus: vec![vec![e2()]], x_minus: vec![vec![e2().transpose()]], xi: vec![] }
}

/// `W = f ⊗ e` on `C^2 ⊗ C^2`.
pub fn sl2_w() -> CMat {
    e2().transpose().kronecker(&e2())
}

/// Three evaluation-type factors at `a1, a2, a3`, for the cocycle check.
pub fn sl2_triple(hbar: C64, a: [C64; 3]) -> TripleData {
    let w = vec![(vec![1], sl2_w())];
    TripleData {
        n_simple: 1,
        hbar,
        factors: [sl2_factor(a[0]), sl2_factor(a[1]), sl2_factor(a[2])],
        w12: w.clone(),
        w13: w.clone(),
        w23: w,
    }
}

/// The bundled nonabelian instance: two commuting `sl2` directions, a multiplicity space on
/// which `T` acts by a non-scalar matrix `J`, and support `{α1, α2, α1+α2}`.
///
/// `T1(h) = H1(h) (1 ⊗ 1 ⊗ J)`, `T2(h) = c H2(h)`, and every `W_α` commutes with
/// `K = J ⊗ 1 - c`, so the unique solution is `exp(ħ W (s + K)^{-1})` for every `h`.
pub fn synthetic_instance() -> OperatorData {
    let i2 = CMat::identity(2, 2);
    let j = CMat::from_row_slice(2, 2, &[C64::new(0.3, 0.1), C64::new(0.5, 0.0), C64::new(-0.2, 0.0), C64::new(0.1, -0.2)]);
    let c2 = C64::new(0.25, 0.0);
    let p1 = &i2 + &j * C64::new(0.5, 0.0);
    let p2 = &i2 - &j * C64::new(0.3, 0.0);
    let (e, f) = (e2(), e2().transpose());
    // V1 = C²_a ⊗ C²_b ⊗ C²_mult, V2 = C²_a ⊗ C²_b; index 0 of each C² has coordinate 1
    let mut w1 = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for _ in 0..2 {
                w1.push(vec![1 - a as i64, 1 - b as i64]);
            }
        }
    }
    let mut w2 = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            w2.push(vec![1 - a as i64, 1 - b as i64]);
        }
    }
    let diag = |ws: &[Weight], k: usize| CMat::from_diagonal(&nalgebra::DVector::from_iterator(ws.len(), ws.iter().map(|w| C64::new(w[k] as f64, 0.0))));
    let a1 = kron_all(&[i2.clone(), i2.clone(), j.clone()]);
    let t1: Vec<CMat> = (0..2).map(|k| diag(&w1, k) * &a1).collect();
    let t2: Vec<CMat> = (0..2).map(|k| diag(&w2, k) * c2).collect();
    let modes = |x: CMat, a: &CMat| -> Vec<CMat> {
        let mut out = vec![x];
        for _ in 0..2 {
            let next = a * out.last().unwrap();
            out.push(next);
        }
        out
    };
    let xp1 = vec![modes(kron_all(&[e.clone(), i2.clone(), i2.clone()]), &a1), modes(kron_all(&[i2.clone(), e.clone(), i2.clone()]), &a1)];
    let xm1 = vec![modes(kron_all(&[f.clone(), i2.clone(), i2.clone()]), &a1), modes(kron_all(&[i2.clone(), f.clone(), i2.clone()]), &a1)];
    let a2 = CMat::identity(4, 4) * c2;
    let xp2 = vec![modes(kron_all(&[e.clone(), i2.clone()]), &a2), modes(kron_all(&[i2.clone(), e.clone()]), &a2)];
    let xm2 = vec![modes(kron_all(&[f.clone(), i2.clone()]), &a2), modes(kron_all(&[i2.clone(), f.clone()]), &a2)];
    let wa1 = kron_all(&[f.clone(), i2.clone(), p1.clone()]).kronecker(&kron_all(&[e.clone(), i2.clone()]));
    let wa2 = kron_all(&[i2.clone(), f.clone(), p2.clone()]).kronecker(&kron_all(&[i2.clone(), e.clone()]));
    let wa12 = kron_all(&[f.clone(), f.clone(), &p1 * &p2]).kronecker(&kron_all(&[e.clone(), e.clone()])) * C64::new(0.7, 0.0);
    OperatorData {
        n_simple: 2,
        hbar: C64::new(1.0, 0.0),
        f1: Factor { weights: w1, t: t1, x_plus: xp1, x_minus: xm1, xi: vec![] },
        f2: Factor { weights: w2, t: t2, x_plus: xp2, x_minus: xm2, xi: vec![] },
        support: vec![(vec![1, 0], wa1), (vec![0, 1], wa2), (vec![1, 1], wa12)],
        missing: vec![],
        // satisfies the checked preconditions only; it is not built from module data
        consistent: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// `exp(ħ W (s + K)^{-1})` for the synthetic instance; `W` is nilpotent.
    fn closed_form(data: &OperatorData, s: C64) -> CMat {
        let n = data.dim();
        let j = CMat::from_row_slice(2, 2, &[c(0.3, 0.1), c(0.5, 0.0), c(-0.2, 0.0), c(0.1, -0.2)]);
        let k = CMat::identity(4, 4).kronecker(&j).kronecker(&CMat::identity(4, 4)) - CMat::identity(n, n) * c(0.25, 0.0);
        let inv = (k + CMat::identity(n, n) * s).try_inverse().unwrap();
        let m = data.w_total() * inv * data.hbar;
        let mut term = CMat::identity(n, n);
        let mut out = CMat::identity(n, n);
        for p in 1..8 {
            term = &term * &m / C64::new(p as f64, 0.0);
            out += &term;
        }
        out
    }

    fn samples() -> Vec<C64> {
        (0..20).map(|k| C64::from_polar(3.0 + 0.35 * k as f64, 0.9 * k as f64)).collect()
    }

    #[test]
    fn synthetic_instance_is_valid_and_roundtrips() {
        let d = synthetic_instance();
        d.validate().unwrap();
        let spec = OperatorDataSpec::from(&d);
        let json = serde_json::to_string(&spec).unwrap();
        let back: OperatorDataSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(OperatorData::try_from(&back).unwrap(), d);
        // a W entry outside its weight block is rejected
        let mut bad = d.clone();
        bad.support[0].1[(0, 0)] = c(1.0, 0.0);
        assert!(bad.validate().is_err());
        // a declared root without a block is only an error once the cap reaches it
        let mut partial = spec.clone();
        partial.support.push(RootSpec { alpha: vec![2, 1], ht: Some(3), w: None });
        let p = OperatorData::try_from(&partial).unwrap();
        assert!(recurse_rminus(&p, 2, Mode::Exact).is_ok());
        assert!(matches!(recurse_rminus(&p, 3, Mode::Exact), Err(Error::MissingRootBlock(_))));
        partial.support[0].ht = Some(5);
        assert!(OperatorData::try_from(&partial).is_err());
    }

    #[test]
    fn exact_mode_matches_closed_form() {
        let d = synthetic_instance();
        let r = recurse_rminus(&d, 4, Mode::Exact).unwrap();
        for s in samples() {
            let diff = (r.eval(s) - closed_form(&d, s)).cmax();
            assert!(diff < 1e-12, "s={s}: {diff}");
        }
    }

    #[test]
    fn series_mode_matches_exact_mode() {
        let d = synthetic_instance();
        let ex = recurse_rminus(&d, 4, Mode::Exact).unwrap();
        let se = recurse_rminus(&d, 4, Mode::Series(60)).unwrap();
        for s in [c(9.0, 1.0), c(-6.0, 7.0), c(0.0, -10.0)] {
            assert!((ex.eval(s) - se.eval(s)).cmax() < 1e-10);
        }
    }

    #[test]
    fn triangularity_normalization_and_vanishing_order() {
        let d = synthetic_instance();
        let support: Vec<Weight> = d.support.iter().map(|(a, _)| a.clone()).collect();
        let se = recurse_rminus(&d, 4, Mode::Series(12)).unwrap();
        let pw = d.product_weights();
        let s = c(5.0, 2.0);
        for (k, beta) in se.betas.iter().enumerate() {
            let m = se.component(beta, s).unwrap();
            for i in 0..d.dim() {
                for j in 0..d.dim() {
                    if !is_shift(&pw[j], &pw[i], beta) {
                        assert_eq!(m[(i, j)], c(0.0, 0.0));
                    }
                }
            }
            let nu = nu(&support, beta).unwrap();
            for coeff in &se.series.as_ref().unwrap()[k][..nu] {
                assert!(coeff.iter().all(|z| *z == c(0.0, 0.0)));
            }
        }
        assert_eq!(nu(&support, &[2, 1]), Some(2));
        // R(∞) = 1
        let big = recurse_rminus(&d, 4, Mode::Exact).unwrap().eval(c(1e12, 0.0));
        assert!((big - CMat::identity(d.dim(), d.dim())).cmax() < 1e-10);
    }

    #[test]
    fn first_order_term() {
        let d = synthetic_instance();
        let se = recurse_rminus(&d, 1, Mode::Series(3)).unwrap();
        for (alpha, w) in &d.support {
            if ht(alpha) == 1 {
                let k = se.betas.iter().position(|b| b == alpha).unwrap();
                assert!((&se.series.as_ref().unwrap()[k][1] - w * d.hbar).cmax() < 1e-15);
            }
        }
    }

    #[test]
    fn trivial_data_gives_identity() {
        let d = synthetic_instance().abelian();
        let r = recurse_rminus(&d, 3, Mode::Exact).unwrap();
        assert_eq!(r.eval(c(2.0, 1.0)), CMat::identity(d.dim(), d.dim()));
        assert_eq!(verify_intertwiner(&d, &r, &d.rho(), &samples()), 0.0);
    }

    #[test]
    fn intertwiner_and_fault_injection() {
        let d = synthetic_instance();
        let r = recurse_rminus(&d, 4, Mode::Exact).unwrap();
        assert!(verify_intertwiner(&d, &r, &d.rho(), &samples()) < 1e-10);
        assert!(verify_intertwiner(&d, &r, &generic_h(2), &samples()) < 1e-10);
        // a perturbed W_α still satisfies the ρ^∨ equation it was built from, but not others
        let mut bad = d.clone();
        let (_, w) = &mut bad.support[0];
        let pos = w.iter().position(|z| z.norm() > 0.0).unwrap();
        w[pos] += c(0.5, 0.0);
        let rb = recurse_rminus(&bad, 4, Mode::Exact).unwrap();
        assert!(verify_intertwiner(&bad, &rb, &generic_h(2), &samples()) > 1e-3);
    }

    #[test]
    fn accumulation_order_is_irrelevant() {
        let d = synthetic_instance();
        let a = recurse_rminus_ordered(&d, 4, Mode::Series(10), &[0, 1, 2]).unwrap();
        let b = recurse_rminus_ordered(&d, 4, Mode::Series(10), &[2, 0, 1]).unwrap();
        for (x, y) in a.series.unwrap().iter().flatten().zip(b.series.unwrap().iter().flatten()) {
            assert!((x - y).cmax() <= 1e-13 * x.cmax().max(1.0));
        }
    }

    #[test]
    fn shift_covariance_at_data_level() {
        let d = synthetic_instance();
        let (a, b) = (c(0.4, -0.3), c(-0.7, 0.2));
        let base = recurse_rminus(&d, 4, Mode::Exact).unwrap();
        let moved = recurse_rminus(&d.shifted(a, b), 4, Mode::Exact).unwrap();
        for s in samples() {
            assert!((moved.eval(s) - base.eval(s + a - b)).cmax() < 1e-10);
        }
    }

    #[test]
    fn faddeev_leverrier_adjugate() {
        let m = CMat::from_fn(4, 4, |i, j| c((i * 3 + j) as f64 * 0.1 - 0.5, (i as f64 - j as f64) * 0.2));
        let (bs, cs) = faddeev_leverrier(&m);
        let lambda = c(1.3, -0.4);
        let adj = bs.iter().enumerate().fold(CMat::zeros(4, 4), |acc, (k, b)| acc + b * lambda.powu((3 - k) as u32));
        let det: C64 = cs.iter().enumerate().map(|(k, c)| c * lambda.powu((4 - k) as u32)).sum();
        let lm = CMat::identity(4, 4) * lambda - &m;
        assert!((adj * &lm - CMat::identity(4, 4) * det).cmax() < 1e-12);
        assert!((lm.determinant() - det).norm() < 1e-12);
    }

    #[test]
    fn cocycle_on_evaluation_data() {
        let t = sl2_triple(c(1.0, 0.0), [c(0.3, 0.0), c(-0.5, 0.2), c(0.1, -0.4)]);
        for (s1, s2) in [(c(2.0, 0.5), c(-1.5, 1.0)), (c(0.7, -2.0), c(3.0, 0.1)), (c(1.1, 0.3), c(0.0, 0.0))] {
            let r = verify_cocycle(&t, 3, s1, s2).unwrap();
            assert!(r < 1e-8, "({s1},{s2}): {r}");
        }
        let spec = TripleDataSpec::from(&t);
        let back = TripleData::try_from(&serde_json::from_str::<TripleDataSpec>(&serde_json::to_string(&spec).unwrap()).unwrap()).unwrap();
        assert_eq!(verify_cocycle(&back, 3, c(2.0, 0.5), c(-1.5, 1.0)).unwrap(), verify_cocycle(&t, 3, c(2.0, 0.5), c(-1.5, 1.0)).unwrap());
        let mut triv = t.clone();
        triv.factors[1] = Factor::trivial(1);
        triv.w12 = vec![(vec![1], CMat::zeros(2, 2))];
        triv.w23 = vec![(vec![1], CMat::zeros(2, 2))];
        assert!(verify_cocycle(&triv, 3, c(2.0, 0.5), c(-1.5, 1.0)).unwrap() < 1e-14);
    }

    #[test]
    fn abelian_assembly_is_unitary_and_solves_qybe() {
        use crate::cartan::{build_cartan, AffineTypeId};
        use crate::cato::{toy_a2_modules, CatOContext, R0Evaluator};
        use crate::resum::Eta;
        let ctx = CatOContext::new(&build_cartan(AffineTypeId::new('A', 2, 1)).unwrap()).unwrap();
        let (v1, v2) = toy_a2_modules(c(1.0, 0.0));
        let v3 = v2.translated(c(0.3, -0.2));
        let ev = |a: &crate::cato::DiagonalModuleData, b: &crate::cato::DiagonalModuleData| R0Evaluator::new(&ctx, a, b).unwrap();
        let (e12, e21, e13, e23) = (ev(&v1, &v2), ev(&v2, &v1), ev(&v1, &v3), ev(&v2, &v3));
        let (s1, s2) = (c(4.0, 1.0), c(3.0, -2.0));
        let full = |e: &R0Evaluator, s: C64| {
            let n = e.dim1 * e.dim2;
            let id = CMat::identity(n, n);
            assemble_full_r(&id, &id, &e.matrix(Eta::Up, s).unwrap(), e.dim1, e.dim2).unwrap()
        };
        let r12 = full(&e12, s1);
        let down21 = e21.matrix(Eta::Down, -s1).unwrap();
        let p = flip_matrix(3, 2);
        assert!((&r12 * &p * down21 * p.transpose() - CMat::identity(6, 6)).cmax() < 1e-8);
        let res = qybe_residual(&r12, &full(&e13, s1 + s2), &full(&e23, s2), [3, 2, 2]);
        assert!(res < 1e-12, "{res}");
    }

    #[test]
    fn embedding_and_flip() {
        let m = CMat::from_fn(6, 6, |i, j| c(i as f64, j as f64));
        let e = embed_pair(&m, [2, 3, 1], (0, 1));
        assert_eq!(e, m);
        let p = flip_matrix(2, 3);
        let a = CMat::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, 0.0));
        let b = CMat::from_fn(3, 3, |i, j| c((i * j) as f64, 1.0));
        assert_eq!(&p * b.kronecker(&a) * p.transpose(), a.kronecker(&b));
    }
}
