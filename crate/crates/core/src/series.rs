//! Formal series in `s^{-1}` over the primitive tensor space, with coefficients that
//! are Laurent polynomials in `ħ`.
//!
//! `t_{i,a}` is keyed by `(i, a)`; `t_{i,a} ⊗ t_{j,b}` by `(i, a, j, b)`. A series stores
//! `F_0..=F_N` with `F_n` the coefficient of `s^{-n-1}`.

use std::collections::BTreeMap;

use num_integer::binomial;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::cartan::AffineCartanDatum;
use crate::error::{Error, Result};
use crate::laurent::{q, LaurentMatrix, LaurentPoly, Q};
use crate::qcartan::{self, QCartanReport};

pub type PrimKey = (usize, u32);
pub type TensorKey = (usize, u32, usize, u32);

/// `ħ^e` times a rational.
pub fn hbar_mono(c: Q, e: i64) -> LaurentPoly {
    LaurentPoly::monomial(c, e)
}

/// `(ħ/2)^l`.
fn half_hbar_pow(l: usize) -> LaurentPoly {
    hbar_mono(Q::new(1.into(), num_bigint::BigInt::from(2).pow(l as u32)), l as i64)
}

fn binom_q(n: usize, k: usize) -> Q {
    if k > n {
        return Q::zero();
    }
    Q::from_integer(binomial(num_bigint::BigInt::from(n), num_bigint::BigInt::from(k)))
}

fn factorial(n: usize) -> Q {
    (1..=n).fold(Q::one(), |acc, k| acc * q(k as i64))
}

/// Finite linear combination of symbols `K` with `ħ`-Laurent coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comb<K: Ord> {
    terms: BTreeMap<K, LaurentPoly>,
}

impl<K: Ord + Clone> Default for Comb<K> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<K: Ord + Clone> Comb<K> {
    pub fn zero() -> Self {
        Comb { terms: BTreeMap::new() }
    }

    pub fn basis(k: K) -> Self {
        let mut c = Self::zero();
        c.add_term(k, LaurentPoly::one());
        c
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, k: &K) -> LaurentPoly {
        self.terms.get(k).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &LaurentPoly)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, k: K, c: LaurentPoly) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(k) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Comb<K>, c: &LaurentPoly) {
        if c.is_zero() {
            return;
        }
        for (k, v) in &other.terms {
            self.add_term(k.clone(), v * c);
        }
    }

    pub fn add(&self, other: &Comb<K>) -> Comb<K> {
        let mut out = self.clone();
        out.add_scaled(other, &LaurentPoly::one());
        out
    }

    pub fn sub(&self, other: &Comb<K>) -> Comb<K> {
        let mut out = self.clone();
        out.add_scaled(other, &-LaurentPoly::one());
        out
    }

    pub fn scale(&self, c: &LaurentPoly) -> Comb<K> {
        let mut out = Self::zero();
        out.add_scaled(self, c);
        out
    }

    pub fn scale_q(&self, c: &Q) -> Comb<K> {
        self.scale(&LaurentPoly::constant(c.clone()))
    }

    pub fn map_keys<K2: Ord + Clone>(&self, f: impl Fn(&K) -> K2) -> Comb<K2> {
        let mut out = Comb::zero();
        for (k, v) in &self.terms {
            out.add_term(f(k), v.clone());
        }
        out
    }

    /// Exponents of `ħ` that occur anywhere.
    pub fn hbar_exponents(&self) -> std::collections::BTreeSet<i64> {
        self.terms.values().flat_map(|p| p.terms().map(|(e, _)| e).collect::<Vec<_>>()).collect()
    }
}

/// `Σ c·t_{i,a}`.
pub type PrimVector = Comb<PrimKey>;
/// `Σ c·t_{i,a} ⊗ t_{j,b}`.
pub type PrimTensorCoeff = Comb<TensorKey>;

pub fn tensor(u: &PrimVector, v: &PrimVector) -> PrimTensorCoeff {
    let mut out = Comb::zero();
    for (&(i, a), cu) in u.iter() {
        for (&(j, b), cv) in v.iter() {
            out.add_term((i, a, j, b), cu * cv);
        }
    }
    out
}

pub fn flip(c: &PrimTensorCoeff) -> PrimTensorCoeff {
    c.map_keys(|&(i, a, j, b)| (j, b, i, a))
}

/// `τ_a(t_{i,m}) = Σ_{r≤m} C(m,r) a^{m-r} t_{i,r}`.
pub fn shift_t(a: &Q, v: &PrimVector) -> PrimVector {
    let mut out = Comb::zero();
    for (&(i, m), c) in v.iter() {
        for r in 0..=m {
            let f = binom_q(m as usize, r as usize) * a.pow((m - r) as i32);
            out.add_term((i, r), c.scale(&f));
        }
    }
    out
}

/// `τ_a ⊗ τ_b`.
pub fn shift_t2(a: &Q, b: &Q, c: &PrimTensorCoeff) -> PrimTensorCoeff {
    let mut out = Comb::zero();
    for (&(i, m, j, n), v) in c.iter() {
        for r in 0..=m {
            let fa = binom_q(m as usize, r as usize) * a.pow((m - r) as i32);
            for p in 0..=n {
                let fb = binom_q(n as usize, p as usize) * b.pow((n - p) as i32);
                out.add_term((i, r, j, p), v.scale(&(&fa * &fb)));
            }
        }
    }
    out
}

/// `c_r = Σ_i a_i t_{i,r}`.
pub fn c_element(datum: &AffineCartanDatum, r: u32) -> PrimVector {
    let mut v = Comb::zero();
    for (i, &a) in datum.marks.iter().enumerate() {
        v.add_term((i, r), LaurentPoly::constant(q(a)));
    }
    v
}

/// Truncated series `Σ_{n≤N} F_n s^{-n-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Series<K: Ord> {
    coeffs: Vec<Comb<K>>,
}

pub type PrimTensorSeries = Series<TensorKey>;

impl<K: Ord + Clone + Send + Sync> Series<K> {
    pub fn zero(order: usize) -> Self {
        Series { coeffs: vec![Comb::zero(); order + 1] }
    }

    pub fn from_coeffs(coeffs: Vec<Comb<K>>) -> Self {
        assert!(!coeffs.is_empty(), "a series carries at least F_0");
        Series { coeffs }
    }

    /// Highest valid index `N`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> &Comb<K> {
        &self.coeffs[n]
    }

    pub fn coeffs(&self) -> &[Comb<K>] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, n: usize, c: Comb<K>) {
        self.coeffs[n] = c;
    }

    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.order(), "cannot extend a series beyond its valid order");
        Series { coeffs: self.coeffs[..=order].to_vec() }
    }

    fn zip(&self, other: &Self, f: impl Fn(&Comb<K>, &Comb<K>) -> Comb<K>) -> Self {
        let n = self.order().min(other.order());
        Series { coeffs: (0..=n).map(|k| f(&self.coeffs[k], &other.coeffs[k])).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: &LaurentPoly) -> Self {
        Series { coeffs: self.coeffs.iter().map(|x| x.scale(c)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn map_keys<K2: Ord + Clone>(&self, f: impl Fn(&K) -> K2 + Copy) -> Series<K2> {
        Series { coeffs: self.coeffs.iter().map(|c| c.map_keys(f)).collect() }
    }

    /// `F(-s)`: `F_n ↦ (-1)^{n+1} F_n`.
    pub fn reflect(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| if n % 2 == 0 { c.scale(&-LaurentPoly::one()) } else { c.clone() })
            .collect();
        Series { coeffs }
    }

    /// `F(s + c)` re-expanded in `s^{-1}`: index `N` collects `C(N,n)(-c)^{N-n} F_n`.
    pub fn translate(&self, c: &Q) -> Self {
        let n_max = self.order();
        let coeffs = (0..=n_max)
            .map(|nn| {
                let mut acc = Comb::zero();
                for n in 0..=nn {
                    let f = binom_q(nn, n) * (-c).pow((nn - n) as i32);
                    acc.add_scaled(&self.coeffs[n], &LaurentPoly::constant(f));
                }
                acc
            })
            .collect();
        Series { coeffs }
    }

    /// Extend with zero coefficients.
    pub fn pad(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order.max(self.order()) + 1, Comb::zero());
        Series { coeffs }
    }

    /// First index whose coefficient is nonzero.
    pub fn leading_index(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }
}

impl PrimTensorSeries {
    pub fn flip(&self) -> Self {
        self.map_keys(|&(i, a, j, b)| (j, b, i, a))
    }

    pub fn shift2(&self, a: &Q, b: &Q) -> Self {
        Series { coeffs: self.coeffs.iter().map(|c| shift_t2(a, b, c)).collect() }
    }
}

/// `D(T)` acting by `T·f(s) = f(s - ħ/2)`, through its moments at `T = 1`.
#[derive(Clone, Debug)]
pub struct DifferenceOperator {
    pub d: LaurentPoly,
    overrides: BTreeMap<usize, Q>,
}

impl DifferenceOperator {
    pub fn new(d: LaurentPoly) -> Self {
        assert!(!d.is_zero(), "difference operator must be nonzero");
        DifferenceOperator { d, overrides: BTreeMap::new() }
    }

    /// Replace one moment, for fault injection.
    pub fn with_moment(mut self, l: usize, m: Q) -> Self {
        self.overrides.insert(l, m);
        self
    }

    /// `m_l = Σ d_r r^l`.
    pub fn moment(&self, l: usize) -> Q {
        self.overrides.get(&l).cloned().unwrap_or_else(|| self.d.moment(l as u32))
    }

    /// Order of vanishing at `T = 1`, read off the (possibly overridden) moments.
    pub fn order(&self) -> usize {
        (0..).find(|&l| !self.moment(l).is_zero()).expect("nonzero operator has finite order")
    }

    /// `G_N = Σ_l C(N,l) (ħ/2)^l m_l F_{N-l}`.
    pub fn apply<K: Ord + Clone + Send + Sync>(&self, f: &Series<K>) -> Series<K> {
        let n_max = f.order();
        let w: Vec<LaurentPoly> = (0..=n_max).map(|l| half_hbar_pow(l).scale(&self.moment(l))).collect();
        let coeffs = (0..=n_max)
            .into_par_iter()
            .map(|nn| {
                let mut acc = Comb::zero();
                for l in 0..=nn {
                    if w[l].is_zero() {
                        continue;
                    }
                    acc.add_scaled(&f.coeffs[nn - l], &w[l].scale(&binom_q(nn, l)));
                }
                acc
            })
            .collect();
        Series { coeffs }
    }

    /// The unique `F` with `apply(F) = G`, for `G` vanishing to the operator's order.
    /// The result has order `G.order() - k`. `reverse` sums the correction terms in the
    /// opposite order; exact arithmetic makes the two agree.
    pub fn solve<K: Ord + Clone + Send + Sync>(&self, g: &Series<K>, reverse: bool) -> Result<Series<K>> {
        let k = self.order();
        if g.order() < k {
            return Err(Error::NotSolvable(format!("right-hand side shorter than the operator order {k}")));
        }
        for n in 0..k {
            if !g.coeffs[n].is_zero() {
                return Err(Error::NotSolvable(format!(
                    "right-hand side has a nonzero s^-{} coefficient but the operator has order {k}",
                    n + 1
                )));
            }
        }
        let n_out = g.order() - k;
        let w: Vec<LaurentPoly> =
            (0..=g.order()).map(|l| half_hbar_pow(l).scale(&self.moment(l))).collect();
        let mut out: Vec<Comb<K>> = Vec::with_capacity(n_out + 1);
        for m in k..=g.order() {
            let mut acc = g.coeffs[m].clone();
            let mut ls: Vec<usize> = (k + 1..=m).collect();
            if reverse {
                ls.reverse();
            }
            for l in ls {
                if w[l].is_zero() {
                    continue;
                }
                acc.add_scaled(&out[m - l], &-w[l].scale(&binom_q(m, l)));
            }
            let pivot = w[k].scale(&binom_q(m, k));
            out.push(divide_by_monomial(&acc, &pivot));
        }
        Ok(Series { coeffs: out })
    }
}

/// Divide every coefficient by a single-term `ħ`-Laurent polynomial.
fn divide_by_monomial<K: Ord + Clone>(c: &Comb<K>, m: &LaurentPoly) -> Comb<K> {
    assert_eq!(m.num_terms(), 1, "pivot must be a monomial in ħ");
    let (e, coef) = m.terms().next().map(|(e, c)| (e, c.clone())).unwrap();
    c.scale(&hbar_mono(coef.recip(), -e))
}

/// `τ_ij(s) = ħ² Σ_{m≥1} m! s^{-m-1} Σ_{a+b=m-1} (-1)^a t_{i,a}/a! ⊗ t_{j,b}/b!`.
pub fn tau_formal(i: usize, j: usize, order: usize) -> PrimTensorSeries {
    let mut s = Series::zero(order);
    for m in 1..=order {
        let mut c = Comb::zero();
        let mf = factorial(m);
        for a in 0..m {
            let b = m - 1 - a;
            let sign = if a % 2 == 0 { q(1) } else { q(-1) };
            let f = &mf * sign / (factorial(a) * factorial(b));
            c.add_term((i, a as u32, j, b as u32), hbar_mono(f, 2));
        }
        s.coeffs[m] = c;
    }
    s
}

/// Precomputed matrix data for one affine type.
#[derive(Clone, Debug)]
pub struct FormalContext {
    pub datum: AffineCartanDatum,
    pub report: QCartanReport,
    pub dop: DifferenceOperator,
}

impl FormalContext {
    pub fn new(datum: &AffineCartanDatum) -> Self {
        let report = qcartan::analyze(datum);
        let dop = DifferenceOperator::new(qcartan::difference_operator(&report.det_bt));
        FormalContext { datum: datum.clone(), report, dop }
    }

    pub fn bstar(&self) -> &LaurentMatrix {
        &self.report.bstar
    }

    /// `ct_0 = Σ B*,(2)_ij t_{i,0} ⊗ t_{j,0}`.
    pub fn ct0(&self) -> PrimTensorCoeff {
        let mut c = Comb::zero();
        for (i, row) in self.report.bstar2.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                c.add_term((i, 0, j, 0), LaurentPoly::constant(x.clone()));
            }
        }
        c
    }

    /// `½c₂⊗c₀ − c₁⊗c₁ + ½c₀⊗c₂`.
    pub fn c_quadratic(&self) -> PrimTensorCoeff {
        let c = |r| c_element(&self.datum, r);
        let half = LaurentPoly::constant(Q::new(1.into(), 2.into()));
        let mut out = tensor(&c(2), &c(0)).scale(&half);
        out.add_scaled(&tensor(&c(1), &c(1)), &-LaurentPoly::one());
        out.add_scaled(&tensor(&c(0), &c(2)), &half);
        out
    }

    /// `g(s) = Σ_ij B(T)*_ji · τ_ij(s)`.
    pub fn g_formal(&self, order: usize) -> PrimTensorSeries {
        let n = self.datum.n_nodes();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let parts: Vec<PrimTensorSeries> = pairs
            .par_iter()
            .filter(|&&(i, j)| !self.bstar().get(j, i).is_zero())
            .map(|&(i, j)| DifferenceOperator::new(self.bstar().get(j, i).clone()).apply(&tau_formal(i, j, order)))
            .collect();
        parts.iter().fold(Series::zero(order), |acc, p| acc.add(p))
    }

    /// The central terms removed by the regularization.
    pub fn regularization(&self, order: usize) -> PrimTensorSeries {
        let cz = LaurentPoly::constant(self.report.czero.clone());
        let h2 = hbar_mono(q(1), 2);
        let c0 = c_element(&self.datum, 0);
        let c1 = c_element(&self.datum, 1);
        let mut r = Series::zero(order);
        if order >= 1 {
            r.coeffs[1] = tensor(&c0, &c0).scale(&(&cz * &h2));
        }
        if order >= 2 {
            let mut c = tensor(&c0, &c1);
            c.add_scaled(&tensor(&c1, &c0), &-LaurentPoly::one());
            r.coeffs[2] = c.scale(&(&(&cz * &h2) * &LaurentPoly::constant(q(2))));
        }
        r
    }

    pub fn g_reg_formal(&self, order: usize) -> PrimTensorSeries {
        self.g_formal(order).sub(&self.regularization(order))
    }

    /// `L` through `s^{-order-1}`.
    pub fn solve_l(&self, order: usize) -> Result<PrimTensorSeries> {
        self.solve_l_with(&self.dop, order, false)
    }

    pub fn solve_l_with(&self, dop: &DifferenceOperator, order: usize, reverse: bool) -> Result<PrimTensorSeries> {
        let k = dop.order();
        dop.solve(&self.g_reg_formal(order + k), reverse)
    }

    /// `(c̄₀/(q̄₀ħ))(½c₂⊗c₀ − c₁⊗c₁ + ½c₀⊗c₂) + (ħ/(4q̄₀)) ct₀`.
    pub fn leading_l_closed_form(&self) -> PrimTensorCoeff {
        let qd = &self.report.qdzero;
        let mut out = self.c_quadratic().scale(&hbar_mono(&self.report.czero / qd, -1));
        out.add_scaled(&self.ct0(), &hbar_mono(Q::one() / (q(4) * qd), 1));
        out
    }

    /// Checks `[L(s), x^±_{k,n} ⊗ 1]` and `[L(s), 1 ⊗ x^±_{k,n}]` against their closed forms
    /// after applying `D` to both sides, for `n ≤ m_max` and through `s^{-order-1}`.
    pub fn verify_commutation(&self, k: usize, order: usize, m_max: u32) -> CommutationReport {
        self.verify_commutation_with(&self.dop, k, order, m_max)
    }

    pub fn verify_commutation_with(
        &self,
        dop: &DifferenceOperator,
        k: usize,
        order: usize,
        m_max: u32,
    ) -> CommutationReport {
        let l = match self.solve_l_with(dop, order, false) {
            Ok(l) => l,
            Err(e) => return CommutationReport { ok: false, mismatch: Some(format!("solve failed: {e}")) },
        };
        let b = self.datum.b();
        let bt = |i: usize| b[i][k];
        let hbar = hbar_mono(q(1), 1);
        for n in 0..=m_max {
            for sign in [1i64, -1] {
                for slot in [0u8, 1] {
                    let mut lhs: Series<CommKey> = Series::zero(order);
                    for (idx, f) in l.coeffs.iter().enumerate() {
                        let mut acc = Comb::zero();
                        for (&(i, a, j, bb), c) in f.iter() {
                            let (node, mode) = if slot == 0 { (i, a) } else { (j, bb) };
                            for (m, w) in t_x_commutator(bt(node), mode, n) {
                                let key = if slot == 0 { (m, j, bb) } else { (m, i, a) };
                                acc.add_term(key, (c * &w).scale(&q(sign)));
                            }
                        }
                        lhs.coeffs[idx] = acc;
                    }
                    let mut rhs: Series<CommKey> = Series::zero(order);
                    for nn in 0..=order {
                        let mut acc = Comb::zero();
                        for a in 0..=nn {
                            let r = nn - a;
                            if slot == 0 {
                                let s = if a % 2 == 0 { q(sign) } else { q(-sign) };
                                acc.add_term((n + a as u32, k, r as u32), hbar.scale(&(s * binom_q(nn, a))));
                            } else {
                                // here `a` plays the role of the x-mode offset and `r` the t-mode
                                let s = if r % 2 == 0 { q(sign) } else { q(-sign) };
                                acc.add_term((n + a as u32, k, r as u32), hbar.scale(&(s * binom_q(nn, a))));
                            }
                        }
                        rhs.coeffs[nn] = acc;
                    }
                    let dl = dop.apply(&lhs);
                    let dr = dop.apply(&rhs);
                    for idx in 0..=order {
                        if dl.coeffs[idx] != dr.coeffs[idx] {
                            return CommutationReport {
                                ok: false,
                                mismatch: Some(format!(
                                    "sign {sign:+}, slot {}, x-mode {n}, s^-{}",
                                    slot + 1,
                                    idx + 1
                                )),
                            };
                        }
                    }
                }
            }
        }
        CommutationReport { ok: true, mismatch: None }
    }
}

/// `(x-mode, node, t-mode)` of `x_{k,m} ⊗ t_{j,b}` (or `t_{j,b} ⊗ x_{k,m}`).
pub type CommKey = (u32, usize, u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommutationReport {
    pub ok: bool,
    pub mismatch: Option<String>,
}

/// `[t_{i,m}, x^+_{k,n}] = B_ik Σ_l C(m,2l) (ħB_ik/2)^{2l}/(2l+1) x^+_{k,m+n-2l}`,
/// returned as `(x-mode, coefficient)`; `x^-` carries an overall minus sign.
pub fn t_x_commutator(b_ik: i64, m: u32, n: u32) -> Vec<(u32, LaurentPoly)> {
    if b_ik == 0 {
        return Vec::new();
    }
    (0..=m / 2)
        .map(|l| {
            let l = l as usize;
            let c = q(b_ik) * binom_q(m as usize, 2 * l) * Q::new(b_ik.into(), 2.into()).pow(2 * l as i32)
                / q(2 * l as i64 + 1);
            (m + n - 2 * l as u32, hbar_mono(c, 2 * l as i64))
        })
        .collect()
}

/// Free-function forms of the context methods.
pub fn g_formal(datum: &AffineCartanDatum, order: usize) -> PrimTensorSeries {
    FormalContext::new(datum).g_formal(order)
}

pub fn g_reg_formal(datum: &AffineCartanDatum, order: usize) -> PrimTensorSeries {
    FormalContext::new(datum).g_reg_formal(order)
}

pub fn solve_l(datum: &AffineCartanDatum, order: usize) -> Result<PrimTensorSeries> {
    FormalContext::new(datum).solve_l(order)
}

pub fn verify_commutation(datum: &AffineCartanDatum, k: usize, order: usize, m_max: u32) -> bool {
    FormalContext::new(datum).verify_commutation(k, order, m_max).ok
}

/// A monomial in the commuting symbols `t_{i,a}^{(slot)}`, sorted.
pub type SymMonomial = Vec<(u8, usize, u32)>;

/// `exp(L) - 1` expanded through total symbol degree `max_degree`, as a series in
/// `s^{-1}` of the same order as `L`.
pub fn exp_truncated(l: &PrimTensorSeries, max_degree: usize) -> Series<SymMonomial> {
    let order = l.order();
    let as_sym = total_base(l);
    let mut total = as_sym.clone();
    let mut power = as_sym;
    let mut fact = Q::one();
    // L^j has symbol degree 2j
    for j in 2..=max_degree / 2 {
        power = series_product(&power, &total_base(l));
        fact *= q(j as i64);
        if power.is_zero() {
            break;
        }
        total = total.add(&power.scale(&LaurentPoly::constant(fact.recip())));
    }
    debug_assert_eq!(total.order(), order);
    total
}

fn total_base(l: &PrimTensorSeries) -> Series<SymMonomial> {
    l.map_keys(|&(i, a, j, b)| {
        let mut m = vec![(0u8, i, a), (1u8, j, b)];
        m.sort();
        m
    })
}

/// Product of two `s^{-1}`-series of symmetric-algebra elements, truncated to the
/// shorter order: index `n + m + 1` collects `F_n G_m`.
pub fn series_product(f: &Series<SymMonomial>, g: &Series<SymMonomial>) -> Series<SymMonomial> {
    let order = f.order().min(g.order());
    let mut out = Series::zero(order);
    for n in 0..=order {
        for m in 0..=order {
            let idx = n + m + 1;
            if idx > order {
                break;
            }
            for (ka, ca) in f.coeffs[n].iter() {
                for (kb, cb) in g.coeffs[m].iter() {
                    let mut key = ka.clone();
                    key.extend(kb.iter().cloned());
                    key.sort();
                    out.coeffs[idx].add_term(key, ca * cb);
                }
            }
        }
    }
    out
}
