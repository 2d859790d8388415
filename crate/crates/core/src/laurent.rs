//! Exact univariate Laurent polynomials over big rationals, and square matrices of them.
//!
//! The same type serves for the spectral shift variable `T` and for the formal
//! parameter `ħ`; the variable name only matters for display.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Finite sum of `c_e T^e`. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct LaurentPoly {
    coeffs: BTreeMap<i64, Q>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        Self::monomial(c, 0)
    }

    pub fn monomial(c: Q, e: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(e, c);
        }
        Self { coeffs }
    }

    /// `T^e`.
    pub fn var_pow(e: i64) -> Self {
        Self::monomial(Q::one(), e)
    }

    pub fn from_terms<I: IntoIterator<Item = (i64, Q)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn from_int_terms(terms: &[(i64, i64)]) -> Self {
        Self::from_terms(terms.iter().map(|&(e, c)| (e, q(c))))
    }

    pub fn add_term(&mut self, e: i64, c: Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(e).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs.get(&0).is_some_and(|c| c.is_one())
    }

    pub fn coeff(&self, e: i64) -> Q {
        self.coeffs.get(&e).cloned().unwrap_or_else(Q::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &Q)> {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn min_exp(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    /// Returns the constant if the polynomial has only an exponent-0 term (or is zero).
    pub fn as_constant(&self) -> Option<Q> {
        match self.coeffs.len() {
            0 => Some(Q::zero()),
            1 => self.coeffs.get(&0).cloned(),
            _ => None,
        }
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            coeffs: self.coeffs.iter().map(|(e, x)| (*e, x * c)).collect(),
        }
    }

    /// Multiplies by `T^k`.
    pub fn shift(&self, k: i64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(e, x)| (e + k, x.clone())).collect(),
        }
    }

    /// `p(T) -> p(T^k)`; `k = -1` is the bar involution.
    pub fn substitute_power(&self, k: i64) -> Self {
        assert!(k != 0, "substitute_power needs a nonzero exponent");
        Self {
            coeffs: self.coeffs.iter().map(|(e, x)| (e * k, x.clone())).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    pub fn eval_q(&self, x: &Q) -> Q {
        assert!(!x.is_zero() || self.min_exp().unwrap_or(0) >= 0, "evaluation at 0 of a Laurent polynomial with negative exponents");
        let mut acc = Q::zero();
        for (e, c) in &self.coeffs {
            let xe = if *e >= 0 {
                num_traits::pow(x.clone(), *e as usize)
            } else {
                num_traits::pow(x.recip(), (-*e) as usize)
            };
            acc += c * xe;
        }
        acc
    }

    pub fn eval_c(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(e, c)| z.powi(*e as i32) * q_to_f64(c))
            .sum()
    }

    /// `m_l = Σ c_r r^l`, i.e. `(T d/dT)^l p` at `T = 1`.
    pub fn moment(&self, l: u32) -> Q {
        let mut acc = Q::zero();
        for (e, c) in &self.coeffs {
            acc += c * q(*e).pow(l as i32);
        }
        acc
    }

    /// Order of vanishing at `T = 1`.
    pub fn order_at_one(&self) -> Result<u32> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        // p(e^t) has Taylor coefficients m_l / l!; a nonzero Laurent polynomial has
        // finite order, bounded by its number of terms.
        let bound = self.coeffs.len() as u32;
        for l in 0..=bound {
            if !self.moment(l).is_zero() {
                return Ok(l);
            }
        }
        unreachable!("a nonzero Laurent polynomial vanishes to order < number of terms")
    }

    /// Taylor coefficients of `p(e^t)` in `t` through `t^order`.
    pub fn taylor_exp_sub(&self, order: usize) -> Result<Vec<Q>> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let mut out = Vec::with_capacity(order + 1);
        let mut fact = Q::one();
        for l in 0..=order {
            if l > 0 {
                fact *= q(l as i64);
            }
            out.push(self.moment(l as u32) / &fact);
        }
        Ok(out)
    }

    /// Exact division. `None` if `d` does not divide `self` in `Q[T, T^-1]`.
    pub fn div_exact(&self, d: &LaurentPoly) -> Option<LaurentPoly> {
        assert!(!d.is_zero(), "division by the zero polynomial");
        if self.is_zero() {
            return Some(Self::zero());
        }
        let (dmin, dmax) = (d.min_exp().unwrap(), d.max_exp().unwrap());
        let lead = d.coeff(dmax);
        let mut r = self.clone();
        let mut quo = Self::zero();
        // Units T^k make the quotient a Laurent polynomial whenever the cleared
        // polynomials divide, so long division from the top suffices.
        while !r.is_zero() {
            let rmax = r.max_exp().unwrap();
            let rmin = r.min_exp().unwrap();
            if rmax - rmin < dmax - dmin {
                return None;
            }
            let c = r.coeff(rmax) / &lead;
            let e = rmax - dmax;
            quo.add_term(e, c.clone());
            r = &r - &d.shift(e).scale(&c);
        }
        Some(quo)
    }

    /// Polynomial remainder of `self` modulo `d`, both treated as ordinary polynomials
    /// (exponents must be nonnegative).
    pub fn poly_rem(&self, d: &LaurentPoly) -> LaurentPoly {
        assert!(!d.is_zero());
        let dmax = d.max_exp().unwrap();
        let lead = d.coeff(dmax);
        let mut r = self.clone();
        while let Some(rmax) = r.max_exp() {
            if rmax < dmax {
                break;
            }
            let c = r.coeff(rmax) / &lead;
            r = &r - &d.shift(rmax - dmax).scale(&c);
        }
        r
    }

    /// Monic gcd of two ordinary polynomials (exponents nonnegative).
    pub fn poly_gcd(a: &LaurentPoly, b: &LaurentPoly) -> LaurentPoly {
        let (mut x, mut y) = (a.clone(), b.clone());
        while !y.is_zero() {
            let r = x.poly_rem(&y);
            x = y;
            y = r;
        }
        match x.max_exp() {
            Some(m) => {
                let lead = x.coeff(m);
                x.scale(&lead.recip())
            }
            None => x,
        }
    }

    /// Ordinary derivative `d/dT`.
    pub fn derivative(&self) -> LaurentPoly {
        Self::from_terms(self.coeffs.iter().map(|(e, c)| (e - 1, c * q(*e))))
    }

    /// `T^{-min} p`, an ordinary polynomial with nonzero constant term.
    pub fn cleared(&self) -> LaurentPoly {
        match self.min_exp() {
            Some(m) => self.shift(-m),
            None => Self::zero(),
        }
    }

    pub fn to_string_in(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (e, c)) in self.coeffs.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = match *e {
                0 => String::new(),
                1 => var.to_string(),
                e => format!("{var}^{e}"),
            };
            if mono.is_empty() {
                out.push_str(&mag.to_string());
            } else if mag.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{mag}*{mono}"));
            }
        }
        out
    }
}

impl fmt::Debug for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_string_in("T"))
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_string_in("T"))
    }
}

impl<'a> Add<&'a LaurentPoly> for &'a LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for LaurentPoly {
    type Output = LaurentPoly;
    fn add(mut self, rhs: LaurentPoly) -> LaurentPoly {
        self += &rhs;
        self
    }
}

impl AddAssign<&LaurentPoly> for LaurentPoly {
    fn add_assign(&mut self, rhs: &LaurentPoly) {
        for (e, c) in &rhs.coeffs {
            self.add_term(*e, c.clone());
        }
    }
}

impl SubAssign<&LaurentPoly> for LaurentPoly {
    fn sub_assign(&mut self, rhs: &LaurentPoly) {
        for (e, c) in &rhs.coeffs {
            self.add_term(*e, -c.clone());
        }
    }
}

impl<'a> Sub<&'a LaurentPoly> for &'a LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for LaurentPoly {
    type Output = LaurentPoly;
    fn sub(mut self, rhs: LaurentPoly) -> LaurentPoly {
        self -= &rhs;
        self
    }
}

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        LaurentPoly {
            coeffs: self.coeffs.iter().map(|(e, c)| (*e, -c.clone())).collect(),
        }
    }
}

impl Neg for LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        -&self
    }
}

impl<'a> Mul<&'a LaurentPoly> for &'a LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut acc: BTreeMap<i64, Q> = BTreeMap::new();
        for (e1, c1) in &self.coeffs {
            for (e2, c2) in &rhs.coeffs {
                *acc.entry(e1 + e2).or_insert_with(Q::zero) += c1 * c2;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        LaurentPoly { coeffs: acc }
    }
}

impl Mul for LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: LaurentPoly) -> LaurentPoly {
        &self * &rhs
    }
}

/// `[n]_T = (T^n - T^-n)/(T - T^-1)`.
pub fn quantum_integer(n: i64) -> LaurentPoly {
    if n == 0 {
        return LaurentPoly::zero();
    }
    let m = n.abs();
    let p = LaurentPoly::from_terms((0..m).map(|j| (m - 1 - 2 * j, Q::one())));
    if n < 0 {
        -p
    } else {
        p
    }
}

/// Square matrix of Laurent polynomials.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LaurentMatrix {
    n: usize,
    entries: Vec<LaurentPoly>,
}

impl LaurentMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> LaurentPoly) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        Self { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { LaurentPoly::one() } else { LaurentPoly::zero() })
    }

    pub fn diag(d: &[LaurentPoly]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i].clone() } else { LaurentPoly::zero() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentPoly {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: LaurentPoly) {
        self.entries[i * self.n + j] = p;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).clone())
    }

    pub fn mul(&self, other: &LaurentMatrix) -> LaurentMatrix {
        assert_eq!(self.n, other.n);
        Self::from_fn(self.n, |i, j| {
            let mut acc = LaurentPoly::zero();
            for k in 0..self.n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                acc += &(a * other.get(k, j));
            }
            acc
        })
    }

    pub fn scale(&self, p: &LaurentPoly) -> LaurentMatrix {
        Self::from_fn(self.n, |i, j| self.get(i, j) * p)
    }

    /// Entrywise substitution `T -> value`.
    pub fn eval_q(&self, x: &Q) -> Vec<Vec<Q>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).eval_q(x)).collect())
            .collect()
    }

    fn minor(&self, skip_row: usize, skip_col: usize) -> LaurentMatrix {
        let rows: Vec<usize> = (0..self.n).filter(|&r| r != skip_row).collect();
        let cols: Vec<usize> = (0..self.n).filter(|&c| c != skip_col).collect();
        Self::from_fn(self.n - 1, |i, j| self.get(rows[i], cols[j]).clone())
    }

    /// Exact determinant. Cofactor expansion for `n <= 4`, fraction-free
    /// (Bareiss) elimination otherwise.
    pub fn det(&self) -> LaurentPoly {
        if self.n <= 4 {
            self.det_cofactor()
        } else {
            self.det_bareiss()
        }
    }

    pub fn det_cofactor(&self) -> LaurentPoly {
        match self.n {
            0 => LaurentPoly::one(),
            1 => self.get(0, 0).clone(),
            2 => &(self.get(0, 0) * self.get(1, 1)) - &(self.get(0, 1) * self.get(1, 0)),
            n => {
                let mut acc = LaurentPoly::zero();
                for j in 0..n {
                    let a = self.get(0, j);
                    if a.is_zero() {
                        continue;
                    }
                    let term = a * &self.minor(0, j).det_cofactor();
                    if j % 2 == 0 {
                        acc += &term;
                    } else {
                        acc -= &term;
                    }
                }
                acc
            }
        }
    }

    /// Bareiss elimination over `Q[T]` after clearing each row's minimal `T`-power.
    pub fn det_bareiss(&self) -> LaurentPoly {
        let n = self.n;
        if n == 0 {
            return LaurentPoly::one();
        }
        let mut shift_total = 0i64;
        let mut m: Vec<Vec<LaurentPoly>> = (0..n)
            .map(|i| {
                let row: Vec<LaurentPoly> = (0..n).map(|j| self.get(i, j).clone()).collect();
                let lo = row.iter().filter_map(|p| p.min_exp()).min().unwrap_or(0);
                shift_total += lo;
                row.into_iter().map(|p| p.shift(-lo)).collect()
            })
            .collect();
        let mut sign = false;
        let mut prev = LaurentPoly::one();
        for k in 0..n - 1 {
            if m[k][k].is_zero() {
                match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                    Some(r) => {
                        m.swap(k, r);
                        sign = !sign;
                    }
                    None => return LaurentPoly::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &(&m[i][j] * &m[k][k]) - &(&m[i][k] * &m[k][j]);
                    m[i][j] = num
                        .div_exact(&prev)
                        .expect("Bareiss quotient is exact");
                }
                m[i][k] = LaurentPoly::zero();
            }
            prev = m[k][k].clone();
        }
        let d = m[n - 1][n - 1].shift(shift_total);
        if sign {
            -d
        } else {
            d
        }
    }

    /// Classical adjoint: `adj(M) M = M adj(M) = det(M) I`.
    pub fn adjugate(&self) -> LaurentMatrix {
        let n = self.n;
        if n == 1 {
            return Self::identity(1);
        }
        let cof: Vec<LaurentPoly> = {
            use rayon::prelude::*;
            (0..n * n)
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = (idx / n, idx % n);
                    // adj_{ij} = (-1)^{i+j} det(M with row j and column i removed)
                    let d = self.minor(j, i).det();
                    if (i + j) % 2 == 0 {
                        d
                    } else {
                        -d
                    }
                })
                .collect()
        };
        Self { n, entries: cof }
    }
}
