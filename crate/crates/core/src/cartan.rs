//! Affine Cartan data, the cubic moment vector `μ`, and the `ζ` coefficient system.
//!
//! Convention: `a[i][j] = α_j(h_i)`, node 0 is the extending vertex, and the
//! finite subdiagram is labelled left to right. `B = D·A` with `B[i][j] = d_i a_ij`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{q, Q};
use crate::linalg::{self, QMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AffineTypeId {
    pub family: char,
    /// Kac's subscript (e.g. 4 in `D4~3`); not always `|I| - 1` for twisted types.
    pub rank: u32,
    pub twist: u32,
}

impl AffineTypeId {
    pub fn new(family: char, rank: u32, twist: u32) -> Self {
        Self { family, rank, twist }
    }
}

impl fmt::Display for AffineTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}~{}", self.family, self.rank, self.twist)
    }
}

impl FromStr for AffineTypeId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnsupportedType(s.to_string());
        let (head, twist) = s.trim().split_once('~').ok_or_else(bad)?;
        let mut chars = head.chars();
        let family = chars.next().ok_or_else(bad)?.to_ascii_uppercase();
        let rank: u32 = chars.as_str().parse().map_err(|_| bad())?;
        let twist: u32 = twist.parse().map_err(|_| bad())?;
        let id = AffineTypeId { family, rank, twist };
        layout(&id).ok_or_else(bad)?;
        Ok(id)
    }
}

/// `(d, edges)` with `B[i][j] = -max(d_i, d_j)` on each edge.
fn layout(id: &AffineTypeId) -> Option<(Vec<i64>, Vec<(usize, usize)>)> {
    let n = id.rank as usize;
    let chain = |k: usize| (0..k).map(|i| (i, i + 1)).collect::<Vec<_>>();
    let l = match (id.family, id.twist) {
        ('A', 1) if n >= 2 => {
            let mut e = chain(n);
            e.push((n, 0));
            (vec![1; n + 1], e)
        }
        ('B', 1) if n >= 3 => {
            let mut d = vec![2; n];
            d.push(1);
            let mut e = vec![(0, 2)];
            e.extend((1..n).map(|i| (i, i + 1)));
            (d, e)
        }
        ('C', 1) if n >= 2 => {
            let mut d = vec![2];
            d.extend(std::iter::repeat_n(1, n - 1));
            d.push(2);
            (d, chain(n))
        }
        ('D', 1) if n >= 4 => {
            let mut e = vec![(0, 2)];
            e.extend((1..n - 1).map(|i| (i, i + 1)));
            e.push((n - 2, n));
            (vec![1; n + 1], e)
        }
        ('E', 1) if n == 6 => (vec![1; 7], vec![(1, 3), (3, 4), (4, 5), (5, 6), (2, 4), (0, 2)]),
        ('E', 1) if n == 7 => (vec![1; 8], vec![(0, 1), (1, 3), (3, 4), (4, 5), (5, 6), (6, 7), (2, 4)]),
        ('E', 1) if n == 8 => (
            vec![1; 9],
            vec![(1, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 0), (2, 4)],
        ),
        ('F', 1) if n == 4 => (vec![2, 2, 2, 1, 1], chain(4)),
        ('G', 1) if n == 2 => (vec![3, 3, 1], chain(2)),
        // A_{2l}^{(2)}, l >= 2
        ('A', 2) if n >= 4 && n.is_multiple_of(2) => {
            let l = n / 2;
            let mut d = vec![1];
            d.extend(std::iter::repeat_n(2, l - 1));
            d.push(4);
            (d, chain(l))
        }
        // A_{2l-1}^{(2)}, l >= 3
        ('A', 2) if n >= 5 && n % 2 == 1 => {
            let l = n.div_ceil(2);
            let mut d = vec![1; l];
            d.push(2);
            let mut e = vec![(0, 2)];
            e.extend((1..l).map(|i| (i, i + 1)));
            (d, e)
        }
        // D_{l+1}^{(2)}, l >= 2
        ('D', 2) if n >= 3 => {
            let l = n - 1;
            let mut d = vec![1];
            d.extend(std::iter::repeat_n(2, l - 1));
            d.push(1);
            (d, chain(l))
        }
        ('E', 2) if n == 6 => (vec![1, 1, 1, 2, 2], chain(4)),
        ('D', 3) if n == 4 => (vec![1, 1, 3], chain(2)),
        _ => return None,
    };
    Some(l)
}

/// Every supported type whose ID subscript is at most `max_rank`, in a fixed order.
pub fn supported_types(max_rank: u32) -> Vec<AffineTypeId> {
    let mut out = Vec::new();
    for (fam, tw) in [('A', 1), ('B', 1), ('C', 1), ('D', 1), ('E', 1), ('F', 1), ('G', 1), ('A', 2), ('D', 2), ('E', 2), ('D', 3)] {
        for r in 1..=max_rank {
            let id = AffineTypeId::new(fam, r, tw);
            if layout(&id).is_some() {
                out.push(id);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineCartanDatum {
    pub id: AffineTypeId,
    /// `a[i][j] = α_j(h_i)`.
    pub a: Vec<Vec<i64>>,
    pub d: Vec<i64>,
    pub marks: Vec<i64>,
    pub comarks: Vec<i64>,
    pub ht_delta: i64,
}

impl AffineCartanDatum {
    pub fn n_nodes(&self) -> usize {
        self.d.len()
    }

    /// Symmetrized matrix `B[i][j] = d_i a_ij`.
    pub fn b(&self) -> Vec<Vec<i64>> {
        let n = self.n_nodes();
        (0..n)
            .map(|i| (0..n).map(|j| self.d[i] * self.a[i][j]).collect())
            .collect()
    }

    pub fn b_q(&self) -> QMatrix {
        linalg::from_ints(&self.b())
    }

    /// Checks every structural invariant; used by constructors and tests.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        let bad = |m: &str| Err(Error::InvalidData(format!("{}: {m}", self.id)));
        if self.a.len() != n || self.a.iter().any(|r| r.len() != n) {
            return bad("shape");
        }
        for i in 0..n {
            if self.a[i][i] != 2 {
                return bad("diagonal");
            }
            for j in 0..n {
                if i != j && (self.a[i][j] > 0 || (self.a[i][j] == 0) != (self.a[j][i] == 0)) {
                    return bad("off-diagonal sign pattern");
                }
                if self.d[i] * self.a[i][j] != self.d[j] * self.a[j][i] {
                    return bad("symmetrizability");
                }
            }
        }
        if self.d.iter().any(|&x| x <= 0) || gcd_all(&self.d) != 1 {
            return bad("d not positive and primitive");
        }
        if self.marks.iter().any(|&x| x <= 0) || gcd_all(&self.marks) != 1 {
            return bad("marks not positive and primitive");
        }
        for j in 0..n {
            let right: i64 = (0..n).map(|i| self.a[j][i] * self.marks[i]).sum();
            let left: i64 = (0..n).map(|i| self.comarks[i] * self.a[i][j]).sum();
            if right != 0 || left != 0 {
                return bad("null vectors");
            }
        }
        if (0..n).any(|i| self.comarks[i] != self.d[i] * self.marks[i]) {
            return bad("comarks");
        }
        if self.ht_delta != self.marks.iter().sum::<i64>() {
            return bad("height of delta");
        }
        Ok(())
    }
}

fn gcd_all(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| g.gcd(&x))
}

pub fn build_cartan(id: AffineTypeId) -> Result<AffineCartanDatum> {
    let (d, edges) = layout(&id).ok_or_else(|| Error::UnsupportedType(id.to_string()))?;
    let n = d.len();
    let mut b = vec![vec![0i64; n]; n];
    for i in 0..n {
        b[i][i] = 2 * d[i];
    }
    for &(i, j) in &edges {
        let v = -d[i].max(d[j]);
        b[i][j] = v;
        b[j][i] = v;
    }
    let a: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| b[i][j] / d[i]).collect()).collect();
    let marks = primitive_kernel_vector(&a)?;
    let comarks: Vec<i64> = (0..n).map(|i| d[i] * marks[i]).collect();
    let ht_delta = marks.iter().sum();
    let datum = AffineCartanDatum { id, a, d, marks, comarks, ht_delta };
    datum.validate()?;
    Ok(datum)
}

/// The positive primitive integer vector spanning `ker A` (corank one for affine types).
fn primitive_kernel_vector(a: &[Vec<i64>]) -> Result<Vec<i64>> {
    let ns = linalg::nullspace(&linalg::from_ints(a));
    if ns.len() != 1 {
        return Err(Error::InvalidData("Cartan matrix is not of corank one".into()));
    }
    let v = &ns[0];
    let lcm = v.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Q::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    let sign = if ints.iter().any(|x| x.is_negative()) { -1 } else { 1 };
    ints.iter()
        .map(|x| {
            let y: i64 = (x / &g).try_into().map_err(|_| Error::InvalidData("mark overflow".into()))?;
            Ok(sign * y)
        })
        .collect()
}

/// `μ_j = Σ_i a_i (d_i a_ij)^3`, summed directly.
pub fn mu_brute(datum: &AffineCartanDatum) -> Vec<i64> {
    let b = datum.b();
    let n = datum.n_nodes();
    (0..n)
        .map(|j| (0..n).map(|i| datum.marks[i] * b[i][j].pow(3)).sum())
        .collect()
}

/// `μ_j = d_j^3 (6 a_j - Σ_{i: a_ji < -1} m_ji a_i)` with `m_ji = a_ji (1 - a_ji^2)`.
pub fn mu_closed_form(datum: &AffineCartanDatum) -> Vec<i64> {
    let n = datum.n_nodes();
    (0..n)
        .map(|j| {
            let corr: i64 = (0..n)
                .filter(|&i| datum.a[j][i] < -1)
                .map(|i| {
                    let x = datum.a[j][i];
                    x * (1 - x * x) * datum.marks[i]
                })
                .sum();
            datum.d[j].pow(3) * (6 * datum.marks[j] - corr)
        })
        .collect()
}

/// Brute-force μ, after asserting agreement with the closed form.
pub fn mu_vector(datum: &AffineCartanDatum) -> Vec<i64> {
    let brute = mu_brute(datum);
    assert_eq!(brute, mu_closed_form(datum), "μ closed form disagrees for {}", datum.id);
    brute
}

fn augmented(datum: &AffineCartanDatum, mu: &[i64]) -> QMatrix {
    let b = datum.b();
    b.iter()
        .zip(mu)
        .map(|(row, &m)| row.iter().chain(std::iter::once(&m)).map(|&x| q(x)).collect())
        .collect()
}

/// Exact rank of `(B | μ)`.
pub fn augmented_rank(datum: &AffineCartanDatum) -> usize {
    linalg::rank(&augmented(datum, &mu_vector(datum)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PivotRule {
    /// The exact minimum-norm solution; canonical.
    MinNorm,
    /// Free variables set to zero, eliminating unknowns in this order.
    /// Unknown 0 is `ζ`, unknown `1 + i` is `ζ_i`.
    Order(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TCoefficients {
    pub zeta: Q,
    pub zeta_i: Vec<Q>,
}

/// Solves `(1/4) ζ μ_j + Σ_i d_j a_ji ζ_i = δ_{j,0}`.
pub fn solve_t_coefficients(datum: &AffineCartanDatum, rule: &PivotRule) -> Result<TCoefficients> {
    solve_t_coefficients_with(datum, &mu_vector(datum), rule)
}

/// As [`solve_t_coefficients`] with a caller-supplied `μ`.
pub fn solve_t_coefficients_with(datum: &AffineCartanDatum, mu: &[i64], rule: &PivotRule) -> Result<TCoefficients> {
    let n = datum.n_nodes();
    let b = datum.b();
    let quarter = crate::laurent::qr(1, 4);
    let m: QMatrix = (0..n)
        .map(|j| {
            let mut row = vec![&quarter * q(mu[j])];
            row.extend((0..n).map(|i| q(b[j][i])));
            row
        })
        .collect();
    let rhs: Vec<Q> = (0..n).map(|j| if j == 0 { Q::one() } else { Q::zero() }).collect();
    let x = match rule {
        PivotRule::MinNorm => {
            if linalg::rank(&m) < n {
                linalg::solve_with_order(&m, &rhs, None).ok_or(Error::NoSolution)?;
                return Err(Error::NoSolution);
            }
            linalg::min_norm_solve(&m, &rhs).ok_or(Error::NoSolution)?
        }
        PivotRule::Order(order) => {
            let mut seen = vec![false; n + 1];
            if order.len() != n + 1 || order.iter().any(|&k| k > n || std::mem::replace(&mut seen[k], true)) {
                return Err(Error::InvalidData("pivot order must be a permutation of 0..=|I|".into()));
            }
            linalg::solve_with_order(&m, &rhs, Some(order)).ok_or(Error::NoSolution)?
        }
    };
    if x[0].is_zero() {
        return Err(Error::NoSolution);
    }
    Ok(TCoefficients { zeta: x[0].clone(), zeta_i: x[1..].to_vec() })
}

/// Residual vector of the `ζ` system at a candidate solution.
pub fn t_system_residual(datum: &AffineCartanDatum, t: &TCoefficients) -> Vec<Q> {
    let mu = mu_vector(datum);
    let b = datum.b();
    let n = datum.n_nodes();
    (0..n)
        .map(|j| {
            let mut r = &t.zeta * q(mu[j]) / q(4);
            for i in 0..n {
                r += q(b[j][i]) * &t.zeta_i[i];
            }
            if j == 0 {
                r -= Q::one();
            }
            r
        })
        .collect()
}

/// A positive integer vector in `Zμ + range(B)`, following the constructions used
/// to prove full rank of `(B | μ)`. Returns the vector and a short description.
///
/// The C2/G2/D4~3 rows index columns of `B` from 1; the generic families use node labels.
pub fn gamma_vector(datum: &AffineCartanDatum) -> (Vec<i64>, String) {
    let mu = mu_vector(datum);
    let b = datum.b();
    let n = datum.n_nodes();
    let col = |j: usize| -> Vec<i64> { (0..n).map(|i| b[i][j]).collect() };
    let combine = |terms: &[(i64, usize)]| -> Vec<i64> {
        let mut g = mu.clone();
        for &(k, j) in terms {
            for (gi, cj) in g.iter_mut().zip(col(j)) {
                *gi += k * cj;
            }
        }
        g
    };
    let id = datum.id;
    match (id.family, id.rank, id.twist) {
        ('C', 2, 1) => (combine(&[(1, 1)]), "mu + B_2 (1-based column)".into()),
        ('G', 2, 1) => (combine(&[(16, 2)]), "mu + 16 B_3 (1-based column)".into()),
        ('D', 4, 3) => (combine(&[(-5, 2)]), "mu - 5 B_3 (1-based column)".into()),
        ('B', _, 1) => (combine(&[(1, n - 1)]), format!("mu + B_{} (node column)", n - 1)),
        ('D', _, 2) => (combine(&[(1, 0), (1, n - 1)]), format!("mu + B_0 + B_{} (node columns)", n - 1)),
        ('A', r, 2) if r % 2 == 0 => (combine(&[(1, 0)]), "mu + B_0 (node column)".into()),
        _ => (mu, "mu".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::qr;

    fn id(s: &str) -> AffineTypeId {
        s.parse().unwrap()
    }

    #[test]
    fn a2_datum() {
        let d = build_cartan(id("A2~1")).unwrap();
        assert_eq!(d.a, vec![vec![2, -1, -1], vec![-1, 2, -1], vec![-1, -1, 2]]);
        assert_eq!(d.d, vec![1, 1, 1]);
        assert_eq!(d.marks, vec![1, 1, 1]);
    }

    #[test]
    fn gamma_reference_rows() {
        let g2 = build_cartan(id("G2~1")).unwrap();
        assert_eq!(g2.b(), vec![vec![6, -3, 0], vec![-3, 6, -3], vec![0, -3, 2]]);
        assert_eq!(mu_vector(&g2), vec![162, 324, -30]);
        let c2 = build_cartan(id("C2~1")).unwrap();
        assert_eq!(c2.b(), vec![vec![4, -2, 0], vec![-2, 2, -2], vec![0, -2, 4]]);
        assert_eq!(mu_vector(&c2), vec![48, 0, 48]);
        let d43 = build_cartan(id("D4~3")).unwrap();
        assert_eq!(d43.b(), vec![vec![2, -1, 0], vec![-1, 2, -3], vec![0, -3, 6]]);
        assert_eq!(mu_vector(&d43), vec![6, -12, 162]);
        assert_eq!(gamma_vector(&c2).0, vec![46, 2, 46]);
        assert_eq!(gamma_vector(&g2).0, vec![162, 276, 2]);
        assert_eq!(gamma_vector(&d43).0, vec![6, 3, 132]);
    }

    #[test]
    fn marks_of_exceptional_types() {
        assert_eq!(build_cartan(id("E8~1")).unwrap().marks, vec![1, 2, 3, 4, 6, 5, 4, 3, 2]);
        assert_eq!(build_cartan(id("E7~1")).unwrap().marks, vec![1, 2, 2, 3, 4, 3, 2, 1]);
        assert_eq!(build_cartan(id("E6~1")).unwrap().marks, vec![1, 1, 2, 2, 3, 2, 1]);
        assert_eq!(build_cartan(id("F4~1")).unwrap().marks, vec![1, 2, 3, 4, 2]);
        assert_eq!(build_cartan(id("E6~2")).unwrap().marks, vec![1, 2, 3, 2, 1]);
        assert_eq!(build_cartan(id("A6~2")).unwrap().marks, vec![2, 2, 2, 1]);
    }

    #[test]
    fn excluded_and_unknown_types() {
        for s in ["A1~1", "A2~2", "B2~1", "E9~1", "X3~1", "D4~4", "A3", ""] {
            assert!(matches!(s.parse::<AffineTypeId>(), Err(Error::UnsupportedType(_))), "{s}");
        }
        assert!(build_cartan(AffineTypeId::new('A', 1, 1)).is_err());
    }

    #[test]
    fn all_supported_types_validate() {
        let types = supported_types(8);
        assert_eq!(types.len(), 7 + 6 + 7 + 5 + 3 + 1 + 1 + 5 + 6 + 1 + 1);
        for t in types {
            let d = build_cartan(t).unwrap();
            d.validate().unwrap();
            assert_eq!(mu_brute(&d), mu_closed_form(&d), "{t}");
            assert_eq!(augmented_rank(&d), d.n_nodes(), "{t}");
            let (g, _) = gamma_vector(&d);
            assert!(g.iter().all(|&x| x > 0), "{t}: {g:?}");
            assert_eq!(t.to_string().parse::<AffineTypeId>().unwrap(), t);
        }
    }

    #[test]
    fn simply_laced_mu() {
        for t in ["A5~1", "D6~1", "E7~1"] {
            let d = build_cartan(id(t)).unwrap();
            let expect: Vec<i64> = d.marks.iter().map(|m| 6 * m).collect();
            assert_eq!(mu_vector(&d), expect);
        }
    }

    #[test]
    fn zeta_system() {
        for t in supported_types(8) {
            let d = build_cartan(t).unwrap();
            let sol = solve_t_coefficients(&d, &PivotRule::MinNorm).unwrap();
            assert!(t_system_residual(&d, &sol).iter().all(|r| r.is_zero()), "{t}");
            // ζ is the same for every solution: contract with the marks.
            let mu = mu_vector(&d);
            let amu: i64 = d.marks.iter().zip(&mu).map(|(a, m)| a * m).sum();
            assert_eq!(sol.zeta, qr(4 * d.marks[0], amu), "{t}");
            let n = d.n_nodes();
            let rev: Vec<usize> = (0..=n).rev().collect();
            let alt = solve_t_coefficients(&d, &PivotRule::Order(rev)).unwrap();
            assert!(t_system_residual(&d, &alt).iter().all(|r| r.is_zero()));
            assert_eq!(alt.zeta, sol.zeta);
        }
    }

    #[test]
    fn zeta_a2_concrete() {
        let d = build_cartan(id("A2~1")).unwrap();
        let sol = solve_t_coefficients(&d, &PivotRule::MinNorm).unwrap();
        // ζ = 4 a_0 / (a·μ); the minimum-norm ζ_i are orthogonal to ker B.
        assert_eq!(sol.zeta, qr(2, 9));
        assert_eq!(sol.zeta_i, vec![qr(2, 9), qr(-1, 9), qr(-1, 9)]);
    }

    #[test]
    fn zeta_without_mu_has_no_solution() {
        let d = build_cartan(id("A2~1")).unwrap();
        let zero = vec![0; 3];
        assert_eq!(solve_t_coefficients_with(&d, &zero, &PivotRule::MinNorm), Err(Error::NoSolution));
        assert_eq!(solve_t_coefficients_with(&d, &zero, &PivotRule::Order(vec![0, 1, 2, 3])), Err(Error::NoSolution));
    }
}
