//! Dense exact linear algebra over `Q`.

use num_traits::{One, Zero};

use crate::laurent::Q;

pub type QMatrix = Vec<Vec<Q>>;

pub fn from_ints(rows: &[Vec<i64>]) -> QMatrix {
    rows.iter()
        .map(|r| r.iter().map(|&x| crate::laurent::q(x)).collect())
        .collect()
}

/// Reduced row echelon form; returns the pivot columns.
pub fn rref(m: &mut QMatrix) -> Vec<usize> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let t = &m[r][j] * &f;
                    m[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(m: &QMatrix) -> usize {
    let mut w = m.clone();
    rref(&mut w).len()
}

pub fn transpose(m: &QMatrix) -> QMatrix {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn matmul(a: &QMatrix, b: &QMatrix) -> QMatrix {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut acc = Q::zero();
                    for k in 0..inner {
                        if !row[k].is_zero() {
                            acc += &row[k] * &b[k][j];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn matvec(a: &QMatrix, x: &[Q]) -> Vec<Q> {
    a.iter()
        .map(|row| row.iter().zip(x).fold(Q::zero(), |acc, (r, v)| acc + r * v))
        .collect()
}

/// Some solution of `a x = b`, free variables set to zero; `None` if inconsistent.
/// Columns are eliminated in `order` (default: natural order).
pub fn solve_with_order(a: &QMatrix, b: &[Q], order: Option<&[usize]>) -> Option<Vec<Q>> {
    let n = a.first().map_or(0, |r| r.len());
    let perm: Vec<usize> = match order {
        Some(o) => o.to_vec(),
        None => (0..n).collect(),
    };
    let mut aug: QMatrix = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r: Vec<Q> = perm.iter().map(|&j| row[j].clone()).collect();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.contains(&n) {
        return None;
    }
    let mut x = vec![Q::zero(); n];
    for (r, &c) in pivots.iter().enumerate() {
        x[perm[c]] = aug[r][n].clone();
    }
    Some(x)
}

/// Inverse of a square nonsingular matrix.
pub fn inverse(a: &QMatrix) -> Option<QMatrix> {
    let n = a.len();
    let mut aug: QMatrix = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    let piv = rref(&mut aug);
    if piv.len() < n || piv[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Minimum-norm solution of a full-row-rank system: `x = Aᵀ (A Aᵀ)^{-1} b`.
pub fn min_norm_solve(a: &QMatrix, b: &[Q]) -> Option<Vec<Q>> {
    let at = transpose(a);
    let gram = matmul(a, &at);
    let ginv = inverse(&gram)?;
    let y = matvec(&ginv, b);
    Some(matvec(&at, &y))
}

/// Basis of the right null space.
pub fn nullspace(a: &QMatrix) -> Vec<Vec<Q>> {
    let n = a.first().map_or(0, |r| r.len());
    let mut w = a.clone();
    let pivots = rref(&mut w);
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); n];
            v[f] = Q::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -w[r][f].clone();
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::{q, qr};

    #[test]
    fn rank_and_nullspace() {
        let a = from_ints(&[vec![2, -1, -1], vec![-1, 2, -1], vec![-1, -1, 2]]);
        assert_eq!(rank(&a), 2);
        let ns = nullspace(&a);
        assert_eq!(ns, vec![vec![q(1), q(1), q(1)]]);
    }

    #[test]
    fn min_norm_is_orthogonal_to_kernel() {
        let a = from_ints(&[vec![1, 1, 0], vec![0, 1, 1]]);
        let b = vec![q(1), q(2)];
        let x = min_norm_solve(&a, &b).unwrap();
        assert_eq!(matvec(&a, &x), b);
        // kernel is (1,-1,1)
        assert_eq!(&x[0] - &x[1] + &x[2], q(0));
        assert_eq!(x, vec![qr(0, 1), q(1), q(1)]);
    }

    #[test]
    fn inconsistent_system() {
        let a = from_ints(&[vec![1, 1], vec![2, 2]]);
        assert!(solve_with_order(&a, &[q(1), q(3)], None).is_none());
        assert!(solve_with_order(&a, &[q(1), q(2)], Some(&[1, 0])).is_some());
    }
}
