//! Independent reference computations for the acceptance suite. None of these call the
//! implementation paths they are compared against.

use ayang_core::rminus::{weight_cone, CMat, OperatorData, Weight};
use ayang_core::Q;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use num_traits::{One, Zero};

/// Determinant of a rational matrix by Gaussian elimination with row swaps.
pub fn det_q(mut m: Vec<Vec<Q>>) -> Q {
    let n = m.len();
    let mut det = Q::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Q::zero();
        };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let piv = m[col][col].clone();
        det *= &piv;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &piv;
            for c in col..n {
                let sub = &f * &m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    det
}

/// Exact rank by elimination.
pub fn rank_q(mut m: Vec<Vec<Q>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !m[r][col].is_zero()) else { continue };
        m.swap(p, rank);
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let f = &m[r][col] / &m[rank][col];
                for c in col..cols {
                    let sub = &f * &m[rank][c];
                    m[r][c] -= sub;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// The full triangular solution of `[□T(ρ^∨) + s h⊗1, R] = ħ R [h⊗1, W]` with `R - 1`
/// supported on the weight shifts in the cone, as one dense linear system.
pub fn brute_force_rminus(data: &OperatorData, cap: i64, s: C64) -> CMat {
    let n = data.dim();
    let rho = data.rho();
    let a = data.box_t(&rho) + data.h1(&rho) * s;
    let h1 = data.h1(&rho);
    let w = data.w_total();
    let cmat = &h1 * &w - &w * &h1;
    let support: Vec<Weight> = data.support.iter().map(|(a, _)| a.clone()).collect();
    let cone = weight_cone(&support, cap);
    let pw = data.product_weights();
    let shifted = |src: &(Weight, Weight), tgt: &(Weight, Weight)| {
        cone.iter().any(|b| {
            src.0.iter().zip(&tgt.0).zip(b).all(|((x, y), d)| *y == x - d)
                && src.1.iter().zip(&tgt.1).zip(b).all(|((x, y), d)| *y == x + d)
        })
    };
    let mut unknowns = Vec::new();
    let mut slot = vec![usize::MAX; n * n];
    for i in 0..n {
        for j in 0..n {
            if shifted(&pw[j], &pw[i]) {
                slot[i * n + j] = unknowns.len();
                unknowns.push((i, j));
            }
        }
    }
    let m = unknowns.len();
    let hbar = data.hbar;
    // column k: image of the unit matrix e_{pq} under X ↦ [A, X] - ħ X C
    let mut sys = DMatrix::<C64>::zeros(m, m);
    for (k, &(p, q)) in unknowns.iter().enumerate() {
        for i in 0..n {
            let r = slot[i * n + q];
            if r != usize::MAX {
                sys[(r, k)] += a[(i, p)];
            }
        }
        for j in 0..n {
            let r = slot[p * n + j];
            if r != usize::MAX {
                sys[(r, k)] -= a[(q, j)] + hbar * cmat[(q, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(m, unknowns.iter().map(|&(i, j)| hbar * cmat[(i, j)]));
    let x = sys.lu().solve(&rhs).expect("the triangular system is regular at generic s");
    let mut r = CMat::identity(n, n);
    for (k, &(i, j)) in unknowns.iter().enumerate() {
        r[(i, j)] = x[k];
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use ayang_core::laurent::q;

    #[test]
    fn small_determinants_and_ranks() {
        let m = vec![vec![q(0), q(2), q(1)], vec![q(1), q(1), q(0)], vec![q(3), q(0), q(1)]];
        // expansion along the first row: -2(1) + 1(-3) = -5
        assert_eq!(det_q(m.clone()), q(-5));
        assert_eq!(rank_q(m), 3);
        assert_eq!(rank_q(vec![vec![q(1), q(2)], vec![q(2), q(4)]]), 1);
    }
}
