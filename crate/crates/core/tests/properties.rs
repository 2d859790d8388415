//! Property tests across module boundaries.

use ayang_core::cartan::supported_types;
use ayang_core::laurent::{q, qr};
use ayang_core::Q;
use ayang_core::resum::{Eta, LogTerm, PoleTerm, RationalLogInput, RaySolver, RealDifferenceOperator};
use ayang_core::rminus::{generic_h, recurse_rminus, synthetic_instance, verify_intertwiner, Mode};
use ayang_core::{analyze, build_cartan};
use num_complex::Complex64 as C64;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn det_by_elimination(mut m: Vec<Vec<Q>>) -> Q {
    let n = m.len();
    let mut det = Q::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else { return Q::zero() };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        det *= m[col][col].clone();
        for r in col + 1..n {
            let f = &m[r][col] / &m[col][col];
            for c in col..n {
                let sub = &f * &m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    det
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn det_bt_is_palindromic_and_matches_rational_evaluation(k in 0usize..48, num in -7i64..8, den in 1i64..6) {
        let types = supported_types(8);
        let id = types[k % types.len()];
        let d = build_cartan(id).unwrap();
        let rep = analyze(&d);
        prop_assert_eq!(rep.det_bt.substitute_power(-1), rep.det_bt.clone());
        prop_assume!(num != 0);
        let t = qr(num, den);
        // [n]_t = (t^n - t^-n)/(t - t^-1), entrywise, then elimination over Q
        let qint = |n: i64| -> Q {
            let p = |e: i64| if e >= 0 { t.pow(e as i32) } else { t.recip().pow((-e) as i32) };
            if t == q(1) || t == q(-1) { Q::from_integer(n.into()) * p(n - 1) } else { (p(n) - p(-n)) / (p(1) - p(-1)) }
        };
        let m: Vec<Vec<Q>> = d.b().iter().map(|row| row.iter().map(|&x| qint(x)).collect()).collect();
        prop_assert_eq!(rep.det_bt.eval_q(&t), det_by_elimination(m));
    }

    #[test]
    fn rminus_intertwines_off_the_pole_set(r in 3.0f64..20.0, theta in -3.1f64..3.1) {
        let data = synthetic_instance();
        let res = recurse_rminus(&data, 2, Mode::Exact).unwrap();
        let s = C64::from_polar(r, theta);
        prop_assert!(verify_intertwiner(&data, &res, &data.rho(), &[s]) < 1e-10);
        prop_assert!(verify_intertwiner(&data, &res, &generic_h(2), &[s]) < 1e-10);
    }

    #[test]
    fn ray_solution_satisfies_the_difference_equation(re in 1.0f64..9.0, im in -6.0f64..6.0) {
        let d = RealDifferenceOperator::new(vec![(0, -1.0), (1, 1.0)]).unwrap();
        let g = RationalLogInput {
            log_terms: vec![
                LogTerm { a: C64::new(0.3, 0.0), b: C64::new(-0.2, 0.0), c: C64::new(1.0, 0.0) },
                LogTerm { a: C64::new(0.1, 0.4), b: C64::new(-0.15, 0.4), c: C64::new(-2.0, 0.0) },
            ],
            pole_terms: vec![PoleTerm { a: C64::new(0.2, -0.1), l: 3, c: C64::new(1.0, 0.0) }],
        };
        let solver = RaySolver::from_input(d, C64::new(0.5, 0.0), &g).unwrap();
        prop_assert!(solver.residual(Eta::Up, C64::new(re, im)).unwrap() < 1e-8);
    }
}
