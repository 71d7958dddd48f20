mod common;

use common::{prox_bruteforce, slope_norm};
use proptest::prelude::*;
use slopegraph::slope::{dual_sorted_l1, prox_sorted_l1, sorted_l1, LambdaSequence};

fn lambda_strategy(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..3.0, m).prop_map(|mut l| {
        l.sort_by(|a, b| b.total_cmp(a));
        l
    })
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..=6).prop_flat_map(|m| {
        (
            prop::collection::vec(-5.0f64..5.0, m),
            lambda_strategy(m),
            0.25f64..4.0,
        )
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn documented_example_matches_oracle() {
    let oracle = prox_bruteforce(&[4.0, 2.0], &[3.0, 1.0], 1.0);
    assert!(max_abs_diff(&oracle, &[1.0, 1.0]) < 1e-12);
}

#[test]
fn ties_and_zeros_match_oracle() {
    let cases: [(&[f64], &[f64], f64); 4] = [
        (&[1.0, -1.0, 1.0], &[1.5, 1.0, 0.5], 1.0),
        (&[0.0, 0.0, 3.0], &[1.0, 1.0, 1.0], 2.0),
        (&[2.0, 2.0, 2.0, 2.0], &[4.0, 3.0, 2.0, 1.0], 1.0),
        (&[-0.1, 0.2, -0.3], &[0.0, 0.0, 0.0], 1.0),
    ];
    for (v, l, rho) in cases {
        let lib = prox_sorted_l1(v, &LambdaSequence::new(l.to_vec()).unwrap(), rho).unwrap();
        let oracle = prox_bruteforce(v, l, rho);
        assert!(max_abs_diff(&lib, &oracle) < 1e-12, "{v:?}: {lib:?} vs {oracle:?}");
    }
}

#[test]
fn shrunk_entries_are_exact_zeros() {
    let lam = LambdaSequence::new(vec![2.0, 1.5, 1.0, 0.5]).unwrap();
    let x = prox_sorted_l1(&[3.0, -0.2, 0.1, 1.0], &lam, 1.0).unwrap();
    assert_eq!(x[1], 0.0);
    assert_eq!(x[2], 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_bruteforce((v, l, rho) in instance()) {
        let lib = prox_sorted_l1(&v, &LambdaSequence::new(l.clone()).unwrap(), rho).unwrap();
        let oracle = prox_bruteforce(&v, &l, rho);
        prop_assert!(max_abs_diff(&lib, &oracle) < 1e-9, "{:?} vs {:?}", lib, oracle);
    }

    #[test]
    fn norm_matches_direct_sort((v, l, _rho) in instance()) {
        let lam = LambdaSequence::new(l.clone()).unwrap();
        prop_assert!((sorted_l1(&v, &lam).unwrap() - slope_norm(&v, &l)).abs() < 1e-12);
    }

    #[test]
    fn output_order_follows_input_order((v, l, rho) in instance()) {
        let mut sorted: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let x = prox_sorted_l1(&sorted, &LambdaSequence::new(l).unwrap(), rho).unwrap();
        prop_assert!(x.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(x.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn permutation_and_sign_equivariance(
        (v, l, rho) in instance(),
        seed in any::<u64>(),
    ) {
        let m = v.len();
        let lam = LambdaSequence::new(l).unwrap();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut state = seed | 1;
        for i in (1..m).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let signs: Vec<f64> = (0..m).map(|i| if (seed >> i) & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let transformed: Vec<f64> = (0..m).map(|i| signs[i] * v[perm[i]]).collect();
        let base = prox_sorted_l1(&v, &lam, rho).unwrap();
        let out = prox_sorted_l1(&transformed, &lam, rho).unwrap();
        for i in 0..m {
            prop_assert!((out[i] - signs[i] * base[perm[i]]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_expansive(
        (a, l, rho) in instance(),
        shift in prop::collection::vec(-3.0f64..3.0, 6),
    ) {
        let lam = LambdaSequence::new(l).unwrap();
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let pa = prox_sorted_l1(&a, &lam, rho).unwrap();
        let pb = prox_sorted_l1(&b, &lam, rho).unwrap();
        let out: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum();
        let inp: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        prop_assert!(out.sqrt() <= inp.sqrt() + 1e-12);
    }

    #[test]
    fn optimality_certificate((v, l, rho) in instance()) {
        prop_assume!(l[0] > 1e-3);
        let lam = LambdaSequence::new(l).unwrap();
        let x = prox_sorted_l1(&v, &lam, rho).unwrap();
        // g = ρ(v - x) must be a subgradient of J at x: J^D(g) <= 1 and <g, x> = J(x).
        let g: Vec<f64> = v.iter().zip(&x).map(|(a, b)| rho * (a - b)).collect();
        prop_assert!(dual_sorted_l1(&g, &lam).unwrap() <= 1.0 + 1e-8);
        let inner: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        let j = sorted_l1(&x, &lam).unwrap();
        prop_assert!((inner - j).abs() <= 1e-9 * (1.0 + j));
    }
}
