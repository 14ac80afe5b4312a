mod common;

use num_traits::{Signed, Zero};
use omega_semigroup::exponential::{EvalOptions, Evaluator, SeriesKind};
use omega_semigroup::rational::{self, int, ratio, Rational};
use omega_semigroup::reachability::DependencyAnalyzer;
use omega_semigroup::verifier::{probe_exact_failure, random_rational, random_vector};
use omega_semigroup::{
    decide_generation, dependency_closure, exp_apply, GeneratorVerdict, ReachabilityResult,
    SequenceVector,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_abs_diff(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(Rational::zero(), |m, d| if d > m { d } else { m })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn apply_is_linear(seed in any::<u64>(), a in -4i64..=4, b in -4i64..=4, n in 1usize..15) {
        let mut r = rng(seed);
        let op = common::random_operator(&mut r);
        let x = random_vector(&mut r, n + 3);
        let y = SequenceVector::new(vec![int(1), ratio(-1, 2)], omega_semigroup::Tail::Constant(ratio(1, 3)));
        let (a, b) = (int(a), ratio(b, 3));
        let combined = SequenceVector::linear_combination(&a, &x, &b, &y);
        let lhs = op.apply(&combined, n);
        let rhs: Vec<Rational> = op
            .apply(&x, n)
            .into_iter()
            .zip(op.apply(&y, n))
            .map(|(u, v)| &a * u + &b * v)
            .collect();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn power_rows_follow_the_recursion(seed in any::<u64>(), n in 1usize..12) {
        let op = common::random_operator(&mut rng(seed));
        prop_assert_eq!(op.power_row(n, 0).unwrap().entries().to_vec(), vec![(n, int(1))]);
        prop_assert_eq!(op.power_row(n, 1).unwrap(), op.row(n));
        let rows: Vec<_> = op.power_rows(n).take(9).map(Result::unwrap).collect();
        for k in 0..8 {
            prop_assert_eq!(&rows[k + 1], &rows[k].times(&op).unwrap());
            prop_assert_eq!(&rows[k], &op.power_row(n, k).unwrap());
        }
    }

    #[test]
    fn rows_repeat_with_the_period(seed in any::<u64>()) {
        let op = common::random_operator(&mut rng(seed));
        let p = op.period();
        let start = op.n0() + op.max_abs_offset() as usize;
        for n in start..=start + 4 * p {
            let shifted: Vec<(usize, Rational)> = op
                .row(n)
                .entries()
                .iter()
                .map(|(c, v)| (c + p, v.clone()))
                .collect();
            prop_assert_eq!(op.row(n + p).entries().to_vec(), shifted);
            prop_assert_eq!(op.row(n), op.row(n));
        }
    }

    #[test]
    fn finite_closures_are_closed(seed in any::<u64>(), n in 1usize..15) {
        let op = common::random_operator(&mut rng(seed));
        match dependency_closure(&op, n).unwrap() {
            ReachabilityResult::Finite { set, bound } => {
                prop_assert!(set.contains(&n));
                prop_assert_eq!(set.iter().max().copied(), Some(bound));
                for j in &set {
                    prop_assert!(op.row(*j).support().all(|c| set.contains(&c)));
                }
            }
            ReachabilityResult::Infinite(cert) => {
                prop_assert_eq!(cert.start, n);
                prop_assert!(cert.verify(&op, 4));
            }
        }
    }

    #[test]
    fn verdict_matches_closures(seed in any::<u64>()) {
        let op = common::random_operator(&mut rng(seed));
        let rows: Vec<usize> = (1..=12).collect();
        match decide_generation(&op, &rows).unwrap() {
            GeneratorVerdict::Generates { m_table, rule } => {
                let mut previous = 0;
                for n in 1..=12 {
                    let ReachabilityResult::Finite { bound, .. } = dependency_closure(&op, n).unwrap() else {
                        return Err(TestCaseError::fail(format!("row {n} escapes")));
                    };
                    prop_assert!(m_table[&n] >= bound);
                    prop_assert!(m_table[&n] >= previous);
                    previous = m_table[&n];
                }
                let first = rule.valid_from + rule.max_offset.len();
                let values: Vec<usize> = (first..first + 30).map(|n| rule.m_of_n(n).unwrap()).collect();
                prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
                for (n, m) in (first..).zip(&values).take(10) {
                    let closure = DependencyAnalyzer::new(&op).closure_of_prefix(n).unwrap();
                    prop_assert!(closure.iter().max().unwrap() <= m);
                }
            }
            GeneratorVerdict::FailsStructurally { row, certificate } => {
                prop_assert!(certificate.verify(&op, 4));
                prop_assert!(!dependency_closure(&op, row).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn probe_witness_rules_out_the_bound(seed in any::<u64>(), n in 1usize..8, m in 1usize..12) {
        let op = common::random_operator(&mut rng(seed));
        if let Some(w) = probe_exact_failure(&op, n, m, 6).unwrap() {
            prop_assert!(w.column > m);
            prop_assert!(!w.value.is_zero());
            if let ReachabilityResult::Finite { bound, .. } = dependency_closure(&op, n).unwrap() {
                prop_assert!(bound >= w.column);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn time_zero_is_the_projection(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (op, n) = common::random_generating(&mut r, 40, 6);
        let x = random_vector(&mut r, n + 2);
        let rep = exp_apply(&op, &Rational::zero(), &x, n, &common::eps12()).unwrap();
        prop_assert_eq!(rep.values, x.project(n));
        prop_assert!(rep.certified_error.iter().all(Zero::is_zero));
    }

    #[test]
    fn evaluation_is_reproducible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (op, n) = common::random_generating(&mut r, 30, 4);
        let x = random_vector(&mut r, n);
        let t = random_rational(&mut r, 0, 2, 8);
        let a = exp_apply(&op, &t, &x, n, &common::eps12()).unwrap();
        let b = exp_apply(&op, &t, &x, n, &common::eps12()).unwrap();
        prop_assert_eq!(a.to_json(false), b.to_json(false));
    }

    /// The composed evaluation differs from the direct one by at most the
    /// propagated certificates: `err(s+t) + e^{sλ}·err(t) + err(s)`.
    #[test]
    fn semigroup_deviation_within_propagated_certificates(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (op, n) = common::random_generating(&mut r, 30, 4);
        let x = random_vector(&mut r, n + 1);
        let s = random_rational(&mut r, 0, 2, 16);
        let t = random_rational(&mut r, 0, 2, 16);
        let ev = Evaluator::new(&op, n).unwrap();
        let opts = EvalOptions::new(common::eps12());
        let x_s = ev.matrix().gather(&x);
        let direct = ev.on_closure(&(&s + &t), &x_s, SeriesKind::Exponential, &opts).unwrap();
        let mid = ev.on_closure(&t, &x_s, SeriesKind::Exponential, &opts).unwrap();
        let composed = ev.on_closure(&s, &mid.values, SeriesKind::Exponential, &opts).unwrap();
        let growth = rational::exp_upper_bound(&(&s * ev.lambda()));
        let allowance = &direct.certified_error + growth * &mid.certified_error + &composed.certified_error;
        prop_assert!(max_abs_diff(&direct.values, &composed.values) <= allowance);
    }
}

#[test]
fn nonnegative_offsets_commute_with_the_shift() {
    // pattern offsets >= 0 and n0 = 1: (A x)_{n+1} = (A Sx)_n with S the backward shift
    let mut r = rng(11);
    let mut tried = 0;
    while tried < 20 {
        let op = common::random_banded(&mut r);
        if op.period() != 1 || op.pattern()[0].iter().any(|(d, _)| *d < 0) {
            continue;
        }
        tried += 1;
        let x = random_vector(&mut r, 12);
        let shifted = SequenceVector::finite(x.prefix()[1..].to_vec());
        let ax = op.apply(&x, 10);
        let a_shifted = op.apply(&shifted, 9);
        assert_eq!(&ax[1..], &a_shifted[..]);
    }
}

#[test]
fn closure_sets_are_deterministic() {
    let mut r = rng(12);
    for _ in 0..30 {
        let op = common::random_operator(&mut r);
        let first: Vec<_> = (1..8)
            .map(|n| dependency_closure(&op, n).unwrap())
            .collect();
        let second: Vec<_> = (1..8)
            .map(|n| dependency_closure(&op, n).unwrap())
            .collect();
        assert_eq!(first, second);
    }
}
