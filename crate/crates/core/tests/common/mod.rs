#![allow(dead_code)]

use omega_semigroup::corpus::{self, EntryKind};
use omega_semigroup::rational::{self, Rational};
use omega_semigroup::{decide_generation, RowFiniteOperator};
use rand::Rng;

pub fn eps12() -> Rational {
    rational::parse("1e-12").unwrap()
}

/// Corpus operators with their ids.
pub fn corpus_operators() -> Vec<(&'static str, RowFiniteOperator)> {
    corpus::list_examples()
        .iter()
        .filter(|e| matches!(e.kind, EntryKind::Operator { .. }))
        .map(|e| (e.id, e.operator().unwrap()))
        .collect()
}

pub fn generating_corpus_operators() -> Vec<(&'static str, RowFiniteOperator)> {
    corpus_operators()
        .into_iter()
        .filter(|(_, op)| decide_generation(op, &[]).unwrap().generates())
        .collect()
}

/// Random periodic banded operator: period 1..=3, offsets in `-3..=1`,
/// coefficients in `{±1/4, …, ±1}`. May or may not generate.
pub fn random_banded<R: Rng>(rng: &mut R) -> RowFiniteOperator {
    let period = rng.random_range(1..=3usize);
    let pattern = (0..period)
        .map(|_| {
            let mut offsets: Vec<i64> = (-3..=1).filter(|_| rng.random_bool(0.4)).collect();
            if (offsets.is_empty() || rng.random_bool(0.5)) && !offsets.contains(&0) {
                offsets.push(0);
            }
            offsets
                .into_iter()
                .map(|d| {
                    let mut k = 0;
                    while k == 0 {
                        k = rng.random_range(-4..=4i64);
                    }
                    (d, rational::ratio(k, 4))
                })
                .collect()
        })
        .collect();
    RowFiniteOperator::periodic(pattern).unwrap()
}

/// Random banded operator that generates, with closure of `{1..=n}` of size
/// at most `max_closure` and `λ <= max_lambda`.
pub fn random_generating<R: Rng>(
    rng: &mut R,
    max_closure: usize,
    max_lambda: i64,
) -> (RowFiniteOperator, usize) {
    loop {
        let op = random_banded(rng);
        if !decide_generation(&op, &[]).unwrap().generates() {
            continue;
        }
        let n = rng.random_range(3..=25usize);
        let m = omega_semigroup::closed_submatrix(&op, n).unwrap();
        if m.dim() <= max_closure && omega_semigroup::norm_bound(&m) <= rational::int(max_lambda) {
            return (op, n);
        }
    }
}

/// Banded periodic part plus up to three exceptional rows below `n0`.
pub fn random_operator<R: Rng>(rng: &mut R) -> RowFiniteOperator {
    let banded = random_banded(rng);
    let n0 = rng.random_range(1..=4usize);
    let mut exceptional = std::collections::BTreeMap::new();
    for row in 1..n0 {
        let mut cols: Vec<usize> = (1..=n0 + 4).filter(|_| rng.random_bool(0.25)).collect();
        cols.truncate(3);
        let entries = cols
            .into_iter()
            .map(|c| (c, rational::ratio(rng.random_range(1..=4), 4)))
            .collect();
        exceptional.insert(row, entries);
    }
    RowFiniteOperator::new(n0, banded.pattern().to_vec(), exceptional).unwrap()
}
