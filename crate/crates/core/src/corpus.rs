//! Worked examples and counterexamples, shipped as operator description files under
//! `data/` and replayed as regression checks.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exponential::{EvalOptions, Evaluator};
use crate::operator::RowFiniteOperator;
use crate::rational::{self, Rational};
use crate::reachability::{DependencyAnalyzer, GeneratorVerdict};
use crate::vector::SequenceVector;
use crate::verifier::{self, CheckReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedVerdict {
    Generates,
    FailsStructurally,
}

/// Known closed form of the semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    /// `T_t = id + tA` (requires `A² = 0`).
    IdentityPlusT,
    /// `T_t = e^{dt} id` for the diagonal operator `d·id`.
    ScalarExponential,
    /// `(T_t x)_j = Σ_{k<j} t^k/k! · x_{j-k}` for the forward shift.
    ShiftSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Operator {
        spec: &'static str,
        expected: ExpectedVerdict,
        closed_form: Option<ClosedForm>,
    },
    /// Translation semigroup on smooth functions applied to the flat
    /// function `exp(-1/x)`.
    SmoothShiftDivergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusEntry {
    pub id: &'static str,
    pub note: &'static str,
    pub kind: EntryKind,
}

impl CorpusEntry {
    pub fn operator(&self) -> Option<RowFiniteOperator> {
        match self.kind {
            EntryKind::Operator { spec, .. } => {
                Some(RowFiniteOperator::from_json(spec).expect("corpus spec is valid"))
            }
            EntryKind::SmoothShiftDivergence => None,
        }
    }

    pub fn expected_verdict(&self) -> Option<ExpectedVerdict> {
        match self.kind {
            EntryKind::Operator { expected, .. } => Some(expected),
            EntryKind::SmoothShiftDivergence => None,
        }
    }
}

pub const ONES_VECTOR: &str = include_str!("../data/ones.json");
pub const UNIT_VECTOR: &str = include_str!("../data/e1.json");

static ENTRIES: &[CorpusEntry] = &[
    CorpusEntry {
        id: "backward_shift",
        note: "x ↦ (x_2, x_3, …): every row reaches infinitely many columns, so no semigroup",
        kind: EntryKind::Operator {
            spec: include_str!("../data/backward_shift.json"),
            expected: ExpectedVerdict::FailsStructurally,
            closed_form: None,
        },
    },
    CorpusEntry {
        id: "nilpotent_B",
        note: "B x = (x_2, 0, x_4, 0, …): B² = 0 and T_t = id + tB",
        kind: EntryKind::Operator {
            spec: include_str!("../data/nilpotent_B.json"),
            expected: ExpectedVerdict::Generates,
            closed_form: Some(ClosedForm::IdentityPlusT),
        },
    },
    CorpusEntry {
        id: "A_minus_B",
        note: "(A − B) x = (0, x_3, 0, x_5, …): (A − B)² = 0 and S_t = id + t(A − B)",
        kind: EntryKind::Operator {
            spec: include_str!("../data/A_minus_B.json"),
            expected: ExpectedVerdict::Generates,
            closed_form: Some(ClosedForm::IdentityPlusT),
        },
    },
    CorpusEntry {
        id: "forward_shift",
        note: "x ↦ (0, x_1, x_2, …): locally nilpotent, exact exponential",
        kind: EntryKind::Operator {
            spec: include_str!("../data/forward_shift.json"),
            expected: ExpectedVerdict::Generates,
            closed_form: Some(ClosedForm::ShiftSeries),
        },
    },
    CorpusEntry {
        id: "identity",
        note: "diagonal d ≡ 1: T_t = e^t id",
        kind: EntryKind::Operator {
            spec: include_str!("../data/identity.json"),
            expected: ExpectedVerdict::Generates,
            closed_form: Some(ClosedForm::ScalarExponential),
        },
    },
    CorpusEntry {
        id: "zero",
        note: "T_t = id",
        kind: EntryKind::Operator {
            spec: include_str!("../data/zero.json"),
            expected: ExpectedVerdict::Generates,
            closed_form: Some(ClosedForm::IdentityPlusT),
        },
    },
    CorpusEntry {
        id: "smooth_shift",
        note: "translation on C^∞(ℝ), f = exp(-1/x) on x > 0: every Taylor partial sum at 0 vanishes while f(t) > 0",
        kind: EntryKind::SmoothShiftDivergence,
    },
];

pub fn list_examples() -> &'static [CorpusEntry] {
    ENTRIES
}

pub fn find(id: &str) -> Option<&'static CorpusEntry> {
    ENTRIES.iter().find(|e| e.id == id)
}

/// `k`-th derivative at 0 of `f(x) = exp(-1/x)` (`x > 0`), `0` (`x ≤ 0`).
/// The function is flat at the origin: every derivative vanishes there.
fn flat_derivative_at_zero(_k: usize) -> Rational {
    Rational::zero()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceDemo {
    /// `Σ_{k≤K} t^k/k! f^{(k)}(0)`, exactly.
    pub partial_sum: Rational,
    /// `(T_t f)(0) = f(t) = e^{-1/t}`.
    pub true_value: f64,
}

pub fn smooth_shift_divergence(t: &Rational, order: usize) -> Result<DivergenceDemo> {
    if !t.is_positive() {
        return Err(Error::NonPositiveTime(rational::format(t)));
    }
    let mut partial_sum = Rational::zero();
    let mut coeff = Rational::one();
    for k in 0..=order {
        if k > 0 {
            coeff = coeff * t / Rational::from_integer(BigInt::from(k));
        }
        partial_sum += &coeff * flat_derivative_at_zero(k);
    }
    let true_value = (-1.0 / rational::to_f64(t)).exp();
    Ok(DivergenceDemo {
        partial_sum,
        true_value,
    })
}

/// Exact closed-form value of `T_t x` on coordinates `1..=n` where one exists.
pub fn closed_form_values(
    form: ClosedForm,
    op: &RowFiniteOperator,
    t: &Rational,
    x: &SequenceVector,
    n: usize,
) -> Option<Vec<Rational>> {
    match form {
        ClosedForm::IdentityPlusT => {
            let ax = op.apply(x, n);
            Some(
                x.project(n)
                    .into_iter()
                    .zip(ax)
                    .map(|(xi, ai)| xi + t * ai)
                    .collect(),
            )
        }
        ClosedForm::ShiftSeries => Some(
            (1..=n)
                .map(|j| {
                    let mut coeff = Rational::one();
                    let mut acc = Rational::zero();
                    for k in 0..j {
                        if k > 0 {
                            coeff = coeff * t / Rational::from_integer(BigInt::from(k));
                        }
                        acc += &coeff * x.coordinate(j - k);
                    }
                    acc
                })
                .collect(),
        ),
        ClosedForm::ScalarExponential => None,
    }
}

fn report(name: &str, id: &str, passed: bool, measured: BTreeMap<String, String>) -> CheckReport {
    CheckReport {
        name: name.to_string(),
        passed,
        measured,
        bounds: BTreeMap::new(),
        inputs: BTreeMap::from([("entry".to_string(), id.to_string())]),
        violation: None,
    }
}

/// Replays one entry: verdict, certificate, closed form, semigroup law.
pub fn run_entry(entry: &CorpusEntry) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    match entry.kind {
        EntryKind::SmoothShiftDivergence => {
            let demo = smooth_shift_divergence(&rational::int(1), 50)?;
            let passed = demo.partial_sum.is_zero() && demo.true_value > 0.0;
            out.push(report(
                "divergence",
                entry.id,
                passed,
                BTreeMap::from([
                    (
                        "partial_sum".to_string(),
                        rational::format(&demo.partial_sum),
                    ),
                    ("true_value".to_string(), format!("{:.12}", demo.true_value)),
                ]),
            ));
        }
        EntryKind::Operator {
            expected,
            closed_form,
            ..
        } => {
            let op = entry.operator().expect("operator entry");
            let verdict = DependencyAnalyzer::new(&op).decide_generation(&[1, 2, 3, 4])?;
            let got = if verdict.generates() {
                ExpectedVerdict::Generates
            } else {
                ExpectedVerdict::FailsStructurally
            };
            let mut measured =
                BTreeMap::from([("verdict".to_string(), verdict.to_json().to_string())]);
            let mut passed = got == expected;
            if let GeneratorVerdict::FailsStructurally { certificate, .. } = &verdict {
                let ok = certificate.verify(&op, 5);
                measured.insert("certificate_verified".into(), ok.to_string());
                passed &= ok;
            }
            out.push(report("verdict", entry.id, passed, measured));

            if verdict.generates() {
                let eps = EvalOptions::default().epsilon;
                let n = 6;
                let ev = Evaluator::new(&op, n)?;
                let opts = EvalOptions::new(eps.clone());
                let vectors = [
                    SequenceVector::from_json(ONES_VECTOR)?,
                    SequenceVector::finite(vec![
                        rational::int(2),
                        rational::ratio(-1, 3),
                        rational::int(0),
                        rational::ratio(5, 4),
                    ]),
                ];
                if let Some(form) = closed_form {
                    let mut ok = true;
                    for t in [
                        rational::int(0),
                        rational::ratio(1, 2),
                        rational::int(2),
                        rational::ratio(7, 3),
                    ] {
                        for x in &vectors {
                            let r = ev.exp(&t, x, &opts)?;
                            ok &= match closed_form_values(form, &op, &t, x, n) {
                                Some(expected) => r.values == expected && r.nilpotent,
                                None => {
                                    let scale = (rational::to_f64(&t)).exp();
                                    r.values.iter().zip(x.project(n)).all(|(v, xi)| {
                                        let want = scale * rational::to_f64(&xi);
                                        (rational::to_f64(v) - want).abs()
                                            <= rational::to_f64(&r.certified_error[0])
                                                + 1e-14 * want.abs().max(1.0)
                                    })
                                }
                            };
                        }
                    }
                    out.push(report("closed_form", entry.id, ok, BTreeMap::new()));
                }
                let tol = &eps * rational::int(2);
                for x in &vectors {
                    let mut r = verifier::check_semigroup_law(
                        &op,
                        &rational::ratio(3, 4),
                        &rational::ratio(5, 4),
                        x,
                        n,
                        &eps,
                        &tol,
                    )?;
                    r.inputs.insert("entry".into(), entry.id.to_string());
                    out.push(r);
                }
            }
        }
    }
    Ok(out)
}
