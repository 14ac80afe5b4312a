//! Coordinatewise evaluation of `T_t = exp(tA)` and of the Cesàro mean
//! `C_t = (1/t) ∫_0^t T_s ds` with certified truncation error.
//!
//! Coordinates `1..=n` of `A^k x` only involve the closure `S` of `{1..=n}`
//! under taking row supports, so every series runs on the finite closed
//! submatrix `A_S`. With `λ = ‖A_S‖_∞` the terms obey
//! `‖A_S^k x_S‖_∞ ≤ λ^k ‖x_S‖_∞`, and the tail after order `K` is bounded by
//! `(tλ)^{K+1}/(K+1)! · e^{tλ} · ‖x_S‖_∞`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::operator::RowFiniteOperator;
use crate::rational::{self, Rational};
use crate::reachability::DependencyAnalyzer;
use crate::vector::SequenceVector;

/// Restriction of `A` to a finite index set closed under row supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMatrix {
    index: Vec<usize>,
    rows: Vec<Vec<(usize, Rational)>>,
}

impl FiniteMatrix {
    /// Restricts `op` to `index` (sorted, closed). Panics if a row escapes.
    fn restrict(op: &RowFiniteOperator, index: Vec<usize>) -> Self {
        let rows = index
            .iter()
            .map(|&i| {
                op.row(i)
                    .entries()
                    .iter()
                    .map(|(col, c)| {
                        let local = index.binary_search(col).expect("index set is closed");
                        (local, c.clone())
                    })
                    .collect()
            })
            .collect();
        Self { index, rows }
    }

    /// Builds a matrix from dense rows over the index set `1..=rows.len()`.
    pub fn from_dense(rows: Vec<Vec<Rational>>) -> Self {
        let n = rows.len();
        let sparse = rows
            .into_iter()
            .map(|row| {
                assert_eq!(row.len(), n, "square matrix expected");
                row.into_iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .collect()
            })
            .collect();
        Self {
            index: (1..=n).collect(),
            rows: sparse,
        }
    }

    pub fn index_set(&self) -> &[usize] {
        &self.index
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// Entry at global indices `(i, j)`; zero outside the stored support.
    pub fn entry(&self, i: usize, j: usize) -> Rational {
        let (Ok(li), Ok(lj)) = (self.index.binary_search(&i), self.index.binary_search(&j)) else {
            return Rational::zero();
        };
        self.rows[li]
            .iter()
            .find(|(c, _)| *c == lj)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn to_dense(&self) -> Vec<Vec<Rational>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![Rational::zero(); self.dim()];
                for (j, c) in row {
                    dense[*j] = c.clone();
                }
                dense
            })
            .collect()
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(j, c)| c * &v[*j]).sum())
            .collect()
    }

    /// `x` read at the index set.
    pub fn gather(&self, x: &SequenceVector) -> Vec<Rational> {
        self.index.iter().map(|&j| x.coordinate(j)).collect()
    }

    /// Some `q` with `A_S^q = 0` when the support digraph of `A_S` is
    /// acyclic (`q` = longest path length + 1); `None` otherwise.
    pub fn nilpotency_index(&self) -> Option<usize> {
        let n = self.dim();
        let mut indegree = vec![0usize; n];
        for row in &self.rows {
            for (j, _) in row {
                indegree[*j] += 1;
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        while let Some(u) = stack.pop() {
            order.push(u);
            for (v, _) in &self.rows[u] {
                indegree[*v] -= 1;
                if indegree[*v] == 0 {
                    stack.push(*v);
                }
            }
        }
        if order.len() < n {
            return None;
        }
        // longest path (in edges) starting at each node, in reverse topological order
        let mut longest = vec![0usize; n];
        for &u in order.iter().rev() {
            longest[u] = self.rows[u]
                .iter()
                .map(|(v, _)| longest[*v] + 1)
                .max()
                .unwrap_or(0);
        }
        Some(longest.into_iter().max().unwrap_or(0) + 1)
    }
}

/// Closed submatrix on the closure of `{1..=n}`.
pub fn closed_submatrix(op: &RowFiniteOperator, n: usize) -> Result<FiniteMatrix> {
    if n == 0 {
        return Err(Error::ZeroIndex);
    }
    let set = DependencyAnalyzer::new(op).closure_of_prefix(n)?;
    Ok(FiniteMatrix::restrict(op, set.into_iter().collect()))
}

/// `λ = max_i Σ_j |a_ij|`, the ∞-operator norm.
pub fn norm_bound(m: &FiniteMatrix) -> Rational {
    m.rows
        .iter()
        .map(|row| row.iter().map(|(_, c)| c.abs()).sum::<Rational>())
        .fold(Rational::zero(), |acc, s| if s > acc { s } else { acc })
}

/// Certificate that the exponential tail after order `order` is at most
/// `bound ≤ epsilon` (per unit of `‖x_S‖_∞`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailBound {
    pub lambda: Rational,
    pub t: Rational,
    pub order: usize,
    pub epsilon: Rational,
    /// `(tλ)^{K+1}/(K+1)! · E` with `E ≥ e^{tλ}`.
    pub bound: Rational,
}

impl TailBound {
    /// `lambda >= 0`, `t` (its absolute value is used), `epsilon > 0`.
    pub fn new(lambda: &Rational, t: &Rational, epsilon: &Rational) -> Result<Self> {
        if !epsilon.is_positive() {
            return Err(Error::NonPositiveEpsilon);
        }
        let a = lambda.abs() * t.abs();
        let e_bound = rational::exp_upper_bound(&a);
        let mut k = 0usize;
        // term = a^{k+1}/(k+1)!
        let mut term = a.clone();
        loop {
            let bound = &term * &e_bound;
            if bound <= *epsilon {
                return Ok(Self {
                    lambda: lambda.clone(),
                    t: t.clone(),
                    order: k,
                    epsilon: epsilon.clone(),
                    bound,
                });
            }
            k += 1;
            term = term * &a / Rational::from_integer(BigInt::from(k + 1));
        }
    }
}

/// Smallest `K` with `(tλ)^{K+1}/(K+1)! · e^{tλ} ≤ ε`, with `e^{tλ}` bounded
/// above by a rational.
pub fn truncation_order(lambda: &Rational, t: &Rational, epsilon: &Rational) -> Result<usize> {
    Ok(TailBound::new(lambda, t, epsilon)?.order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// `Σ t^k/k! · M^k x`
    Exponential,
    /// `Σ t^k/(k+1)! · M^k x`
    Cesaro,
}

/// Partial sum `Σ_{k=0}^{order}` of the chosen series, exactly.
pub fn partial_sum(
    m: &FiniteMatrix,
    x: &[Rational],
    t: &Rational,
    order: usize,
    kind: SeriesKind,
) -> Vec<Rational> {
    run_series(m, x, t, order, kind).0
}

/// Returns the partial sum, the number of the last term added, and whether
/// a term vanished identically before `order` (so the series is exact).
fn run_series(
    m: &FiniteMatrix,
    x: &[Rational],
    t: &Rational,
    order: usize,
    kind: SeriesKind,
) -> (Vec<Rational>, usize, bool) {
    let weight = |k: usize| match kind {
        SeriesKind::Exponential => Rational::one(),
        SeriesKind::Cesaro => Rational::new(BigInt::one(), BigInt::from(k + 1)),
    };
    // term_k = t^k/k! M^k x
    let mut term = x.to_vec();
    let w0 = weight(0);
    let mut sum: Vec<Rational> = term.iter().map(|v| v * &w0).collect();
    if term.iter().all(Zero::is_zero) {
        return (sum, 0, true);
    }
    for k in 1..=order {
        let scale = t / Rational::from_integer(BigInt::from(k));
        term = m.mul_vec(&term).into_iter().map(|v| v * &scale).collect();
        if term.iter().all(Zero::is_zero) {
            return (sum, k, true);
        }
        let w = weight(k);
        for (s, v) in sum.iter_mut().zip(&term) {
            *s += v * &w;
        }
    }
    (sum, order, false)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub epsilon: Rational,
    /// The finite-matrix exponential exists for every `t`; the semigroup is
    /// only indexed by `t >= 0`.
    pub allow_negative_time: bool,
}

impl EvalOptions {
    pub fn new(epsilon: Rational) -> Self {
        Self {
            epsilon,
            allow_negative_time: false,
        }
    }
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self::new(Rational::new(BigInt::one(), BigInt::from(10).pow(12)))
    }
}

/// Series value on the whole closed index set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureEvaluation {
    pub values: Vec<Rational>,
    /// Bound on every coordinate's truncation error.
    pub certified_error: Rational,
    pub truncation_order: usize,
    pub terms_used: usize,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationReport {
    pub values: Vec<Rational>,
    pub certified_error: Vec<Rational>,
    pub truncation_order: usize,
    pub terms_used: usize,
    pub lambda: Rational,
    /// The series terminated (`A_S^k x_S = 0`), so the values are exact.
    pub nilpotent: bool,
    pub closure_size: usize,
}

impl EvaluationReport {
    pub fn float_values(&self) -> Vec<f64> {
        self.values.iter().map(rational::to_f64).collect()
    }

    /// Decimal strings with as many fractional digits as the certified error
    /// supports (full precision when exact).
    pub fn decimal_view(&self) -> Vec<String> {
        self.values
            .iter()
            .zip(&self.certified_error)
            .map(|(v, e)| {
                let v = rational::to_f64(v);
                if e.is_zero() {
                    format!("{v}")
                } else {
                    let digits = (-rational::to_f64(e).log10()).floor().clamp(0.0, 17.0) as usize;
                    format!("{v:.digits$}")
                }
            })
            .collect()
    }

    pub fn to_json(&self, float_view: bool) -> Value {
        let strings = |v: &[Rational]| v.iter().map(rational::format).collect::<Vec<_>>();
        let mut out = json!({
            "values": strings(&self.values),
            "certified_error": strings(&self.certified_error),
            "truncation_order": self.truncation_order,
            "terms_used": self.terms_used,
            "lambda": rational::format(&self.lambda),
            "nilpotent": self.nilpotent,
            "closure_size": self.closure_size,
        });
        if float_view {
            out["decimal"] = json!(self.decimal_view());
        }
        out
    }
}

/// Reusable evaluator for coordinates `1..=n` of one operator.
#[derive(Debug, Clone)]
pub struct Evaluator {
    matrix: FiniteMatrix,
    n: usize,
    lambda: Rational,
    nilpotency: Option<usize>,
}

impl Evaluator {
    pub fn new(op: &RowFiniteOperator, n: usize) -> Result<Self> {
        let matrix = closed_submatrix(op, n)?;
        Ok(Self::from_matrix(matrix, n))
    }

    /// `matrix` must be closed and contain `1..=n` as its first indices.
    pub fn from_matrix(matrix: FiniteMatrix, n: usize) -> Self {
        assert!(
            matrix.index.len() >= n
                && matrix.index[..n]
                    .iter()
                    .enumerate()
                    .all(|(i, j)| *j == i + 1)
        );
        let lambda = norm_bound(&matrix);
        let nilpotency = matrix.nilpotency_index();
        Self {
            matrix,
            n,
            lambda,
            nilpotency,
        }
    }

    pub fn matrix(&self) -> &FiniteMatrix {
        &self.matrix
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_time(t: &Rational, kind: SeriesKind, opts: &EvalOptions) -> Result<()> {
        if !opts.epsilon.is_positive() {
            return Err(Error::NonPositiveEpsilon);
        }
        match kind {
            SeriesKind::Cesaro if !t.is_positive() => {
                Err(Error::NonPositiveTime(rational::format(t)))
            }
            SeriesKind::Exponential if t.is_negative() && !opts.allow_negative_time => {
                Err(Error::NegativeTime(rational::format(t)))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the series on the closed index set for `x_S` given there.
    pub fn on_closure(
        &self,
        t: &Rational,
        x_s: &[Rational],
        kind: SeriesKind,
        opts: &EvalOptions,
    ) -> Result<ClosureEvaluation> {
        Self::check_time(t, kind, opts)?;
        let tail = TailBound::new(&self.lambda, t, &opts.epsilon)?;
        let order = match self.nilpotency {
            Some(q) => q - 1,
            None => tail.order,
        };
        let (values, terms_used, vanished) = run_series(&self.matrix, x_s, t, order, kind);
        let exact = vanished || self.nilpotency.is_some();
        let certified_error = if exact {
            Rational::zero()
        } else {
            &tail.bound * rational::max_abs(x_s)
        };
        Ok(ClosureEvaluation {
            values,
            certified_error,
            truncation_order: tail.order,
            terms_used,
            exact,
        })
    }

    fn report(
        &self,
        t: &Rational,
        x: &SequenceVector,
        kind: SeriesKind,
        opts: &EvalOptions,
    ) -> Result<EvaluationReport> {
        let x_s = self.matrix.gather(x);
        let full = self.on_closure(t, &x_s, kind, opts)?;
        Ok(EvaluationReport {
            values: full.values[..self.n].to_vec(),
            certified_error: vec![full.certified_error; self.n],
            truncation_order: full.truncation_order,
            terms_used: full.terms_used,
            lambda: self.lambda.clone(),
            nilpotent: full.exact,
            closure_size: self.matrix.dim(),
        })
    }

    pub fn exp(
        &self,
        t: &Rational,
        x: &SequenceVector,
        opts: &EvalOptions,
    ) -> Result<EvaluationReport> {
        self.report(t, x, SeriesKind::Exponential, opts)
    }

    pub fn cesaro(
        &self,
        t: &Rational,
        x: &SequenceVector,
        opts: &EvalOptions,
    ) -> Result<EvaluationReport> {
        self.report(t, x, SeriesKind::Cesaro, opts)
    }
}

/// Coordinates `1..=n` of `T_t x = exp(tA) x`.
pub fn exp_apply(
    op: &RowFiniteOperator,
    t: &Rational,
    x: &SequenceVector,
    n: usize,
    epsilon: &Rational,
) -> Result<EvaluationReport> {
    let opts = EvalOptions::new(epsilon.clone());
    Evaluator::new(op, n)?.exp(t, x, &opts)
}

/// Coordinates `1..=n` of `C_t x = Σ t^k/(k+1)! A^k x`; requires `t > 0`.
pub fn cesaro_apply(
    op: &RowFiniteOperator,
    t: &Rational,
    x: &SequenceVector,
    n: usize,
    epsilon: &Rational,
) -> Result<EvaluationReport> {
    let opts = EvalOptions::new(epsilon.clone());
    Evaluator::new(op, n)?.cesaro(t, x, &opts)
}
