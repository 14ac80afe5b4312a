//! Property checks tying evaluated semigroups back to the defining
//! identities, and an exact probe for failures of the generation condition.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::exponential::{EvalOptions, Evaluator, SeriesKind};
use crate::operator::{OperatorSpec, RowFiniteOperator};
use crate::rational::{self, Rational};
use crate::reachability::{DependencyAnalyzer, GeneratorVerdict};
use crate::vector::SequenceVector;

/// Composite Simpson panels (each spanning two subintervals) for the
/// Cesàro cross-check.
pub const SIMPSON_PANELS: usize = 64;
/// Agreement required between the Cesàro series and quadrature when `λt ≤ 2`.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub coordinate: usize,
    pub lhs: String,
    pub rhs: String,
    pub deviation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub measured: BTreeMap<String, String>,
    pub bounds: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    /// Worst coordinate; always present on failure.
    pub violation: Option<Violation>,
}

impl CheckReport {
    fn new(name: &str, inputs: BTreeMap<String, String>) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            measured: BTreeMap::new(),
            bounds: BTreeMap::new(),
            inputs,
            violation: None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

fn echo(op: &RowFiniteOperator, x: &SequenceVector, n: usize) -> BTreeMap<String, String> {
    let spec = serde_json::to_string(&OperatorSpec::from(op)).expect("operator serializes");
    BTreeMap::from([
        ("operator".to_string(), spec),
        ("x".to_string(), x.to_json()),
        ("n".to_string(), n.to_string()),
    ])
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

/// Largest `|a_i - b_i|` and its (1-based) coordinate.
fn max_deviation(a: &[Rational], b: &[Rational]) -> (usize, Rational) {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (u, v))| (i + 1, (u - v).abs()))
        .fold((1, Rational::zero()), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
}

/// `T_{s+t} x` against `T_s(T_t x)` on coordinates `1..=n`.
pub fn check_semigroup_law(
    op: &RowFiniteOperator,
    s: &Rational,
    t: &Rational,
    x: &SequenceVector,
    n: usize,
    epsilon: &Rational,
    tol: &Rational,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("semigroup_law", echo(op, x, n));
    report.inputs.insert("s".into(), rational::format(s));
    report.inputs.insert("t".into(), rational::format(t));
    report
        .inputs
        .insert("epsilon".into(), rational::format(epsilon));
    report.inputs.insert("tol".into(), rational::format(tol));

    let ev = Evaluator::new(op, n)?;
    let opts = EvalOptions::new(epsilon.clone());
    let x_s = ev.matrix().gather(x);
    let lhs = ev.on_closure(&(s + t), &x_s, SeriesKind::Exponential, &opts)?;
    // S is closed, so T_t x restricted to S is all T_s needs
    let mid = ev.on_closure(t, &x_s, SeriesKind::Exponential, &opts)?;
    let rhs = ev.on_closure(s, &mid.values, SeriesKind::Exponential, &opts)?;

    let (coord, dev) = max_deviation(&lhs.values[..n], &rhs.values[..n]);
    report
        .measured
        .insert("max_deviation".into(), sci(rational::to_f64(&dev)));
    report.measured.insert(
        "exact".into(),
        (lhs.exact && mid.exact && rhs.exact).to_string(),
    );
    report
        .bounds
        .insert("tol".into(), sci(rational::to_f64(tol)));
    report.passed = dev <= *tol;
    if !report.passed || !dev.is_zero() {
        report.violation = Some(Violation {
            coordinate: coord,
            lhs: rational::format(&lhs.values[coord - 1]),
            rhs: rational::format(&rhs.values[coord - 1]),
            deviation: rational::format(&dev),
        });
    }
    Ok(report)
}

/// `e(h) = ‖(T_h x − x)/h − A x‖_∞` against `h λ² e^{hλ} ‖x_S‖_∞ / 2` plus
/// the truncation allowance `2·err/h`.
pub fn check_generator_fd(
    op: &RowFiniteOperator,
    x: &SequenceVector,
    n: usize,
    h_schedule: &[Rational],
    epsilon: &Rational,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("generator_fd", echo(op, x, n));
    report.inputs.insert(
        "h_schedule".into(),
        h_schedule
            .iter()
            .map(rational::format)
            .collect::<Vec<_>>()
            .join(","),
    );
    report
        .inputs
        .insert("epsilon".into(), rational::format(epsilon));

    let ev = Evaluator::new(op, n)?;
    let opts = EvalOptions::new(epsilon.clone());
    let x_s = ev.matrix().gather(x);
    let x_norm = rational::max_abs(&x_s);
    let lambda = ev.lambda().clone();
    let ax = ev.matrix().mul_vec(&x_s);

    let mut errors = Vec::new();
    for (idx, h) in h_schedule.iter().enumerate() {
        let y = ev.on_closure(h, &x_s, SeriesKind::Exponential, &opts)?;
        let fd: Vec<Rational> = (0..n).map(|i| (&y.values[i] - &x_s[i]) / h).collect();
        let (coord, e) = max_deviation(&fd, &ax[..n]);
        let exp_bound = rational::exp_upper_bound(&(h * &lambda));
        let bound = h * &lambda * &lambda * exp_bound * &x_norm / rational::int(2)
            + &y.certified_error * rational::int(2) / h;
        let ok = e <= bound;
        report
            .measured
            .insert(format!("e[{idx}]"), sci(rational::to_f64(&e)));
        report
            .bounds
            .insert(format!("bound[{idx}]"), sci(rational::to_f64(&bound)));
        if !ok && report.passed {
            report.passed = false;
            report.violation = Some(Violation {
                coordinate: coord,
                lhs: rational::format(&fd[coord - 1]),
                rhs: rational::format(&ax[coord - 1]),
                deviation: rational::format(&e),
            });
        }
        errors.push(rational::to_f64(&e));
    }
    let ratios: Vec<String> = errors
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                format!("{:.4}", w[1] / w[0])
            } else {
                "nan".into()
            }
        })
        .collect();
    report
        .measured
        .insert("successive_ratios".into(), ratios.join(","));
    let max_over_h = errors
        .iter()
        .zip(h_schedule)
        .map(|(e, h)| e / rational::to_f64(h))
        .fold(0.0f64, f64::max);
    report
        .measured
        .insert("max_e_over_h".into(), sci(max_over_h));
    Ok(report)
}

/// Composite Simpson over `[0, t]` with `panels` parabolic panels; `f`
/// receives the node number `i` of the point `i·t/(2·panels)`.
pub fn simpson<F: FnMut(usize) -> Vec<f64>>(t: f64, panels: usize, mut f: F) -> Vec<f64> {
    let intervals = 2 * panels;
    let h = t / intervals as f64;
    let mut acc: Vec<f64> = Vec::new();
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let v = f(i);
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, vi) in acc.iter_mut().zip(v) {
            *a += w * vi;
        }
    }
    acc.into_iter().map(|a| a * h / 3.0).collect()
}

/// `A C_t x` against `(T_t x − x)/t`, plus `C_t x` against Simpson
/// quadrature of `(1/t) ∫_0^t T_s x ds`.
pub fn check_cesaro_identity(
    op: &RowFiniteOperator,
    t: &Rational,
    x: &SequenceVector,
    n: usize,
    epsilon: &Rational,
    tol: &Rational,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("cesaro_identity", echo(op, x, n));
    report.inputs.insert("t".into(), rational::format(t));
    report
        .inputs
        .insert("epsilon".into(), rational::format(epsilon));
    report.inputs.insert("tol".into(), rational::format(tol));

    let ev = Evaluator::new(op, n)?;
    let opts = EvalOptions::new(epsilon.clone());
    let x_s = ev.matrix().gather(x);
    let c = ev.on_closure(t, &x_s, SeriesKind::Cesaro, &opts)?;
    let tx = ev.on_closure(t, &x_s, SeriesKind::Exponential, &opts)?;

    // A applied through the operator's own rows to C_t x laid out on S
    let index = ev.matrix().index_set();
    let mut prefix = vec![Rational::zero(); *index.last().expect("non-empty")];
    for (j, v) in index.iter().zip(&c.values) {
        prefix[j - 1] = v.clone();
    }
    let lhs = op.apply(&SequenceVector::finite(prefix), n);
    let rhs: Vec<Rational> = (0..n).map(|i| (&tx.values[i] - &x_s[i]) / t).collect();
    let (coord, dev) = max_deviation(&lhs, &rhs);
    report
        .measured
        .insert("max_deviation".into(), sci(rational::to_f64(&dev)));
    report
        .bounds
        .insert("tol".into(), sci(rational::to_f64(tol)));
    report.passed = dev <= *tol;
    if !report.passed {
        report.violation = Some(Violation {
            coordinate: coord,
            lhs: rational::format(&lhs[coord - 1]),
            rhs: rational::format(&rhs[coord - 1]),
            deviation: rational::format(&dev),
        });
    }

    let tf = rational::to_f64(t);
    let quad_opts = EvalOptions::new(Rational::new(BigInt::one(), BigInt::from(10).pow(15)));
    let intervals = 2 * SIMPSON_PANELS;
    let mut failure = None;
    let integral = simpson(tf, SIMPSON_PANELS, |i| {
        let s = t * Rational::new(BigInt::from(i), BigInt::from(intervals));
        match ev.on_closure(&s, &x_s, SeriesKind::Exponential, &quad_opts) {
            Ok(r) => r.values[..n].iter().map(rational::to_f64).collect(),
            Err(e) => {
                failure = Some(e);
                vec![0.0; n]
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let quad_dev = integral
        .iter()
        .zip(&c.values)
        .map(|(q, v)| (q / tf - rational::to_f64(v)).abs())
        .fold(0.0f64, f64::max);
    let lambda_t = rational::to_f64(ev.lambda()) * tf;
    report
        .measured
        .insert("quadrature_deviation".into(), sci(quad_dev));
    report
        .measured
        .insert("lambda_t".into(), format!("{lambda_t:.6}"));
    report
        .bounds
        .insert("quadrature_tol".into(), sci(QUADRATURE_TOLERANCE));
    if lambda_t <= 2.0 && quad_dev > QUADRATURE_TOLERANCE && report.passed {
        report.passed = false;
        let (i, q) = integral
            .iter()
            .enumerate()
            .map(|(i, q)| (i, (q / tf - rational::to_f64(&c.values[i])).abs()))
            .fold((0, 0.0), |b, cur| if cur.1 > b.1 { cur } else { b });
        report.violation = Some(Violation {
            coordinate: i + 1,
            lhs: rational::format(&c.values[i]),
            rhs: format!("{:e}", integral[i] / tf),
            deviation: format!("{q:e}"),
        });
    }
    Ok(report)
}

/// Exact entry of row `n` of `A^k` beyond column `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactWitness {
    pub k: usize,
    pub column: usize,
    pub value: Rational,
}

/// Smallest `k <= k_max` for which row `n` of `A^k` has a nonzero entry in
/// a column `> m` (the smallest such column is reported). `None` is
/// inconclusive, not a proof of the generation condition.
pub fn probe_exact_failure(
    op: &RowFiniteOperator,
    n: usize,
    m: usize,
    k_max: usize,
) -> Result<Option<ExactWitness>> {
    for (k, row) in op.power_rows(n).take(k_max + 1).enumerate() {
        let row = row?;
        if let Some((col, v)) = row.entries().iter().find(|(c, _)| *c > m) {
            return Ok(Some(ExactWitness {
                k,
                column: *col,
                value: v.clone(),
            }));
        }
        if row.is_empty() {
            break;
        }
    }
    Ok(None)
}

/// Uniform rational `k/denom` in `[lo, hi]`.
pub fn random_rational<R: Rng>(rng: &mut R, lo: i64, hi: i64, denom: i64) -> Rational {
    rational::ratio(rng.random_range(lo * denom..=hi * denom), denom)
}

pub fn random_vector<R: Rng>(rng: &mut R, len: usize) -> SequenceVector {
    SequenceVector::finite((0..len).map(|_| random_rational(rng, -2, 2, 4)).collect())
}

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub seed: u64,
    pub trials: usize,
    pub epsilon: Rational,
    pub max_n: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            trials: 50,
            epsilon: EvalOptions::default().epsilon,
            max_n: 20,
        }
    }
}

pub struct HarnessOutcome {
    pub verdict: GeneratorVerdict,
    pub reports: Vec<CheckReport>,
}

impl HarnessOutcome {
    pub fn passed(&self) -> bool {
        self.verdict.generates() && self.reports.iter().all(|r| r.passed)
    }
}

/// Seeded random checks: semigroup law and Cesàro identity per trial, and
/// one generator finite-difference sweep.
pub fn run_harness(op: &RowFiniteOperator, config: &HarnessConfig) -> Result<HarnessOutcome> {
    let verdict = DependencyAnalyzer::new(op).decide_generation(&[])?;
    let mut reports = Vec::new();
    if !verdict.generates() {
        return Ok(HarnessOutcome { verdict, reports });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let eps = &config.epsilon;
    let two_eps = eps * rational::int(2);
    for _ in 0..config.trials {
        let n = rng.random_range(1..=config.max_n);
        let len = rng.random_range(1..=n + 2);
        let x = random_vector(&mut rng, len);
        let s = random_rational(&mut rng, 0, 2, 16);
        let t = random_rational(&mut rng, 0, 2, 16);
        reports.push(check_semigroup_law(op, &s, &t, &x, n, eps, &two_eps)?);
        let tc = if t.is_zero() {
            rational::ratio(1, 16)
        } else {
            t
        };
        let tol = &two_eps / &tc;
        reports.push(check_cesaro_identity(op, &tc, &x, n, eps, &tol)?);
    }
    let n = rng.random_range(1..=config.max_n);
    let x = random_vector(&mut rng, n);
    let schedule: Vec<Rational> = (1..=10).map(|i| rational::ratio(1, 1 << i)).collect();
    reports.push(check_generator_fd(op, &x, n, &schedule, eps)?);
    Ok(HarnessOutcome { verdict, reports })
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// JUnit-style XML summary of a batch of reports.
pub fn junit_xml(suite: &str, reports: &[CheckReport]) -> String {
    let failures = reports.iter().filter(|r| !r.passed).count();
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<testsuite name=\"{}\" tests=\"{}\" failures=\"{}\">\n",
        xml_escape(suite),
        reports.len(),
        failures
    );
    for (i, r) in reports.iter().enumerate() {
        out.push_str(&format!(
            "  <testcase classname=\"{}\" name=\"{}#{}\"",
            xml_escape(suite),
            xml_escape(&r.name),
            i
        ));
        if r.passed {
            out.push_str("/>\n");
        } else {
            let detail = serde_json::to_string(&r.violation).expect("violation serializes");
            out.push_str(&format!(
                ">\n    <failure message=\"{}\">{}</failure>\n  </testcase>\n",
                xml_escape(&r.name),
                xml_escape(&detail)
            ));
        }
    }
    out.push_str("</testsuite>\n");
    out
}
