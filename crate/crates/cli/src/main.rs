use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use omega_semigroup::corpus;
use omega_semigroup::exponential::{EvalOptions, EvaluationReport, Evaluator};
use omega_semigroup::rational::{self, Rational};
use omega_semigroup::verifier::{self, CheckReport, HarnessConfig};
use omega_semigroup::{
    decide_generation, Error, GeneratorVerdict, RowFiniteOperator, SequenceVector,
};
use serde_json::{json, Value};

const CAP_VAR: &str = "OMEGA_SG_CAP";

#[derive(Parser)]
#[command(
    name = "omega-sg",
    version,
    about = "Semigroups generated by row-finite operators on sequence space"
)]
struct Cli {
    /// Print JSON on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the operator generates a semigroup.
    Check {
        operator: PathBuf,
        /// Rows whose dependency bound m(n) is reported.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        rows: Vec<usize>,
    },
    /// Evaluate T_t x = exp(tA) x on coordinates 1..=n.
    Exp {
        #[command(flatten)]
        eval: EvalArgs,
        /// Accept t < 0 (the matrix exponential of the closed block).
        #[arg(long)]
        allow_negative: bool,
    },
    /// Evaluate the Cesàro mean C_t x on coordinates 1..=n.
    Cesaro {
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Run the seeded property harness.
    Verify {
        operator: PathBuf,
        #[arg(long, default_value_t = HarnessConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = HarnessConfig::default().trials)]
        trials: usize,
        #[arg(long, default_value = "1e-12")]
        eps: String,
        /// Also write a JUnit XML summary to this path.
        #[arg(long)]
        junit: Option<PathBuf>,
    },
    /// Replay the built-in example operators.
    Corpus {
        #[arg(long)]
        id: Option<String>,
    },
    /// Search row `row` of A^k, k <= kmax, for a nonzero entry beyond column m.
    Probe {
        operator: PathBuf,
        #[arg(long)]
        row: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        kmax: usize,
    },
}

#[derive(Args)]
struct EvalArgs {
    operator: PathBuf,
    vector: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    t: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "1e-12")]
    eps: String,
    /// Add decimal renderings next to the exact values.
    #[arg(long)]
    float: bool,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
    payload: Option<Value>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
            payload: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::ResourceLimit { .. } => Self {
                code: 3,
                message,
                payload: None,
            },
            Error::StructuralFailure { row, certificate } => Self {
                code: 1,
                payload: Some(
                    GeneratorVerdict::FailsStructurally {
                        row,
                        certificate: *certificate,
                    }
                    .to_json(),
                ),
                message,
            },
            _ => Self::input(message),
        }
    }
}

type Outcome = Result<(Value, String, bool), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_operator(path: &Path) -> Result<RowFiniteOperator, Failure> {
    let op = RowFiniteOperator::from_json(&read(path)?)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    match std::env::var(CAP_VAR) {
        Ok(v) => {
            let cap = v
                .trim()
                .parse::<usize>()
                .map_err(|_| Failure::input(format!("{CAP_VAR}: not a positive integer: {v:?}")))?;
            Ok(op.with_support_cap(cap))
        }
        Err(_) => Ok(op),
    }
}

fn load_vector(path: &Path) -> Result<SequenceVector, Failure> {
    SequenceVector::from_json(&read(path)?)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn parse_rational(flag: &str, s: &str) -> Result<Rational, Failure> {
    rational::parse(s).map_err(|e| Failure::input(format!("--{flag}: {e}")))
}

fn check(path: &Path, rows: &[usize]) -> Outcome {
    if rows.contains(&0) {
        return Err(Failure::input("--rows: indices start at 1"));
    }
    let op = load_operator(path)?;
    let verdict = decide_generation(&op, rows)?;
    let text = match &verdict {
        GeneratorVerdict::Generates { m_table, rule } => {
            let mut s = String::from("generates\n");
            for (n, m) in m_table {
                s += &format!("  m({n}) = {m}\n");
            }
            s += &format!(
                "  rows >= {}: reach j + {:?}[j mod {}]",
                rule.valid_from,
                rule.max_offset,
                rule.max_offset.len()
            );
            s
        }
        GeneratorVerdict::FailsStructurally { row, certificate } => {
            let walk = certificate.walk(3);
            format!(
                "fails structurally: row {row} reaches infinitely many columns\n  cycle weight {}, walk {}",
                certificate.cycle_weight(),
                walk.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> ")
            )
        }
    };
    Ok((verdict.to_json(), text, verdict.generates()))
}

fn evaluate(args: &EvalArgs, cesaro: bool, allow_negative: bool) -> Outcome {
    let op = load_operator(&args.operator)?;
    let x = load_vector(&args.vector)?;
    let t = parse_rational("t", &args.t)?;
    let eps = parse_rational("eps", &args.eps)?;
    if args.n == 0 {
        return Err(Failure::input("--n must be at least 1"));
    }
    let opts = EvalOptions {
        epsilon: eps,
        allow_negative_time: allow_negative,
    };
    let ev = Evaluator::new(&op, args.n)?;
    let report: EvaluationReport = if cesaro {
        ev.cesaro(&t, &x, &opts)?
    } else {
        ev.exp(&t, &x, &opts)?
    };
    let mut text = format!(
        "K = {}, terms = {}, lambda = {}, |S| = {}{}\n",
        report.truncation_order,
        report.terms_used,
        rational::format(&report.lambda),
        report.closure_size,
        if report.nilpotent { ", exact" } else { "" }
    );
    let decimals = report.decimal_view();
    for (i, v) in report.values.iter().enumerate() {
        text += &format!("  x[{}] = {}", i + 1, rational::format(v));
        if args.float {
            text += &format!("  ~ {}", decimals[i]);
        }
        let err = &report.certified_error[i];
        if report.nilpotent {
            text += "\n";
        } else {
            text += &format!("  (err <= {:.3e})\n", rational::to_f64(err));
        }
    }
    Ok((
        report.to_json(args.float),
        text.trim_end().to_string(),
        true,
    ))
}

fn report_lines(reports: &[CheckReport]) -> String {
    reports
        .iter()
        .map(|r| {
            let status = if r.passed { "ok  " } else { "FAIL" };
            let measured = r
                .measured
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            format!("  {status} {} {measured}", r.name)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn verify(path: &Path, seed: u64, trials: usize, eps: &str, junit: Option<&Path>) -> Outcome {
    let op = load_operator(path)?;
    let config = HarnessConfig {
        seed,
        trials,
        epsilon: parse_rational("eps", eps)?,
        ..HarnessConfig::default()
    };
    let outcome = verifier::run_harness(&op, &config)?;
    if let Some(junit) = junit {
        fs::write(
            junit,
            verifier::junit_xml("omega-sg verify", &outcome.reports),
        )
        .map_err(|e| Failure::input(format!("{}: {e}", junit.display())))?;
    }
    let passed = outcome.passed();
    let failed = outcome.reports.iter().filter(|r| !r.passed).count();
    let json = json!({
        "passed": passed,
        "seed": seed,
        "trials": trials,
        "verdict": outcome.verdict.to_json(),
        "failures": failed,
        "reports": outcome.reports.iter().map(CheckReport::to_json).collect::<Vec<_>>(),
    });
    let text = if outcome.verdict.generates() {
        format!(
            "{} checks, {failed} failed (seed {seed})\n{}",
            outcome.reports.len(),
            report_lines(&outcome.reports)
        )
    } else {
        "operator fails structurally; nothing to verify".to_string()
    };
    Ok((json, text, passed))
}

fn run_corpus(id: Option<&str>) -> Outcome {
    let entries: Vec<_> = match id {
        Some(id) => vec![corpus::find(id).ok_or_else(|| {
            let known: Vec<_> = corpus::list_examples().iter().map(|e| e.id).collect();
            Failure::input(format!(
                "unknown corpus id {id:?}; known: {}",
                known.join(", ")
            ))
        })?],
        None => corpus::list_examples().iter().collect(),
    };
    let mut all_passed = true;
    let mut json_entries = Vec::new();
    let mut text = Vec::new();
    for entry in entries {
        let reports = corpus::run_entry(entry)?;
        let passed = reports.iter().all(|r| r.passed);
        all_passed &= passed;
        text.push(format!(
            "{} {}: {}\n{}",
            if passed { "ok  " } else { "FAIL" },
            entry.id,
            entry.note,
            report_lines(&reports)
        ));
        json_entries.push(json!({
            "id": entry.id,
            "note": entry.note,
            "passed": passed,
            "reports": reports.iter().map(CheckReport::to_json).collect::<Vec<_>>(),
        }));
    }
    Ok((
        json!({ "passed": all_passed, "entries": json_entries }),
        text.join("\n"),
        all_passed,
    ))
}

fn probe(path: &Path, row: usize, m: usize, kmax: usize) -> Outcome {
    if row == 0 {
        return Err(Failure::input("--row: indices start at 1"));
    }
    let op = load_operator(path)?;
    let witness = verifier::probe_exact_failure(&op, row, m, kmax)?;
    let json = json!({
        "row": row,
        "m": m,
        "kmax": kmax,
        "witness": witness.as_ref().map(|w| json!({
            "k": w.k,
            "column": w.column,
            "value": rational::format(&w.value),
        })),
    });
    let text = match &witness {
        Some(w) => format!(
            "row {row} of A^{} has entry {} at column {} > {m}",
            w.k,
            rational::format(&w.value),
            w.column
        ),
        None => {
            format!("no entry beyond column {m} in row {row} of A^k for k <= {kmax} (inconclusive)")
        }
    };
    Ok((json, text, witness.is_none()))
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check { operator, rows } => check(operator, rows),
        Command::Exp {
            eval,
            allow_negative,
        } => evaluate(eval, false, *allow_negative),
        Command::Cesaro { eval } => evaluate(eval, true, false),
        Command::Verify {
            operator,
            seed,
            trials,
            eps,
            junit,
        } => verify(operator, *seed, *trials, eps, junit.as_deref()),
        Command::Corpus { id } => run_corpus(id.as_deref()),
        Command::Probe {
            operator,
            row,
            m,
            kmax,
        } => probe(operator, *row, *m, *kmax),
    };
    match outcome {
        Ok((json, text, passed)) => {
            if cli.json {
                emit(&serde_json::to_string_pretty(&json).expect("json output"));
            } else {
                emit(&text);
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("omega-sg: {}", f.message);
            if let Some(payload) = f.payload {
                if cli.json {
                    emit(&serde_json::to_string_pretty(&payload).expect("json output"));
                }
            }
            ExitCode::from(f.code)
        }
    }
}
