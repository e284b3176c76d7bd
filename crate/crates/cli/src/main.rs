//! `sfm`: classify, solve, verify and audit stable fractional matchings.
//!
//! Exit codes: 0 success, 1 negative answer (unstable matching, manipulation
//! found), 2 input or usage error, 3 internal anomaly.

use std::io::{Read, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sfm_core::audit::{
    audit_coalition, audit_ic, AuditError, AuditReport, CoalitionCriterion, MisreportFamily, Verdict,
};
use sfm_core::envy;
use sfm_core::instance::{instance_from_json, InstanceError};
use sfm_core::rational::{parse_rational, rational_to_string_json};
use sfm_core::solver::{self, SolveError};
use sfm_core::{
    bvn_decompose, cmfp_matching, generate, is_stable, AgentId, FractionalMatching, GenMode, IntegralMatching,
    MatchingInstance, Side,
};

#[derive(Parser)]
#[command(name = "sfm", version, about = "Stable fractional matchings under strict cardinal preferences")]
struct Cli {
    /// Indent JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run iterated mutual-first-preference extraction.
    Classify {
        /// Instance file, or `-` for stdin.
        instance: String,
    },
    /// Run a mechanism and print its matching.
    Solve {
        instance: String,
        #[arg(long, default_value = "envy-frac")]
        mechanism: String,
        /// Include the solver's intermediate steps (envy-frac only).
        #[arg(long)]
        trace: bool,
    },
    /// Check a matching for blocking pairs. With one argument the document
    /// must carry both `instance` and `matching`, as `solve` prints.
    Verify { instance: String, matching: Option<String> },
    /// Birkhoff-von Neumann decomposition of a doubly stochastic matching.
    Decompose { matching: String },
    /// Envy graph of one side under a matching.
    EnvyGraph {
        instance: String,
        matching: String,
        #[arg(long, value_enum)]
        side: SideArg,
        /// Print Graphviz DOT instead of JSON.
        #[arg(long)]
        dot: bool,
    },
    /// Search for profitable misreports.
    AuditIc {
        instance: String,
        #[arg(long, default_value = "envy-frac")]
        mechanism: String,
        #[arg(long, value_enum, default_value = "perm")]
        family: FamilyArg,
        /// Comma-separated grid values; defaults to 1..2n plus the agent's own values.
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated coalition such as `m0,w2`; audits that group's joint reports.
        #[arg(long)]
        coalition: Option<String>,
        #[arg(long, value_enum, default_value = "strict")]
        criterion: CriterionArg,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Largest number of candidate reports to enumerate.
        #[arg(long)]
        bound: Option<usize>,
    },
    /// Generate a seeded random instance.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "uniform")]
        mode: ModeArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Men,
    Women,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Perm,
    Grid,
    Combined,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Strict,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Uniform,
    NoMfp,
    Cmfp,
}

enum Output {
    Json(Value),
    Text(String),
}

enum Failure {
    Input(String),
    Anomaly(String),
}

impl From<InstanceError> for Failure {
    fn from(e: InstanceError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        Failure::Anomaly(e.to_string())
    }
}

impl From<AuditError> for Failure {
    fn from(e: AuditError) -> Self {
        match e {
            AuditError::Mechanism(inner) => inner.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok((output, code)) => {
            let text = match output {
                Output::Json(v) => {
                    let json = if cli.pretty { serde_json::to_string_pretty(&v) } else { serde_json::to_string(&v) };
                    json.expect("JSON values serialize") + "\n"
                }
                Output::Text(t) => t,
            };
            // A closed pipe downstream (`| head`) is not an error here.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::from(code)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Anomaly(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<(Output, u8), Failure> {
    match command {
        Command::Classify { instance } => {
            let inst = load_instance(&read_json(&instance)?)?;
            Ok((Output::Json(cmfp_matching(&inst).to_json()), 0))
        }
        Command::Solve { instance, mechanism, trace } => solve(&read_json(&instance)?, &mechanism, trace),
        Command::Verify { instance, matching } => {
            if instance == "-" && matching.as_deref() == Some("-") {
                return Err(Failure::Input("only one of the inputs can be read from stdin".into()));
            }
            let inst_doc = read_json(&instance)?;
            let inst = load_instance(&inst_doc)?;
            let mu = match &matching {
                Some(path) => load_matching(&read_json(path)?, inst.n())?,
                None => load_matching(&inst_doc, inst.n())?,
            };
            let report = is_stable(&inst, &mu).map_err(|e| Failure::Input(e.to_string()))?;
            let code = if report.is_stable() { 0 } else { 1 };
            Ok((Output::Json(report.to_json()), code))
        }
        Command::Decompose { matching } => {
            let doc = read_json(&matching)?;
            let n = matrix_of(&doc).and_then(Value::as_array).map_or(0, Vec::len);
            let mu = load_matching(&doc, n)?;
            let parts = bvn_decompose(&mu).map_err(|e| Failure::Input(e.to_string()))?;
            let components: Vec<Value> = parts
                .iter()
                .map(|(w, m)| json!({ "weight": rational_to_string_json(w), "pairs": m.to_json() }))
                .collect();
            Ok((Output::Json(json!({ "components": components })), 0))
        }
        Command::EnvyGraph { instance, matching, side, dot } => {
            if instance == "-" && matching == "-" {
                return Err(Failure::Input("only one of the inputs can be read from stdin".into()));
            }
            let inst = load_instance(&read_json(&instance)?)?;
            let mu = load_matching(&read_json(&matching)?, inst.n())?;
            let side = match side {
                SideArg::Men => Side::Man,
                SideArg::Women => Side::Woman,
            };
            let graph = envy::build(&inst, &mu, side).map_err(|e| Failure::Input(e.to_string()))?;
            let out = if dot { Output::Text(graph.to_dot()) } else { Output::Json(graph.to_json()) };
            Ok((out, 0))
        }
        Command::AuditIc { instance, mechanism, family, grid, coalition, criterion, jobs, bound } => {
            if let Some(j) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(j.max(1))
                    .build_global()
                    .map_err(|e| Failure::Anomaly(e.to_string()))?;
            }
            let inst = load_instance(&read_json(&instance)?)?;
            let mech = find_mechanism(&mechanism)?;
            let grid = grid.map(|g| parse_list(&g, |t| parse_rational(t).map_err(|e| e.to_string()))).transpose()?;
            let mut family = match family {
                FamilyArg::Perm => MisreportFamily::row_permutations(),
                FamilyArg::Grid => MisreportFamily::value_grid(grid),
                FamilyArg::Combined => MisreportFamily::combined(grid),
            };
            if let Some(b) = bound {
                family = family.with_bound(b);
            }
            let report = match coalition {
                None => audit_ic(&inst, &mech, &family)?,
                Some(tokens) => {
                    let members: Vec<AgentId> = parse_list(&tokens, |t| t.parse())?;
                    let criterion = match criterion {
                        CriterionArg::Strict => CoalitionCriterion::Strict,
                        CriterionArg::Weak => CoalitionCriterion::Weak,
                    };
                    let record = audit_coalition(&inst, &members, &mech, &family, criterion)?;
                    AuditReport {
                        mechanism: mech.name.to_string(),
                        family: family.description(),
                        deviations: Vec::new(),
                        coalitions: vec![record],
                    }
                }
            };
            let code = if report.verdict() == Verdict::ManipulationFound { 1 } else { 0 };
            Ok((Output::Json(report.to_json()), code))
        }
        Command::Gen { n, seed, mode } => {
            let mode = match mode {
                ModeArg::Uniform => GenMode::Uniform,
                ModeArg::NoMfp => GenMode::NoMfp,
                ModeArg::Cmfp => GenMode::Cmfp,
            };
            Ok((Output::Json(generate(n, seed, mode)?.to_json()), 0))
        }
    }
}

fn solve(doc: &Value, mechanism: &str, trace: bool) -> Result<(Output, u8), Failure> {
    let inst = load_instance(doc)?;
    let mech = find_mechanism(mechanism)?;
    let mut out = json!({ "mechanism": mech.name });
    if mech.name == "envy-frac" {
        let (t, witness) = match solver::solve(&inst) {
            Ok(t) => (t, true),
            Err(SolveError::NoNonIntegralWitness { fallback, .. }) => (*fallback, false),
            Err(e) => return Err(e.into()),
        };
        if !witness {
            eprintln!("warning: no non-integral stable matching found; the output is the integral fallback");
        }
        out["matching"] = t.composed.to_json();
        out["non_integral_witness"] = json!(witness);
        if trace {
            out["trace"] = t.to_json();
        }
    } else if trace {
        return Err(Failure::Input(format!("--trace is only available for envy-frac, not {}", mech.name)));
    } else {
        out["matching"] = mech.run(&inst)?.to_json();
    }
    out["instance"] = inst.to_json();
    Ok((Output::Json(out), 0))
}

fn find_mechanism(name: &str) -> Result<solver::Mechanism, Failure> {
    solver::mechanism(name).ok_or_else(|| {
        let known: Vec<&str> = solver::mechanisms().iter().map(|m| m.name).collect();
        Failure::Input(format!("unknown mechanism {name:?}; expected one of {}", known.join(", ")))
    })
}

fn parse_list<T>(text: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, Failure> {
    text.split(',').map(|t| parse(t.trim()).map_err(Failure::Input)).collect()
}

fn read_json(path: &str) -> Result<Value, Failure> {
    let mut text = String::new();
    let read = if path == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    read.map_err(|e| Failure::Input(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{path}: invalid JSON: {e}")))
}

/// An instance document, or any document with an `instance` member.
fn load_instance(doc: &Value) -> Result<MatchingInstance, Failure> {
    Ok(instance_from_json(doc.get("instance").unwrap_or(doc))?)
}

/// The weight matrix of a bare matrix or a `{"matching": ...}` document.
fn matrix_of(doc: &Value) -> Option<&Value> {
    match doc {
        Value::Array(_) => Some(doc),
        Value::Object(map) => map.get("matching").filter(|m| m.is_array()),
        _ => None,
    }
}

/// Accepts a weight matrix (bare or under `matching`) or integral
/// `{"pairs": [[m, w], ...]}`.
fn load_matching(doc: &Value, n: usize) -> Result<FractionalMatching, Failure> {
    let bad = |e: String| Failure::Input(format!("invalid matching: {e}"));
    if let Some(pairs) = doc.get("pairs") {
        let m = IntegralMatching::from_json(pairs, n).map_err(|e| bad(e.to_string()))?;
        return Ok(FractionalMatching::from_integral(&m));
    }
    let matrix = matrix_of(doc)
        .ok_or_else(|| bad("expected a weight matrix, {\"matching\": ...} or {\"pairs\": ...}".into()))?;
    let mu = FractionalMatching::from_json(matrix).map_err(|e| bad(e.to_string()))?;
    if mu.n() != n {
        return Err(bad(format!("matching is {0}x{0} but the instance has n = {n}", mu.n())));
    }
    Ok(mu)
}
