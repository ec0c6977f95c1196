use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use quotamatch::assignment_lp::FractionalReport;
use quotamatch::certificate::{
    assignment_to_json, certificate_to_json, certify_witness, parse_arrangement, payoffs_to_json, solve_single_firm,
    solve_via_lp, LpOutcome, SolveOptions,
};
use quotamatch::constraints::{
    enumerate_feasible_sets, is_generalized_polymatroid, is_hierarchy, is_intersecting_family, is_polymatroid,
    Condition, StructureVerdict, VerdictStatus, DEFAULT_ENUM_CAP,
};
use quotamatch::fixtures::{fixture_names, load_fixture, run_expectations};
use quotamatch::lp::dump_lp;
use quotamatch::stability::{
    brute_force_efficient, check_efficient, check_r_efficient, check_r_stable, check_stable,
    check_substitutes_violation, demand_correspondence, stable_exists, StabilityFailure, DEFAULT_ASSIGN_CAP,
};
use quotamatch::{parse_instance, Error, MarketInstance, Rational, WorkerSet};

#[derive(Parser)]
#[command(name = "quotamatch", version, about = "Stable arrangements for matching markets with hiring quotas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Caps {
    /// Largest number of worker subsets enumerated per firm.
    #[arg(long, default_value_t = DEFAULT_ENUM_CAP, value_parser = positive_cap)]
    enum_cap: u128,
    /// Largest number of assignments enumerated by brute force.
    #[arg(long, default_value_t = DEFAULT_ASSIGN_CAP, value_parser = positive_cap)]
    assign_cap: u128,
}

#[derive(Args)]
struct Output {
    /// Write the output document here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an instance and report its dimensions.
    Validate {
        instance: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Classify each firm's quota family and count its admissible sets.
    Analyze {
        instance: PathBuf,
        #[command(flatten)]
        caps: Caps,
        #[command(flatten)]
        out: Output,
    },
    /// Compute a stable arrangement and its certificate.
    Solve {
        instance: PathBuf,
        /// Solve a single-firm instance directly (any valuation mode).
        #[arg(long, conflicts_with_all = ["r_mode", "dump_lp", "no_fallback"])]
        one_firm: bool,
        /// Use the program with lower quotas and certify relaxed stability.
        #[arg(long)]
        r_mode: bool,
        /// Print the assignment program to standard error before solving.
        #[arg(long)]
        dump_lp: bool,
        /// Report a fractional optimum instead of searching other vertices.
        #[arg(long)]
        no_fallback: bool,
        #[command(flatten)]
        caps: Caps,
        #[command(flatten)]
        out: Output,
    },
    /// Check an arrangement for stability and efficiency.
    Check {
        instance: PathBuf,
        arrangement: PathBuf,
        /// Check relaxed stability and efficiency over admissible assignments.
        #[arg(long)]
        r_mode: bool,
        #[command(flatten)]
        caps: Caps,
        #[command(flatten)]
        out: Output,
    },
    /// Demand correspondence of one firm at given salaries.
    Demand {
        instance: PathBuf,
        #[arg(long)]
        firm: String,
        /// Comma-separated salaries in worker order.
        #[arg(long, allow_hyphen_values = true)]
        salaries: String,
        /// Raise one worker's salary (`worker=value`) and test for a substitutes violation.
        #[arg(long, allow_hyphen_values = true)]
        raise: Option<String>,
        #[command(flatten)]
        caps: Caps,
        #[command(flatten)]
        out: Output,
    },
    /// Decide whether any stable arrangement exists.
    Exists {
        instance: PathBuf,
        #[command(flatten)]
        caps: Caps,
        #[command(flatten)]
        out: Output,
    },
    /// Brute-force efficient value and every maximizing assignment.
    Oracle {
        instance: PathBuf,
        /// Only consider assignments where every firm's set is admissible.
        #[arg(long)]
        r_mode: bool,
        #[command(flatten)]
        caps: Caps,
        #[command(flatten)]
        out: Output,
    },
    /// Run the expectations of a bundled worked example.
    Reproduce {
        #[arg(required_unless_present_any = ["all", "list"])]
        fixture: Option<String>,
        #[arg(long, conflicts_with_all = ["fixture", "list"])]
        all: bool,
        /// List the bundled examples.
        #[arg(long, conflicts_with = "fixture")]
        list: bool,
    },
}

fn positive_cap(s: &str) -> Result<u128, String> {
    match s.parse::<u128>() {
        Ok(0) => Err("caps must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// A failed run: exit code plus an optional document still worth printing.
struct Failure {
    code: u8,
    message: String,
    doc: Option<Value>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Schema(_)
            | Error::Value(_)
            | Error::Reference(_)
            | Error::Mode(_)
            | Error::UnknownSet(_)
            | Error::DimensionMismatch(_)
            | Error::LowerBoundPresent
            | Error::MultiFirm(_)
            | Error::UnknownFixture(_) => 2,
            Error::NoFeasibleAssignment => 3,
            Error::CapExceeded { .. } => 5,
            _ => 1,
        };
        let message = match e {
            Error::LowerBoundPresent => format!("{e} (pass --r-mode)"),
            Error::Mode(_) => format!("{e} (single-firm general instances take --one-firm)"),
            _ => e.to_string(),
        };
        Failure { code, message, doc: None }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, message: e.to_string(), doc: None }
    }
}

type Run = Result<Value, Failure>;

fn read_input(path: &PathBuf) -> Result<Vec<u8>, Failure> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        return Ok(buf);
    }
    fs::read(path).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()), doc: None })
}

fn load_instance(path: &PathBuf) -> Result<MarketInstance, Failure> {
    Ok(parse_instance(&read_input(path)?)?)
}

fn set_json(inst: &MarketInstance, s: WorkerSet) -> Value {
    s.iter().map(|w| Value::from(inst.workers()[w].clone())).collect()
}

fn verdict_json(inst: &MarketInstance, v: &StructureVerdict) -> Value {
    let status = match v.status {
        VerdictStatus::Holds => "holds",
        VerdictStatus::Violated => "violated",
        VerdictStatus::Indeterminate => "indeterminate",
    };
    let condition = v.condition.map(|c| match c {
        Condition::NotLaminar => "not-laminar",
        Condition::IntersectionMissing => "intersection-missing",
        Condition::UnionMissing => "union-missing",
        Condition::UpperNotSubmodular => "upper-not-submodular",
        Condition::LowerNotSupermodular => "lower-not-supermodular",
        Condition::CrossInequality => "cross-inequality",
        Condition::DifferenceOutsideFamily => "difference-outside-family",
    });
    json!({
        "status": status,
        "condition": condition,
        "witness": v.witness.iter().map(|s| set_json(inst, *s)).collect::<Vec<_>>(),
    })
}

fn failure_json(inst: &MarketInstance, f: &StabilityFailure) -> Value {
    let firm = |i: usize| inst.firms()[i].clone();
    match f {
        StabilityFailure::NotFeasible { firm: i, set } => {
            json!({"kind": "not-feasible", "firm": firm(*i), "set": set_json(inst, *set)})
        }
        StabilityFailure::WorkerIrViolated { worker } => {
            json!({"kind": "worker-ir", "worker": inst.workers()[*worker]})
        }
        StabilityFailure::FirmIrViolated { firm: i } => json!({"kind": "firm-ir", "firm": firm(*i)}),
        StabilityFailure::BlockingCoalition { firm: i, set, deficit } => json!({
            "kind": "blocking-coalition",
            "firm": firm(*i),
            "set": set_json(inst, *set),
            "deficit": deficit.to_string(),
        }),
    }
}

fn fractional_json(inst: &MarketInstance, r: &FractionalReport, structure_ok: bool) -> Value {
    let coords: Vec<Value> = r
        .coordinates
        .iter()
        .map(|(w, f, x)| json!({"worker": inst.workers()[*w], "firm": inst.firms()[*f], "value": x.to_string()}))
        .collect();
    json!({
        "version": 1,
        "outcome": "fractional",
        "lp_objective": r.objective.to_string(),
        "fractional": coords,
        "fallback_attempted": r.fallback_attempted,
        "structure_ok": structure_ok,
    })
}

fn validate(path: &PathBuf) -> Run {
    let inst = load_instance(path)?;
    let mode = serde_json::to_value(inst.mode()).unwrap_or(Value::Null);
    Ok(json!({
        "valid": true,
        "mode": mode,
        "workers": inst.num_workers(),
        "firms": inst.num_firms(),
        "lower_bounds": inst.all_constraints().iter().any(|f| f.has_lower_bounds()),
    }))
}

fn analyze(path: &PathBuf, caps: Caps) -> Run {
    let inst = load_instance(path)?;
    let mut firms = Vec::new();
    for (f, fam) in inst.all_constraints().iter().enumerate() {
        let count = enumerate_feasible_sets(&inst, f, caps.enum_cap)?.sets.len();
        firms.push(json!({
            "firm": inst.firms()[f],
            "hierarchy": verdict_json(&inst, &is_hierarchy(fam)),
            "intersecting": verdict_json(&inst, &is_intersecting_family(fam)),
            "polymatroid": verdict_json(&inst, &is_polymatroid(fam)),
            "generalized_polymatroid": verdict_json(&inst, &is_generalized_polymatroid(fam)),
            "feasible_sets": count,
        }));
    }
    Ok(json!({ "firms": firms }))
}

fn solve(path: &PathBuf, one_firm: bool, r_mode: bool, dump: bool, no_fallback: bool, caps: Caps) -> Run {
    let inst = load_instance(path)?;
    let opts = SolveOptions {
        r_mode,
        fallback: !no_fallback,
        enum_cap: caps.enum_cap,
        assign_cap: caps.assign_cap,
        ..SolveOptions::default()
    };
    if one_firm {
        return Ok(certificate_to_json(&inst, &solve_single_firm(&inst, &opts)?));
    }
    let (art, _, outcome) = solve_via_lp(&inst, &opts)?;
    if dump {
        eprint!("{}", dump_lp(&art.problem));
    }
    match outcome {
        LpOutcome::Solved(cert) => Ok(certificate_to_json(&inst, &cert)),
        LpOutcome::Fractional { report, structure_ok } => Err(Failure {
            code: if structure_ok { 3 } else { 4 },
            message: if structure_ok {
                "the LP optimum is fractional and no integral optimal vertex was found".into()
            } else {
                "the LP optimum is fractional; some firm's quotas lack the structure that guarantees integrality".into()
            },
            doc: Some(fractional_json(&inst, &report, structure_ok)),
        }),
        LpOutcome::Infeasible => Err(Failure {
            code: 3,
            message: "the assignment program is infeasible".into(),
            doc: Some(json!({"version": 1, "outcome": "infeasible"})),
        }),
    }
}

fn check(instance: &PathBuf, arrangement: &PathBuf, r_mode: bool, caps: Caps) -> Run {
    let inst = load_instance(instance)?;
    let arr = parse_arrangement(&inst, &read_input(arrangement)?)?;
    let verdict =
        if r_mode { check_r_stable(&inst, &arr, caps.enum_cap)? } else { check_stable(&inst, &arr, caps.enum_cap)? };
    let efficient = if r_mode {
        check_r_efficient(&inst, &arr.assignment, caps.assign_cap)
    } else {
        check_efficient(&inst, &arr.assignment, caps.assign_cap)
    };
    let efficient = match efficient {
        Ok(b) => Value::from(b),
        Err(Error::CapExceeded { .. }) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let key = if r_mode { "r_stable" } else { "stable" };
    let mut doc = Map::new();
    doc.insert(key.into(), verdict.stable.into());
    doc.insert("failure".into(), verdict.failure.as_ref().map_or(Value::Null, |f| failure_json(&inst, f)));
    doc.insert("efficient".into(), efficient);
    doc.insert("payoffs".into(), payoffs_to_json(&inst, &verdict.payoffs));
    Ok(Value::Object(doc))
}

fn parse_salaries(inst: &MarketInstance, text: &str) -> Result<Vec<Rational>, Failure> {
    let s: Vec<Rational> = text.split(',').map(|t| Rational::parse(t.trim())).collect::<Result<_, _>>()?;
    if s.len() != inst.num_workers() {
        return Err(Error::DimensionMismatch(format!("{} salaries for {} workers", s.len(), inst.num_workers())).into());
    }
    Ok(s)
}

fn demand(path: &PathBuf, firm: &str, salaries: &str, raise: Option<&str>, caps: Caps) -> Run {
    let inst = load_instance(path)?;
    let f = inst.firm_index(firm).ok_or_else(|| Error::Reference(firm.to_string()))?;
    let s = parse_salaries(&inst, salaries)?;
    let sets = |v: &[WorkerSet]| v.iter().map(|d| set_json(&inst, *d)).collect::<Vec<_>>();
    let salary_doc = |s: &[Rational]| -> Value {
        inst.workers().iter().zip(s).map(|(w, x)| (w.clone(), Value::from(x.to_string()))).collect::<Map<_, _>>().into()
    };
    let Some(raise) = raise else {
        let d = demand_correspondence(&inst, f, &s, caps.enum_cap)?;
        return Ok(json!({"firm": firm, "salaries": salary_doc(&s), "demand": sets(&d)}));
    };
    let (name, value) = raise
        .split_once('=')
        .ok_or_else(|| Error::Value(format!("--raise expects worker=value, got `{raise}`")))?;
    let w = inst.worker_index(name.trim()).ok_or_else(|| Error::Reference(name.trim().to_string()))?;
    let mut raised = s.clone();
    raised[w] = Rational::parse(value.trim())?;
    let v = check_substitutes_violation(&inst, f, &s, &raised, w, caps.enum_cap).map_err(|e| match e {
        Error::Precondition(m) => Error::Value(m),
        e => e,
    })?;
    Ok(json!({
        "firm": firm,
        "salaries": salary_doc(&s),
        "demand": sets(&v.demand_before),
        "raised_salaries": salary_doc(&raised),
        "demand_after_raise": sets(&v.demand_after),
        "substitutes_violated": v.violated,
        "witness": v.witness.map(|d| set_json(&inst, d)),
    }))
}

fn exists(path: &PathBuf, caps: Caps) -> Run {
    let inst = load_instance(path)?;
    let verdict = stable_exists(&inst, caps.enum_cap, caps.assign_cap)?;
    let attempts: Vec<Value> = verdict
        .attempts
        .iter()
        .map(|a| json!({"assignment": assignment_to_json(&inst, &a.assignment), "supported": a.supported}))
        .collect();
    let mut doc = json!({
        "exists": verdict.exists,
        "efficient_value": verdict.efficient_value.to_string(),
        "attempts": attempts,
    });
    match verdict.witness {
        Some(arr) => {
            let opts = SolveOptions { enum_cap: caps.enum_cap, assign_cap: caps.assign_cap, ..SolveOptions::default() };
            doc["certificate"] = certificate_to_json(&inst, &certify_witness(&inst, arr, &opts)?);
            Ok(doc)
        }
        None => Err(Failure {
            code: 3,
            message: "no efficient assignment can be supported by stable payoffs".into(),
            doc: Some(doc),
        }),
    }
}

fn oracle(path: &PathBuf, r_mode: bool, caps: Caps) -> Run {
    let inst = load_instance(path)?;
    let best = brute_force_efficient(&inst, caps.assign_cap, r_mode)?;
    let maximizers: Vec<Value> = best.maximizers.iter().map(|x| assignment_to_json(&inst, x)).collect();
    Ok(json!({"value": best.value.to_string(), "r_mode": r_mode, "maximizers": maximizers}))
}

/// Prints a text report and returns the exit code directly.
fn reproduce(fixture: Option<&str>, all: bool, list: bool) -> Result<u8, Failure> {
    let mut out = io::stdout().lock();
    if list {
        for name in fixture_names() {
            writeln!(out, "{name}\t{}", load_fixture(name)?.description)?;
        }
        return Ok(0);
    }
    let names: Vec<String> = if all { fixture_names().map(String::from).collect() } else { fixture.into_iter().map(String::from).collect() };
    let mut failed = 0usize;
    for name in &names {
        let fx = load_fixture(name)?;
        writeln!(out, "{}: {}", fx.name, fx.description)?;
        for o in run_expectations(&fx) {
            writeln!(out, "  {} {} => {}", if o.passed { "PASS" } else { "FAIL" }, o.label, o.detail)?;
            failed += usize::from(!o.passed);
        }
    }
    writeln!(out, "{} failed", failed)?;
    Ok(if failed == 0 { 0 } else { 1 })
}

fn emit(doc: &Value, out: &Output) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(doc).map_err(io::Error::other)?;
    text.push('\n');
    match &out.output {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = match &cli.command {
        Command::Validate { instance, out } => (validate(instance), out),
        Command::Analyze { instance, caps, out } => (analyze(instance, *caps), out),
        Command::Solve { instance, one_firm, r_mode, dump_lp, no_fallback, caps, out } => {
            (solve(instance, *one_firm, *r_mode, *dump_lp, *no_fallback, *caps), out)
        }
        Command::Check { instance, arrangement, r_mode, caps, out } => (check(instance, arrangement, *r_mode, *caps), out),
        Command::Demand { instance, firm, salaries, raise, caps, out } => {
            (demand(instance, firm, salaries, raise.as_deref(), *caps), out)
        }
        Command::Exists { instance, caps, out } => (exists(instance, *caps), out),
        Command::Oracle { instance, r_mode, caps, out } => (oracle(instance, *r_mode, *caps), out),
        Command::Reproduce { fixture, all, list } => {
            return match reproduce(fixture.as_deref(), *all, *list) {
                Ok(code) => ExitCode::from(code),
                Err(f) => {
                    eprintln!("error: {}", f.message);
                    ExitCode::from(f.code)
                }
            };
        }
    };
    let (doc, code) = match result {
        Ok(doc) => (Some(doc), 0),
        Err(f) => {
            eprintln!("error: {}", f.message);
            (f.doc, f.code)
        }
    };
    if let Some(doc) = doc {
        if let Err(e) = emit(&doc, out) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(code)
}
