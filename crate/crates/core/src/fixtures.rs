//! Named worked examples with expected results.
//!
//! Each fixture document holds an instance and a list of expectations of the
//! form `{op, args, expect}`. [`run_expectations`] evaluates every entry
//! against the library. Salaries omitted from an expectation's arguments are
//! taken as zero.

use serde::Deserialize;
use serde_json::Value;

use crate::assignment_lp::{build_lb_lp, build_ub_lp, dual_to_payoffs, extract_assignment, Extraction, LpArtifacts, RowKind};
use crate::certificate::{solve_via_lp, LpOutcome, SolveOptions};
use crate::constraints::{
    enumerate_feasible_sets, is_generalized_polymatroid, is_hierarchy, is_intersecting_family, is_polymatroid,
    StructureVerdict, VerdictStatus, DEFAULT_ENUM_CAP,
};
use crate::error::{Error, Result};
use crate::lp::{check_complementary_slackness, check_integral, solve_lp, LpSolution};
use crate::model::{parse_instance, Arrangement, Assignment, ConstraintFamily, MarketInstance, PayoffVector, QuotaEntry};
use crate::one_firm::solve_one_firm;
use crate::rational::Rational;
use crate::stability::{
    brute_force_efficient, check_efficient, check_r_stable, check_stable, check_substitutes_violation,
    compute_payoffs, demand_correspondence, stable_exists, total_match_value, StabilityFailure, DEFAULT_ASSIGN_CAP,
};
use crate::workerset::WorkerSet;

const SOURCES: [(&str, &str); 7] = [
    ("substitutes-reversal", include_str!("../fixtures/substitutes-reversal.json")),
    ("crossing-caps-nonexistence", include_str!("../fixtures/crossing-caps-nonexistence.json")),
    ("nested-caps", include_str!("../fixtures/nested-caps.json")),
    ("pair-caps-fractional", include_str!("../fixtures/pair-caps-fractional.json")),
    ("slack-cap-nonunique", include_str!("../fixtures/slack-cap-nonunique.json")),
    ("forced-hire", include_str!("../fixtures/forced-hire.json")),
    ("forced-pair-nonlattice", include_str!("../fixtures/forced-pair-nonlattice.json")),
];

#[derive(Debug, Clone, Deserialize)]
pub struct Expectation {
    pub op: String,
    pub args: Value,
    pub expect: Value,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    pub instance: MarketInstance,
    /// The instance document exactly as shipped.
    pub instance_doc: Value,
    pub expectations: Vec<Expectation>,
}

#[derive(Deserialize)]
struct FixtureDoc {
    name: String,
    description: String,
    instance: Value,
    expectations: Vec<Expectation>,
}

pub fn fixture_names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(n, _)| *n)
}

pub fn load_fixture(name: &str) -> Result<Fixture> {
    let (_, text) = SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownFixture(name.to_string()))?;
    let doc: FixtureDoc = serde_json::from_str(text).map_err(|e| Error::Schema(format!("fixture `{name}`: {e}")))?;
    let instance = parse_instance(doc.instance.to_string().as_bytes())?;
    Ok(Fixture {
        name: doc.name,
        description: doc.description,
        instance,
        instance_doc: doc.instance,
        expectations: doc.expectations,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectationOutcome {
    pub label: String,
    pub passed: bool,
    /// What was observed, for reporting.
    pub detail: String,
}

pub fn run_expectations(fx: &Fixture) -> Vec<ExpectationOutcome> {
    fx.expectations
        .iter()
        .map(|e| {
            let label = format!("{} {}", e.op, e.args);
            match evaluate(&fx.instance, e) {
                Ok((passed, detail)) => ExpectationOutcome { label, passed, detail },
                Err(err) => ExpectationOutcome { label, passed: false, detail: format!("error: {err}") },
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Argument decoding

fn bad(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn str_arg<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    v.get(key).and_then(Value::as_str).ok_or_else(|| bad(format!("expectation needs string `{key}`")))
}

fn firm_arg(inst: &MarketInstance, v: &Value) -> Result<usize> {
    let name = str_arg(v, "firm")?;
    inst.firm_index(name).ok_or_else(|| Error::Reference(name.to_string()))
}

fn worker_arg(inst: &MarketInstance, v: &Value, key: &str) -> Result<usize> {
    let name = str_arg(v, key)?;
    inst.worker_index(name).ok_or_else(|| Error::Reference(name.to_string()))
}

fn set_of(inst: &MarketInstance, v: &Value) -> Result<WorkerSet> {
    let items = v.as_array().ok_or_else(|| bad("worker sets are arrays of names"))?;
    let mut s = WorkerSet::EMPTY;
    for item in items {
        let name = item.as_str().ok_or_else(|| bad("worker names are strings"))?;
        s.insert(inst.worker_index(name).ok_or_else(|| Error::Reference(name.to_string()))?);
    }
    Ok(s)
}

fn rational(v: &Value) -> Result<Rational> {
    Rational::parse(v.as_str().ok_or_else(|| bad("numbers are decimal strings"))?)
}

fn assignment_of(inst: &MarketInstance, v: &Value) -> Result<Assignment> {
    let obj = v.as_object().ok_or_else(|| bad("assignments are objects"))?;
    let mut x = Assignment::unmatched(inst.num_workers());
    for (w, f) in obj {
        let wi = inst.worker_index(w).ok_or_else(|| Error::Reference(w.clone()))?;
        if let Some(fname) = f.as_str() {
            x.set(wi, Some(inst.firm_index(fname).ok_or_else(|| Error::Reference(fname.to_string()))?));
        }
    }
    Ok(x)
}

fn salary_matrix(inst: &MarketInstance, v: Option<&Value>) -> Result<Vec<Vec<Rational>>> {
    let mut s = vec![vec![Rational::zero(); inst.num_workers()]; inst.num_firms()];
    if let Some(obj) = v.and_then(Value::as_object) {
        for (fname, row) in obj {
            let f = inst.firm_index(fname).ok_or_else(|| Error::Reference(fname.clone()))?;
            for (wname, val) in row.as_object().ok_or_else(|| bad("salary rows are objects"))? {
                let w = inst.worker_index(wname).ok_or_else(|| Error::Reference(wname.clone()))?;
                s[f][w] = rational(val)?;
            }
        }
    }
    Ok(s)
}

fn arrangement_of(inst: &MarketInstance, args: &Value) -> Result<Arrangement> {
    let x = assignment_of(inst, args.get("assignment").ok_or_else(|| bad("missing `assignment`"))?)?;
    Arrangement::new(x, salary_matrix(inst, args.get("salaries"))?)
}

fn salary_vector(inst: &MarketInstance, v: &Value) -> Result<Vec<Rational>> {
    let mut s = vec![Rational::zero(); inst.num_workers()];
    for (wname, val) in v.as_object().ok_or_else(|| bad("salary vectors are objects"))? {
        let w = inst.worker_index(wname).ok_or_else(|| Error::Reference(wname.clone()))?;
        s[w] = rational(val)?;
    }
    Ok(s)
}

fn family_of(inst: &MarketInstance, v: &Value) -> Result<ConstraintFamily> {
    let rows = v.as_array().ok_or_else(|| bad("families are arrays"))?;
    let entries = rows
        .iter()
        .map(|r| {
            let set = set_of(inst, r.get("set").ok_or_else(|| bad("entry needs `set`"))?)?;
            let lower = r.get("lower").and_then(Value::as_u64).unwrap_or(0) as u32;
            let upper = r.get("upper").and_then(Value::as_u64).unwrap_or(set.len() as u64) as u32;
            Ok(QuotaEntry::new(set, lower, upper))
        })
        .collect::<Result<Vec<_>>>()?;
    ConstraintFamily::new(entries)
}

fn program(inst: &MarketInstance, args: &Value) -> Result<(LpArtifacts, LpSolution)> {
    let art = match str_arg(args, "program")? {
        "upper" => build_ub_lp(inst)?,
        "lower" => build_lb_lp(inst)?,
        other => return Err(bad(format!("unknown program `{other}`"))),
    };
    let sol = solve_lp(&art.problem)?;
    Ok((art, sol))
}

// ---------------------------------------------------------------------------
// Evaluation

/// Accumulates field comparisons between the expectation and observations.
struct Compare {
    ok: bool,
    notes: Vec<String>,
}

impl Compare {
    fn new() -> Self {
        Compare { ok: true, notes: Vec::new() }
    }

    fn field(&mut self, name: &str, expected: Option<&Value>, observed: Value) {
        if let Some(exp) = expected {
            if *exp != observed {
                self.ok = false;
            }
        }
        self.notes.push(format!("{name}={observed}"));
    }

    fn finish(self) -> (bool, String) {
        (self.ok, self.notes.join(" "))
    }
}

fn names_json(inst: &MarketInstance, s: WorkerSet) -> Value {
    Value::from(s.iter().map(|w| inst.workers()[w].clone()).collect::<Vec<_>>())
}

fn sets_json(inst: &MarketInstance, sets: &[WorkerSet]) -> Value {
    Value::from(sets.iter().map(|s| names_json(inst, *s)).collect::<Vec<_>>())
}

fn num(v: &Rational) -> Value {
    Value::String(v.to_string())
}

fn payoffs_json(inst: &MarketInstance, pv: &PayoffVector) -> (Value, Value) {
    let side = |names: &[String], vals: &[Rational]| {
        Value::Object(names.iter().zip(vals).map(|(n, v)| (n.clone(), num(v))).collect())
    };
    (side(inst.workers(), &pv.workers), side(inst.firms(), &pv.firms))
}

fn assignment_json(inst: &MarketInstance, x: &Assignment) -> Value {
    // Unmatched workers are left out, matching how fixtures write assignments.
    Value::Object(
        (0..inst.num_workers())
            .filter_map(|w| x.firm_of(w).map(|f| (inst.workers()[w].clone(), Value::String(inst.firms()[f].clone()))))
            .collect(),
    )
}

fn status_name(s: VerdictStatus) -> &'static str {
    match s {
        VerdictStatus::Holds => "holds",
        VerdictStatus::Violated => "violated",
        VerdictStatus::Indeterminate => "indeterminate",
    }
}

fn stability_fields(inst: &MarketInstance, cmp: &mut Compare, exp: &Value, stable: bool, failure: Option<&StabilityFailure>) {
    cmp.field("stable", exp.get("stable"), Value::Bool(stable));
    let Some(failure) = failure else { return };
    let (kind, subject) = match failure {
        StabilityFailure::NotFeasible { firm, .. } => ("infeasible", ("firm", inst.firms()[*firm].clone())),
        StabilityFailure::WorkerIrViolated { worker } => ("worker_ir", ("worker", inst.workers()[*worker].clone())),
        StabilityFailure::FirmIrViolated { firm } => ("firm_ir", ("firm", inst.firms()[*firm].clone())),
        StabilityFailure::BlockingCoalition { firm, set, deficit } => {
            cmp.field("set", exp.get("set"), names_json(inst, *set));
            cmp.field("deficit", exp.get("deficit"), num(deficit));
            ("blocking", ("firm", inst.firms()[*firm].clone()))
        }
    };
    cmp.field("failure", exp.get("failure"), Value::from(kind));
    cmp.field(subject.0, exp.get(subject.0), Value::String(subject.1));
}

fn evaluate(inst: &MarketInstance, e: &Expectation) -> Result<(bool, String)> {
    let (args, exp) = (&e.args, &e.expect);
    let mut cmp = Compare::new();
    match e.op.as_str() {
        "match_value" => {
            let v = inst.match_value(worker_arg(inst, args, "worker")?, firm_arg(inst, args)?)?;
            cmp.field("value", exp.get("value"), num(&v));
        }
        "coalition_value" => {
            let set = set_of(inst, args.get("set").ok_or_else(|| bad("missing `set`"))?)?;
            let v = inst.coalition_value(firm_arg(inst, args)?, set)?;
            cmp.field("value", exp.get("value"), num(&v));
        }
        "feasible_sets" => {
            let coll = enumerate_feasible_sets(inst, firm_arg(inst, args)?, DEFAULT_ENUM_CAP)?;
            cmp.field("sets", exp.get("sets"), sets_json(inst, &coll.sets));
        }
        "structure" => {
            let family = match args.get("family") {
                Some(f) => family_of(inst, f)?,
                None => inst.constraints(firm_arg(inst, args)?).clone(),
            };
            let check: fn(&ConstraintFamily) -> StructureVerdict = match str_arg(args, "property")? {
                "hierarchy" => is_hierarchy,
                "intersecting" => is_intersecting_family,
                "polymatroid" => is_polymatroid,
                "generalized-polymatroid" => is_generalized_polymatroid,
                other => return Err(bad(format!("unknown property `{other}`"))),
            };
            let v = check(&family);
            cmp.field("status", exp.get("status"), Value::from(status_name(v.status)));
            cmp.field("witness", exp.get("witness"), sets_json(inst, &v.witness));
        }
        "demand" => {
            let s = salary_vector(inst, args.get("salaries").ok_or_else(|| bad("missing `salaries`"))?)?;
            let d = demand_correspondence(inst, firm_arg(inst, args)?, &s, DEFAULT_ENUM_CAP)?;
            cmp.field("sets", exp.get("sets"), sets_json(inst, &d));
        }
        "substitutes" => {
            let s = salary_vector(inst, args.get("salaries").ok_or_else(|| bad("missing `salaries`"))?)?;
            let w = worker_arg(inst, args, "worker")?;
            let mut raised = s.clone();
            raised[w] = rational(args.get("raised").ok_or_else(|| bad("missing `raised`"))?)?;
            let v = check_substitutes_violation(inst, firm_arg(inst, args)?, &s, &raised, w, DEFAULT_ENUM_CAP)?;
            cmp.field("violated", exp.get("violated"), Value::Bool(v.violated));
            let witness = v.witness.map(|d| names_json(inst, d)).unwrap_or(Value::Null);
            cmp.field("witness", exp.get("witness"), witness);
        }
        "one_firm" => {
            let arr = solve_one_firm(inst, DEFAULT_ENUM_CAP)?;
            cmp.field("hired", exp.get("hired"), names_json(inst, arr.assignment.hired_by(0)));
            cmp.field("stable", exp.get("stable"), Value::Bool(check_stable(inst, &arr, DEFAULT_ENUM_CAP)?.stable));
            let efficient = check_efficient(inst, &arr.assignment, DEFAULT_ASSIGN_CAP)?;
            cmp.field("efficient", exp.get("efficient"), Value::Bool(efficient));
        }
        "brute_force" => {
            let r_mode = args.get("r_mode").and_then(Value::as_bool).unwrap_or(false);
            let best = brute_force_efficient(inst, DEFAULT_ASSIGN_CAP, r_mode)?;
            cmp.field("value", exp.get("value"), num(&best.value));
            cmp.field("count", exp.get("count"), Value::from(best.maximizers.len()));
            let maxs: Vec<Value> = best.maximizers.iter().map(|x| assignment_json(inst, x)).collect();
            cmp.field("maximizers", exp.get("maximizers"), Value::from(maxs));
        }
        "stable_exists" => {
            let v = stable_exists(inst, DEFAULT_ENUM_CAP, DEFAULT_ASSIGN_CAP)?;
            cmp.field("exists", exp.get("exists"), Value::Bool(v.exists));
            if let Some(w) = &v.witness {
                let stable = check_stable(inst, w, DEFAULT_ENUM_CAP)?.stable;
                cmp.field("witness_stable", Some(&Value::Bool(true)), Value::Bool(stable));
            }
        }
        "lp_shape" => {
            let built = match str_arg(args, "program")? {
                "upper" => build_ub_lp(inst),
                _ => build_lb_lp(inst),
            };
            match built {
                Ok(art) => {
                    let count = |pred: fn(&RowKind) -> bool| art.row_kinds.iter().filter(|k| pred(k)).count();
                    cmp.field("variables", exp.get("variables"), Value::from(art.problem.num_vars()));
                    let alloc = count(|k| matches!(k, RowKind::WorkerAllocation { .. }));
                    cmp.field("allocation_rows", exp.get("allocation_rows"), Value::from(alloc));
                    let quota = count(|k| !matches!(k, RowKind::WorkerAllocation { .. }));
                    cmp.field("quota_rows", exp.get("quota_rows"), Value::from(quota));
                }
                Err(Error::LowerBoundPresent) => cmp.field("error", exp.get("error"), Value::from("lower-bound")),
                Err(other) => return Err(other),
            }
        }
        "solve_lp" => {
            let (_, sol) = program(inst, args)?;
            cmp.field("objective", exp.get("objective"), num(&sol.objective));
            cmp.field("primal", exp.get("primal"), Value::from(sol.primal.iter().map(num).collect::<Vec<_>>()));
            cmp.field("integral", exp.get("integral"), Value::Bool(check_integral(&sol)?));
        }
        "extract" => {
            let (art, sol) = program(inst, args)?;
            match extract_assignment(&art, &sol)? {
                Extraction::Integral(found) => {
                    cmp.field("integral", exp.get("integral"), Value::Bool(true));
                    cmp.field("assignment", exp.get("assignment"), assignment_json(inst, &found.assignment));
                }
                Extraction::Fractional(report) => {
                    cmp.field("integral", exp.get("integral"), Value::Bool(false));
                    cmp.field("fractional", exp.get("fractional"), Value::from(report.coordinates.len()));
                }
            }
        }
        "dual_payoffs" => {
            let (art, sol) = program(inst, args)?;
            let (w, f) = payoffs_json(inst, &dual_to_payoffs(inst, &art, &sol)?);
            cmp.field("workers", exp.get("workers"), w);
            cmp.field("firms", exp.get("firms"), f);
        }
        "complementary_slackness" => {
            let (art, sol) = program(inst, args)?;
            cmp.field("holds", exp.get("holds"), Value::Bool(check_complementary_slackness(&art.problem, &sol)?));
        }
        "lp_pipeline" => {
            let r_mode = str_arg(args, "program")? == "lower";
            let opts = SolveOptions { r_mode, ..SolveOptions::default() };
            let (_, sol, outcome) = solve_via_lp(inst, &opts)?;
            cmp.field("objective", exp.get("objective"), num(&sol.objective));
            match outcome {
                LpOutcome::Solved(cert) => {
                    let flag = |b: Option<bool>| b.map(Value::Bool).unwrap_or(Value::Null);
                    cmp.field("integral", exp.get("integral"), flag(cert.flags.integral));
                    cmp.field("stable", exp.get("stable"), flag(cert.flags.stable));
                    cmp.field("r_stable", exp.get("r_stable"), flag(cert.flags.r_stable));
                    cmp.field("efficient", exp.get("efficient"), flag(cert.flags.efficient));
                    if let Some(expected) = exp.get("salaries") {
                        cmp.field("salaries", Some(expected), matched_salaries(inst, &cert.arrangement));
                    }
                }
                LpOutcome::Fractional { .. } => cmp.field("integral", exp.get("integral"), Value::Bool(false)),
                LpOutcome::Infeasible => cmp.field("feasible", exp.get("feasible"), Value::Bool(false)),
            }
        }
        "payoffs" => {
            let arr = arrangement_of(inst, args)?;
            let (w, f) = payoffs_json(inst, &compute_payoffs(inst, &arr)?);
            cmp.field("workers", exp.get("workers"), w);
            cmp.field("firms", exp.get("firms"), f);
        }
        "check_stable" | "check_r_stable" => {
            let arr = arrangement_of(inst, args)?;
            let v = if e.op == "check_stable" {
                check_stable(inst, &arr, DEFAULT_ENUM_CAP)?
            } else {
                check_r_stable(inst, &arr, DEFAULT_ENUM_CAP)?
            };
            stability_fields(inst, &mut cmp, exp, v.stable, v.failure.as_ref());
        }
        "check_efficient" => {
            let x = assignment_of(inst, args.get("assignment").ok_or_else(|| bad("missing `assignment`"))?)?;
            cmp.field("efficient", exp.get("efficient"), Value::Bool(check_efficient(inst, &x, DEFAULT_ASSIGN_CAP)?));
        }
        "payoff_combination" => {
            let x = assignment_of(inst, args.get("assignment").ok_or_else(|| bad("missing `assignment`"))?)?;
            let profiles = args.get("profiles").and_then(Value::as_array).ok_or_else(|| bad("missing `profiles`"))?;
            let payoffs = profiles
                .iter()
                .map(|p| compute_payoffs(inst, &Arrangement::new(x.clone(), salary_matrix(inst, Some(p))?)?))
                .collect::<Result<Vec<_>>>()?;
            let pick = |key: &str, get: fn(&PayoffVector) -> &Vec<Rational>| -> Result<Vec<Rational>> {
                let len = payoffs.first().map_or(0, |p| get(p).len());
                let take_max = match str_arg(args, key)? {
                    "max" => true,
                    "min" => false,
                    other => return Err(bad(format!("unknown combination `{other}`"))),
                };
                Ok((0..len)
                    .map(|i| {
                        let it = payoffs.iter().map(|p| &get(p)[i]);
                        if take_max { it.max() } else { it.min() }.cloned().unwrap_or_default()
                    })
                    .collect())
            };
            let combined = PayoffVector { workers: pick("workers", |p| &p.workers)?, firms: pick("firms", |p| &p.firms)? };
            let total = combined.total();
            let value = total_match_value(inst, &x)?;
            cmp.field("total", exp.get("total"), num(&total));
            cmp.field("match_value", exp.get("match_value"), num(&value));
            cmp.field("identity_holds", exp.get("identity_holds"), Value::Bool(total == value));
        }
        other => return Err(bad(format!("unknown expectation op `{other}`"))),
    }
    Ok(cmp.finish())
}

fn matched_salaries(inst: &MarketInstance, arr: &Arrangement) -> Value {
    let mut out = serde_json::Map::new();
    for f in 0..inst.num_firms() {
        let row: serde_json::Map<String, Value> = arr
            .assignment
            .hired_by(f)
            .iter()
            .map(|w| (inst.workers()[w].clone(), num(arr.salary(w, f))))
            .collect();
        out.insert(inst.firms()[f].clone(), Value::Object(row));
    }
    Value::Object(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_loads_and_passes() {
        for name in fixture_names() {
            let fx = load_fixture(name).unwrap();
            assert_eq!(fx.name, name);
            for o in run_expectations(&fx) {
                assert!(o.passed, "{name}: {} -> {}", o.label, o.detail);
            }
        }
    }

    #[test]
    fn unknown_fixture() {
        assert_eq!(load_fixture("unknown-name").unwrap_err(), Error::UnknownFixture("unknown-name".into()));
    }
}
