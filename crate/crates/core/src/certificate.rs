//! Arrangement and certificate documents, and the end-to-end solve pipeline.

use serde_json::{json, Map, Value};

use crate::assignment_lp::{
    build_lb_lp, build_ub_lp, dual_to_payoffs, extract_assignment_with, payoffs_to_salaries, Extraction,
    FractionalReport, LpArtifacts,
};
use crate::constraints::{is_generalized_polymatroid, is_polymatroid, DEFAULT_ENUM_CAP};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpSolution, LpStatus};
use crate::model::{Arrangement, Assignment, MarketInstance, PayoffVector};
use crate::one_firm::solve_one_firm;
use crate::par::Execution;
use crate::rational::Rational;
use crate::stability::{
    check_efficient, check_r_efficient, check_r_stable, check_stable, compute_payoffs, DEFAULT_ASSIGN_CAP,
};

/// Verification results attached to a certificate; `None` when not applicable
/// or when an enumeration would exceed its cap.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Flags {
    pub integral: Option<bool>,
    pub stable: Option<bool>,
    pub r_stable: Option<bool>,
    pub efficient: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    UpperBoundLp,
    LowerBoundLp,
    OneFirm,
    SupportLp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::UpperBoundLp => "lp-upper",
            Method::LowerBoundLp => "lp-lower",
            Method::OneFirm => "one-firm",
            Method::SupportLp => "support-lp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub method: Method,
    pub arrangement: Arrangement,
    pub payoffs: PayoffVector,
    pub lp_objective: Option<Rational>,
    /// Dual value per LP row label, in row order.
    pub duals: Vec<(String, Rational)>,
    pub flags: Flags,
}

pub fn assignment_to_json(inst: &MarketInstance, x: &Assignment) -> Value {
    let mut obj = Map::new();
    for (w, name) in inst.workers().iter().enumerate() {
        let firm = x.firm_of(w).map(|f| Value::String(inst.firms()[f].clone())).unwrap_or(Value::Null);
        obj.insert(name.clone(), firm);
    }
    Value::Object(obj)
}

pub fn payoffs_to_json(inst: &MarketInstance, pv: &PayoffVector) -> Value {
    let side = |names: &[String], vals: &[Rational]| {
        Value::Object(names.iter().zip(vals).map(|(n, v)| (n.clone(), Value::String(v.to_string()))).collect())
    };
    json!({ "workers": side(inst.workers(), &pv.workers), "firms": side(inst.firms(), &pv.firms) })
}

pub fn arrangement_to_json(inst: &MarketInstance, arr: &Arrangement) -> Value {
    let mut salaries = Map::new();
    for (f, fname) in inst.firms().iter().enumerate() {
        let row: Map<String, Value> = inst
            .workers()
            .iter()
            .enumerate()
            .map(|(w, wname)| (wname.clone(), Value::String(arr.salary(w, f).to_string())))
            .collect();
        salaries.insert(fname.clone(), Value::Object(row));
    }
    json!({ "assignment": assignment_to_json(inst, &arr.assignment), "salaries": salaries })
}

fn opt_bool(b: Option<bool>) -> Value {
    b.map(Value::Bool).unwrap_or(Value::Null)
}

pub fn certificate_to_json(inst: &MarketInstance, cert: &Certificate) -> Value {
    let arr = arrangement_to_json(inst, &cert.arrangement);
    let duals: Map<String, Value> =
        cert.duals.iter().map(|(l, v)| (l.clone(), Value::String(v.to_string()))).collect();
    json!({
        "version": 1,
        "method": cert.method.name(),
        "assignment": arr["assignment"],
        "salaries": arr["salaries"],
        "payoffs": payoffs_to_json(inst, &cert.payoffs),
        "lp_objective": cert.lp_objective.as_ref().map(|v| Value::String(v.to_string())).unwrap_or(Value::Null),
        "duals": duals,
        "flags": {
            "integral": opt_bool(cert.flags.integral),
            "stable": opt_bool(cert.flags.stable),
            "r_stable": opt_bool(cert.flags.r_stable),
            "efficient": opt_bool(cert.flags.efficient),
        }
    })
}

/// Reads `assignment` and `salaries` from a document value. Salaries must
/// cover every worker-firm pair; other keys are ignored.
pub fn arrangement_from_json(inst: &MarketInstance, doc: &Value) -> Result<Arrangement> {
    let schema = |m: &str| Error::Schema(m.to_string());
    let assign = doc.get("assignment").and_then(Value::as_object).ok_or_else(|| schema("missing `assignment` object"))?;
    let mut x = Assignment::unmatched(inst.num_workers());
    for (wname, firm) in assign {
        let w = inst.worker_index(wname).ok_or_else(|| Error::Reference(format!("unknown worker `{wname}`")))?;
        match firm {
            Value::Null => {}
            Value::String(fname) => {
                let f = inst.firm_index(fname).ok_or_else(|| Error::Reference(format!("unknown firm `{fname}`")))?;
                x.set(w, Some(f));
            }
            _ => return Err(schema("assignment values must be firm names or null")),
        }
    }
    let sal = doc.get("salaries").and_then(Value::as_object).ok_or_else(|| schema("missing `salaries` object"))?;
    let mut salaries = vec![vec![None; inst.num_workers()]; inst.num_firms()];
    for (fname, row) in sal {
        let f = inst.firm_index(fname).ok_or_else(|| Error::Reference(format!("unknown firm `{fname}`")))?;
        let row = row.as_object().ok_or_else(|| schema("salary rows must be objects"))?;
        for (wname, v) in row {
            let w = inst.worker_index(wname).ok_or_else(|| Error::Reference(format!("unknown worker `{wname}`")))?;
            let text = v.as_str().ok_or_else(|| schema("salaries must be decimal strings"))?;
            salaries[f][w] = Some(Rational::parse(text)?);
        }
    }
    let salaries = salaries
        .into_iter()
        .enumerate()
        .map(|(f, row)| {
            row.into_iter()
                .enumerate()
                .map(|(w, s)| {
                    s.ok_or_else(|| {
                        Error::Schema(format!("salary missing for ({}, {})", inst.workers()[w], inst.firms()[f]))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Arrangement::new(x, salaries)
}

pub fn parse_arrangement(inst: &MarketInstance, text: &[u8]) -> Result<Arrangement> {
    let doc: Value = serde_json::from_slice(text).map_err(|e| Error::Schema(e.to_string()))?;
    arrangement_from_json(inst, &doc)
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Use the program with lower quotas and certify relaxed stability.
    pub r_mode: bool,
    /// Search other optimal vertices when the solver's vertex is fractional.
    pub fallback: bool,
    pub enum_cap: u128,
    pub assign_cap: u128,
    pub exec: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            r_mode: false,
            fallback: true,
            enum_cap: DEFAULT_ENUM_CAP,
            assign_cap: DEFAULT_ASSIGN_CAP,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Solved(Certificate),
    /// No integral optimum was found. `structure_ok` records whether every
    /// firm's family passed the structural check that promises one.
    Fractional { report: FractionalReport, structure_ok: bool },
    /// The program has no feasible point (contradictory quotas).
    Infeasible,
}

/// Drops enumeration caps into `None`; other errors propagate.
fn capped(r: Result<bool>) -> Result<Option<bool>> {
    match r {
        Ok(b) => Ok(Some(b)),
        Err(Error::CapExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn verify(inst: &MarketInstance, arr: &Arrangement, opts: &SolveOptions, integral: Option<bool>) -> Result<Flags> {
    let stable = capped(check_stable(inst, arr, opts.enum_cap).map(|v| v.stable))?;
    let r_stable = capped(check_r_stable(inst, arr, opts.enum_cap).map(|v| v.stable))?;
    let efficient = if opts.r_mode {
        capped(check_r_efficient(inst, &arr.assignment, opts.assign_cap))?
    } else {
        capped(check_efficient(inst, &arr.assignment, opts.assign_cap))?
    };
    Ok(Flags { integral, stable, r_stable, efficient })
}

/// Builds the program for the mode, solves it, and certifies the result.
pub fn solve_via_lp(inst: &MarketInstance, opts: &SolveOptions) -> Result<(LpArtifacts, LpSolution, LpOutcome)> {
    let art = if opts.r_mode { build_lb_lp(inst)? } else { build_ub_lp(inst)? };
    let sol = solve_lp(&art.problem)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok((art, sol, LpOutcome::Infeasible)),
        LpStatus::Unbounded => return Err(Error::Status("unbounded".into())),
    }
    let outcome = match extract_assignment_with(&art, &sol, opts.fallback, opts.exec)? {
        Extraction::Fractional(report) => {
            let structure_ok = inst.all_constraints().iter().all(|fam| {
                if opts.r_mode {
                    is_generalized_polymatroid(fam).is_holds()
                } else {
                    is_polymatroid(fam).is_holds()
                }
            });
            LpOutcome::Fractional { report, structure_ok }
        }
        Extraction::Integral(found) => {
            let pv = dual_to_payoffs(inst, &art, &sol)?;
            let arrangement = payoffs_to_salaries(inst, &found.assignment, &pv)?;
            let payoffs = compute_payoffs(inst, &arrangement)?;
            let flags = verify(inst, &arrangement, opts, Some(true))?;
            let duals = art.problem.rows.iter().map(|r| r.label.clone()).zip(sol.dual.iter().cloned()).collect();
            LpOutcome::Solved(Certificate {
                method: if opts.r_mode { Method::LowerBoundLp } else { Method::UpperBoundLp },
                arrangement,
                payoffs,
                lp_objective: Some(sol.objective.clone()),
                duals,
                flags,
            })
        }
    };
    Ok((art, sol, outcome))
}

/// Single-firm construction with verification flags.
pub fn solve_single_firm(inst: &MarketInstance, opts: &SolveOptions) -> Result<Certificate> {
    let arrangement = solve_one_firm(inst, opts.enum_cap)?;
    let payoffs = compute_payoffs(inst, &arrangement)?;
    let flags = verify(inst, &arrangement, opts, None)?;
    Ok(Certificate { method: Method::OneFirm, arrangement, payoffs, lp_objective: None, duals: Vec::new(), flags })
}

/// Certificate for an existence witness found by the support system.
pub fn certify_witness(inst: &MarketInstance, arrangement: Arrangement, opts: &SolveOptions) -> Result<Certificate> {
    let payoffs = compute_payoffs(inst, &arrangement)?;
    let flags = verify(inst, &arrangement, opts, None)?;
    Ok(Certificate { method: Method::SupportLp, arrangement, payoffs, lp_objective: None, duals: Vec::new(), flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;

    const ONE_WORKER: &str = r#"{"version":1,"mode":"linear","workers":["w"],"firms":["f"],
        "worker_values":{"w":{"f":"0.5"}},"firm_values":{"w":{"f":"1"}},
        "constraints":{"f":[{"set":["w"],"upper":2}]}}"#;

    #[test]
    fn certificate_round_trips_through_arrangement_reader() {
        let inst = parse_instance(ONE_WORKER.as_bytes()).unwrap();
        let (_, _, outcome) = solve_via_lp(&inst, &SolveOptions::default()).unwrap();
        let LpOutcome::Solved(cert) = outcome else { panic!("expected a solution") };
        assert_eq!(cert.flags, Flags { integral: Some(true), stable: Some(true), r_stable: Some(true), efficient: Some(true) });
        let doc = certificate_to_json(&inst, &cert);
        assert_eq!(doc["salaries"]["f"]["w"], "1");
        assert_eq!(doc["duals"]["alloc[w]"], "1.5");
        let back = arrangement_from_json(&inst, &doc).unwrap();
        assert_eq!(back, cert.arrangement);
    }

    #[test]
    fn arrangement_reader_requires_every_salary() {
        let inst = parse_instance(ONE_WORKER.as_bytes()).unwrap();
        let doc = json!({"assignment": {"w": "f"}, "salaries": {"f": {}}});
        assert!(matches!(arrangement_from_json(&inst, &doc), Err(Error::Schema(_))));
        let doc = json!({"assignment": {"w": "g"}, "salaries": {"f": {"w": "0"}}});
        assert!(matches!(arrangement_from_json(&inst, &doc), Err(Error::Reference(_))));
    }
}
