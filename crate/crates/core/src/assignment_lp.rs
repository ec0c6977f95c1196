//! Assignment programs over `x[w][f]` and the conversion of their duals into
//! payoffs and salaries.

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpSolution, LpStatus, Relation};
use crate::model::{Arrangement, Assignment, FirmId, MarketInstance, PayoffVector, PreferenceMode, WorkerId};
use crate::par::{find_map_first, Execution};
use crate::rational::Rational;

/// Most fractional coordinates the vertex search will branch on.
pub const MAX_FALLBACK_FRACTIONAL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `sum_f x[w][f] <= 1`.
    WorkerAllocation { worker: WorkerId },
    /// `sum_{w in D} x[w][f] <= upper(D)` for entry `entry` of firm `firm`.
    UpperQuota { firm: FirmId, entry: usize },
    /// `sum_{w in D} x[w][f] >= lower(D)`, present only for positive lower quotas.
    LowerQuota { firm: FirmId, entry: usize },
}

#[derive(Debug, Clone)]
pub struct LpArtifacts {
    pub problem: LpProblem,
    /// Role of each row, parallel to `problem.rows`.
    pub row_kinds: Vec<RowKind>,
    /// Column of `x[w][f]`, indexed `[w][f]`.
    pub var_index: Vec<Vec<usize>>,
    num_firms: usize,
}

impl LpArtifacts {
    pub fn row_of(&self, kind: RowKind) -> Option<usize> {
        self.row_kinds.iter().position(|k| *k == kind)
    }

    pub fn num_workers(&self) -> usize {
        self.var_index.len()
    }

    pub fn num_firms(&self) -> usize {
        self.num_firms
    }
}

fn build(inst: &MarketInstance, with_lower: bool) -> Result<LpArtifacts> {
    if inst.mode() != PreferenceMode::Linear {
        return Err(Error::Mode("general"));
    }
    let (n, m) = (inst.num_workers(), inst.num_firms());
    let workers = inst.workers();
    let firms = inst.firms();
    let mut objective = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n * m);
    let mut var_index = vec![vec![0; m]; n];
    for w in 0..n {
        for f in 0..m {
            var_index[w][f] = objective.len();
            objective.push(inst.match_value(w, f)?);
            labels.push(format!("x[{},{}]", workers[w], firms[f]));
        }
    }
    let mut problem = LpProblem::with_labels(objective, labels);
    let mut row_kinds = Vec::new();
    let zeros = || vec![Rational::zero(); n * m];
    for w in 0..n {
        let mut coeffs = zeros();
        for f in 0..m {
            coeffs[var_index[w][f]] = Rational::one();
        }
        problem.add_row(coeffs, Relation::Le, Rational::one(), format!("alloc[{}]", workers[w]));
        row_kinds.push(RowKind::WorkerAllocation { worker: w });
    }
    for f in 0..m {
        for (k, e) in inst.constraints(f).entries().iter().enumerate() {
            let mut coeffs = zeros();
            for w in e.set.iter() {
                coeffs[var_index[w][f]] = Rational::one();
            }
            let members: Vec<&str> = e.set.iter().map(|w| workers[w].as_str()).collect();
            let key = format!("{}:{}", firms[f], members.join(","));
            problem.add_row(coeffs.clone(), Relation::Le, Rational::from_integer(e.upper as i64), format!("upper[{key}]"));
            row_kinds.push(RowKind::UpperQuota { firm: f, entry: k });
            if with_lower && e.lower > 0 {
                problem.add_row(coeffs, Relation::Ge, Rational::from_integer(e.lower as i64), format!("lower[{key}]"));
                row_kinds.push(RowKind::LowerQuota { firm: f, entry: k });
            }
        }
    }
    Ok(LpArtifacts { problem, row_kinds, var_index, num_firms: m })
}

/// Maximize total match value subject to one firm per worker and every upper quota.
pub fn build_ub_lp(inst: &MarketInstance) -> Result<LpArtifacts> {
    if inst.all_constraints().iter().any(|c| c.has_lower_bounds()) {
        if inst.mode() != PreferenceMode::Linear {
            return Err(Error::Mode("general"));
        }
        return Err(Error::LowerBoundPresent);
    }
    build(inst, false)
}

/// As [`build_ub_lp`], plus a `>=` row for every positive lower quota.
pub fn build_lb_lp(inst: &MarketInstance) -> Result<LpArtifacts> {
    build(inst, true)
}

/// An integral optimum found among the LP's optimal vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralAssignment {
    pub assignment: Assignment,
    pub primal: Vec<Rational>,
    /// The solver's own vertex was fractional and the vertex search found this one.
    pub via_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalReport {
    /// `(worker, firm, value)` for every coordinate strictly between 0 and 1.
    pub coordinates: Vec<(WorkerId, FirmId, Rational)>,
    pub objective: Rational,
    pub fallback_attempted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extraction {
    Integral(IntegralAssignment),
    Fractional(FractionalReport),
}

impl Extraction {
    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            Extraction::Integral(i) => Some(&i.assignment),
            Extraction::Fractional(_) => None,
        }
    }
}

fn is_zero_one(v: &Rational) -> bool {
    v.is_zero() || *v == 1
}

fn assignment_from(art: &LpArtifacts, x: &[Rational]) -> Assignment {
    let mut a = Assignment::unmatched(art.num_workers());
    for (w, cols) in art.var_index.iter().enumerate() {
        if let Some(f) = cols.iter().position(|&j| x[j] == 1) {
            a.set(w, Some(f));
        }
    }
    a
}

/// Reads an assignment off an optimal solution; see [`extract_assignment_with`].
pub fn extract_assignment(art: &LpArtifacts, sol: &LpSolution) -> Result<Extraction> {
    extract_assignment_with(art, sol, true, Execution::default())
}

/// Reads an assignment off an optimal solution.
///
/// If the vertex has fractional coordinates and `fallback` is set, every 0/1
/// fixing of those coordinates (at most 2^12) is tried in binary order, with
/// the first coordinate as the lowest bit. A fixing is accepted when the
/// re-solved program is integral and reaches the same objective.
pub fn extract_assignment_with(
    art: &LpArtifacts,
    sol: &LpSolution,
    fallback: bool,
    exec: Execution,
) -> Result<Extraction> {
    sol.require_optimal()?;
    let fractional: Vec<usize> = (0..sol.primal.len()).filter(|&j| !is_zero_one(&sol.primal[j])).collect();
    if fractional.is_empty() {
        return Ok(Extraction::Integral(IntegralAssignment {
            assignment: assignment_from(art, &sol.primal),
            primal: sol.primal.clone(),
            via_fallback: false,
        }));
    }
    let attempt = fallback && fractional.len() <= MAX_FALLBACK_FRACTIONAL;
    if attempt {
        let masks: Vec<u32> = (0..1u32 << fractional.len()).collect();
        let found = find_map_first(exec, &masks, |&mask| {
            let mut p = art.problem.clone();
            for (bit, &j) in fractional.iter().enumerate() {
                let mut coeffs = vec![Rational::zero(); p.num_vars()];
                coeffs[j] = Rational::one();
                let value = Rational::from_integer(((mask >> bit) & 1) as i64);
                let label = format!("fix[{}]", p.variable_labels[j]);
                p.add_row(coeffs, Relation::Eq, value, label);
            }
            let s = solve_lp(&p).ok()?;
            (s.status == LpStatus::Optimal && s.objective == sol.objective && s.primal.iter().all(is_zero_one))
                .then_some(s.primal)
        });
        if let Some(primal) = found {
            return Ok(Extraction::Integral(IntegralAssignment {
                assignment: assignment_from(art, &primal),
                primal,
                via_fallback: true,
            }));
        }
    }
    let n_firms = art.num_firms();
    let coordinates = fractional
        .iter()
        .map(|&j| (j / n_firms, j % n_firms, sol.primal[j].clone()))
        .collect();
    Ok(Extraction::Fractional(FractionalReport {
        coordinates,
        objective: sol.objective.clone(),
        fallback_attempted: attempt,
    }))
}

/// Worker payoffs are the allocation-row duals; a firm's payoff is the sum
/// of its quota-row duals weighted by the quotas.
pub fn dual_to_payoffs(inst: &MarketInstance, art: &LpArtifacts, sol: &LpSolution) -> Result<PayoffVector> {
    sol.require_optimal()?;
    let mut workers = vec![Rational::zero(); inst.num_workers()];
    let mut firms = vec![Rational::zero(); inst.num_firms()];
    for ((kind, row), y) in art.row_kinds.iter().zip(&art.problem.rows).zip(&sol.dual) {
        match *kind {
            RowKind::WorkerAllocation { worker } => workers[worker] = y.clone(),
            RowKind::UpperQuota { firm, .. } | RowKind::LowerQuota { firm, .. } => firms[firm] += &(y * &row.rhs),
        }
    }
    Ok(PayoffVector { workers, firms })
}

/// Salary placed on every pair that is not matched.
pub fn sentinel_salary(inst: &MarketInstance) -> Rational {
    -inst.max_worker_value() - Rational::one()
}

/// Matched pairs get `u_w - a[w][f]`; every other pair gets [`sentinel_salary`].
pub fn payoffs_to_salaries(inst: &MarketInstance, x: &Assignment, pv: &PayoffVector) -> Result<Arrangement> {
    let (n, m) = (inst.num_workers(), inst.num_firms());
    if x.num_workers() != n || pv.workers.len() != n || pv.firms.len() != m {
        return Err(Error::DimensionMismatch("payoffs, assignment and instance differ in size".into()));
    }
    for w in 0..n {
        if x.firm_of(w).is_none() && !pv.workers[w].is_zero() {
            return Err(Error::Mismatch(format!("unmatched worker `{}` has payoff {}", inst.workers()[w], pv.workers[w])));
        }
    }
    for f in 0..m {
        let hired = x.hired_by(f);
        let claimed: Rational = hired.iter().map(|w| &pv.workers[w]).sum::<Rational>() + &pv.firms[f];
        let value = inst.coalition_value(f, hired)?;
        if claimed != value {
            return Err(Error::Mismatch(format!(
                "firm `{}` and its workers claim {claimed} but produce {value}",
                inst.firms()[f]
            )));
        }
    }
    let sentinel = sentinel_salary(inst);
    let salaries = (0..m)
        .map(|f| {
            (0..n)
                .map(|w| {
                    if x.firm_of(w) == Some(f) {
                        &pv.workers[w] - inst.worker_value(w, f)
                    } else {
                        sentinel.clone()
                    }
                })
                .collect()
        })
        .collect();
    Arrangement::new(x.clone(), salaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{check_complementary_slackness, check_integral};
    use crate::model::{ConstraintFamily, QuotaEntry};
    use crate::workerset::WorkerSet;

    fn q(s: &str) -> Rational {
        Rational::parse(s).unwrap()
    }

    fn names(prefix: &str, k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("{prefix}{i}")).collect()
    }

    fn one_worker(a: &str, c: &str, lower: u32, upper: u32) -> MarketInstance {
        let fam = ConstraintFamily::new(vec![QuotaEntry::new(WorkerSet::singleton(0), lower, upper)]).unwrap();
        MarketInstance::linear(names("w", 1), names("f", 1), vec![vec![q(a)]], vec![vec![q(c)]], vec![fam]).unwrap()
    }

    #[test]
    fn vertex_search_repairs_a_fractional_optimum() {
        let fam = ConstraintFamily::new(vec![QuotaEntry::upper_only(WorkerSet::full(2), 1)]).unwrap();
        let inst = MarketInstance::linear(
            names("w", 2),
            names("f", 1),
            vec![vec![q("0")]; 2],
            vec![vec![q("1")]; 2],
            vec![fam],
        )
        .unwrap();
        let art = build_ub_lp(&inst).unwrap();
        let mut sol = solve_lp(&art.problem).unwrap();
        // An optimal point on the face between the two vertices.
        sol.primal = vec![q("0.5"), q("0.5")];
        for exec in [Execution::Sequential, Execution::Parallel] {
            let Extraction::Integral(found) = extract_assignment_with(&art, &sol, true, exec).unwrap() else {
                panic!("vertex search failed");
            };
            assert!(found.via_fallback);
            assert_eq!(found.assignment, Assignment::from_vec(vec![Some(0), None]));
        }
        let Extraction::Fractional(report) = extract_assignment_with(&art, &sol, false, Execution::Sequential).unwrap()
        else {
            panic!("expected a fractional report");
        };
        assert!(!report.fallback_attempted);
        assert_eq!(report.coordinates, vec![(0, 0, q("0.5")), (1, 0, q("0.5"))]);
    }

    #[test]
    fn one_worker_slack_quota_gives_firm_zero() {
        let inst = one_worker("0.5", "1", 0, 2);
        let art = build_ub_lp(&inst).unwrap();
        assert_eq!((art.problem.num_vars(), art.problem.rows.len()), (1, 2));
        let sol = solve_lp(&art.problem).unwrap();
        assert!(check_complementary_slackness(&art.problem, &sol).unwrap());
        let pv = dual_to_payoffs(&inst, &art, &sol).unwrap();
        assert_eq!(pv.workers, vec![q("1.5")]);
        assert_eq!(pv.firms, vec![q("0")]);
        let x = extract_assignment(&art, &sol).unwrap();
        let arr = payoffs_to_salaries(&inst, x.assignment().unwrap(), &pv).unwrap();
        assert_eq!(arr.salary(0, 0), &q("1"));
    }

    #[test]
    fn forced_hire_with_negative_value() {
        let inst = one_worker("0", "-1", 1, 1);
        assert_eq!(build_ub_lp(&inst).unwrap_err(), Error::LowerBoundPresent);
        let art = build_lb_lp(&inst).unwrap();
        assert!(art.row_of(RowKind::LowerQuota { firm: 0, entry: 0 }).is_some());
        let sol = solve_lp(&art.problem).unwrap();
        assert_eq!(sol.primal, vec![q("1")]);
        let pv = dual_to_payoffs(&inst, &art, &sol).unwrap();
        assert_eq!(pv.workers, vec![q("0")]);
        assert_eq!(pv.firms, vec![q("-1")]);
    }

    #[test]
    fn unconstrained_pair_and_empty_market() {
        let inst =
            MarketInstance::linear(names("w", 1), names("f", 1), vec![vec![q("0")]], vec![vec![q("-2")]], vec![ConstraintFamily::empty()])
                .unwrap();
        let art = build_ub_lp(&inst).unwrap();
        assert_eq!((art.problem.num_vars(), art.problem.rows.len()), (1, 1));
        let sol = solve_lp(&art.problem).unwrap();
        let pv = dual_to_payoffs(&inst, &art, &sol).unwrap();
        assert_eq!((pv.workers[0].clone(), pv.firms[0].clone()), (q("0"), q("0")));
        let x = extract_assignment(&art, &sol).unwrap();
        let arr = payoffs_to_salaries(&inst, x.assignment().unwrap(), &pv).unwrap();
        assert_eq!(arr.salary(0, 0), &q("-1"));

        let empty = MarketInstance::linear(vec![], names("f", 1), vec![], vec![], vec![ConstraintFamily::empty()]).unwrap();
        let art = build_ub_lp(&empty).unwrap();
        let sol = solve_lp(&art.problem).unwrap();
        assert_eq!(extract_assignment(&art, &sol).unwrap().assignment().unwrap().num_workers(), 0);
    }

    #[test]
    fn triangle_stays_fractional() {
        let pairs = [[0, 1], [1, 2], [0, 2]];
        let fam = ConstraintFamily::new(pairs.iter().map(|p| QuotaEntry::upper_only(WorkerSet::from_indices(*p), 1)).collect()).unwrap();
        let inst = MarketInstance::linear(
            names("w", 3),
            names("f", 1),
            vec![vec![q("0")]; 3],
            vec![vec![q("1")]; 3],
            vec![fam],
        )
        .unwrap();
        let art = build_ub_lp(&inst).unwrap();
        let sol = solve_lp(&art.problem).unwrap();
        assert_eq!(sol.objective, q("1.5"));
        assert!(!check_integral(&sol).unwrap());
        match extract_assignment(&art, &sol).unwrap() {
            Extraction::Fractional(r) => {
                assert!(r.fallback_attempted);
                assert_eq!(r.coordinates.len(), 3);
                assert!(r.coordinates.iter().all(|(_, _, v)| *v == q("0.5")));
            }
            other => panic!("expected a fractional report, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_payoffs_are_rejected() {
        let inst = one_worker("0.5", "1", 0, 2);
        let x = Assignment::unmatched(1);
        let pv = PayoffVector { workers: vec![q("1")], firms: vec![q("0")] };
        assert!(matches!(payoffs_to_salaries(&inst, &x, &pv), Err(Error::Mismatch(_))));
        let matched = Assignment::from_vec(vec![Some(0)]);
        let wrong_total = PayoffVector { workers: vec![q("1")], firms: vec![q("1")] };
        assert!(matches!(payoffs_to_salaries(&inst, &matched, &wrong_total), Err(Error::Mismatch(_))));
    }
}
