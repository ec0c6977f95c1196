//! Direct construction of a stable arrangement when there is a single firm.

use crate::constraints::feasible_subsets;
use crate::error::{Error, Result};
use crate::model::{Arrangement, Assignment, MarketInstance};
use crate::par::Execution;
use crate::rational::Rational;
use crate::workerset::WorkerSet;

/// Hires the admissible set (or nobody) with the largest joint value, the
/// first such set in canonical order on ties. Hired workers are paid
/// `-a[w]`, leaving them at payoff zero; everyone else is offered `-a[w] - 1`.
/// Works for linear and general valuations.
pub fn solve_one_firm(inst: &MarketInstance, cap: u128) -> Result<Arrangement> {
    if inst.num_firms() != 1 {
        return Err(Error::MultiFirm(inst.num_firms()));
    }
    let n = inst.num_workers();
    let sets = feasible_subsets(inst.constraints(0), n, cap, Execution::Sequential)?;
    // Sets arrive in canonical order, so replacing only on strict gains keeps the first maximizer.
    let mut best = (WorkerSet::EMPTY, Rational::zero());
    for d in sets.into_iter().filter(|d| !d.is_empty()) {
        let value = inst.coalition_value(0, d)?;
        if value > best.1 {
            best = (d, value);
        }
    }
    let chosen = best.0;
    let salaries = vec![(0..n)
        .map(|w| {
            let a = inst.worker_value(w, 0);
            if chosen.contains(w) {
                -a
            } else {
                -a - Rational::one()
            }
        })
        .collect()];
    Arrangement::new(Assignment::single(n, 0, chosen), salaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::DEFAULT_ENUM_CAP;
    use crate::model::{ConstraintFamily, QuotaEntry};
    use crate::stability::{check_stable, compute_payoffs};
    use std::collections::BTreeMap;

    fn q(s: &str) -> Rational {
        Rational::parse(s).unwrap()
    }

    fn names(prefix: &str, k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("{prefix}{i}")).collect()
    }

    fn pairs(p: &[[usize; 2]]) -> ConstraintFamily {
        ConstraintFamily::new(p.iter().map(|s| QuotaEntry::upper_only(WorkerSet::from_indices(*s), 1)).collect()).unwrap()
    }

    fn linear(a: &[&str], c: &[&str], fam: ConstraintFamily) -> MarketInstance {
        let col = |v: &[&str]| v.iter().map(|s| vec![q(s)]).collect();
        MarketInstance::linear(names("w", a.len()), names("f", 1), col(a), col(c), vec![fam]).unwrap()
    }

    #[test]
    fn picks_the_best_admissible_set() {
        let inst = linear(&["0", "0", "0"], &["0.9", "1.1", "1.0"], pairs(&[[0, 1], [1, 2]]));
        let arr = solve_one_firm(&inst, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(arr.assignment.hired_by(0), WorkerSet::from_indices([0, 2]));
        assert!(check_stable(&inst, &arr, DEFAULT_ENUM_CAP).unwrap().stable);
    }

    #[test]
    fn ties_go_to_the_canonical_first_set() {
        let inst = linear(&["-0.5"; 3], &["1.5", "2.5", "1.5"], pairs(&[[0, 1], [1, 2]]));
        let arr = solve_one_firm(&inst, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(arr.assignment.hired_by(0), WorkerSet::singleton(1));
        assert!(check_stable(&inst, &arr, DEFAULT_ENUM_CAP).unwrap().stable);
        let pv = compute_payoffs(&inst, &arr).unwrap();
        assert_eq!(pv.workers, vec![q("0"); 3]);
        assert_eq!(pv.firms, vec![q("2")]);
        assert_eq!(arr.salary(0, 0), &q("-0.5"));
        assert_eq!(arr.salary(1, 0), &q("0.5"));
    }

    #[test]
    fn losing_market_hires_nobody() {
        let inst = linear(&["0", "0"], &["-1", "-2"], ConstraintFamily::empty());
        let arr = solve_one_firm(&inst, DEFAULT_ENUM_CAP).unwrap();
        assert!(arr.assignment.hired_by(0).is_empty());
        let pv = compute_payoffs(&inst, &arr).unwrap();
        assert_eq!(pv.total(), q("0"));
    }

    #[test]
    fn general_valuations_and_errors() {
        let mut table = BTreeMap::new();
        table.insert(WorkerSet::singleton(0), q("1"));
        table.insert(WorkerSet::singleton(1), q("1"));
        table.insert(WorkerSet::from_indices([0, 1]), q("3"));
        let inst = MarketInstance::general(names("w", 2), "f".into(), vec![q("0"), q("-0.5")], table.clone(), ConstraintFamily::empty())
            .unwrap();
        let arr = solve_one_firm(&inst, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(arr.assignment.hired_by(0), WorkerSet::from_indices([0, 1]));
        assert!(check_stable(&inst, &arr, DEFAULT_ENUM_CAP).unwrap().stable);

        table.remove(&WorkerSet::singleton(1));
        let partial = MarketInstance::general(names("w", 2), "f".into(), vec![q("0"); 2], table, ConstraintFamily::empty()).unwrap();
        assert!(matches!(solve_one_firm(&partial, DEFAULT_ENUM_CAP), Err(Error::UnknownSet(_))));

        let two = MarketInstance::linear(
            names("w", 1),
            names("f", 2),
            vec![vec![q("0"); 2]],
            vec![vec![q("0"); 2]],
            vec![ConstraintFamily::empty(); 2],
        )
        .unwrap();
        assert_eq!(solve_one_firm(&two, DEFAULT_ENUM_CAP).unwrap_err(), Error::MultiFirm(2));
    }
}
