//! Random instance generators and first-principles oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use quotamatch::constraints::{is_generalized_polymatroid, is_polymatroid};
use quotamatch::lp::{LpProblem, LpSolution, Relation};
use quotamatch::stability::brute_force_efficient;
use quotamatch::{ConstraintFamily, MarketInstance, QuotaEntry, Rational, WorkerSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Uniform over multiples of `1/den` in `[lo, hi]`, with `den` drawn from `1..=max_den`.
pub fn rational(rng: &mut impl Rng, lo: i64, hi: i64, max_den: i64) -> Rational {
    let den = rng.gen_range(1..=max_den);
    Rational::new(rng.gen_range(lo * den..=hi * den), den)
}

pub fn value_matrix(rng: &mut impl Rng, n: usize, m: usize, lo: i64, hi: i64) -> Vec<Vec<Rational>> {
    (0..n).map(|_| (0..m).map(|_| rational(rng, lo, hi, 10)).collect()).collect()
}

pub fn nonempty_subset(rng: &mut impl Rng, n: usize) -> WorkerSet {
    WorkerSet::from_bits(rng.gen_range(1..1u64 << n))
}

/// Splits `set` into up to three random parts, keeping each part (and
/// recursing into it) with some probability.
fn laminar_sets(rng: &mut impl Rng, set: WorkerSet, out: &mut Vec<WorkerSet>) {
    let members: Vec<usize> = set.iter().collect();
    if members.len() < 2 {
        return;
    }
    let parts = rng.gen_range(2..=3.min(members.len()));
    let mut groups = vec![WorkerSet::EMPTY; parts];
    for w in members {
        groups[rng.gen_range(0..parts)].insert(w);
    }
    for g in groups.into_iter().filter(|g| !g.is_empty()) {
        if rng.gen_bool(0.6) {
            out.push(g);
        }
        laminar_sets(rng, g, out);
    }
}

/// A laminar family with upper quotas only.
pub fn random_hierarchy(rng: &mut impl Rng, n: usize) -> ConstraintFamily {
    let mut sets = Vec::new();
    let full = WorkerSet::full(n);
    if rng.gen_bool(0.5) {
        sets.push(full);
    }
    laminar_sets(rng, full, &mut sets);
    sets.sort();
    sets.dedup();
    let entries = sets.into_iter().map(|s| QuotaEntry::upper_only(s, rng.gen_range(0..=s.len() as u32))).collect();
    ConstraintFamily::new(entries).expect("laminar sets are distinct and non-empty")
}

/// Closes `sets` under union and intersection of overlapping pairs.
fn intersecting_closure(mut sets: Vec<WorkerSet>) -> Vec<WorkerSet> {
    loop {
        let mut added = false;
        for i in 0..sets.len() {
            for j in 0..sets.len() {
                let (a, b) = (sets[i], sets[j]);
                if a.is_disjoint(b) {
                    continue;
                }
                for s in [a.union(b), a.intersection(b)] {
                    if !sets.contains(&s) {
                        sets.push(s);
                        added = true;
                    }
                }
            }
        }
        if !added {
            sets.sort();
            return sets;
        }
    }
}

/// Crossing sets with quotas `sum_j min(k_j, |S ∩ B_j|)`, a submodular function.
pub fn random_crossing_polymatroid(rng: &mut impl Rng, n: usize) -> ConstraintFamily {
    let mut seeds: Vec<WorkerSet> = (0..rng.gen_range(2..=3)).map(|_| nonempty_subset(rng, n)).collect();
    seeds.sort();
    seeds.dedup();
    let sets = intersecting_closure(seeds);
    let blocks: Vec<(WorkerSet, u32)> = (0..rng.gen_range(1..=2))
        .map(|_| {
            let b = nonempty_subset(rng, n);
            (b, rng.gen_range(0..=b.len() as u32))
        })
        .collect();
    let quota = |s: WorkerSet| blocks.iter().map(|(b, k)| (*k).min(s.intersection(*b).len() as u32)).sum::<u32>();
    let entries = sets.into_iter().map(|s| QuotaEntry::upper_only(s, quota(s))).collect();
    ConstraintFamily::new(entries).expect("closure yields distinct non-empty sets")
}

/// A family the checker accepts as a polymatroid: laminar, crossing, or unconstrained.
pub fn random_polymatroid_family(rng: &mut impl Rng, n: usize) -> ConstraintFamily {
    let fam = match rng.gen_range(0..5) {
        0 => ConstraintFamily::empty(),
        1 | 2 => random_hierarchy(rng, n),
        _ => random_crossing_polymatroid(rng, n),
    };
    assert!(is_polymatroid(&fam).is_holds(), "generator produced a non-polymatroid family");
    fam
}

pub fn random_polymatroid_instance(rng: &mut impl Rng, n: usize, m: usize) -> MarketInstance {
    let fams = (0..m).map(|_| random_polymatroid_family(rng, n)).collect();
    let a = value_matrix(rng, n, m, -1, 1);
    let c = value_matrix(rng, n, m, -1, 2);
    MarketInstance::linear(names("w", n), names("f", m), a, c, fams).unwrap()
}

fn random_bounds(rng: &mut impl Rng, s: WorkerSet) -> QuotaEntry {
    let upper = rng.gen_range(0..=s.len() as u32);
    QuotaEntry::new(s, rng.gen_range(0..=upper), upper)
}

/// Candidate families with lower and upper quotas: disjoint blocks, blocks
/// with their union, or every subset of a small set.
fn gpoly_candidate(rng: &mut impl Rng, n: usize) -> ConstraintFamily {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let used = rng.gen_range(1..=n);
    let parts = rng.gen_range(1..=3.min(used));
    let mut blocks = vec![WorkerSet::EMPTY; parts];
    for (i, &w) in order[..used].iter().enumerate() {
        blocks[if i < parts { i } else { rng.gen_range(0..parts) }].insert(w);
    }
    let sets: Vec<WorkerSet> = match rng.gen_range(0..3) {
        0 => blocks,
        1 => {
            let union = blocks.iter().fold(WorkerSet::EMPTY, |u, b| u.union(*b));
            let mut sets = blocks;
            if !sets.contains(&union) {
                sets.push(union);
            }
            sets
        }
        _ => {
            let base = WorkerSet::from_indices(order[..2.min(n)].iter().copied());
            (1..1u64 << n).map(WorkerSet::from_bits).filter(|s| s.is_subset(base)).collect()
        }
    };
    ConstraintFamily::new(sets.into_iter().map(|s| random_bounds(rng, s)).collect()).unwrap()
}

pub fn random_gpoly_family(rng: &mut impl Rng, n: usize) -> ConstraintFamily {
    loop {
        let fam = gpoly_candidate(rng, n);
        if is_generalized_polymatroid(&fam).is_holds() {
            return fam;
        }
    }
}

/// A generalized-polymatroid market in which some assignment meets every quota.
pub fn random_gpoly_instance(rng: &mut impl Rng, n: usize, m: usize) -> MarketInstance {
    loop {
        let fams = (0..m).map(|_| random_gpoly_family(rng, n)).collect();
        let a = value_matrix(rng, n, m, -1, 1);
        let c = value_matrix(rng, n, m, -1, 2);
        let inst = MarketInstance::linear(names("w", n), names("f", m), a, c, fams).unwrap();
        if brute_force_efficient(&inst, u128::MAX, true).is_ok() {
            return inst;
        }
    }
}

/// Up to four random sets with arbitrary bounds; need not have any structure.
pub fn random_arbitrary_family(rng: &mut impl Rng, n: usize) -> ConstraintFamily {
    let mut sets: Vec<WorkerSet> = (0..rng.gen_range(0..=4)).map(|_| nonempty_subset(rng, n)).collect();
    sets.sort();
    sets.dedup();
    ConstraintFamily::new(sets.into_iter().map(|s| random_bounds(rng, s)).collect()).unwrap()
}

/// Single firm, arbitrary quotas, and a random value for every worker set.
pub fn random_general_instance(rng: &mut impl Rng, n: usize) -> MarketInstance {
    let a = (0..n).map(|_| rational(rng, -1, 1, 10)).collect();
    let table: BTreeMap<WorkerSet, Rational> =
        (1..1u64 << n).map(|b| (WorkerSet::from_bits(b), rational(rng, -2, 4, 10))).collect();
    MarketInstance::general(names("w", n), "f".into(), a, table, random_arbitrary_family(rng, n)).unwrap()
}

/// A feasible, bounded program: rows are built around a known non-negative
/// point and a positive row caps the sum of the variables.
pub fn random_lp(rng: &mut impl Rng, max_vars: usize, max_rows: usize) -> LpProblem {
    random_lp_with_point(rng, max_vars, max_rows).0
}

/// [`random_lp`] together with the feasible point it was built around.
pub fn random_lp_with_point(rng: &mut impl Rng, max_vars: usize, max_rows: usize) -> (LpProblem, Vec<Rational>) {
    let nv = rng.gen_range(1..=max_vars);
    let x0: Vec<Rational> = (0..nv).map(|_| Rational::new(rng.gen_range(0..=6), rng.gen_range(1..=2))).collect();
    let objective = (0..nv).map(|_| Rational::new(rng.gen_range(-3..=3), rng.gen_range(1..=4))).collect();
    let mut p = LpProblem::new(objective);
    let rows = rng.gen_range(0..=max_rows);
    let cap_at = rng.gen_range(0..=rows);
    for i in 0..=rows {
        let (coeffs, relation): (Vec<Rational>, Relation) = if i == cap_at {
            ((0..nv).map(|_| Rational::from_integer(rng.gen_range(1..=3))).collect(), Relation::Le)
        } else {
            let coeffs = (0..nv)
                .map(|_| if rng.gen_bool(0.3) { Rational::zero() } else { Rational::from_integer(rng.gen_range(-3..=3)) })
                .collect();
            (coeffs, [Relation::Le, Relation::Ge, Relation::Eq][rng.gen_range(0..3)])
        };
        let at: Rational = coeffs.iter().zip(&x0).map(|(a, x)| a * x).sum();
        let slack = Rational::from_integer(if rng.gen_bool(0.4) { 0 } else { rng.gen_range(0..=3) });
        let rhs = match relation {
            Relation::Le => at + slack,
            Relation::Ge => at - slack,
            Relation::Eq => at,
        };
        p.add_row(coeffs, relation, rhs, format!("r{i}"));
    }
    (p, x0)
}

/// Certifies optimality from scratch: the primal point is feasible, the dual
/// has the right signs and covers the objective, the two objectives agree,
/// and every positive dual sits on a tight row and every positive variable on
/// a tight dual constraint.
pub fn certify_optimal(p: &LpProblem, sol: &LpSolution) -> Result<(), String> {
    let (x, y) = (&sol.primal, &sol.dual);
    if x.len() != p.objective.len() || y.len() != p.rows.len() {
        return Err("solution has the wrong shape".into());
    }
    if x.iter().any(Rational::is_negative) {
        return Err("negative primal coordinate".into());
    }
    let dot = |a: &[Rational], b: &[Rational]| a.iter().zip(b).map(|(u, v)| u * v).sum::<Rational>();
    for (i, row) in p.rows.iter().enumerate() {
        let lhs = dot(&row.coeffs, x);
        let ok = match row.relation {
            Relation::Le => lhs <= row.rhs && !y[i].is_negative(),
            Relation::Ge => lhs >= row.rhs && !y[i].is_positive(),
            Relation::Eq => lhs == row.rhs,
        };
        if !ok {
            return Err(format!("row {i} is violated or its dual has the wrong sign"));
        }
        if !y[i].is_zero() && lhs != row.rhs {
            return Err(format!("row {i} carries a dual but is slack"));
        }
    }
    for (j, xj) in x.iter().enumerate() {
        let reduced: Rational = p.rows.iter().zip(y).map(|(r, yi)| &r.coeffs[j] * yi).sum::<Rational>() - &p.objective[j];
        if reduced.is_negative() {
            return Err(format!("dual constraint {j} is violated"));
        }
        if xj.is_positive() && !reduced.is_zero() {
            return Err(format!("variable {j} is positive with a slack dual constraint"));
        }
    }
    let primal = dot(&p.objective, x);
    let dual = dot(&p.rows.iter().map(|r| r.rhs.clone()).collect::<Vec<_>>(), y);
    if primal != sol.objective || dual != primal {
        return Err(format!("objectives differ: reported {}, primal {primal}, dual {dual}", sol.objective));
    }
    Ok(())
}

/// A linear market held as raw tables, independent of the crate's model.
#[derive(Debug, Clone)]
pub struct RawMarket {
    /// `a[w][f]`, `c[w][f]`.
    pub a: Vec<Vec<Rational>>,
    pub c: Vec<Vec<Rational>>,
    /// Per firm: `(members, lower, upper)`.
    pub quotas: Vec<Vec<(u64, u32, u32)>>,
}

impl RawMarket {
    pub fn num_workers(&self) -> usize {
        self.a.len()
    }

    pub fn num_firms(&self) -> usize {
        self.quotas.len()
    }

    pub fn admissible(&self, f: usize, bits: u64) -> bool {
        self.quotas[f].iter().all(|&(s, lo, hi)| {
            let k = (s & bits).count_ones();
            lo <= k && k <= hi
        })
    }

    pub fn to_instance(&self) -> MarketInstance {
        let (n, m) = (self.num_workers(), self.num_firms());
        let fams = self
            .quotas
            .iter()
            .map(|q| {
                ConstraintFamily::new(q.iter().map(|&(s, lo, hi)| QuotaEntry::new(WorkerSet::from_bits(s), lo, hi)).collect())
                    .unwrap()
            })
            .collect();
        MarketInstance::linear(names("w", n), names("f", m), self.a.clone(), self.c.clone(), fams).unwrap()
    }

    /// Decides stability of `(x, s)` from the definition. An agent alone
    /// blocks when its payoff is negative; a firm and an admissible set block
    /// when some salary vector leaves every member strictly better off. When
    /// such a vector exists, splitting the surplus equally is one, so each
    /// candidate set is tested by building that vector and checking every
    /// strict improvement directly.
    pub fn oracle_stable(&self, x: &[Option<usize>], s: &[Vec<Rational>]) -> bool {
        let (n, m) = (self.num_workers(), self.num_firms());
        let hired = |f: usize| (0..n).filter(|&w| x[w] == Some(f)).fold(0u64, |b, w| b | 1 << w);
        for f in 0..m {
            let d = hired(f);
            if d != 0 && !self.admissible(f, d) {
                return false;
            }
        }
        let u: Vec<Rational> = (0..n)
            .map(|w| match x[w] {
                Some(f) => &self.a[w][f] + &s[f][w],
                None => Rational::zero(),
            })
            .collect();
        let v: Vec<Rational> = (0..m)
            .map(|f| (0..n).filter(|&w| x[w] == Some(f)).map(|w| &self.c[w][f] - &s[f][w]).sum())
            .collect();
        if u.iter().chain(&v).any(Rational::is_negative) {
            return false;
        }
        for (f, vf) in v.iter().enumerate() {
            for bits in 1..1u64 << n {
                if !self.admissible(f, bits) {
                    continue;
                }
                let members: Vec<usize> = (0..n).filter(|w| bits >> w & 1 == 1).collect();
                let joint: Rational = members.iter().map(|&w| &self.a[w][f] + &self.c[w][f]).sum();
                let held: Rational = members.iter().map(|&w| u[w].clone()).sum::<Rational>() + vf;
                let share = (joint - held) / Rational::from_integer(members.len() as i64 + 1);
                let offer: Vec<Rational> = members.iter().map(|&w| &u[w] - &self.a[w][f] + &share).collect();
                let workers_gain = members.iter().zip(&offer).all(|(&w, sal)| &self.a[w][f] + sal > u[w]);
                let firm_keeps: Rational = members.iter().zip(&offer).map(|(&w, sal)| &self.c[w][f] - sal).sum();
                if workers_gain && &firm_keeps > vf {
                    return false;
                }
            }
        }
        true
    }
}
