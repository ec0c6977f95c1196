//! Payoffs, stability and efficiency checks, existence of stable
//! arrangements, and firm demand.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::assignment_lp::payoffs_to_salaries;
use crate::constraints::{check_subset_cap, feasible_subsets, FeasibilityCollection};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpStatus, Relation};
use crate::model::{Arrangement, Assignment, FirmId, MarketInstance, PayoffVector, WorkerId};
use crate::par::{find_map_first, map_slice, Execution};
use crate::rational::Rational;
use crate::workerset::WorkerSet;

/// Default bound on `(|F| + 1)^|W|` for assignment enumeration.
pub const DEFAULT_ASSIGN_CAP: u128 = 10_000_000;

fn check_dims(inst: &MarketInstance, arr: &Arrangement) -> Result<()> {
    let (n, m) = (inst.num_workers(), inst.num_firms());
    if arr.assignment.num_workers() != n || arr.salaries.len() != m {
        return Err(Error::DimensionMismatch("arrangement does not match the instance".into()));
    }
    if arr.assignment.as_slice().iter().flatten().any(|&f| f >= m) {
        return Err(Error::DimensionMismatch("assignment names a firm outside the instance".into()));
    }
    Ok(())
}

/// `u_w = a[w][f_w] + s[w][f_w]` (zero if unmatched) and
/// `v_f = value_f(D_f) - sum_{w in D_f} s[w][f]` (zero if nobody is hired).
pub fn compute_payoffs(inst: &MarketInstance, arr: &Arrangement) -> Result<PayoffVector> {
    check_dims(inst, arr)?;
    let workers = (0..inst.num_workers())
        .map(|w| match arr.assignment.firm_of(w) {
            Some(f) => inst.worker_value(w, f) + arr.salary(w, f),
            None => Rational::zero(),
        })
        .collect();
    let firms = (0..inst.num_firms())
        .map(|f| {
            let hired = arr.assignment.hired_by(f);
            let mut v = inst.firm_value(f, hired)?;
            for w in hired.iter() {
                v -= arr.salary(w, f);
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(PayoffVector { workers, firms })
}

/// Sum of coalition values over firms; independent of salaries.
pub fn total_match_value(inst: &MarketInstance, x: &Assignment) -> Result<Rational> {
    let mut total = Rational::zero();
    for f in 0..inst.num_firms() {
        let hired = x.hired_by(f);
        if !hired.is_empty() {
            total += &inst.coalition_value(f, hired)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StabilityFailure {
    /// Firm `firm` hires a set its quotas do not allow.
    NotFeasible { firm: FirmId, set: WorkerSet },
    WorkerIrViolated { worker: WorkerId },
    FirmIrViolated { firm: FirmId },
    /// `firm` and `set` jointly produce `deficit` more than they currently receive.
    BlockingCoalition { firm: FirmId, set: WorkerSet, deficit: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// First failed condition, if any.
    pub failure: Option<StabilityFailure>,
    pub payoffs: PayoffVector,
}

fn all_feasible_sets(inst: &MarketInstance, cap: u128) -> Result<Vec<FeasibilityCollection>> {
    (0..inst.num_firms())
        .map(|f| {
            let sets = feasible_subsets(inst.constraints(f), inst.num_workers(), cap, Execution::Sequential)?;
            Ok(FeasibilityCollection { firm: f, sets })
        })
        .collect()
}

fn check(inst: &MarketInstance, arr: &Arrangement, cap: u128, relaxed: bool) -> Result<StabilityVerdict> {
    let payoffs = compute_payoffs(inst, arr)?;
    let fail = |failure, payoffs| Ok(StabilityVerdict { stable: false, failure: Some(failure), payoffs });
    let collections = all_feasible_sets(inst, cap)?;
    for (f, coll) in collections.iter().enumerate() {
        let hired = arr.assignment.hired_by(f);
        let ok = coll.contains(hired) || (!relaxed && hired.is_empty());
        if !ok {
            return fail(StabilityFailure::NotFeasible { firm: f, set: hired }, payoffs);
        }
    }
    if let Some(w) = payoffs.workers.iter().position(Rational::is_negative) {
        return fail(StabilityFailure::WorkerIrViolated { worker: w }, payoffs);
    }
    if !relaxed {
        if let Some(f) = payoffs.firms.iter().position(Rational::is_negative) {
            return fail(StabilityFailure::FirmIrViolated { firm: f }, payoffs);
        }
    }
    for (f, coll) in collections.iter().enumerate() {
        for &d in &coll.sets {
            let received: Rational = d.iter().map(|w| &payoffs.workers[w]).sum::<Rational>() + &payoffs.firms[f];
            let deficit = inst.coalition_value(f, d)? - received;
            if deficit.is_positive() {
                return fail(StabilityFailure::BlockingCoalition { firm: f, set: d, deficit }, payoffs);
            }
        }
    }
    Ok(StabilityVerdict { stable: true, failure: None, payoffs })
}

/// Feasible, individually rational, and no firm with a feasible set of
/// workers can jointly produce more than they currently receive.
pub fn check_stable(inst: &MarketInstance, arr: &Arrangement, cap: u128) -> Result<StabilityVerdict> {
    check(inst, arr, cap, false)
}

/// Every firm hires an admissible set (staying empty counts only when the
/// empty set is admissible), workers are individually rational, and no
/// admissible set blocks. Firms may end with negative payoffs.
pub fn check_r_stable(inst: &MarketInstance, arr: &Arrangement, cap: u128) -> Result<StabilityVerdict> {
    check(inst, arr, cap, true)
}

/// All assignments of maximum total value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EfficientAssignments {
    pub value: Rational,
    /// In canonical order: worker 0 is the most significant digit, with
    /// "unmatched" before firm 0 before firm 1, and so on.
    pub maximizers: Vec<Assignment>,
    /// Whether only assignments where every firm's set is admissible were considered.
    pub r_mode: bool,
}

pub(crate) fn check_assignment_cap(num_workers: usize, num_firms: usize, cap: u128) -> Result<()> {
    let needed = (num_firms as u128 + 1).checked_pow(num_workers as u32).unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    Ok(())
}

/// Per-firm table over all subsets: coalition value if the set may be hired.
fn firm_tables(inst: &MarketInstance, r_mode: bool) -> Result<Vec<Vec<Option<Rational>>>> {
    let n = inst.num_workers();
    check_subset_cap(n, u128::MAX >> 1)?;
    (0..inst.num_firms())
        .map(|f| {
            let fam = inst.constraints(f);
            (0..1u64 << n)
                .map(|bits| {
                    let s = WorkerSet::from_bits(bits);
                    if s.is_empty() && !r_mode {
                        return Ok(Some(Rational::zero()));
                    }
                    if fam.admits(s) {
                        inst.coalition_value(f, s).map(Some)
                    } else {
                        Ok(None)
                    }
                })
                .collect()
        })
        .collect()
}

/// Rescales every table entry to an integer over a common denominator, if it fits.
fn scale_tables(tables: &[Vec<Option<Rational>>]) -> Option<(Vec<Vec<Option<i128>>>, BigInt)> {
    let mut lcm = BigInt::one();
    for v in tables.iter().flatten().flatten() {
        lcm = lcm.lcm(v.denom());
    }
    let limit = BigInt::from(1u128 << 100);
    if lcm > limit {
        return None;
    }
    let scaled = tables
        .iter()
        .map(|t| {
            t.iter()
                .map(|v| match v {
                    None => Some(None),
                    Some(v) => {
                        let s = v.numer() * (&lcm / v.denom());
                        if s > limit || s < -limit.clone() {
                            None
                        } else {
                            s.to_i128().map(Some)
                        }
                    }
                })
                .collect::<Option<Vec<_>>>()
        })
        .collect::<Option<Vec<_>>>()?;
    Some((scaled, lcm))
}

trait Score: Clone + Ord + Send + Sync {
    fn zero() -> Self;
    fn plus(&self, other: &Self) -> Self;
}

impl Score for i128 {
    fn zero() -> Self {
        0
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
}

impl Score for Rational {
    fn zero() -> Self {
        Rational::zero()
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
}

struct Best<V> {
    value: Option<V>,
    codes: Vec<Vec<Option<FirmId>>>,
}

impl<V: Score> Best<V> {
    fn offer(&mut self, value: V, digits: &[Option<FirmId>]) {
        match &self.value {
            Some(b) if value < *b => {}
            Some(b) if value == *b => self.codes.push(digits.to_vec()),
            _ => {
                self.value = Some(value);
                self.codes.clear();
                self.codes.push(digits.to_vec());
            }
        }
    }

    fn merge(mut self, other: Best<V>) -> Best<V> {
        match (&self.value, other.value) {
            (_, None) => self,
            (None, Some(v)) => Best { value: Some(v), codes: other.codes },
            (Some(a), Some(b)) => {
                if b > *a {
                    Best { value: Some(b), codes: other.codes }
                } else {
                    if b == *a {
                        self.codes.extend(other.codes);
                    }
                    self
                }
            }
        }
    }
}

struct Search<'a, V> {
    tables: &'a [Vec<Option<V>>],
    n: usize,
}

impl<V: Score> Search<'_, V> {
    fn descend(&self, w: usize, masks: &mut [u64], digits: &mut [Option<FirmId>], best: &mut Best<V>) {
        if w == self.n {
            let mut total = V::zero();
            for (t, &mask) in self.tables.iter().zip(masks.iter()) {
                match &t[mask as usize] {
                    Some(v) => total = total.plus(v),
                    None => return,
                }
            }
            best.offer(total, digits);
            return;
        }
        digits[w] = None;
        self.descend(w + 1, masks, digits, best);
        for f in 0..self.tables.len() {
            digits[w] = Some(f);
            masks[f] |= 1 << w;
            self.descend(w + 1, masks, digits, best);
            masks[f] &= !(1 << w);
        }
        digits[w] = None;
    }

    /// Explores all completions of the assignment prefix with mixed-radix code `code`.
    fn search_prefix(&self, depth: usize, code: u64) -> Best<V> {
        let m = self.tables.len();
        let mut masks = vec![0u64; m];
        let mut digits = vec![None; self.n];
        let mut rest = code;
        for w in (0..depth).rev() {
            let d = (rest % (m as u64 + 1)) as usize;
            rest /= m as u64 + 1;
            if d > 0 {
                digits[w] = Some(d - 1);
                masks[d - 1] |= 1 << w;
            }
        }
        let mut best = Best { value: None, codes: Vec::new() };
        self.descend(depth, &mut masks, &mut digits, &mut best);
        best
    }

    fn run(&self, exec: Execution) -> Best<V> {
        let radix = self.tables.len() as u64 + 1;
        let mut depth = 0;
        let mut prefixes = 1u64;
        while depth < self.n && prefixes < 256 && radix > 1 {
            depth += 1;
            prefixes *= radix;
        }
        let codes: Vec<u64> = (0..prefixes).collect();
        map_slice(exec, &codes, |&c| self.search_prefix(depth, c))
            .into_iter()
            .fold(Best { value: None, codes: Vec::new() }, Best::merge)
    }
}

/// Exhaustive search for the assignments of maximum total value.
pub fn brute_force_efficient(inst: &MarketInstance, cap: u128, r_mode: bool) -> Result<EfficientAssignments> {
    brute_force_efficient_with(inst, cap, r_mode, Execution::default())
}

pub fn brute_force_efficient_with(
    inst: &MarketInstance,
    cap: u128,
    r_mode: bool,
    exec: Execution,
) -> Result<EfficientAssignments> {
    let (n, m) = (inst.num_workers(), inst.num_firms());
    check_assignment_cap(n, m, cap)?;
    if m == 0 {
        return Ok(EfficientAssignments { value: Rational::zero(), maximizers: vec![Assignment::unmatched(n)], r_mode });
    }
    let tables = firm_tables(inst, r_mode)?;
    let (value, codes) = match scale_tables(&tables) {
        Some((scaled, lcm)) => {
            let best = Search { tables: &scaled, n }.run(exec);
            let value = best.value.map(|v| Rational::from(num_rational::BigRational::new(BigInt::from(v), lcm)));
            (value, best.codes)
        }
        None => {
            let best = Search { tables: &tables, n }.run(exec);
            (best.value, best.codes)
        }
    };
    let value = value.ok_or(Error::NoFeasibleAssignment)?;
    let maximizers = codes.into_iter().map(Assignment::from_vec).collect();
    Ok(EfficientAssignments { value, maximizers, r_mode })
}

/// Feasible and of maximum total value among feasible assignments.
pub fn check_efficient(inst: &MarketInstance, x: &Assignment, cap: u128) -> Result<bool> {
    let best = brute_force_efficient(inst, cap, false)?;
    Ok(x.is_feasible(inst) && total_match_value(inst, x)? == best.value)
}

/// Every firm's set admissible and of maximum value among such assignments.
pub fn check_r_efficient(inst: &MarketInstance, x: &Assignment, cap: u128) -> Result<bool> {
    let best = brute_force_efficient(inst, cap, true)?;
    Ok(x.is_r_feasible(inst) && total_match_value(inst, x)? == best.value)
}

/// Outcome of the support system for one efficient assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportAttempt {
    pub assignment: Assignment,
    pub supported: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExistenceVerdict {
    pub exists: bool,
    pub witness: Option<Arrangement>,
    pub efficient_value: Rational,
    /// Efficient assignments tried, in order, up to and including the first supported one.
    pub attempts: Vec<SupportAttempt>,
}

/// Payoffs `u, v >= 0` under which `x` leaves no blocking coalition, if any exist.
fn support_payoffs(
    inst: &MarketInstance,
    collections: &[FeasibilityCollection],
    x: &Assignment,
) -> Result<Option<PayoffVector>> {
    let (n, m) = (inst.num_workers(), inst.num_firms());
    let mut labels: Vec<String> = inst.workers().iter().map(|w| format!("u[{w}]")).collect();
    labels.extend(inst.firms().iter().map(|f| format!("v[{f}]")));
    let mut p = LpProblem::with_labels(vec![Rational::zero(); n + m], labels);
    let row = |set: WorkerSet, f: Option<FirmId>| {
        let mut c = vec![Rational::zero(); n + m];
        for w in set.iter() {
            c[w] = Rational::one();
        }
        if let Some(f) = f {
            c[n + f] = Rational::one();
        }
        c
    };
    for f in 0..m {
        let hired = x.hired_by(f);
        let name = &inst.firms()[f];
        if hired.is_empty() {
            p.add_row(row(WorkerSet::EMPTY, Some(f)), Relation::Eq, Rational::zero(), format!("idle[{name}]"));
        } else {
            p.add_row(row(hired, Some(f)), Relation::Eq, inst.coalition_value(f, hired)?, format!("split[{name}]"));
        }
    }
    for w in 0..n {
        if x.firm_of(w).is_none() {
            p.add_row(row(WorkerSet::singleton(w), None), Relation::Eq, Rational::zero(), format!("idle[{}]", inst.workers()[w]));
        }
    }
    for (f, coll) in collections.iter().enumerate() {
        let blocks = std::iter::once(WorkerSet::EMPTY).chain(coll.sets.iter().copied().filter(|s| !s.is_empty()));
        for d in blocks {
            let label = format!("block[{}:{}]", inst.firms()[f], d.display_with(inst.workers()));
            p.add_row(row(d, Some(f)), Relation::Ge, inst.coalition_value(f, d)?, label);
        }
    }
    let mut sol = solve_lp(&p)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let firms = sol.primal.split_off(n);
    Ok(Some(PayoffVector { workers: sol.primal, firms }))
}

/// Decides whether a stable arrangement exists by trying to support each
/// efficient assignment with payoffs; any stable arrangement must use one.
pub fn stable_exists(inst: &MarketInstance, enum_cap: u128, assign_cap: u128) -> Result<ExistenceVerdict> {
    stable_exists_with(inst, enum_cap, assign_cap, Execution::default())
}

pub fn stable_exists_with(
    inst: &MarketInstance,
    enum_cap: u128,
    assign_cap: u128,
    exec: Execution,
) -> Result<ExistenceVerdict> {
    let collections = all_feasible_sets(inst, enum_cap)?;
    let best = brute_force_efficient_with(inst, assign_cap, false, exec)?;
    let indexed: Vec<(usize, &Assignment)> = best.maximizers.iter().enumerate().collect();
    let found = find_map_first(exec, &indexed, |&(i, x)| match support_payoffs(inst, &collections, x) {
        Ok(Some(pv)) => Some(Ok((i, pv))),
        Ok(None) => None,
        Err(e) => Some(Err(e)),
    })
    .transpose()?;
    let tried = found.as_ref().map_or(best.maximizers.len(), |(i, _)| i + 1);
    let attempts = best.maximizers[..tried]
        .iter()
        .enumerate()
        .map(|(i, x)| SupportAttempt { assignment: x.clone(), supported: found.as_ref().is_some_and(|(j, _)| *j == i) })
        .collect();
    let witness = match found {
        Some((i, pv)) => Some(payoffs_to_salaries(inst, &best.maximizers[i], &pv)?),
        None => None,
    };
    Ok(ExistenceVerdict { exists: witness.is_some(), witness, efficient_value: best.value, attempts })
}

/// Firm `f`'s payoff from hiring `set` at salaries `s` (indexed by worker).
fn firm_surplus(inst: &MarketInstance, f: FirmId, set: WorkerSet, s: &[Rational]) -> Result<Rational> {
    let mut v = inst.firm_value(f, set)?;
    for w in set.iter() {
        v -= &s[w];
    }
    Ok(v)
}

/// Every admissible set (or the empty set) maximizing firm `f`'s payoff at
/// salaries `s`, in canonical order.
pub fn demand_correspondence(inst: &MarketInstance, f: FirmId, s: &[Rational], cap: u128) -> Result<Vec<WorkerSet>> {
    if s.len() != inst.num_workers() {
        return Err(Error::DimensionMismatch(format!("{} salaries for {} workers", s.len(), inst.num_workers())));
    }
    let mut sets = feasible_subsets(inst.constraints(f), inst.num_workers(), cap, Execution::Sequential)?;
    if sets.first() != Some(&WorkerSet::EMPTY) {
        sets.insert(0, WorkerSet::EMPTY);
    }
    let mut by_value: BTreeMap<Rational, Vec<WorkerSet>> = BTreeMap::new();
    for d in sets {
        by_value.entry(firm_surplus(inst, f, d, s)?).or_default().push(d);
    }
    Ok(by_value.pop_last().map(|(_, v)| v).unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutesVerdict {
    pub violated: bool,
    /// A set demanded before the raise whose other members are not all kept by any set demanded after it.
    pub witness: Option<WorkerSet>,
    pub demand_before: Vec<WorkerSet>,
    pub demand_after: Vec<WorkerSet>,
}

/// Tests whether raising worker `w`'s salary from `s` to `s_raised` makes
/// the firm drop some other worker from every demanded set.
pub fn check_substitutes_violation(
    inst: &MarketInstance,
    f: FirmId,
    s: &[Rational],
    s_raised: &[Rational],
    w: WorkerId,
    cap: u128,
) -> Result<SubstitutesVerdict> {
    if s.len() != s_raised.len() || w >= s.len() {
        return Err(Error::Precondition("salary vectors must have equal length and cover the raised worker".into()));
    }
    if let Some(k) = (0..s.len()).find(|&k| k != w && s[k] != s_raised[k]) {
        return Err(Error::Precondition(format!("salaries also differ at worker {k}")));
    }
    if s_raised[w] <= s[w] {
        return Err(Error::Precondition("the raised salary must strictly exceed the original".into()));
    }
    let demand_before = demand_correspondence(inst, f, s, cap)?;
    let demand_after = demand_correspondence(inst, f, s_raised, cap)?;
    let witness = demand_before
        .iter()
        .copied()
        .find(|d| !demand_after.iter().any(|dp| d.without(w).is_subset(*dp)));
    Ok(SubstitutesVerdict { violated: witness.is_some(), witness, demand_before, demand_after })
}
