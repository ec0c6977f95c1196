//! Structural checks on quota families and enumeration of feasible hiring sets.

use crate::error::{Error, Result};
use crate::model::{ConstraintFamily, FirmId, MarketInstance, QuotaEntry};
use crate::par::{filter_map_range, Execution};
use crate::workerset::WorkerSet;

/// Default bound on `2^|W|` for feasible-set enumeration.
pub const DEFAULT_ENUM_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Holds,
    Violated,
    /// The property could not be decided from the family alone.
    Indeterminate,
}

/// Which defining condition a witness breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Two sets overlap without either containing the other.
    NotLaminar,
    /// A crossing pair whose intersection is not a member.
    IntersectionMissing,
    /// A crossing pair whose union is not a member.
    UnionMissing,
    /// `upper(A) + upper(B) < upper(A ∪ B) + upper(A ∩ B)` on a crossing pair.
    UpperNotSubmodular,
    /// `lower(A) + lower(B) > lower(A ∪ B) + lower(A ∩ B)` on a crossing pair.
    LowerNotSupermodular,
    /// `lower(D) - lower(D \ D') > upper(D') - upper(D' \ D)`.
    CrossInequality,
    /// A set difference needed by the cross-inequality is a non-empty non-member.
    DifferenceOutsideFamily,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureVerdict {
    pub status: VerdictStatus,
    /// The offending sets, in the order the condition names them.
    pub witness: Vec<WorkerSet>,
    pub condition: Option<Condition>,
}

impl StructureVerdict {
    fn holds() -> Self {
        StructureVerdict { status: VerdictStatus::Holds, witness: Vec::new(), condition: None }
    }

    fn violated(condition: Condition, witness: Vec<WorkerSet>) -> Self {
        StructureVerdict { status: VerdictStatus::Violated, witness, condition: Some(condition) }
    }

    pub fn is_holds(&self) -> bool {
        self.status == VerdictStatus::Holds
    }
}

fn crossing_pairs(family: &ConstraintFamily) -> impl Iterator<Item = (&QuotaEntry, &QuotaEntry)> {
    let entries = family.entries();
    entries
        .iter()
        .enumerate()
        .flat_map(move |(i, a)| entries[i + 1..].iter().map(move |b| (a, b)))
        .filter(|(a, b)| a.set.crosses(b.set))
}

/// Every pair of member sets is nested or disjoint.
pub fn is_hierarchy(family: &ConstraintFamily) -> StructureVerdict {
    match crossing_pairs(family).next() {
        Some((a, b)) => StructureVerdict::violated(Condition::NotLaminar, vec![a.set, b.set]),
        None => StructureVerdict::holds(),
    }
}

/// Crossing pairs have their intersection and union in the family.
pub fn is_intersecting_family(family: &ConstraintFamily) -> StructureVerdict {
    // Families cannot hold the empty set (rejected at construction).
    for (a, b) in crossing_pairs(family) {
        if family.find(a.set.intersection(b.set)).is_none() {
            return StructureVerdict::violated(Condition::IntersectionMissing, vec![a.set, b.set]);
        }
        if family.find(a.set.union(b.set)).is_none() {
            return StructureVerdict::violated(Condition::UnionMissing, vec![a.set, b.set]);
        }
    }
    StructureVerdict::holds()
}

fn closure_of<'a>(family: &'a ConstraintFamily, a: &QuotaEntry, b: &QuotaEntry) -> (&'a QuotaEntry, &'a QuotaEntry) {
    let meet = family.find(a.set.intersection(b.set)).expect("intersecting family");
    let join = family.find(a.set.union(b.set)).expect("intersecting family");
    (meet, join)
}

fn submodular_failure(family: &ConstraintFamily) -> Option<StructureVerdict> {
    crossing_pairs(family).find_map(|(a, b)| {
        let (meet, join) = closure_of(family, a, b);
        (a.upper + b.upper < join.upper + meet.upper)
            .then(|| StructureVerdict::violated(Condition::UpperNotSubmodular, vec![a.set, b.set]))
    })
}

/// Intersecting family with submodular upper quotas. Lower quotas are ignored.
pub fn is_polymatroid(family: &ConstraintFamily) -> StructureVerdict {
    let inter = is_intersecting_family(family);
    if !inter.is_holds() {
        return inter;
    }
    submodular_failure(family).unwrap_or_else(StructureVerdict::holds)
}

/// Intersecting family, submodular upper and supermodular lower quotas, and
/// the cross-inequality between lower and upper quotas over every ordered pair.
///
/// Quotas are only defined on members; the empty set counts as zero. If a
/// difference needed by the cross-inequality is some other set, that pair
/// cannot be evaluated and the verdict is `Indeterminate` unless another
/// condition is violated outright.
pub fn is_generalized_polymatroid(family: &ConstraintFamily) -> StructureVerdict {
    let inter = is_intersecting_family(family);
    if !inter.is_holds() {
        return inter;
    }
    if let Some(v) = submodular_failure(family) {
        return v;
    }
    for (a, b) in crossing_pairs(family) {
        let (meet, join) = closure_of(family, a, b);
        if a.lower + b.lower > join.lower + meet.lower {
            return StructureVerdict::violated(Condition::LowerNotSupermodular, vec![a.set, b.set]);
        }
    }
    let lookup = |set: WorkerSet, pick: fn(&QuotaEntry) -> u32| -> Option<i64> {
        if set.is_empty() {
            Some(0)
        } else {
            family.find(set).map(|e| pick(e) as i64)
        }
    };
    let mut undecided = None;
    for d in family.entries() {
        for dp in family.entries() {
            let lo_rest = lookup(d.set.difference(dp.set), |e| e.lower);
            let up_rest = lookup(dp.set.difference(d.set), |e| e.upper);
            match (lo_rest, up_rest) {
                (Some(lr), Some(ur)) => {
                    if d.lower as i64 - lr > dp.upper as i64 - ur {
                        return StructureVerdict::violated(Condition::CrossInequality, vec![d.set, dp.set]);
                    }
                }
                _ => {
                    undecided.get_or_insert(vec![d.set, dp.set]);
                }
            }
        }
    }
    match undecided {
        Some(witness) => StructureVerdict {
            status: VerdictStatus::Indeterminate,
            witness,
            condition: Some(Condition::DifferenceOutsideFamily),
        },
        None => StructureVerdict::holds(),
    }
}

/// The feasible hiring sets of one firm, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityCollection {
    pub firm: FirmId,
    pub sets: Vec<WorkerSet>,
}

impl FeasibilityCollection {
    pub fn contains(&self, set: WorkerSet) -> bool {
        self.sets.binary_search(&set).is_ok()
    }

    pub fn contains_empty(&self) -> bool {
        self.sets.first() == Some(&WorkerSet::EMPTY)
    }
}

pub(crate) fn check_subset_cap(num_workers: usize, cap: u128) -> Result<()> {
    let needed = 1u128.checked_shl(num_workers as u32).unwrap_or(u128::MAX);
    if needed > cap || num_workers >= 64 {
        return Err(Error::CapExceeded { needed, cap });
    }
    Ok(())
}

/// All subsets of `{0, .., n-1}` admitted by `family`, canonically ordered.
pub fn feasible_subsets(family: &ConstraintFamily, num_workers: usize, cap: u128, exec: Execution) -> Result<Vec<WorkerSet>> {
    check_subset_cap(num_workers, cap)?;
    let mut sets = filter_map_range(exec, 1u64 << num_workers, |bits| {
        let s = WorkerSet::from_bits(bits);
        family.admits(s).then_some(s)
    });
    sets.sort_unstable();
    Ok(sets)
}

/// `T_f` for firm `f`: every subset of the workers meeting all of its quotas.
pub fn enumerate_feasible_sets(inst: &MarketInstance, f: FirmId, cap: u128) -> Result<FeasibilityCollection> {
    enumerate_feasible_sets_with(inst, f, cap, Execution::default())
}

pub fn enumerate_feasible_sets_with(
    inst: &MarketInstance,
    f: FirmId,
    cap: u128,
    exec: Execution,
) -> Result<FeasibilityCollection> {
    let sets = feasible_subsets(inst.constraints(f), inst.num_workers(), cap, exec)?;
    Ok(FeasibilityCollection { firm: f, sets })
}
