//! Market instances, constraint families, assignments and arrangements.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::workerset::{WorkerSet, MAX_WORKERS};

pub type WorkerId = usize;
pub type FirmId = usize;

/// One quota row: `lower <= |D ∩ hired| <= upper`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotaEntry {
    pub set: WorkerSet,
    pub lower: u32,
    pub upper: u32,
}

impl QuotaEntry {
    pub fn new(set: WorkerSet, lower: u32, upper: u32) -> Self {
        QuotaEntry { set, lower, upper }
    }

    pub fn upper_only(set: WorkerSet, upper: u32) -> Self {
        QuotaEntry { set, lower: 0, upper }
    }

    pub fn admits(&self, hired: WorkerSet) -> bool {
        let k = hired.intersection(self.set).len() as u32;
        self.lower <= k && k <= self.upper
    }
}

/// The hiring quotas of a single firm.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintFamily {
    entries: Vec<QuotaEntry>,
}

impl ConstraintFamily {
    pub fn new(entries: Vec<QuotaEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if e.set.is_empty() {
                return Err(Error::Value("constraint sets must be non-empty".into()));
            }
            if e.lower > e.upper {
                return Err(Error::Value(format!(
                    "constraint {i} has lower quota {} above upper quota {}",
                    e.lower, e.upper
                )));
            }
            if entries[..i].iter().any(|prev| prev.set == e.set) {
                return Err(Error::Value(format!("constraint {i} repeats an earlier worker set")));
            }
        }
        Ok(ConstraintFamily { entries })
    }

    pub fn empty() -> Self {
        ConstraintFamily::default()
    }

    pub fn entries(&self) -> &[QuotaEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_lower_bounds(&self) -> bool {
        self.entries.iter().any(|e| e.lower > 0)
    }

    pub fn find(&self, set: WorkerSet) -> Option<&QuotaEntry> {
        self.entries.iter().find(|e| e.set == set)
    }

    /// Whether `hired` meets every quota of the family.
    pub fn admits(&self, hired: WorkerSet) -> bool {
        self.entries.iter().all(|e| e.admits(hired))
    }
}

/// How firms value sets of workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FirmValues {
    /// `c[w][f]`: a firm's value of a set is the sum over its members.
    Linear(Vec<Vec<Rational>>),
    /// One valuation table per firm, keyed by worker set.
    General(Vec<BTreeMap<WorkerSet, Rational>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceMode {
    Linear,
    General,
}

/// A validated market. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketInstance {
    workers: Vec<String>,
    firms: Vec<String>,
    worker_values: Vec<Vec<Rational>>,
    firm_values: FirmValues,
    constraints: Vec<ConstraintFamily>,
}

impl MarketInstance {
    /// Builds a linear-preference market; `a[w][f]` and `c[w][f]` are the
    /// worker and firm values of pair `(w, f)`.
    pub fn linear(
        workers: Vec<String>,
        firms: Vec<String>,
        a: Vec<Vec<Rational>>,
        c: Vec<Vec<Rational>>,
        constraints: Vec<ConstraintFamily>,
    ) -> Result<Self> {
        let inst = MarketInstance {
            workers,
            firms,
            worker_values: a,
            firm_values: FirmValues::Linear(c),
            constraints,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Builds a single-firm market with an arbitrary valuation table.
    pub fn general(
        workers: Vec<String>,
        firm: String,
        a: Vec<Rational>,
        table: BTreeMap<WorkerSet, Rational>,
        constraints: ConstraintFamily,
    ) -> Result<Self> {
        let inst = MarketInstance {
            workers,
            firms: vec![firm],
            worker_values: a.into_iter().map(|v| vec![v]).collect(),
            firm_values: FirmValues::General(vec![table]),
            constraints: vec![constraints],
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = (self.workers.len(), self.firms.len());
        if n > MAX_WORKERS {
            return Err(Error::Value(format!("at most {MAX_WORKERS} workers are supported, got {n}")));
        }
        check_unique(&self.workers, "worker")?;
        check_unique(&self.firms, "firm")?;
        let shape_ok = |mat: &Vec<Vec<Rational>>| mat.len() == n && mat.iter().all(|row| row.len() == m);
        if !shape_ok(&self.worker_values) {
            return Err(Error::Schema("worker values must cover every worker-firm pair".into()));
        }
        if self.constraints.len() != m {
            return Err(Error::Schema("one constraint family per firm is required".into()));
        }
        let all = WorkerSet::full(n);
        for fam in &self.constraints {
            if fam.entries().iter().any(|e| !e.set.is_subset(all)) {
                return Err(Error::Reference("constraint mentions an unknown worker".into()));
            }
        }
        match &self.firm_values {
            FirmValues::Linear(c) => {
                if !shape_ok(c) {
                    return Err(Error::Schema("firm values must cover every worker-firm pair".into()));
                }
            }
            FirmValues::General(tables) => {
                if m != 1 || tables.len() != 1 {
                    return Err(Error::Value(format!(
                        "general valuations require exactly one firm, got {m}"
                    )));
                }
                if tables[0].keys().any(|s| !s.is_subset(all)) {
                    return Err(Error::Reference("valuation table mentions an unknown worker".into()));
                }
            }
        }
        Ok(())
    }

    pub fn workers(&self) -> &[String] {
        &self.workers
    }

    pub fn firms(&self) -> &[String] {
        &self.firms
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn num_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn mode(&self) -> PreferenceMode {
        match self.firm_values {
            FirmValues::Linear(_) => PreferenceMode::Linear,
            FirmValues::General(_) => PreferenceMode::General,
        }
    }

    pub fn firm_values(&self) -> &FirmValues {
        &self.firm_values
    }

    pub fn constraints(&self, f: FirmId) -> &ConstraintFamily {
        &self.constraints[f]
    }

    pub fn all_constraints(&self) -> &[ConstraintFamily] {
        &self.constraints
    }

    pub fn worker_index(&self, name: &str) -> Option<WorkerId> {
        self.workers.iter().position(|w| w == name)
    }

    pub fn firm_index(&self, name: &str) -> Option<FirmId> {
        self.firms.iter().position(|f| f == name)
    }

    pub fn all_workers(&self) -> WorkerSet {
        WorkerSet::full(self.num_workers())
    }

    /// `a[w][f]`.
    pub fn worker_value(&self, w: WorkerId, f: FirmId) -> &Rational {
        &self.worker_values[w][f]
    }

    /// Largest worker value over all pairs (zero for an empty market).
    pub fn max_worker_value(&self) -> Rational {
        self.worker_values
            .iter()
            .flatten()
            .max()
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// `c[w][f]` in linear mode.
    pub fn linear_firm_value(&self, w: WorkerId, f: FirmId) -> Result<&Rational> {
        match &self.firm_values {
            FirmValues::Linear(c) => Ok(&c[w][f]),
            FirmValues::General(_) => Err(Error::Mode("general")),
        }
    }

    /// Match value `a[w][f] + c[w][f]` of a pair in linear mode.
    pub fn match_value(&self, w: WorkerId, f: FirmId) -> Result<Rational> {
        let c = self.linear_firm_value(w, f)?;
        Ok(&self.worker_values[w][f] + c)
    }

    /// Firm `f`'s own value of hiring exactly `set`; the empty set is worth zero.
    pub fn firm_value(&self, f: FirmId, set: WorkerSet) -> Result<Rational> {
        if set.is_empty() {
            return Ok(Rational::zero());
        }
        match &self.firm_values {
            FirmValues::Linear(c) => Ok(set.iter().map(|w| &c[w][f]).sum()),
            FirmValues::General(tables) => tables[f]
                .get(&set)
                .cloned()
                .ok_or_else(|| Error::UnknownSet(set.display_with(&self.workers).to_string())),
        }
    }

    /// Joint value of firm `f` hiring `set`: the firm's value plus every member's value.
    pub fn coalition_value(&self, f: FirmId, set: WorkerSet) -> Result<Rational> {
        let mut total = self.firm_value(f, set)?;
        for w in set.iter() {
            total += &self.worker_values[w][f];
        }
        Ok(total)
    }
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    let mut seen = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if let Some(j) = seen.insert(n.as_str(), i) {
            return Err(Error::Value(format!("{what} `{n}` is declared twice (positions {j} and {i})")));
        }
    }
    Ok(())
}

/// Which firm, if any, each worker is matched to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    assigned: Vec<Option<FirmId>>,
}

impl Assignment {
    pub fn unmatched(num_workers: usize) -> Self {
        Assignment { assigned: vec![None; num_workers] }
    }

    pub fn from_vec(assigned: Vec<Option<FirmId>>) -> Self {
        Assignment { assigned }
    }

    /// Firm `f` hires exactly `set`; everyone else is unmatched.
    pub fn single(num_workers: usize, f: FirmId, set: WorkerSet) -> Self {
        Assignment {
            assigned: (0..num_workers).map(|w| set.contains(w).then_some(f)).collect(),
        }
    }

    pub fn firm_of(&self, w: WorkerId) -> Option<FirmId> {
        self.assigned[w]
    }

    pub fn set(&mut self, w: WorkerId, f: Option<FirmId>) {
        self.assigned[w] = f;
    }

    pub fn as_slice(&self) -> &[Option<FirmId>] {
        &self.assigned
    }

    pub fn num_workers(&self) -> usize {
        self.assigned.len()
    }

    /// The set `D_f` of workers hired by firm `f`.
    pub fn hired_by(&self, f: FirmId) -> WorkerSet {
        WorkerSet::from_indices(
            self.assigned
                .iter()
                .enumerate()
                .filter(|(_, a)| **a == Some(f))
                .map(|(w, _)| w),
        )
    }

    /// Every firm hires an admissible set or nobody.
    pub fn is_feasible(&self, inst: &MarketInstance) -> bool {
        (0..inst.num_firms()).all(|f| {
            let d = self.hired_by(f);
            d.is_empty() || inst.constraints(f).admits(d)
        })
    }

    /// Every firm hires an admissible set; staying empty counts only if the empty set is admissible.
    pub fn is_r_feasible(&self, inst: &MarketInstance) -> bool {
        (0..inst.num_firms()).all(|f| inst.constraints(f).admits(self.hired_by(f)))
    }
}

/// An assignment plus the full prospective salary matrix `salaries[f][w]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrangement {
    pub assignment: Assignment,
    pub salaries: Vec<Vec<Rational>>,
}

impl Arrangement {
    pub fn new(assignment: Assignment, salaries: Vec<Vec<Rational>>) -> Result<Self> {
        let n = assignment.num_workers();
        if salaries.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch("salary rows must cover every worker".into()));
        }
        Ok(Arrangement { assignment, salaries })
    }

    pub fn salary(&self, w: WorkerId, f: FirmId) -> &Rational {
        &self.salaries[f][w]
    }
}

/// Worker payoffs `u` and firm payoffs `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayoffVector {
    pub workers: Vec<Rational>,
    pub firms: Vec<Rational>,
}

impl PayoffVector {
    pub fn total(&self) -> Rational {
        self.workers.iter().chain(self.firms.iter()).sum()
    }
}

// ---------------------------------------------------------------------------
// Instance documents

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    version: u32,
    mode: PreferenceMode,
    workers: Vec<String>,
    firms: Vec<String>,
    worker_values: IndexMap<String, IndexMap<String, String>>,
    firm_values: Value,
    #[serde(default)]
    constraints: IndexMap<String, Vec<EntryDoc>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    set: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<u32>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TableEntryDoc {
    set: Vec<String>,
    value: String,
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &[u8]) -> Result<MarketInstance> {
    let doc: InstanceDoc = serde_json::from_slice(text).map_err(|e| Error::Schema(e.to_string()))?;
    if doc.version != 1 {
        return Err(Error::Schema(format!("unsupported document version {}", doc.version)));
    }
    if doc.workers.len() > MAX_WORKERS {
        return Err(Error::Value(format!("at most {MAX_WORKERS} workers are supported")));
    }
    check_unique(&doc.workers, "worker")?;
    check_unique(&doc.firms, "firm")?;
    let (n, m) = (doc.workers.len(), doc.firms.len());
    let widx = |name: &str| {
        doc.workers
            .iter()
            .position(|w| w == name)
            .ok_or_else(|| Error::Reference(format!("unknown worker `{name}`")))
    };
    let fidx = |name: &str| {
        doc.firms
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::Reference(format!("unknown firm `{name}`")))
    };
    let set_of = |names: &[String]| -> Result<WorkerSet> {
        let mut s = WorkerSet::EMPTY;
        for name in names {
            let w = widx(name)?;
            if s.contains(w) {
                return Err(Error::Value(format!("worker `{name}` listed twice in one set")));
            }
            s.insert(w);
        }
        Ok(s)
    };
    let pair_matrix = |map: &IndexMap<String, IndexMap<String, String>>, what: &str| -> Result<Vec<Vec<Rational>>> {
        let mut mat: Vec<Vec<Option<Rational>>> = vec![vec![None; m]; n];
        for (wname, row) in map {
            let w = widx(wname)?;
            for (fname, text) in row {
                let f = fidx(fname)?;
                mat[w][f] = Some(Rational::parse(text)?);
            }
        }
        mat.into_iter()
            .enumerate()
            .map(|(w, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(f, v)| {
                        v.ok_or_else(|| {
                            Error::Schema(format!("{what} missing for ({}, {})", doc.workers[w], doc.firms[f]))
                        })
                    })
                    .collect()
            })
            .collect()
    };

    let worker_values = pair_matrix(&doc.worker_values, "worker value")?;
    let firm_values = match doc.mode {
        PreferenceMode::Linear => {
            let map: IndexMap<String, IndexMap<String, String>> = serde_json::from_value(doc.firm_values.clone())
                .map_err(|e| Error::Schema(format!("linear firm_values: {e}")))?;
            FirmValues::Linear(pair_matrix(&map, "firm value")?)
        }
        PreferenceMode::General => {
            if m != 1 {
                return Err(Error::Value(format!("general valuations require exactly one firm, got {m}")));
            }
            let map: IndexMap<String, Vec<TableEntryDoc>> = serde_json::from_value(doc.firm_values.clone())
                .map_err(|e| Error::Schema(format!("general firm_values: {e}")))?;
            let mut table = BTreeMap::new();
            for (fname, entries) in &map {
                fidx(fname)?;
                for e in entries {
                    let s = set_of(&e.set)?;
                    if s.is_empty() {
                        if !Rational::parse(&e.value)?.is_zero() {
                            return Err(Error::Value("the empty set must be valued at zero".into()));
                        }
                        continue;
                    }
                    if table.insert(s, Rational::parse(&e.value)?).is_some() {
                        return Err(Error::Value("valuation table repeats a worker set".into()));
                    }
                }
            }
            FirmValues::General(vec![table])
        }
    };

    let mut constraints = vec![ConstraintFamily::empty(); m];
    for (fname, entries) in &doc.constraints {
        let f = fidx(fname)?;
        let mut parsed = Vec::with_capacity(entries.len());
        for e in entries {
            let set = set_of(&e.set)?;
            if set.is_empty() {
                return Err(Error::Value(format!("firm `{fname}` has a constraint over the empty set")));
            }
            let lower = e.lower.unwrap_or(0);
            let upper = e.upper.unwrap_or(set.len() as u32);
            parsed.push(QuotaEntry::new(set, lower, upper));
        }
        constraints[f] = ConstraintFamily::new(parsed).map_err(|e| match e {
            Error::Value(msg) => Error::Value(format!("firm `{fname}`: {msg}")),
            other => other,
        })?;
    }

    let inst = MarketInstance {
        workers: doc.workers,
        firms: doc.firms,
        worker_values,
        firm_values,
        constraints,
    };
    inst.validate()?;
    Ok(inst)
}

fn names_of(set: WorkerSet, workers: &[String]) -> Vec<String> {
    set.iter().map(|w| workers[w].clone()).collect()
}

/// Instance document as a JSON value (keys in declaration order).
pub fn instance_to_json(inst: &MarketInstance) -> Value {
    let pairs = |get: &dyn Fn(usize, usize) -> String| {
        let mut outer = serde_json::Map::new();
        for (w, wname) in inst.workers.iter().enumerate() {
            let mut inner = serde_json::Map::new();
            for (f, fname) in inst.firms.iter().enumerate() {
                inner.insert(fname.clone(), Value::String(get(w, f)));
            }
            outer.insert(wname.clone(), Value::Object(inner));
        }
        Value::Object(outer)
    };
    let firm_values = match &inst.firm_values {
        FirmValues::Linear(c) => pairs(&|w, f| c[w][f].to_string()),
        FirmValues::General(tables) => {
            let mut obj = serde_json::Map::new();
            for (f, table) in tables.iter().enumerate() {
                let rows: Vec<TableEntryDoc> = table
                    .iter()
                    .map(|(s, v)| TableEntryDoc { set: names_of(*s, &inst.workers), value: v.to_string() })
                    .collect();
                obj.insert(inst.firms[f].clone(), serde_json::to_value(rows).expect("table rows serialize"));
            }
            Value::Object(obj)
        }
    };
    let mut constraints = serde_json::Map::new();
    for (f, fam) in inst.constraints.iter().enumerate() {
        let rows: Vec<EntryDoc> = fam
            .entries()
            .iter()
            .map(|e| EntryDoc {
                set: names_of(e.set, &inst.workers),
                lower: Some(e.lower),
                upper: Some(e.upper),
            })
            .collect();
        constraints.insert(inst.firms[f].clone(), serde_json::to_value(rows).expect("entries serialize"));
    }
    serde_json::json!({
        "version": 1,
        "mode": inst.mode(),
        "workers": inst.workers,
        "firms": inst.firms,
        "worker_values": pairs(&|w, f| inst.worker_values[w][f].to_string()),
        "firm_values": firm_values,
        "constraints": Value::Object(constraints),
    })
}

pub fn serialize_instance(inst: &MarketInstance) -> String {
    serde_json::to_string_pretty(&instance_to_json(inst)).expect("instance serializes")
}
