//! Exact linear programming over rationals.
//!
//! Problems are maximizations `c·x` over `x >= 0` subject to rows of the form
//! `a·x {<=, >=, =} b`. [`solve_lp`] runs a two-phase tableau simplex with
//! Bland's rule, so results are deterministic and every pivot terminates.
//! Duals follow the usual signs for a maximization: `<=` rows have
//! non-negative duals, `>=` rows non-positive duals, `=` rows free duals.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
    pub label: String,
}

impl Row {
    pub fn lhs(&self, x: &[Rational]) -> Rational {
        dot(&self.coeffs, x)
    }
}

/// `maximize objective·x` subject to `rows`, with every variable non-negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpProblem {
    pub objective: Vec<Rational>,
    pub rows: Vec<Row>,
    pub variable_labels: Vec<String>,
}

impl LpProblem {
    /// A problem with no rows and labels `x0, x1, ...`.
    pub fn new(objective: Vec<Rational>) -> Self {
        let variable_labels = (0..objective.len()).map(|j| format!("x{j}")).collect();
        LpProblem { objective, rows: Vec::new(), variable_labels }
    }

    pub fn with_labels(objective: Vec<Rational>, variable_labels: Vec<String>) -> Self {
        LpProblem { objective, rows: Vec::new(), variable_labels }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational, label: impl Into<String>) {
        self.rows.push(Row { coeffs, relation, rhs, label: label.into() });
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.variable_labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} variable labels for {n} variables",
                self.variable_labels.len()
            )));
        }
        if let Some((i, row)) = self.rows.iter().enumerate().find(|(_, r)| r.coeffs.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} (`{}`) has {} coefficients, expected {n}",
                row.label,
                row.coeffs.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

/// Result of [`solve_lp`]. `primal`, `dual` and `basis` are empty unless optimal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<Rational>,
    pub dual: Vec<Rational>,
    pub objective: Rational,
    /// Basic column per row, indexing structural variables first, then one
    /// slack or surplus column per inequality row, then artificial columns.
    pub basis: Vec<usize>,
}

impl LpSolution {
    fn without_solution(status: LpStatus) -> Self {
        LpSolution { status, primal: Vec::new(), dual: Vec::new(), objective: Rational::zero(), basis: Vec::new() }
    }

    pub fn require_optimal(&self) -> Result<()> {
        if self.status == LpStatus::Optimal {
            Ok(())
        } else {
            Err(Error::Status(self.status.to_string()))
        }
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    let mut acc = Rational::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc += &(x * y);
        }
    }
    acc
}

struct Tableau {
    /// `m` rows of `cols + 1` entries; the last entry is the right-hand side.
    rows: Vec<Vec<Rational>>,
    /// Reduced costs, then the current objective value.
    obj: Vec<Rational>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if p != 1 {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v = &*v / &p;
                }
            }
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let eliminate = |target: &mut Vec<Rational>| {
            let factor = target[c].clone();
            if factor.is_zero() {
                return;
            }
            for (t, pv) in target.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *t -= &(&factor * pv);
                }
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }

    /// Bland's rule until optimal. Returns `false` if the objective is unbounded.
    fn run(&mut self, allowed: impl Fn(usize) -> bool) -> bool {
        loop {
            let Some(c) = (0..self.cols).find(|&j| allowed(j) && self.obj[j].is_negative()) else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[self.cols] / &row[c];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Solves `p` exactly. The primal is a basic (vertex) solution and the dual
/// is the matching basic dual solution.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let n = p.num_vars();
    let m = p.rows.len();

    // Normalize to non-negative right-hand sides; zero-rhs `>=` rows become `<=`.
    let mut flipped = vec![false; m];
    let mut rels = Vec::with_capacity(m);
    for (i, row) in p.rows.iter().enumerate() {
        let flip = row.rhs.is_negative() || (row.rhs.is_zero() && row.relation == Relation::Ge);
        flipped[i] = flip;
        rels.push(match (row.relation, flip) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (r, _) => r,
        });
    }
    let num_slack = rels.iter().filter(|r| **r != Relation::Eq).count();
    let num_art = rels.iter().filter(|r| **r != Relation::Le).count();
    let art_start = n + num_slack;
    let cols = art_start + num_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut identity_col = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n, art_start);
    for (i, row) in p.rows.iter().enumerate() {
        let mut t = vec![Rational::zero(); cols + 1];
        for (j, a) in row.coeffs.iter().enumerate() {
            t[j] = if flipped[i] { -a } else { a.clone() };
        }
        t[cols] = if flipped[i] { -&row.rhs } else { row.rhs.clone() };
        match rels[i] {
            Relation::Le => {
                t[next_slack] = Rational::one();
                basis.push(next_slack);
                identity_col.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                t[next_slack] = Rational::from_integer(-1);
                next_slack += 1;
                t[next_art] = Rational::one();
                basis.push(next_art);
                identity_col.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                t[next_art] = Rational::one();
                basis.push(next_art);
                identity_col.push(next_art);
                next_art += 1;
            }
        }
        rows.push(t);
    }
    let mut tab = Tableau { rows, obj: vec![Rational::zero(); cols + 1], basis, cols };

    if num_art > 0 {
        // Phase 1: maximize minus the sum of artificials.
        for j in art_start..cols {
            tab.obj[j] = Rational::one();
        }
        for i in 0..m {
            if tab.basis[i] >= art_start {
                let row = tab.rows[i].clone();
                for (o, v) in tab.obj.iter_mut().zip(&row) {
                    *o -= v;
                }
            }
        }
        tab.run(|_| true);
        if tab.obj[cols].is_negative() {
            return Ok(LpSolution::without_solution(LpStatus::Infeasible));
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] < art_start {
                continue;
            }
            if let Some(j) = (0..art_start).find(|&j| !tab.rows[i][j].is_zero()) {
                tab.pivot(i, j);
            }
        }
    }

    // Phase 2.
    let mut obj = vec![Rational::zero(); cols + 1];
    for (j, c) in p.objective.iter().enumerate() {
        obj[j] = -c;
    }
    tab.obj = obj;
    for i in 0..m {
        let b = tab.basis[i];
        if !tab.obj[b].is_zero() {
            let factor = tab.obj[b].clone();
            for (o, v) in tab.obj.iter_mut().zip(&tab.rows[i]) {
                if !v.is_zero() {
                    *o -= &(&factor * v);
                }
            }
        }
    }
    if !tab.run(|j| j < art_start) {
        return Ok(LpSolution::without_solution(LpStatus::Unbounded));
    }

    let mut primal = vec![Rational::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            primal[b] = tab.rows[i][cols].clone();
        }
    }
    let dual = (0..m)
        .map(|i| {
            let y = tab.obj[identity_col[i]].clone();
            if flipped[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    let objective = dot(&p.objective, &primal);
    Ok(LpSolution { status: LpStatus::Optimal, primal, dual, objective, basis: tab.basis })
}

/// Every primal coordinate is an integer.
pub fn check_integral(sol: &LpSolution) -> Result<bool> {
    sol.require_optimal()?;
    Ok(sol.primal.iter().all(Rational::is_integer))
}

/// `x >= 0` and every row holds at `x`.
pub fn primal_feasible(p: &LpProblem, x: &[Rational]) -> bool {
    x.len() == p.num_vars()
        && x.iter().all(|v| !v.is_negative())
        && p.rows.iter().all(|r| r.relation.holds(&r.lhs(x), &r.rhs))
}

/// `y_i * a_i` summed over rows, for column `j`.
fn column_price(p: &LpProblem, y: &[Rational], j: usize) -> Rational {
    let mut acc = Rational::zero();
    for (row, yi) in p.rows.iter().zip(y) {
        if !yi.is_zero() && !row.coeffs[j].is_zero() {
            acc += &(yi * &row.coeffs[j]);
        }
    }
    acc
}

/// Sign conditions per row relation and `yᵀA >= c` column by column.
pub fn dual_feasible(p: &LpProblem, y: &[Rational]) -> bool {
    if y.len() != p.rows.len() {
        return false;
    }
    let signs_ok = p.rows.iter().zip(y).all(|(row, yi)| match row.relation {
        Relation::Le => !yi.is_negative(),
        Relation::Ge => !yi.is_positive(),
        Relation::Eq => true,
    });
    signs_ok && (0..p.num_vars()).all(|j| column_price(p, y, j) >= p.objective[j])
}

/// `b·y`.
pub fn dual_objective(p: &LpProblem, y: &[Rational]) -> Rational {
    p.rows.iter().zip(y).map(|(r, yi)| yi * &r.rhs).sum()
}

/// Nonzero duals sit on tight rows and positive variables have zero reduced cost.
pub fn check_complementary_slackness(p: &LpProblem, sol: &LpSolution) -> Result<bool> {
    sol.require_optimal()?;
    if sol.primal.len() != p.num_vars() || sol.dual.len() != p.rows.len() {
        return Err(Error::DimensionMismatch("solution does not match the problem".into()));
    }
    let rows_ok = p
        .rows
        .iter()
        .zip(&sol.dual)
        .all(|(row, yi)| yi.is_zero() || row.lhs(&sol.primal) == row.rhs);
    let cols_ok = (0..p.num_vars())
        .all(|j| sol.primal[j].is_zero() || column_price(p, &sol.dual, j) == p.objective[j]);
    Ok(rows_ok && cols_ok)
}

/// Plain-text listing of the problem, one row per line.
pub fn dump_lp(p: &LpProblem) -> String {
    let term_list = |coeffs: &[Rational]| {
        let terms: Vec<String> = coeffs
            .iter()
            .zip(&p.variable_labels)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, l)| if *c == 1 { l.clone() } else { format!("{c}*{l}") })
            .collect();
        if terms.is_empty() {
            "0".to_string()
        } else {
            terms.join(" + ")
        }
    };
    let mut out = String::new();
    let _ = writeln!(out, "maximize {}", term_list(&p.objective));
    let _ = writeln!(out, "subject to");
    for row in &p.rows {
        let _ = writeln!(out, "  {}: {} {} {}", row.label, term_list(&row.coeffs), row.relation.symbol(), row.rhs);
    }
    let _ = writeln!(out, "bounds");
    for l in &p.variable_labels {
        let _ = writeln!(out, "  {l} >= 0");
    }
    out
}
