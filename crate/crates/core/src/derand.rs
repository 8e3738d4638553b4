//! Deterministic solving: build a CNF `G` over the table entries whose
//! satisfying assignments are tables admitting no consistent witness in the
//! critical size range, satisfy it by conditional expectations, and run the
//! solver on the resulting fixed table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::RangeInclusive;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::assignment::{FixedTable, TruthAssignment};
use crate::cnf::{Formula, Var};
use crate::encoding::{enumerate_witnesses, witness_count_bound, EnumerationLimits};
use crate::error::{Error, Result};
use crate::solver::{solve, threshold, SolveStats, SolverConfig, TableSource};
use crate::witness::{CompositeWitness, RecursionTree};

/// `z_{row,var}`, standing for the table entry `A(var, row)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MetaVar {
    pub row: u64,
    pub var: Var,
}

impl fmt::Display for MetaVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z[{},{}]", self.row, self.var.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaLit {
    pub var: MetaVar,
    pub negated: bool,
}

impl MetaLit {
    pub fn is_satisfied_by(self, value: bool) -> bool {
        value != self.negated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetaClause {
    lits: Vec<MetaLit>,
}

impl MetaClause {
    pub fn lits(&self) -> &[MetaLit] {
        &self.lits
    }

    pub fn width(&self) -> usize {
        self.lits.len()
    }

    pub fn is_satisfied_by(&self, beta: &MetaAssignment) -> bool {
        self.lits.iter().any(|l| l.is_satisfied_by(beta.value(l.var)))
    }
}

/// Values for meta-variables; unset ones read as 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetaAssignment(BTreeMap<MetaVar, bool>);

impl MetaAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, z: MetaVar, value: bool) {
        self.0.insert(z, value);
    }

    pub fn get(&self, z: MetaVar) -> Option<bool> {
        self.0.get(&z).copied()
    }

    pub fn value(&self, z: MetaVar) -> bool {
        self.get(z).unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MetaVar, bool)> + '_ {
        self.0.iter().map(|(&z, &b)| (z, b))
    }

    /// The table `A(x, i) = β(z_{i,x})` with `rows` rows.
    pub fn to_table(&self, vars: usize, rows: u64) -> FixedTable {
        let mut t = FixedTable::zeros(vars, rows);
        for (z, b) in self.iter() {
            if b && z.row < rows && z.var.index() < vars {
                t.set(z.var, z.row, true);
            }
        }
        t
    }
}

/// `[u, k·u + 1]`.
pub fn shrink_range(u: usize, k: usize) -> RangeInclusive<usize> {
    u..=k * u + 1
}

/// The clause `C_W`: violated by β exactly when the table of β is
/// consistent with `W`.
pub fn witness_clause(formula: &Formula, witness: &CompositeWitness) -> MetaClause {
    let mut lits: Vec<MetaLit> = witness
        .consistency_entries(formula)
        .into_iter()
        .map(|(lit, row)| MetaLit {
            var: MetaVar { row, var: lit.var },
            negated: lit.negated,
        })
        .collect();
    lits.sort();
    MetaClause { lits }
}

/// Removes the last vertex of `W` in its natural ordering and keeps the
/// component of the remaining trees with the most vertices (the earliest
/// such by root label). `None` if `W` is a single vertex.
pub fn shrink_step(formula: &Formula, witness: &CompositeWitness) -> Option<CompositeWitness> {
    if witness.size() == 1 {
        return None;
    }
    let mut trees: Vec<RecursionTree> = witness.trees().to_vec();
    let last = trees.pop().expect("non-empty");
    if last.len() > 1 {
        // Canonical trees are numbered in natural order, so the last vertex
        // is the last node and every parent precedes its children.
        let mut t = RecursionTree::new(last.root_label());
        for v in 1..last.len() - 1 {
            t.add_child(last.parent(v).expect("non-root"), last.label(v));
        }
        trees.push(t);
    }

    let vars: Vec<BTreeSet<Var>> = trees.iter().map(|t| t.variables(formula)).collect();
    let mut comp = vec![usize::MAX; trees.len()];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for s in 0..trees.len() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = components.len();
        comp[s] = id;
        let mut members = vec![s];
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            for j in 0..trees.len() {
                if comp[j] == usize::MAX && !vars[i].is_disjoint(&vars[j]) {
                    comp[j] = id;
                    members.push(j);
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    let size = |c: &Vec<usize>| c.iter().map(|&i| trees[i].len()).sum::<usize>();
    let best = components
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| size(a).cmp(&size(b)).then(j.cmp(i)))
        .map(|(_, c)| c.clone())
        .expect("at least one tree left");
    let kept = best.into_iter().map(|i| trees[i].clone()).collect();
    Some(CompositeWitness::new(formula, kept).expect("a component of a witness is a witness"))
}

/// Repeats [`shrink_step`] until the size is at most `k·u + 1`.
pub fn shrink_into_range(formula: &Formula, witness: &CompositeWitness, u: usize) -> CompositeWitness {
    let k = formula.width();
    let mut w = witness.clone();
    while w.size() > k * u + 1 {
        w = shrink_step(formula, &w).expect("size above 1");
    }
    w
}

/// The CNF `G` over table entries.
#[derive(Debug, Clone)]
pub struct MetaFormula {
    clauses: Vec<MetaClause>,
    sizes: RangeInclusive<usize>,
}

impl MetaFormula {
    pub fn from_clauses(clauses: Vec<MetaClause>, sizes: RangeInclusive<usize>) -> Self {
        MetaFormula { clauses, sizes }
    }

    pub fn clauses(&self) -> &[MetaClause] {
        &self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Witness sizes whose clauses were collected.
    pub fn sizes(&self) -> RangeInclusive<usize> {
        self.sizes.clone()
    }

    /// Meta-variables occurring in `G`, in (row, variable) order.
    pub fn variables(&self) -> Vec<MetaVar> {
        let set: BTreeSet<MetaVar> = self
            .clauses
            .iter()
            .flat_map(|c| c.lits.iter().map(|l| l.var))
            .collect();
        set.into_iter().collect()
    }

    pub fn max_row(&self) -> Option<u64> {
        self.clauses
            .iter()
            .flat_map(|c| c.lits.iter().map(|l| l.var.row))
            .max()
    }

    pub fn violated(&self, beta: &MetaAssignment) -> usize {
        self.clauses.iter().filter(|c| !c.is_satisfied_by(beta)).count()
    }

    /// Expected number of violated clauses when the unset variables of
    /// `partial` are uniform: clauses not yet satisfied contribute
    /// `2^-(unset literals)`.
    pub fn expected_violations(&self, partial: &MetaAssignment) -> Expectation {
        let scale = self.clauses.iter().map(|c| c.width()).max().unwrap_or(0) as u32;
        let mut numer = BigUint::zero();
        for c in &self.clauses {
            let mut unset = 0u32;
            let mut satisfied = false;
            for l in &c.lits {
                match partial.get(l.var) {
                    Some(b) if l.is_satisfied_by(b) => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => unset += 1,
                }
            }
            if !satisfied {
                numer += BigUint::from(1u32) << (scale - unset);
            }
        }
        Expectation { numer, scale }
    }

    /// DIMACS over meta-variables numbered from 1 in (row, variable) order;
    /// a comment line per variable gives its table cell.
    pub fn to_dimacs(&self) -> String {
        use std::fmt::Write;
        let vars = self.variables();
        let ids: BTreeMap<MetaVar, usize> = vars.iter().enumerate().map(|(i, &z)| (z, i + 1)).collect();
        let mut out = String::new();
        for (z, id) in &ids {
            writeln!(out, "c z {id} row {} var {}", z.row, z.var.0).expect("string write");
        }
        writeln!(out, "p cnf {} {}", vars.len(), self.clauses.len()).expect("string write");
        for c in &self.clauses {
            for l in &c.lits {
                let id = ids[&l.var] as i64;
                write!(out, "{} ", if l.negated { -id } else { id }).expect("string write");
            }
            out.push_str("0\n");
        }
        out
    }
}

/// A dyadic rational `numer / 2^scale`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expectation {
    pub numer: BigUint,
    pub scale: u32,
}

impl Expectation {
    pub fn to_f64(&self) -> f64 {
        let n = self.numer.to_f64().unwrap_or(f64::INFINITY);
        n * (-(self.scale as f64)).exp2()
    }

    pub fn is_below_one(&self) -> bool {
        self.numer < (BigUint::from(1u32) << self.scale)
    }
}

impl PartialOrd for Expectation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        let s = self.scale.max(other.scale);
        let a = &self.numer << (s - self.scale);
        let b = &other.numer << (s - other.scale);
        Some(a.cmp(&b))
    }
}

/// Collects `C_W` for every witness with size in `sizes`.
pub fn build_meta_formula(
    formula: &Formula,
    d: usize,
    sizes: RangeInclusive<usize>,
    limits: EnumerationLimits,
) -> Result<MetaFormula> {
    let mut clauses = Vec::new();
    enumerate_witnesses(formula, sizes.clone(), d, limits, |w| {
        clauses.push(witness_clause(formula, &w));
        Ok(())
    })?;
    Ok(MetaFormula { clauses, sizes })
}

/// Fixes the meta-variables of `G` one at a time in (row, variable) order,
/// each to the value with the smaller conditional expectation (0 on ties).
///
/// Only the sign of the difference matters: setting `z` moves each live
/// clause containing it either to satisfied or to twice its weight, so the
/// two choices change the expectation by opposite amounts.
pub fn conditional_expectations(g: &MetaFormula) -> Result<MetaAssignment> {
    let initial = g.expected_violations(&MetaAssignment::new());
    if !initial.is_below_one() {
        return Err(Error::ExpectationTooLarge(initial.to_f64()));
    }
    let vars = g.variables();
    let index: BTreeMap<MetaVar, usize> = vars.iter().enumerate().map(|(i, &z)| (z, i)).collect();
    let mut occurrences: Vec<Vec<(usize, bool)>> = vec![Vec::new(); vars.len()];
    for (ci, c) in g.clauses.iter().enumerate() {
        for l in &c.lits {
            occurrences[index[&l.var]].push((ci, l.negated));
        }
    }
    let mut unset: Vec<u32> = g.clauses.iter().map(|c| c.width() as u32).collect();
    let mut live = vec![true; g.clauses.len()];
    let scale = unset.iter().copied().max().unwrap_or(0);

    let mut beta = MetaAssignment::new();
    for (zi, &z) in vars.iter().enumerate() {
        // Weight of live clauses satisfied by z = 0 versus by z = 1.
        let (mut by_zero, mut by_one) = (BigUint::zero(), BigUint::zero());
        for &(ci, negated) in &occurrences[zi] {
            if live[ci] {
                let w = BigUint::from(1u32) << (scale - unset[ci]);
                if negated {
                    by_zero += w;
                } else {
                    by_one += w;
                }
            }
        }
        let value = by_one > by_zero;
        beta.set(z, value);
        for &(ci, negated) in &occurrences[zi] {
            if live[ci] {
                if negated != value {
                    live[ci] = false;
                } else {
                    unset[ci] -= 1;
                }
            }
        }
    }
    Ok(beta)
}

#[derive(Debug, Clone, Serialize)]
pub struct DerandReport {
    pub threshold: usize,
    pub sizes: (usize, usize),
    pub meta_clauses: usize,
    pub meta_variables: usize,
    pub initial_expectation: f64,
    /// `Σ m·2^(u(k-1))` over the size range, as a decimal string.
    pub clause_bound: String,
    pub violated_meta_clauses: usize,
    pub table_rows: u64,
    /// Whether `d ≤ 2^(k-5)`, under which `E < 1/2` is guaranteed rather
    /// than only checked.
    pub bound_guaranteed: bool,
}

#[derive(Debug, Clone)]
pub struct DerandOutcome {
    pub assignment: TruthAssignment,
    pub table: FixedTable,
    pub beta: MetaAssignment,
    pub report: DerandReport,
    pub stats: SolveStats,
}

/// Deterministic solve for formulas with `|Γ⁺(C)| ≤ d`.
pub fn derand_solve(formula: &Formula, d: usize, limits: EnumerationLimits) -> Result<DerandOutcome> {
    let report = formula.check_bound(Some(d))?;
    if !report.pass {
        return Err(Error::Infeasible(format!(
            "{} clause(s) have more than d = {d} inclusive neighbours",
            report.violators.len()
        )));
    }
    let m = formula.num_clauses();
    let k = formula.width();
    let t = threshold(m);
    let sizes = shrink_range(t, k);
    let g = build_meta_formula(formula, d, sizes.clone(), limits)?;
    let initial = g.expected_violations(&MetaAssignment::new());
    let beta = conditional_expectations(&g)?;
    let violated = g.violated(&beta);
    if violated != 0 {
        return Err(Error::Infeasible(format!(
            "conditional expectations left {violated} meta-clause(s) violated"
        )));
    }
    let rows = ((m * t) as u64 + 1).max(g.max_row().map_or(0, |r| r + 1));
    let table = beta.to_table(formula.num_vars(), rows);
    let out = solve(formula, TableSource::Fixed(table.clone()), &SolverConfig::default())?;
    let guaranteed = k >= 5 && d <= 1usize << (k - 5);
    Ok(DerandOutcome {
        assignment: out.assignment,
        table,
        report: DerandReport {
            threshold: t,
            sizes: (*sizes.start(), *sizes.end()),
            meta_clauses: g.len(),
            meta_variables: g.variables().len(),
            initial_expectation: initial.to_f64(),
            clause_bound: witness_count_bound(m, k, sizes).to_string(),
            violated_meta_clauses: violated,
            table_rows: rows,
            bound_guaranteed: guaranteed,
        },
        beta,
        stats: out.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::ClauseId;
    use crate::encoding::collect_witnesses;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z(row: u64, var: u32) -> MetaVar {
        MetaVar { row, var: Var(var) }
    }

    #[test]
    fn shrink_range_examples() {
        assert_eq!(shrink_range(5, 3), 5..=16);
        assert_eq!(shrink_range(1, 1), 1..=2);
    }

    #[test]
    fn single_vertex_clause() {
        let f = Formula::from_dimacs_clauses(2, &[&[1, -2]]).unwrap();
        let w = CompositeWitness::new(&f, vec![RecursionTree::new(ClauseId(0))]).unwrap();
        let c = witness_clause(&f, &w);
        assert_eq!(
            c.lits(),
            &[
                MetaLit { var: z(0, 1), negated: false },
                MetaLit { var: z(0, 2), negated: true }
            ]
        );
    }

    #[test]
    fn all_zero_violates_positive_witnesses() {
        let f = Formula::from_dimacs_clauses(3, &[&[1, 2], &[2, 3]]).unwrap();
        let ws = collect_witnesses(&f, 1..=4, 2, EnumerationLimits::default()).unwrap();
        let zero = MetaAssignment::new();
        for w in &ws {
            assert!(!witness_clause(&f, w).is_satisfied_by(&zero));
        }
    }

    #[test]
    fn clause_matches_consistency_on_random_tables() {
        let f = Formula::from_dimacs_clauses(3, &[&[1, -2], &[-2, 3]]).unwrap();
        let mut t = RecursionTree::new(ClauseId(0));
        let c = t.add_child(0, ClauseId(1));
        t.add_child(c, ClauseId(0));
        let w = CompositeWitness::new(&f, vec![t, RecursionTree::new(ClauseId(1))]).unwrap();
        let clause = witness_clause(&f, &w);
        assert_eq!(clause.width(), 2 * w.size());
        let distinct: BTreeSet<MetaVar> = clause.lits().iter().map(|l| l.var).collect();
        assert_eq!(distinct.len(), clause.width());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let mut beta = MetaAssignment::new();
            for row in 0..6 {
                for v in 1..=3 {
                    beta.set(z(row, v), rng.random());
                }
            }
            let mut table = beta.to_table(3, 6);
            assert_eq!(!clause.is_satisfied_by(&beta), w.is_consistent(&f, &mut table).unwrap());
        }
    }

    #[test]
    fn unit_meta_formula() {
        let g = MetaFormula::from_clauses(
            vec![MetaClause {
                lits: vec![MetaLit { var: z(0, 1), negated: false }],
            }],
            1..=1,
        );
        let beta = conditional_expectations(&g).unwrap();
        assert_eq!(beta.get(z(0, 1)), Some(true));
        assert_eq!(g.violated(&beta), 0);
    }

    #[test]
    fn refuses_expectation_at_least_one() {
        let unit = |negated| MetaClause {
            lits: vec![MetaLit { var: z(0, 1), negated }],
        };
        let g = MetaFormula::from_clauses(vec![unit(false), unit(true)], 1..=1);
        assert!(matches!(conditional_expectations(&g), Err(Error::ExpectationTooLarge(e)) if e == 1.0));
    }

    fn random_meta_formula(rng: &mut ChaCha8Rng, vars: u32, clauses: usize) -> MetaFormula {
        let mut cs = Vec::new();
        for _ in 0..clauses {
            let width = rng.random_range(2..=vars.min(6) as usize);
            let mut picked = BTreeSet::new();
            while picked.len() < width {
                picked.insert(rng.random_range(1..=vars));
            }
            let lits = picked
                .into_iter()
                .map(|v| MetaLit {
                    var: z((v % 3) as u64, v),
                    negated: rng.random(),
                })
                .collect();
            cs.push(MetaClause { lits });
        }
        MetaFormula::from_clauses(cs, 1..=1)
    }

    /// Against exhaustive search over all assignments of up to 12
    /// meta-variables, and checks the expectation never rises.
    #[test]
    fn conditional_expectations_agree_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tried = 0;
        while tried < 200 {
            let clauses = rng.random_range(1..8);
            let g = random_meta_formula(&mut rng, 12, clauses);
            let e0 = g.expected_violations(&MetaAssignment::new());
            if !e0.is_below_one() {
                continue;
            }
            tried += 1;
            let vars = g.variables();
            let exists = (0u32..1 << vars.len()).any(|mask| {
                let mut b = MetaAssignment::new();
                for (i, &v) in vars.iter().enumerate() {
                    b.set(v, mask >> i & 1 == 1);
                }
                g.violated(&b) == 0
            });
            assert!(exists);
            let beta = conditional_expectations(&g).unwrap();
            assert_eq!(g.violated(&beta), 0);
            let mut partial = MetaAssignment::new();
            let mut last = e0;
            for &v in &vars {
                partial.set(v, beta.value(v));
                let e = g.expected_violations(&partial);
                assert!(e <= last);
                last = e;
            }
        }
    }

    #[test]
    fn shrink_step_keeps_consistency_and_size() {
        // A path x1-x2-x3-x4-x5 of 2-clauses; all positive, so the all-zero
        // table is consistent with every witness.
        let f = Formula::from_dimacs_clauses(5, &[&[1, 2], &[2, 3], &[3, 4], &[4, 5]]).unwrap();
        let k = 2;
        let ws = collect_witnesses(&f, 1..=6, 3, EnumerationLimits::default()).unwrap();
        let mut table = FixedTable::zeros(5, 20);
        for w in ws.iter().filter(|w| w.size() > 1) {
            let s = shrink_step(&f, w).unwrap();
            assert!(s.size() < w.size());
            assert!(s.size() * k >= w.size() - 1);
            assert!(s.is_consistent(&f, &mut table).unwrap());
        }
    }

    #[test]
    fn meta_dimacs_numbers_variables_in_row_order() {
        let g = MetaFormula::from_clauses(
            vec![MetaClause {
                lits: vec![
                    MetaLit { var: z(0, 2), negated: true },
                    MetaLit { var: z(1, 1), negated: false },
                ],
            }],
            1..=1,
        );
        assert_eq!(
            g.to_dimacs(),
            "c z 1 row 0 var 2\nc z 2 row 1 var 1\np cnf 2 1\n-1 2 0\n"
        );
    }

    #[test]
    fn single_clause_derand() {
        // m = 1: T = 2, sizes [2, 7]; the only witnesses are chains of the
        // one clause.
        let f = Formula::from_dimacs_clauses(3, &[&[1, 2, 3]]).unwrap();
        let out = derand_solve(&f, 1, EnumerationLimits::default()).unwrap();
        assert!(f.is_satisfied_by(&out.assignment).unwrap());
        assert_eq!(out.report.threshold, threshold(1));
        assert_eq!(out.report.sizes, (2, 7));
        assert_eq!(out.report.meta_clauses, 6);
        assert_eq!(out.report.violated_meta_clauses, 0);
    }

    /// The run never reads beyond row `m·T`, so truncating the table to
    /// `m·T + 1` rows changes nothing.
    #[test]
    fn rows_up_to_m_times_threshold_suffice() {
        let pair = Formula::from_dimacs_clauses(5, &[&[1, -2, 3], &[-3, 4, 5]]).unwrap();
        let single = Formula::from_dimacs_clauses(3, &[&[-1, 2, 3]]).unwrap();
        for f in [pair, single] {
            let out = derand_solve(&f, 2, EnumerationLimits::default()).unwrap();
            let rows = (f.num_clauses() * threshold(f.num_clauses())) as u64 + 1;
            let cut = FixedTable::from_fn(f.num_vars(), rows, |v, r| out.table.get(v, r).unwrap());
            let again = solve(&f, TableSource::Fixed(cut), &SolverConfig::default()).unwrap();
            assert_eq!(again.assignment, out.assignment);
            assert!(again.indirect.max() < rows);
        }
    }

    #[test]
    fn derand_rejects_bound_violations() {
        let f = Formula::from_dimacs_clauses(3, &[&[1, 2, 3], &[-1, 2, 3]]).unwrap();
        assert!(matches!(
            derand_solve(&f, 1, EnumerationLimits::default()),
            Err(Error::Infeasible(_))
        ));
    }
}
