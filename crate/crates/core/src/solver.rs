//! Local-correction solver.
//!
//! `locally_correct` resamples a violated clause and then repeatedly recurses
//! on the first violated clause of its inclusive neighbourhood until that
//! neighbourhood is satisfied. `solve` calls it on the first violated clause
//! of the formula until none is left, restarting from a fresh table whenever
//! a single correction needs more than `T(m) = ceil(log2 m) + 2` invocations.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assignment::{
    AssignmentTable, FixedTable, IndirectAssignment, RandomTable, Table, TruthAssignment,
};
use crate::cnf::{ClauseId, Formula};
use crate::error::{Error, Result};
use crate::witness::RecursionTree;

/// `T(m) = ceil(log2 m) + 2`, with `T(0) = T(1) = 2`.
pub fn threshold(m: usize) -> usize {
    let log = if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    };
    log + 2
}

/// Where the invocation counter is reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetScope {
    /// Fresh budget for every top-level correction.
    #[default]
    PerCorrection,
    /// One budget shared by all corrections of an epoch. No running-time
    /// guarantee is attached to this mode.
    PerEpoch,
}

#[derive(Debug, Clone, Default)]
pub struct SolverConfig {
    /// Invocation budget; `None` means `T(m)`.
    pub threshold: Option<usize>,
    pub budget_scope: BudgetScope,
    /// Give up after this many restarts; `None` retries forever.
    pub max_restarts: Option<usize>,
    /// Keep every correction tree, its starting indirect assignment and the
    /// induced assignments around it.
    pub record_journal: bool,
}

impl SolverConfig {
    pub fn threshold_for(&self, formula: &Formula) -> usize {
        self.threshold.unwrap_or_else(|| threshold(formula.num_clauses()))
    }
}

pub enum TableSource {
    Seed(u64),
    Fixed(FixedTable),
}

/// Invocation counter for `locally_correct`.
#[derive(Debug, Clone)]
pub struct Budget {
    limit: usize,
    used: usize,
}

impl Budget {
    pub fn new(limit: usize) -> Self {
        Budget { limit, used: 0 }
    }

    fn try_spend(&mut self) -> bool {
        if self.used >= self.limit {
            return false;
        }
        self.used += 1;
        true
    }

    pub fn used(&self) -> usize {
        self.used
    }
}

/// Current indirect assignment together with the truth assignment it
/// induces under the run's table.
#[derive(Debug, Clone)]
pub struct SearchState {
    indirect: IndirectAssignment,
    current: TruthAssignment,
}

impl SearchState {
    /// All-zero indirect assignment.
    pub fn new<T: Table + ?Sized>(formula: &Formula, table: &mut T) -> Result<Self> {
        Self::with_indirect(table, IndirectAssignment::zeros(formula.num_vars()))
    }

    pub fn with_indirect<T: Table + ?Sized>(table: &mut T, indirect: IndirectAssignment) -> Result<Self> {
        let current = crate::assignment::induced(table, &indirect)?;
        Ok(SearchState { indirect, current })
    }

    pub fn indirect(&self) -> &IndirectAssignment {
        &self.indirect
    }

    pub fn assignment(&self) -> &TruthAssignment {
        &self.current
    }

    /// Resamples `clause` by moving each of its variables to its next row.
    fn resample<T: Table + ?Sized>(&mut self, formula: &Formula, table: &mut T, clause: ClauseId) -> Result<()> {
        for v in formula.clause(clause).vars() {
            self.indirect.bump([v]);
            let bit = table.entry(v, self.indirect.get(v))?;
            self.current.set(v, bit);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Scope {
    Formula,
    /// Γ⁺ of the given clause.
    Neighbourhood(ClauseId),
}

/// First violated clause within `scope`, in clause order.
pub fn first_violated(formula: &Formula, a: &TruthAssignment, scope: Scope) -> Option<ClauseId> {
    match scope {
        Scope::Formula => formula
            .clauses()
            .iter()
            .find(|c| !c.is_satisfied_by(a))
            .map(|c| c.id()),
        Scope::Neighbourhood(c) => formula
            .inclusive_neighbourhood(c)
            .iter()
            .copied()
            .find(|&d| !formula.clause(d).is_satisfied_by(a)),
    }
}

#[derive(Debug, Clone)]
pub enum CorrectionResult {
    Completed(RecursionTree),
    Aborted(RecursionTree),
}

impl CorrectionResult {
    pub fn tree(&self) -> &RecursionTree {
        match self {
            CorrectionResult::Completed(t) | CorrectionResult::Aborted(t) => t,
        }
    }

    pub fn into_tree(self) -> RecursionTree {
        match self {
            CorrectionResult::Completed(t) | CorrectionResult::Aborted(t) => t,
        }
    }
}

/// Runs the recursive correction procedure for the violated clause `clause`,
/// with an explicit stack. Every invocation, the first one included, spends
/// one unit of `budget`; when an invocation cannot be paid for, the
/// correction stops and the tree built so far is returned as `Aborted`.
pub fn locally_correct<T: Table + ?Sized>(
    formula: &Formula,
    table: &mut T,
    state: &mut SearchState,
    clause: ClauseId,
    budget: &mut Budget,
) -> Result<CorrectionResult> {
    formula.get(clause)?;
    if formula.clause(clause).is_satisfied_by(&state.current) {
        return Err(Error::ClauseNotViolated(clause));
    }
    let mut tree = RecursionTree::new(clause);
    if !budget.try_spend() {
        tree.set_complete(false);
        return Ok(CorrectionResult::Aborted(tree));
    }
    state.resample(formula, table, clause)?;

    let mut stack = vec![(0usize, clause)];
    while let Some(&(node, label)) = stack.last() {
        match first_violated(formula, &state.current, Scope::Neighbourhood(label)) {
            None => {
                stack.pop();
            }
            Some(next) => {
                if !budget.try_spend() {
                    tree.set_complete(false);
                    return Ok(CorrectionResult::Aborted(tree));
                }
                let child = tree.add_child(node, next);
                state.resample(formula, table, next)?;
                stack.push((child, next));
            }
        }
    }
    Ok(CorrectionResult::Completed(tree))
}

/// One top-level correction as recorded by the solver.
#[derive(Debug, Clone)]
pub struct JournalEntry {
    pub epoch: usize,
    pub tree: RecursionTree,
    /// Indirect assignment when the correction started.
    pub offset: IndirectAssignment,
    pub before: TruthAssignment,
    /// Induced assignment after a completed correction.
    pub after: Option<TruthAssignment>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub restarts: usize,
    /// Top-level corrections over all epochs.
    pub corrections: usize,
    /// Invocations of `locally_correct`, recursive ones included.
    pub invocations: usize,
    /// Seed of the first table; `null` for fixed tables.
    pub seed: Option<u64>,
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct EpochSummary {
    pub table_seed: Option<u64>,
    pub corrections: usize,
    pub aborted: bool,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub assignment: TruthAssignment,
    pub stats: SolveStats,
    /// Final indirect assignment of the successful epoch.
    pub indirect: IndirectAssignment,
    pub epochs: Vec<EpochSummary>,
    /// Empty unless `record_journal` was set.
    pub journal: Vec<JournalEntry>,
}

impl SolveOutcome {
    pub fn stats_json(&self) -> String {
        serde_json::to_string(&self.stats).expect("stats serialize")
    }

    /// Journal trees of one epoch, in call order.
    pub fn epoch_trees(&self, epoch: usize) -> Vec<RecursionTree> {
        self.journal
            .iter()
            .filter(|e| e.epoch == epoch)
            .map(|e| e.tree.clone())
            .collect()
    }
}

/// Result of running the correction loop once against one table.
#[derive(Debug, Clone)]
pub struct EpochResult {
    pub satisfied: bool,
    pub state: SearchState,
    pub corrections: usize,
    pub invocations: usize,
    /// Top-level trees in call order; the last one is intermediate if the
    /// epoch aborted.
    pub trees: Vec<RecursionTree>,
    pub journal: Vec<JournalEntry>,
}

/// Starting from the all-zero indirect assignment, corrects the first
/// violated clause until none is left or a correction runs out of budget.
pub fn run_epoch<T: Table + ?Sized>(
    formula: &Formula,
    table: &mut T,
    config: &SolverConfig,
    epoch: usize,
) -> Result<EpochResult> {
    let limit = config.threshold_for(formula);
    let mut state = SearchState::new(formula, table)?;
    let mut shared = Budget::new(limit);
    let mut result = EpochResult {
        satisfied: false,
        state: state.clone(),
        corrections: 0,
        invocations: 0,
        trees: Vec::new(),
        journal: Vec::new(),
    };
    while let Some(c) = first_violated(formula, &state.current, Scope::Formula) {
        let before = config.record_journal.then(|| (state.indirect.clone(), state.current.clone()));
        let mut fresh = Budget::new(limit);
        let budget = match config.budget_scope {
            BudgetScope::PerCorrection => &mut fresh,
            BudgetScope::PerEpoch => &mut shared,
        };
        let spent_before = budget.used();
        let outcome = locally_correct(formula, table, &mut state, c, budget)?;
        result.invocations += budget.used() - spent_before;
        let aborted = matches!(outcome, CorrectionResult::Aborted(_));
        if !aborted {
            result.corrections += 1;
        }
        let tree = outcome.into_tree();
        if let Some((offset, before)) = before {
            result.journal.push(JournalEntry {
                epoch,
                tree: tree.clone(),
                offset,
                before,
                after: (!aborted).then(|| state.current.clone()),
            });
        }
        result.trees.push(tree);
        if aborted {
            result.state = state;
            return Ok(result);
        }
    }
    result.satisfied = true;
    result.state = state;
    Ok(result)
}

/// Finds a satisfying assignment.
///
/// With a seed, every epoch reads a fresh random table; the first uses the
/// seed itself and later ones draw their seeds from a generator keyed by it.
/// With a fixed table an aborted correction is an error, since the table was
/// supposed to admit no large consistent witness.
pub fn solve(formula: &Formula, source: TableSource, config: &SolverConfig) -> Result<SolveOutcome> {
    let (mut seeds, fixed, first_seed) = match source {
        TableSource::Seed(s) => (Some(ChaCha8Rng::seed_from_u64(s)), None, Some(s)),
        TableSource::Fixed(t) => {
            if t.vars() != formula.num_vars() {
                return Err(Error::TableShape {
                    got_vars: t.vars(),
                    expected: formula.num_vars(),
                });
            }
            (None, Some(t), None)
        }
    };

    let mut stats = SolveStats {
        restarts: 0,
        corrections: 0,
        invocations: 0,
        seed: first_seed,
        satisfied: false,
    };
    let mut epochs = Vec::new();
    let mut journal = Vec::new();
    let mut next_seed = first_seed;

    loop {
        let epoch = epochs.len();
        let mut table = match (&fixed, next_seed) {
            (Some(t), _) => AssignmentTable::Fixed(t.clone()),
            (None, Some(s)) => AssignmentTable::Random(RandomTable::new(s)),
            (None, None) => unreachable!(),
        };
        let run = run_epoch(formula, &mut table, config, epoch)?;
        stats.corrections += run.corrections;
        stats.invocations += run.invocations;
        journal.extend(run.journal);
        epochs.push(EpochSummary {
            table_seed: next_seed,
            corrections: run.corrections,
            aborted: !run.satisfied,
        });

        if run.satisfied {
            stats.satisfied = true;
            return Ok(SolveOutcome {
                assignment: run.state.current,
                stats,
                indirect: run.state.indirect,
                epochs,
                journal,
            });
        }
        if fixed.is_some() {
            let last = run.trees.last().expect("aborted epoch has a tree");
            return Err(Error::FixedTableAbort {
                clause: last.root_label(),
                invocations: last.len(),
            });
        }
        stats.restarts += 1;
        if config.max_restarts.is_some_and(|cap| stats.restarts > cap) {
            return Err(Error::RestartLimit(stats.restarts - 1));
        }
        next_seed = seeds.as_mut().map(|r| r.next_u64());
    }
}
