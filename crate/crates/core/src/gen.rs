//! Instance generation and test oracles.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{RandomTable, TruthAssignment};
use crate::cnf::{Formula, Lit, Var};
use crate::error::{Error, Result};
use crate::witness::CompositeWitness;

/// Largest formula `brute_force_sat` accepts by default.
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Candidate clauses tried per placement before the pool grows.
const RETRIES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub k: usize,
    pub m: usize,
    /// Bound on `|Γ⁺(C)|` every clause must keep.
    pub d: usize,
    pub seed: u64,
    /// Variables available initially.
    pub n_pool: usize,
    /// The pool may grow up to this many variables.
    pub max_pool: usize,
}

impl GenSpec {
    pub fn new(k: usize, m: usize, d: usize, n_pool: usize, seed: u64) -> Self {
        GenSpec {
            k,
            m,
            d,
            seed,
            n_pool,
            max_pool: (n_pool.max(k) * 4).max(m * k),
        }
    }
}

/// Random `k`-CNF with `m` clauses whose inclusive neighbourhoods have at
/// most `d` members. Each candidate clause is `k` distinct pool variables
/// with fair polarities, kept only if it and every clause it touches stay
/// within the bound. After [`RETRIES`] rejections in a row the pool gains a
/// variable; exceeding `max_pool` is an error.
///
/// The formula's variable count is the final pool size, so variables that no
/// clause uses are possible.
pub fn gen_instance(spec: &GenSpec) -> Result<Formula> {
    if spec.k == 0 || spec.d == 0 {
        return Err(Error::Infeasible("k and d must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pool = spec.n_pool.max(spec.k);
    // Per clause: its variables and current |Γ⁺|. Per variable: the clauses
    // using it.
    let mut clauses: Vec<Vec<Lit>> = Vec::with_capacity(spec.m);
    let mut gamma: Vec<usize> = Vec::with_capacity(spec.m);
    let mut occ: Vec<Vec<usize>> = vec![Vec::new(); pool];

    while clauses.len() < spec.m {
        let mut placed = false;
        for _ in 0..RETRIES {
            let vars = sample(&mut rng, pool, spec.k);
            let neighbours: BTreeSet<usize> = vars.iter().flat_map(|v| occ[v].iter().copied()).collect();
            if neighbours.len() + 1 > spec.d || neighbours.iter().any(|&c| gamma[c] + 1 > spec.d) {
                continue;
            }
            let id = clauses.len();
            let mut lits: Vec<Lit> = vars
                .iter()
                .map(|v| Lit {
                    var: Var::from_index(v),
                    negated: rng.random(),
                })
                .collect();
            lits.sort_by_key(|l| l.var);
            for &c in &neighbours {
                gamma[c] += 1;
            }
            for v in vars.iter() {
                occ[v].push(id);
            }
            gamma.push(neighbours.len() + 1);
            clauses.push(lits);
            placed = true;
            break;
        }
        if !placed {
            if pool >= spec.max_pool {
                return Err(Error::Infeasible(format!(
                    "placed {} of {} clauses within d = {} using {} variables",
                    clauses.len(),
                    spec.m,
                    spec.d,
                    pool
                )));
            }
            pool += 1;
            occ.push(Vec::new());
        }
    }
    Formula::new(pool, clauses)
}

/// A satisfying assignment found by trying all `2^n` assignments in order,
/// or `None`.
pub fn brute_force_sat(formula: &Formula) -> Result<Option<TruthAssignment>> {
    brute_force_sat_limited(formula, BRUTE_FORCE_LIMIT)
}

pub fn brute_force_sat_limited(formula: &Formula, limit: usize) -> Result<Option<TruthAssignment>> {
    let n = formula.num_vars();
    if n > limit || n >= 64 {
        return Err(Error::TooManyVariables { n, limit });
    }
    // Each clause as (mask of its variables, bits that satisfy positively).
    let clauses: Vec<(u64, u64)> = formula
        .clauses()
        .iter()
        .map(|c| {
            c.lits().iter().fold((0u64, 0u64), |(mask, pos), l| {
                let bit = 1u64 << l.var.index();
                (mask | bit, if l.negated { pos } else { pos | bit })
            })
        })
        .collect();
    for bits in 0u64..(1u64 << n) {
        // A clause is violated iff every variable takes its falsifying value.
        if clauses.iter().all(|&(mask, pos)| (bits ^ pos) & mask != mask) {
            return Ok(Some(TruthAssignment::from_bits(
                (0..n).map(|i| bits >> i & 1 == 1).collect(),
            )));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trials: u64,
    pub successes: u64,
    pub frequency: f64,
    /// `2^(-k|V(W)|)`.
    pub expected: f64,
    pub z_score: f64,
}

impl TrialReport {
    pub fn new(trials: u64, successes: u64, expected: f64) -> Self {
        let frequency = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        let n = trials as f64;
        let sd = (n * expected * (1.0 - expected)).sqrt();
        let z_score = if sd > 0.0 {
            (successes as f64 - n * expected) / sd
        } else {
            0.0
        };
        TrialReport {
            trials,
            successes,
            frequency,
            expected,
            z_score,
        }
    }

    /// Two-sided exact binomial p-value of the observed count, for `p` too
    /// small for the normal approximation.
    pub fn exact_p_value(&self) -> f64 {
        use statrs::distribution::{Binomial, DiscreteCDF};
        let Ok(b) = Binomial::new(self.expected, self.trials) else {
            return f64::NAN;
        };
        let lower = b.cdf(self.successes);
        let upper = if self.successes == 0 { 1.0 } else { b.sf(self.successes - 1) };
        (2.0 * lower.min(upper)).min(1.0)
    }

    pub fn within_sigmas(&self, sigmas: f64) -> bool {
        self.z_score.abs() < sigmas
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Seed of trial `t`'s table.
fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.random()
}

/// Counts how many of `trials` fresh uniform tables are consistent with
/// `witness`, split over `jobs` threads. Trial `t` always uses the same
/// table, so the result does not depend on `jobs`.
pub fn monte_carlo_consistency(
    formula: &Formula,
    witness: &CompositeWitness,
    trials: u64,
    seed: u64,
    jobs: usize,
) -> Result<TrialReport> {
    let entries = witness.consistency_entries(formula);
    let expected = (-(entries.len() as f64)).exp2();
    let jobs = jobs.clamp(1, trials.max(1) as usize) as u64;
    let chunk = trials.div_ceil(jobs);
    let successes = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let entries = &entries;
                s.spawn(move || -> Result<u64> {
                    use crate::assignment::Table;
                    let mut hits = 0;
                    for t in j * chunk..((j + 1) * chunk).min(trials) {
                        let mut table = RandomTable::new(trial_seed(seed, t));
                        let mut consistent = true;
                        for &(lit, row) in entries {
                            if table.lookup(lit, row)? {
                                consistent = false;
                                break;
                            }
                        }
                        hits += consistent as u64;
                    }
                    Ok(hits)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial thread panicked"))
            .sum::<Result<u64>>()
    })?;
    Ok(TrialReport::new(trials, successes, expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{write_dimacs, ClauseId};
    use crate::witness::RecursionTree;

    #[test]
    fn generated_instances_keep_the_bound() {
        let f = gen_instance(&GenSpec::new(7, 100, 4, 400, 1)).unwrap();
        assert_eq!(f.num_clauses(), 100);
        assert_eq!(f.uniform_width(), Some(7));
        assert!(f.check_bound(Some(4)).unwrap().pass);
        assert!(f.check_bound(None).unwrap().pass);
    }

    #[test]
    fn d_one_gives_disjoint_clauses() {
        let f = gen_instance(&GenSpec::new(3, 10, 1, 30, 5)).unwrap();
        let mut seen = BTreeSet::new();
        for c in f.clauses() {
            for v in c.vars() {
                assert!(seen.insert(v));
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = GenSpec::new(5, 20, 3, 40, 9);
        let a = write_dimacs(&gen_instance(&spec).unwrap());
        let b = write_dimacs(&gen_instance(&spec).unwrap());
        assert_eq!(a, b);
        let c = write_dimacs(&gen_instance(&GenSpec { seed: 10, ..spec }).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn pool_grows_then_gives_up() {
        // d = 1 needs m·k variables; starting from 3 the pool has to grow.
        let spec = GenSpec {
            max_pool: 100,
            ..GenSpec::new(3, 10, 1, 3, 2)
        };
        assert_eq!(gen_instance(&spec).unwrap().num_vars(), 30);
        let tight = GenSpec { max_pool: 20, ..spec };
        assert!(matches!(gen_instance(&tight), Err(Error::Infeasible(_))));
        assert!(gen_instance(&GenSpec { d: 0, ..spec }).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let contra = Formula::from_dimacs_clauses(1, &[&[1], &[-1]]).unwrap();
        assert_eq!(brute_force_sat(&contra).unwrap(), None);
        let f = Formula::from_dimacs_clauses(2, &[&[1, 2]]).unwrap();
        let a = brute_force_sat(&f).unwrap().unwrap();
        assert!(f.is_satisfied_by(&a).unwrap());
        let big = Formula::from_dimacs_clauses(25, &[&[25]]).unwrap();
        assert!(matches!(brute_force_sat(&big), Err(Error::TooManyVariables { n: 25, .. })));
    }

    #[test]
    fn brute_force_matches_violated_clauses() {
        let f = Formula::from_dimacs_clauses(3, &[&[1, -2], &[2, 3], &[-1, -3], &[-2, 3]]).unwrap();
        let count = (0..8u32)
            .filter(|b| {
                let a = TruthAssignment::from_bits((0..3).map(|i| b >> i & 1 == 1).collect());
                f.violated_clauses(&a).unwrap().is_empty()
            })
            .count();
        assert!(count > 0);
        let a = brute_force_sat(&f).unwrap().unwrap();
        assert!(f.violated_clauses(&a).unwrap().is_empty());
    }

    #[test]
    fn single_literal_witness_is_a_fair_coin() {
        let f = Formula::from_dimacs_clauses(1, &[&[1]]).unwrap();
        let w = CompositeWitness::new(&f, vec![RecursionTree::new(ClauseId(0))]).unwrap();
        let r = monte_carlo_consistency(&f, &w, 20_000, 4, 3).unwrap();
        assert_eq!(r.expected, 0.5);
        assert!(r.within_sigmas(3.0), "{r:?}");
        assert_eq!(r, monte_carlo_consistency(&f, &w, 20_000, 4, 1).unwrap());
    }

    #[test]
    fn trial_report_z_score() {
        let r = TrialReport::new(100, 60, 0.5);
        assert!((r.z_score - 2.0).abs() < 1e-12);
        assert_eq!(r.frequency, 0.6);
        // P(X >= 60) for X ~ Bin(100, 1/2) is 0.0284439...
        assert!((r.exact_p_value() - 2.0 * 0.028443966820490392).abs() < 1e-9);
        assert_eq!(TrialReport::new(10, 5, 0.5).exact_p_value(), 1.0);
    }
}
