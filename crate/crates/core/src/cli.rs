//! The `lll` command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 failed precondition or
//! check, 3 internal contract violation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use crate::assignment::{FixedTable, TruthAssignment};
use crate::cnf::{parse_dimacs, write_dimacs, Formula, Lit, ParseOptions};
use crate::derand::derand_solve;
use crate::encoding::{count_subtrees, encode, enumerate_witnesses, EnumerationLimits};
use crate::error::{Error, Result};
use crate::gen::{gen_instance, monte_carlo_consistency, GenSpec};
use crate::solver::{solve, BudgetScope, SolverConfig, TableSource};
use crate::witness::CompositeWitness;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lll", version, about = "Local-lemma k-SAT solving by local correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// DIMACS CNF file.
    formula: PathBuf,
    /// Reject formulas whose clauses differ in width.
    #[arg(long)]
    strict_k: bool,
}

impl InputArgs {
    fn load(&self) -> Result<Formula> {
        let text = fs::read_to_string(&self.formula)?;
        parse_dimacs(&text, ParseOptions { strict_k: self.strict_k })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Randomized solve.
    Solve {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Read the assignment table from this JSON file instead of drawing one.
        #[arg(long, conflicts_with = "seed")]
        table: Option<PathBuf>,
        /// Invocation budget per correction (default ceil(log2 m) + 2).
        #[arg(long)]
        threshold: Option<usize>,
        #[arg(long)]
        max_restarts: Option<usize>,
        /// Share one invocation budget across all corrections of an epoch
        /// (no running-time guarantee).
        #[arg(long)]
        per_epoch_budget: bool,
        /// Write run statistics as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Deterministic solve through a meta-formula over table entries.
    SolveDet {
        #[command(flatten)]
        input: InputArgs,
        /// Neighbourhood bound (default 2^(k-5)).
        #[arg(long)]
        d: Option<usize>,
        /// Write the constructed table as JSON here.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Refuse once this many witnesses (or cached recursion trees) are built.
        #[arg(long, default_value_t = 500_000)]
        max_witnesses: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a bounded-neighbourhood instance.
    Gen {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n_pool: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Largest pool size before giving up (default max(4·n_pool, m·k)).
        #[arg(long)]
        max_pool: Option<usize>,
        /// Output file instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check |Γ⁺(C)| ≤ d for every clause.
    CheckBound {
        #[command(flatten)]
        input: InputArgs,
        /// Required clause width; also sets the default d = 2^(k-5).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check an assignment ("v" lines or bare literals) against a formula.
    Verify {
        #[command(flatten)]
        input: InputArgs,
        assignment: PathBuf,
    },
    /// Stream every composite witness with size in a range, one JSON per line.
    EnumWitnesses {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 1)]
        min_size: usize,
        #[arg(long)]
        max_size: usize,
        /// Slot bound for encodings (default max |Γ⁺|).
        #[arg(long)]
        d: Option<usize>,
        /// Print each witness next to its encoding.
        #[arg(long)]
        encode: bool,
        #[arg(long, default_value_t = 1_000_000)]
        max_witnesses: u64,
    },
    /// Estimate how often random tables are consistent with a witness.
    McConsistency {
        #[command(flatten)]
        input: InputArgs,
        /// Witness JSON file.
        #[arg(long)]
        witness: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Count rooted subtrees of the infinite branching-ary tree.
    CountSubtrees {
        #[arg(long)]
        branching: usize,
        #[arg(long)]
        size: usize,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::InvalidClause { .. }
        | Error::WidthMismatch { .. }
        | Error::UnknownClause(_)
        | Error::PartialAssignment { .. }
        | Error::TableShape { .. }
        | Error::InvalidTree(_)
        | Error::InvalidWitness(_)
        | Error::Undecodable(_)
        | Error::Json(_)
        | Error::Io(_) => EXIT_USAGE,
        Error::BoundUndefined { .. }
        | Error::SlotBound { .. }
        | Error::BudgetExceeded { .. }
        | Error::ExpectationTooLarge(_)
        | Error::Infeasible(_)
        | Error::TooManyVariables { .. }
        | Error::RestartLimit(_) => EXIT_INFEASIBLE,
        Error::RowOverflow { .. }
        | Error::ClauseNotViolated(_)
        | Error::FixedTableAbort { .. }
        | Error::NotOccurring { .. }
        | Error::NoAbort => EXIT_INTERNAL,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn write_json(path: &Option<PathBuf>, json: &str) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, format!("{json}\n"))?;
    }
    Ok(())
}

fn seed_or_entropy(seed: Option<u64>, out: &mut dyn Write) -> Result<u64> {
    Ok(match seed {
        Some(s) => s,
        None => {
            let s = rand::rng().random();
            writeln!(out, "c seed {s}")?;
            s
        }
    })
}

fn print_solution(out: &mut dyn Write, a: &TruthAssignment) -> Result<()> {
    writeln!(out, "s SATISFIABLE")?;
    let lits: Vec<String> = a.to_dimacs_lits().iter().map(i64::to_string).collect();
    if lits.is_empty() {
        writeln!(out, "v 0")?;
    } else {
        writeln!(out, "v {} 0", lits.join(" "))?;
    }
    Ok(())
}

/// Reads an assignment from `v` lines (or bare literal lines); `c` and `s`
/// lines are skipped. Every variable must be given exactly once.
pub fn parse_solution(text: &str, num_vars: usize) -> Result<TruthAssignment> {
    let mut values: Vec<Option<bool>> = vec![None; num_vars];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        let body = match line.split_once(char::is_whitespace) {
            _ if line.is_empty() || line.starts_with('c') || line.starts_with('s') => continue,
            Some(("v", rest)) => rest,
            _ if line == "v" => continue,
            _ => line,
        };
        for tok in body.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad literal {tok:?}"),
            })?;
            if lit == 0 {
                continue;
            }
            let l = Lit::from_dimacs(lit);
            let slot = values.get_mut(l.var.index()).ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("variable {} out of range", l.var.0),
            })?;
            if slot.replace(!l.negated).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("variable {} assigned twice", l.var.0),
                });
            }
        }
    }
    let got = values.iter().filter(|v| v.is_some()).count();
    if got != num_vars {
        return Err(Error::PartialAssignment { got, expected: num_vars });
    }
    Ok(TruthAssignment::from_bits(values.into_iter().map(|v| v.expect("checked")).collect()))
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Solve {
            input,
            seed,
            table,
            threshold,
            max_restarts,
            per_epoch_budget,
            json,
        } => {
            let f = input.load()?;
            let source = match table {
                Some(p) => TableSource::Fixed(FixedTable::from_json(&read(&p)?)?),
                None => TableSource::Seed(seed_or_entropy(seed, out)?),
            };
            let config = SolverConfig {
                threshold,
                max_restarts,
                budget_scope: if per_epoch_budget {
                    BudgetScope::PerEpoch
                } else {
                    BudgetScope::PerCorrection
                },
                ..SolverConfig::default()
            };
            let outcome = solve(&f, source, &config)?;
            if !f.is_satisfied_by(&outcome.assignment)? {
                return Err(Error::Infeasible("solver returned a violating assignment".into()));
            }
            print_solution(out, &outcome.assignment)?;
            write_json(&json, &outcome.stats_json())?;
            Ok(EXIT_OK)
        }
        Command::SolveDet {
            input,
            d,
            table,
            max_witnesses,
            json,
        } => {
            let f = input.load()?;
            let d = match d {
                Some(d) => d,
                None => f.check_bound(None)?.d,
            };
            let limits = EnumerationLimits {
                max_witnesses: Some(max_witnesses),
            };
            let outcome = derand_solve(&f, d, limits)?;
            if !f.is_satisfied_by(&outcome.assignment)? {
                return Ok(EXIT_INTERNAL);
            }
            let r = &outcome.report;
            writeln!(
                out,
                "c threshold {} sizes {}..={} meta-clauses {} initial-expectation {}",
                r.threshold, r.sizes.0, r.sizes.1, r.meta_clauses, r.initial_expectation
            )?;
            print_solution(out, &outcome.assignment)?;
            if let Some(p) = table {
                fs::write(p, format!("{}\n", outcome.table.to_json()))?;
            }
            write_json(&json, &serde_json::to_string(&outcome.report)?)?;
            Ok(EXIT_OK)
        }
        Command::Gen {
            k,
            m,
            d,
            n_pool,
            seed,
            max_pool,
            out: path,
        } => {
            let seed = seed_or_entropy(seed, out)?;
            let mut spec = GenSpec::new(k, m, d, n_pool, seed);
            if let Some(p) = max_pool {
                spec.max_pool = p;
            }
            let text = write_dimacs(&gen_instance(&spec)?);
            match path {
                Some(p) => fs::write(p, text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(EXIT_OK)
        }
        Command::CheckBound { input, k, d, json } => {
            let f = input.load()?;
            if let Some(k) = k {
                f.require_width(k)?;
            }
            let report = f.check_bound(d)?;
            writeln!(
                out,
                "c k {} d {} clauses {} max-inclusive-neighbourhood {}",
                report.k,
                report.d,
                f.num_clauses(),
                report.max_gamma_plus
            )?;
            for v in &report.violators {
                writeln!(out, "c violator {} |Γ⁺| {}", v.0, report.gamma_plus[v.0])?;
            }
            writeln!(out, "s {}", if report.pass { "PASS" } else { "FAIL" })?;
            write_json(&json, &serde_json::to_string(&report)?)?;
            Ok(if report.pass { EXIT_OK } else { EXIT_INFEASIBLE })
        }
        Command::Verify { input, assignment } => {
            let f = input.load()?;
            let a = parse_solution(&read(&assignment)?, f.num_vars())?;
            let violated = f.violated_clauses(&a)?;
            for c in &violated {
                writeln!(out, "c violated {}", c.0)?;
            }
            if violated.is_empty() {
                writeln!(out, "s VERIFIED")?;
                Ok(EXIT_OK)
            } else {
                writeln!(out, "s FAILED")?;
                Ok(EXIT_INFEASIBLE)
            }
        }
        Command::EnumWitnesses {
            input,
            min_size,
            max_size,
            d,
            encode: with_encoding,
            max_witnesses,
        } => {
            let f = input.load()?;
            let d = d.unwrap_or_else(|| f.max_inclusive_neighbourhood().max(1));
            let limits = EnumerationLimits {
                max_witnesses: Some(max_witnesses),
            };
            enumerate_witnesses(&f, min_size..=max_size, d, limits, |w| {
                if with_encoding {
                    let e = encode(&w, &f, d)?;
                    writeln!(out, "{{\"witness\":{},\"encoding\":{}}}", w.to_json(), e.to_json())?;
                } else {
                    writeln!(out, "{}", w.to_json())?;
                }
                Ok(())
            })?;
            Ok(EXIT_OK)
        }
        Command::McConsistency {
            input,
            witness,
            trials,
            seed,
            jobs,
            json,
        } => {
            let f = input.load()?;
            let w = CompositeWitness::from_json(&f, &read(&witness)?)?;
            let seed = seed_or_entropy(seed, out)?;
            let report = monte_carlo_consistency(&f, &w, trials, seed, jobs)?;
            writeln!(out, "{}", report.to_json())?;
            write_json(&json, &report.to_json())?;
            Ok(EXIT_OK)
        }
        Command::CountSubtrees { branching, size } => {
            let c = count_subtrees(branching, size)?;
            let mut v = serde_json::to_value(&c)?;
            v["within_knuth_bound"] = c.within_knuth_bound().into();
            writeln!(out, "{v}")?;
            Ok(EXIT_OK)
        }
    }
}
