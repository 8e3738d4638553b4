//! k-CNF formulas, DIMACS I/O and dependency-graph queries.
//!
//! The order in which clauses are read or constructed is the global clause
//! order used by every algorithm in the crate: `ClauseId(i) < ClauseId(j)`
//! means clause `i` comes first.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;

use serde::Serialize;

use crate::assignment::TruthAssignment;
use crate::error::{Error, Result};

/// A propositional variable, numbered from 1 as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Var(pub u32);

impl Var {
    /// Zero-based position, for indexing per-variable vectors.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    #[inline]
    pub fn from_index(idx: usize) -> Self {
        Var(idx as u32 + 1)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub var: Var,
    pub negated: bool,
}

impl Lit {
    pub fn pos(var: u32) -> Self {
        Lit {
            var: Var(var),
            negated: false,
        }
    }

    pub fn neg(var: u32) -> Self {
        Lit {
            var: Var(var),
            negated: true,
        }
    }

    /// Literal from a signed DIMACS integer. Panics on 0.
    pub fn from_dimacs(v: i64) -> Self {
        assert!(v != 0, "0 is not a literal");
        Lit {
            var: Var(v.unsigned_abs() as u32),
            negated: v < 0,
        }
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -(self.var.0 as i64)
        } else {
            self.var.0 as i64
        }
    }

    /// Truth value of the literal when its variable has value `value`.
    #[inline]
    pub fn eval(self, value: bool) -> bool {
        value != self.negated
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "¬{}", self.var)
        } else {
            write!(f, "{}", self.var)
        }
    }
}

/// Position of a clause in the global clause order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClauseId(pub usize);

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    lits: Vec<Lit>,
    index: ClauseId,
}

impl Clause {
    pub fn id(&self) -> ClauseId {
        self.index
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn width(&self) -> usize {
        self.lits.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.lits.iter().map(|l| l.var)
    }

    pub fn contains_var(&self, var: Var) -> bool {
        self.lits.iter().any(|l| l.var == var)
    }

    pub fn is_satisfied_by(&self, a: &TruthAssignment) -> bool {
        self.lits.iter().any(|l| l.eval(a.value(l.var)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Reject formulas whose clauses do not all share the same width.
    pub strict_k: bool,
}

#[derive(Debug, Clone)]
pub struct Formula {
    num_vars: usize,
    clauses: Vec<Clause>,
    width: usize,
    /// Clauses containing each variable, in clause order.
    occurrences: Vec<Vec<ClauseId>>,
    /// Inclusive neighbourhood of each clause, in clause order.
    inclusive: Vec<Vec<ClauseId>>,
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars == other.num_vars && self.clauses == other.clauses
    }
}

impl Eq for Formula {}

impl Formula {
    /// Builds a formula over variables `1..=num_vars`; clause order is the
    /// order of `clauses`.
    pub fn new(num_vars: usize, clauses: Vec<Vec<Lit>>) -> Result<Self> {
        let mut occurrences = vec![Vec::new(); num_vars];
        let mut built = Vec::with_capacity(clauses.len());
        let mut width = 0;
        for (i, lits) in clauses.into_iter().enumerate() {
            if lits.is_empty() {
                return Err(Error::InvalidClause {
                    clause: i,
                    msg: "empty clause".into(),
                });
            }
            let mut seen = BTreeSet::new();
            for l in &lits {
                if l.var.0 == 0 || l.var.index() >= num_vars {
                    return Err(Error::InvalidClause {
                        clause: i,
                        msg: format!("variable {} outside 1..={num_vars}", l.var.0),
                    });
                }
                if !seen.insert(l.var) {
                    return Err(Error::InvalidClause {
                        clause: i,
                        msg: format!("repeated variable {} in clause", l.var.0),
                    });
                }
                occurrences[l.var.index()].push(ClauseId(i));
            }
            width = width.max(lits.len());
            built.push(Clause {
                lits,
                index: ClauseId(i),
            });
        }

        let inclusive = built
            .iter()
            .map(|c| {
                let set: BTreeSet<ClauseId> = c
                    .vars()
                    .flat_map(|v| occurrences[v.index()].iter().copied())
                    .collect();
                set.into_iter().collect()
            })
            .collect();

        Ok(Formula {
            num_vars,
            clauses: built,
            width,
            occurrences,
            inclusive,
        })
    }

    /// Convenience constructor from signed DIMACS-style integers.
    pub fn from_dimacs_clauses(num_vars: usize, clauses: &[&[i64]]) -> Result<Self> {
        Self::new(
            num_vars,
            clauses
                .iter()
                .map(|c| c.iter().map(|&v| Lit::from_dimacs(v)).collect())
                .collect(),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Maximum clause width (the `k` of a k-CNF formula).
    pub fn width(&self) -> usize {
        self.width
    }

    /// `Some(k)` if every clause has width exactly `k`.
    pub fn uniform_width(&self) -> Option<usize> {
        let k = self.clauses.first()?.width();
        self.clauses.iter().all(|c| c.width() == k).then_some(k)
    }

    /// Errors unless every clause has width exactly `k`.
    pub fn require_width(&self, k: usize) -> Result<()> {
        match self.clauses.iter().find(|c| c.width() != k) {
            Some(c) => Err(Error::WidthMismatch {
                clause: c.id().0,
                width: c.width(),
                expected: k,
            }),
            None => Ok(()),
        }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, id: ClauseId) -> &Clause {
        &self.clauses[id.0]
    }

    pub fn get(&self, id: ClauseId) -> Result<&Clause> {
        self.clauses.get(id.0).ok_or(Error::UnknownClause(id.0))
    }

    pub fn clause_ids(&self) -> impl Iterator<Item = ClauseId> {
        (0..self.clauses.len()).map(ClauseId)
    }

    /// Clauses containing `var`, in clause order.
    pub fn occurrences(&self, var: Var) -> &[ClauseId] {
        &self.occurrences[var.index()]
    }

    /// Γ⁺(C): every clause sharing a variable with `id`, including `id`
    /// itself, in clause order. Panics on an unknown id.
    pub fn inclusive_neighbourhood(&self, id: ClauseId) -> &[ClauseId] {
        &self.inclusive[id.0]
    }

    /// Γ(C): the clauses other than `id` that share a variable with it.
    pub fn neighbourhood(&self, id: ClauseId) -> Result<Vec<ClauseId>> {
        self.get(id)?;
        Ok(self.inclusive[id.0]
            .iter()
            .copied()
            .filter(|&d| d != id)
            .collect())
    }

    /// Position of `target` within Γ⁺(`of`), if it is a member.
    pub fn neighbour_rank(&self, of: ClauseId, target: ClauseId) -> Option<usize> {
        self.inclusive[of.0].binary_search(&target).ok()
    }

    pub fn max_inclusive_neighbourhood(&self) -> usize {
        self.inclusive.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Checks `|Γ⁺(C)| <= d` for every clause of a uniform-width formula.
    /// Without an explicit `d` the bound is `2^(k-5)`, which needs `k >= 5`.
    pub fn check_bound(&self, d: Option<usize>) -> Result<NeighbourhoodReport> {
        let k = self.width();
        if self.uniform_width().is_none() && !self.clauses.is_empty() {
            self.require_width(self.clauses[0].width())?;
        }
        let d = match d {
            Some(d) => d,
            None if k >= 5 => 1usize << (k - 5),
            None => return Err(Error::BoundUndefined { k }),
        };
        let gamma_plus: Vec<usize> = self.inclusive.iter().map(Vec::len).collect();
        let gamma = gamma_plus.iter().map(|g| g - 1).collect();
        let violators: Vec<ClauseId> = gamma_plus
            .iter()
            .enumerate()
            .filter(|(_, &g)| g > d)
            .map(|(i, _)| ClauseId(i))
            .collect();
        Ok(NeighbourhoodReport {
            k,
            d,
            max_gamma_plus: gamma_plus.iter().copied().max().unwrap_or(0),
            pass: violators.is_empty(),
            gamma,
            gamma_plus,
            violators,
        })
    }

    /// vlt(F, a): the violated clauses in clause order.
    pub fn violated_clauses(&self, a: &TruthAssignment) -> Result<Vec<ClauseId>> {
        self.check_assignment(a)?;
        Ok(self
            .clauses
            .iter()
            .filter(|c| !c.is_satisfied_by(a))
            .map(Clause::id)
            .collect())
    }

    pub fn is_satisfied_by(&self, a: &TruthAssignment) -> Result<bool> {
        self.check_assignment(a)?;
        Ok(self.clauses.iter().all(|c| c.is_satisfied_by(a)))
    }

    /// F_(U): the clauses touching at least one variable of `vars`.
    pub fn affected_subformula<I>(&self, vars: I) -> Vec<ClauseId>
    where
        I: IntoIterator<Item = Var>,
    {
        let set: BTreeSet<ClauseId> = vars
            .into_iter()
            .filter(|v| v.0 >= 1 && v.index() < self.num_vars)
            .flat_map(|v| self.occurrences[v.index()].iter().copied())
            .collect();
        set.into_iter().collect()
    }

    fn check_assignment(&self, a: &TruthAssignment) -> Result<()> {
        if a.len() != self.num_vars {
            return Err(Error::PartialAssignment {
                got: a.len(),
                expected: self.num_vars,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NeighbourhoodReport {
    pub k: usize,
    pub d: usize,
    /// |Γ(C)| per clause.
    pub gamma: Vec<usize>,
    /// |Γ⁺(C)| per clause.
    pub gamma_plus: Vec<usize>,
    pub max_gamma_plus: usize,
    pub violators: Vec<ClauseId>,
    pub pass: bool,
}

/// Parses DIMACS CNF. Clause order in the file becomes the clause order.
pub fn parse_dimacs(text: &str, opts: ParseOptions) -> Result<Formula> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses: Vec<Vec<Lit>> = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    let mut current_line = 0;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(parse_err(lineno, "duplicate header"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(parse_err(lineno, "expected `p cnf <vars> <clauses>`"));
            }
            let n = parts[2]
                .parse()
                .map_err(|_| parse_err(lineno, "bad variable count"))?;
            let m = parts[3]
                .parse()
                .map_err(|_| parse_err(lineno, "bad clause count"))?;
            header = Some((n, m, lineno));
            continue;
        }
        let Some((n, _, _)) = header else {
            return Err(parse_err(lineno, "clause before `p cnf` header"));
        };
        for tok in line.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, &format!("bad literal `{tok}`")))?;
            if v == 0 {
                finish_clause(&mut clauses, &mut current, lineno)?;
                continue;
            }
            if v.unsigned_abs() as usize > n {
                return Err(parse_err(
                    lineno,
                    &format!("variable {} exceeds declared count {n}", v.unsigned_abs()),
                ));
            }
            if current.is_empty() {
                current_line = lineno;
            }
            let lit = Lit::from_dimacs(v);
            if current.iter().any(|l| l.var == lit.var) {
                return Err(parse_err(
                    lineno,
                    &format!("repeated variable {} in clause", lit.var.0),
                ));
            }
            current.push(lit);
        }
    }

    let Some((n, m, hline)) = header else {
        return Err(parse_err(0, "missing `p cnf` header"));
    };
    if !current.is_empty() {
        return Err(parse_err(current_line, "clause not terminated by 0"));
    }
    if clauses.len() != m {
        return Err(parse_err(
            hline,
            &format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    let formula = Formula::new(n, clauses)?;
    if opts.strict_k {
        if let Some(first) = formula.clauses.first() {
            formula.require_width(first.width())?;
        }
    }
    Ok(formula)
}

/// Reads DIMACS from any byte source.
pub fn read_dimacs<R: Read>(mut reader: R, opts: ParseOptions) -> Result<Formula> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_dimacs(&text, opts)
}

fn finish_clause(
    clauses: &mut Vec<Vec<Lit>>,
    current: &mut Vec<Lit>,
    lineno: usize,
) -> Result<()> {
    if current.is_empty() {
        return Err(parse_err(lineno, "empty clause"));
    }
    clauses.push(std::mem::take(current));
    Ok(())
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}

/// Serializes `formula` as DIMACS CNF, one clause per line.
pub fn write_dimacs(formula: &Formula) -> String {
    let mut out = format!("p cnf {} {}\n", formula.num_vars, formula.clauses.len());
    for c in &formula.clauses {
        for l in &c.lits {
            out.push_str(&l.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}
