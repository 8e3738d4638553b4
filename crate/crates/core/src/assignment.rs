//! Tables of assignments, indirect assignments and induced truth assignments.
//!
//! A table maps `(variable, row)` to a bit. The solver never draws a fresh
//! random value; it advances a variable's row pointer instead, so the table
//! is the single source of randomness for a run.

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnf::{Lit, Var};
use crate::error::{Error, Result};

/// A total truth assignment over variables `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TruthAssignment(Vec<bool>);

impl TruthAssignment {
    pub fn all(n: usize, value: bool) -> Self {
        TruthAssignment(vec![value; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        TruthAssignment(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn value(&self, var: Var) -> bool {
        self.0[var.index()]
    }

    #[inline]
    pub fn set(&mut self, var: Var, value: bool) {
        self.0[var.index()] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Signed DIMACS literals, one per variable.
    pub fn to_dimacs_lits(&self) -> Vec<i64> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &b)| if b { i as i64 + 1 } else { -(i as i64 + 1) })
            .collect()
    }
}

/// Row pointer per variable. Also used for offset assignments, which have
/// the same shape.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndirectAssignment(Vec<u64>);

pub type OffsetAssignment = IndirectAssignment;

impl IndirectAssignment {
    pub fn zeros(n: usize) -> Self {
        IndirectAssignment(vec![0; n])
    }

    pub fn from_rows(rows: Vec<u64>) -> Self {
        IndirectAssignment(rows)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, var: Var) -> u64 {
        self.0[var.index()]
    }

    pub fn rows(&self) -> &[u64] {
        &self.0
    }

    /// Advances the row of every variable in `vars` by one.
    pub fn bump<I: IntoIterator<Item = Var>>(&mut self, vars: I) {
        for v in vars {
            self.0[v.index()] += 1;
        }
    }

    /// Pointwise sum.
    pub fn add_assign(&mut self, other: &IndirectAssignment) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn max(&self) -> u64 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

/// Read access to a table of assignments.
pub trait Table {
    /// `A(x, row)`.
    fn entry(&mut self, var: Var, row: u64) -> Result<bool>;

    /// `A(L, row)`, with `A(¬x, i) = 1 - A(x, i)`.
    fn lookup(&mut self, lit: Lit, row: u64) -> Result<bool> {
        Ok(lit.eval(self.entry(lit.var, row)?))
    }
}

/// Conceptually infinite table of uniform bits.
///
/// Entry `(x, i)` is word `i` of ChaCha8 stream `x` under `seed`, so any
/// entry can be produced without generating the ones before it.
#[derive(Debug, Clone)]
pub struct RandomTable {
    seed: u64,
    base: ChaCha8Rng,
    memo: HashMap<(Var, u64), bool>,
    max_row: HashMap<Var, u64>,
}

impl RandomTable {
    pub fn new(seed: u64) -> Self {
        RandomTable {
            seed,
            base: ChaCha8Rng::seed_from_u64(seed),
            memo: HashMap::new(),
            max_row: HashMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Highest row read so far for `var`.
    pub fn max_row_read(&self, var: Var) -> Option<u64> {
        self.max_row.get(&var).copied()
    }

    /// Number of distinct entries read so far.
    pub fn entries_read(&self) -> usize {
        self.memo.len()
    }

    fn generate(&self, var: Var, row: u64) -> bool {
        let mut rng = self.base.clone();
        rng.set_stream(var.0 as u64);
        rng.set_word_pos(row as u128);
        rng.next_u32() & 1 == 1
    }

    /// Copies rows `0..rows` into a fixed table.
    pub fn materialize(&mut self, vars: usize, rows: u64) -> FixedTable {
        FixedTable::from_fn(vars, rows, |v, r| self.entry(v, r).expect("random tables are total"))
    }
}

impl Table for RandomTable {
    fn entry(&mut self, var: Var, row: u64) -> Result<bool> {
        if let Some(&b) = self.memo.get(&(var, row)) {
            return Ok(b);
        }
        let b = self.generate(var, row);
        self.memo.insert((var, row), b);
        let m = self.max_row.entry(var).or_insert(row);
        *m = (*m).max(row);
        Ok(b)
    }
}

/// Explicit table with rows `0..rows`. Reading past the last row is an
/// error rather than a wrap-around.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FixedTableRepr", into = "FixedTableRepr")]
pub struct FixedTable {
    vars: usize,
    rows: u64,
    /// Row-major.
    bits: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct FixedTableRepr {
    rows: u64,
    vars: usize,
    bits: Vec<Vec<u8>>,
}

impl TryFrom<FixedTableRepr> for FixedTable {
    type Error = String;

    fn try_from(r: FixedTableRepr) -> std::result::Result<Self, String> {
        if r.bits.len() as u64 != r.rows {
            return Err(format!("expected {} rows, found {}", r.rows, r.bits.len()));
        }
        let mut bits = Vec::with_capacity(r.vars * r.bits.len());
        for (i, row) in r.bits.iter().enumerate() {
            if row.len() != r.vars {
                return Err(format!("row {i} has {} entries, expected {}", row.len(), r.vars));
            }
            for &b in row {
                match b {
                    0 => bits.push(false),
                    1 => bits.push(true),
                    _ => return Err(format!("row {i} contains non-bit value {b}")),
                }
            }
        }
        Ok(FixedTable {
            vars: r.vars,
            rows: r.rows,
            bits,
        })
    }
}

impl From<FixedTable> for FixedTableRepr {
    fn from(t: FixedTable) -> Self {
        let bits = if t.vars == 0 {
            vec![Vec::new(); t.rows as usize]
        } else {
            t.bits
                .chunks(t.vars)
                .map(|row| row.iter().map(|&b| b as u8).collect())
                .collect()
        };
        FixedTableRepr {
            rows: t.rows,
            vars: t.vars,
            bits,
        }
    }
}

impl FixedTable {
    pub fn zeros(vars: usize, rows: u64) -> Self {
        FixedTable {
            vars,
            rows,
            bits: vec![false; vars * rows as usize],
        }
    }

    pub fn from_fn(vars: usize, rows: u64, mut f: impl FnMut(Var, u64) -> bool) -> Self {
        let mut bits = Vec::with_capacity(vars * rows as usize);
        for r in 0..rows {
            for v in 0..vars {
                bits.push(f(Var::from_index(v), r));
            }
        }
        FixedTable { vars, rows, bits }
    }

    /// Table from `rows[i][j]` = `A(x_{j+1}, i)`.
    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let vars = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == vars), "ragged table");
        FixedTable::from_fn(vars, rows.len() as u64, |v, r| rows[r as usize][v.index()] != 0)
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn set(&mut self, var: Var, row: u64, value: bool) {
        let i = self.offset(var, row).expect("cell in range");
        self.bits[i] = value;
    }

    pub fn get(&self, var: Var, row: u64) -> Result<bool> {
        Ok(self.bits[self.offset(var, row)?])
    }

    fn offset(&self, var: Var, row: u64) -> Result<usize> {
        if row >= self.rows || var.0 == 0 || var.index() >= self.vars {
            return Err(Error::RowOverflow {
                var,
                row,
                rows: self.rows,
            });
        }
        Ok(row as usize * self.vars + var.index())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Table for FixedTable {
    fn entry(&mut self, var: Var, row: u64) -> Result<bool> {
        self.get(var, row)
    }
}

/// Either kind of table, as handed to the solver.
#[derive(Debug, Clone)]
pub enum AssignmentTable {
    Random(RandomTable),
    Fixed(FixedTable),
}

impl Table for AssignmentTable {
    fn entry(&mut self, var: Var, row: u64) -> Result<bool> {
        match self {
            AssignmentTable::Random(t) => t.entry(var, row),
            AssignmentTable::Fixed(t) => t.entry(var, row),
        }
    }
}

/// `⋆α`: the truth assignment read from `table` at each variable's row.
pub fn induced<T: Table + ?Sized>(table: &mut T, ia: &IndirectAssignment) -> Result<TruthAssignment> {
    let bits = (0..ia.len())
        .map(|i| {
            let v = Var::from_index(i);
            table.entry(v, ia.get(v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TruthAssignment(bits))
}
