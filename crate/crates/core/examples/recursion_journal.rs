// Replay a run on a fixed table and print each correction's recursion tree
// in natural order, with the indirect assignment it started from.

use lll_core::assignment::FixedTable;
use lll_core::cnf::Formula;
use lll_core::solver::{solve, SolverConfig, TableSource};
use lll_core::witness::trees_to_json;

fn run_example() -> lll_core::Result<String> {
    // C0 = {x1,x2}, C1 = {¬x2,x3}, C2 = {¬x3,x4}; rows are listed per row
    // index, one bit per variable.
    let f = Formula::from_dimacs_clauses(4, &[&[1, 2], &[-2, 3], &[-3, 4]])?;
    let table = FixedTable::from_rows(&[&[0, 0, 1, 0], &[0, 1, 1, 0], &[1, 0, 0, 0], &[0, 0, 0, 1]]);
    let config = SolverConfig {
        record_journal: true,
        ..SolverConfig::default()
    };
    let out = solve(&f, TableSource::Fixed(table), &config)?;
    let mut s = String::new();
    for entry in &out.journal {
        let labels: Vec<usize> = entry.tree.ordered_labels()?.iter().map(|c| c.0).collect();
        s += &format!("start rows {:?} -> invoked {:?}\n", entry.offset.rows(), labels);
    }
    let trees: Vec<_> = out.journal.iter().map(|e| e.tree.clone()).collect();
    s += &trees_to_json(&trees)?;
    s += &format!("\nfinal rows {:?} assignment {:?}\n", out.indirect.rows(), out.assignment.to_dimacs_lits());
    Ok(s)
}

fn main() -> lll_core::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
