// Deterministic solve: exclude every critical witness with a clause over
// the table entries, satisfy those clauses by conditional expectations and
// run the solver on the table that results.

use lll_core::cnf::Formula;
use lll_core::encoding::EnumerationLimits;
use lll_core::derand::derand_solve;

fn run_example() -> lll_core::Result<String> {
    let f = Formula::from_dimacs_clauses(5, &[&[1, -2, 3], &[-3, 4, 5]])?;
    let out = derand_solve(&f, 2, EnumerationLimits::default())?;
    assert!(f.is_satisfied_by(&out.assignment)?);
    Ok(format!(
        "{}\nassignment {:?}\ntable rows {}\n",
        serde_json::to_string_pretty(&out.report)?,
        out.assignment.to_dimacs_lits(),
        out.table.rows()
    ))
}

fn main() -> lll_core::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
