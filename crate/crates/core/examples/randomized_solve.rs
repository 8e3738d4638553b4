// Solve a generated 7-CNF with the randomized local-correction solver.

use lll_core::gen::{gen_instance, GenSpec};
use lll_core::solver::{solve, SolverConfig, TableSource};

fn run_example() -> lll_core::Result<String> {
    let f = gen_instance(&GenSpec::new(7, 200, 4, 800, 42))?;
    let out = solve(&f, TableSource::Seed(7), &SolverConfig::default())?;
    assert!(f.is_satisfied_by(&out.assignment)?);
    Ok(format!(
        "m = {}, n = {}, threshold = {}\n{}\n",
        f.num_clauses(),
        f.num_vars(),
        SolverConfig::default().threshold_for(&f),
        out.stats_json()
    ))
}

fn main() -> lll_core::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
