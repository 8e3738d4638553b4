// Estimate how often a uniform table is consistent with fixed witnesses and
// compare with 2^(-k|V(W)|).

use lll_core::cnf::{ClauseId, Formula};
use lll_core::gen::monte_carlo_consistency;
use lll_core::witness::{CompositeWitness, RecursionTree};

fn run_example() -> lll_core::Result<String> {
    let f = Formula::from_dimacs_clauses(4, &[&[1, 2], &[2, 3], &[3, 4]])?;
    let mut chain = RecursionTree::new(ClauseId(0));
    let c = chain.add_child(0, ClauseId(1));
    chain.add_child(c, ClauseId(2));
    let witnesses = [
        CompositeWitness::new(&f, vec![RecursionTree::new(ClauseId(1))])?,
        CompositeWitness::new(&f, vec![chain])?,
    ];
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut out = String::new();
    for w in &witnesses {
        let r = monte_carlo_consistency(&f, w, 200_000, 5, jobs)?;
        out += &format!(
            "|V(W)| = {}: {} / {} = {:.5}, expected {:.5}, z = {:+.2}\n",
            w.size(),
            r.successes,
            r.trials,
            r.frequency,
            r.expected,
            r.z_score
        );
    }
    Ok(out)
}

fn main() -> lll_core::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
