// Exact rooted-subtree counts of the infinite D-ary tree against (eD)^u,
// and enumerated witness counts against m·2^(u(k-1)).

use lll_core::cnf::Formula;
use lll_core::encoding::{collect_witnesses, count_subtrees, witness_count_bound, EnumerationLimits};

fn run_example() -> lll_core::Result<String> {
    let mut out = String::new();
    for branching in [2, 4, 8] {
        for size in [1, 3, 6] {
            let c = count_subtrees(branching, size)?;
            out += &format!(
                "D = {branching} u = {size}: {} <= {:.1} ({})\n",
                c.exact,
                c.knuth_bound,
                c.within_knuth_bound()
            );
        }
    }
    let f = Formula::from_dimacs_clauses(6, &[&[1, 2, 3], &[3, 4, 5], &[5, 6, 1]])?;
    for u in 1..=4 {
        let n = collect_witnesses(&f, u..=u, 3, EnumerationLimits::default())?.len();
        out += &format!("u = {u}: {n} witnesses, bound {}\n", witness_count_bound(3, 3, u..=u));
    }
    Ok(out)
}

fn main() -> lll_core::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
