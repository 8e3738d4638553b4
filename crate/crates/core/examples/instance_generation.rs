// Generate bounded-neighbourhood instances and confirm small ones with the
// exhaustive oracle.

use lll_core::gen::{brute_force_sat, gen_instance, GenSpec};

fn run_example() -> lll_core::Result<String> {
    let mut out = String::new();
    let big = gen_instance(&GenSpec::new(7, 100, 4, 400, 1))?;
    let report = big.check_bound(None)?;
    out += &format!(
        "k=7 m={} n={} max |Γ⁺| = {} (d = {}) pass = {}\n",
        big.num_clauses(),
        big.num_vars(),
        report.max_gamma_plus,
        report.d,
        report.pass
    );

    for seed in 0..5 {
        let spec = GenSpec {
            max_pool: 20,
            ..GenSpec::new(6, 3, 2, 8, seed)
        };
        let f = gen_instance(&spec)?;
        let sat = brute_force_sat(&f)?.is_some();
        out += &format!("seed {seed}: n = {:>2}, satisfiable = {sat}\n", f.num_vars());
    }
    Ok(out)
}

fn main() -> lll_core::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
