// Parse a DIMACS formula, inspect its neighbourhoods and write it back.

use lll_core::cnf::{parse_dimacs, write_dimacs, ParseOptions};

const INPUT: &str = "c two overlapping clauses and one on its own
p cnf 8 3
1 -2 3 0
-3 4 5 0
6 7 8 0
";

fn run_example() -> lll_core::Result<String> {
    let f = parse_dimacs(INPUT, ParseOptions::default())?;
    let mut out = String::new();
    for c in f.clause_ids() {
        let gamma: Vec<usize> = f.inclusive_neighbourhood(c).iter().map(|id| id.0).collect();
        out += &format!("clause {} width {} inclusive neighbourhood {:?}\n", c.0, f.clause(c).width(), gamma);
    }
    let report = f.check_bound(Some(2))?;
    out += &format!("max |Γ⁺| = {}, within d = 2: {}\n", report.max_gamma_plus, report.pass);
    let text = write_dimacs(&f);
    let again = parse_dimacs(&text, ParseOptions::default())?;
    assert_eq!(again.clauses(), f.clauses());
    out += &text;
    Ok(out)
}

fn main() -> lll_core::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
