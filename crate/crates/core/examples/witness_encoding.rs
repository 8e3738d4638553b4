// Enumerate the small composite witnesses of a formula, encode each as a
// coloured subtree of the 2d-ary tree and decode it back.

use std::collections::HashSet;

use lll_core::cnf::Formula;
use lll_core::encoding::{decode, encode, enumerate_witnesses, EnumerationLimits};

fn run_example() -> lll_core::Result<String> {
    let f = Formula::from_dimacs_clauses(5, &[&[1, 2, 3], &[3, 4], &[4, 5, 1]])?;
    let d = f.max_inclusive_neighbourhood();
    let mut seen = HashSet::new();
    let mut out = String::new();
    let count = enumerate_witnesses(&f, 1..=3, d, EnumerationLimits::default(), |w| {
        let e = encode(&w, &f, d)?;
        assert_eq!(decode(&e, &f, d)?, w);
        assert!(seen.insert(e.clone()));
        if w.trees().len() > 1 && out.lines().count() < 4 {
            out += &format!("{}\n  -> {}\n", w.to_json(), e.to_json());
        }
        Ok(())
    })?;
    out += &format!("{count} witnesses of size <= 3, all encodings distinct\n");
    Ok(out)
}

fn main() -> lll_core::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
