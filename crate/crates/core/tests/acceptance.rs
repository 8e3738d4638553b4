//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line in a plain `cargo test` run.

use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lll_core::assignment::FixedTable;
use lll_core::cnf::{ClauseId, Formula, Lit};
use lll_core::derand::{
    build_meta_formula, derand_solve, shrink_into_range, shrink_range, witness_clause, MetaAssignment, MetaVar,
};
use lll_core::encoding::{
    collect_witnesses, count_subtrees, decode, encode, witness_count_bound, EnumerationLimits,
};
use lll_core::gen::{brute_force_sat, gen_instance, monte_carlo_consistency, GenSpec};
use lll_core::solver::{solve, threshold, SolveOutcome, SolverConfig, TableSource};
use lll_core::witness::{CompositeWitness, RecursionTree};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

struct RandomizedRuns {
    instances: Vec<Formula>,
    /// `(instance, seed, outcome)`
    runs: Vec<(usize, u64, SolveOutcome)>,
}

fn randomized_runs() -> Result<RandomizedRuns, String> {
    let instances: Vec<Formula> = (0..100)
        .map(|i| gen_instance(&GenSpec::new(7, 100, 4, 400, 1000 + i)).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let config = SolverConfig {
        record_journal: true,
        max_restarts: Some(1000),
        ..SolverConfig::default()
    };
    let mut runs = Vec::new();
    for (i, f) in instances.iter().enumerate() {
        for seed in 0..5u64 {
            let out = solve(f, TableSource::Seed(seed * 7919 + i as u64), &config)
                .map_err(|e| format!("instance {i} seed {seed}: {e}"))?;
            runs.push((i, seed, out));
        }
    }
    Ok(RandomizedRuns { instances, runs })
}

fn criterion_1(r: &RandomizedRuns) -> Check {
    for f in &r.instances {
        ensure(f.check_bound(None).map(|b| b.pass).unwrap_or(false), || {
            "generated instance fails the bound".into()
        })?;
    }
    for (i, seed, out) in &r.runs {
        ensure(r.instances[*i].is_satisfied_by(&out.assignment).unwrap(), || {
            format!("instance {i} seed {seed}: output violates the formula")
        })?;
    }
    let restarts: Vec<usize> = r.runs.iter().map(|(_, _, o)| o.stats.restarts).collect();
    let mean = restarts.iter().sum::<usize>() as f64 / restarts.len() as f64;
    let max = *restarts.iter().max().unwrap();
    ensure(mean <= 2.0 && max <= 10, || format!("restarts mean {mean:.3} max {max}"))?;
    Ok(format!(
        "{} runs satisfied; restarts mean {mean:.3} (<= 2), max {max} (<= 10)",
        r.runs.len()
    ))
}

fn criterion_2(r: &RandomizedRuns) -> Check {
    let mut checked = 0;
    for (i, seed, out) in &r.runs {
        let f = &r.instances[*i];
        for entry in &out.journal {
            let Some(after) = &entry.after else { continue };
            let touched = f.affected_subformula(entry.tree.variables(f));
            let bad: Vec<ClauseId> = touched
                .into_iter()
                .filter(|&c| !f.clause(c).is_satisfied_by(after))
                .collect();
            ensure(bad.is_empty(), || {
                format!("instance {i} seed {seed}: {bad:?} violated after a completed correction")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} completed corrections leave their subformula satisfied"))
}

fn criterion_3(r: &RandomizedRuns) -> Check {
    let mut trees = 0;
    let mut vertices = 0;
    for (i, seed, out) in &r.runs {
        for entry in &out.journal {
            let t = &entry.tree;
            // Node ids are assigned in invocation order.
            let order = t
                .natural_ordering()
                .map_err(|e| format!("instance {i} seed {seed}: {e}"))?;
            ensure(order == (0..t.len()).collect::<Vec<_>>(), || {
                format!("instance {i} seed {seed}: natural ordering {order:?} differs from invocation order")
            })?;
            for v in 0..t.len() {
                let labels: Vec<ClauseId> = t.children(v).iter().map(|&c| t.label(c)).collect();
                let distinct: BTreeSet<ClauseId> = labels.iter().copied().collect();
                ensure(distinct.len() == labels.len(), || {
                    format!("instance {i} seed {seed}: siblings share a label")
                })?;
            }
            trees += 1;
            vertices += t.len();
        }
    }
    Ok(format!("{trees} journaled trees ({vertices} vertices) match their natural ordering"))
}

fn criterion_4() -> Check {
    // k = 2 chain: C0 = {x1,x2}, C1 = {x2,x3}, C2 = {x3,x4}.
    let f = Formula::from_dimacs_clauses(4, &[&[1, 2], &[2, 3], &[3, 4]]).unwrap();
    let single = |c| RecursionTree::new(ClauseId(c));
    let path = |labels: &[usize]| {
        let mut t = RecursionTree::new(ClauseId(labels[0]));
        let mut at = 0;
        for &l in &labels[1..] {
            at = t.add_child(at, ClauseId(l));
        }
        t
    };
    let mut branching = RecursionTree::new(ClauseId(0));
    branching.add_child(0, ClauseId(0));
    let c1 = branching.add_child(0, ClauseId(1));
    branching.add_child(c1, ClauseId(2));
    let witnesses = vec![
        vec![single(0)],
        vec![path(&[0, 1])],
        vec![path(&[0, 1, 2])],
        vec![path(&[0, 0]), path(&[1, 2])],
        vec![branching, single(2)],
    ];
    let mut lines = Vec::new();
    for (i, trees) in witnesses.into_iter().enumerate() {
        let w = CompositeWitness::new(&f, trees).map_err(|e| e.to_string())?;
        let bits = 2 * w.size();
        ensure(bits == 2 * (i + 1), || format!("witness {i} has k|V(W)| = {bits}"))?;
        let trials = if bits >= 8 { 1_000_000 } else { 100_000 };
        let r = monte_carlo_consistency(&f, &w, trials, 4242 + i as u64, jobs()).map_err(|e| e.to_string())?;
        ensure((r.expected - (-(bits as f64)).exp2()).abs() < 1e-15, || "wrong p".into())?;
        ensure(r.within_sigmas(3.0), || {
            format!("k|V(W)| = {bits}: frequency {} vs {} (z = {:.2})", r.frequency, r.expected, r.z_score)
        })?;
        lines.push(format!("{bits}:z={:+.2}", r.z_score));
    }
    Ok(format!("all |z| < 3 [{}]", lines.join(" ")))
}

/// k = 7, five clauses, every |Γ⁺| ≤ 4.
fn seven_cnf() -> Formula {
    let c = |vars: [i64; 7]| vars;
    let clauses = [
        c([14, 2, 3, 4, 5, 6, 7]),
        c([7, 8, 9, 10, 11, 12, 13]),
        c([13, 14, 15, 16, 17, 18, 19]),
        c([19, 20, 21, 22, 23, 24, 25]),
        c([25, 26, 27, 28, 29, 30, 31]),
    ];
    let refs: Vec<&[i64]> = clauses.iter().map(|c| c.as_slice()).collect();
    Formula::from_dimacs_clauses(31, &refs).unwrap()
}

fn criterion_5() -> Check {
    let f = seven_cnf();
    let d = 4;
    ensure(f.max_inclusive_neighbourhood() == d, || "test formula has wrong max |Γ⁺|".into())?;
    let ws = collect_witnesses(&f, 1..=4, d, EnumerationLimits::default()).map_err(|e| e.to_string())?;
    let mut codes = HashSet::new();
    for w in &ws {
        let e = encode(w, &f, d).map_err(|e| e.to_string())?;
        ensure(e.size() == w.size(), || "encoding changed the size".into())?;
        let back = decode(&e, &f, d).map_err(|e| e.to_string())?;
        ensure(&back == w, || format!("round trip failed for {}", w.to_json()))?;
        ensure(codes.insert(e), || format!("two witnesses share an encoding: {}", w.to_json()))?;
    }
    Ok(format!("{} witnesses of size <= 4 round-trip, encodings pairwise distinct", ws.len()))
}

fn brute_force_subtrees(branching: u32, size: usize) -> usize {
    fn grow(branching: u32, size: usize, cur: &mut BTreeSet<Vec<u32>>, seen: &mut HashSet<BTreeSet<Vec<u32>>>) {
        if !seen.insert(cur.clone()) || cur.len() == size {
            return;
        }
        let frontier: Vec<Vec<u32>> = cur
            .iter()
            .flat_map(|p| {
                (1..=branching).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .filter(|q| !cur.contains(q))
            .collect();
        for q in frontier {
            cur.insert(q.clone());
            grow(branching, size, cur, seen);
            cur.remove(&q);
        }
    }
    let mut seen = HashSet::new();
    grow(branching, size, &mut BTreeSet::from([vec![]]), &mut seen);
    seen.iter().filter(|s| s.len() == size).count()
}

fn criterion_6() -> Check {
    let f = seven_cnf();
    let (m, k) = (f.num_clauses(), 7);
    let mut counts = Vec::new();
    for u in 1..=4 {
        let n = collect_witnesses(&f, u..=u, 4, EnumerationLimits::default())
            .map_err(|e| e.to_string())?
            .len();
        let bound = witness_count_bound(m, k, u..=u);
        ensure(BigUint::from(n) <= bound, || format!("u = {u}: {n} witnesses > {bound}"))?;
        counts.push(n);
    }
    for branching in [2, 4] {
        for u in 1..=6 {
            let c = count_subtrees(branching, u).map_err(|e| e.to_string())?;
            let exact: f64 = c.exact.to_string().parse().unwrap();
            ensure(exact <= c.knuth_bound && c.within_knuth_bound(), || {
                format!("D = {branching}, u = {u}: {} exceeds (eD)^u", c.exact)
            })?;
        }
    }
    let five = count_subtrees(2, 3).map_err(|e| e.to_string())?.exact;
    let independent = brute_force_subtrees(2, 3);
    ensure(five == BigUint::from(5u32) && independent == 5, || {
        format!("D = 2, u = 3: dp {five}, enumeration {independent}")
    })?;
    Ok(format!(
        "witness counts {counts:?} within m*2^(u(k-1)); subtree counts within (eD)^u; D=2,u=3 -> 5"
    ))
}

fn biased_table(rng: &mut ChaCha8Rng, vars: usize, rows: u64, p_one: f64) -> FixedTable {
    FixedTable::from_fn(vars, rows, |_, _| rng.random_bool(p_one))
}

fn criterion_7() -> Check {
    let formulas: Vec<(Formula, usize)> = vec![
        (
            Formula::from_dimacs_clauses(9, &[&[1, 2, 3], &[3, 4, 5], &[5, 6, 7], &[7, 8, 9]]).unwrap(),
            8,
        ),
        (Formula::from_dimacs_clauses(6, &[&[1, 2, 3], &[3, 4, 5], &[5, 6, 1]]).unwrap(), 7),
        (
            Formula::from_dimacs_clauses(10, &[&[1, 2, 3], &[3, 4, 5], &[5, 6, 7], &[7, 8, 9], &[9, 10, 1]])
                .unwrap(),
            7,
        ),
    ];
    let k = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut cases, mut shrunk) = (0usize, 0usize);
    for (f, max_size) in &formulas {
        let d = f.max_inclusive_neighbourhood();
        let ws = collect_witnesses(f, 1..=*max_size, d, EnumerationLimits::default()).map_err(|e| e.to_string())?;
        let entries: Vec<Vec<(Lit, u64)>> = ws.iter().map(|w| w.consistency_entries(f)).collect();
        for t in 0..50 {
            let p_one = [0.5, 0.25, 0.1][t % 3];
            let table = biased_table(&mut rng, f.num_vars(), *max_size as u64, p_one);
            let consistent: Vec<usize> = (0..ws.len())
                .filter(|&i| entries[i].iter().all(|&(l, row)| !(table.get(l.var, row).unwrap() ^ l.negated)))
                .collect();
            let sizes: BTreeSet<usize> = consistent.iter().map(|&i| ws[i].size()).collect();
            for u in 1..=4 {
                if sizes.range(u..).next().is_none() {
                    continue;
                }
                cases += 1;
                let range = shrink_range(u, k);
                ensure(sizes.range(range.clone()).next().is_some(), || {
                    format!("table {t}: consistent witness of size >= {u} but none in {range:?}")
                })?;
                // The constructive argument on every consistent witness too large
                // for the range.
                for &i in consistent.iter().filter(|&&i| ws[i].size() > *range.end()) {
                    let s = shrink_into_range(f, &ws[i], u);
                    let mut tbl = table.clone();
                    ensure(range.contains(&s.size()) && s.is_consistent(f, &mut tbl).unwrap(), || {
                        format!("shrinking {} left the range or consistency", ws[i].to_json())
                    })?;
                    shrunk += 1;
                }
            }
        }
    }
    Ok(format!(
        "{cases} (formula, table, u) cases with a consistent witness >= u all have one in [u, 3u+1]; {shrunk} explicit shrinks"
    ))
}

fn criterion_8() -> Check {
    let f = Formula::from_dimacs_clauses(4, &[&[1, -2, 3], &[-3, 4, 2]]).unwrap();
    let mut t3 = RecursionTree::new(ClauseId(0));
    let c = t3.add_child(0, ClauseId(1));
    t3.add_child(c, ClauseId(0));
    let mut t2 = RecursionTree::new(ClauseId(1));
    t2.add_child(0, ClauseId(1));
    let witnesses = vec![
        CompositeWitness::new(&f, vec![RecursionTree::new(ClauseId(1))]).unwrap(),
        CompositeWitness::new(&f, vec![t2]).unwrap(),
        CompositeWitness::new(&f, vec![t3]).unwrap(),
    ];
    let mut sweeps = 0u64;
    for w in &witnesses {
        let clause = witness_clause(&f, w);
        let touched: Vec<MetaVar> = clause.lits().iter().map(|l| l.var).collect();
        ensure(touched.len() == 3 * w.size(), || "C_W width is not k|V(W)|".into())?;
        ensure(touched.iter().collect::<BTreeSet<_>>().len() == touched.len(), || {
            "C_W repeats a meta-variable".into()
        })?;
        let rows = touched.iter().map(|z| z.row).max().unwrap() + 1;
        for mask in 0u64..1 << touched.len() {
            let mut beta = MetaAssignment::new();
            for (i, &z) in touched.iter().enumerate() {
                beta.set(z, mask >> i & 1 == 1);
            }
            let mut table = beta.to_table(f.num_vars(), rows);
            let consistent = w.is_consistent(&f, &mut table).map_err(|e| e.to_string())?;
            ensure(!clause.is_satisfied_by(&beta) == consistent, || {
                format!("mismatch on {} at mask {mask:b}", w.to_json())
            })?;
            sweeps += 1;
        }
    }
    Ok(format!("{sweeps} meta-assignments over 3 witnesses agree"))
}

fn tiny_instances() -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sign = |v: i64| if rng.random() { v } else { -v };
    let mut out = vec![
        Formula::from_dimacs_clauses(3, &[&[sign(1), sign(2), sign(3)]]).unwrap(),
        Formula::from_dimacs_clauses(4, &[&[sign(2), sign(3), sign(4)]]).unwrap(),
        Formula::from_dimacs_clauses(5, &[&[sign(1), sign(2), sign(3)], &[sign(3), sign(4), sign(5)]]).unwrap(),
        Formula::from_dimacs_clauses(5, &[&[sign(1), sign(2), sign(5)], &[sign(3), sign(4), sign(5)]]).unwrap(),
    ];
    for (m, seed) in [(2, 1), (3, 2), (4, 3), (5, 4), (6, 5), (6, 6)] {
        out.push(gen_instance(&GenSpec::new(3, m, 1, 3 * m, seed)).unwrap());
    }
    out
}

fn criterion_9() -> Check {
    let mut summary = Vec::new();
    for (i, f) in tiny_instances().iter().enumerate() {
        let start = Instant::now();
        let out = derand_solve(f, 2, EnumerationLimits { max_witnesses: Some(5_000_000) })
            .map_err(|e| format!("instance {i}: {e}"))?;
        let elapsed = start.elapsed();
        ensure(f.is_satisfied_by(&out.assignment).unwrap(), || format!("instance {i}: not satisfying"))?;
        ensure(brute_force_sat(f).unwrap().is_some(), || format!("instance {i}: oracle says UNSAT"))?;
        ensure(out.report.violated_meta_clauses == 0 && out.stats.restarts == 0, || {
            format!("instance {i}: {:?}", out.report)
        })?;
        // Recheck G independently of the report.
        let t = threshold(f.num_clauses());
        let g = build_meta_formula(f, 2, shrink_range(t, 3), EnumerationLimits::default()).unwrap();
        ensure(g.violated(&out.beta) == 0, || format!("instance {i}: beta violates G"))?;
        ensure(elapsed.as_secs() < 60, || format!("instance {i} took {elapsed:?}"))?;
        summary.push(format!("m={}:|G|={}", f.num_clauses(), out.report.meta_clauses));
    }
    Ok(format!("10 instances solved deterministically, G satisfied [{}]", summary.join(" ")))
}

fn criterion_10(r: &RandomizedRuns) -> Check {
    let epochs: usize = r.runs.iter().map(|(_, _, o)| o.epochs.len()).sum();
    let aborted: usize = r.runs.iter().map(|(_, _, o)| o.epochs.iter().filter(|e| e.aborted).count()).sum();
    let frac = aborted as f64 / epochs as f64;
    ensure(frac <= 0.6, || format!("{aborted}/{epochs} epochs aborted"))?;
    Ok(format!("{aborted}/{epochs} epochs aborted ({frac:.3} <= 0.6)"))
}

fn criterion_11() -> Check {
    let mut generated = 0;
    let mut runs = 0;
    let specs = [(5, 3, 1), (5, 2, 1), (6, 3, 2), (6, 2, 2), (7, 3, 4), (7, 4, 4)];
    let config = SolverConfig {
        max_restarts: Some(1000),
        ..SolverConfig::default()
    };
    for (si, &(k, m, d)) in specs.iter().enumerate() {
        for seed in 0..10u64 {
            let f = gen_instance(&GenSpec {
                max_pool: 20,
                ..GenSpec::new(k, m, d, k + 2, 100 * si as u64 + seed)
            })
            .map_err(|e| e.to_string())?;
            ensure(f.num_vars() <= 20 && f.check_bound(None).unwrap().pass, || {
                "generated instance outside the regime".into()
            })?;
            generated += 1;
            let oracle = brute_force_sat(&f).map_err(|e| e.to_string())?;
            ensure(oracle.is_some(), || format!("setting {si} seed {seed}: bound-passing instance unsatisfiable"))?;
            for s in 0..3 {
                let out = solve(&f, TableSource::Seed(s), &config).map_err(|e| e.to_string())?;
                ensure(f.violated_clauses(&out.assignment).unwrap().is_empty(), || {
                    format!("setting {si} seed {seed}: solver output rejected")
                })?;
                runs += 1;
            }
        }
    }
    for f in tiny_instances() {
        let out = derand_solve(&f, 2, EnumerationLimits::default()).map_err(|e| e.to_string())?;
        ensure(
            brute_force_sat(&f).unwrap().is_some() && f.violated_clauses(&out.assignment).unwrap().is_empty(),
            || "deterministic output rejected".into(),
        )?;
        runs += 1;
    }
    Ok(format!(
        "{generated} generated instances (n <= 20) satisfiable; {runs} solver outputs confirmed"
    ))
}

fn report(n: usize, result: Check, failures: &mut usize, started: Instant) {
    match result {
        Ok(msg) => println!("criterion {n:>2}: PASS  {msg} ({:.1?})", started.elapsed()),
        Err(msg) => {
            *failures += 1;
            println!("criterion {n:>2}: FAIL  {msg}");
        }
    }
}

fn main() {
    let mut failures = 0;
    let t = Instant::now();
    let runs = randomized_runs();
    match &runs {
        Ok(r) => {
            report(1, criterion_1(r), &mut failures, t);
            let t = Instant::now();
            report(2, criterion_2(r), &mut failures, t);
            let t = Instant::now();
            report(3, criterion_3(r), &mut failures, t);
        }
        Err(e) => {
            for n in 1..=3 {
                report(n, Err(e.clone()), &mut failures, t);
            }
        }
    }
    let singles: [(usize, fn() -> Check); 6] = [
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    for (n, f) in singles {
        let t = Instant::now();
        report(n, f(), &mut failures, t);
    }
    let t = Instant::now();
    match &runs {
        Ok(r) => report(10, criterion_10(r), &mut failures, t),
        Err(e) => report(10, Err(e.clone()), &mut failures, t),
    }
    let t = Instant::now();
    report(11, criterion_11(), &mut failures, t);
    if failures > 0 {
        println!("acceptance: {failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all 11 criteria pass");
}
