//! Witness encodings and witness counting.
//!
//! Fix a root clause `R` and the infinite rooted `2d`-ary tree. Labelling
//! its root with `R`, the children of a node labelled `D` get labels from
//! Γ⁺(D): slot `i` (1-based, `i <= |Γ⁺(D)|`) is the `i`-th clause of Γ⁺(D)
//! in clause order (a *low* child) and slot `d + i` carries the same label
//! (a *high* child). A composite witness is embedded into this tree as a
//! subtree containing the root, with the edges that join separate recursion
//! trees coloured as glueing edges. The embedding is injective and
//! size-preserving, which bounds the number of witnesses of size `u` by `m`
//! times the number of coloured subtrees of size `u`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::ops::RangeInclusive;
use std::rc::Rc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::cnf::{ClauseId, Formula, Var};
use crate::error::{Error, Result};
use crate::witness::{CompositeWitness, NodeId, RecursionTree};

/// Path of 1-based child slots from the root of the infinite tree.
pub type SlotPath = Vec<u32>;

/// Partial labelling of the infinite `2d`-ary tree rooted at a clause.
#[derive(Debug, Clone, Copy)]
pub struct SlotLabelling<'a> {
    formula: &'a Formula,
    d: usize,
    root: ClauseId,
}

impl<'a> SlotLabelling<'a> {
    pub fn new(formula: &'a Formula, d: usize, root: ClauseId) -> Self {
        SlotLabelling { formula, d, root }
    }

    /// Label of the child in `slot` of a node labelled `parent`.
    pub fn child_label(&self, parent: ClauseId, slot: u32) -> Option<ClauseId> {
        let gamma = self.formula.inclusive_neighbourhood(parent);
        let s = slot as usize;
        if (1..=gamma.len()).contains(&s) {
            Some(gamma[s - 1])
        } else if s > self.d && s - self.d <= gamma.len() && s <= 2 * self.d {
            Some(gamma[s - self.d - 1])
        } else {
            None
        }
    }

    pub fn label(&self, path: &[u32]) -> Option<ClauseId> {
        path.iter()
            .try_fold(self.root, |cur, &slot| self.child_label(cur, slot))
    }

    pub fn low_slot(&self, parent: ClauseId, child: ClauseId) -> Option<u32> {
        self.formula
            .neighbour_rank(parent, child)
            .map(|r| r as u32 + 1)
    }

    pub fn high_slot(&self, parent: ClauseId, child: ClauseId) -> Option<u32> {
        self.low_slot(parent, child).map(|s| s + self.d as u32)
    }

    pub fn is_high(&self, slot: u32) -> bool {
        slot as usize > self.d
    }
}

/// `⟨C, T, c⟩`: root clause, node set of a subtree of the infinite tree
/// containing its root, and the set of nodes whose edge to their parent is a
/// glueing edge (all other edges are regular).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WitnessEncoding {
    pub root_clause: ClauseId,
    pub nodes: BTreeSet<SlotPath>,
    pub glueing: BTreeSet<SlotPath>,
}

#[derive(Serialize, Deserialize)]
struct EncodingJson {
    root_clause: usize,
    nodes: Vec<SlotPath>,
    glueing_edges: Vec<usize>,
}

impl WitnessEncoding {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// `glueing_edges` lists positions in `nodes` (sorted slot paths) of the
    /// child end of each glueing edge.
    pub fn to_json(&self) -> String {
        let nodes: Vec<SlotPath> = self.nodes.iter().cloned().collect();
        let glueing_edges = self
            .glueing
            .iter()
            .map(|g| nodes.binary_search(g).expect("glue node is a node"))
            .collect();
        serde_json::to_string(&EncodingJson {
            root_clause: self.root_clause.0,
            nodes,
            glueing_edges,
        })
        .expect("encoding serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: EncodingJson = serde_json::from_str(s)?;
        let mut glueing = BTreeSet::new();
        for &i in &e.glueing_edges {
            let p = e
                .nodes
                .get(i)
                .ok_or_else(|| Error::Undecodable(format!("glueing edge {i} names no node")))?;
            glueing.insert(p.clone());
        }
        Ok(WitnessEncoding {
            root_clause: ClauseId(e.root_clause),
            nodes: e.nodes.into_iter().collect(),
            glueing,
        })
    }
}

fn check_slot_bound(formula: &Formula, d: usize) -> Result<()> {
    let size = formula.max_inclusive_neighbourhood();
    if size > d {
        return Err(Error::SlotBound { size, d });
    }
    Ok(())
}

struct Embedder<'a> {
    lab: SlotLabelling<'a>,
    labels: BTreeMap<SlotPath, ClauseId>,
}

impl Embedder<'_> {
    fn insert(&mut self, path: SlotPath, label: ClauseId) -> Result<()> {
        debug_assert_eq!(self.lab.label(&path), Some(label));
        if self.labels.insert(path.clone(), label).is_some() {
            return Err(Error::InvalidWitness(format!("embedding collides at {path:?}")));
        }
        Ok(())
    }

    /// Embeds the subtrees of `w` below `at` through low children, skipping
    /// the child `exclude`.
    fn attach_low(&mut self, tree: &RecursionTree, w: NodeId, at: &SlotPath, exclude: Option<NodeId>) -> Result<()> {
        for &ch in tree.children(w) {
            if Some(ch) == exclude {
                continue;
            }
            let slot = self
                .lab
                .low_slot(tree.label(w), tree.label(ch))
                .expect("child label lies in the parent's neighbourhood");
            let mut p = at.clone();
            p.push(slot);
            self.insert(p.clone(), tree.label(ch))?;
            self.attach_low(tree, ch, &p, None)?;
        }
        Ok(())
    }

    /// Embeds `tree` rooted at `anchor`, which must carry the label of `u`:
    /// the path from `u` up to the tree's root becomes a chain of high
    /// children, everything else hangs off low children.
    fn embed(&mut self, tree: &RecursionTree, anchor: SlotPath, u: NodeId) -> Result<()> {
        self.insert(anchor.clone(), tree.label(u))?;
        self.attach_low(tree, u, &anchor, None)?;
        let (mut prev, mut at) = (u, anchor);
        while let Some(up) = tree.parent(prev) {
            let slot = self
                .lab
                .high_slot(tree.label(prev), tree.label(up))
                .expect("parent label lies in the child's neighbourhood");
            at.push(slot);
            self.insert(at.clone(), tree.label(up))?;
            self.attach_low(tree, up, &at, Some(prev))?;
            prev = up;
        }
        Ok(())
    }
}

/// Encodes `witness` as a coloured subtree of the `2d`-ary tree.
pub fn encode(witness: &CompositeWitness, formula: &Formula, d: usize) -> Result<WitnessEncoding> {
    check_slot_bound(formula, d)?;
    let trees = witness.trees();
    let vars: Vec<BTreeSet<Var>> = trees.iter().map(|t| t.variables(formula)).collect();

    // Each tree after the first shares a variable with an earlier one.
    let mut order = vec![0];
    let mut placed_vars = vars[0].clone();
    let mut pending: Vec<usize> = (1..trees.len()).collect();
    while !pending.is_empty() {
        let pos = pending
            .iter()
            .position(|&i| !vars[i].is_disjoint(&placed_vars))
            .expect("witness trees are connected");
        let i = pending.remove(pos);
        placed_vars.extend(vars[i].iter().copied());
        order.push(i);
    }

    let root = trees[order[0]].root_label();
    let mut emb = Embedder {
        lab: SlotLabelling::new(formula, d, root),
        labels: BTreeMap::new(),
    };
    let mut glueing = BTreeSet::new();
    emb.embed(&trees[order[0]], Vec::new(), 0)?;
    let mut seen_vars = vars[order[0]].clone();

    for &i in &order[1..] {
        let tree = &trees[i];
        let x = *vars[i]
            .intersection(&seen_vars)
            .next()
            .expect("connected to an earlier tree");
        // Deepest node whose label contains x; none of its descendants can
        // contain x.
        let (g, g_label) = emb
            .labels
            .iter()
            .filter(|(_, &l)| formula.clause(l).contains_var(x))
            .max_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| b.0.cmp(a.0)))
            .map(|(p, &l)| (p.clone(), l))
            .expect("an earlier tree contains x");
        // Canonical trees are numbered in natural order.
        let r = (0..tree.len())
            .find(|&v| formula.clause(tree.label(v)).contains_var(x))
            .expect("tree contains x");
        let slot = emb
            .lab
            .low_slot(g_label, tree.label(r))
            .expect("clauses sharing x are neighbours");
        let mut anchor = g;
        anchor.push(slot);
        glueing.insert(anchor.clone());
        emb.embed(tree, anchor, r)?;
        seen_vars.extend(vars[i].iter().copied());
    }

    Ok(WitnessEncoding {
        root_clause: root,
        nodes: emb.labels.into_keys().collect(),
        glueing,
    })
}

/// Inverts [`encode`]. Rejects triples outside its image that cannot be
/// read back as a composite witness.
pub fn decode(enc: &WitnessEncoding, formula: &Formula, d: usize) -> Result<CompositeWitness> {
    let bad = |m: String| Error::Undecodable(m);
    formula.get(enc.root_clause)?;
    if !enc.nodes.contains(&Vec::new()) {
        return Err(bad("root missing".into()));
    }
    let lab = SlotLabelling::new(formula, d, enc.root_clause);
    let mut labels: BTreeMap<&SlotPath, ClauseId> = BTreeMap::new();
    for p in &enc.nodes {
        if let Some((_, parent)) = p.split_last() {
            if !enc.nodes.contains(parent) {
                return Err(bad(format!("{p:?} has no parent in the tree")));
            }
        }
        let l = lab
            .label(p)
            .ok_or_else(|| bad(format!("slot path {p:?} is unlabelled")))?;
        labels.insert(p, l);
    }
    if let Some(g) = enc.glueing.iter().find(|g| g.is_empty() || !enc.nodes.contains(*g)) {
        return Err(bad(format!("glueing edge at {g:?} is not an edge of the tree")));
    }

    // Regular edges only.
    let mut kids: BTreeMap<&SlotPath, Vec<&SlotPath>> = BTreeMap::new();
    for p in &enc.nodes {
        if let Some((_, parent)) = p.split_last() {
            if !enc.glueing.contains(p) {
                let parent = enc.nodes.get(parent).expect("checked above");
                kids.entry(parent).or_default().push(p);
            }
        }
    }
    let high_kids = |p: &SlotPath| -> Vec<&SlotPath> {
        kids.get(p)
            .map(|v| {
                v.iter()
                    .copied()
                    .filter(|c| lab.is_high(*c.last().expect("child path")))
                    .collect()
            })
            .unwrap_or_default()
    };

    let component_roots = std::iter::once(enc.nodes.get(&Vec::new()).expect("root"))
        .chain(enc.glueing.iter());
    let mut trees = Vec::new();
    for cr in component_roots {
        let mut chain = vec![cr];
        loop {
            let hk = high_kids(chain.last().expect("non-empty"));
            match hk.len() {
                0 => break,
                1 => chain.push(hk[0]),
                _ => return Err(bad(format!("{:?} has two high children", chain.last()))),
            }
        }
        let top = *chain.last().expect("non-empty");

        // Collect the component and check no high edge leaves the chain.
        let chain_set: BTreeSet<&SlotPath> = chain.iter().copied().collect();
        let mut comp = Vec::new();
        let mut stack = vec![cr];
        while let Some(p) = stack.pop() {
            comp.push(p);
            if !chain_set.contains(p) && !high_kids(p).is_empty() {
                return Err(bad(format!("high child below {p:?} off the rotation path")));
            }
            stack.extend(kids.get(p).into_iter().flatten().copied());
        }
        let comp: BTreeSet<&SlotPath> = comp.into_iter().collect();

        // Re-root the component at the end of the chain.
        let mut adj: BTreeMap<&SlotPath, Vec<&SlotPath>> = BTreeMap::new();
        for &p in &comp {
            if p != cr {
                let parent = enc.nodes.get(&p[..p.len() - 1]).expect("parent exists");
                adj.entry(p).or_default().push(parent);
                adj.entry(parent).or_default().push(p);
            }
        }
        let mut tree = RecursionTree::new(labels[top]);
        let mut visited: BTreeSet<&SlotPath> = BTreeSet::from([top]);
        let mut queue = VecDeque::from([(top, 0usize)]);
        while let Some((p, id)) = queue.pop_front() {
            for &q in adj.get(p).into_iter().flatten() {
                if visited.insert(q) {
                    let child = tree.add_child(id, labels[q]);
                    queue.push_back((q, child));
                }
            }
        }
        trees.push(tree);
    }
    CompositeWitness::new(formula, trees).map_err(|e| bad(e.to_string()))
}

/// Rooted subtree counts of the infinite `branching`-ary tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubtreeCount {
    pub branching: usize,
    pub size: usize,
    #[serde(serialize_with = "biguint_as_string")]
    pub exact: BigUint,
    /// `(e * branching)^size`.
    pub knuth_bound: f64,
}

fn biguint_as_string<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl SubtreeCount {
    /// `exact <= (87/32 * branching)^size`, an exact comparison against a
    /// rational upper bound of the Knuth bound (`e < 87/32`).
    pub fn within_knuth_bound(&self) -> bool {
        let lhs = &self.exact * BigUint::from(32u32).pow(self.size as u32);
        let rhs = BigUint::from(87u64 * self.branching as u64).pow(self.size as u32);
        lhs <= rhs
    }
}

/// Number of subtrees of size `size` of the infinite `branching`-ary tree
/// that contain its root, by dynamic programming over child slots.
pub fn count_subtrees(branching: usize, size: usize) -> Result<SubtreeCount> {
    if branching == 0 || size == 0 {
        return Err(Error::Infeasible("branching factor and size must be at least 1".into()));
    }
    // f[s] = number of subtrees with s nodes hanging at a slot (f[0] = 1:
    // the slot is empty). A tree of size s is a root plus `branching` slot
    // subtrees of total size s - 1.
    let mut f: Vec<BigUint> = vec![BigUint::one()];
    for s in 1..=size {
        // coefficient of x^(s-1) in (sum_j f[j] x^j)^branching
        let mut poly = vec![BigUint::one()];
        for _ in 0..branching {
            let mut next = vec![BigUint::zero(); s];
            for (i, a) in poly.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (j, b) in f.iter().enumerate() {
                    if i + j < s {
                        next[i + j] += a * b;
                    }
                }
            }
            poly = next;
        }
        f.push(poly[s - 1].clone());
    }
    Ok(SubtreeCount {
        branching,
        size,
        exact: f[size].clone(),
        knuth_bound: (std::f64::consts::E * branching as f64).powi(size as i32),
    })
}

/// `sum_{u in sizes} m * 2^(u(k-1))`.
pub fn witness_count_bound(m: usize, k: usize, sizes: RangeInclusive<usize>) -> BigUint {
    sizes
        .map(|u| BigUint::from(m) << (u * k.saturating_sub(1)))
        .sum()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EnumerationLimits {
    /// Refuse once more than this many witnesses have been produced.
    pub max_witnesses: Option<u64>,
}

/// Canonical shape of a recursion tree: children with distinct labels,
/// sorted by label.
#[derive(Debug)]
struct Shape {
    label: ClauseId,
    children: Vec<Rc<Shape>>,
}

impl Shape {
    fn to_tree(&self) -> RecursionTree {
        let mut t = RecursionTree::new(self.label);
        let mut stack = vec![(self, 0)];
        while let Some((s, id)) = stack.pop() {
            for c in &s.children {
                let cid = t.add_child(id, c.label);
                stack.push((c, cid));
            }
        }
        t
    }
}

struct ShapeCache<'a> {
    formula: &'a Formula,
    memo: HashMap<(ClauseId, usize), Rc<Vec<Rc<Shape>>>>,
    /// Shapes built so far, capped by the witness budget so that the memo
    /// cannot outgrow it before a single witness is counted.
    built: u64,
    limit: Option<u64>,
}

impl ShapeCache<'_> {
    /// All recursion trees of exactly `size` vertices rooted at `label`.
    fn trees(&mut self, label: ClauseId, size: usize) -> Result<Rc<Vec<Rc<Shape>>>> {
        if let Some(v) = self.memo.get(&(label, size)) {
            return Ok(Rc::clone(v));
        }
        let mut out = Vec::new();
        if size == 1 {
            out.push(Rc::new(Shape {
                label,
                children: Vec::new(),
            }));
        } else {
            let gamma = self.formula.inclusive_neighbourhood(label).to_vec();
            // Every non-empty subset of Γ⁺ as the children's labels.
            for mask in 1u64..(1u64 << gamma.len()) {
                let kids: Vec<ClauseId> = gamma
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &c)| c)
                    .collect();
                if kids.len() > size - 1 {
                    continue;
                }
                let mut chosen = Vec::with_capacity(kids.len());
                self.fill_children(label, &kids, size - 1, &mut chosen, &mut out)?;
            }
        }
        let out = Rc::new(out);
        self.memo.insert((label, size), Rc::clone(&out));
        Ok(out)
    }

    fn fill_children(
        &mut self,
        label: ClauseId,
        kids: &[ClauseId],
        remaining: usize,
        chosen: &mut Vec<Rc<Shape>>,
        out: &mut Vec<Rc<Shape>>,
    ) -> Result<()> {
        let i = chosen.len();
        if i == kids.len() {
            if remaining == 0 {
                self.built += 1;
                if let Some(max) = self.limit.filter(|&max| self.built > max) {
                    return Err(Error::BudgetExceeded {
                        budget: max,
                        bound: String::new(),
                    });
                }
                out.push(Rc::new(Shape {
                    label,
                    children: chosen.clone(),
                }));
            }
            return Ok(());
        }
        let left_after = kids.len() - i - 1;
        if remaining < left_after + 1 {
            return Ok(());
        }
        for s in 1..=remaining - left_after {
            let options = self.trees(kids[i], s)?;
            for shape in options.iter() {
                chosen.push(Rc::clone(shape));
                self.fill_children(label, kids, remaining - s, chosen, out)?;
                chosen.pop();
            }
        }
        Ok(())
    }
}

/// Calls `visit` on every composite witness of `formula` whose size lies in
/// `sizes`, each exactly once, and returns how many there were.
///
/// Witnesses are built directly: root labels are chosen in clause order,
/// each root gets every recursion tree of every admissible size, and
/// collections that are not connected are skipped.
pub fn enumerate_witnesses<V>(
    formula: &Formula,
    sizes: RangeInclusive<usize>,
    d: usize,
    limits: EnumerationLimits,
    mut visit: V,
) -> Result<u64>
where
    V: FnMut(CompositeWitness) -> Result<()>,
{
    check_slot_bound(formula, d)?;
    let (lo, hi) = (*sizes.start(), *sizes.end());
    if lo > hi || hi == 0 || formula.num_clauses() == 0 {
        return Ok(0);
    }
    let clause_vars: Vec<BTreeSet<Var>> = formula
        .clauses()
        .iter()
        .map(|c| c.vars().collect())
        .collect();

    struct Search<'a, V> {
        formula: &'a Formula,
        cache: ShapeCache<'a>,
        clause_vars: Vec<BTreeSet<Var>>,
        lo: usize,
        hi: usize,
        count: u64,
        limits: EnumerationLimits,
        visit: V,
        k: usize,
    }

    impl<V: FnMut(CompositeWitness) -> Result<()>> Search<'_, V> {
        fn go(&mut self, next: usize, total: usize, chosen: &mut Vec<Rc<Shape>>) -> Result<()> {
            if next == self.formula.num_clauses() {
                if total >= self.lo && !chosen.is_empty() && self.connected(chosen) {
                    self.count += 1;
                    if let Some(max) = self.limits.max_witnesses {
                        if self.count > max {
                            return Err(Error::BudgetExceeded {
                                budget: max,
                                bound: witness_count_bound(self.formula.num_clauses(), self.k, self.lo..=self.hi)
                                    .to_string(),
                            });
                        }
                    }
                    let trees = chosen.iter().map(|s| s.to_tree()).collect();
                    let w = CompositeWitness::new(self.formula, trees)?;
                    (self.visit)(w)?;
                }
                return Ok(());
            }
            self.go(next + 1, total, chosen)?;
            for s in 1..=self.hi - total {
                let options = self.cache.trees(ClauseId(next), s)?;
                for shape in options.iter() {
                    chosen.push(Rc::clone(shape));
                    self.go(next + 1, total + s, chosen)?;
                    chosen.pop();
                }
            }
            Ok(())
        }

        fn tree_vars(&self, shape: &Shape) -> BTreeSet<Var> {
            let mut out = BTreeSet::new();
            let mut stack = vec![shape];
            while let Some(s) = stack.pop() {
                out.extend(self.clause_vars[s.label.0].iter().copied());
                stack.extend(s.children.iter().map(|c| c.as_ref()));
            }
            out
        }

        fn connected(&self, chosen: &[Rc<Shape>]) -> bool {
            if chosen.len() == 1 {
                return true;
            }
            let vars: Vec<BTreeSet<Var>> = chosen.iter().map(|s| self.tree_vars(s)).collect();
            let mut reached = vec![false; vars.len()];
            reached[0] = true;
            let mut stack = vec![0];
            while let Some(i) = stack.pop() {
                for j in 0..vars.len() {
                    if !reached[j] && !vars[i].is_disjoint(&vars[j]) {
                        reached[j] = true;
                        stack.push(j);
                    }
                }
            }
            reached.into_iter().all(|r| r)
        }
    }

    let mut search = Search {
        formula,
        cache: ShapeCache {
            formula,
            memo: HashMap::new(),
            built: 0,
            limit: limits.max_witnesses,
        },
        clause_vars,
        lo,
        hi,
        count: 0,
        limits,
        visit: &mut visit,
        k: formula.width(),
    };
    match search.go(0, 0, &mut Vec::new()) {
        Err(Error::BudgetExceeded { budget, bound }) if bound.is_empty() => Err(Error::BudgetExceeded {
            budget,
            bound: witness_count_bound(formula.num_clauses(), formula.width(), lo..=hi).to_string(),
        }),
        r => r.map(|()| search.count),
    }
}

/// [`enumerate_witnesses`] into a vector.
pub fn collect_witnesses(
    formula: &Formula,
    sizes: RangeInclusive<usize>,
    d: usize,
    limits: EnumerationLimits,
) -> Result<Vec<CompositeWitness>> {
    let mut out = Vec::new();
    enumerate_witnesses(formula, sizes, d, limits, |w| {
        out.push(w);
        Ok(())
    })?;
    Ok(out)
}
