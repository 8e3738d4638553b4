//! Recursion trees, composite witnesses and their consistency with a table.
//!
//! A recursion tree journals one top-level correction: the root is the clause
//! the correction started from and every other vertex is a recursive call,
//! labelled with the clause it was made for. A composite witness is a
//! collection of such trees with distinct root labels whose variable sets
//! form a connected graph. It certifies, cheaply checkable against a table,
//! that a run could not have gone faster.

use std::collections::{BTreeSet, VecDeque};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::assignment::{OffsetAssignment, Table};
use crate::cnf::{ClauseId, Formula, Lit, Var};
use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeNode {
    pub label: ClauseId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

/// A clause-labelled rooted tree. Node `0` is the root. Children are kept
/// in insertion order, which for solver journals is the invocation order;
/// [`RecursionTree::natural_ordering`] never relies on it.
#[derive(Debug, Clone)]
pub struct RecursionTree {
    nodes: Vec<TreeNode>,
    complete: bool,
}

impl RecursionTree {
    pub fn new(root_label: ClauseId) -> Self {
        RecursionTree {
            nodes: vec![TreeNode {
                label: root_label,
                parent: None,
                children: Vec::new(),
            }],
            complete: true,
        }
    }

    pub fn add_child(&mut self, parent: NodeId, label: ClauseId) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            label,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Complete trees come from corrections that returned; intermediate ones
    /// from aborted corrections.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn set_complete(&mut self, complete: bool) {
        self.complete = complete;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_label(&self) -> ClauseId {
        self.nodes[0].label
    }

    pub fn label(&self, v: NodeId) -> ClauseId {
        self.nodes[v].label
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v].parent
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v].children
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Checks the labelling rule `[child] ∈ Γ⁺([parent])` and that no node
    /// has two identically labelled children.
    pub fn validate(&self, formula: &Formula) -> Result<()> {
        for (id, node) in self.nodes.iter().enumerate() {
            formula.get(node.label)?;
            if let Some(p) = node.parent {
                let pl = self.nodes[p].label;
                if formula.neighbour_rank(pl, node.label).is_none() {
                    return Err(Error::InvalidTree(format!(
                        "node {id} labelled {} is not in the inclusive neighbourhood of its parent's label {pl}",
                        node.label
                    )));
                }
            }
        }
        self.natural_ordering().map(|_| ())
    }

    /// The natural ordering: depth-first from the root, visiting children in
    /// clause order. Returns the node ids in visiting order.
    pub fn natural_ordering(&self) -> Result<Vec<NodeId>> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            order.push(v);
            let mut kids = self.nodes[v].children.clone();
            kids.sort_by_key(|&c| self.nodes[c].label);
            if let Some(w) = kids.windows(2).find(|w| self.nodes[w[0]].label == self.nodes[w[1]].label) {
                return Err(Error::InvalidTree(format!(
                    "node {v} has two children labelled {}",
                    self.nodes[w[0]].label
                )));
            }
            stack.extend(kids.into_iter().rev());
        }
        Ok(order)
    }

    /// `rank[v]` is the 0-based position of node `v` in the natural ordering.
    pub fn natural_ranks(&self) -> Result<Vec<usize>> {
        let order = self.natural_ordering()?;
        let mut rank = vec![0; order.len()];
        for (i, &v) in order.iter().enumerate() {
            rank[v] = i;
        }
        Ok(rank)
    }

    /// Copy with nodes renumbered by natural ordering and children sorted by
    /// label. Two trees are equal as labelled unordered trees iff their
    /// canonical forms have equal nodes.
    pub fn canonical(&self) -> Result<RecursionTree> {
        let order = self.natural_ordering()?;
        let mut rank = vec![0; order.len()];
        for (i, &v) in order.iter().enumerate() {
            rank[v] = i;
        }
        let nodes = order
            .iter()
            .map(|&v| {
                let n = &self.nodes[v];
                let mut children: Vec<NodeId> = n.children.iter().map(|&c| rank[c]).collect();
                children.sort_unstable();
                TreeNode {
                    label: n.label,
                    parent: n.parent.map(|p| rank[p]),
                    children,
                }
            })
            .collect();
        Ok(RecursionTree {
            nodes,
            complete: self.complete,
        })
    }

    pub fn variables(&self, formula: &Formula) -> BTreeSet<Var> {
        self.nodes
            .iter()
            .flat_map(|n| formula.clause(n.label).vars())
            .collect()
    }

    /// δ_τ(x): the number of vertices whose label contains `x`.
    pub fn offset_assignment(&self, formula: &Formula) -> OffsetAssignment {
        let mut counts = vec![0; formula.num_vars()];
        for n in &self.nodes {
            for v in formula.clause(n.label).vars() {
                counts[v.index()] += 1;
            }
        }
        OffsetAssignment::from_rows(counts)
    }

    /// idx_τ(x, v): how many vertices before `v` in the natural ordering
    /// contain `x`.
    pub fn occurrence_index(&self, formula: &Formula, var: Var, v: NodeId) -> Result<u64> {
        if !formula.clause(self.nodes[v].label).contains_var(var) {
            return Err(Error::NotOccurring { var, vertex: v });
        }
        let ranks = self.natural_ranks()?;
        Ok(self
            .nodes
            .iter()
            .enumerate()
            .filter(|(w, n)| ranks[*w] < ranks[v] && formula.clause(n.label).contains_var(var))
            .count() as u64)
    }

    /// Labels in natural order.
    pub fn ordered_labels(&self) -> Result<Vec<ClauseId>> {
        Ok(self
            .natural_ordering()?
            .into_iter()
            .map(|v| self.nodes[v].label)
            .collect())
    }

    /// Whether every literal of every vertex evaluates to 0 in `table` at
    /// row `idx_τ(x, v) + δ(x)`.
    pub fn is_consistent<T: Table + ?Sized>(
        &self,
        formula: &Formula,
        table: &mut T,
        offset: &OffsetAssignment,
    ) -> Result<bool> {
        let labels = self.ordered_labels()?;
        for (lit, row) in occurrence_entries(formula, &labels, Some(offset)) {
            if table.lookup(lit, row)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn to_json_tree(&self) -> Result<TreeJson> {
        let order = self.natural_ordering()?;
        let ranks = self.natural_ranks()?;
        Ok(TreeJson {
            root_label: self.root_label().0,
            nodes: order
                .iter()
                .map(|&v| NodeJson {
                    id: ranks[v],
                    parent: self.nodes[v].parent.map(|p| ranks[p]),
                    label: self.nodes[v].label.0,
                })
                .collect(),
        })
    }

    fn from_json_tree(t: &TreeJson) -> Result<RecursionTree> {
        let bad = |m: String| Error::InvalidTree(m);
        let n = t.nodes.len();
        let mut by_id: Vec<Option<&NodeJson>> = vec![None; n];
        for node in &t.nodes {
            if node.id >= n || by_id[node.id].is_some() {
                return Err(bad(format!("node ids must be 0..{n} without repeats")));
            }
            by_id[node.id] = Some(node);
        }
        let by_id: Vec<&NodeJson> = by_id.into_iter().map(|x| x.expect("filled")).collect();
        let roots: Vec<&NodeJson> = by_id.iter().copied().filter(|x| x.parent.is_none()).collect();
        let [root] = roots[..] else {
            return Err(bad(format!("expected one root, found {}", roots.len())));
        };
        if root.label != t.root_label {
            return Err(bad("root_label disagrees with the root node".into()));
        }
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
        for x in &by_id {
            if let Some(p) = x.parent {
                if p >= n {
                    return Err(bad(format!("parent {p} out of range")));
                }
                kids[p].push(x.id);
            }
        }
        let mut tree = RecursionTree::new(ClauseId(root.label));
        let mut queue = VecDeque::from([(root.id, 0)]);
        while let Some((json_id, tree_id)) = queue.pop_front() {
            for &c in &kids[json_id] {
                let id = tree.add_child(tree_id, ClauseId(by_id[c].label));
                queue.push_back((c, id));
            }
        }
        if tree.len() != n {
            return Err(bad("parent links contain a cycle".into()));
        }
        Ok(tree)
    }
}

/// For vertices visited in the order of `labels`, the table entries
/// `(L, idx(vbl(L), v) + offset(vbl(L)))` for every literal `L` of each
/// vertex label.
fn occurrence_entries(
    formula: &Formula,
    labels: &[ClauseId],
    offset: Option<&OffsetAssignment>,
) -> Vec<(Lit, u64)> {
    let mut seen = vec![0u64; formula.num_vars()];
    let mut out = Vec::new();
    for &label in labels {
        let clause = formula.clause(label);
        for &lit in clause.lits() {
            let base = offset.map_or(0, |o| o.get(lit.var));
            out.push((lit, seen[lit.var.index()] + base));
        }
        for v in clause.vars() {
            seen[v.index()] += 1;
        }
    }
    out
}

/// A connected collection of recursion trees with distinct root labels,
/// stored in canonical form and sorted by root label.
#[derive(Debug, Clone)]
pub struct CompositeWitness {
    trees: Vec<RecursionTree>,
}

impl PartialEq for CompositeWitness {
    fn eq(&self, other: &Self) -> bool {
        self.trees.len() == other.trees.len()
            && self.trees.iter().zip(&other.trees).all(|(a, b)| a.nodes == b.nodes)
    }
}

impl Eq for CompositeWitness {}

impl Hash for CompositeWitness {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for t in &self.trees {
            t.nodes.hash(state);
        }
    }
}

impl CompositeWitness {
    pub fn new(formula: &Formula, trees: Vec<RecursionTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidWitness("no trees".into()));
        }
        let mut canon = Vec::with_capacity(trees.len());
        for t in &trees {
            t.validate(formula)?;
            canon.push(t.canonical()?);
        }
        canon.sort_by_key(RecursionTree::root_label);
        if let Some(w) = canon.windows(2).find(|w| w[0].root_label() == w[1].root_label()) {
            return Err(Error::InvalidWitness(format!(
                "two trees rooted at {}",
                w[0].root_label()
            )));
        }
        let vars: Vec<BTreeSet<Var>> = canon.iter().map(|t| t.variables(formula)).collect();
        if component_of(&vars, 0).len() != canon.len() {
            return Err(Error::InvalidWitness("trees do not form a connected graph".into()));
        }
        Ok(CompositeWitness { trees: canon })
    }

    pub fn trees(&self) -> &[RecursionTree] {
        &self.trees
    }

    /// |V(W)|.
    pub fn size(&self) -> usize {
        self.trees.iter().map(RecursionTree::len).sum()
    }

    /// Vertices `(tree, node)` in the witness's natural ordering.
    pub fn vertices(&self) -> Vec<(usize, NodeId)> {
        // Canonical trees are numbered in natural order.
        self.trees
            .iter()
            .enumerate()
            .flat_map(|(t, tree)| (0..tree.len()).map(move |v| (t, v)))
            .collect()
    }

    pub fn ordered_labels(&self) -> Vec<ClauseId> {
        self.trees
            .iter()
            .flat_map(|t| t.nodes.iter().map(|n| n.label))
            .collect()
    }

    pub fn variables(&self, formula: &Formula) -> BTreeSet<Var> {
        self.trees.iter().flat_map(|t| t.variables(formula)).collect()
    }

    /// idx_W(x, w) for `w = (tree, node)`.
    pub fn occurrence_index(&self, formula: &Formula, var: Var, w: (usize, NodeId)) -> Result<u64> {
        let labels = self.ordered_labels();
        let pos = self.vertices().iter().position(|&x| x == w).ok_or_else(|| {
            Error::InvalidWitness(format!("no vertex {w:?}"))
        })?;
        if !formula.clause(labels[pos]).contains_var(var) {
            return Err(Error::NotOccurring { var, vertex: pos });
        }
        Ok(labels[..pos]
            .iter()
            .filter(|&&l| formula.clause(l).contains_var(var))
            .count() as u64)
    }

    /// The `k·|V(W)|` table entries `(L, idx_W(vbl(L), v))` that must all
    /// read 0 for the witness to be consistent. Pairwise distinct as
    /// `(variable, row)` cells.
    pub fn consistency_entries(&self, formula: &Formula) -> Vec<(Lit, u64)> {
        occurrence_entries(formula, &self.ordered_labels(), None)
    }

    pub fn is_consistent<T: Table + ?Sized>(&self, formula: &Formula, table: &mut T) -> Result<bool> {
        for (lit, row) in self.consistency_entries(formula) {
            if table.lookup(lit, row)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&WitnessJson {
            trees: self
                .trees
                .iter()
                .map(|t| t.to_json_tree().expect("witness trees are valid"))
                .collect(),
        })
        .expect("witness serializes")
    }

    pub fn from_json(formula: &Formula, s: &str) -> Result<Self> {
        let w: WitnessJson = serde_json::from_str(s)?;
        let trees = w
            .trees
            .iter()
            .map(RecursionTree::from_json_tree)
            .collect::<Result<Vec<_>>>()?;
        CompositeWitness::new(formula, trees)
    }
}

/// Serializes solver journal trees in the witness JSON layout.
pub fn trees_to_json(trees: &[RecursionTree]) -> Result<String> {
    let trees = trees
        .iter()
        .map(RecursionTree::to_json_tree)
        .collect::<Result<Vec<_>>>()?;
    Ok(serde_json::to_string(&WitnessJson { trees })?)
}

#[derive(Serialize, Deserialize)]
struct WitnessJson {
    trees: Vec<TreeJson>,
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    root_label: usize,
    nodes: Vec<NodeJson>,
}

#[derive(Serialize, Deserialize, Clone)]
struct NodeJson {
    id: usize,
    parent: Option<usize>,
    label: usize,
}

/// Indices of the sets reachable from `start` through non-empty pairwise
/// intersections.
fn component_of(vars: &[BTreeSet<Var>], start: usize) -> Vec<usize> {
    let mut seen = vec![false; vars.len()];
    seen[start] = true;
    let mut stack = vec![start];
    let mut out = Vec::new();
    while let Some(i) = stack.pop() {
        out.push(i);
        for j in 0..vars.len() {
            if !seen[j] && !vars[i].is_disjoint(&vars[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Builds the witness certifying an aborted run from its journal: the
/// connected component (under shared variables) of the final, aborted tree.
pub fn extract_witness(formula: &Formula, journal: &[RecursionTree]) -> Result<CompositeWitness> {
    let Some(last) = journal.last() else {
        return Err(Error::NoAbort);
    };
    if last.is_complete() || journal[..journal.len() - 1].iter().any(|t| !t.is_complete()) {
        return Err(Error::NoAbort);
    }
    let vars: Vec<BTreeSet<Var>> = journal.iter().map(|t| t.variables(formula)).collect();
    let members = component_of(&vars, journal.len() - 1);
    CompositeWitness::new(formula, members.into_iter().map(|i| journal[i].clone()).collect())
}
