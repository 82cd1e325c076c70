//! Decomposition of the grammar constraint into primitive arithmetic
//! constraints over an AND/OR graph.
//!
//! OR nodes stand for chart cells `n(i,j,A)` and for terminal leaves
//! `n(i,1,a)`; AND nodes stand for a production applied at a split. Each
//! node carries two integer intervals: `l`, a lower bound on the cheapest
//! derivation through the node, and `u`, the largest weight the node may
//! consume inside a derivation that fits the budget. Six constraint kinds
//! link them:
//!
//! * `AndSum`: `l_A = W + sum of l_O over the children`,
//! * `OrMin`: `l_O = min of l_A over the AND children`,
//! * `UpperLink`: `u_A <= u_O` of the parent OR node,
//! * `ParentMax`: `u_O = max over AND parents of u_A - l_sibling - W`,
//! * `LeafChannel`: ties a leaf to its domain value,
//! * `RootCap`: `u_O(root) <= z`.
//!
//! Bounds propagation to the fixpoint prunes exactly like the chart
//! propagator. A node with `lo(l) > hi(u)` cannot take part in any
//! derivation within budget any more; its sum/min and upper-link
//! constraints are entailed and may be skipped.
//!
//! The graph and the constraint list are immutable and shared; only the
//! interval vectors are copied when a network is cloned.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::domain::{DomainStore, TermSet};
use crate::grammar::{NonTerminal, Rhs, SymbolTable, Terminal, WeightedGrammar};
use crate::wcyk::{Bound, Chart, PropagateError, Propagation, WcykPropagator};

#[derive(Debug, Error)]
pub enum DecompositionError {
    #[error("the start symbol does not derive the sequence within budget")]
    NoRoot,
    #[error("chart was computed for n = {chart}, domains have n = {domains}")]
    LengthMismatch { chart: usize, domains: usize },
    #[error(transparent)]
    Propagate(#[from] PropagateError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AndId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrKind {
    Cell { i: usize, j: usize, a: NonTerminal },
    Leaf { i: usize, t: Terminal },
}

impl OrKind {
    pub fn span(&self) -> usize {
        match *self {
            OrKind::Cell { j, .. } => j,
            OrKind::Leaf { .. } => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrNode {
    pub kind: OrKind,
    /// AND nodes having this node as a child, without repeats.
    pub parents: Vec<AndId>,
    pub children: Vec<AndId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AndKind {
    /// Production `prod` (a binary one) over span `(i, j)` split after `k`.
    Binary { i: usize, j: usize, k: usize, prod: usize },
    /// Terminal production `prod` at position `i`.
    Lexical { i: usize, prod: usize },
}

#[derive(Clone, Debug)]
pub struct AndNode {
    pub kind: AndKind,
    pub weight: Bound,
    pub parent: OrId,
    /// Two cell nodes for a binary production, one leaf otherwise. The two
    /// entries coincide for `B -> A A` on equal halves.
    pub children: Vec<OrId>,
}

impl AndNode {
    pub fn span(&self) -> usize {
        match self.kind {
            AndKind::Binary { j, .. } => j,
            AndKind::Lexical { .. } => 1,
        }
    }
}

/// The AND/OR graph of every derivation reachable from `n(1,n,S)` through
/// chart members.
#[derive(Clone, Debug)]
pub struct AndOrDag {
    n: usize,
    ors: Vec<OrNode>,
    ands: Vec<AndNode>,
    root: OrId,
    cells: HashMap<(usize, usize, NonTerminal), OrId>,
    leaves: HashMap<(usize, Terminal), OrId>,
}

impl AndOrDag {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> OrId {
        self.root
    }

    pub fn or_nodes(&self) -> &[OrNode] {
        &self.ors
    }

    pub fn and_nodes(&self) -> &[AndNode] {
        &self.ands
    }

    pub fn or_node(&self, id: OrId) -> &OrNode {
        &self.ors[id.0]
    }

    pub fn and_node(&self, id: AndId) -> &AndNode {
        &self.ands[id.0]
    }

    pub fn cell(&self, i: usize, j: usize, a: NonTerminal) -> Option<OrId> {
        self.cells.get(&(i, j, a)).copied()
    }

    pub fn leaf(&self, i: usize, t: Terminal) -> Option<OrId> {
        self.leaves.get(&(i, t)).copied()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_leaf(&self, id: OrId) -> bool {
        matches!(self.ors[id.0].kind, OrKind::Leaf { .. })
    }
}

/// Builds the graph top-down from the root over the membership table of an
/// upward pass. Only splits whose children are both members, and only
/// productions whose restriction holds, produce AND nodes. Leaves exist for
/// every position and every terminal that some production emits.
pub fn build_dag(grammar: &WeightedGrammar, chart: &Chart) -> Result<AndOrDag, DecompositionError> {
    let n = chart.n();
    let start = grammar.start();
    if !chart.is_member(1, n, start) {
        return Err(DecompositionError::NoRoot);
    }
    let mut dag = AndOrDag {
        n,
        ors: Vec::new(),
        ands: Vec::new(),
        root: OrId(0),
        cells: HashMap::new(),
        leaves: HashMap::new(),
    };
    let new_or = |dag: &mut AndOrDag, kind: OrKind| {
        let id = OrId(dag.ors.len());
        dag.ors.push(OrNode { kind, parents: Vec::new(), children: Vec::new() });
        id
    };

    // Pending cells per span; children always have a strictly smaller span.
    let mut pending: Vec<Vec<OrId>> = vec![Vec::new(); n + 1];
    let root = new_or(&mut dag, OrKind::Cell { i: 1, j: n, a: start });
    dag.cells.insert((1, n, start), root);
    pending[n].push(root);

    let mut lexical: Vec<(OrId, usize, usize, Terminal)> = Vec::new();
    for j in (1..=n).rev() {
        let mut level = std::mem::take(&mut pending[j]);
        level.sort_by_key(|&id| match dag.ors[id.0].kind {
            OrKind::Cell { i, a, .. } => (i, a),
            OrKind::Leaf { .. } => unreachable!(),
        });
        for id in level {
            let OrKind::Cell { i, a, .. } = dag.ors[id.0].kind else { unreachable!() };
            for (prod, p) in grammar.productions.iter().enumerate() {
                if p.lhs != a || !p.applies(i, j) {
                    continue;
                }
                match p.rhs {
                    Rhs::Terminal(t) if j == 1 => lexical.push((id, i, prod, t)),
                    Rhs::Binary(b, c) => {
                        for k in 1..j {
                            if !chart.is_member(i, k, b) || !chart.is_member(i + k, j - k, c) {
                                continue;
                            }
                            let mut child = |dag: &mut AndOrDag, ci: usize, cj: usize, x: NonTerminal| {
                                *dag.cells.entry((ci, cj, x)).or_insert_with(|| {
                                    let cid = OrId(dag.ors.len());
                                    dag.ors.push(OrNode {
                                        kind: OrKind::Cell { i: ci, j: cj, a: x },
                                        parents: Vec::new(),
                                        children: Vec::new(),
                                    });
                                    pending[cj].push(cid);
                                    cid
                                })
                            };
                            let left = child(&mut dag, i, k, b);
                            let right = child(&mut dag, i + k, j - k, c);
                            let and = AndId(dag.ands.len());
                            dag.ands.push(AndNode {
                                kind: AndKind::Binary { i, j, k, prod },
                                weight: Bound::from(p.weight),
                                parent: id,
                                children: vec![left, right],
                            });
                            dag.ors[id.0].children.push(and);
                            dag.ors[left.0].parents.push(and);
                            if right != left {
                                dag.ors[right.0].parents.push(and);
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    let mut emitted: Vec<Terminal> = grammar
        .productions
        .iter()
        .filter_map(|p| match p.rhs {
            Rhs::Terminal(t) => Some(t),
            _ => None,
        })
        .collect();
    emitted.sort();
    emitted.dedup();
    for i in 1..=n {
        for &t in &emitted {
            let id = new_or(&mut dag, OrKind::Leaf { i, t });
            dag.leaves.insert((i, t), id);
        }
    }
    for (parent, i, prod, t) in lexical {
        let leaf = dag.leaves[&(i, t)];
        let and = AndId(dag.ands.len());
        dag.ands.push(AndNode {
            kind: AndKind::Lexical { i, prod },
            weight: Bound::from(grammar.productions[prod].weight),
            parent,
            children: vec![leaf],
        });
        dag.ors[parent.0].children.push(and);
        dag.ors[leaf.0].parents.push(and);
    }
    dag.root = root;
    Ok(dag)
}

/// Closed integer interval; empty when `lo > hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Bound,
    pub hi: Bound,
}

impl Interval {
    pub fn new(lo: Bound, hi: Bound) -> Self {
        Interval { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }
}

/// A node is dead once its cheapest derivation exceeds its allowance.
pub fn entailed(l: Interval, u: Interval) -> bool {
    l.lo > u.hi
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    AndSum(AndId),
    OrMin(OrId),
    UpperLink(AndId),
    ParentMax(OrId),
    LeafChannel(OrId),
    RootCap(OrId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Or(OrId),
    And(AndId),
}

impl Constraint {
    /// The node whose entailment makes this constraint skippable, if any.
    pub fn owner(&self) -> Option<NodeRef> {
        match *self {
            Constraint::AndSum(a) | Constraint::UpperLink(a) => Some(NodeRef::And(a)),
            Constraint::OrMin(o) | Constraint::ParentMax(o) => Some(NodeRef::Or(o)),
            Constraint::LeafChannel(_) | Constraint::RootCap(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Constraint::AndSum(_) => "AndSum",
            Constraint::OrMin(_) => "OrMin",
            Constraint::UpperLink(_) => "UpperLink",
            Constraint::ParentMax(_) => "ParentMax",
            Constraint::LeafChannel(_) => "LeafChannel",
            Constraint::RootCap(_) => "RootCap",
        }
    }
}

#[derive(Debug)]
struct Structure {
    dag: AndOrDag,
    constraints: Vec<Constraint>,
    order: Vec<usize>,
    /// Saturation ceiling `z + 1` for the budget the network was posted with.
    cap: Bound,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub invoked: u64,
    pub skipped: u64,
}

/// Posted constraints plus the current bounds. Cloning copies the bounds
/// and shares the graph.
#[derive(Clone, Debug)]
pub struct ConstraintNetwork {
    structure: Arc<Structure>,
    or_l: Vec<Interval>,
    or_u: Vec<Interval>,
    and_l: Vec<Interval>,
    and_u: Vec<Interval>,
    budget: Bound,
    entailment: bool,
    counters: Counters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Failure;

/// Posts every constraint over the graph for budget `z`. `l` intervals start
/// at `[0, z+1]` and `u` intervals at `[-1, z]`.
pub fn post_network(dag: AndOrDag, z: Bound) -> ConstraintNetwork {
    assert!(z >= 0, "budget must be non-negative");
    let mut constraints = Vec::new();
    for a in 0..dag.ands.len() {
        constraints.push(Constraint::AndSum(AndId(a)));
        constraints.push(Constraint::UpperLink(AndId(a)));
    }
    for (o, node) in dag.ors.iter().enumerate() {
        let id = OrId(o);
        match node.kind {
            OrKind::Cell { .. } => constraints.push(Constraint::OrMin(id)),
            OrKind::Leaf { .. } => constraints.push(Constraint::LeafChannel(id)),
        }
        if id != dag.root {
            constraints.push(Constraint::ParentMax(id));
        }
    }
    constraints.push(Constraint::RootCap(dag.root));
    let order = schedule_order_for(&dag, &constraints);
    let cap = z + 1;
    let (nor, nand) = (dag.ors.len(), dag.ands.len());
    ConstraintNetwork {
        structure: Arc::new(Structure { dag, constraints, order, cap }),
        or_l: vec![Interval::new(0, cap); nor],
        or_u: vec![Interval::new(-1, z); nor],
        and_l: vec![Interval::new(0, cap); nand],
        and_u: vec![Interval::new(-1, z); nand],
        budget: z,
        entailment: false,
        counters: Counters::default(),
    }
}

fn schedule_order_for(dag: &AndOrDag, constraints: &[Constraint]) -> Vec<usize> {
    let n = dag.n;
    let mut and_sum = vec![Vec::new(); n + 1];
    let mut or_min = vec![Vec::new(); n + 1];
    let mut upper = vec![Vec::new(); n + 1];
    let mut parent_max = vec![Vec::new(); n + 1];
    let mut leaf_max = Vec::new();
    let mut leaf_channel = Vec::new();
    let mut root_cap = Vec::new();
    for (idx, c) in constraints.iter().enumerate() {
        match *c {
            Constraint::AndSum(a) => and_sum[dag.ands[a.0].span()].push(idx),
            Constraint::UpperLink(a) => upper[dag.ands[a.0].span()].push(idx),
            Constraint::OrMin(o) => or_min[dag.ors[o.0].kind.span()].push(idx),
            Constraint::ParentMax(o) if dag.is_leaf(o) => leaf_max.push(idx),
            Constraint::ParentMax(o) => parent_max[dag.ors[o.0].kind.span()].push(idx),
            Constraint::LeafChannel(_) => leaf_channel.push(idx),
            Constraint::RootCap(_) => root_cap.push(idx),
        }
    }
    let mut order = leaf_channel.clone();
    for j in 1..=n {
        order.extend(&and_sum[j]);
        order.extend(&or_min[j]);
    }
    order.extend(&root_cap);
    for j in (1..=n).rev() {
        order.extend(&parent_max[j]);
        order.extend(&upper[j]);
    }
    order.extend(leaf_max);
    order.extend(leaf_channel);
    order
}

/// The propagation ordering of a network: leaf channels, then sums and
/// minima by increasing span, the root cap, upper links and parent maxima
/// by decreasing span, and the leaf channels again. Indices refer to
/// [`ConstraintNetwork::constraints`]; leaf channels appear twice.
pub fn schedule_order(network: &ConstraintNetwork) -> Vec<usize> {
    network.structure.order.clone()
}

/// `true` when the constraint may be skipped because its owning node is
/// dead.
pub fn entailment_skip(network: &ConstraintNetwork, constraint: &Constraint) -> bool {
    match constraint.owner() {
        Some(node) => network.node_entailed(node),
        None => false,
    }
}

impl ConstraintNetwork {
    pub fn dag(&self) -> &AndOrDag {
        &self.structure.dag
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.structure.constraints
    }

    pub fn budget(&self) -> Bound {
        self.budget
    }

    /// Lowers the budget the root cap and leaf channels test against.
    pub fn set_budget(&mut self, z: Bound) {
        assert!(z >= 0 && z < self.structure.cap, "budget outside the posted range");
        self.budget = z;
    }

    pub fn set_entailment(&mut self, on: bool) {
        self.entailment = on;
    }

    pub fn entailment(&self) -> bool {
        self.entailment
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = Counters::default();
    }

    pub fn or_bounds(&self, id: OrId) -> (Interval, Interval) {
        (self.or_l[id.0], self.or_u[id.0])
    }

    pub fn and_bounds(&self, id: AndId) -> (Interval, Interval) {
        (self.and_l[id.0], self.and_u[id.0])
    }

    /// `(l_O, u_O)` of the cell node `n(i,j,A)`, if the graph has it.
    pub fn cell_bounds(&self, i: usize, j: usize, a: NonTerminal) -> Option<(Interval, Interval)> {
        self.dag().cell(i, j, a).map(|id| self.or_bounds(id))
    }

    /// Lower bound of the root's `l`: the cheapest derivation over the
    /// current domains once at the fixpoint.
    pub fn root_min(&self) -> Bound {
        self.or_l[self.dag().root.0].lo
    }

    pub fn node_entailed(&self, node: NodeRef) -> bool {
        match node {
            NodeRef::Or(o) => entailed(self.or_l[o.0], self.or_u[o.0]),
            NodeRef::And(a) => entailed(self.and_l[a.0], self.and_u[a.0]),
        }
    }

    /// Cell nodes still able to take part in a derivation within budget.
    pub fn live_cells(&self) -> Vec<(usize, usize, NonTerminal)> {
        let mut out: Vec<_> = self
            .dag()
            .cells
            .iter()
            .filter(|(_, &id)| !self.node_entailed(NodeRef::Or(id)))
            .map(|(&key, _)| key)
            .collect();
        out.sort();
        out
    }

    /// Propagates in schedule order until no interval or domain changes.
    pub fn fixpoint(&mut self, domains: &mut DomainStore) -> Result<(), Failure> {
        let order = Arc::clone(&self.structure);
        self.fixpoint_with_order(&order.order, domains)
    }

    /// Propagates in the given order until no interval or domain changes.
    pub fn fixpoint_with_order(&mut self, order: &[usize], domains: &mut DomainStore) -> Result<(), Failure> {
        while self.sweep(order, domains)? {}
        Ok(())
    }

    /// One pass over `order`; returns whether anything changed.
    pub fn sweep(&mut self, order: &[usize], domains: &mut DomainStore) -> Result<bool, Failure> {
        assert_eq!(domains.len(), self.dag().n, "domain length differs from the network");
        let structure = Arc::clone(&self.structure);
        let mut changed = false;
        // Values no production emits have no leaf and hence no support.
        for i in 1..=domains.len() {
            for t in domains.get(i).iter() {
                if structure.dag.leaf(i, t).is_none() {
                    changed |= domains.remove(i, t);
                }
            }
            if domains.get(i).is_empty() {
                return Err(Failure);
            }
        }
        for &idx in order {
            changed |= self.revise(&structure, idx, domains)?;
        }
        Ok(changed)
    }

    /// Runs the fixpoint and reports the result like the chart propagator.
    pub fn propagate(&mut self, domains: &DomainStore) -> Propagation {
        let mut out = domains.clone();
        match self.fixpoint(&mut out) {
            Ok(()) => Propagation::Pruned { domains: out, root_min: self.root_min() },
            Err(Failure) => Propagation::Infeasible,
        }
    }

    fn revise(&mut self, s: &Structure, idx: usize, domains: &mut DomainStore) -> Result<bool, Failure> {
        let c = s.constraints[idx];
        if self.entailment && entailment_skip(self, &c) {
            self.counters.skipped += 1;
            return Ok(false);
        }
        self.counters.invoked += 1;
        let dag = &s.dag;
        let z = self.budget;
        match c {
            Constraint::AndSum(a) => {
                let node = &dag.ands[a.0];
                let sum: Bound = node.children.iter().map(|c| self.or_l[c.0].lo).sum::<Bound>() + node.weight;
                Ok(raise(&mut self.and_l[a.0], sum.min(s.cap)))
            }
            Constraint::OrMin(o) => {
                let m = dag.ors[o.0].children.iter().map(|a| self.and_l[a.0].lo).min().unwrap_or(s.cap);
                Ok(raise(&mut self.or_l[o.0], m))
            }
            Constraint::UpperLink(a) => {
                let parent = self.or_u[dag.ands[a.0].parent.0].hi;
                Ok(lower(&mut self.and_u[a.0], parent))
            }
            Constraint::ParentMax(o) => {
                let mut best: Bound = -1;
                for &p in &dag.ors[o.0].parents {
                    let node = &dag.ands[p.0];
                    let hi = self.and_u[p.0].hi;
                    for (pos, &child) in node.children.iter().enumerate() {
                        if child != o {
                            continue;
                        }
                        let sibling = match node.children.len() {
                            2 => self.or_l[node.children[1 - pos].0].lo,
                            _ => 0,
                        };
                        best = best.max(hi - sibling - node.weight);
                    }
                }
                Ok(lower(&mut self.or_u[o.0], best))
            }
            Constraint::LeafChannel(o) => {
                let OrKind::Leaf { i, t } = dag.ors[o.0].kind else { unreachable!() };
                let dead = (z + 1).min(s.cap);
                let mut changed = false;
                let d = domains.get(i);
                if !d.contains(t) {
                    return Ok(raise(&mut self.or_l[o.0], dead));
                }
                let (l, u) = (self.or_l[o.0], self.or_u[o.0]);
                if l.lo > z || l.lo > u.hi {
                    domains.remove(i, t);
                    raise(&mut self.or_l[o.0], dead);
                    // The value left behind, if single, gets its bound now
                    // rather than on the next sweep.
                    match domains.get(i).single() {
                        None if domains.get(i).is_empty() => return Err(Failure),
                        Some(rest) => {
                            if let Some(other) = dag.leaf(i, rest) {
                                lower(&mut self.or_l[other.0], z);
                                if self.or_l[other.0].is_empty() {
                                    return Err(Failure);
                                }
                            }
                        }
                        None => {}
                    }
                    return Ok(true);
                }
                if d == TermSet::singleton(t) {
                    changed |= lower(&mut self.or_l[o.0], z);
                    if self.or_l[o.0].is_empty() {
                        return Err(Failure);
                    }
                }
                Ok(changed)
            }
            Constraint::RootCap(root) => {
                let changed = lower(&mut self.or_u[root.0], z);
                let l = self.or_l[root.0];
                if l.lo > z || l.lo > self.or_u[root.0].hi {
                    return Err(Failure);
                }
                Ok(changed)
            }
        }
    }

    /// One line per constraint with the bounds it currently relates.
    pub fn dump(&self, grammar: &WeightedGrammar) -> String {
        let dag = self.dag();
        let symbols = &grammar.symbols;
        let mut out = String::new();
        for c in self.constraints() {
            let _ = match *c {
                Constraint::AndSum(a) | Constraint::UpperLink(a) => {
                    let (l, u) = self.and_bounds(a);
                    writeln!(out, "{} {} l={} u={}", c.name(), and_label(dag, a, grammar), fmt(l), fmt(u))
                }
                Constraint::OrMin(o)
                | Constraint::ParentMax(o)
                | Constraint::LeafChannel(o)
                | Constraint::RootCap(o) => {
                    let (l, u) = self.or_bounds(o);
                    writeln!(out, "{} {} l={} u={}", c.name(), or_label(dag, o, symbols), fmt(l), fmt(u))
                }
            };
        }
        out
    }
}

fn raise(iv: &mut Interval, lo: Bound) -> bool {
    if lo > iv.lo {
        iv.lo = lo;
        true
    } else {
        false
    }
}

fn lower(iv: &mut Interval, hi: Bound) -> bool {
    if hi < iv.hi {
        iv.hi = hi;
        true
    } else {
        false
    }
}

fn fmt(iv: Interval) -> String {
    format!("[{},{}]", iv.lo, iv.hi)
}

fn or_label(dag: &AndOrDag, o: OrId, symbols: &SymbolTable) -> String {
    match dag.ors[o.0].kind {
        OrKind::Cell { i, j, a } => format!("n({i},{j},{})", symbols.nonterminal_name(a)),
        OrKind::Leaf { i, t } => format!("n({i},1,'{}')", symbols.terminal_name(t)),
    }
}

fn and_label(dag: &AndOrDag, a: AndId, grammar: &WeightedGrammar) -> String {
    match dag.ands[a.0].kind {
        AndKind::Binary { i, j, k, prod } => {
            format!("n({i},{j},{k},{})", grammar.display_production(&grammar.productions[prod]))
        }
        AndKind::Lexical { i, prod } => {
            format!("n({i},1,{})", grammar.display_production(&grammar.productions[prod]))
        }
    }
}

/// Builds the chart, graph and network for `(grammar, z, domains)`; `None`
/// when the upward pass already shows infeasibility.
pub fn build_network(
    propagator: &WcykPropagator,
    z: Bound,
    domains: &DomainStore,
) -> Result<Option<ConstraintNetwork>, PropagateError> {
    if propagator.is_epsilon_mode() {
        return Err(PropagateError::NotStrictCnf(0));
    }
    propagator.check_inputs(z, domains)?;
    if domains.is_failed() {
        return Ok(None);
    }
    let chart = propagator.upward_pass(z, domains);
    match build_dag(propagator.grammar(), &chart) {
        Ok(dag) => Ok(Some(post_network(dag, z))),
        Err(DecompositionError::NoRoot) => Ok(None),
        Err(e) => unreachable!("{e}"),
    }
}

/// Decomposition counterpart of [`crate::wcyk::propagate`].
pub fn propagate(
    grammar: &WeightedGrammar,
    z: Bound,
    domains: &DomainStore,
    entailment: bool,
) -> Result<Propagation, PropagateError> {
    let prop = WcykPropagator::new(grammar)?;
    Ok(match build_network(&prop, z, domains)? {
        Some(mut net) => {
            net.set_entailment(entailment);
            net.propagate(domains)
        }
        None => Propagation::Infeasible,
    })
}
