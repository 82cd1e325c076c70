//! The monolithic weighted CYK propagator.
//!
//! An upward pass computes, for every span `(i, j)` and nonterminal `A`, the
//! lower bound `l[i,j,A]` on the weight of any derivation of the span from
//! `A` over the current domains. A downward pass starting from `(1, n, S)`
//! with allowance `u = z` marks the cells that take part in some derivation
//! within budget and computes the largest weight `u[i,j,A]` each such cell
//! may consume. Values with no marked, affordable terminal production are
//! then removed. The result is domain consistent.
//!
//! Grammars with epsilon productions use an extended chart with empty spans
//! `(i, 0)`; splits then range over `k = 0..=j`, which makes a cell depend
//! on other nonterminals of the same cell. Those dependencies are resolved by
//! iterating to a fixpoint inside the cell, which terminates because weights
//! are non-negative.

use std::fmt::Write as _;

use thiserror::Error;

use crate::domain::{DomainStore, TermSet};
use crate::grammar::{validate, GrammarError, NonTerminal, Rhs, SymbolTable, WeightedGrammar};

/// Chart bound value. `z + 1` and `-1` are the initial sentinels for `l`
/// and `u`.
pub type Bound = i64;

#[derive(Debug, Error)]
pub enum PropagateError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("grammar is not in strict CNF (production #{0}); use the epsilon-extended propagator or normalize first")]
    NotStrictCnf(usize),
    #[error("grammar contains a non-CNF recursive production (#{0}); normalize it first")]
    NotNormalized(usize),
    #[error("budget must be non-negative, got {0}")]
    NegativeBudget(Bound),
    #[error("the variable sequence is empty")]
    EmptySequence,
    #[error("domain of X{0} mentions terminals outside the grammar alphabet")]
    AlphabetMismatch(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Propagation {
    /// Domain-consistent domains and the minimum derivation weight over
    /// them, `l[1,n,S]`.
    Pruned { domains: DomainStore, root_min: Bound },
    Infeasible,
}

impl Propagation {
    pub fn domains(&self) -> Option<&DomainStore> {
        match self {
            Propagation::Pruned { domains, .. } => Some(domains),
            Propagation::Infeasible => None,
        }
    }

    pub fn root_min(&self) -> Option<Bound> {
        match self {
            Propagation::Pruned { root_min, .. } => Some(*root_min),
            Propagation::Infeasible => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Propagation::Infeasible)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    /// `A ∈ V[i,j]`: some derivation of the span from `A` fits in `z`.
    pub member: bool,
    pub l: Bound,
    pub u: Bound,
    pub marked: bool,
}

/// Triangular table indexed by start position `i` (1-based), span length
/// `j`, and nonterminal.
#[derive(Clone, Debug)]
pub struct Chart {
    n: usize,
    nts: usize,
    z: Bound,
    epsilon: bool,
    cells: Vec<Cell>,
}

impl Chart {
    fn new(n: usize, nts: usize, z: Bound, epsilon: bool) -> Self {
        let init = Cell { member: false, l: z + 1, u: -1, marked: false };
        Chart { n, nts, z, epsilon, cells: vec![init; (n + 1) * (n + 1) * nts] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, a: usize) -> usize {
        debug_assert!(i >= 1 && i + j <= self.n + 1 && a < self.nts);
        ((i - 1) * (self.n + 1) + j) * self.nts + a
    }

    #[inline]
    fn at(&self, i: usize, j: usize, a: usize) -> &Cell {
        &self.cells[self.idx(i, j, a)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize, a: usize) -> &mut Cell {
        let k = self.idx(i, j, a);
        &mut self.cells[k]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn z(&self) -> Bound {
        self.z
    }

    pub fn num_nonterminals(&self) -> usize {
        self.nts
    }

    /// Smallest span length stored: 0 for epsilon-extended charts.
    pub fn min_span(&self) -> usize {
        if self.epsilon { 0 } else { 1 }
    }

    /// Cell `(i, j, A)`, or `None` outside the table.
    pub fn get(&self, i: usize, j: usize, a: NonTerminal) -> Option<&Cell> {
        let valid = i >= 1 && j >= self.min_span() && i + j <= self.n + 1 && a.index() < self.nts;
        valid.then(|| self.at(i, j, a.index()))
    }

    /// Panicking variant of [`Chart::get`].
    pub fn cell(&self, i: usize, j: usize, a: NonTerminal) -> &Cell {
        self.get(i, j, a).unwrap_or_else(|| panic!("cell ({i},{j},{a:?}) out of range"))
    }

    pub fn is_member(&self, i: usize, j: usize, a: NonTerminal) -> bool {
        self.get(i, j, a).is_some_and(|c| c.member)
    }

    /// One line per cell, `V[i][j] = {A: l=.., u=.., marked; ...}`, listing
    /// members only, ordered by span length then start.
    pub fn dump(&self, symbols: &SymbolTable) -> String {
        let mut out = String::new();
        for j in self.min_span()..=self.n {
            for i in 1..=self.n + 1 - j {
                let entries: Vec<String> = (0..self.nts)
                    .filter_map(|a| {
                        let c = self.at(i, j, a);
                        c.member.then(|| {
                            let name = symbols.nonterminal_name(NonTerminal(a as u16));
                            let mark = if c.marked { ", marked" } else { "" };
                            format!("{name}: l={}, u={}{mark}", c.l, c.u)
                        })
                    })
                    .collect();
                let _ = writeln!(out, "V[{i}][{j}] = {{{}}}", entries.join("; "));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct BinaryRule {
    lhs: usize,
    left: usize,
    right: usize,
    weight: Bound,
    prod: usize,
    restricted: bool,
}

#[derive(Clone, Copy, Debug)]
struct UnaryRule {
    lhs: usize,
    weight: Bound,
    prod: usize,
    restricted: bool,
}

/// A grammar indexed for chart propagation. Immutable and shareable across
/// threads once built.
#[derive(Clone, Debug)]
pub struct WcykPropagator {
    grammar: WeightedGrammar,
    binary: Vec<BinaryRule>,
    binary_by_lhs: Vec<Vec<usize>>,
    lexical: Vec<Vec<UnaryRule>>,
    epsilon: Vec<UnaryRule>,
    epsilon_mode: bool,
}

impl WcykPropagator {
    /// Propagator for a strict-CNF grammar.
    pub fn new(grammar: &WeightedGrammar) -> Result<Self, PropagateError> {
        Self::build(grammar, false)
    }

    /// Propagator over the epsilon-extended chart. Accepts CNF grammars with
    /// or without epsilon productions.
    pub fn with_epsilon(grammar: &WeightedGrammar) -> Result<Self, PropagateError> {
        Self::build(grammar, true)
    }

    fn build(grammar: &WeightedGrammar, allow_epsilon: bool) -> Result<Self, PropagateError> {
        let ds = validate(grammar);
        if !ds.is_empty() {
            return Err(GrammarError::Invalid(ds).into());
        }
        let mut binary = Vec::new();
        let mut binary_by_lhs = vec![Vec::new(); grammar.num_nonterminals()];
        let mut lexical = vec![Vec::new(); grammar.num_terminals()];
        let mut epsilon = Vec::new();
        for (prod, p) in grammar.productions.iter().enumerate() {
            let lhs = p.lhs.index();
            let weight = Bound::from(p.weight);
            let restricted = p.restriction.is_some();
            match p.rhs {
                Rhs::Binary(b, c) => {
                    binary_by_lhs[lhs].push(binary.len());
                    binary.push(BinaryRule {
                        lhs,
                        left: b.index(),
                        right: c.index(),
                        weight,
                        prod,
                        restricted,
                    });
                }
                Rhs::Terminal(t) => {
                    lexical[t.index()].push(UnaryRule { lhs, weight, prod, restricted })
                }
                Rhs::Epsilon if allow_epsilon => {
                    epsilon.push(UnaryRule { lhs, weight, prod, restricted })
                }
                Rhs::Epsilon => return Err(PropagateError::NotStrictCnf(prod)),
                Rhs::ExtLeftRec(..) | Rhs::ExtRightRec(..) => {
                    return Err(PropagateError::NotNormalized(prod))
                }
            }
        }
        Ok(WcykPropagator {
            grammar: grammar.clone(),
            binary,
            binary_by_lhs,
            lexical,
            epsilon,
            epsilon_mode: allow_epsilon,
        })
    }

    pub fn grammar(&self) -> &WeightedGrammar {
        &self.grammar
    }

    pub fn is_epsilon_mode(&self) -> bool {
        self.epsilon_mode
    }

    #[inline]
    fn applies(&self, prod: usize, restricted: bool, i: usize, j: usize) -> bool {
        !restricted || self.grammar.productions[prod].applies(i, j)
    }

    pub(crate) fn check_inputs(&self, z: Bound, domains: &DomainStore) -> Result<(), PropagateError> {
        if z < 0 {
            return Err(PropagateError::NegativeBudget(z));
        }
        if domains.is_empty() {
            return Err(PropagateError::EmptySequence);
        }
        let alphabet = TermSet::full(self.grammar.num_terminals());
        if let Some((i, _)) = domains.iter().find(|(_, d)| !d.is_subset(alphabet)) {
            return Err(PropagateError::AlphabetMismatch(i));
        }
        Ok(())
    }

    /// Lower bounds `l` and membership `V` for every cell.
    pub fn upward_pass(&self, z: Bound, domains: &DomainStore) -> Chart {
        let n = domains.len();
        let nts = self.grammar.num_nonterminals();
        let mut chart = Chart::new(n, nts, z, self.epsilon_mode);
        let cap = z + 1;

        if self.epsilon_mode {
            for i in 1..=n + 1 {
                self.epsilon_cell(&mut chart, i);
            }
        }
        for j in 1..=n {
            for i in 1..=n + 1 - j {
                if j == 1 {
                    for t in domains.get(i).iter() {
                        for r in &self.lexical[t.index()] {
                            if self.applies(r.prod, r.restricted, i, 1) {
                                let c = chart.at_mut(i, 1, r.lhs);
                                c.l = c.l.min(r.weight.min(cap));
                            }
                        }
                    }
                } else {
                    for r in &self.binary {
                        if !self.applies(r.prod, r.restricted, i, j) {
                            continue;
                        }
                        for k in 1..j {
                            let lb = chart.at(i, k, r.left).l;
                            if lb > z {
                                continue;
                            }
                            let lc = chart.at(i + k, j - k, r.right).l;
                            if lc > z {
                                continue;
                            }
                            let c = chart.at_mut(i, j, r.lhs);
                            c.l = c.l.min((r.weight + lb + lc).min(cap));
                        }
                    }
                }
                if self.epsilon_mode {
                    self.unit_closure_up(&mut chart, i, j);
                }
                for a in 0..nts {
                    let c = chart.at_mut(i, j, a);
                    c.member = c.l <= z;
                }
            }
        }
        chart
    }

    fn epsilon_cell(&self, chart: &mut Chart, i: usize) {
        let (z, cap) = (chart.z, chart.z + 1);
        for r in &self.epsilon {
            if self.applies(r.prod, r.restricted, i, 0) {
                let c = chart.at_mut(i, 0, r.lhs);
                c.l = c.l.min(r.weight.min(cap));
            }
        }
        loop {
            let mut changed = false;
            for r in &self.binary {
                if !self.applies(r.prod, r.restricted, i, 0) {
                    continue;
                }
                let (lb, lc) = (chart.at(i, 0, r.left).l, chart.at(i, 0, r.right).l);
                if lb > z || lc > z {
                    continue;
                }
                let cand = (r.weight + lb + lc).min(cap);
                let c = chart.at_mut(i, 0, r.lhs);
                if cand < c.l {
                    c.l = cand;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for a in 0..chart.nts {
            let c = chart.at_mut(i, 0, a);
            c.member = c.l <= z;
        }
    }

    /// Splits `k = 0` and `k = j` of cell `(i, j)`: one child covers the
    /// empty span, the other the whole cell.
    fn unit_closure_up(&self, chart: &mut Chart, i: usize, j: usize) {
        let (z, cap) = (chart.z, chart.z + 1);
        loop {
            let mut changed = false;
            for r in &self.binary {
                if !self.applies(r.prod, r.restricted, i, j) {
                    continue;
                }
                let splits = [
                    (chart.at(i, 0, r.left).l, chart.at(i, j, r.right).l),
                    (chart.at(i, j, r.left).l, chart.at(i + j, 0, r.right).l),
                ];
                for (lb, lc) in splits {
                    if lb > z || lc > z {
                        continue;
                    }
                    let cand = (r.weight + lb + lc).min(cap);
                    let c = chart.at_mut(i, j, r.lhs);
                    if cand < c.l {
                        c.l = cand;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Marks and upper bounds `u`, top-down from `(1, n, S)`. Does nothing
    /// when the root is not a member.
    pub fn downward_pass(&self, chart: &mut Chart) {
        let n = chart.n;
        let start = self.grammar.start().index();
        if !chart.at(1, n, start).member {
            return;
        }
        let z = chart.z;
        {
            let root = chart.at_mut(1, n, start);
            root.marked = true;
            root.u = z;
        }
        for j in (1..=n).rev() {
            for i in 1..=n + 1 - j {
                if self.epsilon_mode {
                    self.unit_closure_down(chart, i, j);
                }
                if j < 2 {
                    continue;
                }
                for a in 0..chart.nts {
                    let parent = *chart.at(i, j, a);
                    if !parent.marked {
                        continue;
                    }
                    for &ri in &self.binary_by_lhs[a] {
                        let r = self.binary[ri];
                        if !self.applies(r.prod, r.restricted, i, j) {
                            continue;
                        }
                        for k in 1..j {
                            let b = *chart.at(i, k, r.left);
                            let c = *chart.at(i + k, j - k, r.right);
                            if !b.member || !c.member || r.weight + b.l + c.l > parent.u {
                                continue;
                            }
                            let bc = chart.at_mut(i, k, r.left);
                            bc.marked = true;
                            bc.u = bc.u.max(parent.u - c.l - r.weight);
                            let cc = chart.at_mut(i + k, j - k, r.right);
                            cc.marked = true;
                            cc.u = cc.u.max(parent.u - b.l - r.weight);
                        }
                    }
                }
            }
        }
    }

    fn unit_closure_down(&self, chart: &mut Chart, i: usize, j: usize) {
        loop {
            let mut changed = false;
            for a in 0..chart.nts {
                let parent = *chart.at(i, j, a);
                if !parent.marked {
                    continue;
                }
                for &ri in &self.binary_by_lhs[a] {
                    let r = self.binary[ri];
                    if !self.applies(r.prod, r.restricted, i, j) {
                        continue;
                    }
                    // (left span, right span) for k = 0 and k = j
                    let splits = [((i, 0), (i, j)), ((i, j), (i + j, 0))];
                    for ((bi, bj), (ci, cj)) in splits {
                        let b = *chart.at(bi, bj, r.left);
                        let c = *chart.at(ci, cj, r.right);
                        if !b.member || !c.member || r.weight + b.l + c.l > parent.u {
                            continue;
                        }
                        for (pos, span, nt, sibling_l) in
                            [(bi, bj, r.left, c.l), (ci, cj, r.right, b.l)]
                        {
                            let cell = chart.at_mut(pos, span, nt);
                            let u = parent.u - sibling_l - r.weight;
                            if !cell.marked || u > cell.u {
                                cell.marked = true;
                                cell.u = cell.u.max(u);
                                changed |= span == j;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Keeps `a ∈ D(X_i)` iff some production `A -> a` applies at `(i, 1)`
    /// with `(i, 1, A)` marked and `W[A -> a] <= u[i,1,A]`.
    pub fn prune_domains(&self, chart: &Chart, domains: &DomainStore) -> DomainStore {
        let mut out = domains.clone();
        for (i, d) in domains.iter() {
            let kept: TermSet = d
                .iter()
                .filter(|t| {
                    self.lexical[t.index()].iter().any(|r| {
                        let c = chart.at(i, 1, r.lhs);
                        self.applies(r.prod, r.restricted, i, 1) && c.marked && r.weight <= c.u
                    })
                })
                .collect();
            out.set(i, kept);
        }
        out
    }

    /// Runs both passes and prunes. Infeasible when the root is not a
    /// member, i.e. when no derivation over the domains fits in `z`.
    pub fn propagate(&self, z: Bound, domains: &DomainStore) -> Result<Propagation, PropagateError> {
        Ok(self.propagate_with_chart(z, domains)?.0)
    }

    /// As [`WcykPropagator::propagate`], also returning the chart.
    pub fn propagate_with_chart(
        &self,
        z: Bound,
        domains: &DomainStore,
    ) -> Result<(Propagation, Chart), PropagateError> {
        self.check_inputs(z, domains)?;
        let mut chart = self.upward_pass(z, domains);
        if domains.is_failed() {
            return Ok((Propagation::Infeasible, chart));
        }
        let n = domains.len();
        let root = *chart.at(1, n, self.grammar.start().index());
        if !root.member {
            return Ok((Propagation::Infeasible, chart));
        }
        self.downward_pass(&mut chart);
        let pruned = self.prune_domains(&chart, domains);
        debug_assert!(!pruned.is_failed());
        Ok((Propagation::Pruned { domains: pruned, root_min: root.l }, chart))
    }
}

/// One-shot monolithic propagation over a strict-CNF grammar.
pub fn propagate(
    grammar: &WeightedGrammar,
    z: Bound,
    domains: &DomainStore,
) -> Result<Propagation, PropagateError> {
    WcykPropagator::new(grammar)?.propagate(z, domains)
}

pub fn upward_pass(
    grammar: &WeightedGrammar,
    z: Bound,
    domains: &DomainStore,
) -> Result<Chart, PropagateError> {
    let p = WcykPropagator::new(grammar)?;
    p.check_inputs(z, domains)?;
    Ok(p.upward_pass(z, domains))
}

pub fn downward_pass(grammar: &WeightedGrammar, chart: &mut Chart) -> Result<(), PropagateError> {
    WcykPropagator::new(grammar)?.downward_pass(chart);
    Ok(())
}

pub fn prune_domains(
    grammar: &WeightedGrammar,
    chart: &Chart,
    domains: &DomainStore,
) -> Result<DomainStore, PropagateError> {
    Ok(WcykPropagator::new(grammar)?.prune_domains(chart, domains))
}
