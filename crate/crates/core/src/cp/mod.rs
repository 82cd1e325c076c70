//! A small finite-domain kernel: sequence rows over a grammar alphabet,
//! integer cost variables, Booleans, and copy-based branch and bound.
//!
//! A [`Model`] is a declarative description. [`solve_min`] compiles it into
//! propagators and searches depth first, copying the whole state at every
//! choice point.

mod search;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::domain::{DomainStore, TermSet};
use crate::grammar::{validate, Rhs, Terminal, WeightedGrammar};
use crate::decomposition;
use crate::wcyk::{self, Bound, PropagateError, Propagation, WcykPropagator};

pub use search::{
    propagate_root, solve_min, solve_min_with, Improvement, RootState, SolveLog, SolveOptions, Solution, Status,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntVar(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoolVar(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IntDomain {
    pub lo: Bound,
    pub hi: Bound,
}

impl IntDomain {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }
}

/// Values a Boolean may still take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoolDomain {
    pub can_false: bool,
    pub can_true: bool,
}

impl BoolDomain {
    pub const ANY: BoolDomain = BoolDomain { can_false: true, can_true: true };

    pub fn fixed(v: bool) -> Self {
        BoolDomain { can_false: !v, can_true: v }
    }

    pub fn allows(&self, v: bool) -> bool {
        if v { self.can_true } else { self.can_false }
    }

    pub fn value(&self) -> Option<bool> {
        match (self.can_false, self.can_true) {
            (true, false) => Some(false),
            (false, true) => Some(true),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.can_false && !self.can_true
    }
}

/// Which propagator enforces a grammar constraint. All three prune the
/// same; they differ only in cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Monolithic,
    Decomposition,
    DecompositionWithEntailment,
}

impl Backend {
    pub const ALL: [Backend; 3] =
        [Backend::Monolithic, Backend::Decomposition, Backend::DecompositionWithEntailment];

    /// Short name used on the command line and in reports.
    pub fn short(&self) -> &'static str {
        match self {
            Backend::Monolithic => "m",
            Backend::Decomposition => "d",
            Backend::DecompositionWithEntailment => "de",
        }
    }

    /// One-shot propagation of `WCFG(grammar, z)`. Grammars with epsilon
    /// productions run on the epsilon-extended chart, monolithic only.
    pub fn propagate(
        self,
        grammar: &WeightedGrammar,
        z: Bound,
        domains: &DomainStore,
    ) -> Result<Propagation, PropagateError> {
        let epsilon = grammar.productions.iter().any(|p| p.rhs == Rhs::Epsilon);
        match self {
            Backend::Monolithic if epsilon => WcykPropagator::with_epsilon(grammar)?.propagate(z, domains),
            Backend::Monolithic => wcyk::propagate(grammar, z, domains),
            b => decomposition::propagate(grammar, z, domains, b == Backend::DecompositionWithEntailment),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "m" | "monolithic" => Ok(Backend::Monolithic),
            "d" | "decomposition" => Ok(Backend::Decomposition),
            "de" | "decomposition-entailment" => Ok(Backend::DecompositionWithEntailment),
            _ => Err(format!("unknown backend `{s}` (expected m, d or de)")),
        }
    }
}

/// `WCFG(grammar, cost, row)`: the row is derivable with minimum weight at
/// most the value of `cost`.
#[derive(Clone, Debug)]
pub struct WcfgSpec {
    pub grammar: Arc<WeightedGrammar>,
    pub row: RowId,
    pub cost: IntVar,
    pub backend: Backend,
}

/// At least `required` of `vars` are true.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DemandSpec {
    pub vars: Vec<BoolVar>,
    pub required: usize,
}

/// `var <=> row[position] = value`, position 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelSpec {
    pub var: BoolVar,
    pub row: RowId,
    pub position: usize,
    pub value: Terminal,
}

#[derive(Clone, Debug)]
pub enum ConstraintSpec {
    Wcfg(WcfgSpec),
    Demand(DemandSpec),
    Channel(ChannelSpec),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown {kind} variable #{index}")]
    UnknownVariable { kind: &'static str, index: usize },
    #[error("position {position} outside row of length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("terminal #{0} outside the row alphabet")]
    UnknownTerminal(usize),
    #[error("grammar rejected: {0}")]
    InvalidGrammar(String),
    #[error("demand must be non-negative, got {0}")]
    NegativeDemand(i64),
    #[error("cost variable upper bound must be non-negative, got {0}")]
    NegativeCost(Bound),
    #[error("empty integer domain [{0}, {1}]")]
    EmptyDomain(Bound, Bound),
    #[error("the row has no positions")]
    EmptyRow,
    #[error("row alphabet has {row} terminals, grammar has {grammar}")]
    AlphabetMismatch { row: usize, grammar: usize },
}

#[derive(Clone, Debug)]
struct Row {
    domains: DomainStore,
    alphabet: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Model {
    rows: Vec<Row>,
    ints: Vec<IntDomain>,
    bools: Vec<BoolDomain>,
    constraints: Vec<ConstraintSpec>,
    objective: Vec<IntVar>,
}

impl Model {
    pub fn new() -> Self {
        Model::default()
    }

    /// A sequence variable over an alphabet of `alphabet` terminals.
    pub fn add_row(&mut self, domains: DomainStore, alphabet: usize) -> RowId {
        assert!(
            domains.as_slice().iter().all(|d| d.is_subset(TermSet::full(alphabet))),
            "row domain outside its alphabet"
        );
        self.rows.push(Row { domains, alphabet });
        RowId(self.rows.len() - 1)
    }

    pub fn add_int(&mut self, lo: Bound, hi: Bound) -> Result<IntVar, ModelError> {
        if lo > hi {
            return Err(ModelError::EmptyDomain(lo, hi));
        }
        self.ints.push(IntDomain { lo, hi });
        Ok(IntVar(self.ints.len() - 1))
    }

    pub fn add_bool(&mut self) -> BoolVar {
        self.bools.push(BoolDomain::ANY);
        BoolVar(self.bools.len() - 1)
    }

    fn push(&mut self, c: ConstraintSpec) -> ConstraintId {
        self.constraints.push(c);
        ConstraintId(self.constraints.len() - 1)
    }

    fn check_row(&self, row: RowId) -> Result<&Row, ModelError> {
        self.rows.get(row.0).ok_or(ModelError::UnknownVariable { kind: "row", index: row.0 })
    }

    fn check_int(&self, v: IntVar) -> Result<IntDomain, ModelError> {
        self.ints.get(v.0).copied().ok_or(ModelError::UnknownVariable { kind: "integer", index: v.0 })
    }

    fn check_bool(&self, v: BoolVar) -> Result<(), ModelError> {
        if v.0 < self.bools.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownVariable { kind: "Boolean", index: v.0 })
        }
    }

    /// Posts `WCFG(grammar, cost, row)`. Grammars with epsilon productions
    /// run on the epsilon-extended chart and require the monolithic
    /// backend; extended recursive forms must be normalized first.
    pub fn post_wcfg(
        &mut self,
        grammar: Arc<WeightedGrammar>,
        cost: IntVar,
        row: RowId,
        backend: Backend,
    ) -> Result<ConstraintId, ModelError> {
        let r = self.check_row(row)?;
        if r.domains.is_empty() {
            return Err(ModelError::EmptyRow);
        }
        if r.alphabet != grammar.num_terminals() {
            return Err(ModelError::AlphabetMismatch { row: r.alphabet, grammar: grammar.num_terminals() });
        }
        let dom = self.check_int(cost)?;
        if dom.hi < 0 {
            return Err(ModelError::NegativeCost(dom.hi));
        }
        let ds = validate(&grammar);
        if let Some(d) = ds.first() {
            return Err(ModelError::InvalidGrammar(d.to_string()));
        }
        if grammar.productions.iter().any(|p| matches!(p.rhs, Rhs::ExtLeftRec(..) | Rhs::ExtRightRec(..))) {
            return Err(ModelError::InvalidGrammar("extended recursive productions; normalize first".into()));
        }
        let epsilon = grammar.productions.iter().any(|p| p.rhs == Rhs::Epsilon);
        if epsilon && backend != Backend::Monolithic {
            return Err(ModelError::InvalidGrammar(
                "the decomposition needs a strict CNF grammar; use the monolithic backend".into(),
            ));
        }
        Ok(self.push(ConstraintSpec::Wcfg(WcfgSpec { grammar, row, cost, backend })))
    }

    /// `sum(vars) >= d + 1`.
    pub fn post_demand(&mut self, vars: Vec<BoolVar>, d: i64) -> Result<ConstraintId, ModelError> {
        if d < 0 {
            return Err(ModelError::NegativeDemand(d));
        }
        for &v in &vars {
            self.check_bool(v)?;
        }
        Ok(self.push(ConstraintSpec::Demand(DemandSpec { vars, required: d as usize + 1 })))
    }

    /// `var <=> row[position] = value`.
    pub fn channel(
        &mut self,
        var: BoolVar,
        row: RowId,
        position: usize,
        value: Terminal,
    ) -> Result<ConstraintId, ModelError> {
        self.check_bool(var)?;
        let r = self.check_row(row)?;
        if position == 0 || position > r.domains.len() {
            return Err(ModelError::PositionOutOfRange { position, len: r.domains.len() });
        }
        if value.index() >= r.alphabet {
            return Err(ModelError::UnknownTerminal(value.index()));
        }
        Ok(self.push(ConstraintSpec::Channel(ChannelSpec { var, row, position, value })))
    }

    /// Sets the objective to `sum(vars)`, minimized.
    pub fn minimize(&mut self, vars: Vec<IntVar>) -> Result<(), ModelError> {
        for &v in &vars {
            self.check_int(v)?;
        }
        self.objective = vars;
        Ok(())
    }

    /// Switches every grammar constraint to `backend`.
    pub fn set_backend(&mut self, backend: Backend) {
        for c in &mut self.constraints {
            if let ConstraintSpec::Wcfg(w) = c {
                w.backend = backend;
            }
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_ints(&self) -> usize {
        self.ints.len()
    }

    pub fn num_bools(&self) -> usize {
        self.bools.len()
    }

    pub fn row_domains(&self, row: RowId) -> &DomainStore {
        &self.rows[row.0].domains
    }

    pub fn row_alphabet(&self, row: RowId) -> usize {
        self.rows[row.0].alphabet
    }

    pub fn int_domain(&self, v: IntVar) -> IntDomain {
        self.ints[v.0]
    }

    pub fn bool_domain(&self, v: BoolVar) -> BoolDomain {
        self.bools[v.0]
    }

    pub fn constraints(&self) -> &[ConstraintSpec] {
        &self.constraints
    }

    pub fn objective(&self) -> &[IntVar] {
        &self.objective
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g0() -> Arc<WeightedGrammar> {
        Arc::new(
            WeightedGrammar::parse(
                "terminals: a b\nnonterminals: S A B\nstart: S\n\
                 S -> A B @ 0\nA -> 'a' @ 1\nB -> 'b' @ 2\n",
            )
            .unwrap(),
        )
    }

    #[test]
    fn declaration_errors() {
        let mut m = Model::new();
        let r = m.add_row(DomainStore::full(2, 2), 2);
        let z = m.add_int(0, 10).unwrap();
        assert!(m.post_wcfg(g0(), IntVar(7), r, Backend::Monolithic).is_err());
        assert!(m.post_wcfg(g0(), z, RowId(3), Backend::Monolithic).is_err());
        assert_eq!(m.post_demand(vec![], -1), Err(ModelError::NegativeDemand(-1)));
        let b = m.add_bool();
        assert!(matches!(m.channel(b, r, 3, Terminal(0)), Err(ModelError::PositionOutOfRange { .. })));
        assert!(m.channel(b, r, 1, Terminal(2)).is_err());
        assert!(m.add_int(3, 2).is_err());
        let neg = m.add_int(-5, -1).unwrap();
        assert_eq!(m.post_wcfg(g0(), neg, r, Backend::Monolithic), Err(ModelError::NegativeCost(-1)));
    }

    #[test]
    fn backend_names_round_trip() {
        for b in Backend::ALL {
            assert_eq!(b.short().parse::<Backend>().unwrap(), b);
        }
        assert!("x".parse::<Backend>().is_err());
    }
}
