//! Weighted context-free grammars in Chomsky normal form.
//!
//! A [`WeightedGrammar`] owns its symbol table and a flat list of
//! productions. Besides the two CNF shapes (`A -> B C`, `A -> 'a'`) it can
//! carry epsilon productions and the two recursive insertion shapes
//! (`A -> A 'a'`, `A -> 'a' A`) produced by the edit-distance encoding;
//! [`normalize`] rewrites the latter into CNF.

mod parse;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::{parse_grammar, ParseError};

/// Production weight. Weights are non-negative by construction.
pub type Weight = u32;

/// Maximum alphabet size; domains are stored as 64-bit sets.
pub const MAX_TERMINALS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Terminal(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NonTerminal(pub u16);

impl Terminal {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl NonTerminal {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolTable {
    pub terminals: Vec<String>,
    pub nonterminals: Vec<String>,
    pub start: NonTerminal,
}

impl SymbolTable {
    pub fn terminal_name(&self, t: Terminal) -> &str {
        self.terminals.get(t.index()).map_or("?", String::as_str)
    }

    pub fn nonterminal_name(&self, a: NonTerminal) -> &str {
        self.nonterminals.get(a.index()).map_or("?", String::as_str)
    }

    pub fn terminal(&self, name: &str) -> Option<Terminal> {
        self.terminals.iter().position(|t| t == name).map(|i| Terminal(i as u16))
    }

    pub fn nonterminal(&self, name: &str) -> Option<NonTerminal> {
        self.nonterminals.iter().position(|t| t == name).map(|i| NonTerminal(i as u16))
    }

    pub fn num_terminals(&self) -> usize {
        self.terminals.len()
    }

    pub fn num_nonterminals(&self) -> usize {
        self.nonterminals.len()
    }
}

/// Named set of admissible start positions, 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PositionMask {
    pub name: String,
    pub allowed: Vec<bool>,
}

impl PositionMask {
    pub fn allows(&self, i: usize) -> bool {
        i >= 1 && self.allowed.get(i - 1).copied().unwrap_or(false)
    }
}

/// Span predicate `f(i, j)`: an interval on the span length `j` and an
/// optional mask on the start position `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Restriction {
    pub min_len: usize,
    pub max_len: Option<usize>,
    pub mask: Option<Arc<PositionMask>>,
}

impl Restriction {
    pub fn span(min_len: usize, max_len: Option<usize>) -> Self {
        Restriction { min_len, max_len, mask: None }
    }

    pub fn mask(mask: Arc<PositionMask>) -> Self {
        Restriction { min_len: 0, max_len: None, mask: Some(mask) }
    }

    pub fn with_mask(mut self, mask: Arc<PositionMask>) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn holds(&self, i: usize, j: usize) -> bool {
        j >= self.min_len
            && self.max_len.is_none_or(|hi| j <= hi)
            && self.mask.as_ref().is_none_or(|m| m.allows(i))
    }

    pub(crate) fn has_span_bounds(&self) -> bool {
        self.min_len > 0 || self.max_len.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rhs {
    Binary(NonTerminal, NonTerminal),
    Terminal(Terminal),
    Epsilon,
    /// `A -> A 'a'`
    ExtLeftRec(NonTerminal, Terminal),
    /// `A -> 'a' A`
    ExtRightRec(Terminal, NonTerminal),
}

impl Rhs {
    fn is_cnf(self) -> bool {
        matches!(self, Rhs::Binary(..) | Rhs::Terminal(_))
    }

    fn is_extended(self) -> bool {
        matches!(self, Rhs::ExtLeftRec(..) | Rhs::ExtRightRec(..))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Production {
    pub lhs: NonTerminal,
    pub rhs: Rhs,
    pub weight: Weight,
    pub restriction: Option<Restriction>,
}

impl Production {
    pub fn new(lhs: NonTerminal, rhs: Rhs, weight: Weight) -> Self {
        Production { lhs, rhs, weight, restriction: None }
    }

    pub fn restricted(mut self, restriction: Restriction) -> Self {
        self.restriction = Some(restriction);
        self
    }

    /// Whether the production may be used on the span starting at `i` with
    /// length `j`.
    pub fn applies(&self, i: usize, j: usize) -> bool {
        self.restriction.as_ref().is_none_or(|r| r.holds(i, j))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GrammarFlags {
    pub strict_cnf: bool,
    pub has_epsilon: bool,
    /// Set on grammars produced by a soft encoding.
    pub soft_encoded: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedGrammar {
    pub symbols: SymbolTable,
    pub productions: Vec<Production>,
    pub flags: GrammarFlags,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    EmptyAlphabet,
    NoNonterminals,
    TooManyTerminals(usize),
    DuplicateSymbol(String),
    OverlappingSymbol(String),
    UnknownStart,
    UnknownNonterminal(u16),
    UnknownTerminal(u16),
    EpsilonInStrictCnf,
    ExtendedInStrictCnf,
    UndeclaredEpsilon,
    DuplicateProduction { first: usize },
    ZeroWeightEpsilonCycle(String),
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticKind::EmptyAlphabet => write!(f, "empty terminal alphabet"),
            DiagnosticKind::NoNonterminals => write!(f, "no nonterminals declared"),
            DiagnosticKind::TooManyTerminals(n) => {
                write!(f, "{n} terminals exceeds the limit of {MAX_TERMINALS}")
            }
            DiagnosticKind::DuplicateSymbol(s) => write!(f, "symbol `{s}` declared twice"),
            DiagnosticKind::OverlappingSymbol(s) => {
                write!(f, "`{s}` is both a terminal and a nonterminal")
            }
            DiagnosticKind::UnknownStart => write!(f, "unknown start symbol"),
            DiagnosticKind::UnknownNonterminal(i) => write!(f, "unknown nonterminal #{i}"),
            DiagnosticKind::UnknownTerminal(i) => write!(f, "unknown terminal #{i}"),
            DiagnosticKind::EpsilonInStrictCnf => write!(f, "Epsilon production in strict CNF"),
            DiagnosticKind::ExtendedInStrictCnf => {
                write!(f, "non-CNF recursive production in strict CNF")
            }
            DiagnosticKind::UndeclaredEpsilon => {
                write!(f, "epsilon production in a grammar not flagged has_epsilon")
            }
            DiagnosticKind::DuplicateProduction { first } => {
                write!(f, "duplicate of production #{first}")
            }
            DiagnosticKind::ZeroWeightEpsilonCycle(a) => {
                write!(f, "`{a}` lies on a zero-weight cycle through nullable symbols")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    /// Index of the offending production, if the problem is local to one.
    pub production: Option<usize>,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.production {
            Some(p) => write!(f, "production #{p}: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("invalid grammar: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

fn join_diagnostics(ds: &[Diagnostic]) -> String {
    ds.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl WeightedGrammar {
    /// Builds a grammar, merging duplicate productions (keeping the minimum
    /// weight) and inferring flags from the production shapes.
    pub fn new(symbols: SymbolTable, productions: Vec<Production>) -> Self {
        let mut g = WeightedGrammar {
            symbols,
            productions: merge_duplicates(productions),
            flags: GrammarFlags::default(),
        };
        g.recompute_flags();
        g
    }

    pub fn recompute_flags(&mut self) {
        self.flags.strict_cnf = self.productions.iter().all(|p| p.rhs.is_cnf());
        self.flags.has_epsilon = self.productions.iter().any(|p| p.rhs == Rhs::Epsilon);
    }

    pub fn start(&self) -> NonTerminal {
        self.symbols.start
    }

    pub fn num_terminals(&self) -> usize {
        self.symbols.num_terminals()
    }

    pub fn num_nonterminals(&self) -> usize {
        self.symbols.num_nonterminals()
    }

    /// Whether any production outside CNF is present, including epsilon.
    pub fn is_cnf(&self) -> bool {
        self.productions.iter().all(|p| p.rhs.is_cnf())
    }

    pub fn has_restrictions(&self) -> bool {
        self.productions.iter().any(|p| p.restriction.is_some())
    }

    pub fn has_production(&self, lhs: NonTerminal, rhs: Rhs) -> bool {
        self.productions.iter().any(|p| p.lhs == lhs && p.rhs == rhs)
    }

    /// Largest production weight, 0 for an empty grammar.
    pub fn max_weight(&self) -> Weight {
        self.productions.iter().map(|p| p.weight).max().unwrap_or(0)
    }

    /// Parses the line-oriented grammar format.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_grammar(text)
    }

    /// Validates and returns the grammar unchanged, or the diagnostics.
    pub fn checked(self) -> Result<Self, GrammarError> {
        let ds = validate(&self);
        if ds.is_empty() {
            Ok(self)
        } else {
            Err(GrammarError::Invalid(ds))
        }
    }

    pub fn display_production(&self, p: &Production) -> String {
        parse::format_production(self, p)
    }
}

impl fmt::Display for WeightedGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        parse::write_grammar(self, f)
    }
}

type ProductionKey = (NonTerminal, Rhs, Option<Restriction>);

fn merge_duplicates(productions: Vec<Production>) -> Vec<Production> {
    let mut seen: HashMap<ProductionKey, usize> = HashMap::new();
    let mut out: Vec<Production> = Vec::with_capacity(productions.len());
    for p in productions {
        let key = (p.lhs, p.rhs, p.restriction.clone());
        match seen.get(&key) {
            Some(&idx) => out[idx].weight = out[idx].weight.min(p.weight),
            None => {
                seen.insert(key, out.len());
                out.push(p);
            }
        }
    }
    out
}

/// Checks the grammar against the invariants implied by its flags. An empty
/// result means the grammar is usable.
pub fn validate(grammar: &WeightedGrammar) -> Vec<Diagnostic> {
    let mut ds = Vec::new();
    let global = |kind| Diagnostic { production: None, kind };
    let syms = &grammar.symbols;

    if syms.terminals.is_empty() {
        ds.push(global(DiagnosticKind::EmptyAlphabet));
    }
    if syms.terminals.len() > MAX_TERMINALS {
        ds.push(global(DiagnosticKind::TooManyTerminals(syms.terminals.len())));
    }
    if syms.nonterminals.is_empty() {
        ds.push(global(DiagnosticKind::NoNonterminals));
    }
    let mut names = HashSet::new();
    for t in &syms.terminals {
        if !names.insert(t.as_str()) {
            ds.push(global(DiagnosticKind::DuplicateSymbol(t.clone())));
        }
    }
    let terminal_names = names;
    let mut nt_names = HashSet::new();
    for a in &syms.nonterminals {
        if !nt_names.insert(a.as_str()) {
            ds.push(global(DiagnosticKind::DuplicateSymbol(a.clone())));
        }
        if terminal_names.contains(a.as_str()) {
            ds.push(global(DiagnosticKind::OverlappingSymbol(a.clone())));
        }
    }
    if syms.start.index() >= syms.nonterminals.len() {
        ds.push(global(DiagnosticKind::UnknownStart));
    }

    let nt_ok = |a: NonTerminal| a.index() < syms.nonterminals.len();
    let t_ok = |t: Terminal| t.index() < syms.terminals.len();
    let mut seen: HashMap<ProductionKey, usize> = HashMap::new();
    let mut symbols_ok = true;
    for (idx, p) in grammar.productions.iter().enumerate() {
        let local = |kind| Diagnostic { production: Some(idx), kind };
        let (nts, ts): (Vec<NonTerminal>, Vec<Terminal>) = match p.rhs {
            Rhs::Binary(b, c) => (vec![p.lhs, b, c], vec![]),
            Rhs::Terminal(t) => (vec![p.lhs], vec![t]),
            Rhs::Epsilon => (vec![p.lhs], vec![]),
            Rhs::ExtLeftRec(b, t) | Rhs::ExtRightRec(t, b) => (vec![p.lhs, b], vec![t]),
        };
        for a in nts.into_iter().filter(|&a| !nt_ok(a)) {
            symbols_ok = false;
            ds.push(local(DiagnosticKind::UnknownNonterminal(a.0)));
        }
        for t in ts.into_iter().filter(|&t| !t_ok(t)) {
            symbols_ok = false;
            ds.push(local(DiagnosticKind::UnknownTerminal(t.0)));
        }
        if grammar.flags.strict_cnf {
            if p.rhs == Rhs::Epsilon {
                ds.push(local(DiagnosticKind::EpsilonInStrictCnf));
            } else if p.rhs.is_extended() {
                ds.push(local(DiagnosticKind::ExtendedInStrictCnf));
            }
        }
        if p.rhs == Rhs::Epsilon && !grammar.flags.has_epsilon && !grammar.flags.strict_cnf {
            ds.push(local(DiagnosticKind::UndeclaredEpsilon));
        }
        let key = (p.lhs, p.rhs, p.restriction.clone());
        if let Some(&first) = seen.get(&key) {
            ds.push(local(DiagnosticKind::DuplicateProduction { first }));
        } else {
            seen.insert(key, idx);
        }
    }

    if symbols_ok && grammar.productions.iter().any(|p| p.rhs == Rhs::Epsilon) {
        for a in zero_weight_nullable_cycles(grammar) {
            ds.push(global(DiagnosticKind::ZeroWeightEpsilonCycle(
                syms.nonterminal_name(a).to_string(),
            )));
        }
    }
    ds
}

/// Cheapest epsilon derivation per nonterminal (`None` if not nullable).
/// Restrictions are ignored, so this over-approximates nullability.
pub fn nullable_weights(grammar: &WeightedGrammar) -> Vec<Option<u64>> {
    let mut eps: Vec<Option<u64>> = vec![None; grammar.num_nonterminals()];
    loop {
        let mut changed = false;
        for p in &grammar.productions {
            let cand = match p.rhs {
                Rhs::Epsilon => Some(p.weight as u64),
                Rhs::Binary(b, c) => match (eps[b.index()], eps[c.index()]) {
                    (Some(x), Some(y)) => Some(p.weight as u64 + x + y),
                    _ => None,
                },
                _ => None,
            };
            if let Some(c) = cand {
                let slot = &mut eps[p.lhs.index()];
                if slot.is_none_or(|old| c < old) {
                    *slot = Some(c);
                    changed = true;
                }
            }
        }
        if !changed {
            return eps;
        }
    }
}

/// Nonterminals on a cycle of zero-cost unit-like steps `A => B`, where
/// `A -> B C` or `A -> C B` has weight 0 and `C` derives epsilon at weight 0.
fn zero_weight_nullable_cycles(grammar: &WeightedGrammar) -> Vec<NonTerminal> {
    let eps = nullable_weights(grammar);
    let n = grammar.num_nonterminals();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in &grammar.productions {
        if let Rhs::Binary(b, c) = p.rhs {
            if p.weight != 0 {
                continue;
            }
            if eps[c.index()] == Some(0) {
                succ[p.lhs.index()].push(b.index());
            }
            if eps[b.index()] == Some(0) {
                succ[p.lhs.index()].push(c.index());
            }
        }
    }
    // A lies on a cycle iff A is reachable from one of its successors.
    (0..n)
        .filter(|&a| {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = succ[a].clone();
            while let Some(x) = stack.pop() {
                if x == a {
                    return true;
                }
                if !std::mem::replace(&mut seen[x], true) {
                    stack.extend(&succ[x]);
                }
            }
            false
        })
        .map(|a| NonTerminal(a as u16))
        .collect()
}

/// Rewrites `A -> A 'a'` and `A -> 'a' A` into CNF binaries through fresh
/// preterminals `T_a -> 'a'` of weight 0. The original weight and
/// restriction stay on the binary production. Grammars without recursive
/// insertion productions come back unchanged (modulo flag recomputation).
pub fn normalize(grammar: &WeightedGrammar) -> Result<WeightedGrammar, GrammarError> {
    let ds: Vec<Diagnostic> = validate(grammar)
        .into_iter()
        .filter(|d| {
            matches!(
                d.kind,
                DiagnosticKind::UnknownNonterminal(_)
                    | DiagnosticKind::UnknownTerminal(_)
                    | DiagnosticKind::UnknownStart
                    | DiagnosticKind::TooManyTerminals(_)
            )
        })
        .collect();
    if !ds.is_empty() {
        return Err(GrammarError::Invalid(ds));
    }

    let mut symbols = grammar.symbols.clone();
    let mut preterminals: BTreeMap<Terminal, NonTerminal> = BTreeMap::new();
    let mut out = Vec::with_capacity(grammar.productions.len());
    let mut fresh = Vec::new();
    let mut preterminal = |t: Terminal, symbols: &mut SymbolTable| -> NonTerminal {
        *preterminals.entry(t).or_insert_with(|| {
            let base = format!("T_{}", symbols.terminal_name(t));
            let mut name = base.clone();
            let mut suffix = 1;
            while symbols.nonterminal(&name).is_some() || symbols.terminal(&name).is_some() {
                name = format!("{base}_{suffix}");
                suffix += 1;
            }
            symbols.nonterminals.push(name);
            let nt = NonTerminal((symbols.nonterminals.len() - 1) as u16);
            fresh.push(Production::new(nt, Rhs::Terminal(t), 0));
            nt
        })
    };
    for p in &grammar.productions {
        let rhs = match p.rhs {
            Rhs::ExtLeftRec(b, t) => Rhs::Binary(b, preterminal(t, &mut symbols)),
            Rhs::ExtRightRec(t, b) => Rhs::Binary(preterminal(t, &mut symbols), b),
            other => other,
        };
        out.push(Production { rhs, ..p.clone() });
    }
    out.extend(fresh);
    let mut g = WeightedGrammar {
        symbols,
        productions: merge_duplicates(out),
        flags: grammar.flags,
    };
    g.recompute_flags();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g0() -> WeightedGrammar {
        WeightedGrammar::parse(
            "terminals: a b\nnonterminals: S A B\nstart: S\n\
             S -> A B @ 0\nA -> 'a' @ 1\nB -> 'b' @ 2\n",
        )
        .unwrap()
    }

    #[test]
    fn g0_is_valid() {
        let g = g0();
        assert!(g.flags.strict_cnf);
        assert_eq!(validate(&g), vec![]);
    }

    #[test]
    fn epsilon_in_strict_cnf_is_reported() {
        let mut g = WeightedGrammar::parse(
            "terminals: a\nnonterminals: S\nstart: S\nS -> eps @ 1\n",
        )
        .unwrap();
        g.flags.strict_cnf = true;
        let ds = validate(&g);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].production, Some(0));
        assert_eq!(ds[0].kind.to_string(), "Epsilon production in strict CNF");
    }

    #[test]
    fn unknown_start_is_reported() {
        let mut g = g0();
        g.symbols.start = NonTerminal(7);
        let ds = validate(&g);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].kind.to_string(), "unknown start symbol");
    }

    #[test]
    fn overlapping_and_unknown_symbols() {
        let mut g = g0();
        g.symbols.nonterminals.push("a".into());
        g.productions.push(Production::new(NonTerminal(0), Rhs::Terminal(Terminal(9)), 0));
        let kinds: Vec<_> = validate(&g).into_iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&DiagnosticKind::OverlappingSymbol("a".into())));
        assert!(kinds.contains(&DiagnosticKind::UnknownTerminal(9)));
    }

    #[test]
    fn duplicates_merge_to_min_weight() {
        let g = WeightedGrammar::parse(
            "terminals: a\nnonterminals: S\nstart: S\nS -> 'a' @ 4\nS -> 'a' @ 2\n",
        )
        .unwrap();
        assert_eq!(g.productions.len(), 1);
        assert_eq!(g.productions[0].weight, 2);
    }

    #[test]
    fn zero_weight_nullable_cycle_rejected() {
        let g = WeightedGrammar::parse(
            "terminals: a\nnonterminals: S A\nstart: S\n\
             S -> S A @ 0\nA -> eps @ 0\nS -> 'a'\n",
        )
        .unwrap();
        let kinds: Vec<_> = validate(&g).into_iter().map(|d| d.kind).collect();
        assert_eq!(kinds, vec![DiagnosticKind::ZeroWeightEpsilonCycle("S".into())]);

        // Unit-weight deletions are fine.
        let g = WeightedGrammar::parse(
            "terminals: a\nnonterminals: S A\nstart: S\n\
             S -> S A @ 0\nA -> eps @ 1\nS -> 'a'\n",
        )
        .unwrap();
        assert_eq!(validate(&g), vec![]);
    }

    #[test]
    fn normalize_left_recursion() {
        let g = WeightedGrammar::parse(
            "terminals: a\nnonterminals: A\nstart: A\nA -> A 'a' @ 1\n",
        )
        .unwrap();
        let n = normalize(&g).unwrap();
        assert_eq!(n.symbols.nonterminals, vec!["A", "T_a"]);
        let ta = NonTerminal(1);
        assert_eq!(
            n.productions,
            vec![
                Production::new(NonTerminal(0), Rhs::Binary(NonTerminal(0), ta), 1),
                Production::new(ta, Rhs::Terminal(Terminal(0)), 0),
            ]
        );
        assert!(n.flags.strict_cnf);
        assert_eq!(validate(&n), vec![]);
    }

    #[test]
    fn normalize_without_ext_is_identity() {
        let g = g0();
        assert_eq!(normalize(&g).unwrap(), g);
    }

    #[test]
    fn normalize_picks_fresh_names() {
        let g = WeightedGrammar::parse(
            "terminals: a\nnonterminals: A T_a\nstart: A\nA -> 'a' A @ 1\nT_a -> 'a'\n",
        )
        .unwrap();
        let n = normalize(&g).unwrap();
        assert_eq!(n.symbols.nonterminals, vec!["A", "T_a", "T_a_1"]);
        assert!(n.has_production(NonTerminal(0), Rhs::Binary(NonTerminal(2), NonTerminal(0))));
    }

    #[test]
    fn restriction_holds() {
        let mask = Arc::new(PositionMask { name: "open".into(), allowed: vec![true, false] });
        let r = Restriction::span(2, Some(3)).with_mask(mask);
        assert!(r.holds(1, 2));
        assert!(!r.holds(2, 2));
        assert!(!r.holds(1, 4));
        assert!(!r.holds(3, 2));
    }
}
