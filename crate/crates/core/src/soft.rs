//! Soft grammar constraints: the assignment may be up to `z` edits away
//! from a string of the base language.
//!
//! Both encodings give every base production its own weight and add unit
//! weight productions that simulate edit operations, so the minimum
//! derivation weight of a string becomes its distance to the language (plus
//! base weights, zero in the usual case):
//!
//! * Hamming: `A -> b` for every `A` with a terminal production and every
//!   `b` it does not already produce (substitution).
//! * Edit: the substitutions, plus `A -> eps` (the language string has a
//!   symbol the assignment lacks), and `A -> A a`, `A -> a A` (the
//!   assignment has an extra symbol), for the same nonterminals and every
//!   terminal `a`. The result is normalized to CNF with epsilon and has to
//!   be propagated on the epsilon-extended chart.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::domain::DomainStore;
use crate::grammar::{normalize, validate, GrammarError, NonTerminal, Production, Rhs, Terminal, WeightedGrammar};
use crate::wcyk::{self, Bound, PropagateError, Propagation, WcykPropagator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Distance {
    Hamming,
    Edit,
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::Hamming => "hamming",
            Distance::Edit => "edit",
        })
    }
}

impl FromStr for Distance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hamming" => Ok(Distance::Hamming),
            "edit" => Ok(Distance::Edit),
            _ => Err(format!("unknown distance `{s}` (expected hamming or edit)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SoftError {
    #[error("base grammar must be strict CNF (production #{0} is not)")]
    NotCnf(usize),
    #[error("base grammar is already soft-encoded")]
    AlreadyEncoded,
    #[error("base grammar has restricted productions (#{0}); edits shift positions and lengths")]
    Restricted(usize),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Propagate(#[from] PropagateError),
}

fn check_base(base: &WeightedGrammar) -> Result<Vec<NonTerminal>, SoftError> {
    let ds = validate(base);
    if !ds.is_empty() {
        return Err(GrammarError::Invalid(ds).into());
    }
    if base.flags.soft_encoded {
        return Err(SoftError::AlreadyEncoded);
    }
    if let Some(i) = base.productions.iter().position(|p| !matches!(p.rhs, Rhs::Binary(..) | Rhs::Terminal(_))) {
        return Err(SoftError::NotCnf(i));
    }
    if let Some(i) = base.productions.iter().position(|p| p.restriction.is_some()) {
        return Err(SoftError::Restricted(i));
    }
    let mut lexical: Vec<NonTerminal> = base
        .productions
        .iter()
        .filter(|p| matches!(p.rhs, Rhs::Terminal(_)))
        .map(|p| p.lhs)
        .collect();
    lexical.sort();
    lexical.dedup();
    Ok(lexical)
}

fn substitutions(base: &WeightedGrammar, lexical: &[NonTerminal]) -> Vec<Production> {
    let mut out = Vec::new();
    for &a in lexical {
        for b in 0..base.num_terminals() {
            let rhs = Rhs::Terminal(Terminal(b as u16));
            if !base.has_production(a, rhs) {
                out.push(Production::new(a, rhs, 1));
            }
        }
    }
    out
}

/// Base productions plus unit-weight substitutions.
pub fn hamming_encoding(base: &WeightedGrammar) -> Result<WeightedGrammar, SoftError> {
    let lexical = check_base(base)?;
    let mut productions = base.productions.clone();
    productions.extend(substitutions(base, &lexical));
    let mut g = WeightedGrammar::new(base.symbols.clone(), productions);
    g.flags.soft_encoded = true;
    Ok(g)
}

/// Base productions plus unit-weight substitutions, deletions and
/// insertions, normalized to CNF with epsilon.
pub fn edit_encoding(base: &WeightedGrammar) -> Result<WeightedGrammar, SoftError> {
    let lexical = check_base(base)?;
    let mut productions = base.productions.clone();
    productions.extend(substitutions(base, &lexical));
    for &a in &lexical {
        productions.push(Production::new(a, Rhs::Epsilon, 1));
        for t in 0..base.num_terminals() {
            let t = Terminal(t as u16);
            productions.push(Production::new(a, Rhs::ExtLeftRec(a, t), 1));
            productions.push(Production::new(a, Rhs::ExtRightRec(t, a), 1));
        }
    }
    let mut raw = WeightedGrammar::new(base.symbols.clone(), productions);
    raw.flags.soft_encoded = true;
    let mut g = normalize(&raw)?;
    g.flags.soft_encoded = true;
    Ok(g)
}

/// Chart propagation on the epsilon-extended chart.
pub fn propagate_epsilon(
    grammar: &WeightedGrammar,
    z: Bound,
    domains: &DomainStore,
) -> Result<Propagation, PropagateError> {
    WcykPropagator::with_epsilon(grammar)?.propagate(z, domains)
}

/// A soft grammar constraint: within distance `z` of `L(base)`.
#[derive(Clone, Debug)]
pub struct SoftSpec {
    pub base: WeightedGrammar,
    pub distance: Distance,
    pub z: Bound,
}

impl SoftSpec {
    pub fn new(base: WeightedGrammar, distance: Distance, z: Bound) -> Result<Self, SoftError> {
        check_base(&base)?;
        Ok(SoftSpec { base, distance, z })
    }

    pub fn encode(&self) -> Result<WeightedGrammar, SoftError> {
        match self.distance {
            Distance::Hamming => hamming_encoding(&self.base),
            Distance::Edit => edit_encoding(&self.base),
        }
    }

    pub fn propagate(&self, domains: &DomainStore) -> Result<Propagation, SoftError> {
        let g = self.encode()?;
        Ok(match self.distance {
            Distance::Hamming => wcyk::propagate(&g, self.z, domains)?,
            Distance::Edit => propagate_epsilon(&g, self.z, domains)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> WeightedGrammar {
        WeightedGrammar::parse(
            "terminals: a b\nnonterminals: S A B\nstart: S\nS -> A B\nA -> 'a'\nB -> 'b'\n",
        )
        .unwrap()
    }

    fn show(g: &WeightedGrammar, r: &Propagation) -> String {
        match r.domains() {
            Some(d) => d.display(&g.symbols).to_string(),
            None => "infeasible".into(),
        }
    }

    #[test]
    fn hamming_adds_substitutions() {
        let g = hamming_encoding(&base()).unwrap();
        let added: Vec<String> =
            g.productions[3..].iter().map(|p| g.display_production(p)).collect();
        assert_eq!(added, vec!["A -> 'b' @ 1", "B -> 'a' @ 1"]);
        assert!(g.flags.soft_encoded && g.flags.strict_cnf);
    }

    #[test]
    fn hamming_skips_existing() {
        let mut b = base();
        b.productions.push(Production::new(NonTerminal(1), Rhs::Terminal(Terminal(1)), 0));
        let g = hamming_encoding(&b).unwrap();
        assert_eq!(g.productions.len(), 5);
    }

    #[test]
    fn hamming_pruning() {
        let b = base();
        let d = DomainStore::full(2, 2);
        let r = SoftSpec::new(b.clone(), Distance::Hamming, 0).unwrap().propagate(&d).unwrap();
        assert_eq!(show(&b, &r), "X1={a} X2={b}");
        let r = SoftSpec::new(b.clone(), Distance::Hamming, 1).unwrap().propagate(&d).unwrap();
        assert_eq!(show(&b, &r), "X1={a b} X2={a b}");
    }

    #[test]
    fn edit_examples() {
        let b = base();
        let r = SoftSpec::new(b.clone(), Distance::Edit, 1).unwrap().propagate(&DomainStore::full(1, 2)).unwrap();
        assert_eq!(show(&b, &r), "X1={a b}");
        let r = SoftSpec::new(b.clone(), Distance::Edit, 0).unwrap().propagate(&DomainStore::full(3, 2)).unwrap();
        assert!(r.is_infeasible());
        let g = edit_encoding(&b).unwrap();
        assert!(g.flags.has_epsilon && g.flags.soft_encoded);
        assert!(validate(&g).is_empty(), "{:?}", validate(&g));
    }

    #[test]
    fn rejects_bad_bases() {
        let encoded = hamming_encoding(&base()).unwrap();
        assert!(matches!(hamming_encoding(&encoded), Err(SoftError::AlreadyEncoded)));
        let eps = WeightedGrammar::parse("terminals: a\nnonterminals: S\nstart: S\nS -> eps\n").unwrap();
        assert!(matches!(edit_encoding(&eps), Err(SoftError::NotCnf(0))));
        let restricted = WeightedGrammar::parse(
            "terminals: a\nnonterminals: S\nstart: S\nS -> 'a' | j in [1,1]\n",
        )
        .unwrap();
        assert!(matches!(hamming_encoding(&restricted), Err(SoftError::Restricted(0))));
    }

    #[test]
    fn epsilon_chart_examples() {
        let g = WeightedGrammar::parse(
            "terminals: a b\nnonterminals: S\nstart: S\nS -> 'a'\nS -> eps @ 1\n",
        )
        .unwrap();
        let a = DomainStore::parse("X1: a\n", &g.symbols).unwrap();
        assert_eq!(propagate_epsilon(&g, 0, &a).unwrap().root_min(), Some(0));
        let b = DomainStore::parse("X1: b\n", &g.symbols).unwrap();
        assert!(propagate_epsilon(&g, 0, &b).unwrap().is_infeasible());
        let mut sub = g.clone();
        sub.productions.push(Production::new(NonTerminal(0), Rhs::Terminal(Terminal(1)), 1));
        assert_eq!(propagate_epsilon(&sub, 1, &b).unwrap().root_min(), Some(1));
    }
}
