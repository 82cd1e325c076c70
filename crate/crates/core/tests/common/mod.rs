//! Seeded random instances shared by the property and acceptance tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use wcfg::cp::{Backend, IntVar, Model};
use wcfg::grammar::SymbolTable;
use wcfg::{DomainStore, NonTerminal, Production, Rhs, TermSet, Terminal, WeightedGrammar};

pub const NAMES: [&str; 3] = ["a", "b", "c"];

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_terminals: usize,
    pub max_nonterminals: usize,
    pub max_productions: usize,
    pub max_weight: u32,
    pub max_len: usize,
    pub max_z: i64,
}

/// Bounds of the oracle sweep: `n <= 6`, `|Σ| <= 3`, `|G| <= 12`, weights
/// `<= 5`, `z <= 12`.
pub const SWEEP: Shape =
    Shape { max_terminals: 3, max_nonterminals: 4, max_productions: 12, max_weight: 5, max_len: 6, max_z: 12 };

#[derive(Clone, Debug)]
pub struct Instance {
    pub grammar: WeightedGrammar,
    pub domains: DomainStore,
    pub z: i64,
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn symbols(k: usize, nts: usize) -> SymbolTable {
    let mut nonterminals = vec!["S".to_string()];
    nonterminals.extend((1..nts).map(|i| format!("N{i}")));
    SymbolTable {
        terminals: NAMES[..k].iter().map(|s| s.to_string()).collect(),
        nonterminals,
        start: NonTerminal(0),
    }
}

/// A strict-CNF grammar. Every nonterminal gets one terminal production so
/// that most instances are feasible for some budget.
pub fn cnf_grammar(rng: &mut StdRng, shape: &Shape) -> WeightedGrammar {
    let k = rng.gen_range(1..=shape.max_terminals);
    let nts = rng.gen_range(1..=shape.max_nonterminals.min(shape.max_productions));
    let total = rng.gen_range(nts..=shape.max_productions);
    let mut ps = Vec::with_capacity(total);
    for a in 0..nts {
        let t = Terminal(rng.gen_range(0..k) as u16);
        ps.push(Production::new(NonTerminal(a as u16), Rhs::Terminal(t), rng.gen_range(0..=shape.max_weight)));
    }
    while ps.len() < total {
        let lhs = NonTerminal(rng.gen_range(0..nts) as u16);
        let rhs = if rng.gen_bool(0.3) {
            Rhs::Terminal(Terminal(rng.gen_range(0..k) as u16))
        } else {
            Rhs::Binary(NonTerminal(rng.gen_range(0..nts) as u16), NonTerminal(rng.gen_range(0..nts) as u16))
        };
        ps.push(Production::new(lhs, rhs, rng.gen_range(0..=shape.max_weight)));
    }
    WeightedGrammar::new(symbols(k, nts), ps)
}

/// A grammar mixing CNF with epsilon and recursive insertion productions.
pub fn extended_grammar(rng: &mut StdRng, max_productions: usize) -> WeightedGrammar {
    let k = rng.gen_range(1..=3);
    let nts = rng.gen_range(1..=3);
    let total = rng.gen_range(nts..=max_productions.max(nts));
    let mut ps = Vec::new();
    for a in 0..nts {
        ps.push(Production::new(NonTerminal(a as u16), Rhs::Terminal(Terminal(rng.gen_range(0..k) as u16)), rng.gen_range(0..=3)));
    }
    while ps.len() < total {
        let lhs = NonTerminal(rng.gen_range(0..nts) as u16);
        let t = Terminal(rng.gen_range(0..k) as u16);
        let rhs = match rng.gen_range(0..5) {
            0 => Rhs::Terminal(t),
            1 => Rhs::Binary(NonTerminal(rng.gen_range(0..nts) as u16), NonTerminal(rng.gen_range(0..nts) as u16)),
            2 => Rhs::Epsilon,
            3 => Rhs::ExtLeftRec(lhs, t),
            _ => Rhs::ExtRightRec(t, lhs),
        };
        ps.push(Production::new(lhs, rhs, rng.gen_range(0..=3)));
    }
    WeightedGrammar::new(symbols(k, nts), ps)
}

/// Each domain a uniformly drawn nonempty subset of the alphabet.
pub fn domains(rng: &mut StdRng, n: usize, k: usize) -> DomainStore {
    let full = TermSet::full(k).bits();
    DomainStore::new((0..n).map(|_| TermSet::from_bits(rng.gen_range(1..=full))).collect())
}

/// A random instance whose grammar derives some string of length `n`
/// (checked by the oracle); domains and budget are unconstrained, so
/// infeasible instances still occur.
pub fn instance(seed: u64, shape: &Shape) -> Instance {
    let mut r = rng(seed);
    let n = r.gen_range(1..=shape.max_len);
    let grammar = loop {
        let g = cnf_grammar(&mut r, shape);
        let full = DomainStore::full(n, g.num_terminals());
        if !wcfg::oracle::language_of_length(&g, &full).unwrap().is_empty() {
            break g;
        }
    };
    let domains = domains(&mut r, n, grammar.num_terminals());
    let z = r.gen_range(0..=shape.max_z);
    Instance { grammar, domains, z }
}

/// `d` with one randomly chosen value removed from a non-singleton domain,
/// if there is one.
pub fn shrink_one(rng: &mut StdRng, d: &DomainStore) -> Option<(usize, Terminal, DomainStore)> {
    let candidates: Vec<usize> = (1..=d.len()).filter(|&i| d.get(i).len() > 1).collect();
    let &i = candidates.choose(rng)?;
    let values: Vec<Terminal> = d.get(i).iter().collect();
    let &t = values.choose(rng)?;
    let mut out = d.clone();
    out.remove(i, t);
    Some((i, t, out))
}

/// A small optimisation model: one or two grammar rows with cost
/// variables, a few channelled Booleans and a demand over them. Grammar,
/// length and rows are redrawn until each row is feasible on its own, so
/// searches are not trivially empty.
pub fn model(seed: u64, backend: Backend) -> Model {
    let mut r = rng(seed);
    let shape = Shape { max_len: 5, max_z: 10, ..SWEEP };
    let (grammar, n) = loop {
        let g = cnf_grammar(&mut r, &shape);
        let n = r.gen_range(2..=5);
        let full = DomainStore::full(n, g.num_terminals());
        if wcfg::wcyk::propagate(&g, 15, &full).unwrap().domains().is_some() {
            break (Arc::new(g), n);
        }
    };
    let k = grammar.num_terminals();
    let mut m = Model::new();
    let mut costs: Vec<IntVar> = Vec::new();
    let rows: usize = r.gen_range(1..=2);
    let mut channelled = Vec::new();
    for _ in 0..rows {
        let (d, hi) = loop {
            let d = domains(&mut r, n, k);
            let hi = r.gen_range(4..=15);
            if wcfg::wcyk::propagate(&grammar, hi, &d).unwrap().domains().is_some() {
                break (d, hi);
            }
        };
        let row = m.add_row(d, k);
        let cost = m.add_int(0, hi).unwrap();
        m.post_wcfg(Arc::clone(&grammar), cost, row, backend).unwrap();
        costs.push(cost);
        for _ in 0..r.gen_range(0..=2) {
            let b = m.add_bool();
            m.channel(b, row, r.gen_range(1..=n), Terminal(r.gen_range(0..k) as u16)).unwrap();
            channelled.push(b);
        }
    }
    if !channelled.is_empty() && r.gen_bool(0.5) {
        let d = r.gen_range(0..channelled.len()) as i64;
        m.post_demand(channelled, d).unwrap();
    }
    m.minimize(costs).unwrap();
    m
}

pub mod checks {
    //! Comparisons returning a description of the first mismatch.

    use wcfg::decomposition::{build_network, schedule_order, ConstraintNetwork};
    use wcfg::oracle::dc_closure;
    use wcfg::wcyk::WcykPropagator;
    use wcfg::{DomainStore, Propagation};

    use super::Instance;

    pub fn network(i: &Instance) -> Option<ConstraintNetwork> {
        let prop = WcykPropagator::new(&i.grammar).unwrap();
        build_network(&prop, i.z, &i.domains).unwrap()
    }

    /// Chart propagation against the brute-force closure.
    pub fn chart_vs_oracle(i: &Instance) -> Result<(), String> {
        let got = wcfg::wcyk::propagate(&i.grammar, i.z, &i.domains).unwrap();
        let want = dc_closure(&i.grammar, i.z as u64, &i.domains).unwrap();
        match (&got, want.is_feasible()) {
            (Propagation::Infeasible, false) => Ok(()),
            (Propagation::Pruned { domains, root_min }, true)
                if *domains == want.domains && Some(*root_min as u64) == want.min_weight =>
            {
                Ok(())
            }
            _ => Err(format!("chart {got:?} vs oracle {want:?}")),
        }
    }

    /// Network fixpoint against chart propagation: domains, verdict, and
    /// `l`/`u` on every marked cell.
    pub fn network_vs_chart(i: &Instance, entailment: bool) -> Result<(), String> {
        let prop = WcykPropagator::new(&i.grammar).unwrap();
        let (want, chart) = prop.propagate_with_chart(i.z, &i.domains).unwrap();
        let Some(mut net) = build_network(&prop, i.z, &i.domains).unwrap() else {
            return if want.is_infeasible() { Ok(()) } else { Err("no network for a feasible instance".into()) };
        };
        net.set_entailment(entailment);
        let got = net.propagate(&i.domains);
        if got != want {
            return Err(format!("network {got:?} vs chart {want:?}"));
        }
        if want.is_infeasible() {
            return Ok(());
        }
        let n = i.domains.len();
        for j in 1..=n {
            for s in 1..=n + 1 - j {
                for a in 0..i.grammar.num_nonterminals() {
                    let a = wcfg::NonTerminal(a as u16);
                    let cell = chart.cell(s, j, a);
                    if !cell.marked {
                        continue;
                    }
                    let Some((l, u)) = net.cell_bounds(s, j, a) else {
                        return Err(format!("marked cell ({s},{j},{a:?}) missing from the network"));
                    };
                    if l.lo != cell.l || u.hi != cell.u {
                        return Err(format!(
                            "cell ({s},{j},{a:?}): network l={l:?} u={u:?}, chart l={} u={}",
                            cell.l, cell.u
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Domains and bounds after a fixpoint, rendered for comparison.
    pub fn fixpoint_state(net: &mut ConstraintNetwork, i: &Instance, order: &[usize]) -> String {
        let mut d: DomainStore = i.domains.clone();
        match net.fixpoint_with_order(order, &mut d) {
            Ok(()) => format!("{}\n{}", d.display(&i.grammar.symbols), net.dump(&i.grammar)),
            Err(_) => "failed".into(),
        }
    }

    /// From a fresh post, a second sweep in schedule order changes nothing.
    /// `Ok(false)` when the first sweep already fails.
    pub fn single_sweep(i: &Instance) -> Result<bool, String> {
        let Some(mut net) = network(i) else { return Ok(false) };
        net.set_entailment(true);
        let order = schedule_order(&net);
        let mut d = i.domains.clone();
        if net.sweep(&order, &mut d).is_err() {
            return Ok(false);
        }
        let before = net.dump(&i.grammar);
        let d_before = d.clone();
        match net.sweep(&order, &mut d) {
            Ok(false) if d == d_before => Ok(true),
            _ => Err(format!("second sweep changed bounds:\n{before}\n---\n{}", net.dump(&i.grammar))),
        }
    }
}

pub mod soft_checks {
    use rand::Rng;
    use wcfg::oracle::{enumerate_min_weights, min_edit, min_hamming, supported_by};
    use wcfg::soft::{Distance, SoftSpec};
    use wcfg::{DomainStore, WeightedGrammar};

    use super::{cnf_grammar, domains, rng, Shape, SWEEP};

    /// A zero-weight base grammar, domains with `n <= 5` and a budget.
    pub fn triple(seed: u64, distance: Distance) -> (WeightedGrammar, DomainStore, i64) {
        let mut r = rng(seed);
        let shape = Shape { max_weight: 0, max_productions: 8, max_nonterminals: 3, ..SWEEP };
        let base = cnf_grammar(&mut r, &shape);
        let n = r.gen_range(1..=5);
        let d = domains(&mut r, n, base.num_terminals());
        let max_z = match distance {
            Distance::Hamming => 5,
            Distance::Edit => 3,
        };
        (base, d, r.gen_range(0..=max_z))
    }

    /// Encoded-grammar propagation against distance thresholding over the
    /// domain product.
    pub fn soft_vs_oracle(base: &WeightedGrammar, d: &DomainStore, z: i64, distance: Distance) -> Result<(), String> {
        let n = d.len();
        let got = SoftSpec::new(base.clone(), distance, z).unwrap().propagate(d).unwrap();
        let max_len = match distance {
            Distance::Hamming => n,
            Distance::Edit => n + z as usize,
        };
        let table = enumerate_min_weights(base, max_len).unwrap();
        let want = supported_by(d, |t| {
            let dist = match distance {
                Distance::Hamming => min_hamming(t, &table),
                Distance::Edit => min_edit(t, &table),
            };
            (dist <= z as usize).then_some(dist as u64)
        })
        .unwrap();
        match got.domains() {
            None if !want.is_feasible() => Ok(()),
            Some(domains) if *domains == want.domains && got.root_min().map(|w| w as u64) == want.min_weight => Ok(()),
            _ => Err(format!("{distance} z={z} on {d:?}: encoded {got:?}, oracle {want:?}\n{base}")),
        }
    }
}
