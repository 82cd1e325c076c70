//! Brute-force reference implementations.
//!
//! Nothing here shares code with the chart propagator or the decomposition:
//! every routine works string by string (or tuple by tuple) straight from
//! the production list. Hard size guards keep the exponential parts at desk
//! scale and fail loudly when exceeded.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::cp::{ConstraintSpec, Model};
use crate::domain::DomainStore;
use crate::grammar::{NonTerminal, Rhs, Terminal, WeightedGrammar};

pub const MAX_ENUM_LEN: usize = 8;
pub const MAX_PRODUCT: u128 = 1_000_000;
pub const MAX_ASSIGNMENTS: u128 = 10_000_000;
/// Distance to an empty set of strings.
pub const INFINITE_DISTANCE: usize = usize::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration length {0} exceeds the guard of {MAX_ENUM_LEN}")]
    LengthGuard(usize),
    #[error("{0} candidate strings exceeds the guard of {MAX_PRODUCT}")]
    StringGuard(u128),
    #[error("domain product of {0} tuples exceeds the guard of {MAX_PRODUCT}")]
    ProductGuard(u128),
    #[error("{0} joint assignments exceeds the guard of {MAX_ASSIGNMENTS}")]
    AssignmentGuard(u128),
    #[error("unsupported input: {0}")]
    Unsupported(String),
}

pub type Word = Vec<Terminal>;

/// Minimum derivation weight of every derivable string up to a length bound.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LanguageTable {
    pub max_len: usize,
    entries: BTreeMap<Word, u64>,
}

impl LanguageTable {
    pub fn get(&self, s: &[Terminal]) -> Option<u64> {
        self.entries.get(s).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, u64)> {
        self.entries.iter().map(|(w, &c)| (w, c))
    }
}

/// Exact minimum derivation weight of `s` placed at position 1, by a
/// per-string table relaxed to a fixpoint. Handles every production form,
/// including epsilon and the recursive insertion shapes.
pub fn string_min_weight(grammar: &WeightedGrammar, s: &[Terminal]) -> Option<u64> {
    let n = s.len();
    let nts = grammar.num_nonterminals();
    // best[(start, len)][A], start 0-based
    let mut best: HashMap<(usize, usize), Vec<Option<u64>>> = HashMap::new();
    let add = |x: Option<u64>, y: Option<u64>| Some(x? + y?);
    for len in 0..=n {
        for start in 0..=n - len {
            let mut cell: Vec<Option<u64>> = vec![None; nts];
            loop {
                let mut changed = false;
                for p in &grammar.productions {
                    if !p.applies(start + 1, len) {
                        continue;
                    }
                    let lookup = |a: NonTerminal, st: usize, ln: usize, cell: &Vec<Option<u64>>| {
                        if ln == len {
                            cell[a.index()]
                        } else {
                            best[&(st, ln)][a.index()]
                        }
                    };
                    let w = Some(p.weight as u64);
                    let cand = match p.rhs {
                        Rhs::Terminal(t) => (len == 1 && s[start] == t).then_some(p.weight as u64),
                        Rhs::Epsilon => (len == 0).then_some(p.weight as u64),
                        Rhs::Binary(b, c) => (0..=len)
                            .filter_map(|k| {
                                let x = lookup(b, start, k, &cell);
                                let y = lookup(c, start + k, len - k, &cell);
                                add(add(x, y), w)
                            })
                            .min(),
                        Rhs::ExtLeftRec(b, t) => {
                            if len >= 1 && s[start + len - 1] == t {
                                add(lookup(b, start, len - 1, &cell), w)
                            } else {
                                None
                            }
                        }
                        Rhs::ExtRightRec(t, b) => {
                            if len >= 1 && s[start] == t {
                                add(lookup(b, start + 1, len - 1, &cell), w)
                            } else {
                                None
                            }
                        }
                    };
                    if let Some(c) = cand {
                        let slot = &mut cell[p.lhs.index()];
                        if slot.is_none_or(|old| c < old) {
                            *slot = Some(c);
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            best.insert((start, len), cell);
        }
    }
    best[&(0, n)][grammar.start().index()]
}

/// Plain recursive descent over every derivation tree, without memoization.
/// Only for grammars without epsilon productions, where every nonterminal
/// covers at least one symbol.
pub fn naive_min_weight(grammar: &WeightedGrammar, s: &[Terminal]) -> Result<Option<u64>, OracleError> {
    if grammar.productions.iter().any(|p| p.rhs == Rhs::Epsilon) {
        return Err(OracleError::Unsupported("naive enumeration needs an epsilon-free grammar".into()));
    }
    fn go(g: &WeightedGrammar, s: &[Terminal], a: NonTerminal, start: usize, len: usize) -> Option<u64> {
        let mut best: Option<u64> = None;
        for p in g.productions.iter().filter(|p| p.lhs == a && p.applies(start + 1, len)) {
            let w = p.weight as u64;
            let mut consider = |c: Option<u64>| {
                if let Some(c) = c {
                    best = Some(best.map_or(c + w, |b| b.min(c + w)));
                }
            };
            match p.rhs {
                Rhs::Terminal(t) => consider((len == 1 && s[start] == t).then_some(0)),
                Rhs::Binary(b, c) => {
                    for k in 1..len {
                        let left = go(g, s, b, start, k);
                        let right = left.and_then(|_| go(g, s, c, start + k, len - k));
                        consider(left.zip(right).map(|(x, y)| x + y));
                    }
                }
                Rhs::ExtLeftRec(b, t) if len >= 2 && s[start + len - 1] == t => {
                    consider(go(g, s, b, start, len - 1))
                }
                Rhs::ExtRightRec(t, b) if len >= 2 && s[start] == t => {
                    consider(go(g, s, b, start + 1, len - 1))
                }
                _ => {}
            }
        }
        best
    }
    if s.is_empty() {
        return Ok(None);
    }
    Ok(go(grammar, s, grammar.start(), 0, s.len()))
}

fn all_words(k: usize, len: usize) -> impl Iterator<Item = Word> {
    let total = (k as u128).pow(len as u32);
    (0..total).map(move |mut code| {
        let mut w = vec![Terminal(0); len];
        for slot in w.iter_mut().rev() {
            *slot = Terminal((code % k as u128) as u16);
            code /= k as u128;
        }
        w
    })
}

/// Every derivable string of length `<= max_len` with its minimum weight.
pub fn enumerate_min_weights(grammar: &WeightedGrammar, max_len: usize) -> Result<LanguageTable, OracleError> {
    if max_len > MAX_ENUM_LEN {
        return Err(OracleError::LengthGuard(max_len));
    }
    let k = grammar.num_terminals();
    let total: u128 = (0..=max_len).map(|l| (k as u128).pow(l as u32)).sum();
    if total > MAX_PRODUCT {
        return Err(OracleError::StringGuard(total));
    }
    let mut entries = BTreeMap::new();
    for len in 0..=max_len {
        for w in all_words(k, len) {
            if let Some(c) = string_min_weight(grammar, &w) {
                entries.insert(w, c);
            }
        }
    }
    Ok(LanguageTable { max_len, entries })
}

/// Cross-check table built with [`naive_min_weight`].
pub fn enumerate_min_weights_naive(grammar: &WeightedGrammar, max_len: usize) -> Result<LanguageTable, OracleError> {
    if max_len > MAX_ENUM_LEN {
        return Err(OracleError::LengthGuard(max_len));
    }
    let k = grammar.num_terminals();
    let mut entries = BTreeMap::new();
    for len in 1..=max_len {
        for w in all_words(k, len) {
            if let Some(c) = naive_min_weight(grammar, &w)? {
                entries.insert(w, c);
            }
        }
    }
    Ok(LanguageTable { max_len, entries })
}

fn tuples(domains: &DomainStore) -> Result<Vec<Word>, OracleError> {
    let size = domains.product_size();
    if size > MAX_PRODUCT {
        return Err(OracleError::ProductGuard(size));
    }
    let mut out: Vec<Word> = vec![Vec::new()];
    for (_, d) in domains.iter() {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                d.iter().map(move |t| {
                    let mut w = prefix.clone();
                    w.push(t);
                    w
                })
            })
            .collect();
    }
    Ok(out)
}

/// Reference domain-consistency closure for `WCFG(G, W, z, X)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DcClosure {
    /// Supported values; every domain is empty when infeasible.
    pub domains: DomainStore,
    /// Minimum weight over all tuples of the product, if any derivation
    /// exists within `z`.
    pub min_weight: Option<u64>,
}

impl DcClosure {
    pub fn is_feasible(&self) -> bool {
        self.min_weight.is_some()
    }
}

/// Keeps `a` at position `i` iff some tuple through `(i, a)` has minimum
/// derivation weight `<= z`.
pub fn dc_closure(grammar: &WeightedGrammar, z: u64, domains: &DomainStore) -> Result<DcClosure, OracleError> {
    supported_by(domains, |t| string_min_weight(grammar, t).filter(|&w| w <= z))
}

/// Domain closure under an arbitrary per-tuple cost: a tuple supports its
/// values when `cost` returns `Some`.
pub fn supported_by(
    domains: &DomainStore,
    mut cost: impl FnMut(&[Terminal]) -> Option<u64>,
) -> Result<DcClosure, OracleError> {
    let n = domains.len();
    let mut kept = DomainStore::new(vec![Default::default(); n]);
    let mut min_weight: Option<u64> = None;
    for t in tuples(domains)? {
        if let Some(w) = cost(&t) {
            min_weight = Some(min_weight.map_or(w, |m| m.min(w)));
            for (i, &a) in t.iter().enumerate() {
                let mut d = kept.get(i + 1);
                d.insert(a);
                kept.set(i + 1, d);
            }
        }
    }
    Ok(DcClosure { domains: kept, min_weight })
}

pub fn hamming(a: &[Terminal], b: &[Terminal]) -> Option<usize> {
    (a.len() == b.len()).then(|| a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Levenshtein distance with unit substitution, insertion and deletion.
pub fn edit_distance(a: &[Terminal], b: &[Terminal]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Smallest Hamming distance from `t` to an equal-length string of the
/// table, [`INFINITE_DISTANCE`] if there is none.
pub fn min_hamming(t: &[Terminal], table: &LanguageTable) -> usize {
    table.iter().filter_map(|(s, _)| hamming(t, s)).min().unwrap_or(INFINITE_DISTANCE)
}

/// Smallest edit distance from `t` to any string of the table.
pub fn min_edit(t: &[Terminal], table: &LanguageTable) -> usize {
    table.iter().map(|(s, _)| edit_distance(t, s)).min().unwrap_or(INFINITE_DISTANCE)
}

/// All strings of exactly `domains.len()` symbols drawn from the domains
/// and derivable from the start symbol, with minimum weights. Generated
/// top-down per span; epsilon-free grammars only.
pub fn language_of_length(
    grammar: &WeightedGrammar,
    domains: &DomainStore,
) -> Result<BTreeMap<Word, u64>, OracleError> {
    if grammar.productions.iter().any(|p| matches!(p.rhs, Rhs::Epsilon)) {
        return Err(OracleError::Unsupported("span generation needs an epsilon-free grammar".into()));
    }
    type Memo = HashMap<(NonTerminal, usize, usize), BTreeMap<Word, u64>>;
    fn gen(
        g: &WeightedGrammar,
        d: &DomainStore,
        a: NonTerminal,
        start: usize,
        len: usize,
        memo: &mut Memo,
    ) -> Result<BTreeMap<Word, u64>, OracleError> {
        if let Some(hit) = memo.get(&(a, start, len)) {
            return Ok(hit.clone());
        }
        let mut out: BTreeMap<Word, u64> = BTreeMap::new();
        let put = |w: Word, c: u64, out: &mut BTreeMap<Word, u64>| {
            let e = out.entry(w).or_insert(c);
            *e = (*e).min(c);
        };
        let prods: Vec<_> = g.productions.iter().filter(|p| p.lhs == a && p.applies(start, len)).collect();
        for p in prods {
            let w = p.weight as u64;
            match p.rhs {
                Rhs::Terminal(t) if len == 1 && d.get(start).contains(t) => put(vec![t], w, &mut out),
                Rhs::Binary(b, c) => {
                    for k in 1..len {
                        let left = gen(g, d, b, start, k, memo)?;
                        if left.is_empty() {
                            continue;
                        }
                        let right = gen(g, d, c, start + k, len - k, memo)?;
                        if (left.len() as u128) * (right.len() as u128) + out.len() as u128 > MAX_PRODUCT {
                            return Err(OracleError::StringGuard(
                                (left.len() as u128) * (right.len() as u128),
                            ));
                        }
                        for (lw, lc) in &left {
                            for (rw, rc) in &right {
                                let mut s = lw.clone();
                                s.extend_from_slice(rw);
                                put(s, lc + rc + w, &mut out);
                            }
                        }
                    }
                }
                Rhs::ExtLeftRec(b, t) if len >= 2 && d.get(start + len - 1).contains(t) => {
                    for (mut s, c) in gen(g, d, b, start, len - 1, memo)? {
                        s.push(t);
                        put(s, c + w, &mut out);
                    }
                }
                Rhs::ExtRightRec(t, b) if len >= 2 && d.get(start).contains(t) => {
                    for (s, c) in gen(g, d, b, start + 1, len - 1, memo)? {
                        let mut full = vec![t];
                        full.extend(s);
                        put(full, c + w, &mut out);
                    }
                }
                _ => {}
            }
        }
        memo.insert((a, start, len), out.clone());
        Ok(out)
    }
    if domains.is_empty() {
        return Ok(BTreeMap::new());
    }
    let mut memo = Memo::new();
    gen(grammar, domains, grammar.start(), 1, domains.len(), &mut memo)
}

/// Exact optimum of the model's objective by enumerating every joint
/// choice of one language string per row. `Ok(None)` means unsatisfiable.
///
/// Supports models made of one grammar constraint per row, channels and
/// demand constraints.
pub fn exhaustive_min_cost(model: &Model) -> Result<Option<i64>, OracleError> {
    let rows = model.num_rows();
    let mut row_grammar = vec![None; rows];
    let mut channels: Vec<(usize, usize, usize, Terminal)> = Vec::new();
    let mut demands: Vec<(Vec<usize>, usize)> = Vec::new();
    for c in model.constraints() {
        match c {
            ConstraintSpec::Wcfg(w) => {
                if row_grammar[w.row.0].replace(w).is_some() {
                    return Err(OracleError::Unsupported(format!(
                        "row {} carries two grammar constraints",
                        w.row.0
                    )));
                }
            }
            ConstraintSpec::Channel(ch) => channels.push((ch.var.0, ch.row.0, ch.position, ch.value)),
            ConstraintSpec::Demand(d) => demands.push((d.vars.iter().map(|b| b.0).collect(), d.required)),
        }
    }

    // Candidate (string, cost-variable value) pairs per row.
    let mut candidates: Vec<Vec<(Word, i64)>> = Vec::with_capacity(rows);
    for (r, spec) in row_grammar.iter().enumerate() {
        let Some(spec) = spec else {
            return Err(OracleError::Unsupported(format!("row {r} has no grammar constraint")));
        };
        let cost = model.int_domain(spec.cost);
        let lang = language_of_length(&spec.grammar, model.row_domains(spec.row))?;
        let cands: Vec<(Word, i64)> = lang
            .into_iter()
            .filter(|&(_, w)| (w as i64) <= cost.hi)
            .map(|(s, w)| (s, (w as i64).max(cost.lo)))
            .collect();
        candidates.push(cands);
    }
    let joint: u128 = candidates.iter().fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128));
    if joint > MAX_ASSIGNMENTS {
        return Err(OracleError::AssignmentGuard(joint));
    }
    let cost_of_row: Vec<usize> = row_grammar
        .iter()
        .map(|s| s.as_ref().expect("checked above").cost.0)
        .collect();

    let mut best: Option<i64> = None;
    let mut choice = vec![0usize; rows];
    if candidates.iter().any(|c| c.is_empty()) {
        return Ok(None);
    }
    loop {
        if let Some(c) = evaluate(model, &candidates, &choice, &cost_of_row, &channels, &demands) {
            best = Some(best.map_or(c, |b| b.min(c)));
        }
        // odometer increment
        let mut r = 0;
        loop {
            if r == rows {
                return Ok(best);
            }
            choice[r] += 1;
            if choice[r] < candidates[r].len() {
                break;
            }
            choice[r] = 0;
            r += 1;
        }
    }
}

fn evaluate(
    model: &Model,
    candidates: &[Vec<(Word, i64)>],
    choice: &[usize],
    cost_of_row: &[usize],
    channels: &[(usize, usize, usize, Terminal)],
    demands: &[(Vec<usize>, usize)],
) -> Option<i64> {
    // Booleans fixed by channels; unchannelled ones keep their domain.
    let mut value: Vec<Option<bool>> = vec![None; model.num_bools()];
    for &(b, row, pos, t) in channels {
        let v = candidates[row][choice[row]].0[pos - 1] == t;
        let dom = model.bool_domain(crate::cp::BoolVar(b));
        if !dom.allows(v) || value[b].is_some_and(|old| old != v) {
            return None;
        }
        value[b] = Some(v);
    }
    for (vars, required) in demands {
        let possible = vars
            .iter()
            .filter(|&&b| value[b].unwrap_or_else(|| model.bool_domain(crate::cp::BoolVar(b)).allows(true)))
            .count();
        if possible < *required {
            return None;
        }
    }
    let mut ints: Vec<i64> = (0..model.num_ints()).map(|v| model.int_domain(crate::cp::IntVar(v)).lo).collect();
    for (row, &var) in cost_of_row.iter().enumerate() {
        ints[var] = ints[var].max(candidates[row][choice[row]].1);
    }
    Some(model.objective().iter().map(|v| ints[v.0]).sum())
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

    const A: Terminal = Terminal(0);
    const B: Terminal = Terminal(1);

    #[test]
    fn g0_language() {
        let table = enumerate_min_weights(&g0(), 4).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.get(&[A, B]), Some(3));
        assert_eq!(enumerate_min_weights_naive(&g0(), 4).unwrap(), table);
    }

    #[test]
    fn zero_weight_grammar() {
        let g = WeightedGrammar::parse(
            "terminals: a\nnonterminals: S\nstart: S\nS -> S S\nS -> 'a'\n",
        )
        .unwrap();
        let t = enumerate_min_weights(&g, 5).unwrap();
        assert_eq!(t.len(), 5);
        assert!(t.iter().all(|(_, c)| c == 0));
    }

    #[test]
    fn epsilon_and_insertions() {
        let g = WeightedGrammar::parse(
            "terminals: a b\nnonterminals: S\nstart: S\nS -> 'a'\nS -> eps @ 1\nS -> S 'b' @ 1\nS -> 'b' S @ 2\n",
        )
        .unwrap();
        assert_eq!(string_min_weight(&g, &[]), Some(1));
        assert_eq!(string_min_weight(&g, &[A, B]), Some(1));
        assert_eq!(string_min_weight(&g, &[B, A]), Some(2));
        assert_eq!(string_min_weight(&g, &[B, B]), Some(3));
        assert_eq!(string_min_weight(&g, &[A, A]), None);
    }

    #[test]
    fn guards() {
        assert_eq!(enumerate_min_weights(&g0(), 9), Err(OracleError::LengthGuard(9)));
        let d = DomainStore::full(21, 2);
        assert!(matches!(dc_closure(&g0(), 1, &d), Err(OracleError::ProductGuard(_))));
    }

    #[test]
    fn dc_closure_examples() {
        let g = g0();
        let d = DomainStore::parse("X1: a b\nX2: b\n", &g.symbols).unwrap();
        let c = dc_closure(&g, 3, &d).unwrap();
        assert_eq!(c.domains.display(&g.symbols).to_string(), "X1={a} X2={b}");
        assert_eq!(c.min_weight, Some(3));
        let c = dc_closure(&g, 2, &d).unwrap();
        assert!(!c.is_feasible());
    }

    #[test]
    fn distances() {
        let table = enumerate_min_weights(&g0(), 3).unwrap();
        assert_eq!(min_hamming(&[A, B], &table), 0);
        assert_eq!(min_edit(&[A, B], &table), 0);
        assert_eq!(min_hamming(&[A, A], &table), 1);
        assert_eq!(min_edit(&[A, A], &table), 1);
        assert_eq!(min_edit(&[A], &table), 1);
        assert_eq!(min_hamming(&[A], &table), INFINITE_DISTANCE);
        assert_eq!(min_edit(&[A], &LanguageTable::default()), INFINITE_DISTANCE);
        assert_eq!(edit_distance(&[A, B, A], &[B, A, B]), 2);
    }

    #[test]
    fn language_of_length_matches_table() {
        let g = WeightedGrammar::parse(
            "terminals: a b\nnonterminals: S A B\nstart: S\n\
             S -> A B @ 1\nS -> S S @ 2\nA -> 'a' @ 0\nA -> 'b' @ 3\nB -> 'b' @ 1\n",
        )
        .unwrap();
        let table = enumerate_min_weights(&g, 4).unwrap();
        let lang = language_of_length(&g, &DomainStore::full(4, 2)).unwrap();
        let expected: BTreeMap<Word, u64> =
            table.iter().filter(|(w, _)| w.len() == 4).map(|(w, c)| (w.clone(), c)).collect();
        assert_eq!(lang, expected);
    }
}
