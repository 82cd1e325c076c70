//! Per-position terminal domains for a sequence of variables.

use std::fmt;

use crate::grammar::{SymbolTable, Terminal, MAX_TERMINALS};
use crate::grammar::ParseError;

/// A set of terminals, stored as a bitmask over terminal indices.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermSet(u64);

impl TermSet {
    pub const EMPTY: TermSet = TermSet(0);

    /// All terminals `0..k`.
    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_TERMINALS);
        if k == 64 { TermSet(u64::MAX) } else { TermSet((1u64 << k) - 1) }
    }

    pub fn singleton(t: Terminal) -> Self {
        TermSet(1u64 << t.0)
    }

    pub fn from_bits(bits: u64) -> Self {
        TermSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, t: Terminal) -> bool {
        t.index() < 64 && self.0 & (1u64 << t.0) != 0
    }

    pub fn insert(&mut self, t: Terminal) {
        self.0 |= 1u64 << t.0;
    }

    pub fn remove(&mut self, t: Terminal) -> bool {
        let had = self.contains(t);
        self.0 &= !(1u64 << t.0);
        had
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: TermSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersect(self, other: TermSet) -> TermSet {
        TermSet(self.0 & other.0)
    }

    /// The single member, if there is exactly one.
    pub fn single(self) -> Option<Terminal> {
        (self.len() == 1).then(|| Terminal(self.0.trailing_zeros() as u16))
    }

    pub fn iter(self) -> impl Iterator<Item = Terminal> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let t = bits.trailing_zeros();
            bits &= bits - 1;
            Some(Terminal(t as u16))
        })
    }
}

impl FromIterator<Terminal> for TermSet {
    fn from_iter<I: IntoIterator<Item = Terminal>>(iter: I) -> Self {
        let mut s = TermSet::EMPTY;
        for t in iter {
            s.insert(t);
        }
        s
    }
}

impl fmt::Debug for TermSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|t| t.0)).finish()
    }
}

/// Domains `D(X_1) .. D(X_n)`. Positions are 1-based throughout the public
/// API to match chart indexing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DomainStore {
    domains: Vec<TermSet>,
}

impl DomainStore {
    pub fn new(domains: Vec<TermSet>) -> Self {
        DomainStore { domains }
    }

    /// `n` positions, each holding the full alphabet of size `k`.
    pub fn full(n: usize, k: usize) -> Self {
        DomainStore { domains: vec![TermSet::full(k); n] }
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// `D(X_i)` for `i` in `1..=n`.
    pub fn get(&self, i: usize) -> TermSet {
        self.domains[i - 1]
    }

    pub fn set(&mut self, i: usize, d: TermSet) {
        self.domains[i - 1] = d;
    }

    pub fn remove(&mut self, i: usize, t: Terminal) -> bool {
        self.domains[i - 1].remove(t)
    }

    /// A store with an empty domain admits no assignment.
    pub fn is_failed(&self) -> bool {
        self.domains.iter().any(|d| d.is_empty())
    }

    pub fn is_assigned(&self) -> bool {
        self.domains.iter().all(|d| d.len() == 1)
    }

    /// Positions paired with their domains, 1-based.
    pub fn iter(&self) -> impl Iterator<Item = (usize, TermSet)> + '_ {
        self.domains.iter().copied().enumerate().map(|(i, d)| (i + 1, d))
    }

    pub fn as_slice(&self) -> &[TermSet] {
        &self.domains
    }

    /// Number of tuples in the Cartesian product, saturating.
    pub fn product_size(&self) -> u128 {
        self.domains.iter().fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128))
    }

    /// `true` when each domain is a subset of the corresponding one in `other`.
    pub fn is_subset(&self, other: &DomainStore) -> bool {
        self.len() == other.len()
            && self.domains.iter().zip(&other.domains).all(|(a, b)| a.is_subset(*b))
    }

    /// Renders `X1={a} X2={b c}` with names from the symbol table.
    pub fn display<'a>(&'a self, symbols: &'a SymbolTable) -> DisplayDomains<'a> {
        DisplayDomains { store: self, symbols }
    }

    /// Parses one `X<i>: a b c` line per position. Positions must be
    /// 1..n without gaps, in any order.
    pub fn parse(text: &str, symbols: &SymbolTable) -> Result<Self, ParseError> {
        let mut entries: Vec<Option<TermSet>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |message: String| ParseError { line: line_no, message };
            let (var, values) = line
                .split_once(':')
                .ok_or_else(|| fail(format!("expected `X<i>: values`, got `{line}`")))?;
            let pos: usize = var
                .trim()
                .strip_prefix('X')
                .and_then(|p| p.parse().ok())
                .filter(|&p| p >= 1)
                .ok_or_else(|| fail(format!("bad variable name `{}`", var.trim())))?;
            let mut set = TermSet::EMPTY;
            for v in values.split_whitespace() {
                let t = symbols
                    .terminal(v)
                    .ok_or_else(|| fail(format!("unknown terminal `{v}`")))?;
                set.insert(t);
            }
            if entries.len() < pos {
                entries.resize(pos, None);
            }
            if entries[pos - 1].replace(set).is_some() {
                return Err(fail(format!("X{pos} given twice")));
            }
        }
        let domains = entries
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                d.ok_or_else(|| ParseError { line: 0, message: format!("missing X{}", i + 1) })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if domains.is_empty() {
            return Err(ParseError { line: 0, message: "no variables".into() });
        }
        Ok(DomainStore { domains })
    }

    /// The `X<i>: ...` format read by [`DomainStore::parse`].
    pub fn to_file_string(&self, symbols: &SymbolTable) -> String {
        let mut out = String::new();
        for (i, d) in self.iter() {
            let names: Vec<&str> = d.iter().map(|t| symbols.terminal_name(t)).collect();
            out.push_str(&format!("X{i}: {}\n", names.join(" ")));
        }
        out
    }
}

pub struct DisplayDomains<'a> {
    store: &'a DomainStore,
    symbols: &'a SymbolTable,
}

impl fmt::Display for DisplayDomains<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.store.iter() {
            if i > 1 {
                f.write_str(" ")?;
            }
            let names: Vec<&str> = d.iter().map(|t| self.symbols.terminal_name(t)).collect();
            write!(f, "X{i}={{{}}}", names.join(" "))?;
        }
        Ok(())
    }
}
