//! Line-oriented grammar file format.
//!
//! ```text
//! # comment
//! terminals: a b
//! nonterminals: S A B
//! start: S
//! flags: strict-cnf            (optional; inferred when absent)
//! mask open: 0110              (named position masks, 1 char per slot)
//! S -> A B @ 0
//! A -> 'a' @ 1 | j in [1,3] | i in mask:open
//! A -> eps @ 1
//! ```
//!
//! Weights default to 0. `*` as the upper span bound means unbounded.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{
    GrammarFlags, NonTerminal, PositionMask, Production, Restriction, Rhs, SymbolTable, Terminal,
    WeightedGrammar,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

#[derive(Default)]
struct Header {
    terminals: Option<Vec<String>>,
    nonterminals: Option<Vec<String>>,
    start: Option<(usize, String)>,
    flags: Option<GrammarFlags>,
    masks: HashMap<String, Arc<PositionMask>>,
}

pub fn parse_grammar(text: &str) -> Result<WeightedGrammar, ParseError> {
    let mut header = Header::default();
    let mut productions = Vec::new();
    let mut symbols: Option<SymbolTable> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.contains("->") {
            if symbols.is_none() {
                symbols = Some(finish_header(&header, line_no)?);
            }
            let syms = symbols.as_ref().expect("symbol table built above");
            productions.push(parse_production(line, line_no, syms, &header.masks)?);
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return err(line_no, format!("expected `key: value` or a production, got `{line}`"));
        };
        let key = key.trim();
        let words: Vec<String> = value.split_whitespace().map(str::to_string).collect();
        if symbols.is_some() && key != "mask" && !key.starts_with("mask ") {
            return err(line_no, format!("header `{key}` after the first production"));
        }
        match key {
            "terminals" => header.terminals = Some(words),
            "nonterminals" => header.nonterminals = Some(words),
            "start" => match words.as_slice() {
                [s] => header.start = Some((line_no, s.clone())),
                _ => return err(line_no, "start expects exactly one nonterminal"),
            },
            "flags" => {
                let mut flags = GrammarFlags::default();
                for w in &words {
                    match w.as_str() {
                        "strict-cnf" => flags.strict_cnf = true,
                        "epsilon" => flags.has_epsilon = true,
                        "soft-encoded" => flags.soft_encoded = true,
                        other => return err(line_no, format!("unknown flag `{other}`")),
                    }
                }
                header.flags = Some(flags);
            }
            _ if key.starts_with("mask ") => {
                let name = key["mask ".len()..].trim().to_string();
                let bits = match words.as_slice() {
                    [b] => b,
                    _ => return err(line_no, "mask expects one 0/1 string"),
                };
                let allowed = bits
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => err(line_no, format!("mask `{name}`: bad character `{c}`")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                header.masks.insert(name.clone(), Arc::new(PositionMask { name, allowed }));
            }
            other => return err(line_no, format!("unknown header `{other}`")),
        }
    }

    let last_line = text.lines().count().max(1);
    let symbols = match symbols {
        Some(s) => s,
        None => finish_header(&header, last_line)?,
    };
    let mut g = WeightedGrammar::new(symbols, productions);
    if let Some(flags) = header.flags {
        g.flags = flags;
    }
    Ok(g)
}

fn finish_header(h: &Header, line: usize) -> Result<SymbolTable, ParseError> {
    let Some(terminals) = h.terminals.clone() else {
        return err(line, "missing `terminals:` header");
    };
    let Some(nonterminals) = h.nonterminals.clone() else {
        return err(line, "missing `nonterminals:` header");
    };
    let Some((start_line, start)) = h.start.clone() else {
        return err(line, "missing `start:` header");
    };
    if nonterminals.iter().any(|a| a == "eps") {
        return err(line, "`eps` is reserved and cannot name a nonterminal");
    }
    if let Some(t) = terminals.iter().find(|t| t.contains('\'')) {
        return err(line, format!("terminal `{t}` contains a quote"));
    }
    let Some(pos) = nonterminals.iter().position(|a| *a == start) else {
        return err(start_line, format!("start symbol `{start}` is not a declared nonterminal"));
    };
    Ok(SymbolTable { terminals, nonterminals, start: NonTerminal(pos as u16) })
}

enum Item {
    T(Terminal),
    N(NonTerminal),
}

fn parse_production(
    line: &str,
    line_no: usize,
    syms: &SymbolTable,
    masks: &HashMap<String, Arc<PositionMask>>,
) -> Result<Production, ParseError> {
    let mut segments = line.split('|');
    let body = segments.next().unwrap_or("");
    let (lhs, rest) = body.split_once("->").expect("caller checked for `->`");
    let lhs = lhs.trim();
    let Some(lhs) = syms.nonterminal(lhs) else {
        return err(line_no, format!("unknown nonterminal `{lhs}` on the left-hand side"));
    };
    let (rhs_text, weight) = match rest.split_once('@') {
        Some((r, w)) => {
            let w = w.trim();
            let weight = w
                .parse::<u32>()
                .or_else(|_| err(line_no, format!("weight `{w}` is not a non-negative integer")))?;
            (r, weight)
        }
        None => (rest, 0),
    };

    let mut items = Vec::new();
    let tokens: Vec<&str> = rhs_text.split_whitespace().collect();
    if tokens == ["eps"] {
        items.clear();
    } else {
        for tok in &tokens {
            if let Some(inner) = tok.strip_prefix('\'').and_then(|t| t.strip_suffix('\'')) {
                match syms.terminal(inner) {
                    Some(t) => items.push(Item::T(t)),
                    None => return err(line_no, format!("unknown terminal `{inner}`")),
                }
            } else if *tok == "eps" {
                return err(line_no, "`eps` must be the only symbol on the right-hand side");
            } else {
                match syms.nonterminal(tok) {
                    Some(a) => items.push(Item::N(a)),
                    None => return err(line_no, format!("unknown nonterminal `{tok}`")),
                }
            }
        }
        if items.is_empty() {
            return err(line_no, "empty right-hand side (write `eps`)");
        }
    }
    let rhs = match items.as_slice() {
        [] => Rhs::Epsilon,
        [Item::T(t)] => Rhs::Terminal(*t),
        [Item::N(b), Item::N(c)] => Rhs::Binary(*b, *c),
        [Item::N(b), Item::T(t)] if *b == lhs => Rhs::ExtLeftRec(*b, *t),
        [Item::T(t), Item::N(b)] if *b == lhs => Rhs::ExtRightRec(*t, *b),
        _ => {
            return err(
                line_no,
                "right-hand side must be `B C`, `'a'`, `eps`, `A 'a'` or `'a' A`",
            )
        }
    };

    let mut restriction: Option<Restriction> = None;
    for seg in segments {
        let seg = seg.trim();
        let r = restriction.get_or_insert_with(|| Restriction::span(0, None));
        if let Some(spec) = seg.strip_prefix("j in") {
            let spec = spec.trim();
            let inner = spec
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .map_or_else(|| err(line_no, format!("bad span `{spec}`")), Ok)?;
            let (lo, hi) = inner
                .split_once(',')
                .map_or_else(|| err(line_no, format!("bad span `{spec}`")), Ok)?;
            r.min_len = lo
                .trim()
                .parse()
                .or_else(|_| err(line_no, format!("bad span lower bound `{lo}`")))?;
            r.max_len = match hi.trim() {
                "*" => None,
                h => Some(h.parse().or_else(|_| err(line_no, format!("bad span upper bound `{h}`")))?),
            };
        } else if let Some(name) = seg.strip_prefix("i in mask:") {
            let name = name.trim();
            match masks.get(name) {
                Some(m) => r.mask = Some(m.clone()),
                None => return err(line_no, format!("unknown mask `{name}`")),
            }
        } else {
            return err(line_no, format!("unknown restriction `{seg}`"));
        }
    }
    Ok(Production { lhs, rhs, weight, restriction })
}

pub(super) fn format_production(g: &WeightedGrammar, p: &Production) -> String {
    let s = &g.symbols;
    let nt = |a: NonTerminal| s.nonterminal_name(a).to_string();
    let t = |t: Terminal| format!("'{}'", s.terminal_name(t));
    let rhs = match p.rhs {
        Rhs::Binary(b, c) => format!("{} {}", nt(b), nt(c)),
        Rhs::Terminal(a) => t(a),
        Rhs::Epsilon => "eps".to_string(),
        Rhs::ExtLeftRec(b, a) => format!("{} {}", nt(b), t(a)),
        Rhs::ExtRightRec(a, b) => format!("{} {}", t(a), nt(b)),
    };
    let mut out = format!("{} -> {} @ {}", nt(p.lhs), rhs, p.weight);
    if let Some(r) = &p.restriction {
        if r.has_span_bounds() {
            let hi = r.max_len.map_or("*".to_string(), |h| h.to_string());
            out.push_str(&format!(" | j in [{},{}]", r.min_len, hi));
        }
        if let Some(m) = &r.mask {
            out.push_str(&format!(" | i in mask:{}", m.name));
        }
    }
    out
}

pub(super) fn write_grammar(g: &WeightedGrammar, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let s = &g.symbols;
    writeln!(f, "terminals: {}", s.terminals.join(" "))?;
    writeln!(f, "nonterminals: {}", s.nonterminals.join(" "))?;
    writeln!(f, "start: {}", s.nonterminal_name(s.start))?;
    let mut flags = Vec::new();
    if g.flags.strict_cnf {
        flags.push("strict-cnf");
    }
    if g.flags.has_epsilon {
        flags.push("epsilon");
    }
    if g.flags.soft_encoded {
        flags.push("soft-encoded");
    }
    writeln!(f, "flags: {}", flags.join(" "))?;
    let mut written: Vec<&str> = Vec::new();
    for p in &g.productions {
        if let Some(m) = p.restriction.as_ref().and_then(|r| r.mask.as_ref()) {
            if !written.contains(&m.name.as_str()) {
                written.push(&m.name);
                let bits: String = m.allowed.iter().map(|&b| if b { '1' } else { '0' }).collect();
                writeln!(f, "mask {}: {}", m.name, bits)?;
            }
        }
    }
    for p in &g.productions {
        writeln!(f, "{}", format_production(g, p))?;
    }
    Ok(())
}
