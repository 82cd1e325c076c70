//! Shift scheduling: instance files, the shift grammar and the model.
//!
//! A shift is `r+ P r+` or `r+ F r+`, where a part-time block
//! `P = W b W` holds two work stretches around a break and a full-time
//! block `F = P L P` adds a lunch `L = l+` between two such blocks. A work
//! stretch `W` is a run of one activity over open slots. Activity slots
//! weigh 1, so a row's cost counts its worked slots.
//!
//! Span restrictions on `P`, `F`, `L` and `W` come from the instance file.
//! A work stretch never switches activity.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use thiserror::Error;

use crate::cp::{Backend, BoolVar, IntVar, Model, ModelError, RowId};
use crate::domain::DomainStore;
use crate::grammar::{NonTerminal, PositionMask, Production, Restriction, Rhs, SymbolTable, Terminal, WeightedGrammar};

/// Slots per day in the reference setting.
pub const DEFAULT_SLOTS: usize = 96;

/// Inclusive span bounds; `hi = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpanBounds {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl SpanBounds {
    pub fn new(lo: usize, hi: Option<usize>) -> Self {
        SpanBounds { lo, hi }
    }

    fn restriction(&self) -> Restriction {
        Restriction::span(self.lo, self.hi)
    }
}

impl fmt::Display for SpanBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "{},{}", self.lo, hi),
            None => write!(f, "{},*", self.lo),
        }
    }
}

/// Span bounds for the part-time block, full-time block, lunch and work
/// stretch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShiftRestrictions {
    pub part: SpanBounds,
    pub full: SpanBounds,
    pub lunch: SpanBounds,
    pub work: SpanBounds,
}

impl ShiftRestrictions {
    /// The 96-slot bounds: blocks of 13..24 and 30..38 slots, a 4-slot
    /// lunch, work stretches of at least 4 slots.
    pub const REFERENCE: ShiftRestrictions = ShiftRestrictions {
        part: SpanBounds { lo: 13, hi: Some(24) },
        full: SpanBounds { lo: 30, hi: Some(38) },
        lunch: SpanBounds { lo: 4, hi: Some(4) },
        work: SpanBounds { lo: 4, hi: None },
    };

    /// Reference bounds scaled to `n` slots, rounded, at least 1.
    pub fn scaled(n: usize) -> Self {
        let scale = |v: usize| ((v * n + DEFAULT_SLOTS / 2) / DEFAULT_SLOTS).max(1);
        let s = |b: SpanBounds| SpanBounds { lo: scale(b.lo), hi: b.hi.map(scale) };
        let r = Self::REFERENCE;
        ShiftRestrictions { part: s(r.part), full: s(r.full), lunch: s(r.lunch), work: s(r.work) }
    }

    fn entries(&self) -> [(&'static str, SpanBounds); 4] {
        [("P", self.part), ("F", self.full), ("L", self.lunch), ("W", self.work)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleInstance {
    pub n: usize,
    pub m: usize,
    pub activities: Vec<String>,
    pub open: Vec<bool>,
    /// `demand[k][i - 1]` for activity `k` at slot `i`.
    pub demand: Vec<Vec<u32>>,
    /// Seconds.
    pub time_limit: f64,
    pub restrictions: ShiftRestrictions,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid instance: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Model(#[from] ModelError),
}

const RESERVED: [&str; 3] = ["b", "l", "r"];

impl ScheduleInstance {
    /// Problems with the instance, one message per violation.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push("n must be at least 1".to_string());
        }
        if self.m == 0 {
            out.push("m must be at least 1".to_string());
        }
        if self.activities.is_empty() {
            out.push("at least one activity is required".to_string());
        }
        for (k, a) in self.activities.iter().enumerate() {
            if RESERVED.contains(&a.as_str()) {
                out.push(format!("activity name `{a}` is reserved"));
            }
            if a.is_empty() || !a.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                out.push(format!("activity name `{a}` must be alphanumeric"));
            }
            if self.activities[..k].contains(a) {
                out.push(format!("activity `{a}` given twice"));
            }
        }
        if self.open.len() != self.n {
            out.push(format!("open mask has {} slots, expected {}", self.open.len(), self.n));
        }
        if self.demand.len() != self.activities.len() {
            out.push(format!("{} demand rows for {} activities", self.demand.len(), self.activities.len()));
        }
        for (k, row) in self.demand.iter().enumerate() {
            let name = self.activities.get(k).map_or("?", String::as_str);
            if row.len() != self.n {
                out.push(format!("demand for {name} has {} slots, expected {}", row.len(), self.n));
            }
            for (i, &d) in row.iter().enumerate() {
                if d > 0 && !self.open.get(i).copied().unwrap_or(false) {
                    out.push(format!("slot {} is closed but demand({}, {name}) = {d}", i + 1, i + 1));
                }
            }
        }
        for (name, b) in self.restrictions.entries() {
            if b.lo == 0 || b.hi.is_some_and(|hi| hi < b.lo) {
                out.push(format!("restriction {name}: {b} is empty or starts at 0"));
            }
        }
        if self.time_limit.is_nan() || self.time_limit < 0.0 {
            out.push(format!("time limit {} must be non-negative", self.time_limit));
        }
        out
    }

    pub fn checked(self) -> Result<Self, ScheduleError> {
        let problems = self.validate();
        if problems.is_empty() {
            Ok(self)
        } else {
            Err(ScheduleError::Invalid(problems))
        }
    }

    /// Parses the sectioned instance format. Missing demand rows are zero;
    /// missing restrictions default to the reference bounds scaled to `n`.
    pub fn parse(text: &str) -> Result<Self, ScheduleError> {
        let fail = |line: usize, message: String| ScheduleError::Parse { line, message };
        let mut section = String::new();
        let (mut n, mut m, mut activities, mut time_limit) = (None, None, None, 10.0);
        let mut open: Option<Vec<bool>> = None;
        let mut demand: Vec<(usize, String, Vec<u32>)> = Vec::new();
        let mut restr: Vec<(usize, String, SpanBounds)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if !["meta", "open", "demand", "restrictions"].contains(&section.as_str()) {
                    return Err(fail(line_no, format!("unknown section [{section}]")));
                }
                continue;
            }
            match section.as_str() {
                "meta" => {
                    let (key, value) = line
                        .split_once('=')
                        .ok_or_else(|| fail(line_no, format!("expected key=value, got `{line}`")))?;
                    let value = value.trim();
                    let int = |v: &str| v.parse::<usize>().map_err(|_| fail(line_no, format!("bad integer `{v}`")));
                    match key.trim() {
                        "n" => n = Some(int(value)?),
                        "m" => m = Some(int(value)?),
                        "activities" => {
                            activities = Some(value.split(',').map(|a| a.trim().to_string()).collect::<Vec<_>>())
                        }
                        "time_limit" => {
                            time_limit = value
                                .parse::<f64>()
                                .map_err(|_| fail(line_no, format!("bad time limit `{value}`")))?
                        }
                        other => return Err(fail(line_no, format!("unknown key `{other}`"))),
                    }
                }
                "open" => {
                    let bits = line
                        .chars()
                        .map(|c| match c {
                            '0' => Ok(false),
                            '1' => Ok(true),
                            _ => Err(fail(line_no, format!("open mask must be 0/1, found `{c}`"))),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    open.get_or_insert_with(Vec::new).extend(bits);
                }
                "demand" => {
                    let (name, values) = line
                        .split_once(':')
                        .ok_or_else(|| fail(line_no, format!("expected `activity: d1,d2,...`, got `{line}`")))?;
                    let values = values
                        .split(',')
                        .map(|v| {
                            let v = v.trim();
                            v.parse::<u32>().map_err(|_| fail(line_no, format!("bad demand `{v}`")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    demand.push((line_no, name.trim().to_string(), values));
                }
                "restrictions" => {
                    let (name, value) = line
                        .split_once(':')
                        .ok_or_else(|| fail(line_no, format!("expected `name: lo,hi`, got `{line}`")))?;
                    let (lo, hi) = value
                        .split_once(',')
                        .ok_or_else(|| fail(line_no, format!("expected `lo,hi`, got `{}`", value.trim())))?;
                    let lo = lo.trim().parse::<usize>().map_err(|_| fail(line_no, format!("bad bound `{}`", lo.trim())))?;
                    let hi = match hi.trim() {
                        "*" => None,
                        h => Some(h.parse::<usize>().map_err(|_| fail(line_no, format!("bad bound `{h}`")))?),
                    };
                    restr.push((line_no, name.trim().to_string(), SpanBounds::new(lo, hi)));
                }
                _ => return Err(fail(line_no, "content before the first section".into())),
            }
        }
        let n = n.ok_or_else(|| fail(0, "missing n in [meta]".into()))?;
        let m = m.ok_or_else(|| fail(0, "missing m in [meta]".into()))?;
        let activities = activities.ok_or_else(|| fail(0, "missing activities in [meta]".into()))?;
        let open = open.unwrap_or_else(|| vec![true; n]);
        let mut rows = vec![vec![0u32; n]; activities.len()];
        for (line, name, values) in demand {
            let k = activities
                .iter()
                .position(|a| *a == name)
                .ok_or_else(|| fail(line, format!("unknown activity `{name}`")))?;
            rows[k] = values;
        }
        let mut restrictions = ShiftRestrictions::scaled(n);
        for (line, name, b) in restr {
            match name.as_str() {
                "P" => restrictions.part = b,
                "F" => restrictions.full = b,
                "L" => restrictions.lunch = b,
                "W" => restrictions.work = b,
                other => return Err(fail(line, format!("unknown restriction `{other}` (expected P, F, L or W)"))),
            }
        }
        ScheduleInstance { n, m, activities, open, demand: rows, time_limit, restrictions }.checked()
    }

    /// The format read by [`ScheduleInstance::parse`], restrictions explicit.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[meta]\nn={}\nm={}\nactivities={}\ntime_limit={}", self.n, self.m, self.activities.join(","), self.time_limit);
        out.push_str("[open]\n");
        out.extend(self.open.iter().map(|&o| if o { '1' } else { '0' }));
        out.push_str("\n[demand]\n");
        for (a, row) in self.activities.iter().zip(&self.demand) {
            let values: Vec<String> = row.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{a}: {}", values.join(","));
        }
        out.push_str("[restrictions]\n");
        for (name, b) in self.restrictions.entries() {
            let _ = writeln!(out, "{name}: {b}");
        }
        out
    }

    /// Terminal index of activity `k`.
    pub fn activity_terminal(&self, k: usize) -> Terminal {
        Terminal(k as u16)
    }
}

/// The shift grammar in CNF. Terminals are the activities followed by `b`,
/// `l`, `r`.
pub fn schedule_grammar(inst: &ScheduleInstance) -> WeightedGrammar {
    let mut terminals = inst.activities.clone();
    terminals.extend(RESERVED.iter().map(|s| s.to_string()));
    let mut nonterminals: Vec<String> =
        ["S", "SP", "SF", "P", "P1", "F", "F1", "L", "Lr", "R", "W", "T_b", "T_l", "T_r"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let first_activity_nt = nonterminals.len();
    for a in &inst.activities {
        nonterminals.push(format!("A_{a}"));
        nonterminals.push(format!("T_{a}"));
    }
    let nt = |name: &str| NonTerminal(nonterminals.iter().position(|x| x == name).expect("declared") as u16);
    let k = inst.activities.len();
    let (tb, tl, tr) = (Terminal(k as u16), Terminal(k as u16 + 1), Terminal(k as u16 + 2));
    let open = Arc::new(PositionMask { name: "open".into(), allowed: inst.open.clone() });
    let r = inst.restrictions;

    let bin = |a: &str, b: &str, c: &str| Production::new(nt(a), Rhs::Binary(nt(b), nt(c)), 0);
    let lex = |a: &str, t: Terminal, w: u32| Production::new(nt(a), Rhs::Terminal(t), w);
    let mut ps = vec![
        bin("S", "R", "SP"),
        bin("S", "R", "SF"),
        bin("SP", "P", "R"),
        bin("SF", "F", "R"),
        bin("P", "W", "P1").restricted(r.part.restriction()),
        bin("P1", "T_b", "W"),
        bin("F", "P", "F1").restricted(r.full.restriction()),
        bin("F1", "L", "P"),
        bin("L", "T_l", "Lr").restricted(r.lunch.restriction()),
        lex("L", tl, 0).restricted(r.lunch.restriction()),
        bin("Lr", "T_l", "Lr"),
        lex("Lr", tl, 0),
        bin("R", "T_r", "R"),
        lex("R", tr, 0),
        lex("T_b", tb, 0),
        lex("T_l", tl, 0),
        lex("T_r", tr, 0),
    ];
    for (idx, _) in inst.activities.iter().enumerate() {
        let a_nt = NonTerminal((first_activity_nt + 2 * idx) as u16);
        let t_nt = NonTerminal((first_activity_nt + 2 * idx + 1) as u16);
        let t = inst.activity_terminal(idx);
        let work = r.work.restriction().with_mask(Arc::clone(&open));
        let in_open = Restriction::mask(Arc::clone(&open));
        ps.push(Production::new(nt("W"), Rhs::Binary(t_nt, a_nt), 0).restricted(work.clone()));
        ps.push(Production::new(nt("W"), Rhs::Terminal(t), 1).restricted(work));
        ps.push(Production::new(a_nt, Rhs::Binary(t_nt, a_nt), 0).restricted(in_open.clone()));
        ps.push(Production::new(a_nt, Rhs::Terminal(t), 1).restricted(in_open));
        ps.push(Production::new(t_nt, Rhs::Terminal(t), 1));
    }
    let symbols = SymbolTable { terminals, nonterminals, start: NonTerminal(0) };
    WeightedGrammar::new(symbols, ps)
}

/// The model of an instance with handles to its variables.
#[derive(Clone, Debug)]
pub struct ScheduleModel {
    pub model: Model,
    pub grammar: Arc<WeightedGrammar>,
    pub rows: Vec<RowId>,
    pub costs: Vec<IntVar>,
    /// `bools[j][i - 1][k]` is `b(i, j, a_k)`.
    pub bools: Vec<Vec<Vec<BoolVar>>>,
}

/// One grammar constraint per employee row, channelled Booleans for every
/// (slot, employee, activity), a demand constraint `sum_j b(i,j,a_k) >=
/// d + 1` wherever `d(i, a_k) > 0`, and the objective `sum_j z_j`.
pub fn build_schedule_model(inst: &ScheduleInstance, backend: Backend) -> Result<ScheduleModel, ScheduleError> {
    let problems = inst.validate();
    if !problems.is_empty() {
        return Err(ScheduleError::Invalid(problems));
    }
    let grammar = Arc::new(schedule_grammar(inst));
    let sigma = grammar.num_terminals();
    let mut model = Model::new();
    let mut rows = Vec::new();
    let mut costs = Vec::new();
    let mut bools = Vec::new();
    for _ in 0..inst.m {
        let row = model.add_row(DomainStore::full(inst.n, sigma), sigma);
        let z = model.add_int(0, inst.n as i64)?;
        model.post_wcfg(Arc::clone(&grammar), z, row, backend)?;
        let mut per_slot = Vec::with_capacity(inst.n);
        for i in 1..=inst.n {
            let mut per_activity = Vec::with_capacity(inst.activities.len());
            for k in 0..inst.activities.len() {
                let b = model.add_bool();
                model.channel(b, row, i, inst.activity_terminal(k))?;
                per_activity.push(b);
            }
            per_slot.push(per_activity);
        }
        rows.push(row);
        costs.push(z);
        bools.push(per_slot);
    }
    for (k, demand) in inst.demand.iter().enumerate() {
        for (i, &d) in demand.iter().enumerate() {
            if d > 0 {
                let vars = bools.iter().map(|emp| emp[i][k]).collect();
                model.post_demand(vars, i64::from(d))?;
            }
        }
    }
    model.minimize(costs.clone())?;
    Ok(ScheduleModel { model, grammar, rows, costs, bools })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp::ConstraintSpec;
    use crate::grammar::validate;
    use crate::oracle::string_min_weight;

    fn tiny() -> ScheduleInstance {
        ScheduleInstance::parse(
            "[meta]\nn=8\nm=1\nactivities=a\ntime_limit=5\n[open]\n11111111\n\
             [restrictions]\nP: 3,4\nF: 7,7\nL: 1,1\nW: 1,*\n",
        )
        .unwrap()
    }

    fn word(g: &WeightedGrammar, s: &str) -> Vec<Terminal> {
        s.chars().map(|c| g.symbols.terminal(&c.to_string()).unwrap()).collect()
    }

    #[test]
    fn grammar_is_valid_cnf() {
        let g = schedule_grammar(&tiny());
        assert!(g.flags.strict_cnf);
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn shift_strings() {
        let g = schedule_grammar(&tiny());
        assert_eq!(string_min_weight(&g, &word(&g, "rabaarrr")), Some(3));
        assert_eq!(string_min_weight(&g, &word(&g, "rrabarrr")), Some(2));
        // block of 5 exceeds P's bound
        assert_eq!(string_min_weight(&g, &word(&g, "rabaaarr")), None);
        // rest on both sides is mandatory
        assert_eq!(string_min_weight(&g, &word(&g, "abarrrrr")), None);
        assert_eq!(string_min_weight(&g, &word(&g, "rrrrrrrr")), None);
    }

    #[test]
    fn closed_slots_block_work() {
        let mut inst = tiny();
        inst.open[2] = false;
        let g = schedule_grammar(&inst);
        assert_eq!(string_min_weight(&g, &word(&g, "rabaarrr")), Some(3));
        assert_eq!(string_min_weight(&g, &word(&g, "rrabarrr")), None);
    }

    #[test]
    fn model_counts() {
        let mut inst = ScheduleInstance::parse("[meta]\nn=96\nm=1\nactivities=a\n").unwrap();
        inst.restrictions = ShiftRestrictions::REFERENCE;
        assert_eq!(ShiftRestrictions::scaled(96), ShiftRestrictions::REFERENCE);
        let sm = build_schedule_model(&inst, Backend::Monolithic).unwrap();
        let count = |f: fn(&ConstraintSpec) -> bool| sm.model.constraints().iter().filter(|c| f(c)).count();
        assert_eq!(count(|c| matches!(c, ConstraintSpec::Wcfg(_))), 1);
        assert_eq!(count(|c| matches!(c, ConstraintSpec::Channel(_))), 96);
        assert_eq!(count(|c| matches!(c, ConstraintSpec::Demand(_))), 0);
        assert_eq!(sm.model.objective(), &[sm.costs[0]]);
    }

    #[test]
    fn closed_slot_with_demand_rejected() {
        let err = ScheduleInstance::parse("[meta]\nn=3\nm=1\nactivities=a\n[open]\n101\n[demand]\na: 0,1,0\n")
            .unwrap_err();
        match err {
            ScheduleError::Invalid(p) => assert!(p[0].contains("slot 2 is closed"), "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_are_located() {
        let err = ScheduleInstance::parse("[meta]\nn=x\n").unwrap_err();
        assert_eq!(err, ScheduleError::Parse { line: 2, message: "bad integer `x`".into() });
        let err = ScheduleInstance::parse("[meta]\nn=2\nm=1\nactivities=a\n[open]\n1x\n").unwrap_err();
        assert!(matches!(err, ScheduleError::Parse { line: 6, .. }));
    }

    #[test]
    fn file_round_trip() {
        let mut inst = tiny();
        inst.demand[0][3] = 1;
        let text = inst.to_file_string();
        assert_eq!(ScheduleInstance::parse(&text).unwrap(), inst);
    }

    #[test]
    fn scaled_restrictions() {
        let s = ShiftRestrictions::scaled(16);
        assert_eq!(s.part, SpanBounds::new(2, Some(4)));
        assert_eq!(s.lunch, SpanBounds::new(1, Some(1)));
        assert_eq!(s.work, SpanBounds::new(1, None));
    }
}
