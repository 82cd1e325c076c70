//! Propagation queue and depth-first branch and bound.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{Backend, BoolDomain, BoolVar, ConstraintSpec, IntDomain, IntVar, Model, RowId};
use crate::decomposition::{build_network, ConstraintNetwork};
use crate::domain::{DomainStore, TermSet};
use crate::grammar::Terminal;
use crate::wcyk::{Bound, Propagation, WcykPropagator};

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    TimeLimit,
    Unsat,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "Optimal",
            Status::TimeLimit => "TimeLimit",
            Status::Unsat => "Unsat",
        })
    }
}

/// An improving solution: its cost, the time since the search started and
/// the number of failed nodes so far.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Improvement {
    pub cost: i64,
    pub time: Duration,
    pub bt: u64,
}

impl fmt::Display for Improvement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cost={} time={:.3} bt={}", self.cost, self.time.as_secs_f64(), self.bt)
    }
}

/// A full assignment. Integer variables take their lower bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub rows: Vec<Vec<Terminal>>,
    pub ints: Vec<Bound>,
    pub bools: Vec<bool>,
    pub cost: i64,
}

#[derive(Clone, Debug)]
pub struct SolveLog {
    pub improvements: Vec<Improvement>,
    pub status: Status,
    /// Failed nodes over the whole search.
    pub backtracks: u64,
    pub nodes: u64,
    pub elapsed: Duration,
    pub best: Option<Solution>,
}

impl SolveLog {
    pub fn cost(&self) -> Option<i64> {
        self.best.as_ref().map(|s| s.cost)
    }

    /// Failures counted when the best solution was found.
    pub fn bt(&self) -> u64 {
        self.improvements.last().map_or(0, |i| i.bt)
    }

    pub fn status_line(&self) -> String {
        format!("status={} BT={}", self.status, self.backtracks)
    }

    /// One line per improving solution followed by the status line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for imp in &self.improvements {
            out.push_str(&imp.to_string());
            out.push('\n');
        }
        out.push_str(&self.status_line());
        out.push('\n');
        out
    }
}

enum Prop {
    Chart { prop: Arc<WcykPropagator>, row: usize, cost: usize },
    Network { prop: Arc<WcykPropagator>, row: usize, cost: usize, entailment: bool },
    Demand { vars: Vec<usize>, required: usize },
    Channel { var: usize, row: usize, pos: usize, value: Terminal },
    Objective { vars: Vec<usize> },
}

#[derive(Clone, Copy)]
enum Event {
    Row(usize, usize),
    Int(usize),
    Bool(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Fail;

#[derive(Clone)]
struct Space {
    rows: Vec<DomainStore>,
    ints: Vec<IntDomain>,
    bools: Vec<BoolDomain>,
    nets: Vec<Option<ConstraintNetwork>>,
}

impl Space {
    fn set_pos(&mut self, row: usize, pos: usize, d: TermSet, ev: &mut Vec<Event>) -> Result<(), Fail> {
        if d.is_empty() {
            return Err(Fail);
        }
        if self.rows[row].get(pos) != d {
            self.rows[row].set(pos, d);
            ev.push(Event::Row(row, pos));
        }
        Ok(())
    }

    fn raise(&mut self, v: usize, lo: Bound, ev: &mut Vec<Event>) -> Result<(), Fail> {
        let dom = &mut self.ints[v];
        if lo > dom.lo {
            dom.lo = lo;
            if dom.is_empty() {
                return Err(Fail);
            }
            ev.push(Event::Int(v));
        }
        Ok(())
    }

    fn lower(&mut self, v: usize, hi: Bound, ev: &mut Vec<Event>) -> Result<(), Fail> {
        let dom = &mut self.ints[v];
        if hi < dom.hi {
            dom.hi = hi;
            if dom.is_empty() {
                return Err(Fail);
            }
            ev.push(Event::Int(v));
        }
        Ok(())
    }

    fn fix(&mut self, v: usize, value: bool, ev: &mut Vec<Event>) -> Result<(), Fail> {
        let dom = self.bools[v];
        if !dom.allows(value) {
            return Err(Fail);
        }
        if dom.value().is_none() {
            self.bools[v] = BoolDomain::fixed(value);
            ev.push(Event::Bool(v));
        }
        Ok(())
    }
}

struct Engine {
    props: Vec<Prop>,
    row_subs: Vec<Vec<usize>>,
    pos_subs: Vec<Vec<Vec<usize>>>,
    int_subs: Vec<Vec<usize>>,
    bool_subs: Vec<Vec<usize>>,
    objective: Option<usize>,
    bound: Option<i64>,
}

impl Engine {
    fn compile(model: &Model) -> (Engine, Space) {
        let mut props = Vec::new();
        let mut cache: Vec<(*const crate::grammar::WeightedGrammar, Arc<WcykPropagator>)> = Vec::new();
        for c in model.constraints() {
            props.push(match c {
                ConstraintSpec::Wcfg(w) => {
                    let key = Arc::as_ptr(&w.grammar);
                    let prop = match cache.iter().find(|(k, _)| *k == key) {
                        Some((_, p)) => Arc::clone(p),
                        None => {
                            let p = if w.grammar.productions.iter().any(|p| p.rhs == crate::grammar::Rhs::Epsilon) {
                                WcykPropagator::with_epsilon(&w.grammar)
                            } else {
                                WcykPropagator::new(&w.grammar)
                            };
                            let p = Arc::new(p.expect("grammar checked when posted"));
                            cache.push((key, Arc::clone(&p)));
                            p
                        }
                    };
                    let (row, cost) = (w.row.0, w.cost.0);
                    match w.backend {
                        Backend::Monolithic => Prop::Chart { prop, row, cost },
                        Backend::Decomposition => Prop::Network { prop, row, cost, entailment: false },
                        Backend::DecompositionWithEntailment => {
                            Prop::Network { prop, row, cost, entailment: true }
                        }
                    }
                }
                ConstraintSpec::Demand(d) => {
                    Prop::Demand { vars: d.vars.iter().map(|v| v.0).collect(), required: d.required }
                }
                ConstraintSpec::Channel(ch) => {
                    Prop::Channel { var: ch.var.0, row: ch.row.0, pos: ch.position, value: ch.value }
                }
            });
        }
        let objective = (!model.objective().is_empty()).then(|| {
            props.push(Prop::Objective { vars: model.objective().iter().map(|v| v.0).collect() });
            props.len() - 1
        });

        let rows: Vec<DomainStore> = (0..model.num_rows()).map(|r| model.row_domains(RowId(r)).clone()).collect();
        let mut engine = Engine {
            row_subs: vec![Vec::new(); rows.len()],
            pos_subs: rows.iter().map(|r| vec![Vec::new(); r.len() + 1]).collect(),
            int_subs: vec![Vec::new(); model.num_ints()],
            bool_subs: vec![Vec::new(); model.num_bools()],
            props,
            objective,
            bound: None,
        };
        for (p, prop) in engine.props.iter().enumerate() {
            match prop {
                Prop::Chart { row, cost, .. } | Prop::Network { row, cost, .. } => {
                    engine.row_subs[*row].push(p);
                    engine.int_subs[*cost].push(p);
                }
                Prop::Demand { vars, .. } => vars.iter().for_each(|&v| engine.bool_subs[v].push(p)),
                Prop::Channel { var, row, pos, .. } => {
                    engine.pos_subs[*row][*pos].push(p);
                    engine.bool_subs[*var].push(p);
                }
                Prop::Objective { vars } => vars.iter().for_each(|&v| engine.int_subs[v].push(p)),
            }
        }
        let space = Space {
            ints: (0..model.num_ints()).map(|v| model.int_domain(IntVar(v))).collect(),
            bools: (0..model.num_bools()).map(|v| model.bool_domain(BoolVar(v))).collect(),
            nets: vec![None; engine.props.len()],
            rows,
        };
        (engine, space)
    }

    fn subscribers(&self, e: Event) -> impl Iterator<Item = usize> + '_ {
        let (a, b): (&[usize], &[usize]) = match e {
            Event::Row(r, pos) => (&self.row_subs[r], &self.pos_subs[r][pos]),
            Event::Int(v) => (&self.int_subs[v], &[]),
            Event::Bool(v) => (&self.bool_subs[v], &[]),
        };
        a.iter().chain(b).copied()
    }

    fn propagate(&self, space: &mut Space, seed: impl IntoIterator<Item = usize>) -> Result<(), Fail> {
        let mut queue = VecDeque::new();
        let mut queued = vec![false; self.props.len()];
        for p in seed {
            if !queued[p] {
                queued[p] = true;
                queue.push_back(p);
            }
        }
        let mut events = Vec::new();
        while let Some(p) = queue.pop_front() {
            queued[p] = false;
            events.clear();
            self.run(p, space, &mut events)?;
            for &e in &events {
                for s in self.subscribers(e) {
                    if s != p && !queued[s] {
                        queued[s] = true;
                        queue.push_back(s);
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_pruned(
        space: &mut Space,
        row: usize,
        cost: usize,
        pruned: &DomainStore,
        root_min: Bound,
        ev: &mut Vec<Event>,
    ) -> Result<(), Fail> {
        for (pos, d) in pruned.iter() {
            space.set_pos(row, pos, d, ev)?;
        }
        space.raise(cost, root_min, ev)
    }

    fn run(&self, p: usize, space: &mut Space, ev: &mut Vec<Event>) -> Result<(), Fail> {
        match &self.props[p] {
            Prop::Chart { prop, row, cost } => {
                let budget = space.ints[*cost].hi;
                if budget < 0 {
                    return Err(Fail);
                }
                match prop.propagate(budget, &space.rows[*row]).expect("inputs checked when posted") {
                    Propagation::Infeasible => Err(Fail),
                    Propagation::Pruned { domains, root_min } => {
                        Self::apply_pruned(space, *row, *cost, &domains, root_min, ev)
                    }
                }
            }
            Prop::Network { prop, row, cost, entailment } => {
                let budget = space.ints[*cost].hi;
                if budget < 0 {
                    return Err(Fail);
                }
                let mut net = match space.nets[p].take() {
                    Some(mut net) => {
                        net.set_budget(budget);
                        net
                    }
                    None => match build_network(prop, budget, &space.rows[*row]).expect("inputs checked when posted") {
                        Some(mut net) => {
                            net.set_entailment(*entailment);
                            net
                        }
                        None => return Err(Fail),
                    },
                };
                let mut d = space.rows[*row].clone();
                net.fixpoint(&mut d).map_err(|_| Fail)?;
                let root_min = net.root_min();
                space.nets[p] = Some(net);
                Self::apply_pruned(space, *row, *cost, &d, root_min, ev)
            }
            Prop::Demand { vars, required } => {
                let mut yes = 0;
                let mut open = 0;
                for &v in vars {
                    match space.bools[v].value() {
                        Some(true) => yes += 1,
                        Some(false) => {}
                        None => open += 1,
                    }
                }
                if yes + open < *required {
                    return Err(Fail);
                }
                if open > 0 && yes + open == *required {
                    for &v in vars {
                        if space.bools[v].value().is_none() {
                            space.fix(v, true, ev)?;
                        }
                    }
                }
                Ok(())
            }
            Prop::Channel { var, row, pos, value } => {
                let d = space.rows[*row].get(*pos);
                match space.bools[*var].value() {
                    Some(true) => space.set_pos(*row, *pos, d.intersect(TermSet::singleton(*value)), ev)?,
                    Some(false) => {
                        let mut nd = d;
                        nd.remove(*value);
                        space.set_pos(*row, *pos, nd, ev)?
                    }
                    None => {}
                }
                let d = space.rows[*row].get(*pos);
                if !d.contains(*value) {
                    space.fix(*var, false, ev)?;
                } else if d.len() == 1 {
                    space.fix(*var, true, ev)?;
                }
                Ok(())
            }
            Prop::Objective { vars } => {
                let Some(bound) = self.bound else { return Ok(()) };
                let sum: Bound = vars.iter().map(|&v| space.ints[v].lo).sum();
                if sum > bound {
                    return Err(Fail);
                }
                for &v in vars {
                    let slack = bound - (sum - space.ints[v].lo);
                    space.lower(v, slack, ev)?;
                }
                Ok(())
            }
        }
    }
}

enum Choice {
    Position(usize, usize, Terminal),
    Bool(usize),
}

/// Smallest row domain first, ties by row then position, values in
/// alphabet order; then undecided Booleans by index.
fn select(space: &Space) -> Option<Choice> {
    let mut best: Option<(usize, usize, usize)> = None;
    for (r, row) in space.rows.iter().enumerate() {
        for (pos, d) in row.iter() {
            let size = d.len();
            if size > 1 && best.is_none_or(|(s, _, _)| size < s) {
                best = Some((size, r, pos));
            }
        }
    }
    if let Some((_, r, pos)) = best {
        let a = space.rows[r].get(pos).iter().next().expect("non-empty");
        return Some(Choice::Position(r, pos, a));
    }
    space.bools.iter().position(|b| b.value().is_none()).map(Choice::Bool)
}

struct Search<'a, F: FnMut(&Improvement)> {
    engine: Engine,
    start: Instant,
    deadline: Option<Instant>,
    failures: u64,
    nodes: u64,
    timed_out: bool,
    improvements: Vec<Improvement>,
    best: Option<Solution>,
    objective_vars: Vec<usize>,
    on_improvement: &'a mut F,
}

impl<F: FnMut(&Improvement)> Search<'_, F> {
    fn node(&mut self, mut space: Space, seed: Vec<usize>) {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out = true;
            return;
        }
        self.nodes += 1;
        let seed = seed.into_iter().chain(self.engine.objective);
        if self.engine.propagate(&mut space, seed).is_err() {
            self.failures += 1;
            return;
        }
        match select(&space) {
            None => self.record(&space),
            Some(Choice::Position(r, pos, a)) => {
                let d = space.rows[r].get(pos);
                let mut rest = d;
                rest.remove(a);
                for dom in [TermSet::singleton(a), rest] {
                    let mut child = space.clone();
                    let mut ev = Vec::new();
                    child.set_pos(r, pos, dom, &mut ev).expect("branch keeps a value");
                    let seed = self.seed(&ev);
                    self.node(child, seed);
                    if self.timed_out {
                        return;
                    }
                }
            }
            Some(Choice::Bool(v)) => {
                for value in [true, false] {
                    let mut child = space.clone();
                    let mut ev = Vec::new();
                    child.fix(v, value, &mut ev).expect("undecided");
                    let seed = self.seed(&ev);
                    self.node(child, seed);
                    if self.timed_out {
                        return;
                    }
                }
            }
        }
    }

    fn seed(&self, ev: &[Event]) -> Vec<usize> {
        ev.iter().flat_map(|&e| self.engine.subscribers(e)).collect()
    }

    fn record(&mut self, space: &Space) {
        let cost: i64 = self.objective_vars.iter().map(|&v| space.ints[v].lo).sum();
        let sol = Solution {
            rows: space
                .rows
                .iter()
                .map(|r| r.iter().map(|(_, d)| d.single().expect("assigned")).collect())
                .collect(),
            ints: space.ints.iter().map(|d| d.lo).collect(),
            bools: space.bools.iter().map(|b| b.value().expect("assigned")).collect(),
            cost,
        };
        let imp = Improvement { cost, time: self.start.elapsed(), bt: self.failures };
        (self.on_improvement)(&imp);
        self.improvements.push(imp);
        self.best = Some(sol);
        self.engine.bound = Some(cost - 1);
    }
}

/// Depth-first branch and bound minimizing the model's objective. After
/// each improving solution of cost `c` the objective is bounded by `c - 1`.
pub fn solve_min(model: &Model, options: &SolveOptions) -> SolveLog {
    solve_min_with(model, options, |_| {})
}

/// As [`solve_min`], calling `on_improvement` as solutions are found.
pub fn solve_min_with(model: &Model, options: &SolveOptions, mut on_improvement: impl FnMut(&Improvement)) -> SolveLog {
    let (engine, space) = Engine::compile(model);
    let start = Instant::now();
    let all: Vec<usize> = (0..engine.props.len()).collect();
    let mut search = Search {
        engine,
        start,
        deadline: options.time_limit.map(|t| start + t),
        failures: 0,
        nodes: 0,
        timed_out: false,
        improvements: Vec::new(),
        best: None,
        objective_vars: model.objective().iter().map(|v| v.0).collect(),
        on_improvement: &mut on_improvement,
    };
    search.node(space, all);
    let status = if search.timed_out {
        Status::TimeLimit
    } else if search.best.is_some() {
        Status::Optimal
    } else {
        Status::Unsat
    };
    SolveLog {
        improvements: search.improvements,
        status,
        backtracks: search.failures,
        nodes: search.nodes,
        elapsed: start.elapsed(),
        best: search.best,
    }
}

/// Variable domains after propagating every constraint once to fixpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootState {
    pub rows: Vec<DomainStore>,
    pub ints: Vec<IntDomain>,
    pub bools: Vec<BoolDomain>,
}

/// Root-node propagation without search; `None` when it fails.
pub fn propagate_root(model: &Model) -> Option<RootState> {
    let (engine, mut space) = Engine::compile(model);
    engine.propagate(&mut space, 0..engine.props.len()).ok()?;
    Some(RootState { rows: space.rows, ints: space.ints, bools: space.bools })
}
