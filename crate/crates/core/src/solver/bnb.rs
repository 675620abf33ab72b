//! LP-based branch-and-bound for pure binary models.
//!
//! Best-bound node selection (deeper node first on ties, then creation
//! order), branching on the most fractional variable with the lowest index
//! winning ties. Children are evaluated eagerly so every open node carries
//! its LP bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::lp::{LpError, LpSession, SolverError, TOL_LP};
use crate::model::{Fixings, MipModel};

const INT_TOL: f64 = 1e-6;
/// Open nodes beyond this many are stored without their LP basis and
/// re-solved from the root when popped.
const STORED_SESSIONS: usize = 64;

#[derive(Debug, Clone)]
pub struct BnbConfig {
    pub time_limit: Duration,
    /// Deterministic work budget: LP-evaluated nodes.
    pub node_limit: Option<usize>,
    /// Incumbents must beat this value by more than `gap_tolerance`; nodes
    /// whose bound cannot do so are pruned.
    pub cutoff: Option<f64>,
    /// Absolute optimality tolerance.
    pub gap_tolerance: f64,
    pub fixings: Fixings,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            time_limit: Duration::from_secs(3600),
            node_limit: None,
            cutoff: None,
            gap_tolerance: 1e-6,
            fixings: Fixings::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    /// Search completed with an incumbent.
    Optimal,
    /// Search completed; no feasible point exists.
    Infeasible,
    /// Search completed; nothing beats the cutoff.
    CutoffExhausted,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent, `-inf` without one.
    pub objective: f64,
    /// Upper bound on the optimum over the searched region.
    pub best_bound: f64,
    pub nodes: usize,
}

/// Primal heuristic: maps an LP point to a candidate 0/1 vector. The
/// solver verifies candidates before accepting them.
pub type Heuristic<'a> = &'a dyn Fn(&[f64]) -> Option<Vec<f64>>;

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    path: Vec<(usize, bool)>,
    session: Option<LpSession>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

fn most_fractional(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in values.iter().enumerate() {
        let frac = (v - v.floor()).min(v.ceil() - v);
        if frac > INT_TOL && best.is_none_or(|(_, f)| frac > f) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

struct Search<'a> {
    model: &'a MipModel,
    config: &'a BnbConfig,
    incumbent: Option<Vec<f64>>,
    objective: f64,
}

impl Search<'_> {
    fn threshold(&self) -> f64 {
        let floor = self.config.cutoff.unwrap_or(f64::NEG_INFINITY).max(self.objective);
        floor + self.config.gap_tolerance
    }

    /// Rounds `values`, verifies it and keeps it when it improves.
    fn offer(&mut self, values: &[f64]) {
        if values.len() != self.model.num_vars() {
            return;
        }
        let rounded: Vec<f64> = values.iter().map(|v| v.round().clamp(0.0, 1.0)).collect();
        if values.iter().zip(&rounded).any(|(v, r)| (v - r).abs() > INT_TOL) {
            return;
        }
        if !self.config.fixings.respected_by(&rounded)
            || !self.model.violated_rows(&rounded, TOL_LP).is_empty()
        {
            return;
        }
        let obj = self.model.objective_value(&rounded);
        let beats_cutoff = self
            .config
            .cutoff
            .is_none_or(|c| obj > c + self.config.gap_tolerance);
        if beats_cutoff && obj > self.objective {
            self.objective = obj;
            self.incumbent = Some(rounded);
        }
    }
}

pub fn solve_mip(model: &MipModel, config: &BnbConfig) -> Result<MipResult, SolverError> {
    solve_mip_with(model, config, None)
}

/// Branch-and-bound with an optional primal heuristic run at every node.
/// Fixed variables are substituted out before the search starts; the
/// heuristic still sees and returns full-length vectors.
pub fn solve_mip_with(
    model: &MipModel,
    config: &BnbConfig,
    heuristic: Option<Heuristic<'_>>,
) -> Result<MipResult, SolverError> {
    if config.fixings.is_empty() {
        return search(model, config, heuristic);
    }
    let Ok(restricted) = model.restrict(&config.fixings) else {
        return Ok(MipResult {
            status: MipStatus::Infeasible,
            incumbent: None,
            objective: f64::NEG_INFINITY,
            best_bound: config.cutoff.unwrap_or(f64::NEG_INFINITY),
            nodes: 0,
        });
    };
    if restricted.keep.is_empty() {
        let obj = restricted.offset;
        let beats = config.cutoff.is_none_or(|c| obj > c + config.gap_tolerance);
        return Ok(MipResult {
            status: if beats { MipStatus::Optimal } else { MipStatus::CutoffExhausted },
            incumbent: beats.then(|| restricted.base.clone()),
            objective: if beats { obj } else { f64::NEG_INFINITY },
            best_bound: if beats { obj } else { config.cutoff.unwrap_or(obj) },
            nodes: 1,
        });
    }
    let inner = BnbConfig {
        cutoff: config.cutoff.map(|c| c - restricted.offset),
        fixings: Fixings::new(),
        ..config.clone()
    };
    let lifted = |values: &[f64]| -> Option<Vec<f64>> {
        let h = heuristic?;
        let full = h(&restricted.expand(values))?;
        (full.len() == model.num_vars() && config.fixings.respected_by(&full))
            .then(|| restricted.compress(&full))
    };
    let r = search(&restricted.model, &inner, heuristic.map(|_| &lifted as Heuristic<'_>))?;
    let shift = |v: f64| if v.is_finite() { v + restricted.offset } else { v };
    Ok(MipResult {
        status: r.status,
        incumbent: r.incumbent.map(|v| restricted.expand(&v)),
        objective: shift(r.objective),
        best_bound: shift(r.best_bound),
        nodes: r.nodes,
    })
}

fn search(
    model: &MipModel,
    config: &BnbConfig,
    heuristic: Option<Heuristic<'_>>,
) -> Result<MipResult, SolverError> {
    let start = Instant::now();
    let mut search = Search {
        model,
        config,
        incumbent: None,
        objective: f64::NEG_INFINITY,
    };
    let finish = |search: Search<'_>, status: MipStatus, open_bound: f64, nodes: usize| {
        let best_bound = match status {
            MipStatus::TimeLimit | MipStatus::NodeLimit => open_bound.max(search.objective),
            MipStatus::Optimal => search.objective,
            _ => config.cutoff.unwrap_or(f64::NEG_INFINITY),
        };
        MipResult {
            status,
            incumbent: search.incumbent,
            objective: search.objective,
            best_bound,
            nodes,
        }
    };
    let exhausted = |search: &Search<'_>| {
        if search.incumbent.is_some() {
            MipStatus::Optimal
        } else if config.cutoff.is_some() {
            MipStatus::CutoffExhausted
        } else {
            MipStatus::Infeasible
        }
    };

    let root = match LpSession::new(model, &config.fixings) {
        Ok(s) => s,
        Err(LpError::Infeasible) => {
            return Ok(finish(search, MipStatus::Infeasible, f64::NEG_INFINITY, 0));
        }
        Err(LpError::Unbounded) => {
            return Err(SolverError("binary model reported unbounded".into()));
        }
        Err(LpError::Engine(m)) => return Err(SolverError(m)),
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let mut stored = 1;
    heap.push(Node {
        bound: root.objective(),
        depth: 0,
        seq,
        path: Vec::new(),
        session: Some(root.clone()),
    });
    let mut nodes = 0;

    while let Some(node) = heap.pop() {
        if node.bound <= search.threshold() {
            heap.clear();
            break;
        }
        let limit = if start.elapsed() >= config.time_limit {
            Some(MipStatus::TimeLimit)
        } else if config.node_limit.is_some_and(|n| nodes >= n) {
            Some(MipStatus::NodeLimit)
        } else {
            None
        };
        if let Some(status) = limit {
            let open = node.bound;
            return Ok(finish(search, status, open, nodes));
        }
        nodes += 1;
        let session = match node.session {
            Some(s) => {
                stored -= 1;
                s
            }
            None => match root.clone().fix_all(node.path.iter().copied()) {
                Ok(s) => s,
                Err(LpError::Engine(m)) => return Err(SolverError(m)),
                Err(_) => continue,
            },
        };
        let values = session.values();
        if let Some(h) = heuristic {
            if let Some(candidate) = h(&values) {
                search.offer(&candidate);
            }
        }
        let Some(j) = most_fractional(&values) else {
            search.offer(&values);
            continue;
        };
        for value in [true, false] {
            let child = match session.clone().fix(j, value) {
                Ok(s) => s,
                Err(LpError::Engine(m)) => return Err(SolverError(m)),
                Err(_) => continue,
            };
            let bound = child.objective();
            if bound <= search.threshold() {
                continue;
            }
            let child_values = child.values();
            if most_fractional(&child_values).is_none() {
                search.offer(&child_values);
                continue;
            }
            let mut path = node.path.clone();
            path.push((j, value));
            seq += 1;
            let session = if stored < STORED_SESSIONS {
                stored += 1;
                Some(child)
            } else {
                None
            };
            heap.push(Node {
                bound,
                depth: node.depth + 1,
                seq,
                path,
                session,
            });
        }
    }
    let status = exhausted(&search);
    Ok(finish(search, status, f64::NEG_INFINITY, nodes))
}
