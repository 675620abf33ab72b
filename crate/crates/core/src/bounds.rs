//! Relaxation bounds: PI-bound, BM-bound and strongBM-bound.
//!
//! The PI model keeps the objective, GUB and linearization rows of the
//! big-M model, drops every SIR row and relies on cover cuts instead: it
//! starts from the relaxed families and grows by separation. The
//! strengthened big-M model is the big-M model plus the relaxed families;
//! its LP value under fixings is the strongBM-bound, and with no fixings
//! the BM-bound.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cuts::{
    cluster_row, enumerate_relaxed_covers, enumerate_relaxed_gcis, separate_gci, separate_power_covers, GubCoverCut,
    PowerCoverCut, SeparationConfig,
};
use crate::formulation::{base_model, build_big_m_model};
use crate::instance::Instance;
use crate::model::{Fixings, MipModel};
use crate::solver::{LpError, LpSession, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub value: f64,
    pub point: Vec<f64>,
    pub cut_count: usize,
    pub iterations: usize,
    /// LP value after each round (PI loop only).
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BoundError {
    #[error("relaxation is infeasible under the given fixings")]
    Infeasible,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<LpError> for BoundError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Infeasible => BoundError::Infeasible,
            LpError::Unbounded => BoundError::Solver(SolverError("relaxation is unbounded".into())),
            LpError::Engine(m) => BoundError::Solver(SolverError(m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiBoundConfig {
    pub max_rounds: usize,
    /// Most violated cuts added per round.
    pub max_cuts_per_round: usize,
    /// Stop once this many consecutive rounds have not lowered the bound
    /// by more than a relative 1e-6.
    pub stall_rounds: usize,
    pub separation: SeparationConfig,
}

impl Default for PiBoundConfig {
    fn default() -> Self {
        PiBoundConfig {
            max_rounds: 50,
            max_cuts_per_round: 200,
            stall_rounds: 3,
            separation: SeparationConfig::default(),
        }
    }
}

fn add_relaxed_families(inst: &Instance, m: &mut MipModel) {
    for cut in enumerate_relaxed_gcis(inst) {
        m.add_row(cut.row(inst));
    }
    for cut in enumerate_relaxed_covers(inst) {
        m.add_row(cut.row(inst));
    }
}

/// Objective, GUB and linearization rows, the nonempty-cluster rows and the
/// relaxed cut families.
pub fn build_pi_model(inst: &Instance) -> MipModel {
    let mut m = base_model(inst);
    for t in 0..inst.num_terminals() {
        m.add_row(cluster_row(inst, t));
    }
    add_relaxed_families(inst, &mut m);
    m
}

/// Big-M model plus the relaxed cut families.
pub fn build_strong_bm_model(inst: &Instance) -> MipModel {
    let mut m = build_big_m_model(inst);
    add_relaxed_families(inst, &mut m);
    m
}

pub fn pi_bound(inst: &Instance) -> Result<BoundResult, BoundError> {
    pi_bound_with(inst, &PiBoundConfig::default())
}

/// Cutting-plane loop on the PI model, until no new violated cut is found,
/// the round limit is hit or the bound stalls. The returned point
/// satisfies every cut added.
pub fn pi_bound_with(inst: &Instance, config: &PiBoundConfig) -> Result<BoundResult, BoundError> {
    let model = build_pi_model(inst);
    let mut known: BTreeSet<GubCoverCut> = enumerate_relaxed_gcis(inst).into_iter().collect();
    let mut known_covers: BTreeSet<PowerCoverCut> = enumerate_relaxed_covers(inst).into_iter().collect();
    let mut session = LpSession::new(&model, &Fixings::new())?;
    let mut history = vec![session.objective()];
    let mut cut_count = 0;
    let mut iterations = 0;
    while iterations < config.max_rounds {
        let point = session.values();
        let fresh: Vec<GubCoverCut> = separate_gci(inst, &point, &config.separation)
            .into_iter()
            .map(|(c, _)| c)
            .filter(|c| !known.contains(c))
            .take(config.max_cuts_per_round)
            .collect();
        let covers: Vec<PowerCoverCut> = separate_power_covers(inst, &point, &config.separation)
            .into_iter()
            .map(|(c, _)| c)
            .filter(|c| !known_covers.contains(c))
            .take(config.max_cuts_per_round)
            .collect();
        if fresh.is_empty() && covers.is_empty() {
            break;
        }
        for cut in fresh {
            session = session.add_row(&cut.row(inst))?;
            known.insert(cut);
            cut_count += 1;
        }
        for cut in covers {
            session = session.add_row(&cut.row(inst))?;
            known_covers.insert(cut);
            cut_count += 1;
        }
        iterations += 1;
        history.push(session.objective());
        if let Some(&before) = history.len().checked_sub(config.stall_rounds + 1).map(|i| &history[i]) {
            let now = session.objective();
            if before - now <= 1e-6 * before.abs().max(1.0) {
                break;
            }
        }
    }
    Ok(BoundResult {
        value: session.objective(),
        point: session.values(),
        cut_count,
        iterations,
        history,
    })
}

/// The strengthened big-M relaxation, solved once and re-optimized from
/// its root basis for each set of fixings.
#[derive(Debug, Clone)]
pub struct StrongBm {
    model: MipModel,
    root: LpSession,
}

impl StrongBm {
    pub fn new(inst: &Instance) -> Result<Self, BoundError> {
        let model = build_strong_bm_model(inst);
        let root = LpSession::new(&model, &Fixings::new())?;
        Ok(StrongBm { model, root })
    }

    pub fn model(&self) -> &MipModel {
        &self.model
    }

    /// The BM-bound.
    pub fn root_value(&self) -> f64 {
        self.root.objective()
    }

    pub fn root_point(&self) -> Vec<f64> {
        self.root.values()
    }

    /// LP session under `fixings`, warm-started from the root.
    pub fn session(&self, fixings: &Fixings) -> Result<LpSession, BoundError> {
        Ok(self.root.clone().fix_all(fixings.iter())?)
    }

    pub fn value(&self, fixings: &Fixings) -> Result<f64, BoundError> {
        Ok(self.session(fixings)?.objective())
    }

    pub fn bound(&self, fixings: &Fixings) -> Result<BoundResult, BoundError> {
        let s = self.session(fixings)?;
        Ok(BoundResult {
            value: s.objective(),
            point: s.values(),
            cut_count: self.model.num_rows(),
            iterations: 1,
            history: vec![s.objective()],
        })
    }
}

/// LP value of the strengthened big-M model under `fixings`; `cut_count`
/// reports the rows of that model.
pub fn strong_bm_bound(inst: &Instance, fixings: &Fixings) -> Result<BoundResult, BoundError> {
    let model = build_strong_bm_model(inst);
    let s = LpSession::new(&model, fixings)?;
    Ok(BoundResult {
        value: s.objective(),
        point: s.values(),
        cut_count: model.num_rows(),
        iterations: 1,
        history: vec![s.objective()],
    })
}

pub fn bm_bound(inst: &Instance) -> Result<BoundResult, BoundError> {
    strong_bm_bound(inst, &Fixings::new())
}
