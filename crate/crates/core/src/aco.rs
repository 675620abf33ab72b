//! Ant construction guided by LP bounds, and the hybrid loop around it.
//!
//! An ant first fixes a power level (possibly off) for every base, then an
//! In/Out decision for every (terminal, base) pair. A move is a variable
//! fixing; its probability mixes the pheromone trail `τ` with an
//! attractiveness `η` taken from the strengthened big-M relaxation under
//! the fixings of the state the move leads to. After each batch of ants,
//! every ant solution is refined by mod-RINS and the trails are updated
//! against a moving average of recent ant values.
//!
//! Once every power level is fixed, the relaxation separates by terminal:
//! the linearization rows force `v_tbl = y_tb z_bl` and the GUB rows no
//! longer bind, so cluster moves are scored on a per-terminal LP over
//! `(x_t, y_t·)` whose value differs from the full one by a constant.

use std::collections::VecDeque;
use std::io;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{pi_bound, BoundError, BoundResult, StrongBm};
use crate::formulation::{derive_full_solution, objective_value, SpcapVars};
use crate::instance::Instance;
use crate::model::{Fixings, MipModel, Row, RowTag, VarKind};
use crate::rins::{mod_rins_with_model, RinsConfig, RinsError};
use crate::solver::{LpError, LpSession, SolverError};
use crate::CandidateSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MoveKey {
    /// Base `base` at `level` (0 = off).
    Power { base: usize, level: usize },
    /// Base `base` joins (or stays out of) the cluster of `terminal`.
    Cluster { terminal: usize, base: usize, join: bool },
}

impl MoveKey {
    /// The variable fixings this move stands for.
    pub fn fixings(&self, vars: &SpcapVars) -> Vec<(usize, bool)> {
        match *self {
            MoveKey::Power { base, level } => (0..vars.n_l)
                .map(|l| (vars.z(base, l), l + 1 == level))
                .collect(),
            MoveKey::Cluster { terminal, base, join } => vec![(vars.y(terminal, base), join)],
        }
    }
}

/// Power level per base, `None` while unconfigured.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerState(pub Vec<Option<usize>>);

impl PowerState {
    pub fn new(inst: &Instance) -> Self {
        PowerState(vec![None; inst.num_bases()])
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    pub fn levels(&self) -> Option<Vec<usize>> {
        self.0.iter().copied().collect()
    }
}

/// In/Out decision per `(terminal, base)`, row-major by terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterState {
    num_bases: usize,
    pub decisions: Vec<Option<bool>>,
}

impl ClusterState {
    pub fn new(inst: &Instance) -> Self {
        ClusterState {
            num_bases: inst.num_bases(),
            decisions: vec![None; inst.num_terminals() * inst.num_bases()],
        }
    }

    pub fn get(&self, t: usize, b: usize) -> Option<bool> {
        self.decisions[t * self.num_bases + b]
    }

    pub fn set(&mut self, t: usize, b: usize, join: bool) {
        self.decisions[t * self.num_bases + b] = Some(join);
    }

    pub fn is_complete(&self) -> bool {
        self.decisions.iter().all(Option::is_some)
    }

    pub fn clusters(&self) -> Vec<Vec<usize>> {
        self.decisions
            .chunks(self.num_bases.max(1))
            .map(|row| (0..row.len()).filter(|&b| row[b] == Some(true)).collect())
            .collect()
    }
}

/// Moves available from a state: every level of every unconfigured base
/// while the power state is partial, then every undecided cluster pair.
pub fn feasible_moves(inst: &Instance, power: &PowerState, cluster: &ClusterState) -> Vec<MoveKey> {
    if !power.is_complete() {
        return (0..inst.num_bases())
            .filter(|&b| power.0[b].is_none())
            .flat_map(|base| (0..=inst.num_levels()).map(move |level| MoveKey::Power { base, level }))
            .collect();
    }
    let mut out = Vec::new();
    for t in 0..inst.num_terminals() {
        for b in 0..inst.num_bases() {
            if cluster.get(t, b).is_none() {
                for join in [true, false] {
                    out.push(MoveKey::Cluster { terminal: t, base: b, join });
                }
            }
        }
    }
    out
}

/// Order in which cluster pairs are decided: terminals by descending
/// revenue, each terminal's bases by descending attenuation, ties by index.
pub fn cluster_visit_order(inst: &Instance) -> Vec<(usize, usize)> {
    let mut terminals: Vec<usize> = (0..inst.num_terminals()).collect();
    terminals.sort_by(|&a, &b| inst.revenue[b].total_cmp(&inst.revenue[a]).then(a.cmp(&b)));
    let mut out = Vec::with_capacity(inst.num_terminals() * inst.num_bases());
    for t in terminals {
        let mut bases: Vec<usize> = (0..inst.num_bases()).collect();
        bases.sort_by(|&a, &b| inst.atten[t][b].total_cmp(&inst.atten[t][a]).then(a.cmp(&b)));
        out.extend(bases.into_iter().map(|b| (t, b)));
    }
    out
}

/// Trails per move key, with their initial values.
#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneTable {
    num_bases: usize,
    num_levels: usize,
    power: Vec<f64>,
    cluster: Vec<f64>,
    power0: Vec<f64>,
    cluster0: Vec<f64>,
}

impl PheromoneTable {
    fn slot(&self, key: MoveKey) -> (bool, usize) {
        match key {
            MoveKey::Power { base, level } => (true, base * (self.num_levels + 1) + level),
            MoveKey::Cluster { terminal, base, join } => {
                (false, 2 * (terminal * self.num_bases + base) + usize::from(!join))
            }
        }
    }

    pub fn get(&self, key: MoveKey) -> f64 {
        match self.slot(key) {
            (true, i) => self.power[i],
            (false, i) => self.cluster[i],
        }
    }

    pub fn initial(&self, key: MoveKey) -> f64 {
        match self.slot(key) {
            (true, i) => self.power0[i],
            (false, i) => self.cluster0[i],
        }
    }

    pub fn set(&mut self, key: MoveKey, value: f64) {
        let value = value.max(0.0);
        match self.slot(key) {
            (true, i) => self.power[i] = value,
            (false, i) => self.cluster[i] = value,
        }
    }

    /// Adds `amount`, flooring the trail at 0.
    pub fn deposit(&mut self, key: MoveKey, amount: f64) {
        self.set(key, self.get(key) + amount);
    }

    pub fn keys(&self) -> impl Iterator<Item = MoveKey> + '_ {
        let (n_b, n_l) = (self.num_bases, self.num_levels);
        let n_t = self.cluster.len() / (2 * n_b.max(1));
        let power = (0..n_b).flat_map(move |base| (0..=n_l).map(move |level| MoveKey::Power { base, level }));
        let cluster = (0..n_t).flat_map(move |terminal| {
            (0..n_b).flat_map(move |base| [true, false].map(|join| MoveKey::Cluster { terminal, base, join }))
        });
        power.chain(cluster)
    }
}

/// Trails from a relaxation point: `z_bl` for level `l`, the unused level
/// mass for off, `y_tb` for In and `1 - y_tb` for Out, clamped to [0, 1].
pub fn init_pheromones(inst: &Instance, point: &[f64]) -> PheromoneTable {
    let vars = SpcapVars::of(inst);
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let mut power = Vec::with_capacity(vars.n_b * (vars.n_l + 1));
    for b in 0..vars.n_b {
        let mass: f64 = (0..vars.n_l).map(|l| point[vars.z(b, l)]).sum();
        power.push(clamp(1.0 - mass));
        power.extend((0..vars.n_l).map(|l| clamp(point[vars.z(b, l)])));
    }
    let mut cluster = Vec::with_capacity(2 * vars.n_t * vars.n_b);
    for t in 0..vars.n_t {
        for b in 0..vars.n_b {
            let y = clamp(point[vars.y(t, b)]);
            cluster.push(y);
            cluster.push(1.0 - y);
        }
    }
    PheromoneTable {
        num_bases: vars.n_b,
        num_levels: vars.n_l,
        power0: power.clone(),
        cluster0: cluster.clone(),
        power,
        cluster,
    }
}

/// Min-max normalization to [0, 1]; non-finite values are excluded
/// (`None`) and a constant set maps to all ones.
pub fn normalize_attractiveness(raw: &[f64]) -> Vec<Option<f64>> {
    let finite = raw.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    raw.iter()
        .map(|&v| {
            v.is_finite().then(|| {
                if span <= 1e-12 * hi.abs().max(1.0) {
                    1.0
                } else {
                    (v - lo) / span
                }
            })
        })
        .collect()
}

/// `p_f = (α τ_f + (1-α) η_f) / Σ_g (α τ_g + (1-α) η_g)`, uniform when the
/// scores do not sum to a positive number.
pub fn move_probabilities(alpha: f64, tau: &[f64], eta: &[f64]) -> Vec<f64> {
    let scores: Vec<f64> = tau
        .iter()
        .zip(eta)
        .map(|(&t, &e)| (alpha * t + (1.0 - alpha) * e).max(0.0))
        .collect();
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return vec![1.0 / scores.len() as f64; scores.len()];
    }
    scores.iter().map(|s| s / total).collect()
}

/// Index drawn from `probs` with uniform variate `u` in [0, 1); entries
/// with zero probability are never returned.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return i;
        }
    }
    last.expect("at least one positive probability")
}

/// strongBM-bound after applying `key` on top of `fixings`; `-inf` when the
/// relaxation becomes infeasible.
pub fn attractiveness(
    inst: &Instance,
    sbm: &StrongBm,
    fixings: &Fixings,
    key: MoveKey,
) -> Result<f64, SolverError> {
    let vars = SpcapVars::of(inst);
    let mut all = fixings.clone();
    for (j, v) in key.fixings(&vars) {
        if all.fix(j, v).is_err() {
            return Ok(f64::NEG_INFINITY);
        }
    }
    match sbm.value(&all) {
        Ok(v) => Ok(v),
        Err(BoundError::Infeasible) => Ok(f64::NEG_INFINITY),
        Err(BoundError::Solver(e)) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attractiveness {
    /// One LP per candidate move.
    Exact,
    /// One LP per state; candidates scored by their variable's value.
    Cached,
}

impl std::str::FromStr for Attractiveness {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Attractiveness::Exact),
            "cached" => Ok(Attractiveness::Cached),
            other => Err(format!("unknown attractiveness mode {other:?} (exact|cached)")),
        }
    }
}

/// Per-terminal relaxations once every power level is fixed. Local
/// variable 0 is `x_t`, variable `1 + b` is `y_tb`.
#[derive(Debug, Clone)]
pub struct TerminalLps {
    models: Vec<MipModel>,
}

impl TerminalLps {
    pub fn new(inst: &Instance, model: &MipModel, levels: &[usize]) -> Self {
        let vars = SpcapVars::of(inst);
        let mut models: Vec<MipModel> = (0..vars.n_t)
            .map(|t| {
                let mut m = MipModel::default();
                let (r, c) = (inst.revenue[t], inst.coop_cost[t]);
                m.add_var(VarKind::X(t), r + c);
                for b in 0..vars.n_b {
                    m.add_var(VarKind::Y(t, b), -c);
                }
                m
            })
            .collect();
        for row in &model.rows {
            let t = match row.tag {
                RowTag::Sir { terminal } | RowTag::Cut { terminal } => terminal,
                _ => continue,
            };
            let mut dense = vec![0.0; vars.n_b + 1];
            let mut rhs = row.rhs;
            for &(j, a) in &row.coeffs {
                match vars.kind(j) {
                    VarKind::X(_) => dense[0] += a,
                    VarKind::Y(_, b) => dense[1 + b] += a,
                    VarKind::Z(b, l) => {
                        if levels[b] == l + 1 {
                            rhs -= a;
                        }
                    }
                    VarKind::V(_, b, l) => {
                        if levels[b] == l + 1 {
                            dense[1 + b] += a;
                        }
                    }
                }
            }
            models[t].add_row(Row {
                coeffs: dense.into_iter().enumerate().filter(|&(_, a)| a != 0.0).collect(),
                sense: row.sense,
                rhs,
                tag: row.tag,
            });
        }
        TerminalLps { models }
    }

    fn local_fixings(cluster: &ClusterState, t: usize, extra: Option<(usize, bool)>) -> Fixings {
        let n_b = cluster.num_bases;
        let mut f: Fixings = (0..n_b)
            .filter_map(|b| cluster.get(t, b).map(|v| (1 + b, v)))
            .collect();
        if let Some((b, v)) = extra {
            let _ = f.fix(1 + b, v);
        }
        f
    }

    fn solve(&self, t: usize, fixings: &Fixings) -> Result<Option<LpSession>, SolverError> {
        match LpSession::new(&self.models[t], fixings) {
            Ok(s) => Ok(Some(s)),
            Err(LpError::Infeasible) => Ok(None),
            Err(LpError::Unbounded) => Err(SolverError("terminal relaxation unbounded".into())),
            Err(LpError::Engine(m)) => Err(SolverError(m)),
        }
    }

    /// LP value of terminal `t` under its cluster decisions plus `extra`
    /// (`-inf` when infeasible).
    pub fn value(&self, cluster: &ClusterState, t: usize, extra: Option<(usize, bool)>) -> Result<f64, SolverError> {
        let f = Self::local_fixings(cluster, t, extra);
        Ok(self.solve(t, &f)?.map_or(f64::NEG_INFINITY, |s| s.objective()))
    }

    /// `y_tb` in the terminal's LP point under its cluster decisions.
    fn y_values(&self, cluster: &ClusterState, t: usize) -> Result<Option<Vec<f64>>, SolverError> {
        let f = Self::local_fixings(cluster, t, None);
        Ok(self.solve(t, &f)?.map(|s| (0..cluster.num_bases).map(|b| s.value(1 + b)).collect()))
    }
}

/// Knobs of one construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructParams {
    pub alpha: f64,
    pub attractiveness: Attractiveness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub solution: CandidateSolution,
    pub value: f64,
    pub moves: Vec<MoveKey>,
    pub lp_solves: usize,
}

fn choose(
    rng: &mut ChaCha8Rng,
    alpha: f64,
    table: &PheromoneTable,
    candidates: &[MoveKey],
    raw_eta: &[f64],
) -> MoveKey {
    let norm = normalize_attractiveness(raw_eta);
    let open: Vec<usize> = (0..candidates.len()).filter(|&i| norm[i].is_some()).collect();
    // When every candidate is excluded the attractiveness carries no
    // information; fall back to trails alone.
    let pool: Vec<usize> = if open.is_empty() { (0..candidates.len()).collect() } else { open };
    let tau: Vec<f64> = pool.iter().map(|&i| table.get(candidates[i])).collect();
    let eta: Vec<f64> = pool.iter().map(|&i| norm[i].unwrap_or(0.0)).collect();
    let probs = move_probabilities(alpha, &tau, &eta);
    candidates[pool[sample_index(&probs, rng.gen::<f64>())]]
}

/// Builds one solution: power phase, then cluster phase in
/// [`cluster_visit_order`].
pub fn construct_solution(
    inst: &Instance,
    sbm: &StrongBm,
    table: &PheromoneTable,
    params: &ConstructParams,
    rng: &mut ChaCha8Rng,
) -> Result<Construction, SolverError> {
    let vars = SpcapVars::of(inst);
    let mut moves = Vec::with_capacity(vars.n_b + vars.n_t * vars.n_b);
    let mut lp_solves = 0;
    let lp_err = |e: BoundError| match e {
        BoundError::Solver(s) => s,
        BoundError::Infeasible => SolverError("strengthened relaxation infeasible without fixings".into()),
    };

    let mut power = PowerState::new(inst);
    let mut state = sbm.session(&Fixings::new()).map_err(lp_err)?;
    while !power.is_complete() {
        let candidates = feasible_moves(inst, &power, &ClusterState::new(inst));
        let raw: Vec<f64> = match params.attractiveness {
            Attractiveness::Exact => candidates
                .iter()
                .map(|key| {
                    lp_solves += 1;
                    match state.clone().fix_all(key.fixings(&vars)) {
                        Ok(s) => Ok(s.objective()),
                        Err(LpError::Infeasible) => Ok(f64::NEG_INFINITY),
                        Err(LpError::Unbounded) => Err(SolverError("relaxation unbounded".into())),
                        Err(LpError::Engine(m)) => Err(SolverError(m)),
                    }
                })
                .collect::<Result<_, _>>()?,
            Attractiveness::Cached => candidates
                .iter()
                .map(|&key| match key {
                    MoveKey::Power { base, level: 0 } => {
                        1.0 - (0..vars.n_l).map(|l| state.value(vars.z(base, l))).sum::<f64>()
                    }
                    MoveKey::Power { base, level } => state.value(vars.z(base, level - 1)),
                    MoveKey::Cluster { .. } => unreachable!("power phase"),
                })
                .collect(),
        };
        let key = choose(rng, params.alpha, table, &candidates, &raw);
        let MoveKey::Power { base, level } = key else { unreachable!("power phase") };
        power.0[base] = Some(level);
        moves.push(key);
        lp_solves += 1;
        state = state.fix_all(key.fixings(&vars)).map_err(|e| lp_err(e.into()))?;
    }
    let levels = power.levels().expect("power state complete");

    let terms = TerminalLps::new(inst, sbm.model(), &levels);
    let mut cluster = ClusterState::new(inst);
    let order = cluster_visit_order(inst);
    let mut i = 0;
    while i < order.len() {
        let t = order[i].0;
        let mut current = if params.attractiveness == Attractiveness::Exact {
            lp_solves += 1;
            terms.value(&cluster, t, None)?
        } else {
            0.0
        };
        while i < order.len() && order[i].0 == t {
            let b = order[i].1;
            let candidates = [
                MoveKey::Cluster { terminal: t, base: b, join: true },
                MoveKey::Cluster { terminal: t, base: b, join: false },
            ];
            let raw: Vec<f64> = match params.attractiveness {
                Attractiveness::Exact => {
                    lp_solves += 2;
                    let with = terms.value(&cluster, t, Some((b, true)))?;
                    let without = terms.value(&cluster, t, Some((b, false)))?;
                    // Both share the other terminals' constant; keep the
                    // difference to the current state for readability.
                    vec![with - current, without - current]
                }
                Attractiveness::Cached => {
                    lp_solves += 1;
                    match terms.y_values(&cluster, t)? {
                        Some(y) => vec![y[b], 1.0 - y[b]],
                        None => vec![f64::NEG_INFINITY; 2],
                    }
                }
            };
            let key = choose(rng, params.alpha, table, &candidates, &raw);
            let join = matches!(key, MoveKey::Cluster { join: true, .. });
            cluster.set(t, b, join);
            moves.push(key);
            if params.attractiveness == Attractiveness::Exact {
                current += if join { raw[0] } else { raw[1] };
            }
            i += 1;
        }
    }
    let solution = derive_full_solution(inst, &levels, &cluster.clusters());
    let value = objective_value(inst, &solution);
    Ok(Construction {
        solution,
        value,
        moves,
        lp_solves,
    })
}

/// Last `width` values seen.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingAverage {
    width: usize,
    window: VecDeque<f64>,
}

impl MovingAverage {
    pub fn new(width: usize) -> Self {
        MovingAverage {
            width: width.max(1),
            window: VecDeque::new(),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.window.is_empty()).then(|| self.window.iter().sum::<f64>() / self.window.len() as f64)
    }

    pub fn absorb(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in values {
            if self.window.len() == self.width {
                self.window.pop_front();
            }
            self.window.push_back(v);
        }
    }
}

/// `τ(0) (1 - (B_rel - z_k) / (B_rel - z̄))`, or 0 when `B_rel - z̄ < 1e-9`.
pub fn pheromone_deposit(tau0: f64, b_rel: f64, z_k: f64, z_bar: f64) -> f64 {
    let gap = b_rel - z_bar;
    if gap < 1e-9 {
        return 0.0;
    }
    tau0 * (1.0 - (b_rel - z_k) / gap)
}

/// Deposits on every key each ant used, measured against the moving
/// average before this batch (the batch mean when the window is empty),
/// then lets the average absorb the batch.
pub fn update_pheromones(
    table: &mut PheromoneTable,
    batch: &[(f64, &[MoveKey])],
    b_rel: f64,
    average: &mut MovingAverage,
) {
    if batch.is_empty() {
        return;
    }
    let z_bar = average
        .mean()
        .unwrap_or_else(|| batch.iter().map(|(v, _)| v).sum::<f64>() / batch.len() as f64);
    for &(z_k, keys) in batch {
        for &key in keys {
            let amount = pheromone_deposit(table.initial(key), b_rel, z_k, z_bar);
            table.deposit(key, amount);
        }
    }
    average.absorb(batch.iter().map(|(v, _)| *v));
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridParams {
    pub alpha: f64,
    pub ants: usize,
    pub psi: usize,
    pub loops: usize,
    pub rins: RinsConfig,
    pub attractiveness: Attractiveness,
    pub seed: u64,
    /// Wall-clock budget for the whole run; checked between batches.
    pub time_budget: Option<Duration>,
    /// Worker threads for the ants of one batch.
    pub threads: usize,
    /// Keep every ant solution and its refinement in the result.
    pub record_solutions: bool,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParamError {
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("epsilon must lie in [0, 0.5), got {0}")]
    Epsilon(f64),
    #[error("RINS time limit must be positive")]
    TimeLimit,
}

impl HybridParams {
    /// `α = 0.5`, `m = ψ = ⌈|B|/2⌉`, 50 loops, `ε = 0.01`, 10 s per RINS call.
    pub fn defaults_for(inst: &Instance) -> Self {
        let ants = inst.num_bases().div_ceil(2).max(1);
        HybridParams {
            alpha: 0.5,
            ants,
            psi: ants,
            loops: 50,
            rins: RinsConfig::default(),
            attractiveness: Attractiveness::Exact,
            seed: 1,
            time_budget: None,
            threads: 1,
            record_solutions: false,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ParamError::Alpha(self.alpha));
        }
        for (name, v) in [("ants", self.ants), ("psi", self.psi), ("loops", self.loops), ("threads", self.threads)] {
            if v == 0 {
                return Err(ParamError::Zero(name));
            }
        }
        if !(0.0..0.5).contains(&self.rins.epsilon) {
            return Err(ParamError::Epsilon(self.rins.epsilon));
        }
        if self.rins.time_limit.is_zero() {
            return Err(ParamError::TimeLimit);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HybridError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Rins(#[from] RinsError),
}

/// One row per ant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogRow {
    pub iteration: usize,
    pub ant: usize,
    pub ant_value: f64,
    pub rins_value: f64,
    pub best_so_far: f64,
    pub elapsed_seconds: f64,
}

pub fn write_run_log<W: io::Write>(rows: &[RunLogRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_run_log<R: io::Read>(r: R) -> csv::Result<Vec<RunLogRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// Relaxations a run needs; reusable across runs on one instance.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub pi: BoundResult,
    pub sbm: StrongBm,
}

impl Prepared {
    pub fn new(inst: &Instance) -> Result<Self, BoundError> {
        Ok(Prepared {
            pi: pi_bound(inst)?,
            sbm: StrongBm::new(inst)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridResult {
    pub best: CandidateSolution,
    pub best_value: f64,
    /// Best construction before refinement.
    pub best_ant: CandidateSolution,
    pub best_ant_value: f64,
    pub pi_bound: f64,
    pub bm_bound: f64,
    pub log: Vec<RunLogRow>,
    pub iterations: usize,
    /// True when the time budget ended the run before `loops` iterations.
    pub budget_exhausted: bool,
    pub rins_calls: usize,
    pub rins_improvements: usize,
    /// `(ant, refined)` per log row when `record_solutions` is set.
    pub emitted: Vec<(CandidateSolution, CandidateSolution)>,
}

pub fn run_hybrid(inst: &Instance, params: &HybridParams) -> Result<HybridResult, HybridError> {
    params.validate()?;
    let prepared = Prepared::new(inst)?;
    run_hybrid_prepared(inst, &prepared, params)
}

fn ant_rng(seed: u64, iteration: usize, ant: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | ant as u64);
    rng
}

struct AntOutcome {
    construction: Construction,
    refined: CandidateSolution,
    refined_value: f64,
    improved: bool,
}

/// The hybrid loop on precomputed relaxations.
pub fn run_hybrid_prepared(
    inst: &Instance,
    prepared: &Prepared,
    params: &HybridParams,
) -> Result<HybridResult, HybridError> {
    params.validate()?;
    let start = Instant::now();
    let mut table = init_pheromones(inst, &prepared.pi.point);
    let mut average = MovingAverage::new(params.psi);
    let b_rel = prepared.pi.value;
    let construct = ConstructParams {
        alpha: params.alpha,
        attractiveness: params.attractiveness,
    };
    let mut result = HybridResult {
        best: CandidateSolution::empty(inst),
        best_value: f64::NEG_INFINITY,
        best_ant: CandidateSolution::empty(inst),
        best_ant_value: f64::NEG_INFINITY,
        pi_bound: b_rel,
        bm_bound: prepared.sbm.root_value(),
        log: Vec::new(),
        iterations: 0,
        budget_exhausted: false,
        rins_calls: 0,
        rins_improvements: 0,
        emitted: Vec::new(),
    };

    for iteration in 0..params.loops {
        if params.time_budget.is_some_and(|b| start.elapsed() >= b) {
            result.budget_exhausted = true;
            break;
        }
        let run_ant = |ant: usize| -> Result<AntOutcome, HybridError> {
            let mut rng = ant_rng(params.seed, iteration, ant);
            let construction = construct_solution(inst, &prepared.sbm, &table, &construct, &mut rng)?;
            let r = mod_rins_with_model(
                inst,
                prepared.sbm.model(),
                &construction.solution,
                &prepared.pi.point,
                &params.rins,
            )?;
            Ok(AntOutcome {
                construction,
                refined: r.solution,
                refined_value: r.value,
                improved: r.improved,
            })
        };
        let outcomes: Vec<AntOutcome> = if params.threads <= 1 {
            (0..params.ants).map(run_ant).collect::<Result<_, _>>()?
        } else {
            let per = params.ants.div_ceil(params.threads);
            let run_ant = &run_ant;
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..params.ants)
                    .step_by(per)
                    .map(|lo| {
                        s.spawn(move || {
                            (lo..(lo + per).min(params.ants)).map(run_ant).collect::<Result<Vec<_>, _>>()
                        })
                    })
                    .collect();
                let mut all = Vec::with_capacity(params.ants);
                for h in handles {
                    all.extend(h.join().expect("ant worker panicked")?);
                }
                Ok::<_, HybridError>(all)
            })?
        };

        for (ant, o) in outcomes.iter().enumerate() {
            result.rins_calls += 1;
            result.rins_improvements += usize::from(o.improved);
            if o.construction.value > result.best_ant_value {
                result.best_ant_value = o.construction.value;
                result.best_ant = o.construction.solution.clone();
            }
            if o.refined_value > result.best_value {
                result.best_value = o.refined_value;
                result.best = o.refined.clone();
            }
            result.log.push(RunLogRow {
                iteration,
                ant,
                ant_value: o.construction.value,
                rins_value: o.refined_value,
                best_so_far: result.best_value,
                elapsed_seconds: start.elapsed().as_secs_f64(),
            });
            if params.record_solutions {
                result.emitted.push((o.construction.solution.clone(), o.refined.clone()));
            }
        }
        let batch: Vec<(f64, &[MoveKey])> = outcomes
            .iter()
            .map(|o| (o.construction.value, o.construction.moves.as_slice()))
            .collect();
        update_pheromones(&mut table, &batch, b_rel, &mut average);
        result.iterations += 1;
    }
    if result.best_value == f64::NEG_INFINITY {
        result.best_value = 0.0;
        result.best_ant_value = 0.0;
    }
    Ok(result)
}
