//! Relaxation-induced neighborhood search around an ant solution.
//!
//! Variables on which the ant solution and the PI relaxation point agree
//! (within `epsilon`) are fixed; the strengthened big-M model is solved
//! over the rest under an objective cutoff at the ant value and a limit.

use std::time::Duration;

use thiserror::Error;

use crate::bounds::build_strong_bm_model;
use crate::formulation::{derive_full_solution, is_served, objective_value, powers, SpcapVars};
use crate::instance::Instance;
use crate::model::{Fixings, MipModel};
use crate::solver::{solve_mip_with, BnbConfig, MipStatus, SolverError};
use crate::CandidateSolution;

/// Incumbents must beat the ant value by more than this.
pub const IMPROVEMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RinsConfig {
    pub epsilon: f64,
    pub time_limit: Duration,
    /// Optional deterministic cap on branch-and-bound nodes.
    pub node_limit: Option<usize>,
}

impl Default for RinsConfig {
    fn default() -> Self {
        RinsConfig {
            epsilon: 0.01,
            time_limit: Duration::from_secs(10),
            node_limit: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RinsError {
    #[error("epsilon must lie in [0, 0.5), got {0}")]
    Epsilon(f64),
    #[error("reference point has {found} entries, expected {expected}")]
    PointLength { expected: usize, found: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RinsOutcome {
    pub solution: CandidateSolution,
    pub value: f64,
    pub ant_value: f64,
    pub improved: bool,
    pub fixed: usize,
    pub status: MipStatus,
    pub nodes: usize,
}

/// Fixes `j` to 0 where the ant has 0 and the point is at most `epsilon`,
/// and to 1 where the ant has 1 and the point is at least `1 - epsilon`.
pub fn rins_fixings(ant: &[f64], point: &[f64], epsilon: f64) -> Fixings {
    ant.iter()
        .zip(point)
        .enumerate()
        .filter_map(|(j, (&a, &p))| {
            if a < 0.5 && p <= epsilon {
                Some((j, false))
            } else if a >= 0.5 && p >= 1.0 - epsilon {
                Some((j, true))
            } else {
                None
            }
        })
        .collect()
}

/// Subsets beyond this many free bases are only tried up to size 3.
const FULL_CLUSTER_SEARCH: usize = 12;

/// Best cluster for `t` under fixed power levels: it contains `must`,
/// avoids `forbid`, and otherwise picks powered bases. Served clusters
/// earn `r_t + c_t - c_t |C|` and unserved ones cost `c_t |C|`, so the
/// smallest served cluster wins, and `must` alone when none serves.
pub fn best_cluster_with(
    inst: &Instance,
    power_level: &[usize],
    t: usize,
    must: &[usize],
    forbid: &[usize],
) -> Vec<usize> {
    let p = powers(inst, power_level);
    let free: Vec<usize> = (0..inst.num_bases())
        .filter(|&b| power_level[b] > 0 && !must.contains(&b) && !forbid.contains(&b))
        .collect();
    let (r, c) = (inst.revenue[t], inst.coop_cost[t]);
    let unserved = -c * must.len() as f64;
    let max_extra = if free.len() > FULL_CLUSTER_SEARCH { 3 } else { free.len() };
    for extra in 0..=max_extra {
        let size = must.len() + extra;
        if size == 0 {
            continue;
        }
        if r + c - c * size as f64 <= unserved {
            break;
        }
        let mut pick = None;
        for_each_subset(&free, extra, &mut |s| {
            if pick.is_none() {
                let mut cluster: Vec<usize> = must.iter().chain(s).copied().collect();
                cluster.sort_unstable();
                if is_served(inst, &p, &cluster, t) {
                    pick = Some(cluster);
                }
            }
        });
        if let Some(cluster) = pick {
            return cluster;
        }
    }
    let mut cluster = must.to_vec();
    cluster.sort_unstable();
    cluster
}

fn for_each_subset(items: &[usize], size: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(items: &[usize], size: usize, start: usize, acc: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if acc.len() == size {
            f(acc);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < size - acc.len() {
                break;
            }
            acc.push(items[i]);
            rec(items, size, i + 1, acc, f);
            acc.pop();
        }
    }
    rec(items, size, 0, &mut Vec::with_capacity(size), f);
}

/// Rounds an LP point to a solution that honours `fixings`: each base takes
/// its largest level variable when the level mass reaches one half, and
/// each terminal then gets its best cluster for those levels among the
/// bases its fixings allow.
pub fn round_point(inst: &Instance, values: &[f64], fixings: &Fixings) -> Vec<f64> {
    let vars = SpcapVars::of(inst);
    let levels: Vec<usize> = (0..vars.n_b)
        .map(|b| {
            if let Some(l) = (0..vars.n_l).find(|&l| fixings.get(vars.z(b, l)) == Some(true)) {
                return l + 1;
            }
            let mass: f64 = (0..vars.n_l).map(|l| values[vars.z(b, l)]).sum();
            if mass < 0.5 {
                return 0;
            }
            (0..vars.n_l)
                .filter(|&l| fixings.get(vars.z(b, l)) != Some(false))
                .max_by(|&a, &c| values[vars.z(b, a)].total_cmp(&values[vars.z(b, c)]).then(c.cmp(&a)))
                .map_or(0, |l| l + 1)
        })
        .collect();
    round_with_levels(inst, &levels, fixings)
}

/// Best clusters for fixed `levels` under `fixings`, as a model vector.
pub fn round_with_levels(inst: &Instance, levels: &[usize], fixings: &Fixings) -> Vec<f64> {
    let vars = SpcapVars::of(inst);
    let clusters: Vec<Vec<usize>> = (0..vars.n_t)
        .map(|t| {
            let must: Vec<usize> = (0..vars.n_b).filter(|&b| fixings.get(vars.y(t, b)) == Some(true)).collect();
            let forbid: Vec<usize> = (0..vars.n_b).filter(|&b| fixings.get(vars.y(t, b)) == Some(false)).collect();
            best_cluster_with(inst, levels, t, &must, &forbid)
        })
        .collect();
    derive_full_solution(inst, levels, &clusters).to_vector(inst)
}

pub fn mod_rins(
    inst: &Instance,
    ant: &CandidateSolution,
    pi_point: &[f64],
    config: &RinsConfig,
) -> Result<RinsOutcome, RinsError> {
    mod_rins_with_model(inst, &build_strong_bm_model(inst), ant, pi_point, config)
}

/// As [`mod_rins`] with a prebuilt strengthened big-M model. The result is
/// never worse than the ant solution.
pub fn mod_rins_with_model(
    inst: &Instance,
    model: &MipModel,
    ant: &CandidateSolution,
    pi_point: &[f64],
    config: &RinsConfig,
) -> Result<RinsOutcome, RinsError> {
    if !(0.0..0.5).contains(&config.epsilon) {
        return Err(RinsError::Epsilon(config.epsilon));
    }
    if pi_point.len() != model.num_vars() {
        return Err(RinsError::PointLength {
            expected: model.num_vars(),
            found: pi_point.len(),
        });
    }
    let ant_vec = ant.to_vector(inst);
    let ant_value = objective_value(inst, ant);
    let fixings = rins_fixings(&ant_vec, pi_point, config.epsilon);
    // The ant's own levels with the best clusters the fixings allow lie in
    // the neighborhood; start from them when they beat the ant.
    let seed = CandidateSolution::from_vector(inst, &round_with_levels(inst, &ant.power_level, &fixings));
    let seed_value = objective_value(inst, &seed);
    let (start, start_value) = if seed_value > ant_value + IMPROVEMENT_TOL {
        (seed, seed_value)
    } else {
        (ant.clone(), ant_value)
    };
    let bnb = BnbConfig {
        time_limit: config.time_limit,
        node_limit: config.node_limit,
        cutoff: Some(start_value),
        gap_tolerance: IMPROVEMENT_TOL,
        fixings: fixings.clone(),
    };
    let heuristic = |values: &[f64]| Some(round_point(inst, values, &fixings));
    let r = solve_mip_with(model, &bnb, Some(&heuristic))?;
    let mut outcome = RinsOutcome {
        solution: start,
        value: start_value,
        ant_value,
        improved: start_value > ant_value + IMPROVEMENT_TOL,
        fixed: fixings.len(),
        status: r.status,
        nodes: r.nodes,
    };
    if let Some(v) = r.incumbent {
        // Re-derive service from (z, y): never worse than the MIP point.
        let sol = CandidateSolution::from_vector(inst, &v);
        let value = objective_value(inst, &sol);
        if value > start_value + IMPROVEMENT_TOL {
            outcome.solution = sol;
            outcome.value = value;
            outcome.improved = true;
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::check_feasibility;
    use crate::instance::fixtures::tiny1;
    use crate::oracle::{brute_force_opt, DEFAULT_CAP};

    #[test]
    fn optimal_ant_is_returned_unchanged() {
        let inst = tiny1();
        let opt = brute_force_opt(&inst, DEFAULT_CAP).unwrap();
        let point = vec![0.5; SpcapVars::of(&inst).count()];
        let r = mod_rins(&inst, &opt.solution, &point, &RinsConfig::default()).unwrap();
        assert!(!r.improved);
        assert_eq!(r.solution, opt.solution);
        assert_eq!(r.status, MipStatus::CutoffExhausted);
    }

    #[test]
    fn empty_ant_is_improved_to_optimum() {
        let inst = tiny1();
        let ant = CandidateSolution::empty(&inst);
        let point = vec![0.5; SpcapVars::of(&inst).count()];
        let r = mod_rins(&inst, &ant, &point, &RinsConfig::default()).unwrap();
        assert_eq!(r.fixed, 0);
        assert!(r.improved);
        assert!((r.value - 10.0).abs() < 1e-9);
        assert!(check_feasibility(&inst, &r.solution).is_feasible());
    }

    #[test]
    fn fixing_rules() {
        let ant = [0.0, 0.0, 1.0, 1.0, 1.0];
        let point = [0.0, 0.2, 1.0, 0.995, 0.5];
        let f = rins_fixings(&ant, &point, 0.0);
        assert_eq!(f.iter().collect::<Vec<_>>(), vec![(0, false), (2, true)]);
        let f = rins_fixings(&ant, &point, 0.01);
        assert_eq!(f.iter().collect::<Vec<_>>(), vec![(0, false), (2, true), (3, true)]);
        assert!(rins_fixings(&ant, &[0.5; 5], 0.49).is_empty());
    }

    #[test]
    fn fixings_hold_when_nothing_improves() {
        let inst = tiny1();
        let opt = brute_force_opt(&inst, DEFAULT_CAP).unwrap();
        let point = opt.solution.to_vector(&inst);
        let r = mod_rins(&inst, &opt.solution, &point, &RinsConfig::default()).unwrap();
        let fixings = rins_fixings(&point, &point, 0.01);
        assert_eq!(fixings.len(), point.len());
        assert!(fixings.respected_by(&r.solution.to_vector(&inst)));
    }

    #[test]
    fn bad_epsilon_is_rejected() {
        let inst = tiny1();
        let ant = CandidateSolution::empty(&inst);
        let cfg = RinsConfig {
            epsilon: 0.5,
            ..RinsConfig::default()
        };
        let point = vec![0.0; SpcapVars::of(&inst).count()];
        assert_eq!(mod_rins(&inst, &ant, &point, &cfg), Err(RinsError::Epsilon(0.5)));
    }

    #[test]
    fn best_cluster_honours_fixings() {
        let inst = tiny1();
        assert_eq!(best_cluster_with(&inst, &[2, 2], 0, &[], &[]), vec![0]);
        // b0 stays powered outside the cluster and drowns b1.
        assert_eq!(best_cluster_with(&inst, &[2, 2], 0, &[], &[0]), Vec::<usize>::new());
        assert_eq!(best_cluster_with(&inst, &[0, 2], 0, &[], &[0]), vec![1]);
        assert_eq!(best_cluster_with(&inst, &[0, 0], 0, &[1], &[]), vec![1]);
        assert_eq!(best_cluster_with(&inst, &[0, 0], 0, &[], &[]), Vec::<usize>::new());
    }

    #[test]
    fn wasteful_ant_is_repaired() {
        // Optimal levels but a cluster with an extra member.
        let inst = tiny1();
        let ant = derive_full_solution(&inst, &[1, 0], &[vec![0, 1]]);
        let point = vec![0.5; SpcapVars::of(&inst).count()];
        let r = mod_rins(&inst, &ant, &point, &RinsConfig::default()).unwrap();
        assert!(r.improved);
        assert!((r.value - 10.0).abs() < 1e-9);
    }

    #[test]
    fn rounding_respects_fixings() {
        let inst = tiny1();
        let vars = SpcapVars::of(&inst);
        let mut values = vec![0.0; vars.count()];
        values[vars.z(0, 0)] = 0.6;
        values[vars.y(0, 0)] = 0.7;
        let fixings: Fixings = [(vars.z(0, 1), true)].into_iter().collect();
        let v = round_point(&inst, &values, &fixings);
        assert_eq!(v[vars.z(0, 1)], 1.0);
        assert_eq!(v[vars.z(0, 0)], 0.0);
        assert_eq!(v[vars.x(0)], 1.0);
    }
}
