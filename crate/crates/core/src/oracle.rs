//! Exhaustive optimum for tiny instances.
//!
//! Coverage of terminal `t` depends only on the power vector and on `t`'s
//! own cluster, so for a fixed power vector terminals can be optimized
//! independently: each contributes
//! `max(0, max_{S served} r_t - c_t (|S| - 1))`.
//!
//! Only powered bases are considered as cluster members. An off base adds
//! no signal to the numerator and nothing to the interference it would
//! otherwise cause, so moving it into a cluster leaves the SIR unchanged
//! while raising the cooperation cost by `c_t > 0`; no optimal cluster
//! contains one.

use thiserror::Error;

use crate::formulation::{derive_full_solution, is_served, objective_value, powers};
use crate::instance::Instance;
use crate::CandidateSolution;

pub const DEFAULT_CAP: u64 = 1_000_000;
pub const MAX_BASES: usize = 15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{vectors} power vectors exceed the enumeration cap {cap}")]
    TooManyVectors { vectors: u128, cap: u64 },
    #[error("{bases} base stations exceed the limit of {MAX_BASES}")]
    TooManyBases { bases: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub solution: CandidateSolution,
    pub vectors_enumerated: u64,
}

/// Cheapest served cluster for `t` among powered bases and its
/// contribution, or `(vec![], 0)` when serving does not pay.
pub fn best_cluster(inst: &Instance, power_level: &[usize], t: usize) -> (Vec<usize>, f64) {
    let p = powers(inst, power_level);
    let on: Vec<usize> = (0..inst.num_bases()).filter(|&b| power_level[b] > 0).collect();
    let (r, c) = (inst.revenue[t], inst.coop_cost[t]);
    // Contributions fall with cluster size, so the first served size wins.
    for size in 1..=on.len() {
        let gain = r - c * (size as f64 - 1.0);
        if gain <= 0.0 {
            break;
        }
        let mut best: Option<Vec<usize>> = None;
        for_each_subset(&on, size, &mut |s| {
            if best.is_none() && is_served(inst, &p, s, t) {
                best = Some(s.to_vec());
            }
        });
        if let Some(s) = best {
            return (s, gain);
        }
    }
    (Vec::new(), 0.0)
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

/// Enumerates all `(|L|+1)^|B|` power vectors (refusing above `cap`).
pub fn brute_force_opt(inst: &Instance, cap: u64) -> Result<OracleResult, OracleError> {
    let n_b = inst.num_bases();
    if n_b > MAX_BASES {
        return Err(OracleError::TooManyBases { bases: n_b });
    }
    let radix = inst.num_levels() as u128 + 1;
    let vectors = radix.pow(n_b as u32);
    if vectors > cap as u128 {
        return Err(OracleError::TooManyVectors { vectors, cap });
    }
    let radix = radix as usize;
    let mut levels = vec![0usize; n_b];
    let mut best: Option<(f64, CandidateSolution)> = None;
    for code in 0..vectors as usize {
        let mut rest = code;
        for lvl in levels.iter_mut() {
            *lvl = rest % radix;
            rest /= radix;
        }
        let mut total = 0.0;
        let mut clusters = Vec::with_capacity(inst.num_terminals());
        for t in 0..inst.num_terminals() {
            let (s, gain) = best_cluster(inst, &levels, t);
            total += gain;
            clusters.push(s);
        }
        if best.as_ref().is_none_or(|(v, _)| total > *v + 1e-12) {
            best = Some((total, derive_full_solution(inst, &levels, &clusters)));
        }
    }
    let (_, solution) = best.expect("at least the all-off vector is enumerated");
    Ok(OracleResult {
        objective: objective_value(inst, &solution),
        solution,
        vectors_enumerated: vectors as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::check_feasibility;
    use crate::instance::fixtures::tiny1;

    #[test]
    fn tiny1_optimum() {
        let inst = tiny1();
        let r = brute_force_opt(&inst, DEFAULT_CAP).unwrap();
        assert_eq!(r.objective, 10.0);
        // Ties keep the first vector in enumeration order.
        assert_eq!(r.solution.power_level, vec![1, 0]);
        assert_eq!(r.solution.cluster, vec![vec![0]]);
        assert_eq!(r.vectors_enumerated, 9);
        assert!(check_feasibility(&inst, &r.solution).is_feasible());
    }

    #[test]
    fn hopeless_terminal_gives_all_off() {
        let mut inst = tiny1();
        inst.atten[0] = vec![1e-6, 1e-6];
        let r = brute_force_opt(&inst, DEFAULT_CAP).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.solution.power_level, vec![0, 0]);
    }

    #[test]
    fn unprofitable_cooperation_is_skipped() {
        // Only the pair {b1, b2} serves, but c > r makes it a loss.
        let mut inst = tiny1();
        inst.atten[0] = vec![0.05, 0.05];
        inst.coop_cost[0] = 20.0;
        let r = brute_force_opt(&inst, DEFAULT_CAP).unwrap();
        assert_eq!(r.objective, 0.0);
        inst.coop_cost[0] = 4.0;
        let r = brute_force_opt(&inst, DEFAULT_CAP).unwrap();
        assert_eq!(r.objective, 6.0);
        assert_eq!(r.solution.cluster[0], vec![0, 1]);
    }

    #[test]
    fn refuses_above_cap() {
        assert_eq!(
            brute_force_opt(&tiny1(), 8),
            Err(OracleError::TooManyVectors { vectors: 9, cap: 8 })
        );
    }

    #[test]
    fn subsets_in_lexicographic_order() {
        let mut seen = Vec::new();
        for_each_subset(&[1, 4, 6], 2, &mut |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![1, 4], vec![1, 6], vec![4, 6]]);
    }
}
