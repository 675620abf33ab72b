//! Shared helpers for integration tests: an independent brute-force
//! optimum computed straight from the instance data, and the tiny suite.

#![allow(dead_code)]

use spcap::instance::generate_instance;
use spcap::{GenConfig, Instance};

/// Coverage test written from the SIR definition: cluster signal against
/// `delta (noise + interference)`, with a 1e-9 relative allowance.
pub fn covered(inst: &Instance, levels: &[usize], cluster: &[usize], t: usize) -> bool {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for b in 0..inst.bases.len() {
        let p = if levels[b] == 0 { 0.0 } else { inst.levels[levels[b] - 1] };
        let received = inst.atten[t][b] * p;
        if cluster.contains(&b) {
            signal += received;
        } else {
            interference += received;
        }
    }
    let need = inst.delta[t] * (inst.noise + interference);
    signal >= need - 1e-9 * need.max(signal)
}

/// Optimum over every power vector and every cluster (off bases
/// included), terminals optimized independently per vector.
pub fn naive_optimum(inst: &Instance) -> f64 {
    let (n_b, n_l) = (inst.bases.len(), inst.levels.len());
    let mut best = f64::NEG_INFINITY;
    let mut levels = vec![0; n_b];
    for code in 0..(n_l + 1).pow(n_b as u32) {
        let mut rest = code;
        for l in levels.iter_mut() {
            *l = rest % (n_l + 1);
            rest /= n_l + 1;
        }
        let mut total = 0.0;
        for t in 0..inst.terminals.len() {
            let (r, c) = (inst.revenue[t], inst.coop_cost[t]);
            let mut term: f64 = 0.0;
            for mask in 1usize..1 << n_b {
                let cluster: Vec<usize> = (0..n_b).filter(|b| mask >> b & 1 == 1).collect();
                let size = cluster.len() as f64;
                let value = if covered(inst, &levels, &cluster, t) { r - c * (size - 1.0) } else { -c * size };
                term = term.max(value);
            }
            total += term;
        }
        best = best.max(total);
    }
    best
}

/// 25 tiny instances: 3 to 6 terminals, 2 or 3 bases, 1 or 2 levels.
/// Terminals share a 300 m square so interference matters.
pub fn tiny_suite() -> Vec<Instance> {
    (0..25u64)
        .map(|i| {
            let mut c = GenConfig::new(3 + (i % 4) as usize, 2 + (i % 2) as usize, 1 + ((i / 2) % 2) as usize, 100 + i);
            c.area_side = 300.0;
            generate_instance(&c).expect("valid generator settings")
        })
        .collect()
}

/// Medium instances: 50 terminals, 8 bases, 4 levels.
pub fn medium_suite(count: u64) -> Vec<Instance> {
    (0..count)
        .map(|i| generate_instance(&GenConfig::new(50, 8, 4, 1000 + i)).expect("valid generator settings"))
        .collect()
}
