//! One mod-RINS call: fix what the ant and the PI point agree on and
//! search the rest under a cutoff at the ant value.

use spcap::bounds::pi_bound;
use spcap::formulation::{derive_full_solution, objective_value};
use spcap::instance::generate_instance;
use spcap::rins::{mod_rins, RinsConfig};
use spcap::GenConfig;

pub fn run_example() -> String {
    let mut config = GenConfig::new(6, 3, 2, 21);
    config.area_side = 300.0;
    let inst = generate_instance(&config).expect("valid settings");
    // A poor ant: every base at full power, every terminal with the full
    // cluster.
    let levels = vec![inst.num_levels(); inst.num_bases()];
    let everyone: Vec<usize> = (0..inst.num_bases()).collect();
    let ant = derive_full_solution(&inst, &levels, &vec![everyone; inst.num_terminals()]);
    let pi = pi_bound(&inst).expect("PI bound");
    let r = mod_rins(&inst, &ant, &pi.point, &RinsConfig::default()).expect("RINS");
    assert!(r.value >= objective_value(&inst, &ant) - 1e-9);
    format!(
        "ant {:.4} -> {:.4} ({} variables fixed, {} nodes, {:?})",
        r.ant_value, r.value, r.fixed, r.nodes, r.status
    )
}

#[allow(dead_code)]
fn main() {
    println!("{}", run_example());
}
