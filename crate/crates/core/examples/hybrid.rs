//! The hybrid ant colony with mod-RINS refinement on a small instance.

use spcap::aco::{run_hybrid, write_run_log, HybridParams};
use spcap::formulation::check_feasibility;
use spcap::instance::generate_instance;
use spcap::GenConfig;

pub fn run_example() -> String {
    let mut config = GenConfig::new(8, 3, 2, 11);
    config.area_side = 400.0;
    let inst = generate_instance(&config).expect("valid settings");
    let mut params = HybridParams::defaults_for(&inst);
    params.loops = 5;
    params.seed = 3;
    let r = run_hybrid(&inst, &params).expect("hybrid run");
    assert!(check_feasibility(&inst, &r.best).is_feasible());
    assert!(r.best_value <= r.pi_bound + 1e-6);
    let mut log = Vec::new();
    write_run_log(&r.log, &mut log).expect("in-memory log");
    format!(
        "best {:.4} (best ant {:.4}), PI-bound {:.4}, {} of {} RINS calls improved\nserved {} of {} terminals\n{} log lines",
        r.best_value,
        r.best_ant_value,
        r.pi_bound,
        r.rins_improvements,
        r.rins_calls,
        r.best.num_served(),
        inst.num_terminals(),
        String::from_utf8(log).expect("UTF-8").lines().count()
    )
}

#[allow(dead_code)]
fn main() {
    println!("{}", run_example());
}
