//! PI-bound, BM-bound and the strengthened big-M bound under fixings.

use spcap::bounds::{pi_bound, StrongBm};
use spcap::formulation::SpcapVars;
use spcap::instance::generate_instance;
use spcap::model::Fixings;
use spcap::oracle::{brute_force_opt, DEFAULT_CAP};
use spcap::GenConfig;

pub fn run_example() -> String {
    let mut config = GenConfig::new(6, 3, 2, 5);
    config.area_side = 300.0;
    let inst = generate_instance(&config).expect("valid settings");
    let opt = brute_force_opt(&inst, DEFAULT_CAP).expect("tiny").objective;
    let pi = pi_bound(&inst).expect("PI bound");
    let sbm = StrongBm::new(&inst).expect("BM bound");
    let vars = SpcapVars::of(&inst);
    // Switch the first base off and bound again.
    let off: Fixings = (0..vars.n_l).map(|l| (vars.z(0, l), false)).collect();
    let fixed = sbm.value(&off).expect("feasible with a base off");
    assert!(opt <= pi.value + 1e-6 && opt <= sbm.root_value() + 1e-6);
    assert!(fixed <= sbm.root_value() + 1e-9);
    format!(
        "optimum {opt:.4}\nPI-bound {:.4} ({} cuts in {} rounds)\nBM-bound {:.4}\nstrongBM with base 1 off {fixed:.4}",
        pi.value,
        pi.cut_count,
        pi.iterations,
        sbm.root_value()
    )
}

#[allow(dead_code)]
fn main() {
    println!("{}", run_example());
}
