//! The relaxed cover families of a tiny instance, their text form, an
//! exhaustive validity check and separation at a fractional point.

use spcap::cuts::{
    enumerate_relaxed_covers, enumerate_relaxed_gcis, is_valid_cut, is_valid_power_cover, separate_gci,
    separate_power_covers, SeparationConfig,
};
use spcap::formulation::SpcapVars;
use spcap::instance::fixtures::tiny1;

pub fn run_example() -> String {
    let inst = tiny1();
    let mut out = String::new();
    for cut in enumerate_relaxed_gcis(&inst) {
        assert!(is_valid_cut(&inst, &cut).unwrap());
        out.push_str(&cut.to_text(&inst));
        out.push('\n');
    }
    for cover in enumerate_relaxed_covers(&inst) {
        assert!(is_valid_power_cover(&inst, &cover).unwrap());
        out.push_str(&format!("power cover for t{}: caps {:?}\n", cover.terminal + 1, cover.caps));
    }
    // Serve t1 with b1 alone at level 1 while b2 transmits at level 2.
    let vars = SpcapVars::of(&inst);
    let mut point = vec![0.0; vars.count()];
    for j in [vars.x(0), vars.y(0, 0), vars.z(0, 0), vars.v(0, 0, 0), vars.z(1, 1)] {
        point[j] = 1.0;
    }
    let cfg = SeparationConfig::default();
    for (cut, violation) in separate_gci(&inst, &point, &cfg) {
        out.push_str(&format!("violated by {violation:.3}: {}\n", cut.to_text(&inst)));
    }
    assert!(separate_power_covers(&inst, &point, &cfg).is_empty());
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run_example());
}
