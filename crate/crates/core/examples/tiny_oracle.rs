//! Exhaustive optimum of a tiny instance, cross-checked against branch and
//! bound on the big-M model.

use spcap::formulation::{build_big_m_model, check_feasibility, save_solution};
use spcap::instance::fixtures::tiny1;
use spcap::oracle::{brute_force_opt, DEFAULT_CAP};
use spcap::solver::{solve_mip, BnbConfig};

pub fn run_example() -> String {
    let inst = tiny1();
    let oracle = brute_force_opt(&inst, DEFAULT_CAP).expect("tiny enough");
    assert!(check_feasibility(&inst, &oracle.solution).is_feasible());
    let mip = solve_mip(&build_big_m_model(&inst), &BnbConfig::default()).expect("solver");
    assert!((mip.objective - oracle.objective).abs() < 1e-9);
    format!(
        "optimum {} over {} power vectors, branch and bound agrees after {} nodes\n{}",
        oracle.objective,
        oracle.vectors_enumerated,
        mip.nodes,
        save_solution(&inst, &oracle.solution)
    )
}

#[allow(dead_code)]
fn main() {
    println!("{}", run_example());
}
