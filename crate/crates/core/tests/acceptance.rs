//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line
//! each; exits non-zero if any fails. Built without the libtest harness so
//! the summary is always visible.
//!
//! `SPCAP_ACCEPTANCE=1,4` runs only the listed criteria.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spcap::aco::{run_hybrid, run_hybrid_prepared, Attractiveness, HybridParams, Prepared};
use spcap::bounds::{bm_bound, build_pi_model, build_strong_bm_model, pi_bound};
use spcap::cuts::{
    enumerate_relaxed_covers, enumerate_relaxed_gcis, is_valid_cut, is_valid_power_cover, separate_gci,
    separate_power_covers, SeparationConfig,
};
use spcap::formulation::{build_big_m_model, check_feasibility, derive_full_solution, objective_value, SpcapVars};
use spcap::instance::save_instance;
use spcap::model::Fixings;
use spcap::rins::RinsConfig;
use spcap::solver::{solve_lp, solve_mip, BnbConfig, MipStatus};
use spcap::Instance;

/// Objective and bound comparisons.
const TOL: f64 = 1e-6;
/// Wall-clock cap for the 200-run suite.
const SUITE_LIMIT: Duration = Duration::from_secs(30 * 60);
const MEDIUM_INSTANCES: u64 = 20;
const SEEDS_PER_INSTANCE: u64 = 10;
const RANDOM_ASSIGNMENTS: usize = 1000;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn main() {
    // Honour a libtest-style name filter: skip unless it matches.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let only: Option<Vec<usize>> = std::env::var("SPCAP_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));

    let tiny = common::tiny_suite();
    let optima: Vec<f64> = tiny.iter().map(common::naive_optimum).collect();
    let mut failed = false;
    let mut report = |n: usize, title: &str, v: Verdict| {
        println!("criterion {n} {title}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed |= !v.pass;
    };

    if wanted(1) {
        report(1, "oracle equivalence", oracle_equivalence(&tiny, &optima));
    }
    if wanted(2) {
        report(2, "cut validity", cut_validity(&tiny));
    }
    if wanted(3) {
        report(3, "bound sandwich", bound_sandwich(&tiny, &optima));
    }
    if wanted(4) || wanted(5) {
        let (c4, c5) = hybrid_suite();
        if wanted(4) {
            report(4, "hybrid feasibility and monotonicity", c4);
        }
        if wanted(5) {
            report(5, "RINS usefulness", c5);
        }
    }
    if wanted(6) {
        report(6, "hybrid quality", hybrid_quality(&tiny, &optima));
    }
    if wanted(7) {
        report(7, "determinism", determinism());
    }
    if wanted(8) {
        report(8, "formulation fidelity", formulation_fidelity(&tiny));
    }
    if failed {
        std::process::exit(1);
    }
}

fn oracle_equivalence(tiny: &[Instance], optima: &[f64]) -> Verdict {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for (i, (inst, &opt)) in tiny.iter().zip(optima).enumerate() {
        let config = BnbConfig {
            time_limit: Duration::MAX,
            ..BnbConfig::default()
        };
        let r = solve_mip(&build_big_m_model(inst), &config).expect("branch and bound");
        if r.status != MipStatus::Optimal || (r.objective - opt).abs() > TOL {
            mismatches.push(format!("#{i}: {:?} {} vs {opt}", r.status, r.objective));
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{}/{} match the brute-force optimum to {TOL:e} in {:.1}s{}",
            tiny.len() - mismatches.len(),
            tiny.len(),
            start.elapsed().as_secs_f64(),
            if mismatches.is_empty() { String::new() } else { format!("; {}", mismatches.join(", ")) }
        ),
    )
}

fn cut_validity(tiny: &[Instance]) -> Verdict {
    let cfg = SeparationConfig::default();
    let (mut checked, mut invalid) = (0, Vec::new());
    for (i, inst) in tiny.iter().enumerate() {
        let vars = SpcapVars::of(inst);
        // Separation points: the initial PI point, the big-M root point and
        // random fractional points.
        let mut points = vec![
            solve_lp(&build_pi_model(inst), &Fixings::new()).expect("PI LP").values,
            solve_lp(&build_strong_bm_model(inst), &Fixings::new()).expect("BM LP").values,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        for _ in 0..5 {
            points.push((0..vars.count()).map(|_| rng.gen::<f64>()).collect());
        }
        let mut gcis = enumerate_relaxed_gcis(inst);
        let mut covers = enumerate_relaxed_covers(inst);
        for p in &points {
            gcis.extend(separate_gci(inst, p, &cfg).into_iter().map(|(c, _)| c));
            covers.extend(separate_power_covers(inst, p, &cfg).into_iter().map(|(c, _)| c));
        }
        for cut in &gcis {
            checked += 1;
            if !is_valid_cut(inst, cut).expect("tiny instances fit the exhaustive check") {
                invalid.push(format!("#{i} {cut:?}"));
            }
        }
        for cut in &covers {
            checked += 1;
            if !is_valid_power_cover(inst, cut).expect("tiny instances fit the exhaustive check") {
                invalid.push(format!("#{i} {cut:?}"));
            }
        }
    }
    verdict(
        invalid.is_empty(),
        format!("{checked} cuts checked exhaustively, {} invalid{}", invalid.len(), first(&invalid)),
    )
}

fn first(items: &[String]) -> String {
    items.first().map(|s| format!("; first: {s}")).unwrap_or_default()
}

fn bound_sandwich(tiny: &[Instance], optima: &[f64]) -> Verdict {
    let mut broken = Vec::new();
    let mut tighter = 0;
    for (i, (inst, &opt)) in tiny.iter().zip(optima).enumerate() {
        let pi = pi_bound(inst).expect("PI bound").value;
        let bm = bm_bound(inst).expect("BM bound").value;
        if opt > pi + TOL || opt > bm + TOL {
            broken.push(format!("#{i}: opt {opt} pi {pi} bm {bm}"));
        }
        if pi <= bm + TOL {
            tighter += 1;
        }
    }
    verdict(
        broken.is_empty(),
        format!(
            "optimum <= PI-bound and <= BM-bound on {}/{}; PI-bound <= BM-bound on {:.0}% (reported){}",
            tiny.len() - broken.len(),
            tiny.len(),
            100.0 * tighter as f64 / tiny.len() as f64,
            first(&broken)
        ),
    )
}

/// Criteria 4 and 5 share the 200 runs.
fn hybrid_suite() -> (Verdict, Verdict) {
    let start = Instant::now();
    let mut violations = Vec::new();
    let (mut runs, mut calls) = (0, 0);
    let mut relative = Vec::new();
    for (i, inst) in common::medium_suite(MEDIUM_INSTANCES).iter().enumerate() {
        let prepared = Prepared::new(inst).expect("relaxations");
        for seed in 0..SEEDS_PER_INSTANCE {
            let mut params = HybridParams::defaults_for(inst);
            params.seed = seed;
            params.loops = 1;
            params.attractiveness = Attractiveness::Cached;
            params.rins = RinsConfig {
                time_limit: Duration::MAX,
                node_limit: Some(2),
                ..RinsConfig::default()
            };
            params.record_solutions = true;
            runs += 1;
            let tag = format!("instance {i} seed {seed}");
            let r = match run_hybrid_prepared(inst, &prepared, &params) {
                Ok(r) => r,
                Err(e) => {
                    violations.push(format!("{tag}: {e}"));
                    continue;
                }
            };
            for ((ant, refined), row) in r.emitted.iter().zip(&r.log) {
                calls += 1;
                for (what, sol, logged) in [("ant", ant, row.ant_value), ("RINS", refined, row.rins_value)] {
                    let report = check_feasibility(inst, sol);
                    if !report.is_feasible() {
                        violations.push(format!("{tag}: {what} solution infeasible: {:?}", report));
                    }
                    if (objective_value(inst, sol) - logged).abs() > TOL {
                        violations.push(format!("{tag}: {what} value mismatch"));
                    }
                }
                if row.rins_value < row.ant_value - TOL {
                    violations.push(format!("{tag}: RINS {} below ant {}", row.rins_value, row.ant_value));
                }
                if row.best_so_far > r.pi_bound + TOL {
                    violations.push(format!("{tag}: best {} above PI-bound {}", row.best_so_far, r.pi_bound));
                }
                relative.push((row.rins_value - row.ant_value) / row.ant_value.abs().max(1.0));
            }
            if !check_feasibility(inst, &r.best).is_feasible() || r.best_value > r.pi_bound + TOL {
                violations.push(format!("{tag}: best solution"));
            }
        }
    }
    let elapsed = start.elapsed();
    let c4 = verdict(
        violations.is_empty() && elapsed <= SUITE_LIMIT,
        format!(
            "{runs} runs, {calls} RINS calls, {} violations, {:.0}s of {}s allowed{}",
            violations.len(),
            elapsed.as_secs_f64(),
            SUITE_LIMIT.as_secs(),
            first(&violations)
        ),
    );
    let mean = relative.iter().sum::<f64>() / relative.len().max(1) as f64;
    let in_band = relative.iter().filter(|&&r| (0.05..=0.13).contains(&r)).count();
    let mut sorted = relative.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
    let c5 = verdict(
        mean > 0.0,
        format!(
            "mean relative improvement {:.1}% (median {:.1}%) over {} calls; {:.0}% of calls in the 5-13% band (reported)",
            100.0 * mean,
            100.0 * median,
            relative.len(),
            100.0 * in_band as f64 / relative.len().max(1) as f64
        ),
    );
    (c4, c5)
}

fn hybrid_quality(tiny: &[Instance], optima: &[f64]) -> Verdict {
    let (mut hit, mut short) = (0, Vec::new());
    for (i, (inst, &opt)) in tiny.iter().zip(optima).enumerate() {
        let r = run_hybrid(inst, &HybridParams::defaults_for(inst)).expect("hybrid run");
        if r.best_value >= opt - TOL {
            hit += 1;
        }
        if r.best_value < 0.95 * opt - TOL {
            short.push(format!("#{i}: {} vs {opt}", r.best_value));
        }
    }
    let rate = hit as f64 / tiny.len() as f64;
    verdict(
        rate >= 0.8 && short.is_empty(),
        format!(
            "optimum reached on {hit}/{} ({:.0}%, need 80%); below 95% of optimum on {}{}",
            tiny.len(),
            100.0 * rate,
            short.len(),
            first(&short)
        ),
    )
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = spcap::cli::run(std::iter::once("spcap").chain(args.iter().copied()), &mut out, &mut err);
    (code, out)
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("temp dir");
    let tiny_path = dir.path().join("tiny.txt");
    std::fs::write(&tiny_path, save_instance(&common::tiny_suite()[3])).expect("write instance");
    let medium_path = dir.path().join("medium.txt");
    std::fs::write(&medium_path, save_instance(&common::medium_suite(1)[0])).expect("write instance");
    let report_path = dir.path().join("report.csv");
    let log_path = dir.path().join("log.csv");
    let (tiny, medium, report, log) = (
        tiny_path.to_str().unwrap(),
        medium_path.to_str().unwrap(),
        report_path.to_str().unwrap(),
        log_path.to_str().unwrap(),
    );
    let commands: Vec<Vec<&str>> = vec![
        vec!["generate", "--terminals", "6", "--bases", "3", "--levels", "2", "--seed", "7"],
        vec!["bounds", tiny, "--out", "csv"],
        vec!["solve", tiny, "--mode", "hybrid", "--seed", "7", "--out", "csv", "--deterministic", "--log", log],
        vec!["solve", tiny, "--mode", "exact", "--out", "csv", "--deterministic"],
        vec!["solve", tiny, "--mode", "oracle", "--out", "csv", "--deterministic"],
        vec![
            "solve", medium, "--seed", "7", "--loops", "2", "--attractiveness", "cached", "--rins-nodes", "2",
            "--out", "csv", "--deterministic",
        ],
    ];
    let mut differing = Vec::new();
    for args in &commands {
        let (c1, o1) = cli(args);
        let log1 = std::fs::read(&log_path).ok();
        let (c2, o2) = cli(args);
        let log2 = std::fs::read(&log_path).ok();
        if c1 != 0 || c1 != c2 || o1 != o2 || log1 != log2 {
            differing.push(args[..2].join(" "));
        }
        if args[0] == "solve" && args[2] == "--mode" && args[3] == "oracle" {
            std::fs::write(&report_path, &o1).expect("write report");
        }
    }
    let (r1, o1) = cli(&["report", report, "--out", "csv"]);
    let (_, o2) = cli(&["report", report, "--out", "csv"]);
    if r1 != 0 || o1 != o2 {
        differing.push("report".into());
    }
    verdict(
        differing.is_empty(),
        format!(
            "{} commands run twice, {} with differing output{}",
            commands.len() + 1,
            differing.len(),
            first(&differing)
        ),
    )
}

fn formulation_fidelity(tiny: &[Instance]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut discrepancies = Vec::new();
    let mut rows_checked = 0usize;
    for k in 0..RANDOM_ASSIGNMENTS {
        let inst = &tiny[k % tiny.len()];
        let (n_b, n_l) = (inst.num_bases(), inst.num_levels());
        let levels: Vec<usize> = (0..n_b).map(|_| rng.gen_range(0..=n_l)).collect();
        let clusters: Vec<Vec<usize>> = (0..inst.num_terminals())
            .map(|_| (0..n_b).filter(|_| rng.gen_bool(0.5)).collect())
            .collect();
        let sol = derive_full_solution(inst, &levels, &clusters);
        let model = build_big_m_model(inst);
        rows_checked += model.num_rows();
        let rows_ok = model.violated_rows(&sol.to_vector(inst), 1e-9).is_empty();
        let checker_ok = check_feasibility(inst, &sol).is_feasible();
        let physics_ok = (0..inst.num_terminals())
            .all(|t| sol.served[t] == common::covered(inst, &levels, &clusters[t], t));
        if !(rows_ok && checker_ok && physics_ok) {
            discrepancies.push(format!("assignment {k}: rows {rows_ok} checker {checker_ok} physics {physics_ok}"));
        }
        // Claiming service for an uncovered terminal must break both the
        // SIR row and the checker.
        if let Some(t) = (0..inst.num_terminals()).find(|&t| !sol.served[t] && !clusters[t].is_empty()) {
            let mut forged = sol.clone();
            forged.served[t] = true;
            let rows_ok = model.violated_rows(&forged.to_vector(inst), 1e-9).is_empty();
            let checker_ok = check_feasibility(inst, &forged).is_feasible();
            if rows_ok || checker_ok {
                discrepancies.push(format!("assignment {k}: forged service accepted (rows {rows_ok}, checker {checker_ok})"));
            }
        }
    }
    verdict(
        discrepancies.is_empty(),
        format!(
            "{RANDOM_ASSIGNMENTS} assignments, {rows_checked} row checks, {} discrepancies{}",
            discrepancies.len(),
            first(&discrepancies)
        ),
    )
}
