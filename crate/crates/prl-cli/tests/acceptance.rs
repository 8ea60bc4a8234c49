//! Acceptance suite: one test per acceptance criterion, each printing a
//! single PASS/FAIL line (run with `--nocapture` to see them live).
//!
//! All statistical criteria run from one fixed master seed so the suite is
//! deterministic end to end.

use prl::bench::{run_sweep, BoundRule, CapRule, InitChoice, ProtocolKind, SweepOutcome, SweepSpec};
use prl::engine::{
    default_cap_prl, derive_run_seed, draw_interaction, generate_initial, Prl, Protocol,
    RandomSource, SrlStop,
};
use prl::engine::{run as engine_run, InitFamily};
use prl::predicates::is_srl;
use prl::state::ProtocolParams;
use prl::step::prl_step_traced;
use prl::verifier::{
    certify_safety_srl, check_closure, check_transition_properties, class_predicate, CheckMode,
    DEFAULT_CONFIG_BUDGET,
};
use rayon::prelude::*;
use std::sync::OnceLock;

/// Master seed for every statistical criterion in this suite.
const MASTER_SEED: u64 = 7;

fn report(criterion: &str, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
}

/// Criterion 1: the three configuration classes are closed and the
/// single-leader class is output-safe, exhaustively at (2,2), (2,3), (3,3).
#[test]
fn criterion_1_exhaustive_closure_and_safety() {
    let mut ok = true;
    let mut details = Vec::new();
    for (n, n_upper) in [(2usize, 2u32), (2, 3), (3, 3)] {
        let params = ProtocolParams::new(n_upper).unwrap();
        for name in ["cpb", "cni", "srl"] {
            let rep = check_closure(name, class_predicate(name).unwrap(), n, params, DEFAULT_CONFIG_BUDGET)
                .unwrap();
            ok &= rep.closed();
            details.push(format!("{name}@({n},{n_upper})={}", if rep.closed() { "closed" } else { "VIOLATED" }));
        }
        let safety = certify_safety_srl(n, params, DEFAULT_CONFIG_BUDGET).unwrap();
        ok &= safety.certified();
        details.push(format!(
            "safety@({n},{n_upper})={} ({} members)",
            if safety.certified() { "certified" } else { "VIOLATED" },
            safety.srl_count
        ));
    }
    report("1 (exhaustive closure + safety)", ok, &details.join(", "));
    assert!(ok, "{details:?}");
}

/// Criterion 2: local transition properties, exhaustive at (2,2) and (3,3),
/// sampled with 100k uniform configurations at (8,10). Zero tolerance.
#[test]
fn criterion_2_transition_properties() {
    let mut ok = true;
    let mut details = Vec::new();
    for (n, n_upper) in [(2usize, 2u32), (3, 3)] {
        let params = ProtocolParams::new(n_upper).unwrap();
        let rep = check_transition_properties(n, params, CheckMode::Exhaustive, prl_step_traced, DEFAULT_CONFIG_BUDGET)
            .unwrap();
        ok &= rep.clean();
        details.push(format!("exhaustive@({n},{n_upper}): {} transitions, {} violations", rep.transitions_examined, rep.violation_count));
    }
    let params = ProtocolParams::new(10).unwrap();
    let rep = check_transition_properties(
        8,
        params,
        CheckMode::Sampled { configurations: 100_000, seed: MASTER_SEED },
        prl_step_traced,
        DEFAULT_CONFIG_BUDGET,
    )
    .unwrap();
    ok &= rep.clean();
    details.push(format!(
        "sampled@(8,10): {} transitions, {} violations",
        rep.transitions_examined, rep.violation_count
    ));
    report("2 (transition properties)", ok, &details.join("; "));
    assert!(ok, "{details:?}");
}

struct GridRow {
    family: InitFamily,
    n: usize,
    seed: u64,
    reached: bool,
    leaders_final: usize,
    srl_at_stop: bool,
    moves_max: u32,
    n_upper: u32,
    outputs_stable: bool,
}

/// 1000 seeded runs from every family at n = N in {4, 8, 16}, each continued
/// for 10n steps past the stop to watch the outputs. Shared by criteria 3/4.
fn stabilization_grid() -> &'static Vec<GridRow> {
    static GRID: OnceLock<Vec<GridRow>> = OnceLock::new();
    GRID.get_or_init(|| {
        let mut jobs = Vec::new();
        for family in InitFamily::ALL {
            for n in [4usize, 8, 16] {
                for run_idx in 0..1000u64 {
                    jobs.push((family, n, run_idx));
                }
            }
        }
        jobs.into_par_iter()
            .map(|(family, n, run_idx)| {
                let n_upper = n as u32;
                let params = ProtocolParams::new(n_upper).unwrap();
                let point = (family as u64) << 8 | n as u64;
                let seed = derive_run_seed(MASTER_SEED, point, run_idx);
                let mut rng = RandomSource::new(seed);
                let c0 = generate_initial(family, n, params, &mut rng).unwrap();
                let cap = default_cap_prl(n, &params);
                let proto = Prl { params };
                let res = engine_run(&proto, c0.into_agents(), &SrlStop { params }, cap, &mut rng);

                // closure spot-check: 10n further steps, outputs frozen
                let mut agents = res.final_config.clone();
                let outputs: Vec<bool> = agents.iter().map(|a| a.leader).collect();
                let mut leaders = outputs.iter().filter(|&&l| l).count();
                let mut stable = true;
                for _ in 0..(10 * n) {
                    let i = draw_interaction(&mut rng, n);
                    let j = (i + 1) % n;
                    let (l, r, ev) = proto.step(agents[i], agents[j], leaders);
                    agents[i] = l;
                    agents[j] = r;
                    if ev.created_leader {
                        leaders += 1;
                    }
                    if ev.killed_leader {
                        leaders -= 1;
                    }
                    if agents.iter().map(|a| a.leader).ne(outputs.iter().copied()) {
                        stable = false;
                        break;
                    }
                }

                GridRow {
                    family,
                    n,
                    seed,
                    reached: res.reached_target,
                    leaders_final: res.final_config.iter().filter(|a| a.leader).count(),
                    srl_at_stop: is_srl(&res.final_config, n_upper),
                    moves_max: res.counters.bullet_moves_max,
                    n_upper,
                    outputs_stable: stable,
                }
            })
            .collect()
    })
}

/// Criterion 3: across all runs of the grid (18000 seeded executions of the
/// main protocol), no bullet ever moves more than N - 1 times.
#[test]
fn criterion_3_bullet_lifetime_bound() {
    let grid = stabilization_grid();
    let total = grid.len();
    let worst = grid.iter().map(|r| (r.moves_max, r.n_upper)).max().unwrap();
    let offenders: Vec<_> = grid
        .iter()
        .filter(|r| r.moves_max > r.n_upper - 1)
        .map(|r| (r.family, r.n, r.seed, r.moves_max))
        .collect();
    let ok = offenders.is_empty() && total >= 10_000;
    report(
        "3 (bullet lifetime bound)",
        ok,
        &format!("{total} runs, max bullet moves seen {} (bound N-1 = {})", worst.0, worst.1 - 1),
    );
    assert!(ok, "offenders: {offenders:?}");
}

/// Criterion 4: every family at n = N in {4, 8, 16} stabilizes in all 1000
/// seeded runs before the 200nN cap, with exactly one leader, and outputs
/// stay frozen for 10n further steps.
#[test]
fn criterion_4_stabilization_from_every_family() {
    let grid = stabilization_grid();
    let bad: Vec<_> = grid
        .iter()
        .filter(|r| !(r.reached && r.leaders_final == 1 && r.srl_at_stop && r.outputs_stable))
        .map(|r| (r.family, r.n, r.seed, r.reached, r.leaders_final, r.outputs_stable))
        .collect();
    let ok = bad.is_empty();
    report(
        "4 (stabilization from every family)",
        ok,
        &format!("{} runs across {} families, {} failures", grid.len(), InitFamily::ALL.len(), bad.len()),
    );
    assert!(ok, "failing runs: {:?}", &bad[..bad.len().min(8)]);
}

fn prl_scaling_sweep() -> &'static SweepOutcome {
    static SWEEP: OnceLock<SweepOutcome> = OnceLock::new();
    SWEEP.get_or_init(|| {
        run_sweep(&SweepSpec {
            protocol: ProtocolKind::Prl,
            sizes: vec![8, 16, 32, 64],
            bound_rule: BoundRule::MatchN,
            runs: 100,
            init: InitChoice::WorstCase,
            master_seed: MASTER_SEED,
            cap: CapRule::Default,
        })
        .unwrap()
    })
}

/// Criterion 5: convergence scaling with N = n from the worst-case family:
/// fitted exponent within [1.6, 2.4] at r² >= 0.95.
#[test]
fn criterion_5_convergence_scaling() {
    let sweep = prl_scaling_sweep();
    let fit = sweep.fit.as_ref().expect("all points completed");
    let ok = sweep.poisoned.is_empty()
        && (1.6..=2.4).contains(&fit.exponent)
        && fit.r_squared >= 0.95;
    report(
        "5 (convergence scaling)",
        ok,
        &format!(
            "init {}, exponent {:.3}, r2 {:.4}, means {:?}",
            sweep.init_family,
            fit.exponent,
            fit.r_squared,
            sweep.points.iter().map(|p| p.mean_steps.round()).collect::<Vec<_>>()
        ),
    );
    assert!(ok, "exponent {:.3}, r2 {:.4}", fit.exponent, fit.r_squared);
}

/// Criterion 6: the oracle baseline scales like its cubic reputation
/// (exponent within [2.5, 3.5]) and is slower than the main protocol at
/// n = 32.
#[test]
fn criterion_6_baseline_separation() {
    let fj = run_sweep(&SweepSpec {
        protocol: ProtocolKind::Fj,
        sizes: vec![8, 16, 32],
        bound_rule: BoundRule::MatchN,
        runs: 50,
        init: InitChoice::WorstCase,
        master_seed: MASTER_SEED,
        cap: CapRule::Default,
    })
    .unwrap();
    let fj_fit = fj.fit.as_ref().expect("all points completed");
    let exponent_ok = fj.poisoned.is_empty() && (2.5..=3.5).contains(&fj_fit.exponent);

    let prl = prl_scaling_sweep();
    let prl_at_32 = prl.points.iter().find(|p| p.n == 32).unwrap().mean_steps;
    let fj_at_32 = fj.points.iter().find(|p| p.n == 32).unwrap().mean_steps;
    let mean_ok = prl_at_32 < fj_at_32;

    let ok = exponent_ok && mean_ok;
    report(
        "6 (baseline separation)",
        ok,
        &format!(
            "fj init {}, fj exponent {:.3} (band [2.5, 3.5]: {}), prl@32 {:.0} vs fj@32 {:.0} (strictly below: {})",
            fj.init_family,
            fj_fit.exponent,
            if exponent_ok { "ok" } else { "violated" },
            prl_at_32,
            fj_at_32,
            if mean_ok { "ok" } else { "violated" }
        ),
    );
    assert!(
        ok,
        "fj exponent {:.3}, prl@32 {prl_at_32:.1}, fj@32 {fj_at_32:.1}",
        fj_fit.exponent
    );
}

/// Criterion 7: scheduler uniformity — a million draws on eight arcs, every
/// frequency within three binomial standard deviations of 1/8.
#[test]
fn criterion_7_scheduler_uniformity() {
    let n = 8usize;
    let draws = 1_000_000u64;
    let mut counts = vec![0u64; n];
    let mut rng = RandomSource::new(MASTER_SEED);
    for _ in 0..draws {
        counts[draw_interaction(&mut rng, n)] += 1;
    }
    let p = 1.0 / n as f64;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    let expectation = draws as f64 * p;
    let max_dev = counts
        .iter()
        .map(|&c| (c as f64 - expectation).abs())
        .fold(0.0f64, f64::max);
    let ok = max_dev <= 3.0 * sigma;
    report(
        "7 (scheduler uniformity)",
        ok,
        &format!("max deviation {max_dev:.0} of allowed {:.0} ({counts:?})", 3.0 * sigma),
    );
    assert!(ok, "counts {counts:?}");
}

/// Criterion 8: repeated invocations of the run and bench commands with
/// identical flags produce byte-identical JSON and CSV.
#[test]
fn criterion_8_byte_identical_outputs() {
    let bin = env!("CARGO_BIN_EXE_prl");
    let run_out = |label: &str| {
        let out = std::process::Command::new(bin)
            .args([
                "run", "--protocol", "prl", "--n", "6", "--N", "8", "--init", "uniform", "--seed",
                "9",
            ])
            .output()
            .expect("spawn run");
        assert!(out.status.success(), "{label}: {:?}", out);
        out.stdout
    };
    let run_identical = run_out("first") == run_out("second");

    let dir = tempfile::tempdir().unwrap();
    let bench_out = |tag: &str| {
        let csv = dir.path().join(format!("rows-{tag}.csv"));
        let json = dir.path().join(format!("fit-{tag}.json"));
        let out = std::process::Command::new(bin)
            .args([
                "bench",
                "--protocol",
                "prl",
                "--n",
                "4,6,8",
                "--match-N",
                "--runs",
                "20",
                "--init",
                "uniform",
                "--seed",
                "3",
                "--csv",
                csv.to_str().unwrap(),
                "--out",
                json.to_str().unwrap(),
            ])
            .output()
            .expect("spawn bench");
        assert!(out.status.success(), "{tag}: {:?}", out);
        (std::fs::read(csv).unwrap(), std::fs::read(json).unwrap())
    };
    let (csv_a, json_a) = bench_out("a");
    let (csv_b, json_b) = bench_out("b");
    let bench_identical = csv_a == csv_b && json_a == json_b;

    let ok = run_identical && bench_identical;
    report(
        "8 (byte-identical reruns)",
        ok,
        &format!(
            "run JSON identical: {run_identical}; bench CSV+JSON identical: {bench_identical} ({} CSV bytes)",
            csv_a.len()
        ),
    );
    assert!(ok);
}
