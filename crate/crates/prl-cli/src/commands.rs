//! Subcommand implementations and their JSON shapes.

use crate::{BenchArgs, CompareArgs, RunArgs, VerifyArgs};
use crate::{EXIT_CAP, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION};
use prl::bench::{
    run_sweep, write_csv, BoundRule, CapRule, InitChoice, ProtocolKind, SweepOutcome, SweepSpec,
};
use prl::engine::{
    default_cap_fj, default_cap_prl, generate_initial, generate_initial_fj, run as engine_run,
    Counters, Fj, FjSafeStop, InitFamily, Prl, RandomSource, RingConfiguration, SrlStop,
};
use prl::fj::{fj_safe, FjAgentState};
use prl::predicates::{classify, ClassReport};
use prl::state::{AgentState, ProtocolParams};
use prl::step::prl_step_traced;
use prl::verifier::{
    certify_safety_srl, check_closure, check_transition_properties, class_predicate, CheckMode,
    ClosureReport, SafetyReport, TransitionReport,
};
use serde::Serialize;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_USAGE
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Serialize to pretty JSON with a trailing newline, byte-stable for equal
/// inputs, and write it to the path or stdout.
fn emit_json<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization");
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct RunReport {
    protocol: ProtocolKind,
    n: usize,
    #[serde(rename = "N")]
    n_upper: u32,
    init_family: InitFamily,
    seed: u64,
    cap: u64,
    steps: u64,
    reached_target: bool,
    leaders_final: usize,
    counters: Counters,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<ClassReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fj_safe: Option<bool>,
    #[serde(rename = "final", skip_serializing_if = "Option::is_none")]
    final_prl: Option<Vec<AgentState>>,
    #[serde(rename = "final", skip_serializing_if = "Option::is_none")]
    final_fj: Option<Vec<FjAgentState>>,
}

pub fn run(args: RunArgs) -> Result<i32, CliError> {
    let n_upper = args.n_upper.unwrap_or_else(|| args.n.try_into().unwrap_or(u32::MAX));
    let mut rng = RandomSource::new(args.seed);
    let report = match args.protocol {
        ProtocolKind::Prl => {
            let params = ProtocolParams::new(n_upper).map_err(|e| usage(e.to_string()))?;
            let cap = args.max_steps.unwrap_or_else(|| default_cap_prl(args.n, &params));
            let c0 = generate_initial(args.init, args.n, params, &mut rng)
                .map_err(|e| usage(e.to_string()))?;
            let res = engine_run(&Prl { params }, c0.into_agents(), &SrlStop { params }, cap, &mut rng);
            let ring = RingConfiguration::new(res.final_config.clone(), params).expect("final in domain");
            RunReport {
                protocol: args.protocol,
                n: args.n,
                n_upper,
                init_family: args.init,
                seed: args.seed,
                cap,
                steps: res.steps,
                reached_target: res.reached_target,
                leaders_final: res.final_config.iter().filter(|a| a.leader).count(),
                counters: res.counters,
                class: Some(classify(&ring)),
                fj_safe: None,
                final_prl: Some(res.final_config),
                final_fj: None,
            }
        }
        ProtocolKind::Fj => {
            let cap = args.max_steps.unwrap_or_else(|| default_cap_fj(args.n));
            let c0 = generate_initial_fj(args.init, args.n, &mut rng)
                .map_err(|e| usage(e.to_string()))?;
            let res = engine_run(&Fj, c0, &FjSafeStop, cap, &mut rng);
            RunReport {
                protocol: args.protocol,
                n: args.n,
                n_upper,
                init_family: args.init,
                seed: args.seed,
                cap,
                steps: res.steps,
                reached_target: res.reached_target,
                leaders_final: res.final_config.iter().filter(|a| a.leader).count(),
                counters: res.counters,
                class: None,
                fj_safe: Some(fj_safe(&res.final_config)),
                final_prl: None,
                final_fj: Some(res.final_config),
            }
        }
    };
    let reached = report.reached_target;
    emit_json(&report, args.out.as_ref())?;
    Ok(if reached { EXIT_OK } else { EXIT_CAP })
}

fn bound_rule(args: &BenchArgs) -> BoundRule {
    if let Some(m) = args.n_mult {
        BoundRule::Multiplier(m)
    } else if let Some(v) = args.n_upper {
        BoundRule::Fixed(v)
    } else {
        BoundRule::MatchN
    }
}

fn init_choice(raw: &str) -> Result<InitChoice, CliError> {
    if raw == "worst-case" {
        Ok(InitChoice::WorstCase)
    } else {
        Ok(InitChoice::Family(InitFamily::from_str(raw).map_err(|e| usage(e.to_string()))?))
    }
}

pub fn bench(args: BenchArgs) -> Result<i32, CliError> {
    let spec = SweepSpec {
        protocol: args.protocol,
        sizes: args.n.clone(),
        bound_rule: bound_rule(&args),
        runs: args.runs,
        init: init_choice(&args.init)?,
        master_seed: args.seed,
        cap: args.max_steps.map_or(CapRule::Default, CapRule::Fixed),
    };
    let outcome = run_sweep(&spec).map_err(|e| usage(e.to_string()))?;
    if let Some(path) = &args.csv {
        let mut buf = Vec::new();
        write_csv(&outcome.rows, &mut buf)?;
        fs::write(path, buf)?;
    }
    let poisoned = !outcome.poisoned.is_empty();
    emit_json(&outcome, args.out.as_ref())?;
    Ok(if poisoned { EXIT_CAP } else { EXIT_OK })
}

#[derive(Serialize)]
struct VerifyReport {
    n: usize,
    #[serde(rename = "N")]
    n_upper: u32,
    mode: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    closure: Vec<ClosureReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transitions: Option<TransitionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    safety: Option<SafetyReport>,
    ok: bool,
}

pub fn verify(args: VerifyArgs) -> Result<i32, CliError> {
    if args.n < 2 || args.n as u64 > u64::from(args.n_upper) {
        return Err(usage(format!(
            "ring size {} and bound {} violate 2 <= n <= N",
            args.n, args.n_upper
        )));
    }
    let params = ProtocolParams::new(args.n_upper).map_err(|e| usage(e.to_string()))?;
    for c in &args.checks {
        if !matches!(c.as_str(), "closure" | "transitions" | "safety") {
            return Err(usage(format!("unknown check '{c}' (closure, transitions, safety)")));
        }
    }
    let sampled = match args.mode.as_str() {
        "exhaustive" => false,
        "sampled" => true,
        other => return Err(usage(format!("unknown mode '{other}' (exhaustive, sampled)"))),
    };
    if sampled && args.checks.iter().any(|c| c != "transitions") {
        return Err(usage("sampled mode covers the transitions check only".to_string()));
    }

    let mut report = VerifyReport {
        n: args.n,
        n_upper: args.n_upper,
        mode: args.mode.clone(),
        closure: Vec::new(),
        transitions: None,
        safety: None,
        ok: true,
    };

    if args.checks.iter().any(|c| c == "closure") {
        for name in ["cpb", "cni", "srl"] {
            let pred = class_predicate(name).expect("known class");
            let rep = check_closure(name, pred, args.n, params, args.budget)
                .map_err(|e| usage(e.to_string()))?;
            eprintln!(
                "closure {name}: {} ({} members / {} configurations)",
                if rep.closed() { "ok" } else { "VIOLATED" },
                rep.member_count,
                rep.configurations_checked
            );
            report.ok &= rep.closed();
            report.closure.push(rep);
        }
    }
    if args.checks.iter().any(|c| c == "transitions") {
        let mode = if sampled {
            CheckMode::Sampled { configurations: args.samples, seed: args.seed }
        } else {
            CheckMode::Exhaustive
        };
        let rep = check_transition_properties(args.n, params, mode, prl_step_traced, args.budget)
            .map_err(|e| usage(e.to_string()))?;
        eprintln!(
            "transitions ({}): {} ({} transitions examined)",
            rep.mode,
            if rep.clean() { "ok" } else { "VIOLATED" },
            rep.transitions_examined
        );
        report.ok &= rep.clean();
        report.transitions = Some(rep);
    }
    if args.checks.iter().any(|c| c == "safety") {
        let rep = certify_safety_srl(args.n, params, args.budget).map_err(|e| usage(e.to_string()))?;
        eprintln!(
            "safety: {} ({} class members, {} transitions)",
            if rep.certified() { "ok" } else { "VIOLATED" },
            rep.srl_count,
            rep.transitions_checked
        );
        report.ok &= rep.certified();
        report.safety = Some(rep);
    }

    let ok = report.ok;
    emit_json(&report, args.out.as_ref())?;
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

#[derive(Serialize)]
struct ComparePoint {
    n: usize,
    prl_mean_steps: f64,
    fj_mean_steps: f64,
    fj_over_prl: f64,
}

#[derive(Serialize)]
struct CompareReport {
    master_seed: u64,
    runs_per_point: usize,
    prl: SweepOutcome,
    fj: SweepOutcome,
    comparison: Vec<ComparePoint>,
}

pub fn compare(args: CompareArgs) -> Result<i32, CliError> {
    let init = init_choice(&args.init)?;
    let cap = args.max_steps.map_or(CapRule::Default, CapRule::Fixed);
    let prl_outcome = run_sweep(&SweepSpec {
        protocol: ProtocolKind::Prl,
        sizes: args.n.clone(),
        bound_rule: BoundRule::MatchN,
        runs: args.runs,
        init,
        master_seed: args.seed,
        cap,
    })
    .map_err(|e| usage(e.to_string()))?;
    let fj_outcome = run_sweep(&SweepSpec {
        protocol: ProtocolKind::Fj,
        sizes: args.n.clone(),
        bound_rule: BoundRule::MatchN,
        runs: args.runs,
        init,
        master_seed: args.seed,
        cap,
    })
    .map_err(|e| usage(e.to_string()))?;

    let comparison: Vec<ComparePoint> = prl_outcome
        .points
        .iter()
        .zip(&fj_outcome.points)
        .map(|(p, f)| ComparePoint {
            n: p.n,
            prl_mean_steps: p.mean_steps,
            fj_mean_steps: f.mean_steps,
            fj_over_prl: f.mean_steps / p.mean_steps,
        })
        .collect();

    eprintln!("   n |    prl mean |     fj mean | fj/prl");
    for c in &comparison {
        eprintln!(
            "{:4} | {:11.1} | {:11.1} | {:6.2}",
            c.n, c.prl_mean_steps, c.fj_mean_steps, c.fj_over_prl
        );
    }
    for (label, o) in [("prl", &prl_outcome), ("fj", &fj_outcome)] {
        if let Some(fit) = &o.fit {
            eprintln!(
                "{label}: exponent {:.3} (r2 {:.4}), init {}",
                fit.exponent, fit.r_squared, o.init_family
            );
        }
    }

    if let Some(path) = &args.csv {
        let mut buf = Vec::new();
        write_csv(&prl_outcome.rows, &mut buf)?;
        // append fj rows under the same header
        let mut fj_buf = Vec::new();
        write_csv(&fj_outcome.rows, &mut fj_buf)?;
        let fj_body = fj_buf.splitn(2, |&b| b == b'\n').nth(1).unwrap_or(&[]).to_vec();
        buf.extend_from_slice(&fj_body);
        fs::write(path, buf)?;
    }

    let poisoned = !prl_outcome.poisoned.is_empty() || !fj_outcome.poisoned.is_empty();
    let report = CompareReport {
        master_seed: args.seed,
        runs_per_point: args.runs,
        prl: prl_outcome,
        fj: fj_outcome,
        comparison,
    };
    emit_json(&report, args.out.as_ref())?;
    Ok(if poisoned { EXIT_CAP } else { EXIT_OK })
}
