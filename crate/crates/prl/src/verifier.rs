//! Exhaustive small-ring model checking.
//!
//! For rings small enough to enumerate, this module checks the properties the
//! protocol's correctness rests on, reporting concrete counterexamples when a
//! check fails:
//!
//! * closure of a configuration class under every interaction;
//! * local transition properties: a modest bullet stays modest, a freshly
//!   fired live bullet is modest, and insecurity only spreads from an
//!   insecure left neighbor;
//! * output safety of the single-leader class, by breadth-first reachability
//!   over all interactions.
//!
//! The enumeration space is `(24(N+1))^n`; a budget guards against accidental
//! blowups, and beyond it the transition checks fall back to uniform sampling.

use crate::engine::{apply_interaction, RandomSource, RingConfiguration};
use crate::predicates::{classify, is_modest, is_secure, ClassFlags};
use crate::state::{state_from_index, state_index, AgentState, Bullet, ProtocolParams};
use crate::step::{prl_step_traced, BulletKind, TracedStepFn, Transfer};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ceiling on the number of configurations an exhaustive pass may
/// enumerate (covers n <= 3 with N <= 4, and n = 2 up to N around 20).
pub const DEFAULT_CONFIG_BUDGET: u64 = 10_000_000;

/// At most this many counterexamples are kept per report.
pub const MAX_REPORTED_VIOLATIONS: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifierError {
    #[error("configuration space of size {size} exceeds the budget of {budget}")]
    BudgetExceeded { size: u64, budget: u64 },
    #[error("ring size {n} and bound {n_max} violate 2 <= n <= N")]
    BadDimensions { n: usize, n_max: u32 },
}

fn check_dimensions(n: usize, params: &ProtocolParams) -> Result<(), VerifierError> {
    if n < 2 || n as u64 > u64::from(params.n_max()) {
        return Err(VerifierError::BadDimensions { n, n_max: params.n_max() });
    }
    Ok(())
}

/// Number of configurations of a ring of `n` agents, if it fits in a u64.
pub fn space_size(n: usize, params: &ProtocolParams) -> Option<u64> {
    params.state_count().checked_pow(n as u32)
}

fn require_within_budget(n: usize, params: &ProtocolParams, budget: u64) -> Result<u64, VerifierError> {
    check_dimensions(n, params)?;
    match space_size(n, params) {
        Some(size) if size <= budget => Ok(size),
        Some(size) => Err(VerifierError::BudgetExceeded { size, budget }),
        None => Err(VerifierError::BudgetExceeded { size: u64::MAX, budget }),
    }
}

/// Stream every configuration of `n` agents exactly once, in lexicographic
/// order of per-agent state indices (agent 0 most significant).
pub fn enumerate_configurations(
    n: usize,
    params: ProtocolParams,
    budget: u64,
) -> Result<impl Iterator<Item = Vec<AgentState>>, VerifierError> {
    require_within_budget(n, &params, budget)?;
    let q = params.state_count();
    let mut digits = vec![0u64; n];
    let mut done = false;
    Ok(std::iter::from_fn(move || {
        if done {
            return None;
        }
        let config: Vec<AgentState> = digits.iter().map(|&d| state_from_index(d, &params)).collect();
        // odometer increment, least significant digit last
        let mut k = n;
        loop {
            if k == 0 {
                done = true;
                break;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < q {
                break;
            }
            digits[k] = 0;
        }
        Some(config)
    }))
}

/// Enumerate the sub-space where agent 0 has state index `first`, for
/// partitioning exhaustive passes across workers.
fn enumerate_partition(
    first: u64,
    n: usize,
    params: ProtocolParams,
) -> impl Iterator<Item = Vec<AgentState>> {
    let q = params.state_count();
    let rest = n - 1;
    let mut digits = vec![0u64; rest];
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let mut config = Vec::with_capacity(n);
        config.push(state_from_index(first, &params));
        config.extend(digits.iter().map(|&d| state_from_index(d, &params)));
        let mut k = rest;
        loop {
            if k == 0 {
                done = true;
                break;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < q {
                break;
            }
            digits[k] = 0;
        }
        Some(config)
    })
}

/// One closure counterexample: a member configuration with a successor
/// outside the class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosureViolation {
    pub configuration: Vec<AgentState>,
    pub interaction: usize,
    pub successor: Vec<AgentState>,
}

/// Result of an exhaustive closure check of one predicate at one `(n, N)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosureReport {
    pub n: usize,
    pub n_max: u32,
    pub predicate: String,
    pub configurations_checked: u64,
    pub member_count: u64,
    pub violation_count: u64,
    /// First counterexamples, capped at [`MAX_REPORTED_VIOLATIONS`].
    pub violations: Vec<ClosureViolation>,
}

impl ClosureReport {
    pub fn closed(&self) -> bool {
        self.violation_count == 0
    }
}

/// Check that `pred` is closed: every successor of every member is a member.
///
/// Violations are data, not errors; the only failure mode is a space too big
/// for the budget.
pub fn check_closure(
    predicate_name: &str,
    pred: impl Fn(&[AgentState], &ProtocolParams) -> bool + Sync,
    n: usize,
    params: ProtocolParams,
    budget: u64,
) -> Result<ClosureReport, VerifierError> {
    require_within_budget(n, &params, budget)?;
    let q = params.state_count();
    let step = |l: AgentState, r: AgentState| {
        let (l, r, _) = prl_step_traced(l, r, &params);
        (l, r)
    };

    // per-partition results are collected in partition order so reports come
    // out identical no matter how work is scheduled
    let partials: Vec<(u64, u64, u64, Vec<ClosureViolation>)> = (0..q)
        .into_par_iter()
        .map(|first| {
            let mut checked = 0u64;
            let mut members = 0u64;
            let mut viol_count = 0u64;
            let mut violations = Vec::new();
            for config in enumerate_partition(first, n, params) {
                checked += 1;
                if !pred(&config, &params) {
                    continue;
                }
                members += 1;
                for i in 0..n {
                    let successor = apply_interaction(&config, i, step);
                    if !pred(&successor, &params) {
                        viol_count += 1;
                        if violations.len() < MAX_REPORTED_VIOLATIONS {
                            violations.push(ClosureViolation {
                                configuration: config.clone(),
                                interaction: i,
                                successor,
                            });
                        }
                    }
                }
            }
            (checked, members, viol_count, violations)
        })
        .collect();
    let (checked, members, viol_count, violations) = partials.into_iter().fold(
        (0, 0, 0, Vec::new()),
        |mut a, b| {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
            a.3.extend(b.3);
            a.3.truncate(MAX_REPORTED_VIOLATIONS);
            a
        },
    );

    Ok(ClosureReport {
        n,
        n_max: params.n_max(),
        predicate: predicate_name.to_string(),
        configurations_checked: checked,
        member_count: members,
        violation_count: viol_count,
        violations,
    })
}

/// The local transition properties the checker knows about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionProperty {
    /// A surviving modest bullet is still modest after the interaction.
    ModestPersistence,
    /// A live bullet fired during the interaction is modest afterwards.
    FiredBulletModest,
    /// With all live bullets modest, a secure agent only turns insecure as the
    /// responder of an insecure initiator.
    InsecuritySpread,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransitionViolation {
    pub property: TransitionProperty,
    pub configuration: Vec<AgentState>,
    pub interaction: usize,
    pub successor: Vec<AgentState>,
    pub detail: String,
}

/// How to pick the configurations whose transitions are examined.
#[derive(Clone, Copy, Debug)]
pub enum CheckMode {
    /// Every configuration (subject to the budget).
    Exhaustive,
    /// `configurations` uniform samples from the given seed.
    Sampled { configurations: u64, seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransitionReport {
    pub n: usize,
    pub n_max: u32,
    pub mode: String,
    pub configurations_examined: u64,
    pub transitions_examined: u64,
    pub violation_count: u64,
    pub violations: Vec<TransitionViolation>,
}

impl TransitionReport {
    pub fn clean(&self) -> bool {
        self.violation_count == 0
    }
}

/// Track where the live bullets of `config` end up across the interaction at
/// arc `i`, then check the three local properties. Any violation is appended.
fn check_one_transition(
    config: &[AgentState],
    i: usize,
    params: &ProtocolParams,
    step: TracedStepFn,
    violations: &mut Vec<TransitionViolation>,
    viol_count: &mut u64,
) {
    let n = config.len();
    let j = (i + 1) % n;
    let (l2, r2, ev) = step(config[i], config[j], params);
    let mut successor = config.to_vec();
    successor[i] = l2;
    successor[j] = r2;

    let pre =
        RingConfiguration::new(config.to_vec(), *params).expect("enumerated configuration in domain");
    let post =
        RingConfiguration::new(successor.clone(), *params).expect("stepped configuration in domain");

    let mut report = |property, detail: String| {
        *viol_count += 1;
        if violations.len() < MAX_REPORTED_VIOLATIONS {
            violations.push(TransitionViolation {
                property,
                configuration: config.to_vec(),
                interaction: i,
                successor: successor.clone(),
                detail,
            });
        }
    };

    // fate of each pre-existing live bullet: None = disappeared
    let survivor_of = |p: usize| -> Option<usize> {
        if p == i {
            if ev.fired_at_initiator.is_some() {
                return None; // replaced by the fresh bullet
            }
            match ev.transfer {
                Transfer::Moved => Some(j),
                Transfer::Died => None,
                Transfer::None => Some(p),
            }
        } else if p == j {
            if ev.fired_at_responder.is_some() {
                None
            } else {
                Some(p)
            }
        } else {
            Some(p)
        }
    };

    for (p, a) in config.iter().enumerate() {
        if a.bull != Bullet::Live || !is_modest(&pre, p) {
            continue;
        }
        if let Some(p2) = survivor_of(p) {
            debug_assert_eq!(successor[p2].bull, Bullet::Live);
            if !is_modest(&post, p2) {
                report(
                    TransitionProperty::ModestPersistence,
                    format!("modest bullet at {p} survived at {p2} but is no longer modest"),
                );
            }
        }
    }

    // freshly fired live bullets that survive the interaction
    let mut fired_positions = Vec::new();
    if ev.fired_at_responder == Some(BulletKind::Live) {
        fired_positions.push(j);
    }
    if ev.fired_at_initiator == Some(BulletKind::Live) && ev.transfer == Transfer::Moved {
        fired_positions.push(j);
    }
    for p in fired_positions {
        if successor[p].bull == Bullet::Live && !is_modest(&post, p) {
            report(
                TransitionProperty::FiredBulletModest,
                format!("live bullet fired at {p} is not modest"),
            );
        }
    }

    // insecurity propagation, under the all-bullets-modest premise
    let premise = config.iter().any(|a| a.leader)
        && (0..n).all(|p| config[p].bull != Bullet::Live || is_modest(&pre, p));
    if premise {
        if !successor.iter().any(|a| a.leader) {
            report(
                TransitionProperty::InsecuritySpread,
                "all leaders vanished although every live bullet was modest".to_string(),
            );
            return;
        }
        for p in 0..n {
            if is_secure(&pre, p) && !is_secure(&post, p) {
                let from_insecure_left = p == j && !is_secure(&pre, i);
                if !from_insecure_left {
                    report(
                        TransitionProperty::InsecuritySpread,
                        format!("agent {p} turned insecure without an insecure initiator"),
                    );
                }
            }
        }
    }
}

fn merge_transition_partials(
    partials: Vec<(u64, u64, Vec<TransitionViolation>)>,
) -> (u64, u64, Vec<TransitionViolation>) {
    partials.into_iter().fold((0, 0, Vec::new()), |mut a, b| {
        a.0 += b.0;
        a.1 += b.1;
        a.2.extend(b.2);
        a.2.truncate(MAX_REPORTED_VIOLATIONS);
        a
    })
}

/// Check the local transition properties over every interaction of the chosen
/// configurations; `step` is injected so deliberately broken variants can
/// prove the checker's sensitivity.
pub fn check_transition_properties(
    n: usize,
    params: ProtocolParams,
    mode: CheckMode,
    step: TracedStepFn,
    budget: u64,
) -> Result<TransitionReport, VerifierError> {
    check_dimensions(n, &params)?;
    let (configs, transitions, viol_count, violations, mode_name) = match mode {
        CheckMode::Exhaustive => {
            require_within_budget(n, &params, budget)?;
            let q = params.state_count();
            let partials: Vec<(u64, u64, Vec<TransitionViolation>)> = (0..q)
                .into_par_iter()
                .map(|first| {
                    let mut count = 0u64;
                    let mut violations = Vec::new();
                    let mut viols = 0u64;
                    for config in enumerate_partition(first, n, params) {
                        count += 1;
                        for i in 0..n {
                            check_one_transition(&config, i, &params, step, &mut violations, &mut viols);
                        }
                    }
                    (count, viols, violations)
                })
                .collect();
            let merged = merge_transition_partials(partials);
            (merged.0, merged.0 * n as u64, merged.1, merged.2, "exhaustive".to_string())
        }
        CheckMode::Sampled { configurations, seed } => {
            let q = params.state_count();
            // fixed chunk count so the report is identical whatever the pool size
            let chunks = 64u64;
            let chunk = configurations.div_ceil(chunks).max(1);
            let partials: Vec<(u64, u64, Vec<TransitionViolation>)> = (0..chunks)
                .into_par_iter()
                .map(|w| {
                    let lo = w * chunk;
                    let hi = configurations.min(lo.saturating_add(chunk));
                    let mut violations = Vec::new();
                    let mut viols = 0u64;
                    let mut count = 0u64;
                    for idx in lo..hi {
                        let mut rng = RandomSource::new(crate::engine::derive_run_seed(seed, 0, idx));
                        let config: Vec<AgentState> = (0..n)
                            .map(|_| state_from_index(rng.index(q as usize) as u64, &params))
                            .collect();
                        count += 1;
                        for i in 0..n {
                            check_one_transition(&config, i, &params, step, &mut violations, &mut viols);
                        }
                    }
                    (count, viols, violations)
                })
                .collect();
            let merged = merge_transition_partials(partials);
            (merged.0, merged.0 * n as u64, merged.1, merged.2, "sampled".to_string())
        }
    };
    Ok(TransitionReport {
        n,
        n_max: params.n_max(),
        mode: mode_name,
        configurations_examined: configs,
        transitions_examined: transitions,
        violation_count: viol_count,
        violations,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SafetyViolation {
    pub configuration: Vec<AgentState>,
    pub interaction: usize,
    pub successor: Vec<AgentState>,
    pub detail: String,
}

/// Result of certifying the single-leader class as output-safe.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SafetyReport {
    pub n: usize,
    pub n_max: u32,
    pub configurations_checked: u64,
    pub srl_count: u64,
    pub transitions_checked: u64,
    pub violation_count: u64,
    pub violations: Vec<SafetyViolation>,
}

impl SafetyReport {
    pub fn certified(&self) -> bool {
        self.violation_count == 0
    }
}

fn pack(config: &[AgentState], params: &ProtocolParams) -> u64 {
    let q = params.state_count();
    config.iter().fold(0u64, |acc, s| acc * q + state_index(s, params))
}

/// Certify that every member of the single-leader class has exactly one
/// leader output and that breadth-first reachability from the class never
/// leaves it or flips any output.
pub fn certify_safety_srl(
    n: usize,
    params: ProtocolParams,
    budget: u64,
) -> Result<SafetyReport, VerifierError> {
    let size = require_within_budget(n, &params, budget)?;
    let flags_of = |agents: &[AgentState]| -> ClassFlags {
        classify(&RingConfiguration::new(agents.to_vec(), params).expect("in-domain")).flags()
    };

    // gather the class
    let members: Vec<Vec<AgentState>> = enumerate_configurations(n, params, budget)?
        .filter(|c| flags_of(c).in_srl)
        .collect();
    let mut visited: std::collections::HashSet<u64> =
        members.iter().map(|c| pack(c, &params)).collect();

    let step = |l: AgentState, r: AgentState| {
        let (l, r, _) = prl_step_traced(l, r, &params);
        (l, r)
    };

    let mut violations = Vec::new();
    let mut violation_count = 0u64;
    let mut transitions = 0u64;
    let mut queue: std::collections::VecDeque<Vec<AgentState>> = members.iter().cloned().collect();
    let srl_count = members.len() as u64;

    let report = |config: &[AgentState], i: usize, successor: &[AgentState], detail: String, count: &mut u64, out: &mut Vec<SafetyViolation>| {
        *count += 1;
        if out.len() < MAX_REPORTED_VIOLATIONS {
            out.push(SafetyViolation {
                configuration: config.to_vec(),
                interaction: i,
                successor: successor.to_vec(),
                detail,
            });
        }
    };

    while let Some(config) = queue.pop_front() {
        let outputs: Vec<bool> = config.iter().map(|a| a.leader).collect();
        if outputs.iter().filter(|&&l| l).count() != 1 {
            report(&config, 0, &config, "member without exactly one leader output".into(), &mut violation_count, &mut violations);
            continue;
        }
        for i in 0..n {
            transitions += 1;
            let successor = apply_interaction(&config, i, step);
            let succ_outputs: Vec<bool> = successor.iter().map(|a| a.leader).collect();
            if succ_outputs != outputs {
                report(&config, i, &successor, "an output changed".into(), &mut violation_count, &mut violations);
            }
            if !flags_of(&successor).in_srl {
                report(&config, i, &successor, "successor left the class".into(), &mut violation_count, &mut violations);
            }
            // explore anything new the search uncovers (closure violations
            // would surface here as unvisited successors)
            if visited.insert(pack(&successor, &params)) {
                queue.push_back(successor);
            }
        }
    }

    Ok(SafetyReport {
        n,
        n_max: params.n_max(),
        configurations_checked: size,
        srl_count,
        transitions_checked: transitions,
        violation_count,
        violations,
    })
}

/// Convenience wrappers naming the three class predicates for closure checks.
pub fn class_predicate(name: &str) -> Option<fn(&[AgentState], &ProtocolParams) -> bool> {
    fn cpb(agents: &[AgentState], params: &ProtocolParams) -> bool {
        classify(&RingConfiguration::new(agents.to_vec(), *params).expect("in-domain")).in_cpb
    }
    fn cni(agents: &[AgentState], params: &ProtocolParams) -> bool {
        classify(&RingConfiguration::new(agents.to_vec(), *params).expect("in-domain")).in_cni
    }
    fn srl(agents: &[AgentState], params: &ProtocolParams) -> bool {
        crate::predicates::is_srl(agents, params.n_max())
    }
    match name {
        "cpb" => Some(cpb),
        "cni" => Some(cni),
        "srl" => Some(srl),
        _ => None,
    }
}
