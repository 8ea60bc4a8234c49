//! Convergence-time benchmarking: seeded sweeps over ring sizes, per-point
//! statistics, and log-log power-law fitting.
//!
//! Every run's seed is derived from `(master seed, point index, run index)`,
//! so sweeps are reproducible row for row no matter how many workers execute
//! them.

use crate::engine::{
    default_cap_fj, default_cap_prl, derive_run_seed, generate_initial, generate_initial_fj, run,
    Fj, FjSafeStop, InitError, InitFamily, Prl, RandomSource, SrlStop,
};
use crate::fj::fj_safe;
use crate::predicates::is_srl;
use crate::state::{DomainError, ProtocolParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Prl,
    Fj,
}

impl ProtocolKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolKind::Prl => "prl",
            ProtocolKind::Fj => "fj",
        }
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "prl" => Ok(ProtocolKind::Prl),
            "fj" => Ok(ProtocolKind::Fj),
            other => Err(format!("unknown protocol '{other}' (expected 'prl' or 'fj')")),
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the population bound is chosen at each sweep point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundRule {
    /// Same bound everywhere.
    Fixed(u32),
    /// Bound equals the ring size.
    MatchN,
    /// Bound is a multiple of the ring size.
    Multiplier(u32),
}

impl BoundRule {
    pub fn bound_for(&self, n: usize) -> u64 {
        match self {
            BoundRule::Fixed(v) => u64::from(*v),
            BoundRule::MatchN => n as u64,
            BoundRule::Multiplier(m) => n as u64 * u64::from(*m),
        }
    }
}

/// Initial-configuration choice for a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitChoice {
    Family(InitFamily),
    /// Probe the adversarial families at the smallest point and keep the one
    /// with the largest mean convergence time for the whole sweep.
    WorstCase,
}

/// Step-cap choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CapRule {
    /// 200·n·N for the main protocol, 200·n³ for the baseline.
    #[default]
    Default,
    Fixed(u64),
}

/// A convergence-time sweep: which protocol, which ring sizes, how the bound
/// scales, how many seeded runs per point, and from which initial family.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub protocol: ProtocolKind,
    pub sizes: Vec<usize>,
    pub bound_rule: BoundRule,
    pub runs: usize,
    pub init: InitChoice,
    pub master_seed: u64,
    pub cap: CapRule,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// One completed (or capped) run, one CSV row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRow {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub n_upper: u32,
    pub seed: u64,
    pub init_family: InitFamily,
    pub steps_to_srl: u64,
    pub leaders_final: usize,
    pub live_fired: u64,
    pub dummy_fired: u64,
    pub kills: u64,
    pub creations: u64,
    pub max_bullet_moves: u32,
    pub reached_target: bool,
}

/// Per-point aggregate statistics over the completed runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSummary {
    pub n: usize,
    pub n_upper: u32,
    pub runs: usize,
    pub completed: usize,
    pub cap: u64,
    pub mean_steps: f64,
    pub std_error: f64,
    pub median_steps: f64,
}

/// Least-squares power-law fit over log-log points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: f64,
    pub points: Vec<SweepPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub size: f64,
    pub mean: f64,
    pub std_error: f64,
}

impl From<(f64, f64)> for SweepPoint {
    fn from((size, mean): (f64, f64)) -> Self {
        Self { size, mean, std_error: 0.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least two points, got {0}")]
    NotEnoughPoints(usize),
    #[error("power-law fit needs strictly positive coordinates")]
    NonPositive,
    #[error("all sizes are equal; the exponent is undetermined")]
    DegenerateSizes,
}

/// Fit `y = coefficient * x^exponent` by least squares on `(ln x, ln y)`.
///
/// A constant `y` fits exactly with exponent 0, reported with `r_squared = 1`
/// (there is no residual variance to explain).
pub fn fit_power_law(points: &[SweepPoint]) -> Result<FitResult, FitError> {
    if points.len() < 2 {
        return Err(FitError::NotEnoughPoints(points.len()));
    }
    if points.iter().any(|p| p.size <= 0.0 || p.mean <= 0.0) {
        return Err(FitError::NonPositive);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|p| (p.size.ln(), p.mean.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|(x, _)| x).sum::<f64>() / k;
    let my = logs.iter().map(|(_, y)| y).sum::<f64>() / k;
    let sxx = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum::<f64>();
    if sxx == 0.0 {
        return Err(FitError::DegenerateSizes);
    }
    let sxy = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot = logs.iter().map(|(_, y)| (y - my) * (y - my)).sum::<f64>();
    let ss_res = logs
        .iter()
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum::<f64>();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(FitResult {
        exponent: slope,
        coefficient: intercept.exp(),
        r_squared,
        points: points.to_vec(),
    })
}

/// Everything a sweep produced: the raw rows, per-point summaries, the fit
/// (when at least two points completed cleanly), and which family was used.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub protocol: ProtocolKind,
    pub init_family: InitFamily,
    pub master_seed: u64,
    pub points: Vec<PointSummary>,
    pub fit: Option<FitResult>,
    /// Seeds of runs that hit the step cap, by point; any entry here excludes
    /// its point from the fit.
    pub poisoned: Vec<PoisonedRun>,
    #[serde(skip)]
    pub rows: Vec<RunRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoisonedRun {
    pub n: usize,
    pub run_index: usize,
    pub seed: u64,
    pub cap: u64,
}

fn cap_for(cap: CapRule, protocol: ProtocolKind, n: usize, params: Option<&ProtocolParams>) -> u64 {
    match cap {
        CapRule::Fixed(v) => v,
        CapRule::Default => match protocol {
            ProtocolKind::Prl => default_cap_prl(n, params.expect("prl cap needs params")),
            ProtocolKind::Fj => default_cap_fj(n),
        },
    }
}

/// Execute one seeded run and reduce it to a row. The final configuration is
/// re-checked against the stop class; a completed run that fails that check
/// is a bug worth a crash.
pub fn run_once(
    protocol: ProtocolKind,
    n: usize,
    n_upper: u32,
    family: InitFamily,
    seed: u64,
    cap: u64,
) -> Result<RunRow, BenchError> {
    let mut rng = RandomSource::new(seed);
    match protocol {
        ProtocolKind::Prl => {
            let params = ProtocolParams::new(n_upper)?;
            let c0 = generate_initial(family, n, params, &mut rng)?;
            let res = run(&Prl { params }, c0.into_agents(), &SrlStop { params }, cap, &mut rng);
            if res.reached_target {
                assert!(is_srl(&res.final_config, n_upper), "stop class violated at termination");
            }
            Ok(RunRow {
                protocol,
                n,
                n_upper,
                seed,
                init_family: family,
                steps_to_srl: res.steps,
                leaders_final: res.final_config.iter().filter(|a| a.leader).count(),
                live_fired: res.counters.live_fired,
                dummy_fired: res.counters.dummy_fired,
                kills: res.counters.kills,
                creations: res.counters.creations,
                max_bullet_moves: res.counters.bullet_moves_max,
                reached_target: res.reached_target,
            })
        }
        ProtocolKind::Fj => {
            let c0 = generate_initial_fj(family, n, &mut rng)?;
            let res = run(&Fj, c0, &FjSafeStop, cap, &mut rng);
            if res.reached_target {
                assert!(fj_safe(&res.final_config), "stop class violated at termination");
            }
            Ok(RunRow {
                protocol,
                n,
                n_upper,
                seed,
                init_family: family,
                steps_to_srl: res.steps,
                leaders_final: res.final_config.iter().filter(|a| a.leader).count(),
                live_fired: res.counters.live_fired,
                dummy_fired: res.counters.dummy_fired,
                kills: res.counters.kills,
                creations: res.counters.creations,
                max_bullet_moves: res.counters.bullet_moves_max,
                reached_target: res.reached_target,
            })
        }
    }
}

fn validate(spec: &SweepSpec) -> Result<Vec<(usize, u32)>, BenchError> {
    if spec.runs == 0 {
        return Err(BenchError::InvalidSpec("runs must be at least 1".into()));
    }
    if spec.sizes.is_empty() {
        return Err(BenchError::InvalidSpec("no ring sizes given".into()));
    }
    let mut points = Vec::new();
    for &n in &spec.sizes {
        if n < 2 {
            return Err(BenchError::InvalidSpec(format!("ring size {n} below 2")));
        }
        let bound = spec.bound_rule.bound_for(n);
        if bound < n as u64 {
            return Err(BenchError::InvalidSpec(format!(
                "population bound {bound} below ring size {n}"
            )));
        }
        let bound = u32::try_from(bound)
            .map_err(|_| BenchError::InvalidSpec(format!("population bound {bound} too large")))?;
        points.push((n, bound));
    }
    Ok(points)
}

const PROBE_SALT: u64 = 0x70726f6265; // "probe"

fn worst_case_family(spec: &SweepSpec, points: &[(usize, u32)]) -> Result<InitFamily, BenchError> {
    let &(n, bound) = points
        .iter()
        .min_by_key(|(n, _)| *n)
        .expect("validated sweep has points");
    let mut candidates = vec![InitFamily::Uniform, InitFamily::NoLeaderZeroDist, InitFamily::AllLeaders];
    if spec.protocol == ProtocolKind::Prl && n as u64 == u64::from(bound) && n % 2 == 0 {
        candidates.insert(2, InitFamily::Paper41);
    }
    let params = ProtocolParams::new(bound)?;
    let cap = cap_for(spec.cap, spec.protocol, n, Some(&params));
    let mut best = (candidates[0], -1.0f64);
    for (fi, &family) in candidates.iter().enumerate() {
        let total: u64 = (0..spec.runs)
            .into_par_iter()
            .map(|run_idx| {
                let seed = derive_run_seed(
                    spec.master_seed ^ PROBE_SALT ^ (fi as u64) << 8,
                    0,
                    run_idx as u64,
                );
                run_once(spec.protocol, n, bound, family, seed, cap)
                    .map(|row| row.steps_to_srl)
                    .unwrap_or(cap)
            })
            .sum();
        let mean = total as f64 / spec.runs as f64;
        if mean > best.1 {
            best = (family, mean);
        }
    }
    Ok(best.0)
}

/// Run the whole sweep: every point, `runs` seeded executions each, rows in
/// `(point, run)` order regardless of parallel scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome, BenchError> {
    let points = validate(spec)?;
    let family = match spec.init {
        InitChoice::Family(f) => f,
        InitChoice::WorstCase => worst_case_family(spec, &points)?,
    };

    let mut rows = Vec::with_capacity(points.len() * spec.runs);
    let mut summaries = Vec::new();
    let mut poisoned = Vec::new();
    let mut fit_points = Vec::new();

    for (point_idx, &(n, bound)) in points.iter().enumerate() {
        let params = ProtocolParams::new(bound)?;
        let cap = cap_for(spec.cap, spec.protocol, n, Some(&params));
        let point_rows: Vec<RunRow> = (0..spec.runs)
            .into_par_iter()
            .map(|run_idx| {
                let seed = derive_run_seed(spec.master_seed, point_idx as u64, run_idx as u64);
                run_once(spec.protocol, n, bound, family, seed, cap)
            })
            .collect::<Result<_, _>>()?;

        let mut steps: Vec<u64> = Vec::with_capacity(spec.runs);
        for (run_idx, row) in point_rows.iter().enumerate() {
            if row.reached_target {
                steps.push(row.steps_to_srl);
            } else {
                poisoned.push(PoisonedRun { n, run_index: run_idx, seed: row.seed, cap });
            }
        }
        let completed = steps.len();
        let mean = if completed == 0 {
            f64::NAN
        } else {
            steps.iter().sum::<u64>() as f64 / completed as f64
        };
        let std_error = if completed > 1 {
            let var = steps
                .iter()
                .map(|&s| {
                    let d = s as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / (completed as f64 - 1.0);
            (var / completed as f64).sqrt()
        } else {
            0.0
        };
        let median = {
            steps.sort_unstable();
            match completed {
                0 => f64::NAN,
                k if k % 2 == 1 => steps[k / 2] as f64,
                k => (steps[k / 2 - 1] + steps[k / 2]) as f64 / 2.0,
            }
        };
        if completed == spec.runs && mean > 0.0 {
            fit_points.push(SweepPoint { size: n as f64, mean, std_error });
        }
        summaries.push(PointSummary {
            n,
            n_upper: bound,
            runs: spec.runs,
            completed,
            cap,
            mean_steps: mean,
            std_error,
            median_steps: median,
        });
        rows.extend(point_rows);
    }

    let fit = fit_power_law(&fit_points).ok();
    Ok(SweepOutcome {
        protocol: spec.protocol,
        init_family: family,
        master_seed: spec.master_seed,
        points: summaries,
        fit,
        poisoned,
        rows,
    })
}

/// CSV header shared by `bench` and `compare` outputs.
pub const CSV_HEADER: &str =
    "protocol,n,N,seed,init_family,steps_to_srl,leaders_final,live_fired,dummy_fired,kills,creations,max_bullet_moves";

/// Write completed rows in CSV form; capped runs carry no verified convergence
/// step and are reported through `SweepOutcome::poisoned` instead.
pub fn write_csv(rows: &[RunRow], out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows.iter().filter(|r| r.reached_target) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.protocol,
            r.n,
            r.n_upper,
            r.seed,
            r.init_family,
            r.steps_to_srl,
            r.leaders_final,
            r.live_fired,
            r.dummy_fired,
            r.kills,
            r.creations,
            r.max_bullet_moves
        )?;
    }
    Ok(())
}
