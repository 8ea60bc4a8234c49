//! Directed-ring execution: the uniformly random scheduler, the run loop with
//! event counters and per-bullet lifetime tracking, and the generators for the
//! initial-configuration families.

use crate::fj::{fj_step_traced, FjAgentState, OracleReading};
use crate::predicates::is_srl;
use crate::state::{AgentState, Bullet, DomainError, ProtocolParams};
use crate::step::{prl_step_traced, BulletKind, StepEvents, Transfer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Deterministic, seed-reproducible randomness source.
///
/// The same seed always yields the same draw sequence, independent of
/// platform; range draws are unbiased.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// The seed this source was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw from `0..bound`.
    pub fn index(&mut self, bound: usize) -> usize {
        self.rng.random_range(0..bound)
    }

    /// Uniform draw from `0..=bound`.
    pub fn value_to(&mut self, bound: u32) -> u32 {
        self.rng.random_range(0..=bound)
    }

    pub fn flip(&mut self) -> bool {
        self.rng.random()
    }
}

const MIX_A: u64 = 0x9e37_79b9_7f4a_7c15;
const MIX_B: u64 = 0xbf58_476d_1ce4_e5b9;

/// 64-bit finalizer used to spread seed material.
fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(MIX_B);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-run seed for run `run_index` of sweep point `point_index` under a
/// master seed: two finalizer rounds folding in each index with a distinct
/// odd stride, so every (master, point, run) triple gets its own stream.
pub fn derive_run_seed(master_seed: u64, point_index: u64, run_index: u64) -> u64 {
    let a = mix64(master_seed ^ point_index.wrapping_add(1).wrapping_mul(MIX_A));
    mix64(a ^ run_index.wrapping_add(1).wrapping_mul(MIX_B))
}

/// One scheduler step: the index of the arc whose interaction fires, each of
/// the `n` arcs with probability `1/n`.
pub fn draw_interaction(rng: &mut RandomSource, n: usize) -> usize {
    assert!(n >= 2, "ring needs at least two agents");
    rng.index(n)
}

/// A ring of agents running the main protocol, together with its parameter.
///
/// Arc `i` joins initiator `u_i` and responder `u_{(i+1) mod n}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingConfiguration {
    agents: Vec<AgentState>,
    params: ProtocolParams,
}

impl RingConfiguration {
    pub fn new(agents: Vec<AgentState>, params: ProtocolParams) -> Result<Self, DomainError> {
        let n = agents.len();
        if n < 2 || n as u64 > u64::from(params.n_max()) {
            return Err(DomainError::RingSize { n, n_max: params.n_max() });
        }
        for a in &agents {
            a.check_domain(&params)?;
        }
        Ok(Self { agents, params })
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn into_agents(self) -> Vec<AgentState> {
        self.agents
    }
}

/// Apply the interaction at arc `i`, leaving all other agents untouched.
pub fn apply_interaction<S: Copy>(
    agents: &[S],
    i: usize,
    step: impl FnOnce(S, S) -> (S, S),
) -> Vec<S> {
    let n = agents.len();
    assert!(i < n, "arc index {i} out of range for ring of {n}");
    let j = (i + 1) % n;
    let mut next = agents.to_vec();
    let (l, r) = step(agents[i], agents[j]);
    next[i] = l;
    next[j] = r;
    next
}

/// A protocol the engine can drive: a pairwise step over copyable states plus
/// a leader test. The step receives the pre-step leader count so that
/// oracle-based protocols can read it.
pub trait Protocol {
    type State: Copy + Eq;

    fn step(&self, l: Self::State, r: Self::State, leaders: usize) -> (Self::State, Self::State, StepEvents);
    fn is_leader(s: &Self::State) -> bool;
    fn has_bullet(s: &Self::State) -> bool;
}

/// The main protocol, parameterized by the population bound.
#[derive(Clone, Copy, Debug)]
pub struct Prl {
    pub params: ProtocolParams,
}

impl Protocol for Prl {
    type State = AgentState;

    fn step(&self, l: AgentState, r: AgentState, _leaders: usize) -> (AgentState, AgentState, StepEvents) {
        prl_step_traced(l, r, &self.params)
    }

    fn is_leader(s: &AgentState) -> bool {
        s.leader
    }

    fn has_bullet(s: &AgentState) -> bool {
        s.bull != Bullet::None
    }
}

/// The oracle-driven baseline.
#[derive(Clone, Copy, Debug, Default)]
pub struct Fj;

impl Protocol for Fj {
    type State = FjAgentState;

    fn step(&self, l: FjAgentState, r: FjAgentState, leaders: usize) -> (FjAgentState, FjAgentState, StepEvents) {
        fj_step_traced(l, r, OracleReading { leader_absent: leaders == 0 })
    }

    fn is_leader(s: &FjAgentState) -> bool {
        s.leader
    }

    fn has_bullet(s: &FjAgentState) -> bool {
        s.bullet
    }
}

/// When a run stops.
///
/// Predicates that only make sense with a single leader set
/// `gate_on_single_leader`, and the engine skips evaluating them while the
/// (incrementally tracked) leader count differs from one.
pub trait StopCondition<S> {
    fn gate_on_single_leader(&self) -> bool {
        false
    }
    fn is_satisfied(&self, agents: &[S]) -> bool;
}

impl<S, F: Fn(&[S]) -> bool> StopCondition<S> for F {
    fn is_satisfied(&self, agents: &[S]) -> bool {
        self(agents)
    }
}

/// Stop once the configuration enters the single-leader class.
#[derive(Clone, Copy, Debug)]
pub struct SrlStop {
    pub params: ProtocolParams,
}

impl StopCondition<AgentState> for SrlStop {
    fn gate_on_single_leader(&self) -> bool {
        true
    }

    fn is_satisfied(&self, agents: &[AgentState]) -> bool {
        is_srl(agents, self.params.n_max())
    }
}

/// Stop once the baseline can no longer change any output.
#[derive(Clone, Copy, Debug, Default)]
pub struct FjSafeStop;

impl StopCondition<FjAgentState> for FjSafeStop {
    fn gate_on_single_leader(&self) -> bool {
        true
    }

    fn is_satisfied(&self, agents: &[FjAgentState]) -> bool {
        crate::fj::fj_safe(agents)
    }
}

/// Event totals over one run.
///
/// `live_fired` counts every live bullet brought into play, including the one
/// a freshly created leader starts with; `bullet_moves_max` is the largest
/// number of left-to-right hops any single bullet made during its lifetime.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub live_fired: u64,
    pub dummy_fired: u64,
    pub kills: u64,
    pub creations: u64,
    pub bullet_moves_max: u32,
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult<S> {
    pub steps: u64,
    pub reached_target: bool,
    #[serde(rename = "final")]
    pub final_config: Vec<S>,
    pub counters: Counters,
    pub seed: u64,
}

/// Drive one execution: draw an arc, apply the interaction, maintain counters
/// and bullet lifetimes, and stop at the first configuration satisfying
/// `stop` (checked before the first step as well) or after `cap` steps.
///
/// Exceeding the cap is not an error; it is reported as
/// `reached_target = false`.
pub fn run<P: Protocol>(
    protocol: &P,
    initial: Vec<P::State>,
    stop: &dyn StopCondition<P::State>,
    cap: u64,
    rng: &mut RandomSource,
) -> RunResult<P::State> {
    let n = initial.len();
    assert!(n >= 2, "ring needs at least two agents");
    assert!(cap > 0, "step cap must be positive");

    let mut agents = initial;
    let mut leaders = agents.iter().filter(|s| P::is_leader(s)).count();
    // bullet lifetimes: per-slot hop count of the bullet currently there
    let mut hops: Vec<Option<u32>> = agents.iter().map(|s| P::has_bullet(s).then_some(0)).collect();
    let mut counters = Counters::default();
    let seed = rng.seed();

    let stop_now = |agents: &[P::State], leaders: usize| {
        (!stop.gate_on_single_leader() || leaders == 1) && stop.is_satisfied(agents)
    };

    if stop_now(&agents, leaders) {
        return RunResult { steps: 0, reached_target: true, final_config: agents, counters, seed };
    }

    let mut steps = 0u64;
    let mut reached = false;
    while steps < cap {
        let i = draw_interaction(rng, n);
        let j = (i + 1) % n;
        let (l, r, ev) = protocol.step(agents[i], agents[j], leaders);
        agents[i] = l;
        agents[j] = r;
        steps += 1;

        if ev.created_leader {
            leaders += 1;
            counters.creations += 1;
        }
        if ev.killed_leader {
            leaders -= 1;
            counters.kills += 1;
        }
        // firing replaces whatever bullet the slot held
        if let Some(kind) = ev.fired_at_responder {
            match kind {
                BulletKind::Live => counters.live_fired += 1,
                BulletKind::Dummy => counters.dummy_fired += 1,
            }
            hops[j] = Some(0);
        }
        if let Some(kind) = ev.fired_at_initiator {
            match kind {
                BulletKind::Live => counters.live_fired += 1,
                BulletKind::Dummy => counters.dummy_fired += 1,
            }
            hops[i] = Some(0);
        }
        match ev.transfer {
            Transfer::Moved => {
                let moved = hops[i].take().expect("bullet tracking out of sync") + 1;
                counters.bullet_moves_max = counters.bullet_moves_max.max(moved);
                hops[j] = Some(moved);
            }
            Transfer::Died => {
                hops[i] = None;
            }
            Transfer::None => {}
        }
        debug_assert_eq!(leaders, agents.iter().filter(|s| P::is_leader(s)).count());
        debug_assert!(hops.iter().zip(&agents).all(|(h, s)| h.is_some() == P::has_bullet(s)));

        if stop_now(&agents, leaders) {
            reached = true;
            break;
        }
    }

    RunResult { steps, reached_target: reached, final_config: agents, counters, seed }
}

/// Initial-configuration families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitFamily {
    /// Every field of every agent drawn independently and uniformly.
    Uniform,
    /// All agents blank followers: the clean leaderless start.
    NoLeaderZeroDist,
    /// Every agent a bare leader.
    AllLeaders,
    /// Preset "paper-4.1": two leaders half a ring apart, one shielded and one
    /// not, every distance estimate inflated right up to the security
    /// boundary, and a live bullet parked behind the unshielded leader.
    /// Requires `n = N` and even `n`.
    Paper41,
    /// Every agent holds a live bullet; leaderless, all estimates zero.
    MaxLiveBullets,
    /// One leader with otherwise uniformly random fields everywhere.
    SingleLeaderCorrupt,
}

impl InitFamily {
    pub const ALL: [InitFamily; 6] = [
        InitFamily::Uniform,
        InitFamily::NoLeaderZeroDist,
        InitFamily::AllLeaders,
        InitFamily::Paper41,
        InitFamily::MaxLiveBullets,
        InitFamily::SingleLeaderCorrupt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            InitFamily::Uniform => "uniform",
            InitFamily::NoLeaderZeroDist => "no-leader-zero-dist",
            InitFamily::AllLeaders => "all-leaders",
            InitFamily::Paper41 => "paper-4.1",
            InitFamily::MaxLiveBullets => "max-live-bullets",
            InitFamily::SingleLeaderCorrupt => "single-leader-corrupt",
        }
    }
}

impl std::str::FromStr for InitFamily {
    type Err = InitError;

    fn from_str(s: &str) -> Result<Self, InitError> {
        InitFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| InitError::UnknownFamily(s.to_string()))
    }
}

impl std::fmt::Display for InitFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for InitFamily {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for InitFamily {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InitError {
    #[error("unknown init family '{0}'")]
    UnknownFamily(String),
    #[error("family '{family}' not defined here: {reason}")]
    FamilyConstraint { family: &'static str, reason: String },
    #[error("ring needs at least two agents, got {0}")]
    RingTooSmall(usize),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

fn uniform_agent(params: &ProtocolParams, rng: &mut RandomSource) -> AgentState {
    AgentState {
        leader: rng.flip(),
        bull: match rng.index(3) {
            0 => Bullet::None,
            1 => Bullet::Dummy,
            _ => Bullet::Live,
        },
        shield: rng.flip(),
        signal: rng.flip(),
        dist: rng.value_to(params.n_max()),
    }
}

/// Build an initial configuration of size `n` from the named family.
pub fn generate_initial(
    family: InitFamily,
    n: usize,
    params: ProtocolParams,
    rng: &mut RandomSource,
) -> Result<RingConfiguration, InitError> {
    if n < 2 || n as u64 > u64::from(params.n_max()) {
        return Err(DomainError::RingSize { n, n_max: params.n_max() }.into());
    }
    let agents = match family {
        InitFamily::Uniform => (0..n).map(|_| uniform_agent(&params, rng)).collect(),
        InitFamily::NoLeaderZeroDist => vec![AgentState::blank(); n],
        InitFamily::AllLeaders => vec![AgentState::bare_leader(); n],
        InitFamily::MaxLiveBullets => {
            vec![AgentState { bull: Bullet::Live, ..AgentState::blank() }; n]
        }
        InitFamily::SingleLeaderCorrupt => {
            let mut agents: Vec<AgentState> = (0..n).map(|_| uniform_agent(&params, rng)).collect();
            for a in agents.iter_mut() {
                a.leader = false;
            }
            agents[0].leader = true;
            agents[0].dist = 0;
            agents
        }
        InitFamily::Paper41 => {
            if n as u64 != u64::from(params.n_max()) || !n.is_multiple_of(2) {
                return Err(InitError::FamilyConstraint {
                    family: "paper-4.1",
                    reason: format!("needs n = N and even n, got n={n}, N={}", params.n_max()),
                });
            }
            let half = n / 2;
            let mut agents = vec![AgentState::blank(); n];
            agents[0] = AgentState { shield: true, ..AgentState::bare_leader() };
            agents[half] = AgentState::bare_leader();
            for (i, a) in agents.iter_mut().enumerate() {
                if i == 0 || i == half {
                    continue;
                }
                // distance rightward to the nearer of the two leaders
                let dist_right = if i < half { half - i } else { n - i };
                a.dist = params.n_max() - dist_right as u32;
            }
            agents[half - 1].bull = Bullet::Live;
            agents
        }
    };
    Ok(RingConfiguration::new(agents, params)?)
}

/// Baseline counterpart of [`generate_initial`] over three-bit agents.
pub fn generate_initial_fj(
    family: InitFamily,
    n: usize,
    rng: &mut RandomSource,
) -> Result<Vec<FjAgentState>, InitError> {
    if n < 2 {
        return Err(InitError::RingTooSmall(n));
    }
    Ok(match family {
        InitFamily::Uniform => (0..n)
            .map(|_| FjAgentState::new(rng.flip(), rng.flip(), rng.flip()))
            .collect(),
        InitFamily::NoLeaderZeroDist => vec![FjAgentState::blank(); n],
        InitFamily::AllLeaders => vec![FjAgentState::new(true, false, false); n],
        InitFamily::MaxLiveBullets => vec![FjAgentState::new(false, true, false); n],
        InitFamily::SingleLeaderCorrupt => {
            let mut agents: Vec<FjAgentState> =
                (0..n).map(|_| FjAgentState::new(false, rng.flip(), rng.flip())).collect();
            agents[0].leader = true;
            agents
        }
        InitFamily::Paper41 => {
            return Err(InitError::FamilyConstraint {
                family: "paper-4.1",
                reason: "distance-based preset; undefined for the fj baseline".to_string(),
            })
        }
    })
}

/// Default step cap rules: generous multiples of the expected convergence
/// bounds, so hitting the cap signals a real problem rather than bad luck.
pub fn default_cap_prl(n: usize, params: &ProtocolParams) -> u64 {
    200 * n as u64 * u64::from(params.n_max())
}

pub fn default_cap_fj(n: usize) -> u64 {
    200 * (n as u64).pow(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicates::classify;

    fn params(n_max: u32) -> ProtocolParams {
        ProtocolParams::new(n_max).unwrap()
    }

    #[test]
    fn scheduler_draws_are_roughly_uniform() {
        let mut rng = RandomSource::new(7);
        let n = 5;
        let mut counts = [0u32; 5];
        let draws = 100_000;
        for _ in 0..draws {
            counts[draw_interaction(&mut rng, n)] += 1;
        }
        // 5 sigma of a binomial around draws/5
        let sigma = ((draws as f64) * 0.2 * 0.8).sqrt();
        for &c in &counts {
            assert!((f64::from(c) - draws as f64 / 5.0).abs() < 5.0 * sigma, "counts {counts:?}");
        }
    }

    #[test]
    fn two_agent_ring_draws_both_arcs() {
        let mut rng = RandomSource::new(1);
        let mut seen = [false; 2];
        for _ in 0..64 {
            seen[draw_interaction(&mut rng, 2)] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn apply_interaction_wraps_and_preserves_bystanders() {
        let p = params(4);
        let a = AgentState::blank();
        let lead = AgentState::bare_leader();
        // n=2, arc 1 pairs u_1 (initiator) with u_0 (responder): u_0 adopts
        // the leader's distance plus one
        let out = apply_interaction(&[a, lead], 1, |l, r| crate::step::prl_step(l, r, &p));
        assert_eq!(out[0].dist, 1);
        assert!(out[1].leader);
        // identity step leaves the configuration untouched
        let cfg = [a, lead, AgentState { dist: 3, ..a }];
        let out = apply_interaction(&cfg, 0, |l, r| (l, r));
        assert_eq!(out.as_slice(), &cfg);
        // a kill at arc 0 touches exactly u_0 and u_1
        let shooter = AgentState { bull: Bullet::Live, dist: 2, ..AgentState::blank() };
        let victim = AgentState::bare_leader();
        let bystander = AgentState { dist: 1, ..AgentState::blank() };
        let cfg = [shooter, victim, bystander];
        let out = apply_interaction(&cfg, 0, |l, r| crate::step::prl_step(l, r, &p));
        assert_eq!(out[2], bystander);
        assert!(!out[1].leader);
        assert_eq!(out[0].bull, Bullet::None);
    }

    #[test]
    fn run_with_trivial_stop_returns_the_initial_configuration() {
        let p = params(4);
        let mut rng = RandomSource::new(3);
        let c0 = generate_initial(InitFamily::Uniform, 4, p, &mut rng).unwrap();
        let agents = c0.agents().to_vec();
        let res = run(&Prl { params: p }, agents.clone(), &|_: &[AgentState]| true, 100, &mut rng);
        assert_eq!(res.steps, 0);
        assert!(res.reached_target);
        assert_eq!(res.final_config, agents);
    }

    #[test]
    fn runs_reach_the_single_leader_class_and_stay_within_bullet_lifetime_bounds() {
        let p = params(4);
        let proto = Prl { params: p };
        let stop = SrlStop { params: p };
        for seed in 0..200 {
            let mut rng = RandomSource::new(seed);
            let c0 = generate_initial(InitFamily::NoLeaderZeroDist, 4, p, &mut rng).unwrap();
            let res = run(&proto, c0.into_agents(), &stop, default_cap_prl(4, &p), &mut rng);
            assert!(res.reached_target, "seed {seed} hit the cap");
            let final_ring = RingConfiguration::new(res.final_config, p).unwrap();
            let report = classify(&final_ring);
            assert!(report.in_srl);
            assert_eq!(report.leader_count, 1);
            assert!(res.counters.bullet_moves_max < p.n_max(), "seed {seed}");
        }
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let p = params(8);
        let proto = Prl { params: p };
        let stop = SrlStop { params: p };
        let go = || {
            let mut rng = RandomSource::new(42);
            let c0 = generate_initial(InitFamily::Uniform, 6, p, &mut rng).unwrap();
            run(&proto, c0.into_agents(), &stop, default_cap_prl(6, &p), &mut rng)
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn family_construction() {
        let p = params(8);
        let mut rng = RandomSource::new(0);
        let c = generate_initial(InitFamily::NoLeaderZeroDist, 5, p, &mut rng).unwrap();
        assert!(c.agents().iter().all(|a| *a == AgentState::blank()));
        let c = generate_initial(InitFamily::AllLeaders, 5, p, &mut rng).unwrap();
        assert!(c.agents().iter().all(|a| *a == AgentState::bare_leader()));
        let c = generate_initial(InitFamily::MaxLiveBullets, 5, p, &mut rng).unwrap();
        assert!(c.agents().iter().all(|a| a.bull == Bullet::Live && !a.leader));
        let c = generate_initial(InitFamily::SingleLeaderCorrupt, 5, p, &mut rng).unwrap();
        assert_eq!(c.agents().iter().filter(|a| a.leader).count(), 1);

        assert!(matches!(
            generate_initial(InitFamily::Paper41, 5, p, &mut rng),
            Err(InitError::FamilyConstraint { .. })
        ));
        assert!(matches!(
            generate_initial(InitFamily::Paper41, 6, p, &mut rng),
            Err(InitError::FamilyConstraint { .. })
        ));
        assert!("bogus".parse::<InitFamily>().is_err());
    }

    #[test]
    fn twin_leader_preset_matches_its_published_shape() {
        let p = params(100);
        let mut rng = RandomSource::new(0);
        let c = generate_initial(InitFamily::Paper41, 100, p, &mut rng).unwrap();
        let a = c.agents();
        assert!(a[0].leader && a[0].shield && a[0].dist == 0);
        assert!(a[50].leader && !a[50].shield && a[50].dist == 0);
        assert_eq!(a[49].dist, 99);
        assert_eq!(a[49].bull, Bullet::Live);
        assert_eq!(a[99].dist, 99);
        assert_eq!(a[1].dist, 51);
        assert!(a.iter().all(|s| !s.signal));
        assert_eq!(a.iter().filter(|s| s.bull != Bullet::None).count(), 1);
    }

    #[test]
    fn derived_seeds_spread() {
        let mut seen = std::collections::HashSet::new();
        for point in 0..8 {
            for run in 0..64 {
                assert!(seen.insert(derive_run_seed(12345, point, run)));
            }
        }
    }
}
