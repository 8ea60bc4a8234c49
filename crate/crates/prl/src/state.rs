//! Agent state domain: the per-agent variables, the protocol parameter, and
//! the output map from states to leader/follower symbols.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Protocol-wide parameter: the known upper bound `N` on the population size.
///
/// Every agent knows `N`; the ring size `n` must satisfy `2 <= n <= N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtocolParams {
    n_max: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("population bound must be at least 2, got {0}")]
    BoundTooSmall(u32),
    #[error("dist {dist} exceeds the population bound {n_max}")]
    DistOutOfRange { dist: u32, n_max: u32 },
    #[error("ring size {n} outside 2..={n_max}")]
    RingSize { n: usize, n_max: u32 },
}

impl ProtocolParams {
    pub fn new(n_max: u32) -> Result<Self, DomainError> {
        if n_max < 2 {
            return Err(DomainError::BoundTooSmall(n_max));
        }
        Ok(Self { n_max })
    }

    /// The upper bound `N` on the population size.
    #[inline]
    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Number of distinct agent states: 2 * 3 * 2 * 2 * (N + 1).
    pub fn state_count(&self) -> u64 {
        24 * (u64::from(self.n_max) + 1)
    }
}

/// Bullet slot of an agent: empty, a dummy bullet, or a live bullet.
///
/// Live bullets kill unshielded leaders; dummy bullets are inert but still
/// block distance propagation and absorb bullet-absence signals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bullet {
    None = 0,
    Dummy = 1,
    Live = 2,
}

impl Bullet {
    #[inline]
    pub fn is_some(self) -> bool {
        self != Bullet::None
    }
}

/// Full state of one agent.
///
/// `shield` is meaningful only while `leader` is set; follower shield bits are
/// carried verbatim so that arbitrary initial configurations stay arbitrary.
/// `dist` is the agent's estimate of the distance to its nearest left leader,
/// saturating at `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "AgentStateWire", into = "AgentStateWire")]
pub struct AgentState {
    pub leader: bool,
    pub bull: Bullet,
    pub shield: bool,
    pub signal: bool,
    pub dist: u32,
}

impl AgentState {
    pub const fn new(leader: bool, bull: Bullet, shield: bool, signal: bool, dist: u32) -> Self {
        Self { leader, bull, shield, signal, dist }
    }

    /// A follower with nothing set and a zero distance estimate.
    pub const fn blank() -> Self {
        Self::new(false, Bullet::None, false, false, 0)
    }

    /// A bare leader: no bullet, no shield, no signal, dist 0.
    pub const fn bare_leader() -> Self {
        Self::new(true, Bullet::None, false, false, 0)
    }

    pub fn check_domain(&self, params: &ProtocolParams) -> Result<(), DomainError> {
        if self.dist > params.n_max {
            return Err(DomainError::DistOutOfRange { dist: self.dist, n_max: params.n_max });
        }
        Ok(())
    }
}

/// On-the-wire shape of an agent record: all fields as small integers, matching
/// the JSON snapshot format `{leader, bull, shield, signal, dist}`.
#[derive(Serialize, Deserialize)]
struct AgentStateWire {
    leader: u8,
    bull: u8,
    shield: u8,
    signal: u8,
    dist: u32,
}

impl From<AgentState> for AgentStateWire {
    fn from(s: AgentState) -> Self {
        Self {
            leader: s.leader as u8,
            bull: s.bull as u8,
            shield: s.shield as u8,
            signal: s.signal as u8,
            dist: s.dist,
        }
    }
}

impl TryFrom<AgentStateWire> for AgentState {
    type Error = String;

    fn try_from(w: AgentStateWire) -> Result<Self, String> {
        let bit = |name: &str, v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(format!("{name} must be 0 or 1, got {v}")),
        };
        let bull = match w.bull {
            0 => Bullet::None,
            1 => Bullet::Dummy,
            2 => Bullet::Live,
            v => return Err(format!("bull must be 0, 1 or 2, got {v}")),
        };
        Ok(Self {
            leader: bit("leader", w.leader)?,
            bull,
            shield: bit("shield", w.shield)?,
            signal: bit("signal", w.signal)?,
            dist: w.dist,
        })
    }
}

/// Output symbol of an agent: leader or follower.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputSymbol {
    L,
    F,
}

/// The output map: `L` exactly when the leader bit is set.
#[inline]
pub fn output_of(s: &AgentState) -> OutputSymbol {
    if s.leader {
        OutputSymbol::L
    } else {
        OutputSymbol::F
    }
}

/// Stable index of a state in `0..state_count`, used by the exhaustive
/// verifier to pack configurations into integers.
pub fn state_index(s: &AgentState, params: &ProtocolParams) -> u64 {
    debug_assert!(s.dist <= params.n_max);
    let mut idx = s.leader as u64;
    idx = idx * 3 + s.bull as u64;
    idx = idx * 2 + s.shield as u64;
    idx = idx * 2 + s.signal as u64;
    idx * (u64::from(params.n_max) + 1) + u64::from(s.dist)
}

/// Inverse of [`state_index`].
pub fn state_from_index(mut idx: u64, params: &ProtocolParams) -> AgentState {
    let span = u64::from(params.n_max) + 1;
    let dist = (idx % span) as u32;
    idx /= span;
    let signal = idx % 2 == 1;
    idx /= 2;
    let shield = idx % 2 == 1;
    idx /= 2;
    let bull = match idx % 3 {
        0 => Bullet::None,
        1 => Bullet::Dummy,
        _ => Bullet::Live,
    };
    idx /= 3;
    let leader = idx == 1;
    debug_assert!(idx <= 1);
    AgentState { leader, bull, shield, signal, dist }
}

/// All `24 * (N + 1)` agent states, each exactly once, in index order.
pub fn enumerate_states(params: &ProtocolParams) -> impl Iterator<Item = AgentState> + '_ {
    (0..params.state_count()).map(move |i| state_from_index(i, params))
}
