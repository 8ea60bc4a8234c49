//! Comparison baseline: a bullet/shield elimination scheme driven by an
//! idealized leader-absence oracle.
//!
//! Agents carry three bits. Leaders fire a bullet whenever they respond while
//! bulletless; bullets travel left to right and kill unshielded leaders;
//! shields travel right to left and stop bullets; when there is no leader at
//! all, the oracle immediately lets a follower promote itself with a fresh
//! bullet and shield.
//!
//! Within one interaction the sub-steps apply in a fixed order — creation,
//! fire, bullet move/kill, shield move — and every rule reads the
//! pre-interaction states, writing into working copies.

use crate::step::{BulletKind, StepEvents, Transfer};
use serde::{Deserialize, Serialize};

/// One agent of the baseline: a leader bit, a bullet bit, and a shield bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FjAgentWire", into = "FjAgentWire")]
pub struct FjAgentState {
    pub leader: bool,
    pub bullet: bool,
    pub shield: bool,
}

impl FjAgentState {
    pub const fn new(leader: bool, bullet: bool, shield: bool) -> Self {
        Self { leader, bullet, shield }
    }

    pub const fn blank() -> Self {
        Self::new(false, false, false)
    }
}

#[derive(Serialize, Deserialize)]
struct FjAgentWire {
    leader: u8,
    bullet: u8,
    shield: u8,
}

impl From<FjAgentState> for FjAgentWire {
    fn from(s: FjAgentState) -> Self {
        Self { leader: s.leader as u8, bullet: s.bullet as u8, shield: s.shield as u8 }
    }
}

impl TryFrom<FjAgentWire> for FjAgentState {
    type Error = String;

    fn try_from(w: FjAgentWire) -> Result<Self, String> {
        let bit = |name: &str, v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(format!("{name} must be 0 or 1, got {v}")),
        };
        Ok(Self {
            leader: bit("leader", w.leader)?,
            bullet: bit("bullet", w.bullet)?,
            shield: bit("shield", w.shield)?,
        })
    }
}

/// What the leader detector reported for the current configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleReading {
    pub leader_absent: bool,
}

/// The idealized oracle: reads the whole configuration and reports leader
/// absence immediately.
pub fn oracle_immediate(config: &[FjAgentState]) -> OracleReading {
    assert!(!config.is_empty(), "oracle reading of an empty configuration");
    OracleReading { leader_absent: !config.iter().any(|a| a.leader) }
}

/// One baseline interaction between initiator `l` and responder `r`, with the
/// oracle reading taken from the pre-step configuration.
pub fn fj_step(l: FjAgentState, r: FjAgentState, oracle: OracleReading) -> (FjAgentState, FjAgentState) {
    let (l, r, _) = fj_step_traced(l, r, oracle);
    (l, r)
}

/// Same as [`fj_step`], also reporting what happened.
///
/// Bullet accounting note: when a leader responder fires and the initiator's
/// bullet moves onto it in the same interaction, the two coalesce into the
/// single bullet bit; trackers keep the moved bullet.
pub fn fj_step_traced(
    pre_l: FjAgentState,
    pre_r: FjAgentState,
    oracle: OracleReading,
) -> (FjAgentState, FjAgentState, StepEvents) {
    let mut l = pre_l;
    let mut r = pre_r;
    let mut ev = StepEvents::default();

    // creation: the oracle lets a follower promote itself, fully armed
    if oracle.leader_absent && !pre_r.leader {
        r.leader = true;
        r.bullet = true;
        r.shield = true;
        ev.created_leader = true;
        ev.fired_at_responder = Some(BulletKind::Live);
    }

    // fire: a bulletless leader responder makes a bullet
    if pre_r.leader && !pre_r.bullet {
        r.bullet = true;
        ev.fired_at_responder = Some(BulletKind::Live);
    }

    // bullet move / kill
    if pre_l.bullet {
        l.bullet = false;
        if pre_r.bullet || pre_r.shield {
            // lost against the responder's bullet, or spent passing a shield
            ev.transfer = Transfer::Died;
        } else {
            r.bullet = true;
            ev.transfer = Transfer::Moved;
            if pre_r.leader {
                r.leader = false;
                ev.killed_leader = true;
            }
        }
    }

    // shield move: right to left, right shield lost on collision
    if pre_r.shield {
        r.shield = false;
        if !pre_l.shield {
            l.shield = true;
        }
    }

    (l, r, ev)
}

/// Number of leaders in a baseline configuration.
pub fn fj_leader_count(config: &[FjAgentState]) -> usize {
    config.iter().filter(|a| a.leader).count()
}

/// A baseline configuration that can no longer change any output: exactly one
/// leader, at least one shield in the ring, and every bullet has a shield
/// somewhere on its forward path up to and including the leader.
///
/// Shields only disappear pairwise (the survivor remains) and a bullet cannot
/// cross a shield, so each listed condition is preserved by every interaction.
pub fn fj_safe(config: &[FjAgentState]) -> bool {
    let n = config.len();
    let mut leader_pos = None;
    for (i, a) in config.iter().enumerate() {
        if a.leader {
            if leader_pos.is_some() {
                return false;
            }
            leader_pos = Some(i);
        }
    }
    let Some(b) = leader_pos else { return false };
    if !config.iter().any(|a| a.shield) {
        return false;
    }
    // walk left from the leader; `guarded` says a shield lies strictly between
    // the current position and the leader, leader position included
    let mut guarded = config[b].shield;
    for k in 1..n {
        let p = (b + n - k) % n;
        if config[p].bullet && !guarded {
            return false;
        }
        guarded = guarded || config[p].shield;
    }
    // a bullet at the leader itself wraps the whole ring and meets some shield
    true
}
