//! The pairwise transition function of the ring protocol.
//!
//! One interaction updates the initiator `l` (left neighbor) and the responder
//! `r` (right neighbor) in a fixed sequence of phases, each phase observing the
//! writes of the previous ones:
//!
//! 1. distance estimation: leaders reset `dist` to 0; a bulletless follower
//!    responder adopts `min(l.dist + 1, N)`;
//! 2. leader creation: a responder whose `dist` reached `N` becomes a shielded
//!    leader and fires a live bullet on the spot;
//! 3. bullet firing: a leader holding a bullet-absence signal fires — a live
//!    bullet with a fresh shield when it meets its right neighbor, a dummy
//!    bullet breaking its shield when it meets its left neighbor;
//! 4. bullet movement: the initiator's bullet is absorbed by a leader
//!    responder (killing it when live and unshielded), moves onto a bulletless
//!    follower, or disappears against the follower's own bullet; either way it
//!    clears the responder's signal;
//! 5. signal propagation: the initiator picks up a bullet-absence signal from
//!    the responder, or generates one if the responder is a leader.
//!
//! The ordering is normative: a leader created in phase 2 is visible to phases
//! 3-5, and a bullet fired in phase 3 is processed by phase 4 within the same
//! interaction. All randomness lives in the scheduler; the step is pure.

use crate::state::{AgentState, Bullet, ProtocolParams};

/// Which kind of bullet a firing produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BulletKind {
    Dummy,
    Live,
}

/// Fate of the bullet sitting at the initiator when the movement phase ran.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Transfer {
    /// The initiator held no bullet when the movement phase ran.
    #[default]
    None,
    /// The bullet moved one position to the right, onto the responder.
    Moved,
    /// The bullet disappeared: absorbed by a leader or lost against another bullet.
    Died,
}

/// What one interaction did, beyond the two post-states.
///
/// Firing events replace whatever bullet the agent held before; `transfer`
/// describes the movement phase, which runs after both firing phases and so
/// may act on a bullet fired within the same interaction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepEvents {
    /// The responder turned into a leader (distance estimate hit `N`).
    pub created_leader: bool,
    /// The responder was a leader and was demoted by a live bullet.
    pub killed_leader: bool,
    /// A bullet was fired at the initiator (always live).
    pub fired_at_initiator: Option<BulletKind>,
    /// A bullet was fired at the responder (live at creation, dummy otherwise).
    pub fired_at_responder: Option<BulletKind>,
    /// Fate of the initiator's bullet in the movement phase.
    pub transfer: Transfer,
}

/// Signature shared by the real step and its deliberately broken variants.
pub type TracedStepFn = fn(AgentState, AgentState, &ProtocolParams) -> (AgentState, AgentState, StepEvents);

/// One interaction between initiator `l` and responder `r`.
///
/// Any in-domain pair of states is a legal input; out-of-domain states are a
/// harness bug and panic.
pub fn prl_step(l: AgentState, r: AgentState, params: &ProtocolParams) -> (AgentState, AgentState) {
    let (l, r, _) = prl_step_traced(l, r, params);
    (l, r)
}

/// Same as [`prl_step`], also reporting what happened.
pub fn prl_step_traced(
    mut l: AgentState,
    mut r: AgentState,
    params: &ProtocolParams,
) -> (AgentState, AgentState, StepEvents) {
    let n_max = params.n_max();
    assert!(
        l.dist <= n_max && r.dist <= n_max,
        "state outside the domain for N={n_max}: l.dist={}, r.dist={}",
        l.dist,
        r.dist
    );
    let mut ev = StepEvents::default();

    // distance estimation
    if l.leader {
        l.dist = 0;
    }
    if r.leader {
        r.dist = 0;
    } else if r.bull == Bullet::None {
        r.dist = (l.dist + 1).min(n_max);
    }

    // leader creation
    if r.dist == n_max {
        r.leader = true;
        r.bull = Bullet::Live;
        r.shield = true;
        r.signal = false;
        r.dist = 0;
        ev.created_leader = true;
        ev.fired_at_responder = Some(BulletKind::Live);
    }

    // bullet firing
    if l.leader && l.signal {
        l.bull = Bullet::Live;
        l.shield = true;
        l.signal = false;
        ev.fired_at_initiator = Some(BulletKind::Live);
    }
    if r.leader && r.signal {
        r.bull = Bullet::Dummy;
        r.shield = false;
        r.signal = false;
        ev.fired_at_responder = Some(BulletKind::Dummy);
    }

    // bullet movement
    if l.bull.is_some() && r.leader {
        if l.bull == Bullet::Live && !r.shield {
            r.leader = false;
            ev.killed_leader = true;
        }
        l.bull = Bullet::None;
        ev.transfer = Transfer::Died;
    } else if l.bull.is_some() {
        if r.bull == Bullet::None {
            r.bull = l.bull;
            ev.transfer = Transfer::Moved;
        } else {
            ev.transfer = Transfer::Died;
        }
        l.bull = Bullet::None;
        r.signal = false;
    }

    // signal propagation
    if r.signal || r.leader {
        l.signal = true;
    }

    (l, r, ev)
}

/// Step variants with one phase deliberately broken, used to confirm that the
/// transition checkers actually detect the faults they exist to catch.
pub mod mutants {
    use super::*;

    /// Like [`prl_step_traced`], except a moving bullet does not clear the
    /// responder's bullet-absence signal, letting signals slip past bullets.
    pub fn no_signal_reset(
        mut l: AgentState,
        mut r: AgentState,
        params: &ProtocolParams,
    ) -> (AgentState, AgentState, StepEvents) {
        let n_max = params.n_max();
        assert!(l.dist <= n_max && r.dist <= n_max);
        let mut ev = StepEvents::default();
        if l.leader {
            l.dist = 0;
        }
        if r.leader {
            r.dist = 0;
        } else if r.bull == Bullet::None {
            r.dist = (l.dist + 1).min(n_max);
        }
        if r.dist == n_max {
            r.leader = true;
            r.bull = Bullet::Live;
            r.shield = true;
            r.signal = false;
            r.dist = 0;
            ev.created_leader = true;
            ev.fired_at_responder = Some(BulletKind::Live);
        }
        if l.leader && l.signal {
            l.bull = Bullet::Live;
            l.shield = true;
            l.signal = false;
            ev.fired_at_initiator = Some(BulletKind::Live);
        }
        if r.leader && r.signal {
            r.bull = Bullet::Dummy;
            r.shield = false;
            r.signal = false;
            ev.fired_at_responder = Some(BulletKind::Dummy);
        }
        if l.bull.is_some() && r.leader {
            if l.bull == Bullet::Live && !r.shield {
                r.leader = false;
                ev.killed_leader = true;
            }
            l.bull = Bullet::None;
            ev.transfer = Transfer::Died;
        } else if l.bull.is_some() {
            if r.bull == Bullet::None {
                r.bull = l.bull;
                ev.transfer = Transfer::Moved;
            } else {
                ev.transfer = Transfer::Died;
            }
            l.bull = Bullet::None;
            // fault: r.signal is left standing here
        }
        if r.signal || r.leader {
            l.signal = true;
        }
        (l, r, ev)
    }

    /// Like [`prl_step_traced`], except a freshly created leader comes up
    /// without its shield, leaving its own live bullet able to kill it.
    pub fn unshielded_creation(
        mut l: AgentState,
        mut r: AgentState,
        params: &ProtocolParams,
    ) -> (AgentState, AgentState, StepEvents) {
        let n_max = params.n_max();
        assert!(l.dist <= n_max && r.dist <= n_max);
        let mut ev = StepEvents::default();
        if l.leader {
            l.dist = 0;
        }
        if r.leader {
            r.dist = 0;
        } else if r.bull == Bullet::None {
            r.dist = (l.dist + 1).min(n_max);
        }
        if r.dist == n_max {
            r.leader = true;
            r.bull = Bullet::Live;
            r.shield = false; // fault: the newborn leader is left exposed
            r.signal = false;
            r.dist = 0;
            ev.created_leader = true;
            ev.fired_at_responder = Some(BulletKind::Live);
        }
        if l.leader && l.signal {
            l.bull = Bullet::Live;
            l.shield = true;
            l.signal = false;
            ev.fired_at_initiator = Some(BulletKind::Live);
        }
        if r.leader && r.signal {
            r.bull = Bullet::Dummy;
            r.shield = false;
            r.signal = false;
            ev.fired_at_responder = Some(BulletKind::Dummy);
        }
        if l.bull.is_some() && r.leader {
            if l.bull == Bullet::Live && !r.shield {
                r.leader = false;
                ev.killed_leader = true;
            }
            l.bull = Bullet::None;
            ev.transfer = Transfer::Died;
        } else if l.bull.is_some() {
            if r.bull == Bullet::None {
                r.bull = l.bull;
                ev.transfer = Transfer::Moved;
            } else {
                ev.transfer = Transfer::Died;
            }
            l.bull = Bullet::None;
            r.signal = false;
        }
        if r.signal || r.leader {
            l.signal = true;
        }
        (l, r, ev)
    }
}
