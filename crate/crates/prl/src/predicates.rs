//! Executable configuration predicates: leader distances, per-agent and
//! per-bullet properties, and membership in the three nested configuration
//! classes the protocol converges through.
//!
//! * `cpb`: at least one leader and every live bullet is peaceful — the last
//!   leader can no longer be killed.
//! * `cni`: additionally every agent is secure and every live bullet is
//!   modest — no new leader will ever be created.
//! * `srl`: additionally exactly one leader — outputs are frozen.
//!
//! The per-agent operations (`dist_left`, `is_peaceful`, ...) follow the
//! definitions literally with direct scans; `classify` computes the same
//! answers for all agents at once with two ring sweeps. The verifier leans on
//! the former, the simulation loop on the latter, so each route checks the
//! other.

use crate::engine::RingConfiguration;
use crate::state::{AgentState, Bullet};
use serde::{Deserialize, Serialize};

/// Hop count to a leader along the ring, infinite in a leaderless ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Distance {
    Finite(u32),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<u32> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }
}

fn wrap_sub(i: usize, j: usize, n: usize) -> usize {
    (i + n - j % n) % n
}

/// Distance from `u_i` to its nearest leader looking left (against the ring
/// direction); 0 when `u_i` itself leads.
pub fn dist_left(c: &RingConfiguration, i: usize) -> Distance {
    let agents = c.agents();
    let n = agents.len();
    assert!(i < n, "agent index {i} out of range for ring of {n}");
    for j in 0..n {
        if agents[wrap_sub(i, j, n)].leader {
            return Distance::Finite(j as u32);
        }
    }
    Distance::Infinite
}

/// Distance from `u_i` to its nearest leader looking right (along the ring
/// direction); 0 when `u_i` itself leads.
pub fn dist_right(c: &RingConfiguration, i: usize) -> Distance {
    let agents = c.agents();
    let n = agents.len();
    assert!(i < n, "agent index {i} out of range for ring of {n}");
    for j in 0..n {
        if agents[(i + j) % n].leader {
            return Distance::Finite(j as u32);
        }
    }
    Distance::Infinite
}

/// A live bullet at `u_i` is peaceful when its nearest left leader is shielded
/// and no bullet-absence signal sits on the closed path from that leader to
/// the bullet. A peaceful bullet can never kill the last leader.
///
/// Defined as `false` on leaderless rings, where the path is unbounded.
/// Calling this on an agent without a live bullet is a contract failure.
pub fn is_peaceful(c: &RingConfiguration, i: usize) -> bool {
    let agents = c.agents();
    assert_eq!(agents[i].bull, Bullet::Live, "peaceful is defined for live bullets only");
    let Distance::Finite(d) = dist_left(c, i) else {
        return false;
    };
    let n = agents.len();
    if !agents[wrap_sub(i, d as usize, n)].shield {
        return false;
    }
    (0..=d as usize).all(|j| !agents[wrap_sub(i, j, n)].signal)
}

/// An agent is secure when its distance estimate cannot reach `N` before the
/// walk meets a leader: leaders must carry 0, everyone else at most
/// `N - dist_right`. Requires at least one leader in the ring.
pub fn is_secure(c: &RingConfiguration, i: usize) -> bool {
    let a = &c.agents()[i];
    if a.leader {
        return a.dist == 0;
    }
    let dr = dist_right(c, i)
        .finite()
        .expect("secure is undefined on a leaderless ring");
    a.dist <= c.params().n_max() - dr
}

/// A live bullet is modest when it is peaceful and every agent on the closed
/// path from its nearest left leader carries a distance estimate no larger
/// than its true left-leader distance. Behind a modest bullet, no distance
/// estimate can be pushed to `N`.
pub fn is_modest(c: &RingConfiguration, i: usize) -> bool {
    if !is_peaceful(c, i) {
        return false;
    }
    let agents = c.agents();
    let n = agents.len();
    let d = dist_left(c, i).finite().expect("peaceful implies a leader exists");
    (0..=d as usize).all(|j| {
        let p = wrap_sub(i, j, n);
        match dist_left(c, p) {
            Distance::Finite(dl) => agents[p].dist <= dl,
            Distance::Infinite => false,
        }
    })
}

/// Class membership flags for one configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassFlags {
    pub leader_count: usize,
    pub in_cpb: bool,
    pub in_cni: bool,
    pub in_srl: bool,
}

/// Full classification: flags plus the witnesses that break them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassReport {
    pub leader_count: usize,
    pub in_cpb: bool,
    pub in_cni: bool,
    pub in_srl: bool,
    /// Agents violating the secure predicate (all agents when leaderless).
    pub insecure_agents: Vec<usize>,
    /// Live bullets that are not modest (this includes not-peaceful ones).
    pub non_modest_bullets: Vec<usize>,
}

impl ClassReport {
    pub fn flags(&self) -> ClassFlags {
        ClassFlags {
            leader_count: self.leader_count,
            in_cpb: self.in_cpb,
            in_cni: self.in_cni,
            in_srl: self.in_srl,
        }
    }
}

/// Classify a configuration in two ring sweeps.
pub fn classify(c: &RingConfiguration) -> ClassReport {
    let agents = c.agents();
    let n = agents.len();
    let n_max = c.params().n_max();

    let first_leader = agents.iter().position(|a| a.leader);
    let Some(l0) = first_leader else {
        return ClassReport {
            leader_count: 0,
            in_cpb: false,
            in_cni: false,
            in_srl: false,
            insecure_agents: (0..n).collect(),
            non_modest_bullets: (0..n).filter(|&i| agents[i].bull == Bullet::Live).collect(),
        };
    };

    // rightward sweep from a leader: left-leader distances plus the prefix
    // facts peaceful/modest need (signals clear since the leader, distance
    // estimates bounded since the leader, shield of that leader)
    let mut distl = vec![0u32; n];
    let mut sig_clear = vec![false; n];
    let mut dist_bounded = vec![false; n];
    let mut leftward_shield = vec![false; n];
    let mut leader_count = 0usize;
    let (mut d, mut sig_ok, mut dist_ok, mut shield) = (0u32, true, true, false);
    for k in 0..n {
        let p = (l0 + k) % n;
        let a = &agents[p];
        if a.leader {
            leader_count += 1;
            d = 0;
            sig_ok = !a.signal;
            dist_ok = a.dist == 0;
            shield = a.shield;
        } else {
            d += 1;
            sig_ok = sig_ok && !a.signal;
            dist_ok = dist_ok && a.dist <= d;
        }
        distl[p] = d;
        sig_clear[p] = sig_ok;
        dist_bounded[p] = dist_ok;
        leftward_shield[p] = shield;
    }

    // leftward sweep: right-leader distances
    let mut distr = vec![0u32; n];
    let mut dr = 0u32;
    for k in 0..n {
        let p = wrap_sub(l0, k, n);
        if agents[p].leader {
            dr = 0;
        }
        distr[p] = dr;
        dr += 1;
    }

    let mut insecure = Vec::new();
    let mut non_modest = Vec::new();
    let mut all_peaceful = true;
    for (p, a) in agents.iter().enumerate() {
        let secure = if a.leader { a.dist == 0 } else { a.dist <= n_max - distr[p] };
        if !secure {
            insecure.push(p);
        }
        if a.bull == Bullet::Live {
            let peaceful = leftward_shield[p] && sig_clear[p];
            all_peaceful &= peaceful;
            if !(peaceful && dist_bounded[p]) {
                non_modest.push(p);
            }
        }
    }

    let in_cpb = all_peaceful;
    let in_cni = in_cpb && insecure.is_empty() && non_modest.is_empty();
    let in_srl = in_cni && leader_count == 1;
    ClassReport { leader_count, in_cpb, in_cni, in_srl, insecure_agents: insecure, non_modest_bullets: non_modest }
}

/// Allocation-free test for membership in the single-leader class, used on the
/// simulation hot path. Equivalent to `classify(c).in_srl`.
pub fn is_srl(agents: &[AgentState], n_max: u32) -> bool {
    let n = agents.len();
    let mut leader = None;
    for (i, a) in agents.iter().enumerate() {
        if a.leader {
            if leader.is_some() {
                return false;
            }
            leader = Some(i);
        }
    }
    let Some(b) = leader else { return false };
    if agents[b].dist != 0 {
        return false;
    }
    let shielded = agents[b].shield;
    let (mut sig_ok, mut dist_ok) = (!agents[b].signal, true);
    // the leader is its own nearest left leader, so a live bullet here needs
    // the shield and a clear signal just like any other
    if agents[b].bull == Bullet::Live && !(shielded && sig_ok) {
        return false;
    }
    for k in 1..n {
        let p = (b + k) % n;
        let a = &agents[p];
        let k = k as u32;
        // distl(p) = k and distr(p) = n - k since u_b is the only leader
        if a.dist > n_max - (n as u32 - k) {
            return false;
        }
        sig_ok = sig_ok && !a.signal;
        dist_ok = dist_ok && a.dist <= k;
        if a.bull == Bullet::Live && !(shielded && sig_ok && dist_ok) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{generate_initial, InitFamily, RandomSource, RingConfiguration};
    use crate::state::{AgentState, Bullet, ProtocolParams};
    use proptest::prelude::*;

    fn ring(n_max: u32, agents: Vec<AgentState>) -> RingConfiguration {
        RingConfiguration::new(agents, ProtocolParams::new(n_max).unwrap()).unwrap()
    }

    fn follower(dist: u32) -> AgentState {
        AgentState { dist, ..AgentState::blank() }
    }

    #[test]
    fn distances_from_a_sole_leader() {
        let c = ring(4, vec![AgentState::bare_leader(), follower(1), follower(2), follower(3)]);
        assert_eq!(dist_left(&c, 2), Distance::Finite(2));
        assert_eq!(dist_right(&c, 2), Distance::Finite(2));
        assert_eq!(dist_left(&c, 0), Distance::Finite(0));
    }

    #[test]
    fn leaderless_rings_have_infinite_distances() {
        let c = ring(4, vec![follower(0); 3]);
        for i in 0..3 {
            assert_eq!(dist_left(&c, i), Distance::Infinite);
            assert_eq!(dist_right(&c, i), Distance::Infinite);
        }
    }

    #[test]
    fn all_leaders_have_zero_distances() {
        let c = ring(4, vec![AgentState::bare_leader(); 4]);
        for i in 0..4 {
            assert_eq!(dist_left(&c, i), Distance::Finite(0));
            assert_eq!(dist_right(&c, i), Distance::Finite(0));
        }
    }

    #[test]
    fn peaceful_needs_a_shielded_left_leader_and_a_silent_path() {
        let mut shielded = AgentState::bare_leader();
        shielded.shield = true;
        let mut bullet = follower(1);
        bullet.bull = Bullet::Live;
        let c = ring(4, vec![shielded, bullet, follower(2), follower(3)]);
        assert!(is_peaceful(&c, 1));

        let mut noisy = bullet;
        noisy.signal = true;
        let c = ring(4, vec![shielded, noisy, follower(2), follower(3)]);
        assert!(!is_peaceful(&c, 1));
    }

    #[test]
    fn secure_examples() {
        let mut lead = AgentState::bare_leader();
        let c = ring(4, vec![lead, follower(1), follower(2), follower(3)]);
        assert!(is_secure(&c, 0));
        lead.dist = 2;
        let c = ring(4, vec![lead, follower(1), follower(2), follower(3)]);
        assert!(!is_secure(&c, 0));
        // follower with dist = N while a leader sits ahead: insecure
        let c = ring(4, vec![AgentState::bare_leader(), follower(4), follower(1), follower(2)]);
        assert!(!is_secure(&c, 1));
    }

    #[test]
    fn freshly_fired_bullet_position_is_modest() {
        let mut leader = AgentState::bare_leader();
        leader.shield = true;
        let mut bullet = follower(1);
        bullet.bull = Bullet::Live;
        let c = ring(8, vec![leader, bullet, follower(2), follower(3)]);
        assert!(is_modest(&c, 1));
        // peaceful but with an inflated estimate on the path: not modest
        let mut inflated = bullet;
        inflated.dist = 5;
        let c = ring(8, vec![leader, inflated, follower(2), follower(3)]);
        assert!(is_peaceful(&c, 1));
        assert!(!is_modest(&c, 1));
    }

    /// The near-miss preset: everything secure and peaceful, yet the inflated
    /// estimates behind the unshielded leader still allow a re-creation.
    #[test]
    fn twin_leader_preset_is_cpb_but_not_cni() {
        let mut rng = RandomSource::new(0);
        let params = ProtocolParams::new(100).unwrap();
        let c = generate_initial(InitFamily::Paper41, 100, params, &mut rng).unwrap();
        assert_eq!(c.agents()[49].dist, 99);
        assert!(c.agents()[50].leader && !c.agents()[50].shield);
        assert_eq!(c.agents()[49].bull, Bullet::Live);
        assert!(is_peaceful(&c, 49));
        assert!((0..100).all(|i| is_secure(&c, i)));
        assert!(!is_modest(&c, 49));
        let report = classify(&c);
        assert_eq!(report.leader_count, 2);
        assert!(report.in_cpb && !report.in_cni);
        assert_eq!(report.non_modest_bullets, vec![49]);
        assert!(report.insecure_agents.is_empty());
    }

    #[test]
    fn classify_examples() {
        let c = ring(4, vec![follower(0); 4]);
        let rep = classify(&c);
        assert_eq!(rep.leader_count, 0);
        assert!(!rep.in_cpb);

        let c = ring(3, vec![AgentState::bare_leader(), follower(1), follower(2)]);
        let rep = classify(&c);
        assert!(rep.in_srl && rep.in_cni && rep.in_cpb);
        assert_eq!(rep.leader_count, 1);
    }

    fn arb_config(n_max: u32, n: usize) -> impl Strategy<Value = RingConfiguration> {
        proptest::collection::vec((any::<bool>(), 0u8..3, any::<bool>(), any::<bool>(), 0..=n_max), n)
            .prop_map(move |raw| {
                let agents = raw
                    .into_iter()
                    .map(|(leader, bull, shield, signal, dist)| AgentState {
                        leader,
                        bull: match bull {
                            0 => Bullet::None,
                            1 => Bullet::Dummy,
                            _ => Bullet::Live,
                        },
                        shield,
                        signal,
                        dist,
                    })
                    .collect();
                RingConfiguration::new(agents, ProtocolParams::new(n_max).unwrap()).unwrap()
            })
    }

    proptest! {
        /// The sweep classifier and the literal per-agent definitions agree,
        /// and the class inclusions hold by construction.
        #[test]
        fn classify_matches_the_direct_definitions(c in (2usize..=7).prop_flat_map(|n| arb_config(8, n))) {
            let rep = classify(&c);
            let n = c.agents().len();
            let leaders = c.agents().iter().filter(|a| a.leader).count();
            prop_assert_eq!(rep.leader_count, leaders);

            if leaders > 0 {
                let insecure: Vec<usize> = (0..n).filter(|&i| !is_secure(&c, i)).collect();
                prop_assert_eq!(&rep.insecure_agents, &insecure);
            }
            let non_modest: Vec<usize> = (0..n)
                .filter(|&i| c.agents()[i].bull == Bullet::Live && !is_modest(&c, i))
                .collect();
            prop_assert_eq!(&rep.non_modest_bullets, &non_modest);

            let all_peaceful = (0..n)
                .filter(|&i| c.agents()[i].bull == Bullet::Live)
                .all(|i| is_peaceful(&c, i));
            prop_assert_eq!(rep.in_cpb, leaders > 0 && all_peaceful);

            // implication chain and fast path
            prop_assert!(!rep.in_srl || rep.in_cni);
            prop_assert!(!rep.in_cni || rep.in_cpb);
            prop_assert!(!rep.in_srl || rep.leader_count == 1);
            prop_assert_eq!(rep.in_srl, is_srl(c.agents(), c.params().n_max()));
        }
    }
}
