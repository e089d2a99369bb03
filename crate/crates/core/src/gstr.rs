//! The GSTR forwarding protocol: trusted-node selection, the sender-side
//! forwarding decision, and the receiver-side acceptance gate.
//!
//! A carrier delivers directly when the destination is in radio range.
//! Otherwise it relays to the best trusted node among its connected
//! candidates: highest trust tier first, then highest connection score, and
//! only ever to a candidate whose direction indicator is positive. With no
//! usable candidate the message goes to the base station for cloud storage,
//! and a carrier about to leave its home cell hands the message back
//! unconditionally.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::infra::BsId;
use crate::mobility::{DirectionSampler, Position, Vec2};
use crate::social::{
    self, NodeId, SocialGraph, TrustHistory, TrustLevel,
};

/// Unique message identifier within a run.
pub type MsgId = u64;

/// Previous custodian of a message, as seen by the receiver gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LastHop {
    Vehicle(NodeId),
    BaseStation(BsId),
}

/// A unit of dissemination.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub msg_id: MsgId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Injection time, microseconds of simulation time.
    pub created_at_us: u64,
    /// Lifetime in microseconds; the message drops once exceeded.
    pub ttl_us: u64,
    pub payload_size: u32,
    /// Intermediate vehicle relays, in custody order, without duplicates.
    pub hop_trace: Vec<NodeId>,
    /// Set once the message has been stored in the cloud.
    pub via_cloud: bool,
    pub last_hop: LastHop,
    /// Whether the previous custodian was chosen through the trust process
    /// (or is infrastructure). Forged forwards carry `false`.
    pub last_hop_trusted: bool,
    /// Cell the current custodian received the message in.
    pub home_bs: BsId,
}

impl Message {
    pub fn expired(&self, now_us: u64) -> bool {
        now_us.saturating_sub(self.created_at_us) > self.ttl_us
    }

    /// Relay count for the hop metric: intermediate vehicle custodians only.
    pub fn relay_count(&self) -> u32 {
        self.hop_trace.len() as u32
    }
}

/// Why a message is being sent to the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToBaseStationReason {
    NoCandidate,
    LeavingCell,
}

/// Outcome of one sender-side decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardDecision {
    /// Destination in range: send straight to it.
    DeliverDirect(NodeId),
    /// Forward to the selected trusted node.
    Relay { to: NodeId, level: TrustLevel },
    /// Hand the message to the base station for cloud storage.
    ToBaseStation(ToBaseStationReason),
    /// Keep custody until the next beacon tick.
    Hold,
}

/// One visible neighbour in the carrier's current radio snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborInfo {
    pub id: NodeId,
    pub pos: Position,
    pub velocity: Vec2,
}

/// Trusted-node selection over a prepared candidate table.
///
/// High-trust candidates with a positive direction indicator win first,
/// ranked by connection score (ties to the smallest id). Otherwise medium
/// candidates are tried in descending score order and the first one moving
/// toward the receiver is chosen. Low trust never relays. The returned node
/// always has a positive indicator; `None` signals cloud fallback.
pub fn select_trusted_node(
    candidates: &[NodeId],
    weights: &BTreeMap<NodeId, TrustLevel>,
    betas: &BTreeMap<NodeId, bool>,
    mut scorer: impl FnMut(NodeId) -> u32,
) -> Option<NodeId> {
    let mut high: Option<(u32, NodeId)> = None;
    for &c in candidates {
        if weights.get(&c) == Some(&TrustLevel::High) && betas.get(&c) == Some(&true) {
            let score = scorer(c);
            high = match high {
                None => Some((score, c)),
                Some((bs, bc)) if score > bs || (score == bs && c < bc) => Some((score, c)),
                other => other,
            };
        }
    }
    if let Some((_, c)) = high {
        return Some(c);
    }

    let mut mediums: Vec<(u32, NodeId)> = candidates
        .iter()
        .filter(|c| weights.get(c) == Some(&TrustLevel::Medium))
        .map(|&c| (scorer(c), c))
        .collect();
    // Descending score, ascending id.
    mediums.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    mediums
        .into_iter()
        .find(|&(_, c)| betas.get(&c) == Some(&true))
        .map(|(_, c)| c)
}

/// Sender-side forwarding decision for `msg`, currently held by `carrier`.
///
/// `snapshot` is the carrier's beacon-tick neighbour view (excluding the
/// carrier itself); `dst_pos` comes from the location service. Prior relays
/// recorded in the hop trace are never candidates again, which keeps the
/// trace duplicate-free.
#[allow(clippy::too_many_arguments)]
pub fn sender_decide(
    carrier: NodeId,
    carrier_pos: Position,
    msg: &Message,
    snapshot: &[NeighborInfo],
    dst_pos: Position,
    social: &SocialGraph,
    history: &TrustHistory,
    sampler: &mut DirectionSampler,
    in_home_cell: bool,
) -> Result<ForwardDecision> {
    // Leaving the home cell overrides every other choice: the message is
    // location-bound and returns to its home base station.
    if !in_home_cell {
        return Ok(ForwardDecision::ToBaseStation(ToBaseStationReason::LeavingCell));
    }

    if snapshot.iter().any(|n| n.id == msg.dst) {
        return Ok(ForwardDecision::DeliverDirect(msg.dst));
    }

    let d_sender = crate::mobility::distance(carrier_pos, dst_pos);
    let mut candidates: Vec<NodeId> = Vec::new();
    let mut weights: BTreeMap<NodeId, TrustLevel> = BTreeMap::new();
    let mut betas: BTreeMap<NodeId, bool> = BTreeMap::new();
    for n in snapshot {
        if n.id == carrier || msg.hop_trace.contains(&n.id) {
            continue;
        }
        if !social::is_connected_candidate(social, carrier, msg.dst, n.id) {
            continue;
        }
        candidates.push(n.id);
        weights.insert(n.id, social::trust_weight(history, social, carrier, msg.dst, n.id, true));
        let beta = sampler.beta(n.id, msg.dst, n.pos, n.velocity, dst_pos, d_sender)?;
        betas.insert(n.id, beta);
    }

    if candidates.is_empty() {
        return Ok(ForwardDecision::ToBaseStation(ToBaseStationReason::NoCandidate));
    }

    match select_trusted_node(&candidates, &weights, &betas, |c| {
        social::connection_score(social, carrier, msg.dst, c).unwrap_or(0)
    }) {
        Some(to) => Ok(ForwardDecision::Relay {
            to,
            level: weights[&to],
        }),
        // Candidates exist but none is moving toward the receiver: store in
        // the cloud rather than risking the message drifting away.
        None => Ok(ForwardDecision::ToBaseStation(ToBaseStationReason::NoCandidate)),
    }
}

/// Receiver-side acceptance verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acceptance {
    Accepted,
    Discarded,
}

/// Receiver-side gate: accept only messages whose last hop is trustworthy.
///
/// The last hop must have been chosen through the trust process, and must
/// be a friend of the receiver unless the message arrives from the cloud
/// via a base station (infrastructure is always trusted).
pub fn receiver_accept(msg: &Message, receiver: NodeId, social: &SocialGraph) -> Acceptance {
    if !msg.last_hop_trusted {
        return Acceptance::Discarded;
    }
    let known = match msg.last_hop {
        LastHop::BaseStation(_) => msg.via_cloud,
        LastHop::Vehicle(hop) => {
            let friend = social.are_friends(hop, receiver).unwrap_or(false);
            let direct_from_src = hop == msg.src
                && social.are_friends(msg.src, receiver).unwrap_or(false);
            friend || direct_from_src || msg.via_cloud
        }
    };
    if known {
        Acceptance::Accepted
    } else {
        Acceptance::Discarded
    }
}

/// Record a completed relay so the pair is trusted faster next time.
pub fn on_relay_success(
    history: &mut TrustHistory,
    carrier: NodeId,
    relay: NodeId,
    t: f64,
) -> Result<()> {
    social::record_trusted_interaction(history, carrier, relay, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::social::SocialGraph;

    fn msg(src: u32, dst: u32) -> Message {
        Message {
            msg_id: 1,
            src: NodeId(src),
            dst: NodeId(dst),
            created_at_us: 0,
            ttl_us: 60_000_000,
            payload_size: 256,
            hop_trace: vec![],
            via_cloud: false,
            last_hop: LastHop::Vehicle(NodeId(src)),
            last_hop_trusted: true,
            home_bs: BsId(0),
        }
    }

    fn weights(pairs: &[(u32, TrustLevel)]) -> BTreeMap<NodeId, TrustLevel> {
        pairs.iter().map(|&(id, w)| (NodeId(id), w)).collect()
    }

    fn betas(pairs: &[(u32, bool)]) -> BTreeMap<NodeId, bool> {
        pairs.iter().map(|&(id, b)| (NodeId(id), b)).collect()
    }

    #[test]
    fn select_prefers_high_with_positive_beta() {
        let candidates = vec![NodeId(2), NodeId(3), NodeId(4), NodeId(5)];
        let w = weights(&[
            (2, TrustLevel::Medium),
            (3, TrustLevel::High),
            (4, TrustLevel::Medium),
            (5, TrustLevel::Medium),
        ]);
        let b = betas(&[(2, true), (3, true), (4, true), (5, true)]);
        let scores: BTreeMap<NodeId, u32> =
            [(NodeId(2), 9), (NodeId(3), 1), (NodeId(4), 5), (NodeId(5), 2)].into();
        let pick = select_trusted_node(&candidates, &w, &b, |c| scores[&c]);
        assert_eq!(pick, Some(NodeId(3)));
    }

    #[test]
    fn select_falls_through_to_next_medium_on_beta_zero() {
        // Argmax medium has beta 0; the next in score order has beta 1.
        let candidates = vec![NodeId(10), NodeId(11)];
        let w = weights(&[(10, TrustLevel::Medium), (11, TrustLevel::Medium)]);
        let b = betas(&[(10, false), (11, true)]);
        let scores: BTreeMap<NodeId, u32> = [(NodeId(10), 5), (NodeId(11), 3)].into();
        let pick = select_trusted_node(&candidates, &w, &b, |c| scores[&c]);
        assert_eq!(pick, Some(NodeId(11)));
    }

    #[test]
    fn select_none_when_all_beta_zero() {
        let candidates = vec![NodeId(1), NodeId(2)];
        let w = weights(&[(1, TrustLevel::High), (2, TrustLevel::Medium)]);
        let b = betas(&[(1, false), (2, false)]);
        assert_eq!(select_trusted_node(&candidates, &w, &b, |_| 0), None);
    }

    #[test]
    fn select_ignores_low_trust() {
        let candidates = vec![NodeId(1)];
        let w = weights(&[(1, TrustLevel::Low)]);
        let b = betas(&[(1, true)]);
        assert_eq!(select_trusted_node(&candidates, &w, &b, |_| 99), None);
    }

    fn line_setup() -> (SocialGraph, DirectionSampler) {
        // 0 = sender, 1 = receiver, 2 = mutual friend, 3 = stranger.
        let mut g = SocialGraph::empty(4);
        g.add_edge(NodeId(2), NodeId(0)).unwrap();
        g.add_edge(NodeId(2), NodeId(1)).unwrap();
        let mut sampler = DirectionSampler::new();
        sampler.begin_tick(1.0);
        (g, sampler)
    }

    #[test]
    fn decide_direct_when_dst_in_snapshot() {
        let (g, mut sampler) = line_setup();
        let snapshot = [NeighborInfo {
            id: NodeId(1),
            pos: Position::new(100.0, 0.0),
            velocity: Vec2::ZERO,
        }];
        let d = sender_decide(
            NodeId(0),
            Position::new(0.0, 0.0),
            &msg(0, 1),
            &snapshot,
            Position::new(100.0, 0.0),
            &g,
            &TrustHistory::new(),
            &mut sampler,
            true,
        )
        .unwrap();
        assert_eq!(d, ForwardDecision::DeliverDirect(NodeId(1)));
    }

    #[test]
    fn decide_relays_to_connected_candidate_moving_toward_dst() {
        let (g, mut sampler) = line_setup();
        let snapshot = [NeighborInfo {
            id: NodeId(2),
            pos: Position::new(100.0, 0.0),
            velocity: Vec2::new(10.0, 0.0),
        }];
        let d = sender_decide(
            NodeId(0),
            Position::new(0.0, 0.0),
            &msg(0, 1),
            &snapshot,
            Position::new(400.0, 0.0),
            &g,
            &TrustHistory::new(),
            &mut sampler,
            true,
        )
        .unwrap();
        assert_eq!(
            d,
            ForwardDecision::Relay {
                to: NodeId(2),
                level: TrustLevel::Medium
            }
        );
    }

    #[test]
    fn decide_cloud_when_no_candidates() {
        let (g, mut sampler) = line_setup();
        let snapshot = [NeighborInfo {
            id: NodeId(3),
            pos: Position::new(100.0, 0.0),
            velocity: Vec2::ZERO,
        }];
        let d = sender_decide(
            NodeId(0),
            Position::new(0.0, 0.0),
            &msg(0, 1),
            &snapshot,
            Position::new(400.0, 0.0),
            &g,
            &TrustHistory::new(),
            &mut sampler,
            true,
        )
        .unwrap();
        assert_eq!(
            d,
            ForwardDecision::ToBaseStation(ToBaseStationReason::NoCandidate)
        );
    }

    #[test]
    fn decide_cloud_when_candidate_moving_away() {
        let (g, mut sampler) = line_setup();
        let snapshot = [NeighborInfo {
            id: NodeId(2),
            pos: Position::new(100.0, 0.0),
            velocity: Vec2::new(-10.0, 0.0),
        }];
        let d = sender_decide(
            NodeId(0),
            Position::new(0.0, 0.0),
            &msg(0, 1),
            &snapshot,
            Position::new(400.0, 0.0),
            &g,
            &TrustHistory::new(),
            &mut sampler,
            true,
        )
        .unwrap();
        assert_eq!(
            d,
            ForwardDecision::ToBaseStation(ToBaseStationReason::NoCandidate)
        );
    }

    #[test]
    fn leaving_cell_overrides_direct_delivery() {
        let (g, mut sampler) = line_setup();
        let snapshot = [NeighborInfo {
            id: NodeId(1),
            pos: Position::new(100.0, 0.0),
            velocity: Vec2::ZERO,
        }];
        let d = sender_decide(
            NodeId(0),
            Position::new(0.0, 0.0),
            &msg(0, 1),
            &snapshot,
            Position::new(100.0, 0.0),
            &g,
            &TrustHistory::new(),
            &mut sampler,
            false,
        )
        .unwrap();
        assert_eq!(
            d,
            ForwardDecision::ToBaseStation(ToBaseStationReason::LeavingCell)
        );
    }

    #[test]
    fn prior_relays_are_excluded() {
        let (g, mut sampler) = line_setup();
        let mut m = msg(0, 1);
        m.hop_trace.push(NodeId(2));
        let snapshot = [NeighborInfo {
            id: NodeId(2),
            pos: Position::new(100.0, 0.0),
            velocity: Vec2::new(10.0, 0.0),
        }];
        let d = sender_decide(
            NodeId(0),
            Position::new(0.0, 0.0),
            &m,
            &snapshot,
            Position::new(400.0, 0.0),
            &g,
            &TrustHistory::new(),
            &mut sampler,
            true,
        )
        .unwrap();
        assert_eq!(
            d,
            ForwardDecision::ToBaseStation(ToBaseStationReason::NoCandidate)
        );
    }

    #[test]
    fn prior_trusted_candidate_wins_high_tier() {
        let mut g = SocialGraph::empty(5);
        // Both 2 and 3 are mutual friends of the endpoints; 3 has a much
        // better connection score via shared friend 4.
        g.add_edge(NodeId(2), NodeId(0)).unwrap();
        g.add_edge(NodeId(2), NodeId(1)).unwrap();
        g.add_edge(NodeId(3), NodeId(0)).unwrap();
        g.add_edge(NodeId(3), NodeId(1)).unwrap();
        g.add_edge(NodeId(3), NodeId(4)).unwrap();
        g.add_edge(NodeId(0), NodeId(4)).unwrap();
        g.add_edge(NodeId(1), NodeId(4)).unwrap();
        let mut history = TrustHistory::new();
        on_relay_success(&mut history, NodeId(0), NodeId(2), 0.5).unwrap();
        let mut sampler = DirectionSampler::new();
        sampler.begin_tick(1.0);
        let snapshot = [
            NeighborInfo {
                id: NodeId(2),
                pos: Position::new(100.0, 0.0),
                velocity: Vec2::new(10.0, 0.0),
            },
            NeighborInfo {
                id: NodeId(3),
                pos: Position::new(120.0, 0.0),
                velocity: Vec2::new(10.0, 0.0),
            },
        ];
        let d = sender_decide(
            NodeId(0),
            Position::new(0.0, 0.0),
            &msg(0, 1),
            &snapshot,
            Position::new(400.0, 0.0),
            &g,
            &history,
            &mut sampler,
            true,
        )
        .unwrap();
        assert_eq!(
            d,
            ForwardDecision::Relay {
                to: NodeId(2),
                level: TrustLevel::High
            }
        );
    }

    #[test]
    fn receiver_accepts_trusted_friend() {
        let mut g = SocialGraph::empty(3);
        g.add_edge(NodeId(2), NodeId(1)).unwrap();
        let mut m = msg(0, 1);
        m.last_hop = LastHop::Vehicle(NodeId(2));
        assert_eq!(receiver_accept(&m, NodeId(1), &g), Acceptance::Accepted);
    }

    #[test]
    fn receiver_discards_stranger() {
        let g = SocialGraph::empty(3);
        let mut m = msg(0, 1);
        m.last_hop = LastHop::Vehicle(NodeId(2));
        assert_eq!(receiver_accept(&m, NodeId(1), &g), Acceptance::Discarded);
    }

    #[test]
    fn receiver_accepts_cloud_delivery() {
        let g = SocialGraph::empty(3);
        let mut m = msg(0, 1);
        m.via_cloud = true;
        m.last_hop = LastHop::BaseStation(BsId(4));
        assert_eq!(receiver_accept(&m, NodeId(1), &g), Acceptance::Accepted);
    }

    #[test]
    fn receiver_discards_untrusted_flag_even_from_friend() {
        let mut g = SocialGraph::empty(3);
        g.add_edge(NodeId(2), NodeId(1)).unwrap();
        let mut m = msg(0, 1);
        m.last_hop = LastHop::Vehicle(NodeId(2));
        m.last_hop_trusted = false;
        assert_eq!(receiver_accept(&m, NodeId(1), &g), Acceptance::Discarded);
    }

    #[test]
    fn relay_success_feeds_trust_history() {
        let mut g = SocialGraph::empty(3);
        g.add_edge(NodeId(2), NodeId(0)).unwrap();
        g.add_edge(NodeId(2), NodeId(1)).unwrap();
        let mut h = TrustHistory::new();
        on_relay_success(&mut h, NodeId(0), NodeId(2), 5.0).unwrap();
        assert_eq!(
            crate::social::trust_weight(&h, &g, NodeId(0), NodeId(1), NodeId(2), true),
            TrustLevel::High
        );
        // Idempotent double record.
        on_relay_success(&mut h, NodeId(0), NodeId(2), 6.0).unwrap();
        assert_eq!(h.len(), 1);
        // Unrelated pair unaffected.
        assert!(!h.contains(NodeId(1), NodeId(2)));
    }
}
