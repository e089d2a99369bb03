//! Comparison protocols sharing the neighbour-snapshot interface: greedy
//! perimeter stateless routing (GPSR), its trust-filtered variant (T-GPSR),
//! and greedy routing biased by queue load (GTLR).
//!
//! T-GPSR and GTLR are minimal reconstructions built on the same greedy
//! core; see the repo docs for the exact variants. None of the baselines
//! uses the cloud: a carrier without a next hop holds the message and
//! retries at the next beacon tick until the ttl runs out.

use std::cmp::Ordering;

use crate::mobility::{distance, Position, Vec2};
use crate::social::{self, NodeId, SocialGraph};

/// One neighbour as seen by a baseline protocol at a beacon tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: NodeId,
    pub pos: Position,
    pub velocity: Vec2,
    /// Messages currently queued at this neighbour.
    pub queue_load: u32,
}

/// Beacon-tick neighbour view of one carrier.
pub type NeighborSnapshot = Vec<Neighbor>;

/// Greedy perimeter stateless next hop.
///
/// Greedy mode forwards to the neighbour closest to the destination among
/// those strictly closer than the carrier (ties to the smallest id). When no
/// neighbour makes progress, perimeter mode applies the right-hand rule on
/// the Gabriel planarization of the carrier's local edges, sweeping
/// counterclockwise from the ray toward the destination. Returns `None`
/// only for an isolated carrier.
pub fn gpsr_next_hop(
    self_pos: Position,
    dst_pos: Position,
    snapshot: &NeighborSnapshot,
) -> Option<NodeId> {
    if let Some(greedy) = greedy_next_hop(self_pos, dst_pos, snapshot) {
        return Some(greedy);
    }
    perimeter_next_hop(self_pos, dst_pos, snapshot)
}

fn greedy_next_hop(
    self_pos: Position,
    dst_pos: Position,
    snapshot: &NeighborSnapshot,
) -> Option<NodeId> {
    let own = distance(self_pos, dst_pos);
    snapshot
        .iter()
        .filter(|n| distance(n.pos, dst_pos) < own)
        .min_by(|a, b| {
            let da = distance(a.pos, dst_pos);
            let db = distance(b.pos, dst_pos);
            da.partial_cmp(&db).unwrap_or(Ordering::Equal).then(a.id.cmp(&b.id))
        })
        .map(|n| n.id)
}

/// Gabriel test: the edge from `self_pos` to `v` survives when no witness
/// lies strictly inside the disc having that edge as diameter.
fn gabriel_edge(self_pos: Position, v: Position, witnesses: &[Position]) -> bool {
    let mx = (self_pos.x + v.x) / 2.0;
    let my = (self_pos.y + v.y) / 2.0;
    let r2 = {
        let dx = self_pos.x - v.x;
        let dy = self_pos.y - v.y;
        (dx * dx + dy * dy) / 4.0
    };
    !witnesses.iter().any(|w| {
        let dx = w.x - mx;
        let dy = w.y - my;
        dx * dx + dy * dy < r2
    })
}

/// Angle class of `v` counterclockwise from the reference ray `r`:
/// 0 = along the ray, 1 = (0, pi), 2 = opposite, 3 = (pi, 2*pi).
fn angle_class(r: Vec2, v: Vec2) -> u8 {
    let cross = r.cross(v);
    let dot = r.dot(v);
    if cross == 0.0 {
        if dot > 0.0 {
            0
        } else {
            2
        }
    } else if cross > 0.0 {
        1
    } else {
        3
    }
}

/// Order two vectors by counterclockwise angle from `r`. Avoids
/// trigonometry so the ordering is bit-stable across platforms.
fn ccw_cmp(r: Vec2, a: Vec2, b: Vec2) -> Ordering {
    let (ca, cb) = (angle_class(r, a), angle_class(r, b));
    if ca != cb {
        return ca.cmp(&cb);
    }
    let cross = a.cross(b);
    if cross > 0.0 {
        Ordering::Less
    } else if cross < 0.0 {
        Ordering::Greater
    } else {
        Ordering::Equal
    }
}

fn perimeter_next_hop(
    self_pos: Position,
    dst_pos: Position,
    snapshot: &NeighborSnapshot,
) -> Option<NodeId> {
    if snapshot.is_empty() {
        return None;
    }
    let positions: Vec<Position> = snapshot.iter().map(|n| n.pos).collect();
    let reference = Vec2::new(dst_pos.x - self_pos.x, dst_pos.y - self_pos.y);
    snapshot
        .iter()
        .filter(|n| {
            let witnesses: Vec<Position> = positions
                .iter()
                .copied()
                .filter(|&p| p != n.pos)
                .collect();
            gabriel_edge(self_pos, n.pos, &witnesses)
        })
        .min_by(|a, b| {
            let va = Vec2::new(a.pos.x - self_pos.x, a.pos.y - self_pos.y);
            let vb = Vec2::new(b.pos.x - self_pos.x, b.pos.y - self_pos.y);
            ccw_cmp(reference, va, vb).then(a.id.cmp(&b.id))
        })
        .map(|n| n.id)
}

/// Trust-filtered GPSR: greedy perimeter routing restricted to neighbours
/// whose trust weight for the `(src, dst)` pair reaches `threshold`.
///
/// Without an interaction history the reachable weights are 0.5 (connected
/// candidate) and 0 (anyone else), so a threshold of 1.0 filters everything.
pub fn tgpsr_next_hop(
    self_pos: Position,
    dst_pos: Position,
    snapshot: &NeighborSnapshot,
    social: &SocialGraph,
    src: NodeId,
    dst: NodeId,
    threshold: f64,
) -> Option<NodeId> {
    let filtered: NeighborSnapshot = snapshot
        .iter()
        .filter(|n| {
            let weight = if social::is_connected_candidate(social, src, dst, n.id) {
                0.5
            } else {
                0.0
            };
            weight >= threshold
        })
        .copied()
        .collect();
    gpsr_next_hop(self_pos, dst_pos, &filtered)
}

/// Load-aware greedy next hop: among neighbours strictly closer to the
/// destination, minimize distance plus `load_weight` per queued message.
/// `None` when nothing is closer.
pub fn gtlr_next_hop(
    self_pos: Position,
    dst_pos: Position,
    snapshot: &NeighborSnapshot,
    load_weight: f64,
) -> Option<NodeId> {
    let own = distance(self_pos, dst_pos);
    snapshot
        .iter()
        .filter(|n| distance(n.pos, dst_pos) < own)
        .min_by(|a, b| {
            let ca = distance(a.pos, dst_pos) + load_weight * a.queue_load as f64;
            let cb = distance(b.pos, dst_pos) + load_weight * b.queue_load as f64;
            ca.partial_cmp(&cb).unwrap_or(Ordering::Equal).then(a.id.cmp(&b.id))
        })
        .map(|n| n.id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neighbor(id: u32, x: f64, y: f64) -> Neighbor {
        Neighbor {
            id: NodeId(id),
            pos: Position::new(x, y),
            velocity: Vec2::ZERO,
            queue_load: 0,
        }
    }

    #[test]
    fn gpsr_picks_destination_when_visible() {
        let dst = Position::new(100.0, 0.0);
        let snapshot = vec![neighbor(7, 100.0, 0.0), neighbor(3, 50.0, 0.0)];
        assert_eq!(
            gpsr_next_hop(Position::new(0.0, 0.0), dst, &snapshot),
            Some(NodeId(7))
        );
    }

    #[test]
    fn gpsr_greedy_picks_closest_to_dst() {
        // Self at 200 m from dst; neighbours at 300 m and 150 m.
        let dst = Position::new(0.0, 0.0);
        let snapshot = vec![neighbor(1, 300.0, 0.0), neighbor(2, 150.0, 0.0)];
        assert_eq!(
            gpsr_next_hop(Position::new(200.0, 0.0), dst, &snapshot),
            Some(NodeId(2))
        );
    }

    #[test]
    fn gpsr_isolated_returns_none() {
        assert_eq!(
            gpsr_next_hop(Position::new(0.0, 0.0), Position::new(500.0, 0.0), &vec![]),
            None
        );
    }

    #[test]
    fn gpsr_perimeter_right_hand_pick() {
        // Local maximum: both neighbours farther from dst than self.
        // Sweeping counterclockwise from the ray toward dst (east), the
        // northern neighbour comes before the southern one.
        let dst = Position::new(400.0, 0.0);
        let snapshot = vec![neighbor(5, -10.0, -80.0), neighbor(9, 0.0, 100.0)];
        assert_eq!(
            gpsr_next_hop(Position::new(0.0, 0.0), dst, &snapshot),
            Some(NodeId(9))
        );
    }

    #[test]
    fn gpsr_perimeter_respects_gabriel_pruning() {
        // Both neighbours are farther from dst than self, forcing perimeter
        // mode. The witness at (-50, 1) sits inside the disc of the edge to
        // (-100, 0), so that edge is pruned and the witness is the only
        // planar choice.
        let dst = Position::new(400.0, 0.0);
        let snapshot = vec![neighbor(2, -100.0, 0.0), neighbor(4, -50.0, 1.0)];
        let pick = gpsr_next_hop(Position::new(0.0, 0.0), dst, &snapshot);
        assert_eq!(pick, Some(NodeId(4)));
    }

    #[test]
    fn tgpsr_filters_by_trust() {
        let mut g = SocialGraph::empty(5);
        // 3 is a mutual friend of src 0 and dst 1; 4 is a stranger.
        g.add_edge(NodeId(3), NodeId(0)).unwrap();
        g.add_edge(NodeId(3), NodeId(1)).unwrap();
        let dst_pos = Position::new(0.0, 0.0);
        let self_pos = Position::new(300.0, 0.0);
        let snapshot = vec![neighbor(4, 100.0, 0.0), neighbor(3, 200.0, 0.0)];
        // Stranger is closer, but only the connected candidate passes.
        assert_eq!(
            tgpsr_next_hop(self_pos, dst_pos, &snapshot, &g, NodeId(0), NodeId(1), 0.5),
            Some(NodeId(3))
        );
        // Threshold 1.0 is unreachable without history.
        assert_eq!(
            tgpsr_next_hop(self_pos, dst_pos, &snapshot, &g, NodeId(0), NodeId(1), 1.0),
            None
        );
    }

    #[test]
    fn tgpsr_none_when_all_low() {
        let g = SocialGraph::empty(5);
        let snapshot = vec![neighbor(4, 100.0, 0.0)];
        assert_eq!(
            tgpsr_next_hop(
                Position::new(300.0, 0.0),
                Position::new(0.0, 0.0),
                &snapshot,
                &g,
                NodeId(0),
                NodeId(1),
                0.5
            ),
            None
        );
    }

    #[test]
    fn gtlr_prefers_lighter_queue_at_equal_distance() {
        let dst = Position::new(0.0, 0.0);
        let mut a = neighbor(1, 100.0, 0.0);
        a.queue_load = 5;
        let mut b = neighbor(2, -100.0, 0.0);
        b.queue_load = 0;
        let snapshot = vec![a, b];
        assert_eq!(
            gtlr_next_hop(Position::new(300.0, 0.0), dst, &snapshot, 10.0),
            Some(NodeId(2))
        );
    }

    #[test]
    fn gtlr_zero_weight_matches_greedy() {
        let dst = Position::new(0.0, 0.0);
        let mut a = neighbor(1, 120.0, 0.0);
        a.queue_load = 50;
        let snapshot = vec![a, neighbor(2, 180.0, 0.0)];
        let self_pos = Position::new(300.0, 0.0);
        assert_eq!(
            gtlr_next_hop(self_pos, dst, &snapshot, 0.0),
            greedy_next_hop(self_pos, dst, &snapshot)
        );
    }

    #[test]
    fn gtlr_none_without_progress() {
        let dst = Position::new(0.0, 0.0);
        let snapshot = vec![neighbor(1, 500.0, 0.0)];
        assert_eq!(
            gtlr_next_hop(Position::new(300.0, 0.0), dst, &snapshot, 1.0),
            None
        );
    }
}
