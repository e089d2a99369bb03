//! Property tests for the spec-level invariants: graph symmetry, candidate
//! soundness, trust monotonicity, argmax equivalence against brute force,
//! geometric identities, direction-indicator dichotomy, and baseline
//! reductions.

use std::collections::BTreeSet;

use proptest::prelude::*;

use gstr_core::baselines::{gpsr_next_hop, gtlr_next_hop, tgpsr_next_hop, Neighbor};
use gstr_core::mobility::{distance, DirectionTracker, Position, Vec2};
use gstr_core::social::{
    best_candidate, connected_candidates, connection_score, is_connected_candidate, trust_weight,
    NodeId, SocialGraph, TrustHistory, TrustLevel,
};

fn arb_graph(max_nodes: u32) -> impl Strategy<Value = SocialGraph> {
    (2..=max_nodes)
        .prop_flat_map(|n| {
            let edges = proptest::collection::vec((0..n, 0..n), 0..(n as usize * 2));
            (Just(n), edges)
        })
        .prop_map(|(n, edges)| {
            let mut g = SocialGraph::empty(n);
            for (a, b) in edges {
                if a != b {
                    let _ = g.add_edge(NodeId(a), NodeId(b));
                }
            }
            g
        })
}

fn arb_position() -> impl Strategy<Value = Position> {
    (0.0..2000.0f64, 0.0..2000.0f64).prop_map(|(x, y)| Position::new(x, y))
}

proptest! {
    #[test]
    fn friendship_symmetry(g in arb_graph(16), a in 0u32..16, b in 0u32..16) {
        let n = g.node_count();
        let (a, b) = (NodeId(a % n), NodeId(b % n));
        prop_assert_eq!(g.are_friends(a, b).unwrap(), g.are_friends(b, a).unwrap());
    }

    #[test]
    fn candidate_soundness(g in arb_graph(16), s in 0u32..16, r in 0u32..16, picks in proptest::collection::btree_set(0u32..16, 0..8)) {
        let n = g.node_count();
        let (s, r) = (NodeId(s % n), NodeId(r % n));
        prop_assume!(s != r);
        let neighbors: BTreeSet<NodeId> = picks.into_iter().map(|x| NodeId(x % n)).filter(|&x| x != s).collect();
        let cands = connected_candidates(&g, s, r, &neighbors);
        for c in cands {
            if c != r {
                prop_assert!(g.are_friends(c, s).unwrap());
                prop_assert!(g.are_friends(c, r).unwrap());
            }
        }
    }

    /// Adding a prior interaction never lowers a candidate's trust level.
    #[test]
    fn trust_is_monotone_in_history(g in arb_graph(12), s in 0u32..12, r in 0u32..12, c in 0u32..12, in_range in any::<bool>()) {
        let n = g.node_count();
        let (s, r, c) = (NodeId(s % n), NodeId(r % n), NodeId(c % n));
        let empty = TrustHistory::new();
        let before = trust_weight(&empty, &g, s, r, c, in_range);
        let mut h = TrustHistory::new();
        h.record(s, c, 1.0).unwrap();
        let after = trust_weight(&h, &g, s, r, c, in_range);
        prop_assert!(after >= before);
        // And the only possible promotion is medium to high.
        if after != before {
            prop_assert_eq!(before, TrustLevel::Medium);
            prop_assert_eq!(after, TrustLevel::High);
        }
    }

    /// Argmax against exhaustive enumeration on small graphs.
    #[test]
    fn best_candidate_matches_brute_force(g in arb_graph(12), s in 0u32..12, r in 0u32..12, picks in proptest::collection::btree_set(0u32..12, 1..6)) {
        let n = g.node_count();
        let (s, r) = (NodeId(s % n), NodeId(r % n));
        prop_assume!(s != r);
        let cands: BTreeSet<NodeId> = picks.into_iter().map(|x| NodeId(x % n)).filter(|&x| x != s && x != r).collect();
        prop_assume!(!cands.is_empty());
        let chosen = best_candidate(&g, s, r, &cands).unwrap();
        prop_assert!(cands.contains(&chosen));
        let chosen_score = connection_score(&g, s, r, chosen).unwrap();
        for &other in &cands {
            let score = connection_score(&g, s, r, other).unwrap();
            prop_assert!(score <= chosen_score, "{other} beats {chosen}");
            if score == chosen_score {
                prop_assert!(chosen <= other);
            }
        }
    }

    #[test]
    fn distance_is_a_metric(a in arb_position(), b in arb_position(), c in arb_position()) {
        prop_assert_eq!(distance(a, b), distance(b, a));
        prop_assert!(distance(a, b) >= 0.0);
        prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
        prop_assert_eq!(distance(a, a), 0.0);
    }

    /// Exactly the dichotomy: strictly decreasing distance gives 1,
    /// strictly increasing gives 0.
    #[test]
    fn direction_indicator_dichotomy(d1 in 1.0..1500.0f64, d2 in 1.0..1500.0f64) {
        prop_assume!(d1 != d2);
        let mut tracker = DirectionTracker::new();
        let receiver_pos = Position::new(0.0, 0.0);
        tracker
            .direction_indicator(NodeId(1), NodeId(2), Position::new(d1, 0.0), Vec2::ZERO, receiver_pos, 100.0, 1.0)
            .unwrap();
        let beta = tracker
            .direction_indicator(NodeId(1), NodeId(2), Position::new(d2, 0.0), Vec2::ZERO, receiver_pos, 100.0, 2.0)
            .unwrap();
        prop_assert_eq!(beta, d2 < d1);
    }

    /// A candidate driving straight at a static receiver keeps a positive
    /// indicator at every sample, including the first.
    #[test]
    fn straight_approach_keeps_beta_positive(start in 300.0..1800.0f64, speed in 1.0..30.0f64) {
        let mut tracker = DirectionTracker::new();
        let receiver_pos = Position::new(0.0, 0.0);
        let mut x = start;
        let mut t = 1.0;
        while x > speed {
            let beta = tracker
                .direction_indicator(
                    NodeId(1),
                    NodeId(2),
                    Position::new(x, 0.0),
                    Vec2::new(-speed, 0.0),
                    receiver_pos,
                    start,
                    t,
                )
                .unwrap();
            prop_assert!(beta, "beta dropped at x={x}");
            x -= speed;
            t += 1.0;
        }
    }

    /// With zero load weight the load-aware baseline reduces to greedy
    /// geographic forwarding.
    #[test]
    fn gtlr_zero_weight_equals_greedy(
        self_pos in arb_position(),
        dst in arb_position(),
        neighbors in proptest::collection::vec((arb_position(), 0u32..20), 0..12),
    ) {
        let snapshot: Vec<Neighbor> = neighbors
            .iter()
            .enumerate()
            .map(|(i, &(pos, load))| Neighbor { id: NodeId(i as u32), pos, velocity: Vec2::ZERO, queue_load: load })
            .collect();
        let gtlr = gtlr_next_hop(self_pos, dst, &snapshot, 0.0);
        let own = distance(self_pos, dst);
        let greedy = snapshot
            .iter()
            .filter(|n| distance(n.pos, dst) < own)
            .min_by(|a, b| {
                distance(a.pos, dst)
                    .partial_cmp(&distance(b.pos, dst))
                    .unwrap()
                    .then(a.id.cmp(&b.id))
            })
            .map(|n| n.id);
        prop_assert_eq!(gtlr, greedy);
    }

    /// The trust-filtered baseline only ever picks connected candidates,
    /// and its pick is always available to plain greedy perimeter routing.
    #[test]
    fn tgpsr_choices_subset_of_gpsr(
        g in arb_graph(12),
        self_pos in arb_position(),
        dst_pos in arb_position(),
        neighbors in proptest::collection::vec(arb_position(), 1..10),
    ) {
        let n = g.node_count();
        let src = NodeId(0);
        let dst = NodeId(1 % n);
        let snapshot: Vec<Neighbor> = neighbors
            .iter()
            .enumerate()
            .map(|(i, &pos)| Neighbor { id: NodeId((i as u32 + 2) % n), pos, velocity: Vec2::ZERO, queue_load: 0 })
            .collect();
        if let Some(pick) = tgpsr_next_hop(self_pos, dst_pos, &snapshot, &g, src, dst, 0.5) {
            prop_assert!(is_connected_candidate(&g, src, dst, pick));
            prop_assert!(snapshot.iter().any(|nb| nb.id == pick));
            // The unfiltered protocol also has a next hop available.
            prop_assert!(gpsr_next_hop(self_pos, dst_pos, &snapshot).is_some());
        }
    }

    /// In greedy mode every hop strictly decreases the distance to the
    /// destination.
    #[test]
    fn gpsr_greedy_makes_progress(
        self_pos in arb_position(),
        dst_pos in arb_position(),
        neighbors in proptest::collection::vec(arb_position(), 1..10),
    ) {
        let snapshot: Vec<Neighbor> = neighbors
            .iter()
            .enumerate()
            .map(|(i, &pos)| Neighbor { id: NodeId(i as u32), pos, velocity: Vec2::ZERO, queue_load: 0 })
            .collect();
        let own = distance(self_pos, dst_pos);
        let any_closer = snapshot.iter().any(|n| distance(n.pos, dst_pos) < own);
        if any_closer {
            let pick = gpsr_next_hop(self_pos, dst_pos, &snapshot).unwrap();
            let picked = snapshot.iter().find(|n| n.id == pick).unwrap();
            prop_assert!(distance(picked.pos, dst_pos) < own);
        }
    }
}
