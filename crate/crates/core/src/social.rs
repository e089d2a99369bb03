//! Social graph, connection scoring, and trust-weight assignment.
//!
//! The social graph is the source of all trust evidence: a node is a
//! *connected candidate* for a (sender, receiver) pair when it is a friend of
//! both, and the receiver itself always qualifies. Candidates are ranked by
//! their connection score (shared friends with sender plus shared friends
//! with receiver) and classified into high/medium/low trust using the friend
//! relation plus the carrier's interaction history.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Result, SimError};

/// Opaque vehicle identity, stable for the lifetime of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Trust classification of a candidate relay.
///
/// The weight mapping is fixed: `High` is 1.0, `Medium` 0.5, `Low` 0.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrustLevel {
    Low,
    Medium,
    High,
}

impl TrustLevel {
    pub fn weight(self) -> f64 {
        match self {
            TrustLevel::High => 1.0,
            TrustLevel::Medium => 0.5,
            TrustLevel::Low => 0.0,
        }
    }

    pub fn from_weight(w: f64) -> Option<TrustLevel> {
        if w == 1.0 {
            Some(TrustLevel::High)
        } else if w == 0.5 {
            Some(TrustLevel::Medium)
        } else if w == 0.0 {
            Some(TrustLevel::Low)
        } else {
            None
        }
    }
}

/// Graph generation models offered by [`generate_social_graph`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphModel {
    /// Ring lattice over `k` nearest neighbours with probability `p` of
    /// rewiring each edge. Edge count is preserved, so the mean degree stays
    /// at `k` (or `k - 1` for odd `k`).
    WattsStrogatz { k: u32, p: f64 },
    /// Independent edge per unordered pair with probability `p`.
    ErdosRenyi { p: f64 },
}

/// Undirected friendship relation among node identities.
///
/// Symmetric, loop-free, and indexable by [`NodeId`]. Adjacency is kept in
/// ordered sets so iteration order is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    adjacency: Vec<BTreeSet<NodeId>>,
}

impl SocialGraph {
    /// An edgeless graph over `n` nodes with ids `0..n`.
    pub fn empty(n: u32) -> SocialGraph {
        SocialGraph {
            adjacency: vec![BTreeSet::new(); n as usize],
        }
    }

    pub fn node_count(&self) -> u32 {
        self.adjacency.len() as u32
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.adjacency.len()
    }

    fn check(&self, node: NodeId) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(SimError::UnknownNode(node))
        }
    }

    /// Insert the undirected edge `{a, b}`. Self-loops are rejected.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(SimError::InvalidParameter(format!("self-loop on {a}")));
        }
        self.adjacency[a.index()].insert(b);
        self.adjacency[b.index()].insert(a);
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    /// Friend set of `node`.
    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[node.index()].iter().copied()
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node.index()].len()
    }

    /// Whether `a` and `b` are friends. Symmetric; false for `a == b`.
    pub fn are_friends(&self, a: NodeId, b: NodeId) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.adjacency[a.index()].contains(&b))
    }

    fn friends_unchecked(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.index()].contains(&b)
    }

    /// Edges as normalized `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, adj) in self.adjacency.iter().enumerate() {
            let a = NodeId(i as u32);
            for &b in adj {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Serialize to the line-oriented exchange format: a `nodes <n>` header
    /// followed by one `a b` edge per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("nodes {}\n", self.node_count());
        for (a, b) in self.edges() {
            s.push_str(&format!("{} {}\n", a.0, b.0));
        }
        s
    }

    /// Parse the format emitted by [`SocialGraph::to_text`].
    pub fn from_text(text: &str) -> Result<SocialGraph> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(SimError::Parse {
            line: 1,
            msg: "empty graph file".into(),
        })?;
        let n: u32 = header
            .strip_prefix("nodes ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or(SimError::Parse {
                line: 1,
                msg: format!("expected `nodes <n>` header, got `{header}`"),
            })?;
        let mut graph = SocialGraph::empty(n);
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<NodeId> {
                tok.and_then(|v| v.parse::<u32>().ok())
                    .map(NodeId)
                    .ok_or(SimError::Parse {
                        line: idx + 1,
                        msg: format!("expected `a b` edge, got `{line}`"),
                    })
            };
            let a = parse(parts.next())?;
            let b = parse(parts.next())?;
            graph.add_edge(a, b)?;
        }
        Ok(graph)
    }
}

/// Generate a seeded social graph over `n` nodes.
///
/// Identical `(n, model, seed)` triples produce identical graphs.
pub fn generate_social_graph(n: u32, model: GraphModel, seed: u64) -> Result<SocialGraph> {
    if n < 2 {
        return Err(SimError::InvalidParameter(format!(
            "node count must be at least 2, got {n}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match model {
        GraphModel::ErdosRenyi { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidParameter(format!(
                    "edge probability must be in [0, 1], got {p}"
                )));
            }
            let mut g = SocialGraph::empty(n);
            for a in 0..n {
                for b in (a + 1)..n {
                    if rng.gen_bool(p) {
                        g.add_edge(NodeId(a), NodeId(b))?;
                    }
                }
            }
            Ok(g)
        }
        GraphModel::WattsStrogatz { k, p } => {
            if k == 0 || k >= n {
                return Err(SimError::InvalidParameter(format!(
                    "mean degree must satisfy 0 < k < n, got k={k}, n={n}"
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidParameter(format!(
                    "rewire probability must be in [0, 1], got {p}"
                )));
            }
            watts_strogatz(n, k, p, &mut rng)
        }
    }
}

/// Classic small-world construction: ring lattice joined to the `k/2`
/// nearest neighbours on each side, then each lattice edge rewired with
/// probability `p` to a uniformly random endpoint. Rewiring preserves the
/// edge count.
fn watts_strogatz(n: u32, k: u32, p: f64, rng: &mut ChaCha12Rng) -> Result<SocialGraph> {
    let mut g = SocialGraph::empty(n);
    let half = k / 2;
    for u in 0..n {
        for j in 1..=half {
            let v = (u + j) % n;
            g.add_edge(NodeId(u), NodeId(v))?;
        }
    }
    let all: Vec<NodeId> = (0..n).map(NodeId).collect();
    for u in 0..n {
        for j in 1..=half {
            let v = (u + j) % n;
            if !rng.gen_bool(p) {
                continue;
            }
            // Pick a replacement endpoint avoiding self-loops and duplicate
            // edges; skip the rewire when u is already saturated.
            if g.degree(NodeId(u)) >= (n - 1) as usize {
                continue;
            }
            let mut w = *all.choose(rng).expect("n >= 2");
            while w == NodeId(u) || g.friends_unchecked(NodeId(u), w) {
                w = *all.choose(rng).expect("n >= 2");
            }
            g.adjacency[u as usize].remove(&NodeId(v));
            g.adjacency[v as usize].remove(&NodeId(u));
            g.add_edge(NodeId(u), w)?;
        }
    }
    Ok(g)
}

/// Whether `c` counts as a connected candidate for the `(sender, receiver)`
/// pair: a mutual friend of both, or the receiver itself.
pub fn is_connected_candidate(
    g: &SocialGraph,
    sender: NodeId,
    receiver: NodeId,
    c: NodeId,
) -> bool {
    c == receiver
        || (g.friends_unchecked(c, sender) && g.friends_unchecked(c, receiver))
}

/// Filter `neighbors` down to the connected candidates for the pair.
///
/// The receiver, when present among the neighbours, is always included:
/// every receiver is a trusted node.
pub fn connected_candidates(
    g: &SocialGraph,
    sender: NodeId,
    receiver: NodeId,
    neighbors: &BTreeSet<NodeId>,
) -> BTreeSet<NodeId> {
    neighbors
        .iter()
        .copied()
        .filter(|&c| is_connected_candidate(g, sender, receiver, c))
        .collect()
}

/// Connection score of candidate `c`: shared friends with the sender plus
/// shared friends with the receiver, excluding the three principals from
/// both neighbourhoods.
pub fn connection_score(
    g: &SocialGraph,
    sender: NodeId,
    receiver: NodeId,
    c: NodeId,
) -> Result<u32> {
    g.check(sender)?;
    g.check(receiver)?;
    g.check(c)?;
    let principals = [sender, receiver, c];
    let filtered = |node: NodeId| -> BTreeSet<NodeId> {
        g.adjacency[node.index()]
            .iter()
            .copied()
            .filter(|x| !principals.contains(x))
            .collect()
    };
    let nc = filtered(c);
    let ns = filtered(sender);
    let nr = filtered(receiver);
    Ok((nc.intersection(&ns).count() + nc.intersection(&nr).count()) as u32)
}

/// Argmax of [`connection_score`] over `candidates`; ties broken by the
/// smallest node id. `None` for an empty candidate set.
pub fn best_candidate(
    g: &SocialGraph,
    sender: NodeId,
    receiver: NodeId,
    candidates: &BTreeSet<NodeId>,
) -> Option<NodeId> {
    let mut best: Option<(u32, NodeId)> = None;
    for &c in candidates {
        let score = connection_score(g, sender, receiver, c).ok()?;
        best = match best {
            None => Some((score, c)),
            Some((bs, _)) if score > bs => Some((score, c)),
            other => other,
        };
    }
    best.map(|(_, c)| c)
}

/// Record of successful carrier-to-relay interactions, keyed per ordered
/// `(carrier, relay)` pair. Backs the high trust level: a candidate that has
/// relayed for this carrier before is trusted faster next time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrustHistory {
    interactions: BTreeMap<(NodeId, NodeId), f64>,
}

impl TrustHistory {
    pub fn new() -> TrustHistory {
        TrustHistory::default()
    }

    pub fn contains(&self, carrier: NodeId, relay: NodeId) -> bool {
        self.interactions.contains_key(&(carrier, relay))
    }

    pub fn last_used(&self, carrier: NodeId, relay: NodeId) -> Option<f64> {
        self.interactions.get(&(carrier, relay)).copied()
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    /// Record a successful relay acceptance at simulation time `t` seconds.
    /// Idempotent apart from refreshing the timestamp; `t` must not regress.
    pub fn record(&mut self, carrier: NodeId, relay: NodeId, t: f64) -> Result<()> {
        if let Some(&last) = self.interactions.get(&(carrier, relay)) {
            if t < last {
                return Err(SimError::TimeRegression {
                    what: "trust history",
                    last,
                    now: t,
                });
            }
        }
        self.interactions.insert((carrier, relay), t);
        Ok(())
    }
}

/// Standalone form of [`TrustHistory::record`].
pub fn record_trusted_interaction(
    h: &mut TrustHistory,
    carrier: NodeId,
    relay: NodeId,
    t: f64,
) -> Result<()> {
    h.record(carrier, relay, t)
}

/// Trust weight of candidate `c` for a message the `sender` currently
/// carries toward `receiver`:
///
/// * `High` — connected candidate with a prior interaction, currently in
///   radio range;
/// * `Medium` — connected candidate without a prior interaction or out of
///   range;
/// * `Low` — not a connected candidate.
pub fn trust_weight(
    h: &TrustHistory,
    g: &SocialGraph,
    sender: NodeId,
    receiver: NodeId,
    c: NodeId,
    c_in_range: bool,
) -> TrustLevel {
    if !is_connected_candidate(g, sender, receiver, c) {
        return TrustLevel::Low;
    }
    if h.contains(sender, c) && c_in_range {
        TrustLevel::High
    } else {
        TrustLevel::Medium
    }
}
