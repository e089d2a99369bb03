//! Base stations, cell assignment, handoff, and the delay-tolerant cloud
//! store.
//!
//! The area is tiled by cells around a regular grid of stations; a position
//! belongs to the station with the nearest center (ties to the smallest
//! station id). Messages without a usable next hop are stored in the cloud
//! under their home station until the receiver or a connected candidate
//! shows up in that cell.

use std::collections::BTreeMap;
use std::fmt;

use crate::gstr::{Message, MsgId};
use crate::mobility::{distance, Position};
use crate::social::{NodeId, SocialGraph};

/// Base station identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BsId(pub u32);

impl fmt::Display for BsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bs{}", self.0)
    }
}

/// Fixed roadside station anchoring one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseStation {
    pub bs_id: BsId,
    pub center: Position,
}

/// Lay out `rows x cols` stations on an even grid over the area, centered
/// in their tiles.
pub fn station_grid(width: f64, height: f64, rows: u32, cols: u32) -> Vec<BaseStation> {
    let mut out = Vec::with_capacity((rows * cols) as usize);
    let tile_w = width / cols as f64;
    let tile_h = height / rows as f64;
    let mut id = 0;
    for r in 0..rows {
        for c in 0..cols {
            out.push(BaseStation {
                bs_id: BsId(id),
                center: Position::new(
                    (c as f64 + 0.5) * tile_w,
                    (r as f64 + 0.5) * tile_h,
                ),
            });
            id += 1;
        }
    }
    out
}

/// Station owning position `p`: minimum center distance, ties to the
/// smallest station id.
pub fn cell_of(stations: &[BaseStation], p: Position) -> BsId {
    debug_assert!(!stations.is_empty());
    let mut best = stations[0].bs_id;
    let mut best_d = distance(stations[0].center, p);
    for s in &stations[1..] {
        let d = distance(s.center, p);
        if d < best_d {
            best_d = d;
            best = s.bs_id;
        }
    }
    best
}

/// Distance from `p` to the boundary of its cell (half the gap between the
/// two nearest station centers). Used by scenario constructors that need a
/// position to stay in its cell for a short window.
pub fn cell_margin(stations: &[BaseStation], p: Position) -> f64 {
    if stations.len() < 2 {
        return f64::INFINITY;
    }
    let mut d1 = f64::INFINITY;
    let mut d2 = f64::INFINITY;
    for s in stations {
        let d = distance(s.center, p);
        if d < d1 {
            d2 = d1;
            d1 = d;
        } else if d < d2 {
            d2 = d;
        }
    }
    (d2 - d1) / 2.0
}

/// Handoff verdict for a carrier holding a message homed at `home_bs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandoffVerdict {
    Keep,
    ReturnToHome,
}

/// A carrier keeps a message only while it remains in the message's home
/// cell; crossing into another cell returns the message to the home base
/// station.
pub fn handoff_check(
    stations: &[BaseStation],
    carrier_pos: Position,
    home_bs: BsId,
) -> HandoffVerdict {
    if cell_of(stations, carrier_pos) == home_bs {
        HandoffVerdict::Keep
    } else {
        HandoffVerdict::ReturnToHome
    }
}

/// One stored message awaiting pickup.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudEntry {
    pub msg: Message,
    pub home_bs: BsId,
    pub stored_at_us: u64,
}

/// Result of putting a message into the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PutOutcome {
    Stored,
    /// The id was already present; the store is unchanged.
    DuplicateIgnored,
}

/// What a poll decided to do with one stored message.
#[derive(Debug, Clone, PartialEq)]
pub enum PollAction {
    /// The receiver is in the cell: deliver to it.
    Deliver { msg_id: MsgId, to: NodeId },
    /// A connected candidate is in the cell: release the message to it as a
    /// new carrier.
    Release { msg_id: MsgId, to: NodeId },
    /// The entry outlived its ttl and was dropped.
    Expire { msg_id: MsgId },
}

/// Delay-tolerant storage shared by all stations, partitioned by home cell.
#[derive(Debug, Clone, Default)]
pub struct CloudStore {
    entries: BTreeMap<MsgId, CloudEntry>,
}

impl CloudStore {
    pub fn new() -> CloudStore {
        CloudStore::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, msg_id: MsgId) -> bool {
        self.entries.contains_key(&msg_id)
    }

    pub fn get(&self, msg_id: MsgId) -> Option<&CloudEntry> {
        self.entries.get(&msg_id)
    }

    /// Store `msg` under `home_bs`, marking it as a cloud message. A
    /// duplicate id is ignored.
    pub fn put(&mut self, mut msg: Message, home_bs: BsId, t_us: u64) -> PutOutcome {
        if self.entries.contains_key(&msg.msg_id) {
            return PutOutcome::DuplicateIgnored;
        }
        msg.via_cloud = true;
        self.entries.insert(
            msg.msg_id,
            CloudEntry {
                msg,
                home_bs,
                stored_at_us: t_us,
            },
        );
        PutOutcome::Stored
    }

    /// Remove and return a stored message (on delivery or release).
    pub fn take(&mut self, msg_id: MsgId) -> Option<CloudEntry> {
        self.entries.remove(&msg_id)
    }

    /// Poll station `bs` at time `t_us`: decide, for every message homed
    /// there, whether to deliver to the receiver, release to a connected
    /// candidate, or drop on expiry. Entries are inspected in message-id
    /// order and stay in the store; the engine applies the actions (the
    /// transfers take transmission time).
    pub fn poll(
        &self,
        bs: BsId,
        nodes_in_cell: &[(NodeId, Position)],
        social: &SocialGraph,
        t_us: u64,
    ) -> Vec<PollAction> {
        let mut actions = Vec::new();
        for entry in self.entries.values() {
            if entry.home_bs != bs {
                continue;
            }
            let msg = &entry.msg;
            if msg.expired(t_us) {
                actions.push(PollAction::Expire { msg_id: msg.msg_id });
                continue;
            }
            if nodes_in_cell.iter().any(|&(id, _)| id == msg.dst) {
                actions.push(PollAction::Deliver {
                    msg_id: msg.msg_id,
                    to: msg.dst,
                });
                continue;
            }
            // Release to the smallest-id connected candidate present in the
            // cell that has not carried this message before.
            let candidate = nodes_in_cell
                .iter()
                .map(|&(id, _)| id)
                .filter(|&id| {
                    id != msg.src
                        && !msg.hop_trace.contains(&id)
                        && social.are_friends(id, msg.src).unwrap_or(false)
                        && social.are_friends(id, msg.dst).unwrap_or(false)
                })
                .min();
            if let Some(c) = candidate {
                actions.push(PollAction::Release {
                    msg_id: msg.msg_id,
                    to: c,
                });
            }
        }
        actions
    }
}
