//! Time-ordered event queue with a fixed tie-break so simultaneous events
//! always replay in the same order: time, then event-type priority, then
//! message id, then insertion sequence.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::gstr::MsgId;

/// Discrete-event kinds, listed in tie-break priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Advance vehicle positions by one mobility step.
    MobilityTick,
    /// Draw this tick's message injections.
    Inject,
    /// A scheduled custody transfer lands.
    TransmitComplete { msg_id: MsgId },
    /// Neighbour discovery plus one protocol decision per carried message.
    Beacon,
    /// Stations inspect their cloud partitions.
    CloudPoll,
    /// A message's ttl runs out.
    Expire { msg_id: MsgId },
}

impl EventKind {
    fn priority(&self) -> u8 {
        match self {
            EventKind::MobilityTick => 0,
            EventKind::Inject => 1,
            EventKind::TransmitComplete { .. } => 2,
            EventKind::Beacon => 3,
            EventKind::CloudPoll => 4,
            EventKind::Expire { .. } => 5,
        }
    }

    fn msg_id(&self) -> MsgId {
        match self {
            EventKind::TransmitComplete { msg_id } | EventKind::Expire { msg_id } => *msg_id,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time_us: u64,
    pub kind: EventKind,
    seq: u64,
}

impl Event {
    fn key(&self) -> (u64, u8, MsgId, u64) {
        (self.time_us, self.kind.priority(), self.kind.msg_id(), self.seq)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the BinaryHeap pops the earliest event first.
        other.key().cmp(&self.key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> EventQueue {
        EventQueue::default()
    }

    pub fn push(&mut self, time_us: u64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time_us, kind, seq });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_order() {
        let mut q = EventQueue::new();
        q.push(300, EventKind::Beacon);
        q.push(100, EventKind::Beacon);
        q.push(200, EventKind::Beacon);
        let times: Vec<u64> = std::iter::from_fn(|| q.pop()).map(|e| e.time_us).collect();
        assert_eq!(times, vec![100, 200, 300]);
    }

    #[test]
    fn simultaneous_events_follow_type_priority() {
        let mut q = EventQueue::new();
        q.push(100, EventKind::Expire { msg_id: 1 });
        q.push(100, EventKind::Beacon);
        q.push(100, EventKind::MobilityTick);
        q.push(100, EventKind::Inject);
        let kinds: Vec<EventKind> = std::iter::from_fn(|| q.pop()).map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::MobilityTick,
                EventKind::Inject,
                EventKind::Beacon,
                EventKind::Expire { msg_id: 1 },
            ]
        );
    }

    #[test]
    fn equal_kind_ties_break_by_msg_then_seq() {
        let mut q = EventQueue::new();
        q.push(100, EventKind::TransmitComplete { msg_id: 9 });
        q.push(100, EventKind::TransmitComplete { msg_id: 2 });
        q.push(100, EventKind::TransmitComplete { msg_id: 2 });
        let first = q.pop().unwrap();
        assert_eq!(first.kind, EventKind::TransmitComplete { msg_id: 2 });
        assert_eq!(first.seq, 1);
        assert_eq!(q.pop().unwrap().seq, 2);
        assert_eq!(q.pop().unwrap().kind, EventKind::TransmitComplete { msg_id: 9 });
    }
}
