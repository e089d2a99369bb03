//! The three performance metrics and their CSV serialization.
//!
//! Delivery ratio is delivered over sent (0 when nothing was sent). Hop and
//! delay averages run over delivered messages only; a message's hop count is
//! its number of intermediate vehicle relays, so a direct delivery counts 0
//! and a pure cloud path counts 0 as well.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SimError};

/// Per-run tallies feeding the metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsAccumulator {
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_expired: u64,
    /// Relay count of each delivered message.
    pub relay_counts: Vec<u32>,
    /// End-to-end delay of each delivered message, seconds.
    pub delays: Vec<f64>,
}

impl MetricsAccumulator {
    pub fn record_sent(&mut self) {
        self.messages_sent += 1;
    }

    pub fn record_expired(&mut self) {
        self.messages_expired += 1;
    }

    pub fn record_delivered(&mut self, relays: u32, delay_s: f64) {
        self.messages_delivered += 1;
        self.relay_counts.push(relays);
        self.delays.push(delay_s);
    }
}

/// Delivered over sent; 0 by convention when nothing was sent.
pub fn delivery_ratio(acc: &MetricsAccumulator) -> f64 {
    if acc.messages_sent == 0 {
        0.0
    } else {
        acc.messages_delivered as f64 / acc.messages_sent as f64
    }
}

/// Mean relay count over delivered messages; 0 when none were delivered.
pub fn avg_hops(acc: &MetricsAccumulator) -> f64 {
    if acc.relay_counts.is_empty() {
        0.0
    } else {
        acc.relay_counts.iter().map(|&c| c as f64).sum::<f64>() / acc.relay_counts.len() as f64
    }
}

/// Mean end-to-end delay over delivered messages; 0 when none were
/// delivered (check `messages_delivered` to tell the cases apart).
pub fn avg_e2e_delay(acc: &MetricsAccumulator) -> f64 {
    if acc.delays.is_empty() {
        0.0
    } else {
        acc.delays.iter().sum::<f64>() / acc.delays.len() as f64
    }
}

/// One row of sweep output: a single (protocol, case, density, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub protocol: String,
    pub num_nodes: u32,
    pub case: String,
    pub seed: u64,
    pub delivery_ratio: f64,
    pub avg_hops: f64,
    pub avg_e2e_delay_s: f64,
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_expired: u64,
}

impl RunRecord {
    pub fn from_accumulator(
        protocol: &str,
        num_nodes: u32,
        case: &str,
        seed: u64,
        acc: &MetricsAccumulator,
    ) -> RunRecord {
        RunRecord {
            protocol: protocol.to_string(),
            num_nodes,
            case: case.to_string(),
            seed,
            delivery_ratio: delivery_ratio(acc),
            avg_hops: avg_hops(acc),
            avg_e2e_delay_s: avg_e2e_delay(acc),
            messages_sent: acc.messages_sent,
            messages_delivered: acc.messages_delivered,
            messages_expired: acc.messages_expired,
        }
    }

    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{},{},{}",
            self.protocol,
            self.num_nodes,
            self.case,
            self.seed,
            self.delivery_ratio,
            self.avg_hops,
            self.avg_e2e_delay_s,
            self.messages_sent,
            self.messages_delivered,
            self.messages_expired
        )
    }
}

pub const CSV_HEADER: &str = "protocol,num_nodes,case,seed,delivery_ratio,avg_hops,avg_e2e_delay_s,messages_sent,messages_delivered,messages_expired";

/// Render records as CSV, sorted by (protocol, case, num_nodes, seed).
/// Ratios and delays carry six decimal places so output is bit-stable.
pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.protocol
            .cmp(&b.protocol)
            .then(a.case.cmp(&b.case))
            .then(a.num_nodes.cmp(&b.num_nodes))
            .then(a.seed.cmp(&b.seed))
    });
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in sorted {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Write the sweep CSV to `path`.
pub fn write_records(records: &[RunRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(SimError::InvalidParameter(
            "no records to write".into(),
        ));
    }
    std::fs::write(path, records_to_csv(records))?;
    Ok(())
}

/// Parse a CSV produced by [`write_records`], for the plot command.
pub fn read_records(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        _ => {
            return Err(SimError::Parse {
                line: 1,
                msg: "missing or unexpected CSV header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(SimError::Parse {
                line: idx + 1,
                msg: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let err = |what: &str| SimError::Parse {
            line: idx + 1,
            msg: format!("bad {what} field"),
        };
        out.push(RunRecord {
            protocol: fields[0].to_string(),
            num_nodes: fields[1].parse().map_err(|_| err("num_nodes"))?,
            case: fields[2].to_string(),
            seed: fields[3].parse().map_err(|_| err("seed"))?,
            delivery_ratio: fields[4].parse().map_err(|_| err("delivery_ratio"))?,
            avg_hops: fields[5].parse().map_err(|_| err("avg_hops"))?,
            avg_e2e_delay_s: fields[6].parse().map_err(|_| err("avg_e2e_delay_s"))?,
            messages_sent: fields[7].parse().map_err(|_| err("messages_sent"))?,
            messages_delivered: fields[8].parse().map_err(|_| err("messages_delivered"))?,
            messages_expired: fields[9].parse().map_err(|_| err("messages_expired"))?,
        });
    }
    Ok(out)
}
