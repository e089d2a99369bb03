//! Deterministic discrete-event simulator and routing library for social-
//! trust message dissemination in vehicular networks.
//!
//! The GSTR protocol forwards messages through socially connected, trusted
//! relays that are moving toward the receiver, falling back to delay-
//! tolerant cloud storage at the cell's base station when no such relay
//! exists. GPSR, T-GPSR, and GTLR baselines share the same neighbour-
//! snapshot interface for side-by-side comparison.
//!
//! Entry points: [`engine::run_scenario`] for a single run,
//! [`engine::generate_case_scenario`] for the constructed case studies, and
//! the `gstr-cli` crate for sweeps, CSV output, and plots.

pub mod baselines;
pub mod engine;
pub mod error;
pub mod gstr;
pub mod infra;
pub mod metrics;
pub mod mobility;
pub mod social;

pub use error::{Result, SimError};
