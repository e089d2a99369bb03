//! Command-line front end for the simulator: configuration parsing, density
//! sweeps, CSV output, and SVG charts.

pub mod config;
pub mod plot;
pub mod sweep;

pub use config::{parse_scenario_config, parse_sweep_spec, scenario_to_text, ConfigError, SweepSpec};
pub use plot::{render_plot, Metric};
pub use sweep::{run_sweep, sweep_points};
