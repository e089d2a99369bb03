//! Density-sweep runner: one scenario per (density, case, protocol, seed),
//! optionally dispatched across a thread pool. Results are independent of
//! the parallelism level.

use gstr_core::engine::{run_scenario, ScenarioConfig};
use gstr_core::metrics::RunRecord;
use rayon::prelude::*;

use crate::config::SweepSpec;

/// Expand a sweep into concrete per-run configurations.
///
/// Densities vary slowest, so appending a density extends the point list
/// without renumbering existing points; each point's seed is the base seed
/// plus its index.
pub fn sweep_points(spec: &SweepSpec) -> Vec<ScenarioConfig> {
    let mut points = Vec::new();
    let mut index: u64 = 0;
    for &density in &spec.densities {
        for &case in &spec.cases {
            for &protocol in &spec.protocols {
                for _ in 0..spec.seeds_per_point {
                    let mut cfg = spec.base.clone();
                    cfg.num_nodes = density;
                    cfg.case = case;
                    cfg.protocol = protocol;
                    cfg.seed = spec.base.seed.wrapping_add(index);
                    points.push(cfg);
                    index += 1;
                }
            }
        }
    }
    points
}

/// Run every sweep point and collect one record per run. A single failing
/// run aborts the sweep, echoing the failing configuration.
pub fn run_sweep(spec: &SweepSpec, parallelism: usize) -> Result<Vec<RunRecord>, String> {
    let points = sweep_points(spec);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| format!("failed to build thread pool: {e}"))?;
    pool.install(|| {
        points
            .par_iter()
            .map(|cfg| {
                let result = run_scenario(cfg.clone()).map_err(|e| {
                    format!(
                        "run failed ({}, case {}, n={}, seed {}): {e}",
                        cfg.protocol.as_str(),
                        cfg.case.as_str(),
                        cfg.num_nodes,
                        cfg.seed
                    )
                })?;
                Ok(RunRecord::from_accumulator(
                    cfg.protocol.as_str(),
                    cfg.num_nodes,
                    cfg.case.as_str(),
                    cfg.seed,
                    &result.acc,
                ))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gstr_core::engine::{CaseKind, Protocol};

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            densities: vec![10, 20],
            protocols: vec![Protocol::Gstr, Protocol::Gpsr],
            cases: vec![CaseKind::Free],
            seeds_per_point: 2,
            base: ScenarioConfig {
                sim_duration: 20.0,
                ttl: 8.0,
                social_model: gstr_core::social::GraphModel::ErdosRenyi { p: 0.3 },
                ..ScenarioConfig::default()
            },
        }
    }

    #[test]
    fn cartesian_point_count() {
        let spec = tiny_spec();
        // 2 densities x 2 protocols x 1 case x 2 seeds.
        assert_eq!(sweep_points(&spec).len(), 8);
    }

    #[test]
    fn appending_a_density_preserves_existing_seeds() {
        let spec = tiny_spec();
        let before = sweep_points(&spec);
        let mut extended = spec.clone();
        extended.densities.push(30);
        let after = sweep_points(&extended);
        assert_eq!(&after[..before.len()], &before[..]);
    }

    #[test]
    fn parallelism_does_not_change_records() {
        let spec = tiny_spec();
        let serial = run_sweep(&spec, 1).unwrap();
        let parallel = run_sweep(&spec, 8).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 8);
    }
}
