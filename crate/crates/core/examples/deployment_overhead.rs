//! Overhead of the vehicle/RSU/edge/cloud deployment under the default
//! network configuration, plus a small density and attack-rate sweep.
//!
//!     cargo run --example deployment_overhead

use hierids::deploysim::{build_topology, run_sim, sweep, sweep_csv, SimClassifier, SimConfig, SweepRanges, TierTopology};

fn main() -> hierids::Result<()> {
    let config = SimConfig {
        duration_s: 600.0,
        seed: 1,
        ..SimConfig::default()
    };
    let topo = TierTopology::default();
    let state = build_topology(&config, &topo)?;
    let report = run_sim(&state, &SimClassifier::Stub)?;
    print!("{}", report.render());

    let ranges = SweepRanges {
        densities: vec![90.0, 180.0],
        durations: vec![600.0],
        attack_rates: vec![0.0, 0.15, 0.3],
    };
    print!("\n{}", sweep_csv(&sweep(&config, &topo, &ranges)?));
    Ok(())
}
