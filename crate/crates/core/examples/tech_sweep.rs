//! Sweep one technology axis on the case-study system and print the CSV table.
//!
//! `cargo run --release --example tech_sweep [axis] [values...]`

use crossflow::config::parse_strategy;
use crossflow::perf::PredictOptions;
use crossflow::presets;
use crossflow::sweep::{run_sweep, to_csv, SweepAxis, SweepSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let axis: SweepAxis = args.next().unwrap_or_else(|| "logic_node".into()).parse()?;
    let mut values: Vec<String> = args.collect();
    if values.is_empty() {
        values = match axis {
            SweepAxis::LogicNode => presets::LOGIC_NODES.map(String::from).to_vec(),
            SweepAxis::HbmBandwidth => presets::HBM_PRESETS.map(|p| p.0.to_string()).to_vec(),
            SweepAxis::NetworkBandwidth => presets::NETWORK_PRESETS.map(|p| p.0.to_string()).to_vec(),
            SweepAxis::NodesPerPackage => ["1", "2", "4", "8"].map(String::from).to_vec(),
        };
    }
    let cfg = presets::case_study_config();
    let spec = SweepSpec { axis, values, resweep: false };
    let rows = run_sweep(&cfg, &parse_strategy("RC-8-8-d8-p1")?, &spec, &PredictOptions::default())?;
    print!("{}", to_csv(&rows));
    Ok(())
}
