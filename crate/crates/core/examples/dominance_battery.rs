//! A reduced run of the dominance battery; `ubound verify --battery standard`
//! runs the full one.

use ubound::verify::battery::{run_battery, BatteryConfig, BatteryReport};

pub fn run_example() -> ubound::Result<BatteryReport> {
    run_battery(&BatteryConfig { n_samples: 5_000, n_chunks: 8, m_max: 2, tail_points: 4, ..Default::default() })
}

#[allow(dead_code)]
fn main() -> ubound::Result<()> {
    let r = run_example()?;
    println!("{} cases, {} enumerated exactly", r.cases.len(), r.enumerated_cases);
    println!("moments: {:?}", r.moments);
    println!("tails:   {:?}", r.tails);
    Ok(())
}
