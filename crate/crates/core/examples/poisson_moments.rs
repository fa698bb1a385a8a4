//! Checks `B(p, β)` against sampled Poisson variables.

use ubound::bell::{bell_root, BellEvalConfig};
use ubound::verify::{mc_raw_moments, DistributionSpec, McConfig};

pub struct Row {
    pub p: f64,
    pub exact_root: f64,
    pub estimate: f64,
    pub stderr: f64,
}

pub fn run_example() -> ubound::Result<Vec<Row>> {
    let cfg = BellEvalConfig::default();
    let mc = McConfig { n_samples: 200_000, seed: 3, p_list: vec![2.0, 3.0, 4.0], ..Default::default() };
    let dist = DistributionSpec::Poisson { beta: 1.5 };
    mc_raw_moments(&dist, &mc)?
        .into_iter()
        .map(|e| Ok(Row { p: e.p, exact_root: bell_root(e.p, 1.5, &cfg)?, estimate: e.root, stderr: e.stderr }))
        .collect()
}

#[allow(dead_code)]
fn main() -> ubound::Result<()> {
    for r in run_example()? {
        let z = (r.estimate - r.exact_root) / r.stderr;
        println!("p={} exact {:.6} sampled {:.6} ± {:.6} (z = {z:+.2})", r.p, r.exact_root, r.estimate, r.stderr);
    }
    Ok(())
}
