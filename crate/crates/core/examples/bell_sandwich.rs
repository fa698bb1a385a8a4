//! Poisson moments `B(p, β)` and the envelopes around them.
//!
//! Run with `cargo run --example bell_sandwich`.

use ubound::bell::{bell_root, sandwich_point, sandwich_report, BellEvalConfig, BellSandwich};

pub struct Summary {
    pub points: Vec<BellSandwich>,
    pub violations: usize,
    pub ratio_bracket: Option<(f64, f64)>,
}

pub fn run_example() -> ubound::Result<Summary> {
    let cfg = BellEvalConfig::default();
    let points = [(2.0, 1.0), (3.0, 1.0), (10.0, 1.0), (8.0, 0.5), (4.0, 8.0)]
        .iter()
        .map(|&(p, b)| sandwich_point(p, b, &cfg))
        .collect::<ubound::Result<Vec<_>>>()?;

    // non-integer orders work too
    let _ = bell_root(2.5, 1.0, &cfg)?;

    let ps: Vec<f64> = (1..=20).map(f64::from).collect();
    let report = sandwich_report(&ps, &[0.25, 1.0, 4.0], &cfg)?;
    Ok(Summary { points, violations: report.violations.len(), ratio_bracket: report.ratio_bracket })
}

#[allow(dead_code)]
fn main() -> ubound::Result<()> {
    let s = run_example()?;
    println!("{:>5} {:>5} {:>14} {:>10} {:>10}", "p", "β", "B(p,β)", "B^(1/p)", "g_β");
    for r in &s.points {
        println!("{:>5} {:>5} {:>14.6} {:>10.6} {:>10.6}", r.p, r.beta, r.b, r.b_root, r.g_upper);
    }
    println!("violations over the 60-point grid: {}", s.violations);
    if let Some((lo, hi)) = s.ratio_bracket {
        println!("B^(1/p)/β in [{lo:.4}, {hi:.4}] for p ≤ 2β");
    }
    Ok(())
}
