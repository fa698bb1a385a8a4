//! For a product kernel the bound tracks `Π_s |g_s|_p` within constant factors.

use ubound::kernels::{GridKernel, Marginal};
use ubound::multisum::{PreparedKernel, WBoundConfig};
use ubound::verify::{ratio_check, DistributionSpec, RatioReport};

pub fn run_example() -> ubound::Result<RatioReport> {
    let m: Marginal = DistributionSpec::Exponential { rate: 1.0 }.discretize(12, Some(4.0))?;
    let k = GridKernel::from_fn(vec![m.clone(), m], |x| (0.3 * x[0]).exp() * (1.0 + x[1]))?;
    let pk = PreparedKernel::from_grid(k, WBoundConfig::default())?;
    assert!(pk.is_rank_one());
    let shapes = vec![vec![1, 1], vec![4, 4], vec![30, 30]];
    ratio_check(&pk, &shapes, &[2.0, 4.0, 8.0, 16.0])
}

#[allow(dead_code)]
fn main() -> ubound::Result<()> {
    let r = run_example()?;
    for row in &r.rows {
        println!("p={:>4} ν={:.4}  |S_1|_p/ν={:.3}  bound/ν={:.3}", row.p, row.nu, row.lower_ratio, row.upper_ratio);
    }
    println!("lower ratio ≥ {:.3}, upper ratio ≤ {:.3}", r.lower_min, r.upper_max);
    Ok(())
}
