//! Nonnegative low-degree approximations of a kernel, next to the
//! unconstrained spectral truncation.

use ubound::kernels::{degree_sweep, dplus_norm, eigen_rank_truncation, GridKernel, Marginal, NmfConfig};

pub struct Row {
    pub degree: usize,
    pub nmf_residual_l2: f64,
    pub spectral_residual_l2: f64,
    pub dplus: f64,
}

pub fn run_example() -> ubound::Result<Vec<Row>> {
    let xs: Vec<f64> = (0..12).map(|i| i as f64 / 4.0).collect();
    let m = Marginal::uniform(xs)?;
    // exp(-|x - y|) is positive definite, so both methods apply
    let k = GridKernel::from_fn(vec![m.clone(), m], |x| (-(x[0] - x[1]).abs()).exp())?;

    let sweep = degree_sweep(&k, 5, 2.0, 0, &NmfConfig::default())?;
    sweep
        .iter()
        .map(|r| {
            Ok(Row {
                degree: r.degree,
                nmf_residual_l2: r.residual_l2,
                spectral_residual_l2: eigen_rank_truncation(&k, r.degree)?.l2_residual,
                dplus: dplus_norm(&r.representation, k.marginals(), 2.0)?,
            })
        })
        .collect()
}

#[allow(dead_code)]
fn main() -> ubound::Result<()> {
    println!("{:>3} {:>12} {:>12} {:>10}", "M", "NMF |r|_2", "eig |r|_2", "D+ norm");
    for r in run_example()? {
        println!("{:>3} {:>12.3e} {:>12.3e} {:>10.4}", r.degree, r.nmf_residual_l2, r.spectral_residual_l2, r.dplus);
    }
    Ok(())
}
