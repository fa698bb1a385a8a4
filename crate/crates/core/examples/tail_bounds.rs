//! Exponential tail bounds from a moment envelope ψ.

use ubound::gls::{
    combine_power_log, gls_norm, tail_upper, young_fenchel, ConjugateGrid, NormGrid, PsiSpec, TailCurve,
};
use ubound::bell::{bell_root, BellEvalConfig};

pub struct Summary {
    pub conjugate_at_2: f64,
    pub poisson_norm: f64,
    pub curve: TailCurve,
    pub combined: (f64, f64),
}

pub fn run_example() -> ubound::Result<Summary> {
    let grid = ConjugateGrid::default();
    let sqrt_p = PsiSpec::PowerLog { m: 2.0, r: 0.0 };

    let conjugate_at_2 = young_fenchel(|p| p * p / 4.0, &sqrt_p.support(), 2.0, &grid)?;

    // Poisson(1) has |τ|_p ≤ C p / ln p; measure C
    let cfg = BellEvalConfig::default();
    let psi = PsiSpec::PowerLog { m: 1.0, r: 1.0 };
    let poisson_norm = gls_norm(|p| bell_root(p, 1.0, &cfg).unwrap_or(f64::INFINITY), &psi, &NormGrid::default())?;

    let ys: Vec<f64> = (0..8).map(|i| 3.0 + 2.5 * i as f64).collect();
    let curve = tail_upper(&psi, &ys, poisson_norm, &grid)?;

    // two √p factors multiply to p^1
    let combined = combine_power_log(&[(2.0, 0.0), (2.0, 0.0)])?;
    Ok(Summary { conjugate_at_2, poisson_norm, curve, combined })
}

#[allow(dead_code)]
fn main() -> ubound::Result<()> {
    let s = run_example()?;
    println!("Young–Fenchel of p²/4 at u=2: {:.6}", s.conjugate_at_2);
    println!("Poisson(1): sup_p |τ|_p ln p / p = {:.4}", s.poisson_norm);
    for (y, b) in s.curve.ys.iter().zip(&s.curve.bounds) {
        println!("  P(τ ≥ {y:>5.1}) ≤ {b:.3e}");
    }
    println!("ψ₁ψ₂ for two √p envelopes: m = {}, r = {}", s.combined.0, s.combined.1);
    Ok(())
}
