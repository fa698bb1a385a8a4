//! Small numerical helpers shared across modules.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

const FACTORIAL_TABLE_LEN: usize = 4096;

fn factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(FACTORIAL_TABLE_LEN);
        let mut acc = 0.0f64;
        table.push(0.0);
        for k in 1..FACTORIAL_TABLE_LEN {
            acc += (k as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln k!`, exact summation below 4096 and `ln Γ(k+1)` above.
pub fn ln_factorial(k: usize) -> f64 {
    match factorial_table().get(k) {
        Some(v) => *v,
        None => ln_gamma(k as f64 + 1.0),
    }
}

/// Streaming `ln Σ exp(x_i)`.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSumExp {
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `n` points spaced evenly in log scale on `[lo, hi]`, endpoints included.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `(Σ w_i v_i^p)^{1/p}` for nonnegative `v`, scaled by the maximum so large
/// `p` does not overflow.
pub fn weighted_power_mean(values: &[f64], weights: &[f64], p: f64) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    let max = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    let s: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v.abs() / max).powf(p))
        .sum();
    max * s.powf(1.0 / p)
}
