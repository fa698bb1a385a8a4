//! Moment bounds for sums of independent nonnegative random variables.
//!
//! For `η_1, …, η_n ≥ 0` independent with `m_j(k) = E η_j^k`:
//!
//! | Bound | Formula |
//! |-------|---------|
//! | [`triangle_bound`] | `|Σ η_j|_p ≤ Σ m_j(p)^{1/p}` |
//! | [`rosenthal_bell`] | `E(Σ η_j)^p ≤ B(p) · max{Σ m_j(p), (Σ m_j(1))^p}` |
//! | [`schechtman_sup`] | exact `sup E(Σ η_j)^p` over `Σ m_j(1) = a`, `Σ m_j(p) = b` |
//! | [`theta_pn`] | `|n^{-1} Σ η_j|_p ≤ Θ_{p,n} = min(Z_{p,n}, V_{p,n})` |
//!
//! `B(p)` always means `B(p, 1)`.

use serde::{Deserialize, Serialize};

use crate::bell::{bell_root, log_bell, BellEvalConfig};
use crate::{Error, Result};

/// Tolerance for the Lyapunov consistency check `m(1) ≤ m(p)^{1/p}`.
pub const LYAPUNOV_TOL: f64 = 1e-12;

/// First and `p`-th moments of `n` independent nonnegative summands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    p: f64,
    m1: Vec<f64>,
    mp: Vec<f64>,
}

impl MomentTable {
    pub fn new(p: f64, m1: Vec<f64>, mp: Vec<f64>) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!("moment order must be >= 1, got {p}")));
        }
        if m1.is_empty() || m1.len() != mp.len() {
            return Err(Error::InvalidInput(format!(
                "moment lists must be nonempty and equally long ({} vs {})",
                m1.len(),
                mp.len()
            )));
        }
        for (j, (&a, &b)) in m1.iter().zip(&mp).enumerate() {
            if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidInput(format!("moments of summand {j} must be finite and >= 0")));
            }
            if a > b.powf(1.0 / p) + LYAPUNOV_TOL {
                return Err(Error::InvalidInput(format!(
                    "summand {j}: m(1)={a} exceeds m(p)^(1/p)={}, impossible for a nonnegative variable",
                    b.powf(1.0 / p)
                )));
            }
        }
        Ok(Self { p, m1, mp })
    }

    /// `n` identically distributed summands.
    pub fn iid(p: f64, n: usize, m1: f64, mp: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("summand count must be >= 1".into()));
        }
        Self::new(p, vec![m1; n], vec![mp; n])
    }

    pub fn n(&self) -> usize {
        self.m1.len()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m1(&self) -> &[f64] {
        &self.m1
    }

    pub fn mp(&self) -> &[f64] {
        &self.mp
    }

    fn sum_m1(&self) -> f64 {
        self.m1.iter().sum()
    }

    fn sum_mp(&self) -> f64 {
        self.mp.iter().sum()
    }
}

/// `Z_{p,n}`, `V_{p,n}` and `Θ_{p,n} = min(Z, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaBreakdown {
    pub z: f64,
    pub v: f64,
    pub theta: f64,
}

/// `Σ_j m_j(p)^{1/p}`, a bound on the unnormalized `|Σ η_j|_p`.
pub fn triangle_bound(t: &MomentTable) -> f64 {
    t.mp.iter().map(|m| m.powf(1.0 / t.p)).sum()
}

/// `B(p,1) · max(Σ m_j(p), (Σ m_j(1))^p)`, a bound on `E(Σ η_j)^p` itself.
pub fn rosenthal_bell(t: &MomentTable, cfg: &BellEvalConfig) -> Result<f64> {
    require_p_ge_2(t.p)?;
    let b = log_bell(t.p, 1.0, cfg)?.value();
    Ok(b * t.sum_mp().max(t.sum_m1().powf(t.p)))
}

/// Value of the extremal moment over a moment class, with the Poisson
/// parameter it corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchechtmanValue {
    pub value: f64,
    pub mu: f64,
    /// `b < a^p`: a single summand cannot realise the class (more summands may).
    pub single_summand_infeasible: bool,
}

/// `sup E(Σ η_j)^p = (b/a)^{p/(p−1)} · B(p, μ)` with `μ = a^{p/(p−1)} b^{1/(1−p)}`,
/// over independent `η_j ≥ 0` with `Σ E η_j = a`, `Σ E η_j^p = b`.
///
/// The extremal configuration is a compound of `c · Poisson(μ)` with
/// `c = (b/a)^{1/(p−1)}`.
pub fn schechtman_sup(a: f64, b: f64, p: f64, cfg: &BellEvalConfig) -> Result<SchechtmanValue> {
    require_p_ge_2(p)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("schechtman_sup needs a, b > 0, got a={a}, b={b}")));
    }
    let q = p / (p - 1.0);
    let mu = a.powf(q) * b.powf(1.0 / (1.0 - p));
    let ln_value = q * (b / a).ln() + log_bell(p, mu, cfg)?.ln();
    Ok(SchechtmanValue {
        value: ln_value.exp(),
        mu,
        single_summand_infeasible: b < a.powf(p),
    })
}

/// `Θ_{p,n}` for the summands in `t`.
pub fn theta_pn(t: &MomentTable, cfg: &BellEvalConfig) -> Result<ThetaBreakdown> {
    require_p_ge_2(t.p)?;
    let b_root = bell_root(t.p, 1.0, cfg)?;
    Ok(theta_with_root(t, b_root))
}

fn theta_with_root(t: &MomentTable, b_root: f64) -> ThetaBreakdown {
    let n = t.n() as f64;
    let z = triangle_bound(t) / n;
    let v = b_root * t.sum_mp().powf(1.0 / t.p).max(t.sum_m1()) / n;
    ThetaBreakdown { z, v, theta: z.min(v) }
}

/// `Θ_{p,n}` for `n` i.i.d. copies of a variable with moments `m1`, `mp`,
/// given `B(p,1)^{1/p}`. Avoids materialising the table.
pub fn theta_iid(p: f64, n: usize, m1: f64, mp: f64, b_root: f64) -> ThetaBreakdown {
    let nf = n as f64;
    let z = mp.powf(1.0 / p);
    let v = b_root * (nf * mp).powf(1.0 / p).max(nf * m1) / nf;
    ThetaBreakdown { z, v, theta: z.min(v) }
}

/// `max` of `Θ_{p,n}` over the supplied tables.
pub fn theta_sup(tables: &[MomentTable], cfg: &BellEvalConfig) -> Result<f64> {
    if tables.is_empty() {
        return Err(Error::InvalidInput("theta_sup needs at least one table".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for t in tables {
        best = best.max(theta_pn(t, cfg)?.theta);
    }
    Ok(best)
}

/// `max_{n ∈ ns} Θ_{p,n}` for i.i.d. summands.
pub fn theta_sup_iid(p: f64, ns: impl IntoIterator<Item = usize>, m1: f64, mp: f64, cfg: &BellEvalConfig) -> Result<f64> {
    require_p_ge_2(p)?;
    let b_root = bell_root(p, 1.0, cfg)?;
    let best = ns
        .into_iter()
        .filter(|&n| n >= 1)
        .map(|n| theta_iid(p, n, m1, mp, b_root).theta)
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::InvalidInput("theta_sup_iid needs a nonempty n-range".into()));
    }
    Ok(best)
}

fn require_p_ge_2(p: f64) -> Result<()> {
    if p >= 2.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("this bound needs p >= 2, got {p}")))
    }
}

/// JSON payload of `bound one-dim`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OneDimReport {
    pub z: f64,
    pub v: f64,
    pub theta: f64,
    pub rosenthal: f64,
    pub triangle: f64,
}

pub fn one_dim_report(t: &MomentTable, cfg: &BellEvalConfig) -> Result<OneDimReport> {
    let th = theta_pn(t, cfg)?;
    Ok(OneDimReport {
        z: th.z,
        v: th.v,
        theta: th.theta,
        rosenthal: rosenthal_bell(t, cfg)?,
        triangle: triangle_bound(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> BellEvalConfig {
        BellEvalConfig::default()
    }

    /// Exact `E(Σ η_j)^p` by enumerating every outcome of finite-support summands.
    fn enumerate_moment(vars: &[Vec<(f64, f64)>], p: i32) -> f64 {
        fn rec(vars: &[Vec<(f64, f64)>], acc_sum: f64, acc_prob: f64, p: i32) -> f64 {
            match vars.split_first() {
                None => acc_prob * acc_sum.powi(p),
                Some((head, rest)) => head
                    .iter()
                    .map(|&(x, q)| rec(rest, acc_sum + x, acc_prob * q, p))
                    .sum(),
            }
        }
        rec(vars, 0.0, 1.0, p)
    }

    #[test]
    fn triangle_examples() {
        let t = MomentTable::iid(2.0, 3, 1.0, 1.0).unwrap();
        assert_eq!(triangle_bound(&t), 3.0);
        let t = MomentTable::new(3.0, vec![1.0], vec![6.0]).unwrap();
        assert_relative_eq!(triangle_bound(&t), 6f64.powf(1.0 / 3.0));
        let t = MomentTable::iid(3.0, 2, 1.0, 6.0).unwrap();
        assert!((triangle_bound(&t) - 3.634).abs() < 1e-3);
    }

    #[test]
    fn rosenthal_examples() {
        let t = MomentTable::iid(2.0, 3, 1.0, 1.0).unwrap();
        assert_relative_eq!(rosenthal_bell(&t, &cfg()).unwrap(), 18.0, max_relative = 1e-12);

        let bern = vec![(0.0, 0.5), (1.0, 0.5)];
        let exact = enumerate_moment(&[bern.clone(), bern], 2);
        assert_relative_eq!(exact, 1.5, max_relative = 1e-14);
        let t = MomentTable::iid(2.0, 2, 0.5, 0.5).unwrap();
        let bound = rosenthal_bell(&t, &cfg()).unwrap();
        assert_relative_eq!(bound, 2.0, max_relative = 1e-12);

        let q = 0.1;
        let bern = vec![(0.0, 1.0 - q), (1.0, q)];
        let exact = enumerate_moment(&vec![bern; 10], 2);
        assert_relative_eq!(exact, 1.9, max_relative = 1e-12);
        let t = MomentTable::iid(2.0, 10, q, q).unwrap();
        let bound = rosenthal_bell(&t, &cfg()).unwrap();
        assert_relative_eq!(bound, 2.0, max_relative = 1e-12);
        assert!(bound / exact <= 1.12);
    }

    #[test]
    fn schechtman_examples() {
        let s = schechtman_sup(1.0, 1.0, 2.0, &cfg()).unwrap();
        assert_relative_eq!(s.mu, 1.0);
        assert_relative_eq!(s.value, 2.0, max_relative = 1e-12);
        let c: f64 = 1.7;
        for p in [2.0, 3.0, 4.5] {
            let s = schechtman_sup(c, c.powf(p), p, &cfg()).unwrap();
            assert_relative_eq!(s.mu, 1.0, max_relative = 1e-12);
            let b = log_bell(p, 1.0, &cfg()).unwrap().value();
            assert_relative_eq!(s.value, c.powf(p) * b, max_relative = 1e-10);
            assert!(s.value >= c.powf(p));
        }
        assert!(schechtman_sup(2.0, 1.0, 2.0, &cfg()).unwrap().single_summand_infeasible);
        assert!(schechtman_sup(0.0, 1.0, 2.0, &cfg()).is_err());
        assert!(schechtman_sup(1.0, 1.0, 1.5, &cfg()).is_err());
    }

    #[test]
    fn schechtman_dominates_two_point_members() {
        // Two-point families x·Bernoulli(q), n ≤ 6 summands.
        for n in 1..=6 {
            for &(x, q) in &[(1.0, 0.5), (3.0, 0.1), (0.5, 0.9), (10.0, 0.01)] {
                for p in [2, 3, 4] {
                    let var = vec![(0.0, 1.0 - q), (x, q)];
                    let exact = enumerate_moment(&vec![var; n], p);
                    let a = n as f64 * x * q;
                    let b = n as f64 * x.powi(p) * q;
                    let s = schechtman_sup(a, b, p as f64, &cfg()).unwrap().value;
                    assert!(exact <= s * (1.0 + 1e-9), "n={n} x={x} q={q} p={p}");
                }
            }
        }
    }

    #[test]
    fn theta_examples() {
        let t = MomentTable::iid(2.0, 4, 1.0, 1.0).unwrap();
        let th = theta_pn(&t, &cfg()).unwrap();
        assert_relative_eq!(th.z, 1.0);
        assert_relative_eq!(th.v, 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(th.theta, 1.0);

        let t = MomentTable::iid(3.0, 100, 1.0, 6.0).unwrap();
        let th = theta_pn(&t, &cfg()).unwrap();
        assert_relative_eq!(th.z, 6f64.powf(1.0 / 3.0), max_relative = 1e-12);
        assert_relative_eq!(th.v, 5f64.powf(1.0 / 3.0), max_relative = 1e-12);
        assert_relative_eq!(th.theta, 5f64.powf(1.0 / 3.0), max_relative = 1e-12);

        let t = MomentTable::new(3.0, vec![1.0], vec![6.0]).unwrap();
        let th = theta_pn(&t, &cfg()).unwrap();
        assert!(th.v >= th.z);
        assert_eq!(th.theta, th.z);

        let iid = theta_iid(3.0, 100, 1.0, 6.0, bell_root(3.0, 1.0, &cfg()).unwrap());
        assert_relative_eq!(iid.theta, th.theta.min(5f64.powf(1.0 / 3.0)), max_relative = 1e-12);
    }

    #[test]
    fn theta_sup_examples() {
        let tables: Vec<_> = (1..=50).map(|n| MomentTable::iid(2.0, n, 1.0, 1.0).unwrap()).collect();
        assert_relative_eq!(theta_sup(&tables, &cfg()).unwrap(), 1.0);
        let s = theta_sup_iid(3.0, 1..=200, 1.0, 6.0, &cfg()).unwrap();
        assert_relative_eq!(s, 6f64.powf(1.0 / 3.0), max_relative = 1e-12);
        let single = MomentTable::iid(3.0, 7, 1.0, 6.0).unwrap();
        assert_eq!(
            theta_sup(std::slice::from_ref(&single), &cfg()).unwrap(),
            theta_pn(&single, &cfg()).unwrap().theta
        );
        assert!(theta_sup(&[], &cfg()).is_err());
    }

    #[test]
    fn validation_rejects_impossible_moments() {
        assert!(MomentTable::new(2.0, vec![2.0], vec![1.0]).is_err());
        assert!(MomentTable::new(2.0, vec![1.0, 1.0], vec![1.0]).is_err());
        assert!(MomentTable::new(2.0, vec![], vec![]).is_err());
        assert!(MomentTable::iid(2.0, 0, 1.0, 1.0).is_err());
        assert!(MomentTable::new(2.0, vec![-1.0], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn theta_never_exceeds_triangle(n in 1usize..20, m1 in 0.0f64..5.0, extra in 0.0f64..50.0, p in 2.0f64..8.0) {
            let mp = m1.powf(p) + extra;
            let t = MomentTable::iid(p, n, m1, mp).unwrap();
            let th = theta_pn(&t, &cfg()).unwrap();
            prop_assert!(th.theta <= triangle_bound(&t) / n as f64 * (1.0 + 1e-12));
        }

        #[test]
        fn rosenthal_scales_as_c_to_the_p(c in 0.1f64..10.0, m1 in 0.1f64..3.0, extra in 0.0f64..10.0, p in 2.0f64..6.0) {
            let mp = m1.powf(p) + extra;
            let t = MomentTable::iid(p, 3, m1, mp).unwrap();
            let scaled = MomentTable::iid(p, 3, c * m1, c.powf(p) * mp).unwrap();
            let a = rosenthal_bell(&t, &cfg()).unwrap();
            let b = rosenthal_bell(&scaled, &cfg()).unwrap();
            prop_assert!((b / a - c.powf(p)).abs() <= 1e-9 * c.powf(p));
        }
    }
}
