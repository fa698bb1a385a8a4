//! Poisson moments `B(p, β) = E τ[β]^p` and the envelopes around them.
//!
//! The series `e^{-β} Σ k^p β^k / k!` is summed in log space so that `k^p`
//! never overflows; truncation uses the geometric envelope that holds once
//! the term ratio drops below one half. Around `B^{1/p}` the module provides
//! an exponential-moment upper envelope [`upper_g`], the single-term lower
//! bound [`lower_h0`], its continuous Stirling relaxation [`lower_h`] and the
//! large-`p/β` closed form [`asym_upper`].

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::optimize::{golden_section_max, golden_section_min};
use crate::special::{ln_factorial, log_space, LogSumExp};
use crate::{Error, Result};

/// A positive quantity stored by its natural logarithm; `-∞` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogReal {
    pub log_magnitude: f64,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal { log_magnitude: f64::NEG_INFINITY };

    pub fn from_ln(log_magnitude: f64) -> Self {
        Self { log_magnitude }
    }

    pub fn from_value(x: f64) -> Self {
        assert!(x >= 0.0, "LogReal holds nonnegative values");
        Self { log_magnitude: x.ln() }
    }

    pub fn ln(self) -> f64 {
        self.log_magnitude
    }

    pub fn value(self) -> f64 {
        self.log_magnitude.exp()
    }

    /// `self^(1/p)`.
    pub fn root(self, p: f64) -> LogReal {
        LogReal { log_magnitude: self.log_magnitude / p }
    }
}

impl std::ops::Mul for LogReal {
    type Output = LogReal;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: LogReal) -> LogReal {
        LogReal { log_magnitude: self.log_magnitude + rhs.log_magnitude }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellEvalConfig {
    /// Relative truncation tolerance on the series remainder.
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for BellEvalConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_terms: 100_000 }
    }
}

impl BellEvalConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) || self.max_terms == 0 {
            return Err(Error::InvalidInput(format!(
                "BellEvalConfig needs 0 < rel_tol < 1 and max_terms >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// `ln` of the `k`-th series term `e^{-β} k^p β^k / k!` for `k ≥ 1`.
fn ln_term(k: usize, p: f64, ln_beta: f64, beta: f64) -> f64 {
    let kf = k as f64;
    p * kf.ln() + kf * ln_beta - ln_factorial(k) - beta
}

/// `ln B(p, β)`.
pub fn log_bell(p: f64, beta: f64, cfg: &BellEvalConfig) -> Result<LogReal> {
    cfg.validate()?;
    if !(p >= 0.0) || !(beta > 0.0) || !p.is_finite() || !beta.is_finite() {
        return Err(Error::Domain(format!("log_bell needs p >= 0 and beta > 0, got p={p}, beta={beta}")));
    }
    let ln_beta = beta.ln();
    let mut acc = LogSumExp::default();
    if p == 0.0 {
        // 0^0 = 1 contributes the k = 0 pmf mass.
        acc.push(-beta);
    }
    for k in 1..=cfg.max_terms {
        let t = ln_term(k, p, ln_beta, beta);
        acc.push(t);
        let kf = k as f64;
        let ln_ratio = p * ((kf + 1.0) / kf).ln() + ln_beta - (kf + 1.0).ln();
        if ln_ratio < -std::f64::consts::LN_2 {
            let r = ln_ratio.exp();
            let ln_remainder = t + (r / (1.0 - r)).ln();
            if ln_remainder < cfg.rel_tol.ln() + acc.value() {
                return Ok(LogReal::from_ln(acc.value()));
            }
        }
    }
    Err(Error::NonConvergent { p, beta, max_terms: cfg.max_terms })
}

/// `B(p, β)^{1/p}` for `p ≥ 1`.
pub fn bell_root(p: f64, beta: f64, cfg: &BellEvalConfig) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("bell_root needs p >= 1, got {p}")));
    }
    Ok(log_bell(p, beta, cfg)?.root(p).value())
}

/// `ln ζ(k)` for the Stirling majorant `ζ(k) = √(2πk) (k/e)^k e^{1/(12k)} ≥ k!`.
pub fn ln_stirling_zeta(k: u64) -> f64 {
    let kf = k as f64;
    0.5 * (2.0 * PI * kf).ln() + kf * (kf.ln() - 1.0) + 1.0 / (12.0 * kf)
}

/// `ζ(k) = √(2πk) (k/e)^k e^{1/(12k)}`; overflows to `+∞` past `k ≈ 170`.
pub fn stirling_zeta(k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("stirling_zeta needs k >= 1".into()));
    }
    if k > 20 {
        return Ok(ln_stirling_zeta(k).exp());
    }
    let kf = k as f64;
    Ok((2.0 * PI * kf).sqrt() * (kf / E).powf(kf) * (1.0 / (12.0 * kf)).exp())
}

/// Exponential-moment envelope `g_β(p) = (p/e) · inf_{λ>0} λ^{-1} exp(β(e^λ − 1)/p)`.
///
/// This is the Chernoff form: `E τ^p ≤ E e^{λτ} · sup_x x^p e^{-λx}` with
/// `sup_x x^p e^{-λx} = (p/(eλ))^p`, so `B^{1/p}(p,β) ≤ g_β(p)` for all `p, β > 0`.
/// The exponent `φ(λ) = −ln λ + (β/p)(e^λ − 1)` is strictly convex with its
/// minimum at `λ e^λ = p/β`, inside `(0, ln(2 + p/β))`.
pub fn upper_g(p: f64, beta: f64) -> Result<f64> {
    if !(p > 0.0) || !(beta > 0.0) {
        return Err(Error::Domain(format!("upper_g needs p, beta > 0, got p={p}, beta={beta}")));
    }
    let rate = beta / p;
    let phi = |l: f64| -l.ln() + rate * l.exp_m1();
    let dphi = |l: f64| -1.0 / l + rate * l.exp();
    let lo = 1e-8;
    let mut hi = (2.0 + p / beta).ln();
    if !(dphi(lo) < 0.0 && dphi(hi) > 0.0) {
        hi *= 2.0;
        if !(dphi(lo) < 0.0 && dphi(hi) > 0.0) {
            return Err(Error::BracketFailure { lo, hi });
        }
    }
    let (_, v) = golden_section_min(phi, lo, hi, 1e-10);
    Ok(p / E * v.exp())
}

/// `h₀(p, β) = sup_{k ≥ 1} e^{-β} k^p β^k / k!`, the largest single series term.
///
/// Successive log-increments `p ln((k+1)/k) + ln β − ln(k+1)` decrease in
/// `k`, so the scan stops at the first decrease.
pub fn lower_h0(p: f64, beta: f64) -> Result<f64> {
    if !(p >= 0.0) || !(beta > 0.0) {
        return Err(Error::Domain(format!("lower_h0 needs p >= 0, beta > 0, got p={p}, beta={beta}")));
    }
    let ln_beta = beta.ln();
    let mut best = ln_term(1, p, ln_beta, beta);
    let mut k = 1usize;
    loop {
        let next = ln_term(k + 1, p, ln_beta, beta);
        if next < best {
            break;
        }
        best = next;
        k += 1;
    }
    Ok(best.exp())
}

/// The continuous relaxation `h(p, β)` of the single-term bound:
///
/// ```text
/// h(p,β) = sup_{x>1} e^{1/(6px)} · [ e^{x−β} x^{p−x−1/2} / (√(2π) x^x) ]^{1/p}
/// ```
///
/// Unimodality in `x` is not established, so a 200-point geometric grid on
/// `(1, x_max]` seeds golden-section refinement around the three best points.
pub fn lower_h(p: f64, beta: f64) -> Result<f64> {
    if !(p >= 1.0) || !(beta > 0.0) {
        return Err(Error::Domain(format!("lower_h needs p >= 1, beta > 0, got p={p}, beta={beta}")));
    }
    let ln_obj = |x: f64| {
        1.0 / (6.0 * p * x)
            + (x - beta + (p - x - 0.5) * x.ln() - 0.5 * (2.0 * PI).ln() - x * x.ln()) / p
    };
    let x_max = (10.0 * p).max(10.0 * beta).max(100.0);
    let grid = log_space(1.0 + 1e-9, x_max, 200);
    let vals: Vec<f64> = grid.iter().map(|&x| ln_obj(x)).collect();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut best = vals[order[0]];
    for &i in order.iter().take(3) {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(grid.len() - 1)];
        let (_, v) = golden_section_max(ln_obj, a, b, 1e-10);
        best = best.max(v);
    }
    Ok(best.exp())
}

/// Closed-form upper bound on `B^{1/p}(p, β)` for `p ≥ 2β`:
///
/// ```text
/// (p/e) / (ln(p/β) − ln ln(p/β)) · exp(1/ln(p/β) − β/p)
/// ```
///
/// Requires `p/β > e` so that `ln ln(p/β)` is defined and the bound positive.
pub fn asym_upper(p: f64, beta: f64) -> Result<f64> {
    if !(p >= 1.0) || !(beta > 0.0) || p < 2.0 * beta || p / beta <= E {
        return Err(Error::Domain(format!(
            "asym_upper needs p >= 1, p >= 2 beta and p/beta > e, got p={p}, beta={beta}"
        )));
    }
    let r = p / beta;
    let lr = r.ln();
    Ok((p / E) / (lr - lr.ln()) * (1.0 / lr - 1.0 / r).exp())
}

/// The explicit lower-estimate display stated for `p/β ≥ 2`,
/// `β^{1/ln(pe/β)} · p/ln(pe/β) · exp[−(ln p − ln(pe)/β)/ln(pe/β)]`.
///
/// Reported for inspection only; its regime and constants are unclear.
pub fn explicit_lower(p: f64, beta: f64) -> Option<f64> {
    if !(p > 0.0 && beta > 0.0 && p / beta >= 2.0) {
        return None;
    }
    let l = (p * E / beta).ln();
    let v = beta.powf(1.0 / l) * p / l * (-((p.ln() - (p * E).ln() / beta) / l)).exp();
    v.is_finite().then_some(v)
}

/// One `(p, β)` row of a sandwich report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BellSandwich {
    pub p: f64,
    pub beta: f64,
    /// `B(p, β)` itself.
    pub b: f64,
    /// `B(p, β)^{1/p}`.
    pub b_root: f64,
    pub g_upper: f64,
    /// Single-term lower bound, on the scale of `B` (not its root).
    pub h0_lower: f64,
    pub h_lower: f64,
    /// Present only where `p ≥ 2β` and `p/β > e`.
    pub asym_upper: Option<f64>,
    pub explicit_lower: Option<f64>,
    /// `B^{1/p}/β`, present only in the `p ≤ 2β` regime.
    pub ratio_over_beta: Option<f64>,
}

/// A checked inequality that failed, or a logged relation that did not hold.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SandwichViolation {
    pub p: f64,
    pub beta: f64,
    pub relation: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SandwichReport {
    pub records: Vec<BellSandwich>,
    /// Failures of `h₀ ≤ B`, `B^{1/p} ≤ g_β` or `B^{1/p} ≤ asym_upper`.
    pub violations: Vec<SandwichViolation>,
    /// Places where `B^{1/p} ≥ h₀` or `B^{1/p} ≥ h` fails; logged, not enforced.
    pub logged: Vec<SandwichViolation>,
    /// Smallest and largest `B^{1/p}/β` over the `p ≤ 2β` points.
    pub ratio_bracket: Option<(f64, f64)>,
}

/// Relative slack used when checking the sandwich inequalities.
pub const SANDWICH_SLACK: f64 = 1e-9;

pub fn sandwich_point(p: f64, beta: f64, cfg: &BellEvalConfig) -> Result<BellSandwich> {
    let lb = log_bell(p, beta, cfg)?;
    let asym = if p >= 2.0 * beta && p / beta > E { Some(asym_upper(p, beta)?) } else { None };
    Ok(BellSandwich {
        p,
        beta,
        b: lb.value(),
        b_root: lb.root(p).value(),
        g_upper: upper_g(p, beta)?,
        h0_lower: lower_h0(p, beta)?,
        h_lower: lower_h(p, beta)?,
        asym_upper: asym,
        explicit_lower: explicit_lower(p, beta),
        ratio_over_beta: (p <= 2.0 * beta).then(|| lb.root(p).value() / beta),
    })
}

/// Evaluates every envelope on the product grid `p_grid × beta_grid` (with `p ≥ 1`)
/// and checks the provable relations.
pub fn sandwich_report(p_grid: &[f64], beta_grid: &[f64], cfg: &BellEvalConfig) -> Result<SandwichReport> {
    if p_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::InvalidInput("sandwich_report needs nonempty grids".into()));
    }
    let mut records = Vec::with_capacity(p_grid.len() * beta_grid.len());
    let mut violations = Vec::new();
    let mut logged = Vec::new();
    let mut bracket: Option<(f64, f64)> = None;
    for &p in p_grid {
        for &beta in beta_grid {
            let r = sandwich_point(p, beta, cfg)?;
            let check = |list: &mut Vec<SandwichViolation>, rel: &str, lhs: f64, rhs: f64| {
                if lhs > rhs * (1.0 + SANDWICH_SLACK) {
                    list.push(SandwichViolation { p, beta, relation: rel.into(), lhs, rhs });
                }
            };
            check(&mut violations, "h0 <= B", r.h0_lower, r.b);
            check(&mut violations, "B^(1/p) <= g_beta", r.b_root, r.g_upper);
            if let Some(a) = r.asym_upper {
                check(&mut violations, "B^(1/p) <= asym_upper", r.b_root, a);
            }
            check(&mut logged, "h0 <= B^(1/p)", r.h0_lower, r.b_root);
            check(&mut logged, "h <= B^(1/p)", r.h_lower, r.b_root);
            if let Some(q) = r.ratio_over_beta {
                bracket = Some(match bracket {
                    None => (q, q),
                    Some((lo, hi)) => (lo.min(q), hi.max(q)),
                });
            }
            records.push(r);
        }
    }
    Ok(SandwichReport { records, violations, logged, ratio_bracket: bracket })
}

/// CSV row with the columns `p,beta,b_root,g_upper,h0_lower,h_lower,asym_upper`.
#[derive(Debug, Serialize)]
struct SandwichCsvRow {
    p: f64,
    beta: f64,
    b_root: f64,
    g_upper: f64,
    h0_lower: f64,
    h_lower: f64,
    asym_upper: Option<f64>,
}

pub fn write_sandwich_csv<W: std::io::Write>(records: &[BellSandwich], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(SandwichCsvRow {
            p: r.p,
            beta: r.beta,
            b_root: r.b_root,
            g_upper: r.g_upper,
            h0_lower: r.h0_lower,
            h_lower: r.h_lower,
            asym_upper: r.asym_upper,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Bell numbers from the Bell triangle, independent of the series code.
    fn bell_triangle(n: usize) -> Vec<u128> {
        let mut out = vec![1u128];
        let mut row = vec![1u128];
        for _ in 1..=n {
            let mut next = vec![*row.last().unwrap()];
            for v in &row {
                let last = *next.last().unwrap();
                next.push(last + v);
            }
            out.push(next[0]);
            row = next;
        }
        out
    }

    /// Grid minimum of the Chernoff exponent with step 1e-6.
    fn upper_g_grid_oracle(p: f64, beta: f64) -> f64 {
        let mut best = f64::INFINITY;
        let mut l: f64 = 1e-6;
        while l < 6.0 {
            best = best.min(-l.ln() + beta / p * (l.exp() - 1.0));
            l += 1e-6;
        }
        p / E * best.exp()
    }

    #[test]
    fn triangle_oracle_is_sane() {
        assert_eq!(&bell_triangle(10)[..], &[1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]);
    }

    #[test]
    fn log_bell_anchors() {
        let cfg = BellEvalConfig::default();
        assert_relative_eq!(log_bell(1.0, 2.0, &cfg).unwrap().ln(), 2f64.ln(), epsilon = 1e-12);
        assert!(log_bell(0.0, 7.0, &cfg).unwrap().ln().abs() < 1e-12);
        assert_relative_eq!(log_bell(2.0, 1.0, &cfg).unwrap().ln(), 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(log_bell(3.0, 1.0, &cfg).unwrap().ln(), 5f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(log_bell(10.0, 1.0, &cfg).unwrap().ln(), 115975f64.ln(), epsilon = 1e-11);
    }

    #[test]
    fn integer_moments_match_bell_triangle() {
        let cfg = BellEvalConfig::default();
        let bells = bell_triangle(20);
        for (p, &exact) in bells.iter().enumerate() {
            let v = log_bell(p as f64, 1.0, &cfg).unwrap().value();
            assert_relative_eq!(v, exact as f64, max_relative = 1e-10);
        }
    }

    #[test]
    fn huge_exponents_stay_finite_in_log_space() {
        let lb = log_bell(400.0, 3.0, &BellEvalConfig::default()).unwrap();
        assert!(lb.ln().is_finite() && lb.ln() > 1000.0);
    }

    #[test]
    fn non_convergence_is_reported() {
        let cfg = BellEvalConfig { rel_tol: 1e-12, max_terms: 5 };
        assert!(matches!(log_bell(10.0, 50.0, &cfg), Err(Error::NonConvergent { .. })));
        assert!(log_bell(-1.0, 1.0, &BellEvalConfig::default()).is_err());
        assert!(log_bell(1.0, 0.0, &BellEvalConfig::default()).is_err());
    }

    #[test]
    fn bell_root_examples() {
        let cfg = BellEvalConfig::default();
        assert_relative_eq!(bell_root(2.0, 1.0, &cfg).unwrap(), 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(bell_root(1.0, 3.0, &cfg).unwrap(), 3.0, max_relative = 1e-12);
        assert_relative_eq!(bell_root(10.0, 1.0, &cfg).unwrap(), 115975f64.powf(0.1), max_relative = 1e-11);
        assert!((bell_root(10.0, 1.0, &cfg).unwrap() - 3.20949).abs() < 1e-5);
        assert!(bell_root(0.5, 1.0, &cfg).is_err());
    }

    #[test]
    fn stirling_zeta_brackets_factorial() {
        assert!((stirling_zeta(1).unwrap() - 1.00227).abs() < 1e-5);
        assert!((stirling_zeta(2).unwrap() - 2.00065).abs() < 1e-5);
        let z5 = stirling_zeta(5).unwrap();
        assert!(z5 >= 120.0 && z5 <= 120.0 * (1.0f64 / 60.0).exp());
        for k in 1..=60u64 {
            assert!(ln_factorial(k as usize) <= ln_stirling_zeta(k) + 1e-12, "k={k}");
        }
        assert!(stirling_zeta(0).is_err());
        let z30 = stirling_zeta(30).unwrap();
        assert_relative_eq!(z30.ln(), ln_stirling_zeta(30), max_relative = 1e-14);
    }

    #[test]
    fn upper_g_matches_grid_oracle() {
        // Frozen from the grid oracle: g_1(2) = 1.691272, g_1(1) = 1.391477.
        for (p, beta, frozen) in [(2.0, 1.0, 1.691_272), (1.0, 1.0, 1.391_477)] {
            let g = upper_g(p, beta).unwrap();
            let oracle = upper_g_grid_oracle(p, beta);
            assert_relative_eq!(g, oracle, max_relative = 1e-9);
            assert!((g - frozen).abs() < 1e-6, "g={g}");
        }
        for (p, beta) in [(5.0, 0.25), (40.0, 8.0), (1.0, 8.0)] {
            assert_relative_eq!(upper_g(p, beta).unwrap(), upper_g_grid_oracle(p, beta), max_relative = 1e-9);
        }
    }

    #[test]
    fn upper_g_dominates_bell_root() {
        let cfg = BellEvalConfig::default();
        for p in 1..=50 {
            for beta in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
                let r = bell_root(p as f64, beta, &cfg).unwrap();
                assert!(r <= upper_g(p as f64, beta).unwrap() * (1.0 + 1e-9), "p={p} beta={beta}");
            }
        }
    }

    #[test]
    fn h0_examples() {
        assert_relative_eq!(lower_h0(2.0, 1.0).unwrap(), 2.0 / E, max_relative = 1e-14);
        assert_relative_eq!(lower_h0(0.0, 1.0).unwrap(), 1.0 / E, max_relative = 1e-14);
        // enumeration oracle
        for (p, beta) in [(7.5, 3.0), (20.0, 0.5), (3.0, 9.0)] {
            let brute = (1..=100usize)
                .map(|k| ln_term(k, p, f64::ln(beta), beta))
                .fold(f64::NEG_INFINITY, f64::max)
                .exp();
            assert_relative_eq!(lower_h0(p, beta).unwrap(), brute, max_relative = 1e-14);
        }
    }

    #[test]
    fn lower_h_against_grid_oracle() {
        for (p, beta) in [(2.0, 1.0), (4.0, 1.0), (10.0, 3.0)] {
            let h = lower_h(p, beta).unwrap();
            let mut brute = f64::NEG_INFINITY;
            let mut x = 1.0 + 1e-9;
            while x < 200.0 {
                let v = 1.0 / (6.0 * p * x)
                    + (x - beta + (p - x - 0.5) * x.ln() - 0.5 * (2.0 * PI).ln() - x * x.ln()) / p;
                brute = brute.max(v);
                x += 1e-4;
            }
            assert_relative_eq!(h, brute.exp(), max_relative = 1e-7);
            assert!(h > 0.0 && h <= upper_g(p, beta).unwrap());
        }
        // Frozen from the grid oracle.
        assert!((lower_h(2.0, 1.0).unwrap() - 0.69287).abs() < 1e-4);
    }

    #[test]
    fn asym_upper_examples() {
        let cfg = BellEvalConfig::default();
        let a = asym_upper(10.0, 1.0).unwrap();
        assert!((a - 3.4994).abs() < 1e-3);
        assert!(a >= bell_root(10.0, 1.0, &cfg).unwrap());
        assert!(asym_upper(20.0, 1.0).unwrap() >= bell_root(20.0, 1.0, &cfg).unwrap());
        assert!(matches!(asym_upper(4.0, 2.5), Err(Error::Domain(_))));
        assert!(asym_upper(5.0, 2.0).is_err());
    }

    #[test]
    fn sandwich_single_point_and_regimes() {
        let cfg = BellEvalConfig::default();
        let rep = sandwich_report(&[2.0], &[1.0], &cfg).unwrap();
        let r = &rep.records[0];
        assert_relative_eq!(r.b_root, 2f64.sqrt(), max_relative = 1e-12);
        assert!((r.g_upper - 1.691_272).abs() < 1e-6);
        assert_relative_eq!(r.h0_lower, 2.0 / E, max_relative = 1e-12);
        assert!(r.asym_upper.is_none());
        let rep = sandwich_report(&[2.0], &[4.0], &cfg).unwrap();
        assert!(rep.records[0].asym_upper.is_none());
        assert!(rep.records[0].ratio_over_beta.is_some());
        assert!(rep.ratio_bracket.is_some());
        assert!(sandwich_report(&[], &[1.0], &cfg).is_err());
    }

    #[test]
    fn default_grid_has_no_violations() {
        let cfg = BellEvalConfig::default();
        let ps: Vec<f64> = (1..=50).map(f64::from).collect();
        let rep = sandwich_report(&ps, &[0.25, 0.5, 1.0, 2.0, 4.0, 8.0], &cfg).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
    }

    #[test]
    fn monotone_in_beta_and_p() {
        let cfg = BellEvalConfig::default();
        for p in [1.0, 2.5, 7.0, 20.0] {
            let mut prev = 0.0;
            for beta in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
                let b = log_bell(p, beta, &cfg).unwrap().ln();
                assert!(b > prev || prev == 0.0);
                prev = b;
            }
        }
        for beta in [1.0, 2.0, 5.0] {
            let mut prev = f64::NEG_INFINITY;
            for p in 1..30 {
                let b = log_bell(p as f64, beta, &cfg).unwrap().ln();
                assert!(b >= prev);
                prev = b;
            }
        }
    }

    #[test]
    fn csv_has_expected_columns() {
        let cfg = BellEvalConfig::default();
        let rep = sandwich_report(&[10.0], &[1.0], &cfg).unwrap();
        let mut buf = Vec::new();
        write_sandwich_csv(&rep.records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("p,beta,b_root,g_upper,h0_lower,h_lower,asym_upper\n"));
    }
}
