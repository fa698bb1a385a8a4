//! Moment envelopes `ψ(p)` and the exponential tail bounds they imply.
//!
//! A variable with `|ξ|_p ≤ ψ(p)` on a range of `p` satisfies, by Markov's
//! inequality optimized over that range,
//!
//! ```text
//! P(ξ ≥ y) ≤ exp(−ζ*(ln y)),   ζ(p) = p ln ψ(p),   ζ*(u) = sup_p (p u − ζ(p)).
//! ```

use serde::{Deserialize, Serialize};

use crate::optimize::golden_section_max;
use crate::special::log_space;
use crate::{Error, Result};

/// Interval of admissible `p`: `[lo, hi]`, or `[lo, hi)` when `hi_open`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
    pub hi_open: bool,
}

impl Support {
    pub fn contains(&self, p: f64) -> bool {
        p >= self.lo && (p < self.hi || (!self.hi_open && p == self.hi))
    }

    pub fn is_unbounded(&self) -> bool {
        self.hi == f64::INFINITY
    }

    fn intersect(&self, other: &Support) -> Support {
        let lo = self.lo.max(other.lo);
        let (hi, hi_open) = match self.hi.total_cmp(&other.hi) {
            std::cmp::Ordering::Less => (self.hi, self.hi_open),
            std::cmp::Ordering::Greater => (other.hi, other.hi_open),
            std::cmp::Ordering::Equal => (self.hi, self.hi_open || other.hi_open),
        };
        Support { lo, hi, hi_open }
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && self.hi_open)
    }
}

/// Generating-function families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiSpec {
    /// `p^{1/m} ln^{−r} p`; needs `p ≥ 2` when `r ≠ 0`.
    PowerLog { m: f64, r: f64 },
    /// `exp(c p^β)`.
    ExpPower { c: f64, beta: f64 },
    /// `c₁ (b − p)^{−(θ+1)/b}` on `[1, b)`.
    FiniteB { b: f64, theta: f64, c1: f64 },
    /// `ψ ≡ value`.
    Constant { value: f64 },
    Product { factors: Vec<PsiSpec> },
    /// `ψ` given at increasing `p`; `p ln ψ(p)` is interpolated linearly in `p`.
    ///
    /// When the entries bound `|ξ|_p`, the interpolant still bounds it between
    /// nodes because `ln E|ξ|^p` is convex in `p`.
    Tabulated { p: Vec<f64>, values: Vec<f64> },
}

impl PsiSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match self {
            PsiSpec::PowerLog { m, r } => {
                if !(*m > 0.0) || !r.is_finite() {
                    return bad(format!("power-log needs m > 0 and finite r, got m={m}, r={r}"));
                }
            }
            PsiSpec::ExpPower { c, beta } => {
                if !(*c > 0.0 && *beta > 0.0) || !c.is_finite() || !beta.is_finite() {
                    return bad(format!("exp-power needs c, beta > 0, got c={c}, beta={beta}"));
                }
            }
            PsiSpec::FiniteB { b, theta, c1 } => {
                if !(*b > 2.0 && *c1 > 0.0) || !theta.is_finite() || !b.is_finite() || !c1.is_finite() {
                    return bad(format!("finite-b needs b > 2, c1 > 0, got b={b}, c1={c1}"));
                }
            }
            PsiSpec::Constant { value } => {
                if !(*value > 0.0) || !value.is_finite() {
                    return bad(format!("constant psi needs a positive value, got {value}"));
                }
            }
            PsiSpec::Product { factors } => {
                if factors.is_empty() {
                    return bad("product of no factors".into());
                }
                for f in factors {
                    f.validate()?;
                }
                if self.support().is_empty() {
                    return Err(Error::EmptySupport);
                }
            }
            PsiSpec::Tabulated { p, values } => {
                if p.len() < 2 || p.len() != values.len() {
                    return bad("tabulated psi needs >= 2 matching (p, value) pairs".into());
                }
                if p.windows(2).any(|w| !(w[1] > w[0])) || !(p[0] >= 1.0) || !p[p.len() - 1].is_finite() {
                    return bad("tabulated p must be finite, strictly increasing and >= 1".into());
                }
                if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return bad("tabulated psi values must be finite and positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn support(&self) -> Support {
        let unbounded = |lo| Support { lo, hi: f64::INFINITY, hi_open: true };
        match self {
            PsiSpec::PowerLog { r, .. } => unbounded(if *r != 0.0 { 2.0 } else { 1.0 }),
            PsiSpec::ExpPower { .. } | PsiSpec::Constant { .. } => unbounded(1.0),
            PsiSpec::FiniteB { b, .. } => Support { lo: 1.0, hi: *b, hi_open: true },
            PsiSpec::Product { factors } => factors
                .iter()
                .map(PsiSpec::support)
                .fold(unbounded(1.0), |acc, s| acc.intersect(&s)),
            PsiSpec::Tabulated { p, .. } => Support { lo: p[0], hi: p[p.len() - 1], hi_open: false },
        }
    }

    /// `ln ψ(p)`.
    pub fn ln_psi(&self, p: f64) -> Result<f64> {
        let s = self.support();
        if !s.contains(p) {
            return Err(Error::OutOfSupport { p, lo: s.lo, hi: s.hi });
        }
        Ok(match self {
            PsiSpec::PowerLog { m, r } => {
                let lp = p.ln();
                lp / m - if *r != 0.0 { r * lp.ln() } else { 0.0 }
            }
            PsiSpec::ExpPower { c, beta } => c * p.powf(*beta),
            PsiSpec::FiniteB { b, theta, c1 } => c1.ln() - (theta + 1.0) / b * (b - p).ln(),
            PsiSpec::Constant { value } => value.ln(),
            PsiSpec::Product { factors } => {
                let mut total = 0.0;
                for f in factors {
                    total += f.ln_psi(p)?;
                }
                total
            }
            PsiSpec::Tabulated { p: ps, values } => {
                let j = ps.partition_point(|q| *q <= p).clamp(1, ps.len() - 1);
                let (p0, p1) = (ps[j - 1], ps[j]);
                let (z0, z1) = (p0 * values[j - 1].ln(), p1 * values[j].ln());
                let t = (p - p0) / (p1 - p0);
                (z0 + t * (z1 - z0)) / p
            }
        })
    }

    pub fn eval(&self, p: f64) -> Result<f64> {
        Ok(self.ln_psi(p)?.exp())
    }

    /// `ζ(p) = p ln ψ(p)`.
    pub fn zeta(&self, p: f64) -> Result<f64> {
        Ok(p * self.ln_psi(p)?)
    }

    /// `c · ψ`.
    pub fn scaled(&self, c: f64) -> PsiSpec {
        if c == 1.0 {
            return self.clone();
        }
        PsiSpec::Product { factors: vec![self.clone(), PsiSpec::Constant { value: c }] }
    }
}

/// `ψ(p)`.
pub fn psi_eval(s: &PsiSpec, p: f64) -> Result<f64> {
    s.eval(p)
}

/// Grid used for `sup_p |ξ|_p / ψ(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormGrid {
    pub points: usize,
    pub p_max: f64,
}

impl Default for NormGrid {
    fn default() -> Self {
        Self { points: 64, p_max: 200.0 }
    }
}

fn p_range(s: &Support, p_max: f64) -> Result<(f64, f64)> {
    let lo = if s.hi >= 2.0 { s.lo.max(2.0) } else { s.lo.max(1.0 + 1e-6) };
    let hi = if s.hi_open { s.hi * (1.0 - 1e-9) } else { s.hi }.min(p_max);
    if lo > hi {
        return Err(Error::OutOfSupport { p: lo, lo: s.lo, hi: s.hi });
    }
    Ok((lo, hi))
}

/// `max_p |ξ|_p / ψ(p)` over a log-spaced grid starting at 2.
pub fn gls_norm<F: Fn(f64) -> f64>(moment_root: F, s: &PsiSpec, grid: &NormGrid) -> Result<f64> {
    s.validate()?;
    let (lo, hi) = p_range(&s.support(), grid.p_max)?;
    let mut best = f64::NEG_INFINITY;
    for p in log_space(lo, hi, grid.points.max(1)) {
        best = best.max(moment_root(p) / s.eval(p)?);
    }
    Ok(best)
}

/// Grid and extension rule for the Young–Fenchel transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugateGrid {
    pub points: usize,
    pub p_max: f64,
    /// On unbounded supports the search continues past `p_max` by doubling
    /// while the objective still rises, up to this cap.
    pub p_cap: f64,
}

impl Default for ConjugateGrid {
    fn default() -> Self {
        Self { points: 512, p_max: 200.0, p_cap: 1e12 }
    }
}

/// `sup_{p ∈ support} (p u − ζ(p))`; `f64::INFINITY` when the objective is
/// still rising at `p_cap` on an unbounded support.
pub fn young_fenchel<Z: Fn(f64) -> f64>(zeta: Z, support: &Support, u: f64, grid: &ConjugateGrid) -> Result<f64> {
    let (lo, hi) = p_range(support, grid.p_max)?;
    let phi = |p: f64| p * u - zeta(p);
    let ps = log_space(lo, hi, grid.points.max(2));
    let vals: Vec<f64> = ps.iter().map(|&p| phi(p)).collect();
    let (imax, &vmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    let last = ps.len() - 1;
    if imax == last && support.is_unbounded() {
        let mut p = ps[last];
        let mut v = vmax;
        loop {
            let next = 2.0 * p;
            if next > grid.p_cap {
                return Ok(f64::INFINITY);
            }
            let vn = phi(next);
            if vn <= v {
                let (_, refined) = golden_section_max(phi, 0.5 * p, next, 1e-12 * next);
                return Ok(refined.max(v));
            }
            p = next;
            v = vn;
        }
    }
    let a = ps[imax.saturating_sub(1)];
    let b = ps[(imax + 1).min(last)];
    let (_, refined) = golden_section_max(phi, a, b, 1e-12 * b);
    Ok(refined.max(vmax))
}

/// Upper bounds on `P(ξ ≥ y)` on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub ys: Vec<f64>,
    pub bounds: Vec<f64>,
    /// `ln` of the bound before clamping to `[0, 1]` (`−∞` for a zero bound).
    pub log_bounds: Vec<f64>,
}

/// `P(ξ ≥ y) ≤ exp(−ζ*(ln y))` for `|ξ|_p ≤ assumed_norm · ψ(p)`.
pub fn tail_upper(s: &PsiSpec, ys: &[f64], assumed_norm: f64, grid: &ConjugateGrid) -> Result<TailCurve> {
    s.validate()?;
    if !(assumed_norm > 0.0) || !assumed_norm.is_finite() {
        return Err(Error::InvalidInput(format!("assumed norm must be positive, got {assumed_norm}")));
    }
    if ys.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("tail grid must be strictly ascending".into()));
    }
    if let Some(y) = ys.iter().find(|y| !(**y >= std::f64::consts::E) || !y.is_finite()) {
        return Err(Error::InvalidInput(format!("tail grid points must be >= e, got {y}")));
    }
    let scaled = s.scaled(assumed_norm);
    let support = scaled.support();
    let mut bounds = Vec::with_capacity(ys.len());
    let mut log_bounds = Vec::with_capacity(ys.len());
    let mut running = 1.0f64;
    for &y in ys {
        let conj = young_fenchel(|p| scaled.zeta(p).unwrap_or(f64::INFINITY), &support, y.ln(), grid)?;
        let lb = -conj;
        log_bounds.push(lb);
        running = running.min(lb.min(0.0).exp());
        bounds.push(running);
    }
    Ok(TailCurve { ys: ys.to_vec(), bounds, log_bounds })
}

/// Writes `y,bound` rows.
pub fn write_tail_csv<W: std::io::Write>(curve: &TailCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "bound"])?;
    for (y, b) in curve.ys.iter().zip(&curve.bounds) {
        w.write_record([y.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `κ(p) = Π ψ_k(p)` on the common support.
pub fn combine_product(specs: &[PsiSpec]) -> Result<PsiSpec> {
    let out = PsiSpec::Product { factors: specs.to_vec() };
    out.validate()?;
    Ok(out)
}

/// `(m₀, γ₀) = ((Σ 1/m_k)⁻¹, Σ γ_k)` for a product of power-log envelopes.
pub fn combine_power_log(params: &[(f64, f64)]) -> Result<(f64, f64)> {
    if params.is_empty() || params.iter().any(|(m, g)| !(*m > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidInput("power-log combination needs a nonempty list with m > 0".into()));
    }
    let inv: f64 = params.iter().map(|(m, _)| 1.0 / m).sum();
    Ok((1.0 / inv, params.iter().map(|(_, g)| g).sum()))
}

/// Exponents of a product of finite-`b` envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteBCombination {
    /// `min b_k`.
    pub b0: f64,
    /// How many factors attain `b0`.
    pub multiplicity: usize,
    /// `Σ_{b_k = b0} (θ_k + 1) / b0`; the product behaves like `C (b0 − p)^{−Θ}`.
    pub theta_sum: f64,
}

impl FiniteBCombination {
    /// `ln` of the tail shape `y^{−b0} (ln y)^{b0 Θ}`, constant omitted.
    pub fn ln_tail_shape(&self, y: f64) -> f64 {
        -self.b0 * y.ln() + self.b0 * self.theta_sum * y.ln().ln()
    }
}

pub fn combine_finite_b(params: &[(f64, f64)]) -> Result<FiniteBCombination> {
    if params.is_empty() || params.iter().any(|(b, t)| !(*b > 2.0) || !t.is_finite()) {
        return Err(Error::InvalidInput("finite-b combination needs a nonempty list with b > 2".into()));
    }
    let b0 = params.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let minimal: Vec<_> = params.iter().filter(|p| p.0 == b0).collect();
    Ok(FiniteBCombination {
        b0,
        multiplicity: minimal.len(),
        theta_sum: minimal.iter().map(|(_, t)| (t + 1.0) / b0).sum(),
    })
}
