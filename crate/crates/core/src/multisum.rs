//! Moment bounds for the normalized sum `S_L[f] = |L|⁻¹ Σ_{k ∈ L} f(ξ_{k(1)}(1), …)`.
//!
//! Every bound here is a valid upper value for `|S_L[f]|_p` with nonnegative
//! `f` and independent coordinates whose copies are i.i.d.:
//!
//! * trivial: `|f|_p`;
//! * factorizable (rank-one `f = g ⊗ h`): `Θ_{p,n(1)}[g] · Θ_{p,n(2)}[h]`;
//! * weighted Θ-norm of a representation: `Σ |λ(k)| Π_s Θ_{p,n(s)}[g^{(s)}_{k(s)}]`;
//! * composite: `min_M ( weighted Θ-norm of Z_M + |f − Z_M|_p )`.
//!
//! [`PreparedKernel`] runs the degree sweep once and evaluates all of them for
//! any `p` and box shape.

use serde::{Deserialize, Serialize};

use crate::bell::{bell_root, BellEvalConfig};
use crate::kernels::{
    degree_sweep, factor_lp_norms, lp_norm, materialize, rank_one_factors, ApproxResult, DegenerateRepresentation,
    GridKernel, Marginal, NmfConfig,
};
use crate::onedim::{theta_iid, theta_pn, MomentTable};
use crate::{Error, Result};

/// Default largest degree in the composite bound.
pub const DEFAULT_M_MAX: usize = 8;

/// A nonempty finite set of 1-based multi-indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    points: Vec<Vec<usize>>,
}

impl IndexSet {
    pub fn new(mut points: Vec<Vec<usize>>) -> Result<Self> {
        let d = points.first().map(Vec::len).unwrap_or(0);
        if d == 0 {
            return Err(Error::InvalidInput("index set must be nonempty with d >= 1".into()));
        }
        if points.iter().any(|k| k.len() != d) {
            return Err(Error::InvalidInput("index set points differ in dimension".into()));
        }
        if points.iter().flatten().any(|&i| i == 0) {
            return Err(Error::InvalidInput("indices are 1-based".into()));
        }
        points.sort();
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("index set contains duplicate points".into()));
        }
        Ok(Self { points })
    }

    /// `{1..n(1)} × … × {1..n(d)}`.
    pub fn full_box(sides: &[usize]) -> Result<Self> {
        if sides.is_empty() || sides.contains(&0) {
            return Err(Error::InvalidInput(format!("box sides must be >= 1, got {sides:?}")));
        }
        let mut points = Vec::with_capacity(sides.iter().product());
        crate::kernels::for_each_index(sides, |idx| points.push(idx.iter().map(|i| i + 1).collect()));
        Ok(Self { points })
    }

    pub fn d(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<usize>] {
        &self.points
    }

    pub fn cardinality(&self) -> usize {
        self.points.len()
    }

    /// Per-axis `(min, max)`.
    pub fn bounding_box(&self) -> Vec<(usize, usize)> {
        (0..self.d())
            .map(|s| {
                let it = self.points.iter().map(|k| k[s]);
                (it.clone().min().unwrap_or(1), it.max().unwrap_or(1))
            })
            .collect()
    }

    /// Side lengths `n(s)` of the bounding box.
    pub fn sides(&self) -> Vec<usize> {
        self.bounding_box().iter().map(|(lo, hi)| hi - lo + 1).collect()
    }

    /// Largest index on each axis, i.e. how many samples per coordinate `S_L` reads.
    pub fn max_index(&self) -> Vec<usize> {
        self.bounding_box().iter().map(|b| b.1).collect()
    }

    pub fn is_box(&self) -> bool {
        self.cardinality() == self.sides().iter().product::<usize>()
    }
}

/// One degree's contribution to the composite bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeTerm {
    pub degree: usize,
    pub theta_norm: f64,
    pub residual_lp: f64,
    pub composite: f64,
}

/// All bounds for one `(p, n⃗)` and the smallest of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub p: f64,
    pub n: Vec<usize>,
    pub trivial: f64,
    pub factorizable: Option<f64>,
    pub weighted_theta: Option<f64>,
    pub w_composite: Option<f64>,
    pub chosen: f64,
    pub provenance: String,
    pub per_degree: Vec<DegreeTerm>,
}

/// `|f|_p`, valid for any `f` and any index set.
pub fn trivial_bound(k: &GridKernel, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("trivial bound needs p >= 1, got {p}")));
    }
    Ok(lp_norm(k, p))
}

/// `Π_s Θ_{p,n(s)}` for a rank-one kernel, one moment table per coordinate.
pub fn factorizable_bound(tables: &[MomentTable], cfg: &BellEvalConfig) -> Result<f64> {
    if tables.is_empty() {
        return Err(Error::InvalidInput("factorizable bound needs one table per coordinate".into()));
    }
    let mut out = 1.0;
    for t in tables {
        out *= theta_pn(t, cfg)?.theta;
    }
    Ok(out)
}

/// Moment table of `n` i.i.d. copies of `g(ξ)`.
pub fn factor_table(g: &[f64], m: &Marginal, p: f64, n: usize) -> Result<MomentTable> {
    let m1 = m.mean_of(g);
    let mp = m.lp_of(g, p).powf(p);
    MomentTable::iid(p, n, m1, mp)
}

fn check_theta_inputs(p: f64, d: usize, n: &[usize]) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("moment bounds need p >= 2, got {p}")));
    }
    if n.len() != d || n.contains(&0) {
        return Err(Error::InvalidInput(format!("need {d} sample counts >= 1, got {n:?}")));
    }
    Ok(())
}

/// `Σ_k |λ(k)| Π_s Θ_{p,n(s)}[g^{(s)}_{k(s)}]`, each Θ for i.i.d. copies of the factor.
pub fn weighted_theta_norm(
    r: &DegenerateRepresentation,
    marginals: &[Marginal],
    p: f64,
    n: &[usize],
    cfg: &BellEvalConfig,
) -> Result<f64> {
    check_theta_inputs(p, r.d(), n)?;
    let b_root = bell_root(p, 1.0, cfg)?;
    weighted_theta_with_root(r, marginals, p, n, b_root)
}

fn weighted_theta_with_root(
    r: &DegenerateRepresentation,
    marginals: &[Marginal],
    p: f64,
    n: &[usize],
    b_root: f64,
) -> Result<f64> {
    let lp = factor_lp_norms(r, marginals, p)?;
    let theta: Vec<Vec<f64>> = r
        .factors()
        .iter()
        .enumerate()
        .map(|(s, fs)| {
            fs.iter()
                .enumerate()
                .map(|(k, g)| theta_iid(p, n[s], marginals[s].mean_of(g), lp[s][k].powf(p), b_root).theta)
                .collect()
        })
        .collect();
    Ok(r.terms()
        .iter()
        .map(|(k, l)| l.abs() * k.iter().enumerate().map(|(s, &ks)| theta[s][ks]).product::<f64>())
        .sum())
}

/// Settings for the composite bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WBoundConfig {
    pub m_max: usize,
    pub seed: u64,
    pub nmf: NmfConfig,
    pub bell: BellEvalConfig,
}

impl Default for WBoundConfig {
    fn default() -> Self {
        Self { m_max: DEFAULT_M_MAX, seed: 0, nmf: NmfConfig::default(), bell: BellEvalConfig::default() }
    }
}

/// A kernel with its degree sweep done, ready to be bounded for many `(p, n⃗)`.
#[derive(Debug, Clone)]
pub struct PreparedKernel {
    kernel: GridKernel,
    supplied: Option<DegenerateRepresentation>,
    sweep: Vec<ApproxResult>,
    product: Option<Vec<Vec<f64>>>,
    cfg: WBoundConfig,
}

impl PreparedKernel {
    /// Two-dimensional grids get the nonnegative degree sweep; one-dimensional
    /// ones are their own single factor; higher dimensions fall back to the
    /// trivial bound.
    pub fn from_grid(kernel: GridKernel, cfg: WBoundConfig) -> Result<Self> {
        let (sweep, product) = match kernel.d() {
            1 => (Vec::new(), Some(vec![kernel.values().to_vec()])),
            2 => (
                degree_sweep(&kernel, cfg.m_max, 2.0, cfg.seed, &cfg.nmf)?,
                rank_one_factors(&kernel).map(|(g, h)| vec![g, h]),
            ),
            _ => (Vec::new(), None),
        };
        Ok(Self { kernel, supplied: None, sweep, product, cfg })
    }

    /// Uses the supplied representation exactly, and on two-dimensional
    /// nonnegative kernels also the sweep over its materialized grid.
    pub fn from_representation(r: DegenerateRepresentation, marginals: &[Marginal], cfg: WBoundConfig) -> Result<Self> {
        let m = materialize(&r, marginals)?;
        let mut prepared = if m.kernel.d() == 2 && !m.negative_kernel {
            let clean = GridKernel::new(
                m.kernel.marginals().to_vec(),
                m.kernel.values().iter().map(|v| v.max(0.0)).collect(),
            )?;
            Self::from_grid(clean, cfg)?
        } else {
            Self { kernel: m.kernel, supplied: None, sweep: Vec::new(), product: None, cfg }
        };
        prepared.supplied = Some(r);
        Ok(prepared)
    }

    pub fn kernel(&self) -> &GridKernel {
        &self.kernel
    }

    pub fn sweep(&self) -> &[ApproxResult] {
        &self.sweep
    }

    pub fn is_rank_one(&self) -> bool {
        self.product.is_some()
    }

    /// Per-coordinate factors `g_s` with `f = ⊗_s g_s`, when the kernel splits.
    pub fn product_factors(&self) -> Option<&[Vec<f64>]> {
        self.product.as_deref()
    }

    /// Every available bound on `|S_L|_p` for a box with sides `n`.
    pub fn bound(&self, p: f64, n: &[usize]) -> Result<BoundBreakdown> {
        check_theta_inputs(p, self.kernel.d(), n)?;
        let b_root = bell_root(p, 1.0, &self.cfg.bell)?;
        let marginals = self.kernel.marginals();
        let trivial = lp_norm(&self.kernel, p);
        let mut candidates: Vec<(f64, String)> = vec![(trivial, "trivial".into())];

        let factorizable = match &self.product {
            Some(gs) => {
                let mut v = 1.0;
                for (s, g) in gs.iter().enumerate() {
                    v *= theta_iid(p, n[s], marginals[s].mean_of(g), marginals[s].lp_of(g, p).powf(p), b_root).theta;
                }
                candidates.push((v, "factorizable".into()));
                Some(v)
            }
            None => None,
        };

        let weighted_theta = match &self.supplied {
            Some(r) => {
                let v = weighted_theta_with_root(r, marginals, p, n, b_root)?;
                candidates.push((v, "weighted_theta".into()));
                Some(v)
            }
            None => None,
        };

        let mut per_degree = Vec::with_capacity(self.sweep.len());
        for a in &self.sweep {
            let theta_norm = weighted_theta_with_root(&a.representation, marginals, p, n, b_root)?;
            let residual_lp = a.residual_norm(&self.kernel, p);
            per_degree.push(DegreeTerm { degree: a.degree, theta_norm, residual_lp, composite: theta_norm + residual_lp });
        }
        let w_composite = per_degree.iter().map(|t| t.composite).fold(None, |acc: Option<f64>, c| {
            Some(acc.map_or(c, |a| a.min(c)))
        });
        if let Some(best) = per_degree.iter().min_by(|a, b| a.composite.total_cmp(&b.composite)) {
            candidates.push((best.composite, format!("composite(M={})", best.degree)));
        }

        let (chosen, provenance) = candidates
            .into_iter()
            .fold((f64::INFINITY, String::new()), |acc, c| if c.0 < acc.0 { c } else { acc });
        Ok(BoundBreakdown {
            p,
            n: n.to_vec(),
            trivial,
            factorizable,
            weighted_theta,
            w_composite,
            chosen,
            provenance,
            per_degree,
        })
    }

    /// `max` of [`Self::bound`]'s chosen value over a finite family of box shapes.
    pub fn bound_sup(&self, p: f64, shapes: &[Vec<usize>]) -> Result<f64> {
        if shapes.is_empty() {
            return Err(Error::InvalidInput("need at least one box shape".into()));
        }
        let mut best = f64::NEG_INFINITY;
        for n in shapes {
            best = best.max(self.bound(p, n)?.chosen);
        }
        Ok(best)
    }

    /// Bound for an arbitrary index set through circumscribing boxes.
    ///
    /// Since `f ≥ 0`, `S_L ≤ (|L⁺|/|L|) S_{L⁺}` for any box `L⁺ ⊇ L`. Boxes
    /// whose sides exceed the minimal ones by `0..=extra` are all tried.
    pub fn nonrect_bound(&self, l: &IndexSet, p: f64, extra: usize) -> Result<NonRectBound> {
        if l.d() != self.kernel.d() {
            return Err(Error::InvalidInput(format!("index set has d={}, kernel has d={}", l.d(), self.kernel.d())));
        }
        let sides = l.sides();
        let offsets = vec![extra + 1; sides.len()];
        let mut best: Option<NonRectBound> = None;
        let mut failure = None;
        crate::kernels::for_each_index(&offsets, |off| {
            if failure.is_some() {
                return;
            }
            let n: Vec<usize> = sides.iter().zip(off).map(|(s, o)| s + o).collect();
            let ratio = n.iter().product::<usize>() as f64 / l.cardinality() as f64;
            match self.bound(p, &n) {
                Ok(inner) => {
                    let value = ratio * inner.chosen;
                    if best.as_ref().is_none_or(|b| value < b.value) {
                        best = Some(NonRectBound { value, ratio, box_sides: n, inner });
                    }
                }
                Err(e) => failure = Some(e),
            }
        });
        match failure {
            Some(e) => Err(e),
            None => best.ok_or_else(|| Error::InvalidInput("no circumscribing box".into())),
        }
    }
}

/// Composite bound for a two-dimensional grid kernel and one box shape.
pub fn w_bound(k: &GridKernel, p: f64, n: &[usize], cfg: WBoundConfig) -> Result<BoundBreakdown> {
    PreparedKernel::from_grid(k.clone(), cfg)?.bound(p, n)
}

/// Box-inflated bound for an arbitrary index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonRectBound {
    pub value: f64,
    /// `|L⁺| / |L|`.
    pub ratio: f64,
    pub box_sides: Vec<usize>,
    pub inner: BoundBreakdown,
}

/// Minimal-bounding-box version of [`PreparedKernel::nonrect_bound`].
pub fn nonrect_bound(l: &IndexSet, k: &GridKernel, p: f64, cfg: WBoundConfig) -> Result<NonRectBound> {
    PreparedKernel::from_grid(k.clone(), cfg)?.nonrect_bound(l, p, 0)
}

/// `(2/3)^d (p/(e ln p))^d ‖f‖`, with `‖f‖` the [`crate::kernels::dplus_norm`]
/// of the given representation. Reported for comparison; it is not asserted
/// to dominate `|S_L|_p`.
pub fn log_scaled_dplus_bound(r: &DegenerateRepresentation, marginals: &[Marginal], p: f64) -> Result<f64> {
    if !(p > std::f64::consts::E) {
        return Err(Error::Domain(format!("needs p > e, got {p}")));
    }
    let d = r.d() as i32;
    let factor = (2.0 / 3.0 * p / (std::f64::consts::E * p.ln())).powi(d);
    Ok(factor * crate::kernels::dplus_norm(r, marginals, p)?)
}
