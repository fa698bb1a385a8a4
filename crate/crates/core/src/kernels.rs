//! Discretized nonnegative kernels and their degenerate (sum-of-products)
//! approximations.
//!
//! A [`GridKernel`] lives on a product grid whose axes carry probability
//! weights, so every `L_p` norm is a finite weighted sum. A
//! [`DegenerateRepresentation`] stores
//!
//! ```text
//! f(x) = Σ_{k ∈ {1..M}^d} λ(k) Π_s g^{(s)}_{k(s)}(x_s),   g ≥ 0
//! ```
//!
//! as coefficient and factor tables. On two-dimensional grids the best
//! nonnegative degree-`M` approximation is a weighted nonnegative matrix
//! factorization, computed by [`nnmf_approximate`] and [`degree_sweep`].

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::special::weighted_power_mean;
use crate::{Error, Result};

/// Tolerance on the total mass of a weight vector.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Support points of one coordinate and their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Marginal {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = Self { points, weights };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(points: Vec<f64>) -> Result<Self> {
        let n = points.len().max(1);
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.points.len() != self.weights.len() {
            return Err(Error::InvalidInput(format!(
                "marginal needs matching nonempty points/weights ({} vs {})",
                self.points.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || self.points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("marginal weights must be finite and >= 0".into()));
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!("marginal weights sum to {s}, not 1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `E g(ξ)` for a function tabulated on the support.
    pub fn mean_of(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// `|g(ξ)|_p`.
    pub fn lp_of(&self, values: &[f64], p: f64) -> f64 {
        weighted_power_mean(values, &self.weights, p)
    }
}

/// A kernel tabulated on a product grid, stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridKernel {
    marginals: Vec<Marginal>,
    values: Vec<f64>,
}

impl GridKernel {
    pub fn new(marginals: Vec<Marginal>, values: Vec<f64>) -> Result<Self> {
        let k = Self::from_parts_unchecked(marginals, values)?;
        if let Some(v) = k.values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("kernel values must be finite and >= 0, found {v}")));
        }
        Ok(k)
    }

    /// Shape checks only; values may be negative.
    pub(crate) fn from_parts_unchecked(marginals: Vec<Marginal>, values: Vec<f64>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidInput("kernel needs at least one coordinate".into()));
        }
        for m in &marginals {
            m.validate()?;
        }
        let cells: usize = marginals.iter().map(Marginal::len).product();
        if cells != values.len() {
            return Err(Error::InvalidInput(format!(
                "kernel has {} values but the grid has {cells} cells",
                values.len()
            )));
        }
        Ok(Self { marginals, values })
    }

    /// Tabulates `f` at every grid point.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(marginals: Vec<Marginal>, f: F) -> Result<Self> {
        let shape: Vec<usize> = marginals.iter().map(Marginal::len).collect();
        let mut values = Vec::with_capacity(shape.iter().product());
        let mut x = vec![0.0; shape.len()];
        for_each_index(&shape, |idx| {
            for (s, &i) in idx.iter().enumerate() {
                x[s] = marginals[s].points[i];
            }
            values.push(f(&x));
        });
        Self::new(marginals, values)
    }

    pub fn d(&self) -> usize {
        self.marginals.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.marginals.iter().map(Marginal::len).collect()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (s, &i) in idx.iter().enumerate() {
            flat = flat * self.marginals[s].len() + i;
        }
        flat
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    /// Product-measure weight of every cell, in storage order.
    pub fn cell_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        for_each_index(&self.shape(), |idx| {
            out.push(idx.iter().enumerate().map(|(s, &i)| self.marginals[s].weights[i]).product());
        });
        out
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// Weighted `L_p` norm of an arbitrary table on this grid.
    pub fn table_lp_norm(&self, table: &[f64], p: f64) -> f64 {
        weighted_power_mean(table, &self.cell_weights(), p)
    }

    /// The kernel as an `n1 × n2` matrix (two-dimensional kernels only).
    pub fn as_matrix(&self) -> Result<DMatrix<f64>> {
        if self.d() != 2 {
            return Err(Error::InvalidInput(format!("expected a 2-d kernel, got d={}", self.d())));
        }
        let (n1, n2) = (self.marginals[0].len(), self.marginals[1].len());
        Ok(DMatrix::from_row_slice(n1, n2, &self.values))
    }
}

/// Visits every multi-index of `shape` in row-major order.
pub(crate) fn for_each_index<F: FnMut(&[usize])>(shape: &[usize], mut f: F) {
    if shape.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut s = shape.len();
        loop {
            if s == 0 {
                return;
            }
            s -= 1;
            idx[s] += 1;
            if idx[s] < shape[s] {
                break;
            }
            idx[s] = 0;
        }
    }
}

/// `|f|_p` under the product of the marginal weights.
pub fn lp_norm(k: &GridKernel, p: f64) -> f64 {
    k.table_lp_norm(&k.values, p)
}

/// Coefficients `λ(k)` over `{1..M}^d` (row-major) and per-coordinate factor
/// tables `factors[s][k][i] = g^{(s)}_{k+1}(x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateRepresentation {
    degree: usize,
    lambda: Vec<f64>,
    factors: Vec<Vec<Vec<f64>>>,
}

impl DegenerateRepresentation {
    pub fn new(lambda: Vec<f64>, factors: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let d = factors.len();
        if d == 0 {
            return Err(Error::InvalidInput("representation needs at least one coordinate".into()));
        }
        let degree = factors[0].len();
        if degree == 0 || factors.iter().any(|f| f.len() != degree) {
            return Err(Error::InvalidInput("every coordinate needs the same number M >= 1 of factors".into()));
        }
        let expected = degree.checked_pow(d as u32).unwrap_or(usize::MAX);
        if lambda.len() != expected {
            return Err(Error::InvalidInput(format!(
                "lambda has {} entries, expected M^d = {expected}",
                lambda.len()
            )));
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidInput("lambda must be finite".into()));
        }
        for (s, fs) in factors.iter().enumerate() {
            let n = fs[0].len();
            for g in fs {
                if g.len() != n {
                    return Err(Error::InvalidInput(format!("factor tables on axis {s} differ in length")));
                }
                if g.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidInput(format!("factors on axis {s} must be finite and >= 0")));
                }
            }
        }
        Ok(Self { degree, lambda, factors })
    }

    /// `λ(k,…,k) = lambdas[k]`, zero off the diagonal.
    pub fn diagonal(lambdas: &[f64], factors: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let d = factors.len();
        let m = lambdas.len();
        if m == 0 || d == 0 {
            return Err(Error::InvalidInput("diagonal representation needs M, d >= 1".into()));
        }
        let mut lambda = vec![0.0; m.pow(d as u32)];
        for (k, &l) in lambdas.iter().enumerate() {
            let flat: usize = (0..d).fold(0, |acc, _| acc * m + k);
            lambda[flat] = l;
        }
        Self::new(lambda, factors)
    }

    /// `f = λ Π_s g_s`.
    pub fn rank_one(lambda: f64, factors: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vec![lambda], factors.into_iter().map(|g| vec![g]).collect())
    }

    pub fn d(&self) -> usize {
        self.factors.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn factors(&self) -> &[Vec<Vec<f64>>] {
        &self.factors
    }

    /// Support size on axis `s`.
    pub fn support_len(&self, s: usize) -> usize {
        self.factors[s][0].len()
    }

    /// Nonzero terms as `(k, λ(k))` with zero-based `k`.
    pub fn terms(&self) -> Vec<(Vec<usize>, f64)> {
        let shape = vec![self.degree; self.d()];
        let mut out = Vec::new();
        let mut flat = 0;
        for_each_index(&shape, |k| {
            let l = self.lambda[flat];
            if l != 0.0 {
                out.push((k.to_vec(), l));
            }
            flat += 1;
        });
        out
    }

    /// `f(x)` at the grid multi-index `idx`.
    pub fn eval(&self, idx: &[usize]) -> f64 {
        self.terms_iter_value(|s, k| self.factors[s][k][idx[s]])
    }

    fn terms_iter_value<F: Fn(usize, usize) -> f64>(&self, g: F) -> f64 {
        let d = self.d();
        let m = self.degree;
        let mut total = 0.0;
        let mut k = vec![0usize; d];
        for &l in &self.lambda {
            if l != 0.0 {
                total += l * (0..d).map(|s| g(s, k[s])).product::<f64>();
            }
            for s in (0..d).rev() {
                k[s] += 1;
                if k[s] < m {
                    break;
                }
                k[s] = 0;
            }
        }
        total
    }

    pub(crate) fn check_marginals(&self, marginals: &[Marginal]) -> Result<()> {
        if marginals.len() != self.d() {
            return Err(Error::InvalidInput(format!(
                "representation has d={} but {} marginals were given",
                self.d(),
                marginals.len()
            )));
        }
        for (s, m) in marginals.iter().enumerate() {
            if m.len() != self.support_len(s) {
                return Err(Error::InvalidInput(format!(
                    "axis {s}: factor tables have {} entries, marginal has {}",
                    self.support_len(s),
                    m.len()
                )));
            }
        }
        Ok(())
    }
}

/// `|g^{(s)}_k|_p` under each coordinate's marginal, indexed `[s][k]`.
pub fn factor_lp_norms(r: &DegenerateRepresentation, marginals: &[Marginal], p: f64) -> Result<Vec<Vec<f64>>> {
    r.check_marginals(marginals)?;
    Ok(r.factors
        .iter()
        .zip(marginals)
        .map(|(fs, m)| fs.iter().map(|g| m.lp_of(g, p)).collect())
        .collect())
}

/// A kernel evaluated from a representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Materialized {
    /// May hold negative cells when `negative_kernel` is set.
    pub kernel: GridKernel,
    /// Some cell is below `-1e-12`, possible only with negative coefficients.
    pub negative_kernel: bool,
}

/// Evaluates `Σ_k λ(k) Π_s g^{(s)}_{k(s)}` on the grid of `marginals`.
pub fn materialize(r: &DegenerateRepresentation, marginals: &[Marginal]) -> Result<Materialized> {
    r.check_marginals(marginals)?;
    let shape: Vec<usize> = marginals.iter().map(Marginal::len).collect();
    let mut values = Vec::with_capacity(shape.iter().product());
    for_each_index(&shape, |idx| values.push(r.eval(idx)));
    let negative_kernel = values.iter().any(|v| *v < -1e-12);
    let kernel = GridKernel::from_parts_unchecked(marginals.to_vec(), values)?;
    Ok(Materialized { kernel, negative_kernel })
}

/// `Σ_k |λ(k)| Π_s |g^{(s)}_{k(s)}|_p` for this particular representation.
///
/// The quasi-norm proper is the infimum over all nonnegative representations;
/// any single representation gives an upper value for it.
pub fn dplus_norm(r: &DegenerateRepresentation, marginals: &[Marginal], p: f64) -> Result<f64> {
    let norms = factor_lp_norms(r, marginals, p)?;
    Ok(r.terms()
        .iter()
        .map(|(k, l)| l.abs() * k.iter().enumerate().map(|(s, &ks)| norms[s][ks]).product::<f64>())
        .sum())
}

/// `G(p) · ‖λ‖₁` with `G(p)` the largest factor-norm product over the
/// nonzero terms; never below [`dplus_norm`].
pub fn dplus_norm_quick(r: &DegenerateRepresentation, marginals: &[Marginal], p: f64) -> Result<f64> {
    let norms = factor_lp_norms(r, marginals, p)?;
    let terms = r.terms();
    let g = terms
        .iter()
        .map(|(k, _)| k.iter().enumerate().map(|(s, &ks)| norms[s][ks]).product::<f64>())
        .fold(0.0f64, f64::max);
    let l1: f64 = terms.iter().map(|(_, l)| l.abs()).sum();
    Ok(g * l1)
}

/// Truncated eigen-expansion of a symmetric kernel under its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTruncation {
    /// Eigenvalues of `v ↦ Σ_j f(·, x_j) w_j v_j`, descending.
    pub eigenvalues: Vec<f64>,
    pub kept: usize,
    /// `Σ_{k > M} λ_k`.
    pub projective_residual: f64,
    /// Weighted `L_2` norm of `f` minus the kept expansion, `√(Σ_{k>M} λ_k²)`.
    pub l2_residual: f64,
    /// The kept expansion `Σ_{k ≤ M} λ_k φ_k(x) φ_k(y)` on the grid.
    pub approximation: Vec<f64>,
}

/// Keeps the top `m` eigenpairs of a symmetric positive semidefinite kernel.
pub fn eigen_rank_truncation(k: &GridKernel, m: usize) -> Result<SpectralTruncation> {
    let mat = k.as_matrix()?;
    let n = mat.nrows();
    let (w1, w2) = (&k.marginals[0], &k.marginals[1]);
    if n != mat.ncols() || w1.weights != w2.weights {
        return Err(Error::InvalidInput("spectral truncation needs a square kernel with equal marginals".into()));
    }
    let scale = k.max_value().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput("spectral truncation needs a symmetric kernel".into()));
            }
        }
    }
    let sw: Vec<f64> = w1.weights.iter().map(|w| w.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| sw[i] * 0.5 * (mat[(i, j)] + mat[(j, i)]) * sw[j]);
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let largest = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&lowest) = eigenvalues.last() {
        if lowest < -1e-8 * largest.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd { eigenvalue: lowest, largest });
        }
    }
    let kept = m.min(n);
    let mut approximation = vec![0.0; n * n];
    for &col in order.iter().take(kept) {
        let lam = eig.eigenvalues[col];
        let phi: Vec<f64> = (0..n)
            .map(|i| if sw[i] > 0.0 { eig.eigenvectors[(i, col)] / sw[i] } else { 0.0 })
            .collect();
        for i in 0..n {
            for j in 0..n {
                approximation[i * n + j] += lam * phi[i] * phi[j];
            }
        }
    }
    let residual: Vec<f64> = k.values.iter().zip(&approximation).map(|(a, b)| a - b).collect();
    Ok(SpectralTruncation {
        projective_residual: eigenvalues.iter().skip(kept).map(|l| l.max(0.0)).sum(),
        l2_residual: k.table_lp_norm(&residual, 2.0),
        eigenvalues,
        kept,
        approximation,
    })
}

/// Iteration controls for the nonnegative factorization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub iters: usize,
    /// Stop once an iteration improves the objective by less than this fraction.
    pub rel_improvement: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self { iters: 20_000, rel_improvement: 1e-10 }
    }
}

/// A nonnegative degree-`M` approximation and its error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub degree: usize,
    pub representation: DegenerateRepresentation,
    pub p: f64,
    /// `|f − Z_M|_p`, an upper value for the best nonnegative error in `L_p`.
    pub residual_lp: f64,
    pub residual_l2: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    residual: Vec<f64>,
}

impl ApproxResult {
    /// `f − Z_M` on the grid.
    pub fn residual_table(&self) -> &[f64] {
        &self.residual
    }

    /// `|f − Z_M|_q` for any `q ≥ 1`.
    pub fn residual_norm(&self, k: &GridKernel, q: f64) -> f64 {
        k.table_lp_norm(&self.residual, q)
    }
}

/// Factor matrices of `K ≈ W H` with `W: n1 × M` and `H: M × n2`, row-major.
#[derive(Debug, Clone)]
struct Factors {
    m: usize,
    w: Vec<f64>,
    h: Vec<f64>,
}

struct WeightedProblem<'a> {
    n1: usize,
    n2: usize,
    k: &'a [f64],
    w1: &'a [f64],
    w2: &'a [f64],
}

impl WeightedProblem<'_> {
    fn product(&self, f: &Factors) -> Vec<f64> {
        let mut out = vec![0.0; self.n1 * self.n2];
        for i in 0..self.n1 {
            for c in 0..f.m {
                let a = f.w[i * f.m + c];
                if a == 0.0 {
                    continue;
                }
                let row = &f.h[c * self.n2..(c + 1) * self.n2];
                for (o, b) in out[i * self.n2..(i + 1) * self.n2].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `Σ w1_i w2_j (K − WH)_ij²`.
    fn objective(&self, approx: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n1 {
            let mut row = 0.0;
            for j in 0..self.n2 {
                let r = self.k[i * self.n2 + j] - approx[i * self.n2 + j];
                row += self.w2[j] * r * r;
            }
            total += self.w1[i] * row;
        }
        total
    }

    /// One round of weighted multiplicative updates (W then H).
    ///
    /// The row weight `w1_i` cancels from the W-update ratio and `w2_j` from
    /// the H-update ratio, so zero-weight cells still receive a fit.
    fn multiplicative_step(&self, f: &mut Factors) {
        let (n1, n2, m) = (self.n1, self.n2, f.m);
        let approx = self.product(f);
        for i in 0..n1 {
            for c in 0..m {
                let mut num = 0.0;
                let mut den = 0.0;
                for j in 0..n2 {
                    let hw = self.w2[j] * f.h[c * n2 + j];
                    num += hw * self.k[i * n2 + j];
                    den += hw * approx[i * n2 + j];
                }
                f.w[i * m + c] *= ratio(num, den);
            }
        }
        let approx = self.product(f);
        for c in 0..m {
            for j in 0..n2 {
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..n1 {
                    let ww = self.w1[i] * f.w[i * m + c];
                    num += ww * self.k[i * n2 + j];
                    den += ww * approx[i * n2 + j];
                }
                f.h[c * n2 + j] *= ratio(num, den);
            }
        }
    }

    /// One sweep of exact coordinate-block minimization over the columns of
    /// `W` and rows of `H`, projected onto the nonnegative orthant.
    fn hals_step(&self, f: &mut Factors) {
        let (n1, n2, m) = (self.n1, self.n2, f.m);
        let approx = self.product(f);
        let mut r: Vec<f64> = self.k.iter().zip(&approx).map(|(a, b)| a - b).collect();
        for c in 0..m {
            add_outer(&mut r, f, c, n2, 1.0);
            let hh: f64 = (0..n2).map(|j| self.w2[j] * f.h[c * n2 + j].powi(2)).sum();
            for i in 0..n1 {
                let num: f64 = (0..n2).map(|j| self.w2[j] * r[i * n2 + j] * f.h[c * n2 + j]).sum();
                f.w[i * m + c] = if hh > 0.0 { (num / hh).max(0.0) } else { 0.0 };
            }
            let ww: f64 = (0..n1).map(|i| self.w1[i] * f.w[i * m + c].powi(2)).sum();
            for j in 0..n2 {
                let num: f64 = (0..n1).map(|i| self.w1[i] * r[i * n2 + j] * f.w[i * m + c]).sum();
                f.h[c * n2 + j] = if ww > 0.0 { (num / ww).max(0.0) } else { 0.0 };
            }
            add_outer(&mut r, f, c, n2, -1.0);
        }
    }

    /// Multiplicative updates for the first [`MU_PHASE`] rounds, then the
    /// block-coordinate polish until the objective stalls.
    fn run(&self, f: &mut Factors, cfg: &NmfConfig) -> (usize, bool, f64) {
        let mut prev = self.objective(&self.product(f));
        let floor = 1e-30 * self.objective(&vec![0.0; self.n1 * self.n2]).max(f64::MIN_POSITIVE);
        for it in 1..=cfg.iters {
            if it <= MU_PHASE {
                self.multiplicative_step(f);
            } else {
                self.hals_step(f);
            }
            let obj = self.objective(&self.product(f));
            if obj <= floor || (it > MU_PHASE && (prev - obj) <= cfg.rel_improvement * prev) {
                return (it, true, obj);
            }
            prev = obj;
        }
        (cfg.iters, false, prev)
    }
}

/// Rounds of multiplicative updates before switching to the polish.
pub const MU_PHASE: usize = 500;

/// `r += sign · W[:, c] ⊗ H[c, :]`.
fn add_outer(r: &mut [f64], f: &Factors, c: usize, n2: usize, sign: f64) {
    for (i, row) in r.chunks_mut(n2).enumerate() {
        let a = sign * f.w[i * f.m + c];
        if a != 0.0 {
            for (x, b) in row.iter_mut().zip(&f.h[c * n2..(c + 1) * n2]) {
                *x += a * b;
            }
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn problem_of(k: &GridKernel) -> Result<WeightedProblem<'_>> {
    if k.d() != 2 {
        return Err(Error::InvalidInput(format!(
            "grid factorization is implemented for d = 2 only (got d = {}); supply a representation instead",
            k.d()
        )));
    }
    Ok(WeightedProblem {
        n1: k.marginals[0].len(),
        n2: k.marginals[1].len(),
        k: &k.values,
        w1: &k.marginals[0].weights,
        w2: &k.marginals[1].weights,
    })
}

/// Entry scale `√(E f / M)` so that a random `W H` starts near the kernel's mass.
fn init_scale(k: &GridKernel, m: usize) -> f64 {
    let mean: f64 = k.values.iter().zip(k.cell_weights()).map(|(v, w)| v * w).sum();
    let mean = if mean > 0.0 { mean } else { k.max_value().max(1.0) };
    (mean / m as f64).sqrt()
}

fn random_component(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.random_range(0.1..1.1)).collect()
}

fn finish(k: &GridKernel, f: &Factors, p: f64, iterations: usize, converged: bool) -> Result<ApproxResult> {
    let prob = problem_of(k)?;
    let approx = prob.product(f);
    let residual: Vec<f64> = k.values.iter().zip(&approx).map(|(a, b)| a - b).collect();
    let (n1, n2, m) = (prob.n1, prob.n2, f.m);
    let mut lambdas = Vec::with_capacity(m);
    let mut gs = Vec::with_capacity(m);
    let mut hs = Vec::with_capacity(m);
    for c in 0..m {
        let g: Vec<f64> = (0..n1).map(|i| f.w[i * m + c]).collect();
        let h: Vec<f64> = f.h[c * n2..(c + 1) * n2].to_vec();
        let gn = k.marginals[0].lp_of(&g, 2.0);
        let hn = k.marginals[1].lp_of(&h, 2.0);
        if gn > 0.0 && hn > 0.0 {
            lambdas.push(gn * hn);
            gs.push(g.iter().map(|v| v / gn).collect());
            hs.push(h.iter().map(|v| v / hn).collect());
        } else {
            lambdas.push(0.0);
            gs.push(g);
            hs.push(h);
        }
    }
    let representation = DegenerateRepresentation::diagonal(&lambdas, vec![gs, hs])?;
    Ok(ApproxResult {
        degree: m,
        representation,
        p,
        residual_lp: k.table_lp_norm(&residual, p),
        residual_l2: k.table_lp_norm(&residual, 2.0),
        iterations,
        converged,
        residual,
    })
}

/// Weighted nonnegative factorization `f ≈ Σ_{c ≤ M} g_c ⊗ h_c` by
/// multiplicative updates on the weighted `L_2` error.
///
/// `residual_lp` reports the `L_p` error of that `L_2` fit. Deterministic for a
/// fixed `seed`.
pub fn nnmf_approximate(k: &GridKernel, m: usize, p: f64, seed: u64, cfg: &NmfConfig) -> Result<ApproxResult> {
    if m == 0 {
        return Err(Error::InvalidInput("degree M must be >= 1".into()));
    }
    let prob = problem_of(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = init_scale(k, m);
    let mut f = Factors {
        m,
        w: random_component(&mut rng, prob.n1 * m, scale),
        h: random_component(&mut rng, m * prob.n2, scale),
    };
    let (iterations, converged, _) = prob.run(&mut f, cfg);
    finish(k, &f, p, iterations, converged)
}

/// Degrees `1..=m_max`, each warm-started from the previous fit plus one
/// random component.
///
/// If a warm start ends above its predecessor's objective, the predecessor's
/// factors with an all-zero extra component are kept instead, so the weighted
/// `L_2` residual never increases with `M`.
pub fn degree_sweep(k: &GridKernel, m_max: usize, p: f64, seed: u64, cfg: &NmfConfig) -> Result<Vec<ApproxResult>> {
    if m_max == 0 {
        return Err(Error::InvalidInput("M_max must be >= 1".into()));
    }
    let prob = problem_of(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = init_scale(k, 1);
    let mut current = Factors {
        m: 1,
        w: random_component(&mut rng, prob.n1, scale),
        h: random_component(&mut rng, prob.n2, scale),
    };
    let (mut iters, mut conv, mut obj) = prob.run(&mut current, cfg);
    let mut out = vec![finish(k, &current, p, iters, conv)?];
    for m in 2..=m_max {
        let new_w = random_component(&mut rng, prob.n1, 0.1 * scale);
        let new_h = random_component(&mut rng, prob.n2, 0.1 * scale);
        let mut w = Vec::with_capacity(prob.n1 * m);
        for i in 0..prob.n1 {
            w.extend_from_slice(&current.w[i * (m - 1)..(i + 1) * (m - 1)]);
            w.push(new_w[i]);
        }
        let mut h = current.h.clone();
        h.extend_from_slice(&new_h);
        let mut candidate = Factors { m, w, h };
        let (it, cv, cand_obj) = prob.run(&mut candidate, cfg);
        if cand_obj <= obj {
            current = candidate;
            iters = it;
            conv = cv;
            obj = cand_obj;
        } else {
            let mut w = Vec::with_capacity(prob.n1 * m);
            for i in 0..prob.n1 {
                w.extend_from_slice(&current.w[i * (m - 1)..(i + 1) * (m - 1)]);
                w.push(0.0);
            }
            let mut h = current.h.clone();
            h.extend(std::iter::repeat_n(0.0, prob.n2));
            current = Factors { m, w, h };
        }
        out.push(finish(k, &current, p, iters, conv)?);
    }
    Ok(out)
}

/// `(g, h)` with `f = g ⊗ h` exactly (to `1e-12` relative), if such a split exists.
pub fn rank_one_factors(k: &GridKernel) -> Option<(Vec<f64>, Vec<f64>)> {
    if k.d() != 2 {
        return None;
    }
    let (n1, n2) = (k.marginals[0].len(), k.marginals[1].len());
    let v = &k.values;
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for i in 0..n1 {
        for j in 0..n2 {
            if v[i * n2 + j] > best {
                best = v[i * n2 + j];
                bi = i;
                bj = j;
            }
        }
    }
    if best <= 0.0 {
        return Some((vec![0.0; n1], vec![0.0; n2]));
    }
    let g: Vec<f64> = (0..n1).map(|i| v[i * n2 + bj] / best).collect();
    let h: Vec<f64> = v[bi * n2..(bi + 1) * n2].to_vec();
    for i in 0..n1 {
        for j in 0..n2 {
            if (v[i * n2 + j] - g[i] * h[j]).abs() > 1e-12 * best {
                return None;
            }
        }
    }
    Some((g, h))
}

/// Closed-form test kernels on a two-dimensional grid.
pub mod presets {
    use serde::{Deserialize, Serialize};

    use super::{DegenerateRepresentation, GridKernel, Marginal};
    use crate::Result;

    /// Kernel families used by the test battery and the CLI.
    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    #[serde(tag = "kind", rename_all = "snake_case")]
    pub enum KernelPreset {
        Constant { c: f64 },
        /// `f(x, y) = x y`.
        Product,
        Min,
        /// `e^{−x−y} (1 + x y)`.
        ProductExp,
        /// `Σ_{k ≤ r} λ_k φ_k(x) φ_k(y)` with the fixed nonnegative family of [`basis`].
        RankR { r: usize },
    }

    /// Nonnegative basis functions `1`, `x/(1+x)`, `e^{−x/2}`, `x²/(1+x²)`.
    pub fn basis(k: usize, x: f64) -> f64 {
        match k % 4 {
            0 => 1.0,
            1 => x / (1.0 + x),
            2 => (-0.5 * x).exp(),
            _ => x * x / (1.0 + x * x),
        }
    }

    pub const RANK_WEIGHTS: [f64; 4] = [1.0, 0.7, 0.4, 0.25];

    impl KernelPreset {
        pub fn name(&self) -> String {
            match self {
                KernelPreset::Constant { c } => format!("constant({c})"),
                KernelPreset::Product => "product".into(),
                KernelPreset::Min => "min".into(),
                KernelPreset::ProductExp => "product_exp".into(),
                KernelPreset::RankR { r } => format!("rank{r}"),
            }
        }

        pub fn eval(&self, x: f64, y: f64) -> f64 {
            match *self {
                KernelPreset::Constant { c } => c,
                KernelPreset::Product => x * y,
                KernelPreset::Min => x.min(y),
                KernelPreset::ProductExp => (-x - y).exp() * (1.0 + x * y),
                KernelPreset::RankR { r } => (0..r)
                    .map(|k| RANK_WEIGHTS[k % RANK_WEIGHTS.len()] * basis(k, x) * basis(k, y))
                    .sum(),
            }
        }

        pub fn grid(&self, mx: Marginal, my: Marginal) -> Result<GridKernel> {
            GridKernel::from_fn(vec![mx, my], |x| self.eval(x[0], x[1]))
        }
    }

    /// Rank-`r` product kernel in `d` coordinates as a representation.
    pub fn rank_r_representation(marginals: &[Marginal], r: usize) -> Result<DegenerateRepresentation> {
        let factors = marginals
            .iter()
            .map(|m| (0..r).map(|k| m.points.iter().map(|&x| basis(k, x)).collect()).collect())
            .collect();
        DegenerateRepresentation::diagonal(&RANK_WEIGHTS.iter().cycle().take(r).copied().collect::<Vec<_>>(), factors)
    }
}
