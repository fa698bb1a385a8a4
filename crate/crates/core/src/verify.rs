//! Ground truth for the bounds: exact enumeration on small finite cases and
//! a reproducible parallel Monte Carlo harness.
//!
//! Monte Carlo work is split into `n_chunks` chunks. Chunk `c` draws from a
//! ChaCha8 stream seeded with `seed` and positioned at stream number `c`, and
//! chunk statistics are merged in chunk order, so results depend on
//! `(seed, n_chunks)` only and not on how many workers run them.

pub mod battery;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::bell::{log_bell, BellEvalConfig};
use crate::kernels::{lp_norm, materialize, DegenerateRepresentation, GridKernel, Marginal};
use crate::multisum::{IndexSet, PreparedKernel};
use crate::special::ln_factorial;
use crate::{Error, Result};

/// Largest number of sample configurations [`exact_moments`] will enumerate.
pub const ENUMERATION_LIMIT: f64 = 1e7;
/// Width of every confidence interval, in standard errors.
pub const Z_SCORE: f64 = 3.0;
/// Fewer exceedances than this never produce a tail FAIL.
pub const MIN_EXCEEDANCES: u64 = 30;
/// Relative slack granted to a bound before a comparison can fail.
pub const COMPARISON_SLACK: f64 = 1e-9;

/// Distribution of one coordinate; every family is supported on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    FiniteDiscrete { atoms: Vec<f64>, probs: Vec<f64> },
    Exponential { rate: f64 },
    Poisson { beta: f64 },
    /// Uniform on `[0, c]`.
    Uniform { c: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DistributionSpec::FiniteDiscrete { atoms, probs } => {
                return Marginal::new(atoms.clone(), probs.clone()).and_then(|_| {
                    if atoms.iter().any(|a| *a < 0.0) {
                        Err(Error::InvalidInput("atoms must be >= 0".into()))
                    } else {
                        Ok(())
                    }
                });
            }
            DistributionSpec::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            DistributionSpec::Poisson { beta } => *beta > 0.0 && beta.is_finite(),
            DistributionSpec::Uniform { c } => *c > 0.0 && c.is_finite(),
            DistributionSpec::LogNormal { mu, sigma } => mu.is_finite() && *sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid distribution parameters: {self:?}")))
        }
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            DistributionSpec::FiniteDiscrete { atoms, probs } => {
                atoms.iter().zip(probs).filter(|(a, _)| **a <= x).map(|(_, p)| p).sum()
            }
            DistributionSpec::Exponential { rate } => -(-rate * x).exp_m1(),
            DistributionSpec::Poisson { beta } => {
                let k = x.floor() as u64;
                (0..=k).map(|j| poisson_ln_pmf(*beta, j).exp()).sum::<f64>().min(1.0)
            }
            DistributionSpec::Uniform { c } => (x / c).min(1.0),
            DistributionSpec::LogNormal { mu, sigma } => {
                if x == 0.0 {
                    0.0
                } else {
                    0.5 * erfc(-(x.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
                }
            }
        }
    }

    /// `E X^p`.
    pub fn raw_moment(&self, p: f64, cfg: &BellEvalConfig) -> Result<f64> {
        Ok(match self {
            DistributionSpec::FiniteDiscrete { atoms, probs } => {
                atoms.iter().zip(probs).map(|(a, w)| w * a.powf(p)).sum()
            }
            DistributionSpec::Exponential { rate } => (ln_gamma(p + 1.0) - p * rate.ln()).exp(),
            DistributionSpec::Poisson { beta } => log_bell(p, *beta, cfg)?.value(),
            DistributionSpec::Uniform { c } => c.powf(p) / (p + 1.0),
            DistributionSpec::LogNormal { mu, sigma } => (p * mu + 0.5 * p * p * sigma * sigma).exp(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistributionSpec::FiniteDiscrete { atoms, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, p) in atoms.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *a;
                    }
                }
                *atoms.last().expect("validated nonempty")
            }
            DistributionSpec::Exponential { rate } => rand_distr::Exp::new(*rate).expect("validated").sample(rng),
            DistributionSpec::Poisson { beta } => sample_poisson(*beta, rng) as f64,
            DistributionSpec::Uniform { c } => c * rng.random::<f64>(),
            DistributionSpec::LogNormal { mu, sigma } => {
                rand_distr::LogNormal::new(*mu, *sigma).expect("validated").sample(rng)
            }
        }
    }

    /// A finite marginal approximating this law.
    ///
    /// Discrete laws keep their atoms (Poisson is cut where the remaining
    /// mass drops below `1e-16` and the remainder is added to the last atom).
    /// Continuous laws use `cells` equal cells on `[0, upper]`, each carrying
    /// its probability mass at its midpoint; the last cell also takes the mass
    /// beyond `upper`.
    pub fn discretize(&self, cells: usize, upper: Option<f64>) -> Result<Marginal> {
        self.validate()?;
        match self {
            DistributionSpec::FiniteDiscrete { atoms, probs } => Marginal::new(atoms.clone(), probs.clone()),
            DistributionSpec::Poisson { beta } => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                let mut mass = 0.0;
                let mut k = 0u64;
                while 1.0 - mass > 1e-16 && k < 100_000 {
                    let w = poisson_ln_pmf(*beta, k).exp();
                    if w == 0.0 && (k as f64) > *beta {
                        break;
                    }
                    points.push(k as f64);
                    weights.push(w);
                    mass += w;
                    k += 1;
                }
                close_mass(&mut weights);
                Marginal::new(points, weights)
            }
            _ => {
                if cells == 0 {
                    return Err(Error::InvalidInput("need at least one cell".into()));
                }
                let upper = upper.unwrap_or_else(|| self.default_upper());
                if !(upper > 0.0) {
                    return Err(Error::InvalidInput(format!("discretization upper limit must be > 0, got {upper}")));
                }
                let h = upper / cells as f64;
                let points: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
                let mut weights: Vec<f64> =
                    (0..cells).map(|i| self.cdf((i + 1) as f64 * h) - self.cdf(i as f64 * h)).collect();
                close_mass(&mut weights);
                Marginal::new(points, weights)
            }
        }
    }

    fn default_upper(&self) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => 14.0 / rate,
            DistributionSpec::Uniform { c } => *c,
            DistributionSpec::LogNormal { mu, sigma } => (mu + 5.0 * sigma).exp(),
            DistributionSpec::FiniteDiscrete { atoms, .. } => atoms.iter().fold(0.0, |m, a| m.max(*a)),
            DistributionSpec::Poisson { beta } => beta + 20.0 * beta.sqrt() + 20.0,
        }
    }
}

/// Makes the weights sum to one by assigning the missing mass to the last entry.
fn close_mass(weights: &mut [f64]) {
    let n = weights.len();
    let head: f64 = weights[..n - 1].iter().sum();
    weights[n - 1] = (1.0 - head).max(0.0);
}

fn poisson_ln_pmf(beta: f64, k: u64) -> f64 {
    k as f64 * beta.ln() - beta - ln_factorial(k as usize)
}

/// Inversion for `β ≤ 10`, transformed rejection with squeeze (PTRS) above.
pub fn sample_poisson<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> u64 {
    if beta <= 10.0 {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut pmf = (-beta).exp();
        let mut cdf = pmf;
        while u > cdf && k < 10_000 {
            k += 1;
            pmf *= beta / k as f64;
            cdf += pmf;
        }
        return k;
    }
    let slam = beta.sqrt();
    let loglam = beta.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + beta + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -beta + k * loglam - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}

/// A kernel that can be summed over an index set: either a grid table or a
/// representation on finite marginals.
#[derive(Debug, Clone, PartialEq)]
pub enum SumKernel {
    Grid(GridKernel),
    Representation { representation: DegenerateRepresentation, marginals: Vec<Marginal> },
}

impl SumKernel {
    pub fn marginals(&self) -> &[Marginal] {
        match self {
            SumKernel::Grid(k) => k.marginals(),
            SumKernel::Representation { marginals, .. } => marginals,
        }
    }

    pub fn d(&self) -> usize {
        self.marginals().len()
    }

    /// The kernel as a table on its grid.
    pub fn to_grid(&self) -> Result<GridKernel> {
        match self {
            SumKernel::Grid(k) => Ok(k.clone()),
            SumKernel::Representation { representation, marginals } => Ok(materialize(representation, marginals)?.kernel),
        }
    }
}

/// Grid-index samples: `samples[s][i]` is the support index of `ξ_{i+1}(s)`.
pub type Samples = Vec<Vec<usize>>;

/// `|L|⁻¹ Σ_{k ∈ L} f(ξ_{k(1)}(1), …, ξ_{k(d)}(d))`.
///
/// Full boxes use per-coordinate sums: for a representation,
/// `Σ_k λ(k) Π_s mean_i g^{(s)}_{k(s)}(ξ_i(s))`; for a grid, index counts.
pub fn s_l_realize(k: &SumKernel, samples: &[Vec<usize>], l: &IndexSet) -> Result<f64> {
    if l.d() != k.d() || samples.len() != k.d() {
        return Err(Error::InvalidInput(format!(
            "kernel has d={}, index set d={}, samples for {} coordinates",
            k.d(),
            l.d(),
            samples.len()
        )));
    }
    for (s, (_, hi)) in l.bounding_box().into_iter().enumerate() {
        if hi > samples[s].len() {
            return Err(Error::IndexOutOfRange { axis: s, index: hi, available: samples[s].len() });
        }
    }
    Ok(realize_unchecked(k, samples, l, &mut Vec::new()))
}

fn realize_unchecked(k: &SumKernel, samples: &[Vec<usize>], l: &IndexSet, scratch: &mut Vec<Vec<f64>>) -> f64 {
    let card = l.cardinality() as f64;
    let bbox = l.bounding_box();
    let is_box = l.is_box();
    match k {
        SumKernel::Representation { representation: r, .. } if is_box => {
            // mean of each factor over the box's sample slice
            let means: Vec<Vec<f64>> = r
                .factors()
                .iter()
                .enumerate()
                .map(|(s, fs)| {
                    let slice = &samples[s][bbox[s].0 - 1..bbox[s].1];
                    fs.iter()
                        .map(|g| slice.iter().map(|&i| g[i]).sum::<f64>() / slice.len() as f64)
                        .collect()
                })
                .collect();
            r.terms()
                .iter()
                .map(|(kk, lam)| lam * kk.iter().enumerate().map(|(s, &ks)| means[s][ks]).product::<f64>())
                .sum()
        }
        SumKernel::Grid(g) if is_box && l.cardinality() > g.values().len() => {
            let shape = g.shape();
            scratch.resize(shape.len(), Vec::new());
            for (s, n) in shape.iter().enumerate() {
                scratch[s].clear();
                scratch[s].resize(*n, 0.0);
                for &i in &samples[s][bbox[s].0 - 1..bbox[s].1] {
                    scratch[s][i] += 1.0;
                }
            }
            let mut total = 0.0;
            let mut flat = 0;
            crate::kernels::for_each_index(&shape, |idx| {
                let w: f64 = idx.iter().enumerate().map(|(s, &i)| scratch[s][i]).product();
                if w != 0.0 {
                    total += w * g.values()[flat];
                }
                flat += 1;
            });
            total / card
        }
        _ => {
            let mut total = 0.0;
            let mut idx = vec![0usize; l.d()];
            for pt in l.points() {
                for (s, &i) in pt.iter().enumerate() {
                    idx[s] = samples[s][i - 1];
                }
                total += match k {
                    SumKernel::Grid(g) => g.get(&idx),
                    SumKernel::Representation { representation, .. } => representation.eval(&idx),
                };
            }
            total / card
        }
    }
}

/// Sample count, seed and chunking of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub n_chunks: u64,
    pub p_list: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// Worker threads; `0` means the `UBOUND_THREADS` variable or all cores.
    /// Never affects results and is not serialized.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_samples: 100_000, seed: 0, n_chunks: 64, p_list: vec![2.0, 3.0, 4.0], y_grid: Vec::new(), threads: 0 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_chunks == 0 {
            return Err(Error::InvalidInput("n_samples and n_chunks must be >= 1".into()));
        }
        if self.p_list.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("moment orders must be positive".into()));
        }
        if self.y_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("y grid must be strictly ascending".into()));
        }
        Ok(())
    }

    fn chunk_range(&self, c: u64) -> u64 {
        let base = self.n_samples / self.n_chunks;
        base + u64::from(c < self.n_samples % self.n_chunks)
    }
}

/// Worker count from `UBOUND_THREADS`, or `None` when unset or invalid.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("UBOUND_THREADS").ok()?.trim().parse().ok().filter(|n: &usize| *n > 0)
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    let n = if threads > 0 { threads } else { threads_from_env().unwrap_or(0) };
    match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// Streaming mean and sum of squared deviations (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Running {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Running) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn stderr_of_mean(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

#[derive(Debug, Clone)]
struct ChunkStats {
    powers: Vec<Running>,
    exceed: Vec<u64>,
}

fn merge_chunks(chunks: Vec<ChunkStats>, np: usize, ny: usize) -> ChunkStats {
    let mut acc = ChunkStats { powers: vec![Running::default(); np], exceed: vec![0; ny] };
    for c in &chunks {
        for (a, b) in acc.powers.iter_mut().zip(&c.powers) {
            a.merge(b);
        }
        for (a, b) in acc.exceed.iter_mut().zip(&c.exceed) {
            *a += b;
        }
    }
    acc
}

/// `(E X^p)^{1/p}` estimated from a sample, with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    /// Sample mean of `X^p`.
    pub mean_power: f64,
    pub mean_power_stderr: f64,
    pub root: f64,
    pub stderr: f64,
}

impl MomentEstimate {
    fn from_running(p: f64, r: &Running) -> Self {
        let m = r.mean;
        let se_m = r.stderr_of_mean();
        let root = m.max(0.0).powf(1.0 / p);
        let stderr = if m > 0.0 { se_m * m.powf(1.0 / p - 1.0) / p } else { 0.0 };
        Self { p, mean_power: m, mean_power_stderr: se_m, root, stderr }
    }
}

/// Empirical `P(X ≥ y)` with a Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub y: f64,
    pub exceedances: u64,
    pub n: u64,
    pub frequency: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Wilson score interval for `x` successes out of `n` at `z` standard errors.
pub fn wilson_interval(x: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let ph = x as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (ph + z2 / (2.0 * nf)) / denom;
    let half = z * (ph * (1.0 - ph) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

impl TailEstimate {
    fn new(y: f64, exceedances: u64, n: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(exceedances, n, Z_SCORE);
        Self { y, exceedances, n, frequency: exceedances as f64 / n as f64, ci_lo, ci_hi }
    }
}

/// Moments and tails of `S_L` from one shared simulation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimates {
    pub moments: Vec<MomentEstimate>,
    pub tails: Vec<TailEstimate>,
}

/// Simulates `S_L` `cfg.n_samples` times, drawing each coordinate's samples
/// from its marginal.
pub fn mc_estimates(k: &SumKernel, l: &IndexSet, cfg: &McConfig) -> Result<McEstimates> {
    cfg.validate()?;
    if l.d() != k.d() {
        return Err(Error::InvalidInput(format!("index set has d={}, kernel d={}", l.d(), k.d())));
    }
    let counts = l.max_index();
    let samplers: Vec<WeightedIndex<f64>> = k
        .marginals()
        .iter()
        .map(|m| WeightedIndex::new(&m.weights).map_err(|e| Error::InvalidInput(format!("marginal weights: {e}"))))
        .collect::<Result<_>>()?;
    let (np, ny) = (cfg.p_list.len(), cfg.y_grid.len());
    let chunks: Vec<ChunkStats> = with_pool(cfg.threads, || {
        (0..cfg.n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(c);
                let mut samples: Samples = counts.iter().map(|&n| vec![0usize; n]).collect();
                let mut scratch = Vec::new();
                let mut stats = ChunkStats { powers: vec![Running::default(); np], exceed: vec![0; ny] };
                for _ in 0..cfg.chunk_range(c) {
                    for (s, sm) in samplers.iter().enumerate() {
                        for slot in samples[s].iter_mut() {
                            *slot = sm.sample(&mut rng);
                        }
                    }
                    let v = realize_unchecked(k, &samples, l, &mut scratch);
                    for (r, p) in stats.powers.iter_mut().zip(&cfg.p_list) {
                        r.push(v.powf(*p));
                    }
                    for (e, y) in stats.exceed.iter_mut().zip(&cfg.y_grid) {
                        *e += u64::from(v >= *y);
                    }
                }
                stats
            })
            .collect()
    });
    let total = merge_chunks(chunks, np, ny);
    Ok(McEstimates {
        moments: cfg.p_list.iter().zip(&total.powers).map(|(p, r)| MomentEstimate::from_running(*p, r)).collect(),
        tails: cfg.y_grid.iter().zip(&total.exceed).map(|(y, e)| TailEstimate::new(*y, *e, cfg.n_samples)).collect(),
    })
}

/// Moment roots of `S_L` (see [`mc_estimates`]).
pub fn mc_moments(k: &SumKernel, l: &IndexSet, cfg: &McConfig) -> Result<Vec<MomentEstimate>> {
    let cfg = McConfig { y_grid: Vec::new(), ..cfg.clone() };
    Ok(mc_estimates(k, l, &cfg)?.moments)
}

/// Exceedance frequencies of `S_L` (see [`mc_estimates`]).
pub fn mc_tail(k: &SumKernel, l: &IndexSet, cfg: &McConfig) -> Result<Vec<TailEstimate>> {
    let cfg = McConfig { p_list: Vec::new(), ..cfg.clone() };
    Ok(mc_estimates(k, l, &cfg)?.tails)
}

/// Sample estimates of `E X^p` for a single distribution.
pub fn mc_raw_moments(dist: &DistributionSpec, cfg: &McConfig) -> Result<Vec<MomentEstimate>> {
    cfg.validate()?;
    dist.validate()?;
    let np = cfg.p_list.len();
    let chunks: Vec<ChunkStats> = with_pool(cfg.threads, || {
        (0..cfg.n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(c);
                let mut stats = ChunkStats { powers: vec![Running::default(); np], exceed: Vec::new() };
                for _ in 0..cfg.chunk_range(c) {
                    let x = dist.sample(&mut rng);
                    for (r, p) in stats.powers.iter_mut().zip(&cfg.p_list) {
                        r.push(x.powf(*p));
                    }
                }
                stats
            })
            .collect()
    });
    let total = merge_chunks(chunks, np, 0);
    Ok(cfg.p_list.iter().zip(&total.powers).map(|(p, r)| MomentEstimate::from_running(*p, r)).collect())
}

/// Number of sample configurations an exact computation of `S_L` would visit.
pub fn enumeration_size(k: &SumKernel, l: &IndexSet) -> f64 {
    let used = used_indices(l);
    k.marginals()
        .iter()
        .zip(&used)
        .map(|(m, u)| (m.weights.iter().filter(|w| **w > 0.0).count() as f64).powi(u.len() as i32))
        .product()
}

fn used_indices(l: &IndexSet) -> Vec<Vec<usize>> {
    (0..l.d())
        .map(|s| {
            let mut v: Vec<usize> = l.points().iter().map(|p| p[s]).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect()
}

/// `E S_L^p` for every `p` in `ps`, by enumerating all sample configurations.
pub fn exact_moments(k: &SumKernel, l: &IndexSet, ps: &[f64]) -> Result<Vec<f64>> {
    if l.d() != k.d() {
        return Err(Error::InvalidInput(format!("index set has d={}, kernel d={}", l.d(), k.d())));
    }
    let outcomes = enumeration_size(k, l);
    if outcomes > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { outcomes, limit: ENUMERATION_LIMIT });
    }
    let grid = k.to_grid()?;
    let used = used_indices(l);
    let atoms: Vec<Vec<usize>> = grid
        .marginals()
        .iter()
        .map(|m| (0..m.len()).filter(|&i| m.weights[i] > 0.0).collect())
        .collect();
    // one enumeration slot per (axis, used sample index)
    let mut slot_axis = Vec::new();
    let mut slot_of: Vec<std::collections::HashMap<usize, usize>> = vec![Default::default(); l.d()];
    for (s, u) in used.iter().enumerate() {
        for &i in u {
            slot_of[s].insert(i, slot_axis.len());
            slot_axis.push(s);
        }
    }
    let point_slots: Vec<Vec<usize>> =
        l.points().iter().map(|pt| pt.iter().enumerate().map(|(s, i)| slot_of[s][i]).collect()).collect();
    let radix: Vec<usize> = slot_axis.iter().map(|&s| atoms[s].len()).collect();
    let card = l.cardinality() as f64;
    let mut totals = vec![0.0; ps.len()];
    let mut idx = vec![0usize; l.d()];
    crate::kernels::for_each_index(&radix, |choice| {
        let prob: f64 = choice
            .iter()
            .enumerate()
            .map(|(slot, &c)| {
                let s = slot_axis[slot];
                grid.marginals()[s].weights[atoms[s][c]]
            })
            .product();
        let mut sum = 0.0;
        for slots in &point_slots {
            for (s, &slot) in slots.iter().enumerate() {
                idx[s] = atoms[s][choice[slot]];
            }
            sum += grid.get(&idx);
        }
        let v = sum / card;
        for (t, p) in totals.iter_mut().zip(ps) {
            *t += prob * v.powf(*p);
        }
    });
    Ok(totals)
}

/// `E S_L^p` by enumeration; fails with `TooLarge` past [`ENUMERATION_LIMIT`].
pub fn exact_moment(k: &SumKernel, l: &IndexSet, p: f64) -> Result<f64> {
    Ok(exact_moments(k, l, &[p])?[0])
}

/// `|S_{(1,…,1)}|_p = |f(ξ)|_p`, a lower value for `sup_L |S_L|_p`.
pub fn lower_bound_s1(k: &GridKernel, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::Domain(format!("lower bound needs p >= 2, got {p}")));
    }
    Ok(lp_norm(k, p))
}

/// Outcome of comparing an estimate with a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// An estimated or exact moment root against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub p: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub exact: Option<f64>,
    pub bound: f64,
    pub status: Status,
}

impl MomentCheck {
    /// With an exact value the comparison is direct; otherwise PASS needs the
    /// upper `3σ` limit under the bound and FAIL needs the lower one above it.
    pub fn judge(est: &MomentEstimate, exact: Option<f64>, bound: f64) -> Self {
        let allowed = bound * (1.0 + COMPARISON_SLACK);
        let status = match exact {
            Some(x) if x <= allowed => Status::Pass,
            Some(_) => Status::Fail,
            None if est.root + Z_SCORE * est.stderr <= allowed => Status::Pass,
            None if est.root - Z_SCORE * est.stderr > allowed => Status::Fail,
            None => Status::Inconclusive,
        };
        Self { p: est.p, estimate: est.root, stderr: est.stderr, exact, bound, status }
    }
}

/// An empirical tail frequency against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub y: f64,
    pub exceedances: u64,
    pub frequency: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound: f64,
    pub status: Status,
}

impl TailCheck {
    /// FAIL needs at least [`MIN_EXCEEDANCES`] and the Wilson lower limit above the bound.
    pub fn judge(t: &TailEstimate, bound: f64) -> Self {
        let allowed = bound * (1.0 + COMPARISON_SLACK) + 1e-15;
        let status = if t.ci_hi <= allowed {
            Status::Pass
        } else if t.exceedances >= MIN_EXCEEDANCES && t.ci_lo > allowed {
            Status::Fail
        } else {
            Status::Inconclusive
        };
        Self {
            y: t.y,
            exceedances: t.exceedances,
            frequency: t.frequency,
            ci_lo: t.ci_lo,
            ci_hi: t.ci_hi,
            bound,
            status,
        }
    }
}

/// Everything measured for one kernel and index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n_samples: u64,
    pub seed: u64,
    pub n_chunks: u64,
    pub enumerated: bool,
    pub moments: Vec<MomentCheck>,
    pub tails: Vec<TailCheck>,
}

impl VerifyReport {
    pub fn count(&self, status: Status) -> usize {
        self.moments.iter().filter(|m| m.status == status).count()
            + self.tails.iter().filter(|t| t.status == status).count()
    }
}

/// Checks `moment_bounds[i]` (for `cfg.p_list[i]`) and `tail_bounds[j]` (for
/// `cfg.y_grid[j]`) against simulation, and against enumeration when it fits.
pub fn verify_against(
    k: &SumKernel,
    l: &IndexSet,
    cfg: &McConfig,
    moment_bounds: &[f64],
    tail_bounds: &[f64],
) -> Result<VerifyReport> {
    if moment_bounds.len() != cfg.p_list.len() || tail_bounds.len() != cfg.y_grid.len() {
        return Err(Error::InvalidInput("one bound per moment order and per tail level is required".into()));
    }
    let est = mc_estimates(k, l, cfg)?;
    let exact = if enumeration_size(k, l) <= ENUMERATION_LIMIT { Some(exact_moments(k, l, &cfg.p_list)?) } else { None };
    let moments = est
        .moments
        .iter()
        .enumerate()
        .map(|(i, m)| MomentCheck::judge(m, exact.as_ref().map(|e| e[i].powf(1.0 / m.p)), moment_bounds[i]))
        .collect();
    let tails = est.tails.iter().zip(tail_bounds).map(|(t, b)| TailCheck::judge(t, *b)).collect();
    Ok(VerifyReport {
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        n_chunks: cfg.n_chunks,
        enumerated: exact.is_some(),
        moments,
        tails,
    })
}

/// One row of [`ratio_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub p: f64,
    /// `ν(p) = Π_s |g_s(ξ(s))|_p`.
    pub nu: f64,
    pub lower_ratio: f64,
    pub upper_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub rows: Vec<RatioRow>,
    pub lower_min: f64,
    pub upper_max: f64,
}

/// For a product kernel, compares `|S_1|_p` and the best upper bound over the
/// given box shapes with `ν(p) = Π_s |g_s|_p`.
pub fn ratio_check(pk: &PreparedKernel, shapes: &[Vec<usize>], p_grid: &[f64]) -> Result<RatioReport> {
    let factors = pk
        .product_factors()
        .ok_or_else(|| Error::InvalidInput("ratio check needs a product kernel".into()))?;
    let marginals = pk.kernel().marginals();
    let mut rows = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let nu: f64 = factors.iter().zip(marginals).map(|(g, m)| m.lp_of(g, p)).product();
        let lower = lower_bound_s1(pk.kernel(), p)?;
        let upper = pk.bound_sup(p, shapes)?;
        rows.push(RatioRow { p, nu, lower_ratio: lower / nu, upper_ratio: upper / nu });
    }
    Ok(RatioReport {
        lower_min: rows.iter().map(|r| r.lower_ratio).fold(f64::INFINITY, f64::min),
        upper_max: rows.iter().map(|r| r.upper_ratio).fold(f64::NEG_INFINITY, f64::max),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::presets::KernelPreset;
    use crate::multisum::WBoundConfig;
    use approx::assert_relative_eq;

    fn bern() -> Marginal {
        Marginal::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    fn three() -> Marginal {
        Marginal::new(vec![0.0, 1.0, 3.0], vec![0.5, 0.3, 0.2]).unwrap()
    }

    fn cfg(n: u64, seed: u64) -> McConfig {
        McConfig { n_samples: n, seed, n_chunks: 16, p_list: vec![1.0, 2.0], y_grid: vec![0.5, 1.0, 2.0], threads: 2 }
    }

    #[test]
    fn distribution_validation_and_moments() {
        assert!(DistributionSpec::Exponential { rate: 0.0 }.validate().is_err());
        assert!(DistributionSpec::FiniteDiscrete { atoms: vec![-1.0], probs: vec![1.0] }.validate().is_err());
        let c = BellEvalConfig::default();
        assert_relative_eq!(DistributionSpec::Exponential { rate: 1.0 }.raw_moment(3.0, &c).unwrap(), 6.0, max_relative = 1e-12);
        assert_relative_eq!(DistributionSpec::Poisson { beta: 1.0 }.raw_moment(3.0, &c).unwrap(), 5.0, max_relative = 1e-12);
        assert_relative_eq!(DistributionSpec::Uniform { c: 2.0 }.raw_moment(2.0, &c).unwrap(), 4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(DistributionSpec::LogNormal { mu: 0.0, sigma: 1.0 }.cdf(1.0), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn discretization_preserves_mass_and_mean() {
        let m = DistributionSpec::Exponential { rate: 1.0 }.discretize(4000, Some(30.0)).unwrap();
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((m.mean_of(&m.points) - 1.0).abs() < 1e-4);
        let p = DistributionSpec::Poisson { beta: 2.0 }.discretize(0, None).unwrap();
        assert_relative_eq!(p.mean_of(&p.points), 2.0, max_relative = 1e-12);
        let u = DistributionSpec::Uniform { c: 2.0 }.discretize(4, None).unwrap();
        assert_eq!(u.points, vec![0.25, 0.75, 1.25, 1.75]);
    }

    #[test]
    fn poisson_sampler_matches_pmf() {
        for beta in [0.5, 4.0, 25.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let n = 200_000;
            let mut mean = 0.0;
            let mut var = 0.0;
            let draws: Vec<f64> = (0..n).map(|_| sample_poisson(beta, &mut rng) as f64).collect();
            for x in &draws {
                mean += x / n as f64;
            }
            for x in &draws {
                var += (x - mean).powi(2) / (n - 1) as f64;
            }
            assert!((mean - beta).abs() < 5.0 * (beta / n as f64).sqrt(), "beta={beta} mean={mean}");
            assert!((var / beta - 1.0).abs() < 0.03, "beta={beta} var={var}");
            let p0 = draws.iter().filter(|x| **x == beta.floor()).count() as f64 / n as f64;
            let expect = poisson_ln_pmf(beta, beta.floor() as u64).exp();
            assert!((p0 - expect).abs() < 5.0 * (expect / n as f64).sqrt());
        }
    }

    #[test]
    fn realize_constant_and_rank_one() {
        let ax = three();
        let c = SumKernel::Grid(KernelPreset::Constant { c: 2.0 }.grid(ax.clone(), ax.clone()).unwrap());
        let samples = vec![vec![0, 2, 1, 1], vec![2, 2, 0]];
        let l = IndexSet::full_box(&[4, 3]).unwrap();
        assert_relative_eq!(s_l_realize(&c, &samples, &l).unwrap(), 2.0, max_relative = 1e-15);

        let g = vec![0.5, 1.0, 2.0];
        let h = vec![1.0, 0.0, 4.0];
        let r = DegenerateRepresentation::rank_one(1.0, vec![g.clone(), h.clone()]).unwrap();
        let rep = SumKernel::Representation { representation: r.clone(), marginals: vec![ax.clone(), ax.clone()] };
        let grid = SumKernel::Grid(materialize(&r, &[ax.clone(), ax]).unwrap().kernel);
        let mg = samples[0].iter().map(|&i| g[i]).sum::<f64>() / 4.0;
        let mh = samples[1].iter().map(|&i| h[i]).sum::<f64>() / 3.0;
        let mut naive = 0.0;
        for &a in &samples[0] {
            for &b in &samples[1] {
                naive += g[a] * h[b];
            }
        }
        naive /= 12.0;
        for k in [&rep, &grid] {
            let v = s_l_realize(k, &samples, &l).unwrap();
            assert!((v - mg * mh).abs() <= 1e-12 * v.abs());
            assert!((v - naive).abs() <= 1e-12 * v.abs());
        }
        let diag = IndexSet::new(vec![vec![1, 1], vec![2, 2], vec![3, 3]]).unwrap();
        let direct = (g[0] * h[2] + g[2] * h[2] + g[1] * h[0]) / 3.0;
        for k in [&rep, &grid] {
            assert!((s_l_realize(k, &samples, &diag).unwrap() - direct).abs() < 1e-14);
        }
        let far = IndexSet::new(vec![vec![5, 1]]).unwrap();
        assert!(matches!(s_l_realize(&rep, &samples, &far), Err(Error::IndexOutOfRange { axis: 0, .. })));
    }

    #[test]
    fn exact_moment_examples() {
        let b = bern();
        let k = SumKernel::Grid(KernelPreset::Product.grid(b.clone(), b.clone()).unwrap());
        let l = IndexSet::full_box(&[2, 2]).unwrap();
        assert_relative_eq!(exact_moment(&k, &l, 2.0).unwrap(), 0.140625, max_relative = 1e-14);
        let ax = three();
        let g = KernelPreset::Min.grid(ax.clone(), ax.clone()).unwrap();
        let single = IndexSet::new(vec![vec![2, 3]]).unwrap();
        let direct: f64 = g.values().iter().zip(g.cell_weights()).map(|(v, w)| w * v.powi(3)).sum();
        assert_relative_eq!(exact_moment(&SumKernel::Grid(g.clone()), &single, 3.0).unwrap(), direct, max_relative = 1e-14);
        let big = IndexSet::full_box(&[20, 20]).unwrap();
        assert!(matches!(exact_moment(&SumKernel::Grid(g), &big, 2.0), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn exact_agrees_with_mc() {
        let ax = three();
        let k = SumKernel::Grid(KernelPreset::Min.grid(ax.clone(), ax).unwrap());
        let l = IndexSet::full_box(&[3, 3]).unwrap();
        let ps = [2.0, 3.0, 4.0];
        let exact = exact_moments(&k, &l, &ps).unwrap();
        let c = McConfig { n_samples: 200_000, p_list: ps.to_vec(), ..cfg(0, 4) };
        let mc = mc_moments(&k, &l, &c).unwrap();
        for (e, m) in exact.iter().zip(&mc) {
            assert!((m.mean_power - e).abs() < 4.0 * m.mean_power_stderr, "{e} vs {m:?}");
        }
    }

    #[test]
    fn point_masses_are_exact() {
        let point = Marginal::new(vec![2.0], vec![1.0]).unwrap();
        let k = SumKernel::Grid(KernelPreset::Product.grid(point.clone(), point).unwrap());
        let l = IndexSet::full_box(&[3, 2]).unwrap();
        let m = mc_moments(&k, &l, &cfg(1000, 1)).unwrap();
        assert_eq!(m[1].root, 4.0);
        assert_eq!(m[1].stderr, 0.0);
        let t = mc_tail(&k, &l, &McConfig { y_grid: vec![3.9, 4.0, 4.1], ..cfg(1000, 1) }).unwrap();
        let f: Vec<f64> = t.iter().map(|t| t.frequency).collect();
        assert_eq!(f, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn mean_of_exponential_product_is_one() {
        let e = DistributionSpec::Exponential { rate: 1.0 }.discretize(2000, Some(30.0)).unwrap();
        let k = SumKernel::Grid(KernelPreset::Product.grid(e.clone(), e).unwrap());
        let l = IndexSet::full_box(&[4, 4]).unwrap();
        let m = mc_moments(&k, &l, &cfg(100_000, 11)).unwrap();
        assert!((m[0].root - 1.0).abs() < 4.0 * m[0].stderr + 1e-4, "{:?}", m[0]);
    }

    #[test]
    fn stderr_shrinks_like_root_n() {
        let ax = three();
        let k = SumKernel::Grid(KernelPreset::Min.grid(ax.clone(), ax).unwrap());
        let l = IndexSet::full_box(&[2, 2]).unwrap();
        let mut ratios = Vec::new();
        for seed in 0..5 {
            let a = mc_moments(&k, &l, &cfg(20_000, seed)).unwrap()[1].stderr;
            let b = mc_moments(&k, &l, &cfg(40_000, seed + 100)).unwrap()[1].stderr;
            ratios.push(a / b);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((1.2..=1.7).contains(&mean), "{ratios:?}");
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let ax = three();
        let k = SumKernel::Grid(KernelPreset::ProductExp.grid(ax.clone(), ax).unwrap());
        let l = IndexSet::full_box(&[5, 4]).unwrap();
        let one = mc_estimates(&k, &l, &McConfig { threads: 1, ..cfg(30_000, 3) }).unwrap();
        let four = mc_estimates(&k, &l, &McConfig { threads: 4, ..cfg(30_000, 3) }).unwrap();
        assert_eq!(one, four);
        let other = mc_estimates(&k, &l, &cfg(30_000, 4)).unwrap();
        assert_ne!(one, other);
    }

    #[test]
    fn empirical_tail_is_monotone() {
        let ax = three();
        let k = SumKernel::Grid(KernelPreset::Min.grid(ax.clone(), ax).unwrap());
        let l = IndexSet::full_box(&[1, 2]).unwrap();
        let ys: Vec<f64> = (0..30).map(|i| 0.1 * i as f64 + 0.05).collect();
        let t = mc_tail(&k, &l, &McConfig { y_grid: ys, ..cfg(20_000, 2) }).unwrap();
        for w in t.windows(2) {
            assert!(w[1].frequency <= w[0].frequency);
        }
    }

    #[test]
    fn wilson_and_status_rules() {
        let (lo, hi) = wilson_interval(50, 100, 3.0);
        assert!(lo < 0.5 && hi > 0.5 && lo > 0.3 && hi < 0.7);
        assert_eq!(wilson_interval(0, 100, 3.0).0, 0.0);
        let t = TailEstimate::new(5.0, 20, 1000);
        assert_eq!(TailCheck::judge(&t, 0.0).status, Status::Inconclusive);
        let t = TailEstimate::new(5.0, 200, 1000);
        assert_eq!(TailCheck::judge(&t, 0.0).status, Status::Fail);
        assert_eq!(TailCheck::judge(&t, 1.0).status, Status::Pass);
        let m = MomentEstimate { p: 2.0, mean_power: 1.0, mean_power_stderr: 0.1, root: 1.0, stderr: 0.05 };
        assert_eq!(MomentCheck::judge(&m, None, 1.2).status, Status::Pass);
        assert_eq!(MomentCheck::judge(&m, None, 1.0).status, Status::Inconclusive);
        assert_eq!(MomentCheck::judge(&m, None, 0.8).status, Status::Fail);
        assert_eq!(MomentCheck::judge(&m, Some(1.0), 1.0).status, Status::Pass);
    }

    #[test]
    fn lower_bound_examples() {
        let ax = three();
        let g = vec![1.0, 2.0, 0.5];
        let h = vec![0.0, 1.0, 3.0];
        let r = DegenerateRepresentation::rank_one(1.0, vec![g.clone(), h.clone()]).unwrap();
        let k = materialize(&r, &[ax.clone(), ax.clone()]).unwrap().kernel;
        assert_relative_eq!(lower_bound_s1(&k, 3.0).unwrap(), ax.lp_of(&g, 3.0) * ax.lp_of(&h, 3.0), max_relative = 1e-12);
        let c = KernelPreset::Constant { c: 1.7 }.grid(ax.clone(), ax).unwrap();
        assert_relative_eq!(lower_bound_s1(&c, 4.0).unwrap(), 1.7, max_relative = 1e-14);
        assert!(lower_bound_s1(&c, 1.0).is_err());
    }

    #[test]
    fn ratio_check_examples() {
        let m = DistributionSpec::FiniteDiscrete { atoms: vec![0.0, 1.0, 2.0, 6.0], probs: vec![0.4, 0.3, 0.2, 0.1] }
            .discretize(0, None)
            .unwrap();
        let g: Vec<f64> = m.points.clone();
        let one = PreparedKernel::from_grid(GridKernel::new(vec![m.clone()], g.clone()).unwrap(), WBoundConfig::default()).unwrap();
        let two = PreparedKernel::from_grid(
            KernelPreset::Product.grid(m.clone(), m.clone()).unwrap(),
            WBoundConfig { m_max: 2, ..Default::default() },
        )
        .unwrap();
        let ps = [2.0, 3.0, 5.0, 8.0];
        let r1 = ratio_check(&one, &[vec![1], vec![10], vec![100]], &ps).unwrap();
        let r2 = ratio_check(&two, &[vec![1, 1], vec![10, 10], vec![100, 100]], &ps).unwrap();
        assert!(r1.lower_min >= 1.0 - 1e-9 && r2.lower_min >= 1.0 - 1e-9);
        assert!(r1.upper_max.is_finite() && r2.upper_max.is_finite());
        for (a, b) in r1.rows.iter().zip(&r2.rows) {
            assert!((b.upper_ratio - a.upper_ratio.powi(2)).abs() <= 1e-6 * b.upper_ratio);
        }
    }
}
