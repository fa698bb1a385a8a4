//! The standard dominance battery: every preset kernel under three marginal
//! settings, boxes up to 20×20, three non-rectangular index sets and a
//! three-coordinate representation, each checked for moments and tails.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{verify_against, DistributionSpec, McConfig, Status, SumKernel, VerifyReport};
use crate::gls::{tail_upper, ConjugateGrid, PsiSpec};
use crate::kernels::presets::{rank_r_representation, KernelPreset};
use crate::kernels::{GridKernel, Marginal, NmfConfig};
use crate::multisum::{IndexSet, PreparedKernel, WBoundConfig};
use crate::{Result, SCHEMA_VERSION};

/// Largest kernel value after rescaling, so that tails above `e` are visible.
pub const KERNEL_PEAK: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub n_chunks: u64,
    pub p_list: Vec<f64>,
    /// Orders whose bounds form the tabulated envelope for the tail check.
    pub tail_p_list: Vec<f64>,
    pub tail_points: usize,
    pub m_max: usize,
    pub nmf: NmfConfig,
    #[serde(skip)]
    pub threads: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            seed: 7,
            n_chunks: 64,
            p_list: vec![2.0, 3.0, 4.0],
            tail_p_list: (2..=12).map(f64::from).collect(),
            tail_points: 12,
            m_max: 8,
            nmf: NmfConfig { iters: 4_000, rel_improvement: 1e-10 },
            threads: 0,
        }
    }
}

/// Named marginal settings of the battery.
pub fn marginal_settings() -> Result<Vec<(String, Marginal)>> {
    Ok(vec![
        ("uniform16".into(), Marginal::uniform((0..16).map(|i| 3.0 * i as f64 / 15.0).collect())?),
        ("exponential16".into(), DistributionSpec::Exponential { rate: 1.0 }.discretize(16, Some(4.0))?),
        (
            "discrete3".into(),
            DistributionSpec::FiniteDiscrete { atoms: vec![0.0, 1.0, 3.0], probs: vec![0.5, 0.3, 0.2] }.discretize(0, None)?,
        ),
    ])
}

pub fn battery_kernels() -> Vec<KernelPreset> {
    vec![
        KernelPreset::Constant { c: 3.0 },
        KernelPreset::Product,
        KernelPreset::RankR { r: 2 },
        KernelPreset::RankR { r: 3 },
        KernelPreset::Min,
        KernelPreset::ProductExp,
    ]
}

/// Boxes and non-rectangular sets, by name.
pub fn index_sets() -> Result<Vec<(String, IndexSet)>> {
    let mut out = Vec::new();
    for sides in [[1, 1], [3, 5], [10, 10], [20, 20]] {
        out.push((format!("box{}x{}", sides[0], sides[1]), IndexSet::full_box(&sides)?));
    }
    out.push(("diagonal3".into(), IndexSet::new((1..=3).map(|i| vec![i, i]).collect())?));
    out.push((
        "ell5".into(),
        IndexSet::new(vec![vec![1, 1], vec![2, 1], vec![1, 2], vec![1, 3], vec![2, 3]])?,
    ));
    let mut tri = Vec::new();
    for i in 1..=6 {
        for j in 1..=(7 - i) {
            tri.push(vec![i, j]);
        }
    }
    out.push(("triangle21".into(), IndexSet::new(tri)?));
    Ok(out)
}

/// Rescales a preset so its largest grid value is [`KERNEL_PEAK`]; constants keep their value.
fn battery_grid(preset: &KernelPreset, m: &Marginal) -> Result<GridKernel> {
    let k = preset.grid(m.clone(), m.clone())?;
    if matches!(preset, KernelPreset::Constant { .. }) || k.max_value() == 0.0 {
        return Ok(k);
    }
    let s = KERNEL_PEAK / k.max_value();
    GridKernel::new(k.marginals().to_vec(), k.values().iter().map(|v| v * s).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub kernel: String,
    pub marginal: String,
    pub index_set: String,
    pub d: usize,
    pub provenance: Vec<String>,
    pub verify: VerifyReport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

impl StatusCounts {
    fn add(&mut self, s: Status) {
        match s {
            Status::Pass => self.pass += 1,
            Status::Fail => self.fail += 1,
            Status::Inconclusive => self.inconclusive += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub schema: String,
    pub config: BatteryConfig,
    pub moments: StatusCounts,
    pub tails: StatusCounts,
    pub enumerated_cases: usize,
    pub cases: Vec<CaseReport>,
}

impl BatteryReport {
    pub fn failures(&self) -> usize {
        self.moments.fail + self.tails.fail
    }
}

struct Case {
    kernel: String,
    marginal: String,
    prepared: usize,
    sum_kernel: SumKernel,
    sets: Vec<(String, IndexSet)>,
}

fn tail_grid(peak: f64, points: usize) -> Vec<f64> {
    let e = std::f64::consts::E;
    let hi = peak.max(e + 1.0) * 1.01;
    (0..points.max(2)).map(|i| e + (hi - e) * i as f64 / (points.max(2) - 1) as f64).collect()
}

fn check_case(
    pk: &PreparedKernel,
    k: &SumKernel,
    name: &str,
    l: &IndexSet,
    cfg: &BatteryConfig,
) -> Result<(Vec<String>, VerifyReport)> {
    let bound_at = |p: f64| -> Result<(f64, String)> {
        if l.is_box() {
            let b = pk.bound(p, &l.sides())?;
            Ok((b.chosen, b.provenance))
        } else {
            let b = pk.nonrect_bound(l, p, 0)?;
            Ok((b.value, format!("box{:?}x{:.3}:{}", b.box_sides, b.ratio, b.inner.provenance)))
        }
    };
    let mut moment_bounds = Vec::new();
    let mut provenance = Vec::new();
    for &p in &cfg.p_list {
        let (b, prov) = bound_at(p)?;
        moment_bounds.push(b);
        provenance.push(format!("{name} p={p}: {prov}"));
    }
    let mut tab = Vec::new();
    for &p in &cfg.tail_p_list {
        tab.push(bound_at(p)?.0);
    }
    let ys = tail_grid(pk.kernel().max_value(), cfg.tail_points);
    let psi = PsiSpec::Tabulated { p: cfg.tail_p_list.clone(), values: tab.iter().map(|v| v.max(1e-300)).collect() };
    let curve = tail_upper(&psi, &ys, 1.0, &ConjugateGrid::default())?;
    let mc = McConfig {
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        n_chunks: cfg.n_chunks,
        p_list: cfg.p_list.clone(),
        y_grid: ys,
        threads: cfg.threads,
    };
    Ok((provenance, verify_against(k, l, &mc, &moment_bounds, &curve.bounds)?))
}

/// Runs the whole battery; the report depends on the configuration only.
pub fn run_battery(cfg: &BatteryConfig) -> Result<BatteryReport> {
    let wcfg = WBoundConfig { m_max: cfg.m_max, seed: cfg.seed, nmf: cfg.nmf, ..Default::default() };
    let sets = index_sets()?;
    let mut grids = Vec::new();
    let mut cases = Vec::new();
    for (mname, m) in marginal_settings()? {
        for preset in battery_kernels() {
            let g = battery_grid(&preset, &m)?;
            cases.push(Case {
                kernel: preset.name(),
                marginal: mname.clone(),
                prepared: grids.len(),
                sum_kernel: SumKernel::Grid(g.clone()),
                sets: sets.clone(),
            });
            grids.push(g);
        }
    }
    let threads = if cfg.threads > 0 { cfg.threads } else { super::threads_from_env().unwrap_or(0) };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok();
    let prepare = || grids.into_par_iter().map(|g| PreparedKernel::from_grid(g, wcfg)).collect::<Result<Vec<_>>>();
    let mut prepared = match &pool {
        Some(p) => p.install(prepare)?,
        None => prepare()?,
    };

    // three coordinates, supplied as a representation
    let (dname, dm) = marginal_settings()?.pop().expect("three settings");
    let ms = vec![dm.clone(), dm.clone(), dm];
    let rep = rank_r_representation(&ms, 2)?;
    prepared.push(PreparedKernel::from_representation(rep.clone(), &ms, wcfg)?);
    cases.push(Case {
        kernel: "rank2_d3".into(),
        marginal: dname,
        prepared: prepared.len() - 1,
        sum_kernel: SumKernel::Representation { representation: rep, marginals: ms },
        sets: vec![
            ("box2x2x2".into(), IndexSet::full_box(&[2, 2, 2])?),
            ("box4x4x4".into(), IndexSet::full_box(&[4, 4, 4])?),
        ],
    });

    let mut reports = Vec::new();
    let mut moments = StatusCounts::default();
    let mut tails = StatusCounts::default();
    let mut enumerated_cases = 0;
    for case in &cases {
        let pk = &prepared[case.prepared];
        for (lname, l) in &case.sets {
            let (provenance, verify) = check_case(pk, &case.sum_kernel, lname, l, cfg)?;
            verify.moments.iter().for_each(|m| moments.add(m.status));
            verify.tails.iter().for_each(|t| tails.add(t.status));
            enumerated_cases += usize::from(verify.enumerated);
            reports.push(CaseReport {
                kernel: case.kernel.clone(),
                marginal: case.marginal.clone(),
                index_set: lname.clone(),
                d: case.sum_kernel.d(),
                provenance,
                verify,
            });
        }
    }
    Ok(BatteryReport {
        schema: SCHEMA_VERSION.into(),
        config: cfg.clone(),
        moments,
        tails,
        enumerated_cases,
        cases: reports,
    })
}
