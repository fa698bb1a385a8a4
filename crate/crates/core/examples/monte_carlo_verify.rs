//! Checks moment and tail bounds for one kernel against simulation.

use ubound::cli::KernelFile;
use ubound::gls::{tail_upper, ConjugateGrid, PsiSpec};
use ubound::multisum::{IndexSet, WBoundConfig};
use ubound::verify::{verify_against, McConfig, Status, VerifyReport};

pub fn run_example() -> ubound::Result<VerifyReport> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/min_uniform.json");
    let kernel = KernelFile::load(&path)?.build()?;
    let pk = kernel.prepare(WBoundConfig { m_max: 4, ..Default::default() })?;
    let l = IndexSet::full_box(&[6, 6])?;

    let ps = [2.0, 3.0, 4.0];
    let moment_bounds = ps.iter().map(|&p| Ok(pk.bound(p, &l.sides())?.chosen)).collect::<ubound::Result<Vec<_>>>()?;

    // tabulated envelope from the bounds at p = 2..12
    let tp: Vec<f64> = (2..=12).map(f64::from).collect();
    let tv = tp.iter().map(|&p| Ok(pk.bound(p, &l.sides())?.chosen)).collect::<ubound::Result<Vec<_>>>()?;
    let ys = vec![2.8, 3.2, 3.6, 4.0];
    let curve = tail_upper(&PsiSpec::Tabulated { p: tp, values: tv }, &ys, 1.0, &ConjugateGrid::default())?;

    let mc = McConfig { n_samples: 50_000, seed: 11, p_list: ps.to_vec(), y_grid: ys, ..Default::default() };
    let report = verify_against(&kernel.sum_kernel, &l, &mc, &moment_bounds, &curve.bounds)?;
    assert_eq!(report.count(Status::Fail), 0);
    Ok(report)
}

#[allow(dead_code)]
fn main() -> ubound::Result<()> {
    let r = run_example()?;
    for m in &r.moments {
        println!("p={} estimate {:.4} ± {:.4}  bound {:.4}  {:?}", m.p, m.estimate, m.stderr, m.bound, m.status);
    }
    for t in &r.tails {
        println!("y={:.2} freq {:.2e} (≤ {:.2e})  bound {:.3e}  {:?}", t.y, t.frequency, t.ci_hi, t.bound, t.status);
    }
    Ok(())
}
