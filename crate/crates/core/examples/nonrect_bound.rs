//! Bounds over index sets that are not boxes.

use ubound::cli::KernelFile;
use ubound::multisum::{IndexSet, NonRectBound, PreparedKernel, WBoundConfig};
use ubound::verify::exact_moment;

pub struct Summary {
    pub bound: NonRectBound,
    pub widened: NonRectBound,
    pub exact: f64,
}

pub fn run_example() -> ubound::Result<Summary> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let kernel = KernelFile::load(&dir.join("small_table.json"))?.build()?;
    let points: Vec<Vec<usize>> = serde_json::from_str(&std::fs::read_to_string(dir.join("ell_set.json"))?)?;
    let l = IndexSet::new(points)?;

    let pk = PreparedKernel::from_grid(kernel.grid.clone(), WBoundConfig { m_max: 3, ..Default::default() })?;
    let bound = pk.nonrect_bound(&l, 3.0, 0)?;
    let widened = pk.nonrect_bound(&l, 3.0, 2)?;
    // 7 points on a 3-point support: 3^6 outcomes, small enough to enumerate
    let exact = exact_moment(&kernel.sum_kernel, &l, 3.0)?;
    Ok(Summary { bound, widened, exact })
}

#[allow(dead_code)]
fn main() -> ubound::Result<()> {
    let s = run_example()?;
    println!("exact |S_L|_3 = {:.5}", s.exact);
    println!("bound  {:.5} from box {:?} (|L+|/|L| = {:.3})", s.bound.value, s.bound.box_sides, s.bound.ratio);
    println!("widened search: {:.5} from box {:?}", s.widened.value, s.widened.box_sides);
    Ok(())
}
