//! Composite moment bound for `S_L[f]` over boxes, loading kernels from JSON.

use ubound::cli::KernelFile;
use ubound::multisum::{BoundBreakdown, WBoundConfig};

pub fn data(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

pub fn run_example() -> ubound::Result<Vec<(String, BoundBreakdown)>> {
    let mut out = Vec::new();
    for name in ["rank1_exp.json", "min_uniform.json", "small_table.json"] {
        let kernel = KernelFile::load(&data(name))?.build()?;
        let pk = kernel.prepare(WBoundConfig { m_max: 4, ..Default::default() })?;
        for n in [[1, 1], [5, 5], [40, 40]] {
            out.push((name.to_string(), pk.bound(4.0, &n)?));
        }
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> ubound::Result<()> {
    for (name, b) in run_example()? {
        println!(
            "{name:<18} n={:?} trivial {:.4}  chosen {:.4}  via {}",
            b.n, b.trivial, b.chosen, b.provenance
        );
    }
    Ok(())
}
