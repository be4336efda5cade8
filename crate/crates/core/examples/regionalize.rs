//! Contiguity-constrained Ward clustering of a lattice whose attribute
//! steps between two halves, printed as a label map.

use nbhd::regionalize::{constrained_cluster, FeatureMatrix};
use nbhd::synthgen::gen_lattice;
use nbhd::weights::{build_contiguity, ContiguityRule};

fn main() -> nbhd::Result<()> {
    let (rows, cols) = (8, 12);
    let md = gen_lattice(rows, cols, 100.0)?;
    let w = build_contiguity(&md, ContiguityRule::Rook);
    let values: Vec<Vec<f64>> = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            vec![if c < 6 { 0.0 } else { 3.0 } + 0.1 * ((r * 7 + c * 3) % 5) as f64, if r < 4 { 1.0 } else { -1.0 }]
        })
        .collect();
    let fm = FeatureMatrix {
        units: (0..rows * cols).collect(),
        names: vec!["level".into(), "band".into()],
        values,
        warnings: Vec::new(),
    };

    for k in [2, 4] {
        let (tree, reg) = constrained_cluster(&fm, &w, k)?;
        println!("k = {k}: WCSS {:.3}, {} merges", reg.wcss(), tree.merges.len());
        // Row 0 is the southern edge, so print north first.
        for r in (0..rows).rev() {
            let line: String = (0..cols).map(|c| char::from(b'A' + reg.labels[r * cols + c] as u8)).collect();
            println!("  {line}");
        }
        println!("  leaf-order runs: {:?}", reg.segments());
    }
    Ok(())
}
