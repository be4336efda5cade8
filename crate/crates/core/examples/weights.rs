//! Contiguity and kernel weights on a small lattice, their row sums and a
//! spatial lag.

use nbhd::synthgen::gen_lattice;
use nbhd::weights::{build_contiguity, build_gaussian, build_knn_binary, ContiguityRule};

fn main() -> nbhd::Result<()> {
    let md = gen_lattice(5, 5, 100.0)?;
    let queen = build_contiguity(&md, ContiguityRule::Queen);
    let rook = build_contiguity(&md, ContiguityRule::Rook);
    let knn = build_knn_binary(&md, 4)?;
    let gauss = build_gaussian(&md, 8)?.row_standardize();

    for (name, w) in [("queen", &queen), ("rook", &rook), ("knn-4", &knn), ("gaussian-8", &gauss)] {
        println!("{name:<11} links {:>3}  corner row {:?}", w.nnz(), w.row(0));
    }

    let x: Vec<f64> = (0..md.len()).map(|i| (i % 5) as f64).collect();
    let lag = queen.row_standardize().spatial_lag(&x)?;
    println!("column index lag at the centre: {:.3}", lag[12]);
    Ok(())
}
