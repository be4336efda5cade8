//! Moran's I for a checkerboard, a smooth gradient and white noise, with a
//! permutation test for the noise.

use nbhd::diagnostics::{moran_permutation, morans_i};
use nbhd::synthgen::{gen_lattice, rng};
use nbhd::weights::{build_contiguity, ContiguityRule};
use rand_distr::{Distribution, StandardNormal};

fn main() -> nbhd::Result<()> {
    let (rows, cols) = (10, 10);
    let md = gen_lattice(rows, cols, 100.0)?;
    let w = build_contiguity(&md, ContiguityRule::Rook).row_standardize();

    let checker: Vec<f64> = (0..rows * cols).map(|i| ((i / cols + i % cols) % 2) as f64).collect();
    let gradient: Vec<f64> = (0..rows * cols).map(|i| (i % cols) as f64).collect();
    let mut r = rng(7);
    let noise: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut r)).collect();

    for (name, x) in [("checkerboard", &checker), ("gradient", &gradient), ("noise", &noise)] {
        let m = morans_i(x, &w)?;
        println!("{name:<13} I = {:+.4}  E[I] = {:+.4}  z = {:+.2}  p = {:.4}", m.i, m.expected, m.z, m.p);
    }
    let perm = moran_permutation(&noise, &w, 999, 11)?;
    println!("noise, 999 permutations: pseudo p = {:.3}", perm.p);
    Ok(())
}
