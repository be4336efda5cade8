//! Pairwise spillover from a local Durbin fit and the compass-sector field
//! it induces at one unit.

use nbhd::geodata::join_frame;
use nbhd::groups::GroupSeries;
use nbhd::models::{fit_gwr_sdm, ModelSpec};
use nbhd::spillover::{bin_directions, pairwise_spillover, SECTOR_LABELS};
use nbhd::synthgen::{gen_gwr, gen_lattice, Axis, Surface};
use nbhd::weights::{build_contiguity, ContiguityRule};

fn main() -> nbhd::Result<()> {
    let md = gen_lattice(12, 12, 100.0)?;
    let w = build_contiguity(&md, ContiguityRule::Queen).row_standardize();
    let surfaces = [Surface::Step { axis: Axis::U, at: 0.5, below: 0.2, above: 2.0 }];
    let g = gen_gwr(&md, &surfaces, 0.1, 4)?;
    let (frame, _) = join_frame(&md, &g.data.census, None)?;
    let y = GroupSeries::complete("y", g.data.y);

    let mut spec = ModelSpec::new("y", &["x1"]);
    spec.include_wy = false;
    let local = fit_gwr_sdm(&spec, &frame, &y, &w, 40)?;
    let pairs = pairwise_spillover(&local, &w)?;
    println!("{} neighbour pairs over channels {:?}", pairs.pairs.len(), pairs.channels);

    let field = bin_directions(&pairs, &md.centroids());
    let unit = 6 * 12 + 5;
    println!("unit {} receives:", md.units[unit].id);
    for (label, v) in SECTOR_LABELS.iter().zip(&field.combined[unit]) {
        if *v > 0.0 {
            println!("  {label:<3} {v:.3}");
        }
    }
    Ok(())
}
