//! Global OLS and spatial Durbin fits on a simulated lattice, then a local
//! fit with an AICc-selected adaptive bandwidth.

use nbhd::geodata::join_frame;
use nbhd::groups::GroupSeries;
use nbhd::models::{fit_ols, fit_sdm, BandwidthCriterion, Kernel, LocalDesign, ModelSpec};
use nbhd::synthgen::{gen_gwr, gen_lattice, gen_sdm, Axis, SdmParams, Surface};
use nbhd::weights::{build_contiguity, ContiguityRule};

fn main() -> nbhd::Result<()> {
    let md = gen_lattice(20, 20, 100.0)?;
    let w = build_contiguity(&md, ContiguityRule::Queen).row_standardize();
    let spec = ModelSpec::new("y", &["x1", "x2"]);

    let params = SdmParams { beta: vec![1.0, 0.8, -0.5], rho: 0.5, gamma: vec![0.4, -0.3], noise_sd: 0.1 };
    let data = gen_sdm(&md, &w, &params, 1)?;
    let (frame, _) = join_frame(&md, &data.census, None)?;
    let y = GroupSeries::complete("y", data.y.clone());

    let ols = fit_ols(&spec, &frame, &y)?;
    println!("OLS  beta {:.3?}  R2 {:.3}", ols.beta, ols.r2);
    let sdm = fit_sdm(&spec, &frame, &y, &w)?;
    println!("SDM  beta {:.3?}  rho {:.3}  gamma {:.3?}", sdm.beta, sdm.rho.unwrap(), sdm.gamma.unwrap());
    println!("     planted beta {:?}  rho {}  gamma {:?}", params.beta, params.rho, params.gamma);

    // x1's effect rises from west to east.
    let surfaces = [Surface::Linear { axis: Axis::U, from: 0.5, to: 2.5 }, Surface::Constant { value: -1.0 }];
    let g = gen_gwr(&md, &surfaces, 0.1, 2)?;
    let (frame, _) = join_frame(&md, &g.data.census, None)?;
    let y = GroupSeries::complete("y", g.data.y);
    let design = LocalDesign::new(&spec, &frame, &y, &w)?;
    let sel = design.select_bandwidth(BandwidthCriterion::Aicc)?;
    let fit = design.fit(sel.bandwidth, Kernel::Bisquare)?;
    println!("local fit: bandwidth {} neighbours, AICc {:.1}", sel.bandwidth, fit.aicc);
    let x1 = fit.surface("x1").expect("x1 is in the design");
    for col in [0, 10, 19] {
        println!("  x1 coefficient in column {col:>2}: {:.3}", x1[col].unwrap_or(f64::NAN));
    }
    Ok(())
}
