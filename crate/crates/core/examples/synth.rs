//! Writes the reference dataset and its pipeline configuration to a
//! directory (default `synthetic`).

fn main() -> nbhd::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "synthetic".into());
    let config = nbhd::service::write_reference_fixture(&dir)?;
    println!("wrote {}", config.display());
    println!("run it with: cargo run -- run {} --out bundle", config.display());
    Ok(())
}
