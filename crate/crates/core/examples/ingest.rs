//! Writes the synthetic reference dataset, reads it back from disk and
//! joins geometry, census table and subgroup counts into one frame.

use nbhd::geodata::{join_frame, load_geometry, CensusDataset, SubgroupDataset, DEFAULT_ID_COLUMN};
use nbhd::groups::{aggregate_rate, enumerate_groups};
use nbhd::synthgen::{write_fixture, FixtureSpec};

fn main() -> nbhd::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let files = write_fixture(&FixtureSpec::reference(), dir.path())?;

    let md = load_geometry(&files.geometry, DEFAULT_ID_COLUMN)?;
    let census = CensusDataset::load(&files.census, DEFAULT_ID_COLUMN)?;
    let subgroups = SubgroupDataset::load(&files.subgroups, DEFAULT_ID_COLUMN)?;
    let (frame, report) = join_frame(&md, &census, Some(&subgroups))?;
    println!("{} units, variables {:?}", frame.len(), frame.variable_names());
    for line in report.lines() {
        println!("join: {line}");
    }

    let attrs: Vec<String> = subgroups.demographic_attributes().into_iter().collect();
    let ids = frame.unit_ids();
    for group in enumerate_groups(&attrs, &subgroups)? {
        let series = aggregate_rate(&subgroups, &ids, &group, "voted", 10)?;
        println!("{:<12} coverage {:.2}", group.label(), series.coverage);
    }
    Ok(())
}
