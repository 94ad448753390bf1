//! A small parameter sweep written as CSV.

use rrr_ann::bench::{gnuplot_script, sweep, synth_dataset, SweepGrid, SynthKind};

const GRID: &str = r#"
metric = "euclidean"
seed = 1
clusters = [32, 64]
reduced_dim = [32]
rank = [16]
quantize = [false, true]
k = 10
w = [2, 4, 8]
t = [50, 200]
"#;

fn main() -> rrr_ann::Result<()> {
    let data = synth_dataset(8000, 100, 64, SynthKind::Clustered(40), 1).with_ground_truth(10)?;
    let grid = SweepGrid::from_toml(GRID)?;
    let report = sweep(&data, &grid, 3)?;
    print!("{}", report.to_csv());
    eprintln!("\n# plot with gnuplot:\n{}", gnuplot_script("sweep.csv", "sweep.png"));
    Ok(())
}
