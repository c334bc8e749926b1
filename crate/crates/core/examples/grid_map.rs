//! Score the benchmark points with a trained model, bin them into a 2.5D
//! map, and render class and value layers to PPM.

use travbench::cli_io::pipeline::{build_benchmark, BenchmarkConfig, SuiteConfig};
use travbench::cli_io::render::{render_map, render_trajectories, Style};
use travbench::cli_io::repro::{map_extent, score_points};
use travbench::gridmap::{build_map, read_map, write_map, TravClass};
use travbench::learners::{train, Method};

fn main() -> travbench::Result<()> {
    let bench = build_benchmark(&BenchmarkConfig::small(5))?;
    let mut suite = SuiteConfig::default();
    suite.train.epochs = 4;
    let (model, _) = train(&bench.split, Method::Ours, true, &suite.train)?;

    let points = score_points(&model, &bench.samples, suite.threshold)?;
    let (origin, w, h) = map_extent(&points, 0.5);
    let (map, dropped) = build_map(&points, origin, 0.5, w, h)?;
    let count = |c| map.cells.iter().filter(|x| x.class == Some(c)).count();
    println!(
        "{w}x{h} cells, {} known ({} traversable, {} not), {dropped} points dropped",
        map.known_count(),
        count(TravClass::Traversable),
        count(TravClass::NonTraversable)
    );

    let mut bytes = Vec::new();
    write_map(&map, &mut bytes)?;
    assert_eq!(read_map(&mut bytes.as_slice())?, map);

    let dir = std::env::temp_dir().join("travbench_grid_map");
    std::fs::create_dir_all(&dir)?;
    for (name, style) in [("class", Style::Class), ("value", Style::Value)] {
        std::fs::write(
            dir.join(format!("{name}.ppm")),
            render_map(&map, style, 4)?.to_ppm(),
        )?;
    }
    let lanes: Vec<Vec<[f64; 2]>> = bench.lanes.iter().map(|l| l.path.clone()).collect();
    std::fs::write(
        dir.join("lanes.ppm"),
        render_trajectories(&map, &lanes, 4)?.to_ppm(),
    )?;
    println!("renders in {}", dir.display());
    Ok(())
}
