//! The whole pipeline at reduced size: benchmark, six training runs,
//! report, map, scenarios and renders under one directory.

use travbench::cli_io::repro::{run_repro, ReproConfig};

fn main() -> travbench::Result<()> {
    let out = std::env::temp_dir().join("travbench_quick_repro");
    let summary = run_repro(&ReproConfig::quick(1), &out)?;
    print!("{}", summary.report.to_table());
    for s in &summary.scenarios {
        println!(
            "{:<28} {:?} blocked={} dev={:.2}",
            s.name, s.outcome, s.blocked_steps, s.lateral_deviation
        );
    }
    println!("{} files under {}", summary.files.len(), out.display());
    Ok(())
}
