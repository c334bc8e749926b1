//! Build the small synthetic benchmark: lanes driven by three vehicles,
//! scans along them, contact projection, unlabeled draw and the 80/20 split.

use travbench::cli_io::pipeline::{build_benchmark, BenchmarkConfig};
use travbench::datagen::{read_dataset, write_dataset, LabelKind};

fn main() -> travbench::Result<()> {
    let bench = build_benchmark(&BenchmarkConfig::small(2))?;
    for lane in &bench.lanes {
        println!(
            "{:<8} lane with {} trace steps",
            lane.vehicle,
            lane.trace.len()
        );
    }
    let count = |set: &[travbench::datagen::TraversalSample], l| {
        set.iter().filter(|s| s.label == l).count()
    };
    println!(
        "{} scans -> {} positives, {} unlabeled, {} eval-only negatives",
        bench.scans.len(),
        count(&bench.samples, LabelKind::Positive),
        count(&bench.samples, LabelKind::Unlabeled),
        count(&bench.samples, LabelKind::NegativeEvalOnly)
    );
    println!(
        "split: {} train / {} eval",
        bench.split.train.len(),
        bench.split.eval.len()
    );

    let mut bytes = Vec::new();
    write_dataset(&bench.header, &bench.samples, &mut bytes)?;
    let (header, samples) = read_dataset(&mut bytes.as_slice())?;
    assert_eq!(header, bench.header);
    assert_eq!(samples.len(), bench.samples.len());
    println!(
        "dataset file: {} bytes, normalization {:?}",
        bytes.len(),
        header.normalization
    );
    Ok(())
}
