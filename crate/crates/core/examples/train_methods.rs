//! Train the four methods on the small benchmark and print the eval table.

use travbench::cli_io::pipeline::{balanced_eval, build_benchmark, BenchmarkConfig, SuiteConfig};
use travbench::evalmetrics::build_report;
use travbench::learners::{train, Method};

fn main() -> travbench::Result<()> {
    let bench = build_benchmark(&BenchmarkConfig::small(4))?;
    let eval = balanced_eval(&bench.split.eval, 4);
    let mut suite = SuiteConfig::default();
    suite.train.epochs = 4;

    let mut models = Vec::new();
    for m in Method::ALL {
        let (model, log) = train(&bench.split, m, true, &suite.train)?;
        let last = log.epochs.last().expect("at least one epoch");
        println!(
            "{:<10} final loss {:.4} (regression {:.4})",
            m.name(),
            last.method_loss,
            last.regression_loss
        );
        models.push((m.name().to_string(), model));
    }
    let refs: Vec<(String, &_)> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
    let report = build_report("synthetic-small", &refs, &eval, suite.threshold)?;
    print!("{}", report.to_table());
    Ok(())
}
