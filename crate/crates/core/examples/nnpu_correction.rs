//! The unlabeled-risk term per batch, with and without the non-negative
//! correction.

use travbench::cli_io::pipeline::{build_benchmark, BenchmarkConfig, SuiteConfig};
use travbench::learners::{loss_nnpu, train, Method, PuConfig};

fn main() -> travbench::Result<()> {
    // A batch where the unbiased estimate dips below zero.
    let pos = [4.0, 3.5, 5.0, 4.2];
    let unl = [-4.0, -3.0, -5.0, 2.0];
    for non_negative in [true, false] {
        let l = loss_nnpu(
            &pos,
            &unl,
            &PuConfig {
                prior: 0.5,
                non_negative,
            },
        );
        println!(
            "non_negative={non_negative:<5} raw term {:+.4} reported {:+.4} risk {:.4}",
            l.raw_negative_term, l.negative_term, l.value
        );
    }

    let bench = build_benchmark(&BenchmarkConfig::small(3))?;
    let mut cfg = SuiteConfig::default().train;
    cfg.epochs = 12;
    for non_negative in [true, false] {
        cfg.pu.non_negative = non_negative;
        let (_, log) = train(&bench.split, Method::NnPu, false, &cfg)?;
        let min = log
            .pu_terms
            .iter()
            .map(|t| t.reported)
            .fold(f64::INFINITY, f64::min);
        let neg = log.pu_terms.iter().filter(|t| t.reported < 0.0).count();
        println!(
            "training, non_negative={non_negative:<5}: min term {min:+.4}, {neg}/{} batches negative",
            log.pu_terms.len()
        );
    }
    Ok(())
}
