//! Deep SVDD with a learnable center and biased output layer maps every
//! patch to the center: embedding variance goes to zero.

use travbench::cli_io::pipeline::{build_benchmark, BenchmarkConfig, SuiteConfig};
use travbench::learners::{embedding_variance, train, Method};

fn main() -> travbench::Result<()> {
    let bench = build_benchmark(&BenchmarkConfig::small(1))?;
    let mut cfg = SuiteConfig::default().train;
    cfg.epochs = 20;
    cfg.batch_size = 16;

    let (normal, _) = train(&bench.split, Method::Svdd, false, &cfg)?;

    cfg.encoder.final_layer_bias = true;
    cfg.learn_center = true;
    cfg.weight_decay = 1e-3;
    let (collapsed, log) = train(&bench.split, Method::Svdd, false, &cfg)?;

    println!(
        "bias-free, fixed center : variance {:.3e}",
        embedding_variance(&normal, &bench.split.eval)?
    );
    println!(
        "biased, learned center  : variance {:.3e}",
        embedding_variance(&collapsed, &bench.split.eval)?
    );
    for e in &log.epochs {
        println!("  epoch {} loss {:.3e}", e.epoch, e.method_loss);
    }
    Ok(())
}
