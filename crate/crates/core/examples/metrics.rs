//! Rank-sum AUROC with ties, and mean per-class TPR at a fixed threshold.

use travbench::evalmetrics::{auroc, mean_tpr};
use travbench::learners::EvalThreshold;

fn main() -> travbench::Result<()> {
    let pos = [0.9, 0.8, 0.8, 0.55, 0.3];
    let neg = [0.8, 0.4, 0.2, 0.1];
    let t = EvalThreshold::default();
    println!(
        "AUROC {:.4}  mean TPR {:.4}",
        auroc(&pos, &neg)?,
        mean_tpr(&pos, &neg, t)?
    );

    // a model that calls everything traversable
    let flat = [0.97; 5];
    println!(
        "constant scores: AUROC {:.2}  mean TPR {:.2}",
        auroc(&flat, &[0.97; 4])?,
        mean_tpr(&flat, &[0.97; 4], t)?
    );

    // doubling the negatives leaves mean TPR alone
    let more: Vec<f64> = neg.iter().chain(&neg).copied().collect();
    println!(
        "negatives doubled: mean TPR {:.4}",
        mean_tpr(&pos, &more, t)?
    );
    Ok(())
}
