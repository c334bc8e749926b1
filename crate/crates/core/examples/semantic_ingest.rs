//! Label an annotated point cloud the RELLIS way: grass and mud positive,
//! obstacles negative, everything else dropped.

use travbench::datagen::{
    ingest_semantic_cloud, read_semantic_cloud, rellis_negative_classes, rellis_positive_classes,
    LabelKind,
};

fn main() -> travbench::Result<()> {
    let mut text = String::from("# x y z class\n");
    for i in 0..40 {
        let x = i as f64 * 0.2;
        text.push_str(&format!("{x} 0 0 grass\n{x} 1 0.02 mud\n"));
        text.push_str(&format!("{x} 3 {} tree\n", 0.5 + 0.1 * i as f64));
        text.push_str(&format!("{x} 5 8 sky\n"));
    }
    let cloud = read_semantic_cloud(&mut text.as_bytes())?;
    let samples = ingest_semantic_cloud(
        &cloud,
        &rellis_positive_classes(),
        &rellis_negative_classes(),
        8,
    )?;
    let pos = samples
        .iter()
        .filter(|s| s.label == LabelKind::Positive)
        .count();
    let neg = samples
        .iter()
        .filter(|s| s.label == LabelKind::NegativeEvalOnly)
        .count();
    println!(
        "{} points -> {pos} positives (no regression target), {neg} negatives, {} dropped",
        cloud.len(),
        cloud.len() - pos - neg
    );
    Ok(())
}
