//! The point-set encoder: embedding, heads, and invariance to point order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use travbench::encoder_net::{EncoderConfig, ModelState, Tape};
use travbench::learners::Method;

fn main() -> travbench::Result<()> {
    let model = ModelState::init(EncoderConfig::default(), Method::Ours, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut patch: Vec<[f64; 3]> = (0..16)
        .map(|i| [(i % 4) as f64 * 0.1, (i / 4) as f64 * 0.1, 0.01 * i as f64])
        .collect();

    let emb = model.encode(&patch)?;
    let heads = model.forward_heads(&emb);
    println!(
        "{} parameters, embedding dim {}, logit {:.4}, value {:.4}",
        model.n_params(),
        emb.len(),
        heads.class_logit,
        heads.trav_pred
    );

    for _ in 0..5 {
        patch.shuffle(&mut rng);
        assert_eq!(model.encode(&patch)?, emb);
    }
    println!("embedding unchanged under 5 random point orders");

    let mut tape = Tape::default();
    let out = model.forward(&patch, &mut tape)?;
    println!(
        "forward with tape: pooled width {}, embedding[0] {:.6}",
        tape.pooled().len(),
        out.embedding[0]
    );
    Ok(())
}
