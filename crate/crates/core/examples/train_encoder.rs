//! Train the encoder on a synthetic corpus and compare recall against a
//! random ranking.
//!
//!     cargo run --release --example train_encoder [steps]

use premsel::eval::{generate_synthetic, recall_at_k, NeuralSelector, RandomSelector, RecallOptions, SyntheticSpec};
use premsel::trainer::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(500);
    let synth = generate_synthetic(&SyntheticSpec::default());
    let config = TrainConfig {
        batch_size: 64,
        learning_rate: 0.02,
        steps,
        seed: 1,
        ..Default::default()
    };
    let out = train(&synth.corpus, &config)?;
    for r in out.curve.iter().step_by((steps / 10).max(1)) {
        println!("step {:5}  loss {:.4}  |grad| {:.3}", r.step, r.loss, r.grad_norm);
    }

    let ks = [1, 8, 16, 32];
    let neural = recall_at_k(&NeuralSelector::new(out.model, &synth.corpus), &synth.corpus, &ks, RecallOptions::default())?;
    let random = recall_at_k(&RandomSelector { seed: 0 }, &synth.corpus, &ks, RecallOptions::default())?;
    for k in ks {
        println!("recall@{k:<3} trained {:.3}  random {:.3}", neural.recall_at_k[&k], random.recall_at_k[&k]);
    }
    Ok(())
}
