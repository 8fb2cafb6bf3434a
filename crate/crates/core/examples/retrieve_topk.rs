//! Build an embedding snapshot, query it, then add premises through an
//! overlay without touching the cached rows.
//!
//!     cargo run --example retrieve_topk

use std::sync::Arc;

use premsel::corpus::accessible_for_state;
use premsel::index::{apply_delta, build_snapshot, select_premises, NewPremise};
use premsel::trainer::{initial_model, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = premsel::corpus::load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/gcd_iff.jsonl"))?;
    let model = initial_model(&corpus, &TrainConfig { dim: 32, ..Default::default() });
    let snapshot = Arc::new(build_snapshot(&model, &corpus));
    println!("{} rows, model {}", snapshot.len(), snapshot.model_version());

    let state = &corpus.states[0];
    let query = model.encode(&state.state_text);
    let visible = accessible_for_state(&corpus, state)?;
    let top = select_premises(&query, 8, Some(&visible), &snapshot, None)?;
    for s in &top.ranked {
        let hit = if state.positive_premises.contains(&s.name) { "*" } else { " " };
        println!("{hit} {:+.4}  {}", s.score, s.name);
    }

    let new = vec![NewPremise {
        name: "local_helper".into(),
        signature: "theorem local_helper : Iff (Associated y (GCDMonoid.gcd x y)) (Dvd.dvd y x)".into(),
    }];
    let overlay = apply_delta(&snapshot, &new, &model)?;
    let top = select_premises(&query, 3, None, &snapshot, Some(&overlay))?;
    println!("with overlay: {:?}", top.names());
    Ok(())
}
