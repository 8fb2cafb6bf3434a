//! Symbolic filtering on the gcd example, with the default parameters and
//! with a looser schedule that runs several rounds.
//!
//!     cargo run --example mepo_baseline

use premsel::mepo::{extract_symbols, mepo_select, premise_symbols, MepoConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = premsel::corpus::load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/gcd_iff.jsonl"))?;
    let state = &corpus.states[0];
    let goal = extract_symbols(&state.state_text);
    println!("goal symbols: {goal:?}");
    let pool: Vec<_> = corpus
        .premises
        .iter()
        .filter(|p| p.name != state.theorem_name)
        .map(|p| (p.name.clone(), premise_symbols(&p.name, &p.signature)))
        .collect();

    for cfg in [MepoConfig::default(), MepoConfig { p: 0.3, c: 2.0, ..Default::default() }] {
        let sel = mepo_select(&goal, &pool, &cfg);
        println!(
            "\np={} c={}: {} accepted in {} round(s), thresholds {:?}",
            cfg.p,
            cfg.c,
            sel.accepted.len(),
            sel.rounds_run,
            sel.thresholds
        );
        for a in sel.last_k(10) {
            let hit = if state.positive_premises.contains(&a.name) { "*" } else { " " };
            println!("{hit} {:.3} r{} {}", a.mark, a.round, a.name);
        }
    }
    Ok(())
}
