//! Load a JSONL export, apply a blacklist, and inspect what each state can see.
//!
//!     cargo run --example corpus_ingest

use premsel::corpus::{accessible_for_state, filter_premises, lint_corpus, load_blacklist, load_corpus, LintConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let mut corpus = load_corpus(format!("{dir}/rational_map.jsonl"))?;
    println!("snapshot {}", corpus.snapshot_id);
    println!("{} premises, {} states, modules in order: {:?}", corpus.premises.len(), corpus.states.len(), corpus.module_order());

    corpus.apply_blacklist(load_blacklist(format!("{dir}/blacklist.txt"))?.iter());
    let filtered = filter_premises(&corpus);
    for (before, after) in corpus.states.iter().zip(&filtered.states) {
        println!(
            "{}: {} positives -> {} {:?}",
            after.id(),
            before.positive_premises.len(),
            after.positive_premises.len(),
            after.positive_premises
        );
        let visible = accessible_for_state(&filtered, after)?;
        println!("  {} accessible premises", visible.len());
    }

    let issues = lint_corpus(&filtered, &LintConfig::default());
    println!("{} lint issue(s)", issues.len());
    for i in issues.iter().take(5) {
        println!("  {i:?}");
    }
    Ok(())
}
