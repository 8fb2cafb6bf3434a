//! Run the simulated hammer on the gcd task under every variant and print
//! the search trace of the full one.
//!
//!     cargo run --example hammer_pipeline

use premsel::orchestrator::{run_variant_suite, write_trace_jsonl, MockBackend, ProofTask, TaskRecord, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/gcd_iff_task.json"))?;
    let record: TaskRecord = serde_json::from_str(&text)?;
    let ranking = record.ranking.clone().unwrap_or_default();
    let backend = MockBackend::new(record.entailment.clone());
    let suite = run_variant_suite(&record.task, &|_: &ProofTask| ranking.clone(), &backend);
    for (v, out) in &suite {
        println!(
            "{:<10} proved={:<5} category={:?} premises={:?}",
            v.as_str(),
            out.proved,
            out.failure_category,
            out.premises_used
        );
    }
    println!("\ntrace ({}):", Variant::Full);
    print!("{}", write_trace_jsonl(&suite[&Variant::Full].trace));
    Ok(())
}
