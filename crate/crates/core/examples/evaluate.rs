//! Reports on a synthetic task batch: proof rates, error categories, a k
//! sweep and the difficulty breakdown, written as JSON and CSV.
//!
//!     cargo run --release --example evaluate [out_dir]

use premsel::eval::{
    difficulty_report, error_report, generate_synthetic, proof_rates, recall_at_k, run_tasks, sweep_k, write_report,
    EvalReport, MepoSelector, RecallOptions, SyntheticSpec,
};
use premsel::mepo::MepoConfig;
use premsel::orchestrator::Variant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/eval-example".into());
    let spec = SyntheticSpec::default();
    let synth = generate_synthetic(&spec);

    let rows = run_tasks(&synth.tasks, None, None);
    let theorems: Vec<_> = rows.iter().map(|r| r.0.clone()).collect();
    for (v, rate) in proof_rates(&theorems) {
        println!("{:<10} {:.3}", v.as_str(), rate);
    }
    println!("auto errors: {:?}", error_report(rows.iter().map(|r| &r.1[&Variant::Auto])));
    for c in sweep_k(&synth.tasks, None, None, Variant::Full, &[1, 4, 16], &[32]) {
        println!("k1={:<3} proved {}/{}", c.k1, c.proved, c.total);
    }
    for d in difficulty_report(&theorems, Variant::Cumul).iter().filter(|d| d.proved + d.unproved > 0) {
        println!("{:<12} {:<8} {:>3} proved {:>3} not", d.dimension, d.bucket, d.proved, d.unproved);
    }

    let mepo = MepoSelector::new(&synth.corpus, MepoConfig::default());
    let recall = recall_at_k(&mepo, &synth.corpus, &[16, 32], RecallOptions::default())?;
    let report = EvalReport {
        recall_at_k: recall.recall_at_k,
        proof_rate: proof_rates(&theorems),
        per_theorem: theorems,
        config: serde_json::to_value(&spec)?,
    };
    write_report(std::path::Path::new(&out), &report)?;
    println!("wrote {out}/report.json and per_theorem.csv");
    Ok(())
}
