//! Independent reference implementations used as test oracles. Nothing here
//! calls into the code paths it checks beyond reading model parameters.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use premsel::corpus::{load_corpus, Corpus};
use premsel::encoder::EncoderModel;
use premsel::orchestrator::TaskRecord;
use premsel::trainer::TrainBatch;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden").join(name)
}

pub fn gcd_iff_corpus() -> Corpus {
    load_corpus(fixture("gcd_iff.jsonl")).expect("fixture loads")
}

pub fn gcd_iff_task() -> TaskRecord {
    let text = std::fs::read_to_string(fixture("gcd_iff_task.json")).expect("fixture exists");
    serde_json::from_str(&text).expect("fixture parses")
}

/// Mean of token rows, times the projection, L2-normalized. Written out
/// longhand from the parameter tables.
pub fn naive_encode(model: &EncoderModel, text: &str) -> Vec<f64> {
    let d = model.dim();
    let mut ids = model.tokenizer().tokenize(text);
    if ids.is_empty() {
        ids.push(model.tokenizer().empty_id());
    }
    let table = model.embedding_table();
    let mut h = vec![0.0; d];
    for &id in &ids {
        for k in 0..d {
            h[k] += table[id as usize * d + k];
        }
    }
    for v in &mut h {
        *v /= ids.len() as f64;
    }
    let p = model.projection();
    let mut z = vec![0.0; d];
    for j in 0..d {
        for k in 0..d {
            z[j] += h[k] * p[k * d + j];
        }
    }
    let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        return e;
    }
    z.iter().map(|v| v / n).collect()
}

/// Loss by explicit double loop: for row i, every distinct batch premise that
/// is not one of the row's positives goes in the denominator, plus the row's
/// own positive.
pub fn naive_loss(model: &EncoderModel, batch: &TrainBatch, tau: f64) -> f64 {
    let mut texts: BTreeMap<&str, &str> = BTreeMap::new();
    for (n, t) in batch.premises.iter().zip(&batch.premise_texts) {
        texts.insert(n, t);
    }
    let mut total = 0.0;
    for item in &batch.items {
        let s = naive_encode(model, &item.state_text);
        let sim = |name: &str| {
            let p = naive_encode(model, texts[name]);
            s.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / tau
        };
        let pos = sim(&item.positive);
        let mut logits = vec![pos];
        for name in texts.keys() {
            if !item.positives.contains(*name) {
                logits.push(sim(name));
            }
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        total += lse - pos;
    }
    total / batch.items.len() as f64
}

/// Denominator set for row `i`, recomputed from the items alone.
pub fn naive_negative_set(batch: &TrainBatch, i: usize) -> BTreeSet<String> {
    let mut all: BTreeSet<String> = BTreeSet::new();
    for it in &batch.items {
        all.insert(it.positive.clone());
        all.extend(it.negatives.iter().cloned());
    }
    all.into_iter()
        .filter(|n| !batch.items[i].positives.contains(n))
        .collect()
}

/// Full sort by (score descending, name ascending), then truncate.
pub fn brute_force_top_k(query: &[f64], rows: &[(String, Vec<f64>)], k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = rows
        .iter()
        .map(|(n, r)| (n.clone(), query.iter().zip(r).map(|(a, b)| a * b).sum()))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Central finite difference of `f` at `x[i]`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, eps: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += eps;
    minus[i] -= eps;
    (f(&plus) - f(&minus)) / (2.0 * eps)
}

pub fn close(analytic: f64, numeric: f64, rel: f64, abs_floor: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= abs_floor || diff <= rel * analytic.abs().max(numeric.abs())
}

pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}
