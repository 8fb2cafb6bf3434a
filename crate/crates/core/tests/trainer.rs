mod common;

use std::collections::BTreeMap;

use premsel::encoder::{EncoderModel, Tokenizer};
use premsel::eval::{generate_synthetic, SyntheticSpec};
use premsel::trainer::{batch_loss, BatchItem, TrainBatch, TrainConfig, TrainingSet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TEXTS: &[&str] = &[
    "Nat.add x y = Nat.add y x",
    "List.map f (List.map g l)",
    "Eq a b → Eq b a",
    "Dvd.dvd a b ∧ Dvd.dvd b c",
    "Set.mem x s ∨ True",
    "Iff p q",
];

fn model(seed: u64) -> EncoderModel {
    EncoderModel::random(Tokenizer::build(TEXTS.iter().copied(), 64), 8, seed)
}

fn item(state: &str, pos: &str, negs: &[&str]) -> BatchItem {
    BatchItem {
        state_text: state.into(),
        positive: pos.into(),
        positives: [pos.to_string()].into_iter().collect(),
        negatives: negs.iter().map(|s| s.to_string()).collect(),
    }
}

fn sig(name: &str) -> String {
    TEXTS[name.bytes().last().unwrap() as usize % TEXTS.len()].to_string()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn single_pair_loss_is_softplus_of_margin() {
    let m = model(1);
    let batch = TrainBatch::from_items(vec![item(TEXTS[0], "p1", &["p2"])], sig);
    let s = common::naive_encode(&m, TEXTS[0]);
    let sp = dot(&s, &common::naive_encode(&m, &sig("p1")));
    let sn = dot(&s, &common::naive_encode(&m, &sig("p2")));
    let tau = 0.05;
    let want = ((sn - sp) / tau).exp().ln_1p();
    assert!((batch_loss(&m, &batch, tau) - want).abs() < 1e-12);
}

#[test]
fn softplus_reference_value() {
    // cos 0.9 against 0.1 at temperature 0.05
    let v: f64 = ((0.1 - 0.9) / 0.05f64).exp().ln_1p();
    assert!((v - 1.1254e-7).abs() < 1e-11);
}

#[test]
fn no_sampled_negatives_is_in_batch_infonce() {
    let m = model(2);
    let items = vec![item(TEXTS[0], "p1", &[]), item(TEXTS[2], "p4", &[]), item(TEXTS[3], "p5", &[])];
    let batch = TrainBatch::from_items(items.clone(), sig);
    let tau = 0.1;
    let states: Vec<Vec<f64>> = items.iter().map(|i| common::naive_encode(&m, &i.state_text)).collect();
    let prem: Vec<Vec<f64>> = items.iter().map(|i| common::naive_encode(&m, &sig(&i.positive))).collect();
    let mut total = 0.0;
    for i in 0..3 {
        let denom: f64 = (0..3).map(|j| (dot(&states[i], &prem[j]) / tau).exp()).sum();
        total += -((dot(&states[i], &prem[i]) / tau).exp() / denom).ln();
    }
    assert!((batch_loss(&m, &batch, tau) - total / 3.0).abs() < 1e-12);
}

#[test]
fn loss_is_invariant_to_row_order() {
    let m = model(3);
    let mut items = vec![
        item(TEXTS[0], "p1", &["p2", "p3"]),
        item(TEXTS[1], "p2", &["p4"]),
        item(TEXTS[4], "p5", &["p1", "p6"]),
        item(TEXTS[5], "p6", &[]),
    ];
    let a = batch_loss(&m, &TrainBatch::from_items(items.clone(), sig), 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..5 {
        items.shuffle(&mut rng);
        let b = batch_loss(&m, &TrainBatch::from_items(items.clone(), sig), 0.05);
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn negatives_are_uniform_over_the_pool() {
    let synth = generate_synthetic(&SyntheticSpec {
        num_premises: 30,
        num_states: 2,
        num_modules: 1,
        positives_per_state: 4.0,
        ..Default::default()
    });
    let set = TrainingSet::new(&synth.corpus).unwrap();
    let config = TrainConfig {
        batch_size: 1,
        negatives_per_pair: 2,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // counts per (state text, negative)
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut per_state: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..20_000 {
        let b = set.sample_batch(&config, &mut rng);
        let it = &b.items[0];
        *per_state.entry(it.state_text.clone()).or_default() += it.negatives.len();
        for n in &it.negatives {
            *counts.entry((it.state_text.clone(), n.clone())).or_default() += 1;
        }
    }
    for (state, total) in &per_state {
        let cells: Vec<usize> = counts.iter().filter(|(k, _)| &k.0 == state).map(|(_, v)| *v).collect();
        let expected = *total as f64 / cells.len() as f64;
        let chi2: f64 = cells.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // df is below 30; the 0.999 quantile at df 30 is 59.7
        assert!(chi2 < 59.7, "chi-square {chi2} over {} cells", cells.len());
    }
}
