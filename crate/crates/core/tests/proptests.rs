mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use premsel::corpus::{accessible_for_state, accessible_premises, filter_premises, parse_corpus};
use premsel::encoder::{EncoderModel, Embedding, Tokenizer};
use premsel::eval::{generate_synthetic, recall_at_k, RandomSelector, RecallOptions, SyntheticSpec};
use premsel::index::{select_premises, IndexSnapshot};
use premsel::mepo::{mepo_select, MepoConfig, SymbolSet};
use premsel::orchestrator::{run_task, FailureCategory, MockBackend, ProofTask, TraceEvent, Variant};
use premsel::trainer::{batch_loss, BatchItem, TrainBatch};

const VOCAB: &[&str] = &["Nat.succ", "Eq", "x", "+", "List.cons", "(", ")", "∀", "f", "Or.inl", "True", "0"];

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(VOCAB), 0..12).prop_map(|v| v.join(" "))
}

fn model(seed: u64) -> EncoderModel {
    EncoderModel::random(Tokenizer::build(VOCAB.iter().copied(), 8), 6, seed)
}

fn synth(seed: u64) -> premsel::eval::SyntheticCorpus {
    generate_synthetic(&SyntheticSpec {
        num_premises: 30,
        num_states: 20,
        num_modules: 4,
        positives_per_state: 5.0,
        seed,
        ..Default::default()
    })
}

fn snapshot(rows: &[Vec<f64>]) -> IndexSnapshot {
    let d = rows[0].len();
    let names: Vec<String> = (0..rows.len()).map(|i| format!("n{i:03}")).collect();
    IndexSnapshot::from_rows(
        d,
        names.clone(),
        names,
        rows.concat(),
        "s".into(),
        "v".into(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn encodings_are_unit_norm_and_pure(t in text(), seed in 0u64..20) {
        let m = model(seed);
        let a = m.encode(&t);
        let n = a.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() < 1e-6);
        prop_assert_eq!(&a, &m.encode(&t));
        prop_assert!(m.tokenizer().tokenize(&t).len() <= m.tokenizer().max_len());
        let naive = common::naive_encode(&m, &t);
        for (x, y) in a.vector.iter().zip(&naive) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn filtering_is_idempotent_and_positives_stay_accessible(seed in 0u64..200) {
        let s = synth(seed);
        let mut c = s.corpus.clone();
        let names: Vec<String> = c.premises.iter().step_by(7).map(|p| p.name.clone()).collect();
        c.apply_blacklist(names.iter());
        let once = filter_premises(&c);
        let twice = filter_premises(&once);
        prop_assert_eq!(once.to_jsonl(), twice.to_jsonl());
        for st in &once.states {
            let acc: BTreeSet<String> = accessible_for_state(&once, st).unwrap().into_iter().collect();
            prop_assert!(st.positive_premises.is_subset(&acc));
        }
    }

    #[test]
    fn accessibility_is_monotone_in_position(seed in 0u64..200, i in 0u32..40, j in 0u32..40) {
        let c = synth(seed).corpus;
        let (lo, hi) = (i.min(j), i.max(j));
        for m in c.modules.keys() {
            let a: BTreeSet<String> = accessible_premises(&c, m, lo).unwrap().into_iter().collect();
            let b: BTreeSet<String> = accessible_premises(&c, m, hi).unwrap().into_iter().collect();
            prop_assert!(a.is_subset(&b));
        }
    }

    #[test]
    fn snapshot_id_is_a_function_of_bytes(seed in 0u64..200) {
        let text = synth(seed).corpus.to_jsonl();
        prop_assert_eq!(parse_corpus(&text).unwrap().snapshot_id, parse_corpus(&text).unwrap().snapshot_id);
    }

    /// Any premise in row i's positive set, wherever else it shows up in the
    /// batch, stays out of row i's denominator.
    #[test]
    fn positives_never_enter_their_own_denominator(
        rows in prop::collection::vec((0usize..8, prop::collection::btree_set(0usize..8, 1..4), prop::collection::vec(0usize..8, 0..4)), 1..6),
    ) {
        let items: Vec<BatchItem> = rows
            .iter()
            .enumerate()
            .map(|(i, (p, extra, negs))| {
                let mut positives: BTreeSet<String> = extra.iter().map(|e| format!("q{e}")).collect();
                positives.insert(format!("q{p}"));
                BatchItem {
                    state_text: format!("state {i}"),
                    positive: format!("q{p}"),
                    negatives: negs.iter().map(|n| format!("q{n}")).filter(|n| !positives.contains(n)).collect(),
                    positives,
                }
            })
            .collect();
        let batch = TrainBatch::from_items(items, |n| format!("Eq {n}"));
        for i in 0..batch.len() {
            let neg = batch.negative_set(i);
            for p in &batch.items[i].positives {
                prop_assert!(!neg.contains(p.as_str()));
            }
            let want = common::naive_negative_set(&batch, i);
            prop_assert_eq!(neg.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(), want);
        }
        let m = model(1);
        prop_assert!((batch_loss(&m, &batch, 0.05) - common::naive_loss(&m, &batch, 0.05)).abs() < 1e-9);
    }

    #[test]
    fn topk_is_prefix_sorted_and_masked(
        rows in prop::collection::vec(prop::collection::vec(-3i32..4, 3), 1..40),
        q in prop::collection::vec(-3i32..4, 3),
        mask in prop::collection::btree_set(0usize..40, 0..20),
        k in 1usize..45,
    ) {
        // small integer coordinates give exact, frequently tied scores
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
        let snap = snapshot(&rows);
        let query = Embedding { vector: q.iter().map(|&x| x as f64).collect(), model_version: "v".into() };
        let full = select_premises(&query, k, None, &snap, None).unwrap();
        prop_assert_eq!(full.ranked.len(), k.min(rows.len()));
        prop_assert!(full.ranked.windows(2).all(|w| w[0].score >= w[1].score));
        let bigger = select_premises(&query, k + 3, None, &snap, None).unwrap();
        prop_assert_eq!(&bigger.ranked[..full.ranked.len()], &full.ranked[..]);

        let named: Vec<(String, Vec<f64>)> = snap.names().iter().cloned().zip(rows.clone()).collect();
        let brute = common::brute_force_top_k(&query.vector, &named, k);
        prop_assert_eq!(full.names(), brute.iter().map(|b| b.0.as_str()).collect::<Vec<_>>());

        let cands: Vec<String> = mask.iter().filter(|&&i| i < rows.len()).map(|i| format!("n{i:03}")).collect();
        let masked = select_premises(&query, k, Some(&cands), &snap, None).unwrap();
        prop_assert_eq!(masked.ranked.len(), k.min(cands.len()));
        prop_assert!(masked.ranked.iter().all(|s| cands.contains(&s.name)));
    }

    #[test]
    fn mepo_is_deterministic_and_distinct(
        goal in prop::collection::btree_set("[A-E]", 1..4),
        premises in prop::collection::vec(prop::collection::btree_set("[A-H]", 1..5), 0..25),
        p in 0.05f64..1.0,
        c in 0.2f64..5.0,
    ) {
        let goal: SymbolSet = goal.into_iter().map(|s| format!("{s}x")).collect();
        let premises: Vec<(String, SymbolSet)> = premises
            .into_iter()
            .enumerate()
            .map(|(i, s)| (format!("p{i}"), s.into_iter().map(|x| format!("{x}x")).collect()))
            .collect();
        let cfg = MepoConfig { p, c, ..Default::default() };
        let a = mepo_select(&goal, &premises, &cfg);
        prop_assert_eq!(&a, &mepo_select(&goal, &premises, &cfg));
        prop_assert!(a.thresholds.windows(2).all(|w| w[0] < w[1]));
        let names: BTreeSet<&str> = a.names().into_iter().collect();
        prop_assert_eq!(names.len(), a.accepted.len());
        prop_assert!(a.accepted.iter().all(|x| premises.iter().any(|(n, _)| *n == x.name)));
    }

    #[test]
    fn recall_is_monotone_in_k(seed in 0u64..50) {
        let s = synth(seed);
        let r = recall_at_k(&RandomSelector { seed }, &s.corpus, &[1, 2, 4, 8, 16, 64], RecallOptions::default()).unwrap();
        let v: Vec<f64> = r.recall_at_k.values().copied().collect();
        prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn outcomes_are_sound_and_deterministic(seed in 0u64..100, steps in 1u64..40) {
        let s = synth(seed);
        for record in s.tasks.iter().take(4) {
            let ranking = record.ranking.clone().unwrap();
            for v in Variant::ALL {
                let mut task = record.task.with_variant(v);
                task.step_budget = steps;
                let run = || {
                    let backend = MockBackend::new(record.entailment.clone());
                    let out = run_task(&task, &|_: &ProofTask| ranking.clone(), &backend);
                    (out, backend.calls())
                };
                let (a, calls) = run();
                let (b, _) = run();
                prop_assert_eq!(a.proved, b.proved);
                prop_assert_eq!(&a.premises_used, &b.premises_used);
                prop_assert_eq!(&a.trace, &b.trace);
                if a.proved {
                    prop_assert_eq!(a.failure_category, FailureCategory::None);
                    let runs = if v == Variant::Cumul { 4 } else { 1 };
                    prop_assert!(a.steps <= steps * runs);
                }
                let acc: BTreeSet<&String> = task.accessible.iter().collect();
                prop_assert!(a.premises_used.iter().all(|p| acc.contains(p)));
                for c in &calls {
                    if let premsel::orchestrator::BackendCall::Reconstruct { core, .. } = c {
                        prop_assert!(core.len() <= task.k1);
                    }
                }
                let budget_stop = a.trace.iter().any(|e| matches!(e, TraceEvent::Budget { .. }));
                if budget_stop && v != Variant::Cumul {
                    prop_assert!(!a.proved);
                }
            }
        }
    }
}
