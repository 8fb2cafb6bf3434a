mod common;

use std::sync::Arc;

use premsel::encoder::{EncoderModel, Tokenizer};
use premsel::eval::{generate_synthetic, SyntheticSpec};
use premsel::index::{apply_delta, build_snapshot, read_snapshot, select_premises, NewPremise, SnapshotCache};

fn setup() -> (EncoderModel, premsel::corpus::Corpus) {
    let synth = generate_synthetic(&SyntheticSpec {
        num_premises: 60,
        num_states: 20,
        ..Default::default()
    });
    let tok = Tokenizer::build(synth.corpus.premises.iter().map(|p| p.signature.as_str()), 128);
    (EncoderModel::random(tok, 16, 4), synth.corpus)
}

#[test]
fn snapshot_rows_match_reference_encoder() {
    let (model, corpus) = setup();
    let snap = build_snapshot(&model, &corpus);
    for p in corpus.premises.iter().filter(|p| p.is_eligible()) {
        let want = common::naive_encode(&model, &p.signature);
        let got = snap.row_of(&p.name).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn cache_round_trip_is_bit_exact() {
    let (model, corpus) = setup();
    let dir = tempfile::tempdir().unwrap();
    let cache = SnapshotCache::new(dir.path());
    assert!(cache.load(&corpus.snapshot_id, model.version()).unwrap().is_none());
    let built = cache.load_or_build(&model, &corpus).unwrap();
    let path = cache.path_for(&corpus.snapshot_id, model.version());
    assert!(path.exists());
    assert_eq!(read_snapshot(&path).unwrap(), built);
    assert_eq!(cache.load_or_build(&model, &corpus).unwrap(), built);
}

#[test]
fn candidate_mask_matches_brute_force_on_subset() {
    let (model, corpus) = setup();
    let snap = build_snapshot(&model, &corpus);
    let subset: Vec<String> = snap.names().iter().step_by(3).cloned().collect();
    let rows: Vec<(String, Vec<f64>)> = subset.iter().map(|n| (n.clone(), snap.row_of(n).unwrap().to_vec())).collect();
    for s in &corpus.states {
        let q = model.encode(&s.state_text);
        let got = select_premises(&q, 8, Some(&subset), &snap, None).unwrap();
        let want = common::brute_force_top_k(&q.vector, &rows, 8);
        assert_eq!(got.names(), want.iter().map(|w| w.0.as_str()).collect::<Vec<_>>());
    }
}

#[test]
fn overlay_with_mask_reaches_new_rows() {
    let (model, corpus) = setup();
    let base = Arc::new(build_snapshot(&model, &corpus));
    let new = vec![NewPremise {
        name: "Fresh.lemma".into(),
        signature: corpus.states[0].state_text.clone(),
    }];
    let overlay = apply_delta(&base, &new, &model).unwrap();
    let q = model.encode(&corpus.states[0].state_text);
    let got = select_premises(&q, 1, None, &base, Some(&overlay)).unwrap();
    // the state's own text embeds to the query itself
    assert_eq!(got.names(), vec!["Fresh.lemma"]);
    assert!((got.ranked[0].score - 1.0).abs() < 1e-12);
    let masked = select_premises(&q, 3, Some(&["Fresh.lemma".to_string()]), &base, Some(&overlay)).unwrap();
    assert_eq!(masked.ranked.len(), 1);
}
