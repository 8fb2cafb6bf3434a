mod common;

use premsel::eval::{recall_at_k, MepoSelector, RecallOptions, Selector};
use premsel::mepo::{extract_symbols, mepo_select, premise_symbols, MepoConfig};

#[test]
fn gcd_iff_goal_symbols() {
    let c = common::gcd_iff_corpus();
    let syms = extract_symbols(&c.states[0].state_text);
    for s in ["Associated", "GCDMonoid.gcd", "Dvd.dvd", "Iff"] {
        assert!(syms.contains(s), "missing {s} in {syms:?}");
    }
    // bound variables and sorts are not symbols
    for s in ["x", "y", "A", "Type"] {
        assert!(!syms.contains(s));
    }
}

#[test]
fn premise_name_is_not_its_own_symbol() {
    let s = premise_symbols("dvd_trans", "theorem dvd_trans : Dvd.dvd a b → Dvd.dvd b c → Dvd.dvd a c");
    assert!(!s.contains("dvd_trans"));
    assert!(s.contains("Dvd.dvd"));
}

#[test]
fn gcd_iff_default_selection_is_one_round() {
    let c = common::gcd_iff_corpus();
    let premises: Vec<_> = c
        .premises
        .iter()
        .map(|p| (p.name.clone(), premise_symbols(&p.name, &p.signature)))
        .collect();
    let sel = mepo_select(&extract_symbols(&c.states[0].state_text), &premises, &MepoConfig::default());
    assert_eq!(sel.rounds_run, 1);
    assert_eq!(sel.thresholds, vec![0.6]);
    assert!(sel.accepted.iter().all(|a| a.mark >= 0.6));
}

#[test]
fn selector_returns_strongest_first() {
    let c = common::gcd_iff_corpus();
    let sel = MepoSelector::new(&c, MepoConfig::default());
    let s = &c.states[0];
    let cands = premsel::eval::candidates_for(&c, s).unwrap();
    let out = sel.select(s, &cands, 5);
    assert!(out.len() <= 5);
    let r = recall_at_k(&sel, &c, &[32], RecallOptions::default()).unwrap();
    assert!(r.recall_at_k[&32] > 0.0);
}
