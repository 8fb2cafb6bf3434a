mod common;

use std::collections::BTreeSet;

use premsel::corpus::{accessible_premises, filter_premises, load_blacklist, load_corpus, parse_corpus, CorpusError};
use serde_json::json;

fn premise(name: &str, module: &str, decl: u32) -> String {
    json!({
        "type": "premise", "name": name, "kind": "theorem",
        "signature": format!("theorem {name} : True"), "docstring": null,
        "module": module, "decl_index": decl, "blacklisted": false, "language_internal": false
    })
    .to_string()
}

fn module(name: &str, imports: &[&str]) -> String {
    json!({"type": "module", "name": name, "imports": imports}).to_string()
}

/// A <- B <- C, one premise per module plus two in C.
fn chain() -> String {
    [
        module("A", &[]),
        module("B", &["A"]),
        module("C", &["B"]),
        premise("a0", "A", 0),
        premise("b0", "B", 0),
        premise("c0", "C", 0),
        premise("c1", "C", 1),
    ]
    .join("\n")
}

/// Base <- Left, Base <- Right, {Left, Right} <- Top.
fn diamond() -> String {
    [
        module("Base", &[]),
        module("Left", &["Base"]),
        module("Right", &["Base"]),
        module("Top", &["Left", "Right"]),
        premise("base", "Base", 0),
        premise("left", "Left", 0),
        premise("right", "Right", 0),
        premise("top0", "Top", 0),
        premise("top1", "Top", 1),
    ]
    .join("\n")
}

#[test]
fn chain_accessibility_is_transitive() {
    let c = parse_corpus(&chain()).unwrap();
    assert_eq!(accessible_premises(&c, "C", 0).unwrap(), vec!["a0", "b0"]);
    assert_eq!(accessible_premises(&c, "C", 1).unwrap(), vec!["a0", "b0", "c0"]);
    assert_eq!(accessible_premises(&c, "B", 5).unwrap(), vec!["a0", "b0"]);
    assert!(accessible_premises(&c, "A", 0).unwrap().is_empty());
}

#[test]
fn diamond_sees_both_sides_once() {
    let c = parse_corpus(&diamond()).unwrap();
    let got = accessible_premises(&c, "Top", 1).unwrap();
    assert_eq!(got.len(), 4);
    assert_eq!(got[0], "base");
    assert_eq!(got[3], "top0");
    let mid: BTreeSet<&str> = got[1..3].iter().map(String::as_str).collect();
    assert_eq!(mid, ["left", "right"].into_iter().collect());
    // siblings are not visible to each other
    assert_eq!(accessible_premises(&c, "Left", 9).unwrap(), vec!["base", "left"]);
}

#[test]
fn unknown_module_is_an_error() {
    let c = parse_corpus(&chain()).unwrap();
    assert!(matches!(accessible_premises(&c, "Nope", 0), Err(CorpusError::UnknownModule(_))));
}

#[test]
fn jsonl_round_trip_preserves_snapshot_id() {
    for text in [chain(), diamond()] {
        let c = parse_corpus(&text).unwrap();
        let again = parse_corpus(&c.to_jsonl()).unwrap();
        assert_eq!(c.snapshot_id, again.snapshot_id);
        assert_eq!(c.premises, again.premises);
    }
}

#[test]
fn rational_map_filters_to_four_positives() {
    let mut c = load_corpus(common::fixture("rational_map.jsonl")).unwrap();
    let before = c.states[0].positive_premises.len();
    c.apply_blacklist(load_blacklist(common::fixture("blacklist.txt")).unwrap().iter());
    let f = filter_premises(&c);
    assert_eq!(before, 12);
    assert_eq!(f.states[0].positive_premises.len(), 4);
    assert!(f.premises.iter().all(|p| p.is_eligible()));
    assert!(f.premise("funext").is_some());
    assert!(f.premise("propext").is_none());
}

#[test]
fn gcd_iff_state_sees_its_premises() {
    let c = common::gcd_iff_corpus();
    let s = &c.states[0];
    let acc: BTreeSet<String> = premsel::corpus::accessible_for_state(&c, s).unwrap().into_iter().collect();
    assert!(s.positive_premises.is_subset(&acc));
    assert!(!acc.contains(&s.theorem_name));
}
