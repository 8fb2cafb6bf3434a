//! Symbolic relevance filtering (MePo).
//!
//! Starting from the goal's symbols, each round scores every remaining
//! premise by the fraction of its symbols that are already relevant, accepts
//! those at or above the current threshold, adds their symbols to the
//! relevant set, and raises the threshold by `t ← t + (1 − t) / c`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::identifiers;

const SORTS: [&str; 3] = ["Type", "Prop", "Sort"];

pub type SymbolSet = BTreeSet<String>;

/// Dotted identifiers and capitalized constants. Single-character names are
/// treated as bound variables and skipped.
pub fn extract_symbols(text: &str) -> SymbolSet {
    identifiers(text)
        .filter(|t| t.chars().count() > 1)
        .filter(|t| t.contains('.') || t.chars().next().is_some_and(char::is_uppercase))
        .filter(|t| !SORTS.contains(t))
        .map(str::to_string)
        .collect()
}

/// Symbols of a premise statement, minus the premise's own name.
pub fn premise_symbols(name: &str, signature: &str) -> SymbolSet {
    let mut s = extract_symbols(signature);
    s.remove(name);
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MepoConfig {
    /// Initial relevance threshold, in (0, 1].
    pub p: f64,
    /// Threshold growth divisor, > 0.
    pub c: f64,
    pub max_selected: usize,
    /// Weight of irrelevant symbols in the mark.
    pub irrelevance_weight: f64,
}

impl Default for MepoConfig {
    fn default() -> Self {
        MepoConfig {
            p: 0.6,
            c: 0.9,
            max_selected: usize::MAX,
            irrelevance_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accepted {
    pub name: String,
    pub mark: f64,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MepoSelection {
    /// Acceptance order. Within a round, lower marks come first so that the
    /// tail of the list holds the strongest matches.
    pub accepted: Vec<Accepted>,
    /// Rounds executed (each with threshold ≤ 1).
    pub rounds_run: usize,
    pub thresholds: Vec<f64>,
}

impl MepoSelection {
    pub fn names(&self) -> Vec<&str> {
        self.accepted.iter().map(|a| a.name.as_str()).collect()
    }

    /// The last `k` accepted premises, strongest first: by mark descending,
    /// later acceptance breaking ties.
    pub fn last_k(&self, k: usize) -> Vec<&Accepted> {
        let start = self.accepted.len().saturating_sub(k);
        let mut tail: Vec<(usize, &Accepted)> = self.accepted[start..].iter().enumerate().collect();
        tail.sort_by(|a, b| b.1.mark.total_cmp(&a.1.mark).then(b.0.cmp(&a.0)));
        tail.into_iter().map(|(_, a)| a).collect()
    }
}

fn mark(symbols: &SymbolSet, relevant: &SymbolSet, w: f64) -> f64 {
    if symbols.is_empty() {
        return 0.0;
    }
    let hit = symbols.iter().filter(|s| relevant.contains(*s)).count() as f64;
    let miss = symbols.len() as f64 - hit;
    if hit == 0.0 {
        0.0
    } else {
        hit / (hit + w * miss)
    }
}

pub fn mepo_select(goal: &SymbolSet, premises: &[(String, SymbolSet)], config: &MepoConfig) -> MepoSelection {
    let mut relevant = goal.clone();
    let mut remaining: Vec<usize> = (0..premises.len()).collect();
    let mut accepted: Vec<Accepted> = Vec::new();
    let mut thresholds = Vec::new();
    let mut taken = BTreeSet::new();
    let mut t = config.p;

    while t <= 1.0 && accepted.len() < config.max_selected && !remaining.is_empty() {
        thresholds.push(t);
        let round = thresholds.len();
        let mut hits: Vec<(usize, f64)> = remaining
            .iter()
            .map(|&i| (i, mark(&premises[i].1, &relevant, config.irrelevance_weight)))
            .filter(|&(_, m)| m >= t)
            .collect();
        hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let room = config.max_selected - accepted.len();
        if hits.len() > room {
            // keep the strongest when the cap bites
            hits.drain(..hits.len() - room);
        }
        if hits.is_empty() {
            break;
        }
        for &(i, m) in &hits {
            let (name, symbols) = &premises[i];
            if taken.insert(name.clone()) {
                accepted.push(Accepted {
                    name: name.clone(),
                    mark: m,
                    round,
                });
            }
            relevant.extend(symbols.iter().cloned());
        }
        let chosen: BTreeSet<usize> = hits.iter().map(|h| h.0).collect();
        remaining.retain(|i| !chosen.contains(i));
        if config.c <= 0.0 {
            break;
        }
        t += (1.0 - t) / config.c;
    }
    MepoSelection {
        accepted,
        rounds_run: thresholds.len(),
        thresholds,
    }
}
