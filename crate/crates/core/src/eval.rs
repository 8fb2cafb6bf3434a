//! Evaluation harness: selectors, recall@k, proof rates, k-sweeps,
//! difficulty and error statistics, and a planted-structure synthetic corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{accessible_for_state, Corpus, CorpusError, PremiseKind, PremiseRecord, StateRecord};
use crate::encoder::EncoderModel;
use crate::index::{build_snapshot, select_premises, IndexSnapshot};
use crate::mepo::{extract_symbols, mepo_select, premise_symbols, MepoConfig, SymbolSet};
use crate::orchestrator::{
    run_variant_suite, EntailmentEntry, FailureCategory, Formula, MockBackend, ProofOutcome, ProofTask,
    PremiseRule, TaskRecord, Variant,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Ranks candidate premises for a proof state.
pub trait Selector: Sync {
    fn name(&self) -> &str;

    /// At most `k` names drawn from `candidates`, best first.
    fn select(&self, state: &StateRecord, candidates: &[String], k: usize) -> Vec<String>;

    /// Whether the selector had to cut `text` to fit its input length.
    fn truncates(&self, _text: &str) -> bool {
        false
    }
}

pub struct NeuralSelector {
    model: EncoderModel,
    snapshot: IndexSnapshot,
}

impl NeuralSelector {
    pub fn new(model: EncoderModel, corpus: &Corpus) -> Self {
        let snapshot = build_snapshot(&model, corpus);
        NeuralSelector { model, snapshot }
    }

    pub fn with_snapshot(model: EncoderModel, snapshot: IndexSnapshot) -> Self {
        NeuralSelector { model, snapshot }
    }

    pub fn model(&self) -> &EncoderModel {
        &self.model
    }

    pub fn snapshot(&self) -> &IndexSnapshot {
        &self.snapshot
    }
}

impl Selector for NeuralSelector {
    fn name(&self) -> &str {
        "neural"
    }

    fn select(&self, state: &StateRecord, candidates: &[String], k: usize) -> Vec<String> {
        let known: Vec<String> = candidates
            .iter()
            .filter(|n| self.snapshot.row_of(n).is_some())
            .cloned()
            .collect();
        let query = self.model.encode(&state.state_text);
        select_premises(&query, k, Some(&known), &self.snapshot, None)
            .map(|r| r.ranked.into_iter().map(|s| s.name).collect())
            .unwrap_or_default()
    }

    fn truncates(&self, text: &str) -> bool {
        self.model.tokenizer().truncates(text)
    }
}

pub struct MepoSelector {
    symbols: HashMap<String, SymbolSet>,
    pub config: MepoConfig,
}

impl MepoSelector {
    pub fn new(corpus: &Corpus, config: MepoConfig) -> Self {
        let symbols = corpus
            .premises
            .iter()
            .map(|p| (p.name.clone(), premise_symbols(&p.name, &p.signature)))
            .collect();
        MepoSelector { symbols, config }
    }
}

impl Selector for MepoSelector {
    fn name(&self) -> &str {
        "mepo"
    }

    fn select(&self, state: &StateRecord, candidates: &[String], k: usize) -> Vec<String> {
        let premises: Vec<(String, SymbolSet)> = candidates
            .iter()
            .filter_map(|n| self.symbols.get(n).map(|s| (n.clone(), s.clone())))
            .collect();
        let sel = mepo_select(&extract_symbols(&state.state_text), &premises, &self.config);
        sel.last_k(k).into_iter().map(|a| a.name.clone()).collect()
    }
}

/// Uniform random ranking, reproducible per (seed, state).
pub struct RandomSelector {
    pub seed: u64,
}

fn stable_hash(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

impl Selector for RandomSelector {
    fn name(&self) -> &str {
        "random"
    }

    fn select(&self, state: &StateRecord, candidates: &[String], k: usize) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ stable_hash(&state.id()));
        let mut c = candidates.to_vec();
        c.shuffle(&mut rng);
        c.truncate(k);
        c
    }
}

/// Ground-truth positives first (by name), then the remaining candidates in
/// their given order.
pub struct OracleSelector;

impl Selector for OracleSelector {
    fn name(&self) -> &str {
        "oracle"
    }

    fn select(&self, state: &StateRecord, candidates: &[String], k: usize) -> Vec<String> {
        let (mut pos, rest): (Vec<String>, Vec<String>) = candidates
            .iter()
            .cloned()
            .partition(|n| state.positive_premises.contains(n));
        pos.sort();
        pos.extend(rest);
        pos.truncate(k);
        pos
    }
}

/// Eligible accessible premises at `state`.
pub fn candidates_for(corpus: &Corpus, state: &StateRecord) -> Result<Vec<String>, CorpusError> {
    Ok(accessible_for_state(corpus, state)?
        .into_iter()
        .filter(|n| corpus.premise(n).is_some_and(PremiseRecord::is_eligible))
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallOptions {
    /// Pool hits over all states instead of averaging per-state fractions.
    pub micro: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub selector: String,
    pub recall_at_k: BTreeMap<usize, f64>,
    pub micro: bool,
    pub states_evaluated: usize,
    /// States left out because they have no positive premise.
    pub zero_positive_states: usize,
    /// States whose text the selector truncated.
    pub truncated_states: usize,
}

pub fn recall_at_k(
    selector: &dyn Selector,
    corpus: &Corpus,
    ks: &[usize],
    options: RecallOptions,
) -> Result<RecallReport, EvalError> {
    let states: Vec<&StateRecord> = corpus
        .states
        .iter()
        .filter(|s| !s.positive_premises.is_empty())
        .collect();
    let zero = corpus.states.len() - states.len();
    // per state, per k: (hits, positives)
    let rows: Vec<(Vec<(usize, usize)>, bool)> = states
        .par_iter()
        .map(|s| {
            let cands = candidates_for(corpus, s)?;
            let counts = ks
                .iter()
                .map(|&k| {
                    let hits = selector
                        .select(s, &cands, k)
                        .iter()
                        .filter(|n| s.positive_premises.contains(*n))
                        .count();
                    (hits, s.positive_premises.len())
                })
                .collect();
            Ok((counts, selector.truncates(&s.state_text)))
        })
        .collect::<Result<_, CorpusError>>()?;

    let mut recall = BTreeMap::new();
    for (j, &k) in ks.iter().enumerate() {
        let value = if rows.is_empty() {
            0.0
        } else if options.micro {
            let hits: usize = rows.iter().map(|r| r.0[j].0).sum();
            let total: usize = rows.iter().map(|r| r.0[j].1).sum();
            hits as f64 / total as f64
        } else {
            rows.iter().map(|r| r.0[j].0 as f64 / r.0[j].1 as f64).sum::<f64>() / rows.len() as f64
        };
        recall.insert(k, value);
    }
    Ok(RecallReport {
        selector: selector.name().to_string(),
        recall_at_k: recall,
        micro: options.micro,
        states_evaluated: rows.len(),
        zero_positive_states: zero,
        truncated_states: rows.iter().filter(|r| r.1).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub proved: bool,
    pub runtime_s: f64,
    pub failure_category: FailureCategory,
    pub premises_used: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremRow {
    pub name: String,
    pub results: BTreeMap<Variant, VariantResult>,
    pub human_proof_lines: Option<u32>,
    pub num_positives: Option<usize>,
}

impl TheoremRow {
    pub fn proved(&self, v: Variant) -> bool {
        self.results.get(&v).is_some_and(|r| r.proved)
    }
}

/// Ranking used for a task: the record's fixed ranking if present, else the
/// selector on the linked corpus state.
pub fn task_ranking(record: &TaskRecord, corpus: Option<&Corpus>, selector: Option<&dyn Selector>) -> Vec<String> {
    let linked = record.theorem.as_deref().and_then(|t| {
        corpus.and_then(|c| c.states.iter().find(|s| s.theorem_name == t && s.tactic_index.is_none()))
    });
    match (selector, linked) {
        (Some(sel), Some(state)) => {
            let k = record.task.k1.max(record.task.k2);
            sel.select(state, &record.task.accessible, k)
        }
        _ => record.ranking.clone().unwrap_or_else(|| record.task.accessible.clone()),
    }
}

fn row_for(record: &TaskRecord, ranking: Vec<String>) -> (TheoremRow, BTreeMap<Variant, ProofOutcome>) {
    let backend = MockBackend::new(record.entailment.clone());
    let suite = run_variant_suite(&record.task, &move |_: &ProofTask| ranking.clone(), &backend);
    let results = suite
        .iter()
        .map(|(v, o)| {
            (
                *v,
                VariantResult {
                    proved: o.proved,
                    runtime_s: o.elapsed_s,
                    failure_category: o.failure_category,
                    premises_used: o.premises_used.clone(),
                },
            )
        })
        .collect();
    let row = TheoremRow {
        name: record.theorem.clone().unwrap_or_else(|| record.task.id.clone()),
        results,
        human_proof_lines: record.proof_lines,
        num_positives: record.num_positives,
    };
    (row, suite)
}

/// Runs every variant on every task, in parallel, each task with its own mock
/// backend. Output order follows `records`.
pub fn run_tasks(
    records: &[TaskRecord],
    corpus: Option<&Corpus>,
    selector: Option<&dyn Selector>,
) -> Vec<(TheoremRow, BTreeMap<Variant, ProofOutcome>)> {
    records
        .par_iter()
        .map(|r| row_for(r, task_ranking(r, corpus, selector)))
        .collect()
}

pub fn proof_rates(rows: &[TheoremRow]) -> BTreeMap<Variant, f64> {
    Variant::ALL
        .into_iter()
        .map(|v| {
            let proved = rows.iter().filter(|r| r.proved(v)).count();
            let rate = if rows.is_empty() { 0.0 } else { proved as f64 / rows.len() as f64 };
            (v, rate)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recall_at_k: BTreeMap<usize, f64>,
    pub proof_rate: BTreeMap<Variant, f64>,
    pub per_theorem: Vec<TheoremRow>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub k1: usize,
    pub k2: usize,
    pub proved: usize,
    pub total: usize,
    pub proof_rate: f64,
}

/// Proof rate of `variant` for every (k1, k2) pair.
pub fn sweep_k(
    records: &[TaskRecord],
    corpus: Option<&Corpus>,
    selector: Option<&dyn Selector>,
    variant: Variant,
    k1s: &[usize],
    k2s: &[usize],
) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for &k1 in k1s {
        for &k2 in k2s {
            let proved = records
                .par_iter()
                .filter(|r| {
                    let mut r = (*r).clone();
                    r.task.k1 = k1;
                    r.task.k2 = k2;
                    r.task.variant = variant;
                    let ranking = task_ranking(&r, corpus, selector);
                    let backend = MockBackend::new(r.entailment.clone());
                    crate::orchestrator::run_task(&r.task, &move |_: &ProofTask| ranking.clone(), &backend).proved
                })
                .count();
            cells.push(SweepCell {
                k1,
                k2,
                proved,
                total: records.len(),
                proof_rate: if records.is_empty() { 0.0 } else { proved as f64 / records.len() as f64 },
            });
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyRow {
    pub dimension: String,
    pub bucket: String,
    pub proved: usize,
    pub unproved: usize,
}

pub fn positives_bucket(n: usize) -> &'static str {
    match n {
        0 => "0",
        1..=8 => "1-8",
        9..=16 => "9-16",
        17..=32 => "17-32",
        _ => "33+",
    }
}

pub fn proof_lines_bucket(n: Option<u32>) -> &'static str {
    match n {
        None => "unknown",
        Some(0..=2) => "1-2",
        Some(3..=5) => "3-5",
        Some(6..=10) => "6-10",
        Some(_) => "11+",
    }
}

/// Proved/unproved counts (under `variant`) bucketed by human proof length
/// and by number of ground-truth premises.
pub fn difficulty_report(rows: &[TheoremRow], variant: Variant) -> Vec<DifficultyRow> {
    let lines = ["1-2", "3-5", "6-10", "11+", "unknown"];
    let positives = ["0", "1-8", "9-16", "17-32", "33+", "unknown"];
    let mut out = Vec::new();
    for (dim, buckets) in [("proof_lines", &lines[..]), ("positives", &positives[..])] {
        for b in buckets {
            let in_bucket: Vec<&TheoremRow> = rows
                .iter()
                .filter(|r| {
                    let key = if dim == "proof_lines" {
                        proof_lines_bucket(r.human_proof_lines)
                    } else {
                        r.num_positives.map_or("unknown", positives_bucket)
                    };
                    key == *b
                })
                .collect();
            let proved = in_bucket.iter().filter(|r| r.proved(variant)).count();
            out.push(DifficultyRow {
                dimension: dim.to_string(),
                bucket: b.to_string(),
                proved,
                unproved: in_bucket.len() - proved,
            });
        }
    }
    out
}

pub const ERROR_CATEGORIES: [&str; 5] = [
    "proved",
    "translation_failure",
    "prover_failure",
    "reconstruction_failure",
    "other_error",
];

/// Fractions of outcomes per category. Timeouts count as `other_error`.
pub fn error_report<'a>(outcomes: impl IntoIterator<Item = &'a ProofOutcome>) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = ERROR_CATEGORIES.iter().map(|c| (c.to_string(), 0)).collect();
    let mut total = 0;
    for o in outcomes {
        total += 1;
        let key = match o.failure_category {
            FailureCategory::None if o.proved => "proved",
            FailureCategory::TranslationFailure => "translation_failure",
            FailureCategory::ProverFailure => "prover_failure",
            FailureCategory::ReconstructionFailure => "reconstruction_failure",
            _ => "other_error",
        };
        *counts.get_mut(key).expect("known category") += 1;
    }
    counts
        .into_iter()
        .map(|(k, n)| (k, if total == 0 { 0.0 } else { n as f64 / total as f64 }))
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_recall(dir: &Path, report: &RecallReport) -> Result<(), EvalError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("recall.json"), serde_json::to_string_pretty(report)?)?;
    #[derive(Serialize)]
    struct Row<'a> {
        selector: &'a str,
        k: usize,
        recall: f64,
    }
    let rows: Vec<Row> = report
        .recall_at_k
        .iter()
        .map(|(k, r)| Row {
            selector: &report.selector,
            k: *k,
            recall: *r,
        })
        .collect();
    write_csv(&dir.join("recall.csv"), &rows)
}

pub fn write_sweep(dir: &Path, cells: &[SweepCell]) -> Result<(), EvalError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(cells)?)?;
    write_csv(&dir.join("sweep.csv"), cells)
}

pub fn write_difficulty(dir: &Path, rows: &[DifficultyRow]) -> Result<(), EvalError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("difficulty.json"), serde_json::to_string_pretty(rows)?)?;
    write_csv(&dir.join("difficulty.csv"), rows)
}

pub fn write_errors(dir: &Path, fractions: &BTreeMap<String, f64>) -> Result<(), EvalError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("errors.json"), serde_json::to_string_pretty(fractions)?)?;
    #[derive(Serialize)]
    struct Row<'a> {
        category: &'a str,
        fraction: f64,
    }
    let rows: Vec<Row> = fractions
        .iter()
        .map(|(c, f)| Row { category: c, fraction: *f })
        .collect();
    write_csv(&dir.join("errors.csv"), &rows)
}

pub fn write_report(dir: &Path, report: &EvalReport) -> Result<(), EvalError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    #[derive(Serialize)]
    struct Row<'a> {
        name: &'a str,
        variant: Variant,
        proved: bool,
        runtime_s: f64,
        failure_category: FailureCategory,
        human_proof_lines: Option<u32>,
        num_positives: Option<usize>,
    }
    let rows: Vec<Row> = report
        .per_theorem
        .iter()
        .flat_map(|t| {
            t.results.iter().map(move |(v, r)| Row {
                name: &t.name,
                variant: *v,
                proved: r.proved,
                runtime_s: r.runtime_s,
                failure_category: r.failure_category,
                human_proof_lines: t.human_proof_lines,
                num_positives: t.num_positives,
            })
        })
        .collect();
    write_csv(&dir.join("per_theorem.csv"), &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_premises: usize,
    pub num_states: usize,
    pub symbols_per_premise: usize,
    /// Mean size of a state's positive set.
    pub positives_per_state: f64,
    pub num_modules: usize,
    /// Fractions of proof tasks planted with each behaviour; the rest are
    /// provable by the prover from two positives.
    pub premise_application_fraction: f64,
    pub untranslatable_fraction: f64,
    pub reconstruction_poison_fraction: f64,
    pub unprovable_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_premises: 200,
            num_states: 400,
            symbols_per_premise: 4,
            positives_per_state: 12.45,
            num_modules: 8,
            premise_application_fraction: 0.2,
            untranslatable_fraction: 0.1,
            reconstruction_poison_fraction: 0.1,
            unprovable_fraction: 0.1,
            seed: 7,
        }
    }
}

/// What a synthetic proof task was built to exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plant {
    /// The prover closes it from a 2-premise core.
    Entailed,
    /// Only a direct premise application closes it.
    PremiseApplication,
    Untranslatable,
    ReconstructionPoison,
    Unprovable,
}

impl Plant {
    /// Category expected under the single-prover-call variant with the
    /// planted core supplied.
    pub fn expected_auto(self) -> FailureCategory {
        match self {
            Plant::Entailed => FailureCategory::None,
            Plant::PremiseApplication | Plant::Unprovable => FailureCategory::ProverFailure,
            Plant::Untranslatable => FailureCategory::TranslationFailure,
            Plant::ReconstructionPoison => FailureCategory::ReconstructionFailure,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// One task per theorem, ranking set to the planted positives first.
    pub tasks: Vec<TaskRecord>,
    pub plants: Vec<Plant>,
}

fn symbol(premise: usize, slot: usize) -> String {
    format!("Alg{premise}.op{slot}")
}

/// Planted-structure corpus: premise `j` owns the symbols `Alg{j}.op*`, and
/// each state mentions symbols of its positives plus a few noise symbols.
pub fn generate_synthetic(spec: &SyntheticSpec) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_mod = spec.num_modules.clamp(1, spec.num_premises.max(1));
    let module_name = |m: usize| format!("Synth.M{m}");

    let mut modules: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for m in 0..n_mod {
        let mut imports = Vec::new();
        if m > 0 {
            imports.push(module_name(m - 1));
            if m > 1 && rng.gen_bool(0.5) {
                imports.push(module_name(rng.gen_range(0..m - 1)));
            }
        }
        modules.insert(module_name(m), imports);
    }

    let spp = spec.symbols_per_premise.max(1);
    let mut premises = Vec::with_capacity(spec.num_premises);
    let mut module_of = Vec::with_capacity(spec.num_premises);
    for j in 0..spec.num_premises {
        let m = j * n_mod / spec.num_premises.max(1);
        let decl_index = (j - (m * spec.num_premises).div_ceil(n_mod)) as u32;
        let syms: Vec<String> = (0..spp).map(|s| symbol(j, s)).collect();
        let body = syms
            .chunks(2)
            .map(|c| match c {
                [a, b] => format!("{a} x = {b} x"),
                [a] => format!("{a} x"),
                _ => unreachable!(),
            })
            .collect::<Vec<_>>()
            .join(" ∧ ");
        let name = format!("Synth.lemma_{j}");
        premises.push(PremiseRecord {
            signature: format!("theorem {name} (x : α) : {body}"),
            name,
            kind: PremiseKind::Theorem,
            docstring: None,
            module: module_name(m),
            decl_index,
            is_blacklisted: false,
            is_language_internal: false,
        });
        module_of.push(m);
    }

    // theorems sit at the end of a module in the upper half of the DAG
    let num_theorems = spec.num_states.div_ceil(2);
    let lo = n_mod / 2;
    let provisional = Corpus::new(premises.clone(), Vec::new(), modules.clone()).expect("valid synthetic corpus");
    let mut states = Vec::with_capacity(spec.num_states);
    let mut theorem_data = Vec::with_capacity(num_theorems);
    for t in 0..num_theorems {
        let m = rng.gen_range(lo..n_mod);
        let decl_index = 10_000 + t as u32;
        let accessible = crate::corpus::accessible_premises(&provisional, &module_name(m), decl_index)
            .expect("declared module");
        let base = spec.positives_per_state.floor();
        let extra = rng.gen_bool((spec.positives_per_state - base).clamp(0.0, 1.0));
        let want = (base as usize + usize::from(extra)).clamp(1, accessible.len().max(1));
        let picks = rand::seq::index::sample(&mut rng, accessible.len(), want.min(accessible.len()));
        let positives: BTreeSet<String> = picks.iter().map(|i| accessible[i].clone()).collect();
        let index_of = |name: &str| -> usize { name.trim_start_matches("Synth.lemma_").parse().expect("synthetic name") };

        let theorem = format!("Synth.thm_{t}");
        let mut terms: Vec<String> = Vec::new();
        for p in &positives {
            let j = index_of(p);
            // two of the premise's symbols
            for s in rand::seq::index::sample(&mut rng, spp, 2.min(spp)) {
                terms.push(format!("{} x", symbol(j, s)));
            }
        }
        let noise_pool: Vec<&String> = accessible.iter().filter(|n| !positives.contains(*n)).collect();
        for _ in 0..3.min(noise_pool.len()) {
            let j = index_of(noise_pool[rng.gen_range(0..noise_pool.len())]);
            terms.push(format!("{} x", symbol(j, rng.gen_range(0..spp))));
        }
        terms.shuffle(&mut rng);
        for (tactic_index, keep) in [(None, terms.len()), (Some(0), terms.len().div_ceil(2))] {
            if states.len() == spec.num_states {
                break;
            }
            states.push(StateRecord {
                state_text: format!("x : α\n⊢ {}", terms[..keep].join(" ∧ ")),
                theorem_name: theorem.clone(),
                tactic_index,
                positive_premises: positives.clone(),
                module: module_name(m),
                decl_index,
            });
        }
        theorem_data.push((theorem, accessible, positives));
    }
    let corpus = Corpus::new(premises, states, modules).expect("valid synthetic corpus");

    let mut tasks = Vec::with_capacity(num_theorems);
    let mut plants = Vec::with_capacity(num_theorems);
    let cut = |f: f64| (f * num_theorems as f64).round() as usize;
    let mut schedule: Vec<Plant> = Vec::with_capacity(num_theorems);
    for (plant, f) in [
        (Plant::PremiseApplication, spec.premise_application_fraction),
        (Plant::Untranslatable, spec.untranslatable_fraction),
        (Plant::ReconstructionPoison, spec.reconstruction_poison_fraction),
        (Plant::Unprovable, spec.unprovable_fraction),
    ] {
        let room = num_theorems - schedule.len();
        schedule.extend(std::iter::repeat(plant).take(cut(f).min(room)));
    }
    schedule.resize(num_theorems, Plant::Entailed);
    schedule.shuffle(&mut rng);

    for ((theorem, accessible, positives), plant) in theorem_data.into_iter().zip(schedule) {
        let goal = Formula::atom(format!("Goal_{theorem}"));
        let pos: Vec<String> = positives.iter().cloned().collect();
        let core: Vec<String> = pos.iter().take(2).cloned().collect();
        let mut entry = EntailmentEntry {
            goal: goal.clone(),
            subsets: vec![core],
            untranslatable: false,
            reconstruction_poison: false,
            other_error: false,
            prove_seconds: 0.0,
        };
        let mut rules = Vec::new();
        let mut entailment = Vec::new();
        match plant {
            Plant::Entailed => entailment.push(entry),
            Plant::PremiseApplication => rules.push(PremiseRule {
                premise: pos[0].clone(),
                hyps: vec![],
                concl: goal.clone(),
            }),
            Plant::Untranslatable => {
                entry.untranslatable = true;
                entailment.push(entry);
            }
            Plant::ReconstructionPoison => {
                entry.reconstruction_poison = true;
                entailment.push(entry);
            }
            Plant::Unprovable => {}
        }
        let mut ranking = pos.clone();
        ranking.extend(accessible.iter().filter(|n| !positives.contains(*n)).cloned());
        let mut task = ProofTask::new(theorem.clone(), goal, accessible);
        task.rules = rules;
        tasks.push(TaskRecord {
            task,
            entailment,
            ranking: Some(ranking),
            theorem: Some(theorem),
            proof_lines: Some(rng.gen_range(1..=15)),
            num_positives: Some(positives.len()),
        });
        plants.push(plant);
    }

    SyntheticCorpus { corpus, tasks, plants }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticCorpus {
        generate_synthetic(&SyntheticSpec {
            num_premises: 60,
            num_states: 40,
            ..Default::default()
        })
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = small();
        let b = small();
        assert_eq!(a.corpus.to_jsonl(), b.corpus.to_jsonl());
        assert_eq!(a.tasks, b.tasks);
    }

    #[test]
    fn planted_positives_are_accessible() {
        let s = small();
        for st in &s.corpus.states {
            let acc: BTreeSet<String> = accessible_for_state(&s.corpus, st).unwrap().into_iter().collect();
            assert!(st.positive_premises.is_subset(&acc));
        }
    }

    #[test]
    fn oracle_recall_is_one_at_positive_count() {
        let s = small();
        let max = s.corpus.states.iter().map(|x| x.positive_premises.len()).max().unwrap();
        let r = recall_at_k(&OracleSelector, &s.corpus, &[max], RecallOptions::default()).unwrap();
        assert_eq!(r.recall_at_k[&max], 1.0);
    }

    #[test]
    fn huge_k_recalls_everything() {
        let s = small();
        let r = recall_at_k(&RandomSelector { seed: 1 }, &s.corpus, &[10_000], RecallOptions::default()).unwrap();
        assert_eq!(r.recall_at_k[&10_000], 1.0);
    }

    #[test]
    fn error_fractions_sum_to_one() {
        let s = small();
        let rows = run_tasks(&s.tasks, None, None);
        let fr = error_report(rows.iter().map(|(_, o)| &o[&Variant::Full]));
        assert!((fr.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_report_empty_and_all_proved() {
        assert!(error_report(std::iter::empty()).values().all(|&v| v == 0.0));
    }

    #[test]
    fn difficulty_buckets_partition_rows() {
        let s = small();
        let rows: Vec<TheoremRow> = run_tasks(&s.tasks, None, None).into_iter().map(|r| r.0).collect();
        let report = difficulty_report(&rows, Variant::Cumul);
        for dim in ["proof_lines", "positives"] {
            let total: usize = report
                .iter()
                .filter(|r| r.dimension == dim)
                .map(|r| r.proved + r.unproved)
                .sum();
            assert_eq!(total, rows.len());
        }
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(positives_bucket(4), "1-8");
        assert_eq!(positives_bucket(8), "1-8");
        assert_eq!(positives_bucket(9), "9-16");
        assert_eq!(positives_bucket(33), "33+");
        assert_eq!(proof_lines_bucket(Some(11)), "11+");
        assert_eq!(proof_lines_bucket(None), "unknown");
    }
}
