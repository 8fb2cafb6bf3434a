//! Contrastive training of [`EncoderModel`] with in-batch negatives, sampled
//! negatives, and positive masking.
//!
//! Every batch holds `B` (state, positive premise) pairs plus `B⁻` sampled
//! negatives per pair. The candidate set for state `i` is every premise in
//! the batch except those in the state's own positive set, so a premise that
//! is positive for `i` is never pushed away from it just because it shows up
//! as some other row's positive or negative.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{accessible_for_state, Corpus, CorpusError};
use crate::encoder::{dot, EncodeTrace, EncoderModel, ParamGrads, Tokenizer, DEFAULT_DIM, DEFAULT_MAX_LEN};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("corpus has no state with a positive premise")]
    NoTrainingPairs,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("non-finite loss {loss} at step {step}")]
    NonFinite { step: usize, loss: f64 },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub negatives_per_pair: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub dim: usize,
    pub max_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            negatives_per_pair: 3,
            temperature: 0.05,
            learning_rate: 2e-4,
            steps: 1000,
            seed: 0,
            dim: DEFAULT_DIM,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(TrainError::Config("temperature must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::Config("learning rate must be positive".into()));
        }
        if self.dim == 0 || self.max_len == 0 {
            return Err(TrainError::Config("dim and max_len must be positive".into()));
        }
        Ok(())
    }
}

/// One (state, positive) pair with its sampled negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    pub state_text: String,
    pub positive: String,
    /// The full ground-truth set of the state, used for masking.
    pub positives: BTreeSet<String>,
    pub negatives: Vec<String>,
}

/// A batch with its distinct premises and per-row negative sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub items: Vec<BatchItem>,
    /// Distinct premise names in order of first appearance (positives first).
    pub premises: Vec<String>,
    pub premise_texts: Vec<String>,
    /// Index into `premises` of each row's positive.
    pub positive_index: Vec<usize>,
    /// `mask[i]`: indices into `premises` forming row `i`'s negative set.
    pub mask: Vec<Vec<usize>>,
    /// Negatives that could not be drawn because a pool was too small.
    pub negative_shortfall: usize,
}

impl TrainBatch {
    /// Assembles a batch; `signature` maps a premise name to its text.
    pub fn from_items(items: Vec<BatchItem>, signature: impl Fn(&str) -> String) -> Self {
        let mut premises: Vec<String> = Vec::new();
        let mut slot: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: &String, premises: &mut Vec<String>| -> usize {
            *slot.entry(name.clone()).or_insert_with(|| {
                premises.push(name.clone());
                premises.len() - 1
            })
        };
        let positive_index: Vec<usize> =
            items.iter().map(|it| intern(&it.positive, &mut premises)).collect();
        for it in &items {
            for n in &it.negatives {
                intern(n, &mut premises);
            }
        }
        let mask = items
            .iter()
            .map(|it| {
                (0..premises.len())
                    .filter(|&j| !it.positives.contains(&premises[j]))
                    .collect()
            })
            .collect();
        let premise_texts = premises.iter().map(|n| signature(n)).collect();
        TrainBatch {
            items,
            premises,
            premise_texts,
            positive_index,
            mask,
            negative_shortfall: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The negative set of row `i` as names.
    pub fn negative_set(&self, i: usize) -> BTreeSet<&str> {
        self.mask[i].iter().map(|&j| self.premises[j].as_str()).collect()
    }
}

/// Pre-extracted (state, positive) pairs and negative pools.
#[derive(Debug, Clone)]
pub struct TrainingSet<'a> {
    corpus: &'a Corpus,
    pairs: Vec<(usize, String)>,
    /// Per state: eligible accessible premises outside the positive set.
    pools: Vec<Vec<String>>,
    signatures: HashMap<&'a str, &'a str>,
}

impl<'a> TrainingSet<'a> {
    pub fn new(corpus: &'a Corpus) -> Result<Self, TrainError> {
        let mut pairs = Vec::new();
        let mut pools = Vec::with_capacity(corpus.states.len());
        for (i, s) in corpus.states.iter().enumerate() {
            let pool = accessible_for_state(corpus, s)?
                .into_iter()
                .filter(|n| !s.positive_premises.contains(n))
                .filter(|n| corpus.premise(n).is_some_and(|p| p.is_eligible()))
                .collect();
            pools.push(pool);
            pairs.extend(s.positive_premises.iter().map(|p| (i, p.clone())));
        }
        if pairs.is_empty() {
            return Err(TrainError::NoTrainingPairs);
        }
        let signatures = corpus
            .premises
            .iter()
            .map(|p| (p.name.as_str(), p.signature.as_str()))
            .collect();
        Ok(TrainingSet {
            corpus,
            pairs,
            pools,
            signatures,
        })
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn signature(&self, name: &str) -> String {
        self.signatures.get(name).copied().unwrap_or_default().to_string()
    }

    /// Uniform pairs (with replacement) and uniform negatives without
    /// replacement from each state's pool.
    pub fn sample_batch(&self, config: &TrainConfig, rng: &mut impl Rng) -> TrainBatch {
        let mut shortfall = 0;
        let items = (0..config.batch_size)
            .map(|_| {
                let (si, positive) = &self.pairs[rng.gen_range(0..self.pairs.len())];
                let state = &self.corpus.states[*si];
                let pool = &self.pools[*si];
                let want = config.negatives_per_pair;
                let take = want.min(pool.len());
                shortfall += want - take;
                let negatives = sample(rng, pool.len(), take)
                    .into_iter()
                    .map(|j| pool[j].clone())
                    .collect();
                BatchItem {
                    state_text: state.state_text.clone(),
                    positive: positive.clone(),
                    positives: state.positive_premises.clone(),
                    negatives,
                }
            })
            .collect();
        let mut batch = TrainBatch::from_items(items, |n| self.signature(n));
        batch.negative_shortfall = shortfall;
        batch
    }
}

pub fn sample_batch(
    corpus: &Corpus,
    config: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<TrainBatch, TrainError> {
    Ok(TrainingSet::new(corpus)?.sample_batch(config, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub loss: f64,
    pub per_example: Vec<f64>,
    pub grad_norm: f64,
}

/// Pairwise (cascade) summation; keeps the error growth logarithmic so the
/// mean is insensitive to batch order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

struct Forward {
    states: Vec<EncodeTrace>,
    premises: Vec<EncodeTrace>,
}

fn forward(model: &EncoderModel, batch: &TrainBatch) -> Forward {
    use rayon::prelude::*;
    let states = batch
        .items
        .par_iter()
        .map(|it| model.forward(&it.state_text))
        .collect();
    let premises = batch
        .premise_texts
        .par_iter()
        .map(|t| model.forward(t))
        .collect();
    Forward { states, premises }
}

/// Row `i`'s logits: positive first, then the masked negatives.
fn row_logits(fw: &Forward, batch: &TrainBatch, i: usize, tau: f64) -> Vec<f64> {
    let s = &fw.states[i].output;
    std::iter::once(batch.positive_index[i])
        .chain(batch.mask[i].iter().copied())
        .map(|j| dot(s, &fw.premises[j].output) / tau)
        .collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Loss only, no gradients.
pub fn batch_loss(model: &EncoderModel, batch: &TrainBatch, tau: f64) -> f64 {
    let fw = forward(model, batch);
    let per: Vec<f64> = (0..batch.len())
        .map(|i| {
            let l = row_logits(&fw, batch, i, tau);
            log_sum_exp(&l) - l[0]
        })
        .collect();
    pairwise_sum(&per) / batch.len() as f64
}

/// Loss and exact parameter gradients.
pub fn loss_and_gradients(model: &EncoderModel, batch: &TrainBatch, tau: f64) -> (LossReport, ParamGrads) {
    let b = batch.len();
    let fw = forward(model, batch);
    let d = model.dim();
    let mut state_up = vec![vec![0.0; d]; b];
    let mut premise_up = vec![vec![0.0; d]; batch.premises.len()];
    let mut per_example = Vec::with_capacity(b);

    for i in 0..b {
        let logits = row_logits(&fw, batch, i, tau);
        let lse = log_sum_exp(&logits);
        per_example.push(lse - logits[0]);
        let s = &fw.states[i].output;
        let cols = std::iter::once(batch.positive_index[i]).chain(batch.mask[i].iter().copied());
        for (c, j) in cols.enumerate() {
            let w = (logits[c] - lse).exp();
            let dl = (if c == 0 { w - 1.0 } else { w }) / (b as f64 * tau);
            let p = &fw.premises[j].output;
            for k in 0..d {
                state_up[i][k] += dl * p[k];
                premise_up[j][k] += dl * s[k];
            }
        }
    }

    let mut grads = ParamGrads::zeros(model);
    for (trace, g) in fw.states.iter().zip(&state_up) {
        model.backward(trace, g, &mut grads);
    }
    for (trace, g) in fw.premises.iter().zip(&premise_up) {
        model.backward(trace, g, &mut grads);
    }
    let report = LossReport {
        loss: pairwise_sum(&per_example) / b as f64,
        per_example,
        grad_norm: grads.norm(),
    };
    (report, grads)
}

pub fn masked_contrastive_loss(model: &EncoderModel, batch: &TrainBatch, tau: f64) -> LossReport {
    loss_and_gradients(model, batch, tau).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EncoderModel,
    pub curve: Vec<StepRecord>,
    pub negative_shortfall: usize,
}

/// Initial model for `corpus`: vocabulary from all signatures and states.
pub fn initial_model(corpus: &Corpus, config: &TrainConfig) -> EncoderModel {
    let texts = corpus
        .premises
        .iter()
        .map(|p| p.signature.as_str())
        .chain(corpus.states.iter().map(|s| s.state_text.as_str()));
    let tokenizer = Tokenizer::build(texts, config.max_len);
    EncoderModel::random(tokenizer, config.dim, config.seed)
}

pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_from(initial_model(corpus, config), corpus, config)
}

/// Plain SGD at a fixed learning rate for `config.steps` steps.
pub fn train_from(
    mut model: EncoderModel,
    corpus: &Corpus,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let set = TrainingSet::new(corpus)?;
    // distinct stream from the initialization seed
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c);
    let mut curve = Vec::with_capacity(config.steps);
    let mut shortfall = 0;
    for step in 1..=config.steps {
        let batch = set.sample_batch(config, &mut rng);
        shortfall += batch.negative_shortfall;
        let (report, grads) = loss_and_gradients(&model, &batch, config.temperature);
        if !report.loss.is_finite() || !report.grad_norm.is_finite() {
            return Err(TrainError::NonFinite {
                step,
                loss: report.loss,
            });
        }
        let (emb, proj) = model.params_mut();
        for (p, g) in emb.iter_mut().zip(&grads.embedding) {
            *p -= config.learning_rate * g;
        }
        for (p, g) in proj.iter_mut().zip(&grads.projection) {
            *p -= config.learning_rate * g;
        }
        curve.push(StepRecord {
            step,
            loss: report.loss,
            grad_norm: report.grad_norm,
        });
    }
    if config.steps > 0 {
        model.refresh_version();
    }
    Ok(TrainOutcome {
        model,
        curve,
        negative_shortfall: shortfall,
    })
}

/// Writes `step,loss,grad_norm` rows.
pub fn write_loss_curve(path: impl AsRef<Path>, curve: &[StepRecord]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in curve {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
