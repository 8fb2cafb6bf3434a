//! Lightweight text encoder: token embeddings, mean pooling, a linear
//! projection, and L2 normalization, with exact backpropagation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const UNK_TOKEN: &str = "<unk>";
pub const EMPTY_TOKEN: &str = "<empty>";
pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_MAX_LEN: usize = 256;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("embeddings come from different model versions ({0} vs {1})")]
    VersionMismatch(String, String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Splits text into lowercased alphanumeric runs (`_` and `'` count as word
/// characters) and single punctuation characters; whitespace separates.
pub fn pre_tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' || c == '\'' {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    vocab: BTreeMap<String, u32>,
    tokens: Vec<String>,
    max_len: usize,
}

impl Tokenizer {
    /// Vocabulary from every token seen in `texts` (minimum frequency 1),
    /// after the reserved `<unk>` and `<empty>` ids.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_len: usize) -> Self {
        let seen: BTreeSet<String> = texts.into_iter().flat_map(pre_tokenize).collect();
        let tokens = [UNK_TOKEN.to_string(), EMPTY_TOKEN.to_string()]
            .into_iter()
            .chain(seen)
            .collect();
        Self::from_tokens(tokens, max_len)
    }

    pub fn from_tokens(tokens: Vec<String>, max_len: usize) -> Self {
        let vocab = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Tokenizer { vocab, tokens, max_len }
    }

    pub fn unk_id(&self) -> u32 {
        0
    }

    pub fn empty_id(&self) -> u32 {
        1
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        pre_tokenize(text)
            .iter()
            .take(self.max_len)
            .map(|t| self.id(t).unwrap_or(self.unk_id()))
            .collect()
    }

    /// Whether `text` has more than `max_len` tokens.
    pub fn truncates(&self, text: &str) -> bool {
        pre_tokenize(text).len() > self.max_len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub model_version: String,
}

/// Cosine similarity of two embeddings from the same model.
pub fn similarity(a: &Embedding, b: &Embedding) -> Result<f64, EncoderError> {
    if a.model_version != b.model_version {
        return Err(EncoderError::VersionMismatch(
            a.model_version.clone(),
            b.model_version.clone(),
        ));
    }
    if a.vector.len() != b.vector.len() {
        return Err(EncoderError::Shape(format!(
            "dimension {} vs {}",
            a.vector.len(),
            b.vector.len()
        )));
    }
    let dot = dot(&a.vector, &b.vector);
    let norm = dot_self(&a.vector).sqrt() * dot_self(&b.vector).sqrt();
    Ok((dot / norm).clamp(-1.0, 1.0))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_self(a: &[f64]) -> f64 {
    dot(a, a)
}

/// The trainable encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    tokenizer: Tokenizer,
    dim: usize,
    /// `vocab × dim`, row-major.
    embedding: Vec<f64>,
    /// `dim × dim`, row-major; pooled row vector `h` maps to `h · projection`.
    projection: Vec<f64>,
    version: String,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct EncodeTrace {
    pub ids: Vec<u32>,
    pub pooled: Vec<f64>,
    pub projected: Vec<f64>,
    pub norm: f64,
    pub output: Vec<f64>,
}

/// Dense gradient accumulator with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub embedding: Vec<f64>,
    pub projection: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros(model: &EncoderModel) -> Self {
        ParamGrads {
            embedding: vec![0.0; model.embedding.len()],
            projection: vec![0.0; model.projection.len()],
        }
    }

    pub fn norm(&self) -> f64 {
        (dot_self(&self.embedding) + dot_self(&self.projection)).sqrt()
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.embedding.iter_mut().zip(&other.embedding) {
            *a += b;
        }
        for (a, b) in self.projection.iter_mut().zip(&other.projection) {
            *a += b;
        }
    }
}

impl EncoderModel {
    /// Gaussian embedding rows (std `1/sqrt(dim)`) and an identity projection.
    pub fn random(tokenizer: Tokenizer, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("valid std");
        let embedding = (0..tokenizer.len() * dim).map(|_| normal.sample(&mut rng)).collect();
        let mut projection = vec![0.0; dim * dim];
        for i in 0..dim {
            projection[i * dim + i] = 1.0;
        }
        Self::from_parts(tokenizer, dim, embedding, projection).expect("shapes agree")
    }

    pub fn from_parts(
        tokenizer: Tokenizer,
        dim: usize,
        embedding: Vec<f64>,
        projection: Vec<f64>,
    ) -> Result<Self, EncoderError> {
        if dim == 0 {
            return Err(EncoderError::Shape("dimension must be positive".into()));
        }
        if embedding.len() != tokenizer.len() * dim {
            return Err(EncoderError::Shape(format!(
                "embedding table has {} entries, expected {}",
                embedding.len(),
                tokenizer.len() * dim
            )));
        }
        if projection.len() != dim * dim {
            return Err(EncoderError::Shape(format!(
                "projection has {} entries, expected {}",
                projection.len(),
                dim * dim
            )));
        }
        let mut model = EncoderModel {
            tokenizer,
            dim,
            embedding,
            projection,
            version: String::new(),
        };
        model.refresh_version();
        Ok(model)
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn embedding_table(&self) -> &[f64] {
        &self.embedding
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.embedding, &mut self.projection)
    }

    /// Recomputes the content hash; call after mutating parameters.
    pub fn refresh_version(&mut self) {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        h.update((self.tokenizer.max_len as u64).to_le_bytes());
        for t in &self.tokenizer.tokens {
            h.update((t.len() as u64).to_le_bytes());
            h.update(t.as_bytes());
        }
        for x in self.embedding.iter().chain(&self.projection) {
            h.update(x.to_bits().to_le_bytes());
        }
        self.version = hex::encode(&h.finalize()[..16]);
    }

    pub fn encode(&self, text: &str) -> Embedding {
        Embedding {
            vector: self.forward(text).output,
            model_version: self.version.clone(),
        }
    }

    /// Forward pass keeping intermediates.
    pub fn forward(&self, text: &str) -> EncodeTrace {
        let mut ids = self.tokenizer.tokenize(text);
        if ids.is_empty() {
            ids.push(self.tokenizer.empty_id());
        }
        let d = self.dim;
        let mut pooled = vec![0.0; d];
        for &id in &ids {
            let row = &self.embedding[id as usize * d..(id as usize + 1) * d];
            for (p, x) in pooled.iter_mut().zip(row) {
                *p += x;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        pooled.iter_mut().for_each(|p| *p *= inv);

        let mut projected = vec![0.0; d];
        for (k, &h) in pooled.iter().enumerate() {
            let row = &self.projection[k * d..(k + 1) * d];
            for (z, p) in projected.iter_mut().zip(row) {
                *z += h * p;
            }
        }
        let norm = dot_self(&projected).sqrt();
        let output = if norm > f64::MIN_POSITIVE {
            projected.iter().map(|z| z / norm).collect()
        } else {
            // degenerate parameters: fall back to the first basis vector
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        };
        EncodeTrace {
            ids,
            pooled,
            projected,
            norm,
            output,
        }
    }

    /// Accumulates into `grads` the gradient of `upstream · output` with
    /// respect to the parameters, for one forward trace.
    pub fn backward(&self, trace: &EncodeTrace, upstream: &[f64], grads: &mut ParamGrads) {
        let d = self.dim;
        if trace.norm <= f64::MIN_POSITIVE {
            return;
        }
        // d(z/|z|)/dz applied to the upstream gradient
        let along = dot(&trace.output, upstream);
        let dz: Vec<f64> = upstream
            .iter()
            .zip(&trace.output)
            .map(|(g, y)| (g - y * along) / trace.norm)
            .collect();
        let mut dh = vec![0.0; d];
        for k in 0..d {
            let row = &self.projection[k * d..(k + 1) * d];
            let grow = &mut grads.projection[k * d..(k + 1) * d];
            let h = trace.pooled[k];
            let mut acc = 0.0;
            for j in 0..d {
                grow[j] += h * dz[j];
                acc += row[j] * dz[j];
            }
            dh[k] = acc;
        }
        let inv = 1.0 / trace.ids.len() as f64;
        for &id in &trace.ids {
            let grow = &mut grads.embedding[id as usize * d..(id as usize + 1) * d];
            for (g, x) in grow.iter_mut().zip(&dh) {
                *g += x * inv;
            }
        }
    }

    /// Gradient of `Σ_i upstream[i] · encode(texts[i])` with respect to the
    /// embedding table and projection.
    pub fn encode_batch_with_grads(
        &self,
        texts: &[&str],
        upstream: &[Vec<f64>],
    ) -> Result<ParamGrads, EncoderError> {
        if texts.len() != upstream.len() {
            return Err(EncoderError::Shape(format!(
                "{} texts but {} upstream gradients",
                texts.len(),
                upstream.len()
            )));
        }
        if let Some(bad) = upstream.iter().find(|g| g.len() != self.dim) {
            return Err(EncoderError::Shape(format!(
                "upstream gradient of length {}, expected {}",
                bad.len(),
                self.dim
            )));
        }
        let mut grads = ParamGrads::zeros(self);
        for (text, g) in texts.iter().zip(upstream) {
            let trace = self.forward(text);
            self.backward(&trace, g, &mut grads);
        }
        Ok(grads)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EncoderError> {
        std::fs::write(path, self.to_checkpoint_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EncoderError> {
        Self::from_checkpoint_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_checkpoint_json(&self) -> String {
        serde_json::to_string(&Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            format_version: 1,
            dim: self.dim,
            max_len: self.tokenizer.max_len,
            vocab: self.tokenizer.tokens.clone(),
            embedding: self.embedding.clone(),
            projection: self.projection.clone(),
            version: self.version.clone(),
        })
        .expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self, EncoderError> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| EncoderError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.format_version != 1 {
            return Err(EncoderError::Checkpoint(format!(
                "unsupported format {} v{}",
                ck.format, ck.format_version
            )));
        }
        let tokenizer = Tokenizer::from_tokens(ck.vocab, ck.max_len);
        let model = Self::from_parts(tokenizer, ck.dim, ck.embedding, ck.projection)?;
        if model.version != ck.version {
            return Err(EncoderError::Checkpoint(format!(
                "parameter hash {} does not match recorded version {}",
                model.version, ck.version
            )));
        }
        Ok(model)
    }
}

const CHECKPOINT_FORMAT: &str = "premsel-encoder";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    format_version: u32,
    dim: usize,
    max_len: usize,
    vocab: Vec<String>,
    embedding: Vec<f64>,
    projection: Vec<f64>,
    version: String,
}
