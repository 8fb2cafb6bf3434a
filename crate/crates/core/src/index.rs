//! Exact top-k cosine retrieval over cached premise embeddings.
//!
//! An [`IndexSnapshot`] is built once per (corpus, model) pair and never
//! mutated. Premises that are not part of the snapshot (for example ones the
//! user declared locally) are embedded into a [`DeltaOverlay`] that sits on
//! top of a shared base; retrieval over base + overlay is the same as
//! retrieval over a snapshot rebuilt from the union.
//!
//! # Cache file layout
//!
//! All integers little-endian, strings as `u32` byte length + UTF-8:
//!
//! ```text
//! magic        b"PSIX"
//! version      u32 = 1
//! corpus id    string
//! model ver    string
//! rows         u64
//! dim          u32
//! rows ×       (name string, signature string)
//! rows × dim   f64 bit patterns, row-major
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::encoder::{dot, Embedding, EncoderModel};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("model version mismatch: index built with {index}, query from {query}")]
    VersionMismatch { index: String, query: String },
    #[error("unknown premise `{0}` in candidate set")]
    UnknownPremise(String),
    #[error("premise `{0}` already exists with a different signature")]
    ConflictingPremise(String),
    #[error("query has dimension {query}, index has {index}")]
    Dimension { query: usize, index: usize },
    #[error("bad snapshot file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A premise not present in the base snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewPremise {
    pub name: String,
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSnapshot {
    dim: usize,
    matrix: Vec<f64>,
    names: Vec<String>,
    signatures: Vec<String>,
    rows: HashMap<String, usize>,
    corpus_snapshot_id: String,
    model_version: String,
}

impl IndexSnapshot {
    pub fn from_rows(
        dim: usize,
        names: Vec<String>,
        signatures: Vec<String>,
        matrix: Vec<f64>,
        corpus_snapshot_id: String,
        model_version: String,
    ) -> Result<Self, IndexError> {
        if names.len() != signatures.len() || matrix.len() != names.len() * dim {
            return Err(IndexError::Format("row count disagrees with matrix".into()));
        }
        let mut rows = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if rows.insert(n.clone(), i).is_some() {
                return Err(IndexError::Format(format!("duplicate row name `{n}`")));
            }
        }
        Ok(IndexSnapshot {
            dim,
            matrix,
            names,
            signatures,
            rows,
            corpus_snapshot_id,
            model_version,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_of(&self, name: &str) -> Option<&[f64]> {
        self.rows.get(name).map(|&i| self.row(i))
    }

    pub fn signature_of(&self, name: &str) -> Option<&str> {
        self.rows.get(name).map(|&i| self.signatures[i].as_str())
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn corpus_snapshot_id(&self) -> &str {
        &self.corpus_snapshot_id
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), IndexError> {
        w.write_all(MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        write_str(&mut w, &self.corpus_snapshot_id)?;
        write_str(&mut w, &self.model_version)?;
        w.write_all(&(self.names.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for (n, s) in self.names.iter().zip(&self.signatures) {
            write_str(&mut w, n)?;
            write_str(&mut w, s)?;
        }
        for x in &self.matrix {
            w.write_all(&x.to_bits().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, IndexError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(IndexError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != 1 {
            return Err(IndexError::Format(format!("unsupported version {version}")));
        }
        let corpus_id = read_str(&mut r)?;
        let model_version = read_str(&mut r)?;
        let n = read_u64(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let mut names = Vec::with_capacity(n.min(1 << 20));
        let mut signatures = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            names.push(read_str(&mut r)?);
            signatures.push(read_str(&mut r)?);
        }
        let mut matrix = Vec::with_capacity((n * dim).min(1 << 24));
        for _ in 0..n * dim {
            matrix.push(f64::from_bits(read_u64(&mut r)?));
        }
        Self::from_rows(dim, names, signatures, matrix, corpus_id, model_version)
    }
}

const MAGIC: &[u8; 4] = b"PSIX";

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> Result<String, IndexError> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| IndexError::Format(e.to_string()))
}

/// One row per eligible premise, in corpus order.
pub fn build_snapshot(model: &EncoderModel, corpus: &Corpus) -> IndexSnapshot {
    let eligible: Vec<_> = corpus.premises.iter().filter(|p| p.is_eligible()).collect();
    let rows: Vec<Vec<f64>> = eligible
        .par_iter()
        .map(|p| model.encode(&p.signature).vector)
        .collect();
    IndexSnapshot::from_rows(
        model.dim(),
        eligible.iter().map(|p| p.name.clone()).collect(),
        eligible.iter().map(|p| p.signature.clone()).collect(),
        rows.concat(),
        corpus.snapshot_id.clone(),
        model.version().to_string(),
    )
    .expect("corpus premise names are unique")
}

/// Extra rows layered over a base snapshot.
#[derive(Debug, Clone)]
pub struct DeltaOverlay {
    base: Arc<IndexSnapshot>,
    names: Vec<String>,
    signatures: Vec<String>,
    matrix: Vec<f64>,
    rows: HashMap<String, usize>,
}

impl DeltaOverlay {
    pub fn empty(base: Arc<IndexSnapshot>) -> Self {
        DeltaOverlay {
            base,
            names: Vec::new(),
            signatures: Vec::new(),
            matrix: Vec::new(),
            rows: HashMap::new(),
        }
    }

    pub fn base(&self) -> &Arc<IndexSnapshot> {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn signature_of(&self, name: &str) -> Option<&str> {
        self.rows.get(name).map(|&i| self.signatures[i].as_str())
    }

    pub fn row_of(&self, name: &str) -> Option<&[f64]> {
        let d = self.base.dim;
        self.rows.get(name).map(|&i| &self.matrix[i * d..(i + 1) * d])
    }
}

/// Removes premises already in `base` with an identical signature, and
/// duplicates within `new`. A name that reappears with a different signature
/// is an error.
pub fn unseen_premises<'a>(
    base: &IndexSnapshot,
    new: &'a [NewPremise],
) -> Result<Vec<&'a NewPremise>, IndexError> {
    let mut seen: HashMap<&str, &str> = HashMap::new();
    let mut out = Vec::new();
    for p in new {
        if let Some(sig) = base.signature_of(&p.name) {
            if sig != p.signature {
                return Err(IndexError::ConflictingPremise(p.name.clone()));
            }
            continue;
        }
        match seen.get(p.name.as_str()) {
            Some(sig) if *sig != p.signature => {
                return Err(IndexError::ConflictingPremise(p.name.clone()))
            }
            Some(_) => continue,
            None => {
                seen.insert(&p.name, &p.signature);
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Embeds only the signatures of premises the base does not already hold.
pub fn apply_delta(
    base: &Arc<IndexSnapshot>,
    new: &[NewPremise],
    model: &EncoderModel,
) -> Result<DeltaOverlay, IndexError> {
    if model.version() != base.model_version {
        return Err(IndexError::VersionMismatch {
            index: base.model_version.clone(),
            query: model.version().to_string(),
        });
    }
    apply_delta_with(base, new, |sig| model.encode(sig).vector)
}

/// Like [`apply_delta`] with a caller-supplied embedder (e.g. one backed by
/// a signature cache). The embedder must use the base's model.
pub fn apply_delta_with(
    base: &Arc<IndexSnapshot>,
    new: &[NewPremise],
    embed: impl Fn(&str) -> Vec<f64> + Sync,
) -> Result<DeltaOverlay, IndexError> {
    let fresh = unseen_premises(base, new)?;
    let rows: Vec<Vec<f64>> = fresh.par_iter().map(|p| embed(&p.signature)).collect();
    if let Some(r) = rows.iter().find(|r| r.len() != base.dim) {
        return Err(IndexError::Dimension {
            query: r.len(),
            index: base.dim,
        });
    }
    let names: Vec<String> = fresh.iter().map(|p| p.name.clone()).collect();
    let rows_map = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    Ok(DeltaOverlay {
        base: Arc::clone(base),
        signatures: fresh.iter().map(|p| p.signature.clone()).collect(),
        names,
        matrix: rows.concat(),
        rows: rows_map,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPremise {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub ranked: Vec<ScoredPremise>,
    pub k_requested: usize,
}

impl RetrievalResult {
    pub fn names(&self) -> Vec<&str> {
        self.ranked.iter().map(|s| s.name.as_str()).collect()
    }
}

/// Higher score first; equal scores by name.
fn rank_order(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.cmp(b.1))
}

/// Exact top-k by dot product over `candidates` (all base and overlay rows
/// when `None`). Ties are broken by lexicographic name.
pub fn select_premises(
    query: &Embedding,
    k: usize,
    candidates: Option<&[String]>,
    snapshot: &IndexSnapshot,
    overlay: Option<&DeltaOverlay>,
) -> Result<RetrievalResult, IndexError> {
    if query.model_version != snapshot.model_version {
        return Err(IndexError::VersionMismatch {
            index: snapshot.model_version.clone(),
            query: query.model_version.clone(),
        });
    }
    if let Some(o) = overlay {
        if o.base.model_version != snapshot.model_version {
            return Err(IndexError::VersionMismatch {
                index: snapshot.model_version.clone(),
                query: o.base.model_version.clone(),
            });
        }
    }
    if query.vector.len() != snapshot.dim {
        return Err(IndexError::Dimension {
            query: query.vector.len(),
            index: snapshot.dim,
        });
    }
    let q = &query.vector;
    let mut scored: Vec<(f64, &str)> = match candidates {
        None => {
            let base = snapshot.names.iter().enumerate().map(|(i, n)| (dot(q, snapshot.row(i)), n.as_str()));
            match overlay {
                Some(o) => base
                    .chain(o.names.iter().map(|n| (dot(q, o.row_of(n).unwrap()), n.as_str())))
                    .collect(),
                None => base.collect(),
            }
        }
        Some(names) => {
            let distinct: BTreeSet<&str> = names.iter().map(String::as_str).collect();
            let mut out = Vec::with_capacity(distinct.len());
            for n in distinct {
                let row = snapshot
                    .row_of(n)
                    .or_else(|| overlay.and_then(|o| o.row_of(n)))
                    .ok_or_else(|| IndexError::UnknownPremise(n.to_string()))?;
                out.push((dot(q, row), n));
            }
            out
        }
    };

    let take = k.min(scored.len());
    if take > 0 && take < scored.len() {
        scored.select_nth_unstable_by(take - 1, rank_order);
        scored.truncate(take);
    }
    scored.sort_by(rank_order);
    scored.truncate(take);
    Ok(RetrievalResult {
        ranked: scored
            .into_iter()
            .map(|(score, name)| ScoredPremise {
                name: name.to_string(),
                score,
            })
            .collect(),
        k_requested: k,
    })
}

/// Directory of snapshot files keyed by (corpus snapshot id, model version).
#[derive(Debug, Clone)]
pub struct SnapshotCache {
    dir: PathBuf,
}

impl SnapshotCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SnapshotCache { dir: dir.into() }
    }

    pub fn path_for(&self, corpus_snapshot_id: &str, model_version: &str) -> PathBuf {
        self.dir.join(format!("{corpus_snapshot_id}-{model_version}.psix"))
    }

    pub fn load(&self, corpus_snapshot_id: &str, model_version: &str) -> Result<Option<IndexSnapshot>, IndexError> {
        let path = self.path_for(corpus_snapshot_id, model_version);
        if !path.exists() {
            return Ok(None);
        }
        let snap = IndexSnapshot::read_from(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if snap.corpus_snapshot_id != corpus_snapshot_id || snap.model_version != model_version {
            return Err(IndexError::Format("cache file key does not match its header".into()));
        }
        Ok(Some(snap))
    }

    pub fn store(&self, snapshot: &IndexSnapshot) -> Result<PathBuf, IndexError> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&snapshot.corpus_snapshot_id, &snapshot.model_version);
        let tmp = path.with_extension("psix.tmp");
        {
            let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            snapshot.write_to(&mut w)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Loads the snapshot for (corpus, model) or builds and stores it.
    pub fn load_or_build(&self, model: &EncoderModel, corpus: &Corpus) -> Result<IndexSnapshot, IndexError> {
        if let Some(s) = self.load(&corpus.snapshot_id, model.version())? {
            return Ok(s);
        }
        let snap = build_snapshot(model, corpus);
        self.store(&snap)?;
        Ok(snap)
    }
}

/// Loads a snapshot file from an explicit path.
pub fn read_snapshot(path: impl AsRef<Path>) -> Result<IndexSnapshot, IndexError> {
    IndexSnapshot::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_snapshot(rows: &[(&str, [f64; 2])]) -> IndexSnapshot {
        IndexSnapshot::from_rows(
            2,
            rows.iter().map(|r| r.0.to_string()).collect(),
            rows.iter().map(|r| format!("theorem {}", r.0)).collect(),
            rows.iter().flat_map(|r| r.1).collect(),
            "c".into(),
            "m".into(),
        )
        .unwrap()
    }

    fn query(v: [f64; 2]) -> Embedding {
        Embedding {
            vector: v.to_vec(),
            model_version: "m".into(),
        }
    }

    #[test]
    fn k_zero_is_empty() {
        let s = toy_snapshot(&[("a", [1.0, 0.0])]);
        let r = select_premises(&query([1.0, 0.0]), 0, None, &s, None).unwrap();
        assert!(r.ranked.is_empty());
        assert_eq!(r.k_requested, 0);
    }

    #[test]
    fn ties_break_by_name() {
        let s = toy_snapshot(&[("c", [1.0, 0.0]), ("a", [1.0, 0.0]), ("b", [0.0, 1.0])]);
        let r = select_premises(&query([1.0, 0.0]), 3, None, &s, None).unwrap();
        assert_eq!(r.names(), vec!["a", "c", "b"]);
    }

    #[test]
    fn singleton_mask_returns_exact_score() {
        let s = toy_snapshot(&[("a", [0.6, 0.8]), ("b", [1.0, 0.0])]);
        let r = select_premises(&query([1.0, 0.0]), 5, Some(&["a".to_string()]), &s, None).unwrap();
        assert_eq!(r.ranked, vec![ScoredPremise { name: "a".into(), score: 0.6 }]);
    }

    #[test]
    fn unknown_mask_name_errors() {
        let s = toy_snapshot(&[("a", [1.0, 0.0])]);
        let err = select_premises(&query([1.0, 0.0]), 1, Some(&["zz".to_string()]), &s, None);
        assert!(matches!(err, Err(IndexError::UnknownPremise(n)) if n == "zz"));
    }

    #[test]
    fn version_mismatch_errors() {
        let s = toy_snapshot(&[("a", [1.0, 0.0])]);
        let mut q = query([1.0, 0.0]);
        q.model_version = "other".into();
        assert!(matches!(
            select_premises(&q, 1, None, &s, None),
            Err(IndexError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn conflicting_duplicate_rejected_identical_dropped() {
        let base = Arc::new(toy_snapshot(&[("a", [1.0, 0.0])]));
        let same = NewPremise { name: "a".into(), signature: "theorem a".into() };
        let diff = NewPremise { name: "a".into(), signature: "theorem a : False".into() };
        let o = apply_delta_with(&base, &[same], |_| vec![0.0, 1.0]).unwrap();
        assert!(o.is_empty());
        assert!(matches!(
            apply_delta_with(&base, &[diff], |_| vec![0.0, 1.0]),
            Err(IndexError::ConflictingPremise(_))
        ));
    }

    #[test]
    fn overlay_rows_are_searchable() {
        let base = Arc::new(toy_snapshot(&[("a", [1.0, 0.0])]));
        let o = apply_delta_with(
            &base,
            &[NewPremise { name: "local".into(), signature: "theorem local".into() }],
            |_| vec![0.0, 1.0],
        )
        .unwrap();
        let r = select_premises(&query([0.0, 1.0]), 1, None, &base, Some(&o)).unwrap();
        assert_eq!(r.names(), vec!["local"]);
    }

    #[test]
    fn snapshot_file_round_trips() {
        let s = toy_snapshot(&[("a", [0.6, 0.8]), ("β", [-1.0, 1e-300])]);
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"PSIX");
        assert_eq!(IndexSnapshot::read_from(buf.as_slice()).unwrap(), s);
        buf[0] = b'X';
        assert!(IndexSnapshot::read_from(buf.as_slice()).is_err());
    }
}
