//! Review-level contextual vectors.
//!
//! Real sentence-encoder vectors are produced offline and arrive as a `CTX1`
//! file. Without one, [`fallback_embed`] derives a review vector from the
//! skip-gram vectors so the pipeline stays self-contained.
//!
//! `CTX1` layout, little-endian throughout:
//!
//! ```text
//! "CTX1"  u32 dim  u64 count  [u8; 16] corpus_digest
//! count × { u64 review_id, dim × f32 }
//! ```
//!
//! The digest is the first 16 bytes of the SHA-256 of the corpus file the
//! vectors were computed from.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;
use sha2::{Digest, Sha256};

use crate::binio::{write_f32s, LeReader};
use crate::error::{Error, Result};
use crate::preprocess::TokenizedReview;
use crate::word2vec::KeyedVectors;

/// Vector width used throughout the pipeline.
pub const CONTEXT_DIM: usize = 384;
pub const HEADER_LEN: usize = 32;

const MAGIC: &[u8; 4] = b"CTX1";

pub type CorpusDigest = [u8; 16];

pub fn corpus_digest(bytes: &[u8]) -> CorpusDigest {
    let full = Sha256::digest(bytes);
    let mut d = [0u8; 16];
    d.copy_from_slice(&full[..16]);
    d
}

pub fn corpus_digest_of_file(path: impl AsRef<Path>) -> Result<CorpusDigest> {
    let path = path.as_ref();
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let mut d = [0u8; 16];
    d.copy_from_slice(&hasher.finalize()[..16]);
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<u64, Vec<f32>>,
    source_digest: CorpusDigest,
}

impl EmbeddingStore {
    pub fn new(dim: usize, source_digest: CorpusDigest) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
            source_digest,
        }
    }

    pub fn insert(&mut self, review_id: u64, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if !vector.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value in vector for review {review_id}"
            )));
        }
        if self.vectors.insert(review_id, vector).is_some() {
            return Err(Error::Format(format!("duplicate review id {review_id}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn source_digest(&self) -> &CorpusDigest {
        &self.source_digest
    }

    pub fn get(&self, review_id: u64) -> Option<&[f32]> {
        self.vectors.get(&review_id).map(Vec::as_slice)
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.vectors.keys().copied()
    }

    /// Warns if the store was computed from a different corpus file. A
    /// mismatch is allowed so that stores built on a superset still work.
    pub fn check_digest(&self, expected: &CorpusDigest) -> bool {
        let ok = &self.source_digest == expected;
        if !ok {
            warn!("context store digest does not match the corpus file; continuing");
        }
        ok
    }
}

/// Records are written in ascending review id order.
pub fn write_store<W: Write>(mut w: W, store: &EmbeddingStore) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(store.dim as u32).to_le_bytes())?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    w.write_all(&store.source_digest)?;
    for (id, v) in &store.vectors {
        w.write_all(&id.to_le_bytes())?;
        write_f32s(&mut w, v.iter().copied())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_store<R: Read>(r: R, expected_dim: usize) -> Result<EmbeddingStore> {
    let mut r = LeReader::new(r);
    r.magic(MAGIC)?;
    let dim = r.u32("dimension")? as usize;
    if dim != expected_dim {
        return Err(Error::Dimension {
            expected: expected_dim,
            found: dim,
        });
    }
    let count = r.u64("record count")?;
    let mut digest = [0u8; 16];
    r.bytes(&mut digest, "corpus digest")?;
    let mut store = EmbeddingStore::new(dim, digest);
    for _ in 0..count {
        let start = r.offset();
        let id = r.u64("review id")?;
        let mut v = vec![0f32; dim];
        r.f32_into(&mut v, "vector")?;
        store.insert(id, v).map_err(|e| Error::Corrupt {
            offset: start,
            message: e.to_string(),
        })?;
    }
    if !r.at_end()? {
        return Err(Error::Corrupt {
            offset: r.offset(),
            message: "trailing bytes after last record".into(),
        });
    }
    Ok(store)
}

pub fn save_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_store(BufWriter::new(f), store)
}

pub fn load_store(path: impl AsRef<Path>, expected_dim: usize) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_store(BufReader::new(f), expected_dim)
}

/// L2-normalized mean of the review's in-vocabulary token vectors; the zero
/// vector when no token is known.
pub fn fallback_embed(review: &TokenizedReview, vectors: &KeyedVectors) -> Vec<f32> {
    let dim = vectors.dim();
    let mut sum = vec![0f64; dim];
    let mut n = 0usize;
    for v in review.tokens.iter().filter_map(|t| vectors.get(t)) {
        for (s, &x) in sum.iter_mut().zip(v) {
            *s += x as f64;
        }
        n += 1;
    }
    if n == 0 {
        return vec![0.0; dim];
    }
    let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; dim];
    }
    // the mean's 1/n factor cancels under normalization
    sum.iter().map(|x| (x / norm) as f32).collect()
}

/// Source of the contextual branch input.
pub enum ContextProvider<'a> {
    Store(&'a EmbeddingStore),
    Fallback(&'a KeyedVectors),
}

impl ContextProvider<'_> {
    pub fn kind(&self) -> &'static str {
        match self {
            ContextProvider::Store(_) => "store",
            ContextProvider::Fallback(_) => "fallback",
        }
    }

    /// Vector for a review. A store lookup that misses falls back to the
    /// skip-gram mean when `fallback` is given, else yields `None`.
    pub fn get(
        &self,
        review: &TokenizedReview,
        fallback: Option<&KeyedVectors>,
    ) -> Option<Vec<f32>> {
        match self {
            ContextProvider::Store(store) => store
                .get(review.review_id)
                .map(<[f32]>::to_vec)
                .or_else(|| fallback.map(|kv| fallback_embed(review, kv))),
            ContextProvider::Fallback(kv) => Some(fallback_embed(review, kv)),
        }
    }
}
