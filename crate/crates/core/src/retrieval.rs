//! Query formatting, cosine ranking, and the cached embedding front end.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Segment;
use crate::provider::{EmbeddingProvider, ProviderError, RetryPolicy};
use crate::transcript::Transcript;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RetrievalError {
    #[error("cosine of a zero-norm vector")]
    ZeroNorm,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("embedding is empty")]
    Empty,
    #[error("nothing to embed")]
    NoTexts,
    #[error("embedding provider `{provider}` returned {got} vectors for {expected} texts")]
    CountMismatch {
        provider: String,
        expected: usize,
        got: usize,
    },
    #[error("embedding provider `{provider}`: {source}")]
    Provider {
        provider: String,
        #[source]
        source: ProviderError,
    },
}

/// A finite, non-empty embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, RetrievalError> {
        if values.is_empty() {
            return Err(RetrievalError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, RetrievalError> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = RetrievalError;
    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// `"<title> : <description>"`, or the bare title when there is no description.
pub fn format_topic_query(title: &str, description: Option<&str>) -> String {
    match description.map(str::trim).filter(|d| !d.is_empty()) {
        Some(d) => format!("{title} : {d}"),
        None => title.to_string(),
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dimension() != b.dimension() {
        return Err(RetrievalError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(RetrievalError::ZeroNorm);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSegment {
    pub segment: Segment,
    pub score: f64,
}

/// The `delta` pool segments most similar to `query`, best first; equal
/// scores go to the lower segment id.
pub fn top_delta(
    query: &EmbeddingVector,
    pool: &[(Segment, EmbeddingVector)],
    delta: usize,
) -> Result<Vec<RankedSegment>, RetrievalError> {
    let mut ranked = pool
        .iter()
        .map(|(segment, v)| {
            Ok(RankedSegment {
                segment: segment.clone(),
                score: cosine(query, v)?,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.segment.segment_id.cmp(&b.segment.segment_id))
    });
    ranked.truncate(delta);
    Ok(ranked)
}

type CacheKey = (String, [u8; 32]);

/// Embedding front end: content-addressed cache, retries, and a run-wide
/// dimension check. Shareable across threads.
pub struct Embedder {
    provider: Arc<dyn EmbeddingProvider>,
    retry: RetryPolicy,
    cache: Mutex<HashMap<CacheKey, EmbeddingVector>>,
    dimension: Mutex<Option<usize>>,
    provider_calls: AtomicUsize,
}

impl Embedder {
    pub fn new(provider: Arc<dyn EmbeddingProvider>, retry: RetryPolicy) -> Self {
        Self {
            provider,
            retry,
            cache: Mutex::new(HashMap::new()),
            dimension: Mutex::new(None),
            provider_calls: AtomicUsize::new(0),
        }
    }

    /// Number of requests that reached the provider (retries included).
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::SeqCst)
    }

    fn key(&self, text: &str) -> CacheKey {
        (self.provider.id().to_string(), Sha256::digest(text.as_bytes()).into())
    }

    /// One vector per input text, in input order.
    pub fn embed_texts(
        &self,
        texts: &[String],
        transcript: Option<&Transcript>,
    ) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        if texts.is_empty() {
            return Err(RetrievalError::NoTexts);
        }
        let keys: Vec<CacheKey> = texts.iter().map(|t| self.key(t)).collect();
        let mut missing: Vec<(CacheKey, String)> = Vec::new();
        {
            let cache = self.cache.lock().unwrap();
            for (key, text) in keys.iter().zip(texts) {
                if !cache.contains_key(key) && !missing.iter().any(|(k, _)| k == key) {
                    missing.push((key.clone(), text.clone()));
                }
            }
        }

        if !missing.is_empty() {
            let batch: Vec<String> = missing.iter().map(|(_, t)| t.clone()).collect();
            let provider_id = self.provider.id().to_string();
            let raw = self
                .retry
                .run(|| {
                    self.provider_calls.fetch_add(1, Ordering::SeqCst);
                    self.provider.embed(&batch)
                })
                .map_err(|source| RetrievalError::Provider {
                    provider: provider_id.clone(),
                    source,
                })?;
            if raw.len() != batch.len() {
                return Err(RetrievalError::CountMismatch {
                    provider: provider_id,
                    expected: batch.len(),
                    got: raw.len(),
                });
            }
            let vectors = raw
                .into_iter()
                .map(EmbeddingVector::new)
                .collect::<Result<Vec<_>, _>>()?;
            {
                let mut dim = self.dimension.lock().unwrap();
                for v in &vectors {
                    let expected = *dim.get_or_insert(v.dimension());
                    if v.dimension() != expected {
                        return Err(RetrievalError::DimensionMismatch {
                            left: expected,
                            right: v.dimension(),
                        });
                    }
                }
            }
            let mut cache = self.cache.lock().unwrap();
            for ((key, _), v) in missing.iter().zip(vectors) {
                cache.insert(key.clone(), v);
            }
        }
        if let Some(t) = transcript {
            t.record_embedding(self.provider.id(), texts.len(), missing.len());
        }
        let cache = self.cache.lock().unwrap();
        Ok(keys.iter().map(|k| cache[k].clone()).collect())
    }

    /// Top-`delta` segments of `segments` for `query`.
    pub fn retrieve(
        &self,
        query: &str,
        segments: &[Segment],
        delta: usize,
        transcript: Option<&Transcript>,
    ) -> Result<Vec<RankedSegment>, RetrievalError> {
        if segments.is_empty() {
            return Ok(Vec::new());
        }
        let mut texts = vec![query.to_string()];
        texts.extend(segments.iter().map(|s| s.text.clone()));
        let mut vectors = self.embed_texts(&texts, transcript)?.into_iter();
        let q = vectors.next().expect("query vector");
        let pool: Vec<(Segment, EmbeddingVector)> = segments.iter().cloned().zip(vectors).collect();
        top_delta(&q, &pool, delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::ScriptedEmbeddings;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    fn seg(id: usize) -> Segment {
        Segment {
            segment_id: id,
            paper_id: "p".into(),
            text: format!("segment {id}"),
            sentence_count: 1,
        }
    }

    #[test]
    fn query_format() {
        assert_eq!(
            format_topic_query(
                "text classification",
                Some("classifying documents with weak supervision")
            ),
            "text classification : classifying documents with weak supervision"
        );
        assert_eq!(
            format_topic_query("hall thruster erosion", None),
            "hall thruster erosion"
        );
        assert_eq!(
            format_topic_query("hall thruster erosion", Some("")),
            "hall thruster erosion"
        );
        assert_eq!(format_topic_query("a", Some("b")), "a : b");
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine(&v(&[1.0, 1.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])), Err(RetrievalError::ZeroNorm));
        assert!(matches!(
            cosine(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(RetrievalError::DimensionMismatch { .. })
        ));
        assert_eq!(EmbeddingVector::new(vec![f64::NAN]), Err(RetrievalError::NonFinite));
    }

    #[test]
    fn top_delta_limits_and_orders() {
        let q = v(&[1.0, 0.0]);
        let pool: Vec<_> = (0..6).map(|i| (seg(i), v(&[1.0, i as f64]))).collect();
        let out = top_delta(&q, &pool, 5).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.windows(2).all(|w| w[0].score >= w[1].score));
        let out = top_delta(&q, &pool[..3], 5).unwrap();
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn ties_prefer_lower_segment_id() {
        let q = v(&[1.0, 0.0]);
        let pool = vec![(seg(4), v(&[2.0, 0.0])), (seg(1), v(&[1.0, 0.0]))];
        let out = top_delta(&q, &pool, 2).unwrap();
        assert_eq!(out[0].segment.segment_id, 1);
        assert_eq!(out[1].segment.segment_id, 4);
    }

    #[test]
    fn embed_uses_scripted_vectors_and_cache() {
        let provider = Arc::new(ScriptedEmbeddings::hashing(8).with_vector("x", vec![0.0, 1.0]));
        let embedder = Embedder::new(provider.clone(), RetryPolicy::immediate(0));
        let out = embedder.embed_texts(&["x".into()], None).unwrap();
        assert_eq!(out[0].values(), &[0.0, 1.0]);
        assert_eq!(provider.calls(), 1);
        let again = embedder.embed_texts(&["x".into()], None).unwrap();
        assert_eq!(again, out);
        assert_eq!(provider.calls(), 1, "second call must be served from cache");
    }

    #[test]
    fn repeated_text_in_batch_gets_identical_vectors() {
        let provider = Arc::new(ScriptedEmbeddings::hashing(16));
        let embedder = Embedder::new(provider.clone(), RetryPolicy::immediate(0));
        let out = embedder
            .embed_texts(&["same text".into(), "other".into(), "same text".into()], None)
            .unwrap();
        assert_eq!(out[0], out[2]);
        assert_eq!(provider.texts_embedded(), 2);
    }

    #[test]
    fn empty_batch_rejected() {
        let embedder = Embedder::new(Arc::new(ScriptedEmbeddings::hashing(4)), RetryPolicy::immediate(0));
        assert_eq!(embedder.embed_texts(&[], None), Err(RetrievalError::NoTexts));
    }

    #[test]
    fn provider_failure_carries_diagnostics() {
        let provider = Arc::new(ScriptedEmbeddings::hashing(4).failing("backend down"));
        let embedder = Embedder::new(provider.clone(), RetryPolicy::immediate(2));
        let err = embedder.embed_texts(&["a".into()], None).unwrap_err();
        assert!(err.to_string().contains("backend down"), "{err}");
        assert_eq!(embedder.provider_calls(), 3);
    }
}
