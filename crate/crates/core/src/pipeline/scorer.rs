use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::bm25::{build_index, Bm25Params};
use crate::error::{Error, Result};
use crate::text::Analyzer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub pair_id: String,
    pub question_text: String,
    pub passage_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub pair_id: String,
    pub probability: f64,
}

/// Relevance of (question, passage) pairs as probabilities in `[0, 1]`.
pub trait Scorer: Send {
    fn name(&self) -> String;

    /// One response per request, in request order.
    fn score_batch(&mut self, requests: &[ScoreRequest]) -> Result<Vec<ScoreResponse>>;
}

/// Validate a scorer's output against its batch: same length, same pair ids
/// in the same order, finite probabilities. Probabilities are clamped.
pub fn check_responses(
    requests: &[ScoreRequest],
    mut responses: Vec<ScoreResponse>,
) -> Result<Vec<ScoreResponse>> {
    for (i, req) in requests.iter().enumerate() {
        let Some(resp) = responses.get_mut(i) else {
            return Err(Error::Scorer {
                pair_id: req.pair_id.clone(),
                message: "no response".into(),
            });
        };
        if resp.pair_id != req.pair_id {
            return Err(Error::Scorer {
                pair_id: req.pair_id.clone(),
                message: format!("response carries pair_id {:?}", resp.pair_id),
            });
        }
        if !resp.probability.is_finite() {
            return Err(Error::Scorer {
                pair_id: req.pair_id.clone(),
                message: format!("non-finite probability {}", resp.probability),
            });
        }
        resp.probability = resp.probability.clamp(0.0, 1.0);
    }
    if responses.len() > requests.len() {
        return Err(Error::Protocol(format!(
            "{} responses for {} requests",
            responses.len(),
            requests.len()
        )));
    }
    Ok(responses)
}

pub fn check_unique_ids(requests: &[ScoreRequest]) -> Result<()> {
    let mut seen = HashSet::with_capacity(requests.len());
    for r in requests {
        if !seen.insert(r.pair_id.as_str()) {
            return Err(Error::Scorer {
                pair_id: r.pair_id.clone(),
                message: "duplicate pair_id in batch".into(),
            });
        }
    }
    Ok(())
}

/// BM25 of each question against its passage, over an index of the batch's
/// passages, min–max normalized across the batch. A batch whose scores are
/// all equal maps to 0.5 everywhere.
#[derive(Debug, Clone)]
pub struct LexicalScorer {
    analyzer: Analyzer,
    params: Bm25Params,
}

impl LexicalScorer {
    pub fn new(analyzer: Analyzer, params: Bm25Params) -> Self {
        Self { analyzer, params }
    }

    pub fn raw_scores(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let keys: Vec<String> = (0..requests.len()).map(|i| format!("{i:08}")).collect();
        let passages: Vec<Vec<String>> = requests
            .iter()
            .map(|r| self.analyzer.tokens(&r.passage_text).into_tokens())
            .collect();
        let index = build_index(keys.iter().cloned().zip(passages), self.params)?;
        let mut questions: HashMap<&str, Vec<String>> = HashMap::new();
        requests
            .iter()
            .zip(&keys)
            .map(|(r, key)| {
                let q = questions
                    .entry(r.question_text.as_str())
                    .or_insert_with(|| self.analyzer.tokens(&r.question_text).into_tokens());
                index.score(q, key)
            })
            .collect()
    }
}

impl Scorer for LexicalScorer {
    fn name(&self) -> String {
        "builtin-lexical".into()
    }

    fn score_batch(&mut self, requests: &[ScoreRequest]) -> Result<Vec<ScoreResponse>> {
        check_unique_ids(requests)?;
        let raw = self.raw_scores(requests)?;
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(requests
            .iter()
            .zip(raw)
            .map(|(r, s)| ScoreResponse {
                pair_id: r.pair_id.clone(),
                probability: if hi > lo { (s - lo) / (hi - lo) } else { 0.5 },
            })
            .collect())
    }
}
