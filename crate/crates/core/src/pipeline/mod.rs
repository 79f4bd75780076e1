//! Retrieve → segment → score → aggregate → select, plus run voting and
//! submission files.

mod external;
mod scorer;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use external::{ExternalScorer, Handshake, PROTOCOL_NAME, PROTOCOL_VERSION};
pub use scorer::{check_responses, LexicalScorer, ScoreRequest, ScoreResponse, Scorer};

use crate::bm25::Bm25Index;
use crate::dataset::{ArticleKey, PreparedCorpus, Question};
use crate::error::{Error, Result};
use crate::segment::SegmentationConfig;
use crate::text::Analyzer;

/// How relevant articles are picked from scored candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SelectionPolicy {
    /// The single most probable article.
    Top1,
    /// Every article with probability >= tau; the best one if none clears it.
    Threshold(f64),
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionPolicy::Top1 => f.write_str("top1"),
            SelectionPolicy::Threshold(t) => write!(f, "threshold:{t}"),
        }
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "top1" {
            return Ok(SelectionPolicy::Top1);
        }
        let tau = s
            .strip_prefix("threshold:")
            .and_then(|t| t.trim().parse::<f64>().ok())
            .ok_or_else(|| {
                Error::Config(format!(
                    "selection must be `top1` or `threshold:<tau>`, got {s:?}"
                ))
            })?;
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!(
                "threshold tau must be in [0, 1], got {tau}"
            )));
        }
        Ok(SelectionPolicy::Threshold(tau))
    }
}

impl TryFrom<String> for SelectionPolicy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SelectionPolicy> for String {
    fn from(p: SelectionPolicy) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Articles kept by BM25 before passage scoring.
    pub k_retrieve: usize,
    pub selection: SelectionPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k_retrieve: 150,
            selection: SelectionPolicy::Top1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleScore {
    pub law_id: String,
    pub article_id: String,
    pub probability: f64,
}

impl ArticleScore {
    pub fn key(&self) -> ArticleKey {
        ArticleKey::new(&self.law_id, &self.article_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRun {
    pub question_id: String,
    /// Best first; ties by ascending `(law_id, article_id)`.
    pub candidates: Vec<ArticleScore>,
    pub selected: Vec<ArticleKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scorer: String,
    pub k_retrieve: usize,
    pub selection: SelectionPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<SegmentationConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub voted_from: Vec<VoteMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteMember {
    pub scorer: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub provenance: Provenance,
    /// Sorted by `question_id`.
    pub questions: Vec<QuestionRun>,
}

impl RunResult {
    pub fn predictions(&self) -> Predictions {
        self.questions
            .iter()
            .map(|q| (q.question_id.clone(), q.selected.iter().cloned().collect()))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// Predicted relevant articles per question id.
pub type Predictions = BTreeMap<String, BTreeSet<ArticleKey>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionEntry {
    pub question_id: String,
    pub relevant_articles: Vec<ArticleKey>,
}

pub fn submission(run: &RunResult) -> Vec<SubmissionEntry> {
    run.questions
        .iter()
        .map(|q| SubmissionEntry {
            question_id: q.question_id.clone(),
            relevant_articles: q.selected.clone(),
        })
        .collect()
}

pub fn write_submission(path: &Path, run: &RunResult) -> Result<()> {
    write_json(path, &submission(run))
}

/// Reads a submission file. Extra fields are ignored, so a questions file
/// with gold `relevant_articles` reads as the gold run.
pub fn read_submission(path: &Path) -> Result<Predictions> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<SubmissionEntry> = serde_json::from_slice(&bytes)?;
    let mut out = Predictions::new();
    for e in entries {
        if out
            .insert(
                e.question_id.clone(),
                e.relevant_articles.into_iter().collect(),
            )
            .is_some()
        {
            return Err(Error::Invalid(format!(
                "{}: question {:?} listed twice",
                path.display(),
                e.question_id
            )));
        }
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Article score from its passage scores: the maximum.
pub fn aggregate_article(passage_probs: &[f64]) -> Result<f64> {
    passage_probs
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::Invalid("no passage probabilities to aggregate".into()))
}

fn rank(candidates: &mut [(ArticleKey, f64)]) {
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Apply `policy` to scored candidates. Result is sorted by key. An empty
/// candidate list selects nothing.
pub fn select_relevant(
    candidates: &[(ArticleKey, f64)],
    policy: SelectionPolicy,
) -> Vec<ArticleKey> {
    let mut ranked = candidates.to_vec();
    rank(&mut ranked);
    let Some(best) = ranked.first() else {
        return Vec::new();
    };
    let mut chosen: Vec<ArticleKey> = match policy {
        SelectionPolicy::Top1 => vec![best.0.clone()],
        SelectionPolicy::Threshold(tau) => {
            let above: Vec<ArticleKey> = ranked
                .iter()
                .filter(|(_, p)| *p >= tau)
                .map(|(k, _)| k.clone())
                .collect();
            if above.is_empty() {
                vec![best.0.clone()]
            } else {
                above
            }
        }
    };
    chosen.sort();
    chosen
}

/// One question's scoring work: which article each request belongs to.
struct QuestionBatch {
    question_id: String,
    requests: Vec<ScoreRequest>,
    owners: Vec<ArticleKey>,
}

fn build_batch(
    q: &Question,
    prepared: &PreparedCorpus,
    index: &Bm25Index,
    analyzer: &Analyzer,
    k: usize,
) -> Result<QuestionBatch> {
    let tokens = analyzer.tokens(&q.text);
    let mut batch = QuestionBatch {
        question_id: q.question_id.clone(),
        requests: Vec::new(),
        owners: Vec::new(),
    };
    for hit in index.top_k(tokens.tokens(), k) {
        let key = ArticleKey::from_doc_id(&hit.doc_id)
            .ok_or_else(|| Error::UnknownDoc(hit.doc_id.clone()))?;
        let position = prepared
            .corpus()
            .position(&key)
            .ok_or_else(|| Error::UnknownDoc(hit.doc_id.clone()))?;
        let n_passages = prepared.passages(position).len().max(1);
        for passage_index in 0..n_passages {
            batch.requests.push(ScoreRequest {
                pair_id: format!("{}#{}", q.question_id, batch.requests.len()),
                question_text: q.text.clone(),
                passage_text: prepared.passage_text(position, passage_index).to_owned(),
            });
            batch.owners.push(key.clone());
        }
    }
    Ok(batch)
}

/// For each question, in ascending `question_id`: BM25 top-`k_retrieve`
/// articles, every passage of each scored, article score = max passage
/// score, then selection. Batches go to `scorer` one question at a time;
/// request construction runs in parallel.
pub fn run_pipeline(
    questions: &[Question],
    prepared: &PreparedCorpus,
    index: &Bm25Index,
    analyzer: &Analyzer,
    cfg: &PipelineConfig,
    scorer: &mut dyn Scorer,
) -> Result<RunResult> {
    if cfg.k_retrieve == 0 {
        return Err(Error::Config("k_retrieve must be >= 1".into()));
    }
    let mut order: Vec<&Question> = questions.iter().collect();
    order.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    if let Some(w) = order
        .windows(2)
        .find(|w| w[0].question_id == w[1].question_id)
    {
        return Err(Error::Invalid(format!(
            "duplicate question id {:?}",
            w[0].question_id
        )));
    }

    let batches: Vec<QuestionBatch> = order
        .par_iter()
        .map(|q| build_batch(q, prepared, index, analyzer, cfg.k_retrieve))
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(batches.len());
    for batch in batches {
        let responses = scorer.score_batch(&batch.requests)?;
        let responses = check_responses(&batch.requests, responses)?;
        let mut per_article: HashMap<&ArticleKey, Vec<f64>> = HashMap::new();
        for (owner, resp) in batch.owners.iter().zip(&responses) {
            per_article.entry(owner).or_default().push(resp.probability);
        }
        let mut candidates: Vec<(ArticleKey, f64)> = per_article
            .into_iter()
            .map(|(k, probs)| Ok((k.clone(), aggregate_article(&probs)?)))
            .collect::<Result<_>>()?;
        rank(&mut candidates);
        runs.push(QuestionRun {
            question_id: batch.question_id,
            selected: select_relevant(&candidates, cfg.selection),
            candidates: candidates
                .into_iter()
                .map(|(k, p)| ArticleScore {
                    law_id: k.law_id,
                    article_id: k.article_id,
                    probability: p,
                })
                .collect(),
        });
    }
    Ok(RunResult {
        provenance: Provenance {
            scorer: scorer.name(),
            k_retrieve: cfg.k_retrieve,
            selection: cfg.selection,
            segmentation: Some(prepared.segmentation()),
            voted_from: Vec::new(),
        },
        questions: runs,
    })
}

/// Score-level voting: each article's combined probability is the weighted
/// mean of its per-run probabilities, a run that did not score the article
/// contributing 0. `policy` is re-applied to the combined scores.
pub fn vote(runs: &[RunResult], weights: &[f64], policy: SelectionPolicy) -> Result<RunResult> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Invalid("vote needs at least one run".into()))?;
    if weights.len() != runs.len() {
        return Err(Error::Config(format!(
            "{} weights for {} runs",
            weights.len(),
            runs.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Config(
            "vote weights must be finite, >= 0 and not all zero".into(),
        ));
    }
    let ids = |r: &RunResult| -> BTreeSet<String> {
        r.questions.iter().map(|q| q.question_id.clone()).collect()
    };
    let reference = ids(first);
    for (i, r) in runs.iter().enumerate().skip(1) {
        if ids(r) != reference {
            return Err(Error::Invalid(format!(
                "run {i} covers a different question set than run 0"
            )));
        }
    }
    let total_weight: f64 = weights.iter().sum();
    let lookups: Vec<HashMap<&str, &QuestionRun>> = runs
        .iter()
        .map(|r| {
            r.questions
                .iter()
                .map(|q| (q.question_id.as_str(), q))
                .collect()
        })
        .collect();

    let mut questions = Vec::with_capacity(reference.len());
    for qid in &reference {
        let mut combined: BTreeMap<ArticleKey, f64> = BTreeMap::new();
        for (lookup, &w) in lookups.iter().zip(weights) {
            for c in &lookup[qid.as_str()].candidates {
                *combined.entry(c.key()).or_insert(0.0) += w * c.probability;
            }
        }
        let mut candidates: Vec<(ArticleKey, f64)> = combined
            .into_iter()
            .map(|(k, s)| (k, s / total_weight))
            .collect();
        rank(&mut candidates);
        questions.push(QuestionRun {
            question_id: qid.clone(),
            selected: select_relevant(&candidates, policy),
            candidates: candidates
                .into_iter()
                .map(|(k, p)| ArticleScore {
                    law_id: k.law_id,
                    article_id: k.article_id,
                    probability: p,
                })
                .collect(),
        });
    }
    Ok(RunResult {
        provenance: Provenance {
            scorer: "vote".into(),
            k_retrieve: runs
                .iter()
                .map(|r| r.provenance.k_retrieve)
                .max()
                .unwrap_or(0),
            selection: policy,
            segmentation: None,
            voted_from: runs
                .iter()
                .zip(weights)
                .map(|(r, &weight)| VoteMember {
                    scorer: r.provenance.scorer.clone(),
                    weight,
                })
                .collect(),
        },
        questions,
    })
}
