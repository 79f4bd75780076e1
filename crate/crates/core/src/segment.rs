//! Sliding-window passages over tokenized articles.

use serde::{Deserialize, Serialize};

use crate::bm25::{build_index, Bm25Params};
use crate::error::{Error, Result};
use crate::text::TokenSeq;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationConfig {
    /// Passage length in tokens.
    pub window: usize,
    /// Offset between consecutive passage starts, in tokens.
    pub stride: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            window: 200,
            stride: 100,
        }
    }
}

impl SegmentationConfig {
    pub fn new(window: usize, stride: usize) -> Result<Self> {
        let cfg = Self { window, stride };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > self.window {
            return Err(Error::Config(format!(
                "segmentation needs 1 <= stride <= window, got window={} stride={}",
                self.window, self.stride
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub article_id: String,
    pub passage_index: usize,
    pub token_offset: usize,
    pub tokens: TokenSeq,
}

impl Passage {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Source text covered by the passage: from the first token's start to
    /// the last token's end in `article_text` (the text the spans index).
    pub fn text<'a>(&self, article_text: &'a str) -> &'a str {
        match self.tokens.covering_span() {
            Some((s, e)) => &article_text[s..e],
            None => "",
        }
    }
}

/// Passage `i` starts at `i * stride` and holds `min(window, remaining)`
/// tokens; the first passage reaching the end of the article is the last.
pub fn segment(article_id: &str, tokens: &TokenSeq, cfg: SegmentationConfig) -> Vec<Passage> {
    debug_assert!(cfg.validate().is_ok());
    let n = tokens.len();
    let mut out = Vec::new();
    let mut offset = 0;
    while offset < n {
        let end = (offset + cfg.window).min(n);
        out.push(Passage {
            article_id: article_id.to_owned(),
            passage_index: out.len(),
            token_offset: offset,
            tokens: tokens.slice(offset..end),
        });
        if end == n {
            break;
        }
        offset += cfg.stride;
    }
    out
}

/// The passage whose BM25 score against `question` is highest, using an
/// index built over exactly these passages. Ties go to the lowest
/// `passage_index`.
pub fn representative_passage<'p, S: AsRef<str>>(
    question: &[S],
    passages: &'p [Passage],
    params: Bm25Params,
) -> Result<&'p Passage> {
    let scores = passage_scores(question, passages, params)?;
    let best = passages
        .iter()
        .zip(scores)
        .reduce(|best, cur| {
            let better =
                cur.1 > best.1 || (cur.1 == best.1 && cur.0.passage_index < best.0.passage_index);
            if better {
                cur
            } else {
                best
            }
        })
        .expect("nonempty");
    Ok(best.0)
}

/// BM25 score of `question` against each passage, over a mini-index built
/// from the passages themselves.
pub fn passage_scores<S: AsRef<str>>(
    question: &[S],
    passages: &[Passage],
    params: Bm25Params,
) -> Result<Vec<f64>> {
    if passages.is_empty() {
        return Err(Error::Invalid("no passages to choose from".into()));
    }
    let keys: Vec<String> = (0..passages.len()).map(|i| format!("{i:08}")).collect();
    let index = build_index(
        keys.iter()
            .zip(passages)
            .map(|(k, p)| (k.clone(), &p.tokens)),
        params,
    )?;
    keys.iter().map(|k| index.score(question, k)).collect()
}
