//! Word n-gram language model with interpolated absolute discounting, and
//! perplexity-threshold selection of in-domain sentences.
//!
//! For a context `c` seen in training,
//!
//! ```text
//! p(w | c) = max(count(c, w) - d, 0) / count(c)
//!          + d * |{w : count(c, w) > 0}| / count(c) * p(w | c')
//! ```
//!
//! where `c'` drops the oldest token of `c`. Unseen contexts back off
//! directly to `c'`. The recursion bottoms out at an add-one unigram over the
//! predictable vocabulary (every type except the start sentinel).

use std::collections::{HashMap, VecDeque};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

pub const FORMAT_NAME: &str = "legalret-ngram";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmConfig {
    pub order: usize,
    pub discount: f64,
    /// Training tokens seen fewer times than this become `<unk>`.
    pub unk_threshold: u32,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            order: 3,
            discount: 0.75,
            unk_threshold: 2,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Config("lm order must be >= 1".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::Config(format!(
                "lm discount must be in (0, 1), got {}",
                self.discount
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct ContextStats {
    total: u64,
    followers: HashMap<u32, u64>,
}

#[derive(Debug, Clone)]
pub struct NGramLm {
    config: LmConfig,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    /// Counts of predicted positions (tokens plus `</s>`), indexed by id.
    unigram: Vec<u64>,
    unigram_total: u64,
    contexts: HashMap<Vec<u32>, ContextStats>,
}

/// Train on tokenized sentences.
pub fn train_lm<T: AsRef<[String]>>(sentences: &[T], config: LmConfig) -> Result<NGramLm> {
    config.validate()?;
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus(
            "cannot train a language model on zero sentences",
        ));
    }

    let mut freq: HashMap<&str, u32> = HashMap::new();
    for s in sentences {
        for t in s.as_ref() {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut words: Vec<&str> = freq
        .iter()
        .filter(|&(w, &c)| c >= config.unk_threshold && ![BOS, EOS, UNK].contains(w))
        .map(|(w, _)| *w)
        .collect();
    words.sort_unstable();

    let vocab: Vec<String> = [BOS, EOS, UNK]
        .into_iter()
        .chain(words)
        .map(str::to_owned)
        .collect();
    let ids: HashMap<String, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect();

    let mut lm = NGramLm {
        config,
        unigram: vec![0; vocab.len()],
        unigram_total: 0,
        contexts: HashMap::new(),
        vocab,
        ids,
    };
    for s in sentences {
        let padded = lm.pad(s.as_ref());
        let history = config.order - 1;
        for pos in history..padded.len() {
            let w = padded[pos];
            lm.unigram[w as usize] += 1;
            lm.unigram_total += 1;
            for h in 1..=history {
                let stats = lm
                    .contexts
                    .entry(padded[pos - h..pos].to_vec())
                    .or_default();
                stats.total += 1;
                *stats.followers.entry(w).or_default() += 1;
            }
        }
    }
    Ok(lm)
}

impl NGramLm {
    pub fn config(&self) -> LmConfig {
        self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// All types including the three sentinels.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Types that can be predicted: everything but `<s>`.
    pub fn predictable(&self) -> impl Iterator<Item = &str> + '_ {
        self.vocab[1..].iter().map(String::as_str)
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    fn id(&self, token: &str) -> u32 {
        match self.ids.get(token) {
            Some(&BOS_ID) | None => UNK_ID,
            Some(&id) => id,
        }
    }

    fn pad(&self, tokens: &[String]) -> Vec<u32> {
        let history = self.config.order - 1;
        let mut out = Vec::with_capacity(tokens.len() + history + 1);
        out.extend(std::iter::repeat_n(BOS_ID, history));
        out.extend(tokens.iter().map(|t| self.id(t)));
        out.push(EOS_ID);
        out
    }

    fn prob_ids(&self, w: u32, context: &[u32]) -> f64 {
        if context.is_empty() {
            let v = (self.vocab.len() - 1) as f64;
            return (self.unigram[w as usize] as f64 + 1.0) / (self.unigram_total as f64 + v);
        }
        let lower = self.prob_ids(w, &context[1..]);
        match self.contexts.get(context) {
            None => lower,
            Some(stats) => {
                let d = self.config.discount;
                let total = stats.total as f64;
                let count = stats.followers.get(&w).copied().unwrap_or(0) as f64;
                let distinct = stats.followers.len() as f64;
                (count - d).max(0.0) / total + d * distinct / total * lower
            }
        }
    }

    /// `p(word | context)`; only the last `order - 1` context tokens are used.
    /// Out-of-vocabulary tokens are read as `<unk>`; `<s>` may appear in the
    /// context but is never predicted.
    pub fn prob<S: AsRef<str>>(&self, word: &str, context: &[S]) -> f64 {
        let history = self.config.order - 1;
        let ctx: Vec<u32> = context
            .iter()
            .map(|t| match t.as_ref() {
                BOS => BOS_ID,
                other => self.id(other),
            })
            .collect();
        let start = ctx.len().saturating_sub(history);
        self.prob_ids(self.id(word), &ctx[start..])
    }

    /// Sum of natural-log probabilities over the sentence and its end
    /// sentinel, with the number of scored positions.
    pub fn log_prob<S: AsRef<str>>(&self, sentence: &[S]) -> (f64, usize) {
        let history = self.config.order - 1;
        let mut ids: Vec<u32> = std::iter::repeat_n(BOS_ID, history).collect();
        ids.extend(sentence.iter().map(|t| self.id(t.as_ref())));
        ids.push(EOS_ID);
        let mut total = 0.0;
        for pos in history..ids.len() {
            total += self.prob_ids(ids[pos], &ids[pos - history..pos]).ln();
        }
        (total, ids.len() - history)
    }

    /// `exp(-(1/N) * sum ln p)` over the sentence plus `</s>`.
    pub fn perplexity<S: AsRef<str>>(&self, sentence: &[S]) -> f64 {
        let (lp, n) = self.log_prob(sentence);
        (-lp / n as f64).exp()
    }

    /// Every context seen in training, as token strings.
    pub fn observed_contexts(&self) -> Vec<Vec<&str>> {
        let mut out: Vec<Vec<&str>> = self
            .contexts
            .keys()
            .map(|c| {
                c.iter()
                    .map(|&id| self.vocab[id as usize].as_str())
                    .collect()
            })
            .collect();
        out.sort();
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &self.to_stored())?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let stored: StoredLm = serde_json::from_reader(BufReader::new(file))?;
        Self::from_stored(stored)
    }

    fn to_stored(&self) -> StoredLm {
        let mut contexts: Vec<StoredContext> = self
            .contexts
            .iter()
            .map(|(ctx, stats)| {
                let mut followers: Vec<(u32, u64)> =
                    stats.followers.iter().map(|(&w, &c)| (w, c)).collect();
                followers.sort_unstable();
                StoredContext {
                    context: ctx.clone(),
                    followers,
                }
            })
            .collect();
        contexts.sort_by(|a, b| a.context.cmp(&b.context));
        StoredLm {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            config: self.config,
            vocab: self.vocab.clone(),
            unigram: self.unigram.clone(),
            contexts,
        }
    }

    fn from_stored(stored: StoredLm) -> Result<Self> {
        if stored.format != FORMAT_NAME || stored.version != FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported model format {} v{}",
                stored.format, stored.version
            )));
        }
        stored.config.validate()?;
        let v = stored.vocab.len();
        if v < 3 || stored.vocab[..3] != [BOS, EOS, UNK] || stored.unigram.len() != v {
            return Err(Error::Invalid("corrupt model vocabulary".into()));
        }
        let history = stored.config.order - 1;
        let mut contexts = HashMap::with_capacity(stored.contexts.len());
        for c in stored.contexts {
            let ok = !c.context.is_empty()
                && c.context.len() <= history
                && c.context.iter().all(|&id| (id as usize) < v)
                && c.followers
                    .iter()
                    .all(|&(w, n)| (w as usize) < v && w != BOS_ID && n > 0);
            if !ok {
                return Err(Error::Invalid("corrupt model context".into()));
            }
            let total = c.followers.iter().map(|f| f.1).sum();
            contexts.insert(
                c.context,
                ContextStats {
                    total,
                    followers: c.followers.into_iter().collect(),
                },
            );
        }
        let ids = stored
            .vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Ok(Self {
            config: stored.config,
            unigram_total: stored.unigram.iter().sum(),
            unigram: stored.unigram,
            vocab: stored.vocab,
            ids,
            contexts,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredLm {
    format: String,
    version: u32,
    config: LmConfig,
    vocab: Vec<String>,
    unigram: Vec<u64>,
    contexts: Vec<StoredContext>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredContext {
    context: Vec<u32>,
    followers: Vec<(u32, u64)>,
}

/// Which perplexity scores count as in-domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    /// Keep sentences with perplexity at most this.
    pub threshold: f64,
    /// Optional lower bound, turning the filter into a band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_perplexity: Option<f64>,
}

impl SelectionConfig {
    pub fn keep_below(threshold: f64) -> Result<Self> {
        let cfg = Self {
            threshold,
            min_perplexity: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::Config(format!(
                "selection threshold must be > 0, got {}",
                self.threshold
            )));
        }
        if let Some(min) = self.min_perplexity {
            if !(min >= 0.0 && min <= self.threshold) {
                return Err(Error::Config(format!(
                    "selection band [{min}, {}] is empty",
                    self.threshold
                )));
            }
        }
        Ok(())
    }

    pub fn keeps(&self, perplexity: f64) -> bool {
        perplexity <= self.threshold && self.min_perplexity.is_none_or(|m| perplexity >= m)
    }
}

/// Sentences whose perplexity passes `cfg`, with their scores, in input
/// order. Scoring runs in parallel.
pub fn select_indomain<T>(lm: &NGramLm, sentences: Vec<T>, cfg: &SelectionConfig) -> Vec<(T, f64)>
where
    T: AsRef<[String]> + Send,
{
    sentences
        .into_par_iter()
        .map(|s| {
            let pp = lm.perplexity(s.as_ref());
            (s, pp)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|(_, pp)| cfg.keeps(*pp))
        .collect()
}

/// Apply the selection predicate to already-scored items.
pub fn filter_scored<I, S>(scored: I, cfg: SelectionConfig) -> impl Iterator<Item = (S, f64)>
where
    I: IntoIterator<Item = (S, f64)>,
{
    scored.into_iter().filter(move |(_, pp)| cfg.keeps(*pp))
}

/// Scores a stream of items in fixed-size parallel chunks so only one chunk
/// is resident at a time. Output order matches input order; errors from the
/// source are passed through in place.
pub struct ScoreStream<I, F, T> {
    source: I,
    score: F,
    chunk: usize,
    ready: VecDeque<Result<(T, f64)>>,
    done: bool,
}

impl<I, F, T> ScoreStream<I, F, T>
where
    I: Iterator<Item = Result<T>>,
    F: Fn(&T) -> f64 + Sync,
    T: Send + Sync,
{
    pub fn new(source: I, chunk: usize, score: F) -> Self {
        Self {
            source,
            score,
            chunk: chunk.max(1),
            ready: VecDeque::new(),
            done: false,
        }
    }

    fn refill(&mut self) {
        let mut batch: Vec<Result<T>> = Vec::with_capacity(self.chunk);
        while batch.len() < self.chunk {
            match self.source.next() {
                Some(item) => {
                    let failed = item.is_err();
                    batch.push(item);
                    if failed {
                        break;
                    }
                }
                None => {
                    self.done = true;
                    break;
                }
            }
        }
        let score = &self.score;
        let scored: Vec<Result<(T, f64)>> = batch
            .into_par_iter()
            .map(|item| {
                item.map(|t| {
                    let s = score(&t);
                    (t, s)
                })
            })
            .collect();
        self.ready.extend(scored);
    }
}

impl<I, F, T> Iterator for ScoreStream<I, F, T>
where
    I: Iterator<Item = Result<T>>,
    F: Fn(&T) -> f64 + Sync,
    T: Send + Sync,
{
    type Item = Result<(T, f64)>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.ready.is_empty() && !self.done {
            self.refill();
        }
        self.ready.pop_front()
    }
}
