//! Okapi BM25 over an in-memory inverted index.
//!
//! Scoring uses the non-negative Robertson idf,
//! `ln(1 + (N - df + 0.5) / (df + 0.5))`, and the usual saturation term
//! `tf (k1 + 1) / (tf + k1 (1 - b + b dl / avgdl))`. Query terms are summed
//! with multiplicity.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "legalret-bm25";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 > 0.0) {
            return Err(Error::Config(format!(
                "bm25 k1 must be > 0, got {}",
                self.k1
            )));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!(
                "bm25 b must be in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    /// Sorted ascending; internal doc numbers are positions in this list,
    /// so ascending doc number is ascending doc id.
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    avg_doc_len: f64,
    postings: HashMap<String, Vec<Posting>>,
    lookup: HashMap<String, u32>,
}

/// Build an index from `(doc_id, tokens)` pairs.
pub fn build_index<I, S, T>(docs: I, params: Bm25Params) -> Result<Bm25Index>
where
    I: IntoIterator<Item = (S, T)>,
    S: Into<String>,
    T: AsRef<[String]>,
{
    params.validate()?;
    let mut docs: Vec<(String, T)> = docs.into_iter().map(|(id, t)| (id.into(), t)).collect();
    if docs.is_empty() {
        return Err(Error::EmptyCorpus("cannot index zero documents"));
    }
    docs.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = docs.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateDoc(w[0].0.clone()));
    }

    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_ids = Vec::with_capacity(docs.len());
    let mut doc_lens = Vec::with_capacity(docs.len());
    let mut tf: HashMap<&str, u32> = HashMap::new();
    for (doc, (id, tokens)) in docs.iter().enumerate() {
        let tokens = tokens.as_ref();
        tf.clear();
        for t in tokens {
            *tf.entry(t.as_str()).or_default() += 1;
        }
        for (term, &count) in &tf {
            postings
                .entry((*term).to_owned())
                .or_default()
                .push(Posting {
                    doc: doc as u32,
                    tf: count,
                });
        }
        doc_ids.push(id.clone());
        doc_lens.push(tokens.len() as u32);
    }
    Ok(Bm25Index::assemble(params, doc_ids, doc_lens, postings))
}

impl Bm25Index {
    fn assemble(
        params: Bm25Params,
        doc_ids: Vec<String>,
        doc_lens: Vec<u32>,
        postings: HashMap<String, Vec<Posting>>,
    ) -> Self {
        let total: f64 = doc_lens.iter().map(|&l| l as f64).sum();
        let avg_doc_len = total / doc_lens.len() as f64;
        let lookup = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Self {
            params,
            doc_ids,
            doc_lens,
            avg_doc_len,
            postings,
            lookup,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.lookup.contains_key(doc_id)
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<usize> {
        self.lookup
            .get(doc_id)
            .map(|&d| self.doc_lens[d as usize] as usize)
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.n_docs(), self.doc_freq(term))
    }

    fn term_weight(&self, idf: f64, tf: u32, doc: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let dl = self.doc_lens[doc as usize] as f64;
        // all-empty corpora have avgdl 0; no term can match there anyway
        let ratio = if self.avg_doc_len > 0.0 {
            dl / self.avg_doc_len
        } else {
            1.0
        };
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * ratio))
    }

    fn term_frequency(&self, term: &str, doc: u32) -> Option<u32> {
        let list = self.postings.get(term)?;
        list.binary_search_by_key(&doc, |p| p.doc)
            .ok()
            .map(|i| list[i].tf)
    }

    /// BM25 of `query` against one document.
    pub fn score<S: AsRef<str>>(&self, query: &[S], doc_id: &str) -> Result<f64> {
        let &doc = self
            .lookup
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDoc(doc_id.to_owned()))?;
        let mut total = 0.0;
        for term in query {
            let term = term.as_ref();
            if let Some(tf) = self.term_frequency(term, doc) {
                total += self.term_weight(self.idf(term), tf, doc);
            }
        }
        Ok(total)
    }

    /// Scores for every document with at least one query term, in doc order.
    fn accumulate<S: AsRef<str>>(&self, query: &[S]) -> Vec<(u32, f64)> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in query {
            let term = term.as_ref();
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = idf(self.n_docs(), list.len());
            for p in list {
                *acc.entry(p.doc).or_insert(0.0) += self.term_weight(idf, p.tf, p.doc);
            }
        }
        let mut hits: Vec<(u32, f64)> = acc.into_iter().collect();
        hits.sort_unstable_by_key(|h| h.0);
        hits
    }

    /// Up to `k` hits with positive score, best first; ties go to the
    /// smaller doc id.
    pub fn top_k<S: AsRef<str>>(&self, query: &[S], k: usize) -> Vec<ScoredHit> {
        if k == 0 {
            return Vec::new();
        }
        let mut hits: Vec<(u32, f64)> = self
            .accumulate(query)
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.truncate(k);
        hits.into_iter()
            .map(|(doc, score)| ScoredHit {
                doc_id: self.doc_ids[doc as usize].clone(),
                score,
            })
            .collect()
    }

    /// [`top_k`](Self::top_k) for many queries in parallel; output order
    /// follows input order.
    pub fn top_k_batch<Q, S>(&self, queries: &[Q], k: usize) -> Vec<Vec<ScoredHit>>
    where
        Q: AsRef<[S]> + Sync,
        S: AsRef<str> + Sync,
    {
        queries
            .par_iter()
            .map(|q| self.top_k(q.as_ref(), k))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &self.to_stored())?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let stored: StoredIndex = serde_json::from_reader(BufReader::new(file))?;
        Self::from_stored(stored)
    }

    fn to_stored(&self) -> StoredIndex {
        StoredIndex {
            format: FORMAT_NAME.to_owned(),
            version: FORMAT_VERSION,
            params: self.params,
            docs: self
                .doc_ids
                .iter()
                .zip(&self.doc_lens)
                .map(|(id, &len)| StoredDoc {
                    id: id.clone(),
                    len,
                })
                .collect(),
            terms: self
                .postings
                .iter()
                .map(|(t, list)| (t.clone(), list.iter().map(|p| (p.doc, p.tf)).collect()))
                .collect(),
        }
    }

    fn from_stored(stored: StoredIndex) -> Result<Self> {
        if stored.format != FORMAT_NAME || stored.version != FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported index format {} v{}",
                stored.format, stored.version
            )));
        }
        stored.params.validate()?;
        if stored.docs.is_empty() {
            return Err(Error::EmptyCorpus("stored index has no documents"));
        }
        if stored.docs.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::Invalid(
                "stored doc ids not strictly ascending".into(),
            ));
        }
        let n = stored.docs.len() as u32;
        let mut postings = HashMap::with_capacity(stored.terms.len());
        for (term, list) in stored.terms {
            let ok = list.iter().all(|&(d, tf)| d < n && tf >= 1)
                && list.windows(2).all(|w| w[0].0 < w[1].0);
            if !ok {
                return Err(Error::Invalid(format!(
                    "corrupt postings for term {term:?}"
                )));
            }
            postings.insert(
                term,
                list.into_iter()
                    .map(|(doc, tf)| Posting { doc, tf })
                    .collect(),
            );
        }
        let (doc_ids, doc_lens) = stored.docs.into_iter().map(|d| (d.id, d.len)).unzip();
        Ok(Self::assemble(stored.params, doc_ids, doc_lens, postings))
    }
}

pub fn idf(n_docs: usize, df: usize) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredIndex {
    format: String,
    version: u32,
    params: Bm25Params,
    docs: Vec<StoredDoc>,
    terms: BTreeMap<String, Vec<(u32, u32)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredDoc {
    id: String,
    len: u32,
}

impl AsRef<[String]> for crate::text::TokenSeq {
    fn as_ref(&self) -> &[String] {
        self.tokens()
    }
}
