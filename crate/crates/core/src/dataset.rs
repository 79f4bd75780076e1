//! Corpus and question ingestion, training-pair generation with BM25 hard
//! negatives, question-level dev split and QA record filtering.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use unicode_normalization::UnicodeNormalization;

use crate::bm25::{build_index, Bm25Index, Bm25Params};
use crate::error::{Error, Result};
use crate::segment::{representative_passage, segment, Passage, SegmentationConfig};
use crate::text::{Analyzed, Analyzer};

const DOC_ID_SEP: char = '\u{1f}';

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArticleKey {
    pub law_id: String,
    pub article_id: String,
}

impl ArticleKey {
    pub fn new(law_id: impl Into<String>, article_id: impl Into<String>) -> Self {
        Self {
            law_id: law_id.into(),
            article_id: article_id.into(),
        }
    }

    /// Index document id. The unit separator sorts below every printable
    /// character, so doc-id order equals `(law_id, article_id)` order.
    pub fn doc_id(&self) -> String {
        format!("{}{DOC_ID_SEP}{}", self.law_id, self.article_id)
    }

    pub fn from_doc_id(doc_id: &str) -> Option<Self> {
        let (law, article) = doc_id.split_once(DOC_ID_SEP)?;
        Some(Self::new(law, article))
    }
}

impl fmt::Display for ArticleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.law_id, self.article_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub law_id: String,
    pub article_id: String,
    pub text: String,
}

impl Article {
    pub fn key(&self) -> ArticleKey {
        ArticleKey::new(&self.law_id, &self.article_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub text: String,
    #[serde(rename = "relevant_articles")]
    pub relevant: Vec<ArticleKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    articles: Vec<Article>,
    lookup: HashMap<ArticleKey, usize>,
}

impl Corpus {
    pub fn new(articles: Vec<Article>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(articles.len());
        for (i, a) in articles.iter().enumerate() {
            if lookup.insert(a.key(), i).is_some() {
                return Err(Error::DuplicateArticle {
                    law_id: a.law_id.clone(),
                    article_id: a.article_id.clone(),
                });
            }
        }
        Ok(Self { articles, lookup })
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn get(&self, key: &ArticleKey) -> Option<&Article> {
        self.lookup.get(key).map(|&i| &self.articles[i])
    }

    pub fn position(&self, key: &ArticleKey) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    pub fn n_laws(&self) -> usize {
        self.articles
            .iter()
            .map(|a| a.law_id.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Every relevant reference must resolve; offenders are listed as
    /// `question_id -> law_id/article_id`.
    pub fn check_questions(&self, questions: &[Question]) -> Result<()> {
        let dangling: Vec<String> = questions
            .iter()
            .flat_map(|q| {
                q.relevant
                    .iter()
                    .filter(|k| !self.lookup.contains_key(k))
                    .map(move |k| format!("{} -> {k}", q.question_id))
            })
            .collect();
        if dangling.is_empty() {
            Ok(())
        } else {
            Err(Error::DanglingReferences(dangling))
        }
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn str_field(record: &Value, index: usize, field: &'static str) -> Result<String> {
    match record.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        // numeric ids show up in some exports
        Some(Value::Number(n)) if field.ends_with("id") => Ok(n.to_string()),
        Some(_) => Err(Error::Record {
            index,
            field,
            message: "expected a string".into(),
        }),
        None => Err(Error::Record {
            index,
            field,
            message: "missing".into(),
        }),
    }
}

fn array_field<'v>(record: &'v Value, index: usize, field: &'static str) -> Result<&'v Vec<Value>> {
    match record.get(field) {
        Some(Value::Array(a)) => Ok(a),
        Some(_) => Err(Error::Record {
            index,
            field,
            message: "expected an array".into(),
        }),
        None => Err(Error::Record {
            index,
            field,
            message: "missing".into(),
        }),
    }
}

fn top_array(value: &Value) -> Result<&Vec<Value>> {
    value
        .as_array()
        .ok_or_else(|| Error::Invalid("expected a top-level JSON array".into()))
}

/// Parse the corpus format: `[{"id": law_id, "articles": [{"id", "text"}]}]`.
/// Record indices in errors count laws; article errors name the law index.
pub fn parse_corpus(value: &Value) -> Result<Corpus> {
    let mut articles = Vec::new();
    for (i, law) in top_array(value)?.iter().enumerate() {
        let law_id = str_field(law, i, "id")?;
        for art in array_field(law, i, "articles")? {
            let article_id = str_field(art, i, "id")?;
            let text = str_field(art, i, "text")?;
            if text.trim().is_empty() {
                return Err(Error::Record {
                    index: i,
                    field: "text",
                    message: format!("article {article_id:?} has empty text"),
                });
            }
            articles.push(Article {
                law_id: law_id.clone(),
                article_id,
                text,
            });
        }
    }
    Corpus::new(articles)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    parse_corpus(&read_json(path)?)
}

pub fn parse_questions(value: &Value) -> Result<Vec<Question>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in top_array(value)?.iter().enumerate() {
        let question_id = str_field(rec, i, "question_id")?;
        if !seen.insert(question_id.clone()) {
            return Err(Error::Record {
                index: i,
                field: "question_id",
                message: format!("duplicate id {question_id:?}"),
            });
        }
        let text = str_field(rec, i, "text")?;
        let mut relevant = Vec::new();
        for r in array_field(rec, i, "relevant_articles")? {
            let key = ArticleKey::new(str_field(r, i, "law_id")?, str_field(r, i, "article_id")?);
            if !relevant.contains(&key) {
                relevant.push(key);
            }
        }
        let answer = match rec.get("answer") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                return Err(Error::Record {
                    index: i,
                    field: "answer",
                    message: "expected a string".into(),
                })
            }
        };
        out.push(Question {
            question_id,
            text,
            relevant,
            answer,
        });
    }
    Ok(out)
}

pub fn load_questions(path: &Path) -> Result<Vec<Question>> {
    parse_questions(&read_json(path)?)
}

/// A corpus after analysis and segmentation, ready for indexing and pair
/// generation.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    corpus: Corpus,
    analyzed: Vec<Analyzed>,
    passages: Vec<Vec<Passage>>,
    seg: SegmentationConfig,
}

impl PreparedCorpus {
    pub fn new(corpus: Corpus, analyzer: &Analyzer, seg: SegmentationConfig) -> Result<Self> {
        seg.validate()?;
        let analyzed: Vec<Analyzed> = corpus
            .articles()
            .par_iter()
            .map(|a| analyzer.analyze(&a.text))
            .collect();
        let passages = corpus
            .articles()
            .par_iter()
            .zip(&analyzed)
            .map(|(a, an)| segment(&a.key().doc_id(), &an.tokens, seg))
            .collect();
        Ok(Self {
            corpus,
            analyzed,
            passages,
            seg,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn segmentation(&self) -> SegmentationConfig {
        self.seg
    }

    pub fn analyzed(&self, position: usize) -> &Analyzed {
        &self.analyzed[position]
    }

    pub fn passages(&self, position: usize) -> &[Passage] {
        &self.passages[position]
    }

    pub fn n_passages(&self) -> usize {
        self.passages.iter().map(Vec::len).sum()
    }

    /// Article-level BM25 index keyed by [`ArticleKey::doc_id`].
    pub fn build_index(&self, params: Bm25Params) -> Result<Bm25Index> {
        build_index(
            self.corpus
                .articles()
                .iter()
                .zip(&self.analyzed)
                .map(|(a, an)| (a.key().doc_id(), &an.tokens)),
            params,
        )
    }

    /// Text of one passage; articles that analyze to nothing fall back to
    /// their normalized (or raw) text as a single passage.
    pub fn passage_text(&self, position: usize, passage_index: usize) -> &str {
        let analyzed = &self.analyzed[position];
        match self.passages[position].get(passage_index) {
            Some(p) => p.text(&analyzed.text),
            None if !analyzed.text.is_empty() => &analyzed.text,
            None => self.corpus.articles[position].text.trim(),
        }
    }

    /// `(passage_index, text)` of the passage best matching `question`.
    pub fn representative(
        &self,
        position: usize,
        question: &[String],
        params: Bm25Params,
    ) -> Result<(usize, &str)> {
        let passages = &self.passages[position];
        if passages.is_empty() {
            return Ok((0, self.passage_text(position, 0)));
        }
        let best = representative_passage(question, passages, params)?;
        Ok((
            best.passage_index,
            self.passage_text(position, best.passage_index),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub question_id: String,
    pub law_id: String,
    pub article_id: String,
    pub passage_index: usize,
    pub passage_text: String,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    /// Articles retrieved per question; the non-gold ones become negatives.
    pub k: usize,
    /// Questions with more analyzed tokens than this are skipped.
    pub max_question_tokens: usize,
    /// Parameters of the per-article passage index.
    #[serde(default)]
    pub passage_bm25: Bm25Params,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            k: 150,
            max_question_tokens: 128,
            passage_bm25: Bm25Params::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub questions: usize,
    pub skipped_long: usize,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pub pairs: Vec<TrainingPair>,
    pub stats: PairStats,
}

/// Label-1 pairs for every gold article and label-0 pairs for the top-`k`
/// retrieved articles outside the gold set. Output is grouped by question
/// in ascending `question_id`; within a question, positives come first in
/// gold order, then negatives in rank order.
pub fn generate_pairs(
    questions: &[Question],
    prepared: &PreparedCorpus,
    index: &Bm25Index,
    analyzer: &Analyzer,
    cfg: &PairConfig,
) -> Result<PairSet> {
    if cfg.k == 0 {
        return Err(Error::Config("pair generation needs k >= 1".into()));
    }
    prepared.corpus().check_questions(questions)?;

    let mut order: Vec<&Question> = questions.iter().collect();
    order.sort_by(|a, b| a.question_id.cmp(&b.question_id));

    let per_question: Vec<Option<Vec<TrainingPair>>> = order
        .par_iter()
        .map(|q| pairs_for_question(q, prepared, index, analyzer, cfg))
        .collect::<Result<_>>()?;

    let mut set = PairSet::default();
    set.stats.questions = questions.len();
    for pairs in per_question {
        match pairs {
            None => set.stats.skipped_long += 1,
            Some(pairs) => {
                for p in pairs {
                    if p.label == 1 {
                        set.stats.positives += 1;
                    } else {
                        set.stats.negatives += 1;
                    }
                    set.pairs.push(p);
                }
            }
        }
    }
    Ok(set)
}

fn pairs_for_question(
    q: &Question,
    prepared: &PreparedCorpus,
    index: &Bm25Index,
    analyzer: &Analyzer,
    cfg: &PairConfig,
) -> Result<Option<Vec<TrainingPair>>> {
    let tokens = analyzer.tokens(&q.text);
    if tokens.len() > cfg.max_question_tokens {
        return Ok(None);
    }
    let gold: HashSet<&ArticleKey> = q.relevant.iter().collect();
    let negatives = index
        .top_k(tokens.tokens(), cfg.k)
        .into_iter()
        .filter_map(|hit| ArticleKey::from_doc_id(&hit.doc_id))
        .filter(|key| !gold.contains(key));

    let labelled = q
        .relevant
        .iter()
        .cloned()
        .map(|k| (k, 1u8))
        .chain(negatives.map(|k| (k, 0u8)));

    let mut out = Vec::new();
    for (key, label) in labelled {
        let position = prepared.corpus().position(&key).ok_or_else(|| {
            Error::DanglingReferences(vec![format!("{} -> {key}", q.question_id)])
        })?;
        let (passage_index, text) =
            prepared.representative(position, tokens.tokens(), cfg.passage_bm25)?;
        out.push(TrainingPair {
            question_id: q.question_id.clone(),
            law_id: key.law_id,
            article_id: key.article_id,
            passage_index,
            passage_text: text.to_owned(),
            label,
        });
    }
    Ok(Some(out))
}

pub fn write_pairs_jsonl<W: Write>(mut w: W, pairs: &[TrainingPair]) -> std::io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_pairs_jsonl(path: &Path) -> Result<Vec<TrainingPair>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: TrainingPair = serde_json::from_str(&line).map_err(|e| Error::DataFile {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if pair.label > 1 {
            return Err(Error::DataFile {
                path: path.to_owned(),
                line: i + 1,
                message: format!("label must be 0 or 1, got {}", pair.label),
            });
        }
        out.push(pair);
    }
    Ok(out)
}

/// Partition question ids into `(train, dev)` with
/// `round(fraction * n)` dev questions (kept within `1..n`), chosen by a
/// seeded shuffle. Both halves come back sorted.
pub fn split_question_ids<S: AsRef<str>>(
    ids: &[S],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "dev fraction must be in (0, 1), got {fraction}"
        )));
    }
    let unique: BTreeSet<&str> = ids.iter().map(AsRef::as_ref).collect();
    let n = unique.len();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 questions to split, got {n}"
        )));
    }
    let mut shuffled: Vec<&str> = unique.into_iter().collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut dev: Vec<String> = shuffled[..n_dev].iter().map(|s| s.to_string()).collect();
    let mut train: Vec<String> = shuffled[n_dev..].iter().map(|s| s.to_string()).collect();
    dev.sort();
    train.sort();
    Ok((train, dev))
}

/// Question-level split of training pairs; pair order is preserved on both
/// sides.
pub fn split_dev(
    pairs: Vec<TrainingPair>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<TrainingPair>, Vec<TrainingPair>)> {
    let ids: Vec<&str> = pairs.iter().map(|p| p.question_id.as_str()).collect();
    let (_, dev) = split_question_ids(&ids, fraction, seed)?;
    let dev: HashSet<String> = dev.into_iter().collect();
    Ok(pairs
        .into_iter()
        .partition(|p| !dev.contains(&p.question_id)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QaFilterStats {
    pub kept: usize,
    pub dropped_missing_answer: usize,
    pub dropped_long_answer: usize,
    pub dropped_article_list: usize,
}

fn article_list_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let item = r"điều\s+\d+[a-zđ]?";
        Regex::new(&format!(r"(?i)^\s*{item}(?:\s*[,;]\s*{item})*\s*\.?\s*$"))
            .expect("valid pattern")
    })
}

/// True for answers that are only a list of article references such as
/// `"Điều 123, Điều 168"`.
pub fn is_article_id_list(answer: &str) -> bool {
    let composed: String = answer.nfc().collect();
    article_list_pattern().is_match(&composed)
}

/// Keep QA records whose answer has at most `max_answer_words`
/// whitespace-separated words and is not a bare article-id list.
pub fn filter_qa(
    records: Vec<Question>,
    max_answer_words: usize,
) -> (Vec<Question>, QaFilterStats) {
    let mut stats = QaFilterStats::default();
    let kept: Vec<Question> = records
        .into_iter()
        .filter(|q| {
            let Some(answer) = q.answer.as_deref().filter(|a| !a.trim().is_empty()) else {
                stats.dropped_missing_answer += 1;
                return false;
            };
            if answer.split_whitespace().count() > max_answer_words {
                stats.dropped_long_answer += 1;
                false
            } else if is_article_id_list(answer) {
                stats.dropped_article_list += 1;
                false
            } else {
                true
            }
        })
        .collect();
    stats.kept = kept.len();
    (kept, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn corpus_counts_articles() {
        let v = json!([
            {"id": "L1", "articles": [{"id": "1", "text": "a"}, {"id": "2", "text": "b"}, {"id": "3", "text": "c"}]},
            {"id": "L2", "articles": [{"id": "1", "text": "a"}, {"id": "2", "text": "b"}, {"id": "3", "text": "c"}]}
        ]);
        let c = parse_corpus(&v).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c.n_laws(), 2);
    }

    #[test]
    fn malformed_record_names_index_and_field() {
        let v = json!([
            {"id": "L1", "articles": []},
            {"id": "L2", "articles": [{"id": "1"}]}
        ]);
        let err = parse_corpus(&v).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Record {
                    index: 1,
                    field: "text",
                    ..
                }
            ),
            "{err}"
        );
        let v = json!([{"question_id": "q", "text": 5, "relevant_articles": []}]);
        let err = parse_questions(&v).unwrap_err();
        assert!(matches!(
            err,
            Error::Record {
                index: 0,
                field: "text",
                ..
            }
        ));
    }

    #[test]
    fn duplicate_article_rejected() {
        let v =
            json!([{"id": "L", "articles": [{"id": "1", "text": "a"}, {"id": "1", "text": "b"}]}]);
        assert!(matches!(
            parse_corpus(&v),
            Err(Error::DuplicateArticle { .. })
        ));
    }

    #[test]
    fn dangling_reference_listed() {
        let corpus =
            parse_corpus(&json!([{"id": "L", "articles": [{"id": "1", "text": "a"}]}])).unwrap();
        let qs = parse_questions(&json!([
            {"question_id": "q1", "text": "x", "relevant_articles": [{"law_id": "L", "article_id": "1"}]},
            {"question_id": "q2", "text": "x", "relevant_articles": [{"law_id": "L", "article_id": "9"}]}
        ]))
        .unwrap();
        match corpus.check_questions(&qs) {
            Err(Error::DanglingReferences(list)) => assert_eq!(list, ["q2 -> L/9"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_question_list_is_fine() {
        assert!(parse_questions(&json!([])).unwrap().is_empty());
    }

    #[test]
    fn doc_id_round_trip_and_order() {
        let a = ArticleKey::new("01/2009/QH12", "10");
        assert_eq!(ArticleKey::from_doc_id(&a.doc_id()), Some(a.clone()));
        let b = ArticleKey::new("01/2009/QH12a", "1");
        assert_eq!(a.cmp(&b), a.doc_id().cmp(&b.doc_id()));
    }

    #[test]
    fn split_sizes() {
        let ids: Vec<String> = (0..10).map(|i| format!("q{i}")).collect();
        let (train, dev) = split_question_ids(&ids, 0.2, 7).unwrap();
        assert_eq!((train.len(), dev.len()), (8, 2));
        assert_eq!(split_question_ids(&ids, 0.2, 7).unwrap().1, dev);
        let ids: Vec<String> = (0..520).map(|i| format!("q{i}")).collect();
        assert_eq!(split_question_ids(&ids, 0.2, 1).unwrap().1.len(), 104);
        assert!(split_question_ids(&["only"], 0.2, 1).is_err());
        assert!(split_question_ids(&ids, 1.0, 1).is_err());
    }

    fn qa(answer: Option<&str>) -> Question {
        Question {
            question_id: "q".into(),
            text: "t".into(),
            relevant: vec![],
            answer: answer.map(str::to_owned),
        }
    }

    #[test]
    fn qa_filter_rules() {
        let long = vec!["từ"; 51].join(" ");
        let fifty = vec!["từ"; 50].join(" ");
        let (kept, stats) = filter_qa(
            vec![
                qa(Some(&long)),
                qa(Some(&fifty)),
                qa(Some("Điều 123, Điều 168")),
                qa(Some("có")),
                qa(None),
            ],
            50,
        );
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[1].answer.as_deref(), Some("có"));
        assert_eq!(
            stats,
            QaFilterStats {
                kept: 2,
                dropped_missing_answer: 1,
                dropped_long_answer: 1,
                dropped_article_list: 1,
            }
        );
    }

    #[test]
    fn article_list_detection_is_conservative() {
        assert!(is_article_id_list("Điều 123, Điều 168"));
        assert!(is_article_id_list("điều 5; ĐIỀU 6."));
        assert!(is_article_id_list("Điều 12a"));
        assert!(!is_article_id_list(
            "Theo Điều 123, người lao động có quyền"
        ));
        assert!(!is_article_id_list("Điều 123 và Điều 168"));
    }
}
