//! Brute-force reference implementations and synthetic data shared by the
//! integration and acceptance tests. Nothing here calls into the library's
//! scoring code.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// BM25 evaluated straight from the token lists.
pub struct BruteBm25<'a> {
    pub docs: &'a [(String, Vec<String>)],
    pub k1: f64,
    pub b: f64,
}

impl BruteBm25<'_> {
    pub fn score(&self, query: &[String], doc: usize) -> f64 {
        let n = self.docs.len() as f64;
        let avgdl = self.docs.iter().map(|d| d.1.len() as f64).sum::<f64>() / n;
        let tokens = &self.docs[doc].1;
        let dl = tokens.len() as f64;
        let mut total = 0.0;
        for term in query {
            let tf = tokens.iter().filter(|t| *t == term).count();
            if tf == 0 {
                continue;
            }
            let df = self.docs.iter().filter(|d| d.1.contains(term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let tf = tf as f64;
            total +=
                idf * tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * dl / avgdl));
        }
        total
    }

    /// `(doc_id, score)` for every positive-scoring doc, best first, ties by id.
    pub fn ranking(&self, query: &[String], k: usize) -> Vec<(String, f64)> {
        let mut all: Vec<(String, f64)> = (0..self.docs.len())
            .map(|i| (self.docs[i].0.clone(), self.score(query, i)))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }
}

/// Random corpus: up to `max_docs` docs of up to `max_len` tokens drawn
/// from a small vocabulary so terms collide often.
pub fn random_corpus(
    rng: &mut ChaCha8Rng,
    max_docs: usize,
    max_len: usize,
) -> Vec<(String, Vec<String>)> {
    let vocab_size = rng.random_range(3..30);
    let n_docs = rng.random_range(1..=max_docs);
    (0..n_docs)
        .map(|i| {
            let len = rng.random_range(0..=max_len);
            let toks = (0..len)
                .map(|_| format!("w{}", rng.random_range(0..vocab_size)))
                .collect();
            (format!("doc{i:03}"), toks)
        })
        .collect()
}

pub fn random_query(rng: &mut ChaCha8Rng) -> Vec<String> {
    let len = rng.random_range(1..6);
    (0..len)
        .map(|_| format!("w{}", rng.random_range(0..32)))
        .collect()
}

/// Interpolated absolute-discounting n-gram model over string keys.
pub struct BruteLm {
    order: usize,
    discount: f64,
    vocab: HashSet<String>,
    predictable: Vec<String>,
    unigram: HashMap<String, f64>,
    unigram_total: f64,
    ngram: HashMap<(Vec<String>, String), f64>,
    context_total: HashMap<Vec<String>, f64>,
    context_distinct: HashMap<Vec<String>, f64>,
}

impl BruteLm {
    pub fn train(
        sentences: &[Vec<String>],
        order: usize,
        discount: f64,
        unk_threshold: u32,
    ) -> Self {
        let mut freq: HashMap<&String, u32> = HashMap::new();
        for s in sentences {
            for t in s {
                *freq.entry(t).or_default() += 1;
            }
        }
        let specials = ["<s>", "</s>", "<unk>"];
        let mut vocab: HashSet<String> = freq
            .into_iter()
            .filter(|(t, c)| *c >= unk_threshold && !specials.contains(&t.as_str()))
            .map(|(t, _)| t.clone())
            .collect();
        vocab.extend(specials.iter().map(|s| s.to_string()));
        let mut predictable: Vec<String> = vocab.iter().filter(|w| *w != "<s>").cloned().collect();
        predictable.sort();

        let mut lm = BruteLm {
            order,
            discount,
            vocab,
            predictable,
            unigram: HashMap::new(),
            unigram_total: 0.0,
            ngram: HashMap::new(),
            context_total: HashMap::new(),
            context_distinct: HashMap::new(),
        };
        for s in sentences {
            let padded = lm.padded(s);
            for pos in order - 1..padded.len() {
                let w = padded[pos].clone();
                *lm.unigram.entry(w.clone()).or_default() += 1.0;
                lm.unigram_total += 1.0;
                for h in 1..order {
                    let ctx = padded[pos - h..pos].to_vec();
                    let e = lm.ngram.entry((ctx.clone(), w.clone())).or_default();
                    if *e == 0.0 {
                        *lm.context_distinct.entry(ctx.clone()).or_default() += 1.0;
                    }
                    *e += 1.0;
                    *lm.context_total.entry(ctx).or_default() += 1.0;
                }
            }
        }
        lm
    }

    fn map(&self, t: &str) -> String {
        if t != "<s>" && self.vocab.contains(t) {
            t.to_string()
        } else {
            "<unk>".to_string()
        }
    }

    fn padded(&self, s: &[String]) -> Vec<String> {
        let mut out = vec!["<s>".to_string(); self.order - 1];
        out.extend(s.iter().map(|t| self.map(t)));
        out.push("</s>".to_string());
        out
    }

    pub fn predictable(&self) -> &[String] {
        &self.predictable
    }

    pub fn prob(&self, w: &str, ctx: &[String]) -> f64 {
        if ctx.is_empty() {
            let c = self.unigram.get(w).copied().unwrap_or(0.0);
            return (c + 1.0) / (self.unigram_total + self.predictable.len() as f64);
        }
        let lower = self.prob(w, &ctx[1..]);
        let Some(&total) = self.context_total.get(ctx) else {
            return lower;
        };
        let c = self
            .ngram
            .get(&(ctx.to_vec(), w.to_string()))
            .copied()
            .unwrap_or(0.0);
        let distinct = self.context_distinct[ctx];
        (c - self.discount).max(0.0) / total + self.discount * distinct / total * lower
    }

    pub fn ln_perplexity(&self, s: &[String]) -> f64 {
        let padded = self.padded(s);
        let h = self.order - 1;
        let mut sum = 0.0;
        for pos in h..padded.len() {
            sum += self.prob(&padded[pos], &padded[pos - h..pos]).ln();
        }
        -sum / (padded.len() - h) as f64
    }
}

pub fn random_sentences(
    rng: &mut ChaCha8Rng,
    n: usize,
    vocab: &[String],
    max_len: usize,
) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(0..=max_len);
            (0..len)
                .map(|_| vocab.choose(rng).unwrap().clone())
                .collect()
        })
        .collect()
}

/// Sentences from a fixed first-order Markov chain over `vocab`, so word
/// order carries information a bigram/trigram model can learn.
pub fn markov_sentences(
    rng: &mut ChaCha8Rng,
    n: usize,
    vocab: &[String],
    len: std::ops::Range<usize>,
) -> Vec<Vec<String>> {
    let successors: Vec<Vec<usize>> = (0..vocab.len())
        .map(|i| (1..=4).map(|j| (i * 7 + j * 13) % vocab.len()).collect())
        .collect();
    (0..n)
        .map(|_| {
            let l = rng.random_range(len.clone());
            let mut cur = rng.random_range(0..vocab.len());
            let mut s = Vec::with_capacity(l);
            for _ in 0..l {
                s.push(vocab[cur].clone());
                cur = *successors[cur].choose(rng).unwrap();
            }
            s
        })
        .collect()
}

pub fn shuffled(rng: &mut ChaCha8Rng, s: &[String]) -> Vec<String> {
    let mut out = s.to_vec();
    out.shuffle(rng);
    out
}

/// A synthetic legal corpus in the on-disk JSON shapes.
pub struct Synthetic {
    pub corpus: Value,
    pub questions: Value,
    /// (law_id, article_id) per article, in corpus order.
    pub articles: Vec<(String, String)>,
}

fn words(rng: &mut ChaCha8Rng, vocab: usize, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| format!("từ{}", rng.random_range(0..vocab)))
        .collect()
}

/// Every question is a verbatim slice of one article, which is its gold.
/// Some questions additionally cite a second gold article.
pub fn verbatim_corpus(seed: u64, n_laws: usize, per_law: usize, n_questions: usize) -> Synthetic {
    let mut rng = rng(seed);
    let vocab = 400;
    let mut laws = Vec::new();
    let mut articles = Vec::new();
    let mut texts = Vec::new();
    for l in 0..n_laws {
        let law_id = format!("{:02}/2020/QH14", l + 1);
        let mut arts = Vec::new();
        for a in 0..per_law {
            let len = rng.random_range(20..120);
            let text = format!("{}.", words(&mut rng, vocab, len).join(" "));
            let article_id = format!("{}", a + 1);
            arts.push(json!({"id": article_id, "text": text}));
            articles.push((law_id.clone(), article_id));
            texts.push(text);
        }
        laws.push(json!({"id": law_id, "articles": arts}));
    }
    let mut questions = Vec::new();
    for q in 0..n_questions {
        let target = rng.random_range(0..articles.len());
        let toks: Vec<&str> = texts[target].trim_end_matches('.').split(' ').collect();
        let len = rng.random_range(6..12).min(toks.len());
        let start = rng.random_range(0..=toks.len() - len);
        let text = format!("{}?", toks[start..start + len].join(" "));
        let mut relevant =
            vec![json!({"law_id": articles[target].0, "article_id": articles[target].1})];
        if q % 4 == 3 {
            let other = (target + 1 + rng.random_range(0..articles.len() - 1)) % articles.len();
            relevant.push(json!({"law_id": articles[other].0, "article_id": articles[other].1}));
        }
        questions.push(json!({
            "question_id": format!("q{q:04}"),
            "text": text,
            "relevant_articles": relevant,
        }));
    }
    Synthetic {
        corpus: Value::Array(laws),
        questions: Value::Array(questions),
        articles,
    }
}

pub fn write_json(path: &std::path::Path, value: &Value) {
    std::fs::write(path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
}

/// The eight (sentence, perplexity) rows of the in-domain selection example.
pub const SCORED_SAMPLE: [(&str, f64); 8] = [
    ("Chây ì nộp phạt nguội.", 277.18),
    ("Nếu chồng chị muốn theo em thì chị cho đi luôn.", 3383.04),
    ("Trong khi Tư khai không dùng số điện thoại này.", 404.96),
    ("Nếu bị cáo trốn thì HĐXX tạm đình chỉ vụ án và yêu cầu CQĐT truy nã bị cáo.", 35.01),
    ("Bên cạnh đó, Thông tư 64/2017 cũng sửa đổi, bổ sung nội dung liên quan đến giấy đăng ký xe, biển số xe.", 87.62),
    ("Thị trấn biển Italia giao bán nhà với giá 1 USD.", 1322.54),
    ("Hai bên đã ký hợp đồng công chứng.", 99.30),
    ("Ông Kính, bà Liễu, bà Thơm có yêu cầu bồi thường thiệt hại.", 152.27),
];

/// A run with random candidate probabilities (rounded to 1/1000 so ties
/// occur) and `policy` applied.
pub fn random_run(
    rng: &mut ChaCha8Rng,
    n_questions: usize,
    policy: legalret_core::SelectionPolicy,
) -> legalret_core::RunResult {
    use legalret_core::pipeline::{select_relevant, ArticleScore, Provenance, QuestionRun};
    use legalret_core::{ArticleKey, RunResult};
    let questions = (0..n_questions)
        .map(|q| {
            let n = rng.random_range(0..8);
            let mut scored: Vec<(ArticleKey, f64)> = (0..n)
                .map(|a| {
                    let key = ArticleKey::new(format!("L{}", a % 3), format!("{a}"));
                    (key, (rng.random_range(0..=1000) as f64) / 1000.0)
                })
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            QuestionRun {
                question_id: format!("q{q:03}"),
                selected: select_relevant(&scored, policy),
                candidates: scored
                    .into_iter()
                    .map(|(k, p)| ArticleScore {
                        law_id: k.law_id,
                        article_id: k.article_id,
                        probability: p,
                    })
                    .collect(),
            }
        })
        .collect();
    RunResult {
        provenance: Provenance {
            scorer: "random".into(),
            k_retrieve: 8,
            selection: policy,
            segmentation: None,
            voted_from: Vec::new(),
        },
        questions,
    }
}
