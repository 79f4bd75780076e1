//! Per-query precision, recall and F-beta with macro averages, plus
//! token-overlap F1 for free-text answers.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{ArticleKey, Question};
use crate::error::{Error, Result};
use crate::pipeline::Predictions;
use crate::text::Analyzer;

/// `(precision, recall)` of a predicted set against gold.
///
/// An empty prediction has precision 0; an empty gold set gives recall 0,
/// except that empty-vs-empty scores 1 on both.
pub fn prf<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> (f64, f64) {
    match (predicted.is_empty(), gold.is_empty()) {
        (true, true) => return (1.0, 1.0),
        (true, false) | (false, true) => return (0.0, 0.0),
        _ => {}
    }
    let hit = predicted.intersection(gold).count() as f64;
    (hit / predicted.len() as f64, hit / gold.len() as f64)
}

/// `(1 + b²) p r / (b² p + r)`, 0 when the denominator vanishes.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("beta must be > 0, got {beta}")));
    }
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    Ok(if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub question_id: String,
    pub n_predicted: usize,
    pub n_gold: usize,
    pub n_correct: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_questions: usize,
    pub empty_predictions: usize,
    pub empty_gold: usize,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
    pub per_query: Vec<QueryMetrics>,
}

/// Score `run` against every gold question. Questions missing from the run
/// count as empty predictions; run entries for unknown questions are an
/// error.
pub fn evaluate_run(run: &Predictions, gold: &[Question]) -> Result<EvalReport> {
    let gold_sets: HashMap<&str, BTreeSet<ArticleKey>> = gold
        .iter()
        .map(|q| (q.question_id.as_str(), q.relevant.iter().cloned().collect()))
        .collect();
    if let Some(unknown) = run.keys().find(|id| !gold_sets.contains_key(id.as_str())) {
        return Err(Error::UnknownQuestion(unknown.clone()));
    }

    let empty = BTreeSet::new();
    let mut ids: Vec<&str> = gold_sets.keys().copied().collect();
    ids.sort_unstable();
    let mut per_query = Vec::with_capacity(ids.len());
    for id in ids {
        let g = &gold_sets[id];
        let p = run.get(id).unwrap_or(&empty);
        let (precision, recall) = prf(p, g);
        per_query.push(QueryMetrics {
            question_id: id.to_owned(),
            n_predicted: p.len(),
            n_gold: g.len(),
            n_correct: p.intersection(g).count(),
            precision,
            recall,
            f1: f_beta(precision, recall, 1.0)?,
            f2: f_beta(precision, recall, 2.0)?,
        });
    }

    let n = per_query.len();
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / n as f64
        }
    };
    Ok(EvalReport {
        n_questions: n,
        empty_predictions: per_query.iter().filter(|q| q.n_predicted == 0).count(),
        empty_gold: per_query.iter().filter(|q| q.n_gold == 0).count(),
        macro_avg: MacroMetrics {
            precision: mean(|q| q.precision),
            recall: mean(|q| q.recall),
            f1: mean(|q| q.f1),
            f2: mean(|q| q.f2),
        },
        per_query,
    })
}

impl EvalReport {
    pub fn render_table(&self) -> String {
        let width = self
            .per_query
            .iter()
            .map(|q| q.question_id.chars().count())
            .max()
            .unwrap_or(0)
            .max("question".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>4} {:>4} {:>4}  {:>9} {:>9} {:>9} {:>9}",
            "question", "pred", "gold", "hit", "precision", "recall", "f1", "f2"
        );
        for q in &self.per_query {
            let _ = writeln!(
                out,
                "{:<width$}  {:>4} {:>4} {:>4}  {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                q.question_id,
                q.n_predicted,
                q.n_gold,
                q.n_correct,
                q.precision,
                q.recall,
                q.f1,
                q.f2
            );
        }
        let m = &self.macro_avg;
        let _ = writeln!(
            out,
            "{:<width$}  {:>4} {:>4} {:>4}  {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            "MACRO", "", "", "", m.precision, m.recall, m.f1, m.f2
        );
        let _ = writeln!(
            out,
            "{} questions, {} empty predictions, {} empty gold",
            self.n_questions, self.empty_predictions, self.empty_gold
        );
        out
    }
}

/// Token-overlap F1 between two answer strings, tokenized by `analyzer`
/// (which should not drop stopwords). Both empty scores 1.
pub fn answer_f1(predicted: &str, gold: &str, analyzer: &Analyzer) -> f64 {
    let pred = analyzer.tokens(predicted).into_tokens();
    let gold = analyzer.tokens(gold).into_tokens();
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &pred {
        if let Some(c) = counts.get_mut(t.as_str()).filter(|c| **c > 0) {
            *c -= 1;
            overlap += 1;
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / pred.len() as f64;
    let r = overlap as f64 / gold.len() as f64;
    2.0 * p * r / (p + r)
}
