//! A scorer process speaking the external pair-scoring protocol. Useful as
//! a reference when writing a real scorer and for testing `run-pipeline`.
//!
//! It prints the handshake line, then answers each request line with one
//! response line in the same order.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use anyhow::{bail, Context, Result};
use clap::Args;
use legalret_core::pipeline::{Handshake, ScoreRequest, ScoreResponse};

#[derive(Args, Debug)]
pub struct MockScorerArgs {
    /// Constant probability for every pair. Without it the score is the
    /// fraction of distinct question words found in the passage.
    #[arg(long)]
    probability: Option<f64>,
    /// `WORD=P`: pairs whose passage contains WORD get P. First match wins.
    #[arg(long = "keyword", value_parser = parse_keyword)]
    keywords: Vec<(String, f64)>,
    /// Write a malformed line instead of the response with this 0-based
    /// position in the stream.
    #[arg(long)]
    malformed_at: Option<usize>,
}

fn parse_keyword(s: &str) -> Result<(String, f64), String> {
    let (word, p) = s.split_once('=').ok_or("expected WORD=P")?;
    let p: f64 = p
        .parse()
        .map_err(|e| format!("bad probability {p:?}: {e}"))?;
    if word.is_empty() || !(0.0..=1.0).contains(&p) {
        return Err(format!("invalid keyword rule {s:?}"));
    }
    Ok((word.to_string(), p))
}

fn overlap(question: &str, passage: &str) -> f64 {
    let words = |s: &str| -> HashSet<String> {
        s.split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect()
    };
    let q = words(question);
    if q.is_empty() {
        return 0.0;
    }
    let p = words(passage);
    q.intersection(&p).count() as f64 / q.len() as f64
}

impl MockScorerArgs {
    fn score(&self, r: &ScoreRequest) -> f64 {
        if let Some((_, p)) = self
            .keywords
            .iter()
            .find(|(w, _)| r.passage_text.contains(w.as_str()))
        {
            return *p;
        }
        self.probability
            .unwrap_or_else(|| overlap(&r.question_text, &r.passage_text))
    }
}

pub fn run(args: &MockScorerArgs) -> Result<()> {
    if let Some(p) = args.probability {
        if !(0.0..=1.0).contains(&p) {
            bail!("--probability must be in [0, 1]");
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer(&mut out, &Handshake::current())?;
    writeln!(out)?;
    out.flush()?;

    for (i, line) in std::io::stdin().lock().lines().enumerate() {
        let line = line.context("reading request")?;
        if line.trim().is_empty() {
            continue;
        }
        let req: ScoreRequest =
            serde_json::from_str(&line).with_context(|| format!("bad request line {}", i + 1))?;
        if args.malformed_at == Some(i) {
            writeln!(out, "{{\"pair_id\": {:?}, \"probability\":", req.pair_id)?;
        } else {
            let resp = ScoreResponse {
                probability: args.score(&req),
                pair_id: req.pair_id,
            };
            serde_json::to_writer(&mut out, &resp)?;
            writeln!(out)?;
        }
        out.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_rules_parse() {
        assert_eq!(
            parse_keyword("phạt=0.9").unwrap(),
            ("phạt".to_string(), 0.9)
        );
        assert!(parse_keyword("phạt").is_err());
        assert!(parse_keyword("x=1.5").is_err());
        assert!(parse_keyword("=0.5").is_err());
    }

    #[test]
    fn overlap_is_fraction_of_question_words() {
        assert_eq!(overlap("Mức phạt?", "mức phạt tiền"), 1.0);
        assert_eq!(overlap("a b", "b c"), 0.5);
        assert_eq!(overlap("", "x"), 0.0);
    }
}
