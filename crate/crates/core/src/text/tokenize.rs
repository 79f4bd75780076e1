use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Tokens with byte spans into the text they were cut from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    tokens: Vec<String>,
    spans: Vec<(usize, usize)>,
}

impl TokenSeq {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tokens without source positions; spans are synthesized as if the
    /// tokens were joined by single spaces.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seq = Self::new();
        let mut offset = 0;
        for tok in tokens {
            let tok = tok.into();
            let end = offset + tok.len();
            seq.push(tok, (offset, end));
            offset = end + 1;
        }
        seq
    }

    /// Appends a token. Panics on an empty token or a span that does not
    /// start after the previous one.
    pub fn push(&mut self, token: String, span: (usize, usize)) {
        assert!(!token.is_empty(), "empty token");
        assert!(span.0 <= span.1, "inverted span");
        if let Some(&(_, prev_end)) = self.spans.last() {
            assert!(span.0 >= prev_end, "overlapping span");
        }
        self.tokens.push(token);
        self.spans.push(span);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, (usize, usize))> {
        self.tokens
            .iter()
            .map(String::as_str)
            .zip(self.spans.iter().copied())
    }

    pub fn slice(&self, range: Range<usize>) -> TokenSeq {
        TokenSeq {
            tokens: self.tokens[range.clone()].to_vec(),
            spans: self.spans[range].to_vec(),
        }
    }

    /// Byte range in the source text covered by the tokens, if any.
    pub fn covering_span(&self) -> Option<(usize, usize)> {
        Some((self.spans.first()?.0, self.spans.last()?.1))
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

/// Splits normalized text into word tokens.
pub trait Segmenter: Send + Sync {
    fn segment(&self, normalized: &str) -> TokenSeq;
}

/// Whitespace syllable split followed by greedy longest-match joining of
/// multi-syllable dictionary entries. Joined syllables are glued with `_`.
#[derive(Debug, Clone, Default)]
pub struct CompoundSegmenter {
    compounds: HashSet<String>,
    max_syllables: usize,
}

impl CompoundSegmenter {
    /// Entries are whitespace-separated syllables; single-syllable entries are
    /// ignored since they never change the output.
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut compounds = HashSet::new();
        let mut max_syllables = 1;
        for entry in entries {
            let syllables: Vec<&str> = entry.as_ref().split_whitespace().collect();
            if syllables.len() < 2 {
                continue;
            }
            max_syllables = max_syllables.max(syllables.len());
            compounds.insert(syllables.join(" "));
        }
        Self {
            compounds,
            max_syllables,
        }
    }

    pub fn len(&self) -> usize {
        self.compounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compounds.is_empty()
    }
}

impl Segmenter for CompoundSegmenter {
    fn segment(&self, normalized: &str) -> TokenSeq {
        let syllables: Vec<(usize, &str)> = normalized
            .split_whitespace()
            .map(|s| (s.as_ptr() as usize - normalized.as_ptr() as usize, s))
            .collect();
        let mut seq = TokenSeq::new();
        let mut i = 0;
        let mut key = String::new();
        while i < syllables.len() {
            let longest = self.max_syllables.min(syllables.len() - i);
            let mut take = 1;
            for len in (2..=longest).rev() {
                key.clear();
                for (j, (_, s)) in syllables[i..i + len].iter().enumerate() {
                    if j > 0 {
                        key.push(' ');
                    }
                    key.push_str(s);
                }
                if self.compounds.contains(&key) {
                    take = len;
                    break;
                }
            }
            let group = &syllables[i..i + take];
            let token = group.iter().map(|(_, s)| *s).collect::<Vec<_>>().join("_");
            let (start, _) = group[0];
            let (last_start, last) = group[take - 1];
            seq.push(token, (start, last_start + last.len()));
            i += take;
        }
        seq
    }
}

/// Tokenize already-normalized text with a compound dictionary.
pub fn tokenize(normalized: &str, compounds: &CompoundSegmenter) -> TokenSeq {
    compounds.segment(normalized)
}

/// Order-preserving filter dropping every token found in `stopwords`.
pub fn remove_stopwords(seq: &TokenSeq, stopwords: &HashSet<String>) -> TokenSeq {
    if stopwords.is_empty() {
        return seq.clone();
    }
    let mut out = TokenSeq::new();
    for (tok, span) in seq.iter() {
        if !stopwords.contains(tok) {
            out.push(tok.to_owned(), span);
        }
    }
    out
}
