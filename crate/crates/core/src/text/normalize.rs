use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnicodeForm {
    #[default]
    Nfc,
    Nfkc,
}

impl UnicodeForm {
    pub fn apply(self, text: &str) -> String {
        match self {
            UnicodeForm::Nfc => text.nfc().collect(),
            UnicodeForm::Nfkc => text.nfkc().collect(),
        }
    }
}

/// Where a rewrite key is allowed to match inside a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// The key must cover a whole word.
    WholeWord,
    /// The key must end at the end of a word (it may start mid-word).
    WordEnd,
}

/// A string-to-string rewrite table applied in a single left-to-right pass.
///
/// At each position the longest matching key wins; ties on length go to the
/// lexicographically smaller key, so the table order in the source file never
/// matters.
#[derive(Debug, Clone)]
pub struct RewriteMap {
    entries: Vec<(String, String)>,
    anchor: Anchor,
}

impl RewriteMap {
    pub fn new<I, K, V>(pairs: I, anchor: Anchor) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (key, value) in pairs {
            let key: String = key.into().nfc().collect();
            let value: String = value.into().nfc().collect();
            if key.is_empty() {
                return Err(Error::Config("rewrite map key must be nonempty".into()));
            }
            if key.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "rewrite map key {key:?} contains whitespace"
                )));
            }
            if let Some((_, existing)) = entries.iter().find(|(k, _)| *k == key) {
                if *existing != value {
                    return Err(Error::Config(format!(
                        "rewrite map key {key:?} mapped twice"
                    )));
                }
                continue;
            }
            entries.push((key, value));
        }
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(Self { entries, anchor })
    }

    pub fn empty(anchor: Anchor) -> Self {
        Self {
            entries: Vec::new(),
            anchor,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn apply(&self, text: &str) -> String {
        if self.entries.is_empty() {
            return text.to_owned();
        }
        let mut out = String::with_capacity(text.len());
        let mut pos = 0;
        while pos < text.len() {
            let rest = &text[pos..];
            let starts_word = !text[..pos].chars().next_back().is_some_and(is_word_char);
            let hit = self.entries.iter().find(|(key, _)| {
                rest.starts_with(key.as_str())
                    && (self.anchor == Anchor::WordEnd || starts_word)
                    && !rest[key.len()..].chars().next().is_some_and(is_word_char)
            });
            match hit {
                Some((key, value)) => {
                    out.push_str(value);
                    pos += key.len();
                }
                None => {
                    let ch = rest.chars().next().expect("pos < len");
                    out.push(ch);
                    pos += ch.len_utf8();
                }
            }
        }
        out
    }
}

/// Letters, digits and combining marks form words; everything else separates them.
pub(crate) fn is_word_char(ch: char) -> bool {
    ch.is_alphanumeric()
        || matches!(
            get_general_category(ch),
            GeneralCategory::NonspacingMark
                | GeneralCategory::SpacingMark
                | GeneralCategory::EnclosingMark
        )
}

/// Unicode punctuation (P*) and symbol (S*) categories.
pub fn is_punctuation(ch: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(ch),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

#[derive(Debug, Clone)]
pub struct NormalizationConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub remove_stopwords: bool,
    pub stopwords: HashSet<String>,
    /// Mistyped tone placement → canonical; matched at word ends.
    pub accent_map: RewriteMap,
    /// Abbreviation → full form; matched on whole words, case-sensitively.
    pub abbreviation_map: RewriteMap,
    pub unicode_form: UnicodeForm,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            remove_stopwords: false,
            stopwords: HashSet::new(),
            accent_map: RewriteMap::empty(Anchor::WordEnd),
            abbreviation_map: RewriteMap::empty(Anchor::WholeWord),
            unicode_form: UnicodeForm::Nfc,
        }
    }
}

impl NormalizationConfig {
    /// Flags off, maps empty: only composition and whitespace collapse remain.
    pub fn minimal() -> Self {
        Self {
            lowercase: false,
            strip_punctuation: false,
            ..Self::default()
        }
    }
}

/// Normalize raw text.
///
/// Steps, in order: canonical composition, abbreviation expansion (on the
/// original casing), lowercasing, accent standardization, punctuation
/// stripping, whitespace collapse, stopword removal. Whitespace is always
/// collapsed to single ASCII spaces and trimmed.
pub fn normalize(raw: &str, cfg: &NormalizationConfig) -> String {
    let form = cfg.unicode_form;
    let mut text = form.apply(raw);
    text = cfg.abbreviation_map.apply(&text);
    if cfg.lowercase {
        text = form.apply(&text.to_lowercase());
    }
    text = cfg.accent_map.apply(&text);
    if cfg.strip_punctuation {
        text = text
            .chars()
            .map(|c| if is_punctuation(c) { ' ' } else { c })
            .collect();
    }
    let words = text.split_whitespace();
    if cfg.remove_stopwords && !cfg.stopwords.is_empty() {
        words
            .filter(|w| !cfg.stopwords.contains(*w))
            .collect::<Vec<_>>()
            .join(" ")
    } else {
        words.collect::<Vec<_>>().join(" ")
    }
}

/// [`normalize`] over raw bytes, rejecting invalid UTF-8.
pub fn normalize_bytes(raw: &[u8], cfg: &NormalizationConfig) -> Result<String> {
    let text = std::str::from_utf8(raw).map_err(|e| Error::Decode {
        offset: e.valid_up_to(),
    })?;
    Ok(normalize(text, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accent() -> RewriteMap {
        RewriteMap::new(
            [("oà", "òa"), ("uý", "úy"), ("quý", "quý")],
            Anchor::WordEnd,
        )
        .unwrap()
    }

    fn abbrev() -> RewriteMap {
        RewriteMap::new([("HĐXX", "hội đồng xét xử")], Anchor::WholeWord).unwrap()
    }

    #[test]
    fn accent_is_standardized() {
        let cfg = NormalizationConfig {
            accent_map: accent(),
            ..NormalizationConfig::minimal()
        };
        assert_eq!(normalize("oà", &cfg), "òa");
        assert_eq!(normalize("hoà giải", &cfg), "hòa giải");
        // tone already on the right vowel when a consonant follows
        assert_eq!(normalize("hoàn toàn", &cfg), "hoàn toàn");
        assert_eq!(normalize("tuý quý", &cfg), "túy quý");
    }

    #[test]
    fn decomposed_input_is_composed_before_mapping() {
        let cfg = NormalizationConfig {
            accent_map: accent(),
            ..NormalizationConfig::minimal()
        };
        assert_eq!(normalize("o\u{0061}\u{0300}", &cfg), "òa");
    }

    #[test]
    fn abbreviation_is_expanded() {
        let cfg = NormalizationConfig {
            abbreviation_map: abbrev(),
            ..NormalizationConfig::minimal()
        };
        assert_eq!(normalize("HĐXX", &cfg), "hội đồng xét xử");
        assert_eq!(normalize("thì HĐXX tạm", &cfg), "thì hội đồng xét xử tạm");
        // whole words only
        assert_eq!(normalize("HĐXXY", &cfg), "HĐXXY");
    }

    #[test]
    fn abbreviation_matches_before_lowercasing() {
        let cfg = NormalizationConfig {
            abbreviation_map: abbrev(),
            ..NormalizationConfig::default()
        };
        assert_eq!(normalize("HĐXX, tạm", &cfg), "hội đồng xét xử tạm");
    }

    #[test]
    fn empty_input() {
        assert_eq!(normalize("", &NormalizationConfig::default()), "");
    }

    #[test]
    fn all_flags_with_empty_stopwords() {
        let cfg = NormalizationConfig {
            remove_stopwords: true,
            ..NormalizationConfig::default()
        };
        assert_eq!(normalize("Chây ì NỘP PHẠT.", &cfg), "chây ì nộp phạt");
    }

    #[test]
    fn stopwords_removed_only_when_flagged() {
        let mut cfg = NormalizationConfig {
            stopwords: ["và".to_string()].into_iter().collect(),
            ..NormalizationConfig::default()
        };
        assert_eq!(normalize("a và b", &cfg), "a và b");
        cfg.remove_stopwords = true;
        assert_eq!(normalize("a và b", &cfg), "a b");
    }

    #[test]
    fn symbols_become_separators() {
        let cfg = NormalizationConfig::default();
        assert_eq!(normalize("64/2017 + 1$", &cfg), "64 2017 1");
    }

    #[test]
    fn invalid_utf8_reports_offset() {
        let err = normalize_bytes(b"abc\xffdef", &NormalizationConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Decode { offset: 3 }));
    }

    #[test]
    fn rewrite_map_rejects_bad_keys() {
        assert!(RewriteMap::new([("", "x")], Anchor::WholeWord).is_err());
        assert!(RewriteMap::new([("a b", "x")], Anchor::WholeWord).is_err());
        assert!(RewriteMap::new([("a", "x"), ("a", "y")], Anchor::WholeWord).is_err());
    }

    #[test]
    fn longest_key_wins() {
        let map =
            RewriteMap::new([("ab", "1"), ("b", "2"), ("xab", "3")], Anchor::WordEnd).unwrap();
        assert_eq!(map.apply("xab"), "3");
        assert_eq!(map.apply("zab"), "z1");
    }
}
