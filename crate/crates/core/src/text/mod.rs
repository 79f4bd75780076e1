//! Text cleanup and tokenization shared by indexing, segmentation and LM
//! training.

mod normalize;
pub mod resources;
mod tokenize;

use std::collections::HashSet;
use std::sync::Arc;

pub use normalize::{
    is_punctuation, normalize, normalize_bytes, Anchor, NormalizationConfig, RewriteMap,
    UnicodeForm,
};
pub use tokenize::{remove_stopwords, tokenize, CompoundSegmenter, Segmenter, TokenSeq};

/// Normalized text together with its tokens; token spans index into `text`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Analyzed {
    pub text: String,
    pub tokens: TokenSeq,
}

/// normalize → segment → stopword filter, bundled behind one handle.
///
/// Stopwords are filtered at token level so that compounds containing a
/// stopword syllable survive segmentation. Multi-syllable stopword entries
/// are matched against the `_`-joined compound tokens.
#[derive(Clone)]
pub struct Analyzer {
    config: NormalizationConfig,
    segmenter: Arc<dyn Segmenter>,
    token_stopwords: HashSet<String>,
}

impl std::fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Analyzer")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Analyzer {
    pub fn new(config: NormalizationConfig, segmenter: Arc<dyn Segmenter>) -> Self {
        let token_stopwords = config
            .stopwords
            .iter()
            .map(|s| {
                let s = normalize(
                    s,
                    &NormalizationConfig {
                        remove_stopwords: false,
                        ..config.clone()
                    },
                );
                s.split_whitespace().collect::<Vec<_>>().join("_")
            })
            .filter(|s| !s.is_empty())
            .collect();
        Self {
            config,
            segmenter,
            token_stopwords,
        }
    }

    /// Compound entries are passed through the same normalization so they
    /// line up with normalized text.
    pub fn with_compounds<I, S>(config: NormalizationConfig, compounds: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entry_cfg = NormalizationConfig {
            remove_stopwords: false,
            ..config.clone()
        };
        let entries: Vec<String> = compounds
            .into_iter()
            .map(|c| normalize(c.as_ref(), &entry_cfg))
            .collect();
        Self::new(config, Arc::new(CompoundSegmenter::new(entries)))
    }

    /// Whitespace tokenization, no compounds.
    pub fn plain(config: NormalizationConfig) -> Self {
        Self::new(config, Arc::new(CompoundSegmenter::default()))
    }

    /// Bundled Vietnamese tables and compound dictionary.
    pub fn vietnamese() -> Self {
        Self::with_compounds(
            resources::bundled::vietnamese_config(),
            resources::bundled::compounds(),
        )
    }

    pub fn config(&self) -> &NormalizationConfig {
        &self.config
    }

    pub fn analyze(&self, raw: &str) -> Analyzed {
        let cfg = NormalizationConfig {
            remove_stopwords: false,
            ..self.config.clone()
        };
        let text = normalize(raw, &cfg);
        let mut tokens = self.segmenter.segment(&text);
        if self.config.remove_stopwords {
            tokens = remove_stopwords(&tokens, &self.token_stopwords);
        }
        Analyzed { text, tokens }
    }

    pub fn tokens(&self, raw: &str) -> TokenSeq {
        self.analyze(raw).tokens
    }

    /// Same analysis with stopword removal forced off.
    pub fn without_stopwords(&self) -> Analyzer {
        Analyzer {
            config: NormalizationConfig {
                remove_stopwords: false,
                ..self.config.clone()
            },
            segmenter: Arc::clone(&self.segmenter),
            token_stopwords: HashSet::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compound_with_stopword_syllable_survives() {
        let cfg = NormalizationConfig {
            remove_stopwords: true,
            stopwords: ["của".to_string(), "như thế nào".to_string()]
                .into_iter()
                .collect(),
            ..NormalizationConfig::default()
        };
        let analyzer = Analyzer::with_compounds(cfg, ["quyền của người", "như thế nào"]);
        let out = analyzer.analyze("Quyền của người, như thế nào của ai?");
        assert_eq!(out.tokens.tokens(), ["quyền_của_người", "ai"]);
    }

    #[test]
    fn spans_point_into_normalized_text() {
        let analyzer = Analyzer::vietnamese();
        let out = analyzer.analyze("HĐXX tạm đình chỉ vụ án.");
        for (tok, (s, e)) in out.tokens.iter() {
            assert_eq!(out.text[s..e].replace(' ', "_"), tok);
        }
        assert_eq!(out.tokens.tokens()[0], "hội_đồng_xét_xử");
    }

    #[test]
    fn vietnamese_analyzer_drops_stopwords() {
        let analyzer = Analyzer::vietnamese();
        let toks = analyzer.tokens("Bị cáo và luật sư");
        assert_eq!(toks.tokens(), ["bị_cáo", "luật", "sư"]);
        let keep = analyzer.without_stopwords().tokens("Bị cáo và luật sư");
        assert_eq!(keep.tokens(), ["bị_cáo", "và", "luật", "sư"]);
    }
}
