//! Loaders for the newline-delimited resource files: stopword lists,
//! compound dictionaries and TAB-separated rewrite maps.
//!
//! Blank lines and lines starting with `#` are skipped everywhere.

use std::path::Path;

use super::normalize::{Anchor, NormalizationConfig, RewriteMap};
use crate::error::{Error, Result};

const STOPWORDS_VI: &str = include_str!("../../data/stopwords_vi.txt");
const COMPOUNDS_VI: &str = include_str!("../../data/compounds_vi.txt");
const ACCENT_MAP: &str = include_str!("../../data/accent_map.tsv");
const ABBREVIATIONS: &str = include_str!("../../data/abbreviations.tsv");

fn read(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::DataFile {
        path: path.to_owned(),
        line: 0,
        message: format!(
            "invalid UTF-8 at byte offset {}",
            e.utf8_error().valid_up_to()
        ),
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

pub fn parse_word_list(text: &str) -> Vec<String> {
    content_lines(text)
        .map(|(_, l)| l.trim().to_owned())
        .collect()
}

pub fn load_word_list(path: &Path) -> Result<Vec<String>> {
    Ok(parse_word_list(&read(path)?))
}

fn parse_map(text: &str, anchor: Anchor, path: &Path) -> Result<RewriteMap> {
    let mut pairs = Vec::new();
    for (line, content) in content_lines(text) {
        let (key, value) = content.split_once('\t').ok_or_else(|| Error::DataFile {
            path: path.to_owned(),
            line,
            message: "expected key<TAB>value".into(),
        })?;
        if key.is_empty() {
            return Err(Error::DataFile {
                path: path.to_owned(),
                line,
                message: "empty key".into(),
            });
        }
        pairs.push((key.to_owned(), value.trim().to_owned()));
    }
    RewriteMap::new(pairs, anchor).map_err(|e| Error::DataFile {
        path: path.to_owned(),
        line: 0,
        message: e.to_string(),
    })
}

pub fn load_accent_map(path: &Path) -> Result<RewriteMap> {
    parse_map(&read(path)?, Anchor::WordEnd, path)
}

pub fn load_abbreviation_map(path: &Path) -> Result<RewriteMap> {
    parse_map(&read(path)?, Anchor::WholeWord, path)
}

/// Resource files shipped with the crate under `data/`.
pub mod bundled {
    use super::*;

    pub fn stopwords() -> Vec<String> {
        parse_word_list(STOPWORDS_VI)
    }

    pub fn compounds() -> Vec<String> {
        parse_word_list(COMPOUNDS_VI)
    }

    pub fn accent_map() -> RewriteMap {
        parse_map(ACCENT_MAP, Anchor::WordEnd, Path::new("accent_map.tsv"))
            .expect("bundled accent map is valid")
    }

    pub fn abbreviation_map() -> RewriteMap {
        parse_map(
            ABBREVIATIONS,
            Anchor::WholeWord,
            Path::new("abbreviations.tsv"),
        )
        .expect("bundled abbreviation map is valid")
    }

    /// Lowercase, punctuation stripping and stopword removal on, with the
    /// bundled Vietnamese tables.
    pub fn vietnamese_config() -> NormalizationConfig {
        NormalizationConfig {
            lowercase: true,
            strip_punctuation: true,
            remove_stopwords: true,
            stopwords: stopwords().into_iter().collect(),
            accent_map: accent_map(),
            abbreviation_map: abbreviation_map(),
            ..NormalizationConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::normalize;

    #[test]
    fn bundled_tables_parse() {
        assert!(!bundled::stopwords().is_empty());
        assert!(bundled::compounds().iter().any(|c| c == "hội đồng xét xử"));
        assert!(bundled::accent_map()
            .entries()
            .any(|(k, v)| k == "oà" && v == "òa"));
        assert!(bundled::abbreviation_map()
            .entries()
            .any(|(k, v)| k == "HĐXX" && v == "hội đồng xét xử"));
    }

    #[test]
    fn bundled_config_handles_table_sentence() {
        let cfg = bundled::vietnamese_config();
        let out = normalize(
            "Nếu bị cáo trốn thì HĐXX tạm đình chỉ vụ án và yêu cầu CQĐT truy nã bị cáo.",
            &cfg,
        );
        assert!(out.contains("hội đồng xét xử"));
        assert!(out.contains("cơ quan điều tra"));
        assert!(!out.contains('.'));
    }

    #[test]
    fn malformed_map_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        std::fs::write(&path, "# header\nok\tfine\nbroken line\n").unwrap();
        let err = load_abbreviation_map(&path).unwrap_err();
        assert!(matches!(err, Error::DataFile { line: 3, .. }), "{err}");
    }

    #[test]
    fn word_list_skips_comments_and_blanks() {
        assert_eq!(parse_word_list("# c\n\na\n b \r\n"), ["a", "b"]);
    }
}
