//! The run configuration file. Every section is optional; missing keys take
//! their defaults and unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use legalret_core::dataset::PairConfig;
use legalret_core::lm::{LmConfig, SelectionConfig};
use legalret_core::pipeline::{PipelineConfig, SelectionPolicy};
use legalret_core::text::resources::{self, bundled};
use legalret_core::text::{NormalizationConfig, UnicodeForm};
use legalret_core::{Analyzer, Bm25Params, SegmentationConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub normalization: Normalization,
    pub bm25: Bm25Section,
    pub segmentation: SegmentationSection,
    pub pairs: PairsSection,
    pub lm: LmSection,
    pub selection: SelectionSection,
    pub pipeline: PipelineSection,
    pub qa: QaSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: Paths::default(),
            normalization: Normalization::default(),
            bm25: Bm25Section::default(),
            segmentation: SegmentationSection::default(),
            pairs: PairsSection::default(),
            lm: LmSection::default(),
            selection: SelectionSection::default(),
            pipeline: PipelineSection::default(),
            qa: QaSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub questions: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub compounds: Option<PathBuf>,
    pub accent_map: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub lm: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Normalization {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub remove_stopwords: bool,
    /// `nfc` or `nfkc`.
    pub unicode_form: String,
    /// Fall back to the tables shipped with the library for any resource
    /// path that is not set.
    pub bundled_tables: bool,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            remove_stopwords: true,
            unicode_form: "nfc".into(),
            bundled_tables: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bm25Section {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Section {
    fn default() -> Self {
        let p = Bm25Params::default();
        Self { k1: p.k1, b: p.b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationSection {
    pub window: usize,
    pub stride: usize,
}

impl Default for SegmentationSection {
    fn default() -> Self {
        let s = SegmentationConfig::default();
        Self {
            window: s.window,
            stride: s.stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairsSection {
    pub k: usize,
    pub max_question_tokens: usize,
    pub dev_fraction: f64,
}

impl Default for PairsSection {
    fn default() -> Self {
        let p = PairConfig::default();
        Self {
            k: p.k,
            max_question_tokens: p.max_question_tokens,
            dev_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmSection {
    pub order: usize,
    pub discount: f64,
    pub unk_threshold: u32,
}

impl Default for LmSection {
    fn default() -> Self {
        let c = LmConfig::default();
        Self {
            order: c.order,
            discount: c.discount,
            unk_threshold: c.unk_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub threshold: f64,
    pub min_perplexity: Option<f64>,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            threshold: 200.0,
            min_perplexity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub k_retrieve: usize,
    /// `top1` or `threshold:<tau>`.
    pub selection: String,
    /// External scorer command line; empty means the builtin lexical scorer.
    pub scorer_cmd: Vec<String>,
    pub timeout_secs: u64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            k_retrieve: p.k_retrieve,
            selection: p.selection.to_string(),
            scorer_cmd: Vec::new(),
            timeout_secs: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QaSection {
    pub max_answer_words: usize,
}

impl Default for QaSection {
    fn default() -> Self {
        Self {
            max_answer_words: 50,
        }
    }
}

impl RunConfig {
    /// Parse a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.paths.all_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Check values and that every referenced input path exists.
    pub fn validate(&self) -> Result<()> {
        for (name, p) in self.paths.inputs() {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("paths.{name}: {} does not exist", p.display());
                }
            }
        }
        self.unicode_form()?;
        self.bm25_params()?;
        self.segmentation()?;
        self.lm_config()?;
        self.selection_config()?;
        self.pipeline_config()?;
        if self.pairs.k == 0 {
            bail!("pairs.k must be >= 1");
        }
        if !(self.pairs.dev_fraction > 0.0 && self.pairs.dev_fraction < 1.0) {
            bail!(
                "pairs.dev_fraction must be in (0, 1), got {}",
                self.pairs.dev_fraction
            );
        }
        if self.pipeline.timeout_secs == 0 {
            bail!("pipeline.timeout_secs must be >= 1");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the effective config, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn unicode_form(&self) -> Result<UnicodeForm> {
        match self
            .normalization
            .unicode_form
            .to_ascii_lowercase()
            .as_str()
        {
            "nfc" => Ok(UnicodeForm::Nfc),
            "nfkc" => Ok(UnicodeForm::Nfkc),
            other => bail!("normalization.unicode_form must be nfc or nfkc, got {other:?}"),
        }
    }

    pub fn bm25_params(&self) -> Result<Bm25Params> {
        let p = Bm25Params {
            k1: self.bm25.k1,
            b: self.bm25.b,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn segmentation(&self) -> Result<SegmentationConfig> {
        Ok(SegmentationConfig::new(
            self.segmentation.window,
            self.segmentation.stride,
        )?)
    }

    pub fn pair_config(&self) -> Result<PairConfig> {
        Ok(PairConfig {
            k: self.pairs.k,
            max_question_tokens: self.pairs.max_question_tokens,
            passage_bm25: self.bm25_params()?,
        })
    }

    pub fn lm_config(&self) -> Result<LmConfig> {
        let c = LmConfig {
            order: self.lm.order,
            discount: self.lm.discount,
            unk_threshold: self.lm.unk_threshold,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn selection_config(&self) -> Result<SelectionConfig> {
        let c = SelectionConfig {
            threshold: self.selection.threshold,
            min_perplexity: self.selection.min_perplexity,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn selection_policy(&self) -> Result<SelectionPolicy> {
        Ok(self.pipeline.selection.parse()?)
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        if self.pipeline.k_retrieve == 0 {
            bail!("pipeline.k_retrieve must be >= 1");
        }
        Ok(PipelineConfig {
            k_retrieve: self.pipeline.k_retrieve,
            selection: self.selection_policy()?,
        })
    }

    /// Build the text analyzer from the normalization section and resource
    /// paths.
    pub fn analyzer(&self) -> Result<Analyzer> {
        let n = &self.normalization;
        let p = &self.paths;
        let bundled_on = n.bundled_tables;
        let stopwords = match &p.stopwords {
            Some(path) => resources::load_word_list(path)?,
            None if bundled_on => bundled::stopwords(),
            None => Vec::new(),
        };
        let compounds = match &p.compounds {
            Some(path) => resources::load_word_list(path)?,
            None if bundled_on => bundled::compounds(),
            None => Vec::new(),
        };
        let defaults = NormalizationConfig::default();
        let accent_map = match &p.accent_map {
            Some(path) => resources::load_accent_map(path)?,
            None if bundled_on => bundled::accent_map(),
            None => defaults.accent_map.clone(),
        };
        let abbreviation_map = match &p.abbreviations {
            Some(path) => resources::load_abbreviation_map(path)?,
            None if bundled_on => bundled::abbreviation_map(),
            None => defaults.abbreviation_map.clone(),
        };
        let config = NormalizationConfig {
            lowercase: n.lowercase,
            strip_punctuation: n.strip_punctuation,
            remove_stopwords: n.remove_stopwords,
            stopwords: stopwords.into_iter().collect(),
            accent_map,
            abbreviation_map,
            unicode_form: self.unicode_form()?,
        };
        Ok(Analyzer::with_compounds(config, compounds))
    }
}

impl Paths {
    fn all_mut(&mut self) -> [&mut Option<PathBuf>; 9] {
        [
            &mut self.corpus,
            &mut self.questions,
            &mut self.stopwords,
            &mut self.compounds,
            &mut self.accent_map,
            &mut self.abbreviations,
            &mut self.index,
            &mut self.lm,
            &mut self.out,
        ]
    }

    fn inputs(&self) -> [(&'static str, &Option<PathBuf>); 8] {
        [
            ("corpus", &self.corpus),
            ("questions", &self.questions),
            ("stopwords", &self.stopwords),
            ("compounds", &self.compounds),
            ("accent_map", &self.accent_map),
            ("abbreviations", &self.abbreviations),
            ("index", &self.index),
            ("lm", &self.lm),
        ]
    }

    pub fn require<'a>(value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        match value {
            Some(p) => Ok(p),
            None => bail!("no {name} path: pass --{name} or set paths.{name} in the config"),
        }
    }
}
