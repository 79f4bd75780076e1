//! Legal document retrieval toolkit: BM25 candidate retrieval, sliding-window
//! passages, hard-negative training pairs, n-gram perplexity data selection,
//! pluggable pair scoring with an external-process protocol, and F2
//! evaluation.

pub mod bm25;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod lm;
pub mod pipeline;
pub mod segment;
pub mod text;

pub use bm25::{build_index, Bm25Index, Bm25Params, ScoredHit};
pub use dataset::{
    filter_qa, generate_pairs, load_corpus, load_questions, split_dev, Article, ArticleKey, Corpus,
    PairConfig, PreparedCorpus, Question, TrainingPair,
};
pub use error::{Error, Result};
pub use eval::{answer_f1, evaluate_run, f_beta, prf, EvalReport};
pub use lm::{select_indomain, train_lm, LmConfig, NGramLm, SelectionConfig};
pub use pipeline::{
    aggregate_article, run_pipeline, select_relevant, vote, PipelineConfig, RunResult,
    SelectionPolicy,
};
pub use segment::{representative_passage, segment, Passage, SegmentationConfig};
pub use text::{normalize, tokenize, Analyzer, NormalizationConfig, TokenSeq};
