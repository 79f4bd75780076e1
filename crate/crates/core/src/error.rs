use std::path::PathBuf;

/// Errors produced by the retrieval toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    DataFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(&'static str),

    #[error("duplicate document id {0:?}")]
    DuplicateDoc(String),

    #[error("unknown document id {0:?}")]
    UnknownDoc(String),

    #[error("record {index}: field `{field}`: {message}")]
    Record {
        index: usize,
        field: &'static str,
        message: String,
    },

    #[error("questions reference unknown articles: {}", .0.join(", "))]
    DanglingReferences(Vec<String>),

    #[error("duplicate article {law_id}/{article_id}")]
    DuplicateArticle { law_id: String, article_id: String },

    #[error("unknown question id {0:?}")]
    UnknownQuestion(String),

    #[error("scorer failed on pair {pair_id:?}: {message}")]
    Scorer { pair_id: String, message: String },

    #[error("scorer protocol: {0}")]
    Protocol(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
