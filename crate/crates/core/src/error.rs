use thiserror::Error;

use crate::{
    corpus_io::CorpusError, doc_metrics::MetricsError, eval_harness::HarnessError,
    graph_core::GraphError, mln::MlnError, section_layer::LayerError, semantics::SemanticsError,
    stats::StatsError,
};

/// Pipeline-level error; every variant carries the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus_io: {0}")]
    Corpus(#[from] CorpusError),
    #[error("semantics: {0}")]
    Semantics(#[from] SemanticsError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("graph_core: {0}")]
    Graph(#[from] GraphError),
    #[error("section_layer: {0}")]
    Layer(#[from] LayerError),
    #[error("mln: {0}")]
    Mln(#[from] MlnError),
    #[error("doc_metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("eval_harness: {0}")]
    Harness(#[from] HarnessError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
