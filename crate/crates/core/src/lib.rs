//! Lexical cohesion analysis for structured documents.
//!
//! A document is modelled as a multilayer network: every section becomes a
//! weighted co-occurrence graph of its key-entities, consecutive sections are
//! linked through entity-similarity edges, and the whole structure is
//! condensed into a concept-level metagraph. Section-level (SLIC) and
//! document-level (ECI, EPI, CCI, ICI) cohesion indices are computed over
//! these structures and turned into localized findings.
//!
//! The main entry point is [`pipeline::analyze`]; the individual stages are
//! exposed through their modules for direct use.

pub mod chiaa_report;
pub mod config;
pub mod corpus_io;
pub mod doc_metrics;
pub mod error;
pub mod eval_harness;
pub mod graph_core;
pub mod mln;
pub mod pipeline;
pub mod section_layer;
pub mod semantics;
pub mod stats;

pub use chiaa_report::{CohesionReport, Finding, FindingKind, ReportFormat};
pub use config::{Config, ProviderChoice, ThresholdScope};
pub use corpus_io::{Document, InputFormat, Section, Sentence};
pub use doc_metrics::DocumentMetrics;
pub use error::{Error, Result};
pub use graph_core::WeightedGraph;
pub use mln::{Metagraph, MultilayerNetwork};
pub use pipeline::{analyze, Analysis};
pub use section_layer::{LayerNetwork, SectionMetrics};
