//! Analysis configuration shared by the library, CLI and FFI.

use std::{fmt, path::PathBuf, str::FromStr};

use serde::{Deserialize, Serialize};

use crate::{chiaa_report::ReportFormat, corpus_io::InputFormat, error::Error};

/// Environment variable consulted when a remote provider has no endpoint.
pub const ENDPOINT_ENV: &str = "COHESIA_ENDPOINT";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderChoice {
    Surrogate,
    Remote(String),
}

impl ProviderChoice {
    /// Resolve `--provider` / `--endpoint`, falling back to `COHESIA_ENDPOINT`.
    pub fn resolve(name: &str, endpoint: Option<&str>) -> Result<Self, Error> {
        match name {
            "surrogate" => Ok(Self::Surrogate),
            "remote" => endpoint
                .map(str::to_owned)
                .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()))
                .map(Self::Remote)
                .ok_or_else(|| {
                    Error::Config(format!("remote provider needs --endpoint or {ENDPOINT_ENV}"))
                }),
            other => Err(Error::Config(format!("unknown provider {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdScope {
    /// One pair-score fence per section.
    #[default]
    Section,
    /// One fence over all pair scores of the document.
    Document,
}

impl fmt::Display for ThresholdScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Section => "section",
            Self::Document => "document",
        })
    }
}

impl FromStr for ThresholdScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "section" => Ok(Self::Section),
            "document" => Ok(Self::Document),
            other => Err(Error::Config(format!("unknown threshold scope {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorMode {
    Heuristic,
    /// One entity per line; blank lines and `#` comments are ignored.
    ExternalList(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    pub provider: ProviderChoice,
    pub threshold_scope: ThresholdScope,
    pub extractor: ExtractorMode,
    pub seed: u64,
    /// Apply the six-sentence / four-node section filters.
    pub filters: bool,
    pub format: ReportFormat,
    /// `None` infers from the file extension.
    pub input_format: Option<InputFormat>,
    /// Strip headings, captions and equations before segmentation.
    pub clean: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            provider: ProviderChoice::Surrogate,
            threshold_scope: ThresholdScope::Section,
            extractor: ExtractorMode::Heuristic,
            seed: DEFAULT_SEED,
            filters: true,
            format: ReportFormat::Json,
            input_format: None,
            clean: false,
        }
    }
}
