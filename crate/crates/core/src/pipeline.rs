//! End-to-end analysis of one document.

use std::path::Path;

use rayon::prelude::*;

use crate::{
    chiaa_report::{
        generate_findings, CohesionReport, Provenance, SectionReport, SectionThreshold,
        LOW_SLIC_RULE,
    },
    config::{Config, ExtractorMode, ThresholdScope},
    corpus_io::{load_document_with, parse_word_list, Document, InputFormat, LoadOptions, Section},
    doc_metrics::{self, DocumentMetrics, MetricsError},
    error::{Error, Result},
    mln::{build_interlayer, condense, prune, Metagraph, MultilayerNetwork},
    section_layer::{
        build_layer, build_layer_with_threshold, extract_key_entities, section_metrics, Extractor,
        KeyEntitySet, SectionMetrics,
    },
    semantics::{CoherenceScore, EntityEmbedding, SemanticProvider},
    stats,
};

/// Everything produced by [`analyze`]; the report is the user-facing part.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: CohesionReport,
    pub network: MultilayerNetwork,
    /// Metagraph before pruning.
    pub metagraph: Metagraph,
    /// Metagraph after pruning, with the pruning record.
    pub pruned: Metagraph,
    pub section_metrics: Vec<SectionMetrics>,
}

impl Analysis {
    pub fn has_warnings(&self) -> bool {
        !self.report.warnings.is_empty()
    }

    pub fn metrics(&self) -> &DocumentMetrics {
        &self.report.document
    }
}

/// Load a document with the configured input format and cleaning.
pub fn load(path: &Path, config: &Config) -> Result<Document> {
    let format = config.input_format.unwrap_or_else(|| InputFormat::from_path(path));
    let options = LoadOptions { clean: config.clean, ..LoadOptions::default() };
    Ok(load_document_with(path, format, &options)?)
}

/// Resolve the configured extractor, reading the entity list if needed.
pub fn load_extractor(mode: &ExtractorMode) -> Result<Extractor> {
    match mode {
        ExtractorMode::Heuristic => Ok(Extractor::Heuristic),
        ExtractorMode::ExternalList(path) => {
            let content = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("entity list {}: {e}", path.display())))?;
            Ok(Extractor::ExternalList(parse_word_list(&content)))
        }
    }
}

struct Prepared<'a> {
    section: &'a Section,
    entities: KeyEntitySet,
    scores: Vec<CoherenceScore>,
    embeddings: Vec<EntityEmbedding>,
}

enum Stage<'a> {
    Ready(Prepared<'a>),
    Skipped(&'a Section, String),
}

fn prepare<'a>(
    section: &'a Section,
    extractor: &Extractor,
    provider: &dyn SemanticProvider,
) -> Result<Stage<'a>> {
    if section.is_empty() {
        return Ok(Stage::Skipped(section, "empty section".into()));
    }
    let entities = extract_key_entities(section, extractor);
    if entities.is_empty() {
        return Ok(Stage::Skipped(section, "no key-entities".into()));
    }
    let scores = if section.sentence_count() >= 2 {
        provider.score_pairs(section)?
    } else {
        Vec::new()
    };
    let embeddings = provider.embed_entities(section, &entities.entities)?;
    Ok(Stage::Ready(Prepared { section, entities, scores, embeddings }))
}

/// Run the full pipeline on `doc`.
pub fn analyze(doc: &Document, config: &Config, provider: &dyn SemanticProvider) -> Result<Analysis> {
    let extractor = load_extractor(&config.extractor)?;
    let stages: Vec<Stage> = doc
        .sections
        .par_iter()
        .map(|s| prepare(s, &extractor, provider))
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let mut prepared = Vec::new();
    let mut skipped = Vec::new();
    for stage in stages {
        match stage {
            Stage::Ready(p) => {
                if !p.entities.dropped.is_empty() {
                    warnings.push(format!(
                        "section {}: entities not found: {}",
                        p.section.index,
                        p.entities.dropped.join(", ")
                    ));
                }
                prepared.push(p);
            }
            Stage::Skipped(section, reason) => {
                warnings.push(format!("section {} skipped: {reason}", section.index));
                skipped.push(SectionReport::skipped(
                    section.index,
                    section.heading.clone(),
                    section.sentence_count(),
                    reason,
                ));
            }
        }
    }
    if prepared.is_empty() {
        return Err(MetricsError::NoLayers.into());
    }

    let document_fence = match config.threshold_scope {
        ThresholdScope::Section => None,
        ThresholdScope::Document => {
            let all: Vec<f64> = prepared
                .iter()
                .flat_map(|p| p.scores.iter().map(|s| s.score))
                .collect();
            Some(stats::lower_fence(&all).ok())
        }
    };
    let layers = prepared
        .iter()
        .map(|p| match document_fence {
            None => build_layer(p.section, &p.entities, &p.scores),
            Some(fence) => build_layer_with_threshold(p.section, &p.entities, &p.scores, fence),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let embeddings: Vec<Vec<EntityEmbedding>> =
        prepared.iter().map(|p| p.embeddings.clone()).collect();

    let network = build_interlayer(layers, &embeddings)?;
    let metagraph = condense(&network, config.seed)?;
    let (pruned, fences) = prune(&metagraph);

    let metrics: Vec<SectionMetrics> = network.layers.iter().map(section_metrics).collect();
    for m in metrics.iter().filter(|m| !m.slic_defined) {
        warnings.push(format!("section {}: no entity links, SLIC undefined", m.section_index));
    }
    let document = doc_metrics::compute(&network.layers, &metagraph, &pruned)?;
    for t in document.per_layer.iter().filter(|t| t.n < 2) {
        warnings.push(format!("section {}: fewer than two entities, excluded from EPI", t.section_index));
    }
    let findings = generate_findings(&metrics, &network.layers, &document, &pruned, config.filters);

    let mut sections: Vec<SectionReport> = metrics
        .iter()
        .zip(&network.layers)
        .zip(&prepared)
        .map(|((m, l), p)| SectionReport::analyzed(m, l, p.section.heading.clone()))
        .chain(skipped)
        .collect();
    sections.sort_by_key(|s| s.index);
    warnings.sort();
    for w in &warnings {
        log::warn!("{}: {w}", doc.id);
    }

    let provenance = Provenance {
        provider: provider.name().to_string(),
        quartile_method: stats::QUARTILE_METHOD.to_string(),
        log_base: "e".to_string(),
        seed: config.seed,
        threshold_scope: config.threshold_scope.to_string(),
        filters: config.filters,
        low_slic_rule: LOW_SLIC_RULE.to_string(),
        pair_thresholds: network
            .layers
            .iter()
            .filter_map(|l| {
                l.lambda.map(|t| SectionThreshold { section: l.section_index, lambda: t.lambda })
            })
            .collect(),
        intralayer_lambda: fences.intralayer_lambda,
        interlayer_lambda: fences.interlayer_lambda,
    };

    Ok(Analysis {
        report: CohesionReport {
            doc_id: doc.id.clone(),
            provenance,
            sections,
            document,
            findings,
            warnings,
        },
        network,
        metagraph,
        pruned,
        section_metrics: metrics,
    })
}
