//! Per-section layer networks.
//!
//! Key-entities of a section become nodes. Two entities are linked once for
//! every sentence in which both occur, and once for every consecutive
//! sentence pair (one entity in each sentence) whose coherence score is not a
//! low outlier. Edge weights are those co-occurrence counts; SLIC is their
//! coefficient of variation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{
    corpus_io::{parse_word_list, tokenize, Section},
    graph_core::{connected_components, WeightedGraph},
    semantics::{find_phrase, is_stop_word, CoherenceScore},
    stats::{self, OutlierThreshold},
};

const FUNCTION_WORDS: &str = include_str!("../data/function_words.txt");

/// Fraction of ranked candidates kept by the heuristic extractor.
pub const HEURISTIC_KEEP_FRACTION: f64 = 0.3;
/// Corpus filters: sections with fewer sentences or nodes are excluded from
/// corpus statistics.
pub const MIN_SENTENCES: usize = 6;
pub const MIN_NODES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayerError {
    #[error("section {0} has no key-entities")]
    NoEntities(usize),
    #[error("section {section}: expected {expected} coherence scores, got {got}")]
    ScoreCountMismatch {
        section: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extractor {
    /// Frequency × dispersion ranking of noun-like content tokens.
    Heuristic,
    /// Entities supplied by the caller, matched as token subsequences.
    ExternalList(Vec<String>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntitySet {
    /// Sorted, lowercased entity strings.
    pub entities: Vec<String>,
    /// entity → (1-based sentence index, token position) of every occurrence.
    pub occurrences: BTreeMap<String, Vec<(usize, usize)>>,
    /// Externally supplied entities that were not found in the section.
    pub dropped: Vec<String>,
}

impl KeyEntitySet {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    fn from_occurrences(occurrences: BTreeMap<String, Vec<(usize, usize)>>, dropped: Vec<String>) -> Self {
        Self {
            entities: occurrences.keys().cloned().collect(),
            occurrences,
            dropped,
        }
    }
}

fn function_words() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| parse_word_list(FUNCTION_WORDS).into_iter().collect())
}

/// Rough noun-likeness test: rejects stop-words, function words, numbers and
/// tokens with typical adverb/adjective/past-participle suffixes.
pub fn is_noun_like(token: &str) -> bool {
    if token.chars().count() < 2 || !token.chars().any(char::is_alphabetic) {
        return false;
    }
    if is_stop_word(token) || function_words().contains(token) {
        return false;
    }
    let len = token.len();
    let suffix_reject = (len > 4 && token.ends_with("ly"))
        || (len > 4 && token.ends_with("ous"))
        || (len > 4 && token.ends_with("ful"))
        || (len > 5 && (token.ends_with("able") || token.ends_with("ible")))
        || (len > 4 && token.ends_with("ed") && !token.ends_with("eed"))
        || (len > 5 && (token.ends_with("ize") || token.ends_with("ise")) && !token.ends_with("wise"));
    !suffix_reject
}

pub fn extract_key_entities(section: &Section, extractor: &Extractor) -> KeyEntitySet {
    match extractor {
        Extractor::Heuristic => extract_heuristic(section),
        Extractor::ExternalList(list) => extract_external(section, list),
    }
}

fn extract_heuristic(section: &Section) -> KeyEntitySet {
    let mut occurrences: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for s in &section.sentences {
        for (pos, tok) in s.tokens.iter().enumerate() {
            if is_noun_like(tok) {
                occurrences.entry(tok.clone()).or_default().push((s.index, pos));
            }
        }
    }
    if occurrences.is_empty() {
        return KeyEntitySet::default();
    }
    let sentence_count = section.sentences.len().max(1) as f64;
    let mut ranked: Vec<(f64, usize, String)> = occurrences
        .iter()
        .map(|(tok, occ)| {
            let freq = occ.len();
            let spread = occ.iter().map(|(s, _)| s).collect::<BTreeSet<_>>().len();
            (freq as f64 * spread as f64 / sentence_count, freq, tok.clone())
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(b.1.cmp(&a.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    let keep = ((ranked.len() as f64 * HEURISTIC_KEEP_FRACTION).ceil() as usize).max(1);
    let kept: BTreeSet<String> = ranked.into_iter().take(keep).map(|r| r.2).collect();
    occurrences.retain(|k, _| kept.contains(k));
    KeyEntitySet::from_occurrences(occurrences, Vec::new())
}

fn extract_external(section: &Section, list: &[String]) -> KeyEntitySet {
    let mut occurrences: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    let mut dropped = Vec::new();
    for raw in list {
        let phrase = tokenize(raw);
        let key = phrase.join(" ");
        if key.is_empty() || occurrences.contains_key(&key) {
            continue;
        }
        let occ: Vec<(usize, usize)> = section
            .sentences
            .iter()
            .flat_map(|s| find_phrase(&s.tokens, &phrase).into_iter().map(move |p| (s.index, p)))
            .collect();
        if occ.is_empty() {
            log::warn!("section {}: entity {raw:?} not found, dropped", section.index);
            dropped.push(raw.clone());
        } else {
            occurrences.insert(key, occ);
        }
    }
    KeyEntitySet::from_occurrences(occurrences, dropped)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNetwork {
    pub section_index: usize,
    pub sentence_count: usize,
    /// Node labels; node `i` of `graph` is `entities[i]`.
    pub entities: Vec<String>,
    pub graph: WeightedGraph,
    pub scores: Vec<CoherenceScore>,
    /// `None` when the section has a single sentence (no pairs to score).
    pub lambda: Option<OutlierThreshold>,
    /// Pair indices whose score was filtered as a low outlier.
    pub dropped_pairs: Vec<usize>,
}

impl LayerNetwork {
    pub fn node_index(&self, entity: &str) -> Option<usize> {
        self.entities.binary_search_by(|e| e.as_str().cmp(entity)).ok()
    }
}

/// Whether a pair score is a low outlier under `threshold`.
///
/// A score equal to the fence counts as an outlier only when the fence is
/// informative (IQR > 0); with zero spread every score equals the fence and
/// none of them is anomalous.
pub fn is_low_outlier(score: f64, threshold: &OutlierThreshold) -> bool {
    score < threshold.lambda || (score == threshold.lambda && threshold.iqr() > 0.0)
}

/// Build the layer with the fence computed from this section's scores.
pub fn build_layer(
    section: &Section,
    entities: &KeyEntitySet,
    scores: &[CoherenceScore],
) -> Result<LayerNetwork, LayerError> {
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let threshold = stats::lower_fence(&values).ok();
    build_layer_with_threshold(section, entities, scores, threshold)
}

/// Build the layer with an externally computed fence (e.g. document-wide).
pub fn build_layer_with_threshold(
    section: &Section,
    entities: &KeyEntitySet,
    scores: &[CoherenceScore],
    threshold: Option<OutlierThreshold>,
) -> Result<LayerNetwork, LayerError> {
    if entities.is_empty() {
        return Err(LayerError::NoEntities(section.index));
    }
    let expected = section.sentences.len().saturating_sub(1);
    if scores.len() != expected {
        return Err(LayerError::ScoreCountMismatch {
            section: section.index,
            expected,
            got: scores.len(),
        });
    }

    let labels = entities.entities.clone();
    // sentence position (0-based) → node ids present
    let mut present: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); section.sentences.len()];
    for (node, label) in labels.iter().enumerate() {
        for &(sentence, _) in entities.occurrences.get(label).into_iter().flatten() {
            if let Some(set) = sentence.checked_sub(1).and_then(|i| present.get_mut(i)) {
                set.insert(node);
            }
        }
    }

    let mut counts: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for set in &present {
        let nodes: Vec<usize> = set.iter().copied().collect();
        for (i, &a) in nodes.iter().enumerate() {
            for &b in &nodes[i + 1..] {
                *counts.entry((a, b)).or_insert(0) += 1;
            }
        }
    }

    let mut dropped_pairs = Vec::new();
    for score in scores {
        let k = score.pair_index - 1;
        if threshold.as_ref().is_some_and(|t| is_low_outlier(score.score, t)) {
            dropped_pairs.push(score.pair_index);
            continue;
        }
        let (first, second) = (&present[k], &present[k + 1]);
        let mut linked: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &x in first {
            for &y in second {
                if x != y {
                    linked.insert((x.min(y), x.max(y)));
                }
            }
        }
        for key in linked {
            *counts.entry(key).or_insert(0) += 1;
        }
    }

    let mut graph = WeightedGraph::new(labels.len());
    for ((a, b), c) in counts {
        graph
            .set_edge(a, b, f64::from(c))
            .expect("valid co-occurrence edge");
    }

    Ok(LayerNetwork {
        section_index: section.index,
        sentence_count: section.sentences.len(),
        entities: labels,
        graph,
        scores: scores.to_vec(),
        lambda: threshold,
        dropped_pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionMetrics {
    pub section_index: usize,
    /// σ/μ of edge weights; reported as 0 when the layer has no edges.
    pub slic: f64,
    pub slic_defined: bool,
    pub component_count: usize,
    /// μ of edge weights (0 without edges).
    pub average_edge_weight: f64,
    pub node_count: usize,
    pub edge_count: usize,
    pub sentence_count: usize,
}

impl SectionMetrics {
    /// Below the corpus filters (fewer than six sentences or four nodes).
    pub fn below_filter(&self) -> bool {
        self.sentence_count < MIN_SENTENCES || self.node_count < MIN_NODES
    }
}

/// Coefficient of variation of a weight multiset, population form.
pub fn slic(weights: &[f64]) -> Option<f64> {
    let mu = stats::mean(weights)?;
    let sigma = stats::population_std(weights)?;
    Some(sigma / mu)
}

pub fn section_metrics(layer: &LayerNetwork) -> SectionMetrics {
    let weights: Vec<f64> = layer.graph.edges().map(|(_, _, w)| w).collect();
    let value = slic(&weights);
    if value.is_none() {
        log::warn!("section {}: layer has no edges, SLIC undefined", layer.section_index);
    }
    SectionMetrics {
        section_index: layer.section_index,
        slic: value.unwrap_or(0.0),
        slic_defined: value.is_some(),
        component_count: connected_components(&layer.graph).len(),
        average_edge_weight: stats::mean(&weights).unwrap_or(0.0),
        node_count: layer.graph.node_count(),
        edge_count: weights.len(),
        sentence_count: layer.sentence_count,
    }
}
