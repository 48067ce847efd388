//! Document-level cohesion indices.
//!
//! * ECI — RMS deviation of per-layer weighted clustering from 1.
//! * EPI — RMS deviation of per-layer average path length from `ln(n)`.
//! * CCI — fraction of metagraph K4 cliques lost to pruning.
//! * ICI — fraction of metanodes with no surviving intralayer metaedge.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{
    graph_core::{average_path_length, count_k4, weighted_clustering},
    mln::Metagraph,
    section_layer::LayerNetwork,
};

pub const NO_K4_BASELINE: &str = "no-k4-baseline";
pub const SINGLE_CONCEPT_LAYER: &str = "single-concept-layer";
pub const LAYER_TOO_SMALL: &str = "layer-too-small";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no layers to aggregate")]
    NoLayers,
    #[error("every layer has fewer than two nodes")]
    LayerTooSmall,
    #[error("metagraph has no metanodes")]
    NoMetanodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTerms {
    pub section_index: usize,
    pub wcc: f64,
    pub apl: f64,
    pub n: usize,
    /// `ln(n) - apl`; negative when paths are longer than small-world.
    pub deviation: f64,
    pub isolated: usize,
    pub metanodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMetrics {
    pub eci: f64,
    pub epi: f64,
    pub cci: f64,
    pub ici: f64,
    pub k4_before: u64,
    pub k4_after: u64,
    pub per_layer: Vec<LayerTerms>,
    /// Sorted, de-duplicated markers such as `no-k4-baseline` or
    /// `single-concept-layer:3`.
    pub annotations: Vec<String>,
}

/// ECI from raw per-layer clustering coefficients.
pub fn eci_from_wcc(wcc: &[f64]) -> Result<f64, MetricsError> {
    if wcc.is_empty() {
        return Err(MetricsError::NoLayers);
    }
    let sum: f64 = wcc.iter().map(|w| (1.0 - w).powi(2)).sum();
    Ok((sum / wcc.len() as f64).sqrt())
}

/// EPI from raw `(n, apl)` pairs; pairs with `n < 2` must already be removed.
pub fn epi_from_layers(terms: &[(usize, f64)]) -> Result<f64, MetricsError> {
    if terms.is_empty() {
        return Err(MetricsError::LayerTooSmall);
    }
    let sum: f64 = terms
        .iter()
        .map(|&(n, apl)| ((n as f64).ln() - apl).powi(2))
        .sum();
    Ok((sum / terms.len() as f64).sqrt())
}

pub fn compute_eci(layers: &[LayerNetwork]) -> Result<f64, MetricsError> {
    let wcc: Vec<f64> = layers.iter().map(|l| weighted_clustering(&l.graph)).collect();
    eci_from_wcc(&wcc)
}

/// EPI over layers with at least two nodes; smaller layers are skipped with
/// a warning and do not count towards `N`.
pub fn compute_epi(layers: &[LayerNetwork]) -> Result<f64, MetricsError> {
    if layers.is_empty() {
        return Err(MetricsError::NoLayers);
    }
    let terms: Vec<(usize, f64)> = layers
        .iter()
        .filter_map(|l| match average_path_length(&l.graph) {
            Ok(apl) => Some((l.graph.node_count(), apl)),
            Err(_) => {
                log::warn!(
                    "section {}: fewer than two entities, excluded from EPI",
                    l.section_index
                );
                None
            }
        })
        .collect();
    epi_from_layers(&terms)
}

/// `(cci, k4_before, k4_after)`; CCI is 0 when there is no K4 to lose.
pub fn compute_cci(before: &Metagraph, after: &Metagraph) -> (f64, u64, u64) {
    let k4_before = count_k4(&before.flatten());
    let k4_after = count_k4(&after.flatten());
    let cci = if k4_before == 0 {
        0.0
    } else {
        1.0 - k4_after as f64 / k4_before as f64
    };
    (cci, k4_before, k4_after)
}

/// Per-layer `(section index, isolated, total)` metanode counts.
pub fn isolated_counts(meta: &Metagraph) -> Vec<(usize, usize, usize)> {
    let linked: BTreeSet<(usize, usize)> = meta
        .intralayer_metaedges
        .iter()
        .flat_map(|e| [(e.layer, e.r), (e.layer, e.s)])
        .collect();
    meta.metanodes
        .iter()
        .map(|l| {
            let isolated = l
                .concepts
                .iter()
                .filter(|c| !linked.contains(&(l.layer, c.community)))
                .count();
            (l.layer, isolated, l.concepts.len())
        })
        .collect()
}

pub fn compute_ici(meta: &Metagraph) -> Result<f64, MetricsError> {
    let counts = isolated_counts(meta);
    let total: usize = counts.iter().map(|c| c.2).sum();
    if total == 0 {
        return Err(MetricsError::NoMetanodes);
    }
    let isolated: usize = counts.iter().map(|c| c.1).sum();
    Ok(isolated as f64 / total as f64)
}

/// All four indices plus per-layer terms. `pruned` must be the result of
/// pruning `unpruned`.
pub fn compute(
    layers: &[LayerNetwork],
    unpruned: &Metagraph,
    pruned: &Metagraph,
) -> Result<DocumentMetrics, MetricsError> {
    let eci = compute_eci(layers)?;
    let epi = compute_epi(layers)?;
    let (cci, k4_before, k4_after) = compute_cci(unpruned, pruned);
    let ici = compute_ici(pruned)?;

    let mut annotations = BTreeSet::new();
    if k4_before == 0 {
        annotations.insert(NO_K4_BASELINE.to_string());
    }
    let isolation = isolated_counts(pruned);
    let per_layer = layers
        .iter()
        .map(|l| {
            let n = l.graph.node_count();
            let apl = average_path_length(&l.graph).unwrap_or(0.0);
            let (isolated, metanodes) = isolation
                .iter()
                .find(|c| c.0 == l.section_index)
                .map_or((0, 0), |c| (c.1, c.2));
            if n < 2 {
                annotations.insert(format!("{LAYER_TOO_SMALL}:{}", l.section_index));
            }
            if metanodes == 1 {
                annotations.insert(format!("{SINGLE_CONCEPT_LAYER}:{}", l.section_index));
            }
            LayerTerms {
                section_index: l.section_index,
                wcc: weighted_clustering(&l.graph),
                apl,
                n,
                deviation: if n < 2 { 0.0 } else { (n as f64).ln() - apl },
                isolated,
                metanodes,
            }
        })
        .collect();

    Ok(DocumentMetrics {
        eci,
        epi,
        cci,
        ici,
        k4_before,
        k4_after,
        per_layer,
        annotations: annotations.into_iter().collect(),
    })
}
