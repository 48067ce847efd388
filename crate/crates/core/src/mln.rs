//! Multilayer network assembly and condensation into a concept metagraph.
//!
//! Layers are linked through entity pairs of consecutive layers whose
//! embedding cosine is at least [`INTERLAYER_CUTOFF`]. Each layer is then
//! partitioned with Louvain; communities become metanodes. Intralayer
//! metaedge weight is `ln(sum of crossing edge weights) * crossing edge
//! count`; interlayer metaedge weight is the sum of the interlayer edge
//! weights between the two concepts' members.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{
    graph_core::{louvain, CommunityPartition, GraphError, WeightedGraph},
    section_layer::LayerNetwork,
    semantics::{cosine, EntityEmbedding},
    stats,
};

/// Minimum cosine similarity for an interlayer edge (inclusive).
pub const INTERLAYER_CUTOFF: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlnError {
    #[error("no embedding for entity {entity:?} of section {section}")]
    MissingEmbedding { section: usize, entity: String },
    #[error("{layers} layers but {embeddings} embedding lists")]
    LayerCountMismatch { layers: usize, embeddings: usize },
    #[error("layer for section {0} has no nodes")]
    EmptyLayer(usize),
    #[error("metagraph JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterlayerEdge {
    /// Node id in the source layer.
    pub source: usize,
    /// Node id in the next layer.
    pub target: usize,
    pub weight: f64,
}

/// Edges between layer `source_layer` and layer `source_layer + 1`
/// (positions in [`MultilayerNetwork::layers`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interconnection {
    pub source_layer: usize,
    pub edges: Vec<InterlayerEdge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerNetwork {
    pub layers: Vec<LayerNetwork>,
    /// One entry per consecutive layer pair; empty for single-layer documents.
    pub interlayer: Vec<Interconnection>,
}

/// Link consecutive layers through entity pairs with cosine ≥ 0.5.
///
/// `embeddings[i]` must cover every entity of `layers[i]`.
pub fn build_interlayer(
    layers: Vec<LayerNetwork>,
    embeddings: &[Vec<EntityEmbedding>],
) -> Result<MultilayerNetwork, MlnError> {
    if layers.len() != embeddings.len() {
        return Err(MlnError::LayerCountMismatch {
            layers: layers.len(),
            embeddings: embeddings.len(),
        });
    }
    let vectors: Vec<Vec<&[f64]>> = layers
        .iter()
        .zip(embeddings)
        .map(|(layer, embs)| {
            let by_entity: BTreeMap<&str, &[f64]> = embs
                .iter()
                .map(|e| (e.entity.as_str(), e.vector.as_slice()))
                .collect();
            layer
                .entities
                .iter()
                .map(|entity| {
                    by_entity.get(entity.as_str()).copied().ok_or_else(|| {
                        MlnError::MissingEmbedding {
                            section: layer.section_index,
                            entity: entity.clone(),
                        }
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let interlayer = (0..layers.len().saturating_sub(1))
        .map(|alpha| {
            let mut edges = Vec::new();
            for (x, vx) in vectors[alpha].iter().enumerate() {
                for (y, vy) in vectors[alpha + 1].iter().enumerate() {
                    let c = cosine(vx, vy);
                    if c >= INTERLAYER_CUTOFF {
                        edges.push(InterlayerEdge {
                            source: x,
                            target: y,
                            weight: c,
                        });
                    }
                }
            }
            Interconnection {
                source_layer: alpha,
                edges,
            }
        })
        .collect();
    Ok(MultilayerNetwork { layers, interlayer })
}

/// A metanode address: section index of its layer and community id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConceptId {
    pub layer: usize,
    pub community: usize,
}

impl std::fmt::Display for ConceptId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.layer, self.community + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub community: usize,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaLayer {
    /// Section index of the layer.
    pub layer: usize,
    pub concepts: Vec<Concept>,
    #[serde(default)]
    pub modularity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntralayerMetaedge {
    pub layer: usize,
    pub r: usize,
    pub s: usize,
    pub weight: f64,
    /// Number of entity edges between the two communities.
    #[serde(default)]
    pub edge_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterlayerMetaedge {
    pub source_layer: usize,
    pub r: usize,
    pub target_layer: usize,
    pub s: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaedgeKind {
    Intralayer,
    Interlayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedMetaedge {
    pub kind: MetaedgeKind,
    pub from: ConceptId,
    pub to: ConceptId,
    pub weight: f64,
    pub fence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metagraph {
    pub metanodes: Vec<MetaLayer>,
    pub intralayer_metaedges: Vec<IntralayerMetaedge>,
    pub interlayer_metaedges: Vec<InterlayerMetaedge>,
    #[serde(default)]
    pub pruned: Vec<PrunedMetaedge>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PruningThresholds {
    /// Lower fence of intralayer metaedge weights; `None` without any.
    pub intralayer_lambda: Option<f64>,
    pub interlayer_lambda: Option<f64>,
}

impl Metagraph {
    pub fn metanode_count(&self) -> usize {
        self.metanodes.iter().map(|l| l.concepts.len()).sum()
    }

    /// All metanodes in layer order.
    pub fn concept_ids(&self) -> Vec<ConceptId> {
        self.metanodes
            .iter()
            .flat_map(|l| {
                l.concepts.iter().map(move |c| ConceptId {
                    layer: l.layer,
                    community: c.community,
                })
            })
            .collect()
    }

    /// Single simple graph over all metanodes with intralayer and interlayer
    /// metaedges; node ids follow [`Self::concept_ids`].
    pub fn flatten(&self) -> WeightedGraph {
        let ids = self.concept_ids();
        let index: BTreeMap<ConceptId, usize> =
            ids.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let mut g = WeightedGraph::new(ids.len());
        let endpoints = self
            .intralayer_metaedges
            .iter()
            .map(|e| {
                (
                    ConceptId { layer: e.layer, community: e.r },
                    ConceptId { layer: e.layer, community: e.s },
                    e.weight,
                )
            })
            .chain(self.interlayer_metaedges.iter().map(|e| {
                (
                    ConceptId { layer: e.source_layer, community: e.r },
                    ConceptId { layer: e.target_layer, community: e.s },
                    e.weight,
                )
            }));
        for (a, b, w) in endpoints {
            if let (Some(&u), Some(&v)) = (index.get(&a), index.get(&b)) {
                if u != v && w > 0.0 {
                    g.set_edge(u, v, w).expect("validated metaedge");
                }
            }
        }
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metagraph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MlnError> {
        serde_json::from_str(s).map_err(|e| MlnError::Json(e.to_string()))
    }
}

/// Seed used for the Louvain run of a given section.
pub fn layer_seed(seed: u64, section_index: usize) -> u64 {
    seed.wrapping_add(section_index as u64)
}

/// Condense every layer into concepts and aggregate metaedges.
pub fn condense(mln: &MultilayerNetwork, seed: u64) -> Result<Metagraph, MlnError> {
    let partitions: Vec<CommunityPartition> = mln
        .layers
        .par_iter()
        .map(|layer| {
            if layer.graph.is_empty() {
                return Err(MlnError::EmptyLayer(layer.section_index));
            }
            Ok(louvain(&layer.graph, layer_seed(seed, layer.section_index))?)
        })
        .collect::<Result<_, _>>()?;

    let metanodes = mln
        .layers
        .iter()
        .zip(&partitions)
        .map(|(layer, part)| MetaLayer {
            layer: layer.section_index,
            concepts: part
                .communities()
                .into_iter()
                .enumerate()
                .map(|(community, nodes)| Concept {
                    community,
                    members: nodes.iter().map(|&n| layer.entities[n].clone()).collect(),
                })
                .collect(),
            modularity: part.modularity,
        })
        .collect();

    let mut intralayer_metaedges = Vec::new();
    for (layer, part) in mln.layers.iter().zip(&partitions) {
        let mut between: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        for (u, v, w) in layer.graph.edges() {
            let (cu, cv) = (part.assignment[u], part.assignment[v]);
            if cu != cv {
                let entry = between.entry((cu.min(cv), cu.max(cv))).or_insert((0.0, 0));
                entry.0 += w;
                entry.1 += 1;
            }
        }
        for ((r, s), (sum, m)) in between {
            let weight = sum.ln() * m as f64;
            if weight > 0.0 {
                intralayer_metaedges.push(IntralayerMetaedge {
                    layer: layer.section_index,
                    r,
                    s,
                    weight,
                    edge_count: m,
                });
            }
        }
    }

    let mut interlayer_metaedges = Vec::new();
    for link in &mln.interlayer {
        let alpha = link.source_layer;
        let (src, dst) = (&partitions[alpha], &partitions[alpha + 1]);
        let mut sums: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in &link.edges {
            *sums
                .entry((src.assignment[e.source], dst.assignment[e.target]))
                .or_insert(0.0) += e.weight;
        }
        for ((r, s), weight) in sums {
            if weight > 0.0 {
                interlayer_metaedges.push(InterlayerMetaedge {
                    source_layer: mln.layers[alpha].section_index,
                    r,
                    target_layer: mln.layers[alpha + 1].section_index,
                    s,
                    weight,
                });
            }
        }
    }

    Ok(Metagraph {
        metanodes,
        intralayer_metaedges,
        interlayer_metaedges,
        pruned: Vec::new(),
    })
}

/// Remove metaedges strictly below the lower fence of their kind's
/// document-wide weight distribution.
pub fn prune(meta: &Metagraph) -> (Metagraph, PruningThresholds) {
    let fence_of = |ws: Vec<f64>| stats::lower_fence(&ws).ok().map(|t| t.lambda);
    let thresholds = PruningThresholds {
        intralayer_lambda: fence_of(meta.intralayer_metaedges.iter().map(|e| e.weight).collect()),
        interlayer_lambda: fence_of(meta.interlayer_metaedges.iter().map(|e| e.weight).collect()),
    };

    let mut out = meta.clone();
    if let Some(fence) = thresholds.intralayer_lambda {
        out.intralayer_metaedges.retain(|e| {
            let keep = e.weight >= fence;
            if !keep {
                out.pruned.push(PrunedMetaedge {
                    kind: MetaedgeKind::Intralayer,
                    from: ConceptId { layer: e.layer, community: e.r },
                    to: ConceptId { layer: e.layer, community: e.s },
                    weight: e.weight,
                    fence,
                });
            }
            keep
        });
    }
    if let Some(fence) = thresholds.interlayer_lambda {
        out.interlayer_metaedges.retain(|e| {
            let keep = e.weight >= fence;
            if !keep {
                out.pruned.push(PrunedMetaedge {
                    kind: MetaedgeKind::Interlayer,
                    from: ConceptId { layer: e.source_layer, community: e.r },
                    to: ConceptId { layer: e.target_layer, community: e.s },
                    weight: e.weight,
                    fence,
                });
            }
            keep
        });
    }
    (out, thresholds)
}
