//! Localized cohesion findings and report rendering.
//!
//! Findings point at concrete places to revise: sections with low SLIC,
//! fragmented sections and the sentence transitions that broke them, layers
//! whose entities are far apart, isolated concepts and pruned concept links.

use std::{collections::BTreeSet, fmt::Write as _, str::FromStr};

use serde::{Deserialize, Serialize};

use crate::{
    doc_metrics::DocumentMetrics,
    error::Error,
    mln::{ConceptId, MetaedgeKind, Metagraph},
    section_layer::{LayerNetwork, SectionMetrics},
    stats,
};

/// Cutoff rule used for `low_slic`, recorded in provenance.
pub const LOW_SLIC_RULE: &str = "slic < document Q1 or slic = 0";
pub const NO_FINDINGS: &str = "no cohesion gaps flagged";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

/// Declaration order is the report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    LowSlic,
    MultiComponent,
    DroppedPair,
    HighLayerDeviation,
    IsolatedConcept,
    PrunedInterlayerLink,
    PrunedIntralayerLink,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LowSlic => "low_slic",
            Self::MultiComponent => "multi_component",
            Self::DroppedPair => "dropped_pair",
            Self::HighLayerDeviation => "high_layer_deviation",
            Self::IsolatedConcept => "isolated_concept",
            Self::PrunedInterlayerLink => "pruned_interlayer_link",
            Self::PrunedIntralayerLink => "pruned_intralayer_link",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub section: usize,
    /// 1-based sentence pair `(pair, pair + 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<ConceptId>,
    /// Second endpoint of a pruned link.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<ConceptId>,
}

impl Location {
    fn section(section: usize) -> Self {
        Self { section, pair: None, concept: None, other: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub location: Location,
    pub severity: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionThreshold {
    pub section: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub provider: String,
    pub quartile_method: String,
    pub log_base: String,
    pub seed: u64,
    pub threshold_scope: String,
    pub filters: bool,
    pub low_slic_rule: String,
    pub pair_thresholds: Vec<SectionThreshold>,
    pub intralayer_lambda: Option<f64>,
    pub interlayer_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionReport {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<String>,
    pub sentences: usize,
    pub slic: f64,
    pub slic_defined: bool,
    pub components: usize,
    pub nodes: usize,
    pub edges: usize,
    pub below_filter: bool,
    pub skipped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
    pub dropped_pairs: Vec<usize>,
}

impl SectionReport {
    pub fn analyzed(m: &SectionMetrics, layer: &LayerNetwork, heading: Option<String>) -> Self {
        Self {
            index: m.section_index,
            heading,
            sentences: m.sentence_count,
            slic: m.slic,
            slic_defined: m.slic_defined,
            components: m.component_count,
            nodes: m.node_count,
            edges: m.edge_count,
            below_filter: m.below_filter(),
            skipped: false,
            skip_reason: None,
            dropped_pairs: layer.dropped_pairs.clone(),
        }
    }

    pub fn skipped(index: usize, heading: Option<String>, sentences: usize, reason: String) -> Self {
        Self {
            index,
            heading,
            sentences,
            slic: 0.0,
            slic_defined: false,
            components: 0,
            nodes: 0,
            edges: 0,
            below_filter: true,
            skipped: true,
            skip_reason: Some(reason),
            dropped_pairs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohesionReport {
    pub doc_id: String,
    pub provenance: Provenance,
    pub sections: Vec<SectionReport>,
    pub document: DocumentMetrics,
    pub findings: Vec<Finding>,
    pub warnings: Vec<String>,
}

impl CohesionReport {
    pub fn from_json(s: &str) -> Result<Self, Error> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("report JSON: {e}")))
    }
}

/// Derive findings from completed results. `metrics[i]` and `layers[i]`
/// describe the same section; `meta` is the pruned metagraph carrying the
/// pruning record. With `filters`, sections below the size filters do not
/// take part in the low-SLIC quartile.
pub fn generate_findings(
    metrics: &[SectionMetrics],
    layers: &[LayerNetwork],
    doc: &DocumentMetrics,
    meta: &Metagraph,
    filters: bool,
) -> Vec<Finding> {
    let mut findings = Vec::new();

    let eligible: Vec<&SectionMetrics> = metrics
        .iter()
        .filter(|m| !filters || !m.below_filter())
        .collect();
    let values: Vec<f64> = eligible.iter().map(|m| m.slic).collect();
    if let Ok(summary) = stats::five_number_summary(&values) {
        for m in &eligible {
            if m.slic < summary.q1 || m.slic == 0.0 {
                let detail = if m.slic_defined {
                    format!("SLIC {:.4} is in the bottom quartile (Q1 {:.4})", m.slic, summary.q1)
                } else {
                    "layer has no entity links (SLIC undefined)".to_string()
                };
                findings.push(Finding {
                    kind: FindingKind::LowSlic,
                    location: Location::section(m.section_index),
                    severity: summary.median - m.slic,
                    message: format!(
                        "{detail}; repeat key entities across neighbouring sentences"
                    ),
                });
            }
        }
    }

    for (m, layer) in metrics.iter().zip(layers) {
        if m.component_count <= 1 {
            continue;
        }
        let pairs = layer
            .dropped_pairs
            .iter()
            .map(|p| format!("{}-{}", p, p + 1))
            .collect::<Vec<_>>();
        let review = if pairs.is_empty() {
            "some entities never co-occur with the rest".to_string()
        } else {
            format!("review sentence pairs {}", pairs.join(", "))
        };
        findings.push(Finding {
            kind: FindingKind::MultiComponent,
            location: Location::section(m.section_index),
            severity: 1.0,
            message: format!(
                "entity network splits into {} disconnected components; {review}",
                m.component_count
            ),
        });
        for &pair in &layer.dropped_pairs {
            let score = layer.scores.iter().find(|s| s.pair_index == pair).map(|s| s.score);
            let fence = layer.lambda.map(|t| t.lambda);
            let mut message = format!("transition between sentences {pair} and {}", pair + 1);
            if let (Some(score), Some(fence)) = (score, fence) {
                let _ = write!(message, " scores {score:.4}, at or below the coherence fence {fence:.4}");
            }
            message.push_str("; review this pair of sentences");
            findings.push(Finding {
                kind: FindingKind::DroppedPair,
                location: Location { pair: Some(pair), ..Location::section(m.section_index) },
                severity: 1.0,
                message,
            });
        }
    }

    for t in &doc.per_layer {
        if t.n >= 2 && t.deviation < 0.0 {
            findings.push(Finding {
                kind: FindingKind::HighLayerDeviation,
                location: Location::section(t.section_index),
                severity: -t.deviation,
                message: format!(
                    "average path length {:.3} exceeds ln(n) = {:.3} (deviation {:.3}); entities are loosely connected",
                    t.apl,
                    (t.n as f64).ln(),
                    t.deviation
                ),
            });
        }
    }

    let linked: BTreeSet<ConceptId> = meta
        .intralayer_metaedges
        .iter()
        .flat_map(|e| {
            [
                ConceptId { layer: e.layer, community: e.r },
                ConceptId { layer: e.layer, community: e.s },
            ]
        })
        .collect();
    for layer in &meta.metanodes {
        for concept in &layer.concepts {
            let id = ConceptId { layer: layer.layer, community: concept.community };
            if linked.contains(&id) {
                continue;
            }
            let single = if layer.concepts.len() == 1 { " (single-concept section)" } else { "" };
            findings.push(Finding {
                kind: FindingKind::IsolatedConcept,
                location: Location { concept: Some(id), ..Location::section(layer.layer) },
                severity: 1.0,
                message: format!(
                    "concept {id} [{}] has no link to other concepts of its section{single}",
                    concept.members.join(", ")
                ),
            });
        }
    }

    for p in &meta.pruned {
        let kind = match p.kind {
            MetaedgeKind::Interlayer => FindingKind::PrunedInterlayerLink,
            MetaedgeKind::Intralayer => FindingKind::PrunedIntralayerLink,
        };
        findings.push(Finding {
            kind,
            location: Location {
                concept: Some(p.from),
                other: Some(p.to),
                ..Location::section(p.from.layer)
            },
            severity: 1.0,
            message: format!(
                "link between concepts {} and {} (weight {:.4}) fell below the pruning fence {:.4}; strengthen the linkage between these concepts",
                p.from, p.to, p.weight, p.fence
            ),
        });
    }

    sort_findings(&mut findings);
    findings
}

/// By kind, then severity descending; ties keep generation order.
pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then_with(|| b.severity.total_cmp(&a.severity))
    });
}

pub fn render_report(report: &CohesionReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn render_markdown(r: &CohesionReport) -> String {
    let mut out = String::new();
    let p = &r.provenance;
    let _ = writeln!(out, "# Cohesion report: {}\n", r.doc_id);
    let _ = writeln!(
        out,
        "Provider `{}`, seed {}, {}-scope pair thresholds, quartiles {}, natural log.\n",
        p.provider, p.seed, p.threshold_scope, p.quartile_method
    );

    let d = &r.document;
    out.push_str("## Document indices\n\n");
    out.push_str("| ECI | EPI | CCI | ICI | K4 before | K4 after |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    let _ = writeln!(
        out,
        "| {:.6} | {:.6} | {:.6} | {:.6} | {} | {} |\n",
        d.eci, d.epi, d.cci, d.ici, d.k4_before, d.k4_after
    );
    if !d.annotations.is_empty() {
        let _ = writeln!(out, "Annotations: {}\n", d.annotations.join(", "));
    }

    out.push_str("## Sections\n\n");
    out.push_str("| Section | Sentences | SLIC | Components | Nodes | Edges | Note |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for s in &r.sections {
        let note = match (&s.skip_reason, s.below_filter) {
            (Some(reason), _) => format!("skipped: {reason}"),
            (None, true) => "below size filter".to_string(),
            (None, false) => String::new(),
        };
        let slic = if s.slic_defined { format!("{:.4}", s.slic) } else { "n/a".to_string() };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            s.index, s.sentences, slic, s.components, s.nodes, s.edges, note
        );
    }
    out.push('\n');

    out.push_str("## Findings\n\n");
    if r.findings.is_empty() {
        let _ = writeln!(out, "_{NO_FINDINGS}._");
    } else {
        let sections: BTreeSet<usize> = r.findings.iter().map(|f| f.location.section).collect();
        for section in sections {
            let _ = writeln!(out, "### Section {section}\n");
            for f in r.findings.iter().filter(|f| f.location.section == section) {
                let _ = writeln!(out, "- **{}** ({:.3}): {}", f.kind.as_str(), f.severity, f.message);
            }
            out.push('\n');
        }
    }

    if !r.warnings.is_empty() {
        out.push_str("\n## Warnings\n\n");
        for w in &r.warnings {
            let _ = writeln!(out, "> {w}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{
        doc_metrics::LayerTerms,
        graph_core::WeightedGraph,
        mln::{Concept, IntralayerMetaedge, MetaLayer, PrunedMetaedge},
        semantics::CoherenceScore,
        stats::OutlierThreshold,
    };

    fn metrics(section_index: usize, slic: f64, components: usize) -> SectionMetrics {
        SectionMetrics {
            section_index,
            slic,
            slic_defined: slic > 0.0,
            component_count: components,
            average_edge_weight: 1.0,
            node_count: 5,
            edge_count: 4,
            sentence_count: 7,
        }
    }

    fn layer(section_index: usize, dropped: &[usize]) -> LayerNetwork {
        LayerNetwork {
            section_index,
            sentence_count: 7,
            entities: vec![],
            graph: WeightedGraph::new(0),
            scores: (1..7).map(|k| CoherenceScore { pair_index: k, score: if dropped.contains(&k) { 0.0 } else { 0.8 } }).collect(),
            lambda: Some(OutlierThreshold { lambda: 0.3, q1: 0.6, q3: 0.8 }),
            dropped_pairs: dropped.to_vec(),
        }
    }

    fn doc(per_layer: Vec<LayerTerms>) -> DocumentMetrics {
        DocumentMetrics {
            eci: 0.0,
            epi: 0.0,
            cci: 0.0,
            ici: 0.0,
            k4_before: 0,
            k4_after: 0,
            per_layer,
            annotations: vec![],
        }
    }

    fn connected_meta(layers: &[usize]) -> Metagraph {
        Metagraph {
            metanodes: layers
                .iter()
                .map(|&layer| MetaLayer {
                    layer,
                    concepts: vec![
                        Concept { community: 0, members: vec!["a".into()] },
                        Concept { community: 1, members: vec!["b".into()] },
                    ],
                    modularity: 0.0,
                })
                .collect(),
            intralayer_metaedges: layers
                .iter()
                .map(|&layer| IntralayerMetaedge { layer, r: 0, s: 1, weight: 1.0, edge_count: 2 })
                .collect(),
            interlayer_metaedges: vec![],
            pruned: vec![],
        }
    }

    fn report(findings: Vec<Finding>) -> CohesionReport {
        CohesionReport {
            doc_id: "d".into(),
            provenance: Provenance {
                provider: "surrogate".into(),
                quartile_method: stats::QUARTILE_METHOD.into(),
                log_base: "e".into(),
                seed: 42,
                threshold_scope: "section".into(),
                filters: true,
                low_slic_rule: LOW_SLIC_RULE.into(),
                pair_thresholds: vec![SectionThreshold { section: 1, lambda: 0.3 }],
                intralayer_lambda: Some(1.0),
                interlayer_lambda: None,
            },
            sections: vec![SectionReport::analyzed(&metrics(1, 0.5, 1), &layer(1, &[]), None)],
            document: doc(vec![]),
            findings,
            warnings: vec![],
        }
    }

    #[test]
    fn ideal_inputs_give_no_findings() {
        let ms = [metrics(1, 0.4, 1), metrics(2, 0.4, 1)];
        let ls = [layer(1, &[]), layer(2, &[])];
        let d = doc(vec![LayerTerms { section_index: 1, wcc: 1.0, apl: 1.0, n: 5, deviation: 5f64.ln() - 1.0, isolated: 0, metanodes: 2 }]);
        assert!(generate_findings(&ms, &ls, &d, &connected_meta(&[1, 2]), true).is_empty());
    }

    #[test]
    fn multi_component_section_lists_dropped_pairs() {
        let ms = [metrics(1, 0.4, 2)];
        let ls = [layer(1, &[4])];
        let f = generate_findings(&ms, &ls, &doc(vec![]), &connected_meta(&[1]), true);
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].kind, FindingKind::MultiComponent);
        assert!(f[0].message.contains("4-5"));
        assert_eq!(f[1].kind, FindingKind::DroppedPair);
        assert_eq!(f[1].location.pair, Some(4));
    }

    #[test]
    fn low_slic_uses_bottom_quartile() {
        let ms: Vec<_> = [0.1, 0.5, 0.6, 0.7, 0.8].iter().enumerate().map(|(i, &s)| metrics(i + 1, s, 1)).collect();
        let ls: Vec<_> = (1..=5).map(|i| layer(i, &[])).collect();
        let f = generate_findings(&ms, &ls, &doc(vec![]), &connected_meta(&[1, 2, 3, 4, 5]), true);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, FindingKind::LowSlic);
        assert_eq!(f[0].location.section, 1);
        assert!((f[0].severity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn deviations_rank_most_negative_first() {
        let terms = vec![
            LayerTerms { section_index: 4, wcc: 0.5, apl: 11.0, n: 8, deviation: -9.0, isolated: 3, metanodes: 3 },
            LayerTerms { section_index: 6, wcc: 0.5, apl: 16.0, n: 8, deviation: -14.0, isolated: 1, metanodes: 4 },
            LayerTerms { section_index: 2, wcc: 0.5, apl: 1.0, n: 8, deviation: 8f64.ln() - 1.0, isolated: 1, metanodes: 4 },
        ];
        let f = generate_findings(&[], &[], &doc(terms), &Metagraph::default(), true);
        let sections: Vec<_> = f.iter().map(|f| f.location.section).collect();
        assert_eq!(sections, vec![6, 4]);
        assert_eq!(f[0].severity, 14.0);
    }

    #[test]
    fn isolated_and_pruned_findings() {
        let mut meta = connected_meta(&[1]);
        meta.metanodes[0].concepts.push(Concept { community: 2, members: vec!["c".into()] });
        meta.pruned.push(PrunedMetaedge {
            kind: MetaedgeKind::Interlayer,
            from: ConceptId { layer: 1, community: 2 },
            to: ConceptId { layer: 2, community: 0 },
            weight: 0.5,
            fence: 0.9,
        });
        let f = generate_findings(&[], &[], &doc(vec![]), &meta, true);
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].kind, FindingKind::IsolatedConcept);
        assert_eq!(f[0].location.concept, Some(ConceptId { layer: 1, community: 2 }));
        assert_eq!(f[1].kind, FindingKind::PrunedInterlayerLink);
        assert_eq!(f[1].location.other, Some(ConceptId { layer: 2, community: 0 }));
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let r = report(vec![Finding {
            kind: FindingKind::LowSlic,
            location: Location::section(1),
            severity: 0.1 + 0.2,
            message: "m".into(),
        }]);
        let json = render_report(&r, ReportFormat::Json);
        assert_eq!(CohesionReport::from_json(&json).unwrap(), r);
        assert_eq!(json, render_report(&r.clone(), ReportFormat::Json));
    }

    #[test]
    fn markdown_lines() {
        let empty = render_report(&report(vec![]), ReportFormat::Markdown);
        assert!(empty.contains(NO_FINDINGS));
        let three: Vec<Finding> = (1..=3)
            .map(|k| Finding {
                kind: FindingKind::DroppedPair,
                location: Location { pair: Some(k), ..Location::section(k % 2) },
                severity: 1.0,
                message: format!("pair {k}"),
            })
            .collect();
        let md = render_report(&report(three), ReportFormat::Markdown);
        assert_eq!(md.lines().filter(|l| l.starts_with("- ")).count(), 3);
        assert!(!md.contains(NO_FINDINGS));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
        assert!("html".parse::<ReportFormat>().is_err());
    }
}
