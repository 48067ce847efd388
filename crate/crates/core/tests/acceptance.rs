//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
//! below. Exits non-zero if any criterion fails.

mod common;

use std::{process::Command, time::Instant};

use cohesia::{
    chiaa_report::{generate_findings, FindingKind},
    config::{Config, ExtractorMode},
    doc_metrics::{self, DocumentMetrics, LayerTerms},
    eval_harness::Contingency,
    graph_core::{
        average_path_length, count_k4, louvain, modularity, weighted_clustering, WeightedGraph,
    },
    mln::{prune, Concept, IntralayerMetaedge, MetaLayer, Metagraph},
    pipeline,
    section_layer::{slic, LayerNetwork},
    semantics::SurrogateProvider,
};
use common::fixture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CHI_SQUARE_STAT_TOL: f64 = 1e-6;
const CHI_SQUARE_P_MAX: f64 = 1e-3;
const CHI_SQUARE_RUNTIME_S: f64 = 1.0;
const WCC_TOL: f64 = 1e-12;
const LOUVAIN_ABS_TOL: f64 = 1e-9;
const LOUVAIN_REL_FLOOR: f64 = 0.95;
const GRAPH_SUITE_RUNTIME_S: f64 = 60.0;
const SLIC_SCALE_TOL: f64 = 1e-12;
const ICI_TOL: f64 = 1e-7;
const REFERENCE_ICI: f64 = 0.2173913;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg.into()) }
}

/// Pearson chi-square by explicit expected counts.
fn chi_square_oracle(t: [[f64; 2]; 2]) -> f64 {
    let n: f64 = t.iter().flatten().sum();
    let rows = [t[0][0] + t[0][1], t[1][0] + t[1][1]];
    let cols = [t[0][0] + t[1][0], t[0][1] + t[1][1]];
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] * cols[j] / n;
            stat += (t[i][j] - e).powi(2) / e;
        }
    }
    stat
}

fn chi_square_tables() -> Check {
    let tables = [
        ("full", [[101.0, 42.0], [548.0, 1133.0]]),
        ("subsample-1", [[101.0, 20.0], [548.0, 382.0]]),
        ("subsample-2", [[101.0, 22.0], [548.0, 627.0]]),
    ];
    let start = Instant::now();
    let mut detail = Vec::new();
    for (name, t) in tables {
        let c = Contingency::from_counts(["Neg".into(), "Pos".into()], t).map_err(|e| e.to_string())?;
        let oracle = chi_square_oracle(t);
        ensure(
            (c.chi_square.statistic - oracle).abs() < CHI_SQUARE_STAT_TOL,
            format!("{name}: statistic {} vs oracle {oracle}", c.chi_square.statistic),
        )?;
        ensure(c.chi_square.p_value < CHI_SQUARE_P_MAX, format!("{name}: p = {}", c.chi_square.p_value))?;
        detail.push(format!("{name} chi2={:.4} p={:.3e}", c.chi_square.statistic, c.chi_square.p_value));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < CHI_SQUARE_RUNTIME_S, format!("took {elapsed:.3}s"))?;
    let full = chi_square_oracle(tables[0].1);
    ensure((full - 83.2).abs() < 0.05, format!("full-table oracle {full} not ≈ 83.2"))?;
    Ok(format!("{} ({elapsed:.4}s)", detail.join(", ")))
}

fn multi_component_probabilities() -> Check {
    let c = Contingency::from_counts(["Neg".into(), "Pos".into()], [[101.0, 42.0], [548.0, 1133.0]])
        .map_err(|e| e.to_string())?;
    let [neg, pos] = c.multi_probability;
    ensure(neg == 101.0 / 649.0, format!("Neg {neg}"))?;
    ensure(pos == 42.0 / 1175.0, format!("Pos {pos}"))?;
    ensure(format!("{pos:.8}") == "0.03574468", format!("Pos prints {pos:.8}"))?;
    ensure(format!("{neg:.6}") == "0.155624", format!("Neg prints {neg:.6}"))?;
    Ok(format!("Pos {pos:.8}, Neg {neg:.6}"))
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, weighted: bool) -> WeightedGraph {
    let mut g = WeightedGraph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                let w = if weighted { rng.random_range(1..=5) as f64 } else { 1.0 };
                g.set_edge(u, v, w).unwrap();
            }
        }
    }
    g
}

fn k4_brute_force(g: &WeightedGraph) -> u64 {
    let n = g.node_count();
    let mut count = 0;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let quad = [a, b, c, d];
                    let complete = (0..4).all(|i| (i + 1..4).all(|j| g.has_edge(quad[i], quad[j])));
                    count += u64::from(complete);
                }
            }
        }
    }
    count
}

fn unweighted_clustering_oracle(g: &WeightedGraph) -> f64 {
    let n = g.node_count();
    let mut total = 0.0;
    for v in 0..n {
        let nb: Vec<usize> = g.neighbors(v).map(|(u, _)| u).collect();
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let mut links = 0;
        for i in 0..k {
            for j in i + 1..k {
                links += usize::from(g.has_edge(nb[i], nb[j]));
            }
        }
        total += links as f64 / (k * (k - 1) / 2) as f64;
    }
    total / n as f64
}

/// Every set partition of `0..n` as restricted growth strings.
fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..=max + 1 {
            prefix.push(c);
            grow(prefix, max.max(c), n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut prefix = vec![0];
    grow(&mut prefix, 0, n, &mut out);
    out
}

fn modularity_oracle(g: &WeightedGraph, part: &[usize]) -> f64 {
    let n = g.node_count();
    let two_m: f64 = (0..n).map(|u| g.strength(u)).sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if part[i] == part[j] {
                let a = if i == j { 0.0 } else { g.weight(i, j).unwrap_or(0.0) };
                q += a - g.strength(i) * g.strength(j) / two_m;
            }
        }
    }
    q / two_m
}

fn graph_oracle_suite() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);

    for i in 0..200 {
        let n = rng.random_range(1..=12);
        let p = rng.random_range(0.2..0.95);
        let g = random_graph(&mut rng, n, p, true);
        let (fast, slow) = (count_k4(&g), k4_brute_force(&g));
        ensure(fast == slow, format!("K4 graph {i}: {fast} vs brute force {slow}"))?;
    }

    for i in 0..100 {
        let n = rng.random_range(1..=15);
        let p = rng.random_range(0.1..0.9);
        let g = random_graph(&mut rng, n, p, false);
        let scaled = {
            let w = rng.random_range(0.5..4.0);
            WeightedGraph::from_edges(n, g.edges().map(|(u, v, _)| (u, v, w))).unwrap()
        };
        let oracle = unweighted_clustering_oracle(&g);
        for h in [&g, &scaled] {
            let wcc = weighted_clustering(h);
            ensure((wcc - oracle).abs() < WCC_TOL, format!("WCC graph {i}: {wcc} vs {oracle}"))?;
        }
    }

    // (graph, hand-enumerated distance sum over unordered pairs)
    let apl_cases: [(usize, Vec<(usize, usize)>, f64); 4] = [
        // two disjoint edges: 2 pairs at 1, 4 unreachable at 4
        (4, vec![(0, 1), (2, 3)], 2.0 * 1.0 + 4.0 * 4.0),
        // path 0-1-2 plus isolated 3: 1 + 1 + 2 + 3·4
        (4, vec![(0, 1), (1, 2)], 16.0),
        // edgeless triple: every pair unreachable at 3
        (3, vec![], 3.0 * 3.0),
        // triangle + disjoint edge (n = 5): 3·1 + 1 + 6·5
        (5, vec![(0, 1), (1, 2), (0, 2), (3, 4)], 34.0),
    ];
    for (n, edges, sum) in apl_cases {
        let g = WeightedGraph::from_edges(n, edges.iter().map(|&(u, v)| (u, v, 1.0))).unwrap();
        let pairs = (n * (n - 1) / 2) as f64;
        let apl = average_path_length(&g).map_err(|e| e.to_string())?;
        ensure(apl == sum / pairs, format!("APL n={n} {edges:?}: {apl} vs {}", sum / pairs))?;
    }

    let mut worst_ratio: f64 = 1.0;
    let mut checked = 0;
    for n in 2..=8 {
        let partitions = all_partitions(n);
        for trial in 0..40 {
            let p = [0.25, 0.4, 0.6][trial % 3];
            let g = random_graph(&mut rng, n, p, trial % 2 == 0);
            if g.total_weight() == 0.0 {
                continue;
            }
            let optimum = partitions
                .iter()
                .map(|part| modularity_oracle(&g, part))
                .fold(f64::NEG_INFINITY, f64::max);
            let found = louvain(&g, trial as u64).map_err(|e| e.to_string())?;
            let q = modularity_oracle(&g, &found.assignment);
            ensure(
                (q - modularity(&g, &found.assignment)).abs() < 1e-12,
                "modularity implementation disagrees with oracle",
            )?;
            let ok = (q - optimum).abs() <= LOUVAIN_ABS_TOL || q >= LOUVAIN_REL_FLOOR * optimum;
            ensure(ok, format!("Louvain n={n} trial {trial}: Q={q} optimum={optimum}"))?;
            if optimum > LOUVAIN_ABS_TOL {
                worst_ratio = worst_ratio.min(q / optimum);
            }
            checked += 1;
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < GRAPH_SUITE_RUNTIME_S, format!("took {elapsed:.1}s"))?;
    Ok(format!(
        "K4 200/200, WCC 100/100, APL 4/4, Louvain {checked} graphs (worst Q/Q* {worst_ratio:.4}) in {elapsed:.2}s"
    ))
}

fn layer(section_index: usize, n: usize, edges: &[(usize, usize, f64)]) -> LayerNetwork {
    LayerNetwork {
        section_index,
        sentence_count: 6,
        entities: (0..n).map(|i| format!("e{i}")).collect(),
        graph: WeightedGraph::from_edges(n, edges.iter().copied()).unwrap(),
        scores: vec![],
        lambda: None,
        dropped_pairs: vec![],
    }
}

fn complete_edges(n: usize, w: f64) -> Vec<(usize, usize, f64)> {
    (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v, w))).collect()
}

fn metric_trivial_values() -> Check {
    let complete: Vec<LayerNetwork> = (3..7).map(|n| layer(n, n, &complete_edges(n, 2.0))).collect();
    let eci = doc_metrics::compute_eci(&complete).map_err(|e| e.to_string())?;
    ensure(eci == 0.0, format!("complete layers ECI {eci}"))?;

    let triangle_free = vec![
        layer(1, 4, &[(0, 1, 1.0), (1, 2, 3.0), (2, 3, 1.0), (3, 0, 2.0)]),
        layer(2, 5, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0)]),
    ];
    let eci = doc_metrics::compute_eci(&triangle_free).map_err(|e| e.to_string())?;
    ensure(eci == 1.0, format!("triangle-free ECI {eci}"))?;

    let k4_meta = Metagraph {
        metanodes: vec![MetaLayer {
            layer: 1,
            concepts: (0..4).map(|c| Concept { community: c, members: vec![] }).collect(),
            modularity: 0.0,
        }],
        intralayer_metaedges: complete_edges(4, 1.5)
            .into_iter()
            .map(|(r, s, weight)| IntralayerMetaedge { layer: 1, r, s, weight, edge_count: 1 })
            .collect(),
        interlayer_metaedges: vec![],
        pruned: vec![],
    };
    let (after, _) = prune(&k4_meta);
    ensure(after.pruned.is_empty(), "equal weights were pruned")?;
    let (cci, before_k4, after_k4) = doc_metrics::compute_cci(&k4_meta, &after);
    ensure(cci == 0.0 && before_k4 == 1 && after_k4 == 1, format!("CCI {cci}"))?;
    let ici = doc_metrics::compute_ici(&after).map_err(|e| e.to_string())?;
    ensure(ici == 0.0, format!("connected metanodes ICI {ici}"))?;

    ensure(slic(&[3.0; 7]) == Some(0.0), "equal weights SLIC != 0")?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let weights: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random_range(1..=9) as f64).collect();
        let c = rng.random_range(0.01..100.0);
        let scaled: Vec<f64> = weights.iter().map(|w| w * c).collect();
        let (a, b) = (slic(&weights).unwrap(), slic(&scaled).unwrap());
        ensure((a - b).abs() < SLIC_SCALE_TOL, format!("SLIC {a} vs scaled {b} (c = {c})"))?;
    }
    Ok("ECI 0/1, CCI 0, ICI 0, SLIC 0, SLIC scale-invariance 200/200".into())
}

fn two_topics_structure() -> Check {
    let config = Config {
        extractor: ExtractorMode::ExternalList(fixture("two_topics_entities.txt")),
        ..Config::default()
    };
    let doc = pipeline::load(&fixture("two_topics.txt"), &config).map_err(|e| e.to_string())?;
    let a = pipeline::analyze(&doc, &config, &SurrogateProvider::new()).map_err(|e| e.to_string())?;
    let s = &a.report.sections[0];
    ensure(s.components == 2, format!("{} components", s.components))?;
    ensure(s.dropped_pairs == vec![4], format!("dropped pairs {:?}", s.dropped_pairs))?;
    let multi = a.report.findings.iter().any(|f| f.kind == FindingKind::MultiComponent && f.location.section == 1);
    let dropped = a
        .report
        .findings
        .iter()
        .any(|f| f.kind == FindingKind::DroppedPair && f.location.pair == Some(4));
    ensure(multi && dropped, "missing multi_component or dropped_pair finding")?;
    Ok("2 components, pair (4,5) dropped, multi_component + dropped_pair reported".into())
}

#[derive(serde::Deserialize)]
struct LayerFixture {
    section_index: usize,
    n: usize,
    apl: f64,
    wcc: f64,
}

fn reference_fixture() -> Check {
    let meta_json = std::fs::read_to_string(fixture("reference_metagraph.json")).map_err(|e| e.to_string())?;
    let meta = Metagraph::from_json(&meta_json).map_err(|e| e.to_string())?;
    let layers: Vec<LayerFixture> = serde_json::from_str(
        &std::fs::read_to_string(fixture("reference_layers.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;

    ensure(meta.metanode_count() == 23, format!("{} metanodes", meta.metanode_count()))?;
    let ici = doc_metrics::compute_ici(&meta).map_err(|e| e.to_string())?;
    ensure((ici - REFERENCE_ICI).abs() < ICI_TOL, format!("ICI {ici}"))?;
    let isolated: Vec<(usize, usize)> = doc_metrics::isolated_counts(&meta)
        .into_iter()
        .filter(|c| c.1 > 0)
        .map(|c| (c.0, c.1))
        .collect();
    ensure(isolated == vec![(2, 1), (4, 3), (6, 1)], format!("isolated {isolated:?}"))?;

    let counts = doc_metrics::isolated_counts(&meta);
    let per_layer: Vec<LayerTerms> = layers
        .iter()
        .map(|l| {
            let c = counts.iter().find(|c| c.0 == l.section_index).copied().unwrap_or_default();
            LayerTerms {
                section_index: l.section_index,
                wcc: l.wcc,
                apl: l.apl,
                n: l.n,
                deviation: (l.n as f64).ln() - l.apl,
                isolated: c.1,
                metanodes: c.2,
            }
        })
        .collect();
    let doc = DocumentMetrics {
        eci: doc_metrics::eci_from_wcc(&layers.iter().map(|l| l.wcc).collect::<Vec<_>>()).map_err(|e| e.to_string())?,
        epi: doc_metrics::epi_from_layers(&layers.iter().map(|l| (l.n, l.apl)).collect::<Vec<_>>()).map_err(|e| e.to_string())?,
        cci: 0.0,
        ici,
        k4_before: 0,
        k4_after: 0,
        per_layer,
        annotations: vec![],
    };
    let findings = generate_findings(&[], &[], &doc, &meta, true);
    let deviation_order: Vec<usize> = findings
        .iter()
        .filter(|f| f.kind == FindingKind::HighLayerDeviation)
        .map(|f| f.location.section)
        .collect();
    ensure(deviation_order.starts_with(&[6, 4]), format!("deviation ranking {deviation_order:?}"))?;
    let isolated_findings = findings.iter().filter(|f| f.kind == FindingKind::IsolatedConcept).count();
    ensure(isolated_findings == 5, format!("{isolated_findings} isolated_concept findings"))?;
    let pruned_inter = findings.iter().filter(|f| f.kind == FindingKind::PrunedInterlayerLink).count();
    ensure(pruned_inter == 3, format!("{pruned_inter} pruned interlayer findings"))?;
    Ok(format!("ICI {ici:.7}, deviation ranking {deviation_order:?}"))
}

fn pipeline_determinism() -> Check {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_cohesia"))
            .arg("analyze")
            .arg(fixture("article.json"))
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    ensure(a.status.success() && b.status.success(), "analyze failed")?;
    ensure(!a.stdout.is_empty() && a.stdout == b.stdout, "outputs differ")?;
    Ok(format!("{} identical bytes", a.stdout.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("chi_square_component_tables_p_below_0.001", chi_square_tables),
        ("multi_component_probabilities", multi_component_probabilities),
        ("graph_core_oracle_suite", graph_oracle_suite),
        ("metric_trivial_values", metric_trivial_values),
        ("two_component_section_structure", two_topics_structure),
        ("reference_metagraph_ici_and_deviation_ranking", reference_fixture),
        ("full_pipeline_determinism", pipeline_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
