//! Corpus-level experiments: component contingency tests, SLIC summaries,
//! correlation with externally computed cohesion indices, metric export.

use std::{
    collections::{BTreeMap, BTreeSet},
    io::{Read, Write},
    path::{Path, PathBuf},
};

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{
    config::Config,
    doc_metrics::DocumentMetrics,
    pipeline::{self, Analysis},
    section_layer::SectionMetrics,
    semantics::SemanticProvider,
    stats::{self, ChiSquareResult, FiveNumberSummary, StatsError},
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("manifest {path}: {reason}")]
    Manifest { path: String, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("external index CSV lacks column {0:?}")]
    MissingColumn(String),
    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),
    #[error("no (doc_id, section_index) rows joined the corpus")]
    JoinEmpty,
    #[error("zero variance in {0}")]
    ZeroVariance(String),
    #[error("no records")]
    NoRecords,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub category: String,
}

/// Read a JSON manifest; relative paths resolve against its directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, HarnessError> {
    let bad = |reason: String| HarnessError::Manifest { path: path.display().to_string(), reason };
    let content = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let mut entries: Vec<ManifestEntry> =
        serde_json::from_str(&content).map_err(|e| bad(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        if e.category.trim().is_empty() {
            return Err(bad(format!("empty category for {}", e.path.display())));
        }
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub category: String,
    /// Analyzed (non-skipped) sections only.
    pub sections: Vec<SectionMetrics>,
    pub document: DocumentMetrics,
}

impl CorpusRecord {
    pub fn from_analysis(category: &str, analysis: &Analysis) -> Self {
        Self {
            doc_id: analysis.report.doc_id.clone(),
            category: category.to_string(),
            sections: analysis.section_metrics.clone(),
            document: analysis.report.document.clone(),
        }
    }
}

#[derive(Debug, Default)]
pub struct CorpusRun {
    /// Sorted by document id.
    pub records: Vec<CorpusRecord>,
    /// `(path, error message)` for documents that failed.
    pub failures: Vec<(PathBuf, String)>,
}

/// Analyze every manifest entry in parallel.
pub fn analyze_corpus(
    entries: &[ManifestEntry],
    config: &Config,
    provider: &dyn SemanticProvider,
) -> CorpusRun {
    let results: Vec<_> = entries
        .par_iter()
        .map(|e| {
            let outcome = pipeline::load(&e.path, config)
                .and_then(|doc| pipeline::analyze(&doc, config, provider));
            (e, outcome)
        })
        .collect();
    let mut run = CorpusRun::default();
    for (entry, outcome) in results {
        match outcome {
            Ok(a) => run.records.push(CorpusRecord::from_analysis(&entry.category, &a)),
            Err(err) => run.failures.push((entry.path.clone(), err.to_string())),
        }
    }
    run.records.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    run.failures.sort();
    run
}

/// Balance categories by keeping the same number of documents from each
/// (the size of the smallest category), sampled with `seed`.
pub fn balance_documents(records: &[CorpusRecord], seed: u64) -> Vec<CorpusRecord> {
    let mut by_cat: BTreeMap<&str, Vec<&CorpusRecord>> = BTreeMap::new();
    for r in records {
        by_cat.entry(&r.category).or_default().push(r);
    }
    let keep = by_cat.values().map(Vec::len).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<CorpusRecord> = by_cat
        .into_values()
        .flat_map(|mut docs| {
            docs.shuffle(&mut rng);
            docs.truncate(keep);
            docs.into_iter().cloned().collect::<Vec<_>>()
        })
        .collect();
    out.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    out
}

/// A section together with its document's category.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSample {
    pub doc_id: String,
    pub category: String,
    pub metrics: SectionMetrics,
}

/// Sections of all records, optionally restricted to the size filters.
pub fn section_samples(records: &[CorpusRecord], filters: bool) -> Vec<SectionSample> {
    records
        .iter()
        .flat_map(|r| {
            r.sections.iter().filter(move |m| !filters || !m.below_filter()).map(|m| SectionSample {
                doc_id: r.doc_id.clone(),
                category: r.category.clone(),
                metrics: m.clone(),
            })
        })
        .collect()
}

/// Balance categories at section level, sampled with `seed`.
pub fn balance_sections(samples: &[SectionSample], seed: u64) -> Vec<SectionSample> {
    let mut by_cat: BTreeMap<&str, Vec<&SectionSample>> = BTreeMap::new();
    for s in samples {
        by_cat.entry(&s.category).or_default().push(s);
    }
    let keep = by_cat.values().map(Vec::len).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    by_cat
        .into_values()
        .flat_map(|mut v| {
            v.shuffle(&mut rng);
            v.truncate(keep);
            v.into_iter().cloned().collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    /// Column labels, sorted.
    pub categories: [String; 2],
    /// Rows: multiple components, single component.
    pub table: [[f64; 2]; 2],
    pub chi_square: ChiSquareResult,
    /// Empirical P(multiple components) per category.
    pub multi_probability: [f64; 2],
}

impl Contingency {
    pub fn from_counts(categories: [String; 2], table: [[f64; 2]; 2]) -> Result<Self, HarnessError> {
        let chi_square = stats::chi_square_independence(table).map_err(|e| match e {
            StatsError::DegenerateTable => {
                HarnessError::DegenerateTable("a row or column total is zero".into())
            }
            other => HarnessError::DegenerateTable(other.to_string()),
        })?;
        let p = |c: usize| table[0][c] / (table[0][c] + table[1][c]);
        Ok(Self { categories, table, chi_square, multi_probability: [p(0), p(1)] })
    }

    /// One summary line per category, e.g. `Neg: 101/649 = 0.155624`.
    pub fn probability_lines(&self) -> Vec<String> {
        (0..2)
            .map(|c| {
                let multi = self.table[0][c];
                let total = multi + self.table[1][c];
                format!(
                    "{}: {multi}/{total} = {:.8}",
                    self.categories[c], self.multi_probability[c]
                )
            })
            .collect()
    }
}

/// Multiple-vs-single component counts per category and the chi-square test.
pub fn component_contingency(samples: &[SectionSample]) -> Result<Contingency, HarnessError> {
    let cats: BTreeSet<&str> = samples.iter().map(|s| s.category.as_str()).collect();
    if cats.len() != 2 {
        return Err(HarnessError::DegenerateTable(format!(
            "need exactly two categories, found {}",
            cats.len()
        )));
    }
    let cats: Vec<&str> = cats.into_iter().collect();
    let mut table = [[0.0; 2]; 2];
    for s in samples {
        let col = usize::from(s.category == cats[1]);
        let row = usize::from(s.metrics.component_count <= 1);
        table[row][col] += 1.0;
    }
    Contingency::from_counts([cats[0].to_string(), cats[1].to_string()], table)
}

/// SLIC five-number summary per category over sections with defined SLIC.
pub fn slic_summaries(samples: &[SectionSample]) -> BTreeMap<String, FiveNumberSummary> {
    let mut by_cat: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.metrics.slic_defined) {
        by_cat.entry(s.category.clone()).or_default().push(s.metrics.slic);
    }
    by_cat
        .into_iter()
        .filter_map(|(k, v)| stats::five_number_summary(&v).ok().map(|s| (k, s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub index_name: String,
    pub pearson_r: f64,
    pub n: usize,
}

/// Pearson r between SLIC and each external index column, joined on
/// `(doc_id, section_index)`.
pub fn correlate_external<R: Read>(
    samples: &[SectionSample],
    external_csv: R,
) -> Result<Vec<Correlation>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(external_csv);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::MissingColumn(name.to_string()))
    };
    let (doc_col, sec_col) = (col("doc_id")?, col("section_index")?);
    let index_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != doc_col && *i != sec_col)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let slic: BTreeMap<(&str, usize), f64> = samples
        .iter()
        .filter(|s| s.metrics.slic_defined)
        .map(|s| ((s.doc_id.as_str(), s.metrics.section_index), s.metrics.slic))
        .collect();

    let mut xs = Vec::new();
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); index_cols.len()];
    for row in reader.records() {
        let row = row?;
        let Some(section) = row.get(sec_col).and_then(|s| s.parse::<usize>().ok()) else {
            continue;
        };
        let Some(&x) = slic.get(&(row.get(doc_col).unwrap_or(""), section)) else {
            continue;
        };
        let values: Option<Vec<f64>> = index_cols
            .iter()
            .map(|(i, _)| row.get(*i).and_then(|v| v.parse::<f64>().ok()))
            .collect();
        if let Some(values) = values {
            xs.push(x);
            for (col, v) in ys.iter_mut().zip(values) {
                col.push(v);
            }
        }
    }
    if xs.is_empty() {
        return Err(HarnessError::JoinEmpty);
    }

    index_cols
        .into_iter()
        .zip(ys)
        .map(|((_, name), y)| {
            let r = stats::pearson_correlation(&xs, &y).map_err(|e| match e {
                StatsError::ZeroVariance => HarnessError::ZeroVariance(format!("SLIC or {name}")),
                other => HarnessError::ZeroVariance(format!("{name}: {other}")),
            })?;
            Ok(Correlation { index_name: name, pearson_r: r, n: xs.len() })
        })
        .collect()
}

/// Min-max scaled values; all zeros when the range is empty.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// One row per document: id, category, eci, epi, epi_minmax, cci, ici.
pub fn export_metrics_csv<W: Write>(records: &[CorpusRecord], out: W) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    let epi: Vec<f64> = records.iter().map(|r| r.document.epi).collect();
    let scaled = min_max(&epi);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "category", "eci", "epi", "epi_minmax", "cci", "ici"])?;
    for (r, s) in records.iter().zip(scaled) {
        let d = &r.document;
        w.write_record([
            r.doc_id.clone(),
            r.category.clone(),
            d.eci.to_string(),
            d.epi.to_string(),
            s.to_string(),
            d.cci.to_string(),
            d.ici.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_contingency_csv<W: Write>(c: &Contingency, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["components", c.categories[0].as_str(), c.categories[1].as_str()])?;
    for (label, row) in ["multiple", "single"].iter().zip(&c.table) {
        w.write_record([label.to_string(), row[0].to_string(), row[1].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_correlations_csv<W: Write>(rows: &[Correlation], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index_name", "pearson_r", "n"])?;
    for r in rows {
        w.write_record([r.index_name.clone(), r.pearson_r.to_string(), r.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
