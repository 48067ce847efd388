//! Sequential-coherence scoring and entity embeddings.
//!
//! Two providers implement [`SemanticProvider`]:
//!
//! * [`SurrogateProvider`] is deterministic and dependency-free. Pair scores
//!   are cosine similarities of content-token frequency vectors (range
//!   `[0, 1]`, where a transformer would return logits; only the ordering of
//!   scores matters to the outlier filter downstream). Embeddings are
//!   positive-PMI context vectors over a ±3 content-token window, hashed into
//!   a fixed number of dimensions.
//! * [`RemoteProvider`] talks to an HTTP sidecar (`/v1/health`, `/v1/nsp`,
//!   `/v1/embed`). Failures are reported, never replaced by surrogate output.

use std::{
    collections::{BTreeMap, HashSet},
    sync::OnceLock,
    time::Duration,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_io::{parse_word_list, tokenize, Section};

const STOP_WORDS: &str = include_str!("../data/stopwords.txt");

/// Dimension of surrogate embedding vectors.
pub const SURROGATE_DIM: usize = 1024;
/// Half-width of the surrogate co-occurrence window, in content tokens.
pub const SURROGATE_WINDOW: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("section {section} has {count} sentence(s); at least 2 are needed to score pairs")]
    TooFewSentences { section: usize, count: usize },
    #[error("entity {entity:?} does not occur in section {section}")]
    EntityAbsent { section: usize, entity: String },
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceScore {
    /// 1-based index of the pair (sentence k, sentence k + 1).
    pub pair_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityEmbedding {
    pub entity: String,
    pub vector: Vec<f64>,
    /// Number of occurrences averaged into `vector`.
    pub context_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub coherence: bool,
    pub embedding: bool,
}

/// Metadata reported by `GET /v1/health`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderMetadata {
    pub name: String,
    pub dim: usize,
    pub model: String,
}

/// Source of pair coherence scores and contextual entity embeddings.
///
/// Implementations must be deterministic for a fixed configuration and safe
/// to call from several threads.
pub trait SemanticProvider: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    /// Length of every vector returned by [`Self::embed_entities`].
    fn dim(&self) -> usize;

    /// One score per consecutive sentence pair, in order.
    fn score_pairs(&self, section: &Section) -> Result<Vec<CoherenceScore>, SemanticsError>;

    /// One embedding per entity, in the order given.
    fn embed_entities(
        &self,
        section: &Section,
        entities: &[String],
    ) -> Result<Vec<EntityEmbedding>, SemanticsError>;
}

pub fn stop_words() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| parse_word_list(STOP_WORDS).into_iter().collect())
}

pub fn is_stop_word(token: &str) -> bool {
    stop_words().contains(token)
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

/// Start positions of `phrase` as a contiguous subsequence of `tokens`.
pub fn find_phrase(tokens: &[String], phrase: &[String]) -> Vec<usize> {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return Vec::new();
    }
    (0..=tokens.len() - phrase.len())
        .filter(|&i| tokens[i..i + phrase.len()] == *phrase)
        .collect()
}

fn check_pairs(section: &Section) -> Result<(), SemanticsError> {
    if section.sentences.len() < 2 {
        return Err(SemanticsError::TooFewSentences {
            section: section.index,
            count: section.sentences.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct SurrogateProvider;

impl SurrogateProvider {
    pub fn new() -> Self {
        Self
    }

    fn content_tf(tokens: &[String]) -> BTreeMap<&str, f64> {
        let mut tf = BTreeMap::new();
        for t in tokens.iter().filter(|t| !is_stop_word(t)) {
            *tf.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
        tf
    }

    /// Cosine similarity of the content-token frequency vectors of two
    /// token sequences.
    pub fn pair_score(a: &[String], b: &[String]) -> f64 {
        let ta = Self::content_tf(a);
        let tb = Self::content_tf(b);
        let dot = ta
            .iter()
            .filter_map(|(k, x)| tb.get(k).map(|y| x * y))
            .fold(0.0, |acc, v| acc + v);
        let na: f64 = ta.values().map(|x| x * x).sum();
        let nb: f64 = tb.values().map(|x| x * x).sum();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            (dot / (na * nb).sqrt()).clamp(0.0, 1.0)
        }
    }
}

fn bucket(token: &str) -> usize {
    // FNV-1a, 64 bit
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (h % SURROGATE_DIM as u64) as usize
}

/// Occurrence of an entity within the content-token view of a sentence.
struct Mention {
    sentence: usize,
    /// Span in content-token positions.
    start: usize,
    end: usize,
}

impl SemanticProvider for SurrogateProvider {
    fn name(&self) -> &str {
        "surrogate"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            coherence: true,
            embedding: true,
        }
    }

    fn dim(&self) -> usize {
        SURROGATE_DIM
    }

    fn score_pairs(&self, section: &Section) -> Result<Vec<CoherenceScore>, SemanticsError> {
        check_pairs(section)?;
        Ok(section
            .sentences
            .windows(2)
            .enumerate()
            .map(|(i, w)| CoherenceScore {
                pair_index: i + 1,
                score: Self::pair_score(&w[0].tokens, &w[1].tokens),
            })
            .collect())
    }

    fn embed_entities(
        &self,
        section: &Section,
        entities: &[String],
    ) -> Result<Vec<EntityEmbedding>, SemanticsError> {
        let content: Vec<Vec<&str>> = section
            .sentences
            .iter()
            .map(|s| {
                s.tokens
                    .iter()
                    .filter(|t| !is_stop_word(t))
                    .map(String::as_str)
                    .collect()
            })
            .collect();

        // Section-wide co-occurrence marginals over single content tokens.
        let mut context_total: BTreeMap<&str, f64> = BTreeMap::new();
        let mut pair_total = 0.0;
        for sent in &content {
            for (i, _) in sent.iter().enumerate() {
                for c in window(sent, i, i + 1) {
                    *context_total.entry(c).or_insert(0.0) += 1.0;
                    pair_total += 1.0;
                }
            }
        }

        entities
            .iter()
            .map(|entity| {
                let phrase: Vec<String> = tokenize(entity);
                let phrase_content: Vec<&str> = phrase
                    .iter()
                    .filter(|t| !is_stop_word(t))
                    .map(String::as_str)
                    .collect();
                let mentions = find_mentions(&content, &phrase_content);
                if mentions.is_empty() || phrase_content.is_empty() {
                    return Err(SemanticsError::EntityAbsent {
                        section: section.index,
                        entity: entity.clone(),
                    });
                }

                let mut joint: BTreeMap<&str, f64> = BTreeMap::new();
                for m in &mentions {
                    for c in window(&content[m.sentence], m.start, m.end) {
                        *joint.entry(c).or_insert(0.0) += 1.0;
                    }
                }
                let entity_total: f64 = joint.values().sum();
                let ppmi = |c: &str| -> f64 {
                    let j = joint.get(c).copied().unwrap_or(0.0);
                    let ct = context_total.get(c).copied().unwrap_or(0.0);
                    if j == 0.0 || ct == 0.0 || entity_total == 0.0 {
                        return 0.0;
                    }
                    (j * pair_total / (entity_total * ct)).ln().max(0.0)
                };

                let mut vector = vec![0.0; SURROGATE_DIM];
                for m in &mentions {
                    for c in window(&content[m.sentence], m.start, m.end) {
                        vector[bucket(c)] += ppmi(c);
                    }
                }
                let count = mentions.len();
                for v in &mut vector {
                    *v /= count as f64;
                }
                Ok(EntityEmbedding {
                    entity: entity.clone(),
                    vector,
                    context_count: count,
                })
            })
            .collect()
    }
}

/// Content tokens within `SURROGATE_WINDOW` positions of the span
/// `[start, end)`, excluding the span itself.
fn window<'a>(sent: &[&'a str], start: usize, end: usize) -> impl Iterator<Item = &'a str> + 'a {
    let lo = start.saturating_sub(SURROGATE_WINDOW);
    let hi = (end + SURROGATE_WINDOW).min(sent.len());
    let before: Vec<&'a str> = sent[lo..start].to_vec();
    let after: Vec<&'a str> = sent[end.min(hi)..hi].to_vec();
    before.into_iter().chain(after)
}

fn find_mentions(content: &[Vec<&str>], phrase: &[&str]) -> Vec<Mention> {
    let mut out = Vec::new();
    if phrase.is_empty() {
        return out;
    }
    for (s, sent) in content.iter().enumerate() {
        if sent.len() < phrase.len() {
            continue;
        }
        for i in 0..=sent.len() - phrase.len() {
            if sent[i..i + phrase.len()] == *phrase {
                out.push(Mention {
                    sentence: s,
                    start: i,
                    end: i + phrase.len(),
                });
            }
        }
    }
    out
}

#[derive(Serialize)]
struct NspPair<'a> {
    a: &'a str,
    b: &'a str,
}

#[derive(Serialize)]
struct NspRequest<'a> {
    pairs: Vec<NspPair<'a>>,
}

#[derive(Deserialize)]
struct NspResponse {
    scores: Vec<f64>,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    context: &'a str,
    entities: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

fn unavailable(endpoint: &str, e: impl std::fmt::Display) -> SemanticsError {
    SemanticsError::ProviderUnavailable(format!("{endpoint}: {e}"))
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(120)))
        .build()
        .into()
}

/// Query `GET /v1/health` and validate the returned metadata.
pub fn remote_health_check(endpoint: &str) -> Result<ProviderMetadata, SemanticsError> {
    health_with(&agent(), endpoint)
}

fn health_with(agent: &ureq::Agent, endpoint: &str) -> Result<ProviderMetadata, SemanticsError> {
    let url = format!("{}/v1/health", endpoint.trim_end_matches('/'));
    let meta: ProviderMetadata = agent
        .get(&url)
        .call()
        .map_err(|e| unavailable(endpoint, e))?
        .body_mut()
        .read_json()
        .map_err(|e| unavailable(endpoint, e))?;
    if meta.dim == 0 {
        return Err(unavailable(endpoint, "health check reported vector length 0"));
    }
    Ok(meta)
}

/// Client for the HTTP sidecar.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    endpoint: String,
    metadata: ProviderMetadata,
    agent: ureq::Agent,
}

impl RemoteProvider {
    /// Connect and run the health check; fails fast if the sidecar is not
    /// reachable or reports invalid metadata.
    pub fn connect(endpoint: &str) -> Result<Self, SemanticsError> {
        let agent = agent();
        let metadata = health_with(&agent, endpoint)?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            metadata,
            agent,
        })
    }

    pub fn metadata(&self) -> &ProviderMetadata {
        &self.metadata
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, SemanticsError> {
        let url = format!("{}{}", self.endpoint, path);
        self.agent
            .post(&url)
            .send_json(body)
            .map_err(|e| unavailable(&url, e))?
            .body_mut()
            .read_json()
            .map_err(|e| unavailable(&url, e))
    }
}

impl SemanticProvider for RemoteProvider {
    fn name(&self) -> &str {
        &self.metadata.name
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            coherence: true,
            embedding: true,
        }
    }

    fn dim(&self) -> usize {
        self.metadata.dim
    }

    fn score_pairs(&self, section: &Section) -> Result<Vec<CoherenceScore>, SemanticsError> {
        check_pairs(section)?;
        let pairs = section
            .sentences
            .windows(2)
            .map(|w| NspPair {
                a: &w[0].raw,
                b: &w[1].raw,
            })
            .collect::<Vec<_>>();
        let expected = pairs.len();
        let resp: NspResponse = self.post("/v1/nsp", &NspRequest { pairs })?;
        if resp.scores.len() != expected || resp.scores.iter().any(|s| !s.is_finite()) {
            return Err(unavailable(
                &self.endpoint,
                format!("expected {expected} finite scores, got {}", resp.scores.len()),
            ));
        }
        Ok(resp
            .scores
            .into_iter()
            .enumerate()
            .map(|(i, score)| CoherenceScore {
                pair_index: i + 1,
                score,
            })
            .collect())
    }

    fn embed_entities(
        &self,
        section: &Section,
        entities: &[String],
    ) -> Result<Vec<EntityEmbedding>, SemanticsError> {
        let mut counts = Vec::with_capacity(entities.len());
        for e in entities {
            let phrase = tokenize(e);
            let n: usize = section
                .sentences
                .iter()
                .map(|s| find_phrase(&s.tokens, &phrase).len())
                .sum();
            if n == 0 {
                return Err(SemanticsError::EntityAbsent {
                    section: section.index,
                    entity: e.clone(),
                });
            }
            counts.push(n);
        }
        if entities.is_empty() {
            return Ok(Vec::new());
        }
        let context = section.text();
        let resp: EmbedResponse = self.post(
            "/v1/embed",
            &EmbedRequest {
                context: &context,
                entities,
            },
        )?;
        let dim = self.metadata.dim;
        if resp.dim != dim
            || resp.vectors.len() != entities.len()
            || resp.vectors.iter().any(|v| v.len() != dim)
        {
            return Err(unavailable(
                &self.endpoint,
                format!(
                    "embedding shape mismatch: {} vectors of dim {} for {} entities (health dim {dim})",
                    resp.vectors.len(),
                    resp.dim,
                    entities.len()
                ),
            ));
        }
        Ok(entities
            .iter()
            .zip(resp.vectors)
            .zip(counts)
            .map(|((entity, vector), context_count)| EntityEmbedding {
                entity: entity.clone(),
                vector,
                context_count,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::segment_sentences;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn section(text: &str) -> Section {
        Section {
            index: 1,
            heading: None,
            sentences: segment_sentences(text),
        }
    }

    #[test]
    fn identical_and_disjoint_pairs() {
        let s = section("Graphs model text. Graphs model text. Birds fly south.");
        let scores = SurrogateProvider.score_pairs(&s).unwrap();
        assert_eq!(scores.len(), 2);
        assert_abs_diff_eq!(scores[0].score, 1.0, epsilon = 1e-15);
        assert_eq!(scores[1].score, 0.0);
        assert_eq!(scores[1].pair_index, 2);
    }

    #[test]
    fn stop_words_are_ignored_in_scores() {
        // {cat, sat} vs {cat, slept}: dot 1, norms sqrt(2) each
        let s = section("The cat sat. The cat slept.");
        let scores = SurrogateProvider.score_pairs(&s).unwrap();
        assert_abs_diff_eq!(scores[0].score, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn too_few_sentences() {
        let s = section("Only one sentence here.");
        assert_eq!(
            SurrogateProvider.score_pairs(&s),
            Err(SemanticsError::TooFewSentences { section: 1, count: 1 })
        );
    }

    #[test]
    fn single_occurrence_embedding_is_its_context() {
        let s = section("Kernel methods map data. Graphs carry edges.");
        let e = SurrogateProvider
            .embed_entities(&s, &["kernel".to_string()])
            .unwrap();
        assert_eq!(e[0].context_count, 1);
        assert_eq!(e[0].vector.len(), SURROGATE_DIM);
        // contexts of "kernel": methods, map, data — all with positive PPMI
        let nonzero = e[0].vector.iter().filter(|v| **v > 0.0).count();
        assert!(nonzero >= 1 && nonzero <= 3);
    }

    #[test]
    fn identical_neighbourhoods_give_cosine_one() {
        // alpha and beta each co-occur once with gamma and delta only:
        // joint counts (1, 1), entity totals 2, identical PPMI vectors.
        let s = section("Alpha gamma delta. Beta gamma delta.");
        let e = SurrogateProvider
            .embed_entities(&s, &["alpha".to_string(), "beta".to_string()])
            .unwrap();
        assert_abs_diff_eq!(cosine(&e[0].vector, &e[1].vector), 1.0, epsilon = 1e-12);
        assert!(e[0].vector.iter().any(|v| *v > 0.0));
    }

    #[test]
    fn absent_entity_is_an_error() {
        let s = section("Alpha gamma delta.");
        assert_eq!(
            SurrogateProvider.embed_entities(&s, &["omega".to_string()]),
            Err(SemanticsError::EntityAbsent {
                section: 1,
                entity: "omega".into()
            })
        );
    }

    #[test]
    fn multi_word_entities_are_matched_as_phrases() {
        let s = section("Neural networks learn. Deep neural networks generalize well.");
        let e = SurrogateProvider
            .embed_entities(&s, &["neural networks".to_string()])
            .unwrap();
        assert_eq!(e[0].context_count, 2);
    }

    #[test]
    fn cosine_edge_cases() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(cosine(&[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 1.0, 0.0]), 0.5);
        assert_abs_diff_eq!(cosine(&[1.0, 0.0], &[-1.0, 0.0]), -1.0);
    }

    #[test]
    fn unreachable_sidecar_fails_fast() {
        let r = remote_health_check("http://127.0.0.1:9");
        assert!(matches!(r, Err(SemanticsError::ProviderUnavailable(_))));
    }

    proptest! {
        #[test]
        fn pair_scores_symmetric_and_bounded(
            a in prop::collection::vec("[a-e]{1,3}", 0..12),
            b in prop::collection::vec("[a-e]{1,3}", 0..12),
        ) {
            let x = SurrogateProvider::pair_score(&a, &b);
            let y = SurrogateProvider::pair_score(&b, &a);
            prop_assert_eq!(x.to_bits(), y.to_bits());
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn cosine_is_bounded(
            a in prop::collection::vec(-10f64..10.0, 4),
            b in prop::collection::vec(-10f64..10.0, 4),
        ) {
            let c = cosine(&a, &b);
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
