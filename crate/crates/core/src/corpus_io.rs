//! Document ingestion: parsing, optional cleaning, sentence segmentation and
//! tokenization.
//!
//! The canonical input is JSON (`{"id", "sections": [{"heading", "text"}]}`).
//! Plain text is also accepted, with sections separated by a delimiter line
//! (`===` by default).

use std::{
    path::Path,
    str::FromStr,
    sync::OnceLock,
};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

/// Default plain-text section delimiter line.
pub const DEFAULT_DELIMITER: &str = "===";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("document {0:?} has no non-empty section")]
    EmptyDocument(String),
    #[error("unknown input format {0:?} (expected json or plain)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Json,
    Plain,
}

impl FromStr for InputFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "plain" | "txt" | "text" => Ok(Self::Plain),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

impl InputFormat {
    /// Guess the format from a file extension; anything but `.json` is plain.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    /// 1-based position within the section.
    pub index: usize,
    pub raw: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    /// 1-based position within the document.
    pub index: usize,
    pub heading: Option<String>,
    pub sentences: Vec<Sentence>,
}

impl Section {
    /// A section is empty when cleaning and segmentation left no sentence.
    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    /// The section text reassembled from its sentences.
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.raw.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn non_empty_sections(&self) -> impl Iterator<Item = &Section> {
        self.sections.iter().filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Deserialize)]
struct RawDocument {
    id: String,
    sections: Vec<RawSection>,
}

#[derive(Debug, Deserialize)]
struct RawSection {
    #[serde(default)]
    heading: Option<String>,
    text: String,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Plain-text section delimiter (a whole line, compared after trimming).
    pub delimiter: String,
    /// Strip heading, caption and equation lines before segmentation.
    pub clean: bool,
    pub segmenter: Segmenter,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: DEFAULT_DELIMITER.to_string(),
            clean: false,
            segmenter: Segmenter::default(),
        }
    }
}

pub fn load_document(path: &Path, format: InputFormat) -> Result<Document, CorpusError> {
    load_document_with(path, format, &LoadOptions::default())
}

pub fn load_document_with(
    path: &Path,
    format: InputFormat,
    options: &LoadOptions,
) -> Result<Document, CorpusError> {
    let content = std::fs::read_to_string(path).map_err(|source| CorpusError::Read {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        InputFormat::Json => parse_json_document(&content, options),
        InputFormat::Plain => {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("document")
                .to_string();
            parse_plain_document(&id, &content, options)
        }
    }
}

pub fn parse_json_document(content: &str, options: &LoadOptions) -> Result<Document, CorpusError> {
    let raw: RawDocument =
        serde_json::from_str(content).map_err(|e| CorpusError::Parse(e.to_string()))?;
    let sections = raw
        .sections
        .into_iter()
        .map(|s| (s.heading, s.text))
        .collect();
    assemble(raw.id, sections, options)
}

pub fn parse_plain_document(
    id: &str,
    content: &str,
    options: &LoadOptions,
) -> Result<Document, CorpusError> {
    let mut chunks: Vec<String> = vec![String::new()];
    for line in content.lines() {
        if line.trim() == options.delimiter {
            chunks.push(String::new());
        } else {
            let current = chunks.last_mut().expect("at least one chunk");
            current.push_str(line);
            current.push('\n');
        }
    }
    let sections = chunks
        .into_iter()
        .filter(|c| !c.trim().is_empty())
        .map(|c| (None, c))
        .collect();
    assemble(id.to_string(), sections, options)
}

fn assemble(
    id: String,
    sections: Vec<(Option<String>, String)>,
    options: &LoadOptions,
) -> Result<Document, CorpusError> {
    let sections: Vec<Section> = sections
        .into_iter()
        .enumerate()
        .map(|(i, (heading, text))| {
            let text = if options.clean { clean_text(&text) } else { text };
            Section {
                index: i + 1,
                heading,
                sentences: options.segmenter.segment(&text),
            }
        })
        .collect();
    if sections.iter().all(Section::is_empty) {
        return Err(CorpusError::EmptyDocument(id));
    }
    Ok(Document { id, sections })
}

/// Best-effort removal of headings, captions and display equations.
pub fn clean_text(text: &str) -> String {
    static PATTERNS: OnceLock<[Regex; 4]> = OnceLock::new();
    let [markdown_heading, numbered_heading, caption, equation] = PATTERNS.get_or_init(|| {
        [
            Regex::new(r"^\s*#{1,6}\s").unwrap(),
            Regex::new(r"^\s*\d+(\.\d+)*\.?\s+\S[^.!?]*$").unwrap(),
            Regex::new(r"(?i)^\s*(figure|fig\.|table|tab\.)\s*\d+[a-z]?\s*[.:]").unwrap(),
            Regex::new(r"^\s*(\$\$|\\\[|\\\]|\\begin\{|\\end\{)").unwrap(),
        ]
    });

    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let trimmed = line.trim();
        let words = trimmed.split_whitespace().count();
        let is_heading = markdown_heading.is_match(line)
            || (numbered_heading.is_match(line) && words <= 10)
            || is_title_line(trimmed, words);
        let alpha = trimmed.chars().filter(|c| c.is_alphabetic()).count();
        let mathy = trimmed.chars().count() > 3 && (alpha as f64) < 0.3 * trimmed.chars().count() as f64;
        if is_heading || caption.is_match(line) || equation.is_match(line) || mathy {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn is_title_line(line: &str, words: usize) -> bool {
    if words == 0 || words > 8 || line.ends_with(['.', '?', '!', ',', ';', ':']) {
        return false;
    }
    line.split_whitespace().all(|w| {
        w.chars()
            .next()
            .map(|c| c.is_uppercase() || !c.is_alphabetic())
            .unwrap_or(true)
    })
}

/// Lowercased word tokens: maximal alphanumeric runs, with hyphens kept
/// when they join two alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if c == '-'
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push('-');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Rule-based sentence splitter with an abbreviation stop-list.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: Vec<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Self {
            abbreviations: parse_word_list(DEFAULT_ABBREVIATIONS),
        }
    }
}

impl Segmenter {
    /// Add abbreviations (e.g. read from a user file) to the stop-list.
    pub fn with_abbreviations<I, S>(mut self, extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for a in extra {
            let a = a.as_ref().trim().to_lowercase();
            if !a.is_empty() && !self.abbreviations.contains(&a) {
                self.abbreviations.push(a);
            }
        }
        self
    }

    pub fn abbreviations(&self) -> &[String] {
        &self.abbreviations
    }

    /// Split on `.`, `?` or `!` (optionally followed by closing quotes or
    /// brackets) when the next non-space character is an uppercase letter,
    /// unless the period closes a known abbreviation.
    pub fn segment(&self, text: &str) -> Vec<Sentence> {
        let chars: Vec<char> = text.chars().collect();
        let n = chars.len();
        let mut pieces = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while i < n {
            if !is_terminator(chars[i]) {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < n && is_terminator(chars[j]) {
                j += 1;
            }
            while j < n && is_closer(chars[j]) {
                j += 1;
            }
            let single_period = chars[i] == '.' && j == i + 1;
            let boundary = if j >= n {
                true
            } else if chars[j].is_whitespace() {
                let mut k = j;
                while k < n && chars[k].is_whitespace() {
                    k += 1;
                }
                while k < n && is_opener(chars[k]) {
                    k += 1;
                }
                k >= n || chars[k].is_uppercase()
            } else {
                false
            };
            if boundary && !(single_period && self.ends_with_abbreviation(&chars[start..j])) {
                pieces.push(normalize_whitespace(&chars[start..j]));
                start = j;
            }
            i = j;
        }
        if start < n {
            pieces.push(normalize_whitespace(&chars[start..]));
        }

        pieces
            .into_iter()
            .filter(|p| p.chars().any(char::is_alphanumeric))
            .enumerate()
            .map(|(idx, raw)| Sentence {
                index: idx + 1,
                tokens: tokenize(&raw),
                raw,
            })
            .collect()
    }

    fn ends_with_abbreviation(&self, piece: &[char]) -> bool {
        let text = normalize_whitespace(piece).to_lowercase();
        self.abbreviations.iter().any(|abbr| {
            text.strip_suffix(abbr.as_str()).is_some_and(|before| {
                before
                    .chars()
                    .next_back()
                    .is_none_or(|c| !c.is_alphanumeric())
            })
        })
    }
}

/// Segment with the default abbreviation list.
pub fn segment_sentences(text: &str) -> Vec<Sentence> {
    static DEFAULT: OnceLock<Segmenter> = OnceLock::new();
    DEFAULT.get_or_init(Segmenter::default).segment(text)
}

/// Non-empty, non-`#` lines of a word list, trimmed and lowercased.
pub fn parse_word_list(content: &str) -> Vec<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

fn normalize_whitespace(chars: &[char]) -> String {
    let s: String = chars.iter().collect();
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
