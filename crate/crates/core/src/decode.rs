//! Turning generated text back into pairs and quads.
//!
//! Decoding never fails on content: segments that do not fit the expected
//! `key: value, key: value` shape are counted as malformed and dropped.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{Sentiment, IMPLICIT_SURFACE};
use crate::error::Error;
use crate::promptgen::TaskKind;

/// A normalized aspect or opinion term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Null,
    Text(String),
}

impl Term {
    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null)
    }

    pub fn as_str(&self) -> &str {
        match self {
            Term::Null => IMPLICIT_SURFACE,
            Term::Text(text) => text,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Term::Null => serializer.serialize_none(),
            Term::Text(text) => serializer.serialize_str(text),
        }
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match Option::<String>::deserialize(deserializer)? {
            None => Term::Null,
            Some(text) => normalize(&text),
        })
    }
}

/// Lowercases, collapses whitespace and trims punctuation at both ends
/// (unless nothing would be left). `null` in any case becomes [`Term::Null`].
pub fn normalize(value: &str) -> Term {
    let collapsed = value.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let trimmed = collapsed.trim_matches(|c: char| c.is_ascii_punctuation() || is_unicode_punct(c));
    let text = if trimmed.is_empty() {
        collapsed.as_str()
    } else {
        trimmed.trim()
    };
    if text == "null" {
        Term::Null
    } else {
        Term::Text(text.to_string())
    }
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2018}'
            ..='\u{201F}'
                | '\u{2026}'
                | '\u{00AB}'
                | '\u{00BB}'
                | '\u{3001}'
                | '\u{3002}'
                | '\u{FF0C}'
                | '\u{FF01}'
                | '\u{FF1F}'
    )
}

/// Polarity as decoded; unknown strings are kept, never coerced.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredictedSentiment {
    Polarity(Sentiment),
    Unparseable(String),
}

impl PredictedSentiment {
    pub fn parse(value: &str) -> Self {
        let term = normalize(value);
        match term.as_str().parse::<Sentiment>() {
            Ok(sentiment) => PredictedSentiment::Polarity(sentiment),
            Err(_) => PredictedSentiment::Unparseable(term.as_str().to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            PredictedSentiment::Polarity(s) => s.as_str(),
            PredictedSentiment::Unparseable(raw) => raw,
        }
    }
}

impl From<Sentiment> for PredictedSentiment {
    fn from(sentiment: Sentiment) -> Self {
        PredictedSentiment::Polarity(sentiment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairPrediction {
    pub aspect: Term,
    pub opinion: Term,
}

impl PairPrediction {
    pub fn new(aspect: Term, opinion: Term) -> Self {
        Self { aspect, opinion }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuadPrediction {
    pub aspect: Term,
    pub opinion: Term,
    pub category: String,
    pub sentiment: PredictedSentiment,
}

impl QuadPrediction {
    pub fn pair(&self) -> PairPrediction {
        PairPrediction::new(self.aspect.clone(), self.opinion.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("field list is empty")]
    NoFields,
    #[error("field name {0:?} must be non-empty ASCII letters, digits or underscores")]
    BadField(String),
    #[error("field {0:?} is listed twice")]
    DuplicateField(String),
}

/// An ordered list of record keys with a compiled matcher.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    fields: Vec<String>,
    pattern: Regex,
}

impl FieldSpec {
    pub fn new<S: AsRef<str>>(fields: &[S]) -> Result<Self, DecodeError> {
        if fields.is_empty() {
            return Err(DecodeError::NoFields);
        }
        let mut seen = HashSet::new();
        let mut pattern = String::from(r"(?is)^\s*");
        for (i, field) in fields.iter().enumerate() {
            let field = field.as_ref().trim();
            if field.is_empty() || !field.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(DecodeError::BadField(field.to_string()));
            }
            if !seen.insert(field.to_lowercase()) {
                return Err(DecodeError::DuplicateField(field.to_string()));
            }
            if i > 0 {
                pattern.push_str(r",\s*");
            }
            pattern.push_str(&regex::escape(field));
            pattern.push_str(if i + 1 == fields.len() {
                r"\s*:(.*)$"
            } else {
                r"\s*:(.*?)"
            });
        }
        Ok(Self {
            fields: fields.iter().map(|f| f.as_ref().trim().to_lowercase()).collect(),
            pattern: Regex::new(&pattern).expect("field pattern compiles"),
        })
    }

    /// The output fields of `task`; patterns are compiled once per process.
    pub fn for_task(task: TaskKind) -> &'static Self {
        static SPECS: OnceLock<Vec<FieldSpec>> = OnceLock::new();
        let specs = SPECS.get_or_init(|| {
            TaskKind::ALL
                .iter()
                .map(|t| Self::new(t.output_fields()).expect("task fields are valid"))
                .collect()
        });
        let at = TaskKind::ALL
            .iter()
            .position(|&t| t == task)
            .expect("every task is listed");
        &specs[at]
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn position(&self, field: &str) -> Option<usize> {
        self.fields.iter().position(|f| f == field)
    }
}

impl FromStr for FieldSpec {
    type Err = DecodeError;

    /// Comma-separated keys, e.g. `aspect,opinion`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = s.split(',').collect();
        FieldSpec::new(&fields)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Markers that end a generation; they and anything after are dropped.
    pub end_markers: Vec<String>,
    pub empty_literal: String,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            end_markers: vec![
                "<|im_end|>".to_string(),
                "<|eot_id|>".to_string(),
                "<|endoftext|>".to_string(),
                "</s>".to_string(),
                "< | end_of_sentence | >".to_string(),
            ],
            empty_literal: "none".to_string(),
        }
    }
}

/// Raw records: trimmed values in field order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedRecords {
    pub records: Vec<Vec<String>>,
    pub malformed: usize,
}

pub fn strip_end_marker<'a>(text: &'a str, config: &DecodeConfig) -> &'a str {
    let cut = config
        .end_markers
        .iter()
        .filter(|m| !m.is_empty())
        .filter_map(|m| text.find(m.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

pub fn parse_records(text: &str, spec: &FieldSpec, config: &DecodeConfig) -> ParsedRecords {
    let body = strip_end_marker(text, config).trim();
    let mut parsed = ParsedRecords::default();
    if body.is_empty() || body.eq_ignore_ascii_case(&config.empty_literal) {
        return parsed;
    }
    for segment in body.split('|') {
        let segment = segment.trim();
        let values = spec.pattern.captures(segment).map(|caps| {
            caps.iter()
                .skip(1)
                .map(|m| m.map_or("", |m| m.as_str()).trim().to_string())
                .collect::<Vec<_>>()
        });
        match values {
            Some(values) if values.iter().all(|v| !v.is_empty()) => parsed.records.push(values),
            _ => parsed.malformed += 1,
        }
    }
    parsed
}

/// Pairs from an extraction or linking output. `spec` must contain
/// `aspect` and `opinion`.
pub fn decode_pairs(text: &str, spec: &FieldSpec, config: &DecodeConfig) -> (Vec<PairPrediction>, usize) {
    let (a, o) = (
        spec.position("aspect").expect("spec has aspect"),
        spec.position("opinion").expect("spec has opinion"),
    );
    let parsed = parse_records(text, spec, config);
    let mut malformed = parsed.malformed;
    let mut pairs = Vec::with_capacity(parsed.records.len());
    for record in parsed.records {
        let pair = PairPrediction::new(normalize(&record[a]), normalize(&record[o]));
        if pair.aspect.is_null() && pair.opinion.is_null() {
            malformed += 1;
        } else {
            pairs.push(pair);
        }
    }
    (pairs, malformed)
}

pub fn decode_quads(text: &str, config: &DecodeConfig) -> (Vec<QuadPrediction>, usize) {
    let spec = FieldSpec::for_task(TaskKind::ClassifyPairToCS);
    let parsed = parse_records(text, spec, config);
    let quads = parsed
        .records
        .into_iter()
        .map(|r| QuadPrediction {
            aspect: normalize(&r[0]),
            opinion: normalize(&r[1]),
            category: normalize(&r[2]).as_str().to_string(),
            sentiment: PredictedSentiment::parse(&r[3]),
        })
        .collect();
    (quads, parsed.malformed)
}

/// `(element, label)` records from a node-classification output.
pub fn decode_labels(text: &str, task: TaskKind, config: &DecodeConfig) -> (Vec<(Term, String)>, usize) {
    let parsed = parse_records(text, FieldSpec::for_task(task), config);
    let labels = parsed
        .records
        .into_iter()
        .map(|r| (normalize(&r[0]), normalize(&r[1]).as_str().to_string()))
        .collect();
    (labels, parsed.malformed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeStrategy {
    #[default]
    Union,
    Intersection,
}

impl FromStr for MergeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "union" => Ok(MergeStrategy::Union),
            "intersection" => Ok(MergeStrategy::Intersection),
            other => Err(format!("unknown merge strategy {other:?}")),
        }
    }
}

/// Drops repeats, keeping first occurrences in order.
pub fn dedup<T: Clone + Eq + std::hash::Hash>(items: &[T]) -> Vec<T> {
    let mut seen = HashSet::new();
    items.iter().filter(|item| seen.insert(*item)).cloned().collect()
}

/// Combines aspect-first and opinion-first generations.
pub fn merge_bidirectional(
    ao: &[PairPrediction],
    oa: &[PairPrediction],
    strategy: MergeStrategy,
) -> Vec<PairPrediction> {
    match strategy {
        MergeStrategy::Union => {
            let all: Vec<PairPrediction> = ao.iter().chain(oa).cloned().collect();
            dedup(&all)
        }
        MergeStrategy::Intersection => {
            let other: HashSet<&PairPrediction> = oa.iter().collect();
            dedup(ao).into_iter().filter(|p| other.contains(p)).collect()
        }
    }
}

/// Keeps pairs whose terms are NULL or occur in the (normalized) sentence.
pub fn filter_to_sentence(pairs: Vec<PairPrediction>, sentence: &str) -> Vec<PairPrediction> {
    let haystack = format!(" {} ", sentence.to_lowercase());
    let found = |term: &Term| match term {
        Term::Null => true,
        Term::Text(text) => haystack.contains(&format!(" {text} ")) || haystack.contains(text.as_str()),
    };
    pairs
        .into_iter()
        .filter(|p| found(&p.aspect) && found(&p.opinion))
        .collect()
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub sentence_id: String,
    pub task: TaskKind,
    pub raw_output: String,
}

/// One line of a decoded file: normalized values keyed by field, `null`
/// for implicit terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedLine {
    pub sentence_id: String,
    pub task: TaskKind,
    pub predictions: Vec<IndexMap<String, Term>>,
    pub malformed_count: usize,
}

pub fn decode_line(line: &PredictionLine, spec: Option<&FieldSpec>, config: &DecodeConfig) -> DecodedLine {
    let owned;
    let spec = match spec {
        Some(spec) => spec,
        None => {
            owned = FieldSpec::for_task(line.task);
            owned
        }
    };
    let parsed = parse_records(&line.raw_output, spec, config);
    let predictions = parsed
        .records
        .into_iter()
        .map(|record| {
            spec.fields()
                .iter()
                .cloned()
                .zip(record.iter().map(|v| normalize(v)))
                .collect()
        })
        .collect();
    DecodedLine {
        sentence_id: line.sentence_id.clone(),
        task: line.task,
        predictions,
        malformed_count: parsed.malformed,
    }
}

impl DecodedLine {
    pub fn pairs(&self) -> Vec<PairPrediction> {
        self.predictions
            .iter()
            .filter_map(|p| Some(PairPrediction::new(p.get("aspect")?.clone(), p.get("opinion")?.clone())))
            .collect()
    }

    pub fn quads(&self) -> Vec<QuadPrediction> {
        self.predictions
            .iter()
            .filter_map(|p| {
                Some(QuadPrediction {
                    aspect: p.get("aspect")?.clone(),
                    opinion: p.get("opinion")?.clone(),
                    category: p.get("category")?.as_str().to_string(),
                    sentiment: PredictedSentiment::parse(p.get("sentiment")?.as_str()),
                })
            })
            .collect()
    }

    /// Values of one field, in record order.
    pub fn column(&self, field: &str) -> Vec<Option<String>> {
        self.predictions
            .iter()
            .map(|p| p.get(field).map(|t| t.as_str().to_string()))
            .collect()
    }
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), Error> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
