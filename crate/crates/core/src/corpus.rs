//! Annotated sentences, ACOS quad files and CoNLL-U parses.
//!
//! An ACOS line holds a pre-tokenized sentence followed by zero or more
//! tab-separated quad fields of the form `a_begin,a_end CATEGORY polarity
//! o_begin,o_end`. Spans in the file are 0-based and end-exclusive with
//! `-1,-1` for implicit elements; in memory they are 1-based inclusive token
//! ranges so that they line up with CoNLL-U ids (0 is the virtual root).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::syntax::SentenceGraph;

/// Rendering of an implicit aspect or opinion in every template.
pub const IMPLICIT_SURFACE: &str = "NULL";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DependencyEdge {
    /// Token index of the head, 0 for the virtual root.
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

impl DependencyEdge {
    pub fn new(head: usize, dependent: usize, label: impl Into<String>) -> Self {
        Self {
            head,
            dependent,
            label: label.into(),
        }
    }

    pub fn is_root(&self) -> bool {
        self.head == 0
    }
}

/// A 1-based inclusive token range, or an implicit (unexpressed) element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Option<[usize; 2]>", into = "Option<[usize; 2]>")]
pub enum Span {
    Implicit,
    Explicit { begin: usize, end: usize },
}

impl Span {
    pub fn explicit(begin: usize, end: usize) -> Self {
        Span::Explicit { begin, end }
    }

    pub fn single(index: usize) -> Self {
        Span::Explicit {
            begin: index,
            end: index,
        }
    }

    pub fn is_implicit(&self) -> bool {
        matches!(self, Span::Implicit)
    }

    /// Token indices covered by the span; empty for implicit spans.
    pub fn indices(&self) -> std::ops::Range<usize> {
        match *self {
            Span::Implicit => 0..0,
            Span::Explicit { begin, end } => begin..end + 1,
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices().contains(&index)
    }

    pub fn within(&self, token_count: usize) -> bool {
        match *self {
            Span::Implicit => true,
            Span::Explicit { begin, end } => 1 <= begin && begin <= end && end <= token_count,
        }
    }
}

impl From<Option<[usize; 2]>> for Span {
    fn from(value: Option<[usize; 2]>) -> Self {
        match value {
            None => Span::Implicit,
            Some([begin, end]) => Span::Explicit { begin, end },
        }
    }
}

impl From<Span> for Option<[usize; 2]> {
    fn from(span: Span) -> Self {
        match span {
            Span::Implicit => None,
            Span::Explicit { begin, end } => Some([begin, end]),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Span::Implicit => f.write_str("IMPLICIT"),
            Span::Explicit { begin, end } => write!(f, "{begin}..={end}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative,
    Neutral,
    Positive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    pub fn as_str(&self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sentiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative" => Ok(Sentiment::Negative),
            "neutral" => Ok(Sentiment::Neutral),
            "positive" => Ok(Sentiment::Positive),
            other => Err(format!("unknown sentiment {other:?}")),
        }
    }
}

/// Which side of an aspect-opinion pair an element sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Aspect,
    Opinion,
}

impl ElementKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ElementKind::Aspect => "aspect",
            ElementKind::Opinion => "opinion",
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentimentQuad {
    pub aspect: Span,
    pub opinion: Span,
    /// Normalized category label, e.g. `service general`.
    pub category: String,
    pub sentiment: Sentiment,
}

impl SentimentQuad {
    pub fn span(&self, kind: ElementKind) -> Span {
        match kind {
            ElementKind::Aspect => self.aspect,
            ElementKind::Opinion => self.opinion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub id: String,
    pub tokens: Vec<Token>,
    pub quads: Vec<SentimentQuad>,
}

impl AnnotatedSentence {
    /// Tokens joined by single spaces; identical to the source sentence field.
    pub fn text(&self) -> String {
        join_surfaces(&self.tokens)
    }

    /// Surface text of a span, or `NULL` for an implicit one.
    pub fn span_surface(&self, span: Span) -> String {
        match span {
            Span::Implicit => IMPLICIT_SURFACE.to_string(),
            Span::Explicit { begin, end } => join_surfaces(&self.tokens[begin - 1..end]),
        }
    }
}

pub(crate) fn join_surfaces(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, token) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&token.surface);
    }
    out
}

/// Lowercases a dataset category and turns `#` into a single space.
pub fn normalize_category(raw: &str) -> String {
    raw.trim().to_lowercase().replace('#', " ")
}

/// Mapping between the integer polarity codes of a dataset file and sentiments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarityMap {
    codes: BTreeMap<i64, Sentiment>,
}

impl Default for PolarityMap {
    fn default() -> Self {
        Self {
            codes: [
                (0, Sentiment::Negative),
                (1, Sentiment::Neutral),
                (2, Sentiment::Positive),
            ]
            .into_iter()
            .collect(),
        }
    }
}

impl PolarityMap {
    pub fn new(codes: impl IntoIterator<Item = (i64, Sentiment)>) -> Result<Self, String> {
        let codes: BTreeMap<i64, Sentiment> = codes.into_iter().collect();
        let targets: BTreeSet<Sentiment> = codes.values().copied().collect();
        if targets.len() != codes.len() {
            return Err("two codes map to the same sentiment".to_string());
        }
        Ok(Self { codes })
    }

    pub fn sentiment(&self, code: i64) -> Option<Sentiment> {
        self.codes.get(&code).copied()
    }

    pub fn code(&self, sentiment: Sentiment) -> Option<i64> {
        self.codes.iter().find(|(_, s)| **s == sentiment).map(|(code, _)| *code)
    }
}

/// Parses `0=negative,1=neutral,2=positive`.
impl FromStr for PolarityMap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut codes = Vec::new();
        for entry in s.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let (code, name) = entry
                .split_once('=')
                .ok_or_else(|| format!("expected CODE=SENTIMENT, got {entry:?}"))?;
            let code: i64 = code
                .trim()
                .parse()
                .map_err(|_| format!("polarity code {code:?} is not an integer"))?;
            codes.push((code, name.trim().parse::<Sentiment>()?));
        }
        PolarityMap::new(codes)
    }
}

/// The closed category inventory of a dataset, keyed by normalized label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorySet {
    labels: BTreeMap<String, String>,
}

const RESTAURANT_CATEGORIES: [&str; 13] = [
    "AMBIENCE#GENERAL",
    "DRINKS#PRICES",
    "DRINKS#QUALITY",
    "DRINKS#STYLE_OPTIONS",
    "FOOD#GENERAL",
    "FOOD#PRICES",
    "FOOD#QUALITY",
    "FOOD#STYLE_OPTIONS",
    "LOCATION#GENERAL",
    "RESTAURANT#GENERAL",
    "RESTAURANT#MISCELLANEOUS",
    "RESTAURANT#PRICES",
    "SERVICE#GENERAL",
];

impl CategorySet {
    pub fn from_raw<I, S>(raw: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let labels = raw
            .into_iter()
            .map(|label| {
                let label = label.as_ref().trim();
                (normalize_category(label), label.to_string())
            })
            .filter(|(norm, _)| !norm.is_empty())
            .collect();
        Self { labels }
    }

    /// The 13 restaurant categories of the ACOS release.
    pub fn restaurant() -> Self {
        Self::from_raw(RESTAURANT_CATEGORIES)
    }

    /// One raw label per line; blank lines and `#`-prefixed comments are skipped.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_raw(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("# ")),
        ))
    }

    /// Collects every category mentioned in ACOS-formatted text.
    pub fn infer_from_acos(text: &str) -> Self {
        let raw = text.lines().flat_map(|line| {
            line.split('\t')
                .skip(1)
                .filter_map(|field| field.split_whitespace().nth(1))
        });
        Self::from_raw(raw)
    }

    pub fn merge(&mut self, other: CategorySet) {
        self.labels.extend(other.labels);
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.labels.contains_key(normalized)
    }

    /// The dataset spelling of a normalized label.
    pub fn raw_label(&self, normalized: &str) -> Option<&str> {
        self.labels.get(normalized).map(String::as_str)
    }

    pub fn normalized(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn raw_labels(&self) -> Vec<String> {
        self.labels.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Errors raised while reading one ACOS record. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AcosError {
    #[error("line {line}: empty sentence")]
    EmptySentence { line: usize },
    #[error("line {line}: empty token at position {position} (tokens are separated by single spaces)")]
    EmptyToken { line: usize, position: usize },
    #[error("line {line}: malformed quad field {field:?}: {reason}")]
    MalformedField { line: usize, field: String, reason: String },
    #[error("line {line}: span {span:?} in field {field:?} is outside the {token_count}-token sentence")]
    SpanOutOfRange {
        line: usize,
        field: String,
        span: String,
        token_count: usize,
    },
    #[error("line {line}: sentiment index {index} out of range in field {field:?}")]
    SentimentIndex { line: usize, field: String, index: i64 },
    #[error("line {line}: unknown category {category:?}; known categories: {}", known.join(", "))]
    UnknownCategory {
        line: usize,
        category: String,
        known: Vec<String>,
    },
}

/// How an ACOS file encodes polarity and which categories it may use.
#[derive(Debug, Clone, Default)]
pub struct AcosFormat {
    pub polarity: PolarityMap,
    pub categories: CategorySet,
}

impl AcosFormat {
    pub fn new(polarity: PolarityMap, categories: CategorySet) -> Self {
        Self { polarity, categories }
    }
}

/// Parses one ACOS line. The sentence id defaults to the line number.
pub fn parse_acos_line(line: &str, line_no: usize, format: &AcosFormat) -> Result<AnnotatedSentence, AcosError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut fields = line.split('\t');
    let sentence = fields.next().unwrap_or_default();
    if sentence.is_empty() {
        return Err(AcosError::EmptySentence { line: line_no });
    }

    let mut tokens = Vec::new();
    for (i, surface) in sentence.split(' ').enumerate() {
        if surface.is_empty() {
            return Err(AcosError::EmptyToken {
                line: line_no,
                position: i + 1,
            });
        }
        tokens.push(Token {
            index: i + 1,
            surface: surface.to_string(),
        });
    }

    let quads = fields
        .filter(|field| !field.trim().is_empty())
        .map(|field| parse_quad_field(field, line_no, tokens.len(), format))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(AnnotatedSentence {
        id: line_no.to_string(),
        tokens,
        quads,
    })
}

fn parse_quad_field(
    field: &str,
    line: usize,
    token_count: usize,
    format: &AcosFormat,
) -> Result<SentimentQuad, AcosError> {
    let malformed = |reason: &str| AcosError::MalformedField {
        line,
        field: field.to_string(),
        reason: reason.to_string(),
    };
    let parts: Vec<&str> = field.split_whitespace().collect();
    let [aspect, category, polarity, opinion] = parts[..] else {
        return Err(malformed("expected 4 space-separated parts"));
    };

    let span = |text: &str| -> Result<Span, AcosError> {
        let (begin, end) = text
            .split_once(',')
            .ok_or_else(|| malformed("span must be BEGIN,END"))?;
        let begin: i64 = begin.parse().map_err(|_| malformed("span bound is not an integer"))?;
        let end: i64 = end.parse().map_err(|_| malformed("span bound is not an integer"))?;
        if begin == -1 && end == -1 {
            return Ok(Span::Implicit);
        }
        if begin < 0 || end <= begin || end as usize > token_count {
            return Err(AcosError::SpanOutOfRange {
                line,
                field: field.to_string(),
                span: text.to_string(),
                token_count,
            });
        }
        Ok(Span::explicit(begin as usize + 1, end as usize))
    };

    let aspect = span(aspect)?;
    let opinion = span(opinion)?;

    let code: i64 = polarity
        .parse()
        .map_err(|_| malformed("sentiment index is not an integer"))?;
    let sentiment = format
        .polarity
        .sentiment(code)
        .ok_or_else(|| AcosError::SentimentIndex {
            line,
            field: field.to_string(),
            index: code,
        })?;

    let normalized = normalize_category(category);
    if !format.categories.contains(&normalized) {
        return Err(AcosError::UnknownCategory {
            line,
            category: category.to_string(),
            known: format.categories.raw_labels(),
        });
    }

    Ok(SentimentQuad {
        aspect,
        opinion,
        category: normalized,
        sentiment,
    })
}

/// Inverse of [`parse_acos_line`]: renders the sentence back to ACOS text.
pub fn to_acos_line(sentence: &AnnotatedSentence, format: &AcosFormat) -> Result<String, String> {
    let mut line = sentence.text();
    for quad in &sentence.quads {
        let span = |span: Span| match span {
            Span::Implicit => "-1,-1".to_string(),
            Span::Explicit { begin, end } => format!("{},{}", begin - 1, end),
        };
        let category = format
            .categories
            .raw_label(&quad.category)
            .ok_or_else(|| format!("category {:?} not in category set", quad.category))?;
        let code = format
            .polarity
            .code(quad.sentiment)
            .ok_or_else(|| format!("no code for sentiment {}", quad.sentiment))?;
        line.push('\t');
        line.push_str(&format!(
            "{} {} {} {}",
            span(quad.aspect),
            category,
            code,
            span(quad.opinion)
        ));
    }
    Ok(line)
}

/// Reads a whole ACOS file. Sentence ids are `<file stem>:<line number>`.
pub fn load_acos(path: &Path, format: &AcosFormat) -> Result<Vec<AnnotatedSentence>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_acos(&text, &stem, format).map_err(|source| Error::Acos {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses ACOS text; blank lines are skipped but still counted for line numbers.
pub fn parse_acos(text: &str, id_prefix: &str, format: &AcosFormat) -> Result<Vec<AnnotatedSentence>, AcosError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            let mut sentence = parse_acos_line(line, i + 1, format)?;
            sentence.id = format!("{id_prefix}:{}", i + 1);
            Ok(sentence)
        })
        .collect()
}

/// Loads several ACOS files in parallel, keeping file order.
pub fn load_acos_files<P: AsRef<Path> + Sync>(
    paths: &[P],
    format: &AcosFormat,
) -> Result<Vec<Vec<AnnotatedSentence>>, Error> {
    paths.par_iter().map(|path| load_acos(path.as_ref(), format)).collect()
}

/// Tokens and dependency edges of one CoNLL-U sentence block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSentence {
    pub tokens: Vec<Token>,
    pub edges: Vec<DependencyEdge>,
    /// 1-based line number of the block's first token line.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConlluError {
    #[error("line {line}: expected 10 tab-separated columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("line {line}: token id {id:?} is not an integer")]
    BadId { line: usize, id: String },
    #[error("line {line}: token id {found} breaks the contiguous sequence (expected {expected})")]
    NonContiguous { line: usize, expected: usize, found: usize },
    #[error("line {line}: HEAD {head:?} is not an integer")]
    NonIntegerHead { line: usize, head: String },
    #[error("line {line}: HEAD {head} refers to a missing token (sentence has {token_count})")]
    DanglingHead {
        line: usize,
        head: usize,
        token_count: usize,
    },
    #[error("line {line}: token {id} is its own head")]
    SelfLoop { line: usize, id: usize },
    #[error("line {line}: empty FORM")]
    EmptyForm { line: usize },
}

/// Parses CoNLL-U text. Multiword-token ranges (`3-4`) and empty nodes
/// (`5.1`) are skipped; only ID, FORM, HEAD and DEPREL are read.
pub fn parse_conllu(text: &str) -> Result<Vec<ParsedSentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut block: Vec<(usize, Token, String, String)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !block.is_empty() {
                sentences.push(finish_block(std::mem::take(&mut block))?);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 10 {
            return Err(ConlluError::Columns {
                line: line_no,
                found: columns.len(),
            });
        }
        let id = columns[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let index: usize = id.parse().map_err(|_| ConlluError::BadId {
            line: line_no,
            id: id.to_string(),
        })?;
        if index != block.len() + 1 {
            return Err(ConlluError::NonContiguous {
                line: line_no,
                expected: block.len() + 1,
                found: index,
            });
        }
        if columns[1].is_empty() {
            return Err(ConlluError::EmptyForm { line: line_no });
        }
        block.push((
            line_no,
            Token {
                index,
                surface: columns[1].to_string(),
            },
            columns[6].to_string(),
            columns[7].to_string(),
        ));
    }
    if !block.is_empty() {
        sentences.push(finish_block(block)?);
    }
    Ok(sentences)
}

fn finish_block(block: Vec<(usize, Token, String, String)>) -> Result<ParsedSentence, ConlluError> {
    let token_count = block.len();
    let first_line = block[0].0;
    let mut tokens = Vec::with_capacity(token_count);
    let mut edges = Vec::with_capacity(token_count);
    for (line, token, head, label) in block {
        let head_index: usize = head.parse().map_err(|_| ConlluError::NonIntegerHead {
            line,
            head: head.clone(),
        })?;
        if head_index > token_count {
            return Err(ConlluError::DanglingHead {
                line,
                head: head_index,
                token_count,
            });
        }
        if head_index == token.index {
            return Err(ConlluError::SelfLoop { line, id: token.index });
        }
        edges.push(DependencyEdge::new(head_index, token.index, label));
        tokens.push(token);
    }
    Ok(ParsedSentence {
        tokens,
        edges,
        line: first_line,
    })
}

pub fn load_conllu(path: &Path) -> Result<Vec<ParsedSentence>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu(&text).map_err(|source| Error::Conllu {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes minimal CoNLL-U (unused columns as `_`).
pub fn write_conllu(sentences: &[ParsedSentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        for (token, edge) in sentence.tokens.iter().zip(&sentence.edges) {
            out.push_str(&format!(
                "{}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t_\n",
                token.index, token.surface, edge.head, edge.label
            ));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseMode {
    #[default]
    Sensitive,
    Insensitive,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlignError {
    #[error("sentence {sentence_id}: token {position} differs ({annotated:?} vs parsed {parsed:?})")]
    Surface {
        sentence_id: String,
        position: usize,
        annotated: String,
        parsed: String,
    },
    #[error("sentence {sentence_id}: token counts differ ({annotated} annotated vs {parsed} parsed), first divergence at position {position}")]
    Count {
        sentence_id: String,
        position: usize,
        annotated: usize,
        parsed: usize,
    },
    #[error("sentence {sentence_id}: {source}")]
    Graph {
        sentence_id: String,
        #[source]
        source: crate::syntax::GraphError,
    },
}

/// Attaches a dependency parse to an annotated sentence.
pub fn align(
    sentence: &AnnotatedSentence,
    parse: &ParsedSentence,
    case: CaseMode,
) -> Result<SentenceGraph, AlignError> {
    let same = |a: &str, b: &str| match case {
        CaseMode::Sensitive => a == b,
        CaseMode::Insensitive => a.to_lowercase() == b.to_lowercase(),
    };
    for (i, (ours, theirs)) in sentence.tokens.iter().zip(&parse.tokens).enumerate() {
        if !same(&ours.surface, &theirs.surface) {
            return Err(AlignError::Surface {
                sentence_id: sentence.id.clone(),
                position: i + 1,
                annotated: ours.surface.clone(),
                parsed: theirs.surface.clone(),
            });
        }
    }
    let (annotated, parsed) = (sentence.tokens.len(), parse.tokens.len());
    if annotated != parsed {
        return Err(AlignError::Count {
            sentence_id: sentence.id.clone(),
            position: annotated.min(parsed) + 1,
            annotated,
            parsed,
        });
    }
    SentenceGraph::new(sentence.clone(), parse.edges.clone()).map_err(|source| AlignError::Graph {
        sentence_id: sentence.id.clone(),
        source,
    })
}

/// Aligns sentence lists pairwise; both lists must have the same length.
pub fn align_all(
    sentences: &[AnnotatedSentence],
    parses: &[ParsedSentence],
    case: CaseMode,
) -> Result<Vec<SentenceGraph>, Error> {
    if sentences.len() != parses.len() {
        return Err(Error::SentenceCount {
            annotated: sentences.len(),
            parsed: parses.len(),
        });
    }
    sentences
        .par_iter()
        .zip(parses)
        .map(|(sentence, parse)| align(sentence, parse, case).map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub quad_count: usize,
    pub implicit_aspect_count: usize,
    pub implicit_opinion_count: usize,
    pub category_histogram: BTreeMap<String, usize>,
    pub sentiment_histogram: BTreeMap<String, usize>,
}

pub fn corpus_stats<'a>(sentences: impl IntoIterator<Item = &'a AnnotatedSentence>) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for sentence in sentences {
        stats.sentence_count += 1;
        for quad in &sentence.quads {
            stats.quad_count += 1;
            stats.implicit_aspect_count += quad.aspect.is_implicit() as usize;
            stats.implicit_opinion_count += quad.opinion.is_implicit() as usize;
            *stats.category_histogram.entry(quad.category.clone()).or_default() += 1;
            *stats.sentiment_histogram.entry(quad.sentiment.to_string()).or_default() += 1;
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED_LINE: &str = "service ok but unfriendly , filthy bathroom .\t0,1 SERVICE#GENERAL 0 1,2\t0,1 SERVICE#GENERAL 0 3,4\t6,7 AMBIENCE#GENERAL 0 5,6";

    fn restaurant() -> AcosFormat {
        AcosFormat::new(PolarityMap::default(), CategorySet::restaurant())
    }

    #[test]
    fn parses_single_quad_line() {
        let line = "service ok but unfriendly , filthy bathroom .\t0,1 SERVICE#GENERAL 0 1,2";
        let sentence = parse_acos_line(line, 1, &restaurant()).unwrap();
        assert_eq!(sentence.tokens.len(), 8);
        assert_eq!(sentence.quads.len(), 1);
        let quad = &sentence.quads[0];
        assert_eq!(sentence.span_surface(quad.aspect), "service");
        assert_eq!(sentence.span_surface(quad.opinion), "ok");
        assert_eq!(quad.category, "service general");
        assert_eq!(quad.sentiment, Sentiment::Negative);
    }

    #[test]
    fn parses_worked_sentence_into_three_quads() {
        let sentence = parse_acos_line(WORKED_LINE, 1, &restaurant()).unwrap();
        let rendered: Vec<_> = sentence
            .quads
            .iter()
            .map(|q| {
                (
                    sentence.span_surface(q.aspect),
                    sentence.span_surface(q.opinion),
                    q.category.as_str(),
                    q.sentiment,
                )
            })
            .collect();
        assert_eq!(
            rendered,
            vec![
                ("service".into(), "ok".into(), "service general", Sentiment::Negative),
                (
                    "service".into(),
                    "unfriendly".into(),
                    "service general",
                    Sentiment::Negative
                ),
                (
                    "bathroom".into(),
                    "filthy".into(),
                    "ambience general",
                    Sentiment::Negative
                ),
            ]
        );
    }

    #[test]
    fn empty_annotation() {
        let sentence = parse_acos_line("hello .\t", 3, &restaurant()).unwrap();
        assert_eq!(sentence.tokens.len(), 2);
        assert!(sentence.quads.is_empty());
        let bare = parse_acos_line("hello .", 3, &restaurant()).unwrap();
        assert_eq!(bare, sentence);
    }

    #[test]
    fn implicit_spans() {
        let sentence = parse_acos_line("great !\t-1,-1 FOOD#QUALITY 2 0,1", 1, &restaurant()).unwrap();
        assert_eq!(sentence.quads[0].aspect, Span::Implicit);
        assert_eq!(sentence.quads[0].opinion, Span::single(1));
        assert_eq!(sentence.span_surface(Span::Implicit), "NULL");
    }

    #[test]
    fn sentiment_index_out_of_range() {
        let err = parse_acos_line("service ok\t0,1 SERVICE#GENERAL 7 1,2", 4, &restaurant()).unwrap_err();
        assert_eq!(
            err,
            AcosError::SentimentIndex {
                line: 4,
                field: "0,1 SERVICE#GENERAL 7 1,2".into(),
                index: 7
            }
        );
    }

    #[test]
    fn malformed_and_out_of_range_fields() {
        let fmt = restaurant();
        assert!(matches!(
            parse_acos_line("a b\t0,1 SERVICE#GENERAL", 2, &fmt),
            Err(AcosError::MalformedField { line: 2, .. })
        ));
        assert!(matches!(
            parse_acos_line("a b\tx,1 SERVICE#GENERAL 0 1,2", 2, &fmt),
            Err(AcosError::MalformedField { .. })
        ));
        assert!(matches!(
            parse_acos_line("a b\t0,3 SERVICE#GENERAL 0 1,2", 2, &fmt),
            Err(AcosError::SpanOutOfRange { token_count: 2, .. })
        ));
        assert!(matches!(
            parse_acos_line("a b\t1,1 SERVICE#GENERAL 0 1,2", 2, &fmt),
            Err(AcosError::SpanOutOfRange { .. })
        ));
        assert!(matches!(
            parse_acos_line("a  b", 2, &fmt),
            Err(AcosError::EmptyToken { position: 2, .. })
        ));
    }

    #[test]
    fn unknown_category_lists_the_set() {
        let err = parse_acos_line("a b\t0,1 PIZZA#GENERAL 0 1,2", 1, &restaurant()).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("PIZZA#GENERAL"));
        assert!(message.contains("SERVICE#GENERAL"));
        assert!(message.contains("FOOD#STYLE_OPTIONS"));
    }

    #[test]
    fn acos_round_trip() {
        let fmt = restaurant();
        let sentence = parse_acos_line(WORKED_LINE, 1, &fmt).unwrap();
        assert_eq!(to_acos_line(&sentence, &fmt).unwrap(), WORKED_LINE);
        assert_eq!(sentence.text(), WORKED_LINE.split('\t').next().unwrap());
    }

    #[test]
    fn polarity_map_parses_and_rejects_duplicates() {
        let map: PolarityMap = "0=positive, 1=negative, 2=neutral".parse().unwrap();
        assert_eq!(map.sentiment(0), Some(Sentiment::Positive));
        assert_eq!(map.code(Sentiment::Neutral), Some(2));
        assert!("0=positive,1=positive".parse::<PolarityMap>().is_err());
        assert!("0:positive".parse::<PolarityMap>().is_err());
    }

    #[test]
    fn category_inference() {
        let set = CategorySet::infer_from_acos(
            "a b\t0,1 LAPTOP#GENERAL 2 1,2\t0,1 BATTERY#OPERATION_PERFORMANCE 0 1,2\nc d\n",
        );
        assert_eq!(
            set.normalized().collect::<Vec<_>>(),
            vec!["battery operation_performance", "laptop general"]
        );
        assert_eq!(set.raw_label("laptop general"), Some("LAPTOP#GENERAL"));
    }

    #[test]
    fn conllu_minimal_tree() {
        let text = "# text = hi !\n1\thi\t_\t_\t_\t_\t0\troot\t_\t_\n2\t!\t_\t_\t_\t_\t1\tpunct\t_\t_\n";
        let parsed = parse_conllu(text).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].tokens.len(), 2);
        assert_eq!(
            parsed[0].edges,
            vec![DependencyEdge::new(0, 1, "root"), DependencyEdge::new(1, 2, "punct")]
        );
    }

    #[test]
    fn conllu_empty_file() {
        assert!(parse_conllu("").unwrap().is_empty());
        assert!(parse_conllu("\n\n# only comments\n").unwrap().is_empty());
    }

    #[test]
    fn conllu_skips_multiword_and_empty_nodes() {
        let text = "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tdo\t_\t_\t_\t_\t0\troot\t_\t_\n2\tn't\t_\t_\t_\t_\t1\tadvmod\t_\t_\n2.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n\n1\tok\t_\t_\t_\t_\t0\troot\t_\t_\n";
        let parsed = parse_conllu(text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].tokens.len(), 2);
        assert_eq!(parsed[1].line, 6);
    }

    #[test]
    fn conllu_errors() {
        let dangling =
            "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t5\tdep\t_\t_\n3\tc\t_\t_\t_\t_\t1\tdep\t_\t_\n";
        assert_eq!(
            parse_conllu(dangling).unwrap_err(),
            ConlluError::DanglingHead {
                line: 2,
                head: 5,
                token_count: 3
            }
        );
        let non_int = "1\ta\t_\t_\t_\t_\tx\troot\t_\t_\n";
        assert_eq!(
            parse_conllu(non_int).unwrap_err(),
            ConlluError::NonIntegerHead {
                line: 1,
                head: "x".into()
            }
        );
        assert!(matches!(
            parse_conllu("1\ta\t0\troot\n"),
            Err(ConlluError::Columns { found: 4, .. })
        ));
        assert!(matches!(
            parse_conllu("1\ta\t_\t_\t_\t_\t1\troot\t_\t_\n"),
            Err(ConlluError::SelfLoop { .. })
        ));
    }

    fn parse_for(words: &[&str]) -> ParsedSentence {
        let tokens: Vec<Token> = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token {
                index: i + 1,
                surface: w.to_string(),
            })
            .collect();
        let edges = (1..=words.len())
            .map(|i| DependencyEdge::new(i - 1, i, if i == 1 { "root" } else { "dep" }))
            .collect();
        ParsedSentence { tokens, edges, line: 1 }
    }

    #[test]
    fn align_identical_sequences() {
        let sentence = parse_acos_line(WORKED_LINE, 1, &restaurant()).unwrap();
        let words: Vec<&str> = WORKED_LINE.split('\t').next().unwrap().split(' ').collect();
        let graph = align(&sentence, &parse_for(&words), CaseMode::Sensitive).unwrap();
        assert_eq!(graph.len(), 8);
    }

    #[test]
    fn align_count_mismatch_names_position() {
        let sentence = parse_acos_line(WORKED_LINE, 1, &restaurant()).unwrap();
        let mut words: Vec<&str> = WORKED_LINE.split('\t').next().unwrap().split(' ').collect();
        words.push("!");
        let err = align(&sentence, &parse_for(&words), CaseMode::Sensitive).unwrap_err();
        assert!(matches!(
            err,
            AlignError::Count {
                position: 9,
                annotated: 8,
                parsed: 9,
                ..
            }
        ));
    }

    #[test]
    fn align_case_insensitive() {
        let sentence = parse_acos_line("the pizza", 1, &restaurant()).unwrap();
        let parse = parse_for(&["The", "Pizza"]);
        let err = align(&sentence, &parse, CaseMode::Sensitive).unwrap_err();
        assert!(matches!(err, AlignError::Surface { position: 1, .. }));
        let graph = align(&sentence, &parse, CaseMode::Insensitive).unwrap();
        // the annotated surfaces are kept
        assert_eq!(graph.tokens()[1].surface, "pizza");
    }

    #[test]
    fn stats_counts() {
        let fmt = restaurant();
        let sentences = vec![
            parse_acos_line(WORKED_LINE, 1, &fmt).unwrap(),
            parse_acos_line("great !\t-1,-1 FOOD#QUALITY 2 0,1", 2, &fmt).unwrap(),
            parse_acos_line("hello .", 3, &fmt).unwrap(),
        ];
        let stats = corpus_stats(&sentences);
        assert_eq!(stats.sentence_count, 3);
        assert_eq!(stats.quad_count, 4);
        assert_eq!(stats.implicit_aspect_count, 1);
        assert_eq!(stats.implicit_opinion_count, 0);
        assert_eq!(stats.category_histogram["service general"], 2);
        assert_eq!(stats.sentiment_histogram["negative"], 3);
        assert_eq!(stats.category_histogram.values().sum::<usize>(), stats.quad_count);
        assert_eq!(stats.sentiment_histogram.values().sum::<usize>(), stats.quad_count);
        assert_eq!(corpus_stats(&[]), CorpusStats::default());
    }
}
