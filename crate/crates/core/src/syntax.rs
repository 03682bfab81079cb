//! Dependency graphs and their textual descriptions.
//!
//! The global description lists every retained edge as a
//! `<head> modify|depend <dependent>` clause in dependent order; the local
//! description names the k-hop neighbourhood of one aspect or opinion span.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    join_surfaces, AnnotatedSentence, DependencyEdge, ElementKind, SentimentQuad, Span, Token, IMPLICIT_SURFACE,
};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("token at position {position} has index {found}")]
    TokenIndex { position: usize, found: usize },
    #[error("token {index} has an empty surface or contains a tab/newline")]
    BadSurface { index: usize },
    #[error("edge into {dependent}: dependent is not a token")]
    DependentOutOfRange { dependent: usize },
    #[error("edge into {dependent}: head {head} is not a token")]
    HeadOutOfRange { dependent: usize, head: usize },
    #[error("token {dependent} is its own head")]
    SelfLoop { dependent: usize },
    #[error("token {dependent} has no head")]
    MissingHead { dependent: usize },
    #[error("token {dependent} has more than one head")]
    MultipleHeads { dependent: usize },
    #[error("token {dependent} does not reach the root (cycle)")]
    Cycle { dependent: usize },
    #[error("quad {quad} has span {span} outside the {token_count}-token sentence")]
    QuadSpan {
        quad: usize,
        span: Span,
        token_count: usize,
    },
}

/// An annotated sentence with a validated single-head dependency tree.
///
/// Edges are stored sorted by dependent, so `edges()[i]` is the head edge of
/// token `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct SentenceGraph {
    sentence: AnnotatedSentence,
    edges: Vec<DependencyEdge>,
}

impl SentenceGraph {
    pub fn new(sentence: AnnotatedSentence, mut edges: Vec<DependencyEdge>) -> Result<Self, GraphError> {
        let n = sentence.tokens.len();
        for (i, token) in sentence.tokens.iter().enumerate() {
            if token.index != i + 1 {
                return Err(GraphError::TokenIndex {
                    position: i + 1,
                    found: token.index,
                });
            }
            if token.surface.is_empty() || token.surface.contains(['\t', '\n', '\r']) {
                return Err(GraphError::BadSurface { index: token.index });
            }
        }

        let mut seen = vec![false; n];
        for edge in &edges {
            let d = edge.dependent;
            if d == 0 || d > n {
                return Err(GraphError::DependentOutOfRange { dependent: d });
            }
            if edge.head > n {
                return Err(GraphError::HeadOutOfRange {
                    dependent: d,
                    head: edge.head,
                });
            }
            if edge.head == d {
                return Err(GraphError::SelfLoop { dependent: d });
            }
            if std::mem::replace(&mut seen[d - 1], true) {
                return Err(GraphError::MultipleHeads { dependent: d });
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(GraphError::MissingHead { dependent: missing + 1 });
        }
        edges.sort_by_key(|e| e.dependent);

        // every token must reach the virtual root
        let mut state = vec![0u8; n + 1]; // 0 unknown, 1 on path, 2 reaches root
        state[0] = 2;
        for start in 1..=n {
            let mut path = Vec::new();
            let mut node = start;
            while state[node] == 0 {
                state[node] = 1;
                path.push(node);
                node = edges[node - 1].head;
            }
            if state[node] == 1 {
                return Err(GraphError::Cycle { dependent: node });
            }
            for p in path {
                state[p] = 2;
            }
        }

        for (i, quad) in sentence.quads.iter().enumerate() {
            for span in [quad.aspect, quad.opinion] {
                if !span.within(n) {
                    return Err(GraphError::QuadSpan {
                        quad: i,
                        span,
                        token_count: n,
                    });
                }
            }
        }

        Ok(Self { sentence, edges })
    }

    pub fn id(&self) -> &str {
        &self.sentence.id
    }

    pub fn sentence(&self) -> &AnnotatedSentence {
        &self.sentence
    }

    pub fn tokens(&self) -> &[Token] {
        &self.sentence.tokens
    }

    pub fn edges(&self) -> &[DependencyEdge] {
        &self.edges
    }

    pub fn quads(&self) -> &[SentimentQuad] {
        &self.sentence.quads
    }

    pub fn len(&self) -> usize {
        self.sentence.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.sentence.text()
    }

    /// Surface of token `index` (1-based).
    pub fn surface(&self, index: usize) -> &str {
        &self.sentence.tokens[index - 1].surface
    }

    pub fn span_surface(&self, span: Span) -> String {
        self.sentence.span_surface(span)
    }

    /// Head edge of token `index`.
    pub fn head_edge(&self, index: usize) -> &DependencyEdge {
        &self.edges[index - 1]
    }

    /// Copy of this graph with a different annotation list.
    pub fn with_quads(&self, quads: Vec<SentimentQuad>) -> Result<Self, GraphError> {
        let mut sentence = self.sentence.clone();
        sentence.quads = quads;
        Self::new(sentence, self.edges.clone())
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct GraphRecord {
    id: String,
    tokens: Vec<String>,
    /// `[head, dependent, label]`
    edges: Vec<(usize, usize, String)>,
    quads: Vec<SentimentQuad>,
}

impl TryFrom<GraphRecord> for SentenceGraph {
    type Error = GraphError;

    fn try_from(record: GraphRecord) -> Result<Self, Self::Error> {
        let tokens = record
            .tokens
            .into_iter()
            .enumerate()
            .map(|(i, surface)| Token { index: i + 1, surface })
            .collect();
        let edges = record
            .edges
            .into_iter()
            .map(|(head, dependent, label)| DependencyEdge { head, dependent, label })
            .collect();
        SentenceGraph::new(
            AnnotatedSentence {
                id: record.id,
                tokens,
                quads: record.quads,
            },
            edges,
        )
    }
}

impl From<SentenceGraph> for GraphRecord {
    fn from(graph: SentenceGraph) -> Self {
        GraphRecord {
            id: graph.sentence.id,
            tokens: graph.sentence.tokens.into_iter().map(|t| t.surface).collect(),
            edges: graph
                .edges
                .into_iter()
                .map(|e| (e.head, e.dependent, e.label))
                .collect(),
            quads: graph.sentence.quads,
        }
    }
}

/// Writes graphs as JSON lines, one sentence per line.
pub fn write_corpus(graphs: &[SentenceGraph], path: &Path) -> Result<(), Error> {
    let mut out = String::new();
    for graph in graphs {
        out.push_str(&serde_json::to_string(graph).expect("graph serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path) -> Result<Vec<SentenceGraph>, Error> {
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

/// Surface word used for a dependency label in the global description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationWord {
    Modify,
    Depend,
    /// The edge is left out of descriptions and adjacency.
    Skip,
}

impl RelationWord {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelationWord::Modify => "modify",
            RelationWord::Depend => "depend",
            RelationWord::Skip => "skip",
        }
    }
}

const MODIFIER_LABELS: [&str; 9] = [
    "amod", "advmod", "nmod", "nummod", "appos", "acl", "advcl", "det", "compound",
];

/// Dependency label to relation word. Subtyped labels (`nmod:poss`) fall
/// back to their base label when not listed themselves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationMap {
    #[serde(default = "default_word")]
    pub default: RelationWord,
    #[serde(default)]
    pub labels: BTreeMap<String, RelationWord>,
}

fn default_word() -> RelationWord {
    RelationWord::Depend
}

impl Default for RelationMap {
    fn default() -> Self {
        let mut labels: BTreeMap<String, RelationWord> = MODIFIER_LABELS
            .iter()
            .map(|l| (l.to_string(), RelationWord::Modify))
            .collect();
        labels.insert("punct".to_string(), RelationWord::Skip);
        Self {
            default: RelationWord::Depend,
            labels,
        }
    }
}

impl RelationMap {
    /// Maps every label to `depend` and keeps all edges.
    pub fn retain_all() -> Self {
        let mut map = Self::default();
        map.labels.remove("punct");
        map
    }

    pub fn word(&self, label: &str) -> RelationWord {
        let label = label.to_lowercase();
        if let Some(word) = self.labels.get(&label) {
            return *word;
        }
        label
            .split_once(':')
            .and_then(|(base, _)| self.labels.get(base))
            .copied()
            .unwrap_or(self.default)
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("relation map serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|message| Error::Config {
            path: path.to_path_buf(),
            message,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SyntaxStyle {
    /// `head modify dependent` clauses.
    #[serde(rename = "nl")]
    NaturalLanguage,
    /// Bracketed tree, `(head (child) ...)`.
    #[serde(rename = "symbol")]
    Symbol,
}

impl fmt::Display for SyntaxStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntaxStyle::NaturalLanguage => "nl",
            SyntaxStyle::Symbol => "symbol",
        })
    }
}

impl FromStr for SyntaxStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nl" | "nl-syn" => Ok(SyntaxStyle::NaturalLanguage),
            "symbol" | "symbol-syn" => Ok(SyntaxStyle::Symbol),
            other => Err(format!("unknown syntax style {other:?} (expected nl or symbol)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyntaxError {
    #[error("hop count must be positive")]
    ZeroHops,
    #[error("span {span} is outside the {token_count}-token sentence")]
    SpanOutOfRange { span: Span, token_count: usize },
}

/// A graph seen through a relation map: relation words per edge and the
/// symmetric adjacency matrix over retained non-root edges.
#[derive(Debug, Clone)]
pub struct SyntaxView<'g> {
    graph: &'g SentenceGraph,
    /// Relation word of each token's head edge, by dependent index - 1.
    words: Vec<RelationWord>,
    /// Row-major n x n over 0-based token positions.
    adjacency: Vec<bool>,
}

impl<'g> SyntaxView<'g> {
    pub fn new(graph: &'g SentenceGraph, relations: &RelationMap) -> Self {
        let n = graph.len();
        let words: Vec<RelationWord> = graph.edges().iter().map(|e| relations.word(&e.label)).collect();
        let mut adjacency = vec![false; n * n];
        for (edge, word) in graph.edges().iter().zip(&words) {
            if edge.is_root() || *word == RelationWord::Skip {
                continue;
            }
            let (h, d) = (edge.head - 1, edge.dependent - 1);
            adjacency[h * n + d] = true;
            adjacency[d * n + h] = true;
        }
        Self {
            graph,
            words,
            adjacency,
        }
    }

    pub fn graph(&self) -> &'g SentenceGraph {
        self.graph
    }

    /// Whether tokens `i` and `j` (1-based) share a retained edge.
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        let n = self.graph.len();
        self.adjacency[(i - 1) * n + (j - 1)]
    }

    /// Relation word for the head edge of token `dependent`.
    pub fn word(&self, dependent: usize) -> RelationWord {
        self.words[dependent - 1]
    }

    /// Retained edges in dependent order, with their relation words. The
    /// root edge is always retained.
    pub fn clauses(&self) -> impl Iterator<Item = (&'g DependencyEdge, RelationWord)> + '_ {
        self.graph
            .edges()
            .iter()
            .zip(self.words.iter().copied())
            .filter(|(edge, word)| edge.is_root() || *word != RelationWord::Skip)
    }

    pub fn serialize_global(&self, style: SyntaxStyle) -> String {
        match style {
            SyntaxStyle::NaturalLanguage => self
                .clauses()
                .map(|(edge, word)| {
                    let dependent = self.graph.surface(edge.dependent);
                    if edge.is_root() {
                        format!("root depend {dependent}")
                    } else {
                        format!("{} {} {}", self.graph.surface(edge.head), word.as_str(), dependent)
                    }
                })
                .collect::<Vec<_>>()
                .join(" | "),
            SyntaxStyle::Symbol => self.bracketed(),
        }
    }

    fn bracketed(&self) -> String {
        let n = self.graph.len();
        let mut children = vec![Vec::new(); n + 1];
        let mut detached = vec![false; n + 1];
        for (edge, word) in self.graph.edges().iter().zip(&self.words) {
            if edge.is_root() || *word == RelationWord::Skip {
                detached[edge.dependent] = true;
            } else {
                children[edge.head].push(edge.dependent);
            }
        }
        // roots, plus the heads of subtrees hanging off a skipped edge
        let tops: Vec<usize> = (1..=n)
            .filter(|&t| {
                let edge = self.graph.head_edge(t);
                detached[t] && (edge.is_root() || !children[t].is_empty())
            })
            .collect();

        let mut out = String::new();
        for (i, top) in tops.into_iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            self.write_bracket(top, &children, &mut out);
        }
        out
    }

    fn write_bracket(&self, node: usize, children: &[Vec<usize>], out: &mut String) {
        out.push('(');
        out.push_str(self.graph.surface(node));
        for &child in &children[node] {
            out.push(' ');
            self.write_bracket(child, children, out);
        }
        out.push(')');
    }

    /// Tokens within `hops` adjacency steps of the span, excluding the span
    /// itself, in sentence order. Implicit spans have no neighbours.
    pub fn neighbors(&self, span: Span, hops: usize) -> Result<Vec<usize>, SyntaxError> {
        if hops == 0 {
            return Err(SyntaxError::ZeroHops);
        }
        let n = self.graph.len();
        if !span.within(n) {
            return Err(SyntaxError::SpanOutOfRange { span, token_count: n });
        }
        if span.is_implicit() {
            return Ok(Vec::new());
        }
        let mut reached = vec![false; n + 1];
        let mut frontier: Vec<usize> = span.indices().collect();
        for &t in &frontier {
            reached[t] = true;
        }
        for _ in 0..hops {
            let mut next = Vec::new();
            for &t in &frontier {
                for (other, seen) in reached.iter_mut().enumerate().skip(1) {
                    if !*seen && self.adjacent(t, other) {
                        *seen = true;
                        next.push(other);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok((1..=n).filter(|&t| reached[t] && !span.contains(t)).collect())
    }

    /// Local description of one aspect or opinion.
    pub fn serialize_subgraph(
        &self,
        kind: ElementKind,
        span: Span,
        hops: usize,
        style: SyntaxStyle,
    ) -> Result<String, SyntaxError> {
        let neighbors = self.neighbors(span, hops)?;
        let surface = self.graph.span_surface(span);
        let names: Vec<&str> = neighbors.iter().map(|&t| self.graph.surface(t)).collect();
        Ok(match style {
            SyntaxStyle::NaturalLanguage => describe_neighborhood(kind, &surface, &names, hops),
            SyntaxStyle::Symbol => bracket_neighborhood(kind, &surface, &names),
        })
    }
}

/// `<kind>: <surface>, which is connected to (a, b) within one hop.`
pub fn describe_neighborhood(kind: ElementKind, surface: &str, neighbors: &[&str], hops: usize) -> String {
    if neighbors.is_empty() {
        return format!("{kind}: {surface}, which has no syntactic neighbors.");
    }
    let within = if hops == 1 {
        "within one hop.".to_string()
    } else {
        format!("within {hops} hops.")
    };
    format!(
        "{kind}: {surface}, which is connected to ({}) {within}",
        neighbors.join(", ")
    )
}

/// `<kind>: (<surface> (a) (b))`
pub fn bracket_neighborhood(kind: ElementKind, surface: &str, neighbors: &[&str]) -> String {
    let mut out = format!("{kind}: ({surface}");
    for name in neighbors {
        out.push_str(&format!(" ({name})"));
    }
    out.push(')');
    out
}

/// Surface of a span as it appears in templates.
pub fn span_text(tokens: &[Token], span: Span) -> String {
    match span {
        Span::Implicit => IMPLICIT_SURFACE.to_string(),
        Span::Explicit { begin, end } => join_surfaces(&tokens[begin - 1..end]),
    }
}
