//! Instruction-tuning records for the nine extraction, linking and
//! classification tasks.
//!
//! Every record is `(instruction, input, output)`. Instructions and input
//! layouts come from a [`TemplateSet`]; outputs are `" | "`-joined records
//! such as `aspect: service, opinion: ok`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ElementKind, SentimentQuad, Span};
use crate::decode::{normalize, Term};
use crate::error::Error;
use crate::syntax::{
    bracket_neighborhood, describe_neighborhood, RelationMap, SentenceGraph, SyntaxError, SyntaxStyle, SyntaxView,
};

/// Separator between records in outputs, candidate lists and subgraph blocks.
pub const RECORD_SEPARATOR: &str = " | ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "extract_ao")]
    ExtractAO,
    #[serde(rename = "extract_oa")]
    ExtractOA,
    #[serde(rename = "link_a2o")]
    LinkAtoO,
    #[serde(rename = "link_o2a")]
    LinkOtoA,
    #[serde(rename = "classify_pair")]
    ClassifyPairToCS,
    #[serde(rename = "classify_a2c")]
    ClassifyAtoC,
    #[serde(rename = "classify_a2s")]
    ClassifyAtoS,
    #[serde(rename = "classify_o2c")]
    ClassifyOtoC,
    #[serde(rename = "classify_o2s")]
    ClassifyOtoS,
}

/// Which side of a pair is written (or given) first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "ao")]
    AspectFirst,
    #[serde(rename = "oa")]
    OpinionFirst,
}

impl Direction {
    pub fn first(&self) -> ElementKind {
        match self {
            Direction::AspectFirst => ElementKind::Aspect,
            Direction::OpinionFirst => ElementKind::Opinion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeTarget {
    Category,
    Sentiment,
}

impl NodeTarget {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeTarget::Category => "category",
            NodeTarget::Sentiment => "sentiment",
        }
    }
}

/// Training step a task belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Extraction,
    Classification,
}

impl TaskKind {
    pub const ALL: [TaskKind; 9] = [
        TaskKind::ExtractAO,
        TaskKind::ExtractOA,
        TaskKind::LinkAtoO,
        TaskKind::LinkOtoA,
        TaskKind::ClassifyPairToCS,
        TaskKind::ClassifyAtoC,
        TaskKind::ClassifyAtoS,
        TaskKind::ClassifyOtoC,
        TaskKind::ClassifyOtoS,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::ExtractAO => "extract_ao",
            TaskKind::ExtractOA => "extract_oa",
            TaskKind::LinkAtoO => "link_a2o",
            TaskKind::LinkOtoA => "link_o2a",
            TaskKind::ClassifyPairToCS => "classify_pair",
            TaskKind::ClassifyAtoC => "classify_a2c",
            TaskKind::ClassifyAtoS => "classify_a2s",
            TaskKind::ClassifyOtoC => "classify_o2c",
            TaskKind::ClassifyOtoS => "classify_o2s",
        }
    }

    /// Human-readable task header, e.g. `(extract aspect, opinion)`.
    pub fn header(&self) -> &'static str {
        match self {
            TaskKind::ExtractAO => "(extract aspect, opinion)",
            TaskKind::ExtractOA => "(extract opinion, aspect)",
            TaskKind::LinkAtoO => "(linking aspect to opinion)",
            TaskKind::LinkOtoA => "(linking opinion to aspect)",
            TaskKind::ClassifyPairToCS => "(classification (aspect, opinion) to (category, sentiment))",
            TaskKind::ClassifyAtoC => "(classification aspect to category)",
            TaskKind::ClassifyAtoS => "(classification aspect to sentiment)",
            TaskKind::ClassifyOtoC => "(classification opinion to category)",
            TaskKind::ClassifyOtoS => "(classification opinion to sentiment)",
        }
    }

    /// Keys of one output record, in order.
    pub fn output_fields(&self) -> &'static [&'static str] {
        match self {
            TaskKind::ExtractAO | TaskKind::LinkAtoO => &["aspect", "opinion"],
            TaskKind::ExtractOA | TaskKind::LinkOtoA => &["opinion", "aspect"],
            TaskKind::ClassifyPairToCS => &["aspect", "opinion", "category", "sentiment"],
            TaskKind::ClassifyAtoC => &["aspect", "category"],
            TaskKind::ClassifyAtoS => &["aspect", "sentiment"],
            TaskKind::ClassifyOtoC => &["opinion", "category"],
            TaskKind::ClassifyOtoS => &["opinion", "sentiment"],
        }
    }

    pub fn step(&self) -> Step {
        match self {
            TaskKind::ExtractAO | TaskKind::ExtractOA | TaskKind::LinkAtoO | TaskKind::LinkOtoA => Step::Extraction,
            _ => Step::Classification,
        }
    }

    /// Main tasks of the two-stage flow; the rest are auxiliary.
    pub fn is_main(&self) -> bool {
        matches!(
            self,
            TaskKind::ExtractAO | TaskKind::ExtractOA | TaskKind::ClassifyPairToCS
        )
    }

    pub fn direction(&self) -> Option<Direction> {
        match self {
            TaskKind::ExtractAO | TaskKind::LinkAtoO => Some(Direction::AspectFirst),
            TaskKind::ExtractOA | TaskKind::LinkOtoA => Some(Direction::OpinionFirst),
            _ => None,
        }
    }

    pub fn extraction(direction: Direction) -> Self {
        match direction {
            Direction::AspectFirst => TaskKind::ExtractAO,
            Direction::OpinionFirst => TaskKind::ExtractOA,
        }
    }

    /// Element and target of a node-classification task.
    pub fn node(&self) -> Option<(ElementKind, NodeTarget)> {
        match self {
            TaskKind::ClassifyAtoC => Some((ElementKind::Aspect, NodeTarget::Category)),
            TaskKind::ClassifyAtoS => Some((ElementKind::Aspect, NodeTarget::Sentiment)),
            TaskKind::ClassifyOtoC => Some((ElementKind::Opinion, NodeTarget::Category)),
            TaskKind::ClassifyOtoS => Some((ElementKind::Opinion, NodeTarget::Sentiment)),
            _ => None,
        }
    }

    pub fn node_task(element: ElementKind, target: NodeTarget) -> Self {
        match (element, target) {
            (ElementKind::Aspect, NodeTarget::Category) => TaskKind::ClassifyAtoC,
            (ElementKind::Aspect, NodeTarget::Sentiment) => TaskKind::ClassifyAtoS,
            (ElementKind::Opinion, NodeTarget::Category) => TaskKind::ClassifyOtoC,
            (ElementKind::Opinion, NodeTarget::Sentiment) => TaskKind::ClassifyOtoS,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

/// `--task` values: a single task name, `step1`, `step2`, `aux` or `all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskSelection {
    One(TaskKind),
    /// Pair extraction.
    Step1,
    /// Pair classification into quads.
    Step2,
    /// Linking and node classification.
    Aux,
    All,
}

/// `--direction` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionSelection {
    AspectFirst,
    OpinionFirst,
    #[default]
    Both,
}

impl FromStr for DirectionSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ao" => Ok(DirectionSelection::AspectFirst),
            "oa" => Ok(DirectionSelection::OpinionFirst),
            "both" => Ok(DirectionSelection::Both),
            other => Err(format!("unknown direction {other:?} (expected ao, oa or both)")),
        }
    }
}

impl FromStr for TaskSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "step1" => Ok(TaskSelection::Step1),
            "step2" => Ok(TaskSelection::Step2),
            "aux" => Ok(TaskSelection::Aux),
            "all" => Ok(TaskSelection::All),
            other => other.parse().map(TaskSelection::One),
        }
    }
}

impl TaskSelection {
    /// Selected tasks in canonical order. The direction filter applies to
    /// extraction and linking tasks.
    pub fn tasks(&self, direction: DirectionSelection) -> Vec<TaskKind> {
        TaskKind::ALL
            .into_iter()
            .filter(|task| match self {
                TaskSelection::One(one) => one == task,
                TaskSelection::Step1 => matches!(task, TaskKind::ExtractAO | TaskKind::ExtractOA),
                TaskSelection::Step2 => *task == TaskKind::ClassifyPairToCS,
                TaskSelection::Aux => !task.is_main(),
                TaskSelection::All => true,
            })
            .filter(|task| match (direction, task.direction()) {
                (DirectionSelection::Both, _) | (_, None) => true,
                (DirectionSelection::AspectFirst, Some(d)) => d == Direction::AspectFirst,
                (DirectionSelection::OpinionFirst, Some(d)) => d == Direction::OpinionFirst,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTemplate {
    pub instruction: String,
    /// Input lines; see the placeholder list in `templates/default.toml`.
    pub input: Vec<String>,
}

/// Template text for all nine tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemplateSet {
    tasks: BTreeMap<TaskKind, TaskTemplate>,
}

const DEFAULT_TEMPLATES: &str = include_str!("../templates/default.toml");

impl Default for TemplateSet {
    fn default() -> Self {
        let tasks: BTreeMap<TaskKind, TaskTemplate> =
            toml::from_str(DEFAULT_TEMPLATES).expect("built-in templates parse");
        assert_eq!(tasks.len(), TaskKind::ALL.len(), "built-in templates cover every task");
        Self { tasks }
    }
}

impl TemplateSet {
    /// Defaults with the tasks listed in `text` replaced.
    pub fn with_overrides(text: &str) -> Result<Self, String> {
        let overrides: BTreeMap<TaskKind, TaskTemplate> = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut set = Self::default();
        set.tasks.extend(overrides);
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::with_overrides(&text).map_err(|message| Error::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn get(&self, task: TaskKind) -> &TaskTemplate {
        &self.tasks[&task]
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.tasks).expect("templates serialize")
    }
}

struct Fill<'a> {
    sentence: &'a str,
    syntax: Option<&'a str>,
    candidates: &'a str,
    candidates_bare: &'a str,
}

/// Single-pass placeholder substitution, so substituted text is never rescanned.
fn render_line(template: &str, fill: &Fill<'_>) -> String {
    let mut out = String::with_capacity(template.len() + fill.sentence.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open..];
        let value = ["sentence", "syntax", "candidates", "candidates_bare"]
            .into_iter()
            .find(|name| {
                after.len() > name.len() + 1 && after[1..].starts_with(name) && after[1 + name.len()..].starts_with('}')
            });
        match value {
            Some(name) => {
                out.push_str(match name {
                    "sentence" => fill.sentence,
                    "syntax" => fill.syntax.unwrap_or_default(),
                    "candidates" => fill.candidates,
                    _ => fill.candidates_bare,
                });
                rest = &after[name.len() + 2..];
            }
            None => {
                out.push('{');
                rest = &after[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// One training or prompt record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionExample {
    pub task: TaskKind,
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub sentence_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    /// `None` leaves the syntax lines out entirely.
    pub style: Option<SyntaxStyle>,
    pub hops: usize,
    /// Output and candidate text for sentences without annotations.
    pub empty_literal: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            style: Some(SyntaxStyle::NaturalLanguage),
            hops: 1,
            empty_literal: "none".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("hop count must be positive")]
    ZeroHops,
    #[error("sentence {sentence_id}: {source}")]
    Syntax {
        sentence_id: String,
        #[source]
        source: SyntaxError,
    },
}

/// A candidate element: a token span of the sentence, or free text that
/// could not be found in it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ElementRef {
    Anchored(Span),
    Unanchored(String),
}

impl ElementRef {
    /// Finds the first token run whose lowercased text equals `term`, then
    /// falls back to the first run whose normalized text does.
    pub fn locate(graph: &SentenceGraph, term: &Term) -> Self {
        let Term::Text(text) = term else {
            return ElementRef::Anchored(Span::Implicit);
        };
        let n = graph.len();
        let words = text.split(' ').count();
        let spans = || {
            (1..=n).flat_map(move |begin| (begin..=n.min(begin + words + 1)).map(move |end| Span::explicit(begin, end)))
        };
        spans()
            .find(|&span| graph.span_surface(span).to_lowercase() == *text)
            .or_else(|| spans().find(|&span| normalize(&graph.span_surface(span)) == *term))
            .map_or_else(|| ElementRef::Unanchored(text.clone()), ElementRef::Anchored)
    }

    fn surface(&self, graph: &SentenceGraph) -> String {
        match self {
            ElementRef::Anchored(span) => graph.span_surface(*span),
            ElementRef::Unanchored(text) => text.clone(),
        }
    }

    fn describe(
        &self,
        view: &SyntaxView<'_>,
        kind: ElementKind,
        hops: usize,
        style: SyntaxStyle,
    ) -> Result<String, SyntaxError> {
        match self {
            ElementRef::Anchored(span) => view.serialize_subgraph(kind, *span, hops, style),
            ElementRef::Unanchored(text) => Ok(match style {
                SyntaxStyle::NaturalLanguage => describe_neighborhood(kind, text, &[], hops),
                SyntaxStyle::Symbol => bracket_neighborhood(kind, text, &[]),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidatePair {
    pub aspect: ElementRef,
    pub opinion: ElementRef,
}

impl CandidatePair {
    pub fn from_quad(quad: &SentimentQuad) -> Self {
        Self {
            aspect: ElementRef::Anchored(quad.aspect),
            opinion: ElementRef::Anchored(quad.opinion),
        }
    }

    fn get(&self, kind: ElementKind) -> &ElementRef {
        match kind {
            ElementKind::Aspect => &self.aspect,
            ElementKind::Opinion => &self.opinion,
        }
    }
}

/// `aspect: x, opinion: y` or `opinion: y, aspect: x`.
pub fn pair_record(aspect: &str, opinion: &str, direction: Direction) -> String {
    match direction {
        Direction::AspectFirst => format!("aspect: {aspect}, opinion: {opinion}"),
        Direction::OpinionFirst => format!("opinion: {opinion}, aspect: {aspect}"),
    }
}

pub fn quad_record(aspect: &str, opinion: &str, category: &str, sentiment: &str) -> String {
    format!("aspect: {aspect}, opinion: {opinion}, category: {category}, sentiment: {sentiment}")
}

pub fn element_record(kind: ElementKind, element: &str, target: NodeTarget, label: &str) -> String {
    format!("{kind}: {element}, {}: {label}", target.as_str())
}

pub fn join_records(records: Vec<String>, empty_literal: &str) -> String {
    if records.is_empty() {
        empty_literal.to_string()
    } else {
        records.join(RECORD_SEPARATOR)
    }
}

/// Builds [`InstructionExample`]s from aligned sentence graphs.
#[derive(Debug, Clone, Default)]
pub struct PromptBuilder {
    templates: TemplateSet,
    relations: RelationMap,
    config: PromptConfig,
}

impl PromptBuilder {
    pub fn new(templates: TemplateSet, relations: RelationMap, config: PromptConfig) -> Result<Self, PromptError> {
        if config.hops == 0 {
            return Err(PromptError::ZeroHops);
        }
        Ok(Self {
            templates,
            relations,
            config,
        })
    }

    pub fn config(&self) -> &PromptConfig {
        &self.config
    }

    pub fn relations(&self) -> &RelationMap {
        &self.relations
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// Same templates and relations with a different prompt config.
    pub fn with_config(&self, config: PromptConfig) -> Result<Self, PromptError> {
        Self::new(self.templates.clone(), self.relations.clone(), config)
    }

    /// Training record: gold candidates in the input, gold records as output.
    pub fn training_example(&self, task: TaskKind, graph: &SentenceGraph) -> Result<InstructionExample, PromptError> {
        let pairs: Vec<CandidatePair> = graph.quads().iter().map(CandidatePair::from_quad).collect();
        let input = self.input(task, graph, &pairs)?;
        Ok(self.example(task, graph, input, self.gold_output(task, graph)))
    }

    /// Inference prompt: as [`Self::training_example`] with an empty output.
    pub fn prompt(&self, task: TaskKind, graph: &SentenceGraph) -> Result<InstructionExample, PromptError> {
        let mut example = self.training_example(task, graph)?;
        example.output.clear();
        Ok(example)
    }

    pub fn extraction(&self, graph: &SentenceGraph, direction: Direction) -> Result<InstructionExample, PromptError> {
        self.training_example(TaskKind::extraction(direction), graph)
    }

    pub fn link(&self, graph: &SentenceGraph, direction: Direction) -> Result<InstructionExample, PromptError> {
        let task = match direction {
            Direction::AspectFirst => TaskKind::LinkAtoO,
            Direction::OpinionFirst => TaskKind::LinkOtoA,
        };
        self.training_example(task, graph)
    }

    /// Pair classification over the gold pairs.
    pub fn classification(&self, graph: &SentenceGraph) -> Result<InstructionExample, PromptError> {
        self.training_example(TaskKind::ClassifyPairToCS, graph)
    }

    /// Pair classification prompt over predicted pairs; the output is empty.
    pub fn classification_prompt(
        &self,
        graph: &SentenceGraph,
        pairs: &[CandidatePair],
    ) -> Result<InstructionExample, PromptError> {
        let input = self.input(TaskKind::ClassifyPairToCS, graph, pairs)?;
        Ok(self.example(TaskKind::ClassifyPairToCS, graph, input, String::new()))
    }

    pub fn node_classification(
        &self,
        graph: &SentenceGraph,
        element: ElementKind,
        target: NodeTarget,
    ) -> Result<InstructionExample, PromptError> {
        self.training_example(TaskKind::node_task(element, target), graph)
    }

    fn example(&self, task: TaskKind, graph: &SentenceGraph, input: String, output: String) -> InstructionExample {
        InstructionExample {
            task,
            instruction: self.templates.get(task).instruction.clone(),
            input,
            output,
            sentence_id: graph.id().to_string(),
        }
    }

    /// Gold output text of `task` for the sentence.
    pub fn gold_output(&self, task: TaskKind, graph: &SentenceGraph) -> String {
        let surface = |span| graph.span_surface(span);
        let records: Vec<String> = graph
            .quads()
            .iter()
            .map(|q| match task {
                TaskKind::ExtractAO | TaskKind::ExtractOA | TaskKind::LinkAtoO | TaskKind::LinkOtoA => pair_record(
                    &surface(q.aspect),
                    &surface(q.opinion),
                    task.direction().expect("pair task has a direction"),
                ),
                TaskKind::ClassifyPairToCS => quad_record(
                    &surface(q.aspect),
                    &surface(q.opinion),
                    &q.category,
                    q.sentiment.as_str(),
                ),
                _ => {
                    let (element, target) = task.node().expect("node task");
                    let label = match target {
                        NodeTarget::Category => q.category.as_str(),
                        NodeTarget::Sentiment => q.sentiment.as_str(),
                    };
                    element_record(element, &surface(q.span(element)), target, label)
                }
            })
            .collect();
        join_records(records, &self.config.empty_literal)
    }

    fn input(&self, task: TaskKind, graph: &SentenceGraph, pairs: &[CandidatePair]) -> Result<String, PromptError> {
        let syntax_err = |source| PromptError::Syntax {
            sentence_id: graph.id().to_string(),
            source,
        };
        let view = SyntaxView::new(graph, &self.relations);
        let hops = self.config.hops;
        let empty = self.config.empty_literal.as_str();
        let sentence = graph.text();

        let syntax = match self.config.style {
            None => None,
            Some(style) => Some(match task {
                TaskKind::ExtractAO | TaskKind::ExtractOA | TaskKind::LinkAtoO | TaskKind::LinkOtoA => {
                    view.serialize_global(style)
                }
                TaskKind::ClassifyPairToCS => {
                    let blocks = pairs
                        .iter()
                        .map(|pair| {
                            Ok(format!(
                                "{} {}",
                                pair.aspect.describe(&view, ElementKind::Aspect, hops, style)?,
                                pair.opinion.describe(&view, ElementKind::Opinion, hops, style)?
                            ))
                        })
                        .collect::<Result<Vec<_>, SyntaxError>>()
                        .map_err(syntax_err)?;
                    join_records(blocks, empty)
                }
                _ => {
                    let (element, _) = task.node().expect("node task");
                    let blocks = pairs
                        .iter()
                        .map(|pair| pair.get(element).describe(&view, element, hops, style))
                        .collect::<Result<Vec<_>, SyntaxError>>()
                        .map_err(syntax_err)?;
                    join_records(blocks, empty)
                }
            }),
        };

        // spans are checked above only when syntax is on
        for pair in pairs {
            for element in [&pair.aspect, &pair.opinion] {
                if let ElementRef::Anchored(span) = element {
                    if !span.within(graph.len()) {
                        return Err(syntax_err(SyntaxError::SpanOutOfRange {
                            span: *span,
                            token_count: graph.len(),
                        }));
                    }
                }
            }
        }

        let (candidates, candidates_bare) = match task {
            TaskKind::ExtractAO | TaskKind::ExtractOA => (String::new(), String::new()),
            TaskKind::LinkAtoO | TaskKind::LinkOtoA => {
                let given = task.direction().expect("link task").first();
                let keyed = pairs
                    .iter()
                    .map(|p| format!("{given}: {}", p.get(given).surface(graph)))
                    .collect();
                let bare = pairs.iter().map(|p| p.get(given).surface(graph)).collect();
                (join_records(keyed, empty), join_records(bare, empty))
            }
            TaskKind::ClassifyPairToCS => {
                let keyed = pairs
                    .iter()
                    .map(|p| {
                        pair_record(
                            &p.aspect.surface(graph),
                            &p.opinion.surface(graph),
                            Direction::AspectFirst,
                        )
                    })
                    .collect();
                (join_records(keyed, empty), String::new())
            }
            _ => {
                let (element, _) = task.node().expect("node task");
                let keyed = pairs
                    .iter()
                    .map(|p| format!("{element}: {}", p.get(element).surface(graph)))
                    .collect();
                let bare = pairs.iter().map(|p| p.get(element).surface(graph)).collect();
                (join_records(keyed, empty), join_records(bare, empty))
            }
        };

        let fill = Fill {
            sentence: &sentence,
            syntax: syntax.as_deref(),
            candidates: &candidates,
            candidates_bare: &candidates_bare,
        };
        let lines: Vec<String> = self
            .templates
            .get(task)
            .input
            .iter()
            .filter(|line| fill.syntax.is_some() || !line.contains("{syntax}"))
            .map(|line| render_line(line, &fill))
            .collect();
        Ok(lines.join("\n"))
    }
}

/// Builds training records for every selected task, in corpus order.
pub fn build_dataset(
    graphs: &[SentenceGraph],
    builder: &PromptBuilder,
    tasks: &[TaskKind],
) -> Result<BTreeMap<TaskKind, Vec<InstructionExample>>, PromptError> {
    tasks
        .iter()
        .map(|&task| {
            let examples = graphs
                .par_iter()
                .map(|graph| builder.training_example(task, graph))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((task, examples))
        })
        .collect()
}

/// Writes examples as JSON lines. With `end_marker` set, every output
/// field gets the marker appended (training files).
pub fn write_jsonl<W: Write>(
    examples: &[InstructionExample],
    writer: W,
    end_marker: Option<&str>,
) -> std::io::Result<usize> {
    let mut writer = BufWriter::new(writer);
    for example in examples {
        let line = match end_marker {
            Some(marker) => {
                let mut marked = example.clone();
                marked.output.push_str(marker);
                serde_json::to_string(&marked)
            }
            None => serde_json::to_string(example),
        }
        .expect("example serializes");
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(examples.len())
}

pub fn emit_jsonl(examples: &[InstructionExample], path: &Path, end_marker: Option<&str>) -> Result<usize, Error> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(examples, file, end_marker).map_err(|e| Error::io(path, e))
}

pub fn read_examples(path: &Path) -> Result<Vec<InstructionExample>, Error> {
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
