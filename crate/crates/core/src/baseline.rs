//! Predictors that need no language model, plus the line-oriented
//! subprocess protocol external predictors speak.
//!
//! Protocol: the pipeline writes one [`PredictRequest`] per line to the
//! child's stdin and closes it; the child answers with exactly one
//! [`PredictResponse`] per request, in the same order, on stdout.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ElementKind, Sentiment};
use crate::decode::{decode_pairs, DecodeConfig, FieldSpec, PairPrediction};
use crate::promptgen::{
    element_record, join_records, pair_record, quad_record, Direction, InstructionExample, NodeTarget, PromptBuilder,
    TaskKind,
};
use crate::syntax::{RelationMap, RelationWord, SentenceGraph, SyntaxView};

#[derive(Debug, thiserror::Error)]
pub enum PredictorError {
    #[error("no gold annotation for sentence {0:?}")]
    UnknownSentence(String),
    #[error("could not run predictor {program}: {source}")]
    Spawn {
        program: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("predictor i/o failed: {0}")]
    Io(#[from] io::Error),
    #[error("predictor exited with {status}")]
    Exit { status: std::process::ExitStatus },
    #[error("predictor response line {line}: {message}")]
    BadResponse { line: usize, message: String },
    #[error("predictor response line {line} is for sentence {got:?}, expected {expected:?}")]
    Misaligned { line: usize, expected: String, got: String },
    #[error("predictor returned {got} responses for {expected} prompts")]
    Count { expected: usize, got: usize },
}

/// Maps prompts (with empty outputs) to raw generated text.
pub trait Predictor: Sync {
    fn predict(&self, prompts: &[InstructionExample]) -> Result<Vec<String>, PredictorError>;
}

fn by_id(graphs: &[SentenceGraph]) -> HashMap<String, SentenceGraph> {
    graphs.iter().map(|g| (g.id().to_string(), g.clone())).collect()
}

/// Answers every prompt with the training target for its sentence.
pub struct GoldReplay {
    builder: PromptBuilder,
    gold: HashMap<String, SentenceGraph>,
}

impl GoldReplay {
    pub fn new(builder: PromptBuilder, graphs: &[SentenceGraph]) -> Self {
        Self {
            builder,
            gold: by_id(graphs),
        }
    }

    pub fn answer(&self, prompt: &InstructionExample) -> Result<String, PredictorError> {
        let graph = self
            .gold
            .get(&prompt.sentence_id)
            .ok_or_else(|| PredictorError::UnknownSentence(prompt.sentence_id.clone()))?;
        Ok(self.builder.gold_output(prompt.task, graph))
    }
}

impl Predictor for GoldReplay {
    fn predict(&self, prompts: &[InstructionExample]) -> Result<Vec<String>, PredictorError> {
        prompts.par_iter().map(|p| self.answer(p)).collect()
    }
}

/// Modifier edges as `(aspect, opinion)` surface pairs: head is the
/// aspect, dependent the opinion, in clause order.
pub fn heuristic_pairs(view: &SyntaxView<'_>) -> Vec<(String, String)> {
    let graph = view.graph();
    view.clauses()
        .filter(|(edge, word)| *word == RelationWord::Modify && !edge.is_root())
        .map(|(edge, _)| {
            (
                graph.surface(edge.head).to_string(),
                graph.surface(edge.dependent).to_string(),
            )
        })
        .collect()
}

/// Heuristic pairs rendered as an extraction output.
pub fn heuristic_extract(
    graph: &SentenceGraph,
    relations: &RelationMap,
    direction: Direction,
    empty_literal: &str,
) -> String {
    let view = SyntaxView::new(graph, relations);
    let records = heuristic_pairs(&view)
        .into_iter()
        .map(|(a, o)| pair_record(&a, &o, direction))
        .collect();
    join_records(records, empty_literal)
}

/// Dependency-rule baseline: modifier edges for extraction and linking,
/// fixed labels for classification.
pub struct HeuristicPredictor {
    relations: RelationMap,
    graphs: HashMap<String, SentenceGraph>,
    category: String,
    sentiment: Sentiment,
    empty_literal: String,
}

impl HeuristicPredictor {
    pub fn new(graphs: &[SentenceGraph], relations: RelationMap, category: String, sentiment: Sentiment) -> Self {
        Self {
            relations,
            graphs: by_id(graphs),
            category,
            sentiment,
            empty_literal: "none".to_string(),
        }
    }

    /// Most frequent gold category, ties broken alphabetically.
    pub fn majority_category(graphs: &[SentenceGraph]) -> Option<String> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for quad in graphs.iter().flat_map(|g| g.quads()) {
            *counts.entry(&quad.category).or_default() += 1;
        }
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(c, _)| c.to_string())
    }

    fn answer(&self, prompt: &InstructionExample) -> Result<String, PredictorError> {
        let graph = self
            .graphs
            .get(&prompt.sentence_id)
            .ok_or_else(|| PredictorError::UnknownSentence(prompt.sentence_id.clone()))?;
        let view = SyntaxView::new(graph, &self.relations);
        let empty = self.empty_literal.as_str();
        let task = prompt.task;
        Ok(match task {
            TaskKind::ExtractAO | TaskKind::ExtractOA => heuristic_extract(
                graph,
                &self.relations,
                task.direction().expect("extraction has a direction"),
                empty,
            ),
            TaskKind::LinkAtoO | TaskKind::LinkOtoA => {
                let direction = task.direction().expect("link has a direction");
                let given = candidate_values(&prompt.input, "candidates:");
                let records = heuristic_pairs(&view)
                    .into_iter()
                    .filter(|(a, o)| {
                        let key = if direction == Direction::AspectFirst { a } else { o };
                        given.iter().any(|g| g.eq_ignore_ascii_case(key))
                    })
                    .map(|(a, o)| pair_record(&a, &o, direction))
                    .collect();
                join_records(records, empty)
            }
            TaskKind::ClassifyPairToCS => {
                let records = candidate_pairs(&prompt.input)
                    .iter()
                    .map(|p| {
                        quad_record(
                            p.aspect.as_str(),
                            p.opinion.as_str(),
                            &self.category,
                            self.sentiment.as_str(),
                        )
                    })
                    .collect();
                join_records(records, empty)
            }
            _ => {
                let (element, target) = task.node().expect("node task");
                let label = match target {
                    NodeTarget::Category => self.category.as_str(),
                    NodeTarget::Sentiment => self.sentiment.as_str(),
                };
                let prefix = format!("candidate {element}:");
                let records = candidate_values(&prompt.input, &prefix)
                    .iter()
                    .map(|value| element_record(element, value, target, label))
                    .collect();
                join_records(records, empty)
            }
        })
    }
}

impl Predictor for HeuristicPredictor {
    fn predict(&self, prompts: &[InstructionExample]) -> Result<Vec<String>, PredictorError> {
        prompts.par_iter().map(|p| self.answer(p)).collect()
    }
}

/// Values listed on the input line starting with `prefix`, with any
/// `aspect: ` / `opinion: ` keys removed.
fn candidate_values(input: &str, prefix: &str) -> Vec<String> {
    let Some(line) = input.lines().find_map(|l| l.strip_prefix(prefix)) else {
        return Vec::new();
    };
    let line = line.trim();
    if line.eq_ignore_ascii_case("none") {
        return Vec::new();
    }
    line.split(" | ")
        .map(|v| {
            let v = v.trim();
            [ElementKind::Aspect, ElementKind::Opinion]
                .iter()
                .find_map(|k| v.strip_prefix(&format!("{k}: ")))
                .unwrap_or(v)
                .to_string()
        })
        .collect()
}

fn candidate_pairs(input: &str) -> Vec<PairPrediction> {
    let Some(line) = input.lines().find_map(|l| l.strip_prefix("candidate:")) else {
        return Vec::new();
    };
    let spec = FieldSpec::for_task(TaskKind::ExtractAO);
    decode_pairs(line, spec, &DecodeConfig::default()).0
}

/// One protocol request line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub sentence_id: String,
    pub task: TaskKind,
    pub instruction: String,
    pub input: String,
}

impl From<&InstructionExample> for PredictRequest {
    fn from(example: &InstructionExample) -> Self {
        Self {
            sentence_id: example.sentence_id.clone(),
            task: example.task,
            instruction: example.instruction.clone(),
            input: example.input.clone(),
        }
    }
}

impl From<PredictRequest> for InstructionExample {
    fn from(request: PredictRequest) -> Self {
        Self {
            task: request.task,
            instruction: request.instruction,
            input: request.input,
            output: String::new(),
            sentence_id: request.sentence_id,
        }
    }
}

/// One protocol response line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub sentence_id: String,
    pub raw_output: String,
}

/// Runs an external program once per batch and checks that its answers
/// line up with the prompts.
#[derive(Debug, Clone)]
pub struct SubprocessPredictor {
    program: PathBuf,
    args: Vec<String>,
}

impl SubprocessPredictor {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
        }
    }
}

impl Predictor for SubprocessPredictor {
    fn predict(&self, prompts: &[InstructionExample]) -> Result<Vec<String>, PredictorError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| PredictorError::Spawn {
                program: self.program.clone(),
                source,
            })?;

        let mut payload = Vec::new();
        for prompt in prompts {
            serde_json::to_writer(&mut payload, &PredictRequest::from(prompt)).expect("request serializes");
            payload.push(b'\n');
        }
        let mut stdin = child.stdin.take().expect("stdin is piped");
        // write from another thread so a chatty child cannot deadlock us
        let writer = thread::spawn(move || -> io::Result<()> {
            match stdin.write_all(&payload) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                other => other,
            }
        });

        let stdout = child.stdout.take().expect("stdout is piped");
        let mut outputs = Vec::with_capacity(prompts.len());
        let mut failure = None;
        for (i, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let n = outputs.len();
            let response: PredictResponse = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    failure = Some(PredictorError::BadResponse {
                        line: i + 1,
                        message: e.to_string(),
                    });
                    break;
                }
            };
            let Some(prompt) = prompts.get(n) else {
                failure = Some(PredictorError::Count {
                    expected: prompts.len(),
                    got: n + 1,
                });
                break;
            };
            if response.sentence_id != prompt.sentence_id {
                failure = Some(PredictorError::Misaligned {
                    line: i + 1,
                    expected: prompt.sentence_id.clone(),
                    got: response.sentence_id,
                });
                break;
            }
            outputs.push(response.raw_output);
        }
        if failure.is_some() {
            let _ = child.kill();
        }
        let status = child.wait()?;
        writer.join().expect("writer thread does not panic")?;
        if let Some(err) = failure {
            return Err(err);
        }
        if !status.success() {
            return Err(PredictorError::Exit { status });
        }
        if outputs.len() != prompts.len() {
            return Err(PredictorError::Count {
                expected: prompts.len(),
                got: outputs.len(),
            });
        }
        Ok(outputs)
    }
}

/// Server side of the protocol: reads all requests, predicts, writes one
/// response per request.
pub fn serve<R: BufRead, W: Write>(
    predictor: &dyn Predictor,
    reader: R,
    mut writer: W,
) -> Result<usize, PredictorError> {
    let mut prompts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: PredictRequest = serde_json::from_str(&line).map_err(|e| PredictorError::BadResponse {
            line: i + 1,
            message: e.to_string(),
        })?;
        prompts.push(InstructionExample::from(request));
    }
    let outputs = predictor.predict(&prompts)?;
    for (prompt, raw_output) in prompts.iter().zip(outputs) {
        let response = PredictResponse {
            sentence_id: prompt.sentence_id.clone(),
            raw_output,
        };
        serde_json::to_writer(&mut writer, &response).expect("response serializes");
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(prompts.len())
}
