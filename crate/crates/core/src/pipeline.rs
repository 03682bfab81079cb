//! Two-stage inference: bidirectional pair extraction, merge, pair
//! classification, then scoring. Every stage leaves its prompts, raw
//! outputs and decoded records under a run directory.
//!
//! ```text
//! <run>/config.json
//! <run>/stage1/{prompts,raw,decoded}_extract_{ao,oa}.jsonl, merged_pairs.jsonl
//! <run>/stage2/{prompts,raw,decoded}_classify_pair.jsonl
//! <run>/stage2_gold_pairs/...            (isolated stage 2, when enabled)
//! <run>/report.json, <run>/report.txt
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{Predictor, PredictorError};
use crate::decode::{
    decode_line, filter_to_sentence, merge_bidirectional, write_jsonl, DecodeConfig, DecodedLine, MergeStrategy,
    PairPrediction, PredictionLine, QuadPrediction,
};
use crate::error::Error;
use crate::eval::{element_hits, gold_pairs, gold_quads, percent, render_table, score_corpus, Element, EvalReport};
use crate::promptgen::{
    emit_jsonl, CandidatePair, Direction, DirectionSelection, ElementRef, InstructionExample, PromptBuilder,
    PromptConfig, PromptError, TaskKind,
};
use crate::syntax::{SentenceGraph, SyntaxStyle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `None` (written `"none"`) drops syntax descriptions from every prompt.
    #[serde(with = "style_serde")]
    pub style: Option<SyntaxStyle>,
    pub hops: usize,
    pub merge: MergeStrategy,
    /// Extraction directions to run; `both` feeds the merge.
    #[serde(with = "direction_serde")]
    pub directions: DirectionSelection,
    /// Drop stage-1 terms that do not occur in the sentence.
    pub require_in_sentence: bool,
    /// Also run stage 2 on gold pairs and report element accuracy.
    pub isolated_stage2: bool,
    pub end_markers: Vec<String>,
    pub empty_literal: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let decode = DecodeConfig::default();
        Self {
            style: Some(SyntaxStyle::NaturalLanguage),
            hops: 1,
            merge: MergeStrategy::Union,
            directions: DirectionSelection::Both,
            require_in_sentence: false,
            isolated_stage2: true,
            end_markers: decode.end_markers,
            empty_literal: decode.empty_literal,
        }
    }
}

mod style_serde {
    use super::SyntaxStyle;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(style: &Option<SyntaxStyle>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match style {
            None => "none",
            Some(SyntaxStyle::NaturalLanguage) => "nl",
            Some(SyntaxStyle::Symbol) => "symbol",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<SyntaxStyle>, D::Error> {
        match String::deserialize(d)?.as_str() {
            "none" => Ok(None),
            other => other.parse().map(Some).map_err(serde::de::Error::custom),
        }
    }
}

mod direction_serde {
    use super::DirectionSelection;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &DirectionSelection, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match d {
            DirectionSelection::AspectFirst => "ao",
            DirectionSelection::OpinionFirst => "oa",
            DirectionSelection::Both => "both",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DirectionSelection, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl RunConfig {
    pub fn prompt_config(&self) -> PromptConfig {
        PromptConfig {
            style: self.style,
            hops: self.hops,
            empty_literal: self.empty_literal.clone(),
        }
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            end_markers: self.end_markers.clone(),
            empty_literal: self.empty_literal.clone(),
        }
    }

    fn directions(&self) -> Vec<Direction> {
        match self.directions {
            DirectionSelection::AspectFirst => vec![Direction::AspectFirst],
            DirectionSelection::OpinionFirst => vec![Direction::OpinionFirst],
            DirectionSelection::Both => vec![Direction::AspectFirst, Direction::OpinionFirst],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{stage}: {source}")]
    Predictor {
        stage: &'static str,
        #[source]
        source: PredictorError,
    },
    #[error("{stage}: predictor returned {got} outputs for {expected} prompts")]
    OutputCount {
        stage: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Artifact(#[from] Error),
}

/// Category and sentiment accuracy with gold pairs given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Report {
    pub category_accuracy: f64,
    pub sentiment_accuracy: f64,
    /// Gold quads scored for element accuracy.
    pub positions: usize,
    /// Sentences whose predicted record count differed from the gold count;
    /// their missing positions count as wrong.
    pub misaligned_sentences: usize,
    pub quad: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub sentences: usize,
    pub stage2_prompts: usize,
    pub skipped_stage2: usize,
    pub pair: EvalReport,
    pub quad: EvalReport,
    pub isolated_stage2: Option<Stage2Report>,
}

impl PipelineReport {
    pub fn render(&self) -> String {
        let mut out = render_table(&[("pair", &self.pair), ("quad", &self.quad)]);
        out.push_str(&format!(
            "sentences {}  stage-2 prompts {}  skipped {}\n",
            self.sentences, self.stage2_prompts, self.skipped_stage2
        ));
        if let Some(stage2) = &self.isolated_stage2 {
            out.push_str(&stage2.render());
        }
        out
    }
}

impl Stage2Report {
    pub fn render(&self) -> String {
        let mut out = format!(
            "gold pairs: category acc {}  sentiment acc {}  positions {}  misaligned {}\n",
            percent(self.category_accuracy),
            percent(self.sentiment_accuracy),
            self.positions,
            self.misaligned_sentences
        );
        out.push_str(&render_table(&[("quad|gold P", &self.quad)]));
        out
    }
}

fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes prompts, asks the predictor, writes raw and decoded outputs.
fn run_stage(
    dir: &Path,
    stage: &'static str,
    task: TaskKind,
    prompts: &[InstructionExample],
    predictor: &dyn Predictor,
    decode: &DecodeConfig,
) -> Result<Vec<DecodedLine>, PipelineError> {
    emit_jsonl(prompts, &dir.join(format!("prompts_{task}.jsonl")), None)?;
    let outputs = predictor
        .predict(prompts)
        .map_err(|source| PipelineError::Predictor { stage, source })?;
    if outputs.len() != prompts.len() {
        return Err(PipelineError::OutputCount {
            stage,
            expected: prompts.len(),
            got: outputs.len(),
        });
    }
    let raw: Vec<PredictionLine> = prompts
        .iter()
        .zip(outputs)
        .map(|(p, raw_output)| PredictionLine {
            sentence_id: p.sentence_id.clone(),
            task,
            raw_output,
        })
        .collect();
    write_jsonl(&raw, &dir.join(format!("raw_{task}.jsonl")))?;
    let decoded: Vec<DecodedLine> = raw.par_iter().map(|line| decode_line(line, None, decode)).collect();
    write_jsonl(&decoded, &dir.join(format!("decoded_{task}.jsonl")))?;
    Ok(decoded)
}

#[derive(Serialize)]
struct MergedPairs<'a> {
    sentence_id: &'a str,
    pairs: Vec<PairRecord<'a>>,
}

#[derive(Serialize)]
struct PairRecord<'a> {
    aspect: &'a crate::decode::Term,
    opinion: &'a crate::decode::Term,
}

fn gold_by_sentence<T>(graphs: &[SentenceGraph], f: impl Fn(&SentenceGraph) -> Vec<T> + Sync) -> Vec<(String, Vec<T>)>
where
    T: Send,
{
    graphs.par_iter().map(|g| (g.id().to_string(), f(g))).collect()
}

/// Runs both stages and scores the result against the graphs' gold quads.
pub fn run_two_stage(
    graphs: &[SentenceGraph],
    predictor: &dyn Predictor,
    builder: &PromptBuilder,
    config: &RunConfig,
    run_dir: &Path,
) -> Result<PipelineReport, PipelineError> {
    let builder = builder.with_config(config.prompt_config())?;
    let decode = config.decode_config();
    let stage1_dir = run_dir.join("stage1");
    let stage2_dir = run_dir.join("stage2");
    create_dir(&stage1_dir)?;
    create_dir(&stage2_dir)?;
    write_json(config, &run_dir.join("config.json"))?;

    // stage 1: extraction in each direction
    let mut per_direction: Vec<Vec<DecodedLine>> = Vec::new();
    for direction in config.directions() {
        let task = TaskKind::extraction(direction);
        let prompts = graphs
            .par_iter()
            .map(|g| builder.prompt(task, g))
            .collect::<Result<Vec<_>, _>>()?;
        per_direction.push(run_stage(&stage1_dir, "stage 1", task, &prompts, predictor, &decode)?);
    }
    let mut malformed1 = 0;
    let merged: Vec<Vec<PairPrediction>> = (0..graphs.len())
        .map(|i| {
            let pairs: Vec<Vec<PairPrediction>> = per_direction.iter().map(|d| d[i].pairs()).collect();
            malformed1 += per_direction.iter().map(|d| d[i].malformed_count).sum::<usize>();
            let merged = match pairs.as_slice() {
                [one] => merge_bidirectional(one, &[], crate::decode::MergeStrategy::Union),
                [ao, oa] => merge_bidirectional(ao, oa, config.merge),
                _ => unreachable!("one or two directions"),
            };
            if config.require_in_sentence {
                filter_to_sentence(merged, &graphs[i].text())
            } else {
                merged
            }
        })
        .collect();
    let merged_lines: Vec<MergedPairs<'_>> = graphs
        .iter()
        .zip(&merged)
        .map(|(g, pairs)| MergedPairs {
            sentence_id: g.id(),
            pairs: pairs
                .iter()
                .map(|p| PairRecord {
                    aspect: &p.aspect,
                    opinion: &p.opinion,
                })
                .collect(),
        })
        .collect();
    write_jsonl(&merged_lines, &stage1_dir.join("merged_pairs.jsonl"))?;
    let pair_pred: HashMap<String, Vec<PairPrediction>> = graphs
        .iter()
        .zip(&merged)
        .map(|(g, p)| (g.id().to_string(), p.clone()))
        .collect();
    let pair = score_corpus(&gold_by_sentence(graphs, gold_pairs), &pair_pred, malformed1);

    // stage 2: classify merged pairs; sentences without pairs are skipped
    let prompts = graphs
        .par_iter()
        .zip(&merged)
        .filter(|(_, pairs)| !pairs.is_empty())
        .map(|(g, pairs)| {
            let candidates: Vec<CandidatePair> = pairs
                .iter()
                .map(|p| CandidatePair {
                    aspect: ElementRef::locate(g, &p.aspect),
                    opinion: ElementRef::locate(g, &p.opinion),
                })
                .collect();
            builder.classification_prompt(g, &candidates)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let decoded = run_stage(
        &stage2_dir,
        "stage 2",
        TaskKind::ClassifyPairToCS,
        &prompts,
        predictor,
        &decode,
    )?;
    let malformed2 = decoded.iter().map(|d| d.malformed_count).sum();
    let quad_pred: HashMap<String, Vec<QuadPrediction>> =
        decoded.iter().map(|d| (d.sentence_id.clone(), d.quads())).collect();
    let quad = score_corpus(&gold_by_sentence(graphs, gold_quads), &quad_pred, malformed2);

    let isolated_stage2 = if config.isolated_stage2 {
        Some(stage2_on_gold_pairs(
            graphs,
            predictor,
            &builder,
            &decode,
            &run_dir.join("stage2_gold_pairs"),
        )?)
    } else {
        None
    };

    let report = PipelineReport {
        sentences: graphs.len(),
        stage2_prompts: prompts.len(),
        skipped_stage2: graphs.len() - prompts.len(),
        pair,
        quad,
        isolated_stage2,
    };
    write_json(&report, &run_dir.join("report.json"))?;
    let path = run_dir.join("report.txt");
    fs::write(&path, report.render()).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

/// Stage 2 alone, prompted with gold pairs.
pub fn run_stage2_isolated(
    graphs: &[SentenceGraph],
    predictor: &dyn Predictor,
    builder: &PromptBuilder,
    config: &RunConfig,
    run_dir: &Path,
) -> Result<Stage2Report, PipelineError> {
    let builder = builder.with_config(config.prompt_config())?;
    create_dir(run_dir)?;
    write_json(config, &run_dir.join("config.json"))?;
    let report = stage2_on_gold_pairs(
        graphs,
        predictor,
        &builder,
        &config.decode_config(),
        &run_dir.join("stage2"),
    )?;
    write_json(&report, &run_dir.join("report.json"))?;
    let path = run_dir.join("report.txt");
    fs::write(&path, report.render()).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

fn stage2_on_gold_pairs(
    graphs: &[SentenceGraph],
    predictor: &dyn Predictor,
    builder: &PromptBuilder,
    decode: &DecodeConfig,
    dir: &Path,
) -> Result<Stage2Report, PipelineError> {
    create_dir(dir)?;
    let annotated: Vec<&SentenceGraph> = graphs.iter().filter(|g| !g.quads().is_empty()).collect();
    let prompts = annotated
        .par_iter()
        .map(|g| builder.prompt(TaskKind::ClassifyPairToCS, g))
        .collect::<Result<Vec<_>, _>>()?;
    let decoded = run_stage(
        dir,
        "stage 2 (gold pairs)",
        TaskKind::ClassifyPairToCS,
        &prompts,
        predictor,
        decode,
    )?;

    let (mut positions, mut category_hits, mut sentiment_hits, mut misaligned) = (0, 0, 0, 0);
    for (graph, line) in annotated.iter().zip(&decoded) {
        let gold = gold_quads(graph);
        let mut pred = line.quads();
        positions += gold.len();
        if pred.len() != gold.len() {
            misaligned += 1;
            // only the aligned prefix can earn credit
            pred.truncate(gold.len());
            let n = pred.len();
            category_hits += element_hits(&gold[..n], &pred, Element::Category).expect("same length");
            sentiment_hits += element_hits(&gold[..n], &pred, Element::Sentiment).expect("same length");
        } else {
            category_hits += element_hits(&gold, &pred, Element::Category).expect("same length");
            sentiment_hits += element_hits(&gold, &pred, Element::Sentiment).expect("same length");
        }
    }
    let accuracy = |hits: usize| {
        if positions == 0 {
            1.0
        } else {
            hits as f64 / positions as f64
        }
    };
    let quad_pred: HashMap<String, Vec<QuadPrediction>> =
        decoded.iter().map(|d| (d.sentence_id.clone(), d.quads())).collect();
    let malformed = decoded.iter().map(|d| d.malformed_count).sum();
    Ok(Stage2Report {
        category_accuracy: accuracy(category_hits),
        sentiment_accuracy: accuracy(sentiment_hits),
        positions,
        misaligned_sentences: misaligned,
        quad: score_corpus(&gold_by_sentence(graphs, gold_quads), &quad_pred, malformed),
    })
}

/// Loads a run config from TOML; missing keys take defaults.
pub fn load_run_config(path: &Path) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config {
        path: PathBuf::from(path),
        message: e.to_string(),
    })
}
