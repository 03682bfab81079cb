//! Exact-match scoring with corpus-wide micro averaging.
//!
//! Both sides are deduplicated per sentence before matching, so repeating a
//! prediction (or a gold annotation) never changes the score.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;
use std::ops::{Add, AddAssign};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::{dedup, normalize, PairPrediction, PredictedSentiment, QuadPrediction};
use crate::syntax::SentenceGraph;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub predicted_total: usize,
    pub gold_total: usize,
}

impl MatchCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.predicted_total)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.gold_total)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }
}

impl Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, rhs: MatchCounts) -> MatchCounts {
        MatchCounts {
            true_positives: self.true_positives + rhs.true_positives,
            predicted_total: self.predicted_total + rhs.predicted_total,
            gold_total: self.gold_total + rhs.gold_total,
        }
    }
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, rhs: MatchCounts) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for MatchCounts {
    fn sum<I: Iterator<Item = MatchCounts>>(iter: I) -> Self {
        iter.fold(MatchCounts::default(), Add::add)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Counts exact matches between one sentence's gold and predicted items.
pub fn match_items<T: Eq + Hash + Clone>(gold: &[T], pred: &[T]) -> MatchCounts {
    let gold = dedup(gold);
    let pred = dedup(pred);
    let gold_set: HashSet<&T> = gold.iter().collect();
    MatchCounts {
        true_positives: pred.iter().filter(|p| gold_set.contains(p)).count(),
        predicted_total: pred.len(),
        gold_total: gold.len(),
    }
}

pub fn match_quads(gold: &[QuadPrediction], pred: &[QuadPrediction]) -> MatchCounts {
    match_items(gold, pred)
}

pub fn match_pairs(gold: &[PairPrediction], pred: &[PairPrediction]) -> MatchCounts {
    match_items(gold, pred)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceCounts {
    pub sentence_id: String,
    #[serde(flatten)]
    pub counts: MatchCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: MatchCounts,
    pub malformed_count: usize,
    pub per_sentence: Vec<SentenceCounts>,
}

/// Sums counts corpus-wide, then divides.
pub fn micro_scores(per_sentence: Vec<SentenceCounts>, malformed_count: usize) -> EvalReport {
    let counts: MatchCounts = per_sentence.iter().map(|s| s.counts).sum();
    EvalReport {
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
        counts,
        malformed_count,
        per_sentence,
    }
}

/// Scores every gold sentence against the predictions filed under its id.
/// Sentences absent from `pred` count as having no predictions; predictions
/// for unknown ids are ignored.
pub fn score_corpus<T>(gold: &[(String, Vec<T>)], pred: &HashMap<String, Vec<T>>, malformed_count: usize) -> EvalReport
where
    T: Eq + Hash + Clone + Send + Sync,
{
    let per_sentence = gold
        .par_iter()
        .map(|(id, items)| SentenceCounts {
            sentence_id: id.clone(),
            counts: match_items(items, pred.get(id).map(Vec::as_slice).unwrap_or(&[])),
        })
        .collect();
    micro_scores(per_sentence, malformed_count)
}

/// Gold quads in the same normalized form the decoder produces.
pub fn gold_quads(graph: &SentenceGraph) -> Vec<QuadPrediction> {
    graph
        .quads()
        .iter()
        .map(|q| QuadPrediction {
            aspect: normalize(&graph.span_surface(q.aspect)),
            opinion: normalize(&graph.span_surface(q.opinion)),
            category: normalize(&q.category).as_str().to_string(),
            sentiment: PredictedSentiment::Polarity(q.sentiment),
        })
        .collect()
}

pub fn gold_pairs(graph: &SentenceGraph) -> Vec<PairPrediction> {
    gold_quads(graph).iter().map(QuadPrediction::pair).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Category,
    Sentiment,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{gold} gold quads but {predicted} predictions")]
pub struct LengthMismatch {
    pub gold: usize,
    pub predicted: usize,
}

fn element_matches(gold: &QuadPrediction, pred: &QuadPrediction, element: Element) -> bool {
    match element {
        Element::Category => gold.category == pred.category,
        Element::Sentiment => gold.sentiment == pred.sentiment,
    }
}

/// Number of positions where `element` agrees; predictions must be aligned
/// one-to-one with gold.
pub fn element_hits(
    gold: &[QuadPrediction],
    pred: &[QuadPrediction],
    element: Element,
) -> Result<usize, LengthMismatch> {
    if gold.len() != pred.len() {
        return Err(LengthMismatch {
            gold: gold.len(),
            predicted: pred.len(),
        });
    }
    Ok(gold
        .iter()
        .zip(pred)
        .filter(|(g, p)| element_matches(g, p, element))
        .count())
}

/// Fraction of aligned positions where `element` agrees; 1.0 for no gold.
pub fn element_accuracy(
    gold: &[QuadPrediction],
    pred: &[QuadPrediction],
    element: Element,
) -> Result<f64, LengthMismatch> {
    let hits = element_hits(gold, pred, element)?;
    Ok(if gold.is_empty() {
        1.0
    } else {
        hits as f64 / gold.len() as f64
    })
}

/// Formats a fraction as a percentage with one decimal.
pub fn percent(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

/// Plain-text table of labelled reports.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let width = rows.iter().map(|(name, _)| name.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>9}",
        "level", "P", "R", "F1", "tp", "pred", "gold", "malformed"
    );
    for (name, report) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>9}",
            name,
            percent(report.precision),
            percent(report.recall),
            percent(report.f1),
            report.counts.true_positives,
            report.counts.predicted_total,
            report.counts.gold_total,
            report.malformed_count,
        );
    }
    out
}
