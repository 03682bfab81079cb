//! Syntax-aware aspect sentiment quad prediction: corpus I/O, dependency
//! serialization, instruction generation, output decoding and scoring.

pub mod baseline;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod promptgen;
pub mod syntax;

#[cfg(test)]
mod fixtures;

pub use baseline::Predictor;
pub use corpus::{AnnotatedSentence, DependencyEdge, ElementKind, Sentiment, SentimentQuad, Span, Token};
pub use decode::{PairPrediction, QuadPrediction, Term};
pub use error::Error;
pub use eval::{EvalReport, MatchCounts};
pub use pipeline::{PipelineReport, RunConfig};
pub use promptgen::{InstructionExample, PromptBuilder, TaskKind};
pub use syntax::{RelationMap, SentenceGraph, SyntaxStyle};
