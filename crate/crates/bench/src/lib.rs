//! Synthetic corpora for the benchmarks under `benches/`.

use asqp_core::{AnnotatedSentence, DependencyEdge, SentenceGraph, Sentiment, SentimentQuad, Span, Token};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 16] = [
    "the", "pizza", "was", "great", "but", "service", "slow", "and", "staff", "rude", "wine", "list", "cheap", "decor",
    "nice", ",",
];
const LABELS: [&str; 8] = ["amod", "nsubj", "cop", "cc", "conj", "det", "punct", "compound"];
const CATEGORIES: [&str; 4] = ["food quality", "service general", "drinks prices", "ambience general"];

/// `count` random sentences of 8 to 40 tokens, each with up to four quads.
pub fn synthetic_corpus(count: usize, seed: u64) -> Vec<SentenceGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| sentence(&mut rng, i)).collect()
}

fn sentence(rng: &mut ChaCha8Rng, id: usize) -> SentenceGraph {
    let n = rng.random_range(8..=40);
    let tokens = (1..=n)
        .map(|index| Token {
            index,
            surface: WORDS[rng.random_range(0..WORDS.len())].to_string(),
        })
        .collect();
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut edges = vec![DependencyEdge::new(0, order[0], "root")];
    for i in 1..n {
        let head = order[rng.random_range(0..i)];
        edges.push(DependencyEdge::new(
            head,
            order[i],
            LABELS[rng.random_range(0..LABELS.len())],
        ));
    }
    let span = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.15) {
            Span::Implicit
        } else {
            let begin = rng.random_range(1..=n);
            Span::explicit(begin, rng.random_range(begin..=n.min(begin + 1)))
        }
    };
    let quads = (0..rng.random_range(1..=4))
        .map(|_| SentimentQuad {
            aspect: span(rng),
            opinion: span(rng),
            category: CATEGORIES[rng.random_range(0..CATEGORIES.len())].to_string(),
            sentiment: Sentiment::ALL[rng.random_range(0..3)],
        })
        .collect();
    let sentence = AnnotatedSentence {
        id: format!("synthetic:{id}"),
        tokens,
        quads,
    };
    SentenceGraph::new(sentence, edges).expect("generated trees are valid")
}
