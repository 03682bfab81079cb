#![allow(dead_code)]

use std::path::{Path, PathBuf};

use asqp_core::corpus::{align_all, load_acos, load_conllu, AcosFormat, CaseMode, CategorySet, PolarityMap};
use asqp_core::{AnnotatedSentence, DependencyEdge, SentenceGraph, Token};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Loads `<stem>.tsv` with `<stem>.conllu` from `dir`.
pub fn load_pair(dir: &Path, stem: &str, categories: CategorySet) -> Vec<SentenceGraph> {
    let format = AcosFormat::new(PolarityMap::default(), categories);
    let sentences = load_acos(&dir.join(format!("{stem}.tsv")), &format).unwrap();
    let parses = load_conllu(&dir.join(format!("{stem}.conllu"))).unwrap();
    align_all(&sentences, &parses, CaseMode::Sensitive).unwrap()
}

pub fn worked() -> SentenceGraph {
    load_pair(&data_dir(), "worked", CategorySet::restaurant()).remove(0)
}

pub fn mini() -> Vec<SentenceGraph> {
    load_pair(&data_dir(), "mini", CategorySet::restaurant())
}

pub const LABELS: [&str; 12] = [
    "amod",
    "advmod",
    "nmod:poss",
    "det",
    "compound",
    "nsubj",
    "obj",
    "conj",
    "cc",
    "punct",
    "case",
    "obl",
];

/// A random single-rooted tree over `n` tokens: nodes are visited in a
/// random order and each picks its head among those visited earlier.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize) -> Vec<DependencyEdge> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut edges = vec![DependencyEdge::new(0, order[0], "root")];
    for i in 1..n {
        let head = order[rng.random_range(0..i)];
        let label = LABELS[rng.random_range(0..LABELS.len())];
        edges.push(DependencyEdge::new(head, order[i], label));
    }
    edges
}

pub fn words(n: usize) -> Vec<Token> {
    (1..=n)
        .map(|i| Token {
            index: i,
            surface: format!("w{i}"),
        })
        .collect()
}

pub fn random_graph<R: Rng>(rng: &mut R, n: usize) -> SentenceGraph {
    let sentence = AnnotatedSentence {
        id: "random".into(),
        tokens: words(n),
        quads: vec![],
    };
    SentenceGraph::new(sentence, random_tree(rng, n)).unwrap()
}

/// Independent matcher: quadratic dedup, then greedy one-to-one matching.
pub fn brute_force_counts<T: PartialEq + Clone>(gold: &[T], pred: &[T]) -> (usize, usize, usize) {
    let mut g: Vec<T> = Vec::new();
    for item in gold {
        if !g.contains(item) {
            g.push(item.clone());
        }
    }
    let mut p: Vec<T> = Vec::new();
    for item in pred {
        if !p.contains(item) {
            p.push(item.clone());
        }
    }
    let mut used = vec![false; g.len()];
    let mut tp = 0;
    for item in &p {
        for (j, candidate) in g.iter().enumerate() {
            if !used[j] && candidate == item {
                used[j] = true;
                tp += 1;
                break;
            }
        }
    }
    (tp, p.len(), g.len())
}

/// Sorts the comma-separated names inside every `(...)` group that follows
/// "connected to", so neighbour order can be ignored in comparisons.
pub fn canonical_neighbors(text: &str) -> String {
    let mut out = String::new();
    let mut rest = text;
    while let Some(at) = rest.find("connected to (") {
        let open = at + "connected to (".len();
        out.push_str(&rest[..open]);
        let close = rest[open..].find(')').map(|c| open + c).unwrap_or(rest.len());
        let mut names: Vec<&str> = rest[open..close].split(", ").collect();
        names.sort_unstable();
        out.push_str(&names.join(", "));
        rest = &rest[close..];
    }
    out.push_str(rest);
    out
}
