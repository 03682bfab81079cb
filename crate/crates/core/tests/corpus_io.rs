mod common;

use std::fs;

use asqp_core::corpus::{
    align_all, corpus_stats, load_acos, load_conllu, parse_conllu, to_acos_line, write_conllu, AcosFormat, CaseMode,
    CategorySet, ParsedSentence, PolarityMap,
};
use asqp_core::syntax::{read_corpus, write_corpus};
use asqp_core::{Error, Sentiment, Span};

fn restaurant() -> AcosFormat {
    AcosFormat::new(PolarityMap::default(), CategorySet::restaurant())
}

#[test]
fn mini_corpus_loads_and_aligns() {
    let graphs = common::mini();
    assert_eq!(graphs.len(), 7);
    assert_eq!(graphs[0].id(), "mini:1");
    assert_eq!(graphs[0].text(), "the pizza was great but the service was slow .");
    let recommend = &graphs[1].quads()[0];
    assert_eq!(recommend.aspect, Span::Implicit);
    assert_eq!(graphs[1].span_surface(recommend.opinion), "highly recommend");
    assert!(graphs[2].quads().is_empty());
    assert_eq!(graphs[3].span_surface(graphs[3].quads()[0].aspect), "fish tacos");
    assert_eq!(graphs[4].quads().len(), 3, "duplicate quads are kept");
    assert_eq!(graphs[6].quads()[0].opinion, Span::Implicit);
    assert_eq!(graphs[6].quads()[0].sentiment, Sentiment::Negative);
}

#[test]
fn stats_on_mini_corpus() {
    let sentences = load_acos(&common::data_dir().join("mini.tsv"), &restaurant()).unwrap();
    let stats = corpus_stats(&sentences);
    assert_eq!(stats.sentence_count, 7);
    assert_eq!(stats.quad_count, 10);
    assert_eq!(stats.implicit_aspect_count, 2);
    assert_eq!(stats.implicit_opinion_count, 1);
    assert_eq!(stats.category_histogram["restaurant general"], 4);
    assert_eq!(stats.sentiment_histogram["positive"], 4);
    assert_eq!(stats.sentiment_histogram["neutral"], 3);
    assert_eq!(stats.sentiment_histogram["negative"], 3);
}

#[test]
fn acos_lines_round_trip() {
    let path = common::data_dir().join("mini.tsv");
    let text = fs::read_to_string(&path).unwrap();
    let sentences = load_acos(&path, &restaurant()).unwrap();
    for (line, sentence) in text.lines().zip(&sentences) {
        assert_eq!(to_acos_line(sentence, &restaurant()).unwrap(), line);
    }
}

#[test]
fn conllu_round_trip() {
    let parses = load_conllu(&common::data_dir().join("mini.conllu")).unwrap();
    let again: Vec<ParsedSentence> = parse_conllu(&write_conllu(&parses))
        .unwrap()
        .into_iter()
        .zip(&parses)
        .map(|(mut p, orig)| {
            p.line = orig.line;
            p
        })
        .collect();
    assert_eq!(again, parses);
}

#[test]
fn canonical_corpus_round_trip() {
    let graphs = common::mini();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mini.jsonl");
    write_corpus(&graphs, &path).unwrap();
    assert_eq!(read_corpus(&path).unwrap(), graphs);
    let first = fs::read_to_string(&path).unwrap();
    write_corpus(&read_corpus(&path).unwrap(), &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), first);
}

#[test]
fn misaligned_files_are_rejected() {
    let sentences = load_acos(&common::data_dir().join("mini.tsv"), &restaurant()).unwrap();
    let parses = load_conllu(&common::data_dir().join("worked.conllu")).unwrap();
    assert!(matches!(
        align_all(&sentences, &parses, CaseMode::Sensitive),
        Err(Error::SentenceCount {
            annotated: 7,
            parsed: 1
        })
    ));
    assert!(align_all(&sentences[..1], &parses, CaseMode::Sensitive).is_err());
}

#[test]
fn unknown_category_is_an_error() {
    let format = AcosFormat::new(PolarityMap::default(), CategorySet::from_raw(["FOOD#QUALITY"]));
    let err = load_acos(&common::data_dir().join("mini.tsv"), &format).unwrap_err();
    assert!(err.to_string().contains("SERVICE#GENERAL"), "{err}");
}
