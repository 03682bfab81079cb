mod common;

use std::fs;

use asqp_core::promptgen::{emit_jsonl, read_examples, PromptBuilder};
use asqp_core::TaskKind;
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    task: TaskKind,
    header: String,
    instruction: String,
    input: String,
    output: String,
    end_marker: String,
}

fn golden() -> Vec<Golden> {
    let text = fs::read_to_string(common::golden_dir().join("worked.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Tasks whose subgraph blocks list more than one neighbour.
const MULTI_NEIGHBOR: [TaskKind; 3] = [
    TaskKind::ClassifyPairToCS,
    TaskKind::ClassifyAtoC,
    TaskKind::ClassifyAtoS,
];

#[test]
fn golden_covers_every_task_in_order() {
    let tasks: Vec<TaskKind> = golden().iter().map(|g| g.task).collect();
    assert_eq!(tasks, TaskKind::ALL);
    for g in golden() {
        assert_eq!(g.header, g.task.header());
    }
}

#[test]
fn instructions_and_outputs_match_byte_for_byte() {
    let graph = common::worked();
    let builder = PromptBuilder::default();
    for g in golden() {
        let example = builder.training_example(g.task, &graph).unwrap();
        assert_eq!(example.instruction, g.instruction, "{}", g.task);
        assert_eq!(example.output, g.output, "{}", g.task);
    }
}

#[test]
fn inputs_match_byte_for_byte_where_order_is_unambiguous() {
    let graph = common::worked();
    let builder = PromptBuilder::default();
    for g in golden().iter().filter(|g| !MULTI_NEIGHBOR.contains(&g.task)) {
        let example = builder.training_example(g.task, &graph).unwrap();
        assert_eq!(example.input, g.input, "{}", g.task);
    }
}

#[test]
fn inputs_match_up_to_neighbor_order() {
    let graph = common::worked();
    let builder = PromptBuilder::default();
    for g in golden().iter().filter(|g| MULTI_NEIGHBOR.contains(&g.task)) {
        let example = builder.training_example(g.task, &graph).unwrap();
        assert_ne!(example.input, g.input, "{}", g.task);
        assert_eq!(
            common::canonical_neighbors(&example.input),
            common::canonical_neighbors(&g.input),
            "{}",
            g.task
        );
    }
}

#[test]
fn printed_end_marker_layout_is_reproducible() {
    let graph = common::worked();
    let builder = PromptBuilder::default();
    let dir = tempfile::tempdir().unwrap();
    for g in golden() {
        let example = builder.training_example(g.task, &graph).unwrap();
        let path = dir.path().join(format!("{}.jsonl", g.task));
        let marker = format!("\n{}", g.end_marker);
        emit_jsonl(&[example], &path, Some(&marker)).unwrap();
        let back = read_examples(&path).unwrap();
        assert_eq!(back[0].output, format!("{}\n{}", g.output, g.end_marker));
    }
}
