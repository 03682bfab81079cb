use std::collections::HashMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use asqp_core::baseline::{serve, GoldReplay, HeuristicPredictor, Predictor, SubprocessPredictor};
use asqp_core::corpus::{
    align_all, corpus_stats, load_acos, load_conllu, AcosFormat, CaseMode, CategorySet, PolarityMap, Sentiment,
};
use asqp_core::decode::{decode_line, read_jsonl, write_jsonl, DecodeConfig, DecodedLine, FieldSpec, PredictionLine};
use asqp_core::eval::{element_accuracy, gold_pairs, gold_quads, percent, render_table, score_corpus, Element};
use asqp_core::pipeline::{load_run_config, run_stage2_isolated, run_two_stage, RunConfig};
use asqp_core::promptgen::{
    build_dataset, emit_jsonl, DirectionSelection, PromptBuilder, PromptConfig, Step, TaskKind, TaskSelection,
    TemplateSet,
};
use asqp_core::syntax::{read_corpus, write_corpus, RelationMap, SentenceGraph, SyntaxStyle};

/// Exit status for bad flags or flag combinations.
const USAGE: u8 = 2;

/// Raised for problems with the command line rather than the data.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Aspect sentiment quad toolkit: corpus ingestion, instruction datasets,
/// output decoding, evaluation and the two-stage pipeline.
#[derive(Parser, Debug)]
#[command(name = "asqp", version)]
struct Cli {
    /// Directory holding relations.toml, templates.toml and asqp.toml.
    #[arg(long, global = true, env = "ASQP_CONFIG_DIR")]
    config_dir: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate ACOS files against CoNLL-U parses and write a canonical corpus.
    Ingest(IngestArgs),
    /// Corpus statistics as JSON.
    Stats(StatsArgs),
    /// Write instruction-tuning JSONL files, one per task.
    BuildDataset(BuildArgs),
    /// Parse raw prediction lines into structured records.
    Decode(DecodeArgs),
    /// Score decoded predictions against a gold corpus.
    Evaluate(EvaluateArgs),
    /// Run two-stage inference with a predictor and score it.
    Pipeline(PipelineArgs),
    /// Answer predictor requests on stdin with gold or heuristic outputs.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct FormatArgs {
    /// Category inventory: `restaurant`, `infer` (from the input files) or a file with one label per line.
    #[arg(long, default_value = "infer")]
    categories: String,

    /// Polarity codes, e.g. `0=negative,1=neutral,2=positive`.
    #[arg(long, default_value = "0=negative,1=neutral,2=positive")]
    polarity: String,
}

impl FormatArgs {
    fn format(&self, acos: &[PathBuf]) -> Result<AcosFormat> {
        let polarity: PolarityMap = self
            .polarity
            .parse()
            .map_err(|e: String| usage(format!("--polarity: {e}")))?;
        let categories = match self.categories.as_str() {
            "restaurant" => CategorySet::restaurant(),
            "infer" => {
                let mut set = CategorySet::default();
                for path in acos {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    set.merge(CategorySet::infer_from_acos(&text));
                }
                set
            }
            path => CategorySet::load(Path::new(path))?,
        };
        Ok(AcosFormat::new(polarity, categories))
    }
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// ACOS TSV files.
    #[arg(long, required = true, num_args = 1..)]
    acos: Vec<PathBuf>,

    /// CoNLL-U parses, one per ACOS file, in the same order.
    #[arg(long, required = true, num_args = 1..)]
    conllu: Vec<PathBuf>,

    /// Output corpus (JSON lines).
    #[arg(long, short)]
    out: PathBuf,

    /// Compare token surfaces case-insensitively.
    #[arg(long)]
    ignore_case: bool,

    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// ACOS TSV files.
    #[arg(long, num_args = 1.., required_unless_present = "corpus")]
    acos: Vec<PathBuf>,

    /// Canonical corpus files written by `ingest`.
    #[arg(long, num_args = 1.., conflicts_with = "acos")]
    corpus: Vec<PathBuf>,

    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StyleArg {
    Nl,
    #[value(name = "nl-syn")]
    NlSyn,
    Symbol,
    #[value(name = "symbol-syn")]
    SymbolSyn,
    None,
}

impl StyleArg {
    fn style(self) -> Option<SyntaxStyle> {
        match self {
            StyleArg::Nl | StyleArg::NlSyn => Some(SyntaxStyle::NaturalLanguage),
            StyleArg::Symbol | StyleArg::SymbolSyn => Some(SyntaxStyle::Symbol),
            StyleArg::None => None,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    Ao,
    Oa,
    Both,
}

impl From<DirectionArg> for DirectionSelection {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Ao => DirectionSelection::AspectFirst,
            DirectionArg::Oa => DirectionSelection::OpinionFirst,
            DirectionArg::Both => DirectionSelection::Both,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Mode {
    /// Gold outputs with the end marker appended.
    Train,
    /// Empty outputs for inference.
    Prompt,
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// Canonical corpus files written by `ingest`.
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,

    /// Output directory; files are named `<task>.jsonl`.
    #[arg(long, short)]
    out_dir: PathBuf,

    /// A task name, `step1`, `step2`, `aux` or `all`.
    #[arg(long, default_value = "all", value_parser = parse_selection)]
    task: TaskSelection,

    #[arg(long, value_enum, default_value = "nl")]
    style: StyleArg,

    #[arg(long, value_enum, default_value = "both")]
    direction: DirectionArg,

    /// Neighbourhood radius for subgraph descriptions.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    hops: u32,

    #[arg(long, value_enum, default_value = "train")]
    mode: Mode,

    /// End-of-sequence marker appended to outputs in train mode.
    #[arg(long, default_value = "<|im_end|>")]
    eos: String,

    /// Do not append an end marker.
    #[arg(long, conflicts_with = "eos")]
    no_eos: bool,

    /// Also write `step1.jsonl` and `step2.jsonl`, concatenating the selected tasks of each step.
    #[arg(long)]
    concat_steps: bool,
}

fn parse_selection(s: &str) -> Result<TaskSelection, String> {
    s.parse()
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Prediction lines `{sentence_id, task, raw_output}`.
    #[arg(long, short)]
    input: PathBuf,

    /// Decoded output; `-` for stdout.
    #[arg(long, short, default_value = "-")]
    out: PathBuf,

    /// Record keys overriding the per-task defaults, e.g. `aspect,opinion`.
    #[arg(long, value_parser = parse_fields)]
    fields: Option<FieldSpec>,
}

fn parse_fields(s: &str) -> Result<FieldSpec, String> {
    s.parse().map_err(|e: asqp_core::decode::DecodeError| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Granularity {
    Quad,
    Pair,
    Element,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Gold corpus files written by `ingest`.
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,

    /// Decoded (or raw) prediction lines.
    #[arg(long)]
    predictions: PathBuf,

    #[arg(long, value_enum, default_value = "quad")]
    granularity: Granularity,

    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum PredictorKind {
    /// Replays gold targets.
    Gold,
    /// Dependency-rule baseline.
    Heuristic,
    /// External program speaking the JSONL protocol.
    Exec,
}

#[derive(Args, Debug)]
struct PredictorArgs {
    #[arg(long, value_enum)]
    predictor: PredictorKind,

    /// Program to run for `--predictor exec`.
    #[arg(long, required_if_eq("predictor", "exec"))]
    exec_cmd: Option<PathBuf>,

    /// Argument for the exec program (repeatable).
    #[arg(long = "exec-arg", allow_hyphen_values = true)]
    exec_args: Vec<String>,

    /// Category emitted by the heuristic (default: most frequent gold category).
    #[arg(long)]
    heuristic_category: Option<String>,

    /// Sentiment emitted by the heuristic.
    #[arg(long, default_value = "positive")]
    heuristic_sentiment: Sentiment,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Corpus files written by `ingest`.
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,

    /// Run directory for prompts, outputs and reports.
    #[arg(long)]
    run_dir: PathBuf,

    #[command(flatten)]
    predictor: PredictorArgs,

    /// Run config (TOML); defaults to `asqp.toml` in the config directory.
    #[arg(long, env = "ASQP_CONFIG")]
    config: Option<PathBuf>,

    #[arg(long, value_enum)]
    style: Option<StyleArg>,

    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    hops: Option<u32>,

    #[arg(long, value_parser = ["union", "intersection"])]
    merge: Option<String>,

    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,

    /// Only run classification on gold pairs.
    #[arg(long)]
    stage2_only: bool,

    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Corpus files the predictor looks sentences up in.
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,

    #[arg(long, value_enum, default_value = "gold")]
    predictor: PredictorKind,

    #[arg(long)]
    heuristic_category: Option<String>,

    #[arg(long, default_value = "positive")]
    heuristic_sentiment: Sentiment,
}

/// Relation map, templates and run config from the config directory.
struct Settings {
    relations: RelationMap,
    templates: TemplateSet,
    run: Option<RunConfig>,
}

impl Settings {
    fn load(dir: Option<&Path>) -> Result<Self> {
        let mut settings = Settings {
            relations: RelationMap::default(),
            templates: TemplateSet::default(),
            run: None,
        };
        let Some(dir) = dir else {
            return Ok(settings);
        };
        if !dir.is_dir() {
            return Err(usage(format!("config directory {} does not exist", dir.display())));
        }
        let relations = dir.join("relations.toml");
        if relations.is_file() {
            settings.relations = RelationMap::load(&relations)?;
        }
        let templates = dir.join("templates.toml");
        if templates.is_file() {
            settings.templates = TemplateSet::load(&templates)?;
        }
        let run = dir.join("asqp.toml");
        if run.is_file() {
            settings.run = Some(load_run_config(&run)?);
        }
        Ok(settings)
    }

    fn builder(&self, config: PromptConfig) -> Result<PromptBuilder> {
        Ok(PromptBuilder::new(
            self.templates.clone(),
            self.relations.clone(),
            config,
        )?)
    }
}

fn load_graphs(paths: &[PathBuf]) -> Result<Vec<SentenceGraph>> {
    let mut graphs = Vec::new();
    for path in paths {
        graphs.extend(read_corpus(path)?);
    }
    let mut seen = std::collections::HashSet::new();
    for graph in &graphs {
        if !seen.insert(graph.id()) {
            bail!(
                "sentence id {} appears more than once across the corpus files",
                graph.id()
            );
        }
    }
    Ok(graphs)
}

fn ingest(args: IngestArgs) -> Result<()> {
    if args.acos.len() != args.conllu.len() {
        return Err(usage(format!(
            "{} ACOS files but {} CoNLL-U files; pass one parse per annotation file",
            args.acos.len(),
            args.conllu.len()
        )));
    }
    let format = args.format.format(&args.acos)?;
    let case = if args.ignore_case {
        CaseMode::Insensitive
    } else {
        CaseMode::Sensitive
    };
    let mut graphs = Vec::new();
    for (acos, conllu) in args.acos.iter().zip(&args.conllu) {
        let sentences = load_acos(acos, &format)?;
        let parses = load_conllu(conllu)?;
        let aligned = align_all(&sentences, &parses, case)
            .with_context(|| format!("aligning {} with {}", acos.display(), conllu.display()))?;
        graphs.extend(aligned);
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    write_corpus(&graphs, &args.out)?;
    eprintln!("wrote {} sentences to {}", graphs.len(), args.out.display());
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let stats = if args.corpus.is_empty() {
        let format = args.format.format(&args.acos)?;
        let mut sentences = Vec::new();
        for path in &args.acos {
            sentences.extend(load_acos(path, &format)?);
        }
        corpus_stats(&sentences)
    } else {
        let graphs = load_graphs(&args.corpus)?;
        corpus_stats(graphs.iter().map(SentenceGraph::sentence))
    };
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn build(args: BuildArgs, settings: &Settings) -> Result<()> {
    let graphs = load_graphs(&args.corpus)?;
    let builder = settings.builder(PromptConfig {
        style: args.style.style(),
        hops: args.hops as usize,
        ..PromptConfig::default()
    })?;
    let tasks = args.task.tasks(args.direction.into());
    if tasks.is_empty() {
        return Err(usage("the task and direction selection leaves no tasks"));
    }
    let mut datasets = build_dataset(&graphs, &builder, &tasks)?;
    if args.mode == Mode::Prompt {
        for example in datasets.values_mut().flatten() {
            example.output.clear();
        }
    }
    let marker = (args.mode == Mode::Train && !args.no_eos).then_some(args.eos.as_str());
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    for (task, examples) in &datasets {
        let path = args.out_dir.join(format!("{task}.jsonl"));
        let n = emit_jsonl(examples, &path, marker)?;
        eprintln!("{}: {n} records", path.display());
    }
    if args.concat_steps {
        for (step, name) in [(Step::Extraction, "step1"), (Step::Classification, "step2")] {
            let examples: Vec<_> = datasets
                .iter()
                .filter(|(task, _)| task.step() == step)
                .flat_map(|(_, examples)| examples.iter().cloned())
                .collect();
            if !examples.is_empty() {
                let path = args.out_dir.join(format!("{name}.jsonl"));
                let n = emit_jsonl(&examples, &path, marker)?;
                eprintln!("{}: {n} records", path.display());
            }
        }
    }
    Ok(())
}

fn decode(args: DecodeArgs, settings: &Settings) -> Result<()> {
    let lines: Vec<PredictionLine> = read_jsonl(&args.input)?;
    let config = decode_config(settings);
    let decoded: Vec<DecodedLine> = lines
        .iter()
        .map(|line| decode_line(line, args.fields.as_ref(), &config))
        .collect();
    let malformed: usize = decoded.iter().map(|d| d.malformed_count).sum();
    if args.out == Path::new("-") {
        let stdout = io::stdout();
        let mut out = BufWriter::new(stdout.lock());
        for line in &decoded {
            serde_json::to_writer(&mut out, line)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    } else {
        write_jsonl(&decoded, &args.out)?;
    }
    eprintln!("decoded {} lines, {malformed} malformed records", decoded.len());
    Ok(())
}

fn decode_config(settings: &Settings) -> DecodeConfig {
    settings.run.as_ref().map(RunConfig::decode_config).unwrap_or_default()
}

/// Reads decoded lines, decoding raw prediction lines on the fly.
fn load_predictions(path: &Path, config: &DecodeConfig) -> Result<Vec<DecodedLine>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let decoded = match serde_json::from_str::<DecodedLine>(line) {
            Ok(d) => d,
            Err(_) => {
                let raw: PredictionLine = serde_json::from_str(line)
                    .with_context(|| format!("{}:{}: not a prediction line", path.display(), i + 1))?;
                decode_line(&raw, None, config)
            }
        };
        out.push(decoded);
    }
    Ok(out)
}

fn evaluate(args: EvaluateArgs, settings: &Settings) -> Result<()> {
    let graphs = load_graphs(&args.corpus)?;
    let lines = load_predictions(&args.predictions, &decode_config(settings))?;
    let classify: Vec<&DecodedLine> = lines.iter().filter(|l| l.task == TaskKind::ClassifyPairToCS).collect();
    match args.granularity {
        Granularity::Quad => {
            let mut pred: HashMap<String, Vec<_>> = HashMap::new();
            for line in &classify {
                pred.entry(line.sentence_id.clone()).or_default().extend(line.quads());
            }
            let malformed = classify.iter().map(|l| l.malformed_count).sum();
            let gold: Vec<_> = graphs.iter().map(|g| (g.id().to_string(), gold_quads(g))).collect();
            let report = score_corpus(&gold, &pred, malformed);
            print_report(&[("quad", &report)], args.json)
        }
        Granularity::Pair => {
            // extraction lines when present, otherwise the pairs inside quads
            let extraction: Vec<&DecodedLine> = lines.iter().filter(|l| l.task.step() == Step::Extraction).collect();
            let source = if extraction.is_empty() { classify } else { extraction };
            let mut pred: HashMap<String, Vec<_>> = HashMap::new();
            for line in &source {
                pred.entry(line.sentence_id.clone()).or_default().extend(line.pairs());
            }
            let malformed = source.iter().map(|l| l.malformed_count).sum();
            let gold: Vec<_> = graphs.iter().map(|g| (g.id().to_string(), gold_pairs(g))).collect();
            let report = score_corpus(&gold, &pred, malformed);
            print_report(&[("pair", &report)], args.json)
        }
        Granularity::Element => {
            let by_id: HashMap<&str, &DecodedLine> = classify.iter().map(|l| (l.sentence_id.as_str(), *l)).collect();
            let (mut positions, mut category, mut sentiment) = (0usize, 0.0, 0.0);
            for graph in graphs.iter().filter(|g| !g.quads().is_empty()) {
                let gold = gold_quads(graph);
                let pred = by_id.get(graph.id()).map(|l| l.quads()).unwrap_or_default();
                let n = gold.len() as f64;
                category += element_accuracy(&gold, &pred, Element::Category)
                    .with_context(|| format!("sentence {}", graph.id()))?
                    * n;
                sentiment += element_accuracy(&gold, &pred, Element::Sentiment)
                    .with_context(|| format!("sentence {}", graph.id()))?
                    * n;
                positions += gold.len();
            }
            let (category, sentiment) = if positions == 0 {
                (1.0, 1.0)
            } else {
                (category / positions as f64, sentiment / positions as f64)
            };
            if args.json {
                let value = serde_json::json!({
                    "category_accuracy": category,
                    "sentiment_accuracy": sentiment,
                    "positions": positions,
                });
                println!("{}", serde_json::to_string_pretty(&value)?);
            } else {
                println!(
                    "category accuracy {}  sentiment accuracy {}  positions {positions}",
                    percent(category),
                    percent(sentiment)
                );
            }
            Ok(())
        }
    }
}

fn print_report(rows: &[(&str, &asqp_core::EvalReport)], json: bool) -> Result<()> {
    if json {
        let value: serde_json::Map<String, serde_json::Value> = rows
            .iter()
            .map(|(name, report)| Ok((name.to_string(), serde_json::to_value(report)?)))
            .collect::<Result<_>>()?;
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        print!("{}", render_table(rows));
    }
    Ok(())
}

fn make_predictor(
    kind: PredictorKind,
    graphs: &[SentenceGraph],
    settings: &Settings,
    builder: &PromptBuilder,
    category: Option<String>,
    sentiment: Sentiment,
    exec: Option<(PathBuf, Vec<String>)>,
) -> Result<Box<dyn Predictor>> {
    Ok(match kind {
        PredictorKind::Gold => Box::new(GoldReplay::new(builder.clone(), graphs)),
        PredictorKind::Heuristic => {
            let category = category
                .or_else(|| HeuristicPredictor::majority_category(graphs))
                .unwrap_or_else(|| "none".to_string());
            Box::new(HeuristicPredictor::new(
                graphs,
                settings.relations.clone(),
                category,
                sentiment,
            ))
        }
        PredictorKind::Exec => {
            let (program, args) = exec.ok_or_else(|| usage("--predictor exec needs --exec-cmd"))?;
            Box::new(SubprocessPredictor::new(program, args))
        }
    })
}

fn pipeline(args: PipelineArgs, settings: &Settings) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => load_run_config(path)?,
        None => settings.run.clone().unwrap_or_default(),
    };
    if let Some(style) = args.style {
        config.style = style.style();
    }
    if let Some(hops) = args.hops {
        config.hops = hops as usize;
    }
    if let Some(merge) = &args.merge {
        config.merge = merge.parse().map_err(usage)?;
    }
    if let Some(direction) = args.direction {
        config.directions = direction.into();
    }
    let graphs = load_graphs(&args.corpus)?;
    let builder = settings.builder(config.prompt_config())?;
    let p = &args.predictor;
    let exec = p.exec_cmd.clone().map(|cmd| (cmd, p.exec_args.clone()));
    let predictor = make_predictor(
        p.predictor,
        &graphs,
        settings,
        &builder,
        p.heuristic_category.clone(),
        p.heuristic_sentiment,
        exec,
    )?;
    if args.stage2_only {
        let report = run_stage2_isolated(&graphs, predictor.as_ref(), &builder, &config, &args.run_dir)?;
        if args.json {
            println!("{}", serde_json::to_string_pretty(&report)?);
        } else {
            print!("{}", report.render());
        }
    } else {
        let report = run_two_stage(&graphs, predictor.as_ref(), &builder, &config, &args.run_dir)?;
        if args.json {
            println!("{}", serde_json::to_string_pretty(&report)?);
        } else {
            print!("{}", report.render());
        }
    }
    Ok(())
}

fn serve_cmd(args: ServeArgs, settings: &Settings) -> Result<()> {
    if args.predictor == PredictorKind::Exec {
        return Err(usage(
            "serve answers requests itself; use --predictor gold or heuristic",
        ));
    }
    let graphs = load_graphs(&args.corpus)?;
    let prompt = settings.run.as_ref().map(RunConfig::prompt_config).unwrap_or_default();
    let builder = settings.builder(prompt)?;
    let predictor = make_predictor(
        args.predictor,
        &graphs,
        settings,
        &builder,
        args.heuristic_category,
        args.heuristic_sentiment,
        None,
    )?;
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve(predictor.as_ref(), stdin.lock(), BufWriter::new(stdout.lock()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    let settings = Settings::load(cli.config_dir.as_deref())?;
    match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Stats(args) => stats(args),
        Command::BuildDataset(args) => build(args, &settings),
        Command::Decode(args) => decode(args, &settings),
        Command::Evaluate(args) => evaluate(args, &settings),
        Command::Pipeline(args) => pipeline(args, &settings),
        Command::Serve(args) => serve_cmd(args, &settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
