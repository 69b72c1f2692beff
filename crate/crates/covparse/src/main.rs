//! Command-line surface: train, parse, eval, merge-treebanks.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 model error.
//! Logging via the COVPARSE_LOG environment variable (error/info/debug).

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use log::info;

use covparse::evaluation::{self, DeprelMatch, Score};
use covparse::merge::{merge_treebanks, rank_by_las, RankedSource};
use covparse::model_io::{load_model_file, save_model_file, ModelIoError};
use covparse::parser::{parse_sentence, train, ParseConfig, TrainConfig};
use covparse::scorer::{
    build_vocab, load_external_embeddings, Channels, ExternalEmbeddings, Hyperparams, Model,
};
use covparse::treebank::{read_conllu, write_conllu, Arc, GoldTree, ReadMode, Sentence};

#[derive(Parser)]
#[command(
    name = "covparse",
    version,
    about = "Greedy non-projective dependency parser (Covington transitions, dynamic oracle, BiLSTM scorer)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a gold CoNLL-U treebank.
    Train(TrainArgs),
    /// Parse a CoNLL-U file with a trained model.
    Parse(ParseArgs),
    /// Score system output against gold CoNLL-U.
    Eval(EvalArgs),
    /// Concatenate treebank prefixes, or rank source models on a sample.
    MergeTreebanks(MergeArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Gold training treebank (CoNLL-U).
    #[arg(long)]
    train: PathBuf,
    /// Held-out treebank, evaluated per epoch; never trained on.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Pretrained word vectors (text format), frozen during training.
    #[arg(long)]
    external_embeddings: Option<PathBuf>,
    /// Training epochs (up to 100 for tiny corpora).
    #[arg(long)]
    epochs: Option<usize>,
    /// Stacked BiLSTM output size.
    #[arg(long, value_parser = parse_bilstm_out)]
    bilstm_out: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output model file.
    #[arg(long, default_value = "model.covparse")]
    out: PathBuf,
    /// JSON file with hyperparameter overrides (same keys as the defaults;
    /// flags take precedence over the file).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Words rarer than this train as the unknown symbol.
    #[arg(long)]
    min_count: Option<u64>,
    /// Save the model every N epochs while training.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Training sentences re-parsed per epoch for the LAS metric.
    #[arg(long, default_value_t = 100)]
    metrics_sample: usize,
}

fn parse_bilstm_out(s: &str) -> Result<usize, String> {
    match s {
        "512" => Ok(512),
        "256" => Ok(256),
        _ => Err("supported values are 512 and 256; use --config for other sizes".to_string()),
    }
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input CoNLL-U (tags used if present; heads may be empty).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Parallel sentence workers; output is identical for any value.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Deprel for extra roots reattached by the single-root step.
    #[arg(long, default_value = "parataxis")]
    reattach_deprel: String,
}

#[derive(Args)]
struct EvalArgs {
    /// System output file; repeat for several pairs.
    #[arg(long = "system", required = true)]
    system: Vec<PathBuf>,
    /// Gold file; one per --system, in order.
    #[arg(long = "gold", required = true)]
    gold: Vec<PathBuf>,
    /// Compare full deprels instead of the universal part before ':'.
    #[arg(long)]
    exact_deprel: bool,
}

#[derive(Args)]
struct MergeArgs {
    /// Source treebank; repeat in priority order.
    #[arg(long = "source")]
    source: Vec<PathBuf>,
    /// Sentences taken from the front of each source.
    #[arg(long, default_value_t = 2000)]
    take: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rank models on a sample file instead of merging.
    #[arg(long)]
    rank: bool,
    /// Gold sample file scored in --rank mode.
    #[arg(long)]
    sample: Option<PathBuf>,
    /// name=model-file entries ranked in --rank mode.
    #[arg(long = "model", value_parser = parse_named_model)]
    model: Vec<(String, PathBuf)>,
}

fn parse_named_model(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err("expected NAME=MODEL_FILE".to_string()),
    }
}

#[derive(Debug)]
enum AppError {
    Usage(String),
    Data(String),
    Model(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Model(_) => 3,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(m) | AppError::Data(m) | AppError::Model(m) => f.write_str(m),
        }
    }
}

fn data_err(e: impl fmt::Display) -> AppError {
    AppError::Data(e.to_string())
}

fn model_err(e: ModelIoError) -> AppError {
    AppError::Model(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("COVPARSE_LOG", "error"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Parse(args) => cmd_parse(args),
        Command::Eval(args) => cmd_eval(args),
        Command::MergeTreebanks(args) => cmd_merge_treebanks(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn read_file(path: &Path, mode: ReadMode) -> Result<Vec<Sentence>, AppError> {
    let file = File::open(path)
        .map_err(|e| AppError::Data(format!("cannot open {}: {e}", path.display())))?;
    read_conllu(BufReader::new(file), mode)
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
}

fn gold_corpus(path: &Path) -> Result<Vec<(Sentence, GoldTree)>, AppError> {
    read_file(path, ReadMode::Strict)?
        .into_iter()
        .map(|s| {
            let tree = s
                .gold_tree()
                .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
            Ok((s, tree))
        })
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<(), AppError> {
    let mut hyper = match &args.config {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| AppError::Data(format!("cannot open {}: {e}", path.display())))?;
            serde_json::from_reader::<_, Hyperparams>(BufReader::new(file))
                .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?
        }
        None => Hyperparams::default(),
    };
    if let Some(epochs) = args.epochs {
        hyper.epochs = epochs;
    }
    if let Some(bilstm_out) = args.bilstm_out {
        hyper.bilstm_out = bilstm_out;
    }
    if let Some(min_count) = args.min_count {
        hyper.min_count = min_count;
    }
    hyper.validate().map_err(|e| AppError::Usage(e.to_string()))?;

    let corpus = gold_corpus(&args.train)?;
    let dev = args.dev.as_deref().map(gold_corpus).transpose()?;
    let external = args
        .external_embeddings
        .as_deref()
        .map(|path| -> Result<ExternalEmbeddings, AppError> {
            let file = File::open(path)
                .map_err(|e| AppError::Data(format!("cannot open {}: {e}", path.display())))?;
            load_external_embeddings(BufReader::new(file), hyper.dim_external)
                .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
        })
        .transpose()?;

    let vocab = build_vocab(&corpus, hyper.min_count).map_err(data_err)?;
    let channels = Channels::detect(&vocab, external.is_some());
    let mut model =
        Model::new(hyper.clone(), vocab, channels, external, args.seed).map_err(data_err)?;
    info!(
        "training on {} sentences, input dim {}, {} labels",
        corpus.len(),
        model.input_dim(),
        model.label_count()
    );
    let cfg = TrainConfig {
        epochs: hyper.epochs,
        seed: args.seed,
        metrics_sample: args.metrics_sample,
        checkpoint_every: args.checkpoint_every,
        dev,
        ..TrainConfig::default()
    };
    let mut checkpoint_error = None;
    train(&mut model, &corpus, &cfg, |model, m| {
        let dev_part = m
            .dev_las
            .map(|d| format!(" dev_las={d:.2}"))
            .unwrap_or_default();
        println!(
            "epoch {:>3} loss={:.4} train_las={:.2}{}",
            m.epoch, m.hinge_loss, m.train_las, dev_part
        );
        if let Some(every) = cfg.checkpoint_every {
            if every > 0 && m.epoch % every == 0 && checkpoint_error.is_none() {
                checkpoint_error = save_model_file(model, &args.out).err();
            }
        }
    })
    .map_err(data_err)?;
    if let Some(e) = checkpoint_error {
        return Err(model_err(e));
    }
    save_model_file(&model, &args.out).map_err(model_err)?;
    println!("model written to {}", args.out.display());
    Ok(())
}

fn apply_arcs(sentence: &mut Sentence, arcs: &[Arc]) {
    for arc in arcs {
        let tok = &mut sentence.tokens[arc.dep - 1];
        tok.head = Some(arc.head);
        tok.deprel = Some(arc.label.clone());
    }
}

fn parse_all(
    model: &Model,
    sentences: &[Sentence],
    cfg: &ParseConfig,
    jobs: usize,
) -> Result<Vec<Vec<Arc>>, AppError> {
    if jobs <= 1 {
        return sentences
            .iter()
            .map(|s| parse_sentence(model, s, cfg).map_err(data_err))
            .collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| AppError::Data(e.to_string()))?;
    pool.install(|| {
        sentences
            .par_iter()
            .map(|s| parse_sentence(model, s, cfg).map_err(data_err))
            .collect()
    })
}

fn cmd_parse(args: ParseArgs) -> Result<(), AppError> {
    let model = load_model_file(&args.model).map_err(model_err)?;
    let mut sentences = read_file(&args.input, ReadMode::Lenient)?;
    let cfg = ParseConfig {
        reattach_deprel: args.reattach_deprel.clone(),
    };
    let parses = parse_all(&model, &sentences, &cfg, args.jobs)?;
    for (sentence, arcs) in sentences.iter_mut().zip(&parses) {
        apply_arcs(sentence, arcs);
    }
    let out = File::create(&args.output)
        .map_err(|e| AppError::Data(format!("cannot create {}: {e}", args.output.display())))?;
    let mut out = BufWriter::new(out);
    write_conllu(&sentences, &mut out).map_err(data_err)?;
    out.flush().map_err(data_err)?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), AppError> {
    if args.system.len() != args.gold.len() {
        return Err(AppError::Usage(format!(
            "{} --system files but {} --gold files",
            args.system.len(),
            args.gold.len()
        )));
    }
    let mode = if args.exact_deprel {
        DeprelMatch::Exact
    } else {
        DeprelMatch::Universal
    };
    let mut scores: Vec<Score> = Vec::new();
    for (sys_path, gold_path) in args.system.iter().zip(&args.gold) {
        let system = read_file(sys_path, ReadMode::Lenient)?;
        let gold = read_file(gold_path, ReadMode::Lenient)?;
        let score = evaluation::evaluate(&system, &gold, mode).map_err(data_err)?;
        println!("{}\t{}", sys_path.display(), score.summary_line());
        scores.push(score);
    }
    if scores.len() > 1 {
        let avg = evaluation::macro_average(&scores).map_err(data_err)?;
        println!("macro-average\t{}", avg.summary_line());
    }
    Ok(())
}

fn cmd_merge_treebanks(args: MergeArgs) -> Result<(), AppError> {
    if args.rank {
        return cmd_rank(args);
    }
    if args.source.is_empty() {
        return Err(AppError::Usage(
            "at least one --source is required".to_string(),
        ));
    }
    let out_path = args
        .out
        .as_deref()
        .ok_or_else(|| AppError::Usage("--out is required when merging".to_string()))?;
    let mut sources = Vec::new();
    for path in &args.source {
        sources.push(read_file(path, ReadMode::Strict)?);
    }
    let merged = merge_treebanks(&sources, args.take);
    let out = File::create(out_path)
        .map_err(|e| AppError::Data(format!("cannot create {}: {e}", out_path.display())))?;
    let mut out = BufWriter::new(out);
    write_conllu(&merged, &mut out).map_err(data_err)?;
    out.flush().map_err(data_err)?;
    println!("{} sentences written to {}", merged.len(), out_path.display());
    Ok(())
}

fn cmd_rank(args: MergeArgs) -> Result<(), AppError> {
    let sample_path = args
        .sample
        .as_deref()
        .ok_or_else(|| AppError::Usage("--rank requires --sample".to_string()))?;
    if args.model.is_empty() {
        return Err(AppError::Usage(
            "--rank requires at least one --model NAME=FILE".to_string(),
        ));
    }
    let gold = read_file(sample_path, ReadMode::Lenient)?;
    let parse_cfg = ParseConfig::default();
    let mut entries = Vec::new();
    for (name, path) in &args.model {
        let model = load_model_file(path).map_err(model_err)?;
        let parses = parse_all(&model, &gold, &parse_cfg, 1)?;
        let mut system = gold.clone();
        for (sentence, arcs) in system.iter_mut().zip(&parses) {
            apply_arcs(sentence, arcs);
        }
        let score =
            evaluation::evaluate(&system, &gold, DeprelMatch::Universal).map_err(data_err)?;
        entries.push(RankedSource {
            name: name.clone(),
            las: score.las,
        });
    }
    for entry in rank_by_las(entries) {
        println!("{}\t{:.2}", entry.name, entry.las);
    }
    Ok(())
}
