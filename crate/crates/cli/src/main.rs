use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bta_forest::bench::{run_bench, BenchConfig};
use bta_forest::libsvm::{read_libsvm_file, write_predictions, ParseOptions, Prediction};
use bta_forest::{
    class_priors, confusion_from_predictions, evaluate, load_model, save_model, train_forest, with_threads,
    Aggregator, Dataset, Error, Execution, FeatureSubset, ForestModel, ForestParams, Result,
    Smoothing, Strategy, TreeParams, VoteMatrix,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bta", version, about = "Random forests with Bayesian tree aggregation")]
struct Cli {
    /// Worker threads for parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Disable data parallelism entirely.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest and save it.
    Train(TrainArgs),
    /// Write per-sample predictions and scores.
    Predict(PredictArgs),
    /// Evaluate a saved model on a labelled test set.
    Evaluate(EvaluateArgs),
    /// Repeated train/evaluate runs comparing strategies.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Merge the lowest classes so that this many remain.
    #[arg(long)]
    merge_classes: Option<usize>,
    /// Use only the first N training samples.
    #[arg(long)]
    train_limit: Option<usize>,
}

#[derive(Args)]
struct ForestArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    trees: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..))]
    min_split: u64,
    /// `sqrt` or a positive count.
    #[arg(long, default_value = "sqrt", value_parser = parse_feature_subset)]
    features_per_node: FeatureSubset,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    forest: ForestArgs,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Mv,
    BtaEps,
    BtaB,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long, value_enum, default_value = "bta-eps")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    b: f64,
}

impl StrategyArgs {
    fn resolve(&self) -> Strategy {
        match self.strategy {
            StrategyArg::Mv => Strategy::MajorityVote,
            StrategyArg::BtaEps => Strategy::Bta(Smoothing::EpsilonFloor(self.epsilon)),
            StrategyArg::BtaB => Strategy::Bta(Smoothing::Kuncheva(self.b)),
        }
    }
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Expected class count after merging; must match the model.
    #[arg(long)]
    merge_classes: Option<usize>,
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    /// Comma-separated: mv, bta-eps[=EPS], bta-b[=B].
    #[arg(long, default_value = "mv,bta-eps", value_delimiter = ',', value_parser = parse_strategy)]
    strategies: Vec<Strategy>,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Run repeats concurrently (results are unchanged).
    #[arg(long)]
    parallel_repeats: bool,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    forest: ForestArgs,
    #[command(flatten)]
    data: DataArgs,
}

fn parse_feature_subset(s: &str) -> std::result::Result<FeatureSubset, String> {
    if s == "sqrt" {
        return Ok(FeatureSubset::Sqrt);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(FeatureSubset::Count(n)),
        _ => Err(format!("expected `sqrt` or a positive integer, got {s:?}")),
    }
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    let (name, value) = match s.split_once('=') {
        Some((n, v)) => (n, Some(v)),
        None => (s, None),
    };
    let number = |default: f64| -> std::result::Result<f64, String> {
        match value {
            None => Ok(default),
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => Err(format!("bad parameter {v:?} in {s:?}")),
            },
        }
    };
    match name {
        "mv" if value.is_none() => Ok(Strategy::MajorityVote),
        "bta-eps" => Ok(Strategy::Bta(Smoothing::EpsilonFloor(number(1e-5)?))),
        "bta-b" => Ok(Strategy::Bta(Smoothing::Kuncheva(number(0.5)?))),
        _ => Err(format!("unknown strategy {s:?} (expected mv, bta-eps[=EPS], bta-b[=B])")),
    }
}

fn tree_params(args: &ForestArgs) -> TreeParams {
    TreeParams {
        min_samples_split: args.min_split as usize,
        features_per_node: args.features_per_node,
        max_depth: None,
    }
}

fn load_training(path: &Path, data: &DataArgs) -> Result<Dataset> {
    let opts = ParseOptions {
        expected_num_features: None,
        limit: data.train_limit,
    };
    let (ds, diag) = read_libsvm_file(path, opts)?;
    log::info!(
        "{}: {} samples, {} features, {} classes ({} blank lines)",
        path.display(),
        ds.len(),
        ds.num_features(),
        ds.num_classes(),
        diag.skipped_blank_lines
    );
    match data.merge_classes {
        Some(k) => ds.merge_bottom_classes(k),
        None => Ok(ds),
    }
}

fn load_test(path: &Path, model_dict: &bta_forest::LabelDict) -> Result<Dataset> {
    let (ds, _) = read_libsvm_file(path, ParseOptions::default())?;
    ds.align_to(model_dict)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{value:#}")?;
    out.flush()?;
    Ok(())
}

fn cmd_train(args: &TrainArgs, exec: Execution) -> Result<()> {
    let ds = load_training(&args.train, &args.data)?;
    let params = ForestParams {
        num_trees: args.forest.trees as usize,
        tree: tree_params(&args.forest),
        seed: args.seed,
    };
    let model = train_forest(&ds, &params, exec)?;
    let mut out = BufWriter::new(File::create(&args.model)?);
    save_model(&model, &mut out)?;

    let counts = ds.class_counts();
    println!("samples      {}", ds.len());
    println!("features     {}", ds.num_features());
    println!("classes      {}", ds.num_classes());
    for (class, count) in counts.iter().enumerate() {
        println!(
            "  class {:<12} {:>8}  prior {:.4}",
            ds.label_dict().name(class),
            count,
            model.priors().probs()[class]
        );
    }
    let oob: Vec<u64> = model.oob_matrices().iter().map(|m| m.total()).collect();
    let mean = oob.iter().sum::<u64>() as f64 / oob.len() as f64;
    println!(
        "oob size     mean {:.1} ({:.3} of N), min {}, max {}",
        mean,
        mean / ds.len() as f64,
        oob.iter().min().unwrap(),
        oob.iter().max().unwrap()
    );
    println!("model        {}", args.model.display());
    Ok(())
}

fn load_model_file(path: &Path) -> Result<ForestModel> {
    load_model(io::BufReader::new(File::open(path).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

fn cmd_predict(args: &PredictArgs, exec: Execution) -> Result<()> {
    let model = load_model_file(&args.model)?;
    let (test, _) = read_libsvm_file(&args.test, ParseOptions::default())?;
    let agg = Aggregator::new(&model, args.strategy.resolve())?;
    let votes = VoteMatrix::collect(&model, test.samples(), exec);
    let predictions: Vec<Prediction> = (0..votes.len())
        .map(|i| {
            let (class, scores) = agg.scores(votes.row(i));
            Prediction {
                sample_index: i,
                class,
                scores,
            }
        })
        .collect();
    match &args.output {
        Some(path) => write_predictions(BufWriter::new(File::create(path)?), model.label_dict(), &predictions),
        None => write_predictions(io::stdout().lock(), model.label_dict(), &predictions),
    }
}

fn cmd_evaluate(args: &EvaluateArgs, exec: Execution) -> Result<()> {
    let model = load_model_file(&args.model)?;
    if let Some(k) = args.merge_classes {
        if k != model.num_classes() {
            return Err(Error::Config(format!(
                "--merge-classes {k} but the model has {} classes",
                model.num_classes()
            )));
        }
    }
    let test = load_test(&args.test, model.label_dict())?;
    let strategy = args.strategy.resolve();
    let agg = Aggregator::new(&model, strategy)?;
    let predicted = VoteMatrix::collect(&model, test.samples(), exec).decide_all(&agg, exec);
    let m = confusion_from_predictions(test.labels(), &predicted, model.num_classes())?;
    let report = evaluate(&m, model.priors().majority())?;
    println!("strategy {}", strategy.label());
    print!("{}", report.to_text(model.label_dict()));
    if let Some(path) = &args.report {
        write_json(path, &report.to_json(model.label_dict(), &strategy.label()))?;
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs, exec: Execution) -> Result<()> {
    let train = load_training(&args.train, &args.data)?;
    let test = load_test(&args.test, train.label_dict())?;
    let cfg = BenchConfig {
        repeats: args.repeats as usize,
        forest: ForestParams {
            num_trees: args.forest.trees as usize,
            tree: tree_params(&args.forest),
            seed: args.seed_base,
        },
        strategies: args.strategies.clone(),
        negative_class: class_priors(&train)?.majority(),
        exec,
        parallel_repeats: args.parallel_repeats && exec == Execution::Parallel,
    };
    let table = run_bench(&train, &test, &cfg)?;
    println!(
        "train {} ({} classes, majority prior {:.3}), test {}, {} trees, {} repeats",
        train.len(),
        train.num_classes(),
        train.class_counts()[cfg.negative_class] as f64 / train.len() as f64,
        test.len(),
        cfg.forest.num_trees,
        cfg.repeats
    );
    print!("{}", table.to_text());
    if let Some(path) = &args.report {
        write_json(path, &table.to_json())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let result = with_threads(cli.threads, || match &cli.command {
        Command::Train(a) => cmd_train(a, exec),
        Command::Predict(a) => cmd_predict(a, exec),
        Command::Evaluate(a) => cmd_evaluate(a, exec),
        Command::Bench(a) => cmd_bench(a, exec),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
