mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, ColorChoice, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use droidtriage::catalog::CatalogMode;
use droidtriage::classifier::Alpha;
use droidtriage::ranking::Preset;

/// Static triage of decoded Android apps: extract, rank, train, classify, evaluate.
#[derive(Debug, Parser)]
#[command(name = "droidtriage", version)]
struct Cli {
    /// Suppress warnings and progress messages on standard error.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus whose per-class feature counts match a table.
    Gen(GenArgs),
    /// Extract binary feature vectors from a corpus into a CSV matrix.
    Extract(ExtractArgs),
    /// Rank features by mutual information with the class over the whole labeled input.
    Rank(RankArgs),
    /// Train a naive Bayes model on the top-ranked features.
    Train(TrainArgs),
    /// Classify apps with a saved model.
    Classify(ClassifyArgs),
    /// Stratified k-fold evaluation. Features are re-ranked on each training
    /// portion, unlike `rank`, which uses every labeled app.
    Evaluate(EvaluateArgs),
    /// Time extraction for permission-only, code-only, mixed-25 and full catalogs.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CatalogArgs {
    /// Feature catalog file, or `builtin` for the shipped 189-feature catalog.
    #[arg(long, default_value = "builtin")]
    catalog: PathBuf,
    /// Catalog mode: P permissions, C code properties, M both.
    #[arg(long, default_value = "M", value_parser = parse_mode)]
    mode: CatalogMode,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Corpus root with one decoded app per subdirectory.
    #[arg(long, required_unless_present = "vectors", conflicts_with = "vectors")]
    corpus: Option<PathBuf>,
    /// Labels CSV (`app_id,label`); defaults to `<corpus>/labels.csv` when present.
    #[arg(long, requires = "corpus")]
    labels: Option<PathBuf>,
    /// Previously extracted vector CSV, instead of a corpus.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Worker threads for extraction and folds (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Feature preset: 5fT (ranks 1-5), 5fL (16-20), 10f, 15f, 20f.
    #[arg(long, default_value = "15f", conflicts_with = "top", value_parser = parse_preset)]
    features: Preset,
    /// Use the top N ranked features instead of a preset.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    top: Option<u64>,
    /// Additive smoothing constant (decimal or fraction such as 1/2).
    #[arg(long, default_value = "1", value_parser = parse_alpha)]
    alpha: Alpha,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Frequency table: `table4`, `table5`, `table6` or a CSV path.
    #[arg(long, visible_alias = "spec")]
    table: String,
    #[arg(long, default_value_t = 1000)]
    benign: u64,
    #[arg(long, default_value_t = 1000)]
    malware: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inert code lines added to every app.
    #[arg(long, default_value_t = 0)]
    filler_lines: usize,
    #[arg(long, default_value = "builtin")]
    catalog: PathBuf,
    /// Output directory (must be empty or absent).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    catalog: CatalogArgs,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Vector CSV destination (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-app timing CSV destination.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    catalog: CatalogArgs,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    catalog: CatalogArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    select: SelectArgs,
    /// Model JSON destination (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "builtin")]
    catalog: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Posterior at or above which an app is called suspicious.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    catalog: CatalogArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    select: SelectArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report directory: report.json, metrics.csv, roc.csv, roc.svg.
    #[arg(long)]
    out: PathBuf,
    /// Summary printed to standard output.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "builtin")]
    catalog: PathBuf,
    /// Timed runs per setting; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<CatalogMode, String> {
    s.parse().map_err(|e: droidtriage::Error| e.to_string())
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: droidtriage::Error| e.to_string())
}

fn parse_alpha(s: &str) -> Result<Alpha, String> {
    s.parse().map_err(|e: droidtriage::Error| e.to_string())
}

fn main() -> ExitCode {
    let color = if std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty()) {
        ColorChoice::Never
    } else {
        ColorChoice::Auto
    };
    let parsed = Cli::command()
        .color(color)
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command, cli.quiet) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
