use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use anyhow::{Context, Result};
use droidtriage::catalog::{load_catalog, CatalogMode, FeatureCatalog};
use droidtriage::classifier::{train, TrainedModel};
use droidtriage::corpus::load_corpus;
use droidtriage::corpusgen::{generate, shipped_table, spec_from_table, TABLE6_CSV};
use droidtriage::detectors::extract_corpus;
use droidtriage::eval::{cross_validate, emit_report, metrics_csv, CvConfig};
use droidtriage::matrix::VectorMatrix;
use droidtriage::ranking::{build_contingency, rank_features, ranking_csv, select_top, Preset};

use crate::{
    BenchArgs, CatalogArgs, ClassifyArgs, Command, EvaluateArgs, ExtractArgs, Format, GenArgs, InputArgs, RankArgs,
    SelectArgs, TrainArgs,
};

static QUIET: AtomicBool = AtomicBool::new(false);

fn note(message: std::fmt::Arguments<'_>) {
    if !QUIET.load(Ordering::Relaxed) {
        eprintln!("{message}");
    }
}

pub fn run(command: Command, quiet: bool) -> Result<()> {
    QUIET.store(quiet, Ordering::Relaxed);
    match command {
        Command::Gen(a) => gen(a),
        Command::Extract(a) => extract(a),
        Command::Rank(a) => rank(a),
        Command::Train(a) => train_cmd(a),
        Command::Classify(a) => classify(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Bench(a) => bench(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn catalog(args: &CatalogArgs) -> Result<FeatureCatalog> {
    Ok(load_catalog(&args.catalog, args.mode)?)
}

fn preset(args: &SelectArgs) -> Preset {
    match args.top {
        Some(n) => Preset::Top(n as usize),
        None => args.features,
    }
}

/// Vectors over `catalog`'s features, extracted or read from a vector CSV.
fn load_matrix(input: &InputArgs, catalog: &FeatureCatalog) -> Result<VectorMatrix> {
    if let Some(path) = &input.vectors {
        let matrix = VectorMatrix::read_csv(path)?;
        return Ok(matrix.project(&catalog.names())?);
    }
    let root = input.corpus.as_deref().expect("clap requires --corpus or --vectors");
    let default_labels = root.join("labels.csv");
    let labels = input
        .labels
        .clone()
        .or_else(|| default_labels.is_file().then_some(default_labels));
    let corpus = load_corpus(root, labels.as_deref())?;
    let (matrix, stats) = extract_corpus(&corpus, catalog, input.jobs)?;
    for w in stats.warnings() {
        note(format_args!("warning: {w}"));
    }
    Ok(matrix)
}

fn gen(a: GenArgs) -> Result<()> {
    let text = match shipped_table(&a.table) {
        Some(t) => t.to_string(),
        None => fs::read_to_string(&a.table).with_context(|| format!("reading frequency table {}", a.table))?,
    };
    let catalog = load_catalog(&a.catalog, CatalogMode::M)?;
    let spec = spec_from_table(&text, &catalog, a.benign, a.malware, a.seed)?;
    let corpus = generate(&spec, &catalog, &a.out, a.filler_lines)?;
    note(format_args!(
        "generated {} apps ({} benign, {} suspicious) in {}",
        corpus.samples.len(),
        a.benign,
        a.malware,
        corpus.root.display()
    ));
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let catalog = catalog(&a.catalog)?;
    let default_labels = a.corpus.join("labels.csv");
    let labels = a
        .labels
        .clone()
        .or_else(|| default_labels.is_file().then_some(default_labels));
    let corpus = load_corpus(&a.corpus, labels.as_deref())?;
    let (matrix, stats) = extract_corpus(&corpus, &catalog, a.jobs)?;
    for w in stats.warnings() {
        note(format_args!("warning: {w}"));
    }
    emit(a.out.as_deref(), &matrix.to_csv_string())?;
    if let Some(path) = &a.stats {
        fs::write(path, stats.to_csv_string()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let catalog = catalog(&a.catalog)?;
    let matrix = load_matrix(&a.input, &catalog)?;
    let ranked = rank_features(&build_contingency(&matrix)?);
    let text = match a.format {
        Format::Csv => ranking_csv(&ranked),
        Format::Json => serde_json::to_string_pretty(&ranked)? + "\n",
    };
    emit(a.out.as_deref(), &text)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let catalog = catalog(&a.catalog)?;
    let matrix = load_matrix(&a.input, &catalog)?;
    let ranked = rank_features(&build_contingency(&matrix)?);
    let selection = select_top(&ranked, preset(&a.select))?;
    let model = train(&matrix, &selection, a.select.alpha, catalog.mode)?;
    emit(a.out.as_deref(), &model.to_json_string())
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let catalog = load_catalog(&a.catalog, model.catalog_mode())?.project(&model.feature_names())?;
    let matrix = load_matrix(&a.input, &catalog)?;
    let predictions = model.classify_matrix(&matrix, a.threshold)?;
    let text = match a.format {
        Format::Csv => {
            let mut s = String::from("app_id,posterior,score,decision\n");
            for p in &predictions {
                let _ = writeln!(s, "{},{},{},{}", p.sample_id, p.posterior, p.score, p.decision);
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&predictions)? + "\n",
    };
    emit(a.out.as_deref(), &text)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let catalog = catalog(&a.catalog)?;
    let matrix = load_matrix(&a.input, &catalog)?;
    let config = CvConfig {
        catalog_mode: catalog.mode,
        preset: preset(&a.select),
        alpha: a.select.alpha,
        folds: a.folds,
        seed: a.seed,
        threshold: 0.5,
    };
    let report = cross_validate(&matrix, &config, a.input.jobs)?;
    emit_report(&report, &a.out)?;
    let summary = match a.format {
        Format::Csv => metrics_csv(&report),
        Format::Json => serde_json::to_string_pretty(&report.average)? + "\n",
    };
    emit(None, &summary)
}

fn bench(a: BenchArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus, None)?;
    let full = load_catalog(&a.catalog, CatalogMode::M)?;
    let mixed25: Vec<String> = spec_from_table(TABLE6_CSV, &full, u64::MAX, u64::MAX, 0)?
        .entries
        .into_iter()
        .map(|e| e.feature)
        .collect();
    let settings: Vec<(&str, FeatureCatalog)> = vec![
        ("permissions-only", load_catalog(&a.catalog, CatalogMode::P)?),
        ("code-only", load_catalog(&a.catalog, CatalogMode::C)?),
        ("mixed-25", full.project(&mixed25)?),
        ("mixed-all", full),
    ];
    let mut best = vec![Duration::MAX; settings.len()];
    // interleave settings so slow drift affects all of them alike
    for _ in 0..a.repeats.max(1) {
        for (i, (_, catalog)) in settings.iter().enumerate() {
            let (_, stats) = extract_corpus(&corpus, catalog, a.jobs)?;
            best[i] = best[i].min(stats.wall);
        }
    }
    let apps = corpus.len().max(1) as f64;
    let mut out = String::from("setting,features,apps,wall_ms,per_app_ms\n");
    for ((name, catalog), wall) in settings.iter().zip(&best) {
        let ms = wall.as_secs_f64() * 1000.0;
        let _ = writeln!(
            out,
            "{name},{},{},{ms:.3},{:.3}",
            catalog.len(),
            corpus.len(),
            ms / apps
        );
    }
    emit(a.out.as_deref(), &out)
}
