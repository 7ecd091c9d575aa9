use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use revfm_core::eval::{
    ablation_run, evaluate, generate, mf_train, rank_candidates, MeanScorer, MetricsReport, NeuralScorer, RankedList,
};
use revfm_core::ingest::{dataset_stats, read_reviews_file, split_dataset, write_reviews, DatasetSplit, ReviewRecord};
use revfm_core::model::{tiny_instance, BetaGradient, Model, ModelMode};
use revfm_core::train::{load_checkpoint, save_checkpoint, train, train_model, Corpus, Prepared, TrainConfig, TrainHistory};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Version of the directory layout written by `ingest`.
pub const INGEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLIT_FILES: [&str; 3] = ["train.jsonl", "validation.jsonl", "test.jsonl"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub skipped_lines: usize,
    pub users: usize,
    pub items: usize,
    pub density: f64,
    pub vocab_size: usize,
    pub vocab_cap: usize,
    pub max_tokens: usize,
}

fn header(w: &mut dyn Write, seed: u64) -> anyhow::Result<()> {
    writeln!(w, "# seed={seed}")?;
    Ok(())
}

fn create_file(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn read_records(path: &Path) -> anyhow::Result<Vec<ReviewRecord>> {
    let outcome = read_reviews_file(path)?;
    if outcome.skipped > 0 {
        log::warn!("{}: skipped {} malformed lines", path.display(), outcome.skipped);
    }
    Ok(outcome.records)
}

/// Loads a split from an ingested directory, or splits a raw review file
/// with `seed` and `ratios`.
pub fn load_split(path: &Path, ratios: [f64; 3], seed: u64) -> anyhow::Result<DatasetSplit> {
    if !path.exists() {
        bail!("data path {} does not exist", path.display());
    }
    if !path.is_dir() {
        return Ok(split_dataset(&read_records(path)?, ratios, seed)?);
    }
    let manifest_path = path.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: Manifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;
    if manifest.format_version != INGEST_FORMAT_VERSION {
        bail!(
            "{} has format version {}, expected {INGEST_FORMAT_VERSION}",
            manifest_path.display(),
            manifest.format_version
        );
    }
    let [train, validation, test] = SPLIT_FILES.map(|f| read_records(&path.join(f)));
    Ok(DatasetSplit::from_parts(train?, validation?, test?, manifest.seed))
}

/// Parses the raw file, splits it and writes the splits, the vocabulary,
/// the review collections and a manifest into `cfg.out`.
pub fn cmd_ingest(cfg: &RunConfig, w: &mut dyn Write) -> anyhow::Result<Manifest> {
    let data = cfg.data_path()?;
    if data.is_dir() {
        bail!("ingest expects a review file, got directory {}", data.display());
    }
    let outcome = read_reviews_file(data)?;
    let split = split_dataset(&outcome.records, cfg.ratios, cfg.seed)?;
    let corpus = Corpus::build(&split.train, cfg.train.vocab_cap, cfg.train.max_tokens)?;
    ensure_dir(&cfg.out)?;

    for (name, part) in SPLIT_FILES.iter().zip([&split.train, &split.validation, &split.test]) {
        let mut f = create_file(&cfg.out.join(name))?;
        write_reviews(&mut f, part)?;
        f.flush()?;
    }
    let mut f = create_file(&cfg.out.join("vocab.txt"))?;
    for word in corpus.vocab.words() {
        writeln!(f, "{word}")?;
    }
    f.flush()?;
    write_collections(&corpus, &cfg.out.join("collections.jsonl"))?;

    let stats = dataset_stats(&outcome.records);
    let manifest = Manifest {
        format_version: INGEST_FORMAT_VERSION,
        seed: cfg.seed,
        ratios: cfg.ratios,
        train: split.train.len(),
        validation: split.validation.len(),
        test: split.test.len(),
        skipped_lines: outcome.skipped,
        users: stats.users,
        items: stats.items,
        density: stats.density,
        vocab_size: corpus.vocab.len(),
        vocab_cap: cfg.train.vocab_cap,
        max_tokens: cfg.train.max_tokens,
    };
    fs::write(cfg.out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;

    header(w, cfg.seed)?;
    writeln!(
        w,
        "records={} skipped={} train={} validation={} test={} vocab={}",
        stats.ratings,
        outcome.skipped,
        manifest.train,
        manifest.validation,
        manifest.test,
        manifest.vocab_size
    )?;
    writeln!(w, "wrote {}", cfg.out.display())?;
    Ok(manifest)
}

#[derive(Serialize)]
struct CollectionLine<'a> {
    side: &'a str,
    id: &'a str,
    tokens: Vec<u32>,
}

fn write_collections(corpus: &Corpus, path: &Path) -> anyhow::Result<()> {
    let mut f = create_file(path)?;
    let index = &corpus.index;
    for (i, id) in index.devices().ids().iter().enumerate() {
        let line = CollectionLine { side: "device", id, tokens: index.device_collection(i + 1, None) };
        writeln!(f, "{}", serde_json::to_string(&line)?)?;
    }
    for (i, id) in index.services().ids().iter().enumerate() {
        let line = CollectionLine { side: "service", id, tokens: index.service_collection(i + 1, None) };
        writeln!(f, "{}", serde_json::to_string(&line)?)?;
    }
    f.flush()?;
    Ok(())
}

/// Users, items, ratings and density of the data (all splits together).
pub fn cmd_stats(cfg: &RunConfig, w: &mut dyn Write) -> anyhow::Result<revfm_core::ingest::StatsReport> {
    let split = load_split(cfg.data_path()?, cfg.ratios, cfg.seed)?;
    let all: Vec<ReviewRecord> = [split.train, split.validation, split.test].concat();
    let stats = dataset_stats(&all);
    header(w, cfg.seed)?;
    writeln!(
        w,
        "users={} items={} ratings={} density={:.6}",
        stats.users, stats.items, stats.ratings, stats.density
    )?;
    Ok(stats)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub history: TrainHistory,
    /// Clamped test MAE and RMSE of the returned parameters.
    pub test_errors: Option<(f64, f64)>,
}

/// Trains on the data's train split and writes the checkpoint plus
/// `history.log` and `history.json` next to it in `cfg.out`.
pub fn cmd_train(cfg: &RunConfig, w: &mut dyn Write) -> anyhow::Result<TrainOutcome> {
    let split = load_split(cfg.data_path()?, cfg.ratios, cfg.seed)?;
    let data = Prepared::new(&split, cfg.train.vocab_cap, cfg.train.max_tokens)?;
    let (model, history) = match &cfg.embeddings {
        None => train(&cfg.train, &data)?,
        Some(path) => {
            let mut model = Model::new(cfg.train.model_config(&data.corpus, data.global_mean), cfg.train.seed)?;
            let file = File::open(path).with_context(|| format!("opening embeddings {}", path.display()))?;
            let rows = model.load_embeddings(&data.corpus.vocab, std::io::BufReader::new(file))?;
            log::info!("loaded {rows} embedding rows from {}", path.display());
            train_model(&cfg.train, &data, model)?
        }
    };
    ensure_dir(&cfg.out)?;
    if let Some(parent) = cfg.checkpoint.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    save_checkpoint(&cfg.checkpoint, &model, &cfg.train, &data.corpus)?;
    fs::write(cfg.out.join("history.log"), history.to_log_lines())?;
    fs::write(cfg.out.join("history.json"), serde_json::to_string_pretty(&history)? + "\n")?;
    let test_errors = revfm_core::train::rating_errors(&model, &data.test);

    header(w, cfg.seed)?;
    write!(w, "{}", history.to_log_lines())?;
    if let Some(best) = history.best_epoch {
        writeln!(w, "best_epoch={best}")?;
    }
    if let Some((mae, rmse)) = test_errors {
        writeln!(w, "test_mae={mae:.6} test_rmse={rmse:.6}")?;
    }
    writeln!(w, "checkpoint={}", cfg.checkpoint.display())?;
    Ok(TrainOutcome { checkpoint: cfg.checkpoint.clone(), history, test_errors })
}

#[derive(Clone, Debug)]
pub struct EvaluateOutcome {
    pub report: MetricsReport,
    /// `(label, report)` per ablation mode and baseline, when requested.
    pub ablation: Vec<(String, MetricsReport)>,
}

/// Metrics of the checkpoint on the test split. With ablation enabled,
/// also retrains every mode with the checkpoint's configuration and adds
/// the matrix factorization and global-mean baselines; the table goes to
/// `ablation.csv` in `cfg.out`.
///
/// A raw review file is split with the checkpoint's seed so the test
/// split matches the one held out during training.
pub fn cmd_evaluate(cfg: &RunConfig, w: &mut dyn Write) -> anyhow::Result<EvaluateOutcome> {
    let ckpt = load_checkpoint(&cfg.checkpoint)?;
    let seed = ckpt.train_config.seed;
    let split = load_split(cfg.data_path()?, cfg.ratios, seed)?;
    if split.test.is_empty() {
        bail!("the test split is empty");
    }
    let report = evaluate(&NeuralScorer::new(&ckpt.model, &ckpt.corpus), &split, cfg.k);
    header(w, seed)?;
    writeln!(w, "mode={}", ckpt.model.mode())?;
    write!(w, "{}", report.to_text())?;

    let mut ablation = Vec::new();
    if cfg.ablation {
        let tc = &ckpt.train_config;
        let data = Prepared::new(&split, tc.vocab_cap, tc.max_tokens)?;
        for r in ablation_run(&ModelMode::ALL, tc, &data, &split, cfg.k)? {
            ablation.push((r.mode.to_string(), r.report));
        }
        let mf = mf_train(&split.train, &cfg.mf)?;
        ablation.push(("mf".to_string(), evaluate(&mf, &split, cfg.k)));
        ablation.push(("global-mean".to_string(), evaluate(&MeanScorer(data.global_mean), &split, cfg.k)));

        let mut table = format!("# seed={seed}\n{}\n", MetricsReport::csv_header());
        for (label, r) in &ablation {
            table.push_str(&r.csv_row(label));
            table.push('\n');
        }
        ensure_dir(&cfg.out)?;
        fs::write(cfg.out.join("ablation.csv"), &table)?;
        write!(w, "{}", table.split_once('\n').map_or("", |(_, rest)| rest))?;
    }
    Ok(EvaluateOutcome { report, ablation })
}

#[derive(Clone, Debug)]
pub struct RecommendOutcome {
    pub list: RankedList,
    /// The device was not in the training data.
    pub cold_start: bool,
}

/// Top-`k` services for `device` among those it has not rated in
/// training. Unknown devices take the cold-start path and rank the whole
/// catalog.
pub fn cmd_recommend(cfg: &RunConfig, device: &str, w: &mut dyn Write) -> anyhow::Result<RecommendOutcome> {
    let ckpt = load_checkpoint(&cfg.checkpoint)?;
    let index = &ckpt.corpus.index;
    let d = index.devices().index_of(device);
    let seen: BTreeSet<usize> = index.services_of(d);
    let candidates: Vec<String> = index
        .services()
        .ids()
        .iter()
        .enumerate()
        .filter(|(i, _)| !seen.contains(&(i + 1)))
        .map(|(_, s)| s.clone())
        .collect();
    let list = rank_candidates(&NeuralScorer::new(&ckpt.model, &ckpt.corpus), device, &candidates, cfg.k);
    let cold_start = d == 0;

    header(w, ckpt.train_config.seed)?;
    writeln!(w, "device={device} cold_start={cold_start} k={}", cfg.k)?;
    for (rank, (service, score)) in list.items.iter().enumerate() {
        writeln!(w, "{}\t{service}\t{score:.4}", rank + 1)?;
    }
    Ok(RecommendOutcome { list, cold_start })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckRow {
    pub mode: ModelMode,
    pub beta_gradient: BetaGradient,
    pub max_rel_error: f64,
    pub worst_tensor: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckOutcome {
    pub rows: Vec<GradcheckRow>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Finite-difference check of the full loss on the tiny instance, for
/// every mode and both treatments of the fusion weight.
pub fn cmd_gradcheck(cfg: &RunConfig, w: &mut dyn Write) -> anyhow::Result<GradcheckOutcome> {
    let g = &cfg.gradcheck;
    let mut cases: Vec<(ModelMode, BetaGradient)> = ModelMode::ALL.iter().map(|&m| (m, BetaGradient::Stop)).collect();
    cases.push((ModelMode::FusedDynamic, BetaGradient::Through));
    cases.push((ModelMode::LinearFused, BetaGradient::Through));

    header(w, cfg.seed)?;
    writeln!(w, "mode\tbeta\tmax_rel_error\tworst_tensor")?;
    let mut rows = Vec::new();
    for (mode, beta) in cases {
        let (mut model, batch) = tiny_instance(mode, beta, cfg.seed)?;
        let report = model.check_gradients(&batch, g.lambda, g.eps, g.coords_per_tensor, cfg.seed)?;
        let worst = report.worst().map(|t| t.name.clone()).unwrap_or_default();
        let row = GradcheckRow { mode, beta_gradient: beta, max_rel_error: report.max_rel_error(), worst_tensor: worst };
        writeln!(w, "{}\t{:?}\t{:.3e}\t{}", row.mode, row.beta_gradient, row.max_rel_error, row.worst_tensor)?;
        rows.push(row);
    }
    let max_rel_error = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let passed = max_rel_error < g.tolerance;
    writeln!(
        w,
        "max_rel_error={max_rel_error:.3e} tolerance={:.1e} {}",
        g.tolerance,
        if passed { "ok" } else { "FAILED" }
    )?;
    Ok(GradcheckOutcome { rows, max_rel_error, passed })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub f: usize,
    pub report: MetricsReport,
    pub best_epoch: Option<usize>,
}

/// Trains and evaluates one model per feature size f (filters and
/// engagement latent width both set to f); the table goes to `sweep.csv`.
pub fn cmd_sweep(cfg: &RunConfig, w: &mut dyn Write) -> anyhow::Result<Vec<SweepRow>> {
    if cfg.f_values.is_empty() {
        bail!("no sweep values given");
    }
    let split = load_split(cfg.data_path()?, cfg.ratios, cfg.seed)?;
    if split.test.is_empty() {
        bail!("the test split is empty");
    }
    let data = Prepared::new(&split, cfg.train.vocab_cap, cfg.train.max_tokens)?;
    let mut rows = Vec::new();
    for &f in &cfg.f_values {
        let tc = TrainConfig { filters: f, latent_dim: f, ..cfg.train.clone() };
        let (model, history) = train(&tc, &data)?;
        let report = evaluate(&NeuralScorer::new(&model, &data.corpus), &split, cfg.k);
        log::info!("sweep f={f} mae={:.6} rmse={:.6}", report.mae, report.rmse);
        rows.push(SweepRow { f, report, best_epoch: history.best_epoch });
    }
    let mut table = format!("# seed={}\nf,mae,rmse,recall_at_k,precision_at_k,ndcg_at_k,best_epoch\n", cfg.seed);
    for r in &rows {
        let m = &r.report;
        table.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            r.f,
            m.mae,
            m.rmse,
            m.recall_at_k,
            m.precision_at_k,
            m.ndcg_at_k,
            r.best_epoch.map_or_else(|| "na".to_string(), |e| e.to_string())
        ));
    }
    ensure_dir(&cfg.out)?;
    fs::write(cfg.out.join("sweep.csv"), &table)?;
    write!(w, "{table}")?;
    Ok(rows)
}

/// Writes a planted low-rank corpus to `synthetic.jsonl` in `cfg.out`.
pub fn cmd_synth(cfg: &RunConfig, w: &mut dyn Write) -> anyhow::Result<PathBuf> {
    let data = generate(&cfg.synth)?;
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("synthetic.jsonl");
    let mut f = create_file(&path)?;
    write_reviews(&mut f, &data.records)?;
    f.flush()?;
    header(w, cfg.seed)?;
    let stats = dataset_stats(&data.records);
    writeln!(
        w,
        "users={} items={} ratings={} density={:.6}",
        stats.users, stats.items, stats.ratings, stats.density
    )?;
    writeln!(w, "wrote {}", path.display())?;
    Ok(path)
}
