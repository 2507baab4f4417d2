//! Subcommand arguments and implementations.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use prockb_core::corpus::{self, ContextMode, Corpus};
use prockb_core::embedding::{EmbeddingStore, HashEmbedder};
use prockb_core::hierarchy::{self, ExpandPolicy, Pipeline};
use prockb_core::linkeval::{
    evaluate_model, read_gold, run_linking_with, write_gold, write_recall_tsv, GoldLink, LinkingSetup, RecallReport,
};
use prockb_core::rerank::{FeatureSource, FeatureTable, LexicalFeaturizer, LexicalSource, LinkTarget, RerankModel, TrainConfig};
use prockb_core::retrieval::{retrieve_steps, write_candidates, GoalIndex, DEFAULT_K};
use prockb_core::text::NormalizeOptions;
use prockb_core::textsearch::{corpus_docs, index_docs, Analyzer, ArticleField, Bm25Params};
use prockb_core::videoretrieval::{
    read_videos, write_metrics_tsv, FilterConfig, FilterCost, Query, QueryLevel, VideoCorpus, VideoSplit, VrMetrics,
    FILTERED_WEIGHTS, FILTER_CAP, REPORT_NS,
};
use prockb_core::Execution;

use crate::run::Run;
use crate::{DataError, UsageError};

const EXEC: Execution = Execution::Parallel;

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn load_corpus(run: &mut Run, path: &Path) -> Result<Corpus> {
    let bytes = run.read("corpus", path)?;
    Corpus::from_reader(bytes.as_slice(), NormalizeOptions::default())
        .with_context(|| format!("loading corpus `{}`", path.display()))
}

fn load_embeddings(run: &mut Run, path: &Path) -> Result<EmbeddingStore> {
    let bytes = run.read("embeddings", path)?;
    EmbeddingStore::from_reader(bytes.as_slice()).with_context(|| format!("loading embeddings `{}`", path.display()))
}

fn load_model(run: &mut Run, path: &Path) -> Result<RerankModel> {
    let bytes = run.read("model", path)?;
    RerankModel::from_reader(bytes.as_slice()).with_context(|| format!("loading model `{}`", path.display()))
}

fn load_features(run: &mut Run, path: &Path) -> Result<FeatureTable> {
    let bytes = run.read("features", path)?;
    FeatureTable::from_reader(bytes.as_slice()).with_context(|| format!("loading features `{}`", path.display()))
}

fn load_gold(run: &mut Run, path: &Path) -> Result<Vec<GoldLink>> {
    let bytes = run.read("gold", path)?;
    read_gold(bytes.as_slice()).with_context(|| format!("loading gold links `{}`", path.display()))
}

fn load_links(run: &mut Run, path: &Path) -> Result<HashMap<String, LinkTarget>> {
    let bytes = run.read("links", path)?;
    hierarchy::read_links(bytes.as_slice()).with_context(|| format!("loading links `{}`", path.display()))
}

fn load_step_ids(run: &mut Run, path: Option<&Path>, corpus: &Corpus) -> Result<Vec<String>> {
    let Some(path) = path else {
        return Ok(corpus.steps().map(|s| s.step_id.clone()).collect());
    };
    let bytes = run.read("steps", path)?;
    let text = String::from_utf8(bytes).with_context(|| format!("`{}` is not UTF-8", path.display()))?;
    let ids: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect();
    for id in &ids {
        if !corpus.contains_step(id) {
            return Err(DataError(format!("unknown step_id `{id}` in `{}`", path.display())).into());
        }
    }
    Ok(ids)
}

/// Pair features from a precomputed table, or lexical features matching the
/// model's dimension and context settings.
fn feature_source<'a>(
    run: &mut Run,
    path: Option<&Path>,
    corpus: &'a Corpus,
    dim: usize,
    context: ContextMode,
    window: usize,
) -> Result<Box<dyn FeatureSource + 'a>> {
    Ok(match path {
        Some(p) => {
            let table = load_features(run, p)?;
            if table.dim() != dim {
                return Err(DataError(format!(
                    "feature table `{}` has dim {}, expected {dim}",
                    p.display(),
                    table.dim()
                ))
                .into());
            }
            Box::new(table)
        }
        None => Box::new(LexicalSource::new(
            corpus,
            LexicalFeaturizer::with_corpus_idf(dim, corpus)?,
            context,
            window,
        )),
    })
}

#[derive(Args, Serialize)]
pub struct ValidateArgs {
    /// Corpus JSONL: one `{"id", "title", "steps": [{"id", "text"}]}` per line.
    #[arg(long)]
    corpus: PathBuf,
}

pub fn validate(a: ValidateArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("validate", out, &a)?;
    let bytes = run.read("corpus", &a.corpus)?;
    let report = corpus::validate(bytes.as_slice(), NormalizeOptions::default());
    let text = report.to_string();
    print!("{text}");
    run.write("report", "validation.tsv", text.as_bytes())?;
    run.finish()?;
    if !report.is_ok() {
        return Err(DataError(format!("{} problem(s) in `{}`", report.issues.len(), a.corpus.display())).into());
    }
    Ok(())
}

#[derive(Args, Serialize)]
pub struct BuildIndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Embedding dimension.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Hash seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lowercase text before hashing.
    #[arg(long)]
    lowercase: bool,
}

pub fn build_index(a: BuildIndexArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("build-index", out, &a)?;
    let corpus = load_corpus(&mut run, &a.corpus)?;
    let embedder = HashEmbedder::new(a.dim, a.seed)?.with_lowercase(a.lowercase);
    let store = EmbeddingStore::from_corpus(&corpus, &embedder, EXEC);
    run.write("embeddings", "embeddings.txt", &to_bytes(|b| store.write_to(b)))?;
    run.finish()
}

#[derive(Args, Serialize)]
pub struct RetrieveArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Embeddings file from `build-index` (or any `dim=` text file).
    #[arg(long)]
    embeddings: PathBuf,
    /// Candidates per step.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// File with one step_id per line. Defaults to every step.
    #[arg(long)]
    steps: Option<PathBuf>,
    /// Allow a step's own article as a candidate.
    #[arg(long)]
    include_parent: bool,
}

pub fn retrieve(a: RetrieveArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("retrieve", out, &a)?;
    let corpus = load_corpus(&mut run, &a.corpus)?;
    let store = load_embeddings(&mut run, &a.embeddings)?;
    let steps = load_step_ids(&mut run, a.steps.as_deref(), &corpus)?;
    let index = GoalIndex::for_corpus(&store, &corpus)?;
    let lists = retrieve_steps(&corpus, &store, &index, &steps, a.k, !a.include_parent, EXEC)?;
    run.write("candidates", "candidates.tsv", &to_bytes(|b| write_candidates(&lists, b)))?;
    run.finish()
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Gold links TSV: `step_id<TAB>goal_id`.
    #[arg(long)]
    gold: PathBuf,
    /// Precomputed pair features (`dim=` header, then `step goal v1..vd`).
    /// Defaults to built-in lexical features.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Dimension of the built-in lexical features.
    #[arg(long, default_value_t = 8)]
    feature_dim: usize,
    /// Initial weight of the stage-1 score.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    freeze_lambda: bool,
    /// Train without the unlinkable option.
    #[arg(long)]
    no_unlinkable: bool,
    /// Step context given to the lexical features: none, goal, surround, both.
    #[arg(long, default_value_t = ContextMode::None)]
    context: ContextMode,
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// Seeds the train/dev/test split and the batch order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "7,2,1")]
    split_ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,10,30")]
    recall_at: Vec<usize>,
}

impl TrainArgs {
    fn setup(&self) -> Result<LinkingSetup> {
        let ratios: [f64; 3] = self
            .split_ratios
            .as_slice()
            .try_into()
            .map_err(|_| UsageError("--split-ratios takes three numbers".into()))?;
        Ok(LinkingSetup {
            k: self.k,
            feature_dim: self.feature_dim,
            lambda_init: self.lambda,
            unlinkable: !self.no_unlinkable,
            context: self.context,
            window: self.window,
            split_ratios: ratios,
            train: TrainConfig {
                lr: self.lr,
                epochs: self.epochs,
                batch_size: self.batch_size,
                seed: 0,
                freeze_lambda: self.freeze_lambda,
                exec: EXEC,
            },
            recall_ns: self.recall_at.clone(),
            exec: EXEC,
            ..LinkingSetup::default()
        }
        .with_seed(self.seed))
    }
}

fn curve_tsv(curve: &[prockb_core::rerank::EpochStats]) -> String {
    let mut s = String::from("epoch\ttrain_loss\tdev_loss\n");
    for e in curve {
        let dev = e.dev_loss.map_or_else(|| "-".to_string(), |d| d.to_string());
        let _ = writeln!(s, "{}\t{}\t{}", e.epoch, e.train_loss, dev);
    }
    s
}

fn recall_outputs(run: &mut Run, reports: &[RecallReport]) -> Result<()> {
    let tsv = to_bytes(|b| write_recall_tsv(reports, b));
    print!("{}", String::from_utf8_lossy(&tsv));
    run.write("recall", "recall.tsv", &tsv)?;
    let mut json = serde_json::to_string_pretty(reports)?;
    json.push('\n');
    run.write("recall_json", "recall.json", json.as_bytes())?;
    Ok(())
}

pub fn train_reranker(a: TrainArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("train-reranker", out, &a)?;
    let setup = a.setup()?;
    let corpus = load_corpus(&mut run, &a.corpus)?;
    let store = load_embeddings(&mut run, &a.embeddings)?;
    let gold = load_gold(&mut run, &a.gold)?;
    let source = feature_source(&mut run, a.features.as_deref(), &corpus, a.feature_dim, a.context, a.window)?;
    let result = run_linking_with(&corpus, &store, source.as_ref(), gold, &setup)?;
    log::info!("best epoch {} of {}", result.best_epoch, a.epochs);
    run.write("model", "model.txt", &to_bytes(|b| result.model.write_to(b)))?;
    run.write("curve", "curve.tsv", curve_tsv(&result.curve).as_bytes())?;
    for (name, part) in [("train", &result.split.train), ("dev", &result.split.dev), ("test", &result.split.test)] {
        run.write(&format!("gold_{name}"), &format!("gold-{name}.tsv"), &to_bytes(|b| write_gold(part, b)))?;
    }
    recall_outputs(&mut run, &result.reports)?;
    run.finish()
}

#[derive(Args, Serialize)]
pub struct LinkerArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Reranker checkpoint from `train-reranker`.
    #[arg(long)]
    model: PathBuf,
    /// Precomputed pair features. Defaults to built-in lexical features.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Allow a step's own article as a candidate.
    #[arg(long)]
    include_parent: bool,
}

struct Linker {
    corpus: Corpus,
    store: EmbeddingStore,
    index: GoalIndex,
    model: RerankModel,
}

impl LinkerArgs {
    fn load(&self, run: &mut Run) -> Result<Linker> {
        let corpus = load_corpus(run, &self.corpus)?;
        let store = load_embeddings(run, &self.embeddings)?;
        let model = load_model(run, &self.model)?;
        let index = GoalIndex::for_corpus(&store, &corpus)?;
        Ok(Linker {
            corpus,
            store,
            index,
            model,
        })
    }
}

#[derive(Args, Serialize)]
pub struct LinkArgs {
    #[command(flatten)]
    #[serde(flatten)]
    linker: LinkerArgs,
    /// File with one step_id per line. Defaults to every step.
    #[arg(long)]
    steps: Option<PathBuf>,
}

pub fn link(a: LinkArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("link", out, &a)?;
    let l = a.linker.load(&mut run)?;
    let features = feature_source(
        &mut run,
        a.linker.features.as_deref(),
        &l.corpus,
        l.model.dim(),
        l.model.context,
        l.model.window,
    )?;
    let steps = load_step_ids(&mut run, a.steps.as_deref(), &l.corpus)?;
    let pipeline = Pipeline {
        corpus: &l.corpus,
        store: &l.store,
        index: &l.index,
        model: &l.model,
        features: features.as_ref(),
        k: a.linker.k,
        exclude_parent: !a.linker.include_parent,
    };
    let decisions = pipeline.link_all(&steps, EXEC)?;
    run.write("links", "links.tsv", &to_bytes(|b| hierarchy::write_links(&decisions, b)))?;
    let mut jsonl = String::new();
    for d in &decisions {
        let alternatives: Vec<serde_json::Value> = d
            .alternatives
            .iter()
            .map(|e| serde_json::json!({"target": e.target.to_string(), "sim1": e.sim1, "sim2": e.sim2}))
            .collect();
        let row = serde_json::json!({
            "step_id": d.step_id,
            "outcome": d.outcome.to_string(),
            "config_hash": d.config_hash,
            "alternatives": alternatives,
        });
        jsonl.push_str(&row.to_string());
        jsonl.push('\n');
    }
    run.write("decisions", "decisions.jsonl", jsonl.as_bytes())?;
    run.finish()
}

#[derive(Args, Serialize)]
pub struct ExpandArgs {
    #[command(flatten)]
    #[serde(flatten)]
    linker: LinkerArgs,
    /// Root goal_id.
    #[arg(long)]
    goal: String,
    #[arg(long, default_value_t = 2)]
    max_depth: usize,
    /// Retrieve only goals that are not already on the path from the root,
    /// instead of annotating such links as suppressed cycles.
    #[arg(long)]
    exclude_ancestors: bool,
}

pub fn expand(a: ExpandArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("expand", out, &a)?;
    let l = a.linker.load(&mut run)?;
    let features = feature_source(
        &mut run,
        a.linker.features.as_deref(),
        &l.corpus,
        l.model.dim(),
        l.model.context,
        l.model.window,
    )?;
    let pipeline = Pipeline {
        corpus: &l.corpus,
        store: &l.store,
        index: &l.index,
        model: &l.model,
        features: features.as_ref(),
        k: a.linker.k,
        exclude_parent: !a.linker.include_parent,
    };
    let policy = ExpandPolicy {
        exclude_ancestors: a.exclude_ancestors,
    };
    let tree = hierarchy::expand(&pipeline, &a.goal, a.max_depth, policy, EXEC)?;
    run.write("tree", "tree.json", tree.to_json().as_bytes())?;
    run.finish()
}

#[derive(Args, Serialize)]
pub struct EvalLinksArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Embeddings file. Defaults to the built-in hash embedder.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Evaluate this checkpoint on every gold link instead of training one
    /// on a split of them.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dimension of the built-in embedder.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Hash seed of the built-in embedder.
    #[arg(long, default_value_t = 0)]
    embed_seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    training: EvalTrainArgs,
}

/// Training settings used when no `--model` is given.
#[derive(Args, Serialize)]
pub struct EvalTrainArgs {
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    feature_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    freeze_lambda: bool,
    #[arg(long)]
    no_unlinkable: bool,
    #[arg(long, default_value_t = ContextMode::None)]
    context: ContextMode,
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "7,2,1")]
    split_ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,10,30")]
    recall_at: Vec<usize>,
}

pub fn eval_links(a: EvalLinksArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("eval-links", out, &a)?;
    let corpus = load_corpus(&mut run, &a.corpus)?;
    let gold = load_gold(&mut run, &a.gold)?;
    let store = match &a.embeddings {
        Some(p) => load_embeddings(&mut run, p)?,
        None => EmbeddingStore::from_corpus(&corpus, &HashEmbedder::new(a.dim, a.embed_seed)?, EXEC),
    };
    let t = &a.training;
    match &a.model {
        Some(path) => {
            let model = load_model(&mut run, path)?;
            let source = feature_source(&mut run, t.features.as_deref(), &corpus, model.dim(), model.context, model.window)?;
            let (reports, _) = evaluate_model(&corpus, &store, source.as_ref(), &model, gold, t.k, &t.recall_at, EXEC)?;
            recall_outputs(&mut run, &reports)?;
        }
        None => {
            let train_args = TrainArgs {
                corpus: a.corpus.clone(),
                embeddings: PathBuf::new(),
                gold: a.gold.clone(),
                features: t.features.clone(),
                k: t.k,
                feature_dim: t.feature_dim,
                lambda: t.lambda,
                freeze_lambda: t.freeze_lambda,
                no_unlinkable: t.no_unlinkable,
                context: t.context,
                window: t.window,
                lr: t.lr,
                epochs: t.epochs,
                batch_size: t.batch_size,
                seed: t.seed,
                split_ratios: t.split_ratios.clone(),
                recall_at: t.recall_at.clone(),
            };
            let setup = train_args.setup()?;
            let source = feature_source(&mut run, t.features.as_deref(), &corpus, t.feature_dim, t.context, t.window)?;
            let result = run_linking_with(&corpus, &store, source.as_ref(), gold, &setup)?;
            run.write("model", "model.txt", &to_bytes(|b| result.model.write_to(b)))?;
            run.write("curve", "curve.tsv", curve_tsv(&result.curve).as_bytes())?;
            recall_outputs(&mut run, &result.reports)?;
        }
    }
    run.finish()
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Goal,
    Article,
}

#[derive(Args, Serialize)]
pub struct Bm25Args {
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
    /// Apply English stemming to documents and queries.
    #[arg(long)]
    stem: bool,
    /// Drop English stopwords.
    #[arg(long)]
    stopwords: bool,
}

impl Bm25Args {
    fn params(&self) -> Result<(Bm25Params, Analyzer)> {
        let p = Bm25Params { k1: self.k1, b: self.b };
        p.validate()?;
        Ok((
            p,
            Analyzer {
                remove_stopwords: self.stopwords,
                stem: self.stem,
            },
        ))
    }
}

#[derive(Args, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    query: String,
    /// Index goal titles or whole articles.
    #[arg(long, value_enum, default_value_t = Field::Goal)]
    field: Field,
    /// Number of results.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    bm25: Bm25Args,
}

pub fn search(a: SearchArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("search", out, &a)?;
    let (params, analyzer) = a.bm25.params()?;
    let corpus = load_corpus(&mut run, &a.corpus)?;
    let field = match a.field {
        Field::Goal => ArticleField::Goal,
        Field::Article => ArticleField::Article,
    };
    let index = index_docs(&corpus_docs(&corpus, field), params, analyzer)?;
    let hits = index.search(&a.query, a.n.min(index.num_docs()))?;
    let mut tsv = String::from("rank\tgoal_id\tscore\ttitle\n");
    for (r, (id, score)) in hits.iter().enumerate() {
        let _ = writeln!(tsv, "{}\t{id}\t{score}\t{}", r + 1, corpus.article(id)?.title);
    }
    print!("{tsv}");
    run.write("results", "search.tsv", tsv.as_bytes())?;
    run.finish()
}

#[derive(Args, Serialize)]
pub struct VideoArgs {
    /// Video JSONL: `{"video_id", "goal_id", "caption"}` per line.
    #[arg(long)]
    videos: PathBuf,
    /// Seeds the per-goal train/dev/test split of videos.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    bm25: Bm25Args,
}

impl VideoArgs {
    fn load(&self, run: &mut Run) -> Result<VideoCorpus> {
        let bytes = run.read("videos", &self.videos)?;
        let videos = read_videos(bytes.as_slice()).with_context(|| format!("loading videos `{}`", self.videos.display()))?;
        let (params, analyzer) = self.bm25.params()?;
        Ok(VideoCorpus::build(videos, params, analyzer, self.seed)?)
    }
}

#[derive(Args, Serialize)]
pub struct VrIndexArgs {
    #[command(flatten)]
    #[serde(flatten)]
    video: VideoArgs,
}

pub fn vr_index(a: VrIndexArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("vr-index", out, &a)?;
    let vc = a.video.load(&mut run)?;
    run.write("splits", "video-splits.tsv", &to_bytes(|b| vc.write_splits(b)))?;
    let index = vc.index();
    let mut vocab: Vec<&str> = index.vocabulary().into_iter().collect();
    vocab.sort_unstable();
    let stats = serde_json::json!({
        "videos": index.num_docs(),
        "goals": vc.goals().count(),
        "avgdl": index.avgdl(),
        "vocabulary": vocab.len(),
        "seed": vc.seed(),
    });
    let mut text = serde_json::to_string_pretty(&stats)?;
    text.push('\n');
    run.write("stats", "video-index.json", text.as_bytes())?;
    run.finish()
}

fn parse_cost(s: &str) -> Result<FilterCost> {
    let norm = s.to_ascii_lowercase().replace('_', "-");
    if norm == "mean-rank" {
        return Ok(FilterCost::MeanRank);
    }
    if let Some(n) = norm.strip_prefix("recall@") {
        if let Ok(n) = n.parse::<usize>() {
            if n >= 1 {
                return Ok(FilterCost::RecallAt(n));
            }
        }
    }
    Err(UsageError(format!("unknown filter cost `{s}`; use mean-rank or recall@N")).into())
}

#[derive(Args, Serialize)]
pub struct FilterArgs {
    /// Goal clause weight of filtered queries.
    #[arg(long, default_value_t = FILTERED_WEIGHTS.0)]
    w_g: f64,
    /// Step clause weight of filtered queries.
    #[arg(long, default_value_t = FILTERED_WEIGHTS.1)]
    w_s: f64,
    /// Hill-climbing round cap.
    #[arg(long, default_value_t = FILTER_CAP)]
    cap: usize,
    /// Objective on training videos: mean-rank or recall@N.
    #[arg(long, default_value = "mean-rank")]
    cost: String,
    /// Step links (from `link`), needed for FIL_L2.
    #[arg(long)]
    links: Option<PathBuf>,
}

impl FilterArgs {
    fn config(&self) -> Result<FilterConfig> {
        Ok(FilterConfig {
            w_g: self.w_g,
            w_s: self.w_s,
            cap: self.cap,
            cost: parse_cost(&self.cost)?,
        })
    }
}

#[derive(Args, Serialize)]
pub struct VrFilterArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    video: VideoArgs,
    /// Query level: l0, l1, fil_l1 or fil_l2.
    #[arg(long)]
    level: QueryLevel,
    #[command(flatten)]
    #[serde(flatten)]
    filter: FilterArgs,
}

fn queries_for(
    run: &mut Run,
    corpus: &Corpus,
    vc: &VideoCorpus,
    level: QueryLevel,
    filter: &FilterArgs,
    links: &mut Option<HashMap<String, LinkTarget>>,
) -> Result<Vec<Query>> {
    if level == QueryLevel::FilL2 && links.is_none() {
        match &filter.links {
            Some(p) => *links = Some(load_links(run, p)?),
            None => bail!(UsageError("FIL_L2 queries need --links".into())),
        }
    }
    Ok(vc.build_queries(corpus, level, links.as_ref(), &filter.config()?, EXEC)?)
}

pub fn vr_filter(a: VrFilterArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("vr-filter", out, &a)?;
    let corpus = load_corpus(&mut run, &a.corpus)?;
    let vc = a.video.load(&mut run)?;
    let queries = queries_for(&mut run, &corpus, &vc, a.level, &a.filter, &mut None)?;
    let mut text = serde_json::to_string_pretty(&queries)?;
    text.push('\n');
    run.write("queries", "queries.json", text.as_bytes())?;
    run.finish()
}

#[derive(Args, Serialize)]
pub struct VrEvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    video: VideoArgs,
    /// Query levels to build and evaluate.
    #[arg(long, value_delimiter = ',', default_value = "l0,l1,fil_l1")]
    levels: Vec<QueryLevel>,
    /// Evaluate query dumps from `vr-filter` instead of building queries.
    #[arg(long, value_delimiter = ',')]
    queries: Vec<PathBuf>,
    /// Gold split: train, dev or test.
    #[arg(long, default_value_t = VideoSplit::Test)]
    split: VideoSplit,
    #[command(flatten)]
    #[serde(flatten)]
    filter: FilterArgs,
}

pub fn vr_eval(a: VrEvalArgs, out: &Path) -> Result<()> {
    let mut run = Run::new("vr-eval", out, &a)?;
    let corpus = load_corpus(&mut run, &a.corpus)?;
    let vc = a.video.load(&mut run)?;
    vc.check_goals(&corpus)?;
    let mut sets: Vec<(QueryLevel, Vec<Query>)> = Vec::new();
    if a.queries.is_empty() {
        let mut links = None;
        for &level in &a.levels {
            sets.push((level, queries_for(&mut run, &corpus, &vc, level, &a.filter, &mut links)?));
        }
    } else {
        for p in &a.queries {
            let bytes = run.read("queries", p)?;
            let qs: Vec<Query> =
                serde_json::from_slice(&bytes).with_context(|| format!("loading queries `{}`", p.display()))?;
            let Some(first) = qs.first() else {
                return Err(DataError(format!("no queries in `{}`", p.display())).into());
            };
            let level = first.level;
            if qs.iter().any(|q| q.level != level) {
                return Err(DataError(format!("mixed query levels in `{}`", p.display())).into());
            }
            sets.push((level, qs));
        }
    }
    let mut rows: Vec<(QueryLevel, VideoSplit, VrMetrics)> = Vec::new();
    for (level, qs) in &sets {
        rows.push((*level, a.split, vc.evaluate(qs, a.split, &REPORT_NS, EXEC)?));
    }
    let tsv = to_bytes(|b| write_metrics_tsv(&rows, b));
    print!("{}", String::from_utf8_lossy(&tsv));
    run.write("metrics", "metrics.tsv", &tsv)?;
    let json: Vec<serde_json::Value> = rows
        .iter()
        .map(|(l, s, m)| serde_json::json!({"level": l, "split": s, "metrics": m}))
        .collect();
    let mut text = serde_json::to_string_pretty(&json)?;
    text.push('\n');
    run.write("metrics_json", "metrics.json", text.as_bytes())?;
    run.finish()
}
