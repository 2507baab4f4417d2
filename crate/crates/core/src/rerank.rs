//! Second-stage reranking of retrieved candidate goals.
//!
//! Each (step, candidate goal) pair is mapped to a fixed-length feature
//! vector, either by the built-in [`LexicalFeaturizer`] or by an external
//! joint encoder whose outputs are loaded as a [`FeatureTable`]. The pair
//! score is
//!
//! ```text
//! sim2(s, g) = W · features(s, g) + lambda * sim1(s, g)
//! ```
//!
//! and the model is trained with the listwise negative log-likelihood of the
//! gold goal under a softmax over the candidate list. When the unlinkable
//! option is enabled, a placeholder candidate is appended to every list. Its
//! features are a learned vector and its `sim1` is the lowest `sim1` among the
//! real candidates.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{context_of, ContextMode, Corpus, StepContext};
use crate::embedding::{dot, parse_dim_header};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::retrieval::CandidateList;
use crate::text::tokenize;

pub const UNLINKABLE: &str = "UNLINKABLE";
pub const MIN_LEXICAL_DIM: usize = 8;
/// Separator between context texts in rendered pair inputs.
pub const CTX_DELIMITER: &str = "[CTX]";

/// A link outcome: a real goal or the unlinkable placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LinkTarget {
    Goal(String),
    Unlinkable,
}

impl LinkTarget {
    pub fn goal_id(&self) -> Option<&str> {
        match self {
            LinkTarget::Goal(g) => Some(g),
            LinkTarget::Unlinkable => None,
        }
    }

    pub fn parse(s: &str) -> LinkTarget {
        if s == UNLINKABLE {
            LinkTarget::Unlinkable
        } else {
            LinkTarget::Goal(s.to_string())
        }
    }
}

impl fmt::Display for LinkTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkTarget::Goal(g) => f.write_str(g),
            LinkTarget::Unlinkable => f.write_str(UNLINKABLE),
        }
    }
}

/// Goals first in ascending id order, the placeholder last.
fn target_order(a: &LinkTarget, b: &LinkTarget) -> Ordering {
    match (a, b) {
        (LinkTarget::Goal(x), LinkTarget::Goal(y)) => x.cmp(y),
        (LinkTarget::Goal(_), LinkTarget::Unlinkable) => Ordering::Less,
        (LinkTarget::Unlinkable, LinkTarget::Goal(_)) => Ordering::Greater,
        (LinkTarget::Unlinkable, LinkTarget::Unlinkable) => Ordering::Equal,
    }
}

/// Pair representation for one (context, step, goal) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures(Vec<f64>);

impl PairFeatures {
    pub fn new(values: Vec<f64>) -> Result<PairFeatures> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pair features".into()));
        }
        Ok(PairFeatures(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Input string for an external joint encoder:
/// `[CLS] <ctx> [ST] <step> [ED] <goal> [SEP]`, where the context is the goal
/// text, then previous steps, then next steps, joined by [`CTX_DELIMITER`].
pub fn render_pair_input(ctx: &StepContext, step: &str, goal: &str) -> String {
    let parts: Vec<&str> = ctx.texts().collect();
    if parts.is_empty() {
        format!("[CLS] [ST] {step} [ED] {goal} [SEP]")
    } else {
        let joined = parts.join(&format!(" {CTX_DELIMITER} "));
        format!("[CLS] {joined} [ST] {step} [ED] {goal} [SEP]")
    }
}

/// Names of the leading lexical features; remaining slots are zero.
pub const LEXICAL_FEATURE_NAMES: [&str; 8] = [
    "token_jaccard",
    "char3_cosine",
    "idf_overlap",
    "length_ratio",
    "exact_match",
    "ctx_goal_overlap",
    "step_coverage",
    "goal_coverage",
];

/// Deterministic surface-overlap features for a (context, step, goal) triple.
#[derive(Debug, Clone)]
pub struct LexicalFeaturizer {
    dim: usize,
    idf: HashMap<String, f64>,
    default_idf: f64,
}

impl LexicalFeaturizer {
    /// Featurizer with uniform term weights.
    pub fn new(dim: usize) -> Result<LexicalFeaturizer> {
        if dim < MIN_LEXICAL_DIM {
            return Err(Error::invalid(format!(
                "lexical feature dim must be >= {MIN_LEXICAL_DIM}, got {dim}"
            )));
        }
        Ok(LexicalFeaturizer {
            dim,
            idf: HashMap::new(),
            default_idf: 1.0,
        })
    }

    /// Featurizer whose overlap weights are smoothed IDF over all goal
    /// titles and step texts of `corpus`.
    pub fn with_corpus_idf(dim: usize, corpus: &Corpus) -> Result<LexicalFeaturizer> {
        let mut f = LexicalFeaturizer::new(dim)?;
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut n = 0usize;
        let texts = corpus
            .articles()
            .iter()
            .flat_map(|a| std::iter::once(a.title.as_str()).chain(a.steps.iter().map(|s| s.text.as_str())));
        for t in texts {
            n += 1;
            let uniq: HashSet<String> = tokenize(t).into_iter().collect();
            for tok in uniq {
                *df.entry(tok).or_default() += 1;
            }
        }
        let n = n as f64;
        f.idf = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        f.default_idf = (1.0 + n).ln() + 1.0;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn weight(&self, tok: &str) -> f64 {
        self.idf.get(tok).copied().unwrap_or(self.default_idf)
    }

    pub fn features(&self, ctx: &StepContext, step: &str, goal: &str) -> PairFeatures {
        let st = tokenize(step);
        let gt = tokenize(goal);
        let ss: HashSet<&str> = st.iter().map(String::as_str).collect();
        let gs: HashSet<&str> = gt.iter().map(String::as_str).collect();
        let inter: HashSet<&str> = ss.intersection(&gs).copied().collect();
        let union: HashSet<&str> = ss.union(&gs).copied().collect();

        let mut f = vec![0.0; self.dim];
        f[0] = ratio(inter.len(), union.len());
        f[1] = char_ngram_cosine(step, goal, 3);
        let w_inter: f64 = inter.iter().map(|t| self.weight(t)).sum();
        let w_union: f64 = union.iter().map(|t| self.weight(t)).sum();
        f[2] = if w_union > 0.0 { w_inter / w_union } else { 0.0 };
        f[3] = ratio(st.len().min(gt.len()), st.len().max(gt.len()));
        f[4] = if !st.is_empty() && st == gt { 1.0 } else { 0.0 };
        let ct: HashSet<String> = ctx.texts().flat_map(tokenize).collect();
        let cinter = ct.iter().filter(|t| gs.contains(t.as_str())).count();
        let cunion = ct.len() + gs.iter().filter(|t| !ct.contains(**t)).count();
        f[5] = ratio(cinter, cunion);
        f[6] = ratio(inter.len(), ss.len());
        f[7] = ratio(inter.len(), gs.len());
        PairFeatures(f)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn char_ngram_cosine(a: &str, b: &str, n: usize) -> f64 {
    fn grams(s: &str, n: usize) -> HashMap<Vec<char>, f64> {
        let chars: Vec<char> = std::iter::once('<')
            .chain(s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ").chars())
            .chain(std::iter::once('>'))
            .collect();
        let mut m = HashMap::new();
        for w in chars.windows(n) {
            *m.entry(w.to_vec()).or_insert(0.0) += 1.0;
        }
        m
    }
    let ga = grams(a, n);
    let gb = grams(b, n);
    let num: f64 = ga.iter().filter_map(|(k, v)| gb.get(k).map(|w| v * w)).sum();
    let na: f64 = ga.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = gb.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        num / (na * nb)
    }
}

/// Lexical features with uniform term weights.
pub fn lexical_features(ctx: &StepContext, step: &str, goal: &str, dim: usize) -> Result<PairFeatures> {
    Ok(LexicalFeaturizer::new(dim)?.features(ctx, step, goal))
}

/// Where pair features come from.
pub trait FeatureSource: Sync {
    fn dim(&self) -> usize;
    fn pair_features(&self, step_id: &str, goal_id: &str) -> Result<PairFeatures>;
    /// Short description recorded with scored output.
    fn provenance(&self) -> String;
}

/// Lexical features computed on the fly from corpus text.
pub struct LexicalSource<'a> {
    corpus: &'a Corpus,
    featurizer: LexicalFeaturizer,
    mode: ContextMode,
    window: usize,
}

impl<'a> LexicalSource<'a> {
    pub fn new(corpus: &'a Corpus, featurizer: LexicalFeaturizer, mode: ContextMode, window: usize) -> Self {
        LexicalSource {
            corpus,
            featurizer,
            mode,
            window,
        }
    }
}

impl FeatureSource for LexicalSource<'_> {
    fn dim(&self) -> usize {
        self.featurizer.dim
    }

    fn pair_features(&self, step_id: &str, goal_id: &str) -> Result<PairFeatures> {
        let step = self.corpus.step(step_id)?;
        let goal = self.corpus.article(goal_id)?;
        let ctx = context_of(self.corpus, step_id, self.mode, self.window)?;
        Ok(self.featurizer.features(&ctx, &step.text, &goal.title))
    }

    fn provenance(&self) -> String {
        format!("lexical(d={},ctx={},window={})", self.featurizer.dim, self.mode, self.window)
    }
}

/// Precomputed features keyed by `(step_id, goal_id)`.
///
/// File format: a `dim=<d>` header, then rows `step_id goal_id v1 ... vd`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    rows: HashMap<(String, String), PairFeatures>,
    label: String,
}

impl FeatureTable {
    pub fn new(dim: usize) -> FeatureTable {
        FeatureTable {
            dim,
            rows: HashMap::new(),
            label: "table".into(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(&mut self, step_id: &str, goal_id: &str, f: PairFeatures) -> Result<()> {
        if f.dim() != self.dim {
            return Err(Error::DimMismatch {
                context: format!("{step_id} {goal_id}"),
                expected: self.dim,
                found: f.dim(),
            });
        }
        self.rows.insert((step_id.to_string(), goal_id.to_string()), f);
        Ok(())
    }

    pub fn from_reader(reader: impl BufRead) -> Result<FeatureTable> {
        let mut table: Option<FeatureTable> = None;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some(t) = table.as_mut() else {
                let dim = parse_dim_header(line).ok_or_else(|| Error::Malformed {
                    line: lineno,
                    message: format!("expected `dim=<d>` header, found `{line}`"),
                })?;
                table = Some(FeatureTable::new(dim));
                continue;
            };
            let mut fields = line.split_whitespace();
            let (Some(sid), Some(gid)) = (fields.next(), fields.next()) else {
                return Err(Error::Malformed {
                    line: lineno,
                    message: "expected `step_id goal_id v1 ... vd`".into(),
                });
            };
            let values = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Malformed {
                        line: lineno,
                        message: format!("cannot parse `{f}` as a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let feats = PairFeatures::new(values).map_err(|_| Error::NonFinite(format!("{sid} {gid}")))?;
            t.insert(sid, gid, feats)?;
        }
        table.ok_or_else(|| Error::Empty("feature file has no `dim=` header".into()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FeatureTable> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut t = FeatureTable::from_reader(BufReader::new(file))?;
        t.label = format!("file:{}", path.display());
        Ok(t)
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "dim={}", self.dim)?;
        let mut keys: Vec<&(String, String)> = self.rows.keys().collect();
        keys.sort();
        for k in keys {
            write!(out, "{} {}", k.0, k.1)?;
            for v in self.rows[k].as_slice() {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

impl FeatureSource for FeatureTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn pair_features(&self, step_id: &str, goal_id: &str) -> Result<PairFeatures> {
        self.rows
            .get(&(step_id.to_string(), goal_id.to_string()))
            .cloned()
            .ok_or_else(|| Error::MissingFeatures {
                step_id: step_id.to_string(),
                goal_id: goal_id.to_string(),
            })
    }

    fn provenance(&self) -> String {
        format!("{}(d={})", self.label, self.dim)
    }
}

/// Projection weights, first-stage mixing weight, and the optional learned
/// feature row of the unlinkable placeholder.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankModel {
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// Present iff the unlinkable placeholder is enabled.
    pub unlinkable_row: Option<Vec<f64>>,
    pub freeze_lambda: bool,
    pub context: ContextMode,
    pub window: usize,
}

impl RerankModel {
    /// Zero weights, so the initial ranking follows `lambda * sim1`.
    pub fn new(dim: usize, lambda: f64) -> RerankModel {
        RerankModel {
            weights: vec![0.0; dim],
            lambda,
            unlinkable_row: None,
            freeze_lambda: false,
            context: ContextMode::None,
            window: 1,
        }
    }

    pub fn with_unlinkable(mut self) -> Self {
        self.unlinkable_row = Some(vec![0.0; self.dim()]);
        self
    }

    pub fn with_context(mut self, mode: ContextMode, window: usize) -> Self {
        self.context = mode;
        self.window = window;
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn unlinkable_enabled(&self) -> bool {
        self.unlinkable_row.is_some()
    }

    fn check(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::invalid("model dim must be > 0"));
        }
        if !self.lambda.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        if let Some(u) = &self.unlinkable_row {
            if u.len() != self.dim() {
                return Err(Error::DimMismatch {
                    context: "unlinkable row".into(),
                    expected: self.dim(),
                    found: u.len(),
                });
            }
        }
        if self.window == 0 {
            return Err(Error::invalid("context window must be >= 1"));
        }
        Ok(())
    }

    /// Flat parameter vector: `W`, then `lambda`, then the unlinkable row.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.lambda);
        if let Some(u) = &self.unlinkable_row {
            p.extend_from_slice(u);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let d = self.dim();
        self.weights.copy_from_slice(&p[..d]);
        self.lambda = p[d];
        if let Some(u) = &mut self.unlinkable_row {
            u.copy_from_slice(&p[d + 1..]);
        }
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "dim={}", self.dim())?;
        writeln!(out, "lambda={}", self.lambda)?;
        writeln!(out, "freeze_lambda={}", self.freeze_lambda)?;
        writeln!(out, "unlinkable={}", self.unlinkable_enabled())?;
        writeln!(out, "context={}", self.context)?;
        writeln!(out, "window={}", self.window)?;
        let row = |out: &mut dyn Write, tag: &str, v: &[f64]| -> std::io::Result<()> {
            write!(out, "{tag}")?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)
        };
        row(&mut out, "w", &self.weights)?;
        if let Some(u) = &self.unlinkable_row {
            row(&mut out, "u", u)?;
        }
        Ok(())
    }

    pub fn from_reader(reader: impl BufRead) -> Result<RerankModel> {
        let mut kv: HashMap<String, String> = HashMap::new();
        let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let malformed = |m: String| Error::Malformed { line: lineno, message: m };
            let line = line.map_err(|e| malformed(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                kv.insert(k.trim().to_string(), v.trim().to_string());
            } else {
                let mut it = line.split_whitespace();
                let tag = it.next().unwrap_or_default().to_string();
                let vals = it
                    .map(|x| x.parse::<f64>().map_err(|_| malformed(format!("bad number `{x}`"))))
                    .collect::<Result<Vec<_>>>()?;
                rows.insert(tag, vals);
            }
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Malformed { line: 0, message: format!("checkpoint missing `{k}`") });
        let bad = |k: &str| Error::Malformed { line: 0, message: format!("checkpoint has invalid `{k}`") };
        let dim: usize = get("dim")?.parse().map_err(|_| bad("dim"))?;
        let lambda: f64 = get("lambda")?.parse().map_err(|_| bad("lambda"))?;
        let freeze_lambda: bool = get("freeze_lambda")?.parse().map_err(|_| bad("freeze_lambda"))?;
        let unlinkable: bool = get("unlinkable")?.parse().map_err(|_| bad("unlinkable"))?;
        let context: ContextMode = get("context")?.parse()?;
        let window: usize = get("window")?.parse().map_err(|_| bad("window"))?;
        let weights = rows.remove("w").ok_or_else(|| bad("w"))?;
        let unlinkable_row = if unlinkable {
            Some(rows.remove("u").ok_or_else(|| bad("u"))?)
        } else {
            None
        };
        if weights.len() != dim {
            return Err(Error::DimMismatch {
                context: "checkpoint weights".into(),
                expected: dim,
                found: weights.len(),
            });
        }
        let m = RerankModel {
            weights,
            lambda,
            unlinkable_row,
            freeze_lambda,
            context,
            window,
        };
        m.check()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RerankModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        RerankModel::from_reader(BufReader::new(file))
    }
}

/// `W · features + lambda * sim1`.
pub fn sim2(model: &RerankModel, features: &PairFeatures, sim1: f64) -> Result<f64> {
    if features.dim() != model.dim() {
        return Err(Error::DimMismatch {
            context: "pair features".into(),
            expected: model.dim(),
            found: features.dim(),
        });
    }
    Ok(dot(&model.weights, features.as_slice()) + model.lambda * sim1)
}

/// A candidate list with pair features resolved, ready for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringInput {
    pub step_id: String,
    pub goals: Vec<String>,
    pub sim1: Vec<f64>,
    pub features: Vec<PairFeatures>,
    pub provenance: String,
}

impl ScoringInput {
    pub fn from_candidates(list: &CandidateList, source: &dyn FeatureSource) -> Result<ScoringInput> {
        let mut features = Vec::with_capacity(list.entries.len());
        for c in &list.entries {
            let f = source.pair_features(&list.step_id, &c.goal_id)?;
            if f.dim() != source.dim() {
                return Err(Error::DimMismatch {
                    context: format!("{} {}", list.step_id, c.goal_id),
                    expected: source.dim(),
                    found: f.dim(),
                });
            }
            features.push(f);
        }
        Ok(ScoringInput {
            step_id: list.step_id.clone(),
            goals: list.entries.iter().map(|c| c.goal_id.clone()).collect(),
            sim1: list.entries.iter().map(|c| c.sim1).collect(),
            features,
            provenance: source.provenance(),
        })
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    fn min_sim1(&self) -> f64 {
        self.sim1.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEntry {
    pub target: LinkTarget,
    pub sim1: f64,
    pub sim2: f64,
}

/// Candidates ordered by `sim2` descending.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub step_id: String,
    pub entries: Vec<ScoredEntry>,
    pub provenance: String,
}

impl ScoredCandidates {
    pub fn top(&self) -> Option<&ScoredEntry> {
        self.entries.first()
    }

    pub fn ranking(&self) -> Vec<LinkTarget> {
        self.entries.iter().map(|e| e.target.clone()).collect()
    }
}

// Raw logits in candidate order, placeholder last when enabled.
fn logits(model: &RerankModel, input: &ScoringInput) -> Result<Vec<f64>> {
    if input.is_empty() {
        return Err(Error::Empty(format!("candidate list for step `{}`", input.step_id)));
    }
    let mut z = Vec::with_capacity(input.len() + 1);
    for (f, &s1) in input.features.iter().zip(&input.sim1) {
        z.push(sim2(model, f, s1)?);
    }
    if let Some(u) = &model.unlinkable_row {
        z.push(dot(&model.weights, u) + model.lambda * input.min_sim1());
    }
    Ok(z)
}

pub fn score_candidates(model: &RerankModel, input: &ScoringInput) -> Result<ScoredCandidates> {
    let z = logits(model, input)?;
    let mut entries: Vec<ScoredEntry> = input
        .goals
        .iter()
        .zip(&input.sim1)
        .zip(&z)
        .map(|((g, &s1), &s2)| ScoredEntry {
            target: LinkTarget::Goal(g.clone()),
            sim1: s1,
            sim2: s2,
        })
        .collect();
    if model.unlinkable_enabled() {
        entries.push(ScoredEntry {
            target: LinkTarget::Unlinkable,
            sim1: input.min_sim1(),
            sim2: z[input.len()],
        });
    }
    entries.sort_by(|a, b| b.sim2.total_cmp(&a.sim2).then_with(|| target_order(&a.target, &b.target)));
    Ok(ScoredCandidates {
        step_id: input.step_id.clone(),
        entries,
        provenance: input.provenance.clone(),
    })
}

/// Gold answer for one training list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// Index into the candidate list.
    Goal(usize),
    Unlinkable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub input: ScoringInput,
    pub label: Label,
}

/// Pair each candidate list with its gold goal. Lists whose gold goal was not
/// retrieved become unlinkable examples when `unlinkable` is set and are
/// dropped otherwise; lists without a gold link are skipped.
pub fn make_examples(
    lists: &[CandidateList],
    gold: &HashMap<String, String>,
    unlinkable: bool,
    source: &dyn FeatureSource,
    exec: Execution,
) -> Result<Vec<TrainExample>> {
    let labelled: Vec<(&CandidateList, Label)> = lists
        .iter()
        .filter_map(|l| {
            let g = gold.get(&l.step_id)?;
            match l.position(g) {
                Some(i) => Some((l, Label::Goal(i))),
                None if unlinkable => Some((l, Label::Unlinkable)),
                None => None,
            }
        })
        .collect();
    exec::try_map(exec, &labelled, |(l, label)| {
        Ok(TrainExample {
            input: ScoringInput::from_candidates(l, source)?,
            label: *label,
        })
    })
}

/// Loss and its gradient with respect to every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad_weights: Vec<f64>,
    pub grad_lambda: f64,
    /// Present iff the model has an unlinkable row.
    pub grad_unlinkable: Option<Vec<f64>>,
}

impl LossGrad {
    /// Flattened in the same layout as [`RerankModel::params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut g = self.grad_weights.clone();
        g.push(self.grad_lambda);
        if let Some(u) = &self.grad_unlinkable {
            g.extend_from_slice(u);
        }
        g
    }
}

/// Listwise softmax cross-entropy `-log softmax(sim2)[gold]` over the
/// candidate list (plus the placeholder when enabled), with analytic
/// gradients.
pub fn nll_loss(model: &RerankModel, input: &ScoringInput, label: Label) -> Result<LossGrad> {
    let z = logits(model, input)?;
    let gold = match label {
        Label::Goal(i) if i < input.len() => i,
        Label::Goal(i) => {
            return Err(Error::invalid(format!(
                "label {i} out of range for {} candidates",
                input.len()
            )))
        }
        Label::Unlinkable if model.unlinkable_enabled() => input.len(),
        Label::Unlinkable => return Err(Error::invalid("unlinkable label but the model has no unlinkable option")),
    };
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = z.iter().map(|v| (v - max).exp()).sum();
    let lse = max + sum_exp.ln();
    let loss = lse - z[gold];

    let d = model.dim();
    let mut grad_weights = vec![0.0; d];
    let mut grad_lambda = 0.0;
    let mut grad_unlinkable = None;
    for (i, &zi) in z.iter().enumerate() {
        let coef = (zi - lse).exp() - if i == gold { 1.0 } else { 0.0 };
        if i < input.len() {
            for (g, f) in grad_weights.iter_mut().zip(input.features[i].as_slice()) {
                *g += coef * f;
            }
            grad_lambda += coef * input.sim1[i];
        } else {
            let u = model.unlinkable_row.as_ref().expect("placeholder logit implies a row");
            for (g, f) in grad_weights.iter_mut().zip(u) {
                *g += coef * f;
            }
            grad_lambda += coef * input.min_sim1();
            grad_unlinkable = Some(model.weights.iter().map(|w| coef * w).collect());
        }
    }
    if model.unlinkable_enabled() && grad_unlinkable.is_none() {
        grad_unlinkable = Some(vec![0.0; d]);
    }
    Ok(LossGrad {
        loss,
        grad_weights,
        grad_lambda,
        grad_unlinkable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub freeze_lambda: bool,
    /// Per-example gradients may be computed in parallel; they are always
    /// summed in batch order.
    pub exec: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.5,
            epochs: 5,
            batch_size: 16,
            seed: 0,
            freeze_lambda: false,
            exec: Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 0 is the untrained model.
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the lowest dev loss (train loss if there is no dev set).
    pub model: RerankModel,
    pub best_epoch: usize,
    pub curve: Vec<EpochStats>,
}

pub fn mean_loss(model: &RerankModel, examples: &[TrainExample], exec: Execution) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("example set".into()));
    }
    let losses = exec::try_map(exec, examples, |ex| nll_loss(model, &ex.input, ex.label).map(|lg| lg.loss))?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Mini-batch SGD on the mean listwise loss.
pub fn train(
    mut model: RerankModel,
    train_set: &[TrainExample],
    dev_set: &[TrainExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    if !(cfg.lr.is_finite() && cfg.lr >= 0.0) {
        return Err(Error::invalid(format!("learning rate must be finite and >= 0, got {}", cfg.lr)));
    }
    model.check()?;
    model.freeze_lambda |= cfg.freeze_lambda;
    let frozen = model.freeze_lambda;
    let d = model.dim();

    let evaluate = |m: &RerankModel, epoch: usize| -> Result<EpochStats> {
        let train_loss = mean_loss(m, train_set, cfg.exec)?;
        let dev_loss = if dev_set.is_empty() {
            None
        } else {
            Some(mean_loss(m, dev_set, cfg.exec)?)
        };
        if !train_loss.is_finite() || dev_loss.is_some_and(|l| !l.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        Ok(EpochStats {
            epoch,
            train_loss,
            dev_loss,
        })
    };
    let selection = |s: &EpochStats| s.dev_loss.unwrap_or(s.train_loss);

    let mut curve = vec![evaluate(&model, 0)?];
    let mut best = (selection(&curve[0]), 0usize, model.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let grads = exec::try_map(cfg.exec, batch, |&i| {
                let ex = &train_set[i];
                nll_loss(&model, &ex.input, ex.label)
            })?;
            let mut acc = vec![0.0; model.params().len()];
            for g in &grads {
                if !g.loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b });
                }
                for (a, v) in acc.iter_mut().zip(g.flat()) {
                    *a += v;
                }
            }
            let scale = cfg.lr / batch.len() as f64;
            let mut params = model.params();
            for (j, (p, g)) in params.iter_mut().zip(&acc).enumerate() {
                if j == d && frozen {
                    continue;
                }
                *p -= scale * g;
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            model.set_params(&params);
        }
        let stats = evaluate(&model, epoch)?;
        log::debug!(
            "epoch {epoch}: train {:.6} dev {:?}",
            stats.train_loss,
            stats.dev_loss
        );
        if selection(&stats) < best.0 {
            best = (selection(&stats), epoch, model.clone());
        }
        curve.push(stats);
    }
    Ok(TrainOutcome {
        model: best.2,
        best_epoch: best.1,
        curve,
    })
}

/// Fraction of examples whose top-scored entry is the gold label.
pub fn top1_accuracy(model: &RerankModel, examples: &[TrainExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("example set".into()));
    }
    let mut hits = 0usize;
    for ex in examples {
        let scored = score_candidates(model, &ex.input)?;
        let want = match ex.label {
            Label::Goal(i) => LinkTarget::Goal(ex.input.goals[i].clone()),
            Label::Unlinkable => LinkTarget::Unlinkable,
        };
        if scored.top().map(|e| &e.target) == Some(&want) {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}
