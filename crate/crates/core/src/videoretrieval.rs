//! Extrinsic evaluation: retrieving caption-represented videos for a goal
//! with queries built from the procedure hierarchy.
//!
//! A query is a goal clause plus weighted step clauses; its relevance to a
//! video is `w_g * BM25(goal, v) + w_s * sum_s BM25(s, v)`. Four query levels
//! are supported: goal only (L0), goal plus its steps (L1), and the two
//! filtered variants, where step clauses are chosen by greedy hill climbing
//! on the goal's training videos from either the article steps (FIL-L1) or
//! the steps plus the steps of their linked articles (FIL-L2).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linkeval::partition_sizes;
use crate::rerank::LinkTarget;
use crate::retrieval::rank_order;
use crate::textsearch::{index_docs, Analyzer, Bm25Params, TextIndex};

pub const VIDEO_SPLIT_RATIOS: [f64; 3] = [7.5, 1.25, 1.25];
/// Step-clause weight for unfiltered goal + steps queries.
pub const L1_WEIGHTS: (f64, f64) = (1.0, 0.1);
/// Step-clause weight for hill-climbing filtered queries.
pub const FILTERED_WEIGHTS: (f64, f64) = (1.0, 0.5);
pub const FILTER_CAP: usize = 15;
pub const REPORT_NS: [usize; 4] = [1, 10, 25, 50];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoDoc {
    pub video_id: String,
    pub goal_id: String,
    pub caption: String,
}

/// Video JSONL: `{"video_id", "goal_id", "caption"}` per line.
pub fn read_videos(reader: impl BufRead) -> Result<Vec<VideoDoc>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let v: VideoDoc = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if !seen.insert(v.video_id.clone()) {
            return Err(Error::Duplicate {
                kind: "video_id",
                id: v.video_id,
            });
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_videos(videos: &[VideoDoc], mut out: impl Write) -> std::io::Result<()> {
    for v in videos {
        serde_json::to_writer(&mut out, v)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VideoSplit {
    Train,
    Dev,
    Test,
}

impl fmt::Display for VideoSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VideoSplit::Train => "train",
            VideoSplit::Dev => "dev",
            VideoSplit::Test => "test",
        })
    }
}

impl std::str::FromStr for VideoSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(VideoSplit::Train),
            "dev" => Ok(VideoSplit::Dev),
            "test" => Ok(VideoSplit::Test),
            _ => Err(Error::invalid(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoalVideos {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl GoalVideos {
    pub fn get(&self, split: VideoSplit) -> &[String] {
        match split {
            VideoSplit::Train => &self.train,
            VideoSplit::Dev => &self.dev,
            VideoSplit::Test => &self.test,
        }
    }
}

/// Indexed video pool with per-goal train/dev/test splits.
#[derive(Debug, Clone)]
pub struct VideoCorpus {
    videos: Vec<VideoDoc>,
    index: TextIndex,
    by_goal: BTreeMap<String, GoalVideos>,
    /// Position of each doc in ascending video-id order, for tie-breaking.
    id_rank: Vec<usize>,
    seed: u64,
}

impl VideoCorpus {
    /// Index captions and split each goal's videos 7.5:1.25:1.25 with a
    /// seeded shuffle. Goals are visited in ascending id order.
    pub fn build(videos: Vec<VideoDoc>, params: Bm25Params, analyzer: Analyzer, seed: u64) -> Result<VideoCorpus> {
        if videos.is_empty() {
            return Err(Error::Empty("video pool".into()));
        }
        let docs: Vec<(&str, &str)> = videos.iter().map(|v| (v.video_id.as_str(), v.caption.as_str())).collect();
        let index = index_docs(&docs, params, analyzer)?;
        let mut grouped: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for v in &videos {
            grouped.entry(v.goal_id.clone()).or_default().push(v.video_id.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_goal = BTreeMap::new();
        for (goal, mut ids) in grouped {
            ids.shuffle(&mut rng);
            let sizes = partition_sizes(ids.len(), &VIDEO_SPLIT_RATIOS)?;
            let test = ids.split_off(sizes[0] + sizes[1]);
            let dev = ids.split_off(sizes[0]);
            by_goal.insert(goal, GoalVideos { train: ids, dev, test });
        }
        let mut order: Vec<usize> = (0..videos.len()).collect();
        order.sort_by(|&a, &b| videos[a].video_id.cmp(&videos[b].video_id));
        let mut id_rank = vec![0; videos.len()];
        for (r, &i) in order.iter().enumerate() {
            id_rank[i] = r;
        }
        Ok(VideoCorpus {
            videos,
            index,
            by_goal,
            id_rank,
            seed,
        })
    }

    pub fn index(&self) -> &TextIndex {
        &self.index
    }

    pub fn videos(&self) -> &[VideoDoc] {
        &self.videos
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn goals(&self) -> impl Iterator<Item = &str> {
        self.by_goal.keys().map(String::as_str)
    }

    pub fn goal_videos(&self, goal_id: &str) -> Result<&GoalVideos> {
        self.by_goal
            .get(goal_id)
            .ok_or_else(|| Error::unknown("video goal_id", goal_id))
    }

    /// Gold video sets of one split, keyed by goal.
    pub fn gold(&self, split: VideoSplit) -> HashMap<String, Vec<String>> {
        self.by_goal
            .iter()
            .map(|(g, v)| (g.clone(), v.get(split).to_vec()))
            .collect()
    }

    /// Every video goal must be a corpus goal.
    pub fn check_goals(&self, corpus: &Corpus) -> Result<()> {
        for g in self.by_goal.keys() {
            if !corpus.contains_goal(g) {
                return Err(Error::unknown("goal_id (from video file)", g));
            }
        }
        Ok(())
    }

    /// `video_id \t goal_id \t split`, in input order.
    pub fn write_splits(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut split_of: HashMap<&str, VideoSplit> = HashMap::new();
        for gv in self.by_goal.values() {
            for (s, ids) in [(VideoSplit::Train, &gv.train), (VideoSplit::Dev, &gv.dev), (VideoSplit::Test, &gv.test)] {
                for id in ids {
                    split_of.insert(id, s);
                }
            }
        }
        for v in &self.videos {
            writeln!(out, "{}\t{}\t{}", v.video_id, v.goal_id, split_of[v.video_id.as_str()])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryLevel {
    #[serde(rename = "L0")]
    L0,
    #[serde(rename = "L1")]
    L1,
    #[serde(rename = "FIL_L1")]
    FilL1,
    #[serde(rename = "FIL_L2")]
    FilL2,
}

impl fmt::Display for QueryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryLevel::L0 => "L0",
            QueryLevel::L1 => "L1",
            QueryLevel::FilL1 => "FIL_L1",
            QueryLevel::FilL2 => "FIL_L2",
        })
    }
}

impl std::str::FromStr for QueryLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "l0" => Ok(QueryLevel::L0),
            "l1" => Ok(QueryLevel::L1),
            "fil_l1" => Ok(QueryLevel::FilL1),
            "fil_l2" => Ok(QueryLevel::FilL2),
            _ => Err(Error::invalid(format!("unknown query level `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub goal_id: String,
    #[serde(rename = "goal")]
    pub goal_clause: String,
    #[serde(rename = "clauses")]
    pub step_clauses: Vec<String>,
    pub w_g: f64,
    pub w_s: f64,
    pub level: QueryLevel,
}

impl Query {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_g.is_finite() && self.w_g >= 0.0 && self.w_s.is_finite() && self.w_s >= 0.0) {
            return Err(Error::invalid(format!("query weights must be finite and >= 0 for `{}`", self.goal_id)));
        }
        if self.level == QueryLevel::L0 && !self.step_clauses.is_empty() {
            return Err(Error::invalid("an L0 query has no step clauses"));
        }
        Ok(())
    }
}

/// Unfiltered queries: the goal alone (L0) or the goal plus its steps (L1).
pub fn make_query(corpus: &Corpus, goal_id: &str, level: QueryLevel) -> Result<Query> {
    let article = corpus.article(goal_id)?;
    let (w_g, w_s, steps) = match level {
        QueryLevel::L0 => (1.0, 0.0, Vec::new()),
        QueryLevel::L1 => (L1_WEIGHTS.0, L1_WEIGHTS.1, article.steps.iter().map(|s| s.text.clone()).collect()),
        QueryLevel::FilL1 | QueryLevel::FilL2 => {
            return Err(Error::invalid("filtered queries are built by filter_steps"));
        }
    };
    Ok(Query {
        goal_id: goal_id.to_string(),
        goal_clause: article.title.clone(),
        step_clauses: steps,
        w_g,
        w_s,
        level,
    })
}

/// Hill-climbing candidates: the article steps (FIL_L1), then for FIL_L2
/// the steps of each linked article, in step order.
pub fn candidate_pool(
    corpus: &Corpus,
    goal_id: &str,
    level: QueryLevel,
    links: Option<&HashMap<String, LinkTarget>>,
) -> Result<Vec<String>> {
    let article = corpus.article(goal_id)?;
    let mut pool: Vec<String> = article.steps.iter().map(|s| s.text.clone()).collect();
    match level {
        QueryLevel::FilL1 => {}
        QueryLevel::FilL2 => {
            let links = links.ok_or_else(|| Error::invalid("FIL_L2 queries need step links"))?;
            for s in &article.steps {
                if let Some(LinkTarget::Goal(h)) = links.get(&s.step_id) {
                    if h != goal_id {
                        pool.extend(corpus.article(h)?.steps.iter().map(|x| x.text.clone()));
                    }
                }
            }
        }
        QueryLevel::L0 | QueryLevel::L1 => {
            return Err(Error::invalid("candidate pools exist only for filtered levels"));
        }
    }
    Ok(pool)
}

/// Weighted relevance of one video.
pub fn rel(index: &TextIndex, query: &Query, video_id: &str) -> Result<f64> {
    let g = index.bm25_score(&query.goal_clause, video_id)?;
    let mut steps = 0.0;
    for s in &query.step_clauses {
        steps += index.bm25_score(s, video_id)?;
    }
    Ok(query.w_g * g + query.w_s * steps)
}

/// [`rel`] for every video in the pool, by pool position.
pub fn query_scores(index: &TextIndex, query: &Query) -> Vec<f64> {
    let g = index.score_all(&query.goal_clause);
    let mut steps = vec![0.0; g.len()];
    for s in &query.step_clauses {
        for (acc, v) in steps.iter_mut().zip(index.score_all(s)) {
            *acc += v;
        }
    }
    combine(query.w_g, &g, query.w_s, &steps)
}

fn combine(w_g: f64, goal: &[f64], w_s: f64, steps: &[f64]) -> Vec<f64> {
    goal.iter().zip(steps).map(|(g, s)| w_g * g + w_s * s).collect()
}

/// A full ordering of the video pool for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub goal_id: String,
    pub entries: Vec<(String, f64)>,
    ranks: HashMap<String, usize>,
}

impl Ranking {
    /// Wrap an already ordered pool. Ids must be distinct.
    pub fn from_entries(goal_id: impl Into<String>, entries: Vec<(String, f64)>) -> Result<Ranking> {
        let mut ranks = HashMap::with_capacity(entries.len());
        for (r, (id, _)) in entries.iter().enumerate() {
            if ranks.insert(id.clone(), r + 1).is_some() {
                return Err(Error::Duplicate {
                    kind: "video_id",
                    id: id.clone(),
                });
            }
        }
        Ok(Ranking {
            goal_id: goal_id.into(),
            entries,
            ranks,
        })
    }

    /// 1-based rank.
    pub fn rank(&self, video_id: &str) -> Option<usize> {
        self.ranks.get(video_id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn rank_videos(index: &TextIndex, query: &Query) -> Result<Ranking> {
    if index.num_docs() == 0 {
        return Err(Error::Empty("video pool".into()));
    }
    query.validate()?;
    let scores = query_scores(index, query);
    let ids = index.doc_ids();
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_unstable_by(|&a, &b| rank_order(scores[a], &ids[a], scores[b], &ids[b]));
    let entries: Vec<(String, f64)> = order.iter().map(|&i| (ids[i].clone(), scores[i])).collect();
    Ranking::from_entries(query.goal_id.clone(), entries)
}

/// Objective minimized by the step filter, measured on training videos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterCost {
    /// Mean rank of the training videos.
    MeanRank,
    /// One minus recall@N of the training videos.
    RecallAt(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub w_g: f64,
    pub w_s: f64,
    pub cap: usize,
    pub cost: FilterCost,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            w_g: FILTERED_WEIGHTS.0,
            w_s: FILTERED_WEIGHTS.1,
            cap: FILTER_CAP,
            cost: FilterCost::MeanRank,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub query: Query,
    /// Indices into the candidate list, in the order they were added.
    pub added: Vec<usize>,
    /// Cost of `[g]` followed by the cost after each accepted addition.
    pub accepted_costs: Vec<f64>,
}

/// Ranks that a score vector assigns to selected pool positions, with the
/// same tie rule as [`rank_videos`].
struct RankCounter<'a> {
    id_rank: &'a [usize],
    targets: &'a [usize],
}

impl RankCounter<'_> {
    fn ranks(&self, scores: &[f64]) -> Vec<usize> {
        // u outranks v iff (score_u, -id_u) > (score_v, -id_v)
        let key = |i: usize| (scores[i], self.id_rank[i]);
        let beats = |a: (f64, usize), b: (f64, usize)| match a.0.total_cmp(&b.0) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => a.1 < b.1,
        };
        let mut sorted: Vec<(f64, usize)> = self.targets.iter().map(|&i| key(i)).collect();
        // ascending: weakest first
        sorted.sort_by(|a, b| {
            if beats(*b, *a) {
                std::cmp::Ordering::Less
            } else if beats(*a, *b) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        let mut diff = vec![0i64; sorted.len() + 1];
        for u in 0..scores.len() {
            let ku = key(u);
            let below = sorted.partition_point(|&kv| beats(ku, kv));
            diff[0] += 1;
            diff[below] -= 1;
        }
        let mut out = Vec::with_capacity(sorted.len());
        let mut running = 0i64;
        for d in &diff[..sorted.len()] {
            running += d;
            out.push(1 + running as usize);
        }
        out
    }

    fn cost(&self, scores: &[f64], cost: FilterCost) -> f64 {
        let ranks = self.ranks(scores);
        let n = ranks.len() as f64;
        match cost {
            FilterCost::MeanRank => ranks.iter().sum::<usize>() as f64 / n,
            FilterCost::RecallAt(k) => 1.0 - ranks.iter().filter(|&&r| r <= k).count() as f64 / n,
        }
    }
}

impl VideoCorpus {
    /// Cost of a query on a set of videos under the full-pool ranking.
    pub fn query_cost(&self, query: &Query, videos: &[String], cost: FilterCost) -> Result<f64> {
        if videos.is_empty() {
            return Err(Error::Empty("video set for cost".into()));
        }
        let targets = videos
            .iter()
            .map(|v| self.index.doc_position(v))
            .collect::<Result<Vec<_>>>()?;
        let counter = RankCounter {
            id_rank: &self.id_rank,
            targets: &targets,
        };
        Ok(counter.cost(&query_scores(&self.index, query), cost))
    }

    /// Greedy forward selection of step clauses.
    ///
    /// Starting from the goal alone, each round tries every unused candidate,
    /// keeps the one with the lowest cost (earliest on ties), and accepts it
    /// only if it strictly lowers the best cost so far. The round counter
    /// starts at `min(n, cap)` and the loop runs while it is >= 0, so at most
    /// `min(n, cap) + 1` clauses are added.
    pub fn filter_steps(
        &self,
        goal_id: &str,
        goal_text: &str,
        candidates: &[String],
        train_videos: &[String],
        level: QueryLevel,
        cfg: &FilterConfig,
    ) -> Result<FilterOutcome> {
        if train_videos.is_empty() {
            return Err(Error::Empty(format!("training videos for goal `{goal_id}`")));
        }
        let targets = train_videos
            .iter()
            .map(|v| self.index.doc_position(v))
            .collect::<Result<Vec<_>>>()?;
        let counter = RankCounter {
            id_rank: &self.id_rank,
            targets: &targets,
        };
        let goal_scores = self.index.score_all(goal_text);
        let cand_scores: Vec<Vec<f64>> = candidates.iter().map(|c| self.index.score_all(c)).collect();

        let mut step_sum = vec![0.0; goal_scores.len()];
        let mut used = vec![false; candidates.len()];
        let mut added = Vec::new();
        let mut min_cost = counter.cost(&combine(cfg.w_g, &goal_scores, cfg.w_s, &step_sum), cfg.cost);
        let mut accepted_costs = vec![min_cost];

        let mut rounds_left = candidates.len().min(cfg.cap) as isize;
        let mut trial = vec![0.0; goal_scores.len()];
        while rounds_left >= 0 {
            let mut best: Option<(f64, usize)> = None;
            for (p, cs) in cand_scores.iter().enumerate() {
                if used[p] {
                    continue;
                }
                for ((t, s), c) in trial.iter_mut().zip(&step_sum).zip(cs) {
                    *t = s + c;
                }
                let cost = counter.cost(&combine(cfg.w_g, &goal_scores, cfg.w_s, &trial), cfg.cost);
                if best.is_none_or(|(b, _)| cost < b) {
                    best = Some((cost, p));
                }
            }
            match best {
                Some((cost, p)) if cost < min_cost => {
                    min_cost = cost;
                    used[p] = true;
                    added.push(p);
                    accepted_costs.push(cost);
                    for (s, c) in step_sum.iter_mut().zip(&cand_scores[p]) {
                        *s += c;
                    }
                }
                _ => break,
            }
            rounds_left -= 1;
        }
        Ok(FilterOutcome {
            query: Query {
                goal_id: goal_id.to_string(),
                goal_clause: goal_text.to_string(),
                step_clauses: added.iter().map(|&p| candidates[p].clone()).collect(),
                w_g: cfg.w_g,
                w_s: cfg.w_s,
                level,
            },
            added,
            accepted_costs,
        })
    }

    /// Build the query of `level` for every video goal, filtering on each
    /// goal's training videos where the level calls for it.
    pub fn build_queries(
        &self,
        corpus: &Corpus,
        level: QueryLevel,
        links: Option<&HashMap<String, LinkTarget>>,
        cfg: &FilterConfig,
        exec: Execution,
    ) -> Result<Vec<Query>> {
        self.check_goals(corpus)?;
        let goals: Vec<&str> = self.goals().collect();
        exec::try_map(exec, &goals, |g| match level {
            QueryLevel::L0 | QueryLevel::L1 => make_query(corpus, g, level),
            QueryLevel::FilL1 | QueryLevel::FilL2 => {
                let pool = candidate_pool(corpus, g, level, links)?;
                let title = &corpus.article(g)?.title;
                let train = &self.goal_videos(g)?.train;
                Ok(self.filter_steps(g, title, &pool, train, level, cfg)?.query)
            }
        })
    }

    /// Rank the whole pool for each query and score one split's gold videos.
    pub fn evaluate(&self, queries: &[Query], split: VideoSplit, ns: &[usize], exec: Execution) -> Result<VrMetrics> {
        let rankings = exec::try_map(exec, queries, |q| rank_videos(&self.index, q))?;
        vr_metrics(&rankings, &self.gold(split), ns)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VrMetrics {
    pub goals: usize,
    pub recall: Vec<(usize, f64)>,
    pub precision: Vec<(usize, f64)>,
    pub mean_rank: f64,
}

impl VrMetrics {
    pub fn recall_at(&self, n: usize) -> Option<f64> {
        self.recall.iter().find(|x| x.0 == n).map(|x| x.1)
    }

    pub fn precision_at(&self, n: usize) -> Option<f64> {
        self.precision.iter().find(|x| x.0 == n).map(|x| x.1)
    }
}

/// Recall@N, precision@N and mean rank averaged over goals.
pub fn vr_metrics(rankings: &[Ranking], gold: &HashMap<String, Vec<String>>, ns: &[usize]) -> Result<VrMetrics> {
    if rankings.is_empty() {
        return Err(Error::Empty("rankings".into()));
    }
    if ns.contains(&0) {
        return Err(Error::invalid("metric cutoffs must be >= 1"));
    }
    let pool = rankings[0].len();
    let mut recall = vec![0.0; ns.len()];
    let mut precision = vec![0.0; ns.len()];
    let mut mr = 0.0;
    for r in rankings {
        if r.len() != pool {
            return Err(Error::invalid(format!(
                "ranking for `{}` covers {} videos, expected {pool}",
                r.goal_id,
                r.len()
            )));
        }
        let vids = gold
            .get(&r.goal_id)
            .ok_or_else(|| Error::unknown("gold goal", &r.goal_id))?;
        if vids.is_empty() {
            return Err(Error::Empty(format!("gold video set for `{}`", r.goal_id)));
        }
        let ranks = vids
            .iter()
            .map(|v| r.rank(v).ok_or_else(|| Error::unknown("video", v)))
            .collect::<Result<Vec<_>>>()?;
        let m = ranks.len() as f64;
        for (i, &n) in ns.iter().enumerate() {
            let hit = ranks.iter().filter(|&&x| x <= n).count() as f64;
            recall[i] += hit / m;
            precision[i] += hit / n as f64;
        }
        mr += ranks.iter().sum::<usize>() as f64 / m;
    }
    let g = rankings.len() as f64;
    Ok(VrMetrics {
        goals: rankings.len(),
        recall: ns.iter().zip(recall).map(|(&n, v)| (n, v / g)).collect(),
        precision: ns.iter().zip(precision).map(|(&n, v)| (n, v / g)).collect(),
        mean_rank: mr / g,
    })
}

/// One row per `(level, split)` with R@N, P@N and MR columns.
pub fn write_metrics_tsv(rows: &[(QueryLevel, VideoSplit, VrMetrics)], mut out: impl Write) -> std::io::Result<()> {
    let Some((_, _, first)) = rows.first() else {
        return Ok(());
    };
    write!(out, "level\tsplit\tgoals")?;
    for (n, _) in &first.recall {
        write!(out, "\tR@{n}")?;
    }
    for (n, _) in &first.precision {
        write!(out, "\tP@{n}")?;
    }
    writeln!(out, "\tMR")?;
    for (level, split, m) in rows {
        write!(out, "{level}\t{split}\t{}", m.goals)?;
        for (_, v) in &m.recall {
            write!(out, "\t{:.2}", v * 100.0)?;
        }
        for (_, v) in &m.precision {
            write!(out, "\t{:.2}", v * 100.0)?;
        }
        writeln!(out, "\t{:.2}", m.mean_rank)?;
    }
    Ok(())
}
