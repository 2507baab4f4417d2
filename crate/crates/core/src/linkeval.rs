//! Intrinsic evaluation of step-to-goal linking against gold hyperlinks.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{ContextMode, Corpus};
use crate::embedding::{EmbeddingStore, HashEmbedder};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::rerank::{
    make_examples, score_candidates, train, EpochStats, FeatureSource, LexicalFeaturizer, LexicalSource, LinkTarget,
    RerankModel, ScoringInput, TrainConfig,
};
use crate::retrieval::{retrieve_steps, CandidateList, GoalIndex, DEFAULT_K};

pub const LINK_SPLIT_RATIOS: [f64; 3] = [7.0, 2.0, 1.0];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GoldLink {
    pub step_id: String,
    pub gold_goal_id: String,
}

/// Gold links TSV: `step_id \t gold_goal_id`. Each step may appear once.
pub fn read_gold(reader: impl BufRead) -> Result<Vec<GoldLink>> {
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
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != 2 || f[0].is_empty() || f[1].is_empty() {
            return Err(Error::Malformed {
                line: lineno,
                message: "expected `step_id<TAB>gold_goal_id`".into(),
            });
        }
        if !seen.insert(f[0].to_string()) {
            return Err(Error::Duplicate {
                kind: "gold step_id",
                id: f[0].to_string(),
            });
        }
        out.push(GoldLink {
            step_id: f[0].to_string(),
            gold_goal_id: f[1].to_string(),
        });
    }
    Ok(out)
}

pub fn write_gold(links: &[GoldLink], mut out: impl Write) -> std::io::Result<()> {
    for l in links {
        writeln!(out, "{}\t{}", l.step_id, l.gold_goal_id)?;
    }
    Ok(())
}

/// Keep links whose step and gold goal both exist in `corpus`. Returns the
/// kept links and the dropped ones.
pub fn resolve_against(corpus: &Corpus, links: Vec<GoldLink>) -> (Vec<GoldLink>, Vec<GoldLink>) {
    let (kept, dropped): (Vec<_>, Vec<_>) = links
        .into_iter()
        .partition(|l| corpus.contains_step(&l.step_id) && corpus.contains_goal(&l.gold_goal_id));
    if !dropped.is_empty() {
        log::warn!("dropped {} gold links that do not resolve in the corpus", dropped.len());
    }
    (kept, dropped)
}

/// Partition `n` items by `ratios`. Every partition after the first gets
/// `floor(n * r / sum)`; the first takes the remainder.
pub fn partition_sizes(n: usize, ratios: &[f64]) -> Result<Vec<usize>> {
    if ratios.is_empty() || ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::invalid("split ratios must be positive"));
    }
    let total: f64 = ratios.iter().sum();
    let mut sizes = vec![0; ratios.len()];
    for (s, r) in sizes.iter_mut().zip(ratios).skip(1) {
        *s = (n as f64 * r / total + 1e-9).floor() as usize;
    }
    sizes[0] = n - sizes[1..].iter().sum::<usize>();
    Ok(sizes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<GoldLink>,
    pub dev: Vec<GoldLink>,
    pub test: Vec<GoldLink>,
    pub seed: u64,
}

/// Seeded shuffle followed by a contiguous train/dev/test partition.
pub fn split(links: &[GoldLink], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if links.len() < ratios.len() {
        return Err(Error::invalid(format!(
            "cannot split {} links into {} partitions",
            links.len(),
            ratios.len()
        )));
    }
    let sizes = partition_sizes(links.len(), &ratios)?;
    let mut shuffled = links.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = shuffled.split_off(sizes[0] + sizes[1]);
    let dev = shuffled.split_off(sizes[0]);
    Ok(Split {
        train: shuffled,
        dev,
        test,
        seed,
    })
}

/// Fraction of gold steps whose gold goal is among the first `n` entries of
/// that step's ranking. Unlinkable entries occupy a position but never match.
pub fn recall_at(rankings: &HashMap<String, Vec<LinkTarget>>, gold: &[GoldLink], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("recall@N requires N >= 1"));
    }
    if gold.is_empty() {
        return Err(Error::Empty("gold link set".into()));
    }
    let mut hits = 0usize;
    for g in gold {
        let ranking = rankings
            .get(&g.step_id)
            .ok_or_else(|| Error::unknown("ranking for gold step", &g.step_id))?;
        if ranking
            .iter()
            .take(n)
            .any(|t| t.goal_id() == Some(g.gold_goal_id.as_str()))
        {
            hits += 1;
        }
    }
    Ok(hits as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallReport {
    pub system: String,
    pub steps: usize,
    /// `(N, recall@N)` in increasing N.
    pub recall: Vec<(usize, f64)>,
}

pub fn recall_report(
    system: &str,
    rankings: &HashMap<String, Vec<LinkTarget>>,
    gold: &[GoldLink],
    ns: &[usize],
) -> Result<RecallReport> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let recall = ns
        .iter()
        .map(|&n| recall_at(rankings, gold, n).map(|r| (n, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecallReport {
        system: system.to_string(),
        steps: gold.len(),
        recall,
    })
}

pub fn write_recall_tsv(reports: &[RecallReport], mut out: impl Write) -> std::io::Result<()> {
    let mut ns: Vec<usize> = reports.iter().flat_map(|r| r.recall.iter().map(|x| x.0)).collect();
    ns.sort_unstable();
    ns.dedup();
    write!(out, "system\tsteps")?;
    for n in &ns {
        write!(out, "\tR@{n}")?;
    }
    writeln!(out)?;
    for r in reports {
        write!(out, "{}\t{}", r.system, r.steps)?;
        for n in &ns {
            match r.recall.iter().find(|x| x.0 == *n) {
                Some((_, v)) => write!(out, "\t{:.4}", v)?,
                None => write!(out, "\t-")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Settings for an end-to-end linking run on gold links.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkingSetup {
    pub embed_dim: usize,
    pub embed_seed: u64,
    pub k: usize,
    pub feature_dim: usize,
    pub lambda_init: f64,
    pub unlinkable: bool,
    pub context: ContextMode,
    pub window: usize,
    pub split_ratios: [f64; 3],
    pub split_seed: u64,
    pub train: TrainConfig,
    pub recall_ns: Vec<usize>,
    pub exec: Execution,
}

impl Default for LinkingSetup {
    fn default() -> Self {
        LinkingSetup {
            embed_dim: 64,
            embed_seed: 0,
            k: DEFAULT_K,
            feature_dim: 8,
            lambda_init: 1.0,
            unlinkable: true,
            context: ContextMode::None,
            window: 1,
            split_ratios: LINK_SPLIT_RATIOS,
            split_seed: 0,
            train: TrainConfig::default(),
            recall_ns: vec![1, 10, 30],
            exec: Execution::Parallel,
        }
    }
}

impl LinkingSetup {
    /// Draw the split and training seeds from one generator seeded with
    /// `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.split_seed = rng.next_u64();
        self.train.seed = rng.next_u64();
        self
    }
}

#[derive(Debug, Clone)]
pub struct LinkingRun {
    pub model: RerankModel,
    pub best_epoch: usize,
    pub curve: Vec<EpochStats>,
    pub split: Split,
    /// Gold links whose step or goal is missing from the corpus.
    pub dropped: usize,
    /// `retrieval` and `reranked` rows for the test split and for all links.
    pub reports: Vec<RecallReport>,
    pub reranked: HashMap<String, Vec<LinkTarget>>,
}

/// Embed with the built-in hash embedder, compute lexical pair features,
/// and run [`run_linking_with`].
pub fn run_linking(corpus: &Corpus, gold: Vec<GoldLink>, setup: &LinkingSetup) -> Result<LinkingRun> {
    let embedder = HashEmbedder::new(setup.embed_dim, setup.embed_seed)?;
    let store = EmbeddingStore::from_corpus(corpus, &embedder, setup.exec);
    let source = LexicalSource::new(
        corpus,
        LexicalFeaturizer::with_corpus_idf(setup.feature_dim, corpus)?,
        setup.context,
        setup.window,
    );
    run_linking_with(corpus, &store, &source, gold, setup)
}

/// Retrieve, train the reranker on the train split (selecting on dev), and
/// report recall@N of stage-1 and reranked lists.
///
/// Steps never retrieve their own article. `k` is lowered when the corpus
/// has fewer other goals.
pub fn run_linking_with(
    corpus: &Corpus,
    store: &EmbeddingStore,
    source: &dyn FeatureSource,
    gold: Vec<GoldLink>,
    setup: &LinkingSetup,
) -> Result<LinkingRun> {
    let (gold, dropped) = resolve_against(corpus, gold);
    let sp = split(&gold, setup.split_ratios, setup.split_seed)?;
    let index = GoalIndex::for_corpus(store, corpus)?;
    let lists = candidate_lists(corpus, store, &index, &gold, setup.k, setup.exec)?;
    let by_step: HashMap<&str, &CandidateList> = lists.iter().map(|l| (l.step_id.as_str(), l)).collect();
    let select = |part: &[GoldLink]| -> Vec<CandidateList> {
        part.iter().map(|g| by_step[g.step_id.as_str()].clone()).collect()
    };

    let gold_map: HashMap<String, String> = gold.iter().map(|g| (g.step_id.clone(), g.gold_goal_id.clone())).collect();
    let train_ex = make_examples(&select(&sp.train), &gold_map, setup.unlinkable, source, setup.exec)?;
    let dev_ex = make_examples(&select(&sp.dev), &gold_map, setup.unlinkable, source, setup.exec)?;

    let mut model = RerankModel::new(source.dim(), setup.lambda_init).with_context(setup.context, setup.window);
    if setup.unlinkable {
        model = model.with_unlinkable();
    }
    let outcome = train(model, &train_ex, &dev_ex, &setup.train)?;

    let (stage1, reranked) = rankings(&outcome.model, &lists, source, setup.exec)?;
    let mut reports = Vec::new();
    for (part, links) in [("test", &sp.test), ("all", &gold)] {
        reports.push(recall_report(&format!("retrieval:{part}"), &stage1, links, &setup.recall_ns)?);
        reports.push(recall_report(&format!("reranked:{part}"), &reranked, links, &setup.recall_ns)?);
    }
    Ok(LinkingRun {
        model: outcome.model,
        best_epoch: outcome.best_epoch,
        curve: outcome.curve,
        split: sp,
        dropped: dropped.len(),
        reports,
        reranked,
    })
}

/// Recall@N of a fixed model on every resolvable gold link:
/// `retrieval:all` and `reranked:all` rows.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_model(
    corpus: &Corpus,
    store: &EmbeddingStore,
    source: &dyn FeatureSource,
    model: &RerankModel,
    gold: Vec<GoldLink>,
    k: usize,
    ns: &[usize],
    exec: Execution,
) -> Result<(Vec<RecallReport>, Rankings)> {
    let (gold, _) = resolve_against(corpus, gold);
    let index = GoalIndex::for_corpus(store, corpus)?;
    let lists = candidate_lists(corpus, store, &index, &gold, k, exec)?;
    let (stage1, reranked) = rankings(model, &lists, source, exec)?;
    let reports = vec![
        recall_report("retrieval:all", &stage1, &gold, ns)?,
        recall_report("reranked:all", &reranked, &gold, ns)?,
    ];
    Ok((reports, reranked))
}

fn candidate_lists(
    corpus: &Corpus,
    store: &EmbeddingStore,
    index: &GoalIndex,
    gold: &[GoldLink],
    k: usize,
    exec: Execution,
) -> Result<Vec<CandidateList>> {
    let k = k.min(corpus.num_goals().saturating_sub(1)).max(1);
    let steps: Vec<&str> = gold.iter().map(|g| g.step_id.as_str()).collect();
    retrieve_steps(corpus, store, index, &steps, k, true, exec)
}

/// Ranked targets per step_id.
pub type Rankings = HashMap<String, Vec<LinkTarget>>;

fn rankings(
    model: &RerankModel,
    lists: &[CandidateList],
    source: &dyn FeatureSource,
    exec: Execution,
) -> Result<(Rankings, Rankings)> {
    let reranked = exec::try_map(exec, lists, |l| {
        let scored = score_candidates(model, &ScoringInput::from_candidates(l, source)?)?;
        Ok((l.step_id.clone(), scored.ranking()))
    })?;
    let stage1 = lists
        .iter()
        .map(|l| {
            let r = l.entries.iter().map(|c| LinkTarget::Goal(c.goal_id.clone())).collect();
            (l.step_id.clone(), r)
        })
        .collect();
    Ok((stage1, reranked.into_iter().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn links(n: usize) -> Vec<GoldLink> {
        (0..n)
            .map(|i| GoldLink {
                step_id: format!("s{i}"),
                gold_goal_id: format!("g{i}"),
            })
            .collect()
    }

    #[test]
    fn split_sizes_ten() {
        let s = split(&links(10), LINK_SPLIT_RATIOS, 1).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (7, 2, 1));
    }

    #[test]
    fn split_sizes_paper_scale() {
        let s = split(&links(21_000), LINK_SPLIT_RATIOS, 3).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (14_700, 4_200, 2_100));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let all = links(57);
        let a = split(&all, LINK_SPLIT_RATIOS, 9).unwrap();
        let b = split(&all, LINK_SPLIT_RATIOS, 9).unwrap();
        assert_eq!(a, b);
        let c = split(&all, LINK_SPLIT_RATIOS, 10).unwrap();
        assert_ne!(a.train, c.train);
        let mut union: Vec<GoldLink> = a.train.iter().chain(&a.dev).chain(&a.test).cloned().collect();
        union.sort();
        let mut orig = all.clone();
        orig.sort();
        assert_eq!(union, orig);
    }

    #[test]
    fn split_needs_enough_links() {
        assert!(split(&links(2), LINK_SPLIT_RATIOS, 0).is_err());
        assert!(split(&links(5), [1.0, 0.0, 1.0], 0).is_err());
    }

    #[test]
    fn partition_video_ratios() {
        assert_eq!(partition_sizes(40, &[7.5, 1.25, 1.25]).unwrap(), vec![30, 5, 5]);
        assert_eq!(partition_sizes(150, &[7.5, 1.25, 1.25]).unwrap(), vec![114, 18, 18]);
    }

    fn ranking(gold_rank: usize, len: usize, gold: &str) -> Vec<LinkTarget> {
        (1..=len)
            .map(|r| {
                if r == gold_rank {
                    LinkTarget::Goal(gold.to_string())
                } else {
                    LinkTarget::Goal(format!("other{r}"))
                }
            })
            .collect()
    }

    #[test]
    fn recall_at_one() {
        let gold = links(4);
        let ranks = [1, 3, 2, 50];
        let rankings: HashMap<_, _> = gold
            .iter()
            .zip(ranks)
            .map(|(g, r)| (g.step_id.clone(), ranking(r, 60, &g.gold_goal_id)))
            .collect();
        assert_eq!(recall_at(&rankings, &gold, 1).unwrap(), 0.25);
        assert_eq!(recall_at(&rankings, &gold, 3).unwrap(), 0.75);
        assert_eq!(recall_at(&rankings, &gold, 100).unwrap(), 1.0);
    }

    #[test]
    fn unlinkable_occupies_a_slot() {
        let gold = links(1);
        let r = vec![LinkTarget::Unlinkable, LinkTarget::Goal("g0".into())];
        let rankings = HashMap::from([("s0".to_string(), r)]);
        assert_eq!(recall_at(&rankings, &gold, 1).unwrap(), 0.0);
        assert_eq!(recall_at(&rankings, &gold, 2).unwrap(), 1.0);
    }

    #[test]
    fn missing_ranking_errors() {
        let gold = links(2);
        let rankings = HashMap::from([("s0".to_string(), vec![])]);
        let err = recall_at(&rankings, &gold, 1).unwrap_err();
        assert!(err.to_string().contains("s1"));
    }

    #[test]
    fn gold_io() {
        let text = "s1\tg1\ns2\tg2\n";
        let g = read_gold(text.as_bytes()).unwrap();
        assert_eq!(g.len(), 2);
        let mut buf = Vec::new();
        write_gold(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
        assert!(read_gold("s1\tg1\ns1\tg2\n".as_bytes()).is_err());
        assert!(read_gold("s1 g1\n".as_bytes()).is_err());
    }

    #[test]
    fn resolution_drops_unknown() {
        let c = Corpus::from_articles(
            [("g1".to_string(), "x".to_string(), vec![("s1".to_string(), "y".to_string())])],
            Default::default(),
        )
        .unwrap();
        let (kept, dropped) = resolve_against(
            &c,
            vec![
                GoldLink { step_id: "s1".into(), gold_goal_id: "g1".into() },
                GoldLink { step_id: "s1".into(), gold_goal_id: "gone".into() },
            ],
        );
        assert_eq!(kept.len(), 1);
        assert_eq!(dropped.len(), 1);
    }

    #[test]
    fn report_tsv() {
        let gold = links(2);
        let rankings: HashMap<_, _> = gold
            .iter()
            .map(|g| (g.step_id.clone(), ranking(2, 5, &g.gold_goal_id)))
            .collect();
        let rep = recall_report("sp", &rankings, &gold, &[10, 1, 1]).unwrap();
        assert_eq!(rep.recall, vec![(1, 0.0), (10, 1.0)]);
        let mut buf = Vec::new();
        write_recall_tsv(&[rep], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "system\tsteps\tR@1\tR@10\nsp\t2\t0.0000\t1.0000\n");
    }
}
