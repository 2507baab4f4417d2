use std::collections::HashMap;

use prockb_core::corpus::Corpus;
use prockb_core::embedding::{EmbeddingStore, HashEmbedder};
use prockb_core::hierarchy::{expand, read_links, write_links, ExpandPolicy, Expansion, Pipeline};
use prockb_core::linkeval::{run_linking, LinkingSetup};
use prockb_core::rerank::{make_examples, train, LexicalFeaturizer, LexicalSource, LinkTarget, RerankModel, TrainConfig};
use prockb_core::retrieval::{read_candidates, retrieve_steps, write_candidates, GoalIndex};
use prockb_core::synth::{self, VideoSpec};
use prockb_core::textsearch::{Analyzer, Bm25Params};
use prockb_core::videoretrieval::{candidate_pool, FilterConfig, QueryLevel, VideoCorpus, VideoSplit, REPORT_NS};
use prockb_core::Execution;

#[test]
fn corpus_jsonl_round_trips() {
    let (corpus, _) = synth::identity_corpus(10, 2, 3);
    let text = corpus.to_jsonl();
    let back = Corpus::from_reader(text.as_bytes(), Default::default()).unwrap();
    assert_eq!(back, corpus);
    assert_eq!(back.to_jsonl(), text);
}

#[test]
fn identity_corpus_links_perfectly() {
    let (corpus, gold) = synth::identity_corpus(30, 2, 8);
    let run = run_linking(&corpus, gold, &LinkingSetup::default()).unwrap();
    for r in &run.reports {
        assert_eq!(r.recall[0].1, 1.0, "{}", r.system);
    }
    assert_eq!(run.dropped, 0);
    assert_eq!(run.curve.len(), 6);
}

#[test]
fn unresolvable_gold_links_are_dropped() {
    let (corpus, mut gold) = synth::identity_corpus(12, 1, 2);
    gold.push(prockb_core::linkeval::GoldLink {
        step_id: "nope".into(),
        gold_goal_id: "g0".into(),
    });
    let run = run_linking(&corpus, gold, &LinkingSetup::default()).unwrap();
    assert_eq!(run.dropped, 1);
}

#[test]
fn candidates_round_trip_and_ignore_execution_mode() {
    let (corpus, _) = synth::identity_corpus(20, 3, 4);
    let store = EmbeddingStore::from_corpus(&corpus, &HashEmbedder::new(32, 1).unwrap(), Execution::Parallel);
    let index = GoalIndex::for_corpus(&store, &corpus).unwrap();
    let steps: Vec<&str> = corpus.steps().map(|s| s.step_id.as_str()).collect();
    let seq = retrieve_steps(&corpus, &store, &index, &steps, 5, true, Execution::Sequential).unwrap();
    let par = retrieve_steps(&corpus, &store, &index, &steps, 5, true, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    for l in &seq {
        let parent = &corpus.step(&l.step_id).unwrap().parent_goal_id;
        assert!(l.entries.iter().all(|c| &c.goal_id != parent));
    }
    let mut buf = Vec::new();
    write_candidates(&seq, &mut buf).unwrap();
    let back = read_candidates(buf.as_slice()).unwrap();
    assert_eq!(back.len(), seq.len());
    for (a, b) in back.iter().zip(&seq) {
        assert_eq!(a.entries, b.entries);
    }
}

#[test]
fn training_is_identical_across_execution_modes() {
    let (corpus, gold) = synth::identity_corpus(25, 3, 12);
    let store = EmbeddingStore::from_corpus(&corpus, &HashEmbedder::new(32, 0).unwrap(), Execution::Sequential);
    let index = GoalIndex::for_corpus(&store, &corpus).unwrap();
    let steps: Vec<&str> = gold.iter().map(|g| g.step_id.as_str()).collect();
    let lists = retrieve_steps(&corpus, &store, &index, &steps, 10, true, Execution::Sequential).unwrap();
    let gold_map: HashMap<String, String> = gold.iter().map(|g| (g.step_id.clone(), g.gold_goal_id.clone())).collect();
    let source = LexicalSource::new(&corpus, LexicalFeaturizer::new(8).unwrap(), Default::default(), 1);
    let ex = make_examples(&lists, &gold_map, true, &source, Execution::Parallel).unwrap();
    let fit = |exec| {
        let cfg = TrainConfig {
            exec,
            batch_size: 4,
            ..TrainConfig::default()
        };
        train(RerankModel::new(8, 1.0).with_unlinkable(), &ex, &[], &cfg).unwrap()
    };
    let (a, b) = (fit(Execution::Sequential), fit(Execution::Parallel));
    assert_eq!(a.model, b.model);
    assert_eq!(a.curve, b.curve);
}

fn chain_pipeline_tree(policy: ExpandPolicy, max_depth: usize) -> (String, usize) {
    let fx = synth::chain();
    let store = EmbeddingStore::from_corpus(&fx.corpus, &HashEmbedder::new(64, 0).unwrap(), Execution::Sequential);
    let index = GoalIndex::for_corpus(&store, &fx.corpus).unwrap();
    let p = Pipeline {
        corpus: &fx.corpus,
        store: &store,
        index: &index,
        model: &fx.model,
        features: &fx.features,
        k: 30,
        exclude_parent: true,
    };
    let tree = expand(&p, "a", max_depth, policy, Execution::Parallel).unwrap();
    tree.check_invariants().unwrap();
    (tree.to_json(), tree.nodes.len())
}

#[test]
fn depth_zero_leaves_the_article_flat() {
    let (json, nodes) = chain_pipeline_tree(ExpandPolicy::default(), 0);
    assert_eq!(nodes, 1);
    assert!(json.contains("\"link\": null"));
}

#[test]
fn chain_tree_json_shape() {
    let (json, nodes) = chain_pipeline_tree(ExpandPolicy::default(), 5);
    assert_eq!(nodes, 3);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["goal_id"], "a");
    assert_eq!(v["steps"][0]["link"], "b");
    assert_eq!(v["steps"][0]["children"][0]["link"], "c");
    assert_eq!(v["steps"][1]["link"], "UNLINKABLE");
}

#[test]
fn cycle_policy_variants() {
    let fx = synth::cycle();
    let store = EmbeddingStore::from_corpus(&fx.corpus, &HashEmbedder::new(64, 0).unwrap(), Execution::Sequential);
    let index = GoalIndex::for_corpus(&store, &fx.corpus).unwrap();
    let p = Pipeline {
        corpus: &fx.corpus,
        store: &store,
        index: &index,
        model: &fx.model,
        features: &fx.features,
        k: 30,
        exclude_parent: true,
    };
    let suppressed = expand(&p, "a", 4, ExpandPolicy::default(), Execution::Sequential).unwrap();
    assert!(suppressed.to_json().contains("\"suppressed\": \"cycle\""));
    let excluded = expand(&p, "a", 4, ExpandPolicy { exclude_ancestors: true }, Execution::Sequential).unwrap();
    excluded.check_invariants().unwrap();
    // with both goals on the path nothing is left to retrieve for b's steps
    assert_eq!(excluded.nodes.len(), 2);
    assert!(excluded.nodes[1].steps.iter().all(|s| s.expansion == Expansion::NoCandidates));
    assert!(excluded.to_json().contains("\"suppressed\": \"no_candidates\""));
}

#[test]
fn links_dump_feeds_fil_l2() {
    let spec = VideoSpec {
        goals: 6,
        videos_per_goal: 16,
        ..VideoSpec::default()
    };
    let (corpus, videos) = synth::video_corpus(&spec, 3);
    let vc = VideoCorpus::build(videos, Bm25Params::default(), Analyzer::default(), 3).unwrap();

    // link every step whose text is some other article's step text
    let fx_links: HashMap<String, LinkTarget> = corpus
        .steps()
        .filter_map(|s| {
            corpus
                .articles()
                .iter()
                .find(|a| a.goal_id != s.parent_goal_id && a.steps.iter().any(|t| t.text == s.text))
                .map(|a| (s.step_id.clone(), LinkTarget::Goal(a.goal_id.clone())))
        })
        .collect();
    assert!(!fx_links.is_empty());
    let g = corpus.articles()[0].goal_id.clone();
    let l1 = candidate_pool(&corpus, &g, QueryLevel::FilL1, None).unwrap();
    let l2 = candidate_pool(&corpus, &g, QueryLevel::FilL2, Some(&fx_links)).unwrap();
    assert!(l2.len() >= l1.len());
    assert_eq!(&l2[..l1.len()], &l1[..]);

    let q = vc
        .build_queries(&corpus, QueryLevel::FilL2, Some(&fx_links), &FilterConfig::default(), Execution::Parallel)
        .unwrap();
    let seq = vc
        .build_queries(&corpus, QueryLevel::FilL2, Some(&fx_links), &FilterConfig::default(), Execution::Sequential)
        .unwrap();
    assert_eq!(q, seq);
    let m = vc.evaluate(&q, VideoSplit::Dev, &REPORT_NS, Execution::Parallel).unwrap();
    assert_eq!(m.goals, 6);
    assert!(m.mean_rank >= 1.0);
}

#[test]
fn links_tsv_round_trip() {
    let fx = synth::chain();
    let store = EmbeddingStore::from_corpus(&fx.corpus, &HashEmbedder::new(64, 0).unwrap(), Execution::Sequential);
    let index = GoalIndex::for_corpus(&store, &fx.corpus).unwrap();
    let p = Pipeline {
        corpus: &fx.corpus,
        store: &store,
        index: &index,
        model: &fx.model,
        features: &fx.features,
        k: 30,
        exclude_parent: true,
    };
    let steps: Vec<&str> = fx.corpus.steps().map(|s| s.step_id.as_str()).collect();
    let decisions = p.link_all(&steps, Execution::Parallel).unwrap();
    let mut buf = Vec::new();
    write_links(&decisions, &mut buf).unwrap();
    let links = read_links(buf.as_slice()).unwrap();
    assert_eq!(links["a1"], LinkTarget::Goal("b".into()));
    assert_eq!(links["a2"], LinkTarget::Unlinkable);
    assert!(decisions.iter().all(|d| d.config_hash == p.config_hash()));
}
