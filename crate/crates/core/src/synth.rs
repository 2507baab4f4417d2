//! Seeded synthetic corpora for tests, benchmarks and demos.
//!
//! Words are random consonant-vowel strings, so fixtures share no
//! vocabulary with real text and every draw is reproducible from the seed.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::Result;
use crate::linkeval::GoldLink;
use crate::rerank::{FeatureTable, Label, PairFeatures, RerankModel, ScoringInput, TrainExample};
use crate::text::NormalizeOptions;
use crate::videoretrieval::VideoDoc;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Draws distinct pseudo-words.
pub struct WordGen {
    rng: ChaCha8Rng,
    seen: HashSet<String>,
}

impl WordGen {
    pub fn new(seed: u64) -> WordGen {
        WordGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seen: HashSet::new(),
        }
    }

    pub fn word(&mut self) -> String {
        loop {
            let syllables = self.rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(CONSONANTS[self.rng.gen_range(0..CONSONANTS.len())] as char);
                w.push(VOWELS[self.rng.gen_range(0..VOWELS.len())] as char);
            }
            if self.seen.insert(w.clone()) {
                return w;
            }
        }
    }

    pub fn phrase(&mut self, n: usize) -> String {
        (0..n).map(|_| self.word()).collect::<Vec<_>>().join(" ")
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

type RawArticle = (String, String, Vec<(String, String)>);

fn build(articles: Vec<RawArticle>) -> Corpus {
    Corpus::from_articles(articles, NormalizeOptions::default()).expect("synthetic corpus is well formed")
}

/// Corpus where probe step `p{i}` is a verbatim copy of the title of goal
/// `g{i}` and lives in article `g{i+1}`. Gold links map each probe to the
/// goal it copies.
pub fn identity_corpus(n: usize, filler_steps: usize, seed: u64) -> (Corpus, Vec<GoldLink>) {
    assert!(n >= 2, "identity corpus needs two articles");
    let mut words = WordGen::new(seed);
    let titles: Vec<String> = (0..n).map(|_| words.phrase(3)).collect();
    let mut articles = Vec::with_capacity(n);
    for (j, title) in titles.iter().enumerate() {
        let src = (j + n - 1) % n;
        let mut steps = Vec::new();
        for f in 0..filler_steps {
            steps.push((format!("f{j}_{f}"), words.phrase(4)));
        }
        let at = words.rng().gen_range(0..=steps.len());
        steps.insert(at, (format!("p{src}"), titles[src].clone()));
        articles.push((format!("g{j}"), title.clone(), steps));
    }
    let gold = (0..n)
        .map(|i| GoldLink {
            step_id: format!("p{i}"),
            gold_goal_id: format!("g{i}"),
        })
        .collect();
    (build(articles), gold)
}

/// Linearly separable reranking examples: the gold candidate has feature 0
/// set to 1, everyone else 0; other features are noise and sim1 is random,
/// so an untrained identity model is near chance.
pub fn separable_examples(n: usize, candidates: usize, dim: usize, seed: u64) -> Vec<TrainExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|e| {
            let gold = rng.gen_range(0..candidates);
            let features = (0..candidates)
                .map(|c| {
                    let mut f: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
                    f[0] = if c == gold { 1.0 } else { 0.0 };
                    PairFeatures::new(f).expect("finite")
                })
                .collect();
            let input = ScoringInput {
                step_id: format!("s{e}"),
                goals: (0..candidates).map(|c| format!("g{c}")).collect(),
                sim1: (0..candidates).map(|_| rng.gen_range(0.0..1.0)).collect(),
                features,
                provenance: "synthetic".into(),
            };
            TrainExample {
                input,
                label: Label::Goal(gold),
            }
        })
        .collect()
}

/// A hand-wired linking setup: one binary feature marks the intended link of
/// each step, and a model that scores it above an unlinkable placeholder
/// that in turn beats every unintended goal.
pub struct WiredLinks {
    pub corpus: Corpus,
    pub features: FeatureTable,
    pub model: RerankModel,
}

pub const WIRED_DIM: usize = 8;

/// `articles` are `(goal_id, title, [(step_id, text)])`; `links` maps step
/// ids to their intended goal.
pub fn wired(articles: Vec<RawArticle>, links: &[(&str, &str)]) -> Result<WiredLinks> {
    let corpus = build(articles);
    let intended: HashMap<&str, &str> = links.iter().copied().collect();
    let mut features = FeatureTable::new(WIRED_DIM);
    for s in corpus.steps() {
        for g in corpus.goal_ids() {
            let mut f = vec![0.0; WIRED_DIM];
            if intended.get(s.step_id.as_str()) == Some(&g) {
                f[0] = 1.0;
            }
            features.insert(&s.step_id, g, PairFeatures::new(f)?)?;
        }
    }
    let mut model = RerankModel::new(WIRED_DIM, 0.0).with_unlinkable();
    let mut params = model.params();
    params[0] = 1.0;
    params[WIRED_DIM + 1] = 0.5;
    model.set_params(&params);
    Ok(WiredLinks {
        corpus,
        features,
        model,
    })
}

fn art(id: &str, title: &str, steps: &[(&str, &str)]) -> RawArticle {
    (
        id.to_string(),
        title.to_string(),
        steps.iter().map(|(s, t)| (s.to_string(), t.to_string())).collect(),
    )
}

/// `a -> b -> c`: one step of `a` links to `b` and one step of `b` to `c`.
pub fn chain() -> WiredLinks {
    wired(
        vec![
            art("a", "host a dinner party", &[("a1", "cook a roast"), ("a2", "set the table")]),
            art("b", "cook a roast", &[("b1", "season the meat"), ("b2", "preheat the oven")]),
            art("c", "season the meat", &[("c1", "mix salt and pepper"), ("c2", "rub the spices in")]),
        ],
        &[("a1", "b"), ("b1", "c")],
    )
    .expect("fixture is consistent")
}

/// `a -> b -> a`.
pub fn cycle() -> WiredLinks {
    wired(
        vec![
            art("a", "brew coffee", &[("a1", "grind beans"), ("a2", "pour water")]),
            art("b", "grind beans", &[("b1", "brew coffee first"), ("b2", "clean the grinder")]),
        ],
        &[("a1", "b"), ("b1", "a")],
    )
    .expect("fixture is consistent")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoSpec {
    pub goals: usize,
    pub videos_per_goal: usize,
    /// Steps per article that show up in that goal's videos.
    pub visual_steps: usize,
    /// Steps per article copied from other articles' visual steps. They
    /// never appear in this goal's own videos.
    pub borrowed_steps: usize,
    /// Chance that a caption mentions the goal title.
    pub p_title: f64,
    /// Chance that a caption mentions each visual step.
    pub p_step: f64,
    /// Captions that would mention fewer visual steps get this many,
    /// chosen at random.
    pub min_shown: usize,
    pub noise_words: usize,
}

impl Default for VideoSpec {
    fn default() -> Self {
        VideoSpec {
            goals: 30,
            videos_per_goal: 40,
            visual_steps: 3,
            borrowed_steps: 8,
            p_title: 0.3,
            p_step: 0.5,
            min_shown: 1,
            noise_words: 12,
        }
    }
}

/// Articles plus caption-only "videos". Captions mix a goal's visual steps,
/// its title (rarely) and noise words; articles also list steps borrowed
/// from other goals, whose words then match the wrong videos. Video ids are
/// shuffled so id tie-breaking carries no goal signal.
pub fn video_corpus(spec: &VideoSpec, seed: u64) -> (Corpus, Vec<VideoDoc>) {
    assert!(spec.goals >= 2 && spec.visual_steps >= 1, "video corpus needs two goals with visual steps");
    let mut words = WordGen::new(seed);
    let verb = words.word();
    let noise: Vec<String> = (0..400).map(|_| words.word()).collect();
    let titles: Vec<String> = (0..spec.goals).map(|_| format!("{verb} {}", words.word())).collect();
    let visual: Vec<Vec<String>> = (0..spec.goals)
        .map(|_| (0..spec.visual_steps).map(|_| words.phrase(3)).collect())
        .collect();

    let mut articles = Vec::with_capacity(spec.goals);
    for g in 0..spec.goals {
        let mut steps = visual[g].clone();
        for _ in 0..spec.borrowed_steps {
            let mut other = words.rng().gen_range(0..spec.goals - 1);
            if other >= g {
                other += 1;
            }
            steps.push(visual[other].choose(words.rng()).expect("non-empty").clone());
        }
        steps.shuffle(words.rng());
        articles.push((
            format!("g{g:02}"),
            titles[g].clone(),
            steps.into_iter().enumerate().map(|(i, t)| (format!("g{g:02}s{i}"), t)).collect(),
        ));
    }

    let total = spec.goals * spec.videos_per_goal;
    let mut ids: Vec<usize> = (0..total).collect();
    ids.shuffle(words.rng());
    let rng = words.rng();
    let mut videos = Vec::with_capacity(total);
    for g in 0..spec.goals {
        for j in 0..spec.videos_per_goal {
            let mut parts: Vec<String> = (0..spec.noise_words)
                .map(|_| noise.choose(rng).expect("non-empty").clone())
                .collect();
            if rng.gen_bool(spec.p_title) {
                parts.push(titles[g].clone());
            }
            let mut shown: Vec<&String> = visual[g].iter().filter(|_| rng.gen_bool(spec.p_step)).collect();
            let floor = spec.min_shown.min(visual[g].len());
            if shown.len() < floor {
                shown = visual[g].choose_multiple(rng, floor).collect();
            }
            parts.extend(shown.into_iter().cloned());
            parts.shuffle(rng);
            videos.push(VideoDoc {
                video_id: format!("v{:05}", ids[g * spec.videos_per_goal + j]),
                goal_id: format!("g{g:02}"),
                caption: parts.join(" "),
            });
        }
    }
    (build(articles), videos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_probes_copy_titles() {
        let (c, gold) = identity_corpus(5, 2, 1);
        assert_eq!(c.num_goals(), 5);
        for g in &gold {
            assert_eq!(c.step(&g.step_id).unwrap().text, c.article(&g.gold_goal_id).unwrap().title);
            assert_ne!(c.step(&g.step_id).unwrap().parent_goal_id, g.gold_goal_id);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(identity_corpus(4, 1, 9).0, identity_corpus(4, 1, 9).0);
        let spec = VideoSpec {
            goals: 3,
            videos_per_goal: 4,
            ..VideoSpec::default()
        };
        assert_eq!(video_corpus(&spec, 2).1, video_corpus(&spec, 2).1);
        assert_eq!(separable_examples(3, 4, 8, 1), separable_examples(3, 4, 8, 1));
    }

    #[test]
    fn separable_has_one_gold() {
        for ex in separable_examples(10, 5, 8, 3) {
            let Label::Goal(i) = ex.label else { panic!() };
            assert_eq!(ex.input.features[i].as_slice()[0], 1.0);
        }
    }
}
