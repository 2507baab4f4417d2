//! Procedure corpus: articles (goals) with ordered step lists.
//!
//! The on-disk format is JSONL, one article per line:
//!
//! ```text
//! {"id": "g1", "title": "Choose a Camera", "steps": [{"id": "s1", "text": "Set a budget"}]}
//! ```
//!
//! Goal ids and step ids are the only keys; titles may repeat.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{normalize, NormalizeOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub step_id: String,
    pub text: String,
    pub parent_goal_id: String,
    /// 0-based index within the parent article.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub goal_id: String,
    pub title: String,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawStep {
    id: String,
    text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawArticle {
    id: String,
    title: String,
    steps: Vec<RawStep>,
}

/// Immutable collection of articles with goal and step lookup tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    articles: Vec<Article>,
    goal_index: HashMap<String, usize>,
    step_index: HashMap<String, (usize, usize)>,
}

/// Context attached to a step when rendering or featurizing a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    #[default]
    None,
    Goal,
    Surround,
    Both,
}

impl ContextMode {
    pub fn includes_goal(self) -> bool {
        matches!(self, ContextMode::Goal | ContextMode::Both)
    }

    pub fn includes_surround(self) -> bool {
        matches!(self, ContextMode::Surround | ContextMode::Both)
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextMode::None => "none",
            ContextMode::Goal => "goal",
            ContextMode::Surround => "surround",
            ContextMode::Both => "both",
        })
    }
}

impl std::str::FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ContextMode::None),
            "goal" => Ok(ContextMode::Goal),
            "surround" => Ok(ContextMode::Surround),
            "both" => Ok(ContextMode::Both),
            other => Err(Error::invalid(format!("unknown context mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StepContext {
    pub mode: ContextMode,
    pub goal_text: Option<String>,
    pub prev_steps: Vec<String>,
    pub next_steps: Vec<String>,
}

impl StepContext {
    pub fn is_empty(&self) -> bool {
        self.goal_text.is_none() && self.prev_steps.is_empty() && self.next_steps.is_empty()
    }

    /// Context texts in fixed order: goal, previous steps, next steps.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.goal_text
            .iter()
            .map(String::as_str)
            .chain(self.prev_steps.iter().map(String::as_str))
            .chain(self.next_steps.iter().map(String::as_str))
    }
}

/// One problem found while validating a corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub articles: usize,
    pub steps: usize,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "line {}\terror\t{}", issue.line, issue.message)?;
        }
        writeln!(
            f,
            "summary\tarticles={}\tsteps={}\tissues={}",
            self.articles,
            self.steps,
            self.issues.len()
        )
    }
}

impl Corpus {
    /// Build a corpus from `(goal_id, title, [(step_id, text)])` tuples.
    pub fn from_articles<I, S>(articles: I, opts: NormalizeOptions) -> Result<Corpus>
    where
        I: IntoIterator<Item = (String, String, S)>,
        S: IntoIterator<Item = (String, String)>,
    {
        let mut builder = Builder::new(opts);
        for (id, title, steps) in articles {
            let raw = RawArticle {
                id,
                title,
                steps: steps
                    .into_iter()
                    .map(|(id, text)| RawStep { id, text })
                    .collect(),
            };
            builder.push(raw)?;
        }
        Ok(builder.finish())
    }

    pub fn from_reader(reader: impl BufRead, opts: NormalizeOptions) -> Result<Corpus> {
        let mut builder = Builder::new(opts);
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawArticle = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
            builder.push(raw)?;
        }
        Ok(builder.finish())
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn num_goals(&self) -> usize {
        self.articles.len()
    }

    pub fn num_steps(&self) -> usize {
        self.step_index.len()
    }

    pub fn article(&self, goal_id: &str) -> Result<&Article> {
        self.goal_index
            .get(goal_id)
            .map(|&i| &self.articles[i])
            .ok_or_else(|| Error::unknown("goal_id", goal_id))
    }

    pub fn step(&self, step_id: &str) -> Result<&Step> {
        self.step_index
            .get(step_id)
            .map(|&(a, s)| &self.articles[a].steps[s])
            .ok_or_else(|| Error::unknown("step_id", step_id))
    }

    pub fn contains_goal(&self, goal_id: &str) -> bool {
        self.goal_index.contains_key(goal_id)
    }

    pub fn contains_step(&self, step_id: &str) -> bool {
        self.step_index.contains_key(step_id)
    }

    pub fn goal_ids(&self) -> impl Iterator<Item = &str> {
        self.articles.iter().map(|a| a.goal_id.as_str())
    }

    /// All steps in article order, then step order.
    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        self.articles.iter().flat_map(|a| a.steps.iter())
    }

    /// Serialize to the JSONL input format.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for a in &self.articles {
            let raw = RawArticle {
                id: a.goal_id.clone(),
                title: a.title.clone(),
                steps: a
                    .steps
                    .iter()
                    .map(|s| RawStep {
                        id: s.step_id.clone(),
                        text: s.text.clone(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut out, &raw)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

pub fn load_corpus(path: impl AsRef<Path>, opts: NormalizeOptions) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Corpus::from_reader(BufReader::new(file), opts)
}

/// Check a JSONL corpus and collect every problem instead of stopping at the
/// first one.
pub fn validate(reader: impl BufRead, opts: NormalizeOptions) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut builder = Builder::new(opts);
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                report.issues.push(Issue {
                    line: lineno,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawArticle>(&line)
            .map_err(|e| e.to_string())
            .and_then(|raw| {
                let n = raw.steps.len();
                builder.push(raw).map(|_| n).map_err(|e| e.to_string())
            });
        match parsed {
            Ok(n) => {
                report.articles += 1;
                report.steps += n;
            }
            Err(message) => report.issues.push(Issue {
                line: lineno,
                message,
            }),
        }
    }
    report
}

/// Context for a step: its goal title and/or up to `window` neighbors on each
/// side. Missing neighbors at article boundaries are dropped.
pub fn context_of(
    corpus: &Corpus,
    step_id: &str,
    mode: ContextMode,
    window: usize,
) -> Result<StepContext> {
    if window == 0 {
        return Err(Error::invalid("context window must be >= 1"));
    }
    let step = corpus.step(step_id)?;
    let mut ctx = StepContext {
        mode,
        ..StepContext::default()
    };
    if mode == ContextMode::None {
        return Ok(ctx);
    }
    let article = corpus.article(&step.parent_goal_id)?;
    if mode.includes_goal() {
        ctx.goal_text = Some(article.title.clone());
    }
    if mode.includes_surround() {
        let lo = step.position.saturating_sub(window);
        let hi = (step.position + 1 + window).min(article.steps.len());
        ctx.prev_steps = article.steps[lo..step.position]
            .iter()
            .map(|s| s.text.clone())
            .collect();
        ctx.next_steps = article.steps[step.position + 1..hi]
            .iter()
            .map(|s| s.text.clone())
            .collect();
    }
    Ok(ctx)
}

struct Builder {
    opts: NormalizeOptions,
    articles: Vec<Article>,
    goal_index: HashMap<String, usize>,
    step_index: HashMap<String, (usize, usize)>,
    goal_ids: HashSet<String>,
}

impl Builder {
    fn new(opts: NormalizeOptions) -> Self {
        Builder {
            opts,
            articles: Vec::new(),
            goal_index: HashMap::new(),
            step_index: HashMap::new(),
            goal_ids: HashSet::new(),
        }
    }

    fn push(&mut self, raw: RawArticle) -> Result<()> {
        if raw.id.is_empty() {
            return Err(Error::invalid("article with empty id"));
        }
        if self.goal_index.contains_key(&raw.id) {
            return Err(Error::Duplicate {
                kind: "goal_id",
                id: raw.id,
            });
        }
        if self.step_index.contains_key(&raw.id) {
            return Err(Error::IdCollision(raw.id));
        }
        if raw.steps.is_empty() {
            return Err(Error::EmptySteps(raw.id));
        }
        let article_idx = self.articles.len();
        let mut steps = Vec::with_capacity(raw.steps.len());
        let mut local = HashSet::new();
        for (position, s) in raw.steps.into_iter().enumerate() {
            if self.step_index.contains_key(&s.id) || !local.insert(s.id.clone()) {
                return Err(Error::Duplicate {
                    kind: "step_id",
                    id: s.id,
                });
            }
            if self.goal_ids.contains(&s.id) || s.id == raw.id {
                return Err(Error::IdCollision(s.id));
            }
            let text = normalize(&s.text, self.opts);
            if text.trim().is_empty() {
                return Err(Error::EmptyStepText(s.id));
            }
            steps.push(Step {
                step_id: s.id,
                text,
                parent_goal_id: raw.id.clone(),
                position,
            });
        }
        for s in &steps {
            self.step_index
                .insert(s.step_id.clone(), (article_idx, s.position));
        }
        self.goal_index.insert(raw.id.clone(), article_idx);
        self.goal_ids.insert(raw.id.clone());
        self.articles.push(Article {
            goal_id: raw.id,
            title: normalize(&raw.title, self.opts),
            steps,
        });
        Ok(())
    }

    fn finish(self) -> Corpus {
        Corpus {
            articles: self.articles,
            goal_index: self.goal_index,
            step_index: self.step_index,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{"id":"g1","title":"Choose a  Camera","steps":[{"id":"s1","text":"Set a budget"},{"id":"s2","text":"Read reviews"},{"id":"s3","text":"Buy it"}]}
{"id":"g2","title":"Make Fries","steps":[{"id":"s4","text":"Cut potatoes"},{"id":"s5","text":"Fry them"}]}
"#;

    fn two() -> Corpus {
        Corpus::from_reader(TWO.as_bytes(), NormalizeOptions::default()).unwrap()
    }

    #[test]
    fn loads_sizes() {
        let c = two();
        assert_eq!(c.num_goals(), 2);
        assert_eq!(c.num_steps(), 5);
        assert_eq!(c.article("g1").unwrap().title, "Choose a Camera");
        let s = c.step("s5").unwrap();
        assert_eq!((s.parent_goal_id.as_str(), s.position), ("g2", 1));
    }

    #[test]
    fn duplicate_goal_id_is_rejected() {
        let text = format!("{TWO}{}\n", r#"{"id":"g1","title":"x","steps":[{"id":"s9","text":"y"}]}"#);
        let err = Corpus::from_reader(text.as_bytes(), NormalizeOptions::default()).unwrap_err();
        assert!(err.to_string().contains("duplicate goal_id"), "{err}");
    }

    #[test]
    fn duplicate_step_id_is_rejected() {
        let text = r#"{"id":"g1","title":"x","steps":[{"id":"s1","text":"a"},{"id":"s1","text":"b"}]}"#;
        let err = Corpus::from_reader(text.as_bytes(), NormalizeOptions::default()).unwrap_err();
        assert!(err.to_string().contains("duplicate step_id `s1`"), "{err}");
    }

    #[test]
    fn empty_steps_rejected() {
        let text = r#"{"id":"g1","title":"x","steps":[]}"#;
        let err = Corpus::from_reader(text.as_bytes(), NormalizeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptySteps(ref id) if id == "g1"));
    }

    #[test]
    fn blank_step_text_rejected() {
        let text = r#"{"id":"g1","title":"x","steps":[{"id":"s1","text":"  \t "}]}"#;
        let err = Corpus::from_reader(text.as_bytes(), NormalizeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyStepText(ref id) if id == "s1"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{TWO}{{\"id\": \"g3\", \"title\": 5}}\n");
        let err = Corpus::from_reader(text.as_bytes(), NormalizeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err}");
    }

    #[test]
    fn goal_step_id_collision_rejected() {
        let text = r#"{"id":"g1","title":"x","steps":[{"id":"g1","text":"a"}]}"#;
        let err = Corpus::from_reader(text.as_bytes(), NormalizeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::IdCollision(_)));
    }

    #[test]
    fn round_trip() {
        let c = two();
        let again = Corpus::from_reader(c.to_jsonl().as_bytes(), NormalizeOptions::default()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn lowercase_option() {
        let opts = NormalizeOptions {
            lowercase: true,
            ..NormalizeOptions::default()
        };
        let c = Corpus::from_reader(TWO.as_bytes(), opts).unwrap();
        assert_eq!(c.article("g2").unwrap().title, "make fries");
    }

    #[test]
    fn context_none_is_empty() {
        let ctx = context_of(&two(), "s2", ContextMode::None, 1).unwrap();
        assert!(ctx.is_empty());
        assert_eq!(ctx.texts().count(), 0);
    }

    #[test]
    fn context_both_middle_step() {
        let ctx = context_of(&two(), "s2", ContextMode::Both, 1).unwrap();
        assert_eq!(ctx.goal_text.as_deref(), Some("Choose a Camera"));
        assert_eq!(ctx.prev_steps, ["Set a budget"]);
        assert_eq!(ctx.next_steps, ["Buy it"]);
    }

    #[test]
    fn context_truncates_at_boundaries() {
        let c = two();
        let first = context_of(&c, "s1", ContextMode::Surround, 1).unwrap();
        assert!(first.prev_steps.is_empty());
        assert_eq!(first.next_steps, ["Read reviews"]);
        assert!(first.goal_text.is_none());
        let wide = context_of(&c, "s3", ContextMode::Surround, 5).unwrap();
        assert_eq!(wide.prev_steps, ["Set a budget", "Read reviews"]);
        assert!(wide.next_steps.is_empty());
    }

    #[test]
    fn context_goal_only() {
        let ctx = context_of(&two(), "s4", ContextMode::Goal, 1).unwrap();
        assert_eq!(ctx.goal_text.as_deref(), Some("Make Fries"));
        assert!(ctx.prev_steps.is_empty() && ctx.next_steps.is_empty());
    }

    #[test]
    fn context_errors() {
        let c = two();
        assert!(matches!(
            context_of(&c, "nope", ContextMode::Both, 1),
            Err(Error::Unknown { .. })
        ));
        assert!(context_of(&c, "s1", ContextMode::Both, 0).is_err());
    }

    #[test]
    fn validation_collects_all_issues() {
        let text = format!(
            "{TWO}not json\n{}\n{}\n",
            r#"{"id":"g1","title":"dup","steps":[{"id":"s8","text":"a"}]}"#,
            r#"{"id":"g4","title":"ok","steps":[{"id":"s9","text":"a"}]}"#
        );
        let report = validate(text.as_bytes(), NormalizeOptions::default());
        assert_eq!(report.articles, 3);
        assert_eq!(report.issues.len(), 2);
        assert_eq!(report.issues[0].line, 3);
        assert_eq!(report.issues[1].line, 4);
        let rendered = report.to_string();
        assert!(rendered.lines().last().unwrap().starts_with("summary\tarticles=3"));
    }
}
