//! Step linking and recursive procedure-tree expansion.
//!
//! A linked step inherits the steps of its linked article as children.
//! Expansion is breadth-first and stops at `max_depth`, at unlinkable steps,
//! and at any link that would revisit a goal already on the root-to-node
//! path.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{BufRead, Write};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::rerank::{score_candidates, FeatureSource, LinkTarget, RerankModel, ScoredEntry, ScoringInput};
use crate::retrieval::GoalIndex;

/// Everything needed to link one step.
#[derive(Clone, Copy)]
pub struct Pipeline<'a> {
    pub corpus: &'a Corpus,
    pub store: &'a EmbeddingStore,
    pub index: &'a GoalIndex,
    pub model: &'a RerankModel,
    pub features: &'a dyn FeatureSource,
    /// Candidates per step. Lowered automatically when fewer goals are
    /// eligible.
    pub k: usize,
    /// Never link a step to its own article.
    pub exclude_parent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDecision {
    pub step_id: String,
    pub outcome: LinkTarget,
    /// Full reranked list; `alternatives[0]` is the outcome.
    pub alternatives: Vec<ScoredEntry>,
    pub config_hash: String,
}

impl LinkDecision {
    pub fn chosen(&self) -> &ScoredEntry {
        &self.alternatives[0]
    }
}

impl<'a> Pipeline<'a> {
    /// Stable fingerprint of the linking configuration.
    pub fn config_hash(&self) -> String {
        let mut buf = Vec::new();
        self.model.write_to(&mut buf).expect("writing to a Vec cannot fail");
        writeln!(buf, "k={}", self.k).unwrap();
        writeln!(buf, "exclude_parent={}", self.exclude_parent).unwrap();
        writeln!(buf, "features={}", self.features.provenance()).unwrap();
        writeln!(buf, "index_rows={}", self.index.len()).unwrap();
        hex::encode(&Sha256::digest(&buf)[..8])
    }

    pub fn link_step(&self, step_id: &str) -> Result<LinkDecision> {
        self.link_step_excluding(step_id, &HashSet::new(), &self.config_hash())
    }

    fn link_step_excluding(&self, step_id: &str, extra: &HashSet<String>, hash: &str) -> Result<LinkDecision> {
        let step = self.corpus.step(step_id)?;
        let mut exclude = extra.clone();
        if self.exclude_parent {
            exclude.insert(step.parent_goal_id.clone());
        }
        let excluded_rows = self.index.ids().iter().filter(|g| exclude.contains(*g)).count();
        let eligible = self.index.len() - excluded_rows;
        if eligible == 0 {
            return Err(Error::NotEnoughCandidates {
                requested: self.k,
                available: 0,
            });
        }
        let vec = self.store.get(step_id)?;
        let list = self.index.topk(step_id, vec, self.k.min(eligible), Some(&exclude))?;
        let input = ScoringInput::from_candidates(&list, self.features)?;
        let scored = score_candidates(self.model, &input)?;
        let outcome = scored.entries[0].target.clone();
        Ok(LinkDecision {
            step_id: step_id.to_string(),
            outcome,
            alternatives: scored.entries,
            config_hash: hash.to_string(),
        })
    }

    pub fn link_all<S: AsRef<str> + Sync>(&self, step_ids: &[S], exec: Execution) -> Result<Vec<LinkDecision>> {
        let hash = self.config_hash();
        let none = HashSet::new();
        exec::try_map(exec, step_ids, |s| self.link_step_excluding(s.as_ref(), &none, &hash))
    }
}

/// Link dump: `step_id \t outcome \t sim1 \t sim2`.
pub fn write_links(decisions: &[LinkDecision], mut out: impl Write) -> std::io::Result<()> {
    for d in decisions {
        let c = d.chosen();
        writeln!(out, "{}\t{}\t{}\t{}", d.step_id, d.outcome, c.sim1, c.sim2)?;
    }
    Ok(())
}

/// Read a link dump into `step_id -> outcome`.
pub fn read_links(reader: impl BufRead) -> Result<HashMap<String, LinkTarget>> {
    let mut links = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 2 {
            return Err(Error::Malformed {
                line: lineno,
                message: "expected `step_id<TAB>outcome[<TAB>sim1<TAB>sim2]`".into(),
            });
        }
        if links.insert(f[0].to_string(), LinkTarget::parse(f[1])).is_some() {
            return Err(Error::Duplicate {
                kind: "step_id",
                id: f[0].to_string(),
            });
        }
    }
    Ok(links)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExpandPolicy {
    /// Remove ancestor goals from retrieval so a step links to the best
    /// non-ancestor goal. When unset, a link to an ancestor is kept but the
    /// step becomes a leaf annotated as a suppressed cycle.
    pub exclude_ancestors: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expansion {
    /// Not linked because the node is at `max_depth`.
    DepthLimit,
    Unlinkable,
    /// Index of the child goal node in [`ProcedureTree::nodes`].
    Expanded(usize),
    /// Linked to a goal already on the path from the root.
    CycleSuppressed(String),
    /// Every goal was excluded from retrieval, so there was nothing to link.
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepNode {
    pub step_id: String,
    pub text: String,
    pub depth: usize,
    pub decision: Option<LinkDecision>,
    pub expansion: Expansion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalNode {
    pub goal_id: String,
    pub title: String,
    pub depth: usize,
    /// `(goal node, step index)` of the step this goal expands.
    pub parent: Option<(usize, usize)>,
    pub steps: Vec<StepNode>,
}

/// Goal/step alternating tree stored as an arena; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureTree {
    pub nodes: Vec<GoalNode>,
    pub max_depth: usize,
}

impl ProcedureTree {
    pub fn root(&self) -> &GoalNode {
        &self.nodes[0]
    }

    /// Goal ids from the root down to (and including) `node`.
    pub fn path_goals(&self, mut node: usize) -> Vec<&str> {
        let mut path = vec![self.nodes[node].goal_id.as_str()];
        while let Some((p, _)) = self.nodes[node].parent {
            path.push(&self.nodes[p].goal_id);
            node = p;
        }
        path.reverse();
        path
    }

    /// Deepest goal node depth.
    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Check acyclicity (no goal repeats on any root-to-leaf path), depth
    /// bounds, and parent/child consistency.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.depth > self.max_depth {
                return Err(format!("node {i} at depth {} > max {}", n.depth, self.max_depth));
            }
            let path = self.path_goals(i);
            let uniq: HashSet<&&str> = path.iter().collect();
            if uniq.len() != path.len() {
                return Err(format!("goal repeats on path {path:?}"));
            }
            for (si, s) in n.steps.iter().enumerate() {
                if let Expansion::Expanded(c) = s.expansion {
                    let child = &self.nodes[c];
                    if child.parent != Some((i, si)) || child.depth != n.depth + 1 {
                        return Err(format!("inconsistent child link {i}.{si} -> {c}"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.json_goal(0)).expect("tree serializes");
        s.push('\n');
        s
    }

    fn json_goal(&self, node: usize) -> JsonGoal<'_> {
        let n = &self.nodes[node];
        JsonGoal {
            goal: &n.title,
            goal_id: &n.goal_id,
            steps: self.json_steps(node),
        }
    }

    fn json_steps(&self, node: usize) -> Vec<JsonStep<'_>> {
        self.nodes[node]
            .steps
            .iter()
            .map(|s| {
                let chosen = s.decision.as_ref().map(LinkDecision::chosen);
                JsonStep {
                    step_id: &s.step_id,
                    text: &s.text,
                    link: s.decision.as_ref().map(|d| d.outcome.to_string()),
                    sim1: chosen.map(|c| c.sim1),
                    sim2: chosen.map(|c| c.sim2),
                    suppressed: match s.expansion {
                        Expansion::CycleSuppressed(_) => Some("cycle"),
                        Expansion::NoCandidates => Some("no_candidates"),
                        _ => None,
                    },
                    children: match s.expansion {
                        Expansion::Expanded(c) => self.json_steps(c),
                        _ => Vec::new(),
                    },
                }
            })
            .collect()
    }
}

#[derive(Serialize)]
struct JsonGoal<'a> {
    goal: &'a str,
    goal_id: &'a str,
    steps: Vec<JsonStep<'a>>,
}

#[derive(Serialize)]
struct JsonStep<'a> {
    step_id: &'a str,
    text: &'a str,
    link: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sim1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sim2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    suppressed: Option<&'static str>,
    children: Vec<JsonStep<'a>>,
}

/// Grow the procedure tree rooted at `root` breadth-first.
pub fn expand(
    pipeline: &Pipeline<'_>,
    root: &str,
    max_depth: usize,
    policy: ExpandPolicy,
    exec: Execution,
) -> Result<ProcedureTree> {
    let corpus = pipeline.corpus;
    let hash = pipeline.config_hash();
    let new_node = |goal_id: &str, depth: usize, parent: Option<(usize, usize)>| -> Result<GoalNode> {
        let a = corpus.article(goal_id)?;
        Ok(GoalNode {
            goal_id: a.goal_id.clone(),
            title: a.title.clone(),
            depth,
            parent,
            steps: a
                .steps
                .iter()
                .map(|s| StepNode {
                    step_id: s.step_id.clone(),
                    text: s.text.clone(),
                    depth,
                    decision: None,
                    expansion: Expansion::DepthLimit,
                })
                .collect(),
        })
    };

    let mut tree = ProcedureTree {
        nodes: vec![new_node(root, 0, None)?],
        max_depth,
    };
    let mut queue = VecDeque::from([0usize]);
    while let Some(ni) = queue.pop_front() {
        let depth = tree.nodes[ni].depth;
        if depth >= max_depth {
            continue;
        }
        let ancestors: HashSet<String> = tree.path_goals(ni).into_iter().map(str::to_string).collect();
        let exclude = if policy.exclude_ancestors {
            ancestors.clone()
        } else {
            HashSet::new()
        };
        let step_ids: Vec<String> = tree.nodes[ni].steps.iter().map(|s| s.step_id.clone()).collect();
        let decisions = exec::try_map(exec, &step_ids, |sid| {
            match pipeline.link_step_excluding(sid, &exclude, &hash) {
                Ok(d) => Ok(Some(d)),
                Err(Error::NotEnoughCandidates { available: 0, .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })?;
        for (si, decision) in decisions.into_iter().enumerate() {
            let Some(decision) = decision else {
                tree.nodes[ni].steps[si].expansion = Expansion::NoCandidates;
                continue;
            };
            let expansion = match &decision.outcome {
                LinkTarget::Unlinkable => Expansion::Unlinkable,
                LinkTarget::Goal(g) if ancestors.contains(g) => Expansion::CycleSuppressed(g.clone()),
                LinkTarget::Goal(g) => {
                    let child = new_node(g, depth + 1, Some((ni, si)))?;
                    tree.nodes.push(child);
                    let ci = tree.nodes.len() - 1;
                    queue.push_back(ci);
                    Expansion::Expanded(ci)
                }
            };
            let step = &mut tree.nodes[ni].steps[si];
            step.decision = Some(decision);
            step.expansion = expansion;
        }
    }
    Ok(tree)
}
