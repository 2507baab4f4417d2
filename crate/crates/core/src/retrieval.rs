//! First-stage candidate retrieval: exact cosine top-k over goal vectors.
//!
//! Goal rows are L2-normalized once at build time so a query reduces to an
//! inner-product scan followed by partial selection. Ties are broken by
//! ascending goal id.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::{BufRead, Write};

use crate::corpus::Corpus;
use crate::embedding::{dot, EmbeddingStore, Vector};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

pub const DEFAULT_K: usize = 30;

#[derive(Debug, Clone)]
pub struct GoalIndex {
    ids: Vec<String>,
    rows: Vec<f64>,
    zero_rows: Vec<bool>,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub goal_id: String,
    pub sim1: f64,
}

/// Top-k goals for one step, descending by `sim1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList {
    pub step_id: String,
    pub k: usize,
    pub entries: Vec<Candidate>,
}

impl CandidateList {
    pub fn position(&self, goal_id: &str) -> Option<usize> {
        self.entries.iter().position(|c| c.goal_id == goal_id)
    }

    pub fn min_sim1(&self) -> Option<f64> {
        self.entries.iter().map(|c| c.sim1).reduce(f64::min)
    }
}

/// Descending score, then ascending id.
pub(crate) fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

pub fn build_index<S: AsRef<str>>(store: &EmbeddingStore, goals: &[S]) -> Result<GoalIndex> {
    let dim = store.dim();
    let mut ids = Vec::with_capacity(goals.len());
    let mut rows = Vec::with_capacity(goals.len() * dim);
    let mut zero_rows = Vec::with_capacity(goals.len());
    let mut seen = HashSet::with_capacity(goals.len());
    for g in goals {
        let g = g.as_ref();
        if !seen.insert(g) {
            return Err(Error::Duplicate {
                kind: "goal_id",
                id: g.to_string(),
            });
        }
        let v = store.get(g).map_err(|_| Error::unknown("goal embedding", g))?;
        let norm = v.norm();
        if norm == 0.0 {
            rows.extend(std::iter::repeat_n(0.0, dim));
            zero_rows.push(true);
        } else {
            rows.extend(v.as_slice().iter().map(|x| x / norm));
            zero_rows.push(false);
        }
        ids.push(g.to_string());
    }
    Ok(GoalIndex {
        ids,
        rows,
        zero_rows,
        dim,
    })
}

impl GoalIndex {
    /// Index every goal of `corpus`, in corpus order.
    pub fn for_corpus(store: &EmbeddingStore, corpus: &Corpus) -> Result<GoalIndex> {
        let goals: Vec<&str> = corpus.goal_ids().collect();
        build_index(store, &goals)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.zero_rows[i]
    }

    /// Exact top-`k` goals by cosine, skipping any id in `exclude`.
    pub fn topk(
        &self,
        step_id: &str,
        step_vec: &Vector,
        k: usize,
        exclude: Option<&HashSet<String>>,
    ) -> Result<CandidateList> {
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if step_vec.dim() != self.dim {
            return Err(Error::DimMismatch {
                context: step_id.to_string(),
                expected: self.dim,
                found: step_vec.dim(),
            });
        }
        let qnorm = step_vec.norm();
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            if exclude.is_some_and(|ex| ex.contains(&self.ids[i])) {
                continue;
            }
            let s = if qnorm == 0.0 || self.zero_rows[i] {
                0.0
            } else {
                (dot(self.row(i), step_vec.as_slice()) / qnorm).clamp(-1.0, 1.0)
            };
            scored.push((s, i));
        }
        if k > scored.len() {
            return Err(Error::NotEnoughCandidates {
                requested: k,
                available: scored.len(),
            });
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| rank_order(a.0, &self.ids[a.1], b.0, &self.ids[b.1]);
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        Ok(CandidateList {
            step_id: step_id.to_string(),
            k,
            entries: scored
                .into_iter()
                .map(|(sim1, i)| Candidate {
                    goal_id: self.ids[i].clone(),
                    sim1,
                })
                .collect(),
        })
    }
}

/// Batch retrieval for corpus steps. When `exclude_parent` is set, a step's
/// own article is never a candidate.
pub fn retrieve_steps<S: AsRef<str> + Sync>(
    corpus: &Corpus,
    store: &EmbeddingStore,
    index: &GoalIndex,
    step_ids: &[S],
    k: usize,
    exclude_parent: bool,
    exec: Execution,
) -> Result<Vec<CandidateList>> {
    exec::try_map(exec, step_ids, |sid| {
        let sid = sid.as_ref();
        let step = corpus.step(sid)?;
        let v = store.get(sid)?;
        let exclude = exclude_parent.then(|| HashSet::from([step.parent_goal_id.clone()]));
        index.topk(sid, v, k, exclude.as_ref())
    })
}

/// Candidate dump: `step_id \t rank \t goal_id \t sim1`, rank 1-based.
pub fn write_candidates(lists: &[CandidateList], mut out: impl Write) -> std::io::Result<()> {
    for list in lists {
        for (r, c) in list.entries.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", list.step_id, r + 1, c.goal_id, c.sim1)?;
        }
    }
    Ok(())
}

pub fn read_candidates(reader: impl BufRead) -> Result<Vec<CandidateList>> {
    let mut lists: Vec<CandidateList> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let malformed = |message: String| Error::Malformed {
            line: lineno,
            message,
        };
        let line = line.map_err(|e| malformed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(malformed(format!("expected 4 tab-separated fields, found {}", f.len())));
        }
        let rank: usize = f[1].parse().map_err(|_| malformed(format!("bad rank `{}`", f[1])))?;
        let sim1: f64 = f[3].parse().map_err(|_| malformed(format!("bad sim1 `{}`", f[3])))?;
        let starts_new = lists.last().is_none_or(|l| l.step_id != f[0]);
        if starts_new {
            if rank != 1 {
                return Err(malformed(format!("step `{}` does not start at rank 1", f[0])));
            }
            lists.push(CandidateList {
                step_id: f[0].to_string(),
                k: 0,
                entries: Vec::new(),
            });
        }
        let list = lists.last_mut().expect("pushed above");
        if rank != list.entries.len() + 1 {
            return Err(malformed(format!("rank {rank} out of sequence for step `{}`", f[0])));
        }
        list.entries.push(Candidate {
            goal_id: f[2].to_string(),
            sim1,
        });
        list.k = list.entries.len();
    }
    Ok(lists)
}
