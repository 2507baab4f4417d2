//! Okapi BM25 over an in-memory inverted index.
//!
//! IDF uses the non-negative form `ln(1 + (N - df + 0.5) / (df + 0.5))`.
//! Query scores sum over query tokens, so a repeated query token counts once
//! per occurrence.

use std::collections::{HashMap, HashSet};

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::retrieval::rank_order;
use crate::text::tokenize;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with", "your", "you",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 > 0.0) {
            return Err(Error::invalid(format!("BM25 k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::invalid(format!("BM25 b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Token pipeline applied to both documents and queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analyzer {
    pub remove_stopwords: bool,
    pub stem: bool,
}

impl Analyzer {
    pub fn analyze(&self, text: &str) -> Vec<String> {
        let mut toks = tokenize(text);
        if self.remove_stopwords {
            toks.retain(|t| !STOPWORDS.contains(&t.as_str()));
        }
        if self.stem {
            let stemmer = Stemmer::create(Algorithm::English);
            for t in &mut toks {
                *t = stemmer.stem(t).into_owned();
            }
        }
        toks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone)]
pub struct TextIndex {
    doc_ids: Vec<String>,
    id_pos: HashMap<String, usize>,
    postings: HashMap<String, Vec<Posting>>,
    doc_len: Vec<u32>,
    avgdl: f64,
    params: Bm25Params,
    analyzer: Analyzer,
}

pub fn index_docs<I, T>(docs: &[(I, T)], params: Bm25Params, analyzer: Analyzer) -> Result<TextIndex>
where
    I: AsRef<str>,
    T: AsRef<str>,
{
    params.validate()?;
    let mut doc_ids = Vec::with_capacity(docs.len());
    let mut id_pos = HashMap::with_capacity(docs.len());
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_len = Vec::with_capacity(docs.len());
    for (pos, (id, text)) in docs.iter().enumerate() {
        let id = id.as_ref();
        if id_pos.insert(id.to_string(), pos).is_some() {
            return Err(Error::Duplicate {
                kind: "doc id",
                id: id.to_string(),
            });
        }
        doc_ids.push(id.to_string());
        let toks = analyzer.analyze(text.as_ref());
        doc_len.push(toks.len() as u32);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in toks {
            *tf.entry(t).or_default() += 1;
        }
        for (term, count) in tf {
            // docs are visited in order, so each postings list stays sorted
            postings.entry(term).or_default().push(Posting {
                doc: pos as u32,
                tf: count,
            });
        }
    }
    let avgdl = if doc_len.is_empty() {
        0.0
    } else {
        doc_len.iter().map(|&l| l as f64).sum::<f64>() / doc_len.len() as f64
    };
    Ok(TextIndex {
        doc_ids,
        id_pos,
        postings,
        doc_len,
        avgdl,
        params,
        analyzer,
    })
}

impl TextIndex {
    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn analyzer(&self) -> Analyzer {
        self.analyzer
    }

    pub fn doc_position(&self, doc_id: &str) -> Result<usize> {
        self.id_pos
            .get(doc_id)
            .copied()
            .ok_or_else(|| Error::unknown("doc id", doc_id))
    }

    pub fn doc_len(&self, doc_id: &str) -> Result<usize> {
        Ok(self.doc_len[self.doc_position(doc_id)?] as usize)
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Raw term frequency of an already-analyzed term.
    pub fn term_frequency(&self, term: &str, doc_id: &str) -> Result<u32> {
        let pos = self.doc_position(doc_id)? as u32;
        Ok(self
            .postings
            .get(term)
            .and_then(|p| p.binary_search_by_key(&pos, |x| x.doc).ok().map(|i| p[i].tf))
            .unwrap_or(0))
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_score(&self, idf: f64, tf: u32, dl: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let len_ratio = if self.avgdl > 0.0 { dl as f64 / self.avgdl } else { 0.0 };
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len_ratio))
    }

    pub fn bm25_score(&self, query: &str, doc_id: &str) -> Result<f64> {
        let pos = self.doc_position(doc_id)?;
        let mut score = 0.0;
        for term in self.analyzer.analyze(query) {
            let Some(plist) = self.postings.get(&term) else { continue };
            if let Ok(i) = plist.binary_search_by_key(&(pos as u32), |p| p.doc) {
                score += self.term_score(self.idf(&term), plist[i].tf, self.doc_len[pos]);
            }
        }
        Ok(score)
    }

    /// BM25 of `query` against every document, indexed by doc position.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.num_docs()];
        for term in self.analyzer.analyze(query) {
            let Some(plist) = self.postings.get(&term) else { continue };
            let idf = self.idf(&term);
            for p in plist {
                scores[p.doc as usize] += self.term_score(idf, p.tf, self.doc_len[p.doc as usize]);
            }
        }
        scores
    }

    /// Top-`n` documents by BM25, ties broken by ascending doc id.
    pub fn search(&self, query: &str, n: usize) -> Result<Vec<(String, f64)>> {
        if n == 0 {
            return Err(Error::invalid("search requires n >= 1"));
        }
        let scores = self.score_all(query);
        let mut order: Vec<usize> = (0..self.num_docs()).collect();
        order.sort_unstable_by(|&a, &b| rank_order(scores[a], &self.doc_ids[a], scores[b], &self.doc_ids[b]));
        order.truncate(n);
        Ok(order
            .into_iter()
            .map(|i| (self.doc_ids[i].clone(), scores[i]))
            .collect())
    }

    pub fn vocabulary(&self) -> HashSet<&str> {
        self.postings.keys().map(String::as_str).collect()
    }
}

/// How corpus articles are turned into BM25 documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArticleField {
    /// Goal title only.
    Goal,
    /// Title followed by every step.
    Article,
}

pub fn corpus_docs(corpus: &Corpus, field: ArticleField) -> Vec<(String, String)> {
    corpus
        .articles()
        .iter()
        .map(|a| {
            let text = match field {
                ArticleField::Goal => a.title.clone(),
                ArticleField::Article => std::iter::once(a.title.as_str())
                    .chain(a.steps.iter().map(|s| s.text.as_str()))
                    .collect::<Vec<_>>()
                    .join(" "),
            };
            (a.goal_id.clone(), text)
        })
        .collect()
}
