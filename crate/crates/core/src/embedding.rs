//! Dense text embeddings and cosine similarity.
//!
//! Vectors come either from an external encoder (loaded through
//! [`load_embeddings`]) or from the built-in [`HashEmbedder`], a signed
//! feature-hashing embedder over character 3/4/5-grams.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

const NGRAM_SIZES: [usize; 3] = [3, 4, 5];
pub const MIN_HASH_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Vector> {
        if values.is_empty() {
            return Err(Error::invalid("vector dimension must be > 0"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector".into()));
        }
        Ok(Vector(values))
    }

    pub fn zeros(dim: usize) -> Vector {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity. Returns 0 when either vector has zero norm.
pub fn cosine(u: &Vector, v: &Vector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch {
            context: "cosine".into(),
            expected: u.dim(),
            found: v.dim(),
        });
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let c = dot(u.as_slice(), v.as_slice()) / (nu * nv);
    Ok(c.clamp(-1.0, 1.0))
}

/// Output of the hashing embedder.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    pub vector: Vector,
    /// Set when the input carried no characters to hash; the vector is zero.
    pub empty_input: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
    pub lowercase: bool,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<HashEmbedder> {
        if dim < MIN_HASH_DIM {
            return Err(Error::invalid(format!(
                "hash embedding dim must be >= {MIN_HASH_DIM}, got {dim}"
            )));
        }
        Ok(HashEmbedder {
            dim,
            seed,
            lowercase: false,
        })
    }

    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    pub fn embed(&self, text: &str) -> Embedded {
        let cased;
        let text = if self.lowercase {
            cased = text.to_lowercase();
            cased.as_str()
        } else {
            text
        };
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.is_empty() {
            return Embedded {
                vector: Vector::zeros(self.dim),
                empty_input: true,
            };
        }
        let padded: Vec<char> = std::iter::once('<')
            .chain(words.join(" ").chars())
            .chain(std::iter::once('>'))
            .collect();

        let mut acc = vec![0.0f64; self.dim];
        let mut count = 0usize;
        let mut buf = String::new();
        for n in NGRAM_SIZES {
            for gram in padded.windows(n) {
                buf.clear();
                buf.extend(gram);
                let h = hash_str(&buf, self.seed);
                let bucket = (h % self.dim as u64) as usize;
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                acc[bucket] += sign;
                count += 1;
            }
        }
        // padded has at least 3 chars, so count >= 1
        for v in &mut acc {
            *v /= count as f64;
        }
        let norm = dot(&acc, &acc).sqrt();
        if norm > 0.0 {
            for v in &mut acc {
                *v /= norm;
            }
        }
        Embedded {
            vector: Vector(acc),
            empty_input: false,
        }
    }
}

/// Convenience wrapper over [`HashEmbedder`].
pub fn embed_text(text: &str, dim: usize, seed: u64) -> Result<Embedded> {
    Ok(HashEmbedder::new(dim, seed)?.embed(text))
}

// FNV-1a folded with the seed, then a splitmix64 finalizer so the high bit
// (used as the sign) is well mixed.
fn hash_str(s: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ splitmix64(seed);
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Id-keyed vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<String, Vector>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<EmbeddingStore> {
        if dim == 0 {
            return Err(Error::invalid("embedding dim must be > 0"));
        }
        Ok(EmbeddingStore {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    /// Embed every goal title and step text of `corpus`.
    pub fn from_corpus(corpus: &Corpus, embedder: &HashEmbedder, exec: Execution) -> EmbeddingStore {
        let mut items: Vec<(&str, &str)> = Vec::with_capacity(corpus.num_goals() + corpus.num_steps());
        for a in corpus.articles() {
            items.push((&a.goal_id, &a.title));
            for s in &a.steps {
                items.push((&s.step_id, &s.text));
            }
        }
        let vecs = exec::map(exec, &items, |(_, text)| embedder.embed(text).vector);
        let vectors = items
            .iter()
            .zip(vecs)
            .map(|((id, _), v)| (id.to_string(), v))
            .collect();
        EmbeddingStore {
            dim: embedder.dim,
            vectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, v: Vector) -> Result<()> {
        let id = id.into();
        if v.dim() != self.dim {
            return Err(Error::DimMismatch {
                context: id,
                expected: self.dim,
                found: v.dim(),
            });
        }
        self.vectors.insert(id, v);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&Vector> {
        self.vectors
            .get(id)
            .ok_or_else(|| Error::unknown("embedding id", id))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<EmbeddingStore> {
        let mut lines = reader.lines().enumerate();
        let mut store = loop {
            let Some((i, line)) = lines.next() else {
                return Err(Error::Empty("embedding file has no `dim=` header".into()));
            };
            let line = line.map_err(|e| Error::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let dim = parse_dim_header(line).ok_or_else(|| Error::Malformed {
                line: i + 1,
                message: format!("expected `dim=<d>` header, found `{line}`"),
            })?;
            break EmbeddingStore::new(dim)?;
        };
        for (i, line) in lines {
            let line = line.map_err(|e| Error::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            let mut fields = line.split_whitespace();
            let Some(id) = fields.next() else { continue };
            let mut values = Vec::with_capacity(store.dim);
            for f in fields {
                let v: f64 = f.parse().map_err(|_| Error::Malformed {
                    line: i + 1,
                    message: format!("row `{id}`: cannot parse `{f}` as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(id.to_string()));
                }
                values.push(v);
            }
            if values.len() != store.dim {
                return Err(Error::DimMismatch {
                    context: id.to_string(),
                    expected: store.dim,
                    found: values.len(),
                });
            }
            if store.vectors.contains_key(id) {
                return Err(Error::Duplicate {
                    kind: "embedding id",
                    id: id.to_string(),
                });
            }
            store.vectors.insert(id.to_string(), Vector(values));
        }
        Ok(store)
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "dim={}", self.dim)?;
        for (id, v) in &self.vectors {
            write!(out, "{id}")?;
            for x in v.as_slice() {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub(crate) fn parse_dim_header(line: &str) -> Option<usize> {
    line.strip_prefix("dim=")?.trim().parse().ok().filter(|&d| d > 0)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_reader(BufReader::new(file))
}
