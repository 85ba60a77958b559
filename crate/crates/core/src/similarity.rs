//! Embedding backends and cosine ranking.
//!
//! Two deterministic backends are built in (TF-IDF over SBT tokens and a bag
//! of hashed depth-bounded subtrees). Any other encoder can be plugged in as
//! an external process speaking JSON lines.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{AstNode, CompilationUnit};
use crate::sbt::{linearize_node, render_tokens, SbtSequence, SbtToken};

/// Sparse vector: `(dimension, weight)` pairs sorted by dimension, no
/// duplicate dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub id: String,
    pub values: Vec<(u64, f64)>,
}

impl EmbeddingVector {
    /// Builds a vector from unsorted pairs, summing repeated dimensions.
    pub fn from_pairs(id: impl Into<String>, pairs: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for (d, w) in pairs {
            *acc.entry(d).or_insert(0.0) += w;
        }
        EmbeddingVector { id: id.into(), values: acc.into_iter().collect() }
    }

    pub fn from_dense(id: impl Into<String>, dense: &[f64]) -> Self {
        let values = dense
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i as u64, *w))
            .collect();
        EmbeddingVector { id: id.into(), values }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    /// Scales to unit length; zero vectors are left as they are.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for (_, w) in &mut self.values {
                *w /= n;
            }
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|(_, w)| w.is_finite())
    }
}

/// Cosine similarity in double precision; 0 when either vector is zero.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.values.len() && j < b.values.len() {
        let (da, wa) = a.values[i];
        let (db, wb) = b.values[j];
        match da.cmp(&db) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += wa * wb;
                i += 1;
                j += 1;
            }
        }
    }
    dot / (na * nb)
}

// ---------------------------------------------------------------------------
// TF-IDF
// ---------------------------------------------------------------------------

/// TF-IDF over token terms. Dimensions index the sorted corpus vocabulary;
/// `idf = ln((N + 1) / (df + 1)) + 1`; vectors are L2-normalised.
pub fn embed_tfidf(corpus: &[SbtSequence]) -> Vec<EmbeddingVector> {
    let counts: Vec<BTreeMap<String, usize>> = corpus
        .par_iter()
        .map(|seq| {
            let mut tf = BTreeMap::new();
            for t in &seq.tokens {
                *tf.entry(t.term()).or_insert(0) += 1;
            }
            tf
        })
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tf in &counts {
        for term in tf.keys() {
            *df.entry(term.as_str()).or_insert(0) += 1;
        }
    }
    let n = corpus.len() as f64;
    let vocab: BTreeMap<&str, (u64, f64)> = df
        .iter()
        .enumerate()
        .map(|(i, (term, df))| (*term, (i as u64, ((n + 1.0) / (*df as f64 + 1.0)).ln() + 1.0)))
        .collect();
    corpus
        .par_iter()
        .zip(counts.par_iter())
        .map(|(seq, tf)| {
            let pairs = tf.iter().map(|(term, c)| {
                let (dim, idf) = vocab[term.as_str()];
                (dim, *c as f64 * idf)
            });
            EmbeddingVector::from_pairs(seq.source_id.clone(), pairs).normalized()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Subtree hashing
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Copy of `node` keeping `depth` levels (1 = the node alone).
pub fn truncate_depth(node: &AstNode, depth: usize) -> AstNode {
    let mut out = AstNode { kind: node.kind, value: node.value.clone(), children: Vec::new() };
    if depth > 1 {
        out.children = node
            .children
            .iter()
            .map(|e| crate::ir::Edge { role: e.role, node: truncate_depth(&e.node, depth - 1) })
            .collect();
    }
    out
}

/// Bag of hashed subtrees. Every node contributes its truncations to depths
/// `1..=min(d, height)`, rendered in SBT form and hashed with FNV-1a.
/// Counts are L2-normalised.
pub fn embed_subtree_hash(cu: &CompilationUnit, d: usize) -> EmbeddingVector {
    embed_tree_hash(&cu.source_id, &cu.root, d)
}

pub fn embed_tree_hash(id: &str, root: &AstNode, d: usize) -> EmbeddingVector {
    let d = d.max(1);
    let mut pairs = Vec::new();
    root.walk(&mut |_, n| {
        for k in 1..=d.min(n.depth()) {
            let text = render_tokens(&linearize_node(&truncate_depth(n, k)));
            pairs.push((fnv1a64(text.as_bytes()), 1.0));
        }
    });
    EmbeddingVector::from_pairs(id, pairs).normalized()
}

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub items: Vec<(String, f64)>,
    /// The gallery held fewer than `R` candidates; `items` is the full ordering.
    pub short: bool,
}

/// Top `r` gallery items by cosine to `query`, ties by ascending id. The
/// query's own id is excluded.
pub fn rank(query: &EmbeddingVector, gallery: &[EmbeddingVector], r: usize) -> Ranking {
    let mut scored: Vec<(String, f64)> = gallery
        .iter()
        .filter(|g| g.id != query.id)
        .map(|g| (g.id.clone(), cosine(query, g)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let short = scored.len() < r;
    scored.truncate(r);
    Ranking { items: scored, short }
}

// ---------------------------------------------------------------------------
// Files and the external backend
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("embeddings missing for ids: {}", .0.join(", "))]
    MissingIds(Vec<String>),
    #[error("backend failed ({status}): {stderr}")]
    Backend { status: String, stderr: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct EmbeddingLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sparse: Option<Vec<(u64, f64)>>,
}

/// One JSONL line per vector, in the sparse form.
pub fn write_embeddings(vectors: &[EmbeddingVector]) -> String {
    let mut out = String::new();
    for v in vectors {
        let line = EmbeddingLine { id: v.id.clone(), vector: None, sparse: Some(v.values.clone()) };
        out.push_str(&serde_json::to_string(&line).expect("embedding serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Reads dense or sparse embedding lines. Dense files must have a uniform
/// dimension.
pub fn read_embeddings(text: &str) -> Result<Vec<EmbeddingVector>, ProtocolError> {
    parse_embeddings(text, false)
}

fn parse_embeddings(text: &str, dense_only: bool) -> Result<Vec<EmbeddingVector>, ProtocolError> {
    let mut out = Vec::new();
    let mut dense_dim: Option<usize> = None;
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let err = |reason: String| ProtocolError::Line { line, reason };
        let parsed: EmbeddingLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let v = match (parsed.vector, parsed.sparse) {
            (Some(dense), None) => {
                match dense_dim {
                    Some(d) if d != dense.len() => {
                        return Err(err(format!("vector has dimension {}, expected {d}", dense.len())));
                    }
                    _ => dense_dim = Some(dense.len()),
                }
                EmbeddingVector::from_dense(parsed.id, &dense)
            }
            (None, Some(sparse)) if !dense_only => {
                let mut dims = HashSet::new();
                if !sparse.iter().all(|(d, _)| dims.insert(*d)) {
                    return Err(err("repeated sparse dimension".into()));
                }
                EmbeddingVector::from_pairs(parsed.id, sparse)
            }
            _ if dense_only => return Err(err("expected a dense `vector`".into())),
            _ => return Err(err("expected exactly one of `vector` or `sparse`".into())),
        };
        if !v.is_finite() {
            return Err(err("non-finite weight".into()));
        }
        if !ids.insert(v.id.clone()) {
            return Err(err(format!("duplicate id `{}`", v.id)));
        }
        out.push(v);
    }
    Ok(out)
}

/// Runs `command` through the shell: request JSONL (SBT token form) on its
/// standard input, response JSONL `{"id", "vector"}` on its standard output.
pub fn external_embed(command: &str, sequences: &[SbtSequence]) -> Result<Vec<EmbeddingVector>, ProtocolError> {
    let mut request = String::new();
    for s in sequences {
        request.push_str(&s.to_json());
        request.push('\n');
    }
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let writer = std::thread::spawn(move || {
        // a backend may exit without reading everything
        let _ = stdin.write_all(request.as_bytes());
    });
    let output = child.wait_with_output()?;
    let _ = writer.join();
    if !output.status.success() {
        return Err(ProtocolError::Backend {
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    let mut text = String::new();
    for (i, l) in BufRead::lines(&output.stdout[..]).enumerate() {
        let l = l.map_err(|e| ProtocolError::Line { line: i + 1, reason: e.to_string() })?;
        text.push_str(&l);
        text.push('\n');
    }
    let vectors = parse_embeddings(&text, true)?;
    let got: HashSet<&str> = vectors.iter().map(|v| v.id.as_str()).collect();
    let missing: Vec<String> =
        sequences.iter().filter(|s| !got.contains(s.source_id.as_str())).map(|s| s.source_id.clone()).collect();
    if !missing.is_empty() {
        return Err(ProtocolError::MissingIds(missing));
    }
    Ok(vectors)
}

/// Tokens of a tree, for callers holding trees rather than sequences.
pub fn tokens_of(node: &AstNode) -> Vec<SbtToken> {
    linearize_node(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{census, Language, NodeKind};

    fn seq(id: &str, terms: &[&str]) -> SbtSequence {
        SbtSequence {
            source_id: id.into(),
            language: Language::C,
            tokens: terms.iter().map(|t| SbtToken::Leaf(t.to_string())).collect(),
        }
    }

    #[test]
    fn single_document_is_unit_length() {
        let v = embed_tfidf(&[seq("a", &["x", "y", "y"])]);
        assert!((v[0].norm() - 1.0).abs() < 1e-12);
        assert!(v[0].values.iter().all(|(_, w)| *w > 0.0));
    }

    #[test]
    fn identical_documents() {
        let v = embed_tfidf(&[seq("a", &["x", "y"]), seq("b", &["x", "y"])]);
        assert!((cosine(&v[0], &v[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn common_term_has_lowest_idf() {
        // df: x=3, y=2, z=1 over 3 docs; vocabulary order x,y,z
        let docs = [seq("a", &["x", "y", "z"]), seq("b", &["x", "y"]), seq("c", &["x"])];
        let v = embed_tfidf(&docs);
        let idf = |df: f64| (4.0 / (df + 1.0)).ln() + 1.0;
        let raw = [idf(3.0), idf(2.0), idf(1.0)];
        let n = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
        for (i, (dim, w)) in v[0].values.iter().enumerate() {
            assert_eq!(*dim, i as u64);
            assert!((w - raw[i] / n).abs() < 1e-12);
        }
        assert!(v[0].values[0].1 < v[0].values[1].1 && v[0].values[1].1 < v[0].values[2].1);
    }

    #[test]
    fn depth_one_is_census() {
        let tree = crate::frontend::build::binary("+", AstNode::var("a"), AstNode::var("a"));
        let v = embed_tree_hash("t", &tree, 1);
        // Binary, Operator "+", Var[a] twice
        assert_eq!(v.values.len(), 3);
        let mut weights: Vec<f64> = v.values.iter().map(|(_, w)| *w).collect();
        weights.sort_by(f64::total_cmp);
        let n = 6f64.sqrt();
        assert!((weights[0] - 1.0 / n).abs() < 1e-12 && (weights[2] - 2.0 / n).abs() < 1e-12);
        assert_eq!(census(&tree)[&NodeKind::Ident], 2);
    }

    #[test]
    fn ranking_order_and_ties() {
        let q = EmbeddingVector::from_dense("q", &[1.0, 0.0]);
        let g = vec![
            EmbeddingVector::from_dense("c", &[0.1, 1.0]),
            EmbeddingVector::from_dense("a", &[1.0, 0.1]),
            EmbeddingVector::from_dense("b", &[1.0, 1.0]),
            q.clone(),
        ];
        let r = rank(&q, &g, 2);
        assert_eq!(r.items.iter().map(|(i, _)| i.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        assert!(!r.short);
        let same: Vec<EmbeddingVector> =
            ["z", "m", "b"].iter().map(|i| EmbeddingVector::from_dense(*i, &[1.0])).collect();
        let r = rank(&EmbeddingVector::from_dense("q", &[1.0]), &same, 5);
        assert_eq!(r.items.iter().map(|(i, _)| i.as_str()).collect::<Vec<_>>(), vec!["b", "m", "z"]);
        assert!(r.short);
    }

    #[test]
    fn zero_vectors_score_zero() {
        let z = EmbeddingVector::from_dense("z", &[0.0, 0.0]);
        let a = EmbeddingVector::from_dense("a", &[1.0, 0.0]);
        assert_eq!(cosine(&z, &a), 0.0);
        assert_eq!(cosine(&z, &z), 0.0);
    }

    #[test]
    fn embedding_files_round_trip() {
        let v = vec![EmbeddingVector::from_pairs("a", [(3, 0.5), (1, 0.25)]), EmbeddingVector::from_dense("b", &[1.0])];
        assert_eq!(read_embeddings(&write_embeddings(&v)).unwrap(), v);
        let ragged = "{\"id\":\"a\",\"vector\":[1,2]}\n{\"id\":\"b\",\"vector\":[1]}\n";
        assert!(matches!(read_embeddings(ragged), Err(ProtocolError::Line { line: 2, .. })));
        assert!(matches!(read_embeddings("{\"id\":\"a\"}\n"), Err(ProtocolError::Line { line: 1, .. })));
        assert!(matches!(read_embeddings("not json\n"), Err(ProtocolError::Line { line: 1, .. })));
    }

    #[test]
    fn external_backend_protocol() {
        let seqs = vec![seq("a", &["x"]), seq("b", &["y"])];
        let ok = external_embed(
            r#"while read -r l; do id=$(printf '%s' "$l" | sed 's/.*"source_id":"\([^"]*\)".*/\1/'); echo "{\"id\":\"$id\",\"vector\":[0,0]}"; done"#,
            &seqs,
        )
        .unwrap();
        assert_eq!(ok.len(), 2);
        let missing = external_embed(r#"cat >/dev/null; echo '{"id":"a","vector":[1]}'"#, &seqs).unwrap_err();
        assert!(matches!(missing, ProtocolError::MissingIds(ref ids) if ids == &vec!["b".to_string()]));
        assert!(matches!(external_embed("cat >/dev/null; exit 3", &seqs), Err(ProtocolError::Backend { .. })));
        assert!(matches!(
            external_embed(r#"cat >/dev/null; echo garbage"#, &seqs),
            Err(ProtocolError::Line { line: 1, .. })
        ));
    }
}
