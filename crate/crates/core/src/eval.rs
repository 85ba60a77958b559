//! MAP@R and the random-ranking baseline.
//!
//! `AP@R(q) = (1/R) · Σ_{i=1..R} rel(i) · P@i`, where `P@i` is the fraction
//! of relevant items among the first `i` retrieved. MAP is the mean AP over
//! all queries, reported as a percentage.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::similarity::{rank, EmbeddingVector};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("R must be at least 1")]
    ZeroR,
    #[error("query `{query}` has {found} relevant gallery items, expected R = {r}")]
    RelevantCount { query: String, found: usize, r: usize },
    #[error("no label for id `{0}`")]
    UnknownId(String),
    #[error("embeddings missing for ids: {}", .0.join(", "))]
    MissingEmbeddings(Vec<String>),
    #[error("random baseline needs codes_per_pd = R + 1 (got {codes_per_pd} codes per PD, R = {r})")]
    Shape { codes_per_pd: usize, r: usize },
    #[error("trials must be at least 1")]
    ZeroTrials,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAp {
    pub id: String,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    /// Mean AP × 100.
    pub map: f64,
    #[serde(rename = "R")]
    pub r: usize,
    pub n_queries: usize,
    pub per_query: Vec<QueryAp>,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl MapReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// `MAP@R=<map> R=<r> queries=<n>`
    pub fn summary_line(&self) -> String {
        format!("MAP@R={:.2} R={} queries={}", self.map, self.r, self.n_queries)
    }
}

/// AP over the first `r` entries of `ranking`.
pub fn average_precision(ranking: &[bool], r: usize) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, rel) in ranking.iter().take(r).enumerate() {
        if *rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / r as f64
}

/// MAP@R for `(query, ranked gallery ids)` pairs. `labels` maps every id in
/// the evaluated split to its PD; each query must have exactly `r` other ids
/// sharing its PD.
pub fn map_at_r(
    rankings: &[(String, Vec<String>)],
    labels: &HashMap<String, String>,
    r: usize,
) -> Result<MapReport, EvalError> {
    if r == 0 {
        return Err(EvalError::ZeroR);
    }
    let mut pd_sizes: HashMap<&str, usize> = HashMap::new();
    for pd in labels.values() {
        *pd_sizes.entry(pd.as_str()).or_insert(0) += 1;
    }
    let per_query = rankings
        .iter()
        .map(|(q, ranked)| {
            let pd = labels.get(q).ok_or_else(|| EvalError::UnknownId(q.clone()))?;
            let found = pd_sizes[pd.as_str()] - 1;
            if found != r {
                return Err(EvalError::RelevantCount { query: q.clone(), found, r });
            }
            let rel = ranked
                .iter()
                .filter(|id| *id != q)
                .take(r)
                .map(|id| labels.get(id).map(|p| p == pd).ok_or_else(|| EvalError::UnknownId(id.clone())))
                .collect::<Result<Vec<bool>, _>>()?;
            Ok(QueryAp { id: q.clone(), ap: average_precision(&rel, r) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = per_query.len();
    let map = if n == 0 { 0.0 } else { per_query.iter().map(|q| q.ap).sum::<f64>() / n as f64 * 100.0 };
    Ok(MapReport { map, r, n_queries: n, per_query, config: serde_json::Value::Null })
}

/// Ranks every id against the rest of the split and scores the result.
/// `labels` gives the PD of every split id.
pub fn evaluate(
    labels: &BTreeMap<String, String>,
    embeddings: &[EmbeddingVector],
    r: usize,
    config: serde_json::Value,
) -> Result<MapReport, EvalError> {
    let by_id: HashMap<&str, &EmbeddingVector> = embeddings.iter().map(|e| (e.id.as_str(), e)).collect();
    let missing: Vec<String> = labels.keys().filter(|id| !by_id.contains_key(id.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingEmbeddings(missing));
    }
    let gallery: Vec<EmbeddingVector> = labels.keys().map(|id| by_id[id.as_str()].clone()).collect();
    let rankings: Vec<(String, Vec<String>)> = gallery
        .par_iter()
        .map(|q| {
            let ranking = rank(q, &gallery, r);
            (q.id.clone(), ranking.items.into_iter().map(|(id, _)| id).collect())
        })
        .collect();
    let labels: HashMap<String, String> = labels.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let mut report = map_at_r(&rankings, &labels, r)?;
    report.config = config;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMap {
    /// Mean MAP over trials, as a percentage.
    pub map: f64,
    /// Standard error of `map`.
    pub std_error: f64,
    pub trials: usize,
}

/// Stream seed for one trial, derived from the master seed (SplitMix64).
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// AP of a uniformly random ranking: the top `r` of `gallery` items holding
/// `r` relevant ones are drawn one at a time without replacement.
fn random_ap(rng: &mut impl Rng, gallery: usize, r: usize) -> f64 {
    let (mut left, mut rel_left, mut hits, mut sum) = (gallery, r, 0usize, 0.0);
    for i in 1..=r {
        if rng.gen_range(0..left) < rel_left {
            rel_left -= 1;
            hits += 1;
            sum += hits as f64 / i as f64;
        }
        left -= 1;
    }
    sum / r as f64
}

/// Monte Carlo MAP@R of random rankings over `n_pds × codes_per_pd` codes.
/// Trials run in parallel on independent seeded streams and are summed in
/// trial order, so the result depends only on the arguments.
pub fn random_map(n_pds: usize, codes_per_pd: usize, r: usize, trials: usize, seed: u64) -> Result<RandomMap, EvalError> {
    if r == 0 {
        return Err(EvalError::ZeroR);
    }
    if codes_per_pd != r + 1 || n_pds == 0 {
        return Err(EvalError::Shape { codes_per_pd, r });
    }
    if trials == 0 {
        return Err(EvalError::ZeroTrials);
    }
    let queries = n_pds * codes_per_pd;
    let gallery = queries - 1;
    let per_trial: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, t as u64));
            let total: f64 = (0..queries).map(|_| random_ap(&mut rng, gallery, r)).sum();
            total / queries as f64 * 100.0
        })
        .collect();
    let mean = per_trial.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        per_trial.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    Ok(RandomMap { map: mean, std_error: (var / trials as f64).sqrt(), trials })
}
