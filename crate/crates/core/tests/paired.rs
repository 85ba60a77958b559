use std::collections::BTreeMap;
use std::path::PathBuf;

use irclone::eval::{evaluate, random_map};
use irclone::frontend::{language_for_path, parse, SourceFile};
use irclone::ir::{validate, CompilationUnit};
use irclone::normalize::{normalize, NormalizeOptions, TokenMapping};
use irclone::similarity::{cosine, embed_subtree_hash, EmbeddingVector};

const DEPTH: usize = 3;

fn paired_units() -> Vec<(String, CompilationUnit)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/paired");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    let opts = NormalizeOptions { anonymize: true, mapping: Some(TokenMapping::default_mapping()) };
    paths
        .iter()
        .map(|p| {
            let lang = language_for_path(p).unwrap();
            let text = std::fs::read_to_string(p).unwrap();
            let src = SourceFile::new(p.file_name().unwrap().to_string_lossy(), text);
            let cu = parse(lang, &src).unwrap_or_else(|d| panic!("{}: {d}", p.display()));
            assert!(validate(&cu).is_empty(), "{}: {:?}", p.display(), validate(&cu));
            let (cu, _) = normalize(&cu, &opts);
            let mut cu = cu;
            cu.source_id = p.file_name().unwrap().to_string_lossy().into_owned();
            let pd = p.file_stem().unwrap().to_string_lossy().into_owned();
            (pd, cu)
        })
        .collect()
}

fn embeddings(units: &[(String, CompilationUnit)]) -> Vec<(String, EmbeddingVector)> {
    units.iter().map(|(pd, cu)| (pd.clone(), embed_subtree_hash(cu, DEPTH))).collect()
}

#[test]
fn suite_has_ten_or_more_pairs() {
    let units = paired_units();
    let mut per_pd: BTreeMap<&str, usize> = BTreeMap::new();
    for (pd, _) in &units {
        *per_pd.entry(pd).or_insert(0) += 1;
    }
    assert!(per_pd.len() >= 10);
    assert!(per_pd.values().all(|n| *n == 2));
}

#[test]
fn matched_pairs_are_closer_than_mismatched() {
    let emb = embeddings(&paired_units());
    let (mut matched, mut mismatched) = (Vec::new(), Vec::new());
    for (i, (pa, a)) in emb.iter().enumerate() {
        for (pb, b) in &emb[i + 1..] {
            if a.id.ends_with(".c") == b.id.ends_with(".c") {
                continue;
            }
            if pa == pb { matched.push(cosine(a, b)) } else { mismatched.push(cosine(a, b)) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&matched) > mean(&mismatched), "{} vs {}", mean(&matched), mean(&mismatched));
}

#[test]
fn cross_language_map_beats_random() {
    let emb = embeddings(&paired_units());
    let labels: BTreeMap<String, String> = emb.iter().map(|(pd, e)| (e.id.clone(), pd.clone())).collect();
    let vectors: Vec<EmbeddingVector> = emb.into_iter().map(|(_, e)| e).collect();
    let report = evaluate(&labels, &vectors, 1, serde_json::Value::Null).unwrap();
    let n_pds = labels.len() / 2;
    let random = random_map(n_pds, 2, 1, 10_000, 0).unwrap();
    println!("{} random={:.2}", report.summary_line(), random.map);
    assert!(report.map > random.map);
}
