//! One pass/fail line per acceptance criterion.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use irclone::dataset::{make_splits, DatasetError, SplitSet};
use irclone::eval::{evaluate, random_map};
use irclone::frontend::{language_for_path, parse, SourceFile};
use irclone::ir::Language;
use irclone::normalize::{apply_mapping, normalize, NormalizeOptions, TokenMapping};
use irclone::sbt::{linearize, parse_sbt, render, squash_whitespace};
use irclone::similarity::{cosine, embed_subtree_hash};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// 1 -------------------------------------------------------------------------

fn golden_fixtures() -> Check {
    let start = Instant::now();
    let opts = NormalizeOptions { anonymize: false, mapping: Some(TokenMapping::default_mapping()) };
    for (src, golden) in [("threshold.c", "threshold_c.sbt"), ("threshold.cob", "threshold_cobol.sbt")] {
        let path = fixtures().join(src);
        let lang = language_for_path(&path).unwrap();
        let cu = parse(lang, &SourceFile::new(src, read(&path))).map_err(|d| format!("{src}: {d}"))?;
        let got = linearize(&normalize(&cu, &opts).0).render();
        let want = squash_whitespace(&read(fixtures().join(golden)));
        ensure(squash_whitespace(&got) == want, || format!("{src} differs from {golden}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {}", secs(elapsed)))?;

    let dir = tempfile::tempdir().unwrap();
    for (src, golden) in [("threshold.c", "threshold_c.sbt"), ("threshold.cob", "threshold_cobol.sbt")] {
        let p = fixtures().join(src);
        let o = irclone(&["sbt", p.to_str().unwrap(), "--map", "default", "--out", "t.sbt"], dir.path());
        ensure(code(&o) == 0, || stderr(&o))?;
        let line = read(dir.path().join("t.sbt"));
        let rendering = line.trim_end().split_once('\t').map(|x| x.1).unwrap_or("");
        ensure(squash_whitespace(rendering) == squash_whitespace(&read(fixtures().join(golden))), || {
            format!("CLI output for {src} differs")
        })?;
    }
    Ok(format!("C and COBOL strings byte-identical, library path {}", secs(elapsed)))
}

// 2 -------------------------------------------------------------------------

fn random_baseline() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let rows: [(usize, usize, usize, usize, f64, f64); 4] = [
        (92, 3, 2, 10000, 0.54, 0.10),
        (29, 2, 1, 10000, 1.72, 0.20),
        (29, 300, 299, 1000, 0.19, 0.19 * 0.5),
        (11, 100, 99, 10000, 1.23, 0.25),
    ];
    let mut parts = Vec::new();
    for (pds, per, r, trials, target, tol) in rows {
        let start = Instant::now();
        let o = irclone(
            &[
                "random-map", "--pds", &pds.to_string(), "--per-pd", &per.to_string(), "--R", &r.to_string(),
                "--trials", &trials.to_string(), "--seed", "0", "--out", "r.json",
            ],
            dir.path(),
        );
        ensure(code(&o) == 0, || stderr(&o))?;
        let doc: serde_json::Value = serde_json::from_str(&read(dir.path().join("r.json"))).unwrap();
        let map = doc["map"].as_f64().unwrap();
        let exact = common::exact_random_map(pds, r);
        parts.push(format!("{pds}x{per} R={r}: {map:.3} (target {target}, exact {exact:.3}, {})", secs(start.elapsed())));
        ensure((map - target).abs() <= tol, || format!("{pds}x{per} R={r}: {map:.3} outside {target} ± {tol}"))?;
    }
    Ok(parts.join("; "))
}

// 3 -------------------------------------------------------------------------

fn metric_oracle() -> Check {
    let mut r = ChaCha8Rng::seed_from_u64(1234);
    let n = 600;
    for inst in 0..n {
        let (labels, vecs, rr) = common::random_instance(&mut r);
        let mut scores = HashMap::new();
        for a in &vecs {
            for b in &vecs {
                scores.insert((a.id.clone(), b.id.clone()), cosine(a, b));
            }
        }
        let want: f64 =
            labels.keys().map(|q| common::naive_ap(q, &labels, &scores, rr)).sum::<f64>() / labels.len() as f64 * 100.0;
        let got = evaluate(&labels, &vecs, rr, serde_json::Value::Null).map_err(|e| e.to_string())?.map;
        ensure((got - want).abs() < 1e-9, || format!("instance {inst}: {got} vs oracle {want}"))?;
    }
    Ok(format!("{n} random instances agree"))
}

// 4 -------------------------------------------------------------------------

fn sbt_round_trip() -> Check {
    let mut r = ChaCha8Rng::seed_from_u64(77);
    let mut nodes = 0;
    for i in 0..1000 {
        let budget = r.gen_range(1..60);
        let cu = common::random_unit(&mut r, budget, &format!("t{i}"));
        nodes += cu.root.size();
        let text = render(&cu.root);
        let back = parse_sbt(&text).map_err(|e| format!("tree {i}: {e}"))?;
        ensure(back == cu.root, || format!("tree {i} changed: {text}"))?;
    }
    Ok(format!("1000 trees, {nodes} nodes"))
}

// 5 -------------------------------------------------------------------------

fn leakage() -> Check {
    let mut r = ChaCha8Rng::seed_from_u64(55);
    let mut built = 0;
    for trial in 0..100 {
        let (c, cobol) = common::random_corpus(&mut r);
        let spec = common::small_spec(trial);
        let set = match make_splits(&c, &cobol, &spec) {
            Ok(s) => s,
            Err(DatasetError::Shortfall { .. }) => continue,
            Err(e) => return Err(format!("trial {trial}: {e}")),
        };
        built += 1;
        let mut train_val = SplitSet::pd_ids(&set.train);
        train_val.extend(SplitSet::pd_ids(&set.val));
        for t in &set.tests {
            let mut per_pd: BTreeMap<&str, usize> = BTreeMap::new();
            for e in &t.entries {
                *per_pd.entry(e.pd.as_str()).or_insert(0) += 1;
            }
            if t.language == Language::Cobol {
                ensure(per_pd.keys().all(|p| !train_val.contains(p)), || format!("trial {trial}: {} leaks", t.name))?;
            }
            ensure(per_pd.values().all(|k| *k == t.r + 1), || format!("trial {trial}: {} has a PD without R+1 codes", t.name))?;
        }
    }
    ensure(built >= 50, || format!("only {built} corpora produced splits"))?;
    Ok(format!("{built}/100 corpora split, no leakage"))
}

// 6 -------------------------------------------------------------------------

fn anonymization() -> Check {
    let fixtures = common::fixture_units();
    for cu in &fixtures {
        if let Some(v) = common::anonymization_violation(cu) {
            return Err(format!("{}: {v}", cu.source_id));
        }
    }
    let mut r = ChaCha8Rng::seed_from_u64(606);
    for i in 0..200 {
        let src = common::random_c_program(&mut r);
        let cu = parse(Language::C, &SourceFile::new(format!("g{i}.c"), src)).map_err(|d| format!("program {i}: {d}"))?;
        if let Some(v) = common::anonymization_violation(&cu) {
            return Err(format!("program {i}: {v}"));
        }
    }
    Ok(format!("{} fixtures and 200 generated programs", fixtures.len()))
}

// 7 -------------------------------------------------------------------------

const MAPPING_SOURCES: [&str; 16] = [
    "scanf", "printf", "strtok", ",", "=", "strlen", "strcat", "qsort", "fread", "stdin/stdout", "lsearch/bsearch",
    "statistical", "%", "round", "+", "memset",
];

fn mapping() -> Check {
    let m = TokenMapping::default_mapping();
    let present = m.source_tokens();
    for cell in MAPPING_SOURCES {
        for tok in cell.split('/') {
            ensure(present.contains(&tok), || format!("`{tok}` missing from the default mapping"))?;
        }
    }
    let units = common::fixture_units();
    for cu in &units {
        let once = apply_mapping(cu, &m);
        ensure(apply_mapping(&once, &m) == once, || format!("{}: not idempotent", cu.source_id))?;
    }
    Ok(format!("16 source cells present; idempotent on {} fixtures", units.len()))
}

// 8 -------------------------------------------------------------------------

fn zero_shot_surrogate() -> Check {
    let start = Instant::now();
    let opts = NormalizeOptions { anonymize: true, mapping: Some(TokenMapping::default_mapping()) };
    let mut units = Vec::new();
    let mut paths: Vec<_> = std::fs::read_dir(fixtures().join("paired")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    for p in &paths {
        let lang = language_for_path(p).unwrap();
        let mut cu = parse(lang, &SourceFile::new(p.to_string_lossy(), read(p))).map_err(|d| format!("{}: {d}", p.display()))?;
        cu = normalize(&cu, &opts).0;
        cu.source_id = p.file_name().unwrap().to_string_lossy().into_owned();
        units.push((p.file_stem().unwrap().to_string_lossy().into_owned(), cu));
    }
    let n_pds = units.iter().map(|(pd, _)| pd.as_str()).collect::<std::collections::BTreeSet<_>>().len();
    ensure(n_pds >= 10 && units.len() == 2 * n_pds, || format!("{} programs over {n_pds} PDs", units.len()))?;
    let vecs: Vec<_> = units.iter().map(|(_, cu)| embed_subtree_hash(cu, 3)).collect();
    let labels: BTreeMap<String, String> = units.iter().map(|(pd, cu)| (cu.source_id.clone(), pd.clone())).collect();
    let map = evaluate(&labels, &vecs, 1, serde_json::Value::Null).map_err(|e| e.to_string())?.map;
    let random = random_map(n_pds, 2, 1, 10000, 0).map_err(|e| e.to_string())?.map;

    let (mut matched, mut mismatched) = (Vec::new(), Vec::new());
    for (i, (pa, a)) in units.iter().enumerate() {
        for (pb, b) in units.iter().skip(i + 1) {
            if a.language == b.language {
                continue;
            }
            let s = cosine(&vecs[i], &embed_subtree_hash(b, 3));
            if pa == pb { matched.push(s) } else { mismatched.push(s) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mm, mx) = (mean(&matched), mean(&mismatched));
    let elapsed = start.elapsed();
    ensure(map > random, || format!("MAP {map:.2} does not beat random {random:.2}"))?;
    ensure(mm > mx, || format!("matched cosine {mm:.3} <= mismatched {mx:.3}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {}", secs(elapsed)))?;
    Ok(format!("{n_pds} pairs: MAP@1 {map:.2} > random {random:.2}; cosine matched {mm:.3} > mismatched {mx:.3}; {}", secs(elapsed)))
}

// 9 -------------------------------------------------------------------------

fn pipeline(dir: &Path, jobs: &str) -> Result<(), String> {
    mini_corpus(&dir.join("corpus"));
    write(&dir.join("spec.txt"), SMALL_SPEC);
    let mut files: Vec<String> = Vec::new();
    for pd in std::fs::read_dir(dir.join("corpus/data")).unwrap() {
        for lang in std::fs::read_dir(pd.unwrap().path()).unwrap() {
            for f in std::fs::read_dir(lang.unwrap().path()).unwrap() {
                let p = f.unwrap().path();
                files.push(p.strip_prefix(dir).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    files.sort();
    let mut steps: Vec<Vec<String>> = Vec::new();
    let mut parse_cmd = vec!["parse".to_string()];
    parse_cmd.extend(files);
    parse_cmd.extend(["--out".into(), "ir".into()]);
    steps.push(parse_cmd);
    for s in [
        "sbt ir --anonymize --map default --out all.sbt",
        "split corpus --spec spec.txt --out splits.json",
        "pairs splits.json --split train --neg-ratio 1 --seed 3 --out pairs.jsonl",
        "embed all.sbt --backend subtree-hash --out hash.jsonl",
        "embed all.sbt --backend tfidf --out tfidf.jsonl",
        "eval splits.json hash.jsonl --split cobol-3 --out eval_hash.json",
        "eval splits.json tfidf.jsonl --split c-4 --out eval_tfidf.json",
    ] {
        steps.push(s.split(' ').map(String::from).collect());
    }
    for mut step in steps {
        step.extend(["--jobs".into(), jobs.into()]);
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let o = irclone(&args, dir);
        ensure(code(&o) == 0, || format!("`{}` failed: {}", step[0], stderr(&o)))?;
    }
    Ok(())
}

fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            if rel.starts_with("corpus") || rel.ends_with(".run.json") {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Check {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "0")?;
    pipeline(b.path(), "1")?;
    let (oa, ob) = (outputs(a.path()), outputs(b.path()));
    ensure(oa.keys().eq(ob.keys()), || format!("different file sets: {:?} vs {:?}", oa.keys(), ob.keys()))?;
    for (name, bytes) in &oa {
        ensure(ob[name] == *bytes, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} output files byte-identical across two runs", oa.len()))
}

// ---------------------------------------------------------------------------

/// Written straight to stdout so the lines show up without `--nocapture`.
fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("golden SBT fixtures", golden_fixtures),
        ("random baseline reproduction", random_baseline),
        ("MAP@R metric oracle", metric_oracle),
        ("SBT round-trip", sbt_round_trip),
        ("split leakage", leakage),
        ("anonymization consistency", anonymization),
        ("mapping idempotence and coverage", mapping),
        ("zero-shot surrogate", zero_shot_surrogate),
        ("pipeline determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => report(&format!("PASS {} {name}: {detail}", i + 1)),
            Err(why) => {
                report(&format!("FAIL {} {name}: {why}", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
