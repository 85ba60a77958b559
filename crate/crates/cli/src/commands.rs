use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use irclone::dataset::{
    annotate_token_lengths, filter_pds, gen_pairs, ingest, make_splits, pairs_to_jsonl, SplitSet,
    SplitSpec, TestSpec,
};
use irclone::eval::{evaluate, random_map, EvalError};
use irclone::frontend::{language_for_path, parse, SourceFile};
use irclone::ir::{CompilationUnit, Language};
use irclone::normalize::{normalize, NormalizeOptions, TokenMapping};
use irclone::sbt::{format_line, linearize, linearize_node, parse_line, parse_sbt, parse_tokens, SbtSequence};
use irclone::similarity::{embed_tfidf, embed_tree_hash, external_embed, read_embeddings, write_embeddings};
use rayon::prelude::*;
use serde_json::json;

use crate::run::{
    fail, manifest_path, read_input, sha256_hex, write_atomic, Failure, RunManifest, WithCode, EXIT_CONFIG, EXIT_OK,
    EXIT_PARTIAL, EXIT_PROTOCOL,
};
use crate::{Command, LangArg, Overflow, SbtFormat};

impl From<LangArg> for Language {
    fn from(l: LangArg) -> Self {
        match l {
            LangArg::C => Language::C,
            LangArg::Cobol => Language::Cobol,
        }
    }
}

pub fn dispatch(cmd: &Command) -> Result<u8, Failure> {
    let config = serde_json::to_value(cmd).expect("flags serialize");
    match cmd {
        Command::Parse { files, lang, out } => cmd_parse(config, files, *lang, out),
        Command::Sbt { inputs, lang, anonymize, map, max_tokens, overflow, format, out } => {
            let opts = SbtOptions { lang: *lang, anonymize: *anonymize, map, max_tokens: *max_tokens, overflow: *overflow, format: *format };
            cmd_sbt(config, inputs, &opts, out)
        }
        Command::Split { root, spec, seed, out } => cmd_split(config, root, spec.as_deref(), *seed, out),
        Command::Pairs { manifest, split, neg_ratio, max_positives, seed, out } => {
            cmd_pairs(config, manifest, split, *neg_ratio, *max_positives, *seed, out)
        }
        Command::Embed { sbt, backend, depth, lang, out } => cmd_embed(config, sbt, backend, *depth, (*lang).into(), out),
        Command::Eval { manifest, embeddings, split, r, out } => cmd_eval(config, manifest, embeddings, split, *r, out),
        Command::RandomMap { pds, per_pd, r, trials, seed, out } => {
            cmd_random_map(config, *pds, *per_pd, *r, *trials, *seed, out.as_deref())
        }
    }
}

/// Raw bytes (when the file could be read) and the load result.
type Loaded<T> = (Option<Vec<u8>>, Result<T, String>);

fn language_of(path: &Path, forced: Option<LangArg>) -> Result<Language, String> {
    match forced {
        Some(l) => Ok(l.into()),
        None => language_for_path(path).ok_or_else(|| "cannot tell the language from the file extension".to_string()),
    }
}

fn read_source(path: &Path) -> Result<(Vec<u8>, String), String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| "not UTF-8".to_string())?;
    Ok((bytes, text))
}

// ---------------------------------------------------------------------------
// parse
// ---------------------------------------------------------------------------

fn cmd_parse(config: serde_json::Value, files: &[PathBuf], lang: Option<LangArg>, out: &Path) -> Result<u8, Failure> {
    if files.is_empty() {
        return Ok(EXIT_OK);
    }
    let mut manifest = RunManifest::start(config);
    let results: Vec<Loaded<CompilationUnit>> = files
        .par_iter()
        .map(|path| {
            let (bytes, text) = match read_source(path) {
                Ok(x) => x,
                Err(e) => return (None, Err(e)),
            };
            let cu = language_of(path, lang)
                .and_then(|l| parse(l, &SourceFile::new(path.to_string_lossy(), text)).map_err(|d| d.to_string()));
            (Some(bytes), cu)
        })
        .collect();
    let mut failed = Vec::new();
    for (path, (bytes, cu)) in files.iter().zip(results) {
        if let Some(b) = bytes {
            manifest.input(path, &b);
        }
        match cu {
            Ok(cu) => {
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let mut text = cu.to_json();
                text.push('\n');
                write_atomic(&out.join(format!("{name}.json")), text.as_bytes())?;
            }
            Err(e) => {
                eprintln!("{}:{e}", path.display());
                failed.push(path.to_string_lossy().into_owned());
            }
        }
    }
    let code = if failed.is_empty() { EXIT_OK } else { EXIT_PARTIAL };
    manifest.details = json!({ "parsed": files.len() - failed.len(), "failed": failed });
    manifest.finish(&manifest_path(out), code)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// sbt
// ---------------------------------------------------------------------------

pub struct SbtOptions<'a> {
    pub lang: Option<LangArg>,
    pub anonymize: bool,
    pub map: &'a str,
    pub max_tokens: Option<usize>,
    pub overflow: Overflow,
    pub format: SbtFormat,
}

fn expand_inputs(inputs: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            for e in walkdir::WalkDir::new(p).sort_by_file_name().into_iter().filter_map(Result::ok) {
                let path = e.path();
                let wanted = path.extension().is_some_and(|x| x == "json") || language_for_path(path).is_some();
                if e.file_type().is_file() && wanted && !path.to_string_lossy().ends_with(".run.json") {
                    out.push(path.to_path_buf());
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    out
}

fn load_unit(path: &Path, lang: Option<LangArg>) -> Loaded<CompilationUnit> {
    let (bytes, text) = match read_source(path) {
        Ok(x) => x,
        Err(e) => return (None, Err(e)),
    };
    let cu = if path.extension().is_some_and(|x| x == "json") {
        CompilationUnit::from_json(&text).map_err(|e| format!(" bad IR JSON: {e}"))
    } else {
        language_of(path, lang)
            .and_then(|l| parse(l, &SourceFile::new(path.to_string_lossy(), text)).map_err(|d| d.to_string()))
    };
    (Some(bytes), cu)
}

fn load_mapping(map: &str, manifest: &mut RunManifest) -> Result<Option<TokenMapping>, Failure> {
    match map {
        "none" => Ok(None),
        "default" => Ok(Some(TokenMapping::default_mapping())),
        path => {
            let path = Path::new(path);
            let text = read_input(path, manifest)?;
            TokenMapping::parse(&text).map(Some).map_err(|e| Failure {
                code: EXIT_CONFIG,
                error: anyhow::anyhow!("{}: {e}", path.display()),
            })
        }
    }
}

fn cmd_sbt(config: serde_json::Value, inputs: &[PathBuf], o: &SbtOptions, out: &Path) -> Result<u8, Failure> {
    let mut manifest = RunManifest::start(config);
    let mapping = load_mapping(o.map, &mut manifest)?;
    let opts = NormalizeOptions { anonymize: o.anonymize, mapping };
    let files = expand_inputs(inputs);
    let results: Vec<Loaded<SbtSequence>> = files
        .par_iter()
        .map(|path| {
            let (bytes, cu) = load_unit(path, o.lang);
            (bytes, cu.map(|cu| linearize(&normalize(&cu, &opts).0)))
        })
        .collect();

    let mut failed = Vec::new();
    let mut affected = Vec::new();
    let mut seen: BTreeMap<String, &Path> = BTreeMap::new();
    let mut text = String::new();
    for (path, (bytes, seq)) in files.iter().zip(results) {
        if let Some(b) = bytes {
            manifest.input(path, &b);
        }
        let mut seq = match seq {
            Ok(s) => s,
            Err(e) => {
                eprintln!("{}:{e}", path.display());
                failed.push(path.to_string_lossy().into_owned());
                continue;
            }
        };
        if let Some(first) = seen.insert(seq.source_id.clone(), path) {
            return fail(
                EXIT_CONFIG,
                format!("{} and {} share the source id `{}`", first.display(), path.display(), seq.source_id),
            );
        }
        if let Some(limit) = o.max_tokens.filter(|l| seq.tokens.len() > *l) {
            affected.push(seq.source_id.clone());
            match o.overflow {
                Overflow::Keep => {}
                Overflow::Drop => continue,
                Overflow::Truncate => seq = seq.truncated(limit),
            }
        }
        match o.format {
            SbtFormat::Text => text.push_str(&format_line(&seq.source_id, &seq.render())),
            SbtFormat::Json => text.push_str(&seq.to_json()),
        }
        text.push('\n');
    }
    write_atomic(out, text.as_bytes())?;
    let code = if failed.is_empty() { EXIT_OK } else { EXIT_PARTIAL };
    manifest.details = json!({
        "units": files.len() - failed.len(),
        "parse_failures": failed,
        "overflow": { "policy": o.overflow, "max_tokens": o.max_tokens, "ids": affected },
    });
    manifest.finish(&manifest_path(out), code)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// split / pairs
// ---------------------------------------------------------------------------

/// Reads a split spec from JSON or from `key=value` lines. Recognised keys:
/// `seed`, `train_val_ratio`, `max_token_len` and repeated
/// `test=name,language,codes_per_pd[,max_token_len[,max_pds]]`.
pub fn parse_spec(text: &str) -> Result<SplitSpec, String> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text).map_err(|e| e.to_string());
    }
    let mut spec = SplitSpec::default();
    let mut tests = Vec::new();
    let opt_usize = |v: &str| -> Result<Option<usize>, String> {
        match v {
            "" | "none" => Ok(None),
            v => v.parse().map(Some).map_err(|e| format!("`{v}`: {e}")),
        }
    };
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(format!("line {}: expected key=value", i + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let at = |e: String| format!("line {}: {e}", i + 1);
        match key {
            "seed" => spec.seed = value.parse().map_err(|e| at(format!("seed: {e}")))?,
            "train_val_ratio" => spec.train_val_ratio = value.parse().map_err(|e| at(format!("train_val_ratio: {e}")))?,
            "max_token_len" => spec.max_token_len = opt_usize(value).map_err(at)?,
            "test" => {
                let f: Vec<&str> = value.split(',').map(str::trim).collect();
                if !(3..=5).contains(&f.len()) {
                    return Err(at("test needs name,language,codes_per_pd[,max_token_len[,max_pds]]".into()));
                }
                let language: Language = f[1].parse().map_err(|e| at(format!("{e}")))?;
                let codes = f[2].parse().map_err(|e| at(format!("codes_per_pd: {e}")))?;
                let mut t = TestSpec::new(f[0], language, codes, opt_usize(f.get(3).copied().unwrap_or("")).map_err(at)?);
                t.max_pds = opt_usize(f.get(4).copied().unwrap_or("")).map_err(at)?;
                tests.push(t);
            }
            other => return Err(at(format!("unknown key `{other}`"))),
        }
    }
    if !tests.is_empty() {
        spec.tests = tests;
    }
    Ok(spec)
}

fn cmd_split(config: serde_json::Value, root: &Path, spec_path: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<u8, Failure> {
    let mut manifest = RunManifest::start(config);
    let mut spec = match spec_path {
        Some(p) => {
            let text = read_input(p, &mut manifest)?;
            parse_spec(&text).map_err(|e| Failure { code: EXIT_CONFIG, error: anyhow::anyhow!("{}: {e}", p.display()) })?
        }
        None => SplitSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    manifest.seeds.push(spec.seed);
    let report = ingest(root).map_err(|e| Failure { code: EXIT_CONFIG, error: e.into() })?;
    let c = filter_pds(&report.pds, Language::C);
    let cobol = filter_pds(&report.pds, Language::Cobol);
    let mut kept_c = c.kept.clone();
    let mut kept_cobol = cobol.kept.clone();
    let opts = NormalizeOptions { anonymize: true, mapping: Some(TokenMapping::default_mapping()) };
    annotate_token_lengths(&mut kept_c, &opts);
    annotate_token_lengths(&mut kept_cobol, &opts);

    let mut corpus = Vec::new();
    for pd in kept_c.iter().chain(&kept_cobol) {
        for s in &pd.submissions {
            let bytes = std::fs::read(&s.path).code(EXIT_CONFIG)?;
            corpus.extend_from_slice(s.path.to_string_lossy().as_bytes());
            corpus.extend_from_slice(sha256_hex(&bytes).as_bytes());
        }
    }
    manifest.input_digests.insert(format!("{}/", root.display()), sha256_hex(&corpus));

    let set = make_splits(&kept_c, &kept_cobol, &spec).map_err(|e| Failure { code: EXIT_CONFIG, error: e.into() })?;
    write_atomic(out, set.to_manifest().as_bytes())?;
    let mut sizes = serde_json::Map::new();
    sizes.insert("train".into(), json!(set.train.len()));
    sizes.insert("val".into(), json!(set.val.len()));
    for t in &set.tests {
        sizes.insert(t.name.clone(), json!(t.entries.len()));
    }
    eprintln!(
        "kept {} C PDs and {} COBOL PDs; wrote {} splits",
        kept_c.len(),
        kept_cobol.len(),
        sizes.len()
    );
    manifest.details = json!({ "filter": { "C": strip(&c), "COBOL": strip(&cobol) }, "codes": sizes });
    manifest.finish(&manifest_path(out), EXIT_OK)?;
    Ok(EXIT_OK)
}

fn strip(f: &irclone::dataset::FilterOutcome) -> serde_json::Value {
    json!({
        "kept": f.kept.len(),
        "removed_no_description": f.removed_no_description,
        "removed_no_accepted": f.removed_no_accepted,
        "removed_single_code": f.removed_single_code,
    })
}

fn load_splits(path: &Path, manifest: &mut RunManifest) -> Result<SplitSet, Failure> {
    let text = read_input(path, manifest)?;
    SplitSet::from_manifest(&text).map_err(|e| Failure { code: EXIT_CONFIG, error: anyhow::anyhow!("{}: {e}", path.display()) })
}

fn cmd_pairs(
    config: serde_json::Value,
    manifest_in: &Path,
    split: &str,
    neg_ratio: usize,
    max_positives: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<u8, Failure> {
    let mut manifest = RunManifest::start(config);
    manifest.seeds.push(seed);
    let set = load_splits(manifest_in, &mut manifest)?;
    let Some(entries) = set.entries(split) else {
        return fail(EXIT_CONFIG, format!("no split named `{split}`"));
    };
    let pairs = gen_pairs(entries, neg_ratio, max_positives, seed).code(EXIT_CONFIG)?;
    write_atomic(out, pairs_to_jsonl(&pairs).as_bytes())?;
    let positives = pairs.iter().filter(|p| p.label == 1).count();
    manifest.details = json!({ "positives": positives, "negatives": pairs.len() - positives });
    manifest.finish(&manifest_path(out), EXIT_OK)?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// embed / eval / random-map
// ---------------------------------------------------------------------------

fn read_sbt_file(text: &str, language: Language) -> Result<Vec<SbtSequence>, Failure> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: String| Failure { code: EXIT_CONFIG, error: anyhow::anyhow!("line {}: {e}", i + 1) };
        if line.starts_with('{') {
            out.push(SbtSequence::from_json(line).map_err(|e| bad(e.to_string()))?);
        } else {
            let (id, rendering) = parse_line(line).ok_or_else(|| bad("expected `id<TAB>sbt`".into()))?;
            let tree = parse_sbt(rendering)
                .map_err(|e| bad(format!("{e} (truncated sequences need the JSON form)")))?;
            out.push(SbtSequence { source_id: id.to_string(), language, tokens: linearize_node(&tree) });
        }
    }
    Ok(out)
}

fn cmd_embed(config: serde_json::Value, sbt: &Path, backend: &str, depth: usize, lang: Language, out: &Path) -> Result<u8, Failure> {
    let mut manifest = RunManifest::start(config);
    let text = read_input(sbt, &mut manifest)?;
    let seqs = read_sbt_file(&text, lang)?;
    let vectors = match backend {
        "tfidf" => embed_tfidf(&seqs),
        "subtree-hash" => seqs
            .par_iter()
            .map(|s| {
                parse_tokens(&s.tokens)
                    .map(|tree| embed_tree_hash(&s.source_id, &tree, depth))
                    .map_err(|e| Failure { code: EXIT_CONFIG, error: anyhow::anyhow!("{}: {e}", s.source_id) })
            })
            .collect::<Result<Vec<_>, _>>()?,
        b => match b.strip_prefix("external:") {
            Some(cmd) => {
                let mut got = external_embed(cmd, &seqs).code(EXIT_PROTOCOL)?;
                let order: BTreeMap<&str, usize> = seqs.iter().enumerate().map(|(i, s)| (s.source_id.as_str(), i)).collect();
                got.retain(|v| order.contains_key(v.id.as_str()));
                got.sort_by_key(|v| order[v.id.as_str()]);
                got
            }
            None => return fail(EXIT_CONFIG, format!("unknown backend `{b}`")),
        },
    };
    write_atomic(out, write_embeddings(&vectors).as_bytes())?;
    manifest.details = json!({ "vectors": vectors.len() });
    manifest.finish(&manifest_path(out), EXIT_OK)?;
    Ok(EXIT_OK)
}

fn cmd_eval(
    config: serde_json::Value,
    manifest_in: &Path,
    embeddings: &Path,
    split: &str,
    r: Option<usize>,
    out: &Path,
) -> Result<u8, Failure> {
    let mut manifest = RunManifest::start(config.clone());
    let set = load_splits(manifest_in, &mut manifest)?;
    let Some(entries) = set.entries(split) else {
        return fail(EXIT_CONFIG, format!("no split named `{split}`"));
    };
    let Some(r) = r.or_else(|| set.test(split).map(|t| t.r)) else {
        return fail(EXIT_CONFIG, format!("split `{split}` has no fixed R; pass --R"));
    };
    let vectors = read_embeddings(&read_input(embeddings, &mut manifest)?).code(EXIT_PROTOCOL)?;
    let labels: BTreeMap<String, String> = entries.iter().map(|e| (e.id.clone(), e.pd.clone())).collect();
    let report = evaluate(&labels, &vectors, r, config).map_err(|e| {
        let code = if matches!(e, EvalError::MissingEmbeddings(_)) { EXIT_PROTOCOL } else { EXIT_CONFIG };
        Failure { code, error: e.into() }
    })?;
    let mut text = report.to_json();
    text.push('\n');
    write_atomic(out, text.as_bytes())?;
    println!("{}", report.summary_line());
    manifest.details = json!({ "map": report.map, "R": r, "n_queries": report.n_queries });
    manifest.finish(&manifest_path(out), EXIT_OK)?;
    Ok(EXIT_OK)
}

fn cmd_random_map(
    config: serde_json::Value,
    pds: usize,
    per_pd: usize,
    r: usize,
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let mut manifest = RunManifest::start(config);
    manifest.seeds.push(seed);
    let res = random_map(pds, per_pd, r, trials, seed).code(EXIT_CONFIG)?;
    println!("MAP@R={:.2} SE={:.3} R={r} PDs={pds} per_pd={per_pd} trials={trials}", res.map, res.std_error);
    if let Some(out) = out {
        let doc = json!({
            "map": res.map, "std_error": res.std_error, "trials": res.trials,
            "pds": pds, "per_pd": per_pd, "R": r, "seed": seed,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        write_atomic(out, text.as_bytes())?;
        manifest.details = doc;
        manifest.finish(&manifest_path(out), EXIT_OK)?;
    }
    Ok(EXIT_OK)
}
