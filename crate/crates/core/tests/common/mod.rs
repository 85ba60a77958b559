//! Random generators shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use irclone::dataset::{ProblemDescription, SplitSpec, Submission, TestSpec};
use irclone::frontend::{language_for_path, parse, SourceFile};
use irclone::ir::{
    census, ident_occurrences, validate, var_name, AstNode, CompilationUnit, Language, NodeKind, RoleLabel,
    SymbolCategory, SymbolTable,
};
use irclone::normalize::anonymize;
use irclone::similarity::EmbeddingVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const VARS: &[&str] = &["x", "y", "cnt", "a_b", "VAR1", "n2", "WS-TOTAL"];
const FUNCS: &[&str] = &["foo", "bar", "printf", "ACCEPT", "exit"];
const LITERALS: &[&str] = &["0", "30", "3.14", "Yes", "%d\\n", "\"\"", "a b", "(", ")", "x)y", "()", "Less Than", "''"];
const OPERATORS: &[&str] = &["+", "-", "*", "Greater Than Equals", "(", "address of", "%", "=", "**", "Not"];

pub struct TreeGen<'a, R: Rng> {
    pub rng: &'a mut R,
    pub symbols: SymbolTable,
    budget: usize,
}

impl<'a, R: Rng> TreeGen<'a, R> {
    pub fn new(rng: &'a mut R, budget: usize) -> Self {
        TreeGen { rng, symbols: SymbolTable::new(), budget }
    }

    fn spend(&mut self) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        true
    }

    fn pick(&mut self, pool: &[&str]) -> String {
        pool.choose(self.rng).unwrap().to_string()
    }

    pub fn var(&mut self) -> AstNode {
        let name = self.pick(VARS);
        self.symbols.intern(&name, SymbolCategory::Variable);
        AstNode::var(&name)
    }

    pub fn expr(&mut self, depth: usize) -> AstNode {
        let leafy = depth == 0 || !self.spend();
        let choice = if leafy { self.rng.gen_range(0..2) } else { self.rng.gen_range(0..6) };
        match choice {
            0 => self.var(),
            1 => AstNode::literal(self.pick(LITERALS)),
            2 | 3 => {
                let (l, r) = if self.rng.gen_bool(0.5) {
                    (RoleLabel::BExpr1, RoleLabel::BExpr2)
                } else {
                    (RoleLabel::LhsExpr, RoleLabel::RhsExpr)
                };
                let op = AstNode::operator(self.pick(OPERATORS));
                let a = self.expr(depth - 1);
                let b = self.expr(depth - 1);
                AstNode::branch(NodeKind::Binary).with(RoleLabel::Operator, op).with(l, a).with(r, b)
            }
            4 => {
                let op = AstNode::operator(self.pick(OPERATORS));
                let a = self.expr(depth - 1);
                AstNode::branch(NodeKind::Unary).with(RoleLabel::Operator, op).with(RoleLabel::UExpr, a)
            }
            _ => {
                let name = self.pick(FUNCS);
                self.symbols.intern(&name, SymbolCategory::Function);
                let mut call = AstNode::branch(NodeKind::Call).with(RoleLabel::LiName, AstNode::leaf(NodeKind::Ident, name));
                for _ in 0..self.rng.gen_range(0..3) {
                    let p = self.expr(depth - 1);
                    call.push(RoleLabel::LiParam, p);
                }
                call
            }
        }
    }

    fn expr_stmt(&mut self, depth: usize) -> AstNode {
        let e = self.expr(depth);
        AstNode::branch(NodeKind::Exprstmt).with(RoleLabel::HasExpr, e)
    }

    pub fn compound(&mut self, depth: usize) -> AstNode {
        let mut c = AstNode::branch(NodeKind::Compstmt);
        for _ in 0..self.rng.gen_range(0..4) {
            let s = self.stmt(depth);
            c.push(RoleLabel::HasStmt, s);
        }
        c
    }

    pub fn stmt(&mut self, depth: usize) -> AstNode {
        if depth == 0 || !self.spend() {
            return if self.rng.gen_bool(0.8) { self.expr_stmt(1) } else { AstNode::branch(NodeKind::Label) };
        }
        match self.rng.gen_range(0..9) {
            0 => self.compound(depth - 1),
            1 => {
                let c = self.compound(depth - 1);
                AstNode::branch(NodeKind::Block).with(RoleLabel::HasStmt, c)
            }
            2 => self.expr_stmt(depth),
            3 => {
                let mut n = AstNode::branch(NodeKind::Ifthen)
                    .with(RoleLabel::CondExpr, self.expr(depth - 1))
                    .with(RoleLabel::ThenStmt, self.stmt(depth - 1));
                if self.rng.gen_bool(0.5) {
                    let e = self.stmt(depth - 1);
                    n.push(RoleLabel::ElseStmt, e);
                }
                n
            }
            4 => AstNode::branch(NodeKind::Whilestmt)
                .with(RoleLabel::CondExpr, self.expr(depth - 1))
                .with(RoleLabel::BodyStmt, self.stmt(depth - 1)),
            5 => {
                let mut n = AstNode::branch(NodeKind::Forstmt);
                if self.rng.gen_bool(0.5) {
                    let s = self.expr_stmt(depth - 1);
                    n.push(RoleLabel::InitStmt, s);
                }
                if self.rng.gen_bool(0.5) {
                    let e = self.expr(depth - 1);
                    n.push(RoleLabel::CondExpr, e);
                }
                if self.rng.gen_bool(0.5) {
                    let s = self.expr_stmt(depth - 1);
                    n.push(RoleLabel::IncrStmt, s);
                }
                let body = self.stmt(depth - 1);
                n.with(RoleLabel::BodyStmt, body)
            }
            6 => {
                let mut n = AstNode::branch(NodeKind::Returnstmt);
                if self.rng.gen_bool(0.7) {
                    let e = self.expr(depth - 1);
                    n.push(RoleLabel::ReturnExpr, e);
                }
                n
            }
            7 => {
                let mut n = AstNode::branch(NodeKind::Decl);
                for _ in 0..self.rng.gen_range(1..3) {
                    let e = if self.rng.gen_bool(0.5) {
                        self.var()
                    } else {
                        let (v, x) = (self.var(), self.expr(depth - 1));
                        AstNode::branch(NodeKind::Binary)
                            .with(RoleLabel::Operator, AstNode::operator("="))
                            .with(RoleLabel::LhsExpr, v)
                            .with(RoleLabel::RhsExpr, x)
                    };
                    n.push(RoleLabel::HasExpr, e);
                }
                n
            }
            _ => AstNode::branch(NodeKind::Label),
        }
    }

    pub fn unit(mut self, id: &str) -> CompilationUnit {
        let mut root = AstNode::branch(NodeKind::CompUnit);
        for _ in 0..self.rng.gen_range(0..4) {
            if self.rng.gen_bool(0.3) {
                let s = self.expr_stmt(2);
                root.push(RoleLabel::HasStmt, s);
            } else {
                let body = if self.rng.gen_bool(0.5) {
                    let c = self.compound(4);
                    AstNode::branch(NodeKind::Block).with(RoleLabel::HasStmt, c)
                } else {
                    self.compound(4)
                };
                root.push(RoleLabel::HasDirective, AstNode::branch(NodeKind::Func).with(RoleLabel::HasStmt, body));
            }
        }
        let lang = if self.rng.gen_bool(0.5) { Language::C } else { Language::Cobol };
        CompilationUnit::new(lang, id, root, self.symbols)
    }
}

/// A random schema-valid unit of at most about `budget` interior nodes.
pub fn random_unit(rng: &mut impl Rng, budget: usize, id: &str) -> CompilationUnit {
    TreeGen::new(rng, budget).unit(id)
}

/// Source text of a random C program inside the supported subset.
pub fn random_c_program(rng: &mut impl Rng) -> String {
    const NAMES: &[&str] = &["a", "b", "count", "total", "i", "VAR2", "FUNC1", "tmp", "x1"];
    let mut out = String::from("#include <stdio.h>\n");
    let mut funcs: Vec<String> = Vec::new();
    for f in 0..rng.gen_range(0..3) {
        let name = format!("helper{f}");
        let param = *NAMES.choose(rng).unwrap();
        let other = *NAMES.choose(rng).unwrap();
        out.push_str(&format!("int {name}(int {param}) {{\n"));
        if other != param {
            out.push_str(&format!("    int {other};\n    {other} = {param} * 2;\n    return {other} + 1;\n"));
        } else {
            out.push_str(&format!("    return {param} - 1;\n"));
        }
        out.push_str("}\n");
        funcs.push(name);
    }
    let k = rng.gen_range(1..5);
    let mut vars: Vec<&str> = NAMES.choose_multiple(rng, k).copied().collect();
    vars.sort();
    vars.dedup();
    out.push_str("int main() {\n");
    for v in &vars {
        out.push_str(&format!("    int {v};\n"));
    }
    for _ in 0..rng.gen_range(1..8) {
        let v = *vars.choose(rng).unwrap();
        let w = *vars.choose(rng).unwrap();
        let line = match rng.gen_range(0..7) {
            0 => format!("scanf(\"%d\", &{v});"),
            1 => format!("printf(\"%d\\n\", {v} + {w});"),
            2 => format!("{v} = {w} % 7;"),
            3 => format!("if ({v} > {w}) {{ {v} = {w}; }} else {{ {w} = {v}; }}"),
            4 => format!("while ({v} < 10) {{ {v}++; }}"),
            5 if !funcs.is_empty() => format!("{v} = {}({w});", funcs.choose(rng).unwrap()),
            _ => format!("for ({v} = 0; {v} < {w}; {v}++) {{ {w} = {w} + {v}; }}"),
        };
        out.push_str("    ");
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("    return 0;\n}\n");
    out
}

/// The core crate's fixture directory, from either crate's tests.
pub fn fixtures_dir() -> PathBuf {
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let own = here.join("fixtures");
    if own.is_dir() {
        own
    } else {
        here.join("../core/fixtures")
    }
}

/// Checks that anonymising `cu` renames consistently: the ledger is a
/// bijection, Ident occurrences map one-to-one and the census is unchanged.
pub fn anonymization_violation(cu: &CompilationUnit) -> Option<String> {
    let (anon, ledger) = anonymize(cu);
    if !ledger.is_bijection() {
        return Some("ledger is not a bijection".into());
    }
    if !validate(&anon).is_empty() {
        return Some(format!("invalid output: {:?}", validate(&anon)));
    }
    if census(&cu.root) != census(&anon.root) {
        return Some("census changed".into());
    }
    let before = ident_occurrences(cu);
    let after = ident_occurrences(&anon);
    if before.len() != after.len() {
        return Some("occurrence count changed".into());
    }
    let mut fwd: HashMap<&str, &str> = HashMap::new();
    let mut back: HashMap<&str, &str> = HashMap::new();
    for ((o, _), (g, _)) in before.iter().zip(&after) {
        if *fwd.entry(o).or_insert(g) != g.as_str() {
            return Some(format!("{o} renamed two ways"));
        }
        if *back.entry(g).or_insert(o) != o.as_str() {
            return Some(format!("{g} stands for two names"));
        }
    }
    for (g, _) in &after {
        if var_name(g).is_some_and(|n| !n.starts_with("VAR")) {
            return Some(format!("{g} left unrenamed"));
        }
    }
    None
}

pub fn fixture_units() -> Vec<CompilationUnit> {
    let root = fixtures_dir();
    let mut paths: Vec<PathBuf> = vec![root.join("threshold.c"), root.join("threshold.cob")];
    let mut paired: Vec<PathBuf> =
        std::fs::read_dir(root.join("paired")).unwrap().map(|e| e.unwrap().path()).collect();
    paired.sort();
    paths.extend(paired);
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).unwrap();
            parse(language_for_path(p).unwrap(), &SourceFile::new(p.to_string_lossy(), text)).unwrap()
        })
        .collect()
}

pub fn random_corpus(r: &mut ChaCha8Rng) -> (Vec<ProblemDescription>, Vec<ProblemDescription>) {
    let n = r.gen_range(4..14);
    let mut c = Vec::new();
    let mut cobol = Vec::new();
    for p in 0..n {
        let pd_id = format!("p{p:03}");
        let mk = |lang: Language, k: usize| -> Vec<Submission> {
            (0..k)
                .map(|j| Submission {
                    source_id: format!("{pd_id}_{}_{j}", lang.as_str()),
                    language: lang,
                    accepted: true,
                    path: PathBuf::new(),
                    sbt_tokens: Some(100 + j * 200),
                })
                .collect()
        };
        c.push(ProblemDescription { pd_id: pd_id.clone(), description_present: true, submissions: mk(Language::C, r.gen_range(3..7)) });
        if r.gen_bool(0.6) {
            cobol.push(ProblemDescription {
                pd_id: pd_id.clone(),
                description_present: true,
                submissions: mk(Language::Cobol, r.gen_range(2..5)),
            });
        }
    }
    if cobol.is_empty() {
        let s = c[0].submissions.iter().map(|s| Submission { language: Language::Cobol, ..s.clone() }).collect();
        cobol.push(ProblemDescription { submissions: s, ..c[0].clone() });
    }
    (c, cobol)
}

pub fn small_spec(seed: u64) -> SplitSpec {
    SplitSpec {
        seed,
        train_val_ratio: 0.75,
        max_token_len: None,
        tests: vec![
            TestSpec::new("cobol-3", Language::Cobol, 3, None),
            TestSpec::new("cobol-2", Language::Cobol, 2, Some(512)),
            TestSpec::new("c-3", Language::C, 3, None),
            TestSpec::new("c-2", Language::C, 2, Some(512)),
        ],
    }
}

pub fn naive_ap(query: &str, labels: &BTreeMap<String, String>, scores: &HashMap<(String, String), f64>, r: usize) -> f64 {
    let mut others: Vec<&String> = labels.keys().filter(|k| k.as_str() != query).collect();
    let mut ranked = Vec::new();
    while ranked.len() < r {
        let mut best = 0;
        for j in 1..others.len() {
            let (sj, sb) = (scores[&(query.to_string(), others[j].clone())], scores[&(query.to_string(), others[best].clone())]);
            if sj > sb || (sj == sb && others[j] < others[best]) {
                best = j;
            }
        }
        ranked.push(others.remove(best));
    }
    let mut total = 0.0;
    for i in 0..r {
        if labels[ranked[i]] == labels[query] {
            let prefix = ranked[..=i].iter().filter(|id| labels[**id] == labels[query]).count();
            total += prefix as f64 / (i + 1) as f64;
        }
    }
    total / r as f64
}

pub fn random_instance(r: &mut ChaCha8Rng) -> (BTreeMap<String, String>, Vec<EmbeddingVector>, usize) {
    let pds = r.gen_range(2..=6);
    let codes = r.gen_range(2..=5);
    let dim = r.gen_range(1..4);
    let mut labels = BTreeMap::new();
    let mut vecs = Vec::new();
    for p in 0..pds {
        for c in 0..codes {
            let id = format!("q{p}_{c}");
            let v: Vec<f64> = (0..dim).map(|_| r.gen_range(0..3) as f64 + 0.5 * r.gen_range(0..2) as f64).collect();
            labels.insert(id.clone(), format!("pd{p}"));
            vecs.push(EmbeddingVector::from_dense(id, &v));
        }
    }
    (labels, vecs, codes - 1)
}

/// Exact expected MAP (as a percentage) of random rankings when every PD
/// holds `r + 1` codes.
pub fn exact_random_map(n_pds: usize, r: usize) -> f64 {
    let n = (n_pds * (r + 1)) as f64;
    let rf = r as f64;
    let p = rf / (n - 1.0);
    let q = if n > 2.0 { (rf - 1.0) / (n - 2.0) } else { 0.0 };
    let s: f64 = (1..=r).map(|i| (p + (i as f64 - 1.0) * p * q) / i as f64).sum();
    s / rf * 100.0
}

