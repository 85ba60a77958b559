//! Leaf-level transforms applied before linearisation: C→COBOL token
//! mapping and identifier anonymisation.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{var_name, var_rendering, CompilationUnit, Language, NodeKind, RoleLabel, SymbolCategory};

/// The mapping shipped with the crate.
pub const DEFAULT_MAPPING_TSV: &str = include_str!("../data/token_mapping.tsv");

/// Where in the tree a mapping row applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingContext {
    /// `Ident` leaf under `LI_name`.
    CallName,
    /// `Operator` leaf of a `Binary` or `Unary`.
    Operator,
    /// Any `Literal` leaf.
    Literal,
    /// `Literal` leaf passed as a call argument.
    StreamName,
}

impl MappingContext {
    pub fn as_str(self) -> &'static str {
        match self {
            MappingContext::CallName => "call_name",
            MappingContext::Operator => "operator",
            MappingContext::Literal => "literal",
            MappingContext::StreamName => "stream_name",
        }
    }

    fn matches(self, role: Option<RoleLabel>, kind: NodeKind) -> bool {
        match self {
            MappingContext::CallName => role == Some(RoleLabel::LiName) && kind == NodeKind::Ident,
            MappingContext::Operator => role == Some(RoleLabel::Operator) && kind == NodeKind::Operator,
            MappingContext::Literal => kind == NodeKind::Literal,
            MappingContext::StreamName => role == Some(RoleLabel::LiParam) && kind == NodeKind::Literal,
        }
    }
}

impl FromStr for MappingContext {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "call_name" => Ok(MappingContext::CallName),
            "operator" => Ok(MappingContext::Operator),
            "literal" => Ok(MappingContext::Literal),
            "stream_name" => Ok(MappingContext::StreamName),
            other => Err(format!("unknown context `{other}`")),
        }
    }
}

impl fmt::Display for MappingContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row: any of `sources` maps to `targets[0]` in `context`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub context: MappingContext,
    /// Inert rows are kept for reference but never applied.
    pub active: bool,
}

impl MappingEntry {
    pub fn canonical(&self) -> &str {
        &self.targets[0]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMapping {
    entries: Vec<MappingEntry>,
}

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: `{source_token}` in context {context} maps to `{target}`, but line {first_line} maps it to `{first_target}`")]
    Conflict {
        line: usize,
        source_token: String,
        context: MappingContext,
        target: String,
        first_line: usize,
        first_target: String,
    },
    #[error("cannot read mapping file: {0}")]
    Io(#[from] std::io::Error),
}

impl TokenMapping {
    pub fn new() -> Self {
        Self::default()
    }

    /// The mapping shipped with the crate.
    pub fn default_mapping() -> Self {
        Self::parse(DEFAULT_MAPPING_TSV).expect("shipped mapping is valid")
    }

    pub fn entries(&self) -> &[MappingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every source token, in file order.
    pub fn source_tokens(&self) -> Vec<&str> {
        self.entries.iter().flat_map(|e| e.sources.iter().map(String::as_str)).collect()
    }

    /// Canonical target for `token` in `context`, active rows only.
    pub fn lookup(&self, token: &str, context: MappingContext) -> Option<&str> {
        self.entries
            .iter()
            .filter(|e| e.active && e.context == context)
            .find(|e| e.sources.iter().any(|s| s == token))
            .map(|e| e.canonical())
    }

    /// Parses TSV rows `source<TAB>targets<TAB>context[<TAB>active|inert]`.
    pub fn parse(text: &str) -> Result<Self, MappingError> {
        let mut entries = Vec::new();
        let mut seen: HashMap<(String, MappingContext), (usize, String)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| MappingError::Malformed { line, reason: reason.to_string() };
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() < 3 || cols.len() > 4 {
                return Err(malformed("expected 3 or 4 tab-separated columns"));
            }
            let split = |s: &str| -> Vec<String> {
                s.split('|').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
            };
            let sources = split(cols[0]);
            let targets = split(cols[1]);
            if sources.is_empty() {
                return Err(malformed("empty source token"));
            }
            if targets.is_empty() {
                return Err(malformed("empty target token"));
            }
            let context: MappingContext = cols[2].trim().parse().map_err(|e: String| malformed(&e))?;
            let active = match cols.get(3).map(|s| s.trim()) {
                None | Some("active") => true,
                Some("inert") => false,
                Some(other) => return Err(malformed(&format!("unknown status `{other}`"))),
            };
            for s in &sources {
                match seen.get(&(s.clone(), context)) {
                    Some((first_line, first_target)) if *first_target != targets[0] => {
                        return Err(MappingError::Conflict {
                            line,
                            source_token: s.clone(),
                            context,
                            target: targets[0].clone(),
                            first_line: *first_line,
                            first_target: first_target.clone(),
                        });
                    }
                    Some(_) => {}
                    None => {
                        seen.insert((s.clone(), context), (line, targets[0].clone()));
                    }
                }
            }
            entries.push(MappingEntry { sources, targets, context, active });
        }
        Ok(TokenMapping { entries })
    }

    pub fn load(path: &Path) -> Result<Self, MappingError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# C token\tCOBOL token(s)\tcontext\tstatus\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.sources.join("|"),
                e.targets.join("|"),
                e.context,
                if e.active { "active" } else { "inert" }
            ));
        }
        out
    }
}

/// Replaces mapped leaf values by their canonical COBOL token.
///
/// Callee renames are mirrored in the symbol table so call names keep
/// resolving; two callees mapped to one target share a single symbol.
pub fn apply_mapping(cu: &CompilationUnit, m: &TokenMapping) -> CompilationUnit {
    let mut out = cu.clone();
    let mut renamed_calls: HashMap<String, String> = HashMap::new();
    out.root.map_leaves(&mut |role, kind, value| {
        let context = [MappingContext::CallName, MappingContext::Operator, MappingContext::StreamName, MappingContext::Literal]
            .into_iter()
            .filter(|c| c.matches(role, kind))
            .find_map(|c| m.lookup(value, c).map(|t| (c, t)));
        let (context, target) = context?;
        if target == value {
            return None;
        }
        if context == MappingContext::CallName {
            renamed_calls.insert(value.to_string(), target.to_string());
        }
        Some(target.to_string())
    });
    if !renamed_calls.is_empty() {
        for s in out.symbols.iter_mut() {
            if s.category == SymbolCategory::Function {
                if let Some(t) = renamed_calls.get(&s.name) {
                    s.name = t.clone();
                }
            }
        }
        out.symbols.dedup();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenameCategory {
    Variable,
    Function,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rename {
    pub original: String,
    pub generic: String,
    pub category: RenameCategory,
}

/// Original → generic names produced by [`anonymize`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameLedger {
    pub pairs: Vec<Rename>,
}

impl RenameLedger {
    pub fn generic_for(&self, original: &str, category: RenameCategory) -> Option<&str> {
        self.pairs
            .iter()
            .find(|r| r.original == original && r.category == category)
            .map(|r| r.generic.as_str())
    }

    pub fn original_for(&self, generic: &str) -> Option<&str> {
        self.pairs.iter().find(|r| r.generic == generic).map(|r| r.original.as_str())
    }

    /// Originals distinct and generics distinct.
    pub fn is_bijection(&self) -> bool {
        let originals: HashSet<_> = self.pairs.iter().map(|r| (&r.original, r.category)).collect();
        let generics: HashSet<_> = self.pairs.iter().map(|r| &r.generic).collect();
        originals.len() == self.pairs.len() && generics.len() == self.pairs.len()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Library routines, COBOL verbs and intrinsics, and every mapping token.
/// Call names in this list are never renamed.
const BUILTIN_CALLS: &[&str] = &[
    // C library
    "main", "exit", "abort", "atexit", "printf", "scanf", "puts", "gets", "fgets", "fputs", "putchar", "getchar",
    "fprintf", "fscanf", "sprintf", "snprintf", "sscanf", "fopen", "fclose", "fread", "fwrite", "fflush", "fgetc",
    "fputc", "getc", "putc", "ungetc", "feof", "ferror", "perror", "remove", "rename", "malloc", "calloc", "realloc",
    "free", "atoi", "atol", "atoll", "atof", "strtol", "strtoll", "strtoul", "strtoull", "strtod", "abs", "labs",
    "llabs", "div", "rand", "srand", "qsort", "bsearch", "lsearch", "strlen", "strcpy", "strncpy", "strcat", "strncat",
    "strcmp", "strncmp", "strchr", "strrchr", "strstr", "strtok", "strspn", "strcspn", "strdup", "memset", "memcpy",
    "memmove", "memcmp", "memchr", "isdigit", "isalpha", "isalnum", "isspace", "isupper", "islower", "ispunct",
    "isprint", "isxdigit", "toupper", "tolower", "sqrt", "sqrtl", "pow", "powl", "fabs", "floor", "ceil", "round",
    "lround", "llround", "trunc", "fmod", "exp", "log", "log10", "log2", "sin", "cos", "tan", "asin", "acos", "atan",
    "atan2", "sinh", "cosh", "tanh", "hypot", "fmax", "fmin", "time", "clock", "assert",
    // COBOL statements lowered to calls
    "ACCEPT", "DISPLAY", "INITIALIZE", "ROUNDED",
    // COBOL intrinsic functions
    "ABS", "ACOS", "ANNUITY", "ASIN", "ATAN", "CHAR", "COS", "CURRENT-DATE", "DATE-OF-INTEGER", "DAY-OF-INTEGER",
    "E", "EXP", "EXP10", "FACTORIAL", "FRACTION-PART", "INTEGER", "INTEGER-OF-DATE", "INTEGER-OF-DAY",
    "INTEGER-PART", "LENGTH", "LOG", "LOG10", "LOWER-CASE", "MAX", "MEAN", "MEDIAN", "MIDRANGE", "MIN", "MOD",
    "NUMVAL", "NUMVAL-C", "ORD", "ORD-MAX", "ORD-MIN", "PI", "PRESENT-VALUE", "RANDOM", "RANGE", "REM", "REVERSE",
    "SIGN", "SIN", "SQRT", "STANDARD-DEVIATION", "SUM", "TAN", "TRIM", "UPPER-CASE", "VARIANCE", "WHEN-COMPILED",
    "STORED-CHAR-LENGTH", "CONCATENATE", "SUBSTITUTE",
];

fn is_builtin_call(name: &str, extra: &HashSet<String>) -> bool {
    BUILTIN_CALLS.contains(&name) || extra.contains(name)
}

/// Renames user-defined variables to `VAR1, VAR2, …` and user-defined
/// functions to `FUNC1, FUNC2, …`, numbered in symbol table order, which is
/// the order of first appearance in the source. Names found only in the tree
/// follow in pre-order. A generic name already used in the unit is skipped.
pub fn anonymize(cu: &CompilationUnit) -> (CompilationUnit, RenameLedger) {
    let mapping_tokens: HashSet<String> = TokenMapping::default_mapping()
        .entries()
        .iter()
        .flat_map(|e| e.sources.iter().chain(e.targets.iter()).cloned())
        .collect();

    let mut taken: BTreeSet<String> = cu.symbols.iter().map(|s| s.name.clone()).collect();
    cu.root.walk(&mut |_, n| {
        if let Some(v) = n.value() {
            taken.insert(var_name(v).unwrap_or(v).to_string());
        }
    });

    // first-occurrence order of renameable names
    let mut order: Vec<(String, RenameCategory)> = Vec::new();
    let mut seen: HashSet<(String, RenameCategory)> = HashSet::new();
    let mut note = |name: &str, cat: RenameCategory, order: &mut Vec<(String, RenameCategory)>| {
        if seen.insert((name.to_string(), cat)) {
            order.push((name.to_string(), cat));
        }
    };
    for s in cu.symbols.iter() {
        match s.category {
            SymbolCategory::Variable => note(&s.name, RenameCategory::Variable, &mut order),
            SymbolCategory::Function if !is_builtin_call(&s.name, &mapping_tokens) => {
                note(&s.name, RenameCategory::Function, &mut order)
            }
            _ => {}
        }
    }

    cu.root.walk(&mut |role, n| {
        if n.kind != NodeKind::Ident {
            return;
        }
        let v = n.value().unwrap_or_default();
        if role == Some(RoleLabel::LiName) {
            if !is_builtin_call(v, &mapping_tokens) {
                note(v, RenameCategory::Function, &mut order);
            }
        } else if let Some(name) = var_name(v) {
            note(name, RenameCategory::Variable, &mut order);
        }
    });
    let mut ledger = RenameLedger::default();
    let (mut next_var, mut next_func) = (1usize, 1usize);
    for (name, cat) in order {
        let (prefix, counter) = match cat {
            RenameCategory::Variable => ("VAR", &mut next_var),
            RenameCategory::Function => ("FUNC", &mut next_func),
        };
        let generic = loop {
            let candidate = format!("{prefix}{counter}");
            *counter += 1;
            if !taken.contains(&candidate) {
                break candidate;
            }
        };
        ledger.pairs.push(Rename { original: name, generic, category: cat });
    }

    let vars: HashMap<&str, &str> = ledger
        .pairs
        .iter()
        .filter(|r| r.category == RenameCategory::Variable)
        .map(|r| (r.original.as_str(), r.generic.as_str()))
        .collect();
    let funcs: HashMap<&str, &str> = ledger
        .pairs
        .iter()
        .filter(|r| r.category == RenameCategory::Function)
        .map(|r| (r.original.as_str(), r.generic.as_str()))
        .collect();

    let mut out = cu.clone();
    out.root.map_leaves(&mut |role, kind, value| {
        if kind != NodeKind::Ident {
            return None;
        }
        if role == Some(RoleLabel::LiName) {
            funcs.get(value).map(|g| g.to_string())
        } else {
            var_name(value).and_then(|n| vars.get(n)).map(|g| var_rendering(g))
        }
    });
    for s in out.symbols.iter_mut() {
        let table = match s.category {
            SymbolCategory::Variable => &vars,
            SymbolCategory::Function => &funcs,
            _ => continue,
        };
        if let Some(g) = table.get(s.name.as_str()) {
            s.name = g.to_string();
        }
    }
    (out, ledger)
}

/// Options for [`normalize`].
#[derive(Debug, Clone, Default)]
pub struct NormalizeOptions {
    pub anonymize: bool,
    /// Applied to C units only.
    pub mapping: Option<TokenMapping>,
}

/// Anonymisation (optional) followed by token mapping (C units only).
pub fn normalize(cu: &CompilationUnit, opts: &NormalizeOptions) -> (CompilationUnit, Option<RenameLedger>) {
    let (mut out, ledger) = if opts.anonymize {
        let (u, l) = anonymize(cu);
        (u, Some(l))
    } else {
        (cu.clone(), None)
    };
    if let (Some(m), Language::C) = (&opts.mapping, out.language) {
        out = apply_mapping(&out, m);
    }
    (out, ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{c::parse_c, SourceFile};
    use crate::ir::{census, validate};

    fn c(text: &str) -> CompilationUnit {
        parse_c(&SourceFile::new("t.c", text)).unwrap()
    }

    #[test]
    fn default_mapping_rows() {
        let m = TokenMapping::default_mapping();
        assert_eq!(m.len(), 16);
        assert_eq!(m.lookup("scanf", MappingContext::CallName), Some("ACCEPT"));
        assert_eq!(m.lookup("strlen", MappingContext::CallName), Some("LENGTH OF"));
        assert_eq!(m.lookup("%", MappingContext::Operator), Some("REM"));
        assert_eq!(m.lookup("bsearch", MappingContext::CallName), Some("SEARCH"));
        assert_eq!(m.lookup("=", MappingContext::Operator), None, "inert row");
        assert_eq!(TokenMapping::parse(&m.to_tsv()).unwrap(), m);
    }

    #[test]
    fn conflicting_rows_are_rejected() {
        let err = TokenMapping::parse("scanf\tACCEPT\tcall_name\nscanf\tREAD\tcall_name\n").unwrap_err();
        assert!(matches!(err, MappingError::Conflict { line: 2, first_line: 1, .. }), "{err}");
        assert!(TokenMapping::parse("scanf\tACCEPT\tcall_name\nscanf\tACCEPT\tcall_name\n").is_ok());
        let err = TokenMapping::parse("# c\nscanf\tACCEPT\n").unwrap_err();
        assert!(matches!(err, MappingError::Malformed { line: 2, .. }));
        assert!(TokenMapping::parse("").unwrap().is_empty());
    }

    #[test]
    fn mapping_renames_calls_and_symbols() {
        let cu = c("int main(){ int n; scanf(\"%d\", &n); printf(\"%d\", n % 2); n = bsearch(0); n = lsearch(1); return 0; }");
        let m = apply_mapping(&cu, &TokenMapping::default_mapping());
        assert!(validate(&m).is_empty(), "{:?}", validate(&m));
        let text = crate::sbt::render(&m.root);
        assert!(text.contains("(ACCEPT)ACCEPT") && text.contains("(DISPLAY)DISPLAY"));
        assert!(text.contains("(REM)REM") && !text.contains("(%)%"));
        assert_eq!(census(&m.root), census(&cu.root));
        assert_eq!(apply_mapping(&m, &TokenMapping::default_mapping()), m);
        assert_eq!(apply_mapping(&cu, &TokenMapping::new()), cu);
    }

    #[test]
    fn stream_names_map_only_as_arguments() {
        let cu = c("int main(){ char s[10]; fgets(s, 10, stdin); return 0; }");
        let m = apply_mapping(&cu, &TokenMapping::default_mapping());
        assert!(crate::sbt::render(&m.root).contains("(LI_param(CONSOLE)CONSOLE)LI_param"));
    }

    #[test]
    fn two_variables_in_order() {
        let cu = c("int main(){ int x; int y; y = 1; x = y; return x; }");
        let (a, ledger) = anonymize(&cu);
        assert_eq!(ledger.generic_for("x", RenameCategory::Variable), Some("VAR1"));
        assert_eq!(ledger.generic_for("y", RenameCategory::Variable), Some("VAR2"));
        assert!(validate(&a).is_empty());
        let text = crate::sbt::render(&a.root);
        assert!(!text.contains("Var[x]") && !text.contains("Var[y]"));
    }

    #[test]
    fn functions_and_builtins() {
        let cu = c("int sq(int v){ return v * v; } int main(){ int a; scanf(\"%d\", &a); printf(\"%d\", sq(a)); exit(0); }");
        let (a, ledger) = anonymize(&cu);
        assert_eq!(ledger.generic_for("sq", RenameCategory::Function), Some("FUNC1"));
        assert_eq!(ledger.generic_for("scanf", RenameCategory::Function), None);
        assert!(validate(&a).is_empty(), "{:?}", validate(&a));
        let text = crate::sbt::render(&a.root);
        assert!(text.contains("(FUNC1)FUNC1") && text.contains("(scanf)scanf") && text.contains("(exit)exit"));
    }

    #[test]
    fn generic_collisions_are_skipped() {
        let cu = c("int main(){ int VAR1; int x; x = VAR1; return 0; }");
        let (_, ledger) = anonymize(&cu);
        assert!(ledger.is_bijection());
        assert_eq!(ledger.generic_for("VAR1", RenameCategory::Variable), Some("VAR2"));
        assert_eq!(ledger.generic_for("x", RenameCategory::Variable), Some("VAR3"));
    }

    #[test]
    fn no_identifiers_is_identity() {
        let cu = c("int main(){ printf(\"hi\"); return 0; }");
        let (a, ledger) = anonymize(&cu);
        assert!(ledger.is_empty());
        assert_eq!(a, cu);
    }
}
