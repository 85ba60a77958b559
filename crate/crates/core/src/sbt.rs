//! Structure-based traversal (SBT) of IR trees.
//!
//! An interior node of kind `K` emits `(K`, then each child wrapped in its
//! role (`(role` child `)role`), then `)K`. A leaf with value `v` emits the
//! three tokens `Open(v) Leaf(v) Close(v)`, rendered as `(v)v`. The compact
//! rendering concatenates the tokens with no separator.
//!
//! Reading the compact form back is ambiguous in principle (leaf values may
//! contain brackets or collide with kind names), so [`parse_sbt`] searches
//! all bracketings and keeps the first one that satisfies the IR schema.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{self, AstNode, CompilationUnit, Edge, Language, NodeKind, RoleLabel};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SbtToken {
    Open(String),
    Close(String),
    Leaf(String),
}

impl SbtToken {
    /// Contribution of this token to the compact rendering. Leaf tokens add
    /// nothing: their value is already spelled by the surrounding pair.
    pub fn render(&self) -> String {
        match self {
            SbtToken::Open(n) => format!("({n}"),
            SbtToken::Close(n) => format!("){n}"),
            SbtToken::Leaf(_) => String::new(),
        }
    }

    /// Vocabulary term for this token (open/close carry their bracket).
    pub fn term(&self) -> String {
        match self {
            SbtToken::Leaf(v) => v.clone(),
            other => other.render(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbtSequence {
    pub source_id: String,
    pub language: Language,
    pub tokens: Vec<SbtToken>,
}

impl SbtSequence {
    pub fn render(&self) -> String {
        render_tokens(&self.tokens)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&JsonSequence::from(self)).expect("token JSON serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, SbtError> {
        let js: JsonSequence = serde_json::from_str(text).map_err(|e| SbtError::Json(e.to_string()))?;
        js.try_into()
    }

    /// Keeps the first `n` tokens. The result is generally unbalanced.
    pub fn truncated(&self, n: usize) -> SbtSequence {
        SbtSequence {
            source_id: self.source_id.clone(),
            language: self.language,
            tokens: self.tokens.iter().take(n).cloned().collect(),
        }
    }
}

impl fmt::Display for SbtSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn render_tokens(tokens: &[SbtToken]) -> String {
    tokens.iter().map(SbtToken::render).collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SbtError {
    #[error("malformed SBT at token {token_index} (byte {offset}): {reason}")]
    Malformed { token_index: usize, offset: usize, reason: String },
    #[error("bad SBT token stream at token {token_index}: {reason}")]
    Tokens { token_index: usize, reason: String },
    #[error("bad SBT JSON: {0}")]
    Json(String),
}

pub fn linearize(cu: &CompilationUnit) -> SbtSequence {
    SbtSequence {
        source_id: cu.source_id.clone(),
        language: cu.language,
        tokens: linearize_node(&cu.root),
    }
}

pub fn linearize_node(node: &AstNode) -> Vec<SbtToken> {
    let mut out = Vec::new();
    emit(node, &mut out);
    out
}

fn emit(node: &AstNode, out: &mut Vec<SbtToken>) {
    if let Some(v) = node.value.as_deref().filter(|_| node.kind.is_leaf()) {
        out.push(SbtToken::Open(v.to_string()));
        out.push(SbtToken::Leaf(v.to_string()));
        out.push(SbtToken::Close(v.to_string()));
        return;
    }
    let name = node.kind.sbt_name();
    out.push(SbtToken::Open(name.to_string()));
    for e in &node.children {
        out.push(SbtToken::Open(e.role.as_str().to_string()));
        emit(&e.node, out);
        out.push(SbtToken::Close(e.role.as_str().to_string()));
    }
    out.push(SbtToken::Close(name.to_string()));
}

/// Compact rendering of a tree.
pub fn render(node: &AstNode) -> String {
    render_tokens(&linearize_node(node))
}

pub fn token_count(seq: &SbtSequence) -> usize {
    seq.tokens.len()
}

/// Strips all whitespace; used to compare renderings with hand-wrapped text.
pub fn squash_whitespace(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Leaf kind implied by the role of its incoming edge and its value.
fn leaf_kind(role: RoleLabel, value: &str) -> NodeKind {
    match role {
        RoleLabel::Operator => NodeKind::Operator,
        RoleLabel::LiName => NodeKind::Ident,
        _ if ir::var_name(value).is_some() => NodeKind::Ident,
        _ => NodeKind::Literal,
    }
}

// ---------------------------------------------------------------------------
// Explicit token stream reader
// ---------------------------------------------------------------------------

/// Rebuilds a tree from an explicit token stream (the JSON form).
pub fn parse_tokens(tokens: &[SbtToken]) -> Result<AstNode, SbtError> {
    let mut pos = 0;
    let node = read_node(tokens, &mut pos, None)?;
    if pos != tokens.len() {
        return Err(SbtError::Tokens { token_index: pos, reason: "trailing tokens after root".into() });
    }
    Ok(node)
}

fn read_node(tokens: &[SbtToken], pos: &mut usize, role: Option<RoleLabel>) -> Result<AstNode, SbtError> {
    let err = |i: usize, reason: String| SbtError::Tokens { token_index: i, reason };
    let open = match tokens.get(*pos) {
        Some(SbtToken::Open(n)) => n.clone(),
        Some(t) => return Err(err(*pos, format!("expected an open token, found {t:?}"))),
        None => return Err(err(*pos, "unexpected end of tokens".into())),
    };
    if let Some(SbtToken::Leaf(v)) = tokens.get(*pos + 1) {
        let role = role.ok_or_else(|| err(*pos, "root cannot be a leaf".into()))?;
        if *v != open {
            return Err(err(*pos + 1, format!("leaf `{v}` inside `{open}`")));
        }
        match tokens.get(*pos + 2) {
            Some(SbtToken::Close(c)) if *c == open => {}
            _ => return Err(err(*pos + 2, format!("leaf `{v}` not closed"))),
        }
        *pos += 3;
        return Ok(AstNode::leaf(leaf_kind(role, v), v.clone()));
    }
    let kind = NodeKind::from_sbt_name(&open).ok_or_else(|| err(*pos, format!("unknown node kind `{open}`")))?;
    *pos += 1;
    let mut node = AstNode::branch(kind);
    loop {
        match tokens.get(*pos) {
            Some(SbtToken::Close(c)) if *c == open => {
                *pos += 1;
                return Ok(node);
            }
            Some(SbtToken::Open(r)) => {
                let child_role: RoleLabel =
                    r.parse().map_err(|_| err(*pos, format!("unknown role `{r}`")))?;
                *pos += 1;
                let child = read_node(tokens, pos, Some(child_role))?;
                match tokens.get(*pos) {
                    Some(SbtToken::Close(c)) if c == r => *pos += 1,
                    _ => return Err(err(*pos, format!("role `{r}` not closed"))),
                }
                node.push(child_role, child);
            }
            Some(t) => return Err(err(*pos, format!("unexpected {t:?} inside `{open}`"))),
            None => return Err(err(*pos, format!("`{open}` not closed"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Compact text reader
// ---------------------------------------------------------------------------

/// Upper bound on partial parses kept per position, so adversarial input
/// cannot blow up the search.
const MAX_ALTERNATIVES: usize = 64;

struct TextReader<'a> {
    text: &'a str,
    furthest: usize,
    /// When false, a leaf value ends at the first `)`.
    exhaustive: bool,
}

type Parses = Vec<(AstNode, usize)>;

impl<'a> TextReader<'a> {
    fn rest(&self, pos: usize) -> &'a str {
        &self.text[pos..]
    }

    fn note(&mut self, pos: usize) {
        self.furthest = self.furthest.max(pos);
    }

    /// Every way to read one node starting at `pos`.
    fn node(&mut self, pos: usize, role: Option<RoleLabel>) -> Parses {
        let mut out = Vec::new();
        if !self.rest(pos).starts_with('(') {
            self.note(pos);
            return out;
        }
        for kind in NodeKind::ALL.iter().copied().filter(|k| !k.is_leaf()) {
            let name = kind.sbt_name();
            let after = pos + 1 + name.len();
            if !self.rest(pos + 1).starts_with(name) {
                continue;
            }
            if !matches!(self.rest(after).chars().next(), Some('(') | Some(')')) {
                continue;
            }
            self.note(after);
            for (children, end) in self.children(after, name) {
                let mut node = AstNode::branch(kind);
                node.children = children;
                out.push((node, end));
                if out.len() >= MAX_ALTERNATIVES {
                    return out;
                }
            }
        }
        if let Some(role) = role {
            out.extend(self.leaves(pos, role));
        }
        out
    }

    /// Leaves `(v)v` at `pos` whose reading is followed by a closing bracket.
    fn leaves(&mut self, pos: usize, role: RoleLabel) -> Parses {
        let mut out = Vec::new();
        let body = self.rest(pos + 1);
        for (idx, ch) in body.char_indices() {
            if ch != ')' || idx == 0 {
                continue;
            }
            let value = &body[..idx];
            let tail = &body[idx + 1..];
            if tail.starts_with(value) && tail[value.len()..].starts_with(')') {
                let end = pos + 1 + idx + 1 + value.len();
                self.note(end);
                out.push((AstNode::leaf(leaf_kind(role, value), value), end));
                if out.len() >= MAX_ALTERNATIVES {
                    break;
                }
            }
            if !self.exhaustive {
                break;
            }
        }
        out
    }

    /// Every way to read the children of a node named `name` up to and
    /// including its closing `)name`.
    fn children(&mut self, pos: usize, name: &str) -> Vec<(Vec<Edge>, usize)> {
        let mut out = Vec::new();
        let close = format!("){name}");
        if self.rest(pos).starts_with(&close) {
            let end = pos + close.len();
            if self.boundary(end) {
                out.push((Vec::new(), end));
            }
        }
        if !self.rest(pos).starts_with('(') {
            self.note(pos);
            return out;
        }
        for role in RoleLabel::ALL {
            let r = role.as_str();
            if !self.rest(pos + 1).starts_with(r) {
                continue;
            }
            let inner = pos + 1 + r.len();
            if !self.rest(inner).starts_with('(') {
                continue;
            }
            self.note(inner);
            let role_close = format!("){r}");
            for (child, child_end) in self.node(inner, Some(role)) {
                if !self.rest(child_end).starts_with(&role_close) {
                    self.note(child_end);
                    continue;
                }
                let after = child_end + role_close.len();
                if !self.boundary(after) {
                    continue;
                }
                for (mut rest, end) in self.children(after, name) {
                    rest.insert(0, Edge { role, node: child.clone() });
                    out.push((rest, end));
                    if out.len() >= MAX_ALTERNATIVES {
                        return out;
                    }
                }
            }
        }
        out
    }

    /// A closing name must be followed by another bracket or the end.
    fn boundary(&self, pos: usize) -> bool {
        matches!(self.rest(pos).chars().next(), None | Some('(') | Some(')'))
    }
}

/// Reads a compact SBT rendering back into a tree.
///
/// Whitespace between tokens is not part of the format; callers holding
/// wrapped text should pass it through [`squash_whitespace`] only if no leaf
/// values contain spaces.
pub fn parse_sbt(text: &str) -> Result<AstNode, SbtError> {
    let mut reader = TextReader { text, furthest: 0, exhaustive: false };
    let mut fallback = None;
    for exhaustive in [false, true] {
        reader.exhaustive = exhaustive;
        let parses: Parses = reader.node(0, None).into_iter().filter(|(_, end)| *end == text.len()).collect();
        if let Some((node, _)) = parses.iter().find(|(n, _)| ir::structurally_valid(n)) {
            return Ok(node.clone());
        }
        if fallback.is_none() {
            fallback = parses.into_iter().next().map(|(n, _)| n);
        }
    }
    if let Some(node) = fallback {
        return Ok(node);
    }
    let offset = reader.furthest.min(text.len());
    let token_index = text[..offset].chars().filter(|c| *c == '(' || *c == ')').count();
    let reason = if text.is_empty() {
        "empty input".to_string()
    } else {
        let opens = text.chars().filter(|c| *c == '(').count();
        let closes = text.chars().filter(|c| *c == ')').count();
        if opens != closes {
            format!("unbalanced brackets ({opens} open, {closes} close)")
        } else {
            "bracket names do not match".to_string()
        }
    };
    Err(SbtError::Malformed { token_index, offset, reason })
}

// ---------------------------------------------------------------------------
// JSON token form
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct JsonToken {
    t: String,
    v: String,
}

#[derive(Serialize, Deserialize)]
struct JsonSequence {
    source_id: String,
    language: Language,
    tokens: Vec<JsonToken>,
}

impl From<&SbtSequence> for JsonSequence {
    fn from(seq: &SbtSequence) -> Self {
        let tokens = seq
            .tokens
            .iter()
            .map(|t| {
                let (t, v) = match t {
                    SbtToken::Open(v) => ("open", v),
                    SbtToken::Close(v) => ("close", v),
                    SbtToken::Leaf(v) => ("leaf", v),
                };
                JsonToken { t: t.into(), v: v.clone() }
            })
            .collect();
        JsonSequence { source_id: seq.source_id.clone(), language: seq.language, tokens }
    }
}

impl TryFrom<JsonSequence> for SbtSequence {
    type Error = SbtError;

    fn try_from(js: JsonSequence) -> Result<Self, Self::Error> {
        let tokens = js
            .tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                if t.v.is_empty() {
                    return Err(SbtError::Tokens { token_index: i, reason: "empty token value".into() });
                }
                match t.t.as_str() {
                    "open" => Ok(SbtToken::Open(t.v)),
                    "close" => Ok(SbtToken::Close(t.v)),
                    "leaf" => Ok(SbtToken::Leaf(t.v)),
                    other => Err(SbtError::Tokens { token_index: i, reason: format!("unknown token type `{other}`") }),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SbtSequence { source_id: js.source_id, language: js.language, tokens })
    }
}

// ---------------------------------------------------------------------------
// .sbt files
// ---------------------------------------------------------------------------

/// One line of an `.sbt` file: `source_id<TAB>rendering`.
pub fn format_line(source_id: &str, rendering: &str) -> String {
    format!("{source_id}\t{rendering}")
}

pub fn parse_line(line: &str) -> Option<(&str, &str)> {
    line.split_once('\t')
}

/// Checks that every close matches the innermost open and leaves sit
/// directly inside their own pair.
pub fn is_balanced(tokens: &[SbtToken]) -> bool {
    let mut stack: Vec<&str> = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        match t {
            SbtToken::Open(n) => stack.push(n),
            SbtToken::Close(n) => {
                if stack.pop() != Some(n.as_str()) {
                    return false;
                }
            }
            SbtToken::Leaf(v) => {
                let inside_own = matches!(tokens.get(i.wrapping_sub(1)), Some(SbtToken::Open(o)) if o == v)
                    && matches!(tokens.get(i + 1), Some(SbtToken::Close(c)) if c == v);
                if !inside_own {
                    return false;
                }
            }
        }
    }
    stack.is_empty()
}
