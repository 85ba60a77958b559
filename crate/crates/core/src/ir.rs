//! Shared intermediate representation for C and COBOL programs.
//!
//! A program is a [`CompilationUnit`]: an abstract syntax tree whose edges are
//! labelled with a [`RoleLabel`], plus a symbol table. Both front-ends build
//! instances of the same closed set of [`NodeKind`]s, so equivalent programs
//! in the two languages end up with aligned trees.
//!
//! Leaf nodes (`Ident`, `Literal`, `Operator`) carry their rendered value:
//! variables are rendered `Var[name]`, the callee under `LI_name` is the bare
//! function name, literals keep their text with quotes stripped and operators
//! use a spelled-out name such as `Greater Than Equals`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    CompUnit,
    Func,
    Block,
    Compstmt,
    Exprstmt,
    Ifthen,
    Whilestmt,
    Forstmt,
    Returnstmt,
    Binary,
    Unary,
    Call,
    Ident,
    Literal,
    Operator,
    Decl,
    Label,
}

impl NodeKind {
    pub const ALL: [NodeKind; 17] = [
        NodeKind::CompUnit,
        NodeKind::Func,
        NodeKind::Block,
        NodeKind::Compstmt,
        NodeKind::Exprstmt,
        NodeKind::Ifthen,
        NodeKind::Whilestmt,
        NodeKind::Forstmt,
        NodeKind::Returnstmt,
        NodeKind::Binary,
        NodeKind::Unary,
        NodeKind::Call,
        NodeKind::Ident,
        NodeKind::Literal,
        NodeKind::Operator,
        NodeKind::Decl,
        NodeKind::Label,
    ];

    /// Kinds that carry a value and never have children.
    pub fn is_leaf(self) -> bool {
        matches!(self, NodeKind::Ident | NodeKind::Literal | NodeKind::Operator)
    }

    pub fn is_statement(self) -> bool {
        STATEMENTS.contains(&self)
    }

    pub fn is_expression(self) -> bool {
        EXPRESSIONS.contains(&self)
    }

    /// Identifier used for this kind in the JSON interchange format.
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::CompUnit => "CompUnit",
            NodeKind::Func => "Func",
            NodeKind::Block => "Block",
            NodeKind::Compstmt => "Compstmt",
            NodeKind::Exprstmt => "Exprstmt",
            NodeKind::Ifthen => "Ifthen",
            NodeKind::Whilestmt => "Whilestmt",
            NodeKind::Forstmt => "Forstmt",
            NodeKind::Returnstmt => "Returnstmt",
            NodeKind::Binary => "Binary",
            NodeKind::Unary => "Unary",
            NodeKind::Call => "Call",
            NodeKind::Ident => "Ident",
            NodeKind::Literal => "Literal",
            NodeKind::Operator => "Operator",
            NodeKind::Decl => "Decl",
            NodeKind::Label => "Label",
        }
    }

    /// Name emitted in SBT wrappers. Only `Func` differs from [`as_str`](Self::as_str).
    pub fn sbt_name(self) -> &'static str {
        match self {
            NodeKind::Func => "Func_name",
            other => other.as_str(),
        }
    }

    pub fn from_sbt_name(name: &str) -> Option<NodeKind> {
        NodeKind::ALL
            .iter()
            .copied()
            .find(|k| !k.is_leaf() && k.sbt_name() == name)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = IrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| IrError::UnknownName(s.to_string()))
    }
}

const STATEMENTS: &[NodeKind] = &[
    NodeKind::Block,
    NodeKind::Compstmt,
    NodeKind::Exprstmt,
    NodeKind::Ifthen,
    NodeKind::Whilestmt,
    NodeKind::Forstmt,
    NodeKind::Returnstmt,
    NodeKind::Decl,
    NodeKind::Label,
];

const EXPRESSIONS: &[NodeKind] = &[
    NodeKind::Binary,
    NodeKind::Unary,
    NodeKind::Call,
    NodeKind::Ident,
    NodeKind::Literal,
];

/// Label on a parent to child edge.
///
/// `Operator` attaches the operator leaf of a `Binary` or `Unary` node; it
/// renders as the `(Operator ... )Operator` wrapper seen in SBT output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RoleLabel {
    #[serde(rename = "has_directive")]
    HasDirective,
    #[serde(rename = "has_stmt")]
    HasStmt,
    #[serde(rename = "has_expr")]
    HasExpr,
    #[serde(rename = "cond_expr")]
    CondExpr,
    #[serde(rename = "then_stmt")]
    ThenStmt,
    #[serde(rename = "else_stmt")]
    ElseStmt,
    #[serde(rename = "init_stmt")]
    InitStmt,
    #[serde(rename = "incr_stmt")]
    IncrStmt,
    #[serde(rename = "body_stmt")]
    BodyStmt,
    #[serde(rename = "B_expr1")]
    BExpr1,
    #[serde(rename = "B_expr2")]
    BExpr2,
    #[serde(rename = "U_expr")]
    UExpr,
    #[serde(rename = "LHS_expr")]
    LhsExpr,
    #[serde(rename = "RHS_expr")]
    RhsExpr,
    #[serde(rename = "LI_name")]
    LiName,
    #[serde(rename = "LI_param")]
    LiParam,
    #[serde(rename = "return_expr")]
    ReturnExpr,
    #[serde(rename = "Operator")]
    Operator,
}

impl RoleLabel {
    pub const ALL: [RoleLabel; 18] = [
        RoleLabel::HasDirective,
        RoleLabel::HasStmt,
        RoleLabel::HasExpr,
        RoleLabel::CondExpr,
        RoleLabel::ThenStmt,
        RoleLabel::ElseStmt,
        RoleLabel::InitStmt,
        RoleLabel::IncrStmt,
        RoleLabel::BodyStmt,
        RoleLabel::BExpr1,
        RoleLabel::BExpr2,
        RoleLabel::UExpr,
        RoleLabel::LhsExpr,
        RoleLabel::RhsExpr,
        RoleLabel::LiName,
        RoleLabel::LiParam,
        RoleLabel::ReturnExpr,
        RoleLabel::Operator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleLabel::HasDirective => "has_directive",
            RoleLabel::HasStmt => "has_stmt",
            RoleLabel::HasExpr => "has_expr",
            RoleLabel::CondExpr => "cond_expr",
            RoleLabel::ThenStmt => "then_stmt",
            RoleLabel::ElseStmt => "else_stmt",
            RoleLabel::InitStmt => "init_stmt",
            RoleLabel::IncrStmt => "incr_stmt",
            RoleLabel::BodyStmt => "body_stmt",
            RoleLabel::BExpr1 => "B_expr1",
            RoleLabel::BExpr2 => "B_expr2",
            RoleLabel::UExpr => "U_expr",
            RoleLabel::LhsExpr => "LHS_expr",
            RoleLabel::RhsExpr => "RHS_expr",
            RoleLabel::LiName => "LI_name",
            RoleLabel::LiParam => "LI_param",
            RoleLabel::ReturnExpr => "return_expr",
            RoleLabel::Operator => "Operator",
        }
    }
}

impl fmt::Display for RoleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoleLabel {
    type Err = IrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoleLabel::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| IrError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    C,
    #[serde(rename = "COBOL")]
    Cobol,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::C => "C",
            Language::Cobol => "COBOL",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = IrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c" => Ok(Language::C),
            "cobol" => Ok(Language::Cobol),
            _ => Err(IrError::UnknownName(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub role: RoleLabel,
    pub node: AstNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default)]
    pub children: Vec<Edge>,
}

impl AstNode {
    /// Interior node with no children yet.
    ///
    /// # Panics
    /// If `kind` is a leaf kind.
    pub fn branch(kind: NodeKind) -> Self {
        assert!(!kind.is_leaf(), "{kind} is a leaf kind");
        AstNode { kind, value: None, children: Vec::new() }
    }

    /// # Panics
    /// If `kind` is not a leaf kind.
    pub fn leaf(kind: NodeKind, value: impl Into<String>) -> Self {
        assert!(kind.is_leaf(), "{kind} is not a leaf kind");
        AstNode { kind, value: Some(value.into()), children: Vec::new() }
    }

    /// Variable reference rendered as `Var[name]`.
    pub fn var(name: &str) -> Self {
        AstNode::leaf(NodeKind::Ident, var_rendering(name))
    }

    pub fn literal(text: impl Into<String>) -> Self {
        AstNode::leaf(NodeKind::Literal, text)
    }

    pub fn operator(name: impl Into<String>) -> Self {
        AstNode::leaf(NodeKind::Operator, name)
    }

    pub fn with(mut self, role: RoleLabel, child: AstNode) -> Self {
        self.push(role, child);
        self
    }

    pub fn push(&mut self, role: RoleLabel, child: AstNode) {
        assert!(!self.kind.is_leaf(), "cannot attach children to {}", self.kind);
        self.children.push(Edge { role, node: child });
    }

    pub fn value(&self) -> Option<&str> {
        self.value.as_deref()
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|e| e.node.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|e| e.node.depth()).max().unwrap_or(0)
    }

    /// Pre-order walk; the callback sees each node with the role of the edge
    /// leading to it (`None` for `self`).
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(Option<RoleLabel>, &'a AstNode)) {
        fn go<'a>(
            node: &'a AstNode,
            role: Option<RoleLabel>,
            f: &mut impl FnMut(Option<RoleLabel>, &'a AstNode),
        ) {
            f(role, node);
            for e in &node.children {
                go(&e.node, Some(e.role), f);
            }
        }
        go(self, None, f);
    }

    /// Rewrites every leaf value in place, in pre-order.
    pub fn map_leaves(&mut self, f: &mut impl FnMut(Option<RoleLabel>, NodeKind, &str) -> Option<String>) {
        fn go(
            node: &mut AstNode,
            role: Option<RoleLabel>,
            f: &mut impl FnMut(Option<RoleLabel>, NodeKind, &str) -> Option<String>,
        ) {
            if let Some(v) = node.value.as_deref() {
                if let Some(new) = f(role, node.kind, v) {
                    node.value = Some(new);
                }
            }
            for e in &mut node.children {
                go(&mut e.node, Some(e.role), f);
            }
        }
        go(self, None, f);
    }
}

pub fn var_rendering(name: &str) -> String {
    format!("Var[{name}]")
}

/// Extracts `name` from a `Var[name]` rendering.
pub fn var_name(rendering: &str) -> Option<&str> {
    rendering
        .strip_prefix("Var[")
        .and_then(|r| r.strip_suffix(']'))
        .filter(|n| !n.is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolCategory {
    Variable,
    Function,
    Label,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbol {
    pub id: u32,
    pub name: String,
    pub category: SymbolCategory,
}

/// Symbol table in declaration order. Ids are assigned sequentially.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<Symbol>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols(symbols: Vec<Symbol>) -> Self {
        SymbolTable { symbols }
    }

    /// Returns the id of `(name, category)`, inserting it if absent.
    pub fn intern(&mut self, name: &str, category: SymbolCategory) -> u32 {
        if let Some(s) = self.lookup(name, category) {
            return s.id;
        }
        let id = self.symbols.iter().map(|s| s.id + 1).max().unwrap_or(0);
        self.symbols.push(Symbol { id, name: name.to_string(), category });
        id
    }

    pub fn lookup(&self, name: &str, category: SymbolCategory) -> Option<&Symbol> {
        self.symbols.iter().find(|s| s.name == name && s.category == category)
    }

    pub fn contains_name(&self, name: &str) -> bool {
        self.symbols.iter().any(|s| s.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Symbol> {
        self.symbols.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Drops later entries whose `(name, category)` repeats an earlier one.
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        self.symbols.retain(|s| seen.insert((s.name.clone(), s.category)));
    }
}

impl Serialize for SymbolTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.symbols.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymbolTable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Vec::<Symbol>::deserialize(deserializer).map(SymbolTable::from_symbols)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompilationUnit {
    pub language: Language,
    pub source_id: String,
    pub symbols: SymbolTable,
    pub root: AstNode,
}

impl CompilationUnit {
    pub fn new(language: Language, source_id: impl Into<String>, root: AstNode, symbols: SymbolTable) -> Self {
        CompilationUnit { language, source_id: source_id.into(), symbols, root }
    }

    /// Canonical JSON (stable field order, two-space indentation).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("IR serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, IrError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves an `Ident` leaf, given the role of its incoming edge.
    pub fn resolve(&self, role: Option<RoleLabel>, value: &str) -> Option<&Symbol> {
        if role == Some(RoleLabel::LiName) {
            self.symbols.lookup(value, SymbolCategory::Function)
        } else {
            var_name(value).and_then(|n| self.symbols.lookup(n, SymbolCategory::Variable))
        }
    }
}

#[derive(Debug, Error)]
pub enum IrError {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("malformed IR JSON: {0}")]
    Json(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Slot {
    role: RoleLabel,
    kinds: &'static [NodeKind],
    min: usize,
    max: usize,
}

const MANY: usize = usize::MAX;

const fn slot(role: RoleLabel, kinds: &'static [NodeKind], min: usize, max: usize) -> Slot {
    Slot { role, kinds, min, max }
}

const FUNC: &[NodeKind] = &[NodeKind::Func];
const EXPRSTMT: &[NodeKind] = &[NodeKind::Exprstmt];
const COMPSTMT: &[NodeKind] = &[NodeKind::Compstmt];
const BODY: &[NodeKind] = &[NodeKind::Block, NodeKind::Compstmt];
const IDENT: &[NodeKind] = &[NodeKind::Ident];
const OPERATOR: &[NodeKind] = &[NodeKind::Operator];
const DECLARED: &[NodeKind] = &[NodeKind::Ident, NodeKind::Binary];

/// A node's children must match one of its shapes: the role sequence is
/// consumed slot by slot, each slot taking between `min` and `max` adjacent
/// children carrying its role.
fn shapes(kind: NodeKind) -> &'static [&'static [Slot]] {
    use RoleLabel::*;
    const NONE: &[&[Slot]] = &[&[]];
    match kind {
        NodeKind::CompUnit => {
            const S: &[&[Slot]] = &[&[]];
            S
        }
        NodeKind::Func => {
            const S: &[&[Slot]] = &[&[slot(HasStmt, BODY, 1, 1)]];
            S
        }
        NodeKind::Block => {
            const S: &[&[Slot]] = &[&[slot(HasStmt, COMPSTMT, 1, 1)]];
            S
        }
        NodeKind::Compstmt => {
            const S: &[&[Slot]] = &[&[slot(HasStmt, STATEMENTS, 0, MANY)]];
            S
        }
        NodeKind::Exprstmt => {
            const S: &[&[Slot]] = &[&[slot(HasExpr, EXPRESSIONS, 1, 1)]];
            S
        }
        NodeKind::Ifthen => {
            const S: &[&[Slot]] = &[&[
            slot(CondExpr, EXPRESSIONS, 1, 1),
            slot(ThenStmt, STATEMENTS, 1, 1),
            slot(ElseStmt, STATEMENTS, 0, 1),
        ]];
            S
        }
        NodeKind::Whilestmt => {
            const S: &[&[Slot]] = &[&[slot(CondExpr, EXPRESSIONS, 1, 1), slot(BodyStmt, STATEMENTS, 1, 1)]];
            S
        }
        NodeKind::Forstmt => {
            const S: &[&[Slot]] = &[&[
            slot(InitStmt, EXPRSTMT, 0, 1),
            slot(CondExpr, EXPRESSIONS, 0, 1),
            slot(IncrStmt, EXPRSTMT, 0, 1),
            slot(BodyStmt, STATEMENTS, 1, 1),
        ]];
            S
        }
        NodeKind::Returnstmt => {
            const S: &[&[Slot]] = &[&[slot(ReturnExpr, EXPRESSIONS, 0, 1)]];
            S
        }
        NodeKind::Binary => {
            const S: &[&[Slot]] = &[
            &[slot(Operator, OPERATOR, 1, 1), slot(BExpr1, EXPRESSIONS, 1, 1), slot(BExpr2, EXPRESSIONS, 1, 1)],
            &[slot(Operator, OPERATOR, 1, 1), slot(LhsExpr, EXPRESSIONS, 1, 1), slot(RhsExpr, EXPRESSIONS, 1, 1)],
        ];
            S
        }
        NodeKind::Unary => {
            const S: &[&[Slot]] = &[&[slot(Operator, OPERATOR, 1, 1), slot(UExpr, EXPRESSIONS, 1, 1)]];
            S
        }
        NodeKind::Call => {
            const S: &[&[Slot]] = &[&[slot(LiName, IDENT, 1, 1), slot(LiParam, EXPRESSIONS, 0, MANY)]];
            S
        }
        NodeKind::Decl => {
            const S: &[&[Slot]] = &[&[slot(HasExpr, DECLARED, 1, MANY)]];
            S
        }
        NodeKind::Label | NodeKind::Ident | NodeKind::Literal | NodeKind::Operator => NONE,
    }
}

/// `CompUnit` children may interleave function definitions and top-level
/// initialiser statements in source order, so it is checked per role rather
/// than by shape.
const COMPUNIT_SLOTS: &[Slot] = &[
    slot(RoleLabel::HasDirective, FUNC, 0, MANY),
    slot(RoleLabel::HasStmt, EXPRSTMT, 0, MANY),
];

/// Whether the schema allows `child` under `parent` through `role`.
pub fn permits(parent: NodeKind, role: RoleLabel, child: NodeKind) -> bool {
    let in_slots = |slots: &[Slot]| slots.iter().any(|s| s.role == role && s.kinds.contains(&child));
    if parent == NodeKind::CompUnit {
        return in_slots(COMPUNIT_SLOTS);
    }
    shapes(parent).iter().any(|shape| in_slots(shape))
}

/// Roles the schema allows below `parent`, each with its permitted child kinds.
pub fn permitted_children(parent: NodeKind) -> Vec<(RoleLabel, Vec<NodeKind>)> {
    let mut out: Vec<(RoleLabel, Vec<NodeKind>)> = Vec::new();
    let slots: Vec<Slot> = if parent == NodeKind::CompUnit {
        COMPUNIT_SLOTS.to_vec()
    } else {
        shapes(parent).iter().flat_map(|s| s.iter().copied()).collect()
    };
    for s in slots {
        match out.iter_mut().find(|(r, _)| *r == s.role) {
            Some((_, kinds)) => {
                for k in s.kinds {
                    if !kinds.contains(k) {
                        kinds.push(*k);
                    }
                }
            }
            None => out.push((s.role, s.kinds.to_vec())),
        }
    }
    out
}

/// Alternative role sequences accepted below `parent`, as `(role, min, max)`
/// slot lists. `CompUnit` accepts any interleaving of its roles.
pub fn role_shapes(parent: NodeKind) -> Vec<Vec<(RoleLabel, usize, usize)>> {
    shapes(parent)
        .iter()
        .map(|shape| shape.iter().map(|s| (s.role, s.min, s.max)).collect())
        .collect()
}

fn matches_shape(roles: &[RoleLabel], shape: &[Slot]) -> bool {
    let mut i = 0;
    for s in shape {
        let mut taken = 0;
        while i < roles.len() && roles[i] == s.role && taken < s.max {
            i += 1;
            taken += 1;
        }
        if taken < s.min {
            return false;
        }
    }
    i == roles.len()
}

fn shape_ok(kind: NodeKind, roles: &[RoleLabel]) -> bool {
    if kind == NodeKind::CompUnit {
        return roles.iter().all(|r| COMPUNIT_SLOTS.iter().any(|s| s.role == *r));
    }
    shapes(kind).iter().any(|shape| matches_shape(roles, shape))
}

/// Checks the role sequence and leaf invariants of a single subtree, without
/// symbol resolution. Used by the SBT reader to reject ill-shaped parses.
pub fn structurally_valid(node: &AstNode) -> bool {
    let mut ok = true;
    check_node(node, None, &mut |_, _| ok = false, None, "".into());
    ok
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Slash-separated path from the root, e.g. `CompUnit/has_directive[0]:Func`.
    pub path: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.rule)
    }
}

fn check_node(
    node: &AstNode,
    role: Option<RoleLabel>,
    report: &mut dyn FnMut(String, String),
    unit: Option<&CompilationUnit>,
    path: String,
) {
    let kind = node.kind;
    if kind.is_leaf() {
        match node.value.as_deref() {
            None => report(path.clone(), format!("{kind} leaf has no value")),
            Some("") => report(path.clone(), format!("{kind} leaf has an empty value")),
            Some(v) => check_leaf_value(kind, role, v, &path, report, unit),
        }
        if !node.children.is_empty() {
            report(path.clone(), format!("{kind} leaf has children"));
        }
        return;
    }
    if node.value.is_some() {
        report(path.clone(), format!("{kind} node carries a value"));
    }
    for (i, e) in node.children.iter().enumerate() {
        if !permits(kind, e.role, e.node.kind) {
            report(
                format!("{path}/{}[{i}]:{}", e.role, e.node.kind),
                format!("{} not permitted under {kind} via {}", e.node.kind, e.role),
            );
        }
    }
    let roles: Vec<RoleLabel> = node.children.iter().map(|e| e.role).collect();
    if !shape_ok(kind, &roles) {
        let listed: Vec<&str> = roles.iter().map(|r| r.as_str()).collect();
        report(path.clone(), format!("{kind} cannot have children [{}]", listed.join(", ")));
    }
    for (i, e) in node.children.iter().enumerate() {
        check_node(
            &e.node,
            Some(e.role),
            report,
            unit,
            format!("{path}/{}[{i}]:{}", e.role, e.node.kind),
        );
    }
}

fn check_leaf_value(
    kind: NodeKind,
    role: Option<RoleLabel>,
    value: &str,
    path: &str,
    report: &mut dyn FnMut(String, String),
    unit: Option<&CompilationUnit>,
) {
    match kind {
        NodeKind::Ident if role == Some(RoleLabel::LiName) => {
            if var_name(value).is_some() {
                report(path.into(), format!("callee `{value}` uses variable rendering"));
            }
        }
        NodeKind::Ident => {
            if var_name(value).is_none() {
                report(path.into(), format!("identifier `{value}` is not rendered as Var[name]"));
            }
        }
        NodeKind::Literal if var_name(value).is_some() => {
            report(path.into(), format!("literal `{value}` is indistinguishable from a variable"));
        }
        _ => {}
    }
    if kind == NodeKind::Ident {
        if let Some(cu) = unit {
            if cu.resolve(role, value).is_none() {
                report(path.into(), format!("identifier `{value}` does not resolve to a symbol"));
            }
        }
    }
}

/// Returns every broken invariant; an empty list means the unit is valid.
pub fn validate(cu: &CompilationUnit) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut report = |path: String, rule: String| out.push(Violation { path, rule });

    let mut ids = HashSet::new();
    let mut names = HashSet::new();
    for s in cu.symbols.iter() {
        if !ids.insert(s.id) {
            report("symbols".into(), format!("duplicate symbol id {}", s.id));
        }
        if !names.insert((s.name.as_str(), s.category)) {
            report("symbols".into(), format!("duplicate symbol `{}` ({:?})", s.name, s.category));
        }
    }
    if cu.root.kind != NodeKind::CompUnit {
        report(cu.root.kind.to_string(), "root is not a CompUnit".into());
    }
    check_node(&cu.root, None, &mut report, Some(cu), cu.root.kind.to_string());
    out
}

/// Number of nodes of each kind in the unit's tree.
pub fn node_census(cu: &CompilationUnit) -> BTreeMap<NodeKind, usize> {
    census(&cu.root)
}

pub fn census(node: &AstNode) -> BTreeMap<NodeKind, usize> {
    let mut counts = BTreeMap::new();
    node.walk(&mut |_, n| *counts.entry(n.kind).or_insert(0) += 1);
    counts
}

/// Every `Ident` occurrence with its resolved symbol id, in pre-order.
pub fn ident_occurrences(cu: &CompilationUnit) -> Vec<(String, Option<u32>)> {
    let mut out = Vec::new();
    cu.root.walk(&mut |role, n| {
        if n.kind == NodeKind::Ident {
            let v = n.value.clone().unwrap_or_default();
            let id = cu.resolve(role, &v).map(|s| s.id);
            out.push((v, id));
        }
    });
    out
}

/// Symbol name occurrences grouped by symbol, used by tests on renaming.
pub fn occurrences_by_symbol(cu: &CompilationUnit) -> HashMap<u32, usize> {
    let mut out = HashMap::new();
    for (_, id) in ident_occurrences(cu) {
        if let Some(id) = id {
            *out.entry(id).or_insert(0) += 1;
        }
    }
    out
}
