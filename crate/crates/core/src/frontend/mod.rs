//! Language front-ends: C and COBOL source to [`CompilationUnit`].
//!
//! Both parsers are hand-written recursive descent with no error recovery.
//! The first problem aborts the file with a single [`ParseDiagnostic`].

pub mod c;
pub mod cobol;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ir::{CompilationUnit, Language};

/// Operator leaf values shared by both front-ends.
pub mod ops {
    pub const ASSIGN: &str = "=";
    pub const ADD: &str = "+";
    pub const SUB: &str = "-";
    pub const MUL: &str = "*";
    pub const DIV: &str = "/";
    pub const REM: &str = "%";
    pub const POW: &str = "**";
    pub const LT: &str = "Less Than";
    pub const LE: &str = "Less Than Equals";
    pub const GT: &str = "Greater Than";
    pub const GE: &str = "Greater Than Equals";
    pub const EQ: &str = "Equals";
    pub const NE: &str = "Not Equals";
    pub const AND: &str = "And";
    pub const OR: &str = "Or";
    pub const NOT: &str = "Not";
    pub const NEG: &str = "minus";
    pub const PLUS: &str = "plus";
    pub const ADDRESS_OF: &str = "address of";
    pub const PRE_INC: &str = "pre increment";
    pub const PRE_DEC: &str = "pre decrement";
    pub const POST_INC: &str = "post increment";
    pub const POST_DEC: &str = "post decrement";
    pub const PAREN: &str = "(";
    pub const SUBSCRIPT: &str = "Array Subscript";
}

/// A source file handed to a front-end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
    /// Submission verdict, when known.
    pub accepted: bool,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        SourceFile { path: path.into(), text: text.into(), accepted: true }
    }

    /// File stem of `path`, used as the unit's source id.
    pub fn source_id(&self) -> String {
        Path::new(&self.path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl ParseDiagnostic {
    pub fn error(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseDiagnostic { line, column, message: message.into(), severity: Severity::Error }
    }

    pub fn unsupported(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseDiagnostic { line, column, message: message.into(), severity: Severity::Unsupported }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Unsupported => "unsupported",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseDiagnostic {}

/// Dispatches to the front-end for `language`.
pub fn parse(language: Language, src: &SourceFile) -> Result<CompilationUnit, ParseDiagnostic> {
    match language {
        Language::C => c::parse_c(src),
        Language::Cobol => cobol::parse_cobol(src),
    }
}

/// Language implied by a file extension (`.c`, `.cob`, `.cbl`, `.cobol`).
pub fn language_for_path(path: &Path) -> Option<Language> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "c" | "h" => Some(Language::C),
        "cob" | "cbl" | "cobol" | "cpy" => Some(Language::Cobol),
        _ => None,
    }
}

pub(crate) mod build {
    use crate::ir::{AstNode, NodeKind, RoleLabel};

    pub fn binary(op: &str, lhs: AstNode, rhs: AstNode) -> AstNode {
        AstNode::branch(NodeKind::Binary)
            .with(RoleLabel::Operator, AstNode::operator(op))
            .with(RoleLabel::BExpr1, lhs)
            .with(RoleLabel::BExpr2, rhs)
    }

    pub fn assign(target: AstNode, value: AstNode) -> AstNode {
        AstNode::branch(NodeKind::Binary)
            .with(RoleLabel::Operator, AstNode::operator(super::ops::ASSIGN))
            .with(RoleLabel::LhsExpr, target)
            .with(RoleLabel::RhsExpr, value)
    }

    pub fn unary(op: &str, operand: AstNode) -> AstNode {
        AstNode::branch(NodeKind::Unary)
            .with(RoleLabel::Operator, AstNode::operator(op))
            .with(RoleLabel::UExpr, operand)
    }

    pub fn call(name: &str, params: Vec<AstNode>) -> AstNode {
        let mut node = AstNode::branch(NodeKind::Call).with(RoleLabel::LiName, AstNode::leaf(NodeKind::Ident, name));
        for p in params {
            node.push(RoleLabel::LiParam, p);
        }
        node
    }

    pub fn expr_stmt(expr: AstNode) -> AstNode {
        AstNode::branch(NodeKind::Exprstmt).with(RoleLabel::HasExpr, expr)
    }

    pub fn compound(stmts: Vec<AstNode>) -> AstNode {
        let mut node = AstNode::branch(NodeKind::Compstmt);
        for s in stmts {
            node.push(RoleLabel::HasStmt, s);
        }
        node
    }
}

/// Position of the last character of `text`, for diagnostics at end of input.
pub(crate) fn end_position(text: &str) -> (usize, usize) {
    let mut line = 1;
    let mut col = 0;
    for ch in text.chars() {
        if ch == '\n' {
            line += 1;
            col = 0;
        } else {
            col += 1;
        }
    }
    if col == 0 {
        // trailing newline: point at the end of the previous line
        let prev = text.trim_end_matches('\n').lines().last().map(|l| l.chars().count()).unwrap_or(1);
        let lines = text.trim_end_matches('\n').lines().count().max(1);
        return (lines, prev.max(1));
    }
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn end_position_stays_inside_source() {
        assert_eq!(end_position("ab"), (1, 2));
        assert_eq!(end_position("ab\ncd\n"), (2, 2));
        assert_eq!(end_position("x\n\n"), (1, 1));
    }

    #[test]
    fn extension_lookup() {
        assert_eq!(language_for_path(Path::new("a/b.c")), Some(Language::C));
        assert_eq!(language_for_path(Path::new("p.CBL")), Some(Language::Cobol));
        assert_eq!(language_for_path(Path::new("p.txt")), None);
    }
}
