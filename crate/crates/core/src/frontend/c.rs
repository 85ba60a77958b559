//! C front-end for the competitive-programming subset.
//!
//! Accepted: function definitions and prototypes; scalar and one-dimensional
//! array declarations of the arithmetic types; assignment (including the
//! compound forms, which are expanded to `x = x op y`); arithmetic,
//! comparison and logical operators; unary `& - + ! ++ --`; `if`/`else`,
//! `while`, `for`, `return`; calls. Preprocessor lines are skipped.
//! Anything else is rejected with an `unsupported` diagnostic.

use std::collections::HashSet;

use super::{build, end_position, ops, ParseDiagnostic, SourceFile};
use crate::ir::{var_name, AstNode, CompilationUnit, Language, NodeKind, RoleLabel, SymbolCategory, SymbolTable};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Char(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "!", "&", "|", "^", "~", "?", ":", ";", ",", ".",
    "(", ")", "[", "]", "{", "}",
];

const TYPE_WORDS: &[&str] = &[
    "int", "long", "short", "char", "float", "double", "unsigned", "signed", "void", "const", "static", "extern",
    "register", "volatile", "_Bool", "bool", "inline",
];

const UNSUPPORTED_WORDS: &[&str] = &[
    "struct", "union", "enum", "typedef", "goto", "switch", "case", "default", "do", "break", "continue", "sizeof",
];

/// Library functions whose first string argument is a format string.
const FORMAT_FUNCTIONS: &[&str] = &["scanf", "printf"];

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    text: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().collect(), pos: 0, line: 1, col: 1, text }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn at_line_start(&self) -> bool {
        self.chars[..self.pos].iter().rev().take_while(|c| **c != '\n').all(|c| c.is_whitespace())
    }

    fn tokens(mut self) -> Result<Vec<Token>, ParseDiagnostic> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek(0) else {
                let (line, col) = end_position(self.text);
                out.push(Token { tok: Tok::Eof, line, col });
                return Ok(out);
            };
            let tok = if c.is_ascii_alphabetic() || c == '_' {
                let mut s = String::new();
                while let Some(c) = self.peek(0).filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
                    s.push(c);
                    self.bump();
                }
                Tok::Ident(s)
            } else if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) {
                Tok::Number(self.number())
            } else if c == '"' {
                Tok::Str(self.quoted('"', line, col)?)
            } else if c == '\'' {
                let body = self.quoted('\'', line, col)?;
                if body.is_empty() {
                    return Err(ParseDiagnostic::error(line, col, "empty character literal"));
                }
                Tok::Char(body)
            } else if let Some(p) = PUNCTS.iter().find(|p| self.chars[self.pos..].starts_with(&p.chars().collect::<Vec<_>>())) {
                for _ in 0..p.len() {
                    self.bump();
                }
                Tok::Punct(p)
            } else {
                return Err(ParseDiagnostic::error(line, col, format!("unexpected character `{c}`")));
            };
            out.push(Token { tok, line, col });
        }
    }

    fn number(&mut self) -> String {
        let mut s = String::new();
        let hex = self.peek(0) == Some('0') && matches!(self.peek(1), Some('x') | Some('X'));
        while let Some(c) = self.peek(0) {
            let exponent_sign = (c == '+' || c == '-')
                && !hex
                && matches!(s.chars().last(), Some('e') | Some('E'));
            if c.is_ascii_alphanumeric() || c == '.' || exponent_sign {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    /// Body of a quoted literal, escapes kept as written.
    fn quoted(&mut self, quote: char, line: usize, col: usize) -> Result<String, ParseDiagnostic> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                Some(c) if c == quote => return Ok(s),
                Some('\\') => {
                    s.push('\\');
                    match self.bump() {
                        Some('\n') | None => break,
                        Some(c) => s.push(c),
                    }
                }
                Some('\n') | None => break,
                Some(c) => s.push(c),
            }
        }
        Err(ParseDiagnostic::error(line, col, "unterminated literal"))
    }

    fn skip_trivia(&mut self) -> Result<(), ParseDiagnostic> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some('*'), Some('/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => return Err(ParseDiagnostic::error(line, col, "unterminated comment")),
                        }
                    }
                }
                (Some('#'), _) if self.at_line_start() => {
                    while let Some(c) = self.peek(0) {
                        if c == '\\' && self.peek(1) == Some('\n') {
                            self.bump();
                            self.bump();
                        } else if c == '\n' {
                            break;
                        } else {
                            self.bump();
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }
}

/// Whether a printf/scanf format string contains a conversion specifier.
fn has_conversion(format: &str) -> bool {
    let bytes: Vec<char> = format.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == '%' {
            i += 1;
            if bytes.get(i) == Some(&'%') {
                i += 1;
                continue;
            }
            while i < bytes.len() && "-+ #0123456789.*hlLqjzt[^]".contains(bytes[i]) {
                i += 1;
            }
            if i < bytes.len() && "diouxXeEfFgGaAcspn".contains(bytes[i]) {
                return true;
            }
        } else {
            i += 1;
        }
    }
    false
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    symbols: SymbolTable,
    variables: HashSet<String>,
    functions: HashSet<String>,
}

type PResult<T> = Result<T, ParseDiagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (l, c) = self.here();
        Err(ParseDiagnostic::error(l, c, msg))
    }

    fn unsupported<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (l, c) = self.here();
        Err(ParseDiagnostic::unsupported(l, c, msg))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", describe(self.peek())))
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn at_type(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if TYPE_WORDS.contains(&s.as_str()))
    }

    fn check_unsupported_word(&self) -> PResult<()> {
        if let Tok::Ident(s) = self.peek() {
            if UNSUPPORTED_WORDS.contains(&s.as_str()) {
                return self.unsupported(format!("`{s}` is outside the supported C subset"));
            }
        }
        Ok(())
    }

    fn ident(&mut self) -> PResult<String> {
        self.check_unsupported_word()?;
        match self.peek().clone() {
            Tok::Ident(s) if !TYPE_WORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn type_specifiers(&mut self) -> PResult<()> {
        if !self.at_type() {
            return self.error("expected a type");
        }
        while self.at_type() {
            self.advance();
        }
        self.check_unsupported_word()?;
        if self.is_punct("*") {
            return self.unsupported("pointer declarations are outside the supported C subset");
        }
        Ok(())
    }

    fn declare_variable(&mut self, name: &str) -> PResult<()> {
        if self.functions.contains(name) {
            return self.unsupported(format!("`{name}` is both a function and a variable"));
        }
        self.variables.insert(name.to_string());
        self.symbols.intern(name, SymbolCategory::Variable);
        Ok(())
    }

    fn declare_function(&mut self, name: &str) -> PResult<()> {
        if self.variables.contains(name) {
            return self.unsupported(format!("`{name}` is both a function and a variable"));
        }
        self.functions.insert(name.to_string());
        self.symbols.intern(name, SymbolCategory::Function);
        Ok(())
    }

    // -- top level ---------------------------------------------------------

    fn translation_unit(&mut self) -> PResult<AstNode> {
        let mut root = AstNode::branch(NodeKind::CompUnit);
        while *self.peek() != Tok::Eof {
            self.check_unsupported_word()?;
            if self.at_type() {
                self.type_specifiers()?;
                if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Punct("(")) {
                    if let Some(func) = self.function()? {
                        root.push(RoleLabel::HasDirective, func);
                    }
                } else {
                    for init in self.declarators()? {
                        root.push(RoleLabel::HasStmt, init);
                    }
                }
            } else if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Punct("(")) {
                // implicit-int definition such as `main() { ... }`
                if let Some(func) = self.function()? {
                    root.push(RoleLabel::HasDirective, func);
                }
            } else if self.eat(";") {
                continue;
            } else {
                return self.error(format!("expected a declaration, found {}", describe(self.peek())));
            }
        }
        Ok(root)
    }

    /// Function definition or prototype, positioned at the name.
    fn function(&mut self) -> PResult<Option<AstNode>> {
        let name = self.ident()?;
        self.declare_function(&name)?;
        self.expect("(")?;
        if self.is_word("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.advance();
        }
        if !self.is_punct(")") {
            loop {
                if self.is_punct("...") {
                    return self.unsupported("variadic functions are outside the supported C subset");
                }
                self.type_specifiers()?;
                if matches!(self.peek(), Tok::Ident(_)) {
                    let p = self.ident()?;
                    self.declare_variable(&p)?;
                }
                if self.eat("[") {
                    if !self.eat("]") {
                        return self.unsupported("sized array parameters are outside the supported C subset");
                    }
                    if self.is_punct("[") {
                        return self.unsupported("multi-dimensional arrays are outside the supported C subset");
                    }
                }
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        if self.eat(";") {
            return Ok(None);
        }
        if !self.is_punct("{") {
            return self.error(format!("expected function body, found {}", describe(self.peek())));
        }
        let body = self.block()?;
        Ok(Some(AstNode::branch(NodeKind::Func).with(RoleLabel::HasStmt, body)))
    }

    /// Declarator list after the type; returns initialiser statements.
    fn declarators(&mut self) -> PResult<Vec<AstNode>> {
        let mut inits = Vec::new();
        loop {
            if self.is_punct("*") {
                return self.unsupported("pointer declarations are outside the supported C subset");
            }
            let name = self.ident()?;
            if self.is_punct("(") {
                return self.unsupported("nested function declarations are outside the supported C subset");
            }
            if self.eat("[") {
                if !self.is_punct("]") {
                    self.expression()?;
                }
                self.expect("]")?;
                if self.is_punct("[") {
                    return self.unsupported("multi-dimensional arrays are outside the supported C subset");
                }
            }
            self.declare_variable(&name)?;
            if self.eat("=") {
                if self.is_punct("{") {
                    return self.unsupported("aggregate initialisers are outside the supported C subset");
                }
                let value = self.assignment()?;
                inits.push(build::expr_stmt(build::assign(AstNode::var(&name), value)));
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(inits)
    }

    // -- statements --------------------------------------------------------

    /// `{ ... }` as `Block -> Compstmt`.
    fn block(&mut self) -> PResult<AstNode> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.error("expected `}` before end of input");
            }
            if self.at_type() {
                self.type_specifiers()?;
                stmts.extend(self.declarators()?);
            } else if let Some(s) = self.statement()? {
                stmts.push(s);
            }
        }
        self.expect("}")?;
        Ok(AstNode::branch(NodeKind::Block).with(RoleLabel::HasStmt, build::compound(stmts)))
    }

    /// A statement; `None` for the empty statement.
    fn statement(&mut self) -> PResult<Option<AstNode>> {
        self.check_unsupported_word()?;
        if self.is_punct("{") {
            return self.block().map(Some);
        }
        if self.eat(";") {
            return Ok(None);
        }
        if self.at_type() {
            return self.error("declaration is not allowed here");
        }
        let keyword = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => String::new(),
        };
        match keyword.as_str() {
            "if" => {
                self.advance();
                let cond = self.paren_condition()?;
                let then = self.body()?;
                let mut node = AstNode::branch(NodeKind::Ifthen)
                    .with(RoleLabel::CondExpr, cond)
                    .with(RoleLabel::ThenStmt, then);
                if self.is_word("else") {
                    self.advance();
                    node.push(RoleLabel::ElseStmt, self.body()?);
                }
                Ok(Some(node))
            }
            "else" => self.error("`else` without `if`"),
            "while" => {
                self.advance();
                let cond = self.paren_condition()?;
                let body = self.body()?;
                Ok(Some(
                    AstNode::branch(NodeKind::Whilestmt)
                        .with(RoleLabel::CondExpr, cond)
                        .with(RoleLabel::BodyStmt, body),
                ))
            }
            "for" => self.for_statement().map(Some),
            "return" => {
                self.advance();
                let mut node = AstNode::branch(NodeKind::Returnstmt);
                if !self.is_punct(";") {
                    node.push(RoleLabel::ReturnExpr, self.expression()?);
                }
                self.expect(";")?;
                Ok(Some(node))
            }
            _ => {
                let e = self.expression()?;
                self.expect(";")?;
                Ok(Some(build::expr_stmt(expand_step(e))))
            }
        }
    }

    /// Statement in a position that needs one; `;` becomes an empty compound.
    fn body(&mut self) -> PResult<AstNode> {
        Ok(self.statement()?.unwrap_or_else(|| build::compound(Vec::new())))
    }

    fn paren_condition(&mut self) -> PResult<AstNode> {
        self.expect("(")?;
        let e = self.expression()?;
        self.expect(")")?;
        Ok(e)
    }

    fn for_statement(&mut self) -> PResult<AstNode> {
        self.advance();
        self.expect("(")?;
        let mut node = AstNode::branch(NodeKind::Forstmt);
        if self.at_type() {
            self.type_specifiers()?;
            let mut inits = self.declarators()?;
            if inits.len() > 1 {
                return self.unsupported("multiple loop initialisers are outside the supported C subset");
            }
            if let Some(init) = inits.pop() {
                node.push(RoleLabel::InitStmt, init);
            }
        } else if !self.eat(";") {
            let e = self.expression()?;
            self.expect(";")?;
            node.push(RoleLabel::InitStmt, build::expr_stmt(expand_step(e)));
        }
        if !self.is_punct(";") {
            node.push(RoleLabel::CondExpr, self.expression()?);
        }
        self.expect(";")?;
        if !self.is_punct(")") {
            let e = self.expression()?;
            node.push(RoleLabel::IncrStmt, build::expr_stmt(expand_step(e)));
        }
        self.expect(")")?;
        node.push(RoleLabel::BodyStmt, self.body()?);
        Ok(node)
    }

    // -- expressions -------------------------------------------------------

    fn expression(&mut self) -> PResult<AstNode> {
        let e = self.assignment()?;
        if self.is_punct(",") {
            return self.unsupported("the comma operator is outside the supported C subset");
        }
        Ok(e)
    }

    fn assignment(&mut self) -> PResult<AstNode> {
        let (line, col) = self.here();
        let lhs = self.logical_or()?;
        if self.is_punct("?") {
            return self.unsupported("the conditional operator is outside the supported C subset");
        }
        let op = match self.peek() {
            Tok::Punct(p) if matches!(*p, "=" | "+=" | "-=" | "*=" | "/=" | "%=") => *p,
            Tok::Punct(p) if matches!(*p, "&=" | "|=" | "^=" | "<<=" | ">>=") => {
                return self.unsupported("bitwise assignment is outside the supported C subset");
            }
            _ => return Ok(lhs),
        };
        if !is_lvalue(&lhs) {
            return Err(ParseDiagnostic::error(line, col, "left side of assignment is not assignable"));
        }
        self.advance();
        let rhs = self.assignment()?;
        let value = match op {
            "=" => rhs,
            "+=" => build::binary(ops::ADD, lhs.clone(), rhs),
            "-=" => build::binary(ops::SUB, lhs.clone(), rhs),
            "*=" => build::binary(ops::MUL, lhs.clone(), rhs),
            "/=" => build::binary(ops::DIV, lhs.clone(), rhs),
            _ => build::binary(ops::REM, lhs.clone(), rhs),
        };
        Ok(build::assign(lhs, value))
    }

    fn logical_or(&mut self) -> PResult<AstNode> {
        let mut lhs = self.logical_and()?;
        while self.eat("||") {
            let rhs = self.logical_and()?;
            lhs = build::binary(ops::OR, lhs, rhs);
        }
        Ok(lhs)
    }

    fn logical_and(&mut self) -> PResult<AstNode> {
        let mut lhs = self.equality()?;
        loop {
            if self.eat("&&") {
                let rhs = self.equality()?;
                lhs = build::binary(ops::AND, lhs, rhs);
            } else if self.is_punct("&") || self.is_punct("|") || self.is_punct("^") {
                return self.unsupported("bitwise operators are outside the supported C subset");
            } else {
                return Ok(lhs);
            }
        }
    }

    fn equality(&mut self) -> PResult<AstNode> {
        let mut lhs = self.relational()?;
        loop {
            let op = if self.eat("==") {
                ops::EQ
            } else if self.eat("!=") {
                ops::NE
            } else {
                return Ok(lhs);
            };
            let rhs = self.relational()?;
            lhs = build::binary(op, lhs, rhs);
        }
    }

    fn relational(&mut self) -> PResult<AstNode> {
        let mut lhs = self.additive()?;
        loop {
            let op = if self.eat("<=") {
                ops::LE
            } else if self.eat(">=") {
                ops::GE
            } else if self.eat("<") {
                ops::LT
            } else if self.eat(">") {
                ops::GT
            } else if self.is_punct("<<") || self.is_punct(">>") {
                return self.unsupported("shift operators are outside the supported C subset");
            } else {
                return Ok(lhs);
            };
            let rhs = self.additive()?;
            lhs = build::binary(op, lhs, rhs);
        }
    }

    fn additive(&mut self) -> PResult<AstNode> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = if self.eat("+") {
                ops::ADD
            } else if self.eat("-") {
                ops::SUB
            } else {
                return Ok(lhs);
            };
            let rhs = self.multiplicative()?;
            lhs = build::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> PResult<AstNode> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("*") {
                ops::MUL
            } else if self.eat("/") {
                ops::DIV
            } else if self.eat("%") {
                ops::REM
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = build::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<AstNode> {
        let op = match self.peek() {
            Tok::Punct("-") => ops::NEG,
            Tok::Punct("+") => ops::PLUS,
            Tok::Punct("!") => ops::NOT,
            Tok::Punct("&") => ops::ADDRESS_OF,
            Tok::Punct("++") => ops::PRE_INC,
            Tok::Punct("--") => ops::PRE_DEC,
            Tok::Punct("*") => return self.unsupported("pointer dereference is outside the supported C subset"),
            Tok::Punct("~") => return self.unsupported("bitwise operators are outside the supported C subset"),
            Tok::Punct("(") if matches!(self.peek_at(1), Tok::Ident(s) if TYPE_WORDS.contains(&s.as_str())) => {
                return self.unsupported("casts are outside the supported C subset");
            }
            _ => return self.postfix(),
        };
        let (line, col) = self.here();
        self.advance();
        let operand = self.unary()?;
        if matches!(op, ops::PRE_INC | ops::PRE_DEC | ops::ADDRESS_OF) && !is_lvalue(&operand) {
            return Err(ParseDiagnostic::error(line, col, format!("operand of `{op}` is not assignable")));
        }
        Ok(build::unary(op, operand))
    }

    fn postfix(&mut self) -> PResult<AstNode> {
        let mut e = self.primary()?;
        loop {
            if self.eat("[") {
                let idx = self.expression()?;
                self.expect("]")?;
                e = build::binary(ops::SUBSCRIPT, e, idx);
            } else if self.is_punct("++") || self.is_punct("--") {
                if !is_lvalue(&e) {
                    return self.error("operand of postfix operator is not assignable");
                }
                let op = if self.eat("++") { ops::POST_INC } else {
                    self.advance();
                    ops::POST_DEC
                };
                e = build::unary(op, e);
            } else if self.is_punct(".") || self.is_punct("->") {
                return self.unsupported("member access is outside the supported C subset");
            } else if self.is_punct("(") {
                return self.unsupported("calls through expressions are outside the supported C subset");
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<AstNode> {
        self.check_unsupported_word()?;
        match self.peek().clone() {
            Tok::Ident(name) if matches!(self.peek_at(1), Tok::Punct("(")) => self.call(name),
            Tok::Ident(name) if TYPE_WORDS.contains(&name.as_str()) => {
                self.error(format!("unexpected type `{name}` in expression"))
            }
            Tok::Ident(name) => {
                self.advance();
                if self.variables.contains(&name) {
                    Ok(AstNode::var(&name))
                } else {
                    // macro or library constant (EOF, stdin, INT_MAX, ...)
                    Ok(AstNode::literal(name))
                }
            }
            Tok::Number(n) => {
                self.advance();
                Ok(AstNode::literal(n))
            }
            Tok::Str(_) => {
                let (line, col) = self.here();
                let mut s = String::new();
                while let Tok::Str(part) = self.peek().clone() {
                    s.push_str(&part);
                    self.advance();
                }
                if s.is_empty() {
                    s = "\"\"".to_string();
                }
                if var_name(&s).is_some() {
                    return Err(ParseDiagnostic::unsupported(
                        line,
                        col,
                        "string literal clashes with the variable rendering",
                    ));
                }
                Ok(AstNode::literal(s))
            }
            Tok::Char(c) => {
                self.advance();
                Ok(AstNode::literal(c))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expression()?;
                self.expect(")")?;
                Ok(build::unary(ops::PAREN, e))
            }
            other => self.error(format!("expected an expression, found {}", describe(&other))),
        }
    }

    fn call(&mut self, name: String) -> PResult<AstNode> {
        if self.variables.contains(&name) {
            return self.unsupported(format!("`{name}` is a variable, not a function"));
        }
        self.advance();
        self.expect("(")?;
        let mut args: Vec<(AstNode, bool)> = Vec::new();
        if !self.is_punct(")") {
            loop {
                let is_string = matches!(self.peek(), Tok::Str(_));
                let arg = self.assignment()?;
                let is_string = is_string && arg.kind == NodeKind::Literal;
                args.push((arg, is_string));
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        self.functions.insert(name.clone());
        self.symbols.intern(&name, SymbolCategory::Function);
        if FORMAT_FUNCTIONS.contains(&name.as_str()) && args.len() > 1 {
            if let Some((first, true)) = args.first() {
                if first.value().is_some_and(has_conversion) {
                    args.remove(0);
                }
            }
        }
        Ok(build::call(&name, args.into_iter().map(|(a, _)| a).collect()))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(s) => format!("number `{s}`"),
        Tok::Str(_) => "string literal".into(),
        Tok::Char(_) => "character literal".into(),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".into(),
    }
}

fn is_lvalue(e: &AstNode) -> bool {
    match e.kind {
        NodeKind::Ident => true,
        NodeKind::Binary => e.children.first().and_then(|c| c.node.value()) == Some(ops::SUBSCRIPT),
        _ => false,
    }
}

/// `x++`, `++x`, `x--`, `--x` evaluated only for effect become `x = x ± 1`.
fn expand_step(e: AstNode) -> AstNode {
    if e.kind != NodeKind::Unary {
        return e;
    }
    let op = e.children.first().and_then(|c| c.node.value()).unwrap_or_default();
    let arith = match op {
        ops::POST_INC | ops::PRE_INC => ops::ADD,
        ops::POST_DEC | ops::PRE_DEC => ops::SUB,
        _ => return e,
    };
    let target = e.children[1].node.clone();
    build::assign(target.clone(), build::binary(arith, target, AstNode::literal("1")))
}

/// Parses one C translation unit.
pub fn parse_c(src: &SourceFile) -> Result<CompilationUnit, ParseDiagnostic> {
    if src.text.trim().is_empty() {
        return Err(ParseDiagnostic::error(1, 1, "empty source"));
    }
    let toks = Lexer::new(&src.text).tokens()?;
    let mut parser = Parser {
        toks,
        pos: 0,
        symbols: SymbolTable::new(),
        variables: HashSet::new(),
        functions: HashSet::new(),
    };
    let root = parser.translation_unit()?;
    Ok(CompilationUnit::new(Language::C, src.source_id(), root, parser.symbols))
}
