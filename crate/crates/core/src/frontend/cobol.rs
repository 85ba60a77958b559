//! COBOL front-end.
//!
//! Handles IDENTIFICATION/ENVIRONMENT (skipped), DATA (symbol table only) and
//! PROCEDURE divisions, in fixed or free source format. Words and
//! alphanumeric literals are upper-cased.
//!
//! Statement lowering:
//!
//! | COBOL                          | IR                                              |
//! |--------------------------------|-------------------------------------------------|
//! | `ACCEPT x` / `DISPLAY a b`     | `Call` with `LI_name` ACCEPT/DISPLAY            |
//! | `MOVE a TO b`                  | `Exprstmt(Binary "=" b a)`                      |
//! | `COMPUTE b = e`                | `Exprstmt(Binary "=" b e)`                      |
//! | `ADD a TO b` (and friends)     | `b = b + a`, `GIVING` assigns the result        |
//! | `IF c ... ELSE ... END-IF`     | `Ifthen` with `Compstmt` branches               |
//! | `PERFORM n TIMES ...`          | `Forstmt(cond n, body)`                         |
//! | `PERFORM UNTIL c ...`          | `Whilestmt(Not c, body)`                        |
//! | `PERFORM VARYING i FROM a BY b UNTIL c` | `Forstmt(i = a, Not c, i = i + b, body)` |
//! | `STOP RUN` / `GOBACK`          | `Call` of `exit`                                |
//! | `( cond )`                     | `Unary` with operator `(`                       |

use super::{build, end_position, ops, ParseDiagnostic, SourceFile};
use crate::ir::{AstNode, CompilationUnit, Language, NodeKind, RoleLabel, SymbolCategory, SymbolTable};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Number(String),
    Str(String),
    Pic(String),
    Punct(&'static str),
    Period,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

/// One source line after format handling: the code area and the 0-based
/// column where it starts.
struct CodeLine {
    line: usize,
    offset: usize,
    text: String,
}

/// Fixed format: every non-blank line has only digits or spaces in columns
/// 1-6 and a valid indicator in column 7, and either some line carries a
/// sequence number or no line uses the area past column 72.
pub fn is_fixed_format(text: &str) -> bool {
    let mut any_sequence = false;
    let mut long_lines = false;
    let mut nonblank = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        nonblank += 1;
        let chars: Vec<char> = line.chars().collect();
        let seq = &chars[..chars.len().min(6)];
        if !seq.iter().all(|c| c.is_ascii_digit() || *c == ' ') {
            return false;
        }
        if seq.iter().any(|c| c.is_ascii_digit()) {
            any_sequence = true;
        }
        if let Some(ind) = chars.get(6) {
            if !matches!(ind, ' ' | '*' | '/' | '-' | 'D' | 'd') {
                return false;
            }
        }
        if chars.len() > 72 && chars[72..].iter().any(|c| !c.is_whitespace()) {
            long_lines = true;
        }
    }
    nonblank > 0 && (any_sequence || !long_lines)
}

fn code_lines(text: &str) -> Result<Vec<CodeLine>, ParseDiagnostic> {
    let fixed = is_fixed_format(text);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if !fixed {
            out.push(CodeLine { line: line_no, offset: 0, text: line.to_string() });
            continue;
        }
        let chars: Vec<char> = line.chars().collect();
        match chars.get(6) {
            Some('*') | Some('/') | Some('D') | Some('d') => continue,
            Some('-') => {
                return Err(ParseDiagnostic::unsupported(line_no, 7, "continuation lines are not supported"));
            }
            _ => {}
        }
        let end = chars.len().min(72);
        let code: String = if chars.len() > 7 { chars[7..end].iter().collect() } else { String::new() };
        out.push(CodeLine { line: line_no, offset: 7, text: code });
    }
    Ok(out)
}

const OPERATORS: &[&str] = &["**", ">=", "<=", "<>", "+", "-", "*", "/", "=", ">", "<", "(", ")", ":"];

fn lex(text: &str) -> Result<Vec<Token>, ParseDiagnostic> {
    let mut toks: Vec<Token> = Vec::new();
    for cl in code_lines(text)? {
        let chars: Vec<char> = cl.text.chars().collect();
        let mut i = 0;
        // Text before the first DATA/PROCEDURE DIVISION header is free-form
        // (AUTHOR paragraphs and the like); lexing problems there are skipped.
        let lenient = !seen_body(&toks);
        while i < chars.len() {
            let c = chars[i];
            let col = cl.offset + i + 1;
            let at = |tok: Tok| Token { tok, line: cl.line, col };
            if c.is_whitespace() || c == ',' || c == ';' {
                i += 1;
                continue;
            }
            if c == '*' && chars.get(i + 1) == Some(&'>') {
                break;
            }
            if c == '\'' || c == '"' {
                let mut s = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < chars.len() {
                    if chars[j] == c {
                        if chars.get(j + 1) == Some(&c) {
                            s.push(c);
                            j += 2;
                            continue;
                        }
                        closed = true;
                        break;
                    }
                    s.push(chars[j]);
                    j += 1;
                }
                if !closed {
                    if lenient {
                        break;
                    }
                    return Err(ParseDiagnostic::error(cl.line, col, "unterminated literal"));
                }
                toks.push(at(Tok::Str(s.to_uppercase())));
                i = j + 1;
                continue;
            }
            if c == '.' {
                let next = chars.get(i + 1);
                if next.is_none_or(|n| n.is_whitespace()) {
                    toks.push(at(Tok::Period));
                    i += 1;
                    continue;
                }
                if next.is_some_and(|n| n.is_ascii_digit()) {
                    let (num, j) = number(&chars, i);
                    toks.push(at(Tok::Number(num)));
                    i = j;
                    continue;
                }
            }
            if expects_picture(&toks) {
                let mut j = i;
                while j < chars.len() && !chars[j].is_whitespace() {
                    j += 1;
                }
                let mut pic: String = chars[i..j].iter().collect();
                let ends_sentence = pic.ends_with('.');
                if ends_sentence {
                    pic.pop();
                }
                toks.push(at(Tok::Pic(pic.to_uppercase())));
                if ends_sentence {
                    toks.push(Token { tok: Tok::Period, line: cl.line, col: cl.offset + j });
                }
                i = j;
                continue;
            }
            if c.is_ascii_alphanumeric() {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '-' || chars[j] == '_') {
                    j += 1;
                }
                while j > i + 1 && chars[j - 1] == '-' {
                    j -= 1;
                }
                let word: String = chars[i..j].iter().collect();
                if word.chars().all(|c| c.is_ascii_digit()) {
                    let (num, k) = number(&chars, i);
                    toks.push(at(Tok::Number(num)));
                    i = k;
                } else {
                    toks.push(at(Tok::Word(word.to_uppercase())));
                    i = j;
                }
                continue;
            }
            if let Some(op) = OPERATORS.iter().find(|op| {
                let ops: Vec<char> = op.chars().collect();
                chars[i..].starts_with(&ops)
            }) {
                toks.push(at(Tok::Punct(op)));
                i += op.len();
                continue;
            }
            if lenient {
                break;
            }
            return Err(ParseDiagnostic::error(cl.line, col, format!("unexpected character `{c}`")));
        }
    }
    let (line, col) = end_position(text);
    toks.push(Token { tok: Tok::Eof, line, col });
    Ok(toks)
}

fn seen_body(toks: &[Token]) -> bool {
    toks.windows(2).any(|w| {
        matches!(&w[0].tok, Tok::Word(a) if a == "DATA" || a == "PROCEDURE")
            && matches!(&w[1].tok, Tok::Word(b) if b == "DIVISION")
    })
}

fn expects_picture(toks: &[Token]) -> bool {
    let is = |t: Option<&Token>, w: &str| matches!(t.map(|t| &t.tok), Some(Tok::Word(s)) if s == w);
    let n = toks.len();
    let last = toks.last();
    let prev = if n >= 2 { toks.get(n - 2) } else { None };
    is(last, "PIC") || is(last, "PICTURE") || (is(last, "IS") && (is(prev, "PIC") || is(prev, "PICTURE")))
}

/// Digits with an optional fractional part, starting at `i`.
fn number(chars: &[char], i: usize) -> (String, usize) {
    let mut j = i;
    while j < chars.len() && chars[j].is_ascii_digit() {
        j += 1;
    }
    if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
        j += 1;
        while j < chars.len() && chars[j].is_ascii_digit() {
            j += 1;
        }
    }
    (chars[i..j].iter().collect(), j)
}

const VERBS: &[&str] = &[
    "ACCEPT", "DISPLAY", "MOVE", "COMPUTE", "ADD", "SUBTRACT", "MULTIPLY", "DIVIDE", "IF", "PERFORM", "STOP", "EXIT",
    "GOBACK", "CONTINUE", "INITIALIZE", "EVALUATE", "GO", "STRING", "UNSTRING", "INSPECT", "CALL", "READ", "WRITE",
    "OPEN", "CLOSE", "SET", "SEARCH", "SORT", "MERGE", "RELEASE", "RETURN", "REWRITE", "DELETE", "START", "ALTER",
    "CANCEL", "ENTRY", "EXEC", "NEXT", "COPY", "REPLACE", "GENERATE", "INITIATE", "TERMINATE", "USE", "ALLOCATE",
    "FREE", "RAISE", "RESUME", "INVOKE",
];

const SCOPE_ENDS: &[&str] = &[
    "ELSE", "END-IF", "END-PERFORM", "END-COMPUTE", "END-ADD", "END-SUBTRACT", "END-MULTIPLY", "END-DIVIDE",
    "END-DISPLAY", "END-ACCEPT", "WHEN", "END-EVALUATE",
];

/// Words that cannot name a data item.
const RESERVED: &[&str] = &[
    "TO", "FROM", "BY", "INTO", "GIVING", "REMAINDER", "ROUNDED", "UNTIL", "VARYING", "TIMES", "THEN", "THAN", "OR",
    "AND", "NOT", "IS", "EQUAL", "GREATER", "LESS", "UPON", "WITH", "NO", "ADVANCING", "END", "RUN", "PROGRAM",
    "FUNCTION", "OF", "IN", "TEST", "BEFORE", "AFTER", "ON", "SIZE", "ERROR", "CORRESPONDING", "CORR", "ALL",
    "POSITIVE", "NEGATIVE", "NUMERIC", "ALPHABETIC", "SECTION", "DIVISION", "TRUE", "FALSE",
];

const FIGURATIVE: &[(&str, &str)] = &[
    ("ZERO", "0"),
    ("ZEROS", "0"),
    ("ZEROES", "0"),
    ("SPACE", "SPACE"),
    ("SPACES", "SPACE"),
    ("HIGH-VALUE", "HIGH-VALUE"),
    ("HIGH-VALUES", "HIGH-VALUE"),
    ("LOW-VALUE", "LOW-VALUE"),
    ("LOW-VALUES", "LOW-VALUE"),
    ("QUOTE", "QUOTE"),
    ("QUOTES", "QUOTE"),
    ("NULL", "NULL"),
    ("NULLS", "NULL"),
];

const DATA_CLAUSES: &[&str] = &[
    "PIC", "PICTURE", "VALUE", "VALUES", "OCCURS", "USAGE", "COMP", "COMP-1", "COMP-2", "COMP-3", "COMP-4", "COMP-5",
    "COMPUTATIONAL", "BINARY", "PACKED-DECIMAL", "DISPLAY", "REDEFINES", "JUSTIFIED", "JUST", "SIGN", "INDEXED",
    "BLANK", "SYNCHRONIZED", "SYNC", "EXTERNAL", "GLOBAL",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    symbols: SymbolTable,
    /// False when the program has no DATA DIVISION; data names are then
    /// declared on first use.
    has_data_division: bool,
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

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (l, c) = self.here();
        Err(ParseDiagnostic::error(l, c, msg))
    }

    fn unsupported<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (l, c) = self.here();
        Err(ParseDiagnostic::unsupported(l, c, msg))
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(s) if s == w)
    }

    fn word_at(&self, ahead: usize) -> Option<&str> {
        match self.peek_at(ahead) {
            Tok::Word(s) => Some(s),
            _ => None,
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.eat_word(w) {
            Ok(())
        } else {
            self.error(format!("expected {w}, found {}", describe(self.peek())))
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", describe(self.peek())))
        }
    }

    fn expect_period(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Period {
            self.advance();
            Ok(())
        } else {
            self.error(format!("expected `.`, found {}", describe(self.peek())))
        }
    }

    fn at_division(&self, name: &str) -> bool {
        self.is_word(name) && self.word_at(1) == Some("DIVISION")
    }

    /// Statement list ends at a period, end of input, a scope terminator
    /// or another division header.
    fn at_statement_end(&self) -> bool {
        match self.peek() {
            Tok::Period | Tok::Eof => true,
            Tok::Word(w) => SCOPE_ENDS.contains(&w.as_str()) || (w == "END" && self.word_at(1) == Some("PROGRAM")),
            _ => false,
        }
    }

    fn at_verb(&self) -> bool {
        matches!(self.peek(), Tok::Word(w) if VERBS.contains(&w.as_str()))
    }

    // -- divisions ---------------------------------------------------------

    fn program(&mut self) -> PResult<AstNode> {
        while *self.peek() != Tok::Eof && !self.at_division("DATA") && !self.at_division("PROCEDURE") {
            self.advance();
        }
        if self.at_division("DATA") {
            self.has_data_division = true;
            self.advance();
            self.advance();
            self.expect_period()?;
            self.data_division()?;
        }
        if !self.at_division("PROCEDURE") {
            return self.error("missing PROCEDURE DIVISION");
        }
        self.advance();
        self.advance();
        if self.eat_word("USING") {
            while matches!(self.peek(), Tok::Word(_)) {
                self.advance();
            }
        }
        self.expect_period()?;
        let stmts = self.procedure_body()?;
        let func = AstNode::branch(NodeKind::Func).with(RoleLabel::HasStmt, build::compound(stmts));
        Ok(AstNode::branch(NodeKind::CompUnit).with(RoleLabel::HasDirective, func))
    }

    fn data_division(&mut self) -> PResult<()> {
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(()),
                Tok::Word(_) if self.at_division("PROCEDURE") => return Ok(()),
                Tok::Word(w) if w == "FD" || w == "SD" => {
                    return self.unsupported("file descriptions are outside the supported COBOL subset");
                }
                Tok::Word(w) if w == "COPY" => {
                    return self.unsupported("COPY books are outside the supported COBOL subset");
                }
                Tok::Word(_) if self.word_at(1) == Some("SECTION") => {
                    self.advance();
                    self.advance();
                    self.expect_period()?;
                }
                Tok::Number(_) => self.data_entry()?,
                Tok::Period => {
                    self.advance();
                }
                other => return self.error(format!("unexpected {} in DATA DIVISION", describe(&other))),
            }
        }
    }

    fn data_entry(&mut self) -> PResult<()> {
        self.advance();
        if let Tok::Word(name) = self.peek().clone() {
            if !DATA_CLAUSES.contains(&name.as_str()) {
                self.advance();
                if name != "FILLER" {
                    self.symbols.intern(&name, SymbolCategory::Variable);
                }
            }
        }
        while !matches!(self.peek(), Tok::Period | Tok::Eof) {
            if self.at_division("PROCEDURE") {
                return self.error("data description entry not terminated by `.`");
            }
            self.advance();
        }
        self.expect_period()
    }

    fn procedure_body(&mut self) -> PResult<Vec<AstNode>> {
        let mut stmts = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(stmts),
                Tok::Period => {
                    self.advance();
                }
                Tok::Word(w) if w == "END" && self.word_at(1) == Some("PROGRAM") => {
                    self.advance();
                    self.advance();
                    if matches!(self.peek(), Tok::Word(_)) {
                        self.advance();
                    }
                    if *self.peek() == Tok::Period {
                        self.advance();
                    }
                    if *self.peek() != Tok::Eof {
                        return self.unsupported("multiple programs per file are outside the supported COBOL subset");
                    }
                    return Ok(stmts);
                }
                Tok::Word(w) if !VERBS.contains(&w.as_str()) && self.word_at(1) == Some("SECTION") => {
                    self.advance();
                    self.advance();
                    self.expect_period()?;
                }
                Tok::Word(w) if !VERBS.contains(&w.as_str()) && *self.peek_at(1) == Tok::Period => {
                    // paragraph header
                    self.advance();
                    self.advance();
                }
                Tok::Number(_) if *self.peek_at(1) == Tok::Period => {
                    self.advance();
                    self.advance();
                }
                _ => {
                    let before = self.pos;
                    stmts.extend(self.statements()?);
                    if self.pos == before {
                        return self.error(format!("unexpected {}", describe(self.peek())));
                    }
                    if !matches!(self.peek(), Tok::Period | Tok::Eof)
                        && !(self.is_word("END") && self.word_at(1) == Some("PROGRAM"))
                    {
                        return self.error(format!("unexpected {}", describe(self.peek())));
                    }
                }
            }
        }
    }

    // -- statements --------------------------------------------------------

    fn statements(&mut self) -> PResult<Vec<AstNode>> {
        let mut out = Vec::new();
        while !self.at_statement_end() {
            out.extend(self.statement()?);
        }
        Ok(out)
    }

    fn statement(&mut self) -> PResult<Vec<AstNode>> {
        let verb = match self.peek().clone() {
            Tok::Word(w) => w,
            other => return self.error(format!("expected a statement, found {}", describe(&other))),
        };
        if !VERBS.contains(&verb.as_str()) {
            return self.error(format!("expected a statement, found `{verb}`"));
        }
        match verb.as_str() {
            "ACCEPT" => {
                self.advance();
                let target = self.data_ref()?;
                if self.eat_word("FROM") {
                    self.advance();
                }
                self.eat_word("END-ACCEPT");
                Ok(vec![self.call_stmt("ACCEPT", vec![target])])
            }
            "DISPLAY" => {
                self.advance();
                let mut items = Vec::new();
                loop {
                    if self.at_statement_end() || self.at_verb() {
                        break;
                    }
                    if self.eat_word("UPON") {
                        self.advance();
                        continue;
                    }
                    if self.eat_word("WITH") || self.is_word("NO") {
                        self.eat_word("NO");
                        self.expect_word("ADVANCING")?;
                        continue;
                    }
                    items.push(self.primary()?);
                }
                self.eat_word("END-DISPLAY");
                Ok(vec![self.call_stmt("DISPLAY", items)])
            }
            "MOVE" => {
                self.advance();
                if self.is_word("CORRESPONDING") || self.is_word("CORR") {
                    return self.unsupported("MOVE CORRESPONDING is outside the supported COBOL subset");
                }
                let source = self.primary()?;
                self.expect_word("TO")?;
                let targets = self.targets()?;
                Ok(targets
                    .into_iter()
                    .map(|t| build::expr_stmt(build::assign(t, source.clone())))
                    .collect())
            }
            "COMPUTE" => {
                self.advance();
                let mut targets = Vec::new();
                while !self.is_punct("=") && !self.is_word("EQUAL") {
                    let t = self.data_ref()?;
                    let rounded = self.eat_word("ROUNDED");
                    targets.push((t, rounded));
                    if self.at_statement_end() {
                        return self.error("expected `=` in COMPUTE");
                    }
                }
                self.advance();
                let value = self.arith()?;
                self.no_size_error()?;
                self.eat_word("END-COMPUTE");
                Ok(targets
                    .into_iter()
                    .map(|(t, rounded)| self.assign_stmt(t, value.clone(), rounded))
                    .collect())
            }
            "ADD" => self.arithmetic_verb("ADD", "TO", ops::ADD),
            "SUBTRACT" => self.arithmetic_verb("SUBTRACT", "FROM", ops::SUB),
            "MULTIPLY" => self.arithmetic_verb("MULTIPLY", "BY", ops::MUL),
            "DIVIDE" => self.divide(),
            "IF" => self.if_statement().map(|s| vec![s]),
            "PERFORM" => self.perform(),
            "STOP" => {
                self.advance();
                self.expect_word("RUN")?;
                Ok(vec![self.call_stmt("exit", Vec::new())])
            }
            "GOBACK" => {
                self.advance();
                Ok(vec![self.call_stmt("exit", Vec::new())])
            }
            "EXIT" => {
                self.advance();
                if self.eat_word("PROGRAM") {
                    return Ok(vec![self.call_stmt("exit", Vec::new())]);
                }
                Ok(Vec::new())
            }
            "CONTINUE" => {
                self.advance();
                Ok(Vec::new())
            }
            "INITIALIZE" => {
                self.advance();
                let targets = self.targets()?;
                Ok(vec![self.call_stmt("INITIALIZE", targets)])
            }
            other => self.unsupported(format!("{other} is outside the supported COBOL subset")),
        }
    }

    fn call_stmt(&mut self, name: &str, params: Vec<AstNode>) -> AstNode {
        self.symbols.intern(name, SymbolCategory::Function);
        build::expr_stmt(build::call(name, params))
    }

    fn assign_stmt(&mut self, target: AstNode, value: AstNode, rounded: bool) -> AstNode {
        let value = if rounded {
            self.symbols.intern("ROUNDED", SymbolCategory::Function);
            build::call("ROUNDED", vec![value])
        } else {
            value
        };
        build::expr_stmt(build::assign(target, value))
    }

    /// Receiving fields up to the end of the statement.
    fn targets(&mut self) -> PResult<Vec<AstNode>> {
        let mut out = vec![self.data_ref()?];
        while matches!(self.peek(), Tok::Word(w) if !VERBS.contains(&w.as_str()) && !RESERVED.contains(&w.as_str()) && !SCOPE_ENDS.contains(&w.as_str()))
        {
            out.push(self.data_ref()?);
        }
        Ok(out)
    }

    /// Receiving fields with optional ROUNDED markers.
    fn rounded_targets(&mut self) -> PResult<Vec<(AstNode, bool)>> {
        let mut out = Vec::new();
        loop {
            let t = self.data_ref()?;
            let rounded = self.eat_word("ROUNDED");
            out.push((t, rounded));
            let more = matches!(self.peek(), Tok::Word(w) if !VERBS.contains(&w.as_str()) && !RESERVED.contains(&w.as_str()) && !SCOPE_ENDS.contains(&w.as_str()));
            if !more {
                return Ok(out);
            }
        }
    }

    fn no_size_error(&self) -> PResult<()> {
        if self.is_word("ON") || self.is_word("SIZE") || (self.is_word("NOT") && self.word_at(1) == Some("ON")) {
            return self.unsupported("SIZE ERROR phrases are outside the supported COBOL subset");
        }
        Ok(())
    }

    /// ADD/SUBTRACT/MULTIPLY: `verb a [b ...] link t [GIVING g]`.
    fn arithmetic_verb(&mut self, verb: &str, link: &str, op: &str) -> PResult<Vec<AstNode>> {
        self.advance();
        let mut operands = Vec::new();
        while !self.is_word(link) && !self.is_word("GIVING") {
            if self.at_statement_end() || self.at_verb() {
                return self.error(format!("expected {link} in {verb}"));
            }
            operands.push(self.primary()?);
        }
        let mut out = Vec::new();
        if self.eat_word("GIVING") {
            // ADD a b GIVING g
            let targets = self.rounded_targets()?;
            let value = fold(op, operands);
            for (t, rounded) in targets {
                out.push(self.assign_stmt(t, value.clone(), rounded));
            }
        } else {
            self.advance();
            if self.is_giving_form() {
                // ADD a TO b GIVING g: the TO operand joins the computation
                let last = self.primary()?;
                self.expect_word("GIVING")?;
                let targets = self.rounded_targets()?;
                let value = if op == ops::ADD {
                    let mut all = operands;
                    all.push(last);
                    fold(op, all)
                } else {
                    build::binary(op, last, fold(ops::ADD, operands))
                };
                for (t, rounded) in targets {
                    out.push(self.assign_stmt(t, value.clone(), rounded));
                }
            } else {
                let targets = self.rounded_targets()?;
                let amount = fold(ops::ADD, operands);
                for (t, rounded) in targets {
                    let value = build::binary(op, t.clone(), amount.clone());
                    out.push(self.assign_stmt(t, value, rounded));
                }
            }
        }
        self.no_size_error()?;
        self.eat_word(&format!("END-{verb}"));
        Ok(out)
    }

    /// After the linking word: a single operand followed by GIVING.
    fn is_giving_form(&self) -> bool {
        let mut i = 0;
        // operand may be followed by a subscript
        i += 1;
        if matches!(self.peek_at(i), Tok::Punct("(")) {
            let mut depth = 0;
            loop {
                match self.peek_at(i) {
                    Tok::Punct("(") => depth += 1,
                    Tok::Punct(")") => {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    Tok::Eof | Tok::Period => return false,
                    _ => {}
                }
                i += 1;
            }
        }
        matches!(self.peek_at(i), Tok::Word(w) if w == "GIVING")
    }

    fn divide(&mut self) -> PResult<Vec<AstNode>> {
        self.advance();
        let first = self.primary()?;
        let mut out = Vec::new();
        if self.eat_word("INTO") {
            let second = self.primary()?;
            if self.eat_word("GIVING") {
                let targets = self.rounded_targets()?;
                let value = build::binary(ops::DIV, second.clone(), first.clone());
                for (t, rounded) in targets {
                    out.push(self.assign_stmt(t, value.clone(), rounded));
                }
                self.remainder(&second, &first, &mut out)?;
            } else {
                // DIVIDE a INTO b [c ...]: the receiving fields are divided in place
                let mut targets = vec![(second, self.eat_word("ROUNDED"))];
                if !self.at_statement_end() && !self.at_verb() && !self.is_word("ON") && !self.is_word("SIZE") {
                    targets.extend(self.rounded_targets()?);
                }
                for (t, rounded) in targets {
                    let value = build::binary(ops::DIV, t.clone(), first.clone());
                    out.push(self.assign_stmt(t, value, rounded));
                }
            }
        } else if self.eat_word("BY") {
            let second = self.primary()?;
            self.expect_word("GIVING")?;
            let targets = self.rounded_targets()?;
            let value = build::binary(ops::DIV, first.clone(), second.clone());
            for (t, rounded) in targets {
                out.push(self.assign_stmt(t, value.clone(), rounded));
            }
            self.remainder(&first, &second, &mut out)?;
        } else {
            return self.error("expected INTO or BY in DIVIDE");
        }
        self.no_size_error()?;
        self.eat_word("END-DIVIDE");
        Ok(out)
    }

    fn remainder(&mut self, dividend: &AstNode, divisor: &AstNode, out: &mut Vec<AstNode>) -> PResult<()> {
        if self.eat_word("REMAINDER") {
            let r = self.data_ref()?;
            let value = build::binary("REM", dividend.clone(), divisor.clone());
            out.push(build::expr_stmt(build::assign(r, value)));
        }
        Ok(())
    }

    fn if_statement(&mut self) -> PResult<AstNode> {
        self.advance();
        let cond = self.condition()?;
        self.eat_word("THEN");
        if self.is_word("NEXT") {
            return self.unsupported("NEXT SENTENCE is outside the supported COBOL subset");
        }
        let then = self.statements()?;
        let mut node = AstNode::branch(NodeKind::Ifthen)
            .with(RoleLabel::CondExpr, cond)
            .with(RoleLabel::ThenStmt, build::compound(then));
        if self.eat_word("ELSE") {
            if self.is_word("NEXT") {
                return self.unsupported("NEXT SENTENCE is outside the supported COBOL subset");
            }
            let other = self.statements()?;
            node.push(RoleLabel::ElseStmt, build::compound(other));
        }
        self.eat_word("END-IF");
        Ok(node)
    }

    fn perform(&mut self) -> PResult<Vec<AstNode>> {
        self.advance();
        if self.eat_word("WITH") {
            self.expect_word("TEST")?;
            if self.is_word("AFTER") {
                return self.unsupported("PERFORM WITH TEST AFTER is outside the supported COBOL subset");
            }
            self.expect_word("BEFORE")?;
        }
        let node = if self.eat_word("UNTIL") {
            let cond = self.condition()?;
            let body = self.perform_body()?;
            AstNode::branch(NodeKind::Whilestmt)
                .with(RoleLabel::CondExpr, build::unary(ops::NOT, cond))
                .with(RoleLabel::BodyStmt, body)
        } else if self.eat_word("VARYING") {
            let var = self.data_ref()?;
            self.expect_word("FROM")?;
            let start = self.arith()?;
            self.expect_word("BY")?;
            let step = self.arith()?;
            self.expect_word("UNTIL")?;
            let cond = self.condition()?;
            if self.is_word("AFTER") {
                return self.unsupported("PERFORM VARYING ... AFTER is outside the supported COBOL subset");
            }
            let body = self.perform_body()?;
            AstNode::branch(NodeKind::Forstmt)
                .with(RoleLabel::InitStmt, build::expr_stmt(build::assign(var.clone(), start)))
                .with(RoleLabel::CondExpr, build::unary(ops::NOT, cond))
                .with(
                    RoleLabel::IncrStmt,
                    build::expr_stmt(build::assign(var.clone(), build::binary(ops::ADD, var, step))),
                )
                .with(RoleLabel::BodyStmt, body)
        } else if matches!(self.peek_at(1), Tok::Word(w) if w == "TIMES")
            && matches!(self.peek(), Tok::Number(_) | Tok::Word(_))
        {
            let count = self.primary()?;
            self.expect_word("TIMES")?;
            let body = self.perform_body()?;
            AstNode::branch(NodeKind::Forstmt)
                .with(RoleLabel::CondExpr, count)
                .with(RoleLabel::BodyStmt, body)
        } else if self.at_verb() {
            let stmts = self.statements()?;
            self.expect_word("END-PERFORM")?;
            return Ok(stmts);
        } else {
            return self.unsupported("out-of-line PERFORM is outside the supported COBOL subset");
        };
        Ok(vec![node])
    }

    fn perform_body(&mut self) -> PResult<AstNode> {
        if !self.at_verb() && !self.is_word("END-PERFORM") {
            return self.unsupported("out-of-line PERFORM is outside the supported COBOL subset");
        }
        let stmts = self.statements()?;
        self.expect_word("END-PERFORM")?;
        Ok(build::compound(stmts))
    }

    // -- conditions --------------------------------------------------------

    fn condition(&mut self) -> PResult<AstNode> {
        let mut lhs = self.and_condition()?;
        while self.eat_word("OR") {
            let rhs = self.and_condition()?;
            lhs = build::binary(ops::OR, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_condition(&mut self) -> PResult<AstNode> {
        let mut lhs = self.not_condition()?;
        while self.eat_word("AND") {
            let rhs = self.not_condition()?;
            lhs = build::binary(ops::AND, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_condition(&mut self) -> PResult<AstNode> {
        if self.eat_word("NOT") {
            let inner = self.not_condition()?;
            return Ok(build::unary(ops::NOT, inner));
        }
        if self.is_punct("(") {
            let save = self.pos;
            self.advance();
            if let Ok(inner) = self.condition() {
                if self.eat_punct(")") && !self.at_relational() && !self.at_arith_operator() {
                    return Ok(build::unary(ops::PAREN, inner));
                }
            }
            self.pos = save;
        }
        self.relation()
    }

    fn at_arith_operator(&self) -> bool {
        ["+", "-", "*", "/", "**"].iter().any(|p| self.is_punct(p))
    }

    fn at_relational(&self) -> bool {
        if [">", "<", "=", ">=", "<=", "<>"].iter().any(|p| self.is_punct(p)) {
            return true;
        }
        matches!(self.peek(), Tok::Word(w) if matches!(w.as_str(), "IS" | "NOT" | "GREATER" | "LESS" | "EQUAL" | "POSITIVE" | "NEGATIVE" | "ZERO"))
    }

    fn relation(&mut self) -> PResult<AstNode> {
        let lhs = self.arith()?;
        self.eat_word("IS");
        let negated = self.is_word("NOT") && self.word_at(1) != Some("ADVANCING") && {
            // `a NOT = b` vs a following `NOT` condition after AND/OR
            let next_is_rel = matches!(self.peek_at(1), Tok::Punct(p) if matches!(*p, ">" | "<" | "=" | ">=" | "<=" | "<>"))
                || matches!(self.peek_at(1), Tok::Word(w) if matches!(w.as_str(), "GREATER" | "LESS" | "EQUAL" | "POSITIVE" | "NEGATIVE" | "ZERO" | "NUMERIC" | "ALPHABETIC"));
            next_is_rel
        };
        if negated {
            self.advance();
        }
        let op = match self.relational_operator()? {
            Some(op) => op,
            None => {
                if negated || lhs.kind != NodeKind::Ident {
                    return self.error(format!("expected a relational operator, found {}", describe(self.peek())));
                }
                // condition-name (level 88)
                return Ok(lhs);
            }
        };
        let (op, rhs) = match op {
            RelOp::Cmp(op) => (op, self.arith()?),
            RelOp::Sign(op) => (op, AstNode::literal("0")),
        };
        let op = if negated { negate(op) } else { op };
        Ok(build::binary(op, lhs, rhs))
    }

    fn relational_operator(&mut self) -> PResult<Option<RelOp>> {
        let sym = match self.peek() {
            Tok::Punct(">") => Some(ops::GT),
            Tok::Punct("<") => Some(ops::LT),
            Tok::Punct("=") => Some(ops::EQ),
            Tok::Punct(">=") => Some(ops::GE),
            Tok::Punct("<=") => Some(ops::LE),
            Tok::Punct("<>") => Some(ops::NE),
            _ => None,
        };
        if let Some(op) = sym {
            self.advance();
            return Ok(Some(RelOp::Cmp(op)));
        }
        let word = match self.peek() {
            Tok::Word(w) => w.clone(),
            _ => return Ok(None),
        };
        let op = match word.as_str() {
            "GREATER" | "LESS" => {
                self.advance();
                self.eat_word("THAN");
                let or_equal = if self.is_word("OR") && self.word_at(1) == Some("EQUAL") {
                    self.advance();
                    self.advance();
                    self.eat_word("TO");
                    true
                } else {
                    false
                };
                RelOp::Cmp(match (word.as_str(), or_equal) {
                    ("GREATER", false) => ops::GT,
                    ("GREATER", true) => ops::GE,
                    ("LESS", false) => ops::LT,
                    _ => ops::LE,
                })
            }
            "EQUAL" => {
                self.advance();
                self.eat_word("TO");
                RelOp::Cmp(ops::EQ)
            }
            "POSITIVE" => {
                self.advance();
                RelOp::Sign(ops::GT)
            }
            "NEGATIVE" => {
                self.advance();
                RelOp::Sign(ops::LT)
            }
            "ZERO" | "ZEROS" | "ZEROES" if self.peek_at(1) != &Tok::Punct("=") => {
                self.advance();
                RelOp::Sign(ops::EQ)
            }
            "NUMERIC" | "ALPHABETIC" => {
                return self.unsupported("class conditions are outside the supported COBOL subset");
            }
            _ => return Ok(None),
        };
        Ok(Some(op))
    }

    // -- arithmetic --------------------------------------------------------

    fn arith(&mut self) -> PResult<AstNode> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat_punct("+") {
                ops::ADD
            } else if self.eat_punct("-") {
                ops::SUB
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = build::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> PResult<AstNode> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.eat_punct("*") {
                ops::MUL
            } else if self.eat_punct("/") {
                ops::DIV
            } else {
                return Ok(lhs);
            };
            let rhs = self.factor()?;
            lhs = build::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> PResult<AstNode> {
        let base = self.signed()?;
        if self.eat_punct("**") {
            let exp = self.factor()?;
            return Ok(build::binary(ops::POW, base, exp));
        }
        Ok(base)
    }

    fn signed(&mut self) -> PResult<AstNode> {
        if self.eat_punct("-") {
            return Ok(build::unary(ops::NEG, self.signed()?));
        }
        if self.eat_punct("+") {
            return Ok(build::unary(ops::PLUS, self.signed()?));
        }
        if self.eat_punct("(") {
            let inner = self.arith()?;
            self.expect_punct(")")?;
            return Ok(build::unary(ops::PAREN, inner));
        }
        self.primary()
    }

    /// Literal, figurative constant, intrinsic function call or data reference.
    fn primary(&mut self) -> PResult<AstNode> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.advance();
                Ok(AstNode::literal(n))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(AstNode::literal(if s.is_empty() { "''".to_string() } else { s }))
            }
            Tok::Punct("(") | Tok::Punct("-") | Tok::Punct("+") => self.signed(),
            Tok::Word(w) if w == "ALL" => self.unsupported("ALL literals are outside the supported COBOL subset"),
            Tok::Word(w) if FIGURATIVE.iter().any(|(f, _)| *f == w) => {
                self.advance();
                let canon = FIGURATIVE.iter().find(|(f, _)| *f == w).map(|(_, c)| *c).unwrap_or_default();
                Ok(AstNode::literal(canon))
            }
            Tok::Word(w) if w == "FUNCTION" => {
                self.advance();
                let name = match self.advance() {
                    Tok::Word(n) => n,
                    other => return self.error(format!("expected a function name, found {}", describe(&other))),
                };
                let mut args = Vec::new();
                if self.eat_punct("(") {
                    while !self.is_punct(")") {
                        if matches!(self.peek(), Tok::Eof | Tok::Period) {
                            return self.error("unterminated function argument list");
                        }
                        args.push(self.arith()?);
                    }
                    self.expect_punct(")")?;
                }
                if (name == "MOD" || name == "REM") && args.len() == 2 {
                    let b = args.pop().unwrap_or_else(|| AstNode::literal("0"));
                    let a = args.pop().unwrap_or_else(|| AstNode::literal("0"));
                    return Ok(build::binary(&name, a, b));
                }
                self.symbols.intern(&name, SymbolCategory::Function);
                Ok(build::call(&name, args))
            }
            Tok::Word(_) => self.data_ref(),
            other => self.error(format!("expected an operand, found {}", describe(&other))),
        }
    }

    /// Data name with an optional single subscript.
    fn data_ref(&mut self) -> PResult<AstNode> {
        let name = match self.peek().clone() {
            Tok::Word(w) if !VERBS.contains(&w.as_str()) && !RESERVED.contains(&w.as_str()) && !SCOPE_ENDS.contains(&w.as_str()) => w,
            other => return self.error(format!("expected a data name, found {}", describe(&other))),
        };
        if self.has_data_division {
            if self.symbols.lookup(&name, SymbolCategory::Variable).is_none() {
                return self.error(format!("`{name}` is not declared in the DATA DIVISION"));
            }
        } else {
            self.symbols.intern(&name, SymbolCategory::Variable);
        }
        self.advance();
        if self.is_word("OF") || self.is_word("IN") {
            return self.unsupported("qualified data names are outside the supported COBOL subset");
        }
        let var = AstNode::var(&name);
        if self.eat_punct("(") {
            let idx = self.arith()?;
            if self.is_punct(":") {
                return self.unsupported("reference modification is outside the supported COBOL subset");
            }
            if !self.is_punct(")") {
                return self.unsupported("multi-dimensional subscripts are outside the supported COBOL subset");
            }
            self.advance();
            return Ok(build::binary(ops::SUBSCRIPT, var, idx));
        }
        Ok(var)
    }
}

enum RelOp {
    Cmp(&'static str),
    /// Sign condition: comparison against zero.
    Sign(&'static str),
}

fn negate(op: &'static str) -> &'static str {
    match op {
        ops::GT => ops::LE,
        ops::LE => ops::GT,
        ops::LT => ops::GE,
        ops::GE => ops::LT,
        ops::EQ => ops::NE,
        _ => ops::EQ,
    }
}

/// Left fold of `op` over the operands (a single operand is returned as is).
fn fold(op: &str, operands: Vec<AstNode>) -> AstNode {
    let mut iter = operands.into_iter();
    let first = iter.next().unwrap_or_else(|| AstNode::literal("0"));
    iter.fold(first, |acc, x| build::binary(op, acc, x))
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Word(w) => format!("`{w}`"),
        Tok::Number(n) => format!("number `{n}`"),
        Tok::Str(_) => "literal".into(),
        Tok::Pic(_) => "picture string".into(),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Period => "`.`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses one COBOL program.
pub fn parse_cobol(src: &SourceFile) -> Result<CompilationUnit, ParseDiagnostic> {
    if src.text.trim().is_empty() {
        return Err(ParseDiagnostic::error(1, 1, "empty source"));
    }
    let toks = lex(&src.text)?;
    let mut parser = Parser { toks, pos: 0, symbols: SymbolTable::new(), has_data_division: false };
    let root = parser.program()?;
    Ok(CompilationUnit::new(Language::Cobol, src.source_id(), root, parser.symbols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::Severity;
    use crate::ir::validate;
    use crate::sbt::render;

    fn parse(text: &str) -> Result<CompilationUnit, ParseDiagnostic> {
        parse_cobol(&SourceFile::new("t.cob", text))
    }

    fn body(cu: &CompilationUnit) -> &AstNode {
        &cu.root.children[0].node.children[0].node
    }

    #[test]
    fn stop_run_is_exit_call() {
        let cu = parse("PROCEDURE DIVISION. STOP RUN.").unwrap();
        assert!(validate(&cu).is_empty());
        assert_eq!(
            render(body(&cu)),
            "(Compstmt(has_stmt(Exprstmt(has_expr(Call(LI_name(exit)exit)LI_name)Call)has_expr)Exprstmt)has_stmt)Compstmt"
        );
    }

    #[test]
    fn move_is_assignment() {
        let cu = parse("PROCEDURE DIVISION. MOVE 5 TO X. STOP RUN.").unwrap();
        assert!(validate(&cu).is_empty(), "{:?}", validate(&cu));
        let stmts = &body(&cu).children;
        assert_eq!(stmts.len(), 2);
        let expected = build::expr_stmt(build::assign(AstNode::var("X"), AstNode::literal("5")));
        assert_eq!(stmts[0].node, expected);
    }

    #[test]
    fn undeclared_name_with_data_division() {
        let src = "DATA DIVISION.\nWORKING-STORAGE SECTION.\n01 A PIC 9.\nPROCEDURE DIVISION.\nMOVE 1 TO B.\n";
        let d = parse(src).unwrap_err();
        assert_eq!(d.severity, Severity::Error);
        assert_eq!((d.line, d.column), (5, 11));
    }

    #[test]
    fn picture_strings_and_periods() {
        let src = "DATA DIVISION.\nWORKING-STORAGE SECTION.\n01 A PIC 9(5)V99.\n01 B PIC S9(3).99 VALUE 1.5.\n01 C.\n   05 D PIC X(10) OCCURS 3 TIMES.\n   05 FILLER PIC X.\nPROCEDURE DIVISION.\nMOVE A TO D(2). STOP RUN.\n";
        let cu = parse(src).unwrap();
        let names: Vec<&str> = cu.symbols.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, vec!["A", "B", "C", "D", "exit"]);
        assert!(validate(&cu).is_empty());
    }

    #[test]
    fn arithmetic_verbs() {
        let a = parse("PROCEDURE DIVISION. ADD 1 TO I. SUBTRACT B FROM C GIVING D. MULTIPLY 2 BY E. DIVIDE 4 INTO F.")
            .unwrap();
        let b = parse("PROCEDURE DIVISION. COMPUTE I = I + 1. COMPUTE D = C - B. COMPUTE E = E * 2. COMPUTE F = F / 4.")
            .unwrap();
        assert_eq!(body(&a), body(&b));
    }

    #[test]
    fn divide_with_remainder_and_rounding() {
        let cu = parse("PROCEDURE DIVISION. DIVIDE A BY B GIVING Q ROUNDED REMAINDER R.").unwrap();
        assert!(validate(&cu).is_empty(), "{:?}", validate(&cu));
        let text = render(body(&cu));
        assert!(text.contains("(LI_name(ROUNDED)ROUNDED)LI_name"), "{text}");
        assert!(text.contains("(Operator(REM)REM)Operator"), "{text}");
    }

    #[test]
    fn perform_forms() {
        let cu = parse(
            "PROCEDURE DIVISION.\n PERFORM 3 TIMES DISPLAY 'A' END-PERFORM\n PERFORM UNTIL I > 5 ADD 1 TO I END-PERFORM\n PERFORM VARYING I FROM 1 BY 1 UNTIL I > N DISPLAY I END-PERFORM.\n STOP RUN.",
        )
        .unwrap();
        assert!(validate(&cu).is_empty(), "{:?}", validate(&cu));
        let kinds: Vec<NodeKind> = body(&cu).children.iter().map(|e| e.node.kind).collect();
        assert_eq!(kinds, vec![NodeKind::Forstmt, NodeKind::Whilestmt, NodeKind::Forstmt, NodeKind::Exprstmt]);
        let d = parse("PROCEDURE DIVISION. PERFORM PARA-1. STOP RUN.").unwrap_err();
        assert_eq!(d.severity, Severity::Unsupported);
    }

    #[test]
    fn verbal_relations_match_symbols() {
        let a = parse("PROCEDURE DIVISION. IF A IS GREATER THAN OR EQUAL TO B AND C NOT = D DISPLAY 'X' END-IF.").unwrap();
        let b = parse("PROCEDURE DIVISION. IF A >= B AND C <> D DISPLAY 'X' END-IF.").unwrap();
        assert_eq!(body(&a), body(&b));
    }

    #[test]
    fn nested_if_and_period_scope() {
        let cu = parse("PROCEDURE DIVISION. IF A > 1 IF B > 1 DISPLAY 'X' ELSE DISPLAY 'Y'. DISPLAY 'Z'.").unwrap();
        let stmts = &body(&cu).children;
        assert_eq!(stmts.len(), 2);
        let outer = &stmts[0].node;
        assert_eq!(outer.children.len(), 2, "outer IF has no ELSE");
        let inner = &outer.children[1].node.children[0].node;
        assert_eq!(inner.kind, NodeKind::Ifthen);
        assert_eq!(inner.children.len(), 3);
    }

    #[test]
    fn parenthesised_arithmetic_in_condition() {
        let cu = parse("PROCEDURE DIVISION. IF (A + 1) > B DISPLAY 'X' END-IF.").unwrap();
        let cond = &body(&cu).children[0].node.children[0].node;
        assert_eq!(cond.kind, NodeKind::Binary);
        let cu = parse("PROCEDURE DIVISION. IF (A > B) OR (A = 1) DISPLAY 'X' END-IF.").unwrap();
        let cond = &body(&cu).children[0].node.children[0].node;
        assert_eq!(render(cond).matches("(Operator(()()Operator").count(), 2);
    }

    #[test]
    fn fixed_and_free_layouts_agree() {
        let fixed = "000100 IDENTIFICATION DIVISION.\n000200 PROGRAM-ID. P.\n000300 DATA DIVISION.\n000400 WORKING-STORAGE SECTION.\n000500 01 X PIC 99.\n000600*COMMENT LINE\n000700 PROCEDURE DIVISION.\n000800     ACCEPT X.\n000900     DISPLAY X.                                                   SEQ00001\n001000     STOP RUN.\n";
        let free = "IDENTIFICATION DIVISION.\nPROGRAM-ID. P.\nDATA DIVISION. WORKING-STORAGE SECTION.\n01 X PIC 99.\n*> comment\nPROCEDURE DIVISION.\nACCEPT X. DISPLAY X. *> trailing\nSTOP RUN.\n";
        assert!(is_fixed_format(fixed));
        assert!(!is_fixed_format(free));
        let a = parse(fixed).unwrap();
        let b = parse(free).unwrap();
        assert_eq!(a.root, b.root);
        assert_eq!(a.symbols, b.symbols);
    }

    #[test]
    fn identification_text_is_not_lexed() {
        let src = "IDENTIFICATION DIVISION.\nPROGRAM-ID. P.\nAUTHOR. O'Brien & co.\nPROCEDURE DIVISION.\nSTOP RUN.\n";
        assert!(parse(src).is_ok());
    }

    #[test]
    fn unsupported_constructs() {
        for src in [
            "PROCEDURE DIVISION. EVALUATE TRUE WHEN OTHER CONTINUE END-EVALUATE.",
            "DATA DIVISION. FILE SECTION. FD F. PROCEDURE DIVISION. STOP RUN.",
            "PROCEDURE DIVISION. MOVE CORRESPONDING A TO B.",
            "PROCEDURE DIVISION. GO TO P1.",
        ] {
            assert_eq!(parse(src).unwrap_err().severity, Severity::Unsupported, "{src}");
        }
        assert_eq!(parse("IDENTIFICATION DIVISION.\n").unwrap_err().message, "missing PROCEDURE DIVISION");
    }
}
