//! Rule and fact file parsing.
//!
//! Files are line oriented:
//!
//! ```text
//! # comment
//! [obligation]
//! 7. Forbidden(A) AND P(A) => Warning(P(A))
//! [deontic rewrite]
//! @deontic.flatten P(P(A)) => P(A)
//! ```
//!
//! A line with a top-level arrow (`=>` or `=====>`) is a rule, any other
//! line is a fact. A leading listing number (`7.` or `7`) is ignored, an
//! `@id` prefix names the rule explicitly, and `===== Title =====` banners
//! open a group the same way `[title]` does.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::term::{canonicalize, chain_operands, BinOp, Number, Term};

/// Group name given to rules that appear before any header.
pub const DEFAULT_GROUP: &str = "main";
/// Declaring this group switches on built-in multiplicity counting.
pub const COUNTING_GROUP: &str = "counting";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{file}:{line}:{column}: {message}")]
pub struct ParseError {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
    /// The offending token text, when there is one.
    pub token: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Standard,
    /// Applied at every subterm position of every fact.
    Rewrite,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub group: String,
    pub kind: RuleKind,
    pub premises: Vec<Term>,
    pub guards: Vec<Term>,
    pub conclusion: Term,
}

impl Rule {
    pub fn is_ground(&self) -> bool {
        self.premises.iter().chain(&self.guards).all(Term::is_ground) && self.conclusion.is_ground()
    }

    /// `A => (1)A` and `A AND (I)A => (I+1)A` style rules, which the
    /// counting built-in replaces when the counting group is declared.
    pub fn is_counting_law(&self) -> bool {
        let Term::Ann(ann, body) = &self.conclusion else {
            return false;
        };
        if !body.is_var() || !self.guards.is_empty() {
            return false;
        }
        match self.premises.as_slice() {
            [a] => a == body.as_ref() && ann.as_num() == Some(&Number::from_i64(1)),
            [a, b] | [b, a] if a == body.as_ref() => match (b, ann.as_ref()) {
                (Term::Ann(i, inner), Term::Bin(BinOp::Add, l, one)) => {
                    i.is_var() && inner == body && l == i && one.as_num() == Some(&Number::from_i64(1))
                }
                _ => false,
            },
            _ => false,
        }
    }

    /// The rule read as a ground implication fact, for rules without
    /// variables or guards.
    pub fn as_implication(&self) -> Option<Term> {
        if !self.guards.is_empty() || !self.is_ground() {
            return None;
        }
        let lhs = conjunction(&self.premises)?;
        Some(canonicalize(&Term::bin(BinOp::Implies, lhs, self.conclusion.clone())))
    }
}

fn conjunction(terms: &[Term]) -> Option<Term> {
    let mut it = terms.iter().cloned();
    let first = it.next()?;
    Some(it.fold(first, |acc, t| Term::bin(BinOp::And, acc, t)))
}

#[derive(Clone, Debug, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub initial_facts: Vec<Term>,
    /// Every group that was declared or holds a rule.
    pub groups: BTreeSet<String>,
    /// Source names, for diagnostics only.
    pub sources: Vec<String>,
}

/// Structural equality; source names are not compared.
impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules && self.initial_facts == other.initial_facts && self.groups == other.groups
    }
}

impl Eq for Program {}

impl Program {
    /// True when the counting group is declared or a counting law
    /// (`A => (1)A`) appears anywhere.
    pub fn counting_enabled(&self) -> bool {
        self.groups.contains(COUNTING_GROUP) || self.rules.iter().any(Rule::is_counting_law)
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn rules_in_group<'a>(&'a self, group: &'a str) -> impl Iterator<Item = &'a Rule> + 'a {
        self.rules.iter().filter(move |r| r.group == group)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

/// Canonical text for a program; parsing it yields an equal program.
pub fn render(p: &Program) -> String {
    let mut out = String::new();
    for fact in &p.initial_facts {
        out.push_str(&fact.render_in_context(2));
        out.push('\n');
    }
    let mut ordinals: HashMap<&str, usize> = HashMap::new();
    let mut current: Option<(&str, RuleKind)> = None;
    for rule in &p.rules {
        if current != Some((rule.group.as_str(), rule.kind)) {
            match rule.kind {
                RuleKind::Standard => out.push_str(&format!("[{}]\n", rule.group)),
                RuleKind::Rewrite => out.push_str(&format!("[{} rewrite]\n", rule.group)),
            }
            current = Some((rule.group.as_str(), rule.kind));
        }
        let n = ordinals.entry(rule.group.as_str()).or_insert(0);
        *n += 1;
        if rule.id != format!("{}.{}", rule.group, n) {
            out.push('@');
            out.push_str(&rule.id);
            out.push(' ');
        }
        let lhs: Vec<String> = rule.premises.iter().chain(&rule.guards).map(|t| t.render_in_context(4)).collect();
        out.push_str(&lhs.join(" AND "));
        out.push_str(" => ");
        out.push_str(&rule.conclusion.render());
        out.push('\n');
    }
    let with_rules: BTreeSet<&str> = p.rules.iter().map(|r| r.group.as_str()).collect();
    for g in &p.groups {
        if !with_rules.contains(g.as_str()) {
            out.push_str(&format!("[{g}]\n"));
        }
    }
    out
}

/// Parses a single term; the text may span several lines.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let toks = lex(text, "<term>", 1, 1)?;
    let mut p = Parser::new(toks, "<term>", text);
    let t = p.expr(0)?;
    p.expect_end()?;
    Ok(canonicalize(&t))
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_sources(&[("<input>", text)])
}

/// Parses several rule files as one program. Group ordinals continue
/// across files, so `[protocol]` in two files yields distinct ids.
pub fn parse_sources<N: AsRef<str>, T: AsRef<str>>(sources: &[(N, T)]) -> Result<Program, ParseError> {
    let mut b = Builder::default();
    for (name, text) in sources {
        b.source(name.as_ref(), text.as_ref())?;
    }
    Ok(b.program)
}

/// Parses a fact file: one ground term per line.
pub fn parse_facts(name: &str, text: &str) -> Result<Vec<Term>, ParseError> {
    let mut facts = FactSet::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let toks = lex(line, name, line_no, 1)?;
        let mut p = Parser::new(toks, name, line);
        let start = p.here();
        let t = canonicalize(&p.expr(0)?);
        p.expect_end()?;
        if !t.is_ground() {
            return Err(err_at(name, start, "non-ground fact", None));
        }
        facts.add_line(t);
    }
    Ok(facts.terms)
}

#[derive(Default)]
struct FactSet {
    terms: Vec<Term>,
    seen: HashSet<Term>,
}

impl FactSet {
    /// `F Is-In Beginning` asserts both the relation and `F` itself.
    fn add_line(&mut self, t: Term) {
        let bare = match &t {
            Term::Bin(BinOp::IsIn, f, b) if b.as_atom() == Some("Beginning") => Some(f.as_ref().clone()),
            _ => None,
        };
        self.add(t);
        if let Some(f) = bare {
            self.add(f);
        }
    }

    fn add(&mut self, t: Term) {
        if self.seen.insert(t.clone()) {
            self.terms.push(t);
        }
    }
}

#[derive(Default)]
struct Builder {
    program: Program,
    facts: FactSet,
    ordinals: HashMap<String, usize>,
    ids: HashSet<String>,
}

impl Builder {
    fn source(&mut self, name: &str, text: &str) -> Result<(), ParseError> {
        self.program.sources.push(name.to_string());
        let mut group = DEFAULT_GROUP.to_string();
        let mut kind = RuleKind::Standard;
        let listing = text.lines().any(|l| has_dotted_label(strip_comment(l)));
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw);
            if line.trim().is_empty() {
                continue;
            }
            let offset = listing_label_len(line);
            let rest = &line[offset..];
            let lead = rest.len() - rest.trim_start().len();
            let col = line[..offset + lead].chars().count() + 1;
            let body = rest.trim();
            if body.starts_with('[') {
                (group, kind) = parse_header(body, name, line_no, col)?;
                self.program.groups.insert(group.clone());
                continue;
            }
            let plain_title = if listing && offset == 0 { section_title(body) } else { None };
            if let Some(title) = banner_title(body).or(plain_title) {
                group = title;
                kind = RuleKind::Standard;
                self.program.groups.insert(group.clone());
                continue;
            }
            self.line(name, line_no, col, body, &group, kind)?;
        }
        self.program.initial_facts = self.facts.terms.clone();
        Ok(())
    }

    fn line(
        &mut self,
        file: &str,
        line_no: usize,
        col: usize,
        body: &str,
        group: &str,
        kind: RuleKind,
    ) -> Result<(), ParseError> {
        let mut toks = lex(body, file, line_no, col)?;
        let explicit_id = match toks.first() {
            Some(Token { tok: Tok::At(id), .. }) => {
                let id = id.clone();
                let t = toks.remove(0);
                Some((id, t.pos))
            }
            _ => None,
        };
        let mut p = Parser::new(toks, file, body);
        let start = p.here();
        let lhs = p.expr(2)?;
        if !p.eat_arrow() {
            p.expect_end()?;
            if let Some((_, pos)) = explicit_id {
                return Err(err_at(file, pos, "rule id on a fact line", None));
            }
            let fact = canonicalize(&lhs);
            if !fact.is_ground() {
                return Err(err_at(file, start, "non-ground fact", Some(fact.render())));
            }
            self.facts.add_line(fact);
            return Ok(());
        }
        let rhs = p.expr(1)?;
        p.expect_end()?;

        let ordinal = self.ordinals.entry(group.to_string()).or_insert(0);
        *ordinal += 1;
        let id = match &explicit_id {
            Some((id, _)) => id.clone(),
            None => format!("{group}.{ordinal}"),
        };
        let id_pos = explicit_id.as_ref().map(|(_, p)| *p).unwrap_or(start);
        if !self.ids.insert(id.clone()) {
            return Err(err_at(file, id_pos, "duplicate rule id", Some(id)));
        }
        let rule = build_rule(id, group, kind, canonicalize(&lhs), canonicalize(&rhs))
            .map_err(|msg| err_at(file, start, &msg, None))?;
        self.program.groups.insert(group.to_string());
        self.program.rules.push(rule);
        Ok(())
    }
}

fn build_rule(id: String, group: &str, kind: RuleKind, lhs: Term, conclusion: Term) -> Result<Rule, String> {
    let parts: Vec<Term> = chain_operands(BinOp::And, &lhs).into_iter().cloned().collect();
    let is_candidate = |t: &Term| match t {
        Term::Bin(op, l, r) => {
            op.is_comparison() && l.is_arithmetic_expr() && r.is_arithmetic_expr() && !t.vars().is_empty()
        }
        _ => false,
    };
    let bound: BTreeSet<char> = parts.iter().filter(|t| !is_candidate(t)).flat_map(Term::vars).collect();
    let (guards, premises): (Vec<Term>, Vec<Term>) =
        parts.into_iter().partition(|t| is_candidate(t) && t.vars().is_subset(&bound));
    let pattern_vars: BTreeSet<char> = premises.iter().flat_map(Term::vars).collect();
    if let Some(v) = conclusion.vars().difference(&pattern_vars).next() {
        return Err(format!("variable `{v}` in conclusion not bound by premises"));
    }
    if premises.is_empty() {
        return Err("rule has only guards".to_string());
    }
    if kind == RuleKind::Rewrite && (premises.len() != 1 || !guards.is_empty()) {
        return Err("rewrite rules take exactly one premise and no guards".to_string());
    }
    Ok(Rule { id, group: group.to_string(), kind, premises, guards, conclusion })
}

fn parse_header(body: &str, file: &str, line: usize, col: usize) -> Result<(String, RuleKind), ParseError> {
    let bad = |msg: &str| ParseError {
        file: file.to_string(),
        line,
        column: col,
        message: msg.to_string(),
        token: Some(body.to_string()),
    };
    let inner =
        body.strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(|| bad("malformed group header"))?;
    let words: Vec<&str> = inner.split_whitespace().collect();
    let (name, kind) = match words.as_slice() {
        [name] => (*name, RuleKind::Standard),
        [name, "rewrite"] => (*name, RuleKind::Rewrite),
        _ => return Err(bad("malformed group header")),
    };
    if !is_identifier(name) {
        return Err(bad("invalid group name"));
    }
    Ok((name.to_string(), kind))
}

/// `=====Input Rules =====` → `input_rules`.
fn banner_title(body: &str) -> Option<String> {
    if !body.starts_with("===") || !body.ends_with('=') || body.contains('>') {
        return None;
    }
    normalize_title(body.trim_matches('=').trim())
}

/// In a numbered listing, an unnumbered line of plain words such as
/// `Obligation Semantics` titles the rules below it.
fn section_title(body: &str) -> Option<String> {
    if body.split_whitespace().all(is_identifier) && !body.split_whitespace().any(|w| w == "AND" || w == "OR") {
        normalize_title(body)
    } else {
        None
    }
}

fn has_dotted_label(line: &str) -> bool {
    let n = listing_label_len(line);
    n > 0 && line[..n].trim_end().ends_with('.')
}

fn normalize_title(title: &str) -> Option<String> {
    if title.is_empty() {
        return None;
    }
    let mut name: String =
        title.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
    while name.contains("__") {
        name = name.replace("__", "_");
    }
    let name = name.trim_matches('_').to_string();
    if name.is_empty() || name.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    Some(name)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Byte length of a leading listing number such as `12.` or `3` plus the
/// whitespace after it, or 0 when the line has none.
fn listing_label_len(line: &str) -> usize {
    let b = line.as_bytes();
    let mut i = 0;
    while i < b.len() && b[i].is_ascii_whitespace() {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i == digits_start {
        return 0;
    }
    let dotted = i < b.len() && b[i] == b'.';
    if dotted {
        i += 1;
    }
    let ws_start = i;
    while i < b.len() && b[i].is_ascii_whitespace() {
        i += 1;
    }
    if i == ws_start || i == b.len() {
        return 0;
    }
    if dotted {
        return i;
    }
    let rest = &line[i..];
    let c = b[i];
    if c.is_ascii_alphabetic() || c == b'_' {
        let word: String = rest.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
        let hyphen = rest[word.len()..].starts_with('-');
        if word == "AND" || word == "OR" || ((word == "Is" || word == "is") && hyphen) {
            return 0;
        }
        return i;
    }
    if matches!(c, b'(' | b'{' | b'[' | b'@') || rest.starts_with("===") {
        return i;
    }
    0
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(Number),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Minus,
    Op(BinOp),
    At(String),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: Pos,
    text: String,
}

fn err_at(file: &str, pos: Pos, message: &str, token: Option<String>) -> ParseError {
    ParseError { file: file.to_string(), line: pos.line, column: pos.col, message: message.to_string(), token }
}

fn lex(text: &str, file: &str, line: usize, col: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (line, col);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            '{' => {
                i += 1;
                Tok::LBrace
            }
            '}' => {
                i += 1;
                Tok::RBrace
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            '-' => {
                i += 1;
                Tok::Minus
            }
            '+' => {
                i += 1;
                Tok::Op(BinOp::Add)
            }
            '*' => {
                i += 1;
                Tok::Op(BinOp::Mul)
            }
            '/' => {
                i += 1;
                Tok::Op(BinOp::Div)
            }
            '=' => {
                while i < chars.len() && chars[i] == '=' {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '>' {
                    i += 1;
                    Tok::Op(BinOp::Implies)
                } else if i - start == 1 {
                    Tok::Op(BinOp::Eq)
                } else {
                    let t: String = chars[start..i].iter().collect();
                    return Err(err_at(file, pos, "unexpected token", Some(t)));
                }
            }
            '<' => {
                i += 1;
                match chars.get(i) {
                    Some('=') => {
                        i += 1;
                        Tok::Op(BinOp::Le)
                    }
                    Some('>') => {
                        i += 1;
                        Tok::Op(BinOp::Assoc)
                    }
                    _ => Tok::Op(BinOp::Lt),
                }
            }
            '>' => {
                i += 1;
                match chars.get(i) {
                    Some('=') => {
                        i += 1;
                        Tok::Op(BinOp::Ge)
                    }
                    Some('>') => {
                        i += 1;
                        Tok::Op(BinOp::Seq)
                    }
                    _ => Tok::Op(BinOp::Gt),
                }
            }
            '@' => {
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '.' | '-')) {
                    i += 1;
                }
                if i == start + 1 {
                    return Err(err_at(file, pos, "empty rule id", Some("@".into())));
                }
                Tok::At(chars[start + 1..i].iter().collect())
            }
            c if c.is_ascii_digit() => {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let next_digit = |k: usize| chars.get(k).is_some_and(|c| c.is_ascii_digit());
                if i < chars.len() && (chars[i] == '.' || chars[i] == '/') && next_digit(i + 1) {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let t: String = chars[start..i].iter().collect();
                match Number::parse(&t) {
                    Some(n) => Tok::Num(n),
                    None => return Err(err_at(file, pos, "invalid number", Some(t))),
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                match word.as_str() {
                    "AND" => Tok::Op(BinOp::And),
                    "OR" => Tok::Op(BinOp::Or),
                    "Is" | "is"
                        if chars.get(i) == Some(&'-') && chars.get(i + 1).is_some_and(|c| c.is_ascii_alphabetic()) =>
                    {
                        while chars.get(i) == Some(&'-') && chars.get(i + 1).is_some_and(|c| c.is_ascii_alphabetic()) {
                            i += 1;
                            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                                i += 1;
                            }
                        }
                        let rel: String = chars[start..i].iter().collect();
                        match rel.to_ascii_lowercase().as_str() {
                            "is-a" => Tok::Op(BinOp::IsA),
                            "is-in" => Tok::Op(BinOp::IsIn),
                            "is-part-of" => Tok::Op(BinOp::IsPartOf),
                            "is-instance-of" => Tok::Op(BinOp::IsInstanceOf),
                            "is-in-association-with" => Tok::Op(BinOp::Assoc),
                            _ => return Err(err_at(file, pos, "unknown relation", Some(rel))),
                        }
                    }
                    _ => Tok::Ident(word),
                }
            }
            other => return Err(err_at(file, pos, "unexpected character", Some(other.to_string()))),
        };
        col += i - start;
        out.push(Token { tok, pos, text: chars[start..i].iter().collect() });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: &'a str,
    end: Pos,
}

impl<'a> Parser<'a> {
    fn new(toks: Vec<Token>, file: &'a str, text: &str) -> Self {
        let end = match toks.last() {
            Some(t) => Pos { line: t.pos.line, col: t.pos.col + t.text.chars().count() },
            None => Pos { line: 1, col: text.chars().count() + 1 },
        };
        Parser { toks, pos: 0, file, end }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> Pos {
        self.toks.get(self.pos).map(|t| t.pos).unwrap_or(self.end)
    }

    fn unexpected(&self) -> ParseError {
        match self.toks.get(self.pos) {
            Some(t) => err_at(self.file, t.pos, "unexpected token", Some(t.text.clone())),
            None => err_at(self.file, self.end, "unexpected end of input", None),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            let mut e = self.unexpected();
            e.message = format!("expected {what}");
            Err(e)
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn eat_arrow(&mut self) -> bool {
        if self.peek() == Some(&Tok::Op(BinOp::Implies)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn peek_binop(&self) -> Option<BinOp> {
        match self.peek()? {
            Tok::Op(op) => Some(*op),
            Tok::Minus => Some(BinOp::Sub),
            _ => None,
        }
    }

    /// Precedence climbing over the fixed operator table.
    fn expr(&mut self, min_prec: u8) -> Result<Term, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let p = op.precedence();
            if p < min_prec {
                break;
            }
            self.pos += 1;
            let next = if op.is_right_assoc() { p } else { p + 1 };
            let rhs = self.expr(next)?;
            lhs = Term::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn starts_primary(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(_) | Tok::Num(_) | Tok::LParen | Tok::LBrace))
    }

    fn unary(&mut self) -> Result<Term, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected());
        };
        match tok {
            Tok::Ident(name) => {
                self.pos += 1;
                let head = Term::atom(&name);
                if self.peek() == Some(&Tok::LParen) {
                    Ok(Term::app(head, self.args()?))
                } else {
                    Ok(head)
                }
            }
            Tok::Num(n) => {
                self.pos += 1;
                Ok(Term::Num(n))
            }
            Tok::Minus => {
                if let Some(Token { tok: Tok::Num(n), .. }) = self.toks.get(self.pos + 1) {
                    let neg = &Number::from_i64(0) - n;
                    self.pos += 2;
                    Ok(Term::Num(neg))
                } else {
                    Err(self.unexpected())
                }
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                if self.starts_primary() {
                    let body = self.unary()?;
                    Ok(Term::ann(inner, body))
                } else {
                    Ok(inner)
                }
            }
            Tok::LBrace => {
                self.pos += 1;
                let inner = self.expr(0)?;
                self.expect(Tok::RBrace, "`}`")?;
                if self.peek() == Some(&Tok::LParen) {
                    Ok(Term::app(inner, self.args()?))
                } else {
                    Ok(inner)
                }
            }
            _ => Err(self.unexpected()),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        if self.peek() == Some(&Tok::RParen) {
            let mut e = self.unexpected();
            e.message = "empty argument list".into();
            return Err(e);
        }
        let mut args = vec![self.expr(0)?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push(self.expr(0)?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotation_inside_application() {
        let t = parse_term("Forbidden((Very)BudgetConsuming)").unwrap();
        assert_eq!(t, Term::call("Forbidden", vec![Term::ann(Term::atom("Very"), Term::atom("BudgetConsuming"))]));
    }

    #[test]
    fn association_and_atoms() {
        assert_eq!(
            parse_term("See <> Unseen").unwrap(),
            Term::bin(BinOp::Assoc, Term::atom("See"), Term::atom("Unseen"))
        );
        assert_eq!(parse_term("X").unwrap(), Term::atom("X"));
    }

    #[test]
    fn arrow_spellings_and_relation_aliases() {
        assert_eq!(parse_term("A =====> B").unwrap(), parse_term("A => B").unwrap());
        assert_eq!(parse_term("How is-a Question").unwrap(), parse_term("How Is-A Question").unwrap());
        assert_eq!(
            parse_term("Question ( A ) Is-In Beginning").unwrap(),
            Term::bin(BinOp::IsIn, Term::call("Question", vec![Term::atom("A")]), Term::atom("Beginning"))
        );
    }

    #[test]
    fn grouping_versus_annotation() {
        let t = parse_term("(A=>B) AND (P(A))").unwrap();
        assert_eq!(t.render(), "( A => B ) AND P ( A )");
        let t = parse_term("(I+1)A").unwrap();
        assert_eq!(t.render(), "( I + 1 ) A");
        let t = parse_term("(Very)P(A)").unwrap();
        assert_eq!(t, Term::ann(Term::atom("Very"), Term::call("P", vec![Term::atom("A")])));
    }

    #[test]
    fn numbers_and_negatives() {
        assert_eq!(parse_term("2.50").unwrap().render(), "5/2");
        assert_eq!(parse_term("3 - -2").unwrap().render(), "3 - -2");
        assert_eq!(parse_term("I>2").unwrap(), Term::bin(BinOp::Gt, Term::atom("I"), Term::int(2)));
    }

    #[test]
    fn lone_paren_column_is_exact() {
        for k in [1, 2, 3, 7] {
            let mut text = String::from("P(Abc)");
            text.insert(k - 1, ')');
            let e = parse_term(&text).unwrap_err();
            assert_eq!(e.column, k, "text {text:?}: {e}");
            assert_eq!(e.token.as_deref(), Some(")"));
        }
    }

    #[test]
    fn errors_carry_line_and_token() {
        let e = parse_program("Xa => Xb\nFoo(,)\n").unwrap_err();
        assert_eq!((e.line, e.column), (2, 5));
        assert_eq!(e.token.as_deref(), Some(","));
    }

    #[test]
    fn guards_are_classified() {
        let p = parse_program("[counting]\n(I)A AND I>2 => P((Very)A)\n").unwrap();
        let r = &p.rules[0];
        assert_eq!(r.id, "counting.1");
        assert_eq!(r.premises, vec![parse_term("(I)A").unwrap()]);
        assert_eq!(r.guards, vec![parse_term("I > 2").unwrap()]);
        assert!(p.counting_enabled());
    }

    #[test]
    fn comparison_with_unbound_variable_is_a_pattern() {
        let p = parse_program("Pr(A) <= Y AND Flag(A) => Bound(A, Y)\n").unwrap();
        assert_eq!(p.rules[0].premises.len(), 2);
        assert!(p.rules[0].guards.is_empty());
    }

    #[test]
    fn counting_laws_detected() {
        let p = parse_program("[counting]\nA AND (I)A => (I+1)A\nA =>(1)A\n(I)A AND I>2 => P((Very)A)\n(I)A AND A => (I+1)A\nX AND (I)A => (I+1)A\nA AND (I)A AND I>1 => (I+1)A\n").unwrap();
        let laws: Vec<bool> = p.rules.iter().map(Rule::is_counting_law).collect();
        assert_eq!(laws, vec![true, true, false, true, false, false]);
    }

    #[test]
    fn rejects_bad_programs() {
        let e = parse_program("Foo(A)\n").unwrap_err();
        assert!(e.message.contains("non-ground"), "{e}");
        let e = parse_program("Foo(A) => Bar(B)\n").unwrap_err();
        assert!(e.message.contains("`B`"), "{e}");
        let e = parse_program("@r1 Xa => Xb\n@r1 Xc => Xd\n").unwrap_err();
        assert_eq!(e.message, "duplicate rule id");
        assert_eq!(e.line, 2);
        let e = parse_program("[g rewrite]\nFa(A) AND Ga(A) => Ha(A)\n").unwrap_err();
        assert!(e.message.contains("rewrite"), "{e}");
        assert!(parse_program("Foo(\n").is_err());
    }

    #[test]
    fn empty_program() {
        let p = parse_program("").unwrap();
        assert!(p.rules.is_empty() && p.initial_facts.is_empty());
        assert_eq!(render(&p), "");
    }

    #[test]
    fn listing_labels_and_banners() {
        let p = parse_program(
            "1 =====Input Rules =====\n2 Question ( Ability ( A ) ) =====> Abduction ( P ( Not ( A ) ) )\n3. Foo\n",
        )
        .unwrap();
        assert_eq!(p.rules[0].id, "input_rules.1");
        assert_eq!(p.initial_facts, vec![Term::atom("Foo")]);
        // a bare number is a fact, not a label
        let p = parse_program("3\n2 + 3 > 4\n").unwrap();
        assert_eq!(p.initial_facts.len(), 2);
    }

    #[test]
    fn numbered_listing_titles_open_groups() {
        let text = "Protocol\n\n1. Xa >> Xb\n2. Xb => P(Xc)\n\nObligation Semantics\n\n7. Forbidden(A) AND P(A) => Warning(P(A))\n";
        let p = parse_program(text).unwrap();
        let ids: Vec<&str> = p.rules.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["protocol.1", "obligation_semantics.1"]);
        assert_eq!(p.initial_facts.len(), 1);
        // without dotted labels a lone word is still a fact
        assert_eq!(parse_program("Protocol\n").unwrap().initial_facts, vec![Term::atom("Protocol")]);
    }

    #[test]
    fn beginning_facts_assert_both_forms() {
        let p = parse_program("How ( Xa ) Is-In Beginning\nHow ( Xa )\n").unwrap();
        assert_eq!(p.initial_facts.len(), 2);
        assert_eq!(p.initial_facts[1].render(), "How ( Xa )");
    }

    #[test]
    fn ground_rules_read_as_implications() {
        let p = parse_program("HelicopterMission => BudgetConsuming\nA => P(A)\n").unwrap();
        assert_eq!(p.rules[0].as_implication().unwrap().render(), "HelicopterMission => BudgetConsuming");
        assert!(p.rules[1].as_implication().is_none());
    }

    #[test]
    fn render_round_trips_ids_and_groups() {
        let text =
            "Seed\n[b]\n@custom Xa => Xb\n[a rewrite]\nFa(A) => Ga(A)\n[b]\nXc AND (Xd OR Xe) => (Xf => Xg)\n[empty]\n";
        let p = parse_program(text).unwrap();
        assert_eq!(p.rules[2].id, "b.2");
        let again = parse_program(&render(&p)).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn implication_facts_render_parenthesized() {
        let p = parse_program("(Xa => Xb)\n").unwrap();
        assert!(p.rules.is_empty());
        assert_eq!(render(&p), "( Xa => Xb )\n");
        assert_eq!(parse_program(&render(&p)).unwrap(), p);
    }
}
