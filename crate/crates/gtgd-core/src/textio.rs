//! Line-oriented text formats for TGD sets, databases, queries, OMQs, CQSs
//! and graphs.
//!
//! ```text
//! # comment
//! @schema R/2, S/1
//! R(x,y), S(y) -> exists z . T(x,z)      # .tgd
//! true -> exists z . Start(z)
//! R(a,b)                                 # .db  (optionally `# level=3`)
//! q(x) :- R(x,y), S(y)                   # .cq  (several lines = a union)
//! @data-schema: R/2, S                   # .omq sections
//! @tgds:
//! @query:
//! u v                                    # .edges
//! ```
//!
//! Identifiers match `[A-Za-z_][A-Za-z0-9_]*`. Database terms are constants,
//! TGD and query terms are variables. Input may use LF or CRLF; output uses LF.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{name, Atom, Cq, Cqs, Graph, Instance, Name, Omq, Schema, Term, Tgd, Ucq};
use crate::validate::{validate, Document};

/// The kinds of documents understood by [`parse`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocKind {
    Tgds,
    Database,
    Query,
    Omq,
    Cqs,
    Graph,
}

impl DocKind {
    /// Kind implied by a file extension (`tgd`, `db`, `cq`, `omq`, `cqs`, `edges`).
    pub fn from_extension(ext: &str) -> Option<DocKind> {
        match ext {
            "tgd" => Some(DocKind::Tgds),
            "db" => Some(DocKind::Database),
            "cq" => Some(DocKind::Query),
            "omq" => Some(DocKind::Omq),
            "cqs" => Some(DocKind::Cqs),
            "edges" => Some(DocKind::Graph),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            DocKind::Tgds => "tgd",
            DocKind::Database => "db",
            DocKind::Query => "cq",
            DocKind::Omq => "omq",
            DocKind::Cqs => "cqs",
            DocKind::Graph => "edges",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Slash,
    Arrow,
    Turnstile,
    Colon,
    Directive(String),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    col: usize,
}

/// One source line split into tokens plus its trailing comment.
struct Line {
    no: usize,
    toks: Vec<Token>,
    comment: Option<String>,
    end_col: usize,
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Syntax { line, col, msg: msg.into() }
}

fn lex(text: &str) -> Result<Vec<Line>> {
    let mut out = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let no = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let chars: Vec<char> = raw.chars().collect();
        let mut toks = Vec::new();
        let mut comment = None;
        let mut j = 0;
        while j < chars.len() {
            let c = chars[j];
            let col = j + 1;
            if c.is_whitespace() {
                j += 1;
                continue;
            }
            if c == '#' {
                comment = Some(chars[j + 1..].iter().collect::<String>().trim().to_string());
                break;
            }
            let simple = match c {
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                ',' => Some(Tok::Comma),
                '.' => Some(Tok::Dot),
                '/' => Some(Tok::Slash),
                _ => None,
            };
            if let Some(t) = simple {
                toks.push(Token { tok: t, col });
                j += 1;
                continue;
            }
            if c == '-' && chars.get(j + 1) == Some(&'>') {
                toks.push(Token { tok: Tok::Arrow, col });
                j += 2;
                continue;
            }
            if c == ':' {
                if chars.get(j + 1) == Some(&'-') {
                    toks.push(Token { tok: Tok::Turnstile, col });
                    j += 2;
                } else {
                    toks.push(Token { tok: Tok::Colon, col });
                    j += 1;
                }
                continue;
            }
            if c == '@' {
                let mut k = j + 1;
                while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '-' || chars[k] == '_') {
                    k += 1;
                }
                toks.push(Token { tok: Tok::Directive(chars[j + 1..k].iter().collect()), col });
                j = k;
                continue;
            }
            if c.is_ascii_alphanumeric() || c == '_' {
                let mut k = j;
                while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_') {
                    k += 1;
                }
                let word: String = chars[j..k].iter().collect();
                let tok = if c.is_ascii_digit() { Tok::Num(word) } else { Tok::Ident(word) };
                toks.push(Token { tok, col });
                j = k;
                continue;
            }
            return Err(syntax(no, col, format!("unexpected character `{c}`")));
        }
        out.push(Line { no, toks, comment, end_col: chars.len() + 1 });
    }
    Ok(out)
}

/// Cursor over the tokens of one line.
struct Cursor<'a> {
    line: &'a Line,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a Line) -> Self {
        Cursor { line, pos: 0 }
    }

    fn peek(&self) -> Option<&Tok> {
        self.line.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.line.toks.get(self.pos + 1).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.line.toks.get(self.pos).map(|t| t.col).unwrap_or(self.line.end_col)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        syntax(self.line.no, self.col(), msg)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.line.toks.len()
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    /// A vertex or term name: identifier or number.
    fn word(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) | Some(Tok::Num(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        match self.peek() {
            Some(Tok::Num(s)) => {
                let n = s.parse().map_err(|_| self.err(format!("bad number `{s}`")))?;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn end(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }

    fn atom(&mut self, constants: bool) -> Result<Atom> {
        let pred = self.ident("predicate name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                let t = self.ident("term")?;
                args.push(if constants { Term::Const(name(&t)) } else { Term::Var(name(&t)) });
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(Atom { pred: name(&pred), args })
    }

    /// Comma-separated atoms up to a stop token (not consumed) or line end.
    fn atoms(&mut self, constants: bool, stop: Option<&Tok>) -> Result<Vec<Atom>> {
        let mut out = vec![self.atom(constants)?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            out.push(self.atom(constants)?);
        }
        if let Some(s) = stop {
            if !self.at_end() && self.peek() != Some(s) {
                return Err(self.err("expected `,` between atoms"));
            }
        }
        Ok(out)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) && self.peek2() != Some(&Tok::LParen)
    }
}

/// Tracks predicate arities across a document.
struct Arities {
    schema: Schema,
}

impl Arities {
    fn new() -> Self {
        Arities { schema: Schema::new() }
    }

    fn see(&mut self, a: &Atom) -> Result<()> {
        self.schema.declare(&a.pred, a.arity())
    }

    fn schema_directive(&mut self, cur: &mut Cursor) -> Result<()> {
        if cur.at_end() {
            return Ok(());
        }
        loop {
            let p = cur.ident("predicate name")?;
            cur.expect(Tok::Slash, "`/`")?;
            let a = cur.number("arity")?;
            self.schema.declare(&name(&p), a)?;
            if cur.peek() == Some(&Tok::Comma) {
                cur.pos += 1;
            } else {
                break;
            }
        }
        cur.end()
    }
}

fn parse_tgd_line(cur: &mut Cursor, ar: &mut Arities) -> Result<Tgd> {
    let body = if cur.is_keyword("true") {
        cur.pos += 1;
        Vec::new()
    } else {
        cur.atoms(false, Some(&Tok::Arrow))?
    };
    cur.expect(Tok::Arrow, "`->`")?;
    let mut declared = BTreeSet::new();
    if cur.is_keyword("exists") {
        cur.pos += 1;
        loop {
            declared.insert(name(&cur.ident("existential variable")?));
            if cur.peek() == Some(&Tok::Comma) {
                cur.pos += 1;
            } else {
                break;
            }
        }
        cur.expect(Tok::Dot, "`.` after existential variables")?;
    }
    let head = cur.atoms(false, None)?;
    cur.end()?;
    for a in body.iter().chain(head.iter()) {
        ar.see(a)?;
    }
    Ok(Tgd::with_declared(body, head, declared))
}

/// A parsed query line: answer variables and an optional body (`None` = `false`).
fn parse_query_line(cur: &mut Cursor, ar: &mut Arities) -> Result<(Vec<Name>, Option<Vec<Atom>>)> {
    cur.ident("query name")?;
    cur.expect(Tok::LParen, "`(`")?;
    let mut answer = Vec::new();
    if cur.peek() != Some(&Tok::RParen) {
        loop {
            answer.push(name(&cur.ident("answer variable")?));
            if cur.peek() == Some(&Tok::Comma) {
                cur.pos += 1;
            } else {
                break;
            }
        }
    }
    cur.expect(Tok::RParen, "`)`")?;
    cur.expect(Tok::Turnstile, "`:-`")?;
    let body = if cur.is_keyword("true") {
        cur.pos += 1;
        Some(Vec::new())
    } else if cur.is_keyword("false") {
        cur.pos += 1;
        None
    } else {
        Some(cur.atoms(false, None)?)
    };
    cur.end()?;
    if let Some(b) = &body {
        for a in b {
            ar.see(a)?;
        }
    }
    Ok((answer, body))
}

fn build_ucq(lines: Vec<(usize, Vec<Name>, Option<Vec<Atom>>)>) -> Result<Ucq> {
    let arity = match lines.first() {
        Some((_, ans, _)) => ans.len(),
        None => return Err(syntax(1, 1, "expected at least one query line")),
    };
    let mut ds = Vec::new();
    for (no, ans, body) in lines {
        if ans.len() != arity {
            return Err(syntax(no, 1, format!("query arity {} differs from {arity}", ans.len())));
        }
        if let Some(b) = body {
            let atoms: BTreeSet<Atom> = b.into_iter().collect();
            ds.push(Cq::from_parts(ans, atoms));
        }
    }
    Ucq::new(arity, ds)
}

/// Parse a document of the given kind and validate it.
pub fn parse(text: &str, kind: DocKind) -> Result<Document> {
    let doc = parse_unchecked(text, kind)?;
    let report = validate(&doc, None);
    if report.is_empty() {
        Ok(doc)
    } else {
        let msgs: Vec<String> = report.iter().map(|v| v.to_string()).collect();
        Err(Error::Invalid(msgs.join("; ")))
    }
}

/// Parse a document without running validation (syntax and arity checks only).
pub fn parse_unchecked(text: &str, kind: DocKind) -> Result<Document> {
    let lines = lex(text)?;
    match kind {
        DocKind::Tgds => parse_tgds_lines(&lines).map(Document::Tgds),
        DocKind::Database => parse_db_lines(&lines).map(Document::Database),
        DocKind::Query => parse_query_lines(&lines).map(Document::Query),
        DocKind::Graph => parse_graph_lines(&lines).map(Document::Graph),
        DocKind::Omq | DocKind::Cqs => parse_sections(&lines, kind),
    }
}

fn parse_tgds_lines(lines: &[Line]) -> Result<Vec<Tgd>> {
    let mut ar = Arities::new();
    let mut out = Vec::new();
    for l in lines {
        let mut cur = Cursor::new(l);
        match cur.peek() {
            None => continue,
            Some(Tok::Directive(d)) if d == "schema" => {
                cur.pos += 1;
                ar.schema_directive(&mut cur)?;
            }
            Some(Tok::Directive(d)) => return Err(Error::UnknownSection(d.clone())),
            _ => out.push(parse_tgd_line(&mut cur, &mut ar)?),
        }
    }
    Ok(out)
}

fn parse_db_lines(lines: &[Line]) -> Result<Instance> {
    let mut ar = Arities::new();
    let mut atoms: Vec<(Atom, Option<usize>)> = Vec::new();
    for l in lines {
        let mut cur = Cursor::new(l);
        match cur.peek() {
            None => continue,
            Some(Tok::Directive(d)) if d == "schema" => {
                cur.pos += 1;
                ar.schema_directive(&mut cur)?;
                continue;
            }
            Some(Tok::Directive(d)) => return Err(Error::UnknownSection(d.clone())),
            _ => {}
        }
        let level = l
            .comment
            .as_deref()
            .and_then(|c| c.strip_prefix("level="))
            .and_then(|n| n.trim().parse::<usize>().ok());
        while !cur.at_end() {
            let a = cur.atom(true)?;
            ar.see(&a)?;
            atoms.push((a, level));
            match cur.peek() {
                Some(Tok::Comma) => cur.pos += 1,
                Some(Tok::Dot) => {
                    cur.pos += 1;
                    cur.end()?;
                }
                _ => {}
            }
        }
    }
    let mut inst = Instance::new();
    let tracked = atoms.iter().any(|(_, l)| l.is_some());
    for (a, l) in atoms {
        if tracked {
            inst.insert_at(a, l.unwrap_or(0));
        } else {
            inst.insert(a);
        }
    }
    Ok(inst)
}

fn parse_query_lines(lines: &[Line]) -> Result<Ucq> {
    let mut ar = Arities::new();
    let mut qs = Vec::new();
    for l in lines {
        let mut cur = Cursor::new(l);
        match cur.peek() {
            None => continue,
            Some(Tok::Directive(d)) if d == "schema" => {
                cur.pos += 1;
                ar.schema_directive(&mut cur)?;
            }
            Some(Tok::Directive(d)) => return Err(Error::UnknownSection(d.clone())),
            _ => {
                let (ans, body) = parse_query_line(&mut cur, &mut ar)?;
                qs.push((l.no, ans, body));
            }
        }
    }
    build_ucq(qs)
}

fn parse_graph_lines(lines: &[Line]) -> Result<Graph> {
    let mut g = Graph::new();
    for l in lines {
        let mut cur = Cursor::new(l);
        if cur.at_end() {
            continue;
        }
        let u = cur.word("vertex")?;
        if cur.at_end() {
            g.add_vertex(name(&u));
            continue;
        }
        let v = cur.word("vertex")?;
        cur.end()?;
        if u == v {
            return Err(syntax(l.no, 1, format!("self-loop on {u}")));
        }
        g.add_edge(name(&u), name(&v));
    }
    Ok(g)
}

#[derive(PartialEq)]
enum Section {
    None,
    DataSchema,
    Tgds,
    Query,
}

fn parse_sections(lines: &[Line], kind: DocKind) -> Result<Document> {
    let mut ar = Arities::new();
    let mut section = Section::None;
    let mut data: Vec<(Name, Option<usize>)> = Vec::new();
    let mut seen_data = false;
    let mut tgds = Vec::new();
    let mut qs = Vec::new();
    for l in lines {
        let mut cur = Cursor::new(l);
        if let Some(Tok::Directive(d)) = cur.peek() {
            let d = d.clone();
            cur.pos += 1;
            match (d.as_str(), kind) {
                ("schema", _) => {
                    ar.schema_directive(&mut cur)?;
                    continue;
                }
                ("data-schema", DocKind::Omq) => {
                    section = Section::DataSchema;
                    seen_data = true;
                }
                ("tgds", _) => section = Section::Tgds,
                ("query", _) => section = Section::Query,
                _ => return Err(Error::UnknownSection(d)),
            }
            cur.expect(Tok::Colon, "`:` after section name")?;
        }
        if cur.at_end() {
            continue;
        }
        match section {
            Section::None => return Err(cur.err("content before the first section")),
            Section::DataSchema => loop {
                let p = name(&cur.ident("predicate name")?);
                let a = if cur.peek() == Some(&Tok::Slash) {
                    cur.pos += 1;
                    Some(cur.number("arity")?)
                } else {
                    None
                };
                data.push((p, a));
                if cur.peek() == Some(&Tok::Comma) {
                    cur.pos += 1;
                } else {
                    cur.end()?;
                    break;
                }
            },
            Section::Tgds => tgds.push(parse_tgd_line(&mut cur, &mut ar)?),
            Section::Query => {
                let (ans, body) = parse_query_line(&mut cur, &mut ar)?;
                qs.push((l.no, ans, body));
            }
        }
    }
    let query = build_ucq(qs)?;
    if kind == DocKind::Cqs {
        return Ok(Document::Cqs(Cqs::new(tgds, query)));
    }
    if !seen_data {
        return Err(syntax(1, 1, "missing @data-schema section"));
    }
    let mut ds = Schema::new();
    for (p, a) in data {
        let a = match (a, ar.schema.arity(&p)) {
            (Some(a), _) => a,
            (None, Some(a)) => a,
            (None, None) => return Err(Error::Invalid(format!("arity of data predicate {p} is unknown; write {p}/n"))),
        };
        ds.declare(&p, a)?;
        ar.schema.declare(&p, a)?;
    }
    Ok(Document::Omq(Omq::new(ds, tgds, query)))
}

/// Parse a `.tgd` document.
pub fn parse_tgds(text: &str) -> Result<Vec<Tgd>> {
    match parse(text, DocKind::Tgds)? {
        Document::Tgds(t) => Ok(t),
        _ => unreachable!("parse returns the requested kind"),
    }
}

/// Parse a `.db` document.
pub fn parse_database(text: &str) -> Result<Instance> {
    match parse(text, DocKind::Database)? {
        Document::Database(d) => Ok(d),
        _ => unreachable!("parse returns the requested kind"),
    }
}

/// Parse a `.cq` document (one or more query lines).
pub fn parse_query(text: &str) -> Result<Ucq> {
    match parse(text, DocKind::Query)? {
        Document::Query(q) => Ok(q),
        _ => unreachable!("parse returns the requested kind"),
    }
}

/// Parse a single CQ line.
pub fn parse_cq(text: &str) -> Result<Cq> {
    let q = parse_query(text)?;
    match q.disjuncts() {
        [d] => Ok(d.clone()),
        _ => Err(Error::Invalid(format!("expected a single CQ, found {} disjuncts", q.len()))),
    }
}

/// Parse an `.omq` document.
pub fn parse_omq(text: &str) -> Result<Omq> {
    match parse(text, DocKind::Omq)? {
        Document::Omq(o) => Ok(o),
        _ => unreachable!("parse returns the requested kind"),
    }
}

/// Parse a `.cqs` document.
pub fn parse_cqs(text: &str) -> Result<Cqs> {
    match parse(text, DocKind::Cqs)? {
        Document::Cqs(c) => Ok(c),
        _ => unreachable!("parse returns the requested kind"),
    }
}

/// Parse an `.edges` document.
pub fn parse_graph(text: &str) -> Result<Graph> {
    match parse(text, DocKind::Graph)? {
        Document::Graph(g) => Ok(g),
        _ => unreachable!("parse returns the requested kind"),
    }
}

/// Serialize a document; `parse(serialize(d))` reproduces `d`.
pub fn serialize(doc: &Document) -> String {
    match doc {
        Document::Tgds(ts) => serialize_tgds(ts),
        Document::Database(d) => serialize_database(d),
        Document::Query(q) => serialize_ucq(q),
        Document::Omq(o) => serialize_omq(o),
        Document::Cqs(c) => serialize_cqs(c),
        Document::Graph(g) => serialize_graph(g),
    }
}

pub fn serialize_tgds(ts: &[Tgd]) -> String {
    let mut s = String::new();
    for t in ts {
        let _ = writeln!(s, "{t}");
    }
    s
}

/// Databases start with a header comment; atoms carrying a level annotation
/// get a `# level=i` trailer. Atoms are listed by level, then in term order.
pub fn serialize_database(d: &Instance) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# database: {} atoms", d.len());
    match d.levels() {
        Some(levels) => {
            let mut by_level: BTreeMap<usize, Vec<&Atom>> = BTreeMap::new();
            for a in d.iter() {
                by_level.entry(levels.get(a).copied().unwrap_or(0)).or_default().push(a);
            }
            for (l, atoms) in by_level {
                for a in atoms {
                    let _ = writeln!(s, "{a}  # level={l}");
                }
            }
        }
        None => {
            for a in d.iter() {
                let _ = writeln!(s, "{a}");
            }
        }
    }
    s
}

pub fn serialize_ucq(q: &Ucq) -> String {
    let mut s = String::new();
    if q.is_empty() {
        let vars: Vec<String> = (1..=q.arity()).map(|i| format!("x{i}")).collect();
        let _ = writeln!(s, "q({}) :- false", vars.join(","));
        return s;
    }
    for d in q.disjuncts() {
        let _ = writeln!(s, "{d}");
    }
    s
}

pub fn serialize_omq(o: &Omq) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "@data-schema: {}", o.data_schema);
    s.push_str("@tgds:\n");
    s.push_str(&serialize_tgds(&o.sigma));
    s.push_str("@query:\n");
    s.push_str(&serialize_ucq(&o.query));
    s
}

pub fn serialize_cqs(c: &Cqs) -> String {
    let mut s = String::from("@tgds:\n");
    s.push_str(&serialize_tgds(&c.sigma));
    s.push_str("@query:\n");
    s.push_str(&serialize_ucq(&c.query));
    s
}

pub fn serialize_graph(g: &Graph) -> String {
    let mut s = String::new();
    let mut covered = BTreeSet::new();
    for (u, v) in g.edges() {
        let _ = writeln!(s, "{u} {v}");
        covered.insert(u.clone());
        covered.insert(v.clone());
    }
    for v in g.vertices() {
        if !covered.contains(v) {
            let _ = writeln!(s, "{v}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tgd_without_existentials() {
        let ts = parse_tgds("R2(x) -> R4(x)\n").unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].frontier(), [name("x")].into_iter().collect());
        assert!(ts[0].existentials().is_empty());
    }

    #[test]
    fn tgd_with_existential() {
        let ts = parse_tgds("E(x,y) -> exists z . E(y,z)").unwrap();
        assert_eq!(ts[0].existentials(), &[name("z")].into_iter().collect());
    }

    #[test]
    fn union_of_two_lines() {
        let q = parse_query("q(x) :- R(x,y)\nq(x) :- S(x)\n").unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q.arity(), 1);
    }

    #[test]
    fn empty_body_tgd_round_trip() {
        let ts = parse_tgds("true -> exists z . Start(z)").unwrap();
        assert_eq!(serialize_tgds(&ts), "true -> exists z . Start(z)\n");
    }

    #[test]
    fn empty_database_is_header_only() {
        let s = serialize_database(&Instance::new());
        assert!(s.lines().all(|l| l.starts_with('#')));
        assert_eq!(parse_database(&s).unwrap(), Instance::new());
    }

    #[test]
    fn errors_are_located() {
        match parse_tgds("R(x,y) -> S(x)\nR(x) -> S(x)") {
            Err(Error::ArityConflict { pred, .. }) => assert_eq!(pred, "R"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_tgds("R(x,y) => S(x)") {
            Err(Error::Syntax { line: 1, col: 8, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("@bogus:\n", DocKind::Cqs) {
            Err(Error::UnknownSection(s)) => assert_eq!(s, "bogus"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn crlf_is_accepted() {
        let d = parse_database("R(a,b)\r\nS(a)\r\n").unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn levels_round_trip() {
        let mut d = Instance::new();
        d.insert_at(Atom::fact("E", &["a", "b"]), 0);
        d.insert_at(Atom::fact("E", &["b", "_n1"]), 1);
        let s = serialize_database(&d);
        assert!(s.contains("E(b,_n1)  # level=1"));
        let back = parse_database(&s).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn omq_round_trip() {
        let text = "@data-schema: P/2, R1/1\n@tgds:\nR2(x) -> R4(x)\n@query:\nq() :- P(x,y), R1(y), R2(x), R4(x)\n";
        let o = parse_omq(text).unwrap();
        assert_eq!(o.data_schema.len(), 2);
        assert!(!o.has_full_data_schema());
        assert_eq!(parse_omq(&serialize_omq(&o)).unwrap(), o);
    }

    #[test]
    fn graph_parsing() {
        let g = parse_graph("1 2\n2 3\n# c\n4\n").unwrap();
        assert_eq!(g.vertices().len(), 4);
        assert_eq!(g.edges().len(), 2);
        assert!(parse_graph("1 1").is_err());
        assert_eq!(parse_graph(&serialize_graph(&g)).unwrap(), g);
    }

    #[test]
    fn empty_union_round_trip() {
        let q = Ucq::new(2, vec![]).unwrap();
        let s = serialize_ucq(&q);
        assert_eq!(parse_query(&s).unwrap(), q);
    }
}
