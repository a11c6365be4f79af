//! Parser for the architecture description format.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::str::FromStr;

use super::model::{ArchitectureSpec, BindingSpec, ComponentSpec, ConnectorSpec};
use crate::connectors::ConnectorKind;
use crate::runtime::{ConcurrencyType, End, RoleStereotype};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: duplicate name `{name}` (first declared on line {first_line})")]
    DuplicateName {
        name: String,
        line: usize,
        col: usize,
        first_line: usize,
    },
    #[error("{line}:{col}: `{name}` is not a declared {what}")]
    DanglingReference {
        name: String,
        what: &'static str,
        line: usize,
        col: usize,
    },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::DuplicateName { line, .. }
            | ParseError::DanglingReference { line, .. } => *line,
        }
    }

    pub fn col(&self) -> usize {
        match self {
            ParseError::Syntax { col, .. }
            | ParseError::DuplicateName { col, .. }
            | ParseError::DanglingReference { col, .. } => *col,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    LBrace,
    RBrace,
    Arrow,
    Eq,
    Newline,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '-' | ':' | '/')
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    for (l, raw) in text.lines().enumerate() {
        let line = l + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let at = |tok| Spanned { tok, line, col };
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '{' => {
                    out.push(at(Tok::LBrace));
                    i += 1;
                }
                '}' => {
                    out.push(at(Tok::RBrace));
                    i += 1;
                }
                '=' => {
                    out.push(at(Tok::Eq));
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    out.push(at(Tok::Arrow));
                    i += 2;
                }
                c if is_word_char(c) => {
                    let start = i;
                    while i < chars.len()
                        && is_word_char(chars[i])
                        && !(chars[i] == '-' && chars.get(i + 1) == Some(&'>'))
                    {
                        i += 1;
                    }
                    out.push(at(Tok::Word(chars[start..i].iter().collect())));
                }
                other => {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
        out.push(Spanned {
            tok: Tok::Newline,
            line,
            col: chars.len() + 1,
        });
    }
    let line = out.last().map_or(1, |s| s.line);
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col: 1,
    });
    Ok(out)
}

/// Design names and message tags: `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Reference {
    name: String,
    what: &'static str,
    line: usize,
    col: usize,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    names: BTreeMap<String, usize>,
    references: Vec<Reference>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, at: &Spanned, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            line: at.line,
            col: at.col,
            message: message.into(),
        })
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.pos += 1;
        }
    }

    fn expect(&mut self, want: Tok) -> Result<Spanned, ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            self.error(
                &t,
                format!("expected {}, found {}", want.describe(), t.tok.describe()),
            )
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, Spanned), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Word(w) => Ok((w.clone(), t)),
            other => self.error(&t, format!("expected {what}, found {}", other.describe())),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Spanned), ParseError> {
        let (w, t) = self.word(what)?;
        if !is_identifier(&w) {
            return self.error(&t, format!("`{w}` is not a valid {what}"));
        }
        Ok((w, t))
    }

    fn keyword<T: FromStr>(&mut self, what: &str) -> Result<T, ParseError>
    where
        T::Err: std::fmt::Display,
    {
        let (w, t) = self.word(what)?;
        w.parse().or_else(|e: T::Err| self.error(&t, e.to_string()))
    }

    /// A statement ends at a newline or just before the closing brace.
    fn end_statement(&mut self) -> Result<(), ParseError> {
        match self.peek().tok {
            Tok::Newline => {
                self.pos += 1;
                Ok(())
            }
            Tok::RBrace => Ok(()),
            _ => {
                let t = self.peek().clone();
                self.error(
                    &t,
                    format!("expected end of line, found {}", t.tok.describe()),
                )
            }
        }
    }

    fn declare(&mut self, name: &str, at: &Spanned) -> Result<(), ParseError> {
        match self.names.entry(name.to_owned()) {
            Entry::Occupied(first) => Err(ParseError::DuplicateName {
                name: name.to_owned(),
                line: at.line,
                col: at.col,
                first_line: *first.get(),
            }),
            Entry::Vacant(v) => {
                v.insert(at.line);
                Ok(())
            }
        }
    }

    fn once<T>(
        &self,
        slot: &mut Option<T>,
        value: T,
        at: &Spanned,
        prop: &str,
    ) -> Result<(), ParseError> {
        if slot.is_some() {
            return self.error(at, format!("`{prop}` given twice"));
        }
        *slot = Some(value);
        Ok(())
    }

    /// Statements up to and including the closing brace; `stmt` handles one.
    fn block(
        &mut self,
        mut stmt: impl FnMut(&mut Self, &str, &Spanned) -> Result<(), ParseError>,
    ) -> Result<Spanned, ParseError> {
        self.expect(Tok::LBrace)?;
        loop {
            self.skip_newlines();
            if self.peek().tok == Tok::RBrace {
                return Ok(self.next());
            }
            let (prop, at) = self.word("a property")?;
            stmt(self, &prop, &at)?;
            self.end_statement()?;
        }
    }

    fn connector(&mut self) -> Result<ConnectorSpec, ParseError> {
        let (name, at) = self.ident("connector name")?;
        self.declare(&name, &at)?;
        let mut kind = None;
        let mut capacity = None;
        let mut message = None;
        let close = self.block(|p, prop, at| match prop {
            "kind" => {
                let k: ConnectorKind = p.keyword("connector kind")?;
                p.once(&mut kind, k, at, prop)
            }
            "capacity" => {
                let (w, t) = p.word("capacity")?;
                let n: usize = w
                    .parse()
                    .or_else(|_| p.error(&t, format!("capacity `{w}` is not a whole number")))?;
                p.once(&mut capacity, n, at, prop)
            }
            "message" => {
                let (m, _) = p.ident("message type tag")?;
                p.once(&mut message, m, at, prop)
            }
            other => p.error(at, format!("unknown connector property `{other}`")),
        })?;
        Ok(ConnectorSpec {
            kind: kind.map_or_else(
                || self.error(&close, format!("connector `{name}` has no `kind`")),
                Ok,
            )?,
            message: message.map_or_else(
                || self.error(&close, format!("connector `{name}` has no `message`")),
                Ok,
            )?,
            name,
            capacity,
        })
    }

    fn component(&mut self) -> Result<ComponentSpec, ParseError> {
        let (name, at) = self.ident("component name")?;
        self.declare(&name, &at)?;
        let mut role = None;
        let mut concurrency = None;
        let mut host = None;
        let mut bindings = Vec::new();
        let mut params = BTreeMap::new();
        let close = self.block(|p, prop, at| match prop {
            "role" => {
                let r: RoleStereotype = p.keyword("role")?;
                p.once(&mut role, r, at, prop)
            }
            "concurrency" => {
                let c: ConcurrencyType = p.keyword("concurrency type")?;
                p.once(&mut concurrency, c, at, prop)
            }
            "host" => {
                let (h, t) = p.ident("host component name")?;
                p.references.push(Reference {
                    name: h.clone(),
                    what: "component",
                    line: t.line,
                    col: t.col,
                });
                p.once(&mut host, h, at, prop)
            }
            "bind" => {
                let (port, _) = p.ident("port name")?;
                p.expect(Tok::Arrow)?;
                let (connector, t) = p.ident("connector name")?;
                p.references.push(Reference {
                    name: connector.clone(),
                    what: "connector",
                    line: t.line,
                    col: t.col,
                });
                let (kw, kt) = p.word("`as`")?;
                if kw != "as" {
                    return p.error(&kt, format!("expected `as`, found `{kw}`"));
                }
                let (e, et) = p.word("`sender` or `receiver`")?;
                let end = match e.as_str() {
                    "sender" => End::Sender,
                    "receiver" => End::Receiver,
                    _ => {
                        return p
                            .error(&et, format!("expected `sender` or `receiver`, found `{e}`"))
                    }
                };
                bindings.push(BindingSpec {
                    port,
                    connector,
                    end,
                });
                Ok(())
            }
            "param" => {
                let (key, kt) = p.ident("parameter name")?;
                p.expect(Tok::Eq)?;
                let (value, _) = p.word("parameter value")?;
                if params.insert(key.clone(), value).is_some() {
                    return p.error(&kt, format!("parameter `{key}` given twice"));
                }
                Ok(())
            }
            other => p.error(at, format!("unknown component property `{other}`")),
        })?;
        Ok(ComponentSpec {
            role: role.map_or_else(
                || self.error(&close, format!("component `{name}` has no `role`")),
                Ok,
            )?,
            concurrency: concurrency.map_or_else(
                || self.error(&close, format!("component `{name}` has no `concurrency`")),
                Ok,
            )?,
            name,
            host,
            bindings,
            params,
        })
    }
}

/// Parse an architecture description. Declarations may appear in any order;
/// references are resolved once the whole text has been read.
pub fn parse_spec(text: &str) -> Result<ArchitectureSpec, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        names: BTreeMap::new(),
        references: Vec::new(),
    };
    let mut spec = ArchitectureSpec::default();
    loop {
        p.skip_newlines();
        let (kw, at) = match p.peek().tok {
            Tok::Eof => break,
            _ => p.word("`connector` or `component`")?,
        };
        match kw.as_str() {
            "connector" => spec.connectors.push(p.connector()?),
            "component" => spec.components.push(p.component()?),
            other => {
                return p.error(
                    &at,
                    format!("expected `connector` or `component`, found `{other}`"),
                )
            }
        }
        p.end_statement()?;
    }
    for r in &p.references {
        let found = match r.what {
            "connector" => spec.connector(&r.name).is_some(),
            _ => spec.component(&r.name).is_some(),
        };
        if !found {
            return Err(ParseError::DanglingReference {
                name: r.name.clone(),
                what: r.what,
                line: r.line,
                col: r.col,
            });
        }
    }
    Ok(spec)
}

impl FromStr for ArchitectureSpec {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_spec(s)
    }
}
