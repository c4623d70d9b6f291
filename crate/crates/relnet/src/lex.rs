//! Shared tokenizer for the textual formats: instance files, rule sets,
//! transducer sources, network and partition files, and temporal rule files.
//!
//! `%` starts a line comment. Identifiers match `[A-Za-z_][A-Za-z0-9_]*`.
//! Naturals are separate tokens; in rule positions they read as constants.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Ident(String),
    /// `'abc'` — an explicitly quoted constant.
    Quoted(String),
    Nat(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Semi,
    Colon,
    /// `:-`
    Turnstile,
    Slash,
    At,
    Plus,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Quoted(s) => write!(f, "`'{s}'`"),
            Token::Nat(n) => write!(f, "`{n}`"),
            Token::LParen => write!(f, "`(`"),
            Token::RParen => write!(f, "`)`"),
            Token::LBrace => write!(f, "`{{`"),
            Token::RBrace => write!(f, "`}}`"),
            Token::Comma => write!(f, "`,`"),
            Token::Dot => write!(f, "`.`"),
            Token::Semi => write!(f, "`;`"),
            Token::Colon => write!(f, "`:`"),
            Token::Turnstile => write!(f, "`:-`"),
            Token::Slash => write!(f, "`/`"),
            Token::At => write!(f, "`@`"),
            Token::Plus => write!(f, "`+`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, col {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Token,
    pub line: usize,
    pub col: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> char {
        let c = self.chars.next().unwrap();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut lx = Lexer {
        chars: src.chars().peekable(),
        line: 1,
        col: 1,
    };
    while let Some(c) = lx.peek() {
        let (tl, tc) = (lx.line, lx.col);
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                lx.bump();
            }
            '%' => {
                while let Some(c) = lx.peek() {
                    lx.bump();
                    if c == '\n' {
                        break;
                    }
                }
            }
            'A'..='Z' | 'a'..='z' | '_' => {
                let mut s = String::new();
                while let Some(c) = lx.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(lx.bump());
                    } else {
                        break;
                    }
                }
                out.push(Spanned {
                    tok: Token::Ident(s),
                    line: tl,
                    col: tc,
                });
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(c) = lx.peek() {
                    if c.is_ascii_digit() {
                        s.push(lx.bump());
                    } else {
                        break;
                    }
                }
                let n: u64 = s
                    .parse()
                    .map_err(|_| ParseError::new(tl, tc, format!("number `{s}` out of range")))?;
                out.push(Spanned {
                    tok: Token::Nat(n),
                    line: tl,
                    col: tc,
                });
            }
            '\'' => {
                lx.bump();
                let mut s = String::new();
                loop {
                    match lx.peek() {
                        Some('\'') => {
                            lx.bump();
                            break;
                        }
                        Some(_) => s.push(lx.bump()),
                        None => {
                            return Err(ParseError::new(tl, tc, "unterminated quoted constant"))
                        }
                    }
                }
                if s.is_empty() {
                    return Err(ParseError::new(tl, tc, "empty quoted constant"));
                }
                out.push(Spanned {
                    tok: Token::Quoted(s),
                    line: tl,
                    col: tc,
                });
            }
            ':' => {
                lx.bump();
                if lx.peek() == Some('-') {
                    lx.bump();
                    out.push(Spanned {
                        tok: Token::Turnstile,
                        line: tl,
                        col: tc,
                    });
                } else {
                    out.push(Spanned {
                        tok: Token::Colon,
                        line: tl,
                        col: tc,
                    });
                }
            }
            _ => {
                let tok = match c {
                    '(' => Token::LParen,
                    ')' => Token::RParen,
                    '{' => Token::LBrace,
                    '}' => Token::RBrace,
                    ',' => Token::Comma,
                    '.' => Token::Dot,
                    ';' => Token::Semi,
                    '/' => Token::Slash,
                    '@' => Token::At,
                    '+' => Token::Plus,
                    other => {
                        return Err(ParseError::new(
                            tl,
                            tc,
                            format!("unexpected character `{other}`"),
                        ))
                    }
                };
                lx.bump();
                out.push(Spanned { tok, line: tl, col: tc });
            }
        }
    }
    Ok(out)
}

/// Cursor over a token stream with error positions.
pub struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Spanned>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    pub fn peek2(&self) -> Option<&Token> {
        self.toks.get(self.pos + 1).map(|s| &s.tok)
    }

    pub fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .or_else(|| self.toks.last().map(|s| (s.line, s.col + 1)))
            .unwrap_or((1, 1))
    }

    pub fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::new(line, col, msg)
    }

    pub fn expect(&mut self, tok: &Token) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == tok => {
                self.next();
                Ok(())
            }
            Some(t) => Err(self.error(format!("expected {tok}, found {t}"))),
            None => Err(self.error(format!("expected {tok}, found end of input"))),
        }
    }

    pub fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token::Ident(_)) => {
                if let Some(Spanned {
                    tok: Token::Ident(s),
                    ..
                }) = self.next()
                {
                    Ok(s)
                } else {
                    unreachable!()
                }
            }
            Some(t) => Err(self.error(format!("expected identifier, found {t}"))),
            None => Err(self.error("expected identifier, found end of input")),
        }
    }

    pub fn expect_nat(&mut self) -> Result<u64, ParseError> {
        match self.peek() {
            Some(Token::Nat(_)) => {
                if let Some(Spanned {
                    tok: Token::Nat(n), ..
                }) = self.next()
                {
                    Ok(n)
                } else {
                    unreachable!()
                }
            }
            Some(t) => Err(self.error(format!("expected a natural number, found {t}"))),
            None => Err(self.error("expected a natural number, found end of input")),
        }
    }

    /// Consume `tok` if it is next; report whether it was.
    pub fn eat(&mut self, tok: &Token) -> bool {
        if self.peek() == Some(tok) {
            self.next();
            true
        } else {
            false
        }
    }

    /// Consume a specific keyword identifier if next.
    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Token::Ident(s)) if s == kw) {
            self.next();
            true
        } else {
            false
        }
    }
}
