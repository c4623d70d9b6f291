//! Parsers for rule text and instance files.
//!
//! Rule syntax: `Head(x,y) :- Body1(x,z), not Body2(z), Body3(z,y).`
//! Identifiers in rule argument positions are variables; constants are
//! written quoted (`'a'`) or as numerals. Instance files hold one fact per
//! line, `R(a,b).`, where arguments are constants; `%` starts a comment.

use crate::data::{DataElement, DatabaseSchema, Fact, Instance, SchemaError};
use crate::lex::{tokenize, Cursor, ParseError, Token};
use crate::query::{Atom, Rule, Term};
use std::sync::Arc;

pub fn parse_rules(text: &str) -> Result<Vec<Rule>, ParseError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let rules = parse_rule_list(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.error("expected a rule"));
    }
    Ok(rules)
}

/// Parse rules until end of input or a closing brace (not consumed).
pub(crate) fn parse_rule_list(cur: &mut Cursor) -> Result<Vec<Rule>, ParseError> {
    let mut rules = Vec::new();
    loop {
        match cur.peek() {
            None | Some(Token::RBrace) => break,
            _ => rules.push(parse_rule(cur)?),
        }
    }
    Ok(rules)
}

pub(crate) fn parse_rule(cur: &mut Cursor) -> Result<Rule, ParseError> {
    let head = parse_atom(cur)?;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    if cur.eat(&Token::Turnstile) {
        loop {
            if cur.eat_kw("not") {
                neg.push(parse_atom(cur)?);
            } else {
                pos.push(parse_atom(cur)?);
            }
            if !cur.eat(&Token::Comma) {
                break;
            }
        }
    }
    cur.expect(&Token::Dot)?;
    Ok(Rule { head, pos, neg })
}

pub(crate) fn parse_atom(cur: &mut Cursor) -> Result<Atom, ParseError> {
    let pred = cur.expect_ident()?;
    let mut args = Vec::new();
    cur.expect(&Token::LParen)?;
    if !cur.eat(&Token::RParen) {
        loop {
            args.push(parse_term(cur)?);
            if !cur.eat(&Token::Comma) {
                break;
            }
        }
        cur.expect(&Token::RParen)?;
    }
    Ok(Atom::new(&pred, args))
}

fn parse_term(cur: &mut Cursor) -> Result<Term, ParseError> {
    match cur.next() {
        Some(s) => match s.tok {
            Token::Ident(v) => Ok(Term::var(&v)),
            Token::Quoted(c) => Ok(Term::constant(&c)),
            Token::Nat(n) => Ok(Term::constant(&n.to_string())),
            t => Err(ParseError::new(
                s.line,
                s.col,
                format!("expected a term, found {t}"),
            )),
        },
        None => Err(cur.error("expected a term, found end of input")),
    }
}

/// Parse an instance file, inferring the schema from the facts.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let facts = parse_facts(text)?;
    let mut schema = DatabaseSchema::new();
    for f in &facts {
        match schema.arity(&f.relation) {
            None => schema
                .declare(f.relation.clone(), f.args.len())
                .expect("first declaration"),
            Some(a) if a != f.args.len() => {
                return Err(ParseError::new(
                    1,
                    1,
                    format!(
                        "relation `{}` used with arity {} and with arity {}",
                        f.relation,
                        a,
                        f.args.len()
                    ),
                ))
            }
            Some(_) => {}
        }
    }
    let mut inst = Instance::empty(schema);
    for f in facts {
        inst.insert(f).expect("schema inferred from these facts");
    }
    Ok(inst)
}

/// Parse an instance file against a known schema.
pub fn parse_instance_with_schema(
    text: &str,
    schema: Arc<DatabaseSchema>,
) -> Result<Instance, ParseError> {
    let facts = parse_facts(text)?;
    let mut inst = Instance::new(schema);
    for f in facts {
        inst.insert(f).map_err(|e: SchemaError| ParseError::new(1, 1, e.to_string()))?;
    }
    Ok(inst)
}

pub(crate) fn parse_facts(text: &str) -> Result<Vec<Fact>, ParseError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let mut out = Vec::new();
    while !cur.at_end() {
        out.push(parse_fact(&mut cur)?);
    }
    Ok(out)
}

pub(crate) fn parse_fact(cur: &mut Cursor) -> Result<Fact, ParseError> {
    let rel = cur.expect_ident()?;
    let mut args = Vec::new();
    cur.expect(&Token::LParen)?;
    if !cur.eat(&Token::RParen) {
        loop {
            args.push(parse_constant(cur)?);
            if !cur.eat(&Token::Comma) {
                break;
            }
        }
        cur.expect(&Token::RParen)?;
    }
    cur.expect(&Token::Dot)?;
    Ok(Fact {
        relation: crate::data::sym(&rel),
        args,
    })
}

pub(crate) fn parse_constant(cur: &mut Cursor) -> Result<DataElement, ParseError> {
    match cur.next() {
        Some(s) => match s.tok {
            Token::Ident(v) => Ok(DataElement::new(&v)),
            Token::Quoted(c) => Ok(DataElement::new(&c)),
            Token::Nat(n) => Ok(DataElement::new(&n.to_string())),
            t => Err(ParseError::new(
                s.line,
                s.col,
                format!("expected a constant, found {t}"),
            )),
        },
        None => Err(cur.error("expected a constant, found end of input")),
    }
}
