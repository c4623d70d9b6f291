//! Rule representation, parsing, and the slice-by-slice evaluator.
//!
//! Internally the timestamp argument is stripped from every atom: a rule
//! stores data arguments only, plus whether it is inductive. The special
//! terms [`TTerm::Time`] and [`TTerm::TimeSucc`] stand for the current
//! timestamp copied into a data position (entanglement).

use crate::data::{sym, DataElement, Fact, Symbol};
use crate::dedalus::DedalusError;
use crate::lex::{tokenize, Cursor, ParseError, Token};
use crate::query::NEQ;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TTerm {
    Var(Symbol),
    Const(DataElement),
    /// The rule's timestamp, copied into a data position.
    Time,
    /// The successor timestamp; only valid in the head of an inductive rule.
    TimeSucc,
}

impl fmt::Display for TTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TTerm::Var(v) => write!(f, "{v}"),
            TTerm::Const(c) => {
                if c.as_str().bytes().all(|b| b.is_ascii_digit()) {
                    write!(f, "{c}")
                } else {
                    write!(f, "'{c}'")
                }
            }
            TTerm::Time => write!(f, "T"),
            TTerm::TimeSucc => write!(f, "T+1"),
        }
    }
}

impl fmt::Debug for TTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// An atom over data positions only; the timestamp argument is implicit.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TAtom {
    pub pred: Symbol,
    pub args: Vec<TTerm>,
}

impl TAtom {
    pub fn new(pred: &str, args: Vec<TTerm>) -> TAtom {
        TAtom { pred: sym(pred), args }
    }
}

impl fmt::Display for TAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for a in &self.args {
            write!(f, "{a},")?;
        }
        write!(f, "T)")
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct DedalusRule {
    pub head: TAtom,
    pub pos: Vec<TAtom>,
    /// `Neq` tests, kept apart from relational subgoals.
    pub neq: Vec<(TTerm, TTerm)>,
    pub neg: Vec<TAtom>,
    pub inductive: bool,
}

impl fmt::Display for DedalusRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.head.pred)?;
        for a in &self.head.args {
            write!(f, "{a}, ")?;
        }
        write!(f, "{})", if self.inductive { "T+1" } else { "T" })?;
        write!(f, " :- ")?;
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            Ok(())
        };
        for a in &self.pos {
            sep(f)?;
            write!(f, "{a}")?;
        }
        for (x, y) in &self.neq {
            sep(f)?;
            write!(f, "Neq({x},{y})")?;
        }
        for a in &self.neg {
            sep(f)?;
            write!(f, "not {a}")?;
        }
        write!(f, ".")
    }
}

impl fmt::Debug for DedalusRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, Debug)]
pub struct DedalusProgram {
    rules: Vec<DedalusRule>,
    /// Evaluation order of the deductive rules: indices into `rules`,
    /// grouped by stratum.
    strata: Vec<Vec<usize>>,
}

impl DedalusProgram {
    pub fn new(rules: Vec<DedalusRule>) -> Result<DedalusProgram, DedalusError> {
        for r in &rules {
            validate_rule(r)?;
        }
        let strata = stratify(&rules)?;
        Ok(DedalusProgram { rules, strata })
    }

    pub fn rules(&self) -> &[DedalusRule] {
        &self.rules
    }

    pub fn deductive_rules(&self) -> impl Iterator<Item = &DedalusRule> {
        self.rules.iter().filter(|r| !r.inductive)
    }

    pub fn inductive_rules(&self) -> impl Iterator<Item = &DedalusRule> {
        self.rules.iter().filter(|r| r.inductive)
    }
}

impl fmt::Display for DedalusProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

fn validate_rule(r: &DedalusRule) -> Result<(), DedalusError> {
    let bad = |msg: &str| Err(DedalusError::BadTime(r.to_string(), msg.to_string()));
    if r.pos.is_empty() {
        return bad("a rule needs at least one positive relational subgoal");
    }
    if !r.inductive && r.head.args.contains(&TTerm::TimeSucc) {
        return bad("T+1 may only appear in the head of an inductive rule");
    }
    for a in r.pos.iter().chain(&r.neg) {
        if a.args.contains(&TTerm::TimeSucc) {
            return bad("T+1 may not appear in a body");
        }
    }
    let bound: BTreeSet<&Symbol> = r
        .pos
        .iter()
        .flat_map(|a| a.args.iter())
        .filter_map(|t| match t {
            TTerm::Var(v) => Some(v),
            _ => None,
        })
        .collect();
    let check = |t: &TTerm| match t {
        TTerm::Var(v) if !bound.contains(v) => Err(DedalusError::NotRangeRestricted(
            r.to_string(),
            v.to_string(),
        )),
        _ => Ok(()),
    };
    for t in &r.head.args {
        check(t)?;
    }
    for a in &r.neg {
        for t in &a.args {
            check(t)?;
        }
    }
    for (x, y) in &r.neq {
        check(x)?;
        check(y)?;
    }
    Ok(())
}

/// Stratify the deductive rules: within a slice, a predicate may not depend
/// negatively on itself through any cycle. Inductive rules read a finished
/// slice and need no stratification.
fn stratify(rules: &[DedalusRule]) -> Result<Vec<Vec<usize>>, DedalusError> {
    let heads: BTreeSet<&Symbol> = rules
        .iter()
        .filter(|r| !r.inductive)
        .map(|r| &r.head.pred)
        .collect();
    let mut stratum: BTreeMap<&Symbol, usize> = heads.iter().map(|p| (*p, 0)).collect();
    let n = heads.len().max(1);
    for round in 0..=n {
        let mut changed = false;
        for r in rules.iter().filter(|r| !r.inductive) {
            let mut need = 0;
            for a in &r.pos {
                if let Some(&s) = stratum.get(&a.pred) {
                    need = need.max(s);
                }
            }
            for a in &r.neg {
                if let Some(&s) = stratum.get(&a.pred) {
                    need = need.max(s + 1);
                }
            }
            if stratum[&r.head.pred] < need {
                if need > n {
                    return Err(DedalusError::NotStratifiable(r.head.pred.to_string()));
                }
                stratum.insert(&r.head.pred, need);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        if round == n {
            // A stratum index can only rise n times without a negative cycle.
            return Err(DedalusError::NotStratifiable(
                rules
                    .iter()
                    .find(|r| !r.inductive)
                    .map(|r| r.head.pred.to_string())
                    .unwrap_or_default(),
            ));
        }
    }
    let max = stratum.values().copied().max().unwrap_or(0);
    let mut strata = vec![Vec::new(); max + 1];
    for (i, r) in rules.iter().enumerate() {
        if !r.inductive {
            strata[stratum[&r.head.pred]].push(i);
        }
    }
    Ok(strata)
}

// ---------------------------------------------------------------------------
// Parsing.

#[derive(Clone)]
enum RawTerm {
    Var(Symbol),
    Const(DataElement),
    /// `v+1`.
    Succ(Symbol),
}

fn parse_raw_term(cur: &mut Cursor) -> Result<RawTerm, ParseError> {
    match cur.next() {
        Some(s) => match s.tok {
            Token::Ident(v) => {
                if cur.eat(&Token::Plus) {
                    let n = cur.expect_nat()?;
                    if n != 1 {
                        return Err(cur.error("only `+1` is supported on timestamps"));
                    }
                    Ok(RawTerm::Succ(sym(&v)))
                } else {
                    Ok(RawTerm::Var(sym(&v)))
                }
            }
            Token::Quoted(c) => Ok(RawTerm::Const(DataElement::new(&c))),
            Token::Nat(n) => Ok(RawTerm::Const(DataElement::new(&n.to_string()))),
            t => Err(ParseError::new(
                s.line,
                s.col,
                format!("expected a term, found {t}"),
            )),
        },
        None => Err(cur.error("expected a term, found end of input")),
    }
}

fn parse_raw_atom(cur: &mut Cursor) -> Result<(Symbol, Vec<RawTerm>), ParseError> {
    let pred = cur.expect_ident()?;
    let mut args = Vec::new();
    cur.expect(&Token::LParen)?;
    if !cur.eat(&Token::RParen) {
        loop {
            args.push(parse_raw_term(cur)?);
            if !cur.eat(&Token::Comma) {
                break;
            }
        }
        cur.expect(&Token::RParen)?;
    }
    Ok((sym(&pred), args))
}

/// Split a raw atom into data arguments and its timestamp argument.
fn split_time(
    rule_text: &str,
    pred: &Symbol,
    args: Vec<RawTerm>,
) -> Result<(Vec<RawTerm>, RawTerm), DedalusError> {
    let mut args = args;
    match args.pop() {
        Some(t) => Ok((args, t)),
        None => Err(DedalusError::BadTime(
            rule_text.to_string(),
            format!("atom `{pred}` lacks a timestamp argument"),
        )),
    }
}

fn finish_terms(
    rule_text: &str,
    args: Vec<RawTerm>,
    time_var: &Symbol,
    allow_succ: bool,
) -> Result<Vec<TTerm>, DedalusError> {
    args.into_iter()
        .map(|t| match t {
            RawTerm::Var(v) if v == *time_var => Ok(TTerm::Time),
            RawTerm::Var(v) => Ok(TTerm::Var(v)),
            RawTerm::Const(c) => Ok(TTerm::Const(c)),
            RawTerm::Succ(v) if allow_succ && v == *time_var => Ok(TTerm::TimeSucc),
            RawTerm::Succ(_) => Err(DedalusError::BadTime(
                rule_text.to_string(),
                "`+1` is only allowed on the timestamp of an inductive head".to_string(),
            )),
        })
        .collect()
}

/// Parse a rule file: `Head(x, T) :- Body(x, T).` or `Head(x, T+1) :- ...`.
pub fn parse_dedalus(text: &str) -> Result<DedalusProgram, DedalusError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let mut rules = Vec::new();
    while !cur.at_end() {
        rules.push(parse_one_rule(&mut cur)?);
    }
    DedalusProgram::new(rules)
}

fn parse_one_rule(cur: &mut Cursor) -> Result<DedalusRule, DedalusError> {
    let head_raw = parse_raw_atom(cur)?;
    let mut pos_raw = Vec::new();
    let mut neg_raw = Vec::new();
    cur.expect(&Token::Turnstile).map_err(DedalusError::from)?;
    loop {
        if cur.eat_kw("not") {
            neg_raw.push(parse_raw_atom(cur)?);
        } else {
            pos_raw.push(parse_raw_atom(cur)?);
        }
        if !cur.eat(&Token::Comma) {
            break;
        }
    }
    cur.expect(&Token::Dot).map_err(DedalusError::from)?;

    let text = format!("{}(...) :- ...", head_raw.0);
    // The timestamp variable is the last argument of every non-Neq subgoal.
    let mut time_var: Option<Symbol> = None;
    let mut pos = Vec::new();
    let mut neq = Vec::new();
    let bind_time = |t: RawTerm, time_var: &mut Option<Symbol>| -> Result<(), DedalusError> {
        let RawTerm::Var(v) = t else {
            return Err(DedalusError::BadTime(
                text.clone(),
                "timestamp arguments must be a shared variable".to_string(),
            ));
        };
        match time_var {
            None => {
                *time_var = Some(v);
                Ok(())
            }
            Some(tv) if *tv == v => Ok(()),
            Some(_) => Err(DedalusError::BadTime(
                text.clone(),
                "all subgoals must be joined on one timestamp variable".to_string(),
            )),
        }
    };
    let mut raw_pos_data = Vec::new();
    for (pred, args) in pos_raw {
        if &*pred == NEQ {
            if args.len() != 2 {
                return Err(DedalusError::BadTime(
                    text.clone(),
                    "Neq takes exactly two data arguments".to_string(),
                ));
            }
            let mut it = args.into_iter();
            neq.push((it.next().unwrap(), it.next().unwrap()));
            continue;
        }
        let (data, t) = split_time(&text, &pred, args)?;
        bind_time(t, &mut time_var)?;
        raw_pos_data.push((pred, data));
    }
    let mut raw_neg_data = Vec::new();
    for (pred, args) in neg_raw {
        let (data, t) = split_time(&text, &pred, args)?;
        bind_time(t, &mut time_var)?;
        raw_neg_data.push((pred, data));
    }
    let Some(time_var) = time_var else {
        return Err(DedalusError::BadTime(
            text,
            "a rule needs at least one relational subgoal".to_string(),
        ));
    };

    let (head_pred, head_args) = head_raw;
    let (head_data, head_time) = split_time(&text, &head_pred, head_args)?;
    let inductive = match head_time {
        RawTerm::Var(v) if v == time_var => false,
        RawTerm::Succ(v) if v == time_var => true,
        _ => {
            return Err(DedalusError::BadTime(
                text,
                "the head timestamp must be T or T+1".to_string(),
            ))
        }
    };

    let head = TAtom {
        pred: head_pred,
        args: finish_terms(&text, head_data, &time_var, inductive)?,
    };
    let pos2: Result<Vec<TAtom>, DedalusError> = raw_pos_data
        .into_iter()
        .map(|(pred, data)| {
            Ok(TAtom {
                pred,
                args: finish_terms(&text, data, &time_var, false)?,
            })
        })
        .collect();
    pos.extend(pos2?);
    let neg: Result<Vec<TAtom>, DedalusError> = raw_neg_data
        .into_iter()
        .map(|(pred, data)| {
            Ok(TAtom {
                pred,
                args: finish_terms(&text, data, &time_var, false)?,
            })
        })
        .collect();
    let neq: Result<Vec<(TTerm, TTerm)>, DedalusError> = neq
        .into_iter()
        .map(|(x, y)| {
            let x = finish_terms(&text, vec![x], &time_var, false)?.pop().unwrap();
            let y = finish_terms(&text, vec![y], &time_var, false)?.pop().unwrap();
            Ok((x, y))
        })
        .collect();
    Ok(DedalusRule {
        head,
        pos,
        neq: neq?,
        neg: neg?,
        inductive,
    })
}

// ---------------------------------------------------------------------------
// Temporal instances.

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TemporalFact {
    pub fact: Fact,
    pub time: u64,
}

impl fmt::Display for TemporalFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.fact, self.time)
    }
}

/// A finite set of timestamped facts, stored slice by slice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TemporalInstance {
    slices: BTreeMap<u64, BTreeSet<Fact>>,
}

impl TemporalInstance {
    pub fn new() -> TemporalInstance {
        TemporalInstance::default()
    }

    pub fn insert(&mut self, fact: Fact, time: u64) {
        self.slices.entry(time).or_default().insert(fact);
    }

    /// I|_n.
    pub fn slice(&self, n: u64) -> &BTreeSet<Fact> {
        static EMPTY: std::sync::OnceLock<BTreeSet<Fact>> = std::sync::OnceLock::new();
        self.slices.get(&n).unwrap_or_else(|| EMPTY.get_or_init(BTreeSet::new))
    }

    /// Î = ∪_n I|_n.
    pub fn flatten(&self) -> BTreeSet<Fact> {
        self.slices.values().flatten().cloned().collect()
    }

    pub fn max_time(&self) -> Option<u64> {
        self.slices
            .iter()
            .rev()
            .find(|(_, s)| !s.is_empty())
            .map(|(n, _)| *n)
    }

    pub fn facts(&self) -> impl Iterator<Item = TemporalFact> + '_ {
        self.slices.iter().flat_map(|(n, facts)| {
            facts.iter().map(|f| TemporalFact { fact: f.clone(), time: *n })
        })
    }

    pub fn len(&self) -> usize {
        self.slices.values().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.values().all(|s| s.is_empty())
    }
}

impl fmt::Display for TemporalInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for tf in self.facts() {
            writeln!(f, "{tf}.")?;
        }
        Ok(())
    }
}

/// Parse `R(a,b)@3.` lines.
pub fn parse_temporal_instance(text: &str) -> Result<TemporalInstance, ParseError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let mut out = TemporalInstance::new();
    while !cur.at_end() {
        let rel = cur.expect_ident()?;
        let mut args = Vec::new();
        cur.expect(&Token::LParen)?;
        if !cur.eat(&Token::RParen) {
            loop {
                args.push(crate::parse::parse_constant(&mut cur)?);
                if !cur.eat(&Token::Comma) {
                    break;
                }
            }
            cur.expect(&Token::RParen)?;
        }
        cur.expect(&Token::At)?;
        let time = cur.expect_nat()?;
        cur.expect(&Token::Dot)?;
        out.insert(Fact { relation: sym(&rel), args }, time);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Evaluation.

fn time_element(n: u64) -> DataElement {
    DataElement::new(&n.to_string())
}

/// Ground `t` under the substitution; None if it contains an unbound
/// variable (only possible while still extending the substitution).
fn ground(
    t: &TTerm,
    subst: &BTreeMap<Symbol, DataElement>,
    now: u64,
) -> Option<DataElement> {
    match t {
        TTerm::Var(v) => subst.get(v).cloned(),
        TTerm::Const(c) => Some(c.clone()),
        TTerm::Time => Some(time_element(now)),
        TTerm::TimeSucc => Some(time_element(now + 1)),
    }
}

/// Enumerate substitutions matching all positive subgoals against `facts`,
/// then filter by Neq tests and negated subgoals.
fn matches(
    rule: &DedalusRule,
    facts: &BTreeMap<Symbol, BTreeSet<Vec<DataElement>>>,
    now: u64,
) -> Vec<BTreeMap<Symbol, DataElement>> {
    static NO_TUPLES: std::sync::OnceLock<BTreeSet<Vec<DataElement>>> =
        std::sync::OnceLock::new();
    let empty = NO_TUPLES.get_or_init(BTreeSet::new);
    let mut out = Vec::new();
    let mut stack: Vec<BTreeMap<Symbol, DataElement>> = vec![BTreeMap::new()];
    for atom in &rule.pos {
        let tuples = facts.get(&atom.pred).unwrap_or(empty);
        let mut next = Vec::new();
        for subst in &stack {
            'tuple: for tuple in tuples {
                if tuple.len() != atom.args.len() {
                    continue;
                }
                let mut ext = subst.clone();
                for (arg, val) in atom.args.iter().zip(tuple) {
                    match arg {
                        TTerm::Var(v) => match ext.get(v) {
                            Some(bound) if bound != val => continue 'tuple,
                            Some(_) => {}
                            None => {
                                ext.insert(v.clone(), val.clone());
                            }
                        },
                        other => {
                            if ground(other, &ext, now).as_ref() != Some(val) {
                                continue 'tuple;
                            }
                        }
                    }
                }
                next.push(ext);
            }
        }
        stack = next;
        if stack.is_empty() {
            return out;
        }
    }
    'subst: for subst in stack {
        for (x, y) in &rule.neq {
            let (Some(a), Some(b)) = (ground(x, &subst, now), ground(y, &subst, now)) else {
                continue 'subst;
            };
            if a == b {
                continue 'subst;
            }
        }
        for atom in &rule.neg {
            let Some(tuple) = atom
                .args
                .iter()
                .map(|t| ground(t, &subst, now))
                .collect::<Option<Vec<_>>>()
            else {
                continue 'subst;
            };
            if facts.get(&atom.pred).unwrap_or(empty).contains(&tuple) {
                continue 'subst;
            }
        }
        out.push(subst);
    }
    out
}

fn head_fact(rule: &DedalusRule, subst: &BTreeMap<Symbol, DataElement>, now: u64) -> Fact {
    Fact {
        relation: rule.head.pred.clone(),
        args: rule
            .head
            .args
            .iter()
            .map(|t| ground(t, subst, now).expect("range-restricted head"))
            .collect(),
    }
}

fn index(facts: &BTreeSet<Fact>) -> BTreeMap<Symbol, BTreeSet<Vec<DataElement>>> {
    let mut out: BTreeMap<Symbol, BTreeSet<Vec<DataElement>>> = BTreeMap::new();
    for f in facts {
        out.entry(f.relation.clone()).or_default().insert(f.args.clone());
    }
    out
}

/// Close one slice under the deductive rules, stratum by stratum.
fn close_slice(program: &DedalusProgram, slice: &mut BTreeSet<Fact>, now: u64) {
    for stratum in &program.strata {
        loop {
            let idx = index(slice);
            let mut new = Vec::new();
            for &ri in stratum {
                let rule = &program.rules[ri];
                for subst in matches(rule, &idx, now) {
                    let f = head_fact(rule, &subst, now);
                    if !slice.contains(&f) {
                        new.push(f);
                    }
                }
            }
            if new.is_empty() {
                break;
            }
            slice.extend(new);
        }
    }
}

/// Evaluate slice by slice: input facts at time n join the slice, the
/// slice is closed under the deductive rules, then the inductive rules
/// seed slice n+1. Returns all facts with time ≤ `max_time`.
pub fn eval_dedalus(
    program: &DedalusProgram,
    input: &TemporalInstance,
    max_time: u64,
) -> TemporalInstance {
    let mut out = TemporalInstance::new();
    let mut carry: BTreeSet<Fact> = BTreeSet::new();
    for n in 0..=max_time {
        let mut slice = carry;
        slice.extend(input.slice(n).iter().cloned());
        close_slice(program, &mut slice, n);
        let idx = index(&slice);
        carry = BTreeSet::new();
        for rule in program.inductive_rules() {
            for subst in matches(rule, &idx, n) {
                carry.insert(head_fact(rule, &subst, n));
            }
        }
        for f in slice {
            out.insert(f, n);
        }
    }
    out
}

/// Empirical eventual-consistency probe: evaluate out to `probe_horizon`
/// and report the earliest time from which every later slice is literally
/// identical. Slices are compared verbatim, data positions included, so a
/// program deriving a fresh entangled timestamp value each step never
/// stabilizes under this convention.
pub fn check_eventual_consistency(
    program: &DedalusProgram,
    input: &TemporalInstance,
    probe_horizon: u64,
) -> (bool, Option<u64>) {
    let out = eval_dedalus(program, input, probe_horizon);
    let last = out.slice(probe_horizon).clone();
    let mut n = probe_horizon;
    while n > 0 && *out.slice(n - 1) == last {
        n -= 1;
    }
    if n < probe_horizon {
        (true, Some(n))
    } else {
        (false, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(rel: &str, args: &[&str]) -> Fact {
        Fact::new(rel, args)
    }

    #[test]
    fn persistence_carries_facts_forward() {
        let p = parse_dedalus("a(x, T+1) :- a(x, T).").unwrap();
        let mut input = TemporalInstance::new();
        input.insert(fact("a", &["c"]), 0);
        let out = eval_dedalus(&p, &input, 5);
        for n in 0..=5 {
            assert!(out.slice(n).contains(&fact("a", &["c"])), "time {n}");
        }
    }

    #[test]
    fn empty_program_returns_the_input() {
        let p = DedalusProgram::new(Vec::new()).unwrap();
        let mut input = TemporalInstance::new();
        input.insert(fact("a", &["c"]), 2);
        input.insert(fact("b", &["d", "e"]), 4);
        assert_eq!(eval_dedalus(&p, &input, 6), input);
    }

    #[test]
    fn deductive_copy_stays_in_its_slice() {
        let p = parse_dedalus("b(x, T) :- a(x, T).").unwrap();
        let mut input = TemporalInstance::new();
        input.insert(fact("a", &["c"]), 3);
        let out = eval_dedalus(&p, &input, 6);
        assert!(out.slice(3).contains(&fact("b", &["c"])));
        for n in (0..=6).filter(|n| *n != 3) {
            assert!(!out.slice(n).contains(&fact("b", &["c"])), "time {n}");
        }
    }

    #[test]
    fn entangled_timestamps_are_copied_as_data() {
        let p = parse_dedalus("stamp(x, T, T) :- a(x, T).").unwrap();
        let mut input = TemporalInstance::new();
        input.insert(fact("a", &["c"]), 7);
        let out = eval_dedalus(&p, &input, 8);
        assert!(out.slice(7).contains(&fact("stamp", &["c", "7"])));
    }

    #[test]
    fn stratified_negation_within_a_slice() {
        let p = parse_dedalus(
            "lab(x, T) :- a(x, T).
             lab(x, T) :- b(x, T).
             bare(x, T) :- e(x, T), not lab(x, T).",
        )
        .unwrap();
        let mut input = TemporalInstance::new();
        input.insert(fact("e", &["1"]), 0);
        input.insert(fact("e", &["2"]), 0);
        input.insert(fact("a", &["1"]), 0);
        let out = eval_dedalus(&p, &input, 0);
        assert!(out.slice(0).contains(&fact("bare", &["2"])));
        assert!(!out.slice(0).contains(&fact("bare", &["1"])));
    }

    #[test]
    fn rejects_negative_cycles_in_the_deductive_part() {
        let err = parse_dedalus(
            "p(x, T) :- e(x, T), not q(x, T).
             q(x, T) :- e(x, T), not p(x, T).",
        )
        .unwrap_err();
        assert!(matches!(err, DedalusError::NotStratifiable(_)));
        // The same cycle through an inductive rule is fine: the negation
        // reads the previous, finished slice.
        parse_dedalus(
            "p(x, T+1) :- e(x, T), not q(x, T).
             q(x, T) :- e(x, T), not p(x, T).",
        )
        .unwrap();
    }

    #[test]
    fn rejects_time_discipline_violations() {
        assert!(matches!(
            parse_dedalus("p(x, T) :- a(x, T), b(x, U)."),
            Err(DedalusError::BadTime(..))
        ));
        assert!(matches!(
            parse_dedalus("p(x, T) :- a(x, T+1)."),
            Err(DedalusError::BadTime(..))
        ));
        assert!(matches!(
            parse_dedalus("p(x, U) :- a(x, T)."),
            Err(DedalusError::BadTime(..))
        ));
        assert!(matches!(
            parse_dedalus("p(x, y, T) :- a(x, T)."),
            Err(DedalusError::NotRangeRestricted(..))
        ));
    }

    #[test]
    fn pure_persistence_stabilizes_after_the_last_input() {
        let p = parse_dedalus("a(x, T+1) :- a(x, T).").unwrap();
        let mut input = TemporalInstance::new();
        input.insert(fact("a", &["c"]), 0);
        input.insert(fact("a", &["d"]), 3);
        let (stable, at) = check_eventual_consistency(&p, &input, 20);
        assert!(stable);
        assert_eq!(at, Some(3), "slices constant once every input has arrived");
    }

    #[test]
    fn entangled_counter_never_stabilizes() {
        let p = parse_dedalus("c(T+1, T+1) :- c(x, T).").unwrap();
        let mut input = TemporalInstance::new();
        input.insert(fact("c", &["0"]), 0);
        let (stable, at) = check_eventual_consistency(&p, &input, 50);
        assert!(!stable, "a fresh entangled value appears in every slice");
        assert_eq!(at, None);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let src = "
            p(x, T) :- e(x, T).
            q(x, T+1) :- p(x, T), not r(x, T).
            r(x, T+1) :- q(x, T).
        ";
        let p1 = parse_dedalus(src).unwrap();
        let p2 = parse_dedalus(src).unwrap();
        let mut input = TemporalInstance::new();
        input.insert(fact("e", &["u"]), 0);
        input.insert(fact("e", &["v"]), 2);
        assert_eq!(eval_dedalus(&p1, &input, 12), eval_dedalus(&p2, &input, 12));
    }

    #[test]
    fn temporal_instance_round_trips() {
        let text = "Tape(1,2)@0.\nBegin(1)@0.\na(1)@3.\n";
        let inst = parse_temporal_instance(text).unwrap();
        assert_eq!(inst.len(), 3);
        assert_eq!(inst.max_time(), Some(3));
        let back = parse_temporal_instance(&inst.to_string()).unwrap();
        assert_eq!(inst, back);
        assert!(inst.flatten().contains(&fact("Begin", &["1"])));
    }
}
