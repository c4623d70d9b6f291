//! Single-node transducer semantics: schemas, programs, local states, and
//! the deterministic transition function with conflict-resolving memory
//! update.

use crate::data::{
    sym, DataElement, DatabaseSchema, Fact, Instance, SchemaError, Symbol, Tuples, RESERVED_NAMES,
};
use crate::eval::{eval_tuples, EvalError};
use crate::lex::{tokenize, Cursor, ParseError, Token};
use crate::parse::parse_rule_list;
use crate::query::{Dialect, QueryError, QueryProgram, ANSWER};
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub const ID: &str = "Id";
pub const ALL: &str = "All";
pub const OUT: &str = "out";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransducerError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("schemas are not pairwise disjoint: `{0}` appears twice")]
    SchemaOverlap(String),
    #[error("{kind} query for `{rel}` has arity {found}, expected {expected}")]
    QueryArity {
        kind: &'static str,
        rel: String,
        expected: usize,
        found: usize,
    },
    #[error("{kind} query targets `{rel}`, which is not in the {kind} schema")]
    UnknownTarget { kind: &'static str, rel: String },
    #[error("query references undeclared predicate `{0}`")]
    UnknownPredicate(String),
    #[error("helper predicate `{0}` clashes with a schema relation")]
    HelperClash(String),
    #[error("Id must hold exactly the node's own identifier")]
    BadId,
    #[error("All must contain the Id element")]
    BadAll,
    #[error("received fact {0} is not over the message schema")]
    BadMessage(String),
}

/// The five-part schema of a transducer: inputs, the fixed system relations
/// `Id/1` and `All/1`, messages, memory, and the output arity.
#[derive(Clone, PartialEq, Eq)]
pub struct TransducerSchema {
    input: DatabaseSchema,
    message: DatabaseSchema,
    memory: DatabaseSchema,
    output_arity: usize,
    /// Σ_in ∪ Σ_sys ∪ Σ_mem — what a local state ranges over.
    state_schema: Arc<DatabaseSchema>,
    /// state_schema ∪ Σ_msg — what queries are evaluated on.
    full_schema: Arc<DatabaseSchema>,
    message_arc: Arc<DatabaseSchema>,
}

impl fmt::Debug for TransducerSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransducerSchema")
            .field("input", &self.input)
            .field("message", &self.message)
            .field("memory", &self.memory)
            .field("output_arity", &self.output_arity)
            .finish()
    }
}

impl TransducerSchema {
    pub fn new(
        input: DatabaseSchema,
        message: DatabaseSchema,
        memory: DatabaseSchema,
        output_arity: usize,
    ) -> Result<TransducerSchema, TransducerError> {
        for s in [&input, &message, &memory] {
            for name in s.names() {
                if RESERVED_NAMES.contains(&&**name) {
                    return Err(SchemaError::ReservedName(name.to_string()).into());
                }
            }
        }
        for (a, b) in [(&input, &message), (&input, &memory), (&message, &memory)] {
            if !a.is_disjoint(b) {
                let clash = a
                    .names()
                    .find(|n| b.contains(n))
                    .expect("non-disjoint schemas share a name");
                return Err(TransducerError::SchemaOverlap(clash.to_string()));
            }
        }
        let mut state_schema = input.union(&memory)?;
        state_schema.declare(sym(ID), 1)?;
        state_schema.declare(sym(ALL), 1)?;
        let full_schema = state_schema.union(&message)?;
        Ok(TransducerSchema {
            input,
            message_arc: Arc::new(message.clone()),
            message,
            memory,
            output_arity,
            state_schema: Arc::new(state_schema),
            full_schema: Arc::new(full_schema),
        })
    }

    pub fn input(&self) -> &DatabaseSchema {
        &self.input
    }

    pub fn message(&self) -> &DatabaseSchema {
        &self.message
    }

    pub fn memory(&self) -> &DatabaseSchema {
        &self.memory
    }

    pub fn output_arity(&self) -> usize {
        self.output_arity
    }

    pub fn state_schema(&self) -> Arc<DatabaseSchema> {
        self.state_schema.clone()
    }

    pub fn message_schema(&self) -> Arc<DatabaseSchema> {
        self.message_arc.clone()
    }

    /// An empty instance over Σ_msg, for heartbeat receives and send results.
    pub fn empty_messages(&self) -> Instance {
        Instance::new(self.message_arc.clone())
    }
}

/// Syntactic traits of a program, derived at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Flags {
    /// No rule mentions `Id` or `All`.
    pub oblivious: bool,
    pub uses_id: bool,
    pub uses_all: bool,
    /// Every delete query is the empty program.
    pub inflationary: bool,
}

#[derive(Clone, PartialEq, Eq)]
pub struct TransducerProgram {
    schema: TransducerSchema,
    send_queries: BTreeMap<Symbol, QueryProgram>,
    insert_queries: BTreeMap<Symbol, QueryProgram>,
    delete_queries: BTreeMap<Symbol, QueryProgram>,
    output_query: QueryProgram,
    flags: Flags,
    dialect: Dialect,
}

impl fmt::Debug for TransducerProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl TransducerProgram {
    /// Validate queries against the schema. Missing send/insert/delete
    /// queries default to the constant-empty program.
    pub fn new(
        schema: TransducerSchema,
        send_queries: BTreeMap<Symbol, QueryProgram>,
        insert_queries: BTreeMap<Symbol, QueryProgram>,
        delete_queries: BTreeMap<Symbol, QueryProgram>,
        output_query: QueryProgram,
        dialect: Dialect,
    ) -> Result<TransducerProgram, TransducerError> {
        for (kind, map, target_schema) in [
            ("send", &send_queries, &schema.message),
            ("insert", &insert_queries, &schema.memory),
            ("delete", &delete_queries, &schema.memory),
        ] {
            for (rel, q) in map {
                let Some(arity) = target_schema.arity(rel) else {
                    return Err(TransducerError::UnknownTarget {
                        kind,
                        rel: rel.to_string(),
                    });
                };
                if q.answer_arity() != arity {
                    return Err(TransducerError::QueryArity {
                        kind,
                        rel: rel.to_string(),
                        expected: arity,
                        found: q.answer_arity(),
                    });
                }
            }
        }
        if output_query.answer_arity() != schema.output_arity {
            return Err(TransducerError::QueryArity {
                kind: "output",
                rel: OUT.to_string(),
                expected: schema.output_arity,
                found: output_query.answer_arity(),
            });
        }

        let fill = |map: BTreeMap<Symbol, QueryProgram>, s: &DatabaseSchema| {
            let mut map = map;
            for (rel, arity) in s.iter() {
                map.entry(rel.clone())
                    .or_insert_with(|| QueryProgram::empty(ANSWER, arity));
            }
            map
        };
        let send_queries = fill(send_queries, &schema.message);
        let insert_queries = fill(insert_queries, &schema.memory);
        let delete_queries = fill(delete_queries, &schema.memory);

        let all_queries = || {
            send_queries
                .values()
                .chain(insert_queries.values())
                .chain(delete_queries.values())
                .chain(std::iter::once(&output_query))
        };
        for q in all_queries() {
            for p in q.extensional_preds() {
                if !schema.full_schema.contains(p) {
                    return Err(TransducerError::UnknownPredicate(p.to_string()));
                }
            }
            for p in q.intensional.iter().filter(|p| *p != q.answer()) {
                if schema.full_schema.contains(p) {
                    return Err(TransducerError::HelperClash(p.to_string()));
                }
            }
        }

        let uses_id = all_queries().any(|q| q.mentions(ID));
        let uses_all = all_queries().any(|q| q.mentions(ALL));
        let flags = Flags {
            oblivious: !uses_id && !uses_all,
            uses_id,
            uses_all,
            inflationary: delete_queries.values().all(|q| q.is_empty()),
        };
        Ok(TransducerProgram {
            schema,
            send_queries,
            insert_queries,
            delete_queries,
            output_query,
            flags,
            dialect,
        })
    }

    pub fn schema(&self) -> &TransducerSchema {
        &self.schema
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }

    pub fn send_query(&self, rel: &str) -> Option<&QueryProgram> {
        self.send_queries.get(rel)
    }

    pub fn output_query(&self) -> &QueryProgram {
        &self.output_query
    }
}

/// An instance over Σ_in ∪ Σ_sys ∪ Σ_mem with `Id` a singleton and `All`
/// containing it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LocalState {
    inst: Instance,
}

impl LocalState {
    /// Start-of-run state: given inputs, empty memory, `Id`/`All` populated.
    pub fn initial(
        schema: &TransducerSchema,
        id: &DataElement,
        all: &BTreeSet<DataElement>,
        input: &Instance,
    ) -> Result<LocalState, TransducerError> {
        if !all.contains(id) {
            return Err(TransducerError::BadAll);
        }
        let mut inst = Instance::new(schema.state_schema());
        inst.insert(Fact::from_parts(sym(ID), vec![id.clone()]))?;
        for n in all {
            inst.insert(Fact::from_parts(sym(ALL), vec![n.clone()]))?;
        }
        for f in input.facts() {
            if schema.input.arity(&f.relation) != Some(f.args.len()) {
                return Err(SchemaError::UnknownRelation(f.relation.to_string()).into());
            }
            inst.insert(f)?;
        }
        Ok(LocalState { inst })
    }

    /// Wrap an arbitrary state instance, checking the Id/All invariants.
    pub fn from_instance(inst: Instance) -> Result<LocalState, TransducerError> {
        if inst.relation(ID).len() != 1 {
            return Err(TransducerError::BadId);
        }
        let id = inst.relation(ID).iter().next().expect("singleton")[0].clone();
        if !inst.relation(ALL).contains(&vec![id]) {
            return Err(TransducerError::BadAll);
        }
        Ok(LocalState { inst })
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn id(&self) -> DataElement {
        self.inst.relation(ID).iter().next().expect("singleton")[0].clone()
    }
}

/// One deterministic local transition.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LocalTransition {
    pub before: LocalState,
    pub received: Instance,
    pub sent: Instance,
    pub output: Tuples,
    pub after: LocalState,
}

/// The conflict-resolving update: conflicting inserts and deletes leave the
/// old relation's verdict in place.
pub fn memory_update(old: &Tuples, ins: &Tuples, del: &Tuples) -> Tuples {
    let mut out: Tuples = ins.difference(del).cloned().collect();
    for t in ins.intersection(del) {
        if old.contains(t) {
            out.insert(t.clone());
        }
    }
    for t in old {
        if !ins.contains(t) && !del.contains(t) {
            out.insert(t.clone());
        }
    }
    out
}

/// The combined instance I′ = state ∪ received that queries run on.
pub(crate) fn combined_instance(
    schema: &TransducerSchema,
    state: &LocalState,
    received: &Instance,
) -> Result<Instance, TransducerError> {
    let mut iprime = Instance::new(schema.full_schema.clone());
    for f in state.inst.facts() {
        iprime.insert(f)?;
    }
    for f in received.facts() {
        if schema.message.arity(&f.relation) != Some(f.args.len()) {
            return Err(TransducerError::BadMessage(f.to_string()));
        }
        iprime.insert(f)?;
    }
    Ok(iprime)
}

pub fn step(
    program: &TransducerProgram,
    state: &LocalState,
    received: &Instance,
) -> Result<LocalTransition, TransducerError> {
    let schema = &program.schema;
    let iprime = combined_instance(schema, state, received)?;

    let mut sent = schema.empty_messages();
    for (rel, q) in &program.send_queries {
        sent.set_relation(rel.clone(), eval_tuples(q, &iprime)?)?;
    }
    let output = eval_tuples(&program.output_query, &iprime)?;

    let mut after = state.inst.clone();
    for (rel, q) in &program.insert_queries {
        let ins = eval_tuples(q, &iprime)?;
        let del = eval_tuples(&program.delete_queries[rel], &iprime)?;
        after.set_relation(rel.clone(), memory_update(state.inst.relation(rel), &ins, &del))?;
    }

    Ok(LocalTransition {
        before: state.clone(),
        received: received.clone(),
        sent,
        output,
        after: LocalState { inst: after },
    })
}

/// Check that a program built with the assignment pattern (Q as the insert
/// query, `R(x..) :- R(x..)` as the delete query) ends each step with
/// after(R) = Q(I′), over the supplied test cases.
pub fn assign_emulation_check(
    program: &TransducerProgram,
    rel: &str,
    assigned: &QueryProgram,
    cases: &[(LocalState, Instance)],
) -> Result<bool, TransducerError> {
    for (state, received) in cases {
        let iprime = combined_instance(&program.schema, state, received)?;
        let expected = eval_tuples(assigned, &iprime)?;
        let tr = step(program, state, received)?;
        if tr.after.instance().relation(rel) != &expected {
            return Ok(false);
        }
    }
    Ok(true)
}

fn dialect_name(d: Dialect) -> &'static str {
    match d {
        Dialect::NonrecursiveNegation => "nonrecursive_negation",
        Dialect::PositiveRecursive => "positive_recursive",
        Dialect::UcqNegation => "ucq_negation",
    }
}

fn dialect_from_name(s: &str) -> Option<Dialect> {
    match s {
        "nonrecursive_negation" => Some(Dialect::NonrecursiveNegation),
        "positive_recursive" => Some(Dialect::PositiveRecursive),
        "ucq_negation" => Some(Dialect::UcqNegation),
        _ => None,
    }
}

impl fmt::Display for TransducerProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "schema {{")?;
        let mut part = |key: &str, s: &DatabaseSchema| -> fmt::Result {
            if s.is_empty() {
                return Ok(());
            }
            write!(f, " {key}:")?;
            for (i, (name, arity)) in s.iter().enumerate() {
                write!(f, "{}{name}/{arity}", if i == 0 { " " } else { ", " })?;
            }
            write!(f, ";")
        };
        part("in", &self.schema.input)?;
        part("msg", &self.schema.message)?;
        part("mem", &self.schema.memory)?;
        writeln!(
            f,
            " out: {}; dialect: {} }}",
            self.schema.output_arity,
            dialect_name(self.dialect)
        )?;

        let program_dialect = self.dialect;
        let mut block = |label: String, target: &str, q: &QueryProgram| -> fmt::Result {
            if q.is_empty() {
                return Ok(());
            }
            if q.dialect() != program_dialect {
                writeln!(f, "{label} : {} {{", dialect_name(q.dialect()))?;
            } else {
                writeln!(f, "{label} {{")?;
            }
            for r in q.rules() {
                let mut r = r.clone();
                if r.head.pred == *q.answer() {
                    r.head.pred = sym(target);
                }
                writeln!(f, "  {r}")?;
            }
            writeln!(f, "}}")
        };
        for (rel, q) in &self.send_queries {
            block(format!("send {rel}"), rel, q)?;
        }
        for (rel, q) in &self.insert_queries {
            block(format!("insert {rel}"), rel, q)?;
        }
        for (rel, q) in &self.delete_queries {
            block(format!("delete {rel}"), rel, q)?;
        }
        block("output".to_string(), OUT, &self.output_query)?;
        Ok(())
    }
}

/// Parse the transducer DSL.
pub fn parse_transducer(text: &str) -> Result<TransducerProgram, TransducerError> {
    let mut cur = Cursor::new(tokenize(text)?);
    if !cur.eat_kw("schema") {
        return Err(cur.error("expected `schema` block").into());
    }
    cur.expect(&Token::LBrace).map_err(TransducerError::from)?;
    let mut input = DatabaseSchema::new();
    let mut message = DatabaseSchema::new();
    let mut memory = DatabaseSchema::new();
    let mut output_arity: Option<usize> = None;
    let mut dialect = Dialect::NonrecursiveNegation;
    while !cur.eat(&Token::RBrace) {
        let key = cur.expect_ident()?;
        cur.expect(&Token::Colon).map_err(TransducerError::from)?;
        match key.as_str() {
            "in" | "msg" | "mem" => {
                let target = match key.as_str() {
                    "in" => &mut input,
                    "msg" => &mut message,
                    _ => &mut memory,
                };
                loop {
                    let name = cur.expect_ident()?;
                    cur.expect(&Token::Slash).map_err(TransducerError::from)?;
                    let arity = cur.expect_nat()? as usize;
                    target
                        .declare(sym(&name), arity)
                        .map_err(|e| ParseError::new(cur.here().0, cur.here().1, e.to_string()))?;
                    if !cur.eat(&Token::Comma) {
                        break;
                    }
                }
            }
            "out" => output_arity = Some(cur.expect_nat()? as usize),
            "dialect" => {
                let name = cur.expect_ident()?;
                dialect = dialect_from_name(&name)
                    .ok_or_else(|| cur.error(format!("unknown dialect `{name}`")))?;
            }
            other => return Err(cur.error(format!("unknown schema key `{other}`")).into()),
        }
        cur.eat(&Token::Semi);
    }
    let output_arity =
        output_arity.ok_or_else(|| cur.error("schema block must declare `out:`"))?;
    let schema = TransducerSchema::new(input, message, memory, output_arity)?;

    let mut sends: BTreeMap<Symbol, QueryProgram> = BTreeMap::new();
    let mut inserts: BTreeMap<Symbol, QueryProgram> = BTreeMap::new();
    let mut deletes: BTreeMap<Symbol, QueryProgram> = BTreeMap::new();
    let mut output: Option<QueryProgram> = None;
    while !cur.at_end() {
        let kw = cur.expect_ident()?;
        let (kind, target, arity) = match kw.as_str() {
            "send" | "insert" | "delete" => {
                let rel = cur.expect_ident()?;
                let s = if kw == "send" {
                    schema.message()
                } else {
                    schema.memory()
                };
                let arity = s.arity(&rel).ok_or(TransducerError::UnknownTarget {
                    kind: match kw.as_str() {
                        "send" => "send",
                        "insert" => "insert",
                        _ => "delete",
                    },
                    rel: rel.clone(),
                })?;
                (kw, rel, arity)
            }
            "output" => ("output".to_string(), OUT.to_string(), schema.output_arity()),
            other => return Err(cur.error(format!("expected a rule block, found `{other}`")).into()),
        };
        // A block may override the program dialect: `insert T : positive_recursive { ... }`.
        let block_dialect = if cur.eat(&Token::Colon) {
            let name = cur.expect_ident()?;
            dialect_from_name(&name)
                .ok_or_else(|| cur.error(format!("unknown dialect `{name}`")))?
        } else {
            dialect
        };
        cur.expect(&Token::LBrace).map_err(TransducerError::from)?;
        let mut rules = parse_rule_list(&mut cur)?;
        cur.expect(&Token::RBrace).map_err(TransducerError::from)?;
        // The block target in head position names the block's answer.
        for r in &mut rules {
            if &*r.head.pred == target.as_str() {
                r.head.pred = sym(ANSWER);
            }
        }
        let q = QueryProgram::new(rules, block_dialect, ANSWER, arity)?;
        let slot = match kind.as_str() {
            "send" => sends.insert(sym(&target), q),
            "insert" => inserts.insert(sym(&target), q),
            "delete" => deletes.insert(sym(&target), q),
            _ => output.replace(q).map(|_| QueryProgram::empty(ANSWER, 0)),
        };
        if slot.is_some() {
            return Err(cur.error(format!("duplicate `{kind}` block for `{target}`")).into());
        }
    }
    let output = output.unwrap_or_else(|| QueryProgram::empty(ANSWER, schema.output_arity()));
    TransducerProgram::new(schema, sends, inserts, deletes, output, dialect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_instance;

    fn tup(elems: &[&str]) -> Vec<DataElement> {
        elems.iter().map(|e| DataElement::new(e)).collect()
    }

    fn tuples(ts: &[&[&str]]) -> Tuples {
        ts.iter().map(|t| tup(t)).collect()
    }

    const ECHO: &str = "
        schema { in: S/2; msg: M/2; mem: T/2; out: 2 }
        send M { M(x,y) :- S(x,y), not T(x,y). }
        insert T { T(x,y) :- M(x,y). }
        output { out(x,x) :- S(x,x). }
    ";

    fn state_of(program: &TransducerProgram, input: &str) -> LocalState {
        let input = parse_instance(input).unwrap();
        let id = DataElement::new("n1");
        let all = [id.clone(), DataElement::new("n2")].into_iter().collect();
        LocalState::initial(program.schema(), &id, &all, &input).unwrap()
    }

    #[test]
    fn memory_update_spec_cases() {
        let (a, b, c, z) = (
            tuples(&[&["a"]]),
            tuples(&[&["b"]]),
            tuples(&[&["c"]]),
            tuples(&[&["z"]]),
        );
        let ab = tuples(&[&["a"], &["b"]]);
        let bc = tuples(&[&["b"], &["c"]]);
        let abc = tuples(&[&["a"], &["b"], &["c"]]);
        assert_eq!(memory_update(&a, &b, &a), b);
        assert_eq!(memory_update(&ab, &bc, &b), abc);
        assert_eq!(memory_update(&Tuples::new(), &Tuples::new(), &z), Tuples::new());
        let _ = c;
    }

    #[test]
    fn memory_update_matches_truth_table_oracle() {
        // Per-tuple semantics over all 8 membership combinations: present
        // afterwards iff inserted-not-deleted, or old when insert and delete
        // agree (both or neither fire).
        let t = tup(&["t"]);
        for mask in 0..8u8 {
            let (in_old, in_ins, in_del) = (mask & 1 != 0, mask & 2 != 0, mask & 4 != 0);
            let mk = |b: bool| -> Tuples {
                if b {
                    [t.clone()].into_iter().collect()
                } else {
                    Tuples::new()
                }
            };
            let expect = (in_ins && !in_del) || (in_old && in_ins == in_del);
            let got = memory_update(&mk(in_old), &mk(in_ins), &mk(in_del)).contains(&t);
            assert_eq!(got, expect, "old={in_old} ins={in_ins} del={in_del}");
        }
    }

    #[test]
    fn parses_and_round_trips() {
        let p = parse_transducer(ECHO).unwrap();
        let text = p.to_string();
        let p2 = parse_transducer(&text).unwrap();
        assert_eq!(p, p2, "pretty-printed program re-parses identically");
        assert!(p.flags().oblivious);
        assert!(p.flags().inflationary);
    }

    #[test]
    fn step_sends_inserts_and_outputs() {
        let p = parse_transducer(ECHO).unwrap();
        let s = state_of(&p, "S(a,a). S(a,b).");
        let tr = step(&p, &s, &p.schema().empty_messages()).unwrap();
        assert_eq!(tr.sent.relation("M"), &tuples(&[&["a", "a"], &["a", "b"]]));
        assert_eq!(tr.output, tuples(&[&["a", "a"]]));
        assert!(tr.after.instance().relation("T").is_empty());

        // Deliver M(a,b): T gains it, and the send query now skips it.
        let mut rcv = p.schema().empty_messages();
        rcv.insert(Fact::new("M", &["a", "b"])).unwrap();
        let tr2 = step(&p, &tr.after, &rcv).unwrap();
        assert_eq!(tr2.after.instance().relation("T"), &tuples(&[&["a", "b"]]));
        let tr3 = step(&p, &tr2.after, &p.schema().empty_messages()).unwrap();
        assert_eq!(tr3.sent.relation("M"), &tuples(&[&["a", "a"]]));
    }

    #[test]
    fn conflicting_insert_delete_keeps_old_verdict() {
        // T both inserted and deleted each step; presence persists, absence
        // persists.
        let src = "
            schema { in: S/1; msg: M/1; mem: T/1; out: 1 }
            insert T { T(x) :- S(x). }
            delete T { T(x) :- S(x). }
        ";
        let p = parse_transducer(&src).unwrap();
        let rcv = p.schema().empty_messages();
        let absent = state_of(&p, "S(t).");
        let tr = step(&p, &absent, &rcv).unwrap();
        assert!(!tr.after.instance().contains(&Fact::new("T", &["t"])));

        let mut with_t = absent.instance().clone();
        with_t.insert(Fact::new("T", &["t"])).unwrap();
        let present = LocalState::from_instance(with_t).unwrap();
        let tr = step(&p, &present, &rcv).unwrap();
        assert!(tr.after.instance().contains(&Fact::new("T", &["t"])));
    }

    #[test]
    fn frame_untouched_memory_persists() {
        let src = "
            schema { in: S/1; msg: M/1; mem: T/1; out: 1 }
        ";
        let p = parse_transducer(&src).unwrap();
        let mut inst = state_of(&p, "S(a).").instance().clone();
        inst.insert(Fact::new("T", &["t"])).unwrap();
        let s = LocalState::from_instance(inst).unwrap();
        let tr = step(&p, &s, &p.schema().empty_messages()).unwrap();
        assert!(tr.after.instance().contains(&Fact::new("T", &["t"])));
        assert_eq!(
            tr.after.instance().restrict(p.schema().input()),
            tr.before.instance().restrict(p.schema().input())
        );
    }

    #[test]
    fn step_is_deterministic() {
        let p = parse_transducer(ECHO).unwrap();
        let s = state_of(&p, "S(a,b). S(b,c). S(c,c).");
        let rcv = p.schema().empty_messages();
        assert_eq!(step(&p, &s, &rcv).unwrap(), step(&p, &s, &rcv).unwrap());
    }

    #[test]
    fn oblivious_step_ignores_id_and_all() {
        let p = parse_transducer(ECHO).unwrap();
        let input = parse_instance("S(a,a). S(a,b).").unwrap();
        let rcv = p.schema().empty_messages();
        let mk = |id: &str, all: &[&str]| {
            let id = DataElement::new(id);
            let all = all.iter().map(|n| DataElement::new(n)).collect();
            LocalState::initial(p.schema(), &id, &all, &input).unwrap()
        };
        let t1 = step(&p, &mk("n1", &["n1", "n2"]), &rcv).unwrap();
        let t2 = step(&p, &mk("x", &["x", "y", "z"]), &rcv).unwrap();
        assert_eq!(t1.sent, t2.sent);
        assert_eq!(t1.output, t2.output);
        assert_eq!(
            t1.after.instance().restrict(p.schema().memory()),
            t2.after.instance().restrict(p.schema().memory())
        );
    }

    #[test]
    fn id_and_all_flags() {
        let src = "
            schema { in: S/1; msg: M/1; mem: T/1; out: 1 }
            send M { M(x) :- Id(x). }
            output { out(x) :- All(x), not T(x). }
        ";
        let p = parse_transducer(&src).unwrap();
        let f = p.flags();
        assert!(f.uses_id && f.uses_all && !f.oblivious && f.inflationary);
    }

    #[test]
    fn assignment_pattern_emulates_assignment() {
        // R := Q via insert Q, delete R.
        let src = "
            schema { in: S/1; msg: M/1; mem: R/1; out: 1 }
            insert R { R(x) :- S(x), not M(x). }
            delete R { R(x) :- R(x). }
        ";
        let p = parse_transducer(&src).unwrap();
        let assigned = QueryProgram::new(
            crate::parse::parse_rules("A(x) :- S(x), not M(x).").unwrap(),
            Dialect::NonrecursiveNegation,
            "A",
            1,
        )
        .unwrap();
        let mut cases = Vec::new();
        for s_text in ["", "S(a).", "S(a). S(b). R(b).", "R(z). S(z)."] {
            let mut inst = state_of(&p, "").instance().clone();
            for f in parse_instance(s_text).unwrap().facts() {
                inst.insert(f).unwrap();
            }
            let st = LocalState::from_instance(inst).unwrap();
            cases.push((st.clone(), p.schema().empty_messages()));
            let mut rcv = p.schema().empty_messages();
            rcv.insert(Fact::new("M", &["a"])).unwrap();
            cases.push((st, rcv));
        }
        assert!(assign_emulation_check(&p, "R", &assigned, &cases).unwrap());

        // Constant-empty Q wipes R regardless of the old contents.
        let src2 = "
            schema { in: S/1; msg: M/1; mem: R/1; out: 1 }
            delete R { R(x) :- R(x). }
        ";
        let p2 = parse_transducer(&src2).unwrap();
        let mut inst = state_of(&p2, "S(a).").instance().clone();
        inst.insert(Fact::new("R", &["a"])).unwrap();
        let st = LocalState::from_instance(inst).unwrap();
        let tr = step(&p2, &st, &p2.schema().empty_messages()).unwrap();
        assert!(tr.after.instance().relation("R").is_empty());
    }

    #[test]
    fn schema_validation_errors() {
        assert!(matches!(
            parse_transducer("schema { in: S/1; msg: S/1; out: 0 }"),
            Err(TransducerError::SchemaOverlap(_))
        ));
        assert!(matches!(
            parse_transducer("schema { in: Id/1; out: 0 }"),
            Err(TransducerError::Schema(SchemaError::ReservedName(_)))
        ));
        assert!(matches!(
            parse_transducer("schema { in: S/1; out: 0 } send M { M(x) :- S(x). }"),
            Err(TransducerError::UnknownTarget { .. })
        ));
        // Helper predicate colliding with a schema relation.
        let src = "
            schema { in: S/1; mem: T/1; out: 1 }
            output { out(x) :- Aux(x). Aux(x) :- S(x), T(x). }
        ";
        assert!(parse_transducer(src).is_ok());
        let bad = "
            schema { in: S/1; mem: T/1; msg: M/1; out: 1 }
            output { out(x) :- M(x). M(x) :- S(x), T(x). }
        ";
        assert!(matches!(
            parse_transducer(bad),
            Err(TransducerError::HelperClash(_))
        ));
    }

    #[test]
    fn local_state_invariants() {
        let p = parse_transducer(ECHO).unwrap();
        let inst = Instance::new(p.schema().state_schema());
        assert!(matches!(
            LocalState::from_instance(inst.clone()),
            Err(TransducerError::BadId)
        ));
        let mut inst2 = inst;
        inst2.insert(Fact::new("Id", &["n1"])).unwrap();
        inst2.insert(Fact::new("All", &["n2"])).unwrap();
        assert!(matches!(
            LocalState::from_instance(inst2),
            Err(TransducerError::BadAll)
        ));
    }
}
