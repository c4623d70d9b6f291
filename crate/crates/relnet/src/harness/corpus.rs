//! Reference programs with known behaviour, used by the checkers' tests
//! and by the command-line demos. Where an entry computes a query, an
//! independently implemented oracle for that query ships with it.

use crate::data::{Instance, Symbol, Tuples};
use crate::eval::eval_tuples;
use crate::harness::HarnessError;
use crate::query::{Atom, Dialect, QueryProgram, Rule, Term, ADOM, ANSWER, NEQ};
use crate::transducer::{parse_transducer, TransducerProgram, TransducerSchema};
use crate::data::DatabaseSchema;
use crate::data::sym;
use std::collections::BTreeMap;
use std::sync::Arc;

pub type Oracle = Arc<dyn Fn(&Instance) -> Tuples + Send + Sync>;

#[derive(Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub source: String,
    pub program: TransducerProgram,
    /// Present when the entry computes a query on its input.
    pub oracle: Option<Oracle>,
}

/// σ_{$1=$2}(S): the diagonal pairs of the input.
pub const EQ_SELECT: &str = "
schema { in: S/2; msg: M/2; mem: T/2, Sent/2; out: 2 }
send M { M(x,y) :- S(x,y), not Sent(x,y). }
insert Sent { Sent(x,y) :- S(x,y). }
insert T { T(x,y) :- M(x,y). }
output {
  out(x,x) :- S(x,x).
  out(x,x) :- T(x,x).
}
";

/// Transitive closure of S by flooding edges and closing locally.
pub const TC_FLOOD: &str = "
schema { in: S/2; msg: M/2; mem: R/2, T/2, Sent/2, Fwd/2; out: 2 }
send M {
  M(x,y) :- S(x,y), not Sent(x,y).
  M(x,y) :- M(x,y), not Fwd(x,y).
}
insert Sent { Sent(x,y) :- S(x,y). }
insert Fwd { Fwd(x,y) :- M(x,y). }
insert R { R(x,y) :- M(x,y). }
insert T {
  T(x,y) :- S(x,y).
  T(x,y) :- R(x,y).
  T(x,y) :- T(x,z), T(z,y).
}
output { out(x,y) :- T(x,y). }
";

/// Emits whichever element a node happens to receive first; inherently
/// schedule-dependent, hence inconsistent.
pub const FIRST_ELEMENT: &str = "
schema { in: S/1; msg: M/1; mem: Done/0, Sent/1; out: 1 }
send M { M(x) :- S(x), not Sent(x). }
insert Sent { Sent(x) :- S(x). }
insert Done { Done() :- M(x). }
output { out(x) :- M(x), not Done(). }
";

/// Outputs exactly the elements received from neighbours: the identity on
/// every connected network with at least two nodes, but empty on one node.
pub const FWD_IDENTITY: &str = "
schema { in: S/1; msg: M/1; mem: Sent/1, Rcvd/1; out: 1 }
send M { M(x) :- S(x), not Sent(x). }
insert Sent { Sent(x) :- S(x). }
insert Rcvd { Rcvd(x) :- M(x). }
output { out(x) :- Rcvd(x). }
";

/// Decides S = ∅ using Id and All: every node announces whether its share
/// is empty, announcements are flooded, and a node outputs the empty tuple
/// once every node is known empty.
pub const EMPTINESS: &str = "
schema { in: S/1; msg: E/1, N/1;
         mem: KnownEmpty/1, KnownNonempty/0, Announced/0, FwdE/1, FwdN/1; out: 0 }
send E {
  E(v) :- Id(v), not HasS(), not Announced().
  E(v) :- E(v), not FwdE(v).
  HasS() :- S(x).
}
send N {
  N(v) :- Id(v), HasS(), not Announced().
  N(v) :- N(v), not FwdN(v).
  HasS() :- S(x).
}
insert Announced { Announced() :- Id(v). }
insert FwdE { FwdE(v) :- E(v). }
insert FwdN { FwdN(v) :- N(v). }
insert KnownEmpty {
  KnownEmpty(v) :- E(v).
  KnownEmpty(v) :- Id(v), not HasS().
  HasS() :- S(x).
}
insert KnownNonempty {
  KnownNonempty() :- N(v).
  KnownNonempty() :- S(x).
}
output {
  out() :- not Missing(), not KnownNonempty().
  out() :- Single(), not HasS().
  Missing() :- All(v), not KnownEmpty(v).
  Single() :- not Multi().
  Multi() :- All(v), not Id(v).
  HasS() :- S(x).
}
";

/// Decides A ≠ ∅ ∨ B ≠ ∅. A node holding elements of only one relation
/// answers alone; one holding both coordinates with the rest of the
/// network first.
pub const A_OR_B: &str = "
schema { in: A/1, B/1; msg: T/0; mem: Rcv/0, Announced/0; out: 0 }
send T {
  T() :- Multi(), HasA(), HasB(), not Announced().
  Multi() :- All(v), not Id(v).
  HasA() :- A(x).
  HasB() :- B(x).
}
insert Announced { Announced() :- Id(v). }
insert Rcv { Rcv() :- T(). }
output {
  out() :- Single(), HasA().
  out() :- Single(), HasB().
  out() :- Multi(), MissingLocal(), HasA().
  out() :- Multi(), MissingLocal(), HasB().
  out() :- Rcv().
  out() :- T().
  Single() :- not Multi().
  Multi() :- All(v), not Id(v).
  MissingLocal() :- not HasA().
  MissingLocal() :- not HasB().
  HasA() :- A(x).
  HasB() :- B(x).
}
";

/// The identity query computed with a round of pings: uses All (to see
/// whether the network has company) but never Id.
pub const IDENTITY_PING: &str = "
schema { in: S/1; msg: P/0; mem: Pinged/0, Announced/0; out: 1 }
send P {
  P() :- Multi(), not Announced().
  Multi() :- All(x), All(y), Neq(x,y).
}
insert Announced { Announced() :- All(x). }
insert Pinged { Pinged() :- P(). }
output {
  out(x) :- S(x), Single().
  out(x) :- S(x), Pinged().
  out(x) :- S(x), P().
  Single() :- not Multi().
  Multi() :- All(x), All(y), Neq(x,y).
}
";

/// Flooding with acknowledgements. No output; the protocol drives every
/// node to a `Ready` flag that certifies its `Store` holds the entire
/// distributed input.
pub const FLOOD_ACKED: &str = "
schema { in: S/1; msg: F/1, A/2, D/1;
         mem: Store/1, Sent/1, FwdF/1, AckSent/1, FwdA/2, AckFrom/2,
              DSent/0, FwdD/1, DoneFrom/1, Ready/0; out: 0 }
send F {
  F(x) :- S(x), not Sent(x).
  F(x) :- F(x), not FwdF(x).
}
insert Sent { Sent(x) :- S(x). }
insert FwdF { FwdF(x) :- F(x). }
insert Store {
  Store(x) :- S(x).
  Store(x) :- F(x).
}
send A {
  A(x,v) :- F(x), Id(v), not AckSent(x).
  A(x,u) :- A(x,u), not FwdA(x,u).
}
insert AckSent { AckSent(x) :- F(x). }
insert FwdA { FwdA(x,u) :- A(x,u). }
insert AckFrom {
  AckFrom(x,u) :- A(x,u).
  AckFrom(x,u) :- S(x), Id(u).
}
send D {
  D(v) :- Id(v), not SomeMissing(), not DSent().
  D(w) :- D(w), not FwdD(w).
  SomeMissing() :- All(u), MissingAck(u).
  MissingAck(u) :- S(x), All(u), not AckFrom(x,u).
}
insert DSent {
  DSent() :- not SomeMissing().
  SomeMissing() :- All(u), MissingAck(u).
  MissingAck(u) :- S(x), All(u), not AckFrom(x,u).
}
insert FwdD { FwdD(w) :- D(w). }
insert DoneFrom {
  DoneFrom(w) :- D(w).
  DoneFrom(w) :- Id(w), not SomeMissing().
  SomeMissing() :- All(u), MissingAck(u).
  MissingAck(u) :- S(x), All(u), not AckFrom(x,u).
}
insert Ready {
  Ready() :- not MissingDone().
  MissingDone() :- All(w), not DoneFrom(w).
}
";

/// Oblivious flooding computing the identity query.
pub const FLOOD_PLAIN: &str = "
schema { in: S/1; msg: M/1; mem: Store/1, Sent/1, Fwd/1; out: 1 }
send M {
  M(x) :- S(x), not Sent(x).
  M(x) :- M(x), not Fwd(x).
}
insert Sent { Sent(x) :- S(x). }
insert Fwd { Fwd(x) :- M(x). }
insert Store {
  Store(x) :- S(x).
  Store(x) :- M(x).
}
output {
  out(x) :- Store(x).
  out(x) :- S(x).
  out(x) :- M(x).
}
";

fn vars(prefix: &str, n: usize) -> Vec<Term> {
    (0..n).map(|i| Term::var(&format!("{prefix}{i}"))).collect()
}

fn rule(head: Atom, pos: Vec<Atom>, neg: Vec<Atom>) -> Rule {
    Rule { head, pos, neg }
}

/// Compile a positive Datalog query into a transducer that computes it on
/// any network: extensional relations are flooded into `St_*` copies, and
/// the query's own rules run one immediate-consequence round per
/// transition over memory relations named after the intensional
/// predicates.
pub fn build_datalog_runner(query: &QueryProgram) -> Result<TransducerProgram, HarnessError> {
    for r in query.rules() {
        if !r.neg.is_empty() {
            return Err(HarnessError::Precondition(
                "the runner supports positive programs only".into(),
            ));
        }
        if r.pos.iter().any(|a| &*a.pred == ADOM || &*a.pred == NEQ) {
            return Err(HarnessError::Precondition(
                "the runner does not support built-in predicates".into(),
            ));
        }
    }

    // Arity map over every predicate mentioned.
    let mut arities: BTreeMap<Symbol, usize> = BTreeMap::new();
    arities.insert(query.answer().clone(), query.answer_arity());
    for r in query.rules() {
        for a in std::iter::once(&r.head).chain(&r.pos) {
            arities.insert(a.pred.clone(), a.args.len());
        }
    }
    let edb: Vec<Symbol> = query.extensional_preds().cloned().collect();
    let mut idb: Vec<Symbol> = vec![query.answer().clone()];
    for r in query.rules() {
        if !idb.contains(&r.head.pred) {
            idb.push(r.head.pred.clone());
        }
    }

    let mut input = DatabaseSchema::new();
    let mut message = DatabaseSchema::new();
    let mut memory = DatabaseSchema::new();
    for e in &edb {
        let ar = arities[e];
        input.declare(e.clone(), ar)?;
        message.declare(sym(&format!("Msg_{e}")), ar)?;
        memory.declare(sym(&format!("St_{e}")), ar)?;
        memory.declare(sym(&format!("Snt_{e}")), ar)?;
        memory.declare(sym(&format!("Fwd_{e}")), ar)?;
    }
    for p in &idb {
        memory.declare(p.clone(), arities[p])?;
    }
    let schema = TransducerSchema::new(input, message, memory, query.answer_arity())?;

    let mut sends = BTreeMap::new();
    let mut inserts = BTreeMap::new();
    for e in &edb {
        let ar = arities[e];
        let xs = vars("x", ar);
        let msg = format!("Msg_{e}");
        let send = QueryProgram::new(
            vec![
                rule(
                    Atom::new(ANSWER, xs.clone()),
                    vec![Atom::new(e.as_ref(), xs.clone())],
                    vec![Atom::new(&format!("Snt_{e}"), xs.clone())],
                ),
                rule(
                    Atom::new(ANSWER, xs.clone()),
                    vec![Atom::new(&msg, xs.clone())],
                    vec![Atom::new(&format!("Fwd_{e}"), xs.clone())],
                ),
            ],
            Dialect::NonrecursiveNegation,
            ANSWER,
            ar,
        )?;
        sends.insert(sym(&msg), send);
        let once = |body: &str| -> Result<QueryProgram, HarnessError> {
            Ok(QueryProgram::new(
                vec![rule(
                    Atom::new(ANSWER, xs.clone()),
                    vec![Atom::new(body, xs.clone())],
                    vec![],
                )],
                Dialect::NonrecursiveNegation,
                ANSWER,
                ar,
            )?)
        };
        inserts.insert(sym(&format!("Snt_{e}")), once(e.as_ref())?);
        inserts.insert(sym(&format!("Fwd_{e}")), once(&msg)?);
        let store = QueryProgram::new(
            vec![
                rule(Atom::new(ANSWER, xs.clone()), vec![Atom::new(e.as_ref(), xs.clone())], vec![]),
                rule(Atom::new(ANSWER, xs.clone()), vec![Atom::new(&msg, xs.clone())], vec![]),
            ],
            Dialect::NonrecursiveNegation,
            ANSWER,
            ar,
        )?;
        inserts.insert(sym(&format!("St_{e}")), store);
    }
    // One immediate-consequence round per transition: bodies read the old
    // memory copies, so recursion unfolds across heartbeats.
    for p in &idb {
        let rules: Vec<Rule> = query
            .rules()
            .iter()
            .filter(|r| r.head.pred == *p)
            .map(|r| {
                let pos = r
                    .pos
                    .iter()
                    .map(|a| {
                        if edb.contains(&a.pred) {
                            Atom::new(&format!("St_{}", a.pred), a.args.clone())
                        } else {
                            a.clone()
                        }
                    })
                    .collect();
                rule(Atom::new(ANSWER, r.head.args.clone()), pos, vec![])
            })
            .collect();
        if rules.is_empty() {
            continue;
        }
        inserts.insert(
            p.clone(),
            QueryProgram::new(rules, Dialect::NonrecursiveNegation, ANSWER, arities[p])?,
        );
    }
    let ys = vars("y", query.answer_arity());
    let output = QueryProgram::new(
        vec![rule(
            Atom::new(ANSWER, ys.clone()),
            vec![Atom::new(query.answer().as_ref(), ys)],
            vec![],
        )],
        Dialect::NonrecursiveNegation,
        ANSWER,
        query.answer_arity(),
    )?;
    Ok(TransducerProgram::new(
        schema,
        sends,
        inserts,
        BTreeMap::new(),
        output,
        Dialect::NonrecursiveNegation,
    )?)
}

/// Transitive closure by iterated squaring: R ← R ∪ R∘R to fixpoint. This
/// is deliberately a different algorithm from both the rule evaluator and
/// the flooding transducer.
pub fn transitive_closure(edges: &Tuples) -> Tuples {
    let mut r = edges.clone();
    loop {
        let mut next = r.clone();
        for a in &r {
            for b in &r {
                if a[1] == b[0] {
                    next.insert(vec![a[0].clone(), b[1].clone()]);
                }
            }
        }
        if next == r {
            return r;
        }
        r = next;
    }
}

fn tc_query() -> QueryProgram {
    let rules = crate::parse::parse_rules(
        "T(x,y) :- S(x,y).
         T(x,y) :- T(x,z), S(z,y).",
    )
    .expect("fixed rules parse");
    QueryProgram::new(rules, Dialect::PositiveRecursive, "T", 2)
        .expect("fixed query is valid")
}

pub fn corpus() -> Vec<CorpusEntry> {
    let entry = |name: &'static str,
                 summary: &'static str,
                 source: &str,
                 oracle: Option<Oracle>|
     -> CorpusEntry {
        CorpusEntry {
            name,
            summary,
            source: source.trim_start().to_string(),
            program: parse_transducer(source).expect("corpus entry parses"),
            oracle,
        }
    };

    let runner_query = tc_query();
    let runner = build_datalog_runner(&runner_query).expect("runner builds");
    let runner_oracle: Oracle = Arc::new(move |inst: &Instance| {
        eval_tuples(&runner_query, inst).expect("oracle query evaluates")
    });

    vec![
        entry(
            "eq_select",
            "selection σ_{$1=$2} over S/2; consistent, coordination-free",
            EQ_SELECT,
            Some(Arc::new(|inst: &Instance| {
                inst.relation("S")
                    .iter()
                    .filter(|t| t[0] == t[1])
                    .cloned()
                    .collect()
            })),
        ),
        entry(
            "tc_flood",
            "transitive closure of S/2 by flooding; consistent, monotone",
            TC_FLOOD,
            Some(Arc::new(|inst: &Instance| {
                transitive_closure(inst.relation("S"))
            })),
        ),
        entry(
            "first_element",
            "outputs a first-received element; schedule-dependent, inconsistent",
            FIRST_ELEMENT,
            None,
        ),
        entry(
            "fwd_identity",
            "identity via neighbours only; consistent per network, topology-dependent",
            FWD_IDENTITY,
            None,
        ),
        entry(
            "emptiness",
            "decides S = ∅ with Id and All; consistent but not monotone",
            EMPTINESS,
            Some(Arc::new(|inst: &Instance| {
                if inst.relation("S").is_empty() {
                    std::iter::once(Vec::new()).collect()
                } else {
                    Tuples::new()
                }
            })),
        ),
        entry(
            "a_or_b_nonempty",
            "decides A ≠ ∅ ∨ B ≠ ∅; monotone, coordination witness on split inputs",
            A_OR_B,
            Some(Arc::new(|inst: &Instance| {
                if inst.relation("A").is_empty() && inst.relation("B").is_empty() {
                    Tuples::new()
                } else {
                    std::iter::once(Vec::new()).collect()
                }
            })),
        ),
        entry(
            "identity_ping",
            "identity query gated on a ping round; monotone yet never coordination-free on multi-node networks",
            IDENTITY_PING,
            Some(Arc::new(|inst: &Instance| {
                inst.relation("S").clone()
            })),
        ),
        entry(
            "flood_acked",
            "acknowledged flooding; Ready certifies the local store holds the whole input",
            FLOOD_ACKED,
            None,
        ),
        entry(
            "flood_plain",
            "oblivious flooding computing the identity query",
            FLOOD_PLAIN,
            Some(Arc::new(|inst: &Instance| inst.relation("S").clone())),
        ),
        CorpusEntry {
            name: "datalog_runner",
            summary: "generic distributed evaluator instantiated with transitive closure",
            source: runner.to_string(),
            program: runner,
            oracle: Some(runner_oracle),
        },
    ]
}

pub fn corpus_entry(name: &str) -> Result<CorpusEntry, HarnessError> {
    corpus()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| HarnessError::UnknownEntry(name.to_string()))
}
