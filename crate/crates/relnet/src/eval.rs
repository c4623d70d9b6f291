//! Query evaluation under active-domain semantics.
//!
//! The nonrecursive dialect is evaluated predicate-by-predicate in
//! dependency order, with negation as set difference. The positive
//! recursive dialect is evaluated to its least fixpoint by semi-naive
//! iteration. Evaluation is a pure function of (program, input).

use crate::data::{DataElement, DatabaseSchema, Instance, Symbol, Tuples};
use crate::query::{CAtom, CTerm, CompiledRule, Dialect, QueryProgram};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub(crate) type FactStore = BTreeMap<Symbol, Tuples>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("input schema does not cover extensional predicate `{0}`")]
    SchemaMismatch(String),
}

/// Read-only view over the relations visible to a rule body.
pub(crate) trait Db {
    fn rel(&self, pred: &str) -> Option<&Tuples>;
}

impl Db for FactStore {
    fn rel(&self, pred: &str) -> Option<&Tuples> {
        self.get(pred)
    }
}

/// Derived relations shadow nothing: intensional and extensional predicate
/// sets are disjoint, so lookup order does not matter.
pub(crate) struct Layered<'a> {
    pub derived: &'a FactStore,
    pub base: &'a BTreeMap<Symbol, Tuples>,
}

impl<'a> Db for Layered<'a> {
    fn rel(&self, pred: &str) -> Option<&Tuples> {
        self.derived.get(pred).or_else(|| self.base.get(pred))
    }
}

fn resolve(t: &CTerm, env: &[Option<DataElement>]) -> Option<DataElement> {
    match t {
        CTerm::Const(c) => Some(c.clone()),
        CTerm::Var(i) => env[*i].clone(),
    }
}

/// Evaluate one rule body against `db`, producing head tuples.
/// `delta_at` optionally replaces the relation read by one body atom with a
/// delta relation (for semi-naive iteration).
pub(crate) fn eval_rule(
    rule: &CompiledRule,
    db: &dyn Db,
    adom: &BTreeSet<DataElement>,
    delta_at: Option<(usize, &Tuples)>,
    out: &mut Tuples,
) {
    let mut env: Vec<Option<DataElement>> = vec![None; rule.nvars];
    join(rule, db, adom, delta_at, 0, &mut env, out);
}

fn join(
    rule: &CompiledRule,
    db: &dyn Db,
    adom: &BTreeSet<DataElement>,
    delta_at: Option<(usize, &Tuples)>,
    idx: usize,
    env: &mut Vec<Option<DataElement>>,
    out: &mut Tuples,
) {
    if idx == rule.body.len() {
        for (pred, args) in &rule.neg {
            let tuple: Vec<DataElement> = args
                .iter()
                .map(|t| resolve(t, env).expect("range restriction bounds negated atoms"))
                .collect();
            if db.rel(pred).map(|r| r.contains(&tuple)).unwrap_or(false) {
                return;
            }
        }
        let head: Vec<DataElement> = rule
            .head_args
            .iter()
            .map(|t| resolve(t, env).expect("range restriction bounds head variables"))
            .collect();
        out.insert(head);
        return;
    }
    match &rule.body[idx] {
        CAtom::Rel { pred, args } => {
            static EMPTY: std::sync::OnceLock<Tuples> = std::sync::OnceLock::new();
            let rel = match delta_at {
                Some((i, delta)) if i == idx => delta,
                _ => db
                    .rel(pred)
                    .unwrap_or_else(|| EMPTY.get_or_init(Tuples::new)),
            };
            'tuples: for tuple in rel {
                let mut bound_here: Vec<usize> = Vec::new();
                for (t, e) in args.iter().zip(tuple.iter()) {
                    match t {
                        CTerm::Const(c) => {
                            if c != e {
                                undo(env, &bound_here);
                                continue 'tuples;
                            }
                        }
                        CTerm::Var(i) => match &env[*i] {
                            Some(v) => {
                                if v != e {
                                    undo(env, &bound_here);
                                    continue 'tuples;
                                }
                            }
                            None => {
                                env[*i] = Some(e.clone());
                                bound_here.push(*i);
                            }
                        },
                    }
                }
                join(rule, db, adom, delta_at, idx + 1, env, out);
                undo(env, &bound_here);
            }
        }
        CAtom::Adom(t) => match resolve(t, env) {
            Some(e) => {
                if adom.contains(&e) {
                    join(rule, db, adom, delta_at, idx + 1, env, out);
                }
            }
            None => {
                let CTerm::Var(i) = t else { unreachable!() };
                for e in adom {
                    env[*i] = Some(e.clone());
                    join(rule, db, adom, delta_at, idx + 1, env, out);
                }
                env[*i] = None;
            }
        },
        CAtom::Neq(a, b) => {
            let (Some(x), Some(y)) = (resolve(a, env), resolve(b, env)) else {
                unreachable!("range restriction bounds Neq arguments");
            };
            if x != y {
                join(rule, db, adom, delta_at, idx + 1, env, out);
            }
        }
    }
}

fn undo(env: &mut [Option<DataElement>], bound_here: &[usize]) {
    for &i in bound_here {
        env[i] = None;
    }
}

/// Evaluate `query` on `input`, returning an instance holding exactly the
/// answer relation. Result tuples range over the active domain of `input`
/// (plus any constants written in the rules).
pub fn eval(query: &QueryProgram, input: &Instance) -> Result<Instance, EvalError> {
    for p in query.extensional_preds() {
        if !input.schema().contains(p) {
            return Err(EvalError::SchemaMismatch(p.to_string()));
        }
    }
    let mut adom = input.adom();
    adom.extend(query.constants.iter().cloned());
    let derived = eval_to_store(query, input.rels(), &adom);
    let answer = derived
        .get(query.answer())
        .cloned()
        .unwrap_or_default();
    let mut schema = DatabaseSchema::new();
    schema
        .declare(query.answer().clone(), query.answer_arity())
        .expect("fresh schema");
    let mut out = Instance::new(Arc::new(schema));
    out.set_relation(query.answer().clone(), answer)
        .expect("answer arity enforced at construction");
    Ok(out)
}

/// Evaluate and return just the answer tuples.
pub fn eval_tuples(query: &QueryProgram, input: &Instance) -> Result<Tuples, EvalError> {
    Ok(eval(query, input)?.relation(query.answer()).clone())
}

pub(crate) fn eval_to_store(
    query: &QueryProgram,
    base: &BTreeMap<Symbol, Tuples>,
    adom: &BTreeSet<DataElement>,
) -> FactStore {
    match query.dialect() {
        Dialect::NonrecursiveNegation | Dialect::UcqNegation => {
            let mut derived: FactStore = FactStore::new();
            for pred in &query.topo {
                let mut tuples = Tuples::new();
                for rule in &query.compiled {
                    if rule.head_pred == *pred {
                        let db = Layered {
                            derived: &derived,
                            base,
                        };
                        eval_rule(rule, &db, adom, None, &mut tuples);
                    }
                }
                derived.insert(pred.clone(), tuples);
            }
            derived
        }
        Dialect::PositiveRecursive => seminaive(&query.compiled, base, adom),
    }
}

/// Semi-naive least-fixpoint evaluation of a positive rule set.
pub(crate) fn seminaive(
    rules: &[CompiledRule],
    base: &BTreeMap<Symbol, Tuples>,
    adom: &BTreeSet<DataElement>,
) -> FactStore {
    let intensional: BTreeSet<Symbol> = rules.iter().map(|r| r.head_pred.clone()).collect();
    let mut derived: FactStore = intensional
        .iter()
        .map(|p| (p.clone(), Tuples::new()))
        .collect();

    // First round: full evaluation (derived relations all empty).
    let mut delta: FactStore = FactStore::new();
    for rule in rules {
        let mut tuples = Tuples::new();
        let db = Layered {
            derived: &derived,
            base,
        };
        eval_rule(rule, &db, adom, None, &mut tuples);
        delta
            .entry(rule.head_pred.clone())
            .or_default()
            .extend(tuples);
    }
    for (p, t) in &delta {
        derived.get_mut(p).expect("head pred registered").extend(t.iter().cloned());
    }

    while delta.values().any(|t| !t.is_empty()) {
        let mut next: FactStore = FactStore::new();
        for rule in rules {
            for (i, atom) in rule.body.iter().enumerate() {
                let CAtom::Rel { pred, .. } = atom else {
                    continue;
                };
                if !intensional.contains(pred) {
                    continue;
                }
                let Some(d) = delta.get(pred) else { continue };
                if d.is_empty() {
                    continue;
                }
                let mut tuples = Tuples::new();
                let db = Layered {
                    derived: &derived,
                    base,
                };
                eval_rule(rule, &db, adom, Some((i, d)), &mut tuples);
                next.entry(rule.head_pred.clone()).or_default().extend(tuples);
            }
        }
        let mut fresh: FactStore = FactStore::new();
        for (p, t) in next {
            let have = derived.get_mut(&p).expect("head pred registered");
            let new: Tuples = t.into_iter().filter(|tu| !have.contains(tu)).collect();
            have.extend(new.iter().cloned());
            fresh.insert(p, new);
        }
        delta = fresh;
    }
    derived
}
