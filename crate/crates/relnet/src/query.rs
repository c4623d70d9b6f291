//! Rule-based queries: nonrecursive Datalog with negation, positive
//! recursive Datalog, and unions of conjunctive queries with negation as a
//! syntactic fragment.
//!
//! Evaluation is under active-domain semantics. Safety is enforced
//! syntactically through range restriction: every head variable and every
//! variable of a negated atom must occur in a positive, binding body atom.
//! Two built-in predicates are available in rule bodies: `Adom/1`, which
//! holds every element of the active domain, and `Neq/2`, which holds every
//! pair of distinct elements. `Neq` does not bind variables.

use crate::data::{sym, DataElement, Symbol};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub const ADOM: &str = "Adom";
pub const NEQ: &str = "Neq";

/// Internal name of the answer predicate of a compiled query block. The
/// surface syntax never mentions it; parsers rewrite the block's target
/// relation name in head position to this.
pub const ANSWER: &str = "__answer";

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Symbol),
    Const(DataElement),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(sym(name))
    }

    pub fn constant(name: &str) -> Term {
        Term::Const(DataElement::new(name))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => {
                if c.as_str().bytes().all(|b| b.is_ascii_digit()) {
                    write!(f, "{c}")
                } else {
                    write!(f, "'{c}'")
                }
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom {
            pred: sym(pred),
            args,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Symbol> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `head :- pos, not neg.`
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: Atom,
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.pos.is_empty() || !self.neg.is_empty() {
            write!(f, " :- ")?;
            let mut first = true;
            for a in &self.pos {
                if !first {
                    write!(f, ", ")?;
                }
                first = false;
                write!(f, "{a}")?;
            }
            for a in &self.neg {
                if !first {
                    write!(f, ", ")?;
                }
                first = false;
                write!(f, "not {a}")?;
            }
        }
        write!(f, ".")
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
pub enum Dialect {
    /// FO-equivalent: acyclic predicate dependencies, negation allowed.
    #[serde(rename = "nonrecursive-negation")]
    NonrecursiveNegation,
    /// Recursion allowed, no negation; least-fixpoint semantics.
    #[serde(rename = "positive-recursive")]
    PositiveRecursive,
    /// Single answer predicate, no other intensional predicates.
    #[serde(rename = "ucq-negation")]
    UcqNegation,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("rule `{rule}` is not range-restricted: variable `{var}` is unbound")]
    NotRangeRestricted { rule: String, var: String },
    #[error("predicate `{pred}` used with arity {found} and with arity {expected}")]
    InconsistentArity {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("built-in predicate `{0}` may not occur in a rule head")]
    BuiltinInHead(String),
    #[error("built-in predicate `{0}` may not be negated")]
    BuiltinNegated(String),
    #[error("negation is not allowed in the positive-recursive dialect (rule `{0}`)")]
    NegationInPositive(String),
    #[error("predicate dependency cycle through `{0}` in the nonrecursive dialect")]
    RecursionInNonrecursive(String),
    #[error("the ucq-negation dialect allows no intensional predicate besides the answer, found `{0}`")]
    IntensionalInUcq(String),
    #[error("answer predicate `{pred}` declared with arity {declared}, used with arity {found}")]
    AnswerArity {
        pred: String,
        declared: usize,
        found: usize,
    },
}

/// Compiled term: variables renamed to slot indices.
#[derive(Clone, Debug)]
pub(crate) enum CTerm {
    Var(usize),
    Const(DataElement),
}

#[derive(Clone, Debug)]
pub(crate) enum CAtom {
    Rel { pred: Symbol, args: Vec<CTerm> },
    Adom(CTerm),
    Neq(CTerm, CTerm),
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledRule {
    pub head_pred: Symbol,
    pub head_args: Vec<CTerm>,
    pub body: Vec<CAtom>,
    pub neg: Vec<(Symbol, Vec<CTerm>)>,
    pub nvars: usize,
}

fn compile_term(t: &Term, vars: &mut BTreeMap<Symbol, usize>) -> CTerm {
    match t {
        Term::Const(c) => CTerm::Const(c.clone()),
        Term::Var(v) => {
            let next = vars.len();
            CTerm::Var(*vars.entry(v.clone()).or_insert(next))
        }
    }
}

fn compile_rule(rule: &Rule) -> CompiledRule {
    let mut vars: BTreeMap<Symbol, usize> = BTreeMap::new();
    let mut rel_atoms = Vec::new();
    let mut adom_atoms = Vec::new();
    let mut neq_atoms = Vec::new();
    // Binding atoms first (in source order), then Adom, then Neq, so that
    // Neq tests run on bound variables.
    for a in &rule.pos {
        match &*a.pred {
            ADOM => adom_atoms.push(a),
            NEQ => neq_atoms.push(a),
            _ => rel_atoms.push(a),
        }
    }
    let mut body = Vec::new();
    for a in rel_atoms {
        body.push(CAtom::Rel {
            pred: a.pred.clone(),
            args: a.args.iter().map(|t| compile_term(t, &mut vars)).collect(),
        });
    }
    for a in adom_atoms {
        body.push(CAtom::Adom(compile_term(&a.args[0], &mut vars)));
    }
    for a in neq_atoms {
        body.push(CAtom::Neq(
            compile_term(&a.args[0], &mut vars),
            compile_term(&a.args[1], &mut vars),
        ));
    }
    let neg = rule
        .neg
        .iter()
        .map(|a| {
            (
                a.pred.clone(),
                a.args.iter().map(|t| compile_term(t, &mut vars)).collect(),
            )
        })
        .collect();
    let head_args = rule
        .head
        .args
        .iter()
        .map(|t| compile_term(t, &mut vars))
        .collect();
    CompiledRule {
        head_pred: rule.head.pred.clone(),
        head_args,
        body,
        neg,
        nvars: vars.len(),
    }
}

/// Check arity consistency of a set of rules against (and into) `arities`.
pub(crate) fn collect_arities(
    rules: &[Rule],
    arities: &mut BTreeMap<Symbol, usize>,
) -> Result<(), QueryError> {
    let mut see = |pred: &Symbol, n: usize| -> Result<(), QueryError> {
        match arities.get(pred) {
            Some(&a) if a != n => Err(QueryError::InconsistentArity {
                pred: pred.to_string(),
                expected: a,
                found: n,
            }),
            Some(_) => Ok(()),
            None => {
                arities.insert(pred.clone(), n);
                Ok(())
            }
        }
    };
    for r in rules {
        see(&r.head.pred, r.head.args.len())?;
        for a in r.pos.iter().chain(r.neg.iter()) {
            see(&a.pred, a.args.len())?;
        }
    }
    Ok(())
}

/// Range restriction: every head variable, every variable of a negated atom
/// and every variable of a `Neq` atom must occur in a binding positive atom
/// (a regular atom or `Adom`).
pub(crate) fn check_range_restriction(rule: &Rule) -> Result<(), QueryError> {
    let mut bound: BTreeSet<&Symbol> = BTreeSet::new();
    for a in &rule.pos {
        if &*a.pred != NEQ {
            bound.extend(a.vars());
        }
    }
    let mut demand: Vec<&Symbol> = rule.head.vars().collect();
    for a in &rule.neg {
        demand.extend(a.vars());
    }
    for a in &rule.pos {
        if &*a.pred == NEQ {
            demand.extend(a.vars());
        }
    }
    for v in demand {
        if !bound.contains(v) {
            return Err(QueryError::NotRangeRestricted {
                rule: rule.to_string(),
                var: v.to_string(),
            });
        }
    }
    Ok(())
}

fn check_builtin_use(rules: &[Rule]) -> Result<(), QueryError> {
    for r in rules {
        for b in [ADOM, NEQ] {
            if &*r.head.pred == b {
                return Err(QueryError::BuiltinInHead(b.to_string()));
            }
            if r.neg.iter().any(|a| &*a.pred == b) {
                return Err(QueryError::BuiltinNegated(b.to_string()));
            }
        }
    }
    Ok(())
}

/// A validated query program with a designated answer relation.
#[derive(Clone)]
pub struct QueryProgram {
    rules: Vec<Rule>,
    dialect: Dialect,
    answer: Symbol,
    answer_arity: usize,
    pub(crate) compiled: Vec<CompiledRule>,
    /// Intensional predicates in a dependency-respecting evaluation order
    /// (meaningful for the nonrecursive dialect).
    pub(crate) topo: Vec<Symbol>,
    pub(crate) intensional: BTreeSet<Symbol>,
    pub(crate) extensional: BTreeSet<Symbol>,
    pub(crate) constants: BTreeSet<DataElement>,
}

impl PartialEq for QueryProgram {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
            && self.dialect == other.dialect
            && self.answer == other.answer
            && self.answer_arity == other.answer_arity
    }
}
impl Eq for QueryProgram {}

impl fmt::Debug for QueryProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QueryProgram")
            .field("dialect", &self.dialect)
            .field("answer", &format!("{}/{}", self.answer, self.answer_arity))
            .field("rules", &self.rules)
            .finish()
    }
}

impl QueryProgram {
    /// Validate and compile. `answer` is the name of the answer relation;
    /// rules whose head is `answer` define it. An empty rule list is the
    /// constant-empty query.
    pub fn new(
        rules: Vec<Rule>,
        dialect: Dialect,
        answer: &str,
        answer_arity: usize,
    ) -> Result<QueryProgram, QueryError> {
        let answer = sym(answer);
        check_builtin_use(&rules)?;
        let mut arities: BTreeMap<Symbol, usize> = BTreeMap::new();
        arities.insert(sym(ADOM), 1);
        arities.insert(sym(NEQ), 2);
        collect_arities(&rules, &mut arities)?;
        if let Some(&a) = arities.get(&answer) {
            if a != answer_arity {
                return Err(QueryError::AnswerArity {
                    pred: answer.to_string(),
                    declared: answer_arity,
                    found: a,
                });
            }
        }
        for r in &rules {
            check_range_restriction(r)?;
        }

        let mut intensional: BTreeSet<Symbol> =
            rules.iter().map(|r| r.head.pred.clone()).collect();
        intensional.insert(answer.clone());
        let extensional: BTreeSet<Symbol> = rules
            .iter()
            .flat_map(|r| r.pos.iter().chain(r.neg.iter()))
            .filter(|a| !matches!(&*a.pred, ADOM | NEQ))
            .map(|a| a.pred.clone())
            .filter(|p| !intensional.contains(p))
            .collect();

        match dialect {
            Dialect::PositiveRecursive => {
                if let Some(r) = rules.iter().find(|r| !r.neg.is_empty()) {
                    return Err(QueryError::NegationInPositive(r.to_string()));
                }
            }
            Dialect::UcqNegation => {
                if let Some(p) = intensional.iter().find(|p| **p != answer) {
                    return Err(QueryError::IntensionalInUcq(p.to_string()));
                }
            }
            Dialect::NonrecursiveNegation => {}
        }

        // Dependency graph among intensional predicates; topological order
        // required for the nonrecursive dialect, computed for all.
        let mut deps: BTreeMap<Symbol, BTreeSet<Symbol>> = BTreeMap::new();
        for p in &intensional {
            deps.entry(p.clone()).or_default();
        }
        for r in &rules {
            let e = deps.entry(r.head.pred.clone()).or_default();
            for a in r.pos.iter().chain(r.neg.iter()) {
                if intensional.contains(&a.pred) {
                    e.insert(a.pred.clone());
                }
            }
        }
        let topo = match topo_sort(&deps) {
            Ok(t) => t,
            Err(cycle_pred) => {
                if dialect == Dialect::NonrecursiveNegation {
                    return Err(QueryError::RecursionInNonrecursive(cycle_pred.to_string()));
                }
                // Recursive positive programs are evaluated by fixpoint; the
                // order is irrelevant there.
                intensional.iter().cloned().collect()
            }
        };

        let compiled = rules.iter().map(compile_rule).collect();
        let constants = rules
            .iter()
            .flat_map(|r| {
                std::iter::once(&r.head)
                    .chain(r.pos.iter())
                    .chain(r.neg.iter())
            })
            .flat_map(|a| a.args.iter())
            .filter_map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect();

        Ok(QueryProgram {
            rules,
            dialect,
            answer,
            answer_arity,
            compiled,
            topo,
            intensional,
            extensional,
            constants,
        })
    }

    /// The constant-empty query of the given arity.
    pub fn empty(answer: &str, answer_arity: usize) -> QueryProgram {
        QueryProgram::new(Vec::new(), Dialect::NonrecursiveNegation, answer, answer_arity)
            .expect("empty program is always valid")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }

    pub fn answer(&self) -> &Symbol {
        &self.answer
    }

    pub fn answer_arity(&self) -> usize {
        self.answer_arity
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Extensional (input) predicates referenced by the rules.
    pub fn extensional_preds(&self) -> impl Iterator<Item = &Symbol> {
        self.extensional.iter()
    }

    /// True if any atom anywhere mentions `pred`.
    pub fn mentions(&self, pred: &str) -> bool {
        self.rules.iter().any(|r| {
            &*r.head.pred == pred
                || r.pos.iter().chain(r.neg.iter()).any(|a| &*a.pred == pred)
        })
    }
}

/// Kahn topological sort; on a cycle returns some predicate on it.
fn topo_sort(deps: &BTreeMap<Symbol, BTreeSet<Symbol>>) -> Result<Vec<Symbol>, Symbol> {
    let mut remaining: BTreeMap<Symbol, BTreeSet<Symbol>> = deps.clone();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let ready: Vec<Symbol> = remaining
            .iter()
            .filter(|(_, d)| d.iter().all(|p| !remaining.contains_key(p)))
            .map(|(p, _)| p.clone())
            .collect();
        if ready.is_empty() {
            return Err(remaining.keys().next().unwrap().clone());
        }
        for p in ready {
            remaining.remove(&p);
            order.push(p);
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_rules;

    #[test]
    fn rejects_unbound_head_variable() {
        let rules = parse_rules("A(x) :- B(y).").unwrap();
        let err = QueryProgram::new(rules, Dialect::NonrecursiveNegation, "A", 1).unwrap_err();
        assert!(matches!(err, QueryError::NotRangeRestricted { .. }));
    }

    #[test]
    fn rejects_unbound_negated_variable() {
        let rules = parse_rules("A(x) :- B(x), not C(y).").unwrap();
        let err = QueryProgram::new(rules, Dialect::NonrecursiveNegation, "A", 1).unwrap_err();
        assert!(matches!(err, QueryError::NotRangeRestricted { .. }));
    }

    #[test]
    fn rejects_negation_in_positive_dialect() {
        let rules = parse_rules("A(x) :- B(x), not C(x).").unwrap();
        let err = QueryProgram::new(rules, Dialect::PositiveRecursive, "A", 1).unwrap_err();
        assert!(matches!(err, QueryError::NegationInPositive(_)));
    }

    #[test]
    fn rejects_recursion_in_nonrecursive_dialect() {
        let rules = parse_rules("A(x) :- A(x).").unwrap();
        let err = QueryProgram::new(rules, Dialect::NonrecursiveNegation, "A", 1).unwrap_err();
        assert!(matches!(err, QueryError::RecursionInNonrecursive(_)));
    }

    #[test]
    fn accepts_recursion_in_positive_dialect() {
        let rules = parse_rules("T(x,y) :- S(x,y). T(x,y) :- S(x,z), T(z,y).").unwrap();
        QueryProgram::new(rules, Dialect::PositiveRecursive, "T", 2).unwrap();
    }

    #[test]
    fn rejects_helper_predicate_in_ucq() {
        let rules = parse_rules("A(x) :- H(x). H(x) :- B(x).").unwrap();
        let err = QueryProgram::new(rules, Dialect::UcqNegation, "A", 1).unwrap_err();
        assert!(matches!(err, QueryError::IntensionalInUcq(_)));
    }

    #[test]
    fn rejects_inconsistent_arity() {
        let rules = parse_rules("A(x) :- B(x). A(x) :- B(x,x).").unwrap();
        let err = QueryProgram::new(rules, Dialect::NonrecursiveNegation, "A", 1).unwrap_err();
        assert!(matches!(err, QueryError::InconsistentArity { .. }));
    }

    #[test]
    fn neq_variables_must_be_bound() {
        let rules = parse_rules("A(x) :- B(x), Neq(x,y).").unwrap();
        let err = QueryProgram::new(rules, Dialect::NonrecursiveNegation, "A", 1).unwrap_err();
        assert!(matches!(err, QueryError::NotRangeRestricted { .. }));
    }

    #[test]
    fn round_trip_display_parse() {
        let text = "T(x,y) :- S(x,z), Adom(y), not B(z,y).";
        let rules = parse_rules(text).unwrap();
        let printed = rules[0].to_string();
        let reparsed = parse_rules(&printed).unwrap();
        assert_eq!(rules, reparsed);
    }
}
