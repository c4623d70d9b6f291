//! Facts, instances and database schemas.
//!
//! Data elements are opaque atomic symbols drawn from a countable universe;
//! there is no arithmetic on them. A total order exists for canonical
//! printing and hashing only. Instances are sets of facts grouped by
//! relation name, kept in canonical (sorted) order throughout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Interned identifier used for relation names and data elements.
pub type Symbol = Arc<str>;

/// Convenience constructor for a [`Symbol`].
pub fn sym(s: &str) -> Symbol {
    Arc::from(s)
}

/// An atomic data element. Node identifiers are data elements too, so they
/// can be stored in relations.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DataElement(Symbol);

impl DataElement {
    pub fn new(s: &str) -> Self {
        DataElement(sym(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for DataElement {
    fn from(s: &str) -> Self {
        DataElement::new(s)
    }
}

impl fmt::Display for DataElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for DataElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A set of tuples of a fixed arity.
pub type Tuples = BTreeSet<Vec<DataElement>>;

/// A fact `R(a1, ..., ak)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub relation: Symbol,
    pub args: Vec<DataElement>,
}

impl Fact {
    pub fn new(relation: &str, args: &[&str]) -> Self {
        Fact {
            relation: sym(relation),
            args: args.iter().map(|a| DataElement::new(a)).collect(),
        }
    }

    pub fn from_parts(relation: Symbol, args: Vec<DataElement>) -> Self {
        Fact { relation, args }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("relation `{0}` declared twice")]
    DuplicateRelation(String),
    #[error("relation `{name}` used with arity {found}, declared with arity {declared}")]
    ArityMismatch {
        name: String,
        declared: usize,
        found: usize,
    },
    #[error("relation `{0}` is not declared in the schema")]
    UnknownRelation(String),
    #[error("`{0}` is a reserved relation name")]
    ReservedName(String),
}

/// Relation names that the system claims for itself and that user schemas
/// may not redeclare.
pub const RESERVED_NAMES: &[&str] = &["Id", "All", "Adom", "Neq", "out"];

/// A finite set of relation names with associated arities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatabaseSchema {
    arities: BTreeMap<Symbol, usize>,
}

impl DatabaseSchema {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a schema from `(name, arity)` pairs.
    pub fn from_pairs(pairs: &[(&str, usize)]) -> Result<Self, SchemaError> {
        let mut s = Self::new();
        for (name, arity) in pairs {
            s.declare(sym(name), *arity)?;
        }
        Ok(s)
    }

    pub fn declare(&mut self, name: Symbol, arity: usize) -> Result<(), SchemaError> {
        if self.arities.contains_key(&name) {
            return Err(SchemaError::DuplicateRelation(name.to_string()));
        }
        self.arities.insert(name, arity);
        Ok(())
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.arities.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.arities.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, usize)> {
        self.arities.iter().map(|(n, a)| (n, *a))
    }

    pub fn names(&self) -> impl Iterator<Item = &Symbol> {
        self.arities.keys()
    }

    pub fn len(&self) -> usize {
        self.arities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arities.is_empty()
    }

    pub fn is_disjoint(&self, other: &DatabaseSchema) -> bool {
        self.arities.keys().all(|k| !other.arities.contains_key(k))
    }

    /// Union of two schemas; fails on conflicting arities.
    pub fn union(&self, other: &DatabaseSchema) -> Result<DatabaseSchema, SchemaError> {
        let mut out = self.clone();
        for (name, arity) in other.iter() {
            match out.arities.get(name) {
                Some(&a) if a != arity => {
                    return Err(SchemaError::ArityMismatch {
                        name: name.to_string(),
                        declared: a,
                        found: arity,
                    })
                }
                Some(_) => {}
                None => {
                    out.arities.insert(name.clone(), arity);
                }
            }
        }
        Ok(out)
    }
}

/// A finite set of facts conforming to a schema. Set semantics: no
/// duplicates, canonical ordering on (relation name, args).
#[derive(Clone, PartialEq, Eq)]
pub struct Instance {
    schema: Arc<DatabaseSchema>,
    rels: BTreeMap<Symbol, Tuples>,
}

impl Instance {
    pub fn new(schema: Arc<DatabaseSchema>) -> Self {
        Instance {
            schema,
            rels: BTreeMap::new(),
        }
    }

    pub fn empty(schema: DatabaseSchema) -> Self {
        Self::new(Arc::new(schema))
    }

    pub fn schema(&self) -> &DatabaseSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<DatabaseSchema> {
        self.schema.clone()
    }

    pub fn insert(&mut self, fact: Fact) -> Result<(), SchemaError> {
        match self.schema.arity(&fact.relation) {
            None => Err(SchemaError::UnknownRelation(fact.relation.to_string())),
            Some(a) if a != fact.args.len() => Err(SchemaError::ArityMismatch {
                name: fact.relation.to_string(),
                declared: a,
                found: fact.args.len(),
            }),
            Some(_) => {
                self.rels
                    .entry(fact.relation)
                    .or_default()
                    .insert(fact.args);
                Ok(())
            }
        }
    }

    /// Replace the contents of one relation wholesale.
    pub fn set_relation(&mut self, name: Symbol, tuples: Tuples) -> Result<(), SchemaError> {
        let arity = self
            .schema
            .arity(&name)
            .ok_or_else(|| SchemaError::UnknownRelation(name.to_string()))?;
        if let Some(t) = tuples.iter().find(|t| t.len() != arity) {
            return Err(SchemaError::ArityMismatch {
                name: name.to_string(),
                declared: arity,
                found: t.len(),
            });
        }
        if tuples.is_empty() {
            self.rels.remove(&name);
        } else {
            self.rels.insert(name, tuples);
        }
        Ok(())
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.rels
            .get(&fact.relation)
            .map(|t| t.contains(&fact.args))
            .unwrap_or(false)
    }

    /// Tuples of one relation (empty set reference if none).
    pub fn relation(&self, name: &str) -> &Tuples {
        static EMPTY: std::sync::OnceLock<Tuples> = std::sync::OnceLock::new();
        self.rels
            .get(name)
            .unwrap_or_else(|| EMPTY.get_or_init(Tuples::new))
    }

    pub fn relations(&self) -> impl Iterator<Item = (&Symbol, &Tuples)> {
        self.rels.iter()
    }

    /// All facts in canonical order.
    pub fn facts(&self) -> impl Iterator<Item = Fact> + '_ {
        self.rels.iter().flat_map(|(name, tuples)| {
            tuples
                .iter()
                .map(move |args| Fact::from_parts(name.clone(), args.clone()))
        })
    }

    pub fn len(&self) -> usize {
        self.rels.values().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.values().all(|t| t.is_empty())
    }

    /// The active domain: the set of data elements occurring in facts.
    pub fn adom(&self) -> BTreeSet<DataElement> {
        let mut out = BTreeSet::new();
        for tuples in self.rels.values() {
            for t in tuples {
                out.extend(t.iter().cloned());
            }
        }
        out
    }

    /// Rename every data element pointwise through `h`. Elements outside the
    /// domain of `h` are kept as-is, so any map defined on the active domain
    /// is enough.
    pub fn apply_permutation(&self, h: &BTreeMap<DataElement, DataElement>) -> Instance {
        let mut out = Instance::new(self.schema.clone());
        for (name, tuples) in &self.rels {
            let mapped: Tuples = tuples
                .iter()
                .map(|t| {
                    t.iter()
                        .map(|e| h.get(e).cloned().unwrap_or_else(|| e.clone()))
                        .collect()
                })
                .collect();
            out.rels.insert(name.clone(), mapped);
        }
        out
    }

    /// Set union; the result's schema is the union of both schemas.
    pub fn union(&self, other: &Instance) -> Result<Instance, SchemaError> {
        let schema = if other.schema.iter().all(|(n, a)| self.schema.arity(n) == Some(a)) {
            self.schema.clone()
        } else {
            Arc::new(self.schema.union(&other.schema)?)
        };
        let mut rels = self.rels.clone();
        for (name, tuples) in &other.rels {
            rels.entry(name.clone()).or_default().extend(tuples.iter().cloned());
        }
        Ok(Instance { schema, rels })
    }

    /// The sub-instance over the relations of `part` (which must be a
    /// subset of this instance's schema).
    pub fn restrict(&self, part: &DatabaseSchema) -> Instance {
        let mut out = Instance::new(Arc::new(part.clone()));
        for (name, tuples) in &self.rels {
            if part.contains(name) {
                out.rels.insert(name.clone(), tuples.clone());
            }
        }
        out
    }

    /// True if `self`'s facts are a subset of `other`'s.
    pub fn is_subset(&self, other: &Instance) -> bool {
        self.rels.iter().all(|(name, tuples)| {
            let theirs = other.relation(name);
            tuples.is_subset(theirs)
        })
    }

    /// Internal view of the relation map, for the evaluator.
    pub(crate) fn rels(&self) -> &BTreeMap<Symbol, Tuples> {
        &self.rels
    }
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, fact) in self.facts().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{fact}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Collect the active domain of a raw tuple set.
pub fn tuples_adom(tuples: &Tuples) -> BTreeSet<DataElement> {
    tuples.iter().flat_map(|t| t.iter().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_rs() -> DatabaseSchema {
        DatabaseSchema::from_pairs(&[("R", 2), ("S", 1)]).unwrap()
    }

    #[test]
    fn adom_of_empty_instance_is_empty() {
        let inst = Instance::empty(schema_rs());
        assert!(inst.adom().is_empty());
    }

    #[test]
    fn adom_collects_elements() {
        let mut inst = Instance::empty(schema_rs());
        inst.insert(Fact::new("R", &["a", "b"])).unwrap();
        let adom = inst.adom();
        assert_eq!(
            adom.into_iter().collect::<Vec<_>>(),
            vec![DataElement::new("a"), DataElement::new("b")]
        );
    }

    #[test]
    fn adom_deduplicates() {
        let mut inst = Instance::empty(schema_rs());
        inst.insert(Fact::new("R", &["a", "a"])).unwrap();
        inst.insert(Fact::new("S", &["c"])).unwrap();
        let adom: Vec<_> = inst.adom().into_iter().collect();
        assert_eq!(adom, vec![DataElement::new("a"), DataElement::new("c")]);
    }

    #[test]
    fn identity_permutation_is_identity() {
        let mut inst = Instance::empty(schema_rs());
        inst.insert(Fact::new("R", &["a", "b"])).unwrap();
        let h = BTreeMap::new();
        assert_eq!(inst.apply_permutation(&h), inst);
    }

    #[test]
    fn swap_permutation_renames() {
        let mut inst = Instance::empty(schema_rs());
        inst.insert(Fact::new("R", &["a", "b"])).unwrap();
        let mut h = BTreeMap::new();
        h.insert(DataElement::new("a"), DataElement::new("b"));
        h.insert(DataElement::new("b"), DataElement::new("a"));
        let got = inst.apply_permutation(&h);
        assert!(got.contains(&Fact::new("R", &["b", "a"])));
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn insert_rejects_wrong_arity() {
        let mut inst = Instance::empty(schema_rs());
        let err = inst.insert(Fact::new("R", &["a"])).unwrap_err();
        assert!(matches!(err, SchemaError::ArityMismatch { .. }));
    }

    #[test]
    fn insert_rejects_unknown_relation() {
        let mut inst = Instance::empty(schema_rs());
        let err = inst.insert(Fact::new("T", &["a"])).unwrap_err();
        assert!(matches!(err, SchemaError::UnknownRelation(_)));
    }

    #[test]
    fn facts_are_canonically_ordered() {
        let mut inst = Instance::empty(schema_rs());
        inst.insert(Fact::new("S", &["z"])).unwrap();
        inst.insert(Fact::new("R", &["b", "a"])).unwrap();
        inst.insert(Fact::new("R", &["a", "b"])).unwrap();
        let printed: Vec<String> = inst.facts().map(|f| f.to_string()).collect();
        assert_eq!(printed, vec!["R(a,b)", "R(b,a)", "S(z)"]);
    }
}
