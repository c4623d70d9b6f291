//! Horizontal partitions of an input instance over network nodes.

use crate::data::{DataElement, DatabaseSchema, Fact, Instance};
use crate::harness::HarnessError;
use crate::lex::{tokenize, Cursor, ParseError, Token};
use crate::parse::parse_fact;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// A function from nodes to subsets of the global input instance. Shares
/// may overlap and may be empty; their union is the global instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HorizontalPartition {
    assignment: BTreeMap<DataElement, Instance>,
}

impl HorizontalPartition {
    pub fn new(assignment: BTreeMap<DataElement, Instance>) -> HorizontalPartition {
        HorizontalPartition { assignment }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &DataElement> {
        self.assignment.keys()
    }

    pub fn share(&self, v: &DataElement) -> &Instance {
        &self.assignment[v]
    }

    pub fn assignment(&self) -> &BTreeMap<DataElement, Instance> {
        &self.assignment
    }

    /// The global instance: the union of all shares.
    pub fn union(&self) -> Instance {
        let mut it = self.assignment.values();
        let first = it.next().expect("a partition covers at least one node");
        let mut acc = first.clone();
        for inst in it {
            acc = acc.union(inst).expect("shares have one schema");
        }
        acc
    }

    /// Every node holds the entire instance.
    pub fn full_replication(
        instance: &Instance,
        nodes: &BTreeSet<DataElement>,
    ) -> HorizontalPartition {
        HorizontalPartition::new(
            nodes
                .iter()
                .map(|v| (v.clone(), instance.clone()))
                .collect(),
        )
    }

    /// Facts dealt out disjointly in canonical order.
    pub fn round_robin(
        instance: &Instance,
        nodes: &BTreeSet<DataElement>,
    ) -> HorizontalPartition {
        let mut assignment: BTreeMap<DataElement, Instance> = nodes
            .iter()
            .map(|v| (v.clone(), Instance::new(instance.schema_arc())))
            .collect();
        let order: Vec<&DataElement> = nodes.iter().collect();
        for (i, fact) in instance.facts().enumerate() {
            assignment
                .get_mut(order[i % order.len()])
                .expect("node present")
                .insert(fact)
                .expect("same schema");
        }
        HorizontalPartition::new(assignment)
    }

    /// The entire instance at one node, every other share empty.
    pub fn all_at(
        instance: &Instance,
        nodes: &BTreeSet<DataElement>,
        target: &DataElement,
    ) -> HorizontalPartition {
        HorizontalPartition::new(
            nodes
                .iter()
                .map(|v| {
                    let share = if v == target {
                        instance.clone()
                    } else {
                        Instance::new(instance.schema_arc())
                    };
                    (v.clone(), share)
                })
                .collect(),
        )
    }

    /// Parse blocks `node v { R(a,b). ... }` against the given schema.
    pub fn parse(
        text: &str,
        schema: Arc<DatabaseSchema>,
    ) -> Result<HorizontalPartition, ParseError> {
        let mut cur = Cursor::new(tokenize(text)?);
        let mut assignment = BTreeMap::new();
        while !cur.at_end() {
            if !cur.eat_kw("node") {
                return Err(cur.error("expected `node <name> { ... }`"));
            }
            let name = match cur.next() {
                Some(s) => match s.tok {
                    Token::Ident(v) => DataElement::new(&v),
                    Token::Nat(n) => DataElement::new(&n.to_string()),
                    t => {
                        return Err(ParseError::new(
                            s.line,
                            s.col,
                            format!("expected a node name, found {t}"),
                        ))
                    }
                },
                None => return Err(cur.error("expected a node name")),
            };
            cur.expect(&Token::LBrace)?;
            let mut inst = Instance::new(schema.clone());
            while !cur.eat(&Token::RBrace) {
                let f = parse_fact(&mut cur)?;
                inst.insert(f)
                    .map_err(|e| cur.error(e.to_string()))?;
            }
            if assignment.insert(name.clone(), inst).is_some() {
                return Err(cur.error(format!("duplicate block for node `{name}`")));
            }
        }
        if assignment.is_empty() {
            return Err(ParseError::new(1, 1, "partition file declares no nodes"));
        }
        Ok(HorizontalPartition::new(assignment))
    }
}

impl fmt::Display for HorizontalPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (v, inst) in &self.assignment {
            write!(f, "node {v} {{")?;
            for fact in inst.facts() {
                write!(f, " {fact}.")?;
            }
            writeln!(f, " }}")?;
        }
        Ok(())
    }
}

/// Number of partitions of `facts` facts over `nodes` nodes: every fact
/// goes to a nonempty subset of nodes.
pub fn partition_count(nodes: usize, facts: usize) -> Option<u128> {
    let subsets = (1u128 << nodes) - 1;
    let mut total: u128 = 1;
    for _ in 0..facts {
        total = total.checked_mul(subsets)?;
    }
    Some(total)
}

/// All horizontal partitions, each exactly once: every fact is assigned to
/// one nonempty subset of nodes. Errors if the count exceeds the budget.
pub fn enumerate_partitions(
    instance: &Instance,
    nodes: &BTreeSet<DataElement>,
    budget: usize,
) -> Result<Vec<HorizontalPartition>, HarnessError> {
    let facts: Vec<Fact> = instance.facts().collect();
    let count = partition_count(nodes.len(), facts.len());
    match count {
        Some(c) if c <= budget as u128 => {}
        _ => {
            return Err(HarnessError::BudgetExceeded {
                needed: count,
                budget,
            })
        }
    }
    let node_list: Vec<&DataElement> = nodes.iter().collect();
    let subsets = (1usize << node_list.len()) - 1;
    // Mixed-radix counter: digit i picks the (nonempty) node subset of fact i.
    let mut digits = vec![1usize; facts.len()];
    let mut out = Vec::new();
    loop {
        let mut assignment: BTreeMap<DataElement, Instance> = nodes
            .iter()
            .map(|v| (v.clone(), Instance::new(instance.schema_arc())))
            .collect();
        for (fact, &mask) in facts.iter().zip(&digits) {
            for (i, v) in node_list.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    assignment
                        .get_mut(*v)
                        .expect("node present")
                        .insert(fact.clone())
                        .expect("same schema");
                }
            }
        }
        out.push(HorizontalPartition::new(assignment));
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(out);
            }
            if digits[i] < subsets {
                digits[i] += 1;
                break;
            }
            digits[i] = 1;
            i += 1;
        }
    }
}

/// Seeded draws preceded by the three canonical partitions: full
/// replication, round-robin disjoint, and all-at-one-node.
pub fn sample_partitions(
    instance: &Instance,
    nodes: &BTreeSet<DataElement>,
    count: usize,
    seed: u64,
) -> Vec<HorizontalPartition> {
    let mut out = vec![
        HorizontalPartition::full_replication(instance, nodes),
        HorizontalPartition::round_robin(instance, nodes),
        HorizontalPartition::all_at(instance, nodes, nodes.iter().next().expect("nonempty")),
    ];
    out.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node_list: Vec<&DataElement> = nodes.iter().collect();
    let subsets = (1usize << node_list.len()) - 1;
    while out.len() < count {
        let mut assignment: BTreeMap<DataElement, Instance> = nodes
            .iter()
            .map(|v| (v.clone(), Instance::new(instance.schema_arc())))
            .collect();
        for fact in instance.facts() {
            let mask = rng.gen_range(1..=subsets);
            for (i, v) in node_list.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    assignment
                        .get_mut(*v)
                        .expect("node present")
                        .insert(fact.clone())
                        .expect("same schema");
                }
            }
        }
        out.push(HorizontalPartition::new(assignment));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_instance;

    fn nodes(names: &[&str]) -> BTreeSet<DataElement> {
        names.iter().map(|n| DataElement::new(n)).collect()
    }

    #[test]
    fn counts_match_formula() {
        // (2^n − 1)^f for tiny cases.
        let one = parse_instance("S(a).").unwrap();
        let two = parse_instance("S(a). S(b).").unwrap();
        let none = parse_instance("").unwrap();
        assert_eq!(
            enumerate_partitions(&one, &nodes(&["u", "v"]), 100).unwrap().len(),
            3
        );
        assert_eq!(
            enumerate_partitions(&two, &nodes(&["u", "v"]), 100).unwrap().len(),
            9
        );
        assert_eq!(
            enumerate_partitions(&none, &nodes(&["u", "v", "w"]), 100).unwrap().len(),
            1
        );
        assert_eq!(partition_count(3, 2), Some(49));
    }

    #[test]
    fn enumeration_is_exact_and_duplicate_free() {
        let inst = parse_instance("S(a). S(b).").unwrap();
        let parts = enumerate_partitions(&inst, &nodes(&["u", "v"]), 100).unwrap();
        let mut seen = BTreeSet::new();
        for p in &parts {
            assert_eq!(p.union(), inst, "every partition covers the instance");
            assert!(seen.insert(format!("{p}")), "duplicate partition {p}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let inst = parse_instance("S(a). S(b). S(c). S(d).").unwrap();
        assert!(matches!(
            enumerate_partitions(&inst, &nodes(&["u", "v", "w"]), 100),
            Err(HarnessError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn canonical_partitions() {
        let inst = parse_instance("S(a). S(b). S(c).").unwrap();
        let ns = nodes(&["u", "v"]);
        let full = HorizontalPartition::full_replication(&inst, &ns);
        for v in &ns {
            assert_eq!(full.share(v), &inst);
        }
        let rr = HorizontalPartition::round_robin(&inst, &ns);
        assert_eq!(rr.union(), inst);
        let sizes: Vec<usize> = ns.iter().map(|v| rr.share(v).len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 3, "disjoint split");
        let one = HorizontalPartition::all_at(&inst, &ns, &DataElement::new("v"));
        assert!(one.share(&DataElement::new("u")).is_empty());
        assert_eq!(one.share(&DataElement::new("v")), &inst);
    }

    #[test]
    fn sampling_is_seeded_and_covering() {
        let inst = parse_instance("S(a). S(b). S(c).").unwrap();
        let ns = nodes(&["u", "v", "w"]);
        let a = sample_partitions(&inst, &ns, 10, 5);
        let b = sample_partitions(&inst, &ns, 10, 5);
        assert_eq!(a, b, "same seed, same draws");
        for p in &a {
            assert_eq!(p.union(), inst);
        }
        assert_ne!(a, sample_partitions(&inst, &ns, 10, 6));
    }

    #[test]
    fn parse_round_trips() {
        let inst = parse_instance("S(a). S(b).").unwrap();
        let ns = nodes(&["u", "v"]);
        let p = HorizontalPartition::round_robin(&inst, &ns);
        let text = p.to_string();
        let back = HorizontalPartition::parse(&text, inst.schema_arc()).unwrap();
        assert_eq!(p, back);
    }
}
