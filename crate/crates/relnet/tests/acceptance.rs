//! Acceptance suite: one test per criterion, each printing a single
//! `acceptance N (<name>): pass|fail` line (visible with `--nocapture`).
//! Expected values come from independent oracles computed inside this
//! file or frozen by hand, never from the implementation under test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relnet::data::{DataElement, Fact, Instance, Tuples};
use relnet::dedalus::core::check_eventual_consistency;
use relnet::dedalus::tm::derives_accept;
use relnet::dedalus::{build_tm_program, parse_machine, run_machine, word_structure};
use relnet::harness::{
    adversarial_extension_replay, check_consistency, check_coordination_free, check_monotone,
    check_topology_independence, corpus_entry, distributed_output, ring_fifo_replay,
    sample_partitions, CheckOptions, HorizontalPartition, VerdictKind,
};
use relnet::netsim::{
    apply_delivery, apply_heartbeat, heartbeat_trajectory, make_initial, run, Network, RunTrace,
    Scheduler, TransitionKind,
};
use relnet::parse::parse_instance_with_schema;
use relnet::query::{Dialect, QueryProgram};
use relnet::transducer::{memory_update, TransducerProgram};
use std::collections::BTreeSet;
use std::sync::Arc;

fn report(number: usize, name: &str, ok: bool) {
    println!(
        "acceptance {number:2} ({name}): {}",
        if ok { "pass" } else { "fail" }
    );
    assert!(ok, "acceptance {number} ({name}) failed");
}

fn input_instance(program: &TransducerProgram, text: &str) -> Instance {
    parse_instance_with_schema(text, Arc::new(program.schema().input().clone()))
        .expect("well-formed test instance")
}

fn cell_run(
    program: &TransducerProgram,
    network: &Network,
    partition: &HorizontalPartition,
    seed: u64,
    max_steps: usize,
) -> RunTrace {
    let init = make_initial(program, network, partition.assignment()).expect("initial");
    let sched = Scheduler::RandomFair { seed, heartbeat_period: 2 };
    run(program, network, init, &sched, max_steps).expect("run")
}

/// Union of every node's heartbeat-iteration outputs, no deliveries.
fn heartbeat_only(
    program: &TransducerProgram,
    network: &Network,
    partition: &HorizontalPartition,
) -> Tuples {
    let init = make_initial(program, network, partition.assignment()).expect("initial");
    let mut out = Tuples::new();
    for (_, state) in init.states() {
        for step in heartbeat_trajectory(program, state).expect("trajectory") {
            out.extend(step);
        }
    }
    out
}

fn path2() -> Network {
    Network::path(&["n1", "n2"]).unwrap()
}

fn path3() -> Network {
    Network::path(&["n1", "n2", "n3"]).unwrap()
}

fn ring4() -> Network {
    Network::ring(&["n1", "n2", "n3", "n4"]).unwrap()
}

// ---------------------------------------------------------------------------

#[test]
fn a01_memory_update_truth_table() {
    // Exhaustive over a universe of three unary tuples: all 512
    // (old, ins, del) subset triples against the per-tuple 8-case oracle.
    let universe: Vec<Vec<DataElement>> = ["a", "b", "c"]
        .iter()
        .map(|e| vec![DataElement::new(e)])
        .collect();
    let subset = |mask: usize| -> Tuples {
        universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t.clone())
            .collect()
    };
    let mut ok = true;
    for m_old in 0..8usize {
        for m_ins in 0..8usize {
            for m_del in 0..8usize {
                let (old, ins, del) = (subset(m_old), subset(m_ins), subset(m_del));
                let got = memory_update(&old, &ins, &del);
                for t in &universe {
                    let (o, i, d) = (old.contains(t), ins.contains(t), del.contains(t));
                    // Conflicting insert+delete keeps the old verdict;
                    // otherwise insert wins, then delete, then frame.
                    let expect = if i && d { o } else if i { true } else if d { false } else { o };
                    ok &= got.contains(t) == expect;
                }
            }
        }
    }
    report(1, "memory-update truth table", ok);
}

#[test]
fn a02_transitive_closure_reproduction() {
    let entry = corpus_entry("tc_flood").unwrap();
    let oracle = entry.oracle.clone().unwrap();
    let networks = [Network::single("n1"), path3(), ring4()];
    let mut rng = ChaCha8Rng::seed_from_u64(0xa2);
    let mut ok = true;
    for g in 0..50u64 {
        let n = rng.gen_range(2..=8usize);
        let m = rng.gen_range(1..=7usize);
        let mut text = String::new();
        for _ in 0..m {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            text.push_str(&format!("S(v{i},v{j}). "));
        }
        let inst = input_instance(&entry.program, &text);
        let expected = oracle(&inst);
        for net in &networks {
            for p in sample_partitions(&inst, net.nodes(), 5, g) {
                for seed in 0..5 {
                    let trace = cell_run(&entry.program, net, &p, seed, 6000);
                    ok &= trace.quiescence_index.is_some()
                        && trace.cumulative_output == expected;
                }
            }
        }
    }
    report(2, "transitive-closure reproduction", ok);
}

#[test]
fn a03_consistency_counterexample() {
    let entry = corpus_entry("first_element").unwrap();
    let inst = input_instance(&entry.program, "S(a). S(b).");
    // 9 partitions x 3 schedules = 27 cells, within the 100-cell budget.
    let opts = CheckOptions { budget: 81, exhaustive: true, ..CheckOptions::default() };
    let v = check_consistency(&entry.program, &path2(), &inst, &opts).unwrap();
    report(
        3,
        "consistency counterexample",
        v.result == VerdictKind::Fail && v.evidence.len() >= 2,
    );
}

#[test]
fn a04_topology_dependence_counterexample() {
    let entry = corpus_entry("fwd_identity").unwrap();
    let inst = input_instance(&entry.program, "S(a).");
    let nets = [Network::single("n1"), path2()];
    let v = check_topology_independence(&entry.program, &nets, &inst, &CheckOptions::default())
        .unwrap();
    report(4, "topology-dependence counterexample", v.result == VerdictKind::Fail);
}

#[test]
fn a05_acknowledged_flooding_audit() {
    let entry = corpus_entry("flood_acked").unwrap();
    let program = &entry.program;
    let net = |nodes: &[&str], edges: &[(&str, &str)]| {
        Network::new(
            nodes.iter().map(|n| DataElement::new(n)),
            edges
                .iter()
                .map(|(a, b)| (DataElement::new(a), DataElement::new(b))),
        )
        .unwrap()
    };
    // Every connected shape on at most four nodes, up to isomorphism.
    let networks = vec![
        Network::single("n1"),
        path2(),
        path3(),
        Network::clique(&["n1", "n2", "n3"]).unwrap(),
        Network::path(&["n1", "n2", "n3", "n4"]).unwrap(),
        net(&["n1", "n2", "n3", "n4"], &[("n1", "n2"), ("n1", "n3"), ("n1", "n4")]),
        net(
            &["n1", "n2", "n3", "n4"],
            &[("n1", "n2"), ("n2", "n3"), ("n3", "n1"), ("n3", "n4")],
        ),
        ring4(),
        net(
            &["n1", "n2", "n3", "n4"],
            &[("n1", "n2"), ("n2", "n3"), ("n3", "n4"), ("n4", "n1"), ("n2", "n4")],
        ),
        Network::clique(&["n1", "n2", "n3", "n4"]).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xa5);
    let mut ok = true;
    let mut case = 0u64;
    for network in &networks {
        for _ in 0..2 {
            case += 1;
            let k = rng.gen_range(0..=3usize);
            let mut text = String::new();
            for _ in 0..k {
                text.push_str(&format!("S({}). ", ["a", "b", "c", "d", "e"][rng.gen_range(0..5)]));
            }
            let inst = input_instance(program, &text);
            let global: &Tuples = inst.relation("S");
            let partition = HorizontalPartition::round_robin(&inst, network.nodes());
            let trace = cell_run(program, network, &partition, case, 6000);
            ok &= trace.quiescence_index.is_some();

            // Ready at a node must never precede its full copy of I.
            let audit = |config: &relnet::netsim::Configuration, ok: &mut bool| {
                for v in network.nodes() {
                    let st = config.state(v).instance();
                    if !st.relation("Ready").is_empty() {
                        *ok &= global.iter().all(|t| st.relation("Store").contains(t));
                    }
                }
            };
            let mut config = trace.initial.clone();
            audit(&config, &mut ok);
            for tr in &trace.steps {
                config = match tr.kind {
                    TransitionKind::Heartbeat => {
                        apply_heartbeat(program, network, &config, &tr.node).unwrap().0
                    }
                    TransitionKind::Delivery => apply_delivery(
                        program,
                        network,
                        &config,
                        &tr.node,
                        tr.received.as_ref().unwrap(),
                    )
                    .unwrap()
                    .0,
                };
                audit(&config, &mut ok);
            }
            // Let pending memory updates land, then require Ready + full
            // stores everywhere.
            for _ in 0..3 {
                for v in network.nodes().clone() {
                    config = apply_heartbeat(program, network, &config, &v).unwrap().0;
                    audit(&config, &mut ok);
                }
            }
            for v in network.nodes() {
                let st = config.state(v).instance();
                ok &= !st.relation("Ready").is_empty();
                ok &= global.iter().all(|t| st.relation("Store").contains(t));
            }
        }
    }
    report(5, "acknowledged flooding audit", ok);
}

#[test]
fn a06_coordination_suite() {
    let mut ok = true;
    let unit: Tuples = std::iter::once(Vec::new()).collect();

    // tc_flood: witness found, and full replication specifically works.
    let tc = corpus_entry("tc_flood").unwrap();
    let tc_oracle = tc.oracle.clone().unwrap();
    let inst = input_instance(&tc.program, "S(a,b). S(b,c).");
    let v = check_coordination_free(
        &tc.program,
        &path3(),
        &inst,
        &CheckOptions::default(),
        &|i| tc_oracle(i),
    )
    .unwrap();
    ok &= v.result == VerdictKind::WitnessFound;
    let full = HorizontalPartition::full_replication(&inst, path3().nodes());
    ok &= heartbeat_only(&tc.program, &path3(), &full) == tc_oracle(&inst);

    // a_or_b: the split partition is a witness...
    let ab = corpus_entry("a_or_b_nonempty").unwrap();
    let ab_oracle = ab.oracle.clone().unwrap();
    let inst = input_instance(&ab.program, "A(a). B(b).");
    let split = HorizontalPartition::parse(
        "node n1 { A(a). } node n2 { B(b). }",
        Arc::new(ab.program.schema().input().clone()),
    )
    .unwrap();
    ok &= heartbeat_only(&ab.program, &path2(), &split) == unit;
    let v = check_coordination_free(
        &ab.program,
        &path2(),
        &inst,
        &CheckOptions { exhaustive: true, ..CheckOptions::default() },
        &|i| ab_oracle(i),
    )
    .unwrap();
    ok &= v.result == VerdictKind::WitnessFound;
    // ...but full replication is not: a node holding both relations
    // coordinates with the rest of the network first.
    let full = HorizontalPartition::full_replication(&inst, path2().nodes());
    ok &= heartbeat_only(&ab.program, &path2(), &full) != unit;

    // emptiness needs coordination exactly where the answer is true.
    let em = corpus_entry("emptiness").unwrap();
    let em_oracle = em.oracle.clone().unwrap();
    let v = check_coordination_free(
        &em.program,
        &path2(),
        &input_instance(&em.program, ""),
        &CheckOptions { exhaustive: true, ..CheckOptions::default() },
        &|i| em_oracle(i),
    )
    .unwrap();
    ok &= v.result == VerdictKind::NoWitness;

    // identity_ping: no witness on any partition of one or two facts.
    let ip = corpus_entry("identity_ping").unwrap();
    let ip_oracle = ip.oracle.clone().unwrap();
    for text in ["S(a).", "S(a). S(b)."] {
        let v = check_coordination_free(
            &ip.program,
            &path2(),
            &input_instance(&ip.program, text),
            &CheckOptions { exhaustive: true, ..CheckOptions::default() },
            &|i| ip_oracle(i),
        )
        .unwrap();
        ok &= v.result == VerdictKind::NoWitness;
    }
    report(6, "coordination suite", ok);
}

fn random_fact(rng: &mut ChaCha8Rng, rel: &str, arity: usize) -> String {
    let elems = ["a", "b", "c"];
    let args: Vec<&str> = (0..arity).map(|_| elems[rng.gen_range(0..3)]).collect();
    format!("{rel}({}). ", args.join(","))
}

#[test]
fn a07_calm_suite() {
    // The oblivious entries that compute a query (have an oracle):
    // monotone over 100 random I ⊆ J pairs, and full replication is a
    // heartbeat-only witness.
    let mut ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(0xa7);
    for (name, arity) in [("eq_select", 2), ("tc_flood", 2), ("flood_plain", 1), ("datalog_runner", 2)] {
        let entry = corpus_entry(name).unwrap();
        ok &= entry.program.flags().oblivious;
        let oracle = entry.oracle.clone().unwrap();
        let mut pairs = Vec::new();
        for _ in 0..100 {
            let large_text: String =
                (0..rng.gen_range(1..=4)).map(|_| random_fact(&mut rng, "S", arity)).collect();
            let large = input_instance(&entry.program, &large_text);
            let small_text: String = large
                .facts()
                .filter(|_| rng.gen_bool(0.5))
                .map(|f| format!("{f}. "))
                .collect();
            let small = input_instance(&entry.program, &small_text);
            pairs.push((small, large));
        }
        let v = check_monotone(&entry.program, &path2(), &pairs, &CheckOptions::default()).unwrap();
        ok &= v.result == VerdictKind::Pass && v.inconclusive_cells == 0;

        for k in 0..5 {
            let text: String =
                (0..=k % 3).map(|_| random_fact(&mut rng, "S", arity)).collect();
            let inst = input_instance(&entry.program, &text);
            let full = HorizontalPartition::full_replication(&inst, path3().nodes());
            ok &= heartbeat_only(&entry.program, &path3(), &full) == oracle(&inst);
        }
    }

    // emptiness is not oblivious and fails monotonicity on ∅ ⊂ {S(a)}.
    let em = corpus_entry("emptiness").unwrap();
    ok &= !em.program.flags().oblivious;
    let pair = (
        input_instance(&em.program, ""),
        input_instance(&em.program, "S(a)."),
    );
    let v = check_monotone(&em.program, &path2(), &[pair], &CheckOptions::default()).unwrap();
    ok &= v.result == VerdictKind::Fail;
    report(7, "calm suite", ok);
}

#[test]
fn a08_adversarial_input_extension() {
    let mut ok = true;
    for (salt, name) in [(0u64, "tc_flood"), (1, "datalog_runner")] {
        let entry = corpus_entry(name).unwrap();
        let oracle = entry.oracle.clone().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xa8 + salt);
        for k in 0..25u64 {
            let elems = ["a", "b", "c", "d", "e"];
            let edge = |rng: &mut ChaCha8Rng| {
                format!("S({},{}). ", elems[rng.gen_range(0..5)], elems[rng.gen_range(0..5)])
            };
            let i_text: String = (0..rng.gen_range(2..=4)).map(|_| edge(&mut rng)).collect();
            let extra: String = (0..rng.gen_range(1..=2)).map(|_| edge(&mut rng)).collect();
            let i = input_instance(&entry.program, &i_text);
            let j = input_instance(&entry.program, &format!("{i_text}{extra}"));
            let expected = oracle(&i);
            let pick = rng.gen_range(0..expected.len());
            let target = expected.iter().nth(pick).unwrap().clone();
            let opts = CheckOptions { seed: k, max_steps: 6000, ..CheckOptions::default() };
            let rep =
                adversarial_extension_replay(&entry.program, &path2(), &i, &j, &target, &opts)
                    .unwrap();
            ok &= rep.preserved;
        }
    }
    report(8, "adversarial input extension", ok);
}

#[test]
fn a09_ring_transplant_replay() {
    let mut ok = true;
    for name in ["tc_flood", "flood_plain"] {
        let entry = corpus_entry(name).unwrap();
        let arity = if name == "tc_flood" { 2 } else { 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(0xa9);
        for _ in 0..10 {
            let i_text: String =
                (0..rng.gen_range(1..=3)).map(|_| random_fact(&mut rng, "S", arity)).collect();
            let extra: String =
                (0..rng.gen_range(1..=2)).map(|_| random_fact(&mut rng, "S", arity)).collect();
            let i = input_instance(&entry.program, &i_text);
            let j = input_instance(&entry.program, &format!("{i_text}{extra}"));
            let rep = ring_fifo_replay(&entry.program, &i, &j, 64).unwrap();
            ok &= rep.matched && !rep.vacuous;
        }
    }
    report(9, "ring transplant replay", ok);
}

// --- random positive Datalog programs with a semi-naive reference -----------

#[derive(Clone)]
struct MiniAtom {
    is_idb: bool,
    args: Vec<usize>,
}

#[derive(Clone)]
struct MiniRule {
    head: Vec<usize>,
    body: Vec<MiniAtom>,
}

const VARS: [&str; 3] = ["x", "y", "z"];

fn render(rules: &[MiniRule]) -> String {
    let mut out = String::new();
    for r in rules {
        let atom = |is_idb: bool, args: &[usize]| {
            format!(
                "{}({})",
                if is_idb { "p" } else { "e" },
                args.iter().map(|v| VARS[*v]).collect::<Vec<_>>().join(",")
            )
        };
        let body: Vec<String> = r.body.iter().map(|a| atom(a.is_idb, &a.args)).collect();
        out.push_str(&format!("{} :- {}.\n", atom(true, &r.head), body.join(", ")));
    }
    out
}

/// Semi-naive fixpoint: each round joins one delta atom with totals.
fn semi_naive(rules: &[MiniRule], edb: &BTreeSet<Vec<String>>) -> BTreeSet<Vec<String>> {
    let mut p: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut delta_p: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut delta_e = edb.clone();
    loop {
        let mut derived: BTreeSet<Vec<String>> = BTreeSet::new();
        for r in rules {
            for focus in 0..r.body.len() {
                let mut stack: Vec<Vec<Option<String>>> = vec![vec![None; VARS.len()]];
                for (k, atom) in r.body.iter().enumerate() {
                    let rel: &BTreeSet<Vec<String>> = match (k == focus, atom.is_idb) {
                        (true, true) => &delta_p,
                        (true, false) => &delta_e,
                        (false, true) => &p,
                        (false, false) => edb,
                    };
                    let mut next = Vec::new();
                    for b in &stack {
                        'tuple: for t in rel {
                            let mut b2 = b.clone();
                            for (v, val) in atom.args.iter().zip(t) {
                                match &b2[*v] {
                                    Some(x) if x != val => continue 'tuple,
                                    Some(_) => {}
                                    None => b2[*v] = Some(val.clone()),
                                }
                            }
                            next.push(b2);
                        }
                    }
                    stack = next;
                }
                for b in stack {
                    derived.insert(
                        r.head.iter().map(|v| b[*v].clone().expect("range-restricted")).collect(),
                    );
                }
            }
        }
        let fresh: BTreeSet<Vec<String>> = derived.difference(&p).cloned().collect();
        delta_e.clear();
        if fresh.is_empty() {
            return p;
        }
        p.extend(fresh.iter().cloned());
        delta_p = fresh;
    }
}

#[test]
fn a10_datalog_runner_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa10);
    let mut ok = true;
    let mut done = 0;
    while done < 30 {
        let rules: Vec<MiniRule> = (0..rng.gen_range(1..=3))
            .map(|_| MiniRule {
                head: (0..2).map(|_| rng.gen_range(0..3)).collect(),
                body: (0..rng.gen_range(1..=2))
                    .map(|_| MiniAtom {
                        is_idb: rng.gen_bool(0.4),
                        args: (0..2).map(|_| rng.gen_range(0..3)).collect(),
                    })
                    .collect(),
            })
            .collect();
        if !rules.iter().any(|r| r.body.iter().any(|a| !a.is_idb)) {
            continue;
        }
        let text = render(&rules);
        let Ok(parsed) = relnet::parse::parse_rules(&text) else { continue };
        let Ok(query) = QueryProgram::new(parsed, Dialect::PositiveRecursive, "p", 2) else {
            continue;
        };
        let Ok(runner) = relnet::harness::build_datalog_runner(&query) else { continue };
        done += 1;

        let elems = ["a", "b", "c", "d"];
        let mut edb: BTreeSet<Vec<String>> = BTreeSet::new();
        for _ in 0..rng.gen_range(2..=5) {
            edb.insert(
                (0..2).map(|_| elems[rng.gen_range(0..4)].to_string()).collect(),
            );
        }
        let text: String = edb
            .iter()
            .map(|t| format!("e({}). ", t.join(",")))
            .collect();
        let inst = input_instance(&runner, &text);
        let expected: Tuples = semi_naive(&rules, &edb)
            .into_iter()
            .map(|t| t.iter().map(|e| DataElement::new(e)).collect())
            .collect();
        match distributed_output(&runner, &path3(), &inst, done as u64, 8000).unwrap() {
            Some(got) => ok &= got == expected,
            None => ok = false,
        }
    }
    report(10, "datalog runner equivalence", ok);
}

const CONTAINS_AB: &str = "
states q0 q1 qa qr
input a b
tape a b _
blank _
start q0
accept qa
delta q0 a -> q1 a R
delta q0 b -> q0 b R
delta q1 a -> q1 a R
delta q1 b -> qa b R
delta q0 _ -> qr _ L
delta q1 _ -> qr _ L
";

#[test]
fn a11_turing_machine_compilation() {
    let tm = parse_machine(CONTAINS_AB).unwrap();
    let program = build_tm_program(&tm).unwrap();
    let mut ok = true;

    let mut words = vec![String::new()];
    for len in 1..=6usize {
        words = words
            .iter()
            .flat_map(|w| ["a", "b"].iter().map(move |c| format!("{w}{c}")))
            .collect();
        if len < 2 {
            continue;
        }
        for w in &words {
            let got = derives_accept(&program, &word_structure(w), 40);
            ok &= got == run_machine(&tm, w, 1000);
            ok &= got == w.contains("ab");
        }
    }

    // Each spuriousness condition alone forces Accept on a rejected word.
    let base = word_structure("ba");
    ok &= !derives_accept(&program, &base, 40);
    let defects = [
        Fact::new("Begin", &["2"]),
        Fact::new("End", &["3"]),
        Fact::new("a", &["1"]),
        Fact::new("Tape", &["1", "3"]),
        Fact::new("Tape", &["5", "6"]),
        Fact::new("a", &["9"]),
    ];
    for d in &defects {
        let mut inst = base.clone();
        inst.insert(d.clone(), 0);
        ok &= derives_accept(&program, &inst, 40);
    }

    for w in ["ab", "bab", "aabb"] {
        let (stable, _) = check_eventual_consistency(&program, &word_structure(w), 200);
        ok &= stable;
    }
    report(11, "turing-machine compilation", ok);
}

#[test]
fn a12_trace_determinism() {
    let entry = corpus_entry("tc_flood").unwrap();
    let inst = input_instance(&entry.program, "S(a,b). S(b,c). S(c,a).");
    let mut ok = true;
    for (network, seed) in [(ring4(), 11u64), (path3(), 7u64)] {
        let partition = HorizontalPartition::round_robin(&inst, network.nodes());
        let reference = cell_run(&entry.program, &network, &partition, seed, 5000).to_jsonl();
        for _ in 0..5 {
            ok &= cell_run(&entry.program, &network, &partition, seed, 5000).to_jsonl()
                == reference;
        }
    }
    report(12, "trace determinism", ok);
}
