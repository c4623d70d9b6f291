//! Budgeted empirical checkers for consistency, network-topology
//! independence, coordination-freeness, and monotonicity. The properties
//! are undecidable in general, so every verdict is evidence, not proof.

use crate::data::{DataElement, Instance, Tuples};
use crate::harness::partitions::{
    enumerate_partitions, sample_partitions, HorizontalPartition,
};
use crate::harness::verdict::{CheckVerdict, Explored, Property, VerdictKind};
use crate::harness::HarnessError;
use crate::netsim::{heartbeat_trajectory, make_initial, run, Network, RunTrace, Scheduler};
use crate::transducer::TransducerProgram;
use std::collections::BTreeSet;

#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    /// Cap on the number of partitions explored per network.
    pub budget: usize,
    pub seed: u64,
    /// Step cap per run; hitting it without quiescence marks the cell
    /// inconclusive.
    pub max_steps: usize,
    /// Require exhaustive partition enumeration (error over budget) instead
    /// of falling back to sampling.
    pub exhaustive: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            budget: 48,
            seed: 0,
            max_steps: 4000,
            exhaustive: false,
        }
    }
}

pub(crate) fn partitions_for(
    instance: &Instance,
    nodes: &BTreeSet<DataElement>,
    opts: &CheckOptions,
) -> Result<Vec<HorizontalPartition>, HarnessError> {
    match enumerate_partitions(instance, nodes, opts.budget) {
        Ok(p) => Ok(p),
        Err(e) if opts.exhaustive => Err(e),
        Err(_) => Ok(sample_partitions(instance, nodes, opts.budget.max(3), opts.seed)),
    }
}

fn schedules(opts: &CheckOptions) -> Vec<(String, Scheduler)> {
    vec![
        (
            format!("random-fair(seed={},period=2)", opts.seed),
            Scheduler::RandomFair { seed: opts.seed, heartbeat_period: 2 },
        ),
        (
            format!("random-fair(seed={},period=4)", opts.seed ^ 0x9e37_79b9),
            Scheduler::RandomFair {
                seed: opts.seed ^ 0x9e37_79b9,
                heartbeat_period: 4,
            },
        ),
        ("round-robin-fifo".to_string(), Scheduler::RoundRobinFifo),
    ]
}

fn fmt_tuples(t: &Tuples) -> String {
    let parts: Vec<String> = t
        .iter()
        .map(|tup| {
            let elems: Vec<String> = tup.iter().map(|e| e.to_string()).collect();
            format!("({})", elems.join(","))
        })
        .collect();
    format!("[{}]", parts.join(" "))
}

fn one_cell(
    program: &TransducerProgram,
    network: &Network,
    partition: &HorizontalPartition,
    scheduler: &Scheduler,
    max_steps: usize,
) -> Result<RunTrace, HarnessError> {
    let init = make_initial(program, network, partition.assignment())?;
    Ok(run(program, network, init, scheduler, max_steps)?)
}

/// Run every (partition × schedule) cell and compare cumulative outputs at
/// quiescence; also returns the common output when they all agree.
fn consistency_cells(
    program: &TransducerProgram,
    network: &Network,
    instance: &Instance,
    opts: &CheckOptions,
) -> Result<(CheckVerdict, Option<Tuples>), HarnessError> {
    let parts = partitions_for(instance, network.nodes(), opts)?;
    let scheds = schedules(opts);
    let mut inconclusive = 0;
    let mut reference: Option<(String, Tuples)> = None;
    for p in &parts {
        for (desc, s) in &scheds {
            let trace = one_cell(program, network, p, s, opts.max_steps)?;
            let cell = format!("scheduler={desc}; partition={}", p.to_string().replace('\n', " "));
            if trace.quiescence_index.is_none() {
                inconclusive += 1;
                continue;
            }
            let out = trace.cumulative_output;
            match &reference {
                None => reference = Some((cell, out)),
                Some((ref_cell, ref_out)) if *ref_out != out => {
                    let verdict = CheckVerdict {
                        property: Property::Consistency,
                        result: VerdictKind::Fail,
                        evidence: vec![
                            format!("{ref_cell}; output={}", fmt_tuples(ref_out)),
                            format!("{cell}; output={}", fmt_tuples(&out)),
                        ],
                        inconclusive_cells: inconclusive,
                        explored: Explored {
                            partitions: parts.len(),
                            schedules: scheds.len(),
                            networks: 1,
                        },
                    };
                    return Ok((verdict, None));
                }
                Some(_) => {}
            }
        }
    }
    let common = reference.as_ref().map(|(_, out)| out.clone());
    let verdict = CheckVerdict {
        property: Property::Consistency,
        result: VerdictKind::Pass,
        evidence: Vec::new(),
        inconclusive_cells: inconclusive,
        explored: Explored {
            partitions: parts.len(),
            schedules: scheds.len(),
            networks: 1,
        },
    };
    Ok((verdict, common))
}

pub fn check_consistency(
    program: &TransducerProgram,
    network: &Network,
    instance: &Instance,
    opts: &CheckOptions,
) -> Result<CheckVerdict, HarnessError> {
    Ok(consistency_cells(program, network, instance, opts)?.0)
}

/// Consistent on each network, and the quiescent outputs agree across the
/// networks. The list should include the single-node network.
pub fn check_topology_independence(
    program: &TransducerProgram,
    networks: &[Network],
    instance: &Instance,
    opts: &CheckOptions,
) -> Result<CheckVerdict, HarnessError> {
    if networks.len() < 2 {
        return Err(HarnessError::Precondition(
            "topology independence needs at least two networks".into(),
        ));
    }
    let mut explored = Explored::default();
    let mut inconclusive = 0;
    let mut reference: Option<(usize, Tuples)> = None;
    for (idx, net) in networks.iter().enumerate() {
        let (verdict, common) = consistency_cells(program, net, instance, opts)?;
        explored.partitions += verdict.explored.partitions;
        explored.schedules = verdict.explored.schedules;
        explored.networks += 1;
        inconclusive += verdict.inconclusive_cells;
        if verdict.result == VerdictKind::Fail {
            return Ok(CheckVerdict {
                property: Property::TopologyIndependence,
                evidence: verdict.evidence,
                explored,
                inconclusive_cells: inconclusive,
                ..verdict
            });
        }
        let Some(out) = common else {
            inconclusive += 1;
            continue;
        };
        match &reference {
            None => reference = Some((idx, out)),
            Some((ref_idx, ref_out)) if *ref_out != out => {
                return Ok(CheckVerdict {
                    property: Property::TopologyIndependence,
                    result: VerdictKind::Fail,
                    evidence: vec![
                        format!(
                            "network #{ref_idx} ({} nodes): output={}",
                            networks[*ref_idx].nodes().len(),
                            fmt_tuples(ref_out)
                        ),
                        format!(
                            "network #{idx} ({} nodes): output={}",
                            net.nodes().len(),
                            fmt_tuples(&out)
                        ),
                    ],
                    inconclusive_cells: inconclusive,
                    explored,
                });
            }
            Some(_) => {}
        }
    }
    Ok(CheckVerdict {
        property: Property::TopologyIndependence,
        result: VerdictKind::Pass,
        evidence: Vec::new(),
        inconclusive_cells: inconclusive,
        explored,
    })
}

/// Union of outputs obtainable at a node by heartbeats alone, for every
/// node of a start configuration.
fn heartbeat_only_output(
    program: &TransducerProgram,
    network: &Network,
    partition: &HorizontalPartition,
) -> Result<Tuples, HarnessError> {
    let init = make_initial(program, network, partition.assignment())?;
    let mut out = Tuples::new();
    for (_, state) in init.states() {
        for step_out in heartbeat_trajectory(program, state)? {
            out.extend(step_out);
        }
    }
    Ok(out)
}

/// Search partitions for one on which heartbeat-only execution already
/// produces the whole query answer `oracle(instance)`.
pub fn check_coordination_free(
    program: &TransducerProgram,
    network: &Network,
    instance: &Instance,
    opts: &CheckOptions,
    oracle: &dyn Fn(&Instance) -> Tuples,
) -> Result<CheckVerdict, HarnessError> {
    let expected = oracle(instance);
    let parts = partitions_for(instance, network.nodes(), opts)?;
    for p in &parts {
        if heartbeat_only_output(program, network, p)? == expected {
            return Ok(CheckVerdict {
                property: Property::CoordinationFree,
                result: VerdictKind::WitnessFound,
                evidence: vec![format!(
                    "heartbeat-only run reaches {} on partition={}",
                    fmt_tuples(&expected),
                    p.to_string().replace('\n', " ")
                )],
                inconclusive_cells: 0,
                explored: Explored {
                    partitions: parts.len(),
                    schedules: 1,
                    networks: 1,
                },
            });
        }
    }
    Ok(CheckVerdict {
        property: Property::CoordinationFree,
        result: VerdictKind::NoWitness,
        evidence: vec![format!("expected output {}", fmt_tuples(&expected))],
        inconclusive_cells: 0,
        explored: Explored {
            partitions: parts.len(),
            schedules: 1,
            networks: 1,
        },
    })
}

/// The output the network computes on `instance`, via one concrete
/// consistent run; None if the run hit the step cap without quiescence.
pub fn distributed_output(
    program: &TransducerProgram,
    network: &Network,
    instance: &Instance,
    seed: u64,
    max_steps: usize,
) -> Result<Option<Tuples>, HarnessError> {
    let partition = HorizontalPartition::round_robin(instance, network.nodes());
    let sched = Scheduler::RandomFair { seed, heartbeat_period: 2 };
    let trace = one_cell(program, network, &partition, &sched, max_steps)?;
    Ok(trace.quiescence_index.map(|_| trace.cumulative_output))
}

/// For each pair I ⊆ J, check Q(I) ⊆ Q(J) where Q is computed by running
/// the network to quiescence.
pub fn check_monotone(
    program: &TransducerProgram,
    network: &Network,
    pairs: &[(Instance, Instance)],
    opts: &CheckOptions,
) -> Result<CheckVerdict, HarnessError> {
    let mut inconclusive = 0;
    for (small, large) in pairs {
        if !small.is_subset(large) {
            return Err(HarnessError::Precondition(
                "monotonicity pairs must satisfy I ⊆ J".into(),
            ));
        }
        let out_small = distributed_output(program, network, small, opts.seed, opts.max_steps)?;
        let out_large = distributed_output(program, network, large, opts.seed, opts.max_steps)?;
        match (out_small, out_large) {
            (Some(a), Some(b)) => {
                if !a.is_subset(&b) {
                    return Ok(CheckVerdict {
                        property: Property::Monotone,
                        result: VerdictKind::Fail,
                        evidence: vec![
                            format!("Q(I)={}", fmt_tuples(&a)),
                            format!("Q(J)={} does not contain it", fmt_tuples(&b)),
                        ],
                        inconclusive_cells: inconclusive,
                        explored: Explored {
                            partitions: pairs.len(),
                            schedules: 1,
                            networks: 1,
                        },
                    });
                }
            }
            _ => inconclusive += 1,
        }
    }
    Ok(CheckVerdict {
        property: Property::Monotone,
        result: VerdictKind::Pass,
        evidence: Vec::new(),
        inconclusive_cells: inconclusive,
        explored: Explored {
            partitions: pairs.len(),
            schedules: 1,
            networks: 1,
        },
    })
}
