//! Networks of transducers: configurations, heartbeat/delivery transitions,
//! schedulers, finite run prefixes, and quiescence detection.

use crate::data::{DataElement, Fact, Instance, Tuples};
use crate::lex::{tokenize, Cursor, ParseError, Token};
use crate::transducer::{step, LocalState, TransducerError, TransducerProgram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error(transparent)]
    Transducer(#[from] TransducerError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("network is not connected")]
    Disconnected,
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("edge endpoint `{0}` is not a declared node")]
    UnknownNode(String),
    #[error("fact {0} is not in the buffer of node `{1}`")]
    FactNotInBuffer(String, String),
    #[error("initial inputs must cover exactly the network nodes (mismatch at `{0}`)")]
    InputCoverage(String),
}

/// A finite, connected, undirected graph of nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    nodes: BTreeSet<DataElement>,
    /// Unordered pairs stored with the smaller endpoint first.
    edges: BTreeSet<(DataElement, DataElement)>,
}

impl Network {
    pub fn new(
        nodes: impl IntoIterator<Item = DataElement>,
        edges: impl IntoIterator<Item = (DataElement, DataElement)>,
    ) -> Result<Network, NetError> {
        let nodes: BTreeSet<DataElement> = nodes.into_iter().collect();
        if nodes.is_empty() {
            return Err(NetError::EmptyNetwork);
        }
        let mut norm = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(NetError::SelfLoop(a.to_string()));
            }
            for e in [&a, &b] {
                if !nodes.contains(e) {
                    return Err(NetError::UnknownNode(e.to_string()));
                }
            }
            norm.insert(if a < b { (a, b) } else { (b, a) });
        }
        let net = Network { nodes, edges: norm };
        // Connectivity via search from an arbitrary node.
        let start = net.nodes.iter().next().expect("nonempty").clone();
        let mut seen = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for n in net.neighbors(&v) {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        if seen.len() != net.nodes.len() {
            return Err(NetError::Disconnected);
        }
        Ok(net)
    }

    /// Parse lines `node a` / `edge a b`; `%` starts a comment.
    pub fn parse(text: &str) -> Result<Network, NetError> {
        let mut cur = Cursor::new(tokenize(text)?);
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        while !cur.at_end() {
            if cur.eat_kw("node") {
                nodes.push(parse_node_name(&mut cur)?);
            } else if cur.eat_kw("edge") {
                let a = parse_node_name(&mut cur)?;
                let b = parse_node_name(&mut cur)?;
                edges.push((a, b));
            } else {
                return Err(cur.error("expected `node` or `edge`").into());
            }
        }
        Network::new(nodes, edges)
    }

    /// A single node with no edges.
    pub fn single(name: &str) -> Network {
        Network::new([DataElement::new(name)], []).expect("one node is a valid network")
    }

    /// Nodes connected in a line, in the given order.
    pub fn path(names: &[&str]) -> Result<Network, NetError> {
        let nodes: Vec<DataElement> = names.iter().map(|n| DataElement::new(n)).collect();
        let edges = nodes.windows(2).map(|w| (w[0].clone(), w[1].clone()));
        Network::new(nodes.clone(), edges.collect::<Vec<_>>())
    }

    /// Nodes connected in a cycle, in the given order.
    pub fn ring(names: &[&str]) -> Result<Network, NetError> {
        let nodes: Vec<DataElement> = names.iter().map(|n| DataElement::new(n)).collect();
        let mut edges: Vec<_> = nodes.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        if nodes.len() > 2 {
            edges.push((nodes[0].clone(), nodes[nodes.len() - 1].clone()));
        }
        Network::new(nodes.clone(), edges)
    }

    /// Every pair of nodes connected.
    pub fn clique(names: &[&str]) -> Result<Network, NetError> {
        let nodes: Vec<DataElement> = names.iter().map(|n| DataElement::new(n)).collect();
        let mut edges = Vec::new();
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                edges.push((nodes[i].clone(), nodes[j].clone()));
            }
        }
        Network::new(nodes.clone(), edges)
    }

    pub fn nodes(&self) -> &BTreeSet<DataElement> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(DataElement, DataElement)> {
        &self.edges
    }

    pub fn neighbors(&self, v: &DataElement) -> BTreeSet<DataElement> {
        self.edges
            .iter()
            .filter_map(|(a, b)| {
                if a == v {
                    Some(b.clone())
                } else if b == v {
                    Some(a.clone())
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn contains(&self, v: &DataElement) -> bool {
        self.nodes.contains(v)
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.nodes {
            writeln!(f, "node {n}")?;
        }
        for (a, b) in &self.edges {
            writeln!(f, "edge {a} {b}")?;
        }
        Ok(())
    }
}

fn parse_node_name(cur: &mut Cursor) -> Result<DataElement, ParseError> {
    match cur.next() {
        Some(s) => match s.tok {
            Token::Ident(v) => Ok(DataElement::new(&v)),
            Token::Nat(n) => Ok(DataElement::new(&n.to_string())),
            t => Err(ParseError::new(s.line, s.col, format!("expected a node name, found {t}"))),
        },
        None => Err(cur.error("expected a node name, found end of input")),
    }
}

/// A buffered message occurrence; `enqueued_at` is the global step counter
/// at enqueue time, used by the fairness audit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BufferedFact {
    pub fact: Fact,
    pub enqueued_at: usize,
}

/// Global state of a network: one local state and one message multiset per
/// node. Buffers are kept in arrival order; the multiset view is derived.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    states: BTreeMap<DataElement, LocalState>,
    bufs: BTreeMap<DataElement, VecDeque<BufferedFact>>,
    /// Number of transitions applied to reach this configuration.
    tick: usize,
}

impl Configuration {
    pub fn state(&self, v: &DataElement) -> &LocalState {
        &self.states[v]
    }

    pub fn states(&self) -> impl Iterator<Item = (&DataElement, &LocalState)> {
        self.states.iter()
    }

    pub fn buffer(&self, v: &DataElement) -> &VecDeque<BufferedFact> {
        &self.bufs[v]
    }

    /// Multiset view of a node's buffer.
    pub fn buffer_counts(&self, v: &DataElement) -> BTreeMap<Fact, usize> {
        let mut counts = BTreeMap::new();
        for b in &self.bufs[v] {
            *counts.entry(b.fact.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn multiplicity(&self, v: &DataElement, fact: &Fact) -> usize {
        self.bufs[v].iter().filter(|b| &b.fact == fact).count()
    }

    pub fn buffers_empty(&self) -> bool {
        self.bufs.values().all(|b| b.is_empty())
    }

    pub fn tick(&self) -> usize {
        self.tick
    }
}

/// Build the start configuration: per-node inputs, empty memory and buffers,
/// `Id` and `All` populated from the network.
pub fn make_initial(
    program: &TransducerProgram,
    network: &Network,
    inputs: &BTreeMap<DataElement, Instance>,
) -> Result<Configuration, NetError> {
    if let Some(v) = inputs.keys().find(|v| !network.contains(v)) {
        return Err(NetError::InputCoverage(v.to_string()));
    }
    if let Some(v) = network.nodes().iter().find(|v| !inputs.contains_key(*v)) {
        return Err(NetError::InputCoverage(v.to_string()));
    }
    let all: BTreeSet<DataElement> = network.nodes().clone();
    let mut states = BTreeMap::new();
    let mut bufs = BTreeMap::new();
    for v in network.nodes() {
        states.insert(
            v.clone(),
            LocalState::initial(program.schema(), v, &all, &inputs[v])?,
        );
        bufs.insert(v.clone(), VecDeque::new());
    }
    Ok(Configuration { states, bufs, tick: 0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum TransitionKind {
    #[serde(rename = "hb")]
    Heartbeat,
    #[serde(rename = "dlv")]
    Delivery,
}

/// One global transition: a heartbeat or a delivery at a single node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetTransition {
    pub kind: TransitionKind,
    pub node: DataElement,
    pub received: Option<Fact>,
    pub output: Tuples,
    pub sent: Instance,
}

fn propagate(
    network: &Network,
    bufs: &mut BTreeMap<DataElement, VecDeque<BufferedFact>>,
    node: &DataElement,
    sent: &Instance,
    now: usize,
) {
    // Multiset union: each sent fact adds one occurrence per neighbor.
    for n in network.neighbors(node) {
        let buf = bufs.get_mut(&n).expect("neighbor has a buffer");
        for fact in sent.facts() {
            buf.push_back(BufferedFact { fact, enqueued_at: now });
        }
    }
}

pub fn apply_heartbeat(
    program: &TransducerProgram,
    network: &Network,
    config: &Configuration,
    node: &DataElement,
) -> Result<(Configuration, NetTransition), NetError> {
    if !network.contains(node) {
        return Err(NetError::UnknownNode(node.to_string()));
    }
    let tr = step(program, &config.states[node], &program.schema().empty_messages())?;
    let mut next = config.clone();
    next.states.insert(node.clone(), tr.after);
    propagate(network, &mut next.bufs, node, &tr.sent, config.tick);
    next.tick += 1;
    Ok((
        next,
        NetTransition {
            kind: TransitionKind::Heartbeat,
            node: node.clone(),
            received: None,
            output: tr.output,
            sent: tr.sent,
        },
    ))
}

pub fn apply_delivery(
    program: &TransducerProgram,
    network: &Network,
    config: &Configuration,
    node: &DataElement,
    fact: &Fact,
) -> Result<(Configuration, NetTransition), NetError> {
    if !network.contains(node) {
        return Err(NetError::UnknownNode(node.to_string()));
    }
    let mut next = config.clone();
    let buf = next.bufs.get_mut(node).expect("node has a buffer");
    // Remove the oldest occurrence (multiset difference of one copy).
    let pos = buf
        .iter()
        .position(|b| &b.fact == fact)
        .ok_or_else(|| NetError::FactNotInBuffer(fact.to_string(), node.to_string()))?;
    buf.remove(pos);
    let mut received = program.schema().empty_messages();
    received.insert(fact.clone()).map_err(TransducerError::from)?;
    let tr = step(program, &config.states[node], &received)?;
    next.states.insert(node.clone(), tr.after);
    propagate(network, &mut next.bufs, node, &tr.sent, config.tick);
    next.tick += 1;
    Ok((
        next,
        NetTransition {
            kind: TransitionKind::Delivery,
            node: node.clone(),
            received: Some(fact.clone()),
            output: tr.output,
            sent: tr.sent,
        },
    ))
}

/// Result of iterating heartbeats at one node until the local state repeats.
pub struct HeartbeatClosure {
    /// All sends along the iteration were empty and a state revisit was
    /// reached within the bound.
    pub silent: bool,
    /// Union of outputs produced along the iteration.
    pub outputs: Tuples,
}

const CLOSURE_BOUND: usize = 512;

/// Iterate heartbeats from a local state until it revisits a previous state.
/// Deterministic, and the state space over a fixed domain is finite, so the
/// bound only guards against impractically large memories.
pub fn heartbeat_closure(
    program: &TransducerProgram,
    state: &LocalState,
) -> Result<HeartbeatClosure, NetError> {
    let mut seen: Vec<LocalState> = vec![state.clone()];
    let mut current = state.clone();
    let mut outputs = Tuples::new();
    for _ in 0..CLOSURE_BOUND {
        let tr = step(program, &current, &program.schema().empty_messages())?;
        outputs.extend(tr.output.iter().cloned());
        if !tr.sent.is_empty() {
            break;
        }
        if seen.contains(&tr.after) {
            return Ok(HeartbeatClosure { silent: true, outputs });
        }
        seen.push(tr.after.clone());
        current = tr.after;
    }
    Ok(HeartbeatClosure { silent: false, outputs })
}

/// Iterate heartbeats from a local state until it revisits a previous
/// state, ignoring sends (they would only fill buffers, which heartbeats
/// never read). Returns the per-step outputs in order.
pub fn heartbeat_trajectory(
    program: &TransducerProgram,
    state: &LocalState,
) -> Result<Vec<Tuples>, NetError> {
    let mut seen: Vec<LocalState> = vec![state.clone()];
    let mut current = state.clone();
    let mut outputs = Vec::new();
    for _ in 0..CLOSURE_BOUND {
        let tr = step(program, &current, &program.schema().empty_messages())?;
        outputs.push(tr.output);
        if seen.contains(&tr.after) {
            break;
        }
        seen.push(tr.after.clone());
        current = tr.after;
    }
    Ok(outputs)
}

/// True iff all buffers are empty and every node's heartbeat iteration
/// cycles without sending anything. From such a configuration only
/// heartbeat outputs (already determined per node) can ever appear.
pub fn detect_quiescence(
    program: &TransducerProgram,
    config: &Configuration,
) -> Result<bool, NetError> {
    Ok(quiescence_check(program, config)?.is_some())
}

/// As `detect_quiescence`, but on success returns the union of all closure
/// outputs, which a stopping rule must compare with the cumulative output.
pub fn quiescence_check(
    program: &TransducerProgram,
    config: &Configuration,
) -> Result<Option<Tuples>, NetError> {
    if !config.buffers_empty() {
        return Ok(None);
    }
    let mut outputs = Tuples::new();
    for state in config.states.values() {
        let c = heartbeat_closure(program, state)?;
        if !c.silent {
            return Ok(None);
        }
        outputs.extend(c.outputs);
    }
    Ok(Some(outputs))
}

/// A scripted scheduler directive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Directive {
    Heartbeat(DataElement),
    Deliver(DataElement, Fact),
}

#[derive(Clone, Debug)]
pub enum Scheduler {
    /// Seeded uniform choice among enabled actions, with forced heartbeats
    /// and deliveries to meet the fairness bounds.
    RandomFair { seed: u64, heartbeat_period: usize },
    /// Rounds of: heartbeat every node in order, then at every node deliver
    /// the oldest buffered fact or heartbeat again if the buffer is empty.
    RoundRobinFifo,
    /// Fixed directive list; the run stops when it is exhausted.
    Scripted(Vec<Directive>),
}

enum SchedulerState {
    RandomFair {
        rng: ChaCha8Rng,
        period: usize,
        last_hb: BTreeMap<DataElement, usize>,
    },
    RoundRobinFifo { pos: usize },
    Scripted { directives: Vec<Directive>, pos: usize },
}

impl SchedulerState {
    fn new(s: &Scheduler, network: &Network) -> SchedulerState {
        match s {
            Scheduler::RandomFair { seed, heartbeat_period } => SchedulerState::RandomFair {
                rng: ChaCha8Rng::seed_from_u64(*seed),
                period: (*heartbeat_period).max(1),
                last_hb: network.nodes().iter().map(|v| (v.clone(), 0)).collect(),
            },
            Scheduler::RoundRobinFifo => SchedulerState::RoundRobinFifo { pos: 0 },
            Scheduler::Scripted(d) => SchedulerState::Scripted {
                directives: d.clone(),
                pos: 0,
            },
        }
    }

    /// Pick the next action, or None to end the run.
    fn next(&mut self, network: &Network, config: &Configuration) -> Option<Directive> {
        match self {
            SchedulerState::RandomFair { rng, period, last_hb } => {
                let now = config.tick;
                let window = *period * network.nodes().len();
                // Forced heartbeat for the most overdue node.
                if let Some((v, _)) = last_hb
                    .iter()
                    .filter(|e| now.saturating_sub(*e.1) >= window)
                    .min_by_key(|e| (*e.1, e.0.clone()))
                {
                    let v = v.clone();
                    last_hb.insert(v.clone(), now);
                    return Some(Directive::Heartbeat(v));
                }
                // Forced delivery of the most overdue buffered occurrence.
                let overdue = network
                    .nodes()
                    .iter()
                    .filter_map(|v| {
                        config
                            .buffer(v)
                            .front()
                            .filter(|b| now.saturating_sub(b.enqueued_at) >= window)
                            .map(|b| (b.enqueued_at, v.clone(), b.fact.clone()))
                    })
                    .min();
                if let Some((_, v, f)) = overdue {
                    return Some(Directive::Deliver(v, f));
                }
                // Uniform choice among all enabled actions.
                let hb_actions = network.nodes().len();
                let dlv_actions: usize = network.nodes().iter().map(|v| config.buffer(v).len()).sum();
                let k = rng.gen_range(0..hb_actions + dlv_actions);
                if k < hb_actions {
                    let v = network.nodes().iter().nth(k).expect("index in range").clone();
                    last_hb.insert(v.clone(), now);
                    Some(Directive::Heartbeat(v))
                } else {
                    let mut k = k - hb_actions;
                    for v in network.nodes() {
                        let buf = config.buffer(v);
                        if k < buf.len() {
                            return Some(Directive::Deliver(v.clone(), buf[k].fact.clone()));
                        }
                        k -= buf.len();
                    }
                    unreachable!("index within total buffered occurrences")
                }
            }
            SchedulerState::RoundRobinFifo { pos } => {
                let n = network.nodes().len();
                let slot = *pos % (2 * n);
                *pos += 1;
                let v = network.nodes().iter().nth(slot % n).expect("slot in range").clone();
                if slot < n {
                    Some(Directive::Heartbeat(v))
                } else {
                    match config.buffer(&v).front() {
                        Some(b) => Some(Directive::Deliver(v, b.fact.clone())),
                        None => Some(Directive::Heartbeat(v)),
                    }
                }
            }
            SchedulerState::Scripted { directives, pos } => {
                let d = directives.get(*pos).cloned();
                *pos += 1;
                d
            }
        }
    }
}

/// A finite run prefix with its transitions and cumulative output.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub initial: Configuration,
    pub steps: Vec<NetTransition>,
    pub final_config: Configuration,
    pub cumulative_output: Tuples,
    /// Smallest step index m such that the output through m equals the full
    /// cumulative output, set when the run ended in detected quiescence.
    pub quiescence_index: Option<usize>,
}

/// Execute scheduler directives until quiescence is detected (and all
/// pending heartbeat-closure outputs have been produced), the scheduler
/// stops, or `max_steps` transitions have run.
pub fn run(
    program: &TransducerProgram,
    network: &Network,
    initial: Configuration,
    scheduler: &Scheduler,
    max_steps: usize,
) -> Result<RunTrace, NetError> {
    let mut sched = SchedulerState::new(scheduler, network);
    let mut config = initial.clone();
    let mut steps = Vec::new();
    let mut cumulative = Tuples::new();
    let mut quiesced = false;
    loop {
        if let Some(pending) = quiescence_check(program, &config)? {
            if pending.is_subset(&cumulative) {
                quiesced = true;
                break;
            }
        }
        if steps.len() >= max_steps {
            break;
        }
        let Some(directive) = sched.next(network, &config) else {
            break;
        };
        let (next, tr) = match directive {
            Directive::Heartbeat(v) => apply_heartbeat(program, network, &config, &v)?,
            Directive::Deliver(v, f) => apply_delivery(program, network, &config, &v, &f)?,
        };
        cumulative.extend(tr.output.iter().cloned());
        steps.push(tr);
        config = next;
    }
    let quiescence_index = quiesced.then(|| {
        let mut acc = Tuples::new();
        for (i, tr) in steps.iter().enumerate() {
            if acc == cumulative {
                return i;
            }
            acc.extend(tr.output.iter().cloned());
        }
        steps.len()
    });
    Ok(RunTrace {
        initial,
        steps,
        final_config: config,
        cumulative_output: cumulative,
        quiescence_index,
    })
}

fn tuple_strings(t: &Tuples) -> Vec<Vec<String>> {
    t.iter()
        .map(|tup| tup.iter().map(|e| e.to_string()).collect())
        .collect()
}

impl RunTrace {
    /// One JSON object per transition plus a trailer object.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, tr) in self.steps.iter().enumerate() {
            let line = serde_json::json!({
                "step": i,
                "kind": match tr.kind {
                    TransitionKind::Heartbeat => "hb",
                    TransitionKind::Delivery => "dlv",
                },
                "node": tr.node.to_string(),
                "recv": tr.received.as_ref().map(|f| f.to_string()),
                "out": tuple_strings(&tr.output),
                "sent": tr.sent.facts().map(|f| f.to_string()).collect::<Vec<_>>(),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        let trailer = serde_json::json!({
            "cumulative_output": tuple_strings(&self.cumulative_output),
            "quiescence_index": self.quiescence_index,
        });
        out.push_str(&trailer.to_string());
        out.push('\n');
        out
    }

    /// Human-readable rendering, one line per transition.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, tr) in self.steps.iter().enumerate() {
            let kind = match tr.kind {
                TransitionKind::Heartbeat => "hb ",
                TransitionKind::Delivery => "dlv",
            };
            let recv = tr
                .received
                .as_ref()
                .map(|f| format!(" recv {f}"))
                .unwrap_or_default();
            let outs: Vec<String> = tr
                .output
                .iter()
                .map(|t| {
                    let parts: Vec<String> = t.iter().map(|e| e.to_string()).collect();
                    format!("({})", parts.join(","))
                })
                .collect();
            let sent: Vec<String> = tr.sent.facts().map(|f| f.to_string()).collect();
            out.push_str(&format!(
                "{i:4} {kind} @{}{recv} out [{}] sent [{}]\n",
                tr.node,
                outs.join(" "),
                sent.join(" ")
            ));
        }
        let totals: Vec<String> = self
            .cumulative_output
            .iter()
            .map(|t| {
                let parts: Vec<String> = t.iter().map(|e| e.to_string()).collect();
                format!("({})", parts.join(","))
            })
            .collect();
        out.push_str(&format!(
            "cumulative output: [{}]; quiescence index: {}\n",
            totals.join(" "),
            self.quiescence_index
                .map(|i| i.to_string())
                .unwrap_or_else(|| "none".into())
        ));
        out
    }
}
