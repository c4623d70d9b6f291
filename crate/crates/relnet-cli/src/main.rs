//! Command-line front end: parse program/network/instance files, run the
//! simulator, run the property checkers, and evaluate temporal programs.
//!
//! Exit codes: 0 pass/witness-found, 1 fail/no-witness, 2 inconclusive,
//! 64 malformed input files, 70 internal errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use relnet::data::{DataElement, Instance};
use relnet::dedalus::{
    build_tm_program, eval_dedalus, parse_dedalus, parse_machine, parse_temporal_instance,
};
use relnet::harness::{
    check_consistency, check_coordination_free, check_monotone, check_topology_independence,
    corpus, corpus_entry, distributed_output, CheckOptions, CheckVerdict, HorizontalPartition,
};
use relnet::netsim::{make_initial, run, Network, Scheduler};
use relnet::parse::parse_instance_with_schema;
use relnet::transducer::{parse_transducer, TransducerProgram};
use std::process::ExitCode;
use std::sync::Arc;

const EX_USAGE: u8 = 64;
const EX_SOFTWARE: u8 = 70;

#[derive(Parser)]
#[command(name = "relnet", about = "Simulate and check networks of relational transducers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedulerKind {
    Random,
    RoundRobin,
}

#[derive(Subcommand)]
enum Command {
    /// Run one distributed execution to quiescence and print the trace.
    Run(RunArgs),
    /// Empirical property checks over partitions and schedules.
    Check(CheckArgs),
    /// Run a built-in corpus program on a canned input.
    Demo {
        /// Corpus entry name (see `corpus-list`).
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the built-in program corpus.
    CorpusList,
    /// Temporal (timestamped) programs.
    #[command(subcommand)]
    Dedalus(DedalusCommand),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    program: String,
    #[arg(long)]
    network: String,
    #[arg(long)]
    instance: String,
    /// Explicit partition file (`node v { R(a,b). }`); overrides
    /// --partition-mode.
    #[arg(long)]
    partition: Option<String>,
    /// full | disjoint | one-node[:v] | random:<seed>
    #[arg(long, default_value = "disjoint")]
    partition_mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    max_steps: usize,
    #[arg(long, value_enum, default_value_t = SchedulerKind::Random)]
    scheduler: SchedulerKind,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct CheckArgs {
    /// consistency | topology | coordination | monotone
    property: String,
    #[arg(long)]
    program: Option<String>,
    /// Use a built-in corpus entry (program plus independent oracle)
    /// instead of --program.
    #[arg(long)]
    entry: Option<String>,
    #[arg(long)]
    network: Option<String>,
    /// Additional networks for the topology check.
    #[arg(long)]
    networks: Vec<String>,
    #[arg(long)]
    instance: Option<String>,
    /// The larger instance J for the monotonicity pair I ⊆ J.
    #[arg(long)]
    instance_large: Option<String>,
    #[arg(long, default_value_t = 48)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4000)]
    max_steps: usize,
    /// Fail instead of sampling when the partition space exceeds the budget.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand)]
enum DedalusCommand {
    /// Evaluate a temporal program on a timestamped instance.
    Run {
        #[arg(long)]
        program: String,
        #[arg(long)]
        instance: String,
        #[arg(long, default_value_t = 20)]
        max_time: u64,
    },
    /// Compile a Turing machine and run it on a word structure.
    Tm {
        #[arg(long)]
        machine: String,
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 100)]
        max_time: u64,
    },
}

enum CliError {
    /// Malformed input: parse errors, missing files, bad flag values.
    Usage(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EX_USAGE,
            CliError::Internal(_) => EX_SOFTWARE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

fn usage(context: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{context}: {err}"))
}

fn read(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| usage(path, e))
}

fn load_program(path: &str) -> Result<TransducerProgram, CliError> {
    parse_transducer(&read(path)?).map_err(|e| usage(path, e))
}

fn load_network(path: &str) -> Result<Network, CliError> {
    Network::parse(&read(path)?).map_err(|e| usage(path, e))
}

fn load_instance(path: &str, program: &TransducerProgram) -> Result<Instance, CliError> {
    let schema = Arc::new(program.schema().input().clone());
    parse_instance_with_schema(&read(path)?, schema).map_err(|e| usage(path, e))
}

fn make_partition(
    args: &RunArgs,
    program: &TransducerProgram,
    network: &Network,
    instance: &Instance,
) -> Result<HorizontalPartition, CliError> {
    if let Some(path) = &args.partition {
        let schema = Arc::new(program.schema().input().clone());
        let p = HorizontalPartition::parse(&read(path)?, schema).map_err(|e| usage(path, e))?;
        for v in p.nodes() {
            if !network.contains(v) {
                return Err(CliError::Usage(format!(
                    "partition names node `{v}` absent from the network"
                )));
            }
        }
        return Ok(p);
    }
    let nodes = network.nodes();
    match args.partition_mode.as_str() {
        "full" => Ok(HorizontalPartition::full_replication(instance, nodes)),
        "disjoint" => Ok(HorizontalPartition::round_robin(instance, nodes)),
        mode if mode == "one-node" || mode.starts_with("one-node:") => {
            let target = match mode.strip_prefix("one-node:") {
                Some(name) => {
                    let v = DataElement::new(name);
                    if !network.contains(&v) {
                        return Err(CliError::Usage(format!("unknown node `{name}`")));
                    }
                    v
                }
                None => nodes.iter().next().expect("nonempty network").clone(),
            };
            Ok(HorizontalPartition::all_at(instance, nodes, &target))
        }
        mode => match mode.strip_prefix("random:").and_then(|s| s.parse::<u64>().ok()) {
            Some(seed) => Ok(relnet::harness::sample_partitions(instance, nodes, 4, seed)
                .into_iter()
                .last()
                .expect("at least one sample")),
            None => Err(CliError::Usage(format!("unknown partition mode `{mode}`"))),
        },
    }
}

fn cmd_run(args: &RunArgs) -> Result<u8, CliError> {
    let program = load_program(&args.program)?;
    let network = load_network(&args.network)?;
    let instance = load_instance(&args.instance, &program)?;
    let partition = make_partition(args, &program, &network, &instance)?;
    let scheduler = match args.scheduler {
        SchedulerKind::Random => Scheduler::RandomFair { seed: args.seed, heartbeat_period: 2 },
        SchedulerKind::RoundRobin => Scheduler::RoundRobinFifo,
    };
    let initial = make_initial(&program, &network, partition.assignment())
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let trace = run(&program, &network, initial, &scheduler, args.max_steps)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    match args.format {
        Format::Text => print!("{}", trace.to_text()),
        Format::Jsonl => print!("{}", trace.to_jsonl()),
    }
    Ok(if trace.quiescence_index.is_some() { 0 } else { 2 })
}

fn finish_verdict(verdict: CheckVerdict, format: Format) -> u8 {
    match format {
        Format::Text => print!("{verdict}"),
        Format::Jsonl => println!("{}", verdict.to_json()),
    }
    verdict.exit_code() as u8
}

fn cmd_check(args: &CheckArgs) -> Result<u8, CliError> {
    let opts = CheckOptions {
        budget: args.budget,
        seed: args.seed,
        max_steps: args.max_steps,
        exhaustive: args.exhaustive,
    };
    let entry = match &args.entry {
        Some(name) => Some(corpus_entry(name).map_err(|e| usage("--entry", e))?),
        None => None,
    };
    let program = match (&entry, &args.program) {
        (Some(e), None) => e.program.clone(),
        (None, Some(path)) => load_program(path)?,
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --program or --entry".into(),
            ))
        }
    };
    let network = match &args.network {
        Some(path) => load_network(path)?,
        None => return Err(CliError::Usage("--network is required".into())),
    };
    let instance = match &args.instance {
        Some(path) => load_instance(path, &program)?,
        None => return Err(CliError::Usage("--instance is required".into())),
    };
    let internal = |e: relnet::harness::HarnessError| CliError::Internal(e.to_string());
    let verdict = match args.property.as_str() {
        "consistency" => check_consistency(&program, &network, &instance, &opts).map_err(internal)?,
        "topology" => {
            let mut networks = vec![network];
            for path in &args.networks {
                networks.push(load_network(path)?);
            }
            check_topology_independence(&program, &networks, &instance, &opts).map_err(internal)?
        }
        "coordination" => {
            // The expected output comes from the entry's oracle when
            // available, otherwise from one reference distributed run.
            let oracle: Box<dyn Fn(&Instance) -> relnet::data::Tuples> =
                match entry.as_ref().and_then(|e| e.oracle.clone()) {
                    Some(o) => Box::new(move |i: &Instance| o(i)),
                    None => {
                        let reference =
                            distributed_output(&program, &network, &instance, opts.seed, opts.max_steps)
                                .map_err(internal)?;
                        let Some(reference) = reference else {
                            eprintln!("reference run did not reach quiescence; raise --max-steps");
                            return Ok(2);
                        };
                        Box::new(move |_: &Instance| reference.clone())
                    }
                };
            check_coordination_free(&program, &network, &instance, &opts, &oracle)
                .map_err(internal)?
        }
        "monotone" => {
            let large = match &args.instance_large {
                Some(path) => load_instance(path, &program)?,
                None => {
                    return Err(CliError::Usage(
                        "monotone needs --instance (I) and --instance-large (J)".into(),
                    ))
                }
            };
            check_monotone(&program, &network, &[(instance, large)], &opts).map_err(internal)?
        }
        other => return Err(CliError::Usage(format!("unknown property `{other}`"))),
    };
    Ok(finish_verdict(verdict, args.format))
}

/// A small canned input per corpus entry, matching its input schema.
fn demo_instance(name: &str) -> &'static str {
    match name {
        "eq_select" => "S(a,a). S(a,b).",
        "tc_flood" | "datalog_runner" => "S(a,b). S(b,c). S(c,d).",
        "first_element" => "S(a). S(b).",
        "a_or_b_nonempty" => "A(a).",
        _ => "S(a). S(b).",
    }
}

fn cmd_demo(name: &str, seed: u64) -> Result<u8, CliError> {
    let entry = corpus_entry(name).map_err(|e| usage("demo", e))?;
    let schema = Arc::new(entry.program.schema().input().clone());
    let instance = parse_instance_with_schema(demo_instance(name), schema)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let network = Network::path(&["n1", "n2", "n3"]).expect("valid demo network");
    let partition = HorizontalPartition::round_robin(&instance, network.nodes());
    let initial = make_initial(&entry.program, &network, partition.assignment())
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let scheduler = Scheduler::RandomFair { seed, heartbeat_period: 2 };
    let trace = run(&entry.program, &network, initial, &scheduler, 5000)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    println!("# {} — {}", entry.name, entry.summary);
    println!("# input: {}", demo_instance(name));
    print!("{}", trace.to_text());
    Ok(if trace.quiescence_index.is_some() { 0 } else { 2 })
}

fn cmd_corpus_list() -> u8 {
    for e in corpus() {
        let flags = e.program.flags();
        println!(
            "{:16} oblivious={:5} inflationary={:5}  {}",
            e.name, flags.oblivious, flags.inflationary, e.summary
        );
    }
    0
}

fn cmd_dedalus(cmd: &DedalusCommand) -> Result<u8, CliError> {
    match cmd {
        DedalusCommand::Run { program, instance, max_time } => {
            let p = parse_dedalus(&read(program)?).map_err(|e| usage(program, e))?;
            let i = parse_temporal_instance(&read(instance)?).map_err(|e| usage(instance, e))?;
            print!("{}", eval_dedalus(&p, &i, *max_time));
            Ok(0)
        }
        DedalusCommand::Tm { machine, word, max_time } => {
            let tm = parse_machine(&read(machine)?).map_err(|e| usage(machine, e))?;
            let p = build_tm_program(&tm).map_err(|e| usage(machine, e))?;
            let out = eval_dedalus(&p, &relnet::dedalus::word_structure(word), *max_time);
            let accepted_at = (0..=*max_time)
                .find(|n| out.slice(*n).iter().any(|f| &*f.relation == "Accept"));
            match accepted_at {
                Some(n) => {
                    println!("accept at time {n}");
                    Ok(0)
                }
                None => {
                    println!("no accept within {max_time} steps");
                    Ok(1)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Check(args) => cmd_check(args),
        Command::Demo { name, seed } => cmd_demo(name, *seed),
        Command::CorpusList => Ok(cmd_corpus_list()),
        Command::Dedalus(cmd) => cmd_dedalus(cmd),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("relnet: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
