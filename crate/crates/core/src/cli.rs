//! The `catsav` command line: `count-walks`, `stcon`, `verify` and `bench`.
//!
//! Results go to stdout, diagnostics and the optional engine trace to
//! stderr, and metrics to a line-delimited JSON file. Exit codes: 0 success,
//! 1 property failure (`verify`), 2 usage or input error, 3 internal
//! invariant violation.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::ceil_log2;
use crate::catalyst::{CatalyticTape, PackedCatalyticTape, RegisterFile, TapeInit};
use crate::crt::{
    count_walks_exact_catalytic, decide_stcon, ExactCount, ExactOptions, ModuliPolicy, WalkQuery,
};
use crate::engine::{
    catalyst_bits_formula, frame_bits, program_tape_shape, BlockLayout, Direction, Executor,
    LineTrace, SpaceMeter, TraceSink,
};
use crate::extract::{Encoding, Fault, RunError};
use crate::graph::{corpus, parse_graph, DirectedGraph};
use crate::oracle;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PROPERTY: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "catsav",
    version,
    about = "Catalytic walk counting and st-connectivity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the exact number of length-ℓ walks from source to target.
    CountWalks(CountArgs),
    /// Print REACHABLE or UNREACHABLE.
    Stcon(StconArgs),
    /// Run the restoration, only-V, seed-invariance and oracle checks.
    Verify(VerifyArgs),
    /// Measure space over an (n, k, ℓ) grid and check the size formulas.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Partition parameter: vertices are grouped by residue mod k.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Tape initialization seed; 0 is the all-zeros tape.
    #[arg(long, default_value_t = 0, conflicts_with = "random_seed")]
    pub seed: u64,
    /// Draw the seed from entropy and echo it on stderr.
    #[arg(long)]
    pub random_seed: bool,
    /// Write line-delimited JSON metrics to this file.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Use the first 2n primes instead of the fewest that suffice.
    #[arg(long)]
    pub strict_paper: bool,
    /// Store the registers packed into a single integer.
    #[arg(long)]
    pub packed: bool,
    /// Stream every register update to stderr.
    #[arg(long)]
    pub trace: bool,
    /// One tape and thread per modulus.
    #[arg(long)]
    pub parallel_moduli: bool,
    /// Inject a fault, to see the restoration check fire.
    #[arg(long, value_enum)]
    pub fault: Option<FaultArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    SkipUncompute,
}

impl From<FaultArg> for Fault {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::SkipUncompute => Fault::SkipUncompute,
        }
    }
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub source: usize,
    #[arg(long)]
    pub target: usize,
    #[arg(long)]
    pub length: usize,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct StconArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub source: usize,
    #[arg(long)]
    pub target: usize,
    /// Exit 0 when reachable and 1 when not.
    #[arg(long)]
    pub exit_status: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Graph to check; without it the bundled corpus is used.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Also check this many seeded Erdős–Rényi graphs.
    #[arg(long, default_value_t = 0)]
    pub random_graphs: usize,
    #[arg(long, default_value_t = 2)]
    pub min_n: usize,
    #[arg(long, default_value_t = 8)]
    pub max_n: usize,
    #[arg(long, default_value_t = 0.3)]
    pub edge_probability: f64,
    #[arg(long, default_value_t = 1)]
    pub graph_seed: u64,
    /// Tape initializations per configuration.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// First tape seed; the rest follow consecutively.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub packed: bool,
    #[arg(long, value_enum)]
    pub fault: Option<FaultArg>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 16])]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4])]
    pub k: Vec<usize>,
    /// Edge probability of the benchmark graphs.
    #[arg(long, default_value_t = 0.3)]
    pub edge_probability: f64,
    #[arg(long, default_value_t = 1)]
    pub graph_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub packed: bool,
    /// Print JSON records instead of a table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

/// One run, as written to the metrics file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub command: String,
    pub n: usize,
    pub k: usize,
    pub length: usize,
    pub moduli: Vec<u64>,
    /// `(⌈log₂ ℓ⌉ + 2)·⌈n/k⌉·⌈log₂ q_max⌉`: the register-word tape size.
    pub catalyst_bits: u64,
    /// Bits of the tape actually allocated; below `catalyst_bits` when packed.
    pub tape_bits: u64,
    pub peak_workspace_bits: u64,
    pub peak_stack_depth: usize,
    pub frame_bits: u64,
    pub runs: usize,
    pub seed: u64,
    pub encoding: Encoding,
    pub wall_time_us: u64,
    pub result: String,
}

impl MetricsRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    fn from_count(
        command: &str,
        graph: &DirectedGraph,
        query: &WalkQuery,
        encoding: Encoding,
        count: &ExactCount,
        started: Instant,
        result: String,
    ) -> Self {
        let q_max = count.witness.moduli.iter().copied().max().unwrap_or(2);
        Self {
            command: command.to_string(),
            n: graph.vertex_count(),
            k: query.k,
            length: query.length,
            moduli: count.witness.moduli.clone(),
            catalyst_bits: catalyst_bits_formula(
                graph.vertex_count(),
                query.length,
                query.k,
                q_max,
            ),
            tape_bits: count.report.catalyst_bits,
            peak_workspace_bits: count.report.peak_workspace_bits,
            peak_stack_depth: count.report.peak_stack_depth,
            frame_bits: count.report.frame_bits,
            runs: count.report.runs,
            seed: query.seed,
            encoding,
            wall_time_us: started.elapsed().as_micros() as u64,
            result,
        }
    }
}

/// A command's failure, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Property(String),
    Invariant(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Property(_) => EXIT_PROPERTY,
            Failure::Invariant(_) => EXIT_INVARIANT,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Property(m) | Failure::Invariant(m) => m,
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        if e.is_invariant_violation() {
            Failure::Invariant(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn load_graph(path: &Path) -> Result<DirectedGraph, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_graph(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_metrics(path: Option<&Path>, records: &[MetricsRecord]) -> Result<(), Failure> {
    let Some(path) = path else { return Ok(()) };
    let mut text = String::new();
    for record in records {
        text.push_str(&record.to_json_line());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn encoding(packed: bool) -> Encoding {
    if packed {
        Encoding::Packed
    } else {
        Encoding::Plain
    }
}

impl EngineArgs {
    fn resolve_seed(&self, err: &mut dyn Write) -> u64 {
        if self.random_seed {
            let seed = rand::thread_rng().gen();
            let _ = writeln!(err, "seed: {seed}");
            seed
        } else {
            self.seed
        }
    }

    fn options<'a>(&self, trace: Option<&'a mut dyn TraceSink>) -> ExactOptions<'a> {
        ExactOptions {
            encoding: encoding(self.packed),
            policy: if self.strict_paper {
                ModuliPolicy::StrictPaper
            } else {
                ModuliPolicy::Minimal
            },
            parallel_moduli: self.parallel_moduli,
            fault: self.fault.map_or(Fault::None, Fault::from),
            trace,
        }
    }
}

fn count_walks(args: &CountArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let graph = load_graph(&args.graph)?;
    let query = WalkQuery {
        source: args.source,
        target: args.target,
        length: args.length,
        k: args.engine.k,
        seed: args.engine.resolve_seed(err),
    };
    let started = Instant::now();
    let mut sink = LineTrace(io::stderr());
    let trace = args.engine.trace.then_some(&mut sink as &mut dyn TraceSink);
    let count = count_walks_exact_catalytic(&graph, &query, args.engine.options(trace))?;
    let value = count.value.to_string();
    let _ = writeln!(out, "{value}");
    let record = MetricsRecord::from_count(
        "count-walks",
        &graph,
        &query,
        encoding(args.engine.packed),
        &count,
        started,
        value,
    );
    write_metrics(args.engine.metrics.as_deref(), &[record])
}

fn stcon(args: &StconArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, Failure> {
    let graph = load_graph(&args.graph)?;
    let seed = args.engine.resolve_seed(err);
    let started = Instant::now();
    let mut sink = LineTrace(io::stderr());
    let trace = args.engine.trace.then_some(&mut sink as &mut dyn TraceSink);
    let outcome = decide_stcon(
        &graph,
        args.source,
        args.target,
        args.engine.k,
        seed,
        args.engine.options(trace),
    )?;
    let verdict = if outcome.reachable {
        "REACHABLE"
    } else {
        "UNREACHABLE"
    };
    let _ = writeln!(out, "{verdict}");
    if let Some(count) = &outcome.count {
        let query = WalkQuery {
            source: args.source,
            target: args.target,
            length: graph.vertex_count() - 1,
            k: args.engine.k,
            seed,
        };
        let record = MetricsRecord::from_count(
            "stcon",
            &graph,
            &query,
            encoding(args.engine.packed),
            count,
            started,
            verdict.to_string(),
        );
        write_metrics(args.engine.metrics.as_deref(), &[record])?;
    }
    Ok(if args.exit_status && !outcome.reachable {
        1
    } else {
        EXIT_OK
    })
}

/// `{1, 2, ⌈√n⌉, n}`, restricted to `1..=n`.
pub fn partition_choices(n: usize) -> Vec<usize> {
    let root = (1..=n).find(|r| r * r >= n).unwrap_or(1);
    let mut ks: Vec<usize> = [1, 2, root, n].into_iter().filter(|&k| k <= n).collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

#[derive(Debug, Default)]
struct Tally {
    runs: usize,
    failures: Vec<String>,
}

impl Tally {
    fn record(&mut self, ok: bool, context: impl FnOnce() -> String) {
        self.runs += 1;
        if !ok {
            self.failures.push(context());
        }
    }
}

/// A forward run changes block `V` and nothing else.
fn only_v_holds<R: RegisterFile>(
    mut tape: R,
    graph: &DirectedGraph,
    length: usize,
    i: usize,
    j: usize,
    k: usize,
) -> Result<bool, RunError> {
    let before = tape.values();
    let mut meter = SpaceMeter::new(tape.catalyst_bits());
    Executor::new(graph, k)?.run_program(
        &mut tape,
        length,
        i,
        j,
        Direction::Forward,
        &mut meter,
    )?;
    let after = tape.values();
    let regs = tape.regs_per_block();
    Ok(before
        .chunks(regs)
        .zip(after.chunks(regs))
        .enumerate()
        .all(|(block, (b, a))| block == BlockLayout::V || b == a))
}

fn verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    let mut graphs = match &args.graph {
        Some(path) => vec![(path.display().to_string(), load_graph(path)?)],
        None => corpus::bundled(),
    };
    if args.random_graphs > 0 {
        if args.min_n == 0 || args.min_n > args.max_n {
            return Err(Failure::Input(format!(
                "empty vertex range {}..={}",
                args.min_n, args.max_n
            )));
        }
        graphs.extend(corpus::erdos_renyi_family(
            args.random_graphs,
            args.min_n..=args.max_n,
            args.edge_probability,
            args.graph_seed,
        ));
    }
    if args.seeds == 0 {
        return Err(Failure::Input("--seeds must be at least 1".into()));
    }
    let encoding = encoding(args.packed);
    let fault = args.fault.map_or(Fault::None, Fault::from);
    let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();

    let mut restoration = Tally::default();
    let mut only_v = Tally::default();
    let mut invariance = Tally::default();
    let mut agreement = Tally::default();
    let mut records = Vec::new();

    for (name, graph) in &graphs {
        let n = graph.vertex_count();
        let table = oracle::WalkTable::build(graph, n);
        let mut pick = ChaCha8Rng::seed_from_u64(args.graph_seed ^ n as u64);
        for length in 1..=n {
            for k in partition_choices(n) {
                let (s, t) = (pick.gen_range(0..n), pick.gen_range(0..n));
                let mut values: Vec<Option<BigUint>> = Vec::new();
                for &seed in &seeds {
                    let query = WalkQuery {
                        source: s,
                        target: t,
                        length,
                        k,
                        seed,
                    };
                    let replay =
                        || format!("graph={name} length={length} k={k} s={s} t={t} seed={seed}");
                    let started = Instant::now();
                    let options = ExactOptions {
                        encoding,
                        fault,
                        ..Default::default()
                    };
                    match count_walks_exact_catalytic(graph, &query, options) {
                        Ok(count) => {
                            restoration.record(true, replay);
                            records.push(MetricsRecord::from_count(
                                "verify",
                                graph,
                                &query,
                                encoding,
                                &count,
                                started,
                                count.value.to_string(),
                            ));
                            values.push(Some(count.value));
                        }
                        Err(e @ RunError::NotRestored { .. }) => {
                            restoration.record(false, || format!("{} ({e})", replay()));
                            values.push(None);
                        }
                        Err(e) => return Err(e.into()),
                    }

                    let (blocks, regs) = program_tape_shape(n, length, k);
                    let q = crate::crt::choose_moduli(n, length)[0];
                    let init = TapeInit::from_seed(seed);
                    let (i, j) = (s % k, t % k);
                    let holds = match encoding {
                        Encoding::Plain => only_v_holds(
                            CatalyticTape::allocate(blocks, regs, q, init)
                                .map_err(RunError::from)?,
                            graph,
                            length,
                            i,
                            j,
                            k,
                        )?,
                        Encoding::Packed => only_v_holds(
                            PackedCatalyticTape::allocate(blocks, regs, q, init)
                                .map_err(RunError::from)?,
                            graph,
                            length,
                            i,
                            j,
                            k,
                        )?,
                    };
                    only_v.record(holds, replay);
                }
                let context = || format!("graph={name} length={length} k={k} s={s} t={t}");
                let first = values[0].clone();
                invariance.record(
                    first.is_some() && values.iter().all(|v| *v == first),
                    || {
                        format!(
                            "{} seeds={}..{}",
                            context(),
                            seeds[0],
                            seeds[seeds.len() - 1]
                        )
                    },
                );
                let expected = table.get(length, s, t);
                agreement.record(first.as_ref() == Some(expected), || {
                    format!(
                        "{} seed={} expected={expected} found={}",
                        context(),
                        seeds[0],
                        first.map_or("none".into(), |v| v.to_string())
                    )
                });
            }
        }
    }

    let mut failed = false;
    for (label, tally) in [
        ("restoration", &restoration),
        ("only-V", &only_v),
        ("seed-invariance", &invariance),
        ("oracle-agreement", &agreement),
    ] {
        let verdict = if tally.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        let _ = writeln!(
            out,
            "{label:<17} {verdict} {}/{} checks",
            tally.runs - tally.failures.len(),
            tally.runs
        );
        for failure in tally.failures.iter().take(5) {
            let _ = writeln!(out, "  replay: {failure}");
        }
        failed |= !tally.failures.is_empty();
    }
    let _ = writeln!(
        out,
        "{} graphs, {} seed-invariance repetitions per configuration",
        graphs.len(),
        seeds.len()
    );
    write_metrics(args.metrics.as_deref(), &records)?;
    Ok(if failed { EXIT_PROPERTY } else { EXIT_OK })
}

/// `{2, n/2, n}` with duplicates and lengths below 1 dropped.
pub fn bench_lengths(n: usize) -> Vec<usize> {
    let mut lengths: Vec<usize> = [2, n / 2, n]
        .into_iter()
        .filter(|&l| l >= 1 && l <= n)
        .collect();
    lengths.sort_unstable();
    lengths.dedup();
    lengths
}

fn bench(args: &BenchArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    let encoding = encoding(args.packed);
    let mut records = Vec::new();
    let mut violations = Vec::new();
    if !args.json {
        let _ = writeln!(
            out,
            "{:>4} {:>3} {:>4} {:>7} {:>9} {:>9} {:>6} {:>6} {:>7}",
            "n", "k", "len", "primes", "catalyst", "workspace", "depth", "frame", "runs"
        );
    }
    for &n in &args.n {
        let graph = corpus::erdos_renyi(n, args.edge_probability, args.graph_seed);
        for &k in &args.k {
            if k == 0 || k > n {
                return Err(Failure::Input(format!("k = {k} outside 1..={n}")));
            }
            for length in bench_lengths(n) {
                let query = WalkQuery {
                    source: 0,
                    target: n - 1,
                    length,
                    k,
                    seed: args.seed,
                };
                let started = Instant::now();
                let options = ExactOptions {
                    encoding,
                    ..Default::default()
                };
                let count = count_walks_exact_catalytic(&graph, &query, options)?;
                let record = MetricsRecord::from_count(
                    "bench",
                    &graph,
                    &query,
                    encoding,
                    &count,
                    started,
                    count.value.to_string(),
                );

                let cell = format!("n={n} k={k} length={length}");
                let depth = ceil_log2(length as u64) as usize;
                if record.peak_stack_depth != depth {
                    violations.push(format!(
                        "{cell}: stack depth {} != {depth}",
                        record.peak_stack_depth
                    ));
                }
                if record.frame_bits != frame_bits(k) {
                    violations.push(format!("{cell}: frame bits {}", record.frame_bits));
                }
                if encoding == Encoding::Plain && record.tape_bits != record.catalyst_bits {
                    violations.push(format!(
                        "{cell}: tape has {} bits, formula gives {}",
                        record.tape_bits, record.catalyst_bits
                    ));
                }
                if record.peak_workspace_bits != count.expected_peak_workspace_bits {
                    violations.push(format!(
                        "{cell}: workspace {} != inventory {}",
                        record.peak_workspace_bits, count.expected_peak_workspace_bits
                    ));
                }

                if args.json {
                    let _ = writeln!(out, "{}", record.to_json_line());
                } else {
                    let _ = writeln!(
                        out,
                        "{:>4} {:>3} {:>4} {:>7} {:>9} {:>9} {:>6} {:>6} {:>7}",
                        n,
                        k,
                        length,
                        record.moduli.len(),
                        record.catalyst_bits,
                        record.peak_workspace_bits,
                        record.peak_stack_depth,
                        record.frame_bits,
                        record.runs
                    );
                }
                records.push(record);
            }
        }
    }
    write_metrics(args.metrics.as_deref(), &records)?;
    if violations.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(Failure::Invariant(violations.join("\n")))
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match &cli.command {
        Command::CountWalks(args) => count_walks(args, out, err).map(|()| EXIT_OK),
        Command::Stcon(args) => stcon(args, out, err),
        Command::Verify(args) => verify(args, out),
        Command::Bench(args) => bench(args, out),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message());
            failure.exit_code()
        }
    }
}

/// Parses the process arguments and runs; clap handles `--help` and usage
/// errors itself (exit 2).
pub fn main() -> u8 {
    let cli = Cli::parse();
    run(&cli, &mut io::stdout().lock(), &mut io::stderr())
}
