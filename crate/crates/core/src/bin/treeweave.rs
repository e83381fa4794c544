//! `treeweave` — experiment runner.
//!
//! Exit status: 0 success, 1 scenario/run failure (including lemma
//! violations), 2 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use treeweave::churn::{run_batch, Adversary, ScenarioConfig};
use treeweave::graph::EXACT_EXPANSION_CAP;
use treeweave::lemmas::{self, LemmaReport};
use treeweave::mixing::convergence_trace;
use treeweave::pairing::{contract_using, Pairing, RootLinks};
use treeweave::report::{format_sig9, gnuplot_series, summarize, summary_json, write_trace_csv};
use treeweave::rng::{rng_from_seed, run_seed};
use treeweave::spectral::DEFAULT_TOLERANCE;
use treeweave::{Error, VirtualTree};

#[derive(Parser)]
#[command(name = "treeweave", version, about = "Tree virtualization expansion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batch churn scenarios: trace CSV plus summary JSON.
    Simulate(SimulateArgs),
    /// Exact node expansion of one random contraction (small trees).
    Expansion(ExpansionArgs),
    /// λ₂ per mixing round, starting from the canonical pairing.
    Mixconv(MixconvArgs),
    /// Boundary-inequality sweeps with pass/fail counts.
    Lemmas(LemmasArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Master seed; falls back to TREEWEAVE_SEED, then 1.
    #[arg(long, env = "TREEWEAVE_SEED", default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct LinksArg {
    /// Adjacencies of the duplicate root slot: shared | primary_only.
    #[arg(long, default_value_t = RootLinks::PrimaryOnly)]
    root_links: RootLinks,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 512)]
    leaves: usize,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Joins and leaves per cycle, as a fraction of the initial population.
    #[arg(long, default_value_t = 0.0)]
    churn: f64,
    #[arg(long, default_value_t = 7)]
    cycle: usize,
    #[arg(long, default_value_t = Adversary::HighestH)]
    adversary: Adversary,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    links: LinksArg,
    /// Worker threads (defaults to available parallelism).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Trace CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Also write `<out stem>.run<k>.dat` (round, λ₂) files next to --out.
    #[arg(long, requires = "out")]
    gnuplot: bool,
}

#[derive(Args)]
struct ExpansionArgs {
    #[arg(long, default_value_t = 8)]
    leaves: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    links: LinksArg,
}

#[derive(Args)]
struct MixconvArgs {
    #[arg(long, default_value_t = 512)]
    leaves: usize,
    /// Mixing rounds (default 4·⌈log₂ leaves⌉).
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    links: LinksArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// λ₂ level a run must reach to count as mixed.
    #[arg(long, default_value_t = 0.45)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LemmasArgs {
    /// Complete tree sizes to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16])]
    leaves: Vec<usize>,
    /// Samples for trees too large for the exhaustive occupied-subtree sweep.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Debug)]
enum Failure {
    Sim(Error),
    Io(PathBuf, io::Error),
    Violations(u64),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Sim(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Expansion(a) => expansion(a),
        Command::Mixconv(a) => mixconv(a),
        Command::Lemmas(a) => lemma_sweeps(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match f {
                Failure::Sim(e) => eprintln!("treeweave: {e}"),
                Failure::Io(p, e) => eprintln!("treeweave: {}: {e}", p.display()),
                Failure::Violations(n) => eprintln!("treeweave: {n} lemma violations"),
            }
            ExitCode::from(1)
        }
    }
}

fn jobs_or_default(jobs: Option<u64>) -> usize {
    jobs.map(|j| j as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(path.to_owned(), e))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents).map_err(|e| Failure::Io(path.to_owned(), e))
}

fn simulate(a: SimulateArgs) -> CmdResult {
    let config = ScenarioConfig {
        initial_leaves: a.leaves,
        total_rounds: a.rounds,
        churn_fraction: a.churn,
        cycle_length: a.cycle,
        seed: a.seed.seed,
        runs: a.runs as usize,
        adversary: a.adversary,
        root_links: a.links.root_links,
        ..ScenarioConfig::default()
    };
    let traces = run_batch(&config, jobs_or_default(a.jobs))?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            write_trace_csv(&mut w, &traces)?;
            w.flush().map_err(|e| Failure::Io(path.clone(), e))?;
        }
        None => write_trace_csv(io::stdout().lock(), &traces)?,
    }
    if a.gnuplot {
        let out = a.out.as_deref().expect("clap enforces --out");
        let stem = out.file_stem().map_or("trace".into(), |s| s.to_string_lossy());
        for run in 0..config.runs {
            let path = out.with_file_name(format!("{stem}.run{run}.dat"));
            write_file(&path, &gnuplot_series(&traces, run))?;
        }
    }
    let summary = summarize(&traces)?;
    if let Some(path) = &a.summary {
        let mut json = summary_json(&config, &summary)?;
        json.push('\n');
        write_file(path, &json)?;
    }
    let p = summary.pooled;
    eprintln!(
        "{} runs x {} rounds: lambda2 min {} max {} mean {} stddev {}",
        config.runs,
        config.total_rounds,
        format_sig9(p.min),
        format_sig9(p.max),
        format_sig9(p.mean),
        format_sig9(p.stddev)
    );
    Ok(())
}

fn expansion(a: ExpansionArgs) -> CmdResult {
    let tree = VirtualTree::build_complete(a.leaves)?;
    let pairing = Pairing::random(&tree, &mut rng_from_seed(a.seed.seed));
    let g = contract_using(&tree, &pairing, a.links.root_links)?;
    let h = g.exact_node_expansion(EXACT_EXPANSION_CAP)?;
    let witness: Vec<String> = h.witness.iter().map(|&v| g.label(v).to_string()).collect();
    println!("leaves {} seed {}", a.leaves, a.seed.seed);
    println!("edges {}", g.num_edges());
    println!("h {} ({})", h.value, format_sig9(*h.value.numer() as f64 / *h.value.denom() as f64));
    println!("witness {{{}}}", witness.join(", "));
    println!("boundary {}", h.boundary_size);
    Ok(())
}

#[derive(Serialize)]
struct MixRow {
    run: usize,
    round: usize,
    lambda2: String,
    swaps: usize,
    displaced: usize,
}

fn mixconv(a: MixconvArgs) -> CmdResult {
    let rounds = a
        .rounds
        .unwrap_or(4 * a.leaves.next_power_of_two().trailing_zeros() as usize);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs_or_default(a.jobs))
        .build()
        .map_err(|e| Error::Scenario(format!("thread pool: {e}")))?;
    let runs = a.runs as usize;
    let seed = a.seed.seed;
    let links = a.links.root_links;
    let traces = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|run| {
                convergence_trace(a.leaves, rounds, links, DEFAULT_TOLERANCE, &mut rng_from_seed(run_seed(seed, run)))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Scenario(format!("writing CSV: {e}"));
    for (run, trace) in traces.iter().enumerate() {
        for p in trace {
            w.serialize(MixRow {
                run,
                round: p.round,
                lambda2: format_sig9(p.lambda2),
                swaps: p.swaps,
                displaced: p.displaced,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Scenario(format!("writing CSV: {e}")))?;

    let reached = traces
        .iter()
        .filter(|t| t.iter().any(|p| p.lambda2 >= a.threshold))
        .count();
    eprintln!(
        "{reached}/{runs} runs reached lambda2 >= {} within {rounds} rounds",
        format_sig9(a.threshold)
    );
    Ok(())
}

fn lemma_sweeps(a: LemmasArgs) -> CmdResult {
    let mut rng = rng_from_seed(a.seed.seed);
    let mut violations = 0;
    let mut print = |r: LemmaReport| {
        violations += r.violations;
        println!(
            "{:<28} leaves {:>4} checked {:>9} violations {:>3} {}",
            r.name,
            r.leaves,
            r.checked,
            r.violations,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    };
    for &n in &a.leaves {
        let tree = VirtualTree::build_complete(n)?;
        // the internal-set sweeps enumerate 2^(n-1) subsets
        if n <= 16 {
            print(lemmas::lemma_connected_boundary(&tree));
            print(lemmas::lemma_general_boundary(&tree));
            print(lemmas::corollary_subtree_boundary(&tree));
        }
        if n <= 8 {
            print(lemmas::lemma_occupied_exhaustive(&tree));
        } else {
            print(lemmas::lemma_occupied_sampled(&tree, a.samples, &mut rng));
        }
    }
    if violations > 0 {
        return Err(Failure::Violations(violations));
    }
    Ok(())
}
