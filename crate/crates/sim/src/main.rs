use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use onebit_core::bounds::{cor1_report, cor2_report, lemma1_bound, lemma2_report, numplays_report};
use onebit_core::DecisionKind;
use onebit_sim::experiment::{overlay_bounds, run_experiment_on, write_outputs, ExperimentConfig, Policy};
use onebit_sim::instances::InstanceSource;
use onebit_sim::trace::{parse_rewards, render, seeded_rewards, trace};
use onebit_sim::verify::{self, Intensity, Suite, VerifyOptions};

#[derive(Parser)]
#[command(name = "onebit", version, about = "Bandits with one bit of feedback per pull")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo regret curves written as CSV plus a JSON sidecar
    Run(RunArgs),
    /// Evaluate a regret bound and print it as JSON
    Bounds(BoundsArgs),
    /// Run the built-in property checks
    Verify(VerifyArgs),
    /// Print the messages one follower sends, pull by pull
    Trace(TraceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in instance 1..4 or a JSON instance file
    #[arg(long)]
    instance: String,
    /// Comma-separated: lf-ucb1, lf-klucb, mab-ucb1, mab-klucb
    #[arg(long, value_delimiter = ',', required = true)]
    policies: Vec<Policy>,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Also write regret_bounds.csv with bound values at each power of ten
    #[arg(long)]
    bounds: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    Lemma1,
    Numplays,
    Cor1,
    Cor2,
    Lemma2,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    instance: String,
    /// ucb1 or klucb (a policy name such as lf-klucb also works)
    #[arg(long, value_parser = parse_kind)]
    policy: DecisionKind,
    #[arg(long)]
    n: u64,
    #[arg(long, value_enum)]
    formula: Formula,
    /// Margin for lemma2
    #[arg(long)]
    delta: Option<f64>,
    /// Delta grid size for lemma1 and numplays
    #[arg(long, default_value_t = onebit_core::bounds::DEFAULT_DELTA_GRID)]
    grid: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long, value_enum, default_value = "quick")]
    intensity: Intensity,
    /// Corrupt one bit per codec stream (the codec suite should then fail)
    #[arg(long)]
    inject_bit_flip: bool,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["rewards", "seed"]))]
struct TraceArgs {
    /// Comma-separated rewards in [0, 1], cycled if shorter than --pulls
    #[arg(long)]
    rewards: Option<String>,
    /// Draw uniform rewards from this seed instead
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pulls: Option<u64>,
}

fn parse_kind(s: &str) -> Result<DecisionKind, String> {
    match s {
        "ucb1" => Ok(DecisionKind::Ucb1),
        "klucb" => Ok(DecisionKind::KlUcb),
        _ => s.parse::<Policy>().map(Policy::kind),
    }
}

enum Failure {
    /// Bad flags or invalid input: exit 2.
    Usage(String),
    /// I/O error or a failed check: exit 1.
    Runtime(String),
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Trace(a) => cmd_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let source = InstanceSource::parse(&a.instance);
    let classify = |e: onebit_sim::experiment::ExperimentError| {
        if e.is_io() {
            Failure::Runtime(e.to_string())
        } else {
            usage(e)
        }
    };
    let instance = source.load().map_err(|e| classify(e.into()))?;
    let config = ExperimentConfig {
        instance: source,
        policies: a.policies,
        n: a.n,
        trials: a.trials,
        seed: a.seed,
        workers: a.workers,
    };
    let curve = run_experiment_on(&config, &instance).map_err(classify)?;
    let overlay = if a.bounds {
        Some(overlay_bounds(&curve, &instance).map_err(classify)?)
    } else {
        None
    };
    let files = write_outputs(&curve, overlay.as_deref(), &a.out).map_err(classify)?;
    for c in &curve.curves {
        println!(
            "{:<10} regret at n = {}: {:.3} (std {:.3})",
            c.policy.name(),
            config.n,
            c.mean_final(),
            c.std_final()
        );
    }
    println!("wrote {} and {}", files.csv.display(), files.sidecar.display());
    if let Some(p) = files.overlay {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_bounds(a: BoundsArgs) -> Result<(), Failure> {
    let source = InstanceSource::parse(&a.instance);
    let instance = source.load().map_err(|e| {
        if e.is_io() {
            Failure::Runtime(e.to_string())
        } else {
            usage(e)
        }
    })?;
    let gaps = &instance.gaps()[1..];
    let report = match a.formula {
        Formula::Lemma1 => lemma1_bound(&instance, a.policy, a.n, a.grid),
        Formula::Numplays => numplays_report(&instance, a.policy, a.n, a.grid),
        Formula::Cor1 => {
            if a.policy != DecisionKind::Ucb1 {
                return Err(usage("cor1 applies to ucb1 only"));
            }
            cor1_report(a.n, gaps)
        }
        Formula::Cor2 => {
            if a.policy != DecisionKind::KlUcb {
                return Err(usage("cor2 applies to klucb only"));
            }
            cor2_report(a.n, instance.means())
        }
        Formula::Lemma2 => {
            let delta = a.delta.ok_or_else(|| usage("lemma2 needs --delta"))?;
            lemma2_report(&instance, a.policy, a.n, delta)
        }
    }
    .map_err(usage)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{json}");
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let results = verify::run(VerifyOptions {
        suite: a.suite,
        intensity: a.intensity,
        inject_bit_flip: a.inject_bit_flip,
    });
    for r in &results {
        println!("{r}");
    }
    match results.iter().find(|r| !r.passed()) {
        None => Ok(()),
        Some(first) => {
            let report = serde_json::to_string(first).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{report}");
            Err(Failure::Runtime(format!("{}/{} failed", first.suite, first.check)))
        }
    }
}

fn cmd_trace(a: TraceArgs) -> Result<(), Failure> {
    let (rewards, pulls) = match (a.rewards, a.seed) {
        (Some(list), _) => {
            let r = parse_rewards(&list).map_err(usage)?;
            let pulls = a.pulls.unwrap_or(r.len() as u64);
            (r, pulls)
        }
        (None, Some(seed)) => {
            let pulls = a.pulls.ok_or_else(|| usage("--seed needs --pulls"))?;
            (seeded_rewards(seed, pulls), pulls)
        }
        (None, None) => return Err(usage("give --rewards or --seed")),
    };
    if pulls == 0 {
        return Err(usage("--pulls must be at least 1"));
    }
    let rows = trace(&rewards, pulls).map_err(usage)?;
    print!("{}", render(&rows));
    Ok(())
}
