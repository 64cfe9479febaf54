use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use preqscore_core::experiment::{
    read_data_csv, run, write_report, write_trace_summary, ExperimentConfig, ExperimentKind,
    OutlierModel, RunOptions, Transform, Truth,
};
use preqscore_core::{delta_trace, parse_model_spec, select, Rule, RuleId};

/// Prequential model comparison with the log and Hyvärinen scores.
#[derive(Parser)]
#[command(name = "preqscore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Monte Carlo experiment.
    Experiment(ExperimentArgs),
    /// Score a data file under two models and select between them.
    Trace(TraceArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_parser = parse_kind)]
    name: ExperimentKind,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    tauq2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    cutoff: Option<f64>,
    #[arg(long)]
    outlier_index: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    outlier_mag: Option<f64>,
    /// Use iid models instead of AR(1) in the outlier experiment.
    #[arg(long, value_enum)]
    outlier_model: Option<OutlierArg>,
    #[arg(long)]
    unit_scale: Option<f64>,
    /// Which variance model generates the data (variance-expectation is always `p`).
    #[arg(long, value_enum)]
    truth: Option<TruthArg>,
    /// `identity`, `cubic`, or `affine:<c>`.
    #[arg(long, value_parser = parse_transform)]
    transform: Option<Transform>,
    /// Write every replicate's traces as `rep_<r>.csv` / `rep_<r>_log.csv`.
    #[arg(long)]
    keep_reps: bool,
    /// Worker threads; outputs do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    model_a: String,
    #[arg(long)]
    model_b: String,
    #[arg(long, value_enum)]
    rule: RuleArg,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    cutoff: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Log,
    Hyvarinen,
}

#[derive(Clone, Copy, ValueEnum)]
enum TruthArg {
    P,
    Q,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutlierArg {
    Ar1,
    Iid,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        format!("expected one of: {}", names.join(", "))
    })
}

fn parse_transform(s: &str) -> Result<Transform, String> {
    match s {
        "identity" => Ok(Transform::Identity),
        "cubic" => Ok(Transform::Cubic),
        _ => s
            .strip_prefix("affine:")
            .and_then(|c| c.parse().ok())
            .map(Transform::Affine)
            .ok_or_else(|| "expected `identity`, `cubic` or `affine:<c>`".to_string()),
    }
}

enum Failure {
    Assertions,
    Usage(String),
}

fn experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::new(args.name);
    macro_rules! set {
        ($($field:ident = $arg:expr),* $(,)?) => { $( if let Some(v) = $arg { cfg.$field = v; } )* };
    }
    set!(
        xi = args.xi,
        tau_q2 = args.tauq2,
        n = args.n,
        replicates = args.reps,
        base_seed = args.seed,
        cutoff = args.cutoff,
        outlier_index = args.outlier_index,
        unit_scale = args.unit_scale,
        transform = args.transform,
    );
    if args.outlier_mag.is_some() {
        cfg.outlier_magnitude = args.outlier_mag;
    }
    if let Some(m) = args.outlier_model {
        cfg.outlier_model = match m {
            OutlierArg::Ar1 => OutlierModel::Ar1,
            OutlierArg::Iid => OutlierModel::Iid,
        };
    }
    if let Some(t) = args.truth {
        cfg.truth = match t {
            TruthArg::P => Truth::P,
            TruthArg::Q => Truth::Q,
        };
    }
    let opts = RunOptions {
        threads: args.threads,
        keep_reps: args.keep_reps,
    };
    let report = run(&cfg, &opts).map_err(|e| Failure::Usage(e.to_string()))?;
    write_report(&report, &args.out).map_err(|e| Failure::Usage(e.to_string()))?;
    for (name, ok) in &report.assertions {
        println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Assertions)
    }
}

fn trace(args: TraceArgs) -> Result<(), Failure> {
    let usage = |e: preqscore_core::Error| Failure::Usage(e.to_string());
    let a = parse_model_spec::<f64>(&args.model_a).map_err(usage)?;
    let b = parse_model_spec::<f64>(&args.model_b).map_err(usage)?;
    let rule = Rule::new(match args.rule {
        RuleArg::Log => RuleId::Log,
        RuleArg::Hyvarinen => RuleId::Hyvarinen,
    });
    let data = read_data_csv(&args.data).map_err(usage)?;
    let t = delta_trace(&a, &b, &data, rule).map_err(usage)?;
    let sel = select(&t, args.cutoff).map_err(usage)?;
    write_trace_summary(&t, &sel, &args.out).map_err(usage)?;
    println!(
        "D_n = {} chosen: {}",
        sel.d_n,
        sel.chosen_id.as_deref().unwrap_or("tie")
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Experiment(a) => experiment(a),
        Command::Trace(a) => trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertions) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
