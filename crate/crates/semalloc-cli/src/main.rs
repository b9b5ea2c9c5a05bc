//! Command-line driver: run experiments, sweep a parameter axis, execute
//! the allocation oracle checks, run the convergence study, and aggregate
//! metric CSVs into plot-ready tables.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semalloc::config::{apply_override, parse_config_file};
use semalloc::harness::{
    aggregate_metric, convergence_study, fmt_sci, log_log_slope, run_experiment, write_metrics_csv,
    ExperimentConfig, MetricKind, PoolSpec, RoundMetrics,
};
use semalloc::Error;

#[derive(Parser)]
#[command(
    name = "semalloc",
    version,
    about = "Budgeted semantic transmission simulator"
)]
struct Cli {
    /// Cap worker parallelism (also honored from SEMALLOC_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file; omitted or empty means the defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Repeatable KEY=VALUE override applied after the config file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Comma-separated strategy list (shorthand for a strategy override).
    #[arg(long)]
    strategies: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write one metrics CSV.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment once per value of one config axis.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Config key to vary: budget, n_obs, lambda, dirichlet_concentration.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
        /// Output directory (one CSV per value plus a summary).
        #[arg(long)]
        out: PathBuf,
    },
    /// Brute-force checks: continuous dominance and rounding bounds.
    OracleCheck {
        #[arg(long, default_value_t = 4)]
        max_f: usize,
        #[arg(long, default_value_t = 8)]
        max_b: u64,
        #[arg(long, default_value_t = 6)]
        max_cap: u64,
        /// Seeded random instances on top of the exhaustive grid.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Candidate-pool convergence study over a horizon grid.
    Convergence {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated horizon grid.
        #[arg(long, default_value = "5,10,20,40")]
        grid: String,
        /// Output table path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a metrics CSV into per-round mean/stderr per strategy.
    PlotData {
        /// Input metrics CSV (as written by `run`).
        #[arg(long)]
        input: PathBuf,
        /// Metric column to aggregate.
        #[arg(long)]
        series: String,
        /// Output table path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => ExperimentConfig::default(),
    };
    for item in &args.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{item}` is not KEY=VALUE")))?;
        apply_override(&mut config, key.trim(), value)?;
    }
    if let Some(list) = &args.strategies {
        apply_override(&mut config, "strategy", list)?;
    }
    config.validate()?;
    Ok(config)
}

fn print_final_round_summary(rows: &[RoundMetrics]) {
    let final_round = rows.iter().map(|r| r.round).max().unwrap_or(0);
    let finals: Vec<RoundMetrics> = rows
        .iter()
        .filter(|r| r.round == final_round)
        .cloned()
        .collect();
    println!("final round {final_round} means per strategy:");
    for metric in [
        MetricKind::CosineDistance,
        MetricKind::CosineDistanceCounts,
        MetricKind::MapCorrect,
    ] {
        for agg in aggregate_metric(&finals, metric) {
            println!(
                "  {} {} mean={} stderr={} n={}",
                agg.strategy,
                metric.column(),
                fmt_sci(agg.mean),
                fmt_sci(agg.stderr),
                agg.n
            );
        }
    }
}

fn cmd_run(args: &ConfigArgs, out: &Path) -> Result<(), Error> {
    let config = load_config(args)?;
    let result = run_experiment(&config)?;
    write_metrics_csv(&result.rows, out)?;
    print_final_round_summary(&result.rows);
    println!(
        "metric conventions: cosine_distance compares width posteriors aligned on the \
         width index over the union of supports (zero-padded); cosine_distance_counts \
         compares normalized type-count vectors"
    );
    println!("wrote {} rows to {}", result.rows.len(), out.display());
    Ok(())
}

fn cmd_sweep(args: &ConfigArgs, axis: &str, values: &str, out_dir: &Path) -> Result<(), Error> {
    const AXES: [&str; 4] = ["budget", "n_obs", "lambda", "dirichlet_concentration"];
    if !AXES.contains(&axis) {
        return Err(Error::Config(format!(
            "sweep axis must be one of {AXES:?}, got `{axis}`"
        )));
    }
    let values: Vec<&str> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::Config("empty sweep value list".into()));
    }
    std::fs::create_dir_all(out_dir)?;

    let mut summary = String::from("axis,value,strategy,final_cosine_mean,final_map_accuracy\n");
    for value in &values {
        let mut config = load_config(args)?;
        apply_override(&mut config, axis, value)?;
        config.validate()?;
        let result = run_experiment(&config)?;
        let path = out_dir.join(format!("{axis}_{value}.csv"));
        write_metrics_csv(&result.rows, &path)?;
        println!(
            "axis {axis}={value}: {} rows -> {}",
            result.rows.len(),
            path.display()
        );

        let final_round = result.rows.iter().map(|r| r.round).max().unwrap_or(0);
        let finals: Vec<RoundMetrics> = result
            .rows
            .iter()
            .filter(|r| r.round == final_round)
            .cloned()
            .collect();
        let cos = aggregate_metric(&finals, MetricKind::CosineDistance);
        let acc = aggregate_metric(&finals, MetricKind::MapCorrect);
        for (c, a) in cos.iter().zip(&acc) {
            summary.push_str(&format!(
                "{axis},{value},{},{},{}\n",
                c.strategy,
                fmt_sci(c.mean),
                fmt_sci(a.mean)
            ));
        }
    }
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary)?;
    println!("wrote sweep summary to {}", summary_path.display());
    Ok(())
}

fn cmd_oracle_check(
    max_f: usize,
    max_b: u64,
    max_cap: u64,
    instances: usize,
    seed: u64,
) -> Result<(), Error> {
    if instances == 0 {
        return Err(Error::Config("instances must be positive".into()));
    }
    let report = semalloc::oracle::run_oracle_checks(max_f, max_b, max_cap, instances, seed)?;
    println!(
        "dominance: {} checked, {} violations (worst gap {})",
        report.dominance_checked,
        report.dominance_violations,
        fmt_sci(report.worst_gap)
    );
    println!(
        "rounding bounds: {} checked, {} violations",
        report.rounding_checked, report.rounding_violations
    );
    if report.dominance_violations == 0 && report.rounding_violations == 0 {
        println!("oracle-check: PASS");
        Ok(())
    } else {
        println!("oracle-check: FAIL");
        Err(Error::Domain("oracle checks failed".into()))
    }
}

fn cmd_convergence(args: &ConfigArgs, grid: &str, out: &Path) -> Result<(), Error> {
    let config = load_config(args)?;
    let grid: Vec<usize> = grid
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad grid entry `{s}`")))
        })
        .collect::<Result<_, Error>>()?;
    if grid.is_empty() {
        return Err(Error::Config("empty horizon grid".into()));
    }
    let grid_max = *grid.iter().max().expect("non-empty");
    let spec = PoolSpec::default_rich(grid_max);
    let rows = convergence_study(&config, &grid, &spec)?;

    let mut table = String::from("t_prime\tgreedy_max_dev\tsubset_max_dev\n");
    for row in &rows {
        table.push_str(&format!(
            "{}\t{}\t{}\n",
            row.t_prime,
            fmt_sci(row.greedy_max_dev),
            fmt_sci(row.subset_max_dev)
        ));
    }
    std::fs::write(out, &table)?;

    let greedy: Vec<(usize, f64)> = rows.iter().map(|r| (r.t_prime, r.greedy_max_dev)).collect();
    println!("greedy log-log slope: {}", fmt_sci(log_log_slope(&greedy)));
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        println!(
            "subset deviation: T'={} -> {}, T'={} -> {}",
            first.t_prime,
            fmt_sci(first.subset_max_dev),
            last.t_prime,
            fmt_sci(last.subset_max_dev)
        );
    }
    println!("wrote convergence table to {}", out.display());
    Ok(())
}

fn cmd_plot_data(input: &Path, series: &str, out: &Path) -> Result<(), Error> {
    let metric: MetricKind = series.parse()?;
    let text = std::fs::read_to_string(input)?;
    let rows = semalloc::harness::parse_metrics_csv(&text)?;
    let agg = aggregate_metric(&rows, metric);
    let mut table = String::from("strategy\tround\tmean\tstderr\tn\n");
    for a in &agg {
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            a.strategy,
            a.round,
            fmt_sci(a.mean),
            fmt_sci(a.stderr),
            a.n
        ));
    }
    std::fs::write(out, &table)?;
    println!("wrote {} aggregated rows to {}", agg.len(), out.display());
    Ok(())
}

/// Usage/config errors exit 2; runtime failures exit 1.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::EnumerationLimit { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("SEMALLOC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }

    let outcome = match &cli.command {
        Command::Run { config, out } => cmd_run(config, out),
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => cmd_sweep(config, axis, values, out),
        Command::OracleCheck {
            max_f,
            max_b,
            max_cap,
            instances,
            seed,
        } => cmd_oracle_check(*max_f, *max_b, *max_cap, *instances, *seed),
        Command::Convergence { config, grid, out } => cmd_convergence(config, grid, out),
        Command::PlotData { input, series, out } => cmd_plot_data(input, series, out),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
