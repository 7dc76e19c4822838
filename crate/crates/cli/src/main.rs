//! `graphal`: run active-learning benchmarks from JSON experiment configs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use graphal_core::experiment::{
    run_ablation, run_experiment, run_scaling, write_scaling_csv, AggregateRow, ExperimentConfig,
    RunOptions, ScalingOptions,
};
use graphal_core::{generate_synthetic, save_graph, AlConfig, Error, Metric, SyntheticParams};

const OUT_DIR_ENV: &str = "GRAPHAL_OUT_DIR";

#[derive(Parser)]
#[command(name = "graphal", version, about = "Graph active learning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, budget, seed) cell of an experiment.
    Run(RunArgs),
    /// Run the perturbation ablation for the ours-* strategies of an experiment.
    Ablation(RunArgs),
    /// Write a synthetic polarized graph as nodes.jsonl and edges.csv.
    GenSynth(GenArgs),
    /// Time full selections on synthetic graphs of increasing size.
    Scaling(ScalingArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides GRAPHAL_OUT_DIR and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Args)]
struct GenArgs {
    /// Directory to write nodes.jsonl and edges.csv into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    users_per_side: usize,
    #[arg(long, default_value_t = 250)]
    assertions_per_side: usize,
    #[arg(long, default_value_t = 4.0)]
    mean_posts_per_user: f64,
    #[arg(long, default_value_t = 0.9)]
    in_side_probability: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Pagerank,
    Betweenness,
    Both,
}

#[derive(Args)]
struct ScalingArgs {
    /// Experiment config supplying batch size, perturbation and model settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides GRAPHAL_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Target edge counts.
    #[arg(long, value_delimiter = ',', default_values_t = [5_000usize, 20_000, 80_000])]
    sizes: Vec<usize>,
    #[arg(long, value_enum, default_value_t = MetricArg::Both)]
    metric: MetricArg,
    #[arg(long, default_value_t = 20)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn resolve_out(flag: Option<PathBuf>, configured: impl FnOnce() -> PathBuf) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(configured)
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::from_path(path).with_context(|| format!("loading {}", path.display()))
}

fn print_aggregates(rows: &[AggregateRow]) {
    println!("strategy\tbudget\truns\taccuracy\tmacro_f1");
    for r in rows {
        println!(
            "{}\t{}\t{}\t{:.4} ± {:.4}\t{:.4} ± {:.4}",
            r.strategy,
            r.budget,
            r.runs,
            r.accuracy_mean,
            r.accuracy_std,
            r.macro_f1_mean,
            r.macro_f1_std
        );
    }
}

fn run(args: RunArgs, ablation: bool) -> anyhow::Result<()> {
    let cfg = load_config(&args.config)?;
    let out = resolve_out(args.out, || cfg.output_dir.clone());
    let opts = RunOptions {
        jobs: args.jobs,
        seed_offset: args.seed_offset,
    };
    if ablation {
        let rows = run_ablation(&cfg, &out, &opts)?;
        println!("variant\tgraphs\tstrategy\tmacro_f1");
        for r in rows {
            println!(
                "{}\t{}\t{}\t{:.4} ± {:.4}",
                r.variant,
                r.perturbed_graphs,
                r.aggregate.strategy,
                r.aggregate.macro_f1_mean,
                r.aggregate.macro_f1_std
            );
        }
    } else {
        let output = run_experiment(&cfg, &out, &opts)?;
        print_aggregates(&output.aggregates);
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn gen_synth(args: GenArgs) -> anyhow::Result<()> {
    let params = SyntheticParams {
        users_per_side: args.users_per_side,
        assertions_per_side: args.assertions_per_side,
        mean_posts_per_user: args.mean_posts_per_user,
        in_side_probability: args.in_side_probability,
        seed: args.seed,
    };
    let g = generate_synthetic(&params)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    save_graph(&g, args.out.join("nodes.jsonl"), args.out.join("edges.csv"))?;
    println!("{} nodes, {} edges", g.node_count(), g.edge_count());
    Ok(())
}

fn scaling(args: ScalingArgs) -> anyhow::Result<()> {
    let al = match &args.config {
        Some(path) => load_config(path)?.al_config(),
        None => AlConfig::default(),
    };
    let out = resolve_out(args.out, || PathBuf::from("results"));
    let opts = ScalingOptions {
        budget: args.budget,
        al,
        seed: args.seed,
    };
    let metrics = match args.metric {
        MetricArg::Pagerank => vec![Metric::PageRank],
        MetricArg::Betweenness => vec![Metric::Betweenness],
        MetricArg::Both => vec![Metric::PageRank, Metric::Betweenness],
    };
    for metric in metrics {
        let rows = run_scaling(&args.sizes, metric, &opts)?;
        let path = out.join(format!("scaling_{}.csv", metric.name()));
        write_scaling_csv(&path, &rows)?;
        for r in &rows {
            println!(
                "{}\t{}\t{:.1} ms",
                metric.name(),
                r.edges,
                r.total_selection_time_ms
            );
        }
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args, false),
        Command::Ablation(args) => run(args, true),
        Command::GenSynth(args) => gen_synth(args),
        Command::Scaling(args) => scaling(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let invalid_config = err.chain().any(|e| {
                matches!(
                    e.downcast_ref::<Error>(),
                    Some(Error::Config { .. } | Error::InvalidParam { .. })
                )
            });
            ExitCode::from(if invalid_config { 2 } else { 1 })
        }
    }
}
