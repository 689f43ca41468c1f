//! `cellfree` — drive the simulator from the command line.
//!
//! `run` executes a sweep and writes CSV/JSON reports, `validate` checks a
//! plan without running it, and `dump-layout` writes the node placement of
//! one layout for plotting. Exit code 2 marks configuration problems so
//! scripts can tell them apart from runtime failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use cellfree_core::csi::CsiMode;
use cellfree_core::geometry::{compute_lsfc, place_nodes, write_layout_csv, PathlossModel};
use cellfree_core::harness::{run_experiment, validate_plan, ExperimentPlan, Scheme};
use cellfree_core::scenario::{derive_constants, stream, SimConfig, StreamPurpose};

#[derive(Parser)]
#[command(name = "cellfree", version, about = "Cell-free network Monte Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write per-point CSV reports plus a summary JSON.
    Run(RunArgs),
    /// Check a configuration and sweep plan without running it.
    Validate(PlanArgs),
    /// Write the node placement of one layout as CSV.
    DumpLayout(DumpArgs),
}

#[derive(Args, Clone)]
struct PlanArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a single configuration key, e.g. `--set num_ues=50`.
    /// May be given multiple times; applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Sweep over (RU count)x(antennas per RU) pairs, e.g. `10x64,20x32`.
    #[arg(long, value_delimiter = ',')]
    lm: Vec<String>,

    /// Sweep over user counts.
    #[arg(long, value_delimiter = ',')]
    ues: Vec<usize>,

    /// Sweep over pilot dimensions.
    #[arg(long, value_delimiter = ',')]
    pilots: Vec<usize>,

    /// Schemes to evaluate: clzf, lmmse_cluster, lsfd, lzf_epa, lzf_ppa,
    /// lpzf_epa, lpzf_ppa.
    #[arg(long, value_delimiter = ',', default_value = "lmmse_cluster")]
    schemes: Vec<String>,

    /// Channel estimators: ideal, pm, sp.
    #[arg(long, value_delimiter = ',', default_value = "sp")]
    estimators: Vec<String>,

    /// Require every --lm pair to multiply to this many total antennas.
    #[arg(long)]
    antenna_budget: Option<usize>,

    /// Worker threads for the Monte Carlo stages.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    plan: PlanArgs,

    /// Output directory for the report files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DumpArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a single configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Layout index to place (seeds derive from it).
    #[arg(long, default_value_t = 0)]
    layout: u64,

    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
        Command::DumpLayout(args) => dump_layout(args),
    }
}

fn load_config(path: &Option<PathBuf>, sets: &[String]) -> Result<SimConfig, String> {
    let mut cfg = SimConfig::default();
    if let Some(path) = path {
        let body = fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        cfg.apply_config_str(&body).map_err(|e| e.to_string())?;
    }
    for pair in sets {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got {pair:?}"))?;
        cfg.apply_kv(key.trim(), value.trim()).map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn build_plan(args: &PlanArgs, out_dir: PathBuf) -> Result<ExperimentPlan, String> {
    let base = load_config(&args.config, &args.set)?;
    let mut lm_pairs = Vec::new();
    for spec in &args.lm {
        let (l, m) = spec
            .split_once('x')
            .ok_or_else(|| format!("--lm expects LxM pairs, got {spec:?}"))?;
        let l = l.trim().parse::<usize>().map_err(|e| format!("--lm {spec:?}: {e}"))?;
        let m = m.trim().parse::<usize>().map_err(|e| format!("--lm {spec:?}: {e}"))?;
        lm_pairs.push((l, m));
    }
    let mut schemes = Vec::new();
    for name in &args.schemes {
        schemes.push(Scheme::parse(name).map_err(|e| e.to_string())?);
    }
    let mut estimators = Vec::new();
    for name in &args.estimators {
        estimators.push(CsiMode::parse(name).map_err(|e| e.to_string())?);
    }
    Ok(ExperimentPlan {
        base,
        lm_pairs,
        k_list: args.ues.clone(),
        taup_list: args.pilots.clone(),
        schemes,
        estimators,
        fixed_antenna_budget: args.antenna_budget,
        out_dir,
        parallelism: args.threads,
    })
}

fn run(args: RunArgs) -> ExitCode {
    let plan = match build_plan(&args.plan, args.out.clone()) {
        Ok(plan) => plan,
        Err(msg) => return config_failure(&msg),
    };
    let issues = validate_plan(&plan);
    if !issues.is_empty() {
        return plan_failure(&issues);
    }
    let timer = Instant::now();
    match run_experiment(&plan) {
        Ok(output) => {
            for path in &output.csv_paths {
                println!("wrote {}", path.display());
            }
            println!("wrote {}", output.summary_path.display());
            eprintln!("elapsed: {:.3?}", timer.elapsed());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn validate(args: PlanArgs) -> ExitCode {
    let plan = match build_plan(&args, PathBuf::from("unused")) {
        Ok(plan) => plan,
        Err(msg) => return config_failure(&msg),
    };
    let issues = validate_plan(&plan);
    if issues.is_empty() {
        let derived = derive_constants(&plan.base);
        println!("plan ok");
        println!("normalized transmit snr: {:.3} dB", 10.0 * derived.snr.log10());
        ExitCode::SUCCESS
    } else {
        plan_failure(&issues)
    }
}

fn dump_layout(args: DumpArgs) -> ExitCode {
    let cfg = match load_config(&args.config, &args.set) {
        Ok(cfg) => cfg,
        Err(msg) => return config_failure(&msg),
    };
    if let Err(e) = cfg.validate() {
        return config_failure(&e.to_string());
    }
    let mut rng = stream(cfg.master_seed, args.layout, StreamPurpose::Placement, 0);
    let layout = place_nodes(&cfg, &mut rng);
    // Touch the large-scale stage as a sanity pass; placement alone can
    // not fail, but a broken pathloss configuration should be caught here
    // rather than silently emitting a layout the run step would reject.
    let model = PathlossModel::from_config(&cfg);
    let mut ls_rng = stream(cfg.master_seed, args.layout, StreamPurpose::LargeScale, 0);
    if let Err(e) = compute_lsfc(&layout, &model, &mut ls_rng) {
        return config_failure(&e.to_string());
    }
    let result = match &args.out {
        Some(path) => fs::File::create(path)
            .map_err(cellfree_core::Error::from)
            .and_then(|mut f| write_layout_csv(&layout, &mut f)),
        None => write_layout_csv(&layout, &mut std::io::stdout().lock()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn config_failure(msg: &str) -> ExitCode {
    eprintln!("configuration error: {msg}");
    ExitCode::from(2)
}

fn plan_failure(issues: &[String]) -> ExitCode {
    eprintln!("plan has {} problem(s):", issues.len());
    for issue in issues {
        eprintln!("  - {issue}");
    }
    ExitCode::from(2)
}
