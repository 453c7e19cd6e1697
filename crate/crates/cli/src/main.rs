use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acbo_core::acbo::{HypothesisMode, StopRule};
use acbo_core::benchgen::{generate, manifest, manifest_csv, split_assign, to_jsonl, GenPolicy};
use acbo_core::harness::{
    build_report, parse_depth_range, read_results, run_convergence, run_experiment, sweep_csv, write_convergence, write_sweep,
    ConvergenceConfig, ExperimentConfig, GoldLabel,
};
use acbo_core::oracle::OracleMode;
use acbo_core::seed::derive_seed;
use acbo_core::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "acbo", version, about = "Active causal discovery with an interventional oracle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark: one JSONL file per depth plus manifest.csv.
    Gen {
        /// Depth or inclusive range, e.g. 7..10.
        #[arg(long)]
        depths: String,
        #[arg(long)]
        per_depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Dev instances per depth.
        #[arg(long, default_value_t = 0)]
        dev: usize,
        /// Test instances per depth.
        #[arg(long, default_value_t = 0)]
        test: usize,
    },
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Keep results already in the output directory and skip their runs.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Monte-Carlo convergence study against a simulated oracle.
    Convergence {
        /// JSON config; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated n:eta cells, e.g. 16:0.1,8:0.2.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        stop_rule: Option<StopArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kernel margin sweep over near-miss pairs.
    Kernel {
        #[arg(long, default_value = "3..24")]
        d_range: String,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute a report from a results file.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value = "dataset")]
        gold: GoldArg,
        /// JSON destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run an experiment answering every query from a recorded transcript.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    MapThreshold,
    EntropyThreshold,
}

#[derive(Clone, Copy, ValueEnum)]
enum GoldArg {
    Dataset,
    Structural,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::OracleUnavailable(_) | Error::TranscriptIncomplete(_) => 3,
        _ => 4,
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_grid(s: &str) -> Result<Vec<(usize, f64)>> {
    s.split(',')
        .map(|cell| {
            let bad = || Error::Config(format!("invalid grid cell '{cell}', expected n:eta"));
            let (n, eta) = cell.trim().split_once(':').ok_or_else(bad)?;
            Ok((n.parse().map_err(|_| bad())?, eta.parse().map_err(|_| bad())?))
        })
        .collect()
}

fn cmd_gen(depths: &str, per_depth: usize, seed: u64, out: &Path, dev: usize, test: usize) -> Result<()> {
    let depths = parse_depth_range(depths)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let policy = GenPolicy::default();
    let mut all = Vec::new();
    for d in depths {
        let mut insts = generate(d, per_depth, seed, &policy)?;
        if dev + test > 0 {
            split_assign(&mut insts, dev, test, derive_seed(derive_seed(seed, d as u64), u64::MAX))?;
        }
        let path = out.join(format!("d{d:02}.jsonl"));
        fs::write(&path, to_jsonl(&insts)?).map_err(|e| Error::io(&path, e))?;
        log::info!("wrote {} instances to {}", insts.len(), path.display());
        all.extend(insts);
    }
    let path = out.join("manifest.csv");
    fs::write(&path, manifest_csv(&manifest(&all)?)).map_err(|e| Error::io(&path, e))
}

fn cmd_run(mut cfg: ExperimentConfig, resume: bool, output_dir: Option<PathBuf>) -> Result<()> {
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    let outcome = run_experiment(&cfg, resume)?;
    let m = &outcome.report.metrics;
    println!(
        "instances={} macro_f1={:.2} accuracy={:.2} errors={} output={}",
        outcome.report.n_results,
        m.macro_f1,
        m.accuracy,
        outcome.report.n_errors,
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_convergence(
    config: Option<&Path>,
    grid: Option<&str>,
    trials: Option<usize>,
    seed: Option<u64>,
    stop_rule: Option<StopArg>,
    out: &Path,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => ConvergenceConfig::default(),
    };
    if let Some(g) = grid {
        cfg.grid = parse_grid(g)?;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = stop_rule {
        cfg.stop_rule = match r {
            StopArg::MapThreshold => StopRule::MapThreshold,
            StopArg::EntropyThreshold => StopRule::EntropyThreshold,
        };
    }
    let report = run_convergence(&cfg)?;
    write_convergence(out, &report)?;
    for s in &report.summary {
        println!(
            "n={} eta={} t_star={} floor={:.4} success@t_star={:.4} success@T={:.4} mean_rounds={:.2}",
            s.n, s.eta, s.t_star, s.floor, s.success_t_star, s.success_budget, s.mean_rounds
        );
    }
    Ok(())
}

fn cmd_kernel(d_range: &str, out: Option<&Path>) -> Result<()> {
    let depths = parse_depth_range(d_range)?;
    match out {
        Some(p) => write_sweep(p, &depths).map(|_| ()),
        None => write_out(None, &sweep_csv(&depths)?),
    }
}

fn cmd_report(results: &Path, gold: GoldArg, out: Option<&Path>) -> Result<()> {
    let results = read_results(results)?;
    let gold = match gold {
        GoldArg::Dataset => GoldLabel::Dataset,
        GoldArg::Structural => GoldLabel::Structural,
    };
    let report = build_report(&results, gold)?;
    write_out(out, &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn cmd_replay(mut cfg: ExperimentConfig, transcript: PathBuf, output_dir: Option<PathBuf>) -> Result<()> {
    if cfg.hypothesis_mode == HypothesisMode::OracleLlm {
        return Err(Error::Config("replay cannot reproduce LLM-generated hypotheses".into()));
    }
    cfg.oracle.mode = OracleMode::Replay;
    cfg.oracle.transcript = Some(transcript);
    cmd_run(cfg, false, output_dir)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            depths,
            per_depth,
            seed,
            out,
            dev,
            test,
        } => cmd_gen(&depths, per_depth, seed, &out, dev, test),
        Command::Run {
            config,
            resume,
            output_dir,
        } => cmd_run(ExperimentConfig::from_file(&config)?, resume, output_dir),
        Command::Convergence {
            config,
            grid,
            trials,
            seed,
            stop_rule,
            out,
        } => cmd_convergence(config.as_deref(), grid.as_deref(), trials, seed, stop_rule, &out),
        Command::Kernel { d_range, out } => cmd_kernel(&d_range, out.as_deref()),
        Command::Report { results, gold, out } => cmd_report(&results, gold, out.as_deref()),
        Command::Replay {
            config,
            transcript,
            output_dir,
        } => cmd_replay(ExperimentConfig::from_file(&config)?, transcript, output_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
