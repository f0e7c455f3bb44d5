//! Command-line front end.
//!
//! Exit codes: 0 success, 2 bad configuration or input, 3 I/O failure,
//! 4 verification failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_seeds, Preset, RunConfig};
use crate::error::{Error, Result};
use crate::experiment::{final_reward, run_many_with_jobs, AgentKind, AggregateResult};
use crate::report::{self, Plot, RunManifest, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Added to every configured seed when set.
pub const SEED_BASE_VAR: &str = "FREEWILL_SEED_BASE";

#[derive(Debug, Parser)]
#[command(name = "freewill", version, about = "Adaptive-temperature bandit agents on non-stationary environments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct RunOpts {
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds, e.g. `0..9`, `0..=9` or `1,4,7`. Replaces the configured list.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// `KEY=VALUE` applied to the configuration, e.g. `freewill.alpha=0.2`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run both agents from a JSON configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Re-create one of the built-in experiments.
    Reproduce {
        /// fig3, fig4, fig5 or fourarm.
        preset: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a configuration once per value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Parameter key; a bare name means `freewill.<name>`.
        #[arg(long)]
        param: String,
        /// Comma-separated numeric values.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check every file hash recorded in DIR/manifest.json.
    Verify { dir: PathBuf },
}

enum Failure {
    Config(String),
    Io(String),
    Verify(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Io(_) => EXIT_IO,
            Failure::Verify(_) => EXIT_VERIFY,
        }
    }

    fn report(&self) -> String {
        let (tag, msg) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Io(m) => ("io", m),
            Failure::Verify(m) => ("verify", m),
        };
        format!("error[{tag}]: {}", msg.replace('\n', " "))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let inner = match &e {
            Error::Run { source, .. } => source.as_ref(),
            other => other,
        };
        match inner {
            Error::Io { .. } => Failure::Io(e.to_string()),
            Error::ManifestInconsistent(_) => Failure::Verify(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

pub fn run_from_env() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("{}", f.report());
            f.code()
        }
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, opts } => {
            let cfg = RunConfig::load(&config)?;
            let cfg = prepare(cfg, &opts)?;
            run_to_dir(&cfg, &opts.out, &Plot::ALL, opts.jobs)?;
            println!("wrote {}", opts.out.display());
            Ok(())
        }
        Command::Reproduce { preset, opts } => {
            let p = Preset::parse(&preset).ok_or_else(|| {
                Failure::Config(format!("unknown preset `{preset}` (expected fig3, fig4, fig5 or fourarm)"))
            })?;
            let cfg = prepare(p.config(), &opts)?;
            run_to_dir(&cfg, &opts.out, preset_plots(p), opts.jobs)?;
            println!("wrote {}", opts.out.display());
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            values,
            opts,
        } => {
            let cfg = RunConfig::load(&config)?;
            let cfg = prepare(cfg, &opts)?;
            sweep(&cfg, &param, &values, &opts.out, opts.jobs)
        }
        Command::Verify { dir } => verify(&dir),
    }
}

pub fn preset_plots(p: Preset) -> &'static [Plot] {
    match p {
        Preset::Fig3 => &[Plot::Reward],
        Preset::Fig4 => &[Plot::Kl],
        Preset::Fig5 => &[Plot::Novelty],
        Preset::FourArm => &[Plot::Reward, Plot::Entropy],
    }
}

fn prepare(cfg: RunConfig, opts: &RunOpts) -> Result<RunConfig, Failure> {
    let mut cfg = cfg.with_overrides(&opts.overrides)?;
    if let Some(s) = &opts.seeds {
        cfg.experiment.seeds = parse_seeds(s)?;
    }
    if let Ok(base) = std::env::var(SEED_BASE_VAR) {
        let base: u64 = base
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("{SEED_BASE_VAR} must be an unsigned integer, got `{base}`")))?;
        cfg.offset_seeds(base);
    }
    if opts.jobs == Some(0) {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `cfg` and writes its outputs and a manifest into `out`.
pub fn run_to_dir(cfg: &RunConfig, out: &Path, plots: &[Plot], jobs: Option<usize>) -> Result<AggregateResult> {
    let exp = cfg.experiment_config();
    let result = run_many_with_jobs(&exp, jobs)?;
    let mut files = report::write_outputs(
        out,
        &result,
        exp.num_arms(),
        &exp.schedule.change_steps().collect::<Vec<_>>(),
        plots,
        cfg.report.novelty_zoom,
        cfg.report.write_traces,
    )?;
    files.sort();
    let manifest = RunManifest::build(out, &files, cfg.to_value(), exp.seeds.clone())?;
    report::write_manifest(&manifest, &out.join(MANIFEST_FILE))?;
    Ok(result)
}

fn sweep(cfg: &RunConfig, param: &str, values: &str, out: &Path, jobs: Option<usize>) -> Result<(), Failure> {
    let key = if param.contains('.') {
        param.to_string()
    } else {
        format!("freewill.{param}")
    };
    let parsed: Vec<(String, f64)> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map(|x| (v.to_string(), x))
                .map_err(|_| Failure::Config(format!("sweep value `{v}` is not a number")))
        })
        .collect::<Result<_, _>>()?;
    if parsed.is_empty() {
        return Err(Failure::Config("--values is empty".into()));
    }

    // Build every variant first so a bad value fails before any run starts.
    let mut variants = Vec::with_capacity(parsed.len());
    for (text, _) in &parsed {
        let c = cfg.with_overrides(&[format!("{key}={text}")])?;
        c.validate()?;
        variants.push((format!("{key}={text}"), c));
    }

    fs::create_dir_all(out).map_err(|e| Failure::from(Error::io(out, e)))?;
    let mut summary = String::from("param,value,freewill_final_mean,freewill_final_std,baseline_final_mean,baseline_final_std\n");
    let mut files = Vec::new();
    for ((dir_name, c), (text, _)) in variants.iter().zip(&parsed) {
        let sub = out.join(dir_name);
        let result = run_to_dir(c, &sub, &Plot::ALL, jobs)?;
        let (fm, fs_) = final_reward(&result, AgentKind::FreeWill, 500);
        let (bm, bs) = final_reward(&result, AgentKind::Baseline, 500);
        summary.push_str(&format!(
            "{key},{text},{},{},{},{}\n",
            report::format_number(fm),
            report::format_number(fs_),
            report::format_number(bm),
            report::format_number(bs)
        ));
        files.push(format!("{dir_name}/{MANIFEST_FILE}"));
        println!("wrote {}", sub.display());
    }
    let summary_path = out.join("sweep_summary.csv");
    fs::write(&summary_path, summary).map_err(|e| Failure::from(Error::io(&summary_path, e)))?;
    files.push("sweep_summary.csv".into());
    files.sort();
    let manifest = RunManifest::build(out, &files, cfg.to_value(), cfg.experiment.seeds.clone())?;
    report::write_manifest(&manifest, &out.join(MANIFEST_FILE))?;
    Ok(())
}

fn verify(dir: &Path) -> Result<(), Failure> {
    let problems = report::verify_dir(dir).map_err(|e| match e {
        Error::Io { .. } | Error::ManifestInconsistent(_) => Failure::Verify(e.to_string()),
        other => Failure::from(other),
    })?;
    if problems.is_empty() {
        println!("ok {}", dir.display());
        return Ok(());
    }
    let list: Vec<String> = problems.iter().map(ToString::to_string).collect();
    Err(Failure::Verify(list.join("; ")))
}
