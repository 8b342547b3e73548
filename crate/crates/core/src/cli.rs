//! Command-line front end. Exit codes: 0 ok, 1 failed check or runtime
//! error, 2 usage, config or file error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::expert::{demo_coverage_ok, generate_demos};
use crate::harness::{run_episode, run_suite};
use crate::io::{
    file_error, load_demo_config, load_scenario, load_suite, load_verify_config, write_report, write_summary,
    write_trace, DatasetFile, DemoConfig,
};
use crate::scenario::Task;
use crate::verifier::VerifyConfig;

#[derive(Debug, Parser)]
#[command(name = "fadmit", version, about = "Force-aware admittance control simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate expert demonstrations and write a binary dataset.
    GenDemos {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Task when no config is given (MO, PH, WW, DO).
        #[arg(long)]
        task: Option<Task>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one episode and write its per-tick trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the stability results over a parameter grid.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch of episodes and write per-mode summaries.
    Suite {
        #[arg(long)]
        config: PathBuf,
        /// First seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of seeds.
        #[arg(long)]
        count: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// What a command produced besides its files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub passed: bool,
    pub message: String,
    /// CSV went to stdout, so the message goes to stderr.
    pub stdout_used: bool,
}

impl Outcome {
    fn ok(message: String) -> Self {
        Self { passed: true, message, stdout_used: false }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| file_error(path, e))?))
}

/// Writes CSV either to `out` or to stdout.
fn emit_csv<F>(out: Option<&Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)?;
            w.flush().map_err(|e| file_error(path, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().map_err(Error::Io)
        }
    }
}

pub fn gen_demos(cfg: &DemoConfig, out: &Path) -> Result<Outcome> {
    cfg.validate()?;
    let demos = generate_demos(cfg.task, &cfg.env, cfg.seed, cfg.count)?;
    let dataset = DatasetFile {
        task: cfg.task,
        horizon: cfg.horizon,
        episodes: demos.iter().map(|d| d.tuples.clone()).collect(),
    };
    dataset.save(out)?;
    let n = dataset.tuple_count();
    let contact = demos.iter().flat_map(|d| &d.tuples).filter(|t| t.contact).count();
    let mut msg = format!(
        "{}: {} episodes, {} tuples, mean length {:.1}, contact fraction {:.3}",
        cfg.task,
        demos.len(),
        n,
        n as f64 / demos.len() as f64,
        contact as f64 / n.max(1) as f64
    );
    let mut passed = true;
    if cfg.task == Task::WW {
        let covered = demos.iter().filter(|d| demo_coverage_ok(d)).count();
        msg.push_str(&format!(", coverage {covered}/{}", demos.len()));
        passed = covered == demos.len();
    }
    Ok(Outcome { passed, message: msg, stdout_used: false })
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Outcome> {
    let mut cfg = load_scenario(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.noise.seed = s;
    }
    let log = run_episode(&cfg)?;
    if let Some(path) = out {
        let mut w = create(path)?;
        write_trace(&log, &mut w)?;
        w.flush().map_err(|e| file_error(path, e))?;
    }
    let m = &log.metrics;
    Ok(Outcome::ok(format!(
        "task={} mode={} seed={} success={} safety_stop={} metric={} peak_force={:.3}",
        log.task,
        log.mode.name(),
        log.seed,
        u8::from(m.success),
        u8::from(m.safety_stop),
        m.primary(log.task),
        m.peak_force
    )))
}

fn cmd_verify(config: Option<&Path>, out: Option<&Path>) -> Result<Outcome> {
    let cfg = match config {
        Some(p) => load_verify_config(p)?,
        None => VerifyConfig::default(),
    };
    let reports = cfg.run()?;
    emit_csv(out, |w| write_report(&reports, w))?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    Ok(Outcome {
        passed: failed == 0,
        message: format!("verify: {} reports, {} passed, {} failed", reports.len(), reports.len() - failed, failed),
        stdout_used: out.is_none(),
    })
}

fn cmd_suite(config: &Path, seed: Option<u64>, count: Option<u64>, out: Option<&Path>) -> Result<Outcome> {
    let mut suite = load_suite(config)?;
    if let Some(s) = seed {
        suite.first_seed = s;
    }
    if let Some(c) = count {
        suite.seeds = c;
    }
    let result = run_suite(&suite.expand())?;
    emit_csv(out, |w| write_summary(&result.rows, w))?;
    Ok(Outcome {
        passed: true,
        message: format!("suite: {} episodes, {} rows", result.episodes.len(), result.rows.len()),
        stdout_used: out.is_none(),
    })
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::GenDemos { config, task, count, seed, out } => {
            let mut cfg = match (config, task) {
                (Some(p), _) => load_demo_config(p)?,
                (None, Some(t)) => DemoConfig::new(*t),
                (None, None) => return Err(Error::ConfigParse("gen-demos needs --config or --task".into())),
            };
            if let Some(t) = task {
                cfg.task = *t;
            }
            if let Some(c) = count {
                cfg.count = *c;
            }
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            gen_demos(&cfg, out)
        }
        Command::Run { config, seed, out } => cmd_run(config, *seed, out.as_deref()),
        Command::Verify { config, out } => cmd_verify(config.as_deref(), out.as_deref()),
        Command::Suite { config, seed, count, out } => cmd_suite(config, *seed, *count, out.as_deref()),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ConfigParse(_)
        | Error::InvalidParameter(_)
        | Error::NonPositiveParameter { .. }
        | Error::File { .. }
        | Error::Io(_)
        | Error::Dataset(_) => 2,
        _ => 1,
    }
}

/// Parses `args`, runs the command and reports on stderr/stdout.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            if outcome.stdout_used {
                eprintln!("{}", outcome.message);
            } else {
                println!("{}", outcome.message);
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
