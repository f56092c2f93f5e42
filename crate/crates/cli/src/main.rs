//! `s3` command-line front end.
//!
//! Exit codes: 0 success, 1 solver or output failure, 2 configuration
//! error, 3 a validation check failed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use serde::Serialize;

use s3_core::config::S3Config;
use s3_core::driver::{correlation_series, fd_oracle, run_s3, validate};
use s3_core::export::write_series_csv;
use s3_core::S3Error;

#[derive(Parser)]
#[command(name = "s3", version, about = "Linear response of torus maps by space-split sensitivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "s3-out")]
    out: PathBuf,
    /// Overrides both quadrature.seed and oracle.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the sampling pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sensitivity estimate: report.json, unstable_terms.csv.
    Run,
    /// Finite-difference reference: oracle.json.
    Oracle,
    /// Self-checks: validate.json.
    Validate,
    /// Correlation series for plotting: decay.csv.
    Decay,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Oracle => "oracle",
            Command::Validate => "validate",
            Command::Decay => "decay",
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    config: Option<PathBuf>,
    out: PathBuf,
    subcommand: &'static str,
    timestamp: DateTime<Utc>,
    version: &'static str,
    files: Vec<String>,
}

enum Failure {
    Config(String),
    Solver(String),
    Checks(Vec<String>),
}

impl From<S3Error> for Failure {
    fn from(e: S3Error) -> Self {
        match e.root() {
            S3Error::InvalidConfig(_) => Failure::Config(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Solver(format!("{}: {e}", path.display()))
}

fn load_config(cli: &Cli) -> Result<S3Config, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = S3Config::from_toml_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = cli.seed {
        cfg.quadrature.seed = seed;
        cfg.oracle.seed = seed;
    }
    Ok(cfg)
}

/// Writes into the output directory and remembers what it wrote.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| io(&path, e))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let w = self.open(name)?;
        serde_json::to_writer_pretty(w, value).map_err(|e| io(&self.dir.join(name), e))
    }
}

fn execute(cli: &Cli, out: &mut Output) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Run => {
            let report = run_s3(&cfg)?;
            out.json("report.json", &report)?;
            let w = out.open("unstable_terms.csv")?;
            write_series_csv(w, &report.unstable_terms, &report.unstable_stderr)?;
            println!("psi = {:.6} +/- {:.6}", report.psi_total, report.psi_stderr);
            for w in &report.diagnostics.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Oracle => {
            let r = fd_oracle(&cfg)?;
            out.json("oracle.json", &r)?;
            println!("oracle = {:.6} +/- {:.6}", r.estimate, r.stderr);
        }
        Command::Validate => {
            let r = validate(&cfg)?;
            out.json("validate.json", &r)?;
            for c in &r.checks {
                println!("{:<24} {}", c.name, if c.passed { "pass" } else { "FAIL" });
            }
            if !r.passed {
                return Err(Failure::Checks(r.failed().into_iter().map(String::from).collect()));
            }
        }
        Command::Decay => {
            let series = correlation_series(&cfg, cfg.series.length)?;
            let (terms, errs): (Vec<f64>, Vec<f64>) = series.iter().map(|e| (e.value, e.stderr)).unzip();
            let w = out.open("decay.csv")?;
            write_series_csv(w, &terms, &errs)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let mut out = match Output::create(&cli.out) {
        Ok(o) => o,
        Err(_) => {
            eprintln!("error: cannot create {}", cli.out.display());
            return ExitCode::from(1);
        }
    };
    let result = execute(&cli, &mut out);
    let manifest = RunManifest {
        config: cli.config.clone(),
        out: cli.out.clone(),
        subcommand: cli.command.name(),
        timestamp: Utc::now(),
        version: env!("CARGO_PKG_VERSION"),
        files: {
            let mut f = out.files.clone();
            f.push("manifest.json".into());
            f
        },
    };
    if out.json("manifest.json", &manifest).is_err() {
        eprintln!("error: cannot write manifest.json");
        return ExitCode::from(1);
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Checks(names)) => {
            eprintln!("validation failed: {}", names.join(", "));
            ExitCode::from(3)
        }
    }
}
