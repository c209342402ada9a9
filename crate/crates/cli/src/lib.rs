//! Command-line front end: configuration, command execution and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;

use clap::Parser;
use config::{ConfigError, RunConfig};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "psw", about = "Phase-space Weyl calculus experiments")]
pub struct Args {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub command: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for `summary.csv`, `report.txt` and artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run a single acceptance criterion.
    #[arg(long)]
    pub only: Option<String>,
    /// Tolerance override `KEY=VAL`; repeatable.
    #[arg(long = "tol", value_name = "KEY=VAL")]
    pub tol: Vec<String>,
}

impl Args {
    /// Flag values as config entries, applied after the file so that flags win.
    pub fn overrides(&self) -> Result<Vec<(String, String)>, ConfigError> {
        let mut out = Vec::new();
        if let Some(c) = &self.command {
            out.push(("command".into(), c.clone()));
        }
        if let Some(s) = self.seed {
            out.push(("seed".into(), s.to_string()));
        }
        if let Some(o) = &self.out {
            out.push(("out".into(), o.display().to_string()));
        }
        if let Some(o) = &self.only {
            out.push(("only".into(), o.clone()));
        }
        for t in &self.tol {
            let (k, v) = t.split_once('=').ok_or_else(|| ConfigError::InvalidValue {
                key: "--tol".into(),
                value: t.clone(),
                reason: "expected KEY=VAL".into(),
            })?;
            out.push((format!("tol.{}", k.trim()), v.trim().to_string()));
        }
        Ok(out)
    }
}

/// Parses arguments, runs, prints the report and returns the exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match args.overrides().and_then(|o| RunConfig::load(args.config.as_deref(), &o)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("psw: {e}");
            return 2;
        }
    };
    match commands::run(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("psw: {e}");
            e.exit_code()
        }
    }
}
