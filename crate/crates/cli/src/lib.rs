//! `tunalab` command line: pipeline subcommands and the HTTP service.

pub mod args;
pub mod commands;
pub mod config;
pub mod service;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, ServeArgs};
use config::ServiceConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation; exit code 1.
    Usage(String),
    /// Failure while running; exit code 2.
    Runtime(String),
}

impl From<tunalab::Error> for CliError {
    fn from(e: tunalab::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn service_config(a: &ServeArgs) -> Result<ServiceConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => ServiceConfig::from_file(p)?,
        None => ServiceConfig::default(),
    };
    if a.model.model.is_some() {
        cfg.model = a.model.model.clone();
    }
    if !a.fm.is_empty() {
        cfg.feature_models = a.fm.clone();
    }
    if let Some(b) = &a.bind {
        cfg.bind = b.clone();
    }
    if let Some(p) = a.port {
        cfg.port = p;
    }
    if let Some(m) = a.max_body_bytes {
        cfg.max_body_bytes = m;
    }
    if let Some(s) = a.seed {
        cfg.server_seed = s;
    }
    if a.static_dir.is_some() {
        cfg.static_dir = a.static_dir.clone();
    }
    Ok(cfg)
}

pub fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::TrainGenerator(a) => commands::train(a),
        Command::Fit(a) => commands::fit(a),
        Command::Edit(a) => commands::edit(a),
        Command::Invert(a) => commands::invert_cmd(a),
        Command::Interpolate(a) => commands::interpolate_cmd(a),
        Command::Metrics(a) => commands::metrics_cmd(a),
        Command::Diagnose(a) => commands::diagnose_cmd(a),
        Command::Serve(a) => service::serve(service_config(a)?),
    }
}

/// Parses `argv` (program name first) and runs it. Returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
