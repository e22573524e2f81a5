mod config;
mod run;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use run::Cli;

/// Process exit codes.
const EXIT_USAGE: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<dtvct::Error>() {
        return match e {
            dtvct::Error::Param(_) => EXIT_USAGE,
            dtvct::Error::Format(_) | dtvct::Error::Io(_) | dtvct::Error::Dimension(_) => EXIT_FORMAT,
            dtvct::Error::Divergence { .. } | dtvct::Error::EmptyData(_) => EXIT_NUMERIC,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_FORMAT;
    }
    if err.downcast_ref::<run::UsageError>().is_some() {
        return EXIT_USAGE;
    }
    1
}

fn main() -> ExitCode {
    let mut command = Cli::command();
    let names: Vec<String> = command.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        // Config entries are spliced in first; later flags must replace them.
        command = command.mut_subcommand(name, |s| s.args_override_self(true));
    }
    let args = match config::expand_config(&command, std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let matches = command.clone().get_matches_from(args);
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = command.find_subcommand(name).expect("parsed subcommand exists");
    match run::execute(cli, sub, sub_matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
