//! Command-line front end: corpora in, graphs, prompts, checkpoints and reports out.

pub mod args;
pub mod commands;
pub mod provenance;

use std::process::ExitCode;

pub use args::{Cli, Command};
use clap::Parser;

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::BuildGraph(a) => commands::build_graph_cmd(a),
        Command::EmitPrompts(a) => commands::emit_prompts_cmd(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Cv(a) => commands::cv_cmd(a),
        Command::Xdomain(a) => commands::xdomain_cmd(a),
        Command::Synth(a) => commands::synth_cmd(a),
    }
}

/// 2 for numerical failures (non-finite activations, divergence), 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use coherent_core::Error;
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<Error>())
        .any(|e| matches!(e, Error::NonFinite { .. } | Error::Divergence { .. }));
    if numerical {
        2
    } else {
        1
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
