//! The `veil` command: analyze, apply, eval and serve.
//!
//! Exit codes: 0 success, 1 runtime failure (including a port that cannot
//! be bound), 2 invalid input or configuration, 3 backend failure, 4 model
//! output still unparseable after the retry, 5 evaluation cases failed.

pub mod analyze;
pub mod apply;
pub mod args;
pub mod error;
pub mod eval;
pub mod serve;
pub mod setup;

use std::io::Write;

pub use args::Cli;
pub use error::CliError;

use args::Command;

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze(a) => analyze::run(a, stdout),
        Command::Apply(a) => apply::run(a, stdout),
        Command::Eval(a) => eval::run(a, stdout),
        Command::Serve(a) => serve::run(a, stdout),
    }
}
