//! Command-line front end: `estimate`, `route`, `simulate` and `evaluate`.
//!
//! [`run`] takes the full argv and returns the process exit code, so the whole
//! surface is testable in-process.

mod args;
mod commands;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "ENSROUTE_THREADS";

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if let Some(threads) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
