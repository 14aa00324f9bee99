//! Command-line front end: build indexes from files, run edit/query scripts,
//! benchmark, and fuzz against a naive oracle.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unreadable input,
//! malformed script, failed query without `--keep-going`, corrupt index),
//! 3 oracle divergence found by `fuzz`.

mod bench;
mod build;
mod fuzz;
mod index;
mod query;
mod report;
mod script;

use clap::{Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "sdseq",
    version,
    about = "Compressed dynamic sequence indexes: build, query, bench, fuzz"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an index file from a text file.
    Build(build::BuildArgs),
    /// Run an edit/query script against an index.
    Query(query::QueryArgs),
    /// Measure operation latencies, update-cost spread, and scaling.
    Bench(bench::BenchArgs),
    /// Run a randomized op stream against a naive oracle.
    Fuzz(fuzz::FuzzArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests exit 0; real usage errors exit 1.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Build(a) => build::run(a),
        Cmd::Query(a) => query::run(a),
        Cmd::Bench(a) => bench::run(a),
        Cmd::Fuzz(a) => fuzz::run(a),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(EXIT_DATA);
        }
    }
}
