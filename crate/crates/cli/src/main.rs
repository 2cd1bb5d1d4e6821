use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use kummerwitt_cli::problem::{parse, InputError, Problem, Task};
use kummerwitt_cli::report::{run_document, to_pretty};
use kummerwitt_cli::scoreboard::{corpus_document, run_corpus};
use kummerwitt_cli::tasks::{run, RunError, RunOptions};
use serde_json::json;

#[derive(Parser)]
#[command(name = "kummerwitt", version, about = "Witt vectors, group cohomology and cocycle lifting at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task described by a problem file.
    Run {
        file: PathBuf,
        /// Print the JSON report instead of the summary.
        #[arg(long)]
        json: bool,
        /// Also write the JSON report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Enumeration cap passed to the task.
        #[arg(long)]
        bound: Option<usize>,
        /// Override the task named in the file.
        #[arg(long, value_enum)]
        task: Option<Task>,
        /// Assert that no randomness is used (all tasks are deterministic).
        #[arg(long)]
        seedless: bool,
        /// Exit 0 on a negative verdict.
        #[arg(long)]
        allow_negative: bool,
    },
    /// Run the built-in acceptance corpus.
    Corpus {
        /// Only entries whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

const EXIT_NEGATIVE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_FAILED: u8 = 3;

fn input_error(path: &std::path::Path, e: &InputError) -> ExitCode {
    eprintln!("error: {}: {e}", path.display());
    ExitCode::from(EXIT_INPUT)
}

#[allow(clippy::too_many_arguments)]
fn run_command(
    file: PathBuf,
    json: bool,
    output: Option<PathBuf>,
    bound: Option<usize>,
    task: Option<Task>,
    seedless: bool,
    allow_negative: bool,
) -> ExitCode {
    let text = match std::fs::read_to_string(&file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let spec = match parse(&text) {
        Ok(s) => s,
        Err(e) => return input_error(&file, &e),
    };
    let echo = serde_json::to_value(&spec).expect("spec serializes");
    let problem = match Problem::new(spec, task) {
        Ok(p) => p,
        Err(e) => return input_error(&file, &e),
    };
    let start = Instant::now();
    let report = match run(&problem, &RunOptions { bound }) {
        Ok(r) => r,
        Err(RunError::Input(e)) => return input_error(&file, &e),
        Err(e @ RunError::Bound(_)) => {
            eprintln!("error: {}: {e}", file.display());
            return ExitCode::from(EXIT_INPUT);
        }
        Err(e) => {
            eprintln!("error: {}: {e}", file.display());
            return ExitCode::from(EXIT_FAILED);
        }
    };
    let elapsed = start.elapsed();
    let flags = json!({ "bound": bound, "task_override": task.map(|t| t.name()), "seedless": seedless });
    let doc = run_document(&echo, &flags, &report);
    let pretty = to_pretty(&doc);
    if let Some(path) = &output {
        if let Err(e) = std::fs::write(path, &pretty) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_FAILED);
        }
    }
    if json {
        print!("{pretty}");
    } else {
        println!("task: {}", report.task);
        for line in &report.summary {
            println!("{line}");
        }
        println!("verdict: {}", if report.verdict { "positive" } else { "negative" });
        println!("run hash: {}", doc["run_hash"].as_str().unwrap_or_default());
        println!("elapsed: {:.3} s", elapsed.as_secs_f64());
    }
    if report.verdict || allow_negative {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NEGATIVE)
    }
}

fn corpus_command(filter: Option<String>, json: bool) -> ExitCode {
    let outcomes = run_corpus(filter.as_deref(), |o| {
        if !json {
            println!("[{}] criterion {:>2} {}", if o.passed { "PASS" } else { "FAIL" }, o.criterion, o.name);
            if !o.passed {
                println!("       {}", o.detail);
            }
        }
    });
    let doc = corpus_document(&outcomes, filter.as_deref());
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if json {
        print!("{}", to_pretty(&doc));
    } else {
        println!("{} passed, {} failed", outcomes.len() - failed, failed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NEGATIVE)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            file,
            json,
            output,
            bound,
            task,
            seedless,
            allow_negative,
        } => run_command(file, json, output, bound, task, seedless, allow_negative),
        Command::Corpus { filter, json } => corpus_command(filter, json),
    }
}
