use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use tetrys_sim::{load_spec, render_table, run_sweep, summarize_csv, write_outputs, RunOptions};

#[derive(Parser)]
#[command(name = "tetrys-sim", version, about = "Multipath streaming simulator: on-the-fly coding vs block FEC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a spec file or a builtin (fig3, fig4, table2, table3, table4).
    Run {
        spec: String,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Parallel worker threads.
        #[arg(long)]
        workers: Option<usize>,
        /// Base seed, overriding the spec.
        #[arg(long)]
        seed: Option<u64>,
        /// Write a JSON-lines event trace per run under <out>/trace.
        #[arg(long)]
        trace: bool,
    },
    /// Print mean ± standard deviation tables for a results CSV.
    Summarize { csv: PathBuf },
    /// List builtin spec names.
    List,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { spec, out, workers, seed, trace } => {
            let spec = load_spec(&spec)?;
            if workers == Some(0) {
                anyhow::bail!("--workers must be at least 1");
            }
            let runs = spec.len() * spec.replications as usize;
            eprintln!("{}: {runs} run(s)", spec.name);
            let opts = RunOptions { workers, seed, trace_dir: trace.then(|| out.join("trace")) };
            let output = run_sweep(&spec, &opts)?;
            let path = write_outputs(&out, &spec.name, &output)?;
            print!("{}", render_table(&output.summary()));
            eprintln!("wrote {}", path.display());
        }
        Command::Summarize { csv } => {
            let file = File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            let groups = summarize_csv(file).with_context(|| format!("summarizing {}", csv.display()))?;
            print!("{}", render_table(&groups));
        }
        Command::List => {
            for name in tetrys_sim::spec::builtin_names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}
