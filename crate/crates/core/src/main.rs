use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use biwheel::cli::{self, AnalyzeMode, IndexArgs, RunOptions};

#[derive(Parser)]
#[command(
    name = "biwheel",
    version,
    about = "Person/object term stream simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a semantic index bundle from plain-text corpus files.
    Index {
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_n: usize,
        #[arg(long, default_value_t = 2)]
        min_count: u64,
        #[arg(long, default_value_t = 4)]
        window: usize,
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        antonyms: Option<PathBuf>,
        #[arg(long)]
        stoplist: Option<PathBuf>,
        /// Comma-separated negator words.
        #[arg(long, value_delimiter = ',')]
        negators: Option<Vec<String>>,
    },
    /// Run a single-object net.
    Run(RunArgs),
    /// Run a net with every object listed in the config.
    RunMulti(RunArgs),
    /// Summarize a trace file.
    Analyze {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Stats)]
        mode: Mode,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        tau_peak: Option<f64>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the object streams after the run.
    #[arg(long)]
    print_oas: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Stats,
    Resonance,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> biwheel::Result<()> {
    match command {
        Command::Index {
            corpus,
            out,
            max_n,
            min_count,
            window,
            dims,
            antonyms,
            stoplist,
            negators,
        } => {
            let args = IndexArgs {
                corpus,
                max_n,
                min_count,
                window,
                dims,
                antonyms,
                stoplist,
                negators,
            };
            let index = cli::cmd_index(&args, &out)?;
            eprintln!(
                "indexed {} words, {} terms into {}",
                index.vocab().len(),
                index.inventory().len(),
                out.display()
            );
        }
        Command::Run(args) => {
            let trace = cli::cmd_run(&args.config, &options(&args))?;
            if args.print_oas {
                eprint!("{}", trace.render_oas());
            }
        }
        Command::RunMulti(args) => {
            let trace = cli::cmd_run_multi(&args.config, &options(&args))?;
            if args.print_oas {
                eprint!("{}", trace.render_oas());
            }
        }
        Command::Analyze {
            trace,
            mode,
            index,
            tau_peak,
        } => {
            let mode = match mode {
                Mode::Stats => AnalyzeMode::Stats,
                Mode::Resonance => AnalyzeMode::Resonance,
            };
            cli::write_stdout(&cli::cmd_analyze(&trace, mode, index.as_deref(), tau_peak)?)?;
        }
    }
    Ok(())
}

fn options(args: &RunArgs) -> RunOptions {
    RunOptions {
        seed: args.seed,
        out: args.out.clone(),
    }
}
