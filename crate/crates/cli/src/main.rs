//! Command-line front end: run traces, generate workloads, benchmark.
//!
//! Exit codes: 0 on success, 1 on any input problem (bad flags, malformed
//! traces, contract violations), 2 when the auditor finds the structure
//! internally inconsistent.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use dyconn::Encoding;
use dyconn_cli::{exec, gen, trace};

#[derive(Parser)]
#[command(
    name = "dyconn",
    about = "Dynamic-connectivity trace driver",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a trace, printing one 0/1 line per query.
    Run {
        /// Trace file (see `generate` for the format).
        trace: PathBuf,
        #[command(flatten)]
        flags: EngineFlags,
    },
    /// Emit a random trace on standard output.
    Generate {
        /// Number of vertices.
        #[arg(long)]
        n: u32,
        /// Maximum number of live edges.
        #[arg(long)]
        mhat: usize,
        /// Number of operations.
        #[arg(long)]
        ops: usize,
        /// Insert,delete,query proportions (fractions or weights).
        #[arg(long, default_value = "40,30,30")]
        mix: gen::Mix,
        /// Generator seed; identical seeds give identical traces.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the trace here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Replay a trace, printing one CSV row of counters per operation.
    Bench {
        trace: PathBuf,
        #[command(flatten)]
        flags: EngineFlags,
    },
}

#[derive(Args)]
struct EngineFlags {
    /// Adjacency-matrix encoding.
    #[arg(long, value_enum, default_value_t = EncodingArg::Dense)]
    encoding: EncodingArg,
    /// Force the chunk mass parameter K (testing only).
    #[arg(long)]
    k_override: Option<u32>,
    /// Force the superchunk arity parameter h (testing only).
    #[arg(long)]
    h_override: Option<u32>,
    /// Pretend machine words have this many bits (testing only).
    #[arg(long)]
    word_bits: Option<u32>,
    /// Audit the full structure after every N-th operation.
    #[arg(long, value_name = "N")]
    audit_every: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    Dense,
    Packed,
}

impl EngineFlags {
    fn config(&self) -> exec::RunConfig {
        exec::RunConfig {
            encoding: match self.encoding {
                EncodingArg::Dense => Encoding::Dense,
                EncodingArg::Packed => Encoding::Packed,
            },
            k_override: self.k_override,
            h_override: self.h_override,
            word_bits: self.word_bits,
            audit_every: self.audit_every,
        }
    }
}

fn load(path: &PathBuf) -> Result<trace::Trace, exec::ExecError> {
    let text = fs::read_to_string(path)
        .map_err(|e| exec::ExecError::Input(format!("{}: {e}", path.display())))?;
    trace::parse(&text)
        .map_err(|e| exec::ExecError::Input(format!("{}: {e}", path.display())))
}

fn dispatch(cmd: Cmd) -> Result<(), exec::ExecError> {
    match cmd {
        Cmd::Run { trace, flags } => {
            let t = load(&trace)?;
            let stdout = io::stdout();
            exec::run(&t, &flags.config(), &mut stdout.lock())
        }
        Cmd::Generate {
            n,
            mhat,
            ops,
            mix,
            seed,
            output,
        } => {
            let t = gen::generate(n, mhat, ops, mix, seed).map_err(exec::ExecError::Input)?;
            match output {
                Some(path) => fs::write(&path, t.to_string())
                    .map_err(|e| exec::ExecError::Input(format!("{}: {e}", path.display()))),
                None => {
                    let stdout = io::stdout();
                    write!(stdout.lock(), "{t}").map_err(Into::into)
                }
            }
        }
        Cmd::Bench { trace, flags } => {
            let t = load(&trace)?;
            let stdout = io::stdout();
            exec::bench(&t, &flags.config(), &mut stdout.lock())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dyconn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
