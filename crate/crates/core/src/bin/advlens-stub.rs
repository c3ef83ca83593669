//! Deterministic stub inference backend speaking the advlens stdio protocol.

use std::io::{BufRead, Write};

use advlens::dataset::Task;
use advlens::stub::StubBackend;
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Classification,
    Detection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Normal,
    /// Never send the handshake.
    Silent,
    /// Handshake normally, then answer every request with a non-JSON line.
    Garbage,
}

#[derive(Parser, Debug)]
#[command(name = "advlens-stub", about = "Deterministic stub backend for advlens")]
struct Args {
    #[arg(long, value_enum, default_value = "classification")]
    task: TaskArg,
    #[arg(long, default_value_t = 1000)]
    classes: usize,
    #[arg(long, default_value_t = 224)]
    width: usize,
    #[arg(long, default_value_t = 224)]
    height: usize,
    /// Exit without answering once this many requests were served.
    #[arg(long)]
    fail_after: Option<usize>,
    #[arg(long, value_enum, default_value = "normal")]
    mode: Mode,
}

fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let task = match args.task {
        TaskArg::Classification => Task::Classification,
        TaskArg::Detection => Task::Detection,
    };
    let stub = StubBackend::new(task, args.width, args.height, args.classes);
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    match args.mode {
        Mode::Normal => stub.serve(stdin, stdout, args.fail_after),
        Mode::Silent => {
            for line in stdin.lines() {
                line?;
            }
            Ok(())
        }
        Mode::Garbage => {
            let mut stdout = stdout;
            writeln!(
                stdout,
                "{}",
                serde_json::to_string(&advlens::protocol::BackendMessage::Handshake(stub.handshake().clone()))?
            )?;
            stdout.flush()?;
            for line in stdin.lines() {
                line?;
                writeln!(stdout, "this is not json")?;
                stdout.flush()?;
            }
            Ok(())
        }
    }
}
