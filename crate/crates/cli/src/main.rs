use std::process::ExitCode;

use clap::Parser;
use relaysched_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors count as validation failures
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            for f in &summary.files {
                eprintln!("wrote {}", f.display());
            }
            if summary.checked {
                for miss in &summary.check_failures {
                    eprintln!("check failed: {miss}");
                }
            }
            ExitCode::from(summary.exit_code())
        }
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
