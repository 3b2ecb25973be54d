mod args;
mod commands;
mod error;
mod render;

use std::io::Write;

use clap::Parser;

use crate::args::Cli;
use crate::commands::Output;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = match commands::run(&cli) {
        Ok(output) => {
            let text = match output {
                Output::Json(v) => serde_json::to_string_pretty(&v).expect("json serializes") + "\n",
                Output::Text(t) => t,
            };
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: stdout: {e}");
                    3
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
