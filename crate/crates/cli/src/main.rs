//! `cedgen`: dataset generation, labeling, streaming detection, metrics,
//! rule compilation and the LLM baseline behind one executable.

mod args;
mod commands;
mod error;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::{Cli, Command};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => std::process::exit(0),
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => std::process::exit(1),
                _ => {
                    print_usage_for_args();
                    std::process::exit(1)
                }
            }
        }
    };
    let v = cli.verbose;
    let result = match &cli.command {
        Command::Gen(a) => commands::gen(a, v),
        Command::Label(a) => commands::label(a, v),
        Command::Stream(a) => commands::stream(a, v),
        Command::Eval(a) => commands::eval(a, v),
        Command::Compile(a) => commands::compile(a, v),
        Command::Llm(a) => commands::llm(a, v),
        Command::Rules(a) => commands::rules(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

/// Full help of the subcommand named on the command line, or of the
/// root command, written to standard error after a usage error.
fn print_usage_for_args() {
    let mut root = Cli::command();
    root.build();
    let sub = std::env::args()
        .skip(1)
        .find(|a| !a.starts_with('-'))
        .and_then(|name| {
            root.find_subcommand(&name)
                .map(|c| c.get_name().to_string())
        });
    let help = match sub {
        Some(name) => root
            .find_subcommand_mut(&name)
            .expect("subcommand exists")
            .render_long_help(),
        None => root.render_long_help(),
    };
    eprintln!("\n{help}");
}
