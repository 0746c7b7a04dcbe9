//! `lveg`: train and run latent vector grammar parsers and taggers.

mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "lveg", version, about = "Gaussian mixture latent vector grammars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a parser on a Penn treebank.
    Train(Settings),
    /// Train a tagger on CoNLL-U or word<TAB>tag data.
    TrainTagger(Settings),
    /// Parse sentences (one per line, or the words of Penn trees).
    Parse(Settings),
    /// Tag sentences; reports accuracy when the input carries tags.
    Tag(Settings),
    /// Score predictions against gold data.
    Eval(commands::EvalArgs),
    /// Run the oracle property suite.
    Verify(commands::VerifyArgs),
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VERIFY: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(s) => commands::train(s),
        Command::TrainTagger(s) => commands::train_tagger(s),
        Command::Parse(s) => commands::parse(s),
        Command::Tag(s) => commands::tag(s),
        Command::Eval(a) => commands::eval(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(e.downcast_ref::<lveg::Error>(), Some(lveg::Error::Config(_)));
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_DATA })
        }
    }
}
