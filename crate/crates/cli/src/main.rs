//! `arsq`: train, decode and analyse encoder-decoder models with
//! target-side attention.

mod analyze;
mod lm;
mod settings;
mod train;
mod translate;

use std::process::ExitCode;

use clap::Command;

use settings::{Flag, Settings};

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn with_usage(mut self, usage: &str) -> Self {
        self.message = format!("{}\n\n{usage}", self.message);
        self
    }
}

impl From<arsq::Error> for CliError {
    fn from(e: arsq::Error) -> Self {
        use arsq::Error as E;
        let code = match &e {
            E::Io { .. } | E::Checkpoint { .. } => 2,
            E::Numeric(_) => 3,
            E::Dimension { .. } | E::Contract(_) | E::Input(_) | E::Parse { .. } => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// A leaf subcommand: its flags and what runs it.
struct Leaf {
    name: &'static str,
    about: &'static str,
    flags: &'static [Flag],
    run: fn(&Settings) -> CliResult,
}

const TOP: &[Leaf] = &[
    Leaf {
        name: "train",
        about: "Train a translation model on a synthetic task or a parallel corpus",
        flags: train::FLAGS,
        run: train::run,
    },
    Leaf {
        name: "translate",
        about: "Decode a file of source sentences with a trained model",
        flags: translate::FLAGS,
        run: translate::run,
    },
];

const ANALYZE: &[Leaf] = &[
    Leaf {
        name: "hist",
        about: "Relative-position histogram of maximal target-side attention",
        flags: analyze::HIST_FLAGS,
        run: analyze::hist,
    },
    Leaf {
        name: "tree",
        about: "Binary trees from target-side attention, one bracketed tree per line",
        flags: analyze::TREE_FLAGS,
        run: analyze::tree,
    },
    Leaf {
        name: "parseval",
        about: "Bracket precision and recall of predicted trees against gold trees",
        flags: analyze::PARSEVAL_FLAGS,
        run: analyze::parseval,
    },
    Leaf {
        name: "bleu",
        about: "Corpus BLEU-4 of hypotheses against references",
        flags: analyze::BLEU_FLAGS,
        run: analyze::bleu,
    },
    Leaf {
        name: "ppl",
        about: "Teacher-forced perplexity of a model on a corpus",
        flags: analyze::PPL_FLAGS,
        run: analyze::ppl,
    },
];

const LM: &[Leaf] = &[
    Leaf {
        name: "train",
        about: "Train a language model (decoder without encoder)",
        flags: lm::TRAIN_FLAGS,
        run: lm::train,
    },
    Leaf {
        name: "ppl",
        about: "Perplexity of a language model on a text file",
        flags: lm::PPL_FLAGS,
        run: lm::ppl,
    },
];

fn group(name: &'static str, about: &'static str, leaves: &[Leaf]) -> Command {
    leaves.iter().fold(
        Command::new(name)
            .about(about)
            .subcommand_required(true)
            .arg_required_else_help(true),
        |cmd, l| cmd.subcommand(settings::command(l.name, l.about, l.flags)),
    )
}

fn cli() -> Command {
    let mut cmd = Command::new("arsq")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Encoder-decoder models with target-side attention and residual connections")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for l in TOP {
        cmd = cmd.subcommand(settings::command(l.name, l.about, l.flags));
    }
    cmd.subcommand(group("analyze", "Metrics and attention analyses", ANALYZE))
        .subcommand(group("lm", "Language-model training and scoring", LM))
}

fn dispatch(cmd: &mut Command, leaves: &[Leaf], m: &clap::ArgMatches) -> CliResult {
    let (name, sub) = m.subcommand().expect("subcommand required");
    let leaf = leaves
        .iter()
        .find(|l| l.name == name)
        .expect("registered subcommand");
    let usage = cmd
        .find_subcommand_mut(name)
        .expect("registered subcommand")
        .render_usage()
        .to_string();
    let s = Settings::from_matches(sub, leaf.flags, usage)?;
    (leaf.run)(&s)
}

fn main() -> ExitCode {
    let mut cmd = cli();
    let matches = match cmd.clone().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match matches.subcommand() {
        Some(("analyze", m)) => dispatch(cmd.find_subcommand_mut("analyze").expect("analyze"), ANALYZE, m),
        Some(("lm", m)) => dispatch(cmd.find_subcommand_mut("lm").expect("lm"), LM, m),
        _ => dispatch(&mut cmd, TOP, &matches),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
