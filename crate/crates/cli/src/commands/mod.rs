mod eval;
mod gradcheck;
mod synth;
mod sweep;
mod train;
mod viz;

use crate::args::{Cli, Command};
use crate::error::{CliError, Result};
use crate::settings::FileConfig;
use std::path::Path;

pub const CHECKPOINT_FILE: &str = "checkpoint.hpck";
pub const LOG_FILE: &str = "train_log.tsv";
pub const REPORT_FILE: &str = "report.json";

pub fn run(cli: &Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth(a) => synth::run(a),
        Command::TrainSyntax(a) => train::run_syntax(a, &file),
        Command::TrainSentiment(a) => train::run_sentiment(a, &file),
        Command::Eval(a) => eval::run(a, &file),
        Command::Sweep(a) => sweep::run(a, &file),
        Command::Gradcheck(a) => gradcheck::run(a),
        Command::Viz(a) => viz::run(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
