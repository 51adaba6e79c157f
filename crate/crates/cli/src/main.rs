mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, ClutchCommand, Command, SimulateCommand, StatsCommand};
use commands::Context;

fn run(cli: &Cli) -> glovekit::Result<()> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Design(a) => commands::design(&ctx, a),
        Command::Coverage(a) => commands::coverage(&ctx, a),
        Command::Simulate(SimulateCommand::Pickplace(a)) => commands::pickplace(&ctx, a),
        Command::Simulate(SimulateCommand::Softness(a)) => commands::softness(&ctx, a),
        Command::Clutch(ClutchCommand::Sweep(a)) => commands::clutch_sweep(&ctx, a),
        Command::Render(a) => commands::render(&ctx, a),
        Command::Stats(StatsCommand::Wilcoxon(a)) => commands::wilcoxon(&ctx, a),
        Command::Stats(StatsCommand::Binomial(a)) => commands::binomial(&ctx, a),
        Command::Stats(StatsCommand::Holm(a)) => commands::holm(&ctx, a),
        Command::Fk(a) => commands::fk(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("glovekit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
