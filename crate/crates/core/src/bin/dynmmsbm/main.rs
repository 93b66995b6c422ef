mod args;
mod commands;
mod config;
mod error;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::resolve;
use error::CliError;

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (seed, threads, cfg) = (cli.seed, cli.threads, cli.config.as_deref());
    macro_rules! run {
        ($name:literal, $args:expr, $f:path) => {{
            let r = resolve($name, &$args, seed, threads, cfg)?;
            if r.threads > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(r.threads)
                    .build_global()
                    .map_err(|e| CliError::Run(e.to_string()))?;
            }
            $f(r)
        }};
    }
    match cli.command {
        Command::Simulate(a) => run!("simulate", a, commands::simulate),
        Command::Fit(a) => run!("fit", a, commands::fit),
        Command::Predict(a) => run!("predict", a, commands::predict),
        Command::Forecast(a) => run!("forecast", a, commands::forecast_cmd),
        Command::Effects(a) => run!("effects", a, commands::effects),
        Command::EvalAuroc(a) => run!("eval-auroc", a, commands::eval_auroc),
        Command::OnlineFit(a) => run!("online-fit", a, commands::online_fit),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
