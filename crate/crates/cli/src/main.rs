use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noisy_ar::experiment::{run_experiment, Command, ExperimentConfig};
use noisy_ar::smoother::MeasurementRange;
use noisy_ar::Error;

/// Fit autoregressive models to noisy time series.
///
/// Every subcommand reads an optional TOML config file; flags given on the
/// command line override values from the file. Results go to `--out-dir`
/// as CSV tables plus `report.json`.
#[derive(Parser, Debug)]
#[command(name = "noisy-ar", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Simulate a noisy AR trajectory.
    Simulate(Opts),
    /// Fit a scalar AR model and denoise the series.
    FitAr(Opts),
    /// Fit a first-order vector AR model across channels.
    FitVar(Opts),
    /// Fit a signature-feature nonlinear AR model.
    FitNar(Opts),
    /// Report order-selection criteria over a range of orders.
    OrderScan(Opts),
    /// Monte Carlo study of coefficient and state recovery.
    ConvergenceStudy(Opts),
    /// Monte Carlo study of robustness to an injected artefact.
    ArtefactStudy(Opts),
    /// One-step-ahead predictions from a saved model report.
    Predict(Opts),
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// TOML config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    order: Option<usize>,
    /// Largest order of an order scan.
    #[arg(long)]
    max_order: Option<usize>,
    /// Signature depth.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Input CSV, one column per channel.
    #[arg(long)]
    input: Option<PathBuf>,
    /// The input CSV starts with a header row.
    #[arg(long)]
    header: bool,
    /// 1-based channel for scalar fits.
    #[arg(long)]
    channel: Option<usize>,
    /// Fit the first difference of the input.
    #[arg(long)]
    difference: bool,
    /// Measurement terms cover only steps from the model order on.
    #[arg(long)]
    measurements_from_order: bool,
    /// Model report to predict with.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Sub {
    fn split(self) -> (Command, Opts) {
        match self {
            Sub::Simulate(o) => (Command::Simulate, o),
            Sub::FitAr(o) => (Command::FitAr, o),
            Sub::FitVar(o) => (Command::FitVar, o),
            Sub::FitNar(o) => (Command::FitNar, o),
            Sub::OrderScan(o) => (Command::OrderScan, o),
            Sub::ConvergenceStudy(o) => (Command::ConvergenceStudy, o),
            Sub::ArtefactStudy(o) => (Command::ArtefactStudy, o),
            Sub::Predict(o) => (Command::Predict, o),
        }
    }
}

fn build_config(command: Command, o: Opts) -> Result<ExperimentConfig, Error> {
    let mut c = match &o.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    c.command = Some(command);
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.rho {
        c.rho = v;
    }
    if o.lambda.is_some() {
        c.lambda = o.lambda;
    }
    if o.order.is_some() {
        c.order = o.order;
    }
    if let Some(v) = o.max_order {
        c.max_order = v;
    }
    if let Some(v) = o.depth {
        c.depth = v;
    }
    if o.iterations.is_some() {
        c.iterations = o.iterations;
    }
    if let Some(v) = o.trials {
        c.trials = v;
    }
    if o.input.is_some() {
        c.input = o.input;
    }
    if o.header {
        c.has_header = true;
    }
    if let Some(v) = o.channel {
        c.channel = v;
    }
    if o.difference {
        c.difference = true;
    }
    if o.measurements_from_order {
        c.measurements = MeasurementRange::FromOrder;
    }
    if o.model.is_some() {
        c.model = o.model;
    }
    if let Some(v) = o.out_dir {
        c.out_dir = v;
    }
    Ok(c)
}

/// Exit status for a failed run.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::RaggedRows { .. } | Error::InvalidConfig(_) => 2,
        e if e.is_numerical() => 3,
        Error::Io(_) => 4,
        _ => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = cli.command.split();
    let result = build_config(command, opts).and_then(|c| run_experiment(&c));
    match result {
        Ok(report) => {
            let dir = report.config.out_dir.display();
            println!(
                "{} finished; wrote {} files to {dir}",
                report.command,
                report.outputs.len()
            );
            for (k, v) in &report.metrics {
                println!("  {k} = {v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 3\nrho = 0.5\ntrials = 7\n").unwrap();
        let opts = Opts {
            config: Some(path),
            seed: Some(9),
            ..Default::default()
        };
        let c = build_config(Command::FitAr, opts).unwrap();
        assert_eq!((c.seed, c.rho, c.trials), (9, 0.5, 7));
        assert_eq!(c.command, Some(Command::FitAr));
    }

    #[test]
    fn exit_codes_distinct() {
        let parse = exit_code(&Error::Parse {
            row: 1,
            column: 1,
            message: String::new(),
        });
        let numeric = exit_code(&Error::SingularSystem);
        let io = exit_code(&Error::Io(String::new()));
        assert_eq!((parse, numeric, io), (2, 3, 4));
        assert_eq!(
            exit_code(&Error::NotPositiveDefinite {
                pivot: 0,
                value: -1.0
            }),
            3
        );
    }

    #[test]
    fn clap_definition_is_valid() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
