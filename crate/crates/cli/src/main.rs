mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Adversarial objectives and worst-case iteration counts of second-order methods.
#[derive(Parser, Debug)]
#[command(name = "evalcx", version)]
struct Cli {
    /// Flat key=value file supplying any long flag (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write an objective (fn.json) and its ground-truth trace (trace.csv).
    Generate(GenerateArgs),
    /// Run a method on its matching family and check the iteration count.
    Run(RunArgs),
    /// Check an objective and a trace against a method class.
    Verify(VerifyArgs),
    /// Iteration counts and slope fits over a grid of eps and alpha.
    Sweep(SweepArgs),
    /// Six-panel SVG of an objective and its derivatives.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct FamilyArgs {
    /// malpha, newton2d, sd or crs.
    #[arg(long)]
    pub family: Option<String>,
    /// Multiplier rule of the malpha family: newton, figure or regularization.
    #[arg(long)]
    pub lambda_preset: Option<String>,
    /// Regularization weight for the regularization preset.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma_bar: Option<f64>,
    #[arg(long)]
    pub kappa_rg: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trace CSV path (default: <out>/trace.csv).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also write the figure to this path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// newton, reg2alpha, gqt, trust_region, sd_goldstein or royer_wright.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Curvature tolerance of royer_wright.
    #[arg(long)]
    pub eps_h: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Objective JSON.
    pub function: PathBuf,
    /// Method or ground-truth trace CSV.
    pub trace: PathBuf,
    /// malpha or crs (default: crs for crs objectives, malpha otherwise).
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub kappa_rg: Option<f64>,
    #[arg(long)]
    pub kappa_rs: Option<f64>,
    /// Fixed κ_λ (default: derived from the trace).
    #[arg(long)]
    pub kappa_lambda: Option<f64>,
    #[arg(long)]
    pub kappa_s: Option<f64>,
    #[arg(long)]
    pub sigma_bar: Option<f64>,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub kappa2: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Report path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// One or more methods, comma separated.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run the cells one after another.
    #[arg(long)]
    pub sequential: bool,
    /// Also write the figure of every cell's objective.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Objective JSON.
    pub function: PathBuf,
    /// Top-row abscissa range `lo:hi`; empty means the full iterate range.
    #[arg(long)]
    pub range: Option<String>,
    /// Output path (default: the objective path with an .svg extension).
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Level of the guide lines (default: the stored eps).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Iterations shown in the bottom row.
    #[arg(long)]
    pub zoom: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = settings::Settings::load(cli.config.as_deref()).and_then(|s| match &cli.command {
        Command::Generate(a) => commands::generate(a, &s),
        Command::Run(a) => commands::run(a, &s),
        Command::Verify(a) => commands::verify(a, &s),
        Command::Sweep(a) => commands::sweep(a, &s),
        Command::Plot(a) => commands::plot(a, &s),
    });
    match result {
        Ok(commands::Verdict::Pass) => ExitCode::SUCCESS,
        Ok(commands::Verdict::Mismatch) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
