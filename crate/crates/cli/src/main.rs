//! `mdrelax` command-line harness.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mdrelax::harness::{
    cmd_convergence, cmd_gamma_trace, cmd_growth, plot_script, DtSpec, FunctionalKind, HarnessError, PlotKind,
    ProblemKind, RunOutcome, RunSpec,
};
use mdrelax::{builtin, CorrectorScaling, QuadratureSource, Tableau};

#[derive(Parser)]
#[command(name = "mdrelax", version, about = "Multiderivative predictor-corrector experiments with relaxation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error and η over time for a single step size (`t,error,eta`).
    Growth(RunArgs),
    /// Final-time error for a list of step sizes and the fitted order (`dt,error,eta_drift`).
    Convergence(RunArgs),
    /// Relaxation parameter per step (`t,gamma`).
    GammaTrace(RunArgs),
    /// Tableau utilities.
    Tableau {
        #[command(subcommand)]
        action: TableauAction,
    },
    /// Write a matplotlib script for growth or convergence CSVs.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKindArg,
        /// Script destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TableauAction {
    /// Print a builtin tableau as JSON.
    Dump {
        #[arg(long)]
        name: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKindArg {
    Growth,
    Convergence,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Oscillator,
    Kepler,
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionalArg {
    Default,
    Hamiltonian,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Global,
    PerStage,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    IterateK,
    SerialSweep,
}

/// Flags override values from `--config`.
#[derive(Args)]
struct RunArgs {
    /// JSON file with RunSpec fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<ProblemArg>,
    #[arg(long)]
    tableau: Option<String>,
    #[arg(long)]
    kmax: Option<usize>,
    /// `--relaxed` or `--relaxed=false`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    relaxed: Option<bool>,
    /// One step size, or a comma-separated list for convergence studies.
    #[arg(long, value_delimiter = ',')]
    dt: Vec<f64>,
    #[arg(long)]
    tend: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    functional: Option<FunctionalArg>,
    #[arg(long, value_enum)]
    corrector_scaling: Option<ScalingArg>,
    #[arg(long, value_enum)]
    quadrature_source: Option<SourceArg>,
}

impl RunArgs {
    fn spec(&self) -> Result<RunSpec, HarnessError> {
        let mut spec = match &self.config {
            Some(path) => RunSpec::from_file(path)?,
            None => RunSpec::default(),
        };
        if let Some(p) = self.problem {
            spec.problem = match p {
                ProblemArg::Oscillator => ProblemKind::Oscillator,
                ProblemArg::Kepler => ProblemKind::Kepler,
            };
        }
        if let Some(t) = &self.tableau {
            spec.tableau = t.clone();
        }
        if let Some(k) = self.kmax {
            spec.kmax = k;
        }
        if let Some(r) = self.relaxed {
            spec.relaxed = r;
        }
        match self.dt.as_slice() {
            [] => {}
            [dt] => spec.dt = Some(DtSpec::Single(*dt)),
            list => spec.dt = Some(DtSpec::List(list.to_vec())),
        }
        if let Some(t) = self.tend {
            spec.t_end = t;
        }
        if let Some(out) = &self.out {
            spec.output_dir = out.clone();
        }
        if let Some(f) = self.functional {
            spec.functional = match f {
                FunctionalArg::Default => FunctionalKind::Default,
                FunctionalArg::Hamiltonian => FunctionalKind::Hamiltonian,
            };
        }
        if let Some(s) = self.corrector_scaling {
            spec.corrector_scaling = match s {
                ScalingArg::Global => CorrectorScaling::Global,
                ScalingArg::PerStage => CorrectorScaling::PerStage,
            };
        }
        if let Some(s) = self.quadrature_source {
            spec.quadrature_source = match s {
                SourceArg::IterateK => QuadratureSource::IterateK,
                SourceArg::SerialSweep => QuadratureSource::SerialSweep,
            };
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Prints the outcome of a single run; true if it reached `T_end`.
fn report_run(outcome: &RunOutcome) -> bool {
    if let Some(path) = &outcome.path {
        println!("wrote {}", path.display());
    }
    let run = &outcome.trajectory;
    println!(
        "steps {}, final t {}, max |eta - eta0| {:e}",
        run.records.len(),
        run.final_time(),
        run.max_eta_drift()
    );
    match &outcome.failure {
        None => true,
        Some(e) => {
            match e.time() {
                Some(t) => eprintln!("run aborted at t = {t}: {e}"),
                None => eprintln!("run aborted: {e}"),
            }
            false
        }
    }
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Growth(args) => Ok(report_run(&cmd_growth(&args.spec()?)?)),
        Command::GammaTrace(args) => Ok(report_run(&cmd_gamma_trace(&args.spec()?)?)),
        Command::Convergence(args) => {
            let report = cmd_convergence(&args.spec()?)?;
            if let Some(path) = &report.path {
                println!("wrote {}", path.display());
            }
            for row in &report.rows {
                println!("dt {:<10} error {:.3e}  eta drift {:.3e}", row.dt, row.error, row.eta_drift);
            }
            match report.fitted_order() {
                Ok(p) => println!("observed order {p:.3} (expected {})", report.expected_order),
                Err(e) => eprintln!("no order fit: {e}"),
            }
            for f in &report.failures {
                eprintln!("run with dt = {} aborted: {}", f.dt, f.error);
            }
            Ok(report.failures.is_empty())
        }
        Command::Tableau {
            action: TableauAction::Dump { name },
        } => {
            let tableau: Tableau = builtin(&name)?;
            emit(&format!("{}\n", tableau.to_json()))?;
            Ok(true)
        }
        Command::Plot { kind, out, csv } => {
            let kind = match kind {
                PlotKindArg::Growth => PlotKind::Growth,
                PlotKindArg::Convergence => PlotKind::Convergence,
            };
            let script = plot_script(&csv, kind)?;
            match out {
                Some(path) => {
                    fs::write(&path, script)?;
                    println!("wrote {}", path.display());
                }
                None => emit(&script)?,
            }
            Ok(true)
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> io::Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
