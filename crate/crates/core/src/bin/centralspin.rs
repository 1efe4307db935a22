use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use centralspin::analytic::Curve;
use centralspin::experiments::{
    extract_envelope, oscillation_period, run, sidecar_path, Experiment, ExperimentConfig, Sidecar, VERSION,
};
use centralspin::hilbert::BathMeasure;
use centralspin::propagator::{TimeGrid, TimeSeries};
use centralspin::Error;

#[derive(Parser)]
#[command(name = "centralspin", version, about = "Central spin decoherence simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Realization-averaged simulation (random couplings when --jitter > 0).
    Simulate(Common),
    /// Closed-form or finite-N analytic curve.
    Analytic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "closed-form")]
        curve: CurveArg,
    },
    /// Same bath seen by 1, 2 and 3 central spins.
    Parity(Common),
    /// Bath spin weights, exact and Gaussian.
    Weights(Common),
    /// Envelope of a series CSV, or of a fresh simulation.
    Envelope {
        #[command(flatten)]
        common: Common,
        /// Series CSV (`t,sigma1z`) to analyse instead of simulating.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Oscillation period; derived from the couplings when omitted.
        #[arg(long)]
        period: Option<f64>,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    n_bath: Option<usize>,
    #[arg(long)]
    n_central: Option<usize>,
    #[arg(long)]
    j0: Option<f64>,
    #[arg(long)]
    j: Option<f64>,
    /// Relative coupling spread.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum)]
    measure: Option<MeasureArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config; its fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Haar,
    Basis,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveArg {
    ClosedForm,
    Semianalytic,
    Envelope,
}

impl Common {
    fn resolve(&self, experiment: Experiment) -> centralspin::Result<ExperimentConfig> {
        let mut c = ExperimentConfig { experiment, ..Default::default() };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        set!(n_bath, n_central, j0, j, jitter, seed, realizations);
        if let Some(m) = self.measure {
            c.bath_state_measure = match m {
                MeasureArg::Haar => BathMeasure::Haar,
                MeasureArg::Basis => BathMeasure::Basis,
            };
        }
        if self.t_max.is_some() || self.samples.is_some() {
            let default = c.resolved_grid()?;
            c.grid = Some(TimeGrid {
                t_max: self.t_max.unwrap_or(default.t_max),
                n_samples: self.samples.unwrap_or(default.n_samples),
            });
        }
        c.output = self.out.clone();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            c = c.merged_with_json(&text)?;
            c.experiment = experiment;
        }
        Ok(c)
    }
}

fn simulation_kind(c: &ExperimentConfig) -> Experiment {
    let unequal = c.couplings.as_ref().is_some_and(|v| v.windows(2).any(|w| w[0] != w[1]));
    if c.jitter > 0.0 || unequal || c.n_central != 2 {
        Experiment::RandomCoupling
    } else {
        Experiment::EqualCoupling
    }
}

fn envelope_of_file(c: &ExperimentConfig, input: &PathBuf, period: Option<f64>) -> centralspin::Result<()> {
    let file = std::fs::File::open(input).map_err(|e| Error::Config(format!("cannot open {}: {e}", input.display())))?;
    let series = TimeSeries::read_csv(std::io::BufReader::new(file)).map_err(|e| Error::Config(e.to_string()))?;
    let period = period
        .or_else(|| oscillation_period(c.n_central, c.j0, c.j))
        .ok_or_else(|| Error::Config("no oscillation period for these parameters; pass --period".into()))?;
    let env = extract_envelope(&series, period)?;
    let summary = serde_json::json!({
        "input": input,
        "period": period,
        "peaks": env.len(),
        "tail_mean": env.tail_mean,
        "tail_stddev": env.tail_stddev,
    });
    match &c.output {
        Some(out) => {
            env.write_csv(std::io::BufWriter::new(std::fs::File::create(out)?))?;
            let sidecar = Sidecar {
                version: VERSION,
                seed: c.seed,
                config: c.clone(),
                grid: None,
                propagator: None,
                outputs: vec![out.clone()],
                summary: summary.clone(),
            };
            std::fs::write(sidecar_path(out), serde_json::to_string_pretty(&sidecar)? + "\n")?;
        }
        None => env.write_csv(std::io::stdout().lock())?,
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn execute(cli: Cli) -> centralspin::Result<()> {
    let config = match &cli.command {
        Command::Simulate(common) => {
            let mut c = common.resolve(Experiment::EqualCoupling)?;
            c.experiment = simulation_kind(&c);
            c
        }
        Command::Analytic { common, curve } => {
            let mut c = common.resolve(Experiment::AnalyticCurve)?;
            c.curve = match curve {
                CurveArg::ClosedForm => Curve::ClosedForm,
                CurveArg::Semianalytic => Curve::Semianalytic,
                CurveArg::Envelope => Curve::Envelope,
            };
            c
        }
        Command::Parity(common) => {
            let mut c = common.resolve(Experiment::ParitySweep)?;
            if let Some(n) = common.n_central {
                c.parity_central = vec![n];
            }
            c
        }
        Command::Weights(common) => common.resolve(Experiment::Weights)?,
        Command::Envelope { common, input, period } => {
            let mut c = common.resolve(Experiment::EqualCoupling)?;
            c.experiment = simulation_kind(&c);
            if let Some(input) = input {
                return envelope_of_file(&c, input, *period);
            }
            c
        }
    };
    let report = run(&config)?;
    if config.experiment == Experiment::Weights && config.output.is_none() {
        print!("{}", report.summary["csv"].as_str().unwrap_or_default());
    } else {
        println!("{}", serde_json::to_string_pretty(&report.summary)?);
    }
    for p in &report.outputs {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_numerical() => {
            eprintln!("error: {e}");
            if let Some(r) = e.residual() {
                eprintln!("residual: {r:e}");
            }
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
