use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gaussnm::channels::{trajectory, Channel, Mode};
use gaussnm::experiments::{
    build_channel, compute_measure, parse_rate, run, Experiment, ExperimentConfig, MeasureSpec, MethodChoice,
};
use gaussnm::gauss::{bures_distance, fidelity, make_gaussian, StatePairParams, StateParams};
use gaussnm::measure::{window_grid, MeasureConfig, MeasureResult, ParamBounds};
use gaussnm::spectral::{build_coefficients, settling_horizon, EnvironmentSpec};
use gaussnm::Error;

/// Fidelity-based non-Markovianity of single-mode Gaussian channels.
///
/// Units: ħ = k_B = 1. Times, frequencies and temperatures are dimensionless
/// and share one time unit; the coupling α is dimensionless.
#[derive(Parser)]
#[command(name = "gaussnm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fidelity and Bures distance between two Gaussian states.
    Fidelity(FidelityArgs),
    /// Tabulate γ(t), Δ(t), x(t), y(t) of the QBM channel as CSV.
    Coeffs(CoeffsArgs),
    /// Evolve one state through a channel and write its moments as CSV.
    Evolve(EvolveArgs),
    /// Compute the non-Markovianity measure and print a CSV record.
    Measure(MeasureArgs),
    /// Reproduce a figure's tables from built-in defaults or a config file.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct FidelityArgs {
    /// Thermal occupation N of state 1 (mean photons, ≥ 0)
    #[arg(long = "n1", allow_hyphen_values = true)]
    n1: f64,
    /// Squeezing r of state 1 (≥ 0)
    #[arg(long = "r1", allow_hyphen_values = true)]
    r1: f64,
    /// Squeezing angle φ of state 1 (radians)
    #[arg(long = "phi1", allow_hyphen_values = true)]
    phi1: f64,
    /// Displacement |β| of state 1 (≥ 0)
    #[arg(long = "beta-mag1", allow_hyphen_values = true)]
    beta_mag1: f64,
    /// Displacement phase θ of state 1 (radians)
    #[arg(long = "beta-arg1", allow_hyphen_values = true)]
    beta_arg1: f64,
    /// Thermal occupation N of state 2 (mean photons, ≥ 0)
    #[arg(long = "n2", allow_hyphen_values = true)]
    n2: f64,
    /// Squeezing r of state 2 (≥ 0)
    #[arg(long = "r2", allow_hyphen_values = true)]
    r2: f64,
    /// Squeezing angle φ of state 2 (radians)
    #[arg(long = "phi2", allow_hyphen_values = true)]
    phi2: f64,
    /// Displacement |β| of state 2 (≥ 0)
    #[arg(long = "beta-mag2", allow_hyphen_values = true)]
    beta_mag2: f64,
    /// Displacement phase θ of state 2 (radians)
    #[arg(long = "beta-arg2", allow_hyphen_values = true)]
    beta_arg2: f64,
}

#[derive(Args, Clone)]
struct EnvArgs {
    /// Oscillator frequency ω₀ (inverse time units)
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
    /// Ohmic cutoff frequency ω_c (inverse time units)
    #[arg(long = "omega-c", default_value_t = 0.2)]
    omega_c: f64,
    /// Bath temperature k_BT (in the unit chosen by --temperature-unit)
    #[arg(long = "T", default_value_t = 0.0)]
    temperature: f64,
    /// Unit of --T: absolute, or multiples of ħω₀ or ħω_c
    #[arg(long = "temperature-unit", value_enum, default_value_t = TempUnit::Absolute)]
    temperature_unit: TempUnit,
}

#[derive(Clone, Copy, ValueEnum)]
enum TempUnit {
    Absolute,
    Omega0,
    OmegaC,
}

impl EnvArgs {
    fn spec(&self) -> gaussnm::Result<EnvironmentSpec> {
        let t = match self.temperature_unit {
            TempUnit::Absolute => self.temperature,
            TempUnit::Omega0 => self.temperature * self.omega0,
            TempUnit::OmegaC => self.temperature * self.omega_c,
        };
        EnvironmentSpec::new(self.omega0, self.omega_c, t)
    }
}

#[derive(Args)]
struct CoeffsArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Coupling α (dimensionless, > 0)
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// End time of the table (time units); defaults to the settling horizon
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Number of grid cells
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Damping,
    Qbm,
}

impl ChannelArg {
    fn name(self) -> &'static str {
        match self {
            ChannelArg::Damping => "damping",
            ChannelArg::Qbm => "qbm",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RateArg {
    /// ½e^{-t/10} sin t, frozen after t = 5π/2
    Paper,
    /// Constant rate given by --gamma0
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    FirstOrder,
}

#[derive(Args, Clone)]
struct ChannelArgs {
    /// Channel
    #[arg(long, value_enum)]
    channel: ChannelArg,
    /// Coupling α (dimensionless, > 0)
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Damping rate profile (damping channel)
    #[arg(long, value_enum, default_value_t = RateArg::Paper)]
    rate: RateArg,
    /// Constant damping rate γ₀ (inverse time units; with --rate constant)
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    gamma0: f64,
    #[command(flatten)]
    env: EnvArgs,
    /// Time cells of the QBM coefficient table
    #[arg(long = "coeff-steps", default_value_t = 2000)]
    coeff_steps: usize,
}

impl ChannelArgs {
    fn rate_name(&self) -> &'static str {
        match self.rate {
            RateArg::Paper => "paper",
            RateArg::Constant => "constant",
        }
    }

    /// Unit-coupling coefficient table over the settling horizon, for QBM.
    fn unit_table(&self) -> gaussnm::Result<Option<gaussnm::spectral::ChannelCoefficients>> {
        match self.channel {
            ChannelArg::Damping => Ok(None),
            ChannelArg::Qbm => {
                let env = self.env.spec()?;
                let horizon = settling_horizon(&env)?;
                Ok(Some(build_coefficients(&env, 1.0, horizon, self.coeff_steps)?))
            }
        }
    }
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Thermal occupation N (mean photons, ≥ 0)
    #[arg(long, default_value_t = 0.0)]
    n: f64,
    /// Squeezing r (≥ 0)
    #[arg(long, default_value_t = 0.0)]
    r: f64,
    /// Squeezing angle φ (radians)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi: f64,
    /// Displacement |β| (≥ 0)
    #[arg(long = "beta-mag", default_value_t = 0.0)]
    beta_mag: f64,
    /// Displacement phase θ (radians)
    #[arg(long = "beta-arg", default_value_t = 0.0, allow_hyphen_values = true)]
    beta_arg: f64,
    /// Exact map or its first-order expansion in α
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// End time (time units); defaults to 4π for damping, the table end for QBM
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Number of time samples, including both ends
    #[arg(long, default_value_t = 401)]
    points: usize,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Coherent,
    Squeezed,
    CoherentThermal,
    GeneralPure,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Maximize over the family on the exact channel
    Numeric,
    /// Closed form for coherent pairs
    Closed,
    /// Leading order in α
    FirstOrder,
}

#[derive(Args)]
struct MeasureArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Family of initial pairs
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Evaluation method
    #[arg(long, value_enum, default_value_t = MethodArg::Numeric)]
    method: MethodArg,
    /// Fixed squeezing angle φ in (0, π] (radians); optimized when omitted
    #[arg(long)]
    phi: Option<f64>,
    /// Optimize r₁ and r₂ independently instead of imposing r₁ = r₂
    #[arg(long = "free-r")]
    free_r: bool,
    /// Thermal occupation N for first-order coherent-thermal pairs (≥ 0)
    #[arg(long, default_value_t = 0.0)]
    thermal: f64,
    /// Observation window [0, window] (time units)
    #[arg(long)]
    window: Option<f64>,
    /// Time cells per observation window
    #[arg(long = "grid-steps", default_value_t = 2000)]
    grid_steps: usize,
    /// Upper bound on |β| (≥ 0)
    #[arg(long = "beta-max", default_value_t = 6.0)]
    beta_max: f64,
    /// Upper bound on r (≥ 0)
    #[arg(long = "squeeze-max", default_value_t = 6.0)]
    squeeze_max: f64,
    /// Upper bound on N (mean photons)
    #[arg(long = "thermal-max", default_value_t = 5.0)]
    thermal_max: f64,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Figure number, 1 to 5
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=5), required_unless_present = "config")]
    figure: Option<u32>,
    /// Config file (`schema=1` key=value text); overrides the figure defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Failure with the exit code of the CLI contract.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::NonPhysical(_) | Error::Config(_) | Error::Range { .. } => 2,
            Error::UnsupportedShape(_) => 3,
            Error::Io(_) => 4,
            Error::Convergence { .. } | Error::Numerical(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn arg_error(flag: &str, message: &str) -> Failure {
    Failure {
        code: 2,
        message: format!("{flag}: {message}"),
    }
}

fn state_from_flags(suffix: &str, n: f64, r: f64, phi: f64, beta_mag: f64, beta_arg: f64) -> Result<StateParams, Failure> {
    for (flag, v) in [("n", n), ("r", r), ("phi", phi), ("beta-mag", beta_mag), ("beta-arg", beta_arg)] {
        if !v.is_finite() {
            return Err(arg_error(&format!("--{flag}{suffix}"), "must be finite"));
        }
    }
    for (flag, v) in [("n", n), ("r", r), ("beta-mag", beta_mag)] {
        if v < 0.0 {
            return Err(arg_error(&format!("--{flag}{suffix}"), &format!("must be ≥ 0, got {v}")));
        }
    }
    Ok(StateParams {
        thermal: n,
        squeeze: r,
        squeeze_angle: phi,
        beta_mag,
        beta_arg,
    })
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_fidelity(a: FidelityArgs) -> Result<(), Failure> {
    let s1 = state_from_flags("1", a.n1, a.r1, a.phi1, a.beta_mag1, a.beta_arg1)?;
    let s2 = state_from_flags("2", a.n2, a.r2, a.phi2, a.beta_mag2, a.beta_arg2)?;
    let (s1, s2) = (make_gaussian(&s1)?, make_gaussian(&s2)?);
    println!("fidelity {:.12}", fidelity(&s1, &s2)?);
    println!("bures_distance {:.12}", bures_distance(&s1, &s2)?);
    Ok(())
}

fn cmd_coeffs(a: CoeffsArgs) -> Result<(), Failure> {
    let env = a.env.spec()?;
    let t_end = match a.t_end {
        Some(t) => t,
        None => settling_horizon(&env)?,
    };
    let table = build_coefficients(&env, a.alpha, t_end, a.steps)?;
    let mut out = output(&a.out)?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn measure_spec(c: &ChannelArgs) -> MeasureSpec {
    MeasureSpec {
        channel: c.channel.name().into(),
        rate: c.rate_name().into(),
        gamma0: c.gamma0,
        ..Default::default()
    }
}

fn cmd_evolve(a: EvolveArgs) -> Result<(), Failure> {
    let state = state_from_flags("", a.n, a.r, a.phi, a.beta_mag, a.beta_arg)?;
    let mode = match a.mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::FirstOrder => Mode::FirstOrder,
    };
    if let ChannelArg::Damping = a.channel.channel {
        parse_rate(a.channel.rate_name(), a.channel.gamma0)?;
    }
    let unit = a.channel.unit_table()?;
    let channel: Channel = build_channel(&measure_spec(&a.channel), a.channel.alpha, mode, unit.as_ref())?;
    let t_end = a.t_end.unwrap_or_else(|| channel.default_window());
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(arg_error("--t-end", "must be finite and > 0"));
    }
    if a.points < 2 {
        return Err(arg_error("--points", "must be at least 2"));
    }
    let pair = StatePairParams::from_states(state, state);
    let (traj, _) = trajectory(&pair, &channel, &window_grid(t_end, a.points - 1))?;
    if traj.flagged {
        eprintln!("warning: first-order map left its validity range (|x| > 0.3)");
    }
    let mut out = output(&a.out)?;
    traj.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_measure(a: MeasureArgs) -> Result<(), Failure> {
    if let Some(phi) = a.phi {
        if !(phi > 0.0 && phi <= std::f64::consts::PI) {
            return Err(arg_error("--phi", "must lie in (0, π]"));
        }
    }
    if !(a.channel.alpha > 0.0 && a.channel.alpha.is_finite()) {
        return Err(arg_error("--alpha", "must be finite and > 0"));
    }
    let family = match a.family {
        FamilyArg::Coherent => "coherent",
        FamilyArg::Squeezed => "squeezed",
        FamilyArg::CoherentThermal => "coherent_thermal",
        FamilyArg::GeneralPure => "general_pure",
    };
    let method = match a.method {
        MethodArg::Numeric => MethodChoice::Numeric,
        MethodArg::Closed => MethodChoice::Closed,
        MethodArg::FirstOrder => MethodChoice::FirstOrder,
    };
    let spec = MeasureSpec {
        family: family.into(),
        method,
        phi: a.phi,
        equal_r: !a.free_r,
        thermal: a.thermal,
        window: a.window,
        ..measure_spec(&a.channel)
    };
    let mcfg = MeasureConfig {
        grid_steps: a.grid_steps,
        bounds: ParamBounds {
            beta_max: a.beta_max,
            squeeze_max: a.squeeze_max,
            thermal_max: a.thermal_max,
            ..Default::default()
        },
        ..Default::default()
    };
    let unit = a.channel.unit_table()?;
    let result = compute_measure(&spec, a.channel.alpha, unit.as_ref(), &mcfg)?;
    if result.diagnostics.first_order_flag {
        eprintln!("warning: first-order result outside its validity range");
    }
    let mut out = output(&a.out)?;
    writeln!(out, "{}", MeasureResult::CSV_HEADER)?;
    writeln!(out, "{}", result.to_csv_record())?;
    out.flush()?;
    Ok(())
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<(), Failure> {
    let cfg = match (&a.config, a.figure) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(n)) => ExperimentConfig::defaults(Experiment::from_figure(n)?),
        (None, None) => return Err(arg_error("--figure", "required without --config")),
    };
    if let (Some(n), Some(_)) = (a.figure, &a.config) {
        if Experiment::from_figure(n)? != cfg.experiment {
            return Err(arg_error("--figure", "disagrees with the config's experiment"));
        }
    }
    let output = run(&cfg)?;
    let written = output.write(&a.out)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Fidelity(a) => cmd_fidelity(a),
        Command::Coeffs(a) => cmd_coeffs(a),
        Command::Evolve(a) => cmd_evolve(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
