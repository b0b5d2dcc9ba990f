use clap::{Args, Parser, Subcommand};
use qplab_cli::config::{
    preset, read_config_file, resolve, resolved_toml, PartialConfig, Runtime,
};
use qplab_cli::out::OutDir;
use qplab_cli::{commands, verify, CliError, CliResult, Outcome};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical laboratory for quasiperiodic Schrodinger operators with
/// monotone Lipschitz potentials.
///
/// Configuration layers, weakest first: built-in defaults, --preset,
/// --config file, command-line flags. Every run writes the fully resolved
/// configuration next to its artifacts.
#[derive(Parser)]
#[command(name = "qplab", version, disable_help_subcommand = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named preset: golden-sawtooth-lambda2, golden-sawtooth-lambda10,
    /// or silver-blend-lambda10
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory (default "out")
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,
    /// Worker thread count (0 = library default)
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    threads: usize,
    /// Frequency: golden, silver, cf:[a1,a2,...], or num:<decimal>
    #[arg(long, global = true, value_name = "FREQ")]
    freq: Option<String>,
    /// Continued-fraction expansion depth
    #[arg(long, global = true, value_name = "K")]
    depth: Option<usize>,
    /// Potential: sawtooth, blend:<c>, or pwl:[(x,y),...]
    #[arg(long, global = true, value_name = "V")]
    potential: Option<String>,
    /// Coupling constant (0 selects the free chain where supported)
    #[arg(long, global = true, value_name = "L")]
    lambda: Option<f64>,
    /// Base phase x
    #[arg(long, global = true, value_name = "X")]
    phase: Option<f64>,
    /// Box size for finite-volume commands
    #[arg(long, global = true, value_name = "N")]
    n: Option<usize>,
    /// Boundary condition: dirichlet or periodic
    #[arg(long, global = true, value_name = "BC")]
    bc: Option<String>,
    /// Eigenvalue bisection tolerance
    #[arg(long, global = true, value_name = "TOL")]
    tol: Option<f64>,
    /// Energy window lower edge
    #[arg(long, global = true, value_name = "E")]
    emin: Option<f64>,
    /// Energy window upper edge
    #[arg(long, global = true, value_name = "E")]
    emax: Option<f64>,
    /// Energy bin width for density tables
    #[arg(long, global = true, value_name = "DE")]
    de: Option<f64>,
    /// Energy grid points for curve outputs
    #[arg(long, global = true, value_name = "P")]
    points: Option<usize>,
    /// Phase sample count
    #[arg(long, global = true, value_name = "S")]
    samples: Option<usize>,
    /// Box-size scales (convergent denominators), comma separated
    #[arg(long, global = true, value_delimiter = ',', value_name = "Q,..")]
    scales: Option<Vec<i64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Box spectrum at the base phase and eigenvalue curves over one
    /// phase period, gated on curve monotonicity
    Spectrum {
        /// Also write a gnuplot stub
        #[arg(long)]
        plot: bool,
    },
    /// Integrated density of states with the Lipschitz slope check
    Ids {
        /// Spacing parameter for the slope bound (q_{k-1}/q_{k+1} style);
        /// defaults to the frequency's tail ratio, 0 fits sawtooth-type
        /// potentials
        #[arg(long)]
        rho: Option<f64>,
        /// Also write a gnuplot stub
        #[arg(long)]
        plot: bool,
    },
    /// Finite-volume Lyapunov exponents over the energy grid
    Lyapunov {
        /// Single energy instead of the grid
        #[arg(long = "E", value_name = "E")]
        energy: Option<f64>,
        /// Transfer-product length
        #[arg(long, default_value_t = 2000, value_name = "N")]
        steps: usize,
        /// Birkhoff phase windows
        #[arg(long, default_value_t = 8, value_name = "W")]
        windows: usize,
        /// Gate on the coupling lower bound max{0, ln(lambda/2e)} - 0.05
        #[arg(long)]
        check_bound: bool,
        /// Also write a gnuplot stub
        #[arg(long)]
        plot: bool,
    },
    /// Thouless log-potential exponent against the transfer-product rate
    Thouless {
        /// Single energy instead of the grid
        #[arg(long = "E", value_name = "E")]
        energy: Option<f64>,
        /// Box size for the log-potential average
        #[arg(long, default_value_t = 4181, value_name = "N")]
        steps: usize,
        /// Phase points in the average
        #[arg(long, default_value_t = 16, value_name = "P")]
        avg_points: usize,
        /// Gate on max |thouless - gamma_n|
        #[arg(long, default_value_t = 0.05, value_name = "T")]
        tolerance: f64,
    },
    /// Large-deviation sets of ln|P_q| across the configured scales
    Ldt {
        /// Energy (default: middle of the energy window)
        #[arg(long = "E", value_name = "E")]
        energy: Option<f64>,
        /// Deviation threshold as a fraction of gamma
        #[arg(long, default_value_t = 0.3, value_name = "F")]
        delta_factor: f64,
        /// Phase grid points per unit of box size
        #[arg(long, default_value_t = 200, value_name = "M")]
        grid_mult: usize,
    },
    /// Eigenpair decay fits on one box
    Localize {
        /// Energy window lower edge (default: middle half of the spectrum)
        #[arg(long, value_name = "E", requires = "window_max")]
        window_min: Option<f64>,
        /// Energy window upper edge
        #[arg(long, value_name = "E", requires = "window_min")]
        window_max: Option<f64>,
        /// Localization slack as a fraction of gamma(E)
        #[arg(long, default_value_t = 0.15, value_name = "F")]
        delta_factor: f64,
    },
    /// Continued-fraction, gap-structure, and Diophantine report
    Arith {
        /// Good-denominator threshold on q_{k-1}/q_{k+1}
        #[arg(long, default_value_t = 0.4, value_name = "ER")]
        er: f64,
        /// Diophantine constant C
        #[arg(long, default_value_t = 0.1, value_name = "C")]
        dio_c: f64,
        /// Diophantine exponent tau
        #[arg(long, default_value_t = 1.5, value_name = "TAU")]
        dio_tau: f64,
        /// Largest n swept in the Diophantine check (default: the deepest
        /// convergent denominator, capped at 10000)
        #[arg(long, value_name = "N")]
        dio_nmax: Option<u64>,
    },
    /// Run the acceptance criteria and write verify.json
    Verify {
        /// Comma-separated criterion ids from 1..=14 (default: all)
        #[arg(long, value_name = "IDS")]
        criteria: Option<String>,
    },
}

fn overrides_from(g: &GlobalArgs) -> PartialConfig {
    let mut p = PartialConfig::default();
    p.model.frequency = g.freq.clone();
    p.model.depth = g.depth;
    p.model.potential = g.potential.clone();
    p.model.lambda = g.lambda;
    p.model.phase = g.phase;
    p.scales.q = g.scales.clone();
    p.energy.min = g.emin;
    p.energy.max = g.emax;
    p.energy.de = g.de;
    p.energy.points = g.points;
    p.phases.samples = g.samples;
    p.run.n = g.n;
    p.run.bc = g.bc.clone();
    p.run.tol = g.tol;
    p.output.dir = g.out.clone();
    p
}

fn run(cli: Cli) -> CliResult<Outcome> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(|e| CliError::Run(format!("thread pool: {e}")))?;
    }
    let mut layers = PartialConfig::default();
    if let Some(name) = &cli.global.preset {
        layers = layers.overlay(preset(name)?);
    }
    if let Some(path) = &cli.global.config {
        layers = layers.overlay(read_config_file(path)?);
    }
    layers = layers.overlay(overrides_from(&cli.global));
    let cfg = resolve(layers)?;
    let mut rt = Runtime::build(cfg)?;
    rt.preset = cli.global.preset.clone();
    let out = OutDir::create(&rt.cfg.output.dir)?;
    out.write("resolved-config.toml", &resolved_toml(&rt.cfg))?;

    let started = std::time::Instant::now();
    let outcome = match &cli.command {
        Command::Spectrum { plot } => commands::spectrum(&rt, &out, *plot),
        Command::Ids { rho, plot } => commands::ids(&rt, &out, *rho, *plot),
        Command::Lyapunov { energy, steps, windows, check_bound, plot } => {
            commands::lyapunov(&rt, &out, *energy, *steps, *windows, *check_bound, *plot)
        }
        Command::Thouless { energy, steps, avg_points, tolerance } => {
            commands::thouless(&rt, &out, *energy, *steps, *avg_points, *tolerance)
        }
        Command::Ldt { energy, delta_factor, grid_mult } => {
            commands::ldt(&rt, &out, *energy, *delta_factor, *grid_mult)
        }
        Command::Localize { window_min, window_max, delta_factor } => {
            commands::localize(&rt, &out, *window_min, *window_max, *delta_factor)
        }
        Command::Arith { er, dio_c, dio_tau, dio_nmax } => {
            commands::arith(&rt, &out, *er, *dio_c, *dio_tau, *dio_nmax)
        }
        Command::Verify { criteria } => {
            let ids = verify::parse_criteria(criteria.as_deref())?;
            let bin = std::env::current_exe()
                .map_err(|e| CliError::Run(format!("locating own binary: {e}")))?;
            verify::run(&rt, &out, &ids, cli.global.preset.as_deref(), Some(&bin))
        }
    };
    eprintln!("elapsed: {:.2?}", started.elapsed());
    outcome
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}
