//! Command-line front end: tabulation, simulation, estimation, and
//! verification of reversible diffusion models on the two supported
//! geometries. All data goes to stdout (or `--out`) as CSV with a header
//! row and 17-significant-digit floats; progress notes go to stderr.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bernstein_core::bernstein_model::BernsteinModel;
use bernstein_core::config::{parse_config, ModelConfig};
use bernstein_core::feynman_kac::{estimate_u, estimate_v};
use bernstein_core::sde_engine::{
    path_rng, run_paths, simulate_backward_path, simulate_forward_path, streams,
    MarginalSampler, Scheme, SimConfig,
};
use bernstein_core::special_functions::neumann_eigenvalues;
use bernstein_core::verify_harness::{run_selected, VerifyConfig};

#[derive(Parser)]
#[command(
    name = "bernstein-lab",
    version,
    about = "Reversible Bernstein diffusions on the interval and the disk"
)]
struct Cli {
    /// Worker threads for path ensembles (default: all cores; env
    /// fallback BERNSTEIN_LAB_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write CSV output to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Euler,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum WhichArg {
    U,
    V,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the radial Neumann eigenvalues of the disk
    Roots {
        /// Number of eigenvalues, counting the zero mode (max 64)
        #[arg(long, default_value_t = 16)]
        count: usize,
    },
    /// Tabulate u, v, the occupation density, and both drifts on a grid
    Density {
        /// Model configuration file
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated evaluation times
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        /// Spatial grid points (endpoints included)
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Simulate an ensemble of paths and print the recorded states
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 16)]
        paths: usize,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SchemeArg::Euler)]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value_t = DirectionArg::Forward)]
        direction: DirectionArg,
        /// Record every k-th step (endpoints always included)
        #[arg(long, default_value_t = 1)]
        record_every: usize,
    },
    /// Monte Carlo estimates of the space-time factors with spectral targets
    Fk {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = WhichArg::Both)]
        which: WhichArg,
    },
    /// Run the verification suite; nonzero exit if any check fails
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Rerun failed statistical checks once with 4x paths
        #[arg(long)]
        strict: bool,
        /// Only run checks whose names contain one of these substrings
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Paths per statistical ensemble (default 100000)
        #[arg(long)]
        paths: Option<usize>,
        /// Time steps per path (default 400)
        #[arg(long)]
        steps: Option<usize>,
    },
}

/// 17 significant digits: round-trips every f64 exactly.
fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn load_model(path: &PathBuf) -> Result<(ModelConfig, BernsteinModel), String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read model file {}: {e}", path.display()))?;
    let config = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let model = config.build().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((config, model))
}

fn init_threads(cli_threads: Option<usize>) {
    let from_env = || {
        let raw = std::env::var("BERNSTEIN_LAB_THREADS").ok()?;
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                eprintln!("warning: ignoring invalid BERNSTEIN_LAB_THREADS=`{raw}`");
                None
            }
        }
    };
    if let Some(n) = cli_threads.or_else(from_env) {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: thread pool not configured: {e}");
        }
    }
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, String> {
    match out {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

fn run_roots(writer: &mut dyn Write, count: usize) -> Result<bool, String> {
    let roots = neumann_eigenvalues(count).map_err(|e| e.to_string())?;
    writeln!(writer, "n,mu,sqrt_mu,residual").map_err(|e| e.to_string())?;
    for (i, (&mu, &residual)) in roots.values().iter().zip(roots.residuals()).enumerate() {
        writeln!(
            writer,
            "{},{},{},{}",
            i + 1,
            sci(mu),
            sci(mu.sqrt()),
            sci(residual)
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(true)
}

fn run_density(
    writer: &mut dyn Write,
    model: &BernsteinModel,
    times: &[f64],
    grid: usize,
) -> Result<bool, String> {
    if grid < 2 {
        return Err("grid must have at least 2 points".into());
    }
    writeln!(writer, "t,x,u,v,rho,b_star,b").map_err(|e| e.to_string())?;
    for &t in times {
        for j in 0..grid {
            let x = j as f64 / (grid - 1) as f64;
            let row = (|| -> bernstein_core::Result<[f64; 5]> {
                Ok([
                    model.u(x, t)?,
                    model.v(x, t)?,
                    model.occupation(x, t)?,
                    model.forward_drift(x, t)?,
                    model.backward_drift(x, t)?,
                ])
            })()
            .map_err(|e| e.to_string())?;
            writeln!(
                writer,
                "{},{},{},{},{},{},{}",
                sci(t),
                sci(x),
                sci(row[0]),
                sci(row[1]),
                sci(row[2]),
                sci(row[3]),
                sci(row[4])
            )
            .map_err(|e| e.to_string())?;
        }
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    writer: &mut dyn Write,
    model: &BernsteinModel,
    paths: usize,
    steps: usize,
    seed: u64,
    scheme: SchemeArg,
    direction: DirectionArg,
    record_every: usize,
) -> Result<bool, String> {
    if record_every == 0 {
        return Err("record-every must be at least 1".into());
    }
    let scheme = match scheme {
        SchemeArg::Euler => Scheme::EulerReflected,
        SchemeArg::Exact => Scheme::ExactKernel,
    };
    let sim = SimConfig::new(steps, paths, seed)
        .map_err(|e| e.to_string())?
        .with_scheme(scheme);
    let backward = matches!(direction, DirectionArg::Backward);
    let start = if backward {
        MarginalSampler::final_time(model, sim.kernel_grid)
    } else {
        MarginalSampler::initial(model, sim.kernel_grid)
    }
    .map_err(|e| e.to_string())?;
    eprintln!(
        "simulating {paths} {} paths, {steps} steps",
        if backward { "backward" } else { "forward" }
    );
    let results = run_paths(paths, |id| {
        let mut rng = path_rng(seed, streams::START_LAW, id);
        let z_start = start.sample(&mut rng);
        if backward {
            simulate_backward_path(model, &sim, z_start, id)
        } else {
            simulate_forward_path(model, &sim, z_start, id)
        }
    });
    writeln!(writer, "path_id,t,z").map_err(|e| e.to_string())?;
    for (id, path) in results.into_iter().enumerate() {
        let path = path.map_err(|e| format!("path {id}: {e}"))?;
        for (i, (&t, &z)) in path.times.iter().zip(&path.states).enumerate() {
            if i % record_every == 0 || i == path.step_count() {
                writeln!(writer, "{},{},{}", id, sci(t), sci(z)).map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(true)
}

fn run_fk(
    writer: &mut dyn Write,
    model: &BernsteinModel,
    x: f64,
    t: f64,
    paths: usize,
    steps: usize,
    seed: u64,
    which: WhichArg,
) -> Result<bool, String> {
    let sim = SimConfig::new(steps, paths, seed).map_err(|e| e.to_string())?;
    writeln!(writer, "which,x,t,estimate,std_error,target,z_score").map_err(|e| e.to_string())?;
    let mut emit = |label: &str, report: bernstein_core::feynman_kac::EstimatorReport| {
        let (target, _) = report.target.clone().expect("estimators carry targets");
        let z = report.z_score().unwrap_or(f64::NAN);
        writeln!(
            writer,
            "{},{},{},{},{},{},{}",
            label,
            sci(x),
            sci(t),
            sci(report.estimate),
            sci(report.std_error),
            sci(target),
            sci(z)
        )
        .map_err(|e| e.to_string())
    };
    if which != WhichArg::V {
        let report = estimate_u(model, x, t, &sim).map_err(|e| e.to_string())?;
        emit("u", report)?;
    }
    if which != WhichArg::U {
        let report = estimate_v(model, x, t, &sim).map_err(|e| e.to_string())?;
        emit("v", report)?;
    }
    Ok(true)
}

fn run_verify(
    writer: &mut dyn Write,
    model: &BernsteinModel,
    seed: u64,
    strict: bool,
    only: &[String],
    paths: Option<usize>,
    steps: Option<usize>,
) -> Result<bool, String> {
    let mut config = VerifyConfig::new(seed);
    config.strict = strict;
    if let Some(p) = paths {
        config.paths = p;
    }
    if let Some(s) = steps {
        config.steps = s;
    }
    let keep = |name: &str| only.is_empty() || only.iter().any(|token| name.contains(token));
    eprintln!(
        "verifying (seed {seed}, {} paths{})",
        config.paths,
        if strict { ", strict" } else { "" }
    );
    let results = run_selected(model, &config, keep).map_err(|e| e.to_string())?;
    if results.is_empty() {
        return Err("no checks matched the --only filter".into());
    }
    writeln!(writer, "name,kind,metric,threshold,passed").map_err(|e| e.to_string())?;
    let mut all_ok = true;
    for r in &results {
        all_ok &= r.passed;
        writeln!(
            writer,
            "{},{},{},{},{}",
            r.name,
            r.kind.as_str(),
            sci(r.metric),
            sci(r.threshold),
            r.passed
        )
        .map_err(|e| e.to_string())?;
        eprintln!(
            "  {:<32} {:<11} {}  ({})",
            r.name,
            r.kind.as_str(),
            if r.passed { "ok" } else { "FAIL" },
            r.detail
        );
    }
    eprintln!(
        "{} of {} checks passed",
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    Ok(all_ok)
}

fn execute(cli: Cli) -> Result<bool, String> {
    let mut writer = open_output(&cli.out)?;
    let ok = match cli.command {
        Command::Roots { count } => run_roots(writer.as_mut(), count)?,
        Command::Density { model, times, grid } => {
            let (_, model) = load_model(&model)?;
            run_density(writer.as_mut(), &model, &times, grid)?
        }
        Command::Simulate {
            model,
            paths,
            steps,
            seed,
            scheme,
            direction,
            record_every,
        } => {
            let (_, model) = load_model(&model)?;
            run_simulate(
                writer.as_mut(),
                &model,
                paths,
                steps,
                seed,
                scheme,
                direction,
                record_every,
            )?
        }
        Command::Fk {
            model,
            x,
            t,
            paths,
            steps,
            seed,
            which,
        } => {
            let (_, model) = load_model(&model)?;
            run_fk(writer.as_mut(), &model, x, t, paths, steps, seed, which)?
        }
        Command::Verify {
            model,
            seed,
            strict,
            only,
            paths,
            steps,
        } => {
            let (_, model) = load_model(&model)?;
            run_verify(writer.as_mut(), &model, seed, strict, &only, paths, steps)?
        }
    };
    writer.flush().map_err(|e| e.to_string())?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // usage errors exit with code 2
    init_threads(cli.threads);
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
