use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hetsched::channel::{complex_gaussian, UserChannel};
use hetsched::criteria::{delta_capacity, exact_delta_capacity, SubsetView};
use hetsched::harness::config::load_config;
use hetsched::harness::output::{write_file, write_to};
use hetsched::harness::presets::{apply_overrides, FIDELITY_TRIALS};
use hetsched::harness::{
    figure_preset, outage_quantile, run_experiment, threads_from_env, ExperimentSpec, OutageSummary,
    OutputFormat, OutputSpec,
};
use hetsched::precoding::{bd_capacities_fixed_snr, capacity_bounds};
use hetsched::schedulers::partition::{fixed_size_partitions, minimal_partitions};
use hetsched::subspace::{
    geometrical_angle_cos2, geometrical_angle_cos2_determinant, principal_angles, OrthonormalBasis,
};
use hetsched::{Error, Result};

/// Scheduling simulator for heterogeneous multiuser MIMO downlinks.
#[derive(Parser)]
#[command(name = "hetsched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Simulate {
        config: PathBuf,
        /// Write here instead of the config's output (or stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Run a built-in figure experiment.
    Preset {
        /// fig3, fig4, fig5, fig6, fig7 or fig8
        name: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Use the high trial count instead of the desk-scale default.
        #[arg(long, conflicts_with = "trials")]
        fidelity: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print a reference value: quantile, partitions, principal-angles,
    /// geometrical-angle, bounds or delta-capacity.
    Oracle { check: String },
}

fn emit(summaries: &[OutageSummary], out: Option<PathBuf>, format: Option<OutputFormat>) -> Result<()> {
    match out {
        Some(path) => {
            let format = format.unwrap_or_else(|| OutputFormat::from_path(&path));
            write_file(summaries, &OutputSpec { path, format })
        }
        None => write_to(summaries, format.unwrap_or_default(), std::io::stdout().lock()),
    }
}

fn run_all(specs: &[ExperimentSpec]) -> Result<Vec<OutageSummary>> {
    specs.iter().map(run_experiment).collect()
}

const ORACLES: [&str; 6] = [
    "quantile",
    "partitions",
    "principal-angles",
    "geometrical-angle",
    "bounds",
    "delta-capacity",
];

fn random_user(id: usize, n_r: usize, m_t: usize, rng: &mut ChaCha8Rng) -> UserChannel {
    UserChannel::new(id, 1.0, complex_gaussian(n_r, m_t, rng))
}

fn oracle(check: &str) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    match check {
        "quantile" => {
            let samples: Vec<f64> = (1..=100).map(f64::from).collect();
            println!("quantile(1..100, 0.10) = {}", outage_quantile(&samples, 0.10)?);
            println!("quantile({{0, 10}}, 0.50) = {}", outage_quantile(&[0.0, 10.0], 0.5)?);
        }
        "partitions" => {
            let ranks = [1, 1, 1, 2, 3, 4];
            println!("minimal partitions of {{1,1,1,2,3,4}} x 6: {}", minimal_partitions(&ranks, 6).len());
            println!("feasible pairings of {{1,1,1,2,3,4}} x 6: {}", fixed_size_partitions(&ranks, 6, 2).len());
            println!("pairings of six single-antenna users: {}", fixed_size_partitions(&[1; 6], 6, 2).len());
        }
        "principal-angles" => {
            // span{e1, e2} against span{e1, (e2 + e3)/√2} in C^4
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let u = OrthonormalBasis::identity(4).columns().columns(0, 2).into_owned();
            let mut v = u.clone();
            v[(1, 1)] = s.into();
            v[(2, 1)] = s.into();
            let angles = principal_angles(&OrthonormalBasis::from_columns(u)?, &OrthonormalBasis::from_columns(v)?)?;
            println!("angles = {:?} (expected [0, pi/4 = {}])", angles.angles(), std::f64::consts::FRAC_PI_4);
        }
        "geometrical-angle" => {
            let a = complex_gaussian(2, 6, &mut rng);
            let b = complex_gaussian(3, 6, &mut rng);
            println!("product form     = {}", geometrical_angle_cos2(&a, &b)?);
            println!("determinant form = {}", geometrical_angle_cos2_determinant(&a, &b)?);
        }
        "bounds" => {
            let users: Vec<UserChannel> = [1, 2, 3].iter().enumerate().map(|(i, &n)| random_user(i, n, 8, &mut rng)).collect();
            let group: Vec<&UserChannel> = users.iter().collect();
            let snr = 100.0;
            let exact = bd_capacities_fixed_snr(&group, 8, snr)?;
            for (i, c) in exact.iter().enumerate() {
                let b = capacity_bounds(i, &group, 8, snr)?;
                println!("user {i}: lower {:.9} <= exact {:.9} <= upper {:.9}", b.lower, c, b.upper);
            }
        }
        "delta-capacity" => {
            let users: Vec<UserChannel> = [1, 2, 2].iter().enumerate().map(|(i, &n)| random_user(i, n, 8, &mut rng)).collect();
            let subset = vec![&users[0], &users[1]];
            let view = SubsetView::new(subset.clone(), 8)?;
            let snr = 1e4;
            let report = delta_capacity(&users[2], &view, snr)?;
            println!("high-SNR gain {:.6} loss {:.6} delta {:.6}", report.c_gain, report.c_loss, report.delta);
            println!("exact delta {:.6}", exact_delta_capacity(&users[2], &subset, 8, snr)?);
        }
        other => {
            return Err(Error::Config(format!(
                "unknown oracle {other:?}; valid: {}",
                ORACLES.join(", ")
            )))
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = threads_from_env()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { config, out, format } => {
            let spec = load_config(&config)?;
            let summaries = run_all(std::slice::from_ref(&spec))?;
            match (out, &spec.output) {
                (None, Some(target)) => write_file(&summaries, target),
                (out, _) => emit(&summaries, out, format),
            }
        }
        Command::Preset {
            name,
            trials,
            seed,
            fidelity,
            out,
            format,
        } => {
            let mut specs = figure_preset(&name)?;
            let trials = if fidelity { Some(FIDELITY_TRIALS) } else { trials };
            apply_overrides(&mut specs, trials, seed);
            let summaries = run_all(&specs)?;
            emit(&summaries, out, format)
        }
        Command::Validate { config } => {
            let spec = load_config(&config)?;
            println!(
                "ok: {} ({} users, {} runs, {} SNR points, {} trials)",
                spec.label,
                spec.scenario.users.len(),
                spec.runs().len(),
                spec.scenario.snr_db.len(),
                spec.scenario.trials
            );
            Ok(())
        }
        Command::Oracle { check } => oracle(&check),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_infeasible() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
