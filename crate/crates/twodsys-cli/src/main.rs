//! `twodsys`: sample, evaluate, fit, classify, and simulate the
//! two-dimensional-system covariance family from the command line.
//!
//! Exit codes: 0 success, 2 data or configuration errors, 3 numerical
//! failures. `TWODSYS_LOG` controls log verbosity.

mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use twodsys::kernel::HyperParams;
use twodsys::sde::{SimConfig, SystemSpec};
use twodsys::{gp, inference, FitConfig, PriorSpec};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Lib(#[from] twodsys::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use twodsys::Error as E;
        match self {
            CliError::Lib(e) => match e {
                E::Conditioning { .. } | E::NumericalFailure(_) | E::FitFailure { .. } => 3,
                _ => 2,
            },
            CliError::Io { .. } | CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Newtype so clap treats a parsed grid as one value, not an append list.
#[derive(Debug, Clone)]
struct Grid(Vec<f64>);

fn parse_grid_flag(s: &str) -> Result<Grid, String> {
    io::parse_grid(s).map(Grid)
}

/// Optional JSON file supplying defaults; explicit flags win over it.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    count: Option<usize>,
    restarts: Option<usize>,
    budget: Option<usize>,
    threshold: Option<f64>,
    params: Option<[f64; 4]>,
    grid: Option<String>,
}

#[derive(Parser)]
#[command(name = "twodsys", version, about = "Stationary covariances from 2D linear stochastic systems")]
struct Cli {
    /// JSON config file with flag defaults (flags > config > built-ins).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the covariance (and optionally its gradient) on a lag grid.
    EvalKernel {
        /// Kernel parameters h,s,k,p.
        #[arg(long, value_parser = io::parse_params, allow_hyphen_values = true)]
        params: Option<[f64; 4]>,
        /// Lag grid start:step:end.
        #[arg(long, value_parser = parse_grid_flag, allow_hyphen_values = true)]
        grid: Option<Grid>,
        /// Append the four gradient columns.
        #[arg(long)]
        gradients: bool,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Draw zero-mean realizations of the process on a time grid.
    Sample {
        #[arg(long, value_parser = io::parse_params, allow_hyphen_values = true)]
        params: Option<[f64; 4]>,
        /// Time grid start:step:end.
        #[arg(long, value_parser = parse_grid_flag, allow_hyphen_values = true)]
        grid: Option<Grid>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of realizations (one column each).
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Maximum-likelihood fit of the model to a t,x CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Keep the mean fixed at the sample mean instead of fitting it.
        #[arg(long)]
        fixed_mean: bool,
        /// Keep the noise variance fixed at this value instead of fitting it.
        #[arg(long)]
        fixed_noise: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Posterior-odds classification: oscillatory vs overdamped.
    Classify {
        #[arg(long)]
        input: PathBuf,
        /// Prior definition JSON; defaults to data-adaptive ranges.
        #[arg(long)]
        prior_file: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
        /// Odds threshold for a decided label.
        #[arg(long)]
        threshold: Option<f64>,
        /// Use the deterministic tensor-grid quadrature with this many nodes
        /// per axis instead of Monte Carlo.
        #[arg(long)]
        quadrature: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Integrate the two-component system and record its path.
    Simulate {
        /// Drift entries A,B,C,D.
        #[arg(long, value_parser = io::parse_floats::<4>, allow_hyphen_values = true)]
        system: [f64; 4],
        /// Noise intensity K11,K12,K22.
        #[arg(long, value_parser = io::parse_floats::<3>, allow_hyphen_values = true)]
        noise: [f64; 3],
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        total_time: f64,
        #[arg(long, default_value_t = 0.0)]
        burn_in: f64,
        /// Start from this state instead of a stationary draw.
        #[arg(long, value_parser = io::parse_floats::<2>, allow_hyphen_values = true)]
        initial: Option<[f64; 2]>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Regenerate the sample-gallery grid: one CSV and one SVG per
    /// (s, p) cell on t in [0, 10].
    Figure {
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TWODSYS_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: invalid config: {e}", path.display())))
}

fn require_params(
    flag: Option<[f64; 4]>,
    cfg: &FileConfig,
) -> Result<HyperParams, CliError> {
    let [h, s, k, p] = flag
        .or(cfg.params)
        .ok_or_else(|| CliError::Data("missing --params h,s,k,p".into()))?;
    Ok(HyperParams::new(h, s, k, p)?)
}

fn require_grid(flag: Option<Grid>, cfg: &FileConfig) -> Result<Vec<f64>, CliError> {
    match flag {
        Some(g) => Ok(g.0),
        None => match &cfg.grid {
            Some(s) => io::parse_grid(s).map_err(CliError::Data),
            None => Err(CliError::Data("missing --grid start:step:end".into())),
        },
    }
}

fn params_json(theta: &HyperParams) -> Result<serde_json::Value, CliError> {
    let natural = theta.to_natural()?;
    Ok(json!({
        "hyper": { "h": theta.h, "s": theta.s, "k": theta.k, "p": theta.p },
        "natural": {
            "sigma": natural.sigma, "delta": natural.delta,
            "s11": natural.s11, "j": natural.j,
        },
    }))
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    io::write_output(path, &text)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::EvalKernel { params, grid, gradients, output, format } => {
            let theta = require_params(params, &cfg)?;
            let grid = require_grid(grid, &cfg)?;
            let rows: Vec<(f64, f64, [f64; 4])> = grid
                .iter()
                .map(|&tau| {
                    let (c, g) = theta.eval_grad(tau);
                    (tau, c, g)
                })
                .collect();
            match format {
                Format::Csv => {
                    let header = if gradients {
                        "tau,c,dc_dh,dc_ds,dc_dk,dc_dp"
                    } else {
                        "tau,c"
                    };
                    io::write_table(
                        output.as_deref(),
                        header,
                        rows.iter().map(|(tau, c, g)| {
                            if gradients {
                                format!("{tau},{c},{},{},{},{}", g[0], g[1], g[2], g[3])
                            } else {
                                format!("{tau},{c}")
                            }
                        }),
                    )
                }
                Format::Json => write_json(
                    output.as_deref(),
                    &json!({
                        "command": "eval-kernel",
                        "version": env!("CARGO_PKG_VERSION"),
                        "params": params_json(&theta)?,
                        "gradients": gradients,
                        "rows": rows.iter().map(|(tau, c, g)| {
                            if gradients {
                                json!({"tau": tau, "c": c, "dc_dh": g[0], "dc_ds": g[1],
                                       "dc_dk": g[2], "dc_dp": g[3]})
                            } else {
                                json!({"tau": tau, "c": c})
                            }
                        }).collect::<Vec<_>>(),
                    }),
                ),
            }
        }

        Command::Sample { params, grid, seed, count, output, format } => {
            let theta = require_params(params, &cfg)?;
            let times = require_grid(grid, &cfg)?;
            let seed = seed.or(cfg.seed).unwrap_or(0);
            let count = count.or(cfg.count).unwrap_or(1);
            let draws = gp::sample(&theta, &times, seed, count)?;
            match format {
                Format::Csv => {
                    // A single draw uses the same t,x layout the fit and
                    // classify commands read back in.
                    let mut header = String::from("t");
                    if count == 1 {
                        header.push_str(",x");
                    } else {
                        for i in 0..count {
                            header.push_str(&format!(",x{i}"));
                        }
                    }
                    io::write_table(
                        output.as_deref(),
                        &header,
                        times.iter().enumerate().map(|(row, t)| {
                            let mut line = format!("{t}");
                            for draw in &draws {
                                line.push_str(&format!(",{}", draw[row]));
                            }
                            line
                        }),
                    )
                }
                Format::Json => write_json(
                    output.as_deref(),
                    &json!({
                        "command": "sample",
                        "version": env!("CARGO_PKG_VERSION"),
                        "params": params_json(&theta)?,
                        "seed": seed,
                        "count": count,
                        "times": times,
                        "draws": draws,
                    }),
                ),
            }
        }

        Command::Fit { input, seed, restarts, fixed_mean, fixed_noise, output } => {
            let data = io::read_series(&input)?;
            let seed = seed.or(cfg.seed).unwrap_or(0);
            let restarts = restarts.or(cfg.restarts).unwrap_or(8);
            let fit_config = FitConfig {
                fit_mean: !fixed_mean,
                fit_noise: fixed_noise.is_none(),
                fixed_noise_var: fixed_noise.unwrap_or(0.0),
                ..FitConfig::default()
            };
            let res = gp::fit(&data, &fit_config, restarts, seed)?;
            write_json(
                output.as_deref(),
                &json!({
                    "command": "fit",
                    "version": env!("CARGO_PKG_VERSION"),
                    "input": input.display().to_string(),
                    "n_points": data.len(),
                    "seed": seed,
                    "restarts": restarts,
                    "fit_mean": fit_config.fit_mean,
                    "fit_noise": fit_config.fit_noise,
                    "params": params_json(&res.model.theta)?,
                    "mean": res.model.mean,
                    "noise_var": res.model.noise_var,
                    "log_marginal_likelihood": res.log_marginal_likelihood,
                    "converged": res.converged,
                    "n_restarts_used": res.n_restarts_used,
                    "optimizer_trace": res.optimizer_trace,
                }),
            )
        }

        Command::Classify { input, prior_file, budget, threshold, quadrature, seed, output } => {
            let data = io::read_series(&input)?;
            let seed = seed.or(cfg.seed).unwrap_or(0);
            let budget = budget.or(cfg.budget).unwrap_or(20_000);
            let threshold = threshold.or(cfg.threshold).unwrap_or(10.0);
            let prior = match &prior_file {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .map_err(|source| CliError::Io { path: path.clone(), source })?;
                    let prior: PriorSpec = serde_json::from_str(&text).map_err(|e| {
                        CliError::Data(format!("{}: invalid prior: {e}", path.display()))
                    })?;
                    prior.validate()?;
                    prior
                }
                None => PriorSpec::default_for(&data)?,
            };
            if !(threshold > 1.0) {
                return Err(CliError::Data(format!(
                    "threshold odds must exceed 1, got {threshold}"
                )));
            }
            let (odds, method) = match quadrature {
                Some(res) => (
                    inference::posterior_odds_grid(&data, &prior, res)?,
                    json!({"grid": res}),
                ),
                None => (
                    inference::posterior_odds(&data, &prior, budget, seed)?,
                    json!("monte-carlo"),
                ),
            };
            let label = inference::label_for(odds.log_odds, threshold);
            write_json(
                output.as_deref(),
                &json!({
                    "command": "classify",
                    "version": env!("CARGO_PKG_VERSION"),
                    "input": input.display().to_string(),
                    "n_points": data.len(),
                    "seed": seed,
                    "budget": budget,
                    "threshold_odds": threshold,
                    "method": method,
                    "prior": prior,
                    "label": label.to_string(),
                    "log_odds": odds.log_odds,
                    "stderr": odds.stderr,
                    "p_oscillatory": odds.p_oscillatory,
                    "n_samples": odds.n_samples,
                }),
            )
        }

        Command::Simulate { system, noise, dt, total_time, burn_in, initial, seed, output } => {
            let [a, b, c, d] = system;
            let [k11, k12, k22] = noise;
            let spec = SystemSpec::new(a, b, c, d, k11, k12, k22)?;
            let mut sim = SimConfig::new(dt, total_time, seed.or(cfg.seed).unwrap_or(0));
            sim.burn_in = burn_in;
            sim.initial_state = initial;
            let path = spec.simulate(&sim)?;
            io::write_table(
                output.as_deref(),
                "t,x1,x2",
                path.times
                    .iter()
                    .zip(path.x1.iter().zip(&path.x2))
                    .map(|(t, (x1, x2))| format!("{t},{x1},{x2}")),
            )
        }

        Command::Figure { output_dir, seed } => {
            let seed = seed.or(cfg.seed).unwrap_or(0);
            fs::create_dir_all(&output_dir)
                .map_err(|source| CliError::Io { path: output_dir.clone(), source })?;
            let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
            let mut written = 0usize;
            for &s in &[-2.0, -1.0, 0.0, 1.0, 2.0] {
                for &p in &[-1.0, 0.0, 0.5, 0.75, 0.9, 1.0] {
                    let theta = HyperParams::new(0.0, s, 0.0, p)?;
                    // The same seed in every cell makes the panels
                    // comparable draw-for-draw.
                    let draw = gp::sample(&theta, &times, seed, 1)?.remove(0);
                    let stem = format!("sample_s{}_p{:.2}", s as i64, p);
                    let csv = output_dir.join(format!("{stem}.csv"));
                    io::write_table(
                        Some(&csv),
                        "t,x",
                        times.iter().zip(&draw).map(|(t, x)| format!("{t},{x}")),
                    )?;
                    let svg = output_dir.join(format!("{stem}.svg"));
                    io::write_svg(&svg, &times, &draw, &format!("s = {s}, p = {p}"))?;
                    written += 2;
                }
            }
            println!("wrote {written} files to {}", output_dir.display());
            Ok(())
        }
    }
}
