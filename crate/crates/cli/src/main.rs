//! `wl1`: optimal weights, thresholds, solves, estimates and phase experiments
//! for weighted ℓ1 minimization with prior support information.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wl1_core::experiments::{run_phase_curve, ExperimentFile};
use wl1_core::model::{
    parse_fraction, weights_for_strategy, AlphaSpec, ModelConfig, PartitionModel, Strategy, Weights,
};
use wl1_core::solver::{weighted_bp, BpProblem, BpStatus, DEFAULT_TOL};
use wl1_core::subdiff_geometry::mc_expected_dist_sq;
use wl1_core::thresholds::{eval_j, minimize_j};
use wl1_core::weights_opt::optimal_weights;

#[derive(Parser)]
#[command(
    name = "wl1",
    version,
    about = "Weighted l1 minimization with prior support information"
)]
struct Cli {
    /// Worker threads for parallel commands (default: all cores).
    #[arg(long, global = true, env = "WL1_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal per-block weights, normalized so the largest is 1.
    Weights {
        #[command(flatten)]
        model: ModelArgs,
        /// Also print the unnormalized roots of the weight equations.
        #[arg(long)]
        raw: bool,
    },
    /// Print the normalized threshold, its minimizer and the bounds on δ/d.
    Threshold {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        weights: WeightArgs,
        /// Failure probability for the transition window half-width.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Solve weighted basis pursuit for a matrix and right-hand side read from files.
    Solve {
        /// Matrix file: header `m,d`, then m rows of d comma-separated values.
        #[arg(long)]
        matrix: PathBuf,
        /// Vector file: header `m`, then the values.
        #[arg(long)]
        rhs: PathBuf,
        /// Weight vector file: header `d`, then the values (default: all ones).
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Monte Carlo estimate of d⁻¹ E dist²(g, τ∂‖·‖_{1,w}(x₀)) next to its closed form.
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a phase-transition experiment from a JSON config and write CSV.
    Phase {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Model config file (JSON with d, blocks, alpha); replaces --d/--blocks/--alpha.
    #[arg(long, conflicts_with_all = ["d", "blocks", "alpha"])]
    model: Option<PathBuf>,
    /// Ambient dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Block sizes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    blocks: Vec<usize>,
    /// Support fraction per block, as decimals or fractions such as 7/90.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<String>,
}

#[derive(Args)]
struct WeightArgs {
    /// Weighting strategy: unit, zero-one[:i,..], one-minus-alpha, optimal, merged:i,j,..:<inner>.
    #[arg(long, default_value = "optimal", conflicts_with = "weights")]
    strategy: Strategy,
    /// Explicit per-block weights, comma-separated.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<wl1_core::Error> for CliError {
    fn from(e: wl1_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

impl ModelArgs {
    fn model(&self) -> CliResult<PartitionModel> {
        if let Some(path) = &self.model {
            let cfg: ModelConfig = serde_json::from_str(&read(path)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            return Ok(cfg.model()?);
        }
        // range errors on α first, they are the most specific message
        for a in &self.alpha {
            let v = parse_fraction(a)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Input(format!(
                    "domain error: alpha must lie in [0, 1], got {a}"
                )));
            }
        }
        let d = self
            .d
            .ok_or_else(|| CliError::Input("missing --d".into()))?;
        if self.blocks.is_empty() || self.alpha.is_empty() {
            return Err(CliError::Input("--blocks and --alpha are required".into()));
        }
        let cfg = ModelConfig {
            d,
            blocks: self.blocks.clone(),
            alpha: self.alpha.iter().cloned().map(AlphaSpec::Text).collect(),
            strategy: None,
            seed: None,
        };
        Ok(cfg.model()?)
    }
}

impl WeightArgs {
    fn weights(&self, model: &PartitionModel) -> CliResult<Weights> {
        let w = if self.weights.is_empty() {
            weights_for_strategy(model, &self.strategy)?
        } else {
            let w = Weights::new(self.weights.clone())?;
            w.check_blocks(model)?;
            w
        };
        if w.is_degenerate() {
            return Err(CliError::Input(
                "all weights are zero; the threshold is undefined".into(),
            ));
        }
        Ok(w)
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.6}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Numbers separated by commas or whitespace, skipping `#` comment lines.
fn numbers(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Input(format!("{what}: cannot parse '{t}'")))
        })
        .collect()
}

fn header_dims(values: &[f64], count: usize, what: &str) -> CliResult<Vec<usize>> {
    if values.len() < count {
        return Err(CliError::Input(format!("{what}: missing header")));
    }
    values[..count]
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Input(format!(
                    "{what}: header entry {v} is not a dimension"
                )))
            }
        })
        .collect()
}

fn read_matrix(path: &Path) -> CliResult<(usize, usize, Vec<f64>)> {
    let what = path.display().to_string();
    let values = numbers(&read(path)?, &what)?;
    let dims = header_dims(&values, 2, &what)?;
    let (m, d) = (dims[0], dims[1]);
    let body = &values[2..];
    if body.len() != m * d {
        return Err(CliError::Input(format!(
            "{what}: expected {m}x{d} = {} entries, found {}",
            m * d,
            body.len()
        )));
    }
    Ok((m, d, body.to_vec()))
}

fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let what = path.display().to_string();
    let values = numbers(&read(path)?, &what)?;
    let n = header_dims(&values, 1, &what)?[0];
    if values.len() - 1 != n {
        return Err(CliError::Input(format!(
            "{what}: expected {n} entries, found {}",
            values.len() - 1
        )));
    }
    Ok(values[1..].to_vec())
}

fn status_name(s: BpStatus) -> &'static str {
    match s {
        BpStatus::Optimal => "optimal",
        BpStatus::Infeasible => "infeasible",
        BpStatus::DegenerateWeights => "degenerate-weights",
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Weights { model, raw } => {
            let model = model.model()?;
            let w = optimal_weights(&model)?;
            println!("{}", join(w.normalized.omega()));
            if raw {
                println!("{}", join(&w.raw));
            }
        }
        Command::Threshold {
            model,
            weights,
            eta,
        } => {
            let model = model.model()?;
            let w = weights.weights(&model)?;
            let r = minimize_j(&model, &w)?;
            println!("weights {}", join(w.omega()));
            println!("m_tilde {:.6}", r.m_tilde);
            println!("tau_star {:.6}", r.tau_star);
            println!("delta_lower {:.6}", r.delta_lower);
            println!("delta_lower_loose {:.6}", r.delta_lower_loose);
            println!("delta_upper {:.6}", r.delta_upper);
            println!("measurements {:.6}", r.measurements());
            if let Some(eta) = eta {
                println!("window {:.6}", r.window(eta)?);
            }
        }
        Command::Solve {
            matrix,
            rhs,
            weights,
            tol,
        } => {
            let (m, d, a) = read_matrix(&matrix)?;
            let b = read_vector(&rhs)?;
            let w = match weights {
                Some(p) => read_vector(&p)?,
                None => vec![1.0; d],
            };
            if b.len() != m {
                return Err(CliError::Input(format!(
                    "right-hand side has {} entries, matrix has {m} rows",
                    b.len()
                )));
            }
            let problem = BpProblem::from_rows(m, d, &a, &b, &w)?;
            let sol = weighted_bp(&problem, tol)?;
            println!("status {}", status_name(sol.status));
            println!("objective {:.6}", sol.objective);
            println!("residual {:.6e}", sol.residual);
            println!("x {}", join(&sol.x_hat));
        }
        Command::Estimate {
            model,
            weights,
            tau,
            n,
            seed,
        } => {
            let model = model.model()?;
            let w = weights.weights(&model)?;
            let exact = eval_j(&model, &w, tau)?;
            let mc = mc_expected_dist_sq(&model, &w, tau, n, seed)?;
            println!("estimate {:.6}", mc.estimate);
            println!("standard_error {:.6}", mc.standard_error);
            println!("j {:.6}", exact);
            println!("n {}", mc.n_samples);
        }
        Command::Phase { config, out } => {
            let file = ExperimentFile::from_json(&read(&config)?)?;
            let cfg = file.config()?;
            let curve = run_phase_curve(&cfg)?;
            let csv = curve.to_csv();
            match out {
                Some(path) => fs::write(&path, csv).map_err(|e| {
                    CliError::Input(format!("cannot write {}: {e}", path.display()))
                })?,
                None => print!("{csv}"),
            }
            for s in &cfg.strategies {
                let label = s.to_string();
                let predicted = curve
                    .rows_for(&label)
                    .next()
                    .map_or(f64::NAN, |r| r.predicted_threshold);
                match curve.crossing(&label) {
                    Some(c) => eprintln!("{label}: predicted {predicted:.2}, 50% crossing {c:.2}"),
                    None => {
                        eprintln!("{label}: predicted {predicted:.2}, no 50% crossing in range")
                    }
                }
            }
            if curve.solver_issues > 0 {
                eprintln!(
                    "{} trials hit solver failures and were counted as failures",
                    curve.solver_issues
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Input(_) => 2,
                CliError::Numerical(_) => 3,
            })
        }
    }
}
