//! The `conjunct` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conjunct_core::detection::{default_threshold_grid, proof_halfwidth};
use conjunct_core::probability::Quadrature;
use conjunct_core::validity::{ConfidenceRegionRule, GaussianModel, GaussianPosteriorRule, Proposition, RegionLevel};
use conjunct_core::{
    detection_curve, dilution_boundary, dilution_curve, false_confidence_demo, pc_contour, screen_conjunction,
    standardized_encounter, validity_check, DetectionMethod, ValidityReport,
};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::Config;
use crate::error::{CliError, EXIT_INPUT, EXIT_OK};
use crate::format::{parse_conjunction, ConjunctionFile, Format};
use crate::output::{csv_string, detection_table, dilution_table, json_string, write_text, Cell, Table};

#[derive(Parser, Debug)]
#[command(name = "conjunct", version, about = "Satellite conjunction collision probability, dilution and k-sigma screening")]
struct Cli {
    /// Config file (`key = value`); defaults to $CONJUNCT_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write results here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Output format; curves default to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Json,
    Kvn,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    SemiAnalytic,
    MonteCarlo,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Rule {
    /// Nested k-sigma confidence regions.
    Ellipsoid,
    /// Additive Gaussian posterior mass.
    Additive,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Conjunction file (JSON, or KVN for .kvn/.cdm/.txt).
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum)]
    input_format: Option<InputFormat>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Collision probability of a conjunction file.
    Pc {
        #[command(flatten)]
        input: InputArgs,
        /// Fixed trapezoid point count (default: automatic).
        #[arg(long)]
        quad_points: Option<usize>,
    },
    /// Collision probability against S/R at fixed D/R.
    DilutionCurve {
        #[arg(long, default_value_t = 0.0)]
        d_over_r: f64,
        #[arg(long, default_value_t = 0.1)]
        s_min: f64,
        #[arg(long, default_value_t = 100.0)]
        s_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Detection and failure rates against the Pc threshold.
    DetectionCurve {
        #[arg(long)]
        s_over_r: f64,
        /// True miss distance over combined radius.
        #[arg(long, default_value_t = 0.0)]
        d_true: f64,
        /// `default` or comma-separated thresholds.
        #[arg(long, default_value = "default")]
        threshold_grid: String,
        #[arg(long, value_enum, default_value_t = Method::SemiAnalytic)]
        method: Method,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// S/R above which a threshold can never be reached.
    Boundary {
        #[arg(long, default_value_t = 4.4e-4)]
        threshold: f64,
        /// Combined radius in metres, to express the boundary as a deviation.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// K-sigma ellipsoid maneuver decision.
    Screen {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 4.0)]
        k_sigma: f64,
    },
    /// Monte Carlo validity check of a belief rule on complements of balls
    /// around the true parameter (the origin).
    Validity {
        #[arg(long, value_enum, default_value_t = Rule::Ellipsoid)]
        rule: Rule,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Radii of the excluded balls.
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        radii: Vec<f64>,
        /// Also exclude the neighbourhood of half-width alpha sigma sqrt(2 pi)/2
        /// for the given alpha.
        #[arg(long)]
        proof_alpha: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.32,1")]
        alphas: Vec<f64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// One-dimensional false-confidence demonstration.
    FalseConfidence {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Neighbourhood half-width (default: alpha sigma sqrt(2 pi)/2).
        #[arg(long)]
        halfwidth: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Runs the CLI, writing results to `stdout` and diagnostics to `stderr`.
/// Returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, stderr) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn read_conjunction(args: &InputArgs, stderr: &mut dyn Write) -> Result<ConjunctionFile, CliError> {
    let bytes = std::fs::read(&args.input).map_err(|source| CliError::Io { path: args.input.clone(), source })?;
    let format = match args.input_format {
        Some(InputFormat::Json) => Format::Json,
        Some(InputFormat::Kvn) => Format::Kvn,
        None => Format::from_path(&args.input),
    };
    let file = parse_conjunction(&bytes, format).map_err(|source| CliError::Format { path: args.input.clone(), source })?;
    for w in &file.warnings {
        let _ = writeln!(stderr, "warning: {}: {w}", args.input.display());
    }
    Ok(file)
}

fn require_seed(flag: Option<u64>, config: &Config) -> Result<u64, CliError> {
    flag.or(config.seed)
        .ok_or_else(|| CliError::Usage("stochastic command needs --seed (or `seed` in the config file)".into()))
}

fn render<T: Serialize>(format: OutputFormat, json: &T, table: impl FnOnce() -> Table, config: &Config) -> String {
    match format {
        OutputFormat::Json => json_string(json),
        OutputFormat::Csv => csv_string(&table(), config.precision),
    }
}

#[derive(Serialize)]
struct PcOutput {
    pc: f64,
    n_quad: usize,
    quad_error_est: f64,
    below_minimum: bool,
    miss_distance_m: f64,
    sigma1_m: f64,
    sigma2_m: f64,
    combined_radius_m: f64,
}

#[derive(Serialize)]
struct DilutionOutput {
    d_over_r: f64,
    peak_s_over_r: f64,
    peak_pc: f64,
    s_over_r: Vec<f64>,
    pc: Vec<f64>,
}

#[derive(Serialize)]
struct BoundaryOutput {
    threshold: f64,
    s_over_r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_m: Option<f64>,
}

#[derive(Serialize)]
struct ScreenOutput {
    min_distance_m: f64,
    overlap: bool,
    k: f64,
    confidence: f64,
    joint_confidence: f64,
    frechet_bound: f64,
    risk_cap: f64,
}

fn validity_table(report: &ValidityReport) -> Table {
    let mut table = Table::new(&["alpha [1]", "rate [1]", "stderr [1]", "verdict"]);
    for c in &report.rates {
        table.push(vec![Cell::Float(c.alpha), Cell::Float(c.rate), Cell::Float(c.stderr), Cell::Text(c.verdict.as_str().into())]);
    }
    table
}

fn parse_thresholds(grid: &str) -> Result<Vec<f64>, CliError> {
    if grid.trim() == "default" {
        return Ok(default_threshold_grid());
    }
    grid.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("invalid threshold `{t}`"))))
        .collect()
}

fn execute(cli: Cli, stderr: &mut dyn Write) -> Result<String, CliError> {
    let config = Config::load(cli.config.as_deref())?;
    let curve_default = matches!(
        cli.command,
        Command::DilutionCurve { .. } | Command::DetectionCurve { .. } | Command::Validity { .. }
    );
    let format = cli.format.unwrap_or(if curve_default { OutputFormat::Csv } else { OutputFormat::Json });

    let text = match cli.command {
        Command::Pc { input, quad_points } => {
            let file = read_conjunction(&input, stderr)?;
            let enc = standardized_encounter(&file.joint_state()?)?;
            let quadrature = match quad_points {
                Some(n) => Quadrature::Fixed(n),
                None => Quadrature::Auto { floor: config.quad_floor },
            };
            let r = pc_contour(&enc, quadrature)?;
            if r.below_minimum {
                let _ = writeln!(stderr, "warning: {} quadrature points is below the recommended minimum", r.n_quad);
            }
            let out = PcOutput {
                pc: r.pc,
                n_quad: r.n_quad,
                quad_error_est: r.quad_error_est,
                below_minimum: r.below_minimum,
                miss_distance_m: enc.d(),
                sigma1_m: enc.s1(),
                sigma2_m: enc.s2(),
                combined_radius_m: enc.r_combined(),
            };
            render(format, &out, || {
                let mut t = Table::new(&["pc [1]", "n_quad [1]", "quad_error_est [1]", "miss_distance [m]", "sigma1 [m]", "sigma2 [m]", "combined_radius [m]"]);
                t.push(vec![
                    Cell::Float(out.pc),
                    Cell::Int(out.n_quad as u64),
                    Cell::Float(out.quad_error_est),
                    Cell::Float(out.miss_distance_m),
                    Cell::Float(out.sigma1_m),
                    Cell::Float(out.sigma2_m),
                    Cell::Float(out.combined_radius_m),
                ]);
                t
            }, &config)
        }
        Command::DilutionCurve { d_over_r, s_min, s_max, points } => {
            let curve = dilution_curve(d_over_r, s_min, s_max, points)?;
            let out = DilutionOutput {
                d_over_r,
                peak_s_over_r: curve.peak_s_over_r,
                peak_pc: curve.peak_pc,
                s_over_r: curve.grid.iter().map(|p| p.0).collect(),
                pc: curve.grid.iter().map(|p| p.1).collect(),
            };
            render(format, &out, || dilution_table(&curve), &config)
        }
        Command::DetectionCurve { s_over_r, d_true, threshold_grid, method, trials, seed } => {
            let thresholds = parse_thresholds(&threshold_grid)?;
            let method = match method {
                Method::SemiAnalytic => DetectionMethod::SemiAnalytic,
                Method::MonteCarlo => DetectionMethod::MonteCarlo {
                    trials: trials.unwrap_or(config.mc_trials),
                    seed: require_seed(seed, &config)?,
                },
            };
            let curve = detection_curve(&thresholds, s_over_r, d_true, method)?;
            render(format, &curve, || detection_table(&curve), &config)
        }
        Command::Boundary { threshold, radius } => {
            let s = dilution_boundary(threshold)?;
            if let Some(r) = radius {
                if !(r.is_finite() && r > 0.0) {
                    return Err(CliError::Usage("--radius must be positive".into()));
                }
            }
            let out = BoundaryOutput { threshold, s_over_r: s, radius_m: radius, sigma_m: radius.map(|r| r * s) };
            render(format, &out, || {
                let mut t = Table::new(&["threshold [1]", "s_over_r [1]", "sigma [m]"]);
                t.push(vec![
                    Cell::Float(threshold),
                    Cell::Float(s),
                    out.sigma_m.map_or(Cell::Text(String::new()), Cell::Float),
                ]);
                t
            }, &config)
        }
        Command::Screen { input, k_sigma } => {
            let file = read_conjunction(&input, stderr)?;
            let d = screen_conjunction(&file.joint_state()?, k_sigma)?;
            let out = ScreenOutput {
                min_distance_m: d.min_distance,
                overlap: d.overlap,
                k: d.k,
                confidence: d.per_object_confidence,
                joint_confidence: d.joint_confidence_independent,
                frechet_bound: d.joint_confidence_frechet,
                risk_cap: d.collision_risk_cap,
            };
            render(format, &out, || {
                let mut t = Table::new(&["min_distance [m]", "overlap", "k [1]", "confidence [1]", "joint_confidence [1]", "frechet_bound [1]", "risk_cap [1]"]);
                t.push(vec![
                    Cell::Float(out.min_distance_m),
                    Cell::Bool(out.overlap),
                    Cell::Float(out.k),
                    Cell::Float(out.confidence),
                    Cell::Float(out.joint_confidence),
                    Cell::Float(out.frechet_bound),
                    Cell::Float(out.risk_cap),
                ]);
                t
            }, &config)
        }
        Command::Validity { rule, dim, sigma, radii, proof_alpha, alphas, trials, seed } => {
            let seed = require_seed(seed, &config)?;
            let n = trials.unwrap_or(config.mc_trials);
            if dim == 0 || !(sigma.is_finite() && sigma > 0.0) {
                return Err(CliError::Usage("--dim must be at least 1 and --sigma positive".into()));
            }
            let theta = DVector::zeros(dim);
            let mut family: Vec<Proposition> = radii.iter().map(|&r| Proposition::outside_ball(theta.clone(), r)).collect();
            if let Some(a) = proof_alpha {
                family.push(Proposition::outside_ball(theta.clone(), proof_halfwidth(sigma, a)));
            }
            let cov = DMatrix::identity(dim, dim) * (sigma * sigma);
            let model = GaussianModel::new(cov.clone())?;
            let report = match rule {
                Rule::Ellipsoid => {
                    let r = ConfidenceRegionRule::new(cov, RegionLevel::Nested)?;
                    validity_check(&r, &model, &theta, &family, &alphas, n, seed)?
                }
                Rule::Additive => {
                    let r = GaussianPosteriorRule::new(cov)?;
                    validity_check(&r, &model, &theta, &family, &alphas, n, seed)?
                }
            };
            render(format, &report, || validity_table(&report), &config)
        }
        Command::FalseConfidence { sigma, alpha, halfwidth, trials, seed } => {
            let seed = require_seed(seed, &config)?;
            let h = halfwidth.unwrap_or_else(|| proof_halfwidth(sigma, alpha));
            let r = false_confidence_demo(sigma, h, alpha, trials.unwrap_or(config.mc_trials), seed)?;
            render(format, &r, || {
                let mut t = Table::new(&["alpha [1]", "halfwidth [1]", "p_target [1]", "empirical_rate [1]", "stderr [1]", "n_trials [1]", "seed"]);
                t.push(vec![
                    Cell::Float(r.alpha),
                    Cell::Float(r.neighborhood_halfwidth),
                    Cell::Float(r.p_target),
                    Cell::Float(r.empirical_rate),
                    Cell::Float(r.stderr),
                    Cell::Int(r.n_trials),
                    Cell::Int(r.seed),
                ]);
                t
            }, &config)
        }
    };

    match cli.output {
        Some(path) => {
            write_text(&path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// Entry point used by the binary.
pub fn main_with_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
