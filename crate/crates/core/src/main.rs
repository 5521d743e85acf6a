use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde_json::json;

use leafscope::calculus::{
    christoffel, curvature_derivative_norms, curvature_tensor, sectional_curvature,
};
use leafscope::error::{Error, Result};
use leafscope::experiments::{run_experiment, ExperimentConfig, ExperimentId};
use leafscope::foliation::example_registry;
use leafscope::geodesics::{integrate_geodesic, GeodesicState, DEFAULT_STEP};
use leafscope::metric_space::{gh_bounds, PointedFiniteMetricSpace};
use leafscope::metrics::{chart_by_name, registry_names};

/// Leaf geometry of foliations: pointed Gromov-Hausdorff bounds, local
/// tensor calculus, geodesics and the example-foliation experiments.
#[derive(Parser)]
#[command(name = "leafscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bounds on the pointed GH distance between two metric-space JSON files.
    Gh {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
    },
    /// Christoffel symbols, curvature and curvature-derivative norms at a point.
    Curvature {
        #[arg(long)]
        metric: String,
        #[arg(long)]
        point: Coords,
        #[arg(long, default_value_t = 1)]
        kmax: usize,
    },
    /// Integrates a geodesic and prints CSV rows t,x1..xd,v1..vd.
    Geodesic {
        #[arg(long)]
        metric: String,
        #[arg(long)]
        from: Coords,
        #[arg(long)]
        dir: Coords,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
    },
    /// Runs a built-in experiment and writes its report.
    Experiment {
        /// Experiment id, see `leafscope list`.
        id: String,
        /// JSON overrides of the experiment config (parameters, radius, n_max, ...).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report JSON path; a CSV with the same stem is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lists built-in metrics, example foliations and experiments.
    List,
}

/// Comma-separated coordinates such as `1.0,0.5`.
#[derive(Clone, Debug)]
struct Coords(Vec<f64>);

impl FromStr for Coords {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("`{p}` is not a number"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Coords)
    }
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn read_space(path: &Path) -> Result<PointedFiniteMetricSpace> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::from(e).context(path.display().to_string()))?;
    PointedFiniteMetricSpace::from_json(&text).map_err(|e| e.context(path.display().to_string()))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gh { a, b, n_max } => {
            if n_max == 0 {
                return Err(Error::InvalidInput("--n-max must be at least 1".into()));
            }
            let (x, y) = (read_space(&a)?, read_space(&b)?);
            let bounds = gh_bounds(&x, &y, n_max);
            emit(&(serde_json::to_string_pretty(&bounds)? + "\n"))?;
        }
        Command::Curvature {
            metric,
            point: Coords(point),
            kmax,
        } => {
            let chart = chart_by_name(&metric)?;
            if point.len() != chart.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "{metric} needs {} coordinates",
                    chart.dim()
                )));
            }
            let gamma = christoffel(&chart, &point)?;
            let riemann = curvature_tensor(&chart, &point)?;
            let norms = curvature_derivative_norms(&chart, &point, kmax)?;
            let sectional = if chart.dim() >= 2 {
                Some(sectional_curvature(&chart, &point, 0, 1)?)
            } else {
                None
            };
            let g = chart.checked_metric(&point)?;
            let out = json!({
                "metric": metric,
                "point": point,
                "g": (0..chart.dim()).map(|i| (0..chart.dim()).map(|j| g[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "christoffel": gamma.coeffs(),
                "riemann": riemann.coeffs(),
                "sectional_01": sectional,
                "curvature_derivative_norms": norms,
            });
            emit(&(serde_json::to_string_pretty(&out)? + "\n"))?;
        }
        Command::Geodesic {
            metric,
            from: Coords(from),
            dir: Coords(dir),
            t,
            step,
        } => {
            let chart = chart_by_name(&metric)?;
            if from.len() != chart.dim() || dir.len() != chart.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "{metric} needs {} coordinates",
                    chart.dim()
                )));
            }
            if !(t.is_finite() && step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidInput(
                    "--t must be finite and --step positive".into(),
                ));
            }
            let path = integrate_geodesic(&chart, &GeodesicState::new(&from, &dir), t, step)?;
            emit(&path.to_csv())?;
            if path.hit_boundary {
                eprintln!("geodesic left the chart at t = {}", path.end_time());
            }
        }
        Command::Experiment { id, config, out } => {
            let id: ExperimentId = id.parse()?;
            let cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| Error::from(e).context(p.display().to_string()))?;
                    serde_json::from_str::<ExperimentConfig>(&text)
                        .map_err(|e| Error::from(e).context(p.display().to_string()))?
                }
                None => ExperimentConfig::default(),
            };
            let report = run_experiment(id, &cfg)?;
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => {
                    std::fs::write(&p, text)?;
                    std::fs::write(p.with_extension("csv"), report.to_csv())?;
                }
                None => emit(&(text + "\n"))?,
            }
            for c in &report.checks {
                eprintln!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
        }
        Command::List => {
            let mut out = String::from("metrics:\n");
            for m in registry_names() {
                let _ = writeln!(out, "  {m}");
            }
            out.push_str("examples:\n");
            for d in example_registry() {
                let _ = writeln!(out, "  {}: {}", d.id, d.ambient);
                let _ = writeln!(out, "    t: {}", d.transversal);
                for k in &d.leaves {
                    let _ = writeln!(
                        out,
                        "    {} ({}): {:?}",
                        k.selector, k.condition, k.topology
                    );
                }
            }
            out.push_str("experiments:\n");
            for e in ExperimentId::ALL {
                let _ = writeln!(out, "  {}: {}", e, e.description());
            }
            emit(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
