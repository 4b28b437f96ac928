use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use fplap::error::Error;
use fplap::io::{grid_function_csv, read_grid_function, read_json, to_json_line, write_grid_function, write_json, Cell, Csv};
use fplap::kernel::KernelParams;
use fplap::lattice::{Axis, Grid, GridFunction, Idx, MAX_DIM};
use fplap::operator::{Operator, QuadratureConfig};
use fplap::solver::{solve_ball_power, solve_dirichlet_rhs, solve_whole_space, ScalarMap, Solution, SolveConfig, WholeSpaceConfig};
use fplap::symmetry::{full_symmetry_report, moving_plane_scan, CenterSpec};
use fplap::verify::{run_suite, VerifyConfig, SUITES};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("solver did not converge; best iterate written to {0}")]
    NotConverged(PathBuf),
    #[error("suite {suite}: {violations} violation(s); reports in {dir}")]
    Violations { suite: String, violations: usize, dir: PathBuf },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::NotConverged(_) => 4,
            CliError::Violations { .. } => 5,
            CliError::Core(e) => match e {
                Error::InvalidParams(_) | Error::Parse { .. } | Error::Io(_) | Error::Grid(_) => 2,
                Error::NotConverged { .. } | Error::NonPositiveIterate { .. } | Error::DecayFitFailed { .. } => 4,
                _ => 3,
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io(format!("{}: {e}", path.display())))
}

/// Paths in a config are relative to the config file.
fn resolve(config: &Path, path: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalConfig {
    input: PathBuf,
    params: KernelParams,
    #[serde(default)]
    quadrature: QuadratureConfig,
    /// Lattice indices to evaluate; every interior node when absent.
    nodes: Option<Vec<Vec<i64>>>,
}

pub fn eval(config: &Path) -> Result<()> {
    let cfg: EvalConfig = read_json(config)?;
    cfg.params.validate()?;
    cfg.quadrature.validate()?;
    let u = read_grid_function(&resolve(config, &cfg.input))?;
    if u.grid.n != cfg.params.n {
        return Err(Error::InvalidParams(format!("grid dimension {} does not match n = {}", u.grid.n, cfg.params.n)).into());
    }
    let op = Operator::new(cfg.params, cfg.quadrature, &u.grid)?;
    let records = match &cfg.nodes {
        None => op.eval_interior(&u)?,
        Some(nodes) => {
            let mut records = Vec::with_capacity(nodes.len());
            for v in nodes {
                records.push(op.eval(&u, &to_idx(v, u.grid.n)?)?);
            }
            records
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for r in &records {
        writeln!(lock, "{}", to_json_line(r)).map_err(|e| io_err(Path::new("<stdout>"), e))?;
    }
    Ok(())
}

fn to_idx(v: &[i64], n: usize) -> Result<Idx> {
    if v.len() != n {
        return Err(Error::InvalidParams(format!("node {v:?} needs {n} indices")).into());
    }
    let mut i = [0i64; MAX_DIM];
    i[..n].copy_from_slice(v);
    Ok(i)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum Problem {
    /// `(-Δ)_p^s u = f` in the unit ball, `u = 0` outside.
    Dirichlet { rhs: PathBuf },
    /// `(-Δ)_p^s u = μ u^q` in the unit ball.
    BallPower {
        q: f64,
        h: f64,
        #[serde(default = "default_margin")]
        margin: i64,
    },
    /// `(-Δ)_p^s u = g(u)` on a truncated whole space.
    WholeSpace {
        g: ScalarMap,
        #[serde(default)]
        domain: WholeSpaceConfig,
    },
}

fn default_margin() -> i64 {
    6
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveFile {
    problem: Problem,
    params: KernelParams,
    #[serde(default)]
    quadrature: QuadratureConfig,
    #[serde(default)]
    solve: SolveConfig,
}

pub fn solve(config: &Path, out: &Path) -> Result<()> {
    let cfg: SolveFile = read_json(config)?;
    cfg.params.validate()?;
    cfg.quadrature.validate()?;
    cfg.solve.validate()?;
    let sol: Solution = match &cfg.problem {
        Problem::Dirichlet { rhs } => {
            let f = read_grid_function(&resolve(config, rhs))?;
            solve_dirichlet_rhs(&f, &cfg.params, &cfg.quadrature, &cfg.solve)?
        }
        Problem::BallPower { q, h, margin } => {
            let grid = Grid::around_unit_ball(cfg.params.n, *h, *margin)?;
            solve_ball_power(*q, &grid, &cfg.params, &cfg.quadrature, &cfg.solve)?
        }
        Problem::WholeSpace { g, domain } => solve_whole_space(g, &cfg.params, &cfg.quadrature, &cfg.solve, domain)?,
    };
    create_dir(out)?;
    write_grid_function(&out.join("solution.json"), &sol.u)?;
    write_json(&out.join("solution.sidecar.json"), &sol.sidecar())?;
    std::fs::write(out.join("solution.csv"), grid_function_csv(&sol.u)).map_err(|e| io_err(out, e))?;
    if !sol.converged {
        return Err(CliError::NotConverged(out.join("solution.json")));
    }
    Ok(())
}

pub fn verify(config: Option<&Path>, suite: Option<&str>, out: &Path) -> Result<()> {
    let cfg = match (config, suite) {
        (Some(path), _) => read_json::<VerifyConfig>(path)?,
        (None, Some(name)) => VerifyConfig::for_suite(name),
        (None, None) => return Err(CliError::Usage("verify needs --config or --suite".into())),
    };
    if !SUITES.contains(&cfg.suite.as_str()) {
        return Err(CliError::Usage(format!("unknown suite '{}' (expected one of {})", cfg.suite, SUITES.join(", "))));
    }
    cfg.validate()?;
    let output = run_suite(&cfg)?;
    let dir = out.join(&cfg.suite);
    output.write(&dir)?;
    if !output.passed() {
        return Err(CliError::Violations {
            suite: cfg.suite,
            violations: output.violations,
            dir,
        });
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanConfig {
    input: PathBuf,
    /// Signed axes; all of them when absent.
    axes: Option<Vec<Axis>>,
}

pub fn scan(config: &Path, out: &Path) -> Result<()> {
    let cfg: ScanConfig = read_json(config)?;
    let u = read_function(config, &cfg.input)?;
    let axes = cfg.axes.unwrap_or_else(|| Axis::all(u.grid.n));
    let scans = axes
        .into_iter()
        .map(|a| moving_plane_scan(&u, a))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&["dim", "sign", "lambda", "min_w"]);
    for s in &scans {
        for pt in &s.curve {
            csv.row(&[
                Cell::U(s.axis.dim as u64),
                Cell::I(s.axis.sign as i64),
                Cell::F(pt.lambda),
                Cell::F(pt.min_w),
            ]);
        }
    }
    create_dir(out)?;
    write_json(&out.join("scan.json"), &scans)?;
    std::fs::write(out.join("scan.csv"), csv.finish()).map_err(|e| io_err(out, e))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportConfig {
    input: PathBuf,
    #[serde(default)]
    center: CenterSpec,
}

pub fn report(config: &Path, out: &Path) -> Result<()> {
    let cfg: ReportConfig = read_json(config)?;
    let u = read_function(config, &cfg.input)?;
    let report = full_symmetry_report(&u, &cfg.center)?;
    create_dir(out)?;
    write_json(&out.join("symmetry.json"), &report)?;
    Ok(())
}

fn read_function(config: &Path, input: &Path) -> Result<GridFunction> {
    Ok(read_grid_function(&resolve(config, input))?)
}
