//! Named experiment suites. Each produces a JSON report and a CSV summary;
//! both are pure functions of the configuration.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{narrow_region_family, NarrowFamilyConfig, NarrowRegionFamily};
use crate::io::{to_json, Cell, Csv};
use crate::kernel::{g_apply, lemma_ratio_infimum, mean_value_xi, KernelParams, MeanValue};
use crate::lattice::{Axis, Grid};
use crate::operator::QuadratureConfig;
use crate::principles::{antisymmetric_mp_suite, boundary_estimate_sequence_span, simple_mp_suite, BoundarySequence, SuiteConfig};
use crate::solver::{solve_ball_power, SolveConfig};
use crate::symmetry::{full_symmetry_report, CenterSpec, SymmetryReport};

pub const SUITES: [&str; 6] = ["simple-mp", "antisym-mp", "boundary", "lemma", "narrow-region", "symmetry"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub suite: String,
    pub seed: u64,
    /// Trials of the maximum-principle suites.
    pub trials: usize,
    /// `(t1, t2, p)` samples of the lemma suite.
    pub samples: usize,
    /// Fixes `p` in the lemma suite (otherwise drawn from `[2.1, 4]`).
    pub p: Option<f64>,
    /// Spacing overrides for 1D and 2D runs.
    pub h_1d: Option<f64>,
    pub h_2d: Option<f64>,
    /// Dimensions of the symmetry suite.
    pub dims: Vec<usize>,
    pub quadrature: QuadratureConfig,
    pub solve: SolveConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            suite: String::new(),
            seed: 42,
            trials: 1000,
            samples: 100_000,
            p: None,
            h_1d: None,
            h_2d: None,
            dims: vec![1, 2],
            quadrature: QuadratureConfig::default(),
            solve: SolveConfig::default(),
        }
    }
}

impl VerifyConfig {
    pub fn for_suite(suite: &str) -> Self {
        VerifyConfig {
            suite: suite.to_string(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !SUITES.contains(&self.suite.as_str()) {
            return Err(Error::InvalidParams(format!(
                "unknown suite '{}' (expected one of {})",
                self.suite,
                SUITES.join(", ")
            )));
        }
        if self.trials == 0 || self.samples == 0 {
            return Err(Error::InvalidParams("trials and samples must be positive".into()));
        }
        for h in [self.h_1d, self.h_2d].into_iter().flatten() {
            if !(h > 0.0 && h <= 0.25) {
                return Err(Error::InvalidParams(format!("spacing must lie in (0, 1/4], got {h}")));
            }
        }
        if let Some(p) = self.p {
            if !(p > 2.0 && p.is_finite()) {
                return Err(Error::InvalidParams(format!("lemma suite needs p > 2, got {p}")));
            }
        }
        if self.dims.is_empty() || self.dims.iter().any(|d| !(1..=2).contains(d)) {
            return Err(Error::InvalidParams("dims must be a nonempty subset of {1, 2}".into()));
        }
        self.quadrature.validate()?;
        self.solve.validate()
    }
}

/// Serialized outputs of one suite run.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutput {
    pub suite: String,
    pub violations: usize,
    pub report_json: String,
    pub summary_csv: String,
}

impl SuiteOutput {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Writes `report.json` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), format!("{}\n", self.report_json))?;
        std::fs::write(dir.join("summary.csv"), &self.summary_csv)?;
        Ok(())
    }
}

pub fn run_suite(cfg: &VerifyConfig) -> Result<SuiteOutput> {
    cfg.validate()?;
    match cfg.suite.as_str() {
        "simple-mp" | "antisym-mp" => mp_suite(cfg),
        "lemma" => lemma_suite(cfg),
        "boundary" => boundary_suite(cfg),
        "narrow-region" => narrow_suite(cfg),
        "symmetry" => symmetry_suite(cfg),
        _ => unreachable!("validated above"),
    }
}

fn mp_suite(cfg: &VerifyConfig) -> Result<SuiteOutput> {
    let defaults = SuiteConfig::default();
    let sc = SuiteConfig {
        trials: cfg.trials,
        seed: cfg.seed,
        h_1d: cfg.h_1d.unwrap_or(defaults.h_1d),
        h_2d: cfg.h_2d.unwrap_or(defaults.h_2d),
        quadrature: cfg.quadrature.clone(),
    };
    let report = if cfg.suite == "simple-mp" {
        simple_mp_suite(&sc)?
    } else {
        antisymmetric_mp_suite(&sc)?
    };
    Ok(SuiteOutput {
        suite: cfg.suite.clone(),
        violations: report.violations,
        report_json: to_json(&report),
        summary_csv: report.summary_csv(),
    })
}

/// Relative tolerance of the mean-value identity.
pub const LEMMA_RESIDUAL_TOL: f64 = 1e-12;
/// Slack on the sampled constant `c_o`.
pub const LEMMA_SLACK: f64 = 0.99;
/// Pairs used to sample `c_o` for each `p`.
const LEMMA_CONSTANT_SAMPLES: usize = 4096;
const LEMMA_P_LEVELS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub p: f64,
    pub c_o: f64,
    pub samples: usize,
    pub max_residual: f64,
    /// Smallest `|ξ| / (c_o max(|t1|, |t2|))`.
    pub min_ratio: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub name: String,
    pub seed: u64,
    pub samples: usize,
    pub violations: usize,
    pub max_residual: f64,
    pub min_ratio: f64,
    pub residual_tol: f64,
    pub slack: f64,
    pub rows: Vec<LemmaRow>,
}

fn lemma_suite(cfg: &VerifyConfig) -> Result<SuiteOutput> {
    let levels: Vec<f64> = match cfg.p {
        Some(p) => vec![p],
        None => (0..LEMMA_P_LEVELS)
            .map(|j| 2.1 + 1.9 * (j as f64 + 0.5) / LEMMA_P_LEVELS as f64)
            .collect(),
    };
    let per = cfg.samples.div_ceil(levels.len());
    let rows: Vec<LemmaRow> = levels
        .par_iter()
        .enumerate()
        .map(|(j, &p)| {
            let c_o = lemma_ratio_infimum(p, LEMMA_CONSTANT_SAMPLES)?;
            let count = per.min(cfg.samples - (j * per).min(cfg.samples));
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(j as u64));
            let mut row = LemmaRow {
                p,
                c_o,
                samples: count,
                max_residual: 0.0,
                min_ratio: f64::INFINITY,
                violations: 0,
            };
            for _ in 0..count {
                let (t1, t2) = random_pair(&mut rng);
                let MeanValue::Magnitude(xi) = mean_value_xi(t1, t2, p)? else {
                    unreachable!("p > 2")
                };
                let lhs = (p - 1.0) * xi.powf(p - 2.0) * (t2 - t1);
                let rhs = g_apply(t2, p) - g_apply(t1, p);
                let residual = (lhs - rhs).abs() / rhs.abs();
                let ratio = xi / (c_o * t1.abs().max(t2.abs()));
                row.max_residual = row.max_residual.max(residual);
                row.min_ratio = row.min_ratio.min(ratio);
                if residual > LEMMA_RESIDUAL_TOL || ratio < LEMMA_SLACK {
                    row.violations += 1;
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let report = LemmaReport {
        name: "lemma".into(),
        seed: cfg.seed,
        samples: rows.iter().map(|r| r.samples).sum(),
        violations: rows.iter().map(|r| r.violations).sum(),
        max_residual: rows.iter().map(|r| r.max_residual).fold(0.0, f64::max),
        min_ratio: rows.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min),
        residual_tol: LEMMA_RESIDUAL_TOL,
        slack: LEMMA_SLACK,
        rows,
    };
    let mut csv = Csv::new(&["p", "c_o", "samples", "max_residual", "min_ratio", "violations"]);
    for r in &report.rows {
        csv.row(&[
            Cell::F(r.p),
            Cell::F(r.c_o),
            Cell::U(r.samples as u64),
            Cell::F(r.max_residual),
            Cell::F(r.min_ratio),
            Cell::U(r.violations as u64),
        ]);
    }
    Ok(SuiteOutput {
        suite: "lemma".into(),
        violations: report.violations,
        report_json: to_json(&report),
        summary_csv: csv.finish(),
    })
}

/// Log-uniform magnitudes in `[1e-3, 1e3]`, independent signs, `t1 != t2`.
fn random_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let mut draw = || {
            let m = 10f64.powf(rng.gen_range(-3.0..3.0));
            if rng.gen_bool(0.5) { m } else { -m }
        };
        let (t1, t2) = (draw(), draw());
        if t1 != t2 {
            return (t1, t2);
        }
    }
}

/// Planes and widths of the boundary suite.
pub const BOUNDARY_CASES: [(f64, f64); 3] = [(2.0, 0.5), (3.0, 0.5), (3.0, 0.7)];
pub const BOUNDARY_LAMBDA_O: f64 = -0.25;
pub const BOUNDARY_SPAN: f64 = 0.125;
pub const BOUNDARY_STEPS: usize = 8;
/// Quotients count once `δ_k <= BOUNDARY_RESOLVED h`.
pub const BOUNDARY_RESOLVED: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCase {
    pub p: f64,
    pub s: f64,
    pub q: f64,
    pub h: f64,
    pub mu: Option<f64>,
    pub converged: bool,
    pub resolved: usize,
    pub violations: usize,
    pub sequence: BoundarySequence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub name: String,
    pub lambda_o: f64,
    pub span: f64,
    pub threshold_in_h: f64,
    pub violations: usize,
    pub cases: Vec<BoundaryCase>,
}

fn boundary_suite(cfg: &VerifyConfig) -> Result<SuiteOutput> {
    let h = cfg.h_2d.unwrap_or(1.0 / 16.0);
    let cases: Vec<BoundaryCase> = BOUNDARY_CASES
        .par_iter()
        .map(|&(p, s)| {
            let params = KernelParams::new(2, s, p, 1.0)?;
            let q = p - 1.0;
            let grid = Grid::around_unit_ball(2, h, 8)?;
            let sol = solve_ball_power(q, &grid, &params, &cfg.quadrature, &cfg.solve)?;
            let sequence = boundary_estimate_sequence_span(
                &sol.u,
                Axis::E1,
                BOUNDARY_LAMBDA_O,
                BOUNDARY_SPAN,
                BOUNDARY_STEPS,
                &params,
                &cfg.quadrature,
            )?;
            let resolved: Vec<f64> = sequence.resolved(BOUNDARY_RESOLVED * h + 1e-12).map(|e| e.1).collect();
            let mut violations = resolved.iter().filter(|q| **q >= 0.0).count();
            // an unconverged solve or an empty resolved set proves nothing
            if resolved.is_empty() || !sol.converged {
                violations += 1;
            }
            Ok(BoundaryCase {
                p,
                s,
                q,
                h,
                mu: sol.mu,
                converged: sol.converged,
                resolved: resolved.len(),
                violations,
                sequence,
            })
        })
        .collect::<Result<_>>()?;
    let mut csv = Csv::new(&["p", "s", "k", "lambda", "delta", "w_min", "quotient", "hypothesis_met"]);
    for c in &cases {
        let sq = &c.sequence;
        for k in 0..sq.lambdas.len() {
            csv.row(&[
                Cell::F(c.p),
                Cell::F(c.s),
                Cell::U(k as u64),
                Cell::F(sq.lambdas[k]),
                Cell::F(sq.deltas[k]),
                Cell::F(sq.w_min[k]),
                Cell::F(sq.quotients[k]),
                Cell::B(sq.hypothesis_met[k]),
            ]);
        }
    }
    let report = BoundaryReport {
        name: "boundary".into(),
        lambda_o: BOUNDARY_LAMBDA_O,
        span: BOUNDARY_SPAN,
        threshold_in_h: BOUNDARY_RESOLVED,
        violations: cases.iter().map(|c| c.violations).sum(),
        cases,
    };
    Ok(SuiteOutput {
        suite: "boundary".into(),
        violations: report.violations,
        report_json: to_json(&report),
        summary_csv: csv.finish(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NarrowReport {
    pub name: String,
    pub slope_bound: f64,
    pub bracket_width: f64,
    pub violations: usize,
    pub family: NarrowRegionFamily,
}

/// Widths at or below this must show the contradiction bracket.
pub const BRACKET_WIDTH: f64 = 0.05;

fn narrow_suite(cfg: &VerifyConfig) -> Result<SuiteOutput> {
    let mut fc = NarrowFamilyConfig::default();
    if let Some(h) = cfg.h_1d {
        fc.h = h;
    }
    let family = narrow_region_family(&fc)?;
    let bound = -family.sp + 0.1;
    let violations = family.slopes.iter().filter(|s| **s > bound).count()
        + family
            .probes
            .iter()
            .filter(|p| p.i_value < 0.0 || (p.delta <= BRACKET_WIDTH && !p.contradiction_holds))
            .count();
    let report = NarrowReport {
        name: "narrow-region".into(),
        slope_bound: bound,
        bracket_width: BRACKET_WIDTH,
        violations,
        family,
    };
    Ok(SuiteOutput {
        suite: "narrow-region".into(),
        violations,
        report_json: to_json(&report),
        summary_csv: report.family.table_csv(),
    })
}

pub const SYMMETRY_CASES: [(f64, f64); 2] = [(2.0, 0.5), (3.0, 0.5)];
pub const ASYMMETRY_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCase {
    pub n: usize,
    pub p: f64,
    pub s: f64,
    pub q: f64,
    pub h: f64,
    pub mu: Option<f64>,
    pub converged: bool,
    pub report: SymmetryReport,
    pub lambda_ok: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrySuiteReport {
    pub name: String,
    pub asymmetry_tol: f64,
    pub violations: usize,
    pub cases: Vec<SymmetryCase>,
}

fn symmetry_suite(cfg: &VerifyConfig) -> Result<SuiteOutput> {
    let mut specs = Vec::new();
    for &n in &cfg.dims {
        for &(p, s) in &SYMMETRY_CASES {
            for q in [p - 1.0, p] {
                specs.push((n, p, s, q));
            }
        }
    }
    // cases run one after another; each solve is parallel inside
    let cases: Vec<SymmetryCase> = specs
        .iter()
        .map(|&(n, p, s, q)| {
            let h = if n == 1 {
                cfg.h_1d.unwrap_or(1.0 / 128.0)
            } else {
                cfg.h_2d.unwrap_or(1.0 / 32.0)
            };
            let params = KernelParams::new(n, s, p, 1.0)?;
            let grid = Grid::around_unit_ball(n, h, 6)?;
            let sol = solve_ball_power(q, &grid, &params, &cfg.quadrature, &cfg.solve)?;
            let report = full_symmetry_report(&sol.u, &CenterSpec::auto())?;
            let lambda_ok = report.lambda_0.iter().all(|e| e.lambda_0.abs() <= h / 2.0 + 1e-12);
            let passed = sol.converged
                && report.asymmetry < ASYMMETRY_TOL
                && report.monotonicity_violations == 0
                && lambda_ok;
            Ok(SymmetryCase {
                n,
                p,
                s,
                q,
                h,
                mu: sol.mu,
                converged: sol.converged,
                report,
                lambda_ok,
                passed,
            })
        })
        .collect::<Result<_>>()?;
    let mut csv = Csv::new(&[
        "n", "p", "s", "q", "h", "mu", "asymmetry", "monotonicity_violations", "max_abs_lambda_0", "passed",
    ]);
    for c in &cases {
        let lmax = c.report.lambda_0.iter().map(|e| e.lambda_0.abs()).fold(0.0, f64::max);
        csv.row(&[
            Cell::U(c.n as u64),
            Cell::F(c.p),
            Cell::F(c.s),
            Cell::F(c.q),
            Cell::F(c.h),
            c.mu.map_or(Cell::S(String::new()), Cell::F),
            Cell::F(c.report.asymmetry),
            Cell::U(c.report.monotonicity_violations as u64),
            Cell::F(lmax),
            Cell::B(c.passed),
        ]);
    }
    let report = SymmetrySuiteReport {
        name: "symmetry".into(),
        asymmetry_tol: ASYMMETRY_TOL,
        violations: cases.iter().filter(|c| !c.passed).count(),
        cases,
    };
    Ok(SuiteOutput {
        suite: "symmetry".into(),
        violations: report.violations,
        report_json: to_json(&report),
        summary_csv: csv.finish(),
    })
}
