//! Run configuration.
//!
//! A run is described by one JSON document with four blocks: `problem` (what
//! to solve), `solver` (how hard to try), `verify` (how to probe the result),
//! and `output` (where artifacts go). Unknown keys are rejected at every
//! level so a typo fails loudly instead of silently falling back to a
//! default. Every field of `solver` and `verify` has a default, so the
//! minimal config is just a problem and an output directory.

use crate::error::CliError;
use quench::{BoundaryData, Grid, Params, ProfileSpec, Smoothing, SolverOptions, VerifyConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

fn default_weight() -> f64 {
    1.0
}

/// Top-level configuration for `solve` and `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

/// Top-level configuration for `sweep`: identical to [`RunConfig`] except
/// that `p` and `gamma` are lists whose Cartesian product defines the cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: SweepProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

/// The continuous problem: energy exponents and weights, the box domain,
/// the grid resolution, and the Dirichlet boundary data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: f64,
    pub gamma: f64,
    #[serde(default = "default_weight")]
    pub kappa: f64,
    #[serde(default = "default_weight")]
    pub mu: f64,
    /// Domain extent along the first axis, `[lo, hi]`.
    pub extent_x: (f64, f64),
    /// Extent along the second axis; present exactly when the problem is
    /// two-dimensional.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent_y: Option<(f64, f64)>,
    /// Node count along the first axis (at least 3; spacing must match the
    /// second axis in 2D).
    pub nodes_x: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_y: Option<usize>,
    pub boundary: BoundarySpec,
}

/// Same as [`ProblemConfig`] with parameter lists in place of `p` and
/// `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepProblemConfig {
    pub p: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default = "default_weight")]
    pub kappa: f64,
    #[serde(default = "default_weight")]
    pub mu: f64,
    pub extent_x: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent_y: Option<(f64, f64)>,
    pub nodes_x: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_y: Option<usize>,
    pub boundary: BoundarySpec,
}

/// Dirichlet data on the grid boundary: a named preset or a sampled table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    /// `g == 0`; the minimizer is the zero field.
    Zero,
    /// The same constant on every boundary node.
    Constant(ConstantBoundary),
    /// Trace of the exact one-sided power profile with contact point `x0`
    /// on the first axis (planar in 2D). Uses the problem's own exponents
    /// and weights.
    Profile(ProfileBoundary),
    /// Explicit values, one per boundary node, in ascending node-id order
    /// (the order `Grid::boundary_nodes` produces).
    Table(TableBoundary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantBoundary {
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileBoundary {
    pub x0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableBoundary {
    pub values: Vec<f64>,
}

/// Solver knobs; mirrors the library's options with the smoothing schedule
/// spelled as a geometric ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// First smoothing width of the continuation schedule.
    pub eps_start: f64,
    /// Last smoothing width; also the objective the finish phase polishes.
    pub eps_final: f64,
    /// Geometric decay factor between consecutive widths, in (0, 1).
    pub eps_factor: f64,
    pub max_iters_per_stage: usize,
    pub grad_tol: f64,
    pub stage_grad_tol: f64,
    pub energy_tol: f64,
    pub patience: usize,
    pub init_sweeps: usize,
    pub cascade: bool,
    pub finish_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let base = SolverOptions::default();
        Self {
            eps_start: 1e-1,
            eps_final: 1e-6,
            eps_factor: 0.5,
            max_iters_per_stage: base.max_iters_per_stage,
            grad_tol: base.grad_tol,
            stage_grad_tol: base.stage_grad_tol,
            energy_tol: base.energy_tol,
            patience: base.patience,
            init_sweeps: base.init_sweeps,
            cascade: base.cascade,
            finish_sweeps: base.finish_sweeps,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> Result<SolverOptions, CliError> {
        let smoothing = Smoothing::geometric(self.eps_start, self.eps_final, self.eps_factor)
            .map_err(|e| CliError::validation(format!("solver block rejected: {e}")))?;
        Ok(SolverOptions {
            smoothing,
            max_iters_per_stage: self.max_iters_per_stage,
            grad_tol: self.grad_tol,
            stage_grad_tol: self.stage_grad_tol,
            energy_tol: self.energy_tol,
            patience: self.patience,
            init_sweeps: self.init_sweeps,
            cascade: self.cascade,
            finish_sweeps: self.finish_sweeps,
        })
    }
}

/// Artifact encodings. The binary field format is what downstream commands
/// read back; CSV is a plot-ready export of the same samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Binary,
    Csv,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Binary]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory all artifacts are written into; created if missing.
    pub dir: PathBuf,
    /// Field encodings to emit; defaults to the binary format alone.
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl OutputConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.formats.is_empty() {
            return Err(CliError::validation(
                "output.formats must name at least one encoding".to_string(),
            ));
        }
        for (i, f) in self.formats.iter().enumerate() {
            if self.formats[..i].contains(f) {
                return Err(CliError::validation(format!(
                    "output.formats lists {f:?} more than once"
                )));
            }
        }
        Ok(())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl ProblemConfig {
    pub fn params(&self) -> Result<Params, CliError> {
        Params::weighted(self.p, self.gamma, self.kappa, self.mu)
            .map_err(|e| CliError::validation(format!("problem block rejected: {e}")))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        match (self.extent_y, self.nodes_y) {
            (None, None) => Grid::line(self.extent_x.0, self.extent_x.1, self.nodes_x)
                .map_err(|e| CliError::validation(format!("problem grid rejected: {e}"))),
            (Some(ey), Some(ny)) => Grid::rect(self.extent_x, ey, self.nodes_x, ny)
                .map_err(|e| CliError::validation(format!("problem grid rejected: {e}"))),
            _ => Err(CliError::validation(
                "extent_y and nodes_y must be given together (both for 2D, neither for 1D)"
                    .to_string(),
            )),
        }
    }

    pub fn boundary(&self, grid: &Grid, prm: &Params) -> Result<BoundaryData, CliError> {
        match &self.boundary {
            BoundarySpec::Zero => Ok(BoundaryData::constant(grid, 0.0)),
            BoundarySpec::Constant(c) => {
                if !c.value.is_finite() || c.value < 0.0 {
                    return Err(CliError::validation(format!(
                        "boundary constant must be finite and nonnegative, got {}",
                        c.value
                    )));
                }
                Ok(BoundaryData::constant(grid, c.value))
            }
            BoundarySpec::Profile(pb) => {
                if !pb.x0.is_finite() {
                    return Err(CliError::validation(format!(
                        "boundary profile contact point must be finite, got {}",
                        pb.x0
                    )));
                }
                Ok(ProfileSpec::new(prm, pb.x0).boundary_on(grid))
            }
            BoundarySpec::Table(t) => BoundaryData::from_table(grid, &t.values)
                .map_err(|e| CliError::validation(format!("boundary table rejected: {e}"))),
        }
    }
}

impl SweepConfig {
    /// Materializes one [`RunConfig`] per `(p, gamma)` cell, sorted by `p`
    /// then `gamma`, each writing into its own subdirectory of the sweep
    /// output directory.
    pub fn cells(&self) -> Result<Vec<RunConfig>, CliError> {
        if self.problem.p.is_empty() || self.problem.gamma.is_empty() {
            return Err(CliError::validation(
                "sweep problem.p and problem.gamma must be non-empty lists".to_string(),
            ));
        }
        let mut ps = self.problem.p.clone();
        let mut gs = self.problem.gamma.clone();
        ps.sort_by(f64::total_cmp);
        gs.sort_by(f64::total_cmp);
        for w in ps.windows(2) {
            if w[0] == w[1] {
                return Err(CliError::validation(format!("sweep problem.p repeats {}", w[0])));
            }
        }
        for w in gs.windows(2) {
            if w[0] == w[1] {
                return Err(CliError::validation(format!(
                    "sweep problem.gamma repeats {}",
                    w[0]
                )));
            }
        }
        let mut cells = Vec::with_capacity(ps.len() * gs.len());
        for &p in &ps {
            for &g in &gs {
                let cell = RunConfig {
                    problem: ProblemConfig {
                        p,
                        gamma: g,
                        kappa: self.problem.kappa,
                        mu: self.problem.mu,
                        extent_x: self.problem.extent_x,
                        extent_y: self.problem.extent_y,
                        nodes_x: self.problem.nodes_x,
                        nodes_y: self.problem.nodes_y,
                        boundary: self.problem.boundary.clone(),
                    },
                    solver: self.solver.clone(),
                    verify: self.verify.clone(),
                    output: OutputConfig {
                        dir: self.output.dir.join(cell_dir_name(p, g)),
                        formats: self.output.formats.clone(),
                    },
                };
                // Validate eagerly so a bad cell aborts the sweep before any
                // work starts.
                cell.problem.params()?;
                let grid = cell.problem.grid()?;
                cell.problem.boundary(&grid, &cell.problem.params()?)?;
                cells.push(cell);
            }
        }
        Ok(cells)
    }
}

/// Subdirectory name for one sweep cell. `{}` formatting of f64 is the
/// shortest representation that round-trips, so distinct parameters always
/// get distinct, stable names.
pub fn cell_dir_name(p: f64, gamma: f64) -> String {
    format!("p{p}_gamma{gamma}")
}

/// Parses a `--grid` override: `"129"` for 1D, `"261x131"` for 2D.
pub fn parse_grid_override(s: &str) -> Result<(usize, Option<usize>), CliError> {
    let bad = || {
        CliError::validation(format!(
            "--grid expects a node count like \"1025\" or \"261x131\", got \"{s}\""
        ))
    };
    match s.split_once('x') {
        None => Ok((s.trim().parse().map_err(|_| bad())?, None)),
        Some((a, b)) => Ok((
            a.trim().parse().map_err(|_| bad())?,
            Some(b.trim().parse().map_err(|_| bad())?),
        )),
    }
}

/// Applies `--grid`/`--out` overrides to a parsed config.
pub fn apply_overrides(
    problem_nodes: (&mut usize, &mut Option<usize>),
    output_dir: &mut PathBuf,
    is_2d: bool,
    grid: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(spec) = grid {
        let (nx, ny) = parse_grid_override(spec)?;
        if ny.is_some() != is_2d {
            return Err(CliError::validation(format!(
                "--grid \"{spec}\" is {}D but the problem block is {}D",
                if ny.is_some() { 2 } else { 1 },
                if is_2d { 2 } else { 1 },
            )));
        }
        *problem_nodes.0 = nx;
        *problem_nodes.1 = ny;
    }
    if let Some(dir) = out {
        *output_dir = dir.to_path_buf();
    }
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{what} {} rejected: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json() -> &'static str {
        r#"{
            "problem": {
                "p": 3.0, "gamma": 0.5,
                "extent_x": [0.0, 1.0], "nodes_x": 129,
                "boundary": {"profile": {"x0": 0.25}}
            },
            "output": {"dir": "out"}
        }"#
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: RunConfig = serde_json::from_str(sample_json()).unwrap();
        assert_eq!(cfg.problem.kappa, 1.0);
        assert_eq!(cfg.problem.mu, 1.0);
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.verify, VerifyConfig::default());
        assert_eq!(cfg.output.formats, vec![Format::Binary]);
        let grid = cfg.problem.grid().unwrap();
        assert_eq!(grid.dim(), 1);
        assert_eq!(grid.nodes_along(0), 129);
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        for (mangled, what) in [
            (sample_json().replacen("\"problem\"", "\"probelm\"", 1), "top level"),
            (sample_json().replacen("\"p\": 3.0,", "\"p\": 3.0, \"pp\": 1,", 1), "problem"),
            (
                sample_json().replacen("{\"x0\": 0.25}", "{\"x0\": 0.25, \"y0\": 1}", 1),
                "boundary variant",
            ),
            (
                sample_json().replacen("\"dir\": \"out\"", "\"dir\": \"out\", \"zip\": true", 1),
                "output",
            ),
        ] {
            assert!(
                serde_json::from_str::<RunConfig>(&mangled).is_err(),
                "unknown key in {what} was accepted"
            );
        }
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg: RunConfig = serde_json::from_str(sample_json()).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn mismatched_dimension_fields_are_rejected() {
        let mangled = sample_json().replacen(
            "\"nodes_x\": 129,",
            "\"nodes_x\": 129, \"nodes_y\": 65,",
            1,
        );
        let cfg: RunConfig = serde_json::from_str(&mangled).unwrap();
        assert!(cfg.problem.grid().is_err());
    }

    #[test]
    fn boundary_presets_materialize() {
        let cfg: RunConfig = serde_json::from_str(sample_json()).unwrap();
        let prm = cfg.problem.params().unwrap();
        let grid = cfg.problem.grid().unwrap();
        let b = cfg.problem.boundary(&grid, &prm).unwrap();
        // profile with x0 = 0.25 on [0, 1]: left end zero, right end positive
        assert_eq!(b.value_at(0), 0.0);
        assert!(b.value_at(grid.num_nodes() - 1) > 0.0);

        let zero: BoundarySpec = serde_json::from_str("\"zero\"").unwrap();
        assert_eq!(zero, BoundarySpec::Zero);

        let tbl: BoundarySpec =
            serde_json::from_str(r#"{"table": {"values": [1.0, 2.0]}}"#).unwrap();
        if let BoundarySpec::Table(t) = &tbl {
            let data = BoundaryData::from_table(&grid, &t.values).unwrap();
            assert_eq!(data.value_at(0), 1.0);
        } else {
            panic!("expected table variant");
        }
    }

    #[test]
    fn sweep_cells_are_sorted_and_isolated() {
        let text = r#"{
            "problem": {
                "p": [3.0, 2.0], "gamma": [0.5, 0.25],
                "extent_x": [0.0, 1.0], "nodes_x": 65,
                "boundary": {"profile": {"x0": 0.25}}
            },
            "output": {"dir": "sweep_out"}
        }"#;
        let cfg: SweepConfig = serde_json::from_str(text).unwrap();
        let cells = cfg.cells().unwrap();
        assert_eq!(cells.len(), 4);
        let keys: Vec<(f64, f64)> =
            cells.iter().map(|c| (c.problem.p, c.problem.gamma)).collect();
        assert_eq!(keys, vec![(2.0, 0.25), (2.0, 0.5), (3.0, 0.25), (3.0, 0.5)]);
        let dirs: Vec<String> =
            cells.iter().map(|c| c.output.dir.display().to_string()).collect();
        assert_eq!(dirs[0], "sweep_out/p2_gamma0.25");
        assert_eq!(dirs[3], "sweep_out/p3_gamma0.5");
    }

    #[test]
    fn grid_override_parses_both_shapes() {
        assert_eq!(parse_grid_override("1025").unwrap(), (1025, None));
        assert_eq!(parse_grid_override("261x131").unwrap(), (261, Some(131)));
        assert!(parse_grid_override("eleven").is_err());
        assert!(parse_grid_override("4x4x4").is_err());
    }
}
