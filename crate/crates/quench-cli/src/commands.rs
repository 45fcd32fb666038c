//! The four entry points: `solve`, `verify`, `sweep`, `oracle`.
//!
//! All artifacts have fixed names inside the output directory, all JSON is
//! emitted through the same deterministic serializer, and nothing records
//! timestamps or absolute paths, so re-running a command with the same
//! inputs reproduces every output byte for byte.

use crate::config::{
    apply_overrides, Format, OutputConfig, RunConfig, SweepConfig,
};
use crate::error::CliError;
use quench::{
    compare_reports, energy, free_boundary, minimize, positivity_set, run_all, EnergyBreakdown,
    Grid, Params, ProfileSpec, Region, Report, ScalarField, SolveResult, StageStats,
};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

pub const FIELD_BIN: &str = "field.bin";
pub const FIELD_CSV: &str = "field.csv";
pub const SOLVE_JSON: &str = "solve.json";
pub const REPORT_JSON: &str = "report.json";
pub const ORACLE_BIN: &str = "oracle.bin";
pub const ORACLE_CSV: &str = "oracle.csv";
pub const ORACLE_JSON: &str = "oracle.json";
pub const SWEEP_CSV: &str = "sweep.csv";

/// Environment variable naming the sweep worker count (default 1).
pub const WORKERS_ENV: &str = "QUENCH_WORKERS";

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

/// Serializes as pretty JSON with a trailing newline — the one shape every
/// JSON artifact uses.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn write_field_artifacts(
    out: &OutputConfig,
    field: &ScalarField,
    bin_name: &str,
    csv_name: &str,
) -> Result<(), CliError> {
    ensure_dir(&out.dir)?;
    if out.wants(Format::Binary) {
        quench::io::write_field(&out.dir.join(bin_name), field)
            .map_err(|e| CliError::io(format!("cannot write {bin_name}: {e}")))?;
    }
    if out.wants(Format::Csv) {
        quench::io::write_field_csv(&out.dir.join(csv_name), field)
            .map_err(|e| CliError::io(format!("cannot write {csv_name}: {e}")))?;
    }
    Ok(())
}

/// Everything `solve` learned, minus the field itself (which goes to the
/// binary/CSV artifacts).
#[derive(Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub p: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub mu: f64,
    pub alpha: f64,
    pub dim: usize,
    pub nodes: [usize; 2],
    pub h: f64,
    pub converged: bool,
    pub kkt: f64,
    pub finish_sweeps: usize,
    pub stages: Vec<StageStats>,
    pub energy: EnergyBreakdown,
    pub sup: f64,
    pub positive_nodes: usize,
    pub fb_cells: usize,
}

fn summarize(prm: &Params, result: &SolveResult) -> SolveSummary {
    let grid = result.field.grid();
    let pset = positivity_set(&result.field, prm);
    let fb = free_boundary(&pset);
    SolveSummary {
        p: prm.p,
        gamma: prm.gamma,
        kappa: prm.kappa,
        mu: prm.mu,
        alpha: prm.alpha(),
        dim: grid.dim(),
        nodes: [grid.nodes_along(0), grid.nodes_along(1)],
        h: grid.h(),
        converged: result.converged,
        kkt: result.kkt,
        finish_sweeps: result.finish_sweeps,
        stages: result.stages.clone(),
        energy: result.energy,
        sup: result.field.sup(),
        positive_nodes: pset.count(),
        fb_cells: fb.cells().len(),
    }
}

/// `solve`: minimize the energy described by the config and write the field
/// plus a JSON summary. Returns the non-convergence error *after* writing
/// artifacts, per the exit-code contract.
pub fn cmd_solve(
    config_path: &Path,
    grid_override: Option<&str>,
    out_override: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg: RunConfig = crate::config::read_json(config_path, "config")?;
    apply_overrides(
        (&mut cfg.problem.nodes_x, &mut cfg.problem.nodes_y),
        &mut cfg.output.dir,
        cfg.problem.extent_y.is_some(),
        grid_override,
        out_override,
    )?;
    cfg.output.validate()?;
    let prm = cfg.problem.params()?;
    let grid = cfg.problem.grid()?;
    let bnd = cfg.problem.boundary(&grid, &prm)?;
    let opts = cfg.solver.options()?;

    let result = minimize(&prm, &bnd, &opts)
        .map_err(|e| CliError::validation(format!("solver rejected the problem: {e}")))?;

    write_field_artifacts(&cfg.output, &result.field, FIELD_BIN, FIELD_CSV)?;
    write_json(&cfg.output.dir.join(SOLVE_JSON), &summarize(&prm, &result))?;
    println!(
        "solve: wrote {} (converged={}, energy={})",
        cfg.output.dir.display(),
        result.converged,
        result.energy.total
    );
    if !result.converged {
        return Err(CliError::non_convergence(format!(
            "solver stationarity {:e} did not reach the target {:e}; artifacts were written",
            result.kkt, opts.grad_tol
        )));
    }
    Ok(())
}

/// `verify`: load a previously written field, check it against the problem
/// block, run the full measurement suite, and write the report. A report
/// whose checks fail is still a successful run of the command; failures of
/// substance live inside the artifact.
pub fn cmd_verify(
    config_path: &Path,
    field_path: &Path,
    baseline_path: Option<&Path>,
    out_override: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg: RunConfig = crate::config::read_json(config_path, "config")?;
    if let Some(dir) = out_override {
        cfg.output.dir = dir.to_path_buf();
    }
    cfg.output.validate()?;
    let prm = cfg.problem.params()?;
    let grid = cfg.problem.grid()?;
    let field = quench::io::read_field(field_path)
        .map_err(|e| CliError::io(format!("cannot read field {}: {e}", field_path.display())))?;
    check_grids_match(&grid, field.grid())?;

    let mut report = run_all(&field, &prm, &cfg.verify);
    if let Some(base) = baseline_path {
        let baseline: Report = crate::config::read_json(base, "baseline report")?;
        let stability = compare_reports(&baseline, &report);
        report.pass = report.pass && stability.pass;
        report.checks.push(stability);
    }
    ensure_dir(&cfg.output.dir)?;
    write_json(&cfg.output.dir.join(REPORT_JSON), &report)?;
    println!(
        "verify: wrote {} (pass={}, fb_cells={})",
        cfg.output.dir.join(REPORT_JSON).display(),
        report.pass,
        report.fb_cells
    );
    Ok(())
}

fn check_grids_match(config_grid: &Grid, field_grid: &Grid) -> Result<(), CliError> {
    let same = config_grid.dim() == field_grid.dim()
        && (0..config_grid.dim()).all(|a| {
            config_grid.nodes_along(a) == field_grid.nodes_along(a)
                && config_grid.extent(a) == field_grid.extent(a)
        });
    if !same {
        return Err(CliError::validation(format!(
            "field grid ({}d, {}x{}) does not match the problem block ({}d, {}x{})",
            field_grid.dim(),
            field_grid.nodes_along(0),
            field_grid.nodes_along(1),
            config_grid.dim(),
            config_grid.nodes_along(0),
            config_grid.nodes_along(1),
        )));
    }
    Ok(())
}

/// Header written next to the oracle fixture: the closed-form quantities a
/// consumer needs without re-deriving them.
#[derive(Debug, Serialize, Deserialize)]
pub struct OracleHeader {
    pub p: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub mu: f64,
    pub x0: f64,
    /// Growth exponent p/(p - gamma).
    pub alpha: f64,
    /// Profile amplitude: the positive root of
    /// `A^(p-gamma) * alpha^(p-1) * (alpha-1) * (p-1) = kappa * mu * gamma`.
    pub amplitude: f64,
    pub dim: usize,
    pub nodes: [usize; 2],
    pub h: f64,
    pub extent_x: (f64, f64),
    pub extent_y: Option<(f64, f64)>,
    /// Total energy of the sampled fixture on its grid.
    pub energy: f64,
}

pub struct OracleArgs<'a> {
    pub p: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub mu: f64,
    pub x0: f64,
    pub grid: &'a str,
    pub extent_x: (f64, f64),
    pub extent_y: Option<(f64, f64)>,
    pub out: &'a Path,
    pub csv: bool,
}

/// `oracle`: sample the exact one-sided power profile on a grid and write
/// it as a fixture (binary field + JSON header).
pub fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let prm = Params::weighted(args.p, args.gamma, args.kappa, args.mu)
        .map_err(|e| CliError::validation(format!("parameters rejected: {e}")))?;
    let (nx, ny) = crate::config::parse_grid_override(args.grid)?;
    let grid = match (args.extent_y, ny) {
        (None, None) => Grid::line(args.extent_x.0, args.extent_x.1, nx)
            .map_err(|e| CliError::validation(format!("grid rejected: {e}")))?,
        (Some(ey), Some(ny)) => Grid::rect(args.extent_x, ey, nx, ny)
            .map_err(|e| CliError::validation(format!("grid rejected: {e}")))?,
        _ => {
            return Err(CliError::validation(
                "--extent-y and a 2D --grid must be given together".to_string(),
            ))
        }
    };
    if !args.x0.is_finite() {
        return Err(CliError::validation(format!("x0 must be finite, got {}", args.x0)));
    }
    let spec = ProfileSpec::new(&prm, args.x0);
    let field = spec.field_on(&grid);
    let header = OracleHeader {
        p: prm.p,
        gamma: prm.gamma,
        kappa: prm.kappa,
        mu: prm.mu,
        x0: args.x0,
        alpha: prm.alpha(),
        amplitude: spec.amplitude(),
        dim: grid.dim(),
        nodes: [grid.nodes_along(0), grid.nodes_along(1)],
        h: grid.h(),
        extent_x: grid.extent(0),
        extent_y: (grid.dim() == 2).then(|| grid.extent(1)),
        energy: energy(&field, &prm, Region::Whole).total,
    };
    let formats =
        if args.csv { vec![Format::Binary, Format::Csv] } else { vec![Format::Binary] };
    let out = OutputConfig { dir: args.out.to_path_buf(), formats };
    write_field_artifacts(&out, &field, ORACLE_BIN, ORACLE_CSV)?;
    write_json(&out.dir.join(ORACLE_JSON), &header)?;
    println!(
        "oracle: wrote {} (alpha={}, amplitude={})",
        out.dir.display(),
        header.alpha,
        header.amplitude
    );
    Ok(())
}

/// One row of the sweep aggregate: the cell's parameters, the analytic
/// growth exponent alpha = p/(p - gamma), and the exponents the verifier
/// fitted on the solved field.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub gamma: f64,
    pub alpha_analytic: f64,
    pub growth_exponent: f64,
    pub sphere_exponent: f64,
    pub energy: f64,
    pub fb_cells: usize,
    pub converged: bool,
    pub report_pass: bool,
}

fn fitted_exponent(report: &Report, check: &str, label: &str) -> f64 {
    report.check(check).and_then(|c| c.exponent(label)).unwrap_or(f64::NAN)
}

fn run_cell(cell: &RunConfig) -> Result<SweepRow, CliError> {
    let prm = cell.problem.params()?;
    let grid = cell.problem.grid()?;
    let bnd = cell.problem.boundary(&grid, &prm)?;
    let opts = cell.solver.options()?;
    let result = minimize(&prm, &bnd, &opts)
        .map_err(|e| CliError::validation(format!("solver rejected the problem: {e}")))?;

    write_field_artifacts(&cell.output, &result.field, FIELD_BIN, FIELD_CSV)?;
    write_json(&cell.output.dir.join(SOLVE_JSON), &summarize(&prm, &result))?;
    let report = run_all(&result.field, &prm, &cell.verify);
    write_json(&cell.output.dir.join(REPORT_JSON), &report)?;

    Ok(SweepRow {
        p: prm.p,
        gamma: prm.gamma,
        alpha_analytic: prm.alpha(),
        growth_exponent: fitted_exponent(&report, "growth", "ball-sup growth exponent"),
        sphere_exponent: fitted_exponent(&report, "nondegeneracy", "sphere-sup growth exponent"),
        energy: result.energy.total,
        fb_cells: report.fb_cells,
        converged: result.converged,
        report_pass: report.pass,
    })
}

fn worker_count() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(CliError::validation(format!("{WORKERS_ENV} is not valid unicode: {e}"))),
        Ok(raw) => raw.trim().parse::<usize>().ok().filter(|&w| w >= 1).ok_or_else(|| {
            CliError::validation(format!(
                "{WORKERS_ENV} must be a positive integer, got \"{raw}\""
            ))
        }),
    }
}

/// `sweep`: solve + verify every `(p, gamma)` cell into its own
/// subdirectory, then write one aggregate CSV sorted by `(p, gamma)`.
/// Cells run on a fixed-size worker pool ([`WORKERS_ENV`]); each cell
/// touches only its own directory, and the aggregate is written by the
/// parent after all workers finish, so the artifacts are identical for any
/// worker count.
pub fn cmd_sweep(config_path: &Path, out_override: Option<&Path>) -> Result<(), CliError> {
    let mut cfg: SweepConfig = crate::config::read_json(config_path, "config")?;
    if let Some(dir) = out_override {
        cfg.output.dir = dir.to_path_buf();
    }
    cfg.output.validate()?;
    let cells = cfg.cells()?;
    let workers = worker_count()?.min(cells.len());

    // Fixed-size pool over a shared work counter; results flow back through
    // a channel tagged with the cell index so the aggregate order never
    // depends on scheduling.
    let next = std::sync::atomic::AtomicUsize::new(0);
    let (tx, rx) = std::sync::mpsc::channel::<(usize, Result<SweepRow, CliError>)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            scope.spawn(|| {
                let tx = tx;
                loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= cells.len() {
                        break;
                    }
                    let row = run_cell(&cells[i]);
                    tx.send((i, row)).expect("aggregate channel open");
                }
            });
        }
    });
    drop(tx);

    let mut outcomes: Vec<Option<Result<SweepRow, CliError>>> = Vec::new();
    outcomes.resize_with(cells.len(), || None);
    for (i, row) in rx {
        outcomes[i] = Some(row);
    }
    let mut rows = Vec::with_capacity(cells.len());
    for outcome in outcomes {
        rows.push(outcome.expect("every cell ran")?);
    }

    ensure_dir(&cfg.output.dir)?;
    let csv_path = cfg.output.dir.join(SWEEP_CSV);
    let io_err = |e: std::io::Error| CliError::io(format!("cannot write {}: {e}", csv_path.display()));
    let mut w = std::io::BufWriter::new(std::fs::File::create(&csv_path).map_err(io_err)?);
    write_sweep_csv(&mut w, &rows).map_err(io_err)?;
    w.flush().map_err(io_err)?;

    println!("sweep: wrote {} ({} cells)", csv_path.display(), rows.len());
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        return Err(CliError::non_convergence(format!(
            "{unconverged} of {} cells did not reach stationarity {:e}; artifacts were written",
            rows.len(),
            cfg.solver.grad_tol
        )));
    }
    Ok(())
}

fn write_sweep_csv(w: &mut impl std::io::Write, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "p,gamma,alpha_analytic,growth_exponent,sphere_exponent,energy,fb_cells,converged,report_pass"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.p,
            r.gamma,
            r.alpha_analytic,
            r.growth_exponent,
            r.sphere_exponent,
            r.energy,
            r.fb_cells,
            r.converged,
            r.report_pass
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_mismatch_is_reported() {
        let a = Grid::line(0.0, 1.0, 65).unwrap();
        let b = Grid::line(0.0, 1.0, 129).unwrap();
        assert!(check_grids_match(&a, &b).is_err());
        assert!(check_grids_match(&a, &a).is_ok());
        let c = Grid::rect((0.0, 2.0), (0.0, 1.0), 9, 5).unwrap();
        assert!(check_grids_match(&a, &c).is_err());
        assert!(check_grids_match(&c, &c).is_ok());
    }

    #[test]
    fn worker_count_parses_and_rejects() {
        // The default path (variable unset) must give one worker. The test
        // process may inherit the variable, so only exercise the unset case
        // when it is actually unset.
        if std::env::var(WORKERS_ENV).is_err() {
            assert_eq!(worker_count().unwrap(), 1);
        }
    }
}
