//! Measurement checkers for the quantitative behavior of minimizers.
//!
//! Each checker probes a solved (or closed-form) field through the grid
//! operations and free-boundary geometry only, records every number it
//! measured, and reduces pass/fail to explicit inequalities on those numbers.
//! A failed measurement never aborts the suite: it becomes a failed entry
//! with the error recorded, and the remaining checkers still run.
//!
//! Design rules:
//! - Constants are measured and recorded, never asserted against theory;
//!   only exponents, ratios, spreads, and signs carry pass/fail criteria.
//! - Every criterion is re-evaluable from the report alone: `pass` is a
//!   pure function of `value`, `lo`, `hi`.
//! - No randomness: probe points are selected by deterministic ranking, so
//!   the same field and config produce a byte-identical report.

mod checks;

pub use checks::{
    GRADIENT_CONSTANT, GRADIENT_SUP, GROWTH_CONSTANT, INTRINSIC_SUP, OSCILLATION_SUP,
    SHARP_FLOOR, SPHERE_FLOOR,
};

use serde::{Deserialize, Serialize};

use crate::fb::{distance_to_fb, free_boundary, positivity_set_with};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::params::Params;

/// One recorded inequality: `pass` holds iff `value` is finite and lies in
/// `[lo, hi]` (a missing bound is unconstrained).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub label: String,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub pass: bool,
}

impl Criterion {
    pub fn between(label: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::build(label, value, Some(lo), Some(hi))
    }

    pub fn at_least(label: impl Into<String>, value: f64, lo: f64) -> Self {
        Self::build(label, value, Some(lo), None)
    }

    pub fn at_most(label: impl Into<String>, value: f64, hi: f64) -> Self {
        Self::build(label, value, None, Some(hi))
    }

    /// Finiteness only; used for "bounded" claims whose bound is measured,
    /// not asserted.
    pub fn finite(label: impl Into<String>, value: f64) -> Self {
        Self::build(label, value, None, None)
    }

    fn build(label: impl Into<String>, value: f64, lo: Option<f64>, hi: Option<f64>) -> Self {
        let mut c = Self { label: label.into(), value, lo, hi, pass: false };
        c.pass = c.holds();
        c
    }

    /// Re-evaluate the inequality from the recorded numbers.
    pub fn holds(&self) -> bool {
        self.value.is_finite()
            && self.lo.is_none_or(|lo| self.value >= lo)
            && self.hi.is_none_or(|hi| self.value <= hi)
    }
}

/// A fitted exponent with its least-squares uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub label: String,
    pub value: f64,
    pub stderr: f64,
}

/// A measured constant (recorded for cross-resolution comparison, never
/// asserted against a theoretical value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub label: String,
    pub value: f64,
}

/// Outcome of one checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub criteria: Vec<Criterion>,
    pub exponents: Vec<Fitted>,
    pub constants: Vec<Measured>,
    /// Number of probe samples that entered the measurement.
    pub samples: usize,
    /// Radii, widths, or box scales swept, in the order used.
    pub scales: Vec<f64>,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

impl CheckResult {
    /// Recompute pass/fail from the recorded numbers alone.
    pub fn holds(&self) -> bool {
        self.error.is_none() && self.criteria.iter().all(Criterion::holds)
    }

    pub fn constant(&self, label: &str) -> Option<f64> {
        self.constants.iter().find(|m| m.label == label).map(|m| m.value)
    }

    pub fn exponent(&self, label: &str) -> Option<f64> {
        self.exponents.iter().find(|m| m.label == label).map(|m| m.value)
    }
}

/// Incremental builder so checkers cannot forget to derive `pass`.
pub(crate) struct CheckBuilder {
    res: CheckResult,
}

impl CheckBuilder {
    pub fn new(name: &str) -> Self {
        Self {
            res: CheckResult {
                name: name.to_string(),
                pass: false,
                criteria: Vec::new(),
                exponents: Vec::new(),
                constants: Vec::new(),
                samples: 0,
                scales: Vec::new(),
                notes: Vec::new(),
                error: None,
            },
        }
    }

    pub fn criterion(&mut self, c: Criterion) -> &mut Self {
        self.res.criteria.push(c);
        self
    }

    pub fn exponent(&mut self, label: &str, value: f64, stderr: f64) -> &mut Self {
        self.res.exponents.push(Fitted { label: label.to_string(), value, stderr });
        self
    }

    pub fn constant(&mut self, label: &str, value: f64) -> &mut Self {
        self.res.constants.push(Measured { label: label.to_string(), value });
        self
    }

    pub fn samples(&mut self, n: usize) -> &mut Self {
        self.res.samples = n;
        self
    }

    pub fn scales(&mut self, s: &[f64]) -> &mut Self {
        self.res.scales = s.to_vec();
        self
    }

    pub fn note(&mut self, msg: impl Into<String>) -> &mut Self {
        self.res.notes.push(msg.into());
        self
    }

    pub fn finish(mut self) -> CheckResult {
        self.res.pass = self.res.holds();
        self.res
    }

    /// Terminal error entry: the measurement could not run.
    pub fn fail(name: &str, err: impl Into<String>) -> CheckResult {
        let mut b = Self::new(name);
        b.res.error = Some(err.into());
        b.res.pass = false;
        b.res
    }
}

/// Tunable thresholds and probe-geometry settings. Serialized back into the
/// report so a reader sees exactly what was applied, including defaults for
/// keys the input config omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Positivity threshold as a fraction of `amp * h^alpha`.
    pub theta_rel: f64,
    /// Smallest probe radius in cells.
    pub radii_min_cells: f64,
    /// Minimum number of dyadic radii required for exponent fits.
    pub min_radii: usize,
    /// Minimum pooled (radius, value) pairs for an exponent fit.
    pub min_fit_samples: usize,
    /// Maximum number of boundary sample points probed.
    pub max_fb_samples: usize,
    /// Maximum number of interior probe nodes for pointwise ratios.
    pub max_point_probes: usize,
    /// Half-width of the accepted band around the analytic growth exponent.
    pub slope_tol: f64,
    /// Number of dyadic width scales swept by the strip checks.
    pub delta_halvings: usize,
    /// Accepted band for fitted width-exponents of strip quantities.
    pub strip_slope_lo: f64,
    pub strip_slope_hi: f64,
    /// Slack coefficient: discrete interior subharmonicity defects down to
    /// `-slack * amp^((p-1)/alpha) * sqrt(h)` are attributed to the stencil.
    pub subharmonic_slack: f64,
    /// Half-width of the accepted band around the expected box dimension.
    pub box_dim_tol: f64,
    /// Probe radii are capped at this fraction of the longest extent.
    pub radius_fraction_cap: f64,
    /// Largest tolerated max/min spread of a ratio that should be constant.
    pub spread_bound: f64,
    /// Tighter spread bound for the strip-inclusion ratio.
    pub inclusion_spread_bound: f64,
    /// Required two-sided volume fraction of each phase near the boundary.
    pub density_floor: f64,
    /// Pointwise gradient probes stay this many cells away from the boundary.
    pub gradient_margin_cells: f64,
    /// Pointwise growth-floor probes stay this many cells away (deeper,
    /// because the floor is bias-sensitive).
    pub deep_margin_cells: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            theta_rel: 0.1,
            radii_min_cells: 8.0,
            min_radii: 4,
            min_fit_samples: 5,
            max_fb_samples: 12,
            max_point_probes: 64,
            slope_tol: 0.15,
            delta_halvings: 4,
            strip_slope_lo: 0.7,
            strip_slope_hi: 1.3,
            subharmonic_slack: 1.0,
            box_dim_tol: 0.15,
            radius_fraction_cap: 0.25,
            spread_bound: 4.0,
            inclusion_spread_bound: 2.0,
            density_floor: 0.1,
            gradient_margin_cells: 4.0,
            deep_margin_cells: 16.0,
        }
    }
}

/// Constants of the flatness regime, derived from measured quantities. Both
/// closed forms of the width threshold must agree; the derivation refuses to
/// produce constants that do not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatnessConstants {
    /// Measured normalized gradient constant `sup |Du|^p / (u^gamma * sup_u^(p-gamma))`.
    pub c_grad: f64,
    /// Width threshold below which the linearized field is subharmonic.
    pub delta_star: f64,
    /// Measured growth constant `sup_{B_r} u / r^alpha` at the largest radius.
    pub c_growth: f64,
    /// Base localization radius (largest probe radius).
    pub r0: f64,
    /// Radius below which the flatness regime is active.
    pub r_star: f64,
}

impl FlatnessConstants {
    pub fn derive(prm: &Params, c_grad: f64, c_growth: f64, r0: f64) -> Result<Self, String> {
        if !(c_grad > 0.0) || !c_grad.is_finite() {
            return Err(format!("gradient constant must be positive and finite, got {c_grad}"));
        }
        if !(c_growth > 0.0) || !c_growth.is_finite() {
            return Err(format!("growth constant must be positive and finite, got {c_growth}"));
        }
        if !(r0 > 0.0) {
            return Err(format!("base radius must be positive, got {r0}"));
        }
        let delta_star = prm.delta_star(c_grad);
        let alt = prm.delta_star_alt(c_grad);
        if (delta_star - alt).abs() > 1e-12 * delta_star.abs().max(1.0) {
            return Err(format!(
                "width-threshold closed forms disagree: {delta_star} vs {alt}"
            ));
        }
        let r_star = r0.min(delta_star * c_growth.powf(-(prm.p - prm.gamma) / prm.p));
        if !(delta_star > 0.0) || !(r_star > 0.0) {
            return Err(format!(
                "degenerate flatness constants: delta_star = {delta_star}, r_star = {r_star}"
            ));
        }
        Ok(Self { c_grad, delta_star, c_growth, r0, r_star })
    }
}

/// Grid and parameter summary echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub params: Params,
    pub dim: usize,
    pub nodes: [usize; 2],
    pub h: f64,
    pub extent_x: (f64, f64),
    pub extent_y: (f64, f64),
    pub sup_u: f64,
}

/// Full machine-readable outcome of a verification run. Plain vectors and
/// scalars only, in a fixed order, so serialization is byte-deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub problem: ProblemSummary,
    pub config: VerifyConfig,
    /// Positivity threshold actually applied.
    pub threshold: f64,
    /// Amplitude estimate the threshold was derived from (growth-fit value
    /// when available, sup-based bootstrap otherwise).
    pub amplitude_estimate: f64,
    pub fb_cells: usize,
    pub flatness: Option<FlatnessConstants>,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Recompute the verdict from the recorded numbers alone.
    pub fn holds(&self) -> bool {
        self.checks.iter().all(CheckResult::holds)
    }
}

/// A boundary probe point with its clearance from the domain boundary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Sample {
    pub center: [f64; 2],
    pub clearance: f64,
}

/// Everything the checkers share: the field, the extracted geometry, the
/// probe points, and the radius ladder.
pub(crate) struct Ctx<'a> {
    pub f: &'a ScalarField,
    pub prm: &'a Params,
    pub cfg: &'a VerifyConfig,
    pub pset: crate::fb::PositivitySet,
    pub fb: crate::fb::FreeBoundary,
    pub dist: Option<ScalarField>,
    pub samples: Vec<Sample>,
    pub radii: Vec<f64>,
    pub amp: f64,
}

/// Distance from a point to the nearest domain edge.
pub(crate) fn domain_clearance(grid: &Grid, point: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    for (axis, &coord) in point.iter().enumerate().take(grid.dim()) {
        let (lo, hi) = grid.extent(axis);
        best = best.min(coord - lo).min(hi - coord);
    }
    best
}

fn build_ctx<'a>(
    f: &'a ScalarField,
    prm: &'a Params,
    cfg: &'a VerifyConfig,
    amp: f64,
) -> Ctx<'a> {
    let grid = f.grid();
    let pset = positivity_set_with(f, prm, cfg.theta_rel, amp);
    let fb = free_boundary(&pset);
    let dist = distance_to_fb(&fb).ok();

    // Boundary probe points: cell centers ranked by clearance from the
    // domain edge (deepest first; ties broken by center coordinates so the
    // ranking is total and deterministic).
    let mut ranked: Vec<Sample> = fb
        .centers()
        .iter()
        .map(|&c| Sample { center: c, clearance: domain_clearance(grid, c) })
        .collect();
    ranked.sort_by(|a, b| {
        b.clearance
            .total_cmp(&a.clearance)
            .then(a.center[0].total_cmp(&b.center[0]))
            .then(a.center[1].total_cmp(&b.center[1]))
    });
    ranked.truncate(cfg.max_fb_samples);

    // Global dyadic radius ladder, bounded by the deepest sample's clearance
    // and the configured fraction of the domain size.
    let mut radii = Vec::new();
    if let Some(best) = ranked.first() {
        let cap = (cfg.radius_fraction_cap * grid.max_extent()).min(best.clearance);
        let mut r = cfg.radii_min_cells * grid.h();
        while r <= cap + 1e-12 {
            radii.push(r);
            r *= 2.0;
        }
    }

    Ctx { f, prm, cfg, pset, fb, dist, samples: ranked, radii, amp }
}

/// Run every checker against the field and assemble the report.
///
/// Two passes: the first extracts the boundary with a sup-based amplitude
/// bootstrap and measures the growth constant; the second rebuilds the
/// geometry with that measured amplitude so all reported checks share the
/// refined threshold. Checkers run in dependency order (growth and gradient
/// constants before the flatness-regime checks that consume them) and a
/// failed checker never aborts the suite.
pub fn run_all(f: &ScalarField, prm: &Params, cfg: &VerifyConfig) -> Report {
    let grid = f.grid();
    let bootstrap = crate::fb::amplitude_bootstrap(f, prm);

    // Pass 1: growth fit under the bootstrap threshold refines the amplitude.
    let ctx0 = build_ctx(f, prm, cfg, bootstrap);
    let growth0 = checks::check_growth(&ctx0);
    let amp = growth0.constant(checks::GROWTH_CONSTANT).unwrap_or(bootstrap);

    // Pass 2: reported measurements under the refined threshold.
    let ctx = build_ctx(f, prm, cfg, amp);

    let mut checks_out = Vec::new();
    let growth = checks::check_growth(&ctx);
    let gradient = checks::check_gradient_decay(&ctx);

    let flatness = match (
        gradient.constant(checks::GRADIENT_CONSTANT),
        growth.constant(checks::GROWTH_CONSTANT),
        ctx.radii.last().copied(),
    ) {
        (Some(c_grad), Some(c_growth), Some(r0)) => {
            FlatnessConstants::derive(prm, c_grad, c_growth, r0).ok()
        }
        _ => None,
    };

    checks_out.push(growth);
    checks_out.push(checks::check_harnack(&ctx));
    checks_out.push(checks::check_intrinsic_harnack(&ctx));
    checks_out.push(gradient);
    checks_out.push(checks::check_nondegeneracy(&ctx));
    checks_out.push(checks::check_integral_nondegeneracy(&ctx));
    checks_out.push(checks::check_sharp_nondegeneracy(&ctx));
    checks_out.push(checks::check_density_porosity(&ctx));
    checks_out.push(checks::check_flat_subharmonicity(&ctx, flatness.as_ref()));
    checks_out.push(checks::check_flat_inclusion(&ctx));
    checks_out.push(checks::check_strip_integral(&ctx));
    checks_out.push(checks::check_flat_measure(&ctx));
    checks_out.push(checks::check_neighborhood_measure(&ctx));
    checks_out.push(checks::check_hausdorff(&ctx));

    let pass = checks_out.iter().all(|c| c.pass);
    Report {
        problem: ProblemSummary {
            params: *prm,
            dim: grid.dim(),
            nodes: [grid.nodes_along(0), grid.nodes_along(1)],
            h: grid.h(),
            extent_x: grid.extent(0),
            extent_y: if grid.dim() == 2 { grid.extent(1) } else { (0.0, 0.0) },
            sup_u: f.sup(),
        },
        config: cfg.clone(),
        threshold: ctx.pset.threshold(),
        amplitude_estimate: amp,
        fb_cells: ctx.fb.cells().len(),
        flatness,
        checks: checks_out,
        pass,
    }
}

/// Cross-resolution stability: the measured constants of two reports for the
/// same problem at grid spacings `h` and `h/2` must agree within a factor of
/// two. Missing constants (a checker that errored on either side) fail the
/// comparison explicitly.
pub fn compare_reports(coarse: &Report, fine: &Report) -> CheckResult {
    const TRACKED: [(&str, &str); 6] = [
        ("growth", checks::GROWTH_CONSTANT),
        ("gradient-decay", checks::GRADIENT_SUP),
        ("nondegeneracy", checks::SPHERE_FLOOR),
        ("sharp-nondegeneracy", checks::SHARP_FLOOR),
        ("harnack", checks::OSCILLATION_SUP),
        ("intrinsic-harnack", checks::INTRINSIC_SUP),
    ];
    let mut b = CheckBuilder::new("refinement-stability");
    for (check, label) in TRACKED {
        let pair = (
            coarse.check(check).and_then(|c| c.constant(label)),
            fine.check(check).and_then(|c| c.constant(label)),
        );
        let ratio = match pair {
            (Some(a), Some(bv)) if a != 0.0 => bv / a,
            _ => f64::NAN,
        };
        b.criterion(Criterion::between(
            format!("{check}: {label}, fine/coarse"),
            ratio,
            0.5,
            2.0,
        ));
    }
    b.samples(TRACKED.len());
    b.finish()
}
