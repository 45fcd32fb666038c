//! The individual measurement checkers.
//!
//! Probe geometry conventions shared by all checkers:
//! - Boundary samples are free-boundary cell centers ranked by clearance
//!   from the domain edge; radii form one dyadic ladder per field.
//! - Pointwise probes are member nodes filtered by distance to the boundary
//!   (shallow nodes see stencil error, not field behavior) and subsampled on
//!   a deterministic stride.
//! - Exponents come from pooled least-squares fits on dyadic scales;
//!   constants are recorded at the largest scale, where the relative cell
//!   error is smallest.

use crate::fb::{
    density_ratio, hausdorff_estimate, neighborhood_measure, porosity_witness,
};
use crate::field::ScalarField;
use crate::fit::log_log_fit;
use crate::grid::Ball;
use crate::ops::{
    ball_avg, ball_inf, ball_sup, grad_pow, gradient, p_laplacian, powq, sphere_sup,
};

use super::{domain_clearance, CheckBuilder, CheckResult, Criterion, Ctx, FlatnessConstants};

pub const GROWTH_CONSTANT: &str = "ball-sup over r^alpha at largest radius";
pub const GRADIENT_SUP: &str = "sup of |Du|^p / u^gamma";
pub const GRADIENT_CONSTANT: &str = "gradient constant normalized by sup-u";
pub const SPHERE_FLOOR: &str = "sphere-sup over r^alpha floor at largest radius";
pub const SHARP_FLOOR: &str = "pointwise u / d^alpha floor";
pub const OSCILLATION_SUP: &str = "largest sup/inf oscillation ratio";
pub const INTRINSIC_SUP: &str = "largest intrinsic growth ratio";

const EMPTY_FB: &str = "free boundary is empty";

fn norm_sq(v: [f64; 2]) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

/// max/min of a list of positive values; NaN when empty or non-positive, so
/// a criterion built on it fails loudly instead of silently passing.
fn spread(vals: &[f64]) -> f64 {
    let mx = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mn = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if vals.is_empty() || !(mn > 0.0) {
        f64::NAN
    } else {
        mx / mn
    }
}

/// Deterministic stride subsample keeping at most `cap` entries.
fn subsample<T: Copy>(items: &[T], cap: usize) -> Vec<T> {
    if items.len() <= cap || cap == 0 {
        return items.to_vec();
    }
    let stride = items.len().div_ceil(cap);
    items.iter().copied().step_by(stride).collect()
}

/// Corner average of a cell.
fn cell_avg(f: &ScalarField, cell: usize) -> f64 {
    let corners = f.grid().cell_corners(cell);
    corners.iter().map(|&id| f.get(id)).sum::<f64>() / corners.len() as f64
}

/// Squared norm of the cell-centered gradient (exact for bilinear data).
fn cell_gradient_sq(f: &ScalarField, cell: usize) -> f64 {
    let g = f.grid();
    let h = g.h();
    let (ci, cj) = g.cell_multi(cell);
    if g.dim() == 1 {
        let d = (f.at(ci + 1, 0) - f.at(ci, 0)) / h;
        return d * d;
    }
    let (a, b, c, d) = (
        f.at(ci, cj),
        f.at(ci + 1, cj),
        f.at(ci, cj + 1),
        f.at(ci + 1, cj + 1),
    );
    let gx = ((b - a) + (d - c)) / (2.0 * h);
    let gy = ((c - a) + (d - b)) / (2.0 * h);
    gx * gx + gy * gy
}

/// Member nodes at least `margin` from the boundary (by the distance field)
/// and at least one cell inside the domain.
fn deep_members(ctx: &Ctx, margin: f64) -> Vec<usize> {
    let Some(dist) = ctx.dist.as_ref() else {
        return Vec::new();
    };
    ctx.pset
        .member_ids()
        .filter(|&id| ctx.f.grid().is_interior(id, 1) && dist.get(id) >= margin)
        .collect()
}

/// Growth: `sup_{B_r(x0)} u` scales like `r^alpha` for boundary points `x0`.
/// Fits the pooled (radius, sup) samples and records the constant at the
/// largest radius, which later checkers reuse as the amplitude scale.
pub(crate) fn check_growth(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "growth";
    if ctx.fb.is_empty() {
        return CheckBuilder::fail(NAME, EMPTY_FB);
    }
    if ctx.radii.len() < ctx.cfg.min_radii {
        return CheckBuilder::fail(
            NAME,
            format!(
                "only {} dyadic radii fit between {} cells and the clearance, need {}",
                ctx.radii.len(),
                ctx.cfg.radii_min_cells,
                ctx.cfg.min_radii
            ),
        );
    }
    let alpha = ctx.prm.alpha();
    let mut pairs = Vec::new();
    let mut tops = Vec::new();
    for s in &ctx.samples {
        let mut top = None;
        for &r in &ctx.radii {
            if r > s.clearance + 1e-12 {
                break;
            }
            let Ok(m) = ball_sup(ctx.f, &Ball::new(s.center, r)) else { continue };
            if m > 0.0 {
                pairs.push((r, m));
                top = Some(m / powq(r, alpha));
            }
        }
        tops.extend(top);
    }
    if pairs.len() < ctx.cfg.min_fit_samples {
        return CheckBuilder::fail(
            NAME,
            format!("{} pooled growth samples, need {}", pairs.len(), ctx.cfg.min_fit_samples),
        );
    }
    let fit = match log_log_fit(&pairs) {
        Ok(fit) => fit,
        Err(e) => return CheckBuilder::fail(NAME, e.to_string()),
    };
    let c_growth = tops.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut b = CheckBuilder::new(NAME);
    b.exponent("ball-sup growth exponent", fit.slope, fit.stderr)
        .constant(GROWTH_CONSTANT, c_growth)
        .samples(pairs.len())
        .scales(&ctx.radii)
        .criterion(Criterion::between(
            "growth exponent centered on alpha",
            fit.slope,
            alpha - ctx.cfg.slope_tol,
            alpha + ctx.cfg.slope_tol,
        ))
        .criterion(Criterion::at_least("growth constant positive", c_growth, f64::MIN_POSITIVE));
    b.finish()
}

/// Oscillation control: on balls compactly inside the positivity set
/// (radius = half the distance to the boundary), sup/inf stays bounded.
/// The bound itself is measured, not asserted; boundedness plus stability
/// under refinement is the claim checked across resolutions.
pub(crate) fn check_harnack(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "harnack";
    let mut b = CheckBuilder::new(NAME);
    if ctx.pset.is_empty() {
        b.note("no positive-phase nodes; nothing to probe");
        return b.finish();
    }
    let grid = ctx.f.grid();
    let h = grid.h();
    let margin = ctx.cfg.deep_margin_cells * h;
    let candidates: Vec<usize> = if ctx.dist.is_some() {
        deep_members(ctx, margin)
    } else {
        b.note("single-phase field: probing at domain scale instead of boundary distance");
        ctx.pset.member_ids().filter(|&id| grid.is_interior(id, 1)).collect()
    };
    // Admissibility first, subsampling second: the probe budget must not be
    // wasted on nodes whose ball cannot fit.
    let admissible: Vec<(usize, f64)> = candidates
        .into_iter()
        .filter_map(|id| {
            let pos = grid.node_pos(id);
            let r = match ctx.dist.as_ref() {
                Some(d) => d.get(id) / 2.0,
                None => domain_clearance(grid, pos) / 2.0,
            };
            (r >= 2.0 * h && r <= domain_clearance(grid, pos) + 1e-12).then_some((id, r))
        })
        .collect();
    if admissible.is_empty() {
        b.note("no probe ball fits the domain at this resolution");
        return b.finish();
    }
    let mut ratios = Vec::new();
    for (id, r) in subsample(&admissible, ctx.cfg.max_point_probes) {
        let ball = Ball::new(grid.node_pos(id), r);
        let (Ok(sup), Ok(inf)) = (ball_sup(ctx.f, &ball), ball_inf(ctx.f, &ball)) else {
            continue;
        };
        ratios.push(if inf > 0.0 { sup / inf } else { f64::INFINITY });
    }
    if ratios.is_empty() {
        b.note("no probe ball fits the domain at this resolution");
        return b.finish();
    }
    let sup_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    b.constant(OSCILLATION_SUP, sup_ratio)
        .constant("smallest sup/inf oscillation ratio", min_ratio)
        .samples(ratios.len())
        .criterion(Criterion::finite("oscillation ratio bounded", sup_ratio))
        .criterion(Criterion::at_least("oscillation ratio sanity", min_ratio, 1.0 - 1e-12));
    b.finish()
}

/// Intrinsic growth ratio: at a point with value `u(x)`, the sup over the
/// ball whose radius is the intrinsic scale `u(x)^(1/alpha)` exceeds `u(x)`
/// by a bounded factor. Probes sit twice as deep as the usual margin because
/// the ratio is sensitive to cell-level bias in both `u(x)` and the sup.
pub(crate) fn check_intrinsic_harnack(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "intrinsic-harnack";
    let mut b = CheckBuilder::new(NAME);
    if ctx.pset.is_empty() {
        b.note("no positive-phase nodes; nothing to probe");
        return b.finish();
    }
    let grid = ctx.f.grid();
    let h = grid.h();
    let alpha = ctx.prm.alpha();
    let candidates = deep_members(ctx, 2.0 * ctx.cfg.deep_margin_cells * h);
    // Admissibility first, subsampling second (see check_harnack).
    let admissible: Vec<(usize, f64)> = candidates
        .into_iter()
        .filter_map(|id| {
            let r = powq(ctx.f.get(id), 1.0 / alpha);
            (r >= 2.0 * h && r <= domain_clearance(grid, grid.node_pos(id)) + 1e-12)
                .then_some((id, r))
        })
        .collect();
    if admissible.is_empty() {
        b.note("no intrinsic ball fits the domain at this resolution");
        return b.finish();
    }
    let mut ratios = Vec::new();
    for (id, r) in subsample(&admissible, ctx.cfg.max_point_probes) {
        let Ok(sup) = ball_sup(ctx.f, &Ball::new(grid.node_pos(id), r)) else { continue };
        ratios.push(sup / ctx.f.get(id));
    }
    if ratios.is_empty() {
        b.note("no intrinsic ball fits the domain at this resolution");
        return b.finish();
    }
    let sup_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    b.constant(INTRINSIC_SUP, sup_ratio)
        .constant("smallest intrinsic growth ratio", min_ratio)
        .samples(ratios.len())
        .criterion(Criterion::finite("intrinsic ratio bounded", sup_ratio))
        .criterion(Criterion::at_least("intrinsic ratio sanity", min_ratio, 1.0 - 1e-12));
    b.finish()
}

/// Gradient decay: `|Du|^p <= C u^gamma` across the positivity set. Records
/// the sup and min of the pointwise quotient and the sup normalized by
/// `(sup u)^(p - gamma)`, which is the constant the width threshold is built
/// from.
pub(crate) fn check_gradient_decay(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "gradient-decay";
    let mut b = CheckBuilder::new(NAME);
    if ctx.pset.is_empty() {
        b.note("no positive-phase nodes; the bound is vacuous");
        return b.finish();
    }
    let grid = ctx.f.grid();
    let h = grid.h();
    let prm = ctx.prm;
    let probes: Vec<usize> = if ctx.dist.is_some() {
        deep_members(ctx, ctx.cfg.gradient_margin_cells * h)
    } else {
        b.note("single-phase field: probing every interior node");
        ctx.pset.member_ids().filter(|&id| grid.is_interior(id, 1)).collect()
    };
    if probes.is_empty() {
        b.note("no node clears the gradient margin; the bound is vacuous here");
        return b.finish();
    }
    let mut sup_q = f64::NEG_INFINITY;
    let mut min_q = f64::INFINITY;
    for &id in &probes {
        let q = grad_pow(norm_sq(gradient(ctx.f, id)), prm.p) / powq(ctx.f.get(id), prm.gamma);
        sup_q = sup_q.max(q);
        min_q = min_q.min(q);
    }
    let c_grad = sup_q / powq(ctx.f.sup(), prm.p - prm.gamma);
    b.constant(GRADIENT_SUP, sup_q)
        .constant("min of |Du|^p / u^gamma", min_q)
        .constant(GRADIENT_CONSTANT, c_grad)
        .samples(probes.len())
        .criterion(Criterion::finite("gradient quotient bounded", sup_q))
        .criterion(Criterion::at_least("gradient quotient nonnegative", min_q, 0.0));
    b.finish()
}

/// Non-degeneracy, sphere route: the sup of `u` on spheres around boundary
/// points grows at least like `r^alpha` — the per-radius floor of
/// `sphere-sup / r^alpha` is positive and stable across radii.
pub(crate) fn check_nondegeneracy(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "nondegeneracy";
    if ctx.fb.is_empty() {
        return CheckBuilder::fail(NAME, EMPTY_FB);
    }
    if ctx.radii.len() < ctx.cfg.min_radii {
        return CheckBuilder::fail(NAME, "radius ladder too short for a sphere sweep");
    }
    let alpha = ctx.prm.alpha();
    let mut pairs = Vec::new();
    let mut floors: Vec<(f64, f64)> = Vec::new(); // (radius, min over samples)
    for &r in &ctx.radii {
        let mut floor = f64::INFINITY;
        let mut any = false;
        for s in &ctx.samples {
            if r > s.clearance + 1e-12 {
                continue;
            }
            let Ok(m) = sphere_sup(ctx.f, &Ball::new(s.center, r)) else { continue };
            if m > 0.0 {
                pairs.push((r, m));
            }
            floor = floor.min(m / powq(r, alpha));
            any = true;
        }
        if any {
            floors.push((r, floor));
        }
    }
    if pairs.len() < ctx.cfg.min_fit_samples || floors.is_empty() {
        return CheckBuilder::fail(NAME, "too few sphere samples for the sweep");
    }
    let fit = match log_log_fit(&pairs) {
        Ok(fit) => fit,
        Err(e) => return CheckBuilder::fail(NAME, e.to_string()),
    };
    let overall = floors.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
    let at_top = floors.last().expect("nonempty").1;
    let floor_vals: Vec<f64> = floors.iter().map(|&(_, v)| v).collect();
    let mut b = CheckBuilder::new(NAME);
    b.exponent("sphere-sup growth exponent", fit.slope, fit.stderr)
        .constant(SPHERE_FLOOR, at_top)
        .constant("smallest sphere-sup over r^alpha", overall)
        .samples(pairs.len())
        .scales(&ctx.radii)
        .criterion(Criterion::between(
            "sphere exponent centered on alpha",
            fit.slope,
            alpha - ctx.cfg.slope_tol,
            alpha + ctx.cfg.slope_tol,
        ))
        .criterion(Criterion::at_least("sphere floor positive", overall, f64::MIN_POSITIVE))
        .criterion(Criterion::at_most(
            "per-radius floor spread",
            spread(&floor_vals),
            2.0,
        ));
    b.finish()
}

/// Non-degeneracy, integral route: the ball average of `u` around boundary
/// points also grows like `r^alpha`, and the set where `u` exceeds half its
/// intrinsic scale occupies a definite volume fraction of the ball. This is
/// measured independently of the sphere route (averages and level sets, not
/// shell sups), so the two checks cannot inherit each other's errors.
pub(crate) fn check_integral_nondegeneracy(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "integral-nondegeneracy";
    if ctx.fb.is_empty() {
        return CheckBuilder::fail(NAME, EMPTY_FB);
    }
    if ctx.radii.len() < ctx.cfg.min_radii {
        return CheckBuilder::fail(NAME, "radius ladder too short for an average sweep");
    }
    let grid = ctx.f.grid();
    let alpha = ctx.prm.alpha();
    let half_scale = powq(0.5, alpha);
    let mut pairs = Vec::new();
    let mut floor = f64::INFINITY;
    let mut min_frac = f64::INFINITY;
    for s in &ctx.samples {
        for &r in &ctx.radii {
            if r > s.clearance + 1e-12 {
                break;
            }
            let ball = Ball::new(s.center, r);
            let Ok(avg) = ball_avg(ctx.f, &ball) else { continue };
            if avg > 0.0 {
                pairs.push((r, avg));
            }
            floor = floor.min(avg / powq(r, alpha));
            let Ok(sup) = ball_sup(ctx.f, &ball) else { continue };
            if sup > 0.0 {
                let ids = grid.nodes_in_ball(&ball);
                let above =
                    ids.iter().filter(|&&id| ctx.f.get(id) > half_scale * sup).count();
                min_frac = min_frac.min(above as f64 / ids.len() as f64);
            }
        }
    }
    if pairs.len() < ctx.cfg.min_fit_samples {
        return CheckBuilder::fail(NAME, "too few average samples for the sweep");
    }
    let fit = match log_log_fit(&pairs) {
        Ok(fit) => fit,
        Err(e) => return CheckBuilder::fail(NAME, e.to_string()),
    };
    let mut b = CheckBuilder::new(NAME);
    b.exponent("ball-average growth exponent", fit.slope, fit.stderr)
        .constant("smallest ball-average over r^alpha", floor)
        .constant("smallest volume fraction above half scale", min_frac)
        .samples(pairs.len())
        .scales(&ctx.radii)
        .criterion(Criterion::between(
            "average exponent centered on alpha",
            fit.slope,
            alpha - ctx.cfg.slope_tol,
            alpha + ctx.cfg.slope_tol,
        ))
        .criterion(Criterion::at_least("average floor positive", floor, f64::MIN_POSITIVE))
        .criterion(Criterion::at_least("half-scale volume fraction", min_frac, 0.01));
    b.finish()
}

/// Sharp non-degeneracy: pointwise `u(x) >= c d(x)^alpha` over the deep part
/// of the positivity set. The floor is recorded; positivity is the criterion.
pub(crate) fn check_sharp_nondegeneracy(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "sharp-nondegeneracy";
    if ctx.fb.is_empty() {
        return CheckBuilder::fail(NAME, EMPTY_FB);
    }
    let dist = ctx.dist.as_ref().expect("nonempty boundary has a distance field");
    let grid = ctx.f.grid();
    let margin = ctx.cfg.deep_margin_cells * grid.h();
    let alpha = ctx.prm.alpha();
    let mut c0 = f64::INFINITY;
    let mut deepest = 0.0f64;
    let mut n = 0usize;
    for id in ctx.pset.member_ids() {
        let d = dist.get(id);
        if d < margin {
            continue;
        }
        c0 = c0.min(ctx.f.get(id) / powq(d, alpha));
        deepest = deepest.max(d);
        n += 1;
    }
    if n == 0 {
        return CheckBuilder::fail(
            NAME,
            format!("positivity set has no node deeper than {margin}"),
        );
    }
    let mut b = CheckBuilder::new(NAME);
    b.constant(SHARP_FLOOR, c0)
        .constant("deepest probe distance", deepest)
        .samples(n)
        .criterion(Criterion::at_least("pointwise growth floor positive", c0, f64::MIN_POSITIVE));
    b.finish()
}

/// Positive density of both phases near the boundary, and porosity: around
/// every boundary sample a definite fraction of the ball lies in each phase,
/// the fractions are stable under radius halving, and a clean ball of a
/// definite relative radius avoids the boundary entirely.
pub(crate) fn check_density_porosity(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "density-porosity";
    if ctx.fb.is_empty() {
        return CheckBuilder::fail(NAME, EMPTY_FB);
    }
    if ctx.radii.is_empty() {
        return CheckBuilder::fail(NAME, "no probe radius fits the domain");
    }
    let mut min_margin = f64::INFINITY;
    let mut max_drift = f64::NEG_INFINITY;
    let mut deltas = Vec::new();
    let mut probed = 0usize;
    let mut found = 0usize;
    let mut notes = Vec::new();
    for s in &ctx.samples {
        let Some(&r) = ctx.radii.iter().rev().find(|&&r| r <= s.clearance + 1e-12) else {
            continue;
        };
        probed += 1;
        match (
            density_ratio(&ctx.pset, &ctx.fb, s.center, r),
            density_ratio(&ctx.pset, &ctx.fb, s.center, r / 2.0),
        ) {
            (Ok(full), Ok(half)) => {
                min_margin = min_margin.min(full.min(1.0 - full));
                let (hi, lo) = (full.max(half), full.min(half));
                max_drift = max_drift.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
            }
            (a, b) => {
                notes.push(format!(
                    "density probe failed at ({}, {}): {:?} / {:?}",
                    s.center[0], s.center[1], a.err(), b.err()
                ));
            }
        }
        if let Some(w) = porosity_witness(&ctx.fb, &ctx.pset, s.center, r) {
            found += 1;
            deltas.push(w.delta);
        }
    }
    if probed == 0 {
        return CheckBuilder::fail(NAME, "no sample ball fits inside the domain");
    }
    let min_delta = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let mut b = CheckBuilder::new(NAME);
    for n in notes {
        b.note(n);
    }
    b.constant("smallest two-sided phase fraction", min_margin)
        .constant("smallest clean-ball fraction", min_delta)
        .samples(probed)
        .scales(&ctx.radii)
        .criterion(Criterion::at_least(
            "two-sided phase density",
            min_margin,
            ctx.cfg.density_floor,
        ))
        .criterion(Criterion::at_most("density drift under radius halving", max_drift, 2.0))
        .criterion(Criterion::between(
            "fraction of samples with a clean-ball witness",
            found as f64 / probed as f64,
            1.0,
            1.0,
        ));
    b.finish()
}

/// In the flat regime (field values below the width threshold), the
/// linearized power `u^(1/alpha)` is subharmonic for the p-Laplacian up to
/// stencil error: its smallest interior discrete defect is bounded below by
/// a slack that vanishes like sqrt(h).
pub(crate) fn check_flat_subharmonicity(
    ctx: &Ctx,
    flatness: Option<&FlatnessConstants>,
) -> CheckResult {
    const NAME: &str = "flat-subharmonicity";
    let Some(fc) = flatness else {
        return CheckBuilder::fail(NAME, "flatness constants unavailable");
    };
    if ctx.pset.is_empty() {
        return CheckBuilder::fail(NAME, "positivity set is empty");
    }
    let grid = ctx.f.grid();
    let prm = ctx.prm;
    let alpha = prm.alpha();
    let cap = powq(fc.delta_star, alpha);
    let w = ctx.f.map(|t| powq(t.max(0.0), 1.0 / alpha));
    let mut min_defect = f64::INFINITY;
    let mut n = 0usize;
    for id in ctx.pset.member_ids() {
        if !grid.is_interior(id, 1) || ctx.f.get(id) > cap {
            continue;
        }
        let Ok(v) = p_laplacian(&w, prm.p, id) else { continue };
        min_defect = min_defect.min(v);
        n += 1;
    }
    let mut b = CheckBuilder::new(NAME);
    if n == 0 {
        b.note("width-threshold strip contains no interior node at this resolution");
        return b.finish();
    }
    let slack =
        ctx.cfg.subharmonic_slack * powq(ctx.amp, (prm.p - 1.0) / alpha) * grid.h().sqrt();
    b.constant("smallest interior defect of the linearized field", min_defect)
        .constant("stencil slack applied", slack)
        .samples(n)
        .scales(&[fc.delta_star])
        .criterion(Criterion::at_least(
            "linearized field subharmonic up to stencil error",
            min_defect,
            -slack,
        ));
    b.finish()
}

/// Flat inclusion: the sublevel strip `{u <= delta^alpha}` stays within a
/// distance proportional to `delta` of the boundary. The proportionality
/// ratio must be stable across a dyadic ladder of widths and the maximal
/// distance must scale linearly in the width.
pub(crate) fn check_flat_inclusion(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "flat-inclusion";
    if ctx.fb.is_empty() {
        return CheckBuilder::fail(NAME, EMPTY_FB);
    }
    let dist = ctx.dist.as_ref().expect("nonempty boundary has a distance field");
    let alpha = ctx.prm.alpha();
    let sup = ctx.f.sup();
    if !(sup > 0.0) {
        return CheckBuilder::fail(NAME, "field has no positive values");
    }
    let delta_hi = powq(0.5 * sup, 1.0 / alpha);
    let mut deltas = Vec::new();
    let mut pairs = Vec::new();
    let mut ratios = Vec::new();
    for j in 0..ctx.cfg.delta_halvings {
        let delta = delta_hi * powq(0.5, j as f64);
        let cap = powq(delta, alpha);
        let mut max_d: f64 = 0.0;
        let mut seen = false;
        for id in ctx.pset.member_ids() {
            if ctx.f.get(id) <= cap {
                max_d = max_d.max(dist.get(id));
                seen = true;
            }
        }
        if seen && max_d > 0.0 {
            deltas.push(delta);
            pairs.push((delta, max_d));
            ratios.push(max_d / delta);
        }
    }
    if pairs.len() < 3 {
        return CheckBuilder::fail(
            NAME,
            format!("only {} resolvable strip widths, need 3", pairs.len()),
        );
    }
    let fit = match log_log_fit(&pairs) {
        Ok(fit) => fit,
        Err(e) => return CheckBuilder::fail(NAME, e.to_string()),
    };
    let mut b = CheckBuilder::new(NAME);
    b.exponent("strip-depth width exponent", fit.slope, fit.stderr)
        .constant(
            "largest strip-depth over width ratio",
            ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
        .samples(pairs.len())
        .scales(&deltas)
        .criterion(Criterion::between(
            "strip depth linear in width",
            fit.slope,
            ctx.cfg.strip_slope_lo,
            ctx.cfg.strip_slope_hi,
        ))
        .criterion(Criterion::at_most(
            "inclusion ratio spread",
            spread(&ratios),
            ctx.cfg.inclusion_spread_bound,
        ));
    b.finish()
}

/// Window around the deepest boundary sample plus the per-cell data the
/// strip checkers integrate: (corner average, squared cell gradient).
fn strip_window(ctx: &Ctx) -> Option<(Ball, Vec<(f64, f64)>)> {
    let s = ctx.samples.first()?;
    let r = ctx.radii.iter().rev().find(|&&r| r <= s.clearance + 1e-12)?;
    let ball = Ball::new(s.center, *r);
    let grid = ctx.f.grid();
    let cells = (0..grid.num_cells())
        .filter(|&cell| ball.contains(grid, grid.cell_center(cell)))
        .map(|cell| (cell_avg(ctx.f, cell), cell_gradient_sq(ctx.f, cell)))
        .collect();
    Some((ball, cells))
}

/// Shared sweep for the strip checkers: sums `weight(cell)` over cells with
/// `0 < avg <= delta^alpha` for a dyadic ladder of widths, and reduces to a
/// (slope, ratio-spread) pair of criteria against `delta * r^(n-1)`.
fn strip_sweep(
    ctx: &Ctx,
    name: &'static str,
    quantity_label: &str,
    weight: impl Fn(f64, f64) -> f64,
) -> CheckResult {
    if ctx.fb.is_empty() {
        return CheckBuilder::fail(name, EMPTY_FB);
    }
    let Some((ball, cells)) = strip_window(ctx) else {
        return CheckBuilder::fail(name, "no sample window fits the domain");
    };
    let grid = ctx.f.grid();
    let alpha = ctx.prm.alpha();
    let hvol = powq(grid.h(), grid.dim() as f64);
    let Ok(window_sup) = ball_sup(ctx.f, &ball) else {
        return CheckBuilder::fail(name, "window contains no nodes");
    };
    if !(window_sup > 0.0) {
        return CheckBuilder::fail(name, "window contains no positive values");
    }
    let delta_hi = 0.5 * powq(window_sup, 1.0 / alpha);
    let codim_scale = powq(ball.radius, (grid.dim() - 1) as f64);
    let mut deltas = Vec::new();
    let mut pairs = Vec::new();
    let mut ratios = Vec::new();
    for j in 0..ctx.cfg.delta_halvings {
        let delta = delta_hi * powq(0.5, j as f64);
        let cap = powq(delta, alpha);
        let total: f64 = cells
            .iter()
            .filter(|&&(avg, _)| avg > 0.0 && avg <= cap)
            .map(|&(avg, gsq)| weight(avg, gsq) * hvol)
            .sum();
        if total > 0.0 {
            deltas.push(delta);
            pairs.push((delta, total));
            ratios.push(total / (delta * codim_scale));
        }
    }
    if pairs.len() < 3 {
        return CheckBuilder::fail(
            name,
            format!("only {} resolvable strip widths, need 3", pairs.len()),
        );
    }
    let fit = match log_log_fit(&pairs) {
        Ok(fit) => fit,
        Err(e) => return CheckBuilder::fail(name, e.to_string()),
    };
    let mut b = CheckBuilder::new(name);
    b.exponent("width exponent", fit.slope, fit.stderr)
        .constant(quantity_label, ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .samples(cells.len())
        .scales(&deltas)
        .criterion(Criterion::between(
            "strip quantity linear in width",
            fit.slope,
            ctx.cfg.strip_slope_lo,
            ctx.cfg.strip_slope_hi,
        ))
        .criterion(Criterion::at_most(
            "ratio spread across widths",
            spread(&ratios),
            ctx.cfg.spread_bound,
        ));
    b.finish()
}

/// Strip energy: the degenerate-weighted Dirichlet density `|Du|^p / u^gamma`
/// integrated over the sublevel strip inside a boundary window grows
/// linearly in the strip width and is bounded by `C * delta * r^(n-1)`.
pub(crate) fn check_strip_integral(ctx: &Ctx) -> CheckResult {
    let (p, gamma) = (ctx.prm.p, ctx.prm.gamma);
    strip_sweep(
        ctx,
        "strip-integral",
        "largest weighted strip energy over delta * r^(n-1)",
        move |avg, gsq| grad_pow(gsq, p) / powq(avg, gamma),
    )
}

/// Strip volume: the measure of the sublevel strip `{0 < u <= delta^alpha}`
/// inside a boundary window grows linearly in the width — the positive phase
/// thins out towards the boundary at the codimension-one rate.
pub(crate) fn check_flat_measure(ctx: &Ctx) -> CheckResult {
    strip_sweep(
        ctx,
        "flat-measure",
        "largest strip volume over delta * r^(n-1)",
        |_, _| 1.0,
    )
}

/// Neighborhood volume: the tube of radius `delta` around the boundary
/// inside a window has measure proportional to `delta * r^(n-1)`.
pub(crate) fn check_neighborhood_measure(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "neighborhood-measure";
    if ctx.fb.is_empty() {
        return CheckBuilder::fail(NAME, EMPTY_FB);
    }
    let Some(s) = ctx.samples.first() else {
        return CheckBuilder::fail(NAME, "no boundary sample available");
    };
    let Some(&r) = ctx.radii.iter().rev().find(|&&r| r <= s.clearance + 1e-12) else {
        return CheckBuilder::fail(NAME, "no sample window fits the domain");
    };
    let window = Ball::new(s.center, r);
    let grid = ctx.f.grid();
    let h = grid.h();
    let codim_scale = powq(r, (grid.dim() - 1) as f64);
    let mut deltas = Vec::new();
    let mut pairs = Vec::new();
    let mut ratios = Vec::new();
    let mut delta = 4.0 * h;
    while delta <= r / 2.0 + 1e-12 && deltas.len() < ctx.cfg.delta_halvings {
        match neighborhood_measure(&ctx.fb, delta, &window) {
            Ok(m) if m > 0.0 => {
                deltas.push(delta);
                pairs.push((delta, m));
                ratios.push(m / (delta * codim_scale));
            }
            Ok(_) => {}
            Err(e) => return CheckBuilder::fail(NAME, e.to_string()),
        }
        delta *= 2.0;
    }
    if pairs.len() < 3 {
        return CheckBuilder::fail(
            NAME,
            format!("only {} resolvable tube widths, need 3", pairs.len()),
        );
    }
    let fit = match log_log_fit(&pairs) {
        Ok(fit) => fit,
        Err(e) => return CheckBuilder::fail(NAME, e.to_string()),
    };
    let mut b = CheckBuilder::new(NAME);
    b.exponent("tube-volume width exponent", fit.slope, fit.stderr)
        .constant(
            "largest tube volume over delta * r^(n-1)",
            ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
        .samples(pairs.len())
        .scales(&deltas)
        .criterion(Criterion::between(
            "tube volume linear in width",
            fit.slope,
            ctx.cfg.strip_slope_lo,
            ctx.cfg.strip_slope_hi,
        ))
        .criterion(Criterion::at_most(
            "tube ratio spread across widths",
            spread(&ratios),
            ctx.cfg.spread_bound,
        ));
    b.finish()
}

/// Box-counting dimension and covering content of the boundary inside the
/// deepest sample window: the dimension sits near n - 1 and the covering
/// content stays bounded across scales.
pub(crate) fn check_hausdorff(ctx: &Ctx) -> CheckResult {
    const NAME: &str = "hausdorff";
    if ctx.fb.is_empty() {
        return CheckBuilder::fail(NAME, EMPTY_FB);
    }
    let Some(s) = ctx.samples.first() else {
        return CheckBuilder::fail(NAME, "no boundary sample available");
    };
    let Some(&r) = ctx.radii.iter().rev().find(|&&r| r <= s.clearance + 1e-12) else {
        return CheckBuilder::fail(NAME, "no sample window fits the domain");
    };
    let grid = ctx.f.grid();
    let window = Ball::new(s.center, r);
    let mut sigmas = Vec::new();
    let mut sigma = r / 4.0;
    while sigma >= 4.0 * grid.h() - 1e-12 && sigmas.len() < 5 {
        sigmas.push(sigma);
        sigma /= 2.0;
    }
    if sigmas.len() < 3 {
        return CheckBuilder::fail(
            NAME,
            format!("only {} box scales between 4h and r/4, need 3", sigmas.len()),
        );
    }
    let est = match hausdorff_estimate(&ctx.fb, &window, &sigmas) {
        Ok(est) => est,
        Err(e) => return CheckBuilder::fail(NAME, e.to_string()),
    };
    let expected = (grid.dim() - 1) as f64;
    let contents: Vec<f64> = est.rows.iter().map(|row| row.content).collect();
    let lattice_sensitivity = est
        .rows
        .iter()
        .map(|row| {
            let base = row.count.max(1) as f64;
            row.shifted_counts
                .iter()
                .map(|&c| (c as f64 - base).abs() / base)
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let mut b = CheckBuilder::new(NAME);
    b.exponent("box-counting dimension", est.dimension, est.dimension_stderr)
        .constant("covering content bound", est.content_bound)
        .constant("largest relative lattice sensitivity", lattice_sensitivity)
        .samples(est.rows.iter().map(|row| row.count).sum())
        .scales(&sigmas)
        .criterion(Criterion::between(
            "box dimension centered on n-1",
            est.dimension,
            expected - ctx.cfg.box_dim_tol,
            expected + ctx.cfg.box_dim_tol,
        ))
        .criterion(Criterion::at_most(
            "covering content spread across scales",
            spread(&contents),
            ctx.cfg.spread_bound,
        ));
    b.finish()
}
