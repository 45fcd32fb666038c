//! Minimization of the discrete energy: smoothed continuation stages followed
//! by exact coordinate descent.
//!
//! The objective is non-smooth at the contact set (the potential behaves like
//! `v^gamma` with `gamma < 1`), so the solver first minimizes the smoothed
//! energy for a decreasing schedule of smoothing widths, warm-starting each
//! stage from the previous one. Each stage runs projected gradient descent
//! over the box `[0, sup g]` with Barzilai-Borwein steps safeguarded by an
//! Armijo backtracking line search along the projected direction. The box is
//! exact: truncating at zero and at the boundary supremum never increases the
//! energy, so the constraint loses nothing.
//!
//! The stages track the contact structure but converge only linearly and the
//! rate degrades like the square of the resolution, so a second phase
//! finishes the job on the exact (unsmoothed) objective: Gauss-Seidel sweeps
//! of safeguarded Newton coordinate moves with over-relaxation, falling back
//! to derivative-free coordinate solves near the contact set, plus joint
//! moves on adjacent node pairs. Pair moves matter because shifting the
//! contact boundary by one cell passes an energy barrier that no single
//! coordinate move can cross. This phase places exact zeros and drives the
//! stationarity measure of the exact objective below `grad_tol`.
//!
//! On grids whose axes have `2^k + 1` nodes the solver first solves a
//! coarsened problem and interpolates the result upward (nested iteration),
//! which removes almost all of the fine-grid iteration count. The base
//! initial guess is the transfinite interpolant of the boundary data relaxed
//! by a few sweeps of p-harmonic replacement.

use crate::boundary::{linear_interpolant, BoundaryData};
use crate::energy::{
    cell_energy, energy, face_energy_x, face_energy_y, local_dirichlet, local_total,
    smoothed_energy, smoothed_gradient, EnergyBreakdown, Region, Smoothing,
};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::ops::{p_laplacian, powq};
use crate::params::Params;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("boundary data must be nonnegative, found minimum {min}")]
    InvalidBoundaryData { min: f64 },
    #[error("no node exceeds the positivity threshold {threshold}")]
    EmptyPositivitySet { threshold: f64 },
}

/// Knobs for [`minimize`]. The defaults are what every consumer in this
/// workspace uses; they favor robustness over speed.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Smoothing widths, strictly decreasing; the last one defines the final
    /// objective.
    pub smoothing: Smoothing,
    /// Hard cap on projected-gradient iterations per stage. Stages only
    /// track the minimizer through the smoothing schedule; the exact-descent
    /// finish does the converging, so this stays small.
    pub max_iters_per_stage: usize,
    /// Stationarity target for the finished solve: sup-norm of the
    /// box-constrained gradient violation of the exact objective, measured
    /// per unit volume.
    pub grad_tol: f64,
    /// Stationarity target for the continuation stages; polishing an
    /// objective that the next stage will change (and the finish will
    /// replace) is wasted work.
    pub stage_grad_tol: f64,
    /// Relative energy decrease below which an iteration counts as stalled.
    /// The default is at the resolution limit of f64, so stalling means the
    /// line search genuinely cannot descend further.
    pub energy_tol: f64,
    /// Consecutive stalled iterations that end a stage.
    pub patience: usize,
    /// Gauss-Seidel sweeps of p-harmonic replacement applied to the initial
    /// interpolant (only at the coarsest level when cascading).
    pub init_sweeps: usize,
    /// Solve coarsened problems first and interpolate upward when the grid
    /// allows it.
    pub cascade: bool,
    /// Cap on the exact-descent sweeps that finish the solve on the
    /// unsmoothed objective. Projected gradient alone reaches exact zeros
    /// only asymptotically and stalls at fine resolution; over-relaxed
    /// coordinate solves finish the job at a resolution-proportional rate.
    pub finish_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            smoothing: Smoothing::default(),
            max_iters_per_stage: 600,
            grad_tol: 1e-6,
            stage_grad_tol: 1e-3,
            energy_tol: 1e-15,
            patience: 12,
            init_sweeps: 30,
            cascade: true,
            finish_sweeps: 6000,
        }
    }
}

/// Convergence record of one continuation stage.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StageStats {
    pub eps: f64,
    pub iterations: usize,
    pub energy_start: f64,
    pub energy_end: f64,
    pub kkt: f64,
}

/// Minimizer plus diagnostics. `converged` reports whether the finishing
/// phase drove the stationarity measure of the exact objective below
/// `grad_tol`; a `false` value is a usable result with a warning, not an
/// error.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub field: ScalarField,
    pub stages: Vec<StageStats>,
    /// Exact-descent sweeps spent after the continuation stages.
    pub finish_sweeps: usize,
    pub converged: bool,
    /// Stationarity violation of the exact objective, per unit volume.
    pub kkt: f64,
    pub energy: EnergyBreakdown,
}

/// Minimizes the discrete energy over fields with the given boundary data.
pub fn minimize(
    prm: &Params,
    bnd: &BoundaryData,
    opts: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    if !bnd.is_nonnegative() {
        return Err(SolverError::InvalidBoundaryData { min: bnd.min() });
    }
    let grid = *bnd.grid();
    let ub = bnd.sup().max(0.0);
    let mut f = build_init(prm, bnd, opts)?;
    let interior: Vec<usize> =
        (0..grid.num_nodes()).filter(|&id| grid.is_interior(id, 1)).collect();

    let schedule = opts.smoothing.stages().to_vec();
    let mut stages = Vec::with_capacity(schedule.len());
    for &eps in &schedule {
        stages.push(run_stage(&mut f, prm, eps, ub, opts.stage_grad_tol, opts, &interior));
    }
    let (mut finish_sweeps, mut kkt) =
        exact_descent_finish(&mut f, prm, ub, opts, &interior, opts.finish_sweeps);
    // Retraction trials. Smoothing penalizes positivity less than the exact
    // potential does, so continuation lands with an inflated positivity set;
    // when the inflation reaches a full cell, no coordinate or pair move can
    // retract the contact boundary (an energy barrier of coordinated moves
    // separates the two stationary points). Globally shifted-down restarts
    // give descent a chance to land in the retracted basin; the better field
    // wins by exact energy comparison.
    if let Some(scale) = retraction_scale(&f, &interior) {
        let mut e_best = energy(&f, prm, Region::Whole).total;
        for c in [1.0, 2.0] {
            let mut trial = f.map(|v| (v - c * scale).max(0.0));
            bnd.apply(&mut trial);
            let trial_budget = (opts.finish_sweeps / 4).max(60);
            let (sw, _) = exact_descent_finish(&mut trial, prm, ub, opts, &interior, trial_budget);
            finish_sweeps += sw;
            let e_trial = energy(&trial, prm, Region::Whole).total;
            if e_trial < e_best - 1e-14 * (1.0 + e_best.abs()) {
                f = trial;
                e_best = e_trial;
                let (sw2, k2) =
                    exact_descent_finish(&mut f, prm, ub, opts, &interior, opts.finish_sweeps);
                finish_sweeps += sw2;
                kkt = k2;
            }
        }
    }
    Ok(SolveResult {
        converged: kkt <= opts.grad_tol,
        kkt,
        energy: energy(&f, prm, Region::Whole),
        stages,
        finish_sweeps,
        field: f,
    })
}

/// Finishes the solve on the exact (unsmoothed) objective. Alternates two
/// phases: contact placement (activation scans on pinned nodes bordering the
/// positivity set, plus pair moves) and frozen-contact relaxation
/// (over-relaxed Newton sweeps on the positive nodes only). The phases must
/// not interleave per sweep: over-relaxation close to the optimal factor
/// converges through slowly decaying residual waves, and contact moves
/// re-excite them faster than they decay.
fn exact_descent_finish(
    f: &mut ScalarField,
    prm: &Params,
    ub: f64,
    opts: &SolverOptions,
    interior: &[usize],
    budget: usize,
) -> (usize, f64) {
    let grid = *f.grid();
    let hn = powq(grid.h(), grid.dim() as f64);
    let n_max = grid.nodes_along(0).max(grid.nodes_along(1));
    // Optimal over-relaxation factor for the model second-difference
    // operator; the per-move energy safeguard makes overshoot harmless where
    // the model is wrong.
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / n_max as f64).sin());
    let mut g = smoothed_gradient(f, prm, 0.0);
    let mut kkt = kkt_exact(f, &g, ub, hn, interior);
    let mut sweeps = 0usize;
    for _round in 0..8 {
        if sweeps >= budget || kkt <= opts.grad_tol {
            break;
        }
        let placed =
            activation_sweep(f, prm, ub, interior).max(pair_sweep(f, prm, ub, interior));
        sweeps += 1;
        while sweeps < budget {
            let moved = newton_sor_sweep(f, prm, ub, omega, interior);
            sweeps += 1;
            g = smoothed_gradient(f, prm, 0.0);
            kkt = kkt_exact(f, &g, ub, hn, interior);
            if kkt <= opts.grad_tol || moved == 0.0 {
                break;
            }
        }
        if kkt > opts.grad_tol && placed == 0.0 {
            break; // relaxation stalled and placement has nothing left
        }
        if kkt <= opts.grad_tol {
            // the smooth region converged; accept only if placement agrees
            if activation_sweep(f, prm, ub, interior) == 0.0
                && pair_sweep(f, prm, ub, interior) == 0.0
            {
                break;
            }
            sweeps += 1;
            g = smoothed_gradient(f, prm, 0.0);
            kkt = kkt_exact(f, &g, ub, hn, interior);
        }
    }
    (sweeps, kkt)
}

/// Smallest positive value on nodes bordering the contact set: the one-cell
/// amplitude scale of the free boundary, which is the natural step for
/// retraction trials. `None` when the positivity set has no free boundary
/// (then there is nothing to retract).
fn retraction_scale(f: &ScalarField, interior: &[usize]) -> Option<f64> {
    let mut s = f64::INFINITY;
    for &id in interior {
        let v = f.get(id);
        if v > 0.0 && neighbor_hull(f, id).0 <= 0.0 {
            s = s.min(v);
        }
    }
    s.is_finite().then_some(s)
}

/// Global coordinate scans on pinned nodes that border the positivity set.
/// Their local energy has one-sided slope +infinity at zero yet can dip at
/// finite distance, so only a scan (not a derivative) decides activation.
/// Nodes pinned deep inside the dead core are provably stationary and are
/// skipped.
fn activation_sweep(f: &mut ScalarField, prm: &Params, ub: f64, interior: &[usize]) -> f64 {
    let mut moved = 0.0f64;
    for &id in interior {
        if f.get(id) == 0.0 && neighbor_hull(f, id).1 > 0.0 {
            moved = moved.max(descend_local(f, prm, 0.0, ub, id));
        }
    }
    moved
}

/// One lexicographic Gauss-Seidel sweep of safeguarded Newton coordinate
/// moves on the exact objective, over-relaxed by `omega`, skipping pinned
/// nodes (contact placement is a separate phase). Derivatives come from
/// central differences of the local energy; moves that fail to decrease it,
/// and nodes too close to the kink at zero for differences to make sense,
/// fall back to an exact derivative-free coordinate solve. Returns the
/// largest move.
fn newton_sor_sweep(
    f: &mut ScalarField,
    prm: &Params,
    ub: f64,
    omega: f64,
    interior: &[usize],
) -> f64 {
    if ub <= 0.0 {
        return 0.0;
    }
    // Small enough that the O(delta^2) difference bias stays far below
    // grad_tol even where the potential's third derivative blows up (near
    // the contact set), large enough that rounding noise in the local
    // energies stays far below it too.
    let delta = 1e-8 * (1.0 + ub);
    let mut moved = 0.0f64;
    for &id in interior {
        let t = f.get(id);
        if t == 0.0 {
            continue;
        }
        let l_cur = local_total(f, prm, 0.0, id);
        let mut accepted = false;
        if t > delta {
            f.set(id, t + delta);
            let lp = local_total(f, prm, 0.0, id);
            f.set(id, t - delta);
            let lm = local_total(f, prm, 0.0, id);
            let grad = (lp - lm) / (2.0 * delta);
            let hess = (lp - 2.0 * l_cur + lm) / (delta * delta);
            if hess > 0.0 {
                let t_new = (t - omega * grad / hess).clamp(0.0, ub);
                let dt = (t_new - t).abs();
                if dt <= delta {
                    // The energy decrease of a step this small lies under
                    // the rounding floor of the local energy, so a
                    // comparison cannot certify it; the convex Newton model
                    // alone decides. Without this, nodes freeze at the floor
                    // and the stationarity measure plateaus far above
                    // grad_tol.
                    f.set(id, t_new);
                    moved = moved.max(dt);
                    accepted = true;
                } else {
                    f.set(id, t_new);
                    if local_total(f, prm, 0.0, id) <= l_cur {
                        moved = moved.max(dt);
                        accepted = true;
                    }
                }
            }
        }
        if !accepted {
            f.set(id, t);
            moved = moved.max(descend_local(f, prm, 0.0, ub, id));
        }
    }
    moved
}

/// Joint moves on adjacent node pairs that straddle or border the contact
/// set; these are the moves that shift the contact boundary by one cell,
/// which no single coordinate move can do (the intermediate states pass an
/// energy barrier).
fn pair_sweep(f: &mut ScalarField, prm: &Params, ub: f64, interior: &[usize]) -> f64 {
    let grid = *f.grid();
    let (nx, ny) = (grid.nodes_along(0), grid.nodes_along(1));
    let mut moved = 0.0f64;
    for &id in interior {
        let (a, b) = grid.node_multi(id);
        let mut partners = [None, None];
        if a + 1 < nx {
            partners[0] = Some(grid.node_id(a + 1, b));
        }
        if grid.dim() == 2 && b + 1 < ny {
            partners[1] = Some(grid.node_id(a, b + 1));
        }
        for partner in partners.into_iter().flatten() {
            if !grid.is_interior(partner, 1) {
                continue;
            }
            let (va, vb) = (f.get(id), f.get(partner));
            let near_contact = if (va == 0.0) != (vb == 0.0) {
                true
            } else if va > 0.0 {
                neighbor_hull(f, id).0 == 0.0 || neighbor_hull(f, partner).0 == 0.0
            } else {
                false
            };
            if near_contact {
                moved = moved.max(descend_pair(f, prm, 0.0, ub, id, partner));
            }
        }
    }
    moved
}

/// Joint descent on an adjacent pair of nodes: a coarse grid scan of the
/// union of their local energies followed by alternating golden-section
/// refinement and exact-zero snaps.
fn descend_pair(
    f: &mut ScalarField,
    prm: &Params,
    eps: f64,
    ub: f64,
    id_a: usize,
    id_b: usize,
) -> f64 {
    let grid = *f.grid();
    let mut contribs = Vec::with_capacity(28);
    node_contribs(&grid, id_a, &mut contribs);
    node_contribs(&grid, id_b, &mut contribs);
    contribs.sort_unstable();
    contribs.dedup();

    let (va, vb) = (f.get(id_a), f.get(id_b));
    let l_cur = contribs_energy(f, prm, eps, &contribs);
    let (_, nha) = neighbor_hull(f, id_a);
    let (_, nhb) = neighbor_hull(f, id_b);
    let hi_a = (nha.max(va) * 1.25 + 1e-12).min(ub);
    let hi_b = (nhb.max(vb) * 1.25 + 1e-12).min(ub);
    if hi_a <= 0.0 || hi_b <= 0.0 {
        f.set(id_a, va);
        f.set(id_b, vb);
        return 0.0;
    }

    const SAMPLES: usize = 7;
    let (mut ta, mut tb, mut l_best) = (va, vb, l_cur);
    for i in 0..SAMPLES {
        let sa = hi_a * i as f64 / (SAMPLES - 1) as f64;
        f.set(id_a, sa);
        for j in 0..SAMPLES {
            let sb = hi_b * j as f64 / (SAMPLES - 1) as f64;
            f.set(id_b, sb);
            let l = contribs_energy(f, prm, eps, &contribs);
            if l < l_best {
                (ta, tb, l_best) = (sa, sb, l);
            }
        }
    }
    for _ in 0..3 {
        f.set(id_a, ta);
        f.set(id_b, tb);
        let (t, l) = golden_coordinate(f, prm, eps, id_a, hi_a, &contribs);
        if l < l_best {
            (ta, l_best) = (t, l);
        }
        f.set(id_a, ta);
        f.set(id_b, tb);
        let (t, l) = golden_coordinate(f, prm, eps, id_b, hi_b, &contribs);
        if l < l_best {
            (tb, l_best) = (t, l);
        }
    }
    // golden section converges toward interior minima; contact solutions
    // want exact zeros
    for (sa, sb) in [(0.0, tb), (ta, 0.0), (0.0, 0.0)] {
        f.set(id_a, sa);
        f.set(id_b, sb);
        let l = contribs_energy(f, prm, eps, &contribs);
        if l < l_best {
            (ta, tb, l_best) = (sa, sb, l);
        }
    }
    if l_best < l_cur - 1e-15 * (1.0 + l_cur.abs()) {
        f.set(id_a, ta);
        f.set(id_b, tb);
        (ta - va).abs().max((tb - vb).abs())
    } else {
        f.set(id_a, va);
        f.set(id_b, vb);
        0.0
    }
}

/// Golden-section minimization of the union energy over one node's value in
/// `[0, hi]`, the other nodes held fixed.
fn golden_coordinate(
    f: &mut ScalarField,
    prm: &Params,
    eps: f64,
    id: usize,
    hi: f64,
    contribs: &[(u8, usize, usize)],
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (0.0, hi);
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    f.set(id, a);
    let mut la = contribs_energy(f, prm, eps, contribs);
    f.set(id, b);
    let mut lb = contribs_energy(f, prm, eps, contribs);
    for _ in 0..32 {
        if la <= lb {
            hi = b;
            b = a;
            lb = la;
            a = hi - INV_PHI * (hi - lo);
            f.set(id, a);
            la = contribs_energy(f, prm, eps, contribs);
        } else {
            lo = a;
            a = b;
            la = lb;
            b = lo + INV_PHI * (hi - lo);
            f.set(id, b);
            lb = contribs_energy(f, prm, eps, contribs);
        }
    }
    if la <= lb {
        (a, la)
    } else {
        (b, lb)
    }
}

/// Faces and cells whose contribution depends on the given node, as tagged
/// indices: 0 = x-family face, 1 = y-family face, 2 = cell. A superset (the
/// same one the local energies use) is harmless for union energies: extras
/// cancel in differences.
fn node_contribs(grid: &Grid, id: usize, out: &mut Vec<(u8, usize, usize)>) {
    let (a, b) = grid.node_multi(id);
    let (nx, ny) = (grid.nodes_along(0), grid.nodes_along(1));
    if grid.dim() == 1 {
        for i in [a.wrapping_sub(1), a] {
            if i < nx - 1 {
                out.push((0, i, 0));
                out.push((2, i, 0));
            }
        }
        return;
    }
    for i in [a.wrapping_sub(1), a] {
        if i >= nx - 1 {
            continue;
        }
        for j in [b.wrapping_sub(1), b, b + 1] {
            if j < ny {
                out.push((0, i, j));
            }
        }
    }
    for j in [b.wrapping_sub(1), b] {
        if j >= ny - 1 {
            continue;
        }
        for i in [a.wrapping_sub(1), a, a + 1] {
            if i < nx {
                out.push((1, i, j));
            }
        }
    }
    for i in [a.wrapping_sub(1), a] {
        if i >= nx - 1 {
            continue;
        }
        for j in [b.wrapping_sub(1), b] {
            if j < ny - 1 {
                out.push((2, i, j));
            }
        }
    }
}

fn contribs_energy(
    f: &ScalarField,
    prm: &Params,
    eps: f64,
    contribs: &[(u8, usize, usize)],
) -> f64 {
    let g = f.grid();
    let mut acc = 0.0;
    for &(kind, i, j) in contribs {
        acc += match kind {
            0 => face_energy_x(f, i, j, prm.p),
            1 => face_energy_y(f, i, j, prm.p),
            _ => cell_energy(f, prm, eps, g.cell_id(i, j)),
        };
    }
    acc
}

/// One safeguarded coordinate solve of the local smoothed energy over
/// `[0, min(ub, neighborhood max with headroom)]`: coarse scan, then
/// golden-section refinement. Accepts only meaningful decreases. Returns the
/// size of the move.
fn descend_local(f: &mut ScalarField, prm: &Params, eps: f64, ub: f64, id: usize) -> f64 {
    let v = f.get(id);
    let l_cur = local_total(f, prm, eps, id);
    let (_, nhi) = neighbor_hull(f, id);
    let hi = (nhi.max(v) * 1.25 + 1e-12).min(ub);
    if hi <= 0.0 {
        return 0.0;
    }
    let eval = |f: &mut ScalarField, t: f64| {
        f.set(id, t);
        local_total(f, prm, eps, id)
    };
    const SAMPLES: usize = 9;
    let mut best_t = v;
    let mut best_l = l_cur;
    let mut best_i = None;
    for i in 0..SAMPLES {
        let t = hi * i as f64 / (SAMPLES - 1) as f64;
        let l = eval(f, t);
        if l < best_l {
            best_l = l;
            best_t = t;
            best_i = Some(i);
        }
    }
    let step = hi / (SAMPLES - 1) as f64;
    let (mut lo, mut hi) = match best_i {
        Some(i) => {
            let c = hi * i as f64 / (SAMPLES - 1) as f64;
            ((c - step).max(0.0), (c + step).min(hi))
        }
        None => ((v - step).max(0.0), (v + step).min(hi)),
    };
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut la = eval(f, a);
    let mut lb = eval(f, b);
    for _ in 0..44 {
        if la <= lb {
            hi = b;
            b = a;
            lb = la;
            a = hi - INV_PHI * (hi - lo);
            la = eval(f, a);
        } else {
            lo = a;
            a = b;
            la = lb;
            b = lo + INV_PHI * (hi - lo);
            lb = eval(f, b);
        }
    }
    let (t_ref, l_ref) = if la <= lb { (a, la) } else { (b, lb) };
    if l_ref < best_l {
        best_l = l_ref;
        best_t = t_ref;
    }
    if best_l < l_cur - 1e-15 * (1.0 + l_cur.abs()) {
        f.set(id, best_t);
        (best_t - v).abs()
    } else {
        f.set(id, v);
        0.0
    }
}

/// Stationarity violation of a single node, per unit volume.
#[inline]
fn node_violation(f: &ScalarField, g: &ScalarField, ub: f64, hn: f64, id: usize) -> f64 {
    let gk = g.get(id) / hn;
    let v = f.get(id);
    if v <= 0.0 {
        (-gk).max(0.0)
    } else if v >= ub {
        gk.max(0.0)
    } else {
        gk.abs()
    }
}

fn build_init(
    prm: &Params,
    bnd: &BoundaryData,
    opts: &SolverOptions,
) -> Result<ScalarField, SolverError> {
    let grid = *bnd.grid();
    let ub = bnd.sup().max(0.0);
    if opts.cascade {
        if let Some(coarse) = coarsened(&grid) {
            let sub = minimize(prm, &restrict_boundary(bnd, &coarse), opts)?;
            let mut f = ScalarField::from_fn(grid, |x| {
                sub.field.interpolate(x).expect("coarse grid covers the fine extent")
            });
            bnd.apply(&mut f);
            return Ok(f.map(|v| v.clamp(0.0, ub)));
        }
    }
    let mut f = linear_interpolant(&grid, bnd).map(|v| v.clamp(0.0, ub));
    bnd.apply(&mut f);
    Ok(p_harmonic_replacement(&f, prm.p, opts.init_sweeps).map(|v| v.clamp(0.0, ub)))
}

/// Halves the resolution when every axis has `2^k + 1` style node counts
/// (odd, and at least 65 so the coarse level stays meaningful).
fn coarsened(grid: &Grid) -> Option<Grid> {
    let ok = |n: usize| n >= 65 && (n - 1).is_multiple_of(2);
    if grid.dim() == 1 {
        let n = grid.nodes_along(0);
        if !ok(n) {
            return None;
        }
        let (a, b) = grid.extent(0);
        return Grid::line(a, b, n.div_ceil(2)).ok();
    }
    let (nx, ny) = (grid.nodes_along(0), grid.nodes_along(1));
    if !ok(nx) || !ok(ny) {
        return None;
    }
    Grid::rect(grid.extent(0), grid.extent(1), nx.div_ceil(2), ny.div_ceil(2)).ok()
}

fn restrict_boundary(bnd: &BoundaryData, coarse: &Grid) -> BoundaryData {
    let fine = *bnd.grid();
    BoundaryData::from_fn(coarse, |x| {
        let i = ((x[0] - fine.extent(0).0) / fine.h()).round() as usize;
        let j = if fine.dim() == 2 {
            ((x[1] - fine.extent(1).0) / fine.h()).round() as usize
        } else {
            0
        };
        bnd.value_at(fine.node_id(i, j))
    })
}

/// One continuation stage: projected gradient with BB1 steps and Armijo
/// backtracking along the projected direction.
fn run_stage(
    f: &mut ScalarField,
    prm: &Params,
    eps: f64,
    ub: f64,
    tol: f64,
    opts: &SolverOptions,
    interior: &[usize],
) -> StageStats {
    let grid = *f.grid();
    let hn = powq(grid.h(), grid.dim() as f64);
    let energy_start = smoothed_energy(f, prm, eps);
    let mut e_cur = energy_start;
    let mut g = smoothed_gradient(f, prm, eps);
    let mut kkt = kkt_residual(f, &g, ub, hn, interior);

    let mut step = grid.h() * grid.h();
    let mut iterations = 0usize;
    let mut stall = 0usize;
    let mut trial = f.clone();
    while iterations < opts.max_iters_per_stage && kkt > tol {
        // projected direction for the current step length
        let mut gdot = 0.0;
        let mut dsup = 0.0f64;
        for &id in interior {
            let d = (f.get(id) - step * g.get(id)).clamp(0.0, ub) - f.get(id);
            gdot += g.get(id) * d;
            dsup = dsup.max(d.abs());
        }
        if dsup == 0.0 {
            break; // every interior node pinned against the box
        }

        let mut t = 1.0;
        let mut accepted = false;
        let mut e_new = e_cur;
        for _ in 0..60 {
            for &id in interior {
                let d = (f.get(id) - step * g.get(id)).clamp(0.0, ub) - f.get(id);
                trial.set(id, f.get(id) + t * d);
            }
            e_new = smoothed_energy(&trial, prm, eps);
            if e_new <= e_cur + 1e-4 * t * gdot {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break; // at the numerical floor of the line search
        }

        // BB1 step from the accepted move
        let g_new = smoothed_gradient(&trial, prm, eps);
        let mut sdots = 0.0;
        let mut sdoty = 0.0;
        for &id in interior {
            let s = trial.get(id) - f.get(id);
            let y = g_new.get(id) - g.get(id);
            sdots += s * s;
            sdoty += s * y;
        }
        step = if sdoty > 0.0 {
            (sdots / sdoty).clamp(1e-14, 1e12)
        } else {
            (step * 2.0).min(1e12)
        };

        std::mem::swap(f, &mut trial);
        g = g_new;
        kkt = kkt_residual(f, &g, ub, hn, interior);
        let decrease = e_cur - e_new;
        e_cur = e_new;
        iterations += 1;
        if decrease <= opts.energy_tol * (1.0 + e_cur.abs()) {
            stall += 1;
            if stall >= opts.patience {
                break;
            }
        } else {
            stall = 0;
        }
    }
    StageStats { eps, iterations, energy_start, energy_end: e_cur, kkt }
}

/// Box-constrained stationarity violation, per unit volume: the gradient
/// must vanish at free nodes, point upward at the lower bound and downward
/// at the upper bound.
fn kkt_residual(f: &ScalarField, g: &ScalarField, ub: f64, hn: f64, interior: &[usize]) -> f64 {
    interior.iter().map(|&id| node_violation(f, g, ub, hn, id)).fold(0.0, f64::max)
}

/// Stationarity violation of the exact (unsmoothed) objective. The potential
/// density grows like the `gamma`-th power of the cell average, so its
/// one-sided slope at a vanishing average is +infinity: a node pinned to
/// zero that touches such a cell admits no descent direction and is
/// stationary regardless of the assembled finite-part gradient.
fn kkt_exact(f: &ScalarField, g: &ScalarField, ub: f64, hn: f64, interior: &[usize]) -> f64 {
    interior
        .iter()
        .map(|&id| {
            if f.get(id) <= 0.0 && touches_vanishing_cell(f, id) {
                0.0
            } else {
                node_violation(f, g, ub, hn, id)
            }
        })
        .fold(0.0, f64::max)
}

/// Whether some cell incident to the node has all corner values zero (node
/// values are nonnegative, so the corner average vanishes exactly there).
fn touches_vanishing_cell(f: &ScalarField, id: usize) -> bool {
    let grid = f.grid();
    let (a, b) = grid.node_multi(id);
    let (nx, ny) = (grid.nodes_along(0), grid.nodes_along(1));
    if grid.dim() == 1 {
        for ci in [a.wrapping_sub(1), a] {
            if ci < nx - 1 && f.at(ci, 0) <= 0.0 && f.at(ci + 1, 0) <= 0.0 {
                return true;
            }
        }
        return false;
    }
    for ci in [a.wrapping_sub(1), a] {
        if ci >= nx - 1 {
            continue;
        }
        for cj in [b.wrapping_sub(1), b] {
            if cj < ny - 1
                && f.at(ci, cj) <= 0.0
                && f.at(ci + 1, cj) <= 0.0
                && f.at(ci, cj + 1) <= 0.0
                && f.at(ci + 1, cj + 1) <= 0.0
            {
                return true;
            }
        }
    }
    false
}

/// Relaxes the interior of `f` toward the p-harmonic field with the same
/// boundary values: cyclic Gauss-Seidel sweeps where each node minimizes the
/// local Dirichlet energy exactly (golden-section on the convex section).
/// The Dirichlet energy never increases.
pub fn p_harmonic_replacement(f: &ScalarField, p: f64, sweeps: usize) -> ScalarField {
    let grid = f.grid();
    let interior: Vec<usize> =
        (0..grid.num_nodes()).filter(|&id| grid.is_interior(id, 1)).collect();
    p_harmonic_replacement_on(f, p, &interior, sweeps)
}

/// [`p_harmonic_replacement`] restricted to a node subset: only the listed
/// nodes are relaxed, every other value acts as fixed boundary data. Nodes
/// on the domain boundary are skipped, so passing a ball's nodes computes
/// the local replacement with the field's own trace on the ball boundary.
pub fn p_harmonic_replacement_on(
    f: &ScalarField,
    p: f64,
    relax: &[usize],
    sweeps: usize,
) -> ScalarField {
    let grid = *f.grid();
    let mut out = f.clone();
    let interior: Vec<usize> =
        relax.iter().copied().filter(|&id| grid.is_interior(id, 1)).collect();
    for _ in 0..sweeps {
        let mut moved = 0.0f64;
        for &id in &interior {
            let (lo, hi) = neighbor_hull(&out, id);
            let pad = 0.1 * (hi - lo) + 1e-12;
            let (mut lo, mut hi) = (lo - pad, hi + pad);
            let cur_t = out.get(id);
            let cur_l = local_dirichlet(&out, p, id);
            const INV_PHI: f64 = 0.618_033_988_749_894_8;
            let mut a = hi - INV_PHI * (hi - lo);
            let mut b = lo + INV_PHI * (hi - lo);
            out.set(id, a);
            let mut la = local_dirichlet(&out, p, id);
            out.set(id, b);
            let mut lb = local_dirichlet(&out, p, id);
            for _ in 0..48 {
                if la <= lb {
                    hi = b;
                    b = a;
                    lb = la;
                    a = hi - INV_PHI * (hi - lo);
                    out.set(id, a);
                    la = local_dirichlet(&out, p, id);
                } else {
                    lo = a;
                    a = b;
                    la = lb;
                    b = lo + INV_PHI * (hi - lo);
                    out.set(id, b);
                    lb = local_dirichlet(&out, p, id);
                }
            }
            let (t, l) = if la <= lb { (a, la) } else { (b, lb) };
            // accept only meaningful decreases so that line-search noise
            // cannot walk a stationary field around
            if l < cur_l - 1e-15 * (1.0 + cur_l.abs()) {
                out.set(id, t);
                moved = moved.max((t - cur_t).abs());
            } else {
                out.set(id, cur_t);
            }
        }
        if moved <= 1e-10 * (1.0 + out.sup().abs()) {
            break;
        }
    }
    out
}

/// Range of the node values in the 3x3 stencil neighborhood (the reach of
/// the local Dirichlet energy).
fn neighbor_hull(f: &ScalarField, id: usize) -> (f64, f64) {
    let grid = f.grid();
    let (a, b) = grid.node_multi(id);
    let (nx, ny) = (grid.nodes_along(0), grid.nodes_along(1));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in [a.wrapping_sub(1), a, a + 1] {
        if i >= nx {
            continue;
        }
        if grid.dim() == 1 {
            if i != a {
                let v = f.at(i, 0);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            continue;
        }
        for j in [b.wrapping_sub(1), b, b + 1] {
            if j >= ny || (i == a && j == b) {
                continue;
            }
            let v = f.at(i, j);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// Pointwise Euler-Lagrange residual statistics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualStats {
    /// Sup-norm of the residual over the sampled nodes.
    pub sup: f64,
    /// Root mean square over the sampled nodes.
    pub rms: f64,
    /// Number of nodes sampled.
    pub nodes: usize,
}

/// Euler-Lagrange residual `div(|Du|^(p-2) Du) - kappa mu gamma u^(gamma-1)`
/// evaluated with the independent finite-difference operator at interior
/// nodes where `u > threshold`. The threshold keeps the evaluation away from
/// the free-boundary kink, where the pointwise equation does not hold on the
/// grid scale.
pub fn el_residual(
    f: &ScalarField,
    prm: &Params,
    threshold: f64,
) -> Result<ResidualStats, SolverError> {
    let grid = f.grid();
    let mut worst = 0.0f64;
    let mut acc = 0.0;
    let mut nodes = 0usize;
    for id in 0..grid.num_nodes() {
        if !grid.is_interior(id, 1) || f.get(id) <= threshold {
            continue;
        }
        let lap = p_laplacian(f, prm.p, id).expect("interior margin checked");
        let rhs = prm.potential_coeff() * prm.gamma * powq(f.get(id), prm.gamma - 1.0);
        let r = lap - rhs;
        worst = worst.max(r.abs());
        acc += r * r;
        nodes += 1;
    }
    if nodes == 0 {
        return Err(SolverError::EmptyPositivitySet { threshold });
    }
    Ok(ResidualStats { sup: worst, rms: (acc / nodes as f64).sqrt(), nodes })
}
