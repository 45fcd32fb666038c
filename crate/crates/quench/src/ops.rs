//! Discrete differential operators and ball reductions.
//!
//! The p-Laplacian uses a conservative midpoint-flux stencil: the flux
//! `|Du|^(p-2) Du` is evaluated at face midpoints (normal component by exact
//! difference quotient, tangential components by averaging the endpoint
//! derivatives) and the divergence differences the normal flux components of
//! opposing faces. Affine fields are annihilated exactly one cell away from
//! the boundary, and the stencil telescopes, so the scheme is conservative.

use crate::field::ScalarField;
use crate::grid::Ball;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OpsError {
    #[error("node {0} is too close to the grid boundary for this stencil")]
    TooCloseToBoundary(usize),
    #[error("no grid nodes in the requested region")]
    EmptyNodeSet,
}

/// `x^e` with square-root chains for quarter-integer exponents. The energy
/// and flux assemblies spend most of their time here; `powf` is kept only as
/// the general fallback. Each exponent always takes the same code path, so
/// results are reproducible run to run.
#[inline]
pub fn powq(x: f64, e: f64) -> f64 {
    let q = e * 4.0;
    let qi = q.round();
    if (q - qi).abs() < 1e-12 && (-8.0..=8.0).contains(&qi) {
        match qi as i32 {
            0 => 1.0,
            1 => x.sqrt().sqrt(),
            2 => x.sqrt(),
            3 => x.sqrt() * x.sqrt().sqrt(),
            4 => x,
            5 => x * x.sqrt().sqrt(),
            6 => x * x.sqrt(),
            7 => x * x.sqrt() * x.sqrt().sqrt(),
            8 => x * x,
            n => 1.0 / powq(x, -(n as f64) / 4.0),
        }
    } else {
        x.powf(e)
    }
}

/// `|g|^(p-2)` from the squared magnitude, with the degenerate-point
/// convention: zero gradient carries zero flux (any p > 1).
#[inline]
pub fn flux_coeff(g_sq: f64, p: f64) -> f64 {
    if g_sq == 0.0 {
        return if p == 2.0 { 1.0 } else { 0.0 };
    }
    powq(g_sq, (p - 2.0) / 2.0)
}

/// `|g|^p` from the squared magnitude.
#[inline]
pub fn grad_pow(g_sq: f64, p: f64) -> f64 {
    powq(g_sq, p / 2.0)
}

/// One-axis derivative at a node: centered in the interior, one-sided in the
/// boundary layer. Exact for affine fields in both cases.
#[inline]
pub(crate) fn axis_derivative(f: &ScalarField, i: usize, j: usize, axis: usize) -> f64 {
    let g = f.grid();
    let h = g.h();
    let (idx, n) = if axis == 0 { (i, g.nodes_along(0)) } else { (j, g.nodes_along(1)) };
    let at = |k: usize| -> f64 {
        if axis == 0 {
            f.at(k, j)
        } else {
            f.at(i, k)
        }
    };
    if idx == 0 {
        (at(1) - at(0)) / h
    } else if idx + 1 == n {
        (at(n - 1) - at(n - 2)) / h
    } else {
        (at(idx + 1) - at(idx - 1)) / (2.0 * h)
    }
}

/// Full gradient at the midpoint of the x-face between `(i, j)` and `(i+1, j)`.
#[inline]
pub(crate) fn face_grad_x(f: &ScalarField, i: usize, j: usize) -> [f64; 2] {
    let g = f.grid();
    let gn = (f.at(i + 1, j) - f.at(i, j)) / g.h();
    if g.dim() == 1 {
        [gn, 0.0]
    } else {
        let gt = 0.5 * (axis_derivative(f, i, j, 1) + axis_derivative(f, i + 1, j, 1));
        [gn, gt]
    }
}

/// Full gradient at the midpoint of the y-face between `(i, j)` and `(i, j+1)`.
#[inline]
pub(crate) fn face_grad_y(f: &ScalarField, i: usize, j: usize) -> [f64; 2] {
    let g = f.grid();
    let gn = (f.at(i, j + 1) - f.at(i, j)) / g.h();
    let gt = 0.5 * (axis_derivative(f, i, j, 0) + axis_derivative(f, i, j + 1, 0));
    [gt, gn]
}

#[inline]
fn norm_sq(v: [f64; 2]) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

/// Nodal gradient: centered differences at interior nodes, one-sided in the
/// boundary layer. Reproduces affine fields exactly.
pub fn gradient(f: &ScalarField, node: usize) -> [f64; 2] {
    let g = f.grid();
    let (i, j) = g.node_multi(node);
    let gx = axis_derivative(f, i, j, 0);
    let gy = if g.dim() == 2 { axis_derivative(f, i, j, 1) } else { 0.0 };
    [gx, gy]
}

/// Conservative-stencil p-Laplacian `div(|Du|^(p-2) Du)` at a node at least
/// one cell away from the boundary.
pub fn p_laplacian(f: &ScalarField, p: f64, node: usize) -> Result<f64, OpsError> {
    let g = f.grid();
    if !g.is_interior(node, 1) {
        return Err(OpsError::TooCloseToBoundary(node));
    }
    let (i, j) = g.node_multi(node);
    let h = g.h();
    let flux_x = |fi: usize| -> f64 {
        let grad = face_grad_x(f, fi, j);
        flux_coeff(norm_sq(grad), p) * grad[0]
    };
    let mut div = (flux_x(i) - flux_x(i - 1)) / h;
    if g.dim() == 2 {
        let flux_y = |fj: usize| -> f64 {
            let grad = face_grad_y(f, i, fj);
            flux_coeff(norm_sq(grad), p) * grad[1]
        };
        div += (flux_y(j) - flux_y(j - 1)) / h;
    }
    Ok(div)
}

/// Supremum of the field over nodes in the closed ball.
pub fn ball_sup(f: &ScalarField, ball: &Ball) -> Result<f64, OpsError> {
    let ids = f.grid().nodes_in_ball(ball);
    if ids.is_empty() {
        return Err(OpsError::EmptyNodeSet);
    }
    Ok(ids.iter().map(|&id| f.get(id)).fold(f64::NEG_INFINITY, f64::max))
}

/// Infimum of the field over nodes in the closed ball.
pub fn ball_inf(f: &ScalarField, ball: &Ball) -> Result<f64, OpsError> {
    let ids = f.grid().nodes_in_ball(ball);
    if ids.is_empty() {
        return Err(OpsError::EmptyNodeSet);
    }
    Ok(ids.iter().map(|&id| f.get(id)).fold(f64::INFINITY, f64::min))
}

/// Plain node average over the closed ball.
pub fn ball_avg(f: &ScalarField, ball: &Ball) -> Result<f64, OpsError> {
    let ids = f.grid().nodes_in_ball(ball);
    if ids.is_empty() {
        return Err(OpsError::EmptyNodeSet);
    }
    Ok(ids.iter().map(|&id| f.get(id)).sum::<f64>() / ids.len() as f64)
}

/// Supremum over the one-cell-thick shell of nodes nearest the sphere of
/// radius `ball.radius`: all nodes whose distance to the center lies within
/// `h/2` of the radius.
pub fn sphere_sup(f: &ScalarField, ball: &Ball) -> Result<f64, OpsError> {
    let g = f.grid();
    let outer = Ball::new(ball.center, ball.radius + 0.5 * g.h());
    let mut best = f64::NEG_INFINITY;
    let mut seen = false;
    for id in g.nodes_in_ball(&outer) {
        let d = g.dist(g.node_pos(id), ball.center);
        if (d - ball.radius).abs() <= 0.5 * g.h() {
            best = best.max(f.get(id));
            seen = true;
        }
    }
    if !seen {
        return Err(OpsError::EmptyNodeSet);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::params::Params;

    fn affine_2d() -> ScalarField {
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 17, 17).unwrap();
        ScalarField::from_fn(g, |x| 3.0 * x[0] - 1.5 * x[1] + 0.7)
    }

    #[test]
    fn gradient_reproduces_affine_fields_everywhere() {
        let f = affine_2d();
        for id in 0..f.grid().num_nodes() {
            let [gx, gy] = gradient(&f, id);
            assert!((gx - 3.0).abs() < 1e-10, "node {id}: gx={gx}");
            assert!((gy + 1.5).abs() < 1e-10, "node {id}: gy={gy}");
        }
        let g1 = Grid::line(-1.0, 1.0, 33).unwrap();
        let f1 = ScalarField::from_fn(g1, |x| -0.25 * x[0] + 2.0);
        for id in 0..g1.num_nodes() {
            assert!((gradient(&f1, id)[0] + 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn p_laplacian_vanishes_on_affine_fields() {
        let f = affine_2d();
        for &p in &[2.0, 2.5, 3.0] {
            for id in 0..f.grid().num_nodes() {
                if f.grid().is_interior(id, 1) {
                    let v = p_laplacian(&f, p, id).unwrap();
                    assert!(v.abs() < 1e-10, "p={p} node {id}: {v}");
                }
            }
        }
    }

    #[test]
    fn p_laplacian_rejects_boundary_layer_nodes() {
        let f = affine_2d();
        assert_eq!(p_laplacian(&f, 2.0, 0), Err(OpsError::TooCloseToBoundary(0)));
    }

    // v = |x - x0|^(p/(p-1)) has p-Laplacian  n * (p/(p-1))^(p-1)  in n
    // dimensions: for n = 2, p = 3 the exact value is 2 * 1.5^2 = 4.5.
    #[test]
    fn radial_barrier_value_in_2d() {
        let p = 3.0;
        let exact = 2.0 * (1.5f64).powi(2);
        let mut errs = Vec::new();
        for &n in &[33usize, 65, 129] {
            let g = Grid::rect((-1.0, 1.0), (-1.0, 1.0), n, n).unwrap();
            let f = ScalarField::from_fn(g, |x| {
                let r = x[0].hypot(x[1]);
                r.powf(p / (p - 1.0))
            });
            // Sample away from the cone point, where the field is smooth.
            let mut worst = 0.0f64;
            for id in 0..g.num_nodes() {
                let pos = g.node_pos(id);
                let r = pos[0].hypot(pos[1]);
                if g.is_interior(id, 1) && (0.35..0.8).contains(&r) {
                    let v = p_laplacian(&f, p, id).unwrap();
                    worst = worst.max((v - exact).abs());
                }
            }
            errs.push(worst);
        }
        // First-order (or better) refinement toward the exact constant.
        assert!(errs[0] < 0.5, "coarse error too large: {errs:?}");
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order >= 0.9, "observed order {order}, errors {errs:?}");
    }

    // Discrete EL consistency on the exact 1D dead-core profile: the flux
    // stencil approaches gamma*u^(gamma-1) at fixed distance from the free
    // boundary, at first order or better.
    #[test]
    fn profile_el_residual_refines_at_order_one() {
        let prm = Params::new(3.0, 0.5).unwrap();
        let alpha = prm.alpha();
        let amp = (prm.gamma / (alpha.powf(prm.p - 1.0) * (alpha - 1.0) * (prm.p - 1.0)))
            .powf(1.0 / (prm.p - prm.gamma));
        let mut errs = Vec::new();
        for &n in &[257usize, 513, 1025] {
            let g = Grid::line(-1.0, 1.0, n).unwrap();
            let f = ScalarField::from_fn(g, |x| amp * x[0].max(0.0).powf(alpha));
            // fixed probe at x = 0.25 (node-aligned for every n here)
            let i = ((0.25f64 - (-1.0)) / g.h()).round() as usize;
            let id = g.node_id(i, 0);
            let u = f.get(id);
            let want = prm.gamma * u.powf(prm.gamma - 1.0);
            let got = p_laplacian(&f, prm.p, id).unwrap();
            errs.push((got - want).abs());
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order >= 1.0, "observed order {order}, errors {errs:?}");
    }

    // Strong monotonicity of the flux map: (phi(a) - phi(b)) . (a - b) >=
    // 2^(2-p) |a-b|^p for p >= 2, sharp at antipodal pairs.
    #[test]
    fn flux_map_is_strongly_monotone() {
        use rand::Rng;
        use rand_chacha::ChaCha8Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &p in &[2.0, 2.5, 3.0] {
            let floor = (2.0f64).powf(2.0 - p);
            let mut min_ratio = f64::INFINITY;
            for _ in 0..10_000 {
                let a = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let b = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let d = [a[0] - b[0], a[1] - b[1]];
                let d_sq = norm_sq(d);
                if d_sq < 1e-12 {
                    continue;
                }
                let fa = flux_coeff(norm_sq(a), p);
                let fb = flux_coeff(norm_sq(b), p);
                let dot = (fa * a[0] - fb * b[0]) * d[0] + (fa * a[1] - fb * b[1]) * d[1];
                min_ratio = min_ratio.min(dot / grad_pow(d_sq, p));
            }
            assert!(
                min_ratio >= floor * (1.0 - 1e-9),
                "p={p}: min ratio {min_ratio} below {floor}"
            );
        }
    }

    #[test]
    fn ball_reductions_on_known_fields() {
        let g = Grid::line(-1.0, 1.0, 17).unwrap();
        let h = g.h();
        let constant = ScalarField::from_fn(g, |_| 3.25);
        let ball = Ball::new([0.0, 0.0], 0.5);
        assert_eq!(ball_sup(&constant, &ball).unwrap(), 3.25);
        assert_eq!(ball_avg(&constant, &ball).unwrap(), 3.25);
        assert_eq!(sphere_sup(&constant, &ball).unwrap(), 3.25);

        let vee = ScalarField::from_fn(g, |x| x[0].abs());
        // r = 0.5 is node-aligned, so the sup is exact and the shell catches
        // the nodes at distance exactly r.
        assert!((ball_sup(&vee, &ball).unwrap() - 0.5).abs() < 1e-12);
        assert!(ball_inf(&vee, &ball).unwrap().abs() < 1e-12);
        let s = sphere_sup(&vee, &ball).unwrap();
        assert!((s - 0.5).abs() <= 0.5 * h + 1e-12);

        let empty = Ball::new([40.0, 0.0], 0.01);
        assert_eq!(ball_sup(&vee, &empty), Err(OpsError::EmptyNodeSet));
        assert_eq!(ball_inf(&vee, &empty), Err(OpsError::EmptyNodeSet));
    }

    #[test]
    fn powq_matches_powf_on_quarter_exponents() {
        for &e in &[-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 0.33] {
            for &x in &[1e-12, 0.17, 1.0, 42.0, 9.5e7] {
                let a = powq(x, e);
                let b = x.powf(e);
                assert!(
                    (a - b).abs() <= 1e-13 * b.abs().max(1e-300),
                    "x={x} e={e}: {a} vs {b}"
                );
            }
        }
    }
}
