//! Metric projection onto convex bodies.
//!
//! V-polytopes use Wolfe's minimum-norm-point active-set method over the
//! convex-combination weights. H-polytopes use a primal active-set quadratic
//! program started from a feasible point; ball-cuts reduce to a
//! one-dimensional search over polyhedral projections along the segment from
//! the ball centre. Dykstra's alternating projections are kept as an
//! independent reference route.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{axpy, dist, dot, norm, sub};

use super::body::{BodyKind, ConvexBody, HalfSpace};

const MAX_ACTIVE_SET_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    /// Foot point `p_K(x)`.
    pub p: Vec<f64>,
    /// Distance `d_K(x)`.
    pub d: f64,
    /// Direction `u_K(x) = (x - p)/d`, defined iff `d > 0`.
    pub u: Option<Vec<f64>>,
}

impl ProjectionResult {
    fn from_foot(x: &[f64], p: Vec<f64>, scale: f64) -> Self {
        let d = dist(x, &p);
        if d <= 1e-13 * (1.0 + scale) {
            return Self {
                p: x.to_vec(),
                d: 0.0,
                u: None,
            };
        }
        let u = x.iter().zip(&p).map(|(a, b)| (a - b) / d).collect();
        Self { p, d, u: Some(u) }
    }
}

/// Nearest point of `body` to `x`.
pub fn project(body: &ConvexBody, x: &[f64]) -> Result<ProjectionResult> {
    if x.len() != body.dim() {
        return Err(Error::DimensionMismatch {
            expected: body.dim(),
            got: x.len(),
        });
    }
    let scale = norm(x).max(1.0);
    let base = if body.base_contains_fast(x) == Some(true) {
        x.to_vec()
    } else {
        match body.kind() {
            BodyKind::Ball { center, radius } => {
                let d = dist(x, center);
                if d <= *radius {
                    x.to_vec()
                } else {
                    axpy(center, radius / d, &sub(x, center))
                }
            }
            BodyKind::VPolytope { vertices } => min_norm_point(vertices, x)?,
            BodyKind::HPolytope { halfspaces } => project_polyhedron(halfspaces, x, body.anchor())?,
            BodyKind::BallCut {
                center,
                radius,
                halfspaces,
            } => project_ballcut(center, *radius, halfspaces, x)?,
        }
    };
    let rho = body.outer_radius();
    let res = ProjectionResult::from_foot(x, base, scale);
    if rho == 0.0 || res.d == 0.0 {
        return Ok(res);
    }
    if res.d <= rho {
        return Ok(ProjectionResult {
            p: x.to_vec(),
            d: 0.0,
            u: None,
        });
    }
    let u = res.u.expect("d > 0");
    let p = axpy(&res.p, rho, &u);
    Ok(ProjectionResult {
        p,
        d: res.d - rho,
        u: Some(u),
    })
}

/// Distance `d_K(x)`.
pub fn distance(body: &ConvexBody, x: &[f64]) -> Result<f64> {
    Ok(project(body, x)?.d)
}

/// Solve the symmetric positive definite system `g y = r` in place by
/// Cholesky; `None` if `g` is numerically singular.
fn cholesky_solve(g: &[f64], k: usize, r: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    let scale = (0..k).map(|i| g[i * k + i]).fold(0.0, f64::max).max(1e-300);
    for i in 0..k {
        for j in 0..=i {
            let mut s = g[i * k + j];
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            if i == j {
                if s <= 1e-13 * scale {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut y = r.to_vec();
    for i in 0..k {
        for m in 0..i {
            y[i] -= l[i * k + m] * y[m];
        }
        y[i] /= l[i * k + i];
    }
    for i in (0..k).rev() {
        for m in i + 1..k {
            y[i] -= l[m * k + i] * y[m];
        }
        y[i] /= l[i * k + i];
    }
    Some(y)
}

/// Wolfe's minimum-norm-point algorithm on the translated vertices
/// `q_k = v_k - x`; returns the foot point `x + w`.
pub(crate) fn min_norm_point(vertices: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let q: Vec<Vec<f64>> = vertices.iter().map(|v| sub(v, x)).collect();
    if q.len() == 1 {
        return Ok(vertices[0].clone());
    }
    let qmax2 = q.iter().map(|v| dot(v, v)).fold(0.0, f64::max).max(1e-300);
    let start = (0..q.len())
        .min_by(|&a, &b| dot(&q[a], &q[a]).total_cmp(&dot(&q[b], &q[b])))
        .unwrap();
    let mut set: Vec<usize> = vec![start];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut w = q[start].clone();
    let combine = |set: &[usize], coef: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; n];
        for (&k, &c) in set.iter().zip(coef) {
            for (wi, qi) in w.iter_mut().zip(&q[k]) {
                *wi += c * qi;
            }
        }
        w
    };
    for _major in 0..MAX_ACTIVE_SET_ITERS {
        let ww = dot(&w, &w);
        if ww <= 1e-28 * qmax2 {
            break;
        }
        let (j, wq) = (0..q.len())
            .map(|k| (k, dot(&w, &q[k])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if ww - wq <= 1e-12 * qmax2 || set.contains(&j) || set.len() > n {
            break;
        }
        set.push(j);
        lambda.push(0.0);
        for _minor in 0..MAX_ACTIVE_SET_ITERS {
            // affine minimizer over the current set
            let alpha = match affine_min_norm(&q, &set) {
                Some(a) => a,
                None => {
                    // dependent set: drop the newest point and stop
                    set.pop();
                    lambda.pop();
                    break;
                }
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                lambda = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= 1e-14 {
                    let t = l / (l - a);
                    if t < theta {
                        theta = t;
                    }
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let mut k = 0;
            while k < set.len() {
                if lambda[k] <= 1e-14 {
                    set.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
        }
        w = combine(&set, &lambda);
    }
    Ok(axpy(x, 1.0, &w))
}

/// Minimize |sum a_k q_k| subject to sum a_k = 1 over `set`.
fn affine_min_norm(q: &[Vec<f64>], set: &[usize]) -> Option<Vec<f64>> {
    let m = set.len();
    if m == 1 {
        return Some(vec![1.0]);
    }
    let base = &q[set[0]];
    let diffs: Vec<Vec<f64>> = set[1..].iter().map(|&k| sub(&q[k], base)).collect();
    let k = m - 1;
    let mut g = vec![0.0; k * k];
    let mut r = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            g[i * k + j] = dot(&diffs[i], &diffs[j]);
        }
        r[i] = -dot(&diffs[i], base);
    }
    let beta = cholesky_solve(&g, k, &r)?;
    let mut alpha = Vec::with_capacity(m);
    alpha.push(1.0 - beta.iter().sum::<f64>());
    alpha.extend(beta);
    Some(alpha)
}

/// Projection of `z` onto `{y : a_k . y <= b_k}` by a primal active-set
/// method started at the feasible point `start`.
pub(crate) fn project_polyhedron(
    halfspaces: &[HalfSpace],
    z: &[f64],
    start: &[f64],
) -> Result<Vec<f64>> {
    if halfspaces.iter().all(|h| h.violation(z) <= 0.0) {
        return Ok(z.to_vec());
    }
    let n = z.len();
    let tol = 1e-12 * (1.0 + norm(start));
    let mut y = start.to_vec();
    let mut work: Vec<usize> = Vec::new();

    let gram = |work: &[usize]| -> Vec<f64> {
        let k = work.len();
        let mut g = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                g[i * k + j] = dot(&halfspaces[work[i]].normal, &halfspaces[work[j]].normal);
            }
        }
        g
    };
    let independent_with = |work: &[usize], c: usize| -> bool {
        if work.len() >= n {
            return false;
        }
        let mut w = work.to_vec();
        w.push(c);
        let k = w.len();
        cholesky_solve(&gram(&w), k, &vec![0.0; k]).is_some()
    };
    for (k, h) in halfspaces.iter().enumerate() {
        if h.violation(&y).abs() <= tol && independent_with(&work, k) {
            work.push(k);
        }
    }

    for _ in 0..MAX_ACTIVE_SET_ITERS {
        let g = sub(z, &y);
        let k = work.len();
        let gm = gram(&work);
        let rhs: Vec<f64> = work
            .iter()
            .map(|&c| dot(&halfspaces[c].normal, &g))
            .collect();
        let mult = if k == 0 {
            Vec::new()
        } else {
            cholesky_solve(&gm, k, &rhs).ok_or(Error::ConvergenceFailure {
                iterations: MAX_ACTIVE_SET_ITERS,
            })?
        };
        // step in the null space of the working normals
        let mut p = g.clone();
        for (&c, &m) in work.iter().zip(&mult) {
            for (pi, ai) in p.iter_mut().zip(&halfspaces[c].normal) {
                *pi -= m * ai;
            }
        }
        if norm(&p) <= 1e-12 * (1.0 + norm(&g)) {
            // multipliers of the KKT system are `mult`
            match mult
                .iter()
                .enumerate()
                .filter(|(_, &m)| m < -1e-14 * (1.0 + norm(&g)))
                .min_by(|a, b| a.1.total_cmp(b.1))
            {
                None => return Ok(y),
                Some((idx, _)) => {
                    work.remove(idx);
                    continue;
                }
            }
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for (c, h) in halfspaces.iter().enumerate() {
            if work.contains(&c) {
                continue;
            }
            let ap = dot(&h.normal, &p);
            if ap > 1e-15 * norm(&p) {
                let slack = h.offset - dot(&h.normal, &y);
                let t = (slack.max(0.0)) / ap;
                if t < alpha {
                    alpha = t;
                    blocking = Some(c);
                }
            }
        }
        for (yi, pi) in y.iter_mut().zip(&p) {
            *yi += alpha * pi;
        }
        if let Some(c) = blocking {
            if independent_with(&work, c) {
                work.push(c);
            } else {
                return Err(Error::ConvergenceFailure {
                    iterations: MAX_ACTIVE_SET_ITERS,
                });
            }
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: MAX_ACTIVE_SET_ITERS,
    })
}

/// Projection onto `B(c, r) ∩ P` with `c ∈ P`: the foot point is
/// `proj_P(c + s (x - c))` for the `s ∈ (0, 1]` where it meets the sphere.
fn project_ballcut(
    center: &[f64],
    radius: f64,
    halfspaces: &[HalfSpace],
    x: &[f64],
) -> Result<Vec<f64>> {
    let y1 = project_polyhedron(halfspaces, x, center)?;
    if dist(&y1, center) <= radius {
        return Ok(y1);
    }
    let dir = sub(x, center);
    let at = |s: f64, start: &[f64]| project_polyhedron(halfspaces, &axpy(center, s, &dir), start);
    let excess = |y: &[f64]| dist(y, center) - radius;
    // Illinois regula falsi on s with bisection safeguard
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut f_lo, mut f_hi) = (-radius, excess(&y1));
    let mut y_best = y1;
    let mut side = 0i8;
    for it in 0..200 {
        let s = if it % 4 == 3 {
            0.5 * (lo + hi)
        } else {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        };
        let y = at(s, center)?;
        let f = excess(&y);
        if f.abs() <= 1e-14 * radius || hi - lo <= 1e-16 {
            return Ok(y);
        }
        if f < 0.0 {
            lo = s;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = s;
            f_hi = f;
            y_best = y;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(y_best)
}

/// Dykstra's alternating projections onto the halfspaces (and ball, for
/// ball-cuts). Tolerance is on the sweep-to-sweep displacement.
pub fn project_dykstra(
    body: &ConvexBody,
    x: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    let (ball, halfspaces): (Option<(&[f64], f64)>, &[HalfSpace]) = match body.kind() {
        BodyKind::HPolytope { halfspaces } => (None, halfspaces),
        BodyKind::BallCut {
            center,
            radius,
            halfspaces,
        } => (Some((center, *radius)), halfspaces),
        BodyKind::Ball { center, radius } => (Some((center, *radius)), &[]),
        BodyKind::VPolytope { .. } => {
            return Err(Error::InvalidBody(
                "Dykstra projection needs an H-description".into(),
            ))
        }
    };
    let n = x.len();
    let sets = halfspaces.len() + ball.is_some() as usize;
    let mut corr = vec![vec![0.0; n]; sets];
    let mut y = x.to_vec();
    for _ in 0..max_sweeps {
        let before = y.clone();
        for (k, h) in halfspaces.iter().enumerate() {
            let z: Vec<f64> = y.iter().zip(&corr[k]).map(|(a, b)| a + b).collect();
            let v = h.violation(&z);
            let proj = if v > 0.0 {
                axpy(&z, -v, &h.normal)
            } else {
                z.clone()
            };
            corr[k] = sub(&z, &proj);
            y = proj;
        }
        if let Some((c, r)) = ball {
            let k = sets - 1;
            let z: Vec<f64> = y.iter().zip(&corr[k]).map(|(a, b)| a + b).collect();
            let d = dist(&z, c);
            let proj = if d > r {
                axpy(c, r / d, &sub(&z, c))
            } else {
                z.clone()
            };
            corr[k] = sub(&z, &proj);
            y = proj;
        }
        if dist(&y, &before) <= tol {
            return Ok(y);
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: max_sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square_h() -> ConvexBody {
        let hs = [
            ([1.0, 0.0], 1.0),
            ([-1.0, 0.0], 0.0),
            ([0.0, 1.0], 1.0),
            ([0.0, -1.0], 0.0),
        ]
        .iter()
        .map(|(a, b)| HalfSpace::new(a.to_vec(), *b).unwrap())
        .collect();
        ConvexBody::hpolytope(hs).unwrap()
    }

    #[test]
    fn ball_example() {
        let b = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let r = project(&b, &[2.0, 0.0]).unwrap();
        assert_eq!(r.p, vec![1.0, 0.0]);
        assert_eq!(r.d, 1.0);
        assert_eq!(r.u, Some(vec![1.0, 0.0]));
    }

    #[test]
    fn square_corner_both_representations() {
        for body in [ConvexBody::unit_cube(2).unwrap(), square_h()] {
            let r = project(&body, &[2.0, 2.0]).unwrap();
            assert_abs_diff_eq!(r.p[0], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.p[1], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.d, 2f64.sqrt(), epsilon = 1e-12);
            let u = r.u.unwrap();
            assert_abs_diff_eq!(u[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        }
    }

    #[test]
    fn interior_points_are_fixed() {
        for body in [
            ConvexBody::unit_cube(3).unwrap(),
            ConvexBody::ball(vec![0.5; 3], 0.7).unwrap(),
        ] {
            let r = project(&body, &[0.5, 0.4, 0.6]).unwrap();
            assert_eq!(r.d, 0.0);
            assert!(r.u.is_none());
            assert_eq!(r.p, vec![0.5, 0.4, 0.6]);
        }
    }

    #[test]
    fn outer_radius_rounds_the_square() {
        let body = ConvexBody::unit_cube(2)
            .unwrap()
            .with_outer_radius(0.5)
            .unwrap();
        let r = project(&body, &[3.0, 0.5]).unwrap();
        assert_abs_diff_eq!(r.p[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.d, 1.5, epsilon = 1e-12);
        let inside = project(&body, &[1.3, 0.5]).unwrap();
        assert_eq!(inside.d, 0.0);
    }

    #[test]
    fn ballcut_agrees_with_dykstra() {
        let hs = vec![
            HalfSpace::new(vec![1.0, 0.0, 0.0], 0.6).unwrap(),
            HalfSpace::normalized(&[1.0, 1.0, 0.0], 0.8).unwrap(),
            HalfSpace::new(vec![0.0, 0.0, 1.0], 0.0).unwrap(),
            HalfSpace::new(vec![0.0, 0.0, -1.0], 0.0).unwrap(),
        ];
        let body = ConvexBody::ball_cut(vec![0.0; 3], 1.0, hs).unwrap();
        for x in [
            [2.0, 0.3, 0.4],
            [0.9, 0.9, -0.2],
            [-2.0, 0.1, 1.0],
            [0.0, 3.0, 0.0],
            [1.0, -1.0, 0.5],
        ] {
            let a = project(&body, &x).unwrap().p;
            let b = project_dykstra(&body, &x, 1e-13, 200_000).unwrap();
            assert!(dist(&a, &b) < 1e-7, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn hpolytope_agrees_with_vpolytope() {
        let v = ConvexBody::unit_cube(2).unwrap();
        let h = square_h();
        for x in [[3.0, 0.5], [-1.0, -2.0], [0.5, 1.7], [0.2, 0.3]] {
            let a = project(&v, &x).unwrap().p;
            let b = project(&h, &x).unwrap().p;
            assert!(dist(&a, &b) < 1e-12);
        }
    }
}
