use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::simplex::{lp_solve, LpProblem, Relation};
use crate::vector::{axpy, dist, dot, norm, unit};

use super::project::project_polyhedron;

pub const MAX_DIM: usize = 6;
pub const MAX_VERTICES: usize = 64;
const UNIT_TOL: f64 = 1e-12;

/// `{ y : normal . y <= offset }` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let len = norm(&normal);
        if (len - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidBody(format!(
                "halfspace normal has length {len}"
            )));
        }
        Ok(Self { normal, offset })
    }

    /// Rescales `(a, b)` so the normal has unit length.
    pub fn normalized(normal: &[f64], offset: f64) -> Result<Self> {
        let len = norm(normal);
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidBody("zero halfspace normal".into()));
        }
        Ok(Self {
            normal: normal.iter().map(|a| a / len).collect(),
            offset: offset / len,
        })
    }

    #[inline]
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BodyKind {
    VPolytope {
        vertices: Vec<Vec<f64>>,
    },
    HPolytope {
        halfspaces: Vec<HalfSpace>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Ball intersected with halfspaces; the center must satisfy every
    /// halfspace.
    BallCut {
        center: Vec<f64>,
        radius: f64,
        halfspaces: Vec<HalfSpace>,
    },
}

/// A convex body, optionally thickened by `outer_radius` (Minkowski sum with
/// a ball of that radius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexBody {
    dim: usize,
    kind: BodyKind,
    outer_radius: f64,
    /// A point of the base body, used to start feasible-path projections.
    anchor: Vec<f64>,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::InvalidBody(format!(
            "dimension {n} outside 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

fn check_point(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidBody("non-finite coordinate".into()));
    }
    Ok(())
}

fn check_halfspaces(hs: &[HalfSpace], n: usize) -> Result<()> {
    for h in hs {
        check_point(&h.normal, n)?;
        if (norm(&h.normal) - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidBody("halfspace normal is not unit".into()));
        }
    }
    Ok(())
}

fn polyhedron_support(hs: &[HalfSpace], n: usize, u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut lp = LpProblem::new(u.to_vec());
    lp.bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
    for h in hs {
        lp.add(h.normal.clone(), Relation::Le, h.offset);
    }
    let sol = lp_solve(&lp)?;
    Ok((sol.objective, sol.x))
}

impl ConvexBody {
    pub fn vpolytope(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidBody("empty vertex list".into()))?;
        let n = first.len();
        check_dim(n)?;
        if vertices.len() > MAX_VERTICES {
            return Err(Error::InvalidBody(format!(
                "{} vertices exceeds cap {MAX_VERTICES}",
                vertices.len()
            )));
        }
        for v in &vertices {
            check_point(v, n)?;
        }
        let anchor = vertices[0].clone();
        Ok(Self {
            dim: n,
            kind: BodyKind::VPolytope { vertices },
            outer_radius: 0.0,
            anchor,
        })
    }

    pub fn point(x: Vec<f64>) -> Result<Self> {
        Self::vpolytope(vec![x])
    }

    /// Axis-parallel box `[lo, hi]` as a V-polytope.
    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let n = lo.len();
        let verts = (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] })
                    .collect()
            })
            .collect();
        Self::vpolytope(verts)
    }

    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::cuboid(&vec![0.0; n], &vec![1.0; n])
    }

    pub fn hpolytope(halfspaces: Vec<HalfSpace>) -> Result<Self> {
        let n = halfspaces
            .first()
            .ok_or_else(|| Error::InvalidBody("empty halfspace list".into()))?
            .normal
            .len();
        check_dim(n)?;
        check_halfspaces(&halfspaces, n)?;
        // bounded and nonempty iff the support function is finite on +-e_k
        let mut anchor = vec![0.0; n];
        for k in 0..n {
            for s in [1.0, -1.0] {
                let u: Vec<f64> = unit(n, k).iter().map(|v| v * s).collect();
                let (_, x) = polyhedron_support(&halfspaces, n, &u).map_err(|e| match e {
                    Error::Unbounded => Error::InvalidBody("unbounded H-polytope".into()),
                    Error::Infeasible => Error::InvalidBody("empty H-polytope".into()),
                    other => other,
                })?;
                for (a, xi) in anchor.iter_mut().zip(&x) {
                    *a += xi / (2 * n) as f64;
                }
            }
        }
        Ok(Self {
            dim: n,
            kind: BodyKind::HPolytope { halfspaces },
            outer_radius: 0.0,
            anchor,
        })
    }

    /// A ball; radius zero degenerates to a point body.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let n = center.len();
        check_dim(n)?;
        check_point(&center, n)?;
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidBody(format!("ball radius {radius}")));
        }
        if radius == 0.0 {
            return Self::point(center);
        }
        Ok(Self {
            dim: n,
            anchor: center.clone(),
            kind: BodyKind::Ball { center, radius },
            outer_radius: 0.0,
        })
    }

    pub fn ball_cut(center: Vec<f64>, radius: f64, halfspaces: Vec<HalfSpace>) -> Result<Self> {
        let n = center.len();
        check_dim(n)?;
        check_point(&center, n)?;
        check_halfspaces(&halfspaces, n)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidBody(format!("ball radius {radius}")));
        }
        if let Some(h) = halfspaces.iter().find(|h| h.violation(&center) > 1e-12) {
            return Err(Error::InvalidBody(format!(
                "ball center violates halfspace by {}",
                h.violation(&center)
            )));
        }
        Ok(Self {
            dim: n,
            anchor: center.clone(),
            kind: BodyKind::BallCut {
                center,
                radius,
                halfspaces,
            },
            outer_radius: 0.0,
        })
    }

    pub fn with_outer_radius(mut self, rho: f64) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidBody(format!("outer radius {rho}")));
        }
        self.outer_radius = rho;
        Ok(self)
    }

    /// The parallel body `K + rho B^n`.
    pub fn parallel(&self, rho: f64) -> Result<Self> {
        self.clone().with_outer_radius(self.outer_radius + rho)
    }

    pub fn translated(&self, t: &[f64]) -> Result<Self> {
        check_point(t, self.dim)?;
        let shift = |x: &Vec<f64>| axpy(x, 1.0, t);
        let shift_hs = |hs: &Vec<HalfSpace>| {
            hs.iter()
                .map(|h| HalfSpace {
                    normal: h.normal.clone(),
                    offset: h.offset + dot(&h.normal, t),
                })
                .collect()
        };
        let kind = match &self.kind {
            BodyKind::VPolytope { vertices } => BodyKind::VPolytope {
                vertices: vertices.iter().map(shift).collect(),
            },
            BodyKind::HPolytope { halfspaces } => BodyKind::HPolytope {
                halfspaces: shift_hs(halfspaces),
            },
            BodyKind::Ball { center, radius } => BodyKind::Ball {
                center: shift(center),
                radius: *radius,
            },
            BodyKind::BallCut {
                center,
                radius,
                halfspaces,
            } => BodyKind::BallCut {
                center: shift(center),
                radius: *radius,
                halfspaces: shift_hs(halfspaces),
            },
        };
        Ok(Self {
            dim: self.dim,
            kind,
            outer_radius: self.outer_radius,
            anchor: shift(&self.anchor),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn is_polytope(&self) -> bool {
        matches!(
            self.kind,
            BodyKind::VPolytope { .. } | BodyKind::HPolytope { .. }
        )
    }

    /// Support function `h_K(u) = max_{x in K} x . u`.
    pub fn support_function(&self, u: &[f64]) -> Result<f64> {
        Ok(self.support_point(u)?.0)
    }

    /// Support value together with a maximizing point of K.
    pub fn support_point(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_point(u, self.dim)?;
        let len = norm(u);
        if (len - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitDirection { norm: len });
        }
        let (h, x) = self.base_support(u)?;
        let rho = self.outer_radius;
        Ok((h + rho, axpy(&x, rho, u)))
    }

    fn base_support(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        match &self.kind {
            BodyKind::VPolytope { vertices } => {
                let (best, h) = vertices
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (k, dot(v, u)))
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (k, h)| {
                            if h > acc.1 {
                                (k, h)
                            } else {
                                acc
                            }
                        },
                    );
                Ok((h, vertices[best].clone()))
            }
            BodyKind::HPolytope { halfspaces } => polyhedron_support(halfspaces, self.dim, u),
            BodyKind::Ball { center, radius } => {
                Ok((dot(center, u) + radius, axpy(center, *radius, u)))
            }
            BodyKind::BallCut {
                center,
                radius,
                halfspaces,
            } => ballcut_support(center, *radius, halfspaces, &self.anchor, u),
        }
    }

    /// Radius of an origin-centred ball containing `K + 2 B^n`.
    pub fn circumradius_bound(&self) -> f64 {
        self.max_norm_bound() + 2.0
    }

    /// Upper bound on `max_{x in K} |x|`.
    pub fn max_norm_bound(&self) -> f64 {
        let base = match &self.kind {
            BodyKind::VPolytope { vertices } => {
                vertices.iter().map(|v| norm(v)).fold(0.0, f64::max)
            }
            BodyKind::Ball { center, radius } | BodyKind::BallCut { center, radius, .. } => {
                norm(center) + radius
            }
            BodyKind::HPolytope { .. } => {
                // the box from axis supports contains the polytope
                let (lo, hi) = self.bounding_box_base();
                lo.iter()
                    .zip(&hi)
                    .map(|(a, b)| a.abs().max(b.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt()
            }
        };
        base + self.outer_radius
    }

    fn bounding_box_base(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for k in 0..n {
            let e = unit(n, k);
            let me: Vec<f64> = e.iter().map(|v| -v).collect();
            hi[k] = self.base_support(&e).map(|r| r.0).unwrap_or(f64::INFINITY);
            lo[k] = -self.base_support(&me).map(|r| r.0).unwrap_or(f64::INFINITY);
        }
        (lo, hi)
    }

    /// Axis-aligned box containing `K_rho`, from the support function in the
    /// 2n axis directions, inflated by 1e-9.
    pub fn bounding_box(&self, rho: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut lo, mut hi) = self.bounding_box_base();
        let pad = self.outer_radius + rho + 1e-9;
        lo.iter_mut().for_each(|v| *v -= pad);
        hi.iter_mut().for_each(|v| *v += pad);
        (lo, hi)
    }

    /// Whether `x` lies in the base body (ignoring `outer_radius`), with a
    /// cheap exact test where one exists.
    pub(crate) fn base_contains_fast(&self, x: &[f64]) -> Option<bool> {
        match &self.kind {
            BodyKind::Ball { center, radius } => Some(dist(x, center) <= *radius),
            BodyKind::BallCut {
                center,
                radius,
                halfspaces,
            } => {
                Some(dist(x, center) <= *radius && halfspaces.iter().all(|h| h.violation(x) <= 0.0))
            }
            BodyKind::HPolytope { halfspaces } => {
                Some(halfspaces.iter().all(|h| h.violation(x) <= 0.0))
            }
            BodyKind::VPolytope { .. } => None,
        }
    }
}

/// Support of `B(c, r) ∩ P`: the maximizer is `proj_P(c + tau u)` at the
/// `tau` where that point reaches the sphere (or the limit inside the ball).
fn ballcut_support(
    center: &[f64],
    radius: f64,
    halfspaces: &[HalfSpace],
    anchor: &[f64],
    u: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let top = axpy(center, radius, u);
    if halfspaces.iter().all(|h| h.violation(&top) <= 0.0) {
        return Ok((dot(center, u) + radius, top));
    }
    let proj = |tau: f64| -> Result<Vec<f64>> {
        project_polyhedron(halfspaces, &axpy(center, tau, u), anchor)
    };
    let excess = |y: &[f64]| dist(y, center) - radius;
    let mut lo = 0.0;
    let mut hi = radius;
    let mut y_hi = proj(hi)?;
    let mut grow = 0;
    while excess(&y_hi) < 0.0 {
        lo = hi;
        hi *= 4.0;
        y_hi = proj(hi)?;
        grow += 1;
        if grow > 14 {
            // the polyhedral face is inside the ball
            return Ok((dot(&y_hi, u), y_hi));
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * (1.0 + hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let y = proj(mid)?;
        if excess(&y) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
            y_hi = y;
        }
    }
    // pull the point radially onto the ball to remove bisection slack
    let y_lo = proj(lo)?;
    let y = if excess(&y_lo).abs() < excess(&y_hi).abs() {
        y_lo
    } else {
        y_hi
    };
    Ok((dot(&y, u), y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn support_examples() {
        let sq = ConvexBody::unit_cube(2).unwrap();
        assert_eq!(sq.support_function(&[1.0, 0.0]).unwrap(), 1.0);
        let b = ConvexBody::ball(vec![0.0, 0.0, 0.0], 2.5).unwrap();
        let u = [0.6, 0.0, 0.8];
        assert_abs_diff_eq!(b.support_function(&u).unwrap(), 2.5, epsilon = 1e-15);
        let seg = ConvexBody::vpolytope(vec![vec![0.0, 0.0], vec![2.0, 1.0]]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(
            seg.support_function(&[s, s]).unwrap(),
            3.0 / 2f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn non_unit_direction_rejected() {
        let sq = ConvexBody::unit_cube(2).unwrap();
        assert!(matches!(
            sq.support_function(&[1.0, 1.0]),
            Err(Error::NonUnitDirection { .. })
        ));
    }

    #[test]
    fn hpolytope_validation() {
        let hs = |v: &[(f64, f64, f64)]| {
            v.iter()
                .map(|&(a, b, c)| HalfSpace::new(vec![a, b], c).unwrap())
                .collect::<Vec<_>>()
        };
        let square = ConvexBody::hpolytope(hs(&[
            (1.0, 0.0, 1.0),
            (-1.0, 0.0, 0.0),
            (0.0, 1.0, 1.0),
            (0.0, -1.0, 0.0),
        ]))
        .unwrap();
        assert_abs_diff_eq!(
            square.support_function(&[0.0, 1.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let halfplane = ConvexBody::hpolytope(hs(&[(1.0, 0.0, 1.0)]));
        assert!(matches!(halfplane, Err(Error::InvalidBody(_))));
        let empty = ConvexBody::hpolytope(hs(&[
            (1.0, 0.0, -1.0),
            (-1.0, 0.0, -1.0),
            (0.0, 1.0, 1.0),
            (0.0, -1.0, 1.0),
        ]));
        assert!(matches!(empty, Err(Error::InvalidBody(_))));
        assert!(HalfSpace::new(vec![1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn ballcut_support_hits_cut() {
        // unit disc cut by x <= 0.5
        let body = ConvexBody::ball_cut(
            vec![0.0, 0.0],
            1.0,
            vec![HalfSpace::new(vec![1.0, 0.0], 0.5).unwrap()],
        )
        .unwrap();
        assert_abs_diff_eq!(
            body.support_function(&[1.0, 0.0]).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            body.support_function(&[0.0, 1.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // direction at 45 degrees: max over the corner (0.5, sqrt(3)/2) vs the arc
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expect = (0.5 + 0.75f64.sqrt()) * s;
        assert_abs_diff_eq!(
            body.support_function(&[s, s]).unwrap(),
            expect,
            epsilon = 1e-10
        );
    }

    #[test]
    fn circumradius_examples() {
        let sq = ConvexBody::unit_cube(2).unwrap();
        assert_abs_diff_eq!(sq.circumradius_bound(), 2f64.sqrt() + 2.0, epsilon = 1e-15);
        let b = ConvexBody::ball(vec![0.0; 3], 1.0).unwrap();
        assert_eq!(b.circumradius_bound(), 3.0);
        let c = ConvexBody::ball(vec![3.0, 4.0], 0.5).unwrap();
        assert_abs_diff_eq!(c.circumradius_bound(), 7.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_radius_ball_is_point() {
        let p = ConvexBody::ball(vec![1.0, 2.0], 0.0).unwrap();
        assert!(matches!(p.kind(), BodyKind::VPolytope { .. }));
    }
}
