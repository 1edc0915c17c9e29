//! Hausdorff distance between convex bodies.
//!
//! For V-polytopes with equal outer radii the distance is exact (largest
//! vertex-to-body distance). Otherwise `d_H = sup_u |h_K(u) - h_L(u)|` is
//! bracketed by branch and bound over a cube-surface net of directions: the
//! radial map from the cube surface to the sphere is 1-Lipschitz, so a cell's
//! half-diagonal bounds the chordal radius of its image and the support
//! difference is Lipschitz with constant `max|x| over K + max|x| over L`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{normalized, scale};

use super::body::{BodyKind, ConvexBody};
use super::project::distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffBracket {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct HausdorffOptions {
    /// Target bracket width relative to the circumradius bound.
    pub relative_resolution: f64,
    /// When positive, the target width is instead this fraction of the
    /// current lower bound (floored at 1e-12 of the scale), for distances
    /// that are small compared with the bodies.
    pub value_resolution: f64,
    pub max_evaluations: usize,
}

impl Default for HausdorffOptions {
    fn default() -> Self {
        Self {
            relative_resolution: 1e-4,
            value_resolution: 0.0,
            max_evaluations: 2_000_000,
        }
    }
}

impl HausdorffOptions {
    pub fn relative_to_value(fraction: f64) -> Self {
        Self {
            value_resolution: fraction,
            ..Self::default()
        }
    }

    fn tolerance(&self, scale: f64, best: f64) -> f64 {
        let abs = self.relative_resolution * scale;
        if self.value_resolution > 0.0 {
            abs.min((self.value_resolution * best).max(1e-12 * scale))
        } else {
            abs
        }
    }
}

/// Conservative Hausdorff distance (upper end of the certified bracket).
pub fn hausdorff_distance(k: &ConvexBody, l: &ConvexBody) -> Result<f64> {
    Ok(hausdorff_bracket(k, l, HausdorffOptions::default())?.hi)
}

pub fn hausdorff_bracket(
    k: &ConvexBody,
    l: &ConvexBody,
    opts: HausdorffOptions,
) -> Result<HausdorffBracket> {
    if k.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: l.dim(),
        });
    }
    if let (BodyKind::VPolytope { vertices: vk }, BodyKind::VPolytope { vertices: vl }) =
        (k.kind(), l.kind())
    {
        if k.outer_radius() == l.outer_radius() {
            let base_k = k.clone().with_outer_radius(0.0)?;
            let base_l = l.clone().with_outer_radius(0.0)?;
            let mut d = 0.0f64;
            for v in vk {
                d = d.max(distance(&base_l, v)?);
            }
            for v in vl {
                d = d.max(distance(&base_k, v)?);
            }
            return Ok(HausdorffBracket { lo: d, hi: d });
        }
    }
    support_net_bracket(k, l, opts)
}

#[derive(Debug)]
struct Cell {
    upper: f64,
    face: usize,
    sign: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

fn support_net_bracket(
    k: &ConvexBody,
    l: &ConvexBody,
    opts: HausdorffOptions,
) -> Result<HausdorffBracket> {
    let n = k.dim();
    let shift = scale(k.anchor(), -1.0);
    let kt = k.translated(&shift)?;
    let lt = l.translated(&shift)?;
    let lip = kt.max_norm_bound() + lt.max_norm_bound();
    let scale = kt.circumradius_bound().max(lt.circumradius_bound());

    let direction = |face: usize, sign: f64, lo: &[f64], hi: &[f64]| -> Vec<f64> {
        let mut y = Vec::with_capacity(n);
        let mut m = 0;
        for axis in 0..n {
            if axis == face {
                y.push(sign);
            } else {
                y.push(0.5 * (lo[m] + hi[m]));
                m += 1;
            }
        }
        normalized(&y).expect("cube surface point is nonzero")
    };
    let evals = std::cell::Cell::new(0usize);
    let eval = |u: &[f64]| -> Result<f64> {
        evals.set(evals.get() + 1);
        Ok((kt.support_function(u)? - lt.support_function(u)?).abs())
    };
    let radius = |lo: &[f64], hi: &[f64]| -> f64 {
        0.5 * lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let mut best = 0.0f64;
    let mut heap = BinaryHeap::new();
    for face in 0..n {
        for sign in [1.0, -1.0] {
            let lo = vec![-1.0; n - 1];
            let hi = vec![1.0; n - 1];
            let v = eval(&direction(face, sign, &lo, &hi))?;
            best = best.max(v);
            heap.push(Cell {
                upper: v + lip * radius(&lo, &hi),
                face,
                sign,
                lo,
                hi,
            });
        }
    }
    loop {
        let Some(cell) = heap.pop() else {
            return Ok(HausdorffBracket { lo: best, hi: best });
        };
        let tol = opts.tolerance(scale, best);
        if cell.upper - best <= tol {
            return Ok(HausdorffBracket {
                lo: best,
                hi: cell.upper.max(best),
            });
        }
        if evals.get() >= opts.max_evaluations {
            return Err(Error::ResolutionNotMet {
                lo: best,
                hi: cell.upper,
            });
        }
        let dims = n - 1;
        for mask in 0..1usize << dims {
            let mut lo = cell.lo.clone();
            let mut hi = cell.hi.clone();
            for d in 0..dims {
                let mid = 0.5 * (cell.lo[d] + cell.hi[d]);
                if mask >> d & 1 == 1 {
                    lo[d] = mid;
                } else {
                    hi[d] = mid;
                }
            }
            let v = eval(&direction(cell.face, cell.sign, &lo, &hi))?;
            best = best.max(v);
            let upper = v + lip * radius(&lo, &hi);
            if upper > best + opts.tolerance(scale, best) {
                heap.push(Cell {
                    upper,
                    face: cell.face,
                    sign: cell.sign,
                    lo,
                    hi,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::body::HalfSpace;
    use approx::assert_abs_diff_eq;

    #[test]
    fn translation_distance_is_shift_length() {
        let k = ConvexBody::unit_cube(3).unwrap();
        let t = [0.3, -0.4, 0.0];
        let l = k.translated(&t).unwrap();
        assert_abs_diff_eq!(hausdorff_distance(&k, &l).unwrap(), 0.5, epsilon = 1e-12);
        // same through the support-function net
        let b = ConvexBody::ball(vec![0.0; 3], 1.0).unwrap();
        let bt = b.translated(&t).unwrap();
        let br = hausdorff_bracket(&b, &bt, HausdorffOptions::default()).unwrap();
        assert!(br.lo <= 0.5 + 1e-12 && br.hi >= 0.5 - 1e-12);
        assert!(br.hi - 0.5 < 1e-3);
    }

    #[test]
    fn concentric_balls() {
        let a = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let b = ConvexBody::ball(vec![0.0, 0.0], 1.1).unwrap();
        let d = hausdorff_distance(&a, &b).unwrap();
        assert!(d >= 0.1 - 1e-12 && d <= 0.1 + 1e-3);
    }

    #[test]
    fn capped_disc_within_one_minus_cos() {
        let h: f64 = 0.3;
        let disc = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let cut = ConvexBody::ball_cut(
            vec![0.0, 0.0],
            1.0,
            vec![HalfSpace::new(vec![1.0, 0.0], h.cos()).unwrap()],
        )
        .unwrap();
        let br = hausdorff_bracket(&cut, &disc, HausdorffOptions::default()).unwrap();
        assert!(br.lo <= 1.0 - h.cos() + 1e-12);
        assert!(br.hi >= 1.0 - h.cos() - 1e-12);
        assert!(br.hi <= h * h);
    }

    #[test]
    fn symmetric() {
        let a =
            ConvexBody::vpolytope(vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![0.3, 0.9]]).unwrap();
        let b = ConvexBody::ball(vec![0.4, 0.4], 0.5).unwrap();
        let ab = hausdorff_bracket(&a, &b, HausdorffOptions::default()).unwrap();
        let ba = hausdorff_bracket(&b, &a, HausdorffOptions::default()).unwrap();
        assert!((ab.lo - ba.lo).abs() < 2e-4 && (ab.hi - ba.hi).abs() < 2e-4);
    }
}
