//! Exact support measures of balls and polytopes, discretized.
//!
//! For a ball, `Nor B = {(c + r u, u)}` and `Λ_i(B)` is `V_i(B)` times the
//! normalized spherical measure pushed to that set. For a polytope,
//!
//! `Λ_i(P, ·) = Σ_{F: dim F = i} ∫_F ∫_{N(P,F) ∩ S^{n-1}} 1{(x,u) ∈ ·} du dx / ω_{n-i}`,
//!
//! so each `i`-face contributes `H^i(F)` times its external angle, spread over
//! a grid on `F` and a net on the normal cone.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::constants::{ball_intrinsic_volume, binomial, kappa};
use crate::error::{Error, Result};
use crate::geometry::{BodyKind, ConvexBody, MAX_VERTICES};
use crate::vector::{dist, dot, normalized, sub};

use super::discrete::{DiscreteMeasure, SpaceTag};
use super::extract::MeasureFamily;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// `count` nearly uniform points on `S^{d-1}`, flat.
pub fn sphere_net(d: usize, count: usize) -> Vec<Vec<f64>> {
    let count = count.max(1);
    match d {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => (0..count)
            .map(|k| {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = GOLDEN_ANGLE * k as f64;
                vec![r * phi.cos(), r * phi.sin(), z]
            })
            .collect(),
        _ => {
            // Halton points pushed through Box–Muller
            const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];
            let pairs = d.div_ceil(2);
            assert!(2 * pairs <= PRIMES.len(), "sphere net dimension {d}");
            (0..count)
                .map(|k| {
                    let idx = k as u64 + 1;
                    let mut g = Vec::with_capacity(2 * pairs);
                    for p in 0..pairs {
                        let u1 = crate::geometry::sampling::radical_inverse(idx, PRIMES[2 * p]);
                        let u2 = crate::geometry::sampling::radical_inverse(idx, PRIMES[2 * p + 1]);
                        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
                        g.push(r * (2.0 * PI * u2).cos());
                        g.push(r * (2.0 * PI * u2).sin());
                    }
                    g.truncate(d);
                    normalized(&g).unwrap_or_else(|| crate::vector::unit(d, 0))
                })
                .collect()
        }
    }
}

/// `Λ_i` of a ball on a net of `count` normals, each with weight
/// `V_i(B)/count`.
pub fn ball_support_measure_exact(
    ball: &ConvexBody,
    i: usize,
    count: usize,
) -> Result<DiscreteMeasure> {
    let BodyKind::Ball { center, radius } = ball.kind() else {
        return Err(Error::InvalidBody("ball oracle needs a ball".into()));
    };
    let n = ball.dim();
    if i >= n {
        return Err(Error::Config(format!("index {i} out of range for n = {n}")));
    }
    let r = radius + ball.outer_radius();
    let net = sphere_net(n, count);
    let w = ball_intrinsic_volume(n, i, r) / net.len() as f64;
    let mut coords = Vec::with_capacity(net.len() * 2 * n);
    for u in &net {
        coords.extend(center.iter().zip(u).map(|(c, x)| c + r * x));
        coords.extend_from_slice(u);
    }
    DiscreteMeasure::new(SpaceTag::SigmaN, n, coords, vec![w; net.len()])
}

/// All exact `Λ_i` of a ball, as a family.
pub fn ball_family_exact(ball: &ConvexBody, count: usize) -> Result<Vec<DiscreteMeasure>> {
    (0..ball.dim())
        .map(|i| ball_support_measure_exact(ball, i, count))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marginal {
    /// `Ψ_i = Λ_i(K, R^n × ·)`.
    Psi,
    /// `S_i = n κ_{n-i} / C(n,i) · Ψ_i`.
    AreaMeasure,
    /// `S_{n-1} = 2 Ψ_{n-1}`; only for `i = n - 1`.
    SurfaceArea,
}

/// Drops the position slot and rescales per the convention.
pub fn sphere_marginal(
    mu: &DiscreteMeasure,
    i: usize,
    convention: Marginal,
) -> Result<DiscreteMeasure> {
    if mu.tag() != SpaceTag::SigmaN {
        return Err(Error::SpaceMismatch);
    }
    let n = mu.dim();
    let factor = match convention {
        Marginal::Psi => 1.0,
        Marginal::AreaMeasure => n as f64 * kappa(n - i) / binomial(n, i),
        Marginal::SurfaceArea => {
            if i + 1 != n {
                return Err(Error::Config(format!(
                    "surface-area convention needs i = n - 1, got i = {i}"
                )));
            }
            2.0
        }
    };
    let mut coords = Vec::with_capacity(mu.len() * n);
    for k in 0..mu.len() {
        coords.extend_from_slice(&mu.point(k)[n..]);
    }
    let weights = mu.weights().iter().map(|w| w * factor).collect();
    let m = DiscreteMeasure::new(SpaceTag::Sphere, n, coords, weights)?;
    match mu.labels() {
        Some(l) => m.with_replicates(std::sync::Arc::new(l.to_vec()), mu.replicates()),
        None => Ok(m),
    }
}

/// Sphere marginals `Ψ_i` of every member of a family.
pub fn psi_family(f: &MeasureFamily) -> Result<Vec<DiscreteMeasure>> {
    f.lambdas
        .iter()
        .enumerate()
        .map(|(i, m)| sphere_marginal(m, i, Marginal::Psi))
        .collect()
}

/// Face of a polytope: vertex indices, dimension, and the facets (in the
/// affine hull) that contain it.
#[derive(Debug, Clone)]
struct Face {
    verts: Vec<usize>,
    dim: usize,
    facets: Vec<usize>,
}

struct Lattice {
    n: usize,
    k: usize,
    vertices: Vec<Vec<f64>>,
    /// Orthonormal basis of its complement (n - k rows).
    complement: Vec<Vec<f64>>,
    /// Outer facet normals in R^n (inside the hull directions).
    facet_normals: Vec<Vec<f64>>,
    faces: Vec<Face>,
}

fn rank_basis(rows: &[Vec<f64>], n: usize, tol: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    // right singular vectors split into row space and null space
    if rows.is_empty() {
        return (
            Vec::new(),
            (0..n).map(|k| crate::vector::unit(n, k)).collect(),
        );
    }
    let mut m = DMatrix::zeros(rows.len().max(n), n);
    for (r, row) in rows.iter().enumerate() {
        for c in 0..n {
            m[(r, c)] = row[c];
        }
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut span = Vec::new();
    let mut null = Vec::new();
    for &j in &order {
        let v: Vec<f64> = (0..n).map(|c| vt[(j, c)]).collect();
        if svd.singular_values[j] > tol {
            span.push(v);
        } else {
            null.push(v);
        }
    }
    (span, null)
}

fn affine_dim(points: &[&Vec<f64>], n: usize, tol: f64) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let rows: Vec<Vec<f64>> = points[1..].iter().map(|p| sub(p, points[0])).collect();
    rank_basis(&rows, n, tol).0.len()
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..m {
            cur.push(j);
            rec(j + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

impl Lattice {
    fn new(body: &ConvexBody) -> Result<Self> {
        let BodyKind::VPolytope { vertices } = body.kind() else {
            return Err(Error::InvalidBody(
                "polytope oracle needs a V-polytope".into(),
            ));
        };
        if body.outer_radius() != 0.0 {
            return Err(Error::InvalidBody(
                "polytope oracle needs outer radius 0".into(),
            ));
        }
        let n = body.dim();
        if n > 3 {
            return Err(Error::FaceEnumerationOverflow {
                limit: 3,
                what: "dimension".into(),
            });
        }
        if vertices.len() > MAX_VERTICES {
            return Err(Error::FaceEnumerationOverflow {
                limit: MAX_VERTICES,
                what: "vertices".into(),
            });
        }
        let mut verts: Vec<Vec<f64>> = Vec::new();
        for v in vertices {
            if !verts.iter().any(|w| dist(w, v) <= 1e-12) {
                verts.push(v.clone());
            }
        }
        let scale = verts
            .iter()
            .flat_map(|v| v.iter())
            .fold(1.0f64, |m, x| m.max(x.abs()));
        let tol = 1e-9 * scale;
        let rows: Vec<Vec<f64>> = verts[1..].iter().map(|v| sub(v, &verts[0])).collect();
        let (hull, complement) = rank_basis(&rows, n, tol);
        let k = hull.len();
        let local: Vec<Vec<f64>> = verts
            .iter()
            .map(|v| {
                let d = sub(v, &verts[0]);
                hull.iter().map(|b| dot(b, &d)).collect()
            })
            .collect();

        // facets of the k-dimensional polytope by brute force over k-subsets
        let mut facet_sets: Vec<Vec<usize>> = Vec::new();
        let mut facet_normals: Vec<Vec<f64>> = Vec::new();
        let push_facet = |a_local: Vec<f64>,
                          facet_sets: &mut Vec<Vec<usize>>,
                          facet_normals: &mut Vec<Vec<f64>>| {
            let Some(a) = normalized(&a_local) else {
                return;
            };
            let vals: Vec<f64> = local.iter().map(|y| dot(&a, y)).collect();
            let top = vals.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let set: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] >= top - tol).collect();
            if affine_dim(&set.iter().map(|&j| &local[j]).collect::<Vec<_>>(), k, tol) + 1 != k {
                return;
            }
            if facet_sets.contains(&set) {
                return;
            }
            facet_sets.push(set);
            let lifted: Vec<f64> = (0..n)
                .map(|c| hull.iter().zip(&a).map(|(b, ai)| b[c] * ai).sum())
                .collect();
            facet_normals.push(lifted);
        };
        match k {
            0 => {}
            1 => {
                push_facet(vec![1.0], &mut facet_sets, &mut facet_normals);
                push_facet(vec![-1.0], &mut facet_sets, &mut facet_normals);
            }
            _ => {
                for subset in combinations(local.len(), k) {
                    let base = &local[subset[0]];
                    let diffs: Vec<Vec<f64>> =
                        subset[1..].iter().map(|&j| sub(&local[j], base)).collect();
                    let normal = match k {
                        2 => vec![-diffs[0][1], diffs[0][0]],
                        _ => vec![
                            diffs[0][1] * diffs[1][2] - diffs[0][2] * diffs[1][1],
                            diffs[0][2] * diffs[1][0] - diffs[0][0] * diffs[1][2],
                            diffs[0][0] * diffs[1][1] - diffs[0][1] * diffs[1][0],
                        ],
                    };
                    if crate::vector::norm(&normal) <= tol * tol {
                        continue;
                    }
                    let vals: Vec<f64> =
                        local.iter().map(|y| dot(&normal, &sub(y, base))).collect();
                    let nn = crate::vector::norm(&normal);
                    if vals.iter().all(|&v| v <= tol * nn) {
                        push_facet(normal, &mut facet_sets, &mut facet_normals);
                    } else if vals.iter().all(|&v| v >= -tol * nn) {
                        push_facet(
                            normal.iter().map(|x| -x).collect(),
                            &mut facet_sets,
                            &mut facet_normals,
                        );
                    }
                }
            }
        }

        // faces: closure of facets under intersection, plus the polytope
        let mut seen: BTreeSet<Vec<usize>> = facet_sets.iter().cloned().collect();
        let all: Vec<usize> = (0..verts.len()).collect();
        seen.insert(all);
        loop {
            let cur: Vec<Vec<usize>> = seen.iter().cloned().collect();
            let mut added = false;
            for a in 0..cur.len() {
                for b in a + 1..cur.len() {
                    let inter: Vec<usize> = cur[a]
                        .iter()
                        .copied()
                        .filter(|x| cur[b].contains(x))
                        .collect();
                    if !inter.is_empty() && seen.insert(inter) {
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
            if seen.len() > 100_000 {
                return Err(Error::FaceEnumerationOverflow {
                    limit: 100_000,
                    what: "faces".into(),
                });
            }
        }
        let faces = seen
            .into_iter()
            .map(|set| {
                let pts: Vec<&Vec<f64>> = set.iter().map(|&j| &verts[j]).collect();
                let dim = affine_dim(&pts, n, tol);
                let facets = (0..facet_sets.len())
                    .filter(|&f| set.iter().all(|j| facet_sets[f].contains(j)))
                    .collect();
                Face {
                    verts: set,
                    dim,
                    facets,
                }
            })
            .collect();
        Ok(Self {
            n,
            k,
            vertices: verts,
            complement,
            facet_normals,
            faces,
        })
    }

    /// External angle of a face: the normalized measure of its normal cone.
    fn external_angle(&self, face: &Face) -> f64 {
        let gens: Vec<&Vec<f64>> = face
            .facets
            .iter()
            .map(|&f| &self.facet_normals[f])
            .collect();
        match self.k - face.dim {
            0 => 1.0,
            1 => 0.5,
            2 => {
                let r = normalized(
                    &gens
                        .iter()
                        .fold(vec![0.0; self.n], |acc, g| crate::vector::add(&acc, g)),
                )
                .expect("pointed cone");
                let other = gens
                    .iter()
                    .map(|g| crate::vector::axpy(g, -dot(g, &r), &r))
                    .find(|v| crate::vector::norm(v) > 1e-9)
                    .and_then(|v| normalized(&v));
                let Some(e2) = other else { return 0.0 };
                let angles: Vec<f64> = gens.iter().map(|g| dot(g, &e2).atan2(dot(g, &r))).collect();
                let lo = angles.iter().fold(f64::INFINITY, |m, &a| m.min(a));
                let hi = angles.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a));
                (hi - lo) / (2.0 * PI)
            }
            _ => solid_angle(&gens) / (4.0 * PI),
        }
    }

    /// Orthonormal basis of the linear span of the normal cone.
    fn cone_span(&self, face: &Face) -> Vec<Vec<f64>> {
        let mut rows: Vec<Vec<f64>> = face
            .facets
            .iter()
            .map(|&f| self.facet_normals[f].clone())
            .collect();
        rows.extend(self.complement.iter().cloned());
        rank_basis(&rows, self.n, 1e-9).0
    }

    fn in_cone(&self, face: &Face, u: &[f64]) -> bool {
        let x0 = &self.vertices[face.verts[0]];
        let h = dot(u, x0);
        self.vertices.iter().all(|v| dot(u, v) <= h + 1e-10)
    }

    /// Points with weights summing to `H^dim(F)`.
    fn face_grid(&self, face: &Face, mesh: f64) -> Vec<(Vec<f64>, f64)> {
        let pts: Vec<&Vec<f64>> = face.verts.iter().map(|&j| &self.vertices[j]).collect();
        match face.dim {
            0 => vec![(pts[0].clone(), 1.0)],
            1 => {
                let (mut a, mut b, mut best) = (0, 0, -1.0);
                for x in 0..pts.len() {
                    for y in x + 1..pts.len() {
                        let d = dist(pts[x], pts[y]);
                        if d > best {
                            (a, b, best) = (x, y, d);
                        }
                    }
                }
                let m = ((best / mesh).ceil() as usize).max(1);
                (0..m)
                    .map(|s| {
                        let t = (s as f64 + 0.5) / m as f64;
                        let p = pts[a]
                            .iter()
                            .zip(pts[b])
                            .map(|(x, y)| x + t * (y - x))
                            .collect();
                        (p, best / m as f64)
                    })
                    .collect()
            }
            _ => {
                let c: Vec<f64> = (0..self.n)
                    .map(|d| pts.iter().map(|p| p[d]).sum::<f64>() / pts.len() as f64)
                    .collect();
                let rows: Vec<Vec<f64>> = pts.iter().map(|p| sub(p, &c)).collect();
                let (plane, _) = rank_basis(&rows, self.n, 1e-9);
                let mut ring: Vec<(f64, &Vec<f64>)> = pts
                    .iter()
                    .map(|p| {
                        let d = sub(p, &c);
                        (dot(&d, &plane[1]).atan2(dot(&d, &plane[0])), *p)
                    })
                    .collect();
                ring.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut out = Vec::new();
                for t in 1..ring.len() - 1 {
                    triangle_grid(ring[0].1, ring[t].1, ring[t + 1].1, mesh, &mut out);
                }
                out
            }
        }
    }
}

fn triangle_grid(a: &[f64], b: &[f64], c: &[f64], mesh: f64, out: &mut Vec<(Vec<f64>, f64)>) {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let cr = [
        ab[1] * ac[2] - ab[2] * ac[1],
        ab[2] * ac[0] - ab[0] * ac[2],
        ab[0] * ac[1] - ab[1] * ac[0],
    ];
    let area = 0.5 * crate::vector::norm(&cr);
    if area <= 0.0 {
        return;
    }
    let longest = dist(a, b).max(dist(a, c)).max(dist(b, c));
    let m = ((longest / mesh).ceil() as usize).max(1);
    let w = area / (m * m) as f64;
    let mf = m as f64;
    let at = |s: f64, t: f64| -> Vec<f64> {
        (0..a.len())
            .map(|d| a[d] + s / mf * ab[d] + t / mf * ac[d])
            .collect()
    };
    for s in 0..m {
        for t in 0..m - s {
            out.push((at(s as f64 + 1.0 / 3.0, t as f64 + 1.0 / 3.0), w));
            if s + t + 2 <= m {
                out.push((at(s as f64 + 2.0 / 3.0, t as f64 + 2.0 / 3.0), w));
            }
        }
    }
}

/// Solid angle of the pointed cone spanned by unit vectors in R^3.
fn solid_angle(gens: &[&Vec<f64>]) -> f64 {
    let r = normalized(
        &gens
            .iter()
            .fold(vec![0.0; 3], |acc, g| crate::vector::add(&acc, g)),
    )
    .expect("pointed");
    let seed = gens
        .iter()
        .map(|g| crate::vector::axpy(g, -dot(g, &r), &r))
        .find(|v| crate::vector::norm(v) > 1e-9)
        .and_then(|v| normalized(&v))
        .expect("spanning cone");
    let e2 = [
        r[1] * seed[2] - r[2] * seed[1],
        r[2] * seed[0] - r[0] * seed[2],
        r[0] * seed[1] - r[1] * seed[0],
    ];
    let mut ring: Vec<(f64, &Vec<f64>)> = gens
        .iter()
        .map(|g| (dot(g, &e2).atan2(dot(g, &seed)), *g))
        .collect();
    ring.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut omega = 0.0;
    for t in 1..ring.len().saturating_sub(1) {
        let (a, b, c) = (ring[0].1, ring[t].1, ring[t + 1].1);
        let triple = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]);
        let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
        omega += 2.0 * triple.abs().atan2(den);
    }
    omega
}

/// `Λ_i` of a V-polytope (`n <= 3`): each `i`-face gridded at spacing `mesh`,
/// its normal cone covered by a net of about the same angular spacing.
pub fn polytope_support_measure_exact(
    p: &ConvexBody,
    i: usize,
    mesh: f64,
) -> Result<DiscreteMeasure> {
    if !(mesh > 0.0) {
        return Err(Error::Config(format!("mesh {mesh}")));
    }
    let lat = Lattice::new(p)?;
    let n = lat.n;
    if i >= n {
        return Err(Error::Config(format!("index {i} out of range for n = {n}")));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for face in lat.faces.iter().filter(|f| f.dim == i) {
        let gamma = lat.external_angle(face);
        if gamma <= 0.0 {
            continue;
        }
        let basis = lat.cone_span(face);
        let d = basis.len();
        let count = match d {
            2 => (2.0 * PI / mesh).ceil() as usize,
            3 => (4.0 * PI / (mesh * mesh)).ceil() as usize,
            _ => 2,
        };
        let mut dirs: Vec<Vec<f64>> = sphere_net(d, count)
            .into_iter()
            .map(|z| {
                (0..n)
                    .map(|c| basis.iter().zip(&z).map(|(b, zk)| b[c] * zk).sum())
                    .collect()
            })
            .filter(|u: &Vec<f64>| lat.in_cone(face, u))
            .collect();
        if dirs.is_empty() {
            let s = face.facets.iter().fold(vec![0.0; n], |acc, &f| {
                crate::vector::add(&acc, &lat.facet_normals[f])
            });
            dirs.push(normalized(&s).unwrap_or_else(|| basis[0].clone()));
        }
        let grid = lat.face_grid(face, mesh);
        let wd = gamma / dirs.len() as f64;
        for (x, wx) in &grid {
            for u in &dirs {
                coords.extend_from_slice(x);
                coords.extend_from_slice(u);
                weights.push(wx * wd);
            }
        }
    }
    DiscreteMeasure::new(SpaceTag::SigmaN, n, coords, weights)
}

/// Intrinsic volumes `V_0 … V_{n-1}` of a V-polytope from its face lattice.
pub fn polytope_intrinsic_volumes(p: &ConvexBody) -> Result<Vec<f64>> {
    let lat = Lattice::new(p)?;
    let mut v = vec![0.0; lat.n];
    for face in &lat.faces {
        if face.dim < lat.n {
            let size: f64 = lat
                .face_grid(face, f64::INFINITY)
                .iter()
                .map(|(_, w)| w)
                .sum();
            v[face.dim] += size * lat.external_angle(face);
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube3() -> ConvexBody {
        ConvexBody::unit_cube(3).unwrap()
    }

    #[test]
    fn cube_intrinsic_volumes() {
        let v = polytope_intrinsic_volumes(&cube3()).unwrap();
        for (a, b) in v.iter().zip([1.0, 3.0, 3.0]) {
            assert!((a - b).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn cube_facets_give_half_mass_per_normal() {
        let m = polytope_support_measure_exact(&cube3(), 2, 0.25).unwrap();
        assert!((m.total_mass() - 3.0).abs() < 1e-12);
        let s = sphere_marginal(&m, 2, Marginal::Psi).unwrap();
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mass: f64 = (0..s.len())
                    .filter(|&k| (s.point(k)[axis] - sign).abs() < 1e-12)
                    .map(|k| s.weight(k))
                    .sum();
                assert!((mass - 0.5).abs() < 1e-12);
            }
        }
        let area = sphere_marginal(&m, 2, Marginal::SurfaceArea).unwrap();
        assert!((area.total_mass() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn square_corners_carry_quarter_mass() {
        let sq = ConvexBody::unit_cube(2).unwrap();
        let m = polytope_support_measure_exact(&sq, 0, 0.1).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        for corner in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let mass: f64 = (0..m.len())
                .filter(|&k| m.point(k)[..2] == corner)
                .map(|k| m.weight(k))
                .sum();
            assert!((mass - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_length_on_two_normals() {
        let seg = ConvexBody::vpolytope(vec![vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let m = polytope_support_measure_exact(&seg, 1, 0.5).unwrap();
        assert!((m.total_mass() - 2.0).abs() < 1e-12);
        let s = sphere_marginal(&m, 1, Marginal::Psi).unwrap();
        for k in 0..s.len() {
            assert!(s.point(k)[0].abs() < 1e-12 && (s.point(k)[1].abs() - 1.0).abs() < 1e-12);
        }
        let v = polytope_intrinsic_volumes(&seg).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_angles_sum_to_one() {
        let t = ConvexBody::vpolytope(vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let v = polytope_intrinsic_volumes(&t).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12, "{v:?}");
        // surface area / 2
        let area = 1.5 + 3f64.sqrt() / 2.0;
        assert!((v[2] - area / 2.0).abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn flat_polygon_in_space() {
        let sq = ConvexBody::vpolytope(vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let v = polytope_intrinsic_volumes(&sq).unwrap();
        for (a, b) in v.iter().zip([1.0, 2.0, 1.0]) {
            assert!((a - b).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let c4 = ConvexBody::unit_cube(4).unwrap();
        assert!(matches!(
            polytope_support_measure_exact(&c4, 1, 0.5),
            Err(Error::FaceEnumerationOverflow { .. })
        ));
    }

    #[test]
    fn ball_oracle_masses() {
        let b = ConvexBody::ball(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        let l2 = ball_support_measure_exact(&b, 2, 1000).unwrap();
        let s = sphere_marginal(&l2, 2, Marginal::SurfaceArea).unwrap();
        assert!((s.total_mass() - 4.0 * PI).abs() < 1e-12);
        let d = ConvexBody::ball(vec![1.0, 2.0], 0.5).unwrap();
        let l1 = ball_support_measure_exact(&d, 1, 64).unwrap();
        assert!((l1.total_mass() - PI * 0.5).abs() < 1e-12);
        let l0 = ball_support_measure_exact(&d, 0, 64).unwrap();
        assert!((l0.total_mass() - 1.0).abs() < 1e-12);
        // atoms sit on the sphere with their own normal
        for k in 0..l0.len() {
            let p = l0.point(k);
            assert!(((p[0] - 1.0) - 0.5 * p[2]).abs() < 1e-15);
        }
    }

    #[test]
    fn area_conventions_agree_at_top_index() {
        let b = ConvexBody::ball(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        let l2 = ball_support_measure_exact(&b, 2, 100).unwrap();
        let s = sphere_marginal(&l2, 2, Marginal::AreaMeasure).unwrap();
        let t = sphere_marginal(&l2, 2, Marginal::SurfaceArea).unwrap();
        assert!((s.total_mass() - t.total_mass()).abs() < 1e-12);
        assert!(sphere_marginal(&l2, 1, Marginal::SurfaceArea).is_err());
    }

    #[test]
    fn empty_marginal_is_empty() {
        let m = DiscreteMeasure::empty(SpaceTag::SigmaN, 2);
        assert!(sphere_marginal(&m, 1, Marginal::Psi).unwrap().is_empty());
    }

    #[test]
    fn sphere_nets_are_unit() {
        for d in 1..=6 {
            for u in sphere_net(d, 50) {
                assert!((crate::vector::norm(&u) - 1.0).abs() < 1e-12);
            }
        }
    }
}
