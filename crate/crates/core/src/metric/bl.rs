//! Bounded-Lipschitz and total-variation distances between discrete measures.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::discrete::{compensated_sum, DiscreteMeasure};
use crate::vector::dist;

use super::simplex::{lp_solve, LpProblem, LpSolution, Relation};
use super::transport::{solve_transport, CAP};

/// Tolerance for the independent witness check.
pub const WITNESS_TOL: f64 = 1e-9;

/// A function on the merged support with `|f| <= 1` and `|f(a)-f(b)| <= d(a,b)`.
#[derive(Debug, Clone)]
pub struct LipschitzWitness {
    pub stride: usize,
    /// Flat coordinates of the support points.
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    /// `Σ f(a)·c(a)` for the signed difference `c`.
    pub objective: f64,
}

/// Outcome of re-checking a witness outside the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessCheck {
    /// Largest `|f(a)| - 1`, clamped at 0.
    pub sup_violation: f64,
    /// Largest `|f(a) - f(b)| - d(a,b)`, clamped at 0.
    pub lipschitz_violation: f64,
    /// `Σ f·c` recomputed from the masses.
    pub pairing: f64,
}

impl WitnessCheck {
    pub fn feasible(&self) -> bool {
        self.sup_violation <= WITNESS_TOL && self.lipschitz_violation <= WITNESS_TOL
    }
}

impl LipschitzWitness {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.stride..(k + 1) * self.stride]
    }

    /// Checks every constraint of the bounded-Lipschitz class on all pairs.
    pub fn check(&self, masses: &[f64]) -> WitnessCheck {
        let mut sup = 0.0f64;
        let mut lip = 0.0f64;
        for a in 0..self.len() {
            sup = sup.max(self.values[a].abs() - 1.0);
            for b in a + 1..self.len() {
                let d = dist(self.point(a), self.point(b));
                lip = lip.max((self.values[a] - self.values[b]).abs() - d);
            }
        }
        WitnessCheck {
            sup_violation: sup.max(0.0),
            lipschitz_violation: lip.max(0.0),
            pairing: compensated_sum(self.values.iter().zip(masses).map(|(f, c)| f * c)),
        }
    }
}

impl LipschitzWitness {
    /// McShane extension `min_k (f_k + d(x, p_k))`, clamped to `[-1, 1]`:
    /// bounded-Lipschitz on the whole space and equal to the witness on its
    /// points.
    pub fn extend(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..self.len() {
            best = best.min(self.values[k] + dist(x, self.point(k)));
        }
        best.clamp(-1.0, 1.0)
    }
}

fn bits_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Exact distance with its certificate.
#[derive(Debug, Clone)]
pub struct BlReport {
    pub value: f64,
    pub witness: LipschitzWitness,
    /// Signed masses on the witness support.
    pub masses: Vec<f64>,
    /// Primal transport cost minus the witness pairing.
    pub duality_gap: f64,
    pub check: WitnessCheck,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BlOptions {
    /// Largest merged support handed to the exact solver.
    pub max_atoms: usize,
    /// Atoms closer than this are merged.
    pub merge_tol: f64,
}

impl Default for BlOptions {
    fn default() -> Self {
        Self {
            max_atoms: 4000,
            merge_tol: 1e-12,
        }
    }
}

/// Signed difference `μ - ν` with atoms closer than `tol` merged, and zero
/// atoms dropped. Returns flat coordinates and masses.
pub fn merged_difference(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = mu.difference(nu)?.canonicalized();
    let s = c.stride();
    let mut pts: Vec<f64> = Vec::new();
    let mut w: Vec<f64> = Vec::new();
    let mut run: Vec<f64> = Vec::new();
    let flush = |pts: &mut Vec<f64>, w: &mut Vec<f64>, run: &mut Vec<f64>, at: &[f64]| {
        if !run.is_empty() {
            let m = compensated_sum(run.drain(..));
            if m != 0.0 {
                pts.extend_from_slice(at);
                w.push(m);
            }
        }
    };
    let mut head: Vec<f64> = Vec::new();
    for k in 0..c.len() {
        let p = c.point(k);
        if !run.is_empty() && dist(&head, p) > tol {
            let h = std::mem::take(&mut head);
            flush(&mut pts, &mut w, &mut run, &h);
        }
        if run.is_empty() {
            head = p.to_vec();
        }
        run.push(c.weight(k));
    }
    let h = head;
    flush(&mut pts, &mut w, &mut run, &h);
    debug_assert_eq!(pts.len(), w.len() * s);
    Ok((pts, w))
}

/// `d_bL(μ, ν)` with a witness, under the default atom cap.
pub fn bounded_lipschitz_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(f64, LipschitzWitness)> {
    let r = bounded_lipschitz_report(mu, nu, &BlOptions::default())?;
    Ok((r.value, r.witness))
}

pub fn bounded_lipschitz_report(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &BlOptions,
) -> Result<BlReport> {
    let (pts, w) = merged_difference(mu, nu, opts.merge_tol)?;
    if w.len() > opts.max_atoms {
        return Err(Error::TooManyAtoms {
            count: w.len(),
            cap: opts.max_atoms,
        });
    }
    signed_bl(mu.stride(), pts, w)
}

/// Exact `d_bL` of a signed measure given as flat points and masses.
pub fn signed_bl(stride: usize, points: Vec<f64>, masses: Vec<f64>) -> Result<BlReport> {
    let mut src = Vec::new();
    let mut supply = Vec::new();
    let mut snk = Vec::new();
    let mut demand = Vec::new();
    for (k, &c) in masses.iter().enumerate() {
        let p = &points[k * stride..(k + 1) * stride];
        if c > 0.0 {
            src.extend_from_slice(p);
            supply.push(c);
        } else if c < 0.0 {
            snk.extend_from_slice(p);
            demand.push(-c);
        }
    }
    let sol = solve_transport(stride, &src, &supply, &snk, &demand)?;
    let q = demand.len();
    let p = supply.len();
    let pi_snk = &sol.potentials[p..p + q];

    // c-transform over sinks and ground, shifted so that ground sits at 0
    let psi = |x: &[f64]| -> f64 {
        let mut v = 1.0f64;
        for (b, pb) in pi_snk.iter().enumerate() {
            let d = dist(x, &snk[b * stride..(b + 1) * stride]).min(CAP);
            v = v.min(pb + d);
        }
        v
    };
    let psi_g = pi_snk.iter().fold(0.0f64, |m, pb| m.min(pb + 1.0));
    let values: Vec<f64> = (0..masses.len())
        .map(|k| psi(&points[k * stride..(k + 1) * stride]) - psi_g)
        .collect();
    let objective = compensated_sum(values.iter().zip(&masses).map(|(f, c)| f * c));
    let witness = LipschitzWitness {
        stride,
        points,
        values,
        objective,
    };
    let check = witness.check(&masses);
    if !check.feasible() {
        return Err(Error::ConvergenceFailure {
            iterations: sol.pivots,
        });
    }
    Ok(BlReport {
        value: sol.cost,
        duality_gap: (sol.cost - check.pairing).abs(),
        witness,
        masses,
        check,
        pivots: sol.pivots,
    })
}

/// The same distance as an explicit dense LP over `f`, solved by the
/// general simplex. Quadratic in the support size; for cross-checks.
pub fn bounded_lipschitz_dense(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(f64, LipschitzWitness, LpSolution)> {
    let (pts, w) = merged_difference(mu, nu, 1e-12)?;
    let problem = bounded_lipschitz_lp(mu.stride(), &pts, &w);
    let sol = lp_solve(&problem)?;
    let witness = LipschitzWitness {
        stride: mu.stride(),
        points: pts,
        values: sol.x.clone(),
        objective: sol.objective,
    };
    Ok((sol.objective, witness, sol))
}

/// `max Σ f(a)c(a)` subject to `-1 <= f <= 1` and `f(a) - f(b) <= d(a,b)`.
pub fn bounded_lipschitz_lp(stride: usize, points: &[f64], masses: &[f64]) -> LpProblem {
    let m = masses.len();
    let mut lp = LpProblem::new(masses.to_vec());
    lp.bounds = vec![(-1.0, 1.0); m];
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let d = dist(
                &points[a * stride..(a + 1) * stride],
                &points[b * stride..(b + 1) * stride],
            );
            if d >= CAP {
                continue;
            }
            let mut row = vec![0.0; m];
            row[a] = 1.0;
            row[b] = -1.0;
            lp.add(row, Relation::Le, d);
        }
    }
    lp
}

pub fn total_variation_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let (_, w) = merged_difference(mu, nu, 1e-12)?;
    Ok(compensated_sum(w.iter().map(|c| c.abs())))
}

/// Grid aggregation of a signed atom list.
#[derive(Debug, Clone)]
pub struct Coarsened {
    pub cell: f64,
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
    /// `Σ |w|·min(|a - rep(a)|, 2)`: bounds the change in `d_bL`.
    pub error_bound: f64,
}

/// Aggregates atoms into cubic cells of side `cell`, each represented by
/// its centre.
pub fn coarsen(stride: usize, points: &[f64], masses: &[f64], cell: f64) -> Coarsened {
    let mut cells: HashMap<Vec<i64>, (f64, f64, usize)> = HashMap::new();
    let mut order = Vec::new();
    let mut err_terms = Vec::with_capacity(masses.len());
    let mut key = vec![0i64; stride];
    let mut centre = vec![0.0; stride];
    for (k, &w) in masses.iter().enumerate() {
        let p = &points[k * stride..(k + 1) * stride];
        for d in 0..stride {
            key[d] = (p[d] / cell).floor() as i64;
            centre[d] = (key[d] as f64 + 0.5) * cell;
        }
        err_terms.push(w.abs() * dist(p, &centre).min(CAP));
        let next = order.len();
        let e = cells.entry(key.clone()).or_insert((0.0, 0.0, next));
        if e.2 == next {
            order.push(key.clone());
        }
        // two-term compensation keeps cancelling sums exact enough
        let t = e.0 + w;
        e.1 += if e.0.abs() >= w.abs() {
            (e.0 - t) + w
        } else {
            (w - t) + e.0
        };
        e.0 = t;
    }
    let mut out_pts = Vec::with_capacity(order.len() * stride);
    let mut out_w = Vec::with_capacity(order.len());
    for key in &order {
        let (s, c, _) = cells[key];
        let m = s + c;
        if m != 0.0 {
            out_pts.extend(key.iter().map(|&i| (i as f64 + 0.5) * cell));
            out_w.push(m);
        }
    }
    Coarsened {
        cell,
        points: out_pts,
        masses: out_w,
        error_bound: compensated_sum(err_terms),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoarseOptions {
    pub max_atoms: usize,
    /// First cell size tried; zero means start from the exact support.
    pub initial_cell: f64,
    /// Factor by which the cell grows until the atom cap is met.
    pub growth: f64,
}

impl Default for CoarseOptions {
    fn default() -> Self {
        Self {
            max_atoms: 4000,
            initial_cell: 0.0,
            growth: 1.2,
        }
    }
}

/// A distance computed on a coarsened support.
#[derive(Debug, Clone)]
pub struct CoarseReport {
    pub report: BlReport,
    /// Zero when no coarsening was needed.
    pub cell: f64,
    pub coarsening_error: f64,
    pub fine_atoms: usize,
}

impl CoarseReport {
    pub fn value(&self) -> f64 {
        self.report.value
    }
}

impl CoarseReport {
    /// The witness as seen by a fine atom: its value at the atom's cell
    /// centre when the support was coarsened, at the atom itself otherwise,
    /// and the McShane extension where neither is a witness point.
    pub fn witness_evaluator(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        let w = &self.report.witness;
        let index: HashMap<Vec<u64>, f64> = (0..w.len())
            .map(|k| (bits_key(w.point(k)), w.values[k]))
            .collect();
        let cell = self.cell;
        move |x: &[f64]| {
            let key = if cell > 0.0 {
                x.iter()
                    .map(|v| (((v / cell).floor() as i64) as f64 + 0.5) * cell)
                    .map(f64::to_bits)
                    .collect()
            } else {
                bits_key(x)
            };
            match index.get(&key) {
                Some(&v) => v,
                None => w.extend(x),
            }
        }
    }
}

/// Replicate standard error of the witness pairing `∫ f d(μ - ν)`.
pub fn witness_pairing_stderr(report: &CoarseReport, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let f = report.witness_evaluator();
    let a = mu.replicate_integrals(&f);
    let b = nu.replicate_integrals(&f);
    if a.len() != b.len() {
        return f64::NAN;
    }
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    crate::measures::discrete::stderr(&diff)
}

/// `d_bL(μ, ν)` after aggregating the difference on the finest grid that
/// brings the support under the atom cap, with the disclosed error bound.
pub fn coarse_bounded_lipschitz(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &CoarseOptions,
) -> Result<CoarseReport> {
    let (pts, w) = merged_difference(mu, nu, 1e-12)?;
    coarse_signed_bl(mu.stride(), &pts, &w, opts)
}

pub fn coarse_signed_bl(
    stride: usize,
    pts: &[f64],
    w: &[f64],
    opts: &CoarseOptions,
) -> Result<CoarseReport> {
    let fine_atoms = w.len();
    if fine_atoms <= opts.max_atoms && opts.initial_cell <= 0.0 {
        return Ok(CoarseReport {
            report: signed_bl(stride, pts.to_vec(), w.to_vec())?,
            cell: 0.0,
            coarsening_error: 0.0,
            fine_atoms,
        });
    }
    let growth = opts.growth.max(1.01);
    let fits = |c: &Coarsened| c.masses.len() <= opts.max_atoms;
    let mut cell;
    let mut best;
    if opts.initial_cell > 0.0 {
        cell = opts.initial_cell;
        best = coarsen(stride, pts, w, cell);
    } else {
        // the guess assumes a space-filling support; walk down to the
        // finest fitting cell on the growth ladder
        cell = initial_cell(stride, pts, opts.max_atoms);
        best = coarsen(stride, pts, w, cell);
        while fits(&best) {
            let finer = coarsen(stride, pts, w, cell / growth);
            if !fits(&finer) {
                break;
            }
            cell /= growth;
            best = finer;
        }
    }
    while !fits(&best) {
        cell *= growth;
        best = coarsen(stride, pts, w, cell);
    }
    Ok(CoarseReport {
        report: signed_bl(stride, best.points, best.masses)?,
        cell,
        coarsening_error: best.error_bound,
        fine_atoms,
    })
}

/// Cell size at which a uniform spread over the bounding box would give
/// about `cap` occupied cells.
fn initial_cell(stride: usize, pts: &[f64], cap: usize) -> f64 {
    let m = pts.len() / stride.max(1);
    if m == 0 {
        return 1.0;
    }
    let mut ext = 0.0f64;
    for d in 0..stride {
        let (lo, hi) = pts
            .iter()
            .skip(d)
            .step_by(stride)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        ext = ext.max(hi - lo);
    }
    let frac = (cap as f64 / m.max(cap) as f64).powf(1.0 / stride as f64);
    (ext * frac / (m as f64).powf(1.0 / stride as f64)).max(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::discrete::SpaceTag;

    fn dirac(x: f64, w: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(SpaceTag::Sphere, 1, vec![x], w).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        let m = dirac(0.3, 1.0);
        let (v, wit) = bounded_lipschitz_distance(&m, &m).unwrap();
        assert_eq!(v, 0.0);
        assert!(wit.is_empty());
    }

    #[test]
    fn two_points_give_min_t_2() {
        for t in [0.5, 1.0, 3.0] {
            let (v, _) = bounded_lipschitz_distance(&dirac(0.0, 1.0), &dirac(t, 1.0)).unwrap();
            assert!((v - f64::min(t, 2.0)).abs() <= 1e-12, "t={t} v={v}");
        }
    }

    #[test]
    fn same_point_gives_mass_difference() {
        let (v, w) = bounded_lipschitz_distance(&dirac(1.0, 2.5), &dirac(1.0, 0.75)).unwrap();
        assert!((v - 1.75).abs() < 1e-15);
        assert_eq!(w.values, vec![1.0]);
    }

    #[test]
    fn dense_route_agrees_on_small_instance() {
        let mu = DiscreteMeasure::new(
            SpaceTag::Sphere,
            2,
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 3.0],
            vec![0.7, 0.4, 0.2],
        )
        .unwrap();
        let nu = DiscreteMeasure::new(
            SpaceTag::Sphere,
            2,
            vec![0.5, 0.1, 1.0, 1.0],
            vec![0.9, 0.6],
        )
        .unwrap();
        let r = bounded_lipschitz_report(&mu, &nu, &BlOptions::default()).unwrap();
        let (dense, _, sol) = bounded_lipschitz_dense(&mu, &nu).unwrap();
        assert!((r.value - dense).abs() < 1e-10, "{} vs {}", r.value, dense);
        assert!(r.duality_gap < 1e-12);
        assert!(sol.duality_gap < 1e-8);
    }

    #[test]
    fn atom_cap_is_enforced() {
        let mu = DiscreteMeasure::new(
            SpaceTag::Sphere,
            1,
            (0..10).map(f64::from).collect(),
            vec![1.0; 10],
        )
        .unwrap();
        let nu = DiscreteMeasure::empty(SpaceTag::Sphere, 1);
        let opts = BlOptions {
            max_atoms: 5,
            ..BlOptions::default()
        };
        assert!(matches!(
            bounded_lipschitz_report(&mu, &nu, &opts),
            Err(Error::TooManyAtoms { count: 10, cap: 5 })
        ));
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let a = dirac(0.0, 1.0);
        let b = DiscreteMeasure::dirac(SpaceTag::SigmaN, 1, vec![0.0, 1.0], 1.0).unwrap();
        assert!(matches!(
            bounded_lipschitz_distance(&a, &b),
            Err(Error::SpaceMismatch)
        ));
    }

    #[test]
    fn total_variation_of_disjoint_diracs() {
        assert_eq!(
            total_variation_distance(&dirac(0.0, 1.0), &dirac(1.0, 1.0)).unwrap(),
            2.0
        );
        let m = dirac(0.0, 1.0);
        assert_eq!(total_variation_distance(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn coarsening_merges_and_bounds() {
        let pts = [0.1, 0.2, 0.9, 1.4];
        let w = [1.0, -1.0, 0.5, 0.25];
        let c = coarsen(1, &pts, &w, 1.0);
        // first cell cancels exactly
        assert_eq!(c.masses, vec![0.5, 0.25]);
        assert_eq!(c.points, vec![0.5, 1.5]);
        let bound = 0.4 + 0.3 + 0.5 * 0.4 + 0.25 * 0.1;
        assert!((c.error_bound - bound).abs() < 1e-15);
    }

    #[test]
    fn coarse_distance_respects_disclosed_bound() {
        let n = 500;
        let mu = DiscreteMeasure::new(
            SpaceTag::Sphere,
            1,
            (0..n).map(|k| k as f64 / n as f64).collect(),
            vec![1.0 / n as f64; n],
        )
        .unwrap();
        let nu = mu.translated(&[0.0513]).unwrap();
        let exact = bounded_lipschitz_distance(&mu, &nu).unwrap().0;
        let opts = CoarseOptions {
            max_atoms: 60,
            ..CoarseOptions::default()
        };
        let r = coarse_bounded_lipschitz(&mu, &nu, &opts).unwrap();
        assert!(r.cell > 0.0);
        assert!(r.report.masses.len() <= 60);
        assert!((r.value() - exact).abs() <= r.coarsening_error + 1e-12);
        assert!(exact <= 0.0513 + 1e-12);
    }
}
