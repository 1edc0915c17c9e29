//! The cap-cut construction showing that exponent 1/2 cannot be improved.
//!
//! `E` is the span of the first `i + 1` coordinates, `B_E` its unit ball and
//! `B_E(h)` the same ball with `N` disjoint caps of geodesic radius `h`
//! sliced off. The test function `f_h` equals
//! `|π_E(u)| - |π_E(u) - (u·e_j) e_j| / sin h` on the cap around `e_j` and
//! zero elsewhere, so it pairs to order `h^i` more with `Ψ_i(B_E(h))` than
//! with `Ψ_i(B_E)` on each cap, while `d_H(B_E(h), B_E) = 1 - cos h`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{kappa, omega};
use crate::error::{Error, Result};
use crate::geometry::hausdorff::{hausdorff_bracket, HausdorffOptions};
use crate::geometry::sampling::derive_seed;
use crate::geometry::{ConvexBody, HalfSpace, MAX_DIM};
use crate::measures::{extract_pair, sphere_marginal, sphere_net, DiscreteMeasure, Marginal, SamplingPlan};
use crate::metric::{coarse_bounded_lipschitz, CoarseOptions};
use crate::quadrature::integrate;
use crate::vector::{dot, norm, normalized, unit};

/// Tolerance between the closed-form and quadrature cap pairings.
pub const PAIRING_TOL: f64 = 1e-8;
const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapConstruction {
    pub n: usize,
    pub i: usize,
    pub h: f64,
    /// Cap centres on the unit sphere of `E`, as points of `R^n`.
    pub centers: Vec<Vec<f64>>,
}

fn check_indices(n: usize, i: usize, h: f64) -> Result<()> {
    if n < 2 || n > MAX_DIM {
        return Err(Error::Config(format!("dimension {n} outside 2..={MAX_DIM}")));
    }
    if i == 0 || i >= n {
        return Err(Error::Config(format!("index {i} outside 1..={}", n - 1)));
    }
    if !(h > 0.0 && h < FRAC_PI_2) {
        return Err(Error::Config(format!("cap radius {h} outside (0, π/2)")));
    }
    Ok(())
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Greedy farthest-point packing on `S^i` at geodesic separation `2h`,
/// over a net of candidate points; starts from the first axis.
fn greedy_packing(i: usize, h: f64) -> Vec<Vec<f64>> {
    let d = i + 1;
    let m = (60.0 * (PI / h).powi(i as i32)).ceil().min(200_000.0) as usize;
    let mut cand = sphere_net(d, m);
    cand.insert(0, unit(d, 0));
    let mut gap = vec![f64::INFINITY; cand.len()];
    let mut chosen = Vec::new();
    let mut next = 0;
    loop {
        let c = cand[next].clone();
        for (g, p) in gap.iter_mut().zip(&cand) {
            *g = g.min(angle(p, &c));
        }
        chosen.push(c);
        let (best, far) = gap
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &g)| if g > acc.1 { (k, g) } else { acc });
        if far < 2.0 * h {
            return chosen;
        }
        next = best;
    }
}

/// Centres of `N_i(h)` disjoint caps of geodesic radius `h` on `S_E`: equally
/// spaced for `i = 1`, greedy farthest-point otherwise.
pub fn build_cap_packing(n: usize, i: usize, h: f64) -> Result<CapConstruction> {
    check_indices(n, i, h)?;
    let local = if i == 1 {
        let count = ((PI / h) * (1.0 + 1e-12)).floor() as usize;
        (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        greedy_packing(i, h)
    };
    let centers = local
        .into_iter()
        .map(|e: Vec<f64>| {
            let mut x = e;
            x.resize(n, 0.0);
            x
        })
        .collect();
    Ok(CapConstruction { n, i, h, centers })
}

impl CapConstruction {
    /// One cap around the first axis.
    pub fn single(n: usize, i: usize, h: f64) -> Result<Self> {
        check_indices(n, i, h)?;
        Ok(Self {
            n,
            i,
            h,
            centers: vec![unit(n, 0)],
        })
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    /// Smallest geodesic distance between two centres (infinite for one).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..self.centers.len() {
            for b in a + 1..self.centers.len() {
                best = best.min(angle(&self.centers[a], &self.centers[b]));
            }
        }
        best
    }

    /// `N h^i`, bounded above and below independently of `h`.
    pub fn packing_constant(&self) -> f64 {
        self.count() as f64 * self.h.powi(self.i as i32)
    }

    fn flat_halfspaces(&self, dim: usize) -> Vec<HalfSpace> {
        let mut hs = Vec::new();
        for k in self.i + 1..dim {
            for sign in [1.0, -1.0] {
                let mut a = vec![0.0; dim];
                a[k] = sign;
                hs.push(HalfSpace::new(a, 0.0).expect("unit normal"));
            }
        }
        hs
    }

    fn cap_halfspaces(&self, dim: usize) -> Vec<HalfSpace> {
        let c = self.h.cos();
        self.centers
            .iter()
            .map(|e| HalfSpace::new(e[..dim].to_vec(), c).expect("unit normal"))
            .collect()
    }

    /// `B_E` in `R^n`.
    pub fn base_body(&self) -> Result<ConvexBody> {
        if self.i + 1 == self.n {
            ConvexBody::ball(vec![0.0; self.n], 1.0)
        } else {
            ConvexBody::ball_cut(vec![0.0; self.n], 1.0, self.flat_halfspaces(self.n))
        }
    }

    /// `B_E(h)` in `R^n`.
    pub fn cut_body(&self) -> Result<ConvexBody> {
        let mut hs = self.cap_halfspaces(self.n);
        hs.extend(self.flat_halfspaces(self.n));
        ConvexBody::ball_cut(vec![0.0; self.n], 1.0, hs)
    }

    /// `B_E` and `B_E(h)` in the coordinates of `E`, where both are full
    /// dimensional; Hausdorff distances agree with those in `R^n`.
    pub fn bodies_in_subspace(&self) -> Result<(ConvexBody, ConvexBody)> {
        let d = self.i + 1;
        Ok((
            ConvexBody::ball(vec![0.0; d], 1.0)?,
            ConvexBody::ball_cut(vec![0.0; d], 1.0, self.cap_halfspaces(d))?,
        ))
    }

    /// Index of the centre nearest to `u` (lowest index on ties).
    pub fn nearest(&self, u: &[f64]) -> usize {
        let mut best = 0;
        let mut top = f64::NEG_INFINITY;
        for (j, e) in self.centers.iter().enumerate() {
            let a = dot(u, e);
            if a > top {
                top = a;
                best = j;
            }
        }
        best
    }

    /// `f_{e_j,h}(u)`.
    pub fn cap_value(&self, j: usize, u: &[f64]) -> f64 {
        let e = &self.centers[j];
        let a = dot(u, e);
        if a <= 0.0 {
            return 0.0;
        }
        let d = self.i + 1;
        let proj = norm(&u[..d]);
        let off: f64 = (0..d).map(|k| (u[k] - a * e[k]).powi(2)).sum::<f64>().sqrt();
        (proj - off / self.h.sin()).max(0.0)
    }

    /// `f_h(u)`.
    pub fn eval_f(&self, u: &[f64]) -> f64 {
        self.cap_value(self.nearest(u), u)
    }

    /// `φ_{e_j}(s, t, v, w)`, with `v ⟂ e_j` in `E` and `w ⟂ E`, both unit.
    pub fn phi(&self, j: usize, s: f64, t: f64, v: &[f64], w: &[f64]) -> Vec<f64> {
        let e = &self.centers[j];
        (0..self.n)
            .map(|k| s.cos() * t.cos() * e[k] + s.cos() * t.sin() * v[k] + s.sin() * w[k])
            .collect()
    }

    /// Supremum of the gradient of `f_h` on the sphere:
    /// `sqrt(1 + 1/sin² h)`, or `1/sin h` when `E = R^n`.
    pub fn lipschitz_bound(&self) -> f64 {
        let t = 1.0 / self.h.sin();
        if self.i + 1 == self.n {
            t
        } else {
            (1.0 + t * t).sqrt()
        }
    }

    fn random_in(&self, rng: &mut ChaCha8Rng, j: usize, t_max: f64) -> Vec<f64> {
        let d = self.i + 1;
        let e = &self.centers[j];
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let a = dot(&g, &e[..d]);
        let mut v: Vec<f64> = (0..d).map(|k| g[k] - a * e[k]).collect();
        v = normalized(&v).unwrap_or_else(|| unit(d, 1));
        v.resize(self.n, 0.0);
        let mut w = vec![0.0; self.n];
        let s = if d < self.n {
            let g: Vec<f64> = (d..self.n).map(|_| rng.sample(StandardNormal)).collect();
            let g = normalized(&g).unwrap_or_else(|| unit(self.n - d, 0));
            w[d..].copy_from_slice(&g);
            // favour the steep region near the boundary of E's complement
            let r: f64 = rng.gen();
            FRAC_PI_2 * (1.0 - r * r)
        } else {
            0.0
        };
        let t = t_max * rng.gen::<f64>();
        self.phi(j, s, t, &v, &w)
    }

    /// Largest ratio `|f(a) - f(b)| / |a - b|` over `pairs` sampled pairs:
    /// one point in a random cap, the other a random nearby point at
    /// log-uniform distance from `1e-4 h` to `h`.
    pub fn measured_lipschitz(&self, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x11b]));
        let mut best: f64 = 0.0;
        for _ in 0..pairs {
            let j = rng.gen_range(0..self.count());
            let a = self.random_in(&mut rng, j, 1.1 * self.h);
            let g: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
            let step = self.h * 10f64.powf(-4.0 * rng.gen::<f64>());
            let b: Vec<f64> = a.iter().zip(&g).map(|(x, y)| x + step * y).collect();
            let Some(b) = normalized(&b) else { continue };
            let dist = crate::vector::dist(&a, &b);
            if dist > 0.0 {
                best = best.max((self.eval_f(&a) - self.eval_f(&b)).abs() / dist);
            }
        }
        best
    }
}

/// `∫ f dΨ_i(B_E(e, h))` by its closed form and by quadrature over `ν(e)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CapPairing {
    pub closed: f64,
    pub quadrature: f64,
}

pub fn cap_pairing_closed(n: usize, i: usize, h: f64) -> f64 {
    kappa(i) * kappa(n - i - 1) / omega(n - i) * h.sin().powi(i as i32)
}

/// Both routes for the cap pairing; errors if they differ by more than
/// [`PAIRING_TOL`].
pub fn psi_cap_pairing(n: usize, i: usize, h: f64) -> Result<CapPairing> {
    let c = CapConstruction::single(n, i, h)?;
    let closed = cap_pairing_closed(n, i, h);
    let pre = kappa(i) * h.sin().powi(i as i32) / omega(n - i);
    let e = unit(n, 0);
    let quadrature = if i + 1 == n {
        // ν(e) = {e}
        pre * c.eval_f(&e)
    } else {
        let w = unit(n, i + 1);
        let k = (n - i - 2) as i32;
        let q = integrate(
            |s: f64| {
                let u: Vec<f64> = e.iter().zip(&w).map(|(a, b)| s.cos() * a + s.sin() * b).collect();
                c.eval_f(&u) * s.sin().powi(k)
            },
            0.0,
            FRAC_PI_2,
            QUAD_TOL,
        )?;
        pre * omega(n - i - 1) * q.value
    };
    if (closed - quadrature).abs() > PAIRING_TOL {
        return Err(Error::QuadratureMismatch { closed, quadrature });
    }
    Ok(CapPairing { closed, quadrature })
}

/// `∫ f dΨ_i(B_E)` for one cap, with the leading term of its expansion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BallPairing {
    pub value: f64,
    /// `c h^i` with `c = κ_i κ_{n-i-1}/ω_{n-i} - ω_i κ_{n-i-1}/((i+1) ω_{n-i})`.
    pub leading: f64,
}

pub fn leading_coefficient(n: usize, i: usize) -> f64 {
    let k = kappa(n - i - 1) / omega(n - i);
    kappa(i) * k - omega(i) * k / (i as f64 + 1.0)
}

/// Coefficient of `h^i` in the per-cap gap between the two pairings.
pub fn gap_coefficient(n: usize, i: usize) -> f64 {
    omega(i) * kappa(n - i - 1) / ((i as f64 + 1.0) * omega(n - i))
}

pub fn psi_ball_pairing(n: usize, i: usize, h: f64) -> Result<BallPairing> {
    check_indices(n, i, h)?;
    let a = integrate(|t: f64| t.sin().powi(i as i32 - 1), 0.0, h, QUAD_TOL)?.value;
    let b = integrate(|t: f64| t.sin().powi(i as i32), 0.0, h, QUAD_TOL)?.value;
    let value = omega(i) * kappa(n - i - 1) / omega(n - i) * (a - b / h.sin());
    Ok(BallPairing {
        value,
        leading: leading_coefficient(n, i) * h.powi(i as i32),
    })
}

/// `value(h)/h^i` at `h` and its Richardson extrapolation from `h` and `h/2`
/// (the error is even in `h`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub raw: f64,
    pub extrapolated: f64,
    pub exact: f64,
}

pub fn ball_coefficient_richardson(n: usize, i: usize, h: f64) -> Result<CoefficientEstimate> {
    let g = |x: f64| -> Result<f64> { Ok(psi_ball_pairing(n, i, x)?.value / x.powi(i as i32)) };
    let raw = g(h)?;
    let half = g(h / 2.0)?;
    Ok(CoefficientEstimate {
        raw,
        extrapolated: (4.0 * half - raw) / 3.0,
        exact: leading_coefficient(n, i),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessOptions {
    /// Shell samples per body.
    pub samples: usize,
    pub seed: u64,
    /// Sampled pairs for the Lipschitz constant of `f_h`.
    pub lipschitz_pairs: usize,
    pub coarse: CoarseOptions,
    /// Hausdorff bracket width as a fraction of the distance.
    pub hausdorff_fraction: f64,
}

impl Default for TightnessOptions {
    fn default() -> Self {
        Self {
            samples: 2_000_000,
            seed: 1,
            lipschitz_pairs: 200_000,
            coarse: CoarseOptions::default(),
            hausdorff_fraction: 1e-3,
        }
    }
}

/// One grid point of the tightness table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessRow {
    pub n: usize,
    pub i: usize,
    pub h: f64,
    pub caps: usize,
    /// `N · (cap pairing - ball pairing)`.
    pub gap_analytic: f64,
    pub lip_measured: f64,
    /// `gap_analytic / lip_measured`.
    pub lower_bound: f64,
    /// Certified upper end of the `d_H(B_E(h), B_E)` bracket.
    pub dh_bound: f64,
    pub dh_lower: f64,
    /// Exact `1 - cos h`.
    pub dh_closed: f64,
    pub dbl_empirical: f64,
    /// Replicate standard error of the empirical witness pairing.
    pub mc_stderr: f64,
    /// `∫ f_h / L d(Ψ_i(B_E(h)) - Ψ_i(B_E))` on the extracted measures.
    pub witness_pairing: f64,
    pub coarsening_error: f64,
    pub atoms: usize,
    pub packing_constant: f64,
}

impl TightnessRow {
    pub fn dominates_lower_bound(&self) -> bool {
        self.dbl_empirical >= self.lower_bound - 3.0 * self.mc_stderr
    }
}

pub fn tightness_row(n: usize, i: usize, h: f64, opts: &TightnessOptions) -> Result<TightnessRow> {
    let cons = build_cap_packing(n, i, h)?;
    let cap = psi_cap_pairing(n, i, h)?;
    let ball = psi_ball_pairing(n, i, h)?;
    let gap = cons.count() as f64 * (cap.closed - ball.value);
    let lip = cons
        .measured_lipschitz(opts.lipschitz_pairs, opts.seed)
        .max(f64::MIN_POSITIVE);

    let (base_e, cut_e) = cons.bodies_in_subspace()?;
    let hd = hausdorff_bracket(
        &cut_e,
        &base_e,
        HausdorffOptions::relative_to_value(opts.hausdorff_fraction),
    )?;

    let plan = SamplingPlan::new(opts.samples, opts.seed);
    let (fk, fl) = extract_pair(&cons.cut_body()?, &cons.base_body()?, &plan)?;
    let pk = sphere_marginal(fk.lambda(i), i, Marginal::Psi)?;
    let pl = sphere_marginal(fl.lambda(i), i, Marginal::Psi)?;
    let d = coarse_bounded_lipschitz(&pk, &pl, &opts.coarse)?;
    let (pairing, se) = witness_pairing(&cons, lip, &pk, &pl);

    Ok(TightnessRow {
        n,
        i,
        h,
        caps: cons.count(),
        gap_analytic: gap,
        lip_measured: lip,
        lower_bound: gap / lip,
        dh_bound: hd.hi,
        dh_lower: hd.lo,
        dh_closed: 1.0 - h.cos(),
        dbl_empirical: d.value(),
        mc_stderr: se,
        witness_pairing: pairing,
        coarsening_error: d.coarsening_error,
        atoms: d.fine_atoms,
        packing_constant: cons.packing_constant(),
    })
}

fn witness_pairing(cons: &CapConstruction, lip: f64, pk: &DiscreteMeasure, pl: &DiscreteMeasure) -> (f64, f64) {
    let g = |u: &[f64]| cons.eval_f(u) / lip;
    let a = pk.replicate_integrals(g);
    let b = pl.replicate_integrals(g);
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let mean = diff.iter().sum::<f64>() / diff.len().max(1) as f64;
    (mean, crate::measures::stderr(&diff))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessReport {
    pub rows: Vec<TightnessRow>,
    /// Least-squares slope of `log d_bL` against `log d_H`.
    pub slope: f64,
    pub intercept: f64,
}

pub const TIGHTNESS_COLUMNS: &str =
    "n,i,h,N,gap_analytic,lip_measured,lower_bound,dH_bound,dbl_empirical,mc_stderr";

pub fn tightness_report(n: usize, i: usize, grid: &[f64], opts: &TightnessOptions) -> Result<TightnessReport> {
    if grid.len() < 2 {
        return Err(Error::Config("the h grid needs at least two points".into()));
    }
    if let Some(h) = grid.iter().find(|&&h| !(h > 0.0 && h <= 0.5)) {
        return Err(Error::Config(format!("grid value {h} outside (0, 0.5]")));
    }
    let rows: Vec<TightnessRow> = grid
        .par_iter()
        .map(|&h| tightness_row(n, i, h, opts))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.dh_bound.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.dbl_empirical.max(f64::MIN_POSITIVE).ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys, &vec![1.0; xs.len()]);
    Ok(TightnessReport { rows, slope, intercept })
}

/// Weighted least-squares line `y = slope x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64) {
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxy += w * (x - mx) * (y - my);
        sxx += w * (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    (slope, my - slope * mx)
}

impl TightnessReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# supmeas tightness v1\n{TIGHTNESS_COLUMNS}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.i,
                r.h,
                r.caps,
                r.gap_analytic,
                r.lip_measured,
                r.lower_bound,
                r.dh_bound,
                r.dbl_empirical,
                r.mc_stderr
            ));
        }
        out
    }
}
