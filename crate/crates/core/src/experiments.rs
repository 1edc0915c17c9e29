//! Continuity experiments: perturbation ladders with exponent fits, and the
//! coupling inequality for parallel measures.
//!
//! An experiment config is TOML:
//!
//! ```toml
//! seed = 7                      # optional; the caller's seed wins
//! samples = 200000              # shell samples per body
//! indices = [0, 1]              # optional, default 0..n
//! ladder = [0.2, 0.1, 0.05]     # strictly decreasing perturbation sizes
//! fit_tolerance = 0.05          # optional
//! ratio_growth = 0.2            # optional
//! max_atoms = 4000              # optional coarsening cap
//!
//! [body]                        # a body file, see `geometry::bodyfile`
//! kind = "ball"
//! center = [0, 0]
//! radius = 1
//!
//! [family]
//! kind = "cap_cut"              # translate | cap_cut | minkowski_round | vertex_jitter
//! index = 1                     # cap_cut: caps live on a sphere of this dimension
//! ```
//!
//! `translate` takes `direction = [..]`, `vertex_jitter` takes `seed = u64`.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::bodyfile::BodySpec;
use crate::geometry::sampling::derive_seed;
use crate::geometry::{
    hausdorff_bracket, project, BodyKind, ConvexBody, HalfSpace, HausdorffOptions, SamplingBox,
};
use crate::measures::extract::{replicate_stream, tries_for};
use crate::measures::{extract_pair, stderr, DiscreteMeasure, SamplingPlan, SpaceTag};
use crate::metric::{coarse_bounded_lipschitz, witness_pairing_stderr, CoarseOptions};
use crate::optimality::{build_cap_packing, least_squares};
use crate::vector::{dist, norm};

const TAG_TRIAL: u64 = 0x4c54;
const TAG_JITTER: u64 = 0x4a49;

pub const THEOREM1_COLUMNS: &str = "family,step,epsilon,delta,R,index,dbl,stderr,coarsening_error,duality_gap,ratio,samples,seed,error";
pub const LEMMA41_COLUMNS: &str =
    "trial,n,rho,lhs,lhs_stderr,coarsening_error,term_p,term_u,term_sym,rhs,sigma,holds,samples,seed,error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `L = K + ε v / |v|`.
    Translate { direction: Vec<f64> },
    /// `K` a ball; `L` is `K` restricted to the `(index+1)`-dimensional
    /// coordinate subspace through its centre with caps of angular radius
    /// `ε` cut off (`K` itself restricted likewise when `index < n-1`).
    CapCut {
        #[serde(default)]
        index: Option<usize>,
    },
    /// `L = K + ε B^n`.
    MinkowskiRound,
    /// Every vertex of a vertex-described `K` moved by `ε` along a fixed
    /// random unit vector.
    VertexJitter { seed: u64 },
}

impl FamilySpec {
    pub fn label(&self, n: usize) -> String {
        match self {
            Self::Translate { .. } => "translate".into(),
            Self::CapCut { index } => format!("cap_cut_{}", index.unwrap_or(n - 1)),
            Self::MinkowskiRound => "minkowski_round".into(),
            Self::VertexJitter { .. } => "vertex_jitter".into(),
        }
    }

    /// The pair `(K, L)` at perturbation size `eps`.
    pub fn perturb(&self, body: &ConvexBody, eps: f64) -> Result<(ConvexBody, ConvexBody)> {
        let n = body.dim();
        match self {
            Self::Translate { direction } => {
                if direction.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: direction.len(),
                    });
                }
                let len = norm(direction);
                if !(len > 0.0) {
                    return Err(Error::Config("translation direction is zero".into()));
                }
                let t: Vec<f64> = direction.iter().map(|v| eps * v / len).collect();
                Ok((body.clone(), body.translated(&t)?))
            }
            Self::CapCut { index } => {
                let BodyKind::Ball { center, radius } = body.kind() else {
                    return Err(Error::Config("cap_cut needs a ball".into()));
                };
                let i = index.unwrap_or(n - 1);
                let cons = build_cap_packing(n, i, eps)?;
                let mut flat = Vec::new();
                for k in i + 1..n {
                    for sign in [1.0, -1.0] {
                        let mut a = vec![0.0; n];
                        a[k] = sign;
                        flat.push(HalfSpace::new(a, sign * center[k])?);
                    }
                }
                let mut cut = flat.clone();
                for e in &cons.centers {
                    let off = radius * eps.cos() + crate::vector::dot(e, center);
                    cut.push(HalfSpace::new(e.clone(), off)?);
                }
                let rho = body.outer_radius();
                let k = if flat.is_empty() {
                    body.clone()
                } else {
                    ConvexBody::ball_cut(center.clone(), *radius, flat)?.with_outer_radius(rho)?
                };
                let l = ConvexBody::ball_cut(center.clone(), *radius, cut)?.with_outer_radius(rho)?;
                Ok((k, l))
            }
            Self::MinkowskiRound => {
                Ok((body.clone(), body.clone().with_outer_radius(body.outer_radius() + eps)?))
            }
            Self::VertexJitter { seed } => {
                let BodyKind::VPolytope { vertices } = body.kind() else {
                    return Err(Error::Config("vertex_jitter needs a vertex-described polytope".into()));
                };
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(*seed, &[TAG_JITTER]));
                let moved = vertices
                    .iter()
                    .map(|v| {
                        let u = random_unit(&mut rng, n);
                        v.iter().zip(&u).map(|(a, b)| a + eps * b).collect()
                    })
                    .collect();
                let l = ConvexBody::vpolytope(moved)?.with_outer_radius(body.outer_radius())?;
                Ok((body.clone(), l))
            }
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&g);
        if r > 1e-12 {
            return g.into_iter().map(|v| v / r).collect();
        }
    }
}

fn default_fit_tolerance() -> f64 {
    0.05
}

fn default_ratio_growth() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub samples: usize,
    #[serde(default)]
    pub indices: Option<Vec<usize>>,
    pub ladder: Vec<f64>,
    #[serde(default = "default_fit_tolerance")]
    pub fit_tolerance: f64,
    #[serde(default = "default_ratio_growth")]
    pub ratio_growth: f64,
    #[serde(default)]
    pub max_atoms: Option<usize>,
    pub body: BodySpec,
    pub family: FamilySpec,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            msg: e.message().to_string(),
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn coarse(&self) -> CoarseOptions {
        let mut c = CoarseOptions::default();
        if let Some(m) = self.max_atoms {
            c.max_atoms = m;
        }
        c
    }

    fn validate(&self, n: usize) -> Result<Vec<usize>> {
        if self.samples == 0 {
            return Err(Error::Config("`samples` must be positive".into()));
        }
        if self.ladder.is_empty() {
            return Err(Error::Config("`ladder` is empty".into()));
        }
        for (s, w) in self.ladder.windows(2).enumerate() {
            if !(w[1] < w[0]) {
                return Err(Error::Config(format!(
                    "`ladder` must be strictly decreasing (step {})",
                    s + 1
                )));
            }
        }
        if let Some(e) = self.ladder.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("ladder value {e} is not positive")));
        }
        let indices = self.indices.clone().unwrap_or_else(|| (0..n).collect());
        if let Some(i) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Config(format!("index {i} outside 0..{n}")));
        }
        Ok(indices)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub index: usize,
    pub dbl: f64,
    /// Replicate standard error of the witness pairing.
    pub stderr: f64,
    pub coarsening_error: f64,
    pub duality_gap: f64,
    /// `dbl / δ^{1/2}`; absent when `δ = 0`.
    pub ratio: Option<f64>,
}

/// One comparison of two bodies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub family: String,
    pub step: usize,
    pub epsilon: f64,
    /// Certified upper end of the Hausdorff bracket.
    pub delta: f64,
    pub delta_lo: f64,
    /// Larger circumradius bound of the two bodies.
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    pub indices: Vec<IndexResult>,
    pub error: Option<String>,
    /// Not serialized, so that reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Hausdorff distance and per-index `d_bL` between `K` and `L`, with
/// measures extracted from common random numbers.
pub fn compare_bodies(
    k: &ConvexBody,
    l: &ConvexBody,
    indices: &[usize],
    samples: usize,
    seed: u64,
    coarse: &CoarseOptions,
) -> Result<(f64, f64, Vec<IndexResult>)> {
    let hd = hausdorff_bracket(k, l, HausdorffOptions::relative_to_value(1e-3))?;
    let plan = SamplingPlan::new(samples, seed);
    let (fk, fl) = extract_pair(k, l, &plan)?;
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        if i >= k.dim() {
            return Err(Error::Config(format!("index {i} outside 0..{}", k.dim())));
        }
        let (mu, nu) = (fk.lambda(i), fl.lambda(i));
        let d = coarse_bounded_lipschitz(mu, nu, coarse)?;
        out.push(IndexResult {
            index: i,
            dbl: d.value(),
            stderr: witness_pairing_stderr(&d, mu, nu),
            coarsening_error: d.coarsening_error,
            duality_gap: d.report.duality_gap,
            ratio: (hd.hi > 0.0).then(|| d.value() / hd.hi.sqrt()),
        });
    }
    Ok((hd.lo, hd.hi, out))
}

/// Exponent fit and ratio growth for one index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexFit {
    pub index: usize,
    /// Points with `0 < δ < 1` that entered the fit.
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    /// Largest step-over-step relative increase of `dbl / δ^{1/2}`.
    pub max_ratio_growth: f64,
    pub slope_ok: bool,
    pub ratio_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub family: String,
    pub seed: u64,
    pub records: Vec<ExperimentRecord>,
    pub fits: Vec<IndexFit>,
}

impl Theorem1Report {
    /// Every record computed, every fit above `1/2 - tolerance` and no ratio
    /// blow-up.
    pub fn passed(&self) -> bool {
        self.records.iter().all(ExperimentRecord::is_ok)
            && self.fits.iter().all(|f| f.slope_ok && f.ratio_ok)
    }

    pub fn fit(&self, index: usize) -> Option<&IndexFit> {
        self.fits.iter().find(|f| f.index == index)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# supmeas theorem1 v1\n");
        out.push_str(THEOREM1_COLUMNS);
        out.push('\n');
        for r in &self.records {
            let err = r.error.as_deref().map(csv_escape).unwrap_or_default();
            let head = format!("{},{},{},{},{}", r.family, r.step, r.epsilon, r.delta, r.radius);
            if r.indices.is_empty() {
                writeln!(out, "{head},,,,,,,{},{},{err}", r.samples, r.seed).unwrap();
            }
            for x in &r.indices {
                let ratio = x.ratio.map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{head},{},{},{},{},{},{ratio},{},{},{err}",
                    x.index, x.dbl, x.stderr, x.coarsening_error, x.duality_gap, r.samples, r.seed
                )
                .unwrap();
            }
        }
        for f in &self.fits {
            writeln!(
                out,
                "# fit index={} points={} slope={} intercept={} max_ratio_growth={} slope_ok={} ratio_ok={}",
                f.index, f.points, f.slope, f.intercept, f.max_ratio_growth, f.slope_ok, f.ratio_ok
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let v = serde_json::to_value(self).map_err(|e| Error::Config(e.to_string()))?;
        check_keys(&v, &["family", "seed", "records", "fits"])?;
        for r in v["records"].as_array().into_iter().flatten() {
            check_keys(r, &["family", "step", "epsilon", "delta", "radius", "indices", "error"])?;
        }
        Ok(serde_json::to_string_pretty(&v).expect("value serializes") + "\n")
    }
}

fn check_keys(v: &serde_json::Value, keys: &[&str]) -> Result<()> {
    for k in keys {
        if v.get(k).is_none() {
            return Err(Error::Config(format!("report is missing `{k}`")));
        }
    }
    Ok(())
}

fn csv_escape(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Runs the ladder: one record per step (a failing step records its error),
/// then per index a least-squares fit of `log dbl` on `log δ` over steps
/// with `δ < 1`, the smallest `δ` weighted double.
pub fn run_theorem1(cfg: &ExperimentConfig, seed: u64) -> Result<Theorem1Report> {
    let body = cfg.body.build()?;
    let n = body.dim();
    let indices = cfg.validate(n)?;
    let coarse = cfg.coarse();
    let family = cfg.family.label(n);
    let records: Vec<ExperimentRecord> = cfg
        .ladder
        .par_iter()
        .enumerate()
        .map(|(step, &eps)| {
            let start = Instant::now();
            let mut rec = ExperimentRecord {
                family: family.clone(),
                step,
                epsilon: eps,
                delta: f64::NAN,
                delta_lo: f64::NAN,
                radius: f64::NAN,
                samples: cfg.samples,
                seed,
                indices: Vec::new(),
                error: None,
                wall_seconds: 0.0,
            };
            let run = || -> Result<(f64, f64, f64, Vec<IndexResult>)> {
                let (k, l) = cfg.family.perturb(&body, eps)?;
                let r = k.circumradius_bound().max(l.circumradius_bound());
                let (lo, hi, res) = compare_bodies(&k, &l, &indices, cfg.samples, seed, &coarse)?;
                Ok((r, lo, hi, res))
            };
            match run() {
                Ok((r, lo, hi, res)) => {
                    rec.radius = r;
                    rec.delta_lo = lo;
                    rec.delta = hi;
                    rec.indices = res;
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec.wall_seconds = start.elapsed().as_secs_f64();
            rec
        })
        .collect();

    let ok: Vec<&ExperimentRecord> = records.iter().filter(|r| r.is_ok()).collect();
    for w in ok.windows(2) {
        if !(w[1].delta < w[0].delta) {
            return Err(Error::LadderNotShrinking { step: w[1].step });
        }
    }

    let fits = indices
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            let pts: Vec<(f64, f64)> = ok
                .iter()
                .filter(|r| r.delta > 0.0 && r.delta < 1.0 && r.indices[slot].dbl > 0.0)
                .map(|r| (r.delta.ln(), r.indices[slot].dbl.ln()))
                .collect();
            let (slope, intercept) = if pts.len() >= 2 {
                let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
                let smallest = (0..xs.len())
                    .min_by(|&a, &b| xs[a].total_cmp(&xs[b]))
                    .expect("nonempty");
                let ws: Vec<f64> = (0..xs.len())
                    .map(|k| if k == smallest { 2.0 } else { 1.0 })
                    .collect();
                least_squares(&xs, &ys, &ws)
            } else {
                (f64::NAN, f64::NAN)
            };
            let ratios: Vec<f64> = ok.iter().filter_map(|r| r.indices[slot].ratio).collect();
            let growth = ratios
                .windows(2)
                .map(|w| w[1] / w[0] - 1.0)
                .fold(f64::NEG_INFINITY, f64::max);
            let growth = if ratios.len() < 2 { 0.0 } else { growth };
            IndexFit {
                index: i,
                points: pts.len(),
                slope,
                intercept,
                max_ratio_growth: growth,
                slope_ok: slope >= 0.5 - cfg.fit_tolerance,
                ratio_ok: growth <= cfg.ratio_growth,
            }
        })
        .collect();

    Ok(Theorem1Report {
        family,
        seed,
        records,
        fits,
    })
}

/// Both sides of the coupling inequality
/// `d_bL(μ_{K,ρ}, μ_{L,ρ}) <= ∫|p_K - p_L| + ∫|u_K - u_L| + vol(K^ρ △ L^ρ)`,
/// the integrals over `K^ρ ∩ L^ρ`, where `K^ρ` is the shell `0 < d_K <= ρ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma41Report {
    pub n: usize,
    pub rho: f64,
    pub samples: usize,
    pub seed: u64,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub coarsening_error: f64,
    pub term_p: f64,
    pub term_u: f64,
    pub term_sym: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// Combined standard error of both sides.
    pub sigma: f64,
    pub holds: bool,
}

struct ReplicateShells {
    k: Vec<f64>,
    l: Vec<f64>,
    terms: [f64; 3],
}

/// Estimates both sides from one candidate stream over a box containing
/// both outer parallel bodies; every candidate feeds `μ_{K,ρ}`, `μ_{L,ρ}`
/// and the right-hand terms alike.
pub fn verify_lemma41(
    k: &ConvexBody,
    l: &ConvexBody,
    rho: f64,
    samples: usize,
    seed: u64,
    coarse: &CoarseOptions,
) -> Result<Lemma41Report> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Config(format!("shell radius {rho} must be positive")));
    }
    if k.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: l.dim(),
        });
    }
    if samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    let n = k.dim();
    let plan = SamplingPlan::new(samples, seed);
    let bx = SamplingBox::for_body(k, rho).union(&SamplingBox::for_body(l, rho));
    let tries = tries_for(k, &bx, rho, &plan)?;
    let reps = plan.replicates;
    let blocks: Vec<ReplicateShells> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<ReplicateShells> {
            let mut stream = replicate_stream(n, seed, r);
            let mut out = ReplicateShells {
                k: Vec::new(),
                l: Vec::new(),
                terms: [0.0; 3],
            };
            for _ in 0..tries {
                let x = bx.map(&stream.next_point());
                let pk = project(k, &x)?;
                let pl = project(l, &x)?;
                let ink = pk.d > 0.0 && pk.d <= rho;
                let inl = pl.d > 0.0 && pl.d <= rho;
                if ink {
                    out.k.extend_from_slice(&pk.p);
                    out.k.extend_from_slice(pk.u.as_ref().expect("d > 0"));
                }
                if inl {
                    out.l.extend_from_slice(&pl.p);
                    out.l.extend_from_slice(pl.u.as_ref().expect("d > 0"));
                }
                if ink && inl {
                    out.terms[0] += dist(&pk.p, &pl.p);
                    out.terms[1] += dist(pk.u.as_ref().unwrap(), pl.u.as_ref().unwrap());
                } else if ink != inl {
                    out.terms[2] += 1.0;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let unit = bx.volume() / (reps as f64 * tries as f64);
    let per_rep = bx.volume() / tries as f64;
    let measure = |pick: fn(&ReplicateShells) -> &Vec<f64>| -> Result<DiscreteMeasure> {
        let stride = 2 * n;
        let mut coords = Vec::new();
        let mut labels = Vec::new();
        for (r, b) in blocks.iter().enumerate() {
            let c = pick(b);
            labels.extend(std::iter::repeat(r as u16).take(c.len() / stride));
            coords.extend_from_slice(c);
        }
        let weights = vec![unit; labels.len()];
        DiscreteMeasure::new(SpaceTag::SigmaN, n, coords, weights)?
            .with_replicates(std::sync::Arc::new(labels), reps)
    };
    let mu = measure(|b| &b.k)?;
    let nu = measure(|b| &b.l)?;
    let d = coarse_bounded_lipschitz(&mu, &nu, coarse)?;
    let lhs_stderr = witness_pairing_stderr(&d, &mu, &nu);

    let term = |t: usize| -> (f64, Vec<f64>) {
        let v: Vec<f64> = blocks.iter().map(|b| b.terms[t] * per_rep).collect();
        (v.iter().sum::<f64>() / reps as f64, v)
    };
    let (term_p, vp) = term(0);
    let (term_u, vu) = term(1);
    let (term_sym, vs) = term(2);
    let rhs_reps: Vec<f64> = (0..reps).map(|r| vp[r] + vu[r] + vs[r]).collect();
    let rhs = term_p + term_u + term_sym;
    let rhs_stderr = stderr(&rhs_reps);
    let sigma = (lhs_stderr.powi(2) + rhs_stderr.powi(2)).sqrt();
    let lhs = d.value();
    Ok(Lemma41Report {
        n,
        rho,
        samples,
        seed,
        lhs,
        lhs_stderr,
        coarsening_error: d.coarsening_error,
        term_p,
        term_u,
        term_sym,
        rhs,
        rhs_stderr,
        sigma,
        holds: lhs <= rhs + 3.0 * sigma,
    })
}

/// A random body in dimension `n`: a ball or the hull of a few Gaussian
/// points.
fn random_body(rng: &mut ChaCha8Rng, n: usize) -> Result<ConvexBody> {
    if rng.gen_bool(0.5) {
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        ConvexBody::ball(c, rng.gen_range(0.3..1.0))
    } else {
        let m = rng.gen_range(n + 1..=n + 6);
        let pts = (0..m)
            .map(|_| (0..n).map(|_| 0.6 * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        ConvexBody::vpolytope(pts)
    }
}

/// Randomized trial `t`: dimension 2 or 3, `ρ ∈ {0.5, 1}`, and `L` either
/// an independent random body, a small translate of `K`, or `K` rounded.
pub fn random_lemma41_trial(seed: u64, t: u64) -> Result<(ConvexBody, ConvexBody, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_TRIAL, t]));
    let n = if rng.gen_bool(0.5) { 2 } else { 3 };
    let rho = if rng.gen_bool(0.5) { 0.5 } else { 1.0 };
    let k = random_body(&mut rng, n)?;
    let l = match rng.gen_range(0..3) {
        0 => random_body(&mut rng, n)?,
        1 => {
            let len = rng.gen_range(0.0..0.3);
            let u = random_unit(&mut rng, n);
            k.translated(&u.iter().map(|v| len * v).collect::<Vec<_>>())?
        }
        _ => k.clone().with_outer_radius(rng.gen_range(0.0..0.2))?,
    };
    Ok((k, l, rho))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma41Trial {
    pub trial: u64,
    pub report: Option<Lemma41Report>,
    pub error: Option<String>,
}

/// `count` randomized trials; a failing trial records its error.
pub fn lemma41_trials(count: u64, samples: usize, seed: u64, coarse: &CoarseOptions) -> Vec<Lemma41Trial> {
    (0..count)
        .into_par_iter()
        .map(|t| {
            let run = || -> Result<Lemma41Report> {
                let (k, l, rho) = random_lemma41_trial(seed, t)?;
                verify_lemma41(&k, &l, rho, samples, derive_seed(seed, &[t]), coarse)
            };
            match run() {
                Ok(r) => Lemma41Trial {
                    trial: t,
                    report: Some(r),
                    error: None,
                },
                Err(e) => Lemma41Trial {
                    trial: t,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn lemma41_csv(trials: &[Lemma41Trial]) -> String {
    let mut out = String::from("# supmeas lemma41 v1\n");
    out.push_str(LEMMA41_COLUMNS);
    out.push('\n');
    for t in trials {
        match &t.report {
            Some(r) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                t.trial,
                r.n,
                r.rho,
                r.lhs,
                r.lhs_stderr,
                r.coarsening_error,
                r.term_p,
                r.term_u,
                r.term_sym,
                r.rhs,
                r.sigma,
                r.holds,
                r.samples,
                r.seed
            )
            .unwrap(),
            None => writeln!(
                out,
                "{},,,,,,,,,,,false,,,{}",
                t.trial,
                csv_escape(t.error.as_deref().unwrap_or(""))
            )
            .unwrap(),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    const SQUARE: &str = r#"
samples = 4000
ladder = [0.2, 0.1]
[body]
kind = "vpolytope"
vertices = [[0, 0], [1, 0], [1, 1], [0, 1]]
[family]
kind = "translate"
direction = [1, 0]
"#;

    #[test]
    fn config_defaults_and_rejections() {
        let c = config(SQUARE);
        assert_eq!(c.fit_tolerance, 0.05);
        assert_eq!(c.ratio_growth, 0.2);
        assert_eq!(c.validate(2).unwrap(), vec![0, 1]);
        assert!(ExperimentConfig::parse(&SQUARE.replace("samples", "sample")).is_err());
        let mut bad = c.clone();
        bad.ladder = vec![0.1, 0.2];
        assert!(matches!(bad.validate(2), Err(Error::Config(_))));
        bad.ladder = vec![0.1, -0.2];
        assert!(bad.validate(2).is_err());
        bad.ladder = vec![0.1];
        bad.indices = Some(vec![2]);
        assert!(bad.validate(2).is_err());
    }

    #[test]
    fn families_produce_expected_distances() {
        let sq = config(SQUARE).body.build().unwrap();
        let (k, l) = FamilySpec::Translate { direction: vec![3.0, 4.0] }
            .perturb(&sq, 0.5)
            .unwrap();
        assert!((crate::geometry::hausdorff_distance(&k, &l).unwrap() - 0.5).abs() < 1e-3);
        let (_, l) = FamilySpec::MinkowskiRound.perturb(&sq, 0.25).unwrap();
        assert_eq!(l.outer_radius(), 0.25);
        let ball = ConvexBody::ball(vec![1.0, 2.0], 2.0).unwrap();
        let (k, l) = FamilySpec::CapCut { index: None }.perturb(&ball, 0.3).unwrap();
        let d = crate::geometry::hausdorff_distance(&k, &l).unwrap();
        assert!((d - 2.0 * (1.0 - 0.3f64.cos())).abs() < 1e-3, "{d}");
        let ball3 = ConvexBody::ball(vec![0.0, 0.0, 0.5], 1.0).unwrap();
        let (k, l) = FamilySpec::CapCut { index: Some(1) }.perturb(&ball3, 0.2).unwrap();
        assert_eq!(k.support_function(&[0.0, 0.0, 1.0]).unwrap(), 0.5);
        assert!(l.support_function(&[1.0, 0.0, 0.0]).unwrap() <= 1.0);
        assert!(FamilySpec::CapCut { index: None }.perturb(&sq, 0.1).is_err());
        assert!(FamilySpec::VertexJitter { seed: 1 }.perturb(&ball, 0.1).is_err());
        let (_, l1) = FamilySpec::VertexJitter { seed: 1 }.perturb(&sq, 0.1).unwrap();
        let (_, l2) = FamilySpec::VertexJitter { seed: 1 }.perturb(&sq, 0.1).unwrap();
        assert_eq!(
            crate::geometry::bodyfile::body_to_string(&l1),
            crate::geometry::bodyfile::body_to_string(&l2)
        );
        assert!(crate::geometry::hausdorff_distance(&sq, &l1).unwrap() <= 0.1 + 1e-6);
    }

    #[test]
    fn identical_bodies_are_at_distance_zero() {
        let sq = config(SQUARE).body.build().unwrap();
        let (lo, hi, res) = compare_bodies(&sq, &sq, &[0, 1], 3000, 3, &CoarseOptions::default()).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi < 1e-9);
        for r in res {
            assert!(r.dbl <= 3.0 * r.stderr + 1e-12, "{r:?}");
        }
    }

    #[test]
    fn ladder_report_is_deterministic() {
        let c = config(SQUARE);
        let a = run_theorem1(&c, 5).unwrap();
        let b = run_theorem1(&c, 5).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.records.len(), 2);
        assert!(a.records.iter().all(ExperimentRecord::is_ok));
        assert!(a.to_csv().starts_with("# supmeas theorem1 v1\nfamily,"));
        let json = a.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["records"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn failing_steps_are_recorded_not_fatal() {
        let mut c = config(SQUARE);
        c.family = FamilySpec::CapCut { index: None };
        let r = run_theorem1(&c, 1).unwrap();
        assert!(r.records.iter().all(|r| r.error.is_some()));
        assert!(!r.passed());
        assert!(r.to_csv().contains("cap_cut needs a ball"));
    }

    #[test]
    fn coupling_inequality_for_a_translate() {
        let k = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let l = k.translated(&[0.2, 0.0]).unwrap();
        let r = verify_lemma41(&k, &l, 1.0, 1500, 2, &CoarseOptions::default()).unwrap();
        assert!(r.holds);
        assert!(r.lhs <= r.rhs, "{r:?}");
        // |p_K - p_L| <= t pointwise
        let shell = std::f64::consts::PI * 3.0;
        assert!(r.term_p <= 0.2 * shell * 1.05);
        let same = verify_lemma41(&k, &k, 0.5, 1000, 2, &CoarseOptions::default()).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert_eq!(same.rhs, 0.0);
        assert!(verify_lemma41(&k, &l, 0.0, 1000, 2, &CoarseOptions::default()).is_err());
    }

    #[test]
    fn random_trials_are_reproducible() {
        let a = random_lemma41_trial(9, 4).unwrap();
        let b = random_lemma41_trial(9, 4).unwrap();
        assert_eq!(a.0.dim(), b.0.dim());
        assert_eq!(a.2, b.2);
        let t = lemma41_trials(3, 800, 11, &CoarseOptions::default());
        assert_eq!(lemma41_csv(&t), lemma41_csv(&lemma41_trials(3, 800, 11, &CoarseOptions::default())));
    }
}
