//! Monte-Carlo support measures from local parallel volumes.
//!
//! One stream of shell samples serves every radius: a sample `x` with
//! `d_K(x) <= rho_n` is mapped to the atom `(p_K(x), u_K(x))`, and its weight
//! in `μ_{K,ρ_j}` is the box volume over the candidate count when
//! `d_K(x) <= ρ_j`. The support measures are then the fixed combinations
//! `Λ_i = Σ_j a_ij μ_{K,ρ_j}`, so each atom carries the piecewise-constant
//! kernel `Σ_j a_ij [d_K(x) <= ρ_j]`.
//!
//! The candidate count per replicate is fixed in advance from a pilot run on
//! an independent stream, so every mass is an unbiased estimator.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::kappa;
use crate::error::{Error, Result};
use crate::geometry::sampling::derive_seed;
use crate::geometry::{project, ConvexBody, SampleStream, SamplingBox};

use super::discrete::{compensated_sum, stderr, DiscreteMeasure, SpaceTag};

pub const DEFAULT_REPLICATES: usize = 8;
const PILOT: u64 = 4096;
const TAG_PILOT: u64 = 0x5049;
const TAG_STREAM: u64 = 0x5354;
const TAG_STEINER: u64 = 0x5346;

/// How many shell samples to draw and how to split them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Target number of accepted samples in the outermost shell.
    pub samples: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            replicates: DEFAULT_REPLICATES,
            seed,
        }
    }
}

/// Raw shell samples: foot point and direction per accepted candidate.
#[derive(Debug, Clone)]
pub struct ShellSamples {
    pub n: usize,
    /// `(p, u)` per sample, flat.
    pub coords: Arc<Vec<f64>>,
    pub dist: Vec<f64>,
    pub labels: Arc<Vec<u16>>,
    /// Candidates drawn per replicate.
    pub tries: u64,
    pub replicates: usize,
    pub box_volume: f64,
    pub rho: f64,
}

impl ShellSamples {
    /// Weight of one candidate in the pooled estimate.
    pub fn unit_weight(&self) -> f64 {
        self.box_volume / (self.replicates as f64 * self.tries as f64)
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    /// The measure whose atom weights are `kernel(d)·unit_weight`.
    pub fn measure<F: Fn(f64) -> f64>(&self, kernel: F) -> DiscreteMeasure {
        let w0 = self.unit_weight();
        let weights = self.dist.iter().map(|&d| kernel(d) * w0).collect();
        DiscreteMeasure::with_shared(SpaceTag::SigmaN, self.n, Arc::clone(&self.coords), weights)
            .and_then(|m| m.with_replicates(Arc::clone(&self.labels), self.replicates))
            .expect("consistent sample arrays")
    }

    /// `μ_{K,ρ}` for `ρ <= self.rho`.
    pub fn parallel_measure(&self, rho: f64) -> DiscreteMeasure {
        self.measure(|d| if d <= rho { 1.0 } else { 0.0 })
    }
}

/// Candidates per replicate so that about `plan.samples` land in the shell.
pub fn tries_for(
    body: &ConvexBody,
    bx: &SamplingBox,
    rho: f64,
    plan: &SamplingPlan,
) -> Result<u64> {
    let mut stream = SampleStream::new(body.dim(), derive_seed(plan.seed, &[TAG_PILOT]));
    let mut hit = 0u64;
    for _ in 0..PILOT {
        let x = bx.map(&stream.next_point());
        let d = project(body, &x)?.d;
        if d > 0.0 && d <= rho {
            hit += 1;
        }
    }
    if hit == 0 {
        return Err(Error::DegenerateShell);
    }
    let rate = hit as f64 / PILOT as f64;
    let total = (plan.samples as f64 / rate).ceil() as u64;
    Ok(total.div_ceil(plan.replicates.max(1) as u64).max(1))
}

/// Candidate stream of replicate `r`; shared by every body sampled with
/// the same seed.
pub fn replicate_stream(n: usize, seed: u64, r: usize) -> SampleStream {
    SampleStream::new(n, derive_seed(seed, &[TAG_STREAM, r as u64]))
}

/// Draws `tries` candidates per replicate from `bx` and keeps those in the
/// shell `0 < d_K(x) <= rho`.
pub fn sample_shells(
    body: &ConvexBody,
    bx: &SamplingBox,
    rho: f64,
    tries: u64,
    replicates: usize,
    seed: u64,
) -> Result<ShellSamples> {
    if !(rho > 0.0) {
        return Err(Error::InvalidBody(format!("shell radius {rho}")));
    }
    let n = body.dim();
    let blocks: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut stream = replicate_stream(n, seed, r);
            let mut coords = Vec::new();
            let mut dist = Vec::new();
            for _ in 0..tries {
                let x = bx.map(&stream.next_point());
                let pr = project(body, &x)?;
                if pr.d > 0.0 && pr.d <= rho {
                    coords.extend_from_slice(&pr.p);
                    coords.extend_from_slice(pr.u.as_ref().expect("d > 0"));
                    dist.push(pr.d);
                }
            }
            Ok((coords, dist))
        })
        .collect();
    let mut coords = Vec::new();
    let mut dist = Vec::new();
    let mut labels = Vec::new();
    for (r, b) in blocks.into_iter().enumerate() {
        let (c, d) = b?;
        labels.extend(std::iter::repeat(r as u16).take(d.len()));
        coords.extend(c);
        dist.extend(d);
    }
    if dist.is_empty() {
        return Err(Error::DegenerateShell);
    }
    Ok(ShellSamples {
        n,
        coords: Arc::new(coords),
        dist,
        labels: Arc::new(labels),
        tries,
        replicates,
        box_volume: bx.volume(),
        rho,
    })
}

/// `μ_{K,ρ}` from about `samples` shell samples: atoms `(p_K(x), u_K(x))`
/// with equal weights summing to the shell-volume estimate.
pub fn empirical_parallel_measure(
    body: &ConvexBody,
    rho: f64,
    samples: usize,
    seed: u64,
) -> Result<DiscreteMeasure> {
    if samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    let plan = SamplingPlan::new(samples, seed);
    let bx = SamplingBox::for_body(body, rho);
    let tries = tries_for(body, &bx, rho, &plan)?;
    Ok(sample_shells(body, &bx, rho, tries, plan.replicates, seed)?.parallel_measure(rho))
}

/// Extraction radii `ρ_j = j/n`.
pub fn extraction_radii(n: usize) -> Vec<f64> {
    (1..=n).map(|j| j as f64 / n as f64).collect()
}

/// Coefficients `a[i][j]` with `Λ_i = Σ_j a_ij μ_{K,ρ_j}`, from inverting
/// `μ_{K,ρ_j} = Σ_i ρ_j^{n-i} κ_{n-i} Λ_i`.
pub fn extraction_coefficients(n: usize) -> Result<Vec<Vec<f64>>> {
    let radii = extraction_radii(n);
    let m = DMatrix::from_fn(n, n, |j, i| radii[j].powi((n - i) as i32) * kappa(n - i));
    let inv = m.clone().try_inverse().ok_or(Error::IllConditioned {
        residual: f64::INFINITY,
    })?;
    let residual = (&m * &inv - DMatrix::identity(n, n)).amax();
    if residual > 1e-8 {
        return Err(Error::IllConditioned { residual });
    }
    Ok((0..n)
        .map(|i| (0..n).map(|j| inv[(i, j)]).collect())
        .collect())
}

/// The estimates `Λ_0, …, Λ_{n-1}` of one body.
#[derive(Debug, Clone)]
pub struct MeasureFamily {
    pub n: usize,
    /// Free-form description of the body.
    pub body: String,
    pub lambdas: Vec<DiscreteMeasure>,
    pub samples: ShellSummary,
    pub seed: u64,
    pub radii: Vec<f64>,
}

/// Counts and volume estimates behind a family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellSummary {
    pub accepted: usize,
    pub tries_per_replicate: u64,
    pub replicates: usize,
    pub box_volume: f64,
    /// Estimated `H^n(K^{ρ_j})` per radius.
    pub shell_volumes: Vec<f64>,
}

impl MeasureFamily {
    pub fn lambda(&self, i: usize) -> &DiscreteMeasure {
        &self.lambdas[i]
    }

    pub fn masses(&self) -> Vec<f64> {
        self.lambdas.iter().map(|m| m.total_mass()).collect()
    }

    pub fn mass_stderrs(&self) -> Vec<f64> {
        self.lambdas.iter().map(|m| m.mass_stderr()).collect()
    }
}

/// Builds the family from shell samples covering radius `ρ_n = 1`.
pub fn family_from_samples(s: &ShellSamples, body: String, seed: u64) -> Result<MeasureFamily> {
    let n = s.n;
    let radii = extraction_radii(n);
    let a = extraction_coefficients(n)?;
    let lambdas = (0..n)
        .map(|i| {
            let row = a[i].clone();
            let r = radii.clone();
            s.measure(move |d| {
                row.iter()
                    .zip(&r)
                    .filter(|(_, &rho)| d <= rho)
                    .map(|(c, _)| c)
                    .sum()
            })
        })
        .collect();
    let w0 = s.unit_weight();
    let shell_volumes = radii
        .iter()
        .map(|&rho| w0 * s.dist.iter().filter(|&&d| d <= rho).count() as f64)
        .collect();
    Ok(MeasureFamily {
        n,
        body,
        lambdas,
        samples: ShellSummary {
            accepted: s.len(),
            tries_per_replicate: s.tries,
            replicates: s.replicates,
            box_volume: s.box_volume,
            shell_volumes,
        },
        seed,
        radii,
    })
}

/// Extracts `Λ_0 … Λ_{n-1}` of `body` from about `samples` shell samples.
pub fn extract_support_measures(
    body: &ConvexBody,
    samples: usize,
    seed: u64,
) -> Result<MeasureFamily> {
    extract_with_plan(body, &SamplingPlan::new(samples, seed))
}

pub fn extract_with_plan(body: &ConvexBody, plan: &SamplingPlan) -> Result<MeasureFamily> {
    if plan.samples < body.dim() {
        return Err(Error::Config(format!(
            "need at least {} samples, got {}",
            body.dim(),
            plan.samples
        )));
    }
    let bx = SamplingBox::for_body(body, 1.0);
    let tries = tries_for(body, &bx, 1.0, plan)?;
    let s = sample_shells(body, &bx, 1.0, tries, plan.replicates, plan.seed)?;
    family_from_samples(&s, describe(body), plan.seed)
}

/// Families of two bodies from common random numbers: one candidate stream
/// over a box containing both outer parallel bodies.
pub fn extract_pair(
    k: &ConvexBody,
    l: &ConvexBody,
    plan: &SamplingPlan,
) -> Result<(MeasureFamily, MeasureFamily)> {
    if k.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: l.dim(),
        });
    }
    let bx = SamplingBox::for_body(k, 1.0).union(&SamplingBox::for_body(l, 1.0));
    let tries = tries_for(k, &bx, 1.0, plan)?;
    let (sk, sl) = rayon::join(
        || sample_shells(k, &bx, 1.0, tries, plan.replicates, plan.seed),
        || sample_shells(l, &bx, 1.0, tries, plan.replicates, plan.seed),
    );
    Ok((
        family_from_samples(&sk?, describe(k), plan.seed)?,
        family_from_samples(&sl?, describe(l), plan.seed)?,
    ))
}

fn describe(body: &ConvexBody) -> String {
    crate::geometry::bodyfile::body_to_string(body)
}

/// Intrinsic volumes `V_0 … V_n` from volume estimates of `K_ρ` at radii
/// `0.5, 1.0, …, (n+1)/2`, by a least-squares fit of the Steiner polynomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinerFit {
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    /// `V_0 … V_n`.
    pub intrinsic: Vec<f64>,
    /// Standard errors of `intrinsic` from replicate fits.
    pub stderr: Vec<f64>,
}

pub fn steiner_fit(body: &ConvexBody, samples: usize, seed: u64) -> Result<SteinerFit> {
    let n = body.dim();
    let radii: Vec<f64> = (1..=n + 1).map(|j| j as f64 / 2.0).collect();
    let rmax = radii[n];
    let bx = SamplingBox::for_body(body, rmax);
    let reps = DEFAULT_REPLICATES;
    let per = (samples as u64).div_ceil(reps as u64).max(1);
    // per replicate: volume of K_ρ for every radius from one stream
    let counts: Vec<Result<Vec<u64>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut s = SampleStream::new(n, derive_seed(seed, &[TAG_STEINER, r as u64]));
            let mut c = vec![0u64; radii.len()];
            for _ in 0..per {
                let x = bx.map(&s.next_point());
                let d = project(body, &x)?.d;
                for (k, &rho) in radii.iter().enumerate() {
                    if d <= rho {
                        c[k] += 1;
                    }
                }
            }
            Ok(c)
        })
        .collect();
    let counts: Vec<Vec<u64>> = counts.into_iter().collect::<Result<_>>()?;
    let vol = bx.volume();
    let design = DMatrix::from_fn(radii.len(), n + 1, |j, i| {
        radii[j].powi((n - i) as i32) * kappa(n - i)
    });
    let fit = |v: &[f64]| -> Result<Vec<f64>> {
        let svd = design.clone().svd(true, true);
        let x = svd
            .solve(&DVector::from_column_slice(v), 1e-14)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(x.iter().copied().collect())
    };
    let per_rep: Vec<Vec<f64>> = counts
        .iter()
        .map(|c| {
            fit(&c
                .iter()
                .map(|&k| vol * k as f64 / per as f64)
                .collect::<Vec<_>>())
        })
        .collect::<Result<_>>()?;
    let volumes: Vec<f64> = (0..radii.len())
        .map(|k| {
            compensated_sum(counts.iter().map(|c| c[k] as f64)) * vol / (per * reps as u64) as f64
        })
        .collect();
    let intrinsic = fit(&volumes)?;
    let stderr = (0..=n)
        .map(|i| stderr(&per_rep.iter().map(|v| v[i]).collect::<Vec<_>>()))
        .collect();
    Ok(SteinerFit {
        radii,
        volumes,
        intrinsic,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn coefficients_for_three_dimensions() {
        let a = extraction_coefficients(3).unwrap();
        // Λ_2 = (9μ1 - 4.5μ2 + μ3)/2, Λ_1 = (-22.5μ1 + 18μ2 - 4.5μ3)/π
        let l2 = [4.5, -2.25, 0.5];
        let l1 = [-22.5 / PI, 18.0 / PI, -4.5 / PI];
        for j in 0..3 {
            assert!((a[2][j] - l2[j]).abs() < 1e-12);
            assert!((a[1][j] - l1[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficients_invert_steiner_for_all_supported_dimensions() {
        for n in 1..=6 {
            let a = extraction_coefficients(n).unwrap();
            let r = extraction_radii(n);
            for i in 0..n {
                for k in 0..n {
                    let s: f64 = (0..n)
                        .map(|j| a[i][j] * r[j].powi((n - k) as i32) * kappa(n - k))
                        .sum();
                    let want = if i == k { 1.0 } else { 0.0 };
                    assert!((s - want).abs() < 1e-9, "n={n} i={i} k={k}");
                }
            }
        }
    }

    #[test]
    fn point_shell_mass_is_disc_area() {
        let p = ConvexBody::point(vec![0.0, 0.0]).unwrap();
        let m = empirical_parallel_measure(&p, 1.0, 40_000, 1).unwrap();
        assert!((m.total_mass() - PI).abs() < 5.0 * m.mass_stderr() + 1e-3);
    }

    #[test]
    fn zero_samples_is_an_error() {
        let p = ConvexBody::point(vec![0.0, 0.0]).unwrap();
        assert!(empirical_parallel_measure(&p, 1.0, 0, 1).is_err());
        assert!(empirical_parallel_measure(&p, 0.0, 10, 1).is_err());
    }

    #[test]
    fn point_body_has_only_lambda_zero() {
        let p = ConvexBody::point(vec![0.5, -0.25]).unwrap();
        let f = extract_support_measures(&p, 20_000, 3).unwrap();
        let m = f.masses();
        let se = f.mass_stderrs();
        assert!((m[0] - 1.0).abs() < 4.0 * se[0] + 1e-3, "{m:?} {se:?}");
        assert!(m[1].abs() < 4.0 * se[1] + 1e-3, "{m:?} {se:?}");
    }

    #[test]
    fn disc_masses_match_steiner() {
        let b = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let f = extract_support_measures(&b, 100_000, 5).unwrap();
        let m = f.masses();
        let se = f.mass_stderrs();
        assert!((m[0] - 1.0).abs() < 4.0 * se[0], "{m:?} {se:?}");
        assert!((m[1] - PI).abs() < 4.0 * se[1], "{m:?} {se:?}");
    }

    #[test]
    fn steiner_fit_of_square() {
        let sq = ConvexBody::unit_cube(2).unwrap();
        let fit = steiner_fit(&sq, 80_000, 2).unwrap();
        let want = [1.0, 2.0, 1.0];
        for i in 0..3 {
            assert!(
                (fit.intrinsic[i] - want[i]).abs() < 0.02,
                "{:?}",
                fit.intrinsic
            );
        }
    }
}
