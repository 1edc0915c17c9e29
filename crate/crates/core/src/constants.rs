//! Ball volumes and sphere surface areas.

use std::f64::consts::PI;

/// `kappa[j]` is the volume of the unit ball in R^j, `omega[k] = k * kappa[k]`
/// the surface area of the unit sphere in R^k.
#[derive(Debug, Clone)]
pub struct DimensionConstants {
    pub n: usize,
    pub kappa: Vec<f64>,
    pub omega: Vec<f64>,
}

impl DimensionConstants {
    pub fn new(n: usize) -> Self {
        let kappa: Vec<f64> = (0..=n).map(kappa).collect();
        let omega = (0..=n).map(|k| k as f64 * kappa[k]).collect();
        Self { n, kappa, omega }
    }
}

/// Volume of the unit j-ball, via kappa_j = kappa_{j-2} * 2 pi / j.
pub fn kappa(j: usize) -> f64 {
    match j {
        0 => 1.0,
        1 => 2.0,
        _ => kappa(j - 2) * 2.0 * PI / j as f64,
    }
}

/// Surface area of S^{k-1}, i.e. `k * kappa(k)`.
pub fn omega(k: usize) -> f64 {
    k as f64 * kappa(k)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Intrinsic volume V_i of a ball of radius r in R^n.
pub fn ball_intrinsic_volume(n: usize, i: usize, r: f64) -> f64 {
    binomial(n, i) * kappa(n) / kappa(n - i) * r.powi(i as i32)
}
