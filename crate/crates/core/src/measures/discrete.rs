//! Weighted finite atom lists on `Σ^n = R^n × S^{n-1}` or on `S^{n-1}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceTag {
    /// Pairs `(x, u)`, stored as `2n` coordinates.
    SigmaN,
    /// Unit vectors `u`, stored as `n` coordinates.
    Sphere,
}

impl SpaceTag {
    pub fn stride(self, n: usize) -> usize {
        match self {
            SpaceTag::SigmaN => 2 * n,
            SpaceTag::Sphere => n,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpaceTag::SigmaN => "sigma",
            SpaceTag::Sphere => "sphere",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sigma" => Some(SpaceTag::SigmaN),
            "sphere" => Some(SpaceTag::Sphere),
            _ => None,
        }
    }
}

/// An element of the normal bundle: a boundary point and an outer unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl SupportPoint {
    pub fn new(x: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if x.len() != u.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: u.len(),
            });
        }
        let nu = norm(&u);
        if (nu - 1.0).abs() > 1e-10 {
            return Err(Error::NonUnitDirection { norm: nu });
        }
        Ok(Self { x, u })
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.x.clone();
        c.extend_from_slice(&self.u);
        c
    }
}

/// A discrete signed measure.
///
/// Coordinates are shared behind an [`Arc`] so that measures differing only
/// in their weights (the `Λ_i` of one body, or replicate sub-measures) do not
/// copy the atoms. Each atom may carry a replicate label; replicate `r` on its
/// own, scaled by the replicate count, is an independent estimate of the same
/// measure.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    tag: SpaceTag,
    n: usize,
    coords: Arc<Vec<f64>>,
    weights: Vec<f64>,
    labels: Option<Arc<Vec<u16>>>,
    replicates: usize,
    total: f64,
}

pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

impl DiscreteMeasure {
    pub fn empty(tag: SpaceTag, n: usize) -> Self {
        Self::new(tag, n, Vec::new(), Vec::new()).expect("empty measure")
    }

    pub fn new(tag: SpaceTag, n: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::with_shared(tag, n, Arc::new(coords), weights)
    }

    pub fn with_shared(
        tag: SpaceTag,
        n: usize,
        coords: Arc<Vec<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let stride = tag.stride(n);
        if coords.len() != stride * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: stride * weights.len(),
                got: coords.len(),
            });
        }
        let total = compensated_sum(weights.iter().copied());
        Ok(Self {
            tag,
            n,
            coords,
            weights,
            labels: None,
            replicates: 1,
            total,
        })
    }

    /// Attaches replicate labels in `0..replicates`, one per atom.
    pub fn with_replicates(mut self, labels: Arc<Vec<u16>>, replicates: usize) -> Result<Self> {
        if labels.len() != self.len() || labels.iter().any(|&l| l as usize >= replicates) {
            return Err(Error::Config("replicate labels do not match atoms".into()));
        }
        self.labels = Some(labels);
        self.replicates = replicates;
        Ok(self)
    }

    pub fn from_support_points(n: usize, atoms: &[(SupportPoint, f64)]) -> Result<Self> {
        let mut coords = Vec::with_capacity(atoms.len() * 2 * n);
        let mut weights = Vec::with_capacity(atoms.len());
        for (p, w) in atoms {
            if p.x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.x.len(),
                });
            }
            coords.extend_from_slice(&p.x);
            coords.extend_from_slice(&p.u);
            weights.push(*w);
        }
        Self::new(SpaceTag::SigmaN, n, coords, weights)
    }

    pub fn dirac(tag: SpaceTag, n: usize, at: Vec<f64>, weight: f64) -> Result<Self> {
        Self::new(tag, n, at, vec![weight])
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn stride(&self) -> usize {
        self.tag.stride(self.n)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        let s = self.stride();
        &self.coords[k * s..(k + 1) * s]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn shared_coords(&self) -> Arc<Vec<f64>> {
        Arc::clone(&self.coords)
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn labels(&self) -> Option<&[u16]> {
        self.labels.as_deref().map(|v| v.as_slice())
    }

    /// Sum of `|w|`.
    pub fn gross_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().map(|w| w.abs()))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    /// Same atoms with new weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        let mut m = Self::with_shared(self.tag, self.n, Arc::clone(&self.coords), weights)?;
        m.labels = self.labels.clone();
        m.replicates = self.replicates;
        Ok(m)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.reweighted(self.weights.iter().map(|w| alpha * w).collect())
            .expect("same length")
    }

    /// Shifts the position slot by `t` (or the whole point on the sphere).
    pub fn translated(&self, t: &[f64]) -> Result<Self> {
        if t.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: t.len(),
            });
        }
        let s = self.stride();
        let mut coords = self.coords.as_ref().clone();
        for atom in coords.chunks_mut(s) {
            for (c, d) in atom.iter_mut().zip(t) {
                *c += d;
            }
        }
        let mut m = Self::new(self.tag, self.n, coords, self.weights.clone())?;
        m.labels = self.labels.clone();
        m.replicates = self.replicates;
        Ok(m)
    }

    /// `self - other` as one atom list (atoms are not merged).
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut coords = Vec::with_capacity(self.coords.len() + other.coords.len());
        coords.extend_from_slice(&self.coords);
        coords.extend_from_slice(&other.coords);
        let mut weights = self.weights.clone();
        weights.extend(other.weights.iter().map(|w| -w));
        let mut m = Self::new(self.tag, self.n, coords, weights)?;
        if let (Some(a), Some(b)) = (&self.labels, &other.labels) {
            if self.replicates == other.replicates {
                let mut l = a.as_ref().clone();
                l.extend_from_slice(b);
                m = m.with_replicates(Arc::new(l), self.replicates)?;
            }
        }
        Ok(m)
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.tag != other.tag {
            return Err(Error::SpaceMismatch);
        }
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }

    /// Replicate `r` as a stand-alone estimate: its atoms with weights
    /// multiplied by the replicate count.
    pub fn replicate(&self, r: usize) -> Self {
        let scale = self.replicates as f64;
        let weights = match &self.labels {
            Some(l) => self
                .weights
                .iter()
                .zip(l.iter())
                .map(|(w, &lab)| if lab as usize == r { w * scale } else { 0.0 })
                .collect(),
            None => self.weights.clone(),
        };
        let mut m = Self::with_shared(self.tag, self.n, Arc::clone(&self.coords), weights)
            .expect("same length");
        m.labels = None;
        m.replicates = 1;
        m
    }

    /// Per-replicate estimates of `Σ g(atom)·w`.
    pub fn replicate_integrals<F: Fn(&[f64]) -> f64>(&self, g: F) -> Vec<f64> {
        let r = self.replicates;
        let mut acc = vec![Vec::new(); r];
        for k in 0..self.len() {
            let lab = self.labels.as_ref().map_or(0, |l| l[k] as usize);
            acc[lab].push(g(self.point(k)) * self.weights[k]);
        }
        acc.into_iter()
            .map(|v| r as f64 * compensated_sum(v))
            .collect()
    }

    /// Standard error of `Σ g·w` from the spread of replicate estimates;
    /// zero with fewer than two replicates.
    pub fn integral_stderr<F: Fn(&[f64]) -> f64>(&self, g: F) -> f64 {
        stderr(&self.replicate_integrals(g))
    }

    pub fn mass_stderr(&self) -> f64 {
        self.integral_stderr(|_| 1.0)
    }

    /// Sorted copy with atoms in lexicographic coordinate order, for hashing
    /// and canonical output.
    pub fn canonicalized(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.weights[a].total_cmp(&self.weights[b]))
        });
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut weights = Vec::with_capacity(self.len());
        let mut labels = Vec::with_capacity(self.len());
        for &k in &idx {
            coords.extend_from_slice(self.point(k));
            weights.push(self.weights[k]);
            if let Some(l) = &self.labels {
                labels.push(l[k]);
            }
        }
        let mut m = Self::new(self.tag, self.n, coords, weights).expect("same length");
        if self.labels.is_some() {
            m.labels = Some(Arc::new(labels));
            m.replicates = self.replicates;
        }
        m
    }
}

/// Standard error of the mean of replicate estimates.
pub fn stderr(values: &[f64]) -> f64 {
    let r = values.len();
    if r < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
    (var / r as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> DiscreteMeasure {
        DiscreteMeasure::new(
            SpaceTag::SigmaN,
            1,
            vec![0.0, 1.0, 2.0, -1.0],
            vec![0.5, 1.5],
        )
        .unwrap()
    }

    #[test]
    fn total_mass_is_cached_sum() {
        let m = two_atoms();
        assert_eq!(m.total_mass(), 2.0);
        assert_eq!(m.len(), 2);
        assert_eq!(m.point(1), &[2.0, -1.0]);
    }

    #[test]
    fn coordinate_count_must_match() {
        let e = DiscreteMeasure::new(SpaceTag::SigmaN, 2, vec![0.0; 3], vec![1.0]);
        assert!(matches!(e, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn support_point_rejects_non_unit_normal() {
        assert!(SupportPoint::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(SupportPoint::new(vec![0.0], vec![1.0, 0.0]).is_err());
        assert!(SupportPoint::new(vec![0.0, 0.0], vec![0.6, 0.8]).is_ok());
    }

    #[test]
    fn translation_moves_only_the_position() {
        let m = two_atoms().translated(&[3.0]).unwrap();
        assert_eq!(m.point(0), &[3.0, 1.0]);
        assert_eq!(m.point(1), &[5.0, -1.0]);
    }

    #[test]
    fn difference_negates_second() {
        let m = two_atoms();
        let d = m.difference(&m).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.total_mass(), 0.0);
        assert_eq!(d.gross_mass(), 4.0);
    }

    #[test]
    fn replicates_average_to_whole() {
        let m = DiscreteMeasure::new(
            SpaceTag::Sphere,
            1,
            vec![1.0, -1.0, 1.0, 1.0],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap()
        .with_replicates(Arc::new(vec![0, 1, 0, 1]), 2)
        .unwrap();
        let masses = m.replicate_integrals(|_| 1.0);
        assert_eq!(masses, vec![8.0, 12.0]);
        assert_eq!(m.replicate(1).total_mass(), 12.0);
        assert!((m.mass_stderr() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_order_is_lexicographic() {
        let m = DiscreteMeasure::new(
            SpaceTag::Sphere,
            1,
            vec![2.0, -1.0, 0.5],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap()
        .canonicalized();
        assert_eq!(m.coords(), &[-1.0, 0.5, 2.0]);
        assert_eq!(m.weights(), &[2.0, 3.0, 1.0]);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let v = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
