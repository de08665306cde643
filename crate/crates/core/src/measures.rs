//! Discrete measures on `ℝ^d`: weighted point clouds with merged duplicates,
//! restriction, mixtures, and the structured generators used by the fixtures
//! (atom lists, DC-curve samples, absolutely-continuous grids).

use crate::dc::DcChart;
use crate::numeric::{lex_cmp, pairwise_sum, snap_vec};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A point of `ℝ^d`. Coordinates are snapped to the 1e-12 grid at
/// construction so that equality of support points is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point {
            coords: snap_vec(&coords),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A probability measure with finite support on `ℝ^d`.
///
/// Invariants enforced at construction: weights are positive and sum to one
/// within 1e-12, points are pairwise distinct on the snapping grid and sorted
/// lexicographically. Zero-weight points are dropped, duplicates are merged
/// by adding their weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Builds a normalized measure from raw points and nonnegative weights.
pub fn make_measure(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch(points.len(), weights.len()));
    }
    if points.is_empty() {
        return Err(Error::EmptySupport);
    }
    let dim = points[0].len();
    for p in &points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::Descriptor("non-finite coordinate".into()));
        }
    }
    for &w in &weights {
        if w < 0.0 || !w.is_finite() {
            return Err(Error::NegativeWeight(w));
        }
    }
    let mut items: Vec<(Vec<f64>, f64)> = points
        .into_iter()
        .zip(weights)
        .filter(|(_, w)| *w > 0.0)
        .map(|(p, w)| (snap_vec(&p), w))
        .collect();
    if items.is_empty() {
        return Err(Error::EmptySupport);
    }
    items.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let mut merged: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(items.len());
    for (p, w) in items {
        match merged.last_mut() {
            Some((q, ws)) if *q == p => ws.push(w),
            _ => merged.push((p, vec![w])),
        }
    }
    let mut pts = Vec::with_capacity(merged.len());
    let mut wts = Vec::with_capacity(merged.len());
    for (p, ws) in merged {
        pts.push(Point { coords: p });
        wts.push(pairwise_sum(&ws));
    }
    let total = pairwise_sum(&wts);
    if total <= 0.0 {
        return Err(Error::EmptySupport);
    }
    // Renormalize only when the total is visibly off one; this keeps
    // `make_measure` a bitwise fixed point on already-normalized data.
    if (total - 1.0).abs() > 1e-12 {
        for w in wts.iter_mut() {
            *w /= total;
        }
    }
    Ok(DiscreteMeasure {
        dim,
        points: pts,
        weights: wts,
    })
}

impl DiscreteMeasure {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total mass of a measurable set given as a point predicate.
    pub fn mass_where(&self, pred: impl Fn(&[f64]) -> bool) -> f64 {
        let hits: Vec<f64> = self
            .points
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| pred(&p.coords))
            .map(|(_, w)| *w)
            .collect();
        pairwise_sum(&hits)
    }

    /// Second moment `∫ |x|² dμ`.
    pub fn second_moment(&self) -> f64 {
        let terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * crate::numeric::norm2(&p.coords))
            .collect();
        pairwise_sum(&terms)
    }

    /// Indices of the support points satisfying the predicate.
    pub fn indices_where(&self, pred: impl Fn(&[f64]) -> bool) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| pred(&p.coords))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Normalized restriction `μ_A = (μ ↾ A)/μ(A)` together with the mass `μ(A)`.
pub fn restrict(
    mu: &DiscreteMeasure,
    pred: impl Fn(&[f64]) -> bool,
) -> Result<(DiscreteMeasure, f64)> {
    let idx = mu.indices_where(&pred);
    if idx.is_empty() {
        return Err(Error::ZeroMassRestriction);
    }
    let mass = pairwise_sum(&idx.iter().map(|&i| mu.weights[i]).collect::<Vec<_>>());
    let pts = idx.iter().map(|&i| mu.points[i].coords.clone()).collect();
    let wts = idx.iter().map(|&i| mu.weights[i] / mass).collect();
    Ok((make_measure(pts, wts)?, mass))
}

/// A convex combination of mutually singular components, each remembered with
/// a label so that classification results can be scored against the ground
/// truth.
#[derive(Debug, Clone)]
pub struct MeasureMixture {
    pub components: Vec<(f64, DiscreteMeasure)>,
    pub labels: Vec<String>,
}

impl MeasureMixture {
    /// Builds a mixture and checks that the masses form a probability vector
    /// and that the component supports are pairwise disjoint.
    pub fn new_disjoint(
        components: Vec<(f64, DiscreteMeasure)>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptySupport);
        }
        if components.len() != labels.len() {
            return Err(Error::LengthMismatch(components.len(), labels.len()));
        }
        let total = pairwise_sum(&components.iter().map(|(m, _)| *m).collect::<Vec<_>>());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(total));
        }
        let mut seen: Vec<&Point> = Vec::new();
        for (_, c) in &components {
            for p in &c.points {
                if seen.iter().any(|q| q.coords == p.coords) {
                    return Err(Error::OverlappingComponents);
                }
            }
            seen.extend(c.points.iter());
        }
        Ok(MeasureMixture { components, labels })
    }

    /// Flattens the mixture into a single measure. Returns the measure and,
    /// for each of its support points, the index of the component it came
    /// from.
    pub fn flatten(&self) -> Result<(DiscreteMeasure, Vec<usize>)> {
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        let mut tags = Vec::new();
        for (ci, (mass, comp)) in self.components.iter().enumerate() {
            for (p, w) in comp.points.iter().zip(&comp.weights) {
                pts.push(p.coords.clone());
                wts.push(mass * w);
                tags.push(ci);
            }
        }
        let flat = make_measure(pts.clone(), wts)?;
        // Supports are disjoint, so every flattened point keeps its identity;
        // recover the tag of every (sorted) support point.
        let mut labels = vec![0usize; flat.len()];
        for (raw, tag) in pts.iter().zip(tags) {
            let snapped = snap_vec(raw);
            let pos = flat
                .points
                .binary_search_by(|q| lex_cmp(&q.coords, &snapped))
                .expect("flattened point present");
            labels[pos] = tag;
        }
        Ok((flat, labels))
    }
}

/// Uniform samples of a DC graph map over a deterministic low-discrepancy
/// grid in the parameter window.
///
/// For a one-dimensional parameter the grid consists of cell midpoints; in
/// higher dimension a Halton sequence is used. The graph coordinates of each
/// output point reproduce the parameters exactly.
pub fn sample_dc_curve(
    chart: &DcChart,
    n: usize,
    window: &[(f64, f64)],
) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::EmptySupport);
    }
    if window.len() != chart.k {
        return Err(Error::DimensionMismatch {
            expected: chart.k,
            found: window.len(),
        });
    }
    let params = parameter_grid(n, window);
    let mut pts = Vec::with_capacity(n);
    for x in &params {
        pts.push(chart.eval(x)?);
    }
    let w = vec![1.0 / n as f64; n];
    make_measure(pts, w)
}

/// Deterministic parameter grid: midpoints for `k = 1`, Halton points for
/// `k ≥ 2`.
pub fn parameter_grid(n: usize, window: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let k = window.len();
    if k == 1 {
        let (lo, hi) = window[0];
        return (0..n)
            .map(|i| vec![lo + (hi - lo) * (i as f64 + 0.5) / n as f64])
            .collect();
    }
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    (0..n)
        .map(|i| {
            (0..k)
                .map(|axis| {
                    let u = van_der_corput(i as u64 + 1, PRIMES[axis % PRIMES.len()]);
                    let (lo, hi) = window[axis];
                    lo + (hi - lo) * u
                })
                .collect()
        })
        .collect()
}

fn van_der_corput(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    r
}

/// Uniform measure on a regular grid of cell midpoints inside a box; the
/// discrete stand-in for an absolutely continuous density.
pub fn ac_grid(bounds: &[(f64, f64)], counts: &[usize]) -> Result<DiscreteMeasure> {
    if bounds.len() != counts.len() {
        return Err(Error::LengthMismatch(bounds.len(), counts.len()));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::EmptySupport);
    }
    let total: usize = counts.iter().product();
    let mut pts = Vec::with_capacity(total);
    let mut index = vec![0usize; counts.len()];
    loop {
        let p: Vec<f64> = index
            .iter()
            .zip(bounds)
            .zip(counts)
            .map(|((&i, &(lo, hi)), &c)| lo + (hi - lo) * (i as f64 + 0.5) / c as f64)
            .collect();
        pts.push(p);
        let mut axis = 0;
        loop {
            if axis == counts.len() {
                let w = vec![1.0 / total as f64; total];
                return make_measure(pts, w);
            }
            index[axis] += 1;
            if index[axis] < counts[axis] {
                break;
            }
            index[axis] = 0;
            axis += 1;
        }
    }
}
