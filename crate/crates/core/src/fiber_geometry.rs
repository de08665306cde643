//! The fiber-wise metric structure: `W²_μ(ξ,ζ) = Σᵢ μᵢ W²(ξ_{xᵢ}, ζ_{xᵢ})`
//! and the metric scalar product `⟨ξ,ζ⟩_μ = Σᵢ μᵢ maxcorr(ξ_{xᵢ}, ζ_{xᵢ})`,
//! both computed by exact per-fiber transport.
//!
//! Fibers with at most two atoms on both sides use closed-form matchings;
//! larger fibers fall back to the transportation simplex. One solve per
//! fiber yields the correlation and the squared distance simultaneously, so
//! the polarization identity holds with the same optimizer on both sides.

use crate::fields::{barycenter, FiberCoupling, FiberMeasure, MeasureField, VectorFieldOnBase};
use crate::measures::make_measure;
use crate::numeric::{dist2, dot, pairwise_sum};
use crate::ot::solve_transport;
use crate::{Error, Result};

/// Optimal coupling of two fibers together with its correlation
/// `Σ m ⟨v,w⟩` and squared displacement `Σ m |v−w|²`.
struct FiberMatch {
    entries: Vec<(usize, usize, f64)>,
    corr: f64,
    sqdist: f64,
}

fn fiber_match(a: &FiberMeasure, b: &FiberMeasure) -> Result<FiberMatch> {
    let na = a.velocities.len();
    let nb = b.velocities.len();
    let entries: Vec<(usize, usize, f64)> = if na == 1 {
        (0..nb).map(|l| (0, l, b.probs[l])).collect()
    } else if nb == 1 {
        (0..na).map(|j| (j, 0, a.probs[j])).collect()
    } else if na == 2 && nb == 2 {
        // The coupling polytope is the segment m₁₁ ∈ [lo, hi]; the
        // correlation is affine in m₁₁, so an endpoint is optimal. Ties take
        // the lower endpoint.
        let c = |j: usize, l: usize| dot(&a.velocities[j], &b.velocities[l]);
        let slope = c(0, 0) + c(1, 1) - c(0, 1) - c(1, 0);
        let lo = (a.probs[0] + b.probs[0] - 1.0).max(0.0);
        let hi = a.probs[0].min(b.probs[0]);
        let m11 = if slope > 0.0 { hi } else { lo };
        vec![
            (0, 0, m11),
            (0, 1, a.probs[0] - m11),
            (1, 0, b.probs[0] - m11),
            (1, 1, a.probs[1] - (b.probs[0] - m11)),
        ]
        .into_iter()
        .filter(|&(_, _, m)| m > 0.0)
        .collect()
    } else {
        let mut cost = vec![0.0; na * nb];
        for j in 0..na {
            for l in 0..nb {
                cost[j * nb + l] = dist2(&a.velocities[j], &b.velocities[l]);
            }
        }
        solve_transport(&a.probs, &b.probs, &cost)?
            .entries
            .into_iter()
            .collect()
    };
    let corr = pairwise_sum(
        &entries
            .iter()
            .map(|&(j, l, m)| m * dot(&a.velocities[j], &b.velocities[l]))
            .collect::<Vec<_>>(),
    );
    let sqdist = pairwise_sum(
        &entries
            .iter()
            .map(|&(j, l, m)| m * dist2(&a.velocities[j], &b.velocities[l]))
            .collect::<Vec<_>>(),
    );
    Ok(FiberMatch {
        entries,
        corr,
        sqdist,
    })
}

/// Joint result of the per-fiber solves between two same-base fields.
pub struct MetricPair {
    /// `⟨ξ,ζ⟩_μ`.
    pub dot: f64,
    /// `W²_μ(ξ,ζ)`.
    pub sq_distance: f64,
    /// The optimal fiber coupling realizing both values.
    pub coupling: FiberCoupling,
}

/// Solves every fiber problem once, returning scalar product, squared
/// distance and the optimal coupling.
pub fn metric_pair(xi: &MeasureField, zeta: &MeasureField) -> Result<MetricPair> {
    if xi.base != zeta.base {
        return Err(Error::BaseMismatch);
    }
    let mut dots = Vec::with_capacity(xi.fibers.len());
    let mut sqs = Vec::with_capacity(xi.fibers.len());
    let mut entries = Vec::with_capacity(xi.fibers.len());
    for ((a, b), w) in xi.fibers.iter().zip(&zeta.fibers).zip(&xi.base.weights) {
        let m = fiber_match(a, b)?;
        dots.push(w * m.corr);
        sqs.push(w * m.sqdist);
        entries.push(
            m.entries
                .iter()
                .map(|&(j, l, mass)| (a.velocities[j].clone(), b.velocities[l].clone(), mass))
                .collect(),
        );
    }
    Ok(MetricPair {
        dot: pairwise_sum(&dots),
        sq_distance: pairwise_sum(&sqs),
        coupling: FiberCoupling::new(xi.base.clone(), entries)?,
    })
}

/// `W_μ(ξ,ζ)` together with the optimal fiber coupling.
pub fn w_mu(xi: &MeasureField, zeta: &MeasureField) -> Result<(f64, FiberCoupling)> {
    let pair = metric_pair(xi, zeta)?;
    Ok((pair.sq_distance.max(0.0).sqrt(), pair.coupling))
}

/// The metric scalar product `⟨ξ,ζ⟩_μ`.
pub fn metric_dot(xi: &MeasureField, zeta: &MeasureField) -> Result<f64> {
    Ok(metric_pair(xi, zeta)?.dot)
}

/// Field norm `‖ξ‖_μ = W_μ(ξ, 0_μ)`.
pub fn norm_mu(xi: &MeasureField) -> f64 {
    xi.norm2().max(0.0).sqrt()
}

/// Atom-wise orthogonality test against `γ_f`: true iff every field atom
/// satisfies `|⟨v, f(x)⟩| ≤ tol`. Requires a centred field; by the
/// equivalence this agrees with `⟨ξ, γ_f⟩_μ = 0` up to tolerance
/// translation.
pub fn is_orthogonal_to_gamma(
    xi: &MeasureField,
    f: &VectorFieldOnBase,
    tol: f64,
) -> Result<(bool, f64)> {
    let defect = barycenter(xi).max_norm();
    if defect > 1e-10 {
        return Err(Error::NotCentred(defect));
    }
    if f.vectors.len() != xi.base.len() {
        return Err(Error::LengthMismatch(f.vectors.len(), xi.base.len()));
    }
    let mut worst: f64 = 0.0;
    for (fiber, fx) in xi.fibers.iter().zip(&f.vectors) {
        for v in &fiber.velocities {
            worst = worst.max(dot(v, fx).abs());
        }
    }
    Ok((worst <= tol, worst))
}

/// Wasserstein distance over the tangent bundle: the two fields are
/// flattened to measures on `ℝ^{2d}` and compared with the product cost
/// `|x−y|² + |v−w|²`. Bases may differ.
pub fn bundle_distance(xi: &MeasureField, zeta: &MeasureField) -> Result<f64> {
    crate::ot::wasserstein(&flatten(xi)?, &flatten(zeta)?)
}

fn flatten(xi: &MeasureField) -> Result<crate::measures::DiscreteMeasure> {
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for ((p, w), fiber) in xi.base.points.iter().zip(&xi.base.weights).zip(&xi.fibers) {
        for (v, q) in fiber.velocities.iter().zip(&fiber.probs) {
            let mut flat = p.coords.clone();
            flat.extend_from_slice(v);
            pts.push(flat);
            wts.push(w * q);
        }
    }
    make_measure(pts, wts)
}
