//! Closed convex cones of centred measure fields, described by Grassmannian
//! sections: a centred field belongs to the cone of a section `D` exactly
//! when it is concentrated on `graph D = {(x,v) : v ∈ D(x)}`. Membership,
//! metric projection, the doubling-limit extraction of `γ_{f₊}`, section
//! estimation from observed atoms, and closedness regressions live here.

use crate::fiber_geometry::{bundle_distance, metric_pair};
use crate::fields::{
    barycenter, gamma_of, merge_fields, midpoint_double, FiberMeasure, MeasureField,
    VectorFieldOnBase,
};
use crate::measures::DiscreteMeasure;
use crate::numeric::{
    complement_basis, dist2_to_span, gram_defect, pairwise_sum, principal_span, project_onto, sub,
};
use crate::{Error, Result};

/// A measurable assignment of a linear subspace `D(x) ⊆ ℝ^d` to every
/// support point, stored as one orthonormal basis per point.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannSection {
    pub base: DiscreteMeasure,
    pub basis: Vec<Vec<Vec<f64>>>,
}

impl GrassmannSection {
    pub fn new(base: DiscreteMeasure, basis: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if basis.len() != base.len() {
            return Err(Error::LengthMismatch(basis.len(), base.len()));
        }
        for b in &basis {
            if b.len() > base.dim {
                return Err(Error::DimensionMismatch {
                    expected: base.dim,
                    found: b.len(),
                });
            }
            let defect = gram_defect(b);
            if defect > 1e-10 {
                return Err(Error::NotOrthonormal(defect));
            }
        }
        Ok(GrassmannSection { base, basis })
    }

    /// Section sampled from an analytic basis function.
    pub fn from_fn(
        base: &DiscreteMeasure,
        f: impl Fn(&[f64]) -> Vec<Vec<f64>>,
    ) -> Result<Self> {
        let basis = base.points.iter().map(|p| f(&p.coords)).collect();
        GrassmannSection::new(base.clone(), basis)
    }

    /// Constant section spanned by the same orthonormal family everywhere.
    pub fn constant(base: &DiscreteMeasure, family: Vec<Vec<f64>>) -> Result<Self> {
        let basis = vec![family; base.len()];
        GrassmannSection::new(base.clone(), basis)
    }

    pub fn dim_at(&self, i: usize) -> usize {
        self.basis[i].len()
    }
}

/// Pointwise orthogonal complement; `dim D(x) + dim D^⊥(x) = d` everywhere.
pub fn orthogonal_section(section: &GrassmannSection) -> GrassmannSection {
    let d = section.base.dim;
    let basis = section
        .basis
        .iter()
        .map(|b| complement_basis(b, d))
        .collect();
    GrassmannSection::new(section.base.clone(), basis).expect("complement is orthonormal")
}

/// Outcome of a cone-membership check.
#[derive(Debug, Clone)]
pub struct ConeMembershipReport {
    /// `max_i |barycenter(x_i)|`.
    pub centred_defect: f64,
    /// Mass-weighted mean squared distance of the atoms to `D(x)`.
    pub graph_mass_defect: f64,
    pub verdict: bool,
}

/// Checks membership of a field in the centred cone of a section.
pub fn membership(
    xi: &MeasureField,
    section: &GrassmannSection,
    tol_centred: f64,
    tol_graph: f64,
) -> Result<ConeMembershipReport> {
    if xi.base != section.base {
        return Err(Error::BaseMismatch);
    }
    let centred_defect = barycenter(xi).max_norm();
    let graph_mass_defect = graph_defect(xi, |i, _| section.basis[i].clone());
    Ok(ConeMembershipReport {
        centred_defect,
        graph_mass_defect,
        verdict: centred_defect <= tol_centred && graph_mass_defect <= tol_graph,
    })
}

fn graph_defect(xi: &MeasureField, basis_at: impl Fn(usize, &[f64]) -> Vec<Vec<f64>>) -> f64 {
    let terms: Vec<f64> = xi
        .fibers
        .iter()
        .zip(xi.base.points.iter().zip(&xi.base.weights))
        .enumerate()
        .map(|(i, (fiber, (p, w)))| {
            let b = basis_at(i, &p.coords);
            let inner: Vec<f64> = fiber
                .velocities
                .iter()
                .zip(&fiber.probs)
                .map(|(v, q)| q * dist2_to_span(&b, v))
                .collect();
            w * pairwise_sum(&inner)
        })
        .collect();
    pairwise_sum(&terms)
}

/// Metric projection of a centred field onto the section cone, together with
/// the residual.
///
/// The projection pushes each fiber forward under the orthogonal projector
/// onto `D(x)`; the residual applies the complementary projector atom by
/// atom, which realizes `(π_x, π_v − π_w)_# α` for the induced optimal
/// coupling. Pythagoras `‖ξ‖² = ‖πξ‖² + ‖residual‖²` holds componentwise.
pub fn project_onto_section_cone(
    xi: &MeasureField,
    section: &GrassmannSection,
) -> Result<(MeasureField, MeasureField)> {
    if xi.base != section.base {
        return Err(Error::BaseMismatch);
    }
    let defect = barycenter(xi).max_norm();
    if defect > 1e-10 {
        return Err(Error::NotCentred(defect));
    }
    let mut proj_fibers = Vec::with_capacity(xi.fibers.len());
    let mut res_fibers = Vec::with_capacity(xi.fibers.len());
    for (fiber, b) in xi.fibers.iter().zip(&section.basis) {
        let projected: Vec<Vec<f64>> = fiber
            .velocities
            .iter()
            .map(|v| project_onto(b, v))
            .collect();
        let residual: Vec<Vec<f64>> = fiber
            .velocities
            .iter()
            .zip(&projected)
            .map(|(v, p)| sub(v, p))
            .collect();
        proj_fibers.push(FiberMeasure::new(projected, fiber.probs.clone())?);
        res_fibers.push(FiberMeasure::new(residual, fiber.probs.clone())?);
    }
    Ok((
        MeasureField::new(xi.base.clone(), proj_fibers)?,
        MeasureField::new(xi.base.clone(), res_fibers)?,
    ))
}

/// Trace of the doubling iteration.
#[derive(Debug, Clone)]
pub struct DoublingTrace {
    /// Barycenter of the positive leg, preserved along the iteration.
    pub f_plus: VectorFieldOnBase,
    /// Squared `W_μ` gaps of the positive leg to `(id, f₊)_# μ` per
    /// iteration, starting at iteration 0.
    pub gaps_plus: Vec<f64>,
    pub gaps_minus: Vec<f64>,
    /// `W_μ` gap of the superposition `½ζ₊ + ½ζ₋` to `γ_{f₊}` per iteration.
    pub superposition_gaps: Vec<f64>,
}

/// Iterates the midpoint doubling on both legs of a centred superposition.
/// Each squared gap halves per iteration and the superposition converges to
/// `γ_{f₊}`.
pub fn doubling_limit(
    zeta_plus: &MeasureField,
    zeta_minus: &MeasureField,
    iters: usize,
    cap: usize,
) -> Result<DoublingTrace> {
    if zeta_plus.base != zeta_minus.base {
        return Err(Error::BaseMismatch);
    }
    let sup = merge_fields(&[(0.5, zeta_plus), (0.5, zeta_minus)])?;
    let defect = barycenter(&sup).max_norm();
    if defect > 1e-9 {
        return Err(Error::NotCentred(defect));
    }
    let f_plus = barycenter(zeta_plus);
    let target_plus = MeasureField::from_map(&zeta_plus.base, &f_plus)?;
    let f_minus = VectorFieldOnBase {
        vectors: f_plus
            .vectors
            .iter()
            .map(|v| crate::numeric::scale_vec(-1.0, v))
            .collect(),
    };
    let target_minus = MeasureField::from_map(&zeta_plus.base, &f_minus)?;
    let gamma = gamma_of(&f_plus, &zeta_plus.base)?;

    let mut plus = zeta_plus.clone();
    let mut minus = zeta_minus.clone();
    let mut gaps_plus = Vec::with_capacity(iters + 1);
    let mut gaps_minus = Vec::with_capacity(iters + 1);
    let mut superposition_gaps = Vec::with_capacity(iters + 1);
    for step in 0..=iters {
        gaps_plus.push(metric_pair(&plus, &target_plus)?.sq_distance);
        gaps_minus.push(metric_pair(&minus, &target_minus)?.sq_distance);
        let sup = merge_fields(&[(0.5, &plus), (0.5, &minus)])?;
        superposition_gaps.push(metric_pair(&sup, &gamma)?.sq_distance.max(0.0).sqrt());
        if step < iters {
            plus = midpoint_double(&plus, cap)?;
            minus = midpoint_double(&minus, cap)?;
        }
    }
    Ok(DoublingTrace {
        f_plus,
        gaps_plus,
        gaps_minus,
        superposition_gaps,
    })
}

/// Estimates the section spanned by the observed fiber atoms of a family of
/// centred fields: per point, the principal span of all atoms with positive
/// probability at SVD threshold `svd_tol` relative to the top singular
/// value.
pub fn estimate_section(fields: &[MeasureField], svd_tol: f64) -> Result<GrassmannSection> {
    let first = fields.first().ok_or(Error::EmptySupport)?;
    for f in fields {
        if f.base != first.base {
            return Err(Error::BaseMismatch);
        }
    }
    let d = first.base.dim;
    let mut basis = Vec::with_capacity(first.base.len());
    for i in 0..first.base.len() {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for f in fields {
            for (v, p) in f.fibers[i].velocities.iter().zip(&f.fibers[i].probs) {
                if *p > 0.0 {
                    rows.push(v.clone());
                }
            }
        }
        basis.push(principal_span(&rows, d, svd_tol));
    }
    GrassmannSection::new(first.base.clone(), basis)
}

/// Report of a closedness regression along a bundle-converging sequence.
#[derive(Debug, Clone)]
pub struct ClosednessReport {
    /// Graph-mass defect of every element against the section.
    pub defects: Vec<f64>,
    /// Bundle distances between consecutive elements.
    pub bundle_gaps: Vec<f64>,
    pub final_defect: f64,
    pub max_defect: f64,
    /// Barycenter sup-norm of the final element.
    pub final_centred_defect: f64,
}

/// Verifies that concentration on a graph survives bundle limits: the
/// sequence must be Cauchy for the flattened transport distance
/// (nonincreasing consecutive gaps), and the last element's graph defect is
/// reported against the running maximum. The section is evaluated
/// analytically so the elements may live on different bases.
pub fn closedness_regression(
    sequence: &[MeasureField],
    section_at: impl Fn(&[f64]) -> Vec<Vec<f64>>,
) -> Result<ClosednessReport> {
    if sequence.is_empty() {
        return Err(Error::EmptySupport);
    }
    let defects: Vec<f64> = sequence
        .iter()
        .map(|xi| graph_defect(xi, |_, x| section_at(x)))
        .collect();
    let mut bundle_gaps = Vec::with_capacity(sequence.len().saturating_sub(1));
    for pair in sequence.windows(2) {
        bundle_gaps.push(bundle_distance(&pair[0], &pair[1])?);
    }
    for (step, pair) in bundle_gaps.windows(2).enumerate() {
        if pair[1] > pair[0] + 1e-12 {
            return Err(Error::NonCauchy(step + 1));
        }
    }
    let final_defect = *defects.last().unwrap();
    let max_defect = defects.iter().copied().fold(0.0, f64::max);
    let final_centred_defect = barycenter(sequence.last().unwrap()).max_norm();
    Ok(ClosednessReport {
        defects,
        bundle_gaps,
        final_defect,
        max_defect,
        final_centred_defect,
    })
}
