//! The dimension-of-splitting decomposition `μ = Σ_k m_k μ^k` and its
//! companions: splitting-direction estimation from geodesic velocities, the
//! max–min identification formula, a Chebyshev concentration bound,
//! tangent-plane alignment, and Preiss blow-ups.
//!
//! The classification convention follows the solenoidal section: a point
//! belongs to component `k` when `dim D^Sol(x) = k`, so atoms land in
//! component 0 and the transport-regular part in component `d`.

use crate::cones::{estimate_section, GrassmannSection};
use crate::dc::{tangent_plane, DcChart};
use crate::fiber_geometry::metric_pair;
use crate::fields::{center, frame_field, velocity_of_plan, MeasureField, VectorFieldOnBase};
use crate::measures::{make_measure, DiscreteMeasure};
use crate::numeric::{dist2, dist2_to_span, max_principal_angle, pairwise_sum, sub};
use crate::ot::solve_ot;
use crate::{Error, Result};

/// Output of [`decompose`]: masses, normalized components, per-component
/// sections over the full base, and the per-point classification.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    /// `m_0 … m_d`.
    pub masses: Vec<f64>,
    /// Normalized component `μ^k`, present when `m_k > 0`.
    pub components: Vec<Option<DiscreteMeasure>>,
    /// Section `D_k` over the full base: the input section on `A_k`,
    /// extended by the canonical `k`-plane elsewhere.
    pub sections: Vec<Option<GrassmannSection>>,
    /// Component index of every base point.
    pub classification: Vec<usize>,
}

/// Partitions a measure by the pointwise dimension of a (solenoidal)
/// Grassmannian section: `A_k = {x : dim D(x) = k}`.
pub fn decompose(mu: &DiscreteMeasure, section: &GrassmannSection) -> Result<DecompositionResult> {
    if section.base != *mu {
        return Err(Error::BaseMismatch);
    }
    let d = mu.dim;
    let classification: Vec<usize> = (0..mu.len()).map(|i| section.dim_at(i)).collect();
    let mut masses = vec![0.0; d + 1];
    let mut components = vec![None; d + 1];
    let mut sections = vec![None; d + 1];
    for k in 0..=d {
        let idx: Vec<usize> = (0..mu.len()).filter(|&i| classification[i] == k).collect();
        if idx.is_empty() {
            continue;
        }
        let mass = pairwise_sum(&idx.iter().map(|&i| mu.weights[i]).collect::<Vec<_>>());
        masses[k] = mass;
        components[k] = Some(make_measure(
            idx.iter().map(|&i| mu.points[i].coords.clone()).collect(),
            idx.iter().map(|&i| mu.weights[i] / mass).collect(),
        )?);
        let canonical: Vec<Vec<f64>> = (0..k)
            .map(|axis| {
                let mut e = vec![0.0; d];
                e[axis] = 1.0;
                e
            })
            .collect();
        let basis: Vec<Vec<Vec<f64>>> = (0..mu.len())
            .map(|i| {
                if classification[i] == k {
                    section.basis[i].clone()
                } else {
                    canonical.clone()
                }
            })
            .collect();
        sections[k] = Some(GrassmannSection::new(mu.clone(), basis)?);
    }
    Ok(DecompositionResult {
        masses,
        components,
        sections,
        classification,
    })
}

/// Estimates the splitting directions of optimal plans: for every target
/// the optimal plan is solved, its velocity field centred, and the span of
/// all observed centred atoms is extracted per point.
pub fn estimate_dtan(
    mu: &DiscreteMeasure,
    targets: &[DiscreteMeasure],
    svd_tol: f64,
) -> Result<GrassmannSection> {
    if targets.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut fields = Vec::with_capacity(targets.len());
    for nu in targets {
        let sol = solve_ot(mu, nu)?;
        fields.push(center(&velocity_of_plan(&sol.plan)?));
    }
    estimate_section(&fields, svd_tol)
}

/// Both evaluation orders of the identification formula
/// `max_B min_C μ(A ∩ B ∖ C)` over candidate families of concentration sets
/// `B` and exceptional sets `C`.
#[derive(Debug, Clone, Copy)]
pub struct CharmukValue {
    pub max_min: f64,
    pub min_max: f64,
}

type Pred<'a> = &'a dyn Fn(&[f64]) -> bool;

/// Evaluates the max–min formula on a discrete measure. When the candidate
/// lists contain the true covers, both orders agree with the component mass
/// `m_k μ^k(A)`.
pub fn charmuk_maxmin(
    mu: &DiscreteMeasure,
    a: Pred<'_>,
    b_candidates: &[Pred<'_>],
    c_candidates: &[Pred<'_>],
) -> Result<CharmukValue> {
    if b_candidates.is_empty() || c_candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let value = |b: Pred<'_>, c: Pred<'_>| {
        mu.mass_where(|x| a(x) && b(x) && !c(x))
    };
    let max_min = b_candidates
        .iter()
        .map(|b| {
            c_candidates
                .iter()
                .map(|c| value(*b, *c))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let min_max = c_candidates
        .iter()
        .map(|c| {
            b_candidates
                .iter()
                .map(|b| value(*b, *c))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(CharmukValue { max_min, min_max })
}

/// Chebyshev concentration bound: mass of the set where some ball around a
/// frame direction is underfilled, against the scaled squared distance.
///
/// `xi` must be the symmetric frame field of the section (checked); the
/// section must have constant dimension. Returns `(lhs, rhs)` with
/// `lhs = μ(C)` and `rhs = W²_μ(η,ξ) / (gap · radius²)`, which is
/// `16(d−k) W²` at the default radius ½ and threshold `1/(4(d−k))`.
pub fn chebyshev_bound_check(
    eta: &MeasureField,
    xi: &MeasureField,
    section: &GrassmannSection,
    radius: f64,
    mass_threshold: f64,
) -> Result<(f64, f64)> {
    if eta.base != xi.base || section.base != xi.base {
        return Err(Error::BaseMismatch);
    }
    let r = section.dim_at(0);
    for i in 0..section.base.len() {
        if section.dim_at(i) != r {
            return Err(Error::NonConstantDimension(r, section.dim_at(i)));
        }
    }
    if r == 0 {
        return Err(Error::NonConstantDimension(0, 0));
    }
    let frame: Vec<VectorFieldOnBase> = (0..r)
        .map(|j| VectorFieldOnBase {
            vectors: section.basis.iter().map(|b| b[j].clone()).collect(),
        })
        .collect();
    let expected = frame_field(&section.base, &frame)?;
    if *xi != expected {
        return Err(Error::Descriptor(
            "xi is not the symmetric frame field of the section".into(),
        ));
    }
    let atom_mass = 0.5 / r as f64;
    let gap = atom_mass - mass_threshold;
    if gap <= 0.0 {
        return Err(Error::Descriptor(
            "mass threshold must be below the frame atom mass".into(),
        ));
    }
    let mut in_c = vec![false; eta.base.len()];
    for i in 0..eta.base.len() {
        'directions: for j in 0..r {
            for sign in [-1.0, 1.0] {
                let center: Vec<f64> = section.basis[i][j].iter().map(|c| sign * c).collect();
                let ball_mass = pairwise_sum(
                    &eta.fibers[i]
                        .velocities
                        .iter()
                        .zip(&eta.fibers[i].probs)
                        .filter(|(v, _)| dist2(v, &center).sqrt() <= radius)
                        .map(|(_, p)| *p)
                        .collect::<Vec<_>>(),
                );
                if ball_mass <= mass_threshold {
                    in_c[i] = true;
                    break 'directions;
                }
            }
        }
    }
    let lhs = pairwise_sum(
        &eta.base
            .weights
            .iter()
            .zip(&in_c)
            .filter(|(_, &c)| c)
            .map(|(w, _)| *w)
            .collect::<Vec<_>>(),
    );
    let w2 = metric_pair(eta, xi)?.sq_distance;
    let rhs = w2 / (gap * radius * radius);
    Ok((lhs, rhs))
}

/// Alignment report of tangent planes against a section.
#[derive(Debug, Clone)]
pub struct PeqdReport {
    /// Principal-angle defect per base point; `None` where no tangent plane
    /// exists.
    pub defects: Vec<Option<f64>>,
    /// Largest defect over points with a tangent plane.
    pub max_defect: f64,
    /// Mass fraction of points without a tangent plane (or off every
    /// chart).
    pub exceptional_mass: f64,
}

/// At every base point with a tangent plane among the given charts, measures
/// the principal angle between that plane and the section; points without a
/// plane are accumulated as exceptional mass.
pub fn verify_peqd(
    mu: &DiscreteMeasure,
    charts: &[&DcChart],
    d_sol: &GrassmannSection,
    angle_tol: f64,
) -> Result<PeqdReport> {
    if d_sol.base != *mu {
        return Err(Error::BaseMismatch);
    }
    let mut defects = Vec::with_capacity(mu.len());
    let mut exceptional = Vec::new();
    let mut max_defect: f64 = 0.0;
    for (i, p) in mu.points.iter().enumerate() {
        let applicable: Vec<&DcChart> = charts
            .iter()
            .copied()
            .filter(|c| c.on_chart_defect(&p.coords) <= 1e-9)
            .collect();
        if applicable.is_empty() {
            defects.push(None);
            exceptional.push(mu.weights[i]);
            continue;
        }
        let report = tangent_plane(&applicable, &p.coords, angle_tol)?;
        if !report.exists {
            defects.push(None);
            exceptional.push(mu.weights[i]);
            continue;
        }
        let angle = max_principal_angle(&report.plane, &d_sol.basis[i])
            .unwrap_or(std::f64::consts::FRAC_PI_2);
        max_defect = max_defect.max(angle);
        defects.push(Some(angle));
    }
    Ok(PeqdReport {
        defects,
        max_defect,
        exceptional_mass: pairwise_sum(&exceptional),
    })
}

/// One rescaled blow-up: the window measure, normalized to probability, and
/// its total mass relative to `μ(B(x, h))`.
#[derive(Debug, Clone)]
pub struct BlowUpSlice {
    pub scale: f64,
    pub measure: DiscreteMeasure,
    /// `μ(window at scale h)/μ(B(x,h))`, the total mass of the rescaled
    /// measure before probability normalization.
    pub mass: f64,
}

/// Blow-ups of a measure around a support point at a list of scales.
#[derive(Debug, Clone)]
pub struct BlowUpResult {
    pub center: Vec<f64>,
    pub slices: Vec<BlowUpSlice>,
}

/// Rescales `μ` around `x` by each `h`: pushforward under `y ↦ (y−x)/h`,
/// restricted to the open ball `B(0, window_r)` and renormalized by
/// `μ(B(x,h))`.
pub fn preiss_blowup(
    mu: &DiscreteMeasure,
    x: &[f64],
    h_list: &[f64],
    window_r: f64,
) -> Result<BlowUpResult> {
    let snapped = crate::numeric::snap_vec(x);
    if !mu.points.iter().any(|p| p.coords == snapped) {
        return Err(Error::Descriptor("blow-up center not in the support".into()));
    }
    let mut slices = Vec::with_capacity(h_list.len());
    for &h in h_list {
        if h <= 0.0 {
            return Err(Error::Descriptor("scales must be positive".into()));
        }
        let ball = mu.mass_where(|y| dist2(y, &snapped).sqrt() < h);
        if ball <= 0.0 {
            return Err(Error::ZeroMassBall(h));
        }
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        for (p, w) in mu.points.iter().zip(&mu.weights) {
            let rescaled: Vec<f64> = sub(&p.coords, &snapped).iter().map(|c| c / h).collect();
            if crate::numeric::norm(&rescaled) < window_r {
                pts.push(rescaled);
                wts.push(*w);
            }
        }
        let window = pairwise_sum(&wts);
        if window <= 0.0 {
            return Err(Error::ZeroMassBall(h));
        }
        slices.push(BlowUpSlice {
            scale: h,
            measure: make_measure(pts, wts)?,
            mass: window / ball,
        });
    }
    Ok(BlowUpResult {
        center: snapped,
        slices,
    })
}

/// Mass of the rescaled measure inside `B(0, r)` but outside the `eps`-tube
/// of the plane spanned by an orthonormal family.
pub fn tube_mass(slice: &BlowUpSlice, plane: &[Vec<f64>], eps: f64, r: f64) -> f64 {
    slice.mass
        * slice.measure.mass_where(|y| {
            crate::numeric::norm(y) < r && dist2_to_span(plane, y).sqrt() > eps
        })
}

impl BlowUpResult {
    /// Concentration curve `n ↦ tube_mass(ν_n)`.
    pub fn concentration_curve(&self, plane: &[Vec<f64>], eps: f64, r: f64) -> Vec<f64> {
        self.slices
            .iter()
            .map(|s| tube_mass(s, plane, eps, r))
            .collect()
    }
}
