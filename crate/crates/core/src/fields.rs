//! Measure fields: probability measures on the tangent bundle with a fixed
//! base marginal, stored as one finite fiber distribution per base point.
//!
//! The global field weight of an atom `(x_i, v_{ij})` is `μ_i · p_{ij}`, the
//! disintegration convention. Fibers are canonically sorted and merged on the
//! same 1e-12 grid as base points, so structural equality of fields is
//! order-insensitive.

use crate::measures::{restrict, DiscreteMeasure};
use crate::numeric::{add, lex_cmp, pairwise_sum, scale_vec, snap_vec, sub};
use crate::ot::TransportPlan;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default cap on fiber atom counts for the product constructions, whose
/// atom count squares per iteration.
pub const DEFAULT_FIBER_CAP: usize = 4096;

/// A probability measure on velocities: the fiber of a measure field over
/// one base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberMeasure {
    pub velocities: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl FiberMeasure {
    pub fn new(velocities: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if velocities.len() != probs.len() {
            return Err(Error::LengthMismatch(velocities.len(), probs.len()));
        }
        if velocities.is_empty() {
            return Err(Error::EmptySupport);
        }
        for p in &probs {
            if *p < 0.0 || !p.is_finite() {
                return Err(Error::NegativeWeight(*p));
            }
        }
        let mut items: Vec<(Vec<f64>, f64)> = velocities
            .into_iter()
            .zip(probs)
            .filter(|(_, p)| *p > 0.0)
            .map(|(v, p)| (snap_vec(&v), p))
            .collect();
        if items.is_empty() {
            return Err(Error::EmptySupport);
        }
        items.sort_by(|a, b| lex_cmp(&a.0, &b.0));
        let mut vels: Vec<Vec<f64>> = Vec::with_capacity(items.len());
        let mut ps: Vec<Vec<f64>> = Vec::new();
        for (v, p) in items {
            match vels.last() {
                Some(last) if *last == v => ps.last_mut().unwrap().push(p),
                _ => {
                    vels.push(v);
                    ps.push(vec![p]);
                }
            }
        }
        let mut probs: Vec<f64> = ps.iter().map(|group| pairwise_sum(group)).collect();
        let total = pairwise_sum(&probs);
        if (total - 1.0).abs() > 1e-12 {
            for p in probs.iter_mut() {
                *p /= total;
            }
        }
        Ok(FiberMeasure {
            velocities: vels,
            probs,
        })
    }

    /// Dirac fiber at one velocity.
    pub fn dirac(v: Vec<f64>) -> Self {
        FiberMeasure::new(vec![v], vec![1.0]).expect("dirac fiber")
    }

    /// Construction without grid snapping, for operations that transform
    /// atoms bijectively (translation, nonzero scaling): only exactly equal
    /// atoms are merged, so algebraic identities stay at machine precision.
    fn from_atoms_unsnapped(velocities: Vec<Vec<f64>>, probs: Vec<f64>) -> Self {
        let mut items: Vec<(Vec<f64>, f64)> = velocities.into_iter().zip(probs).collect();
        items.sort_by(|a, b| lex_cmp(&a.0, &b.0));
        let mut vels: Vec<Vec<f64>> = Vec::with_capacity(items.len());
        let mut ps: Vec<Vec<f64>> = Vec::new();
        for (v, p) in items {
            match vels.last() {
                Some(last) if *last == v => ps.last_mut().unwrap().push(p),
                _ => {
                    vels.push(v);
                    ps.push(vec![p]);
                }
            }
        }
        FiberMeasure {
            velocities: vels,
            probs: ps.iter().map(|group| pairwise_sum(group)).collect(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let dim = self.velocities[0].len();
        let mut out = vec![0.0; dim];
        for axis in 0..dim {
            let terms: Vec<f64> = self
                .velocities
                .iter()
                .zip(&self.probs)
                .map(|(v, p)| p * v[axis])
                .collect();
            out[axis] = pairwise_sum(&terms);
        }
        out
    }

    pub fn second_moment(&self) -> f64 {
        let terms: Vec<f64> = self
            .velocities
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| p * crate::numeric::norm2(v))
            .collect();
        pairwise_sum(&terms)
    }

    pub fn translate(&self, shift: &[f64]) -> Self {
        FiberMeasure::from_atoms_unsnapped(
            self.velocities.iter().map(|v| add(v, shift)).collect(),
            self.probs.clone(),
        )
    }
}

/// A vector field sampled on the support of a base measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldOnBase {
    pub vectors: Vec<Vec<f64>>,
}

impl VectorFieldOnBase {
    pub fn constant(v: Vec<f64>, len: usize) -> Self {
        VectorFieldOnBase {
            vectors: vec![v; len],
        }
    }

    /// `Σ μᵢ ⟨f(xᵢ), g(xᵢ)⟩`, the `L²_μ` pairing against another field.
    pub fn l2_dot(&self, other: &VectorFieldOnBase, mu: &DiscreteMeasure) -> f64 {
        let terms: Vec<f64> = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .zip(&mu.weights)
            .map(|((a, b), w)| w * crate::numeric::dot(a, b))
            .collect();
        pairwise_sum(&terms)
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| crate::numeric::norm(v))
            .fold(0.0, f64::max)
    }
}

/// A measure field `ξ ∈ P₂(TΩ)_μ`: one fiber per base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureField {
    pub base: DiscreteMeasure,
    pub fibers: Vec<FiberMeasure>,
}

impl MeasureField {
    pub fn new(base: DiscreteMeasure, fibers: Vec<FiberMeasure>) -> Result<Self> {
        if fibers.len() != base.len() {
            return Err(Error::LengthMismatch(fibers.len(), base.len()));
        }
        for f in &fibers {
            for v in &f.velocities {
                if v.len() != base.dim {
                    return Err(Error::DimensionMismatch {
                        expected: base.dim,
                        found: v.len(),
                    });
                }
            }
        }
        Ok(MeasureField { base, fibers })
    }

    /// The zero field `0_μ`.
    pub fn zero(mu: &DiscreteMeasure) -> Self {
        let dim = mu.dim;
        MeasureField::new(
            mu.clone(),
            vec![FiberMeasure::dirac(vec![0.0; dim]); mu.len()],
        )
        .expect("zero field")
    }

    /// `(id, f)_# μ`: singleton fibers along a vector field.
    pub fn from_map(mu: &DiscreteMeasure, f: &VectorFieldOnBase) -> Result<Self> {
        if f.vectors.len() != mu.len() {
            return Err(Error::LengthMismatch(f.vectors.len(), mu.len()));
        }
        MeasureField::new(
            mu.clone(),
            f.vectors.iter().cloned().map(FiberMeasure::dirac).collect(),
        )
    }

    /// Squared field norm `‖ξ‖²_μ = Σᵢ μᵢ Σⱼ pᵢⱼ |vᵢⱼ|²`.
    pub fn norm2(&self) -> f64 {
        let terms: Vec<f64> = self
            .fibers
            .iter()
            .zip(&self.base.weights)
            .map(|(f, w)| w * f.second_moment())
            .collect();
        pairwise_sum(&terms)
    }

    pub fn max_fiber_size(&self) -> usize {
        self.fibers.iter().map(|f| f.velocities.len()).max().unwrap_or(0)
    }
}

/// Barycenter `b(xᵢ) = Σⱼ pᵢⱼ vᵢⱼ` of a field.
pub fn barycenter(xi: &MeasureField) -> VectorFieldOnBase {
    VectorFieldOnBase {
        vectors: xi.fibers.iter().map(|f| f.mean()).collect(),
    }
}

/// Centred part `ξ⁰`: fibers translated by `−b(x)`.
pub fn center(xi: &MeasureField) -> MeasureField {
    let b = barycenter(xi);
    let fibers = xi
        .fibers
        .iter()
        .zip(&b.vectors)
        .map(|(f, m)| f.translate(&scale_vec(-1.0, m)))
        .collect();
    MeasureField::new(xi.base.clone(), fibers).expect("centred field")
}

/// `λ·ξ = (π_x, λπ_v)_# ξ`; `λ = 0` collapses every fiber to `δ₀`.
pub fn scale_field(lambda: f64, xi: &MeasureField) -> MeasureField {
    if lambda == 0.0 {
        return MeasureField::zero(&xi.base);
    }
    let fibers = xi
        .fibers
        .iter()
        .map(|f| {
            FiberMeasure::from_atoms_unsnapped(
                f.velocities.iter().map(|v| scale_vec(lambda, v)).collect(),
                f.probs.clone(),
            )
        })
        .collect();
    MeasureField::new(xi.base.clone(), fibers).expect("scaled field")
}

/// The symmetric two-point field `γ_f = ½(id,−f)_#μ + ½(id,f)_#μ`. Centred
/// by construction and invariant under `scale(−1, ·)`.
pub fn gamma_of(f: &VectorFieldOnBase, mu: &DiscreteMeasure) -> Result<MeasureField> {
    if f.vectors.len() != mu.len() {
        return Err(Error::LengthMismatch(f.vectors.len(), mu.len()));
    }
    let fibers: Result<Vec<FiberMeasure>> = f
        .vectors
        .iter()
        .map(|v| FiberMeasure::new(vec![scale_vec(-1.0, v), v.clone()], vec![0.5, 0.5]))
        .collect();
    MeasureField::new(mu.clone(), fibers?)
}

/// The symmetric frame field of an orthonormal family of selections:
/// `(1/r) Σⱼ ½[(id,−fⱼ)_#μ + (id,fⱼ)_#μ]`.
pub fn frame_field(mu: &DiscreteMeasure, frame: &[VectorFieldOnBase]) -> Result<MeasureField> {
    if frame.is_empty() {
        return Err(Error::EmptySupport);
    }
    let r = frame.len();
    let mut fibers = Vec::with_capacity(mu.len());
    for i in 0..mu.len() {
        let mut atoms = Vec::with_capacity(2 * r);
        let mut probs = Vec::with_capacity(2 * r);
        for f in frame {
            atoms.push(scale_vec(-1.0, &f.vectors[i]));
            atoms.push(f.vectors[i].clone());
            probs.push(0.5 / r as f64);
            probs.push(0.5 / r as f64);
        }
        fibers.push(FiberMeasure::new(atoms, probs)?);
    }
    MeasureField::new(mu.clone(), fibers)
}

/// Velocity field of a plan: the fiber at `xᵢ` carries `mass(i,j)/μᵢ` at
/// `yⱼ − xᵢ`.
pub fn velocity_of_plan(plan: &TransportPlan) -> Result<MeasureField> {
    let mut atoms: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::new(); plan.source.len()];
    for &(i, j, m) in &plan.entries {
        let v = sub(
            &plan.target.points[j].coords,
            &plan.source.points[i].coords,
        );
        atoms[i].push((v, m / plan.source.weights[i]));
    }
    let fibers: Result<Vec<FiberMeasure>> = atoms
        .into_iter()
        .map(|a| {
            let (vs, ps): (Vec<_>, Vec<_>) = a.into_iter().unzip();
            FiberMeasure::new(vs, ps)
        })
        .collect();
    MeasureField::new(plan.source.clone(), fibers?)
}

/// A coupling between two fields over the same base that only moves mass
/// within fibers. Entries at each base point are `(v, w, mass)` triples.
#[derive(Debug, Clone)]
pub struct FiberCoupling {
    pub base: DiscreteMeasure,
    pub entries: Vec<Vec<(Vec<f64>, Vec<f64>, f64)>>,
}

impl FiberCoupling {
    pub fn new(base: DiscreteMeasure, entries: Vec<Vec<(Vec<f64>, Vec<f64>, f64)>>) -> Result<Self> {
        if entries.len() != base.len() {
            return Err(Error::LengthMismatch(entries.len(), base.len()));
        }
        for fiber in &entries {
            let total = pairwise_sum(&fiber.iter().map(|e| e.2).collect::<Vec<_>>());
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::CouplingMarginalDefect((total - 1.0).abs()));
            }
        }
        Ok(FiberCoupling { base, entries })
    }

    /// Left and right marginal fields of the coupling.
    pub fn marginals(&self) -> Result<(MeasureField, MeasureField)> {
        let mut left = Vec::with_capacity(self.entries.len());
        let mut right = Vec::with_capacity(self.entries.len());
        for fiber in &self.entries {
            let (vs, ms): (Vec<_>, Vec<_>) = fiber.iter().map(|(v, _, m)| (v.clone(), *m)).unzip();
            left.push(FiberMeasure::new(vs, ms)?);
            let (ws, ms): (Vec<_>, Vec<_>) = fiber.iter().map(|(_, w, m)| (w.clone(), *m)).unzip();
            right.push(FiberMeasure::new(ws, ms)?);
        }
        Ok((
            MeasureField::new(self.base.clone(), left)?,
            MeasureField::new(self.base.clone(), right)?,
        ))
    }

    /// Largest per-point marginal defect against a claimed pair of fields.
    pub fn marginal_defect(&self, left: &MeasureField, right: &MeasureField) -> Result<f64> {
        let (l, r) = self.marginals()?;
        if l.base != left.base || r.base != right.base {
            return Err(Error::BaseMismatch);
        }
        let mut worst: f64 = 0.0;
        for (a, b) in l.fibers.iter().zip(&left.fibers) {
            worst = worst.max(fiber_l1_gap(a, b));
        }
        for (a, b) in r.fibers.iter().zip(&right.fibers) {
            worst = worst.max(fiber_l1_gap(a, b));
        }
        Ok(worst)
    }

    /// Coupling with the two legs swapped.
    pub fn swap(&self) -> FiberCoupling {
        FiberCoupling {
            base: self.base.clone(),
            entries: self
                .entries
                .iter()
                .map(|fiber| {
                    fiber
                        .iter()
                        .map(|(v, w, m)| (w.clone(), v.clone(), *m))
                        .collect()
                })
                .collect(),
        }
    }
}

fn fiber_l1_gap(a: &FiberMeasure, b: &FiberMeasure) -> f64 {
    if a.velocities == b.velocities {
        a.probs
            .iter()
            .zip(&b.probs)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    }
}

/// Fiberwise interpolation `(π_x, (1−λ)π_v + λπ_w)_# α`, merging collided
/// atoms.
pub fn horizontal_interpolate(alpha: &FiberCoupling, lambda: f64) -> Result<MeasureField> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    let fibers: Result<Vec<FiberMeasure>> = alpha
        .entries
        .iter()
        .map(|fiber| {
            let (vs, ms): (Vec<_>, Vec<_>) = fiber
                .iter()
                .map(|(v, w, m)| {
                    (
                        add(&scale_vec(1.0 - lambda, v), &scale_vec(lambda, w)),
                        *m,
                    )
                })
                .unzip();
            FiberMeasure::new(vs, ms)
        })
        .collect();
    MeasureField::new(alpha.base.clone(), fibers?)
}

/// The pointwise product plan `ζ ⊗_μ ζ`: at each base point the independent
/// product of the fiber with itself. Errors when a fiber exceeds `cap`
/// atoms, since the atom count squares.
pub fn pointwise_product_plan(zeta: &MeasureField, cap: usize) -> Result<FiberCoupling> {
    for f in &zeta.fibers {
        if f.velocities.len() > cap {
            return Err(Error::FiberCapExceeded(f.velocities.len(), cap));
        }
    }
    let entries = zeta
        .fibers
        .iter()
        .map(|f| {
            let mut fiber = Vec::with_capacity(f.velocities.len() * f.velocities.len());
            for (v, p) in f.velocities.iter().zip(&f.probs) {
                for (w, q) in f.velocities.iter().zip(&f.probs) {
                    fiber.push((v.clone(), w.clone(), p * q));
                }
            }
            fiber
        })
        .collect();
    FiberCoupling::new(zeta.base.clone(), entries)
}

/// Midpoint of the pointwise product plan:
/// `(π_x, (π_v+π_w)/2)_# (ζ ⊗_μ ζ)`. Preserves the barycenter and halves the
/// squared `W_μ` gap to the barycenter map.
pub fn midpoint_double(zeta: &MeasureField, cap: usize) -> Result<MeasureField> {
    horizontal_interpolate(&pointwise_product_plan(zeta, cap)?, 0.5)
}

/// Restriction of a field to a base predicate; fibers at surviving points
/// are unchanged. Returns the restricted field and the base mass.
pub fn restrict_field(
    xi: &MeasureField,
    pred: impl Fn(&[f64]) -> bool,
) -> Result<(MeasureField, f64)> {
    let (base, mass) = restrict(&xi.base, &pred)?;
    let kept = xi.base.indices_where(&pred);
    let fibers = kept.iter().map(|&i| xi.fibers[i].clone()).collect();
    Ok((MeasureField::new(base, fibers)?, mass))
}

/// Superposition `Σ mass_k ξ_k` of fields over possibly different bases:
/// the combined base is the weighted mixture, and fibers at shared points
/// are mixed with the induced conditional weights.
pub fn merge_fields(parts: &[(f64, &MeasureField)]) -> Result<MeasureField> {
    let live: Vec<&(f64, &MeasureField)> = parts.iter().filter(|(m, _)| *m > 0.0).collect();
    if live.is_empty() {
        return Err(Error::EmptySupport);
    }
    let dim = live[0].1.base.dim;
    let mut items: Vec<(Vec<f64>, f64, &FiberMeasure)> = Vec::new();
    for (mass, field) in &live {
        if field.base.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: field.base.dim,
            });
        }
        for (i, p) in field.base.points.iter().enumerate() {
            items.push((p.coords.clone(), mass * field.base.weights[i], &field.fibers[i]));
        }
    }
    items.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut fibers: Vec<FiberMeasure> = Vec::new();
    let mut idx = 0;
    while idx < items.len() {
        let mut end = idx + 1;
        while end < items.len() && items[end].0 == items[idx].0 {
            end += 1;
        }
        let group = &items[idx..end];
        let total = pairwise_sum(&group.iter().map(|g| g.1).collect::<Vec<_>>());
        let mut atoms = Vec::new();
        let mut probs = Vec::new();
        for (_, w, fiber) in group {
            for (v, p) in fiber.velocities.iter().zip(&fiber.probs) {
                atoms.push(v.clone());
                probs.push(p * (w / total));
            }
        }
        points.push(items[idx].0.clone());
        weights.push(total);
        fibers.push(FiberMeasure::new(atoms, probs)?);
        idx = end;
    }
    let base = crate::measures::make_measure(points, weights)?;
    MeasureField::new(base, fibers)
}
