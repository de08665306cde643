//! DC_k graph parametrizations and exact convex oracles.
//!
//! Convex functions are represented as sums of max-of-convex-quadratic
//! blocks. Every subdifferential is then a finite Minkowski sum of polytopes
//! with analytically known extreme points, so active sets, differentiability
//! and subdifferential dimensions are decided exactly instead of by finite
//! differences.

use crate::numeric::{
    add, dot, lex_cmp, max_alignment_cosine, max_principal_angle, orthonormalize, principal_span,
    scale_vec, snap_vec, sub,
};
use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Tolerance deciding which pieces of a max are active at a point.
pub const ACTIVITY_TOL: f64 = 1e-10;

/// A convex quadratic piece `½⟨Qx, x⟩ + ⟨b, x⟩ + c` with `Q` symmetric
/// positive semidefinite; `Q = 0` gives an affine piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadPiece {
    pub quad: Option<Vec<Vec<f64>>>,
    pub linear: Vec<f64>,
    pub offset: f64,
}

impl QuadPiece {
    pub fn affine(linear: Vec<f64>, offset: f64) -> Self {
        QuadPiece {
            quad: None,
            linear,
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn is_affine(&self) -> bool {
        self.quad.is_none()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.offset + dot(&self.linear, x);
        if let Some(q) = &self.quad {
            for (i, row) in q.iter().enumerate() {
                v += 0.5 * x[i] * dot(row, x);
            }
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.linear.clone();
        if let Some(q) = &self.quad {
            for (gi, row) in g.iter_mut().zip(q) {
                *gi += dot(row, x);
            }
        }
        g
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.linear.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.linear.len(),
            });
        }
        if let Some(q) = &self.quad {
            if q.len() != dim || q.iter().any(|r| r.len() != dim) {
                return Err(Error::Descriptor("quadratic matrix shape".into()));
            }
            let m = DMatrix::from_fn(dim, dim, |i, j| q[i][j]);
            if (&m - m.transpose()).abs().max() > 1e-10 {
                return Err(Error::Descriptor("quadratic matrix not symmetric".into()));
            }
            let eig = m.symmetric_eigen();
            if eig.eigenvalues.iter().any(|&l| l < -1e-9) {
                return Err(Error::Descriptor(
                    "quadratic matrix not positive semidefinite".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Max over finitely many convex quadratic pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxBlock {
    pub pieces: Vec<QuadPiece>,
}

impl MaxBlock {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of the pieces active at `x` within the activity tolerance.
    pub fn active(&self, x: &[f64]) -> Vec<usize> {
        let vals: Vec<f64> = self.pieces.iter().map(|p| p.eval(x)).collect();
        let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = ACTIVITY_TOL * (1.0 + best.abs());
        vals.iter()
            .enumerate()
            .filter(|(_, v)| best - **v <= tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A convex function given as a sum of max blocks.
///
/// The representation covers plain max-affine functions, smooth convex
/// quadratics, their sums, and maxes mixing affine with quadratic pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexFn {
    pub blocks: Vec<MaxBlock>,
    /// Declared semiconvexity constant; 0 for the genuinely convex oracles
    /// built here. Kept so certificates can state the inequality they check.
    pub semiconvexity: f64,
    dim: usize,
}

impl ConvexFn {
    pub fn new(blocks: Vec<MaxBlock>) -> Result<Self> {
        let dim = blocks
            .first()
            .and_then(|b| b.pieces.first())
            .map(|p| p.dim())
            .ok_or(Error::EmptySupport)?;
        for b in &blocks {
            if b.pieces.is_empty() {
                return Err(Error::EmptySupport);
            }
            for p in &b.pieces {
                p.validate(dim)?;
            }
        }
        Ok(ConvexFn {
            blocks,
            semiconvexity: 0.0,
            dim,
        })
    }

    pub fn max_affine(planes: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let pieces = planes
            .into_iter()
            .map(|(a, b)| QuadPiece::affine(a, b))
            .collect();
        ConvexFn::new(vec![MaxBlock { pieces }])
    }

    /// The zero function on `ℝ^dim`.
    pub fn zero(dim: usize) -> Self {
        ConvexFn::max_affine(vec![(vec![0.0; dim], 0.0)]).expect("zero function")
    }

    /// `x ↦ |⟨a, x⟩ + b|` as `max(⟨a,x⟩+b, −⟨a,x⟩−b)`.
    pub fn abs_affine(a: Vec<f64>, b: f64) -> Result<Self> {
        let neg = scale_vec(-1.0, &a);
        ConvexFn::max_affine(vec![(a, b), (neg, -b)])
    }

    /// Smooth quadratic `½⟨Qx,x⟩ + ⟨b,x⟩ + c`.
    pub fn quadratic(quad: Vec<Vec<f64>>, linear: Vec<f64>, offset: f64) -> Result<Self> {
        ConvexFn::new(vec![MaxBlock {
            pieces: vec![QuadPiece {
                quad: Some(quad),
                linear,
                offset,
            }],
        }])
    }

    pub fn sum(parts: Vec<ConvexFn>) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut dim = None;
        for p in parts {
            if let Some(d) = dim {
                if p.dim != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: p.dim,
                    });
                }
            } else {
                dim = Some(p.dim);
            }
            blocks.extend(p.blocks);
        }
        ConvexFn::new(blocks)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Representation tag: "max-affine", "smooth-plus-max-affine",
    /// "max-smooth" or "sum".
    pub fn representation(&self) -> &'static str {
        let affine_block =
            |b: &MaxBlock| b.pieces.iter().all(|p| p.is_affine());
        let smooth_block = |b: &MaxBlock| b.pieces.len() == 1;
        match self.blocks.as_slice() {
            [b] if affine_block(b) => "max-affine",
            [_] => "max-smooth",
            [a, b] if smooth_block(a) && affine_block(b) => "smooth-plus-max-affine",
            [a, b] if affine_block(a) && smooth_block(b) => "smooth-plus-max-affine",
            _ => "sum",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.blocks.iter().map(|b| b.eval(x)).sum()
    }

    /// Canonical subgradient selection: in each block, the gradient of the
    /// lowest-index active piece.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for b in &self.blocks {
            let act = b.active(x);
            g = add(&g, &b.pieces[act[0]].gradient(x));
        }
        g
    }

    /// Extreme points of the subdifferential at `x`: sums over blocks of
    /// active-piece gradients; capped to guard against degenerate inputs.
    pub fn extreme_subgradients(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![vec![0.0; self.dim]];
        for b in &self.blocks {
            let grads: Vec<Vec<f64>> = b
                .active(x)
                .into_iter()
                .map(|i| b.pieces[i].gradient(x))
                .collect();
            let mut next = Vec::with_capacity(out.len() * grads.len());
            for base in &out {
                for g in &grads {
                    next.push(add(base, g));
                }
            }
            out = next;
            if out.len() > 4096 {
                out.truncate(4096);
            }
        }
        out
    }

    /// True when the subdifferential at `x` is a singleton: every block has a
    /// unique active gradient.
    pub fn differentiable_at(&self, x: &[f64]) -> bool {
        for b in &self.blocks {
            let act = b.active(x);
            let g0 = b.pieces[act[0]].gradient(x);
            for &i in &act[1..] {
                let gi = b.pieces[i].gradient(x);
                if crate::numeric::dist2(&g0, &gi).sqrt() > 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    /// Gradient when differentiable, `None` at kinks.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if self.differentiable_at(x) {
            Some(self.subgradient(x))
        } else {
            None
        }
    }
}

/// Dimension of the affine hull of the subdifferential at `x`, i.e.
/// `dim span{∂φ(x) − p}`.
///
/// The active sets of the max blocks are available analytically, so the
/// probe radius is unused for the exact representations in this crate; it is
/// kept in the signature for oracles with sampled active sets.
pub fn subdiff_dim(phi: &ConvexFn, x: &[f64], _probe_radius: f64, svd_tol: f64) -> usize {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for b in &phi.blocks {
        let act = b.active(x);
        let g0 = b.pieces[act[0]].gradient(x);
        for &i in &act[1..] {
            rows.push(sub(&b.pieces[i].gradient(x), &g0));
        }
    }
    principal_span(&rows, phi.dim, svd_tol).len()
}

/// Maximal violation of the subgradient inequality
/// `f(y) ≥ f(x) + ⟨g(x), y−x⟩ − λ|y−x|²/2` over a list of sample pairs.
///
/// For affine active pieces the tangent value is computed as the plane value
/// at `y`, so the inequality holds exactly, not merely up to rounding.
pub fn subgradient_certificate(phi: &ConvexFn, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in pairs {
        let mut tangent = 0.0;
        for b in &phi.blocks {
            let act = b.active(x);
            let p = &b.pieces[act[0]];
            tangent += if p.is_affine() {
                p.eval(y)
            } else {
                p.eval(x) + dot(&p.gradient(x), &sub(y, x))
            };
        }
        let slack = phi.semiconvexity * 0.5 * crate::numeric::dist2(x, y);
        worst = worst.max(tangent - slack - phi.eval(y));
    }
    worst
}

/// A coordinate of a DC graph map: the difference `φ − ψ` of two convex
/// oracles on the parameter space `ℝ^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcCoord {
    pub phi: ConvexFn,
    pub psi: ConvexFn,
}

/// A coordinate-permuted DC graph map `Φ : ℝ^k → ℝ^d`.
///
/// In canonical slots the map reads `Φ̃(X) = (X, (φ_{k+1}−ψ_{k+1})(X), …)`;
/// `perm[s]` is the ambient axis receiving canonical slot `s`. The first `k`
/// ambient coordinates `x[perm[0..k]]` are the graph coordinates and
/// reproduce the parameters exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DcChart {
    pub k: usize,
    pub d: usize,
    pub perm: Vec<usize>,
    pub coords: Vec<DcCoord>,
}

impl DcChart {
    pub fn new(k: usize, d: usize, perm: Vec<usize>, coords: Vec<DcCoord>) -> Result<Self> {
        if perm.len() != d {
            return Err(Error::LengthMismatch(perm.len(), d));
        }
        let mut seen = vec![false; d];
        for &p in &perm {
            if p >= d || seen[p] {
                return Err(Error::Descriptor("perm is not a permutation".into()));
            }
            seen[p] = true;
        }
        if coords.len() != d - k {
            return Err(Error::LengthMismatch(coords.len(), d - k));
        }
        for c in &coords {
            if c.phi.dim() != k || c.psi.dim() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: c.phi.dim(),
                });
            }
        }
        Ok(DcChart { k, d, perm, coords })
    }

    /// Identity permutation chart from one-dimensional coordinate functions.
    pub fn graph_1d(d: usize, coords: Vec<DcCoord>) -> Result<Self> {
        DcChart::new(1, d, (0..d).collect(), coords)
    }

    /// `Φ(t) = (t, 0, …, 0)`.
    pub fn segment(d: usize) -> Self {
        let zero = DcCoord {
            phi: ConvexFn::zero(1),
            psi: ConvexFn::zero(1),
        };
        DcChart::graph_1d(d, vec![zero; d - 1]).expect("segment chart")
    }

    /// `Φ(t) = (t, |t|, 0, …, 0)`.
    pub fn graph_of_abs(d: usize) -> Self {
        let mut coords = vec![DcCoord {
            phi: ConvexFn::abs_affine(vec![1.0], 0.0).unwrap(),
            psi: ConvexFn::zero(1),
        }];
        coords.extend(vec![
            DcCoord {
                phi: ConvexFn::zero(1),
                psi: ConvexFn::zero(1),
            };
            d - 2
        ]);
        DcChart::graph_1d(d, coords).expect("abs chart")
    }

    /// `Φ(t) = (t, t², 0, …, 0)`.
    pub fn graph_of_quadratic(d: usize) -> Self {
        let mut coords = vec![DcCoord {
            phi: ConvexFn::quadratic(vec![vec![2.0]], vec![0.0], 0.0).unwrap(),
            psi: ConvexFn::zero(1),
        }];
        coords.extend(vec![
            DcCoord {
                phi: ConvexFn::zero(1),
                psi: ConvexFn::zero(1),
            };
            d - 2
        ]);
        DcChart::graph_1d(d, coords).expect("parabola chart")
    }

    /// Evaluates the chart at a parameter vector.
    pub fn eval(&self, params: &[f64]) -> Result<Vec<f64>> {
        if params.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: params.len(),
            });
        }
        let mut out = vec![0.0; self.d];
        for s in 0..self.k {
            out[self.perm[s]] = params[s];
        }
        for (j, c) in self.coords.iter().enumerate() {
            out[self.perm[self.k + j]] = c.phi.eval(params) - c.psi.eval(params);
        }
        Ok(out)
    }

    /// Graph coordinates of an ambient point (the parameters, when the point
    /// lies on the chart).
    pub fn graph_coords(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k).map(|s| x[self.perm[s]]).collect()
    }

    /// Euclidean defect `|Φ(X(x)) − x|`; zero exactly on the chart.
    pub fn on_chart_defect(&self, x: &[f64]) -> f64 {
        let params = self.graph_coords(x);
        match self.eval(&params) {
            Ok(y) => crate::numeric::dist2(&y, x).sqrt(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Jacobian columns (`d×k`, column `t` = `∂Φ/∂X_t`) when every coordinate
    /// function is differentiable at the parameters; `None` at kinks.
    pub fn jacobian(&self, params: &[f64]) -> Option<Vec<Vec<f64>>> {
        let mut cols = vec![vec![0.0; self.d]; self.k];
        for s in 0..self.k {
            cols[s][self.perm[s]] = 1.0;
        }
        for (j, c) in self.coords.iter().enumerate() {
            let gp = c.phi.gradient(params)?;
            let gq = c.psi.gradient(params)?;
            let axis = self.perm[self.k + j];
            for t in 0..self.k {
                cols[t][axis] = gp[t] - gq[t];
            }
        }
        Some(cols)
    }
}

/// Result of comparing the tangent planes of several charts at one point.
#[derive(Debug, Clone)]
pub struct TangentPlaneReport {
    pub exists: bool,
    /// Orthonormal basis of the common plane when it exists; basis of the
    /// first differentiable chart otherwise.
    pub plane: Vec<Vec<f64>>,
    /// One entry per chart: largest principal angle against the first
    /// chart's plane, or `None` when the chart is not differentiable there.
    pub chart_defects: Vec<Option<f64>>,
}

/// Common tangent plane of several charts at `x`.
///
/// Every chart in the list must contain `x` (graph-coordinate check). The
/// plane exists when every chart is differentiable at its preimage and the
/// column spans of the Jacobians agree pairwise within `angle_tol`.
pub fn tangent_plane(charts: &[&DcChart], x: &[f64], angle_tol: f64) -> Result<TangentPlaneReport> {
    if charts.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut planes: Vec<Option<Vec<Vec<f64>>>> = Vec::new();
    for chart in charts {
        let defect = chart.on_chart_defect(x);
        if defect > 1e-9 {
            return Err(Error::OffChart(defect));
        }
        let params = chart.graph_coords(x);
        planes.push(
            chart
                .jacobian(&params)
                .map(|cols| orthonormalize(&cols, 1e-12)),
        );
    }
    let reference = planes.iter().flatten().next().cloned();
    let mut exists = planes.iter().all(|p| p.is_some());
    let mut chart_defects = Vec::with_capacity(planes.len());
    for p in &planes {
        match (p, &reference) {
            (Some(pl), Some(r)) => {
                let ang = max_principal_angle(r, pl).unwrap_or(std::f64::consts::FRAC_PI_2);
                if ang > angle_tol {
                    exists = false;
                }
                chart_defects.push(Some(ang));
            }
            _ => chart_defects.push(None),
        }
    }
    Ok(TangentPlaneReport {
        exists,
        plane: reference.unwrap_or_default(),
        chart_defects,
    })
}

/// Branch preference used by the explicit selections of the separating
/// convex function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    /// Pieces lifted from `φ_j` (the "sum of v's" side).
    Graph,
    /// Pieces of the form `x_j + ψ_j`, whose gradients carry `+e_j`.
    Raised,
}

/// A measurable subgradient selection of a separating convex function:
/// per block, among the active pieces, prefer the requested branch.
#[derive(Debug, Clone)]
pub struct SubgradSelection {
    prefs: Vec<Branch>,
}

/// The separating convex function of a chart together with its `d−k+1`
/// explicit subgradient selections. On the chart the selections are pairwise
/// at distance at least one.
#[derive(Debug, Clone)]
pub struct SeparatingConvex {
    pub phi: ConvexFn,
    selections: Vec<SubgradSelection>,
    /// For each block, the number of pieces belonging to the raised branch.
    raised_counts: Vec<usize>,
}

impl SeparatingConvex {
    pub fn selection_count(&self) -> usize {
        self.selections.len()
    }

    /// Evaluates selection `s` at an ambient point. Selections are valid
    /// subgradients of `phi` everywhere, with the stated separation on the
    /// chart.
    pub fn selection(&self, s: usize, x: &[f64]) -> Vec<f64> {
        let sel = &self.selections[s];
        let mut g = vec![0.0; self.phi.dim()];
        for ((block, &raised), &pref) in self
            .phi
            .blocks
            .iter()
            .zip(&self.raised_counts)
            .zip(&sel.prefs)
        {
            let act = block.active(x);
            let is_raised = |i: usize| i < raised;
            let pick = act
                .iter()
                .copied()
                .find(|&i| match pref {
                    Branch::Raised => is_raised(i),
                    Branch::Graph => !is_raised(i),
                })
                .unwrap_or(act[0]);
            g = add(&g, &block.pieces[pick].gradient(x));
        }
        g
    }
}

/// Builds the convex function `φ(x) = Σ_j max(x_j + ψ_j(X^k), φ_j(X^k))` of a
/// max-affine chart, together with the `d−k+1` selections of its proof: the
/// all-graph selection and, for each normal axis, the selection raised along
/// that axis.
pub fn build_separating_convex(chart: &DcChart) -> Result<SeparatingConvex> {
    if chart.k == chart.d {
        return Err(Error::NoNormalDirection);
    }
    let d = chart.d;
    let lift = |plane: &QuadPiece| -> Result<QuadPiece> {
        if !plane.is_affine() {
            return Err(Error::UnsupportedRepresentation(
                "separating convex function needs max-affine coordinates",
            ));
        }
        let mut slope = vec![0.0; d];
        for (t, &a) in plane.linear.iter().enumerate() {
            slope[chart.perm[t]] = a;
        }
        Ok(QuadPiece::affine(slope, plane.offset))
    };
    let single_max_affine = |f: &ConvexFn| -> Result<Vec<QuadPiece>> {
        if f.blocks.len() != 1 || f.blocks[0].pieces.iter().any(|p| !p.is_affine()) {
            return Err(Error::UnsupportedRepresentation(
                "separating convex function needs max-affine coordinates",
            ));
        }
        Ok(f.blocks[0].pieces.clone())
    };
    let mut blocks = Vec::with_capacity(d - chart.k);
    let mut raised_counts = Vec::with_capacity(d - chart.k);
    for (j, coord) in chart.coords.iter().enumerate() {
        let axis = chart.perm[chart.k + j];
        let mut pieces = Vec::new();
        for p in single_max_affine(&coord.psi)? {
            let mut lifted = lift(&p)?;
            lifted.linear[axis] += 1.0;
            pieces.push(lifted);
        }
        let raised = pieces.len();
        for p in single_max_affine(&coord.phi)? {
            pieces.push(lift(&p)?);
        }
        blocks.push(MaxBlock { pieces });
        raised_counts.push(raised);
    }
    let phi = ConvexFn::new(blocks)?;
    let n_normal = d - chart.k;
    let mut selections = Vec::with_capacity(n_normal + 1);
    selections.push(SubgradSelection {
        prefs: vec![Branch::Graph; n_normal],
    });
    for l in 0..n_normal {
        let mut prefs = vec![Branch::Graph; n_normal];
        prefs[l] = Branch::Raised;
        selections.push(SubgradSelection { prefs });
    }
    Ok(SeparatingConvex {
        phi,
        selections,
        raised_counts,
    })
}

/// Options for [`check_affine_ortho`].
#[derive(Debug, Clone)]
pub struct AffineOrthoOptions {
    /// Required pairwise separation of subgradients near the point.
    pub separation_eps: f64,
    /// Radius of the sampled parameter ball certifying the separation.
    pub ball_radius: f64,
    /// Number of sample points on the ball.
    pub samples: usize,
    /// SVD tolerance for subdifferential dimensions.
    pub svd_tol: f64,
}

impl Default for AffineOrthoOptions {
    fn default() -> Self {
        AffineOrthoOptions {
            separation_eps: 0.5,
            ball_radius: 1e-3,
            samples: 16,
            svd_tol: 1e-6,
        }
    }
}

/// Checks that the chart tangent directions are orthogonal to the
/// subdifferential directions of `phi` at `x`, returning the largest
/// `|cos angle|` between the two spans.
///
/// Hypotheses are verified, not assumed: the point must lie on the chart,
/// `dim ∂_x φ` must equal `d − k`, the chart must be differentiable at the
/// preimage, and the subdifferential must contain `d−k+1` points pairwise
/// `separation_eps`-apart at sampled chart points around `x`. Violations are
/// reported as errors.
pub fn check_affine_ortho(
    phi: &ConvexFn,
    chart: &DcChart,
    x: &[f64],
    opts: &AffineOrthoOptions,
) -> Result<f64> {
    let defect = chart.on_chart_defect(x);
    if defect > 1e-9 {
        return Err(Error::OffChart(defect));
    }
    let normal_dim = chart.d - chart.k;
    let found = subdiff_dim(phi, x, opts.ball_radius, opts.svd_tol);
    if found != normal_dim {
        return Err(Error::HypothesisFailure(format!(
            "dim ∂φ = {found} instead of {normal_dim}"
        )));
    }
    let params = chart.graph_coords(x);
    let jac = chart.jacobian(&params).ok_or_else(|| {
        Error::HypothesisFailure("chart not differentiable at the preimage".into())
    })?;
    // Separation certified on sampled chart points around x.
    for s in 0..opts.samples {
        let mut probe = params.clone();
        let angle = 2.0 * std::f64::consts::PI * (s as f64 + 0.5) / opts.samples as f64;
        for (t, p) in probe.iter_mut().enumerate() {
            *p += opts.ball_radius * (angle + t as f64).cos();
        }
        let y = chart.eval(&probe)?;
        let extremes = phi.extreme_subgradients(&y);
        if !has_separated_family(&extremes, normal_dim + 1, opts.separation_eps) {
            return Err(Error::HypothesisFailure(format!(
                "no {}-point subgradient family separated by {} near x",
                normal_dim + 1,
                opts.separation_eps
            )));
        }
    }
    let tangent = orthonormalize(&jac, 1e-12);
    let extremes = phi.extreme_subgradients(x);
    let g0 = &extremes[0];
    let diffs: Vec<Vec<f64>> = extremes[1..].iter().map(|g| sub(g, g0)).collect();
    let normal = principal_span(&diffs, chart.d, opts.svd_tol);
    Ok(max_alignment_cosine(&tangent, &normal))
}

fn has_separated_family(points: &[Vec<f64>], count: usize, eps: f64) -> bool {
    let mut chosen: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if chosen
            .iter()
            .all(|q| crate::numeric::dist2(p, q).sqrt() >= eps - 1e-9)
        {
            chosen.push(p);
            if chosen.len() >= count {
                return true;
            }
        }
    }
    false
}

/// Serializable description of a convex oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexDesc {
    /// `max_i ⟨a_i, x⟩ + b_i`; each plane row is `[a…, b]`.
    MaxAffine { planes: Vec<Vec<f64>> },
    Quadratic {
        q: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: f64,
    },
    MaxQuadratic { pieces: Vec<QuadPiece> },
    Sum { parts: Vec<ConvexDesc> },
}

impl ConvexDesc {
    pub fn build(&self) -> Result<ConvexFn> {
        match self {
            ConvexDesc::MaxAffine { planes } => {
                let mut parsed = Vec::with_capacity(planes.len());
                for row in planes {
                    if row.is_empty() {
                        return Err(Error::Descriptor("empty plane row".into()));
                    }
                    let (a, b) = row.split_at(row.len() - 1);
                    parsed.push((a.to_vec(), b[0]));
                }
                ConvexFn::max_affine(parsed)
            }
            ConvexDesc::Quadratic { q, b, c } => ConvexFn::quadratic(q.clone(), b.clone(), *c),
            ConvexDesc::MaxQuadratic { pieces } => ConvexFn::new(vec![MaxBlock {
                pieces: pieces.clone(),
            }]),
            ConvexDesc::Sum { parts } => {
                let built: Result<Vec<_>> = parts.iter().map(|p| p.build()).collect();
                ConvexFn::sum(built?)
            }
        }
    }
}

/// Serializable DC chart descriptor. `pieces` lists the coordinate functions
/// in the order `φ_{k+1}, ψ_{k+1}, φ_{k+2}, ψ_{k+2}, …`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcChartDesc {
    pub k: usize,
    pub permutation: Vec<usize>,
    pub pieces: Vec<ConvexDesc>,
}

impl DcChartDesc {
    pub fn build(&self) -> Result<DcChart> {
        if self.pieces.len() % 2 != 0 {
            return Err(Error::Descriptor(
                "pieces must alternate φ_j, ψ_j and have even length".into(),
            ));
        }
        let d = self.k + self.pieces.len() / 2;
        let mut coords = Vec::with_capacity(self.pieces.len() / 2);
        for pair in self.pieces.chunks(2) {
            coords.push(DcCoord {
                phi: pair[0].build()?,
                psi: pair[1].build()?,
            });
        }
        DcChart::new(self.k, d, self.permutation.clone(), coords)
    }
}

/// Sorted snapped copy of a vector family, for order-insensitive equality in
/// tests.
pub fn canonical_family(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vs.iter().map(|v| snap_vec(v)).collect();
    out.sort_by(|a, b| lex_cmp(a, b));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_chart_kink_detected() {
        let chart = DcChart::graph_of_abs(2);
        assert!(chart.jacobian(&[0.0]).is_none());
        let j = chart.jacobian(&[0.5]).unwrap();
        assert_eq!(j[0], vec![1.0, 1.0]);
        let j = chart.jacobian(&[-0.5]).unwrap();
        assert_eq!(j[0], vec![1.0, -1.0]);
    }

    #[test]
    fn parabola_jacobian() {
        let chart = DcChart::graph_of_quadratic(2);
        let j = chart.jacobian(&[1.0]).unwrap();
        assert_eq!(j[0], vec![1.0, 2.0]);
    }

    #[test]
    fn tangent_plane_agreement_and_transversality() {
        let flat = DcChart::segment(2);
        let cubic_like = DcChart::graph_1d(
            2,
            vec![DcCoord {
                // t³ is DC on a window: use φ−ψ with smooth quadratics panned
                // to zero slope at the origin; here 0 suffices to test
                // agreement of planes, so take the zero graph again.
                phi: ConvexFn::zero(1),
                psi: ConvexFn::zero(1),
            }],
        )
        .unwrap();
        let rep = tangent_plane(&[&flat, &cubic_like], &[0.0, 0.0], 1e-8).unwrap();
        assert!(rep.exists);
        assert_eq!(rep.plane.len(), 1);

        let diag = DcChart::graph_1d(
            2,
            vec![DcCoord {
                phi: ConvexFn::max_affine(vec![(vec![1.0], 0.0)]).unwrap(),
                psi: ConvexFn::zero(1),
            }],
        )
        .unwrap();
        let rep = tangent_plane(&[&flat, &diag], &[0.0, 0.0], 1e-8).unwrap();
        assert!(!rep.exists);
        let angle = rep.chart_defects[1].unwrap();
        assert!((angle - std::f64::consts::FRAC_PI_4).abs() < 1e-9);
    }

    #[test]
    fn tangent_plane_rejects_off_chart_points() {
        let flat = DcChart::segment(2);
        assert!(matches!(
            tangent_plane(&[&flat], &[0.0, 0.3], 1e-8),
            Err(Error::OffChart(_))
        ));
    }

    #[test]
    fn separating_convex_for_flat_segment() {
        // Φ(t) = (t, 0): φ(x) = max(x₂, 0), selections (0,0) and (0,1).
        let chart = DcChart::segment(2);
        let sep = build_separating_convex(&chart).unwrap();
        assert_eq!(sep.selection_count(), 2);
        let x = [0.25, 0.0];
        assert_eq!(sep.phi.eval(&x), 0.0);
        let s0 = sep.selection(0, &x);
        let s1 = sep.selection(1, &x);
        assert_eq!(s0, vec![0.0, 0.0]);
        assert_eq!(s1, vec![0.0, 1.0]);
        assert!((crate::numeric::dist2(&s0, &s1).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separating_convex_for_abs_graph() {
        let chart = DcChart::graph_of_abs(2);
        let sep = build_separating_convex(&chart).unwrap();
        for t in [-0.7, 0.4, 0.9] {
            let x = chart.eval(&[t]).unwrap();
            let s0 = sep.selection(0, &x);
            let s1 = sep.selection(1, &x);
            assert!(crate::numeric::dist2(&s0, &s1).sqrt() >= 1.0 - 1e-9);
        }
        // Subgradient inequality for both selections on a sample grid.
        let grid: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![-1.0 + 0.02 * i as f64, 0.3 * (i as f64 * 0.37).sin()])
            .collect();
        let mut pairs = Vec::new();
        for x in &grid {
            for y in grid.iter().step_by(7) {
                pairs.push((x.clone(), y.clone()));
            }
        }
        assert!(subgradient_certificate(&sep.phi, &pairs) <= 0.0);
    }

    #[test]
    fn subdiff_dims() {
        // |x₁| in ℝ²: dimension 1 on the hinge.
        let abs1 = ConvexFn::abs_affine(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(subdiff_dim(&abs1, &[0.0, 0.7], 0.0, 1e-6), 1);
        assert_eq!(subdiff_dim(&abs1, &[0.5, 0.7], 0.0, 1e-6), 0);
        // |x₁| + |x₂| at the origin: dimension 2.
        let abs2 = ConvexFn::abs_affine(vec![0.0, 1.0], 0.0).unwrap();
        let both = ConvexFn::sum(vec![abs1, abs2]).unwrap();
        assert_eq!(subdiff_dim(&both, &[0.0, 0.0], 0.0, 1e-6), 2);
    }

    #[test]
    fn affine_ortho_flat_and_curved() {
        let chart = DcChart::segment(2);
        let sep = build_separating_convex(&chart).unwrap();
        let defect = check_affine_ortho(
            &sep.phi,
            &chart,
            &[0.3, 0.0],
            &AffineOrthoOptions::default(),
        )
        .unwrap();
        assert!(defect <= 1e-12);

        // φ = max(x₂, 2x₁² − x₂) = |x₂ − x₁²| + x₁², Φ(t) = (t, t²):
        // normal (−2t, 1) against tangent (1, 2t).
        let curved = DcChart::graph_of_quadratic(2);
        let phi = ConvexFn::new(vec![MaxBlock {
            pieces: vec![
                QuadPiece::affine(vec![0.0, 1.0], 0.0),
                QuadPiece {
                    quad: Some(vec![vec![4.0, 0.0], vec![0.0, 0.0]]),
                    linear: vec![0.0, -1.0],
                    offset: 0.0,
                },
            ],
        }])
        .unwrap();
        for t in [-0.6, 0.1, 0.8] {
            let x = curved.eval(&[t]).unwrap();
            let defect =
                check_affine_ortho(&phi, &curved, &x, &AffineOrthoOptions::default()).unwrap();
            assert!(defect <= 1e-8, "defect {defect} at t {t}");
        }
    }

    #[test]
    fn affine_ortho_reports_hypothesis_failure() {
        // |x₁| + |x₂| has a 2-dimensional subdifferential at the origin,
        // one more than the segment chart allows.
        let chart = DcChart::segment(2);
        let corner = ConvexFn::sum(vec![
            ConvexFn::abs_affine(vec![1.0, 0.0], 0.0).unwrap(),
            ConvexFn::abs_affine(vec![0.0, 1.0], 0.0).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            check_affine_ortho(&corner, &chart, &[0.0, 0.0], &AffineOrthoOptions::default()),
            Err(Error::HypothesisFailure(_))
        ));
    }

    #[test]
    fn composition_matches_direct_construction() {
        // Ψ(t) = (t, |t|) composed with the linear third coordinate x₂ gives
        // the same points as the directly built chart (t, |t|, |t|).
        let inner = DcChart::graph_of_abs(2);
        let outer = DcChart::new(
            2,
            3,
            vec![0, 1, 2],
            vec![DcCoord {
                phi: ConvexFn::max_affine(vec![(vec![0.0, 1.0], 0.0)]).unwrap(),
                psi: ConvexFn::zero(2),
            }],
        )
        .unwrap();
        let direct = DcChart::graph_1d(
            3,
            vec![
                DcCoord {
                    phi: ConvexFn::abs_affine(vec![1.0], 0.0).unwrap(),
                    psi: ConvexFn::zero(1),
                },
                DcCoord {
                    phi: ConvexFn::abs_affine(vec![1.0], 0.0).unwrap(),
                    psi: ConvexFn::zero(1),
                },
            ],
        )
        .unwrap();
        for i in 0..50 {
            let t = -1.0 + i as f64 * 0.04;
            let composed = outer.eval(&inner.eval(&[t]).unwrap()).unwrap();
            let straight = direct.eval(&[t]).unwrap();
            assert!(crate::numeric::dist2(&composed, &straight).sqrt() <= 1e-12);
        }
    }

    #[test]
    fn convexity_certificate_on_randomized_pairs() {
        // Deterministic low-discrepancy pair grid standing in for 10⁴
        // random draws; exact (≤ 0) for max-affine oracles.
        let oracles = vec![
            ConvexFn::abs_affine(vec![1.0, -0.5], 0.2).unwrap(),
            ConvexFn::max_affine(vec![
                (vec![1.0, 0.0], 0.0),
                (vec![-1.0, 1.0], 0.3),
                (vec![0.5, -2.0], -0.1),
            ])
            .unwrap(),
            build_separating_convex(&DcChart::graph_of_abs(2)).unwrap().phi,
        ];
        let mut pairs = Vec::with_capacity(10_000);
        for i in 0..10_000u64 {
            let frac = |k: u64, base: f64| {
                let mut x = k as f64 * base;
                x -= x.floor();
                4.0 * x - 2.0
            };
            pairs.push((
                vec![frac(i, 0.754877666), frac(i, 0.569840296)],
                vec![frac(i, 0.380649593), frac(i, 0.225923469)],
            ));
        }
        for phi in &oracles {
            assert!(subgradient_certificate(phi, &pairs) <= 0.0);
        }
        // Quadratic parts are checked up to rounding.
        let smooth = ConvexFn::quadratic(
            vec![vec![2.0, 0.5], vec![0.5, 1.0]],
            vec![0.1, -0.3],
            0.0,
        )
        .unwrap();
        assert!(subgradient_certificate(&smooth, &pairs) <= 1e-12);
    }

    #[test]
    fn separating_convex_puts_graph_in_jk() {
        // At every sampled on-graph point the subdifferential dimension is
        // at least d − k.
        for chart in [DcChart::segment(3), DcChart::graph_of_abs(3)] {
            let sep = build_separating_convex(&chart).unwrap();
            for i in 0..100 {
                let t = -1.0 + 0.02 * i as f64;
                let x = chart.eval(&[t]).unwrap();
                let dim = subdiff_dim(&sep.phi, &x, 0.0, 1e-6);
                assert!(dim >= chart.d - chart.k, "dim {dim} at t={t}");
            }
        }
    }

    #[test]
    fn descriptor_roundtrip() {
        let desc = DcChartDesc {
            k: 1,
            permutation: vec![1, 0],
            pieces: vec![
                ConvexDesc::MaxAffine {
                    planes: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
                },
                ConvexDesc::MaxAffine {
                    planes: vec![vec![0.0, 0.0]],
                },
            ],
        };
        let chart = desc.build().unwrap();
        // Permuted: ambient x = (|t|, t).
        let p = chart.eval(&[-0.5]).unwrap();
        assert_eq!(p, vec![0.5, -0.5]);
        let json = serde_json::to_string(&desc).unwrap();
        let back: DcChartDesc = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build().unwrap(), chart);
    }

    #[test]
    fn representation_tags() {
        assert_eq!(
            ConvexFn::abs_affine(vec![1.0], 0.0).unwrap().representation(),
            "max-affine"
        );
        let parab = ConvexFn::quadratic(vec![vec![2.0]], vec![0.0], 0.0).unwrap();
        assert_eq!(parab.representation(), "max-smooth");
        let mixed = ConvexFn::sum(vec![
            parab,
            ConvexFn::abs_affine(vec![1.0], 0.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(mixed.representation(), "smooth-plus-max-affine");
    }
}
