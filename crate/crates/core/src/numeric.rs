//! Shared numerical helpers: coordinate snapping, deterministic summation and
//! small dense linear algebra on `Vec<f64>` vectors.

use nalgebra::DMatrix;
use std::cmp::Ordering;

/// Spacing of the coordinate grid used to decide exact equality of points and
/// velocity atoms. Two vectors are identified when all coordinates coincide
/// after rounding to this grid.
pub const GRID: f64 = 1e-12;

/// Rounds a coordinate to the `GRID` lattice. `-0.0` is normalized to `0.0`
/// so that snapped values admit a total order compatible with `==`.
pub fn snap(x: f64) -> f64 {
    let s = (x / GRID).round() * GRID;
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

/// Snaps every coordinate of a vector.
pub fn snap_vec(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(snap).collect()
}

/// Lexicographic comparison of coordinate vectors. Inputs are expected to be
/// snapped; NaN never occurs in validated data.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            ord => return ord,
        }
    }
    a.len().cmp(&b.len())
}

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// length, so results are independent of any parallel evaluation order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale_vec(s: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm2(a).sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Orthogonal projection of `v` onto the span of an orthonormal family.
pub fn project_onto(basis: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for b in basis {
        let c = dot(b, v);
        for (o, bi) in out.iter_mut().zip(b) {
            *o += c * bi;
        }
    }
    out
}

/// Squared distance from `v` to the span of an orthonormal family.
pub fn dist2_to_span(basis: &[Vec<f64>], v: &[f64]) -> f64 {
    let p = project_onto(basis, v);
    dist2(v, &p)
}

/// Gram–Schmidt with drop tolerance: returns an orthonormal family spanning
/// the same space as the input vectors.
pub fn orthonormalize(vecs: &[Vec<f64>], drop_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vecs {
        let mut w = v.clone();
        for _ in 0..2 {
            let p = project_onto(&basis, &w);
            w = sub(&w, &p);
        }
        let n = norm(&w);
        if n > drop_tol {
            basis.push(scale_vec(1.0 / n, &w));
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of an orthonormal family
/// inside `ℝ^d`. Canonical axes are appended in order and re-orthonormalized,
/// so the result is deterministic.
pub fn complement_basis(basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut full: Vec<Vec<f64>> = basis.to_vec();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        full.push(e);
    }
    let ortho = orthonormalize(&full, 1e-9);
    ortho[basis.len()..].to_vec()
}

/// Maximal Gram-matrix defect `max |⟨bᵢ,bⱼ⟩ − δᵢⱼ|` of a claimed orthonormal
/// family.
pub fn gram_defect(basis: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(a, b) - target).abs());
        }
    }
    worst
}

/// Singular values of `UᵀV` for orthonormal bases `U`, `V` (columns), clamped
/// to `[0, 1]`. These are the cosines of the principal angles.
pub fn principal_cosines(u: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<f64> {
    if u.is_empty() || v.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_fn(u.len(), v.len(), |i, j| dot(&u[i], &v[j]));
    let svd = m.svd(false, false);
    svd.singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect()
}

/// Largest principal angle (radians) between two subspaces of equal
/// dimension. Returns `None` when the dimensions differ; `Some(0.0)` for two
/// zero-dimensional spaces.
pub fn max_principal_angle(u: &[Vec<f64>], v: &[Vec<f64>]) -> Option<f64> {
    if u.len() != v.len() {
        return None;
    }
    if u.is_empty() {
        return Some(0.0);
    }
    let cosines = principal_cosines(u, v);
    cosines
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .acos()
        .into()
}

/// Largest cosine between unit vectors of the two spans; `0` for orthogonal
/// subspaces, `1` when the spans share a direction.
pub fn max_alignment_cosine(u: &[Vec<f64>], v: &[Vec<f64>]) -> f64 {
    principal_cosines(u, v)
        .into_iter()
        .fold(0.0f64, f64::max)
}

/// Principal span of a set of observation rows: the right singular vectors
/// whose singular value is at least `rel_tol` times the largest one. An empty
/// or all-zero observation set yields the zero space.
pub fn principal_span(rows: &[Vec<f64>], dim: usize, rel_tol: f64) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    if smax <= f64::MIN_POSITIVE {
        return Vec::new();
    }
    let mut span = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s >= rel_tol * smax {
            span.push(vt.row(i).iter().copied().collect::<Vec<f64>>());
        }
    }
    // nalgebra does not guarantee a sign convention; fix the first nonzero
    // coordinate to be positive so estimates are reproducible.
    for v in span.iter_mut() {
        if let Some(p) = v.iter().find(|c| c.abs() > 1e-12) {
            if *p < 0.0 {
                for c in v.iter_mut() {
                    *c = -*c;
                }
            }
        }
    }
    span
}
