//! Named fixtures shared by the verification suites: the horizontal segment
//! with its vertical-splitting targets, the unit-square boundary with a
//! tangential unit field, the three-component labelled mixture, the parabola
//! blow-up configuration, and the oscillating-map sequence.

use crate::dc::{ConvexFn, DcChart, DcCoord};
use crate::fields::{FiberMeasure, MeasureField, VectorFieldOnBase};
use crate::measures::{
    ac_grid, make_measure, sample_dc_curve, DiscreteMeasure, MeasureMixture,
};
use crate::numeric::norm;
use crate::Result;

/// Horizontal segment in the plane with targets whose optimal plans split
/// every point vertically.
pub struct SegmentFixture {
    pub measure: DiscreteMeasure,
    pub chart: DcChart,
    /// Up-shift, down-shift, and the vertical ½(up)+½(down) splitting
    /// target.
    pub targets: Vec<DiscreteMeasure>,
    pub epsilon: f64,
}

/// Uniform samples of `[0,1] × {0}` with vertical splitting targets.
pub fn segment_fixture(n: usize, epsilon: f64) -> Result<SegmentFixture> {
    let chart = DcChart::segment(2);
    let measure = sample_dc_curve(&chart, n, &[(0.0, 1.0)])?;
    let up: Vec<Vec<f64>> = measure
        .points
        .iter()
        .map(|p| vec![p.coords[0], p.coords[1] + epsilon])
        .collect();
    let down: Vec<Vec<f64>> = measure
        .points
        .iter()
        .map(|p| vec![p.coords[0], p.coords[1] - epsilon])
        .collect();
    let target_up = make_measure(up.clone(), measure.weights.clone())?;
    let target_down = make_measure(down.clone(), measure.weights.clone())?;
    let mut split_pts = up;
    split_pts.extend(down);
    let mut split_w: Vec<f64> = measure.weights.iter().map(|w| 0.5 * w).collect();
    split_w.extend(measure.weights.iter().map(|w| 0.5 * w));
    let target_split = make_measure(split_pts, split_w)?;
    Ok(SegmentFixture {
        measure,
        chart,
        targets: vec![target_up, target_down, target_split],
        epsilon,
    })
}

/// The boundary of the unit square sampled at `n` midpoints of equal arcs
/// (`n` divisible by 4, so the corners fall on cell boundaries), together
/// with the tangential unit field of the counterclockwise constant-speed
/// parametrization.
pub fn square_boundary(n: usize) -> Result<(DiscreteMeasure, MeasureField)> {
    assert!(n >= 8 && n % 4 == 0, "square boundary needs 4 | n");
    let mut pts = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64;
        let (p, dir) = square_curve(t);
        pts.push(p);
        tangents.push(dir);
    }
    let mu = make_measure(pts, vec![1.0 / n as f64; n])?;
    // Sorting inside make_measure permutes the points; recompute tangents
    // from the positions (edges are identified by the coordinates).
    let tangent_at = |p: &[f64]| -> Vec<f64> {
        if p[1] == 0.0 {
            vec![1.0, 0.0]
        } else if p[0] == 1.0 {
            vec![0.0, 1.0]
        } else if p[1] == 1.0 {
            vec![-1.0, 0.0]
        } else {
            vec![0.0, -1.0]
        }
    };
    let fibers = mu
        .points
        .iter()
        .map(|p| FiberMeasure::dirac(tangent_at(&p.coords)))
        .collect();
    let zeta = MeasureField::new(mu.clone(), fibers)?;
    Ok((mu, zeta))
}

/// Constant-speed counterclockwise parametrization of `∂[0,1]²` on `[0,1)`:
/// position and unit tangent.
pub fn square_curve(t: f64) -> (Vec<f64>, Vec<f64>) {
    let s = 4.0 * (t - t.floor());
    if s < 1.0 {
        (vec![s, 0.0], vec![1.0, 0.0])
    } else if s < 2.0 {
        (vec![1.0, s - 1.0], vec![0.0, 1.0])
    } else if s < 3.0 {
        (vec![3.0 - s, 1.0], vec![-1.0, 0.0])
    } else {
        (vec![0.0, 4.0 - s], vec![0.0, -1.0])
    }
}

/// A smooth test function `sin(ax + by + c)·exp(−|x−c₀|²/s)` with analytic
/// gradient; stands in for a compactly supported smooth function on the
/// bounded fixtures.
#[derive(Debug, Clone, Copy)]
pub struct SmoothTestFn {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub cx: f64,
    pub cy: f64,
    pub s: f64,
}

impl SmoothTestFn {
    pub fn eval(&self, p: &[f64]) -> f64 {
        let u = self.a * p[0] + self.b * p[1] + self.c;
        let q = ((p[0] - self.cx).powi(2) + (p[1] - self.cy).powi(2)) / self.s;
        u.sin() * (-q).exp()
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let u = self.a * p[0] + self.b * p[1] + self.c;
        let q = ((p[0] - self.cx).powi(2) + (p[1] - self.cy).powi(2)) / self.s;
        let g = (-q).exp();
        let du = u.cos() * g;
        let dq = -u.sin() * g;
        vec![
            self.a * du + dq * 2.0 * (p[0] - self.cx) / self.s,
            self.b * du + dq * 2.0 * (p[1] - self.cy) / self.s,
        ]
    }
}

/// Ten fixed smooth test functions used by the square-boundary decay suite.
pub fn square_test_functions() -> Vec<SmoothTestFn> {
    [
        (2.3, 1.1, 0.4, 0.3, 0.7, 0.8),
        (1.7, -2.9, 1.2, 0.8, 0.2, 1.1),
        (-3.1, 0.7, 2.0, 0.5, 0.5, 0.6),
        (0.9, 3.7, -0.8, 0.1, 0.9, 1.4),
        (4.2, -1.3, 0.1, 0.7, 0.4, 0.5),
        (-2.2, -2.4, 2.7, 0.2, 0.1, 0.9),
        (1.3, 0.6, -1.9, 0.9, 0.8, 1.2),
        (-0.8, 2.1, 0.9, 0.4, 0.3, 0.7),
        (3.4, 1.9, -0.3, 0.6, 0.6, 1.0),
        (-1.6, -3.3, 1.5, 0.85, 0.15, 0.65),
    ]
    .iter()
    .map(|&(a, b, c, cx, cy, s)| SmoothTestFn { a, b, c, cx, cy, s })
    .collect()
}

/// Gradient field of a smooth function sampled on a base.
pub fn gradient_field(f: &SmoothTestFn, mu: &DiscreteMeasure) -> VectorFieldOnBase {
    VectorFieldOnBase {
        vectors: mu.points.iter().map(|p| f.gradient(&p.coords)).collect(),
    }
}

/// The three-component mixture: two atoms, a DC curve, and an
/// absolutely-continuous grid, each of mass ⅓, with analytic sections and a
/// target family whose optimal plans split exactly along the expected
/// directions. Component index equals the splitting dimension.
pub struct DecompFixture {
    pub mixture: MeasureMixture,
    pub flat: DiscreteMeasure,
    /// Component index (= class `k`) of each flattened support point.
    pub labels: Vec<usize>,
    pub curve_chart: DcChart,
    pub targets: Vec<DiscreteMeasure>,
    pub epsilon: f64,
}

const ATOM_A: [f64; 2] = [-1.5, 0.6];
const ATOM_B: [f64; 2] = [-1.2, -0.4];

/// Curve of the mixture: `t ↦ (t, 0.3t² − 0.2)`.
fn mixture_curve_chart() -> DcChart {
    DcChart::graph_1d(
        2,
        vec![DcCoord {
            phi: ConvexFn::quadratic(vec![vec![0.6]], vec![0.0], -0.2).unwrap(),
            psi: ConvexFn::zero(1),
        }],
    )
    .unwrap()
}

/// Unit tangent and normal of the mixture curve at parameter `t`.
pub fn mixture_curve_frame(t: f64) -> (Vec<f64>, Vec<f64>) {
    let slope = 0.6 * t;
    let len = (1.0 + slope * slope).sqrt();
    (
        vec![1.0 / len, slope / len],
        vec![-slope / len, 1.0 / len],
    )
}

pub fn decomp_fixture(curve_samples: usize, grid_side: usize, epsilon: f64) -> Result<DecompFixture> {
    let atoms = make_measure(vec![ATOM_A.to_vec(), ATOM_B.to_vec()], vec![0.5, 0.5])?;
    let chart = mixture_curve_chart();
    let curve = sample_dc_curve(&chart, curve_samples, &[(0.0, 1.0)])?;
    let grid = ac_grid(&[(1.5, 2.5), (0.0, 1.0)], &[grid_side, grid_side])?;
    let third = 1.0 / 3.0;
    let mixture = MeasureMixture::new_disjoint(
        vec![(third, atoms), (third, curve), (third, grid)],
        vec!["atoms".into(), "curve".into(), "grid".into()],
    )?;
    let (flat, labels) = mixture.flatten()?;

    let is_atom = |x: &[f64]| x[0] < -0.5;
    let split_along = |dir_at: &dyn Fn(&[f64]) -> Option<Vec<f64>>| -> Result<DiscreteMeasure> {
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        for (p, w) in flat.points.iter().zip(&flat.weights) {
            match dir_at(&p.coords) {
                Some(dir) => {
                    for sign in [1.0, -1.0] {
                        pts.push(
                            p.coords
                                .iter()
                                .zip(&dir)
                                .map(|(c, d)| c + sign * epsilon * d)
                                .collect(),
                        );
                        wts.push(0.5 * w);
                    }
                }
                None => {
                    pts.push(p.coords.clone());
                    wts.push(*w);
                }
            }
        }
        make_measure(pts, wts)
    };
    let atom_e1 = split_along(&|x| if is_atom(x) { Some(vec![1.0, 0.0]) } else { None })?;
    let atom_e2 = split_along(&|x| if is_atom(x) { Some(vec![0.0, 1.0]) } else { None })?;
    let on_curve = {
        let chart = chart.clone();
        move |x: &[f64]| chart.on_chart_defect(x) <= 1e-9
    };
    let curve_normal = split_along(&|x| {
        if on_curve(x) {
            Some(mixture_curve_frame(x[0]).1)
        } else {
            None
        }
    })?;
    Ok(DecompFixture {
        mixture,
        flat,
        labels,
        curve_chart: chart,
        targets: vec![atom_e1, atom_e2, curve_normal],
        epsilon,
    })
}

impl DecompFixture {
    /// Analytic solenoidal section: `{0}` at atoms, the curve tangent line
    /// on the curve, the full plane on the grid.
    pub fn analytic_dsol(&self) -> Result<crate::cones::GrassmannSection> {
        let basis = self
            .flat
            .points
            .iter()
            .zip(&self.labels)
            .map(|(p, &k)| match k {
                0 => vec![],
                1 => vec![mixture_curve_frame(p.coords[0]).0],
                _ => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            })
            .collect();
        crate::cones::GrassmannSection::new(self.flat.clone(), basis)
    }
}

/// Parabola blow-up fixture: samples of `t ↦ (t, t²)`, the support index of
/// the chosen center, and the unit tangent plane there.
pub struct ParabolaFixture {
    pub measure: DiscreteMeasure,
    pub chart: DcChart,
    pub center: Vec<f64>,
    pub tangent_plane: Vec<Vec<f64>>,
}

/// Parabola sampled so that the parameter `t = 0.3` is exactly a grid point
/// (window `[−0.7, 1.3]` with an odd sample count).
pub fn parabola_fixture(samples: usize) -> Result<ParabolaFixture> {
    assert!(samples % 2 == 1, "odd sample count keeps t = 0.3 on the grid");
    let chart = DcChart::graph_of_quadratic(2);
    let measure = sample_dc_curve(&chart, samples, &[(-0.7, 1.3)])?;
    let t = 0.3;
    let center = chart.eval(&[{
        // Reproduce the exact grid value of the midpoint rule at the center
        // index so the center is bitwise a support point.
        let i = (samples - 1) / 2;
        -0.7 + 2.0 * (i as f64 + 0.5) / samples as f64
    }])?;
    let dir = vec![1.0, 2.0 * t];
    let len = norm(&dir);
    Ok(ParabolaFixture {
        measure,
        chart,
        center,
        tangent_plane: vec![dir.iter().map(|c| c / len).collect()],
    })
}

/// Oscillating unit-norm map fields on refining bases: `2n` uniform points
/// on `[0,1]` with velocities alternating `±1`. Each element is tangent to
/// its own atomic base while the barycenters converge only weakly to zero.
pub fn oscillating_field(n: usize) -> Result<MeasureField> {
    let count = 2 * n;
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|i| vec![(i as f64 + 0.5) / count as f64])
        .collect();
    let mu = make_measure(pts, vec![1.0 / count as f64; count])?;
    let fibers = mu
        .points
        .iter()
        .enumerate()
        .map(|(i, _)| FiberMeasure::dirac(vec![if i % 2 == 0 { 1.0 } else { -1.0 }]))
        .collect();
    MeasureField::new(mu, fibers)
}

/// The bundle limit of the oscillating sequence: `γ_{f≡1}` over a uniform
/// grid.
pub fn gamma_one_proxy(points: usize) -> Result<MeasureField> {
    let pts: Vec<Vec<f64>> = (0..points)
        .map(|i| vec![(i as f64 + 0.5) / points as f64])
        .collect();
    let mu = make_measure(pts, vec![1.0 / points as f64; points])?;
    crate::fields::gamma_of(&VectorFieldOnBase::constant(vec![1.0], points), &mu)
}
