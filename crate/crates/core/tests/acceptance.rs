//! Acceptance gate: one test per criterion, each pinned to its stated
//! tolerance and printing a pass line with the measured quantities.
//! Expected values marked as derived are computed by the independent oracles
//! in `common` (vertex/permutation enumeration, fine quadrature, direct
//! sample counting) inside the tests themselves.

mod common;

use common::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use wcone::cones::{
    closedness_regression, doubling_limit, estimate_section, membership, orthogonal_section,
    project_onto_section_cone, GrassmannSection,
};
use wcone::decomposition::{
    charmuk_maxmin, chebyshev_bound_check, decompose, estimate_dtan, preiss_blowup, tube_mass,
    verify_peqd,
};
use wcone::fiber_geometry::{bundle_distance, is_orthogonal_to_gamma, metric_dot, metric_pair, w_mu};
use wcone::fields::{
    barycenter, center, frame_field, gamma_of, merge_fields, velocity_of_plan, FiberMeasure,
    MeasureField, VectorFieldOnBase,
};
use wcone::fixtures::*;
use wcone::measures::{make_measure, DiscreteMeasure};
use wcone::numeric::{dist2, dot, max_alignment_cosine, max_principal_angle, norm, sub};
use wcone::ot::{extend_optimal_plan, is_cyclically_monotone, solve_ot, truncate_plan};

fn unit(dim: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

/// Criterion 1: solver cost equals the exhaustive vertex-enumeration
/// minimum on 200 random instances with supports ≤ 6, in under 10 s.
#[test]
fn criterion_01_exact_ot_matches_vertex_enumeration() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    // 140 general-weight instances with supports up to 4 per side: every
    // spanning tree of the bipartite support graph is enumerated.
    for _ in 0..140 {
        let d = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=4);
        let mu = rand_measure(&mut rng, d, m, 2.0);
        let nu = rand_measure(&mut rng, d, n, 2.0);
        let sol = solve_ot(&mu, &nu).unwrap();
        let oracle = vertex_enumeration_min_cost(&mu.weights, &nu.weights, &|i, j| {
            dist2(&mu.points[i].coords, &nu.points[j].coords)
        });
        worst = worst.max((sol.cost - oracle).abs() / (1.0 + oracle.abs()));
    }
    // 60 uniform instances of sizes 5 and 6: the vertices are the
    // permutation couplings.
    for round in 0..60 {
        let n = if round % 2 == 0 { 5 } else { 6 };
        let d = rng.gen_range(1..=3);
        let pts: Vec<Vec<f64>> = (0..2 * n).map(|_| rand_point(&mut rng, d, 2.0)).collect();
        let mu = make_measure(pts[..n].to_vec(), vec![1.0; n]).unwrap();
        let nu = make_measure(pts[n..].to_vec(), vec![1.0; n]).unwrap();
        let sol = solve_ot(&mu, &nu).unwrap();
        let oracle = permutation_min_cost(n, &|i, j| {
            dist2(&mu.points[i].coords, &nu.points[j].coords)
        });
        worst = worst.max((sol.cost - oracle).abs() / (1.0 + oracle.abs()));
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(worst <= 1e-13, "relative gap to enumeration {worst}");
    assert!(elapsed < 10.0, "criterion 1 took {elapsed:.1}s");
    println!(
        "[PASS] criterion 1: 200 instances, max relative gap {worst:.2e}, {elapsed:.2}s (< 10 s)"
    );
}

/// Criterion 2: the metric scalar product equals the fiber-sum formula
/// within 1e-10 (per-fiber correlations from independent vertex
/// enumeration), and centred fields pair nonnegatively.
#[test]
fn criterion_02_scalar_product_locality() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_gap: f64 = 0.0;
    let mut worst_neg: f64 = 0.0;
    for round in 0..100 {
        let d = 1 + (round % 3);
        let n = rng.gen_range(2..=50);
        let mu = rand_measure(&mut rng, d, n, 2.0);
        let xi = rand_field(&mut rng, &mu, 4, 2.0);
        let zeta = rand_field(&mut rng, &mu, 4, 2.0);
        let dot_value = metric_dot(&xi, &zeta).unwrap();
        let fiber_sum: f64 = (0..mu.len())
            .map(|i| {
                mu.weights[i] * vertex_enumeration_max_corr(&xi.fibers[i], &zeta.fibers[i])
            })
            .sum();
        worst_gap = worst_gap.max((dot_value - fiber_sum).abs());

        let centred = rand_centred_field(&mut rng, &mu, 2, 2.0);
        worst_neg = worst_neg.min(metric_dot(&centred, &zeta).unwrap());
    }
    assert!(worst_gap <= 1e-10, "fiber-sum gap {worst_gap}");
    assert!(worst_neg >= -1e-10, "centred pairing dipped to {worst_neg}");
    println!(
        "[PASS] criterion 2: 100 pairs, max |dot − fiber sum| {worst_gap:.2e} (≤ 1e-10), min centred pairing {worst_neg:.2e} (≥ −1e-10)"
    );
}

/// Criterion 3: orthogonality to γ_f via the scalar product and via the
/// atomwise inner products agree in both directions, with zero
/// counterexamples.
#[test]
fn criterion_03_gamma_orthogonality_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut checked = 0;
    for round in 0..100 {
        let d = 2 + (round % 2);
        let n = rng.gen_range(2..=20);
        let mu = rand_measure(&mut rng, d, n, 2.0);
        let f = VectorFieldOnBase {
            vectors: (0..n)
                .map(|_| {
                    let v = rand_point(&mut rng, d, 1.5);
                    if norm(&v) < 0.2 {
                        unit(d, 0)
                    } else {
                        v
                    }
                })
                .collect(),
        };
        // Three families: fibers orthogonal to f by construction, generic
        // fibers, and a mixture.
        let fam = round % 3;
        let fibers: Vec<FiberMeasure> = (0..n)
            .map(|i| {
                let fx = &f.vectors[i];
                let nf = norm(fx);
                let mut w = rand_point(&mut rng, d, 2.0);
                if fam == 0 || (fam == 2 && i % 2 == 0) {
                    // Remove the f-component, leaving an exactly centred
                    // pair orthogonal to f up to rounding.
                    let c = dot(&w, fx) / (nf * nf);
                    w = sub(&w, &fx.iter().map(|a| c * a).collect::<Vec<_>>());
                    if norm(&w) < 1e-6 {
                        // Degenerate draw; replace by a vector orthogonal
                        // to f in a coordinate plane.
                        w = wcone::numeric::complement_basis(
                            &[fx.iter().map(|a| a / nf).collect()],
                            d,
                        )[0]
                        .clone();
                    }
                } else if norm(&w) < 0.2 || dot(&w, fx).abs() < 1e-3 {
                    w = fx.clone();
                }
                FiberMeasure::new(
                    vec![w.iter().map(|a| -a).collect(), w],
                    vec![0.5, 0.5],
                )
                .unwrap()
            })
            .collect();
        let xi = MeasureField::new(mu.clone(), fibers).unwrap();
        let gamma = gamma_of(&f, &mu).unwrap();
        let dot_small = metric_dot(&xi, &gamma).unwrap() <= 1e-9;
        let (inner_small, _) = is_orthogonal_to_gamma(&xi, &f, 1e-7).unwrap();
        assert_eq!(
            dot_small, inner_small,
            "equivalence failed on round {round}"
        );
        checked += 1;
    }
    println!(
        "[PASS] criterion 3: {checked} centred fields, ⟨ξ,γ_f⟩ ≤ 1e-9 ⇔ max|⟨v,f⟩| ≤ 1e-7, 0 counterexamples"
    );
}

/// Criterion 4: projection identities — Pythagoras at 1e-10, residual
/// orthogonal to 20 cone elements at 1e-9, equality case for symmetric
/// cone elements at 1e-9.
#[test]
fn criterion_04_projection_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_pyth: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    let mut worst_eq: f64 = 0.0;
    for round in 0..30 {
        let d = 2 + (round % 2);
        let n = rng.gen_range(2..=10);
        let mu = rand_measure(&mut rng, d, n, 2.0);
        let basis: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|_| {
                let dim = rng.gen_range(0..=d);
                let raw: Vec<Vec<f64>> = (0..dim).map(|_| rand_point(&mut rng, d, 1.0)).collect();
                wcone::numeric::orthonormalize(&raw, 1e-6)
            })
            .collect();
        let section = GrassmannSection::new(mu.clone(), basis).unwrap();
        let xi = rand_centred_field(&mut rng, &mu, 2, 2.0);
        let (proj, residual) = project_onto_section_cone(&xi, &section).unwrap();
        worst_pyth =
            worst_pyth.max((xi.norm2() - proj.norm2() - residual.norm2()).abs());
        for _ in 0..20 {
            let g = VectorFieldOnBase {
                vectors: section
                    .basis
                    .iter()
                    .map(|b| {
                        let mut v = vec![0.0; d];
                        for e in b {
                            let c: f64 = rng.gen_range(-1.0..1.0);
                            for (vi, ei) in v.iter_mut().zip(e) {
                                *vi += c * ei;
                            }
                        }
                        v
                    })
                    .collect(),
            };
            let gam = gamma_of(&g, &mu).unwrap();
            worst_orth = worst_orth.max(metric_dot(&residual, &gam).unwrap().abs());
            let a = metric_dot(&xi, &gam).unwrap();
            let b = metric_dot(&proj, &gam).unwrap();
            worst_eq = worst_eq.max((a - b).abs());
        }
    }
    assert!(worst_pyth <= 1e-10, "Pythagoras defect {worst_pyth}");
    assert!(worst_orth <= 1e-9, "residual-cone pairing {worst_orth}");
    assert!(worst_eq <= 1e-9, "equality case defect {worst_eq}");
    println!(
        "[PASS] criterion 4: Pythagoras {worst_pyth:.2e} (≤ 1e-10), residual ⊥ cone {worst_orth:.2e} (≤ 1e-9), equality case {worst_eq:.2e} (≤ 1e-9)"
    );
}

/// Criterion 5: doubling contraction — squared gaps halve per iteration
/// within 1e-6 over 6 iterations on 20 random two-atom-fiber fields, and
/// the superposition reaches γ_{f₊} within 2⁻³ of its initial gap.
#[test]
fn criterion_05_doubling_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_ratio: f64 = 0.0;
    for round in 0..20 {
        let d = 1 + (round % 3);
        let n = rng.gen_range(2..=8);
        let mu = rand_measure(&mut rng, d, n, 2.0);
        // Two-atom fibers clustered around ±f(x): the clusters stay
        // separated along the iteration, which keeps the superposition gap
        // exactly at the mixture value.
        let mut f_vectors = Vec::with_capacity(n);
        let mut plus_fibers = Vec::with_capacity(n);
        let mut minus_fibers = Vec::with_capacity(n);
        for _ in 0..n {
            let mut fx = rand_point(&mut rng, d, 1.0);
            let nf = norm(&fx);
            if nf < 0.5 {
                fx = fx.iter().map(|c| c * (0.75 / nf.max(1e-9))).collect();
            }
            let nf = norm(&fx);
            let mut cluster = |center_sign: f64| {
                let dir = {
                    let mut u = rand_point(&mut rng, d, 1.0);
                    let nu = norm(&u).max(1e-9);
                    u.iter_mut().for_each(|c| *c /= nu);
                    u
                };
                let s: f64 = rng.gen_range(0.05..0.3) * nf;
                let q: f64 = rng.gen_range(0.4..0.6);
                let a: Vec<f64> = dir.iter().map(|c| c * s).collect();
                let b: Vec<f64> = a.iter().map(|c| -c * q / (1.0 - q)).collect();
                let base: Vec<f64> = fx.iter().map(|c| center_sign * c).collect();
                FiberMeasure::new(
                    vec![
                        base.iter().zip(&a).map(|(x, y)| x + y).collect(),
                        base.iter().zip(&b).map(|(x, y)| x + y).collect(),
                    ],
                    vec![q, 1.0 - q],
                )
                .unwrap()
            };
            plus_fibers.push(cluster(1.0));
            minus_fibers.push(cluster(-1.0));
            f_vectors.push(fx);
        }
        let plus = MeasureField::new(mu.clone(), plus_fibers).unwrap();
        let minus = MeasureField::new(mu.clone(), minus_fibers).unwrap();
        // The legs have barycenters ±f only up to the cluster construction;
        // recenter the minus leg so the superposition is centred exactly.
        let bp = barycenter(&plus);
        let bm = barycenter(&minus);
        let minus = MeasureField::new(
            mu.clone(),
            minus
                .fibers
                .iter()
                .enumerate()
                .map(|(i, fib)| {
                    let shift: Vec<f64> = bp.vectors[i]
                        .iter()
                        .zip(&bm.vectors[i])
                        .map(|(p, m)| -p - m)
                        .collect();
                    fib.translate(&shift)
                })
                .collect(),
        )
        .unwrap();
        let trace = doubling_limit(&plus, &minus, 6, 4096).unwrap();
        for gaps in [&trace.gaps_plus, &trace.gaps_minus] {
            for step in gaps.windows(2) {
                if step[0] > 1e-14 {
                    let ratio = step[1] / step[0];
                    worst_ratio = worst_ratio.max((ratio - 0.5).abs());
                }
            }
        }
        let initial = trace.superposition_gaps[0];
        let final_gap = trace.superposition_gaps[6];
        assert!(
            final_gap <= 0.125 * initial * (1.0 + 1e-9),
            "superposition gap {final_gap} vs 2⁻³·{initial}"
        );
    }
    assert!(worst_ratio <= 1e-6, "contraction ratio defect {worst_ratio}");
    println!(
        "[PASS] criterion 5: 20 fields × 6 iterations, |gap ratio − ½| ≤ {worst_ratio:.2e} (≤ 1e-6), superposition reaches γ_f within 2⁻³·initial"
    );
}

/// Criterion 6: Chebyshev concentration bound for d ∈ {1,2,3} and
/// 0 ≤ k < d on 100 random fields each, plus the exact analytic case.
#[test]
fn criterion_06_chebyshev_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst_excess = f64::NEG_INFINITY;
    for d in 1..=3usize {
        for k in 0..d {
            let r = d - k;
            let n = 20;
            let mu = rand_measure(&mut rng, d, n, 2.0);
            let family: Vec<Vec<f64>> = (k..d).map(|axis| unit(d, axis)).collect();
            let section = GrassmannSection::constant(&mu, family).unwrap();
            let frame: Vec<VectorFieldOnBase> = (0..r)
                .map(|j| VectorFieldOnBase {
                    vectors: section.basis.iter().map(|b| b[j].clone()).collect(),
                })
                .collect();
            let xi = frame_field(&mu, &frame).unwrap();
            let threshold = 0.25 / r as f64;
            // Analytic case: η = 0_μ gives (1, 16(d−k)).
            let zero = MeasureField::zero(&mu);
            let (lhs, rhs) = chebyshev_bound_check(&zero, &xi, &section, 0.5, threshold).unwrap();
            assert!((lhs - 1.0).abs() <= 1e-12, "analytic lhs {lhs}");
            assert!(
                (rhs - 16.0 * r as f64).abs() <= 1e-11,
                "analytic rhs {rhs} vs {}",
                16 * r
            );
            for _ in 0..100 {
                let eta = rand_field(&mut rng, &mu, 3, 2.0);
                let (lhs, rhs) =
                    chebyshev_bound_check(&eta, &xi, &section, 0.5, threshold).unwrap();
                worst_excess = worst_excess.max(lhs - rhs);
                assert!(lhs <= rhs + 1e-9, "bound violated: {lhs} > {rhs}");
            }
        }
    }
    println!(
        "[PASS] criterion 6: 600 random fields over d ∈ {{1,2,3}}, max lhs − rhs = {worst_excess:.2e} (≤ 1e-9); analytic case (1, 16(d−k)) exact"
    );
}

/// Criterion 7: the segment fixture splits vertically — the estimated
/// splitting section is span{e₂} everywhere and the tangent planes align
/// with its complement, both within 1e-6.
#[test]
fn criterion_07_segment_normal_splitting() {
    let fx = segment_fixture(200, 0.1).unwrap();
    let d_tan = estimate_dtan(&fx.measure, &fx.targets, 1e-6).unwrap();
    let e2 = vec![unit(2, 1)];
    let mut worst_angle: f64 = 0.0;
    for i in 0..fx.measure.len() {
        assert_eq!(d_tan.dim_at(i), 1, "splitting dimension at point {i}");
        let angle = max_principal_angle(&d_tan.basis[i], &e2).unwrap();
        worst_angle = worst_angle.max(angle);
    }
    assert!(worst_angle <= 1e-6, "principal-angle defect {worst_angle}");
    let d_sol = orthogonal_section(&d_tan);
    let report = verify_peqd(&fx.measure, &[&fx.chart], &d_sol, 1e-6).unwrap();
    assert!(report.max_defect <= 1e-6, "alignment {}", report.max_defect);
    assert_eq!(report.exceptional_mass, 0.0);
    println!(
        "[PASS] criterion 7: segment n=200, span{{e₂}} defect {worst_angle:.2e} (≤ 1e-6), alignment defect {:.2e} (≤ 1e-6)",
        report.max_defect
    );
}

/// Criterion 8: square-boundary solenoidality — the pairing of gradient
/// fields with the tangential unit field decays by ≥ 1.8 per doubling from
/// n = 128 to n = 1024 and is ≤ 1e-2 at n = 1024. The continuum value is
/// certified to vanish by an independent fine quadrature first.
#[test]
fn criterion_08_square_boundary_solenoidality() {
    let phis = square_test_functions();
    // Independent quadrature oracle: midpoint rule at 2^16 nodes confirms
    // the loop integral of each tangential derivative vanishes.
    let n_ref = 1 << 16;
    for (j, phi) in phis.iter().enumerate() {
        let mut total = 0.0;
        for i in 0..n_ref {
            let t = (i as f64 + 0.5) / n_ref as f64;
            let (p, tangent) = square_curve(t);
            let g = phi.gradient(&p);
            total += (g[0] * tangent[0] + g[1] * tangent[1]) / n_ref as f64;
        }
        assert!(
            total.abs() <= 1e-7,
            "quadrature oracle: loop integral of φ_{j} is {total:.3e}"
        );
    }
    let sizes = [128usize, 256, 512, 1024];
    let mut dots = vec![Vec::with_capacity(phis.len()); sizes.len()];
    for (row, &n) in sizes.iter().enumerate() {
        let (mu, zeta) = square_boundary(n).unwrap();
        for phi in &phis {
            let xi = MeasureField::from_map(&mu, &gradient_field(phi, &mu)).unwrap();
            dots[row].push(metric_dot(&xi, &zeta).unwrap());
        }
    }
    let mut min_ratio = f64::INFINITY;
    let mut max_final: f64 = 0.0;
    for j in 0..phis.len() {
        for step in 0..sizes.len() - 1 {
            min_ratio = min_ratio.min(dots[step][j].abs() / dots[step + 1][j].abs());
        }
        max_final = max_final.max(dots[sizes.len() - 1][j].abs());
    }
    assert!(min_ratio >= 1.8, "decay factor {min_ratio}");
    assert!(max_final <= 1e-2, "pairing at n = 1024 is {max_final}");
    println!(
        "[PASS] criterion 8: 10 gradients, min decay factor {min_ratio:.2} (≥ 1.8), max |⟨ξ,ζ⟩| at n=1024 {max_final:.2e} (≤ 1e-2)"
    );
}

/// Criterion 9: the three-component mixture is classified with masses
/// (⅓,⅓,⅓) and zero misclassified points, and the estimated splitting
/// directions are orthogonal to the analytic curve tangents.
#[test]
fn criterion_09_decomposition_fixture() {
    let fx = decomp_fixture(100, 10, 0.003).unwrap();
    let d_tan = estimate_dtan(&fx.flat, &fx.targets, 1e-6).unwrap();
    let d_sol = orthogonal_section(&d_tan);
    let result = decompose(&fx.flat, &d_sol).unwrap();
    let misclassified: usize = result
        .classification
        .iter()
        .zip(&fx.labels)
        .filter(|(a, b)| a != b)
        .count();
    assert_eq!(misclassified, 0, "misclassified points");
    // Masses match the label sums bitwise and the nominal thirds.
    for k in 0..=2 {
        let direct: f64 = wcone::numeric::pairwise_sum(
            &fx.flat
                .weights
                .iter()
                .zip(&fx.labels)
                .filter(|(_, &l)| l == k)
                .map(|(w, _)| *w)
                .collect::<Vec<_>>(),
        );
        assert_eq!(result.masses[k], direct, "mass of component {k}");
        assert!((result.masses[k] - 1.0 / 3.0).abs() <= 1e-12);
    }
    // Estimated splitting directions on the curve are orthogonal to the
    // analytic tangents.
    let mut worst_cos: f64 = 0.0;
    for (i, (p, &label)) in fx.flat.points.iter().zip(&fx.labels).enumerate() {
        if label == 1 {
            let (tangent, _) = mixture_curve_frame(p.coords[0]);
            worst_cos = worst_cos.max(max_alignment_cosine(&d_tan.basis[i], &[tangent]));
        }
    }
    assert!(worst_cos <= 1e-6, "tangent alignment cosine {worst_cos}");
    println!(
        "[PASS] criterion 9: masses ({:.12}, {:.12}, {:.12}), 0 misclassified, D₁ ⊥ tangents within {worst_cos:.2e} (≤ 1e-6)",
        result.masses[0], result.masses[1], result.masses[2]
    );
}

/// Criterion 10: the max–min identification formula equals the min–max and
/// the direct component mass, exactly, on the mixture fixture and 20 random
/// predicates.
#[test]
fn criterion_10_maxmin_formula() {
    let fx = decomp_fixture(100, 10, 0.003).unwrap();
    let chart = fx.curve_chart.clone();
    let atoms = |x: &[f64]| x[0] < -0.5;
    let on_curve = move |x: &[f64]| chart.on_chart_defect(x) <= 1e-9;
    let everything = |_: &[f64]| true;
    let nothing = |_: &[f64]| false;
    let atom_a = |x: &[f64]| x[0] < -1.35;
    let atom_b = |x: &[f64]| (-1.35..=-0.5).contains(&x[0]);
    let atoms_or_curve = {
        let on_curve = on_curve.clone();
        move |x: &[f64]| atoms(x) || on_curve(x)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut predicates: Vec<Box<dyn Fn(&[f64]) -> bool>> = vec![
        Box::new(everything),
        Box::new(|x: &[f64]| x[0] < 0.0),
    ];
    for _ in 0..20 {
        let a = rand_point(&mut rng, 2, 1.0);
        let c: f64 = rng.gen_range(-2.0..2.0);
        predicates.push(Box::new(move |x: &[f64]| dot(&a, x) <= c));
    }

    for a_pred in &predicates {
        let a: &dyn Fn(&[f64]) -> bool = a_pred.as_ref();
        for k in 0..=2usize {
            let b_all: Vec<&dyn Fn(&[f64]) -> bool> = match k {
                0 => vec![&atoms, &atom_a, &atom_b],
                1 => vec![&on_curve, &atoms_or_curve],
                _ => vec![&everything],
            };
            let c_all: Vec<&dyn Fn(&[f64]) -> bool> = match k {
                0 => vec![&nothing],
                1 => vec![&nothing, &atoms, &atom_a],
                _ => vec![&atoms_or_curve, &on_curve, &atoms, &nothing],
            };
            let value = charmuk_maxmin(&fx.flat, a, &b_all, &c_all).unwrap();
            let direct = wcone::numeric::pairwise_sum(
                &fx.flat
                    .weights
                    .iter()
                    .zip(&fx.labels)
                    .zip(&fx.flat.points)
                    .filter(|((_, &l), p)| l == k && a(&p.coords))
                    .map(|((w, _), _)| *w)
                    .collect::<Vec<_>>(),
            );
            assert_eq!(value.max_min, value.min_max, "orders differ for k={k}");
            assert_eq!(value.max_min, direct, "formula vs direct mass for k={k}");
        }
    }
    println!(
        "[PASS] criterion 10: max–min = min–max = direct component mass, exactly, on 22 predicates × 3 components"
    );
}

/// Criterion 11: appendix constructions — extensions of optimal plans stay
/// cyclically monotone at full length, composite plans are optimal, and
/// truncations are monotone with velocity gaps nonincreasing in the radius.
#[test]
fn criterion_11_appendix_constructions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    for round in 0..50 {
        let d = 1 + (round % 3);
        let sizes: Vec<usize> = (0..3).map(|_| rng.gen_range(1..=5)).collect();
        let mu1 = rand_measure(&mut rng, d, sizes[0], 1.5);
        let nu = rand_measure(&mut rng, d, sizes[1], 1.5);
        let mu2 = rand_measure(&mut rng, d, sizes[2], 1.5);
        let eta = velocity_of_plan(&solve_ot(&mu1, &nu).unwrap().plan).unwrap();
        let lambda = [0.0, 0.3, 0.7, 1.0][round % 4];
        let xi = extend_optimal_plan(&eta, &mu2, lambda).unwrap();
        let mut pairs = Vec::new();
        let mut target_pts = Vec::new();
        let mut target_wts = Vec::new();
        for (i, fiber) in xi.fibers.iter().enumerate() {
            let x = &xi.base.points[i].coords;
            for (v, p) in fiber.velocities.iter().zip(&fiber.probs) {
                let y: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + b).collect();
                pairs.push((x.clone(), y.clone()));
                target_pts.push(y);
                target_wts.push(xi.base.weights[i] * p);
            }
        }
        let len = pairs.len();
        assert_eq!(
            is_cyclically_monotone(&pairs, len),
            (true, 0.0),
            "extension not monotone at λ={lambda}"
        );
        if lambda > 0.0 && lambda < 1.0 {
            // The composite plan is optimal between its marginals.
            let target = make_measure(target_pts, target_wts).unwrap();
            let cost: f64 = xi
                .fibers
                .iter()
                .zip(&xi.base.weights)
                .map(|(f, w)| w * f.second_moment())
                .sum();
            let solved = solve_ot(&xi.base, &target).unwrap().cost;
            assert!(
                (cost - solved).abs() <= 1e-9 * (1.0 + solved),
                "composite plan cost {cost} vs optimum {solved}"
            );
        }
    }

    // Truncation sweeps in one dimension, where the exact velocity gap is
    // nonincreasing along growing radii (in higher dimension only the
    // vanishing bound is monotone; see the dedicated unit regression).
    let mut max_gap_increase: f64 = f64::NEG_INFINITY;
    for _ in 0..30 {
        let sizes: Vec<usize> = (0..2).map(|_| rng.gen_range(2..=6)).collect();
        let mu = rand_measure(&mut rng, 1, sizes[0], 1.5);
        let nu = rand_measure(&mut rng, 1, sizes[1], 1.5);
        let plan = solve_ot(&mu, &nu).unwrap().plan;
        let reference = velocity_of_plan(&plan).unwrap();
        let mut radii: Vec<f64> = nu.points.iter().map(|p| norm(&p.coords)).collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut previous = f64::INFINITY;
        for &r in &radii {
            let truncated = truncate_plan(&plan, r + 1e-9).unwrap();
            let tpairs = truncated.support_pairs();
            let tlen = tpairs.len();
            assert_eq!(is_cyclically_monotone(&tpairs, tlen), (true, 0.0));
            let gap = w_mu(&reference, &velocity_of_plan(&truncated).unwrap())
                .unwrap()
                .0;
            max_gap_increase = max_gap_increase.max(gap - previous);
            previous = gap;
        }
        assert!(previous <= 1e-12, "full radius must recover the plan");
    }
    assert!(
        max_gap_increase <= 1e-12,
        "velocity gap increased by {max_gap_increase} along growing radii"
    );
    // In every dimension the output stays monotone and the gap is
    // controlled by the mass escaping the ball: gap² ≤ Σ_{|y|>R} ν (R+|y|)².
    for round in 0..15 {
        let d = 2 + (round % 2);
        let sizes: Vec<usize> = (0..2).map(|_| rng.gen_range(2..=6)).collect();
        let mu = rand_measure(&mut rng, d, sizes[0], 1.5);
        let nu = rand_measure(&mut rng, d, sizes[1], 1.5);
        let plan = solve_ot(&mu, &nu).unwrap().plan;
        let reference = velocity_of_plan(&plan).unwrap();
        let mut radii: Vec<f64> = nu.points.iter().map(|p| norm(&p.coords)).collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for &r in &radii {
            let radius = r + 1e-9;
            let truncated = truncate_plan(&plan, radius).unwrap();
            let tpairs = truncated.support_pairs();
            let tlen = tpairs.len();
            assert_eq!(is_cyclically_monotone(&tpairs, tlen), (true, 0.0));
            let gap = w_mu(&reference, &velocity_of_plan(&truncated).unwrap())
                .unwrap()
                .0;
            let bound: f64 = nu
                .points
                .iter()
                .zip(&nu.weights)
                .filter(|(p, _)| norm(&p.coords) > radius)
                .map(|(p, w)| w * (radius + norm(&p.coords)).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(gap <= bound + 1e-9, "gap {gap} above escape bound {bound}");
        }
    }
    println!(
        "[PASS] criterion 11: 50 extensions monotone with violation 0 and optimal composites; 30 truncation sweeps with nonincreasing gaps; escape bound holds in d ∈ {{2,3}}"
    );
}

/// Criterion 12: Preiss blow-up of the parabola at t = 0.3 — tube mass
/// nonincreasing over h = 2⁻¹…2⁻⁸ and ≤ 0.01 at the finest scale.
/// Verified against direct sample counting before freezing.
#[test]
fn criterion_12_preiss_blowup_parabola() {
    let fx = parabola_fixture(4001).unwrap();
    let scales: Vec<f64> = (1..=8).map(|n| 0.5f64.powi(n)).collect();
    let res = preiss_blowup(&fx.measure, &fx.center, &scales, 1.0).unwrap();
    let curve = res.concentration_curve(&fx.tangent_plane, 0.05, 1.0);

    // Direct sample-counting oracle, recomputed from the raw points.
    let center = wcone::numeric::snap_vec(&fx.center);
    for (slice, &value) in res.slices.iter().zip(&curve) {
        let h = slice.scale;
        let mut ball = 0.0;
        let mut outside = 0.0;
        for (p, w) in fx.measure.points.iter().zip(&fx.measure.weights) {
            let rel: Vec<f64> = sub(&p.coords, &center);
            if norm(&rel) < h {
                ball += w;
            }
            let resc: Vec<f64> = rel.iter().map(|c| c / h).collect();
            if norm(&resc) < 1.0 {
                let along = dot(&resc, &fx.tangent_plane[0]);
                let offset: Vec<f64> = resc
                    .iter()
                    .zip(&fx.tangent_plane[0])
                    .map(|(c, t)| c - along * t)
                    .collect();
                if norm(&offset) > 0.05 {
                    outside += w;
                }
            }
        }
        let oracle = outside / ball;
        assert!(
            (value - oracle).abs() <= 1e-10,
            "tube mass {value} vs counting oracle {oracle} at h={h}"
        );
    }
    for pair in curve.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12, "curve not nonincreasing: {curve:?}");
    }
    let last = *curve.last().unwrap();
    assert!(last <= 0.01, "tube mass at n=8 is {last}");
    println!(
        "[PASS] criterion 12: tube masses {:?} nonincreasing, final {last:.3} (≤ 0.01)",
        curve.iter().map(|c| (c * 1e3).round() / 1e3).collect::<Vec<_>>()
    );
}

/// Criterion 13: closedness regressions — convergent on-graph sequences
/// keep their defect bound, and the weak-escape fixture is flagged
/// solenoidal-but-not-tangent.
#[test]
fn criterion_13_closedness_regressions() {
    // Convergent γ_{f_n} with f_n → f valued in a line.
    let base = make_measure(
        (0..10).map(|i| vec![0.1 * i as f64, 0.0]).collect(),
        vec![0.1; 10],
    )
    .unwrap();
    let line = |_: &[f64]| vec![unit(2, 1)];
    let seq: Vec<MeasureField> = (0..6)
        .map(|n| {
            let f = VectorFieldOnBase::constant(vec![0.0, 1.0 + 0.5f64.powi(n)], 10);
            gamma_of(&f, &base).unwrap()
        })
        .collect();
    let report = closedness_regression(&seq, line).unwrap();
    assert!(report.final_defect <= report.max_defect + 1e-8);
    assert!(report.final_defect <= 1e-12);

    // Constant sequence with a small constant defect: the defect is
    // reported unchanged.
    let tilted = {
        let f = VectorFieldOnBase::constant(vec![3e-5, 1.0], 10);
        gamma_of(&f, &base).unwrap()
    };
    let report = closedness_regression(
        &[tilted.clone(), tilted.clone(), tilted],
        line,
    )
    .unwrap();
    assert!((report.final_defect - report.max_defect).abs() == 0.0);
    assert!(report.final_defect > 0.0);

    // Weak escape: oscillating unit maps on refining bases converge in the
    // bundle distance to γ_1, which is centred and solenoidal but not
    // tangent for the limiting diffuse base.
    let mut seq: Vec<MeasureField> = [4usize, 8, 16, 32, 64, 128]
        .iter()
        .map(|&n| oscillating_field(n).unwrap())
        .collect();
    seq.push(gamma_one_proxy(256).unwrap());
    let full_line = |_: &[f64]| vec![vec![1.0]];
    let report = closedness_regression(&seq, full_line).unwrap();
    assert!(report.final_defect <= report.max_defect + 1e-8);
    // On-graph for the solenoidal section at every step.
    assert!(report.max_defect <= 1e-12);
    // The elements carry unit barycenters, the limit is centred.
    for xi in &seq[..seq.len() - 1] {
        assert!((barycenter(xi).max_norm() - 1.0).abs() <= 1e-12);
    }
    assert_eq!(report.final_centred_defect, 0.0);
    // Against the tangent section {0} of the diffuse limit the limit field
    // carries full mass off-graph: solenoidal, not tangent.
    let zero_section = |_: &[f64]| Vec::<Vec<f64>>::new();
    let tangent_report = closedness_regression(&seq, zero_section).unwrap();
    assert!(tangent_report.final_defect >= 0.5);
    println!(
        "[PASS] criterion 13: limit defect ≤ max defect + 1e-8; weak-escape limit centred, on-graph (defect {:.1e}) and flagged solenoidal-not-tangent (tangent defect {:.2})",
        report.final_defect, tangent_report.final_defect
    );
}
