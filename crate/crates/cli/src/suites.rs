//! Named verification suites: each composes library operations on a fixture
//! into a theorem-level report with pinned bounds, writes its CSV artifacts,
//! and returns a manifest. Identical config and seed produce byte-identical
//! outputs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use wcone::cones::{
    closedness_regression, doubling_limit, estimate_section, orthogonal_section,
    project_onto_section_cone, GrassmannSection,
};
use wcone::decomposition::{charmuk_maxmin, chebyshev_bound_check, decompose, estimate_dtan, preiss_blowup};
use wcone::fiber_geometry::{is_orthogonal_to_gamma, metric_dot, metric_pair, w_mu};
use wcone::fields::{
    barycenter, frame_field, gamma_of, velocity_of_plan, FiberMeasure, MeasureField,
    VectorFieldOnBase,
};
use wcone::fixtures::*;
use wcone::io::fmt17;
use wcone::measures::{make_measure, DiscreteMeasure};
use wcone::numeric::{dist2, dot, max_alignment_cosine, max_principal_angle, norm, sub};
use wcone::ot::{extend_optimal_plan, is_cyclically_monotone, solve_ot, truncate_plan};

/// Experiment configuration. Unknown fields are rejected; a seed is
/// mandatory for the randomized suites.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    /// Number of randomized trials where a suite draws instances.
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Named tolerance overrides; suites fall back to their pinned bounds.
    #[serde(default)]
    pub tolerances: Option<BTreeMap<String, f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: None,
            trials: None,
            output_dir: None,
            tolerances: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// "<=" or ">=".
    pub cmp: &'static str,
    pub pass: bool,
}

impl Check {
    fn le(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            bound,
            cmp: "<=",
            pass: measured <= bound,
        }
    }

    fn ge(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            bound,
            cmp: ">=",
            pass: measured >= bound,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub suite: String,
    pub version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub pass: bool,
}

pub struct SuiteContext {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    artifacts: Vec<String>,
}

impl SuiteContext {
    fn rng(&self) -> Result<ChaCha8Rng, String> {
        match self.config.seed {
            Some(s) => Ok(ChaCha8Rng::seed_from_u64(s)),
            None => Err("this suite is randomized: a seed is mandatory".into()),
        }
    }

    fn trials(&self, default: usize) -> usize {
        self.config.trials.unwrap_or(default)
    }

    /// Pinned bound of a named check, overridable from the config.
    fn bound(&self, name: &str, default: f64) -> f64 {
        self.config
            .tolerances
            .as_ref()
            .and_then(|t| t.get(name).copied())
            .unwrap_or(default)
    }

    fn write_csv(&mut self, name: &str, content: &str) -> Result<(), String> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, content).map_err(|e| format!("writing {}: {e}", path.display()))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

pub const SUITES: &[&str] = &[
    "ot-certificates",
    "scalar-product",
    "gamma-orthogonality",
    "projection",
    "doubling",
    "chebyshev",
    "segment",
    "square-solenoidal",
    "decomp",
    "maxmin",
    "appendix",
    "blowup",
    "closedness",
];

/// Runs one suite (or "all") and writes `manifest-<suite>.json` plus the CSV
/// artifacts into the output directory.
pub fn run(suite: &str, config: ExperimentConfig) -> Result<Vec<Manifest>, String> {
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(format!(
            "unknown suite '{suite}'; available: {} or all",
            SUITES.join(", ")
        ));
    };
    let out_dir = config
        .output_dir
        .clone()
        .or_else(|| std::env::var("WCONE_OUT").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("wcone-out"));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| format!("creating {}: {e}", out_dir.display()))?;
    let hash = {
        let bytes = serde_json::to_vec(&config).map_err(|e| e.to_string())?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    };
    let mut manifests = Vec::new();
    for name in names {
        let mut ctx = SuiteContext {
            config: config.clone(),
            out_dir: out_dir.clone(),
            artifacts: Vec::new(),
        };
        let checks = dispatch(name, &mut ctx)?;
        let manifest = Manifest {
            suite: name.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hash.clone(),
            seed: config.seed,
            pass: checks.iter().all(|c| c.pass),
            checks,
            artifacts: ctx.artifacts,
        };
        let path = out_dir.join(format!("manifest-{name}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())
            .map_err(|e| format!("writing {}: {e}", path.display()))?;
        manifests.push(manifest);
    }
    Ok(manifests)
}

fn dispatch(name: &str, ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    match name {
        "ot-certificates" => ot_certificates(ctx),
        "scalar-product" => scalar_product(ctx),
        "gamma-orthogonality" => gamma_orthogonality(ctx),
        "projection" => projection(ctx),
        "doubling" => doubling(ctx),
        "chebyshev" => chebyshev(ctx),
        "segment" => segment(ctx),
        "square-solenoidal" => square_solenoidal(ctx),
        "decomp" => decomp(ctx),
        "maxmin" => maxmin(ctx),
        "appendix" => appendix(ctx),
        "blowup" => blowup(ctx),
        "closedness" => closedness(ctx),
        other => Err(format!("unknown suite '{other}'")),
    }
}

fn rand_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn rand_measure(rng: &mut ChaCha8Rng, d: usize, n: usize) -> DiscreteMeasure {
    loop {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| rand_point(rng, d, 2.0)).collect();
        let wts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        if let Ok(mu) = make_measure(pts, wts) {
            if mu.len() == n {
                return mu;
            }
        }
    }
}

fn rand_field(rng: &mut ChaCha8Rng, base: &DiscreteMeasure, max_atoms: usize) -> MeasureField {
    let fibers = (0..base.len())
        .map(|_| {
            let k = rng.gen_range(1..=max_atoms);
            loop {
                let vs: Vec<Vec<f64>> = (0..k).map(|_| rand_point(rng, base.dim, 2.0)).collect();
                let ps: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
                if let Ok(f) = FiberMeasure::new(vs, ps) {
                    if f.velocities.len() == k {
                        return f;
                    }
                }
            }
        })
        .collect();
    MeasureField::new(base.clone(), fibers).expect("random field")
}

fn rand_centred_field(rng: &mut ChaCha8Rng, base: &DiscreteMeasure) -> MeasureField {
    let fibers = (0..base.len())
        .map(|_| {
            let w = rand_point(rng, base.dim, 2.0);
            FiberMeasure::new(
                vec![w.iter().map(|c| -c).collect(), w],
                vec![0.5, 0.5],
            )
            .unwrap()
        })
        .collect();
    MeasureField::new(base.clone(), fibers).expect("centred field")
}

/// Dual-feasibility and monotonicity certificates of the exact solver.
fn ot_certificates(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let mut rng = ctx.rng()?;
    let trials = ctx.trials(50);
    let mut worst_dual: f64 = 0.0;
    let mut worst_cm: f64 = 0.0;
    let mut csv = String::from("instance,dual_defect,cm_violation\n");
    for t in 0..trials {
        let d = 1 + (t % 3);
        let sizes: Vec<usize> = (0..2).map(|_| rng.gen_range(2..=8)).collect();
        let mu = rand_measure(&mut rng, d, sizes[0]);
        let nu = rand_measure(&mut rng, d, sizes[1]);
        let sol = solve_ot(&mu, &nu).map_err(|e| e.to_string())?;
        let mut dual: f64 = 0.0;
        for (i, p) in mu.points.iter().enumerate() {
            for (j, q) in nu.points.iter().enumerate() {
                let slack = sol.source_potential[i] + sol.target_potential[j]
                    - dist2(&p.coords, &q.coords);
                dual = dual.max(slack);
            }
        }
        let pairs = sol.plan.support_pairs();
        let (_, violation) = is_cyclically_monotone(&pairs, pairs.len());
        worst_dual = worst_dual.max(dual);
        worst_cm = worst_cm.max(violation);
        csv.push_str(&format!("{t},{},{}\n", fmt17(dual), fmt17(violation)));
    }
    ctx.write_csv("ot-certificates.csv", &csv)?;
    Ok(vec![
        Check::le("dual feasibility slack", worst_dual, ctx.bound("dual feasibility slack", 1e-9)),
        Check::le("support cyclical-monotonicity violation", worst_cm, ctx.bound("support cyclical-monotonicity violation", 0.0)),
    ])
}

/// Locality of the scalar product on the segment fixture: polarization
/// residuals and centred nonnegativity.
fn scalar_product(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let mut rng = ctx.rng()?;
    let trials = ctx.trials(40);
    let fx = segment_fixture(30, 0.1).map_err(|e| e.to_string())?;
    let mut worst_polar: f64 = 0.0;
    let mut worst_neg: f64 = 0.0;
    let mut csv = String::from("pair,polarization_residual,centred_pairing\n");
    for t in 0..trials {
        let xi = rand_field(&mut rng, &fx.measure, 3);
        let zeta = rand_field(&mut rng, &fx.measure, 3);
        let pair = metric_pair(&xi, &zeta).map_err(|e| e.to_string())?;
        let residual = (2.0 * pair.dot - xi.norm2() - zeta.norm2() + pair.sq_distance).abs();
        let centred = rand_centred_field(&mut rng, &fx.measure);
        let pairing = metric_dot(&centred, &zeta).map_err(|e| e.to_string())?;
        worst_polar = worst_polar.max(residual);
        worst_neg = worst_neg.min(pairing);
        csv.push_str(&format!("{t},{},{}\n", fmt17(residual), fmt17(pairing)));
    }
    ctx.write_csv("scalar-product.csv", &csv)?;
    Ok(vec![
        Check::le("polarization residual", worst_polar, ctx.bound("polarization residual", 1e-10)),
        Check::ge("centred pairing", worst_neg, ctx.bound("centred pairing", -1e-10)),
    ])
}

fn gamma_orthogonality(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let mut rng = ctx.rng()?;
    let trials = ctx.trials(60);
    let mut agreements = 0usize;
    let mut csv = String::from("trial,metric_dot,max_inner,agree\n");
    for t in 0..trials {
        let d = 2 + (t % 2);
        let n_pts = rng.gen_range(2..=12);
        let mu = rand_measure(&mut rng, d, n_pts);
        let f = VectorFieldOnBase {
            vectors: (0..mu.len()).map(|_| rand_point(&mut rng, d, 1.5)).collect(),
        };
        let orthogonal_case = t % 2 == 0;
        let fibers: Vec<FiberMeasure> = (0..mu.len())
            .map(|i| {
                let fx = &f.vectors[i];
                let mut w = rand_point(&mut rng, d, 2.0);
                if orthogonal_case {
                    let nf2 = dot(fx, fx).max(1e-12);
                    let c = dot(&w, fx) / nf2;
                    w = sub(&w, &fx.iter().map(|a| c * a).collect::<Vec<_>>());
                }
                FiberMeasure::new(vec![w.iter().map(|a| -a).collect(), w], vec![0.5, 0.5])
                    .unwrap()
            })
            .collect();
        let xi = MeasureField::new(mu.clone(), fibers).unwrap();
        let gamma = gamma_of(&f, &mu).map_err(|e| e.to_string())?;
        let dp = metric_dot(&xi, &gamma).map_err(|e| e.to_string())?;
        let (_, inner) = is_orthogonal_to_gamma(&xi, &f, 1e-7).map_err(|e| e.to_string())?;
        let agree = (dp <= 1e-9) == (inner <= 1e-7);
        agreements += agree as usize;
        csv.push_str(&format!("{t},{},{},{}\n", fmt17(dp), fmt17(inner), agree));
    }
    ctx.write_csv("gamma-orthogonality.csv", &csv)?;
    Ok(vec![Check::ge(
        "equivalence agreements",
        agreements as f64,
        ctx.bound("equivalence agreements", trials as f64),
    )])
}

fn projection(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let mut rng = ctx.rng()?;
    let trials = ctx.trials(25);
    let mut worst_pyth: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    let mut worst_eq: f64 = 0.0;
    let mut csv = String::from("trial,pythagoras,residual_orth,equality_case\n");
    for t in 0..trials {
        let d = 2 + (t % 2);
        let n_pts = rng.gen_range(2..=8);
        let mu = rand_measure(&mut rng, d, n_pts);
        let basis: Vec<Vec<Vec<f64>>> = (0..mu.len())
            .map(|_| {
                let dim = rng.gen_range(0..=d);
                let raw: Vec<Vec<f64>> = (0..dim).map(|_| rand_point(&mut rng, d, 1.0)).collect();
                wcone::numeric::orthonormalize(&raw, 1e-6)
            })
            .collect();
        let section = GrassmannSection::new(mu.clone(), basis).map_err(|e| e.to_string())?;
        let xi = rand_centred_field(&mut rng, &mu);
        let (proj, residual) = project_onto_section_cone(&xi, &section).map_err(|e| e.to_string())?;
        let pyth = (xi.norm2() - proj.norm2() - residual.norm2()).abs();
        let mut orth: f64 = 0.0;
        let mut eq: f64 = 0.0;
        for _ in 0..10 {
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
            let gam = gamma_of(&g, &mu).map_err(|e| e.to_string())?;
            orth = orth.max(metric_dot(&residual, &gam).map_err(|e| e.to_string())?.abs());
            let a = metric_dot(&xi, &gam).map_err(|e| e.to_string())?;
            let b = metric_dot(&proj, &gam).map_err(|e| e.to_string())?;
            eq = eq.max((a - b).abs());
        }
        worst_pyth = worst_pyth.max(pyth);
        worst_orth = worst_orth.max(orth);
        worst_eq = worst_eq.max(eq);
        csv.push_str(&format!("{t},{},{},{}\n", fmt17(pyth), fmt17(orth), fmt17(eq)));
    }
    ctx.write_csv("projection.csv", &csv)?;
    Ok(vec![
        Check::le("pythagoras defect", worst_pyth, ctx.bound("pythagoras defect", 1e-10)),
        Check::le("residual-cone pairing", worst_orth, ctx.bound("residual-cone pairing", 1e-9)),
        Check::le("equality case defect", worst_eq, ctx.bound("equality case defect", 1e-9)),
    ])
}

fn doubling(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let mut rng = ctx.rng()?;
    let trials = ctx.trials(10);
    let mut worst_ratio: f64 = 0.0;
    let mut csv = String::from("trial,iteration,squared_gap\n");
    for t in 0..trials {
        let d = 1 + (t % 3);
        let n_pts = rng.gen_range(2..=6);
        let mu = rand_measure(&mut rng, d, n_pts);
        let fibers: Vec<FiberMeasure> = (0..mu.len())
            .map(|_| {
                let a = rand_point(&mut rng, d, 1.5);
                let b = rand_point(&mut rng, d, 1.5);
                FiberMeasure::new(vec![a, b], vec![0.5, 0.5]).unwrap()
            })
            .collect();
        let plus = MeasureField::new(mu.clone(), fibers).unwrap();
        let minus = wcone::fields::scale_field(-1.0, &plus);
        let trace = doubling_limit(&plus, &minus, 5, 4096).map_err(|e| e.to_string())?;
        for (k, g) in trace.gaps_plus.iter().enumerate() {
            csv.push_str(&format!("{t},{k},{}\n", fmt17(*g)));
        }
        for step in trace.gaps_plus.windows(2) {
            if step[0] > 1e-14 {
                worst_ratio = worst_ratio.max((step[1] / step[0] - 0.5).abs());
            }
        }
    }
    ctx.write_csv("doubling.csv", &csv)?;
    Ok(vec![Check::le("gap ratio − ½", worst_ratio, ctx.bound("gap ratio − ½", 1e-6))])
}

fn chebyshev(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let mut rng = ctx.rng()?;
    let trials = ctx.trials(30);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut csv = String::from("d,k,trial,lhs,rhs\n");
    for d in 1..=3usize {
        for k in 0..d {
            let r = d - k;
            let mu = rand_measure(&mut rng, d, 12);
            let family: Vec<Vec<f64>> = (k..d)
                .map(|axis| {
                    let mut e = vec![0.0; d];
                    e[axis] = 1.0;
                    e
                })
                .collect();
            let section = GrassmannSection::constant(&mu, family).map_err(|e| e.to_string())?;
            let frame: Vec<VectorFieldOnBase> = (0..r)
                .map(|j| VectorFieldOnBase {
                    vectors: section.basis.iter().map(|b| b[j].clone()).collect(),
                })
                .collect();
            let xi = frame_field(&mu, &frame).map_err(|e| e.to_string())?;
            for t in 0..trials {
                let eta = rand_field(&mut rng, &mu, 3);
                let (lhs, rhs) = chebyshev_bound_check(&eta, &xi, &section, 0.5, 0.25 / r as f64)
                    .map_err(|e| e.to_string())?;
                worst_excess = worst_excess.max(lhs - rhs);
                csv.push_str(&format!("{d},{k},{t},{},{}\n", fmt17(lhs), fmt17(rhs)));
            }
        }
    }
    ctx.write_csv("chebyshev.csv", &csv)?;
    Ok(vec![Check::le("lhs − rhs", worst_excess, ctx.bound("lhs − rhs", 1e-9))])
}

fn segment(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let fx = segment_fixture(200, 0.1).map_err(|e| e.to_string())?;
    let d_tan = estimate_dtan(&fx.measure, &fx.targets, 1e-6).map_err(|e| e.to_string())?;
    let e2 = vec![vec![0.0, 1.0]];
    let mut worst_angle: f64 = 0.0;
    let mut csv = String::from("x0,x1,dim,angle_to_e2\n");
    for (i, p) in fx.measure.points.iter().enumerate() {
        let angle = max_principal_angle(&d_tan.basis[i], &e2).unwrap_or(std::f64::consts::FRAC_PI_2);
        worst_angle = worst_angle.max(angle);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt17(p.coords[0]),
            fmt17(p.coords[1]),
            d_tan.dim_at(i),
            fmt17(angle)
        ));
    }
    let d_sol = orthogonal_section(&d_tan);
    let report = wcone::decomposition::verify_peqd(&fx.measure, &[&fx.chart], &d_sol, 1e-6)
        .map_err(|e| e.to_string())?;
    ctx.write_csv("segment-angles.csv", &csv)?;
    Ok(vec![
        Check::le("splitting-direction angle to e₂", worst_angle, ctx.bound("splitting-direction angle to e₂", 1e-6)),
        Check::le("tangent alignment defect", report.max_defect, ctx.bound("tangent alignment defect", 1e-6)),
        Check::le("exceptional mass", report.exceptional_mass, ctx.bound("exceptional mass", 0.0)),
    ])
}

fn square_solenoidal(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let phis = square_test_functions();
    let sizes = [128usize, 256, 512, 1024];
    let mut csv = String::from("n,phi,dot\n");
    let mut table = vec![Vec::new(); sizes.len()];
    for (row, &n) in sizes.iter().enumerate() {
        let (mu, zeta) = square_boundary(n).map_err(|e| e.to_string())?;
        for (j, phi) in phis.iter().enumerate() {
            let xi = MeasureField::from_map(&mu, &gradient_field(phi, &mu))
                .map_err(|e| e.to_string())?;
            let d = metric_dot(&xi, &zeta).map_err(|e| e.to_string())?;
            table[row].push(d);
            csv.push_str(&format!("{n},{j},{}\n", fmt17(d)));
        }
    }
    let mut min_ratio = f64::INFINITY;
    let mut max_final: f64 = 0.0;
    for j in 0..phis.len() {
        for r in 0..sizes.len() - 1 {
            min_ratio = min_ratio.min(table[r][j].abs() / table[r + 1][j].abs());
        }
        max_final = max_final.max(table[sizes.len() - 1][j].abs());
    }
    ctx.write_csv("square-solenoidal.csv", &csv)?;
    Ok(vec![
        Check::ge("decay factor per doubling", min_ratio, ctx.bound("decay factor per doubling", 1.8)),
        Check::le("pairing at n = 1024", max_final, ctx.bound("pairing at n = 1024", 1e-2)),
    ])
}

fn decomp(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let fx = decomp_fixture(100, 10, 0.003).map_err(|e| e.to_string())?;
    let d_tan = estimate_dtan(&fx.flat, &fx.targets, 1e-6).map_err(|e| e.to_string())?;
    let d_sol = orthogonal_section(&d_tan);
    let result = decompose(&fx.flat, &d_sol).map_err(|e| e.to_string())?;
    let misclassified = result
        .classification
        .iter()
        .zip(&fx.labels)
        .filter(|(a, b)| a != b)
        .count();
    let mut mass_err: f64 = 0.0;
    for k in 0..=2 {
        mass_err = mass_err.max((result.masses[k] - 1.0 / 3.0).abs());
    }
    let mut worst_cos: f64 = 0.0;
    let mut csv = String::from("x0,x1,k,d0,d1\n");
    for (i, p) in fx.flat.points.iter().enumerate() {
        let dir = d_tan.basis[i]
            .first()
            .cloned()
            .unwrap_or_else(|| vec![0.0, 0.0]);
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt17(p.coords[0]),
            fmt17(p.coords[1]),
            result.classification[i],
            fmt17(dir[0]),
            fmt17(dir[1])
        ));
        if fx.labels[i] == 1 {
            let (tangent, _) = mixture_curve_frame(p.coords[0]);
            worst_cos = worst_cos.max(max_alignment_cosine(&d_tan.basis[i], &[tangent]));
        }
    }
    ctx.write_csv("decomp-classification.csv", &csv)?;
    ctx.write_csv(
        "decomp-section.csv",
        &wcone::io::section_csv(&d_tan),
    )?;
    Ok(vec![
        Check::le("misclassified points", misclassified as f64, ctx.bound("misclassified points", 0.0)),
        Check::le("mass deviation from 1/3", mass_err, ctx.bound("mass deviation from 1/3", 1e-12)),
        Check::le("splitting ∥ tangent cosine", worst_cos, ctx.bound("splitting ∥ tangent cosine", 1e-6)),
    ])
}

fn maxmin(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let mut rng = ctx.rng()?;
    let trials = ctx.trials(20);
    let fx = decomp_fixture(100, 10, 0.003).map_err(|e| e.to_string())?;
    let chart = fx.curve_chart.clone();
    let atoms = |x: &[f64]| x[0] < -0.5;
    let on_curve = move |x: &[f64]| chart.on_chart_defect(x) <= 1e-9;
    let everything = |_: &[f64]| true;
    let nothing = |_: &[f64]| false;
    let atoms_or_curve = {
        let on_curve = on_curve.clone();
        move |x: &[f64]| atoms(x) || on_curve(x)
    };
    let mut predicates: Vec<Box<dyn Fn(&[f64]) -> bool>> = vec![Box::new(everything)];
    for _ in 0..trials {
        let a = rand_point(&mut rng, 2, 1.0);
        let c: f64 = rng.gen_range(-2.0..2.0);
        predicates.push(Box::new(move |x: &[f64]| dot(&a, x) <= c));
    }
    let mut worst_gap: f64 = 0.0;
    let mut csv = String::from("predicate,k,max_min,min_max,direct\n");
    for (pi, a_pred) in predicates.iter().enumerate() {
        let a: &dyn Fn(&[f64]) -> bool = a_pred.as_ref();
        for k in 0..=2usize {
            let b_all: Vec<&dyn Fn(&[f64]) -> bool> = match k {
                0 => vec![&atoms],
                1 => vec![&on_curve, &atoms_or_curve],
                _ => vec![&everything],
            };
            let c_all: Vec<&dyn Fn(&[f64]) -> bool> = match k {
                0 => vec![&nothing],
                1 => vec![&nothing, &atoms],
                _ => vec![&atoms_or_curve, &atoms, &nothing],
            };
            let value = charmuk_maxmin(&fx.flat, a, &b_all, &c_all).map_err(|e| e.to_string())?;
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
            worst_gap = worst_gap
                .max((value.max_min - value.min_max).abs())
                .max((value.max_min - direct).abs());
            csv.push_str(&format!(
                "{pi},{k},{},{},{}\n",
                fmt17(value.max_min),
                fmt17(value.min_max),
                fmt17(direct)
            ));
        }
    }
    ctx.write_csv("maxmin.csv", &csv)?;
    Ok(vec![Check::le("max–min vs min–max vs direct", worst_gap, ctx.bound("max–min vs min–max vs direct", 0.0))])
}

fn appendix(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let mut rng = ctx.rng()?;
    let trials = ctx.trials(25);
    let mut worst_violation: f64 = 0.0;
    let mut worst_gap_increase = f64::NEG_INFINITY;
    let mut csv = String::from("trial,lambda,extension_violation\n");
    for t in 0..trials {
        let d = 1 + (t % 3);
        let sizes: Vec<usize> = (0..3).map(|_| rng.gen_range(1..=5)).collect();
        let mu1 = rand_measure(&mut rng, d, sizes[0]);
        let nu = rand_measure(&mut rng, d, sizes[1]);
        let mu2 = rand_measure(&mut rng, d, sizes[2]);
        let eta = velocity_of_plan(&solve_ot(&mu1, &nu).map_err(|e| e.to_string())?.plan)
            .map_err(|e| e.to_string())?;
        let lambda = [0.0, 0.3, 0.7, 1.0][t % 4];
        let xi = extend_optimal_plan(&eta, &mu2, lambda).map_err(|e| e.to_string())?;
        let mut pairs = Vec::new();
        for (i, fiber) in xi.fibers.iter().enumerate() {
            let x = &xi.base.points[i].coords;
            for v in &fiber.velocities {
                pairs.push((x.clone(), x.iter().zip(v).map(|(a, b)| a + b).collect()));
            }
        }
        let n_pairs = pairs.len();
        let (_, violation) = is_cyclically_monotone(&pairs, n_pairs);
        worst_violation = worst_violation.max(violation);
        csv.push_str(&format!("{t},{lambda},{}\n", fmt17(violation)));
    }
    let mut gap_csv = String::from("trial,radius,gap\n");
    for t in 0..trials {
        let sizes: Vec<usize> = (0..2).map(|_| rng.gen_range(2..=6)).collect();
        let mu = rand_measure(&mut rng, 1, sizes[0]);
        let nu = rand_measure(&mut rng, 1, sizes[1]);
        let plan = solve_ot(&mu, &nu).map_err(|e| e.to_string())?.plan;
        let reference = velocity_of_plan(&plan).map_err(|e| e.to_string())?;
        let mut radii: Vec<f64> = nu.points.iter().map(|p| norm(&p.coords)).collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut previous = f64::INFINITY;
        for &r in &radii {
            let out = truncate_plan(&plan, r + 1e-9).map_err(|e| e.to_string())?;
            let gap = w_mu(&reference, &velocity_of_plan(&out).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?
                .0;
            worst_gap_increase = worst_gap_increase.max(gap - previous);
            previous = gap;
            gap_csv.push_str(&format!("{t},{},{}\n", fmt17(r), fmt17(gap)));
        }
    }
    ctx.write_csv("appendix-extensions.csv", &csv)?;
    ctx.write_csv("appendix-truncations.csv", &gap_csv)?;
    Ok(vec![
        Check::le("extension monotonicity violation", worst_violation, ctx.bound("extension monotonicity violation", 0.0)),
        Check::le("truncation gap increase", worst_gap_increase, ctx.bound("truncation gap increase", 1e-12)),
    ])
}

fn blowup(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let fx = parabola_fixture(4001).map_err(|e| e.to_string())?;
    let scales: Vec<f64> = (1..=8).map(|n| 0.5f64.powi(n)).collect();
    let res = preiss_blowup(&fx.measure, &fx.center, &scales, 1.0).map_err(|e| e.to_string())?;
    let curve = res.concentration_curve(&fx.tangent_plane, 0.05, 1.0);
    let mut csv = String::from("h,tube_mass\n");
    for (h, t) in scales.iter().zip(&curve) {
        csv.push_str(&format!("{},{}\n", fmt17(*h), fmt17(*t)));
    }
    ctx.write_csv("blowup-concentration.csv", &csv)?;
    let mut max_increase = f64::NEG_INFINITY;
    for pair in curve.windows(2) {
        max_increase = max_increase.max(pair[1] - pair[0]);
    }
    Ok(vec![
        Check::le("tube-mass increase across scales", max_increase, ctx.bound("tube-mass increase across scales", 1e-12)),
        Check::le("tube mass at the finest scale", *curve.last().unwrap(), ctx.bound("tube mass at the finest scale", 0.01)),
    ])
}

fn closedness(ctx: &mut SuiteContext) -> Result<Vec<Check>, String> {
    let mut seq: Vec<MeasureField> = [4usize, 8, 16, 32, 64, 128]
        .iter()
        .map(|&n| oscillating_field(n).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    seq.push(gamma_one_proxy(256).map_err(|e| e.to_string())?);
    let full_line = |_: &[f64]| vec![vec![1.0]];
    let report = closedness_regression(&seq, full_line).map_err(|e| e.to_string())?;
    let zero_section = |_: &[f64]| Vec::<Vec<f64>>::new();
    let tangent = closedness_regression(&seq, zero_section).map_err(|e| e.to_string())?;
    let mut csv = String::from("index,graph_defect,bundle_gap\n");
    for (i, d) in report.defects.iter().enumerate() {
        let gap = if i < report.bundle_gaps.len() {
            fmt17(report.bundle_gaps[i])
        } else {
            String::new()
        };
        csv.push_str(&format!("{i},{},{gap}\n", fmt17(*d)));
    }
    ctx.write_csv("closedness.csv", &csv)?;
    Ok(vec![
        Check::le(
            "limit graph defect − max sequence defect",
            report.final_defect - report.max_defect,
            ctx.bound("limit graph defect − max sequence defect", 1e-8),
        ),
        Check::le(
            "limit barycenter norm",
            report.final_centred_defect,
            ctx.bound("limit barycenter norm", 1e-12),
        ),
        Check::ge(
            "limit tangent-graph defect (solenoidal, not tangent)",
            tangent.final_defect,
            ctx.bound("limit tangent-graph defect (solenoidal, not tangent)", 0.5),
        ),
    ])
}

/// Minimal self-check used by `verify` smoke paths: barycenter of a frame
/// field vanishes and section estimation round-trips.
pub fn smoke() -> Result<(), String> {
    let mu = make_measure(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5])
        .map_err(|e| e.to_string())?;
    let f = VectorFieldOnBase::constant(vec![0.0, 1.0], 2);
    let g = gamma_of(&f, &mu).map_err(|e| e.to_string())?;
    if barycenter(&g).max_norm() != 0.0 {
        return Err("frame field is not centred".into());
    }
    let est = estimate_section(&[g], 1e-6).map_err(|e| e.to_string())?;
    if est.dim_at(0) != 1 {
        return Err("section estimation failed".into());
    }
    Ok(())
}

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, String> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("reading {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))
        }
    }
}
