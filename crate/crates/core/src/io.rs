//! JSON descriptors and CSV exports.
//!
//! Measures round-trip losslessly: floats are printed with the shortest
//! representation that parses back to the same bit pattern, and CSV values
//! use 17 significant digits.

use crate::cones::GrassmannSection;
use crate::dc::DcChartDesc;
use crate::fields::{FiberMeasure, MeasureField};
use crate::measures::{ac_grid, make_measure, sample_dc_curve, DiscreteMeasure};
use crate::ot::{PotentialTable, TransportPlan};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Formats one value with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `{dim, points, weights}` measure descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDesc {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MeasureDesc {
    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        MeasureDesc {
            dim: mu.dim,
            points: mu.points.iter().map(|p| p.coords.clone()).collect(),
            weights: mu.weights.clone(),
        }
    }

    pub fn build(&self) -> Result<DiscreteMeasure> {
        let mu = make_measure(self.points.clone(), self.weights.clone())?;
        if mu.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: mu.dim,
            });
        }
        Ok(mu)
    }
}

/// Generator descriptors for structured measures.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorDesc {
    Atoms {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    DcCurve {
        chart: DcChartDesc,
        n: usize,
        window: Vec<(f64, f64)>,
    },
    AcGrid {
        bounds: Vec<(f64, f64)>,
        counts: Vec<usize>,
    },
}

impl GeneratorDesc {
    pub fn build(&self) -> Result<DiscreteMeasure> {
        match self {
            GeneratorDesc::Atoms { points, weights } => {
                make_measure(points.clone(), weights.clone())
            }
            GeneratorDesc::DcCurve { chart, n, window } => {
                sample_dc_curve(&chart.build()?, *n, window)
            }
            GeneratorDesc::AcGrid { bounds, counts } => ac_grid(bounds, counts),
        }
    }
}

/// `{base, fibers}` field descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDesc {
    pub base: MeasureDesc,
    pub fibers: Vec<FiberDesc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberDesc {
    pub velocities: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl FieldDesc {
    pub fn from_field(xi: &MeasureField) -> Self {
        FieldDesc {
            base: MeasureDesc::from_measure(&xi.base),
            fibers: xi
                .fibers
                .iter()
                .map(|f| FiberDesc {
                    velocities: f.velocities.clone(),
                    probs: f.probs.clone(),
                })
                .collect(),
        }
    }

    pub fn build(&self) -> Result<MeasureField> {
        let base = self.base.build()?;
        let fibers: Result<Vec<FiberMeasure>> = self
            .fibers
            .iter()
            .map(|f| FiberMeasure::new(f.velocities.clone(), f.probs.clone()))
            .collect();
        MeasureField::new(base, fibers?)
    }
}

/// `{base, basis}` Grassmannian-section descriptor: one orthonormal family
/// per base point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionDesc {
    pub base: MeasureDesc,
    pub basis: Vec<Vec<Vec<f64>>>,
}

impl SectionDesc {
    pub fn from_section(section: &GrassmannSection) -> Self {
        SectionDesc {
            base: MeasureDesc::from_measure(&section.base),
            basis: section.basis.clone(),
        }
    }

    pub fn build(&self) -> Result<GrassmannSection> {
        GrassmannSection::new(self.base.build()?, self.basis.clone())
    }
}

fn row(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(",")
}

/// Plan CSV: `i, j, mass, x…, y…`.
pub fn plan_csv(plan: &TransportPlan) -> String {
    let d = plan.source.dim;
    let mut out = String::new();
    let mut header = vec!["i".to_string(), "j".to_string(), "mass".to_string()];
    header.extend((0..d).map(|a| format!("x{a}")));
    header.extend((0..d).map(|a| format!("y{a}")));
    out.push_str(&row(header));
    out.push('\n');
    for &(i, j, m) in &plan.entries {
        let mut cells = vec![i.to_string(), j.to_string(), fmt17(m)];
        cells.extend(plan.source.points[i].coords.iter().map(|c| fmt17(*c)));
        cells.extend(plan.target.points[j].coords.iter().map(|c| fmt17(*c)));
        out.push_str(&row(cells));
        out.push('\n');
    }
    out
}

/// Potential CSV: `point…, value`.
pub fn potential_csv(queries: &[Vec<f64>], table: &PotentialTable) -> String {
    let d = queries.first().map(|q| q.len()).unwrap_or(0);
    let mut out = String::new();
    let mut header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    header.push("value".to_string());
    out.push_str(&row(header));
    out.push('\n');
    for (q, v) in queries.iter().zip(&table.values) {
        let mut cells: Vec<String> = q.iter().map(|c| fmt17(*c)).collect();
        cells.push(fmt17(*v));
        out.push_str(&row(cells));
        out.push('\n');
    }
    out
}

/// Field CSV: flattened atoms `x…, v…, weight`.
pub fn field_csv(xi: &MeasureField) -> String {
    let d = xi.base.dim;
    let mut out = String::new();
    let mut header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    header.extend((0..d).map(|a| format!("v{a}")));
    header.push("weight".to_string());
    out.push_str(&row(header));
    out.push('\n');
    for ((p, w), fiber) in xi.base.points.iter().zip(&xi.base.weights).zip(&xi.fibers) {
        for (v, q) in fiber.velocities.iter().zip(&fiber.probs) {
            let mut cells: Vec<String> = p.coords.iter().map(|c| fmt17(*c)).collect();
            cells.extend(v.iter().map(|c| fmt17(*c)));
            cells.push(fmt17(w * q));
            out.push_str(&row(cells));
            out.push('\n');
        }
    }
    out
}

/// Section CSV: `x…, dim, basis vectors flattened` (padded with zeros up to
/// `d` vectors).
pub fn section_csv(section: &GrassmannSection) -> String {
    let d = section.base.dim;
    let mut out = String::new();
    let mut header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    header.push("dim".to_string());
    for k in 0..d {
        header.extend((0..d).map(move |a| format!("b{k}_{a}")));
    }
    out.push_str(&row(header));
    out.push('\n');
    for (p, basis) in section.base.points.iter().zip(&section.basis) {
        let mut cells: Vec<String> = p.coords.iter().map(|c| fmt17(*c)).collect();
        cells.push(basis.len().to_string());
        for k in 0..d {
            match basis.get(k) {
                Some(v) => cells.extend(v.iter().map(|c| fmt17(*c))),
                None => cells.extend((0..d).map(|_| fmt17(0.0))),
            }
        }
        out.push_str(&row(cells));
        out.push('\n');
    }
    out
}

/// Classification CSV: `x…, k`.
pub fn classification_csv(mu: &DiscreteMeasure, classes: &[usize]) -> String {
    let d = mu.dim;
    let mut out = String::new();
    let mut header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    header.push("k".to_string());
    out.push_str(&row(header));
    out.push('\n');
    for (p, k) in mu.points.iter().zip(classes) {
        let mut cells: Vec<String> = p.coords.iter().map(|c| fmt17(*c)).collect();
        cells.push(k.to_string());
        out.push_str(&row(cells));
        out.push('\n');
    }
    out
}

/// Two-column CSV for decay/concentration curves.
pub fn curve_csv(name_x: &str, name_y: &str, rows: &[(f64, f64)]) -> String {
    let mut out = format!("{name_x},{name_y}\n");
    for (x, y) in rows {
        out.push_str(&format!("{},{}\n", fmt17(*x), fmt17(*y)));
    }
    out
}
