//! Deterministic SVG plots from CSV reports: arrow plots of classified
//! supports with their section directions, and log-log decay curves.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

const CLASS_COLORS: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or("empty CSV")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| format!("row {}: {e}", idx + 2))?;
        if row.len() != header.len() {
            return Err(format!("row {} has {} cells, expected {}", idx + 2, row.len(), header.len()));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("CSV has no data rows".into());
    }
    Ok((header, rows))
}

fn svg_open(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
}

fn f(x: f64) -> String {
    format!("{x:.3}")
}

/// Arrow plot: expects columns `x0, x1, k` and optionally `d0, d1` for the
/// section direction at each point.
pub fn arrows(csv_text: &str) -> Result<String, String> {
    let (header, rows) = parse_csv(csv_text)?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let (cx, cy, ck) = match (col("x0"), col("x1"), col("k")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err("arrow plot needs columns x0, x1, k".into()),
    };
    let dir = match (col("d0"), col("d1")) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &rows {
        lo_x = lo_x.min(r[cx]);
        hi_x = hi_x.max(r[cx]);
        lo_y = lo_y.min(r[cy]);
        hi_y = hi_y.max(r[cy]);
    }
    let pad_x = 0.05 * (hi_x - lo_x).max(1e-9);
    let pad_y = 0.05 * (hi_y - lo_y).max(1e-9);
    lo_x -= pad_x;
    hi_x += pad_x;
    lo_y -= pad_y;
    hi_y += pad_y;
    let sx = (WIDTH - 2.0 * MARGIN) / (hi_x - lo_x);
    let sy = (HEIGHT - 2.0 * MARGIN) / (hi_y - lo_y);
    let to_px = |x: f64, y: f64| {
        (
            MARGIN + (x - lo_x) * sx,
            HEIGHT - MARGIN - (y - lo_y) * sy,
        )
    };
    let mut out = String::new();
    svg_open(&mut out);
    let arrow_len = 14.0;
    for r in &rows {
        let (px, py) = to_px(r[cx], r[cy]);
        let k = r[ck] as usize;
        let color = CLASS_COLORS[k.min(CLASS_COLORS.len() - 1)];
        if let Some((d0, d1)) = dir {
            let n = (r[d0] * r[d0] + r[d1] * r[d1]).sqrt();
            if n > 1e-9 {
                let ux = r[d0] / n * arrow_len;
                let uy = -r[d1] / n * arrow_len;
                let _ = writeln!(
                    out,
                    r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="1.2"/>"#,
                    f(px - ux),
                    f(py - uy),
                    f(px + ux),
                    f(py + uy)
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="2.4" fill="{color}"/>"#,
            f(px),
            f(py)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Log-log decay curve: expects a two-column CSV (abscissa, value); zero or
/// negative values are dropped from the log plot.
pub fn curve(csv_text: &str) -> Result<String, String> {
    let (header, rows) = parse_csv(csv_text)?;
    if header.len() < 2 {
        return Err("curve plot needs two columns".into());
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r[0] > 0.0 && r[1].abs() > 0.0)
        .map(|r| (r[0].log10(), r[1].abs().log10()))
        .collect();
    if pts.is_empty() {
        return Err("no positive data to draw on log axes".into());
    }
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        lo_x = lo_x.min(x);
        hi_x = hi_x.max(x);
        lo_y = lo_y.min(y);
        hi_y = hi_y.max(y);
    }
    if hi_x - lo_x < 1e-9 {
        hi_x = lo_x + 1.0;
    }
    if hi_y - lo_y < 1e-9 {
        hi_y = lo_y + 1.0;
    }
    let sx = (WIDTH - 2.0 * MARGIN) / (hi_x - lo_x);
    let sy = (HEIGHT - 2.0 * MARGIN) / (hi_y - lo_y);
    let to_px = |x: f64, y: f64| {
        (
            MARGIN + (x - lo_x) * sx,
            HEIGHT - MARGIN - (y - lo_y) * sy,
        )
    };
    let mut out = String::new();
    svg_open(&mut out);
    // Axes.
    let _ = writeln!(
        out,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = f(MARGIN),
        b = f(HEIGHT - MARGIN),
        r = f(WIDTH - MARGIN),
        t = f(MARGIN)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12">log10 {}</text>"#,
        f(WIDTH / 2.0),
        f(HEIGHT - 12.0),
        header[0]
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})">log10 {}</text>"#,
        f(HEIGHT / 2.0),
        f(HEIGHT / 2.0),
        header[1]
    );
    let path: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (px, py) = to_px(x, y);
            format!("{},{}", f(px), f(py))
        })
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.6"/>"##,
        path.join(" ")
    );
    for &(x, y) in &pts {
        let (px, py) = to_px(x, y);
        let _ = writeln!(
            out,
            r##"<circle cx="{}" cy="{}" r="2.6" fill="#1f77b4"/>"##,
            f(px),
            f(py)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
