//! Reproducible experiment runner for the wcone library: generates fixture
//! measures, runs exact transport and fiber-geometry queries, executes the
//! named verification suites, and renders CSV reports as SVG plots.
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 on
//! invalid configuration or input.

mod plot;
mod suites;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use wcone::io::{
    classification_csv, fmt17, plan_csv, FieldDesc, GeneratorDesc, MeasureDesc, SectionDesc,
};

#[derive(Parser)]
#[command(name = "wcone", version, about = "Fiber-wise Wasserstein geometry laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Builds a measure from a generator descriptor and writes its JSON.
    Gen {
        /// Generator descriptor JSON ({"type": "atoms"|"dc_curve"|"ac_grid", …}).
        #[arg(long)]
        descriptor: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solves exact optimal transport between two measures.
    Ot {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Optional CSV output of the optimal plan.
        #[arg(long)]
        plan_out: Option<PathBuf>,
    },
    /// Metric scalar product of two same-base fields.
    Dot {
        #[arg(long)]
        xi: PathBuf,
        #[arg(long)]
        zeta: PathBuf,
    },
    /// Fiber-wise distance of two same-base fields.
    Wmu {
        #[arg(long)]
        xi: PathBuf,
        #[arg(long)]
        zeta: PathBuf,
    },
    /// Metric projection of a centred field onto a section cone.
    Project {
        #[arg(long)]
        xi: PathBuf,
        #[arg(long)]
        section: PathBuf,
        #[arg(long)]
        proj_out: PathBuf,
        #[arg(long)]
        residual_out: PathBuf,
    },
    /// Classifies a measure by the pointwise dimension of a section.
    Decompose {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        section: PathBuf,
        /// Classification CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Preiss blow-up concentration curve around a support point.
    Blowup {
        #[arg(long)]
        mu: PathBuf,
        /// Center coordinates, comma separated.
        #[arg(long)]
        center: String,
        /// Scales, comma separated (e.g. "0.5,0.25,0.125").
        #[arg(long)]
        scales: String,
        #[arg(long, default_value_t = 1.0)]
        window: f64,
        /// Plane direction(s), comma separated per vector, ';' between
        /// vectors.
        #[arg(long)]
        plane: String,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a named verification suite (or "all") and writes manifests.
    Verify {
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Renders a CSV report as a deterministic SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        /// "arrows" or "curve".
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("parsing {}: {e}", path.display()))
}

fn write_text(path: &PathBuf, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn parse_floats(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Gen { descriptor, out } => {
            let desc: GeneratorDesc = read_json(&descriptor)?;
            let mu = desc.build().map_err(|e| e.to_string())?;
            write_text(
                &out,
                &serde_json::to_string_pretty(&MeasureDesc::from_measure(&mu)).unwrap(),
            )?;
            println!("wrote {} ({} points)", out.display(), mu.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Ot { mu, nu, plan_out } => {
            let mu = read_json::<MeasureDesc>(&mu)?.build().map_err(|e| e.to_string())?;
            let nu = read_json::<MeasureDesc>(&nu)?.build().map_err(|e| e.to_string())?;
            let sol = wcone::ot::solve_ot(&mu, &nu).map_err(|e| e.to_string())?;
            println!("cost {}", fmt17(sol.cost));
            println!("wasserstein {}", fmt17(sol.cost.max(0.0).sqrt()));
            if let Some(path) = plan_out {
                write_text(&path, &plan_csv(&sol.plan))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Dot { xi, zeta } => {
            let xi = read_json::<FieldDesc>(&xi)?.build().map_err(|e| e.to_string())?;
            let zeta = read_json::<FieldDesc>(&zeta)?.build().map_err(|e| e.to_string())?;
            let value = wcone::fiber_geometry::metric_dot(&xi, &zeta).map_err(|e| e.to_string())?;
            println!("{}", fmt17(value));
            Ok(ExitCode::SUCCESS)
        }
        Command::Wmu { xi, zeta } => {
            let xi = read_json::<FieldDesc>(&xi)?.build().map_err(|e| e.to_string())?;
            let zeta = read_json::<FieldDesc>(&zeta)?.build().map_err(|e| e.to_string())?;
            let (value, _) = wcone::fiber_geometry::w_mu(&xi, &zeta).map_err(|e| e.to_string())?;
            println!("{}", fmt17(value));
            Ok(ExitCode::SUCCESS)
        }
        Command::Project {
            xi,
            section,
            proj_out,
            residual_out,
        } => {
            let xi = read_json::<FieldDesc>(&xi)?.build().map_err(|e| e.to_string())?;
            let section = read_json::<SectionDesc>(&section)?
                .build()
                .map_err(|e| e.to_string())?;
            let (proj, residual) = wcone::cones::project_onto_section_cone(&xi, &section)
                .map_err(|e| e.to_string())?;
            write_text(
                &proj_out,
                &serde_json::to_string_pretty(&FieldDesc::from_field(&proj)).unwrap(),
            )?;
            write_text(
                &residual_out,
                &serde_json::to_string_pretty(&FieldDesc::from_field(&residual)).unwrap(),
            )?;
            println!(
                "norms: field {} projection {} residual {}",
                fmt17(wcone::fiber_geometry::norm_mu(&xi)),
                fmt17(wcone::fiber_geometry::norm_mu(&proj)),
                fmt17(wcone::fiber_geometry::norm_mu(&residual))
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Decompose { mu, section, out } => {
            let mu = read_json::<MeasureDesc>(&mu)?.build().map_err(|e| e.to_string())?;
            let section = read_json::<SectionDesc>(&section)?
                .build()
                .map_err(|e| e.to_string())?;
            let result = wcone::decomposition::decompose(&mu, &section).map_err(|e| e.to_string())?;
            for (k, m) in result.masses.iter().enumerate() {
                println!("m_{k} = {}", fmt17(*m));
            }
            if let Some(path) = out {
                write_text(&path, &classification_csv(&mu, &result.classification))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Blowup {
            mu,
            center,
            scales,
            window,
            plane,
            eps,
            radius,
            out,
        } => {
            let mu = read_json::<MeasureDesc>(&mu)?.build().map_err(|e| e.to_string())?;
            let center = parse_floats(&center)?;
            let scales = parse_floats(&scales)?;
            let plane: Result<Vec<Vec<f64>>, String> =
                plane.split(';').map(parse_floats).collect();
            let plane = wcone::numeric::orthonormalize(&plane?, 1e-9);
            let res = wcone::decomposition::preiss_blowup(&mu, &center, &scales, window)
                .map_err(|e| e.to_string())?;
            let curve = res.concentration_curve(&plane, eps, radius);
            let mut csv = String::from("h,tube_mass\n");
            for (h, t) in scales.iter().zip(&curve) {
                println!("h = {} tube_mass = {}", fmt17(*h), fmt17(*t));
                csv.push_str(&format!("{},{}\n", fmt17(*h), fmt17(*t)));
            }
            if let Some(path) = out {
                write_text(&path, &csv)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, config } => {
            let config = suites::load_config(config.as_deref())?;
            suites::smoke()?;
            let manifests = suites::run(&suite, config)?;
            let mut all_pass = true;
            for m in &manifests {
                for c in &m.checks {
                    let status = if c.pass { "pass" } else { "FAIL" };
                    println!(
                        "[{status}] {}: {} = {} ({} {})",
                        m.suite,
                        c.name,
                        fmt17(c.measured),
                        c.cmp,
                        fmt17(c.bound)
                    );
                }
                all_pass &= m.pass;
            }
            if all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Plot { input, kind, out } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| format!("reading {}: {e}", input.display()))?;
            let svg = match kind.as_str() {
                "arrows" => plot::arrows(&text)?,
                "curve" => plot::curve(&text)?,
                other => return Err(format!("unknown plot kind '{other}'")),
            };
            write_text(&out, &svg)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
