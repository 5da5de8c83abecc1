//! Command drivers. Each command turns a validated config into named output
//! files; `write_outputs` puts them on disk atomically.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dynamics::{apply_shift, apply_shift_inverse};
use crate::error::{Error, Result};
use crate::filtration::{classify_point, orbit_verdict, RegionLabel, Verdict};
use crate::hyperbolicity::cones::PASS_TARGET;
use crate::hyperbolicity::{
    build_plane_cover, certify_cones, classify_hyperbolic, divergence_threshold, eta_divergence_test, julia_candidates,
    julia_cloud_1d, partition_julia, search_cone_constants, ConeParams, PlaneBox, PlaneCover,
};
use crate::measures::{default_test_set, degeneration_sweep, MeasureCloud, Provenance, SweepConfig};
use crate::potential::{escape_radius, green_minus, green_plus};
use crate::render::{colormap, encode_png, green_scale, UNDETERMINED};
use crate::types::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Iterate,
    Slice,
    Degenerate,
    Certify,
    Partition,
    Hyperbolic1d,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Iterate => "iterate",
            Command::Slice => "slice",
            Command::Degenerate => "degenerate",
            Command::Certify => "certify",
            Command::Partition => "partition",
            Command::Hyperbolic1d => "hyperbolic1d",
        })
    }
}

/// A file a command produces, named relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        2
    } else {
        3
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

/// One-line JSON error body for stderr.
pub fn error_json(err: &Error) -> String {
    serde_json::to_string(&ErrorBody {
        error: err.kind(),
        message: err.to_string(),
        exit_code: exit_code(err),
    })
    .expect("error body serializes")
}

fn io(e: impl fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Writes each output to a temporary file in `dir` and renames it into place.
pub fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io)?;
    for out in outputs {
        let target = dir.join(&out.name);
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(&out.bytes).map_err(io)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644)).map_err(io)?;
        }
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&target).map_err(io)?;
    }
    Ok(())
}

fn json<T: Serialize>(name: &str, value: &T) -> Result<Output> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(io)?;
    bytes.push(b'\n');
    Ok(Output {
        name: name.into(),
        bytes,
    })
}

/// RFC-4180 CSV from a header and string rows.
fn csv_output(name: &str, header: &[String], rows: &[Vec<String>]) -> Result<Output> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    Ok(Output {
        name: name.into(),
        bytes: w.into_inner().map_err(io)?,
    })
}

fn coord_header(k: usize) -> Vec<String> {
    (1..=k).flat_map(|i| [format!("z{i}_re"), format!("z{i}_im")]).collect()
}

/// Shortest round-trip form, switching to exponent notation at extremes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn coord_cells(z: &Point) -> Vec<String> {
    z.iter().flat_map(|c| [num(c.re), num(c.im)]).collect()
}

fn region_name(l: RegionLabel) -> String {
    match l {
        RegionLabel::Inner => "Inner".into(),
        RegionLabel::PlusCone(i) => format!("PlusCone({i})"),
        RegionLabel::MinusCone(i) => format!("MinusCone({i})"),
    }
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Vec<Output>> {
    match cmd {
        Command::Iterate => cmd_iterate(cfg),
        Command::Slice => cmd_slice(cfg),
        Command::Degenerate => cmd_degenerate(cfg),
        Command::Certify => cmd_certify(cfg),
        Command::Partition => cmd_partition(cfg),
        Command::Hyperbolic1d => cmd_hyperbolic1d(cfg),
    }
}

/// Orbit rows `step, z1_re, z1_im, ..., label` up to `steps`, stopping early
/// once the orbit leaves the finite range.
pub fn cmd_iterate(cfg: &RunConfig) -> Result<Vec<Output>> {
    let s = &cfg.shift;
    let steps = cfg.usize_or("steps", 20)?;
    let r = cfg.f64_or("radius", escape_radius(s))?;
    let backward = match cfg.raw("direction").unwrap_or("forward") {
        "forward" => false,
        "backward" => true,
        other => return Err(Error::InvalidParameter(format!("direction = {other:?}: expected forward or backward"))),
    };
    let mut z = cfg.point_or_origin("point")?;
    let mut header = vec!["step".to_string()];
    header.extend(coord_header(s.k));
    header.push("label".into());
    let mut rows = Vec::new();
    for n in 0..=steps {
        let mut row = vec![if backward { format!("-{n}") } else { n.to_string() }];
        row.extend(coord_cells(&z));
        row.push(region_name(classify_point(s, r, &z)));
        rows.push(row);
        if n == steps {
            break;
        }
        z = match if backward { apply_shift_inverse(s, &z) } else { apply_shift(s, &z) } {
            Ok(w) if w.is_finite() => w,
            _ => break,
        };
    }
    rows[0][0] = "0".into();
    Ok(vec![csv_output("orbit.csv", &header, &rows)?])
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Bounded => "bounded",
        Verdict::Escaping(_) => "escaping",
        Verdict::Undetermined => "undetermined",
    }
}

/// Grid over two free coordinates (1-based `slice_x`, `slice_y`) added to
/// the base `point`; real offsets in each, or the complex plane of one
/// coordinate when both indices agree. Row 0 of the image is the top edge.
pub fn cmd_slice(cfg: &RunConfig) -> Result<Vec<Output>> {
    let s = &cfg.shift;
    if s.a.norm() == 0.0 {
        return Err(Error::NonInvertible(0.0));
    }
    let k = s.k;
    let (ix, iy) = (cfg.usize_or("slice_x", 1)?, cfg.usize_or("slice_y", 2)?);
    if !(1..=k).contains(&ix) || !(1..=k).contains(&iy) {
        return Err(Error::InvalidParameter(format!("slice indices must lie in 1..={k}")));
    }
    let bx = cfg.f64_list_or("box", &[-2.0, 2.0, -2.0, 2.0])?;
    if bx.len() != 4 || !(bx[0] < bx[1] && bx[2] < bx[3]) {
        return Err(Error::InvalidParameter("box = x0,x1,y0,y1 with x0 < x1 and y0 < y1".into()));
    }
    let (width, height) = (cfg.usize_or("width", 64)?, cfg.usize_or("height", 64)?);
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("width and height must be positive".into()));
    }
    let level = cfg.usize_or("green_level", 25)?;
    let horizon = cfg.usize_or("horizon", 50)?;
    let base = cfg.point_or_origin("point")?;
    let r = escape_radius(s);
    let cell = |gx: usize, gy: usize| -> Point {
        let x = bx[0] + (gx as f64 + 0.5) * (bx[1] - bx[0]) / width as f64;
        let y = bx[2] + (gy as f64 + 0.5) * (bx[3] - bx[2]) / height as f64;
        let mut z = base.clone();
        if ix == iy {
            z[ix - 1] += Complex64::new(x, y);
        } else {
            z[ix - 1] += x;
            z[iy - 1] += y;
        }
        z
    };
    use rayon::prelude::*;
    let values: Vec<(f64, f64, Verdict)> = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let z = cell(i % width, i / width);
            let gp = green_plus(s, &z, level)?.value;
            let gm = green_minus(s, &z, level)?.value;
            Ok((gp, gm, orbit_verdict(s, r, &z, horizon).verdict))
        })
        .collect::<Result<_>>()?;
    let header: Vec<String> = ["x_index", "y_index", "g_plus", "g_minus", "verdict"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = values
        .iter()
        .enumerate()
        .map(|(i, (gp, gm, v))| {
            vec![
                (i % width).to_string(),
                (i / width).to_string(),
                num(*gp),
                num(*gm),
                verdict_name(*v).into(),
            ]
        })
        .collect();
    let mut pixels = Vec::with_capacity(width * height);
    for row in (0..height).rev() {
        for col in 0..width {
            let (gp, gm, v) = values[row * width + col];
            pixels.push(match v {
                Verdict::Undetermined => UNDETERMINED,
                _ => colormap(green_scale(gp.min(gm))),
            });
        }
    }
    Ok(vec![
        csv_output("slice.csv", &header, &rows)?,
        Output {
            name: "slice.png".into(),
            bytes: encode_png(width, height, &pixels)?,
        },
    ])
}

/// Degeneration sweep of the configured `p, k, nu` over `a_list`.
pub fn cmd_degenerate(cfg: &RunConfig) -> Result<Vec<Output>> {
    let s = &cfg.shift;
    let a_list = cfg.f64_list_or("a_list", &[0.1, 0.05, 0.01])?;
    let mut sc = SweepConfig::new(&s.p, s.k, s.nu);
    sc.count = cfg.usize_or("count", sc.count)?;
    sc.burn_in = cfg.usize_or("burn_in", sc.burn_in)?;
    sc.green_level = cfg.usize_or("green_level", sc.green_level)?;
    sc.lyapunov_n = cfg.usize_or("lyapunov_n", sc.lyapunov_n)?;
    sc.seed = cfg.seed()?;
    if let Some(size) = cfg.raw("test_set_size") {
        let size = size
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("test_set_size = {size:?}: expected an integer")))?;
        sc.test_set = default_test_set(&s.p, s.k, s.nu, size);
    }
    let rows = degeneration_sweep(&s.p, s.k, s.nu, &a_list, &sc)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(io)?;
    }
    Ok(vec![Output {
        name: "sweep.csv".into(),
        bytes: w.into_inner().map_err(io)?,
    }])
}

/// Julia cover of `p` and per-label Julia candidates shared by `certify`
/// and `partition`.
fn cover_and_candidates(cfg: &RunConfig) -> Result<(PlaneCover, Vec<Point>)> {
    let s = &cfg.shift;
    let seed = cfg.seed()?;
    let cloud = julia_cloud_1d(&s.p, cfg.usize_or("cloud_size", 20_000)?, seed)?;
    let half = cfg.f64_or("cover_half", s.p.coefficient_bound() + 0.5)?;
    let cover = build_plane_cover(
        &s.p,
        &cloud,
        cfg.f64_or("cover_eps", 0.05)?,
        PlaneBox::square(half),
        cfg.f64_or("cover_h", 0.01)?,
    )?;
    let cycles = classify_hyperbolic(&s.p, 500, 1e-9)?.attracting_cycles;
    let per = cfg.usize_or("per_label", 300)?;
    let burn_in = cfg.usize_or("burn_in", 40)?;
    let points = julia_candidates(s, &cycles, per, burn_in, seed)?
        .into_iter()
        .flat_map(|(_, c)| c.points)
        .collect();
    Ok((cover, points))
}

pub fn cmd_certify(cfg: &RunConfig) -> Result<Vec<Output>> {
    let s = &cfg.shift;
    let (cover, points) = cover_and_candidates(cfg)?;
    let d = ConeParams::default();
    let params = ConeParams {
        rho1: cfg.f64_or("rho1", d.rho1)?,
        n_blocks: cfg.usize_or("n_blocks", d.n_blocks)?,
        lambda: cfg.f64_or("lambda", d.lambda)?,
    };
    let report = if cfg.bool_or("search", true)? {
        search_cone_constants(s, &cover, &points, params, PASS_TARGET)?
    } else {
        certify_cones(s, &cover, &points, params)?
    };
    Ok(vec![json("cone_report.json", &report)?])
}

pub fn cmd_partition(cfg: &RunConfig) -> Result<Vec<Output>> {
    let s = &cfg.shift;
    let (cover, points) = cover_and_candidates(cfg)?;
    let part = partition_julia(s, &cover, &MeasureCloud::uniform(points, Provenance::Shadowing))?;
    let mut header: Vec<String> = ["index", "label", "group", "violation", "limit_clusters"].map(String::from).to_vec();
    header.extend(coord_header(s.k));
    let rows: Vec<Vec<String>> = part
        .points
        .iter()
        .enumerate()
        .map(|(i, lp)| {
            let mut row = vec![
                i.to_string(),
                lp.label.to_string(),
                lp.group.map_or(String::new(), |g| g.to_string()),
                lp.violation.to_string(),
                lp.limit_clusters.to_string(),
            ];
            row.extend(coord_cells(&lp.point));
            row
        })
        .collect();
    Ok(vec![
        csv_output("partition.csv", &header, &rows)?,
        json("partition.json", &part.report)?,
    ])
}

#[derive(Serialize)]
struct Hyperbolic1dReport {
    verdict: crate::hyperbolicity::HyperbolicityVerdict1D,
    eta: f64,
    divergence: Option<crate::hyperbolicity::DivergenceOutcome>,
    threshold: Option<f64>,
}

/// Hyperbolicity verdict for `p`; when `J_p` is connected and `p` is
/// hyperbolic, also the perturbed divergence test from a circle of starts
/// outside `K_p` and the bisected adversarial threshold.
pub fn cmd_hyperbolic1d(cfg: &RunConfig) -> Result<Vec<Output>> {
    let p = &cfg.shift.p;
    let horizon = cfg.usize_or("horizon", 500)?;
    let verdict = classify_hyperbolic(p, horizon, cfg.f64_or("tol", 1e-9)?)?;
    let eta = cfg.f64_or("eta", 0.05)?;
    let (divergence, threshold) = if verdict.is_hyperbolic && verdict.connected_julia {
        let n = cfg.usize_or("starts", 100)?;
        let radius = cfg.f64_or("start_radius", p.coefficient_bound() + 0.5)?;
        let starts: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(radius, std::f64::consts::TAU * j as f64 / n.max(1) as f64))
            .collect();
        let steps = cfg.usize_or("steps", 200)?;
        let out = eta_divergence_test(p, eta, &starts, cfg.usize_or("sequences", 1000)?, steps, cfg.seed()?);
        let th = divergence_threshold(p, &starts, steps, cfg.f64_or("eta_max", 1.0)?, cfg.usize_or("bisection_steps", 30)?);
        (Some(out), Some(th))
    } else {
        (None, None)
    };
    Ok(vec![json(
        "hyperbolic1d.json",
        &Hyperbolic1dReport {
            verdict,
            eta,
            divergence,
            threshold,
        },
    )?])
}
