use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use cejulia::dimension::{minkowski_fit, porosity_bound};
use cejulia::julia::{holder_diagnostic, julia_occupancy, julia_points, JuliaMethod, FRAME_MARGIN};
use cejulia::porosity::{
    box_good, box_porosity_detect, build_planar, directional_scan, mean_good, mean_porosity_scan, sample_points,
    BoxPorosityResult, DyadicOccupancy, PlanarFrame,
};
use serde::Serialize;

use super::{fmt, header};
use crate::config::RunConfig;
use crate::formats::{read_pbm, read_points, write_pbm, write_points, Report};

/// Where a command gets its occupancy grid.
#[derive(Debug, Clone)]
pub enum OccupancySource {
    /// Inverse iteration on `--map` with this many points.
    Map { count: usize },
    /// A PBM bitmap, or a point list for any other extension.
    File(PathBuf),
}

impl OccupancySource {
    pub fn from_input(input: Option<PathBuf>, count: usize) -> Self {
        input.map_or(OccupancySource::Map { count }, OccupancySource::File)
    }

    fn describe(&self) -> String {
        match self {
            OccupancySource::Map { count } => format!("inverse iteration, {count} points"),
            OccupancySource::File(p) => p.display().to_string(),
        }
    }

    pub fn load(&self, cfg: &RunConfig) -> Result<DyadicOccupancy> {
        match self {
            OccupancySource::Map { count } => {
                let f = cfg.map()?;
                let sample = julia_points(&f, JuliaMethod::InverseIteration, *count, cfg.seed).map_err(|e| anyhow!("{e}"))?;
                Ok(julia_occupancy(&sample, cfg.depth).map_err(|e| anyhow!("{e}"))?)
            }
            OccupancySource::File(p) if p.extension().is_some_and(|e| e == "pbm") => read_pbm(p),
            OccupancySource::File(p) => {
                let pts = read_points(p)?;
                if pts.is_empty() {
                    bail!("{} holds no points", p.display());
                }
                let frame = PlanarFrame::fit(&pts, FRAME_MARGIN);
                Ok(build_planar(&pts, frame, cfg.depth).map_err(|e| anyhow!("{e}"))?)
            }
        }
    }
}

fn level_rows(rep: &mut Report, occ: &DyadicOccupancy) {
    for n in 0..=occ.depth() {
        rep.push(vec![n.to_string(), occ.count(n).to_string()]);
    }
}

#[derive(Debug, Clone)]
pub struct RenderArgs {
    pub count: usize,
    pub method: JuliaMethod,
    /// Defaults to `<out>/julia_points.txt`; `-` is stdout.
    pub points_path: Option<PathBuf>,
    /// Defaults to `<out>/occupancy.pbm`.
    pub pbm_path: Option<PathBuf>,
}

impl Default for RenderArgs {
    fn default() -> Self {
        RenderArgs { count: 200_000, method: JuliaMethod::InverseIteration, points_path: None, pbm_path: None }
    }
}

pub fn render(cfg: &RunConfig, args: &RenderArgs) -> Result<Report> {
    let f = cfg.map()?;
    let sample = julia_points(&f, args.method, args.count, cfg.seed).map_err(|e| anyhow!("{e}"))?;
    let occ = julia_occupancy(&sample, cfg.depth).map_err(|e| anyhow!("{e}"))?;
    let method = match args.method {
        JuliaMethod::InverseIteration => "inverse_iteration",
        JuliaMethod::EscapeBoundary => "escape_boundary",
    };
    let hdr = header(cfg, None, None, &[("method", method.into()), ("points", sample.points.len().to_string())]);
    let comments: Vec<String> = hdr.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    std::fs::create_dir_all(&cfg.out)?;
    let points_path = args.points_path.clone().unwrap_or_else(|| cfg.out.join("julia_points.txt"));
    let pbm_path = args.pbm_path.clone().unwrap_or_else(|| cfg.out.join("occupancy.pbm"));
    write_points(&points_path, &comments, &sample.finite_points())?;
    let mut pbm_comments = comments.clone();
    pbm_comments.push(format!("frame origin {:?} scale {}", occ.frame.origin, occ.frame.scale));
    write_pbm(&pbm_path, &occ, &pbm_comments)?;

    let mut rep = Report::new("render", hdr, &["level", "boxes"]);
    level_rows(&mut rep, &occ);
    rep.summary = serde_json::json!({
        "points": sample.points.len(),
        "finite_points": sample.finite_points().len(),
        "cells": occ.count(occ.depth()),
        "frame": occ.frame,
        "points_file": points_path,
        "pbm_file": pbm_path,
    });
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PorosityMode {
    Mean,
    Directional,
    Box,
}

#[derive(Debug, Clone)]
pub struct PorosityArgs {
    pub mode: PorosityMode,
    pub source: OccupancySource,
    /// Scan points drawn from the occupied finest cells.
    pub points: usize,
    pub p2: f64,
    pub alpha: f64,
    /// Box porosity `N`; scanned over `1..=6` when absent.
    pub big_n: Option<u32>,
}

impl Default for PorosityArgs {
    fn default() -> Self {
        PorosityArgs {
            mode: PorosityMode::Box,
            source: OccupancySource::Map { count: 200_000 },
            points: 400,
            p2: 0.125,
            alpha: 0.25,
            big_n: None,
        }
    }
}

/// First `N` in `1..=6` (or the given one) at which every point is box
/// porous.
pub fn detect_box_porosity(occ: &DyadicOccupancy, pts: &[Vec<f64>], big_n: Option<u32>) -> Result<Option<BoxPorosityResult>> {
    let range = big_n.map_or(1..=6, |n| n..=n);
    let mut last = None;
    for n in range {
        if n >= occ.depth() {
            break;
        }
        let res = box_porosity_detect(occ, pts, n, occ.depth() - n).map_err(|e| anyhow!("{e}"))?;
        if res.feasible {
            return Ok(Some(res));
        }
        last = Some(res);
    }
    Ok(if big_n.is_some() { last } else { None })
}

/// Box-good scales that are not mean-good at `p2 = 2^{-N-2}`.
pub fn box_mean_exceptions(occ: &DyadicOccupancy, pts: &[Vec<f64>], big_n: u32) -> Vec<(usize, u32)> {
    let p2 = 0.5f64.powi(big_n as i32 + 2);
    let top = occ.depth().saturating_sub(big_n + 3);
    let mut out = Vec::new();
    for (i, z) in pts.iter().enumerate() {
        for n in 1..=top {
            if box_good(occ, z, n, big_n) && !mean_good(occ, z, n, p2) {
                out.push((i, n));
            }
        }
    }
    out
}

pub fn porosity(cfg: &RunConfig, args: &PorosityArgs) -> Result<Report> {
    let occ = args.source.load(cfg)?;
    let pts = sample_points(&occ, args.points);
    let depth = occ.depth();
    let source = ("source", args.source.describe());
    let columns = ["point", "u", "v", "good_scales", "density", "ratio"];
    let mut rep;
    let per_point = match args.mode {
        PorosityMode::Mean => {
            let need = (1.0 / args.p2).log2().ceil() as u32 + 1;
            if depth <= need {
                bail!("depth {depth} too small for p2 = {}", args.p2);
            }
            let res = mean_porosity_scan(&occ, &pts, args.p2, depth - need).map_err(|e| anyhow!("{e}"))?;
            rep = Report::new("porosity", header(cfg, None, None, &[source, ("mode", "mean".into())]), &columns);
            rep.summary = serde_json::json!({
                "mode": "mean", "p1_hat": res.p1_hat, "p2": res.p2, "n_max": res.n_max,
                "feasible": res.feasible, "points": pts.len(),
            });
            res.per_point
        }
        PorosityMode::Directional => {
            if depth < 5 {
                bail!("depth {depth} too small for a directional scan");
            }
            let res = directional_scan(&occ, &pts, args.alpha, depth - 4).map_err(|e| anyhow!("{e}"))?;
            rep = Report::new("porosity", header(cfg, None, Some(res.p_hat), &[source, ("mode", "directional".into())]), &columns);
            rep.summary = serde_json::json!({
                "mode": "directional", "alpha": res.alpha, "beta_hat": res.beta_hat, "beta_floor": res.beta_floor,
                "p_hat": res.p_hat, "resolution_limited": res.resolution_limited, "n_max": res.n_max, "points": pts.len(),
            });
            res.per_point
        }
        PorosityMode::Box => {
            let res = detect_box_porosity(&occ, &pts, args.big_n)?;
            let (n, p) = res.as_ref().map_or((None, None), |r| (Some(r.n), Some(r.p_hat)));
            rep = Report::new("porosity", header(cfg, n, p, &[source, ("mode", "box".into())]), &columns);
            let exceptions = n.map(|n| box_mean_exceptions(&occ, &pts, n)).unwrap_or_default();
            for (i, s) in &exceptions {
                rep.violations.push(format!("point {i}: box porous at scale {s} but not mean porous at 2^-(N+2)"));
            }
            if res.is_none() {
                rep.warnings.push("no N in 1..=6 makes every point box porous".into());
            }
            rep.summary = serde_json::json!({
                "mode": "box", "N": n, "p_hat": p, "feasible": res.as_ref().is_some_and(|r| r.feasible),
                "implication_exceptions": exceptions.len(), "points": pts.len(),
            });
            res.map(|r| r.per_point).unwrap_or_default()
        }
    };
    for pp in &per_point {
        let z = &pts[pp.index];
        let scales: Vec<String> = pp.good_scales.iter().map(|s| s.to_string()).collect();
        rep.push(vec![pp.index.to_string(), fmt(z[0]), fmt(z[1]), scales.join(";"), fmt(pp.density), fmt(pp.ratio())]);
    }
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct DimensionArgs {
    pub source: OccupancySource,
    pub n_min: Option<u32>,
    pub n_max: Option<u32>,
    pub points: usize,
    /// Slack in the verdict `slope <= bound + tolerance`.
    pub tolerance: f64,
}

impl Default for DimensionArgs {
    fn default() -> Self {
        DimensionArgs { source: OccupancySource::Map { count: 200_000 }, n_min: None, n_max: None, points: 400, tolerance: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub range: (u32, u32),
    pub notice: Option<String>,
    pub big_n: Option<u32>,
    pub p_hat: Option<f64>,
    pub alpha: Option<f64>,
    pub bound: Option<f64>,
    pub consistent: Option<bool>,
}

pub fn dimension(cfg: &RunConfig, args: &DimensionArgs) -> Result<Report> {
    let occ = args.source.load(cfg)?;
    let depth = occ.depth();
    let n_max = args.n_max.unwrap_or(depth);
    let n_min = args.n_min.unwrap_or(4.min(n_max.saturating_sub(1)));
    let fit = minkowski_fit(&occ, n_min, n_max).map_err(|e| anyhow!("{e}"))?;
    let pts = sample_points(&occ, args.points);
    let boxes = detect_box_porosity(&occ, &pts, None)?;
    let bound = match &boxes {
        Some(b) => Some(porosity_bound(2, b.n, b.p_hat).map_err(|e| anyhow!("{e}"))?),
        None => None,
    };
    let summary = DimensionSummary {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        range: fit.range,
        notice: fit.notice.clone(),
        big_n: boxes.as_ref().map(|b| b.n),
        p_hat: boxes.as_ref().map(|b| b.p_hat),
        alpha: bound.map(|b| b.0),
        bound: bound.map(|b| b.1),
        consistent: bound.map(|b| fit.slope <= b.1 + args.tolerance),
    };
    let mut rep = Report::new(
        "dimension",
        header(
            cfg,
            summary.big_n,
            summary.p_hat,
            &[
                ("source", args.source.describe()),
                ("fit_range", format!("{n_min}..={n_max}")),
                ("slope", fit.slope.to_string()),
                ("bound", summary.bound.map_or("-".into(), |b| b.to_string())),
            ],
        ),
        &["level", "boxes"],
    );
    level_rows(&mut rep, &occ);
    if summary.consistent == Some(false) {
        rep.violations.push(format!("fitted slope {} exceeds the porosity bound {}", fit.slope, summary.bound.unwrap()));
    }
    if boxes.is_none() {
        rep.warnings.push("box porosity not detected; no bound".into());
    }
    rep.summary = serde_json::to_value(&summary)?;
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct HolderArgs {
    pub samples: usize,
    pub count: usize,
}

impl Default for HolderArgs {
    fn default() -> Self {
        HolderArgs { samples: 500, count: 200_000 }
    }
}

pub fn holder(cfg: &RunConfig, args: &HolderArgs) -> Result<Report> {
    let f = cfg.map()?;
    let occ = OccupancySource::Map { count: args.count }.load(cfg)?;
    // raw draws inside J cells or outside the basin are dropped, so draw more
    // until `samples` usable ones remain
    let mut draws = args.samples;
    let diag = loop {
        let diag = holder_diagnostic(&f, &occ, draws, cfg.seed).map_err(|e| anyhow!("{e}"))?;
        let got = diag.samples.len();
        if got >= args.samples || draws >= 16 * args.samples {
            break diag;
        }
        draws = (draws as f64 * 1.1 * args.samples as f64 / got.max(1) as f64).ceil() as usize;
    };
    let mut rep = Report::new(
        "holder",
        header(cfg, None, None, &[("xi_hat", diag.xi_hat.to_string()), ("omega_radius", diag.omega_radius.to_string())]),
        &["re", "im", "n", "dist"],
    );
    for s in &diag.samples {
        rep.push(vec![fmt(s.z.re), fmt(s.z.im), s.n.to_string(), fmt(s.dist)]);
    }
    if diag.samples.len() < args.samples {
        rep.warnings.push(format!("only {} usable samples from {draws} draws", diag.samples.len()));
    }
    if !(diag.xi_hat > 0.0 && diag.xi_hat < 1.0) {
        rep.violations.push(format!("xi_hat = {} outside (0, 1)", diag.xi_hat));
    }
    rep.summary = serde_json::json!({
        "xi_hat": diag.xi_hat,
        "slope": diag.slope,
        "intercept": diag.intercept,
        "r_squared": diag.r_squared,
        "violation_fraction": diag.violation_fraction,
        "samples": diag.samples.len(),
        "draws": draws,
        "omega_radius": diag.omega_radius,
    });
    Ok(rep)
}
