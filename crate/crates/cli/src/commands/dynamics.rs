use anyhow::{anyhow, Result};
use cejulia::dynamics::{ce_estimate, map_lambda, shadow_analysis, shadow_density, ShadowConstants};
use cejulia::julia::{julia_occupancy, julia_orbit, julia_points, JuliaMethod};
use cejulia::pullback::{
    find_halving_n, good_times, halving_check, hole_pullback, lipschitz_exponent, lipschitz_violations, selected_times,
    GoodTimeConfig, GoodTimeRecord,
};
use cejulia::SpherePoint;
use rayon::prelude::*;
use serde::Serialize;

use super::{fmt, header, MapContext};
use crate::config::{format_complex, DBound, RunConfig};
use crate::formats::Report;

pub(crate) fn point_text(p: SpherePoint) -> String {
    p.as_finite().map_or_else(|| "inf".to_string(), format_complex)
}

pub fn ce(cfg: &RunConfig) -> Result<Report> {
    let ctx = MapContext::new(cfg)?;
    let n_max = cfg.n_max_or(60);
    let all: Vec<SpherePoint> = ctx.crit.points.iter().map(|c| c.point).collect();
    let mut rep = Report::new(
        "ce",
        header(cfg, None, None, &[("nu", ctx.crit.nu.to_string())]),
        &["critical_point", "local_degree", "in_julia", "lambda_hat", "log_C_hat", "n_used", "verdict"],
    );
    let mut rows = Vec::new();
    for c in &ctx.crit.points {
        if c.point.is_infinite() && !c.in_julia {
            continue;
        }
        let head = vec![point_text(c.point), c.local_degree.to_string(), c.in_julia.to_string()];
        match ce_estimate(&ctx.f, &all, c.point, n_max) {
            Ok(est) => {
                let verdict = if est.is_ce() { "CE" } else { "NOT-CE" };
                let mut row = head;
                row.extend([fmt(est.lambda_hat), fmt(est.log_c_hat), est.n_used.to_string(), verdict.into()]);
                rep.push(row);
                rows.push(serde_json::json!({
                    "critical_point": point_text(c.point),
                    "in_julia": c.in_julia,
                    "lambda_hat": est.lambda_hat,
                    "log_C_hat": est.log_c_hat,
                    "n_used": est.n_used,
                    "verdict": verdict,
                }));
            }
            Err(e) => {
                let mut row = head;
                row.extend(["-".into(), "-".into(), "0".into(), format!("ERROR: {e}")]);
                rep.push(row);
                let msg = format!("critical point {}: {e}", point_text(c.point));
                if c.in_julia {
                    rep.violations.push(msg);
                } else {
                    rep.warnings.push(msg);
                }
            }
        }
    }
    rep.summary = serde_json::json!({ "n_max": n_max, "nu": ctx.crit.nu, "critical_points": rows });
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct GoodTimesArgs {
    pub samples: usize,
    /// Orbit length for the shadow density.
    pub shadow_n: usize,
    /// Tried in order until the good-time density reaches one half.
    pub deltas: Vec<f64>,
    /// Horizon for the diameters of `W_n(x)`.
    pub diam_n_max: usize,
    pub halving_max: usize,
    /// Pull back complement holes at the selected times, with this `tau`.
    pub holes: Option<f64>,
}

impl Default for GoodTimesArgs {
    fn default() -> Self {
        GoodTimesArgs { samples: 20, shadow_n: 2000, deltas: Vec::new(), diam_n_max: 150, halving_max: 20, holes: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodTimesPoint {
    pub index: usize,
    pub x: String,
    pub shadow_density: f64,
    pub n_f: usize,
    pub d: u32,
    pub delta: f64,
    pub density: f64,
    pub lower_density: f64,
    pub unknown_fraction: f64,
    pub halving_n: Option<usize>,
    pub lipschitz_l: f64,
    pub lipschitz_violations: usize,
    /// `(k_j, diam W_{k_j})` at the run-wide halving `N`.
    pub diam_at_kj: Vec<(usize, f64)>,
    pub ratios: Vec<f64>,
    pub hole_witnesses: Option<usize>,
    pub hole_unresolved: Option<usize>,
    pub c4_hat: Option<f64>,
}

pub fn goodtimes(cfg: &RunConfig, args: &GoodTimesArgs) -> Result<Report> {
    let ctx = MapContext::new(cfg)?;
    let lambda = map_lambda(&ctx.f, &ctx.crit, 60).map_err(|e| anyhow!("{e}"))?;
    let consts = ShadowConstants::new(&ctx.crit, lambda).map_err(|e| anyhow!("{e}"))?;
    let n_max = cfg.n_max_or(500);
    let sched = cfg.schedule.build()?;
    let deltas = if args.deltas.is_empty() { vec![cfg.delta] } else { args.deltas.clone() };
    let occ = match args.holes {
        Some(_) => {
            let sample = julia_points(&ctx.f, JuliaMethod::InverseIteration, 400_000, cfg.seed).map_err(|e| anyhow!("{e}"))?;
            Some(julia_occupancy(&sample, cfg.depth).map_err(|e| anyhow!("{e}"))?)
        }
        None => None,
    };

    let runs: Vec<(GoodTimesPoint, GoodTimeRecord)> = (0..args.samples)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let orbit = julia_orbit(&ctx.f, args.shadow_n.max(n_max), cfg.seed.wrapping_add(1000 + i as u64))
                .map_err(|e| anyhow!("{e}"))?;
            let cover = shadow_analysis(&orbit, &ctx.crit, &consts).map_err(|e| anyhow!("{e}"))?;
            let shadow = shadow_density(&cover, args.shadow_n).map_err(|e| anyhow!("{e}"))?;
            let d = match cfg.d {
                DBound::Auto => ctx.crit.nu * cover.n_f as u32,
                DBound::Fixed(d) => d,
            };
            let mut record = None;
            for &delta in &deltas {
                let mut gcfg = GoodTimeConfig::new(delta, d, n_max);
                gcfg.diam_n_max = args.diam_n_max;
                gcfg.sched = sched;
                let rec = good_times(&ctx.f, &orbit, &gcfg).map_err(|e| anyhow!("{e}"))?;
                let done = rec.density >= 0.5;
                record = Some(rec);
                if done {
                    break;
                }
            }
            let rec = record.unwrap();
            let l = lipschitz_exponent(&ctx.f, rec.delta);
            let point = GoodTimesPoint {
                index: i,
                x: point_text(orbit.points[0]),
                shadow_density: shadow,
                n_f: cover.n_f,
                d,
                delta: rec.delta,
                density: rec.density,
                lower_density: rec.lower_density,
                unknown_fraction: rec.unknown.len() as f64 / (rec.n_max() + 1) as f64,
                halving_n: find_halving_n(&rec, 1..=args.halving_max, 2),
                lipschitz_l: l,
                lipschitz_violations: lipschitz_violations(&rec, l).len(),
                diam_at_kj: Vec::new(),
                ratios: Vec::new(),
                hole_witnesses: None,
                hole_unresolved: None,
                c4_hat: None,
            };
            Ok((point, rec))
        })
        .collect::<Result<_>>()?;

    // one N for the whole run: the smallest that halves at every point
    let run_n = (1..=args.halving_max).find(|&n| {
        runs.iter().all(|(_, rec)| {
            let steps = halving_check(rec, n);
            steps.len() >= 2 && steps.iter().all(|s| s.ok)
        })
    });
    let mut points = Vec::with_capacity(runs.len());
    for (mut p, rec) in runs {
        let n = run_n.or(p.halving_n).unwrap_or(1);
        p.diam_at_kj = selected_times(&rec, n).iter().map(|&k| (k, rec.diam_wn[k].unwrap())).collect();
        p.ratios = halving_check(&rec, n).iter().map(|s| s.ratio).collect();
        if let (Some(tau), Some(occ)) = (args.holes, occ.as_ref()) {
            let holes = hole_pullback(&ctx.f, &rec, occ, tau, n).map_err(|e| anyhow!("{e}"))?;
            p.hole_witnesses = Some(holes.witnesses.len());
            p.hole_unresolved = Some(holes.unresolved.len());
            p.c4_hat = Some(holes.c4_hat);
        }
        points.push(p);
    }

    let mut rep = Report::new(
        "goodtimes",
        header(
            cfg,
            run_n.map(|n| n as u32),
            None,
            &[
                ("lambda_hat", lambda.to_string()),
                ("nu", ctx.crit.nu.to_string()),
                ("K_f", consts.k_f.to_string()),
                ("shadow_n", args.shadow_n.to_string()),
                ("deltas", deltas.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(";")),
                (
                    "note",
                    "densities are over the finite window 0..=nmax; the guaranteed lower density is asymptotic".into(),
                ),
            ],
        ),
        &[
            "x", "shadow_density", "N_f", "D", "delta", "goodtime_density", "lower_density", "unknown_fraction",
            "halving_N", "lipschitz_violations", "diam_at_kj", "c4_hat",
        ],
    );
    for p in &points {
        let diams: Vec<String> = p.diam_at_kj.iter().map(|(k, d)| format!("{k}:{}", fmt(*d))).collect();
        rep.push(vec![
            p.x.clone(),
            fmt(p.shadow_density),
            p.n_f.to_string(),
            p.d.to_string(),
            p.delta.to_string(),
            fmt(p.density),
            fmt(p.lower_density),
            fmt(p.unknown_fraction),
            p.halving_n.map_or("-".into(), |n| n.to_string()),
            p.lipschitz_violations.to_string(),
            diams.join(";"),
            p.c4_hat.map_or("-".into(), fmt),
        ]);
        if p.unknown_fraction > 0.2 {
            rep.warnings.push(format!(
                "point {}: {:.0}% of times unresolved at delta {}; try --delta {}",
                p.index,
                100.0 * p.unknown_fraction,
                p.delta,
                p.delta / 2.0
            ));
        }
        if p.lipschitz_violations > 0 {
            rep.violations.push(format!("point {}: {} frames below 2^(-nL)", p.index, p.lipschitz_violations));
        }
        if p.hole_unresolved.is_some_and(|u| u > 0) {
            rep.warnings.push(format!("point {}: {} selected times without a hole witness", p.index, p.hole_unresolved.unwrap()));
        }
    }
    let min = |f: fn(&GoodTimesPoint) -> f64| points.iter().map(f).fold(f64::INFINITY, f64::min);
    let count = |f: fn(&GoodTimesPoint) -> bool| points.iter().filter(|p| f(p)).count();
    rep.push(vec![
        "SUMMARY(min)".into(),
        fmt(min(|p| p.shadow_density)),
        points.iter().map(|p| p.n_f).max().unwrap_or(0).to_string(),
        points.iter().map(|p| p.d).max().unwrap_or(0).to_string(),
        "-".into(),
        fmt(min(|p| p.density)),
        fmt(min(|p| p.lower_density)),
        "-".into(),
        run_n.map_or("-".into(), |n| n.to_string()),
        points.iter().map(|p| p.lipschitz_violations).sum::<usize>().to_string(),
        "-".into(),
        points.iter().filter_map(|p| p.c4_hat).reduce(f64::min).map_or("-".into(), fmt),
    ]);
    if run_n.is_none() {
        rep.warnings.push(format!("no N in 1..={} halves the diameters at every point", args.halving_max));
    }
    rep.summary = serde_json::json!({
        "lambda_hat": lambda,
        "nu": ctx.crit.nu,
        "k_f": consts.k_f,
        "n_max": n_max,
        "halving_n": run_n,
        "shadow_density_ge_half": count(|p| p.shadow_density >= 0.5),
        "goodtime_density_ge_half": count(|p| p.density >= 0.5),
        "samples": points.len(),
        "points": points,
    });
    Ok(rep)
}
