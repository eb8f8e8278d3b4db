use anyhow::{anyhow, Result};
use cejulia::dimension::{enumerate_admissible, fit_tree_constant, max_count_dp, rams_bound, tree_formula};
use cejulia::pullback::{blaschke_oracle_shifted, fit_containment, BlaschkeReport};
use serde::Serialize;

use super::{fmt, header};
use crate::config::RunConfig;
use crate::formats::Report;

#[derive(Debug, Clone)]
pub struct VerifyArgs {
    pub trials: usize,
    pub max_degree: usize,
    pub ts: Vec<f64>,
    pub grid_step: f64,
    /// Subtracted from the Blaschke bound; a positive value is a negative
    /// control that must produce witnesses.
    pub corrupt_bound: f64,
    pub tree_depth: u32,
    pub tree_ps: Vec<f64>,
    /// The tree constant is fitted on `n <= fit_depth` and checked above.
    pub fit_depth: u32,
    /// Witnesses kept per `t` in the summary.
    pub max_witnesses: usize,
}

impl Default for VerifyArgs {
    fn default() -> Self {
        VerifyArgs {
            trials: 10_000,
            max_degree: 5,
            ts: vec![0.5, 0.9, 0.99],
            grid_step: 1e-2,
            corrupt_bound: 0.0,
            tree_depth: 8,
            tree_ps: vec![1.0, 2.0],
            fit_depth: 4,
            max_witnesses: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeLevel {
    pub p: f64,
    pub n: u32,
    pub trees: usize,
    pub max_count: u64,
    pub dp_max: u64,
    pub formula: f64,
    /// Smallest `bound - #B_n` of the measure walk over the trees.
    pub rams_min_slack: i64,
}

pub fn verify(cfg: &RunConfig, args: &VerifyArgs) -> Result<Report> {
    let mut rep = Report::new(
        "verify",
        header(
            cfg,
            Some(1),
            None,
            &[
                ("trials", args.trials.to_string()),
                ("max_degree", args.max_degree.to_string()),
                ("grid_step", args.grid_step.to_string()),
                ("corrupt_bound", args.corrupt_bound.to_string()),
            ],
        ),
        &["oracle", "parameter", "checked", "violations", "statistic", "value"],
    );

    let mut blaschke = Vec::new();
    for &t in &args.ts {
        let mut r = blaschke_oracle_shifted(args.max_degree, t, args.trials, args.grid_step, cfg.seed, args.corrupt_bound)
            .map_err(|e| anyhow!("{e}"))?;
        rep.push(vec![
            "blaschke".into(),
            format!("t={t}"),
            r.points_checked.to_string(),
            r.violations.len().to_string(),
            "worst_excess".into(),
            fmt(r.worst_excess),
        ]);
        if !r.violations.is_empty() {
            rep.violations.push(format!("Blaschke bound fails at t = {t} in {} trials", r.violations.len()));
        }
        r.violations.truncate(args.max_witnesses);
        blaschke.push(r);
    }
    let containment = fit_containment(&blaschke);

    let mut levels = Vec::new();
    let mut constants = Vec::new();
    for &p in &args.tree_ps {
        let mut per_p = Vec::new();
        for n in 1..=args.tree_depth {
            let trees = enumerate_admissible(1, p, n).map_err(|e| anyhow!("{e}"))?;
            let mut max_count = 0;
            let mut slack = i64::MAX;
            for t in &trees {
                let r = rams_bound(t, 1, p, n).map_err(|e| anyhow!("{e}"))?;
                max_count = max_count.max(r.actual);
                slack = slack.min(r.bound as i64 - r.actual as i64);
            }
            let level = TreeLevel {
                p,
                n,
                trees: trees.len(),
                max_count,
                dp_max: max_count_dp(1, p, n),
                formula: tree_formula(1, 1, p, n),
                rams_min_slack: slack,
            };
            if level.dp_max != level.max_count {
                rep.violations.push(format!("P = {p}, n = {n}: enumeration max {max_count} != DP max {}", level.dp_max));
            }
            if slack < 0 {
                rep.violations.push(format!("P = {p}, n = {n}: measure-walk bound below #B_n"));
            }
            per_p.push(level);
        }
        let fit: Vec<(u32, u64)> = per_p.iter().filter(|l| l.n <= args.fit_depth).map(|l| (l.n, l.max_count)).collect();
        let c = fit_tree_constant(1, 1, p, &fit);
        for l in &per_p {
            let ok = l.max_count as f64 <= c * l.formula * (1.0 + 1e-12);
            if !ok {
                rep.violations.push(format!("P = {p}, n = {}: max #B_n = {} exceeds C * formula = {}", l.n, l.max_count, c * l.formula));
            }
            if p == 1.0 && l.max_count != 1 {
                rep.violations.push(format!("P = 1, n = {}: max #B_n = {} != 1", l.n, l.max_count));
            }
            rep.push(vec![
                "tree".into(),
                format!("P={p},n={}", l.n),
                l.trees.to_string(),
                (!ok as usize).to_string(),
                "max_count/formula".into(),
                format!("{}/{}", l.max_count, fmt(l.formula)),
            ]);
        }
        constants.push((p, c));
        levels.extend(per_p);
    }

    #[derive(Serialize)]
    struct Summary<'a> {
        blaschke: &'a [BlaschkeReport],
        containment_c1_c2: Option<(f64, f64)>,
        tree_levels: &'a [TreeLevel],
        tree_constants: &'a [(f64, f64)],
        fit_depth: u32,
    }
    rep.summary = serde_json::to_value(Summary {
        blaschke: &blaschke,
        containment_c1_c2: containment,
        tree_levels: &levels,
        tree_constants: &constants,
        fit_depth: args.fit_depth,
    })?;
    Ok(rep)
}
