//! One function per subcommand. Each returns its reports; the binary writes
//! them and derives the exit code.

mod analysis;
mod dynamics;
mod verify;

pub use analysis::{dimension, holder, porosity, render, DimensionArgs, HolderArgs, OccupancySource, PorosityArgs, PorosityMode, RenderArgs};
pub use dynamics::{ce, goodtimes, GoodTimesArgs};
pub use verify::{verify, VerifyArgs};

use anyhow::{anyhow, Result};
use cejulia::julia::{julia_points, JuliaMethod, JuliaSample};
use cejulia::sphere::{critical_set, CriticalConfig, CriticalSet};
use cejulia::RationalMap;

use crate::config::RunConfig;

/// Points in the Julia sample used to decide which critical points lie in J.
pub const CRITICAL_SAMPLE: usize = 20_000;

/// Chordal distance to the sample below which a critical point counts as
/// near J. Inverse iteration reaches some critical points slowly (0 for
/// `z^2 + i` is about 4e-3 from the nearest of 1e5 samples).
pub const CRITICAL_JULIA_TOL: f64 = 2e-2;

/// Header shared by every report.
pub fn header(cfg: &RunConfig, big_n: Option<u32>, p: Option<f64>, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    let mut h = vec![
        ("tool".to_string(), format!("cejulia {}", env!("CARGO_PKG_VERSION"))),
        ("map".to_string(), cfg.map_text()),
        ("delta".to_string(), cfg.delta.to_string()),
        ("D".to_string(), cfg.d.to_string()),
        ("N".to_string(), opt(big_n.map(|n| n.to_string()))),
        ("P".to_string(), opt(p.map(|p| p.to_string()))),
        ("depth".to_string(), cfg.depth.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("nmax".to_string(), opt(cfg.n_max.map(|n| n.to_string()))),
        ("schedule".to_string(), format!("b_j = {} / j^{}", cfg.schedule.a, cfg.schedule.p)),
    ];
    h.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    h
}

/// The map, a Julia sample and its critical set.
pub struct MapContext {
    pub f: RationalMap,
    pub sample: JuliaSample,
    pub crit: CriticalSet,
}

impl MapContext {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let f = cfg.map()?;
        let sample = julia_points(&f, JuliaMethod::InverseIteration, CRITICAL_SAMPLE, cfg.seed).map_err(|e| anyhow!("{e}"))?;
        let crit_cfg = CriticalConfig { julia_tol: CRITICAL_JULIA_TOL, ..CriticalConfig::default() };
        let crit = critical_set(&f, &sample.points, &crit_cfg).map_err(|e| anyhow!("{e}"))?;
        Ok(MapContext { f, sample, crit })
    }
}

pub(crate) fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}
