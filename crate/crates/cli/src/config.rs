use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use cejulia::pullback::ShrinkingSchedule;
use cejulia::RationalMap;
use num_complex::Complex64;
use serde::Serialize;

/// Parses `1`, `-2.5`, `i`, `-3i`, `0.5+2i`, `1e-3-4.5e2i`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        bail!("empty coefficient");
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(t.parse().with_context(|| format!("bad number {s:?}"))?, 0.0));
    };
    // split before the last sign that does not follow an exponent marker
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse().with_context(|| format!("bad imaginary part in {s:?}"))?,
    };
    let re: f64 = re.parse().with_context(|| format!("bad real part in {s:?}"))?;
    Ok(Complex64::new(re, im))
}

pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// `a0,a1,...@b0,b1,...`, coefficients in ascending order; no `@` means a
/// polynomial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSpec {
    pub numer: Vec<Complex64>,
    pub denom: Vec<Complex64>,
}

impl FromStr for MapSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let list = |part: &str| -> Result<Vec<Complex64>> { part.split(',').map(parse_complex).collect() };
        let (numer, denom) = match s.split_once('@') {
            Some((n, d)) => (list(n)?, list(d)?),
            None => (list(s)?, vec![Complex64::new(1.0, 0.0)]),
        };
        Ok(MapSpec { numer, denom })
    }
}

impl std::fmt::Display for MapSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[Complex64]| v.iter().map(|&z| format_complex(z)).collect::<Vec<_>>().join(",");
        write!(f, "{}@{}", join(&self.numer), join(&self.denom))
    }
}

impl MapSpec {
    pub fn build(&self) -> Result<RationalMap> {
        RationalMap::new(self.numer.clone(), self.denom.clone()).map_err(|e| anyhow!("{e}"))
    }
}

/// Bound on critical points along good-time pullbacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DBound {
    /// `nu N_f`, resolved per base point after the shadow stage.
    Auto,
    Fixed(u32),
}

impl FromStr for DBound {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(DBound::Auto),
            _ => Ok(DBound::Fixed(s.parse().with_context(|| format!("D must be `auto` or an integer, got {s:?}"))?)),
        }
    }
}

impl std::fmt::Display for DBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DBound::Auto => write!(f, "auto"),
            DBound::Fixed(d) => write!(f, "{d}"),
        }
    }
}

/// Shrinking schedule `b_j = a / j^p`, written `a,p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleSpec {
    pub a: f64,
    pub p: f64,
}

impl FromStr for ScheduleSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, p) = s.split_once(',').ok_or_else(|| anyhow!("schedule must be `a,p`, got {s:?}"))?;
        Ok(ScheduleSpec { a: a.trim().parse()?, p: p.trim().parse()? })
    }
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        let d = ShrinkingSchedule::default();
        ScheduleSpec { a: d.a, p: d.p }
    }
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<ShrinkingSchedule> {
        ShrinkingSchedule::new(self.a, self.p).map_err(|e| anyhow!("{e}"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub map: Option<MapSpec>,
    pub delta: f64,
    pub d: DBound,
    /// Per-command default when absent.
    pub n_max: Option<usize>,
    pub depth: u32,
    pub seed: u64,
    pub schedule: ScheduleSpec,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            map: None,
            delta: 0.05,
            d: DBound::Auto,
            n_max: None,
            depth: 10,
            seed: 1,
            schedule: ScheduleSpec::default(),
            out: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("--delta must lie in (0, 1), got {}", self.delta);
        }
        if !(1..=cejulia::porosity::MAX_DEPTH).contains(&self.depth) {
            bail!("--depth must lie in 1..={}, got {}", cejulia::porosity::MAX_DEPTH, self.depth);
        }
        if matches!(self.n_max, Some(n) if !(4..=100_000).contains(&n)) {
            bail!("--nmax must lie in 4..=100000");
        }
        if self.d == DBound::Fixed(0) {
            bail!("--D must be at least 1");
        }
        self.schedule.build()?;
        Ok(())
    }

    pub fn map(&self) -> Result<RationalMap> {
        self.map.as_ref().ok_or_else(|| anyhow!("this command needs --map"))?.build()
    }

    pub fn map_text(&self) -> String {
        self.map.as_ref().map_or_else(|| "-".to_string(), |m| m.to_string())
    }

    pub fn n_max_or(&self, default: usize) -> usize {
        self.n_max.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let c = |re, im| Complex64::new(re, im);
        assert_eq!(parse_complex("-2").unwrap(), c(-2.0, 0.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("-3i").unwrap(), c(0.0, -3.0));
        assert_eq!(parse_complex("0.5+2i").unwrap(), c(0.5, 2.0));
        assert_eq!(parse_complex("1e-3-4.5e2i").unwrap(), c(1e-3, -450.0));
        assert_eq!(parse_complex("-1-i").unwrap(), c(-1.0, -1.0));
        assert!(parse_complex("x").is_err());
        for z in [c(-2.0, 0.0), c(0.25, -1.5), c(0.0, 1.0)] {
            assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
        }
    }

    #[test]
    fn map_round_trip() {
        let m: MapSpec = "i,0,1".parse().unwrap();
        assert_eq!(m.numer.len(), 3);
        assert_eq!(m.denom, vec![Complex64::new(1.0, 0.0)]);
        let again: MapSpec = m.to_string().parse().unwrap();
        assert_eq!(m, again);
        let r: MapSpec = "0,0,1@1,2".parse().unwrap();
        assert_eq!(r.denom.len(), 2);
        assert!("1,,2".parse::<MapSpec>().is_err());
    }

    #[test]
    fn d_and_schedule() {
        assert_eq!("auto".parse::<DBound>().unwrap(), DBound::Auto);
        assert_eq!("7".parse::<DBound>().unwrap(), DBound::Fixed(7));
        assert!("x".parse::<DBound>().is_err());
        let s: ScheduleSpec = "0.25,2".parse().unwrap();
        assert_eq!(s, ScheduleSpec::default());
        let cfg = RunConfig { delta: 1.5, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
