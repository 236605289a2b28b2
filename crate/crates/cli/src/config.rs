//! Run configuration: an optional JSON file overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use qcuts3d::segmentation::PhiSeedRule;
use qcuts3d::{Axis, Error, KernelVariant, PipelineConfig, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const THREADS_ENV: &str = "QCUTS3D_THREADS";

/// Worker count for the per-scale pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    #[default]
    Auto,
    Count(usize),
}

impl Threads {
    /// `0` lets the pool pick the hardware thread count.
    pub fn pool_size(self) -> usize {
        match self {
            Threads::Auto => 0,
            Threads::Count(n) => n,
        }
    }
}

impl FromStr for Threads {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(Error::Argument(format!(
                "threads must be `auto` or a positive integer, got `{s}`"
            ))),
            Ok(n) => Ok(Threads::Count(n)),
        }
    }
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threads::Auto => f.write_str("auto"),
            Threads::Count(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Threads {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threads::Auto => s.serialize_str("auto"),
            Threads::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(usize),
            Text(String),
        }
        let text = match Repr::deserialize(d)? {
            Repr::Count(n) => n.to_string(),
            Repr::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything a segmentation run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scales: Vec<usize>,
    pub sigma: f64,
    pub phi_seed: PhiSeedRule,
    pub axis: Axis,
    pub percentiles: (f64, f64),
    pub kernel: KernelVariant,
    /// Unset means: environment, then auto.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<Threads>,
    pub slic_max_iter: usize,
    pub eigen_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_pipeline(&PipelineConfig::default())
    }
}

impl RunConfig {
    fn from_pipeline(p: &PipelineConfig) -> Self {
        RunConfig {
            scales: p.scales.clone(),
            sigma: p.sigma,
            phi_seed: p.phi_seed,
            axis: p.axis,
            percentiles: p.percentiles,
            kernel: p.kernel,
            threads: None,
            slic_max_iter: p.slic_max_iter,
            eigen_tol: p.eigen_tol,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            scales: self.scales.clone(),
            sigma: self.sigma,
            phi_seed: self.phi_seed,
            axis: self.axis,
            percentiles: self.percentiles,
            kernel: self.kernel,
            slic_max_iter: self.slic_max_iter,
            eigen_tol: self.eigen_tol,
        }
    }

    pub fn threads(&self) -> Threads {
        self.threads.unwrap_or_default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// `10x` is a multiple of the largest weighted degree, a bare number is a
/// fixed potential.
pub fn parse_phi_seed(s: &str) -> Result<PhiSeedRule> {
    let s = s.trim();
    let (text, multiple) = match s.strip_suffix(['x', 'X']) {
        Some(t) => (t, true),
        None => (s, false),
    };
    let v: f64 = text
        .parse()
        .map_err(|_| Error::Argument(format!("bad seed potential `{s}`")))?;
    Ok(if multiple {
        PhiSeedRule::DegreeMultiple(v)
    } else {
        PhiSeedRule::Fixed(v)
    })
}

fn parse_percentiles(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::Argument(format!("percentiles must be `LOW,HIGH`, got `{s}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
    ))
}

fn parsed<T: FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn phi_arg(s: &str) -> std::result::Result<PhiSeedRule, String> {
    parse_phi_seed(s).map_err(|e| e.to_string())
}

fn percentiles_arg(s: &str) -> std::result::Result<(f64, f64), String> {
    parse_percentiles(s).map_err(|e| e.to_string())
}

/// Flags shared by commands that build supervoxel graphs.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Supervoxel counts, one segmentation per scale.
    #[arg(long, value_delimiter = ',', value_name = "K,..")]
    pub scales: Option<Vec<usize>>,

    /// Kernel bandwidth.
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Seed potential: `10x` (times the largest degree) or a fixed value.
    #[arg(long, value_parser = phi_arg, value_name = "RULE")]
    pub phi_seed: Option<PhiSeedRule>,

    /// Longitudinal axis scanned for pore seeds.
    #[arg(long, value_parser = parsed::<Axis>, value_name = "x|y|z")]
    pub axis: Option<Axis>,

    /// Contrast stretch percentiles.
    #[arg(long, value_parser = percentiles_arg, value_name = "LOW,HIGH", allow_hyphen_values = true)]
    pub percentiles: Option<(f64, f64)>,

    /// Edge kernel exponent.
    #[arg(long, value_parser = parsed::<KernelVariant>, value_name = "absolute|squared")]
    pub kernel: Option<KernelVariant>,

    /// Worker threads (`auto` or N). Falls back to $QCUTS3D_THREADS.
    #[arg(long, value_parser = parsed::<Threads>, value_name = "N")]
    pub threads: Option<Threads>,

    #[arg(long, value_name = "N")]
    pub slic_max_iter: Option<usize>,

    #[arg(long, value_name = "TOL")]
    pub eigen_tol: Option<f64>,
}

impl RunArgs {
    /// File, then flags, then the environment for an unset thread count.
    pub fn resolve(&self, env_threads: Option<&str>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.scales {
            cfg.scales = v.clone();
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.phi_seed {
            cfg.phi_seed = v;
        }
        if let Some(v) = self.axis {
            cfg.axis = v;
        }
        if let Some(v) = self.percentiles {
            cfg.percentiles = v;
        }
        if let Some(v) = self.kernel {
            cfg.kernel = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = Some(v);
        }
        if let Some(v) = self.slic_max_iter {
            cfg.slic_max_iter = v;
        }
        if let Some(v) = self.eigen_tol {
            cfg.eigen_tol = v;
        }
        if cfg.threads.is_none() {
            cfg.threads = match env_threads.map(str::trim).filter(|s| !s.is_empty()) {
                Some(s) => Some(
                    s.parse()
                        .map_err(|e| Error::Argument(format!("${THREADS_ENV}: {e}")))?,
                ),
                None => Some(Threads::Auto),
            };
        }
        cfg.pipeline().validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_seed_forms() {
        assert_eq!(parse_phi_seed("10x").unwrap(), PhiSeedRule::DegreeMultiple(10.0));
        assert_eq!(parse_phi_seed("2.5").unwrap(), PhiSeedRule::Fixed(2.5));
        assert!(parse_phi_seed("x").is_err());
    }

    #[test]
    fn threads_parse_and_roundtrip() {
        assert_eq!("auto".parse::<Threads>().unwrap(), Threads::Auto);
        assert_eq!("3".parse::<Threads>().unwrap(), Threads::Count(3));
        assert!("0".parse::<Threads>().is_err());
        let j = serde_json::to_string(&Threads::Count(4)).unwrap();
        assert_eq!(serde_json::from_str::<Threads>(&j).unwrap(), Threads::Count(4));
        assert_eq!(serde_json::from_str::<Threads>("\"auto\"").unwrap(), Threads::Auto);
    }

    #[test]
    fn flags_beat_file_and_file_beats_env() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(&p, r#"{"sigma": 0.2, "scales": [100], "threads": 2}"#).unwrap();
        let args = RunArgs {
            config: Some(p.clone()),
            sigma: Some(0.3),
            ..RunArgs::default()
        };
        let cfg = args.resolve(Some("7")).unwrap();
        assert_eq!(cfg.sigma, 0.3);
        assert_eq!(cfg.scales, vec![100]);
        assert_eq!(cfg.threads(), Threads::Count(2));

        std::fs::write(&p, r#"{"scales": [100]}"#).unwrap();
        assert_eq!(args.resolve(Some("7")).unwrap().threads(), Threads::Count(7));
        let flag = RunArgs {
            threads: Some(Threads::Count(1)),
            ..args
        };
        assert_eq!(flag.resolve(Some("7")).unwrap().threads(), Threads::Count(1));
    }

    #[test]
    fn unknown_config_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(&p, r#"{"sigmaa": 0.2}"#).unwrap();
        let args = RunArgs {
            config: Some(p),
            ..RunArgs::default()
        };
        assert!(matches!(args.resolve(None), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_argument_errors() {
        let args = RunArgs {
            sigma: Some(-1.0),
            ..RunArgs::default()
        };
        assert!(matches!(args.resolve(None), Err(Error::Argument(_))));
        assert!(matches!(RunArgs::default().resolve(Some("many")), Err(Error::Argument(_))));
    }
}
