use std::path::PathBuf;

use clap::Args;
use qcuts3d::gft::{phase_curves, DEFAULT_FRACTIONS};
use qcuts3d::supervoxel::slic3d;
use qcuts3d::{io, Result};

use crate::config::{RunArgs, THREADS_ENV};
use crate::evaluate::phase_code;
use crate::{emit, Format};

/// Dense eigendecomposition is cubic in the supervoxel count.
const LARGE_GRAPH: usize = 4000;

#[derive(Debug, Args)]
pub struct GftCurveArgs {
    /// Raw grayscale volume.
    pub volume: PathBuf,

    /// Label volume defining the phase indicator signals.
    #[arg(long)]
    pub labels: PathBuf,

    /// Supervoxel count of the graph.
    #[arg(long, default_value_t = 1500)]
    pub supervoxels: usize,

    /// Fractions of the spectrum used for reconstruction.
    #[arg(long, value_delimiter = ',', value_name = "F,..")]
    pub fractions: Option<Vec<f64>>,

    /// Phases to reconstruct, by code or name; all phases when omitted.
    #[arg(long, value_delimiter = ',', value_name = "PHASE,..")]
    pub phases: Option<Vec<String>>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Write the curve here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    #[command(flatten)]
    pub run: RunArgs,
}

pub fn run(a: &GftCurveArgs) -> Result<()> {
    let cfg = a.run.resolve(std::env::var(THREADS_ENV).ok().as_deref())?;
    crate::install_pool(cfg.threads())?;
    let volume = io::load_volume(&a.volume)?;
    let labels = io::load_labels(&a.labels)?;
    let codes = a
        .phases
        .iter()
        .flatten()
        .map(|p| phase_code(&labels, p))
        .collect::<Result<Vec<u8>>>()?;
    let fractions = a.fractions.clone().unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec());

    let map = slic3d(&volume, a.supervoxels, cfg.slic_max_iter)?;
    if map.count() > LARGE_GRAPH {
        log::warn!("{} supervoxels: the dense spectrum will be slow", map.count());
    }
    let curves = phase_curves(&labels, &codes, &volume, &map, cfg.sigma, cfg.kernel, &fractions)?;
    let text = match a.format {
        Format::Csv => curves.to_csv(),
        Format::Json => serde_json::to_string_pretty(&curves).expect("curves serialize") + "\n",
    };
    emit(&text, a.output.as_ref())
}
