use std::path::PathBuf;

use clap::Args;
use qcuts3d::io::{self, DType};
use qcuts3d::phantom::{generate, Phase, PhantomSpec};
use qcuts3d::Result;
use serde_json::json;

use crate::evaluate::LABELS_FILE;

pub const VOLUME_FILE: &str = "volume.raw";
pub const SPEC_FILE: &str = "phantom.json";

fn phase_arg(s: &str) -> std::result::Result<Phase, String> {
    s.parse().map_err(|e: qcuts3d::Error| e.to_string())
}

fn dtype_arg(s: &str) -> std::result::Result<DType, String> {
    DType::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Directory receiving volume.raw, labels.raw and phantom.json.
    #[arg(short, long, value_name = "DIR")]
    pub out_dir: PathBuf,

    /// Cube edge length in voxels.
    #[arg(long)]
    pub size: Option<usize>,

    /// Number of solid grains.
    #[arg(long)]
    pub grains: Option<usize>,

    #[arg(long)]
    pub r_min: Option<f64>,

    #[arg(long)]
    pub r_max: Option<f64>,

    /// Gaussian noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,

    /// Gaussian blur standard deviation in voxels.
    #[arg(long)]
    pub blur: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Allowed grain interpenetration as a fraction of the radius sum.
    #[arg(long)]
    pub max_overlap: Option<f64>,

    /// Phases sharing the pore space.
    #[arg(long, value_delimiter = ',', value_parser = phase_arg, value_name = "PHASE,..")]
    pub phases: Option<Vec<Phase>>,

    #[arg(long)]
    pub seeds_per_phase: Option<usize>,

    /// Element type of volume.raw.
    #[arg(long, value_parser = dtype_arg, default_value = "f32")]
    pub dtype: DType,
}

impl PhantomArgs {
    pub fn spec(&self) -> PhantomSpec {
        let d = PhantomSpec::default();
        PhantomSpec {
            size: self.size.unwrap_or(d.size),
            grain_count: self.grains.unwrap_or(d.grain_count),
            radius_range: (
                self.r_min.unwrap_or(d.radius_range.0),
                self.r_max.unwrap_or(d.radius_range.1),
            ),
            intensities: d.intensities,
            noise_sigma: self.noise.unwrap_or(d.noise_sigma),
            blur_sigma: self.blur.unwrap_or(d.blur_sigma),
            seed: self.seed.unwrap_or(d.seed),
            max_overlap: self.max_overlap.unwrap_or(d.max_overlap),
            pore_phases: self.phases.clone().unwrap_or(d.pore_phases),
            seeds_per_phase: self.seeds_per_phase.unwrap_or(d.seeds_per_phase),
        }
    }
}

pub fn run(a: &PhantomArgs) -> Result<()> {
    let spec = a.spec();
    let p = generate(&spec)?;
    std::fs::create_dir_all(&a.out_dir)?;
    io::save_volume(&p.volume, &a.out_dir.join(VOLUME_FILE), a.dtype)?;
    io::save_labels(&p.labels, &a.out_dir.join(LABELS_FILE))?;

    let n = p.labels.labels().len() as f64;
    let fractions: serde_json::Map<String, serde_json::Value> = Phase::ALL
        .iter()
        .map(|ph| {
            let count = p.labels.labels().iter().filter(|&&c| c == ph.code()).count();
            (ph.name().to_string(), json!(count as f64 / n))
        })
        .collect();
    let meta = json!({
        "spec": spec,
        "grains": p.grains,
        "phase_fractions": fractions,
        "analytic_solid_fraction": p.analytic_solid_fraction(),
    });
    let text = serde_json::to_string_pretty(&meta).expect("phantom metadata serializes");
    std::fs::write(a.out_dir.join(SPEC_FILE), text + "\n")?;
    println!(
        "wrote {}^3 phantom with {} grains to {}; solid fraction {:.4}",
        spec.size,
        p.grains.len(),
        a.out_dir.display(),
        fractions["solid"].as_f64().unwrap_or(0.0)
    );
    Ok(())
}
