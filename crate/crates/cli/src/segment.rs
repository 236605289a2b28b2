use std::path::PathBuf;

use clap::Args;
use qcuts3d::supervoxel::slic3d;
use qcuts3d::volume::{contrast_adjust, ContrastStatus};
use qcuts3d::{io, segment_volume, Result};
use serde_json::json;

use crate::config::{RunArgs, THREADS_ENV};

pub const MASK_FILE: &str = "mask.raw";
pub const SALIENCY_FILE: &str = "saliency.raw";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Raw grayscale volume with a `.json` sidecar.
    pub input: PathBuf,

    /// Directory receiving mask.raw, saliency.raw and diagnostics.json.
    #[arg(short, long, value_name = "DIR")]
    pub out_dir: PathBuf,

    /// Also write per-scale supervoxel ids (u32) for debugging.
    #[arg(long)]
    pub save_supervoxels: bool,

    #[command(flatten)]
    pub run: RunArgs,
}

pub fn run(a: &SegmentArgs) -> Result<()> {
    let cfg = a.run.resolve(std::env::var(THREADS_ENV).ok().as_deref())?;
    crate::install_pool(cfg.threads())?;
    // Everything is read and computed before the first byte is written.
    let volume = io::load_volume(&a.input)?;
    log::info!("loaded {} volume from {}", volume.dims(), a.input.display());
    let seg = segment_volume(&volume, &cfg.pipeline())?;

    std::fs::create_dir_all(&a.out_dir)?;
    let mask_path = a.out_dir.join(MASK_FILE);
    let field_path = a.out_dir.join(SALIENCY_FILE);
    io::save_mask(&seg.mask, &mask_path)?;
    io::save_saliency(&seg.field, &field_path)?;
    if a.save_supervoxels {
        let (adjusted, _) = contrast_adjust(&volume, cfg.percentiles.0, cfg.percentiles.1)?;
        for &k in &cfg.scales {
            let map = slic3d(&adjusted, k, cfg.slic_max_iter)?;
            io::save_supervoxels(&map, &a.out_dir.join(format!("supervoxels_{k}.raw")))?;
        }
    }

    let contrast = match seg.contrast {
        ContrastStatus::Stretched { low, high } => json!({"status": "stretched", "low": low, "high": high}),
        ContrastStatus::Constant { value } => json!({"status": "constant", "value": value}),
    };
    let diagnostics = json!({
        "input": a.input,
        "dims": volume.dims(),
        "config": cfg,
        "contrast": contrast,
        "scales": seg.scales,
        "solid_fraction": seg.mask.solid_fraction(),
        "seconds": seg.seconds,
        "outputs": {"mask": mask_path, "saliency": field_path},
    });
    let text = serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize");
    std::fs::write(a.out_dir.join(DIAGNOSTICS_FILE), text + "\n")?;

    println!(
        "segmented {} in {:.3} s over {} scale(s); solid fraction {:.4}",
        volume.dims(),
        seg.seconds,
        seg.scales.len(),
        seg.mask.solid_fraction()
    );
    Ok(())
}
