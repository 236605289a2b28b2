//! Segments a sphere-pack phantom and prints its quality metrics.
//!
//! `cargo run --release --example phantom_eval -- [size] [grains] [noise] [blur] [seed] [r_min] [r_max]`

use qcuts3d::metrics::evaluate;
use qcuts3d::phantom::{generate, Phase, PhantomSpec};
use qcuts3d::volume::binarize_ground_truth;
use qcuts3d::{segment_volume, PipelineConfig};

fn main() -> qcuts3d::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let arg = |i: usize, d: f64| args.get(i).copied().unwrap_or(d);
    let size = arg(0, 96.0) as usize;
    let mut spec = PhantomSpec::two_phase(size, arg(1, 500.0) as usize, arg(4, 1.0) as u64);
    spec.noise_sigma = arg(2, 0.0);
    spec.blur_sigma = arg(3, 0.0);
    spec.radius_range = (arg(5, spec.radius_range.0), arg(6, spec.radius_range.1));
    let p = generate(&spec)?;
    let truth = binarize_ground_truth(&p.labels, Phase::Solid.code())?;

    let mut cfg = PipelineConfig::default();
    if let Ok(s) = std::env::var("SIGMA") {
        cfg.sigma = s.parse().expect("sigma");
    }
    let seg = segment_volume(&p.volume, &cfg)?;
    for s in &seg.scales {
        println!(
            "K={:5} K'={:5} seeds={:4} lambda={:.3e} res={:.1e} apps={:5} solid={:.3} {:.2}s",
            s.target_k,
            s.supervoxels,
            s.seeds,
            s.eigenvalue,
            s.residual,
            s.operator_applications,
            s.solid_fraction,
            s.seconds
        );
    }
    let r = evaluate(&seg.mask, &seg.field, &truth, 256)?;
    println!(
        "true solid {:.3}  mask solid {:.3}  IoU {:.4}  ME {:.4}  AUROC {:.4}  {:.1}s",
        truth.solid_fraction(),
        seg.mask.solid_fraction(),
        r.iou,
        r.me,
        r.auroc,
        seg.seconds
    );
    Ok(())
}
