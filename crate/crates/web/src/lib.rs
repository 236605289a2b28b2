//! In-browser demo: build a sphere-pack phantom, segment it, and plot how
//! well each phase is reconstructed from a fraction of the graph spectrum.
//!
//! [`Session`] holds the state and is plain Rust so it can be tested
//! natively; [`Demo`] is the thin `wasm-bindgen` wrapper used by `www/`.

use qcuts3d::gft::{phase_curves, CurveSet, DEFAULT_FRACTIONS};
use qcuts3d::metrics::evaluate;
use qcuts3d::phantom::{generate, Phantom, PhantomSpec, Phase};
use qcuts3d::supervoxel::slic3d;
use qcuts3d::volume::binarize_ground_truth;
use qcuts3d::{segment_volume, Error, KernelVariant, PipelineConfig, Result, Segmentation};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// What a slice image shows.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Volume = 0,
    Labels = 1,
    Mask = 2,
    Saliency = 3,
}

const PHASE_RGB: [[u8; 3]; 4] = [[20, 20, 28], [40, 110, 220], [230, 160, 30], [200, 200, 200]];

pub struct Session {
    phantom: Phantom,
    seg: Option<Segmentation>,
}

impl Session {
    pub fn generate(
        size: usize,
        grains: usize,
        radius: (f64, f64),
        noise: f64,
        blur: f64,
        seed: u64,
        multiphase: bool,
    ) -> Result<Self> {
        let mut spec = PhantomSpec::two_phase(size, grains, seed);
        spec.radius_range = radius;
        if multiphase {
            spec.pore_phases = vec![Phase::Gas, Phase::Water, Phase::Oil];
        }
        spec.noise_sigma = noise;
        spec.blur_sigma = blur;
        Ok(Session {
            phantom: generate(&spec)?,
            seg: None,
        })
    }

    pub fn size(&self) -> usize {
        self.phantom.volume.dims().nx
    }

    /// Segments the phantom and scores it against its labels.
    pub fn segment(&mut self, scales: &[usize], sigma: f64) -> Result<Value> {
        let cfg = PipelineConfig {
            scales: scales.to_vec(),
            sigma,
            ..PipelineConfig::default()
        };
        let seg = segment_volume(&self.phantom.volume, &cfg)?;
        let truth = binarize_ground_truth(&self.phantom.labels, Phase::Solid.code())?;
        let report = evaluate(&seg.mask, &seg.field, &truth, 256)?;
        let out = json!({
            "iou": report.iou,
            "me": report.me,
            "auroc": report.auroc,
            "roc": report.roc_points,
            "solid_fraction": seg.mask.solid_fraction(),
            "true_solid_fraction": truth.solid_fraction(),
            "scales": seg.scales,
        });
        self.seg = Some(seg);
        Ok(out)
    }

    pub fn gft_curve(&self, supervoxels: usize, sigma: f64) -> Result<CurveSet> {
        let map = slic3d(&self.phantom.volume, supervoxels, 10)?;
        phase_curves(
            &self.phantom.labels,
            &[],
            &self.phantom.volume,
            &map,
            sigma,
            KernelVariant::Absolute,
            &DEFAULT_FRACTIONS,
        )
    }

    /// RGBA pixels of the axial slice `z`, row-major in y.
    pub fn rgba_slice(&self, layer: Layer, z: usize) -> Result<Vec<u8>> {
        let dims = self.phantom.volume.dims();
        if z >= dims.nz {
            return Err(Error::Argument(format!("slice {z} outside 0..{}", dims.nz)));
        }
        let plane = dims.nx * dims.ny;
        let range = z * plane..(z + 1) * plane;
        let gray = |v: f64| {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            [g, g, g]
        };
        let pixels: Vec<[u8; 3]> = match layer {
            Layer::Volume => self.phantom.volume.voxels()[range].iter().map(|&v| gray(v)).collect(),
            Layer::Labels => self.phantom.labels.labels()[range]
                .iter()
                .map(|&c| PHASE_RGB[(c as usize).min(3)])
                .collect(),
            Layer::Mask | Layer::Saliency => {
                let seg = self
                    .seg
                    .as_ref()
                    .ok_or_else(|| Error::Argument("segment the phantom first".into()))?;
                if layer == Layer::Mask {
                    seg.mask.solid()[range].iter().map(|&s| gray(s as u8 as f64)).collect()
                } else {
                    seg.field.values()[range].iter().map(|&v| gray(v)).collect()
                }
            }
        };
        Ok(pixels.iter().flat_map(|&[r, g, b]| [r, g, b, 255]).collect())
    }
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo(Session);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        size: usize,
        grains: usize,
        r_min: f64,
        r_max: f64,
        noise: f64,
        blur: f64,
        seed: u32,
        multiphase: bool,
    ) -> std::result::Result<Demo, JsError> {
        Session::generate(size, grains, (r_min, r_max), noise, blur, seed as u64, multiphase)
            .map(Demo)
            .map_err(js)
    }

    pub fn size(&self) -> usize {
        self.0.size()
    }

    /// Comma-separated supervoxel counts; returns the metrics as JSON.
    pub fn segment(&mut self, scales: &str, sigma: f64) -> std::result::Result<String, JsError> {
        let scales = scales
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| JsError::new(&format!("scales: {e}")))?;
        self.0.segment(&scales, sigma).map(|v| v.to_string()).map_err(js)
    }

    #[wasm_bindgen(js_name = gftCurve)]
    pub fn gft_curve(&self, supervoxels: usize, sigma: f64) -> std::result::Result<String, JsError> {
        self.0
            .gft_curve(supervoxels, sigma)
            .map(|c| serde_json::to_string(&c).expect("curves serialize"))
            .map_err(js)
    }

    pub fn slice(&self, layer: Layer, z: usize) -> std::result::Result<Vec<u8>, JsError> {
        self.0.rgba_slice(layer, z).map_err(js)
    }
}
