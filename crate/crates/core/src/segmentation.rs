//! Binarization, voxelization, multi-scale fusion and the end-to-end
//! pipeline.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenOptions;
use crate::error::{arg_err, Error, Result};
use crate::graph::{build_graph_with, default_phi_seed, select_pore_seeds, Axis, KernelVariant};
use crate::qcuts::quantum_cut_with;
use crate::supervoxel::{slic3d_with, supervoxel_means, SlicParams, SupervoxelMap};
use crate::volume::{contrast_adjust, ContrastStatus, SaliencyField, SegmentationMask, Volume};

/// Two-cluster split of a set of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMeans {
    /// Membership in the upper cluster (cluster 1).
    pub upper: Vec<bool>,
    pub centers: [f64; 2],
    /// Cluster with the higher mean, i.e. the solid one.
    pub solid_cluster: usize,
}

impl TwoMeans {
    pub fn solid(&self) -> Vec<bool> {
        self.upper
            .iter()
            .map(|&u| (u as usize) == self.solid_cluster)
            .collect()
    }

    pub fn within_ss(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.upper)
            .map(|(&v, &u)| {
                let d = v - self.centers[u as usize];
                d * d
            })
            .sum()
    }
}

fn lloyd(values: &[f64], mut centers: [f64; 2]) -> TwoMeans {
    let mut upper: Vec<bool> = Vec::new();
    for _ in 0..10_000 {
        // Equidistant points go to the lower center.
        let next: Vec<bool> = values
            .iter()
            .map(|&v| (v - centers[1]).abs() < (v - centers[0]).abs())
            .collect();
        let stable = next == upper;
        upper = next;
        let mut sum = [0.0f64; 2];
        let mut cnt = [0usize; 2];
        for (&v, &u) in values.iter().zip(&upper) {
            sum[u as usize] += v;
            cnt[u as usize] += 1;
        }
        for c in 0..2 {
            if cnt[c] > 0 {
                centers[c] = sum[c] / cnt[c] as f64;
            }
        }
        if stable {
            break;
        }
    }
    let solid_cluster = if centers[1] >= centers[0] { 1 } else { 0 };
    TwoMeans {
        upper,
        centers,
        solid_cluster,
    }
}

/// Best threshold split of sorted `values` by within-cluster sum of squares.
fn best_split_centers(values: &[f64]) -> Option<[f64; 2]> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut prefix = vec![0.0f64; n + 1];
    let mut prefix_sq = vec![0.0f64; n + 1];
    for (i, v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let sse = |a: usize, b: usize| {
        let c = (b - a) as f64;
        let s = prefix[b] - prefix[a];
        prefix_sq[b] - prefix_sq[a] - s * s / c
    };
    let mut best: Option<(f64, usize)> = None;
    for s in 1..n {
        if sorted[s] == sorted[s - 1] {
            continue;
        }
        let cost = sse(0, s) + sse(s, n);
        if best.map_or(true, |(b, _)| cost < b) {
            best = Some((cost, s));
        }
    }
    best.map(|(_, s)| {
        [
            prefix[s] / s as f64,
            (prefix[n] - prefix[s]) / (n - s) as f64,
        ]
    })
}

/// Binary k-means in one dimension.
///
/// Lloyd iterations start from the minimum and maximum and run to a fixed
/// point. If an exhaustive scan of threshold splits finds a strictly better
/// partition, Lloyd is restarted from that partition's centers, so the result
/// is always the globally optimal 2-partition.
pub fn kmeans2(values: &[f64]) -> Result<TwoMeans> {
    if values.len() < 2 {
        return arg_err("k-means needs at least two values");
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite value {v} in k-means input")));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::Degenerate(
            "all values identical; no two-cluster split exists".to_string(),
        ));
    }
    let from_extremes = lloyd(values, [lo, hi]);
    if let Some(centers) = best_split_centers(values) {
        let candidate = lloyd(values, centers);
        if candidate.within_ss(values) < from_extremes.within_ss(values) * (1.0 - 1e-12) {
            return Ok(candidate);
        }
    }
    Ok(from_extremes)
}

/// Broadcasts a per-supervoxel score to every voxel.
pub fn voxelize_saliency(y: &[f64], m: &SupervoxelMap) -> Result<SaliencyField> {
    if y.len() != m.count() {
        return arg_err(format!("{} values for {} supervoxels", y.len(), m.count()));
    }
    let values = m.assignment().iter().map(|&id| y[id as usize]).collect();
    SaliencyField::new(m.dims(), values)
}

/// Broadcasts per-supervoxel solid labels to every voxel.
pub fn voxelize_labels(solid: &[bool], m: &SupervoxelMap) -> Result<SegmentationMask> {
    if solid.len() != m.count() {
        return arg_err(format!("{} labels for {} supervoxels", solid.len(), m.count()));
    }
    let voxels = m.assignment().iter().map(|&id| solid[id as usize]).collect();
    SegmentationMask::new(m.dims(), voxels)
}

/// Solid iff strictly more than half of the masks say solid.
pub fn majority_vote(masks: &[SegmentationMask]) -> Result<SegmentationMask> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Argument("majority vote needs at least one mask".to_string()))?;
    for m in &masks[1..] {
        first.dims().check_same(&m.dims(), "majority_vote")?;
    }
    let mut votes = vec![0u32; first.dims().len()];
    for m in masks {
        for (v, &s) in votes.iter_mut().zip(m.solid()) {
            *v += s as u32;
        }
    }
    let n = masks.len() as u32;
    SegmentationMask::new(first.dims(), votes.iter().map(|&v| 2 * v > n).collect())
}

/// How the seed potential is chosen for each graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSeedRule {
    /// Multiple of the graph's largest weighted degree.
    DegreeMultiple(f64),
    Fixed(f64),
}

impl Default for PhiSeedRule {
    fn default() -> Self {
        PhiSeedRule::DegreeMultiple(10.0)
    }
}

/// Parameters of [`segment_volume`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub scales: Vec<usize>,
    pub sigma: f64,
    pub phi_seed: PhiSeedRule,
    pub axis: Axis,
    pub percentiles: (f64, f64),
    pub kernel: KernelVariant,
    pub slic_max_iter: usize,
    pub eigen_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scales: vec![2000, 4000, 6000, 8000],
            sigma: 0.1,
            phi_seed: PhiSeedRule::default(),
            axis: Axis::Z,
            percentiles: (0.5, 99.5),
            kernel: KernelVariant::Absolute,
            slic_max_iter: 10,
            eigen_tol: 1e-8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return arg_err("at least one supervoxel scale is required");
        }
        if self.scales.contains(&0) {
            return arg_err("supervoxel scales must be >= 1");
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return arg_err(format!("sigma must be positive, got {}", self.sigma));
        }
        match self.phi_seed {
            PhiSeedRule::DegreeMultiple(x) | PhiSeedRule::Fixed(x) if !(x > 0.0) => {
                return arg_err(format!("seed potential must be positive, got {x}"))
            }
            _ => {}
        }
        let (lo, hi) = self.percentiles;
        if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
            return arg_err(format!("bad percentiles ({lo}, {hi})"));
        }
        if self.slic_max_iter == 0 {
            return arg_err("slic_max_iter must be >= 1");
        }
        if !(self.eigen_tol > 0.0) {
            return arg_err("eigen_tol must be positive");
        }
        Ok(())
    }
}

/// Per-scale report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleDiagnostics {
    pub target_k: usize,
    pub supervoxels: usize,
    pub seeds: usize,
    pub eigenvalue: f64,
    pub residual: f64,
    pub operator_applications: usize,
    pub solid_fraction: f64,
    /// No intensity contrast at this scale; everything labelled pore.
    pub degenerate: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: SegmentationMask,
    pub field: SaliencyField,
    pub scales: Vec<ScaleDiagnostics>,
    pub contrast: ContrastStatus,
    pub seconds: f64,
}

struct ScaleResult {
    map: SupervoxelMap,
    saliency: Vec<f64>,
    solid: Vec<bool>,
    diagnostics: ScaleDiagnostics,
}

#[cfg(not(target_arch = "wasm32"))]
fn stopwatch() -> impl Fn() -> f64 {
    let t = std::time::Instant::now();
    move || t.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
fn stopwatch() -> impl Fn() -> f64 {
    || 0.0
}

fn run_scale(v: &Volume, target_k: usize, cfg: &PipelineConfig) -> Result<ScaleResult> {
    let elapsed = stopwatch();
    let mut params = SlicParams::new(target_k);
    params.max_iter = cfg.slic_max_iter;
    let map = slic3d_with(v, &params)?;
    let means = supervoxel_means(v, &map)?;
    let k = map.count();

    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Means of a constant volume can differ in the last bits.
    if hi - lo <= 1e-9 {
        log::warn!("scale {target_k}: supervoxel intensities are constant, labelling all pore");
        return Ok(ScaleResult {
            diagnostics: ScaleDiagnostics {
                target_k,
                supervoxels: k,
                seeds: 0,
                eigenvalue: 0.0,
                residual: 0.0,
                operator_applications: 0,
                solid_fraction: 0.0,
                degenerate: true,
                seconds: elapsed(),
            },
            map,
            saliency: vec![0.0; k],
            solid: vec![false; k],
        });
    }

    let mut graph = build_graph_with(&means, cfg.sigma, cfg.kernel)?;
    let seeds = select_pore_seeds(v, &map, &means, cfg.axis)?;
    let phi = match cfg.phi_seed {
        PhiSeedRule::DegreeMultiple(x) => match graph.max_degree() {
            d if d > 0.0 => x * d,
            _ => default_phi_seed(&graph),
        },
        PhiSeedRule::Fixed(x) => x,
    };
    graph.set_unary(&seeds, phi)?;
    let opts = EigenOptions {
        tol: cfg.eigen_tol,
        ..EigenOptions::default()
    };
    let sal = quantum_cut_with(&graph, &opts)?;

    let (solid, degenerate) = match kmeans2(&sal.values) {
        Ok(split) => (split.solid(), false),
        Err(Error::Degenerate(_)) => (vec![false; k], true),
        Err(e) => return Err(e),
    };
    let solid_voxels: usize = map
        .sizes()
        .iter()
        .zip(&solid)
        .filter(|(_, &s)| s)
        .map(|(&c, _)| c)
        .sum();
    let diagnostics = ScaleDiagnostics {
        target_k,
        supervoxels: k,
        seeds: seeds.len(),
        eigenvalue: sal.eigenvalue,
        residual: sal.residual,
        operator_applications: sal.applications,
        solid_fraction: solid_voxels as f64 / v.dims().len() as f64,
        degenerate,
        seconds: elapsed(),
    };
    Ok(ScaleResult {
        map,
        saliency: sal.values,
        solid,
        diagnostics,
    })
}

/// Full pipeline: contrast stretch, then per scale supervoxels, graph, pore
/// seeds, quantum cut and 2-means; scales are fused by majority vote and the
/// saliency field is the mean of the per-scale voxelized saliencies.
pub fn segment_volume(v: &Volume, cfg: &PipelineConfig) -> Result<Segmentation> {
    cfg.validate()?;
    let elapsed = stopwatch();
    let (adjusted, contrast) = contrast_adjust(v, cfg.percentiles.0, cfg.percentiles.1)?;

    #[cfg(feature = "parallel")]
    let results: Vec<ScaleResult> = cfg
        .scales
        .par_iter()
        .map(|&k| run_scale(&adjusted, k, cfg))
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let results: Vec<ScaleResult> = cfg
        .scales
        .iter()
        .map(|&k| run_scale(&adjusted, k, cfg))
        .collect::<Result<_>>()?;

    // Accumulate in a canonical order so the field does not depend on the
    // order scales were listed in.
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by_key(|&i| cfg.scales[i]);
    let n = v.dims().len();
    let mut votes = vec![0u32; n];
    let mut field = vec![0.0f64; n];
    for &i in &order {
        let r = &results[i];
        for (vox, &id) in r.map.assignment().iter().enumerate() {
            let id = id as usize;
            votes[vox] += r.solid[id] as u32;
            field[vox] += r.saliency[id];
        }
    }
    let scales = results.len() as u32;
    let inv = 1.0 / scales as f64;
    let mask = SegmentationMask::new(v.dims(), votes.iter().map(|&c| 2 * c > scales).collect())?;
    let field = SaliencyField::new(
        v.dims(),
        field.into_iter().map(|s| (s * inv).clamp(0.0, 1.0)).collect(),
    )?;
    Ok(Segmentation {
        mask,
        field,
        scales: results.into_iter().map(|r| r.diagnostics).collect(),
        contrast,
        seconds: elapsed(),
    })
}
