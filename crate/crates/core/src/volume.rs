//! Voxel grids: grayscale volumes, multiphase label volumes and binary masks.
//!
//! All grids store voxels contiguously with x varying fastest, then y, then z.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

/// Grid extent along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl From<[usize; 3]> for Dims {
    fn from(d: [usize; 3]) -> Self {
        Dims::new(d[0], d[1], d[2])
    }
}

impl From<Dims> for [usize; 3] {
    fn from(d: Dims) -> Self {
        [d.nx, d.ny, d.nz]
    }
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub const fn cube(n: usize) -> Self {
        Dims::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return arg_err(format!("dims must all be >= 1, got {self}"));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let x = i % self.nx;
        let r = i / self.nx;
        (x, r % self.ny, r / self.ny)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub(crate) fn check_same(&self, other: &Dims, what: &str) -> Result<()> {
        if self != other {
            return arg_err(format!("{what}: dims mismatch ({self} vs {other})"));
        }
        Ok(())
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Scalar intensity field with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims,
    voxels: Vec<f64>,
    spacing: Option<[f64; 3]>,
}

impl Volume {
    /// Wraps a voxel buffer. Every value must be finite and lie in [0, 1].
    pub fn new(dims: Dims, voxels: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if voxels.len() != dims.len() {
            return arg_err(format!(
                "voxel count {} does not match dims {dims}",
                voxels.len()
            ));
        }
        if let Some(i) = voxels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite intensity at voxel {i}")));
        }
        if let Some(i) = voxels.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data(format!(
                "intensity {} at voxel {i} outside [0, 1]",
                voxels[i]
            )));
        }
        Ok(Volume {
            dims,
            voxels,
            spacing: None,
        })
    }

    pub fn filled(dims: Dims, value: f64) -> Result<Self> {
        Volume::new(dims, vec![value; dims.len()])
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut voxels = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    voxels.push(f(x, y, z));
                }
            }
        }
        Volume::new(dims, voxels)
    }

    pub fn with_spacing(mut self, spacing: Option<[f64; 3]>) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxels(&self) -> &[f64] {
        &self.voxels
    }

    pub fn spacing(&self) -> Option<[f64; 3]> {
        self.spacing
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.voxels[self.dims.index(x, y, z)]
    }

    pub fn into_voxels(self) -> Vec<f64> {
        self.voxels
    }
}

/// Outcome of [`contrast_adjust`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContrastStatus {
    /// Intensities were stretched from `[low, high]` onto [0, 1].
    Stretched { low: f64, high: f64 },
    /// Both percentiles coincide; the volume was returned untouched.
    Constant { value: f64 },
}

/// Percentile of `values` with linear interpolation between order statistics.
///
/// `values` is reordered in place.
pub(crate) fn percentile_in_place(values: &mut [f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let rank = p / 100.0 * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let (_, &mut a, rest) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || rest.is_empty() {
        return a;
    }
    let b = rest.iter().copied().fold(f64::INFINITY, f64::min);
    a + frac * (b - a)
}

/// Linear percentile stretch: values at or below the `p_low` percentile map
/// to 0, values at or above the `p_high` percentile map to 1.
pub fn contrast_adjust(v: &Volume, p_low: f64, p_high: f64) -> Result<(Volume, ContrastStatus)> {
    if !(0.0..=100.0).contains(&p_low) || !(0.0..=100.0).contains(&p_high) || p_low >= p_high {
        return arg_err(format!(
            "percentiles must satisfy 0 <= low < high <= 100, got ({p_low}, {p_high})"
        ));
    }
    let mut scratch = v.voxels.clone();
    let low = percentile_in_place(&mut scratch, p_low);
    let high = percentile_in_place(&mut scratch, p_high);
    drop(scratch);

    if high <= low {
        log::warn!("contrast adjustment skipped: intensity percentiles coincide at {low}");
        return Ok((v.clone(), ContrastStatus::Constant { value: low }));
    }
    let scale = 1.0 / (high - low);
    let voxels = v
        .voxels
        .iter()
        .map(|&x| ((x - low) * scale).clamp(0.0, 1.0))
        .collect();
    let out = Volume {
        dims: v.dims,
        voxels,
        spacing: v.spacing,
    };
    Ok((out, ContrastStatus::Stretched { low, high }))
}

/// Per-voxel phase codes plus the code-to-name table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: Dims,
    labels: Vec<u8>,
    codebook: BTreeMap<u8, String>,
}

impl LabelVolume {
    pub fn new(dims: Dims, labels: Vec<u8>, codebook: BTreeMap<u8, String>) -> Result<Self> {
        dims.validate()?;
        if labels.len() != dims.len() {
            return arg_err(format!(
                "label count {} does not match dims {dims}",
                labels.len()
            ));
        }
        if let Some(bad) = labels.iter().find(|c| !codebook.contains_key(c)) {
            return Err(Error::Data(format!("label {bad} missing from codebook")));
        }
        Ok(LabelVolume {
            dims,
            labels,
            codebook,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn codebook(&self) -> &BTreeMap<u8, String> {
        &self.codebook
    }

    /// Looks up a phase code by its name.
    pub fn code_of(&self, name: &str) -> Option<u8> {
        self.codebook
            .iter()
            .find(|(_, n)| n.eq_ignore_ascii_case(name))
            .map(|(&c, _)| c)
    }
}

/// Binary solid/pore labelling of a voxel grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    dims: Dims,
    solid: Vec<bool>,
}

impl SegmentationMask {
    pub fn new(dims: Dims, solid: Vec<bool>) -> Result<Self> {
        dims.validate()?;
        if solid.len() != dims.len() {
            return arg_err(format!(
                "mask length {} does not match dims {dims}",
                solid.len()
            ));
        }
        Ok(SegmentationMask { dims, solid })
    }

    pub fn filled(dims: Dims, solid: bool) -> Result<Self> {
        SegmentationMask::new(dims, vec![solid; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn solid(&self) -> &[bool] {
        &self.solid
    }

    pub fn solid_count(&self) -> usize {
        self.solid.iter().filter(|&&s| s).count()
    }

    pub fn solid_fraction(&self) -> f64 {
        self.solid_count() as f64 / self.solid.len() as f64
    }

    pub fn complement(&self) -> SegmentationMask {
        SegmentationMask {
            dims: self.dims,
            solid: self.solid.iter().map(|s| !s).collect(),
        }
    }
}

/// Per-voxel solid likelihood in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyField {
    dims: Dims,
    values: Vec<f64>,
}

impl SaliencyField {
    pub fn new(dims: Dims, values: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if values.len() != dims.len() {
            return arg_err(format!(
                "field length {} does not match dims {dims}",
                values.len()
            ));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("saliency value {v} outside [0, 1]")));
        }
        Ok(SaliencyField { dims, values })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Solid iff the voxel's phase code equals `solid_code`; every other phase
/// (gas, water, oil) counts as pore.
pub fn binarize_ground_truth(gt: &LabelVolume, solid_code: u8) -> Result<SegmentationMask> {
    if !gt.codebook.contains_key(&solid_code) {
        return arg_err(format!("solid code {solid_code} not present in codebook"));
    }
    let solid = gt.labels.iter().map(|&c| c == solid_code).collect();
    SegmentationMask::new(gt.dims, solid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_phase_codebook() -> BTreeMap<u8, String> {
        [(0, "gas"), (1, "water"), (2, "oil"), (3, "solid")]
            .into_iter()
            .map(|(c, n)| (c, n.to_string()))
            .collect()
    }

    #[test]
    fn dims_index_roundtrip() {
        let d = Dims::new(3, 4, 5);
        for i in 0..d.len() {
            let (x, y, z) = d.coords(i);
            assert_eq!(d.index(x, y, z), i);
        }
        assert!(Dims::new(0, 1, 1).validate().is_err());
    }

    #[test]
    fn volume_rejects_bad_values() {
        let d = Dims::new(2, 1, 1);
        assert!(matches!(
            Volume::new(d, vec![0.0, f64::NAN]),
            Err(Error::Data(_))
        ));
        assert!(matches!(Volume::new(d, vec![0.0, 1.5]), Err(Error::Data(_))));
        assert!(matches!(Volume::new(d, vec![0.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn contrast_full_range_is_identity() {
        let v = Volume::new(Dims::new(3, 1, 1), vec![0.0, 0.5, 1.0]).unwrap();
        let (out, status) = contrast_adjust(&v, 0.0, 100.0).unwrap();
        assert_eq!(out.voxels(), v.voxels());
        assert_eq!(status, ContrastStatus::Stretched { low: 0.0, high: 1.0 });
    }

    #[test]
    fn contrast_constant_volume_is_flagged() {
        let v = Volume::filled(Dims::cube(3), 0.3).unwrap();
        let (out, status) = contrast_adjust(&v, 0.5, 99.5).unwrap();
        assert_eq!(out, v);
        assert_eq!(status, ContrastStatus::Constant { value: 0.3 });
    }

    #[test]
    fn contrast_affine_span() {
        // 0.2 .. 0.8 in 7 equal steps maps onto 0 .. 1 in the same steps.
        let vals: Vec<f64> = (0..7).map(|i| 0.2 + 0.1 * i as f64).collect();
        let v = Volume::new(Dims::new(7, 1, 1), vals).unwrap();
        let (out, _) = contrast_adjust(&v, 0.0, 100.0).unwrap();
        for (i, &o) in out.voxels().iter().enumerate() {
            assert!((o - i as f64 / 6.0).abs() < 1e-12, "{i}: {o}");
        }
    }

    #[test]
    fn contrast_rejects_bad_percentiles() {
        let v = Volume::filled(Dims::cube(2), 0.5).unwrap();
        assert!(contrast_adjust(&v, 50.0, 50.0).is_err());
        assert!(contrast_adjust(&v, -1.0, 50.0).is_err());
        assert!(contrast_adjust(&v, 10.0, 101.0).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile_in_place(&mut v, 0.0), 1.0);
        assert_eq!(percentile_in_place(&mut v, 100.0), 4.0);
        assert!((percentile_in_place(&mut v, 50.0) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn binarize_marks_solid_only() {
        let d = Dims::new(4, 2, 1);
        let labels = vec![0, 1, 2, 3, 3, 2, 1, 0];
        let gt = LabelVolume::new(d, labels.clone(), four_phase_codebook()).unwrap();
        let m = binarize_ground_truth(&gt, 3).unwrap();
        let expected: Vec<bool> = labels.iter().map(|&l| l == 3).collect();
        assert_eq!(m.solid(), expected.as_slice());

        let all = LabelVolume::new(d, vec![3; 8], four_phase_codebook()).unwrap();
        assert_eq!(binarize_ground_truth(&all, 3).unwrap().solid_count(), 8);
        let none = LabelVolume::new(d, vec![1; 8], four_phase_codebook()).unwrap();
        assert_eq!(binarize_ground_truth(&none, 3).unwrap().solid_count(), 0);
        assert!(binarize_ground_truth(&none, 9).is_err());
    }

    #[test]
    fn label_volume_checks_codebook() {
        let d = Dims::new(2, 1, 1);
        assert!(matches!(
            LabelVolume::new(d, vec![0, 7], four_phase_codebook()),
            Err(Error::Data(_))
        ));
    }
}
