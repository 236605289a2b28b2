//! Synthetic sphere-pack volumes with exact voxel labels.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::volume::{Dims, LabelVolume, Volume};

const MAX_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Gas = 0,
    Water = 1,
    Oil = 2,
    Solid = 3,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Gas, Phase::Water, Phase::Oil, Phase::Solid];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Gas => "gas",
            Phase::Water => "water",
            Phase::Oil => "oil",
            Phase::Solid => "solid",
        }
    }

    pub fn codebook() -> BTreeMap<u8, String> {
        Phase::ALL
            .iter()
            .map(|p| (p.code(), p.name().to_string()))
            .collect()
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Phase::ALL
            .into_iter()
            .find(|p| p.name() == s || p.code().to_string() == s)
            .ok_or_else(|| Error::Argument(format!("unknown phase `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseIntensities {
    pub gas: f64,
    pub water: f64,
    pub oil: f64,
    pub solid: f64,
}

impl Default for PhaseIntensities {
    fn default() -> Self {
        PhaseIntensities {
            gas: 0.10,
            water: 0.35,
            oil: 0.55,
            solid: 0.90,
        }
    }
}

impl PhaseIntensities {
    pub fn of(&self, p: Phase) -> f64 {
        match p {
            Phase::Gas => self.gas,
            Phase::Water => self.water,
            Phase::Oil => self.oil,
            Phase::Solid => self.solid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub size: usize,
    pub grain_count: usize,
    pub radius_range: (f64, f64),
    pub intensities: PhaseIntensities,
    pub noise_sigma: f64,
    pub blur_sigma: f64,
    pub seed: u64,
    /// Allowed interpenetration of two grains as a fraction of the sum of
    /// their radii.
    pub max_overlap: f64,
    /// Phases sharing the pore space. Gas fills anything not reached.
    pub pore_phases: Vec<Phase>,
    /// Region-growth seeds per pore phase.
    pub seeds_per_phase: usize,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            size: 64,
            grain_count: 150,
            radius_range: (5.0, 8.0),
            intensities: PhaseIntensities::default(),
            noise_sigma: 0.0,
            blur_sigma: 0.0,
            seed: 0,
            max_overlap: 0.3,
            pore_phases: vec![Phase::Gas, Phase::Water, Phase::Oil],
            seeds_per_phase: 4,
        }
    }
}

impl PhantomSpec {
    /// Solid grains in a single gas phase.
    pub fn two_phase(size: usize, grain_count: usize, seed: u64) -> Self {
        PhantomSpec {
            size,
            grain_count,
            seed,
            pore_phases: vec![Phase::Gas],
            ..PhantomSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return arg_err("phantom size must be >= 1");
        }
        let (r_min, r_max) = self.radius_range;
        if !(r_min > 0.0) || r_min > r_max || !(r_max < self.size as f64 / 2.0) {
            return arg_err(format!(
                "radius range ({r_min}, {r_max}) must satisfy 0 < min <= max < size/2 = {}",
                self.size as f64 / 2.0
            ));
        }
        let i = &self.intensities;
        let ordered = [i.gas, i.water, i.oil, i.solid];
        if ordered.iter().any(|v| !(0.0..=1.0).contains(v))
            || ordered.windows(2).any(|w| w[0] >= w[1])
        {
            return arg_err(format!(
                "phase intensities must increase gas < water < oil < solid within [0, 1], got {ordered:?}"
            ));
        }
        if !(self.noise_sigma >= 0.0) || !(self.blur_sigma >= 0.0) {
            return arg_err("noise and blur sigmas must be non-negative");
        }
        if !(0.0..1.0).contains(&self.max_overlap) {
            return arg_err(format!("max_overlap {} outside [0, 1)", self.max_overlap));
        }
        if self.pore_phases.is_empty() || self.pore_phases.contains(&Phase::Solid) {
            return arg_err("pore phases must be a non-empty subset of gas, water, oil");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grain {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Grain {
    fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let d = [
            x as f64 - self.center[0],
            y as f64 - self.center[1],
            z as f64 - self.center[2],
        ];
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= self.radius * self.radius
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: Volume,
    pub labels: LabelVolume,
    pub grains: Vec<Grain>,
}

impl Phantom {
    /// Analytic volume fraction of the grains, ignoring overlaps.
    pub fn analytic_solid_fraction(&self) -> f64 {
        let n = self.volume.dims().len() as f64;
        self.grains
            .iter()
            .map(|g| 4.0 / 3.0 * std::f64::consts::PI * g.radius.powi(3))
            .sum::<f64>()
            / n
    }
}

fn place_grains(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Grain>> {
    let (r_min, r_max) = spec.radius_range;
    let hi = (spec.size - 1) as f64;
    let mut grains: Vec<Grain> = Vec::with_capacity(spec.grain_count);
    let mut attempts = 0;
    while grains.len() < spec.grain_count {
        if attempts == MAX_ATTEMPTS {
            return Err(Error::Placement(format!(
                "placed {} of {} grains in {MAX_ATTEMPTS} attempts; try smaller radii or fewer grains",
                grains.len(),
                spec.grain_count
            )));
        }
        attempts += 1;
        let radius = if r_max > r_min {
            rng.random_range(r_min..r_max)
        } else {
            r_min
        };
        let mut center = [0.0; 3];
        for c in &mut center {
            *c = rng.random_range(radius..=hi - radius);
        }
        let fits = grains.iter().all(|g| {
            let d2: f64 = (0..3).map(|a| (g.center[a] - center[a]).powi(2)).sum();
            let min_d = (1.0 - spec.max_overlap) * (g.radius + radius);
            d2 >= min_d * min_d
        });
        if fits {
            grains.push(Grain { center, radius });
        }
    }
    Ok(grains)
}

fn rasterize(dims: Dims, grains: &[Grain], labels: &mut [u8]) {
    let solid = Phase::Solid.code();
    for g in grains {
        let lo = |c: f64| (c - g.radius).ceil().max(0.0) as usize;
        let hi = |c: f64, n: usize| ((c + g.radius).floor() as usize).min(n - 1);
        for z in lo(g.center[2])..=hi(g.center[2], dims.nz) {
            for y in lo(g.center[1])..=hi(g.center[1], dims.ny) {
                for x in lo(g.center[0])..=hi(g.center[0], dims.nx) {
                    if g.contains(x, y, z) {
                        labels[dims.index(x, y, z)] = solid;
                    }
                }
            }
        }
    }
}

/// Multi-source breadth-first growth of the pore phases through pore space.
fn grow_pore_phases(dims: Dims, spec: &PhantomSpec, rng: &mut ChaCha8Rng, labels: &mut [u8]) {
    const UNSET: u8 = u8::MAX;
    let solid = Phase::Solid.code();
    if spec.pore_phases.len() == 1 {
        let code = spec.pore_phases[0].code();
        labels.iter_mut().filter(|l| **l != solid).for_each(|l| *l = code);
        return;
    }
    let pores: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != solid).collect();
    for l in labels.iter_mut().filter(|l| **l != solid) {
        *l = UNSET;
    }
    let mut queue = VecDeque::new();
    if !pores.is_empty() {
        for _ in 0..spec.seeds_per_phase {
            for p in &spec.pore_phases {
                let i = pores[rng.random_range(0..pores.len())];
                if labels[i] == UNSET {
                    labels[i] = p.code();
                    queue.push_back(i);
                }
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y, z) = dims.coords(i);
        let code = labels[i];
        let mut visit = |j: usize| {
            if labels[j] == UNSET {
                labels[j] = code;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < dims.nx {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - dims.nx);
        }
        if y + 1 < dims.ny {
            visit(i + dims.nx);
        }
        if z > 0 {
            visit(i - dims.nx * dims.ny);
        }
        if z + 1 < dims.nz {
            visit(i + dims.nx * dims.ny);
        }
    }
    let gas = Phase::Gas.code();
    for l in labels.iter_mut().filter(|l| **l == UNSET) {
        *l = gas;
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with clamped borders.
fn blur(dims: Dims, data: &mut Vec<f64>, sigma: f64) {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let lens = [dims.nx, dims.ny, dims.nz];
    let strides = [1, dims.nx, dims.nx * dims.ny];
    for axis in 0..3 {
        let n = lens[axis] as isize;
        let stride = strides[axis];
        let mut out = vec![0.0; data.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let pos = ((i / stride) % lens[axis]) as isize;
            let base = i as isize - pos * stride as isize;
            *o = k
                .iter()
                .enumerate()
                .map(|(t, w)| {
                    let p = (pos + t as isize - r).clamp(0, n - 1);
                    w * data[(base + p * stride as isize) as usize]
                })
                .sum();
        }
        *data = out;
    }
}

pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let dims = Dims::cube(spec.size);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let grains = place_grains(spec, &mut rng)?;

    let mut labels = vec![Phase::Gas.code(); dims.len()];
    rasterize(dims, &grains, &mut labels);
    grow_pore_phases(dims, spec, &mut rng, &mut labels);
    // Gas is always listed: it fills whatever region growth does not reach.
    let codebook: BTreeMap<u8, String> = Phase::ALL
        .iter()
        .filter(|p| matches!(p, Phase::Gas | Phase::Solid) || spec.pore_phases.contains(p))
        .map(|p| (p.code(), p.name().to_string()))
        .collect();

    let by_code: Vec<f64> = Phase::ALL.iter().map(|&p| spec.intensities.of(p)).collect();
    let mut voxels: Vec<f64> = labels.iter().map(|&c| by_code[c as usize]).collect();
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::Argument(format!("noise sigma: {e}")))?;
        for v in voxels.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    if spec.blur_sigma > 0.0 {
        blur(dims, &mut voxels, spec.blur_sigma);
    }
    voxels.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));

    Ok(Phantom {
        volume: Volume::new(dims, voxels)?,
        labels: LabelVolume::new(dims, labels, codebook)?,
        grains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_grains_is_all_pore() {
        let mut spec = PhantomSpec::two_phase(16, 0, 1);
        spec.radius_range = (2.0, 3.0);
        let p = generate(&spec).unwrap();
        assert!(p.labels.labels().iter().all(|&c| c == Phase::Gas.code()));
        assert!(p.volume.voxels().iter().all(|&v| v == 0.10));
    }

    #[test]
    fn noiseless_takes_phase_means() {
        let p = generate(&PhantomSpec::default()).unwrap();
        let i = PhaseIntensities::default();
        for (&c, &v) in p.labels.labels().iter().zip(p.volume.voxels()) {
            assert_eq!(v, i.of(Phase::ALL[c as usize]));
        }
        let present: std::collections::BTreeSet<u8> = p.labels.labels().iter().copied().collect();
        assert_eq!(present.len(), 4);
    }

    #[test]
    fn deterministic_for_seed() {
        let mut spec = PhantomSpec::default();
        spec.noise_sigma = 0.05;
        spec.blur_sigma = 1.0;
        spec.seed = 7;
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.volume, b.volume);
        assert_eq!(a.labels, b.labels);
        spec.seed = 8;
        assert_ne!(generate(&spec).unwrap().volume, a.volume);
    }

    #[test]
    fn grains_inside_and_separated() {
        let spec = PhantomSpec::default();
        let p = generate(&spec).unwrap();
        assert_eq!(p.grains.len(), spec.grain_count);
        let hi = (spec.size - 1) as f64;
        for (i, a) in p.grains.iter().enumerate() {
            for c in a.center {
                assert!(c - a.radius >= 0.0 && c + a.radius <= hi);
            }
            for b in &p.grains[..i] {
                let d: f64 = (0..3).map(|k| (a.center[k] - b.center[k]).powi(2)).sum::<f64>().sqrt();
                assert!(d >= 0.7 * (a.radius + b.radius) - 1e-12);
            }
        }
    }

    #[test]
    fn placement_failure_is_reported() {
        let mut spec = PhantomSpec::two_phase(16, 500, 0);
        spec.radius_range = (7.0, 7.5);
        spec.max_overlap = 0.0;
        assert!(matches!(generate(&spec), Err(Error::Placement(_))));
    }

    #[test]
    fn invalid_specs() {
        let mut spec = PhantomSpec::default();
        spec.radius_range = (5.0, 32.0);
        assert!(generate(&spec).is_err());
        let mut spec = PhantomSpec::default();
        spec.intensities.water = 0.6;
        assert!(generate(&spec).is_err());
        let mut spec = PhantomSpec::default();
        spec.pore_phases = vec![Phase::Solid];
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn blur_preserves_constant_and_mass() {
        let dims = Dims::cube(8);
        let mut c = vec![0.4; dims.len()];
        blur(dims, &mut c, 1.3);
        assert!(c.iter().all(|v| (v - 0.4).abs() < 1e-12));
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
