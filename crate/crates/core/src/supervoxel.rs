//! 3D SLIC supervoxels with per-cluster adaptive compactness (SLICO).
//!
//! Each cluster keeps its own compactness weight, set after every iteration
//! to the largest intensity distance observed inside the cluster, so no
//! global compactness parameter needs to be tuned.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{arg_err, Result};
use crate::volume::{Dims, Volume};

/// Dense supervoxel ids for every voxel of a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupervoxelMap {
    dims: Dims,
    assignment: Vec<u32>,
    sizes: Vec<usize>,
}

impl SupervoxelMap {
    /// Validates that ids are dense in `[0, K)` with every id used.
    pub fn from_assignment(dims: Dims, assignment: Vec<u32>) -> Result<Self> {
        dims.validate()?;
        if assignment.len() != dims.len() {
            return arg_err(format!(
                "assignment length {} does not match dims {dims}",
                assignment.len()
            ));
        }
        let k = assignment.iter().map(|&a| a as usize + 1).max().unwrap_or(0);
        let mut sizes = vec![0usize; k];
        for &a in &assignment {
            sizes[a as usize] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return arg_err(format!("supervoxel id {empty} owns no voxels"));
        }
        Ok(SupervoxelMap {
            dims,
            assignment,
            sizes,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Realized supervoxel count K′.
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    #[inline]
    pub fn id_at(&self, x: usize, y: usize, z: usize) -> usize {
        self.assignment[self.dims.index(x, y, z)] as usize
    }

    /// True when the voxels of every supervoxel form one 6-connected set.
    pub fn is_connected(&self) -> bool {
        let (_, comp_label, _) = connected_components(self.dims, &self.assignment);
        comp_label.len() == self.count()
    }
}

/// SLIC parameters. Only `target_k` lacks a sensible default.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicParams {
    pub target_k: usize,
    pub max_iter: usize,
    /// Compactness weight of every cluster during the first iteration.
    pub initial_compactness: f64,
    /// Lower bound on adaptive compactness; keeps the spatial term alive in
    /// perfectly homogeneous clusters.
    pub min_compactness: f64,
    /// Stop early once fewer than this fraction of voxels change cluster.
    pub convergence_fraction: f64,
}

impl SlicParams {
    pub fn new(target_k: usize) -> Self {
        SlicParams {
            target_k,
            max_iter: 10,
            initial_compactness: 0.1,
            min_compactness: 1e-3,
            convergence_fraction: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Center {
    pos: [f64; 3],
    intensity: f64,
}

/// Seed grid: per-axis seed counts and the characteristic step S.
fn grid_layout(dims: Dims, target_k: usize) -> ([usize; 3], f64) {
    let ext = dims.as_array();
    let mut active = [true; 3];
    let step = loop {
        let d = active.iter().filter(|&&a| a).count();
        if d == 0 {
            break 1.0;
        }
        let vol: f64 = (0..3).filter(|&a| active[a]).map(|a| ext[a] as f64).product();
        let s = (vol / target_k as f64).powf(1.0 / d as f64);
        // Axes shorter than one step get a single seed layer; redistribute
        // the budget over the remaining axes.
        let mut changed = false;
        for a in 0..3 {
            if active[a] && (ext[a] as f64) < s {
                active[a] = false;
                changed = true;
            }
        }
        if !changed {
            break s.max(1.0);
        }
    };
    let mut counts = [1usize; 3];
    for a in 0..3 {
        if active[a] {
            counts[a] = ((ext[a] as f64 / step).round() as usize).clamp(1, ext[a]);
        }
    }
    (counts, step)
}

/// Sum of absolute central differences, clamped at the borders.
fn gradient(v: &Volume, x: usize, y: usize, z: usize) -> f64 {
    let d = v.dims();
    let diff = |a: f64, b: f64| (a - b).abs();
    let (xm, xp) = (x.saturating_sub(1), (x + 1).min(d.nx - 1));
    let (ym, yp) = (y.saturating_sub(1), (y + 1).min(d.ny - 1));
    let (zm, zp) = (z.saturating_sub(1), (z + 1).min(d.nz - 1));
    diff(v.get(xp, y, z), v.get(xm, y, z))
        + diff(v.get(x, yp, z), v.get(x, ym, z))
        + diff(v.get(x, y, zp), v.get(x, y, zm))
}

fn lowest_gradient_neighbor(v: &Volume, seed: [usize; 3]) -> [usize; 3] {
    let d = v.dims().as_array();
    let mut best = seed;
    let mut best_g = gradient(v, seed[0], seed[1], seed[2]);
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let p = [seed[0] as i64 + dx, seed[1] as i64 + dy, seed[2] as i64 + dz];
                if (0..3).any(|a| p[a] < 0 || p[a] >= d[a] as i64) {
                    continue;
                }
                let p = [p[0] as usize, p[1] as usize, p[2] as usize];
                let g = gradient(v, p[0], p[1], p[2]);
                if g < best_g {
                    best_g = g;
                    best = p;
                }
            }
        }
    }
    best
}

/// Runs SLIC with default parameters apart from `target_k` and `max_iter`.
pub fn slic3d(v: &Volume, target_k: usize, max_iter: usize) -> Result<SupervoxelMap> {
    let mut p = SlicParams::new(target_k);
    p.max_iter = max_iter;
    slic3d_with(v, &p)
}

pub fn slic3d_with(v: &Volume, params: &SlicParams) -> Result<SupervoxelMap> {
    let dims = v.dims();
    let n = dims.len();
    if params.target_k == 0 {
        return arg_err("target supervoxel count must be >= 1");
    }
    if params.target_k > n {
        return arg_err(format!(
            "target supervoxel count {} exceeds voxel count {n}",
            params.target_k
        ));
    }
    if params.max_iter == 0 {
        return arg_err("max_iter must be >= 1");
    }

    let (counts, step) = grid_layout(dims, params.target_k);
    let ext = dims.as_array();
    let k_total = counts[0] * counts[1] * counts[2];

    let mut centers = Vec::with_capacity(k_total);
    for cz in 0..counts[2] {
        for cy in 0..counts[1] {
            for cx in 0..counts[0] {
                let c = [cx, cy, cz];
                let seed: [usize; 3] =
                    std::array::from_fn(|a| ((c[a] as f64 + 0.5) * ext[a] as f64 / counts[a] as f64) as usize);
                let p = lowest_gradient_neighbor(v, seed);
                centers.push(Center {
                    pos: [p[0] as f64, p[1] as f64, p[2] as f64],
                    intensity: v.get(p[0], p[1], p[2]),
                });
            }
        }
    }

    // Grid cells give every voxel a label before the first sweep; voxels no
    // window reaches keep their previous label.
    let cell_of = |i: usize, a: usize| i * counts[a] / ext[a];
    let mut labels = vec![0u32; n];
    for (i, l) in labels.iter_mut().enumerate() {
        let (x, y, z) = dims.coords(i);
        *l = (cell_of(x, 0) + counts[0] * (cell_of(y, 1) + counts[1] * cell_of(z, 2))) as u32;
    }

    let half: [f64; 3] = std::array::from_fn(|a| {
        if counts[a] == 1 {
            ext[a] as f64
        } else {
            step.max(ext[a] as f64 / counts[a] as f64)
        }
    });
    let mut compactness = vec![params.initial_compactness; k_total];
    let mut best = vec![f64::INFINITY; n];
    let plane = dims.nx * dims.ny;

    for iter in 0..params.max_iter {
        let windows: Vec<[[usize; 2]; 3]> = centers
            .iter()
            .map(|c| {
                std::array::from_fn(|a| {
                    let lo = (c.pos[a] - half[a]).ceil().max(0.0) as usize;
                    let hi = ((c.pos[a] + half[a]).floor() as usize).min(ext[a] - 1);
                    [lo, hi]
                })
            })
            .collect();
        let weights: Vec<f64> = compactness
            .iter()
            .map(|&m| (m / step) * (m / step))
            .collect();
        best.fill(f64::INFINITY);

        let voxels = v.voxels();
        let sweep_plane = |z: usize, lab: &mut [u32], dist: &mut [f64]| -> usize {
            let before = lab.to_vec();
            let base = z * plane;
            for (k, (c, w)) in centers.iter().zip(&windows).enumerate() {
                if z < w[2][0] || z > w[2][1] {
                    continue;
                }
                let dz = z as f64 - c.pos[2];
                let f = weights[k];
                for y in w[1][0]..=w[1][1] {
                    let dy = y as f64 - c.pos[1];
                    let dyz = dy * dy + dz * dz;
                    let row = y * dims.nx;
                    for x in w[0][0]..=w[0][1] {
                        let dx = x as f64 - c.pos[0];
                        let dc = voxels[base + row + x] - c.intensity;
                        let d = dc * dc + f * (dx * dx + dyz);
                        if d < dist[row + x] {
                            dist[row + x] = d;
                            lab[row + x] = k as u32;
                        }
                    }
                }
            }
            before.iter().zip(lab.iter()).filter(|(a, b)| a != b).count()
        };

        #[cfg(feature = "parallel")]
        let changed: usize = labels
            .par_chunks_mut(plane)
            .zip(best.par_chunks_mut(plane))
            .enumerate()
            .map(|(z, (lab, dist))| sweep_plane(z, lab, dist))
            .sum();
        #[cfg(not(feature = "parallel"))]
        let changed: usize = labels
            .chunks_mut(plane)
            .zip(best.chunks_mut(plane))
            .enumerate()
            .map(|(z, (lab, dist))| sweep_plane(z, lab, dist))
            .sum();

        // Center update plus next-iteration compactness.
        let mut sums = vec![[0.0f64; 5]; k_total];
        let mut max_dc = vec![0.0f64; k_total];
        for (i, (&l, &val)) in labels.iter().zip(voxels).enumerate() {
            let (x, y, z) = dims.coords(i);
            let k = l as usize;
            let s = &mut sums[k];
            s[0] += x as f64;
            s[1] += y as f64;
            s[2] += z as f64;
            s[3] += val;
            s[4] += 1.0;
            max_dc[k] = max_dc[k].max((val - centers[k].intensity).abs());
        }
        for k in 0..k_total {
            let s = sums[k];
            if s[4] > 0.0 {
                centers[k] = Center {
                    pos: [s[0] / s[4], s[1] / s[4], s[2] / s[4]],
                    intensity: s[3] / s[4],
                };
            }
            compactness[k] = max_dc[k].max(params.min_compactness);
        }

        log::debug!("slic iter {iter}: {changed} voxels changed");
        if iter > 0 && (changed as f64) < params.convergence_fraction * n as f64 {
            break;
        }
    }

    Ok(enforce_connectivity(dims, &labels))
}

/// 6-connected components of equal labels.
///
/// Returns per-voxel component ids (numbered in raster order of their first
/// voxel), each component's label and each component's size.
fn connected_components(dims: Dims, labels: &[u32]) -> (Vec<u32>, Vec<u32>, Vec<usize>) {
    const UNSET: u32 = u32::MAX;
    let n = dims.len();
    let mut comp = vec![UNSET; n];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != UNSET {
            continue;
        }
        let id = comp_label.len() as u32;
        let lab = labels[start];
        comp[start] = id;
        stack.push(start);
        let mut size = 0usize;
        while let Some(i) = stack.pop() {
            size += 1;
            for j in neighbors6(dims, i) {
                if comp[j] == UNSET && labels[j] == lab {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        comp_label.push(lab);
        comp_size.push(size);
    }
    (comp, comp_label, comp_size)
}

#[inline]
fn neighbors6(dims: Dims, i: usize) -> impl Iterator<Item = usize> {
    let (x, y, z) = dims.coords(i);
    let plane = dims.nx * dims.ny;
    [
        (x > 0).then(|| i - 1),
        (x + 1 < dims.nx).then(|| i + 1),
        (y > 0).then(|| i - dims.nx),
        (y + 1 < dims.ny).then(|| i + dims.nx),
        (z > 0).then(|| i - plane),
        (z + 1 < dims.nz).then(|| i + plane),
    ]
    .into_iter()
    .flatten()
}

fn find(parent: &mut [u32], mut a: u32) -> u32 {
    while parent[a as usize] != a {
        let p = parent[a as usize];
        parent[a as usize] = parent[p as usize];
        a = p;
    }
    a
}

/// Keeps the largest fragment of every cluster and merges each remaining
/// fragment into the largest adjacent supervoxel, then renumbers densely.
fn enforce_connectivity(dims: Dims, labels: &[u32]) -> SupervoxelMap {
    let (comp, comp_label, comp_size) = connected_components(dims, labels);
    let n_comp = comp_label.len();

    let max_label = comp_label.iter().copied().max().unwrap_or(0) as usize;
    let mut keeper: Vec<Option<u32>> = vec![None; max_label + 1];
    for c in 0..n_comp {
        let slot = &mut keeper[comp_label[c] as usize];
        match slot {
            Some(k) if comp_size[*k as usize] >= comp_size[c] => {}
            _ => *slot = Some(c as u32),
        }
    }
    let is_orphan: Vec<bool> = (0..n_comp)
        .map(|c| keeper[comp_label[c] as usize] != Some(c as u32))
        .collect();

    let mut orphan_slot = vec![usize::MAX; n_comp];
    let mut adjacency: Vec<Vec<u32>> = Vec::new();
    for c in 0..n_comp {
        if is_orphan[c] {
            orphan_slot[c] = adjacency.len();
            adjacency.push(Vec::new());
        }
    }
    if !adjacency.is_empty() {
        for i in 0..dims.len() {
            let c = comp[i] as usize;
            if !is_orphan[c] {
                continue;
            }
            for j in neighbors6(dims, i) {
                if comp[j] as usize != c {
                    adjacency[orphan_slot[c]].push(comp[j]);
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
    }

    let mut parent: Vec<u32> = (0..n_comp as u32).collect();
    let mut group_size = comp_size.clone();
    for c in 0..n_comp {
        if !is_orphan[c] {
            continue;
        }
        let rc = find(&mut parent, c as u32);
        let mut target: Option<u32> = None;
        for &a in &adjacency[orphan_slot[c]] {
            let ra = find(&mut parent, a);
            if ra == rc {
                continue;
            }
            let better = match target {
                None => true,
                Some(t) => {
                    let (sa, st) = (group_size[ra as usize], group_size[t as usize]);
                    sa > st || (sa == st && ra < t)
                }
            };
            if better {
                target = Some(ra);
            }
        }
        if let Some(t) = target {
            parent[rc as usize] = t;
            group_size[t as usize] += group_size[rc as usize];
        }
    }

    let mut dense = vec![u32::MAX; n_comp];
    let mut next = 0u32;
    let mut assignment = Vec::with_capacity(dims.len());
    let mut sizes = Vec::new();
    for &c in &comp {
        let r = find(&mut parent, c) as usize;
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
            sizes.push(0);
        }
        assignment.push(dense[r]);
        sizes[dense[r] as usize] += 1;
    }
    SupervoxelMap {
        dims,
        assignment,
        sizes,
    }
}

/// Mean intensity of each supervoxel.
pub fn supervoxel_means(v: &Volume, m: &SupervoxelMap) -> Result<Vec<f64>> {
    v.dims().check_same(&m.dims(), "supervoxel_means")?;
    let mut sums = vec![0.0f64; m.count()];
    for (&id, &val) in m.assignment().iter().zip(v.voxels()) {
        sums[id as usize] += val;
    }
    let means = sums
        .iter()
        .zip(m.sizes())
        .map(|(&s, &c)| (s / c as f64).clamp(0.0, 1.0))
        .collect();
    Ok(means)
}

/// Fraction of voxels of each supervoxel for which `pred` holds.
pub fn supervoxel_fraction(
    m: &SupervoxelMap,
    dims: Dims,
    pred: impl Fn(usize) -> bool,
) -> Result<Vec<f64>> {
    dims.check_same(&m.dims(), "supervoxel_fraction")?;
    let mut hits = vec![0usize; m.count()];
    for (i, &id) in m.assignment().iter().enumerate() {
        if pred(i) {
            hits[id as usize] += 1;
        }
    }
    Ok(hits
        .iter()
        .zip(m.sizes())
        .map(|(&h, &s)| h as f64 / s as f64)
        .collect())
}

impl From<SupervoxelMap> for Vec<u32> {
    fn from(m: SupervoxelMap) -> Self {
        m.assignment
    }
}
