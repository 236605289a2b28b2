//! Fully connected supervoxel graph and its Hamiltonian `D - W + V`.
//!
//! Edge weights depend only on the absolute difference of node intensities,
//! `w_ij = exp(-|s_i - s_j| / (2 sigma^2))`. That is a one-dimensional Laplace
//! kernel: once nodes are sorted by intensity, `W z` splits into a left and a
//! right exponentially decayed running sum, so a matrix-vector product costs
//! O(n) instead of O(n^2). The dense product is kept as the reference path and
//! is the only path for the squared-exponent variant.

use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::LinearOperator;
use crate::error::{arg_err, Error, Result};
use crate::supervoxel::SupervoxelMap;
use crate::volume::Volume;

/// Exponent used by the edge kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelVariant {
    /// `exp(-|s_i - s_j| / 2 sigma^2)`.
    #[default]
    Absolute,
    /// `exp(-|s_i - s_j|^2 / 2 sigma^2)`; dense operator only.
    Squared,
}

impl FromStr for KernelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "absolute" | "abs" => Ok(KernelVariant::Absolute),
            "squared" | "sq" => Ok(KernelVariant::Squared),
            other => arg_err(format!("unknown kernel variant `{other}`")),
        }
    }
}

/// Longitudinal axis used for pore-seed scanning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" | "0" => Ok(Axis::X),
            "y" | "1" => Ok(Axis::Y),
            "z" | "2" => Ok(Axis::Z),
            other => arg_err(format!("unknown axis `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SupervoxelGraph {
    intensities: Vec<f64>,
    sigma: f64,
    variant: KernelVariant,
    /// Nodes by ascending intensity, ties by id.
    order: Vec<usize>,
    /// `decay[r]`: weight between `order[r - 1]` and `order[r]`.
    decay: Vec<f64>,
    degrees: Vec<f64>,
    seeds: Vec<usize>,
    phi: Vec<f64>,
}

pub fn build_graph(means: &[f64], sigma: f64) -> Result<SupervoxelGraph> {
    build_graph_with(means, sigma, KernelVariant::Absolute)
}

pub fn build_graph_with(
    means: &[f64],
    sigma: f64,
    variant: KernelVariant,
) -> Result<SupervoxelGraph> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return arg_err(format!("sigma must be positive, got {sigma}"));
    }
    if means.is_empty() {
        return arg_err("graph needs at least one node");
    }
    if let Some(bad) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return arg_err(format!("node intensity {bad} outside [0, 1]"));
    }
    let n = means.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    let two_s2 = 2.0 * sigma * sigma;
    let mut decay = vec![0.0; n];
    for r in 1..n {
        decay[r] = (-(means[order[r]] - means[order[r - 1]]) / two_s2).exp();
    }
    let mut g = SupervoxelGraph {
        intensities: means.to_vec(),
        sigma,
        variant,
        order,
        decay,
        degrees: Vec::new(),
        seeds: Vec::new(),
        phi: vec![0.0; n],
    };
    g.degrees = match variant {
        KernelVariant::Absolute => g.weight_product_fast(&vec![1.0; n]),
        KernelVariant::Squared => g.weight_product_dense(&vec![1.0; n]),
    };
    Ok(g)
}

impl SupervoxelGraph {
    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    pub fn sorted_order(&self) -> &[usize] {
        &self.order
    }

    pub fn seeds(&self) -> &[usize] {
        &self.seeds
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Edge weight; zero on the diagonal.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let d = (self.intensities[i] - self.intensities[j]).abs();
        let two_s2 = 2.0 * self.sigma * self.sigma;
        match self.variant {
            KernelVariant::Absolute => (-d / two_s2).exp(),
            KernelVariant::Squared => (-d * d / two_s2).exp(),
        }
    }

    /// `d_i = sum_{j != i} w_ij`.
    pub fn weighted_degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(0.0, f64::max)
    }

    /// Installs pore seeds with potential `phi_seed`; all other nodes get 0.
    pub fn set_unary(&mut self, seeds: &[usize], phi_seed: f64) -> Result<()> {
        self.phi = unary_potentials(self, seeds, phi_seed)?;
        let mut s = seeds.to_vec();
        s.sort_unstable();
        s.dedup();
        self.seeds = s;
        Ok(())
    }

    /// Removes every potential, leaving the plain Laplacian `D - W`.
    pub fn clear_unary(&mut self) {
        self.seeds.clear();
        self.phi.iter_mut().for_each(|p| *p = 0.0);
    }

    /// `W z` via the sorted running sums. Absolute kernel only.
    fn weight_product_fast(&self, z: &[f64]) -> Vec<f64> {
        let n = self.len();
        let o = &self.order;
        let mut left = vec![0.0; n];
        for r in 1..n {
            left[r] = self.decay[r] * (left[r - 1] + z[o[r - 1]]);
        }
        let mut out = vec![0.0; n];
        let mut right = 0.0;
        out[o[n - 1]] = left[n - 1];
        for r in (0..n - 1).rev() {
            right = self.decay[r + 1] * (right + z[o[r + 1]]);
            out[o[r]] = left[r] + right;
        }
        out
    }

    fn weight_product_dense(&self, z: &[f64]) -> Vec<f64> {
        let row = |i: usize| -> f64 { (0..self.len()).map(|j| self.weight(i, j) * z[j]).sum() };
        #[cfg(feature = "parallel")]
        let out = (0..self.len()).into_par_iter().map(row).collect();
        #[cfg(not(feature = "parallel"))]
        let out = (0..self.len()).map(row).collect();
        out
    }

    fn check_len(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.len() {
            return arg_err(format!(
                "vector length {} does not match node count {}",
                z.len(),
                self.len()
            ));
        }
        Ok(())
    }

    /// `H z = (phi + d) z - W z`, using the O(n) path when the kernel allows.
    pub fn apply_hamiltonian(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z)?;
        Ok(self.hamiltonian_product(z, false))
    }

    /// Reference O(n^2) evaluation of `H z`.
    pub fn apply_hamiltonian_dense(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z)?;
        Ok(self.hamiltonian_product(z, true))
    }

    fn hamiltonian_product(&self, z: &[f64], force_dense: bool) -> Vec<f64> {
        let dense = force_dense || self.variant == KernelVariant::Squared;
        if dense {
            let row = |i: usize| -> f64 {
                let zi = z[i];
                let mut acc = self.phi[i] * zi;
                for j in 0..self.len() {
                    acc += self.weight(i, j) * (zi - z[j]);
                }
                acc
            };
            #[cfg(feature = "parallel")]
            let out = (0..self.len()).into_par_iter().map(row).collect();
            #[cfg(not(feature = "parallel"))]
            let out = (0..self.len()).map(row).collect();
            out
        } else {
            let mut wz = self.weight_product_fast(z);
            for i in 0..self.len() {
                wz[i] = (self.phi[i] + self.degrees[i]) * z[i] - wz[i];
            }
            wz
        }
    }

    /// Matrix-free view of `H = D - W + V`.
    pub fn hamiltonian(&self) -> Hamiltonian<'_> {
        Hamiltonian {
            graph: self,
            dense: false,
        }
    }

    /// Same operator evaluated through the O(n^2) reference path.
    pub fn hamiltonian_dense(&self) -> Hamiltonian<'_> {
        Hamiltonian {
            graph: self,
            dense: true,
        }
    }

    /// Explicit `D - W` (potentials ignored).
    pub fn laplacian_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.degrees[i]
            } else {
                -self.weight(i, j)
            }
        })
    }
}

pub struct Hamiltonian<'a> {
    graph: &'a SupervoxelGraph,
    dense: bool,
}

impl LinearOperator for Hamiltonian<'_> {
    fn dim(&self) -> usize {
        self.graph.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.graph.hamiltonian_product(x, self.dense));
    }
}

/// `phi_seed` on seeds, zero elsewhere.
pub fn unary_potentials(g: &SupervoxelGraph, seeds: &[usize], phi_seed: f64) -> Result<Vec<f64>> {
    if !(phi_seed > 0.0) || !phi_seed.is_finite() {
        return arg_err(format!("seed potential must be positive, got {phi_seed}"));
    }
    if seeds.is_empty() {
        return Err(Error::Config(
            "empty pore-seed set: the Hamiltonian needs at least one potential".to_string(),
        ));
    }
    let mut phi = vec![0.0; g.len()];
    for &s in seeds {
        if s >= g.len() {
            return arg_err(format!("seed {s} out of range for {} nodes", g.len()));
        }
        phi[s] = phi_seed;
    }
    Ok(phi)
}

/// Default seed potential: ten times the largest weighted degree.
pub fn default_phi_seed(g: &SupervoxelGraph) -> f64 {
    let d = g.max_degree();
    if d > 0.0 {
        10.0 * d
    } else {
        1.0
    }
}

/// For every voxel row, the darkest supervoxel crossing it becomes a pore
/// seed.
///
/// Slices are taken perpendicular to `axis`; rows inside a slice run along
/// the first remaining axis in x, y, z order. Ties go to the lower id. The
/// result is sorted and deduplicated.
pub fn select_pore_seeds(
    v: &Volume,
    m: &SupervoxelMap,
    means: &[f64],
    axis: Axis,
) -> Result<Vec<usize>> {
    let dims = v.dims();
    dims.check_same(&m.dims(), "select_pore_seeds")?;
    if means.len() != m.count() {
        return arg_err(format!(
            "{} means for {} supervoxels",
            means.len(),
            m.count()
        ));
    }
    let row_axis = if axis == Axis::X { 1 } else { 0 };
    let other = 3 - axis.index() - row_axis;
    let ext = dims.as_array();
    let stride = [1, dims.nx, dims.nx * dims.ny];
    let assignment = m.assignment();

    let mut chosen = vec![false; m.count()];
    for a in 0..ext[axis.index()] {
        for b in 0..ext[other] {
            let start = a * stride[axis.index()] + b * stride[other];
            let mut best: Option<usize> = None;
            for r in 0..ext[row_axis] {
                let id = assignment[start + r * stride[row_axis]] as usize;
                best = match best {
                    Some(cur)
                        if means[cur] < means[id] || (means[cur] == means[id] && cur <= id) =>
                    {
                        Some(cur)
                    }
                    _ => Some(id),
                };
            }
            if let Some(id) = best {
                chosen[id] = true;
            }
        }
    }
    Ok(chosen
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| c.then_some(i))
        .collect())
}
