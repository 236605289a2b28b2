//! Quantum cuts: the ground state of the graph Hamiltonian as a saliency map.
//!
//! With pore seeds carrying a large potential, the lowest-energy state of
//! `H = D - W + V` concentrates away from the seeds and from everything
//! strongly connected to them. Squaring the eigenvector removes its sign and
//! gives a per-node likelihood of belonging to the foreground (solid) phase.

use serde::Serialize;

use crate::eigen::{smallest_eigenpair, EigenOptions};
use crate::error::{arg_err, Error, Result};
use crate::graph::SupervoxelGraph;

/// Per-supervoxel solid likelihood plus solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaliencyVector {
    pub values: Vec<f64>,
    pub eigenvalue: f64,
    pub residual: f64,
    pub applications: usize,
}

/// `y_i = z_i^2 / max_j z_j^2`.
pub fn saliency_from_eigenvector(z: &[f64]) -> Result<Vec<f64>> {
    let max_sq = z.iter().map(|v| v * v).fold(0.0, f64::max);
    if !(max_sq > 0.0) || !max_sq.is_finite() {
        return arg_err("saliency needs a non-zero finite eigenvector");
    }
    Ok(z.iter().map(|v| (v * v / max_sq).min(1.0)).collect())
}

pub fn quantum_cut(g: &SupervoxelGraph) -> Result<SaliencyVector> {
    quantum_cut_with(g, &EigenOptions::default())
}

pub fn quantum_cut_with(g: &SupervoxelGraph, opts: &EigenOptions) -> Result<SaliencyVector> {
    if g.seeds().is_empty() {
        return Err(Error::Config(
            "quantum cut needs pore seeds with potentials".to_string(),
        ));
    }
    let pair = smallest_eigenpair(&g.hamiltonian(), opts)?;
    Ok(SaliencyVector {
        values: saliency_from_eigenvector(&pair.vector)?,
        eigenvalue: pair.value,
        residual: pair.residual,
        applications: pair.applications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn saliency_basic_cases() {
        assert_eq!(saliency_from_eigenvector(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let y = saliency_from_eigenvector(&[0.6, 0.8]).unwrap();
        assert!((y[0] - 0.5625).abs() < 1e-15);
        assert_eq!(y[1], 1.0);
        assert!(saliency_from_eigenvector(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn saliency_sign_invariant() {
        let z = [0.3, -0.5, 0.1, 0.8];
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        assert_eq!(
            saliency_from_eigenvector(&z).unwrap(),
            saliency_from_eigenvector(&neg).unwrap()
        );
    }

    #[test]
    fn needs_seeds() {
        let g = build_graph(&[0.1, 0.9], 0.1).unwrap();
        assert!(matches!(quantum_cut(&g), Err(Error::Config(_))));
    }

    #[test]
    fn all_seeded_equal_intensity_is_uniform() {
        let mut g = build_graph(&[0.4; 6], 0.1).unwrap();
        g.set_unary(&[0, 1, 2, 3, 4, 5], 50.0).unwrap();
        let s = quantum_cut(&g).unwrap();
        for v in &s.values {
            assert!((v - 1.0).abs() < 1e-10, "{v}");
        }
        assert!((s.eigenvalue - 50.0).abs() < 1e-9);
    }

    #[test]
    fn bright_cluster_is_salient() {
        let mut means: Vec<f64> = (0..10).map(|i| 0.1 + 0.005 * i as f64).collect();
        means.extend((0..10).map(|i| 0.85 + 0.005 * i as f64));
        let mut g = build_graph(&means, 0.3).unwrap();
        let phi = crate::graph::default_phi_seed(&g);
        g.set_unary(&[0, 3, 6], phi).unwrap();
        let s = quantum_cut(&g).unwrap();
        let dark_max = s.values[..10].iter().copied().fold(0.0, f64::max);
        let bright_min = s.values[10..].iter().copied().fold(1.0, f64::min);
        assert!(bright_min > dark_max);
        assert!(s.eigenvalue > 0.0);
    }
}
