//! Graph Fourier analysis on the supervoxel graph.
//!
//! Eigenvectors of the combinatorial Laplacian `L = D - W` serve as a Fourier
//! basis; low eigenvalues are low frequencies. A per-supervoxel phase signal
//! is projected onto the lowest part of the spectrum and the reconstruction
//! error is reported as a function of how much of the spectrum was used.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{arg_err, Error, Result};
use crate::graph::{build_graph_with, KernelVariant, SupervoxelGraph};
use crate::supervoxel::{supervoxel_fraction, supervoxel_means, SupervoxelMap};
use crate::volume::{LabelVolume, Volume};

pub const DEFAULT_FRACTIONS: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

/// Lowest `m` Laplacian eigenpairs, eigenvalues ascending, eigenvectors as
/// orthonormal columns.
#[derive(Debug, Clone)]
pub struct SpectrumBasis {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SpectrumBasis {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Number of nodes.
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Number of basis vectors.
    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.vectors.transpose() * &self.vectors;
        let m = gram.nrows();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Coefficients `u_k . signal` for every basis vector.
    pub fn coefficients(&self, signal: &[f64]) -> Result<Vec<f64>> {
        if signal.len() != self.dim() {
            return arg_err(format!(
                "signal has {} entries, basis has {}",
                signal.len(),
                self.dim()
            ));
        }
        let s = DVector::from_column_slice(signal);
        Ok((self.vectors.transpose() * s).iter().copied().collect())
    }
}

/// The `m` lowest eigenpairs of the graph Laplacian; unary potentials are
/// ignored. Dense, so meant for graphs of up to a few thousand nodes.
pub fn laplacian_spectrum(g: &SupervoxelGraph, m: usize) -> Result<SpectrumBasis> {
    let n = g.len();
    if m == 0 || m > n {
        return arg_err(format!("basis size {m} outside 1..={n}"));
    }
    let l = g.laplacian_matrix();
    // The constant vector is an exact null vector of any Laplacian. Reflect
    // it onto e_0 and diagonalize the remaining block, so the first basis
    // vector stays exactly constant even for nearly disconnected graphs.
    let inv_sqrt = 1.0 / (n as f64).sqrt();
    let mut w = DVector::from_element(n, inv_sqrt);
    w[0] -= 1.0;
    let ww = w.norm_squared();
    let beta = if ww > 0.0 { 2.0 / ww } else { 0.0 };
    let reflect = |x: DVector<f64>| {
        let c = beta * w.dot(&x);
        x - &w * c
    };
    // (I - b w w^T) L (I - b w w^T) as rank-one updates.
    let lw = &l * &w;
    let wlw = w.dot(&lw);
    let mut hlh = l.clone();
    hlh -= (&w * lw.transpose() + &lw * w.transpose()) * beta;
    hlh += (&w * w.transpose()) * (beta * beta * wlw);
    let block = hlh.view((1, 1), (n - 1, n - 1)).into_owned();
    let eig = SymmetricEigen::new(block);
    let mut order: Vec<usize> = (0..n - 1).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    order.truncate(m - 1);

    let mut vectors = DMatrix::zeros(n, m);
    let mut raw_values = Vec::with_capacity(m);
    vectors.set_column(0, &DVector::from_element(n, inv_sqrt));
    raw_values.push(0.0);
    for (k, &src) in order.iter().enumerate() {
        let mut padded = DVector::zeros(n);
        padded.rows_mut(1, n - 1).copy_from(&eig.eigenvectors.column(src));
        let mut col = reflect(padded);
        // Fix the sign so the first non-negligible entry is positive.
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(k + 1, &col);
        raw_values.push(eig.eigenvalues[src]);
    }
    let eigenvalues: Vec<f64> = raw_values.iter().map(|v| v.max(0.0)).collect();

    let scale = l.norm().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for k in 0..m {
        let u = vectors.column(k);
        let r = (&l * u - u * raw_values[k]).norm() / scale;
        worst = worst.max(r);
    }
    if worst > 1e-8 {
        return Err(Error::Convergence {
            applications: n,
            residual: worst,
        });
    }
    Ok(SpectrumBasis {
        eigenvalues,
        vectors,
    })
}

/// `sum_k (u_k . signal) u_k` over all basis vectors.
pub fn project_reconstruct(signal: &[f64], basis: &SpectrumBasis) -> Result<Vec<f64>> {
    let c = DVector::from_vec(basis.coefficients(signal)?);
    Ok((&basis.vectors * c).iter().copied().collect())
}

/// Number of basis vectors used for a spectrum fraction.
pub fn basis_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n)
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return arg_err("at least one spectrum fraction is required");
    }
    match fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        Some(f) => arg_err(format!("spectrum fraction {f} outside (0, 1]")),
        None => Ok(()),
    }
}

/// Mean squared reconstruction error of `signal` for each fraction, using
/// the lowest `ceil(fraction * n)` vectors of a complete basis.
///
/// The error is the energy in the discarded coefficients, so it is
/// non-increasing in the fraction and zero for the whole spectrum.
pub fn reconstruction_errors(
    signal: &[f64],
    basis: &SpectrumBasis,
    fractions: &[f64],
) -> Result<Vec<f64>> {
    check_fractions(fractions)?;
    let n = basis.dim();
    if basis.len() != n {
        return arg_err(format!(
            "reconstruction curve needs the full spectrum ({} of {n} vectors given)",
            basis.len()
        ));
    }
    let c = basis.coefficients(signal)?;
    let mut tail = vec![0.0f64; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + c[k] * c[k];
    }
    Ok(fractions
        .iter()
        .map(|&f| tail[basis_count(f, n)] / n as f64)
        .collect())
}

/// Per-supervoxel fraction of voxels carrying `phase_code`.
pub fn phase_signal(gt: &LabelVolume, phase_code: u8, m: &SupervoxelMap) -> Result<Vec<f64>> {
    if !gt.codebook().contains_key(&phase_code) {
        return arg_err(format!("phase code {phase_code} not present in codebook"));
    }
    let labels = gt.labels();
    supervoxel_fraction(m, gt.dims(), |i| labels[i] == phase_code)
}

/// Graph over supervoxel mean intensities used for the spectrum.
pub fn spectrum_graph(
    v: &Volume,
    m: &SupervoxelMap,
    sigma: f64,
    kernel: KernelVariant,
) -> Result<SupervoxelGraph> {
    let means = supervoxel_means(v, m)?;
    build_graph_with(&means, sigma, kernel)
}

/// `(fraction, mse)` pairs for one phase.
pub fn reconstruction_curve(
    gt: &LabelVolume,
    phase_code: u8,
    v: &Volume,
    m: &SupervoxelMap,
    sigma: f64,
    fractions: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_fractions(fractions)?;
    v.dims().check_same(&gt.dims(), "reconstruction_curve")?;
    let g = spectrum_graph(v, m, sigma, KernelVariant::Absolute)?;
    let basis = laplacian_spectrum(&g, g.len())?;
    let signal = phase_signal(gt, phase_code, m)?;
    let errors = reconstruction_errors(&signal, &basis, fractions)?;
    Ok(fractions.iter().copied().zip(errors).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCurve {
    pub code: u8,
    pub name: String,
    pub mse: Vec<f64>,
}

/// Reconstruction curves for several phases sharing one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSet {
    pub supervoxels: usize,
    pub fractions: Vec<f64>,
    pub basis_sizes: Vec<usize>,
    pub phases: Vec<PhaseCurve>,
}

impl CurveSet {
    /// `fraction,basis_size,mse_<phase>...` with one row per fraction.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,basis_size");
        for p in &self.phases {
            out.push_str(&format!(",mse_{}", p.name));
        }
        out.push('\n');
        for (row, (&f, &k)) in self.fractions.iter().zip(&self.basis_sizes).enumerate() {
            out.push_str(&format!("{f},{k}"));
            for p in &self.phases {
                out.push_str(&format!(",{:e}", p.mse[row]));
            }
            out.push('\n');
        }
        out
    }
}

/// Curves for `phases` (all codebook phases when empty).
pub fn phase_curves(
    gt: &LabelVolume,
    phases: &[u8],
    v: &Volume,
    m: &SupervoxelMap,
    sigma: f64,
    kernel: KernelVariant,
    fractions: &[f64],
) -> Result<CurveSet> {
    check_fractions(fractions)?;
    v.dims().check_same(&gt.dims(), "phase_curves")?;
    let codes: Vec<u8> = if phases.is_empty() {
        gt.codebook().keys().copied().collect()
    } else {
        phases.to_vec()
    };
    let g = spectrum_graph(v, m, sigma, kernel)?;
    let n = g.len();
    let basis = laplacian_spectrum(&g, n)?;
    let mut curves = Vec::with_capacity(codes.len());
    for code in codes {
        let signal = phase_signal(gt, code, m)?;
        curves.push(PhaseCurve {
            code,
            name: gt.codebook()[&code].clone(),
            mse: reconstruction_errors(&signal, &basis, fractions)?,
        });
    }
    Ok(CurveSet {
        supervoxels: n,
        fractions: fractions.to_vec(),
        basis_sizes: fractions.iter().map(|&f| basis_count(f, n)).collect(),
        phases: curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn two_node_closed_form() {
        // Equal intensities give w = 1, so L = [[1, -1], [-1, 1]].
        let g = build_graph(&[0.5, 0.5], 0.1).unwrap();
        let b = laplacian_spectrum(&g, 2).unwrap();
        assert!(b.eigenvalues()[0].abs() < 1e-14);
        assert!((b.eigenvalues()[1] - 2.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u0 = b.vector(0);
        let u1 = b.vector(1);
        assert!((u0[0] - h).abs() < 1e-14 && (u0[1] - h).abs() < 1e-14);
        assert!((u1[0].abs() - h).abs() < 1e-14 && (u1[0] + u1[1]).abs() < 1e-14);
    }

    #[test]
    fn constant_null_vector_and_orthonormality() {
        let means = [0.1, 0.15, 0.2, 0.7, 0.75, 0.8, 0.5];
        let g = build_graph(&means, 0.2).unwrap();
        let b = laplacian_spectrum(&g, 7).unwrap();
        assert!(b.eigenvalues()[0].abs() < 1e-12);
        let c = 1.0 / (7.0f64).sqrt();
        for v in b.vector(0) {
            assert!((v - c).abs() < 1e-10);
        }
        assert!(b.orthonormality_error() < 1e-12);
        assert!(b.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rank_one_projection_is_the_mean() {
        let means = [0.1, 0.12, 0.9, 0.88];
        let g = build_graph(&means, 0.3).unwrap();
        let b = laplacian_spectrum(&g, 1).unwrap();
        let r = project_reconstruct(&[1.0, 1.0, 0.0, 0.0], &b).unwrap();
        for v in r {
            assert!((v - 0.5).abs() < 1e-12);
        }
        let full = laplacian_spectrum(&g, 4).unwrap();
        let s = [0.3, -1.0, 2.0, 0.25];
        let r = project_reconstruct(&s, &full).unwrap();
        for (a, b) in r.iter().zip(s) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_energy_matches_explicit_residual() {
        let means: Vec<f64> = (0..30).map(|i| ((i * 11) % 30) as f64 / 30.0).collect();
        let g = build_graph(&means, 0.2).unwrap();
        let full = laplacian_spectrum(&g, 30).unwrap();
        let signal: Vec<f64> = means.iter().map(|&m| (m * 5.0).sin()).collect();
        let fractions = [0.1, 0.3, 0.7];
        let e = reconstruction_errors(&signal, &full, &fractions).unwrap();
        for (&f, &mse) in fractions.iter().zip(&e) {
            let low = laplacian_spectrum(&g, basis_count(f, 30)).unwrap();
            let r = project_reconstruct(&signal, &low).unwrap();
            let direct = r.iter().zip(&signal).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 30.0;
            assert!((mse - direct).abs() < 1e-12, "{f}: {mse} vs {direct}");
        }
    }

    #[test]
    fn error_curve_monotone_and_exact_at_one() {
        let means: Vec<f64> = (0..40).map(|i| ((i * 7) % 40) as f64 / 40.0).collect();
        let g = build_graph(&means, 0.15).unwrap();
        let b = laplacian_spectrum(&g, 40).unwrap();
        let signal: Vec<f64> = means.iter().map(|&m| if m > 0.5 { 1.0 } else { 0.0 }).collect();
        let e = reconstruction_errors(&signal, &b, &DEFAULT_FRACTIONS).unwrap();
        assert!(e.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*e.last().unwrap(), 0.0);
        assert!(reconstruction_errors(&signal, &b, &[0.0]).is_err());
        assert!(reconstruction_errors(&signal, &b, &[1.5]).is_err());
    }

    #[test]
    fn basis_counts() {
        assert_eq!(basis_count(0.01, 50), 1);
        assert_eq!(basis_count(0.1, 50), 5);
        assert_eq!(basis_count(0.11, 50), 6);
        assert_eq!(basis_count(1.0, 50), 50);
    }

    #[test]
    fn bad_basis_size() {
        let g = build_graph(&[0.2, 0.3], 0.1).unwrap();
        assert!(laplacian_spectrum(&g, 0).is_err());
        assert!(laplacian_spectrum(&g, 3).is_err());
    }
}
