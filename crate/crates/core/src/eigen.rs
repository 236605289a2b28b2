//! Matrix-free smallest eigenpair of a symmetric positive definite operator.
//!
//! Thick-restart Lanczos: a Krylov basis is grown with full (twice repeated
//! classical Gram-Schmidt) reorthogonalization, the operator is projected onto
//! it, and on restart the lowest Ritz vectors are kept together with the
//! residual direction of the wanted pair. The operator is only ever touched
//! through [`LinearOperator::apply`].

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{arg_err, Error, Result};

/// A symmetric linear map known only through its action on vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Adapts a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnOperator { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Target relative residual `|H z - lambda z| / (lambda |z|)`.
    pub tol: f64,
    /// Operator application budget; `None` means `10 n`.
    pub max_applications: Option<usize>,
    /// Krylov basis size before a restart.
    pub basis_size: usize,
    /// Ritz vectors carried over a restart.
    pub keep: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_applications: None,
            basis_size: 48,
            keep: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit vector; the entry of largest magnitude is positive.
    pub vector: Vec<f64>,
    /// Final relative residual `|H z - lambda z| / |lambda|`.
    pub residual: f64,
    pub applications: usize,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthonormalizes `x` against `basis` in place. Returns false when `x` is
/// (numerically) inside the span of `basis`.
fn orthonormalize(basis: &[Vec<f64>], x: &mut [f64]) -> bool {
    let before = norm(x);
    if before == 0.0 || !before.is_finite() {
        return false;
    }
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, x);
            axpy(-c, b, x);
        }
    }
    let after = norm(x);
    if after <= 1e-12 * before {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= after);
    true
}

/// Deterministic filler used when the Krylov space becomes invariant.
struct SplitMix(u64);

impl SplitMix {
    fn next_unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_unit()).collect()
    }
}

fn combine(vectors: &[Vec<f64>], coeffs: impl Iterator<Item = f64>, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (v, c) in vectors.iter().zip(coeffs) {
        axpy(c, v, &mut out);
    }
    out
}

fn fix_sign(v: &mut [f64]) {
    let mut imax = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[imax].abs() {
            imax = i;
        }
    }
    if v[imax] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Smallest eigenpair of a symmetric positive definite operator, started
/// from the normalized all-ones vector.
///
/// Converged pairs satisfy `|H z - lambda z| <= tol * lambda`. When lambda is
/// so small relative to the operator norm that this bound lies below the
/// attainable floating-point accuracy, the pair is accepted once the residual
/// reaches that accuracy floor and `residual` reports the achieved value.
pub fn smallest_eigenpair(op: &impl LinearOperator, opts: &EigenOptions) -> Result<EigenPair> {
    let n = op.dim();
    if n == 0 {
        return arg_err("operator dimension must be >= 1");
    }
    if !(opts.tol > 0.0) {
        return arg_err(format!("tolerance must be positive, got {}", opts.tol));
    }
    let max_apps = opts.max_applications.unwrap_or(10 * n).max(1);
    let m = opts.basis_size.max(2).min(n);
    let keep = opts.keep.clamp(1, m.saturating_sub(1).max(1));

    let apply = |x: &[f64], apps: &mut usize| -> Vec<f64> {
        let mut y = vec![0.0; n];
        op.apply(x, &mut y);
        *apps += 1;
        y
    };

    let mut apps = 0usize;
    let start = vec![1.0 / (n as f64).sqrt(); n];
    if n == 1 {
        let y = apply(&start, &mut apps);
        return Ok(EigenPair {
            value: y[0],
            vector: vec![1.0],
            residual: 0.0,
            applications: apps,
        });
    }

    let mut filler = SplitMix(0x5EED_0F_0CE5);
    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut images: Vec<Vec<f64>> = vec![apply(&basis[0], &mut apps)];
    let mut best_rel = f64::INFINITY;
    let floor_factor = 64.0 * f64::EPSILON * (n as f64).sqrt();

    loop {
        // Grow the Krylov basis.
        while basis.len() < m && apps < max_apps {
            let mut next = images.last().expect("non-empty").clone();
            let mut ok = orthonormalize(&basis, &mut next);
            for _ in 0..3 {
                if ok {
                    break;
                }
                next = filler.vector(n);
                ok = orthonormalize(&basis, &mut next);
            }
            if !ok {
                break;
            }
            let img = apply(&next, &mut apps);
            basis.push(next);
            images.push(img);
        }

        // Rayleigh-Ritz on the current basis.
        let k = basis.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]))
        });
        let eig = SymmetricEigen::new(t);
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let theta = eig.eigenvalues[idx[0]];
        let theta_max = eig.eigenvalues[idx[k - 1]].abs();
        let y0 = eig.eigenvectors.column(idx[0]);
        let mut x = combine(&basis, y0.iter().copied(), n);
        let mut hx = combine(&images, y0.iter().copied(), n);
        let xn = norm(&x);
        x.iter_mut().for_each(|v| *v /= xn);
        hx.iter_mut().for_each(|v| *v /= xn);
        let mut r: Vec<f64> = hx.iter().zip(&x).map(|(h, v)| h - theta * v).collect();
        let res = norm(&r);
        let floor = floor_factor * theta_max;
        best_rel = best_rel.min(res / theta.abs());

        if (res <= opts.tol * theta.abs() || res <= floor) && apps < max_apps {
            // Confirm against a fresh application of the operator.
            let hx_true = apply(&x, &mut apps);
            let lambda = dot(&x, &hx_true);
            let res_true = norm(
                &hx_true
                    .iter()
                    .zip(&x)
                    .map(|(h, v)| h - lambda * v)
                    .collect::<Vec<_>>(),
            );
            best_rel = best_rel.min(res_true / lambda.abs());
            if res_true <= opts.tol * lambda.abs() || res_true <= floor {
                if res_true > opts.tol * lambda.abs() {
                    log::debug!(
                        "eigenpair accepted at precision floor: residual {res_true:.3e}, lambda {lambda:.3e}"
                    );
                }
                fix_sign(&mut x);
                return Ok(EigenPair {
                    value: lambda,
                    vector: x,
                    residual: res_true / lambda.abs(),
                    applications: apps,
                });
            }
        }
        if apps >= max_apps {
            return Err(Error::Convergence {
                applications: apps,
                residual: best_rel,
            });
        }

        // Thick restart: keep the lowest Ritz vectors plus the residual.
        let p = keep.min(k - 1).max(1);
        let mut new_basis = Vec::with_capacity(m);
        let mut new_images = Vec::with_capacity(m);
        for &c in idx.iter().take(p) {
            let col = eig.eigenvectors.column(c);
            new_basis.push(combine(&basis, col.iter().copied(), n));
            new_images.push(combine(&images, col.iter().copied(), n));
        }
        basis = new_basis;
        images = new_images;
        let mut ok = orthonormalize(&basis, &mut r);
        for _ in 0..3 {
            if ok {
                break;
            }
            r = filler.vector(n);
            ok = orthonormalize(&basis, &mut r);
        }
        if ok {
            let img = apply(&r, &mut apps);
            basis.push(r);
            images.push(img);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_op(a: Vec<Vec<f64>>) -> FnOperator<impl Fn(&[f64], &mut [f64])> {
        let n = a.len();
        FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = dot(&a[i], x);
            }
        })
    }

    #[test]
    fn identity_operator() {
        let op = FnOperator::new(3, |x: &[f64], y: &mut [f64]| y.copy_from_slice(x));
        let e = smallest_eigenpair(&op, &EigenOptions::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-14);
        assert!((norm(&e.vector) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_closed_form() {
        let alpha = 3.0;
        let op = dense_op(vec![vec![alpha + 1.0, -1.0], vec![-1.0, 1.0]]);
        let e = smallest_eigenpair(&op, &EigenOptions::default()).unwrap();
        let expected = (5.0 - 13f64.sqrt()) / 2.0;
        assert!((e.value - expected).abs() < 1e-12 * expected);
        assert!((e.value - 0.6972).abs() < 1e-4);
        // Eigenvector proportional to (1, 1 / (1 - lambda)).
        let ratio = e.vector[1] / e.vector[0];
        assert!((ratio - 1.0 / (1.0 - expected)).abs() < 1e-10);
        assert!(e.residual <= 1e-8);
    }

    #[test]
    fn diagonal_with_invariant_start() {
        // Start vector is an eigenvector of the all-ones block; the smaller
        // eigenvalue lives elsewhere and must still be found.
        let op = dense_op(vec![
            vec![2.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ]);
        let e = smallest_eigenpair(&op, &EigenOptions::default()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-14);

        // I + J: the start vector is an eigenvector with eigenvalue 1 + n,
        // the smallest eigenvalue 1 lives in its orthogonal complement.
        let op = FnOperator::new(4, |x: &[f64], y: &mut [f64]| {
            let s: f64 = x.iter().sum();
            for i in 0..4 {
                y[i] = x[i] + s;
            }
        });
        let e = smallest_eigenpair(&op, &EigenOptions::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12, "{}", e.value);
        assert!(e.vector.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn errors() {
        let op = FnOperator::new(0, |_: &[f64], _: &mut [f64]| {});
        assert!(smallest_eigenpair(&op, &EigenOptions::default()).is_err());
        let op = FnOperator::new(100, |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = (1.0 + i as f64) * x[i];
            }
        });
        let opts = EigenOptions {
            max_applications: Some(3),
            ..EigenOptions::default()
        };
        assert!(matches!(
            smallest_eigenpair(&op, &opts),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn long_diagonal_needs_restarts() {
        let n = 400;
        let op = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = (1.0 + i as f64 * 0.01) * x[i];
            }
        });
        let opts = EigenOptions {
            basis_size: 20,
            keep: 5,
            ..EigenOptions::default()
        };
        let e = smallest_eigenpair(&op, &opts).unwrap();
        assert!((e.value - 1.0).abs() < 1e-8);
        assert!(e.vector[0].abs() > 1.0 - 1e-6);
    }
}
