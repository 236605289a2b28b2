//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use qcuts3d::graph::{build_graph, SupervoxelGraph};
use rand::seq::index::sample;
use rand::Rng;

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix.
/// Returns eigenvalues ascending with matching unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| a[x][x].total_cmp(&a[y][y]));
    let values = idx.iter().map(|&i| a[i][i]).collect();
    let vectors = idx
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// `H = D - W + diag(phi)` assembled straight from the kernel definition.
pub fn dense_hamiltonian(s: &[f64], sigma: f64, phi: &[f64]) -> Vec<Vec<f64>> {
    let n = s.len();
    let w = |i: usize, j: usize| (-(s[i] - s[j]).abs() / (2.0 * sigma * sigma)).exp();
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut d = 0.0;
        for j in 0..n {
            if i != j {
                h[i][j] = -w(i, j);
                d += w(i, j);
            }
        }
        h[i][i] = d + phi[i];
    }
    h
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Random graph with random seeds and a seed potential of a few times the
/// largest degree.
pub fn random_seeded_graph(rng: &mut impl Rng, n: usize) -> SupervoxelGraph {
    let sigma = rng.random_range(0.05..0.6);
    seeded_graph(rng, n, sigma)
}

/// Like [`random_seeded_graph`] but with every weight above `e^-12.5`, so the
/// smallest eigenvalue stays far above rounding noise relative to `|H|`.
pub fn well_conditioned_graph(rng: &mut impl Rng, n: usize) -> SupervoxelGraph {
    let sigma = rng.random_range(0.2..0.6);
    seeded_graph(rng, n, sigma)
}

fn seeded_graph(rng: &mut impl Rng, n: usize, sigma: f64) -> SupervoxelGraph {
    let means: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut g = build_graph(&means, sigma).unwrap();
    let k = rng.random_range(1..=(n / 3).max(1));
    let seeds: Vec<usize> = sample(rng, n, k).into_iter().collect();
    let phi = rng.random_range(1.0..10.0) * g.max_degree().max(1.0);
    g.set_unary(&seeds, phi).unwrap();
    g
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn pairwise_auc(scores: &[f64], truth: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &ti) in truth.iter().enumerate() {
        if !ti {
            continue;
        }
        for (j, &tj) in truth.iter().enumerate() {
            if tj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Exhaustive minimum within-cluster sum of squares over threshold splits.
pub fn best_split_sse(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let sse = |part: &[f64]| {
        let m = part.iter().sum::<f64>() / part.len() as f64;
        part.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
    };
    (1..v.len())
        .filter(|&s| v[s] != v[s - 1])
        .map(|s| sse(&v[..s]) + sse(&v[s..]))
        .fold(f64::INFINITY, f64::min)
}

/// True when every supervoxel of `assignment` is a single 6-connected piece.
pub fn flood_fill_connected(dims: [usize; 3], assignment: &[u32]) -> bool {
    let [nx, ny, nz] = dims;
    let count = assignment.iter().map(|&a| a as usize + 1).max().unwrap_or(0);
    let mut seen = vec![false; assignment.len()];
    let mut visited_label = vec![false; count];
    for start in 0..assignment.len() {
        if seen[start] {
            continue;
        }
        let label = assignment[start];
        if visited_label[label as usize] {
            return false;
        }
        visited_label[label as usize] = true;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            let mut push = |j: usize| {
                if !seen[j] && assignment[j] == label {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < nx {
                push(i + 1);
            }
            if y > 0 {
                push(i - nx);
            }
            if y + 1 < ny {
                push(i + nx);
            }
            if z > 0 {
                push(i - nx * ny);
            }
            if z + 1 < nz {
                push(i + nx * ny);
            }
        }
    }
    true
}
