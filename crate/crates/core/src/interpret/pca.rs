use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

const TOL: f64 = 1e-9;
const MAX_ITER: usize = 100_000;

/// Top-two principal components of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `n × 2` coordinates of the centred points.
    pub projection: Matrix,
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    /// Covariance eigenvalues (variance along each component).
    pub variances: [f64; 2],
}

fn covariance(x: &Matrix, mean: &[f64]) -> Matrix {
    let (n, d) = x.shape();
    let mut c = Matrix::zeros(d, d);
    let mut centred = vec![0.0; d];
    for r in x.iter_rows() {
        for ((o, v), m) in centred.iter_mut().zip(r).zip(mean) {
            *o = v - m;
        }
        c.add_outer(&centred, &centred);
    }
    c.as_mut_slice().iter_mut().for_each(|v| *v /= (n - 1) as f64);
    c
}

fn normalise(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Leading eigenpair of a symmetric positive semi-definite matrix.
fn power_iteration(c: &Matrix, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
    let d = c.rows();
    let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalise(&mut v);
    let mut lambda = 0.0;
    for _ in 0..MAX_ITER {
        let mut w = vec![0.0; d];
        c.matvec_add(&v, &mut w);
        lambda = normalise(&mut w);
        if lambda == 0.0 {
            return (0.0, v);
        }
        let diff: f64 = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if diff < TOL {
            break;
        }
    }
    (lambda, v)
}

fn fix_sign(v: &mut [f64]) {
    let big = v
        .iter()
        .cloned()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Projects the rows of `x` onto its two leading principal axes (power
/// iteration with deflation). Each axis is signed so that its
/// largest-magnitude loading is positive.
pub fn pca_2d(x: &Matrix) -> Result<Pca> {
    let (n, d) = x.shape();
    if n < 3 {
        return Err(Error::invalid("pca", format!("need at least 3 points, got {n}")));
    }
    if d < 2 {
        return Err(Error::invalid("pca", "need at least 2 dimensions"));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pca input"));
    }
    let mean: Vec<f64> = (0..d).map(|c| x.column(c).iter().sum::<f64>() / n as f64).collect();
    let mut cov = covariance(x, &mean);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (l1, mut v1) = power_iteration(&cov, &mut rng);
    fix_sign(&mut v1);
    for i in 0..d {
        for j in 0..d {
            let v = cov.get(i, j) - l1 * v1[i] * v1[j];
            cov.set(i, j, v);
        }
    }
    let (l2, mut v2) = power_iteration(&cov, &mut rng);
    // re-orthogonalise against v1 to remove drift from the deflation
    let p = dot(&v2, &v1);
    v2.iter_mut().zip(&v1).for_each(|(a, b)| *a -= p * b);
    normalise(&mut v2);
    fix_sign(&mut v2);

    let mut proj = Matrix::zeros(n, 2);
    let mut centred = vec![0.0; d];
    for (i, r) in x.iter_rows().enumerate() {
        for ((o, v), m) in centred.iter_mut().zip(r).zip(&mean) {
            *o = v - m;
        }
        proj.set(i, 0, dot(&centred, &v1));
        proj.set(i, 1, dot(&centred, &v2));
    }
    Ok(Pca {
        projection: proj,
        mean,
        components: [v1, v2],
        variances: [l1, l2.max(0.0)],
    })
}
