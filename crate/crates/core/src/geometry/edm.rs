//! Euclidean distance matrix realizability, classical multidimensional
//! scaling and tick-exact fitting.

use nalgebra::{DMatrix, DVector, Matrix5, SymmetricEigen};

use super::{distance_matrix, DistanceMatrix, GeometryError, PointCloud, Tolerance, Vec3};

/// Eigenvalue magnitude below which a Gram eigenvalue counts as zero.
/// Quantization perturbs each squared distance by about `d * epsilon`, and the
/// spectral norm of that perturbation grows at most linearly in `n`.
fn gram_threshold(n: usize, max_len: f64, tol: Tolerance) -> f64 {
    50.0 * n as f64 * tol.epsilon * max_len.max(1.0).powi(2)
}

fn gram_eigen(d: &DistanceMatrix, tol: Tolerance) -> (SymmetricEigen<f64, nalgebra::Dyn>, f64) {
    let n = d.n();
    let sq = DMatrix::from_fn(n, n, |i, j| tol.length(d.get(i, j)).powi(2));
    let centering = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let gram = -0.5 * &centering * sq * &centering;
    let max_len = d.as_slice().iter().copied().max().map_or(0.0, |t| tol.length(t));
    (gram.symmetric_eigen(), gram_threshold(n, max_len, tol))
}

/// True iff the double-centered Gram matrix is positive semidefinite with
/// rank at most three, up to the quantization threshold.
pub fn edm_realizable_3d(d: &DistanceMatrix, tol: Tolerance) -> bool {
    if d.n() <= 1 {
        return true;
    }
    let (eig, threshold) = gram_eigen(d, tol);
    let negative = eig.eigenvalues.iter().any(|&l| l < -threshold);
    let rank = eig.eigenvalues.iter().filter(|&&l| l > threshold).count();
    !negative && rank <= 3
}

/// Embeds a realizable matrix in 3D. The returned cloud quantizes back to
/// exactly `d`.
pub fn embed_3d(d: &DistanceMatrix, tol: Tolerance) -> Result<PointCloud, GeometryError> {
    let n = d.n();
    if n == 1 {
        return PointCloud::new(vec![Vec3::zeros()]);
    }
    if !edm_realizable_3d(d, tol) {
        return Err(GeometryError::NotRealizable(
            "Gram matrix is indefinite or has rank > 3".into(),
        ));
    }
    let (eig, _) = gram_eigen(d, tol);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut points = vec![Vec3::zeros(); n];
    for (axis, &k) in order.iter().take(3).enumerate() {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        for (i, p) in points.iter_mut().enumerate() {
            p[axis] = eig.eigenvectors[(i, k)] * scale;
        }
    }
    fit_to_ticks(&points, d, tol)
}

/// Moves `initial` until every pairwise distance quantizes to the matching
/// entry of `target`.
///
/// Minimizes a hinge loss that is zero inside a band slightly narrower than
/// the tick interval, with Levenberg-Marquardt steps. Fails with
/// `NotRealizable` if the ticks cannot all be hit.
pub fn fit_to_ticks(initial: &[Vec3], target: &DistanceMatrix, tol: Tolerance) -> Result<PointCloud, GeometryError> {
    let n = target.n();
    if initial.len() != n {
        return Err(GeometryError::SizeMismatch(initial.len(), n));
    }
    let mut points = initial.to_vec();
    if n < 2 {
        return PointCloud::new(points);
    }
    let band = 0.4 * tol.epsilon;
    let pairs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, tol.length(target.get(i, j))))
        .collect();

    let hinge = |pts: &[Vec3]| -> f64 {
        pairs
            .iter()
            .map(|&(i, j, c)| {
                let e = ((pts[i] - pts[j]).norm() - c).abs() - band;
                if e > 0.0 {
                    e * e
                } else {
                    0.0
                }
            })
            .sum()
    };
    let exact = |pts: &[Vec3]| {
        pairs
            .iter()
            .all(|&(i, j, _)| tol.ticks((pts[i] - pts[j]).norm()) == target.get(i, j))
    };

    let dim = 3 * n;
    let mut cost = hinge(&points);
    let mut mu = 1e-3;
    for _ in 0..200 {
        if exact(&points) {
            return PointCloud::new(points);
        }
        let mut jtj = DMatrix::<f64>::zeros(dim, dim);
        let mut jtr = DVector::<f64>::zeros(dim);
        for &(i, j, c) in &pairs {
            let diff = points[i] - points[j];
            let dist = diff.norm();
            let dev = dist - c;
            let excess = dev.abs() - band;
            if excess <= 0.0 || dist == 0.0 {
                continue;
            }
            let r = excess * dev.signum();
            let u = diff / dist;
            for a in 0..3 {
                jtr[3 * i + a] += u[a] * r;
                jtr[3 * j + a] -= u[a] * r;
                for b in 0..3 {
                    let v = u[a] * u[b];
                    jtj[(3 * i + a, 3 * i + b)] += v;
                    jtj[(3 * j + a, 3 * j + b)] += v;
                    jtj[(3 * i + a, 3 * j + b)] -= v;
                    jtj[(3 * j + a, 3 * i + b)] -= v;
                }
            }
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut damped = jtj.clone();
            for k in 0..dim {
                damped[(k, k)] += mu * (1.0 + jtj[(k, k)]);
            }
            let Some(chol) = damped.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            let trial: Vec<Vec3> = points
                .iter()
                .enumerate()
                .map(|(k, p)| p + Vec3::new(step[3 * k], step[3 * k + 1], step[3 * k + 2]))
                .collect();
            let trial_cost = hinge(&trial);
            if trial_cost < cost {
                points = trial;
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    if exact(&points) {
        return PointCloud::new(points);
    }
    let cloud = PointCloud::new(points)?;
    let got = distance_matrix(&cloud, tol)?;
    let misses = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| got.get(i, j) != target.get(i, j))
        .count();
    Err(GeometryError::NotRealizable(format!(
        "{misses} distances could not be fitted to their ticks"
    )))
}

/// Squared volume of the tetrahedron with the given edge lengths, from the
/// Cayley-Menger determinant (`288 V^2 = det CM`). Negative values mean the
/// six lengths do not close into a real tetrahedron.
pub fn cayley_menger_volume_sq(ab: f64, ac: f64, ad: f64, bc: f64, bd: f64, cd: f64) -> f64 {
    let (ab, ac, ad, bc, bd, cd) = (ab * ab, ac * ac, ad * ad, bc * bc, bd * bd, cd * cd);
    #[rustfmt::skip]
    let m = Matrix5::new(
        0.0, 1.0, 1.0, 1.0, 1.0,
        1.0, 0.0, ab,  ac,  ad,
        1.0, ab,  0.0, bc,  bd,
        1.0, ac,  bc,  0.0, cd,
        1.0, ad,  bd,  cd,  0.0,
    );
    m.determinant() / 288.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::congruent;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn lengths_to_matrix(n: usize, lengths: &[f64]) -> DistanceMatrix {
        let mut ticks = vec![0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let t = tol().ticks(lengths[k]);
                ticks[i * n + j] = t;
                ticks[j * n + i] = t;
                k += 1;
            }
        }
        DistanceMatrix::from_ticks(n, ticks).unwrap()
    }

    #[test]
    fn real_cloud_is_realizable() {
        let c = PointCloud::from_coords(&[
            [0.0, 0.0, 0.0],
            [0.4, 0.1, 0.0],
            [0.1, 0.5, 0.2],
            [0.3, 0.3, 0.6],
            [0.7, 0.2, 0.4],
        ])
        .unwrap();
        assert!(edm_realizable_3d(&distance_matrix(&c, tol()).unwrap(), tol()));
    }

    #[test]
    fn triangle_inequality_violation_is_not_realizable() {
        let d = lengths_to_matrix(3, &[1.0, 3.0, 1.0]);
        assert!(!edm_realizable_3d(&d, tol()));
    }

    #[test]
    fn regular_four_simplex_is_not_realizable_in_3d() {
        // Gram of the unit regular 4-simplex: eigenvalues 1/2 (x4) and 0.
        let d = lengths_to_matrix(5, &[1.0; 10]);
        let (eig, _) = gram_eigen(&d, tol());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for &l in &ev[..4] {
            assert!((l - 0.5).abs() < 1e-5);
        }
        assert!(ev[4].abs() < 1e-5);
        assert!(!edm_realizable_3d(&d, tol()));
    }

    #[test]
    fn embed_unit_segment_and_triangle() {
        let seg = lengths_to_matrix(2, &[1.0]);
        let c = embed_3d(&seg, tol()).unwrap();
        assert_eq!(distance_matrix(&c, tol()).unwrap(), seg);

        let tri = lengths_to_matrix(3, &[1.0, 1.0, 1.0]);
        let c = embed_3d(&tri, tol()).unwrap();
        assert_eq!(distance_matrix(&c, tol()).unwrap(), tri);
    }

    #[test]
    fn embed_reproduces_random_cloud() {
        let c = PointCloud::from_coords(&[
            [0.05, 0.9, 0.1],
            [0.4, 0.1, 0.0],
            [0.1, 0.5, 0.2],
            [0.3, 0.3, 0.6],
            [0.7, 0.2, 0.4],
            [0.9, 0.8, 0.35],
        ])
        .unwrap()
        .normalized();
        let d = distance_matrix(&c, tol()).unwrap();
        let e = embed_3d(&d, tol()).unwrap();
        assert_eq!(distance_matrix(&e, tol()).unwrap(), d);
        assert!(congruent(&c, &e, tol()).unwrap().is_some());
    }

    #[test]
    fn not_realizable_errors() {
        let d = lengths_to_matrix(5, &[1.0; 10]);
        assert!(matches!(embed_3d(&d, tol()), Err(GeometryError::NotRealizable(_))));
    }

    #[test]
    fn cayley_menger_of_regular_tetrahedron() {
        // V = s^3 / (6 sqrt 2)
        let v2 = cayley_menger_volume_sq(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!((v2 - 1.0 / 72.0).abs() < 1e-12);
        // flat: apex in the base plane
        let flat = cayley_menger_volume_sq(1.0, 1.0, 2.0f64.sqrt(), 2.0f64.sqrt(), 1.0, 1.0);
        assert!(flat.abs() < 1e-12);
    }
}
