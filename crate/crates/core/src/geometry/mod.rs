//! Point clouds, quantized distances and the geometric primitives the rest of
//! the crate is built on.
//!
//! Every distance comparison goes through integer *ticks*: a length `d` is
//! stored as `round(d / epsilon)`. Two distances are equal exactly when their
//! ticks are equal, which keeps multiset hashing in the refinement engine
//! consistent under floating point noise.

pub(crate) mod congruence;
mod edm;
mod trilateration;
pub mod xyz;

pub use congruence::{congruent, CongruenceWitness, MAX_EXHAUSTIVE_NODES};
pub use edm::{cayley_menger_volume_sq, edm_realizable_3d, embed_3d, fit_to_ticks};
pub use trilateration::trilaterate;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Quantized length.
pub type Ticks = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("coordinate {index} is not finite")]
    NonFinite { index: usize },
    #[error("points {0} and {1} coincide at the configured tolerance")]
    DuplicatePoints(usize, usize),
    #[error("cloud sizes differ ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("exhaustive congruence is limited to {max} nodes, got {n}")]
    TooLargeForExhaustive { n: usize, max: usize },
    #[error("base triangle is collinear")]
    CollinearBase,
    #[error("distance matrix is not realizable in 3D: {0}")]
    NotRealizable(String),
    #[error("malformed distance matrix: {0}")]
    MalformedMatrix(String),
    #[error("epsilon must be positive and finite, got {0}")]
    BadTolerance(f64),
}

/// Length resolution shared by every comparison in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub epsilon: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { epsilon: 1e-6 }
    }
}

impl Tolerance {
    pub fn new(epsilon: f64) -> Result<Self, GeometryError> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Tolerance { epsilon })
        } else {
            Err(GeometryError::BadTolerance(epsilon))
        }
    }

    pub fn ticks(&self, length: f64) -> Ticks {
        (length / self.epsilon).round() as Ticks
    }

    pub fn length(&self, ticks: Ticks) -> f64 {
        ticks as f64 * self.epsilon
    }

    /// Bound on the rounding error of a trilaterated squared apex height.
    /// Quantized radii perturb `z^2` by roughly `r * epsilon`, so the bound
    /// scales with the radius.
    pub fn plane_slack(&self, radius: f64) -> f64 {
        4.0 * self.epsilon * radius.max(1.0)
    }

    /// Apex height indistinguishable from zero at tick resolution.
    pub fn plane_height(&self, radius: f64) -> f64 {
        self.plane_slack(radius).sqrt()
    }

    /// Radius within which two reconstructed candidate positions are taken to
    /// be the same point. Near-plane apexes amplify tick noise to roughly
    /// `sqrt(epsilon)`, which sets the scale here.
    pub fn match_radius(&self) -> f64 {
        10.0 * self.epsilon.sqrt()
    }
}

/// An ordered list of 3D positions, viewed as a complete distance-weighted graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        if let Some(index) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite { index });
        }
        Ok(PointCloud { points })
    }

    pub fn from_coords(coords: &[[f64; 3]]) -> Result<Self, GeometryError> {
        Self::new(coords.iter().map(|c| Vec3::new(c[0], c[1], c[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.points[i] - self.points[j]).norm()
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }

    /// Centers the cloud on its centroid and scales it to unit diameter.
    /// Single points (and fully coincident clouds) are only centered.
    pub fn normalized(&self) -> PointCloud {
        let n = self.len() as f64;
        let centroid = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
        let diameter = self.diameter();
        let scale = if diameter > 0.0 { 1.0 / diameter } else { 1.0 };
        PointCloud {
            points: self.points.iter().map(|p| (p - centroid) * scale).collect(),
        }
    }

    /// Fails if any pair of points quantizes to distance zero.
    pub fn validate(&self, tol: Tolerance) -> Result<(), GeometryError> {
        distance_matrix(self, tol).map(|_| ())
    }
}

/// Symmetric matrix of quantized pairwise distances.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    ticks: Vec<Ticks>,
}

impl DistanceMatrix {
    /// Builds a matrix from row-major ticks, checking symmetry, a zero
    /// diagonal and positive off-diagonal entries. The triangle inequality is
    /// not enforced here (exchange constructions may violate it).
    pub fn from_ticks(n: usize, ticks: Vec<Ticks>) -> Result<Self, GeometryError> {
        if ticks.len() != n * n {
            return Err(GeometryError::MalformedMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                ticks.len()
            )));
        }
        for i in 0..n {
            if ticks[i * n + i] != 0 {
                return Err(GeometryError::MalformedMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                if ticks[i * n + j] != ticks[j * n + i] {
                    return Err(GeometryError::MalformedMatrix(format!("asymmetric at ({i},{j})")));
                }
                if ticks[i * n + j] == 0 {
                    return Err(GeometryError::DuplicatePoints(i, j));
                }
            }
        }
        Ok(DistanceMatrix { n, ticks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Ticks {
        self.ticks[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[Ticks] {
        &self.ticks
    }

    /// Swaps `d(i,p)` and `d(i,q)` symmetrically.
    pub fn swap_entries(&mut self, i: usize, p: usize, q: usize) {
        let n = self.n;
        let (dp, dq) = (self.ticks[i * n + p], self.ticks[i * n + q]);
        self.ticks[i * n + p] = dq;
        self.ticks[p * n + i] = dq;
        self.ticks[i * n + q] = dp;
        self.ticks[q * n + i] = dp;
    }

    /// Upper-triangle entries, sorted.
    pub fn sorted_entries(&self) -> Vec<Ticks> {
        let mut out = Vec::with_capacity(self.n * (self.n.saturating_sub(1)) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out.sort_unstable();
        out
    }

    /// Sorted row of node `i` (its distance profile, including the zero).
    pub fn profile(&self, i: usize) -> Vec<Ticks> {
        let mut row = self.ticks[i * self.n..(i + 1) * self.n].to_vec();
        row.sort_unstable();
        row
    }

    pub fn satisfies_triangle_inequality(&self, slack: Ticks) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| self.get(i, k) <= self.get(i, j) + self.get(j, k) + slack)))
    }

    /// Renumbers nodes: entry `(i,j)` of the result is `d(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> DistanceMatrix {
        let n = self.n;
        let mut ticks = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                ticks[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        DistanceMatrix { n, ticks }
    }
}

pub fn distance_matrix(cloud: &PointCloud, tol: Tolerance) -> Result<DistanceMatrix, GeometryError> {
    let n = cloud.len();
    let mut ticks = vec![0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let t = tol.ticks(cloud.distance(i, j));
            if t == 0 {
                return Err(GeometryError::DuplicatePoints(i, j));
            }
            ticks[i * n + j] = t;
            ticks[j * n + i] = t;
        }
    }
    Ok(DistanceMatrix { n, ticks })
}

/// Area of a triangle from its side lengths (Heron, in the numerically stable
/// ordering).
pub fn triangle_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let (a, b, c) = (s[0], s[1], s[2]);
    let q = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * q.max(0.0).sqrt()
}
