//! Congruence classes of n-point subsets of a small integer lattice box.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lattice_point, GenerateError};
use crate::geometry::congruence::matching_permutation;
use crate::geometry::{DistanceMatrix, PointCloud, Vec3};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeClass {
    pub points: Vec<[i64; 3]>,
    /// Number of distinct pairwise distances.
    pub distinct_distances: usize,
}

impl LatticeClass {
    /// The class representative scaled to unit diameter.
    pub fn cloud(&self) -> PointCloud {
        let pts = self
            .points
            .iter()
            .map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect();
        PointCloud::new(pts).expect("lattice points are finite").normalized()
    }
}

/// Squared distances as a "tick" matrix, so the congruence search can run on
/// exact integers.
fn squared_matrix(points: &[[i64; 3]]) -> DistanceMatrix {
    let n = points.len();
    let mut m = vec![0u64; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (0..3).map(|a| (points[i][a] - points[j][a]).pow(2) as u64).sum();
        }
    }
    DistanceMatrix::from_ticks(n, m).expect("distinct lattice points")
}

type Key = (Vec<u64>, Vec<Vec<u64>>);

fn key(d: &DistanceMatrix) -> Key {
    let mut profiles: Vec<Vec<u64>> = (0..d.n()).map(|i| d.profile(i)).collect();
    profiles.sort();
    (d.sorted_entries(), profiles)
}

/// Adds `pts` to `classes` unless it is congruent to a class already there.
fn insert(
    buckets: &mut HashMap<Key, Vec<usize>>,
    classes: &mut Vec<(Vec<[i64; 3]>, DistanceMatrix)>,
    pts: Vec<[i64; 3]>,
) {
    let d = squared_matrix(&pts);
    let slot = buckets.entry(key(&d)).or_default();
    if slot.iter().any(|&c| matching_permutation(&classes[c].1, &d).is_some()) {
        return;
    }
    slot.push(classes.len());
    classes.push((pts, d));
}

/// Lexicographic successor of a k-combination of `0..total`.
fn next_combination(c: &mut [usize], total: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < total - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Every `n`-subset of `{0..=extent}^3` up to congruence, ordered by the
/// number of distinct distances and then by first occurrence in
/// lexicographic subset order.
pub fn lattice_classes(n: usize, extent: usize) -> Result<Vec<LatticeClass>, GenerateError> {
    let side = extent + 1;
    let total = side * side * side;
    if n == 0 || n > total {
        return Err(GenerateError::LatticeTooSmall { n, extent });
    }
    let cells: Vec<[i64; 3]> = (0..total).map(|c| lattice_point(c, side)).collect();

    // Each worker handles subsets with a fixed first cell; results are merged
    // in first-cell order, which keeps the output deterministic.
    let partial: Vec<Vec<(Vec<[i64; 3]>, DistanceMatrix)>> = (0..=total - n)
        .into_par_iter()
        .map(|first| {
            let mut buckets = HashMap::new();
            let mut classes = Vec::new();
            let rest = total - first - 1;
            if n == 1 {
                insert(&mut buckets, &mut classes, vec![cells[first]]);
                return classes;
            }
            let mut comb: Vec<usize> = (0..n - 1).collect();
            loop {
                let mut pts = vec![cells[first]];
                pts.extend(comb.iter().map(|&c| cells[first + 1 + c]));
                insert(&mut buckets, &mut classes, pts);
                if !next_combination(&mut comb, rest) {
                    break;
                }
            }
            classes
        })
        .collect();

    let mut buckets = HashMap::new();
    let mut classes = Vec::new();
    for part in partial {
        for (pts, _) in part {
            insert(&mut buckets, &mut classes, pts);
        }
    }
    let mut out: Vec<LatticeClass> = classes
        .into_iter()
        .map(|(points, d)| {
            let mut e = d.sorted_entries();
            e.dedup();
            LatticeClass {
                points,
                distinct_distances: e.len(),
            }
        })
        .collect();
    out.sort_by_key(|c| c.distinct_distances);
    Ok(out)
}
