use serde::{Deserialize, Serialize};

use super::{distance_matrix, DistanceMatrix, GeometryError, PointCloud, Tolerance};

/// Largest cloud the exhaustive oracle accepts.
pub const MAX_EXHAUSTIVE_NODES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceWitness {
    /// `permutation[i]` is the node of `b` matched to node `i` of `a`.
    pub permutation: Vec<usize>,
    /// Largest absolute difference between matched float distances.
    pub max_residual: f64,
}

/// Decides congruence (rigid motion, reflection and relabeling) by searching
/// for a node bijection that makes the quantized distance matrices equal.
pub fn congruent(a: &PointCloud, b: &PointCloud, tol: Tolerance) -> Result<Option<CongruenceWitness>, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::SizeMismatch(a.len(), b.len()));
    }
    if a.len() > MAX_EXHAUSTIVE_NODES {
        return Err(GeometryError::TooLargeForExhaustive {
            n: a.len(),
            max: MAX_EXHAUSTIVE_NODES,
        });
    }
    let da = distance_matrix(a, tol)?;
    let db = distance_matrix(b, tol)?;
    Ok(matching_permutation(&da, &db).map(|permutation| {
        let n = a.len();
        let mut max_residual = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let r = (a.distance(i, j) - b.distance(permutation[i], permutation[j])).abs();
                max_residual = max_residual.max(r);
            }
        }
        CongruenceWitness {
            permutation,
            max_residual,
        }
    }))
}

/// Backtracking search for `perm` with `da(i,j) == db(perm[i], perm[j])`.
/// Candidates are pruned by sorted distance profiles.
pub(crate) fn matching_permutation(da: &DistanceMatrix, db: &DistanceMatrix) -> Option<Vec<usize>> {
    let n = da.n();
    if n != db.n() || da.sorted_entries() != db.sorted_entries() {
        return None;
    }
    let pa: Vec<_> = (0..n).map(|i| da.profile(i)).collect();
    let pb: Vec<_> = (0..n).map(|i| db.profile(i)).collect();
    let mut sa = pa.clone();
    let mut sb = pb.clone();
    sa.sort();
    sb.sort();
    if sa != sb {
        return None;
    }
    let options: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| pa[i] == pb[j]).collect()).collect();
    // Most constrained nodes first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| options[i].len());

    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    if assign(0, &order, &options, da, db, &mut perm, &mut used) {
        Some(perm)
    } else {
        None
    }
}

fn assign(
    depth: usize,
    order: &[usize],
    options: &[Vec<usize>],
    da: &DistanceMatrix,
    db: &DistanceMatrix,
    perm: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let i = order[depth];
    for &j in &options[i] {
        if used[j] {
            continue;
        }
        let consistent = order[..depth].iter().all(|&k| da.get(i, k) == db.get(j, perm[k]));
        if !consistent {
            continue;
        }
        perm[i] = j;
        used[j] = true;
        if assign(depth + 1, order, options, da, db, perm, used) {
            return true;
        }
        used[j] = false;
        perm[i] = usize::MAX;
    }
    false
}
