//! Distance exchanges: swap `d(i,p)` and `d(i,q)` for every pivot `i` in a
//! set, then try to realize the edited matrix in 3D.

use serde::{Deserialize, Serialize};

use super::GenerateError;
use crate::geometry::{distance_matrix, edm_realizable_3d, embed_3d, DistanceMatrix, PointCloud, Ticks, Tolerance};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExchangeMove {
    pub pivots: Vec<usize>,
    pub p: usize,
    pub q: usize,
}

impl ExchangeMove {
    pub fn single(i: usize, p: usize, q: usize) -> Self {
        ExchangeMove { pivots: vec![i], p, q }
    }

    fn check(&self, n: usize) -> Result<(), GenerateError> {
        let bad = |m: String| Err(GenerateError::BadIndices(m));
        if self.p >= n || self.q >= n || self.pivots.iter().any(|&i| i >= n) {
            return bad(format!("{self:?} out of range for {n} nodes"));
        }
        if self.p == self.q {
            return bad(format!("p = q = {}", self.p));
        }
        if self.pivots.is_empty() {
            return bad("empty pivot set".into());
        }
        let mut sorted = self.pivots.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.pivots.len() || sorted.iter().any(|&i| i == self.p || i == self.q) {
            return bad(format!(
                "pivots {:?} must be distinct and differ from p, q",
                self.pivots
            ));
        }
        Ok(())
    }

    /// The edited matrix. Entries are swapped symmetrically.
    pub fn apply(&self, d: &DistanceMatrix) -> Result<DistanceMatrix, GenerateError> {
        self.check(d.n())?;
        let mut out = d.clone();
        for &i in &self.pivots {
            out.swap_entries(i, self.p, self.q);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Human-readable origin of the source cloud.
    pub source: String,
    pub exchange: ExchangeMove,
    /// `(i, d(i,p), d(i,q))` before the swap, in ticks.
    pub swapped: Vec<(usize, Ticks, Ticks)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub a: PointCloud,
    pub b: PointCloud,
    pub provenance: Provenance,
}

/// Swaps the distances, and when the result is realizable in 3D returns the
/// original cloud together with an embedding of the edited matrix. Whether
/// the pair actually fools a WL variant is left to the caller.
pub fn apply_exchange(
    cloud: &PointCloud,
    mv: &ExchangeMove,
    source: &str,
    tol: Tolerance,
) -> Result<Option<CandidatePair>, GenerateError> {
    let d = distance_matrix(cloud, tol)?;
    let edited = mv.apply(&d)?;
    if !edited.satisfies_triangle_inequality(2) || !edm_realizable_3d(&edited, tol) {
        return Ok(None);
    }
    let b = match embed_3d(&edited, tol) {
        Ok(b) => b,
        Err(crate::geometry::GeometryError::NotRealizable(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let swapped = mv.pivots.iter().map(|&i| (i, d.get(i, mv.p), d.get(i, mv.q))).collect();
    Ok(Some(CandidatePair {
        a: cloud.clone(),
        b,
        provenance: Provenance {
            source: source.to_string(),
            exchange: mv.clone(),
            swapped,
        },
    }))
}

/// Every exchange on `n` nodes with up to `max_pivots` pivots, in a fixed
/// order: by `(p, q)`, then pivot-set size, then lexicographically.
pub fn exchange_candidates(n: usize, max_pivots: usize) -> Vec<ExchangeMove> {
    let mut out = Vec::new();
    for p in 0..n {
        for q in p + 1..n {
            let others: Vec<usize> = (0..n).filter(|&i| i != p && i != q).collect();
            for size in 1..=max_pivots.min(others.len()) {
                subsets(&others, size, &mut Vec::new(), 0, &mut |s| {
                    out.push(ExchangeMove {
                        pivots: s.to_vec(),
                        p,
                        q,
                    })
                });
            }
        }
    }
    out
}

fn subsets(items: &[usize], size: usize, cur: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if cur.len() == size {
        f(cur);
        return;
    }
    for k in start..items.len() {
        cur.push(items[k]);
        subsets(items, size, cur, k + 1, f);
        cur.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::random_cloud;
    use crate::geometry::congruent;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn candidate_enumeration_counts() {
        // n = 5: 10 (p,q) pairs, 3 single pivots and 3 pivot pairs each.
        assert_eq!(exchange_candidates(5, 2).len(), 60);
        assert_eq!(exchange_candidates(5, 1).len(), 30);
    }

    #[test]
    fn no_op_swap_gives_congruent_pair() {
        // Node 0 is equidistant from 1 and 2.
        let c = PointCloud::from_coords(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.3, 0.4, 0.8]])
            .unwrap()
            .normalized();
        let pair = apply_exchange(&c, &ExchangeMove::single(0, 1, 2), "test", tol())
            .unwrap()
            .expect("realizable");
        assert!(congruent(&pair.a, &pair.b, tol()).unwrap().is_some());
    }

    #[test]
    fn swaps_preserve_the_distance_multiset() {
        let c = random_cloud(6, 8).unwrap();
        let d = distance_matrix(&c, tol()).unwrap();
        for mv in exchange_candidates(6, 2) {
            assert_eq!(mv.apply(&d).unwrap().sorted_entries(), d.sorted_entries());
        }
    }

    #[test]
    fn generic_swaps_are_mostly_unrealizable() {
        let mut realizable = 0;
        let mut total = 0;
        for seed in 0..20 {
            let c = random_cloud(6, seed).unwrap();
            for mv in exchange_candidates(6, 1).into_iter().take(10) {
                total += 1;
                if apply_exchange(&c, &mv, "random", tol()).unwrap().is_some() {
                    realizable += 1;
                }
            }
        }
        assert!(realizable * 10 < total, "{realizable}/{total}");
    }

    #[test]
    fn bad_indices() {
        let c = random_cloud(4, 0).unwrap();
        for mv in [
            ExchangeMove::single(0, 1, 1),
            ExchangeMove::single(1, 1, 2),
            ExchangeMove::single(0, 1, 9),
            ExchangeMove {
                pivots: vec![],
                p: 1,
                q: 2,
            },
            ExchangeMove {
                pivots: vec![0, 0],
                p: 1,
                q: 2,
            },
        ] {
            assert!(matches!(
                apply_exchange(&c, &mv, "t", tol()),
                Err(GenerateError::BadIndices(_))
            ));
        }
    }
}
