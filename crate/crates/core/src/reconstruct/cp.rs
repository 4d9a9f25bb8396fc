//! Candidate point sets and their four-face intersection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::face::ApexDistances;
use super::ReconstructError;
use crate::geometry::{trilaterate, GeometryError, Ticks, Tolerance, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub apex: ApexDistances,
    /// Index of the external in the list the set was built from.
    pub tag: usize,
    /// Positive-side solution first; a single point when the node lies in
    /// the face plane.
    pub points: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePointSet {
    pub face: [Vec3; 3],
    /// Global node labels of the face vertices, in slot order.
    pub labels: [usize; 3],
    pub anchor: Option<Vec3>,
    pub entries: Vec<CandidateEntry>,
}

impl CandidatePointSet {
    /// Total number of candidate positions.
    pub fn len(&self) -> usize {
        self.entries.iter().map(|e| e.points.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Trilaterates every external against the face. The external at
/// `anchor_index`, if any, is fixed at its positive-side solution and left
/// out of the returned candidates.
pub fn candidate_points(
    face: [Vec3; 3],
    labels: [usize; 3],
    externals: &[ApexDistances],
    anchor_index: Option<usize>,
    tol: Tolerance,
) -> Result<CandidatePointSet, ReconstructError> {
    let mut entries = Vec::with_capacity(externals.len());
    let mut anchor = None;
    for (tag, apex) in externals.iter().enumerate() {
        let [ra, rb, rc] = apex.0.map(|t| tol.length(t));
        let points = trilaterate(face[0], face[1], face[2], ra, rb, rc, tol).map_err(|e| match e {
            GeometryError::CollinearBase => ReconstructError::CollinearFace,
            other => other.into(),
        })?;
        if points.is_empty() {
            return Err(ReconstructError::UnrealizableExternal(format!(
                "distances {:?} do not meet over face {labels:?}",
                apex.0
            )));
        }
        if Some(tag) == anchor_index {
            anchor = Some(points[0]);
        } else {
            entries.push(CandidateEntry {
                apex: *apex,
                tag,
                points,
            });
        }
    }
    Ok(CandidatePointSet {
        face,
        labels,
        anchor,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedNode {
    pub position: Vec3,
    pub apex: ApexDistances,
    /// Tags of the first set's entries sharing this apex triple.
    pub group: Vec<usize>,
    /// Distances to vertices outside the first face, read from the best
    /// matching entry of each other set.
    pub extra: Vec<(usize, Ticks)>,
}

/// Shared face vertices must carry identical ticks.
fn consistent(a: &CandidateEntry, la: [usize; 3], b: &CandidateEntry, lb: [usize; 3]) -> bool {
    (0..3).all(|s| (0..3).all(|u| la[s] != lb[u] || a.apex.0[s] == b.apex.0[u]))
}

struct Support {
    count: usize,
    nearest: f64,
    best: Option<usize>,
}

fn support(p: Vec3, e1: &CandidateEntry, l1: [usize; 3], cp: &CandidatePointSet, radius: f64) -> Support {
    let mut s = Support {
        count: 0,
        nearest: f64::INFINITY,
        best: None,
    };
    for (k, e) in cp.entries.iter().enumerate() {
        if !consistent(e1, l1, e, cp.labels) {
            continue;
        }
        let d = e.points.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
        if d <= radius {
            s.count += 1;
        }
        if d < s.nearest {
            s.nearest = d;
            s.best = Some(k);
        }
    }
    s
}

/// Keeps, for each mirror pair of `cp1`, the member(s) confirmed by every
/// other set. Entries of `cp1` with identical apex triples are resolved
/// together, so genuine mirror twins each get one side.
pub fn intersect_cps(
    cp1: &CandidatePointSet,
    others: &[&CandidatePointSet],
    tol: Tolerance,
) -> Result<Vec<ResolvedNode>, ReconstructError> {
    let radius = tol.match_radius();
    let mut groups: BTreeMap<ApexDistances, Vec<usize>> = BTreeMap::new();
    for (k, e) in cp1.entries.iter().enumerate() {
        groups.entry(e.apex).or_default().push(k);
    }

    let mut out = Vec::new();
    for (apex, members) in groups {
        let e1 = &cp1.entries[members[0]];
        let g = members.len();
        let tags: Vec<usize> = members.iter().map(|&k| cp1.entries[k].tag).collect();
        let stats: Vec<Vec<Support>> = e1
            .points
            .iter()
            .map(|&p| others.iter().map(|cp| support(p, e1, cp1.labels, cp, radius)).collect())
            .collect();
        let count = |i: usize| stats[i].iter().map(|s| s.count).min().unwrap_or(0);
        let score = |i: usize| stats[i].iter().map(|s| s.nearest).fold(0.0, f64::max);

        let sides: Vec<usize> = if e1.points.len() == 1 {
            vec![0; g]
        } else {
            let (plus, minus) = (count(0), count(1));
            let separation = (e1.points[0] - e1.points[1]).norm();
            if plus + minus == g {
                std::iter::repeat_n(0, plus)
                    .chain(std::iter::repeat_n(1, minus))
                    .collect()
            } else {
                let best = if score(0) <= score(1) { 0 } else { 1 };
                let other = 1 - best;
                if score(best) > radius {
                    return Err(ReconstructError::CountMismatch {
                        expected: g,
                        found: plus + minus,
                    });
                }
                if separation > 2.0 * radius && (g > 1 || score(other) <= radius) {
                    return Err(ReconstructError::AmbiguousNode(format!(
                        "apex {:?}: {plus} + {minus} confirmations for {g} node(s), scores {:.3e} / {:.3e}",
                        apex.0,
                        score(0),
                        score(1)
                    )));
                }
                vec![best; g]
            }
        };

        for side in sides {
            let p = e1.points[side];
            let mut extra: Vec<(usize, Ticks)> = Vec::new();
            for (cp, s) in others.iter().zip(&stats[side]) {
                let Some(b) = s.best else { continue };
                for (u, &label) in cp.labels.iter().enumerate() {
                    if !cp1.labels.contains(&label) && !extra.iter().any(|&(l, _)| l == label) {
                        extra.push((label, cp.entries[b].apex.0[u]));
                    }
                }
            }
            out.push(ResolvedNode {
                position: p,
                apex,
                group: tags.clone(),
                extra,
            });
        }
    }
    let expected = cp1.entries.len();
    if out.len() != expected {
        return Err(ReconstructError::CountMismatch {
            expected,
            found: out.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn ticks_to(p: Vec3, face: &[Vec3; 3]) -> ApexDistances {
        ApexDistances(face.map(|v| tol().ticks((p - v).norm())))
    }

    /// Tetrahedron a, b, c, m plus extra nodes; builds all four CPs.
    fn setup(extra: &[Vec3]) -> (Vec<CandidatePointSet>, Vec<Vec3>) {
        let a = Vec3::zeros();
        let b = Vec3::new(0.9, 0.0, 0.0);
        let c = Vec3::new(0.3, 0.7, 0.0);
        let m = Vec3::new(0.4, 0.3, 0.6);
        let faces = [
            ([a, b, c], [0, 1, 2]),
            ([a, b, m], [0, 1, 3]),
            ([a, m, c], [0, 3, 2]),
            ([m, b, c], [3, 1, 2]),
        ];
        let sets = faces
            .iter()
            .enumerate()
            .map(|(f, (face, labels))| {
                let mut ext: Vec<ApexDistances> = extra.iter().map(|&p| ticks_to(p, face)).collect();
                let anchor = (f == 0).then(|| {
                    ext.push(ticks_to(m, face));
                    ext.len() - 1
                });
                candidate_points(*face, *labels, &ext, anchor, tol()).unwrap()
            })
            .collect();
        (sets, extra.to_vec())
    }

    #[test]
    fn no_externals_beyond_anchor() {
        let (sets, _) = setup(&[]);
        assert!(sets[0].is_empty());
        assert!(sets[0].anchor.is_some());
        let resolved = intersect_cps(&sets[0], &[&sets[1], &sets[2], &sets[3]], tol()).unwrap();
        assert!(resolved.is_empty());
    }

    #[test]
    fn one_external_resolves_to_its_side() {
        for z in [0.35, -0.25] {
            let p = Vec3::new(0.5, 0.2, z);
            let (sets, _) = setup(&[p]);
            assert_eq!(sets[0].len(), 2);
            let resolved = intersect_cps(&sets[0], &[&sets[1], &sets[2], &sets[3]], tol()).unwrap();
            assert_eq!(resolved.len(), 1);
            assert!((resolved[0].position - p).norm() < 1e-4);
            assert!(resolved[0].extra.iter().any(|&(l, _)| l == 3));
        }
    }

    #[test]
    fn mirror_twins_take_both_sides() {
        let p = Vec3::new(0.5, 0.2, 0.3);
        let q = Vec3::new(0.5, 0.2, -0.3);
        let (sets, _) = setup(&[p, q]);
        let resolved = intersect_cps(&sets[0], &[&sets[1], &sets[2], &sets[3]], tol()).unwrap();
        assert_eq!(resolved.len(), 2);
        assert!(resolved.iter().any(|r| (r.position - p).norm() < 1e-4));
        assert!(resolved.iter().any(|r| (r.position - q).norm() < 1e-4));
    }

    #[test]
    fn in_plane_external_is_single() {
        let p = Vec3::new(0.6, 0.5, 0.0);
        let (sets, _) = setup(&[p]);
        assert_eq!(sets[0].len(), 1);
        let resolved = intersect_cps(&sets[0], &[&sets[1], &sets[2], &sets[3]], tol()).unwrap();
        assert!((resolved[0].position - p).norm() < 1e-3);
    }

    #[test]
    fn missing_candidate_resolves_the_mirror() {
        let p = Vec3::new(0.5, 0.2, 0.35);
        // cp3 holds only the true position; the mirror is deleted.
        let (mut sets, _) = setup(&[p]);
        sets[2].entries[0].points.retain(|q| (q - p).norm() < 1e-3);
        assert_eq!(sets[2].len(), 1);
        let resolved = intersect_cps(&sets[0], &[&sets[1], &sets[2], &sets[3]], tol()).unwrap();
        assert!((resolved[0].position - p).norm() < 1e-4);
        // With nothing left in cp3 neither member survives.
        sets[2].entries.clear();
        let err = intersect_cps(&sets[0], &[&sets[1], &sets[2], &sets[3]], tol()).unwrap_err();
        assert!(matches!(err, ReconstructError::CountMismatch { .. }));
    }

    #[test]
    fn unrealizable_external() {
        let face = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let r = candidate_points(face, [0, 1, 2], &[ApexDistances([10, 10, 10])], None, tol());
        assert!(matches!(r, Err(ReconstructError::UnrealizableExternal(_))));
    }
}
