//! Reading one face tuple's level-1 children: common edges, new-edge pairs,
//! turn-over cases and apex distances.

use serde::{Deserialize, Serialize};

use super::ReconstructError;
use crate::geometry::Ticks;
use crate::refinement::{Children, ColorId, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonEdgeReport {
    /// 1-based slot of the face tuple.
    pub slot: usize,
    pub ce_length: Ticks,
}

/// New-edge pairs of one external node relative to a face tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborFaces {
    /// Index of the entry in the face's neighbor multiset.
    pub entry: usize,
    /// Colors of the three replaced tuples, one level down.
    pub colors: [ColorId; 3],
    /// Per slot, the two remaining distances (sorted).
    pub pairs: [[Ticks; 2]; 3],
    /// Slots whose signature held the common-edge length more than once.
    pub collisions: Vec<usize>,
}

impl NeighborFaces {
    pub fn ne_set(&self) -> [Ticks; 6] {
        let p = &self.pairs;
        [p[0][0], p[0][1], p[1][0], p[1][1], p[2][0], p[2][1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NeCase {
    /// Three distinct lengths, 2:2:2.
    Scalene = 1,
    /// Two lengths, 4:2.
    Isosceles = 2,
    /// One length.
    Equilateral = 3,
}

/// Distances from an external node to the face vertices, in slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ApexDistances(pub [Ticks; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApexResolution {
    pub distances: ApexDistances,
    pub case: NeCase,
    /// Number of pair orientations consistent with the sharing constraints.
    /// Above one is a turn-over: the alternatives all give the same triple.
    pub consistent_orientations: usize,
}

pub(crate) fn is_degenerate(sig: &[Ticks]) -> bool {
    sig.first() == Some(&0)
}

fn is_class_two(sig: &[Ticks]) -> bool {
    matches!(sig, [0, x, y] if x == y && *x > 0)
}

fn joint_entries(node: &TreeNode) -> Result<&[Vec<TreeNode>], ReconstructError> {
    match &node.children {
        Some(Children::Joint(entries)) if entries.iter().all(|e| e.len() == 3) => Ok(entries),
        _ => Err(ReconstructError::MalformedTranscript(
            "face node has no joint 3-entry children".into(),
        )),
    }
}

/// For each slot, the length of the face edge not touching that slot, read
/// off the two class-2 children `(0, d, d)` the slot must contain.
pub fn identify_common_edges(node: &TreeNode) -> Result<[CommonEdgeReport; 3], ReconstructError> {
    let entries = joint_entries(node)?;
    let mut out = [CommonEdgeReport { slot: 0, ce_length: 0 }; 3];
    for (s, report) in out.iter_mut().enumerate() {
        let found: Vec<Ticks> = entries
            .iter()
            .map(|e| &e[s].init)
            .filter(|sig| is_class_two(sig))
            .map(|sig| sig[1])
            .collect();
        if found.len() != 2 || found[0] != found[1] {
            return Err(ReconstructError::MalformedTranscript(format!(
                "slot {} has {} class-2 children {found:?}, expected two equal",
                s + 1,
                found.len()
            )));
        }
        *report = CommonEdgeReport {
            slot: s + 1,
            ce_length: found[0],
        };
    }
    let mut ces: Vec<Ticks> = out.iter().map(|r| r.ce_length).collect();
    ces.sort_unstable();
    if ces != node.init {
        return Err(ReconstructError::MalformedTranscript(format!(
            "common edges {ces:?} do not match the face signature {:?}",
            node.init
        )));
    }
    Ok(out)
}

/// New-edge pairs for every entry without a degenerate slot (the external
/// nodes); the three base-vertex entries are skipped.
pub fn extract_new_edges(node: &TreeNode, ce: &[CommonEdgeReport; 3]) -> Result<Vec<NeighborFaces>, ReconstructError> {
    let entries = joint_entries(node)?;
    let mut out = Vec::new();
    let mut skipped = 0;
    for (idx, entry) in entries.iter().enumerate() {
        if entry.iter().any(|c| is_degenerate(&c.init)) {
            skipped += 1;
            continue;
        }
        let mut pairs = [[0; 2]; 3];
        let mut collisions = Vec::new();
        for s in 0..3 {
            let sig = &entry[s].init;
            let ce_len = ce[s].ce_length;
            let pos = sig
                .iter()
                .position(|&x| x == ce_len)
                .ok_or(ReconstructError::CEAbsentFromSignature {
                    slot: s + 1,
                    ce: ce_len,
                })?;
            if sig.iter().filter(|&&x| x == ce_len).count() > 1 {
                collisions.push(s + 1);
            }
            let rest: Vec<Ticks> = sig
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != pos)
                .map(|(_, &x)| x)
                .collect();
            pairs[s] = [rest[0], rest[1]];
        }
        out.push(NeighborFaces {
            entry: idx,
            colors: [entry[0].color, entry[1].color, entry[2].color],
            pairs,
            collisions,
        });
    }
    if skipped != 3 {
        return Err(ReconstructError::MalformedTranscript(format!(
            "expected 3 base-vertex entries, found {skipped}"
        )));
    }
    Ok(out)
}

pub fn classify_ne_case(ne_set: &[Ticks; 6]) -> Result<NeCase, ReconstructError> {
    let mut v = *ne_set;
    v.sort_unstable();
    let mut counts: Vec<usize> = Vec::new();
    let mut k = 0;
    while k < 6 {
        let run = v[k..].iter().take_while(|&&x| x == v[k]).count();
        counts.push(run);
        k += run;
    }
    counts.sort_unstable();
    match counts.as_slice() {
        [2, 2, 2] => Ok(NeCase::Scalene),
        [2, 4] => Ok(NeCase::Isosceles),
        [6] => Ok(NeCase::Equilateral),
        _ => Err(ReconstructError::ImpossibleHistogram(v.to_vec())),
    }
}

/// Solves for the distances `(r1, r2, r3)` from the external node to the
/// three face vertices. Slot `s`'s pair holds the two distances other than
/// `r_s`, so each distance is shared by the two slots that do not replace
/// it.
pub fn resolve_apex_distances(nf: &NeighborFaces) -> Result<ApexResolution, ReconstructError> {
    let case = classify_ne_case(&nf.ne_set())?;
    let [p1, p2, p3] = nf.pairs;
    let mut triples = Vec::new();
    for bits in 0..8u8 {
        let o = |p: [Ticks; 2], bit: u8| {
            if (bits >> bit) & 1 == 0 {
                (p[0], p[1])
            } else {
                (p[1], p[0])
            }
        };
        // slot 1 pair = (r2, r3), slot 2 pair = (r1, r3), slot 3 pair = (r1, r2)
        let (r2, r3) = o(p1, 0);
        let (r1, r3b) = o(p2, 1);
        let (r1b, r2b) = o(p3, 2);
        if r3 == r3b && r1 == r1b && r2 == r2b {
            triples.push([r1, r2, r3]);
        }
    }
    let count = triples.len();
    triples.sort_unstable();
    triples.dedup();
    match triples.as_slice() {
        [t] => Ok(ApexResolution {
            distances: ApexDistances(*t),
            case,
            consistent_orientations: count,
        }),
        [] => Err(ReconstructError::InconsistentPairs(format!("{:?}", nf.pairs))),
        many => Err(ReconstructError::InconsistentPairs(format!(
            "{:?} admits distinct triples {many:?}",
            nf.pairs
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nf(pairs: [[Ticks; 2]; 3]) -> NeighborFaces {
        NeighborFaces {
            entry: 0,
            colors: [0; 3],
            pairs,
            collisions: vec![],
        }
    }

    #[test]
    fn cases() {
        assert_eq!(classify_ne_case(&[1, 2, 3, 1, 2, 3]).unwrap(), NeCase::Scalene);
        assert_eq!(classify_ne_case(&[1, 1, 1, 1, 2, 2]).unwrap(), NeCase::Isosceles);
        assert_eq!(classify_ne_case(&[1; 6]).unwrap(), NeCase::Equilateral);
        assert!(matches!(
            classify_ne_case(&[1, 1, 1, 2, 2, 2]),
            Err(ReconstructError::ImpossibleHistogram(_))
        ));
        assert!(classify_ne_case(&[1, 2, 3, 4, 5, 6]).is_err());
    }

    #[test]
    fn scalene_resolution_is_unique() {
        let r = resolve_apex_distances(&nf([[2, 3], [1, 3], [1, 2]])).unwrap();
        assert_eq!(r.distances, ApexDistances([1, 2, 3]));
        assert_eq!(r.consistent_orientations, 1);
    }

    #[test]
    fn equilateral_resolution() {
        let r = resolve_apex_distances(&nf([[5, 5], [5, 5], [5, 5]])).unwrap();
        assert_eq!(r.distances, ApexDistances([5, 5, 5]));
        assert_eq!(r.case, NeCase::Equilateral);
        assert_eq!(r.consistent_orientations, 8);
    }

    #[test]
    fn isosceles_turn_over() {
        // pairs {q,q}, {p,q}, {p,q}: r2 = r3 = q and r1 = p.
        let (p, q) = (4, 7);
        let r = resolve_apex_distances(&nf([[q, q], [p, q], [p, q]])).unwrap();
        assert_eq!(r.distances, ApexDistances([p, q, q]));
        assert_eq!(r.case, NeCase::Isosceles);
        assert!(r.consistent_orientations > 1);
    }

    #[test]
    fn inconsistent_pairs() {
        // 2:2:2 histogram, but slot 3 demands r1 = r2 = 3.
        assert!(matches!(
            resolve_apex_distances(&nf([[1, 2], [1, 2], [3, 3]])),
            Err(ReconstructError::InconsistentPairs(_))
        ));
        assert!(matches!(
            resolve_apex_distances(&nf([[1, 2], [1, 2], [1, 2]])),
            Err(ReconstructError::ImpossibleHistogram(_))
        ));
    }
}
