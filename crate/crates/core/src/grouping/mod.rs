//! Edge-equality analysis for (3,WL): the three slot multisets of a root
//! tuple are regrouped into per-node triples, and every regrouping that only
//! splices equal lengths is checked for new tetrahedra.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cayley_menger_volume_sq, triangle_area, PointCloud, Ticks, Tolerance};
use crate::reconstruct::{root_classes, ReconstructError, RootChoice};
use crate::refinement::{ColorId, RefinementError, RefinementTranscript, Variant};

mod labels;

pub use labels::{label_equality_classes, EqualityClass, EqualityClasses, SlotId};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupingError {
    #[error("edge-equality analysis needs a (3,WL) transcript, got {0}")]
    WrongVariant(Variant),
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("color {0} is not a non-degenerate final class")]
    UnknownRoot(ColorId),
    #[error("cloud has no non-degenerate triple")]
    NoNonDegenerateTuple,
    #[error("cloud does not match the transcript: {0}")]
    CloudMismatch(String),
    #[error(transparent)]
    Refinement(#[from] RefinementError),
}

impl From<ReconstructError> for GroupingError {
    fn from(e: ReconstructError) -> Self {
        match e {
            ReconstructError::WrongVariant(v) => GroupingError::WrongVariant(v),
            ReconstructError::NoNonDegenerateTuple => GroupingError::NoNonDegenerateTuple,
            ReconstructError::Refinement(r) => GroupingError::Refinement(r),
            other => GroupingError::MalformedTranscript(other.to_string()),
        }
    }
}

/// New-edge pairs of the external nodes, one row per root slot.
///
/// Row 0 holds `{r_b, r_c}` pairs, row 1 `{r_a, r_c}`, row 2 `{r_a, r_b}`,
/// where `r_x` is the distance from the external node to root vertex `x`.
/// Pairs are sorted and every row is sorted, so rows are canonical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NERows {
    pub root: RootChoice,
    /// Common edge of each slot: `[d_bc, d_ca, d_ab]`.
    pub ce: [Ticks; 3],
    pub rows: [Vec<[Ticks; 2]>; 3],
}

impl NERows {
    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows[0].is_empty()
    }

    /// Base edge lengths `[d_ab, d_bc, d_ca]`.
    pub fn base(&self) -> [Ticks; 3] {
        [self.ce[2], self.ce[0], self.ce[1]]
    }
}

fn remove_one(v: &mut Vec<Ticks>, x: Ticks) -> bool {
    match v.iter().position(|&y| y == x) {
        Some(k) => {
            v.remove(k);
            true
        }
        None => false,
    }
}

/// Reads the rows for the final color `root` of a (3,WL) transcript.
pub fn build_rows(t: &RefinementTranscript, root: ColorId) -> Result<NERows, GroupingError> {
    if t.variant() != Variant::WL3 {
        return Err(GroupingError::WrongVariant(t.variant()));
    }
    let choice = root_classes(t)?
        .into_iter()
        .find(|r| r.color == root)
        .ok_or(GroupingError::UnknownRoot(root))?;
    let r = t.rounds();
    let rule = t.rule(r, root);
    let slots = rule.groups(t.variant(), t.n());
    if slots.len() != 3 {
        return Err(GroupingError::MalformedTranscript(format!(
            "root rule has {} slots",
            slots.len()
        )));
    }
    let bad = |m: String| Err(GroupingError::MalformedTranscript(m));
    let mut ce = [0; 3];
    let mut rows: [Vec<[Ticks; 2]>; 3] = Default::default();
    for (s, slot) in slots.iter().enumerate() {
        let mut rest: Vec<ColorId> = slot.to_vec();
        // the slot replaced by its own vertex reproduces the root tuple
        match rest.iter().position(|&c| c == rule.prev) {
            Some(k) => {
                rest.remove(k);
            }
            None => return bad(format!("slot {} lacks the root's own color", s + 1)),
        }
        let sigs: Vec<&[Ticks]> = rest.iter().map(|&c| t.init_signature(r - 1, c)).collect();
        let class_two: Vec<Ticks> = sigs
            .iter()
            .filter(|sig| matches!(sig, [0, x, y] if x == y && *x > 0))
            .map(|sig| sig[1])
            .collect();
        if class_two.len() != 2 || class_two[0] != class_two[1] {
            return bad(format!(
                "slot {} has class-2 entries {class_two:?}, expected two equal",
                s + 1
            ));
        }
        ce[s] = class_two[0];
        for sig in sigs.iter().filter(|sig| sig[0] > 0) {
            let mut v = sig.to_vec();
            if !remove_one(&mut v, ce[s]) {
                return bad(format!("slot {} entry {sig:?} lacks the common edge {}", s + 1, ce[s]));
            }
            rows[s].push([v[0], v[1]]);
        }
        rows[s].sort_unstable();
    }
    let mut sorted = ce;
    sorted.sort_unstable();
    if sorted != choice.signature {
        return bad(format!(
            "common edges {ce:?} do not match the root {:?}",
            choice.signature
        ));
    }
    let m = t.n() - 3;
    if rows.iter().any(|row| row.len() != m) {
        return bad(format!(
            "row sizes {:?}, expected {m}",
            rows.iter().map(Vec::len).collect::<Vec<_>>()
        ));
    }
    Ok(NERows { root: choice, ce, rows })
}

/// One hypothesized node: an element from each row and, per element,
/// whether its pair is read in reverse.
///
/// Unflipped, row 0's pair is read as `(r_b, r_c)`, row 1's as
/// `(r_a, r_c)` and row 2's as `(r_a, r_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Group {
    pub elements: [usize; 3],
    pub flips: [bool; 3],
}

impl Group {
    fn read(rows: &NERows, row: usize, e: usize, flip: bool) -> (Ticks, Ticks) {
        let p = rows.rows[row][e];
        if flip {
            (p[1], p[0])
        } else {
            (p[0], p[1])
        }
    }

    /// `(r_a, r_b, r_c)` as claimed by each row, or `None` when the
    /// splices join unequal lengths.
    pub fn triple(&self, rows: &NERows) -> Option<[Ticks; 3]> {
        let [e0, e1, e2] = self.elements;
        let (b0, c0) = Self::read(rows, 0, e0, self.flips[0]);
        let (a1, c1) = Self::read(rows, 1, e1, self.flips[1]);
        let (a2, b2) = Self::read(rows, 2, e2, self.flips[2]);
        (a1 == a2 && b0 == b2 && c0 == c1).then_some([a1, b0, c0])
    }

    /// The three splices as `(slot, slot)` pairs: `r_a`, `r_b`, `r_c`.
    pub fn splices(&self) -> [(SlotId, SlotId); 3] {
        let [e0, e1, e2] = self.elements;
        let [f0, f1, f2] = self.flips.map(usize::from);
        let s = |row, element, position| SlotId { row, element, position };
        [
            (s(1, e1, f1), s(2, e2, f2)),
            (s(0, e0, f0), s(2, e2, 1 - f2)),
            (s(0, e0, 1 - f0), s(1, e1, 1 - f1)),
        ]
    }
}

/// Groups indexed by their row-0 element, so group order is quotiented out.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Grouping {
    pub groups: Vec<Group>,
}

impl Grouping {
    pub fn is_well_formed(&self, m: usize) -> bool {
        if self.groups.len() != m {
            return false;
        }
        (0..3).all(|row| {
            let mut seen = vec![false; m];
            self.groups.iter().all(|g| {
                let e = g.elements[row];
                e < m && !std::mem::replace(&mut seen[e], true)
            })
        }) && self.groups.iter().enumerate().all(|(e, g)| g.elements[0] == e)
    }

    pub fn triples(&self, rows: &NERows) -> Option<Vec<[Ticks; 3]>> {
        self.groups.iter().map(|g| g.triple(rows)).collect()
    }

    /// Sorted per-node triples, the comparison key against other groupings.
    pub fn triple_multiset(&self, rows: &NERows) -> Option<Vec<[Ticks; 3]>> {
        let mut v = self.triples(rows)?;
        v.sort_unstable();
        Some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnumerationStatus {
    Complete,
    BudgetExceeded,
    /// The visitor asked to stop.
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationStats {
    pub status: EnumerationStatus,
    /// Group candidates checked plus groupings yielded; the budget bounds
    /// this.
    pub nodes: u64,
    pub feasible_groupings: u64,
    /// Row bijections admitting at least one feasible orientation.
    pub feasible_matchings: u64,
}

fn flips_of(bits: u8) -> [bool; 3] {
    [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0]
}

/// Visits every feasible grouping. Matchings are explored with row-1 and
/// row-2 elements ascending for each successive row-0 element; within a
/// matching, flip words count up with the last group varying fastest.
pub fn enumerate_groupings(
    rows: &NERows,
    budget: u64,
    mut visit: impl FnMut(&Grouping) -> ControlFlow<()>,
) -> EnumerationStats {
    let m = rows.len();
    let mut st = Search {
        rows,
        m,
        budget,
        stats: EnumerationStats {
            status: EnumerationStatus::Complete,
            nodes: 0,
            feasible_groupings: 0,
            feasible_matchings: 0,
        },
        used: [vec![false; m], vec![false; m]],
        matching: Vec::with_capacity(m),
    };
    let _ = st.descend(&mut visit);
    st.stats
}

struct Search<'a> {
    rows: &'a NERows,
    m: usize,
    budget: u64,
    stats: EnumerationStats,
    used: [Vec<bool>; 2],
    /// Chosen elements and their feasible flip words, per group.
    matching: Vec<([usize; 3], Vec<u8>)>,
}

impl Search<'_> {
    fn spend(&mut self) -> ControlFlow<()> {
        if self.stats.nodes >= self.budget {
            self.stats.status = EnumerationStatus::BudgetExceeded;
            return ControlFlow::Break(());
        }
        self.stats.nodes += 1;
        ControlFlow::Continue(())
    }

    fn descend(&mut self, visit: &mut impl FnMut(&Grouping) -> ControlFlow<()>) -> ControlFlow<()> {
        let e0 = self.matching.len();
        if e0 == self.m {
            self.stats.feasible_matchings += 1;
            return self.orientations(visit);
        }
        for e1 in 0..self.m {
            if self.used[0][e1] {
                continue;
            }
            for e2 in 0..self.m {
                if self.used[1][e2] {
                    continue;
                }
                let elements = [e0, e1, e2];
                let mut words = Vec::new();
                for bits in 0..8u8 {
                    self.spend()?;
                    let g = Group {
                        elements,
                        flips: flips_of(bits),
                    };
                    if g.triple(self.rows).is_some() {
                        words.push(bits);
                    }
                }
                if words.is_empty() {
                    continue;
                }
                self.used[0][e1] = true;
                self.used[1][e2] = true;
                self.matching.push((elements, words));
                let flow = self.descend(visit);
                self.matching.pop();
                self.used[0][e1] = false;
                self.used[1][e2] = false;
                flow?;
            }
        }
        ControlFlow::Continue(())
    }

    fn orientations(&mut self, visit: &mut impl FnMut(&Grouping) -> ControlFlow<()>) -> ControlFlow<()> {
        let mut pick = vec![0usize; self.m];
        let mut g = Grouping {
            groups: self
                .matching
                .iter()
                .map(|(elements, words)| Group {
                    elements: *elements,
                    flips: flips_of(words[0]),
                })
                .collect(),
        };
        loop {
            self.spend()?;
            self.stats.feasible_groupings += 1;
            if visit(&g).is_break() {
                self.stats.status = EnumerationStatus::Stopped;
                return ControlFlow::Break(());
            }
            // odometer over the flip words, last group fastest
            let mut k = self.m;
            loop {
                if k == 0 {
                    return ControlFlow::Continue(());
                }
                k -= 1;
                let words = &self.matching[k].1;
                pick[k] += 1;
                if pick[k] < words.len() {
                    g.groups[k].flips = flips_of(words[pick[k]]);
                    break;
                }
                pick[k] = 0;
                g.groups[k].flips = flips_of(words[0]);
            }
        }
    }
}

/// Index of a tuple of `root` at the final round.
pub fn root_tuple(t: &RefinementTranscript, root: ColorId) -> Option<[usize; 3]> {
    let n = t.n();
    let idx = t.coloring(t.rounds()).iter().position(|&c| c == root)?;
    Some([idx / (n * n), (idx / n) % n, idx % n])
}

/// The grouping induced by the actual external nodes of `tuple` in `cloud`.
/// Equal pairs are assigned to nodes in order of appearance.
pub fn real_grouping(
    rows: &NERows,
    cloud: &PointCloud,
    tuple: [usize; 3],
    tol: Tolerance,
) -> Result<Grouping, GroupingError> {
    let m = rows.len();
    if cloud.len() != m + 3 {
        return Err(GroupingError::CloudMismatch(format!(
            "{} points for {m} externals",
            cloud.len()
        )));
    }
    let [a, b, c] = tuple;
    let d = |i: usize, j: usize| tol.ticks(cloud.distance(i, j));
    let mut used = [vec![false; m], vec![false; m], vec![false; m]];
    let mut take = |row: usize, x: Ticks, y: Ticks| -> Result<(usize, bool), GroupingError> {
        let key = [x.min(y), x.max(y)];
        let e = (0..m)
            .find(|&e| !used[row][e] && rows.rows[row][e] == key)
            .ok_or_else(|| GroupingError::CloudMismatch(format!("pair {key:?} missing from row {row}")))?;
        used[row][e] = true;
        Ok((e, x > y))
    };
    let mut groups = Vec::with_capacity(m);
    for j in (0..cloud.len()).filter(|j| !tuple.contains(j)) {
        let (ra, rb, rc) = (d(j, a), d(j, b), d(j, c));
        let (e0, f0) = take(0, rb, rc)?;
        let (e1, f1) = take(1, ra, rc)?;
        let (e2, f2) = take(2, ra, rb)?;
        groups.push(Group {
            elements: [e0, e1, e2],
            flips: [f0, f1, f2],
        });
    }
    groups.sort_unstable_by_key(|g| g.elements[0]);
    Ok(Grouping { groups })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    /// `(r_a, r_b, r_c)`.
    pub triple: [Ticks; 3],
    pub volume_sq: f64,
    pub realizable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TetrahedraComparison {
    pub groups: Vec<GroupCheck>,
    /// Sorted triples present in the grouping beyond the real multiset.
    pub new_tetrahedra: Vec<GroupCheck>,
}

impl TetrahedraComparison {
    pub fn realizable_new(&self) -> usize {
        self.new_tetrahedra.iter().filter(|g| g.realizable).count()
    }
}

/// Cayley-Menger check of each group's tetrahedron over the root triangle,
/// and the multiset difference of its triples against `real`. A triple
/// counts as new only if no reordering of it occurs among the real ones.
/// Returns `None` for an infeasible grouping.
pub fn compare_tetrahedra(
    g: &Grouping,
    rows: &NERows,
    real: &[[Ticks; 3]],
    tol: Tolerance,
) -> Option<TetrahedraComparison> {
    let triples = g.triples(rows)?;
    let [ab, bc, ca] = rows.base().map(|x| tol.length(x));
    let area = triangle_area(ab, bc, ca);
    // a height^2 error of plane_slack moves V^2 = (A h / 3)^2 by this much
    let slack = area * area / 9.0 * tol.plane_slack(ab.max(bc).max(ca));
    let check = |t: [Ticks; 3]| {
        let [ra, rb, rc] = t.map(|x| tol.length(x));
        let volume_sq = cayley_menger_volume_sq(ab, ca, ra, bc, rb, rc);
        GroupCheck {
            triple: t,
            volume_sq,
            realizable: volume_sq >= -slack,
        }
    };
    let sorted = |mut t: [Ticks; 3]| {
        t.sort_unstable();
        t
    };
    let mut remaining: BTreeMap<[Ticks; 3], usize> = BTreeMap::new();
    for &t in real {
        *remaining.entry(sorted(t)).or_default() += 1;
    }
    let mut groups = Vec::with_capacity(triples.len());
    let mut new_tetrahedra = Vec::new();
    for t in triples {
        let c = check(t);
        match remaining.get_mut(&sorted(t)) {
            Some(k) if *k > 0 => *k -= 1,
            _ => new_tetrahedra.push(c.clone()),
        }
        groups.push(c);
    }
    Some(TetrahedraComparison { groups, new_tetrahedra })
}

/// A feasible grouping whose triples differ from the real ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingFinding {
    pub grouping: Grouping,
    pub comparison: TetrahedraComparison,
}

/// Per-root result. Findings are local to one root class; consistency
/// across roots is not checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingReport {
    pub root: RootChoice,
    pub tuple: Option<[usize; 3]>,
    pub ce: [Ticks; 3],
    pub rows: [Vec<[Ticks; 2]>; 3],
    pub row_size: usize,
    pub budget: u64,
    pub stats: EnumerationStats,
    /// `(m!)^2 - feasible_matchings` when the enumeration completed.
    pub infeasible_matchings: Option<u128>,
    /// Distinct sorted triple multisets over all feasible groupings.
    pub distinct_triple_multisets: usize,
    pub real_grouping_found: Option<bool>,
    /// Feasible groupings with a triple absent from the real multiset.
    pub groupings_with_new_tetrahedra: u64,
    /// Of those, groupings where some new tetrahedron is realizable.
    pub realizable_findings: u64,
    /// First few findings, realizable ones first.
    pub findings: Vec<GroupingFinding>,
}

pub const MAX_RECORDED_FINDINGS: usize = 16;

fn factorial(m: usize) -> Option<u128> {
    (1..=m as u128).try_fold(1u128, |acc, k| acc.checked_mul(k))
}

/// Runs the analysis for one root class. With a cloud, the real grouping
/// is the reference; without one, the first feasible grouping is.
pub fn analyze_root(
    t: &RefinementTranscript,
    root: ColorId,
    cloud: Option<&PointCloud>,
    budget: u64,
) -> Result<GroupingReport, GroupingError> {
    let tol = Tolerance::new(t.epsilon()).map_err(|e| GroupingError::MalformedTranscript(e.to_string()))?;
    let rows = build_rows(t, root)?;
    let tuple = root_tuple(t, root);
    let real = match (cloud, tuple) {
        (Some(c), Some(tp)) => Some(real_grouping(&rows, c, tp, tol)?),
        _ => None,
    };
    let mut reference: Option<Vec<[Ticks; 3]>> = real.as_ref().and_then(|g| g.triples(&rows));
    if real.is_some() && reference.is_none() {
        return Err(GroupingError::CloudMismatch(
            "real grouping splices unequal lengths".into(),
        ));
    }
    let real_key = real.as_ref().and_then(|g| g.triple_multiset(&rows));

    let mut real_found = false;
    let mut multisets: std::collections::BTreeSet<Vec<[Ticks; 3]>> = Default::default();
    let mut with_new = 0u64;
    let mut realizable = 0u64;
    let mut findings: Vec<GroupingFinding> = Vec::new();
    let stats = enumerate_groupings(&rows, budget, |g| {
        let key = g.triple_multiset(&rows).expect("enumerated groupings are feasible");
        if Some(&key) == real_key.as_ref() {
            real_found = true;
        }
        let reference = reference.get_or_insert_with(|| key.clone());
        let cmp = compare_tetrahedra(g, &rows, reference, tol).expect("feasible");
        multisets.insert(key);
        if !cmp.new_tetrahedra.is_empty() {
            with_new += 1;
            let hit = cmp.realizable_new() > 0;
            if hit {
                realizable += 1;
            }
            let finding = GroupingFinding {
                grouping: g.clone(),
                comparison: cmp,
            };
            if findings.len() < MAX_RECORDED_FINDINGS {
                findings.push(finding);
            } else if hit {
                if let Some(k) = findings.iter().position(|f| f.comparison.realizable_new() == 0) {
                    findings[k] = finding;
                }
            }
        }
        ControlFlow::Continue(())
    });
    findings.sort_by_key(|f| std::cmp::Reverse(f.comparison.realizable_new()));
    let m = rows.len();
    let infeasible_matchings = (stats.status == EnumerationStatus::Complete)
        .then(|| factorial(m).and_then(|f| f.checked_mul(f)))
        .flatten()
        .map(|total| total - stats.feasible_matchings as u128);
    Ok(GroupingReport {
        root: rows.root,
        tuple,
        ce: rows.ce,
        row_size: m,
        budget,
        stats,
        infeasible_matchings,
        distinct_triple_multisets: multisets.len(),
        real_grouping_found: real.map(|_| real_found),
        groupings_with_new_tetrahedra: with_new,
        realizable_findings: realizable,
        findings,
        rows: rows.rows,
    })
}

/// Runs [`analyze_root`] on every non-degenerate root class, best first.
pub fn analyze_all_roots(
    t: &RefinementTranscript,
    cloud: Option<&PointCloud>,
    budget: u64,
) -> Result<Vec<GroupingReport>, GroupingError> {
    root_classes(t)?
        .iter()
        .map(|r| analyze_root(t, r.color, cloud, budget))
        .collect()
}
