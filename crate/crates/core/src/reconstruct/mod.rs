//! Rebuilding a point cloud from a (3,FWL) transcript alone.
//!
//! The root triangle is laid in a canonical frame, every external node is
//! trilaterated to a mirror pair, and the anchor (the external furthest from
//! the root plane) is fixed above it. The tetrahedron formed by the root and
//! the anchor has three more faces, each of which is itself a tuple of the
//! transcript; their candidate sets pick one member of every mirror pair.
//! Only the interning tables and the final histogram are read, never the
//! per-tuple colorings.

mod cp;
mod face;

pub use cp::{candidate_points, intersect_cps, CandidateEntry, CandidatePointSet, ResolvedNode};
pub use face::{
    classify_ne_case, extract_new_edges, identify_common_edges, resolve_apex_distances, ApexDistances, ApexResolution,
    CommonEdgeReport, NeCase, NeighborFaces,
};

use std::collections::{BTreeMap, HashMap};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{fit_to_ticks, triangle_area, DistanceMatrix, GeometryError, PointCloud, Ticks, Tolerance, Vec3};
use crate::refinement::{refine_to_stable, unroll_color, ColorId, RefinementError, RefinementTranscript, Variant};

/// Largest cloud reconstruction accepts (the tuple space is cubic in n).
pub const MAX_RECONSTRUCT_NODES: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("reconstruction needs a (3,FWL) transcript, got {0}")]
    WrongVariant(Variant),
    #[error("{n} nodes exceeds the reconstruction limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("no final color class has three distinct nodes")]
    NoNonDegenerateTuple,
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("slot {slot} signature does not contain its common edge {ce}")]
    CEAbsentFromSignature { slot: usize, ce: Ticks },
    #[error("new-edge multiset {0:?} is not 2:2:2, 4:2 or 6")]
    ImpossibleHistogram(Vec<Ticks>),
    #[error("new-edge pairs admit no consistent apex: {0}")]
    InconsistentPairs(String),
    #[error("external node cannot be placed: {0}")]
    UnrealizableExternal(String),
    #[error("face vertices are collinear")]
    CollinearFace,
    #[error("no external of anchor rank {0} lies off the root plane")]
    BadAnchor(usize),
    #[error("both mirror positions survive: {0}")]
    AmbiguousNode(String),
    #[error("resolved {found} nodes, expected {expected}")]
    CountMismatch { expected: usize, found: usize },
    #[error("rebuilt cloud refines to a different fingerprint")]
    CertificateMismatch(Box<Certificate>),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Refinement(#[from] RefinementError),
}

impl ReconstructError {
    /// Variant name, for machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            ReconstructError::WrongVariant(_) => "WrongVariant",
            ReconstructError::TooLarge { .. } => "TooLarge",
            ReconstructError::NoNonDegenerateTuple => "NoNonDegenerateTuple",
            ReconstructError::MalformedTranscript(_) => "MalformedTranscript",
            ReconstructError::CEAbsentFromSignature { .. } => "CEAbsentFromSignature",
            ReconstructError::ImpossibleHistogram(_) => "ImpossibleHistogram",
            ReconstructError::InconsistentPairs(_) => "InconsistentPairs",
            ReconstructError::UnrealizableExternal(_) => "UnrealizableExternal",
            ReconstructError::CollinearFace => "CollinearFace",
            ReconstructError::BadAnchor(_) => "BadAnchor",
            ReconstructError::AmbiguousNode(_) => "AmbiguousNode",
            ReconstructError::CountMismatch { .. } => "CountMismatch",
            ReconstructError::CertificateMismatch(_) => "CertificateMismatch",
            ReconstructError::Geometry(_) => "GeometryError",
            ReconstructError::Refinement(_) => "RefinementError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootChoice {
    pub color: ColorId,
    /// Sorted pairwise ticks of the root triangle.
    pub signature: [Ticks; 3],
    pub multiplicity: u64,
}

/// Every final color class of three distinct nodes, best root first:
/// scalene before isosceles, then larger area (better conditioned
/// trilateration), then smallest signature, then smallest id.
pub fn root_classes(t: &RefinementTranscript) -> Result<Vec<RootChoice>, ReconstructError> {
    if t.variant().k() != 3 {
        return Err(ReconstructError::WrongVariant(t.variant()));
    }
    let tol = Tolerance::new(t.epsilon())?;
    let r = t.rounds();
    let mut roots: Vec<RootChoice> = t
        .fingerprint()
        .histogram
        .iter()
        .filter_map(|&(color, count)| {
            let sig = t.init_signature(r, color);
            (sig[0] > 0).then(|| RootChoice {
                color,
                signature: [sig[0], sig[1], sig[2]],
                multiplicity: count,
            })
        })
        .collect();
    if roots.is_empty() {
        return Err(ReconstructError::NoNonDegenerateTuple);
    }
    let area = |s: &[Ticks; 3]| triangle_area(tol.length(s[0]), tol.length(s[1]), tol.length(s[2]));
    roots.sort_by(|x, y| {
        let scalene = |s: &[Ticks; 3]| s[0] != s[1] && s[1] != s[2];
        scalene(&y.signature)
            .cmp(&scalene(&x.signature))
            .then(area(&y.signature).total_cmp(&area(&x.signature)))
            .then(x.signature.cmp(&y.signature))
            .then(x.color.cmp(&y.color))
    });
    Ok(roots)
}

pub fn select_root(t: &RefinementTranscript) -> Result<RootChoice, ReconstructError> {
    Ok(root_classes(t)?[0])
}

/// Multiset of unordered pairwise distances, recovered from the final
/// histogram: each unordered pair at distance `d` owns six `(0, d, d)`
/// triples (two ordered pairs for k = 2).
pub fn pair_distance_multiset(t: &RefinementTranscript) -> Result<BTreeMap<Ticks, usize>, ReconstructError> {
    let r = t.rounds();
    let per_pair = if t.variant().k() == 3 { 6 } else { 2 };
    let mut counts: BTreeMap<Ticks, u64> = BTreeMap::new();
    for &(color, count) in &t.fingerprint().histogram {
        let sig = t.init_signature(r, color);
        let d = match sig {
            [0, x, y] if x == y && *x > 0 => *x,
            [x] if *x > 0 => *x,
            _ => continue,
        };
        *counts.entry(d).or_default() += count;
    }
    counts
        .into_iter()
        .map(|(d, c)| {
            if c % per_pair == 0 {
                Ok((d, (c / per_pair) as usize))
            } else {
                Err(ReconstructError::MalformedTranscript(format!(
                    "distance {d} owns {c} tuples, not a multiple of {per_pair}"
                )))
            }
        })
        .collect()
}

/// Level-1 data of one face tuple.
struct Face {
    ce: [CommonEdgeReport; 3],
    externals: Vec<NeighborFaces>,
}

fn read_face(t: &RefinementTranscript, round: usize, color: ColorId) -> Result<Face, ReconstructError> {
    let node = unroll_color(t, round, color, 1)?;
    let ce = identify_common_edges(&node)?;
    let externals = extract_new_edges(&node, &ce)?;
    Ok(Face { ce, externals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorChoice {
    /// The external furthest from the root plane.
    Highest,
    /// The k-th furthest external (0 = highest).
    Rank(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    pub anchor: AnchorChoice,
    /// Root color class; `None` uses [`select_root`].
    pub root: Option<ColorId>,
    /// Re-refine the output and compare fingerprints.
    pub certify: bool,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            anchor: AnchorChoice::Highest,
            root: None,
            certify: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructionPath {
    /// n <= 3, read from the signatures directly.
    Base,
    /// All points on one line.
    Collinear,
    /// All points in the root plane; no anchor needed.
    Planar,
    /// Anchor plus four-face intersection.
    Spatial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `None` when certification was not requested.
    pub fingerprint_match: Option<bool>,
    pub path: ReconstructionPath,
    pub root: Option<RootChoice>,
    /// `(d_ab, d_bc, d_ca)` of the root triangle.
    pub base_edges: Option<[Ticks; 3]>,
    /// Output index of the anchor node.
    pub anchor: Option<usize>,
    /// Candidate counts after anchor removal: root face, then faces
    /// (a,b,m), (a,m,c), (m,b,c).
    pub cp_sizes: Vec<usize>,
    /// Root-face externals per turn-over case (2:2:2, 4:2, 6).
    pub case_histogram: [usize; 3],
    /// Externals whose pair orientation was not unique; every alternative
    /// was checked to give the same apex distances.
    pub turnover_checks: usize,
    pub collision_notes: Vec<String>,
    pub ambiguous_nodes: usize,
}

impl Certificate {
    fn new(path: ReconstructionPath) -> Self {
        Certificate {
            fingerprint_match: None,
            path,
            root: None,
            base_edges: None,
            anchor: None,
            cp_sizes: Vec::new(),
            case_histogram: [0; 3],
            turnover_checks: 0,
            collision_notes: Vec::new(),
            ambiguous_nodes: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub cloud: PointCloud,
    pub certificate: Certificate,
}

pub fn reconstruct(t: &RefinementTranscript) -> Result<Reconstruction, ReconstructError> {
    reconstruct_with(t, &ReconstructOptions::default())
}

pub fn reconstruct_with(
    t: &RefinementTranscript,
    opts: &ReconstructOptions,
) -> Result<Reconstruction, ReconstructError> {
    if t.variant() != Variant::FWL3 {
        return Err(ReconstructError::WrongVariant(t.variant()));
    }
    if t.n() > MAX_RECONSTRUCT_NODES {
        return Err(ReconstructError::TooLarge {
            n: t.n(),
            max: MAX_RECONSTRUCT_NODES,
        });
    }
    let tol = Tolerance::new(t.epsilon())?;
    let (points, target, mut cert) = match t.n() {
        1 => (
            vec![Vec3::zeros()],
            DistanceMatrix::from_ticks(1, vec![0])?,
            Certificate::new(ReconstructionPath::Base),
        ),
        2 => {
            let pairs = pair_distance_multiset(t)?;
            let (&d, _) = pairs
                .iter()
                .next()
                .ok_or_else(|| ReconstructError::MalformedTranscript("no pair distance".into()))?;
            (
                vec![Vec3::zeros(), Vec3::new(tol.length(d), 0.0, 0.0)],
                DistanceMatrix::from_ticks(2, vec![0, d, d, 0])?,
                Certificate::new(ReconstructionPath::Base),
            )
        }
        _ => Builder::new(t, opts, tol)?.run()?,
    };
    let expected: Vec<Ticks> = pair_distance_multiset(t)?
        .into_iter()
        .flat_map(|(d, c)| std::iter::repeat_n(d, c))
        .collect();
    if target.sorted_entries() != expected {
        return Err(ReconstructError::MalformedTranscript(
            "assembled distances disagree with the transcript's distance multiset".into(),
        ));
    }
    let cloud = fit_to_ticks(&points, &target, tol)?;
    if opts.certify {
        let again = refine_to_stable(&cloud, Variant::FWL3, tol)?;
        let ok = again.fingerprint() == t.fingerprint();
        cert.fingerprint_match = Some(ok);
        if !ok {
            return Err(ReconstructError::CertificateMismatch(Box::new(cert)));
        }
    }
    Ok(Reconstruction {
        cloud,
        certificate: cert,
    })
}

/// A placed external node.
#[derive(Debug, Clone)]
struct Placed {
    pos: Vec3,
    /// Ticks to a, b, c.
    apex: [Ticks; 3],
    /// Root-face entries sharing this apex triple.
    group: Vec<usize>,
}

/// Gauss-Newton on the distances to known points.
fn refine_position(start: Vec3, known: &[(Vec3, f64)]) -> Vec3 {
    let mut p = start;
    for _ in 0..30 {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vec3::zeros();
        for &(q, d) in known {
            let diff = p - q;
            let dist = diff.norm();
            if dist == 0.0 {
                continue;
            }
            let u = diff / dist;
            jtj += u * u.transpose();
            jtr += u * (dist - d);
        }
        let Some(inv) = jtj.try_inverse() else { break };
        let step = inv * jtr;
        p -= step;
        if step.norm() < 1e-15 {
            break;
        }
    }
    p
}

struct Builder<'a> {
    t: &'a RefinementTranscript,
    opts: &'a ReconstructOptions,
    tol: Tolerance,
    cert: Certificate,
    face: Face,
    apexes: Vec<ApexDistances>,
    /// `(d_ab, d_bc, d_ca)`.
    edges: [Ticks; 3],
    frame: [Vec3; 3],
    /// Apex lists of faces `(a, b, j)`, by color.
    abj: HashMap<ColorId, Vec<ApexDistances>>,
}

impl<'a> Builder<'a> {
    fn new(
        t: &'a RefinementTranscript,
        opts: &'a ReconstructOptions,
        tol: Tolerance,
    ) -> Result<Self, ReconstructError> {
        let roots = root_classes(t)?;
        let root = match opts.root {
            None => roots[0],
            Some(c) => *roots.iter().find(|r| r.color == c).ok_or_else(|| {
                ReconstructError::MalformedTranscript(format!("color {c} is not a non-degenerate final class"))
            })?,
        };
        let face = read_face(t, t.rounds(), root.color)?;
        let path = if t.n() == 3 {
            ReconstructionPath::Base
        } else {
            ReconstructionPath::Spatial
        };
        let mut cert = Certificate::new(path);
        let mut apexes = Vec::with_capacity(face.externals.len());
        for nf in &face.externals {
            let res = resolve_apex_distances(nf)?;
            cert.case_histogram[res.case as usize - 1] += 1;
            note_entry(&mut cert, "root", nf, &res);
            apexes.push(res.distances);
        }
        let [ce1, ce2, ce3] = face.ce.map(|r| r.ce_length);
        let edges = [ce3, ce1, ce2];
        let (ab, bc, ca) = (tol.length(ce3), tol.length(ce1), tol.length(ce2));
        let cx = (ab * ab + ca * ca - bc * bc) / (2.0 * ab);
        let cy = (ca * ca - cx * cx).max(0.0).sqrt();
        let frame = [Vec3::zeros(), Vec3::new(ab, 0.0, 0.0), Vec3::new(cx, cy, 0.0)];
        cert.root = Some(root);
        cert.base_edges = Some(edges);
        Ok(Builder {
            t,
            opts,
            tol,
            cert,
            face,
            apexes,
            edges,
            frame,
            abj: HashMap::new(),
        })
    }

    fn run(mut self) -> Result<(Vec<Vec3>, DistanceMatrix, Certificate), ReconstructError> {
        let tol = self.tol;
        let [d_ab, d_bc, d_ca] = self.edges.map(|e| tol.length(e));
        let longest = d_ab.max(d_bc).max(d_ca);
        let placed: Vec<Placed> = if triangle_area(d_ab, d_bc, d_ca) < tol.epsilon * longest * longest {
            self.cert.path = ReconstructionPath::Collinear;
            self.apexes
                .iter()
                .enumerate()
                .map(|(tag, ap)| {
                    let [ra, rb, _] = ap.0.map(|x| tol.length(x));
                    let x = (ra * ra - rb * rb + d_ab * d_ab) / (2.0 * d_ab);
                    Placed {
                        pos: Vec3::new(x, 0.0, 0.0),
                        apex: ap.0,
                        group: vec![tag],
                    }
                })
                .collect()
        } else {
            let all = candidate_points(self.frame, [0, 1, 2], &self.apexes, None, tol)?;
            let mut ranked: Vec<(f64, usize)> = all
                .entries
                .iter()
                .filter(|e| e.points.len() == 2)
                .map(|e| (e.points[0].z, e.tag))
                .collect();
            let flat = tol.plane_height(longest);
            if ranked.iter().all(|&(z, _)| z <= flat) {
                if self.cert.path != ReconstructionPath::Base {
                    self.cert.path = ReconstructionPath::Planar;
                }
                self.cert.cp_sizes = vec![all.entries.len()];
                all.entries
                    .iter()
                    .map(|e| Placed {
                        pos: Vec3::new(e.points[0].x, e.points[0].y, 0.0),
                        apex: e.apex.0,
                        group: vec![e.tag],
                    })
                    .collect()
            } else {
                ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
                let rank = match self.opts.anchor {
                    AnchorChoice::Highest => 0,
                    AnchorChoice::Rank(k) => k,
                };
                let m_tag = ranked.get(rank).ok_or(ReconstructError::BadAnchor(rank))?.1;
                self.spatial(m_tag)?
            }
        };

        let mut points = self.frame.to_vec();
        points.extend(placed.iter().map(|p| p.pos));
        let target = self.target_matrix(&placed, &points)?;
        Ok((points, target, self.cert))
    }

    /// Anchor `m` above the root plane, candidate sets for the root face and
    /// the three faces through `m`, and their intersection.
    fn spatial(&mut self, m_tag: usize) -> Result<Vec<Placed>, ReconstructError> {
        let tol = self.tol;
        let [a, b, c] = self.frame;
        let [e_ab, e_bc, e_ca] = self.edges;
        let cp1 = candidate_points(self.frame, [0, 1, 2], &self.apexes, Some(m_tag), tol)?;
        let m = cp1.anchor.expect("anchor was requested");
        let [m_a, m_b, m_c] = self.apexes[m_tag].0;
        // Entry of m: colors of (m,b,c), (a,m,c), (a,b,m) one round down.
        let colors = self.face.externals[m_tag].colors;
        let cp2 = self.face_cp(colors[2], [a, b, m], [0, 1, 3], [m_b, m_a, e_ab], [e_ca, e_bc, m_c])?;
        let cp3 = self.face_cp(colors[1], [a, m, c], [0, 3, 2], [m_c, e_ca, m_a], [e_ab, m_b, e_bc])?;
        let cp4 = self.face_cp(colors[0], [m, b, c], [3, 1, 2], [e_bc, m_c, m_b], [m_a, e_ab, e_ca])?;
        self.cert.cp_sizes = vec![cp1.len(), cp2.len(), cp3.len(), cp4.len()];
        for (name, cp) in [("(a,b,m)", &cp2), ("(a,m,c)", &cp3), ("(m,b,c)", &cp4)] {
            if cp.entries.len() != cp1.entries.len() {
                return Err(ReconstructError::MalformedTranscript(format!(
                    "face {name} has {} externals, root face {}",
                    cp.entries.len(),
                    cp1.entries.len()
                )));
            }
        }
        let resolved = intersect_cps(&cp1, &[&cp2, &cp3, &cp4], tol)?;

        let mut placed = vec![Placed {
            pos: m,
            apex: self.apexes[m_tag].0,
            group: vec![m_tag],
        }];
        self.cert.anchor = Some(3);
        for r in resolved {
            let mut known: Vec<(Vec3, f64)> = [a, b, c]
                .iter()
                .zip(r.apex.0)
                .map(|(&p, d)| (p, tol.length(d)))
                .collect();
            if let Some(&(_, d)) = r.extra.iter().find(|&&(l, _)| l == 3) {
                known.push((m, tol.length(d)));
            }
            placed.push(Placed {
                pos: refine_position(r.position, &known),
                apex: r.apex.0,
                group: r.group,
            });
        }
        Ok(placed)
    }

    /// Candidate set of a face through the anchor. `expected_ce` are the
    /// face's common edges per slot, `fourth` the distances from the
    /// remaining root vertex, whose entry is removed.
    fn face_cp(
        &mut self,
        color: ColorId,
        positions: [Vec3; 3],
        labels: [usize; 3],
        expected_ce: [Ticks; 3],
        fourth: [Ticks; 3],
    ) -> Result<CandidatePointSet, ReconstructError> {
        let face = read_face(self.t, self.t.rounds() - 1, color)?;
        if face.ce.map(|r| r.ce_length) != expected_ce {
            return Err(ReconstructError::MalformedTranscript(format!(
                "face {labels:?} common edges {:?}, expected {expected_ce:?}",
                face.ce.map(|r| r.ce_length)
            )));
        }
        let mut apexes = Vec::with_capacity(face.externals.len());
        for nf in &face.externals {
            let res = resolve_apex_distances(nf)?;
            note_entry(&mut self.cert, &format!("face {labels:?}"), nf, &res);
            apexes.push(res.distances);
        }
        let pos = apexes.iter().position(|ap| ap.0 == fourth).ok_or_else(|| {
            ReconstructError::MalformedTranscript(format!("face {labels:?} lacks the entry {fourth:?}"))
        })?;
        apexes.remove(pos);
        candidate_points(positions, labels, &apexes, None, self.tol)
    }

    /// Apex triples (to a, b, j) of the other externals, from the face
    /// `(a, b, j)` of root entry `tag`.
    fn abj_list(&mut self, tag: usize) -> Result<&[ApexDistances], ReconstructError> {
        let color = self.face.externals[tag].colors[2];
        if !self.abj.contains_key(&color) {
            let face = read_face(self.t, self.t.rounds() - 1, color)?;
            let list = face
                .externals
                .iter()
                .map(|nf| resolve_apex_distances(nf).map(|r| r.distances))
                .collect::<Result<Vec<_>, _>>()?;
            self.abj.insert(color, list);
        }
        Ok(&self.abj[&color])
    }

    /// Exact ticks for every pair. Pairs with a root vertex come from the
    /// apex triples; a pair of externals `(j, k)` is read from the faces
    /// `(a, b, j)` and `(a, b, k)`, picking among entries that match the
    /// other node's distances to a and b the one closest to the placed
    /// distance.
    fn target_matrix(&mut self, placed: &[Placed], points: &[Vec3]) -> Result<DistanceMatrix, ReconstructError> {
        let n = points.len();
        let mut d = vec![0; n * n];
        let mut set = |i: usize, j: usize, v: Ticks| {
            d[i * n + j] = v;
            d[j * n + i] = v;
        };
        let [e_ab, e_bc, e_ca] = self.edges;
        set(0, 1, e_ab);
        set(1, 2, e_bc);
        set(2, 0, e_ca);
        for (k, p) in placed.iter().enumerate() {
            for v in 0..3 {
                set(v, 3 + k, p.apex[v]);
            }
        }
        for j in 0..placed.len() {
            for k in j + 1..placed.len() {
                let float = (points[3 + j] - points[3 + k]).norm();
                let mut options: Vec<Ticks> = Vec::new();
                for (from, to) in [(j, k), (k, j)] {
                    let want = &placed[to].apex;
                    for &tag in &placed[from].group {
                        options.extend(
                            self.abj_list(tag)?
                                .iter()
                                .filter(|e| e.0[0] == want[0] && e.0[1] == want[1])
                                .map(|e| e.0[2]),
                        );
                    }
                }
                let best = options
                    .into_iter()
                    .min_by(|x, y| {
                        let dx = (self.tol.length(*x) - float).abs();
                        let dy = (self.tol.length(*y) - float).abs();
                        dx.total_cmp(&dy).then(x.cmp(y))
                    })
                    .ok_or_else(|| {
                        ReconstructError::MalformedTranscript(format!("no face entry pairs externals {j} and {k}"))
                    })?;
                set(3 + j, 3 + k, best);
            }
        }
        Ok(DistanceMatrix::from_ticks(n, d)?)
    }
}

fn note_entry(cert: &mut Certificate, face: &str, nf: &NeighborFaces, res: &ApexResolution) {
    if res.consistent_orientations > 1 {
        cert.turnover_checks += 1;
    }
    for &s in &nf.collisions {
        cert.collision_notes.push(format!(
            "{face} entry {}: slot {s} signature repeats its common edge",
            nf.entry
        ));
    }
}

/// Turn-over and common-edge statistics over root classes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrickStats {
    pub roots: usize,
    pub externals: usize,
    /// Externals per case: 2:2:2, 4:2, 6.
    pub case_histogram: [usize; 3],
    pub impossible_histograms: usize,
    /// Externals with more than one consistent pair orientation.
    pub turnovers: usize,
    /// Slot signatures that repeat their common edge.
    pub collisions: usize,
    /// Roots with all three common edges equal.
    pub equilateral_roots: usize,
}

/// Reads every non-degenerate final class (or only the selected root) of a
/// (3,FWL) transcript and tallies the new-edge cases of its externals.
pub fn trick_statistics(t: &RefinementTranscript, all_roots: bool) -> Result<TrickStats, ReconstructError> {
    if t.variant() != Variant::FWL3 {
        return Err(ReconstructError::WrongVariant(t.variant()));
    }
    let mut roots = root_classes(t)?;
    if !all_roots {
        roots.truncate(1);
    }
    let mut stats = TrickStats::default();
    for root in roots {
        let face = read_face(t, t.rounds(), root.color)?;
        stats.roots += 1;
        let ce = face.ce.map(|r| r.ce_length);
        if ce[0] == ce[1] && ce[1] == ce[2] {
            stats.equilateral_roots += 1;
        }
        for nf in &face.externals {
            stats.externals += 1;
            stats.collisions += nf.collisions.len();
            match resolve_apex_distances(nf) {
                Ok(res) => {
                    stats.case_histogram[res.case as usize - 1] += 1;
                    if res.consistent_orientations > 1 {
                        stats.turnovers += 1;
                    }
                }
                Err(ReconstructError::ImpossibleHistogram(_)) => stats.impossible_histograms += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests;
