//! Cloud families for testing and counterexample search: seeded random
//! clouds, symmetric templates, integer lattice subsets, the distance
//! exchange constructor and exact congruence-preserving transformations.

mod exchange;
mod lattice;

pub use exchange::{apply_exchange, exchange_candidates, CandidatePair, ExchangeMove, Provenance};
pub use lattice::{lattice_classes, LatticeClass};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, PointCloud, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("family {family} needs at least {min} points, got {n}")]
    TooFewPoints { family: &'static str, n: usize, min: usize },
    #[error("bad indices: {0}")]
    BadIndices(String),
    #[error("lattice box with extent {extent} holds fewer than {n} points")]
    LatticeTooSmall { n: usize, extent: usize },
    #[error("could not place {n} separated points after {attempts} draws")]
    SeparationUnreachable { n: usize, attempts: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Coordinates of generated clouds are rounded to multiples of this, so that
/// integer translations, axis permutations and negations are exact in f64.
pub const GRID: f64 = 1.0 / (1u64 << 32) as f64;

fn snap(cloud: &PointCloud) -> PointCloud {
    let pts = cloud
        .points()
        .iter()
        .map(|p| p.map(|c| (c / GRID).round() * GRID))
        .collect();
    PointCloud::new(pts).expect("snapping keeps coordinates finite")
}

/// Unit-diameter normalization followed by grid snapping.
pub fn normalize_exact(cloud: &PointCloud) -> PointCloud {
    snap(&cloud.normalized())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Random,
    Lattice,
    Symmetric,
    Exchange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// Three points on z = 0, the rest in (x, y, +z) / (x, y, -z) pairs.
    MirrorPair,
    /// Unit square base plus points on its axis.
    SquarePyramid,
    /// Layers of one triangle stacked along z.
    Prism,
    /// Random points on z = 0.
    Planar,
}

impl Template {
    pub const ALL: [Template; 4] = [
        Template::MirrorPair,
        Template::SquarePyramid,
        Template::Prism,
        Template::Planar,
    ];
}

fn default_min_separation() -> f64 {
    1e-3
}
fn default_extent() -> usize {
    2
}
fn default_max_pivots() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    /// Minimum pairwise distance, relative to the unit-diameter cloud.
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
    /// Lattice coordinates range over `0..=extent`.
    #[serde(default = "default_extent")]
    pub extent: usize,
    #[serde(default)]
    pub template: Option<Template>,
    /// Largest pivot set tried by the exchange family.
    #[serde(default = "default_max_pivots")]
    pub max_pivots: usize,
    /// Upper end of the size range for the exchange family (`n` is the lower end).
    #[serde(default)]
    pub n_max: Option<usize>,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            min_separation: default_min_separation(),
            extent: default_extent(),
            template: None,
            max_pivots: default_max_pivots(),
            n_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub params: FamilyParams,
}

impl FamilySpec {
    pub fn random(n: usize, seed: u64) -> Self {
        FamilySpec {
            family: Family::Random,
            n,
            seed,
            params: FamilyParams::default(),
        }
    }

    pub fn symmetric(template: Template, n: usize, seed: u64) -> Self {
        FamilySpec {
            family: Family::Symmetric,
            n,
            seed,
            params: FamilyParams {
                template: Some(template),
                ..FamilyParams::default()
            },
        }
    }
}

/// Builds the cloud described by a random, symmetric or lattice spec. The
/// exchange family describes a campaign rather than a single cloud; for it
/// this returns a lattice cloud of the same size.
pub fn generate(spec: &FamilySpec) -> Result<PointCloud, GenerateError> {
    match spec.family {
        Family::Random => random_cloud_with(spec.n, spec.seed, spec.params.min_separation),
        Family::Symmetric => symmetric_cloud(
            spec.params.template.unwrap_or(Template::SquarePyramid),
            spec.n,
            spec.seed,
        ),
        Family::Lattice | Family::Exchange => lattice_cloud(spec.n, spec.params.extent, spec.seed),
    }
}

pub fn random_cloud(n: usize, seed: u64) -> Result<PointCloud, GenerateError> {
    random_cloud_with(n, seed, default_min_separation())
}

/// `n` i.i.d. uniform points in the unit cube, normalized to unit diameter.
/// Points closer than `min_separation` (after normalization) are redrawn.
pub fn random_cloud_with(n: usize, seed: u64, min_separation: f64) -> Result<PointCloud, GenerateError> {
    if n == 0 {
        return Err(GenerateError::TooFewPoints {
            family: "random",
            n,
            min: 1,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = 1000;
    for _ in 0..attempts {
        let pts: Vec<Vec3> = (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let cloud = normalize_exact(&PointCloud::new(pts)?);
        if separated(&cloud, min_separation) {
            return Ok(cloud);
        }
    }
    Err(GenerateError::SeparationUnreachable { n, attempts })
}

fn separated(cloud: &PointCloud, min_separation: f64) -> bool {
    let n = cloud.len();
    (0..n).all(|i| (i + 1..n).all(|j| cloud.distance(i, j) >= min_separation))
}

/// Smallest nonzero gap between distinct pairwise distances divided by the
/// diameter. Used to screen out near-coincident distances.
pub fn min_distance_gap(cloud: &PointCloud) -> f64 {
    let n = cloud.len();
    let mut d: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| cloud.distance(i, j))
        .collect();
    d.sort_by(f64::total_cmp);
    d.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

pub fn symmetric_cloud(template: Template, n: usize, seed: u64) -> Result<PointCloud, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let too_few = |min: usize, family: &'static str| GenerateError::TooFewPoints { family, n, min };
    let mut pts: Vec<Vec3> = Vec::with_capacity(n);
    match template {
        Template::MirrorPair => {
            if n < 3 {
                return Err(too_few(3, "mirror-pair"));
            }
            pts.extend([
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(rng.random_range(0.2..0.8), rng.random_range(0.6..1.0), 0.0),
            ]);
            while pts.len() + 1 < n {
                let x = rng.random_range(-0.2..1.2);
                let y = rng.random_range(-0.2..1.2);
                let z = rng.random_range(0.2..1.0);
                pts.push(Vec3::new(x, y, z));
                pts.push(Vec3::new(x, y, -z));
            }
            if pts.len() < n {
                pts.push(Vec3::new(rng.random_range(-0.5..1.5), rng.random_range(1.1..1.5), 0.0));
            }
        }
        Template::SquarePyramid => {
            if n < 4 {
                return Err(too_few(4, "square-pyramid"));
            }
            pts.extend([
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(-1.0, 1.0, 0.0),
                Vec3::new(-1.0, -1.0, 0.0),
                Vec3::new(1.0, -1.0, 0.0),
            ]);
            let mut heights: Vec<f64> = Vec::new();
            while heights.len() < n - 4 {
                let h = rng.random_range(0.3..2.0) * if heights.len().is_multiple_of(2) { 1.0 } else { -1.0 };
                if heights.iter().all(|&o: &f64| (o - h).abs() > 0.05) {
                    heights.push(h);
                }
            }
            pts.extend(heights.iter().map(|&h| Vec3::new(0.0, 0.0, h)));
        }
        Template::Prism => {
            if n < 3 {
                return Err(too_few(3, "prism"));
            }
            let tri = [
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(rng.random_range(0.2..0.8), rng.random_range(0.5..1.0), 0.0),
            ];
            let h = rng.random_range(0.4..0.9);
            let mut layer = 0.0;
            while pts.len() + 3 <= n {
                pts.extend(tri.iter().map(|p| p + Vec3::new(0.0, 0.0, layer)));
                layer += h;
            }
            let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
            let mut extra = layer;
            while pts.len() < n {
                pts.push(centroid + Vec3::new(0.0, 0.0, extra));
                extra += h;
            }
        }
        Template::Planar => {
            if n == 0 {
                return Err(too_few(1, "planar"));
            }
            for _ in 0..1000 {
                pts = (0..n).map(|_| Vec3::new(rng.random(), rng.random(), 0.0)).collect();
                if separated(&PointCloud::new(pts.clone())?.normalized(), default_min_separation()) {
                    break;
                }
            }
        }
    }
    Ok(normalize_exact(&PointCloud::new(pts)?))
}

/// A seeded random `n`-subset of the lattice box `{0..=extent}^3`.
pub fn lattice_cloud(n: usize, extent: usize, seed: u64) -> Result<PointCloud, GenerateError> {
    let side = extent + 1;
    let total = side * side * side;
    if n > total || n == 0 {
        return Err(GenerateError::LatticeTooSmall { n, extent });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<usize> = (0..total).collect();
    cells.shuffle(&mut rng);
    let mut chosen = cells[..n].to_vec();
    chosen.sort_unstable();
    let pts = chosen
        .iter()
        .map(|&c| lattice_point(c, side))
        .map(|[x, y, z]| Vec3::new(x as f64, y as f64, z as f64))
        .collect();
    Ok(PointCloud::new(pts)?)
}

pub(crate) fn lattice_point(cell: usize, side: usize) -> [i64; 3] {
    [
        (cell / (side * side)) as i64,
        ((cell / side) % side) as i64,
        (cell % side) as i64,
    ]
}

/// Exact congruence-preserving transformations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// Output node `i` is input node `perm[i]`.
    Permute(Vec<usize>),
    /// Negates one coordinate axis.
    Reflect(usize),
    /// Output coordinate `a` is input coordinate `axes[a]`.
    AxisPermutation([usize; 3]),
    /// Adds an integer vector.
    Translate([i32; 3]),
}

impl Transform {
    /// Draws one transformation of each kind.
    pub fn random_chain(n: usize, rng: &mut impl Rng) -> Vec<Transform> {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mut axes = [0, 1, 2];
        axes.shuffle(rng);
        vec![
            Transform::Permute(perm),
            Transform::Reflect(rng.random_range(0..3)),
            Transform::AxisPermutation(axes),
            Transform::Translate([
                rng.random_range(-5..=5),
                rng.random_range(-5..=5),
                rng.random_range(-5..=5),
            ]),
        ]
    }
}

pub fn transform_cloud(cloud: &PointCloud, op: &Transform) -> Result<PointCloud, GenerateError> {
    let pts = cloud.points();
    let out: Vec<Vec3> = match op {
        Transform::Permute(perm) => {
            let mut seen = vec![false; pts.len()];
            if perm.len() != pts.len()
                || perm
                    .iter()
                    .any(|&i| i >= pts.len() || std::mem::replace(&mut seen[i], true))
            {
                return Err(GenerateError::BadIndices(format!(
                    "{perm:?} is not a permutation of {} nodes",
                    pts.len()
                )));
            }
            perm.iter().map(|&i| pts[i]).collect()
        }
        Transform::Reflect(axis) => {
            if *axis > 2 {
                return Err(GenerateError::BadIndices(format!("axis {axis}")));
            }
            pts.iter()
                .map(|p| {
                    let mut q = *p;
                    q[*axis] = -q[*axis];
                    q
                })
                .collect()
        }
        Transform::AxisPermutation(axes) => {
            let mut sorted = *axes;
            sorted.sort_unstable();
            if sorted != [0, 1, 2] {
                return Err(GenerateError::BadIndices(format!(
                    "{axes:?} is not an axis permutation"
                )));
            }
            pts.iter()
                .map(|p| Vec3::new(p[axes[0]], p[axes[1]], p[axes[2]]))
                .collect()
        }
        Transform::Translate(t) => pts
            .iter()
            .map(|p| p + Vec3::new(t[0] as f64, t[1] as f64, t[2] as f64))
            .collect(),
    };
    Ok(PointCloud::new(out)?)
}

pub fn transform_chain(cloud: &PointCloud, ops: &[Transform]) -> Result<PointCloud, GenerateError> {
    ops.iter().try_fold(cloud.clone(), |c, op| transform_cloud(&c, op))
}
