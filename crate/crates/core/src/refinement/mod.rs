//! k-WL and k-FWL color refinement over ordered k-tuples of a point cloud,
//! for k in {2, 3}.
//!
//! Colors are interned canonically: every round, the distinct tuple
//! signatures are sorted and numbered in that order. Two runs on congruent
//! clouds therefore produce identical tables, and the tables themselves form
//! an invertible record of the update (`ColorId -> signature`), which is what
//! reconstruction walks backwards.

mod transcript;
mod tree;

pub use transcript::{Fingerprint, RefinementTranscript, Rule};
pub use tree::{unroll_color, unroll_tree, Children, TreeNode, WLTree};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{distance_matrix, DistanceMatrix, GeometryError, PointCloud, Ticks, Tolerance};

pub type ColorId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefinementError {
    #[error("unknown variant {0:?} (expected 2wl, 2fwl, 3wl or 3fwl)")]
    UnknownVariant(String),
    #[error("refinement did not stabilize within {0} rounds")]
    NoConvergence(usize),
    #[error("requested depth {depth} exceeds the {rounds} recorded rounds")]
    DepthExceedsRounds { depth: usize, rounds: usize },
    #[error("tuple {0:?} does not match the transcript's arity or node count")]
    BadTuple(Vec<usize>),
    #[error("tuple space n^k = {0} exceeds the engine limit")]
    TooLarge(usize),
    #[error("malformed transcript: {0}")]
    Malformed(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Largest tuple space the engine will refine.
pub const MAX_TUPLES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flavor {
    /// Separate neighbor multiset per replaced slot.
    Wl,
    /// One multiset of joint replacements.
    Fwl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant {
    k: usize,
    flavor: Flavor,
}

impl Variant {
    pub const WL2: Variant = Variant {
        k: 2,
        flavor: Flavor::Wl,
    };
    pub const FWL2: Variant = Variant {
        k: 2,
        flavor: Flavor::Fwl,
    };
    pub const WL3: Variant = Variant {
        k: 3,
        flavor: Flavor::Wl,
    };
    pub const FWL3: Variant = Variant {
        k: 3,
        flavor: Flavor::Fwl,
    };

    pub const ALL: [Variant; 4] = [Variant::WL2, Variant::FWL2, Variant::WL3, Variant::FWL3];

    pub fn new(k: usize, flavor: Flavor) -> Option<Variant> {
        matches!(k, 2 | 3).then_some(Variant { k, flavor })
    }

    pub fn k(self) -> usize {
        self.k
    }

    pub fn flavor(self) -> Flavor {
        self.flavor
    }

    pub fn name(self) -> &'static str {
        match (self.k, self.flavor) {
            (2, Flavor::Wl) => "2wl",
            (2, Flavor::Fwl) => "2fwl",
            (3, Flavor::Wl) => "3wl",
            _ => "3fwl",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = RefinementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s
            .to_ascii_lowercase()
            .replace(['-', '_', ' ', '(', ')', ','], "")
            .as_str()
        {
            "2wl" => Ok(Variant::WL2),
            "2fwl" => Ok(Variant::FWL2),
            "3wl" => Ok(Variant::WL3),
            "3fwl" => Ok(Variant::FWL3),
            _ => Err(RefinementError::UnknownVariant(s.to_string())),
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Index arithmetic over `[n]^k` in row-major order.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TupleSpace {
    pub n: usize,
    pub k: usize,
}

impl TupleSpace {
    pub fn len(self) -> usize {
        self.n.pow(self.k as u32)
    }

    fn stride(self, slot: usize) -> usize {
        self.n.pow((self.k - 1 - slot) as u32)
    }

    pub fn index(self, tuple: &[usize]) -> Option<usize> {
        if tuple.len() != self.k || tuple.iter().any(|&v| v >= self.n) {
            return None;
        }
        Some(tuple.iter().fold(0, |acc, &v| acc * self.n + v))
    }

    pub fn tuple(self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for slot in (0..self.k).rev() {
            out[slot] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Index of the tuple with `slot` replaced by node `w`.
    pub fn replace(self, idx: usize, slot: usize, w: usize) -> usize {
        let stride = self.stride(slot);
        let digit = (idx / stride) % self.n;
        idx - digit * stride + w * stride
    }
}

/// Initial tuple signature: the pairwise distances inside the tuple, sorted
/// ascending (one distance for k = 2, three for k = 3).
pub fn init_signature(d: &DistanceMatrix, tuple: &[usize]) -> Vec<Ticks> {
    let mut sig: Vec<Ticks> = match tuple {
        [i, j] => vec![d.get(*i, *j)],
        [a, b, c] => vec![d.get(*a, *b), d.get(*b, *c), d.get(*c, *a)],
        _ => unreachable!("arity is validated by Variant"),
    };
    sig.sort_unstable();
    sig
}

/// Round-0 coloring and the table mapping each initial ColorId to its
/// signature.
pub fn init_colors(
    cloud: &PointCloud,
    variant: Variant,
    tol: Tolerance,
) -> Result<(Vec<ColorId>, Vec<Vec<Ticks>>), RefinementError> {
    let d = distance_matrix(cloud, tol)?;
    init_colors_from_matrix(&d, variant)
}

pub fn init_colors_from_matrix(
    d: &DistanceMatrix,
    variant: Variant,
) -> Result<(Vec<ColorId>, Vec<Vec<Ticks>>), RefinementError> {
    let space = TupleSpace {
        n: d.n(),
        k: variant.k(),
    };
    if space.len() > MAX_TUPLES {
        return Err(RefinementError::TooLarge(space.len()));
    }
    let sigs: Vec<Vec<Ticks>> = (0..space.len())
        .map(|idx| init_signature(d, &space.tuple(idx)))
        .collect();
    Ok(intern(&sigs))
}

/// Assigns ids in sorted signature order.
fn intern<T: Ord + Clone + Sync>(sigs: &[T]) -> (Vec<ColorId>, Vec<T>) {
    let mut order: Vec<usize> = (0..sigs.len()).collect();
    order.par_sort_by(|&a, &b| sigs[a].cmp(&sigs[b]));
    let mut ids = vec![0; sigs.len()];
    let mut table: Vec<T> = Vec::new();
    for (pos, &idx) in order.iter().enumerate() {
        if pos == 0 || sigs[idx] != sigs[order[pos - 1]] {
            table.push(sigs[idx].clone());
        }
        ids[idx] = (table.len() - 1) as ColorId;
    }
    (ids, table)
}

/// One refinement round. Returns the new coloring and its rule table
/// (`table[c]` is the signature that produced color `c`).
pub fn refine_step(n: usize, variant: Variant, coloring: &[ColorId]) -> (Vec<ColorId>, Vec<Rule>) {
    let space = TupleSpace { n, k: variant.k() };
    let k = variant.k();
    let sigs: Vec<Rule> = (0..space.len())
        .into_par_iter()
        .map(|idx| {
            let prev = coloring[idx];
            let neighbors = match variant.flavor() {
                Flavor::Fwl => {
                    let mut entries: Vec<[ColorId; 3]> = (0..n)
                        .map(|w| {
                            let mut e = [0; 3];
                            for (slot, v) in e.iter_mut().enumerate().take(k) {
                                *v = coloring[space.replace(idx, slot, w)];
                            }
                            e
                        })
                        .collect();
                    entries.sort_unstable();
                    entries.iter().flat_map(|e| e[..k].iter().copied()).collect()
                }
                Flavor::Wl => {
                    let mut flat = Vec::with_capacity(k * n);
                    for slot in 0..k {
                        let start = flat.len();
                        flat.extend((0..n).map(|w| coloring[space.replace(idx, slot, w)]));
                        flat[start..].sort_unstable();
                    }
                    flat
                }
            };
            Rule { prev, neighbors }
        })
        .collect();
    intern(&sigs)
}

pub fn refine_to_stable(
    cloud: &PointCloud,
    variant: Variant,
    tol: Tolerance,
) -> Result<RefinementTranscript, RefinementError> {
    let d = distance_matrix(cloud, tol)?;
    refine_matrix(&d, variant, tol)
}

/// Minimum number of recorded rounds; reconstruction unrolls three levels.
pub const MIN_ROUNDS: usize = 3;

/// Refines a quantized distance matrix to stability. Runs at least
/// [`MIN_ROUNDS`] rounds, re-applying the stable map when the partition
/// settles earlier.
pub fn refine_matrix(
    d: &DistanceMatrix,
    variant: Variant,
    tol: Tolerance,
) -> Result<RefinementTranscript, RefinementError> {
    let n = d.n();
    let (c0, init_table) = init_colors_from_matrix(d, variant)?;
    let cap = n.pow(variant.k() as u32) + 1;
    let mut colorings = vec![c0];
    let mut rules: Vec<Vec<Rule>> = Vec::new();
    let mut classes = init_table.len();
    let mut stable_at = None;
    while stable_at.is_none() || colorings.len() <= MIN_ROUNDS {
        if rules.len() >= cap.max(MIN_ROUNDS) {
            return Err(RefinementError::NoConvergence(cap));
        }
        let (next, table) = refine_step(n, variant, colorings.last().expect("round 0"));
        if stable_at.is_none() && table.len() == classes {
            stable_at = Some(rules.len() + 1);
        }
        classes = table.len();
        colorings.push(next);
        rules.push(table);
    }
    Ok(RefinementTranscript::assemble(
        variant,
        n,
        tol.epsilon,
        init_table,
        rules,
        colorings,
    ))
}
