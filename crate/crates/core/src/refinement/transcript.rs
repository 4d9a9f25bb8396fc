use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ColorId, Flavor, RefinementError, TupleSpace, Variant};
use crate::geometry::Ticks;

/// Signature that produced a color: the tuple's previous color plus its
/// neighbor colors.
///
/// For FWL variants `neighbors` holds `n` entries of `k` colors each, sorted
/// lexicographically and flattened. For WL variants it holds `k` slot
/// multisets of `n` colors each, every slot sorted on its own.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    pub prev: ColorId,
    pub neighbors: Vec<ColorId>,
}

impl Rule {
    /// FWL: the `n` joint entries. WL: the `k` slot multisets.
    pub fn groups(&self, variant: Variant, n: usize) -> Vec<&[ColorId]> {
        let width = match variant.flavor() {
            Flavor::Fwl => variant.k(),
            Flavor::Wl => n,
        };
        self.neighbors.chunks(width.max(1)).collect()
    }
}

/// Isomorphism-invariant summary of a stable refinement.
///
/// `histogram` is the multiset of final colors. `derivation` is a SHA-256
/// digest of the variant, node count and every interning table, so equal
/// fingerprints mean the two runs assigned the same meaning to every id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    pub variant: Variant,
    pub n: usize,
    pub rounds: usize,
    pub histogram: Vec<(ColorId, u64)>,
    pub derivation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTranscript {
    variant: Variant,
    n: usize,
    epsilon: f64,
    rounds: usize,
    /// Initial signature (sorted pairwise ticks) of each round-0 color.
    init_table: Vec<Vec<Ticks>>,
    /// `rules[t - 1][c]` produced color `c` at round `t`.
    rules: Vec<Vec<Rule>>,
    /// Coloring of every tuple at rounds `0..=rounds`, indexed row-major.
    colorings: Vec<Vec<ColorId>>,
    fingerprint: Fingerprint,
}

fn derivation_digest(variant: Variant, n: usize, init_table: &[Vec<Ticks>], rules: &[Vec<Rule>]) -> String {
    let mut h = Sha256::new();
    h.update(variant.name().as_bytes());
    h.update((n as u64).to_le_bytes());
    h.update((init_table.len() as u64).to_le_bytes());
    for sig in init_table {
        for t in sig {
            h.update(t.to_le_bytes());
        }
    }
    for table in rules {
        h.update((table.len() as u64).to_le_bytes());
        for rule in table {
            h.update(rule.prev.to_le_bytes());
            for c in &rule.neighbors {
                h.update(c.to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

fn histogram(coloring: &[ColorId], classes: usize) -> Vec<(ColorId, u64)> {
    let mut counts = vec![0u64; classes];
    for &c in coloring {
        counts[c as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|&(_, k)| k > 0)
        .map(|(c, k)| (c as ColorId, k))
        .collect()
}

impl RefinementTranscript {
    pub(crate) fn assemble(
        variant: Variant,
        n: usize,
        epsilon: f64,
        init_table: Vec<Vec<Ticks>>,
        rules: Vec<Vec<Rule>>,
        colorings: Vec<Vec<ColorId>>,
    ) -> Self {
        let rounds = rules.len();
        let last_classes = rules.last().map_or(init_table.len(), Vec::len);
        let fingerprint = Fingerprint {
            variant,
            n,
            rounds,
            histogram: histogram(colorings.last().expect("round 0"), last_classes),
            derivation: derivation_digest(variant, n, &init_table, &rules),
        };
        RefinementTranscript {
            variant,
            n,
            epsilon,
            rounds,
            init_table,
            rules,
            colorings,
            fingerprint,
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn init_table(&self) -> &[Vec<Ticks>] {
        &self.init_table
    }

    /// Interning table of round `round` (1-based).
    pub fn rules(&self, round: usize) -> &[Rule] {
        &self.rules[round - 1]
    }

    pub fn rule(&self, round: usize, color: ColorId) -> &Rule {
        &self.rules[round - 1][color as usize]
    }

    pub fn coloring(&self, round: usize) -> &[ColorId] {
        &self.colorings[round]
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    /// Number of color classes at each round, starting with round 0.
    pub fn class_counts(&self) -> Vec<usize> {
        std::iter::once(self.init_table.len())
            .chain(self.rules.iter().map(Vec::len))
            .collect()
    }

    pub(crate) fn space(&self) -> TupleSpace {
        TupleSpace {
            n: self.n,
            k: self.variant.k(),
        }
    }

    pub fn color_of(&self, round: usize, tuple: &[usize]) -> Result<ColorId, RefinementError> {
        if round > self.rounds {
            return Err(RefinementError::DepthExceedsRounds {
                depth: round,
                rounds: self.rounds,
            });
        }
        let idx = self
            .space()
            .index(tuple)
            .ok_or_else(|| RefinementError::BadTuple(tuple.to_vec()))?;
        Ok(self.colorings[round][idx])
    }

    /// Round-0 color that `color` at `round` descends from.
    pub fn root_color(&self, round: usize, mut color: ColorId) -> ColorId {
        for r in (1..=round).rev() {
            color = self.rule(r, color).prev;
        }
        color
    }

    /// Sorted pairwise ticks inside any tuple of color `color` at `round`.
    pub fn init_signature(&self, round: usize, color: ColorId) -> &[Ticks] {
        &self.init_table[self.root_color(round, color) as usize]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RefinementError> {
        let t: RefinementTranscript =
            serde_json::from_str(text).map_err(|e| RefinementError::Malformed(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    /// Structural consistency checks for transcripts read from outside.
    pub fn validate(&self) -> Result<(), RefinementError> {
        let bad = |m: String| Err(RefinementError::Malformed(m));
        let k = self.variant.k();
        let len = self.n.checked_pow(k as u32).unwrap_or(usize::MAX);
        if self.rules.len() != self.rounds || self.colorings.len() != self.rounds + 1 {
            return bad(format!("expected {} rounds of tables and colorings", self.rounds));
        }
        for (r, sig) in self.init_table.iter().enumerate() {
            let want = if k == 2 { 1 } else { 3 };
            if sig.len() != want || sig.windows(2).any(|w| w[0] > w[1]) {
                return bad(format!("init_table[{r}] is not a sorted {want}-signature"));
            }
        }
        let sizes = self.class_counts();
        for (round, coloring) in self.colorings.iter().enumerate() {
            if coloring.len() != len {
                return bad(format!(
                    "coloring {round} has {} tuples, expected {len}",
                    coloring.len()
                ));
            }
            if coloring.iter().any(|&c| c as usize >= sizes[round]) {
                return bad(format!("coloring {round} uses an undefined color"));
            }
        }
        for (t, table) in self.rules.iter().enumerate() {
            for rule in table {
                if rule.prev as usize >= sizes[t]
                    || rule.neighbors.len() != k * self.n
                    || rule.neighbors.iter().any(|&c| c as usize >= sizes[t])
                {
                    return bad(format!("round {} has an inconsistent rule", t + 1));
                }
            }
        }
        let expected = derivation_digest(self.variant, self.n, &self.init_table, &self.rules);
        if self.fingerprint.derivation != expected
            || self.fingerprint.n != self.n
            || self.fingerprint.variant != self.variant
            || self.fingerprint.rounds != self.rounds
        {
            return bad("fingerprint does not match the tables".into());
        }
        Ok(())
    }
}
