//! Counterexample campaigns: candidate pairs are refined under each variant
//! and checked against the congruence oracle.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generate::{
    apply_exchange, exchange_candidates, generate, lattice_classes, symmetric_cloud, transform_chain, Family,
    FamilySpec, GenerateError, Provenance, Template, Transform,
};
use crate::geometry::{congruent, distance_matrix, GeometryError, PointCloud, Tolerance, MAX_EXHAUSTIVE_NODES};
use crate::refinement::{refine_to_stable, Fingerprint, RefinementError, Variant};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Refinement(#[from] RefinementError),
}

fn default_epsilon() -> f64 {
    1e-6
}

/// Everything a campaign depends on. Reports embed it verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub variants: Vec<Variant>,
    /// `exchange` runs the exchange campaign over sizes `n..=params.n_max`;
    /// any other family runs the random-pairs campaign.
    pub family: FamilySpec,
    /// Pairs for the random campaign, source clouds for the exchange one.
    pub trials: usize,
    /// Non-trivial candidate constructions (exchange) or pairs (random).
    pub budget: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
    /// Keep a record for every evaluated pair, not only those with some
    /// equal fingerprint.
    #[serde(default)]
    pub record_all: bool,
}

impl SearchConfig {
    /// Exchange campaign over lattice and symmetric clouds.
    pub fn exchange(variants: Vec<Variant>, n_min: usize, n_max: usize, budget: u64) -> Self {
        let mut family = FamilySpec::symmetric(Template::SquarePyramid, n_min, 0);
        family.family = Family::Exchange;
        family.params.template = None;
        family.params.n_max = Some(n_max);
        SearchConfig {
            variants,
            family,
            trials: usize::MAX,
            budget,
            epsilon: default_epsilon(),
            seed: 0,
            out: None,
            record_all: false,
        }
    }

    /// Random-pairs campaign: alternately a congruent copy and an
    /// independent cloud.
    pub fn random_pairs(variants: Vec<Variant>, n: usize, trials: usize, seed: u64) -> Self {
        SearchConfig {
            variants,
            family: FamilySpec::random(n, seed),
            trials,
            budget: trials as u64,
            epsilon: default_epsilon(),
            seed,
            out: None,
            record_all: true,
        }
    }

    fn validate(&self) -> Result<Tolerance, SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if self.variants.is_empty() {
            return bad("no variants");
        }
        if self.family.n < 2 {
            return bad("n must be at least 2");
        }
        if self.family.params.n_max.is_some_and(|m| m < self.family.n) {
            return bad("n_max below n");
        }
        Tolerance::new(self.epsilon).map_err(|e| SearchError::Config(e.to_string()))
    }

    fn sizes(&self) -> std::ops::RangeInclusive<usize> {
        self.family.n..=self.family.params.n_max.unwrap_or(self.family.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleVerdict {
    Congruent,
    NonCongruent,
    /// Above the exhaustive oracle's size limit.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairOrigin {
    Exchange(Provenance),
    /// A transformed copy of `a`.
    Congruent {
        seed: u64,
        chain: Vec<Transform>,
    },
    Independent {
        seed_a: u64,
        seed_b: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: u64,
    pub n: usize,
    pub origin: PairOrigin,
    pub fingerprints_equal: BTreeMap<Variant, bool>,
    pub oracle: OracleVerdict,
    /// Variants whose fingerprints agree on a non-congruent pair.
    pub counterexample_for: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub id: u64,
    pub variants: Vec<Variant>,
    pub a: PointCloud,
    pub b: PointCloud,
    pub origin: PairOrigin,
    /// Whether (3,FWL) tells the pair apart.
    pub distinguished_by_3fwl: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub sources: usize,
    /// Pairs (random) or non-trivial candidates (exchange) spent from the
    /// budget.
    pub candidates: u64,
    /// Exchanges that left the matrix unchanged; not charged to the budget.
    pub trivial_skipped: u64,
    pub unrealizable: u64,
    pub evaluated: u64,
    pub equal_fingerprints: BTreeMap<Variant, u64>,
    pub oracle_congruent: u64,
    pub oracle_skipped: u64,
    pub counterexamples: BTreeMap<Variant, u64>,
    pub budget_exhausted: bool,
    /// Every candidate of every source was tried.
    pub sources_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub config: SearchConfig,
    pub summary: SearchSummary,
    /// Sorted by id.
    pub records: Vec<TrialRecord>,
    pub counterexamples: Vec<Counterexample>,
    pub elapsed_ms: u128,
    pub threads: usize,
}

impl SearchReport {
    pub fn completed_trials(&self) -> u64 {
        self.summary.evaluated + self.summary.unrealizable
    }
}

fn fingerprints(cloud: &PointCloud, variants: &[Variant], tol: Tolerance) -> Result<Vec<Fingerprint>, SearchError> {
    variants
        .iter()
        .map(|&v| Ok(refine_to_stable(cloud, v, tol)?.fingerprint().clone()))
        .collect()
}

struct Evaluated {
    record: TrialRecord,
    counterexample: Option<Counterexample>,
}

fn evaluate(
    id: u64,
    a: &PointCloud,
    fa: &[Fingerprint],
    b: PointCloud,
    origin: PairOrigin,
    cfg: &SearchConfig,
    tol: Tolerance,
) -> Result<Evaluated, SearchError> {
    let fb = fingerprints(&b, &cfg.variants, tol)?;
    let equal: BTreeMap<Variant, bool> = cfg
        .variants
        .iter()
        .zip(fa.iter().zip(&fb))
        .map(|(&v, (x, y))| (v, x == y))
        .collect();
    let oracle = if a.len() > MAX_EXHAUSTIVE_NODES {
        OracleVerdict::Skipped
    } else if congruent(a, &b, tol)?.is_some() {
        OracleVerdict::Congruent
    } else {
        OracleVerdict::NonCongruent
    };
    let counterexample_for: Vec<Variant> = if oracle == OracleVerdict::NonCongruent {
        equal.iter().filter(|&(_, &e)| e).map(|(&v, _)| v).collect()
    } else {
        Vec::new()
    };
    let counterexample = if counterexample_for.is_empty() {
        None
    } else {
        let f = |c: &PointCloud| -> Result<Fingerprint, SearchError> {
            Ok(refine_to_stable(c, Variant::FWL3, tol)?.fingerprint().clone())
        };
        Some(Counterexample {
            id,
            variants: counterexample_for.clone(),
            a: a.clone(),
            b: b.clone(),
            origin: origin.clone(),
            distinguished_by_3fwl: f(a)? != f(&b)?,
        })
    };
    Ok(Evaluated {
        record: TrialRecord {
            id,
            n: a.len(),
            origin,
            fingerprints_equal: equal,
            oracle,
            counterexample_for,
        },
        counterexample,
    })
}

struct Collector<'a> {
    cfg: &'a SearchConfig,
    summary: SearchSummary,
    records: Vec<TrialRecord>,
    counterexamples: Vec<Counterexample>,
}

impl Collector<'_> {
    fn add(&mut self, e: Evaluated) {
        let s = &mut self.summary;
        s.evaluated += 1;
        let mut any_equal = false;
        for (&v, &eq) in &e.record.fingerprints_equal {
            if eq {
                *s.equal_fingerprints.entry(v).or_default() += 1;
                any_equal = true;
            }
        }
        match e.record.oracle {
            OracleVerdict::Congruent => s.oracle_congruent += 1,
            OracleVerdict::Skipped => s.oracle_skipped += 1,
            OracleVerdict::NonCongruent => {}
        }
        for &v in &e.record.counterexample_for {
            *s.counterexamples.entry(v).or_default() += 1;
        }
        if let Some(c) = e.counterexample {
            self.counterexamples.push(c);
        }
        if any_equal || self.cfg.record_all {
            self.records.push(e.record);
        }
    }
}

/// Runs the campaign described by `cfg`. Deterministic for a fixed config.
pub fn run_search(cfg: &SearchConfig) -> Result<SearchReport, SearchError> {
    let tol = cfg.validate()?;
    let start = Instant::now();
    let mut col = Collector {
        cfg,
        summary: SearchSummary::default(),
        records: Vec::new(),
        counterexamples: Vec::new(),
    };
    for &v in &cfg.variants {
        col.summary.equal_fingerprints.insert(v, 0);
        col.summary.counterexamples.insert(v, 0);
    }
    if cfg.family.family == Family::Exchange {
        exchange_campaign(cfg, tol, &mut col)?;
    } else {
        random_campaign(cfg, tol, &mut col)?;
    }
    let mut records = col.records;
    records.sort_by_key(|r| r.id);
    let mut counterexamples = col.counterexamples;
    counterexamples.sort_by_key(|c| c.id);
    Ok(SearchReport {
        config: cfg.clone(),
        summary: col.summary,
        records,
        counterexamples,
        elapsed_ms: start.elapsed().as_millis(),
        threads: rayon::current_num_threads(),
    })
}

fn random_campaign(cfg: &SearchConfig, tol: Tolerance, col: &mut Collector) -> Result<(), SearchError> {
    let sizes: Vec<usize> = cfg.sizes().collect();
    let count = (cfg.trials as u64).min(cfg.budget);
    col.summary.budget_exhausted = (cfg.trials as u64) > cfg.budget;
    let results: Vec<Result<Evaluated, SearchError>> = (0..count)
        .into_par_iter()
        .map(|id| {
            let n = sizes[id as usize % sizes.len()];
            let seed_a = cfg.seed.wrapping_add(2 * id);
            let mut spec = cfg.family.clone();
            spec.n = n;
            spec.seed = seed_a;
            let a = generate(&spec)?;
            let fa = fingerprints(&a, &cfg.variants, tol)?;
            let (b, origin) = if id % 2 == 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_a ^ 0x5eed);
                let chain = Transform::random_chain(n, &mut rng);
                (
                    transform_chain(&a, &chain)?,
                    PairOrigin::Congruent { seed: seed_a, chain },
                )
            } else {
                spec.seed = seed_a + 1;
                (
                    generate(&spec)?,
                    PairOrigin::Independent {
                        seed_a,
                        seed_b: seed_a + 1,
                    },
                )
            };
            evaluate(id, &a, &fa, b, origin, cfg, tol)
        })
        .collect();
    col.summary.sources = count as usize;
    col.summary.candidates = count;
    col.summary.sources_exhausted = !col.summary.budget_exhausted;
    for r in results {
        col.add(r?);
    }
    Ok(())
}

/// Source clouds in campaign order: symmetric templates for every size,
/// then lattice classes by size, each size by fewest distinct distances.
fn exchange_sources(cfg: &SearchConfig) -> impl Iterator<Item = Result<(String, PointCloud), SearchError>> + '_ {
    let symmetric = cfg.sizes().flat_map(move |n| {
        Template::ALL
            .into_iter()
            .filter_map(move |t| match symmetric_cloud(t, n, cfg.seed) {
                Ok(c) => Some(Ok((format!("symmetric {t:?} n={n} seed={}", cfg.seed), c))),
                Err(GenerateError::TooFewPoints { .. }) => None,
                Err(e) => Some(Err(e.into())),
            })
    });
    let extent = cfg.family.params.extent;
    let lattice = cfg.sizes().flat_map(move |n| {
        let classes = match lattice_classes(n, extent) {
            Ok(c) => c,
            Err(e) => return vec![Err(e.into())].into_iter(),
        };
        classes
            .into_iter()
            .enumerate()
            .map(|(k, class)| {
                Ok((
                    format!("lattice n={n} extent={extent} class={k} {:?}", class.points),
                    class.cloud(),
                ))
            })
            .collect::<Vec<_>>()
            .into_iter()
    });
    symmetric.chain(lattice)
}

fn exchange_campaign(cfg: &SearchConfig, tol: Tolerance, col: &mut Collector) -> Result<(), SearchError> {
    let mut spent = 0u64;
    let mut sources = exchange_sources(cfg);
    col.summary.sources_exhausted = true;
    while col.summary.sources < cfg.trials {
        if spent >= cfg.budget {
            col.summary.budget_exhausted = true;
            col.summary.sources_exhausted = false;
            break;
        }
        let Some(src) = sources.next() else { break };
        let (name, cloud) = src?;
        col.summary.sources += 1;
        let d = distance_matrix(&cloud, tol)?;
        let mut moves = Vec::new();
        for mv in exchange_candidates(cloud.len(), cfg.family.params.max_pivots) {
            if mv.apply(&d)? == d {
                col.summary.trivial_skipped += 1;
            } else {
                moves.push(mv);
            }
        }
        let remaining = (cfg.budget - spent) as usize;
        if moves.len() > remaining {
            moves.truncate(remaining);
            col.summary.budget_exhausted = true;
            col.summary.sources_exhausted = false;
        }
        let first_id = spent;
        spent += moves.len() as u64;
        let fa = fingerprints(&cloud, &cfg.variants, tol)?;
        let results: Vec<Result<Option<Evaluated>, SearchError>> = moves
            .par_iter()
            .enumerate()
            .map(|(k, mv)| {
                let Some(pair) = apply_exchange(&cloud, mv, &name, tol)? else {
                    return Ok(None);
                };
                let origin = PairOrigin::Exchange(pair.provenance);
                evaluate(first_id + k as u64, &cloud, &fa, pair.b, origin, cfg, tol).map(Some)
            })
            .collect();
        for r in results {
            match r? {
                Some(e) => col.add(e),
                None => col.summary.unrealizable += 1,
            }
        }
    }
    if col.summary.sources >= cfg.trials && sources.next().is_some() {
        col.summary.sources_exhausted = false;
    }
    col.summary.candidates = spent;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let cfg = SearchConfig::exchange(vec![Variant::WL2, Variant::FWL3], 5, 8, 100_000);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<SearchConfig>(&text).unwrap(), cfg);
        let cfg = SearchConfig::random_pairs(vec![Variant::FWL3], 6, 10, 3);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<SearchConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn zero_trials_give_empty_report() {
        let r = run_search(&SearchConfig::random_pairs(vec![Variant::WL2], 5, 0, 0)).unwrap();
        assert!(r.records.is_empty());
        assert_eq!(r.completed_trials(), 0);
    }

    #[test]
    fn random_pairs_under_3fwl_have_no_counterexamples() {
        let r = run_search(&SearchConfig::random_pairs(vec![Variant::FWL3, Variant::WL2], 6, 20, 9)).unwrap();
        assert_eq!(r.summary.counterexamples[&Variant::FWL3], 0);
        assert_eq!(r.summary.oracle_congruent, 10);
        assert_eq!(r.summary.equal_fingerprints[&Variant::FWL3], 10);
        assert!(r.records.windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn deterministic() {
        let cfg = SearchConfig::exchange(vec![Variant::WL2], 5, 5, 500);
        let mut a = run_search(&cfg).unwrap();
        let mut b = run_search(&cfg).unwrap();
        a.elapsed_ms = 0;
        b.elapsed_ms = 0;
        assert_eq!(a, b);
        assert!(a.summary.budget_exhausted);
        assert_eq!(a.summary.candidates, 500);
    }

    #[test]
    fn invalid_config() {
        let mut cfg = SearchConfig::random_pairs(vec![], 5, 1, 0);
        assert!(matches!(run_search(&cfg), Err(SearchError::Config(_))));
        cfg.variants = vec![Variant::WL2];
        cfg.epsilon = -1.0;
        assert!(matches!(run_search(&cfg), Err(SearchError::Config(_))));
    }
}
