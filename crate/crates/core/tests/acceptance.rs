//! End-to-end acceptance checks. Runs without the libtest harness so the
//! per-criterion verdicts are always printed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geowl::generate::{random_cloud, symmetric_cloud, transform_chain, Template, Transform};
use geowl::geometry::{congruent, PointCloud, Tolerance, Vec3};
use geowl::grouping::{analyze_all_roots, EnumerationStatus, DEFAULT_BUDGET};
use geowl::reconstruct::{reconstruct, trick_statistics, ReconstructError, ReconstructionPath};
use geowl::refinement::{refine_to_stable, Variant};
use geowl::search::{run_search, PairOrigin, SearchConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn tol() -> Tolerance {
    Tolerance::default()
}

fn sizes(k: usize) -> usize {
    4 + k % 6
}

fn invariance() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = Vec::new();
    for k in 0..100 {
        let n = sizes(k);
        let c = random_cloud(n, 1000 + k as u64).unwrap();
        let chain = Transform::random_chain(n, &mut rng);
        let t = transform_chain(&c, &chain).unwrap();
        for v in Variant::ALL {
            let a = refine_to_stable(&c, v, tol()).unwrap();
            let b = refine_to_stable(&t, v, tol()).unwrap();
            if a.fingerprint() != b.fingerprint() {
                mismatches.push(format!("cloud {k} {v}"));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "100 clouds x 4 variants, {} mismatches {mismatches:?}, {elapsed:.1?}",
            mismatches.len()
        ),
    )
}

/// Smallest distance from a point to the plane of three others. Below about
/// `sqrt(eps)` the two mirror positions cannot be told apart from quantized
/// distances, so such clouds count as having coplanar externals.
fn min_face_height(c: &PointCloud) -> f64 {
    let p = c.points();
    let n = p.len();
    let mut h = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let normal = (p[j] - p[i]).cross(&(p[k] - p[i])).normalize();
                for (l, q) in p.iter().enumerate() {
                    if l != i && l != j && l != k {
                        h = h.min(normal.dot(&(q - p[i])).abs());
                    }
                }
            }
        }
    }
    h
}

struct RoundTrip {
    trials: usize,
    generic: usize,
    congruent: usize,
    certified: usize,
    failures: Vec<String>,
    bad_cp: Vec<String>,
    ambiguous: usize,
    elapsed: Duration,
}

fn round_trips() -> RoundTrip {
    let start = Instant::now();
    let mut r = RoundTrip {
        trials: 0,
        generic: 0,
        congruent: 0,
        certified: 0,
        failures: Vec::new(),
        bad_cp: Vec::new(),
        ambiguous: 0,
        elapsed: Duration::ZERO,
    };
    let flat = 4.0 * tol().epsilon.sqrt();
    let mut k = 0;
    while r.generic < 240 {
        let n = sizes(k);
        let seed = 5000 + k as u64;
        k += 1;
        let c = random_cloud(n, seed).unwrap();
        let generic = min_face_height(&c) > flat;
        r.generic += generic as usize;
        let t = refine_to_stable(&c, Variant::FWL3, tol()).unwrap();
        r.trials += 1;
        match reconstruct(&t) {
            Ok(out) => {
                if congruent(&c, &out.cloud, tol()).unwrap().is_some() {
                    r.congruent += 1;
                } else {
                    r.failures.push(format!("n={n} seed={seed}: not congruent"));
                }
                if out.certificate.fingerprint_match == Some(true) {
                    r.certified += 1;
                }
                r.ambiguous += out.certificate.ambiguous_nodes;
                let spatial = out.certificate.path == ReconstructionPath::Spatial;
                if generic && (!spatial || out.certificate.cp_sizes.iter().any(|&s| s != 2 * (n - 4))) {
                    r.bad_cp.push(format!(
                        "n={n} seed={seed}: {:?} {:?}",
                        out.certificate.path, out.certificate.cp_sizes
                    ));
                }
            }
            Err(e) => {
                if matches!(e, ReconstructError::AmbiguousNode(_)) {
                    r.ambiguous += 1;
                }
                r.failures.push(format!("n={n} seed={seed}: {e}"));
            }
        }
    }
    r.elapsed = start.elapsed();
    r
}

fn criterion_2(r: &RoundTrip) -> Verdict {
    verdict(
        r.trials >= 200 && r.congruent == r.trials && r.certified == r.trials && r.elapsed < Duration::from_secs(300),
        format!(
            "{} trials, {} congruent, {} certified, {:.1?} {:?}",
            r.trials, r.congruent, r.certified, r.elapsed, r.failures
        ),
    )
}

fn criterion_3(r: &RoundTrip) -> Verdict {
    verdict(
        r.generic >= 200 && r.bad_cp.is_empty() && r.ambiguous == 0 && r.failures.is_empty(),
        format!(
            "|CP| = 2(n-4) on every face in {} of {} generic trials ({} near-coplanar clouds excluded), \
             AmbiguousNode {} times in all {} trials {:?}",
            r.generic - r.bad_cp.len(),
            r.generic,
            r.trials - r.generic,
            r.ambiguous,
            r.trials,
            r.bad_cp
        ),
    )
}

fn turn_over_cases() -> Verdict {
    let mut random = [0usize; 3];
    let mut impossible = 0;
    let mut externals = 0;
    for k in 0..1000 {
        let c = random_cloud(sizes(k), 20_000 + k as u64).unwrap();
        let t = refine_to_stable(&c, Variant::FWL3, tol()).unwrap();
        let s = trick_statistics(&t, true).unwrap();
        externals += s.externals;
        impossible += s.impossible_histograms;
        for (total, c) in random.iter_mut().zip(s.case_histogram) {
            *total += c;
        }
    }
    let mut symmetric = [0usize; 3];
    for template in Template::ALL {
        for n in 5..=8 {
            let c = symmetric_cloud(template, n, n as u64).unwrap();
            let t = refine_to_stable(&c, Variant::FWL3, tol()).unwrap();
            let s = trick_statistics(&t, true).unwrap();
            impossible += s.impossible_histograms;
            for (total, c) in symmetric.iter_mut().zip(s.case_histogram) {
                *total += c;
            }
        }
    }
    let classified: usize = random.iter().sum();
    verdict(
        impossible == 0 && classified == externals && symmetric[1] > 0 && symmetric[2] > 0,
        format!(
            "random: {externals} externals, cases {random:?}; symmetric cases {symmetric:?}; ImpossibleHistogram {impossible}"
        ),
    )
}

fn exchange_counterexample() -> Verdict {
    let cfg = SearchConfig::exchange(vec![Variant::WL2], 5, 8, 100_000);
    let r = run_search(&cfg).unwrap();
    let found = r.counterexamples.len();
    let all_distinguished = r.counterexamples.iter().all(|c| c.distinguished_by_3fwl);
    // the oracle and fingerprints are re-checked here, not taken from the report
    let rechecked = r.counterexamples.iter().all(|c| {
        let f = |p: &PointCloud, v| refine_to_stable(p, v, tol()).unwrap().fingerprint().clone();
        congruent(&c.a, &c.b, tol()).unwrap().is_none()
            && f(&c.a, Variant::WL2) == f(&c.b, Variant::WL2)
            && f(&c.a, Variant::FWL3) != f(&c.b, Variant::FWL3)
    });
    let first = r.counterexamples.first().map(|c| match &c.origin {
        PairOrigin::Exchange(p) => format!("first at candidate {}: {} {:?}", c.id, p.source, p.exchange),
        other => format!("{other:?}"),
    });
    verdict(
        found >= 1 && all_distinguished && rechecked,
        format!(
            "{} candidates ({} realizable), {found} (2,WL) counterexamples, all split by (3,FWL): {}, {}ms; {}",
            r.summary.candidates,
            r.summary.evaluated,
            all_distinguished && rechecked,
            r.elapsed_ms,
            first.unwrap_or_default()
        ),
    )
}

fn grouping_analysis() -> Verdict {
    let mut roots = 0;
    let mut not_unique = Vec::new();
    for k in 0..50 {
        let n = 5 + k % 3;
        let seed = 40_000 + k as u64;
        let c = random_cloud(n, seed).unwrap();
        let t = refine_to_stable(&c, Variant::WL3, tol()).unwrap();
        for r in analyze_all_roots(&t, Some(&c), DEFAULT_BUDGET).unwrap() {
            roots += 1;
            let unique = r.stats.status == EnumerationStatus::Complete
                && r.stats.feasible_groupings == 1
                && r.real_grouping_found == Some(true);
            if !unique {
                not_unique.push(format!("n={n} seed={seed} root {:?}: {:?}", r.root.signature, r.stats));
            }
        }
    }
    let mut max_feasible = 0;
    let mut pyramid_roots = 0;
    let mut incomplete = 0;
    let mut realizable_new = 0;
    let mut findings = Vec::new();
    for n in 5..=8 {
        for seed in 0..3 {
            let c = symmetric_cloud(Template::SquarePyramid, n, seed).unwrap();
            let t = refine_to_stable(&c, Variant::WL3, tol()).unwrap();
            for r in analyze_all_roots(&t, Some(&c), DEFAULT_BUDGET).unwrap() {
                pyramid_roots += 1;
                max_feasible = max_feasible.max(r.stats.feasible_groupings);
                if r.stats.status != EnumerationStatus::Complete {
                    incomplete += 1;
                }
                if r.realizable_findings > 0 {
                    realizable_new += r.realizable_findings;
                    findings.push(serde_json::json!({
                        "cloud": c, "n": n, "seed": seed, "report": r,
                    }));
                }
            }
        }
    }
    if !findings.is_empty() {
        let path = std::env::temp_dir().join("geowl_grouping_findings.json");
        std::fs::write(&path, serde_json::to_string_pretty(&findings).unwrap()).unwrap();
        println!(
            "  grouping: {realizable_new} groupings with realizable new tetrahedra, flagged for manual review in {}",
            path.display()
        );
    }
    verdict(
        not_unique.is_empty() && max_feasible >= 2,
        format!(
            "generic: {roots} roots, {} without a unique real grouping {not_unique:?}; \
             square pyramid: {pyramid_roots} roots, max {max_feasible} feasible groupings, \
             {incomplete} over budget, {realizable_new} groupings with realizable new tetrahedra",
            not_unique.len()
        ),
    )
}

/// Best rigid motion with reflection mapping `src` onto `dst`, from the SVD
/// of the cross-covariance (no determinant correction).
fn procrustes(src: &[Vec3], dst: &[Vec3]) -> (Matrix3<f64>, Vec3) {
    let k = src.len() as f64;
    let cs = src.iter().sum::<Vec3>() / k;
    let cd = dst.iter().sum::<Vec3>() / k;
    let mut h = Matrix3::zeros();
    for (p, q) in src.iter().zip(dst) {
        h += (p - cs) * (q - cd).transpose();
    }
    let svd = h.svd(true, true);
    let r = svd.v_t.unwrap().transpose() * svd.u.unwrap().transpose();
    (r, cd - r * cs)
}

/// Alignment residual: tries every correspondence of four spanning points
/// of `a`, fits an orthogonal transform and matches the remaining points
/// to their nearest neighbors. Returns the smallest worst-point residual.
fn alignment_residual(a: &PointCloud, b: &PointCloud) -> f64 {
    let n = a.len();
    let pa = a.points();
    let pb = b.points();
    // four points of `a` spanning the largest volume
    let mut basis = [0, 1, 2, 3];
    let mut best = -1.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let v = (pa[j] - pa[i]).cross(&(pa[k] - pa[i])).dot(&(pa[l] - pa[i])).abs();
                    if v > best {
                        best = v;
                        basis = [i, j, k, l];
                    }
                }
            }
        }
    }
    let close = |x: f64, y: f64| (x - y).abs() < 1e-3;
    let mut residual = f64::INFINITY;
    let src: Vec<Vec3> = basis.iter().map(|&i| pa[i]).collect();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            if !close((pb[i] - pb[j]).norm(), (src[0] - src[1]).norm()) {
                continue;
            }
            for k in (0..n).filter(|&k| k != i && k != j) {
                if !close((pb[i] - pb[k]).norm(), (src[0] - src[2]).norm()) {
                    continue;
                }
                for l in (0..n).filter(|&l| l != i && l != j && l != k) {
                    let dst = [pb[i], pb[j], pb[k], pb[l]];
                    let (r, t) = procrustes(&src, &dst);
                    let mut used = vec![false; n];
                    let mut worst = 0.0f64;
                    for p in pa {
                        let q = r * p + t;
                        let (m, d) = (0..n)
                            .filter(|&m| !used[m])
                            .map(|m| (m, (pb[m] - q).norm()))
                            .min_by(|x, y| x.1.total_cmp(&y.1))
                            .unwrap();
                        used[m] = true;
                        worst = worst.max(d);
                    }
                    residual = residual.min(worst);
                }
            }
        }
    }
    residual
}

fn oracle_self_consistency() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let eps = tol().epsilon;
    let mut disagreements = Vec::new();
    let mut check = |a: &PointCloud, b: &PointCloud, label: String| {
        let oracle = congruent(a, b, tol()).unwrap().is_some();
        let aligned = alignment_residual(a, b) < eps;
        if oracle != aligned {
            disagreements.push(label);
        }
        oracle
    };
    let mut congruent_pairs = 0;
    let mut rotated = Vec::new();
    for k in 0..100 {
        let n = sizes(k);
        let a = random_cloud(n, 60_000 + k as u64).unwrap();
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        let flip = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        let shift = Vector3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        let mut pts: Vec<Vec3> = a
            .points()
            .iter()
            .map(|p| q * Vec3::new(flip * p.x, p.y, p.z) + shift)
            .collect();
        let rot = rng.random_range(0..n);
        pts.rotate_left(rot);
        let b = PointCloud::new(pts).unwrap();
        if check(&a, &b, format!("congruent pair {k}")) {
            congruent_pairs += 1;
        }
        rotated.push((a, b));
    }
    let mut non_congruent_pairs = 0;
    for (k, (a, b)) in rotated.iter().enumerate() {
        // move one point by 1e-3 along a random direction, or pair with an unrelated cloud
        let c = if k % 2 == 0 {
            let mut pts = b.points().to_vec();
            let dir = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let i = k % pts.len();
            pts[i] += 1e-3 * dir.normalize();
            PointCloud::new(pts).unwrap()
        } else {
            random_cloud(a.len(), 70_000 + k as u64).unwrap()
        };
        if !check(a, &c, format!("non-congruent pair {k}")) {
            non_congruent_pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        disagreements.is_empty()
            && congruent_pairs == 100
            && non_congruent_pairs == 100
            && elapsed < Duration::from_secs(60),
        format!(
            "oracle: {congruent_pairs}/100 congruent, {non_congruent_pairs}/100 non-congruent; \
             {} disagreements with alignment {disagreements:?}; {elapsed:.1?}",
            disagreements.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |k: usize, name: &str, v: Verdict| {
        all &= v.pass;
        println!(
            "criterion {k} {name}: {} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    };
    report(1, "invariance", invariance());
    let trips = round_trips();
    report(2, "3-FWL round trip", criterion_2(&trips));
    report(3, "CP cardinality", criterion_3(&trips));
    report(4, "turn-over cases", turn_over_cases());
    report(5, "2-WL counterexample", exchange_counterexample());
    report(6, "grouping analysis", grouping_analysis());
    report(7, "oracle self-consistency", oracle_self_consistency());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
