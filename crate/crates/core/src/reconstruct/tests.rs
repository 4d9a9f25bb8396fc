use super::*;
use crate::generate::{random_cloud, symmetric_cloud, Template};
use crate::geometry::{congruent, distance_matrix};
use crate::refinement::{unroll_tree, Children};

fn tol() -> Tolerance {
    Tolerance::default()
}

fn fwl(cloud: &PointCloud) -> RefinementTranscript {
    refine_to_stable(cloud, Variant::FWL3, tol()).unwrap()
}

fn assert_round_trip(cloud: &PointCloud) -> Reconstruction {
    let t = fwl(cloud);
    let r = reconstruct(&t).unwrap_or_else(|e| panic!("{e}"));
    assert_eq!(r.certificate.fingerprint_match, Some(true));
    assert!(congruent(cloud, &r.cloud, tol()).unwrap().is_some());
    r
}

#[test]
fn regular_tetrahedron() {
    let c = PointCloud::from_coords(&[[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])
        .unwrap()
        .normalized();
    let t = fwl(&c);
    let root = select_root(&t).unwrap();
    assert!(root.signature[0] == root.signature[1] && root.signature[1] == root.signature[2]);
    let r = assert_round_trip(&c);
    assert_eq!(r.certificate.cp_sizes, vec![0, 0, 0, 0]);
}

#[test]
fn three_four_five_common_edges() {
    // a, b, c with d(a,b) = 3, d(b,c) = 4, d(c,a) = 5, plus an apex.
    let c = PointCloud::from_coords(&[[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [3.0, 4.0, 0.0], [1.0, 1.0, 2.0]]).unwrap();
    let t = fwl(&c);
    let tree = unroll_tree(&t, &[0, 1, 2], 1).unwrap();
    let ce = identify_common_edges(&tree.root).unwrap();
    assert_eq!(ce.map(|r| r.ce_length), [4_000_000, 5_000_000, 3_000_000]);
    let Some(Children::Joint(entries)) = &tree.root.children else {
        panic!()
    };
    let class_two = entries
        .iter()
        .filter(|e| e[0].init == vec![0, 4_000_000, 4_000_000])
        .count();
    assert_eq!(class_two, 2);

    let nf = extract_new_edges(&tree.root, &ce).unwrap();
    assert_eq!(nf.len(), 1);
    let d = distance_matrix(&c, tol()).unwrap();
    let (ra, rb, rc) = (d.get(3, 0), d.get(3, 1), d.get(3, 2));
    let sorted = |x: Ticks, y: Ticks| [x.min(y), x.max(y)];
    assert_eq!(nf[0].pairs, [sorted(rb, rc), sorted(ra, rc), sorted(ra, rb)]);
    let res = resolve_apex_distances(&nf[0]).unwrap();
    assert_eq!(res.distances, ApexDistances([ra, rb, rc]));
}

#[test]
fn equilateral_base_has_equal_common_edges() {
    let s3 = 3f64.sqrt();
    let c =
        PointCloud::from_coords(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, s3 / 2.0, 0.0], [0.2, 0.3, 0.7]]).unwrap();
    let t = fwl(&c);
    let tree = unroll_tree(&t, &[0, 1, 2], 1).unwrap();
    let ce = identify_common_edges(&tree.root).unwrap();
    assert!(ce.iter().all(|r| r.ce_length == ce[0].ce_length));
}

#[test]
fn dropped_class_two_entry_is_malformed() {
    let c = random_cloud(5, 3).unwrap();
    let t = fwl(&c);
    let mut tree = unroll_tree(&t, &[0, 1, 2], 1).unwrap();
    let Some(Children::Joint(entries)) = &mut tree.root.children else {
        panic!()
    };
    let k = entries.iter().position(|e| e[0].init[0] == 0).unwrap();
    entries.remove(k);
    assert!(matches!(
        identify_common_edges(&tree.root),
        Err(ReconstructError::MalformedTranscript(_))
    ));
}

#[test]
fn two_points_have_no_root() {
    let c = PointCloud::from_coords(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
    let t = fwl(&c);
    assert_eq!(select_root(&t), Err(ReconstructError::NoNonDegenerateTuple));
    assert_round_trip(&c);
}

#[test]
fn base_cases() {
    assert_round_trip(&PointCloud::from_coords(&[[0.0, 0.0, 0.0]]).unwrap());
    let tri = PointCloud::from_coords(&[[0.0, 0.0, 0.0], [0.6, 0.0, 0.0], [0.1, 0.7, 0.0]]).unwrap();
    let r = assert_round_trip(&tri);
    assert_eq!(r.certificate.path, ReconstructionPath::Base);
}

#[test]
fn generic_root_is_scalene() {
    for seed in 0..10 {
        let t = fwl(&random_cloud(6, seed).unwrap());
        let s = select_root(&t).unwrap().signature;
        assert!(s[0] < s[1] && s[1] < s[2]);
    }
}

#[test]
fn random_clouds_round_trip() {
    for n in 4..=8 {
        for seed in 0..6 {
            let c = random_cloud(n, 100 * n as u64 + seed).unwrap();
            let r = assert_round_trip(&c);
            assert_eq!(r.certificate.path, ReconstructionPath::Spatial);
            assert!(
                r.certificate.cp_sizes.iter().all(|&s| s == 2 * (n - 4)),
                "{:?}",
                r.certificate.cp_sizes
            );
            assert_eq!(r.certificate.anchor, Some(3));
        }
    }
}

#[test]
fn five_points_give_one_mirror_pair() {
    let r = assert_round_trip(&random_cloud(5, 42).unwrap());
    assert_eq!(r.certificate.cp_sizes[0], 2);
}

#[test]
fn symmetric_templates_round_trip() {
    for template in Template::ALL {
        for n in 4..=9 {
            let c = symmetric_cloud(template, n, n as u64).unwrap();
            let r = assert_round_trip(&c);
            if template == Template::Planar {
                assert_eq!(r.certificate.path, ReconstructionPath::Planar);
            }
        }
    }
}

#[test]
fn collinear_cloud_round_trips() {
    let c = PointCloud::from_coords(&[[0.0, 0.0, 0.0], [0.3, 0.0, 0.0], [0.45, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
    let r = assert_round_trip(&c);
    assert_eq!(r.certificate.path, ReconstructionPath::Collinear);
}

#[test]
fn anchor_choice_does_not_matter() {
    let c = random_cloud(7, 5).unwrap();
    let t = fwl(&c);
    let mut outputs = Vec::new();
    for rank in 0..4 {
        let opts = ReconstructOptions {
            anchor: AnchorChoice::Rank(rank),
            ..ReconstructOptions::default()
        };
        outputs.push(reconstruct_with(&t, &opts).unwrap().cloud);
    }
    for w in outputs.windows(2) {
        assert!(congruent(&w[0], &w[1], tol()).unwrap().is_some());
    }
    let opts = ReconstructOptions {
        anchor: AnchorChoice::Rank(10),
        ..ReconstructOptions::default()
    };
    assert_eq!(
        reconstruct_with(&t, &opts).unwrap_err(),
        ReconstructError::BadAnchor(10)
    );
}

#[test]
fn wrong_variant_is_rejected() {
    let t = refine_to_stable(&random_cloud(5, 0).unwrap(), Variant::WL3, tol()).unwrap();
    assert_eq!(
        reconstruct(&t).unwrap_err(),
        ReconstructError::WrongVariant(Variant::WL3)
    );
}

#[test]
fn square_pyramid_exercises_turn_over_cases() {
    let c = symmetric_cloud(Template::SquarePyramid, 5, 1).unwrap();
    let stats = trick_statistics(&fwl(&c), true).unwrap();
    assert_eq!(stats.impossible_histograms, 0);
    assert!(stats.case_histogram[1] > 0 && stats.case_histogram[2] > 0, "{stats:?}");
}

#[test]
fn pair_multiset_matches_cloud() {
    let c = random_cloud(6, 9).unwrap();
    let t = fwl(&c);
    let from_t: Vec<Ticks> = pair_distance_multiset(&t)
        .unwrap()
        .into_iter()
        .flat_map(|(d, k)| std::iter::repeat_n(d, k))
        .collect();
    assert_eq!(from_t, distance_matrix(&c, tol()).unwrap().sorted_entries());
}
