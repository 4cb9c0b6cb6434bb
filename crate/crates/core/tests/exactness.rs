use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twolevel_lsh::baselines::default_layer;
use twolevel_lsh::synth::{generate, Family};
use twolevel_lsh::{
    bruteforce_knn, bruteforce_radius, BoxMode, HashIndex, KdTree, NeighborStructure, Octree, PointCloud, SearchOptions,
};

fn queries(cloud: &PointCloud, rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
    let (lo, hi) = cloud.bounds();
    let pad = (hi - lo) * 0.2 + Vector3::repeat(1.0);
    (0..n)
        .map(|i| match i % 3 {
            0 => cloud[rng.random_range(0..cloud.len()) as u32],
            1 => cloud[rng.random_range(0..cloud.len()) as u32] + Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
            _ => Point3::from(Vector3::from_fn(|r, _| {
                rng.random_range(lo[r] - pad[r]..hi[r] + pad[r])
            })),
        })
        .collect()
}

fn structures(cloud: &Arc<PointCloud>) -> Vec<Box<dyn NeighborStructure>> {
    vec![
        Box::new(HashIndex::build(cloud.clone(), BoxMode::Obb, None).unwrap()),
        Box::new(HashIndex::build(cloud.clone(), BoxMode::Aabb, None).unwrap()),
        Box::new(KdTree::build(cloud.clone())),
        Box::new(Octree::build(cloud.clone(), default_layer(cloud.len())).unwrap()),
    ]
}

#[test]
fn all_structures_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (fi, family) in Family::ALL.into_iter().enumerate() {
        for m in [1, 7, 300, 2_500] {
            let cloud = Arc::new(generate(family, m, fi as u64 * 100 + m as u64).unwrap());
            let structs = structures(&cloud);
            for q in queries(&cloud, &mut rng, 40) {
                for k in [1, 3, 20] {
                    let expected = bruteforce_knn(&cloud, &q, k).unwrap();
                    for s in &structs {
                        assert_eq!(
                            s.knn(&q, k).unwrap(),
                            expected,
                            "{} {family} m={m} k={k} q={q}",
                            s.name()
                        );
                    }
                }
                for r in [0.5, 4.0, 15.0] {
                    let expected = bruteforce_radius(&cloud, &q, r).unwrap();
                    for s in &structs {
                        assert_eq!(
                            s.radius(&q, r).unwrap(),
                            expected,
                            "{} {family} m={m} r={r} q={q}",
                            s.name()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn explicit_div_extremes_stay_exact() {
    let cloud = Arc::new(generate(Family::Clusters, 1_500, 5).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for div in [1, 2, 17, 200] {
        let index = HashIndex::build_with_div(cloud.clone(), BoxMode::Obb, div).unwrap();
        for q in queries(&cloud, &mut rng, 30) {
            assert_eq!(
                index.knn(&q, 5).unwrap(),
                bruteforce_knn(&cloud, &q, 5).unwrap(),
                "div={div}"
            );
            assert_eq!(
                index.radius(&q, 6.0).unwrap(),
                bruteforce_radius(&cloud, &q, 6.0).unwrap(),
                "div={div}"
            );
        }
    }
}

#[test]
fn duplicate_points_and_ties() {
    let mut coords = vec![[1.0, 2.0, 3.0]; 30];
    coords.extend((0..30).map(|i| [i as f64, 0.0, 0.0]));
    let cloud = Arc::new(PointCloud::from_coords(coords).unwrap());
    let index = HashIndex::build(cloud.clone(), BoxMode::Obb, None).unwrap();
    for q in [
        Point3::new(1.0, 2.0, 3.0),
        Point3::new(4.5, 0.0, 0.0),
        Point3::new(0.0, 0.0, 0.0),
    ] {
        for k in [1, 10, 45, 60, 80] {
            assert_eq!(index.knn(&q, k).unwrap(), bruteforce_knn(&cloud, &q, k).unwrap());
        }
        assert_eq!(
            index.radius(&q, 1.0).unwrap(),
            bruteforce_radius(&cloud, &q, 1.0).unwrap()
        );
    }
}

#[test]
fn pruning_never_visits_more_bins() {
    let cloud = Arc::new(generate(Family::Box, 4_000, 9).unwrap());
    let index = HashIndex::build(cloud.clone(), BoxMode::Obb, None).unwrap();
    let off = SearchOptions { pruning: false };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for q in queries(&cloud, &mut rng, 50) {
        let (a, sa) = index.knn_with(&q, 5, SearchOptions::default()).unwrap();
        let (b, sb) = index.knn_with(&q, 5, off).unwrap();
        assert_eq!(a, b);
        assert!(sa.visited <= sb.visited);
        let (a, sa) = index.radius_with(&q, 5.0, SearchOptions::default()).unwrap();
        let (b, sb) = index.radius_with(&q, 5.0, off).unwrap();
        assert_eq!(a, b);
        assert!(sa.visited <= sb.visited);
    }
}

#[test]
fn builds_are_deterministic() {
    let cloud = Arc::new(generate(Family::Ellipsoid, 3_000, 1).unwrap());
    let a = HashIndex::build(cloud.clone(), BoxMode::Obb, None).unwrap();
    let b = HashIndex::build(cloud.clone(), BoxMode::Obb, None).unwrap();
    assert_eq!(a.frame(), b.frame());
    assert_eq!(a.div(), b.div());
    for bin in 0..a.bin_count() {
        let bin = twolevel_lsh::BinIndex::from_flat(bin, a.div());
        assert_eq!(a.bin_points(bin).unwrap(), b.bin_points(bin).unwrap());
    }
}
