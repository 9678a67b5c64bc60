//! Cross-module invariants exercised through the public API.

use proptest::prelude::*;

use patchup::geometry::{
    centroid, dist, dist2, extract_patch, farthest_point_sample, knn_indices, merge_patches, AnalyticShape, Point3,
};
use patchup::loss::{chamfer, emd_exact, hausdorff};
use patchup::model::{init_params, upsample_patch_pair, UpsamplerConfig};
use patchup::pairing::{select_adjacent_pairs, ClusterParams, PatchSet};

fn cloud(max: usize) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 2..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_rows_are_the_k_smallest_distances(points in cloud(40), k in 1usize..8) {
        let k = k.min(points.len());
        let index = knn_indices(&points, &points, k).unwrap();
        for (q, p) in points.iter().enumerate() {
            let row = index.neighbors(q);
            let worst = row.iter().map(|&i| dist2(p, &points[i])).fold(0.0, f64::max);
            let closer = points.iter().filter(|s| dist2(p, s) < worst).count();
            prop_assert!(closer < k);
            prop_assert!(row.windows(2).all(|w| dist2(p, &points[w[0]]) <= dist2(p, &points[w[1]])));
        }
    }

    #[test]
    fn farthest_point_picks_maximize_coverage(points in cloud(40), m in 1usize..10) {
        let m = m.min(points.len());
        let picks = farthest_point_sample(&points, m, 0).unwrap();
        prop_assert_eq!(picks[0], 0);
        for t in 1..m {
            let gap = |i: usize| picks[..t].iter().map(|&j| dist(&points[i], &points[j])).fold(f64::INFINITY, f64::min);
            let best = (0..points.len()).map(gap).fold(0.0, f64::max);
            prop_assert_eq!(gap(picks[t]), best);
        }
    }

    #[test]
    fn patches_are_unit_normalized(points in cloud(60), n in 2usize..20) {
        let n = n.min(points.len());
        prop_assume!(points.iter().any(|p| p != &points[0]));
        let patch = match extract_patch(&points, 0, n) {
            Ok(p) => p,
            Err(_) => return Ok(()), // all chosen points coincide
        };
        let c = centroid(&patch.points);
        prop_assert!(c.iter().all(|v| v.abs() < 1e-9));
        let radius = patch.points.iter().map(|p| dist(p, &[0.0; 3])).fold(0.0, f64::max);
        prop_assert!((radius - 1.0).abs() < 1e-9);
        for (p, o) in patch.transform.denormalize_all(&patch.points).iter().zip(&patch.object) {
            prop_assert!(dist(p, o) < 1e-9);
        }
    }

    #[test]
    fn metrics_are_symmetric_and_ordered(a in cloud(12), seed in 0u64..1000) {
        let b: Vec<Point3> = AnalyticShape::by_name("sphere").unwrap().sample(a.len(), seed);
        prop_assert!((chamfer(&a, &b).unwrap() - chamfer(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert_eq!(hausdorff(&a, &b).unwrap(), hausdorff(&b, &a).unwrap());
        prop_assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        // any bijection costs at least the nearest-neighbor mean
        let emd = emd_exact(&a, &b).unwrap();
        let nearest = a
            .iter()
            .map(|p| b.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / a.len() as f64;
        prop_assert!(emd >= nearest - 1e-12);
        let identity = a.iter().zip(&b).map(|(p, q)| dist(p, q)).sum::<f64>() / a.len() as f64;
        prop_assert!(emd <= identity + 1e-12);
    }
}

#[test]
fn whole_cloud_upsampling_meets_the_count_contract() {
    let config = UpsamplerConfig { n: 32, k: 8, c: 16, c_up: 16, head_hidden: 16, ..Default::default() };
    let params = init_params(&config, 1);
    let cloud = AnalyticShape::by_name("torus").unwrap().sample(200, 4);
    let set = PatchSet::cover(&cloud, config.n).unwrap();
    let pairs = select_adjacent_pairs(&set, 3, ClusterParams::default()).unwrap();
    let mut patches = Vec::new();
    for s in &pairs {
        let out = upsample_patch_pair(&s.pair, &params, &config).unwrap();
        assert_eq!(out.refined.len(), config.n * config.r);
        patches.push(s.pair.transform.denormalize_all(&out.refined));
    }
    let merged = merge_patches(&patches, cloud.len() * config.r).unwrap();
    assert_eq!(merged.len(), 800);
    // an untrained network with the coarse skip replicates its input points
    for p in &merged {
        assert!(cloud.iter().any(|q| dist(p, q) < 1e-9));
    }
}
