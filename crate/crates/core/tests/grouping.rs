use std::collections::{BTreeMap, BTreeSet};

use pcseg::cluster::{
    bfs_cluster, brute_force_components, select_optimal_samples, BfsParams, SelectionBand,
};
use pcseg::spatial::{project_birdview, radius_query, voxel_downsample, GridIndex, KdTree};
use pcseg::{Clustering, Point3};
use proptest::prelude::*;

fn d2(a: &Point3, b: &Point3) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

fn cloud_strategy(max: usize, extent: f64) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec(
        (-extent..extent, -extent..extent, -extent..extent).prop_map(|(x, y, z)| [x, y, z]),
        0..max,
    )
}

// partition as a set of sorted member lists, independent of ids
fn partition(c: &Clustering) -> BTreeSet<Vec<usize>> {
    c.clusters().iter().map(|c| c.points.clone()).collect()
}

proptest! {
    #[test]
    fn radius_query_matches_scan(
        pts in cloud_strategy(300, 1.0),
        q in (-1.2..1.2f64, -1.2..1.2f64, -1.2..1.2f64),
        r in 0.01..0.8f64,
    ) {
        let q = [q.0, q.1, q.2];
        let got = radius_query(&pts, &q, r).unwrap();
        let want: Vec<usize> = (0..pts.len()).filter(|&i| d2(&pts[i], &q) < r * r).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn grid_nearest_matches_scan(
        pts in cloud_strategy(200, 2.0),
        q in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64),
        cell in 0.05..1.0f64,
    ) {
        prop_assume!(!pts.is_empty());
        let q = [q.0, q.1, q.2];
        let index = GridIndex::build(&pts, cell).unwrap();
        let (i, d) = index.nearest(&pts, &q).unwrap();
        let best = pts.iter().map(|p| d2(p, &q)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d2(&pts[i], &q), best);
        prop_assert!((d - best.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kd_nearest_matches_scan(
        pts in prop::collection::vec(
            (-4i32..4, -4i32..4, -4i32..4).prop_map(|(x, y, z)| [x as f64 * 0.5, y as f64, z as f64]),
            1..300,
        ),
        q in (-6.0..6.0f64, -6.0..6.0f64, -6.0..6.0f64),
    ) {
        // lattice points force many exact ties
        let q = [q.0.round(), q.1, q.2.round()];
        let tree = KdTree::build(&pts);
        let (i, d) = tree.nearest(&pts, &q).unwrap();
        let best = pts.iter().map(|p| d2(p, &q)).fold(f64::INFINITY, f64::min);
        let first = pts.iter().position(|p| d2(p, &q) == best).unwrap();
        prop_assert_eq!(i, first);
        prop_assert_eq!(d, best.sqrt());
    }

    #[test]
    fn voxel_downsample_keeps_first_point_per_cell(
        pts in cloud_strategy(300, 1.0),
        voxel in 0.05..0.5f64,
    ) {
        let got = voxel_downsample(&pts, voxel).unwrap();
        let mut seen = BTreeSet::new();
        let want: Vec<usize> = (0..pts.len())
            .filter(|&i| {
                let p = pts[i];
                seen.insert([
                    (p[0] / voxel).floor() as i64,
                    (p[1] / voxel).floor() as i64,
                    (p[2] / voxel).floor() as i64,
                ])
            })
            .collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn bfs_matches_union_find(
        pts in cloud_strategy(400, 0.6),
        labels in prop::collection::vec(0..3i32, 400),
        radius in 0.02..0.2f64,
        min_points in 0usize..6,
    ) {
        let sem: Vec<i32> = labels[..pts.len()].to_vec();
        let fg: BTreeSet<i32> = [0, 2].into();
        let params = BfsParams { radius, min_points };
        let fast = bfs_cluster(&pts, &sem, &fg, &params).unwrap();
        let slow = brute_force_components(&pts, &sem, &fg, &params).unwrap();
        prop_assert_eq!(fast.assignment(), slow.assignment());
        for c in fast.clusters() {
            prop_assert!(c.points.len() > min_points);
            prop_assert!(c.points.iter().all(|&i| sem[i] == c.category && c.category != 1));
        }
    }

    #[test]
    fn bfs_partition_ignores_input_order(
        pts in cloud_strategy(300, 0.5),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let n = pts.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
        let sem = vec![0; n];
        let fg: BTreeSet<i32> = [0].into();
        let params = BfsParams { radius: 0.08, min_points: 2 };
        let a = bfs_cluster(&pts, &sem, &fg, &params).unwrap();
        let b = bfs_cluster(&shuffled, &sem, &fg, &params).unwrap();
        let mapped: BTreeSet<Vec<usize>> = b
            .clusters()
            .iter()
            .map(|c| {
                let mut m: Vec<usize> = c.points.iter().map(|&j| perm[j]).collect();
                m.sort_unstable();
                m
            })
            .collect();
        prop_assert_eq!(partition(&a), mapped);
    }

    #[test]
    fn selection_keeps_band_of_each_category(
        sizes in prop::collection::vec((1usize..40, 0..3i32), 1..30),
        lo in 0.0..0.5f64,
        width in 0.05..0.5f64,
    ) {
        let mut groups = Vec::new();
        let mut next = 0;
        for &(s, cat) in &sizes {
            groups.push(((next..next + s).collect::<Vec<_>>(), cat));
            next += s;
        }
        let c = Clustering::from_groups(next, groups).unwrap();
        let band = SelectionBand::new(lo, (lo + width).min(1.0)).unwrap();
        let kept = select_optimal_samples(&c, &band);

        let mut by_cat: BTreeMap<i32, Vec<(usize, i32)>> = BTreeMap::new();
        for cl in c.clusters() {
            by_cat.entry(cl.category).or_default().push((cl.points.len(), cl.id));
        }
        let mut want = BTreeSet::new();
        for list in by_cat.values_mut() {
            list.sort();
            let k = list.len() as f64;
            for (rank, &(_, id)) in list.iter().enumerate() {
                let f = rank as f64 / k;
                if band.lo <= f && f < band.hi {
                    want.insert(id);
                }
            }
        }
        let got: BTreeSet<i32> = kept.clusters().iter().map(|c| c.id).collect();
        prop_assert_eq!(got, want);
    }
}

#[test]
fn radius_boundary_is_exclusive() {
    let pts = vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.25, 0.0]];
    assert_eq!(radius_query(&pts, &[0.0; 3], 0.5).unwrap(), vec![0, 2]);
    assert_eq!(radius_query(&pts, &[0.0; 3], 0.25).unwrap(), vec![0]);
}

#[test]
fn birdview_flattens_stacked_pieces() {
    // two vertical pieces 0.3 apart in z merge only after projection
    let mut pts = Vec::new();
    for i in 0..20 {
        pts.push([i as f64 * 0.01, 0.0, 0.0]);
        pts.push([i as f64 * 0.01, 0.0, 0.3]);
    }
    let sem = vec![0; pts.len()];
    let fg: BTreeSet<i32> = [0].into();
    let params = BfsParams {
        radius: 0.05,
        min_points: 5,
    };
    assert_eq!(
        bfs_cluster(&pts, &sem, &fg, &params)
            .unwrap()
            .num_clusters(),
        2
    );
    let flat = project_birdview(&pts);
    assert!(flat.iter().all(|p| p[2] == 0.0));
    assert_eq!(
        bfs_cluster(&flat, &sem, &fg, &params)
            .unwrap()
            .num_clusters(),
        1
    );
}

#[test]
fn collapsed_points_cluster_quickly() {
    // 40k identical points would be quadratic for a naive neighbor walk
    let pts = vec![[0.1, 0.2, 0.3]; 40_000];
    let sem = vec![0; pts.len()];
    let fg: BTreeSet<i32> = [0].into();
    let c = bfs_cluster(&pts, &sem, &fg, &BfsParams::default()).unwrap();
    assert_eq!(c.num_clusters(), 1);
    assert_eq!(c.clusters()[0].points.len(), 40_000);
}
