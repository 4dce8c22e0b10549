use pcseg::objectness::{
    center_sample, objectness_labels, quintile_ids, recompose_scene, RecomposeParams, Sample,
};
use pcseg::shapes::{generate, ShapeKind};
use pcseg::signals::{
    cross_entropy_loss, grid_supervoxels, offset_loss, oracle_offsets, perturb,
    smooth_by_supervoxel, NoiseModel, SupervoxelPartition,
};
use pcseg::{LabeledCloud, Point3, ScoreMatrix, SignalSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn points(max: usize) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec(
        (-1.0..1.0f64, -1.0..1.0f64, -0.5..0.5f64).prop_map(|(x, y, z)| [x, y, z]),
        1..max,
    )
}

proptest! {
    #[test]
    fn quintiles_are_balanced_and_monotone(d in prop::collection::vec(0.0..10.0f64, 1..400)) {
        let ids = quintile_ids(&d);
        let n = d.len();
        for q in 0..5i8 {
            let count = ids.iter().filter(|&&i| i == q).count();
            // ranks k with floor(5k/n) == 4 - q
            let want = (0..n).filter(|k| 4 - (5 * k / n) as i8 == q).count();
            prop_assert_eq!(count, want);
        }
        for i in 0..n {
            for j in 0..n {
                if d[i] < d[j] {
                    prop_assert!(ids[i] >= ids[j]);
                }
            }
        }
    }

    #[test]
    fn objectness_ignores_power_of_two_scale(pts in points(300), k in -3i32..4) {
        let s = 2f64.powi(k);
        let c = center_sample(&pts).unwrap();
        let scaled: Vec<Point3> = c.iter().map(|p| [p[0] * s, p[1] * s, p[2] * s]).collect();
        let a = objectness_labels(&c).unwrap();
        let b = objectness_labels(&scaled).unwrap();
        prop_assert_eq!(a.ids, b.ids);
        for (x, y) in a.distances.iter().zip(&b.distances) {
            prop_assert_eq!(x * s, *y);
        }
    }

    #[test]
    fn objectness_distance_matches_scan(pts in points(200)) {
        let c = center_sample(&pts).unwrap();
        let labels = objectness_labels(&c).unwrap();
        for (p, d) in c.iter().zip(&labels.distances) {
            let best = c
                .iter()
                .map(|q| {
                    let h = [q[0] * 0.5, q[1] * 0.5, q[2] * 0.5];
                    ((p[0] - h[0]).powi(2) + (p[1] - h[1]).powi(2) + (p[2] - h[2]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!((d - best).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_matches_log_sum_exp(
        rows in prop::collection::vec(prop::collection::vec(-20.0..20.0f64, 4), 1..30),
        labels in prop::collection::vec(-1..4i32, 30),
    ) {
        let labels = &labels[..rows.len()];
        prop_assume!(labels.iter().any(|&l| l >= 0));
        let m = ScoreMatrix::from_rows(&rows).unwrap();
        let got = cross_entropy_loss(&m, labels).unwrap();
        let mut total = 0.0;
        let mut count = 0.0;
        for (row, &l) in rows.iter().zip(labels) {
            if l < 0 {
                continue;
            }
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            total += lse - row[l as usize];
            count += 1.0;
        }
        prop_assert!((got - total / count).abs() < 1e-9 * (1.0 + got.abs()));
    }

    #[test]
    fn smoothing_is_group_mean_and_idempotent(
        rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 1..60),
        groups in prop::collection::vec(0u32..6, 60),
    ) {
        let part = SupervoxelPartition(groups[..rows.len()].to_vec());
        let m = ScoreMatrix::from_rows(&rows).unwrap();
        let s = smooth_by_supervoxel(&m, &part).unwrap();
        for (i, &g) in part.0.iter().enumerate() {
            let members: Vec<usize> = (0..rows.len()).filter(|&j| part.0[j] == g).collect();
            for (c, got) in s.row(i).iter().enumerate() {
                let mean = members.iter().map(|&j| rows[j][c]).sum::<f64>() / members.len() as f64;
                prop_assert!((got - mean).abs() < 1e-12);
            }
        }
        let again = smooth_by_supervoxel(&s, &part).unwrap();
        for (a, b) in again.as_slice().iter().zip(s.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn offset_loss_is_translation_free(
        gt in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..50),
    ) {
        // identical nonzero offsets give exactly -1: zero L1, unit cosine
        let gt: Vec<Point3> = gt.into_iter().map(|(x, y, z)| [x + 2.0, y, z]).collect();
        let mask = vec![true; gt.len()];
        let l = offset_loss(&gt, &gt, &mask).unwrap();
        prop_assert!((l + 1.0).abs() < 1e-12);
    }
}

#[test]
fn offset_noise_has_requested_spread() {
    let n = 20_000;
    let sigma = 0.02;
    let s = SignalSet {
        offsets: Some(vec![[0.0; 3]; n]),
        objectness: Some(vec![2; n]),
        sem_scores: None,
    };
    let noisy = perturb(
        &s,
        &NoiseModel {
            offset_sigma: sigma,
            flip_prob: 0.1,
            seed: 9,
        },
    )
    .unwrap();
    let vals: Vec<f64> = noisy.offsets.unwrap().into_iter().flatten().collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    assert!(mean.abs() < 1e-3, "mean {mean}");
    assert!(
        (var.sqrt() / sigma - 1.0).abs() < 0.05,
        "std {}",
        var.sqrt()
    );
    // a flipped id lands on 2 a fifth of the time
    let changed = noisy
        .objectness
        .unwrap()
        .iter()
        .filter(|&&i| i != 2)
        .count() as f64
        / n as f64;
    assert!((changed - 0.08).abs() < 0.01, "changed {changed}");
}

#[test]
fn oracle_offsets_point_at_centroids() {
    let coords = vec![
        [0.0, 0.0, 0.0],
        [2.0, 0.0, 0.0],
        [5.0, 5.0, 5.0],
        [9.0, 9.0, 9.0],
    ];
    let cloud =
        LabeledCloud::new(coords, Some(vec![1, 1, 2, -1]), Some(vec![0, 0, 1, -1])).unwrap();
    let off = oracle_offsets(&cloud).unwrap();
    assert_eq!(
        off,
        vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]]
    );
}

#[test]
fn grid_supervoxels_share_cells() {
    let pts = vec![
        [0.01, 0.01, 0.0],
        [0.3, 0.0, 0.0],
        [0.02, 0.03, 0.01],
        [-0.01, 0.0, 0.0],
    ];
    let p = grid_supervoxels(&pts, 0.1).unwrap();
    assert_eq!(p.0, vec![0, 1, 0, 2]);
}

#[test]
fn recomposed_instances_keep_their_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<Sample> = ShapeKind::ALL
        .iter()
        .map(|&k| Sample {
            coords: generate(k, 400.0, &mut rng),
            category: k.category(),
        })
        .collect();
    let params = RecomposeParams {
        min_gap: 0.07,
        seed: 11,
        ..RecomposeParams::default()
    };
    let scene = recompose_scene(&samples, &params).unwrap();
    let fp = &scene.footprints;
    assert_eq!(fp.len(), samples.len());
    for a in 0..fp.len() {
        for b in a + 1..fp.len() {
            let gx = (fp[b][0] - fp[a][2]).max(fp[a][0] - fp[b][2]);
            let gy = (fp[b][1] - fp[a][3]).max(fp[a][1] - fp[b][3]);
            assert!(gx.max(gy) >= 0.07 - 1e-9, "instances {a} and {b} too close");
        }
    }
    let again = recompose_scene(&samples, &params).unwrap();
    assert_eq!(scene, again);
}
