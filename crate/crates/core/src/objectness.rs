//! Multilevel shape-aware objectness and recomposed training scenes.
//!
//! For an instance centered at the origin, every point's distance to the
//! half-scale copy of the instance measures how far inside the shape it sits.
//! Sorting those distances (ties by point index) and cutting the ranking into
//! fifths gives ids 4 (innermost fifth) down to 0 (outermost fifth): the point
//! at rank `k` of `N` gets id `4 - floor(5k / N)`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::parallel;
use crate::pcio::LabeledCloud;
use crate::spatial::KdTree;
use crate::Point3;

/// Per-point objectness ids and the distances they were ranked by.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectnessLabels {
    pub ids: Vec<i8>,
    pub distances: Vec<f64>,
}

/// Translates a sample so its mean sits at the origin.
pub fn center_sample(coords: &[Point3]) -> Result<Vec<Point3>> {
    if coords.is_empty() {
        return Err(Error::Empty("instance sample"));
    }
    let mean = centroid(coords);
    Ok(coords
        .iter()
        .map(|p| [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]])
        .collect())
}

pub(crate) fn centroid(coords: &[Point3]) -> Point3 {
    let n = coords.len() as f64;
    let mut sum = [0.0; 3];
    for p in coords {
        for a in 0..3 {
            sum[a] += p[a];
        }
    }
    [sum[0] / n, sum[1] / n, sum[2] / n]
}

/// Shrinks a centered sample toward the origin by a factor of two.
pub fn compress_cloud(coords: &[Point3]) -> Vec<Point3> {
    coords
        .iter()
        .map(|p| [p[0] * 0.5, p[1] * 0.5, p[2] * 0.5])
        .collect()
}

/// Quintile ids from a distance list: ascending by `(distance, index)`, rank
/// `k` maps to `4 - floor(5k / N)`.
pub fn quintile_ids(distances: &[f64]) -> Vec<i8> {
    let n = distances.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let mut ids = vec![0i8; n];
    for (rank, &i) in order.iter().enumerate() {
        ids[i] = 4 - (5 * rank / n) as i8;
    }
    ids
}

/// Shape-aware objectness of a centered sample: distance from each point to
/// the nearest point of the compressed copy, then quintile ids.
pub fn objectness_labels(coords: &[Point3]) -> Result<ObjectnessLabels> {
    if coords.is_empty() {
        return Err(Error::Empty("instance sample"));
    }
    let compressed = compress_cloud(coords);
    let index = KdTree::build(&compressed);
    let distances = parallel::map_slice(coords, |p| {
        index
            .nearest(&compressed, p)
            .map(|(_, d)| d)
            .expect("compressed cloud is non-empty")
    });
    Ok(ObjectnessLabels {
        ids: quintile_ids(&distances),
        distances,
    })
}

/// Centroid-distance objectness: ranks points by `|x_i|` alone. Kept for
/// comparison with the shape-aware rule.
pub fn objectness_labels_naive(coords: &[Point3]) -> Result<ObjectnessLabels> {
    if coords.is_empty() {
        return Err(Error::Empty("instance sample"));
    }
    let distances: Vec<f64> = coords.iter().map(|p| crate::dist(p, &[0.0; 3])).collect();
    Ok(ObjectnessLabels {
        ids: quintile_ids(&distances),
        distances,
    })
}

/// An extracted instance and its semantic category.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub coords: Vec<Point3>,
    pub category: i32,
}

/// Layout and perturbation settings for one recomposed scene.
///
/// Slots are filled row by row, `columns` per row. Each slot is as wide as
/// its sample's bird-view bounding box; neighbors are separated by `min_gap`
/// in x within a row, and rows by `min_gap` in y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecomposeParams {
    pub min_gap: f64,
    pub drop_prob: f64,
    pub columns: usize,
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for RecomposeParams {
    fn default() -> Self {
        RecomposeParams {
            min_gap: 0.05,
            drop_prob: 0.0,
            columns: 3,
            max_samples: 9,
            seed: 0,
        }
    }
}

impl RecomposeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_gap >= 0.0 && self.min_gap.is_finite()) {
            return Err(Error::invalid(format!(
                "min_gap {} must be >= 0",
                self.min_gap
            )));
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::invalid(format!(
                "drop probability {} outside [0, 1]",
                self.drop_prob
            )));
        }
        if self.columns == 0 {
            return Err(Error::invalid("template needs at least one column"));
        }
        Ok(())
    }
}

/// A synthesized scene with dense labels and per-instance objectness.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualScene {
    pub cloud: LabeledCloud,
    pub objectness: ObjectnessLabels,
    /// Bird-view boxes `[min_x, min_y, max_x, max_y]` of the placed instances, by instance id.
    pub footprints: Vec<[f64; 4]>,
}

fn rotate_yaw(coords: &[Point3], angle: f64) -> Vec<Point3> {
    let (s, c) = angle.sin_cos();
    coords
        .iter()
        .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])
        .collect()
}

fn bounds(coords: &[Point3]) -> (Point3, Point3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in coords {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Stitches samples into a template scene.
///
/// For each slot in order the RNG draws a drop decision and a yaw angle in
/// `[0, 2π)`. Survivors are centered, rotated, labeled with objectness on that
/// centered copy, then translated into the next free slot with their lowest
/// point on `z = 0`. Instance ids follow slot order. The scene depends only on
/// the samples and `params` (the RNG is ChaCha8 seeded with `params.seed`).
pub fn recompose_scene(samples: &[Sample], params: &RecomposeParams) -> Result<VirtualScene> {
    params.validate()?;
    if samples.is_empty() || samples.len() > params.max_samples {
        return Err(Error::invalid(format!(
            "recompose needs 1..={} samples, got {}",
            params.max_samples,
            samples.len()
        )));
    }
    if samples.iter().any(|s| s.coords.is_empty()) {
        return Err(Error::Empty("instance sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut placed: Vec<(Vec<Point3>, i32, ObjectnessLabels)> = Vec::new();
    for sample in samples {
        let dropped = rng.random::<f64>() < params.drop_prob;
        let yaw = rng.random::<f64>() * TAU;
        if dropped {
            continue;
        }
        let centered = center_sample(&sample.coords)?;
        let rotated = rotate_yaw(&centered, yaw);
        let labels = objectness_labels(&rotated)?;
        placed.push((rotated, sample.category, labels));
    }

    let mut coords = Vec::new();
    let mut semantic = Vec::new();
    let mut instance = Vec::new();
    let mut objectness = ObjectnessLabels::default();
    let mut footprints = Vec::new();

    let mut row_y = 0.0;
    for (row_idx, row) in placed.chunks(params.columns).enumerate() {
        let mut cursor_x = 0.0;
        let mut row_depth: f64 = 0.0;
        for (col, (pts, category, labels)) in row.iter().enumerate() {
            let id = (row_idx * params.columns + col) as i32;
            let (lo, hi) = bounds(pts);
            let shift = [cursor_x - lo[0], row_y - lo[1], -lo[2]];
            coords.extend(
                pts.iter()
                    .map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]),
            );
            semantic.extend(std::iter::repeat_n(*category, pts.len()));
            instance.extend(std::iter::repeat_n(id, pts.len()));
            objectness.ids.extend_from_slice(&labels.ids);
            objectness.distances.extend_from_slice(&labels.distances);
            let width = hi[0] - lo[0];
            let depth = hi[1] - lo[1];
            footprints.push([cursor_x, row_y, cursor_x + width, row_y + depth]);
            cursor_x += width + params.min_gap;
            row_depth = row_depth.max(depth);
        }
        row_y += row_depth + params.min_gap;
    }

    Ok(VirtualScene {
        cloud: LabeledCloud::new(coords, Some(semantic), Some(instance))?,
        objectness,
        footprints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line5() -> Vec<Point3> {
        [-2.0, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|&x| [x, 0.0, 0.0])
            .collect()
    }

    #[test]
    fn centering() {
        assert_eq!(center_sample(&[[1.0, 1.0, 1.0]]).unwrap(), vec![[0.0; 3]]);
        assert_eq!(
            center_sample(&[[0.0; 3], [2.0, 0.0, 0.0]]).unwrap(),
            vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
        );
        assert!(center_sample(&[]).is_err());
    }

    #[test]
    fn compression_halves() {
        let c = compress_cloud(&line5());
        let xs: Vec<f64> = c.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(compress_cloud(&[[0.0; 3]]), vec![[0.0; 3]]);
        let twice = compress_cloud(&compress_cloud(&line5()));
        assert_eq!(twice[0], [-0.5, 0.0, 0.0]);
    }

    #[test]
    fn line_fixture() {
        let l = objectness_labels(&line5()).unwrap();
        assert_eq!(l.distances, vec![1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(l.ids, vec![1, 4, 3, 2, 0]);
    }

    #[test]
    fn single_point_is_innermost() {
        let l = objectness_labels(&[[0.0; 3]]).unwrap();
        assert_eq!(l.ids, vec![4]);
        assert_eq!(l.distances, vec![0.0]);
        assert_eq!(objectness_labels_naive(&[[0.0; 3]]).unwrap().ids, vec![4]);
        assert!(objectness_labels(&[]).is_err());
        assert!(objectness_labels_naive(&[]).is_err());
    }

    #[test]
    fn naive_line() {
        let l = objectness_labels_naive(&line5()).unwrap();
        assert_eq!(l.distances, vec![2.0, 1.0, 0.0, 1.0, 2.0]);
        assert_eq!(l.ids, vec![1, 3, 4, 2, 0]);
    }

    #[test]
    fn naive_shell_ties_follow_index() {
        let shell: Vec<Point3> = (0..10)
            .map(|i| {
                let a = i as f64 * TAU / 10.0;
                [a.cos(), a.sin(), 0.0]
            })
            .collect();
        let l = objectness_labels_naive(&shell).unwrap();
        // all |x| equal up to rounding: only check the quintile balance
        for id in 0..5 {
            assert_eq!(l.ids.iter().filter(|&&x| x == id).count(), 2);
        }
        let exact = quintile_ids(&[1.0; 10]);
        assert_eq!(exact, vec![4, 4, 3, 3, 2, 2, 1, 1, 0, 0]);
    }

    #[test]
    fn quintile_counts_small_n() {
        for n in 1..40 {
            let ids = quintile_ids(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
            for id in 0..5i8 {
                let count = ids.iter().filter(|&&x| x == id).count() as f64;
                assert!((count - n as f64 / 5.0).abs() < 1.0, "n={n} id={id}");
            }
            assert!(ids.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    fn unit_square(n: usize) -> Vec<Point3> {
        let side = (n as f64).sqrt() as usize;
        let mut pts = Vec::new();
        for i in 0..side {
            for j in 0..side {
                pts.push([
                    i as f64 / (side - 1) as f64,
                    j as f64 / (side - 1) as f64,
                    0.0,
                ]);
            }
        }
        pts
    }

    #[test]
    fn identical_samples_respect_gap() {
        let s = Sample {
            coords: unit_square(100),
            category: 3,
        };
        let params = RecomposeParams {
            min_gap: 0.05,
            ..Default::default()
        };
        let scene = recompose_scene(&[s.clone(), s], &params).unwrap();
        let f = &scene.footprints;
        assert_eq!(f.len(), 2);
        let c0 = (f[0][0] + f[0][2]) / 2.0;
        let c1 = (f[1][0] + f[1][2]) / 2.0;
        assert!(c1 - c0 >= 1.05 - 1e-12, "{}", c1 - c0);
        assert!(f[1][0] - f[0][2] >= 0.05 - 1e-12);
        assert_eq!(scene.cloud.instance().unwrap()[150], 1);
    }

    #[test]
    fn drop_everything() {
        let s = Sample {
            coords: unit_square(16),
            category: 1,
        };
        let params = RecomposeParams {
            drop_prob: 1.0,
            ..Default::default()
        };
        let scene = recompose_scene(&[s.clone(), s], &params).unwrap();
        assert!(scene.cloud.is_empty());
        assert!(scene.footprints.is_empty());
    }

    #[test]
    fn same_seed_same_scene() {
        let samples: Vec<Sample> = (0..5)
            .map(|i| Sample {
                coords: unit_square(25 + i),
                category: i as i32,
            })
            .collect();
        let params = RecomposeParams {
            drop_prob: 0.3,
            seed: 42,
            ..Default::default()
        };
        let a = recompose_scene(&samples, &params).unwrap();
        let b = recompose_scene(&samples, &params).unwrap();
        assert_eq!(a, b);
        let other = recompose_scene(&samples, &RecomposeParams { seed: 43, ..params }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn recompose_errors() {
        let empty = Sample {
            coords: vec![],
            category: 0,
        };
        assert!(recompose_scene(&[empty], &RecomposeParams::default()).is_err());
        assert!(recompose_scene(&[], &RecomposeParams::default()).is_err());
        let s = Sample {
            coords: vec![[0.0; 3]],
            category: 0,
        };
        assert!(recompose_scene(&vec![s; 10], &RecomposeParams::default()).is_err());
    }
}
