//! Oracle network-output stand-ins, noise injection, losses and supervoxel pooling.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_len, check_positive, Error, Result};
use crate::objectness::{center_sample, centroid, objectness_labels};
use crate::parallel;
use crate::pcio::{LabeledCloud, ScoreMatrix, SignalSet};
use crate::reduce::pairwise_sum;
use crate::spatial::cell_key;
use crate::Point3;

fn instance_members(instance: &[i32]) -> BTreeMap<i32, Vec<usize>> {
    let mut members: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &id) in instance.iter().enumerate() {
        if id >= 0 {
            members.entry(id).or_default().push(i);
        }
    }
    members
}

/// Ground-truth shift from each point to its instance centroid; zero for unlabeled points.
pub fn oracle_offsets(cloud: &LabeledCloud) -> Result<Vec<Point3>> {
    let instance = cloud.instance().ok_or(Error::Missing("instance labels"))?;
    let coords = cloud.coords();
    let mut offsets = vec![[0.0; 3]; cloud.len()];
    for members in instance_members(instance).values() {
        let pts: Vec<Point3> = members.iter().map(|&i| coords[i]).collect();
        let c = centroid(&pts);
        for &i in members {
            let p = coords[i];
            offsets[i] = [c[0] - p[0], c[1] - p[1], c[2] - p[2]];
        }
    }
    Ok(offsets)
}

/// Shape-aware objectness computed per ground-truth instance; -1 for unlabeled points.
pub fn oracle_objectness(cloud: &LabeledCloud) -> Result<Vec<i8>> {
    let instance = cloud.instance().ok_or(Error::Missing("instance labels"))?;
    let coords = cloud.coords();
    let groups: Vec<Vec<usize>> = instance_members(instance).into_values().collect();
    let labels = parallel::map_slice(&groups, |members| {
        let pts: Vec<Point3> = members.iter().map(|&i| coords[i]).collect();
        center_sample(&pts).and_then(|c| objectness_labels(&c))
    });
    let mut ids = vec![-1i8; cloud.len()];
    for (members, l) in groups.iter().zip(labels) {
        let l = l?;
        for (&i, &id) in members.iter().zip(&l.ids) {
            ids[i] = id;
        }
    }
    Ok(ids)
}

/// Oracle offsets and objectness bundled as a signal set.
pub fn oracle_signals(cloud: &LabeledCloud) -> Result<SignalSet> {
    Ok(SignalSet {
        offsets: Some(oracle_offsets(cloud)?),
        objectness: Some(oracle_objectness(cloud)?),
        sem_scores: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of the Gaussian added to each offset component, meters.
    pub offset_sigma: f64,
    /// Probability that a non-background objectness id is replaced by a uniform draw from 0..=4.
    pub flip_prob: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.offset_sigma >= 0.0 && self.offset_sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "offset sigma {} must be >= 0",
                self.offset_sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::invalid(format!(
                "flip probability {} outside [0, 1]",
                self.flip_prob
            )));
        }
        Ok(())
    }
}

/// Adds offset noise and objectness flips. Offsets draw from ChaCha8 stream 0
/// and objectness from stream 1 of `noise.seed`, so each field's noise is
/// independent of whether the other field is present.
pub fn perturb(signals: &SignalSet, noise: &NoiseModel) -> Result<SignalSet> {
    noise.validate()?;
    let mut out = signals.clone();
    if let Some(offsets) = out.offsets.as_mut() {
        if noise.offset_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(0);
            let normal = Normal::new(0.0, noise.offset_sigma)
                .map_err(|e| Error::invalid(format!("offset noise: {e}")))?;
            for v in offsets.iter_mut().flatten() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    if let Some(ids) = out.objectness.as_mut() {
        if noise.flip_prob > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(1);
            for id in ids.iter_mut().filter(|id| **id >= 0) {
                if rng.random::<f64>() < noise.flip_prob {
                    *id = rng.random_range(0..5);
                }
            }
        }
    }
    Ok(out)
}

fn norm(v: &Point3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Masked offset loss: mean L1 distance between predicted and true shifts,
/// minus their mean cosine similarity. Points where either vector is zero add
/// nothing to the cosine term.
pub fn offset_loss(pred: &[Point3], gt: &[Point3], mask: &[bool]) -> Result<f64> {
    check_len("ground-truth offsets", pred.len(), gt.len())?;
    check_len("offset mask", pred.len(), mask.len())?;
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::Empty("offset mask"));
    }
    let terms = parallel::map_range(pred.len(), |i| {
        if !mask[i] {
            return (0.0, 0.0);
        }
        let (d, g) = (&pred[i], &gt[i]);
        let l1 = (d[0] - g[0]).abs() + (d[1] - g[1]).abs() + (d[2] - g[2]).abs();
        let (nd, ng) = (norm(d), norm(g));
        let cos = if nd > 0.0 && ng > 0.0 {
            (d[0] * g[0] + d[1] * g[1] + d[2] * g[2]) / (nd * ng)
        } else {
            0.0
        };
        (l1, cos)
    });
    let n = count as f64;
    let l1 = pairwise_sum(terms.iter().map(|t| t.0)) / n;
    let cos = pairwise_sum(terms.iter().map(|t| t.1)) / n;
    Ok(l1 - cos)
}

/// Mean cross-entropy of softmax(scores) against labels; label -1 is ignored.
pub fn cross_entropy_loss(scores: &ScoreMatrix, labels: &[i32]) -> Result<f64> {
    check_len("labels", scores.rows(), labels.len())?;
    let c = scores.cols();
    if let Some(bad) = labels.iter().find(|&&l| l < -1 || l >= c as i32) {
        return Err(Error::invalid(format!("label {bad} outside [-1, {c})")));
    }
    let count = labels.iter().filter(|&&l| l >= 0).count();
    if count == 0 {
        return Err(Error::Empty("non-ignored label set"));
    }
    let terms = parallel::map_range(labels.len(), |i| {
        let l = labels[i];
        if l < 0 {
            return 0.0;
        }
        let row = scores.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + pairwise_sum(row.iter().map(|s| (s - max).exp())).ln();
        lse - row[l as usize]
    });
    Ok(pairwise_sum(terms) / count as f64)
}

/// Per-point supervoxel ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupervoxelPartition(pub Vec<u32>);

impl SupervoxelPartition {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Replaces every score row by the mean of the rows in its supervoxel.
pub fn smooth_by_supervoxel(
    scores: &ScoreMatrix,
    partition: &SupervoxelPartition,
) -> Result<ScoreMatrix> {
    check_len("supervoxel partition", scores.rows(), partition.len())?;
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &g) in partition.0.iter().enumerate() {
        groups.entry(g).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let c = scores.cols();
    let means = parallel::map_slice(&groups, |members| {
        let n = members.len() as f64;
        (0..c)
            .map(|j| pairwise_sum(members.iter().map(|&i| scores.row(i)[j])) / n)
            .collect::<Vec<f64>>()
    });
    let mut data = vec![0.0; scores.rows() * c];
    for (members, mean) in groups.iter().zip(&means) {
        for &i in members {
            data[i * c..(i + 1) * c].copy_from_slice(mean);
        }
    }
    ScoreMatrix::new(scores.rows(), c, data)
}

/// Fallback over-segmentation: one supervoxel per occupied grid cell, ids dense
/// in order of first appearance.
pub fn grid_supervoxels(coords: &[Point3], voxel: f64) -> Result<SupervoxelPartition> {
    check_positive("supervoxel size", voxel)?;
    let mut ids = FxHashMap::default();
    let part = coords
        .iter()
        .map(|p| {
            let next = ids.len() as u32;
            *ids.entry(cell_key(p, voxel)).or_insert(next)
        })
        .collect();
    Ok(SupervoxelPartition(part))
}
