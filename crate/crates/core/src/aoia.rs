//! Asymmetric object inference.
//!
//! Per foreground category, points are split by predicted objectness into
//! core (id >= threshold) and boundary. Core points are shifted by their
//! predicted offsets and grouped by BFS; those groups are final. Each boundary
//! point then joins the core cluster exerting the strongest influence on it,
//! where a cluster's influence is the mean Gaussian kernel between its points
//! and the target:
//!
//! ```text
//! w(i, j)  = exp(-|x_i - x_j|^2 / (2 eps^2))
//! I_j^A    = (1 / |A|) * sum_{i in A} w(i, j)
//! ```
//!
//! By default `x` are the shifted coordinates of both sides, so a boundary
//! point is judged by where its own offset sends it;
//! [`InfluenceSpace::Original`] evaluates the kernel on the raw input instead.
//! Information flows only from core to boundary: absorbing boundary points
//! never touches core labels.

use rustc_hash::FxHashMap;

use crate::cluster::bfs_components;
use crate::error::{check_len, check_positive, Error, Result};
use crate::parallel;
use crate::pcio::{CategoryConfig, Clustering, SignalSet};
use crate::reduce::PairwiseSum;
use crate::spatial::{cell_key, project_birdview, voxel_downsample, CellKey, KdTree};
use crate::{dist2, Point3};

/// Influence maxima below this are treated as underflow; the boundary point
/// then falls back to its nearest core point.
pub const INFLUENCE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoiaParams {
    /// BFS radius for grouping shifted core points, meters.
    pub core_radius: f64,
    /// Objectness id at or above which a point is core.
    pub objectness_threshold: i8,
    /// Kernel width of the influence weight.
    pub epsilon: f64,
    /// Voxel size used to thin out large categories, meters.
    pub subsample_voxel: f64,
    /// Categories with more points than this are voxel-subsampled. `usize::MAX` disables.
    pub subsample_trigger: usize,
    /// Drop the vertical component of shifted coordinates before core grouping.
    pub birdview: bool,
    /// Core clusters need more than this many points.
    pub min_core_cluster: usize,
    /// Coordinates the influence kernel and the nearest-core fallback are evaluated in.
    pub influence_space: InfluenceSpace,
}

/// Where boundary points meet the core clusters during absorption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InfluenceSpace {
    /// Every point moved by its predicted offset, the same space the core is grouped in.
    #[default]
    Shifted,
    /// Raw input coordinates.
    Original,
}

impl Default for AoiaParams {
    fn default() -> Self {
        AoiaParams {
            core_radius: 0.05,
            objectness_threshold: 1,
            epsilon: 3.0,
            subsample_voxel: 0.05,
            subsample_trigger: 20_000,
            birdview: false,
            min_core_cluster: 50,
            influence_space: InfluenceSpace::Shifted,
        }
    }
}

impl AoiaParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("core radius", self.core_radius)?;
        check_positive("epsilon", self.epsilon)?;
        check_positive("subsample voxel", self.subsample_voxel)?;
        if !(0..=4).contains(&self.objectness_threshold) {
            return Err(Error::invalid(format!(
                "objectness threshold {} outside 0..=4",
                self.objectness_threshold
            )));
        }
        Ok(())
    }
}

/// Splits point indices into `(core, boundary)`; points with id -1 are in neither.
pub fn split_core_boundary(objectness: &[i8], threshold: i8) -> (Vec<usize>, Vec<usize>) {
    let mut core = Vec::new();
    let mut boundary = Vec::new();
    for (i, &id) in objectness.iter().enumerate() {
        if id < 0 {
            continue;
        }
        if id >= threshold {
            core.push(i);
        } else {
            boundary.push(i);
        }
    }
    (core, boundary)
}

/// Pairwise influence weight between two points.
#[inline]
pub fn influence_weight(a: &Point3, b: &Point3, epsilon: f64) -> f64 {
    (-dist2(a, b) / (2.0 * epsilon * epsilon)).exp()
}

/// Size-normalized influence of a core cluster on `target`.
///
/// The kernel sum uses [`PairwiseSum`], so duplicating every cluster point in
/// place leaves the result bit-identical.
pub fn cluster_influence(cluster: &[Point3], target: &Point3, epsilon: f64) -> Result<f64> {
    if cluster.is_empty() {
        return Err(Error::Empty("core cluster"));
    }
    Ok(influence_sum(cluster, target, epsilon) / cluster.len() as f64)
}

#[inline]
fn influence_sum(cluster: &[Point3], target: &Point3, epsilon: f64) -> f64 {
    let mut sum = PairwiseSum::new();
    let mut chunks = cluster.chunks_exact(8);
    for chunk in &mut chunks {
        let mut w = [0.0; 8];
        for (w, p) in w.iter_mut().zip(chunk) {
            *w = influence_weight(p, target, epsilon);
        }
        sum.add_block(&w);
    }
    for p in chunks.remainder() {
        sum.add(influence_weight(p, target, epsilon));
    }
    sum.finish()
}

/// Boundary-by-cluster influence values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceTable {
    pub num_clusters: usize,
    pub values: Vec<f64>,
}

impl InfluenceTable {
    pub fn row(&self, boundary_pos: usize) -> &[f64] {
        &self.values[boundary_pos * self.num_clusters..(boundary_pos + 1) * self.num_clusters]
    }

    pub fn num_targets(&self) -> usize {
        self.values
            .len()
            .checked_div(self.num_clusters)
            .unwrap_or(0)
    }
}

fn gather(coords: &[Point3], idx: &[usize]) -> Vec<Point3> {
    idx.iter().map(|&i| coords[i]).collect()
}

/// Influence of every core cluster (index lists into `coords`) on every target point.
pub fn influence_table(
    core_clusters: &[Vec<usize>],
    targets: &[usize],
    coords: &[Point3],
    epsilon: f64,
) -> Result<InfluenceTable> {
    check_positive("epsilon", epsilon)?;
    if core_clusters.iter().any(Vec::is_empty) {
        return Err(Error::Empty("core cluster"));
    }
    let clusters: Vec<Vec<Point3>> = core_clusters.iter().map(|c| gather(coords, c)).collect();
    let rows = parallel::map_slice(targets, |&t| {
        clusters
            .iter()
            .map(|c| influence_sum(c, &coords[t], epsilon) / c.len() as f64)
            .collect::<Vec<f64>>()
    });
    Ok(InfluenceTable {
        num_clusters: clusters.len(),
        values: rows.into_iter().flatten().collect(),
    })
}

/// Index of the largest influence, lowest index on ties; `None` below [`INFLUENCE_FLOOR`].
pub fn strongest(influences: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &v) in influences.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.filter(|&(_, v)| v >= INFLUENCE_FLOOR).map(|(k, _)| k)
}

/// Assigns each boundary point to the position of its most influential core
/// cluster. Without any core cluster every entry is `None`.
pub fn absorb_boundary(
    core_clusters: &[Vec<usize>],
    boundary: &[usize],
    coords: &[Point3],
    epsilon: f64,
) -> Result<Vec<Option<usize>>> {
    if core_clusters.is_empty() {
        return Ok(vec![None; boundary.len()]);
    }
    let table = influence_table(core_clusters, boundary, coords, epsilon)?;
    let mut nearest_core: Option<(Vec<Point3>, Vec<usize>, KdTree)> = None;
    let mut out = Vec::with_capacity(boundary.len());
    for (pos, &b) in boundary.iter().enumerate() {
        let choice = match strongest(table.row(pos)) {
            Some(k) => k,
            None => {
                let (pts, owner, index) = match &mut nearest_core {
                    Some(v) => v,
                    slot @ None => {
                        let mut pts = Vec::new();
                        let mut owner = Vec::new();
                        for (k, c) in core_clusters.iter().enumerate() {
                            pts.extend(c.iter().map(|&i| coords[i]));
                            owner.extend(std::iter::repeat_n(k, c.len()));
                        }
                        let index = KdTree::build(&pts);
                        slot.insert((pts, owner, index))
                    }
                };
                let (i, _) = index.nearest(pts, &coords[b]).expect("core set non-empty");
                owner[i]
            }
        };
        out.push(Some(choice));
    }
    Ok(out)
}

/// Runs the full inference over every foreground category and returns
/// instance clusters with canonical ids.
///
/// `semantic` may be ground truth or pseudo labels. `signals` must carry
/// offsets and objectness.
pub fn aoia_infer(
    coords: &[Point3],
    semantic: &[i32],
    signals: &SignalSet,
    config: &CategoryConfig,
    params: &AoiaParams,
) -> Result<Clustering> {
    let n = coords.len();
    check_len("semantic labels", n, semantic.len())?;
    params.validate()?;
    signals.validate(n)?;
    let offsets = signals
        .offsets
        .as_deref()
        .ok_or(Error::Missing("offset signals"))?;
    let objectness = signals
        .objectness
        .as_deref()
        .ok_or(Error::Missing("objectness signals"))?;

    let mut categories: Vec<(i32, Vec<usize>)> = Vec::new();
    for &cat in &config.foreground {
        let members: Vec<usize> = (0..n).filter(|&i| semantic[i] == cat).collect();
        if !members.is_empty() {
            categories.push((cat, members));
        }
    }

    let per_category = parallel::map_slice(&categories, |(cat, members)| {
        infer_category(coords, offsets, objectness, members, params)
            .map(|groups| groups.into_iter().map(|g| (g, *cat)).collect::<Vec<_>>())
    });
    let mut groups = Vec::new();
    for g in per_category {
        groups.extend(g?);
    }
    Clustering::from_groups(n, groups)
}

/// Groups one category's points; returns clusters as global index lists.
fn infer_category(
    coords: &[Point3],
    offsets: &[Point3],
    objectness: &[i8],
    members: &[usize],
    params: &AoiaParams,
) -> Result<Vec<Vec<usize>>> {
    // positions into `members` of the points that take part in inference
    let working: Vec<usize> = if members.len() > params.subsample_trigger {
        voxel_downsample(&gather(coords, members), params.subsample_voxel)?
    } else {
        (0..members.len()).collect()
    };
    let subsampled = working.len() < members.len();

    let shifted: Vec<Point3> = members
        .iter()
        .map(|&i| {
            let (p, d) = (coords[i], offsets[i]);
            [p[0] + d[0], p[1] + d[1], p[2] + d[2]]
        })
        .collect();
    let original = gather(coords, members);
    let space = match params.influence_space {
        InfluenceSpace::Shifted => shifted.clone(),
        InfluenceSpace::Original => original.clone(),
    };

    let work_obj: Vec<i8> = working.iter().map(|&m| objectness[members[m]]).collect();
    let (core_pos, boundary_pos) = split_core_boundary(&work_obj, params.objectness_threshold);
    let core: Vec<usize> = core_pos.iter().map(|&w| working[w]).collect();
    let boundary: Vec<usize> = boundary_pos.iter().map(|&w| working[w]).collect();

    let mut grouping = gather(&shifted, &core);
    if params.birdview {
        grouping = project_birdview(&grouping);
    }
    // clusters hold positions into `members` until the end
    let mut clusters: Vec<Vec<usize>> =
        bfs_components(&grouping, params.core_radius, params.min_core_cluster)?
            .into_iter()
            .map(|c| c.into_iter().map(|l| core[l]).collect())
            .collect();

    let absorbed = absorb_boundary(&clusters, &boundary, &space, params.epsilon)?;
    for (&b, k) in boundary.iter().zip(absorbed) {
        if let Some(k) = k {
            clusters[k].push(b);
        }
    }
    if subsampled {
        transfer_to_members(
            &original,
            &space,
            &working,
            &mut clusters,
            params.subsample_voxel,
        )?;
    }
    Ok(clusters
        .into_iter()
        .map(|c| c.into_iter().map(|m| members[m]).collect())
        .collect())
}

/// Gives every point outside `working` the cluster of a representative.
///
/// Candidates are the representatives of the voxels within two steps of the
/// point's own voxel; the winner is the candidate closest to it in `space`
/// (lowest index on ties). Each voxel holds exactly one representative, and
/// the point's own representative is closer than two voxel widths, so with
/// `space` equal to the input coordinates this is the nearest representative
/// overall.
fn transfer_to_members(
    original: &[Point3],
    space: &[Point3],
    working: &[usize],
    clusters: &mut [Vec<usize>],
    voxel: f64,
) -> Result<()> {
    check_positive("subsample voxel", voxel)?;
    let mut label: Vec<Option<usize>> = vec![None; space.len()];
    for (k, c) in clusters.iter().enumerate() {
        for &m in c {
            label[m] = Some(k);
        }
    }
    let rep_of: FxHashMap<CellKey, usize> = working
        .iter()
        .map(|&w| (cell_key(&original[w], voxel), w))
        .collect();
    let mut is_rep = vec![false; space.len()];
    for &w in working {
        is_rep[w] = true;
    }
    let rest: Vec<usize> = (0..space.len()).filter(|&m| !is_rep[m]).collect();
    let chosen = parallel::map_slice(&rest, |&m| {
        let c = cell_key(&original[m], voxel);
        let mut best: Option<(f64, usize)> = None;
        for dx in -2..=2 {
            for dy in -2..=2 {
                for dz in -2..=2 {
                    if let Some(&w) = rep_of.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        let d = dist2(&space[m], &space[w]);
                        if best.is_none_or(|(bd, bw)| d < bd || (d == bd && w < bw)) {
                            best = Some((d, w));
                        }
                    }
                }
            }
        }
        best.and_then(|(_, w)| label[w])
    });
    for (&m, k) in rest.iter().zip(chosen) {
        if let Some(k) = k {
            clusters[k].push(m);
        }
    }
    Ok(())
}
