//! Semantic-consistent BFS clustering and size-band sample selection.
//!
//! Two points are connected when they share a foreground semantic id and lie
//! strictly closer than the radius. Clusters are the maximal connected sets
//! with more than `min_points` members; everything else stays at -1.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rustc_hash::FxHashMap;

use crate::error::{check_len, check_positive, Error, Result};
use crate::parallel;
use crate::pcio::Clustering;
use crate::spatial::{cell_key, CellKey};
use crate::{dist2, Point3};

/// Largest cloud [`brute_force_components`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfsParams {
    /// Grouping radius in meters; neighbors must be strictly closer.
    pub radius: f64,
    /// A component is kept only if it has more than this many points.
    pub min_points: usize,
}

impl Default for BfsParams {
    fn default() -> Self {
        BfsParams {
            radius: 0.05,
            min_points: 50,
        }
    }
}

impl BfsParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("clustering radius", self.radius)
    }
}

/// Rank-fraction band `[lo, hi)` of clusters kept per category after sorting by size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionBand {
    pub lo: f64,
    pub hi: f64,
}

impl Default for SelectionBand {
    fn default() -> Self {
        SelectionBand { lo: 0.3, hi: 0.7 }
    }
}

impl SelectionBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::invalid(format!(
                "selection band [{lo}, {hi}) must satisfy 0 <= lo < hi <= 1"
            )));
        }
        Ok(SelectionBand { lo, hi })
    }

    pub fn contains_rank(&self, rank: usize, count: usize) -> bool {
        let f = rank as f64 / count as f64;
        self.lo <= f && f < self.hi
    }
}

/// Groups foreground point indices by semantic id.
fn foreground_by_category(
    semantic: &[i32],
    foreground: &BTreeSet<i32>,
) -> BTreeMap<i32, Vec<usize>> {
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, s) in semantic.iter().enumerate() {
        if foreground.contains(s) {
            groups.entry(*s).or_default().push(i);
        }
    }
    groups
}

/// BFS over a single label class. Returns components with more than
/// `min_points` members as local index lists, each ascending, ordered by first member.
///
/// Points leave their grid cell once reached, so a dense pile of coincident
/// points is expanded in linear rather than quadratic time.
pub(crate) fn bfs_components(
    coords: &[Point3],
    radius: f64,
    min_points: usize,
) -> Result<Vec<Vec<usize>>> {
    check_positive("clustering radius", radius)?;
    let mut cells: FxHashMap<CellKey, Vec<usize>> = FxHashMap::default();
    for (i, p) in coords.iter().enumerate() {
        cells.entry(cell_key(p, radius)).or_default().push(i);
    }
    let r2 = radius * radius;
    let mut visited = vec![false; coords.len()];
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    for seed in 0..coords.len() {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        let mut component = vec![seed];
        while let Some(k) = queue.pop_front() {
            let center = coords[k];
            let c = cell_key(&center, radius);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(pts) = cells.get_mut(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                            continue;
                        };
                        pts.retain(|&j| {
                            if visited[j] {
                                return false;
                            }
                            if dist2(&coords[j], &center) < r2 {
                                visited[j] = true;
                                queue.push_back(j);
                                component.push(j);
                                return false;
                            }
                            true
                        });
                    }
                }
            }
        }
        if component.len() > min_points {
            component.sort_unstable();
            out.push(component);
        }
    }
    Ok(out)
}

/// Breadth-first clustering of foreground points. Background points (semantic
/// id outside `foreground`) are never grouped. Cluster ids follow the lowest
/// member index.
pub fn bfs_cluster(
    coords: &[Point3],
    semantic: &[i32],
    foreground: &BTreeSet<i32>,
    params: &BfsParams,
) -> Result<Clustering> {
    check_len("semantic labels", coords.len(), semantic.len())?;
    params.validate()?;
    let categories: Vec<(i32, Vec<usize>)> = foreground_by_category(semantic, foreground)
        .into_iter()
        .collect();

    let per_category = parallel::map_slice(&categories, |(category, members)| {
        let local: Vec<Point3> = members.iter().map(|&i| coords[i]).collect();
        bfs_components(&local, params.radius, params.min_points).map(|comps| {
            comps
                .into_iter()
                .map(|c| (c.into_iter().map(|l| members[l]).collect(), *category))
                .collect::<Vec<_>>()
        })
    });
    let mut groups = Vec::new();
    for g in per_category {
        groups.extend(g?);
    }
    Clustering::from_groups(coords.len(), groups)
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Reference implementation of [`bfs_cluster`]: unions every same-class pair
/// closer than the radius, O(N²). Refuses clouds above [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_components(
    coords: &[Point3],
    semantic: &[i32],
    foreground: &BTreeSet<i32>,
    params: &BfsParams,
) -> Result<Clustering> {
    check_len("semantic labels", coords.len(), semantic.len())?;
    params.validate()?;
    let n = coords.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            len: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let r2 = params.radius * params.radius;
    let fg: Vec<bool> = semantic.iter().map(|s| foreground.contains(s)).collect();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        if !fg[i] {
            continue;
        }
        for j in i + 1..n {
            if fg[j] && semantic[i] == semantic[j] && dist2(&coords[i], &coords[j]) < r2 {
                uf.union(i, j);
            }
        }
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in (0..n).filter(|&i| fg[i]) {
        let root = uf.find(i);
        members.entry(root).or_default().push(i);
    }
    let groups = members
        .into_values()
        .filter(|m| m.len() > params.min_points)
        .map(|m| {
            let cat = semantic[m[0]];
            (m, cat)
        })
        .collect();
    Clustering::from_groups(n, groups)
}

/// Keeps, per category, the clusters whose size rank falls inside `band`.
///
/// Clusters are sorted ascending by point count (ties by id); the cluster at
/// rank `k` of `K` survives when `lo <= k/K < hi`. Ids of survivors are kept.
pub fn select_optimal_samples(clustering: &Clustering, band: &SelectionBand) -> Clustering {
    let mut by_category: BTreeMap<i32, Vec<(usize, i32)>> = BTreeMap::new();
    for c in clustering.clusters() {
        by_category
            .entry(c.category)
            .or_default()
            .push((c.points.len(), c.id));
    }
    let mut keep = BTreeSet::new();
    for (_, mut ranked) in by_category {
        ranked.sort_unstable();
        let count = ranked.len();
        for (rank, &(_, id)) in ranked.iter().enumerate() {
            if band.contains_rank(rank, count) {
                keep.insert(id);
            }
        }
    }
    clustering.retain(|c| keep.contains(&c.id))
}
