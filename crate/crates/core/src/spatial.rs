//! Uniform-grid spatial hash.
//!
//! A point's cell key is `floor(coord / cell_size)` per axis. Radius queries
//! scan the `(2k+1)^3` block of cells around the center, `k = ceil(r / cell_size)`,
//! which is the 27-cell neighborhood whenever `cell_size >= r`.
//! Nearest-neighbor lookups that may land far from the data go through [`KdTree`].

use rustc_hash::FxHashMap;

use crate::error::{check_positive, Result};
use crate::{dist2, Point3};

pub type CellKey = [i64; 3];

#[inline]
pub fn cell_key(p: &Point3, cell_size: f64) -> CellKey {
    [
        (p[0] / cell_size).floor() as i64,
        (p[1] / cell_size).floor() as i64,
        (p[2] / cell_size).floor() as i64,
    ]
}

/// Counters collected by [`GridIndex::radius_query_counted`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub cells_visited: usize,
    pub points_tested: usize,
}

/// Immutable uniform grid over a fixed coordinate slice.
///
/// The index does not own the coordinates; every query takes the same slice
/// the index was built from.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    cells: FxHashMap<CellKey, Vec<usize>>,
    len: usize,
    key_min: CellKey,
    key_max: CellKey,
}

impl GridIndex {
    pub fn build(coords: &[Point3], cell_size: f64) -> Result<Self> {
        check_positive("cell size", cell_size)?;
        let mut cells: FxHashMap<CellKey, Vec<usize>> = FxHashMap::default();
        let mut key_min = [i64::MAX; 3];
        let mut key_max = [i64::MIN; 3];
        for (i, p) in coords.iter().enumerate() {
            let key = cell_key(p, cell_size);
            for a in 0..3 {
                key_min[a] = key_min[a].min(key[a]);
                key_max[a] = key_max[a].max(key[a]);
            }
            cells.entry(key).or_default().push(i);
        }
        Ok(GridIndex {
            cell_size,
            cells,
            len: coords.len(),
            key_min,
            key_max,
        })
    }

    /// Picks a cell size of roughly two points per occupied cell from the bounding box.
    pub fn build_auto(coords: &[Point3]) -> Result<Self> {
        let mut extent: f64 = 0.0;
        if let Some(first) = coords.first() {
            let (mut lo, mut hi) = (*first, *first);
            for p in coords {
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        }
        let per_axis = (coords.len() as f64 / 2.0).cbrt().max(1.0);
        let cell = if extent > 0.0 { extent / per_axis } else { 1.0 };
        Self::build(coords, cell)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, key: &CellKey) -> Option<&[usize]> {
        self.cells.get(key).map(Vec::as_slice)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &[usize])> {
        self.cells.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Indices with `|coords[i] - center| < r`, ascending.
    pub fn radius_query(&self, coords: &[Point3], center: &Point3, r: f64) -> Vec<usize> {
        self.radius_query_counted(coords, center, r).0
    }

    pub fn radius_query_counted(
        &self,
        coords: &[Point3],
        center: &Point3,
        r: f64,
    ) -> (Vec<usize>, QueryStats) {
        let mut out = Vec::new();
        let stats = self.for_each_within(coords, center, r, |i| out.push(i));
        out.sort_unstable();
        (out, stats)
    }

    /// Calls `f` for every index within `r` of `center` (strict), in unspecified order.
    pub fn for_each_within(
        &self,
        coords: &[Point3],
        center: &Point3,
        r: f64,
        mut f: impl FnMut(usize),
    ) -> QueryStats {
        debug_assert_eq!(coords.len(), self.len);
        let mut stats = QueryStats::default();
        if r.is_nan() || r <= 0.0 || self.cells.is_empty() {
            return stats;
        }
        let r2 = r * r;
        let mut test = |i: usize, stats: &mut QueryStats| {
            stats.points_tested += 1;
            if dist2(&coords[i], center) < r2 {
                f(i);
            }
        };
        let reach = (r / self.cell_size).ceil();
        let block = (2.0 * reach + 1.0).powi(3);
        if !reach.is_finite() || block > self.cells.len() as f64 {
            // the neighborhood is larger than the occupied grid: scan occupied cells
            for pts in self.cells.values() {
                stats.cells_visited += 1;
                for &i in pts {
                    test(i, &mut stats);
                }
            }
            return stats;
        }
        let k = reach as i64;
        let c = cell_key(center, self.cell_size);
        for dx in -k..=k {
            for dy in -k..=k {
                for dz in -k..=k {
                    stats.cells_visited += 1;
                    if let Some(pts) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &i in pts {
                            test(i, &mut stats);
                        }
                    }
                }
            }
        }
        stats
    }

    /// Nearest indexed point to `q` as `(index, distance)`. Equal distances resolve to
    /// the lowest index.
    pub fn nearest(&self, coords: &[Point3], q: &Point3) -> Option<(usize, f64)> {
        if self.cells.is_empty() {
            return None;
        }
        let c = cell_key(q, self.cell_size);
        let mut best: Option<(f64, usize)> = None;
        let consider = |i: usize, best: &mut Option<(f64, usize)>| {
            let d = dist2(&coords[i], q);
            let better = match *best {
                None => true,
                Some((bd, bi)) => d < bd || (d == bd && i < bi),
            };
            if better {
                *best = Some((d, i));
            }
        };
        // rings of Chebyshev radius k around the query cell; the farthest ring
        // that can contain points bounds the search
        let max_ring = (0..3)
            .map(|a| {
                (c[a] - self.key_min[a])
                    .abs()
                    .max((self.key_max[a] - c[a]).abs())
            })
            .max()
            .unwrap_or(0);
        for k in 0..=max_ring {
            let shell = if k == 0 {
                1
            } else {
                (2 * k + 1).pow(3) - (2 * k - 1).pow(3)
            };
            if shell as usize > self.cells.len() {
                for pts in self.cells.values() {
                    for &i in pts {
                        consider(i, &mut best);
                    }
                }
                break;
            }
            for dx in -k..=k {
                for dy in -k..=k {
                    let on_face = dx.abs() == k || dy.abs() == k;
                    // off the x/y faces only the two z caps belong to the shell
                    let step = if on_face || k == 0 { 1 } else { 2 * k as usize };
                    for dz in (-k..=k).step_by(step) {
                        if let Some(pts) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                            for &i in pts {
                                consider(i, &mut best);
                            }
                        }
                    }
                }
            }
            if let Some((bd, _)) = best {
                // anything outside rings 0..=k is at least k cells away
                let reach = k as f64 * self.cell_size;
                if bd < reach * reach {
                    break;
                }
            }
        }
        best.map(|(d2, i)| (i, d2.sqrt()))
    }
}

const KD_LEAF: usize = 16;

#[derive(Debug, Clone)]
struct KdNode {
    start: usize,
    end: usize,
    lo: Point3,
    hi: Point3,
    // child node ids; `usize::MAX` marks a leaf
    left: usize,
    right: usize,
}

/// Static k-d tree for nearest-neighbor queries. Unlike the grid it stays
/// logarithmic for queries far from the indexed points.
#[derive(Debug, Clone)]
pub struct KdTree {
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

impl KdTree {
    pub fn build(coords: &[Point3]) -> Self {
        let mut tree = KdTree {
            order: (0..coords.len()).collect(),
            nodes: Vec::new(),
        };
        if !coords.is_empty() {
            tree.build_node(coords, 0, coords.len());
        }
        tree
    }

    fn build_node(&mut self, coords: &[Point3], start: usize, end: usize) -> usize {
        let slice = &mut self.order[start..end];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in slice.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(coords[i][a]);
                hi[a] = hi[a].max(coords[i][a]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(KdNode {
            start,
            end,
            lo,
            hi,
            left: usize::MAX,
            right: usize::MAX,
        });
        if end - start <= KD_LEAF {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| coords[a][axis].total_cmp(&coords[b][axis]));
        let left = self.build_node(coords, start, start + mid);
        let right = self.build_node(coords, start + mid, end);
        let node = &mut self.nodes[id];
        node.left = left;
        node.right = right;
        id
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Nearest indexed point to `q` as `(index, distance)`; equal distances
    /// resolve to the lowest index. `coords` must be the slice the tree was built from.
    pub fn nearest(&self, coords: &[Point3], q: &Point3) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let box_dist2 = |n: &KdNode| {
            let mut d = 0.0;
            for ((lo, hi), x) in n.lo.iter().zip(&n.hi).zip(q) {
                let e = (lo - x).max(x - hi).max(0.0);
                d += e * e;
            }
            d
        };
        let mut best = (f64::INFINITY, usize::MAX);
        let mut stack = vec![(0usize, box_dist2(&self.nodes[0]))];
        while let Some((id, bound)) = stack.pop() {
            // `<=` keeps equal-distance candidates reachable for the index tie-break
            if bound > best.0 {
                continue;
            }
            let node = &self.nodes[id];
            if node.left == usize::MAX {
                for &i in &self.order[node.start..node.end] {
                    let d = dist2(&coords[i], q);
                    if d < best.0 || (d == best.0 && i < best.1) {
                        best = (d, i);
                    }
                }
                continue;
            }
            let (l, r) = (&self.nodes[node.left], &self.nodes[node.right]);
            let (dl, dr) = (box_dist2(l), box_dist2(r));
            // nearer child on top of the stack
            if dl <= dr {
                stack.push((node.right, dr));
                stack.push((node.left, dl));
            } else {
                stack.push((node.left, dl));
                stack.push((node.right, dr));
            }
        }
        Some((best.1, best.0.sqrt()))
    }
}

/// Strict radius query against a freshly built index with `cell_size = r`.
pub fn radius_query(coords: &[Point3], center: &Point3, r: f64) -> Result<Vec<usize>> {
    let index = GridIndex::build(coords, r)?;
    Ok(index.radius_query(coords, center, r))
}

/// One representative per occupied voxel: the lowest original index. Sorted ascending.
pub fn voxel_downsample(coords: &[Point3], voxel: f64) -> Result<Vec<usize>> {
    check_positive("voxel size", voxel)?;
    let mut first: FxHashMap<CellKey, usize> =
        FxHashMap::with_capacity_and_hasher(coords.len() / 4 + 1, Default::default());
    for (i, p) in coords.iter().enumerate() {
        first.entry(cell_key(p, voxel)).or_insert(i);
    }
    let mut reps: Vec<usize> = first.into_values().collect();
    reps.sort_unstable();
    Ok(reps)
}

/// Drops the vertical component: `(x, y, z) -> (x, y, 0)`.
pub fn project_birdview(coords: &[Point3]) -> Vec<Point3> {
    coords.iter().map(|p| [p[0], p[1], 0.0]).collect()
}
