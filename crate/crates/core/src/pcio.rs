//! Data model and text file formats.
//!
//! Four formats, all UTF-8 with LF line endings:
//!
//! * cloud: `pcseg v1 <N> <cols>` with `cols` one of `xyz`, `xyzs`, `xyzsi`,
//!   followed by `N` rows of whitespace-separated fields;
//! * signals: `sig v1 <N> <cols>` where `cols` is a comma-separated subset of
//!   `off`, `obj`, `sem:<C>` (or `none`); each row carries the fields in the
//!   declared order (3 reals for `off`, one integer for `obj`, C reals for `sem`);
//! * supervoxels: `svx v1 <N>` followed by one non-negative id per line;
//! * category config: `key=value` lines (`num_categories`, `foreground`,
//!   optional `name.<id>`), `#` starts a comment.
//!
//! Reals are written with 9 significant digits in their shortest exact form,
//! so re-serializing a parsed file reproduces it byte for byte.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::Point3;

/// Sentinel for "unlabeled", "ungrouped" and "background" across every label array.
pub const IGNORE: i32 = -1;

/// Per-point coordinates plus optional semantic and instance labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCloud {
    coords: Vec<Point3>,
    semantic: Option<Vec<i32>>,
    instance: Option<Vec<i32>>,
}

impl LabeledCloud {
    pub fn new(
        coords: Vec<Point3>,
        semantic: Option<Vec<i32>>,
        instance: Option<Vec<i32>>,
    ) -> Result<Self> {
        let n = coords.len();
        if let Some(i) = coords.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid(format!(
                "non-finite coordinate at point {i}"
            )));
        }
        for (what, labels) in [
            ("semantic labels", &semantic),
            ("instance labels", &instance),
        ] {
            if let Some(labels) = labels {
                check_len(what, n, labels.len())?;
                if let Some(bad) = labels.iter().find(|&&l| l < IGNORE) {
                    return Err(Error::invalid(format!("{what} contain invalid id {bad}")));
                }
            }
        }
        Ok(LabeledCloud {
            coords,
            semantic,
            instance,
        })
    }

    pub fn from_coords(coords: Vec<Point3>) -> Result<Self> {
        Self::new(coords, None, None)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Point3] {
        &self.coords
    }

    pub fn semantic(&self) -> Option<&[i32]> {
        self.semantic.as_deref()
    }

    pub fn instance(&self) -> Option<&[i32]> {
        self.instance.as_deref()
    }

    /// Replaces the instance column, keeping coordinates and semantics.
    pub fn with_instance(&self, instance: Vec<i32>) -> Result<Self> {
        Self::new(self.coords.clone(), self.semantic.clone(), Some(instance))
    }
}

/// Dense row-major N×C matrix of real scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::invalid("score matrix needs at least one column"));
        }
        check_len("score matrix data", rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("score matrix contains a non-finite value"));
        }
        Ok(ScoreMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("score row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Stand-ins for network outputs: per-point offsets, objectness ids, semantic scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalSet {
    pub offsets: Option<Vec<Point3>>,
    /// Ids in `0..=4`, or -1 for background.
    pub objectness: Option<Vec<i8>>,
    pub sem_scores: Option<ScoreMatrix>,
}

impl SignalSet {
    /// Number of points the present fields describe, or `None` when every field is absent.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> Option<usize> {
        self.offsets
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.objectness.as_ref().map(Vec::len))
            .or_else(|| self.sem_scores.as_ref().map(ScoreMatrix::rows))
    }

    /// Checks lengths against `n` and the objectness id range.
    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(off) = &self.offsets {
            check_len("offsets", n, off.len())?;
            if off.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::invalid("offsets contain a non-finite value"));
            }
        }
        if let Some(obj) = &self.objectness {
            check_len("objectness", n, obj.len())?;
            if let Some(bad) = obj.iter().find(|&&o| !(-1..=4).contains(&o)) {
                return Err(Error::invalid(format!(
                    "objectness id {bad} outside -1..=4"
                )));
            }
        }
        if let Some(sem) = &self.sem_scores {
            check_len("semantic score rows", n, sem.rows())?;
        }
        Ok(())
    }
}

/// One instance: its id, sorted member indices, category and a ranking confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: i32,
    pub points: Vec<usize>,
    pub category: i32,
    pub score: f64,
}

/// A partition of (a subset of) N points into instance clusters.
///
/// `assignment[i]` is the id of the cluster holding point `i`, or -1.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    assignment: Vec<i32>,
    clusters: Vec<Cluster>,
}

impl Clustering {
    pub fn empty(n: usize) -> Self {
        Clustering {
            assignment: vec![IGNORE; n],
            clusters: Vec::new(),
        }
    }

    /// Builds a clustering with canonical ids: groups are numbered 0.. in
    /// order of their lowest member index. Empty groups are dropped.
    pub fn from_groups(n: usize, groups: Vec<(Vec<usize>, i32)>) -> Result<Self> {
        let mut groups: Vec<(Vec<usize>, i32)> = groups
            .into_iter()
            .filter(|(pts, _)| !pts.is_empty())
            .map(|(mut pts, cat)| {
                pts.sort_unstable();
                (pts, cat)
            })
            .collect();
        groups.sort_by_key(|(pts, _)| pts[0]);
        let mut assignment = vec![IGNORE; n];
        let mut clusters = Vec::with_capacity(groups.len());
        for (id, (points, category)) in groups.into_iter().enumerate() {
            let id = id as i32;
            for &p in &points {
                if p >= n {
                    return Err(Error::invalid(format!(
                        "cluster index {p} out of range {n}"
                    )));
                }
                if assignment[p] != IGNORE {
                    return Err(Error::invalid(format!("point {p} appears in two clusters")));
                }
                assignment[p] = id;
            }
            clusters.push(Cluster {
                id,
                points,
                category,
                score: 1.0,
            });
        }
        Ok(Clustering {
            assignment,
            clusters,
        })
    }

    /// Groups points by instance id. A cluster's category is the most frequent
    /// semantic id among its members (lowest id on ties), or -1 without semantics.
    pub fn from_labels(instance: &[i32], semantic: Option<&[i32]>) -> Result<Self> {
        if let Some(sem) = semantic {
            check_len("semantic labels", instance.len(), sem.len())?;
        }
        let mut by_id: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (i, &id) in instance.iter().enumerate() {
            if id >= 0 {
                by_id.entry(id).or_default().push(i);
            }
        }
        let groups = by_id
            .into_values()
            .map(|pts| {
                let cat = semantic.map_or(IGNORE, |sem| majority(pts.iter().map(|&p| sem[p])));
                (pts, cat)
            })
            .collect();
        Self::from_groups(instance.len(), groups)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn assignment(&self) -> &[i32] {
        &self.assignment
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Keeps clusters for which `keep` is true; dropped points become -1. Ids are preserved.
    pub fn retain(&self, mut keep: impl FnMut(&Cluster) -> bool) -> Self {
        let mut out = self.clone();
        out.clusters.retain(|c| keep(c));
        out.assignment.fill(IGNORE);
        for c in &out.clusters {
            for &p in &c.points {
                out.assignment[p] = c.id;
            }
        }
        out
    }

    /// Renumbers ids 0.. by lowest member index.
    pub fn canonical(&self) -> Self {
        let groups = self
            .clusters
            .iter()
            .map(|c| (c.points.clone(), c.category))
            .collect();
        Self::from_groups(self.len(), groups).expect("clusters of a valid clustering are disjoint")
    }

    pub fn set_scores(&mut self, scores: &[f64]) -> Result<()> {
        check_len("cluster scores", self.clusters.len(), scores.len())?;
        for (c, &s) in self.clusters.iter_mut().zip(scores) {
            c.score = s;
        }
        Ok(())
    }
}

fn majority(values: impl Iterator<Item = i32>) -> i32 {
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    // max_by_key returns the last maximum; iterate in reverse so the lowest id wins
    counts
        .into_iter()
        .rev()
        .max_by_key(|&(_, c)| c)
        .map_or(IGNORE, |(v, _)| v)
}

/// Category count, foreground set and optional display names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoryConfig {
    pub num_categories: u32,
    pub foreground: BTreeSet<i32>,
    pub names: BTreeMap<i32, String>,
}

impl CategoryConfig {
    pub fn new(num_categories: u32, foreground: impl IntoIterator<Item = i32>) -> Result<Self> {
        let cfg = CategoryConfig {
            num_categories,
            foreground: foreground.into_iter().collect(),
            names: BTreeMap::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every category in `0..num_categories` is foreground.
    pub fn all_foreground(num_categories: u32) -> Self {
        CategoryConfig {
            num_categories,
            foreground: (0..num_categories as i32).collect(),
            names: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self
            .foreground
            .iter()
            .find(|&&c| c < 0 || c >= self.num_categories as i32)
        {
            return Err(Error::invalid(format!(
                "foreground id {bad} outside [0, {})",
                self.num_categories
            )));
        }
        Ok(())
    }

    pub fn is_foreground(&self, category: i32) -> bool {
        self.foreground.contains(&category)
    }

    pub fn name(&self, category: i32) -> String {
        self.names
            .get(&category)
            .cloned()
            .unwrap_or_else(|| format!("class{category}"))
    }
}

// ---------------------------------------------------------------------------
// number formatting

/// Formats a real with 9 significant digits, in the shortest form that parses back exactly.
pub fn format_real(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".to_string();
    }
    let mag = rounded.abs();
    if (1e-5..1e16).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn parse_real(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid number '{tok}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value '{tok}'")));
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid integer '{tok}'")))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Splits the body into numbered data lines, checking the count against the header.
fn body_rows(text: &str, n: usize) -> Result<Vec<(usize, Vec<&str>)>> {
    let mut rows = Vec::with_capacity(n);
    let mut lines = text.split('\n').enumerate().skip(1);
    for (idx, line) in lines.by_ref() {
        let lineno = idx + 1;
        if rows.len() == n {
            if !line.trim().is_empty() {
                return Err(Error::parse(
                    lineno,
                    format!("more rows than the declared {n}"),
                ));
            }
            continue;
        }
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        rows.push((lineno, line.split_whitespace().collect()));
    }
    if rows.len() < n {
        return Err(Error::UnexpectedEof(format!(
            "header declares {n} rows, found {}",
            rows.len()
        )));
    }
    Ok(rows)
}

fn header<'a>(text: &'a str, magic: &str) -> Result<Vec<&'a str>> {
    let first = text.split('\n').next().unwrap_or("");
    let toks: Vec<&str> = first.split_whitespace().collect();
    if toks.len() < 3 || toks[0] != magic || toks[1] != "v1" {
        return Err(Error::parse(
            1,
            format!("expected '{magic} v1 <N> ...' header"),
        ));
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// clouds

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CloudCols {
    Xyz,
    Xyzs,
    Xyzsi,
}

impl CloudCols {
    fn width(self) -> usize {
        match self {
            CloudCols::Xyz => 3,
            CloudCols::Xyzs => 4,
            CloudCols::Xyzsi => 5,
        }
    }

    fn name(self) -> &'static str {
        match self {
            CloudCols::Xyz => "xyz",
            CloudCols::Xyzs => "xyzs",
            CloudCols::Xyzsi => "xyzsi",
        }
    }
}

pub fn parse_cloud(text: &str) -> Result<LabeledCloud> {
    let toks = header(text, "pcseg")?;
    if toks.len() != 4 {
        return Err(Error::parse(1, "expected 'pcseg v1 <N> <cols>'"));
    }
    let n: usize = parse_int(toks[2], 1)?;
    let cols = match toks[3] {
        "xyz" => CloudCols::Xyz,
        "xyzs" => CloudCols::Xyzs,
        "xyzsi" => CloudCols::Xyzsi,
        other => return Err(Error::parse(1, format!("unknown column set '{other}'"))),
    };
    let mut coords = Vec::with_capacity(n);
    let mut semantic = (cols != CloudCols::Xyz).then(|| Vec::with_capacity(n));
    let mut instance = (cols == CloudCols::Xyzsi).then(|| Vec::with_capacity(n));
    for (line, fields) in body_rows(text, n)? {
        if fields.len() != cols.width() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", cols.width(), fields.len()),
            ));
        }
        coords.push([
            parse_real(fields[0], line)?,
            parse_real(fields[1], line)?,
            parse_real(fields[2], line)?,
        ]);
        for (col, labels) in [(3, &mut semantic), (4, &mut instance)] {
            if let Some(labels) = labels.as_mut() {
                let v: i32 = parse_int(fields[col], line)?;
                if v < IGNORE {
                    return Err(Error::parse(line, format!("label {v} below -1")));
                }
                labels.push(v);
            }
        }
    }
    LabeledCloud::new(coords, semantic, instance)
}

/// Serializes a cloud. Instance ids are compacted to 0.. in order of first appearance.
pub fn format_cloud(cloud: &LabeledCloud) -> Result<String> {
    let cols = match (cloud.semantic(), cloud.instance()) {
        (None, None) => CloudCols::Xyz,
        (Some(_), None) => CloudCols::Xyzs,
        (Some(_), Some(_)) => CloudCols::Xyzsi,
        (None, Some(_)) => {
            return Err(Error::invalid(
                "instance labels cannot be written without semantic labels",
            ))
        }
    };
    let instance = cloud.instance().map(compact_ids);
    let mut out = String::with_capacity(32 + cloud.len() * 40);
    let _ = writeln!(out, "pcseg v1 {} {}", cloud.len(), cols.name());
    for (i, p) in cloud.coords().iter().enumerate() {
        let _ = write!(
            out,
            "{} {} {}",
            format_real(p[0]),
            format_real(p[1]),
            format_real(p[2])
        );
        if let Some(sem) = cloud.semantic() {
            let _ = write!(out, " {}", sem[i]);
        }
        if let Some(inst) = &instance {
            let _ = write!(out, " {}", inst[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

fn compact_ids(ids: &[i32]) -> Vec<i32> {
    let mut map: HashMap<i32, i32> = HashMap::new();
    ids.iter()
        .map(|&id| {
            if id < 0 {
                IGNORE
            } else {
                let next = map.len() as i32;
                *map.entry(id).or_insert(next)
            }
        })
        .collect()
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<LabeledCloud> {
    parse_cloud(&read_text(path.as_ref())?)
}

pub fn write_cloud(cloud: &LabeledCloud, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_cloud(cloud)?)
}

/// Writes a clustering as an `xyzsi` cloud: the cloud's coordinates and
/// semantics with the cluster assignment as the instance column.
pub fn write_clustering(
    cloud: &LabeledCloud,
    clustering: &Clustering,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_text(path.as_ref(), &format_clustering(cloud, clustering)?)
}

pub fn format_clustering(cloud: &LabeledCloud, clustering: &Clustering) -> Result<String> {
    check_len("clustering", cloud.len(), clustering.len())?;
    let semantic = match cloud.semantic() {
        Some(s) => s.to_vec(),
        None => {
            let mut sem = vec![IGNORE; cloud.len()];
            for c in clustering.clusters() {
                for &p in &c.points {
                    sem[p] = c.category;
                }
            }
            sem
        }
    };
    let labeled = LabeledCloud::new(
        cloud.coords().to_vec(),
        Some(semantic),
        Some(clustering.assignment().to_vec()),
    )?;
    format_cloud(&labeled)
}

/// Reads an `xyzsi` cloud as a clustering (instance column = assignment).
pub fn read_clustering(path: impl AsRef<Path>) -> Result<(LabeledCloud, Clustering)> {
    let cloud = read_cloud(path)?;
    let inst = cloud
        .instance()
        .ok_or(Error::Missing("instance column in clustering file"))?;
    let clustering = Clustering::from_labels(inst, cloud.semantic())?;
    Ok((cloud, clustering))
}

// ---------------------------------------------------------------------------
// signals

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SigCol {
    Off,
    Obj,
    Sem(usize),
}

pub fn parse_signals(text: &str) -> Result<SignalSet> {
    let toks = header(text, "sig")?;
    if toks.len() != 4 {
        return Err(Error::parse(1, "expected 'sig v1 <N> <cols>'"));
    }
    let n: usize = parse_int(toks[2], 1)?;
    let mut cols = Vec::new();
    if toks[3] != "none" {
        for tok in toks[3].split(',') {
            let col = match tok {
                "off" => SigCol::Off,
                "obj" => SigCol::Obj,
                t => match t.strip_prefix("sem:") {
                    Some(c) => {
                        let c: usize = parse_int(c, 1)?;
                        if c == 0 {
                            return Err(Error::parse(1, "sem column needs C >= 1"));
                        }
                        SigCol::Sem(c)
                    }
                    None => return Err(Error::parse(1, format!("unknown signal column '{t}'"))),
                },
            };
            let dup = cols
                .iter()
                .any(|c: &SigCol| std::mem::discriminant(c) == std::mem::discriminant(&col));
            if dup {
                return Err(Error::parse(1, format!("duplicate signal column '{tok}'")));
            }
            cols.push(col);
        }
    }
    let width: usize = cols
        .iter()
        .map(|c| match c {
            SigCol::Off => 3,
            SigCol::Obj => 1,
            SigCol::Sem(c) => *c,
        })
        .sum();

    let mut offsets = cols.contains(&SigCol::Off).then(|| Vec::with_capacity(n));
    let mut objectness = cols.contains(&SigCol::Obj).then(|| Vec::with_capacity(n));
    let sem_cols = cols.iter().find_map(|c| match c {
        SigCol::Sem(c) => Some(*c),
        _ => None,
    });
    let mut sem = sem_cols.map(|c| Vec::with_capacity(n * c));

    for (line, fields) in body_rows(text, n)? {
        if fields.len() != width {
            return Err(Error::parse(
                line,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        let mut at = 0;
        for col in &cols {
            match col {
                SigCol::Off => {
                    let v = [
                        parse_real(fields[at], line)?,
                        parse_real(fields[at + 1], line)?,
                        parse_real(fields[at + 2], line)?,
                    ];
                    offsets.as_mut().unwrap().push(v);
                    at += 3;
                }
                SigCol::Obj => {
                    let v: i8 = parse_int(fields[at], line)?;
                    if !(-1..=4).contains(&v) {
                        return Err(Error::parse(
                            line,
                            format!("objectness id {v} outside -1..=4"),
                        ));
                    }
                    objectness.as_mut().unwrap().push(v);
                    at += 1;
                }
                SigCol::Sem(c) => {
                    let dst = sem.as_mut().unwrap();
                    for f in &fields[at..at + c] {
                        dst.push(parse_real(f, line)?);
                    }
                    at += c;
                }
            }
        }
    }
    let sem_scores = match (sem, sem_cols) {
        (Some(data), Some(c)) => Some(ScoreMatrix::new(n, c, data)?),
        _ => None,
    };
    Ok(SignalSet {
        offsets,
        objectness,
        sem_scores,
    })
}

/// Serializes signals with columns in the order `off`, `obj`, `sem:<C>`.
pub fn format_signals(signals: &SignalSet) -> Result<String> {
    let n = signals.len().unwrap_or(0);
    signals.validate(n)?;
    let mut cols = Vec::new();
    if signals.offsets.is_some() {
        cols.push("off".to_string());
    }
    if signals.objectness.is_some() {
        cols.push("obj".to_string());
    }
    if let Some(s) = &signals.sem_scores {
        cols.push(format!("sem:{}", s.cols()));
    }
    let cols = if cols.is_empty() {
        "none".to_string()
    } else {
        cols.join(",")
    };
    let mut out = String::with_capacity(32 + n * 40);
    let _ = writeln!(out, "sig v1 {n} {cols}");
    for i in 0..n {
        let mut fields: Vec<String> = Vec::new();
        if let Some(off) = &signals.offsets {
            fields.extend(off[i].iter().map(|&v| format_real(v)));
        }
        if let Some(obj) = &signals.objectness {
            fields.push(obj[i].to_string());
        }
        if let Some(sem) = &signals.sem_scores {
            fields.extend(sem.row(i).iter().map(|&v| format_real(v)));
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn read_signals(path: impl AsRef<Path>) -> Result<SignalSet> {
    parse_signals(&read_text(path.as_ref())?)
}

pub fn write_signals(signals: &SignalSet, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_signals(signals)?)
}

// ---------------------------------------------------------------------------
// supervoxels

pub fn parse_supervoxels(text: &str) -> Result<Vec<u32>> {
    let toks = header(text, "svx")?;
    if toks.len() != 3 {
        return Err(Error::parse(1, "expected 'svx v1 <N>'"));
    }
    let n: usize = parse_int(toks[2], 1)?;
    body_rows(text, n)?
        .into_iter()
        .map(|(line, fields)| {
            if fields.len() != 1 {
                return Err(Error::parse(line, "expected one supervoxel id"));
            }
            parse_int(fields[0], line)
        })
        .collect()
}

pub fn format_supervoxels(ids: &[u32]) -> String {
    let mut out = format!("svx v1 {}\n", ids.len());
    for id in ids {
        let _ = writeln!(out, "{id}");
    }
    out
}

pub fn read_supervoxels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    parse_supervoxels(&read_text(path.as_ref())?)
}

pub fn write_supervoxels(ids: &[u32], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_supervoxels(ids))
}

// ---------------------------------------------------------------------------
// config

pub fn parse_config(text: &str) -> Result<CategoryConfig> {
    let mut num_categories: Option<u32> = None;
    let mut foreground: Option<BTreeSet<i32>> = None;
    let mut names = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(line, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "num_categories" => num_categories = Some(parse_int(value, line)?),
            "foreground" => {
                let ids = value
                    .split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| parse_int(t, line))
                    .collect::<Result<BTreeSet<i32>>>()?;
                foreground = Some(ids);
            }
            k => match k.strip_prefix("name.") {
                Some(id) => {
                    names.insert(parse_int(id, line)?, value.to_string());
                }
                None => return Err(Error::parse(line, format!("unknown key '{k}'"))),
            },
        }
    }
    let cfg = CategoryConfig {
        num_categories: num_categories.ok_or(Error::Missing("num_categories in config"))?,
        foreground: foreground.ok_or(Error::Missing("foreground in config"))?,
        names,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn format_config(cfg: &CategoryConfig) -> String {
    let fg: Vec<String> = cfg.foreground.iter().map(i32::to_string).collect();
    let mut out = format!(
        "num_categories={}\nforeground={}\n",
        cfg.num_categories,
        fg.join(",")
    );
    for (id, name) in &cfg.names {
        let _ = writeln!(out, "name.{id}={name}");
    }
    out
}

pub fn read_config(path: impl AsRef<Path>) -> Result<CategoryConfig> {
    parse_config(&read_text(path.as_ref())?)
}
