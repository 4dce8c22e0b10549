//! Instance segmentation metrics.
//!
//! Predictions are ranked by confidence (descending; ties by size descending,
//! then id) and greedily matched, one to one, to the unmatched ground-truth
//! instance of the same category with the highest IoU at or above the
//! threshold. AP is the area under the precision-recall curve with all-point
//! interpolation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::error::{check_len, Result};
use crate::parallel;
use crate::pcio::{CategoryConfig, Cluster, Clustering};

/// IoU thresholds 0.50, 0.55, ..., 0.95 averaged into mAP.
pub fn map_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// `iou[p][g]` between prediction `p` and ground truth `g` (cluster positions).
pub fn iou_matrix(pred: &Clustering, gt: &Clustering) -> Result<Vec<Vec<f64>>> {
    check_len("prediction points", gt.len(), pred.len())?;
    let gt_pos: HashMap<i32, usize> = gt
        .clusters()
        .iter()
        .enumerate()
        .map(|(k, c)| (c.id, k))
        .collect();
    let gt_assign = gt.assignment();
    let rows = parallel::map_slice(pred.clusters(), |p| {
        let mut inter = vec![0usize; gt.num_clusters()];
        for &i in &p.points {
            if let Some(&g) = gt_pos.get(&gt_assign[i]) {
                inter[g] += 1;
            }
        }
        gt.clusters()
            .iter()
            .zip(inter)
            .map(|(g, n)| {
                let union = p.points.len() + g.points.len() - n;
                if union == 0 {
                    0.0
                } else {
                    n as f64 / union as f64
                }
            })
            .collect::<Vec<f64>>()
    });
    Ok(rows)
}

fn ranking(clusters: &[Cluster], positions: &mut [usize]) {
    positions.sort_by(|&a, &b| {
        let (ca, cb) = (&clusters[a], &clusters[b]);
        cb.score
            .total_cmp(&ca.score)
            .then(cb.points.len().cmp(&ca.points.len()))
            .then(ca.id.cmp(&cb.id))
    });
}

/// Outcome of greedy matching within one category at one threshold.
#[derive(Debug, Clone, PartialEq)]
struct Matching {
    /// True-positive flag per ranked prediction.
    hits: Vec<bool>,
    num_gt: usize,
}

fn match_category(
    pred: &Clustering,
    gt: &Clustering,
    iou: &[Vec<f64>],
    category: i32,
    threshold: f64,
) -> Matching {
    let mut preds: Vec<usize> = (0..pred.num_clusters())
        .filter(|&k| pred.clusters()[k].category == category)
        .collect();
    ranking(pred.clusters(), &mut preds);
    let gts: Vec<usize> = (0..gt.num_clusters())
        .filter(|&k| gt.clusters()[k].category == category)
        .collect();
    let mut taken = vec![false; gts.len()];
    let hits = preds
        .iter()
        .map(|&p| {
            let mut best: Option<(usize, f64)> = None;
            for (slot, &g) in gts.iter().enumerate() {
                let v = iou[p][g];
                if !taken[slot] && v >= threshold && best.is_none_or(|(_, b)| v > b) {
                    best = Some((slot, v));
                }
            }
            match best {
                Some((slot, _)) => {
                    taken[slot] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    Matching {
        hits,
        num_gt: gts.len(),
    }
}

fn area_under_pr(m: &Matching) -> f64 {
    if m.num_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(m.hits.len());
    for (k, &hit) in m.hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        points.push((tp as f64 / m.num_gt as f64, tp as f64 / (k + 1) as f64));
    }
    // precision envelope from the right
    let mut envelope = 0.0f64;
    for p in points.iter_mut().rev() {
        envelope = envelope.max(p.1);
        p.1 = envelope;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (recall, precision) in points {
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// AP of one category at one IoU threshold; `None` when the category has no ground truth.
pub fn average_precision(
    pred: &Clustering,
    gt: &Clustering,
    iou_threshold: f64,
    category: i32,
) -> Result<Option<f64>> {
    let iou = iou_matrix(pred, gt)?;
    let m = match_category(pred, gt, &iou, category, iou_threshold);
    Ok((m.num_gt > 0).then(|| area_under_pr(&m)))
}

/// Per-category scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryReport {
    pub category: i32,
    pub name: String,
    pub num_gt: usize,
    pub num_pred: usize,
    /// AP at each of [`map_thresholds`]; empty without ground truth.
    pub ap_by_threshold: Vec<f64>,
    pub map: Option<f64>,
    pub ap50: Option<f64>,
    pub ap25: Option<f64>,
    /// At IoU 0.5; `None` when the category has neither predictions nor ground truth.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub categories: Vec<CategoryReport>,
    pub map: f64,
    pub ap50: f64,
    pub ap25: f64,
    pub mprec: f64,
    pub mrec: f64,
    pub num_gt: usize,
    pub num_pred: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per-category precision and recall at `iou_threshold`, averaged: recall over
/// categories with ground truth, precision over categories with ground truth or
/// predictions (a category with ground truth but no predictions counts as 0).
pub fn precision_recall(
    pred: &Clustering,
    gt: &Clustering,
    config: &CategoryConfig,
    iou_threshold: f64,
) -> Result<(f64, f64)> {
    let iou = iou_matrix(pred, gt)?;
    let (mut precisions, mut recalls) = (Vec::new(), Vec::new());
    for &cat in &config.foreground {
        let (p, r) = category_pr(&match_category(pred, gt, &iou, cat, iou_threshold));
        precisions.extend(p);
        recalls.extend(r);
    }
    Ok((mean(precisions.into_iter()), mean(recalls.into_iter())))
}

fn category_pr(m: &Matching) -> (Option<f64>, Option<f64>) {
    let tp = m.hits.iter().filter(|&&h| h).count() as f64;
    let precision = match (m.hits.len(), m.num_gt) {
        (0, 0) => None,
        (0, _) => Some(0.0),
        (n, _) => Some(tp / n as f64),
    };
    let recall = (m.num_gt > 0).then(|| tp / m.num_gt as f64);
    (precision, recall)
}

/// Scores `pred` against `gt` over the configured foreground categories.
pub fn evaluate(pred: &Clustering, gt: &Clustering, config: &CategoryConfig) -> Result<EvalReport> {
    let iou = iou_matrix(pred, gt)?;
    let thresholds = map_thresholds();
    let categories: Vec<i32> = config.foreground.iter().copied().collect();
    let reports = parallel::map_slice(&categories, |&cat| {
        let ap_at = |t: f64| area_under_pr(&match_category(pred, gt, &iou, cat, t));
        let at50 = match_category(pred, gt, &iou, cat, 0.5);
        let (precision, recall) = category_pr(&at50);
        let has_gt = at50.num_gt > 0;
        let ap_by_threshold: Vec<f64> = if has_gt {
            thresholds.iter().map(|&t| ap_at(t)).collect()
        } else {
            Vec::new()
        };
        CategoryReport {
            category: cat,
            name: config.name(cat),
            num_gt: at50.num_gt,
            num_pred: at50.hits.len(),
            map: has_gt.then(|| mean(ap_by_threshold.iter().copied())),
            ap50: has_gt.then(|| area_under_pr(&at50)),
            ap25: has_gt.then(|| ap_at(0.25)),
            ap_by_threshold,
            precision,
            recall,
        }
    });
    let with_gt = || reports.iter().filter(|r| r.num_gt > 0);
    Ok(EvalReport {
        map: mean(with_gt().filter_map(|r| r.map)),
        ap50: mean(with_gt().filter_map(|r| r.ap50)),
        ap25: mean(with_gt().filter_map(|r| r.ap25)),
        mprec: mean(reports.iter().filter_map(|r| r.precision)),
        mrec: mean(reports.iter().filter_map(|r| r.recall)),
        num_gt: reports.iter().map(|r| r.num_gt).sum(),
        num_pred: reports.iter().map(|r| r.num_pred).sum(),
        categories: reports,
    })
}

fn fmt_metric(v: f64) -> String {
    format!("{v:.6}")
}

impl EvalReport {
    /// `key=value` lines: aggregates first, then `cat.<id>.<metric>` per category.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.aggregates() {
            let _ = writeln!(out, "{k}={v}");
        }
        for c in &self.categories {
            for (k, v) in category_fields(c) {
                let _ = writeln!(out, "cat.{}.{k}={v}", c.category);
            }
        }
        out
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let dash = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.3}", v));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>5} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "category", "gt", "pred", "mAP", "AP50", "AP25", "prec", "rec"
        );
        for c in &self.categories {
            if c.num_gt == 0 && c.num_pred == 0 {
                continue;
            }
            let _ = writeln!(
                out,
                "{:<16} {:>5} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7}",
                c.name,
                c.num_gt,
                c.num_pred,
                dash(c.map),
                dash(c.ap50),
                dash(c.ap25),
                dash(c.precision),
                dash(c.recall)
            );
        }
        let _ = writeln!(
            out,
            "{:<16} {:>5} {:>5} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
            "average",
            self.num_gt,
            self.num_pred,
            self.map,
            self.ap50,
            self.ap25,
            self.mprec,
            self.mrec
        );
        out
    }

    /// Flat JSON object with the same keys as [`EvalReport::to_key_values`].
    pub fn to_json(&self) -> String {
        let mut obj = Map::new();
        for (k, v) in self.aggregates() {
            obj.insert(k.to_string(), json_value(&v));
        }
        for c in &self.categories {
            for (k, v) in category_fields(c) {
                obj.insert(format!("cat.{}.{k}", c.category), json_value(&v));
            }
        }
        Value::Object(obj).to_string()
    }

    fn aggregates(&self) -> Vec<(&'static str, String)> {
        vec![
            ("map", fmt_metric(self.map)),
            ("ap50", fmt_metric(self.ap50)),
            ("ap25", fmt_metric(self.ap25)),
            ("mprec", fmt_metric(self.mprec)),
            ("mrec", fmt_metric(self.mrec)),
            ("num_gt", self.num_gt.to_string()),
            ("num_pred", self.num_pred.to_string()),
        ]
    }
}

fn category_fields(c: &CategoryReport) -> Vec<(&'static str, String)> {
    let opt = |v: Option<f64>| v.map_or("na".to_string(), fmt_metric);
    vec![
        ("num_gt", c.num_gt.to_string()),
        ("num_pred", c.num_pred.to_string()),
        ("map", opt(c.map)),
        ("ap50", opt(c.ap50)),
        ("ap25", opt(c.ap25)),
        ("prec", opt(c.precision)),
        ("rec", opt(c.recall)),
    ]
}

fn json_value(s: &str) -> Value {
    match s.parse::<f64>() {
        Ok(v) if s.contains('.') => json!(v),
        _ => match s.parse::<u64>() {
            Ok(v) => json!(v),
            Err(_) => Value::Null,
        },
    }
}

/// Categories that have ground truth, for callers that want to iterate them.
pub fn gt_categories(gt: &Clustering) -> BTreeSet<i32> {
    gt.clusters().iter().map(|c| c.category).collect()
}

/// Instance counts per category, mostly for logging.
pub fn instance_counts(c: &Clustering) -> BTreeMap<i32, usize> {
    let mut counts = BTreeMap::new();
    for cl in c.clusters() {
        *counts.entry(cl.category).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clustering(n: usize, groups: &[(&[usize], i32)]) -> Clustering {
        Clustering::from_groups(n, groups.iter().map(|(g, c)| (g.to_vec(), *c)).collect()).unwrap()
    }

    #[test]
    fn iou_cases() {
        let a = clustering(10, &[(&[0, 1, 2, 3], 1)]);
        let b = clustering(10, &[(&[1, 2, 3, 4, 5, 6], 1)]);
        assert_eq!(iou_matrix(&a, &b).unwrap(), vec![vec![3.0 / 7.0]]);
        assert_eq!(iou_matrix(&a, &a).unwrap(), vec![vec![1.0]]);
        let c = clustering(10, &[(&[7, 8], 1)]);
        assert_eq!(iou_matrix(&a, &c).unwrap(), vec![vec![0.0]]);
        assert!(iou_matrix(&a, &Clustering::empty(3)).is_err());
    }

    #[test]
    fn ap_cases() {
        let gt = clustering(10, &[(&[0, 1, 2], 1), (&[5, 6, 7], 1)]);
        assert_eq!(average_precision(&gt, &gt, 0.5, 1).unwrap(), Some(1.0));
        let half = clustering(10, &[(&[0, 1, 2], 1)]);
        assert_eq!(average_precision(&half, &gt, 0.5, 1).unwrap(), Some(0.5));
        assert_eq!(average_precision(&half, &gt, 0.5, 2).unwrap(), None);
    }

    #[test]
    fn false_positive_ranked_first_halves_ap() {
        let gt = clustering(10, &[(&[0, 1, 2], 1)]);
        let mut pred = clustering(10, &[(&[0, 1, 2], 1), (&[5, 6], 1)]);
        pred.set_scores(&[0.4, 0.9]).unwrap();
        assert_eq!(average_precision(&pred, &gt, 0.5, 1).unwrap(), Some(0.5));
        pred.set_scores(&[0.9, 0.4]).unwrap();
        assert_eq!(average_precision(&pred, &gt, 0.5, 1).unwrap(), Some(1.0));
    }

    #[test]
    fn precision_recall_two_categories() {
        // category 1: 2 GT, 3 preds, 1 match; category 2: 1 GT, 1 pred, 1 match
        let gt = clustering(20, &[(&[0, 1, 2], 1), (&[3, 4, 5], 1), (&[10, 11], 2)]);
        let pred = clustering(
            20,
            &[(&[0, 1, 2], 1), (&[6, 7], 1), (&[8, 9], 1), (&[10, 11], 2)],
        );
        let cfg = CategoryConfig::new(3, [1, 2]).unwrap();
        let (p, r) = precision_recall(&pred, &gt, &cfg, 0.5).unwrap();
        assert!((p - (1.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
        assert!((r - (0.5 + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn report_extremes() {
        let gt = clustering(10, &[(&[0, 1, 2], 1), (&[5, 6, 7], 2)]);
        let cfg = CategoryConfig::new(3, [0, 1, 2]).unwrap();
        let r = evaluate(&gt, &gt, &cfg).unwrap();
        assert_eq!(
            (r.map, r.ap50, r.ap25, r.mprec, r.mrec),
            (1.0, 1.0, 1.0, 1.0, 1.0)
        );
        let r = evaluate(&Clustering::empty(10), &gt, &cfg).unwrap();
        assert_eq!(
            (r.map, r.ap50, r.ap25, r.mprec, r.mrec),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
        // category 0 has neither GT nor predictions and is excluded everywhere
        assert_eq!(r.categories[0].precision, None);
    }

    #[test]
    fn prediction_without_gt_only_hurts_precision() {
        let gt = clustering(10, &[(&[0, 1, 2], 1)]);
        let pred = clustering(10, &[(&[0, 1, 2], 1), (&[5, 6], 2)]);
        let cfg = CategoryConfig::new(3, [1, 2]).unwrap();
        let r = evaluate(&pred, &gt, &cfg).unwrap();
        assert_eq!(r.ap50, 1.0);
        assert_eq!(r.mrec, 1.0);
        assert_eq!(r.mprec, 0.5);
    }

    #[test]
    fn emitters() {
        let gt = clustering(4, &[(&[0, 1], 1)]);
        let mut cfg = CategoryConfig::new(2, [1]).unwrap();
        cfg.names.insert(1, "chair".into());
        let r = evaluate(&gt, &gt, &cfg).unwrap();
        let kv = r.to_key_values();
        assert!(kv.starts_with("map=1.000000\nap50=1.000000\n"));
        assert!(kv.contains("cat.1.rec=1.000000\n"));
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["ap25"], json!(1.0));
        assert_eq!(v["cat.1.num_gt"], json!(1));
        assert!(r.to_table().contains("chair"));
    }
}
