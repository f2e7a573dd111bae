//! COCO-style detection evaluation: greedy IoU matching, interpolated AP,
//! mAP over an IoU sweep, and pseudo-label precision/recall.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::AnnotatedDataset;
use crate::detections::DetectionSet;
use crate::error::{Error, Result};
use crate::geometry::BBox;
pub use crate::geometry::iou;
use crate::pseudolabel::{top_class, PseudoLabel};
use crate::scalar::Scalar;

/// A scored, classified box to be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Prediction<S = f64> {
    pub image_id: u64,
    /// Positional class index.
    pub category: usize,
    pub bbox: BBox<S>,
    pub confidence: S,
}

impl<S: Scalar> From<&PseudoLabel<S>> for Prediction<S> {
    fn from(l: &PseudoLabel<S>) -> Self {
        Self {
            image_id: l.image_id,
            category: l.category,
            bbox: l.bbox,
            confidence: l.confidence,
        }
    }
}

/// Every detection as its argmax class and top probability.
pub fn predictions_from_detections<S: Scalar>(set: &DetectionSet<S>) -> Result<Vec<Prediction<S>>> {
    set.iter()
        .map(|d| {
            let (category, confidence) = top_class(d)?;
            Ok(Prediction {
                image_id: d.image_id,
                category,
                bbox: d.bbox,
                confidence,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// Matched truth per detection, indexed by input position.
    pub assignments: Vec<Option<usize>>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

fn by_confidence_desc<S: Scalar>(a: S, b: S) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Greedy matching for one image and one class.
///
/// Detections are visited by descending confidence (ties in input order);
/// each takes the unmatched truth with the highest IoU at or above
/// `iou_threshold`, ties to the lower truth index.
pub fn match_detections<S: Scalar>(detections: &[(S, BBox<S>)], truths: &[BBox<S>], iou_threshold: S) -> Matching {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| by_confidence_desc(detections[a].0, detections[b].0).then(a.cmp(&b)));
    let mut taken = vec![false; truths.len()];
    let mut assignments = vec![None; detections.len()];
    for d in order {
        let mut best: Option<(usize, S)> = None;
        for (t, truth) in truths.iter().enumerate() {
            if taken[t] {
                continue;
            }
            let overlap = iou(&detections[d].1, truth);
            if overlap < iou_threshold {
                continue;
            }
            if best.is_none_or(|(_, v)| overlap > v) {
                best = Some((t, overlap));
            }
        }
        if let Some((t, _)) = best {
            taken[t] = true;
            assignments[d] = Some(t);
        }
    }
    let tp = assignments.iter().filter(|a| a.is_some()).count();
    Matching {
        assignments,
        true_positives: tp,
        false_positives: detections.len() - tp,
        false_negatives: truths.len() - tp,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Recall points 0, 0.01, ..., 1.
    #[default]
    Coco101,
    /// Recall points 0, 0.1, ..., 1.
    Pascal11,
}

impl Interpolation {
    fn points(self) -> usize {
        match self {
            Interpolation::Coco101 => 101,
            Interpolation::Pascal11 => 11,
        }
    }
}

/// Interpolated average precision over `(confidence, is_true_positive)`
/// pairs of one class at one IoU threshold.
///
/// Pairs are ranked by descending confidence, ties in input order. `None`
/// when the class has no ground truth.
pub fn average_precision<S: Scalar>(scored: &[(S, bool)], num_truths: usize, interpolation: Interpolation) -> Option<S> {
    if num_truths == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| by_confidence_desc(scored[a].0, scored[b].0).then(a.cmp(&b)));

    let total = S::from_count(num_truths);
    let mut precision = Vec::with_capacity(order.len());
    let mut recall = Vec::with_capacity(order.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &i in &order {
        if scored[i].1 {
            tp += 1;
        } else {
            fp += 1;
        }
        precision.push(S::from_count(tp) / S::from_count(tp + fp));
        recall.push(S::from_count(tp) / total);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }

    let points = interpolation.points();
    let steps = S::from_count(points - 1);
    let mut sum = S::zero();
    for k in 0..points {
        let r = S::from_count(k) / steps;
        let idx = recall.partition_point(|&x| x < r);
        if idx < precision.len() {
            sum += precision[idx];
        }
    }
    Some(sum / S::from_count(points))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Protocol<S = f64> {
    pub iou_thresholds: Vec<S>,
    pub interpolation: Interpolation,
    /// Per-image cap on detections, highest confidence first.
    pub max_detections: Option<usize>,
    /// IoU used for pseudo-label precision and recall.
    pub match_iou: S,
}

impl<S: Scalar> Default for Protocol<S> {
    fn default() -> Self {
        Self {
            iou_thresholds: coco_iou_sweep(),
            interpolation: Interpolation::Coco101,
            max_detections: None,
            match_iou: S::lit(0.5),
        }
    }
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_iou_sweep<S: Scalar>() -> Vec<S> {
    (0..10).map(|k| S::from_count(50 + 5 * k) / S::from_count(100)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ClassAp<S = f64> {
    pub category_id: u64,
    pub name: String,
    pub num_truths: usize,
    pub num_predictions: usize,
    /// One entry per IoU threshold; `None` when the class has no truths.
    pub ap: Vec<Option<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PrecisionRecall<S = f64> {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `TP / (TP + FP)`, 0 without predictions.
    pub precision: S,
    /// `TP / (TP + FN)`.
    pub recall: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EvalReport<S = f64> {
    pub protocol: Protocol<S>,
    pub per_class: Vec<ClassAp<S>>,
    /// mAP at each IoU threshold, over classes with ground truth.
    pub map_per_threshold: Vec<S>,
    /// Mean over classes and thresholds.
    pub map_sweep: S,
    pub map_50: S,
    pub pseudo: PrecisionRecall<S>,
    /// Category ids without ground truth, left out of every mean.
    pub excluded_classes: Vec<u64>,
}

impl<S: Scalar> EvalReport<S> {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::parse("report", e))?;
        text.push('\n');
        Ok(text)
    }

    /// Per-class, per-threshold AP; empty cells for excluded classes.
    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::parse("csv", e);
        let mut header = vec!["category_id".to_string(), "name".to_string(), "num_truths".to_string()];
        header.extend(self.protocol.iou_thresholds.iter().map(|t| format!("ap@{t}")));
        writer.write_record(&header).map_err(csv_err)?;
        for c in &self.per_class {
            let mut row = vec![c.category_id.to_string(), c.name.clone(), c.num_truths.to_string()];
            row.extend(c.ap.iter().map(|a| a.map(|v| v.to_string()).unwrap_or_default()));
            writer.write_record(&row).map_err(csv_err)?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::parse("csv", e))?;
        String::from_utf8(bytes).map_err(|e| Error::parse("csv", e))
    }
}

/// Detections (position in input, confidence, box) and truth boxes of one
/// class in one image.
#[derive(Default)]
struct Cell<S: Scalar> {
    predictions: Vec<(usize, S, BBox<S>)>,
    truths: Vec<BBox<S>>,
}

impl<S: Scalar> Cell<S> {
    fn matching(&self, threshold: S) -> Matching {
        let dets: Vec<(S, BBox<S>)> = self.predictions.iter().map(|&(_, c, b)| (c, b)).collect();
        match_detections(&dets, &self.truths, threshold)
    }
}

fn mean<S: Scalar>(values: impl Iterator<Item = S>) -> S {
    let (sum, count) = values.fold((S::zero(), 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        S::zero()
    } else {
        sum / S::from_count(count)
    }
}

pub fn evaluate<S: Scalar>(
    predictions: &[Prediction<S>],
    ground_truth: &AnnotatedDataset<S>,
    protocol: &Protocol<S>,
) -> Result<EvalReport<S>> {
    if ground_truth.annotations.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    if protocol.iou_thresholds.is_empty() {
        return Err(Error::invalid("protocol", "no IoU thresholds"));
    }
    let index = ground_truth.category_index();
    let n = index.len();
    let images: HashSet<u64> = ground_truth.images.iter().map(|im| im.id).collect();

    for (pos, p) in predictions.iter().enumerate() {
        if !images.contains(&p.image_id) {
            return Err(Error::Referential {
                record: format!("prediction {pos}"),
                kind: "image",
                id: p.image_id,
            });
        }
        if p.category >= n {
            return Err(Error::IndexOutOfRange { index: p.category, n });
        }
    }

    let mut kept: Vec<usize> = (0..predictions.len()).collect();
    if let Some(cap) = protocol.max_detections {
        let mut per_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for pos in kept {
            per_image.entry(predictions[pos].image_id).or_default().push(pos);
        }
        kept = Vec::new();
        for mut positions in per_image.into_values() {
            positions.sort_by(|&a, &b| {
                by_confidence_desc(predictions[a].confidence, predictions[b].confidence).then(a.cmp(&b))
            });
            positions.truncate(cap);
            kept.extend(positions);
        }
        kept.sort_unstable();
    }

    // (class, image) cells
    let mut cells: BTreeMap<(usize, u64), Cell<S>> = BTreeMap::new();
    for &pos in &kept {
        let p = &predictions[pos];
        cells
            .entry((p.category, p.image_id))
            .or_default()
            .predictions
            .push((pos, p.confidence, p.bbox));
    }
    let mut num_truths = vec![0usize; n];
    for ann in &ground_truth.annotations {
        let class = index.index_of(ann.category_id).expect("validated category");
        num_truths[class] += 1;
        cells.entry((class, ann.image_id)).or_default().truths.push(ann.bbox);
    }

    let mut by_class: Vec<Vec<&Cell<S>>> = vec![Vec::new(); n];
    for ((class, _), cell) in &cells {
        by_class[*class].push(cell);
    }

    let thresholds = &protocol.iou_thresholds;
    let per_class: Vec<ClassAp<S>> = by_class
        .par_iter()
        .enumerate()
        .map(|(class, cells)| {
            let category_id = index.id_of(class).expect("class in range");
            let num_predictions = cells.iter().map(|c| c.predictions.len()).sum();
            let ap = thresholds
                .iter()
                .map(|&t| {
                    let mut scored: Vec<(usize, S, bool)> = Vec::with_capacity(num_predictions);
                    for cell in cells {
                        let m = cell.matching(t);
                        for (k, &(pos, conf, _)) in cell.predictions.iter().enumerate() {
                            scored.push((pos, conf, m.assignments[k].is_some()));
                        }
                    }
                    // rank ties by input position
                    scored.sort_by_key(|&(pos, _, _)| pos);
                    let pairs: Vec<(S, bool)> = scored.iter().map(|&(_, c, tp)| (c, tp)).collect();
                    average_precision(&pairs, num_truths[class], protocol.interpolation)
                })
                .collect();
            ClassAp {
                category_id,
                name: ground_truth.category_name(category_id).unwrap_or_default().to_string(),
                num_truths: num_truths[class],
                num_predictions,
                ap,
            }
        })
        .collect();

    let map_per_threshold: Vec<S> = (0..thresholds.len())
        .map(|t| mean(per_class.iter().filter_map(|c| c.ap[t])))
        .collect();
    let map_sweep = mean(map_per_threshold.iter().copied());

    let half = S::lit(0.5);
    let map_50 = match thresholds.iter().position(|&t| t == half) {
        Some(t) => map_per_threshold[t],
        None => {
            let single = Protocol {
                iou_thresholds: vec![half],
                ..protocol.clone()
            };
            evaluate(predictions, ground_truth, &single)?.map_50
        }
    };

    let (mut tp, mut fp) = (0usize, 0usize);
    for cell in cells.values() {
        let m = cell.matching(protocol.match_iou);
        tp += m.true_positives;
        fp += m.false_positives;
    }
    let total_truths = ground_truth.annotations.len();
    let pseudo = PrecisionRecall {
        true_positives: tp,
        false_positives: fp,
        false_negatives: total_truths - tp,
        precision: if tp + fp == 0 {
            S::zero()
        } else {
            S::from_count(tp) / S::from_count(tp + fp)
        },
        recall: S::from_count(tp) / S::from_count(total_truths),
    };

    let excluded_classes = per_class
        .iter()
        .filter(|c| c.num_truths == 0)
        .map(|c| c.category_id)
        .collect();

    Ok(EvalReport {
        protocol: protocol.clone(),
        per_class,
        map_per_threshold,
        map_sweep,
        map_50,
        pseudo,
        excluded_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox<f64> {
        BBox::new(x, y, w, h)
    }

    #[test]
    fn exact_match() {
        let m = match_detections(&[(0.9, b(0., 0., 10., 10.))], &[b(0., 0., 10., 10.)], 0.5);
        assert_eq!((m.true_positives, m.false_positives, m.false_negatives), (1, 0, 0));
    }

    #[test]
    fn two_detections_one_truth() {
        let bx = b(0., 0., 10., 10.);
        for confs in [(0.9, 0.8), (0.8, 0.9), (0.7, 0.7)] {
            let m = match_detections(&[(confs.0, bx), (confs.1, bx)], &[bx], 0.5);
            assert_eq!((m.true_positives, m.false_positives, m.false_negatives), (1, 1, 0));
        }
        // equal confidences: the earlier detection wins
        let m = match_detections(&[(0.7, bx), (0.7, bx)], &[bx], 0.5);
        assert_eq!(m.assignments, vec![Some(0), None]);
    }

    #[test]
    fn picks_highest_iou_truth() {
        let truths = [b(0., 0., 10., 10.), b(1., 0., 10., 10.)];
        let m = match_detections(&[(0.9, b(1., 0., 10., 10.))], &truths, 0.5);
        assert_eq!(m.assignments, vec![Some(1)]);
    }

    #[test]
    fn ap_edge_cases() {
        assert_eq!(average_precision::<f64>(&[], 2, Interpolation::Coco101), Some(0.0));
        assert_eq!(average_precision::<f64>(&[(0.5, false)], 0, Interpolation::Coco101), None);
        assert_eq!(
            average_precision(&[(0.9, true), (0.8, true)], 2, Interpolation::Coco101),
            Some(1.0)
        );
        // one hit of two truths: precision 1 up to recall 0.5
        assert_eq!(
            average_precision(&[(0.9, true)], 2, Interpolation::Coco101),
            Some(51.0 / 101.0)
        );
        assert_eq!(
            average_precision(&[(0.9, true)], 2, Interpolation::Pascal11),
            Some(6.0 / 11.0)
        );
    }

    #[test]
    fn fp_ranked_first_halves_precision() {
        let ap: f64 = average_precision(&[(0.9, false), (0.8, true)], 1, Interpolation::Coco101).unwrap();
        assert!((ap - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sweep_thresholds() {
        let sweep: Vec<f64> = coco_iou_sweep();
        assert_eq!(sweep.len(), 10);
        assert_eq!(sweep[0], 0.5);
        assert_eq!(sweep[9], 0.95);
        assert!((sweep[3] - 0.65).abs() < 1e-15);
    }
}
