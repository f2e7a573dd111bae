//! Turning raw detections into accepted pseudo-labels.
//!
//! A detection's class is the argmax of its probability vector (ties to the
//! lowest index). Two acceptance rules exist:
//!
//! * one-hot: accept iff `p_c > rho`
//! * co-occurrence: accept iff `p_c * sigma > rho_co`, with `sigma` looked up
//!   from the classes of the other confident detections in the same image
//!
//! The co-occurrence rule replaces the one-hot rule, it is not applied on
//! top of it. Both inequalities are strict.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooccurrence::CooccurrenceMatrix;
use crate::dataset::CategoryIndex;
use crate::detections::{Detection, DetectionSet};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::scalar::{argmax, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FilterConfig<S = f64> {
    pub rho: S,
    pub rho_co: S,
    pub use_cooccurrence: bool,
    /// Confidence a co-detection needs to enter the context set.
    pub context_threshold: S,
    pub nms_iou: S,
    pub nms_enabled: bool,
}

impl<S: Scalar> Default for FilterConfig<S> {
    fn default() -> Self {
        Self::cooccurrence(S::lit(0.5), S::lit(0.3))
    }
}

impl<S: Scalar> FilterConfig<S> {
    /// One-hot thresholding only.
    pub fn one_hot(rho: S) -> Self {
        Self {
            rho,
            rho_co: rho,
            use_cooccurrence: false,
            context_threshold: rho,
            nms_iou: S::lit(0.5),
            nms_enabled: true,
        }
    }

    /// Co-occurrence rescoring with the context bar at `rho`.
    pub fn cooccurrence(rho: S, rho_co: S) -> Self {
        Self {
            rho_co,
            use_cooccurrence: true,
            ..Self::one_hot(rho)
        }
    }

    /// Checks ranges; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let open_unit = |name: &str, v: S| {
            if v > S::zero() && v < S::one() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} is outside (0, 1)")))
            }
        };
        open_unit("rho", self.rho)?;
        open_unit("rho_co", self.rho_co)?;
        open_unit("context_threshold", self.context_threshold)?;
        open_unit("nms_iou", self.nms_iou)?;
        let mut warnings = Vec::new();
        if self.use_cooccurrence && self.rho_co > self.rho {
            warnings.push(format!(
                "rho_co {} exceeds rho {}; co-occurrence rescoring is expected to use a lower bar",
                self.rho_co, self.rho
            ));
        }
        Ok(warnings)
    }
}

/// Numerically stable softmax: `exp(q_j - max q) / sum_k exp(q_k - max q)`.
pub fn softmax<S: Scalar>(logits: &[S]) -> Result<Vec<S>> {
    if logits.is_empty() {
        return Err(Error::invalid("logits", "at least one class is required"));
    }
    if logits.iter().any(|q| !q.is_finite()) {
        return Err(Error::NonFinite("logits".to_string()));
    }
    let peak = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&q| (q - peak).exp()).collect();
    let total: S = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Argmax class and its probability.
pub fn top_class<S: Scalar>(detection: &Detection<S>) -> Result<(usize, S)> {
    let p = detection.probabilities()?;
    argmax(&p).ok_or_else(|| Error::invalid(format!("detection {}", detection.index), "empty class vector"))
}

/// One-hot acceptance: `Some((c, p_c))` iff `p_c > rho`.
pub fn one_hot_accept<S: Scalar>(detection: &Detection<S>, config: &FilterConfig<S>) -> Result<Option<(usize, S)>> {
    let (class, confidence) = top_class(detection)?;
    Ok((confidence > config.rho).then_some((class, confidence)))
}

fn context_from_tops<S: Scalar>(tops: &[(usize, S)], bar: S, exclude: usize) -> BTreeSet<usize> {
    tops.iter()
        .enumerate()
        .filter(|&(i, &(_, conf))| i != exclude && conf > bar)
        .map(|(_, &(class, _))| class)
        .collect()
}

/// Argmax classes of every other detection in the image whose top
/// probability exceeds `context_threshold`.
pub fn build_context<S: Scalar>(
    image_detections: &[Detection<S>],
    config: &FilterConfig<S>,
    exclude: usize,
) -> Result<BTreeSet<usize>> {
    let tops = image_detections.iter().map(top_class).collect::<Result<Vec<_>>>()?;
    Ok(context_from_tops(&tops, config.context_threshold, exclude))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accepted<S> {
    pub class: usize,
    pub confidence: S,
    pub sigma: S,
}

/// Co-occurrence acceptance: `p_c * sigma(c, context) > rho_co`.
pub fn cooccurrence_accept<S: Scalar>(
    detection: &Detection<S>,
    context: &BTreeSet<usize>,
    matrix: &CooccurrenceMatrix<S>,
    config: &FilterConfig<S>,
) -> Result<Option<Accepted<S>>> {
    if matrix.n != detection.vector.len() {
        return Err(Error::Dimension {
            what: "co-occurrence matrix".to_string(),
            expected: detection.vector.len(),
            found: matrix.n,
        });
    }
    let (class, confidence) = top_class(detection)?;
    let sigma = matrix.sigma(class, context)?;
    Ok((confidence * sigma > config.rho_co).then_some(Accepted {
        class,
        confidence,
        sigma,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    OneHot,
    Cooccurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LabelProvenance<S = f64> {
    pub source_tag: String,
    pub config: FilterConfig<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PseudoLabel<S = f64> {
    pub image_id: u64,
    pub bbox: BBox<S>,
    /// Positional class index.
    pub category: usize,
    pub category_id: u64,
    pub confidence: S,
    pub sigma_used: S,
    pub detection_index: usize,
    pub rule: Rule,
    pub provenance: LabelProvenance<S>,
}

impl<S: Scalar> PseudoLabel<S> {
    /// Re-evaluates the acceptance inequality from the recorded fields.
    pub fn satisfies_rule(&self) -> bool {
        let config = &self.provenance.config;
        match self.rule {
            Rule::OneHot => self.confidence > config.rho,
            Rule::Cooccurrence => self.confidence * self.sigma_used > config.rho_co,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub category_id: u64,
    pub accepted: usize,
    pub below_rho: usize,
    pub below_rho_co: usize,
    pub suppressed: usize,
}

impl ClassCounts {
    pub fn seen(&self) -> usize {
        self.accepted + self.below_rho + self.below_rho_co + self.suppressed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FilterReport<S = f64> {
    pub source_tag: String,
    pub config: FilterConfig<S>,
    pub category_ids: Vec<u64>,
    /// Indexed by positional class index.
    pub per_class: Vec<ClassCounts>,
    pub warnings: Vec<String>,
}

impl<S: Scalar> FilterReport<S> {
    pub fn empty(source_tag: &str, config: FilterConfig<S>, index: &CategoryIndex) -> Self {
        Self {
            source_tag: source_tag.to_string(),
            config,
            category_ids: index.ids().to_vec(),
            per_class: index
                .ids()
                .iter()
                .map(|&category_id| ClassCounts {
                    category_id,
                    ..ClassCounts::default()
                })
                .collect(),
            warnings: Vec::new(),
        }
    }

    /// Adds the counts of `other`; both reports must cover the same classes.
    pub fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.per_class.iter_mut().zip(&other.per_class) {
            a.accepted += b.accepted;
            a.below_rho += b.below_rho;
            a.below_rho_co += b.below_rho_co;
            a.suppressed += b.suppressed;
        }
        self
    }

    pub fn total(&self) -> ClassCounts {
        self.per_class.iter().fold(ClassCounts::default(), |mut acc, c| {
            acc.accepted += c.accepted;
            acc.below_rho += c.below_rho;
            acc.below_rho_co += c.below_rho_co;
            acc.suppressed += c.suppressed;
            acc
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::parse("report", e))?;
        text.push('\n');
        Ok(text)
    }
}

/// Class-wise greedy duplicate suppression.
///
/// Labels are visited by confidence descending (ties: lower `x`, lower `y`,
/// lower detection index) and kept iff their IoU with every kept label of
/// the same class is at most `nms_iou`. Output is in visiting order.
pub fn suppress_duplicates<S: Scalar>(mut labels: Vec<PseudoLabel<S>>, config: &FilterConfig<S>) -> Vec<PseudoLabel<S>> {
    sort_for_suppression(&mut labels);
    if !config.nms_enabled {
        return labels;
    }
    let mut kept: Vec<PseudoLabel<S>> = Vec::with_capacity(labels.len());
    for label in labels {
        let clashes = kept
            .iter()
            .filter(|k| k.category == label.category && k.image_id == label.image_id)
            .any(|k| iou(&k.bbox, &label.bbox) > config.nms_iou);
        if !clashes {
            kept.push(label);
        }
    }
    kept
}

fn sort_for_suppression<S: Scalar>(labels: &mut [PseudoLabel<S>]) {
    labels.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.bbox.x.partial_cmp(&b.bbox.x).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.bbox.y.partial_cmp(&b.bbox.y).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.detection_index.cmp(&b.detection_index))
    });
}

/// Runs acceptance over a detection set.
type ImageOutcome<S> = (Vec<PseudoLabel<S>>, FilterReport<S>);

pub struct Labeler<'a, S: Scalar> {
    pub config: FilterConfig<S>,
    matrix: Option<&'a CooccurrenceMatrix<S>>,
    warnings: Vec<String>,
}

impl<'a, S: Scalar> Labeler<'a, S> {
    pub fn new(config: FilterConfig<S>, matrix: Option<&'a CooccurrenceMatrix<S>>) -> Result<Self> {
        let warnings = config.validate()?;
        if config.use_cooccurrence && matrix.is_none() {
            return Err(Error::invalid(
                "filter config",
                "co-occurrence rescoring needs a matrix",
            ));
        }
        Ok(Self {
            config,
            matrix,
            warnings,
        })
    }

    fn check_dimensions(&self, detections: &DetectionSet<S>) -> Result<()> {
        if let (true, Some(m)) = (self.config.use_cooccurrence, self.matrix) {
            m.check_against(&detections.categories, None)?;
        }
        Ok(())
    }

    /// Accepted labels for one image before duplicate suppression, in
    /// detection order.
    fn accept_image(
        &self,
        source_tag: &str,
        index: &CategoryIndex,
        detections: &[Detection<S>],
        report: &mut FilterReport<S>,
    ) -> Result<Vec<PseudoLabel<S>>> {
        let tops = detections.iter().map(top_class).collect::<Result<Vec<_>>>()?;
        let mut labels = Vec::new();
        for (pos, det) in detections.iter().enumerate() {
            let (class, confidence) = tops[pos];
            let accepted = match (self.config.use_cooccurrence, self.matrix) {
                (true, Some(matrix)) => {
                    let context = context_from_tops(&tops, self.config.context_threshold, pos);
                    let sigma = matrix.sigma(class, &context)?;
                    if confidence * sigma > self.config.rho_co {
                        Some((Rule::Cooccurrence, sigma))
                    } else {
                        report.per_class[class].below_rho_co += 1;
                        None
                    }
                }
                _ => {
                    if confidence > self.config.rho {
                        Some((Rule::OneHot, S::one()))
                    } else {
                        report.per_class[class].below_rho += 1;
                        None
                    }
                }
            };
            if let Some((rule, sigma_used)) = accepted {
                labels.push(PseudoLabel {
                    image_id: det.image_id,
                    bbox: det.bbox,
                    category: class,
                    category_id: index.id_of(class).ok_or(Error::IndexOutOfRange {
                        index: class,
                        n: index.len(),
                    })?,
                    confidence,
                    sigma_used,
                    detection_index: det.index,
                    rule,
                    provenance: LabelProvenance {
                        source_tag: source_tag.to_string(),
                        config: self.config,
                    },
                });
            }
        }
        Ok(labels)
    }

    fn run(&self, detections: &DetectionSet<S>, suppress: bool) -> Result<(Vec<PseudoLabel<S>>, FilterReport<S>)> {
        self.check_dimensions(detections)?;
        let index = &detections.categories;
        let tag = detections.source_tag.as_str();
        let groups: Vec<(u64, &[Detection<S>])> = detections.groups().collect();
        let per_image: Vec<Result<ImageOutcome<S>>> = groups
            .par_iter()
            .map(|&(_, dets)| {
                let mut report = FilterReport::empty(tag, self.config, index);
                let accepted = self.accept_image(tag, index, dets, &mut report)?;
                let labels = if suppress {
                    let before = accepted.len();
                    let kept = suppress_duplicates(accepted.clone(), &self.config);
                    if kept.len() < before {
                        let mut survivors: Vec<usize> = kept.iter().map(|l| l.detection_index).collect();
                        survivors.sort_unstable();
                        for l in &accepted {
                            if survivors.binary_search(&l.detection_index).is_err() {
                                report.per_class[l.category].suppressed += 1;
                            }
                        }
                    }
                    kept
                } else {
                    accepted
                };
                for l in &labels {
                    report.per_class[l.category].accepted += 1;
                }
                Ok((labels, report))
            })
            .collect();

        let mut report = FilterReport::empty(tag, self.config, index);
        report.warnings = self.warnings.clone();
        let mut labels = Vec::new();
        for result in per_image {
            let (l, r) = result?;
            labels.extend(l);
            report = report.merge(&r);
        }
        Ok((labels, report))
    }

    /// Accepted labels before duplicate suppression, grouped by image in
    /// ascending id and in detection order within an image.
    pub fn accept_all(&self, detections: &DetectionSet<S>) -> Result<(Vec<PseudoLabel<S>>, FilterReport<S>)> {
        self.run(detections, false)
    }

    /// Full pass: acceptance then per-image duplicate suppression.
    pub fn label(&self, detections: &DetectionSet<S>) -> Result<(Vec<PseudoLabel<S>>, FilterReport<S>)> {
        self.run(detections, true)
    }
}

pub fn pseudolabel_dataset<S: Scalar>(
    detections: &DetectionSet<S>,
    matrix: Option<&CooccurrenceMatrix<S>>,
    config: &FilterConfig<S>,
) -> Result<(Vec<PseudoLabel<S>>, FilterReport<S>)> {
    Labeler::new(*config, matrix)?.label(detections)
}

pub fn pseudo_labels_to_json<S: Scalar>(labels: &[PseudoLabel<S>]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(labels).map_err(|e| Error::parse("labels", e))?;
    text.push('\n');
    Ok(text)
}

pub fn save_pseudo_labels<S: Scalar>(labels: &[PseudoLabel<S>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pseudo_labels_to_json(labels)?).map_err(|e| Error::io(path, e))
}

pub fn load_pseudo_labels<S: Scalar>(path: impl AsRef<Path>) -> Result<Vec<PseudoLabel<S>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let labels: Vec<PseudoLabel<S>> = serde_json::from_str(&text).map_err(|e| Error::parse("labels", e))?;
    for (pos, l) in labels.iter().enumerate() {
        if !l.satisfies_rule() {
            return Err(Error::invalid(
                format!("labels[{pos}]"),
                "recorded confidence does not satisfy its acceptance rule",
            ));
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detections::ClassVector;

    fn det(index: usize, scores: &[f64]) -> Detection<f64> {
        Detection {
            index,
            image_id: 1,
            bbox: BBox::new(index as f64 * 20.0, 0.0, 10.0, 10.0),
            vector: ClassVector::Scores(scores.to_vec()),
        }
    }

    /// Scores with `top` at `class` and the remainder spread evenly.
    fn peaked(n: usize, class: usize, top: f64) -> Vec<f64> {
        crate::detections::expand_scalar_score(top, class, n)
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0f64; 4]).unwrap(), vec![0.25; 4]);
        assert_eq!(softmax(&[123.0f64]).unwrap(), vec![1.0]);
        assert_eq!(softmax(&[-5.0f32]).unwrap(), vec![1.0]);
        let p = softmax(&[2.0f64, 1.0, 0.0]).unwrap();
        // 50-digit reference values
        let expected = [
            0.665_240_955_774_821_9,
            0.244_728_471_054_797_65,
            0.090_030_573_170_380_46,
        ];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(softmax::<f64>(&[]).is_err());
        assert!(matches!(softmax(&[f64::NAN, 1.0]), Err(Error::NonFinite(_))));
        let big = softmax(&[700.0f64, -700.0, 700.0]).unwrap();
        assert_eq!(big, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn one_hot_is_strict() {
        let cfg = FilterConfig::one_hot(0.5);
        assert_eq!(one_hot_accept(&det(0, &[0.0, 1.0]), &cfg).unwrap(), Some((1, 1.0)));
        assert_eq!(one_hot_accept(&det(0, &[0.5, 0.5]), &cfg).unwrap(), None);
        assert_eq!(one_hot_accept(&det(0, &[0.25, 0.75]), &cfg).unwrap(), Some((1, 0.75)));
    }

    #[test]
    fn context_excludes_self_and_weak_detections() {
        let cfg = FilterConfig::cooccurrence(0.5, 0.3);
        let single = [det(0, &peaked(4, 0, 0.9))];
        assert!(build_context(&single, &cfg, 0).unwrap().is_empty());

        // dog 0.9, horse 0.8, bike 0.6, apple 0.55; apple=0 dog=1 horse=2 bike=3
        let image = [
            det(0, &peaked(4, 1, 0.9)),
            det(1, &peaked(4, 2, 0.8)),
            det(2, &peaked(4, 3, 0.6)),
            det(3, &peaked(4, 0, 0.55)),
        ];
        let ctx = build_context(&image, &cfg, 3).unwrap();
        assert_eq!(ctx, BTreeSet::from([1, 2, 3]));

        let weak = [det(0, &peaked(4, 1, 0.9)), det(1, &peaked(4, 2, 0.5))];
        assert_eq!(build_context(&weak, &cfg, 0).unwrap(), BTreeSet::new());

        let twins = [det(0, &peaked(4, 1, 0.9)), det(1, &peaked(4, 1, 0.7))];
        assert_eq!(build_context(&twins, &cfg, 0).unwrap(), BTreeSet::from([1]));
        assert_eq!(build_context(&twins, &cfg, 1).unwrap(), BTreeSet::from([1]));
    }

    #[test]
    fn cooccurrence_accept_arithmetic() {
        let index = CategoryIndex::new(vec![1, 2]);
        let mut m = CooccurrenceMatrix::<f64>::uniform(&index);
        m.normalized[0][1] = 0.4;
        let cfg = FilterConfig::cooccurrence(0.5, 0.3);
        let d = det(0, &[0.6, 0.4]);
        // 0.6 * 0.4 = 0.24 <= 0.3
        assert_eq!(cooccurrence_accept(&d, &BTreeSet::from([1]), &m, &cfg).unwrap(), None);
        // empty context: sigma = 1
        let acc = cooccurrence_accept(&d, &BTreeSet::new(), &m, &cfg).unwrap().unwrap();
        assert_eq!((acc.class, acc.confidence, acc.sigma), (0, 0.6, 1.0));

        let wrong = CooccurrenceMatrix::<f64>::uniform(&CategoryIndex::new(vec![1, 2, 3]));
        assert!(matches!(
            cooccurrence_accept(&d, &BTreeSet::new(), &wrong, &cfg),
            Err(Error::Dimension { .. })
        ));
    }

    fn label(index: usize, class: usize, conf: f64, bbox: BBox<f64>) -> PseudoLabel<f64> {
        PseudoLabel {
            image_id: 1,
            bbox,
            category: class,
            category_id: class as u64 + 1,
            confidence: conf,
            sigma_used: 1.0,
            detection_index: index,
            rule: Rule::OneHot,
            provenance: LabelProvenance {
                source_tag: "t".into(),
                config: FilterConfig::one_hot(0.5),
            },
        }
    }

    #[test]
    fn suppression_cases() {
        let cfg = FilterConfig::<f64>::one_hot(0.5);
        let bx = BBox::new(0.0, 0.0, 10.0, 10.0);
        let kept = suppress_duplicates(vec![label(0, 0, 0.7, bx), label(1, 0, 0.9, bx)], &cfg);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].detection_index, 1);

        let kept = suppress_duplicates(vec![label(0, 0, 0.7, bx), label(1, 1, 0.9, bx)], &cfg);
        assert_eq!(kept.len(), 2);

        let off = FilterConfig {
            nms_enabled: false,
            ..cfg
        };
        assert_eq!(suppress_duplicates(vec![label(0, 0, 0.7, bx), label(1, 0, 0.9, bx)], &off).len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::<f64>::cooccurrence(0.5, 0.3).validate().unwrap().is_empty());
        assert_eq!(FilterConfig::<f64>::cooccurrence(0.5, 0.6).validate().unwrap().len(), 1);
        assert!(FilterConfig::<f64>::one_hot(1.0).validate().is_err());
        assert!(FilterConfig::<f64>::one_hot(0.0).validate().is_err());
        assert!(Labeler::<f64>::new(FilterConfig::cooccurrence(0.5, 0.3), None).is_err());
    }

    #[test]
    fn empty_set_gives_zeroed_report() {
        let index = CategoryIndex::new(vec![1, 2, 3]);
        let set = DetectionSet::<f64>::new("none", index.clone());
        let (labels, report) = pseudolabel_dataset(&set, None, &FilterConfig::one_hot(0.5)).unwrap();
        assert!(labels.is_empty());
        assert_eq!(report.total(), ClassCounts::default());
        assert_eq!(report.per_class.len(), 3);
    }

    #[test]
    fn report_accounts_every_detection() {
        let index = CategoryIndex::new(vec![1, 2]);
        let mut set = DetectionSet::<f64>::new("s", index);
        let bx = BBox::new(0.0, 0.0, 10.0, 10.0);
        set.push(1, bx, ClassVector::Scores(vec![0.9, 0.1])).unwrap();
        set.push(1, bx, ClassVector::Scores(vec![0.8, 0.2])).unwrap();
        set.push(1, bx, ClassVector::Scores(vec![0.4, 0.6])).unwrap();
        set.push(2, bx, ClassVector::Scores(vec![0.5, 0.5])).unwrap();
        let (labels, report) = pseudolabel_dataset(&set, None, &FilterConfig::one_hot(0.5)).unwrap();
        assert_eq!(labels.len(), 2);
        let t = report.total();
        assert_eq!((t.accepted, t.suppressed, t.below_rho), (2, 1, 1));
        assert_eq!(t.seen(), 4);
        assert!(labels.iter().all(PseudoLabel::satisfies_rule));
    }
}
