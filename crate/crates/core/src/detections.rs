//! Raw detector outputs on unlabeled images.
//!
//! Two record forms are accepted, never mixed within one file:
//!
//! * full vector: `{image_id, bbox, scores: [..n]}` or `{image_id, bbox, logits: [..n]}`
//! * COCO results: `{image_id, bbox, category_id, score}`
//!
//! A results record is expanded to a score vector holding `score` at the
//! class index and `(1 - score) / (n - 1)` at every other index.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{CategoryIndex, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Clamp};
use crate::pseudolabel::softmax;
use crate::scalar::Scalar;

/// Tolerance on the sum of a supplied probability vector.
pub const SCORE_SUM_TOLERANCE: f64 = 1e-6;

pub const EXPANSION_RULE: &str =
    "scalar score placed at the category index; remaining mass (1 - score) split uniformly over the other n - 1 classes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[serde(bound = "S: Scalar")]
pub enum ClassVector<S = f64> {
    Scores(Vec<S>),
    Logits(Vec<S>),
}

impl<S: Scalar> ClassVector<S> {
    pub fn len(&self) -> usize {
        match self {
            ClassVector::Scores(v) | ClassVector::Logits(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<S = f64> {
    /// Position within the detection set, in file order.
    pub index: usize,
    pub image_id: u64,
    pub bbox: BBox<S>,
    pub vector: ClassVector<S>,
}

impl<S: Scalar> Detection<S> {
    /// Class probabilities: supplied scores as-is, logits through softmax.
    pub fn probabilities(&self) -> Result<Cow<'_, [S]>> {
        match &self.vector {
            ClassVector::Scores(p) => Ok(Cow::Borrowed(p)),
            ClassVector::Logits(q) => softmax(q).map(Cow::Owned),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet<S = f64> {
    pub source_tag: String,
    pub categories: CategoryIndex,
    by_image: BTreeMap<u64, Vec<Detection<S>>>,
    len: usize,
}

impl<S: Scalar> DetectionSet<S> {
    pub fn new(source_tag: impl Into<String>, categories: CategoryIndex) -> Self {
        Self {
            source_tag: source_tag.into(),
            categories,
            by_image: BTreeMap::new(),
            len: 0,
        }
    }

    /// Appends a detection and assigns it the next index.
    pub fn push(&mut self, image_id: u64, bbox: BBox<S>, vector: ClassVector<S>) -> Result<usize> {
        if vector.len() != self.categories.len() {
            return Err(Error::Dimension {
                what: format!("detection {}", self.len),
                expected: self.categories.len(),
                found: vector.len(),
            });
        }
        let index = self.len;
        self.by_image.entry(image_id).or_default().push(Detection {
            index,
            image_id,
            bbox,
            vector,
        });
        self.len += 1;
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_classes(&self) -> usize {
        self.categories.len()
    }

    /// Image ids with at least one detection, ascending.
    pub fn image_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.by_image.keys().copied()
    }

    pub fn for_image(&self, image_id: u64) -> &[Detection<S>] {
        self.by_image.get(&image_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn groups(&self) -> impl Iterator<Item = (u64, &[Detection<S>])> + '_ {
        self.by_image.iter().map(|(&id, d)| (id, d.as_slice()))
    }

    /// All detections in index order.
    pub fn iter(&self) -> impl Iterator<Item = &Detection<S>> + '_ {
        let mut all: Vec<&Detection<S>> = self.by_image.values().flatten().collect();
        all.sort_by_key(|d| d.index);
        all.into_iter()
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        #[serde(bound = "S: Scalar")]
        struct Out<'a, S> {
            image_id: u64,
            bbox: BBox<S>,
            #[serde(flatten)]
            vector: &'a ClassVector<S>,
        }
        let out: Vec<Out<'_, S>> = self
            .iter()
            .map(|d| Out {
                image_id: d.image_id,
                bbox: d.bbox,
                vector: &d.vector,
            })
            .collect();
        let mut text = serde_json::to_string(&out).map_err(|e| Error::parse("detections", e))?;
        text.push('\n');
        Ok(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionFormat {
    Empty,
    FullVector,
    CocoResults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLoadReport {
    pub format: DetectionFormat,
    pub records: usize,
    /// Number of results records expanded to full vectors.
    pub expanded: usize,
    pub expansion_rule: Option<String>,
    /// File positions of boxes clamped to their image.
    pub clamped: Vec<usize>,
    /// File positions of boxes dropped for lack of area.
    pub dropped: Vec<usize>,
}

/// Expands a single-class results score into a full probability vector.
pub fn expand_scalar_score<S: Scalar>(score: S, class: usize, n: usize) -> Vec<S> {
    if n == 1 {
        return vec![score];
    }
    let rest = (S::one() - score) / S::from_count(n - 1);
    (0..n).map(|j| if j == class { score } else { rest }).collect()
}

fn check_scores<S: Scalar>(record: &str, scores: &[S]) -> Result<()> {
    if scores.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite(record.to_string()));
    }
    if scores.iter().any(|&p| p < S::zero() || p > S::one()) {
        return Err(Error::invalid(record, "score outside [0, 1]"));
    }
    let sum: f64 = scores.iter().map(|p| p.as_f64()).sum();
    if (sum - 1.0).abs() > SCORE_SUM_TOLERANCE {
        return Err(Error::Normalization {
            record: record.to_string(),
            sum,
            tolerance: SCORE_SUM_TOLERANCE,
        });
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(bound = "S: Scalar")]
struct RawRecord<S> {
    image_id: u64,
    bbox: BBox<S>,
    #[serde(default)]
    scores: Option<Vec<S>>,
    #[serde(default)]
    logits: Option<Vec<S>>,
    #[serde(default)]
    category_id: Option<u64>,
    #[serde(default)]
    score: Option<S>,
}

/// Parses a detection file body against the image universe and class list.
pub fn parse_detections<S: Scalar>(
    text: &str,
    images: &[ImageRecord],
    categories: &CategoryIndex,
    source_tag: &str,
) -> Result<(DetectionSet<S>, DetectionLoadReport)> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::parse("file", e))?;
    let Value::Array(items) = value else {
        return Err(Error::parse("file", "detection file must be a JSON array"));
    };
    let dims: HashMap<u64, (u32, u32)> =
        images.iter().map(|im| (im.id, (im.width, im.height))).collect();
    let n = categories.len();
    let mut set = DetectionSet::new(source_tag, categories.clone());
    let mut report = DetectionLoadReport {
        format: DetectionFormat::Empty,
        records: items.len(),
        expanded: 0,
        expansion_rule: None,
        clamped: Vec::new(),
        dropped: Vec::new(),
    };

    for (pos, item) in items.into_iter().enumerate() {
        let record = format!("detections[{pos}]");
        let raw: RawRecord<S> = serde_json::from_value(item).map_err(|e| Error::parse(&record, e))?;
        let (format, vector) = match (raw.scores, raw.logits, raw.category_id, raw.score) {
            (Some(scores), None, None, None) => {
                if scores.len() != n {
                    return Err(Error::Dimension {
                        what: record,
                        expected: n,
                        found: scores.len(),
                    });
                }
                check_scores(&record, &scores)?;
                (DetectionFormat::FullVector, ClassVector::Scores(scores))
            }
            (None, Some(logits), None, None) => {
                if logits.len() != n {
                    return Err(Error::Dimension {
                        what: record,
                        expected: n,
                        found: logits.len(),
                    });
                }
                if logits.iter().any(|q| !q.is_finite()) {
                    return Err(Error::NonFinite(record));
                }
                (DetectionFormat::FullVector, ClassVector::Logits(logits))
            }
            (None, None, Some(category_id), Some(score)) => {
                let class = categories.index_of(category_id).ok_or(Error::Referential {
                    record: record.clone(),
                    kind: "category",
                    id: category_id,
                })?;
                if !score.is_finite() || score < S::zero() || score > S::one() {
                    return Err(Error::invalid(&record, "score outside [0, 1]"));
                }
                report.expanded += 1;
                (
                    DetectionFormat::CocoResults,
                    ClassVector::Scores(expand_scalar_score(score, class, n)),
                )
            }
            _ => {
                return Err(Error::parse(
                    record,
                    "expected exactly one of `scores`, `logits`, or `category_id` with `score`",
                ))
            }
        };
        match report.format {
            DetectionFormat::Empty => report.format = format,
            current if current != format => {
                return Err(Error::MixedFormats(format!(
                    "{record} is {format:?} but earlier records are {current:?}"
                )))
            }
            _ => {}
        }

        let &(width, height) = dims.get(&raw.image_id).ok_or(Error::Referential {
            record: record.clone(),
            kind: "image",
            id: raw.image_id,
        })?;
        if !raw.bbox.is_finite() {
            return Err(Error::NonFinite(record));
        }
        let bbox = match raw.bbox.clamp_to(S::lit(width as f64), S::lit(height as f64)) {
            Clamp::Inside(b) => b,
            Clamp::Clamped(b) => {
                report.clamped.push(pos);
                b
            }
            Clamp::Empty => {
                report.dropped.push(pos);
                continue;
            }
        };
        set.push(raw.image_id, bbox, vector)?;
    }

    if report.expanded > 0 {
        report.expansion_rule = Some(EXPANSION_RULE.to_string());
        log::info!("expanded {} results records: {EXPANSION_RULE}", report.expanded);
    }
    if !report.clamped.is_empty() || !report.dropped.is_empty() {
        log::warn!(
            "clamped {} and dropped {} detection boxes",
            report.clamped.len(),
            report.dropped.len()
        );
    }
    Ok((set, report))
}

pub fn load_detections<S: Scalar>(
    path: impl AsRef<Path>,
    images: &[ImageRecord],
    categories: &CategoryIndex,
    source_tag: &str,
) -> Result<(DetectionSet<S>, DetectionLoadReport)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text, images, categories, source_tag)
}

pub fn save_detections<S: Scalar>(set: &DetectionSet<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, set.to_json()?).map_err(|e| Error::io(path, e))
}
