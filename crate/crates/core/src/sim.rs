//! Seeded synthetic detector.
//!
//! Ground truth boxes are turned into noisy detections: each box survives
//! with probability `p_detect`, is jittered, and gets logits
//! `logit_scale * one_hot(class) + N(0, 1)` where the class is drawn from the
//! confusion row of its true class. Each image additionally receives
//! `Poisson(fp_rate)` false positives at uniform random boxes.
//!
//! Every image draws from its own ChaCha stream (`seed`, stream = image id),
//! so generation is order- and thread-count independent.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotatedDataset, Category, GroundTruthBox, ImageRecord};
use crate::detections::{ClassVector, DetectionSet};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Clamp};
use crate::scalar::Scalar;

const CONFUSION_ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub seed: u64,
    pub p_detect: f64,
    /// Std of center shift and size scaling, relative to box size.
    pub box_jitter: f64,
    pub logit_scale: f64,
    /// Row-stochastic `n x n`; `None` means the identity.
    #[serde(default)]
    pub confusion: Option<Vec<Vec<f64>>>,
    /// Expected false positives per image.
    pub fp_rate: f64,
    /// False-positive classes ignore the scene when set, and are drawn from
    /// the classes already present in the image otherwise.
    pub contextual_fp: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            seed: 0,
            p_detect: 0.9,
            box_jitter: 0.05,
            logit_scale: 5.0,
            confusion: None,
            fp_rate: 1.0,
            contextual_fp: true,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |what: &str, msg: &str| Err(Error::invalid(format!("noise model {what}"), msg));
        if !(0.0..=1.0).contains(&self.p_detect) {
            return bad("p_detect", "must be in [0, 1]");
        }
        if !(self.box_jitter.is_finite() && self.box_jitter >= 0.0) {
            return bad("box_jitter", "must be finite and non-negative");
        }
        if !(self.logit_scale.is_finite() && self.logit_scale >= 0.0) {
            return bad("logit_scale", "must be finite and non-negative");
        }
        if !(self.fp_rate.is_finite() && self.fp_rate >= 0.0) {
            return bad("fp_rate", "must be finite and non-negative");
        }
        if let Some(rows) = &self.confusion {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Dimension {
                    what: "confusion matrix".to_string(),
                    expected: n,
                    found: rows.len(),
                });
            }
            for (i, row) in rows.iter().enumerate() {
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return bad("confusion", &format!("row {i} has entries outside [0, 1]"));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > CONFUSION_ROW_TOLERANCE {
                    return bad("confusion", &format!("row {i} sums to {sum}"));
                }
            }
        }
        Ok(())
    }

    /// Confusion keeping the true class with `p_correct` and spreading the
    /// rest uniformly.
    pub fn uniform_confusion(n: usize, p_correct: f64) -> Vec<Vec<f64>> {
        if n == 1 {
            return vec![vec![1.0]];
        }
        let off = (1.0 - p_correct) / (n - 1) as f64;
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { p_correct } else { off }).collect())
            .collect()
    }
}

/// Hidden link from a simulated detection back to what generated it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLink {
    pub detection_index: usize,
    pub image_id: u64,
    /// Generating annotation id; `None` for a false positive.
    pub annotation_id: Option<u64>,
    pub true_category_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub source_tag: String,
    pub model: NoiseModel,
    pub category_ids: Vec<u64>,
    pub links: Vec<TruthLink>,
}

impl TruthSidecar {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::parse("sidecar", e))?;
        text.push('\n');
        Ok(text)
    }
}

#[derive(Debug, Clone)]
pub struct Simulation<S: Scalar> {
    pub detections: DetectionSet<S>,
    pub truth: TruthSidecar,
}

struct RawDetection {
    bbox: [f64; 4],
    logits: Vec<f64>,
    annotation: Option<(u64, u64)>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_class(rng: &mut ChaCha8Rng, row: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // rounding left u above the final cumulative sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn logits_for(rng: &mut ChaCha8Rng, n: usize, class: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|j| if j == class { scale } else { 0.0 } + normal(rng))
        .collect()
}

fn simulate_image<S: Scalar>(
    image: &ImageRecord,
    truths: &[&GroundTruthBox<S>],
    model: &NoiseModel,
    class_of: &dyn Fn(u64) -> usize,
    n: usize,
) -> Vec<RawDetection> {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(image.id);
    let (width, height) = (image.width as f64, image.height as f64);
    let mut out = Vec::new();

    for truth in truths {
        let keep: f64 = rng.random();
        if keep >= model.p_detect {
            continue;
        }
        let b = truth.bbox;
        let (x, y, w, h) = (b.x.as_f64(), b.y.as_f64(), b.w.as_f64(), b.h.as_f64());
        let bbox = if model.box_jitter > 0.0 {
            let cx = x + 0.5 * w + normal(&mut rng) * model.box_jitter * w;
            let cy = y + 0.5 * h + normal(&mut rng) * model.box_jitter * h;
            let nw = w * (1.0 + normal(&mut rng) * model.box_jitter).max(0.05);
            let nh = h * (1.0 + normal(&mut rng) * model.box_jitter).max(0.05);
            [cx - 0.5 * nw, cy - 0.5 * nh, nw, nh]
        } else {
            [x, y, w, h]
        };
        let true_class = class_of(truth.category_id);
        let class = match &model.confusion {
            Some(rows) => draw_class(&mut rng, &rows[true_class]),
            None => true_class,
        };
        let logits = logits_for(&mut rng, n, class, model.logit_scale);
        out.push(RawDetection {
            bbox,
            logits,
            annotation: Some((truth.id, truth.category_id)),
        });
    }

    if model.fp_rate > 0.0 {
        let count: f64 = Poisson::new(model.fp_rate)
            .expect("positive rate")
            .sample(&mut rng);
        let present: Vec<usize> = truths
            .iter()
            .map(|t| class_of(t.category_id))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for _ in 0..count as usize {
            let w = width * rng.random_range(0.05..0.4);
            let h = height * rng.random_range(0.05..0.4);
            let x = rng.random_range(0.0..(width - w));
            let y = rng.random_range(0.0..(height - h));
            let class = if model.contextual_fp || present.is_empty() {
                rng.random_range(0..n)
            } else {
                present[rng.random_range(0..present.len())]
            };
            let logits = logits_for(&mut rng, n, class, model.logit_scale);
            out.push(RawDetection {
                bbox: [x, y, w, h],
                logits,
                annotation: None,
            });
        }
    }
    out
}

/// Simulates detector output over every image of `dataset`.
pub fn simulate<S: Scalar>(
    dataset: &AnnotatedDataset<S>,
    model: &NoiseModel,
    source_tag: &str,
) -> Result<Simulation<S>> {
    let index = dataset.category_index();
    let n = index.len();
    model.validate(n)?;
    dataset.validate()?;

    let by_image = dataset.annotations_by_image();
    let mut images: Vec<&ImageRecord> = dataset.images.iter().collect();
    images.sort_by_key(|im| im.id);
    let class_of = |id: u64| index.index_of(id).expect("validated category");

    let generated: Vec<Vec<RawDetection>> = images
        .par_iter()
        .map(|image| {
            let mut truths: Vec<&GroundTruthBox<S>> =
                by_image.get(&image.id).cloned().unwrap_or_default();
            truths.sort_by_key(|t| t.id);
            simulate_image(image, &truths, model, &class_of, n)
        })
        .collect();

    let mut detections = DetectionSet::new(source_tag, index.clone());
    let mut links = Vec::new();
    for (image, raws) in images.iter().zip(generated) {
        let (width, height) = (S::lit(image.width as f64), S::lit(image.height as f64));
        for raw in raws {
            let [x, y, w, h] = raw.bbox.map(S::lit);
            let bbox = match BBox::new(x, y, w, h).clamp_to(width, height) {
                Clamp::Inside(b) | Clamp::Clamped(b) => b,
                Clamp::Empty => continue,
            };
            let logits = raw.logits.into_iter().map(S::lit).collect();
            let detection_index = detections.push(image.id, bbox, ClassVector::Logits(logits))?;
            links.push(TruthLink {
                detection_index,
                image_id: image.id,
                annotation_id: raw.annotation.map(|a| a.0),
                true_category_id: raw.annotation.map(|a| a.1),
            });
        }
    }

    Ok(Simulation {
        detections,
        truth: TruthSidecar {
            source_tag: source_tag.to_string(),
            model: model.clone(),
            category_ids: index.ids().to_vec(),
            links,
        },
    })
}

/// Synthetic dataset whose classes fall into disjoint scenes: every image
/// depicts one scene and only holds objects of that scene's classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub images: usize,
    pub scenes: usize,
    pub classes_per_scene: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub width: u32,
    pub height: u32,
    pub first_image_id: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            images: 200,
            scenes: 4,
            classes_per_scene: 3,
            min_objects: 2,
            max_objects: 4,
            width: 640,
            height: 480,
            first_image_id: 1,
        }
    }
}

pub fn scene_dataset<S: Scalar>(spec: &SceneSpec) -> Result<AnnotatedDataset<S>> {
    if spec.scenes == 0 || spec.classes_per_scene == 0 {
        return Err(Error::invalid("scene spec", "needs at least one scene and class"));
    }
    if spec.min_objects > spec.max_objects || spec.width < 8 || spec.height < 8 {
        return Err(Error::invalid("scene spec", "inconsistent object count or image size"));
    }
    let n = spec.scenes * spec.classes_per_scene;
    let categories: Vec<Category> = (0..n)
        .map(|c| Category {
            id: c as u64 + 1,
            name: format!("scene{}_object{}", c / spec.classes_per_scene, c % spec.classes_per_scene),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (width, height) = (spec.width as f64, spec.height as f64);
    let mut images = Vec::with_capacity(spec.images);
    let mut annotations = Vec::new();
    for k in 0..spec.images {
        let id = spec.first_image_id + k as u64;
        images.push(ImageRecord {
            id,
            width: spec.width,
            height: spec.height,
            file_name: format!("synthetic_{id:06}.jpg"),
        });
        let scene = rng.random_range(0..spec.scenes);
        let count = rng.random_range(spec.min_objects..=spec.max_objects);
        for _ in 0..count {
            let class = scene * spec.classes_per_scene + rng.random_range(0..spec.classes_per_scene);
            let w = (width * rng.random_range(0.1..0.3)).round();
            let h = (height * rng.random_range(0.1..0.3)).round();
            let x = rng.random_range(0.0..(width - w)).round();
            let y = rng.random_range(0.0..(height - h)).round();
            annotations.push(GroundTruthBox {
                id: annotations.len() as u64 + 1,
                image_id: id,
                category_id: class as u64 + 1,
                bbox: BBox::new(S::lit(x), S::lit(y), S::lit(w), S::lit(h)),
                pseudo_label: None,
            });
        }
    }
    let dataset = AnnotatedDataset {
        images,
        categories,
        annotations,
    };
    dataset.validate()?;
    Ok(dataset)
}
