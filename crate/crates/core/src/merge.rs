//! Augmented training set assembly: base annotations plus accepted
//! pseudo-labels on previously unlabeled images.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{AnnotatedDataset, GroundTruthBox, ImageRecord, Provenance};
use crate::error::{Error, Result};
use crate::geometry::Clamp;
use crate::pseudolabel::{pseudo_labels_to_json, PseudoLabel};
use crate::scalar::Scalar;

/// How unlabeled image ids are mapped into the merged dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdPolicy {
    /// Keep ids; a collision with a base image id is an error.
    #[default]
    Preserve,
    /// Renumber unlabeled images consecutively above the largest base id.
    Offset,
}

#[derive(Debug, Clone)]
pub struct MergePlan<'a, S: Scalar> {
    pub base: &'a AnnotatedDataset<S>,
    pub unlabeled_images: &'a [ImageRecord],
    pub labels: &'a [PseudoLabel<S>],
    pub id_policy: IdPolicy,
    /// Keep unlabeled images that received no labels.
    pub include_empty_images: bool,
}

impl<'a, S: Scalar> MergePlan<'a, S> {
    pub fn new(
        base: &'a AnnotatedDataset<S>,
        unlabeled_images: &'a [ImageRecord],
        labels: &'a [PseudoLabel<S>],
    ) -> Self {
        Self {
            base,
            unlabeled_images,
            labels,
            id_policy: IdPolicy::Preserve,
            include_empty_images: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeClassCounts {
    pub category_id: u64,
    pub name: String,
    pub human: usize,
    pub pseudo: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub batch: String,
    pub base_images: usize,
    pub added_images: usize,
    pub excluded_empty_images: usize,
    pub base_annotations: usize,
    pub pseudo_annotations: usize,
    /// Annotation counts keyed by `human` or the pseudo-label source tag.
    pub per_source: BTreeMap<String, usize>,
    pub per_class: Vec<MergeClassCounts>,
    /// Unlabeled image id to merged image id, only where they differ.
    pub image_id_remap: BTreeMap<u64, u64>,
    /// Annotation ids of pseudo-labels whose boxes had to be clamped.
    pub clamped: Vec<u64>,
}

impl MergeReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::parse("report", e))?;
        text.push('\n');
        Ok(text)
    }
}

/// SHA-256 of the serialized label list.
pub fn label_batch_fingerprint<S: Scalar>(labels: &[PseudoLabel<S>]) -> Result<String> {
    let text = pseudo_labels_to_json(labels)?;
    Ok(format!("{:x}", Sha256::digest(text.as_bytes())))
}

pub fn merge<S: Scalar>(plan: &MergePlan<'_, S>) -> Result<(AnnotatedDataset<S>, MergeReport)> {
    let base = plan.base;
    base.validate()?;
    let batch = label_batch_fingerprint(plan.labels)?;
    if base
        .annotations
        .iter()
        .any(|a| a.pseudo_label.as_ref().is_some_and(|p| p.batch == batch))
    {
        return Err(Error::DuplicateMerge(batch));
    }

    let mut seen = HashSet::new();
    for im in plan.unlabeled_images {
        if !seen.insert(im.id) {
            return Err(Error::IdCollision(format!(
                "unlabeled image id {} appears more than once",
                im.id
            )));
        }
    }

    let base_ids: HashSet<u64> = base.images.iter().map(|im| im.id).collect();
    let mut remap: HashMap<u64, u64> = HashMap::new();
    match plan.id_policy {
        IdPolicy::Preserve => {
            for im in plan.unlabeled_images {
                if base_ids.contains(&im.id) {
                    return Err(Error::IdCollision(format!(
                        "unlabeled image id {} already exists in the base dataset",
                        im.id
                    )));
                }
                remap.insert(im.id, im.id);
            }
        }
        IdPolicy::Offset => {
            let start = base.images.iter().map(|im| im.id).max().map_or(0, |m| m + 1);
            for (k, im) in plan.unlabeled_images.iter().enumerate() {
                let id = start.checked_add(k as u64).ok_or_else(|| {
                    Error::IdCollision("image ids overflow while offsetting".to_string())
                })?;
                remap.insert(im.id, id);
            }
        }
    }

    let dims: HashMap<u64, &ImageRecord> = plan.unlabeled_images.iter().map(|im| (im.id, im)).collect();
    let category_ids: HashSet<u64> = base.categories.iter().map(|c| c.id).collect();
    let first_ann = base.annotations.iter().map(|a| a.id).max().map_or(1, |m| m + 1);
    let mut report = MergeReport {
        batch: batch.clone(),
        base_images: base.images.len(),
        base_annotations: base.annotations.len(),
        ..MergeReport::default()
    };

    let mut labelled_images = HashSet::new();
    let mut added = Vec::with_capacity(plan.labels.len());
    for ((pos, label), id) in plan.labels.iter().enumerate().zip(first_ann..) {
        let record = format!("pseudo-label {pos}");
        let image = dims.get(&label.image_id).ok_or(Error::Referential {
            record: record.clone(),
            kind: "unlabeled image",
            id: label.image_id,
        })?;
        if !category_ids.contains(&label.category_id) {
            return Err(Error::Referential {
                record,
                kind: "category",
                id: label.category_id,
            });
        }
        let bbox = match label
            .bbox
            .clamp_to(S::lit(image.width as f64), S::lit(image.height as f64))
        {
            Clamp::Inside(b) => b,
            Clamp::Clamped(b) => {
                report.clamped.push(id);
                b
            }
            Clamp::Empty => return Err(Error::invalid(record, "bbox lies outside its image")),
        };
        labelled_images.insert(label.image_id);
        added.push(GroundTruthBox {
            id,
            image_id: remap[&label.image_id],
            category_id: label.category_id,
            bbox,
            pseudo_label: Some(Provenance {
                source_tag: label.provenance.source_tag.clone(),
                batch: batch.clone(),
                confidence: label.confidence,
                sigma: label.sigma_used,
            }),
        });
    }

    let mut images = base.images.clone();
    for im in plan.unlabeled_images {
        if !plan.include_empty_images && !labelled_images.contains(&im.id) {
            report.excluded_empty_images += 1;
            continue;
        }
        let new_id = remap[&im.id];
        if new_id != im.id {
            report.image_id_remap.insert(im.id, new_id);
        }
        images.push(ImageRecord {
            id: new_id,
            ..im.clone()
        });
        report.added_images += 1;
    }

    let mut annotations = base.annotations.clone();
    annotations.extend(added);
    let merged = AnnotatedDataset {
        images,
        categories: base.categories.clone(),
        annotations,
    };
    merged.validate()?;

    report.pseudo_annotations = plan.labels.len();
    let mut per_class: BTreeMap<u64, MergeClassCounts> = base
        .categories
        .iter()
        .map(|c| {
            (
                c.id,
                MergeClassCounts {
                    category_id: c.id,
                    name: c.name.clone(),
                    ..MergeClassCounts::default()
                },
            )
        })
        .collect();
    for ann in &merged.annotations {
        let counts = per_class.get_mut(&ann.category_id).expect("validated category");
        let source = match &ann.pseudo_label {
            Some(p) => {
                counts.pseudo += 1;
                p.source_tag.clone()
            }
            None => {
                counts.human += 1;
                "human".to_string()
            }
        };
        *report.per_source.entry(source).or_default() += 1;
    }
    report.per_class = per_class.into_values().collect();
    Ok((merged, report))
}
