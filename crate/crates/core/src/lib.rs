//! Co-occurrence filtered pseudo-labeling for object detection.
//!
//! The pipeline builds a class co-occurrence prior from an annotated
//! dataset, filters raw detections on unlabeled images by softmax
//! thresholding and co-occurrence rescoring, merges the accepted
//! pseudo-labels into an augmented dataset and evaluates label quality with
//! COCO-style mAP.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar for the common cases.

pub mod cooccurrence;
pub mod dataset;
pub mod detections;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod merge;
pub mod pseudolabel;
pub mod scalar;
pub mod sim;

pub use cooccurrence::{build_cooccurrence, load_matrix, save_matrix, sigma, CooccurrenceConfig, Orientation};
pub use dataset::{
    load_annotations, load_image_list, save_annotations, save_annotations_with, Category, CategoryIndex,
    ImageRecord, LoadReport, SaveOptions,
};
pub use detections::{load_detections, save_detections, ClassVector, DetectionFormat, DetectionLoadReport};
pub use error::{Error, Result};
pub use eval::{average_precision, evaluate, iou, match_detections, Interpolation, Matching};
pub use merge::{merge, IdPolicy, MergeReport};
pub use pseudolabel::{
    build_context, cooccurrence_accept, load_pseudo_labels, one_hot_accept, pseudo_labels_to_json, pseudolabel_dataset,
    save_pseudo_labels, softmax, suppress_duplicates, Labeler, Rule,
};
pub use scalar::Scalar;
pub use sim::{scene_dataset, simulate, NoiseModel, SceneSpec, TruthSidecar};

pub type BBox = geometry::BBox<f64>;
pub type BBox32 = geometry::BBox<f32>;
pub type Dataset = dataset::AnnotatedDataset<f64>;
pub type Dataset32 = dataset::AnnotatedDataset<f32>;
pub type GroundTruthBox = dataset::GroundTruthBox<f64>;
pub type Detection = detections::Detection<f64>;
pub type Detection32 = detections::Detection<f32>;
pub type DetectionSet = detections::DetectionSet<f64>;
pub type DetectionSet32 = detections::DetectionSet<f32>;
pub type CooccurrenceMatrix = cooccurrence::CooccurrenceMatrix<f64>;
pub type CooccurrenceMatrix32 = cooccurrence::CooccurrenceMatrix<f32>;
pub type FilterConfig = pseudolabel::FilterConfig<f64>;
pub type FilterConfig32 = pseudolabel::FilterConfig<f32>;
pub type FilterReport = pseudolabel::FilterReport<f64>;
pub type PseudoLabel = pseudolabel::PseudoLabel<f64>;
pub type PseudoLabel32 = pseudolabel::PseudoLabel<f32>;
pub type MergePlan<'a> = merge::MergePlan<'a, f64>;
pub type Prediction = eval::Prediction<f64>;
pub type Protocol = eval::Protocol<f64>;
pub type EvalReport = eval::EvalReport<f64>;
pub type EvalReport32 = eval::EvalReport<f32>;
