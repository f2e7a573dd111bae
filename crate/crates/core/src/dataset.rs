//! Annotated dataset model and the COCO-subset annotation file.
//!
//! The file is a JSON object with `images`, `categories` and `annotations`.
//! Fields outside that subset are ignored with a warning. Boxes that overflow
//! their image are clamped; boxes left without area are dropped. Both are
//! listed in the [`LoadReport`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Clamp};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub file_name: String,
}

/// Marks an annotation as machine generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Provenance<S = f64> {
    pub source_tag: String,
    /// Fingerprint of the label batch the annotation was merged from.
    pub batch: String,
    pub confidence: S,
    pub sigma: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct GroundTruthBox<S = f64> {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudo_label: Option<Provenance<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct AnnotatedDataset<S = f64> {
    pub images: Vec<ImageRecord>,
    pub categories: Vec<Category>,
    pub annotations: Vec<GroundTruthBox<S>>,
}

/// Positional class indices: index `j` is the `j`-th smallest category id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryIndex {
    ids: Vec<u64>,
}

impl CategoryIndex {
    pub fn new(mut ids: Vec<u64>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn index_of(&self, category_id: u64) -> Option<usize> {
        self.ids.binary_search(&category_id).ok()
    }

    pub fn id_of(&self, index: usize) -> Option<u64> {
        self.ids.get(index).copied()
    }
}

/// What loading had to repair or skip.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Annotation ids whose boxes were clamped to the image.
    pub clamped: Vec<u64>,
    /// Annotation ids dropped because nothing of positive area remained.
    pub dropped: Vec<u64>,
    pub ignored_fields: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaveOptions {
    /// Emit only the COCO subset: no `category_index` header and no
    /// `pseudo_label` extension on annotations.
    pub strict_coco: bool,
}

impl<S: Scalar> AnnotatedDataset<S> {
    pub fn category_index(&self) -> CategoryIndex {
        CategoryIndex::new(self.categories.iter().map(|c| c.id).collect())
    }

    pub fn num_classes(&self) -> usize {
        self.categories.len()
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.images.iter().find(|im| im.id == id)
    }

    pub fn category_name(&self, id: u64) -> Option<&str> {
        self.categories
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.name.as_str())
    }

    /// Annotations grouped by image id, in input order within each image.
    pub fn annotations_by_image(&self) -> BTreeMap<u64, Vec<&GroundTruthBox<S>>> {
        let mut map: BTreeMap<u64, Vec<&GroundTruthBox<S>>> = BTreeMap::new();
        for ann in &self.annotations {
            map.entry(ann.image_id).or_default().push(ann);
        }
        map
    }

    /// Checks every id, reference and box invariant.
    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::invalid("dataset", "at least one category is required"));
        }
        let mut names = HashSet::new();
        let mut cat_ids = HashSet::new();
        for c in &self.categories {
            if !cat_ids.insert(c.id) {
                return Err(Error::DuplicateId {
                    kind: "category",
                    id: c.id,
                });
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::DuplicateName(c.name.clone()));
            }
        }
        let mut images = HashMap::new();
        for im in &self.images {
            if im.width == 0 || im.height == 0 {
                return Err(Error::invalid(
                    format!("image {}", im.id),
                    "width and height must be positive",
                ));
            }
            if images.insert(im.id, im).is_some() {
                return Err(Error::DuplicateId {
                    kind: "image",
                    id: im.id,
                });
            }
        }
        let mut ann_ids = HashSet::new();
        for ann in &self.annotations {
            let record = format!("annotation {}", ann.id);
            if !ann_ids.insert(ann.id) {
                return Err(Error::DuplicateId {
                    kind: "annotation",
                    id: ann.id,
                });
            }
            let image = images.get(&ann.image_id).ok_or(Error::Referential {
                record: record.clone(),
                kind: "image",
                id: ann.image_id,
            })?;
            if !cat_ids.contains(&ann.category_id) {
                return Err(Error::Referential {
                    record,
                    kind: "category",
                    id: ann.category_id,
                });
            }
            if !ann
                .bbox
                .fits(S::lit(image.width as f64), S::lit(image.height as f64))
            {
                return Err(Error::invalid(record, "bbox does not fit its image"));
            }
        }
        Ok(())
    }

    /// Order-independent SHA-256 over categories, image ids and the
    /// (image, category) multiset of annotations.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let mut cats: Vec<_> = self.categories.iter().map(|c| (c.id, &c.name)).collect();
        cats.sort();
        for (id, name) in cats {
            hasher.update(id.to_le_bytes());
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        let mut image_ids: Vec<u64> = self.images.iter().map(|im| im.id).collect();
        image_ids.sort_unstable();
        hasher.update(b"images");
        for id in image_ids {
            hasher.update(id.to_le_bytes());
        }
        let mut pairs: Vec<(u64, u64)> = self
            .annotations
            .iter()
            .map(|a| (a.image_id, a.category_id))
            .collect();
        pairs.sort_unstable();
        hasher.update(b"annotations");
        for (im, cat) in pairs {
            hasher.update(im.to_le_bytes());
            hasher.update(cat.to_le_bytes());
        }
        format!("{:x}", hasher.finalize())
    }

    pub fn to_json(&self, options: SaveOptions) -> Result<String> {
        #[derive(Serialize)]
        #[serde(bound = "S: Scalar")]
        struct Out<'a, S> {
            #[serde(skip_serializing_if = "Option::is_none")]
            category_index: Option<&'a [u64]>,
            images: &'a [ImageRecord],
            categories: &'a [Category],
            annotations: Vec<GroundTruthBox<S>>,
        }
        let index = self.category_index();
        let annotations = self
            .annotations
            .iter()
            .map(|a| {
                let mut a = a.clone();
                if options.strict_coco {
                    a.pseudo_label = None;
                }
                a
            })
            .collect();
        let out = Out {
            category_index: (!options.strict_coco).then_some(index.ids()),
            images: &self.images,
            categories: &self.categories,
            annotations,
        };
        let mut text =
            serde_json::to_string_pretty(&out).map_err(|e| Error::parse("dataset", e))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<(Self, LoadReport)> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::parse("file", e))?;
        parse_dataset(value)
    }
}

#[derive(Deserialize)]
struct RawImage {
    id: u64,
    width: u32,
    height: u32,
    file_name: String,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawCategory {
    id: u64,
    name: String,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
#[serde(bound = "S: Scalar")]
struct RawAnnotation<S> {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: BBox<S>,
    #[serde(default)]
    pseudo_label: Option<Provenance<S>>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

const TOP_LEVEL_KEYS: [&str; 4] = ["images", "categories", "annotations", "category_index"];

fn record_array<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a [Value]> {
    match obj.get(key) {
        Some(Value::Array(items)) => Ok(items),
        Some(_) => Err(Error::parse(key, "expected an array")),
        None => Err(Error::parse("file", format!("missing required key `{key}`"))),
    }
}

fn record_label(kind: &str, pos: usize, value: &Value) -> String {
    match value.get("id").and_then(Value::as_u64) {
        Some(id) => format!("{kind}[{pos}] (id {id})"),
        None => format!("{kind}[{pos}]"),
    }
}

fn note_extra(report: &mut LoadReport, record: &str, extra: &BTreeMap<String, Value>) {
    for key in extra.keys() {
        report.ignored_fields.push(format!("{record}.{key}"));
    }
}

fn parse_dataset<S: Scalar>(value: Value) -> Result<(AnnotatedDataset<S>, LoadReport)> {
    let Value::Object(obj) = value else {
        return Err(Error::parse("file", "top level must be a JSON object"));
    };
    let mut report = LoadReport::default();
    for key in obj.keys() {
        if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
            report.ignored_fields.push(key.clone());
        }
    }

    let mut images = Vec::new();
    for (pos, v) in record_array(&obj, "images")?.iter().enumerate() {
        let record = record_label("images", pos, v);
        let raw: RawImage = serde_json::from_value(v.clone()).map_err(|e| Error::parse(&record, e))?;
        note_extra(&mut report, &record, &raw.extra);
        images.push(ImageRecord {
            id: raw.id,
            width: raw.width,
            height: raw.height,
            file_name: raw.file_name,
        });
    }

    let mut categories = Vec::new();
    for (pos, v) in record_array(&obj, "categories")?.iter().enumerate() {
        let record = record_label("categories", pos, v);
        let raw: RawCategory =
            serde_json::from_value(v.clone()).map_err(|e| Error::parse(&record, e))?;
        note_extra(&mut report, &record, &raw.extra);
        categories.push(Category {
            id: raw.id,
            name: raw.name,
        });
    }

    let image_dims: HashMap<u64, (u32, u32)> =
        images.iter().map(|im| (im.id, (im.width, im.height))).collect();
    let category_ids: BTreeSet<u64> = categories.iter().map(|c| c.id).collect();

    let mut annotations = Vec::new();
    for (pos, v) in record_array(&obj, "annotations")?.iter().enumerate() {
        let record = record_label("annotations", pos, v);
        let raw: RawAnnotation<S> =
            serde_json::from_value(v.clone()).map_err(|e| Error::parse(&record, e))?;
        note_extra(&mut report, &record, &raw.extra);
        let &(width, height) = image_dims.get(&raw.image_id).ok_or(Error::Referential {
            record: format!("annotation {}", raw.id),
            kind: "image",
            id: raw.image_id,
        })?;
        if !category_ids.contains(&raw.category_id) {
            return Err(Error::Referential {
                record: format!("annotation {}", raw.id),
                kind: "category",
                id: raw.category_id,
            });
        }
        if !raw.bbox.is_finite() {
            return Err(Error::NonFinite(record));
        }
        let bbox = match raw
            .bbox
            .clamp_to(S::lit(width as f64), S::lit(height as f64))
        {
            Clamp::Inside(b) => b,
            Clamp::Clamped(b) => {
                report.clamped.push(raw.id);
                b
            }
            Clamp::Empty => {
                report.dropped.push(raw.id);
                continue;
            }
        };
        annotations.push(GroundTruthBox {
            id: raw.id,
            image_id: raw.image_id,
            category_id: raw.category_id,
            bbox,
            pseudo_label: raw.pseudo_label,
        });
    }

    let dataset = AnnotatedDataset {
        images,
        categories,
        annotations,
    };
    dataset.validate()?;

    if let Some(header) = obj.get("category_index") {
        let ids: Vec<u64> = serde_json::from_value(header.clone())
            .map_err(|e| Error::parse("category_index", e))?;
        if ids != dataset.category_index().ids() {
            return Err(Error::invalid(
                "category_index",
                "header does not match the sorted category ids",
            ));
        }
    }

    for field in &report.ignored_fields {
        log::warn!("ignoring unsupported field `{field}`");
    }
    if !report.clamped.is_empty() || !report.dropped.is_empty() {
        log::warn!(
            "clamped {} and dropped {} out-of-bounds boxes",
            report.clamped.len(),
            report.dropped.len()
        );
    }
    Ok((dataset, report))
}

pub fn load_annotations<S: Scalar>(path: impl AsRef<Path>) -> Result<(AnnotatedDataset<S>, LoadReport)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AnnotatedDataset::from_json(&text)
}

pub fn save_annotations<S: Scalar>(dataset: &AnnotatedDataset<S>, path: impl AsRef<Path>) -> Result<()> {
    save_annotations_with(dataset, path, SaveOptions::default())
}

pub fn save_annotations_with<S: Scalar>(
    dataset: &AnnotatedDataset<S>,
    path: impl AsRef<Path>,
    options: SaveOptions,
) -> Result<()> {
    let path = path.as_ref();
    let text = dataset.to_json(options)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a list of images: either a bare JSON array of image records or any
/// object with an `images` array (such as an annotation file).
pub fn load_image_list(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::parse("file", e))?;
    let items = match &value {
        Value::Array(items) => items.as_slice(),
        Value::Object(obj) => record_array(obj, "images")?,
        _ => return Err(Error::parse("file", "expected an array or an object with `images`")),
    };
    let mut seen = HashSet::new();
    let mut images = Vec::with_capacity(items.len());
    for (pos, v) in items.iter().enumerate() {
        let record = record_label("images", pos, v);
        let raw: RawImage = serde_json::from_value(v.clone()).map_err(|e| Error::parse(&record, e))?;
        if raw.width == 0 || raw.height == 0 {
            return Err(Error::invalid(record, "width and height must be positive"));
        }
        if !seen.insert(raw.id) {
            return Err(Error::DuplicateId {
                kind: "image",
                id: raw.id,
            });
        }
        images.push(ImageRecord {
            id: raw.id,
            width: raw.width,
            height: raw.height,
            file_name: raw.file_name,
        });
    }
    Ok(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "images": [{"id": 1, "width": 100, "height": 80, "file_name": "a.jpg"}],
        "categories": [{"id": 3, "name": "dog"}],
        "annotations": [{"id": 10, "image_id": 1, "category_id": 3, "bbox": [5, 5, 20, 10]}]
    }"#;

    #[test]
    fn minimal_file_loads() {
        let (d, report) = AnnotatedDataset::<f64>::from_json(MINIMAL).unwrap();
        assert_eq!(
            (d.images.len(), d.categories.len(), d.annotations.len()),
            (1, 1, 1)
        );
        assert_eq!(report, LoadReport::default());
    }

    #[test]
    fn dangling_category_names_annotation() {
        let text = MINIMAL.replace("\"category_id\": 3", "\"category_id\": 9");
        let err = AnnotatedDataset::<f64>::from_json(&text).unwrap_err();
        match err {
            Error::Referential { record, kind, id } => {
                assert_eq!(record, "annotation 10");
                assert_eq!(kind, "category");
                assert_eq!(id, 9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_field_names_record() {
        let text = MINIMAL.replace("\"bbox\": [5, 5, 20, 10]", "\"area\": 3");
        let err = AnnotatedDataset::<f64>::from_json(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("annotations[0] (id 10)"), "{msg}");
        assert!(msg.contains("bbox"), "{msg}");
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            AnnotatedDataset::<f64>::from_json("{\"images\": ["),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn superset_fields_are_reported() {
        let text = MINIMAL.replace("\"file_name\": \"a.jpg\"", "\"file_name\": \"a.jpg\", \"license\": 2");
        let text = text.replacen('{', "{\"info\": {},", 1);
        let (_, report) = AnnotatedDataset::<f64>::from_json(&text).unwrap();
        assert_eq!(report.ignored_fields, vec!["info", "images[0] (id 1).license"]);
    }

    #[test]
    fn clamps_and_drops() {
        let text = r#"{
            "images": [{"id": 1, "width": 100, "height": 80, "file_name": "a.jpg"}],
            "categories": [{"id": 1, "name": "a"}],
            "annotations": [
                {"id": 1, "image_id": 1, "category_id": 1, "bbox": [90, 70, 20, 20]},
                {"id": 2, "image_id": 1, "category_id": 1, "bbox": [120, 0, 5, 5]},
                {"id": 3, "image_id": 1, "category_id": 1, "bbox": [0, 0, 5, 5]}
            ]
        }"#;
        let (d, report) = AnnotatedDataset::<f64>::from_json(text).unwrap();
        assert_eq!(report.clamped, vec![1]);
        assert_eq!(report.dropped, vec![2]);
        assert_eq!(d.annotations.len(), 2);
        assert_eq!(d.annotations[0].bbox, BBox::new(90., 70., 10., 10.));

        // reloading the clamped output reports nothing
        let (again, report) =
            AnnotatedDataset::<f64>::from_json(&d.to_json(SaveOptions::default()).unwrap()).unwrap();
        assert_eq!(report, LoadReport::default());
        assert_eq!(again, d);
    }

    #[test]
    fn empty_annotations_round_trip() {
        let d = AnnotatedDataset::<f64> {
            images: vec![],
            categories: vec![Category {
                id: 1,
                name: "x".into(),
            }],
            annotations: vec![],
        };
        let text = d.to_json(SaveOptions::default()).unwrap();
        let (back, _) = AnnotatedDataset::<f64>::from_json(&text).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_zero_categories_and_duplicates() {
        let none = r#"{"images": [], "categories": [], "annotations": []}"#;
        assert!(AnnotatedDataset::<f64>::from_json(none).is_err());
        let dup = r#"{"images": [], "categories": [{"id":1,"name":"a"},{"id":1,"name":"b"}], "annotations": []}"#;
        assert!(matches!(
            AnnotatedDataset::<f64>::from_json(dup),
            Err(Error::DuplicateId { kind: "category", .. })
        ));
        let dup_name = r#"{"images": [], "categories": [{"id":1,"name":"a"},{"id":2,"name":"a"}], "annotations": []}"#;
        assert!(matches!(
            AnnotatedDataset::<f64>::from_json(dup_name),
            Err(Error::DuplicateName(_))
        ));
    }

    #[test]
    fn category_index_header_checked() {
        let text = MINIMAL.replacen('{', "{\"category_index\": [4],", 1);
        assert!(AnnotatedDataset::<f64>::from_json(&text).is_err());
        let text = MINIMAL.replacen('{', "{\"category_index\": [3],", 1);
        assert!(AnnotatedDataset::<f64>::from_json(&text).is_ok());
    }

    #[test]
    fn strict_export_strips_extensions() {
        let (mut d, _) = AnnotatedDataset::<f64>::from_json(MINIMAL).unwrap();
        d.annotations[0].pseudo_label = Some(Provenance {
            source_tag: "sim".into(),
            batch: "abc".into(),
            confidence: 0.9,
            sigma: 1.0,
        });
        let loose = d.to_json(SaveOptions::default()).unwrap();
        assert!(loose.contains("pseudo_label") && loose.contains("category_index"));
        let strict = d.to_json(SaveOptions { strict_coco: true }).unwrap();
        assert!(!strict.contains("pseudo_label") && !strict.contains("category_index"));
    }

    #[test]
    fn category_index_is_sorted_positional() {
        let idx = CategoryIndex::new(vec![7, 2, 5]);
        assert_eq!(idx.ids(), &[2, 5, 7]);
        assert_eq!(idx.index_of(5), Some(1));
        assert_eq!(idx.id_of(2), Some(7));
        assert_eq!(idx.index_of(3), None);
    }
}
