//! Class co-occurrence prior built from annotated images.
//!
//! Presence is counted per image: a class seen once or many times in an
//! image counts once. For classes `x` and `z`,
//!
//! ```text
//! raw[x][z] = #images containing both x and z / #images containing z
//! raw[x][x] = #images with at least two instances of x / #images containing x
//! ```
//!
//! Rows are then max-normalized over the off-diagonal entries so each
//! class's strongest partner maps to 1. The diagonal is scaled by the same
//! factor and capped at 1. [`CooccurrenceMatrix::sigma`] reads the
//! normalized table.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotatedDataset, CategoryIndex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which axis max-normalization runs along.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Per target class `x`, over conditioning classes `z`.
    #[default]
    Row,
    /// Per conditioning class `z`, over target classes `x`.
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CooccurrenceConfig<S = f64> {
    /// Additive constant: `(joint + a) / (count + 2a)`. Zero disables.
    pub smoothing: S,
    pub orientation: Orientation,
}

impl<S: Scalar> Default for CooccurrenceConfig<S> {
    fn default() -> Self {
        Self {
            smoothing: S::zero(),
            orientation: Orientation::Row,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CooccurrenceMatrix<S = f64> {
    pub n: usize,
    pub category_ids: Vec<u64>,
    /// Images in which each class is present.
    pub image_counts: Vec<u64>,
    /// Row-major `n x n`; off-diagonal entries are symmetric pair counts,
    /// the diagonal counts images with repeated instances.
    pub joint_counts: Vec<Vec<u64>>,
    pub raw: Vec<Vec<S>>,
    pub normalized: Vec<Vec<S>>,
    pub fingerprint: String,
    pub config: CooccurrenceConfig<S>,
}

/// Per-class presence and multi-instance flags for one image.
struct ImagePresence {
    present: Vec<usize>,
    repeated: Vec<usize>,
}

#[derive(Clone)]
struct Counts {
    image: Vec<u64>,
    joint: Vec<u64>,
}

impl Counts {
    fn zero(n: usize) -> Self {
        Self {
            image: vec![0; n],
            joint: vec![0; n * n],
        }
    }

    fn add(&mut self, n: usize, p: &ImagePresence) {
        for &x in &p.present {
            self.image[x] += 1;
            for &z in &p.present {
                if x != z {
                    self.joint[x * n + z] += 1;
                }
            }
        }
        for &x in &p.repeated {
            self.joint[x * n + x] += 1;
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.image.iter_mut().zip(other.image) {
            *a += b;
        }
        for (a, b) in self.joint.iter_mut().zip(other.joint) {
            *a += b;
        }
        self
    }
}

impl<S: Scalar> CooccurrenceMatrix<S> {
    pub fn build(dataset: &AnnotatedDataset<S>) -> Self {
        Self::build_with(dataset, CooccurrenceConfig::default())
    }

    /// Counts presence in parallel over images. Counts are integers, so the
    /// result does not depend on thread count or input ordering.
    pub fn build_with(dataset: &AnnotatedDataset<S>, config: CooccurrenceConfig<S>) -> Self {
        let index = dataset.category_index();
        let n = index.len();
        let mut per_image: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for ann in &dataset.annotations {
            if let Some(c) = index.index_of(ann.category_id) {
                per_image.entry(ann.image_id).or_insert_with(|| vec![0; n])[c] += 1;
            }
        }
        let presences: Vec<ImagePresence> = per_image
            .into_values()
            .map(|instances| ImagePresence {
                present: (0..n).filter(|&c| instances[c] > 0).collect(),
                repeated: (0..n).filter(|&c| instances[c] > 1).collect(),
            })
            .collect();
        let counts = presences
            .par_iter()
            .fold(
                || Counts::zero(n),
                |mut acc, p| {
                    acc.add(n, p);
                    acc
                },
            )
            .reduce(|| Counts::zero(n), Counts::merge);

        let joint_counts: Vec<Vec<u64>> = counts.joint.chunks(n.max(1)).take(n).map(<[u64]>::to_vec).collect();
        Self::from_counts(
            index,
            counts.image,
            joint_counts,
            dataset.fingerprint(),
            config,
        )
    }

    /// Assembles the tables from raw counts.
    pub fn from_counts(
        index: CategoryIndex,
        image_counts: Vec<u64>,
        joint_counts: Vec<Vec<u64>>,
        fingerprint: String,
        config: CooccurrenceConfig<S>,
    ) -> Self {
        let n = index.len();
        let a = config.smoothing;
        let mut raw = vec![vec![S::zero(); n]; n];
        for x in 0..n {
            for z in 0..n {
                // conditioning count: images with z, or images with x on the diagonal
                let denom = image_counts[z];
                if denom == 0 {
                    continue;
                }
                let num = S::lit(joint_counts[x][z] as f64) + a;
                raw[x][z] = num / (S::lit(denom as f64) + a + a);
            }
        }
        let normalized = normalize(&raw, config.orientation);
        Self {
            n,
            category_ids: index.ids().to_vec(),
            image_counts,
            joint_counts,
            raw,
            normalized,
            fingerprint,
            config,
        }
    }

    /// Matrix whose normalized table is all ones: `sigma` is 1 for every
    /// context, reducing co-occurrence acceptance to plain thresholding.
    pub fn uniform(index: &CategoryIndex) -> Self {
        let n = index.len();
        Self {
            n,
            category_ids: index.ids().to_vec(),
            image_counts: vec![0; n],
            joint_counts: vec![vec![0; n]; n],
            raw: vec![vec![S::one(); n]; n],
            normalized: vec![vec![S::one(); n]; n],
            fingerprint: "uniform".to_string(),
            config: CooccurrenceConfig::default(),
        }
    }

    pub fn category_index(&self) -> CategoryIndex {
        CategoryIndex::new(self.category_ids.clone())
    }

    /// Unsmoothed `p(x|z)` as an exact fraction; `0/1` when `z` never occurs.
    pub fn conditional_ratio(&self, x: usize, z: usize) -> Ratio<u64> {
        match self.image_counts[z] {
            0 => Ratio::from_integer(0),
            denom => Ratio::new(self.joint_counts[x][z], denom),
        }
    }

    /// Co-occurrence factor for `target` given the classes in `context`:
    /// the largest normalized entry over the context, or 1 when the context
    /// is empty.
    pub fn sigma(&self, target: usize, context: &BTreeSet<usize>) -> Result<S> {
        if target >= self.n {
            return Err(Error::IndexOutOfRange {
                index: target,
                n: self.n,
            });
        }
        if context.is_empty() {
            return Ok(S::one());
        }
        let row = &self.normalized[target];
        let mut best = S::zero();
        for &z in context {
            let v = *row.get(z).ok_or(Error::IndexOutOfRange { index: z, n: self.n })?;
            best = best.max(v);
        }
        Ok(best)
    }

    /// Fails when the matrix was built for a different class list. A
    /// fingerprint mismatch only produces a warning.
    pub fn check_against(&self, index: &CategoryIndex, fingerprint: Option<&str>) -> Result<Vec<String>> {
        if self.n != index.len() {
            return Err(Error::Dimension {
                what: "co-occurrence matrix".to_string(),
                expected: index.len(),
                found: self.n,
            });
        }
        if self.category_ids != index.ids() {
            return Err(Error::invalid(
                "co-occurrence matrix",
                "category ids differ from the dataset",
            ));
        }
        let mut warnings = Vec::new();
        if let Some(fp) = fingerprint {
            if fp != self.fingerprint {
                let msg = format!(
                    "matrix fingerprint {} differs from dataset fingerprint {fp}; applying across datasets",
                    self.fingerprint
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        Ok(warnings)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        let square = |t: &Vec<Vec<S>>| t.len() == n && t.iter().all(|r| r.len() == n);
        if self.category_ids.len() != n
            || self.image_counts.len() != n
            || self.joint_counts.len() != n
            || self.joint_counts.iter().any(|r| r.len() != n)
            || !square(&self.raw)
            || !square(&self.normalized)
        {
            return Err(Error::invalid("co-occurrence matrix", "table shapes disagree with n"));
        }
        let unit = |v: &S| *v >= S::zero() && *v <= S::one();
        if !self.raw.iter().flatten().all(unit) || !self.normalized.iter().flatten().all(unit) {
            return Err(Error::invalid("co-occurrence matrix", "entries outside [0, 1]"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::parse("matrix", e))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let matrix: Self = serde_json::from_str(text).map_err(|e| Error::parse("matrix", e))?;
        matrix.validate()?;
        Ok(matrix)
    }

    /// Normalized table as CSV with category names as headers.
    pub fn to_csv(&self, names: &[String]) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::parse("csv", e);
        let mut header = vec![String::from("target\\context")];
        header.extend(names.iter().cloned());
        writer.write_record(&header).map_err(csv_err)?;
        for (x, row) in self.normalized.iter().enumerate() {
            let mut record = vec![names.get(x).cloned().unwrap_or_else(|| x.to_string())];
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record).map_err(csv_err)?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::parse("csv", e))?;
        String::from_utf8(bytes).map_err(|e| Error::parse("csv", e))
    }

    /// Strongest off-diagonal pairs by normalized value, ties by index.
    pub fn top_pairs(&self, k: usize) -> Vec<(usize, usize, S)> {
        let mut pairs: Vec<(usize, usize, S)> = (0..self.n)
            .flat_map(|x| (0..self.n).filter(move |&z| z != x).map(move |z| (x, z)))
            .map(|(x, z)| (x, z, self.normalized[x][z]))
            .filter(|&(_, _, v)| v > S::zero())
            .collect();
        pairs.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then((a.0, a.1).cmp(&(b.0, b.1))));
        pairs.truncate(k);
        pairs
    }
}

fn normalize<S: Scalar>(raw: &[Vec<S>], orientation: Orientation) -> Vec<Vec<S>> {
    let n = raw.len();
    let mut out = vec![vec![S::zero(); n]; n];
    match orientation {
        Orientation::Row => {
            for x in 0..n {
                let peak = (0..n).filter(|&z| z != x).map(|z| raw[x][z]).fold(S::zero(), S::max);
                if peak > S::zero() {
                    for z in 0..n {
                        out[x][z] = (raw[x][z] / peak).min(S::one());
                    }
                }
            }
        }
        Orientation::Column => {
            for z in 0..n {
                let peak = (0..n).filter(|&x| x != z).map(|x| raw[x][z]).fold(S::zero(), S::max);
                if peak > S::zero() {
                    for x in 0..n {
                        out[x][z] = (raw[x][z] / peak).min(S::one());
                    }
                }
            }
        }
    }
    out
}

pub fn build_cooccurrence<S: Scalar>(dataset: &AnnotatedDataset<S>) -> CooccurrenceMatrix<S> {
    CooccurrenceMatrix::build(dataset)
}

pub fn sigma<S: Scalar>(matrix: &CooccurrenceMatrix<S>, target: usize, context: &BTreeSet<usize>) -> Result<S> {
    matrix.sigma(target, context)
}

pub fn save_matrix<S: Scalar>(matrix: &CooccurrenceMatrix<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_matrix<S: Scalar>(path: impl AsRef<Path>) -> Result<CooccurrenceMatrix<S>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CooccurrenceMatrix::from_json(&text)
}
