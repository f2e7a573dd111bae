//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity, clippy::too_many_arguments)]

use std::path::PathBuf;

use cooclabel::dataset::{AnnotatedDataset, Category, GroundTruthBox, ImageRecord};
use cooclabel::geometry::BBox;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Brute-force co-occurrence: for every class pair, scan every image's
/// annotation list. Returns (raw, row max-normalized).
pub fn cooccurrence_oracle(d: &AnnotatedDataset<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut cats: Vec<u64> = d.categories.iter().map(|c| c.id).collect();
    cats.sort();
    let n = cats.len();
    let instances = |image: u64, cat: u64| {
        d.annotations
            .iter()
            .filter(|a| a.image_id == image && a.category_id == cat)
            .count()
    };
    let images: Vec<u64> = d.images.iter().map(|im| im.id).collect();
    let mut raw = vec![vec![0.0; n]; n];
    for x in 0..n {
        for z in 0..n {
            let with_z = images.iter().filter(|&&im| instances(im, cats[z]) > 0).count();
            if with_z == 0 {
                continue;
            }
            let both = if x == z {
                images.iter().filter(|&&im| instances(im, cats[x]) >= 2).count()
            } else {
                images
                    .iter()
                    .filter(|&&im| instances(im, cats[x]) > 0 && instances(im, cats[z]) > 0)
                    .count()
            };
            raw[x][z] = both as f64 / with_z as f64;
        }
    }
    let mut normalized = vec![vec![0.0; n]; n];
    for x in 0..n {
        let mut peak = 0.0f64;
        for z in 0..n {
            if z != x && raw[x][z] > peak {
                peak = raw[x][z];
            }
        }
        if peak > 0.0 {
            for z in 0..n {
                normalized[x][z] = f64::min(raw[x][z] / peak, 1.0);
            }
        }
    }
    (raw, normalized)
}

/// Small random dataset: up to `n_images` images over `n_classes` classes,
/// 0..=5 boxes each.
pub fn random_dataset(seed: u64, n_images: usize, n_classes: usize) -> AnnotatedDataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut annotations = Vec::new();
    let images: Vec<ImageRecord> = (1..=n_images as u64)
        .map(|id| ImageRecord {
            id,
            width: 200,
            height: 150,
            file_name: format!("r{id}.jpg"),
        })
        .collect();
    for im in &images {
        for _ in 0..rng.random_range(0..=5) {
            let id = annotations.len() as u64 + 1;
            annotations.push(GroundTruthBox {
                id,
                image_id: im.id,
                category_id: rng.random_range(1..=n_classes as u64),
                bbox: BBox::new(
                    rng.random_range(0..100) as f64,
                    rng.random_range(0..75) as f64,
                    rng.random_range(5..100) as f64,
                    rng.random_range(5..75) as f64,
                ),
                pseudo_label: None,
            });
        }
    }
    AnnotatedDataset {
        images,
        categories: (1..=n_classes as u64)
            .map(|id| Category {
                id,
                name: format!("class{id}"),
            })
            .collect(),
        annotations,
    }
}

/// Interpolated AP straight from the definition in exact rational
/// arithmetic: for each recall point r, the largest precision over every
/// rank whose recall is at least r.
pub fn reference_ap(scored: &[(f64, bool)], num_truths: usize, points: usize) -> f64 {
    let mut ranked: Vec<(usize, f64, bool)> = scored.iter().enumerate().map(|(i, &(c, t))| (i, c, t)).collect();
    // descending confidence, stable on input order
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut curve: Vec<(Ratio<i64>, Ratio<i64>)> = Vec::new();
    let mut tp = 0i64;
    for (rank, &(_, _, hit)) in ranked.iter().enumerate() {
        if hit {
            tp += 1;
        }
        let precision = Ratio::new(tp, rank as i64 + 1);
        let recall = Ratio::new(tp, num_truths as i64);
        curve.push((precision, recall));
    }
    let mut total = Ratio::from_integer(0i64);
    for k in 0..points {
        let r = Ratio::new(k as i64, points as i64 - 1);
        let best = curve
            .iter()
            .filter(|(_, rec)| *rec >= r)
            .map(|(p, _)| *p)
            .max()
            .unwrap_or(Ratio::from_integer(0));
        total += best;
    }
    let ap = total / Ratio::from_integer(points as i64);
    *ap.numer() as f64 / *ap.denom() as f64
}

pub fn iou_oracle(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let iy = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a[2] * a[3] + b[2] * b[3] - inter)
}

/// Exhaustive matcher: among all injective partial assignments with IoU at
/// or above the threshold, the one whose per-detection (IoU, lower truth
/// index) sequence, in confidence order with ties by input order and
/// unmatched scored -1, is lexicographically largest.
pub fn exhaustive_matching(dets: &[(f64, [f64; 4])], truths: &[[f64; 4]], threshold: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].0.partial_cmp(&dets[a].0).unwrap().then(a.cmp(&b)));

    fn recurse(
        k: usize,
        order: &[usize],
        dets: &[(f64, [f64; 4])],
        truths: &[[f64; 4]],
        threshold: f64,
        used: &mut Vec<bool>,
        current: &mut Vec<Option<usize>>,
        best: &mut Option<(Vec<(f64, i64)>, Vec<Option<usize>>)>,
    ) {
        if k == order.len() {
            let key: Vec<(f64, i64)> = order
                .iter()
                .map(|&d| current[d].map_or((-1.0, 0), |t| (iou_oracle(dets[d].1, truths[t]), -(t as i64))))
                .collect();
            let better = match best {
                None => true,
                Some((bk, _)) => key.partial_cmp(bk).unwrap() == std::cmp::Ordering::Greater,
            };
            if better {
                *best = Some((key, current.clone()));
            }
            return;
        }
        let d = order[k];
        recurse(k + 1, order, dets, truths, threshold, used, current, best);
        for t in 0..truths.len() {
            if !used[t] && iou_oracle(dets[d].1, truths[t]) >= threshold {
                used[t] = true;
                current[d] = Some(t);
                recurse(k + 1, order, dets, truths, threshold, used, current, best);
                current[d] = None;
                used[t] = false;
            }
        }
    }

    let mut best = None;
    recurse(
        0,
        &order,
        dets,
        truths,
        threshold,
        &mut vec![false; truths.len()],
        &mut vec![None; dets.len()],
        &mut best,
    );
    best.unwrap().1
}

/// Hand-built rankings, (confidence, is true positive), with truth counts.
pub fn hand_ap_instances() -> Vec<(Vec<(f64, bool)>, usize)> {
    // (confidence, is_tp) rankings with their truth counts
    vec![
        (vec![(0.9, true)], 1),
        (vec![(0.9, false)], 1),
        (vec![(0.9, true), (0.8, false)], 1),
        (vec![(0.9, false), (0.8, true)], 1),
        (vec![(0.9, true), (0.8, true)], 2),
        (vec![(0.9, true), (0.8, false), (0.7, true)], 2),
        (vec![(0.9, false), (0.8, true), (0.7, true)], 3),
        (vec![(0.9, true), (0.9, false), (0.5, true)], 4),
        (vec![(0.3, true), (0.9, false), (0.6, true), (0.1, false)], 2),
        (vec![(0.95, true), (0.85, true), (0.75, false), (0.65, true), (0.55, false), (0.45, true)], 4),
        (vec![(0.95, false), (0.85, false), (0.75, false), (0.65, true)], 1),
        (vec![(0.5, true), (0.5, true), (0.5, false)], 3),
        (vec![(0.5, false), (0.5, true), (0.5, true)], 3),
        (vec![(0.8, true), (0.6, false), (0.4, false), (0.2, true), (0.1, true)], 4),
        (vec![(0.99, true), (0.98, false), (0.97, true), (0.96, false), (0.95, true), (0.94, false)], 3),
        (vec![(0.7, true), (0.7, true), (0.7, true), (0.7, true)], 4),
        (vec![(0.9, false), (0.8, false)], 2),
        (vec![(0.6, true), (0.4, true), (0.2, false), (0.1, false)], 3),
        (vec![(0.9, true), (0.1, true)], 2),
        (vec![(0.1, true), (0.9, false), (0.8, false), (0.7, true), (0.6, true)], 3),
        (vec![(0.33, true), (0.66, true), (0.99, false)], 2),
        (vec![], 2),
    ]
}
