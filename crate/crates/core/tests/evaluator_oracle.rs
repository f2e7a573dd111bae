mod common;

use cooclabel::dataset::{AnnotatedDataset, Category, GroundTruthBox, ImageRecord};
use cooclabel::eval::{coco_iou_sweep, evaluate, Prediction, Protocol};
use cooclabel::geometry::BBox;
use cooclabel::{average_precision, iou, match_detections, Interpolation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{exhaustive_matching, hand_ap_instances, iou_oracle, reference_ap};

fn b(v: [f64; 4]) -> BBox<f64> {
    BBox::new(v[0], v[1], v[2], v[3])
}

fn one_class_dataset(truths: &[(u64, [f64; 4])], images: &[u64]) -> AnnotatedDataset<f64> {
    AnnotatedDataset {
        images: images
            .iter()
            .map(|&id| ImageRecord {
                id,
                width: 1000,
                height: 1000,
                file_name: format!("{id}.jpg"),
            })
            .collect(),
        categories: vec![Category {
            id: 1,
            name: "thing".into(),
        }],
        annotations: truths
            .iter()
            .enumerate()
            .map(|(i, &(image_id, bbox))| GroundTruthBox {
                id: i as u64 + 1,
                image_id,
                category_id: 1,
                bbox: b(bbox),
                pseudo_label: None,
            })
            .collect(),
    }
}

fn pred(image_id: u64, bbox: [f64; 4], confidence: f64) -> Prediction<f64> {
    Prediction {
        image_id,
        category: 0,
        bbox: b(bbox),
        confidence,
    }
}

#[test]
fn iou_reference_values() {
    // two 10x10 boxes offset by 5 on x: 50 / 150
    assert!((iou(&b([0., 0., 10., 10.]), &b([5., 0., 10., 10.])) - 1.0 / 3.0).abs() < 1e-15);
    // 25 overlap of 175 union
    let v = iou(&b([0., 0., 10., 10.]), &b([5., 5., 10., 10.]));
    assert!((v - 25.0 / 175.0).abs() < 1e-15);
    assert_eq!(iou(&b([0., 0., 10., 10.]), &b([10., 0., 10., 10.])), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let mut r = || [rng.random_range(0.0..50.0), rng.random_range(0.0..50.0), rng.random_range(0.5..40.0), rng.random_range(0.5..40.0)];
        let (p, q) = (r(), r());
        assert!((iou(&b(p), &b(q)) - iou_oracle(p, q)).abs() < 1e-12);
    }
}

#[test]
fn hand_instances_match_reference_ap() {
    let instances = hand_ap_instances();
    assert!(instances.len() >= 20);
    for (i, (scored, truths)) in instances.iter().enumerate() {
        let got101 = average_precision(scored, *truths, Interpolation::Coco101).unwrap();
        let got11 = average_precision(scored, *truths, Interpolation::Pascal11).unwrap();
        assert!((got101 - reference_ap(scored, *truths, 101)).abs() < 1e-9, "instance {i}");
        assert!((got11 - reference_ap(scored, *truths, 11)).abs() < 1e-9, "instance {i}");
    }
    assert_eq!(average_precision::<f64>(&[(0.5, false)], 0, Interpolation::Coco101), None);
}

#[test]
fn greedy_matching_equals_exhaustive_search() {
    // 3 detections, 2 truths: greedy gives the top detection its best truth
    let truths = [[0., 0., 10., 10.], [6., 0., 10., 10.]];
    let dets = [(0.9, [3., 0., 10., 10.]), (0.8, [0., 0., 10., 10.]), (0.7, [6., 0., 10., 10.])];
    let got = match_detections(&dets.map(|(c, v)| (c, b(v))), &truths.map(b), 0.5);
    assert_eq!(got.assignments, exhaustive_matching(&dets, &truths, 0.5));
    assert_eq!(got.true_positives + got.false_negatives, 2);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..400 {
        let nd = rng.random_range(0..=6);
        let nt = rng.random_range(0..=4);
        let r = |rng: &mut ChaCha8Rng| [rng.random_range(0.0..20.0f64).round(), rng.random_range(0.0..20.0f64).round(), rng.random_range(4.0..16.0f64).round(), rng.random_range(4.0..16.0f64).round()];
        let truths: Vec<[f64; 4]> = (0..nt).map(|_| r(&mut rng)).collect();
        let dets: Vec<(f64, [f64; 4])> = (0..nd)
            .map(|_| ((rng.random_range(0..5) as f64) / 5.0, r(&mut rng)))
            .collect();
        for thr in [0.3, 0.5, 0.75] {
            let got = match_detections(
                &dets.iter().map(|&(c, v)| (c, b(v))).collect::<Vec<_>>(),
                &truths.iter().map(|&v| b(v)).collect::<Vec<_>>(),
                thr,
            );
            assert_eq!(got.assignments, exhaustive_matching(&dets, &truths, thr));
            assert_eq!(got.true_positives + got.false_positives, nd);
            assert_eq!(got.true_positives + got.false_negatives, nt);
        }
    }
}

#[test]
fn low_overlap_detection_is_false_positive_at_half() {
    let gt = one_class_dataset(&[(1, [0., 0., 10., 10.])], &[1]);
    let protocol = Protocol {
        iou_thresholds: vec![0.5],
        ..Protocol::default()
    };
    let report = evaluate(&[pred(1, [5., 5., 10., 10.], 0.9)], &gt, &protocol).unwrap();
    assert_eq!(report.map_50, 0.0);
    assert_eq!(report.pseudo.false_positives, 1);
    assert_eq!(report.pseudo.false_negatives, 1);
}

#[test]
fn perfect_detections_score_one() {
    let truths = [(1, [0., 0., 10., 10.]), (1, [50., 50., 20., 20.]), (2, [5., 5., 30., 40.])];
    let gt = one_class_dataset(&truths, &[1, 2]);
    let preds: Vec<_> = truths.iter().enumerate().map(|(i, &(im, v))| pred(im, v, 0.5 + 0.1 * i as f64)).collect();
    let report = evaluate(&preds, &gt, &Protocol::default()).unwrap();
    assert_eq!(report.map_50, 1.0);
    assert_eq!(report.map_sweep, 1.0);
    assert!(report.map_per_threshold.iter().all(|&v| v == 1.0));
    assert_eq!(report.pseudo.precision, 1.0);
    assert_eq!(report.pseudo.recall, 1.0);
}

#[test]
fn sweep_thresholds_are_exact_decimals() {
    let sweep: Vec<f64> = coco_iou_sweep();
    let want = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
    assert_eq!(sweep, want);
}

#[test]
fn class_without_truth_is_excluded() {
    let mut gt = one_class_dataset(&[(1, [0., 0., 10., 10.])], &[1]);
    gt.categories.push(Category {
        id: 2,
        name: "ghost".into(),
    });
    let mut p = pred(1, [40., 40., 10., 10.], 0.9);
    p.category = 1;
    let report = evaluate(&[pred(1, [0., 0., 10., 10.], 0.8), p], &gt, &Protocol::default()).unwrap();
    assert_eq!(report.excluded_classes, vec![2]);
    assert_eq!(report.map_50, 1.0);
}

#[test]
fn empty_ground_truth_is_an_error() {
    let mut gt = one_class_dataset(&[], &[1]);
    gt.annotations.clear();
    assert!(matches!(
        evaluate(&[pred(1, [0., 0., 1., 1.], 0.5)], &gt, &Protocol::default()),
        Err(cooclabel::Error::EmptyGroundTruth)
    ));
}

/// Truths on a grid far apart, detections jittered around them.
fn separated_case(seed: u64) -> (AnnotatedDataset<f64>, Vec<Prediction<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truths = Vec::new();
    let mut preds = Vec::new();
    for image in 1..=3u64 {
        for slot in 0..rng.random_range(1..5) {
            let base = [slot as f64 * 200.0 + 10.0, 10.0 + image as f64, 60.0, 60.0];
            truths.push((image, base));
            for _ in 0..rng.random_range(0..3) {
                let j = |rng: &mut ChaCha8Rng| rng.random_range(-25.0..25.0);
                let v = [base[0] + j(&mut rng), base[1] + j(&mut rng), 60.0 + j(&mut rng), 60.0 + j(&mut rng)];
                preds.push(pred(image, v, rng.random_range(0.0..1.0)));
            }
        }
        preds.push(pred(image, [900., 900., 50., 50.], rng.random_range(0.0..1.0)));
    }
    (one_class_dataset(&truths, &[1, 2, 3]), preds)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stricter_iou_never_raises_ap(seed in 0u64..100_000) {
        let (gt, preds) = separated_case(seed);
        let report = evaluate(&preds, &gt, &Protocol::default()).unwrap();
        for w in report.map_per_threshold.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn true_positives_nest_across_thresholds(seed in 0u64..100_000) {
        let (gt, preds) = separated_case(seed);
        for image in 1..=3u64 {
            let truths: Vec<BBox<f64>> = gt.annotations.iter().filter(|a| a.image_id == image).map(|a| a.bbox).collect();
            let dets: Vec<(f64, BBox<f64>)> = preds.iter().filter(|p| p.image_id == image).map(|p| (p.confidence, p.bbox)).collect();
            let loose = match_detections(&dets, &truths, 0.5);
            let strict = match_detections(&dets, &truths, 0.75);
            for (s, l) in strict.assignments.iter().zip(&loose.assignments) {
                if s.is_some() {
                    prop_assert!(l.is_some());
                }
            }
        }
    }

    #[test]
    fn extra_false_positive_never_raises_ap(seed in 0u64..100_000, conf in 0.0f64..1.0) {
        let (gt, mut preds) = separated_case(seed);
        let before = evaluate(&preds, &gt, &Protocol::default()).unwrap();
        preds.push(pred(2, [700., 700., 30., 30.], conf));
        let after = evaluate(&preds, &gt, &Protocol::default()).unwrap();
        prop_assert!(after.map_sweep <= before.map_sweep + 1e-12);
        prop_assert!(after.map_50 <= before.map_50 + 1e-12);
    }

    #[test]
    fn duplicate_of_a_true_positive_never_raises_ap(seed in 0u64..100_000) {
        let (gt, mut preds) = separated_case(seed);
        let before = evaluate(&preds, &gt, &Protocol::default()).unwrap();
        let mut dup = preds[0];
        dup.confidence *= 0.5;
        preds.push(dup);
        let after = evaluate(&preds, &gt, &Protocol::default()).unwrap();
        prop_assert!(after.map_50 <= before.map_50 + 1e-12);
    }

    #[test]
    fn ap_in_unit_interval(hits in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 0..20), extra in 0usize..5) {
        let tp = hits.iter().filter(|h| h.1).count();
        let ap = average_precision(&hits, tp + extra, Interpolation::Coco101);
        if tp + extra > 0 {
            let ap = ap.unwrap();
            prop_assert!((0.0..=1.0).contains(&ap));
            prop_assert!((ap - reference_ap(&hits, tp + extra, 101)).abs() < 1e-9);
        }
    }
}
