use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cooclabel::cooccurrence::CooccurrenceMatrix;
use cooclabel::eval::{coco_iou_sweep, predictions_from_detections, Prediction, Protocol};
use cooclabel::merge::MergePlan;
use cooclabel::pseudolabel::Labeler;
use cooclabel::{
    load_annotations, load_detections, load_image_list, load_matrix, load_pseudo_labels, pseudo_labels_to_json,
    save_matrix, scene_dataset, simulate as run_simulation, CooccurrenceConfig, Dataset, FilterConfig, IdPolicy,
    Interpolation, NoiseModel, Orientation, SaveOptions, SceneSpec,
};

use crate::config::{ConfigFile, Resolver};
use crate::error::CliError;
use crate::report::{regime_rows, render_table};
use crate::{
    BuildCooccurArgs, EvaluateArgs, GenerateArgs, MergeArgs, PseudolabelArgs, ReportArgs, SimulateArgs,
};

pub struct Context<'a> {
    pub file: &'a ConfigFile,
    pub print_config: bool,
}

impl Context<'_> {
    fn resolver(&self) -> Resolver<'_> {
        Resolver::new(self.file)
    }

    fn emit(&self, resolver: &Resolver<'_>) {
        if self.print_config {
            print!("# effective configuration\n{}", resolver.dump());
        }
    }
}

macro_rules! choice {
    ($name:ident, $target:ty, $($text:literal => $variant:expr),+ $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub $target);

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok(Self($variant)),)+
                    other => Err(format!("unknown value `{other}`, expected one of: {}", [$($text),+].join(", "))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if self.0 == $variant { return f.write_str($text); })+
                unreachable!()
            }
        }
    };
}

choice!(OrientationArg, Orientation, "row" => Orientation::Row, "column" => Orientation::Column);
choice!(IdPolicyArg, IdPolicy, "preserve" => IdPolicy::Preserve, "offset" => IdPolicy::Offset);
choice!(InterpolationArg, Interpolation, "coco101" => Interpolation::Coco101, "pascal11" => Interpolation::Pascal11);

/// Every input must exist before any work starts.
pub fn require_inputs(paths: &[&Path]) -> Result<(), CliError> {
    for path in paths {
        if !path.exists() {
            return Err(CliError::Io(format!("input not found: {}", path.display())));
        }
    }
    Ok(())
}

/// Outputs go to an existing directory and never overwrite an input.
fn check_outputs(outputs: &[&Path], inputs: &[&Path]) -> Result<(), CliError> {
    for out in outputs {
        let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(CliError::Io(format!("output directory does not exist: {}", parent.display())));
        }
        if let Ok(out_canon) = out.canonicalize() {
            for input in inputs {
                if input.canonicalize().map(|c| c == out_canon).unwrap_or(false) {
                    return Err(CliError::Usage(format!("output {} would overwrite an input", out.display())));
                }
            }
        }
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let (dataset, report) = load_annotations(path)?;
    if !report.clamped.is_empty() || !report.dropped.is_empty() {
        log::warn!(
            "{}: {} boxes clamped, {} dropped",
            path.display(),
            report.clamped.len(),
            report.dropped.len()
        );
    }
    Ok(dataset)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "detector".into())
}

pub fn build_cooccur(ctx: &Context<'_>, a: BuildCooccurArgs) -> Result<(), CliError> {
    let mut r = ctx.resolver();
    let annotations = r.required_path("annotations", a.annotations)?;
    let out = r.required_path("out", a.out)?;
    let csv = r.path("csv", a.csv)?;
    let top_k = r.value("top_k", a.top_k, 10usize)?;
    let smoothing = r.value("smoothing", a.smoothing, 0.0f64)?;
    let orientation = r.value("orientation", a.orientation, OrientationArg(Orientation::Row))?;
    ctx.emit(&r);

    require_inputs(&[&annotations])?;
    let outputs: Vec<&Path> = [Some(out.as_path()), csv.as_deref()].into_iter().flatten().collect();
    check_outputs(&outputs, &[&annotations])?;
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(CliError::Usage(format!("--smoothing must be a finite non-negative number, got {smoothing}")));
    }

    let dataset = load_dataset(&annotations)?;
    if dataset.annotations.is_empty() {
        log::warn!("{} has no annotations; the matrix is all zeros", annotations.display());
    }
    let config = CooccurrenceConfig {
        smoothing,
        orientation: orientation.0,
    };
    let matrix = CooccurrenceMatrix::build_with(&dataset, config);
    save_matrix(&matrix, &out)?;
    let names: Vec<String> = matrix
        .category_ids
        .iter()
        .map(|&id| dataset.category_name(id).unwrap_or("?").to_string())
        .collect();
    if let Some(csv) = &csv {
        write(csv, &matrix.to_csv(&names)?)?;
    }

    println!(
        "{} classes, {} images, {} annotations -> {}",
        matrix.n,
        dataset.images.len(),
        dataset.annotations.len(),
        out.display()
    );
    let pairs = matrix.top_pairs(top_k);
    if !pairs.is_empty() {
        println!("strongest pairs (target | context: normalized, raw):");
        for (x, z, v) in pairs {
            println!("  {:<20} | {:<20} {:.4}  {:.4}", names[x], names[z], v, matrix.raw[x][z]);
        }
    }
    Ok(())
}

pub fn pseudolabel(ctx: &Context<'_>, a: PseudolabelArgs) -> Result<(), CliError> {
    let mut r = ctx.resolver();
    let detections = r.required_path("detections", a.detections)?;
    let annotations = r.required_path("annotations", a.annotations)?;
    let images = r.required_path("images", a.images)?;
    let matrix_path = r.path("matrix", a.matrix)?;
    let out = r.required_path("out", a.out)?;
    let report_path = r.path("report", a.report)?;
    if a.rho_co.is_some() && matrix_path.is_none() {
        return Err(CliError::Usage("--rho-co needs --matrix".into()));
    }
    let rho = r.value("rho", a.rho, 0.5f64)?;
    let use_cooccurrence = matrix_path.is_some() && !a.no_cooccur && r.value("use_cooccurrence", None, true)?;
    let mut config = if use_cooccurrence {
        FilterConfig::cooccurrence(rho, r.value("rho_co", a.rho_co, 0.3f64)?)
    } else {
        FilterConfig::one_hot(rho)
    };
    config.context_threshold = r.value("context_threshold", a.context_threshold, rho)?;
    config.nms_iou = r.value("nms_iou", a.nms_iou, 0.5f64)?;
    config.nms_enabled = !a.no_nms && r.value("nms", None, true)?;
    let source_tag = r.value("source_tag", a.source_tag, file_stem(&detections))?;
    ctx.emit(&r);
    config.validate()?;

    let mut inputs: Vec<&Path> = vec![&detections, &annotations, &images];
    inputs.extend(matrix_path.as_deref());
    require_inputs(&inputs)?;
    let outputs: Vec<&Path> = [Some(out.as_path()), report_path.as_deref()].into_iter().flatten().collect();
    check_outputs(&outputs, &inputs)?;
    if matrix_path.is_some() && !use_cooccurrence {
        log::warn!("co-occurrence disabled; the matrix is ignored");
    }

    let dataset = load_dataset(&annotations)?;
    let image_list = load_image_list(&images)?;
    let (set, load_report) = load_detections(&detections, &image_list, &dataset.category_index(), &source_tag)?;
    if load_report.expanded > 0 {
        log::warn!(
            "{} single-score records expanded: {}",
            load_report.expanded,
            load_report.expansion_rule.as_deref().unwrap_or("")
        );
    }
    let matrix = match (&matrix_path, use_cooccurrence) {
        (Some(path), true) => {
            let m: CooccurrenceMatrix<f64> = load_matrix(path)?;
            m.check_against(&set.categories, Some(&dataset.fingerprint()))?;
            Some(m)
        }
        _ => None,
    };
    let (labels, report) = Labeler::new(config, matrix.as_ref())?.label(&set)?;
    write(&out, &pseudo_labels_to_json(&labels)?)?;
    if let Some(path) = &report_path {
        write(path, &report.to_json()?)?;
    }
    let total = report.total();
    println!(
        "{} detections -> {} pseudo-labels ({} below rho, {} below rho_co, {} suppressed) -> {}",
        set.len(),
        labels.len(),
        total.below_rho,
        total.below_rho_co,
        total.suppressed,
        out.display()
    );
    Ok(())
}

pub fn merge(ctx: &Context<'_>, a: MergeArgs) -> Result<(), CliError> {
    let mut r = ctx.resolver();
    let annotations = r.required_path("annotations", a.annotations)?;
    let images = r.required_path("images", a.images)?;
    let labels_path = r.required_path("labels", a.labels)?;
    let out = r.required_path("out", a.out)?;
    let report_path = r.path("report", a.report)?;
    let id_policy = r.value("id_policy", a.id_policy, IdPolicyArg(IdPolicy::Preserve))?;
    let drop_empty = r.switch("drop_empty", a.drop_empty, false)?;
    let strict_coco = r.switch("strict_coco", a.strict_coco, false)?;
    ctx.emit(&r);

    let inputs: [&Path; 3] = [&annotations, &images, &labels_path];
    require_inputs(&inputs)?;
    let outputs: Vec<&Path> = [Some(out.as_path()), report_path.as_deref()].into_iter().flatten().collect();
    check_outputs(&outputs, &inputs)?;

    let base = load_dataset(&annotations)?;
    let unlabeled = load_image_list(&images)?;
    let labels = load_pseudo_labels(&labels_path)?;
    let mut plan = MergePlan::new(&base, &unlabeled, &labels);
    plan.id_policy = id_policy.0;
    plan.include_empty_images = !drop_empty;
    let (merged, report) = cooclabel::merge(&plan)?;
    write(&out, &merged.to_json(SaveOptions { strict_coco })?)?;
    if let Some(path) = &report_path {
        write(path, &report.to_json()?)?;
    }
    println!(
        "{} images ({} added), {} annotations ({} human, {} pseudo) -> {}",
        merged.images.len(),
        report.added_images,
        merged.annotations.len(),
        report.base_annotations,
        report.pseudo_annotations,
        out.display()
    );
    Ok(())
}

fn protocol_from(r: &mut Resolver<'_>, a: &EvaluateArgs) -> Result<Protocol<f64>, CliError> {
    let iou_thresholds: Vec<f64> = r.list("iou_thresholds", a.iou_thresholds.clone(), &coco_iou_sweep::<f64>())?;
    if iou_thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(CliError::Usage("IoU thresholds must lie in (0, 1]".into()));
    }
    Ok(Protocol {
        iou_thresholds,
        interpolation: r.value("interpolation", a.interpolation, InterpolationArg(Interpolation::Coco101))?.0,
        max_detections: r.optional("max_detections", a.max_detections)?,
        match_iou: r.value("match_iou", a.match_iou, 0.5f64)?,
    })
}

pub fn evaluate(ctx: &Context<'_>, a: EvaluateArgs) -> Result<(), CliError> {
    let mut r = ctx.resolver();
    let ground_truth = r.required_path("ground_truth", a.ground_truth.clone())?;
    let labels = r.path("labels", a.labels.clone())?;
    let detections = r.path("detections", a.detections.clone())?;
    let out = r.path("out", a.out.clone())?;
    let csv = r.path("csv", a.csv.clone())?;
    let protocol = protocol_from(&mut r, &a)?;
    ctx.emit(&r);

    let scored: PathBuf = match (&labels, &detections) {
        (Some(p), None) | (None, Some(p)) => p.clone(),
        _ => return Err(CliError::Usage("give exactly one of --labels or --detections".into())),
    };
    require_inputs(&[&ground_truth, &scored])?;
    let outputs: Vec<&Path> = [out.as_deref(), csv.as_deref()].into_iter().flatten().collect();
    check_outputs(&outputs, &[&ground_truth, &scored])?;

    let gt = load_dataset(&ground_truth)?;
    let predictions: Vec<Prediction<f64>> = if labels.is_some() {
        let labels = load_pseudo_labels::<f64>(&scored)?;
        let index = gt.category_index();
        for l in &labels {
            if index.id_of(l.category) != Some(l.category_id) {
                return Err(CliError::Domain(cooclabel::Error::invalid(
                    "labels",
                    format!("category {} is not index {} of the ground truth", l.category_id, l.category),
                )));
            }
        }
        labels.iter().map(Prediction::from).collect()
    } else {
        let (set, _) = load_detections(&scored, &gt.images, &gt.category_index(), &file_stem(&scored))?;
        predictions_from_detections(&set)?
    };
    let report = cooclabel::evaluate(&predictions, &gt, &protocol)?;
    if let Some(path) = &out {
        write(path, &report.to_json()?)?;
    }
    if let Some(path) = &csv {
        write(path, &report.to_csv()?)?;
    }
    println!("predictions  {}", predictions.len());
    println!("mAP@0.5      {:.4}", report.map_50);
    println!("mAP@sweep    {:.4}", report.map_sweep);
    println!(
        "precision    {:.4}  recall {:.4}  (IoU {})",
        report.pseudo.precision, report.pseudo.recall, protocol.match_iou
    );
    if !report.excluded_classes.is_empty() {
        println!("excluded     {:?} (no ground truth)", report.excluded_classes);
    }
    Ok(())
}

pub fn simulate(ctx: &Context<'_>, a: SimulateArgs) -> Result<(), CliError> {
    let mut r = ctx.resolver();
    let dataset_path = r.required_path("dataset", a.dataset)?;
    let out = r.required_path("out", a.out)?;
    let truth = r.path("truth", a.truth)?;
    let defaults = NoiseModel::default();
    let mut model = NoiseModel {
        seed: r.value("seed", a.seed, defaults.seed)?,
        p_detect: r.value("p_detect", a.p_detect, defaults.p_detect)?,
        box_jitter: r.value("box_jitter", a.box_jitter, defaults.box_jitter)?,
        logit_scale: r.value("logit_scale", a.logit_scale, defaults.logit_scale)?,
        confusion: None,
        fp_rate: r.value("fp_rate", a.fp_rate, defaults.fp_rate)?,
        contextual_fp: r.value("contextual_fp", a.contextual_fp, defaults.contextual_fp)?,
    };
    let p_correct = r.optional("p_correct", a.p_correct)?;
    let source_tag = r.value("source_tag", a.source_tag, "sim".to_string())?;
    ctx.emit(&r);

    require_inputs(&[&dataset_path])?;
    let outputs: Vec<&Path> = [Some(out.as_path()), truth.as_deref()].into_iter().flatten().collect();
    check_outputs(&outputs, &[&dataset_path])?;

    let dataset = load_dataset(&dataset_path)?;
    if let Some(p) = p_correct {
        model.confusion = Some(NoiseModel::uniform_confusion(dataset.num_classes(), p));
    }
    let sim = run_simulation(&dataset, &model, &source_tag)?;
    write(&out, &sim.detections.to_json()?)?;
    if let Some(path) = &truth {
        write(path, &sim.truth.to_json()?)?;
    }
    let fps = sim.truth.links.iter().filter(|l| l.annotation_id.is_none()).count();
    println!(
        "{} images, {} truths -> {} detections ({} false positives) -> {}",
        dataset.images.len(),
        dataset.annotations.len(),
        sim.detections.len(),
        fps,
        out.display()
    );
    Ok(())
}

pub fn report(ctx: &Context<'_>, a: ReportArgs) -> Result<(), CliError> {
    let mut r = ctx.resolver();
    let prior = r.required_path("prior", a.prior)?;
    let ground_truth = r.required_path("ground_truth", a.ground_truth)?;
    let detections = r.required_path("detections", a.detections)?;
    let rho_values: Vec<f64> = r.list("rho_values", a.rho_values, &[0.5, 0.7])?;
    let rho_co_values: Vec<f64> = r.list("rho_co_values", a.rho_co_values, &[0.1, 0.2, 0.3, 0.4])?;
    let out = r.path("out", a.out)?;
    ctx.emit(&r);

    let inputs: [&Path; 3] = [&prior, &ground_truth, &detections];
    require_inputs(&inputs)?;
    let outputs: Vec<&Path> = out.as_deref().into_iter().collect();
    check_outputs(&outputs, &inputs)?;

    let prior = load_dataset(&prior)?;
    let gt = load_dataset(&ground_truth)?;
    if prior.category_index() != gt.category_index() {
        return Err(CliError::Domain(cooclabel::Error::invalid(
            "report",
            "prior and ground truth have different category sets",
        )));
    }
    let (set, _) = load_detections(&detections, &gt.images, &gt.category_index(), &file_stem(&detections))?;
    let matrix = CooccurrenceMatrix::build(&prior);
    let rows = regime_rows(&set, &matrix, &gt, &rho_values, &rho_co_values)?;
    print!("{}", render_table(&rows));
    if let Some(path) = &out {
        let mut text = serde_json::to_string_pretty(&rows).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        write(path, &text)?;
    }
    Ok(())
}

pub fn generate(ctx: &Context<'_>, a: GenerateArgs) -> Result<(), CliError> {
    let mut r = ctx.resolver();
    let out = r.required_path("out", a.out)?;
    let image_list = r.path("image_list", a.image_list)?;
    let d = SceneSpec::default();
    let spec = SceneSpec {
        seed: r.value("seed", a.seed, d.seed)?,
        images: r.value("images", a.images, d.images)?,
        scenes: r.value("scenes", a.scenes, d.scenes)?,
        classes_per_scene: r.value("classes_per_scene", a.classes_per_scene, d.classes_per_scene)?,
        min_objects: r.value("min_objects", a.min_objects, d.min_objects)?,
        max_objects: r.value("max_objects", a.max_objects, d.max_objects)?,
        width: r.value("width", a.width, d.width)?,
        height: r.value("height", a.height, d.height)?,
        first_image_id: r.value("first_image_id", a.first_image_id, d.first_image_id)?,
    };
    ctx.emit(&r);

    let outputs: Vec<&Path> = [Some(out.as_path()), image_list.as_deref()].into_iter().flatten().collect();
    check_outputs(&outputs, &[])?;
    let dataset: Dataset = scene_dataset(&spec)?;
    write(&out, &dataset.to_json(SaveOptions::default())?)?;
    if let Some(path) = &image_list {
        let mut text = serde_json::to_string_pretty(&dataset.images).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        write(path, &text)?;
    }
    println!(
        "{} images, {} classes, {} annotations -> {}",
        dataset.images.len(),
        dataset.categories.len(),
        dataset.annotations.len(),
        out.display()
    );
    Ok(())
}
