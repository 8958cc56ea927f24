//! Experiment drivers behind the `xcl` subcommands.
//!
//! Every driver is a pure function of the config and a seed. Rates are
//! reported in percent (`top1`, `entropy`, `p`); regression errors in the
//! units of the targets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::analysis::{
    average_entropy, evaluate_with, split_by_entropy, uncertainty_vs_lambda, zero_accuracy_subset, MetricsReport,
};
use crate::config::{DataKind, ExperimentConfig, ExperimentKind, ModelSection, SamplerKind, SweepAxis};
use crate::datasets::{
    make_heteroscedastic_regression, split_disjoint, split_indices, subsample_imbalanced, BlobModel, Dataset,
};
use crate::error::{config, data, Result};
use crate::losses::{label_smooth, normalized_entropy, LossSpec, Objective, TargetSource};
use crate::nn::{init_network, train, Network, NetworkSpec, OptimizerState, TrainSettings, TrainingSource};
use crate::results::ResultRow;
use crate::rng::Rng;
use crate::samplers::{fit_toy_generator, importance_weights, TransferSampler};
use crate::sources::{fixed, ground_truth_batch, transfer_set_batch, Labeller, SampledSource};
use crate::teacher::{load_teacher, materialize_transfer_set, save_teacher, teacher_predict, Prediction, Teacher};

const TAG_POOL: u64 = 1;
const TAG_TEST: u64 = 2;
const TAG_TEACHER: u64 = 100;
const TAG_STUDENT: u64 = 200;
const TAG_TRANSFER: u64 = 300;
const TAG_CURVE: u64 = 400;

/// Shared state of one experiment run.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub hash: String,
    /// Prediction parallelism for evaluation.
    pub threads: usize,
    /// Where model files are read and written.
    pub out_dir: PathBuf,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a ExperimentConfig, out_dir: &Path, threads: usize) -> Self {
        Self { cfg, hash: cfg.hash(), threads: threads.max(1), out_dir: out_dir.to_path_buf() }
    }

    fn row(&self, seed: u64, method: &str, metric: &str, value: f64) -> Result<ResultRow> {
        ResultRow::new(self.cfg.experiment_id(), seed, method, metric, value, &self.hash)
    }

    fn teacher_file(&self, seed: u64) -> PathBuf {
        if self.cfg.teacher_path.is_empty() {
            self.out_dir.join(format!("teacher-{seed}.model"))
        } else {
            PathBuf::from(&self.cfg.teacher_path)
        }
    }
}

/// Run the configured experiment over all seeds.
pub fn run(ctx: &Ctx<'_>) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &seed in &ctx.cfg.experiment.seeds {
        rows.extend(run_seed(ctx, seed)?);
    }
    Ok(rows)
}

pub fn run_seed(ctx: &Ctx<'_>, seed: u64) -> Result<Vec<ResultRow>> {
    match ctx.cfg.experiment.kind {
        ExperimentKind::TrainTeacher => train_teacher_cmd(ctx, seed),
        ExperimentKind::Distill => distill_cmd(ctx, seed),
        ExperimentKind::Observation1 => observation1(ctx, seed),
        ExperimentKind::Observation2 => observation2(ctx, seed),
        ExperimentKind::Sweep => sweep(ctx, seed),
        ExperimentKind::CurveUncertainty => curve_uncertainty(ctx, seed),
    }
}

fn pct(v: Option<f64>) -> f64 {
    100.0 * v.unwrap_or(f64::NAN)
}

/// Teacher split A, held-out split B and a test set drawn from the same
/// generating model.
pub struct Splits {
    pub a: Dataset<f64>,
    pub b: Dataset<f64>,
    pub test: Dataset<f64>,
}

pub fn blob_splits(cfg: &ExperimentConfig, seed: u64) -> Result<Splits> {
    let d = &cfg.data;
    let root = Rng::new(seed);
    let model = BlobModel::new(d.classes, d.dim, d.spread, d.center_scale, &root)?;
    let pool = model.sample(d.per_class, &root.fork(TAG_POOL))?;
    let test = model.sample(d.test_per_class, &root.fork(TAG_TEST))?;
    let (a, b) = split_disjoint(&pool, d.split_fraction, true, &root)?;
    Ok(Splits { a, b, test })
}

pub fn regression_splits(cfg: &ExperimentConfig, seed: u64) -> Result<Splits> {
    let d = &cfg.data;
    let root = Rng::new(seed);
    let pool = make_heteroscedastic_regression(d.regression_n, d.regression_dim, d.noise, &root.fork(TAG_POOL))?;
    let test = make_heteroscedastic_regression(d.regression_test_n, d.regression_dim, d.noise, &root.fork(TAG_TEST))?;
    let (a, b) = split_disjoint(&pool, d.split_fraction, false, &root)?;
    Ok(Splits { a, b, test })
}

fn splits(cfg: &ExperimentConfig, seed: u64) -> Result<Splits> {
    match cfg.data.kind {
        DataKind::Blobs => blob_splits(cfg, seed),
        DataKind::Regression => regression_splits(cfg, seed),
    }
}

fn network_spec(section: &ModelSection, input: usize, output: usize, gaussian: bool) -> NetworkSpec {
    let mut dims = vec![input];
    dims.extend_from_slice(&section.hidden);
    dims.push(output);
    if gaussian {
        NetworkSpec::gaussian(&dims, section.activation)
    } else {
        NetworkSpec::logits(&dims, section.activation)
    }
}

fn output_dim(ds: &Dataset<f64>) -> (usize, bool) {
    match ds.num_classes() {
        Some(c) => (c, false),
        None => (ds.targets().map_or(0, |t| t.cols()), true),
    }
}

/// Initialise and train one network as described by `section`.
pub fn fit(
    section: &ModelSection,
    like: &Dataset<f64>,
    source: &mut dyn TrainingSource<f64>,
    objective: &Objective<f64>,
    rng: &Rng,
) -> Result<Network<f64>> {
    let (out, gaussian) = output_dim(like);
    let net = init_network(&network_spec(section, like.dim(), out, gaussian), rng)?;
    let schedule = section.decay_epochs.iter().map(|&e| (e, section.decay_factor)).collect();
    let mut opt = OptimizerState::new(section.lr, section.momentum, section.weight_decay, schedule)?;
    let settings = TrainSettings { epochs: section.epochs, batch_size: section.batch_size };
    Ok(train(net, source, objective, &mut opt, settings, rng)?.0)
}

fn ground_truth_objective(ds: &Dataset<f64>) -> Objective<f64> {
    let loss = if ds.num_classes().is_some() { LossSpec::CrossEntropySoft } else { LossSpec::GaussianNll };
    Objective::new(loss, TargetSource::GroundTruth)
}

/// The configured distillation loss for `ds`'s label kind.
fn kd_objective(cfg: &ExperimentConfig, ds: &Dataset<f64>, temperature: f64) -> Objective<f64> {
    if ds.num_classes().is_some() {
        Objective::new(LossSpec::KdCategorical { temperature }, TargetSource::Teacher)
            .with_gt_weight(cfg.loss.kd_gt_weight)
    } else {
        Objective::new(LossSpec::GaussianKl { dim_scaled: cfg.loss.kl_dim_scaled }, TargetSource::Teacher)
    }
}

/// Train the teacher (ensemble when `teacher.members > 1`) on `train_set`.
pub fn train_teacher(cfg: &ExperimentConfig, train_set: &Dataset<f64>, seed: u64) -> Result<Teacher<f64>> {
    let root = Rng::new(seed);
    let objective = ground_truth_objective(train_set);
    let mut members = Vec::with_capacity(cfg.teacher.members);
    for m in 0..cfg.teacher.members {
        let mut src = fixed(ground_truth_batch(train_set, 0.0)?)?;
        members.push(fit(&cfg.teacher, train_set, &mut src, &objective, &root.fork(TAG_TEACHER + m as u64))?);
    }
    if members.len() == 1 {
        Ok(Teacher::Single(members.pop().expect("one member")))
    } else {
        Teacher::ensemble_with(members, true)
    }
}

fn student_rng(seed: u64) -> Rng {
    Rng::new(seed).fork(TAG_STUDENT)
}

/// Train a student with ground-truth labels (optionally smoothed).
pub fn erm_student(cfg: &ExperimentConfig, set: &Dataset<f64>, smoothing: f64, seed: u64) -> Result<Network<f64>> {
    let mut src = fixed(ground_truth_batch(set, smoothing)?)?;
    fit(&cfg.student, set, &mut src, &ground_truth_objective(set), &student_rng(seed))
}

/// Standard KD: the teacher's outputs on `set`, cached once.
pub fn kd_student(
    cfg: &ExperimentConfig,
    teacher: &Teacher<f64>,
    set: &Dataset<f64>,
    objective: &Objective<f64>,
    seed: u64,
) -> Result<Network<f64>> {
    let ts = materialize_transfer_set(
        teacher,
        &TransferSampler::Empirical { replace: false },
        set,
        set.len(),
        &mut Rng::new(seed).fork(TAG_TRANSFER),
    )?;
    let mut src = fixed(transfer_set_batch(&ts)?)?;
    fit(&cfg.student, set, &mut src, objective, &student_rng(seed))
}

/// Build the transfer-set sampler for `kind` over `set`.
pub fn build_sampler(cfg: &ExperimentConfig, kind: SamplerKind, set: &Dataset<f64>) -> Result<TransferSampler<f64>> {
    let s = &cfg.sampler;
    let generator = |mix_classes| -> Result<TransferSampler<f64>> {
        let gen = fit_toy_generator(set)?;
        let w = s.empirical_weight;
        Ok(TransferSampler::Union(vec![
            (TransferSampler::Empirical { replace: true }, w),
            (TransferSampler::GeneratorMix { generator: Arc::new(gen), mix_classes }, 1.0 - w),
        ]))
    };
    Ok(match kind {
        SamplerKind::Empirical => TransferSampler::Empirical { replace: false },
        SamplerKind::Mix => TransferSampler::Mix,
        SamplerKind::CutMix => {
            if s.cutmix_grid.0 * s.cutmix_grid.1 != set.dim() {
                return config(format!(
                    "cutmix grid {}x{} does not match {} features",
                    s.cutmix_grid.0,
                    s.cutmix_grid.1,
                    set.dim()
                ));
            }
            TransferSampler::CutMix { grid: s.cutmix_grid }
        }
        SamplerKind::Noise => TransferSampler::NoiseAugment { sigma: s.noise_sigma },
        SamplerKind::GaussianImage => TransferSampler::GaussianImage,
        SamplerKind::Generator => generator(false)?,
        SamplerKind::GeneratorMix => generator(true)?,
    })
}

/// Result-row method name for a distillation sampler.
pub fn method_name(kind: SamplerKind) -> String {
    match kind {
        SamplerKind::Empirical => "kd".into(),
        other => format!("xcl-{}", other.name()),
    }
}

fn rows_per_epoch(cfg: &ExperimentConfig, set: &Dataset<f64>) -> usize {
    if cfg.sampler.transfer_size == 0 {
        set.len()
    } else {
        cfg.sampler.transfer_size
    }
}

/// Distil over a transfer-set drawn afresh each epoch from `sampler` over `set`.
pub fn online_student(
    cfg: &ExperimentConfig,
    teacher: &Teacher<f64>,
    set: &Dataset<f64>,
    sampler: TransferSampler<f64>,
    objective: &Objective<f64>,
    seed: u64,
) -> Result<Network<f64>> {
    let mut src = SampledSource::new(set, sampler, rows_per_epoch(cfg, set), Labeller::Teacher(teacher))?;
    fit(&cfg.student, set, &mut src, objective, &student_rng(seed))
}

/// Distil with the sampler `kind`: cached teacher outputs for the empirical
/// sampler, online sampling otherwise.
pub fn distill_student(
    cfg: &ExperimentConfig,
    teacher: &Teacher<f64>,
    set: &Dataset<f64>,
    kind: SamplerKind,
    temperature: f64,
    seed: u64,
) -> Result<Network<f64>> {
    let objective = kd_objective(cfg, set, temperature);
    if kind == SamplerKind::Empirical {
        kd_student(cfg, teacher, set, &objective, seed)
    } else {
        online_student(cfg, teacher, set, build_sampler(cfg, kind, set)?, &objective, seed)
    }
}

pub fn eval(ctx: &Ctx<'_>, model: &impl crate::teacher::Predictor<f64>, ds: &Dataset<f64>) -> Result<MetricsReport<f64>> {
    let k = if ds.num_classes().is_some() { ctx.cfg.eval.top_k } else { 1 };
    evaluate_with(model, ds, k, ctx.cfg.eval.error_metric, ctx.threads)
}

/// Mean normalized teacher entropy at temperature `t` over `inputs`.
pub fn teacher_entropy(teacher: &Teacher<f64>, inputs: &crate::Matrix<f64>, t: f64) -> Result<f64> {
    let preds = teacher_predict(teacher, inputs)?;
    let mut total = 0.0;
    for p in &preds {
        let Prediction::Categorical(c) = p else {
            return config("entropy needs a classification teacher");
        };
        total += normalized_entropy(&crate::losses::CategoricalDist::new(c.at_temperature(t)?)?)?;
    }
    Ok(total / preds.len() as f64)
}

fn metric_rows(ctx: &Ctx<'_>, seed: u64, method: &str, suffix: &str, m: &MetricsReport<f64>) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    if let Some(v) = m.top1 {
        rows.push(ctx.row(seed, method, &format!("top1{suffix}"), 100.0 * v)?);
        rows.push(ctx.row(seed, method, &format!("top{}{suffix}", m.k), pct(m.topk))?);
        rows.push(ctx.row(seed, method, &format!("entropy{suffix}"), pct(m.avg_entropy))?);
        rows.push(ctx.row(seed, method, &format!("p{suffix}"), pct(m.avg_truth_prob))?);
    }
    if let Some(e) = m.mean_error {
        rows.push(ctx.row(seed, method, &format!("error{suffix}"), e)?);
        rows.push(ctx.row(seed, method, &format!("sigma{suffix}"), m.avg_sigma.unwrap_or(f64::NAN))?);
    }
    Ok(rows)
}

fn train_teacher_cmd(ctx: &Ctx<'_>, seed: u64) -> Result<Vec<ResultRow>> {
    let s = splits(ctx.cfg, seed)?;
    let teacher = train_teacher(ctx.cfg, &s.a, seed)?;
    std::fs::create_dir_all(&ctx.out_dir)?;
    save_teacher(&teacher, &ctx.teacher_file(seed))?;
    let mut rows = metric_rows(ctx, seed, "teacher", "", &eval(ctx, &teacher, &s.test)?)?;
    rows.extend(metric_rows(ctx, seed, "teacher", "@train", &eval(ctx, &teacher, &s.a)?)?);
    Ok(rows)
}

fn distill_cmd(ctx: &Ctx<'_>, seed: u64) -> Result<Vec<ResultRow>> {
    let path = ctx.teacher_file(seed);
    if !path.exists() {
        return Err(crate::Error::MissingArtifact(format!("teacher model {}", path.display())));
    }
    let teacher = load_teacher::<f64>(&path)?;
    let s = splits(ctx.cfg, seed)?;
    let kind = ctx.cfg.sampler.kind;
    let student = distill_student(ctx.cfg, &teacher, &s.a, kind, ctx.cfg.loss.temperature, seed)?;
    std::fs::create_dir_all(&ctx.out_dir)?;
    save_teacher(&Teacher::Single(student.clone()), &ctx.out_dir.join(format!("student-{seed}.model")))?;
    let method = method_name(kind);
    let (tm, sm) = (eval(ctx, &teacher, &s.test)?, eval(ctx, &student, &s.test)?);
    let mut rows = metric_rows(ctx, seed, "teacher", "", &tm)?;
    rows.extend(metric_rows(ctx, seed, &method, "", &sm)?);
    let gap = match (tm.top1, sm.top1, tm.mean_error, sm.mean_error) {
        (Some(t), Some(s), _, _) => 100.0 * (t - s),
        (_, _, Some(t), Some(s)) => s - t,
        _ => return data("teacher and student report different metric kinds"),
    };
    rows.push(ctx.row(seed, &method, "gap", gap)?);
    Ok(rows)
}

/// High- versus low-entropy held-out halves as transfer-sets.
pub fn observation1(ctx: &Ctx<'_>, seed: u64) -> Result<Vec<ResultRow>> {
    let cfg = ctx.cfg;
    let s = blob_splits(cfg, seed)?;
    let teacher = train_teacher(cfg, &s.a, seed)?;
    let split = split_by_entropy(&teacher, &s.b)?;
    let mut rows = vec![ctx.row(seed, "teacher", "top1", pct(eval(ctx, &teacher, &s.test)?.top1))?];
    let objective = kd_objective(cfg, &s.a, cfg.loss.temperature);
    for (name, idx, h) in [("H", &split.high_set, split.avg_entropy_high), ("L", &split.low_set, split.avg_entropy_low)] {
        let set = s.b.subset(idx)?;
        rows.push(ctx.row(seed, "teacher", &format!("entropy@{name}"), 100.0 * h)?);
        let erm = erm_student(cfg, &set, 0.0, seed)?;
        rows.push(ctx.row(seed, "erm", &format!("top1@{name}"), pct(eval(ctx, &erm, &s.test)?.top1))?);
        let kd = kd_student(cfg, &teacher, &set, &objective, seed)?;
        rows.push(ctx.row(seed, "kd", &format!("top1@{name}"), pct(eval(ctx, &kd, &s.test)?.top1))?);
    }
    Ok(rows)
}

/// Students trained only on held-out points the teacher gets wrong.
pub fn observation2(ctx: &Ctx<'_>, seed: u64) -> Result<Vec<ResultRow>> {
    let cfg = ctx.cfg;
    let s = blob_splits(cfg, seed)?;
    let teacher = train_teacher(cfg, &s.a, seed)?;
    let z_idx = zero_accuracy_subset(&teacher, &s.b)?;
    if z_idx.is_empty() {
        return data("the teacher makes no held-out mistakes; Z is empty");
    }
    let z = s.b.subset(&z_idx)?;
    let on_z = eval(ctx, &teacher, &z)?;
    let mut rows = vec![
        ctx.row(seed, "teacher", "top1", pct(eval(ctx, &teacher, &s.test)?.top1))?,
        ctx.row(seed, "teacher", "size@Z", z.len() as f64)?,
        ctx.row(seed, "teacher", "top1@Z", pct(on_z.top1))?,
        ctx.row(seed, "teacher", "entropy@Z", pct(on_z.avg_entropy))?,
        ctx.row(seed, "teacher", "p@Z", pct(on_z.avg_truth_prob))?,
    ];
    let erm = erm_student(cfg, &z, 0.0, seed)?;
    rows.push(ctx.row(seed, "erm", "top1@Z", pct(eval(ctx, &erm, &s.test)?.top1))?);
    let kd = kd_student(cfg, &teacher, &z, &kd_objective(cfg, &z, cfg.loss.temperature), seed)?;
    rows.push(ctx.row(seed, "kd", "top1@Z", pct(eval(ctx, &kd, &s.test)?.top1))?);
    Ok(rows)
}

/// MixUp baseline: mixed inputs with correspondingly mixed one-hot labels.
pub fn mixup_student(
    cfg: &ExperimentConfig,
    set: &Dataset<f64>,
    n: usize,
    weights: Option<Vec<f64>>,
    seed: u64,
) -> Result<Network<f64>> {
    let mut src = SampledSource::new(set, TransferSampler::Mix, n, Labeller::MixedLabels)?;
    if let Some(w) = weights {
        src = src.with_weights(w)?;
    }
    fit(&cfg.student, set, &mut src, &ground_truth_objective(set), &student_rng(seed))
}

fn weighted<'a>(weights: &Option<Vec<f64>>, src: SampledSource<'a, f64>) -> Result<SampledSource<'a, f64>> {
    match weights {
        Some(w) => src.with_weights(w.clone()),
        None => Ok(src),
    }
}

/// ERM, MixUp, KD and XCL-Mix students drawing `n` rows per epoch from `set`.
fn resampled_family(
    ctx: &Ctx<'_>,
    teacher: &Teacher<f64>,
    set: &Dataset<f64>,
    test: &Dataset<f64>,
    n: usize,
    importance: bool,
    seed: u64,
) -> Result<Vec<(&'static str, f64)>> {
    let cfg = ctx.cfg;
    let weights = if importance { Some(importance_weights(set)?) } else { None };
    let kd = kd_objective(cfg, set, cfg.loss.temperature);
    let gt = ground_truth_objective(set);
    let rng = student_rng(seed);
    let empirical = TransferSampler::Empirical { replace: true };
    let mut out = Vec::new();

    let mut src = weighted(&weights, SampledSource::new(set, empirical.clone(), n, Labeller::GroundTruth { smoothing: 0.0 })?)?;
    out.push(("erm", fit(&cfg.student, set, &mut src, &gt, &rng)?));
    out.push(("mixup", mixup_student(cfg, set, n, weights.clone(), seed)?));
    let mut src = weighted(&weights, SampledSource::new(set, empirical, n, Labeller::Teacher(teacher))?)?;
    out.push(("kd", fit(&cfg.student, set, &mut src, &kd, &rng)?));
    let mut src = weighted(&weights, SampledSource::new(set, TransferSampler::Mix, n, Labeller::Teacher(teacher))?)?;
    out.push(("xcl-mix", fit(&cfg.student, set, &mut src, &kd, &rng)?));

    out.into_iter().map(|(name, net)| Ok((name, pct(eval(ctx, &net, test)?.top1)))).collect()
}

fn sweep(ctx: &Ctx<'_>, seed: u64) -> Result<Vec<ResultRow>> {
    let cfg = ctx.cfg;
    let w = &cfg.sweep;
    let s = blob_splits(cfg, seed)?;
    let mut rows = Vec::new();
    let axis = cfg.experiment.sweep_axis;
    if axis == SweepAxis::Imbalance {
        let (imb, _) = subsample_imbalanced(&s.a, w.imbalance_classes, w.imbalance_keep, &Rng::new(seed))?;
        let teacher = train_teacher(cfg, &imb, seed)?;
        rows.push(ctx.row(seed, "teacher", "top1", pct(eval(ctx, &teacher, &s.test)?.top1))?);
        let n = rows_per_epoch(cfg, &imb);
        for importance in [false, true] {
            for (name, top1) in resampled_family(ctx, &teacher, &imb, &s.test, n, importance, seed)? {
                let method = if importance { format!("{name}+is") } else { name.to_string() };
                rows.push(ctx.row(seed, &method, "top1", top1)?);
            }
        }
        return Ok(rows);
    }

    let teacher = train_teacher(cfg, &s.a, seed)?;
    rows.push(ctx.row(seed, "teacher", "top1", pct(eval(ctx, &teacher, &s.test)?.top1))?);
    let transfer_rng = || Rng::new(seed).fork(TAG_TRANSFER);
    match axis {
        SweepAxis::Temperature => {
            let mixed = TransferSampler::Mix.sample(&s.a, s.a.len(), &mut transfer_rng())?.inputs;
            for &t in &w.temperatures {
                for (kind, inputs) in [(SamplerKind::Empirical, s.a.features()), (SamplerKind::Mix, &mixed)] {
                    let method = method_name(kind);
                    rows.push(ctx.row(seed, &method, &format!("entropy@T={t}"), 100.0 * teacher_entropy(&teacher, inputs, t)?)?);
                    let student = distill_student(cfg, &teacher, &s.a, kind, t, seed)?;
                    rows.push(ctx.row(seed, &method, &format!("top1@T={t}"), pct(eval(ctx, &student, &s.test)?.top1))?);
                }
            }
        }
        SweepAxis::LabelSmoothing => {
            let c = s.a.num_classes().expect("blobs");
            for &eps in &w.label_smoothing {
                let h = normalized_entropy(&label_smooth::<f64>(0, c, eps)?)?;
                rows.push(ctx.row(seed, "erm", &format!("entropy@eps={eps}"), 100.0 * h)?);
                let student = erm_student(cfg, &s.a, eps, seed)?;
                rows.push(ctx.row(seed, "erm", &format!("top1@eps={eps}"), pct(eval(ctx, &student, &s.test)?.top1))?);
            }
        }
        SweepAxis::DatasetSize => {
            let n = rows_per_epoch(cfg, &s.a);
            for &f in &w.dataset_fractions {
                let set = if f >= 1.0 {
                    s.a.clone()
                } else {
                    let (idx, _) = split_indices(&s.a, f, true, &Rng::new(seed))?;
                    if idx.is_empty() {
                        return data(format!("dataset fraction {f} keeps no rows"));
                    }
                    s.a.subset(&idx)?
                };
                for (name, top1) in resampled_family(ctx, &teacher, &set, &s.test, n, false, seed)? {
                    rows.push(ctx.row(seed, name, &format!("top1@frac={f}"), top1)?);
                }
            }
        }
        SweepAxis::Sampler => {
            let mut kinds = vec![SamplerKind::Empirical];
            kinds.extend(w.samplers.iter().copied().filter(|k| *k != SamplerKind::Empirical));
            for kind in kinds {
                let method = method_name(kind);
                let sampler = build_sampler(cfg, kind, &s.a)?;
                let probe = sampler.sample(&s.a, s.a.len(), &mut transfer_rng())?.inputs;
                rows.push(ctx.row(seed, &method, "entropy", 100.0 * teacher_entropy(&teacher, &probe, 1.0)?)?);
                let student = distill_student(cfg, &teacher, &s.a, kind, cfg.loss.temperature, seed)?;
                rows.push(ctx.row(seed, &method, "top1", pct(eval(ctx, &student, &s.test)?.top1))?);
            }
        }
        SweepAxis::Imbalance => unreachable!("handled above"),
    }
    Ok(rows)
}

/// Regression students and the uncertainty-versus-mixing curves.
pub fn curve_uncertainty(ctx: &Ctx<'_>, seed: u64) -> Result<Vec<ResultRow>> {
    let cfg = ctx.cfg;
    let s = regression_splits(cfg, seed)?;
    let teacher = train_teacher(cfg, &s.a, seed)?;
    let students = regression_students(cfg, &teacher, &s.b, seed)?;
    let mut rows = metric_rows(ctx, seed, "teacher", "", &eval(ctx, &teacher, &s.test)?)?;
    for (name, net) in &students {
        rows.extend(metric_rows(ctx, seed, name, "", &eval(ctx, net, &s.test)?)?);
    }
    let grid = &cfg.eval.lambda_grid;
    let curve_rng = || Rng::new(seed).fork(TAG_CURVE);
    let curves: Vec<(&str, Vec<(f64, f64)>)> = vec![
        ("teacher", uncertainty_vs_lambda(&teacher, &s.test, grid, cfg.eval.curve_pairs, &mut curve_rng())?),
        ("kd+unc", uncertainty_vs_lambda(&students[2].1, &s.test, grid, cfg.eval.curve_pairs, &mut curve_rng())?),
        ("xcl-mix", uncertainty_vs_lambda(&students[3].1, &s.test, grid, cfg.eval.curve_pairs, &mut curve_rng())?),
    ];
    for (name, curve) in curves {
        for (lambda, sigma) in curve {
            rows.push(ctx.row(seed, name, &format!("sigma@lambda={lambda}"), sigma)?);
        }
    }
    Ok(rows)
}

/// ERM (NLL on targets), KD (squared error to teacher means), KD+Unc (Gaussian KL) and
/// XCL-Mix (Gaussian KL on mixed inputs), all trained on `set`.
pub fn regression_students(
    cfg: &ExperimentConfig,
    teacher: &Teacher<f64>,
    set: &Dataset<f64>,
    seed: u64,
) -> Result<Vec<(&'static str, Network<f64>)>> {
    let kl = kd_objective(cfg, set, 1.0);
    let plain = Objective::new(LossSpec::MeanSquared, TargetSource::Teacher);
    Ok(vec![
        ("erm", erm_student(cfg, set, 0.0, seed)?),
        ("kd", kd_student(cfg, teacher, set, &plain, seed)?),
        ("kd+unc", kd_student(cfg, teacher, set, &kl, seed)?),
        ("xcl-mix", online_student(cfg, teacher, set, TransferSampler::Mix, &kl, seed)?),
    ])
}

/// Mean normalized entropy of one-hot labels, i.e. 0; kept for the ERM rows of
/// entropy tables.
pub fn label_entropy(ds: &Dataset<f64>) -> Result<f64> {
    let dists = (0..ds.len()).map(|i| ds.one_hot(i)).collect::<Result<Vec<_>>>()?;
    average_entropy(&dists)
}
