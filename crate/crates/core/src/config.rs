//! Experiment configuration: flat `section.key = value` lines.
//!
//! Blank lines and `#` comments are ignored. Every key has a default, unknown
//! or repeated keys are errors. Lists are comma separated.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::analysis::ErrorKind;
use crate::datasets::NoiseProfile;
use crate::error::{config, Result};
use crate::nn::Activation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    TrainTeacher,
    Distill,
    Observation1,
    Observation2,
    Sweep,
    CurveUncertainty,
}

impl ExperimentKind {
    pub const ALL: [Self; 6] = [
        Self::TrainTeacher,
        Self::Distill,
        Self::Observation1,
        Self::Observation2,
        Self::Sweep,
        Self::CurveUncertainty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TrainTeacher => "train-teacher",
            Self::Distill => "distill",
            Self::Observation1 => "observation1",
            Self::Observation2 => "observation2",
            Self::Sweep => "sweep",
            Self::CurveUncertainty => "curve-uncertainty",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).map_or_else(|| config(format!("unknown experiment `{s}`")), Ok)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Temperature,
    LabelSmoothing,
    DatasetSize,
    Imbalance,
    Sampler,
}

impl SweepAxis {
    pub const ALL: [Self; 5] = [Self::Temperature, Self::LabelSmoothing, Self::DatasetSize, Self::Imbalance, Self::Sampler];

    pub fn name(self) -> &'static str {
        match self {
            Self::Temperature => "temperature",
            Self::LabelSmoothing => "label_smoothing",
            Self::DatasetSize => "dataset_size",
            Self::Imbalance => "imbalance",
            Self::Sampler => "sampler",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).map_or_else(|| config(format!("unknown sweep axis `{s}`")), Ok)
    }
}

/// Transfer-set sampler choice for distillation runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Empirical,
    Mix,
    CutMix,
    Noise,
    GaussianImage,
    /// Toy generator conditioned on a single class, half empirical rows.
    Generator,
    /// Toy generator with mixed class vectors, half empirical rows.
    GeneratorMix,
}

impl SamplerKind {
    pub const ALL: [Self; 7] =
        [Self::Empirical, Self::Mix, Self::CutMix, Self::Noise, Self::GaussianImage, Self::Generator, Self::GeneratorMix];

    pub fn name(self) -> &'static str {
        match self {
            Self::Empirical => "empirical",
            Self::Mix => "mix",
            Self::CutMix => "cutmix",
            Self::Noise => "noise",
            Self::GaussianImage => "gaussian-image",
            Self::Generator => "generator",
            Self::GeneratorMix => "generator-mix",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).map_or_else(|| config(format!("unknown sampler `{s}`")), Ok)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Blobs,
    Regression,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// Label written to the `experiment` column; empty means the kind name.
    pub id: String,
    pub seeds: Vec<u64>,
    pub sweep_axis: SweepAxis,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSection {
    pub kind: DataKind,
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub spread: f64,
    pub center_scale: f64,
    /// Fraction of the pool that goes to the teacher's split A.
    pub split_fraction: f64,
    pub regression_n: usize,
    pub regression_test_n: usize,
    pub regression_dim: usize,
    pub noise: NoiseProfile,
}

/// Architecture and optimiser for one trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    /// Ensemble size (teacher only; ignored for students).
    pub members: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossSection {
    pub temperature: f64,
    pub kd_gt_weight: f64,
    pub kl_dim_scaled: bool,
    pub label_smoothing: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerSection {
    pub kind: SamplerKind,
    /// Transfer-set rows per epoch; 0 means the size of the source data.
    pub transfer_size: usize,
    pub noise_sigma: f64,
    pub cutmix_grid: (usize, usize),
    /// Weight of empirical rows in the generator unions.
    pub empirical_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSection {
    pub temperatures: Vec<f64>,
    pub label_smoothing: Vec<f64>,
    pub dataset_fractions: Vec<f64>,
    pub imbalance_classes: usize,
    pub imbalance_keep: f64,
    pub samplers: Vec<SamplerKind>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSection {
    pub top_k: usize,
    pub error_metric: ErrorKind,
    pub lambda_grid: Vec<f64>,
    pub curve_pairs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub data: DataSection,
    pub teacher: ModelSection,
    pub student: ModelSection,
    pub loss: LossSection,
    pub sampler: SamplerSection,
    pub sweep: SweepSection,
    pub eval: EvalSection,
    /// Output directory and teacher model path (not part of the hash).
    pub output_dir: String,
    pub teacher_path: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentSection {
                kind: ExperimentKind::Observation1,
                id: String::new(),
                seeds: (0..7).collect(),
                sweep_axis: SweepAxis::Temperature,
            },
            data: DataSection {
                kind: DataKind::Blobs,
                classes: 10,
                dim: 16,
                per_class: 200,
                test_per_class: 100,
                spread: 0.9,
                center_scale: 1.0,
                split_fraction: 0.5,
                regression_n: 1200,
                regression_test_n: 2000,
                regression_dim: 2,
                noise: NoiseProfile::Sinusoidal,
            },
            teacher: ModelSection {
                hidden: vec![64],
                activation: Activation::Relu,
                epochs: 20,
                batch_size: 32,
                lr: 0.01,
                momentum: 0.9,
                weight_decay: 0.01,
                decay_epochs: vec![],
                decay_factor: 0.1,
                members: 1,
            },
            student: ModelSection {
                hidden: vec![32],
                activation: Activation::Relu,
                epochs: 60,
                batch_size: 32,
                lr: 0.05,
                momentum: 0.9,
                weight_decay: 0.0,
                decay_epochs: vec![],
                decay_factor: 0.1,
                members: 1,
            },
            loss: LossSection { temperature: 1.0, kd_gt_weight: 0.0, kl_dim_scaled: false, label_smoothing: 0.1 },
            sampler: SamplerSection {
                kind: SamplerKind::Empirical,
                transfer_size: 0,
                noise_sigma: 0.02f64.sqrt(),
                cutmix_grid: (4, 4),
                empirical_weight: 0.5,
            },
            sweep: SweepSection {
                temperatures: vec![1.0, 1.5, 2.0, 5.0, 10.0],
                label_smoothing: vec![0.1, 0.18, 0.4, 0.8],
                dataset_fractions: vec![1.0, 0.25, 0.0625, 0.015625],
                imbalance_classes: 8,
                imbalance_keep: 0.1,
                samplers: vec![
                    SamplerKind::GaussianImage,
                    SamplerKind::Noise,
                    SamplerKind::Mix,
                    SamplerKind::Generator,
                    SamplerKind::GeneratorMix,
                ],
            },
            eval: EvalSection {
                top_k: 5,
                error_metric: ErrorKind::Euclidean,
                lambda_grid: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
                curve_pairs: 1000,
            },
            output_dir: "out".into(),
            teacher_path: String::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().or_else(|_| config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => config(format!("`{key}`: expected true or false, got `{v}`")),
    }
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults for `kind`, with the experiment kind set.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let mut c = Self::default();
        c.experiment.kind = kind;
        if kind == ExperimentKind::Observation2 {
            // A small teacher-wrong subset: most data goes to the teacher.
            c.data.split_fraction = 0.9;
            c.student.epochs = 150;
        }
        if kind == ExperimentKind::CurveUncertainty {
            // Regression wants a well-fit teacher holding most of the data and
            // long, decayed student runs.
            c.data.kind = DataKind::Regression;
            c.data.split_fraction = 0.9;
            c.teacher.hidden = vec![64, 64];
            c.teacher.epochs = 200;
            c.teacher.weight_decay = 0.0;
            c.student.epochs = 1000;
            c.student.lr = 0.02;
            c.student.decay_epochs = vec![600, 900];
        }
        c
    }

    /// Parse config text on top of the defaults for `kind`.
    pub fn parse(text: &str, kind: ExperimentKind) -> Result<Self> {
        let mut c = Self::for_kind(kind);
        let mut seen = std::collections::BTreeSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return config(format!("line {}: expected `key = value`", no + 1));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return config(format!("line {}: `{key}` set twice", no + 1));
            }
            c.set(key, value).map_err(|e| match e {
                crate::Error::Config(msg) => crate::Error::Config(format!("line {}: {msg}", no + 1)),
                other => other,
            })?;
        }
        if c.experiment.kind != kind {
            return config(format!(
                "config is for `{}` but the `{}` command was run",
                c.experiment.kind.name(),
                kind.name()
            ));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path, kind: ExperimentKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, kind)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let model = key
            .strip_prefix("teacher.")
            .map(|k| (true, k))
            .or_else(|| key.strip_prefix("student.").map(|k| (false, k)));
        if let Some((is_teacher, k)) = model {
            let m = if is_teacher { &mut self.teacher } else { &mut self.student };
            match k {
                "hidden" => m.hidden = parse_list(key, v)?,
                "activation" => m.activation = Activation::parse(v)?,
                "epochs" => m.epochs = parse_num(key, v)?,
                "batch_size" => m.batch_size = parse_num(key, v)?,
                "lr" => m.lr = parse_num(key, v)?,
                "momentum" => m.momentum = parse_num(key, v)?,
                "weight_decay" => m.weight_decay = parse_num(key, v)?,
                "decay_epochs" => m.decay_epochs = parse_list(key, v)?,
                "decay_factor" => m.decay_factor = parse_num(key, v)?,
                "members" if is_teacher => m.members = parse_num(key, v)?,
                _ => return config(format!("unknown key `{key}`")),
            }
            return Ok(());
        }
        match key {
            "experiment.kind" => self.experiment.kind = ExperimentKind::parse(v)?,
            "experiment.id" => self.experiment.id = v.to_string(),
            "experiment.seeds" => self.experiment.seeds = parse_list(key, v)?,
            "experiment.sweep_axis" => self.experiment.sweep_axis = SweepAxis::parse(v)?,
            "data.kind" => {
                self.data.kind = match v {
                    "blobs" => DataKind::Blobs,
                    "regression" => DataKind::Regression,
                    _ => return config(format!("`{key}`: unknown data kind `{v}`")),
                }
            }
            "data.classes" => self.data.classes = parse_num(key, v)?,
            "data.dim" => self.data.dim = parse_num(key, v)?,
            "data.per_class" => self.data.per_class = parse_num(key, v)?,
            "data.test_per_class" => self.data.test_per_class = parse_num(key, v)?,
            "data.spread" => self.data.spread = parse_num(key, v)?,
            "data.center_scale" => self.data.center_scale = parse_num(key, v)?,
            "data.split_fraction" => self.data.split_fraction = parse_num(key, v)?,
            "data.regression_n" => self.data.regression_n = parse_num(key, v)?,
            "data.regression_test_n" => self.data.regression_test_n = parse_num(key, v)?,
            "data.regression_dim" => self.data.regression_dim = parse_num(key, v)?,
            "data.noise" => self.data.noise = NoiseProfile::parse(v)?,
            "loss.temperature" => self.loss.temperature = parse_num(key, v)?,
            "loss.kd_gt_weight" => self.loss.kd_gt_weight = parse_num(key, v)?,
            "loss.kl_dim_scaled" => self.loss.kl_dim_scaled = parse_bool(key, v)?,
            "loss.label_smoothing" => self.loss.label_smoothing = parse_num(key, v)?,
            "sampler.kind" => self.sampler.kind = SamplerKind::parse(v)?,
            "sampler.transfer_size" => self.sampler.transfer_size = parse_num(key, v)?,
            "sampler.noise_sigma" => self.sampler.noise_sigma = parse_num(key, v)?,
            "sampler.cutmix_grid" => {
                let Some((h, w)) = v.split_once('x') else {
                    return config(format!("`{key}`: expected HxW, got `{v}`"));
                };
                self.sampler.cutmix_grid = (parse_num(key, h)?, parse_num(key, w)?);
            }
            "sampler.empirical_weight" => self.sampler.empirical_weight = parse_num(key, v)?,
            "sweep.temperatures" => self.sweep.temperatures = parse_list(key, v)?,
            "sweep.label_smoothing" => self.sweep.label_smoothing = parse_list(key, v)?,
            "sweep.dataset_fractions" => self.sweep.dataset_fractions = parse_list(key, v)?,
            "sweep.imbalance_classes" => self.sweep.imbalance_classes = parse_num(key, v)?,
            "sweep.imbalance_keep" => self.sweep.imbalance_keep = parse_num(key, v)?,
            "sweep.samplers" => {
                self.sweep.samplers = v.split(',').map(|s| SamplerKind::parse(s.trim())).collect::<Result<_>>()?
            }
            "eval.top_k" => self.eval.top_k = parse_num(key, v)?,
            "eval.error_metric" => self.eval.error_metric = ErrorKind::parse(v)?,
            "eval.lambda_grid" => self.eval.lambda_grid = parse_list(key, v)?,
            "eval.curve_pairs" => self.eval.curve_pairs = parse_num(key, v)?,
            "output.dir" => self.output_dir = v.to_string(),
            "output.teacher_path" => self.teacher_path = v.to_string(),
            _ => return config(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if self.experiment.seeds.is_empty() {
            return config("experiment.seeds is empty");
        }
        if d.classes < 2 || d.dim == 0 || d.per_class < 2 || d.test_per_class == 0 {
            return config("blob data needs classes >= 2, dim >= 1, per_class >= 2, test_per_class >= 1");
        }
        if !(d.spread >= 0.0 && d.spread.is_finite() && d.center_scale > 0.0 && d.center_scale.is_finite()) {
            return config("data.spread must be >= 0 and data.center_scale > 0");
        }
        if !(d.split_fraction > 0.0 && d.split_fraction < 1.0) {
            return config("data.split_fraction must lie in (0, 1)");
        }
        if d.regression_n < 4 || d.regression_test_n == 0 || d.regression_dim == 0 {
            return config("regression data needs n >= 4, test_n >= 1, dim >= 1");
        }
        for (name, m) in [("teacher", &self.teacher), ("student", &self.student)] {
            if m.batch_size == 0 || m.hidden.contains(&0) || m.members == 0 {
                return config(format!("{name}: batch_size, hidden widths and members must be positive"));
            }
            if !(m.lr >= 0.0 && m.lr.is_finite() && (0.0..1.0).contains(&m.momentum) && m.weight_decay >= 0.0) {
                return config(format!("{name}: need lr >= 0, momentum in [0, 1), weight_decay >= 0"));
            }
            if !(m.decay_factor > 0.0 && m.decay_factor.is_finite()) {
                return config(format!("{name}: decay_factor must be positive"));
            }
        }
        let l = &self.loss;
        if !(l.temperature > 0.0 && l.temperature.is_finite()) || !(0.0..=1.0).contains(&l.kd_gt_weight) {
            return config("loss: temperature must be positive and kd_gt_weight in [0, 1]");
        }
        if !(0.0..1.0).contains(&l.label_smoothing) {
            return config("loss.label_smoothing must lie in [0, 1)");
        }
        let s = &self.sampler;
        if !(s.noise_sigma >= 0.0 && s.noise_sigma.is_finite()) || !(0.0..=1.0).contains(&s.empirical_weight) {
            return config("sampler: noise_sigma must be >= 0 and empirical_weight in [0, 1]");
        }
        if s.cutmix_grid.0 * s.cutmix_grid.1 == 0 {
            return config("sampler.cutmix_grid must be positive");
        }
        let w = &self.sweep;
        if w.temperatures.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return config("sweep.temperatures must be positive");
        }
        if w.label_smoothing.iter().any(|e| !(0.0..1.0).contains(e)) {
            return config("sweep.label_smoothing values must lie in [0, 1)");
        }
        if w.dataset_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return config("sweep.dataset_fractions must lie in (0, 1]");
        }
        if w.imbalance_classes > d.classes || !(w.imbalance_keep > 0.0 && w.imbalance_keep <= 1.0) {
            return config("sweep: imbalance_classes <= classes and imbalance_keep in (0, 1]");
        }
        let e = &self.eval;
        if e.top_k == 0 || e.top_k > d.classes {
            return config(format!("eval.top_k must lie in 1..={}", d.classes));
        }
        if e.lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) || e.curve_pairs == 0 {
            return config("eval: lambda_grid values in [0, 1] and curve_pairs >= 1");
        }
        Ok(())
    }

    /// Every hashed setting as sorted `key = value` lines. Seeds and output
    /// paths are excluded so runs that differ only in those share a hash.
    pub fn canonical(&self) -> String {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
        put("experiment.kind", self.experiment.kind.name().into());
        put("experiment.id", self.experiment.id.clone());
        put("experiment.sweep_axis", self.experiment.sweep_axis.name().into());
        let d = &self.data;
        put("data.kind", if d.kind == DataKind::Blobs { "blobs" } else { "regression" }.into());
        put("data.classes", d.classes.to_string());
        put("data.dim", d.dim.to_string());
        put("data.per_class", d.per_class.to_string());
        put("data.test_per_class", d.test_per_class.to_string());
        put("data.spread", d.spread.to_string());
        put("data.center_scale", d.center_scale.to_string());
        put("data.split_fraction", d.split_fraction.to_string());
        put("data.regression_n", d.regression_n.to_string());
        put("data.regression_test_n", d.regression_test_n.to_string());
        put("data.regression_dim", d.regression_dim.to_string());
        put("data.noise", d.noise.name().into());
        for (name, m) in [("teacher", &self.teacher), ("student", &self.student)] {
            put(&format!("{name}.hidden"), join(&m.hidden));
            put(&format!("{name}.activation"), m.activation.name().into());
            put(&format!("{name}.epochs"), m.epochs.to_string());
            put(&format!("{name}.batch_size"), m.batch_size.to_string());
            put(&format!("{name}.lr"), m.lr.to_string());
            put(&format!("{name}.momentum"), m.momentum.to_string());
            put(&format!("{name}.weight_decay"), m.weight_decay.to_string());
            put(&format!("{name}.decay_epochs"), join(&m.decay_epochs));
            put(&format!("{name}.decay_factor"), m.decay_factor.to_string());
        }
        put("teacher.members", self.teacher.members.to_string());
        let l = &self.loss;
        put("loss.temperature", l.temperature.to_string());
        put("loss.kd_gt_weight", l.kd_gt_weight.to_string());
        put("loss.kl_dim_scaled", l.kl_dim_scaled.to_string());
        put("loss.label_smoothing", l.label_smoothing.to_string());
        let s = &self.sampler;
        put("sampler.kind", s.kind.name().into());
        put("sampler.transfer_size", s.transfer_size.to_string());
        put("sampler.noise_sigma", s.noise_sigma.to_string());
        put("sampler.cutmix_grid", format!("{}x{}", s.cutmix_grid.0, s.cutmix_grid.1));
        put("sampler.empirical_weight", s.empirical_weight.to_string());
        let w = &self.sweep;
        put("sweep.temperatures", join(&w.temperatures));
        put("sweep.label_smoothing", join(&w.label_smoothing));
        put("sweep.dataset_fractions", join(&w.dataset_fractions));
        put("sweep.imbalance_classes", w.imbalance_classes.to_string());
        put("sweep.imbalance_keep", w.imbalance_keep.to_string());
        put("sweep.samplers", w.samplers.iter().map(|k| k.name()).collect::<Vec<_>>().join(","));
        let e = &self.eval;
        put("eval.top_k", e.top_k.to_string());
        put("eval.error_metric", e.error_metric.name().into());
        put("eval.lambda_grid", join(&e.lambda_grid));
        put("eval.curve_pairs", e.curve_pairs.to_string());
        kv.sort();
        let mut out = String::new();
        for (k, v) in kv {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn experiment_id(&self) -> &str {
        if self.experiment.id.is_empty() {
            self.experiment.kind.name()
        } else {
            &self.experiment.id
        }
    }
}
