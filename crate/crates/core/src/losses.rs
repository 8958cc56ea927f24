//! Output distributions, losses and label transforms.
//!
//! Every loss returns its value together with the gradient with respect to the
//! raw network outputs (logits, or `(μ, s)` for a Gaussian head). Logarithms
//! are natural throughout.

use crate::error::{config, data, shape, Result};
use crate::matrix::sq_dist;
use crate::nn::Head;
use crate::scalar::Scalar;

/// Probability vector on the simplex, optionally carrying the pre-softmax
/// logits it came from so that temperature rescaling is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalDist<F> {
    probs: Vec<F>,
    logits: Option<Vec<F>>,
}

fn simplex_tol<F: Scalar>(c: usize) -> F {
    F::of(1e-9).max(F::of_usize(8 * c.max(1)) * F::epsilon())
}

impl<F: Scalar> CategoricalDist<F> {
    /// Validates the simplex invariant (non-negative, sums to one within 1e-9).
    pub fn new(probs: Vec<F>) -> Result<Self> {
        Self::check(&probs)?;
        Ok(Self { probs, logits: None })
    }

    pub fn with_logits(probs: Vec<F>, logits: Vec<F>) -> Result<Self> {
        Self::check(&probs)?;
        if logits.len() != probs.len() {
            return shape(format!("{} logits for {} classes", logits.len(), probs.len()));
        }
        Ok(Self { probs, logits: Some(logits) })
    }

    pub fn one_hot(class: usize, c: usize) -> Result<Self> {
        if class >= c {
            return config(format!("class {class} out of range for {c} classes"));
        }
        let mut probs = vec![F::zero(); c];
        probs[class] = F::one();
        Ok(Self { probs, logits: None })
    }

    pub fn uniform(c: usize) -> Result<Self> {
        if c == 0 {
            return config("empty distribution");
        }
        Ok(Self { probs: vec![F::one() / F::of_usize(c); c], logits: None })
    }

    fn check(probs: &[F]) -> Result<()> {
        if probs.is_empty() {
            return data("empty probability vector");
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < F::zero()) {
            return data(format!("probability {p} outside [0, 1]"));
        }
        let total: F = probs.iter().copied().sum();
        if (total - F::one()).abs() > simplex_tol(probs.len()) {
            return data(format!("probabilities sum to {total}"));
        }
        Ok(())
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn logits(&self) -> Option<&[F]> {
        self.logits.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    /// Distribution at temperature `t`. At `t == 1` this is the stored
    /// distribution itself; otherwise the stored logits are rescaled, falling
    /// back to `log(probs)` when no logits were kept.
    pub fn at_temperature(&self, t: F) -> Result<Vec<F>> {
        check_temperature(t)?;
        if t == F::one() {
            return Ok(self.probs.clone());
        }
        let z: Vec<F> = match &self.logits {
            Some(l) => l.clone(),
            None => self.probs.iter().map(|p| p.ln()).collect(),
        };
        Ok(softmax_raw(&z, t))
    }
}

/// Isotropic Gaussian prediction: mean `mu` and log-variance `s = log σ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPred<F> {
    pub mu: Vec<F>,
    pub s: F,
}

impl<F: Scalar> GaussianPred<F> {
    pub fn new(mu: Vec<F>, s: F) -> Result<Self> {
        if mu.is_empty() {
            return data("Gaussian prediction needs d >= 1");
        }
        if !s.is_finite() {
            return data(format!("non-finite log-variance {s}"));
        }
        Ok(Self { mu, s })
    }

    /// Split a raw head output `(μ_1..μ_d, s)`.
    pub fn from_raw(raw: &[F]) -> Result<Self> {
        match raw.split_last() {
            Some((&s, mu)) if !mu.is_empty() => Self::new(mu.to_vec(), s),
            _ => shape(format!("Gaussian head output needs at least 2 values, got {}", raw.len())),
        }
    }

    pub fn to_raw(&self) -> Vec<F> {
        let mut v = self.mu.clone();
        v.push(self.s);
        v
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Predicted standard deviation `exp(s/2)`.
    pub fn sigma(&self) -> F {
        (self.s * F::of(0.5)).exp()
    }
}

/// A value and its gradient with respect to the raw outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad<F> {
    pub loss: F,
    pub grad: Vec<F>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossSpec<F> {
    /// Cross-entropy against a (possibly soft) target distribution.
    CrossEntropySoft,
    /// `KL(teacher_T ‖ student_T)`; no `T²` gradient rescaling.
    KdCategorical { temperature: F },
    GaussianNll,
    /// `½‖μ − target‖²` on the mean only; `s` receives no gradient.
    MeanSquared,
    /// Gaussian KL to the teacher. `dim_scaled` multiplies the variance terms
    /// by `d` (the textbook isotropic form); off by default.
    GaussianKl { dim_scaled: bool },
}

/// Where training targets come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetSource {
    GroundTruth,
    Teacher,
}

/// Per-row training target.
#[derive(Clone, Debug, PartialEq)]
pub enum Target<F> {
    Categorical(CategoricalDist<F>),
    Regression(Vec<F>),
    Gaussian(GaussianPred<F>),
}

impl<F: Scalar> LossSpec<F> {
    pub fn validate(&self) -> Result<()> {
        if let LossSpec::KdCategorical { temperature } = self {
            check_temperature(*temperature)?;
        }
        Ok(())
    }

    pub fn accepts_head(&self, head: Head) -> bool {
        matches!(
            (self, head),
            (LossSpec::CrossEntropySoft | LossSpec::KdCategorical { .. }, Head::Logits(_))
                | (
                    LossSpec::GaussianNll | LossSpec::MeanSquared | LossSpec::GaussianKl { .. },
                    Head::Gaussian(_)
                )
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::CrossEntropySoft => "cross_entropy_soft",
            LossSpec::KdCategorical { .. } => "kd_categorical",
            LossSpec::GaussianNll => "gaussian_nll",
            LossSpec::MeanSquared => "mean_squared",
            LossSpec::GaussianKl { .. } => "gaussian_kl",
        }
    }

    /// Loss and raw-output gradient for one row.
    pub fn evaluate(&self, raw: &[F], target: &Target<F>) -> Result<LossGrad<F>> {
        match (self, target) {
            (LossSpec::CrossEntropySoft, Target::Categorical(t)) => cross_entropy_soft(raw, t),
            (LossSpec::KdCategorical { temperature }, Target::Categorical(t)) => {
                kd_categorical(t, raw, *temperature)
            }
            (LossSpec::GaussianNll, Target::Regression(y)) => {
                gaussian_nll(&GaussianPred::from_raw(raw)?, y)
            }
            // NLL against a teacher: the teacher mean is the regression target.
            (LossSpec::GaussianNll, Target::Gaussian(t)) => {
                gaussian_nll(&GaussianPred::from_raw(raw)?, &t.mu)
            }
            (LossSpec::MeanSquared, Target::Regression(y)) => mean_squared(&GaussianPred::from_raw(raw)?, y),
            (LossSpec::MeanSquared, Target::Gaussian(t)) => mean_squared(&GaussianPred::from_raw(raw)?, &t.mu),
            (LossSpec::GaussianKl { dim_scaled }, Target::Gaussian(t)) => {
                gaussian_kl_with(t, &GaussianPred::from_raw(raw)?, *dim_scaled)
            }
            (spec, _) => config(format!("{} cannot consume this target kind", spec.name())),
        }
    }
}

/// Loss plus the optional ground-truth blend of classic KD.
///
/// `kd_gt_weight = w` trains on `(1 − w)·loss(teacher) + w·CE(ground truth)`;
/// the default `w = 0` is pure teacher matching.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective<F> {
    pub loss: LossSpec<F>,
    pub target: TargetSource,
    pub kd_gt_weight: F,
}

impl<F: Scalar> Objective<F> {
    pub fn new(loss: LossSpec<F>, target: TargetSource) -> Self {
        Self { loss, target, kd_gt_weight: F::zero() }
    }

    pub fn with_gt_weight(mut self, w: F) -> Self {
        self.kd_gt_weight = w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(F::zero()..=F::one()).contains(&self.kd_gt_weight) {
            return config(format!("kd_gt_weight {} outside [0, 1]", self.kd_gt_weight));
        }
        Ok(())
    }

    pub fn evaluate(
        &self,
        raw: &[F],
        target: &Target<F>,
        truth: Option<&CategoricalDist<F>>,
    ) -> Result<LossGrad<F>> {
        let main = self.loss.evaluate(raw, target)?;
        let w = self.kd_gt_weight;
        if w == F::zero() {
            return Ok(main);
        }
        let Some(truth) = truth else {
            return config("kd_gt_weight > 0 requires ground-truth labels");
        };
        let gt = cross_entropy_soft(raw, truth)?;
        Ok(LossGrad {
            loss: (F::one() - w) * main.loss + w * gt.loss,
            grad: main.grad.iter().zip(&gt.grad).map(|(&a, &b)| (F::one() - w) * a + w * b).collect(),
        })
    }
}

fn check_temperature<F: Scalar>(t: F) -> Result<()> {
    if !(t > F::zero()) || !t.is_finite() {
        return config(format!("temperature must be positive and finite, got {t}"));
    }
    Ok(())
}

pub(crate) fn argmax<F: Scalar>(v: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn log_softmax_raw<F: Scalar>(logits: &[F], t: F) -> Vec<F> {
    let m = logits.iter().fold(F::neg_infinity(), |m, &z| m.max(z / t));
    let lse = logits.iter().map(|&z| (z / t - m).exp()).sum::<F>().ln() + m;
    logits.iter().map(|&z| z / t - lse).collect()
}

fn softmax_raw<F: Scalar>(logits: &[F], t: F) -> Vec<F> {
    let m = logits.iter().fold(F::neg_infinity(), |m, &z| m.max(z / t));
    let e: Vec<F> = logits.iter().map(|&z| (z / t - m).exp()).collect();
    let total: F = e.iter().copied().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Temperature softmax with max subtraction. The input logits are kept on the
/// returned distribution.
pub fn softmax<F: Scalar>(logits: &[F], t: F) -> Result<CategoricalDist<F>> {
    check_temperature(t)?;
    if logits.is_empty() {
        return config("softmax of an empty vector");
    }
    CategoricalDist::with_logits(softmax_raw(logits, t), logits.to_vec())
}

/// `−Σ_j target_j · log softmax(logits)_j`; gradient `softmax(logits) − target`.
pub fn cross_entropy_soft<F: Scalar>(logits: &[F], target: &CategoricalDist<F>) -> Result<LossGrad<F>> {
    if logits.len() != target.num_classes() {
        return shape(format!("{} logits for a {}-class target", logits.len(), target.num_classes()));
    }
    let logp = log_softmax_raw(logits, F::one());
    let loss = target
        .probs
        .iter()
        .zip(&logp)
        .filter(|(&p, _)| p > F::zero())
        .fold(F::zero(), |acc, (&p, &lp)| acc - p * lp);
    let grad = logp.iter().zip(&target.probs).map(|(&lp, &p)| lp.exp() - p).collect();
    Ok(LossGrad { loss, grad })
}

/// `KL(teacher_T ‖ softmax(student_logits / T))` with `0·log 0 = 0`.
///
/// Gradient with respect to the student logits is `(q_T − p_T) / T`.
pub fn kd_categorical<F: Scalar>(
    teacher: &CategoricalDist<F>,
    student_logits: &[F],
    t: F,
) -> Result<LossGrad<F>> {
    check_temperature(t)?;
    CategoricalDist::<F>::check(&teacher.probs)?;
    if student_logits.len() != teacher.num_classes() {
        return shape(format!(
            "{} student logits for a {}-class teacher",
            student_logits.len(),
            teacher.num_classes()
        ));
    }
    let p = teacher.at_temperature(t)?;
    let logq = log_softmax_raw(student_logits, t);
    let loss = p
        .iter()
        .zip(&logq)
        .filter(|(&pj, _)| pj > F::zero())
        .fold(F::zero(), |acc, (&pj, &lq)| acc + pj * (pj.ln() - lq));
    let grad = logq.iter().zip(&p).map(|(&lq, &pj)| (lq.exp() - pj) / t).collect();
    Ok(LossGrad { loss, grad })
}

/// `½ exp(−s) ‖μ − y‖² + ½ s`. The gradient is laid out like the raw head
/// output: `d` mean components followed by the log-variance.
pub fn gaussian_nll<F: Scalar>(pred: &GaussianPred<F>, target: &[F]) -> Result<LossGrad<F>> {
    if pred.dim() != target.len() {
        return shape(format!("{}-d prediction for a {}-d target", pred.dim(), target.len()));
    }
    let half = F::of(0.5);
    let inv_var = (-pred.s).exp();
    let r2 = sq_dist(&pred.mu, target);
    let loss = half * inv_var * r2 + half * pred.s;
    let mut grad: Vec<F> = pred.mu.iter().zip(target).map(|(&m, &y)| inv_var * (m - y)).collect();
    grad.push(-half * inv_var * r2 + half);
    Ok(LossGrad { loss, grad })
}

/// `½‖μ − y‖²`; the log-variance slot gets a zero gradient.
pub fn mean_squared<F: Scalar>(pred: &GaussianPred<F>, target: &[F]) -> Result<LossGrad<F>> {
    if pred.dim() != target.len() {
        return shape(format!("{}-d prediction for a {}-d target", pred.dim(), target.len()));
    }
    let loss = F::of(0.5) * sq_dist(&pred.mu, target);
    let mut grad: Vec<F> = pred.mu.iter().zip(target).map(|(&m, &y)| m - y).collect();
    grad.push(F::zero());
    Ok(LossGrad { loss, grad })
}

/// `½ [exp(s^τ − s) + exp(−s)‖μ^τ − μ‖² − (s^τ − s) − 1]`, differentiated
/// with respect to the student's `(μ, s)` only.
pub fn gaussian_kl<F: Scalar>(teacher: &GaussianPred<F>, student: &GaussianPred<F>) -> Result<LossGrad<F>> {
    gaussian_kl_with(teacher, student, false)
}

/// As [`gaussian_kl`]; `dim_scaled` multiplies the variance terms by `d`.
pub fn gaussian_kl_with<F: Scalar>(
    teacher: &GaussianPred<F>,
    student: &GaussianPred<F>,
    dim_scaled: bool,
) -> Result<LossGrad<F>> {
    if teacher.dim() != student.dim() {
        return shape(format!("{}-d teacher vs {}-d student", teacher.dim(), student.dim()));
    }
    let half = F::of(0.5);
    let k = if dim_scaled { F::of_usize(student.dim()) } else { F::one() };
    let delta = teacher.s - student.s;
    let ratio = delta.exp();
    let inv_var = (-student.s).exp();
    let r2 = sq_dist(&teacher.mu, &student.mu);
    let loss = half * (k * (ratio - delta - F::one()) + inv_var * r2);
    let mut grad: Vec<F> =
        student.mu.iter().zip(&teacher.mu).map(|(&m, &mt)| inv_var * (m - mt)).collect();
    grad.push(half * (k * (F::one() - ratio) - inv_var * r2));
    Ok(LossGrad { loss, grad })
}

/// `−Σ p_j log p_j / log c`, clamped to `[0, 1]`.
pub fn normalized_entropy<F: Scalar>(dist: &CategoricalDist<F>) -> Result<F> {
    let c = dist.num_classes();
    if c < 2 {
        return config("normalized entropy needs at least 2 classes");
    }
    let h = dist
        .probs
        .iter()
        .filter(|&&p| p > F::zero())
        .fold(F::zero(), |acc, &p| acc - p * p.ln());
    Ok((h / F::of_usize(c).ln()).max(F::zero()).min(F::one()))
}

/// `1 − ε` on the true class and `ε / (c − 1)` elsewhere.
pub fn label_smooth<F: Scalar>(class_index: usize, c: usize, eps: F) -> Result<CategoricalDist<F>> {
    if !(eps >= F::zero() && eps < F::one()) {
        return config(format!("label smoothing ε = {eps} outside [0, 1)"));
    }
    if class_index >= c {
        return config(format!("class {class_index} out of range for {c} classes"));
    }
    if c == 1 {
        return CategoricalDist::one_hot(0, 1);
    }
    let off = eps / F::of_usize(c - 1);
    let probs = (0..c).map(|j| if j == class_index { F::one() - eps } else { off }).collect();
    CategoricalDist::new(probs)
}

/// `λ y_i + (1 − λ) y_j`.
pub fn mix_labels<F: Scalar>(
    y_i: &CategoricalDist<F>,
    y_j: &CategoricalDist<F>,
    lambda: F,
) -> Result<CategoricalDist<F>> {
    if !(lambda >= F::zero() && lambda <= F::one()) {
        return config(format!("mixing coefficient {lambda} outside [0, 1]"));
    }
    if y_i.num_classes() != y_j.num_classes() {
        return shape(format!("mixing {}- and {}-class labels", y_i.num_classes(), y_j.num_classes()));
    }
    let probs = y_i
        .probs
        .iter()
        .zip(&y_j.probs)
        .map(|(&a, &b)| lambda * a + (F::one() - lambda) * b)
        .collect();
    CategoricalDist::new(probs)
}
