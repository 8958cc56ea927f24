//! Training sources: fixed labelled sets and per-epoch sampled transfer-sets.

use crate::datasets::{Dataset, Labels};
use crate::error::{config, data, Result};
use crate::losses::{label_smooth, mix_labels, CategoricalDist, Target};
use crate::nn::{Batch, FixedSource, TrainingSource};
use crate::rng::Rng;
use crate::samplers::{RowOrigin, TransferSampler};
use crate::scalar::Scalar;
use crate::teacher::{teacher_predict, Prediction, Teacher, TransferSet};

fn one_hot_truth<F: Scalar>(labels: &Labels<F>) -> Result<Option<Vec<CategoricalDist<F>>>> {
    match labels {
        Labels::Classes { idx, c } => Ok(Some(idx.iter().map(|&k| CategoricalDist::one_hot(k, *c)).collect::<Result<_>>()?)),
        Labels::Targets(_) => Ok(None),
    }
}

fn prediction_targets<F: Scalar>(preds: Vec<Prediction<F>>) -> Vec<Target<F>> {
    preds
        .into_iter()
        .map(|p| match p {
            Prediction::Categorical(c) => Target::Categorical(c),
            Prediction::Gaussian(g) => Target::Gaussian(g),
        })
        .collect()
}

/// Ground-truth targets: (optionally smoothed) one-hot classes or regression targets.
pub fn ground_truth_batch<F: Scalar>(dataset: &Dataset<F>, smoothing: F) -> Result<Batch<F>> {
    let targets = match dataset.labels() {
        Labels::Classes { idx, c } => {
            idx.iter().map(|&k| Ok(Target::Categorical(label_smooth(k, *c, smoothing)?))).collect::<Result<_>>()?
        }
        Labels::Targets(t) => t.iter_rows().map(|r| Target::Regression(r.to_vec())).collect(),
    };
    Ok(Batch { inputs: dataset.features().clone(), targets, truth: one_hot_truth(dataset.labels())? })
}

/// Teacher outputs of a materialised transfer-set as training targets.
pub fn transfer_set_batch<F: Scalar>(ts: &TransferSet<F>) -> Result<Batch<F>> {
    let truth = match &ts.ground_truth {
        Some(l) => one_hot_truth(l)?,
        None => None,
    };
    Ok(Batch { inputs: ts.inputs.clone(), targets: prediction_targets(ts.outputs.clone()), truth })
}

pub fn fixed<F: Scalar>(batch: Batch<F>) -> Result<FixedSource<F>> {
    FixedSource::new(batch)
}

/// How sampled rows get their targets.
#[derive(Clone, Copy, Debug)]
pub enum Labeller<'a, F> {
    /// Teacher distribution at every sampled input.
    Teacher(&'a Teacher<F>),
    /// Ground truth of the source row; only unmodified rows are allowed.
    GroundTruth { smoothing: F },
    /// Ground truth mixed with the same coefficient as the inputs (MixUp).
    MixedLabels,
}

/// Draws `n` fresh rows from `sampler` every epoch and labels them.
pub struct SampledSource<'a, F> {
    dataset: &'a Dataset<F>,
    sampler: TransferSampler<F>,
    weights: Option<Vec<F>>,
    n: usize,
    labeller: Labeller<'a, F>,
}

impl<'a, F: Scalar> SampledSource<'a, F> {
    pub fn new(
        dataset: &'a Dataset<F>,
        sampler: TransferSampler<F>,
        n: usize,
        labeller: Labeller<'a, F>,
    ) -> Result<Self> {
        sampler.validate()?;
        if n == 0 {
            return config("rows per epoch must be positive");
        }
        if matches!(labeller, Labeller::MixedLabels) && dataset.num_classes().is_none() {
            return config("mixed labels need a classification dataset");
        }
        Ok(Self { dataset, sampler, weights: None, n, labeller })
    }

    /// Draw source rows with these per-row probabilities.
    pub fn with_weights(mut self, weights: Vec<F>) -> Result<Self> {
        if weights.len() != self.dataset.len() {
            return data(format!("{} weights for {} rows", weights.len(), self.dataset.len()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    fn truth_of(&self, origin: &RowOrigin<F>) -> Result<Target<F>> {
        let c = self.dataset.num_classes();
        let one_hot = |i: usize| self.dataset.one_hot(i);
        match (&self.labeller, origin, c) {
            (Labeller::GroundTruth { smoothing }, RowOrigin::Row(i), Some(c)) => {
                Ok(Target::Categorical(label_smooth(self.dataset.class_labels().unwrap()[*i], c, *smoothing)?))
            }
            (Labeller::GroundTruth { .. }, RowOrigin::Row(i), None) => {
                Ok(Target::Regression(self.dataset.targets().unwrap().row(*i).to_vec()))
            }
            (Labeller::MixedLabels, RowOrigin::Row(i), _) => Ok(Target::Categorical(one_hot(*i)?)),
            (Labeller::MixedLabels, RowOrigin::Mix { i, j, lambda } | RowOrigin::CutMix { i, j, lambda }, _) => {
                Ok(Target::Categorical(mix_labels(&one_hot(*i)?, &one_hot(*j)?, *lambda)?))
            }
            _ => config("this sampler produces rows without ground-truth labels"),
        }
    }
}

impl<F: Scalar> TrainingSource<F> for SampledSource<'_, F> {
    fn input_dim(&self) -> usize {
        self.dataset.dim()
    }

    fn next_epoch(&mut self, rng: &mut Rng) -> Result<Batch<F>> {
        let batch = self.sampler.sample_weighted(self.dataset, self.weights.as_deref(), self.n, rng)?;
        let targets = match self.labeller {
            Labeller::Teacher(t) => prediction_targets(teacher_predict(t, &batch.inputs)?),
            _ => batch.origins.iter().map(|o| self.truth_of(o)).collect::<Result<_>>()?,
        };
        Ok(Batch { inputs: batch.inputs, targets, truth: None })
    }
}
