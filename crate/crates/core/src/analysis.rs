//! Measurements: entropy splits, zero-accuracy subsets, metrics and the
//! uncertainty-versus-mixing curve.

use rand::Rng as _;

use crate::datasets::{Dataset, Labels};
use crate::error::{config, data, shape, Result};
use crate::losses::{normalized_entropy, CategoricalDist};
use crate::matrix::Matrix;
use crate::nn::Head;
use crate::rng::Rng;
use crate::samplers::mix_pair;
use crate::scalar::Scalar;
use crate::teacher::{Prediction, Predictor};

/// A held-out set split into its high- and low-entropy halves.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult<F> {
    /// Ascending indices of the high-entropy half (`⌈n/2⌉` rows).
    pub high_set: Vec<usize>,
    /// Ascending indices of the low-entropy half.
    pub low_set: Vec<usize>,
    pub avg_entropy_high: F,
    pub avg_entropy_low: F,
}

fn classifier_outputs<F: Scalar>(
    t: &impl Predictor<F>,
    inputs: &Matrix<F>,
    threads: usize,
) -> Result<Vec<CategoricalDist<F>>> {
    if !t.head().is_classifier() {
        return config("entropy and accuracy need a classification head");
    }
    if t.input_dim() != inputs.cols() {
        return shape(format!("model expects {} features, data has {}", t.input_dim(), inputs.cols()));
    }
    Ok(t.predict_par(inputs, threads)?
        .into_iter()
        .map(|p| match p {
            Prediction::Categorical(c) => c,
            Prediction::Gaussian(_) => unreachable!("classification head"),
        })
        .collect())
}

/// Split `heldout` by the teacher's normalized entropy.
pub fn split_by_entropy<F: Scalar>(t: &impl Predictor<F>, heldout: &Dataset<F>) -> Result<SplitResult<F>> {
    let preds = classifier_outputs(t, heldout.features(), 1)?;
    let h = preds.iter().map(normalized_entropy).collect::<Result<Vec<F>>>()?;
    split_entropies(&h)
}

/// Split precomputed entropies: descending sort with ties broken by ascending
/// index, top `⌈n/2⌉` to the high set.
pub fn split_entropies<F: Scalar>(entropies: &[F]) -> Result<SplitResult<F>> {
    if entropies.is_empty() {
        return data("cannot split an empty set");
    }
    let mut order: Vec<usize> = (0..entropies.len()).collect();
    order.sort_by(|&a, &b| entropies[b].partial_cmp(&entropies[a]).expect("finite entropy").then(a.cmp(&b)));
    let (hi, lo) = order.split_at(entropies.len().div_ceil(2));
    let mean = |idx: &[usize]| {
        if idx.is_empty() {
            F::zero()
        } else {
            idx.iter().map(|&i| entropies[i]).sum::<F>() / F::of_usize(idx.len())
        }
    };
    let (mut high_set, mut low_set) = (hi.to_vec(), lo.to_vec());
    let (avg_entropy_high, avg_entropy_low) = (mean(&high_set), mean(&low_set));
    high_set.sort_unstable();
    low_set.sort_unstable();
    Ok(SplitResult { high_set, low_set, avg_entropy_high, avg_entropy_low })
}

/// Indices on which the teacher's argmax disagrees with the true class.
pub fn zero_accuracy_subset<F: Scalar>(t: &impl Predictor<F>, heldout: &Dataset<F>) -> Result<Vec<usize>> {
    let preds = classifier_outputs(t, heldout.features(), 1)?;
    let Some(truth) = heldout.class_labels() else {
        return config("zero-accuracy subset needs class labels");
    };
    Ok(preds.iter().zip(truth).enumerate().filter(|(_, (p, &y))| p.argmax() != y).map(|(i, _)| i).collect())
}

/// Regression error between a predicted mean and a target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorKind {
    #[default]
    Euclidean,
    /// Angle between the vectors, in degrees.
    Angular,
}

impl ErrorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "angular" => Ok(Self::Angular),
            other => config(format!("unknown error metric `{other}`")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Euclidean => "euclidean",
            Self::Angular => "angular",
        }
    }
}

pub fn error_metric<F: Scalar>(pred_mu: &[F], target: &[F], kind: ErrorKind) -> Result<F> {
    if pred_mu.len() != target.len() {
        return shape(format!("prediction has {} values, target {}", pred_mu.len(), target.len()));
    }
    match kind {
        ErrorKind::Euclidean => Ok(crate::matrix::sq_dist(pred_mu, target).sqrt()),
        ErrorKind::Angular => {
            let (na, nb) = (crate::matrix::dot(pred_mu, pred_mu).sqrt(), crate::matrix::dot(target, target).sqrt());
            if na == F::zero() || nb == F::zero() {
                return data("angular error of a zero vector");
            }
            let cos = (crate::matrix::dot(pred_mu, target) / (na * nb)).max(-F::one()).min(F::one());
            Ok(cos.acos().to_degrees())
        }
    }
}

/// Metrics for one model on one dataset. Classification fields are `None` for
/// regression and vice versa.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport<F> {
    pub n: usize,
    pub k: usize,
    pub top1: Option<F>,
    pub topk: Option<F>,
    pub avg_entropy: Option<F>,
    pub avg_truth_prob: Option<F>,
    pub mean_error: Option<F>,
    /// Mean predicted `σ` (Gaussian heads).
    pub avg_sigma: Option<F>,
}

pub fn evaluate<F: Scalar>(model: &impl Predictor<F>, dataset: &Dataset<F>, k: usize) -> Result<MetricsReport<F>> {
    evaluate_with(model, dataset, k, ErrorKind::Euclidean, 1)
}

/// [`evaluate`] with an explicit regression metric and prediction parallelism.
/// Means are summed sequentially in row order, so `threads` never changes the result.
pub fn evaluate_with<F: Scalar>(
    model: &impl Predictor<F>,
    dataset: &Dataset<F>,
    k: usize,
    kind: ErrorKind,
    threads: usize,
) -> Result<MetricsReport<F>> {
    if model.input_dim() != dataset.dim() {
        return shape(format!("model expects {} features, data has {}", model.input_dim(), dataset.dim()));
    }
    let n = dataset.len();
    let nf = F::of_usize(n);
    match (model.head(), dataset.labels()) {
        (Head::Logits(c), Labels::Classes { idx, c: dc }) => {
            if c != *dc {
                return shape(format!("model has {c} classes, data {dc}"));
            }
            if k == 0 || k > c {
                return config(format!("top-k with k={k} for {c} classes"));
            }
            let preds = classifier_outputs(model, dataset.features(), threads)?;
            let (mut top1, mut topk, mut ent, mut truth) = (0usize, 0usize, F::zero(), F::zero());
            for (p, &y) in preds.iter().zip(idx) {
                top1 += usize::from(p.argmax() == y);
                topk += usize::from(in_top_k(p.probs(), y, k));
                ent = ent + normalized_entropy(p)?;
                truth = truth + p.probs()[y];
            }
            Ok(MetricsReport {
                n,
                k,
                top1: Some(F::of_usize(top1) / nf),
                topk: Some(F::of_usize(topk) / nf),
                avg_entropy: Some(ent / nf),
                avg_truth_prob: Some(truth / nf),
                ..Default::default()
            })
        }
        (Head::Gaussian(d), Labels::Targets(t)) => {
            if d != t.cols() {
                return shape(format!("model predicts {d} dims, targets have {}", t.cols()));
            }
            let preds = model.predict_par(dataset.features(), threads)?;
            let (mut err, mut sig) = (F::zero(), F::zero());
            for (p, y) in preds.iter().zip(t.iter_rows()) {
                let g = p.gaussian().expect("Gaussian head");
                err = err + error_metric(&g.mu, y, kind)?;
                sig = sig + g.sigma();
            }
            Ok(MetricsReport { n, k, mean_error: Some(err / nf), avg_sigma: Some(sig / nf), ..Default::default() })
        }
        _ => config("model head does not match the dataset's label kind"),
    }
}

/// Whether `class` is among the `k` largest entries (ties to the lower index).
fn in_top_k<F: Scalar>(probs: &[F], class: usize, k: usize) -> bool {
    let p = probs[class];
    let ahead = probs.iter().enumerate().filter(|&(j, &q)| q > p || (q == p && j < class)).count();
    ahead < k
}

/// Mean normalized entropy of a set of distributions (0 for one-hot labels).
pub fn average_entropy<F: Scalar>(dists: &[CategoricalDist<F>]) -> Result<F> {
    if dists.is_empty() {
        return data("average entropy of an empty set");
    }
    let total = dists.iter().map(normalized_entropy).collect::<Result<Vec<F>>>()?.into_iter().sum::<F>();
    Ok(total / F::of_usize(dists.len()))
}

/// Mean predicted `σ = exp(s/2)` on mixed pairs `λ x_i + (1-λ) x_j`, per `λ`.
///
/// The same `pairs_per_lambda` pairs are reused at every grid point, so
/// differences along the curve come from `λ` alone.
pub fn uncertainty_vs_lambda<F: Scalar>(
    model: &impl Predictor<F>,
    dataset: &Dataset<F>,
    lambda_grid: &[F],
    pairs_per_lambda: usize,
    rng: &mut Rng,
) -> Result<Vec<(F, F)>> {
    if model.head().is_classifier() {
        return config("uncertainty curve needs a Gaussian head");
    }
    if pairs_per_lambda == 0 {
        return config("pairs_per_lambda must be at least 1");
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(**l >= F::zero() && **l <= F::one())) {
        return config(format!("mixing coefficient {l} outside [0, 1]"));
    }
    let n = dataset.len();
    let pairs: Vec<(usize, usize)> = (0..pairs_per_lambda)
        .map(|_| {
            let i = rng.random_range(0..n);
            let j = if n > 1 { (i + rng.random_range(1..n)) % n } else { i };
            (i, j)
        })
        .collect();
    let x = dataset.features();
    lambda_grid
        .iter()
        .map(|&lambda| {
            let mut batch = Matrix::zeros(0, 0);
            for &(i, j) in &pairs {
                batch.push_row(&mix_pair(x.row(i), x.row(j), lambda)?)?;
            }
            let preds = model.predict(&batch)?;
            let total: F = preds.iter().map(|p| p.gaussian().expect("Gaussian head").sigma()).sum();
            Ok((lambda, total / F::of_usize(pairs.len())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::make_blobs;
    use crate::nn::{init_network, Activation, Layer, Network, NetworkSpec};
    use crate::teacher::Teacher;

    /// Bias-only classifier: same logits for every input.
    fn constant(logits: &[f64], d: usize) -> Network<f64> {
        Network::from_layers(
            vec![Layer { weights: Matrix::zeros(logits.len(), d), bias: logits.to_vec() }],
            Activation::Relu,
            Head::Logits(logits.len()),
        )
        .unwrap()
    }

    fn labelled(idx: Vec<usize>, c: usize) -> Dataset<f64> {
        let x = Matrix::from_vec(idx.len(), 1, (0..idx.len()).map(|i| i as f64).collect()).unwrap();
        Dataset::classification(x, idx, c).unwrap()
    }

    #[test]
    fn entropy_split_example() {
        let s = split_entropies(&[0.9f64, 0.1, 0.8, 0.2]).unwrap();
        assert_eq!(s.high_set, vec![0, 2]);
        assert_eq!(s.low_set, vec![1, 3]);
        assert!((s.avg_entropy_high - 0.85).abs() < 1e-12);
        assert!((s.avg_entropy_low - 0.15).abs() < 1e-12);
    }

    #[test]
    fn identical_predictions_split_by_index() {
        let t = Teacher::Single(constant(&[0.3, 0.1, -0.4], 1));
        let s = split_by_entropy(&t, &labelled(vec![0, 1, 2, 0, 1], 3)).unwrap();
        assert_eq!(s.high_set, vec![0, 1, 2]);
        assert_eq!(s.low_set, vec![3, 4]);
        assert_eq!(s.avg_entropy_high, s.avg_entropy_low);
    }

    #[test]
    fn split_rejects_regression_teacher() {
        let g: Network<f64> = init_network(&NetworkSpec::gaussian(&[1, 3, 1], Activation::Relu), &Rng::new(0)).unwrap();
        assert!(matches!(split_by_entropy(&g, &labelled(vec![0, 1], 2)), Err(crate::Error::Config(_))));
        assert!(matches!(zero_accuracy_subset(&g, &labelled(vec![0, 1], 2)), Err(crate::Error::Config(_))));
    }

    #[test]
    fn zero_accuracy_example() {
        let t = constant(&[5.0, 0.0], 1);
        let ds = labelled(vec![0, 1, 1], 2);
        let z = zero_accuracy_subset(&t, &ds).unwrap();
        assert_eq!(z, vec![1, 2]);
        let on_z = evaluate(&t, &ds.subset(&z).unwrap(), 1).unwrap();
        assert_eq!(on_z.top1, Some(0.0));
        assert!(zero_accuracy_subset(&t, &labelled(vec![0, 0], 2)).unwrap().is_empty());
    }

    #[test]
    fn evaluate_examples() {
        let uniform = constant(&[0.0; 10], 1);
        let ds = labelled((0..10).collect(), 10);
        let m = evaluate(&uniform, &ds, 5).unwrap();
        assert!((m.avg_truth_prob.unwrap() - 0.1).abs() < 1e-12);
        assert!((m.avg_entropy.unwrap() - 1.0).abs() < 1e-12);

        let t = constant(&[3.0, 0.0, 1.0], 1);
        let m = evaluate(&t, &labelled(vec![0, 0, 1], 3), 2).unwrap();
        assert!((m.top1.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.topk.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(evaluate(&t, &labelled(vec![1], 3), 3).unwrap().topk, Some(1.0));
        assert!(matches!(evaluate(&t, &labelled(vec![0], 3), 4), Err(crate::Error::Config(_))));
    }

    #[test]
    fn teacher_scores_perfectly_on_its_own_labels() {
        let ds = make_blobs::<f64>(4, 3, 10, 1.0, 2.0, &Rng::new(0)).unwrap();
        let net: Network<f64> = init_network(&NetworkSpec::logits(&[3, 8, 4], Activation::Tanh), &Rng::new(1)).unwrap();
        let own: Vec<usize> =
            net.predict(ds.features()).unwrap().iter().map(|p| p.categorical().unwrap().argmax()).collect();
        let relabelled = ds.relabel(own, 4).unwrap();
        assert_eq!(evaluate(&net, &relabelled, 1).unwrap().top1, Some(1.0));
    }

    #[test]
    fn metrics_are_row_order_invariant() {
        let ds = make_blobs::<f64>(4, 3, 10, 1.0, 2.0, &Rng::new(3)).unwrap();
        let net: Network<f64> = init_network(&NetworkSpec::logits(&[3, 8, 4], Activation::Tanh), &Rng::new(4)).unwrap();
        let perm: Vec<usize> = (0..ds.len()).rev().collect();
        let (a, b) = (evaluate(&net, &ds, 2).unwrap(), evaluate(&net, &ds.subset(&perm).unwrap(), 2).unwrap());
        assert_eq!(a.top1, b.top1);
        assert_eq!(a.topk, b.topk);
        assert!((a.avg_entropy.unwrap() - b.avg_entropy.unwrap()).abs() < 1e-12);
        assert!((a.avg_truth_prob.unwrap() - b.avg_truth_prob.unwrap()).abs() < 1e-12);

        // Split covariance: the permuted split maps back to the original one.
        let t = Teacher::Single(net);
        let (s, sp) = (split_by_entropy(&t, &ds).unwrap(), split_by_entropy(&t, &ds.subset(&perm).unwrap()).unwrap());
        let mut back: Vec<usize> = sp.high_set.iter().map(|&i| perm[i]).collect();
        back.sort_unstable();
        // Only tied entropies could move across the boundary.
        assert_eq!(back, s.high_set);
    }

    #[test]
    fn threads_do_not_change_metrics() {
        let ds = make_blobs::<f64>(3, 2, 20, 1.0, 2.0, &Rng::new(5)).unwrap();
        let net: Network<f64> = init_network(&NetworkSpec::logits(&[2, 6, 3], Activation::Relu), &Rng::new(6)).unwrap();
        let a = evaluate_with(&net, &ds, 2, ErrorKind::Euclidean, 1).unwrap();
        let b = evaluate_with(&net, &ds, 2, ErrorKind::Euclidean, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn error_metric_examples() {
        for kind in [ErrorKind::Euclidean, ErrorKind::Angular] {
            assert!(error_metric(&[0.3f64, -1.0], &[0.3, -1.0], kind).unwrap().abs() < 1e-6);
        }
        assert!((error_metric(&[1.0f64, 0.0], &[0.0, 1.0], ErrorKind::Angular).unwrap() - 90.0).abs() < 1e-9);
        assert!((error_metric(&[3.0f64, 4.0], &[0.0, 0.0], ErrorKind::Euclidean).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(error_metric(&[0.0, 0.0], &[1.0, 0.0], ErrorKind::Angular), Err(crate::Error::Data(_))));
    }

    #[test]
    fn constant_variance_gives_flat_curve() {
        let net = Network::from_layers(
            vec![Layer { weights: Matrix::zeros(2, 2), bias: vec![0.0, 0.7] }],
            Activation::Relu,
            Head::Gaussian(1),
        )
        .unwrap();
        let ds = make_blobs::<f64>(2, 2, 5, 1.0, 2.0, &Rng::new(0)).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let curve = uncertainty_vs_lambda(&net, &ds, &grid, 7, &mut Rng::new(1)).unwrap();
        assert_eq!(curve.len(), 11);
        for (_, s) in curve {
            assert!((s - 0.35f64.exp()).abs() < 1e-12);
        }
        assert!(uncertainty_vs_lambda(&net, &ds, &[1.5], 1, &mut Rng::new(1)).is_err());
        assert!(uncertainty_vs_lambda(&constant(&[0.0, 0.0], 2), &ds, &[0.5], 1, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn curve_endpoints_use_raw_points() {
        // σ depends on the input, so the endpoints must match evaluation on raw rows.
        let net = Network::from_layers(
            vec![Layer { weights: Matrix::from_rows([[0.0, 0.0], [1.0, -0.5]]).unwrap(), bias: vec![0.0, 0.0] }],
            Activation::Relu,
            Head::Gaussian(1),
        )
        .unwrap();
        let ds = make_blobs::<f64>(2, 2, 1, 1.0, 2.0, &Rng::new(0)).unwrap();
        let curve = uncertainty_vs_lambda(&net, &ds, &[0.0, 1.0], 1, &mut Rng::new(2)).unwrap();
        let raw: Vec<f64> = net.predict(ds.features()).unwrap().iter().map(|p| p.gaussian().unwrap().sigma()).collect();
        let (mut ends, mut raw) = (vec![curve[0].1, curve[1].1], raw);
        ends.sort_by(f64::total_cmp);
        raw.sort_by(f64::total_cmp);
        assert_eq!(ends, raw);
    }
}
