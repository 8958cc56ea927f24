//! Approximations `q(x)` of the data distribution used to build transfer-sets.

use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::datasets::Dataset;
use crate::error::{config, data, shape, Result};
use crate::losses::CategoricalDist;
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Where a sampled row came from.
#[derive(Clone, Debug, PartialEq)]
pub enum RowOrigin<F> {
    Row(usize),
    Mix { i: usize, j: usize, lambda: F },
    CutMix { i: usize, j: usize, lambda: F },
    Noise(usize),
    GaussianImage,
    Generated { i: usize, j: usize, lambda: F },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledBatch<F> {
    pub inputs: Matrix<F>,
    pub origins: Vec<RowOrigin<F>>,
}

impl<F: Scalar> SampledBatch<F> {
    fn with_capacity(n: usize, d: usize) -> Self {
        Self { inputs: Matrix::from_vec(0, d, Vec::with_capacity(n * d)).expect("empty"), origins: Vec::with_capacity(n) }
    }

    fn push(&mut self, row: &[F], origin: RowOrigin<F>) {
        self.inputs.push_row(row).expect("sampler rows share the data dimension");
        self.origins.push(origin);
    }
}

/// Generator conditioned on a class vector `e` on the simplex.
pub trait ConditionalGenerator<F>: Send + Sync {
    fn latent_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn generate(&self, z: &[F], e: &[F]) -> Result<Vec<F>>;
}

/// Class-conditional diagonal Gaussian whose mean and scale interpolate
/// linearly in the class vector:
/// `x = Σ_k e_k·mean_k + z ⊙ Σ_k e_k·scale_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyGenerator<F> {
    pub class_means: Matrix<F>,
    pub class_scales: Matrix<F>,
}

const SCALE_FLOOR: f64 = 1e-6;

impl<F: Scalar> ToyGenerator<F> {
    pub fn new(class_means: Matrix<F>, class_scales: Matrix<F>) -> Result<Self> {
        if class_means.rows() < 2 {
            return config("generator needs at least two classes");
        }
        if class_means.rows() != class_scales.rows() || class_means.cols() != class_scales.cols() {
            return shape("class means and scales differ in shape");
        }
        if class_scales.as_slice().iter().any(|&s| !(s > F::zero())) {
            return config("generator scales must be strictly positive");
        }
        Ok(Self { class_means, class_scales })
    }
}

impl<F: Scalar> ConditionalGenerator<F> for ToyGenerator<F> {
    fn latent_dim(&self) -> usize {
        self.class_means.cols()
    }

    fn num_classes(&self) -> usize {
        self.class_means.rows()
    }

    fn output_dim(&self) -> usize {
        self.class_means.cols()
    }

    fn generate(&self, z: &[F], e: &[F]) -> Result<Vec<F>> {
        generate(self, z, e)
    }
}

/// Per-class sample means and (n−1) standard deviations, floored at 1e-6.
pub fn fit_toy_generator<F: Scalar>(dataset: &Dataset<F>) -> Result<ToyGenerator<F>> {
    let Some(labels) = dataset.class_labels() else {
        return data("generator fitting needs class labels");
    };
    let counts = dataset.class_counts();
    if let Some(k) = counts.iter().position(|&n| n < 2) {
        return data(format!("class {k} has {} samples; need at least 2", counts[k]));
    }
    let (c, d) = (counts.len(), dataset.dim());
    let mut means = Matrix::zeros(c, d);
    for (i, &k) in labels.iter().enumerate() {
        for (m, &x) in means.row_mut(k).iter_mut().zip(dataset.features().row(i)) {
            *m = *m + x;
        }
    }
    for k in 0..c {
        let n = F::of_usize(counts[k]);
        means.row_mut(k).iter_mut().for_each(|m| *m = *m / n);
    }
    let mut var = Matrix::zeros(c, d);
    for (i, &k) in labels.iter().enumerate() {
        let row = dataset.features().row(i);
        for ((v, &x), &m) in var.row_mut(k).iter_mut().zip(row).zip(means.row(k)) {
            *v = *v + (x - m) * (x - m);
        }
    }
    for k in 0..c {
        let n1: F = F::of_usize(counts[k] - 1);
        var.row_mut(k).iter_mut().for_each(|v: &mut F| *v = (*v / n1).sqrt().max(F::of(SCALE_FLOOR)));
    }
    ToyGenerator::new(means, var)
}

/// Evaluate the toy generator at latent `z` and class vector `e`.
pub fn generate<F: Scalar>(gen: &ToyGenerator<F>, z: &[F], e: &[F]) -> Result<Vec<F>> {
    let d = gen.latent_dim();
    if z.len() != d {
        return shape(format!("latent has {} dims, generator expects {d}", z.len()));
    }
    if e.len() != gen.num_classes() {
        return shape(format!("class vector has {} entries for {} classes", e.len(), gen.num_classes()));
    }
    CategoricalDist::new(e.to_vec())?;
    let mut out = vec![F::zero(); d];
    let mut scale = vec![F::zero(); d];
    for (k, &ek) in e.iter().enumerate() {
        if ek == F::zero() {
            continue;
        }
        for j in 0..d {
            out[j] = out[j] + ek * gen.class_means[(k, j)];
            scale[j] = scale[j] + ek * gen.class_scales[(k, j)];
        }
    }
    for j in 0..d {
        out[j] = out[j] + z[j] * scale[j];
    }
    Ok(out)
}

/// One draw of the mixed-class generator sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedSample<F> {
    pub x: Vec<F>,
    pub i: usize,
    pub j: usize,
    pub lambda: F,
    pub class_vector: Vec<F>,
}

/// `i, j ~ U{1..c}`, `λ ~ U[0, 1]`, `z ~ N(0, I)`, `x = G(z; λe_i + (1−λ)e_j)`.
/// With `mix_classes = false` the class vector is the one-hot `e_i`.
pub fn sample_generator_mix<F: Scalar>(
    gen: &dyn ConditionalGenerator<F>,
    mix_classes: bool,
    rng: &mut Rng,
) -> Result<GeneratedSample<F>> {
    let c = gen.num_classes();
    let i = rng.random_range(0..c);
    let j = rng.random_range(0..c);
    let lambda = if mix_classes { F::of(rng.random::<f64>()) } else { F::one() };
    let z: Vec<F> = (0..gen.latent_dim()).map(|_| F::of(StandardNormal.sample(rng))).collect();
    let mut e = vec![F::zero(); c];
    e[i] = e[i] + lambda;
    e[j] = e[j] + (F::one() - lambda);
    let x = gen.generate(&z, &e)?;
    Ok(GeneratedSample { x, i, j, lambda, class_vector: e })
}

fn check_lambda<F: Scalar>(lambda: F) -> Result<()> {
    if !(lambda >= F::zero() && lambda <= F::one()) {
        return config(format!("mixing coefficient {lambda} outside [0, 1]"));
    }
    Ok(())
}

/// `λ x_i + (1 − λ) x_j`.
pub fn mix_pair<F: Scalar>(x_i: &[F], x_j: &[F], lambda: F) -> Result<Vec<F>> {
    check_lambda(lambda)?;
    if x_i.len() != x_j.len() {
        return shape(format!("mixing {}- and {}-d inputs", x_i.len(), x_j.len()));
    }
    Ok(x_i.iter().zip(x_j).map(|(&a, &b)| lambda * a + (F::one() - lambda) * b).collect())
}

/// Picks dataset rows uniformly or proportionally to per-row weights.
struct RowPicker {
    n: usize,
    weighted: Option<WeightedIndex<f64>>,
}

impl RowPicker {
    fn new<F: Scalar>(n: usize, weights: Option<&[F]>) -> Result<Self> {
        if n == 0 {
            return data("cannot sample from an empty dataset");
        }
        let weighted = match weights {
            None => None,
            Some(w) if w.len() == n => Some(
                WeightedIndex::new(w.iter().map(|x| x.as_f64()))
                    .map_err(|e| crate::Error::Config(format!("row weights: {e}")))?,
            ),
            Some(w) => return shape(format!("{} row weights for {n} rows", w.len())),
        };
        Ok(Self { n, weighted })
    }

    fn pick(&self, rng: &mut Rng) -> usize {
        match &self.weighted {
            Some(w) => w.sample(rng),
            None => rng.random_range(0..self.n),
        }
    }
}

/// Mixed inputs plus the pair indices and coefficients that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct MixBatch<F> {
    pub inputs: Matrix<F>,
    pub pairs: Vec<(usize, usize)>,
    pub lambdas: Vec<F>,
}

/// `n` rows, each mixing two uniformly drawn samples with `λ ~ U[0, 1]`.
pub fn sample_mix_batch<F: Scalar>(dataset: &Dataset<F>, n: usize, rng: &mut Rng) -> Result<MixBatch<F>> {
    sample_mix_batch_weighted(dataset, None, n, rng)
}

fn sample_mix_batch_weighted<F: Scalar>(
    dataset: &Dataset<F>,
    weights: Option<&[F]>,
    n: usize,
    rng: &mut Rng,
) -> Result<MixBatch<F>> {
    if n == 0 {
        return config("batch size must be positive");
    }
    let picker = RowPicker::new(dataset.len(), weights)?;
    let x = dataset.features();
    let mut inputs = Matrix::zeros(n, dataset.dim());
    let mut pairs = Vec::with_capacity(n);
    let mut lambdas = Vec::with_capacity(n);
    for r in 0..n {
        let i = picker.pick(rng);
        let j = picker.pick(rng);
        let lambda = F::of(rng.random::<f64>());
        inputs.row_mut(r).copy_from_slice(&mix_pair(x.row(i), x.row(j), lambda)?);
        pairs.push((i, j));
        lambdas.push(lambda);
    }
    Ok(MixBatch { inputs, pairs, lambdas })
}

/// Replace a `round(H√(1−λ)) × round(W√(1−λ))` block of `x_i` (read as an
/// `H × W` grid, row-major) with the same block of `x_j`. The block is placed
/// uniformly among the positions where it fits inside the grid.
pub fn cutmix_pair<F: Scalar>(
    x_i: &[F],
    x_j: &[F],
    lambda: F,
    grid: (usize, usize),
    rng: &mut Rng,
) -> Result<Vec<F>> {
    check_lambda(lambda)?;
    let (h, w) = grid;
    if h == 0 || w == 0 || x_i.len() != h * w {
        return config(format!("{}-d input is not a {h}x{w} grid", x_i.len()));
    }
    if x_j.len() != x_i.len() {
        return shape(format!("cutmix of {}- and {}-d inputs", x_i.len(), x_j.len()));
    }
    let side = (1.0 - lambda.as_f64()).sqrt();
    let bh = ((h as f64 * side).round() as usize).min(h);
    let bw = ((w as f64 * side).round() as usize).min(w);
    let top = rng.random_range(0..=h - bh);
    let left = rng.random_range(0..=w - bw);
    let mut out = x_i.to_vec();
    for r in top..top + bh {
        for c in left..left + bw {
            out[r * w + c] = x_j[r * w + c];
        }
    }
    Ok(out)
}

/// `x + ε`, `ε ~ N(0, σ² I)`.
pub fn noise_augment<F: Scalar>(x: &[F], sigma: F, rng: &mut Rng) -> Result<Vec<F>> {
    if !(sigma >= F::zero()) {
        return config(format!("noise scale {sigma} must be non-negative"));
    }
    Ok(x.iter().map(|&v| v + sigma * F::of(StandardNormal.sample(rng))).collect())
}

/// I.i.d. standard normal vector.
pub fn gaussian_image<F: Scalar>(dim: usize, rng: &mut Rng) -> Vec<F> {
    (0..dim).map(|_| F::of(StandardNormal.sample(rng))).collect()
}

/// Per-row sampling probabilities inversely proportional to class population.
pub fn importance_weights<F: Scalar>(dataset: &Dataset<F>) -> Result<Vec<F>> {
    let Some(labels) = dataset.class_labels() else {
        return data("importance weights need class labels");
    };
    let counts = dataset.class_counts();
    let raw: Vec<F> = labels.iter().map(|&k| F::one() / F::of_usize(counts[k])).collect();
    let total: F = raw.iter().copied().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Transfer-set sampler.
#[derive(Clone)]
pub enum TransferSampler<F> {
    /// Dataset rows; with `replace = false`, successive permutations.
    Empirical { replace: bool },
    Mix,
    CutMix { grid: (usize, usize) },
    NoiseAugment { sigma: F },
    GaussianImage,
    GeneratorMix { generator: Arc<dyn ConditionalGenerator<F>>, mix_classes: bool },
    Union(Vec<(TransferSampler<F>, F)>),
}

impl<F: Scalar> fmt::Debug for TransferSampler<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl<F: Scalar> TransferSampler<F> {
    /// Noise augmentation with variance 0.02.
    pub fn default_noise() -> Self {
        TransferSampler::NoiseAugment { sigma: F::of(0.02f64.sqrt()) }
    }

    /// Half empirical rows, half `other`.
    pub fn half_empirical(other: TransferSampler<F>) -> Self {
        TransferSampler::Union(vec![
            (TransferSampler::Empirical { replace: true }, F::of(0.5)),
            (other, F::of(0.5)),
        ])
    }

    /// Stable text description, used for provenance.
    pub fn describe(&self) -> String {
        match self {
            TransferSampler::Empirical { replace } => format!("empirical(replace={replace})"),
            TransferSampler::Mix => "mix".into(),
            TransferSampler::CutMix { grid } => format!("cutmix({}x{})", grid.0, grid.1),
            TransferSampler::NoiseAugment { sigma } => format!("noise(sigma={})", sigma.write_exact()),
            TransferSampler::GaussianImage => "gaussian_image".into(),
            TransferSampler::GeneratorMix { mix_classes, .. } => format!("generator(mix={mix_classes})"),
            TransferSampler::Union(parts) => {
                let inner: Vec<String> =
                    parts.iter().map(|(s, w)| format!("{}:{}", s.describe(), w.write_exact())).collect();
                format!("union[{}]", inner.join(";"))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TransferSampler::NoiseAugment { sigma } if !(*sigma >= F::zero()) => {
                config(format!("noise scale {sigma} must be non-negative"))
            }
            TransferSampler::CutMix { grid } if grid.0 == 0 || grid.1 == 0 => config("empty cutmix grid"),
            TransferSampler::Union(parts) => {
                if parts.is_empty() {
                    return config("union of no samplers");
                }
                if parts.iter().any(|(_, w)| !(*w >= F::zero())) {
                    return config("union weights must be non-negative");
                }
                let total: F = parts.iter().map(|(_, w)| *w).sum();
                if (total - F::one()).abs() > F::of(1e-9) {
                    return config(format!("union weights sum to {total}"));
                }
                parts.iter().try_for_each(|(s, _)| s.validate())
            }
            _ => Ok(()),
        }
    }

    /// Draw `n` inputs. Deterministic in `rng`.
    pub fn sample(&self, dataset: &Dataset<F>, n: usize, rng: &mut Rng) -> Result<SampledBatch<F>> {
        self.sample_weighted(dataset, None, n, rng)
    }

    /// As [`sample`](Self::sample), drawing dataset rows with per-row
    /// probabilities `weights` (e.g. [`importance_weights`]) where rows are drawn.
    pub fn sample_weighted(
        &self,
        dataset: &Dataset<F>,
        weights: Option<&[F]>,
        n: usize,
        rng: &mut Rng,
    ) -> Result<SampledBatch<F>> {
        self.validate()?;
        if n == 0 {
            return config("sample count must be positive");
        }
        let d = dataset.dim();
        let x = dataset.features();
        let mut out = SampledBatch::with_capacity(n, d);
        match self {
            TransferSampler::Empirical { replace: false } if weights.is_none() => {
                let mut order: Vec<usize> = Vec::with_capacity(n);
                while order.len() < n {
                    let mut perm: Vec<usize> = (0..dataset.len()).collect();
                    perm.shuffle(rng);
                    order.extend(perm.into_iter().take(n - order.len()));
                }
                for i in order {
                    out.push(x.row(i), RowOrigin::Row(i));
                }
            }
            TransferSampler::Empirical { .. } => {
                let picker = RowPicker::new(dataset.len(), weights)?;
                for _ in 0..n {
                    let i = picker.pick(rng);
                    out.push(x.row(i), RowOrigin::Row(i));
                }
            }
            TransferSampler::Mix => {
                let mb = sample_mix_batch_weighted(dataset, weights, n, rng)?;
                for (r, (&(i, j), &lambda)) in mb.pairs.iter().zip(&mb.lambdas).enumerate() {
                    out.push(mb.inputs.row(r), RowOrigin::Mix { i, j, lambda });
                }
            }
            TransferSampler::CutMix { grid } => {
                let picker = RowPicker::new(dataset.len(), weights)?;
                for _ in 0..n {
                    let i = picker.pick(rng);
                    let j = picker.pick(rng);
                    let lambda = F::of(rng.random::<f64>());
                    let row = cutmix_pair(x.row(i), x.row(j), lambda, *grid, rng)?;
                    out.push(&row, RowOrigin::CutMix { i, j, lambda });
                }
            }
            TransferSampler::NoiseAugment { sigma } => {
                let picker = RowPicker::new(dataset.len(), weights)?;
                for _ in 0..n {
                    let i = picker.pick(rng);
                    out.push(&noise_augment(x.row(i), *sigma, rng)?, RowOrigin::Noise(i));
                }
            }
            TransferSampler::GaussianImage => {
                for _ in 0..n {
                    out.push(&gaussian_image(d, rng), RowOrigin::GaussianImage);
                }
            }
            TransferSampler::GeneratorMix { generator, mix_classes } => {
                if generator.output_dim() != d {
                    return shape(format!("generator emits {} dims, data has {d}", generator.output_dim()));
                }
                for _ in 0..n {
                    let g = sample_generator_mix(generator.as_ref(), *mix_classes, rng)?;
                    out.push(&g.x, RowOrigin::Generated { i: g.i, j: g.j, lambda: g.lambda });
                }
            }
            TransferSampler::Union(parts) => return union_sample(parts, dataset, weights, n, rng),
        }
        Ok(out)
    }
}

/// Each row comes from sampler `k` with probability `weight_k`. When a single
/// sampler carries all the weight, no assignment draws are made and the
/// output equals that sampler's own output.
pub fn union_sample<F: Scalar>(
    parts: &[(TransferSampler<F>, F)],
    dataset: &Dataset<F>,
    weights: Option<&[F]>,
    n: usize,
    rng: &mut Rng,
) -> Result<SampledBatch<F>> {
    if parts.is_empty() {
        return config("union of no samplers");
    }
    let active: Vec<usize> = (0..parts.len()).filter(|&k| parts[k].1 > F::zero()).collect();
    if active.is_empty() {
        return config("union weights are all zero");
    }
    if let [only] = active[..] {
        return parts[only].0.sample_weighted(dataset, weights, n, rng);
    }
    let choose = WeightedIndex::new(parts.iter().map(|(_, w)| w.as_f64()))
        .map_err(|e| crate::Error::Config(format!("union weights: {e}")))?;
    let assignment: Vec<usize> = (0..n).map(|_| choose.sample(rng)).collect();
    let mut drawn: Vec<Option<SampledBatch<F>>> = vec![None; parts.len()];
    let mut cursor = vec![0usize; parts.len()];
    for (k, (sampler, _)) in parts.iter().enumerate() {
        let count = assignment.iter().filter(|&&a| a == k).count();
        if count > 0 {
            drawn[k] = Some(sampler.sample_weighted(dataset, weights, count, rng)?);
        }
    }
    let mut out = SampledBatch::with_capacity(n, dataset.dim());
    for &k in &assignment {
        let batch = drawn[k].as_ref().expect("drawn for every assigned sampler");
        out.push(batch.inputs.row(cursor[k]), batch.origins[cursor[k]].clone());
        cursor[k] += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::make_blobs;

    fn rows(v: &[&[f64]], labels: &[usize], c: usize) -> Dataset<f64> {
        Dataset::classification(Matrix::from_rows(v.iter().copied()).unwrap(), labels.to_vec(), c).unwrap()
    }

    #[test]
    fn mix_pair_examples() {
        assert_eq!(mix_pair(&[1.0, 2.0], &[3.0, 4.0], 1.0).unwrap(), vec![1.0, 2.0]);
        assert_eq!(mix_pair(&[1.0, 2.0], &[3.0, 4.0], 0.0).unwrap(), vec![3.0, 4.0]);
        assert_eq!(mix_pair(&[2.0, 0.0], &[0.0, 2.0], 0.5).unwrap(), vec![1.0, 1.0]);
        assert!(mix_pair(&[1.0], &[1.0, 2.0], 0.5).is_err());
        assert!(mix_pair(&[1.0], &[2.0], 1.2).is_err());
    }

    #[test]
    fn mix_batch_on_single_point() {
        let ds = rows(&[&[0.3, -1.0]], &[0], 2);
        let mb = sample_mix_batch(&ds, 20, &mut Rng::new(0)).unwrap();
        for r in mb.inputs.iter_rows() {
            assert!((r[0] - 0.3).abs() < 1e-15 && (r[1] + 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mix_batch_is_deterministic_and_lambda_uniform() {
        let ds = make_blobs::<f64>(3, 2, 5, 1.0, 1.0, &Rng::new(0)).unwrap();
        let a = sample_mix_batch(&ds, 50, &mut Rng::new(4)).unwrap();
        assert_eq!(a, sample_mix_batch(&ds, 50, &mut Rng::new(4)).unwrap());
        let big = sample_mix_batch(&ds, 10_000, &mut Rng::new(5)).unwrap();
        let mean = big.lambdas.iter().sum::<f64>() / 1e4;
        let lo = big.lambdas.iter().cloned().fold(1.0, f64::min);
        let hi = big.lambdas.iter().cloned().fold(0.0, f64::max);
        assert!((mean - 0.5).abs() < 0.02 && lo < 0.05 && hi > 0.95);
        let empty_err = RowPicker::new::<f64>(0, None);
        assert!(empty_err.is_err());
    }

    #[test]
    fn cutmix_extremes_and_membership() {
        let xi: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let xj: Vec<f64> = (0..16).map(|v| 100.0 + v as f64).collect();
        let mut rng = Rng::new(1);
        assert_eq!(cutmix_pair(&xi, &xj, 1.0, (4, 4), &mut rng).unwrap(), xi);
        assert_eq!(cutmix_pair(&xi, &xj, 0.0, (4, 4), &mut rng).unwrap(), xj);
        for _ in 0..100 {
            let lam: f64 = rng.random();
            let out = cutmix_pair(&xi, &xj, lam, (4, 4), &mut rng).unwrap();
            for (k, v) in out.iter().enumerate() {
                assert!(*v == xi[k] || *v == xj[k]);
            }
        }
        assert!(matches!(cutmix_pair(&xi[..15], &xj[..15], 0.5, (4, 4), &mut rng), Err(crate::Error::Config(_))));
    }

    #[test]
    fn noise_augment_moments() {
        let x = [1.0, -2.0, 0.5];
        let mut rng = Rng::new(2);
        assert_eq!(noise_augment(&x, 0.0, &mut rng).unwrap(), x.to_vec());
        assert!(noise_augment(&x, -1.0, &mut rng).is_err());
        let sigma = 0.02f64.sqrt();
        let n = 100_000;
        let mut sums = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let y = noise_augment(&x, sigma, &mut rng).unwrap();
            for k in 0..3 {
                sums[k] += y[k];
                sq[k] += y[k] * y[k];
            }
        }
        for k in 0..3 {
            let mean = sums[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            assert!((var - 0.02).abs() / 0.02 < 0.1, "component {k}: {var}");
        }
        assert_eq!(
            noise_augment(&x, 0.3, &mut Rng::new(3)).unwrap(),
            noise_augment(&x, 0.3, &mut Rng::new(3)).unwrap()
        );
    }

    #[test]
    fn gaussian_image_moments_and_streams() {
        let mut rng = Rng::new(0);
        let v: Vec<f64> = gaussian_image(100_000, &mut rng);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.05);
        assert_eq!(gaussian_image::<f64>(8, &mut Rng::new(1)), gaussian_image::<f64>(8, &mut Rng::new(1)));
        let root = Rng::new(1);
        let a: Vec<f64> = gaussian_image(8, &mut root.substream(crate::Stream::Sampling));
        let b: Vec<f64> = gaussian_image(8, &mut root.substream(crate::Stream::Init));
        assert_ne!(a, b);
    }

    #[test]
    fn toy_generator_fit_examples() {
        let ds = rows(&[&[0.0], &[0.0], &[2.0], &[2.0], &[10.0], &[10.0], &[14.0], &[14.0]], &[0, 0, 0, 0, 1, 1, 1, 1], 2);
        let g = fit_toy_generator(&ds).unwrap();
        assert_eq!(g.class_means.as_slice(), &[1.0, 12.0]);
        assert_eq!(fit_toy_generator(&ds).unwrap(), g);

        let dup = rows(&[&[3.0, 4.0], &[3.0, 4.0], &[0.0, 1.0], &[2.0, 1.0]], &[0, 0, 1, 1], 2);
        let g = fit_toy_generator(&dup).unwrap();
        assert_eq!(g.class_means.row(0), &[3.0, 4.0]);
        assert_eq!(g.class_scales.row(0), &[SCALE_FLOOR, SCALE_FLOOR]);

        let thin = rows(&[&[0.0], &[1.0], &[2.0]], &[0, 0, 1], 2);
        assert!(matches!(fit_toy_generator(&thin), Err(crate::Error::Data(_))));
    }

    fn two_class_gen() -> ToyGenerator<f64> {
        ToyGenerator::new(
            Matrix::from_rows([[0.0, 2.0], [4.0, -2.0]]).unwrap(),
            Matrix::from_rows([[0.5, 1.0], [1.5, 2.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn generate_examples() {
        let g = two_class_gen();
        assert_eq!(generate(&g, &[0.0, 0.0], &[0.0, 1.0]).unwrap(), vec![4.0, -2.0]);
        assert_eq!(generate(&g, &[0.0, 0.0], &[0.5, 0.5]).unwrap(), vec![2.0, 0.0]);
        assert!(matches!(generate(&g, &[0.0, 0.0], &[0.7, 0.7]), Err(crate::Error::Data(_))));
        assert!(generate(&g, &[0.0], &[1.0, 0.0]).is_err());

        let mut rng = Rng::new(8);
        let n = 10_000;
        let draws: Vec<Vec<f64>> =
            (0..n).map(|_| generate(&g, &gaussian_image(2, &mut rng), &[1.0, 0.0]).unwrap()).collect();
        for (k, scale) in [0.5, 1.0].into_iter().enumerate() {
            let mean = draws.iter().map(|x| x[k]).sum::<f64>() / n as f64;
            let sd = (draws.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!((sd - scale).abs() / scale < 0.1);
            let expect = g.class_means[(0, k)];
            assert!((mean - expect).abs() < 4.0 * scale / (n as f64).sqrt());
        }
    }

    #[test]
    fn generator_mix_is_uniform_over_pairs() {
        let g = ToyGenerator::new(Matrix::zeros(3, 1), Matrix::from_rows([[1.0], [1.0], [1.0]]).unwrap()).unwrap();
        let mut rng = Rng::new(0);
        let n = 10_000;
        let mut counts = [[0usize; 3]; 3];
        for _ in 0..n {
            let s = sample_generator_mix(&g, true, &mut rng).unwrap();
            counts[s.i][s.j] += 1;
            let total: f64 = s.class_vector.iter().sum();
            assert!((total - 1.0).abs() < 1e-12 && s.class_vector.iter().all(|&e| e >= 0.0));
        }
        let p = 1.0 / 9.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for row in counts {
            for c in row {
                assert!((c as f64 - n as f64 * p).abs() < 3.0 * sd);
            }
        }
        let a = sample_generator_mix(&g, true, &mut Rng::new(5)).unwrap();
        assert_eq!(a, sample_generator_mix(&g, true, &mut Rng::new(5)).unwrap());
        let one_hot = sample_generator_mix(&g, false, &mut rng).unwrap();
        assert_eq!(one_hot.lambda, 1.0);
    }

    #[test]
    fn union_examples() {
        let ds = make_blobs::<f64>(3, 2, 5, 1.0, 1.0, &Rng::new(0)).unwrap();
        let mix = TransferSampler::<f64>::Mix;
        let single = TransferSampler::Union(vec![(mix.clone(), 1.0)]);
        assert_eq!(
            single.sample(&ds, 30, &mut Rng::new(1)).unwrap(),
            mix.sample(&ds, 30, &mut Rng::new(1)).unwrap()
        );
        let lopsided = TransferSampler::Union(vec![
            (TransferSampler::Empirical { replace: true }, 1.0),
            (TransferSampler::GaussianImage, 0.0),
        ]);
        let b = lopsided.sample(&ds, 200, &mut Rng::new(2)).unwrap();
        assert!(b.origins.iter().all(|o| matches!(o, RowOrigin::Row(_))));

        let half = TransferSampler::Union(vec![
            (TransferSampler::Empirical { replace: true }, 0.5),
            (TransferSampler::GaussianImage, 0.5),
        ]);
        let b = half.sample(&ds, 10_000, &mut Rng::new(3)).unwrap();
        let first = b.origins.iter().filter(|o| matches!(o, RowOrigin::Row(_))).count();
        assert!((first as f64 - 5000.0).abs() < 3.0 * 50.0);
        assert!(TransferSampler::<f64>::Union(vec![]).sample(&ds, 1, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn importance_weight_examples() {
        let balanced = make_blobs::<f64>(3, 1, 4, 1.0, 1.0, &Rng::new(0)).unwrap();
        let w = importance_weights(&balanced).unwrap();
        assert!(w.iter().all(|&x| (x - 1.0 / 12.0).abs() < 1e-15));

        let mut labels = vec![0; 90];
        labels.extend(vec![1; 10]);
        let ds = Dataset::classification(Matrix::<f64>::zeros(100, 1), labels, 2).unwrap();
        let w = importance_weights(&ds).unwrap();
        assert!((w[0] / w[99] - 10.0 / 90.0).abs() < 1e-12);
        let class0: f64 = w[..90].iter().sum();
        assert!((class0 - 0.5).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let reg = crate::datasets::make_heteroscedastic_regression::<f64>(
            5,
            2,
            crate::datasets::NoiseProfile::Linear,
            &Rng::new(0),
        )
        .unwrap();
        assert!(matches!(importance_weights(&reg), Err(crate::Error::Data(_))));
    }

    #[test]
    fn empirical_without_replacement_is_a_permutation() {
        let ds = make_blobs::<f64>(3, 2, 4, 1.0, 1.0, &Rng::new(0)).unwrap();
        let b = TransferSampler::Empirical { replace: false }.sample(&ds, 12, &mut Rng::new(1)).unwrap();
        let mut idx: Vec<usize> = b.origins.iter().map(|o| if let RowOrigin::Row(i) = o { *i } else { 99 }).collect();
        idx.sort_unstable();
        assert_eq!(idx, (0..12).collect::<Vec<_>>());
    }
}
