//! Synthetic datasets, splits and the dataset file format.
//!
//! File layout (all values with 17 significant digits):
//!
//! ```text
//! #xcl-dataset v1
//! #n=<rows>,d=<features>,labels=class,c=<classes>      (or labels=regression,m=<dims>)
//! f_1,...,f_d,<class index>                             (or f_1,...,f_d,y_1,...,y_m)
//! ```

use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{config, data, Result};
use crate::io;
use crate::losses::CategoricalDist;
use crate::matrix::Matrix;
use crate::rng::{Rng, Stream};
use crate::scalar::Scalar;

const MAGIC: &str = "#xcl-dataset v1";

#[derive(Clone, Debug, PartialEq)]
pub enum Labels<F> {
    Classes { idx: Vec<usize>, c: usize },
    Targets(Matrix<F>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    features: Matrix<F>,
    labels: Labels<F>,
}

impl<F: Scalar> Dataset<F> {
    pub fn classification(features: Matrix<F>, idx: Vec<usize>, c: usize) -> Result<Self> {
        if idx.len() != features.rows() {
            return data(format!("{} labels for {} rows", idx.len(), features.rows()));
        }
        if let Some(k) = idx.iter().find(|&&k| k >= c) {
            return data(format!("class index {k} outside [0, {c})"));
        }
        Self::checked(features, Labels::Classes { idx, c })
    }

    pub fn regression(features: Matrix<F>, targets: Matrix<F>) -> Result<Self> {
        if targets.rows() != features.rows() {
            return data(format!("{} targets for {} rows", targets.rows(), features.rows()));
        }
        if !targets.is_finite() {
            return data("non-finite regression target");
        }
        Self::checked(features, Labels::Targets(targets))
    }

    fn checked(features: Matrix<F>, labels: Labels<F>) -> Result<Self> {
        if features.rows() == 0 {
            return data("dataset must have at least one row");
        }
        if !features.is_finite() {
            return data("non-finite feature value");
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix<F> {
        &self.features
    }

    pub fn labels(&self) -> &Labels<F> {
        &self.labels
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.labels {
            Labels::Classes { c, .. } => Some(*c),
            Labels::Targets(_) => None,
        }
    }

    pub fn class_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            Labels::Classes { idx, .. } => Some(idx),
            Labels::Targets(_) => None,
        }
    }

    pub fn targets(&self) -> Option<&Matrix<F>> {
        match &self.labels {
            Labels::Targets(t) => Some(t),
            Labels::Classes { .. } => None,
        }
    }

    /// Per-class sample counts (empty for regression data).
    pub fn class_counts(&self) -> Vec<usize> {
        match &self.labels {
            Labels::Classes { idx, c } => {
                let mut counts = vec![0; *c];
                for &k in idx {
                    counts[k] += 1;
                }
                counts
            }
            Labels::Targets(_) => Vec::new(),
        }
    }

    /// One-hot ground truth of row `i`.
    pub fn one_hot(&self, i: usize) -> Result<CategoricalDist<F>> {
        match &self.labels {
            Labels::Classes { idx, c } => CategoricalDist::one_hot(idx[i], *c),
            Labels::Targets(_) => data("regression rows have no class label"),
        }
    }

    /// Rows `idx`, in order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(idx);
        let labels = match &self.labels {
            Labels::Classes { idx: l, c } => Labels::Classes { idx: idx.iter().map(|&i| l[i]).collect(), c: *c },
            Labels::Targets(t) => Labels::Targets(t.select_rows(idx)),
        };
        Self::checked(features, labels)
    }

    /// Same inputs with replaced class labels.
    pub fn relabel(&self, idx: Vec<usize>, c: usize) -> Result<Self> {
        Self::classification(self.features.clone(), idx, c)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        match &self.labels {
            Labels::Classes { c, .. } => {
                out.push_str(&format!("#n={},d={},labels=class,c={c}\n", self.len(), self.dim()))
            }
            Labels::Targets(t) => out.push_str(&format!(
                "#n={},d={},labels=regression,m={}\n",
                self.len(),
                self.dim(),
                t.cols()
            )),
        }
        for i in 0..self.len() {
            io::push_row(&mut out, self.features.row(i).iter().copied());
            match &self.labels {
                Labels::Classes { idx, .. } => out.push_str(&format!(",{}", idx[i])),
                Labels::Targets(t) => {
                    out.push(',');
                    io::push_row(&mut out, t.row(i).iter().copied());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = io::Lines::new(text);
        io::expect_magic(&mut lines, MAGIC)?;
        let (hno, hline) = lines.next_line("dataset header")?;
        let h = io::parse_header(hno, hline)?;
        let n = io::header_usize(&h, "n", hno)?;
        let d = io::header_usize(&h, "d", hno)?;
        if n == 0 || d == 0 {
            return io::parse_err(hno, "n and d must be positive");
        }
        let kind = io::header_str(&h, "labels", hno)?;
        let width = match kind {
            "class" => d + 1,
            "regression" => d + io::header_usize(&h, "m", hno)?,
            other => return io::parse_err(hno, format!("unknown label kind `{other}`")),
        };
        let c = if kind == "class" { io::header_usize(&h, "c", hno)? } else { 0 };
        let mut features = Vec::with_capacity(n * d);
        let mut targets = Vec::new();
        let mut classes = Vec::with_capacity(n);
        for _ in 0..n {
            let (no, line) = lines.next_line("a data row")?;
            let fields = io::split_row(no, line, width)?;
            for f in &fields[..d] {
                features.push(io::parse_scalar::<F>(no, f)?);
            }
            if kind == "class" {
                match fields[d].trim().parse::<usize>() {
                    Ok(k) if k < c => classes.push(k),
                    _ => return io::parse_err(no, format!("invalid class index `{}`", fields[d])),
                }
            } else {
                for f in &fields[d..] {
                    targets.push(io::parse_scalar::<F>(no, f)?);
                }
            }
        }
        if let Some(no) = lines.trailing_content() {
            return io::parse_err(no, format!("more rows than the declared n={n}"));
        }
        let features = Matrix::from_vec(n, d, features)?;
        if kind == "class" {
            Self::classification(features, classes, c)
        } else {
            let m = width - d;
            Self::regression(features, Matrix::from_vec(n, m, targets)?)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&io::read_text(path)?)
    }
}

/// Class centres of a Gaussian-blob problem; samples can be drawn repeatedly
/// (train and test sets share centres).
#[derive(Clone, Debug, PartialEq)]
pub struct BlobModel<F> {
    pub centers: Matrix<F>,
    pub spread: F,
}

impl<F: Scalar> BlobModel<F> {
    /// Centres i.i.d. uniform in `[−center_scale, center_scale]^d`.
    pub fn new(c: usize, d: usize, spread: F, center_scale: F, rng: &Rng) -> Result<Self> {
        if c < 2 || d == 0 {
            return config(format!("blobs need c >= 2 and d >= 1 (c={c}, d={d})"));
        }
        if !(spread >= F::zero()) || !(center_scale >= F::zero()) {
            return config("spread and center scale must be non-negative");
        }
        let mut r = rng.substream(Stream::Data);
        let s = center_scale.as_f64();
        let data: Vec<F> = if s > 0.0 {
            let u = Uniform::new_inclusive(-s, s).expect("finite range");
            (0..c * d).map(|_| F::of(u.sample(&mut r))).collect()
        } else {
            vec![F::zero(); c * d]
        };
        Ok(Self { centers: Matrix::from_vec(c, d, data)?, spread })
    }

    pub fn num_classes(&self) -> usize {
        self.centers.rows()
    }

    /// `n_per_class` samples per class, `center + N(0, spread² I)`, class-major order.
    pub fn sample(&self, n_per_class: usize, rng: &Rng) -> Result<Dataset<F>> {
        if n_per_class == 0 {
            return config("n_per_class must be positive");
        }
        let (c, d) = (self.centers.rows(), self.centers.cols());
        let mut r = rng.substream(Stream::Sampling);
        let mut features = Matrix::zeros(c * n_per_class, d);
        let mut idx = Vec::with_capacity(c * n_per_class);
        for k in 0..c {
            for i in 0..n_per_class {
                let row = features.row_mut(k * n_per_class + i);
                for (x, &m) in row.iter_mut().zip(self.centers.row(k)) {
                    let z: f64 = StandardNormal.sample(&mut r);
                    *x = m + self.spread * F::of(z);
                }
                idx.push(k);
            }
        }
        Dataset::classification(features, idx, c)
    }
}

/// Gaussian blobs: `c` classes in `d` dimensions, `n_per_class` each.
pub fn make_blobs<F: Scalar>(
    c: usize,
    d: usize,
    n_per_class: usize,
    spread: F,
    center_scale: F,
    rng: &Rng,
) -> Result<Dataset<F>> {
    BlobModel::new(c, d, spread, center_scale, rng)?.sample(n_per_class, rng)
}

/// Noise-scale profile of [`make_heteroscedastic_regression`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseProfile {
    /// `σ(x) = 0.05 + 0.3·|x₁|`: quiet centre, noisy edges.
    Linear,
    /// `σ(x) = 0.05 + 0.3·cos²(πx₁/2)`: noisy centre, quiet edges.
    Sinusoidal,
}

impl NoiseProfile {
    pub fn name(self) -> &'static str {
        match self {
            NoiseProfile::Linear => "linear",
            NoiseProfile::Sinusoidal => "sinusoidal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(NoiseProfile::Linear),
            "sinusoidal" => Ok(NoiseProfile::Sinusoidal),
            other => config(format!("unknown noise profile `{other}`")),
        }
    }

    pub fn sigma<F: Scalar>(self, x: &[F]) -> F {
        let x1 = x[0];
        match self {
            NoiseProfile::Linear => F::of(0.05) + F::of(0.3) * x1.abs(),
            NoiseProfile::Sinusoidal => {
                let c = (F::PI() * x1 * F::of(0.5)).cos();
                F::of(0.05) + F::of(0.3) * c * c
            }
        }
    }
}

/// Regression mean `g(x) = sin(πx₁)·(1, x₂)`; `x₂` is taken as 1 when `d_in = 1`.
pub fn regression_mean<F: Scalar>(x: &[F]) -> [F; 2] {
    let s = (F::PI() * x[0]).sin();
    let x2 = x.get(1).copied().unwrap_or(F::one());
    [s, s * x2]
}

/// `x ~ U[−1, 1]^{d_in}`, `y = g(x) + ε` with `ε ~ N(0, σ(x)² I₂)`.
pub fn make_heteroscedastic_regression<F: Scalar>(
    n: usize,
    d_in: usize,
    noise: NoiseProfile,
    rng: &Rng,
) -> Result<Dataset<F>> {
    if n == 0 || d_in == 0 {
        return config("regression data needs n >= 1 and d_in >= 1");
    }
    let mut r = rng.substream(Stream::Data);
    let u = Uniform::new_inclusive(-1.0, 1.0).expect("finite range");
    let mut features = Matrix::zeros(n, d_in);
    let mut targets = Matrix::zeros(n, 2);
    for i in 0..n {
        for x in features.row_mut(i) {
            *x = F::of(u.sample(&mut r));
        }
        let x = features.row(i);
        let g = regression_mean(x);
        let sigma = noise.sigma(x);
        for (t, gj) in targets.row_mut(i).iter_mut().zip(g) {
            let z: f64 = StandardNormal.sample(&mut r);
            *t = gj + sigma * F::of(z);
        }
    }
    Dataset::regression(features, targets)
}

/// Disjoint index sets `(A, B)`, each in ascending order.
///
/// With `class_balanced`, every class contributes `round(fraction·count)` rows
/// to `A`, and each class must have at least two rows.
pub fn split_indices<F: Scalar>(
    dataset: &Dataset<F>,
    fraction: f64,
    class_balanced: bool,
    rng: &Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return config(format!("split fraction {fraction} outside (0, 1)"));
    }
    let mut r = rng.substream(Stream::Split);
    let mut a = Vec::new();
    let groups: Vec<Vec<usize>> = if class_balanced {
        let Some(labels) = dataset.class_labels() else {
            return config("class-balanced split of a regression dataset");
        };
        let counts = dataset.class_counts();
        if let Some(k) = counts.iter().position(|&n| n == 1) {
            return data(format!("class {k} has a single sample; cannot balance the split"));
        }
        let mut g = vec![Vec::new(); counts.len()];
        for (i, &k) in labels.iter().enumerate() {
            g[k].push(i);
        }
        g
    } else {
        vec![(0..dataset.len()).collect()]
    };
    for mut g in groups {
        g.shuffle(&mut r);
        let take = (fraction * g.len() as f64).round() as usize;
        a.extend_from_slice(&g[..take]);
    }
    a.sort_unstable();
    let mut in_a = vec![false; dataset.len()];
    a.iter().for_each(|&i| in_a[i] = true);
    let b = (0..dataset.len()).filter(|&i| !in_a[i]).collect();
    Ok((a, b))
}

/// Partition into two datasets; see [`split_indices`].
pub fn split_disjoint<F: Scalar>(
    dataset: &Dataset<F>,
    fraction: f64,
    class_balanced: bool,
    rng: &Rng,
) -> Result<(Dataset<F>, Dataset<F>)> {
    let (a, b) = split_indices(dataset, fraction, class_balanced, rng)?;
    if a.is_empty() || b.is_empty() {
        return data(format!("split fraction {fraction} leaves one side empty"));
    }
    Ok((dataset.subset(&a)?, dataset.subset(&b)?))
}

/// Keep `⌈keep_fraction · count⌉` rows of `reduced_class_count` randomly chosen
/// classes; other classes are untouched. Row order is preserved.
pub fn subsample_imbalanced<F: Scalar>(
    dataset: &Dataset<F>,
    reduced_class_count: usize,
    keep_fraction: f64,
    rng: &Rng,
) -> Result<(Dataset<F>, Vec<usize>)> {
    let Some(labels) = dataset.class_labels() else {
        return config("imbalanced subsampling needs class labels");
    };
    let c = dataset.num_classes().unwrap();
    if reduced_class_count > c {
        return config(format!("cannot reduce {reduced_class_count} of {c} classes"));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return config(format!("keep fraction {keep_fraction} outside (0, 1]"));
    }
    let mut r = rng.substream(Stream::Split);
    let classes: Vec<usize> = (0..c).collect();
    let mut reduced: Vec<usize> = classes.choose_multiple(&mut r, reduced_class_count).copied().collect();
    reduced.sort_unstable();
    let mut keep = vec![true; dataset.len()];
    for &k in &reduced {
        let mut rows: Vec<usize> = (0..dataset.len()).filter(|&i| labels[i] == k).collect();
        let kept = (keep_fraction * rows.len() as f64).ceil() as usize;
        rows.shuffle(&mut r);
        rows[kept..].iter().for_each(|&i| keep[i] = false);
    }
    let idx: Vec<usize> = (0..dataset.len()).filter(|&i| keep[i]).collect();
    Ok((dataset.subset(&idx)?, reduced))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn blobs(seed: u64) -> Dataset<f64> {
        make_blobs(4, 3, 10, 0.5, 2.0, &Rng::new(seed)).unwrap()
    }

    #[test]
    fn zero_spread_blobs_sit_on_centres() {
        let rng = Rng::new(1);
        let model = BlobModel::<f64>::new(3, 2, 0.0, 1.0, &rng).unwrap();
        let ds = model.sample(5, &rng).unwrap();
        for i in 0..ds.len() {
            let k = ds.class_labels().unwrap()[i];
            assert_eq!(ds.features().row(i), model.centers.row(k));
        }
        assert_eq!(ds.class_counts(), vec![5, 5, 5]);
    }

    #[test]
    fn blobs_are_deterministic() {
        assert_eq!(blobs(3), blobs(3));
        assert_ne!(blobs(3), blobs(4));
        assert!(make_blobs::<f64>(1, 3, 10, 0.5, 1.0, &Rng::new(0)).is_err());
    }

    #[test]
    fn regression_shapes_and_determinism() {
        let a = make_heteroscedastic_regression::<f64>(50, 2, NoiseProfile::Linear, &Rng::new(2)).unwrap();
        assert_eq!(a.targets().unwrap().cols(), 2);
        assert_eq!(a.dim(), 2);
        let b = make_heteroscedastic_regression::<f64>(50, 2, NoiseProfile::Linear, &Rng::new(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn balanced_split_halves_each_class() {
        let ds = make_blobs::<f64>(3, 2, 10, 1.0, 1.0, &Rng::new(0)).unwrap();
        let (a, b) = split_disjoint(&ds, 0.5, true, &Rng::new(1)).unwrap();
        assert_eq!(a.class_counts(), vec![5, 5, 5]);
        assert_eq!(b.class_counts(), vec![5, 5, 5]);
        let (ia, ib) = split_indices(&ds, 0.5, true, &Rng::new(1)).unwrap();
        let mut all: Vec<usize> = ia.iter().chain(&ib).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        assert_eq!(split_indices(&ds, 0.5, true, &Rng::new(1)).unwrap(), (ia, ib));
    }

    #[test]
    fn balanced_split_rejects_singleton_class() {
        let x = Matrix::from_rows([[0.0], [1.0], [2.0]]).unwrap();
        let ds = Dataset::<f64>::classification(x, vec![0, 0, 1], 2).unwrap();
        assert!(matches!(split_disjoint(&ds, 0.5, true, &Rng::new(0)), Err(Error::Data(_))));
        assert!(split_disjoint(&ds, 1.0, false, &Rng::new(0)).is_err());
    }

    #[test]
    fn imbalanced_subsampling_counts() {
        let ds = make_blobs::<f64>(10, 2, 100, 1.0, 1.0, &Rng::new(0)).unwrap();
        let (sub, reduced) = subsample_imbalanced(&ds, 8, 0.1, &Rng::new(5)).unwrap();
        assert_eq!(reduced.len(), 8);
        for (k, &n) in sub.class_counts().iter().enumerate() {
            assert_eq!(n, if reduced.contains(&k) { 10 } else { 100 });
        }
        let (again, reduced2) = subsample_imbalanced(&ds, 8, 0.1, &Rng::new(5)).unwrap();
        assert_eq!((again, reduced2), (sub, reduced));
        let (full, _) = subsample_imbalanced(&ds, 8, 1.0, &Rng::new(5)).unwrap();
        assert_eq!(full, ds);
    }

    #[test]
    fn file_round_trip_is_exact() {
        let ds = blobs(9);
        assert_eq!(Dataset::from_text(&ds.to_text()).unwrap(), ds);
        let reg = make_heteroscedastic_regression::<f64>(20, 3, NoiseProfile::Sinusoidal, &Rng::new(1)).unwrap();
        assert_eq!(Dataset::from_text(&reg.to_text()).unwrap(), reg);
    }

    #[test]
    fn truncated_file_names_the_missing_line() {
        let text = blobs(0).to_text();
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        match Dataset::<f64>::from_text(&cut) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn row_width_mismatch_is_parse_error() {
        let text = "#xcl-dataset v1\n#n=2,d=2,labels=class,c=2\n1,2,0\n1,2,3,1\n";
        match Dataset::<f64>::from_text(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(Dataset::<f64>::from_text("#xcl-dataset v2\n").is_err());
        assert!(Dataset::<f64>::from_text("#xcl-dataset v1\n#n=1,d=1,labels=class,c=2\n0.5,2\n").is_err());
    }
}
