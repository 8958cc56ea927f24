//! Teachers (single networks or ensembles) and materialised transfer-sets.

use std::path::Path;

use crate::datasets::{Dataset, Labels};
use crate::error::{config, data, shape, Result};
use crate::io;
use crate::losses::{softmax, CategoricalDist, GaussianPred};
use crate::matrix::Matrix;
use crate::nn::{Activation, Head, Layer, Network};
use crate::rng::Rng;
use crate::samplers::{RowOrigin, TransferSampler};
use crate::scalar::Scalar;

/// A model output read as a distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum Prediction<F> {
    Categorical(CategoricalDist<F>),
    Gaussian(GaussianPred<F>),
}

impl<F: Scalar> Prediction<F> {
    pub fn categorical(&self) -> Option<&CategoricalDist<F>> {
        match self {
            Prediction::Categorical(c) => Some(c),
            Prediction::Gaussian(_) => None,
        }
    }

    pub fn gaussian(&self) -> Option<&GaussianPred<F>> {
        match self {
            Prediction::Gaussian(g) => Some(g),
            Prediction::Categorical(_) => None,
        }
    }
}

/// Anything that maps a batch of inputs to per-row distributions.
pub trait Predictor<F: Scalar>: Sync {
    fn head(&self) -> Head;
    fn input_dim(&self) -> usize;
    fn predict(&self, batch: &Matrix<F>) -> Result<Vec<Prediction<F>>>;

    /// Row-parallel [`predict`](Predictor::predict) over at most `threads`
    /// scoped threads; output order matches input order.
    fn predict_par(&self, batch: &Matrix<F>, threads: usize) -> Result<Vec<Prediction<F>>> {
        let threads = threads.max(1).min(batch.rows().max(1));
        if threads == 1 {
            return self.predict(batch);
        }
        let chunk = batch.rows().div_ceil(threads);
        let parts: Vec<Result<Vec<Prediction<F>>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..batch.rows())
                .step_by(chunk)
                .map(|start| {
                    let idx: Vec<usize> = (start..(start + chunk).min(batch.rows())).collect();
                    let sub = batch.select_rows(&idx);
                    s.spawn(move || self.predict(&sub))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("prediction worker panicked")).collect()
        });
        let mut out = Vec::with_capacity(batch.rows());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

impl<F: Scalar> Predictor<F> for Network<F> {
    fn head(&self) -> Head {
        Network::head(self)
    }

    fn input_dim(&self) -> usize {
        Network::input_dim(self)
    }

    /// Logit heads: `softmax(logits)` at `T = 1` (logits kept). Gaussian heads: `(μ, s)`.
    fn predict(&self, batch: &Matrix<F>) -> Result<Vec<Prediction<F>>> {
        let out = self.forward(batch)?;
        out.iter_rows()
            .map(|row| match Network::head(self) {
                Head::Logits(_) => Ok(Prediction::Categorical(softmax(row, F::one())?)),
                Head::Gaussian(_) => Ok(Prediction::Gaussian(GaussianPred::from_raw(row)?)),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Teacher<F> {
    Single(Network<F>),
    /// Committee whose output is the average of its members' outputs.
    Ensemble(Vec<Network<F>>),
}

impl<F: Scalar> Teacher<F> {
    /// Ensemble of classifiers. Members must agree on input dim and head.
    pub fn ensemble(members: Vec<Network<F>>) -> Result<Self> {
        Self::ensemble_with(members, false)
    }

    /// As [`ensemble`](Self::ensemble); `allow_gaussian` admits Gaussian heads,
    /// whose `μ` and `s` are averaged arithmetically.
    pub fn ensemble_with(members: Vec<Network<F>>, allow_gaussian: bool) -> Result<Self> {
        let t = Teacher::Ensemble(members);
        t.check()?;
        if !allow_gaussian && !t.head().is_classifier() {
            return config("regression ensembles must be enabled explicitly");
        }
        Ok(t)
    }

    pub fn members(&self) -> &[Network<F>] {
        match self {
            Teacher::Single(n) => std::slice::from_ref(n),
            Teacher::Ensemble(m) => m,
        }
    }

    fn check(&self) -> Result<()> {
        let members = self.members();
        let Some(first) = members.first() else {
            return config("ensemble without members");
        };
        if members.iter().any(|m| m.head() != first.head() || m.input_dim() != first.input_dim()) {
            return config("ensemble members disagree on input dimension or head");
        }
        Ok(())
    }
}

impl<F: Scalar> Predictor<F> for Teacher<F> {
    fn head(&self) -> Head {
        self.members()[0].head()
    }

    fn input_dim(&self) -> usize {
        self.members()[0].input_dim()
    }

    fn predict(&self, batch: &Matrix<F>) -> Result<Vec<Prediction<F>>> {
        teacher_predict(self, batch)
    }
}

/// Teacher distribution per row.
///
/// Classification ensembles average the members' `T = 1` probabilities and
/// cache `log` of the average as logits; regression ensembles average `μ` and
/// `s`. A single network is returned as-is.
pub fn teacher_predict<F: Scalar>(t: &Teacher<F>, batch: &Matrix<F>) -> Result<Vec<Prediction<F>>> {
    t.check()?;
    let members = match t {
        Teacher::Single(n) => return n.predict(batch),
        Teacher::Ensemble(m) => m,
    };
    let per_member: Vec<Vec<Prediction<F>>> = members.iter().map(|m| m.predict(batch)).collect::<Result<_>>()?;
    let m = F::of_usize(members.len());
    (0..batch.rows())
        .map(|r| match t.head() {
            Head::Logits(c) => {
                let mut probs = vec![F::zero(); c];
                for preds in &per_member {
                    let p = preds[r].categorical().expect("classifier head");
                    for (a, &b) in probs.iter_mut().zip(p.probs()) {
                        *a = *a + b;
                    }
                }
                probs.iter_mut().for_each(|p| *p = *p / m);
                let logits = probs.iter().map(|p| p.ln()).collect();
                Ok(Prediction::Categorical(CategoricalDist::with_logits(probs, logits)?))
            }
            Head::Gaussian(d) => {
                let mut mu = vec![F::zero(); d];
                let mut s = F::zero();
                for preds in &per_member {
                    let g = preds[r].gaussian().expect("Gaussian head");
                    for (a, &b) in mu.iter_mut().zip(&g.mu) {
                        *a = *a + b;
                    }
                    s = s + g.s;
                }
                mu.iter_mut().for_each(|v| *v = *v / m);
                Ok(Prediction::Gaussian(GaussianPred::new(mu, s / m)?))
            }
        })
        .collect()
}

/// Inputs labelled by a teacher, ready for offline distillation.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferSet<F> {
    pub inputs: Matrix<F>,
    pub outputs: Vec<Prediction<F>>,
    pub ground_truth: Option<Labels<F>>,
    pub provenance: String,
}

impl<F: Scalar> TransferSet<F> {
    pub fn new(
        inputs: Matrix<F>,
        outputs: Vec<Prediction<F>>,
        ground_truth: Option<Labels<F>>,
        provenance: String,
    ) -> Result<Self> {
        let n = inputs.rows();
        if outputs.len() != n {
            return shape(format!("{n} inputs but {} teacher outputs", outputs.len()));
        }
        let gt_rows = match &ground_truth {
            Some(Labels::Classes { idx, .. }) => Some(idx.len()),
            Some(Labels::Targets(t)) => Some(t.rows()),
            None => None,
        };
        if gt_rows.is_some_and(|g| g != n) {
            return shape("ground truth row count differs from inputs");
        }
        if provenance.contains('\n') {
            return data("provenance must be a single line");
        }
        let kinds_agree = outputs.windows(2).all(|w| match (&w[0], &w[1]) {
            (Prediction::Categorical(a), Prediction::Categorical(b)) => a.num_classes() == b.num_classes(),
            (Prediction::Gaussian(a), Prediction::Gaussian(b)) => a.dim() == b.dim(),
            _ => false,
        });
        if !kinds_agree {
            return data("teacher outputs are not homogeneous");
        }
        Ok(Self { inputs, outputs, ground_truth, provenance })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_text(&self) -> String {
        let d = self.inputs.cols();
        let mut out = String::from(TRANSFER_MAGIC);
        out.push('\n');
        let (kind, k, logits) = match self.outputs.first() {
            Some(Prediction::Categorical(c)) => {
                ("categorical", c.num_classes(), self.outputs.iter().all(|o| o.categorical().unwrap().logits().is_some()))
            }
            Some(Prediction::Gaussian(g)) => ("gaussian", g.dim(), false),
            None => ("categorical", 0, false),
        };
        let truth = match &self.ground_truth {
            None => "truth=none".to_string(),
            Some(Labels::Classes { c, .. }) => format!("truth=class,tc={c}"),
            Some(Labels::Targets(t)) => format!("truth=regression,tm={}", t.cols()),
        };
        out.push_str(&format!(
            "#n={},d={d},output={kind},k={k},logits={},{truth}\n",
            self.len(),
            u8::from(logits)
        ));
        out.push_str(&format!("#provenance {}\n", self.provenance));
        for (r, o) in self.outputs.iter().enumerate() {
            let mut vals: Vec<F> = self.inputs.row(r).to_vec();
            match o {
                Prediction::Categorical(c) => {
                    vals.extend_from_slice(c.probs());
                    if logits {
                        vals.extend_from_slice(c.logits().unwrap());
                    }
                }
                Prediction::Gaussian(g) => vals.extend(g.to_raw()),
            }
            if let Some(Labels::Targets(t)) = &self.ground_truth {
                vals.extend_from_slice(t.row(r));
            }
            io::push_row(&mut out, vals);
            if let Some(Labels::Classes { idx, .. }) = &self.ground_truth {
                out.push_str(&format!(",{}", idx[r]));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = io::Lines::new(text);
        io::expect_magic(&mut lines, TRANSFER_MAGIC)?;
        let (hno, hline) = lines.next_line("transfer-set header")?;
        let h = io::parse_header(hno, hline)?;
        let n = io::header_usize(&h, "n", hno)?;
        let d = io::header_usize(&h, "d", hno)?;
        let k = io::header_usize(&h, "k", hno)?;
        let logits = io::header_usize(&h, "logits", hno)? == 1;
        let kind = io::header_str(&h, "output", hno)?.to_string();
        let out_width = match kind.as_str() {
            "categorical" => k * if logits { 2 } else { 1 },
            "gaussian" => k + 1,
            other => return io::parse_err(hno, format!("unknown output kind `{other}`")),
        };
        let truth = io::header_str(&h, "truth", hno)?.to_string();
        let (truth_width, tc) = match truth.as_str() {
            "none" => (0, 0),
            "class" => (1, io::header_usize(&h, "tc", hno)?),
            "regression" => (io::header_usize(&h, "tm", hno)?, 0),
            other => return io::parse_err(hno, format!("unknown truth kind `{other}`")),
        };
        let (pno, pline) = lines.next_line("provenance line")?;
        let Some(provenance) = pline.strip_prefix("#provenance ") else {
            return io::parse_err(pno, "expected `#provenance <text>`");
        };
        let mut inputs = Vec::with_capacity(n * d);
        let mut outputs = Vec::with_capacity(n);
        let mut classes = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..n {
            let (no, line) = lines.next_line("a transfer-set row")?;
            let fields = io::split_row(no, line, d + out_width + truth_width)?;
            for f in &fields[..d] {
                inputs.push(io::parse_scalar::<F>(no, f)?);
            }
            let outs: Vec<F> =
                fields[d..d + out_width].iter().map(|f| io::parse_scalar(no, f)).collect::<Result<_>>()?;
            let pred = if kind == "categorical" {
                let dist = if logits {
                    CategoricalDist::with_logits(outs[..k].to_vec(), outs[k..].to_vec())
                } else {
                    CategoricalDist::new(outs)
                };
                Prediction::Categorical(dist.or_else(|e| io::parse_err(no, e.to_string()))?)
            } else {
                let (s, mu) = outs.split_last().expect("k + 1 values");
                Prediction::Gaussian(GaussianPred::new(mu.to_vec(), *s).or_else(|e| io::parse_err(no, e.to_string()))?)
            };
            outputs.push(pred);
            let rest = &fields[d + out_width..];
            match truth.as_str() {
                "class" => match rest[0].trim().parse::<usize>() {
                    Ok(c) if c < tc => classes.push(c),
                    _ => return io::parse_err(no, format!("invalid class index `{}`", rest[0])),
                },
                "regression" => {
                    for f in rest {
                        targets.push(io::parse_scalar::<F>(no, f)?);
                    }
                }
                _ => {}
            }
        }
        if let Some(no) = lines.trailing_content() {
            return io::parse_err(no, format!("more rows than the declared n={n}"));
        }
        let ground_truth = match truth.as_str() {
            "class" => Some(Labels::Classes { idx: classes, c: tc }),
            "regression" => Some(Labels::Targets(Matrix::from_vec(n, truth_width, targets)?)),
            _ => None,
        };
        Self::new(Matrix::from_vec(n, d, inputs)?, outputs, ground_truth, provenance.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&io::read_text(path)?)
    }
}

const TRANSFER_MAGIC: &str = "#xcl-transfer v1";

/// Draw `n` inputs from `sampler` over `dataset` and label them with the
/// teacher. Ground truth is attached when every row is an unmodified dataset row.
pub fn materialize_transfer_set<F: Scalar>(
    teacher: &Teacher<F>,
    sampler: &TransferSampler<F>,
    dataset: &Dataset<F>,
    n: usize,
    rng: &mut Rng,
) -> Result<TransferSet<F>> {
    if n == 0 {
        return config("transfer-set size must be positive");
    }
    if teacher.input_dim() != dataset.dim() {
        return shape(format!("teacher expects {} features, data has {}", teacher.input_dim(), dataset.dim()));
    }
    let provenance = format!("sampler={};seed={};n={n}", sampler.describe(), rng.seed());
    let batch = sampler.sample(dataset, n, rng)?;
    let outputs = teacher_predict(teacher, &batch.inputs)?;
    let rows: Option<Vec<usize>> =
        batch.origins.iter().map(|o| if let RowOrigin::Row(i) = o { Some(*i) } else { None }).collect();
    let ground_truth = match rows {
        Some(idx) => Some(dataset.subset(&idx)?.labels().clone()),
        None => None,
    };
    TransferSet::new(batch.inputs, outputs, ground_truth, provenance)
}

const MODEL_MAGIC: &str = "#xcl-model v1";

/// Text serialisation of a teacher (one or more networks).
pub fn teacher_to_text<F: Scalar>(t: &Teacher<F>) -> String {
    let members = t.members();
    let mut out = String::from(MODEL_MAGIC);
    out.push('\n');
    let ensemble = matches!(t, Teacher::Ensemble(_));
    out.push_str(&format!("#members={},ensemble={}\n", members.len(), u8::from(ensemble)));
    for (i, m) in members.iter().enumerate() {
        let dims: Vec<String> = m.layer_dims().iter().map(|d| d.to_string()).collect();
        let (head, hd) = match m.head() {
            Head::Logits(c) => ("logits", c),
            Head::Gaussian(d) => ("gaussian", d),
        };
        out.push_str(&format!(
            "#member={i},dims={},activation={},head={head},hd={hd}\n",
            dims.join(";"),
            m.activation().name()
        ));
        for l in m.layers() {
            for r in l.weights.iter_rows() {
                io::push_row(&mut out, r.iter().copied());
                out.push('\n');
            }
            io::push_row(&mut out, l.bias.iter().copied());
            out.push('\n');
        }
    }
    out
}

pub fn teacher_from_text<F: Scalar>(text: &str) -> Result<Teacher<F>> {
    let mut lines = io::Lines::new(text);
    io::expect_magic(&mut lines, MODEL_MAGIC)?;
    let (hno, hline) = lines.next_line("model header")?;
    let h = io::parse_header(hno, hline)?;
    let count = io::header_usize(&h, "members", hno)?;
    let ensemble = io::header_usize(&h, "ensemble", hno)? == 1;
    if count == 0 || (!ensemble && count != 1) {
        return io::parse_err(hno, "invalid member count");
    }
    let mut members = Vec::with_capacity(count);
    for _ in 0..count {
        let (mno, mline) = lines.next_line("member header")?;
        let mh = io::parse_header(mno, mline)?;
        let dims: Vec<usize> = io::header_str(&mh, "dims", mno)?
            .split(';')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .or_else(|_| io::parse_err(mno, "malformed dims"))?;
        if dims.len() < 2 || dims.contains(&0) {
            return io::parse_err(mno, "need at least two positive dims");
        }
        let activation = Activation::parse(io::header_str(&mh, "activation", mno)?)
            .or_else(|e| io::parse_err(mno, e.to_string()))?;
        let hd = io::header_usize(&mh, "hd", mno)?;
        let head = match io::header_str(&mh, "head", mno)? {
            "logits" => Head::Logits(hd),
            "gaussian" => Head::Gaussian(hd),
            other => return io::parse_err(mno, format!("unknown head `{other}`")),
        };
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut weights = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_out {
                let (no, line) = lines.next_line("a weight row")?;
                for f in io::split_row(no, line, fan_in)? {
                    weights.push(io::parse_scalar::<F>(no, f)?);
                }
            }
            let (no, line) = lines.next_line("a bias row")?;
            let bias = io::split_row(no, line, fan_out)?
                .into_iter()
                .map(|f| io::parse_scalar::<F>(no, f))
                .collect::<Result<Vec<F>>>()?;
            layers.push(Layer { weights: Matrix::from_vec(fan_out, fan_in, weights)?, bias });
        }
        members.push(Network::from_layers(layers, activation, head).or_else(|e| io::parse_err(mno, e.to_string()))?);
    }
    if let Some(no) = lines.trailing_content() {
        return io::parse_err(no, "unexpected content after the last member");
    }
    if ensemble {
        Teacher::ensemble_with(members, true)
    } else {
        Ok(Teacher::Single(members.pop().expect("one member")))
    }
}

pub fn save_teacher<F: Scalar>(t: &Teacher<F>, path: &Path) -> Result<()> {
    io::write_atomic(path, teacher_to_text(t).as_bytes())
}

pub fn load_teacher<F: Scalar>(path: &Path) -> Result<Teacher<F>> {
    teacher_from_text(&io::read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::make_blobs;
    use crate::nn::{init_network, NetworkSpec};

    fn member(seed: u64) -> Network<f64> {
        init_network(&NetworkSpec::logits(&[3, 5, 4], Activation::Relu), &Rng::new(seed)).unwrap()
    }

    fn batch() -> Matrix<f64> {
        Matrix::from_rows([[0.5, -1.0, 2.0], [1.5, 0.0, -0.3], [0.0, 0.0, 0.0]]).unwrap()
    }

    fn fixed_output(logits: [f64; 2]) -> Network<f64> {
        // Bias-only network: output is the bias regardless of input.
        Network::from_layers(
            vec![Layer { weights: Matrix::zeros(2, 3), bias: logits.to_vec() }],
            Activation::Relu,
            Head::Logits(2),
        )
        .unwrap()
    }

    #[test]
    fn single_member_matches_network() {
        let n = member(1);
        assert_eq!(teacher_predict(&Teacher::Single(n.clone()), &batch()).unwrap(), n.predict(&batch()).unwrap());
    }

    #[test]
    fn ensemble_of_copies_equals_member() {
        let n = member(2);
        let single = n.predict(&batch()).unwrap();
        for m in [1, 2, 3] {
            let t = Teacher::ensemble(vec![n.clone(); m]).unwrap();
            for (a, b) in teacher_predict(&t, &batch()).unwrap().iter().zip(&single) {
                let (a, b) = (a.categorical().unwrap(), b.categorical().unwrap());
                for (x, y) in a.probs().iter().zip(b.probs()) {
                    assert!((x - y).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn ensemble_averages_probabilities() {
        let t = Teacher::ensemble(vec![fixed_output([60.0, 0.0]), fixed_output([0.0, 60.0])]).unwrap();
        let p = teacher_predict(&t, &batch()).unwrap();
        for row in p {
            let d = row.categorical().unwrap();
            assert!((d.probs()[0] - 0.5).abs() < 1e-12 && (d.probs()[1] - 0.5).abs() < 1e-12);
            assert!((d.logits().unwrap()[0] - 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_is_order_invariant() {
        let (a, b, c) = (member(1), member(2), member(3));
        let t1 = Teacher::ensemble(vec![a.clone(), b.clone(), c.clone()]).unwrap();
        let t2 = Teacher::ensemble(vec![c, a, b]).unwrap();
        let (p1, p2) = (teacher_predict(&t1, &batch()).unwrap(), teacher_predict(&t2, &batch()).unwrap());
        for (x, y) in p1.iter().zip(&p2) {
            for (u, v) in x.categorical().unwrap().probs().iter().zip(y.categorical().unwrap().probs()) {
                assert!((u - v).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn heterogeneous_members_rejected() {
        let g: Network<f64> = init_network(&NetworkSpec::gaussian(&[3, 4, 3], Activation::Relu), &Rng::new(0)).unwrap();
        assert!(matches!(Teacher::ensemble(vec![member(0), g.clone()]), Err(crate::Error::Config(_))));
        assert!(Teacher::ensemble(vec![g.clone()]).is_err());
        assert!(Teacher::ensemble_with(vec![g.clone(), g], true).is_ok());
        assert!(Teacher::<f64>::ensemble(vec![]).is_err());
    }

    #[test]
    fn regression_ensemble_averages_mean_and_log_variance() {
        let make = |mu: f64, s: f64| {
            Network::from_layers(
                vec![Layer { weights: Matrix::zeros(2, 3), bias: vec![mu, s] }],
                Activation::Relu,
                Head::Gaussian(1),
            )
            .unwrap()
        };
        let t = Teacher::ensemble_with(vec![make(1.0, -1.0), make(3.0, 0.5)], true).unwrap();
        let p = teacher_predict(&t, &batch()).unwrap();
        let g = p[0].gaussian().unwrap();
        assert_eq!(g.mu, vec![2.0]);
        assert_eq!(g.s, -0.25);
    }

    #[test]
    fn materialise_and_round_trip() {
        let ds = make_blobs::<f64>(4, 3, 5, 1.0, 2.0, &Rng::new(0)).unwrap();
        let t = Teacher::ensemble(vec![member(5), member(6)]).unwrap();
        let one = materialize_transfer_set(&t, &TransferSampler::Mix, &ds, 1, &mut Rng::new(1)).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.ground_truth.is_none());

        let perm = materialize_transfer_set(&t, &TransferSampler::Empirical { replace: false }, &ds, 20, &mut Rng::new(2))
            .unwrap();
        let mut rows: Vec<Vec<u64>> = perm.inputs.iter_rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        let mut orig: Vec<Vec<u64>> =
            ds.features().iter_rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        rows.sort();
        orig.sort();
        assert_eq!(rows, orig);
        assert!(matches!(perm.ground_truth, Some(Labels::Classes { .. })));

        for ts in [one, perm] {
            let back = TransferSet::<f64>::from_text(&ts.to_text()).unwrap();
            assert_eq!(back, ts);
        }
    }

    #[test]
    fn materialise_checks_dimensions() {
        let ds = make_blobs::<f64>(4, 2, 5, 1.0, 2.0, &Rng::new(0)).unwrap();
        let t = Teacher::Single(member(0));
        let err = materialize_transfer_set(&t, &TransferSampler::Mix, &ds, 4, &mut Rng::new(0));
        assert!(matches!(err, Err(crate::Error::Shape(_))));
    }

    #[test]
    fn gaussian_transfer_set_round_trip() {
        let g: Network<f64> = init_network(&NetworkSpec::gaussian(&[2, 4, 2], Activation::Tanh), &Rng::new(3)).unwrap();
        let ds = crate::datasets::make_heteroscedastic_regression(10, 2, crate::datasets::NoiseProfile::Linear, &Rng::new(1))
            .unwrap();
        let ts = materialize_transfer_set(&Teacher::Single(g), &TransferSampler::Empirical { replace: false }, &ds, 10, &mut Rng::new(4))
            .unwrap();
        assert_eq!(TransferSet::<f64>::from_text(&ts.to_text()).unwrap(), ts);
    }

    #[test]
    fn model_file_round_trip() {
        let t = Teacher::ensemble(vec![member(1), member(2)]).unwrap();
        assert_eq!(teacher_from_text::<f64>(&teacher_to_text(&t)).unwrap(), t);
        let s = Teacher::Single(member(3));
        assert_eq!(teacher_from_text::<f64>(&teacher_to_text(&s)).unwrap(), s);
        let text = teacher_to_text(&s);
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(matches!(teacher_from_text::<f64>(&cut), Err(crate::Error::Parse { .. })));
    }
}
