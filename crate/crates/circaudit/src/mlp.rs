//! Minimal feedforward teacher network: deterministic mini-batch SGD with
//! tanh/relu hidden layers, optional dropout, and a logistic or squared loss.
//! The net exists to play the black-box role in distillation audits, so the
//! training loop is deliberately plain — no momentum, no schedules.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circularity::{run_audit, AuditConfig, AuditResult};
use crate::data::Dataset;
use crate::error::{CircError, Result};
use crate::gam::Family;

pub const WEIGHTS_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    fn deriv(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Logistic,
    Squared,
}

#[derive(Debug, Clone)]
pub struct NetSpec {
    /// Hidden layer widths; default is the ascending-then-descending ramp.
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl NetSpec {
    pub fn default_ramp(activation: Activation) -> NetSpec {
        NetSpec {
            hidden: vec![16, 32, 64, 32, 16],
            activation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub loss: Loss,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(loss: Loss, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.01,
            epochs: 5,
            dropout: 0.0,
            loss,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.learning_rate <= 0.0 {
            return Err(CircError::InvalidArgument(
                "batch size and learning rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(CircError::InvalidArgument("dropout must lie in [0,1)".into()));
        }
        Ok(())
    }
}

/// Trained teacher. Only `predict` is exposed to audits (black-box contract).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeacherNet {
    pub version: String,
    /// Input columns in the order the net consumes them.
    pub features: Vec<String>,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    /// Row-major (out x in) weight matrices, one per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    /// Squash the linear output through a sigmoid (set for logistic loss).
    pub sigmoid_output: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreThresholds {
    pub cuts: Vec<f64>,
}

impl ScoreThresholds {
    pub fn new(cuts: Vec<f64>) -> Result<ScoreThresholds> {
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CircError::InvalidArgument(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(ScoreThresholds { cuts })
    }
}

/// Symmetric uniform init scaled by fan-in, deterministic in the seed.
fn init_layers(sizes: &[usize], rng: &mut ChaCha8Rng) -> (Vec<Array2<f64>>, Vec<Array1<f64>>) {
    let mut weights = Vec::with_capacity(sizes.len() - 1);
    let mut biases = Vec::with_capacity(sizes.len() - 1);
    for l in 1..sizes.len() {
        let (fan_in, fan_out) = (sizes[l - 1], sizes[l]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut w = Array2::<f64>::zeros((fan_out, fan_in));
        for v in w.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        let mut b = Array1::<f64>::zeros(fan_out);
        for v in b.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        weights.push(w);
        biases.push(b);
    }
    (weights, biases)
}

struct Layers {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    activation: Activation,
}

impl Layers {
    /// Forward pass over a batch (rows = samples). Returns pre-activations of
    /// every layer and post-activation outputs of the hidden layers.
    fn forward(
        &self,
        x: &Array2<f64>,
        dropout_masks: Option<&[Array2<f64>]>,
    ) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let n_layers = self.weights.len();
        let mut zs = Vec::with_capacity(n_layers);
        let mut activations = Vec::with_capacity(n_layers - 1);
        let mut a = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            for mut row in z.axis_iter_mut(Axis(0)) {
                row += b;
            }
            if l + 1 < n_layers {
                let mut act = z.mapv(|v| self.activation.apply(v));
                if let Some(masks) = dropout_masks {
                    act *= &masks[l];
                }
                a = act.clone();
                activations.push(act);
            }
            zs.push(z);
        }
        (zs, activations)
    }
}

/// Mean loss and the gradient of the loss w.r.t. the output pre-activation,
/// already divided by the batch size.
fn output_grad(loss: Loss, z_out: &Array2<f64>, y: &[f64]) -> (f64, Array2<f64>) {
    let n = y.len() as f64;
    let mut delta = Array2::<f64>::zeros(z_out.raw_dim());
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let z = z_out[[i, 0]];
        match loss {
            Loss::Logistic => {
                let p = sigmoid(z);
                let pc = p.clamp(1e-12, 1.0 - 1e-12);
                total += -(yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln());
                delta[[i, 0]] = (p - yi) / n;
            }
            Loss::Squared => {
                let r = z - yi;
                total += r * r;
                delta[[i, 0]] = 2.0 * r / n;
            }
        }
    }
    (total / n, delta)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Backward pass; returns per-layer weight and bias gradients.
fn backward(
    layers: &Layers,
    x: &Array2<f64>,
    zs: &[Array2<f64>],
    activations: &[Array2<f64>],
    dropout_masks: Option<&[Array2<f64>]>,
    mut delta: Array2<f64>,
) -> (Vec<Array2<f64>>, Vec<Array1<f64>>) {
    let n_layers = layers.weights.len();
    let mut grad_w = vec![Array2::<f64>::zeros((0, 0)); n_layers];
    let mut grad_b = vec![Array1::<f64>::zeros(0); n_layers];
    for l in (0..n_layers).rev() {
        let input = if l == 0 { x } else { &activations[l - 1] };
        grad_w[l] = delta.t().dot(input);
        grad_b[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut d = delta.dot(&layers.weights[l]);
            d.zip_mut_with(&zs[l - 1], |v, &z| *v *= layers.activation.deriv(z));
            if let Some(masks) = dropout_masks {
                d *= &masks[l - 1];
            }
            delta = d;
        }
    }
    (grad_w, grad_b)
}

fn design_matrix(data: &Dataset, features: &[String]) -> Result<Array2<f64>> {
    let n = data.n_rows();
    let mut x = Array2::<f64>::zeros((n, features.len()));
    for (j, name) in features.iter().enumerate() {
        let col = data.column(name)?;
        for (i, &v) in col.values.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    Ok(x)
}

/// Deterministic mini-batch SGD. Dropout (inverted scaling) applies to hidden
/// activations during training only.
pub fn train(
    spec: &NetSpec,
    data: &Dataset,
    target: &str,
    features: &[String],
    cfg: &TrainConfig,
) -> Result<TeacherNet> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(CircError::EmptyInput("teacher feature list"));
    }
    let y = &data.column(target)?.values;
    if cfg.loss == Loss::Logistic {
        if let Some(&bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(CircError::NonBinaryTarget(bad));
        }
    }
    let x = design_matrix(data, features)?;
    let n = data.n_rows();

    let mut sizes = Vec::with_capacity(spec.hidden.len() + 2);
    sizes.push(features.len());
    sizes.extend_from_slice(&spec.hidden);
    sizes.push(1);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (weights, biases) = init_layers(&sizes, &mut rng);
    let mut layers = Layers {
        weights,
        biases,
        activation: spec.activation,
    };

    let keep = 1.0 - cfg.dropout;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        // Fisher-Yates with the same stream as initialization
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let masks = if cfg.dropout > 0.0 {
                let mut ms = Vec::with_capacity(spec.hidden.len());
                for &width in &spec.hidden {
                    let mut m = Array2::<f64>::zeros((batch.len(), width));
                    for v in m.iter_mut() {
                        *v = if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 };
                    }
                    ms.push(m);
                }
                Some(ms)
            } else {
                None
            };
            let (zs, acts) = layers.forward(&xb, masks.as_deref());
            let (loss, delta) = output_grad(cfg.loss, zs.last().unwrap(), &yb);
            if !loss.is_finite() {
                return Err(CircError::InvalidArgument(format!(
                    "training diverged: non-finite loss in epoch {epoch}"
                )));
            }
            let (gw, gb) = backward(&layers, &xb, &zs, &acts, masks.as_deref(), delta);
            for l in 0..layers.weights.len() {
                layers.weights[l].scaled_add(-cfg.learning_rate, &gw[l]);
                layers.biases[l].scaled_add(-cfg.learning_rate, &gb[l]);
            }
        }
    }

    Ok(TeacherNet {
        version: WEIGHTS_VERSION.to_string(),
        features: features.to_vec(),
        layer_sizes: sizes,
        activation: spec.activation,
        weights: layers.weights.iter().map(|w| w.iter().cloned().collect()).collect(),
        biases: layers.biases.iter().map(|b| b.to_vec()).collect(),
        sigmoid_output: cfg.loss == Loss::Logistic,
        seed: cfg.seed,
    })
}

impl TeacherNet {
    fn layers(&self) -> Layers {
        let mut weights = Vec::with_capacity(self.weights.len());
        for (l, flat) in self.weights.iter().enumerate() {
            let (rows, cols) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            weights.push(Array2::from_shape_vec((rows, cols), flat.clone()).unwrap());
        }
        let biases = self.biases.iter().map(|b| Array1::from_vec(b.clone())).collect();
        Layers {
            weights,
            biases,
            activation: self.activation,
        }
    }

    /// Forward pass without dropout; deterministic.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        for f in &self.features {
            if !data.has_column(f) {
                return Err(CircError::UnknownFeature(f.clone()));
            }
        }
        let x = design_matrix(data, &self.features)?;
        let (zs, _) = self.layers().forward(&x, None);
        let out = zs.last().unwrap();
        Ok(out
            .column(0)
            .iter()
            .map(|&z| if self.sigmoid_output { sigmoid(z) } else { z })
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("teacher weights serialize")
    }

    pub fn from_json(text: &str) -> Result<TeacherNet> {
        serde_json::from_str(text)
            .map_err(|e| CircError::InvalidArgument(format!("bad weights document: {e}")))
    }
}

/// Label = number of cuts strictly below the score.
pub fn threshold(scores: &[f64], cuts: &[f64]) -> Vec<u32> {
    scores
        .iter()
        .map(|&s| cuts.iter().filter(|&&c| s > c).count() as u32)
        .collect()
}

/// k-1 cuts learned greedily per boundary (ascending) by an exhaustive sweep
/// over midpoints of adjacent distinct scores, minimizing that boundary's
/// misclassification count.
pub fn learn_thresholds(scores: &[f64], labels: &[u32], k: usize) -> Result<ScoreThresholds> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(CircError::EmptyInput("threshold learning inputs"));
    }
    if k == 0 {
        return Err(CircError::InvalidArgument("need at least one class".into()));
    }
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < k {
        return Err(CircError::InvalidArgument(format!(
            "{} distinct scores cannot separate {k} classes",
            distinct.len()
        )));
    }
    let midpoints: Vec<f64> = distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut cuts = Vec::with_capacity(k - 1);
    let mut last = f64::NEG_INFINITY;
    for boundary in 1..k {
        let mut best_cut = f64::NAN;
        let mut best_err = usize::MAX;
        for &c in midpoints.iter().filter(|&&c| c > last) {
            let err = scores
                .iter()
                .zip(labels)
                .filter(|(&s, &l)| (s > c) != (l >= boundary as u32))
                .count();
            if err < best_err {
                best_err = err;
                best_cut = c;
            }
        }
        if !best_cut.is_finite() {
            return Err(CircError::InvalidArgument(
                "ran out of candidate cuts; too few distinct scores".into(),
            ));
        }
        cuts.push(best_cut);
        last = best_cut;
    }
    ScoreThresholds::new(cuts)
}

/// Binary F1 with positive class 1; 0 when precision + recall is 0.
pub fn f1(pred: &[u32], truth: &[u32]) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(CircError::EmptyInput("f1 inputs"));
    }
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fnn += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fnn;
    Ok(if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 })
}

pub fn accuracy(pred: &[u32], truth: &[u32]) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(CircError::EmptyInput("accuracy inputs"));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Distillation audit: fit a student GAM on the teacher's predictions over
/// `test` and run the circularity test. The teacher is touched only through
/// `predict`. With cuts, predictions are discretized first (binary targets use
/// the binomial family); without cuts, the raw scores are audited as Gaussian.
pub fn distill_audit(
    teacher: &TeacherNet,
    test: &Dataset,
    student_features: &[String],
    cuts: &[f64],
    audit: &AuditConfig,
) -> Result<AuditResult> {
    let scores = teacher.predict(test)?;
    let target: Vec<f64> = if cuts.is_empty() {
        scores
    } else {
        threshold(&scores, cuts).into_iter().map(f64::from).collect()
    };
    if audit.family == Family::Binomial {
        if let Some(&bad) = target.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(CircError::NonBinaryTarget(bad));
        }
    }
    let mut cols: Vec<(String, Vec<f64>)> = Vec::with_capacity(student_features.len() + 1);
    for name in student_features {
        cols.push((name.clone(), test.column(name)?.values.clone()));
    }
    cols.push(("teacher_label".to_string(), target));
    let student_data = Dataset::from_columns(cols)?;
    run_audit(&student_data, "teacher_label", audit)
}
