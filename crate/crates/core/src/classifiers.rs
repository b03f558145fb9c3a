//! Binary classifiers over fixed-length feature vectors: logistic
//! regression and a ReLU multilayer perceptron with hidden sizes (5, 5, 5).
//!
//! Both minimize mean binary cross-entropy plus `l2 * ||w||^2 / 2` (biases
//! excluded) with plain mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;

/// Hidden layer widths of the MLP.
pub const MLP_HIDDEN: [usize; 3] = [5, 5, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
    labels: Option<Vec<u8>>,
}

impl FeatureMatrix {
    /// Row-major constructor. Rejects non-finite values and labels other than 0/1.
    pub fn new(dim: usize, values: Vec<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("feature dimension must be positive".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len() % dim,
            });
        }
        let rows = values.len() / dim;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: labels.len(),
                });
            }
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
            }
        }
        Ok(FeatureMatrix {
            rows,
            dim,
            values,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<u8>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        FeatureMatrix::new(dim, rows.concat(), labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    fn label(&self, i: usize) -> f64 {
        self.labels.as_ref().map_or(0.0, |l| l[i] as f64)
    }

    /// Labels present, at least two rows, both classes.
    fn check_trainable(&self) -> Result<()> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("training data needs labels".into()))?;
        if self.rows < 2 || !labels.contains(&0) || !labels.contains(&1) {
            return Err(Error::SingleClass);
        }
        Ok(())
    }
}

/// Per-dimension z-scoring with statistics from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &FeatureMatrix) -> Self {
        let n = data.rows.max(1) as f64;
        let mut mean = vec![0.0; data.dim];
        for i in 0..data.rows {
            for (m, &x) in mean.iter_mut().zip(data.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; data.dim];
        for i in 0..data.rows {
            for ((v, &x), &m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        // Constant columns keep unit scale.
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&x, &m), &s)| (x - m) / s)
            .collect()
    }

    pub fn transform(&self, data: &FeatureMatrix) -> FeatureMatrix {
        let values = (0..data.rows).flat_map(|i| self.transform_row(data.row(i))).collect();
        FeatureMatrix {
            rows: data.rows,
            dim: data.dim,
            values,
            labels: data.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 32,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidConfig("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Logistic function clamped to the open interval (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    raw_sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

fn raw_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln σ(z) + (1-y) ln(1-σ(z))]`, computed without overflow.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

/// A differentiable binary model with a flat parameter vector.
pub trait BinaryModel {
    fn dim(&self) -> usize;

    fn logit(&self, x: &[f64]) -> f64;

    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, params: &[f64]);

    /// Mean loss over `rows` and its gradient with respect to `params()`.
    fn loss_and_gradient(&self, data: &FeatureMatrix, rows: &[usize], l2: f64) -> (f64, Vec<f64>);

    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(sigmoid(self.logit(x)))
    }

    /// Full-data objective.
    fn loss(&self, data: &FeatureMatrix, l2: f64) -> f64 {
        let rows: Vec<usize> = (0..data.rows()).collect();
        self.loss_and_gradient(data, &rows, l2).0
    }

    fn accuracy(&self, data: &FeatureMatrix) -> f64 {
        if data.rows() == 0 {
            return 0.0;
        }
        let correct = (0..data.rows())
            .filter(|&i| (self.logit(data.row(i)) > 0.0) == (data.label(i) > 0.5))
            .count();
        correct as f64 / data.rows() as f64
    }
}

/// Runs `cfg.epochs` epochs of mini-batch gradient descent from the model's
/// current parameters. Batches are drawn from a shuffle seeded by `seed`.
pub fn fit_epochs<M: BinaryModel>(model: &mut M, data: &FeatureMatrix, cfg: &TrainConfig, seed: u64) -> Result<()> {
    cfg.validate()?;
    data.check_trainable()?;
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: data.dim(),
        });
    }
    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..data.rows()).collect();
    let mut params = model.params();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = model.loss_and_gradient(data, batch, cfg.l2);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
            model.set_params(&params);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }
}

impl BinaryModel for LogisticModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    fn set_params(&mut self, params: &[f64]) {
        let (bias, weights) = params.split_last().expect("bias present");
        self.weights.copy_from_slice(weights);
        self.bias = *bias;
    }

    fn loss_and_gradient(&self, data: &FeatureMatrix, rows: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let dim = self.dim();
        let mut grad = vec![0.0; dim + 1];
        let mut loss = 0.0;
        for &i in rows {
            let x = data.row(i);
            let y = data.label(i);
            let z = self.logit(x);
            loss += bce_from_logit(z, y);
            let dz = raw_sigmoid(z) - y;
            for (g, &xj) in grad.iter_mut().zip(x) {
                *g += dz * xj;
            }
            grad[dim] += dz;
        }
        let n = rows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        loss /= n;
        for (g, &w) in grad.iter_mut().zip(&self.weights) {
            *g += l2 * w;
        }
        loss += 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        (loss, grad)
    }
}

pub fn train_logistic(data: &FeatureMatrix, cfg: &TrainConfig) -> Result<LogisticModel> {
    let mut model = LogisticModel::zeros(data.dim());
    fit_epochs(&mut model, data, cfg, cfg.seed)?;
    Ok(model)
}

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// ReLU hidden layers, single sigmoid output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                DenseLayer {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        MlpModel { layers }
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        dims.extend(self.layers.last().map(|l| l.outputs));
        dims
    }

    /// Pre-activations of every layer.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&act);
            if l + 1 < self.layers.len() {
                act = z.iter().map(|&v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
        pre
    }
}

impl BinaryModel for MlpModel {
    fn dim(&self) -> usize {
        self.layers[0].inputs
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.forward_all(x).last().expect("at least one layer")[0]
    }

    fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    fn set_params(&mut self, params: &[f64]) {
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            let nb = layer.biases.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            layer.biases.copy_from_slice(&params[offset + nw..offset + nw + nb]);
            offset += nw + nb;
        }
    }

    fn loss_and_gradient(&self, data: &FeatureMatrix, rows: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let mut weight_grads: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
        let mut bias_grads: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect();
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        for &i in rows {
            let x = data.row(i);
            let y = data.label(i);
            let pre = self.forward_all(x);
            let z = pre[last][0];
            loss += bce_from_logit(z, y);

            let mut delta = vec![raw_sigmoid(z) - y];
            for l in (0..=last).rev() {
                let layer = &self.layers[l];
                let input: Vec<f64> = if l == 0 {
                    x.to_vec()
                } else {
                    pre[l - 1].iter().map(|&v| v.max(0.0)).collect()
                };
                for (o, &d) in delta.iter().enumerate() {
                    bias_grads[l][o] += d;
                    let row = &mut weight_grads[l][o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, &a) in row.iter_mut().zip(&input) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    delta = (0..layer.inputs)
                        .map(|j| {
                            if pre[l - 1][j] > 0.0 {
                                delta
                                    .iter()
                                    .enumerate()
                                    .map(|(o, &d)| d * layer.weights[o * layer.inputs + j])
                                    .sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        let n = rows.len().max(1) as f64;
        loss /= n;
        let mut grad = Vec::new();
        for ((layer, wg), bg) in self.layers.iter().zip(weight_grads).zip(bias_grads) {
            grad.extend(wg.iter().zip(&layer.weights).map(|(g, w)| g / n + l2 * w));
            grad.extend(bg.iter().map(|g| g / n));
            loss += 0.5 * l2 * layer.weights.iter().map(|w| w * w).sum::<f64>();
        }
        (loss, grad)
    }
}

pub fn train_mlp(data: &FeatureMatrix, cfg: &TrainConfig) -> Result<MlpModel> {
    let mut model = MlpModel::init(data.dim(), &MLP_HIDDEN, cfg.seed);
    fit_epochs(&mut model, data, cfg, crate::rng::derive_seed(cfg.seed, 1))?;
    Ok(model)
}

/// Which classifier family to fit on features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Logistic(LogisticModel),
    Mlp(MlpModel),
}

impl Classifier {
    /// Untrained model: zeros for logistic, Glorot init for the MLP.
    pub fn init(kind: ClassifierKind, dim: usize, seed: u64) -> Self {
        match kind {
            ClassifierKind::Logistic => Classifier::Logistic(LogisticModel::zeros(dim)),
            ClassifierKind::Mlp => Classifier::Mlp(MlpModel::init(dim, &MLP_HIDDEN, seed)),
        }
    }
}

impl BinaryModel for Classifier {
    fn dim(&self) -> usize {
        match self {
            Classifier::Logistic(m) => m.dim(),
            Classifier::Mlp(m) => m.dim(),
        }
    }

    fn logit(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Logistic(m) => m.logit(x),
            Classifier::Mlp(m) => m.logit(x),
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            Classifier::Logistic(m) => m.params(),
            Classifier::Mlp(m) => m.params(),
        }
    }

    fn set_params(&mut self, params: &[f64]) {
        match self {
            Classifier::Logistic(m) => m.set_params(params),
            Classifier::Mlp(m) => m.set_params(params),
        }
    }

    fn loss_and_gradient(&self, data: &FeatureMatrix, rows: &[usize], l2: f64) -> (f64, Vec<f64>) {
        match self {
            Classifier::Logistic(m) => m.loss_and_gradient(data, rows, l2),
            Classifier::Mlp(m) => m.loss_and_gradient(data, rows, l2),
        }
    }
}

/// Standardization statistics plus the classifier fitted on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierPipeline {
    pub version: u32,
    pub standardizer: Standardizer,
    pub classifier: Classifier,
}

impl ClassifierPipeline {
    pub fn new(standardizer: Standardizer, classifier: Classifier) -> Self {
        ClassifierPipeline {
            version: FORMAT_VERSION,
            standardizer,
            classifier,
        }
    }

    /// Standardizes with training statistics, then fits a fresh classifier.
    pub fn train(kind: ClassifierKind, data: &FeatureMatrix, cfg: &TrainConfig) -> Result<Self> {
        data.check_trainable()?;
        let standardizer = Standardizer::fit(data);
        let scaled = standardizer.transform(data);
        let classifier = match kind {
            ClassifierKind::Logistic => Classifier::Logistic(train_logistic(&scaled, cfg)?),
            ClassifierKind::Mlp => Classifier::Mlp(train_mlp(&scaled, cfg)?),
        };
        Ok(ClassifierPipeline::new(standardizer, classifier))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.standardizer.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.standardizer.mean.len(),
                found: x.len(),
            });
        }
        self.classifier.predict_proba(&self.standardizer.transform_row(x))
    }
}
