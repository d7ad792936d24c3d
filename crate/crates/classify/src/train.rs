//! Losses, Adam, early-stopped training and inference.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use gazelens_core::model::ProfileField;

use crate::nn::{Architecture, Hyperparams, Mode, Network};
use crate::tensor::{ChannelStats, SessionTensor, N_CHANNELS};
use crate::ClassifyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    /// One logit with a logistic head.
    Binary,
    /// `n` logits with a softmax head.
    Categorical(usize),
}

impl OutputKind {
    pub fn for_classes(n_classes: usize) -> Self {
        if n_classes == 2 {
            OutputKind::Binary
        } else {
            OutputKind::Categorical(n_classes)
        }
    }

    pub fn n_logits(self) -> usize {
        match self {
            OutputKind::Binary => 1,
            OutputKind::Categorical(n) => n,
        }
    }

    pub fn n_classes(self) -> usize {
        match self {
            OutputKind::Binary => 2,
            OutputKind::Categorical(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub architecture: Architecture,
    pub hyper: Hyperparams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(architecture: Architecture, seed: u64) -> Self {
        ClassifierSpec {
            architecture,
            hyper: Hyperparams::default(),
            seed,
        }
    }
}

/// What a single sample's loss compares against.
#[derive(Debug, Clone, PartialEq)]
pub enum LossTarget {
    /// Class 0 or 1 against one logit.
    Binary(usize),
    Categorical(usize),
    /// Half squared error against raw outputs.
    Squared(Vec<f64>),
}

fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Loss and its gradient with respect to the logits.
pub fn loss_and_grad(logits: &[f64], target: &LossTarget) -> (f64, Vec<f64>) {
    match target {
        LossTarget::Binary(y) => {
            let z = logits[0];
            let y = *y as f64;
            (log1p_exp(z) - y * z, vec![sigmoid(z) - y])
        }
        LossTarget::Categorical(y) => {
            let p = softmax(logits);
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            let mut g = p;
            g[*y] -= 1.0;
            (lse - logits[*y], g)
        }
        LossTarget::Squared(t) => {
            let d: Vec<f64> = logits.iter().zip(t).map(|(a, b)| a - b).collect();
            (0.5 * d.iter().map(|v| v * v).sum::<f64>(), d)
        }
    }
}

fn target_for(kind: OutputKind, class: usize) -> LossTarget {
    match kind {
        OutputKind::Binary => LossTarget::Binary(class),
        OutputKind::Categorical(_) => LossTarget::Categorical(class),
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub target: ProfileField,
    pub output: OutputKind,
    pub network: Network,
    /// Weights of the best validation epoch.
    pub params: Vec<f64>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Statistics the inputs were normalised with, if any.
    pub normalisation: Option<ChannelStats>,
}

/// A normalised input with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub class: usize,
}

pub fn samples(tensors: &[SessionTensor], target: ProfileField) -> Vec<Sample> {
    tensors
        .iter()
        .map(|t| Sample {
            input: t.data.clone(),
            class: t.profile.class_index(target),
        })
        .collect()
}

fn mean_loss(net: &Network, p: &[f64], data: &[Sample], kind: OutputKind) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let total: f64 = data
        .iter()
        .map(|s| {
            loss_and_grad(
                &net.forward(p, &s.input, Mode::Eval, &mut rng).0,
                &target_for(kind, s.class),
            )
            .0
        })
        .sum();
    total / data.len() as f64
}

pub fn train_classifier(
    spec: &ClassifierSpec,
    train: &[SessionTensor],
    validation: &[SessionTensor],
    target: ProfileField,
) -> Result<TrainedModel, ClassifyError> {
    let train_s = samples(train, target);
    let val_s = samples(validation, target);
    let seq_len = train.first().map_or(0, SessionTensor::steps);
    train_on_samples(spec, &train_s, &val_s, seq_len, N_CHANNELS, target)
}

/// Mini-batch Adam with early stopping on validation loss. The best
/// epoch's weights are returned.
pub fn train_on_samples(
    spec: &ClassifierSpec,
    train: &[Sample],
    validation: &[Sample],
    seq_len: usize,
    n_channels: usize,
    target: ProfileField,
) -> Result<TrainedModel, ClassifyError> {
    if train.is_empty() || validation.is_empty() {
        return Err(ClassifyError::EmptySet);
    }
    let first = train[0].class;
    if train.iter().all(|s| s.class == first) {
        return Err(ClassifyError::SingleClassTraining {
            target,
            class: first,
        });
    }
    let expected = seq_len * n_channels;
    for s in train.iter().chain(validation) {
        if s.input.len() != expected {
            return Err(ClassifyError::ShapeMismatch {
                expected,
                got: s.input.len(),
            });
        }
    }
    let output = OutputKind::for_classes(target.n_classes());
    let hp = &spec.hyper;
    let net = Network::build(
        spec.architecture,
        hp,
        seq_len,
        n_channels,
        output.n_logits(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut params = net.init_params(&mut rng);
    let mut adam = Adam::new(net.n_params, hp.learning_rate);
    let mut grads = vec![0.0; net.n_params];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = hp.batch_size.max(1);

    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    // Patience counts epochs since the last drop larger than `min_delta`;
    // the restored weights are always the lowest validation loss seen.
    let mut progress = (f64::INFINITY, 0usize);
    for epoch in 0..hp.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grads.fill(0.0);
            let mut batch_loss = 0.0;
            for &i in chunk {
                let s = &train[i];
                let (logits, cache) = net.forward(&params, &s.input, Mode::Train, &mut rng);
                let (loss, d) = loss_and_grad(&logits, &target_for(output, s.class));
                batch_loss += loss;
                net.backward(&params, cache, d, &mut grads);
            }
            let scale = 1.0 / chunk.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params, &grads);
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = mean_loss(&net, &params, validation, output);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(ClassifyError::NonFiniteLoss {
                epoch,
                train_loss,
                val_loss,
            });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
        }
        if val_loss < progress.0 - hp.min_delta {
            progress = (val_loss, epoch);
        } else if epoch - progress.1 >= hp.patience {
            break;
        }
    }
    Ok(TrainedModel {
        spec: spec.clone(),
        target,
        output,
        network: net,
        params: best.2,
        history,
        best_epoch: best.1,
        normalisation: None,
    })
}

/// Class probabilities. Binary models return one value, `P(class 1)`.
pub fn predict_proba(model: &TrainedModel, input: &[f64]) -> Result<Vec<f64>, ClassifyError> {
    let expected = model.network.input_len();
    if input.len() != expected {
        return Err(ClassifyError::ShapeMismatch {
            expected,
            got: input.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let logits = model
        .network
        .forward(&model.params, input, Mode::Eval, &mut rng)
        .0;
    Ok(match model.output {
        OutputKind::Binary => vec![sigmoid(logits[0])],
        OutputKind::Categorical(_) => softmax(&logits),
    })
}

/// Expands a one-value binary prediction to `[P(0), P(1)]`.
pub fn class_probabilities(pred: &[f64]) -> Vec<f64> {
    if pred.len() == 1 {
        vec![1.0 - pred[0], pred[0]]
    } else {
        pred.to_vec()
    }
}

/// Classes ordered by descending probability, ties by ascending index.
pub fn ranked_classes(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    idx
}

pub fn top_k_accuracy(
    predictions: &[Vec<f64>],
    labels: &[usize],
    k: usize,
) -> Result<f64, ClassifyError> {
    assert_eq!(predictions.len(), labels.len(), "one label per prediction");
    if predictions.is_empty() {
        return Err(ClassifyError::EmptySet);
    }
    let mut hits = 0;
    for (pred, &label) in predictions.iter().zip(labels) {
        let probs = class_probabilities(pred);
        if k == 0 || k > probs.len() {
            return Err(ClassifyError::KOutOfRange {
                k,
                n_classes: probs.len(),
            });
        }
        if ranked_classes(&probs)[..k].contains(&label) {
            hits += 1;
        }
    }
    Ok(hits as f64 / predictions.len() as f64)
}

/// Largest relative difference between backpropagated and central
/// finite-difference gradients of the summed loss, over every parameter.
/// Dropout is off.
pub fn gradient_check(
    net: &Network,
    params: &[f64],
    batch: &[(Vec<f64>, LossTarget)],
    epsilon: f64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let total_loss = |p: &[f64], rng: &mut ChaCha8Rng| -> f64 {
        batch
            .iter()
            .map(|(x, t)| loss_and_grad(&net.forward(p, x, Mode::Eval, rng).0, t).0)
            .sum()
    };
    let analytic = analytic_gradient(net, params, batch);
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + epsilon;
        let up = total_loss(&p, &mut rng);
        p[i] = orig - epsilon;
        let down = total_loss(&p, &mut rng);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Gradient of the summed loss over `batch`, dropout off.
pub fn analytic_gradient(
    net: &Network,
    params: &[f64],
    batch: &[(Vec<f64>, LossTarget)],
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut g = vec![0.0; net.n_params];
    for (x, t) in batch {
        let (logits, cache) = net.forward(params, x, Mode::Eval, &mut rng);
        let (_, d) = loss_and_grad(&logits, t);
        net.backward(params, cache, d, &mut g);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_examples() {
        let preds = vec![vec![0.5, 0.3, 0.2]];
        assert_eq!(top_k_accuracy(&preds, &[1], 1).unwrap(), 0.0);
        assert_eq!(top_k_accuracy(&preds, &[1], 2).unwrap(), 1.0);
        assert_eq!(top_k_accuracy(&preds, &[2], 3).unwrap(), 1.0);
        assert!(matches!(
            top_k_accuracy(&preds, &[1], 4),
            Err(ClassifyError::KOutOfRange { k: 4, n_classes: 3 })
        ));
        assert!(matches!(
            top_k_accuracy(&preds, &[1], 0),
            Err(ClassifyError::KOutOfRange { .. })
        ));
        // Ties go to the lower class index.
        assert_eq!(
            top_k_accuracy(&[vec![0.4, 0.4, 0.2]], &[0], 1).unwrap(),
            1.0
        );
        assert_eq!(
            top_k_accuracy(&[vec![0.4, 0.4, 0.2]], &[1], 1).unwrap(),
            0.0
        );
        // Binary: one probability for class 1.
        assert_eq!(
            top_k_accuracy(&[vec![0.8], vec![0.3]], &[1, 0], 1).unwrap(),
            1.0
        );
        assert_eq!(top_k_accuracy(&[vec![0.5]], &[0], 1).unwrap(), 1.0);
    }

    #[test]
    fn losses_match_closed_forms() {
        let (l, g) = loss_and_grad(&[0.0], &LossTarget::Binary(1));
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g, vec![-0.5]);
        let (l, g) = loss_and_grad(&[1.0, 1.0, 1.0], &LossTarget::Categorical(2));
        assert!((l - 3f64.ln()).abs() < 1e-15);
        assert!((g[2] + 2.0 / 3.0).abs() < 1e-15);
        // Extreme logits stay finite.
        assert!(loss_and_grad(&[-800.0], &LossTarget::Binary(1))
            .0
            .is_finite());
        assert!(loss_and_grad(&[900.0, -900.0], &LossTarget::Categorical(1))
            .0
            .is_finite());
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[3.0, -1.0, 0.5, 1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = Adam::new(2, 0.01);
        let mut p = vec![1.0, 1.0];
        adam.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.99).abs() < 1e-8);
        assert!((p[1] - 1.01).abs() < 1e-8);
    }
}
