//! One split-normalise-train-evaluate run, and the metrics report.

use std::fmt::Write as _;

use gazelens_core::model::ProfileField;

use crate::nn::{Architecture, Hyperparams};
use crate::tensor::{normalize_channels, participant_split, SessionTensor};
use crate::train::{predict_proba, top_k_accuracy, train_classifier, ClassifierSpec, TrainedModel};
use crate::ClassifyError;

pub const METRICS_HEADER: &str = "run,seed,target,architecture,top1,top2";
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub target: ProfileField,
    pub architecture: Architecture,
    pub hyper: Hyperparams,
    pub train_fraction: f64,
}

impl ExperimentConfig {
    pub fn new(target: ProfileField, architecture: Architecture) -> Self {
        ExperimentConfig {
            target,
            architecture,
            hyper: Hyperparams::default(),
            train_fraction: DEFAULT_TRAIN_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    pub target: ProfileField,
    pub architecture: Architecture,
    pub top1: f64,
    pub top2: f64,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
}

/// Splits by participant with `seed`, normalises on the training side,
/// trains with `seed` and scores the validation side.
pub fn run_experiment(
    tensors: &[SessionTensor],
    config: &ExperimentConfig,
    run: usize,
    seed: u64,
) -> Result<(RunMetrics, TrainedModel), ClassifyError> {
    let split = participant_split(tensors.len(), config.train_fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| tensors[i].clone()).collect::<Vec<_>>();
    let (train, validation, stats) =
        normalize_channels(&pick(&split.train), &pick(&split.validation));
    let spec = ClassifierSpec {
        architecture: config.architecture,
        hyper: config.hyper.clone(),
        seed,
    };
    let mut model = train_classifier(&spec, &train, &validation, config.target)?;
    model.normalisation = Some(stats);

    let preds = validation
        .iter()
        .map(|t| predict_proba(&model, &t.data))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<usize> = validation
        .iter()
        .map(|t| t.profile.class_index(config.target))
        .collect();
    let top1 = top_k_accuracy(&preds, &labels, 1)?;
    let top2 = top_k_accuracy(&preds, &labels, 2)?;
    let metrics = RunMetrics {
        run,
        seed,
        target: config.target,
        architecture: config.architecture,
        top1,
        top2,
        train_ids: train.iter().map(|t| t.participant_id.clone()).collect(),
        validation_ids: validation
            .iter()
            .map(|t| t.participant_id.clone())
            .collect(),
    };
    Ok((metrics, model))
}

pub fn metrics_csv(runs: &[RunMetrics]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.run, r.seed, r.target, r.architecture, r.top1, r.top2
        );
    }
    out
}
