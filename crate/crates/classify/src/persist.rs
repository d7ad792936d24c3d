//! Versioned JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use gazelens_core::fsutil::write_atomic;

use crate::train::TrainedModel;
use crate::ClassifyError;

pub const MODEL_FORMAT: &str = "gazelens-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

pub fn model_to_json(model: &TrainedModel) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    serde_json::to_string(&file).expect("model serialises")
}

pub fn model_from_json(json: &str) -> Result<TrainedModel, ClassifyError> {
    let file: ModelFile = serde_json::from_str(json)?;
    if file.format != MODEL_FORMAT {
        return Err(ClassifyError::Format(format!(
            "unexpected format tag {:?}",
            file.format
        )));
    }
    if file.version != MODEL_VERSION {
        return Err(ClassifyError::Format(format!(
            "unsupported version {} (expected {MODEL_VERSION})",
            file.version
        )));
    }
    if file.model.params.len() != file.model.network.n_params {
        return Err(ClassifyError::Format(format!(
            "{} weights stored for a network of {}",
            file.model.params.len(),
            file.model.network.n_params
        )));
    }
    Ok(file.model)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ClassifyError> {
    write_atomic(path, model_to_json(model).as_bytes()).map_err(|source| ClassifyError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ClassifyError> {
    let text = std::fs::read_to_string(path).map_err(|source| ClassifyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_json(&text)
}
