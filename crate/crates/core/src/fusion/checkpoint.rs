//! Versioned JSON checkpoints: model config plus every tensor with its shape.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::FusionModel;
use super::params::{Param, ParamSet};
use crate::error::{Error, Result};

pub const FORMAT: &str = "coherent-fusion-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointRecord {
    format: String,
    version: u32,
    config: ModelConfig,
    /// Free-form run description written by callers (e.g. the training config).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
    tensors: Vec<TensorRecord>,
}

pub fn save<W: Write>(model: &FusionModel, writer: W) -> Result<()> {
    save_with_provenance(model, None, writer)
}

pub fn save_with_provenance<W: Write>(
    model: &FusionModel,
    provenance: Option<&serde_json::Value>,
    mut writer: W,
) -> Result<()> {
    let record = CheckpointRecord {
        format: FORMAT.to_string(),
        version: VERSION,
        config: model.config.clone(),
        provenance: provenance.cloned(),
        tensors: model
            .params
            .params
            .iter()
            .map(|p| TensorRecord {
                name: p.name.clone(),
                shape: [p.value.nrows(), p.value.ncols()],
                data: p.value.iter().copied().collect(),
            })
            .collect(),
    };
    serde_json::to_writer(&mut writer, &record)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn load<R: Read>(reader: R) -> Result<FusionModel> {
    Ok(load_with_provenance(reader)?.0)
}

pub fn load_with_provenance<R: Read>(reader: R) -> Result<(FusionModel, Option<serde_json::Value>)> {
    let record: CheckpointRecord = serde_json::from_reader(reader)?;
    if record.format != FORMAT || record.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint {} v{}",
            record.format, record.version
        )));
    }
    let mut params = ParamSet::default();
    for t in record.tensors {
        let value = Array2::from_shape_vec((t.shape[0], t.shape[1]), t.data)
            .map_err(|e| Error::Checkpoint(format!("tensor {}: {e}", t.name)))?;
        params.params.push(Param { name: t.name, value });
    }
    Ok((FusionModel::from_params(record.config, params)?, record.provenance))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let model = FusionModel::new(ModelConfig::toy(8, 2, 1)).unwrap();
        let mut buf = Vec::new();
        save(&model, &mut buf).unwrap();
        let back = load(buf.as_slice()).unwrap();
        assert_eq!(back.params, model.params);
        assert_eq!(back.config, model.config);
        let mut again = Vec::new();
        save(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let model = FusionModel::new(ModelConfig::toy(8, 2, 1)).unwrap();
        let mut buf = Vec::new();
        save(&model, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("\"d_model\":8", "\"d_model\":16", 1);
        let err = load(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("does not match") || err.contains("implies"), "{err}");
    }
}
