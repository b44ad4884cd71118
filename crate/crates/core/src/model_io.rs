//! Versioned JSON model files: `{"format", "version", "kind", "model"}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cnn::CnnModel;
use crate::error::{Error, Result};
use crate::shallow::ShallowModel;
use crate::system::TrainedSystem;

pub const FORMAT: &str = "slowave-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    System(Box<TrainedSystem>),
    Shallow(ShallowModel),
    Cnn(CnnModel),
}

impl StoredModel {
    pub fn kind(&self) -> &'static str {
        match self {
            StoredModel::System(_) => "system",
            StoredModel::Shallow(_) => "shallow",
            StoredModel::Cnn(_) => "cnn",
        }
    }

    pub fn into_system(self) -> Result<TrainedSystem> {
        match self {
            StoredModel::System(s) => Ok(*s),
            other => Err(Error::ModelInputMismatch { expected: "system model".into(), found: other.kind().into() }),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    kind: String,
    model: Value,
}

pub fn to_json(model: &StoredModel) -> Result<String> {
    let inner = match model {
        StoredModel::System(s) => serde_json::to_value(s)?,
        StoredModel::Shallow(m) => serde_json::to_value(m)?,
        StoredModel::Cnn(m) => serde_json::to_value(m)?,
    };
    let env = Envelope { format: FORMAT.into(), version: VERSION, kind: model.kind().into(), model: inner };
    Ok(serde_json::to_string(&env)?)
}

pub fn from_json(text: &str) -> Result<StoredModel> {
    let env: Envelope = serde_json::from_str(text)?;
    if env.format != FORMAT || env.version != VERSION {
        return Err(Error::ModelInputMismatch {
            expected: format!("{FORMAT} v{VERSION}"),
            found: format!("{} v{}", env.format, env.version),
        });
    }
    Ok(match env.kind.as_str() {
        "system" => StoredModel::System(Box::new(serde_json::from_value(env.model)?)),
        "shallow" => StoredModel::Shallow(serde_json::from_value(env.model)?),
        "cnn" => StoredModel::Cnn(serde_json::from_value(env.model)?),
        other => return Err(Error::invalid(format!("unknown model kind {other:?}"))),
    })
}

pub fn save(path: impl AsRef<Path>, model: &StoredModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<StoredModel> {
    let path = path.as_ref();
    from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
