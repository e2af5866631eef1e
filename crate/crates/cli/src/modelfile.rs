//! Versioned, digest-protected model persistence.

use std::path::Path;

use geomgt::spatial::{MafModel, VariogramModel};
use geomgt::transforms::{Method, MgtModel};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// Where a model came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the training table file.
    pub input_digest: String,
    pub seed: u64,
    /// Taken from `SOURCE_DATE_EPOCH` when set, so reruns stay byte-identical.
    pub timestamp: Option<String>,
    pub tool_version: String,
    /// Full configuration echo.
    pub config: String,
}

/// Everything needed to map between data and simulated factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub method: Method,
    /// Original variable names, in column order.
    pub variables: Vec<String>,
    pub mgt: MgtModel<f64>,
    pub maf: Option<MafModel<f64>>,
    pub variograms: Vec<VariogramModel<f64>>,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct FileOut<'a> {
    format_version: u32,
    digest: String,
    payload: &'a RawValue,
}

#[derive(Deserialize)]
struct FileIn<'a> {
    format_version: u32,
    digest: String,
    #[serde(borrow)]
    payload: &'a RawValue,
}

#[derive(Deserialize)]
struct VersionOnly {
    format_version: u32,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Serialized model file text.
pub fn encode_model(bundle: &ModelBundle) -> String {
    let payload = serde_json::to_string(bundle).expect("model serializes");
    let raw = RawValue::from_string(payload).expect("valid JSON");
    let file = FileOut { format_version: FORMAT_VERSION, digest: sha256_hex(raw.get().as_bytes()), payload: &raw };
    let mut text = serde_json::to_string(&file).expect("file serializes");
    text.push('\n');
    text
}

pub fn decode_model(text: &str) -> CliResult<ModelBundle> {
    let file: FileIn = match serde_json::from_str(text) {
        Ok(f) => f,
        Err(e) => {
            // A readable newer version beats a generic parse error.
            if let Ok(v) = serde_json::from_str::<VersionOnly>(text) {
                if v.format_version != FORMAT_VERSION {
                    return Err(CliError::Version { found: v.format_version, supported: FORMAT_VERSION });
                }
            }
            return Err(CliError::Integrity(format!("unreadable model file: {e}")));
        }
    };
    if file.format_version != FORMAT_VERSION {
        return Err(CliError::Version { found: file.format_version, supported: FORMAT_VERSION });
    }
    let actual = sha256_hex(file.payload.get().as_bytes());
    if actual != file.digest {
        return Err(CliError::Integrity(format!("digest mismatch (stored {}, computed {actual})", file.digest)));
    }
    serde_json::from_str(file.payload.get()).map_err(|e| CliError::Integrity(format!("invalid model payload: {e}")))
}

pub fn save_model(bundle: &ModelBundle, path: &Path) -> CliResult<String> {
    let text = encode_model(bundle);
    std::fs::write(path, &text).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(text.as_bytes()))
}

pub fn load_model(path: &Path) -> CliResult<ModelBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    decode_model(&text)
}
