use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Mdp;

const FORMAT: &str = "hostile-mdp/mdp-dump";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} is not a valid MDP dump: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    mdp: M,
}

/// Writes `mdp` as a single JSON document.
pub fn save_dump(mdp: &Mdp, path: &Path) -> Result<(), DumpError> {
    let doc = Envelope { format: FORMAT.to_string(), version: VERSION, mdp };
    let text = serde_json::to_string(&doc).expect("MDP serialization cannot fail");
    std::fs::write(path, text).map_err(|source| DumpError::Io { path: path.to_path_buf(), source })
}

pub fn load_dump(path: &Path) -> Result<Mdp, DumpError> {
    let text = std::fs::read_to_string(path).map_err(|source| DumpError::Io { path: path.to_path_buf(), source })?;
    let format_err = |message: String| DumpError::Format { path: path.to_path_buf(), message };
    let doc: Envelope<Mdp> = serde_json::from_str(&text).map_err(|e| format_err(e.to_string()))?;
    if doc.format != FORMAT || doc.version != VERSION {
        return Err(format_err(format!("unsupported format {} version {}", doc.format, doc.version)));
    }
    doc.mdp.check_structure().map_err(format_err)?;
    Ok(doc.mdp)
}
