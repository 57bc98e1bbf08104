//! Dataset artifact: JSON Lines, one header record followed by one record per sample.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, WindowSample, FEATURE_NAMES, NUM_FEATURES, WINDOW};

pub const ARTIFACT_FORMAT: &str = "hrseq-dataset";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    window: usize,
    features: Vec<String>,
    samples: usize,
}

pub fn write_artifact(path: &Path, samples: &[WindowSample]) -> Result<(), IngestError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_artifact_to(&mut w, samples)?;
    w.flush()?;
    Ok(())
}

pub fn write_artifact_to<W: Write>(mut w: W, samples: &[WindowSample]) -> Result<(), IngestError> {
    let header = Header {
        format: ARTIFACT_FORMAT.to_string(),
        version: ARTIFACT_VERSION,
        window: WINDOW,
        features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        samples: samples.len(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_artifact(path: &Path) -> Result<Vec<WindowSample>, IngestError> {
    read_artifact_from(std::fs::File::open(path)?)
}

pub fn read_artifact_from<R: Read>(source: R) -> Result<Vec<WindowSample>, IngestError> {
    let mut lines = BufReader::new(source).lines();
    let first = lines
        .next()
        .ok_or_else(|| IngestError::Artifact("empty file".into()))??;
    let header: Header = serde_json::from_str(&first)?;
    if header.format != ARTIFACT_FORMAT {
        return Err(IngestError::Artifact(format!("unknown format {:?}", header.format)));
    }
    if header.version != ARTIFACT_VERSION {
        return Err(IngestError::Artifact(format!(
            "version {} not supported (expected {ARTIFACT_VERSION})",
            header.version
        )));
    }
    if header.window != WINDOW || header.features.len() != NUM_FEATURES {
        return Err(IngestError::Artifact("window or feature layout mismatch".into()));
    }
    let mut out = Vec::with_capacity(header.samples);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    if out.len() != header.samples {
        return Err(IngestError::Artifact(format!(
            "header announces {} samples, found {}",
            header.samples,
            out.len()
        )));
    }
    Ok(out)
}
