//! Error logs are JSON lines: one header object naming the generator and the
//! plan, then one [`ErrorLog`] per image in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inject::{CorruptionPlan, ErrorLog, GENERATOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorLogHeader {
    pub generator: String,
    pub plan: CorruptionPlan,
    pub images: usize,
    pub corrupted: usize,
}

impl ErrorLogHeader {
    pub fn new(plan: CorruptionPlan, logs: &[ErrorLog]) -> Self {
        Self {
            generator: GENERATOR.to_string(),
            plan,
            images: logs.len(),
            corrupted: logs.iter().filter(|l| l.is_error()).count(),
        }
    }
}

pub fn write_error_log(path: &Path, header: &ErrorLogHeader, logs: &[ErrorLog]) -> Result<()> {
    super::write_atomic(path, |w| {
        serde_json::to_writer(&mut *w, header)?;
        w.write_all(b"\n")?;
        for log in logs {
            serde_json::to_writer(&mut *w, log)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Reads a log; the header line is optional.
pub fn read_error_log(path: &Path) -> Result<(Option<ErrorLogHeader>, Vec<ErrorLog>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut logs = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |e: serde_json::Error| Error::Format(format!("{}:{}: {e}", path.display(), n + 1));
        if logs.is_empty() && header.is_none() && line.contains("\"generator\"") {
            header = Some(serde_json::from_str(line).map_err(bad)?);
        } else {
            logs.push(serde_json::from_str(line).map_err(bad)?);
        }
    }
    Ok((header, logs))
}
