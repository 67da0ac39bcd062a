//! Plain-text metrics log: one `key=value` record per line, absent values as `-`.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use gst_core::train::MetricsRecord;

use crate::error::{Error, Result};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

pub fn metrics_line(r: &MetricsRecord) -> String {
    format!(
        "phase={} epoch={} step={} es={:.6} ps={:.6} is={:.6} total={:.6} success_rate={} val_error={} lr={:e}",
        r.phase,
        r.epoch,
        r.step,
        r.es,
        r.ps,
        r.is,
        r.total,
        opt(r.success_rate),
        opt(r.val_error),
        r.lr
    )
}

/// Appending writer; each record is flushed as soon as it arrives.
pub struct MetricsLog {
    path: PathBuf,
    file: File,
}

impl MetricsLog {
    pub fn append(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        Ok(MetricsLog { path: path.to_owned(), file })
    }

    pub fn write(&mut self, r: &MetricsRecord) -> Result<()> {
        writeln!(self.file, "{}", metrics_line(r)).map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let r = MetricsRecord {
            phase: "sl".into(),
            epoch: 2,
            step: 30,
            es: 1.0,
            ps: 0.5,
            is: -0.25,
            total: 0.975,
            success_rate: None,
            val_error: Some(0.125),
            lr: 0.003,
        };
        assert_eq!(
            metrics_line(&r),
            "phase=sl epoch=2 step=30 es=1.000000 ps=0.500000 is=-0.250000 total=0.975000 success_rate=- val_error=0.125000 lr=3e-3"
        );
    }
}
