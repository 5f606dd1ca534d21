//! Result files: CSV tables plus a JSON-lines manifest.
//!
//! Every manifest line is a JSON object with an `event` key. Only the
//! `start` and `end` events carry a `timestamp`; everything else is a pure
//! function of the configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::CliError;

pub const MANIFEST: &str = "manifest.jsonl";

pub struct Manifest {
    dir: PathBuf,
    file: BufWriter<File>,
}

fn timestamp() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl Manifest {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let file = BufWriter::new(File::create(dir.join(MANIFEST))?);
        Ok(Manifest {
            dir: dir.to_path_buf(),
            file,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends one event and flushes, so partial runs leave a usable file.
    pub fn event(&mut self, event: &str, mut body: Value) -> Result<(), CliError> {
        let obj = body.as_object_mut().expect("manifest events are objects");
        obj.insert("event".into(), json!(event));
        if event == "start" || event == "end" {
            obj.insert("timestamp".into(), json!(timestamp()));
        }
        serde_json::to_writer(&mut self.file, &body).map_err(std::io::Error::from)?;
        self.file.write_all(b"\n")?;
        self.file.flush()?;
        Ok(())
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: Value) -> Result<(), CliError> {
        self.event("check", json!({ "name": name, "passed": passed, "detail": detail }))
    }

    /// Writes `name` in the output directory and records it.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(name)).map_err(weylwalk::Error::from)?;
        w.write_record(header).map_err(weylwalk::Error::from)?;
        for r in rows {
            w.write_record(r).map_err(weylwalk::Error::from)?;
        }
        w.flush()?;
        self.event("artifact", json!({ "file": name, "rows": rows.len() }))
    }
}

/// Shortest round-trip text form of a float.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn coords(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}
