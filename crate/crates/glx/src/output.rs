//! CSV and JSON writers. Every file starts with the config hash and the name
//! of the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Formats a float with the shortest round-trip representation.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, hash: &str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutputDir { root: root.to_path_buf(), hash: hash.to_string(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn header(&self) -> String {
        format!("# config_hash: {}\n# manifest: {MANIFEST_FILE}\n", self.hash)
    }

    pub fn write_csv<S: AsRef<str>>(&mut self, name: &str, columns: &[&str], rows: &[Vec<S>]) -> Result<()> {
        let mut buf = self.header().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(columns)?;
            for r in rows {
                if r.len() != columns.len() {
                    bail!("{name}: row has {} fields, header has {}", r.len(), columns.len());
                }
                w.write_record(r.iter().map(|s| s.as_ref()))?;
            }
            w.flush()?;
        }
        self.write_bytes(name, &buf)
    }

    /// Long-format plot data `(x, y, series)`.
    pub fn write_plot(&mut self, name: &str, points: &[(f64, f64, String)]) -> Result<()> {
        let rows: Vec<Vec<String>> = points.iter().map(|(x, y, s)| vec![num(*x), num(*y), s.clone()]).collect();
        self.write_csv(name, &["x", "y", "series"], &rows)
    }

    /// Pretty JSON with a top-level `config_hash` key.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let v = with_hash(serde_json::to_value(value)?, &self.hash);
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn with_hash(v: Value, hash: &str) -> Value {
    let mut m = BTreeMap::new();
    m.insert("config_hash".to_string(), Value::String(hash.to_string()));
    match v {
        Value::Object(o) => {
            for (k, x) in o {
                m.insert(k, x);
            }
        }
        other => {
            m.insert("data".to_string(), other);
        }
    }
    Value::Object(m.into_iter().collect())
}

/// The `# config_hash:` line of a CSV written by [`OutputDir`].
pub fn read_csv_hash(path: &Path) -> Result<String> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    for line in BufReader::new(f).lines() {
        let line = line?;
        if let Some(h) = line.strip_prefix("# config_hash: ") {
            return Ok(h.trim().to_string());
        }
        if !line.starts_with('#') {
            break;
        }
    }
    bail!("{} has no config_hash line", path.display())
}

#[derive(Debug, thiserror::Error)]
#[error("config hash mismatch: {first} has {a}, {second} has {b}")]
pub struct HashMismatch {
    pub first: String,
    pub second: String,
    pub a: String,
    pub b: String,
}

/// Concatenates the data rows of CSVs with identical headers and config
/// hashes; files from different configs are refused.
pub fn merge_csv(inputs: &[PathBuf], output: &Path) -> Result<usize> {
    if inputs.is_empty() {
        bail!("nothing to merge");
    }
    let hash = read_csv_hash(&inputs[0])?;
    for p in &inputs[1..] {
        let h = read_csv_hash(p)?;
        if h != hash {
            return Err(HashMismatch {
                first: inputs[0].display().to_string(),
                second: p.display().to_string(),
                a: hash,
                b: h,
            }
            .into());
        }
    }
    let mut header: Option<csv::StringRecord> = None;
    let mut buf = format!("# config_hash: {hash}\n# merged_from: {}\n", inputs.len()).into_bytes();
    let mut rows = 0;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for p in inputs {
            let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(p)?;
            let h = r.headers()?.clone();
            match &header {
                None => {
                    w.write_record(&h)?;
                    header = Some(h);
                }
                Some(first) if *first != h => bail!("{} has a different header", p.display()),
                Some(_) => {}
            }
            for rec in r.records() {
                w.write_record(&rec?)?;
                rows += 1;
            }
        }
        w.flush()?;
    }
    let mut f = fs::File::create(output).with_context(|| format!("creating {}", output.display()))?;
    f.write_all(&buf)?;
    Ok(rows)
}
