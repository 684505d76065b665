//! Byte-stable report emission. Floating values are printed with six
//! significant digits; every file starts with (or embeds) the config digest
//! and the master seed; table rows arrive pre-sorted by their documented
//! keys so identical runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

/// Run provenance embedded in every output file.
#[derive(Debug, Clone)]
pub struct Meta {
    pub config_digest: String,
    pub seed: u64,
}

impl Meta {
    fn comment_line(&self) -> String {
        format!("# config_digest={} seed={}\n", self.config_digest, self.seed)
    }

    pub fn json(&self) -> Value {
        json!({
            "config_digest": self.config_digest,
            "seed": self.seed,
        })
    }
}

/// Format with six significant digits, trimming trailing zeros; scientific
/// notation outside [1e-4, 1e6). Empty-ish values print as "NA".
pub fn fmt6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        let s = format!("{x:.5e}");
        // Trim trailing zeros in the mantissa: "1.20000e8" -> "1.2e8".
        let (mantissa, e) = s.split_once('e').unwrap();
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{e}")
    } else {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt6)
}

/// A float rounded to six significant digits as a JSON value; non-finite
/// values become strings since JSON has no representation for them.
pub fn json_num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::String(fmt6(x));
    }
    if x == 0.0 {
        return json!(0.0);
    }
    let exp = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(5 - exp);
    json!((x * factor).round() / factor)
}

pub fn json_opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, json_num)
}

fn csv_field(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writer that collects the files one subcommand produces.
pub struct Emitter {
    out_dir: PathBuf,
    meta: Meta,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(out_dir: &Path, meta: Meta) -> Result<Emitter> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(Emitter {
            out_dir: out_dir.to_path_buf(),
            meta,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// CSV (also used for plot data): digest comment, header, rows.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut text = self.meta.comment_line();
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
            text.push_str(&fields.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    /// JSON report with the meta block attached.
    pub fn json(&mut self, name: &str, report: Value) -> Result<PathBuf> {
        let mut root = Map::new();
        root.insert("meta".into(), self.meta.json());
        root.insert("report".into(), report);
        let mut text = serde_json::to_string_pretty(&Value::Object(root))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }
}
