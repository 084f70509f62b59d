use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use dthazard::kernel::{Curve, HazardCurve};
use dthazard::Sample;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Provenance written at the top of every output.
#[derive(Debug, Clone)]
pub struct Meta {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
}

impl Meta {
    pub fn new(command: &'static str, seed: Option<u64>, config: impl Serialize) -> Self {
        Self { command, seed, config: serde_json::to_value(config).expect("config serializes") }
    }

    fn comment_lines(&self) -> String {
        let mut out = format!("# dthazard {}\n# command: {}\n", env!("CARGO_PKG_VERSION"), self.command);
        if let Some(seed) = self.seed {
            out.push_str(&format!("# seed: {seed}\n"));
        }
        out.push_str(&format!("# config: {}\n", self.config));
        out
    }

    fn as_json(&self) -> Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
        })
    }
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => File::create(p)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|source| CliError::Output { path: p.to_path_buf(), source }),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|source| CliError::Output { path: "<stdout>".into(), source })
        }
    }
}

/// CSV body with the metadata header.
pub fn csv_text(meta: &Meta, header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = meta.comment_lines();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn curve_csv(meta: &Meta, grid: &[f64], values: &[f64], bands: Option<&dthazard::kernel::Bands>) -> String {
    match bands {
        Some(b) => csv_text(
            meta,
            "x,value,lo,hi",
            (0..grid.len()).map(|i| format!("{},{},{},{}", grid[i], values[i], b.lower[i], b.upper[i])),
        ),
        None => csv_text(meta, "x,value", grid.iter().zip(values).map(|(x, v)| format!("{x},{v}"))),
    }
}

pub fn hazard_csv(meta: &Meta, c: &HazardCurve) -> String {
    curve_csv(meta, &c.grid, &c.values, c.bands.as_ref())
}

pub fn plain_curve_csv(meta: &Meta, c: &Curve) -> String {
    curve_csv(meta, &c.grid, &c.values, c.bands.as_ref())
}

pub fn sample_csv(meta: &Meta, sample: &Sample) -> String {
    csv_text(meta, "u,x,v", sample.observations().iter().map(|o| format!("{},{},{}", o.u, o.x, o.v)))
}

/// Pretty JSON with a `meta` object followed by the result fields.
pub fn json_text(meta: &Meta, result: impl Serialize) -> String {
    let body = json!({ "meta": meta.as_json(), "result": result });
    let mut s = serde_json::to_string_pretty(&body).expect("summary serializes");
    s.push('\n');
    s
}

/// Where the JSON summary goes: explicit path, `<output>.json`, or stderr.
pub fn write_summary(explicit: Option<&Path>, output: Option<&Path>, text: &str) -> Result<(), CliError> {
    let path: Option<PathBuf> = explicit.map(Path::to_path_buf).or_else(|| output.map(|o| o.with_extension("json")));
    match path {
        Some(p) => write_text(Some(&p), text),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}
