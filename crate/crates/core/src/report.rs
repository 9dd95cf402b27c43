//! Output files: CSV with a `#`-prefixed metadata header, or JSON with the
//! same metadata next to the rows.

use std::io::Write;

use serde::Serialize;

use crate::config::Config;
use crate::error::Result;

pub const UNITS: &str = "binary (1 KiB = 1024 B, 1 GiB = 2^30 B); times in us, energy in uJ";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub units: String,
}

impl Metadata {
    pub fn new(command: &str, cfg: &Config, seed: u64) -> Self {
        Self {
            tool: "mcflash".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: cfg.hash(),
            seed,
            units: UNITS.into(),
        }
    }

    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("# tool: {} {}", self.tool, self.version),
            format!("# command: {}", self.command),
            format!("# config_hash: {}", self.config_hash),
            format!("# seed: {}", self.seed),
            format!("# units: {}", self.units),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub fn write_csv<W: Write, T: Serialize>(mut out: W, meta: &Metadata, rows: &[T]) -> Result<()> {
    for line in meta.header_lines() {
        writeln!(out, "{line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, meta: &Metadata, rows: &[T]) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        metadata: &'a Metadata,
        rows: &'a [T],
    }
    serde_json::to_writer_pretty(&mut out, &Doc { metadata: meta, rows })?;
    writeln!(out)?;
    Ok(())
}

pub fn write_rows<W: Write, T: Serialize>(out: W, format: Format, meta: &Metadata, rows: &[T]) -> Result<()> {
    match format {
        Format::Csv => write_csv(out, meta, rows),
        Format::Json => write_json(out, meta, rows),
    }
}
