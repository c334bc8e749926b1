//! Dataset and annotated-cloud text formats.
//!
//! Dataset file: one JSON header line, then one record per line
//!
//! ```text
//! label_kind trav_value qx qy qz p1x p1y p1z ... pkx pky pkz
//! ```
//!
//! where `label_kind` is `positive`, `unlabeled` or `negative` and
//! `trav_value` is `-` when absent.
//!
//! Annotated cloud: `x y z class_name` per line; `#` starts a comment.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{LabelKind, TraversalSample, ValueMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub k: usize,
    pub value_mode: ValueMode,
    /// Min-max range the traversability values were normalized with.
    pub normalization: (f64, f64),
    /// Provenance seeds by name (world, split, unlabeled draw, ...).
    pub seeds: BTreeMap<String, u64>,
}

pub fn write_dataset(
    header: &DatasetHeader,
    samples: &[TraversalSample],
    out: &mut impl Write,
) -> Result<()> {
    let json = serde_json::to_string(header).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    writeln!(out, "{json}")?;
    for s in samples {
        if s.patch.len() != header.k {
            return Err(Error::ShapeMismatch(format!(
                "sample patch has {} points, header says k={}",
                s.patch.len(),
                header.k
            )));
        }
        write!(out, "{}", s.label.token())?;
        match s.trav_value {
            Some(v) => write!(out, " {v:e}")?,
            None => write!(out, " -")?,
        }
        write!(out, " {:e} {:e} {:e}", s.query[0], s.query[1], s.query[2])?;
        for p in &s.patch {
            write!(out, " {:e} {:e} {:e}", p[0], p[1], p[2])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_dataset(r: &mut impl BufRead) -> Result<(DatasetHeader, Vec<TraversalSample>)> {
    const W: &str = "dataset file";
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::parse(W, 1, "empty file"))??;
    let header: DatasetHeader =
        serde_json::from_str(&first).map_err(|e| Error::parse(W, 1, format!("bad header: {e}")))?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let label = it
            .next()
            .and_then(LabelKind::from_token)
            .ok_or_else(|| Error::parse(W, lineno, "bad label kind"))?;
        let tv = it
            .next()
            .ok_or_else(|| Error::parse(W, lineno, "missing trav_value"))?;
        let trav_value = if tv == "-" {
            None
        } else {
            Some(
                tv.parse::<f64>()
                    .map_err(|_| Error::parse(W, lineno, format!("bad trav_value `{tv}`")))?,
            )
        };
        let nums: Vec<f64> = it
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(W, lineno, format!("bad number `{s}`")))
            })
            .collect::<Result<_>>()?;
        if nums.len() != 3 + 3 * header.k {
            return Err(Error::parse(
                W,
                lineno,
                format!("expected {} coordinates", 3 + 3 * header.k),
            ));
        }
        let patch = nums[3..]
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        samples.push(TraversalSample {
            query: [nums[0], nums[1], nums[2]],
            patch,
            label,
            trav_value,
        });
    }
    Ok((header, samples))
}

pub fn read_semantic_cloud(r: &mut impl BufRead) -> Result<Vec<([f64; 3], String)>> {
    const W: &str = "semantic cloud";
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::parse(W, i + 1, "expected `x y z class_name`"));
        }
        let mut p = [0.0; 3];
        for a in 0..3 {
            p[a] = f[a]
                .parse()
                .map_err(|_| Error::parse(W, i + 1, format!("bad number `{}`", f[a])))?;
        }
        out.push((p, f[3].to_string()));
    }
    Ok(out)
}
