//! Delimited-text table files and their JSON manifests.
//!
//! Header: `record_id,f_0,..,f_{D-1},gender,ethnicity,los_class,dx_0,..,dx_11,proc_0,..,proc_11`.
//! Gender is `F`/`M`, ethnicity `H`/`N`. Features are written in Rust's
//! shortest round-trip decimal form, so reading a written file reproduces
//! every bit.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{Ethnicity, FeatureTable, Gender, PhenotypeBits, Provenance, Record, PHENOTYPES};
use crate::error::{Error, Result};

const TRAILING_FIXED: [&str; 3] = ["gender", "ethnicity", "los_class"];

fn expected_header(dim: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(dim + 4 + 2 * PHENOTYPES);
    h.push("record_id".to_string());
    h.extend((0..dim).map(|i| format!("f_{i}")));
    h.extend(TRAILING_FIXED.iter().map(|s| s.to_string()));
    h.extend((0..PHENOTYPES).map(|i| format!("dx_{i}")));
    h.extend((0..PHENOTYPES).map(|i| format!("proc_{i}")));
    h
}

pub fn write_table(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut w = csv::Writer::from_writer(file);
    w.write_record(expected_header(table.dim()))?;
    let mut row: Vec<String> = Vec::new();
    for r in table.records() {
        row.clear();
        row.push(r.record_id.clone());
        row.extend(r.features.iter().map(|v| format!("{v:?}")));
        row.push(
            match r.gender {
                Gender::Female => "F",
                Gender::Male => "M",
            }
            .into(),
        );
        row.push(
            match r.ethnicity {
                Ethnicity::Hispanic => "H",
                Ethnicity::NonHispanic => "N",
            }
            .into(),
        );
        row.push(r.los_class.to_string());
        row.extend(r.dx_phenotypes.iter().map(|b| b.to_string()));
        row.extend(r.proc_phenotypes.iter().map(|b| b.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(File::open(path)?));
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let fixed = 4 + 2 * PHENOTYPES;
    if header.len() < fixed {
        return Err(Error::Parse {
            row: 0,
            column: "header".into(),
            message: format!("expected at least {fixed} columns, found {}", header.len()),
        });
    }
    let dim = header.len() - fixed;
    let expected = expected_header(dim);
    if let Some((got, want)) = header.iter().zip(&expected).find(|(g, w)| g != w) {
        return Err(Error::Parse {
            row: 0,
            column: got.clone(),
            message: format!("header column should be `{want}`"),
        });
    }

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::DimensionMismatch {
                expected: header.len(),
                found: rec.len(),
            });
        }
        let cell_err = |col: usize, message: String| Error::Parse {
            row,
            column: header[col].clone(),
            message,
        };
        let mut features = Vec::with_capacity(dim);
        for c in 1..=dim {
            let v: f64 = rec[c]
                .trim()
                .parse()
                .map_err(|_| cell_err(c, format!("`{}` is not a number", &rec[c])))?;
            features.push(v);
        }
        let g = dim + 1;
        let gender = match rec[g].trim() {
            "F" => Gender::Female,
            "M" => Gender::Male,
            other => return Err(cell_err(g, format!("`{other}` is not F or M"))),
        };
        let ethnicity = match rec[g + 1].trim() {
            "H" => Ethnicity::Hispanic,
            "N" => Ethnicity::NonHispanic,
            other => return Err(cell_err(g + 1, format!("`{other}` is not H or N"))),
        };
        let los: i64 = rec[g + 2]
            .trim()
            .parse()
            .map_err(|_| cell_err(g + 2, format!("`{}` is not an integer", &rec[g + 2])))?;
        if !(1..=5).contains(&los) {
            return Err(Error::InvalidClass(los));
        }
        let bits = |start: usize| -> Result<PhenotypeBits> {
            let mut out = [0u8; PHENOTYPES];
            for (k, b) in out.iter_mut().enumerate() {
                let c = start + k;
                *b = match rec[c].trim() {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(cell_err(c, format!("`{other}` is not 0 or 1"))),
                };
            }
            Ok(out)
        };
        records.push(Record {
            record_id: rec[0].to_string(),
            features,
            gender,
            ethnicity,
            los_class: los as u8,
            dx_phenotypes: bits(g + 3)?,
            proc_phenotypes: bits(g + 3 + PHENOTYPES)?,
        });
    }
    FeatureTable::new(
        records,
        Provenance::File {
            path: path.display().to_string(),
        },
    )
}

/// Writes one embedding row per id under the header `record_id,h_0,..,h_{K-1}`.
pub fn write_embeddings(
    ids: &[&str],
    embeddings: ArrayView2<f64>,
    path: impl AsRef<Path>,
) -> Result<()> {
    if ids.len() != embeddings.nrows() {
        return Err(Error::DimensionMismatch {
            expected: embeddings.nrows(),
            found: ids.len(),
        });
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["record_id".to_string()];
    header.extend((0..embeddings.ncols()).map(|i| format!("h_{i}")));
    w.write_record(&header)?;
    for (id, row) in ids.iter().zip(embeddings.rows()) {
        let mut rec = vec![id.to_string()];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an embedding file and orders its rows like `table`'s records.
pub fn load_embeddings_for(table: &FeatureTable, path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let width = reader.headers()?.len().saturating_sub(1);
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != width + 1 {
            return Err(Error::DimensionMismatch {
                expected: width + 1,
                found: rec.len(),
            });
        }
        let values = (1..=width)
            .map(|c| {
                rec[c].trim().parse::<f64>().map_err(|_| Error::Parse {
                    row: i + 1,
                    column: format!("h_{}", c - 1),
                    message: format!("`{}` is not a number", &rec[c]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if rows.insert(rec[0].to_string(), values).is_some() {
            return Err(Error::DuplicateRecordId(rec[0].to_string()));
        }
    }
    let mut out = Array2::zeros((table.len(), width));
    for (i, r) in table.records().iter().enumerate() {
        let row = rows.get(&r.record_id).ok_or_else(|| {
            Error::InvalidConfig(format!("no embedding for record `{}`", r.record_id))
        })?;
        out.row_mut(i).assign(&ArrayView1::from(row));
    }
    Ok(out)
}

/// Companion description of a table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableManifest {
    pub dim: usize,
    pub rows: usize,
    pub provenance: Provenance,
}

impl TableManifest {
    pub fn for_table(table: &FeatureTable) -> Self {
        Self {
            dim: table.dim(),
            rows: table.len(),
            provenance: table.provenance().clone(),
        }
    }
}

pub fn write_manifest(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &TableManifest::for_table(table))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<TableManifest> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
