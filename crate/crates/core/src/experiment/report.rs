use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pipeline::{fraction_tag, write_atomic, write_json, RunResults};
use crate::dataset::SensitiveAttribute;
use crate::downstream::{ClassifierKind, EvalCell, FeatureView, Task};
use crate::error::Result;
use crate::fairness::TargetBlock;
use crate::trainer::EmbeddingVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Structured,
}

/// Decimal places in text tables.
pub const TEXT_DECIMALS: usize = 3;

fn number(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.TEXT_DECIMALS$}"))
}

/// Aligned plain-text table: first column left-aligned, the rest right-aligned.
pub fn render_table(title: &str, header: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = format!("{title}\n{}\n", line(header));
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * width.len().saturating_sub(1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

fn trained(variants: &[EmbeddingVariant]) -> Vec<EmbeddingVariant> {
    variants
        .iter()
        .copied()
        .filter(|v| v.uses_cutout().is_some())
        .collect()
}

fn accuracy_of(cell: Option<&EvalCell>) -> String {
    match cell {
        Some(c) if c.error.is_some() => "err".to_string(),
        Some(c) => number(c.accuracy),
        None => "-".to_string(),
    }
}

/// Sensitive-attribute probe accuracy: raw features (all and sensitive-only)
/// and each debiased embedding, one table per training fraction.
pub fn render_probe_table(r: &RunResults) -> String {
    let debiased = trained(&r.variants);
    let has_raw = r.variants.contains(&EmbeddingVariant::Raw);
    let mut header = vec!["Classifier".to_string()];
    for a in &r.attributes {
        if has_raw {
            header.push(format!("{a} all"));
            header.push(format!("{a} sensitive"));
        }
        for v in &debiased {
            header.push(format!("{a} {}", v.label()));
        }
    }
    let mut out = String::new();
    for &f in &r.fractions {
        let classifiers = if r.variants.is_empty() {
            &[][..]
        } else {
            &r.classifiers[..]
        };
        let rows: Vec<Vec<String>> = classifiers
            .iter()
            .map(|&k| {
                let mut row = vec![k.label().to_string()];
                for &a in &r.attributes {
                    let task = Task::SensitiveProbe(a);
                    let find = |v, view| accuracy_of(r.evaluation.find(a, f, task, v, view, k));
                    if has_raw {
                        row.push(find(EmbeddingVariant::Raw, FeatureView::All));
                        row.push(find(EmbeddingVariant::Raw, FeatureView::Sensitive));
                    }
                    for &v in &debiased {
                        row.push(find(v, FeatureView::All));
                    }
                }
                row
            })
            .collect();
        let title = format!(
            "Sensitive-attribute probe accuracy, training fraction {}%",
            fraction_tag(f)
        );
        out.push_str(&render_table(&title, &header, &rows));
        out.push('\n');
    }
    out
}

/// SC-WEAT effect sizes, one row per (attribute, fraction, target block).
pub fn render_effect_table(r: &RunResults) -> String {
    let mut header: Vec<String> = ["Attribute", "Fraction", "Targets"]
        .map(String::from)
        .to_vec();
    header.extend(r.variants.iter().map(|v| v.label().to_string()));
    let mut rows = Vec::new();
    let attributes = if r.variants.is_empty() {
        &[][..]
    } else {
        &r.attributes[..]
    };
    for &a in attributes {
        for &f in &r.fractions {
            for block in TargetBlock::ALL {
                let mut row = vec![
                    a.to_string(),
                    format!("{}%", fraction_tag(f)),
                    block.label().to_string(),
                ];
                for &v in &r.variants {
                    let cell = r.effect_sizes.cells.iter().find(|c| {
                        c.attribute == a && c.fraction == f && c.variant == v && c.block == block
                    });
                    row.push(match cell {
                        Some(c) if c.error.is_some() => "err".to_string(),
                        Some(c) => number(c.effect_size),
                        None => "-".to_string(),
                    });
                }
                rows.push(row);
            }
        }
    }
    render_table("SC-WEAT effect sizes", &header, &rows)
}

/// Binarized length-of-stay performance (A, MCC, K) of one attribute's
/// pipeline, one table per fraction. A trailing `*` marks a negative kappa.
pub fn render_los_table(r: &RunResults, attribute: SensitiveAttribute) -> String {
    let mut header = vec!["Classifier".to_string()];
    for v in &r.variants {
        for m in ["A", "MCC", "K"] {
            header.push(format!("{} {m}", v.label()));
        }
    }
    let mut out = String::new();
    for &f in &r.fractions {
        let classifiers = if r.variants.is_empty() {
            &[][..]
        } else {
            &r.classifiers[..]
        };
        let rows: Vec<Vec<String>> = classifiers
            .iter()
            .map(|&k| {
                let mut row = vec![k.label().to_string()];
                for &v in &r.variants {
                    let cell =
                        r.evaluation
                            .find(attribute, f, Task::LengthOfStay, v, FeatureView::All, k);
                    match cell {
                        Some(c) if c.error.is_some() => {
                            row.extend(["err", "err", "err"].map(String::from))
                        }
                        Some(c) => {
                            let flag = if c.kappa_negative { "*" } else { "" };
                            row.push(number(c.accuracy));
                            row.push(number(c.mcc));
                            row.push(format!("{}{flag}", number(c.kappa)));
                        }
                        None => row.extend(["-", "-", "-"].map(String::from)),
                    }
                }
                row
            })
            .collect();
        let title = format!(
            "Length-of-stay prediction, {attribute} pipeline, training fraction {}%",
            fraction_tag(f)
        );
        out.push_str(&render_table(&title, &header, &rows));
        out.push('\n');
    }
    out
}

/// `|d|` at the smallest versus the largest fraction.
pub fn render_trend(r: &RunResults) -> String {
    if r.fractions.len() < 2 {
        return "Trend summary needs at least two training fractions.\n".to_string();
    }
    let header: Vec<String> = [
        "Attribute",
        "Targets",
        "Variant",
        "|d| smallest",
        "|d| largest",
        "Decreased",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = r
        .trend
        .iter()
        .map(|t| {
            vec![
                t.attribute.to_string(),
                t.block.label().to_string(),
                t.variant.label().to_string(),
                number(t.abs_d_smallest),
                number(t.abs_d_largest),
                t.decreased
                    .map_or("-", |d| if d { "yes" } else { "no" })
                    .to_string(),
            ]
        })
        .collect();
    let lo = r.fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r
        .fractions
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let title = format!(
        "SC-WEAT trend, training fraction {}% vs {}%",
        fraction_tag(lo),
        fraction_tag(hi)
    );
    render_table(&title, &header, &rows)
}

/// Every text report as `(file name, contents)`, in a fixed order.
pub fn text_reports(r: &RunResults) -> Vec<(String, String)> {
    let seed = r.seed;
    let mut out = vec![
        (
            format!("table1_probe_seed{seed}.txt"),
            render_probe_table(r),
        ),
        (
            format!("table2_sc_weat_seed{seed}.txt"),
            render_effect_table(r),
        ),
    ];
    for &a in &r.attributes {
        let n = match a {
            SensitiveAttribute::Gender => 3,
            SensitiveAttribute::Ethnicity => 4,
        };
        out.push((
            format!("table{n}_los_{a}_seed{seed}.txt"),
            render_los_table(r, a),
        ));
    }
    out.push((format!("trend_seed{seed}.txt"), render_trend(r)));
    out
}

pub fn structured_name(seed: u64) -> String {
    format!("results_seed{seed}.json")
}

pub fn failures_name(seed: u64) -> String {
    format!("failures_seed{seed}.json")
}

/// Writes the requested report files into `dir`, each via atomic rename.
/// Returns the paths written, in order.
pub fn emit_reports(r: &RunResults, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Text => {
                for (name, text) in text_reports(r) {
                    let path = dir.join(name);
                    write_atomic(&path, text.as_bytes())?;
                    written.push(path);
                }
            }
            ReportFormat::Structured => {
                let path = dir.join(structured_name(r.seed));
                write_json(&path, r)?;
                written.push(path);
                let path = dir.join(failures_name(r.seed));
                write_json(&path, &r.failures)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<RunResults> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Classifier label used in text tables, for parsing them back.
pub fn classifier_from_label(label: &str) -> Option<ClassifierKind> {
    ClassifierKind::ALL.into_iter().find(|k| k.label() == label)
}
