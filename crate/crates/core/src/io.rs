//! Text file formats.
//!
//! * hypergraph: first line `N M`, then one line per hyperedge,
//!   `w(e) v0:q0 v1:q1 ...` (blank lines and `#` comments are skipped);
//! * features: CSV, `N` rows × `d` columns, no header;
//! * labels: CSV `vertex,label` (an optional `vertex,label` header is allowed);
//! * splits: one file per split holding whitespace-separated training vertex
//!   indices; the remaining labeled vertices form the test set.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! written value parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{FeatureMatrix, Hypergraph, Labels, UNLABELED};
use crate::model::{EpochRecord, ShkcModel, Split};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_hypergraph(text: &str, path: &Path) -> Result<Hypergraph> {
    let mut lines = content_lines(text);
    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing `N M` header"))?;
    let mut it = header.split_whitespace();
    let mut next_count = |what: &str| -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::parse(path, ln, format!("missing {what}")))?
            .parse()
            .map_err(|e| Error::parse(path, ln, format!("bad {what}: {e}")))
    };
    let n = next_count("vertex count")?;
    let m = next_count("hyperedge count")?;

    let mut edges = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for (ln, line) in lines {
        let mut tokens = line.split_whitespace();
        let w: f64 = tokens
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::parse(path, ln, format!("bad edge weight: {e}")))?;
        let mut edge = Vec::new();
        for tok in tokens {
            let (v, q) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(path, ln, format!("expected `v:q`, got `{tok}`")))?;
            let v: usize = v
                .parse()
                .map_err(|e| Error::parse(path, ln, format!("bad vertex `{v}`: {e}")))?;
            let q: f64 = q
                .parse()
                .map_err(|e| Error::parse(path, ln, format!("bad weight `{q}`: {e}")))?;
            edge.push((v, q));
        }
        edges.push(edge);
        weights.push(w);
    }
    if edges.len() != m {
        return Err(Error::parse(
            path,
            0,
            format!("header announces {m} hyperedges, found {}", edges.len()),
        ));
    }
    Hypergraph::new(n, edges, weights)
}

pub fn format_hypergraph(h: &Hypergraph) -> String {
    let mut out = format!("{} {}\n", h.num_vertices(), h.num_edges());
    for (edge, w) in h.hyperedges().iter().zip(h.edge_weights()) {
        write!(out, "{w}").unwrap();
        for (v, q) in edge {
            write!(out, " {v}:{q}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_hypergraph(path: impl AsRef<Path>) -> Result<Hypergraph> {
    let path = path.as_ref();
    parse_hypergraph(&read_text(path)?, path)
}

pub fn write_hypergraph(path: impl AsRef<Path>, h: &Hypergraph) -> Result<()> {
    write_text(path.as_ref(), &format_hypergraph(h))
}

fn split_csv(line: &str) -> impl Iterator<Item = &str> {
    line.split(',').map(str::trim)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (ln, line) in content_lines(&text) {
        let row = split_csv(line)
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::parse(path, ln, format!("bad number `{t}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    FeatureMatrix::from_rows(&rows).map_err(|e| Error::parse(path, 0, e.to_string()))
}

/// Labels for `num_vertices` vertices; vertices not listed stay unlabeled.
pub fn read_labels(path: impl AsRef<Path>, num_vertices: usize) -> Result<Labels> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut labels = vec![UNLABELED; num_vertices];
    for (idx, (ln, line)) in content_lines(&text).enumerate() {
        let fields: Vec<&str> = split_csv(line).collect();
        if idx == 0 && fields.first().is_some_and(|f| f.parse::<usize>().is_err()) {
            continue;
        }
        let [v, l] = fields[..] else {
            return Err(Error::parse(path, ln, "expected `vertex,label`"));
        };
        let v: usize = v
            .parse()
            .map_err(|e| Error::parse(path, ln, format!("bad vertex `{v}`: {e}")))?;
        let l: i64 = l
            .parse()
            .map_err(|e| Error::parse(path, ln, format!("bad label `{l}`: {e}")))?;
        if v >= num_vertices {
            return Err(Error::parse(
                path,
                ln,
                format!("vertex {v} out of range for {num_vertices} vertices"),
            ));
        }
        labels[v] = l;
    }
    Labels::new(labels).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn write_labels(path: impl AsRef<Path>, labels: &Labels) -> Result<()> {
    let mut out = String::new();
    for (v, &l) in labels.as_slice().iter().enumerate() {
        if l != UNLABELED {
            writeln!(out, "{v},{l}").unwrap();
        }
    }
    write_text(path.as_ref(), &out)
}

pub fn read_split(path: impl AsRef<Path>, labels: &Labels) -> Result<Split> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut train = Vec::new();
    for (ln, line) in content_lines(&text) {
        for tok in line.split_whitespace() {
            let v: usize = tok
                .parse()
                .map_err(|e| Error::parse(path, ln, format!("bad vertex `{tok}`: {e}")))?;
            if v >= labels.len() || labels.get(v).is_none() {
                return Err(Error::parse(
                    path,
                    ln,
                    format!("training vertex {v} is out of range or unlabeled"),
                ));
            }
            train.push(v);
        }
    }
    Ok(Split::from_train(train, labels))
}

/// All regular files in `dir`, sorted by name, each read as one split.
pub fn read_splits_dir(dir: impl AsRef<Path>, labels: &Labels) -> Result<Vec<(String, Split)>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::parse(dir, 0, "no split files found"));
    }
    files
        .into_iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            read_split(&p, labels).map(|s| (name, s))
        })
        .collect()
}

pub fn write_split(path: impl AsRef<Path>, split: &Split) -> Result<()> {
    let body: Vec<String> = split.train.iter().map(usize::to_string).collect();
    write_text(path.as_ref(), &(body.join(" ") + "\n"))
}

pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                w.write_all(b",").map_err(|e| Error::io(path, e))?;
            }
            write!(w, "{v}").map_err(|e| Error::io(path, e))?;
            first = false;
        }
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_features(path: impl AsRef<Path>, x: &FeatureMatrix) -> Result<()> {
    write_matrix_csv(path, x.matrix())
}

pub fn write_epoch_csv(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let mut out = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy,seconds\n");
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.seconds
        )
        .unwrap();
    }
    write_text(path.as_ref(), &out)
}

/// First line of a checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// A checkpoint is a JSON header line followed by CSV rows: `d` rows of `Θ`,
/// `M` rows of the classifier, and one row with the bias.
pub fn write_checkpoint(
    path: impl AsRef<Path>,
    model: &ShkcModel,
    seed: u64,
    config_hash: &str,
) -> Result<()> {
    let header = CheckpointHeader {
        input_dim: model.input_dim(),
        hidden: model.hidden_dim(),
        classes: model.num_classes(),
        seed,
        config_hash: config_hash.to_string(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    out.push_str(&format_matrix_csv(&model.theta));
    out.push_str(&format_matrix_csv(&model.classifier));
    out.push_str(&format_matrix_csv(&DMatrix::from_row_slice(
        1,
        model.bias.len(),
        model.bias.as_slice(),
    )));
    write_text(path.as_ref(), &out)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(CheckpointHeader, ShkcModel)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, head) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty checkpoint"))?;
    let header: CheckpointHeader = serde_json::from_str(head)
        .map_err(|e| Error::parse(path, 1, format!("bad header: {e}")))?;
    let mut read_block = |rows: usize, cols: usize| -> Result<DMatrix<f64>> {
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, "checkpoint truncated"))?;
            let row = split_csv(line)
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::parse(path, ln, format!("bad number `{t}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != cols {
                return Err(Error::parse(
                    path,
                    ln,
                    format!("expected {cols} columns, found {}", row.len()),
                ));
            }
            values.extend(row);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    };
    let theta = read_block(header.input_dim, header.hidden)?;
    let classifier = read_block(header.hidden, header.classes)?;
    let bias = read_block(1, header.classes)?;
    let model = ShkcModel {
        theta,
        classifier,
        bias: DVector::from_iterator(header.classes, bias.iter().copied()),
    };
    if !model.is_finite() {
        return Err(Error::parse(path, 0, "checkpoint holds non-finite values"));
    }
    Ok((header, model))
}
