use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tabular regression data: one feature row and one label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<f64>,
    pub ids: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<f64>, ids: Vec<String>) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || ids.len() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows, {} labels, {} ids",
                labels.len(),
                ids.len()
            )));
        }
        if features.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(Error::Input("dataset contains non-finite values".into()));
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Input(format!("duplicate id `{dup}`")));
        }
        Ok(Dataset { features, labels, ids })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }
}

/// Reads `id,y,f0,...,f{p-1}`.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let bad = |line: u64, msg: String| Error::Parse {
        path: source.clone(),
        line,
        msg,
    };
    let file = File::open(path).map_err(|e| io::Error::new(e.kind(), format!("{source}: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < 3 || names[0] != "id" || names[1] != "y" {
        return Err(bad(1, "header must start with `id,y,f0`".into()));
    }
    for (j, name) in names[2..].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(bad(1, format!("expected column `f{j}`, found `{name}`")));
        }
    }
    let p = names.len() - 2;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != p + 2 {
            return Err(bad(line, format!("expected {} columns, found {}", p + 2, record.len())));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(bad(line, "empty id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(bad(line, format!("duplicate id `{id}`")));
        }
        let mut cells = record.iter().skip(1).map(|cell| {
            let cell = cell.trim();
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line, format!("`{cell}` is not a finite number")))
        });
        labels.push(cells.next().expect("length checked")?);
        for cell in cells {
            values.push(cell?);
        }
        ids.push(id);
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, p), values).map_err(|e| Error::Shape(e.to_string()))?;
    Dataset::new(features, labels, ids)
}

/// Writes the dataset in the format read by [`load_csv`]. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    write!(out, "id,y")?;
    for j in 0..dataset.feature_dim() {
        write!(out, ",f{j}")?;
    }
    writeln!(out)?;
    for ((id, y), row) in dataset.ids.iter().zip(&dataset.labels).zip(dataset.features.rows()) {
        write!(out, "{id},{y:?}")?;
        for v in row {
            write!(out, ",{v:?}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Seeded shuffle into `(train, test)` with `round(n * test_fraction)` test rows.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test < 2 || n - n_test < 2 {
        return Err(Error::Config(format!(
            "splitting {n} samples at {test_fraction} leaves a side with fewer than 2 samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test, train) = order.split_at(n_test);
    Ok((dataset.select(train), dataset.select(test)))
}

/// One row per sample: `epoch,id,y,z0,...,z{d-1}`.
pub fn write_embedding_header<W: Write>(out: &mut W, dim: usize) -> Result<()> {
    write!(out, "epoch,id,y")?;
    for j in 0..dim {
        write!(out, ",z{j}")?;
    }
    writeln!(out)?;
    Ok(())
}

pub fn write_embedding_rows<W: Write>(
    out: &mut W,
    epoch: usize,
    ids: &[String],
    labels: &[f64],
    embeddings: ArrayView2<'_, f64>,
) -> Result<()> {
    if ids.len() != embeddings.nrows() || labels.len() != embeddings.nrows() {
        return Err(Error::Shape("embedding rows, ids and labels differ in length".into()));
    }
    for ((id, y), row) in ids.iter().zip(labels).zip(embeddings.rows()) {
        write!(out, "{epoch},{id},{y:?}")?;
        for v in row {
            write!(out, ",{v:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
