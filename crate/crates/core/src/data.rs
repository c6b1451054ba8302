//! Labeled time-series datasets: UCR-format loading, synthetic generation,
//! normalization, and mini-batching.
//!
//! UCR file format: one series per line, first field the class label
//! (integer or real), remaining fields the values, tab- or comma-delimited.

use crate::array::Array;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delimiter {
    Auto,
    Tab,
    Comma,
}

#[derive(Clone, Debug)]
pub struct TimeSeriesDataset {
    pub name: String,
    /// N x m matrix, one series per row.
    pub series: Array,
    /// Dense labels 0..k_true-1, evaluation only.
    pub labels: Vec<usize>,
    /// Distinct label count.
    pub k_true: usize,
    /// Raw label text per dense label, sorted by numeric value at load time.
    pub label_names: Vec<String>,
    /// Where the rows came from (file paths, generator tags, merge history).
    pub provenance: Vec<String>,
}

impl TimeSeriesDataset {
    pub fn n_samples(&self) -> usize {
        self.series.rows()
    }

    pub fn series_len(&self) -> usize {
        if self.series.is_empty() {
            self.series.shape().get(1).copied().unwrap_or(0)
        } else {
            self.series.cols()
        }
    }

    pub fn empty(m: usize) -> Self {
        TimeSeriesDataset {
            name: "empty".into(),
            series: Array::zeros(&[0, m]),
            labels: vec![],
            k_true: 0,
            label_names: vec![],
            provenance: vec![],
        }
    }
}

/// A mini-batch view: unique sample indices plus the n x m value matrix.
#[derive(Clone, Debug)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub series: Array,
}

impl Batch {
    pub fn n(&self) -> usize {
        self.indices.len()
    }
}

/// Parse a UCR-format file into a dataset. Labels are remapped to dense
/// integers ordered by their numeric value.
pub fn load_ucr(path: &Path, delimiter: Delimiter) -> Result<TimeSeriesDataset> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let mut dataset = parse_ucr(&text, delimiter, &name)?;
    dataset.provenance = vec![path.display().to_string()];
    Ok(dataset)
}

pub fn parse_ucr(text: &str, delimiter: Delimiter, name: &str) -> Result<TimeSeriesDataset> {
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let row_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let delim = match delimiter {
            Delimiter::Tab => '\t',
            Delimiter::Comma => ',',
            Delimiter::Auto => {
                if line.contains('\t') {
                    '\t'
                } else {
                    ','
                }
            }
        };
        let mut fields = line.split(delim).map(str::trim).filter(|f| !f.is_empty());
        let label_text = fields.next().ok_or_else(|| Error::Parse {
            row: row_no,
            detail: "missing label field".into(),
        })?;
        let label: f64 = label_text.parse().map_err(|_| Error::Parse {
            row: row_no,
            detail: format!("non-numeric label {label_text:?}"),
        })?;
        let mut values = Vec::new();
        for f in fields {
            values.push(f.parse::<f64>().map_err(|_| Error::Parse {
                row: row_no,
                detail: format!("non-numeric field {f:?}"),
            })?);
        }
        match width {
            None => {
                if values.is_empty() {
                    return Err(Error::Parse {
                        row: row_no,
                        detail: "row has a label but no values".into(),
                    });
                }
                width = Some(values.len());
            }
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    row: row_no,
                    detail: format!("row has {} values, expected {}", values.len(), w),
                });
            }
            _ => {}
        }
        rows.push((label, values));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 0,
            detail: "empty file".into(),
        });
    }

    let m = width.expect("at least one row");
    let mut uniq: Vec<f64> = rows.iter().map(|(l, _)| *l).collect();
    uniq.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
    uniq.dedup();
    let dense = |l: f64| uniq.iter().position(|&u| u == l).expect("label present");

    let n = rows.len();
    let mut data = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n);
    for (l, values) in &rows {
        labels.push(dense(*l));
        data.extend_from_slice(values);
    }
    Ok(TimeSeriesDataset {
        name: name.to_string(),
        series: Array::from_vec(&[n, m], data)?,
        labels,
        k_true: uniq.len(),
        label_names: uniq.iter().map(|l| format_value(*l)).collect(),
        provenance: vec![],
    })
}

/// Serialize back to UCR format (tab-delimited). Round-trips bit-exactly
/// with [`parse_ucr`] because values print in shortest-exact form.
pub fn to_ucr_string(d: &TimeSeriesDataset) -> String {
    let mut out = String::new();
    for i in 0..d.n_samples() {
        let _ = write!(out, "{}", d.label_names[d.labels[i]]);
        for v in d.series.row(i) {
            let _ = write!(out, "\t{}", format_value(*v));
        }
        out.push('\n');
    }
    out
}

pub fn save_ucr(d: &TimeSeriesDataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_ucr_string(d))?;
    Ok(())
}

fn format_value(v: f64) -> String {
    // `{}` prints the shortest string that parses back to the same f64.
    format!("{v}")
}

/// Concatenate two datasets with identical series length and label alphabet.
/// An empty side is allowed and acts as the identity.
pub fn merge(a: &TimeSeriesDataset, b: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
    if a.n_samples() == 0 {
        return Ok(with_merge_provenance(b.clone(), a, b));
    }
    if b.n_samples() == 0 {
        return Ok(with_merge_provenance(a.clone(), a, b));
    }
    if a.series_len() != b.series_len() {
        return Err(Error::dimension(
            "merge",
            format!("series length {} vs {}", a.series_len(), b.series_len()),
        ));
    }
    if a.label_names != b.label_names {
        return Err(Error::dimension(
            "merge",
            format!("label alphabets differ: {:?} vs {:?}", a.label_names, b.label_names),
        ));
    }
    let m = a.series_len();
    let n = a.n_samples() + b.n_samples();
    let mut data = Vec::with_capacity(n * m);
    data.extend_from_slice(a.series.data());
    data.extend_from_slice(b.series.data());
    let mut labels = a.labels.clone();
    labels.extend_from_slice(&b.labels);
    Ok(with_merge_provenance(
        TimeSeriesDataset {
            name: a.name.clone(),
            series: Array::from_vec(&[n, m], data)?,
            labels,
            k_true: a.k_true,
            label_names: a.label_names.clone(),
            provenance: vec![],
        },
        a,
        b,
    ))
}

fn with_merge_provenance(
    mut merged: TimeSeriesDataset,
    a: &TimeSeriesDataset,
    b: &TimeSeriesDataset,
) -> TimeSeriesDataset {
    merged.provenance = a
        .provenance
        .iter()
        .chain(b.provenance.iter())
        .cloned()
        .collect();
    merged.provenance.push(format!("merge({}, {})", a.name, b.name));
    merged
}

/// Two-cluster synthetic benchmark: slow sine (3 cycles) vs fast sine
/// (7 cycles), both with N(0, 0.1^2) noise. Deterministic per seed.
pub fn synth_two_cluster(n_per: usize, m: usize, seed: u64) -> Result<TimeSeriesDataset> {
    if n_per < 4 {
        return Err(Error::Config(format!(
            "synth_two_cluster needs n_per >= 4, got {n_per}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).expect("valid sigma");
    let n = 2 * n_per;
    let mut data = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..2usize {
        let cycles = if cluster == 0 { 3.0 } else { 7.0 };
        for _ in 0..n_per {
            for t in 0..m {
                let phase = 2.0 * std::f64::consts::PI * (t as f64) / (m as f64) * cycles;
                data.push(phase.sin() + noise.sample(&mut rng));
            }
            labels.push(cluster);
        }
    }
    Ok(TimeSeriesDataset {
        name: format!("synth-two-cluster-{seed}"),
        series: Array::from_vec(&[n, m], data)?,
        labels,
        k_true: 2,
        label_names: vec!["0".into(), "1".into()],
        provenance: vec![format!("synth_two_cluster(n_per={n_per}, m={m}, seed={seed})")],
    })
}

/// Per-series z-normalization: mean 0, population std 1. Constant series
/// map to all-zeros.
pub fn znormalize(d: &TimeSeriesDataset) -> TimeSeriesDataset {
    let (n, m) = (d.n_samples(), d.series_len());
    let mut out = d.clone();
    for i in 0..n {
        let row = d.series.row(i);
        let mean = row.iter().sum::<f64>() / m as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
        let std = var.sqrt();
        for j in 0..m {
            let v = if std > 0.0 { (row[j] - mean) / std } else { 0.0 };
            out.series.set(i, j, v);
        }
    }
    out.provenance.push("znormalize".into());
    out
}

/// Split an epoch into batches of size `n`. A trailing batch smaller than 2
/// is dropped (contrastive terms need at least one negative pair).
pub fn batches(d: &TimeSeriesDataset, n: usize, seed: u64, shuffle: bool) -> Result<Vec<Batch>> {
    let total = d.n_samples();
    if n < 2 || n > total {
        return Err(Error::Config(format!(
            "batch size {n} out of range 2..={total}"
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let m = d.series_len();
    let mut out = Vec::new();
    for chunk in order.chunks(n) {
        if chunk.len() < 2 {
            break;
        }
        let mut data = Vec::with_capacity(chunk.len() * m);
        for &i in chunk {
            data.extend_from_slice(d.series.row(i));
        }
        out.push(Batch {
            indices: chunk.to_vec(),
            series: Array::from_vec(&[chunk.len(), m], data)?,
        });
    }
    Ok(out)
}
