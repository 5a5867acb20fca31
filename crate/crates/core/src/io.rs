//! CSV persistence for panels, aggregate counts, matrices and support masks.
//!
//! Lines starting with `#` are comments; writers use them for a manifest line.
//! State labels are 1-based in files (`1..=r`), 0-based in memory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::{AggregateCounts, SequencePanel};
use crate::error::{Error, Result};
use crate::markov::{SupportMask, TransitionMatrix};

pub const MISSING: &str = "NA";

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn write_manifest<W: Write>(out: &mut W, manifest: Option<&str>) -> Result<()> {
    if let Some(m) = manifest {
        for line in m.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(())
}

/// Reads a panel: one individual per row, columns `t = 0..=T`, `NA` for missing.
/// An optional header row `t0,t1,…` is accepted.
pub fn read_panel<R: Read>(input: R, n_states: usize) -> Result<SequencePanel> {
    let mut rows = Vec::new();
    let mut width: Option<usize> = None;
    for record in reader(input).records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.get(0).is_some_and(|f| f.starts_with('t')) && rows.is_empty() {
            width = Some(record.len());
            continue;
        }
        if let Some(w) = width {
            if record.len() != w {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} columns, found {}", record.len()),
                });
            }
        }
        width = Some(record.len());
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            if field == MISSING {
                row.push(None);
                continue;
            }
            let label: usize = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot read state label {field:?}"),
            })?;
            if label == 0 || label > n_states {
                return Err(Error::Domain {
                    line,
                    message: format!("state {label} outside 1..={n_states}"),
                });
            }
            row.push(Some(label - 1));
        }
        rows.push(row);
    }
    let horizon = width.map(|w| w.saturating_sub(1)).unwrap_or(0);
    SequencePanel::new(n_states, horizon, rows)
}

pub fn write_panel<W: Write>(out: W, panel: &SequencePanel, manifest: Option<&str>) -> Result<()> {
    let mut out = BufWriter::new(out);
    write_manifest(&mut out, manifest)?;
    let header: Vec<String> = (0..=panel.horizon()).map(|t| format!("t{t}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in panel.rows() {
        let fields: Vec<String> = row
            .iter()
            .map(|c| match c {
                Some(s) => (s + 1).to_string(),
                None => MISSING.to_string(),
            })
            .collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_panel(path: impl AsRef<Path>, n_states: usize) -> Result<SequencePanel> {
    read_panel(BufReader::new(File::open(path)?), n_states)
}

pub fn save_panel(path: impl AsRef<Path>, panel: &SequencePanel, manifest: Option<&str>) -> Result<()> {
    write_panel(File::create(path)?, panel, manifest)
}

/// Reads aggregate counts with header `t,s1,…,sr` and one row per time `0..=T`.
pub fn read_counts<R: Read>(input: R) -> Result<AggregateCounts> {
    let mut records = reader(input).into_records();
    let header = match records.next() {
        Some(h) => h?,
        None => return AggregateCounts::new(0, Vec::new()),
    };
    let header_line = line_of(&header);
    if header.get(0) != Some("t") || header.len() < 2 {
        return Err(Error::Parse {
            line: header_line,
            message: "aggregate header must be t,s1,...,sr".into(),
        });
    }
    let r = header.len() - 1;
    let mut rows = Vec::new();
    for record in records {
        let record = record?;
        let line = line_of(&record);
        if record.len() != r + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", r + 1, record.len()),
            });
        }
        let t: usize = record[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad time index {:?}", &record[0]),
        })?;
        if t != rows.len() {
            return Err(Error::Parse {
                line,
                message: format!("time {t} out of sequence, expected {}", rows.len()),
            });
        }
        let counts = record
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<u64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad count {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(counts);
    }
    AggregateCounts::new(r, rows)
}

pub fn write_counts<W: Write>(out: W, counts: &AggregateCounts, manifest: Option<&str>) -> Result<()> {
    let mut out = BufWriter::new(out);
    write_manifest(&mut out, manifest)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=counts.n_states()).map(|j| format!("s{j}")));
    writeln!(out, "{}", header.join(","))?;
    for (t, row) in counts.rows().iter().enumerate() {
        let fields: Vec<String> = row.iter().map(u64::to_string).collect();
        writeln!(out, "{t},{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_counts(path: impl AsRef<Path>) -> Result<AggregateCounts> {
    read_counts(BufReader::new(File::open(path)?))
}

pub fn save_counts(path: impl AsRef<Path>, counts: &AggregateCounts, manifest: Option<&str>) -> Result<()> {
    write_counts(File::create(path)?, counts, manifest)
}

fn read_square<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader(input).records() {
        let record = record?;
        let line = line_of(&record);
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad number {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let r = rows.len();
    if let Some(k) = rows.iter().position(|row| row.len() != r) {
        return Err(Error::Parse {
            line: k as u64 + 1,
            message: format!("matrix with {r} rows needs {r} columns per row"),
        });
    }
    Ok(rows)
}

/// Reads an `r × r` matrix; without `mask`, support is inferred from exact zeros.
pub fn read_matrix<R: Read>(input: R, mask: Option<SupportMask>) -> Result<TransitionMatrix> {
    let rows = read_square(input)?;
    match mask {
        None => TransitionMatrix::from_rows(&rows),
        Some(mask) => {
            if mask.dim() != rows.len() {
                return Err(Error::Structure(format!(
                    "mask is {0}x{0} but matrix is {1}x{1}",
                    mask.dim(),
                    rows.len()
                )));
            }
            TransitionMatrix::new(rows.into_iter().flatten().collect(), mask)
        }
    }
}

/// Reads a 0/1 support mask.
pub fn read_mask<R: Read>(input: R) -> Result<SupportMask> {
    let rows = read_square(input)?;
    let r = rows.len();
    SupportMask::new(r, rows.into_iter().flatten().map(|v| v != 0.0).collect())
}

pub fn write_matrix<W: Write>(out: W, matrix: &TransitionMatrix, manifest: Option<&str>) -> Result<()> {
    let mut out = BufWriter::new(out);
    write_manifest(&mut out, manifest)?;
    for i in 0..matrix.dim() {
        let fields: Vec<String> = matrix.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>, mask: Option<&Path>) -> Result<TransitionMatrix> {
    let mask = mask
        .map(|p| read_mask(BufReader::new(File::open(p)?)))
        .transpose()?;
    read_matrix(BufReader::new(File::open(path)?), mask)
}

pub fn save_matrix(path: impl AsRef<Path>, matrix: &TransitionMatrix, manifest: Option<&str>) -> Result<()> {
    write_matrix(File::create(path)?, matrix, manifest)
}
