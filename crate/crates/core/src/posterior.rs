//! Posterior draws, summaries and the posterior sample CSV format.
//!
//! The CSV has one row per iteration: `iter,chain`, every supported ψ entry
//! row by row as `psi_i_j`, then `eta_i` for missing-not-at-random fits, then for
//! Metropolis-Hastings runs `accepted,kernel,d_i…,fallback`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::markov::{SupportMask, TransitionMatrix};
use crate::mh::KernelKind;

/// Per-iteration Metropolis-Hastings bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct MhStepInfo {
    pub accepted: bool,
    pub kernel: KernelKind,
    /// Tuning coefficient of each free row.
    pub d: Vec<f64>,
    /// The adaptive kernel was requested but the basic one was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iter: usize,
    /// Row-major `r × r` entries.
    pub entries: Vec<f64>,
    pub eta: Option<Vec<f64>>,
    pub mh: Option<MhStepInfo>,
}

/// Ordered draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub chain: usize,
    support: SupportMask,
    draws: Vec<Draw>,
}

impl PosteriorSample {
    pub fn new(chain: usize, support: SupportMask) -> Self {
        Self {
            chain,
            support,
            draws: Vec::new(),
        }
    }

    pub fn with_capacity(chain: usize, support: SupportMask, n: usize) -> Self {
        Self {
            chain,
            support,
            draws: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, draw: Draw) {
        self.draws.push(draw);
    }

    pub fn support(&self) -> &SupportMask {
        &self.support
    }

    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Copy holding only the draws with iteration index `>= from_iter`.
    pub fn after(&self, from_iter: usize) -> PosteriorSample {
        Self {
            chain: self.chain,
            support: self.support.clone(),
            draws: self.draws.iter().filter(|d| d.iter >= from_iter).cloned().collect(),
        }
    }

    /// Every `k`-th draw.
    pub fn thinned(&self, k: usize) -> PosteriorSample {
        Self {
            chain: self.chain,
            support: self.support.clone(),
            draws: self.draws.iter().step_by(k.max(1)).cloned().collect(),
        }
    }

    pub fn matrix(&self, idx: usize) -> TransitionMatrix {
        TransitionMatrix::from_parts(self.draws[idx].entries.clone(), self.support.clone())
    }

    /// Values of entry `(i, j)` across iterations.
    pub fn trace(&self, i: usize, j: usize) -> Vec<f64> {
        let r = self.support.dim();
        self.draws.iter().map(|d| d.entries[i * r + j]).collect()
    }

    /// One trace per free entry, in [`SupportMask::free_entries`] order.
    pub fn free_traces(&self) -> Vec<Vec<f64>> {
        self.support
            .free_entries()
            .into_iter()
            .map(|(i, j)| self.trace(i, j))
            .collect()
    }

    pub fn eta_trace(&self, i: usize) -> Option<Vec<f64>> {
        self.draws
            .iter()
            .map(|d| d.eta.as_ref().map(|e| e[i]))
            .collect()
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        let steps: Vec<bool> = self
            .draws
            .iter()
            .filter_map(|d| d.mh.as_ref().map(|m| m.accepted))
            .collect();
        if steps.is_empty() {
            return None;
        }
        Some(steps.iter().filter(|&&a| a).count() as f64 / steps.len() as f64)
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean, standard deviation and central 95% interval of a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSummary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

impl ScalarSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            sd,
            q025: quantile(&sorted, 0.025),
            q975: quantile(&sorted, 0.975),
        }
    }
}

/// Summary of one supported entry `(row, col)` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct EntrySummary {
    pub row: usize,
    pub col: usize,
    pub stats: ScalarSummary,
}

fn pooled(chains: &[PosteriorSample], from_iter: usize) -> impl Iterator<Item = &Draw> {
    chains
        .iter()
        .flat_map(move |c| c.draws.iter().filter(move |d| d.iter >= from_iter))
}

/// Summaries of every supported entry over the draws of all chains with
/// iteration index `>= from_iter`.
pub fn summarize(chains: &[PosteriorSample], from_iter: usize) -> Vec<EntrySummary> {
    let Some(first) = chains.first() else {
        return Vec::new();
    };
    let r = first.support.dim();
    first
        .support
        .entries()
        .into_iter()
        .map(|(i, j)| {
            let values: Vec<f64> = pooled(chains, from_iter).map(|d| d.entries[i * r + j]).collect();
            EntrySummary {
                row: i,
                col: j,
                stats: ScalarSummary::from_values(&values),
            }
        })
        .collect()
}

/// Summaries of the missingness probabilities, when the chains carry them.
pub fn summarize_eta(chains: &[PosteriorSample], from_iter: usize) -> Option<Vec<ScalarSummary>> {
    let r = chains.first()?.support.dim();
    let draws: Vec<&Draw> = pooled(chains, from_iter).collect();
    if draws.is_empty() || draws.iter().any(|d| d.eta.is_none()) {
        return None;
    }
    Some(
        (0..r)
            .map(|i| {
                let v: Vec<f64> = draws.iter().map(|d| d.eta.as_ref().unwrap()[i]).collect();
                ScalarSummary::from_values(&v)
            })
            .collect(),
    )
}

/// Entry-wise posterior mean over the selected draws.
pub fn posterior_mean(chains: &[PosteriorSample], from_iter: usize) -> Result<TransitionMatrix> {
    let first = chains
        .first()
        .ok_or_else(|| Error::InvalidParameter("no chains".into()))?;
    let r = first.support.dim();
    let mut sum = vec![0.0; r * r];
    let mut n = 0usize;
    for d in pooled(chains, from_iter) {
        for (s, v) in sum.iter_mut().zip(&d.entries) {
            *s += v;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidParameter("no draws after burn-in".into()));
    }
    let entries = sum.into_iter().map(|s| s / n as f64).collect();
    Ok(TransitionMatrix::from_parts(entries, first.support.clone()))
}

fn header(sample: &PosteriorSample) -> Vec<String> {
    let mut cols = vec!["iter".to_string(), "chain".to_string()];
    cols.extend(
        sample
            .support
            .entries()
            .into_iter()
            .map(|(i, j)| format!("psi_{}_{}", i + 1, j + 1)),
    );
    if let Some(first) = sample.draws.first() {
        if let Some(eta) = &first.eta {
            cols.extend((1..=eta.len()).map(|i| format!("eta_{i}")));
        }
        if first.mh.is_some() {
            cols.push("accepted".into());
            cols.push("kernel".into());
            cols.extend(sample.support.free_rows().iter().map(|i| format!("d_{}", i + 1)));
            cols.push("fallback".into());
        }
    }
    cols
}

/// Writes all chains, sorted by chain then iteration.
pub fn write_posterior<W: Write>(out: W, chains: &[PosteriorSample], manifest: Option<&str>) -> Result<()> {
    let mut out = BufWriter::new(out);
    if let Some(m) = manifest {
        for line in m.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let Some(first) = chains.first() else {
        out.flush()?;
        return Ok(());
    };
    writeln!(out, "{}", header(first).join(","))?;
    let r = first.support.dim();
    let entries = first.support.entries();
    let mut ordered: Vec<&PosteriorSample> = chains.iter().collect();
    ordered.sort_by_key(|c| c.chain);
    for chain in ordered {
        for d in &chain.draws {
            let mut fields = vec![d.iter.to_string(), chain.chain.to_string()];
            fields.extend(entries.iter().map(|&(i, j)| format!("{:?}", d.entries[i * r + j])));
            if let Some(eta) = &d.eta {
                fields.extend(eta.iter().map(|v| format!("{v:?}")));
            }
            if let Some(mh) = &d.mh {
                fields.push(u8::from(mh.accepted).to_string());
                fields.push(mh.kernel.name().to_string());
                fields.extend(mh.d.iter().map(|v| format!("{v:?}")));
                fields.push(u8::from(mh.fallback).to_string());
            }
            writeln!(out, "{}", fields.join(","))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_posterior(path: impl AsRef<Path>, chains: &[PosteriorSample], manifest: Option<&str>) -> Result<()> {
    write_posterior(File::create(path)?, chains, manifest)
}

fn parse_label(label: &str) -> Option<(usize, usize)> {
    let rest = label.strip_prefix("psi_")?;
    let (i, j) = rest.split_once('_')?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

/// Reads the ψ and η columns of a posterior CSV back into per-chain samples.
/// Metropolis-Hastings metadata columns are not restored.
pub fn read_posterior<R: Read>(input: R) -> Result<Vec<PosteriorSample>> {
    let reader = BufReader::new(input);
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(n, l)| (n as u64 + 1, l))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.starts_with('#') || s.trim().is_empty()));
    let Some((header_line, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header = header?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "iter" || cols[1] != "chain" {
        return Err(Error::Parse {
            line: header_line,
            message: "posterior header must start with iter,chain".into(),
        });
    }
    let psi_cols: Vec<(usize, (usize, usize))> = cols
        .iter()
        .enumerate()
        .filter_map(|(c, l)| parse_label(l).map(|ij| (c, ij)))
        .collect();
    let eta_cols: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, l)| l.starts_with("eta_"))
        .map(|(c, _)| c)
        .collect();
    let r = psi_cols
        .iter()
        .map(|(_, (i, j))| (*i).max(*j))
        .max()
        .unwrap_or(0);
    if r == 0 || psi_cols.iter().any(|(_, (i, j))| *i == 0 || *j == 0) {
        return Err(Error::Parse {
            line: header_line,
            message: "no valid psi_i_j columns".into(),
        });
    }
    let mut allowed = vec![false; r * r];
    for (_, (i, j)) in &psi_cols {
        allowed[(i - 1) * r + (j - 1)] = true;
    }
    let support = SupportMask::new(r, allowed)?;

    let mut chains: BTreeMap<usize, PosteriorSample> = BTreeMap::new();
    for (line, text) in lines {
        let text = text?;
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        let num = |c: usize| -> Result<f64> {
            fields[c].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad number {:?} in column {}", fields[c], cols[c]),
            })
        };
        let iter = num(0)? as usize;
        let chain = num(1)? as usize;
        let mut entries = vec![0.0; r * r];
        for &(c, (i, j)) in &psi_cols {
            entries[(i - 1) * r + (j - 1)] = num(c)?;
        }
        let eta = if eta_cols.is_empty() {
            None
        } else {
            Some(eta_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?)
        };
        chains
            .entry(chain)
            .or_insert_with(|| PosteriorSample::new(chain, support.clone()))
            .push(Draw {
                iter,
                entries,
                eta,
                mh: None,
            });
    }
    Ok(chains.into_values().collect())
}

pub fn load_posterior(path: impl AsRef<Path>) -> Result<Vec<PosteriorSample>> {
    read_posterior(File::open(path)?)
}
