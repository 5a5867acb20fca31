//! Runs several independent chains in lockstep blocks, checking convergence
//! between blocks.

use rayon::prelude::*;

use crate::diagnostics::{check_point, detect_burn_in, DiagnosticTrace};
use crate::error::Result;
use crate::markov::SupportMask;
use crate::posterior::{Draw, PosteriorSample};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Schedule {
    pub n_iter: usize,
    pub check_interval: usize,
    pub patience: usize,
    /// Stop as soon as burn-in is confirmed instead of running `n_iter` iterations.
    pub stop_at_burn_in: bool,
}

#[derive(Debug)]
pub(crate) struct Outcome {
    pub chains: Vec<PosteriorSample>,
    pub trace: DiagnosticTrace,
    pub burn_in: Option<usize>,
    /// First check point at which the rule of thumb held.
    pub first_rt: Option<usize>,
}

/// Advances every chain `check_interval` iterations at a time. `step` gets the
/// chain state, the iteration index and the first check point at which the
/// rule of thumb held so far (if any).
pub(crate) fn run_lockstep<S, F>(
    states: &mut [S],
    support: &SupportMask,
    schedule: Schedule,
    step: F,
) -> Result<Outcome>
where
    S: Send,
    F: Fn(&mut S, usize, Option<usize>) -> Result<Draw> + Sync,
{
    let n_chains = states.len();
    let free = support.free_entries();
    let r = support.dim();
    let mut chains: Vec<PosteriorSample> = (0..n_chains)
        .map(|c| PosteriorSample::with_capacity(c, support.clone(), schedule.n_iter))
        .collect();
    let mut traces: Vec<Vec<Vec<f64>>> = vec![vec![Vec::with_capacity(schedule.n_iter); free.len()]; n_chains];
    let mut trace = DiagnosticTrace::default();
    let mut first_rt = None;
    let mut burn_in = None;
    let interval = schedule.check_interval.max(1);
    let mut done = 0;
    while done < schedule.n_iter {
        let end = (done + interval).min(schedule.n_iter);
        let blocks: Vec<Vec<Draw>> = states
            .par_iter_mut()
            .map(|s| (done..end).map(|h| step(s, h, first_rt)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        for ((chain, tr), block) in chains.iter_mut().zip(traces.iter_mut()).zip(blocks) {
            for d in block {
                for (t, &(i, j)) in tr.iter_mut().zip(&free) {
                    t.push(d.entries[i * r + j]);
                }
                chain.push(d);
            }
        }
        done = end;
        if n_chains >= 2 && done % interval == 0 && done >= 4 {
            let point = check_point(&traces, done)?;
            if point.rt_met && first_rt.is_none() {
                first_rt = Some(done);
            }
            trace.push(point);
            if burn_in.is_none() {
                burn_in = detect_burn_in(&trace, schedule.patience);
                if burn_in.is_some() && schedule.stop_at_burn_in {
                    break;
                }
            }
        }
    }
    Ok(Outcome {
        chains,
        trace,
        burn_in,
        first_rt,
    })
}
