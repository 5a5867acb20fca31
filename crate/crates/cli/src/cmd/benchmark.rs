use std::fs::File;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use transition_bayes::benchmark::{
    run_benchmark, summarize_benchmark, write_rows, write_summary, BenchmarkConfig, Method, Scenario,
};

use super::DEFAULT_SEED;
use crate::config::resolve;
use crate::output::{Manifest, Outputs};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkOpts {
    /// TOML file whose `[benchmark]` table supplies defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Methods among gibbs, mh, dcs, rcs, dcs-coarse, rcs-coarse.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Sample sizes of the Lee grid.
    #[arg(long, value_delimiter = ',')]
    pub lee_m: Option<Vec<usize>>,
    /// Dimensions of the RRA grid.
    #[arg(long, value_delimiter = ',')]
    pub rra_r: Option<Vec<usize>>,
    /// Sample size used for every RRA cell.
    #[arg(long)]
    pub rra_m: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Iteration budget per run.
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long = "T", alias = "horizon")]
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: Option<usize>,
    /// RRA dimension sampled before collapsing.
    #[arg(long)]
    pub r_max: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn config_from(opts: &BenchmarkOpts) -> Result<BenchmarkConfig> {
    let mut config = BenchmarkConfig::default();
    if let Some(methods) = &opts.methods {
        config.methods = methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<_, _>>()?;
    }
    let mut scenarios: Vec<Scenario> = Vec::new();
    if let Some(ms) = &opts.lee_m {
        scenarios.extend(ms.iter().map(|&m| Scenario::Lee { m }));
    }
    if let Some(rs) = &opts.rra_r {
        let m = opts.rra_m.unwrap_or(1000);
        scenarios.extend(rs.iter().map(|&r| Scenario::Rra { r, m }));
    }
    if !scenarios.is_empty() {
        config.scenarios = scenarios;
    }
    config.repeats = opts.repeats.unwrap_or(config.repeats);
    config.max_iter = opts.max_iter.unwrap_or(config.max_iter);
    config.horizon = opts.horizon.unwrap_or(config.horizon);
    config.r_max = opts.r_max.unwrap_or(config.r_max);
    config.seed = opts.seed.unwrap_or(DEFAULT_SEED);
    Ok(config)
}

pub fn run(flags: BenchmarkOpts) -> Result<()> {
    let opts = resolve(&flags, flags.config.as_deref(), "benchmark")?;
    let config = config_from(&opts)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().context("starting worker pool")?;
    let rows = pool.install(|| run_benchmark(&config))?;
    let summary = summarize_benchmark(&rows, config.max_iter);

    let manifest = Manifest::new("benchmark", Some(config.seed), &opts)?;
    let line = manifest.line();
    let mut out = Outputs::create(opts.out.as_deref().unwrap_or("out".as_ref()))?;
    write_rows(File::create(out.file("runs.csv"))?, &rows, Some(&line))?;
    write_summary(File::create(out.file("summary.csv"))?, &summary, Some(&line))?;
    out.write_manifest(&manifest, &opts)?;
    out.commit();

    for s in &summary {
        let (grid, value) = s.scenario.grid_label();
        println!(
            "{:<11} {grid}={value:<5} converged {}/{}  median iterations {:.0}  median wall {:.2}s",
            s.method.to_string(),
            s.converged,
            s.repeats,
            s.iterations.1,
            s.wall_seconds.1
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use transition_bayes::KernelKind;

    #[test]
    fn grids_expand_into_scenarios() {
        let opts = BenchmarkOpts {
            methods: Some(vec!["gibbs".into(), "rcs".into()]),
            lee_m: Some(vec![100, 400]),
            rra_r: Some(vec![3]),
            ..BenchmarkOpts::default()
        };
        let config = config_from(&opts).unwrap();
        assert_eq!(config.methods, vec![Method::Gibbs, Method::Mh(KernelKind::Rcs)]);
        assert_eq!(
            config.scenarios,
            vec![Scenario::Lee { m: 100 }, Scenario::Lee { m: 400 }, Scenario::Rra { r: 3, m: 1000 }]
        );
    }

    #[test]
    fn unknown_method_is_an_error() {
        let opts = BenchmarkOpts {
            methods: Some(vec!["hmc".into()]),
            ..BenchmarkOpts::default()
        };
        assert!(config_from(&opts).is_err());
    }
}
