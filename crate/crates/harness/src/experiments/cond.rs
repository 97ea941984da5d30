//! Condition numbers of pointwise vs delay-Doppler-averaged autocorrelations
//! over independent Gaussian strips (`cond_hist`).

use ddmodem::mimo::{condition_number, dd_average_autocorrelation, Direction, MimoEnsemble};
use ddmodem::rng::{stream_rng, streams};

use super::{map_indexed, mean_std, quantile};
use crate::config::ExperimentConfig;
use crate::error::HarnessResult;
use crate::report::{format_value, ResultTable, Samples};

/// Per-point (TF) and averaged (DD) condition numbers of one strip.
pub fn strip_sample(cfg: &ExperimentConfig, strip: u64) -> HarnessResult<(Vec<f64>, f64)> {
    let grid = cfg.grid.grid()?;
    let mut rng = stream_rng(cfg.master_seed, streams::ENSEMBLE, strip);
    let ens = MimoEnsemble::gaussian(grid, Direction::Uplink, cfg.cond.n_bs_antennas, cfg.cond.n_users, &mut rng)?;
    let tf = ens.pointwise_condition_numbers()?;
    let dd = condition_number(&dd_average_autocorrelation(&ens)?)?;
    Ok((tf, dd))
}

fn summarize(table: &mut ResultTable, domain: &str, values: &[f64], lo: f64, hi: f64, bins: usize) {
    let p = format!("domain={domain}");
    let n = values.len() as u64;
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let logs: Vec<f64> = finite.iter().map(|v| v.log10()).collect();
    let (mean, std) = mean_std(&finite);
    let (_, log_std) = mean_std(&logs);
    table.push(p.clone(), "median", quantile(values, 0.5), n, "");
    table.push(p.clone(), "mean", mean, finite.len() as u64, "");
    table.push(p.clone(), "std", std, finite.len() as u64, "");
    table.push(p.clone(), "log10_std", log_std, finite.len() as u64, "");
    table.push(p.clone(), "p99", quantile(values, 0.99), n, "");
    table.push(p.clone(), "singular_fraction", (values.len() - finite.len()) as f64 / values.len() as f64, n, "");
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for v in values {
        let l = if v.is_finite() { v.log10() } else { hi };
        let b = (((l - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    for (b, c) in counts.iter().enumerate() {
        let from = lo + b as f64 * width;
        let to = from + width;
        table.push(format!("{p};log10_lo={};log10_hi={}", format_value(from), format_value(to)), "count", *c as f64, n, "");
    }
}

pub fn run_cond_hist(cfg: &ExperimentConfig) -> HarnessResult<ResultTable> {
    let strips = map_indexed(cfg.cond.strips, cfg.parallel, |s| strip_sample(cfg, s as u64));
    let mut tf = Vec::new();
    let mut dd = Vec::with_capacity(strips.len());
    for s in strips {
        let (t, d) = s?;
        tf.extend(t);
        dd.push(d);
    }
    let top = tf.iter().chain(&dd).copied().filter(|v| v.is_finite()).fold(10.0, f64::max);
    let hi = top.log10().ceil();
    let mut table = ResultTable::new(cfg, "cond_hist");
    summarize(&mut table, "tf", &tf, 0.0, hi, cfg.cond.histogram_bins);
    summarize(&mut table, "dd", &dd, 0.0, hi, cfg.cond.histogram_bins);

    let seed = cfg.master_seed.to_string();
    let mut rows = Vec::with_capacity(tf.len() + dd.len());
    // TF samples are indexed strip-major over the grid points.
    rows.extend(tf.iter().enumerate().map(|(i, v)| vec!["tf".into(), seed.clone(), i.to_string(), format_value(*v)]));
    rows.extend(dd.iter().enumerate().map(|(i, v)| vec!["dd".into(), seed.clone(), i.to_string(), format_value(*v)]));
    table.set_samples(Samples {
        header: ["domain", "seed", "index", "condition_number"].map(String::from).to_vec(),
        rows,
    });
    Ok(table)
}
