//! Downlink precoding SNR distributions over ring-scenario drops
//! (`precode_cdf`).

use ddmodem::mimo::{precoding_drop, Precoder, PrecodingStrategy, RingScenario, PRECODING_PAIRS};
use ddmodem::DelayDopplerGrid;

use super::{map_indexed, quantile};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, HarnessResult};
use crate::report::{format_value, ResultTable, Samples};

pub const PERCENTILES: [f64; 5] = [1.0, 10.0, 50.0, 90.0, 99.0];

fn strategy_name(s: PrecodingStrategy) -> &'static str {
    match s {
        PrecodingStrategy::TfPointwise => "tf_pointwise",
        PrecodingStrategy::DdAveraged => "dd_averaged",
    }
}

fn precoder_name(p: Precoder) -> &'static str {
    match p {
        Precoder::Zf => "zf",
        Precoder::Thp => "thp",
    }
}

pub fn run_precode_cdf(cfg: &ExperimentConfig) -> HarnessResult<ResultTable> {
    let p = &cfg.precode;
    // The scenario seed follows the run's master seed.
    let sc = RingScenario { rng_seed: cfg.master_seed, ..p.scenario };
    let grid = DelayDopplerGrid::with_subcarrier_spacing(p.n_tones, p.n_symbols, p.subcarrier_spacing_hz)
        .map_err(|e| HarnessError::config("precode", e.to_string()))?;
    let drops: Vec<[f64; 4]> = map_indexed(p.drops, cfg.parallel, |d| precoding_drop(&sc, &grid, d as u64, p.reference_snr_db))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let mut table = ResultTable::new(cfg, "precode_cdf");
    let users = sc.n_users;
    let seed = cfg.master_seed.to_string();
    let mut rows = Vec::with_capacity(4 * users * drops.len());
    for (k, (st, pc)) in PRECODING_PAIRS.iter().enumerate() {
        let params = format!("strategy={};precoder={}", strategy_name(*st), precoder_name(*pc));
        // Every user of a drop sees the same SNR; the pooled set repeats it.
        let pooled: Vec<f64> = drops.iter().flat_map(|d| std::iter::repeat_n(d[k], users)).collect();
        for q in PERCENTILES {
            table.push(params.clone(), &format!("p{q}_snr_db"), quantile(&pooled, q / 100.0), pooled.len() as u64, "");
        }
        for (d, v) in drops.iter().enumerate() {
            for u in 0..users {
                rows.push(vec![
                    strategy_name(*st).into(),
                    precoder_name(*pc).into(),
                    seed.clone(),
                    d.to_string(),
                    u.to_string(),
                    format_value(v[k]),
                ]);
            }
        }
    }
    for st in [PrecodingStrategy::TfPointwise, PrecodingStrategy::DdAveraged] {
        let zf = PRECODING_PAIRS.iter().position(|&q| q == (st, Precoder::Zf)).expect("listed");
        let thp = PRECODING_PAIRS.iter().position(|&q| q == (st, Precoder::Thp)).expect("listed");
        let gap = drops.iter().map(|d| d[thp] - d[zf]).fold(f64::INFINITY, f64::min);
        table.push(format!("strategy={}", strategy_name(st)), "min_thp_minus_zf_db", gap, drops.len() as u64, "");
    }
    table.set_samples(Samples {
        header: ["strategy", "precoder", "seed", "drop", "user", "snr_db"].map(String::from).to_vec(),
        rows,
    });
    Ok(table)
}
