//! Peak-to-average power of oversampled frames (`papr`).
//!
//! Narrow allocation: Doppler-transversal OTFS (one Doppler bin, all delay
//! bins) against SC-FDMA on the same number of tones. Dense allocation: full
//! OTFS against OFDM.

use ddmodem::modem::{allocate, papr_samples, Allocation, ModemConfig, ModemMode};
use ddmodem::rng::{derive_seed, stream_rng, streams};
use ddmodem::{DdFrame, DelayDopplerGrid, Modem, QamConstellation, TfFrame, C64};
use rand::Rng;

use super::{map_indexed, quantile};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, HarnessResult};
use crate::report::{format_value, ResultTable, Samples};

/// CCDF levels at which PAPR quantiles are reported.
pub const CCDF_LEVELS: [(f64, &str); 3] = [(1e-1, "1e-1"), (1e-2, "1e-2"), (1e-3, "1e-3")];

pub const WAVEFORMS: [&str; 4] = ["dt_otfs", "sc_fdma", "otfs", "ofdm"];

fn modem(tones: usize, symbols: usize, cfg: &ExperimentConfig) -> HarnessResult<Modem> {
    let grid = DelayDopplerGrid::with_subcarrier_spacing(tones, symbols, cfg.grid.subcarrier_spacing_hz)
        .map_err(|e| HarnessError::config("papr", e.to_string()))?;
    Ok(Modem::new(ModemConfig::new(grid, 0, ModemMode::OtfsMulticarrier, QamConstellation::qpsk())?))
}

fn qpsk<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    let pts = QamConstellation::qpsk();
    (0..n).map(|_| pts.points()[rng.random_range(0..4)]).collect()
}

/// PAPR (dB) of each waveform in [`WAVEFORMS`] for one frame.
fn frame(cfg: &ExperimentConfig, narrow: &Modem, dense: &Modem, index: u64) -> HarnessResult<[f64; 4]> {
    let os = cfg.papr.oversampling;
    let seed = derive_seed(cfg.master_seed, streams::PAYLOAD, index);
    let mut out = [0.0; 4];

    let ng = *narrow.grid();
    let mut rng = stream_rng(seed, 0, 0);
    let x = allocate(&qpsk(ng.n_delay(), &mut rng), &Allocation::DopplerTransversal { doppler_index: 0 }, &ng)?;
    out[0] = papr_samples(&narrow.oversampled_waveform(&narrow.transformer().sfft(&x)?, os)?)?;

    let b = cfg.papr.sc_fdma_tones;
    let mut rng = stream_rng(seed, 1, 0);
    let tf = narrow.sc_fdma_frame(&qpsk(b * ng.m_doppler(), &mut rng), 0..b, None)?;
    out[1] = papr_samples(&narrow.oversampled_waveform(&tf, os)?)?;

    let dg = *dense.grid();
    let mut rng = stream_rng(seed, 2, 0);
    let x = DdFrame::from_vec(dg, qpsk(dg.len(), &mut rng))?;
    out[2] = papr_samples(&dense.oversampled_waveform(&dense.transformer().sfft(&x)?, os)?)?;

    let mut rng = stream_rng(seed, 3, 0);
    let tf = TfFrame::from_vec(dg, qpsk(dg.len(), &mut rng))?;
    out[3] = papr_samples(&dense.oversampled_waveform(&tf, os)?)?;
    Ok(out)
}

pub fn run_papr(cfg: &ExperimentConfig) -> HarnessResult<ResultTable> {
    let p = &cfg.papr;
    let narrow = modem(p.narrow_grid[0], p.narrow_grid[1], cfg)?;
    let dense = modem(p.dense_grid[0], p.dense_grid[1], cfg)?;
    let frames: Vec<[f64; 4]> = map_indexed(cfg.n_trials, cfg.parallel, |i| frame(cfg, &narrow, &dense, i as u64))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let mut table = ResultTable::new(cfg, "papr");
    let n = frames.len() as u64;
    let mut rows = Vec::with_capacity(4 * frames.len());
    let seed = cfg.master_seed.to_string();
    for (w, name) in WAVEFORMS.iter().enumerate() {
        let values: Vec<f64> = frames.iter().map(|f| f[w]).collect();
        let params = format!("waveform={name}");
        for (level, label) in CCDF_LEVELS {
            // Fewer frames than 1/level cannot resolve that tail.
            let flag = if (n as f64) * level < 10.0 { "low_confidence" } else { "" };
            table.push(params.clone(), &format!("papr_db_ccdf_{label}"), quantile(&values, 1.0 - level), n, flag);
        }
        table.push(params, "papr_db_mean", values.iter().sum::<f64>() / n as f64, n, "");
        rows.extend(values.iter().enumerate().map(|(i, v)| vec![(*name).into(), seed.clone(), i.to_string(), format_value(*v)]));
    }
    table.set_samples(Samples { header: ["waveform", "seed", "frame", "papr_db"].map(String::from).to_vec(), rows });
    Ok(table)
}
