//! Punctured high-priority traffic on an AWGN link (`urllc`).
//!
//! A block of time-frequency cells is overwritten by a random QPSK
//! interferer of per-cell power `S_cell * 10^(-SIR/10)`, where `S_cell` is the
//! per-cell signal power of each waveform (`NM` for OTFS after the SFFT, 1 for
//! OFDM). Receivers are either told which cells were hit (indicated) or not.

use ddmodem::channel::{add_noise, inject_interference_with_rng, NarrowbandInterferer};
use ddmodem::modem::{ModemConfig, ModemMode};
use ddmodem::rng::{derive_seed, stream_rng, streams};
use ddmodem::{DdFrame, Modem, QamConstellation, TfFrame, C64};
use rand::Rng;

use super::{count_bit_errors, db_to_lin, map_indexed, Tally};
use crate::config::{Db, ExperimentConfig};
use crate::error::HarnessResult;
use crate::report::ResultTable;

/// OTFS without/with indication, OFDM without/with indication, in that order.
const RECEIVERS: [(&str, bool); 4] = [("otfs", false), ("otfs", true), ("ofdm", false), ("ofdm", true)];

struct Frame {
    tallies: [Tally; 4],
    erased_bits: u64,
}

/// Linear MMSE of the delay-Doppler symbols from the time-frequency cells that
/// were not punctured. With the unitary SFFT `A = sfft / sqrt(NM)` and `E` the
/// punctured rows, `(A*A - E*E + N0 I)⁻¹ A* ỹ = isfft(Ỹ) / (1 + N0)` because
/// `E E* = I` and `E A* ỹ = 0` when `Ỹ` is zero on the punctured cells.
pub fn indicated_otfs_estimate(modem: &Modem, y: &TfFrame, cells: &[usize], n0: f64) -> HarnessResult<DdFrame> {
    let mut yk = y.clone();
    for &c in cells {
        yk.data_mut()[c] = C64::new(0.0, 0.0);
    }
    let mut x = modem.transformer().isfft(&yk)?;
    let s = 1.0 / (1.0 + n0);
    x.data_mut().iter_mut().for_each(|z| *z *= s);
    Ok(x)
}

#[allow(clippy::too_many_arguments)]
fn run_frame(cfg: &ExperimentConfig, modem: &Modem, intf: Option<&NarrowbandInterferer>, cells: &[usize], snr: Db, si: usize, qi: usize, frame: u64) -> HarnessResult<Frame> {
    let g = *modem.grid();
    let c = QamConstellation::new(cfg.constellation_order)?;
    let mut payload = stream_rng(cfg.master_seed, streams::PAYLOAD, frame);
    let bits: Vec<u8> = (0..g.len() * c.bits_per_symbol()).map(|_| payload.random::<bool>() as u8).collect();
    let symbols = c.map(&bits)?;
    let nm = g.len() as f64;
    let n0 = if snr.0 == f64::INFINITY { 0.0 } else { 1.0 / db_to_lin(snr.0) };
    let irng = stream_rng(derive_seed(cfg.master_seed, streams::INTERFERENCE, frame), qi as u64, 0);
    let nrng = stream_rng(derive_seed(cfg.master_seed, streams::NOISE, frame), si as u64, 0);

    let send = |tf: TfFrame, cell_power: f64, sample_power: f64| -> HarnessResult<TfFrame> {
        let tf = match intf {
            Some(i) => inject_interference_with_rng(&tf, &NarrowbandInterferer { power: i.power * cell_power, ..i.clone() }, &mut irng.clone())?,
            None => tf,
        };
        let mut s = modem.multicarrier_modulate(&tf)?;
        if n0 > 0.0 {
            add_noise(s.samples_mut(), sample_power * n0, &mut nrng.clone());
        }
        Ok(modem.multicarrier_demodulate(&s)?)
    };

    let x = DdFrame::from_vec(g, symbols.clone())?;
    let y = send(modem.transformer().sfft(&x)?, nm, g.m_doppler() as f64)?;
    let plain = modem.transformer().isfft(&y)?;
    let ind = indicated_otfs_estimate(modem, &y, cells, n0)?;

    let yo = send(TfFrame::from_vec(g, symbols)?, 1.0, 1.0 / g.n_delay() as f64)?;

    let bps = c.bits_per_symbol();
    let total = bits.len() as u64;
    let mut tallies = [Tally::default(); 4];
    tallies[0].add_frame(count_bit_errors(&bits, &c.demap(plain.data())), total);
    tallies[1].add_frame(count_bit_errors(&bits, &c.demap(ind.data())), total);
    let ofdm_bits = c.demap(yo.data());
    tallies[2].add_frame(count_bit_errors(&bits, &ofdm_bits), total);
    let mut erased = vec![false; g.len()];
    cells.iter().for_each(|&i| erased[i] = true);
    let (mut err, mut kept) = (0u64, 0u64);
    for (cell, e) in erased.iter().enumerate() {
        if !e {
            let r = cell * bps..(cell + 1) * bps;
            err += count_bit_errors(&bits[r.clone()], &ofdm_bits[r]);
            kept += bps as u64;
        }
    }
    tallies[3].add_frame(err, kept);
    Ok(Frame { tallies, erased_bits: total - kept })
}

pub fn run_urllc(cfg: &ExperimentConfig) -> HarnessResult<ResultTable> {
    let grid = cfg.grid.grid()?;
    let modem = Modem::new(ModemConfig::new(grid, cfg.grid.cp_length, ModemMode::OtfsMulticarrier, QamConstellation::new(cfg.constellation_order)?)?);
    let u = &cfg.urllc;
    let mut table = ResultTable::new(cfg, "urllc");
    for (si, &snr) in cfg.snr_db.iter().enumerate() {
        for (qi, &sir) in u.sir_db.iter().enumerate() {
            // Power is a multiple of each waveform's per-cell signal power.
            let intf = (sir.0 != f64::INFINITY).then(|| NarrowbandInterferer {
                tone_range: u.tones[0]..u.tones[1],
                symbol_range: u.symbols[0]..u.symbols[1],
                power: 1.0 / db_to_lin(sir.0),
                indicated: true,
            });
            let cells = intf.as_ref().map(|i| i.cells(&grid)).unwrap_or_default();
            let frames = map_indexed(cfg.n_trials, cfg.parallel, |f| run_frame(cfg, &modem, intf.as_ref(), &cells, snr, si, qi, f as u64));
            let mut sum = [Tally::default(); 4];
            let (mut erased, mut bits) = (0u64, 0u64);
            for f in frames {
                let f = f?;
                for (a, t) in sum.iter_mut().zip(&f.tallies) {
                    a.merge(t);
                }
                erased += f.erased_bits;
                bits += f.tallies[0].bits;
            }
            for ((wave, indicated), t) in RECEIVERS.iter().zip(&sum) {
                t.push_rows(&mut table, &format!("sir_db={sir};snr_db={snr};waveform={wave};indicated={indicated}"));
            }
            table.push(format!("sir_db={sir};snr_db={snr};waveform=ofdm;indicated=true"), "erasure_rate", erased as f64 / bits as f64, bits, "");
        }
    }
    Ok(table)
}
