//! Frame-level bit <-> IQ conversion for the `modulate` / `demodulate`
//! commands. One frame carries `N * M * log2(order)` bits.

use ddmodem::modem::{ModemConfig, ModemMode};
use ddmodem::{DdFrame, Modem, QamConstellation, TfFrame, TimeSignal, C64};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, HarnessResult};

fn modem(cfg: &ExperimentConfig) -> HarnessResult<Modem> {
    let grid = cfg.grid.grid()?;
    let c = QamConstellation::new(cfg.constellation_order).map_err(|e| HarnessError::config("constellation_order", e.to_string()))?;
    let mc = ModemConfig::new(grid, cfg.grid.cp_length, cfg.modem_mode, c).map_err(|e| HarnessError::config("grid.cp_length", e.to_string()))?;
    Ok(Modem::new(mc))
}

/// Parses ASCII `0`/`1` characters, ignoring whitespace.
pub fn parse_bits(text: &str) -> HarnessResult<Vec<u8>> {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .enumerate()
        .map(|(i, c)| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(HarnessError::Config(format!("bits file: unexpected character {other:?} at bit {i}"))),
        })
        .collect()
}

pub fn format_bits(bits: &[u8]) -> String {
    let mut s: String = bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect();
    s.push('\n');
    s
}

pub fn bits_per_frame(cfg: &ExperimentConfig) -> HarnessResult<usize> {
    let m = modem(cfg)?;
    Ok(m.grid().len() * m.config().constellation.bits_per_symbol())
}

/// Concatenated frames for a whole number of frames' worth of bits.
pub fn modulate_bits(cfg: &ExperimentConfig, bits: &[u8]) -> HarnessResult<Vec<C64>> {
    let m = modem(cfg)?;
    let per = bits_per_frame(cfg)?;
    if bits.is_empty() || bits.len() % per != 0 {
        return Err(HarnessError::Config(format!("bits file holds {} bits; expected a positive multiple of {per} per frame", bits.len())));
    }
    let g = *m.grid();
    let mut out = Vec::new();
    for chunk in bits.chunks_exact(per) {
        let sym = m.config().constellation.map(chunk)?;
        let s = match cfg.modem_mode {
            ModemMode::OtfsMulticarrier | ModemMode::OtfsZakCpFree => m.otfs_modulate(&DdFrame::from_vec(g, sym)?)?,
            ModemMode::Ofdm => m.ofdm_modulate(&TfFrame::from_vec(g, sym)?)?,
            ModemMode::ScFdma => m.sc_fdma_modulate(&sym, 0..g.n_delay(), None)?,
        };
        out.extend(s.into_samples());
    }
    Ok(out)
}

/// Hard-decision bits of concatenated noiseless-channel frames.
pub fn demodulate_iq(cfg: &ExperimentConfig, samples: &[C64]) -> HarnessResult<Vec<u8>> {
    let m = modem(cfg)?;
    let g = *m.grid();
    let (len, cp) = match cfg.modem_mode {
        ModemMode::OtfsZakCpFree => (g.len(), 0),
        _ => (m.config().signal_len(), cfg.grid.cp_length),
    };
    if samples.is_empty() || samples.len() % len != 0 {
        return Err(HarnessError::Config(format!("IQ file holds {} samples; expected a positive multiple of {len} per frame", samples.len())));
    }
    let c = &m.config().constellation;
    let mut bits = Vec::new();
    for frame in samples.chunks_exact(len) {
        let s = TimeSignal::new(frame.to_vec(), g.sample_rate(), g.n_delay(), cp)?;
        let sym = match cfg.modem_mode {
            ModemMode::OtfsMulticarrier | ModemMode::OtfsZakCpFree => m.otfs_demodulate(&s)?.into_vec(),
            ModemMode::Ofdm => m.ofdm_demodulate(&s)?.into_vec(),
            ModemMode::ScFdma => m.sc_fdma_despread(&m.ofdm_demodulate(&s)?, 0..g.n_delay(), None, g.m_doppler())?,
        };
        bits.extend(c.demap(&sym));
    }
    Ok(bits)
}
