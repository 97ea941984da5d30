//! OTFS over a multicarrier core, the OFDM and SC-FDMA baselines, packet
//! allocations and PAPR measurement.
//!
//! The multicarrier core uses an `N`-point inverse DFT scaled by `1/N` per
//! symbol, so that with `cp_length = 0` the OTFS transmitter
//! (`sfft` followed by the multicarrier core) produces exactly `zak_time(x)`.

use std::io::{Read, Write};
use std::ops::Range;

use num_complex::Complex;
use num_traits::Zero;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::lattice::{DdFrame, DelayDopplerGrid, QamConstellation, TfFrame, TimeSignal};
use crate::scalar::Real;
use crate::transforms::Transformer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModemMode {
    /// SFFT pre-processing over the multicarrier core, optional per-symbol CP.
    OtfsMulticarrier,
    /// Direct Zak synthesis, no cyclic prefix.
    OtfsZakCpFree,
    Ofdm,
    ScFdma,
}

/// Transmit/receive pulse. Only the rectangular pulse of the ideal
/// multicarrier overlay is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseShape {
    #[default]
    Rectangular,
}

impl std::str::FromStr for PulseShape {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" => Ok(PulseShape::Rectangular),
            other => invalid(format!("unsupported pulse shape {other:?}; only \"rectangular\" is available")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModemConfig<T> {
    pub grid: DelayDopplerGrid,
    pub cp_length: usize,
    pub mode: ModemMode,
    pub constellation: QamConstellation<T>,
    pub pulse: PulseShape,
}

impl<T: Real> ModemConfig<T> {
    pub fn new(grid: DelayDopplerGrid, cp_length: usize, mode: ModemMode, constellation: QamConstellation<T>) -> Result<Self> {
        if mode == ModemMode::OtfsZakCpFree && cp_length != 0 {
            return invalid(format!("CP-free Zak mode requires cp_length = 0, got {cp_length}"));
        }
        Ok(Self { grid, cp_length, mode, constellation, pulse: PulseShape::Rectangular })
    }

    /// Samples per multicarrier symbol including the prefix.
    pub fn symbol_span(&self) -> usize {
        self.grid.n_delay() + self.cp_length
    }

    pub fn signal_len(&self) -> usize {
        self.grid.m_doppler() * self.symbol_span()
    }

    /// Fraction of transmitted samples that carry data, `N / (N + cp)`.
    pub fn cp_efficiency(&self) -> f64 {
        self.grid.n_delay() as f64 / self.symbol_span() as f64
    }
}

/// Modulator/demodulator with cached FFT plans.
#[derive(Debug, Clone)]
pub struct Modem<T: Real> {
    cfg: ModemConfig<T>,
    tr: Transformer<T>,
}

impl<T: Real> Modem<T> {
    pub fn new(cfg: ModemConfig<T>) -> Self {
        let tr = Transformer::new(cfg.grid);
        Self { cfg, tr }
    }

    pub fn config(&self) -> &ModemConfig<T> {
        &self.cfg
    }

    pub fn grid(&self) -> &DelayDopplerGrid {
        &self.cfg.grid
    }

    pub fn transformer(&self) -> &Transformer<T> {
        &self.tr
    }

    /// Per-symbol `1/N`-scaled inverse DFT with CP prepend, symbol-major.
    pub fn multicarrier_modulate(&self, tf: &TfFrame<T>) -> Result<TimeSignal<T>> {
        if tf.grid() != self.grid() {
            return invalid("time-frequency frame grid does not match modem grid");
        }
        let n = self.grid().n_delay();
        let cp = self.cfg.cp_length;
        let inv_n = T::one() / T::of(n as f64);
        let mut out = Vec::with_capacity(self.cfg.signal_len());
        let mut buf = vec![Complex::zero(); n];
        for sym in 0..self.grid().m_doppler() {
            buf.copy_from_slice(tf.symbol(sym));
            self.tr.ifft_tones(&mut buf);
            for z in buf.iter_mut() {
                *z = *z * inv_n;
            }
            // A CP longer than the symbol wraps around it repeatedly.
            out.extend((0..cp).map(|i| buf[(n - (cp - i) % n) % n]));
            out.extend_from_slice(&buf);
        }
        Ok(TimeSignal::from_parts(out, self.grid().sample_rate(), n, cp))
    }

    pub fn multicarrier_demodulate(&self, s: &TimeSignal<T>) -> Result<TfFrame<T>> {
        let n = self.grid().n_delay();
        let cp = self.cfg.cp_length;
        if s.len() != self.cfg.signal_len() {
            return invalid(format!("expected {} samples, got {}", self.cfg.signal_len(), s.len()));
        }
        if s.symbol_len() != n || s.cp_length() != cp {
            return invalid(format!(
                "signal layout ({} + {}) does not match modem ({n} + {cp})",
                s.symbol_len(),
                s.cp_length()
            ));
        }
        let mut data = Vec::with_capacity(self.grid().len());
        for block in s.samples().chunks_exact(n + cp) {
            let start = data.len();
            data.extend_from_slice(&block[cp..]);
            self.tr.fft_tones(&mut data[start..]);
        }
        TfFrame::from_vec(*self.grid(), data)
    }

    pub fn otfs_modulate(&self, x: &DdFrame<T>) -> Result<TimeSignal<T>> {
        if x.grid() != self.grid() {
            return invalid("delay-Doppler frame grid does not match modem grid");
        }
        match self.cfg.mode {
            ModemMode::OtfsZakCpFree => self.tr.zak_time(x),
            _ => self.multicarrier_modulate(&self.tr.sfft(x)?),
        }
    }

    pub fn otfs_demodulate(&self, s: &TimeSignal<T>) -> Result<DdFrame<T>> {
        match self.cfg.mode {
            ModemMode::OtfsZakCpFree => {
                if s.len() != self.grid().len() {
                    return invalid(format!("expected {} samples, got {}", self.grid().len(), s.len()));
                }
                self.tr.inverse_zak_time(s)
            }
            _ => self.tr.isfft(&self.multicarrier_demodulate(s)?),
        }
    }

    pub fn ofdm_modulate(&self, tf: &TfFrame<T>) -> Result<TimeSignal<T>> {
        self.multicarrier_modulate(tf)
    }

    pub fn ofdm_demodulate(&self, s: &TimeSignal<T>) -> Result<TfFrame<T>> {
        self.multicarrier_demodulate(s)
    }

    /// DFT-spread placement of `symbols` onto a band of tones.
    ///
    /// `symbols` is split into blocks of `band.len()`; block `j` is spread by a
    /// `B`-point DFT onto tones `band.start + hop[j] ..` of multicarrier symbol
    /// `j`. Symbols after the last block are left empty.
    pub fn sc_fdma_frame(&self, symbols: &[Complex<T>], band: Range<usize>, hop_schedule: Option<&[usize]>) -> Result<TfFrame<T>> {
        let n = self.grid().n_delay();
        let m = self.grid().m_doppler();
        let b = band.len();
        if b == 0 || band.end > n {
            return invalid(format!("band {band:?} is empty or exceeds {n} tones"));
        }
        if symbols.len() % b != 0 {
            return invalid(format!("band width {b} does not divide symbol count {}", symbols.len()));
        }
        let blocks = symbols.len() / b;
        if blocks > m {
            return invalid(format!("{blocks} DFT-spread blocks exceed {m} multicarrier symbols"));
        }
        if let Some(h) = hop_schedule {
            if h.len() < blocks {
                return invalid(format!("hop schedule has {} entries for {blocks} blocks", h.len()));
            }
        }
        let fft = FftPlanner::new().plan_fft_forward(b);
        let mut tf = TfFrame::zeros(*self.grid());
        let mut buf = vec![Complex::zero(); b];
        for (j, block) in symbols.chunks_exact(b).enumerate() {
            let offset = hop_schedule.map_or(0, |h| h[j]);
            let start = band.start + offset;
            if start + b > n {
                return invalid(format!("hopped band {}..{} of block {j} exceeds {n} tones", start, start + b));
            }
            buf.copy_from_slice(block);
            fft.process(&mut buf);
            for (i, v) in buf.iter().enumerate() {
                tf.set(j, start + i, *v);
            }
        }
        Ok(tf)
    }

    pub fn sc_fdma_modulate(&self, symbols: &[Complex<T>], band: Range<usize>, hop_schedule: Option<&[usize]>) -> Result<TimeSignal<T>> {
        let tf = self.sc_fdma_frame(symbols, band, hop_schedule)?;
        self.multicarrier_modulate(&tf)
    }

    /// Recovers `n_blocks` DFT-spread blocks from a received frame.
    pub fn sc_fdma_despread(&self, tf: &TfFrame<T>, band: Range<usize>, hop_schedule: Option<&[usize]>, n_blocks: usize) -> Result<Vec<Complex<T>>> {
        let b = band.len();
        let n = self.grid().n_delay();
        if b == 0 || band.end > n || n_blocks > self.grid().m_doppler() {
            return invalid("band or block count out of range");
        }
        let ifft = FftPlanner::new().plan_fft_inverse(b);
        let inv_b = T::one() / T::of(b as f64);
        let mut out = Vec::with_capacity(n_blocks * b);
        for j in 0..n_blocks {
            let start = band.start + hop_schedule.map_or(0, |h| h.get(j).copied().unwrap_or(0));
            if start + b > n {
                return invalid(format!("hopped band of block {j} exceeds {n} tones"));
            }
            let mut buf: Vec<_> = (0..b).map(|i| tf.get(j, start + i)).collect();
            ifft.process(&mut buf);
            out.extend(buf.into_iter().map(|z| z * inv_b));
        }
        Ok(out)
    }

    /// Symbol bodies synthesized on an `N * factor` point grid (zero-padded
    /// spectrum, no CP), for peak measurements closer to the analog waveform.
    /// `factor = 1` reproduces the CP-free samples.
    pub fn oversampled_waveform(&self, tf: &TfFrame<T>, factor: usize) -> Result<Vec<Complex<T>>> {
        if factor == 0 {
            return invalid("oversampling factor must be positive");
        }
        let n = self.grid().n_delay();
        let len = n * factor;
        let ifft = FftPlanner::new().plan_fft_inverse(len);
        let inv_n = T::one() / T::of(n as f64);
        let mut out = Vec::with_capacity(len * self.grid().m_doppler());
        let mut buf = vec![Complex::zero(); len];
        for sym in 0..self.grid().m_doppler() {
            buf.iter_mut().for_each(|z| *z = Complex::zero());
            buf[..n].copy_from_slice(tf.symbol(sym));
            ifft.process(&mut buf);
            out.extend(buf.iter().map(|z| *z * inv_n));
        }
        Ok(out)
    }
}

pub fn otfs_modulate<T: Real>(x: &DdFrame<T>, cfg: &ModemConfig<T>) -> Result<TimeSignal<T>> {
    Modem::new(cfg.clone()).otfs_modulate(x)
}

pub fn otfs_demodulate<T: Real>(s: &TimeSignal<T>, cfg: &ModemConfig<T>) -> Result<DdFrame<T>> {
    Modem::new(cfg.clone()).otfs_demodulate(s)
}

pub fn ofdm_modulate<T: Real>(tf: &TfFrame<T>, cfg: &ModemConfig<T>) -> Result<TimeSignal<T>> {
    Modem::new(cfg.clone()).ofdm_modulate(tf)
}

pub fn ofdm_demodulate<T: Real>(s: &TimeSignal<T>, cfg: &ModemConfig<T>) -> Result<TfFrame<T>> {
    Modem::new(cfg.clone()).ofdm_demodulate(s)
}

pub fn sc_fdma_modulate<T: Real>(
    symbols: &[Complex<T>],
    band: Range<usize>,
    hop_schedule: Option<&[usize]>,
    cfg: &ModemConfig<T>,
) -> Result<TimeSignal<T>> {
    Modem::new(cfg.clone()).sc_fdma_modulate(symbols, band, hop_schedule)
}

/// Which cells of a frame carry a packet's symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Allocation {
    /// All `NM` delay-Doppler cells, row-major.
    FullGrid,
    /// The `N` cells of one Doppler index.
    DopplerTransversal { doppler_index: usize },
    /// A block of time-frequency cells (symbols x tones, filled row-major),
    /// carried in the delay-Doppler frame through the inverse SFFT.
    TfRectangle { symbols: Range<usize>, tones: Range<usize> },
}

impl Allocation {
    pub fn validate(&self, grid: &DelayDopplerGrid) -> Result<()> {
        match self {
            Allocation::FullGrid => Ok(()),
            Allocation::DopplerTransversal { doppler_index } if *doppler_index < grid.m_doppler() => Ok(()),
            Allocation::DopplerTransversal { doppler_index } => {
                invalid(format!("Doppler index {doppler_index} outside 0..{}", grid.m_doppler()))
            }
            Allocation::TfRectangle { symbols, tones } => {
                if symbols.is_empty() || tones.is_empty() || symbols.end > grid.m_doppler() || tones.end > grid.n_delay() {
                    invalid(format!("rectangle {symbols:?} x {tones:?} outside {}x{} grid", grid.m_doppler(), grid.n_delay()))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn cell_count(&self, grid: &DelayDopplerGrid) -> usize {
        match self {
            Allocation::FullGrid => grid.len(),
            Allocation::DopplerTransversal { .. } => grid.n_delay(),
            Allocation::TfRectangle { symbols, tones } => symbols.len() * tones.len(),
        }
    }
}

pub fn allocate<T: Real>(symbols: &[Complex<T>], alloc: &Allocation, grid: &DelayDopplerGrid) -> Result<DdFrame<T>> {
    alloc.validate(grid)?;
    let want = alloc.cell_count(grid);
    if symbols.len() != want {
        return invalid(format!("allocation holds {want} symbols, got {}", symbols.len()));
    }
    match alloc {
        Allocation::FullGrid => DdFrame::from_vec(*grid, symbols.to_vec()),
        Allocation::DopplerTransversal { doppler_index } => {
            let mut x = DdFrame::zeros(*grid);
            for (d, s) in symbols.iter().enumerate() {
                x.set(d, *doppler_index, *s);
            }
            Ok(x)
        }
        Allocation::TfRectangle { symbols: syms, tones } => {
            let mut tf = TfFrame::zeros(*grid);
            let mut it = symbols.iter();
            for sym in syms.clone() {
                for tone in tones.clone() {
                    tf.set(sym, tone, *it.next().expect("count checked"));
                }
            }
            Transformer::new(*grid).isfft(&tf)
        }
    }
}

/// Inverse of [`allocate`]: reads the allocated cells back out.
pub fn deallocate<T: Real>(x: &DdFrame<T>, alloc: &Allocation) -> Result<Vec<Complex<T>>> {
    let grid = *x.grid();
    alloc.validate(&grid)?;
    Ok(match alloc {
        Allocation::FullGrid => x.data().to_vec(),
        Allocation::DopplerTransversal { doppler_index } => (0..grid.n_delay()).map(|d| x.get(d, *doppler_index)).collect(),
        Allocation::TfRectangle { symbols, tones } => {
            let tf = Transformer::new(grid).sfft(x)?;
            symbols.clone().flat_map(|s| tones.clone().map(move |t| (s, t))).map(|(s, t)| tf.get(s, t)).collect()
        }
    })
}

/// `10 log10(max |s|^2 / mean |s|^2)`.
pub fn papr<T: Real>(s: &TimeSignal<T>) -> Result<f64> {
    papr_samples(s.samples())
}

pub fn papr_samples<T: Real>(s: &[Complex<T>]) -> Result<f64> {
    if s.is_empty() {
        return invalid("PAPR of an empty signal");
    }
    let (peak, sum) = s.iter().fold((0.0f64, 0.0f64), |(p, a), z| {
        let e = z.norm_sqr().f64();
        (p.max(e), a + e)
    });
    if sum == 0.0 {
        return invalid("PAPR of an all-zero signal");
    }
    Ok(10.0 * (peak * s.len() as f64 / sum).log10())
}

/// Raw IQ: little-endian interleaved `f64` (re, im) pairs, no header.
pub mod iq {
    use super::*;

    pub fn write_iq<T: Real, W: Write>(mut w: W, samples: &[Complex<T>]) -> Result<()> {
        let mut buf = Vec::with_capacity(samples.len() * 16);
        for z in samples {
            buf.extend_from_slice(&z.re.f64().to_le_bytes());
            buf.extend_from_slice(&z.im.f64().to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_iq<R: Read>(mut r: R) -> Result<Vec<Complex<f64>>> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 16 != 0 {
            return invalid(format!("IQ stream length {} is not a multiple of 16 bytes", bytes.len()));
        }
        Ok(bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex::new(re, im)
            })
            .collect())
    }
}
