//! Link-level OTFS vs OFDM error rates (`ber_sweep`, `mobility`).
//!
//! Both waveforms carry the same payload through the same channel draw and the
//! same noise samples. Noise is set from the nominal transmit power per
//! sample so that every symbol sees `N0 = 10^(-snr/10)` after demodulation.

use ddmodem::channel::{add_noise, apply_channel, random_channel_with_rng, sound_dd_operator, sound_tf_operator, ChannelMode, DdChannel, DdChannelTap};
use ddmodem::detect::{mmse_sinr, ofdm_equalize_pertone, BlockEqualizer, EqualizerConfig};
use ddmodem::modem::{ModemConfig, ModemMode};
use ddmodem::rng::{derive_seed, stream_rng, streams};
use ddmodem::{DdFrame, DelayDopplerGrid, Modem, QamConstellation, TfFrame, C64};
use nalgebra::DMatrix;
use rand::Rng;
use statrs::function::erf::erfc;

use super::{count_bit_errors, db_to_lin, lin_to_db, map_indexed, Tally};
use crate::config::{ChannelSpec, Db, ExperimentConfig};
use crate::error::{HarnessError, HarnessResult};
use crate::report::ResultTable;

struct Link {
    grid: DelayDopplerGrid,
    modem: Modem,
    constellation: QamConstellation,
    snr: Vec<Db>,
}

impl Link {
    fn new(cfg: &ExperimentConfig) -> HarnessResult<Self> {
        let grid = cfg.grid.grid()?;
        let constellation = QamConstellation::new(cfg.constellation_order)?;
        let mc = ModemConfig::new(grid, cfg.grid.cp_length, ModemMode::OtfsMulticarrier, constellation.clone())?;
        Ok(Self { grid, modem: Modem::new(mc), constellation, snr: cfg.snr_db.clone() })
    }

    fn bits_per_frame(&self) -> usize {
        self.grid.len() * self.constellation.bits_per_symbol()
    }
}

/// Receivers for one channel draw at one SNR.
struct Receivers {
    otfs: Option<BlockEqualizer>,
    ofdm_gains: Option<Vec<C64>>,
    n0: f64,
}

/// Measured couplings of one channel draw.
struct Sounded {
    h_dd: DMatrix<C64>,
    tf_gains: Vec<C64>,
}

fn draw_channel(cfg: &ExperimentConfig, grid: &DelayDopplerGrid, block: u64) -> HarnessResult<Option<DdChannel>> {
    let mut rng = stream_rng(cfg.master_seed, streams::CHANNEL, block);
    Ok(match &cfg.channel {
        ChannelSpec::Awgn => None,
        ChannelSpec::Taps { channel } => Some(DdChannel::try_from(channel.clone())?),
        ChannelSpec::TwoPathDoppler { doppler_fraction, delay_samples } => {
            let nu = doppler_fraction * grid.subcarrier_spacing();
            let tau = *delay_samples as f64 / grid.sample_rate();
            let a = std::f64::consts::FRAC_1_SQRT_2;
            let mut phase = || C64::from_polar(a, rng.random::<f64>() * std::f64::consts::TAU);
            let taps = vec![DdChannelTap::new(0.0, nu, phase()), DdChannelTap::new(tau, -nu, phase())];
            Some(DdChannel::new(taps, ChannelMode::Linear)?)
        }
        ChannelSpec::Random { profile, n_taps, max_delay_s, max_doppler_hz } => {
            Some(random_channel_with_rng(*profile, *n_taps, *max_delay_s, *max_doppler_hz, grid, &mut rng)?)
        }
    })
}

fn sound(link: &Link, ch: &DdChannel) -> HarnessResult<Sounded> {
    let h_dd = sound_dd_operator(&link.modem, ch)?;
    let g = sound_tf_operator(&link.modem, ch)?;
    Ok(Sounded { h_dd, tf_gains: (0..g.nrows()).map(|i| g[(i, i)]).collect() })
}

fn receivers(sounded: Option<&Sounded>, snr: Db) -> HarnessResult<Receivers> {
    let n0 = if snr.0 == f64::INFINITY { 0.0 } else { 1.0 / db_to_lin(snr.0) };
    let Some(s) = sounded else {
        return Ok(Receivers { otfs: None, ofdm_gains: None, n0 });
    };
    let eq = EqualizerConfig::mmse(n0)?;
    Ok(Receivers { otfs: Some(BlockEqualizer::new(&s.h_dd, &eq)?), ofdm_gains: Some(s.tf_gains.clone()), n0 })
}

/// Frames equalized per matrix product.
const EQ_BATCH: usize = 256;

/// Transmitted bits, the OTFS delay-Doppler observation (before
/// equalization) and the OFDM bit errors of one frame.
fn observe_frame(link: &Link, ch: Option<&DdChannel>, rx: &Receivers, seed: u64, frame: u64, snr_index: usize) -> HarnessResult<(Vec<u8>, Vec<C64>, u64)> {
    let mut payload = stream_rng(seed, streams::PAYLOAD, frame);
    let bits: Vec<u8> = (0..link.bits_per_frame()).map(|_| payload.random::<bool>() as u8).collect();
    let symbols = link.constellation.map(&bits)?;
    let n = link.grid.n_delay() as f64;
    let m = link.grid.m_doppler() as f64;

    let noise = stream_rng(derive_seed(seed, streams::NOISE, frame), 0, snr_index as u64);
    let through = |s: ddmodem::TimeSignal, power: f64| -> HarnessResult<ddmodem::TimeSignal> {
        let mut r = match ch {
            Some(c) => apply_channel(&s, c)?,
            None => s,
        };
        if rx.n0 > 0.0 {
            add_noise(r.samples_mut(), power * rx.n0, &mut noise.clone());
        }
        Ok(r)
    };

    let x = DdFrame::from_vec(link.grid, symbols.clone())?;
    let y = link.modem.otfs_demodulate(&through(link.modem.otfs_modulate(&x)?, m)?)?;

    let tf = TfFrame::from_vec(link.grid, symbols)?;
    let mut yt = link.modem.ofdm_demodulate(&through(link.modem.ofdm_modulate(&tf)?, 1.0 / n)?)?;
    if let Some(h) = &rx.ofdm_gains {
        yt = ofdm_equalize_pertone(&yt, h, &EqualizerConfig::mmse(rx.n0)?)?.0;
    }
    let ofdm_err = count_bit_errors(&bits, &link.constellation.demap(yt.data()));
    Ok((bits, y.into_vec(), ofdm_err))
}

/// Tallies of one channel block: `[snr] -> (otfs, ofdm)`, plus the worst
/// per-symbol OTFS SINR deviation from the frame mean (dB) per SNR when
/// measured.
struct BlockResult {
    tallies: Vec<(Tally, Tally)>,
    sinr_spread_db: Vec<f64>,
}

fn run_block(cfg: &ExperimentConfig, link: &Link, block: u64, frames: std::ops::Range<u64>, measure_sinr: bool) -> HarnessResult<BlockResult> {
    let ch = draw_channel(cfg, &link.grid, block)?;
    let sounded = ch.as_ref().map(|c| sound(link, c)).transpose()?;
    let bits = link.bits_per_frame() as u64;
    let ids: Vec<u64> = frames.collect();
    let mut tallies = Vec::with_capacity(link.snr.len());
    let mut spread = Vec::with_capacity(link.snr.len());
    for (si, &snr) in link.snr.iter().enumerate() {
        let rx = receivers(sounded.as_ref(), snr)?;
        spread.push(match (&sounded, rx.n0 > 0.0 && measure_sinr) {
            (Some(s), true) => sinr_spread_db(&mmse_sinr(&s.h_dd, rx.n0)?),
            _ => 0.0,
        });
        let (mut t_otfs, mut t_ofdm) = (Tally::default(), Tally::default());
        for chunk in ids.chunks(EQ_BATCH) {
            let mut sent = Vec::with_capacity(chunk.len());
            let mut obs = Vec::with_capacity(chunk.len());
            for &f in chunk {
                let (b, y, ef) = observe_frame(link, ch.as_ref(), &rx, cfg.master_seed, f, si)?;
                t_ofdm.add_frame(ef, bits);
                sent.push(b);
                obs.push(y);
            }
            let est = match &rx.otfs {
                Some(eq) => eq.equalize_batch(&obs)?,
                None => obs,
            };
            for (b, x) in sent.iter().zip(&est) {
                t_otfs.add_frame(count_bit_errors(b, &link.constellation.demap(x)), bits);
            }
        }
        tallies.push((t_otfs, t_ofdm));
    }
    Ok(BlockResult { tallies, sinr_spread_db: spread })
}

/// Largest `|SINR_k - mean SINR|` in dB, the mean taken in linear units.
pub(crate) fn sinr_spread_db(sinr: &[f64]) -> f64 {
    let mean = sinr.iter().sum::<f64>() / sinr.len() as f64;
    let m = lin_to_db(mean);
    sinr.iter().map(|&s| (lin_to_db(s) - m).abs()).fold(0.0, f64::max)
}

/// Per batch: `[snr] -> (otfs, ofdm)` tallies and the SINR spread of the
/// batch's first channel draw.
fn run_batches(cfg: &ExperimentConfig, link: &Link) -> HarnessResult<Vec<BlockResult>> {
    let n = cfg.n_trials as u64;
    let fpc = cfg.frames_per_channel as u64;
    let per_batch = n.div_ceil(fpc);
    let jobs = cfg.batches as u64 * per_batch;
    let blocks = map_indexed(jobs as usize, cfg.parallel, |j| {
        let j = j as u64;
        let (batch, b) = (j / per_batch, j % per_batch);
        let start = batch * n + b * fpc;
        let end = batch * n + ((b + 1) * fpc).min(n);
        run_block(cfg, link, j, start..end, b == 0)
    });
    let mut out = Vec::with_capacity(cfg.batches);
    let mut it = blocks.into_iter();
    for _ in 0..cfg.batches {
        let mut acc = BlockResult { tallies: vec![Default::default(); link.snr.len()], sinr_spread_db: vec![0.0; link.snr.len()] };
        for r in it.by_ref().take(per_batch as usize) {
            let r = r?;
            for (a, t) in acc.tallies.iter_mut().zip(&r.tallies) {
                a.0.merge(&t.0);
                a.1.merge(&t.1);
            }
            for (a, s) in acc.sinr_spread_db.iter_mut().zip(&r.sinr_spread_db) {
                *a = a.max(*s);
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Gaussian tail probability.
pub(crate) fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn run_ber_sweep(cfg: &ExperimentConfig) -> HarnessResult<ResultTable> {
    let link = Link::new(cfg)?;
    let batches = run_batches(&ExperimentConfig { batches: 1, ..cfg.clone() }, &link)?;
    let r = &batches[0];
    let mut table = ResultTable::new(cfg, "ber_sweep");
    for (si, snr) in link.snr.iter().enumerate() {
        let (otfs, ofdm) = &r.tallies[si];
        otfs.push_rows(&mut table, &format!("snr_db={snr};waveform=otfs"));
        ofdm.push_rows(&mut table, &format!("snr_db={snr};waveform=ofdm"));
        if matches!(cfg.channel, ChannelSpec::Awgn) && cfg.constellation_order == 4 {
            let theory = if snr.0 == f64::INFINITY { 0.0 } else { q_function(db_to_lin(snr.0).sqrt()) };
            table.push(format!("snr_db={snr};waveform=theory"), "ber", theory, 0, "");
        }
        if !matches!(cfg.channel, ChannelSpec::Awgn) && snr.0.is_finite() {
            table.push(format!("snr_db={snr};waveform=otfs"), "sinr_spread_db", r.sinr_spread_db[si], otfs.frames, "");
        }
    }
    Ok(table)
}

pub fn run_mobility(cfg: &ExperimentConfig) -> HarnessResult<ResultTable> {
    if matches!(cfg.channel, ChannelSpec::Awgn) {
        return Err(HarnessError::config("channel", "mobility needs a time-varying channel"));
    }
    let link = Link::new(cfg)?;
    let batches = run_batches(cfg, &link)?;
    let mut table = ResultTable::new(cfg, "mobility");
    for (si, snr) in link.snr.iter().enumerate() {
        let mut wins = 0u64;
        let mut spread = 0.0f64;
        let (mut all_otfs, mut all_ofdm) = (Tally::default(), Tally::default());
        for (k, b) in batches.iter().enumerate() {
            let (otfs, ofdm) = &b.tallies[si];
            table.push_rate(&format!("batch={k};snr_db={snr};waveform=otfs"), "ber", otfs.bit_errors, otfs.bits);
            table.push_rate(&format!("batch={k};snr_db={snr};waveform=ofdm"), "ber", ofdm.bit_errors, ofdm.bits);
            wins += u64::from(otfs.ber() < ofdm.ber());
            spread = spread.max(b.sinr_spread_db[si]);
            all_otfs.merge(otfs);
            all_ofdm.merge(ofdm);
        }
        all_otfs.push_rows(&mut table, &format!("snr_db={snr};waveform=otfs"));
        all_ofdm.push_rows(&mut table, &format!("snr_db={snr};waveform=ofdm"));
        let n = batches.len() as u64;
        table.push(format!("snr_db={snr}"), "otfs_win_fraction", wins as f64 / n as f64, n, "");
        if snr.0.is_finite() {
            table.push(format!("snr_db={snr};waveform=otfs"), "sinr_spread_db", spread, n, "");
        }
    }
    Ok(table)
}
