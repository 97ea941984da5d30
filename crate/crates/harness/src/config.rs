//! Experiment configuration (JSON) and its validation.

use std::path::PathBuf;

use ddmodem::channel::{ChannelDoc, DelayProfile};
use ddmodem::mimo::RingScenario;
use ddmodem::modem::ModemMode;
use ddmodem::DelayDopplerGrid;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HarnessError, HarnessResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BerSweep,
    CondHist,
    PrecodeCdf,
    Papr,
    Urllc,
    Mobility,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BerSweep => "ber_sweep",
            ExperimentKind::CondHist => "cond_hist",
            ExperimentKind::PrecodeCdf => "precode_cdf",
            ExperimentKind::Papr => "papr",
            ExperimentKind::Urllc => "urllc",
            ExperimentKind::Mobility => "mobility",
        }
    }
}

/// A decibel value that may be `+∞`, written in JSON as a number or as the
/// string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Db(pub f64);

impl Serialize for Db {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Db {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Db(v)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity" | "Infinity") => Ok(Db(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

impl std::fmt::Display for Db {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 == f64::INFINITY {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n_delay: usize,
    pub m_doppler: usize,
    pub subcarrier_spacing_hz: f64,
    /// Cyclic prefix per multicarrier symbol, in samples.
    pub cp_length: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_delay: 16, m_doppler: 16, subcarrier_spacing_hz: 15e3, cp_length: 4 }
    }
}

impl GridSpec {
    pub fn grid(&self) -> HarnessResult<DelayDopplerGrid> {
        DelayDopplerGrid::with_subcarrier_spacing(self.n_delay, self.m_doppler, self.subcarrier_spacing_hz)
            .map_err(|e| HarnessError::config("grid", e.to_string()))
    }
}

/// Propagation model for link-level experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Noise only.
    Awgn,
    /// A fixed tap list.
    Taps { channel: ChannelDoc },
    /// Two equal-power taps `(0, +f Δf)` and `(delay_samples, -f Δf)` with
    /// uniform random phases, redrawn every `frames_per_channel` frames.
    TwoPathDoppler { doppler_fraction: f64, delay_samples: usize },
    /// Random linear-mode channel redrawn every `frames_per_channel` frames.
    Random { profile: DelayProfile, n_taps: usize, max_delay_s: f64, max_doppler_hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CondSpec {
    pub strips: usize,
    pub n_bs_antennas: usize,
    pub n_users: usize,
    pub histogram_bins: usize,
}

impl Default for CondSpec {
    fn default() -> Self {
        Self { strips: 200, n_bs_antennas: 4, n_users: 4, histogram_bins: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecodeSpec {
    pub scenario: RingScenario,
    pub n_tones: usize,
    pub n_symbols: usize,
    pub subcarrier_spacing_hz: f64,
    pub drops: usize,
    pub reference_snr_db: f64,
}

impl Default for PrecodeSpec {
    fn default() -> Self {
        // 10 MHz of 15 kHz tones over a 1 ms packet.
        Self {
            scenario: RingScenario::reference(0),
            n_tones: 666,
            n_symbols: 15,
            subcarrier_spacing_hz: 15e3,
            drops: 200,
            reference_snr_db: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaprSpec {
    pub oversampling: usize,
    /// `[tones, symbols]` of the narrow-allocation grid (Doppler-transversal
    /// OTFS and SC-FDMA).
    pub narrow_grid: [usize; 2],
    /// Tones occupied by SC-FDMA, starting at tone 0.
    pub sc_fdma_tones: usize,
    /// `[tones, symbols]` of the dense OTFS / OFDM grid.
    pub dense_grid: [usize; 2],
}

impl Default for PaprSpec {
    fn default() -> Self {
        Self { oversampling: 4, narrow_grid: [12, 14], sc_fdma_tones: 12, dense_grid: [16, 16] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UrllcSpec {
    /// Signal-to-interference ratios per punctured cell; `"inf"` means no
    /// interferer.
    pub sir_db: Vec<Db>,
    pub tones: [usize; 2],
    pub symbols: [usize; 2],
}

impl Default for UrllcSpec {
    fn default() -> Self {
        Self { sir_db: vec![Db(0.0), Db(-5.0), Db(-10.0)], tones: [10, 14], symbols: [5, 7] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub grid: GridSpec,
    pub constellation_order: usize,
    pub snr_db: Vec<Db>,
    /// Frames per SNR point (per batch for `mobility`).
    pub n_trials: usize,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub channel: ChannelSpec,
    pub frames_per_channel: usize,
    /// Independent batches (`mobility` only).
    pub batches: usize,
    /// Modulator for `modulate` / `demodulate`.
    pub modem_mode: ModemMode,
    pub parallel: bool,
    pub cond: CondSpec,
    pub precode: PrecodeSpec,
    pub papr: PaprSpec,
    pub urllc: UrllcSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            grid: GridSpec::default(),
            constellation_order: 4,
            snr_db: vec![Db(10.0)],
            n_trials: 1000,
            master_seed: 1,
            output_path: None,
            channel: ChannelSpec::Awgn,
            frames_per_channel: 100,
            batches: 1,
            modem_mode: ModemMode::OtfsMulticarrier,
            parallel: true,
            cond: CondSpec::default(),
            precode: PrecodeSpec::default(),
            papr: PaprSpec::default(),
            urllc: UrllcSpec::default(),
        }
    }
}

fn check(ok: bool, field: &str, msg: impl Into<String>) -> HarnessResult<()> {
    if ok {
        Ok(())
    } else {
        Err(HarnessError::config(field, msg))
    }
}

impl ExperimentConfig {
    /// Parses JSON, reporting syntax errors with line and column.
    pub fn from_json(text: &str) -> HarnessResult<Self> {
        serde_json::from_str(text).map_err(|e| {
            HarnessError::Config(format!("invalid configuration JSON at line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    /// Canonical JSON used for hashing and manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    pub fn kind(&self) -> HarnessResult<ExperimentKind> {
        self.experiment.ok_or_else(|| HarnessError::config("experiment", "missing"))
    }

    pub fn validate(&self) -> HarnessResult<()> {
        let kind = self.kind()?;
        check(self.n_trials >= 1, "n_trials", "must be at least 1")?;
        match kind {
            ExperimentKind::BerSweep | ExperimentKind::Mobility => self.validate_link()?,
            ExperimentKind::CondHist => {
                self.grid.grid()?;
                check(self.cond.strips >= 1, "cond.strips", "must be at least 1")?;
                check(self.cond.n_bs_antennas >= 1 && self.cond.n_users >= 1, "cond", "antenna and user counts must be positive")?;
                check(self.cond.histogram_bins >= 1, "cond.histogram_bins", "must be at least 1")?;
            }
            ExperimentKind::PrecodeCdf => {
                let p = &self.precode;
                p.scenario.validate().map_err(|e| HarnessError::config("precode.scenario", e.to_string()))?;
                check(p.scenario.n_bs_antennas >= p.scenario.n_users, "precode.scenario", "needs at least as many antennas as users")?;
                check(p.drops >= 1, "precode.drops", "must be at least 1")?;
                check(p.n_tones >= 1 && p.n_symbols >= 1, "precode", "n_tones and n_symbols must be positive")?;
                check(p.subcarrier_spacing_hz > 0.0, "precode.subcarrier_spacing_hz", "must be positive")?;
                check(p.reference_snr_db.is_finite(), "precode.reference_snr_db", "must be finite")?;
            }
            ExperimentKind::Papr => {
                let p = &self.papr;
                check(p.oversampling >= 1, "papr.oversampling", "must be at least 1")?;
                check(p.narrow_grid.iter().chain(&p.dense_grid).all(|&v| v >= 1), "papr", "grid sizes must be positive")?;
                check(
                    p.sc_fdma_tones >= 1 && p.sc_fdma_tones <= p.narrow_grid[0],
                    "papr.sc_fdma_tones",
                    format!("must lie in 1..={}", p.narrow_grid[0]),
                )?;
            }
            ExperimentKind::Urllc => {
                let g = self.grid.grid()?;
                self.validate_snr()?;
                check(!self.urllc.sir_db.is_empty(), "urllc.sir_db", "must not be empty")?;
                check(self.urllc.sir_db.iter().all(|d| !d.0.is_nan() && d.0 > f64::NEG_INFINITY), "urllc.sir_db", "values must be numbers or \"inf\"")?;
                let [t0, t1] = self.urllc.tones;
                let [s0, s1] = self.urllc.symbols;
                check(t0 < t1 && t1 <= g.n_delay(), "urllc.tones", format!("[{t0}, {t1}) must be a non-empty range within {} tones", g.n_delay()))?;
                check(s0 < s1 && s1 <= g.m_doppler(), "urllc.symbols", format!("[{s0}, {s1}) must be a non-empty range within {} symbols", g.m_doppler()))?;
                check(self.constellation_order == 4, "constellation_order", "URLLC experiment uses QPSK (4)")?;
            }
        }
        Ok(())
    }

    fn validate_snr(&self) -> HarnessResult<()> {
        check(!self.snr_db.is_empty(), "snr_db", "must not be empty")?;
        check(self.snr_db.iter().all(|d| !d.0.is_nan() && d.0 > f64::NEG_INFINITY), "snr_db", "values must be numbers or \"inf\"")
    }

    fn validate_link(&self) -> HarnessResult<()> {
        let g = self.grid.grid()?;
        self.validate_snr()?;
        check(
            matches!(self.constellation_order, 4 | 16 | 64 | 256),
            "constellation_order",
            format!("must be 4, 16, 64 or 256, got {}", self.constellation_order),
        )?;
        check(self.frames_per_channel >= 1, "frames_per_channel", "must be at least 1")?;
        check(self.batches >= 1, "batches", "must be at least 1")?;
        check(self.grid.cp_length <= g.n_delay(), "grid.cp_length", "must not exceed the symbol length")?;
        check(g.len() <= 4096, "grid", "block equalization is limited to N*M <= 4096")?;
        let cp_s = self.grid.cp_length as f64 * g.delay_resolution();
        match &self.channel {
            ChannelSpec::Awgn => {}
            ChannelSpec::Taps { channel } => {
                let ch = ddmodem::channel::DdChannel::try_from(channel.clone()).map_err(|e| HarnessError::config("channel.channel", e.to_string()))?;
                ch.validate_for_grid(&g).map_err(|e| HarnessError::config("channel.channel", e.to_string()))?;
                if ch.mode() == ddmodem::channel::ChannelMode::Cyclic {
                    check(self.grid.cp_length == 0, "grid.cp_length", "cyclic channels need a CP-free frame")?;
                    ch.on_grid_taps(&g).map_err(|e| HarnessError::config("channel.channel", e.to_string()))?;
                } else {
                    check(ch.max_delay() <= cp_s + 0.5 * g.delay_resolution(), "channel.channel", "largest delay exceeds the cyclic prefix")?;
                }
            }
            ChannelSpec::TwoPathDoppler { doppler_fraction, delay_samples } => {
                check(*doppler_fraction >= 0.0 && *doppler_fraction < 0.5 * g.m_doppler() as f64, "channel.doppler_fraction", "must lie in [0, M/2)")?;
                check(*delay_samples <= self.grid.cp_length, "channel.delay_samples", "must not exceed grid.cp_length")?;
            }
            ChannelSpec::Random { n_taps, max_delay_s, max_doppler_hz, .. } => {
                check(*n_taps >= 1, "channel.n_taps", "must be at least 1")?;
                check(*max_delay_s >= 0.0 && *max_delay_s <= cp_s, "channel.max_delay_s", format!("must lie in [0, {cp_s}] (the cyclic prefix)"))?;
                check(*max_doppler_hz >= 0.0 && *max_doppler_hz < g.doppler_period() / 2.0, "channel.max_doppler_hz", "must be below half the Doppler period")?;
            }
        }
        Ok(())
    }
}
