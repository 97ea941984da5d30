//! Delay-Doppler channel: sparse taps applied in the time domain, the exact
//! delay-Doppler coupling they induce on OTFS frames, and additive
//! impairments (AWGN, narrowband puncturing, Wiener phase noise).
//!
//! A tap `(τ_i, ν_i, h_i)` acts as `r(t) = Σ h_i s(t - τ_i) e^{j2πν_i(t - τ_i)}`.
//! For on-grid taps `τ_i = ℓ_i Δτ`, `ν_i = k_i Δν` applied cyclically over one
//! CP-free frame, OTFS demodulation sees the twisted convolution
//!
//! ```text
//! y(n, k) = Σ_i h_i e^{j2π k_i (n - ℓ_i)/(NM)} x̃(n - ℓ_i, k - k_i)
//! ```
//!
//! where `x̃` is the quasi-periodic extension of the transmitted frame.

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{DdFrame, DelayDopplerGrid, TfFrame, TimeSignal};
use crate::modem::Modem;
use crate::rng::{stream_rng, streams};
use crate::scalar::{cis, cis_ratio, from_c64, Real};
use crate::transforms::quasi_periodic_lookup;
use crate::C64;

/// Relative tolerance (in grid bins) for treating a tap as on-grid.
pub const ON_GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdChannelTap {
    /// Seconds, non-negative.
    pub delay: f64,
    /// Hertz, signed.
    pub doppler: f64,
    pub gain: C64,
}

impl DdChannelTap {
    pub fn new(delay: f64, doppler: f64, gain: C64) -> Self {
        Self { delay, doppler, gain }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Frame-cyclic, CP-free, on-grid taps only.
    Cyclic,
    /// Linear convolution over the serialized stream; delay spread absorbed by
    /// per-symbol cyclic prefixes.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdChannel {
    taps: Vec<DdChannelTap>,
    mode: ChannelMode,
}

/// A tap with integer delay and Doppler bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnGridTap {
    pub delay_bin: i64,
    pub doppler_bin: i64,
    pub gain: C64,
}

fn bins(value: f64, resolution: f64) -> Option<i64> {
    let b = value / resolution;
    let r = b.round();
    ((b - r).abs() <= ON_GRID_TOL * r.abs().max(1.0)).then_some(r as i64)
}

impl DdChannel {
    pub fn new(taps: Vec<DdChannelTap>, mode: ChannelMode) -> Result<Self> {
        if taps.is_empty() {
            return invalid("channel needs at least one tap");
        }
        for (i, t) in taps.iter().enumerate() {
            if !(t.delay.is_finite() && t.delay >= 0.0) {
                return invalid(format!("tap {i}: delay must be finite and non-negative, got {}", t.delay));
            }
            if !t.doppler.is_finite() || !t.gain.re.is_finite() || !t.gain.im.is_finite() {
                return invalid(format!("tap {i}: Doppler and gain must be finite"));
            }
        }
        Ok(Self { taps, mode })
    }

    pub fn identity(mode: ChannelMode) -> Self {
        Self { taps: vec![DdChannelTap::new(0.0, 0.0, Complex::new(1.0, 0.0))], mode }
    }

    /// On-grid channel from `(delay_bin, doppler_bin, gain)` triples.
    pub fn on_grid(grid: &DelayDopplerGrid, taps: &[(usize, i64, C64)], mode: ChannelMode) -> Result<Self> {
        let taps = taps
            .iter()
            .map(|&(l, k, h)| DdChannelTap::new(l as f64 * grid.delay_resolution(), k as f64 * grid.doppler_resolution(), h))
            .collect();
        Self::new(taps, mode)
    }

    pub fn taps(&self) -> &[DdChannelTap] {
        &self.taps
    }

    pub fn mode(&self) -> ChannelMode {
        self.mode
    }

    pub fn max_delay(&self) -> f64 {
        self.taps.iter().map(|t| t.delay).fold(0.0, f64::max)
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }

    /// Delay within one delay period and `|ν| < ν_r / 2` for every tap.
    pub fn validate_for_grid(&self, grid: &DelayDopplerGrid) -> Result<()> {
        for (i, t) in self.taps.iter().enumerate() {
            if t.delay >= grid.delay_period() {
                return invalid(format!("tap {i}: delay {} s is not below the delay period {} s", t.delay, grid.delay_period()));
            }
            if t.doppler.abs() >= grid.doppler_period() / 2.0 {
                return invalid(format!(
                    "tap {i}: |Doppler| {} Hz is not below half the Doppler period {} Hz",
                    t.doppler.abs(),
                    grid.doppler_period() / 2.0
                ));
            }
        }
        Ok(())
    }

    /// Integer delay/Doppler bins of every tap, or an error naming the first
    /// off-grid tap.
    pub fn on_grid_taps(&self, grid: &DelayDopplerGrid) -> Result<Vec<OnGridTap>> {
        self.validate_for_grid(grid)?;
        self.taps
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let l = bins(t.delay, grid.delay_resolution());
                let k = bins(t.doppler, grid.doppler_resolution());
                match (l, k) {
                    (Some(delay_bin), Some(doppler_bin)) => Ok(OnGridTap { delay_bin, doppler_bin, gain: t.gain }),
                    _ => invalid(format!("tap {i} ({} s, {} Hz) is not on the delay-Doppler grid", t.delay, t.doppler)),
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ChannelDoc::from(self)).expect("channel document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ChannelDoc = serde_json::from_str(text)
            .map_err(|e| crate::Error::InvalidParameter(format!("channel JSON: {e}")))?;
        doc.try_into()
    }
}

/// JSON form: `{mode, taps: [{delay_s, doppler_hz, gain_re, gain_im}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    pub mode: ChannelMode,
    pub taps: Vec<TapDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapDoc {
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub gain_re: f64,
    pub gain_im: f64,
}

impl From<&DdChannel> for ChannelDoc {
    fn from(ch: &DdChannel) -> Self {
        Self {
            mode: ch.mode,
            taps: ch
                .taps
                .iter()
                .map(|t| TapDoc { delay_s: t.delay, doppler_hz: t.doppler, gain_re: t.gain.re, gain_im: t.gain.im })
                .collect(),
        }
    }
}

impl TryFrom<ChannelDoc> for DdChannel {
    type Error = crate::Error;

    fn try_from(doc: ChannelDoc) -> Result<Self> {
        let taps = doc
            .taps
            .into_iter()
            .map(|t| DdChannelTap::new(t.delay_s, t.doppler_hz, Complex::new(t.gain_re, t.gain_im)))
            .collect();
        DdChannel::new(taps, doc.mode)
    }
}

/// Passes a time signal through the channel.
///
/// Cyclic mode treats the CP-free signal as one period of a periodic waveform
/// (Doppler resolution `fs / len`). Linear mode rounds delays to whole samples,
/// applies Doppler as a continuous phase ramp and requires the per-symbol CP
/// to cover the largest delay.
pub fn apply_channel<T: Real>(s: &TimeSignal<T>, ch: &DdChannel) -> Result<TimeSignal<T>> {
    let fs = s.sample_rate();
    let len = s.len();
    if len == 0 {
        return Ok(s.clone());
    }
    let symbol_period = s.symbol_len() as f64 / fs;
    let doppler_period = fs / s.symbol_len() as f64;
    for (i, t) in ch.taps.iter().enumerate() {
        if t.delay >= symbol_period {
            return invalid(format!("tap {i}: delay {} s exceeds the delay period {symbol_period} s", t.delay));
        }
        if t.doppler.abs() >= doppler_period / 2.0 {
            return invalid(format!("tap {i}: |Doppler| {} Hz exceeds half the Doppler period", t.doppler.abs()));
        }
    }
    let mut out = vec![Complex::<T>::zero(); len];
    match ch.mode {
        ChannelMode::Cyclic => {
            if s.cp_length() != 0 {
                return invalid("cyclic channel mode needs a CP-free signal");
            }
            let dnu = fs / len as f64;
            let nl = len as i64;
            for (i, t) in ch.taps.iter().enumerate() {
                let (Some(l), Some(k)) = (bins(t.delay * fs, 1.0), bins(t.doppler, dnu)) else {
                    return invalid(format!("tap {i} ({} s, {} Hz) is off-grid; cyclic mode needs on-grid taps", t.delay, t.doppler));
                };
                let h: Complex<T> = from_c64(t.gain);
                for (tt, o) in out.iter_mut().enumerate() {
                    let src = (tt as i64 - l).rem_euclid(nl) as usize;
                    *o = *o + h * s.samples()[src] * cis_ratio::<T>(k * (tt as i64 - l), nl);
                }
            }
        }
        ChannelMode::Linear => {
            for (i, t) in ch.taps.iter().enumerate() {
                let l = (t.delay * fs).round() as usize;
                if l > s.cp_length() && s.n_symbols() > 1 {
                    return invalid(format!(
                        "tap {i}: delay of {l} samples exceeds the cyclic prefix ({} samples)",
                        s.cp_length()
                    ));
                }
                let step = t.doppler / fs;
                let rotor = cis::<f64>(step.fract());
                let mut phasor = Complex::new(1.0, 0.0);
                for tt in l..len {
                    // Rotate incrementally, resyncing to the exact phase to bound drift.
                    if (tt - l) % 64 == 0 {
                        phasor = cis::<f64>((step * (tt - l) as f64).fract());
                    }
                    out[tt] = out[tt] + from_c64::<T>(t.gain * phasor) * s.samples()[tt - l];
                    phasor *= rotor;
                }
            }
        }
    }
    s.with_samples(out)
}

/// Delay-Doppler kernel of an on-grid channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DdKernel {
    grid: DelayDopplerGrid,
    taps: Vec<OnGridTap>,
}

impl DdKernel {
    pub fn grid(&self) -> &DelayDopplerGrid {
        &self.grid
    }

    pub fn taps(&self) -> &[OnGridTap] {
        &self.taps
    }

    /// `N x M` matrix with `h_i` accumulated at `(ℓ_i mod N, k_i mod M)`.
    pub fn h_dd(&self) -> DdFrame<f64> {
        let mut h = DdFrame::zeros(self.grid);
        let n = self.grid.n_delay() as i64;
        let m = self.grid.m_doppler() as i64;
        for t in &self.taps {
            let (l, k) = (t.delay_bin.rem_euclid(n) as usize, t.doppler_bin.rem_euclid(m) as usize);
            h.set(l, k, h.get(l, k) + t.gain);
        }
        h
    }

    /// The `NM x NM` coupling operator; column `j = n*M + m` is the response
    /// to a unit symbol at `(n, m)`.
    pub fn operator_matrix(&self) -> DMatrix<C64> {
        let nm = self.grid.len();
        let mut op = DMatrix::zeros(nm, nm);
        for j in 0..nm {
            let x = DdFrame::<f64>::impulse(self.grid, j / self.grid.m_doppler(), j % self.grid.m_doppler());
            let y = twisted_convolve_unchecked(self, &x);
            for (i, v) in y.data().iter().enumerate() {
                op[(i, j)] = *v;
            }
        }
        op
    }
}

pub fn effective_dd_coupling(ch: &DdChannel, grid: &DelayDopplerGrid) -> Result<DdKernel> {
    if ch.mode != ChannelMode::Cyclic {
        return invalid("delay-Doppler coupling is exact only for cyclic channels");
    }
    Ok(DdKernel { grid: *grid, taps: ch.on_grid_taps(grid)? })
}

fn twisted_convolve_unchecked<T: Real>(kernel: &DdKernel, x: &DdFrame<T>) -> DdFrame<T> {
    let g = kernel.grid;
    let (n, m) = (g.n_delay() as i64, g.m_doppler() as i64);
    let nm = n * m;
    let mut y = DdFrame::zeros(g);
    for t in &kernel.taps {
        let h: Complex<T> = from_c64(t.gain);
        for d in 0..n {
            let twist = h * cis_ratio::<T>(t.doppler_bin * (d - t.delay_bin), nm);
            for k in 0..m {
                let v = quasi_periodic_lookup(x, d - t.delay_bin, k - t.doppler_bin);
                let (du, ku) = (d as usize, k as usize);
                y.set(du, ku, y.get(du, ku) + twist * v);
            }
        }
    }
    y
}

/// Applies the delay-Doppler coupling of an on-grid cyclic channel directly to
/// a frame; equals demodulate(channel(modulate(x))) for CP-free OTFS.
pub fn dd_twisted_convolve<T: Real>(kernel: &DdKernel, x: &DdFrame<T>) -> Result<DdFrame<T>> {
    if x.grid() != &kernel.grid {
        return invalid("kernel and frame grids differ");
    }
    Ok(twisted_convolve_unchecked(kernel, x))
}

fn sound<F>(nm: usize, mut column: F) -> Result<DMatrix<C64>>
where
    F: FnMut(usize) -> Result<Vec<C64>>,
{
    let mut op = DMatrix::zeros(nm, nm);
    for j in 0..nm {
        for (i, v) in column(j)?.into_iter().enumerate() {
            op[(i, j)] = v;
        }
    }
    Ok(op)
}

/// Delay-Doppler in, delay-Doppler out coupling measured by sounding every
/// cell through `modem -> channel -> demodulate`.
pub fn sound_dd_operator(modem: &Modem<f64>, ch: &DdChannel) -> Result<DMatrix<C64>> {
    let g = *modem.grid();
    sound(g.len(), |j| {
        let x = DdFrame::impulse(g, j / g.m_doppler(), j % g.m_doppler());
        let r = apply_channel(&modem.otfs_modulate(&x)?, ch)?;
        Ok(modem.otfs_demodulate(&r)?.into_vec())
    })
}

/// Delay-Doppler in, time-frequency observations out.
pub fn sound_dd_to_tf_operator(modem: &Modem<f64>, ch: &DdChannel) -> Result<DMatrix<C64>> {
    let g = *modem.grid();
    sound(g.len(), |j| {
        let x = DdFrame::impulse(g, j / g.m_doppler(), j % g.m_doppler());
        let r = apply_channel(&modem.otfs_modulate(&x)?, ch)?;
        Ok(modem.multicarrier_demodulate(&r)?.into_vec())
    })
}

/// Time-frequency in, time-frequency out coupling of the multicarrier core.
pub fn sound_tf_operator(modem: &Modem<f64>, ch: &DdChannel) -> Result<DMatrix<C64>> {
    let g = *modem.grid();
    sound(g.len(), |j| {
        let mut tf = TfFrame::zeros(g);
        tf.data_mut()[j] = Complex::new(1.0, 0.0);
        let r = apply_channel(&modem.multicarrier_modulate(&tf)?, ch)?;
        Ok(modem.multicarrier_demodulate(&r)?.into_vec())
    })
}

/// Adds `CN(0, variance)` noise in place.
pub fn add_noise<T: Real, R: Rng + ?Sized>(samples: &mut [Complex<T>], variance: f64, rng: &mut R) {
    let sigma = (variance / 2.0).sqrt();
    for z in samples {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z = *z + Complex::new(T::of(sigma * re), T::of(sigma * im));
    }
}

/// Complex white Gaussian noise at `snr_db` relative to the signal's measured
/// mean power. `f64::INFINITY` returns the signal unchanged.
pub fn awgn_with_rng<T: Real, R: Rng + ?Sized>(s: &TimeSignal<T>, snr_db: f64, rng: &mut R) -> Result<TimeSignal<T>> {
    if snr_db == f64::INFINITY {
        return Ok(s.clone());
    }
    if snr_db.is_nan() {
        return invalid("SNR is NaN");
    }
    let p = s.mean_power();
    if p == 0.0 {
        return invalid("AWGN relative to an all-zero signal");
    }
    let mut out = s.clone();
    add_noise(out.samples_mut(), p / 10f64.powf(snr_db / 10.0), rng);
    Ok(out)
}

pub fn awgn<T: Real>(s: &TimeSignal<T>, snr_db: f64, rng_seed: u64) -> Result<TimeSignal<T>> {
    awgn_with_rng(s, snr_db, &mut stream_rng(rng_seed, streams::NOISE, 0))
}

/// A high-priority packet punctured into a block of time-frequency cells.
#[derive(Debug, Clone, PartialEq)]
pub struct NarrowbandInterferer {
    pub tone_range: std::ops::Range<usize>,
    pub symbol_range: std::ops::Range<usize>,
    /// Per-cell power of the replacement content, in the frame's own units.
    pub power: f64,
    /// Whether the receiver is told which cells were punctured.
    pub indicated: bool,
}

impl NarrowbandInterferer {
    pub fn validate(&self, grid: &DelayDopplerGrid) -> Result<()> {
        if self.tone_range.end > grid.n_delay() || self.symbol_range.end > grid.m_doppler() || self.tone_range.start > self.tone_range.end || self.symbol_range.start > self.symbol_range.end {
            return invalid(format!(
                "interferer {:?} x {:?} outside {} tones x {} symbols",
                self.tone_range,
                self.symbol_range,
                grid.n_delay(),
                grid.m_doppler()
            ));
        }
        if !(self.power.is_finite() && self.power >= 0.0) {
            return invalid(format!("interferer power must be finite and non-negative, got {}", self.power));
        }
        Ok(())
    }

    /// Row-major indices (`symbol * N + tone`) of the punctured cells.
    pub fn cells(&self, grid: &DelayDopplerGrid) -> Vec<usize> {
        let n = grid.n_delay();
        self.symbol_range.clone().flat_map(|s| self.tone_range.clone().map(move |t| s * n + t)).collect()
    }
}

pub fn inject_interference_with_rng<T: Real, R: Rng + ?Sized>(x: &TfFrame<T>, intf: &NarrowbandInterferer, rng: &mut R) -> Result<TfFrame<T>> {
    intf.validate(x.grid())?;
    let amp = (intf.power / 2.0).sqrt();
    let mut out = x.clone();
    for c in intf.cells(x.grid()) {
        let re = if rng.random::<bool>() { amp } else { -amp };
        let im = if rng.random::<bool>() { amp } else { -amp };
        out.data_mut()[c] = Complex::new(T::of(re), T::of(im));
    }
    Ok(out)
}

pub fn inject_interference<T: Real>(x: &TfFrame<T>, intf: &NarrowbandInterferer, rng_seed: u64) -> Result<TfFrame<T>> {
    inject_interference_with_rng(x, intf, &mut stream_rng(rng_seed, streams::INTERFERENCE, 0))
}

/// Wiener phase noise: `φ[0] = 0`, `φ[k+1] = φ[k] + N(0, linewidth_variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseNoiseProcess {
    pub linewidth_variance: f64,
}

impl PhaseNoiseProcess {
    pub fn new(linewidth_variance: f64) -> Result<Self> {
        if !(linewidth_variance.is_finite() && linewidth_variance >= 0.0) {
            return invalid(format!("phase-noise variance must be non-negative, got {linewidth_variance}"));
        }
        Ok(Self { linewidth_variance })
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        let sd = self.linewidth_variance.sqrt();
        let mut phi = 0.0;
        (0..len)
            .map(|i| {
                if i > 0 {
                    let z: f64 = StandardNormal.sample(rng);
                    phi += sd * z;
                }
                phi
            })
            .collect()
    }
}

pub fn apply_phase_noise_with_rng<T: Real, R: Rng + ?Sized>(s: &TimeSignal<T>, pn: &PhaseNoiseProcess, rng: &mut R) -> Result<TimeSignal<T>> {
    PhaseNoiseProcess::new(pn.linewidth_variance)?;
    if pn.linewidth_variance == 0.0 {
        return Ok(s.clone());
    }
    let path = pn.sample_path(s.len(), rng);
    let out = s
        .samples()
        .iter()
        .zip(path)
        .map(|(z, phi)| {
            let (sin, cos) = phi.sin_cos();
            *z * Complex::new(T::of(cos), T::of(sin))
        })
        .collect();
    s.with_samples(out)
}

pub fn apply_phase_noise<T: Real>(s: &TimeSignal<T>, pn: &PhaseNoiseProcess, rng_seed: u64) -> Result<TimeSignal<T>> {
    apply_phase_noise_with_rng(s, pn, &mut stream_rng(rng_seed, streams::PHASE_NOISE, 0))
}

/// Distribution of tap delays for [`random_channel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayProfile {
    /// Delays uniform on `[0, max_delay]`.
    Uniform,
    /// Delays exponentially distributed with mean (and RMS spread)
    /// `rms_delay_spread`, truncated at `max_delay`.
    Exponential { rms_delay_spread: f64 },
}

/// Random linear-mode channel: delays i.i.d. from `profile`, Doppler
/// `max_doppler cos θ` with `θ` uniform, complex Gaussian gains normalized to
/// unit total power.
pub fn random_channel_with_rng<R: Rng + ?Sized>(
    profile: DelayProfile,
    n_taps: usize,
    max_delay: f64,
    max_doppler: f64,
    grid: &DelayDopplerGrid,
    rng: &mut R,
) -> Result<DdChannel> {
    if n_taps == 0 {
        return invalid("random channel needs at least one tap");
    }
    if !(max_delay >= 0.0 && max_delay < grid.delay_period()) {
        return invalid(format!("max delay {max_delay} s must lie in [0, {})", grid.delay_period()));
    }
    if !(max_doppler >= 0.0 && max_doppler < grid.doppler_period() / 2.0) {
        return invalid(format!("max Doppler {max_doppler} Hz must lie in [0, {})", grid.doppler_period() / 2.0));
    }
    let exp = match profile {
        DelayProfile::Uniform => None,
        DelayProfile::Exponential { rms_delay_spread } => {
            if !(rms_delay_spread > 0.0 && rms_delay_spread.is_finite()) {
                return invalid(format!("RMS delay spread must be positive, got {rms_delay_spread}"));
            }
            Some(Exp::new(1.0 / rms_delay_spread).expect("positive rate"))
        }
    };
    let mut taps = Vec::with_capacity(n_taps);
    for _ in 0..n_taps {
        let delay = match &exp {
            None => rng.random::<f64>() * max_delay,
            Some(e) => loop {
                let d = e.sample(rng);
                if d <= max_delay {
                    break d;
                }
            },
        };
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        taps.push(DdChannelTap::new(delay, max_doppler * theta.cos(), Complex::new(re, im)));
    }
    let p: f64 = taps.iter().map(|t| t.gain.norm_sqr()).sum();
    let norm = p.sqrt();
    for t in &mut taps {
        t.gain /= norm;
    }
    DdChannel::new(taps, ChannelMode::Linear)
}

pub fn random_channel(
    profile: DelayProfile,
    n_taps: usize,
    max_delay: f64,
    max_doppler: f64,
    grid: &DelayDopplerGrid,
    rng_seed: u64,
) -> Result<DdChannel> {
    random_channel_with_rng(profile, n_taps, max_delay, max_doppler, grid, &mut stream_rng(rng_seed, streams::CHANNEL, 0))
}

/// Cyclic channel with `n_taps` distinct on-grid taps, delay bins in
/// `0..=max_delay_bins`, Doppler bins in `-max_doppler_bins..=max_doppler_bins`
/// and unit-total-power Gaussian gains.
pub fn random_on_grid_channel<R: Rng + ?Sized>(
    grid: &DelayDopplerGrid,
    n_taps: usize,
    max_delay_bins: usize,
    max_doppler_bins: usize,
    rng: &mut R,
) -> Result<DdChannel> {
    let cells = (max_delay_bins + 1) * (2 * max_doppler_bins + 1);
    if n_taps == 0 || n_taps > cells {
        return invalid(format!("cannot place {n_taps} distinct taps in {cells} cells"));
    }
    if max_delay_bins >= grid.n_delay() || 2 * max_doppler_bins >= grid.m_doppler() {
        return invalid("tap support exceeds the grid");
    }
    let mut chosen: Vec<(usize, i64)> = Vec::with_capacity(n_taps);
    while chosen.len() < n_taps {
        let l = rng.random_range(0..=max_delay_bins);
        let k = rng.random_range(-(max_doppler_bins as i64)..=max_doppler_bins as i64);
        if !chosen.contains(&(l, k)) {
            chosen.push((l, k));
        }
    }
    let mut gains: Vec<C64> = (0..n_taps)
        .map(|_| Complex::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let norm = gains.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
    gains.iter_mut().for_each(|g| *g /= norm);
    let taps: Vec<_> = chosen.into_iter().zip(gains).map(|((l, k), h)| (l, k, h)).collect();
    DdChannel::on_grid(grid, &taps, ChannelMode::Cyclic)
}
