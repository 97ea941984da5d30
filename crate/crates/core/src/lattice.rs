//! Delay-Doppler and reciprocal time-frequency grids, frame containers, the
//! baseband sample container and the Gray-coded QAM mapper.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Tolerance on `delay_period * doppler_period == 1`.
pub const PERIOD_PRODUCT_TOL: f64 = 1e-12;

/// An `N x M` delay-Doppler lattice with periods `(τ_r, ν_r)`, `τ_r ν_r = 1`.
///
/// The reciprocal time-frequency grid has `M` multicarrier symbols of `N`
/// tones: tone spacing `Δf = 1/τ_r`, symbol duration `Δt = 1/ν_r`. Sampling
/// the waveform at `N Δf` gives one sample per delay bin (`Δτ`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDopplerGrid {
    n_delay: usize,
    m_doppler: usize,
    delay_period: f64,
    doppler_period: f64,
}

impl DelayDopplerGrid {
    pub fn new(n_delay: usize, m_doppler: usize, delay_period: f64) -> Result<Self> {
        if n_delay == 0 || m_doppler == 0 {
            return invalid(format!(
                "grid dimensions must be positive, got N={n_delay} M={m_doppler}"
            ));
        }
        if !(delay_period.is_finite() && delay_period > 0.0) {
            return invalid(format!("delay period must be positive, got {delay_period}"));
        }
        let doppler_period = 1.0 / delay_period;
        if !doppler_period.is_finite() {
            return invalid("delay period too small: Doppler period overflows");
        }
        Ok(Self { n_delay, m_doppler, delay_period, doppler_period })
    }

    /// Grid whose reciprocal tone spacing is `subcarrier_spacing` hertz.
    pub fn with_subcarrier_spacing(n_delay: usize, m_doppler: usize, subcarrier_spacing: f64) -> Result<Self> {
        if !(subcarrier_spacing.is_finite() && subcarrier_spacing > 0.0) {
            return invalid(format!("subcarrier spacing must be positive, got {subcarrier_spacing}"));
        }
        Self::new(n_delay, m_doppler, 1.0 / subcarrier_spacing)
    }

    /// N, points along delay (and tones per multicarrier symbol).
    pub fn n_delay(&self) -> usize {
        self.n_delay
    }

    /// M, points along Doppler (and multicarrier symbols per frame).
    pub fn m_doppler(&self) -> usize {
        self.m_doppler
    }

    pub fn delay_period(&self) -> f64 {
        self.delay_period
    }

    pub fn doppler_period(&self) -> f64 {
        self.doppler_period
    }

    /// Δτ = τ_r / N.
    pub fn delay_resolution(&self) -> f64 {
        self.delay_period / self.n_delay as f64
    }

    /// Δν = ν_r / M.
    pub fn doppler_resolution(&self) -> f64 {
        self.doppler_period / self.m_doppler as f64
    }

    /// Δf = 1 / τ_r.
    pub fn subcarrier_spacing(&self) -> f64 {
        1.0 / self.delay_period
    }

    /// Δt = 1 / ν_r (equal to τ_r).
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.doppler_period
    }

    /// B = N Δf = 1 / Δτ.
    pub fn bandwidth(&self) -> f64 {
        self.n_delay as f64 * self.subcarrier_spacing()
    }

    /// Sample rate of the CP-free waveform, one sample per delay bin.
    pub fn sample_rate(&self) -> f64 {
        self.bandwidth()
    }

    /// T = M Δt = 1 / Δν.
    pub fn frame_duration(&self) -> f64 {
        self.m_doppler as f64 * self.symbol_duration()
    }

    /// NM, the number of lattice points.
    pub fn len(&self) -> usize {
        self.n_delay * self.m_doppler
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_finite<T: Real>(data: &[Complex<T>], what: &str) -> Result<()> {
    if let Some(i) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return invalid(format!("{what} entry {i} is not finite"));
    }
    Ok(())
}

/// Delay-Doppler frame: `N x M`, entry `(n, m)` at delay `nΔτ`, Doppler `mΔν`,
/// stored row-major (`n * M + m`).
#[derive(Debug, Clone, PartialEq)]
pub struct DdFrame<T> {
    grid: DelayDopplerGrid,
    data: Vec<Complex<T>>,
}

impl<T: Real> DdFrame<T> {
    pub fn zeros(grid: DelayDopplerGrid) -> Self {
        Self { grid, data: vec![Complex::zero(); grid.len()] }
    }

    pub fn from_vec(grid: DelayDopplerGrid, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != grid.len() {
            return invalid(format!(
                "delay-Doppler frame needs {} entries, got {}",
                grid.len(),
                data.len()
            ));
        }
        check_finite(&data, "delay-Doppler frame")?;
        Ok(Self { grid, data })
    }

    /// Frame with a single unit entry at `(n, m)`.
    pub fn impulse(grid: DelayDopplerGrid, n: usize, m: usize) -> Self {
        let mut f = Self::zeros(grid);
        f.set(n, m, Complex::new(T::one(), T::zero()));
        f
    }

    pub fn grid(&self) -> &DelayDopplerGrid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> Complex<T> {
        self.data[n * self.grid.m_doppler + m]
    }

    #[inline]
    pub fn set(&mut self, n: usize, m: usize, v: Complex<T>) {
        let mm = self.grid.m_doppler;
        self.data[n * mm + m] = v;
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn energy(&self) -> T {
        energy(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        max_abs_diff(&self.data, &other.data)
    }
}

/// Time-frequency frame: `M x N`, entry `(m', n')` at time `m'Δt`, frequency
/// `n'Δf`, stored row-major (`m' * N + n'`), i.e. one row per multicarrier
/// symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct TfFrame<T> {
    grid: DelayDopplerGrid,
    data: Vec<Complex<T>>,
}

impl<T: Real> TfFrame<T> {
    pub fn zeros(grid: DelayDopplerGrid) -> Self {
        Self { grid, data: vec![Complex::zero(); grid.len()] }
    }

    pub fn from_vec(grid: DelayDopplerGrid, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != grid.len() {
            return invalid(format!(
                "time-frequency frame needs {} entries, got {}",
                grid.len(),
                data.len()
            ));
        }
        check_finite(&data, "time-frequency frame")?;
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &DelayDopplerGrid {
        &self.grid
    }

    /// Entry at symbol `m'`, tone `n'`.
    #[inline]
    pub fn get(&self, symbol: usize, tone: usize) -> Complex<T> {
        self.data[symbol * self.grid.n_delay + tone]
    }

    #[inline]
    pub fn set(&mut self, symbol: usize, tone: usize, v: Complex<T>) {
        let n = self.grid.n_delay;
        self.data[symbol * n + tone] = v;
    }

    /// The `N` tones of multicarrier symbol `m'`.
    pub fn symbol(&self, symbol: usize) -> &[Complex<T>] {
        let n = self.grid.n_delay;
        &self.data[symbol * n..(symbol + 1) * n]
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn energy(&self) -> T {
        energy(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        max_abs_diff(&self.data, &other.data)
    }
}

/// Complex baseband samples, serialized symbol-major: each multicarrier
/// symbol is `cp_length` prefix samples followed by `symbol_len` body samples.
/// `cp_length == 0` is the CP-free (Zak) layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal<T> {
    samples: Vec<Complex<T>>,
    sample_rate: f64,
    symbol_len: usize,
    cp_length: usize,
}

impl<T: Real> TimeSignal<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate: f64, symbol_len: usize, cp_length: usize) -> Result<Self> {
        if symbol_len == 0 {
            return invalid("symbol length must be positive");
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return invalid(format!("sample rate must be positive, got {sample_rate}"));
        }
        if samples.len() % (symbol_len + cp_length) != 0 {
            return invalid(format!(
                "signal length {} is not a multiple of symbol_len + cp_length = {}",
                samples.len(),
                symbol_len + cp_length
            ));
        }
        check_finite(&samples, "time signal")?;
        Ok(Self { samples, sample_rate, symbol_len, cp_length })
    }

    pub(crate) fn from_parts(samples: Vec<Complex<T>>, sample_rate: f64, symbol_len: usize, cp_length: usize) -> Self {
        debug_assert_eq!(samples.len() % (symbol_len + cp_length), 0);
        Self { samples, sample_rate, symbol_len, cp_length }
    }

    /// Same layout, new samples.
    pub fn with_samples(&self, samples: Vec<Complex<T>>) -> Result<Self> {
        Self::new(samples, self.sample_rate, self.symbol_len, self.cp_length)
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn symbol_len(&self) -> usize {
        self.symbol_len
    }

    pub fn cp_length(&self) -> usize {
        self.cp_length
    }

    pub fn n_symbols(&self) -> usize {
        self.samples.len() / (self.symbol_len + self.cp_length)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> T {
        energy(&self.samples)
    }

    /// Mean of |s|^2 over all samples, zero for an empty signal.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.energy().f64() / self.samples.len() as f64
    }
}

pub(crate) fn energy<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

pub(crate) fn max_abs_diff<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).norm()))
}

/// Square Gray-coded QAM with unit mean symbol energy.
///
/// Label table: a label of `k = log2(order)` bits is read MSB first; the first
/// `k/2` bits select the in-phase level and the last `k/2` the quadrature
/// level. Each half is a binary-reflected Gray code `g` whose decoded index
/// `i` maps to amplitude `(L - 1) - 2i` (`L = sqrt(order)`), scaled by
/// `1/sqrt(2(L^2 - 1)/3)`. For QPSK this gives `00 -> (+1+j)/√2`,
/// `01 -> (+1-j)/√2`, `10 -> (-1+j)/√2`, `11 -> (-1-j)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QamConstellation<T> {
    order: usize,
    bits_per_axis: usize,
    scale: f64,
    points: Vec<Complex<T>>,
}

impl<T: Real> QamConstellation<T> {
    pub fn new(order: usize) -> Result<Self> {
        let bits_per_axis = match order {
            4 => 1,
            16 => 2,
            64 => 3,
            256 => 4,
            _ => return invalid(format!("QAM order must be one of 4, 16, 64, 256, got {order}")),
        };
        let side = 1usize << bits_per_axis;
        let scale = 1.0 / (2.0 * ((side * side - 1) as f64) / 3.0).sqrt();
        let mut c = Self { order, bits_per_axis, scale, points: Vec::with_capacity(order) };
        c.points = (0..order).map(|label| c.point_f64(label)).map(crate::scalar::from_c64).collect();
        Ok(c)
    }

    pub fn qpsk() -> Self {
        Self::new(4).expect("QPSK is a supported order")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    /// Points indexed by label value.
    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    /// Gray label of `points()[i]` is `i` itself; exposed for symmetry with
    /// documentation of the label table.
    pub fn bit_labels(&self) -> Vec<Vec<u8>> {
        let k = self.bits_per_symbol();
        (0..self.order).map(|l| (0..k).rev().map(|b| ((l >> b) & 1) as u8).collect()).collect()
    }

    /// Largest coordinate magnitude of any point.
    pub fn max_coordinate(&self) -> f64 {
        ((1usize << self.bits_per_axis) - 1) as f64 * self.scale
    }

    pub fn min_distance(&self) -> f64 {
        2.0 * self.scale
    }

    fn side(&self) -> usize {
        1 << self.bits_per_axis
    }

    fn level(&self, gray: usize) -> f64 {
        let idx = gray_decode(gray);
        ((self.side() - 1) as f64 - 2.0 * idx as f64) * self.scale
    }

    fn point_f64(&self, label: usize) -> Complex<f64> {
        let mask = self.side() - 1;
        let i_code = (label >> self.bits_per_axis) & mask;
        let q_code = label & mask;
        Complex::new(self.level(i_code), self.level(q_code))
    }

    /// Nearest code along one axis; ties go to the smaller code.
    fn decide_axis(&self, v: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for code in 0..self.side() {
            let d = (v - self.level(code)).abs();
            if d < best_d {
                best_d = d;
                best = code;
            }
        }
        best
    }

    /// Minimum-distance decision, returning the label value.
    pub fn decide(&self, z: Complex<T>) -> usize {
        let i = self.decide_axis(z.re.f64());
        let q = self.decide_axis(z.im.f64());
        (i << self.bits_per_axis) | q
    }

    pub fn map(&self, bits: &[u8]) -> Result<Vec<Complex<T>>> {
        qam_map(bits, self)
    }

    pub fn demap(&self, symbols: &[Complex<T>]) -> Vec<u8> {
        qam_demap(symbols, self)
    }
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Maps a bit vector (values 0/1, MSB-first labels) onto constellation points.
pub fn qam_map<T: Real>(bits: &[u8], constellation: &QamConstellation<T>) -> Result<Vec<Complex<T>>> {
    let k = constellation.bits_per_symbol();
    if bits.len() % k != 0 {
        return invalid(format!(
            "bit count {} is not a multiple of {k} bits per symbol",
            bits.len()
        ));
    }
    if let Some(i) = bits.iter().position(|&b| b > 1) {
        return invalid(format!("bit {i} has value {} (expected 0 or 1)", bits[i]));
    }
    Ok(bits
        .chunks_exact(k)
        .map(|chunk| {
            let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            constellation.points[label]
        })
        .collect())
}

/// Hard minimum-Euclidean-distance demapping; ties resolve to the lowest label.
pub fn qam_demap<T: Real>(symbols: &[Complex<T>], constellation: &QamConstellation<T>) -> Vec<u8> {
    let k = constellation.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * k);
    for &z in symbols {
        let label = constellation.decide(z);
        bits.extend((0..k).rev().map(|b| ((label >> b) & 1) as u8));
    }
    bits
}
