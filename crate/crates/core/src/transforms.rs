//! Symplectic finite Fourier transform, discrete Zak transforms and the
//! quasi-periodic extension of delay-Doppler frames.
//!
//! Conventions (all transforms are exact inverses of each other):
//!
//! * `sfft`: `X(m',n') = Σ_{n,m} e^{j2π(m'm/M - n'n/N)} x(n,m)`, unnormalized.
//!   `isfft` carries the `1/(NM)`.
//! * `zak_time`: `s[n + m'N] = Σ_k x(n,k) e^{j2π m'k/M}`, unnormalized.
//!   `inverse_zak_time` carries the `1/M`.
//! * `zak_freq`: `F[k + pM] = M Σ_n x(n,k) e^{-j2πkn/(NM)} e^{-j2πpn/N}`,
//!   which equals the `NM`-point DFT of `zak_time(x)`.
//! * quasi-periodicity: `x(n + aN, k + bM) = e^{j2π a k/M} x(n, k)`.
//!
//! The fast paths factor through `rustfft`; [`oracle`] holds the direct sums
//! that define them.

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::lattice::{DdFrame, DelayDopplerGrid, TfFrame, TimeSignal};
use crate::scalar::{cis_ratio, Real};

/// Cached FFT plans for one grid.
#[derive(Clone)]
pub struct Transformer<T: Real> {
    grid: DelayDopplerGrid,
    fft_n: Arc<dyn Fft<T>>,
    ifft_n: Arc<dyn Fft<T>>,
    fft_m: Arc<dyn Fft<T>>,
    ifft_m: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Transformer<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transformer").field("grid", &self.grid).finish()
    }
}

fn transpose<T: Copy>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(src.len());
    for c in 0..cols {
        out.extend((0..rows).map(|r| src[r * cols + c]));
    }
    out
}

fn scale_all<T: Real>(v: &mut [Complex<T>], s: T) {
    for z in v {
        *z = *z * s;
    }
}

impl<T: Real> Transformer<T> {
    pub fn new(grid: DelayDopplerGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_delay();
        let m = grid.m_doppler();
        Self {
            grid,
            fft_n: planner.plan_fft_forward(n),
            ifft_n: planner.plan_fft_inverse(n),
            fft_m: planner.plan_fft_forward(m),
            ifft_m: planner.plan_fft_inverse(m),
        }
    }

    pub fn grid(&self) -> &DelayDopplerGrid {
        &self.grid
    }

    fn check_grid(&self, other: &DelayDopplerGrid, what: &str) -> Result<()> {
        if *other != self.grid {
            return invalid(format!("{what} grid {other:?} does not match transform grid {:?}", self.grid));
        }
        Ok(())
    }

    /// Forward N-point DFT (`e^{-j}`) of one symbol, in place.
    pub fn fft_tones(&self, v: &mut [Complex<T>]) {
        self.fft_n.process(v);
    }

    /// Unnormalized inverse N-point DFT (`e^{+j}`) of one symbol, in place.
    pub fn ifft_tones(&self, v: &mut [Complex<T>]) {
        self.ifft_n.process(v);
    }

    /// `N x M` row-major input, rows transformed along Doppler with `e^{+j}`,
    /// returned transposed (`M x N`).
    fn doppler_to_time(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut a = x.to_vec();
        self.ifft_m.process(&mut a);
        transpose(&a, self.grid.n_delay(), self.grid.m_doppler())
    }

    /// Inverse of [`Self::doppler_to_time`] without the `1/M` factor.
    fn time_to_doppler(&self, s: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut a = transpose(s, self.grid.m_doppler(), self.grid.n_delay());
        self.fft_m.process(&mut a);
        a
    }

    pub fn sfft(&self, x: &DdFrame<T>) -> Result<TfFrame<T>> {
        self.check_grid(x.grid(), "delay-Doppler frame")?;
        let mut tf = self.doppler_to_time(x.data());
        self.fft_n.process(&mut tf);
        Ok(TfFrame::from_vec(self.grid, tf).expect("sfft preserves shape"))
    }

    pub fn isfft(&self, big_x: &TfFrame<T>) -> Result<DdFrame<T>> {
        self.check_grid(big_x.grid(), "time-frequency frame")?;
        let mut a = big_x.data().to_vec();
        self.ifft_n.process(&mut a);
        let mut x = self.time_to_doppler(&a);
        scale_all(&mut x, T::one() / T::of(self.grid.len() as f64));
        Ok(DdFrame::from_vec(self.grid, x).expect("isfft preserves shape"))
    }

    /// CP-free time waveform of a delay-Doppler frame.
    pub fn zak_time(&self, x: &DdFrame<T>) -> Result<TimeSignal<T>> {
        self.check_grid(x.grid(), "delay-Doppler frame")?;
        let s = self.doppler_to_time(x.data());
        Ok(TimeSignal::from_parts(s, self.grid.sample_rate(), self.grid.n_delay(), 0))
    }

    pub fn inverse_zak_time(&self, s: &TimeSignal<T>) -> Result<DdFrame<T>> {
        if s.cp_length() != 0 {
            return invalid(format!("inverse Zak needs a CP-free signal, cp_length = {}", s.cp_length()));
        }
        if s.len() != self.grid.len() {
            return invalid(format!("inverse Zak needs {} samples, got {}", self.grid.len(), s.len()));
        }
        let mut x = self.time_to_doppler(s.samples());
        scale_all(&mut x, T::one() / T::of(self.grid.m_doppler() as f64));
        DdFrame::from_vec(self.grid, x)
    }

    /// Frequency-domain samples `F[f]`, `f = k + pM`, of `zak_time(x)`,
    /// computed along the frequency-side Zak path.
    pub fn zak_freq(&self, x: &DdFrame<T>) -> Result<Vec<Complex<T>>> {
        self.check_grid(x.grid(), "delay-Doppler frame")?;
        let n = self.grid.n_delay();
        let m = self.grid.m_doppler();
        let nm = (n * m) as i64;
        let mut out = vec![Complex::zero(); n * m];
        let mut col = vec![Complex::zero(); n];
        let m_t = T::of(m as f64);
        for k in 0..m {
            for (d, c) in col.iter_mut().enumerate() {
                *c = x.get(d, k) * cis_ratio::<T>(-((k * d) as i64), nm);
            }
            self.fft_n.process(&mut col);
            for (p, c) in col.iter().enumerate() {
                out[k + p * m] = *c * m_t;
            }
        }
        Ok(out)
    }

    pub fn inverse_zak_freq(&self, spectrum: &[Complex<T>]) -> Result<DdFrame<T>> {
        let n = self.grid.n_delay();
        let m = self.grid.m_doppler();
        if spectrum.len() != n * m {
            return invalid(format!("inverse frequency Zak needs {} bins, got {}", n * m, spectrum.len()));
        }
        let nm = (n * m) as i64;
        let norm = T::one() / T::of((n * m) as f64);
        let mut x = DdFrame::zeros(self.grid);
        let mut col = vec![Complex::zero(); n];
        for k in 0..m {
            for (p, c) in col.iter_mut().enumerate() {
                *c = spectrum[k + p * m];
            }
            self.ifft_n.process(&mut col);
            for (d, c) in col.iter().enumerate() {
                x.set(d, k, *c * cis_ratio::<T>((k * d) as i64, nm) * norm);
            }
        }
        Ok(x)
    }
}

pub fn sfft<T: Real>(x: &DdFrame<T>) -> TfFrame<T> {
    Transformer::new(*x.grid()).sfft(x).expect("grid matches by construction")
}

pub fn isfft<T: Real>(big_x: &TfFrame<T>) -> DdFrame<T> {
    Transformer::new(*big_x.grid()).isfft(big_x).expect("grid matches by construction")
}

pub fn zak_time<T: Real>(x: &DdFrame<T>) -> TimeSignal<T> {
    Transformer::new(*x.grid()).zak_time(x).expect("grid matches by construction")
}

pub fn inverse_zak_time<T: Real>(s: &TimeSignal<T>, grid: &DelayDopplerGrid) -> Result<DdFrame<T>> {
    Transformer::new(*grid).inverse_zak_time(s)
}

pub fn zak_freq<T: Real>(x: &DdFrame<T>) -> Vec<Complex<T>> {
    Transformer::new(*x.grid()).zak_freq(x).expect("grid matches by construction")
}

pub fn inverse_zak_freq<T: Real>(spectrum: &[Complex<T>], grid: &DelayDopplerGrid) -> Result<DdFrame<T>> {
    Transformer::new(*grid).inverse_zak_freq(spectrum)
}

/// Phase acquired by a quasi-periodic frame when the lookup index is moved by
/// whole periods: `shift_delay` delay periods and `shift_doppler` Doppler
/// periods away from the in-range point `at_point = (n, k)`.
///
/// The discrete form is `e^{j2π shift_delay * k / M}`; Doppler-period shifts
/// are phase-free in this sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuasiPeriodicPhase {
    pub shift_delay: i64,
    pub shift_doppler: i64,
    pub at_point: (usize, usize),
}

impl QuasiPeriodicPhase {
    pub fn factor<T: Real>(&self, grid: &DelayDopplerGrid) -> Complex<T> {
        let m = grid.m_doppler() as i64;
        cis_ratio(self.shift_delay.rem_euclid(m) * self.at_point.1 as i64, m)
    }
}

/// Value of the quasi-periodic extension of `x` at arbitrary integer indices.
pub fn quasi_periodic_lookup<T: Real>(x: &DdFrame<T>, delay_index: i64, doppler_index: i64) -> Complex<T> {
    let n = x.grid().n_delay() as i64;
    let m = x.grid().m_doppler() as i64;
    let n0 = delay_index.rem_euclid(n) as usize;
    let k0 = doppler_index.rem_euclid(m) as usize;
    let phase = QuasiPeriodicPhase {
        shift_delay: delay_index.div_euclid(n),
        shift_doppler: doppler_index.div_euclid(m),
        at_point: (n0, k0),
    };
    x.get(n0, k0) * phase.factor::<T>(x.grid())
}

/// One of the `NM` two-dimensional spreading sequences on the time-frequency
/// grid, `ψ_{n,m}(m', n') = e^{j2π(m m'/M - n n'/N)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisFunction {
    pub delay_index: usize,
    pub doppler_index: usize,
    pub grid: DelayDopplerGrid,
}

impl BasisFunction {
    pub fn new(delay_index: usize, doppler_index: usize, grid: DelayDopplerGrid) -> Result<Self> {
        if delay_index >= grid.n_delay() || doppler_index >= grid.m_doppler() {
            return invalid(format!(
                "basis index ({delay_index}, {doppler_index}) outside {}x{} grid",
                grid.n_delay(),
                grid.m_doppler()
            ));
        }
        Ok(Self { delay_index, doppler_index, grid })
    }

    pub fn eval<T: Real>(&self) -> TfFrame<T> {
        basis_eval(self)
    }
}

pub fn basis_eval<T: Real>(b: &BasisFunction) -> TfFrame<T> {
    let n = b.grid.n_delay();
    let m = b.grid.m_doppler();
    let nm = (n * m) as i64;
    let mut out = TfFrame::zeros(b.grid);
    for sym in 0..m {
        for tone in 0..n {
            let num = (b.doppler_index * sym * n) as i64 - (b.delay_index * tone * m) as i64;
            out.set(sym, tone, cis_ratio(num, nm));
        }
    }
    out
}

/// `Σ conj(a) b` over all cells.
pub fn inner_product<T: Real>(a: &TfFrame<T>, b: &TfFrame<T>) -> Complex<T> {
    a.data().iter().zip(b.data()).fold(Complex::zero(), |acc, (x, y)| acc + x.conj() * y)
}

/// Direct-summation definitions of the transforms. Quadratic cost; used as
/// the normative reference by tests and by callers wanting a cross-check.
pub mod oracle {
    use super::*;

    /// `V[f] = Σ_t v[t] e^{-j2π f t / L}`.
    pub fn dft<T: Real>(v: &[Complex<T>]) -> Vec<Complex<T>> {
        let l = v.len() as i64;
        (0..l)
            .map(|f| {
                v.iter()
                    .enumerate()
                    .fold(Complex::zero(), |acc, (t, x)| acc + *x * cis_ratio::<T>(-f * t as i64, l))
            })
            .collect()
    }

    /// `v[t] = Σ_f V[f] e^{+j2π f t / L}` (no normalization).
    pub fn idft<T: Real>(v: &[Complex<T>]) -> Vec<Complex<T>> {
        let l = v.len() as i64;
        (0..l)
            .map(|t| {
                v.iter()
                    .enumerate()
                    .fold(Complex::zero(), |acc, (f, x)| acc + *x * cis_ratio::<T>(f as i64 * t, l))
            })
            .collect()
    }

    /// 2D variant: the SFFT double sum, evaluated cell by cell.
    pub fn sfft<T: Real>(x: &DdFrame<T>) -> TfFrame<T> {
        let g = *x.grid();
        let (n, m) = (g.n_delay(), g.m_doppler());
        let nm = (n * m) as i64;
        let mut out = TfFrame::zeros(g);
        for sym in 0..m {
            for tone in 0..n {
                let mut acc = Complex::zero();
                for d in 0..n {
                    for k in 0..m {
                        let num = (sym * k * n) as i64 - (tone * d * m) as i64;
                        acc = acc + x.get(d, k) * cis_ratio::<T>(num, nm);
                    }
                }
                out.set(sym, tone, acc);
            }
        }
        out
    }

    /// The Zak defining sum `s[n + m'N] = Σ_k x(n,k) e^{j2π m'k/M}`.
    pub fn zak_time<T: Real>(x: &DdFrame<T>) -> Vec<Complex<T>> {
        let g = *x.grid();
        let (n, m) = (g.n_delay(), g.m_doppler());
        let mut s = vec![Complex::zero(); n * m];
        for sym in 0..m {
            for d in 0..n {
                s[d + sym * n] = (0..m).fold(Complex::zero(), |acc, k| {
                    acc + x.get(d, k) * cis_ratio::<T>((sym * k) as i64, m as i64)
                });
            }
        }
        s
    }
}
