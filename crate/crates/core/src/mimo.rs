//! Multi-user MIMO analysis and downlink precoding.
//!
//! Each time-frequency point `(m, n)` carries a local channel: `U` (uplink,
//! `L_b x L_u`) or `D` (downlink, `L_u x L_b`). Delay-Doppler processing sees
//! the average of the local autocorrelations, which is what the condition
//! number and precoding comparisons in this module measure.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{DelayDopplerGrid, QamConstellation};
use crate::rng::{stream_rng, streams};
use crate::C64;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Condition number above which a local channel is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Uplink,
    Downlink,
}

/// `U*U` for uplink, `D D*` for downlink.
pub fn autocorrelation(h: &DMatrix<C64>, direction: Direction) -> DMatrix<C64> {
    match direction {
        Direction::Uplink => h.adjoint() * h,
        Direction::Downlink => h * h.adjoint(),
    }
}

fn hermitian_defect(r: &DMatrix<C64>) -> f64 {
    let scale = r.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let n = r.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((r[(i, j)] - r[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(r: &DMatrix<C64>) -> Result<Vec<f64>> {
    if !r.is_square() || r.is_empty() {
        return invalid(format!("expected a non-empty square matrix, got {}x{}", r.nrows(), r.ncols()));
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let d = hermitian_defect(r);
    if d > 1e-10 {
        return invalid(format!("matrix is not Hermitian (relative asymmetry {d:.3e})"));
    }
    let mut ev: Vec<f64> = r.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `λ_max / λ_min` of a Hermitian PSD matrix; `+∞` when `λ_min < 1e-14 λ_max`.
pub fn condition_number(r: &DMatrix<C64>) -> Result<f64> {
    let ev = hermitian_eigenvalues(r)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if hi <= 0.0 || lo < 1e-14 * hi {
        return Ok(f64::INFINITY);
    }
    Ok(hi / lo)
}

/// Per-grid-point channel matrices, stored in time-frequency order
/// (`symbol * N + tone`).
#[derive(Debug, Clone, PartialEq)]
pub struct MimoEnsemble {
    grid: DelayDopplerGrid,
    direction: Direction,
    n_bs_antennas: usize,
    n_users: usize,
    matrices: Vec<DMatrix<C64>>,
}

impl MimoEnsemble {
    pub fn new(
        grid: DelayDopplerGrid,
        direction: Direction,
        n_bs_antennas: usize,
        n_users: usize,
        matrices: Vec<DMatrix<C64>>,
    ) -> Result<Self> {
        if n_bs_antennas == 0 || n_users == 0 {
            return invalid("antenna and user counts must be positive");
        }
        if matrices.len() != grid.len() {
            return invalid(format!("ensemble has {} matrices for {} grid points", matrices.len(), grid.len()));
        }
        let shape = match direction {
            Direction::Uplink => (n_bs_antennas, n_users),
            Direction::Downlink => (n_users, n_bs_antennas),
        };
        if let Some(i) = matrices.iter().position(|m| m.shape() != shape) {
            return invalid(format!("matrix {i} has shape {:?}, expected {shape:?}", matrices[i].shape()));
        }
        Ok(Self { grid, direction, n_bs_antennas, n_users, matrices })
    }

    /// I.i.d. `CN(0, 1)` entries at every point.
    pub fn gaussian<R: Rng + ?Sized>(
        grid: DelayDopplerGrid,
        direction: Direction,
        n_bs_antennas: usize,
        n_users: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let (r, c) = match direction {
            Direction::Uplink => (n_bs_antennas, n_users),
            Direction::Downlink => (n_users, n_bs_antennas),
        };
        let matrices = (0..grid.len()).map(|_| gaussian_matrix(r, c, rng)).collect();
        Self::new(grid, direction, n_bs_antennas, n_users, matrices)
    }

    /// Every point carries the same matrix.
    pub fn constant(grid: DelayDopplerGrid, direction: Direction, h: DMatrix<C64>) -> Result<Self> {
        let (b, u) = match direction {
            Direction::Uplink => (h.nrows(), h.ncols()),
            Direction::Downlink => (h.ncols(), h.nrows()),
        };
        Self::new(grid, direction, b, u, vec![h; grid.len()])
    }

    pub fn grid(&self) -> &DelayDopplerGrid {
        &self.grid
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn n_bs_antennas(&self) -> usize {
        self.n_bs_antennas
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn matrices(&self) -> &[DMatrix<C64>] {
        &self.matrices
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn at(&self, symbol: usize, tone: usize) -> &DMatrix<C64> {
        &self.matrices[symbol * self.grid.n_delay() + tone]
    }

    pub fn autocorrelations(&self) -> Vec<DMatrix<C64>> {
        self.matrices.iter().map(|h| autocorrelation(h, self.direction)).collect()
    }

    /// Condition number of every local autocorrelation.
    pub fn pointwise_condition_numbers(&self) -> Result<Vec<f64>> {
        self.matrices.iter().map(|h| condition_number(&autocorrelation(h, self.direction))).collect()
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(s * re, s * im)
    })
}

/// `r = (1/NM) Σ R_{m,n}`.
pub fn dd_average_autocorrelation(ens: &MimoEnsemble) -> Result<DMatrix<C64>> {
    let mut it = ens.matrices.iter().map(|h| autocorrelation(h, ens.direction));
    let first = it.next().ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    let sum = it.fold(first, |acc, r| acc + r);
    Ok(sum / Complex::new(ens.len() as f64, 0.0))
}

/// Per-point condition numbers and the condition number of each strip's
/// averaged autocorrelation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionStats {
    pub tf: Vec<f64>,
    pub dd: Vec<f64>,
}

pub fn strip_condition_numbers(strips: &[MimoEnsemble]) -> Result<ConditionStats> {
    let mut tf = Vec::new();
    let mut dd = Vec::with_capacity(strips.len());
    for s in strips {
        tf.extend(s.pointwise_condition_numbers()?);
        dd.push(condition_number(&dd_average_autocorrelation(s)?)?);
    }
    Ok(ConditionStats { tf, dd })
}

fn check_symbols(x: &[DVector<C64>], ens: &MimoEnsemble) -> Result<()> {
    if ens.direction != Direction::Downlink {
        return invalid("precoding needs a downlink ensemble");
    }
    if x.len() != ens.len() {
        return invalid(format!("{} symbol vectors for {} grid points", x.len(), ens.len()));
    }
    if ens.n_bs_antennas < ens.n_users {
        return invalid("precoding needs at least as many base-station antennas as users");
    }
    if let Some(i) = x.iter().position(|v| v.len() != ens.n_users) {
        return invalid(format!("symbol vector {i} has length {}, expected {}", x[i].len(), ens.n_users));
    }
    Ok(())
}

/// Right inverse of a wide or square downlink matrix, or `None` if its
/// condition number exceeds [`SINGULAR_CONDITION`].
pub fn right_inverse(d: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let sv = d.singular_values();
    let (hi, lo) = sv.iter().fold((0.0f64, f64::INFINITY), |(h, l), &s| (h.max(s), l.min(s)));
    if !(lo > 0.0) || hi / lo > SINGULAR_CONDITION {
        return None;
    }
    if d.is_square() {
        d.clone().try_inverse()
    } else {
        let g = d * d.adjoint();
        g.try_inverse().map(|gi| d.adjoint() * gi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Precoded {
    /// One transmit vector (length `L_b`) per grid point.
    pub z: Vec<DVector<C64>>,
    /// Common receive amplitude: users see `scale * (x + perturbation) + noise`.
    pub scale: f64,
    /// Grid points skipped as singular; their transmit vectors are zero.
    pub excluded: Vec<usize>,
}

impl Precoded {
    pub fn energy(&self) -> f64 {
        self.z.iter().map(|v| v.norm_squared()).sum()
    }

    /// Per-user receive SNR for unit-energy symbols and noise variance `n0`.
    pub fn snr(&self, n0: f64) -> f64 {
        self.scale * self.scale / n0
    }
}

fn normalize(mut z: Vec<DVector<C64>>, total: f64, excluded: Vec<usize>) -> Result<Precoded> {
    let e: f64 = z.iter().map(|v| v.norm_squared()).sum();
    if !(e > 0.0) {
        return Err(Error::Singular("no usable grid point to precode".into()));
    }
    let scale = (total / e).sqrt();
    for v in &mut z {
        *v *= Complex::new(scale, 0.0);
    }
    Ok(Precoded { z, scale, excluded })
}

/// Zero-forcing: `Z = c D⁻¹ X` with `c` chosen so that `Σ‖Z‖² = NM`.
pub fn zf_precode(x: &[DVector<C64>], ens: &MimoEnsemble) -> Result<Precoded> {
    check_symbols(x, ens)?;
    let inverses = per_point(ens, |d| Ok(right_inverse(d)))?;
    let mut excluded = Vec::new();
    let z = inverses
        .iter()
        .zip(x)
        .enumerate()
        .map(|(i, (inv, xi))| match inv.as_ref() {
            Some(inv) => inv * xi,
            None => {
                excluded.push(i);
                DVector::zeros(ens.n_bs_antennas)
            }
        })
        .collect();
    normalize(z, ens.len() as f64, excluded)
}

/// Evaluates `f` once per distinct matrix, reusing the result when a point
/// repeats its neighbour in tone or in time (static and averaged channels).
fn per_point<F, V>(ens: &MimoEnsemble, f: F) -> Result<Vec<std::rc::Rc<V>>>
where
    F: Fn(&DMatrix<C64>) -> Result<V>,
{
    let n = ens.grid.n_delay();
    let mut out: Vec<std::rc::Rc<V>> = Vec::with_capacity(ens.len());
    for (i, d) in ens.matrices.iter().enumerate() {
        let reuse = [i.checked_sub(1), i.checked_sub(n)]
            .into_iter()
            .flatten()
            .find(|&j| ens.matrices[j] == *d);
        match reuse {
            Some(j) => {
                let v = out[j].clone();
                out.push(v);
            }
            None => out.push(std::rc::Rc::new(f(d)?)),
        }
    }
    Ok(out)
}

/// Element-wise complex modulo onto `[-base/2, base/2)` per axis.
pub fn complex_modulo(z: C64, base: f64) -> C64 {
    let m = |v: f64| v - base * (v / base + 0.5).floor();
    Complex::new(m(z.re), m(z.im))
}

/// Modulo base `2 (max coordinate + d_min / 2)` for a square QAM.
pub fn thp_modulo_base(c: &QamConstellation<f64>) -> f64 {
    2.0 * (c.max_coordinate() + c.min_distance() / 2.0)
}

/// `D = L Q`: `L` lower triangular (`L_u x L_u`), `Q` with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LqFactor {
    pub l: DMatrix<C64>,
    pub q: DMatrix<C64>,
}

pub fn lq(d: &DMatrix<C64>) -> Result<LqFactor> {
    if d.nrows() > d.ncols() {
        return invalid("LQ needs at least as many columns as rows");
    }
    let qr = d.adjoint().qr();
    let l = qr.r().adjoint();
    let q = qr.q().adjoint();
    let diag_max = (0..l.nrows()).map(|i| l[(i, i)].norm()).fold(0.0, f64::max);
    if (0..l.nrows()).any(|i| !(l[(i, i)].norm() > 1e-12 * diag_max)) || diag_max == 0.0 {
        return Err(Error::Singular("channel is rank deficient".into()));
    }
    Ok(LqFactor { l, q })
}

/// Tomlinson-Harashima feedback for one point: returns the unscaled transmit
/// vector `Q* G⁻¹ v`, where `G = diag(L)` and
/// `v_i = mod(x_i - Σ_{j<i} (L G⁻¹)_{ij} v_j)`.
pub fn thp_point(f: &LqFactor, x: &DVector<C64>, modulo_base: f64) -> DVector<C64> {
    let n = f.l.nrows();
    let mut v = DVector::<C64>::zeros(n);
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= f.l[(i, j)] / f.l[(j, j)] * v[j];
        }
        v[i] = if i == 0 { acc } else { complex_modulo(acc, modulo_base) };
    }
    let w = DVector::from_fn(n, |i, _| v[i] / f.l[(i, i)]);
    f.q.adjoint() * w
}

/// Unperturbed channel inversion `Q* L⁻¹ x` through the same factorization.
pub fn zero_perturbation_point(f: &LqFactor, x: &DVector<C64>) -> DVector<C64> {
    let w = f.l.solve_lower_triangular(x).expect("LQ diagonal checked non-zero");
    f.q.adjoint() * w
}

/// THP over every grid point with a common energy normalization `Σ‖Z‖² = NM`.
///
/// Each point keeps the cheaper of the THP vector and the zero-perturbation
/// (plain inversion) vector; both decode through the same modulo receiver, so
/// the result is never weaker than zero forcing.
pub fn thp_precode(x: &[DVector<C64>], ens: &MimoEnsemble, modulo_base: f64) -> Result<Precoded> {
    check_symbols(x, ens)?;
    if !(modulo_base > 0.0) {
        return invalid(format!("modulo base must be positive, got {modulo_base}"));
    }
    let factors = per_point(ens, lq)?;
    let z = factors
        .iter()
        .zip(x)
        .map(|(f, xi)| {
            let t = thp_point(f, xi, modulo_base);
            let l = zero_perturbation_point(f, xi);
            if t.norm_squared() <= l.norm_squared() {
                t
            } else {
                l
            }
        })
        .collect();
    normalize(z, ens.len() as f64, Vec::new())
}

/// Receiver side of THP: divide by the common scale, then reduce modulo.
pub fn thp_receive(y: C64, scale: f64, modulo_base: f64) -> C64 {
    complex_modulo(y / scale, modulo_base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecodingStrategy {
    /// Invert the local channel at every time-frequency point.
    TfPointwise,
    /// Precode every point against one matrix `d` with `d d* = r`, the
    /// delay-Doppler averaged autocorrelation.
    DdAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precoder {
    Zf,
    Thp,
}

/// Lower-triangular `d` with `d d* = r` (the averaged coupling in LQ form).
pub fn averaged_channel(ens: &MimoEnsemble) -> Result<DMatrix<C64>> {
    let r = dd_average_autocorrelation(ens)?;
    let chol = r
        .cholesky()
        .ok_or_else(|| Error::Singular("averaged autocorrelation is not positive definite".into()))?;
    Ok(chol.l())
}

/// Receive amplitude of one strategy/precoder pair on one ensemble.
pub fn precode_scale(
    x: &[DVector<C64>],
    ens: &MimoEnsemble,
    strategy: PrecodingStrategy,
    precoder: Precoder,
    modulo_base: f64,
) -> Result<f64> {
    let averaged;
    let target = match strategy {
        PrecodingStrategy::TfPointwise => ens,
        PrecodingStrategy::DdAveraged => {
            let d = averaged_channel(ens)?;
            averaged = MimoEnsemble::constant(ens.grid, Direction::Downlink, d)?;
            &averaged
        }
    };
    let p = match precoder {
        Precoder::Zf => zf_precode(x, target)?,
        Precoder::Thp => thp_precode(x, target, modulo_base)?,
    };
    Ok(p.scale)
}

/// Reflector-ring cell: users dropped uniformly in a disc around the base
/// station, each surrounded by static reflectors on a ring whose radius sets
/// the delay spread. The base station carries a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingScenario {
    pub cell_radius: f64,
    pub n_bs_antennas: usize,
    pub antenna_spacing: f64,
    pub carrier_freq: f64,
    pub n_users: usize,
    pub reflectors_per_user: usize,
    pub delay_spread: f64,
    pub rng_seed: u64,
}

impl RingScenario {
    /// 1 km cell, 8-element half-wavelength array at 4 GHz, 8 users, 20
    /// reflectors each, 2 μs delay spread.
    pub fn reference(rng_seed: u64) -> Self {
        let carrier_freq = 4e9;
        Self {
            cell_radius: 1000.0,
            n_bs_antennas: 8,
            antenna_spacing: SPEED_OF_LIGHT / carrier_freq / 2.0,
            carrier_freq,
            n_users: 8,
            reflectors_per_user: 20,
            delay_spread: 2e-6,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                invalid(format!("{name} must be positive and finite, got {v}"))
            }
        };
        pos("cell_radius", self.cell_radius)?;
        pos("antenna_spacing", self.antenna_spacing)?;
        pos("carrier_freq", self.carrier_freq)?;
        pos("delay_spread", self.delay_spread)?;
        if self.n_bs_antennas == 0 || self.n_users == 0 || self.reflectors_per_user == 0 {
            return invalid("antenna, user and reflector counts must be positive");
        }
        Ok(())
    }

    /// Two-way excess path `c * delay_spread` equals twice the ring radius.
    pub fn ring_radius(&self) -> f64 {
        SPEED_OF_LIGHT * self.delay_spread / 2.0
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }
}

/// One reflected path as seen from the base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingPath {
    pub gain: C64,
    /// Excess delay over the direct BS-user distance, seconds.
    pub delay: f64,
    /// Angle from array broadside, radians.
    pub angle: f64,
}

/// Paths of every user for one drop.
pub fn ring_paths<R: Rng + ?Sized>(sc: &RingScenario, rng: &mut R) -> Result<Vec<Vec<RingPath>>> {
    sc.validate()?;
    let ring = sc.ring_radius();
    (0..sc.n_users)
        .map(|_| {
            let rad = sc.cell_radius * rng.random::<f64>().sqrt();
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            let (ux, uy) = (rad * phi.cos(), rad * phi.sin());
            let mut paths: Vec<RingPath> = (0..sc.reflectors_per_user)
                .map(|_| {
                    let a = rng.random::<f64>() * std::f64::consts::TAU;
                    let (px, py) = (ux + ring * a.cos(), uy + ring * a.sin());
                    let d_bs = px.hypot(py);
                    let delay = ((d_bs + ring - rad) / SPEED_OF_LIGHT).max(0.0);
                    let angle = if d_bs > 0.0 { (px / d_bs).asin() } else { 0.0 };
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    RingPath { gain: Complex::new(re, im), delay, angle }
                })
                .collect();
            let norm = paths.iter().map(|p| p.gain.norm_sqr()).sum::<f64>().sqrt();
            paths.iter_mut().for_each(|p| p.gain /= norm);
            Ok(paths)
        })
        .collect()
}

/// `e^{j2π a d sin θ / λ}` for array element `a`.
pub fn steering_vector(n_antennas: usize, spacing: f64, wavelength: f64, angle: f64) -> Vec<C64> {
    (0..n_antennas)
        .map(|a| Complex::from_polar(1.0, std::f64::consts::TAU * a as f64 * spacing * angle.sin() / wavelength))
        .collect()
}

/// Downlink matrix at tone frequency `f` (relative to the carrier).
pub fn ring_channel_at(sc: &RingScenario, paths: &[Vec<RingPath>], f: f64) -> DMatrix<C64> {
    let lambda = sc.wavelength();
    let mut d = DMatrix::zeros(sc.n_users, sc.n_bs_antennas);
    for (u, up) in paths.iter().enumerate() {
        for p in up {
            let g = p.gain * Complex::from_polar(1.0, -std::f64::consts::TAU * f * p.delay);
            for (a, s) in steering_vector(sc.n_bs_antennas, sc.antenna_spacing, lambda, p.angle).into_iter().enumerate() {
                d[(u, a)] += g * s;
            }
        }
    }
    d
}

/// Downlink ensemble of drop `drop` over `grid` (tones spaced by the grid's
/// subcarrier spacing). The channel is static, so every symbol repeats the
/// same per-tone matrix.
pub fn ring_scenario_ensemble(sc: &RingScenario, grid: &DelayDopplerGrid, drop: u64) -> Result<MimoEnsemble> {
    let mut rng = stream_rng(sc.rng_seed, streams::SCENARIO, drop);
    let paths = ring_paths(sc, &mut rng)?;
    let tones: Vec<DMatrix<C64>> = (0..grid.n_delay())
        .map(|n| ring_channel_at(sc, &paths, n as f64 * grid.subcarrier_spacing()))
        .collect();
    let matrices = (0..grid.m_doppler()).flat_map(|_| tones.iter().cloned()).collect();
    MimoEnsemble::new(*grid, Direction::Downlink, sc.n_bs_antennas, sc.n_users, matrices)
}

/// Uniform random symbols of `constellation`, one `L_u` vector per point.
pub fn random_symbol_vectors<R: Rng + ?Sized>(
    n_points: usize,
    n_users: usize,
    constellation: &QamConstellation<f64>,
    rng: &mut R,
) -> Vec<DVector<C64>> {
    let pts = constellation.points();
    (0..n_points)
        .map(|_| DVector::from_fn(n_users, |_, _| pts[rng.random_range(0..pts.len())]))
        .collect()
}

/// Every strategy/precoder pair, in the order they are evaluated per drop.
pub const PRECODING_PAIRS: [(PrecodingStrategy, Precoder); 4] = [
    (PrecodingStrategy::TfPointwise, Precoder::Zf),
    (PrecodingStrategy::TfPointwise, Precoder::Thp),
    (PrecodingStrategy::DdAveraged, Precoder::Zf),
    (PrecodingStrategy::DdAveraged, Precoder::Thp),
];

/// Receive SNR (dB, common to all users of the drop) of every pair in
/// [`PRECODING_PAIRS`] for one drop. All pairs precode the same QPSK symbols.
/// `reference_snr_db` fixes the noise as `N0 = 10^(-snr/10)`.
pub fn precoding_drop(sc: &RingScenario, grid: &DelayDopplerGrid, drop: u64, reference_snr_db: f64) -> Result<[f64; 4]> {
    let c = QamConstellation::<f64>::qpsk();
    let base = thp_modulo_base(&c);
    let ens = ring_scenario_ensemble(sc, grid, drop)?;
    let x = random_symbol_vectors(ens.len(), sc.n_users, &c, &mut stream_rng(sc.rng_seed, streams::PAYLOAD, drop));
    let mut out = [0.0; 4];
    for (o, (st, p)) in out.iter_mut().zip(PRECODING_PAIRS) {
        *o = 20.0 * precode_scale(&x, &ens, st, p, base)?.log10() + reference_snr_db;
    }
    Ok(out)
}

/// Pooled per-user SNR samples (dB) of one strategy/precoder pair over
/// `n_drops` drops; drop-major, user-minor.
pub fn precoding_snr_cdf(
    sc: &RingScenario,
    grid: &DelayDopplerGrid,
    strategy: PrecodingStrategy,
    precoder: Precoder,
    n_drops: usize,
    reference_snr_db: f64,
) -> Result<Vec<f64>> {
    let k = PRECODING_PAIRS.iter().position(|&q| q == (strategy, precoder)).expect("every pair is listed");
    let mut out = Vec::with_capacity(n_drops * sc.n_users);
    for drop in 0..n_drops as u64 {
        let snr = precoding_drop(sc, grid, drop, reference_snr_db)?[k];
        out.extend(std::iter::repeat_n(snr, sc.n_users));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        Complex::new(re, 0.0)
    }

    fn diag(v: &[f64]) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| c(x))))
    }

    #[test]
    fn autocorrelation_examples() {
        let i = DMatrix::<C64>::identity(3, 3);
        assert_eq!(autocorrelation(&i, Direction::Uplink), i);
        assert_eq!(autocorrelation(&diag(&[2.0, 1.0]), Direction::Uplink), diag(&[4.0, 1.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = gaussian_matrix(4, 4, &mut rng);
        for dir in [Direction::Uplink, Direction::Downlink] {
            let r = autocorrelation(&u, dir);
            assert!(hermitian_defect(&r) < 1e-12);
            assert!(hermitian_eigenvalues(&r).unwrap()[0] >= -1e-12);
        }
    }

    #[test]
    fn condition_number_examples() {
        assert!((condition_number(&DMatrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-12);
        assert!((condition_number(&diag(&[4.0, 1.0])).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(condition_number(&diag(&[1.0, 0.0])).unwrap(), f64::INFINITY);
        let mut ns = DMatrix::<C64>::identity(2, 2);
        ns[(0, 1)] = c(1e-3);
        assert!(condition_number(&ns).is_err());
    }

    #[test]
    fn averaging_complementary_fades() {
        let g = DelayDopplerGrid::new(2, 1, 1.0).unwrap();
        let e = 1e-9;
        let ens = MimoEnsemble::new(g, Direction::Uplink, 2, 2, vec![diag(&[2f64.sqrt(), e]), diag(&[e, 2f64.sqrt()])]).unwrap();
        let r = dd_average_autocorrelation(&ens).unwrap();
        assert!((condition_number(&r).unwrap() - 1.0).abs() < 1e-9);
        assert!(ens.pointwise_condition_numbers().unwrap().iter().all(|&k| k > 1e12));
    }

    #[test]
    fn ensemble_shape_validation() {
        let g = DelayDopplerGrid::new(2, 1, 1.0).unwrap();
        assert!(MimoEnsemble::new(g, Direction::Downlink, 3, 2, vec![DMatrix::zeros(2, 3); 2]).is_ok());
        assert!(MimoEnsemble::new(g, Direction::Downlink, 3, 2, vec![DMatrix::zeros(3, 2); 2]).is_err());
        assert!(MimoEnsemble::new(g, Direction::Downlink, 3, 2, vec![DMatrix::zeros(2, 3); 1]).is_err());
    }

    #[test]
    fn zf_scalar_case() {
        let g = DelayDopplerGrid::new(1, 1, 1.0).unwrap();
        let ens = MimoEnsemble::constant(g, Direction::Downlink, diag(&[2.0, 2.0])).unwrap();
        let x = vec![DVector::from_vec(vec![c(1.0), c(0.0)])];
        let p = zf_precode(&x, &ens).unwrap();
        assert!((p.energy() - 1.0).abs() < 1e-12);
        // ‖D⁻¹X‖² = 1/4, so the receive amplitude is 2.
        assert!((p.scale - 2.0).abs() < 1e-12);
        assert!((p.snr(0.1) - 40.0).abs() < 1e-9);
    }

    #[test]
    fn zf_unitary_has_no_loss() {
        let g = DelayDopplerGrid::new(4, 4, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = gaussian_matrix(3, 3, &mut rng).qr().q();
        let ens = MimoEnsemble::constant(g, Direction::Downlink, q).unwrap();
        let x = random_symbol_vectors(16, 3, &QamConstellation::qpsk(), &mut rng);
        let p = zf_precode(&x, &ens).unwrap();
        // QPSK vectors of 3 users have energy 3 per point.
        assert!((p.scale - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((p.energy() - 16.0).abs() < 1e-9);
    }

    #[test]
    fn zf_excludes_singular_points() {
        let g = DelayDopplerGrid::new(2, 1, 1.0).unwrap();
        let ens = MimoEnsemble::new(g, Direction::Downlink, 2, 2, vec![diag(&[1.0, 0.0]), diag(&[1.0, 1.0])]).unwrap();
        let x = vec![DVector::from_vec(vec![c(1.0), c(1.0)]); 2];
        let p = zf_precode(&x, &ens).unwrap();
        assert_eq!(p.excluded, vec![0]);
        assert!((p.energy() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn modulo_examples() {
        let b = thp_modulo_base(&QamConstellation::qpsk());
        assert!((b - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let z = Complex::new(0.5, -0.5);
        assert_eq!(complex_modulo(z, b), z);
        let w = complex_modulo(Complex::new(0.5 + b, -0.5 - 2.0 * b), b);
        assert!((w - z).norm() < 1e-12);
    }

    #[test]
    fn thp_identity_and_diagonal() {
        let g = DelayDopplerGrid::new(2, 2, 1.0).unwrap();
        let qpsk = QamConstellation::qpsk();
        let base = thp_modulo_base(&qpsk);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_symbol_vectors(4, 3, &qpsk, &mut rng);
        let id = MimoEnsemble::constant(g, Direction::Downlink, DMatrix::identity(3, 3)).unwrap();
        let p = thp_precode(&x, &id, base).unwrap();
        let zf = zf_precode(&x, &id).unwrap();
        for (a, b) in p.z.iter().zip(&zf.z) {
            assert!((a - b).norm() < 1e-12);
        }
        let dg = MimoEnsemble::constant(g, Direction::Downlink, diag(&[0.5, 2.0, 3.0])).unwrap();
        let p = thp_precode(&x, &dg, base).unwrap();
        let zf = zf_precode(&x, &dg).unwrap();
        assert!((p.scale - zf.scale).abs() < 1e-12);
        for (a, b) in p.z.iter().zip(&zf.z) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn thp_noiseless_recovery() {
        let g = DelayDopplerGrid::new(4, 2, 1.0).unwrap();
        let qpsk = QamConstellation::qpsk();
        let base = thp_modulo_base(&qpsk);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ens = MimoEnsemble::gaussian(g, Direction::Downlink, 4, 4, &mut rng).unwrap();
        let x = random_symbol_vectors(8, 4, &qpsk, &mut rng);
        let p = thp_precode(&x, &ens, base).unwrap();
        assert!((p.energy() - 8.0).abs() < 1e-9);
        for ((d, z), xi) in ens.matrices().iter().zip(&p.z).zip(&x) {
            let y = d * z;
            for u in 0..4 {
                assert!((thp_receive(y[u], p.scale, base) - xi[u]).norm() < 1e-9);
            }
        }
        let rank1 = MimoEnsemble::constant(g, Direction::Downlink, DMatrix::from_element(2, 2, c(1.0))).unwrap();
        assert!(thp_precode(&random_symbol_vectors(8, 2, &qpsk, &mut rng), &rank1, base).is_err());
    }

    #[test]
    fn broadside_reflector_is_rank_one() {
        let s = steering_vector(8, 0.0375, 0.075, 0.0);
        assert!(s.iter().all(|z| (z - c(1.0)).norm() < 1e-15));
        let sc = RingScenario { n_users: 1, reflectors_per_user: 1, ..RingScenario::reference(1) };
        let paths = vec![vec![RingPath { gain: c(1.0), delay: 0.0, angle: 0.0 }]];
        let d = ring_channel_at(&sc, &paths, 0.0);
        assert_eq!(d.shape(), (1, 8));
        assert!(d.iter().all(|z| (z - c(1.0)).norm() < 1e-15));
        let rank = d.singular_values().iter().filter(|&&s| s > 1e-9).count();
        assert_eq!(rank, 1);
    }

    #[test]
    fn ring_is_time_invariant_and_seeded() {
        let sc = RingScenario::reference(5);
        let g = DelayDopplerGrid::with_subcarrier_spacing(24, 3, 15e3).unwrap();
        let a = ring_scenario_ensemble(&sc, &g, 0).unwrap();
        for m in 1..3 {
            for n in 0..24 {
                assert!((a.at(m, n) - a.at(0, n)).camax() < 1e-12);
            }
        }
        assert_eq!(a, ring_scenario_ensemble(&sc, &g, 0).unwrap());
        assert_ne!(a, ring_scenario_ensemble(&sc, &g, 1).unwrap());
        assert!((sc.ring_radius() - 299.792458).abs() < 1e-9);
    }

    #[test]
    fn single_user_flat_channel_strategies_agree() {
        let g = DelayDopplerGrid::new(3, 2, 1.0).unwrap();
        let ens = MimoEnsemble::constant(g, Direction::Downlink, DMatrix::from_element(1, 1, Complex::new(0.3, 0.4))).unwrap();
        let qpsk = QamConstellation::qpsk();
        let x = random_symbol_vectors(6, 1, &qpsk, &mut ChaCha8Rng::seed_from_u64(6));
        let base = thp_modulo_base(&qpsk);
        let mut s = Vec::new();
        for st in [PrecodingStrategy::TfPointwise, PrecodingStrategy::DdAveraged] {
            for p in [Precoder::Zf, Precoder::Thp] {
                s.push(precode_scale(&x, &ens, st, p, base).unwrap());
            }
        }
        assert!(s.iter().all(|v| (v - s[0]).abs() < 1e-12));
    }
}
