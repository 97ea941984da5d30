//! Receive-side symbol recovery: per-point equalizers for multicarrier
//! baselines and block MMSE over the full delay-Doppler coupling for OTFS.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{DdFrame, QamConstellation, TfFrame};
use crate::mimo::{right_inverse, SINGULAR_CONDITION};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerKind {
    Zf,
    Mmse,
    MlBruteforce,
}

/// Largest stream count the exhaustive ML search accepts.
pub const MAX_ML_STREAMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualizerConfig {
    pub kind: EqualizerKind,
    pub noise_variance: f64,
    pub max_streams_ml: usize,
}

impl EqualizerConfig {
    pub fn new(kind: EqualizerKind, noise_variance: f64) -> Result<Self> {
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return invalid(format!("noise variance must be finite and non-negative, got {noise_variance}"));
        }
        Ok(Self { kind, noise_variance, max_streams_ml: MAX_ML_STREAMS })
    }

    pub fn zf() -> Self {
        Self { kind: EqualizerKind::Zf, noise_variance: 0.0, max_streams_ml: MAX_ML_STREAMS }
    }

    pub fn mmse(noise_variance: f64) -> Result<Self> {
        Self::new(EqualizerKind::Mmse, noise_variance)
    }
}

/// Estimate at one grid point; `erased` marks a singular ZF solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimate {
    pub x: DVector<C64>,
    pub erased: bool,
}

fn mmse_matrix(h: &DMatrix<C64>, n0: f64) -> Result<DMatrix<C64>> {
    let hh = h.adjoint();
    let mut g = &hh * h;
    for i in 0..g.nrows() {
        g[(i, i)] += n0;
    }
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Singular("H*H + N0 I is not positive definite".into()))?;
    Ok(chol.solve(&hh))
}

/// Equalizes `y = H x + w` at one point.
pub fn equalize_point(
    y: &DVector<C64>,
    h: &DMatrix<C64>,
    cfg: &EqualizerConfig,
    constellation: &QamConstellation<f64>,
) -> Result<PointEstimate> {
    if y.len() != h.nrows() {
        return invalid(format!("observation length {} does not match {} channel rows", y.len(), h.nrows()));
    }
    let streams = h.ncols();
    match cfg.kind {
        EqualizerKind::Zf => {
            let pinv = if h.nrows() == h.ncols() {
                right_inverse(h)
            } else {
                right_inverse(&h.adjoint()).map(|p| p.adjoint())
            };
            Ok(match pinv {
                Some(p) => PointEstimate { x: p * y, erased: false },
                None => PointEstimate { x: DVector::zeros(streams), erased: true },
            })
        }
        EqualizerKind::Mmse => Ok(PointEstimate { x: mmse_matrix(h, cfg.noise_variance)? * y, erased: false }),
        EqualizerKind::MlBruteforce => {
            if streams > cfg.max_streams_ml.min(MAX_ML_STREAMS) {
                return invalid(format!("ML search supports at most {} streams, got {streams}", cfg.max_streams_ml.min(MAX_ML_STREAMS)));
            }
            let pts = constellation.points();
            let total = pts.len().pow(streams as u32);
            let mut best = (f64::INFINITY, DVector::zeros(streams));
            let mut cand = DVector::zeros(streams);
            for idx in 0..total {
                let mut r = idx;
                for s in 0..streams {
                    cand[s] = pts[r % pts.len()];
                    r /= pts.len();
                }
                let d = (y - h * &cand).norm_squared();
                if d < best.0 {
                    best = (d, cand.clone());
                }
            }
            Ok(PointEstimate { x: best.1, erased: false })
        }
    }
}

/// Multi-stream per-point equalization over a set of grid points.
pub fn equalize_pertone_mimo(
    y: &[DVector<C64>],
    h: &[DMatrix<C64>],
    cfg: &EqualizerConfig,
    constellation: &QamConstellation<f64>,
) -> Result<Vec<PointEstimate>> {
    if y.len() != h.len() {
        return invalid(format!("{} observations for {} channel matrices", y.len(), h.len()));
    }
    y.iter().zip(h).map(|(yi, hi)| equalize_point(yi, hi, cfg, constellation)).collect()
}

/// Single-stream per-cell equalization of a multicarrier frame with one
/// complex gain per cell. Returns the estimates and per-cell erasure flags
/// (ZF on a gain that is numerically zero).
pub fn ofdm_equalize_pertone(y: &TfFrame<f64>, h: &[C64], cfg: &EqualizerConfig) -> Result<(TfFrame<f64>, Vec<bool>)> {
    if h.len() != y.data().len() {
        return invalid(format!("{} channel gains for {} cells", h.len(), y.data().len()));
    }
    if cfg.kind == EqualizerKind::MlBruteforce {
        return invalid("per-cell ML is a slicer; use ZF or MMSE and decide afterwards");
    }
    let peak = h.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let mut erased = vec![false; h.len()];
    let mut out = TfFrame::zeros(*y.grid());
    for (i, (&g, &v)) in h.iter().zip(y.data()).enumerate() {
        out.data_mut()[i] = match cfg.kind {
            EqualizerKind::Zf => {
                if g.norm() * SINGULAR_CONDITION <= peak || g.norm() == 0.0 {
                    erased[i] = true;
                    Complex::new(0.0, 0.0)
                } else {
                    v / g
                }
            }
            _ => g.conj() * v / (g.norm_sqr() + cfg.noise_variance),
        };
    }
    Ok((out, erased))
}

/// Real form `[[Re M, -Im M], [Im M, Re M]]` of a complex matrix. Products,
/// adjoints (transposes) and inverses carry over, and real products run on a
/// blocked GEMM.
fn real_embed(m: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Real form of `(H*H + n0 I)⁻¹ H*`.
fn block_mmse_real(h: &DMatrix<C64>, n0: f64) -> Result<DMatrix<f64>> {
    let hr = real_embed(h);
    let hrt = hr.transpose();
    let mut g = &hrt * &hr;
    for i in 0..g.nrows() {
        g[(i, i)] += n0;
    }
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Singular("H*H + N0 I is not positive definite".into()))?;
    let li = lower_triangular_inverse(&chol.l())
        .ok_or_else(|| Error::Singular("Cholesky factor is not invertible".into()))?;
    Ok(li.transpose() * (&li * &hrt))
}

/// Inverse of a lower-triangular matrix by 2x2 block recursion, which keeps
/// most of the work in matrix products.
fn lower_triangular_inverse(l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = l.nrows();
    if n <= 64 {
        return l.solve_lower_triangular(&DMatrix::identity(n, n));
    }
    let h = n / 2;
    let a = lower_triangular_inverse(&l.view((0, 0), (h, h)).into_owned())?;
    let c = lower_triangular_inverse(&l.view((h, h), (n - h, n - h)).into_owned())?;
    let off = -(&c * (l.view((h, 0), (n - h, h)) * &a));
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (h, h)).copy_from(&a);
    out.view_mut((h, h), (n - h, n - h)).copy_from(&c);
    out.view_mut((h, 0), (n - h, h)).copy_from(&off);
    Some(out)
}

/// Linear equalizer over a fixed observation operator, factorized once and
/// applied to many frames. The operator maps the `NM` transmitted delay-Doppler
/// symbols to the observed samples (delay-Doppler or time-frequency); rows can
/// be dropped to ignore cells known to be corrupted.
#[derive(Debug, Clone)]
pub struct BlockEqualizer {
    /// Real form of the `unknowns x kept-observations` filter.
    wr: DMatrix<f64>,
    keep: Option<Vec<usize>>,
    n_obs: usize,
}

impl BlockEqualizer {
    pub fn new(h: &DMatrix<C64>, cfg: &EqualizerConfig) -> Result<Self> {
        Self::build(h, cfg, None)
    }

    /// Ignores the observation rows listed in `erased`.
    pub fn with_erasures(h: &DMatrix<C64>, erased: &[usize], cfg: &EqualizerConfig) -> Result<Self> {
        if let Some(&r) = erased.iter().find(|&&r| r >= h.nrows()) {
            return invalid(format!("erased row {r} outside {} observations", h.nrows()));
        }
        let keep: Vec<usize> = (0..h.nrows()).filter(|r| !erased.contains(r)).collect();
        Self::build(h, cfg, Some(keep))
    }

    fn build(h: &DMatrix<C64>, cfg: &EqualizerConfig, keep: Option<Vec<usize>>) -> Result<Self> {
        if h.nrows() > 4096 || h.ncols() > 4096 {
            return invalid(format!("block equalizer limited to 4096 unknowns, got {}x{}", h.nrows(), h.ncols()));
        }
        let hk = match &keep {
            Some(rows) => h.select_rows(rows.iter()),
            None => h.clone(),
        };
        let wr = match cfg.kind {
            EqualizerKind::Mmse => block_mmse_real(&hk, cfg.noise_variance)?,
            EqualizerKind::Zf => {
                if hk.nrows() < hk.ncols() {
                    return invalid("zero forcing needs at least as many observations as unknowns");
                }
                block_mmse_real(&hk, 0.0).map_err(|_| Error::Singular("coupling is not invertible".into()))?
            }
            EqualizerKind::MlBruteforce => return invalid("block equalization supports ZF and MMSE"),
        };
        Ok(Self { wr, keep, n_obs: h.nrows() })
    }

    pub fn n_unknowns(&self) -> usize {
        self.wr.nrows() / 2
    }

    /// The complex filter matrix (unknowns x kept observations).
    pub fn filter(&self) -> DMatrix<C64> {
        let (r, c) = (self.wr.nrows() / 2, self.wr.ncols() / 2);
        DMatrix::from_fn(r, c, |i, j| Complex::new(self.wr[(i, j)], self.wr[(i + r, j)]))
    }

    pub fn equalize_vec(&self, y: &[C64]) -> Result<Vec<C64>> {
        Ok(self.equalize_batch(&[y])?.pop().expect("one frame in, one out"))
    }

    /// Equalizes several observation vectors with one matrix product.
    pub fn equalize_batch<Y: AsRef<[C64]>>(&self, ys: &[Y]) -> Result<Vec<Vec<C64>>> {
        let k = self.wr.ncols() / 2;
        let mut yr = DMatrix::<f64>::zeros(2 * k, ys.len());
        for (col, y) in ys.iter().enumerate() {
            let y = y.as_ref();
            if y.len() != self.n_obs {
                return invalid(format!("expected {} observations, got {}", self.n_obs, y.len()));
            }
            let mut put = |row: usize, z: C64| {
                yr[(row, col)] = z.re;
                yr[(row + k, col)] = z.im;
            };
            match &self.keep {
                Some(rows) => rows.iter().enumerate().for_each(|(i, &r)| put(i, y[r])),
                None => y.iter().enumerate().for_each(|(i, &z)| put(i, z)),
            }
        }
        let xr = &self.wr * yr;
        let n = self.n_unknowns();
        Ok((0..ys.len()).map(|col| (0..n).map(|i| Complex::new(xr[(i, col)], xr[(i + n, col)])).collect()).collect())
    }

    pub fn equalize(&self, y: &DdFrame<f64>) -> Result<DdFrame<f64>> {
        DdFrame::from_vec(*y.grid(), self.equalize_vec(y.data())?)
    }
}

/// One-shot block equalization of a delay-Doppler frame.
pub fn otfs_equalize_block(y: &DdFrame<f64>, h_eff: &DMatrix<C64>, cfg: &EqualizerConfig) -> Result<DdFrame<f64>> {
    if h_eff.nrows() != y.grid().len() || h_eff.ncols() != y.grid().len() {
        return invalid(format!("coupling is {}x{}, frame has {} cells", h_eff.nrows(), h_eff.ncols(), y.grid().len()));
    }
    BlockEqualizer::new(h_eff, cfg)?.equalize(y)
}

/// Post-MMSE SINR of every stream: `1 / (N0 [(H*H + N0 I)⁻¹]_kk) - 1`.
pub fn mmse_sinr(h: &DMatrix<C64>, n0: f64) -> Result<Vec<f64>> {
    if !(n0 > 0.0) {
        return invalid("MMSE SINR needs positive noise variance");
    }
    let mut g = h.adjoint() * h;
    for i in 0..g.nrows() {
        g[(i, i)] += n0;
    }
    let inv = g
        .cholesky()
        .ok_or_else(|| Error::Singular("H*H + N0 I is not positive definite".into()))?
        .inverse();
    Ok((0..inv.nrows()).map(|k| 1.0 / (n0 * inv[(k, k)].re) - 1.0).collect())
}
