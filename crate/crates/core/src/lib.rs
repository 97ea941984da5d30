//! Delay-Doppler modem laboratory: OTFS modulation over the Zak and
//! symplectic Fourier transforms, a delay-Doppler channel simulator,
//! equalizers and MU-MIMO precoding.
//!
//! The signal path (`lattice`, `transforms`, `modem`, `channel`) is generic over
//! the real scalar type; the aliases below fix it to `f64` or `f32`. The MIMO
//! and detection layers work in `f64`.
//!
//! ```
//! use ddmodem::channel::{apply_channel, ChannelMode, DdChannel, DdChannelTap};
//! use ddmodem::modem::{ModemConfig, ModemMode};
//! use ddmodem::{C64, DdFrame, DelayDopplerGrid, Modem, QamConstellation};
//!
//! # fn main() -> ddmodem::Result<()> {
//! let grid = DelayDopplerGrid::with_subcarrier_spacing(16, 16, 15e3)?;
//! let modem = Modem::new(ModemConfig::new(grid, 4, ModemMode::OtfsMulticarrier, QamConstellation::qpsk())?);
//! let bits: Vec<u8> = (0..2 * grid.len()).map(|i| (i % 3 == 0) as u8).collect();
//! let x = DdFrame::from_vec(grid, modem.config().constellation.map(&bits)?)?;
//!
//! // One path, two samples late, shifted by one Doppler bin.
//! let tap = DdChannelTap::new(2.0 * grid.delay_resolution(), grid.doppler_resolution(), C64::new(1.0, 0.0));
//! let ch = DdChannel::new(vec![tap], ChannelMode::Linear)?;
//! let y = modem.otfs_demodulate(&apply_channel(&modem.otfs_modulate(&x)?, &ch)?)?;
//! assert_eq!(y.data().len(), 256);
//! # Ok(())
//! # }
//! ```

pub mod channel;
pub mod detect;
pub mod error;
pub mod lattice;
pub mod mimo;
pub mod modem;
pub mod rng;
pub mod scalar;
pub mod transforms;

pub use error::{Error, Result};

pub use lattice::DelayDopplerGrid;
pub use scalar::Real;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type C32 = Complex<f32>;

pub type DdFrame = lattice::DdFrame<f64>;
pub type TfFrame = lattice::TfFrame<f64>;
pub type TimeSignal = lattice::TimeSignal<f64>;
pub type QamConstellation = lattice::QamConstellation<f64>;
pub type Transformer = transforms::Transformer<f64>;
pub type Modem = modem::Modem<f64>;

pub type DdFrame32 = lattice::DdFrame<f32>;
pub type TfFrame32 = lattice::TfFrame<f32>;
pub type TimeSignal32 = lattice::TimeSignal<f32>;
pub type QamConstellation32 = lattice::QamConstellation<f32>;
pub type Transformer32 = transforms::Transformer<f32>;
pub type Modem32 = modem::Modem<f32>;
