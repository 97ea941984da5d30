//! Seeded Monte Carlo experiments. Every experiment is a pure function of the
//! configuration: per-trial random streams come from `(master_seed, stream,
//! index)` and results are reduced in index order, so serial and parallel
//! runs produce identical tables.

mod cond;
mod link;
mod papr;
mod precode;
mod urllc;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::HarnessResult;
use crate::report::ResultTable;

pub use cond::run_cond_hist;
pub use link::{run_ber_sweep, run_mobility};
pub use papr::run_papr;
pub use precode::run_precode_cdf;
pub use urllc::run_urllc;

/// Validates the configuration and runs its experiment.
pub fn run(cfg: &ExperimentConfig) -> HarnessResult<ResultTable> {
    cfg.validate()?;
    match cfg.kind()? {
        ExperimentKind::BerSweep => run_ber_sweep(cfg),
        ExperimentKind::Mobility => run_mobility(cfg),
        ExperimentKind::CondHist => run_cond_hist(cfg),
        ExperimentKind::PrecodeCdf => run_precode_cdf(cfg),
        ExperimentKind::Papr => run_papr(cfg),
        ExperimentKind::Urllc => run_urllc(cfg),
    }
}

/// `f(0..n)` collected in index order, on the rayon pool when `parallel`.
pub(crate) fn map_indexed<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

pub(crate) fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub(crate) fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Empirical quantile by the nearest-rank rule on a sorted copy.
pub(crate) fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Bit and frame error tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Tally {
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    pub frames: u64,
}

impl Tally {
    pub fn add_frame(&mut self, errors: u64, bits: u64) {
        self.bit_errors += errors;
        self.bits += bits;
        self.frame_errors += u64::from(errors > 0);
        self.frames += 1;
    }

    pub fn merge(&mut self, o: &Tally) {
        self.bit_errors += o.bit_errors;
        self.bits += o.bits;
        self.frame_errors += o.frame_errors;
        self.frames += o.frames;
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn push_rows(&self, table: &mut ResultTable, params: &str) {
        table.push_rate(params, "ber", self.bit_errors, self.bits);
        table.push_rate(params, "fer", self.frame_errors, self.frames);
    }
}

pub(crate) fn count_bit_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}
