//! Result tables, CSV output and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::HarnessResult;

/// Error-event count below which a rate is flagged `low_confidence`.
pub const MIN_ERROR_EVENTS: u64 = 100;

pub const CSV_HEADER: [&str; 8] = ["experiment", "config_hash", "seed", "parameters", "metric", "value", "trials", "flag"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub parameters: String,
    pub metric: String,
    pub value: f64,
    pub trials: u64,
    pub flag: String,
}

/// Raw per-sample output written next to the result table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    experiment: String,
    config_hash: String,
    seed: u64,
    rows: Vec<Row>,
    samples: Option<Samples>,
}

/// SHA-256 of the canonical configuration. Fields that only affect how a run
/// executes (`parallel`, `output_path`) are left out, so the hash identifies
/// the results.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let normalized = ExperimentConfig { parallel: true, output_path: None, ..cfg.clone() };
    let digest = Sha256::digest(normalized.canonical_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl ResultTable {
    pub fn new(cfg: &ExperimentConfig, experiment: &str) -> Self {
        Self { experiment: experiment.to_string(), config_hash: config_hash(cfg), seed: cfg.master_seed, rows: Vec::new(), samples: None }
    }

    pub fn push(&mut self, parameters: impl Into<String>, metric: &str, value: f64, trials: u64, flag: &str) {
        self.rows.push(Row {
            experiment: self.experiment.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            parameters: parameters.into(),
            metric: metric.to_string(),
            value,
            trials,
            flag: flag.to_string(),
        });
    }

    /// A rate estimated from `events` out of `trials`, with its 95% normal
    /// approximation half-width; flagged when fewer than
    /// [`MIN_ERROR_EVENTS`] events were seen.
    pub fn push_rate(&mut self, parameters: &str, metric: &str, events: u64, trials: u64) {
        let p = if trials == 0 { 0.0 } else { events as f64 / trials as f64 };
        let half = if trials == 0 { 0.0 } else { 1.96 * (p * (1.0 - p) / trials as f64).sqrt() };
        let flag = if events < MIN_ERROR_EVENTS { "low_confidence" } else { "" };
        self.push(parameters, metric, p, trials, flag);
        self.push(parameters, &format!("{metric}_ci95"), half, trials, flag);
    }

    pub fn set_samples(&mut self, samples: Samples) {
        self.samples = Some(samples);
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn samples(&self) -> Option<&Samples> {
        self.samples.as_ref()
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// First value of `metric` whose parameters equal `parameters`.
    pub fn value(&self, parameters: &str, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.parameters == parameters && r.metric == metric).map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> HarnessResult<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.experiment.as_str(),
                r.config_hash.as_str(),
                &r.seed.to_string(),
                r.parameters.as_str(),
                r.metric.as_str(),
                &format_value(r.value),
                &r.trials.to_string(),
                r.flag.as_str(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn write_samples_csv<W: Write>(&self, w: W) -> HarnessResult<()> {
        let Some(s) = &self.samples else { return Ok(()) };
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&s.header)?;
        for r in &s.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal, `inf`/`-inf`/`nan` spelled out.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// `<stem>.samples.csv` next to the result file.
pub fn samples_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    output.with_file_name(format!("{stem}.samples.csv"))
}

/// `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub config_hash: &'a str,
    pub master_seed: u64,
    pub tool_version: &'static str,
    pub core_version: &'static str,
    pub wall_time_s: f64,
    pub rows: usize,
    pub config: &'a ExperimentConfig,
}

/// Writes the result CSV, the optional samples CSV and the manifest.
pub fn write_outputs(table: &ResultTable, cfg: &ExperimentConfig, output: &Path, wall_time_s: f64) -> HarnessResult<()> {
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    table.write_csv(std::fs::File::create(output)?)?;
    if table.samples.is_some() {
        table.write_samples_csv(std::fs::File::create(samples_path(output))?)?;
    }
    let manifest = Manifest {
        experiment: &table.experiment,
        config_hash: &table.config_hash,
        master_seed: cfg.master_seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        core_version: ddmodem::VERSION,
        wall_time_s,
        rows: table.rows.len(),
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(manifest_path(output), text + "\n")?;
    Ok(())
}
