//! Result tables and their CSV/JSON forms.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use crate::error::Result;

pub const COVERAGE_HEADER: [&str; 11] = [
    "kind", "n", "p", "x_dist", "scheme", "level", "frequency", "mc_se", "R", "B", "seed",
];

/// One level of one coverage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub kind: String,
    pub n: usize,
    pub p: usize,
    pub x_dist: String,
    pub scheme: String,
    pub level: f64,
    pub frequency: f64,
    pub mc_se: f64,
    #[serde(rename = "R")]
    pub reps: usize,
    #[serde(rename = "B")]
    pub boot: usize,
    pub seed: u64,
}

impl CoverageRow {
    pub fn new(cfg: &ExperimentConfig, level: f64, frequency: f64) -> Self {
        Self {
            kind: cfg.kind.to_string(),
            n: cfg.n,
            p: cfg.p,
            x_dist: cfg.x_dist.to_string(),
            scheme: cfg.scheme.to_string(),
            level,
            frequency,
            mc_se: (frequency * (1.0 - frequency) / cfg.reps as f64).sqrt(),
            reps: cfg.reps,
            boot: cfg.boot,
            seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageTable {
    pub rows: Vec<CoverageRow>,
}

impl CoverageTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(COVERAGE_HEADER)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<std::result::Result<Vec<CoverageRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn emit(&self, format: OutputFormat, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        match format {
            OutputFormat::Csv => self.write_csv(file),
            OutputFormat::Json => Ok(serde_json::to_writer_pretty(file, self)?),
        }
    }
}

/// Reference CDF of a CDF experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum Reference {
    Normal,
    ChiSquared { df: usize },
}

/// Kolmogorov-Smirnov summaries of a CDF experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSummary {
    pub n: usize,
    pub p: usize,
    pub samples: usize,
    pub seed: u64,
    pub x_dist: String,
    pub y_dist: String,
    pub reference: Reference,
    /// Distance between the two empirical CDFs.
    pub ks_sn_syn: f64,
    /// Distance from the `X` statistic to the reference CDF.
    pub ks_sn_ref: f64,
    /// Distance from the `Y` statistic to the reference CDF.
    pub ks_syn_ref: f64,
}

/// Sorted realizations of both statistics and their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfDataset {
    pub sn: Vec<f64>,
    pub syn: Vec<f64>,
    pub summary: CdfSummary,
}

impl CdfDataset {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value_sn", "value_syn"])?;
        for (a, b) in self.sn.iter().zip(&self.syn) {
            w.write_record([a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `path` with a `.json` extension.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// CSV data at `path` plus the JSON summary beside it, or a single JSON
    /// document with both.
    pub fn emit(&self, format: OutputFormat, path: &Path) -> Result<()> {
        match format {
            OutputFormat::Csv => {
                self.write_csv(File::create(path)?)?;
                let sidecar = Self::sidecar_path(path);
                serde_json::to_writer_pretty(File::create(sidecar)?, &self.summary)?;
                Ok(())
            }
            OutputFormat::Json => Ok(serde_json::to_writer_pretty(File::create(path)?, self)?),
        }
    }
}

/// Decompositions of a target law into a Gaussian plus a residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentFitReport {
    pub target: String,
    pub order: usize,
    pub target_moments: Vec<f64>,
    /// Largest Gaussian variance that leaves a solvable residual.
    pub max_var_z: f64,
    pub residual_moments: Vec<f64>,
    /// `conv(...)` with an atomic residual.
    pub atomic_model: String,
    pub atomic_gap: f64,
    pub pareto_shape: f64,
    /// `conv(...)` with a shifted-scaled Pareto residual matching three
    /// moments, when the target admits one.
    pub pareto_model: Option<String>,
    pub pareto_var_z: Option<f64>,
    pub pareto_gap: Option<f64>,
}

impl MomentFitReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(", ");
        s.push_str(&format!("target = {}\n", self.target));
        s.push_str(&format!("order = {}\n", self.order));
        s.push_str(&format!("target_moments = [{}]\n", list(&self.target_moments)));
        s.push_str(&format!("max_var_z = {:.12}\n", self.max_var_z));
        s.push_str(&format!("residual_moments = [{}]\n", list(&self.residual_moments)));
        s.push_str(&format!("atomic_model = {}\n", self.atomic_model));
        s.push_str(&format!("atomic_gap = {:e}\n", self.atomic_gap));
        if let (Some(m), Some(v), Some(g)) = (&self.pareto_model, self.pareto_var_z, self.pareto_gap) {
            s.push_str(&format!("pareto_shape = {}\n", self.pareto_shape));
            s.push_str(&format!("pareto_model = {m}\n"));
            s.push_str(&format!("pareto_var_z = {v:.12}\n"));
            s.push_str(&format!("pareto_gap = {g:e}\n"));
        }
        s
    }
}
