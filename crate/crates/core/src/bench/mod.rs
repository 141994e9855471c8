//! Declarative reproduction of the published tables and figure data sets.
//!
//! An [`ExperimentConfig`] names the designs, grids and simulation sizes;
//! [`run_experiment`] turns it into [`ReportTable`]s and [`emit`] writes them
//! as long-format CSV with a JSON sidecar.

mod experiments;
pub mod paper;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::charts::{ChartSpec, Family};
use crate::{Error, Result};

pub use paper::{mc_agreement, numeric_agreement, Agreement, PaperValue};

/// Replications per table cell at desk scale.
pub const DESK_REPS: u64 = 1_000_000;
/// Replications per change point for profiles and steady-state cells.
pub const DESK_PROFILE_REPS: u64 = 200_000;
pub const PAPER_SCALE_REPS: u64 = 100_000_000;
pub const DEFAULT_CALIBRATION_TOLERANCE: f64 = 0.0025;

/// How a design's run lengths are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    MonteCarlo,
    /// Quadrature and Markov chain routines; EWMA designs only.
    Numeric,
}

/// A chart of an experiment. Designs without a limit carry the in-control
/// ARL their limit is calibrated to before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub spec: ChartSpec,
    pub calibrate_to: Option<f64>,
    pub evaluation: Evaluation,
}

impl Design {
    pub fn fixed(spec: ChartSpec) -> Self {
        Design { spec, calibrate_to: None, evaluation: Evaluation::MonteCarlo }
    }

    pub fn calibrated(spec: ChartSpec, in_control_arl: f64) -> Self {
        Design { spec: spec.without_calibrated_factor(), calibrate_to: Some(in_control_arl), evaluation: Evaluation::MonteCarlo }
    }

    pub fn numeric(mut self) -> Self {
        self.evaluation = Evaluation::Numeric;
        self
    }

    /// Row label: the design as given, without any calibrated factor.
    pub fn label(&self) -> String {
        self.spec.label()
    }

    fn validate(&self) -> Result<()> {
        match self.calibrate_to {
            None if !self.spec.is_calibrated() => {
                Err(Error::arg(format!("{}: no limit and no calibration target", self.spec)))
            }
            Some(a) if !(a > 1.0 && a.is_finite()) => {
                Err(Error::arg(format!("{}: calibration target must exceed 1, got {a}", self.spec)))
            }
            _ if self.evaluation == Evaluation::Numeric && self.spec.family() != Family::Ewma => {
                Err(Error::arg(format!("{}: numeric evaluation is implemented for EWMA charts only", self.spec)))
            }
            _ => Ok(()),
        }
    }
}

/// Arrangement of a shift-by-change-point experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One row per design (and change point), one column per shift.
    Shifts,
    /// One row per design and shift, one column per change point.
    Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub designs: Vec<Design>,
    /// Shifts as labelled in the output; the simulated shift is `shift * shift_scale`.
    pub shifts: Vec<f64>,
    pub shift_scale: f64,
    /// Change points; 1 is the zero-state ARL, 100 the steady-state proxy.
    pub taus: Vec<u64>,
    pub layout: Layout,
    /// Secondary axis of special experiments: `lambda_q` for table1, `x1` for fig_MECworst.
    pub grid: Vec<f64>,
    pub replications: u64,
    pub profile_replications: u64,
    pub calibration_tolerance: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The configuration that reproduces experiment `id` at desk scale.
    pub fn preset(id: &str) -> Result<Self> {
        let info = find(id)?;
        experiments::preset(info.id)
    }

    pub fn with_replications(mut self, n: u64) -> Self {
        self.replications = n;
        self.profile_replications = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn paper_scale(mut self) -> Self {
        self.replications = PAPER_SCALE_REPS;
        self.profile_replications = PAPER_SCALE_REPS;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let info = find(&self.id)?;
        if self.shifts.is_empty() {
            return Err(Error::arg(format!("{}: empty shift grid", info.id)));
        }
        if self.shifts.iter().any(|d| !d.is_finite()) || !(self.shift_scale.is_finite() && self.shift_scale > 0.0) {
            return Err(Error::arg(format!("{}: shifts must be finite", info.id)));
        }
        if self.taus.is_empty() || self.taus.contains(&0) {
            return Err(Error::arg(format!("{}: change points must be a non-empty set of positive integers", info.id)));
        }
        if self.designs.is_empty() {
            return Err(Error::arg(format!("{}: no designs", info.id)));
        }
        if matches!(info.id, "table1" | "fig_MECworst") && self.grid.is_empty() {
            return Err(Error::arg(format!("{}: empty grid", info.id)));
        }
        if self.replications < 1000 || self.profile_replications < 1000 {
            return Err(Error::arg("at least 1000 replications per cell"));
        }
        if !(self.calibration_tolerance > 0.0 && self.calibration_tolerance < 1.0) {
            return Err(Error::arg("calibration tolerance must lie in (0, 1)"));
        }
        self.designs.iter().try_for_each(Design::validate)
    }
}

/// A published table or figure that can be reproduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExperimentInfo {
    pub id: &'static str,
    pub anchor: &'static str,
}

pub fn list() -> &'static [ExperimentInfo] {
    experiments::CATALOG
}

fn find(id: &str) -> Result<&'static ExperimentInfo> {
    let norm = id.to_ascii_lowercase();
    list()
        .iter()
        .find(|e| e.id.to_ascii_lowercase() == norm)
        .ok_or_else(|| Error::UnknownExperiment(id.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMethod {
    MonteCarlo,
    ClosedForm,
    Numeric,
    Calibration,
    Optimization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: String,
    pub column: String,
    #[serde(with = "crate::serde_float::plain")]
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub n: Option<u64>,
    /// Share of paths that reached the change point, for conditioned estimates.
    pub conditioned_fraction: Option<f64>,
    #[serde(with = "crate::serde_float::option")]
    pub paper_value: Option<f64>,
    pub method: CellMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub anchor: String,
    pub version: String,
    pub master_seed: u64,
    pub replications: u64,
    pub profile_replications: u64,
    pub calibration_tolerance: f64,
    pub elapsed_seconds: f64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub id: String,
    pub row_header: String,
    pub column_header: String,
    pub cells: Vec<Cell>,
    pub provenance: Provenance,
}

impl ReportTable {
    pub fn cell(&self, row: &str, column: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }

    /// Distinct row labels in order of appearance.
    pub fn rows(&self) -> Vec<&str> {
        distinct(self.cells.iter().map(|c| c.row.as_str()))
    }

    pub fn columns(&self) -> Vec<&str> {
        distinct(self.cells.iter().map(|c| c.column.as_str()))
    }

    /// Long-format CSV: labels, estimate, stderr, n, paper value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([&self.row_header, &self.column_header, "estimate", "stderr", "n", "paper_value"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            wr.write_record([
                c.row.clone(),
                c.column.clone(),
                c.estimate.to_string(),
                opt(c.stderr),
                c.n.map(|n| n.to_string()).unwrap_or_default(),
                opt(c.paper_value),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fixed-width text rendering for terminals.
    pub fn render(&self) -> String {
        let mut out = format!("{} ({})\n", self.id, self.provenance.anchor);
        let width = self.cells.iter().map(|c| c.row.len()).max().unwrap_or(0).max(self.row_header.len());
        out += &format!(
            "{:<width$}  {:>10}  {:>12}  {:>10}  {:>10}\n",
            self.row_header, self.column_header, "estimate", "stderr", "paper"
        );
        for c in &self.cells {
            let se = c.stderr.map(|s| format!("{s:.4}")).unwrap_or_default();
            let pv = c.paper_value.map(|p| p.to_string()).unwrap_or_default();
            out += &format!("{:<width$}  {:>10}  {:>12.4}  {:>10}  {:>10}\n", c.row, c.column, c.estimate, se, pv);
        }
        out
    }
}

fn distinct<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = Vec::new();
    for s in it {
        if !seen.contains(&s) {
            seen.push(s);
        }
    }
    seen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// CSV plus the JSON sidecar.
    Csv,
    Json,
}

/// Run one experiment. Every cell is computed or the whole run fails,
/// naming the offending cell.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReportTable>> {
    config.validate()?;
    let info = find(&config.id)?;
    experiments::run(info, config)
}

/// Write `report` into `dir` as `<id>.csv` and/or `<id>.json`.
pub fn emit(report: &ReportTable, format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format == OutputFormat::Csv {
        let path = dir.join(format!("{}.csv", report.id));
        report.write_csv(fs::File::create(&path)?)?;
        written.push(path);
    }
    let path = dir.join(format!("{}.json", report.id));
    fs::write(&path, report.to_json()?)?;
    written.push(path);
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<ReportTable> {
    ReportTable::from_json(&fs::read_to_string(path)?)
}
