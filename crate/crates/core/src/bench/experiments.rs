use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use super::paper;
use super::{
    Cell, CellMethod, Design, Evaluation, ExperimentConfig, ExperimentInfo, Layout, Provenance, ReportTable,
    DEFAULT_CALIBRATION_TOLERANCE, DESK_PROFILE_REPS, DESK_REPS,
};
use crate::analytic::{ewma_arl_numeric, ewma_ced_numeric};
use crate::calibrate::{calibrate_ewma_numeric, calibrate_limit, k_from_lambda, match_ma_from_dma, CalibrationTarget};
use crate::charts::{ChartSpec, Family, RunsRule};
use crate::mc::{self, ChangePointModel, RunLengthEstimate};
use crate::{Error, Result, SeedPlan, DEFAULT_SEED};

pub(super) const CATALOG: &[ExperimentInfo] = &[
    ExperimentInfo { id: "table1", anchor: "Table 1: reference values k matching MEC designs, CUSUM thresholds h for A=170" },
    ExperimentInfo { id: "table2", anchor: "Table 2: RR-CUSUM zero-state ARL with 10^8-replication rows and corrected AL*" },
    ExperimentInfo { id: "table3", anchor: "Table 3: 2-of-2 and 2-of-3 RR-CUSUM versus standard CUSUM" },
    ExperimentInfo { id: "table4", anchor: "Table 4: 2-of-2 RR-EWMA and standard EWMA ARL results" },
    ExperimentInfo { id: "table5", anchor: "Table 5: zero-state ARL of modified and common 2-of-3 EWMA and standard EWMA" },
    ExperimentInfo { id: "table6", anchor: "Table 6: zero-state ARL of DMA(w2), MA(w1) and EWMA(lambda), A=370" },
    ExperimentInfo { id: "table_optW", anchor: "Table 7: window sizes minimising D100 for MA and DMA, A=370" },
    ExperimentInfo { id: "table_dewma_zARL", anchor: "Table 8: zero-state ARL of DEWMA and EWMA, A=200" },
    ExperimentInfo { id: "table_dewma_sARL", anchor: "Table 9: steady-state ARL (D100) of TEWMA, DEWMA and EWMA, A=200" },
    ExperimentInfo { id: "table_dpm_zARL", anchor: "Table 10: zero-state ARL of PM, DPM and two EWMA designs, A=200" },
    ExperimentInfo { id: "fig_dtau05MEC", anchor: "Figure 1: CED profiles of MEC and CUSUM, delta=0.5, A=170" },
    ExperimentInfo { id: "fig_dtau15MEC", anchor: "Figure 2: CED profiles of MEC and CUSUM, delta=1.5, A=170" },
    ExperimentInfo { id: "fig_arlMEC", anchor: "Figure 3: zero-state and steady-state ARL of MEC and CUSUM vs. shift" },
    ExperimentInfo { id: "fig_MECworst", anchor: "Figure 4: out-of-control ARL conditioned on X1 = x1 for MEC and CUSUM" },
    ExperimentInfo { id: "fig_madma_little", anchor: "Figure 5: CED profiles of DMA(6), MA(9) and EWMA(0.202), A=370" },
    ExperimentInfo { id: "fig_madma_optim", anchor: "Figure 6: D100 of MA and DMA vs. window size, A=370" },
    ExperimentInfo { id: "fig_madmaewma_sARL", anchor: "Figure 7: D100 of MA, DMA and EWMA designs optimal at delta 0.6 and 1.5" },
    ExperimentInfo { id: "fig_dewma_CED", anchor: "Figure 8: CED profiles of DEWMA(0.1) and EWMA(0.05), A=200" },
    ExperimentInfo { id: "fig_dpm_CED", anchor: "Figure 9: CED profiles of PM, DPM and EWMA(0.05), A=200" },
];

const MIN_WINDOW: usize = 2;

/// In-control ARL that the corrected RR-CUSUM alarm limits aim at.
const RR_CUSUM_TARGET: f64 = 168.0;

fn base(id: &str, designs: Vec<Design>, shifts: &[f64]) -> ExperimentConfig {
    ExperimentConfig {
        id: id.to_string(),
        designs,
        shifts: shifts.to_vec(),
        shift_scale: 1.0,
        taus: vec![1],
        layout: Layout::Shifts,
        grid: Vec::new(),
        replications: DESK_REPS,
        profile_replications: DESK_PROFILE_REPS,
        calibration_tolerance: DEFAULT_CALIBRATION_TOLERANCE,
        seed: DEFAULT_SEED,
        out: None,
    }
}

fn profile(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.taus = (1..=100).collect();
    cfg.layout = Layout::Profile;
    cfg
}

fn steady(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.taus = vec![100];
    cfg
}

fn fixed(spec: Result<ChartSpec>) -> Result<Design> {
    Ok(Design::fixed(spec?))
}

fn cal(spec: Result<ChartSpec>, a: f64) -> Result<Design> {
    Ok(Design::calibrated(spec?, a))
}

fn ewma_numeric(lambda: f64, a: f64) -> Result<Design> {
    Ok(Design::calibrated(ChartSpec::builder(Family::Ewma).lambda(lambda).build()?, a).numeric())
}

fn uncal(family: Family) -> crate::charts::SpecBuilder {
    ChartSpec::builder(family)
}

fn mec_designs() -> Result<Vec<Design>> {
    Ok(vec![
        cal(uncal(Family::Mec).lambda(0.1).a_star(0.5).build(), 170.0)?,
        fixed(ChartSpec::cusum(0.1147, 9.8345))?,
        cal(uncal(Family::Mec).lambda(0.25).a_star(0.5).build(), 170.0)?,
        fixed(ChartSpec::cusum(0.189, 7.712))?,
    ])
}

fn rr_cusum(rule: RunsRule, wl: f64, al: f64) -> Result<Design> {
    fixed(ChartSpec::rr_cusum(0.5, wl, al, rule))
}

const SHIFTS_CUSUM: [f64; 6] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
const SHIFTS_EWMA: [f64; 7] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
const SHIFTS_MA: [f64; 10] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.25, 1.5, 2.0, 3.0];
const SHIFTS_OPT: [f64; 11] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0];
const SHIFTS_DEWMA: [f64; 9] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5, 2.0];
const SHIFTS_DPM: [f64; 8] = [0.0, 0.25, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0];
/// In-control ARL of the published MA and DMA designs, per window pair.
const TABLE6_ARL0: [(usize, f64, f64); 5] =
    [(2, 371.5, 369.8), (3, 370.3, 370.5), (4, 369.6, 370.8), (5, 369.7, 370.8), (6, 370.6, 370.4)];

pub(super) fn preset(id: &str) -> Result<ExperimentConfig> {
    use RunsRule::{TwoOfThree, TwoOfTwo};
    let inf = f64::INFINITY;
    let cfg = match id {
        "table1" => {
            let grid = vec![0.1, 0.25, 0.5, 0.75, 1.0];
            let designs = grid
                .iter()
                .map(|&l| cal(uncal(Family::Cusum).k(k_from_lambda(l, 0.5)).build(), 170.0))
                .collect::<Result<_>>()?;
            ExperimentConfig { grid, ..base(id, designs, &[0.0]) }
        }
        "table2" => {
            let d = [
                (TwoOfTwo, 3.42, 4.8),
                (TwoOfTwo, 3.44, 4.6),
                (TwoOfTwo, 3.48, 4.4),
                (TwoOfTwo, 3.53, 4.2),
                (TwoOfThree, 3.5, 4.44),
                (TwoOfThree, 3.6, 4.19),
                (TwoOfThree, 3.7, 4.08),
                (TwoOfThree, 3.8, 4.03),
            ];
            let designs = d.iter().map(|&(r, wl, al)| rr_cusum(r, wl, al)).collect::<Result<_>>()?;
            base(id, designs, &SHIFTS_CUSUM)
        }
        "table3" => {
            let d = [
                (TwoOfTwo, 3.42, inf),
                (TwoOfTwo, 3.44, 4.65),
                (TwoOfTwo, 3.48, 4.38),
                (TwoOfTwo, 3.53, 4.23),
                (TwoOfThree, 3.5, 4.52),
                (TwoOfThree, 3.6, 4.18),
                (TwoOfThree, 3.7, 4.08),
                (TwoOfThree, 3.8, 4.03),
            ];
            let mut designs: Vec<Design> = d.iter().map(|&(r, wl, al)| rr_cusum(r, wl, al)).collect::<Result<_>>()?;
            for (k, h) in [(0.5, 4.002), (0.4933, 4.045), (0.49, 4.067), (0.48, 4.134)] {
                designs.push(fixed(ChartSpec::cusum(k, h))?);
            }
            base(id, designs, &SHIFTS_CUSUM)
        }
        "table4" => {
            // The limit 2.4145 for lambda=0.1 gives the printed in-control ARL 169.99.
            let d = [(0.1, 2.145, 2.4145), (0.25, 2.184, 2.6282), (0.5, 2.034, 2.7241), (0.75, 1.830, 2.7493)];
            let mut designs = Vec::new();
            for (l, ls, c) in d {
                designs.push(fixed(ChartSpec::rr_ewma(l, ls, TwoOfTwo))?);
                designs.push(fixed(ChartSpec::ewma(l, c))?);
            }
            base(id, designs, &SHIFTS_EWMA)
        }
        "table5" => {
            let designs = vec![
                fixed(ChartSpec::rr_ewma(0.1, 2.158, TwoOfThree))?,
                fixed(ChartSpec::rr_ewma(0.1, 2.158, RunsRule::ModifiedTwoOfThree))?,
                fixed(ChartSpec::ewma(0.1, 2.4098))?.numeric(),
            ];
            base(id, designs, &SHIFTS_EWMA)
        }
        "table6" => {
            let mut designs = Vec::new();
            for (w2, a_dma, a_ma) in TABLE6_ARL0 {
                let m = match_ma_from_dma(w2)?;
                designs.push(cal(uncal(Family::Dma).window(w2).build(), a_dma)?);
                designs.push(cal(uncal(Family::Ma).window(m.w1).build(), a_ma)?);
                designs.push(ewma_numeric((m.lambda * 1000.0).round() / 1000.0, 370.0)?);
            }
            base(id, designs, &SHIFTS_MA)
        }
        "table_optW" => {
            let designs = vec![
                cal(uncal(Family::Ma).window(80).build(), 370.0)?,
                cal(uncal(Family::Dma).window(60).build(), 370.0)?,
            ];
            ExperimentConfig { calibration_tolerance: 0.005, ..steady(base(id, designs, &SHIFTS_OPT)) }
        }
        "table_dewma_zARL" => {
            let designs = vec![
                cal(uncal(Family::Dewma).lambda(0.1).build(), 200.0)?,
                ewma_numeric(0.05, 200.0)?,
                ewma_numeric(0.1, 200.0)?,
            ];
            ExperimentConfig { shift_scale: 5f64.sqrt(), ..base(id, designs, &SHIFTS_DEWMA) }
        }
        "table_dewma_sARL" => {
            let designs = vec![
                fixed(ChartSpec::tewma(0.13, 1.91))?,
                cal(uncal(Family::Dewma).lambda(0.1).build(), 200.0)?,
                ewma_numeric(0.05, 200.0)?,
            ];
            ExperimentConfig { shift_scale: 5f64.sqrt(), ..steady(base(id, designs, &SHIFTS_DEWMA[1..])) }
        }
        "table_dpm_zARL" => {
            let designs = vec![
                fixed(ChartSpec::pm(0.35, 6.415))?,
                fixed(ChartSpec::dpm(0.35, 2.596))?,
                ewma_numeric(0.05, 200.0)?,
                ewma_numeric(0.007, 200.0)?,
            ];
            base(id, designs, &SHIFTS_DPM)
        }
        "fig_dtau05MEC" | "fig_dtau15MEC" => {
            let mut designs = mec_designs()?;
            designs.push(fixed(ChartSpec::cusum(0.5, 4.0133))?);
            let delta = if id == "fig_dtau05MEC" { 0.5 } else { 1.5 };
            profile(base(id, designs, &[delta]))
        }
        "fig_arlMEC" => ExperimentConfig {
            taus: vec![1, 100],
            ..base(id, mec_designs()?, &[0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0])
        },
        "fig_MECworst" => {
            let grid = (0..=32).map(|j| -4.0 + 0.25 * j as f64).collect();
            ExperimentConfig { grid, ..base(id, mec_designs()?, &[0.5, 0.75, 1.0]) }
        }
        "fig_madma_little" => {
            let designs = vec![
                cal(uncal(Family::Dma).window(6).build(), 370.0)?,
                cal(uncal(Family::Ma).window(9).build(), 370.0)?,
                ewma_numeric(0.202, 370.0)?,
            ];
            profile(base(id, designs, &[0.6, 1.0, 2.0, 3.0]))
        }
        "fig_madma_optim" => {
            let ma = [2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 14, 16, 18, 20, 23, 26, 30, 35, 40, 45, 50, 60, 70, 80];
            let dma = [2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 14, 16, 18, 20, 22, 25, 30, 35, 40, 44, 50, 60];
            let mut designs = Vec::new();
            for w in ma {
                designs.push(cal(uncal(Family::Ma).window(w).build(), 370.0)?);
            }
            for w in dma {
                designs.push(cal(uncal(Family::Dma).window(w).build(), 370.0)?);
            }
            let shifts: Vec<f64> = (1..=10).map(|j| 0.2 * j as f64).map(|d| (d * 10.0).round() / 10.0).collect();
            ExperimentConfig { calibration_tolerance: 0.005, ..steady(base(id, designs, &shifts)) }
        }
        "fig_madmaewma_sARL" => {
            let designs = vec![
                cal(uncal(Family::Ma).window(20).build(), 370.0)?,
                cal(uncal(Family::Dma).window(12).build(), 370.0)?,
                ewma_numeric(0.069, 370.0)?,
                cal(uncal(Family::Ma).window(5).build(), 370.0)?,
                cal(uncal(Family::Dma).window(3).build(), 370.0)?,
                ewma_numeric(0.255, 370.0)?,
            ];
            steady(base(id, designs, &SHIFTS_OPT))
        }
        "fig_dewma_CED" => {
            let designs = vec![cal(uncal(Family::Dewma).lambda(0.1).build(), 200.0)?, ewma_numeric(0.05, 200.0)?];
            ExperimentConfig { shift_scale: 5f64.sqrt(), ..profile(base(id, designs, &[0.2, 0.5, 1.0, 2.0])) }
        }
        "fig_dpm_CED" => {
            let mut designs = Vec::new();
            for family in [Family::Pm, Family::Dpm] {
                for p in [0.2, 0.35, 0.5] {
                    let b = uncal(family).exponent(p);
                    designs.push(match (family, p == 0.35) {
                        (Family::Pm, true) => fixed(b.limit(6.415).build())?,
                        (_, true) => fixed(b.limit(2.596).build())?,
                        _ => cal(b.build(), 200.0)?,
                    });
                }
            }
            designs.push(ewma_numeric(0.05, 200.0)?);
            ExperimentConfig { calibration_tolerance: 0.01, ..profile(base(id, designs, &[0.35, 0.75, 1.0, 2.0])) }
        }
        other => return Err(Error::UnknownExperiment(other.to_string())),
    };
    Ok(cfg)
}

pub(super) fn run(info: &ExperimentInfo, cfg: &ExperimentConfig) -> Result<Vec<ReportTable>> {
    let start = Instant::now();
    let mut ctx = Ctx { id: info.id, cfg, cells: Vec::new() };
    let shift_header = shift_header(cfg.shift_scale);
    let (row_header, column_header) = match info.id {
        "table1" => {
            ctx.table1()?;
            ("quantity", "lambda_q".to_string())
        }
        "table_optW" => {
            ctx.optimal_windows()?;
            ("quantity", shift_header)
        }
        "fig_MECworst" => {
            ctx.worst_case()?;
            ("chart", "x1".to_string())
        }
        _ => match cfg.layout {
            Layout::Shifts => {
                ctx.shift_grid()?;
                if info.id == "table2" {
                    ctx.corrected_alarm_limits()?;
                }
                ("chart", shift_header)
            }
            Layout::Profile => {
                ctx.profiles()?;
                ("chart", "tau".to_string())
            }
        },
    };
    let provenance = Provenance {
        anchor: info.anchor.to_string(),
        version: concat!("cchart ", env!("CARGO_PKG_VERSION")).to_string(),
        master_seed: cfg.seed,
        replications: cfg.replications,
        profile_replications: cfg.profile_replications,
        calibration_tolerance: cfg.calibration_tolerance,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
    };
    Ok(vec![ReportTable {
        id: info.id.to_string(),
        row_header: row_header.to_string(),
        column_header,
        cells: ctx.cells,
        provenance,
    }])
}

fn shift_header(scale: f64) -> String {
    if scale == 1.0 {
        "delta".to_string()
    } else if (scale - 5f64.sqrt()).abs() < 1e-12 {
        "delta/sqrt(5)".to_string()
    } else {
        format!("delta/{scale}")
    }
}

struct Ctx<'a> {
    id: &'static str,
    cfg: &'a ExperimentConfig,
    cells: Vec<Cell>,
}

impl Ctx<'_> {
    fn seed(&self, label: &str) -> u64 {
        SeedPlan::new(self.cfg.seed).derive(label).master_seed
    }

    fn paper(&self, row: &str, column: &str) -> Option<f64> {
        paper::lookup(self.id, row, column).map(|p| p.value)
    }

    fn wrap<T>(&self, row: &str, column: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| Error::Cell { experiment: self.id.to_string(), cell: format!("[{row}, {column}]"), source: Box::new(e) })
    }

    fn estimate_cell(&self, row: String, column: String, est: RunLengthEstimate) -> Result<Cell> {
        if est.censored > 0 {
            let err = Error::Censored { count: est.censored, replications: est.replications, cap: mc::RUN_LENGTH_CAP };
            return self.wrap(&row, &column, Err(err));
        }
        let conditioned = (est.conditioned_fraction < 1.0).then_some(est.conditioned_fraction);
        Ok(Cell {
            paper_value: self.paper(&row, &column),
            row,
            column,
            estimate: est.mean,
            stderr: Some(est.stderr),
            n: Some(est.replications),
            conditioned_fraction: conditioned,
            method: CellMethod::MonteCarlo,
        })
    }

    fn numeric_cell(&self, row: String, column: String, value: f64) -> Cell {
        Cell {
            paper_value: self.paper(&row, &column),
            row,
            column,
            estimate: value,
            stderr: None,
            n: None,
            conditioned_fraction: None,
            method: CellMethod::Numeric,
        }
    }

    /// Fix the design's limit, recording the calibrated factor as a cell.
    fn resolve(&mut self, d: &Design, row: &str, column: &str) -> Result<ChartSpec> {
        let Some(a) = d.calibrate_to else {
            return Ok(d.spec.clone());
        };
        let label = d.label();
        let spec = match d.evaluation {
            Evaluation::Numeric => {
                let lambda = d.spec.lambda().unwrap_or(1.0);
                let c = self.wrap(row, column, calibrate_ewma_numeric(lambda, a, d.spec.policy()))?;
                self.cells.push(Cell { method: CellMethod::Calibration, ..self.numeric_cell(row.into(), column.into(), c) });
                d.spec.with_calibrated_factor(c)?
            }
            Evaluation::MonteCarlo => {
                let target = CalibrationTarget::new(a).with_tolerance(self.cfg.calibration_tolerance);
                let seed = self.seed(&format!("{label}/calibration"));
                let c = self.wrap(row, column, calibrate_limit(&d.spec, &target, seed))?;
                self.cells.push(Cell {
                    paper_value: self.paper(row, column),
                    row: row.into(),
                    column: column.into(),
                    estimate: c.factor,
                    stderr: c.factor_stderr,
                    n: Some(c.achieved.replications),
                    conditioned_fraction: None,
                    method: CellMethod::Calibration,
                });
                c.spec
            }
        };
        Ok(spec)
    }

    fn resolve_all(&mut self) -> Result<Vec<ChartSpec>> {
        let designs = &self.cfg.designs;
        designs.iter().map(|d| self.resolve(d, &d.label(), "limit")).collect()
    }

    fn delay(&self, d: &Design, spec: &ChartSpec, delta: f64, tau: u64, row: String, column: String) -> Result<Cell> {
        let seed = self.seed(&d.label());
        match d.evaluation {
            Evaluation::Numeric => {
                let lambda = spec.lambda().unwrap_or(1.0);
                let c = spec.limit().unwrap_or(f64::NAN);
                let r = if tau == 1 {
                    ewma_arl_numeric(lambda, c, delta, spec.policy())
                } else {
                    ewma_ced_numeric(lambda, c, delta, tau, spec.policy())
                };
                let r = self.wrap(&row, &column, r)?;
                Ok(self.numeric_cell(row, column, r.value))
            }
            Evaluation::MonteCarlo => {
                let est = if tau == 1 {
                    mc::zero_state_arl(spec, delta, self.cfg.replications, seed)
                } else {
                    mc::ced(spec, &ChangePointModel::new(tau, delta), self.cfg.profile_replications, seed)
                };
                let est = self.wrap(&row, &column, est)?;
                self.estimate_cell(row, column, est)
            }
        }
    }

    fn shift_grid(&mut self) -> Result<()> {
        let specs = self.resolve_all()?;
        let cfg = self.cfg;
        for (d, spec) in cfg.designs.iter().zip(&specs) {
            for &tau in &cfg.taus {
                let row = if cfg.taus.len() == 1 { d.label() } else { format!("{}; tau={tau}", d.label()) };
                for &shift in &cfg.shifts {
                    let cell = self.delay(d, spec, shift * cfg.shift_scale, tau, row.clone(), shift.to_string())?;
                    self.cells.push(cell);
                }
            }
        }
        Ok(())
    }

    fn profiles(&mut self) -> Result<()> {
        let specs = self.resolve_all()?;
        let cfg = self.cfg;
        let tau_max = cfg.taus.iter().copied().max().unwrap_or(1);
        for (d, spec) in cfg.designs.iter().zip(&specs) {
            for &shift in &cfg.shifts {
                let delta = shift * cfg.shift_scale;
                let row = format!("{}; delta={shift}", d.label());
                match d.evaluation {
                    Evaluation::MonteCarlo => {
                        let seed = self.seed(&d.label());
                        let prof = mc::ced_profile(spec, delta, tau_max, cfg.profile_replications, seed);
                        let prof = self.wrap(&row, "tau", prof)?;
                        for &tau in &cfg.taus {
                            let cell = self.estimate_cell(row.clone(), tau.to_string(), prof[tau as usize - 1])?;
                            self.cells.push(cell);
                        }
                    }
                    Evaluation::Numeric => {
                        let cells: Vec<Result<Cell>> = cfg
                            .taus
                            .par_iter()
                            .map(|&tau| self.delay(d, spec, delta, tau, row.clone(), tau.to_string()))
                            .collect();
                        for c in cells {
                            self.cells.push(c?);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn table1(&mut self) -> Result<()> {
        let cfg = self.cfg;
        if cfg.grid.len() != cfg.designs.len() {
            return Err(Error::arg("table1 needs one CUSUM design per lambda_q"));
        }
        for &l in &cfg.grid {
            let column = l.to_string();
            self.cells.push(Cell {
                method: CellMethod::ClosedForm,
                ..self.numeric_cell("k".into(), column, k_from_lambda(l, 0.5))
            });
        }
        for (d, &l) in cfg.designs.iter().zip(&cfg.grid) {
            self.resolve(d, "h", &l.to_string())?;
        }
        Ok(())
    }

    /// Alarm limits restoring the in-control ARL of the RR-CUSUM designs.
    /// A design whose runs rule alone stays below the target gets `inf`.
    fn corrected_alarm_limits(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let target = CalibrationTarget::new(RR_CUSUM_TARGET).with_tolerance(cfg.calibration_tolerance);
        for d in &cfg.designs {
            let row = d.label();
            let seed = self.seed(&format!("{row}/AL*"));
            match calibrate_limit(&d.spec, &target, seed) {
                Ok(c) => self.cells.push(Cell {
                    paper_value: self.paper(&row, "AL*"),
                    row,
                    column: "AL*".into(),
                    estimate: c.factor,
                    stderr: c.factor_stderr,
                    n: Some(c.achieved.replications),
                    conditioned_fraction: None,
                    method: CellMethod::Calibration,
                }),
                Err(Error::BracketNotFound(why)) => {
                    let runs_only = ChartSpec::rr_cusum(
                        d.spec.k().unwrap_or(0.5),
                        d.spec.warning().unwrap_or(f64::NAN),
                        f64::INFINITY,
                        d.spec.rule(),
                    )?;
                    let est = mc::zero_state_arl(&runs_only, 0.0, cfg.replications, seed);
                    let est = self.wrap(&row, "AL*", est)?;
                    if est.mean - 2.0 * est.stderr > RR_CUSUM_TARGET {
                        return self.wrap(&row, "AL*", Err(Error::BracketNotFound(why)));
                    }
                    self.cells.push(Cell {
                        paper_value: self.paper(&row, "AL*"),
                        row,
                        column: "AL*".into(),
                        estimate: f64::INFINITY,
                        stderr: None,
                        n: Some(est.replications),
                        conditioned_fraction: None,
                        method: CellMethod::Calibration,
                    });
                }
                Err(e) => return self.wrap(&row, "AL*", Err(e)),
            }
        }
        Ok(())
    }

    fn worst_case(&mut self) -> Result<()> {
        let specs = self.resolve_all()?;
        let cfg = self.cfg;
        for (d, spec) in cfg.designs.iter().zip(&specs) {
            let seed = self.seed(&d.label());
            for &shift in &cfg.shifts {
                let delta = shift * cfg.shift_scale;
                let row = format!("{}; delta={shift}", d.label());
                let prof = mc::conditional_delay_given_x1(spec, delta, &cfg.grid, cfg.profile_replications, seed);
                for point in self.wrap(&row, "x1", prof)? {
                    if let Some(est) = point.estimate {
                        let cell = self.estimate_cell(row.clone(), point.x1.to_string(), est)?;
                        self.cells.push(cell);
                    }
                }
                let cell = self.delay(d, spec, delta, 1, row.clone(), "zero-state".into())?;
                self.cells.push(cell);
            }
        }
        Ok(())
    }

    /// Local search over window sizes from 2 up, per shift, started from the
    /// design's window and then from the previous shift's optimum. Window 1
    /// is the Shewhart chart for both families and is left out.
    fn optimal_windows(&mut self) -> Result<()> {
        let cfg = self.cfg;
        for d in &cfg.designs {
            let family = d.spec.family();
            if !matches!(family, Family::Ma | Family::Dma) {
                return Err(Error::arg(format!("window search applies to MA and DMA, not {family}")));
            }
            let name = family.name().to_ascii_uppercase();
            let mut limits: HashMap<usize, ChartSpec> = HashMap::new();
            let mut w = d.spec.window().unwrap_or(MIN_WINDOW).max(MIN_WINDOW);
            for &shift in &cfg.shifts {
                let delta = shift * cfg.shift_scale;
                let column = shift.to_string();
                let seed = self.seed(&format!("{name}/delta={shift}"));
                let mut delays: HashMap<usize, RunLengthEstimate> = HashMap::new();
                let mut eval = |ctx: &mut Self, w: usize| -> Result<f64> {
                    if let Some(e) = delays.get(&w) {
                        return Ok(e.mean);
                    }
                    let spec = match limits.get(&w) {
                        Some(s) => s.clone(),
                        None => {
                            let design = Design { spec: ChartSpec::builder(family).window(w).build()?, ..d.clone() };
                            let s = ctx.resolve(&design, &format!("{name}(w={w})"), "limit")?;
                            limits.insert(w, s.clone());
                            s
                        }
                    };
                    let est = mc::steady_state_arl(&spec, delta, cfg.profile_replications, seed);
                    let est = ctx.wrap(&format!("{name}(w={w})"), &column, est)?;
                    delays.insert(w, est);
                    Ok(est.mean)
                };
                let mut best = eval(self, w)?;
                loop {
                    let mut moved = false;
                    for cand in [w.saturating_sub(1), w + 1] {
                        if cand < MIN_WINDOW {
                            continue;
                        }
                        let v = eval(self, cand)?;
                        if v < best {
                            best = v;
                            w = cand;
                            moved = true;
                        }
                    }
                    if !moved {
                        break;
                    }
                }
                self.cells.push(Cell {
                    method: CellMethod::Optimization,
                    n: Some(cfg.profile_replications),
                    ..self.numeric_cell(format!("{name} w*"), column.clone(), w as f64)
                });
                let cell = self.estimate_cell(format!("{name} D100"), column, delays[&w])?;
                self.cells.push(cell);
            }
        }
        Ok(())
    }
}
