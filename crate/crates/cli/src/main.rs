use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cchart::analytic::{cusum_arl_markov, ewma_arl_numeric, DEFAULT_GRID_SIZE};
use cchart::bench::{self, ExperimentConfig, OutputFormat};
use cchart::calibrate::{calibrate_limit, optimize_window, CalibrationTarget};
use cchart::{mc, ChangePointModel, ChartSpec, Error, Family, LimitPolicy, RunLengthEstimate, RunsRule};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Run-length analysis of compound control charts.
#[derive(Parser, Debug)]
#[command(name = "cchart", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "RL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Calibrate the limit to an in-control zero-state ARL.
    Calibrate {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        target_arl: f64,
        /// Relative precision: twice the stderr of the achieved ARL stays below tolerance * A.
        #[arg(long, default_value_t = 0.0025)]
        tolerance: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Zero-state ARL at one shift.
    Arl {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Markov chain or quadrature instead of simulation (EWMA, CUSUM).
        #[arg(long)]
        numeric: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Conditional expected delay at one change point.
    Ced {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        tau: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// CED profile for change points 1..=tau-max.
    Profile {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 100)]
        tau_max: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Delay after a fixed first observation x1, shift from the second on.
    Worstcase {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        x1_min: f64,
        #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
        x1_max: f64,
        #[arg(long, default_value_t = 0.25)]
        x1_step: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Window size of an MA or DMA chart minimising D100 at one shift.
    Optimize {
        #[arg(long)]
        chart: Family,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        w_min: usize,
        #[arg(long, default_value_t = 30)]
        w_max: usize,
        #[arg(long, default_value_t = 370.0)]
        target_arl: f64,
        #[arg(long, default_value_t = 0.005)]
        tolerance: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Reproduce a published table or figure data set.
    Reproduce {
        #[arg(long)]
        experiment: String,
        /// Replications per cell (default: 10^6 for tables, 2*10^5 per change point).
        #[arg(long)]
        reps: Option<u64>,
        /// 10^8 replications per cell.
        #[arg(long, conflicts_with = "reps")]
        paper_scale: bool,
        #[arg(long, default_value_t = cchart::DEFAULT_SEED)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Experiment ids with their table or figure.
    List,
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[arg(long)]
    chart: Family,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    a_star: Option<f64>,
    #[arg(long)]
    w: Option<usize>,
    /// Exponent of PM and DPM charts.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    limit: Option<f64>,
    #[arg(long)]
    warning: Option<f64>,
    /// Alarm limit of runs-rule CUSUM charts ("inf" for the runs rule alone).
    #[arg(long)]
    alarm: Option<f64>,
    #[arg(long)]
    policy: Option<LimitPolicy>,
    #[arg(long)]
    rule: Option<RunsRule>,
}

impl DesignArgs {
    fn spec(&self) -> cchart::Result<ChartSpec> {
        let mut b = ChartSpec::builder(self.chart);
        macro_rules! set {
            ($field:ident, $method:ident) => {
                if let Some(v) = self.$field {
                    b = b.$method(v);
                }
            };
        }
        set!(lambda, lambda);
        set!(k, k);
        set!(a_star, a_star);
        set!(w, window);
        set!(p, exponent);
        set!(limit, limit);
        set!(warning, warning);
        set!(alarm, alarm);
        set!(policy, policy);
        set!(rule, rule);
        b.build()
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = 1_000_000)]
    reps: u64,
    #[arg(long, default_value_t = cchart::DEFAULT_SEED)]
    seed: u64,
    /// Calibrate the limit to this in-control ARL first when none is given.
    #[arg(long = "calibrate-to")]
    calibrate_to: Option<f64>,
    /// Write results to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// One output line: a label, a value and its simulation error.
struct Line {
    label: String,
    value: f64,
    stderr: Option<f64>,
    n: Option<u64>,
}

impl Line {
    fn estimate(label: impl Into<String>, e: &RunLengthEstimate) -> Self {
        Line { label: label.into(), value: e.mean, stderr: Some(e.stderr), n: Some(e.replications) }
    }

    fn exact(label: impl Into<String>, value: f64) -> Self {
        Line { label: label.into(), value, stderr: None, n: None }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(3);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn dispatch(cmd: Command) -> cchart::Result<()> {
    match cmd {
        Command::Calibrate { design, target_arl, tolerance, run } => {
            let spec = design.spec()?;
            let target = CalibrationTarget::new(target_arl).with_tolerance(tolerance);
            let cal = calibrate_limit(&spec, &target, run.seed)?;
            let name = if spec.family() == Family::RrCusum { "alarm" } else { "limit" };
            let mut line = Line::exact(name, cal.factor);
            line.stderr = cal.factor_stderr;
            line.n = Some(cal.achieved.replications);
            report(&cal.spec.to_string(), &[line, Line::estimate("in-control ARL", &cal.achieved)], &run)
        }
        Command::Arl { design, delta, numeric, run } => {
            let spec = resolve(&design, &run)?;
            let line = if numeric {
                Line::exact(format!("ARL(delta={delta})"), numeric_arl(&spec, delta)?)
            } else {
                Line::estimate(format!("ARL(delta={delta})"), &checked(mc::zero_state_arl(&spec, delta, run.reps, run.seed)?)?)
            };
            report(&spec.to_string(), &[line], &run)
        }
        Command::Ced { design, delta, tau, run } => {
            let spec = resolve(&design, &run)?;
            let est = checked(mc::ced(&spec, &ChangePointModel::new(tau, delta), run.reps, run.seed)?)?;
            report(&spec.to_string(), &[Line::estimate(format!("D_{tau}(delta={delta})"), &est)], &run)
        }
        Command::Profile { design, delta, tau_max, run } => {
            let spec = resolve(&design, &run)?;
            let prof = mc::ced_profile(&spec, delta, tau_max, run.reps, run.seed)?;
            let lines = prof
                .iter()
                .enumerate()
                .map(|(i, e)| checked(*e).map(|e| Line::estimate(format!("{}", i + 1), &e)))
                .collect::<cchart::Result<Vec<_>>>()?;
            report(&format!("{spec}, delta={delta}, by tau"), &lines, &run)
        }
        Command::Worstcase { design, delta, x1_min, x1_max, x1_step, run } => {
            if !(x1_step > 0.0) || x1_max < x1_min {
                return Err(Error::InvalidArgument("x1 grid needs x1-min <= x1-max and a positive step".into()));
            }
            let spec = resolve(&design, &run)?;
            let n = ((x1_max - x1_min) / x1_step + 1e-9).floor() as usize;
            let grid: Vec<f64> = (0..=n).map(|j| x1_min + j as f64 * x1_step).collect();
            let points = mc::conditional_delay_given_x1(&spec, delta, &grid, run.reps, run.seed)?;
            let mut lines = Vec::new();
            for p in points {
                match p.estimate {
                    Some(e) => lines.push(Line::estimate(format!("x1={}", p.x1), &checked(e)?)),
                    None => lines.push(Line::exact(format!("x1={} (alarm at t=1)", p.x1), 0.0)),
                }
            }
            let zero = checked(mc::zero_state_arl(&spec, delta, run.reps, run.seed)?)?;
            lines.push(Line::estimate("zero-state", &zero));
            report(&format!("{spec}, delta={delta}"), &lines, &run)
        }
        Command::Optimize { chart, delta, w_min, w_max, target_arl, tolerance, run } => {
            if w_min == 0 || w_max < w_min {
                return Err(Error::InvalidArgument("window range needs 1 <= w-min <= w-max".into()));
            }
            let windows: Vec<usize> = (w_min..=w_max).collect();
            let target = CalibrationTarget::new(target_arl).with_tolerance(tolerance);
            let opt = optimize_window(chart, delta, &windows, &target, run.reps, run.seed)?;
            let mut lines: Vec<Line> = opt
                .points
                .iter()
                .map(|p| Line::estimate(format!("D100(w={}, limit={:.4})", p.w, p.factor), &p.steady_state))
                .collect();
            lines.push(Line::exact("w*", opt.w_star as f64));
            report(&format!("{chart}, delta={delta}"), &lines, &run)
        }
        Command::Reproduce { experiment, reps, paper_scale, seed, out, format } => {
            let mut cfg = ExperimentConfig::preset(&experiment)?.with_seed(seed);
            if let Some(n) = reps {
                cfg = cfg.with_replications(n);
            }
            if paper_scale {
                cfg = cfg.paper_scale();
            }
            cfg.out = out.clone();
            for table in bench::run_experiment(&cfg)? {
                print!("{}", table.render());
                if let Some(dir) = &out {
                    let fmt = match format {
                        Format::Csv => OutputFormat::Csv,
                        Format::Json => OutputFormat::Json,
                    };
                    for path in bench::emit(&table, fmt, dir)? {
                        eprintln!("wrote {}", path.display());
                    }
                }
            }
            Ok(())
        }
        Command::List => {
            let mut out = io::stdout().lock();
            for e in bench::list() {
                writeln!(out, "{:<20} {}", e.id, e.anchor)?;
            }
            Ok(())
        }
    }
}

/// The design with its limit, calibrating first when `--calibrate-to` asks for it.
fn resolve(design: &DesignArgs, run: &RunArgs) -> cchart::Result<ChartSpec> {
    let spec = design.spec()?;
    match (spec.is_calibrated(), run.calibrate_to) {
        (true, None) => Ok(spec),
        (true, Some(_)) => Err(Error::InvalidArgument("give either a limit or --calibrate-to, not both".into())),
        (false, Some(a)) => Ok(calibrate_limit(&spec, &CalibrationTarget::new(a), run.seed)?.spec),
        (false, None) => Err(Error::InvalidArgument(format!(
            "{spec} has no limit: pass --limit (--alarm for RR-CUSUM) or --calibrate-to"
        ))),
    }
}

fn checked(e: RunLengthEstimate) -> cchart::Result<RunLengthEstimate> {
    if e.censored > 0 {
        return Err(Error::Censored { count: e.censored, replications: e.replications, cap: mc::RUN_LENGTH_CAP });
    }
    Ok(e)
}

fn numeric_arl(spec: &ChartSpec, delta: f64) -> cchart::Result<f64> {
    match spec.family() {
        Family::Ewma => {
            let (l, c) = (spec.lambda().unwrap_or(1.0), spec.limit().unwrap_or(f64::NAN));
            Ok(ewma_arl_numeric(l, c, delta, spec.policy())?.value)
        }
        Family::Cusum => {
            let (k, h) = (spec.k().unwrap_or(0.0), spec.limit().unwrap_or(f64::NAN));
            Ok(cusum_arl_markov(k, h, delta, DEFAULT_GRID_SIZE)?.value)
        }
        f => Err(Error::InvalidArgument(format!("--numeric supports EWMA and CUSUM charts, not {f}"))),
    }
}

fn report(title: &str, lines: &[Line], run: &RunArgs) -> cchart::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{title}")?;
    let width = lines.iter().map(|l| l.label.len()).max().unwrap_or(0);
    for l in lines {
        match l.stderr {
            Some(se) => writeln!(out, "  {:<width$}  {:>12.4} ± {:.4}", l.label, l.value, se)?,
            None => writeln!(out, "  {:<width$}  {:>12.4}", l.label, l.value)?,
        }
    }
    if let Some(path) = &run.out {
        write_lines(path, title, lines, run.format)?;
    }
    Ok(())
}

fn write_lines(path: &Path, title: &str, lines: &[Line], format: Format) -> cchart::Result<()> {
    let text = match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["label", "value", "stderr", "n"])?;
            for l in lines {
                let opt = |v: Option<String>| v.unwrap_or_default();
                w.write_record([
                    l.label.clone(),
                    l.value.to_string(),
                    opt(l.stderr.map(|x| x.to_string())),
                    opt(l.n.map(|x| x.to_string())),
                ])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8")
        }
        Format::Json => {
            let rows: Vec<_> = lines
                .iter()
                .map(|l| json!({ "label": l.label, "value": l.value, "stderr": l.stderr, "n": l.n }))
                .collect();
            serde_json::to_string_pretty(&json!({ "design": title, "results": rows }))? + "\n"
        }
    };
    fs::write(path, text)?;
    Ok(())
}
