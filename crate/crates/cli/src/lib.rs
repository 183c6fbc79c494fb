//! Command-line front end for `piezo-core`.

pub mod config;
pub mod output;
pub mod sweep;
pub mod svg;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use piezo_core::beam::{classify_stability, derive_constants, DerivedConstants};
use piezo_core::frequency::{boundedness_scan, frequency_response};
use piezo_core::observability::{
    exponent_family, ingham_frame, observability_quotient, odd_odd_approximants, phi_m, phi_m_order,
};
use piezo_core::spectral::eigenvalues;
use piezo_core::timedomain::{decay_rate, simulate, Grid, InitialData, SimConfig, SimMode};

use config::{parse_config, ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "piezo", version, about = "Piezoelectric beam analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Parameter file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derived wave speeds and mixing coefficients.
    Constants {
        #[command(flatten)]
        common: Common,
    },
    /// Stabilizability class from the wave-speed ratio.
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Open-loop eigenvalues for j = 1..=jmax.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        jmax: Option<usize>,
    },
    /// Finite-difference time integration.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ModeArg::Closed)]
        mode: ModeArg,
        /// Final time.
        #[arg(long = "T")]
        final_time: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
        /// gaussian, sine, bump, phi-m or file:PATH
        #[arg(long, default_value = "gaussian")]
        initial: String,
        #[arg(long)]
        gain: Option<f64>,
        /// Write ten field snapshots to this CSV.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Write an energy plot to this SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Closed-loop transfer function along a vertical line.
    Transfer {
        #[command(flatten)]
        common: Common,
        /// Real part of s.
        #[arg(long, default_value_t = 1.0)]
        re: f64,
        #[arg(long, default_value_t = 100.0)]
        im_max: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        /// Write a |G| plot to this SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Odd/odd approximants and the output energy of their test states.
    Observability {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Observation time.
        #[arg(long = "T")]
        final_time: Option<f64>,
        /// Also estimate the Ingham frame ratio over j <= JMAX.
        #[arg(long, value_name = "JMAX")]
        frame: Option<usize>,
    },
    /// Evaluate a metric across values of one physical parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        /// Comma list `a,b,c` or range `start:stop:count`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        metric: String,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Open,
    Closed,
    Classical,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<piezo_core::error::Error> for CliError {
    fn from(e: piezo_core::error::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(&text).map_err(|e: ConfigError| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Sends `csv` to `--out` if given, otherwise to stdout.
fn emit(common: &Common, csv: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match &common.out {
        Some(p) => write_file(p, csv),
        None => out
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::Validation(format!("stdout: {e}"))),
    }
}

/// Summary lines go to stdout when the CSV went to a file, otherwise to stderr.
fn summary(common: &Common, line: &str, out: &mut dyn Write, err: &mut dyn Write) {
    let w: &mut dyn Write = if common.out.is_some() { out } else { err };
    let _ = writeln!(w, "{line}");
}

fn parse_values(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Validation(format!("cannot parse values `{spec}`"));
    if let [a, b, n] = spec.split(':').collect::<Vec<_>>()[..] {
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        return match n {
            0 => Err(bad()),
            1 => Ok(vec![a]),
            _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
        };
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn read_samples(path: &Path) -> Result<InitialData, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let headers = r
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        .clone();
    let cols = ["x", "v", "p", "vdot", "pdot"];
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| CliError::Validation(format!("{}: missing column `{c}`", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut data: [Vec<f64>; 5] = Default::default();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        for (k, &i) in idx.iter().enumerate() {
            let v = rec.get(i).and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| {
                CliError::Validation(format!("{}: line {}: bad `{}` value", path.display(), line + 2, cols[k]))
            })?;
            data[k].push(v);
        }
    }
    let [x, v, p, vdot, pdot] = data;
    Ok(InitialData::Samples { x, v, p, vdot, pdot })
}

fn initial_data(spec: &str, cfg: &RunConfig, dc: &DerivedConstants) -> Result<InitialData, CliError> {
    let l = cfg.params.length;
    Ok(match spec {
        "gaussian" => InitialData::Gaussian {
            center: 0.6 * l,
            width: 0.05 * l,
            amplitude: 1.0,
        },
        "sine" => InitialData::Sine { j: 1, amplitude: 1.0 },
        "bump" => InitialData::Bump {
            center: 0.25 * l,
            half_width: 0.2 * l,
            amplitude: 1.0,
        },
        "phi-m" => {
            let search = odd_odd_approximants(dc.ratio(), 1, cfg.qmax)?;
            let a = search.approximants.first().ok_or_else(|| {
                CliError::Validation(format!(
                    "no odd/odd approximant of zeta2/zeta1 = {} with q <= {}",
                    dc.ratio(), cfg.qmax
                ))
            })?;
            InitialData::Modal(phi_m(a, dc, cfg.modes.max(phi_m_order(a)))?)
        }
        other => match other.strip_prefix("file:") {
            Some(path) => read_samples(Path::new(path))?,
            None => {
                return Err(CliError::Validation(format!(
                    "unknown initial condition `{other}` (expected gaussian, sine, bump, phi-m or file:PATH)"
                )))
            }
        },
    })
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Constants { common } => {
            let cfg = load_config(&common.config)?;
            let dc = derive_constants(&cfg.params)?;
            emit(&common, &output::constants_csv(&dc), out)?;
            summary(
                &common,
                &format!(
                    "zeta1={:.6} zeta2={:.6} ratio={:.10}",
                    dc.zeta1,
                    dc.zeta2,
                    dc.ratio()
                ),
                out,
                err,
            );
        }
        Command::Classify { common } => {
            let cfg = load_config(&common.config)?;
            let dc = derive_constants(&cfg.params)?;
            let report = classify_stability(&dc, cfg.params.length, cfg.qmax, cfg.tol)?;
            let _ = writeln!(out, "{report}");
        }
        Command::Spectrum { common, jmax } => {
            let cfg = load_config(&common.config)?;
            let dc = derive_constants(&cfg.params)?;
            let j = jmax.unwrap_or(cfg.modes);
            let eigs = eigenvalues(&dc, cfg.params.length, j)?;
            emit(&common, &output::spectrum_csv(&eigs), out)?;
            summary(&common, &format!("{} eigenvalues, jmax={j}", eigs.len()), out, err);
        }
        Command::Simulate {
            common,
            mode,
            final_time,
            cells,
            initial,
            gain,
            snapshots,
            svg: svg_path,
        } => {
            let mut cfg = load_config(&common.config)?;
            if let Some(t) = final_time {
                cfg.final_time = t;
            }
            if let Some(n) = cells {
                cfg.cells = n;
            }
            if gain.is_some() {
                cfg.gain = gain;
            }
            let params = cfg.params;
            let dc = derive_constants(&params)?;
            let t = cfg.final_time;
            if !(t > 0.0) {
                return Err(CliError::Validation(format!("--T must be > 0, got {t}")));
            }
            let grid = Grid::new(params.length, cfg.cells)?;
            let init = initial_data(&initial, &cfg, &dc)?.build(&grid, &dc)?;
            let sim_mode = match mode {
                ModeArg::Open => SimMode::free(),
                ModeArg::Closed => SimMode::closed(cfg.gain_for(&params)),
                ModeArg::Classical => SimMode::classical(cfg.gain_for(&params)),
            };
            let mut sim = SimConfig::new(sim_mode, t)
                .with_cfl(cfg.cfl)
                .with_sample_dt(cfg.sample_dt_for(t));
            if snapshots.is_some() {
                sim = sim.with_snapshot_dt(t / 10.0);
            }
            let traj = simulate(&init, &params, &sim)?;
            emit(&common, &output::trajectory_csv(&traj), out)?;
            if let Some(p) = &snapshots {
                write_file(p, &output::snapshots_csv(&traj))?;
            }
            if let Some(p) = &svg_path {
                let plot = svg::Plot {
                    title: "energy",
                    x_label: "t",
                    y_label: "E",
                    log_y: true,
                };
                write_file(p, &svg::line_plot(&plot, &traj.times, &traj.energies))?;
            }
            let (rate, r2) = decay_rate(&traj.energies, &traj.times).unwrap_or((f64::NAN, f64::NAN));
            let e0 = traj.energies[0];
            let et = *traj.energies.last().unwrap_or(&e0);
            summary(
                &common,
                &format!(
                    "mode={} T={t} cells={} steps={} E0={e0:.6e} ET={et:.6e} decay_rate={rate:.6e} r2={r2:.4} max_abs_y={:.6e}",
                    format!("{mode:?}").to_lowercase(),
                    cfg.cells,
                    traj.steps,
                    traj.max_abs_output()
                ),
                out,
                err,
            );
        }
        Command::Transfer {
            common,
            re,
            im_max,
            points,
            svg: svg_path,
        } => {
            let cfg = load_config(&common.config)?;
            let dc = derive_constants(&cfg.params)?;
            let scan = boundedness_scan(re, im_max, points, &dc, &cfg.params)?;
            let s: Vec<Complex64> = (0..points)
                .map(|k| {
                    let im = if points == 1 {
                        0.0
                    } else {
                        -im_max + 2.0 * im_max * k as f64 / (points - 1) as f64
                    };
                    Complex64::new(re, im)
                })
                .collect();
            let resp = frequency_response(&s, &dc, &cfg.params)?;
            emit(&common, &output::frequency_csv(&resp), out)?;
            if let Some(p) = &svg_path {
                let plot = svg::Plot {
                    title: "closed-loop transfer function",
                    x_label: "Im s",
                    y_label: "|G|",
                    log_y: false,
                };
                let xs: Vec<f64> = resp.iter().map(|r| r.s.im).collect();
                let ys: Vec<f64> = resp.iter().map(|r| r.g.norm()).collect();
                write_file(p, &svg::line_plot(&plot, &xs, &ys))?;
            }
            summary(
                &common,
                &format!(
                    "sup_abs_G={:.6e} at s={}{:+}i bound={:.6e}",
                    scan.sup, scan.argmax.re, scan.argmax.im, scan.bound
                ),
                out,
                err,
            );
        }
        Command::Observability {
            common,
            count,
            final_time,
            frame,
        } => {
            let cfg = load_config(&common.config)?;
            let params = cfg.params;
            let dc = derive_constants(&params)?;
            let t = final_time.unwrap_or(cfg.final_time);
            let search = odd_odd_approximants(dc.ratio(), count, cfg.qmax)?;
            let rows = search
                .approximants
                .iter()
                .map(|a| {
                    let c = phi_m(a, &dc, phi_m_order(a))?;
                    Ok((*a, observability_quotient(&c, &dc, &params, t)?))
                })
                .collect::<Result<Vec<_>, piezo_core::error::Error>>()?;
            emit(&common, &output::observability_csv(&rows), out)?;
            let mut line = format!(
                "ratio={:.10} approximants={} exact={} exhausted={} max_cq2={:.4}",
                dc.ratio(),
                rows.len(),
                search.exact,
                search.exhausted,
                search.max_cq2
            );
            if let Some(jmax) = frame {
                let exps = exponent_family(&dc, params.length, jmax);
                let fb = ingham_frame(&exps, t, 64, cfg.seed)?;
                line.push_str(&format!(
                    " frame_cmin={:.6e} frame_cmax={:.6e} duplicates={}",
                    fb.cmin, fb.cmax, fb.duplicates
                ));
            }
            summary(&common, &line, out, err);
        }
        Command::Sweep {
            common,
            param,
            values,
            metric,
        } => {
            let cfg = load_config(&common.config)?;
            let metric: sweep::Metric = metric.parse().map_err(CliError::Validation)?;
            let values = parse_values(&values)?;
            let rows = sweep::sweep(&cfg, &param, &values, metric).map_err(CliError::Validation)?;
            emit(&common, &output::sweep_csv(&rows), out)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            summary(
                &common,
                &format!("param={param} metric={metric} rows={} failed={failed}", rows.len()),
                out,
                err,
            );
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command, writing
/// CSV and summaries to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_VALIDATION;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
