//! Command-line front end: single-point runs, sweeps and threshold
//! extraction, emitting plot-ready CSV or JSON.
//!
//! All times are reported in units of 1/γ and detunings in units of γ; the
//! parameter space is the (γ·t_d, φ) plane. Exit codes: 0 on success, 1 when
//! a computation did not converge (unless `--allow-partial`), 2 for usage,
//! validation and I/O errors.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use halfcavity::output::{fmt_f64, write_json, Table};
use halfcavity::{
    amplitude_mos, default_horizon, nm_measure, spectrum_scan, sweep_measure, threshold_curve,
    ModelParams, SweepOptions, DEFAULT_MESH_PER_DELAY,
};

#[derive(Parser)]
#[command(
    name = "halfcavity",
    version,
    about = "Delayed-feedback emitter dynamics and non-Markovianity in a semi-infinite waveguide"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the amplitude trajectory on the solver mesh
    Amplitude(AmplitudeArgs),
    /// Compute the non-Markovianity measure at one parameter point
    Measure(MeasureArgs),
    /// Map the measure over the (phi, gamma*t_d) plane
    Sweep(SweepArgs),
    /// Extract the Markovian/non-Markovian threshold curve
    Threshold(ThresholdArgs),
    /// Tabulate the environmental spectral density
    Spectrum(SpectrumArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args)]
struct PointArgs {
    /// Dimensionless delay gamma*t_d (rescaled units, gamma = 1)
    #[arg(long, conflicts_with_all = ["gamma", "td"], allow_hyphen_values = true)]
    gtd: Option<f64>,
    /// Physical emission rate gamma (use together with --td)
    #[arg(long, requires = "td", allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Physical round-trip delay t_d (use together with --gamma)
    #[arg(long, requires = "gamma", allow_hyphen_values = true)]
    td: Option<f64>,
    /// Round-trip optical phase in radians
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi: f64,
}

impl PointArgs {
    fn params(&self) -> Result<ModelParams, CliError> {
        let params = match (self.gtd, self.gamma, self.td) {
            (Some(gtd), None, None) => ModelParams::dimensionless(gtd, self.phi)?,
            (None, Some(gamma), Some(td)) => ModelParams::new(gamma, td, self.phi)?,
            (None, None, None) => {
                return Err(CliError::Usage(
                    "specify the parameter point with --gtd or with --gamma and --td".into(),
                ))
            }
            _ => {
                return Err(CliError::Usage(
                    "--gtd conflicts with --gamma/--td; pick one convention".into(),
                ))
            }
        };
        Ok(params)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output path; '-' writes to stdout
    #[arg(long, short = 'o', default_value = "-")]
    output: String,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    /// Integration horizon in units of 1/gamma (default: max(40, 10*gtd));
    /// extended automatically until the measure tail is certified
    #[arg(long)]
    horizon: Option<f64>,
    /// Mesh nodes per delay segment
    #[arg(long, default_value_t = DEFAULT_MESH_PER_DELAY)]
    mesh_per_delay: usize,
    /// Measure tolerance for the Markovian verdict
    #[arg(long, default_value_t = halfcavity::DEFAULT_CLASSIFY_TOL)]
    classify_tol: f64,
}

impl SolveArgs {
    fn horizon_for(&self, params: &ModelParams) -> f64 {
        match self.horizon {
            Some(h) => h / params.gamma(),
            None => default_horizon(params),
        }
    }
}

#[derive(Args)]
struct AmplitudeArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Horizon in units of 1/gamma (default: max(40, 10*gtd)); the mesh is
    /// padded to the next multiple of the delay
    #[arg(long)]
    horizon: Option<f64>,
    /// Mesh nodes per delay segment
    #[arg(long, default_value_t = DEFAULT_MESH_PER_DELAY)]
    mesh_per_delay: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct MeasureArgs {
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    solve: SolveArgs,
    /// Exit 0 even if the tail could not be certified
    #[arg(long)]
    allow_partial: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Number of phase points, uniform over [0, 2pi]
    #[arg(long, default_value_t = 81)]
    phi_points: usize,
    /// Smallest gamma*t_d of the log-spaced axis
    #[arg(long, default_value_t = 0.02)]
    gtd_min: f64,
    /// Largest gamma*t_d of the log-spaced axis
    #[arg(long, default_value_t = 30.0)]
    gtd_max: f64,
    /// Number of gamma*t_d points
    #[arg(long, default_value_t = 60)]
    gtd_points: usize,
    #[command(flatten)]
    solve: SolveArgs,
    /// Worker threads (0 = all cores)
    #[arg(long, env = "HALFCAVITY_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Exit 0 even if some cells did not converge
    #[arg(long)]
    allow_partial: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Number of phase points, uniform over [0, 2pi] (ignored with --list
    /// unless both are given, then the count must match)
    #[arg(long)]
    phi_points: Option<usize>,
    /// Explicit comma-separated phase list in radians, sorted ascending
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    list: Option<Vec<f64>>,
    /// Upper bracket of the bisection in gamma*t_d
    #[arg(long, default_value_t = 5.0)]
    gtd_max: f64,
    /// Bisection resolution in gamma*t_d
    #[arg(long, default_value_t = 0.01)]
    bisection_tol: f64,
    /// Measure tolerance for the Markovian verdict
    #[arg(long, default_value_t = halfcavity::DEFAULT_CLASSIFY_TOL)]
    classify_tol: f64,
    /// Worker threads (0 = all cores)
    #[arg(long, env = "HALFCAVITY_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Exit 0 even if some phases failed to bracket or converge
    #[arg(long)]
    allow_partial: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Lower detuning bound in units of gamma
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    delta_min: f64,
    /// Upper detuning bound in units of gamma
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    delta_max: f64,
    /// Number of samples, endpoints inclusive
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[command(flatten)]
    out: OutputArgs,
}

enum CliError {
    Usage(String),
    Convergence(String),
}

impl From<halfcavity::Error> for CliError {
    fn from(e: halfcavity::Error) -> Self {
        match e {
            halfcavity::Error::NotConverged(m) => CliError::Convergence(m),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors and 0 on --help/--version.
            e.exit();
        }
    };
    let result = match cli.command {
        Command::Amplitude(args) => run_amplitude(args),
        Command::Measure(args) => run_measure(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Threshold(args) => run_threshold(args),
        Command::Spectrum(args) => run_spectrum(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Convergence(msg)) => {
            eprintln!("error: not converged: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn write_output(out: &OutputArgs, table: &Table, data: serde_json::Value) -> Result<(), CliError> {
    let mut sink: Box<dyn Write> = if out.output == "-" {
        Box::new(BufWriter::new(std::io::stdout().lock()))
    } else {
        Box::new(BufWriter::new(File::create(&out.output)?))
    };
    match out.format {
        Format::Csv => table.write_csv(&mut sink)?,
        Format::Json => write_json(&mut sink, table.meta_json(), data)?,
    }
    sink.flush()?;
    Ok(())
}

fn base_meta(table: &mut Table, command: &str, out: &OutputArgs) {
    table.meta_entry("tool", "halfcavity");
    table.meta_entry("version", env!("CARGO_PKG_VERSION"));
    table.meta_entry("command", command);
    table.meta_entry("format", out.format.as_str());
}

fn point_meta(table: &mut Table, params: &ModelParams) {
    table.meta_entry("gtd", params.dimensionless_delay());
    table.meta_entry("phi", params.phi());
    table.meta_entry("gamma", params.gamma());
}

fn run_amplitude(args: AmplitudeArgs) -> Result<(), CliError> {
    let params = args.point.params()?;
    if params.t_d() == 0.0 {
        return Err(CliError::Usage(
            "amplitude sampling requires gtd > 0; at zero delay the amplitude is \
             exp[(gamma/2)(e^{i phi} - 1) t]"
                .into(),
        ));
    }
    let gamma = params.gamma();
    let horizon = args
        .horizon
        .map(|h| h / gamma)
        .unwrap_or_else(|| default_horizon(&params));
    let traj = amplitude_mos(&params, horizon, args.mesh_per_delay)?;

    let mut table = Table::new(&["t_gamma", "eps_re", "eps_im", "eps_abs2", "eps_abs4"]);
    base_meta(&mut table, "amplitude", &args.out);
    point_meta(&mut table, &params);
    table.meta_entry("horizon", horizon * gamma);
    table.meta_entry("mesh_per_delay", args.mesh_per_delay);
    for (i, &t) in traj.times.iter().enumerate() {
        let v = traj.values[i];
        let n2 = v.norm_sqr();
        table.push_values(&[t * gamma, v.re, v.im, n2, n2 * n2]);
    }
    let data = table.to_json_data();
    write_output(&args.out, &table, data)
}

fn run_measure(args: MeasureArgs) -> Result<(), CliError> {
    let params = args.point.params()?;
    let gamma = params.gamma();
    let horizon = args.solve.horizon_for(&params);
    let r = nm_measure(
        &params,
        horizon,
        args.solve.mesh_per_delay,
        args.solve.classify_tol,
    )?;

    let mut table = Table::new(&[
        "interval_start_gamma_t",
        "interval_end_gamma_t",
        "volume_gain",
    ]);
    base_meta(&mut table, "measure", &args.out);
    point_meta(&mut table, &params);
    table.meta_entry("mesh_per_delay", args.solve.mesh_per_delay);
    table.meta_entry("classify_tol", args.solve.classify_tol);
    table.meta_entry("measure", fmt_f64(r.measure));
    table.meta_entry("truncation_bound", fmt_f64(r.truncation_bound));
    table.meta_entry(
        "verdict",
        if r.markovian {
            "markovian"
        } else {
            "non-markovian"
        },
    );
    table.meta_entry("converged", r.converged);
    table.meta_entry("horizon_used", r.horizon_used * gamma);
    for iv in &r.intervals {
        table.push_values(&[iv.start * gamma, iv.end * gamma, iv.volume_gain]);
    }

    let data = json!({
        "measure": r.measure,
        "truncation_bound": r.truncation_bound,
        "markovian": r.markovian,
        "converged": r.converged,
        "horizon_used_gamma_t": r.horizon_used * gamma,
        "final_volume": r.final_volume,
        "total_loss": r.total_loss,
        "intervals": r.intervals.iter().map(|iv| json!({
            "start_gamma_t": iv.start * gamma,
            "end_gamma_t": iv.end * gamma,
            "volume_gain": iv.volume_gain,
        })).collect::<Vec<_>>(),
    });
    write_output(&args.out, &table, data)?;

    if !r.converged && !args.allow_partial {
        return Err(CliError::Convergence(format!(
            "measure tail not certified by horizon {} (bound {:.3e})",
            r.horizon_used * gamma,
            r.truncation_bound
        )));
    }
    Ok(())
}

fn uniform_phi_axis(n: usize) -> Result<Vec<f64>, CliError> {
    if n < 2 {
        return Err(CliError::Usage(format!(
            "a generated phase axis needs at least 2 points, got {n}"
        )));
    }
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                TAU
            } else {
                TAU * i as f64 / (n - 1) as f64
            }
        })
        .collect())
}

fn log_axis(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi <= lo {
        return Err(CliError::Usage(format!(
            "log axis needs 0 < min < max, got [{lo}, {hi}]"
        )));
    }
    if n < 2 {
        return Err(CliError::Usage(format!(
            "log axis needs at least 2 points, got {n}"
        )));
    }
    let ratio = hi / lo;
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * ratio.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect())
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let phi_axis = uniform_phi_axis(args.phi_points)?;
    let gtd_axis = log_axis(args.gtd_min, args.gtd_max, args.gtd_points)?;
    let options = SweepOptions {
        mesh_per_delay: args.solve.mesh_per_delay,
        classify_tol: args.solve.classify_tol,
        horizon: args.solve.horizon,
        workers: args.workers,
    };
    let grid = sweep_measure(&phi_axis, &gtd_axis, &options)?;

    let multi_flip = grid.multi_flip_columns(args.solve.classify_tol);
    for &j in &multi_flip {
        eprintln!(
            "warning: Markovian verdict flips more than once along gtd at phi = {}; \
             the single-threshold reading does not hold there",
            grid.phi_values[j]
        );
    }

    let mut headers: Vec<String> = vec!["gtd".into()];
    headers.extend(
        grid.phi_values
            .iter()
            .map(|&p| format!("phi_{}", fmt_f64(p))),
    );
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new(&header_refs);
    base_meta(&mut table, "sweep", &args.out);
    table.meta_entry("phi_points", args.phi_points);
    table.meta_entry("gtd_min", args.gtd_min);
    table.meta_entry("gtd_max", args.gtd_max);
    table.meta_entry("gtd_points", args.gtd_points);
    table.meta_entry("mesh_per_delay", args.solve.mesh_per_delay);
    table.meta_entry("classify_tol", args.solve.classify_tol);
    table.meta_entry("all_converged", grid.all_converged());
    for (i, &gtd) in grid.gtd_values.iter().enumerate() {
        let mut row = Vec::with_capacity(1 + grid.phi_values.len());
        row.push(gtd);
        row.extend(grid.measures[i].iter().copied());
        table.push_values(&row);
    }

    let data = json!({
        "phi_values": grid.phi_values,
        "gtd_values": grid.gtd_values,
        "measures": grid.measures,
        "converged": grid.diagnostics.iter().map(|row| {
            row.iter().map(|d| d.converged).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
        "truncation_bounds": grid.diagnostics.iter().map(|row| {
            row.iter().map(|d| d.truncation_bound).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
        "multi_flip_phi_indices": multi_flip,
    });
    write_output(&args.out, &table, data)?;

    if !grid.all_converged() && !args.allow_partial {
        let n_bad = grid
            .diagnostics
            .iter()
            .flatten()
            .filter(|d| !d.converged)
            .count();
        return Err(CliError::Convergence(format!(
            "{n_bad} grid cells did not certify their measure tail"
        )));
    }
    Ok(())
}

fn run_threshold(args: ThresholdArgs) -> Result<(), CliError> {
    let phi_axis = match (&args.list, args.phi_points) {
        (Some(list), maybe_n) => {
            if let Some(n) = maybe_n {
                if n != list.len() {
                    return Err(CliError::Usage(format!(
                        "--phi-points {n} does not match the {} values in --list",
                        list.len()
                    )));
                }
            }
            list.clone()
        }
        (None, maybe_n) => uniform_phi_axis(maybe_n.unwrap_or(41))?,
    };
    let options = SweepOptions {
        classify_tol: args.classify_tol,
        workers: args.workers,
        ..SweepOptions::default()
    };
    let curve = threshold_curve(
        &phi_axis,
        args.gtd_max,
        args.bisection_tol,
        args.classify_tol,
        &options,
    )?;

    let mut table = Table::new(&["phi", "critical_gtd"]);
    base_meta(&mut table, "threshold", &args.out);
    table.meta_entry("gtd_max", args.gtd_max);
    table.meta_entry("bisection_tol", args.bisection_tol);
    table.meta_entry("classify_tol", args.classify_tol);
    table.meta_entry("all_resolved", curve.all_resolved());
    for (i, &phi) in curve.phi_values.iter().enumerate() {
        table.push_row(vec![Some(phi), curve.critical_gtd[i]]);
    }

    let data = json!({
        "phi_values": curve.phi_values,
        "critical_gtd": curve.critical_gtd,
        "bisection_tol": curve.bisection_tol,
    });
    write_output(&args.out, &table, data)?;

    if !curve.all_resolved() && !args.allow_partial {
        let n_bad = curve.critical_gtd.iter().filter(|c| c.is_none()).count();
        return Err(CliError::Convergence(format!(
            "{n_bad} phase(s) failed to bracket or converge; raise --gtd-max or pass --allow-partial"
        )));
    }
    Ok(())
}

fn run_spectrum(args: SpectrumArgs) -> Result<(), CliError> {
    let params = args.point.params()?;
    let gamma = params.gamma();
    if args.points < 2 {
        return Err(CliError::Usage(format!(
            "spectrum needs at least 2 points, got {}",
            args.points
        )));
    }
    let points = spectrum_scan(
        &params,
        args.delta_min * gamma,
        args.delta_max * gamma,
        args.points,
    )?;

    let mut table = Table::new(&["delta_over_gamma", "j_pi_over_gamma"]);
    base_meta(&mut table, "spectrum", &args.out);
    point_meta(&mut table, &params);
    table.meta_entry("delta_min", args.delta_min);
    table.meta_entry("delta_max", args.delta_max);
    table.meta_entry("points", args.points);
    for p in &points {
        table.push_values(&[p.detuning / gamma, p.density * std::f64::consts::PI / gamma]);
    }
    let data = table.to_json_data();
    write_output(&args.out, &table, data)
}
