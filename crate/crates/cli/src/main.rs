//! `usm`: eigen analysis, transient runs, sweeps and roughness reports.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use usm_core::config::RunConfig;
use usm_core::dynamics::{run_setup, EnergyLedger, MotorSetup, RunSummary};
use usm_core::metrology::{level_mean_plane, load_height_map, roughness_report};
use usm_core::sweep::{find_peak, linear_grid, preset, run_sweep, PeakReport, Preset, SweepParam, SweepSpec};
use usm_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_NOT_SETTLED: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "usm", version, about = "Traveling-wave ultrasonic motor simulator and roughness metrology")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest stator modes with nodal-diameter labels.
    Eigen {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Write the mode table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// One transient: time-series CSV and summary JSON.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the summary JSON here as well as to stdout.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Parametric sweep with peak report.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// usr30_preload, usr60_preload, ultem_preload_g or cof_sweep.
        #[arg(long, conflicts_with_all = ["param", "values"])]
        preset: Option<String>,
        /// preload_N, preload_g, cof, voltage or frequency.
        #[arg(long, requires = "values")]
        param: Option<String>,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, requires = "param", allow_hyphen_values = true)]
        values: Option<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Moving-average window for peak finding (1 = off).
        #[arg(long, default_value_t = 1)]
        window: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write an SVG plot of torque against the parameter.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Areal roughness of height-map CSV files (µm).
    Roughness {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Pixel pitch along x, µm.
        #[arg(long, default_value_t = 1.0)]
        dx: f64,
        /// Pixel pitch along y, µm; defaults to dx.
        #[arg(long)]
        dy: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// Config file plus overrides; flags take precedence over the file.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_elements: Option<usize>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    voltage: Option<f64>,
    /// Drive frequency, Hz.
    #[arg(long)]
    frequency: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    detuning: Option<f64>,
    /// Phase of channel B: radians, or degrees with a `deg` suffix.
    #[arg(long, allow_hyphen_values = true)]
    phase: Option<String>,
    #[arg(long)]
    cof: Option<f64>,
    /// Preload, N.
    #[arg(long)]
    preload: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    load_torque: Option<f64>,
    /// Penalty stiffness per contact point, N/m.
    #[arg(long)]
    kn: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    output_interval: Option<f64>,
    #[arg(long)]
    steps_per_period: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
}

struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = std::result::Result<T, Failure>;

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Divergence { .. } => EXIT_DIVERGENCE,
            Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        fail(code, e.to_string())
    }
}

fn io_fail(path: &Path, e: io::Error) -> Failure {
    fail(EXIT_IO, format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_fail(path, e))
}

fn parse_phase(s: &str) -> CliResult<f64> {
    let t = s.trim();
    let (num, deg) = match t.strip_suffix("deg").or_else(|| t.strip_suffix('°')) {
        Some(n) => (n, true),
        None => (t, false),
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| fail(EXIT_CONFIG, format!("invalid phase {s:?}")))?;
    Ok(if deg { v.to_radians() } else { v })
}

fn parse_values(s: &str) -> CliResult<Vec<f64>> {
    let bad = || fail(EXIT_CONFIG, format!("invalid values {s:?}; use start:stop:step or a,b,c"));
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(linear_grid(parts[0], parts[1], parts[2])?)
    } else {
        s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
    }
}

impl ConfigArgs {
    fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
                RunConfig::from_json(&text, &path.display().to_string())
                    .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.n_elements {
            cfg.mesh.n_elements = v;
        }
        if let Some(v) = self.modes {
            cfg.mesh.modes = v;
        }
        if let Some(v) = self.voltage {
            cfg.drive.voltage = v;
        }
        if let Some(v) = self.frequency {
            cfg.drive.frequency = Some(v);
        }
        if let Some(v) = self.detuning {
            cfg.drive.detuning = v;
        }
        if let Some(p) = &self.phase {
            cfg.drive.phase_offset = parse_phase(p)?;
        }
        if let Some(v) = self.cof {
            cfg.contact.cof = v;
        }
        if let Some(v) = self.preload {
            cfg.rotor.preload = v;
        }
        if let Some(v) = self.load_torque {
            cfg.rotor.load_torque = v;
        }
        if let Some(v) = self.kn {
            cfg.contact.penalty_stiffness = v;
        }
        if let Some(v) = self.points {
            cfg.contact.point_count = v;
        }
        if let Some(v) = self.duration {
            cfg.simulation.duration = v;
        }
        if let Some(v) = self.output_interval {
            cfg.simulation.output_interval = v;
        }
        if let Some(v) = self.steps_per_period {
            cfg.simulation.steps_per_period = v;
        }
        if let Some(v) = self.damping {
            cfg.simulation.damping_ratio = v;
        }
        Ok(cfg)
    }

    fn resolve(&self) -> CliResult<(RunConfig, MotorSetup)> {
        let cfg = self.load()?;
        let setup = cfg.resolve().map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
        Ok((cfg, setup))
    }
}

fn print_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    print!("{text}");
    text
}

fn cmd_eigen(cfg: &ConfigArgs, csv_path: Option<&Path>) -> CliResult<()> {
    let (_, setup) = cfg.resolve()?;
    let stator = setup.build_stator()?;
    let n = setup.geometry.drive_nodal_diameters;
    stator.drive_pair()?;
    let modes = &stator.modes;
    let mut table = String::from("mode,frequency_hz,wavenumber,drive_pair\n");
    println!("{:>4}  {:>14}  {:>3}", "mode", "frequency (Hz)", "n");
    for i in 0..modes.len() {
        let drive = modes.wavenumbers[i] == n;
        println!(
            "{:>4}  {:>14.3}  {:>3}{}",
            i,
            modes.frequencies[i],
            modes.wavenumbers[i],
            if drive { "  drive pair" } else { "" }
        );
        table.push_str(&format!("{i},{:.16e},{},{drive}\n", modes.frequencies[i], modes.wavenumbers[i]));
    }
    if let Some(p) = csv_path {
        write_file(p, table.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunReport {
    #[serde(flatten)]
    summary: RunSummary,
    drive_frequency: f64,
    mean_radius: f64,
    time_step: f64,
    energy: EnergyLedger,
    energy_residual_relative: f64,
}

fn cmd_run(cfg: &ConfigArgs, csv_path: Option<&Path>, summary_path: Option<&Path>) -> CliResult<()> {
    let (_, setup) = cfg.resolve()?;
    let stator = setup.build_stator()?;
    let out = run_setup(&setup, &stator)?;
    if let Some(p) = csv_path {
        let mut buf = Vec::new();
        out.output.series.write_csv(&mut buf)?;
        write_file(p, &buf)?;
    }
    let report = RunReport {
        summary: out.summary,
        drive_frequency: out.drive_frequency,
        mean_radius: setup.geometry.mean_radius,
        time_step: out.output.time_step,
        energy: out.output.energy,
        energy_residual_relative: out.output.energy.relative_residual(),
    };
    let text = print_json(&report);
    if let Some(p) = summary_path {
        write_file(p, text.as_bytes())?;
    }
    if !out.summary.settled {
        return Err(fail(EXIT_NOT_SETTLED, "run did not settle within the simulated window"));
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepReport<'a> {
    preset: &'a str,
    parameter: SweepParam,
    rows: usize,
    failed_rows: usize,
    settled_rows: usize,
    peak: Option<PeakReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    peak_error: Option<String>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    cfg: &ConfigArgs,
    preset_name: Option<&str>,
    param: Option<&str>,
    values: Option<&str>,
    jobs: usize,
    window: usize,
    csv_path: Option<&Path>,
    plot: Option<&Path>,
) -> CliResult<()> {
    let (file_cfg, setup) = cfg.resolve()?;
    let chosen: Preset = match (preset_name, param, values) {
        (Some(name), _, _) => preset(name)?,
        (None, Some(p), Some(v)) => Preset {
            name: "explicit",
            spec: SweepSpec::new(SweepParam::parse(p)?, parse_values(v)?)?,
            geometry: None,
            stator_material: None,
        },
        _ => match &file_cfg.sweep {
            Some(s) => s.resolve()?,
            None => return Err(fail(EXIT_CONFIG, "no sweep given: use --preset, --param/--values or a config sweep")),
        },
    };
    let base = chosen.apply_base(&setup)?;
    base.validate()?;
    let curve = run_sweep(&base, &chosen.spec, jobs)?;
    let failed = curve.rows.iter().filter(|r| r.error.is_some()).count();
    for r in curve.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("{} = {}: {}", chosen.spec.parameter, r.param, r.error.as_deref().unwrap_or(""));
    }
    if let Some(p) = csv_path {
        let mut buf = Vec::new();
        curve.write_csv(&mut buf)?;
        write_file(p, &buf)?;
    }
    if let Some(p) = plot {
        write_file(p, curve.to_svg().as_bytes())?;
    }
    let (peak, peak_error) = match find_peak(&curve, window) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    print_json(&SweepReport {
        preset: chosen.name,
        parameter: curve.parameter,
        rows: curve.rows.len(),
        failed_rows: failed,
        settled_rows: curve.rows.iter().filter(|r| r.settled).count(),
        peak,
        peak_error,
    });
    if failed == curve.rows.len() {
        return Err(fail(EXIT_DIVERGENCE, "every sweep row failed"));
    }
    Ok(())
}

fn cmd_roughness(paths: &[PathBuf], dx: f64, dy: Option<f64>, out: Option<&Path>) -> CliResult<()> {
    let dy = dy.unwrap_or(dx);
    let mut samples = Vec::new();
    let mut errors = Vec::new();
    for p in paths {
        match load_height_map(p, dx, dy) {
            Ok(m) => {
                let label = p.file_stem().map(|s| s.to_string_lossy().into_owned());
                samples.push((label, level_mean_plane(&m)));
            }
            Err(e @ Error::InvalidParameter { .. }) => errors.push((EXIT_CONFIG, format!("{}: {e}", p.display()))),
            Err(e) => errors.push((EXIT_IO, format!("{}: {e}", p.display()))),
        }
    }
    if let Some((code, _)) = errors.first() {
        let code = *code;
        let msg = errors.into_iter().map(|(_, m)| m).collect::<Vec<_>>().join("\n");
        return Err(fail(code, msg));
    }
    let report = roughness_report(&samples)?;
    let text = print_json(&report);
    if let Some(p) = out {
        write_file(p, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_validate(cfg: &ConfigArgs) -> CliResult<()> {
    let (file_cfg, setup) = cfg.resolve()?;
    println!(
        "ok: {} stator, {} elements, {} modes, {} contact points, {} N preload{}",
        setup.stator_material.name,
        setup.n_elements,
        setup.mode_count,
        setup.contact.point_count,
        setup.rotor.preload,
        if file_cfg.sweep.is_some() { ", sweep configured" } else { "" }
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Eigen { cfg, csv } => cmd_eigen(cfg, csv.as_deref()),
        Command::Run { cfg, csv, summary } => cmd_run(cfg, csv.as_deref(), summary.as_deref()),
        Command::Sweep {
            cfg,
            preset,
            param,
            values,
            jobs,
            window,
            csv,
            plot,
        } => cmd_sweep(
            cfg,
            preset.as_deref(),
            param.as_deref(),
            values.as_deref(),
            *jobs,
            *window,
            csv.as_deref(),
            plot.as_deref(),
        ),
        Command::Roughness { paths, dx, dy, out } => cmd_roughness(paths, *dx, *dy, out.as_deref()),
        Command::Validate { cfg } => cmd_validate(cfg),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
