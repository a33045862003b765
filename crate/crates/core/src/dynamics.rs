//! Coupled stator–rotor transient and the torque/speed post-processing.
//!
//! The stator is represented by its retained mode pairs
//!
//! ```text
//! q̈_j + 2ζω_j q̇_j + ω_j² q_j = F_j(t) + Q_j(contact)
//! m_r z̈_r = −F_p − c_z ż_r + F_z
//! J ω̇_r   = T − T_L
//! ```
//!
//! and advanced with a fixed-step average-acceleration Newmark scheme. The
//! linear terms are implicit; the contact forces are evaluated once per step
//! on a predicted half-step state and held over the step.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::contact::{evaluate_contact_into, modal_reaction_single, ContactConfig, ContactState, ShapeSamples};
use crate::error::{invalid, Error, Result};
use crate::materials::{pzt_5h, validate_piezo, IsotropicMaterial, MaterialLibrary, PiezoMaterial};
use crate::stator_fem::{
    min_elements, pattern_modal_force, ElectrodePattern, ModePair, StatorGeometry, StatorModel,
};
use crate::wave_drive::{ideal_no_slip_speed, steady_wave_response, DriveConfig, SurfacePoint, WaveSolution};

/// Rigid rotor and its loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotorConfig {
    /// kg·m²
    pub inertia: f64,
    /// kg
    pub mass: f64,
    /// N·s/m
    pub axial_damping: f64,
    /// N
    pub preload: f64,
    /// N·m, opposing positive rotation.
    pub load_torque: f64,
    /// Linear preload ramp duration in s; 0 applies the full preload at t = 0.
    pub preload_ramp: f64,
}

impl Default for RotorConfig {
    fn default() -> Self {
        Self {
            inertia: 2e-6,
            mass: 0.01,
            axial_damping: 50.0,
            preload: 50.0,
            load_torque: 0.0,
            preload_ramp: 0.0,
        }
    }
}

impl RotorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inertia > 0.0) {
            return Err(invalid("inertia", "must be > 0"));
        }
        if !(self.mass > 0.0) {
            return Err(invalid("mass", "must be > 0"));
        }
        if !(self.axial_damping >= 0.0) {
            return Err(invalid("axial_damping", "must be >= 0"));
        }
        if !(self.preload >= 0.0 && self.preload.is_finite()) {
            return Err(invalid("preload", format!("must be >= 0 (got {})", self.preload)));
        }
        if !(self.preload_ramp >= 0.0) {
            return Err(invalid("preload_ramp", "must be >= 0"));
        }
        if !self.load_torque.is_finite() {
            return Err(invalid("load_torque", "must be finite"));
        }
        Ok(())
    }

    fn preload_at(&self, t: f64) -> f64 {
        if self.preload_ramp > 0.0 {
            self.preload * (t / self.preload_ramp).min(1.0)
        } else {
            self.preload
        }
    }
}

/// Time-stepping controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// s
    pub duration: f64,
    /// s
    pub output_interval: f64,
    /// Integration steps per drive period; the step is `1/(steps_per_period·f)`
    /// rounded down so that it divides the output interval.
    pub steps_per_period: f64,
    /// Modal damping ratio of every retained mode.
    pub damping_ratio: f64,
    /// Also retain the n−1 and n+1 pairs.
    pub neighbor_pairs: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            duration: 5e-3,
            output_interval: 1e-5,
            steps_per_period: 400.0,
            damping_ratio: 0.01,
            neighbor_pairs: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(invalid("duration", "must be > 0"));
        }
        if !(self.output_interval > 0.0 && self.output_interval <= self.duration) {
            return Err(invalid("output_interval", "must be in (0, duration]"));
        }
        if !(self.steps_per_period >= 200.0) {
            return Err(invalid(
                "steps_per_period",
                format!("need dt <= 1/(200 f), got {} steps per period", self.steps_per_period),
            ));
        }
        if !(self.damping_ratio > 0.0) {
            return Err(invalid("damping_ratio", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct RetainedMode {
    omega: f64,
    force_a: f64,
    force_b: f64,
    samples: ShapeSamples,
}

/// Everything the integrator needs, precomputed from the stator model.
#[derive(Debug, Clone)]
pub struct MotorModel {
    pub geometry: StatorGeometry,
    pub drive: DriveConfig,
    pub contact: ContactConfig,
    pub rotor: RotorConfig,
    pub damping_ratio: f64,
    /// Drive angular frequency, rad/s.
    pub omega: f64,
    /// Free (contact-less) steady wave of the drive pair.
    pub free_wave: WaveSolution,
    /// No-slip rotor speed bound of the free wave, rad/s.
    pub omega_ideal: f64,
    pub drive_pair: ModePair,
    modes: Vec<RetainedMode>,
}

fn sample_shape(stator: &StatorModel, shape: &[f64], angles: &[f64]) -> ShapeSamples {
    let (value, dtheta) = angles
        .iter()
        .map(|&th| {
            let (w, dw, _) = stator.mesh.interpolate(shape, th);
            (w, dw)
        })
        .unzip();
    ShapeSamples { value, dtheta }
}

impl MotorModel {
    pub fn new(
        stator: &StatorModel,
        piezo: &PiezoMaterial,
        drive: &DriveConfig,
        contact: &ContactConfig,
        rotor: &RotorConfig,
        damping_ratio: f64,
        neighbor_pairs: bool,
    ) -> Result<Self> {
        let geom = &stator.geometry;
        let n = geom.drive_nodal_diameters;
        drive.validate()?;
        contact.validate(n)?;
        rotor.validate()?;
        if !(damping_ratio > 0.0) {
            return Err(invalid("damping_ratio", "must be > 0"));
        }

        let pattern_a = ElectrodePattern::alternating(n);
        let pattern_b = pattern_a.rotated(std::f64::consts::PI / (2.0 * n as f64));
        let angles = contact.point_angles();

        let mut families = vec![n];
        if neighbor_pairs {
            if n > 1 {
                families.push(n - 1);
            }
            families.push(n + 1);
        }
        let drive_pair = stator.mode_pair(n)?;
        let mut modes = Vec::new();
        for &family in &families {
            let pair = stator.mode_pair(family)?;
            for shape in [&pair.cos_shape, &pair.sin_shape] {
                let s = shape.as_slice();
                modes.push(RetainedMode {
                    omega: pair.omega,
                    force_a: pattern_modal_force(&stator.mesh, s, geom, piezo, &pattern_a, drive.voltage),
                    force_b: pattern_modal_force(&stator.mesh, s, geom, piezo, &pattern_b, drive.voltage),
                    samples: sample_shape(stator, s, &angles),
                });
            }
        }

        let free_wave = steady_wave_response(
            &drive_pair,
            modes[0].force_a,
            modes[1].force_b,
            drive,
            damping_ratio,
        )?;
        let omega_ideal = ideal_no_slip_speed(&free_wave, geom).unwrap_or(f64::NAN);
        Ok(Self {
            geometry: geom.clone(),
            drive: drive.clone(),
            contact: contact.clone(),
            rotor: rotor.clone(),
            damping_ratio,
            omega: free_wave.omega,
            free_wave,
            omega_ideal,
            drive_pair,
            modes,
        })
    }

    pub fn drive_frequency(&self) -> f64 {
        self.omega / TAU
    }

    pub fn drive_period(&self) -> f64 {
        TAU / self.omega
    }

    /// Channel A and B generalized forces on the drive pair (cos, sin).
    pub fn drive_forces(&self) -> (f64, f64) {
        (self.modes[0].force_a, self.modes[1].force_b)
    }

    pub fn retained_modes(&self) -> usize {
        self.modes.len()
    }

    /// Integration step for the given controls.
    pub fn time_step(&self, sim: &SimulationConfig) -> (f64, usize) {
        let target = self.drive_period() / sim.steps_per_period;
        let substeps = (sim.output_interval / target).ceil().max(1.0) as usize;
        (sim.output_interval / substeps as f64, substeps)
    }
}

/// Cumulative energy ledger of one run, J.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub drive_work: f64,
    pub preload_work: f64,
    pub load_work: f64,
    pub modal_damping: f64,
    pub friction: f64,
    pub axial_damping: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
}

impl EnergyLedger {
    /// `ΔE − (inputs − losses)`.
    pub fn residual(&self) -> f64 {
        (self.final_energy - self.initial_energy)
            - (self.drive_work + self.preload_work + self.load_work
                - self.modal_damping
                - self.friction
                - self.axial_damping)
    }

    pub fn relative_residual(&self) -> f64 {
        self.residual().abs() / self.drive_work.abs()
    }
}

/// Sampled probes of one transient.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotorTimeSeries {
    pub t: Vec<f64>,
    /// Rotor rim speed R·ω_r, m/s.
    pub surface_speed: Vec<f64>,
    /// Rotor rim displacement R·φ, m.
    pub surface_displacement: Vec<f64>,
    /// Tangential force at contact point 0, N.
    pub friction_probe: Vec<f64>,
    /// Friction torque on the rotor, N·m.
    pub torque: Vec<f64>,
    /// Axial contact resultant, N.
    pub axial_force: Vec<f64>,
    /// Drive-pair wave amplitude, m.
    pub wave_amplitude: Vec<f64>,
}

pub const CSV_HEADER: [&str; 7] = [
    "t",
    "s_speed",
    "surf_disp",
    "fric_probe",
    "torque",
    "fz",
    "wave_amp",
];

impl MotorTimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn push(&mut self, row: [f64; 7]) {
        self.t.push(row[0]);
        self.surface_speed.push(row[1]);
        self.surface_displacement.push(row[2]);
        self.friction_probe.push(row[3]);
        self.torque.push(row[4]);
        self.axial_force.push(row[5]);
        self.wave_amplitude.push(row[6]);
    }

    fn row(&self, i: usize) -> [f64; 7] {
        [
            self.t[i],
            self.surface_speed[i],
            self.surface_displacement[i],
            self.friction_probe[i],
            self.torque[i],
            self.axial_force[i],
            self.wave_amplitude[i],
        ]
    }

    /// Rotor speed in rad/s for a rotor of mean contact radius `radius`.
    pub fn rotor_speed(&self, radius: f64) -> Vec<f64> {
        self.surface_speed.iter().map(|v| v / radius).collect()
    }

    /// Writes the CSV form with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io {
            path: "time series".into(),
            reason: e.to_string(),
        };
        out.write_record(CSV_HEADER).map_err(io)?;
        for i in 0..self.len() {
            out.write_record(self.row(i).iter().map(|v| format!("{v:.16e}")))
                .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Io {
            path: "time series".into(),
            reason: e.to_string(),
        })
    }

    pub fn read_csv<R: Read>(r: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers().map_err(|e| Error::Parse {
            source_name: source_name.into(),
            row: 1,
            col: 1,
            reason: e.to_string(),
        })?;
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::Parse {
                source_name: source_name.into(),
                row: 1,
                col: 1,
                reason: format!("expected header {}", CSV_HEADER.join(",")),
            });
        }
        let mut series = Self::default();
        for (i, rec) in rdr.records().enumerate() {
            let row_no = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                source_name: source_name.into(),
                row: row_no,
                col: 1,
                reason: e.to_string(),
            })?;
            let mut row = [0.0; 7];
            for (c, slot) in row.iter_mut().enumerate() {
                let cell = rec.get(c).unwrap_or("");
                *slot = cell.trim().parse().map_err(|_| Error::Parse {
                    source_name: source_name.into(),
                    row: row_no,
                    col: c + 1,
                    reason: format!("not a number: {cell:?}"),
                })?;
            }
            series.push(row);
        }
        Ok(series)
    }
}

/// Result of one transient.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub series: MotorTimeSeries,
    pub energy: EnergyLedger,
    /// Integration step actually used, s.
    pub time_step: f64,
    /// Largest |ω_r| seen at any step, rad/s.
    pub peak_rotor_speed: f64,
    /// Rotor axial position at the end of the run, m.
    pub final_rotor_z: f64,
}

/// Runs the coupled transient. Deterministic for fixed inputs.
pub fn simulate(model: &MotorModel, sim: &SimulationConfig) -> Result<SimulationOutput> {
    sim.validate()?;
    let (dt, substeps) = model.time_step(sim);
    let samples = (sim.duration / sim.output_interval).round() as usize;
    let total_steps = samples * substeps;

    let geom = &model.geometry;
    let rotor = &model.rotor;
    let zeta = model.damping_ratio;
    let points = model.contact.point_count;
    let nm = model.modes.len();
    let lever = geom.contact_offset() / geom.mean_radius;
    let r = geom.mean_radius;
    let k_n = model.contact.penalty_stiffness;
    let omega = model.omega;
    let phase_b = model.drive.phase_offset;
    let peak = model.drive_pair.shape_peak();

    let forcing = |t: f64, j: usize| {
        let m = &model.modes[j];
        m.force_a * (omega * t).cos() + m.force_b * (omega * t + phase_b).cos()
    };
    let fill_surface = |q: &[f64], v: &[f64], out: &mut [SurfacePoint]| {
        for (i, p) in out.iter_mut().enumerate() {
            let (mut w, mut wd, mut dth, mut dthd) = (0.0, 0.0, 0.0, 0.0);
            for j in 0..nm {
                let s = &model.modes[j].samples;
                w += q[j] * s.value[i];
                wd += v[j] * s.value[i];
                dth += q[j] * s.dtheta[i];
                dthd += v[j] * s.dtheta[i];
            }
            *p = SurfacePoint {
                w,
                w_dot: wd,
                u_t: -lever * dth,
                v_t: -lever * dthd,
            };
        }
    };
    let mechanical_energy = |q: &[f64], v: &[f64], zd: f64, wr: f64| {
        let mut e = 0.5 * rotor.mass * zd * zd + 0.5 * rotor.inertia * wr * wr;
        for j in 0..nm {
            let wj = model.modes[j].omega;
            e += 0.5 * v[j] * v[j] + 0.5 * wj * wj * q[j] * q[j];
        }
        e
    };

    let mut q = vec![0.0; nm];
    let mut v = vec![0.0; nm];
    let mut a = vec![0.0; nm];
    let (mut z, mut zd, mut zdd) = (0.0_f64, 0.0_f64, 0.0_f64);
    let (mut phi, mut wr, mut alpha) = (0.0_f64, 0.0_f64, 0.0_f64);
    let (mut qm, mut vm) = (vec![0.0; nm], vec![0.0; nm]);

    let mut surface = vec![SurfacePoint::default(); points];
    let mut state = ContactState::with_capacity(points);
    let mut reaction = vec![0.0; nm];
    let mut series = MotorTimeSeries::default();
    let mut ledger = EnergyLedger::default();
    let mut peak_speed = 0.0_f64;

    let penalty_energy = |z: f64, surface: &[SurfacePoint]| {
        surface
            .iter()
            .map(|p| {
                let pen = (p.w - z).max(0.0);
                0.5 * k_n * pen * pen
            })
            .sum::<f64>()
    };

    fill_surface(&q, &v, &mut surface);
    ledger.initial_energy = mechanical_energy(&q, &v, zd, wr) + penalty_energy(z, &surface);

    for step in 0..=total_steps {
        let t = step as f64 * dt;

        if step % substeps == 0 {
            fill_surface(&q, &v, &mut surface);
            evaluate_contact_into(&surface, z, wr, geom, &model.contact, &mut state);
            let amp = if nm >= 2 { peak * q[0].hypot(q[1]) } else { 0.0 };
            series.push([
                t,
                r * wr,
                r * phi,
                state.friction[0],
                state.torque,
                state.axial_force,
                amp,
            ]);
        }
        if step == total_steps {
            fill_surface(&q, &v, &mut surface);
            ledger.final_energy = mechanical_energy(&q, &v, zd, wr) + penalty_energy(z, &surface);
            break;
        }

        // Contact is evaluated once per step, on the state predicted at the
        // half step from the last accelerations, and held over the step.
        let h = 0.5 * dt;
        for j in 0..nm {
            qm[j] = q[j] + h * v[j] + 0.5 * h * h * a[j];
            vm[j] = v[j] + h * a[j];
        }
        let zm = z + h * zd + 0.5 * h * h * zdd;
        let wrm = wr + h * alpha;
        fill_surface(&qm, &vm, &mut surface);
        evaluate_contact_into(&surface, zm, wrm, geom, &model.contact, &mut state);
        for (j, qj) in reaction.iter_mut().enumerate() {
            *qj = modal_reaction_single(&state, &model.modes[j].samples, geom);
        }

        let t1 = t + dt;
        for j in 0..nm {
            let wj = model.modes[j].omega;
            let (c, k) = (2.0 * zeta * wj, wj * wj);
            let (f0, f1) = (forcing(t, j), forcing(t1, j));
            let a0 = f0 + reaction[j] - c * v[j] - k * q[j];
            let rhs = f1 + reaction[j] - c * (v[j] + h * a0) - k * (q[j] + dt * v[j] + 0.25 * dt * dt * a0);
            let a1 = rhs / (1.0 + h * c + 0.25 * k * dt * dt);
            let v1 = v[j] + h * (a0 + a1);
            let vbar = 0.5 * (v[j] + v1);
            ledger.drive_work += dt * 0.5 * (f0 + f1) * vbar;
            ledger.modal_damping += dt * c * vbar * vbar;
            q[j] += dt * v[j] + 0.25 * dt * dt * (a0 + a1);
            v[j] = v1;
            a[j] = a1;
        }

        let (m, cz) = (rotor.mass, rotor.axial_damping);
        let fz = state.axial_force;
        let (p0, p1) = (rotor.preload_at(t), rotor.preload_at(t1));
        zdd = (-p0 + fz - cz * zd) / m;
        let rhs = -p1 + fz - cz * (zd + h * zdd);
        let zdd1 = (rhs / m) / (1.0 + h * cz / m);
        let zd1 = zd + h * (zdd + zdd1);
        let zbar = 0.5 * (zd + zd1);
        ledger.preload_work -= dt * 0.5 * (p0 + p1) * zbar;
        ledger.axial_damping += dt * cz * zbar * zbar;
        z += dt * zd + 0.25 * dt * dt * (zdd + zdd1);
        zd = zd1;
        zdd = zdd1;

        alpha = (state.torque - rotor.load_torque) / rotor.inertia;
        let wr1 = wr + dt * alpha;
        let wbar = 0.5 * (wr + wr1);
        ledger.load_work -= dt * rotor.load_torque * wbar;
        ledger.friction += dt * state.dissipation();
        phi += dt * wbar;
        wr = wr1;
        peak_speed = peak_speed.max(wr.abs());

        let finite = z.is_finite()
            && zd.is_finite()
            && wr.is_finite()
            && q.iter().chain(v.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(Error::Divergence { last_valid_time: t });
        }
    }

    Ok(SimulationOutput {
        series,
        energy: ledger,
        time_step: dt,
        peak_rotor_speed: peak_speed,
        final_rotor_z: z,
    })
}

/// Outcome of [`detect_steady_state`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    /// s
    pub time: f64,
    pub settled: bool,
}

/// Earliest window boundary after which the window mean of `values` changes
/// by less than `tolerance` (relative) between every pair of consecutive
/// windows. Returns the end of the series with `settled = false` otherwise.
pub fn detect_steady_state(t: &[f64], values: &[f64], window: f64, tolerance: f64) -> Result<SteadyState> {
    if t.len() != values.len() || t.len() < 2 {
        return Err(Error::InsufficientData("need matching time and value columns".into()));
    }
    let t0 = t[0];
    let end = *t.last().unwrap();
    let count = ((end - t0) / window + 1e-9).floor() as usize;
    if count < 2 {
        return Err(Error::InsufficientData(format!(
            "series spans {:.3e} s, shorter than two windows of {window:.3e} s",
            end - t0
        )));
    }
    let mut sums = vec![(0.0, 0usize); count];
    for (&ti, &vi) in t.iter().zip(values) {
        let k = ((ti - t0) / window + 1e-9).floor() as usize;
        if k < count {
            sums[k].0 += vi;
            sums[k].1 += 1;
        }
    }
    let means: Vec<Option<f64>> = sums
        .iter()
        .map(|&(s, c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect();
    let close = |a: f64, b: f64| {
        let scale = a.abs().max(b.abs());
        (a - b).abs() <= tolerance * scale
    };
    // Walk backwards to find the earliest k after which every pair agrees.
    let mut earliest = None;
    for k in (0..count - 1).rev() {
        match (means[k], means[k + 1]) {
            (Some(a), Some(b)) if close(a, b) => earliest = Some(k),
            _ => break,
        }
    }
    Ok(match earliest {
        Some(k) => SteadyState {
            time: t0 + (k + 1) as f64 * window,
            settled: true,
        },
        None => SteadyState {
            time: end,
            settled: false,
        },
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Upper envelope of an oscillating signal after `t_ss`: per-window maxima
/// with `window` = one drive period, outliers beyond `k·MAD` from the median
/// dropped, mean of the rest.
pub fn envelope_average(t: &[f64], values: &[f64], t_ss: f64, window: f64, k: f64) -> Result<f64> {
    let end = match t.last() {
        Some(&e) => e,
        None => return Err(Error::InsufficientData("empty series".into())),
    };
    if !(t_ss >= t[0] && t_ss <= end) {
        return Err(invalid("t_ss", format!("{t_ss} outside series [{}, {end}]", t[0])));
    }
    let mut env: Vec<(usize, f64)> = Vec::new();
    for (&ti, &vi) in t.iter().zip(values) {
        if ti < t_ss {
            continue;
        }
        let w = ((ti - t_ss) / window + 1e-9).floor() as usize;
        match env.last_mut() {
            Some((idx, m)) if *idx == w => *m = m.max(vi),
            _ => env.push((w, vi)),
        }
    }
    if env.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} envelope points after t_ss, need at least 5",
            env.len()
        )));
    }
    let mut sorted: Vec<f64> = env.iter().map(|e| e.1).collect();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = median(&dev);
    let kept: Vec<f64> = env
        .iter()
        .map(|e| e.1)
        .filter(|v| (v - med).abs() <= k * mad)
        .collect();
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Mean rotor speed after `t_ss`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSpeed {
    /// rad/s
    pub rotor: f64,
    /// m/s
    pub surface: f64,
}

pub fn mean_speed(series: &MotorTimeSeries, radius: f64, t_ss: f64) -> Result<MeanSpeed> {
    let (first, last) = match (series.t.first(), series.t.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InsufficientData("empty series".into())),
    };
    if !(t_ss >= first && t_ss <= last) {
        return Err(invalid("t_ss", format!("{t_ss} outside series [{first}, {last}]")));
    }
    let (sum, count) = series
        .t
        .iter()
        .zip(&series.surface_speed)
        .filter(|(t, _)| **t >= t_ss)
        .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
    let surface = sum / count as f64;
    Ok(MeanSpeed {
        rotor: surface / radius,
        surface,
    })
}

/// Steady-state detection and torque reporting controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// s
    pub settle_window: f64,
    pub settle_tolerance: f64,
    pub spike_rejection: f64,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.settle_window > 0.0) {
            return Err(invalid("settle_window", "must be > 0"));
        }
        if !(self.settle_tolerance > 0.0) {
            return Err(invalid("settle_tolerance", "must be > 0"));
        }
        if !(self.spike_rejection > 0.0) {
            return Err(invalid("spike_rejection", "must be > 0"));
        }
        Ok(())
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            settle_window: 2.5e-4,
            settle_tolerance: 0.02,
            spike_rejection: 5.0,
        }
    }
}

/// Scalar summary of one transient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub t_ss: f64,
    pub settled: bool,
    pub reported_torque: f64,
    pub mean_speed: f64,
    pub mean_surface_speed: f64,
    pub omega_ideal: f64,
}

/// Steady-state detection, torque envelope and mean speed of a series.
pub fn summarize(
    series: &MotorTimeSeries,
    radius: f64,
    drive_period: f64,
    omega_ideal: f64,
    analysis: &AnalysisConfig,
) -> Result<RunSummary> {
    let ss = detect_steady_state(
        &series.t,
        &series.surface_speed,
        analysis.settle_window,
        analysis.settle_tolerance,
    )?;
    // An unsettled run is still reported over its last settle window.
    let t_from = if ss.settled {
        ss.time
    } else {
        (ss.time - analysis.settle_window).max(series.t[0])
    };
    let torque = envelope_average(
        &series.t,
        &series.torque,
        t_from,
        drive_period,
        analysis.spike_rejection,
    )?;
    let speed = mean_speed(series, radius, t_from)?;
    Ok(RunSummary {
        t_ss: ss.time,
        settled: ss.settled,
        reported_torque: torque,
        mean_speed: speed.rotor,
        mean_surface_speed: speed.surface,
        omega_ideal,
    })
}

/// Fully resolved inputs of one transient: stator, drive, contact, rotor and
/// integration controls.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorSetup {
    pub geometry: StatorGeometry,
    pub stator_material: IsotropicMaterial,
    pub piezo: PiezoMaterial,
    pub n_elements: usize,
    pub mode_count: usize,
    pub drive: DriveConfig,
    pub contact: ContactConfig,
    pub rotor: RotorConfig,
    pub simulation: SimulationConfig,
    pub analysis: AnalysisConfig,
}

impl MotorSetup {
    /// USR30-sized copper stator with PZT-5H drive and default settings.
    pub fn usr30() -> Self {
        let lib = MaterialLibrary::builtin();
        Self {
            geometry: StatorGeometry::usr30(),
            stator_material: lib
                .lookup("Copper")
                .ok()
                .and_then(|m| m.as_isotropic().cloned())
                .expect("copper is in the builtin library"),
            piezo: pzt_5h(),
            n_elements: 64,
            mode_count: 12,
            drive: DriveConfig::default(),
            contact: ContactConfig::default(),
            rotor: RotorConfig::default(),
            simulation: SimulationConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }

    /// Checks every precondition that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if let Some(v) = self.stator_material.validate().into_iter().next() {
            return Err(invalid("stator_material", v));
        }
        if let Some(v) = validate_piezo(&self.piezo).into_iter().next() {
            return Err(invalid("piezo_material", v.to_string()));
        }
        let required = min_elements(self.geometry.drive_nodal_diameters);
        if self.n_elements < required {
            return Err(Error::MeshTooCoarse {
                given: self.n_elements,
                required,
                n: self.geometry.drive_nodal_diameters,
            });
        }
        self.drive.validate()?;
        self.contact.validate(self.geometry.drive_nodal_diameters)?;
        self.rotor.validate()?;
        self.simulation.validate()?;
        self.analysis.validate()
    }

    pub fn build_stator(&self) -> Result<StatorModel> {
        StatorModel::build(&self.geometry, &self.stator_material, self.n_elements, self.mode_count)
    }

    pub fn motor_model(&self, stator: &StatorModel) -> Result<MotorModel> {
        MotorModel::new(
            stator,
            &self.piezo,
            &self.drive,
            &self.contact,
            &self.rotor,
            self.simulation.damping_ratio,
            self.simulation.neighbor_pairs,
        )
    }
}

/// A transient and its summary.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: SimulationOutput,
    pub summary: RunSummary,
    pub drive_frequency: f64,
}

/// Simulates `setup` on an already solved stator and summarizes the result.
pub fn run_setup(setup: &MotorSetup, stator: &StatorModel) -> Result<RunOutcome> {
    let model = setup.motor_model(stator)?;
    let output = simulate(&model, &setup.simulation)?;
    let summary = summarize(
        &output.series,
        setup.geometry.mean_radius,
        model.drive_period(),
        model.omega_ideal,
        &setup.analysis,
    )?;
    Ok(RunOutcome {
        output,
        summary,
        drive_frequency: model.drive_frequency(),
    })
}
