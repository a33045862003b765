//! Penalty normal contact and tanh-regularized Coulomb friction between the
//! tooth tips and a rigid rotor.
//!
//! Contact is sampled at `M` points spaced uniformly in θ on the mean radius.
//! The rotor sits at axial position `z_r` measured from the undeformed
//! tooth-tip plane. Per point `i`:
//!
//! ```text
//! g_i = z_r − w_i                    gap
//! N_i = k_n · max(0, −g_i)           normal force on the rotor
//! s_i = R·ω_r − v_t,i                slip of rotor over stator
//! f_i = −μ·N_i·tanh(s_i / v_reg)     tangential force on the rotor
//! ```
//!
//! Resultants are summed left to right by point index.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stator_fem::StatorGeometry;
use crate::wave_drive::SurfacePoint;

// tanh saturates to exactly 1.0 in f64; the cap keeps |f| < μN strictly.
const TANH_CAP: f64 = 1.0 - f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactConfig {
    pub point_count: usize,
    /// N/m per point.
    pub penalty_stiffness: f64,
    /// m/s
    pub regularization_velocity: f64,
    pub cof: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            point_count: 128,
            penalty_stiffness: 1e7,
            regularization_velocity: 1e-3,
            cof: 0.2,
        }
    }
}

impl ContactConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.point_count < 4 * n {
            return Err(invalid(
                "point_count",
                format!("need at least {} points for n={n} (got {})", 4 * n, self.point_count),
            ));
        }
        if !(self.penalty_stiffness > 0.0 && self.penalty_stiffness.is_finite()) {
            return Err(invalid("penalty_stiffness", "must be > 0"));
        }
        if !(self.regularization_velocity > 0.0 && self.regularization_velocity.is_finite()) {
            return Err(invalid("regularization_velocity", "must be > 0"));
        }
        if !(self.cof >= 0.0 && self.cof.is_finite()) {
            return Err(invalid("cof", format!("must be >= 0 (got {})", self.cof)));
        }
        Ok(())
    }

    pub fn point_angle(&self, i: usize) -> f64 {
        TAU * i as f64 / self.point_count as f64
    }

    pub fn point_angles(&self) -> Vec<f64> {
        (0..self.point_count).map(|i| self.point_angle(i)).collect()
    }
}

/// Per-point forces and rotor resultants.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactState {
    pub gap: Vec<f64>,
    pub normal: Vec<f64>,
    pub friction: Vec<f64>,
    pub slip: Vec<f64>,
    /// Total axial force on the rotor, N.
    pub axial_force: f64,
    /// Friction torque on the rotor about the spin axis, N·m.
    pub torque: f64,
}

impl ContactState {
    pub fn with_capacity(m: usize) -> Self {
        Self {
            gap: Vec::with_capacity(m),
            normal: Vec::with_capacity(m),
            friction: Vec::with_capacity(m),
            slip: Vec::with_capacity(m),
            axial_force: 0.0,
            torque: 0.0,
        }
    }

    /// Number of points currently in contact.
    pub fn active_points(&self) -> usize {
        self.normal.iter().filter(|&&n| n > 0.0).count()
    }

    /// Frictional dissipation rate `−Σ f_i s_i ≥ 0`, W.
    pub fn dissipation(&self) -> f64 {
        -self
            .friction
            .iter()
            .zip(&self.slip)
            .map(|(f, s)| f * s)
            .sum::<f64>()
    }

    /// Elastic energy stored in the penalty springs, J.
    pub fn penalty_energy(&self, k_n: f64) -> f64 {
        self.normal.iter().map(|n| 0.5 * n * n / k_n).sum()
    }
}

/// Evaluates the contact law at every point, reusing `out`'s buffers.
pub fn evaluate_contact_into(
    surface: &[SurfacePoint],
    rotor_z: f64,
    rotor_speed: f64,
    geom: &StatorGeometry,
    cfg: &ContactConfig,
    out: &mut ContactState,
) {
    out.gap.clear();
    out.normal.clear();
    out.friction.clear();
    out.slip.clear();
    let r = geom.mean_radius;
    let rim = r * rotor_speed;
    let inv_vreg = 1.0 / cfg.regularization_velocity;
    let (mut fz, mut torque) = (0.0, 0.0);
    for p in surface {
        let g = rotor_z - p.w;
        let n = cfg.penalty_stiffness * (-g).max(0.0);
        let s = rim - p.v_t;
        let f = if n > 0.0 {
            -cfg.cof * n * (s * inv_vreg).tanh().clamp(-TANH_CAP, TANH_CAP)
        } else {
            0.0
        };
        out.gap.push(g);
        out.normal.push(n);
        out.slip.push(s);
        out.friction.push(f);
        fz += n;
        torque += r * f;
    }
    out.axial_force = fz;
    out.torque = torque;
}

pub fn evaluate_contact(
    surface: &[SurfacePoint],
    rotor_z: f64,
    rotor_speed: f64,
    geom: &StatorGeometry,
    cfg: &ContactConfig,
) -> ContactState {
    let mut out = ContactState::with_capacity(surface.len());
    evaluate_contact_into(surface, rotor_z, rotor_speed, geom, cfg, &mut out);
    out
}

/// Values of one mode shape at the contact points: deflection and its
/// θ-derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSamples {
    pub value: Vec<f64>,
    pub dtheta: Vec<f64>,
}

/// Generalized contact force on one mode,
/// `Q = Σ_i [−N_i φ(θ_i) + f_i z_c φ′(θ_i)/R]`.
pub fn modal_reaction_single(state: &ContactState, shape: &ShapeSamples, geom: &StatorGeometry) -> f64 {
    let lever = geom.contact_offset() / geom.mean_radius;
    let mut q = 0.0;
    for i in 0..state.normal.len() {
        q += -state.normal[i] * shape.value[i] + state.friction[i] * lever * shape.dtheta[i];
    }
    q
}

/// Generalized contact forces on a list of modes (typically the drive pair).
pub fn modal_reaction(state: &ContactState, shapes: &[ShapeSamples], geom: &StatorGeometry) -> Vec<f64> {
    shapes
        .iter()
        .map(|s| modal_reaction_single(state, s, geom))
        .collect()
}

/// Instantaneous power bookkeeping of one contact evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBalance {
    /// Work rate of contact forces on the rotor.
    pub on_rotor: f64,
    /// Work rate of the reactions on the stator surface.
    pub on_stator: f64,
    /// Rate of change of penalty energy, `dU/dt = −Σ N_i ġ_i`.
    pub penalty_rate: f64,
    /// Frictional dissipation `−Σ f_i s_i`.
    pub dissipation: f64,
}

impl PowerBalance {
    /// `on_rotor + on_stator + dU/dt + D`, zero up to round-off.
    pub fn residual(&self) -> f64 {
        self.on_rotor + self.on_stator + self.penalty_rate + self.dissipation
    }

    pub fn scale(&self) -> f64 {
        self.on_rotor
            .abs()
            .max(self.on_stator.abs())
            .max(self.penalty_rate.abs())
            .max(self.dissipation.abs())
    }
}

/// Splits the contact power into the rotor side, the stator side, stored
/// penalty energy and friction loss.
pub fn power_balance(
    state: &ContactState,
    surface: &[SurfacePoint],
    rotor_z_dot: f64,
    rotor_speed: f64,
    geom: &StatorGeometry,
) -> PowerBalance {
    let rim = geom.mean_radius * rotor_speed;
    let mut pb = PowerBalance {
        on_rotor: 0.0,
        on_stator: 0.0,
        penalty_rate: 0.0,
        dissipation: 0.0,
    };
    for (i, p) in surface.iter().enumerate() {
        let (n, f) = (state.normal[i], state.friction[i]);
        pb.on_rotor += n * rotor_z_dot + f * rim;
        pb.on_stator += -n * p.w_dot - f * p.v_t;
        pb.penalty_rate += -n * (rotor_z_dot - p.w_dot);
        pb.dissipation += -f * state.slip[i];
    }
    pb
}
