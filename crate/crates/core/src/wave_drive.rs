//! Two-phase forced response of a degenerate mode pair and the kinematics of
//! the resulting traveling wave at the tooth tips.
//!
//! Phasors follow `x(t) = Re[X·e^{iωt}]`. Channel A is driven as
//! `F_A cos(ωt)` on the cos shape, channel B as `F_B cos(ωt + ψ)` on the sin
//! shape. The modal field then splits into
//!
//! ```text
//! q_A cos nθ + q_B sin nθ = q_f e^{inθ} + q_b e^{-inθ}
//! q_f = (q_A − i q_B)/2,  q_b = (q_A + i q_B)/2
//! ```
//!
//! With `ψ = +π/2` only `q_f` survives. Its crests carry the contact surface,
//! and therefore the rotor, toward +θ; that is the forward direction here.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stator_fem::{ModePair, StatorGeometry};

/// Electrical drive of both channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    /// Voltage amplitude, V.
    pub voltage: f64,
    /// Drive frequency in Hz; `None` drives at the pair's natural frequency.
    pub frequency: Option<f64>,
    /// Added to the drive frequency, Hz.
    pub detuning: f64,
    /// Temporal phase of channel B relative to A, rad.
    pub phase_offset: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            voltage: 100.0,
            frequency: None,
            detuning: 0.0,
            phase_offset: FRAC_PI_2,
        }
    }
}

impl DriveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.voltage >= 0.0 && self.voltage.is_finite()) {
            return Err(invalid("voltage", format!("must be >= 0 (got {})", self.voltage)));
        }
        if let Some(f) = self.frequency {
            if !(f > 0.0 && f.is_finite()) {
                return Err(invalid("frequency", format!("must be > 0 (got {f})")));
            }
        }
        Ok(())
    }

    /// Drive angular frequency for a pair with natural frequency `omega_n`.
    pub fn angular_frequency(&self, omega_n: f64) -> f64 {
        let f = self.frequency.unwrap_or(omega_n / std::f64::consts::TAU) + self.detuning;
        std::f64::consts::TAU * f
    }
}

/// Steady-state two-phase response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSolution {
    pub q_a: Complex64,
    pub q_b: Complex64,
    /// Peak deflection per unit modal coordinate (mass-normalized shape peak).
    pub shape_peak: f64,
    pub n: usize,
    /// Drive angular frequency, rad/s.
    pub omega: f64,
}

impl WaveSolution {
    pub fn q_forward(&self) -> Complex64 {
        (self.q_a - Complex64::i() * self.q_b) * 0.5
    }

    pub fn q_backward(&self) -> Complex64 {
        (self.q_a + Complex64::i() * self.q_b) * 0.5
    }

    /// Forward traveling amplitude at the contact surface, m.
    pub fn forward(&self) -> f64 {
        self.shape_peak * self.q_forward().norm()
    }

    /// Backward traveling amplitude at the contact surface, m.
    pub fn backward(&self) -> f64 {
        self.shape_peak * self.q_backward().norm()
    }

    /// Crest amplitude `W = W_f + W_b`, m.
    pub fn amplitude(&self) -> f64 {
        self.forward() + self.backward()
    }

    /// Ratio of the weaker to the stronger traveling component.
    pub fn standing_ratio(&self) -> f64 {
        let (f, b) = (self.forward(), self.backward());
        let hi = f.max(b);
        if hi == 0.0 {
            0.0
        } else {
            f.min(b) / hi
        }
    }
}

/// Modal receptance `1/(ω_n² − ω² + 2iζω_nω)`.
pub fn receptance(omega_n: f64, omega: f64, zeta: f64) -> Complex64 {
    Complex64::new(omega_n * omega_n - omega * omega, 2.0 * zeta * omega_n * omega).inv()
}

pub fn steady_wave_response(
    pair: &ModePair,
    f_a: f64,
    f_b: f64,
    drive: &DriveConfig,
    zeta: f64,
) -> Result<WaveSolution> {
    if !(zeta > 0.0) {
        return Err(invalid("damping_ratio", format!("must be > 0 (got {zeta})")));
    }
    let omega = drive.angular_frequency(pair.omega);
    let h = receptance(pair.omega, omega, zeta);
    Ok(WaveSolution {
        q_a: h * f_a,
        q_b: h * f_b * Complex64::from_polar(1.0, drive.phase_offset),
        shape_peak: pair.shape_peak(),
        n: pair.n,
        omega,
    })
}

/// Kinematics of one tooth-tip point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfacePoint {
    /// Axial displacement, m.
    pub w: f64,
    /// Axial velocity, m/s.
    pub w_dot: f64,
    /// Tangential displacement, m.
    pub u_t: f64,
    /// Tangential velocity, m/s.
    pub v_t: f64,
}

/// Tooth-tip state at angle `theta` and time `t`, using `u_t = −z_c ∂w/∂x`.
pub fn surface_state(wave: &WaveSolution, geom: &StatorGeometry, theta: f64, t: f64) -> SurfacePoint {
    let n = wave.n as f64;
    let (s, c) = (n * theta).sin_cos();
    let rot = Complex64::from_polar(1.0, wave.omega * t);
    let iw = Complex64::new(0.0, wave.omega);
    let field = (wave.q_a * c + wave.q_b * s) * wave.shape_peak * rot;
    let dfield = (-wave.q_a * s + wave.q_b * c) * (n * wave.shape_peak) * rot;
    let scale = -geom.contact_offset() / geom.mean_radius;
    SurfacePoint {
        w: field.re,
        w_dot: (iw * field).re,
        u_t: scale * dfield.re,
        v_t: scale * (iw * dfield).re,
    }
}

/// Rotor speed at which the rim exactly follows the crest tangential velocity,
/// `n·z_c·ω·W/R²`, signed by the wave direction.
pub fn ideal_no_slip_speed(wave: &WaveSolution, geom: &StatorGeometry) -> Result<f64> {
    let ratio = wave.standing_ratio();
    if ratio >= 0.01 {
        return Err(Error::StandingWaveTooLarge { ratio });
    }
    let sign = if wave.forward() >= wave.backward() { 1.0 } else { -1.0 };
    let r = geom.mean_radius;
    Ok(sign * wave.n as f64 * geom.contact_offset() * wave.omega * wave.amplitude() / (r * r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::MaterialLibrary;
    use crate::stator_fem::StatorModel;
    use std::f64::consts::TAU;

    fn pair() -> ModePair {
        let cu = MaterialLibrary::builtin()
            .lookup("Copper")
            .unwrap()
            .as_isotropic()
            .unwrap()
            .clone();
        StatorModel::build(&StatorGeometry::usr30(), &cu, 64, 12)
            .unwrap()
            .drive_pair()
            .unwrap()
    }

    #[test]
    fn single_phase_is_standing() {
        let p = pair();
        let w = steady_wave_response(&p, 10.0, 0.0, &DriveConfig::default(), 0.01).unwrap();
        assert!((w.forward() - w.backward()).abs() <= 1e-15 * w.forward());
    }

    #[test]
    fn resonant_amplitude_and_damping() {
        let p = pair();
        let d = DriveConfig::default();
        let a = steady_wave_response(&p, 10.0, 10.0, &d, 0.01).unwrap();
        let expect = 10.0 / (2.0 * 0.01 * p.omega * p.omega);
        assert!((a.q_a.norm() - expect).abs() < 1e-12 * expect);
        let b = steady_wave_response(&p, 10.0, 10.0, &d, 0.005).unwrap();
        assert!((b.q_a.norm() / a.q_a.norm() - 2.0).abs() < 1e-12);
        assert!(steady_wave_response(&p, 1.0, 1.0, &d, 0.0).is_err());
    }

    #[test]
    fn reconstruction_identity() {
        let p = pair();
        let d = DriveConfig {
            phase_offset: 0.7,
            detuning: 120.0,
            ..Default::default()
        };
        let w = steady_wave_response(&p, 3.0, 5.0, &d, 0.02).unwrap();
        let (qf, qb) = (w.q_forward(), w.q_backward());
        assert!((qf + qb - w.q_a).norm() < 1e-12 * w.q_a.norm());
        assert!((Complex64::i() * (qf - qb) - w.q_b).norm() < 1e-12 * w.q_b.norm());
    }

    #[test]
    fn zero_wave_is_still() {
        let p = pair();
        let w = steady_wave_response(&p, 0.0, 0.0, &DriveConfig::default(), 0.01).unwrap();
        let s = surface_state(&w, &StatorGeometry::usr30(), 0.4, 1e-5);
        assert_eq!(s, SurfacePoint::default());
        assert_eq!(ideal_no_slip_speed(&w, &StatorGeometry::usr30()).unwrap(), 0.0);
    }

    #[test]
    fn crest_speed_matches_closed_form() {
        let g = StatorGeometry::usr30();
        let w = WaveSolution {
            q_a: Complex64::new(1.0, 0.0),
            q_b: Complex64::new(0.0, 1.0),
            shape_peak: 3e-7,
            n: 4,
            omega: TAU * 40_000.0,
        };
        assert!(w.backward() < 1e-12 * w.forward());
        let expect = 4.0 * g.contact_offset() * w.omega * 3e-7 / g.mean_radius;
        let mut peak: f64 = 0.0;
        for i in 0..400 {
            let t = i as f64 / 400.0 * TAU / w.omega;
            peak = peak.max(surface_state(&w, &g, 0.0, t).v_t);
        }
        assert!((peak - expect).abs() < 1e-3 * expect);
        let omega_ideal = ideal_no_slip_speed(&w, &g).unwrap();
        assert!((omega_ideal * g.mean_radius - expect).abs() < 1e-12 * expect);
        // at the crest, the tangential velocity is forward
        assert!(surface_state(&w, &g, 0.0, 0.0).v_t > 0.0);
    }

    #[test]
    fn mixed_wave_rejected() {
        let w = WaveSolution {
            q_a: Complex64::new(1.0, 0.0),
            q_b: Complex64::new(0.0, 0.5),
            shape_peak: 1e-7,
            n: 4,
            omega: 1e5,
        };
        assert!(matches!(
            ideal_no_slip_speed(&w, &StatorGeometry::usr30()),
            Err(Error::StandingWaveTooLarge { .. })
        ));
    }
}
