//! Parametric sweeps over preload, friction, voltage and frequency, plus peak
//! finding and sim/experiment trend comparison.

use std::fmt::{self, Write as _};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_setup, MotorSetup};
use crate::error::{invalid, Error, Result};
use crate::materials::MaterialLibrary;
use crate::stator_fem::StatorGeometry;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

pub fn grams_to_newtons(grams: f64) -> Result<f64> {
    if !(grams >= 0.0) {
        return Err(invalid("grams", format!("must be >= 0 (got {grams})")));
    }
    Ok(grams * STANDARD_GRAVITY * 1e-3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "preload_N")]
    PreloadN,
    #[serde(rename = "preload_g")]
    PreloadG,
    #[serde(rename = "cof")]
    Cof,
    #[serde(rename = "voltage")]
    Voltage,
    #[serde(rename = "frequency")]
    Frequency,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::PreloadN,
        SweepParam::PreloadG,
        SweepParam::Cof,
        SweepParam::Voltage,
        SweepParam::Frequency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PreloadN => "preload_N",
            SweepParam::PreloadG => "preload_g",
            SweepParam::Cof => "cof",
            SweepParam::Voltage => "voltage",
            SweepParam::Frequency => "frequency",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                invalid(
                    "parameter",
                    format!("unknown sweep parameter {s:?}; expected one of preload_N, preload_g, cof, voltage, frequency"),
                )
            })
    }

    /// Axis label with units.
    pub fn label(self) -> &'static str {
        match self {
            SweepParam::PreloadN => "Preload (N)",
            SweepParam::PreloadG => "Preload (g)",
            SweepParam::Cof => "Coefficient of friction (-)",
            SweepParam::Voltage => "Drive voltage (V)",
            SweepParam::Frequency => "Drive frequency (Hz)",
        }
    }

    fn check(self, v: f64) -> Result<()> {
        let ok = v.is_finite()
            && match self {
                SweepParam::PreloadN | SweepParam::PreloadG | SweepParam::Voltage => v >= 0.0,
                SweepParam::Cof => (0.0..=2.0).contains(&v),
                SweepParam::Frequency => v > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "values",
                format!("{v} is outside the domain of {}", self.name()),
            ))
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &MotorSetup, value: f64) -> Result<MotorSetup> {
        self.check(value)?;
        let mut s = base.clone();
        match self {
            SweepParam::PreloadN => s.rotor.preload = value,
            SweepParam::PreloadG => s.rotor.preload = grams_to_newtons(value)?,
            SweepParam::Cof => s.contact.cof = value,
            SweepParam::Voltage => s.drive.voltage = value,
            SweepParam::Frequency => {
                s.drive.frequency = Some(value);
                s.drive.detuning = 0.0;
            }
        }
        Ok(s)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(parameter: SweepParam, values: Vec<f64>) -> Result<Self> {
        let s = Self { parameter, values };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 3 {
            return Err(invalid(
                "values",
                format!("need at least 3 values (got {})", self.values.len()),
            ));
        }
        for w in self.values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(invalid(
                    "values",
                    format!("must be strictly ascending ({} then {})", w[0], w[1]),
                ));
            }
        }
        self.values.iter().try_for_each(|&v| self.parameter.check(v))
    }
}

/// Inclusive grid `start, start+step, ...` up to `stop`. Values are computed
/// as `start + i·step` so they do not accumulate rounding.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(invalid("values", format!("bad grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// `count` log-spaced values from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > start) || count < 2 {
        return Err(invalid("values", format!("bad log grid {start}..{stop} x{count}")));
    }
    let (a, b) = (start.ln(), stop.ln());
    let mut v: Vec<f64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    v[0] = start;
    v[count - 1] = stop;
    Ok(v)
}

/// A named study design and the base-configuration changes it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub spec: SweepSpec,
    pub geometry: Option<StatorGeometry>,
    pub stator_material: Option<&'static str>,
}

impl Preset {
    /// Base setup with this preset's geometry and material applied.
    pub fn apply_base(&self, base: &MotorSetup) -> Result<MotorSetup> {
        let mut s = base.clone();
        if let Some(g) = &self.geometry {
            s.geometry = g.clone();
        }
        if let Some(name) = self.stator_material {
            let lib = MaterialLibrary::builtin();
            let m = lib.lookup(name)?;
            s.stator_material = m
                .as_isotropic()
                .cloned()
                .ok_or_else(|| invalid("stator_material", format!("{name} is not isotropic")))?;
        }
        Ok(s)
    }
}

pub const PRESET_NAMES: [&str; 4] = ["usr30_preload", "usr60_preload", "ultem_preload_g", "cof_sweep"];

pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "usr30_preload" => Preset {
            name: "usr30_preload",
            spec: SweepSpec::new(SweepParam::PreloadN, linear_grid(25.0, 250.0, 25.0)?)?,
            geometry: Some(StatorGeometry::usr30()),
            stator_material: None,
        },
        "usr60_preload" => Preset {
            name: "usr60_preload",
            spec: SweepSpec::new(SweepParam::PreloadN, linear_grid(25.0, 500.0, 25.0)?)?,
            geometry: Some(StatorGeometry::usr60()),
            stator_material: None,
        },
        "ultem_preload_g" => Preset {
            name: "ultem_preload_g",
            spec: SweepSpec::new(SweepParam::PreloadG, log_grid(20.0, 5000.0, 20)?)?,
            geometry: Some(StatorGeometry::usr30()),
            stator_material: Some("Ultem 1000"),
        },
        "cof_sweep" => Preset {
            name: "cof_sweep",
            spec: SweepSpec::new(SweepParam::Cof, (1..=12).map(|i| i as f64 / 20.0).collect())?,
            geometry: None,
            stator_material: None,
        },
        other => {
            return Err(invalid(
                "preset",
                format!("unknown preset {other:?}; expected one of {}", PRESET_NAMES.join(", ")),
            ))
        }
    };
    Ok(p)
}

/// One sweep point. Failed runs keep their row with `error` set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub torque: f64,
    pub speed: f64,
    pub t_ss: f64,
    pub settled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub parameter: SweepParam,
    pub rows: Vec<SweepRow>,
}

fn run_point(base: &MotorSetup, stator: &crate::stator_fem::StatorModel, param: SweepParam, value: f64) -> SweepRow {
    let outcome = param.apply(base, value).and_then(|s| run_setup(&s, stator));
    match outcome {
        Ok(o) => SweepRow {
            param: value,
            torque: o.summary.reported_torque,
            speed: o.summary.mean_speed,
            t_ss: o.summary.t_ss,
            settled: o.summary.settled,
            error: None,
        },
        Err(e) => SweepRow {
            param: value,
            torque: f64::NAN,
            speed: f64::NAN,
            t_ss: match e {
                Error::Divergence { last_valid_time } => last_valid_time,
                _ => f64::NAN,
            },
            settled: false,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every value of `spec` on `base` with up to `jobs` concurrent runs.
/// Rows come back in input order.
pub fn run_sweep(base: &MotorSetup, spec: &SweepSpec, jobs: usize) -> Result<SweepCurve> {
    spec.validate()?;
    base.validate()?;
    let stator = base.build_stator()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| invalid("jobs", e.to_string()))?;
    let rows = pool.install(|| {
        spec.values
            .par_iter()
            .map(|&v| run_point(base, &stator, spec.parameter, v))
            .collect()
    });
    Ok(SweepCurve {
        parameter: spec.parameter,
        rows,
    })
}

impl SweepCurve {
    pub const CSV_HEADER: [&'static str; 5] = ["param", "torque", "speed", "t_ss", "settled"];

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io {
            path: "sweep".into(),
            reason: e.to_string(),
        };
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            out.write_record([
                format!("{:.16e}", r.param),
                format!("{:.16e}", r.torque),
                format!("{:.16e}", r.speed),
                format!("{:.16e}", r.t_ss),
                r.settled.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Io {
            path: "sweep".into(),
            reason: e.to_string(),
        })
    }

    /// Minimal SVG line chart of torque against the swept parameter.
    pub fn to_svg(&self) -> String {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.torque.is_finite())
            .map(|r| (r.param, r.torque))
            .collect();
        line_chart_svg(&pts, self.parameter.label(), "Reaction torque (N·m)")
    }
}

fn line_chart_svg(pts: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (80.0, 20.0, 20.0, 60.0);
    let span = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = span(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = span(&mut pts.iter().map(|p| p.1));
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (ax, ay) = (left, h - bottom);
    let _ = writeln!(
        s,
        r#"<path d="M{ax} {top} L{ax} {ay} L{} {ay}" stroke="black" fill="none"/>"#,
        w - right
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.3}</text>"#,
            sx(xv),
            ay + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3e}</text>"#,
            ax - 6.0,
            sy(yv) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        left + (w - left - right) / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_label}</text>"#,
        top + (h - top - bottom) / 2.0,
        top + (h - top - bottom) / 2.0
    );
    if !pts.is_empty() {
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
                sx(x),
                sy(y)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Result of [`find_peak`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub param: f64,
    pub torque: f64,
    /// Row index of the maximum within the input curve.
    pub index: usize,
    /// The smoothed curve rises, then falls, and never rises again.
    pub unimodal: bool,
    /// The maximum sits on the first or last settled row.
    pub boundary_maximum: bool,
}

/// Centered moving average; the window shrinks at the ends.
pub fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn rises_then_falls(v: &[f64]) -> bool {
    let (mut rose, mut fell) = (false, false);
    for w in v.windows(2) {
        if w[1] > w[0] {
            if fell {
                return false;
            }
            rose = true;
        } else if w[1] < w[0] {
            fell = true;
        }
    }
    rose && fell
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Peak of the settled rows after optional moving-average smoothing
/// (`window` 1 = off).
pub fn find_peak(curve: &SweepCurve, window: usize) -> Result<PeakReport> {
    let settled: Vec<(usize, &SweepRow)> = curve
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.settled && r.torque.is_finite())
        .collect();
    if settled.is_empty() {
        return Err(Error::InsufficientData("no settled rows in the sweep".into()));
    }
    if settled.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} settled rows, need at least 3",
            settled.len()
        )));
    }
    let torque: Vec<f64> = settled.iter().map(|(_, r)| r.torque).collect();
    let smooth = moving_average(&torque, window);
    let k = argmax(&smooth);
    let (index, row) = settled[k];
    Ok(PeakReport {
        param: row.param,
        torque: row.torque,
        index,
        unimodal: rises_then_falls(&smooth),
        boundary_maximum: k == 0 || k == smooth.len() - 1,
    })
}

/// Peak alignment between a simulated and an experimental curve. Reporting
/// only; no pass/fail judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    /// Simulated peak location over experimental peak location.
    pub peak_location_ratio: f64,
    /// `(max sim − max exp)/max exp`, percent.
    pub overshoot_percent: f64,
    pub both_unimodal: bool,
    /// Both curves rescaled to [0, 1] on each axis.
    pub sim_normalized: Vec<(f64, f64)>,
    pub exp_normalized: Vec<(f64, f64)>,
}

fn normalize(points: &[(f64, f64)], what: &'static str) -> Result<Vec<(f64, f64)>> {
    let range = |f: fn(&(f64, f64)) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (x0, x1) = range(|p| p.0);
    let (y0, y1) = range(|p| p.1);
    if !(x1 > x0) || !(y1 > y0) {
        return Err(invalid(what, "degenerate curve (all values equal)"));
    }
    Ok(points
        .iter()
        .map(|&(x, y)| ((x - x0) / (x1 - x0), (y - y0) / (y1 - y0)))
        .collect())
}

pub fn compare_trends(sim: &SweepCurve, exp: &[(f64, f64)]) -> Result<TrendReport> {
    let sim_pts: Vec<(f64, f64)> = sim
        .rows
        .iter()
        .filter(|r| r.torque.is_finite())
        .map(|r| (r.param, r.torque))
        .collect();
    if sim_pts.len() < 3 || exp.len() < 3 {
        return Err(Error::InsufficientData(
            "both curves need at least 3 points".into(),
        ));
    }
    let sim_normalized = normalize(&sim_pts, "sim")?;
    let exp_normalized = normalize(exp, "exp")?;
    let ys: Vec<f64> = sim_pts.iter().map(|p| p.1).collect();
    let ye: Vec<f64> = exp.iter().map(|p| p.1).collect();
    let (ks, ke) = (argmax(&ys), argmax(&ye));
    Ok(TrendReport {
        peak_location_ratio: sim_pts[ks].0 / exp[ke].0,
        overshoot_percent: (ys[ks] - ye[ke]) / ye[ke] * 100.0,
        both_unimodal: rises_then_falls(&ys) && rises_then_falls(&ye),
        sim_normalized,
        exp_normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(params: &[f64], torque: &[f64]) -> SweepCurve {
        SweepCurve {
            parameter: SweepParam::Cof,
            rows: params
                .iter()
                .zip(torque)
                .map(|(&p, &t)| SweepRow {
                    param: p,
                    torque: t,
                    speed: 1.0,
                    t_ss: 0.0,
                    settled: true,
                    error: None,
                })
                .collect(),
        }
    }

    #[test]
    fn grams() {
        assert_eq!(grams_to_newtons(1000.0).unwrap(), 9.80665);
        assert_eq!(grams_to_newtons(0.0).unwrap(), 0.0);
        assert!((grams_to_newtons(5000.0).unwrap() - 49.03325).abs() < 1e-12);
        assert!(grams_to_newtons(-1.0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(SweepParam::Cof, vec![0.1, 0.2]).is_err());
        assert!(SweepSpec::new(SweepParam::Cof, vec![0.1, 0.3, 0.2]).is_err());
        assert!(SweepSpec::new(SweepParam::Cof, vec![0.1, 0.2, 2.5]).is_err());
        assert!(SweepSpec::new(SweepParam::PreloadN, vec![-1.0, 0.0, 1.0]).is_err());
        assert!(SweepSpec::new(SweepParam::Cof, vec![0.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn presets() {
        let p = preset("usr30_preload").unwrap();
        assert_eq!(p.spec.values.len(), 10);
        assert_eq!(p.spec.values[0], 25.0);
        assert_eq!(p.spec.values[9], 250.0);
        assert_eq!(preset("usr60_preload").unwrap().spec.values.len(), 20);
        let g = preset("ultem_preload_g").unwrap();
        assert_eq!(g.spec.values.len(), 20);
        assert_eq!((g.spec.values[0], g.spec.values[19]), (20.0, 5000.0));
        assert_eq!(g.spec.parameter, SweepParam::PreloadG);
        let c = preset("cof_sweep").unwrap();
        assert_eq!(c.spec.values.len(), 12);
        assert_eq!(c.spec.values[3], 0.2);
        assert!(preset("nope").is_err());
    }

    #[test]
    fn grid_arithmetic() {
        assert_eq!(linear_grid(0.05, 0.6, 0.05).unwrap().len(), 12);
        assert_eq!(linear_grid(25.0, 250.0, 25.0).unwrap().len(), 10);
    }

    #[test]
    fn peak_cases() {
        let p = find_peak(&curve(&[1.0, 2.0, 3.0], &[0.1, 0.3, 0.2]), 1).unwrap();
        assert_eq!((p.param, p.torque), (2.0, 0.3));
        assert!(p.unimodal && !p.boundary_maximum);

        let p = find_peak(&curve(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.2, 0.3, 0.4]), 1).unwrap();
        assert_eq!(p.param, 4.0);
        assert!(p.boundary_maximum && !p.unimodal);

        let p = find_peak(&curve(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.1, 0.5, 0.2, 0.6, 0.1]), 1).unwrap();
        assert!(!p.unimodal);

        let mut c = curve(&[1.0, 2.0, 3.0], &[0.1, 0.3, 0.2]);
        c.rows.iter_mut().for_each(|r| r.settled = false);
        assert!(find_peak(&c, 1).is_err());
    }

    #[test]
    fn smoothing_removes_a_dip() {
        let c = curve(
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            &[0.1, 0.2, 0.35, 0.3, 0.45, 0.3, 0.1],
        );
        assert!(!find_peak(&c, 1).unwrap().unimodal);
        assert!(find_peak(&c, 3).unwrap().unimodal);
    }

    #[test]
    fn trend_comparison() {
        let exp = [(1.0, 0.1), (2.0, 0.3), (3.0, 0.2)];
        let sim = curve(&[1.0, 2.0, 3.0], &[0.1, 0.3, 0.2]);
        let r = compare_trends(&sim, &exp).unwrap();
        assert_eq!(r.overshoot_percent, 0.0);
        assert_eq!(r.peak_location_ratio, 1.0);
        assert!(r.both_unimodal);

        let sim = curve(&[1.0, 2.0, 3.0], &[0.14, 0.42, 0.28]);
        let r = compare_trends(&sim, &exp).unwrap();
        assert!((r.overshoot_percent - 40.0).abs() < 1e-9);

        let flat = [(1.0, 0.2), (2.0, 0.2), (3.0, 0.2)];
        assert!(compare_trends(&sim, &flat).is_err());
    }

    #[test]
    fn svg_has_axes_labels() {
        let s = curve(&[1.0, 2.0, 3.0], &[0.1, 0.3, 0.2]).to_svg();
        assert!(s.starts_with("<svg"));
        assert!(s.contains("Coefficient of friction (-)"));
        assert!(s.contains("Reaction torque (N·m)"));
        assert!(s.contains("<polyline"));
    }
}
