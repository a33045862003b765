use proptest::prelude::*;

use usm_core::contact::{evaluate_contact, modal_reaction_single, power_balance, ContactConfig, ShapeSamples};
use usm_core::metrology::{areal_params, level_mean_plane, HeightMap};
use usm_core::stator_fem::StatorGeometry;
use usm_core::sweep::{find_peak, grams_to_newtons, SweepCurve, SweepParam, SweepRow};
use usm_core::wave_drive::SurfacePoint;

fn surface(w: &[f64], v: &[f64], wd: &[f64]) -> Vec<SurfacePoint> {
    w.iter()
        .zip(v)
        .zip(wd)
        .map(|((&w, &v_t), &w_dot)| SurfacePoint {
            w,
            w_dot,
            u_t: 0.0,
            v_t,
        })
        .collect()
}

/// Surface w, v_t, w_dot per point; rotor z, ω_r, ż; log10 k_n, log10 v_reg, μ.
type ContactInputs = (Vec<f64>, Vec<f64>, Vec<f64>, f64, f64, f64, f64, f64, f64);

fn contact_inputs() -> impl Strategy<Value = ContactInputs> {
    (4usize..24).prop_flat_map(|m| {
        (
            prop::collection::vec(-2e-6..2e-6f64, m),
            prop::collection::vec(-1.0..1.0f64, m),
            prop::collection::vec(-1.0..1.0f64, m),
            -2e-6..2e-6f64,
            -200.0..200.0f64,
            -0.5..0.5f64,
            5.0..9.0f64,
            -6.0..-1.0f64,
            0.0..2.0f64,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4096))]

    #[test]
    fn friction_cone_and_sign((w, v, wd, z, omega, zdot, log_k, log_v, mu) in contact_inputs()) {
        let cfg = ContactConfig {
            point_count: w.len(),
            penalty_stiffness: 10f64.powf(log_k),
            regularization_velocity: 10f64.powf(log_v),
            cof: mu,
        };
        let geom = StatorGeometry::usr30();
        let pts = surface(&w, &v, &wd);
        let s = evaluate_contact(&pts, z, omega, &geom, &cfg);
        for i in 0..pts.len() {
            prop_assert!(s.normal[i] >= 0.0);
            if s.gap[i] > 0.0 {
                prop_assert_eq!(s.normal[i], 0.0);
            }
            if s.normal[i] > 0.0 && mu > 0.0 {
                prop_assert!(s.friction[i].abs() < mu * s.normal[i]);
            } else {
                prop_assert_eq!(s.friction[i], 0.0);
            }
            prop_assert!(s.friction[i] * s.slip[i] <= 0.0);
        }
        let pb = power_balance(&s, &pts, zdot, omega, &geom);
        prop_assert!(pb.dissipation >= 0.0);
        prop_assert!(pb.residual().abs() <= 1e-10 * pb.scale().max(f64::MIN_POSITIVE));
        // work on rotor plus work on stator is what friction loses, less stored energy
        let net = pb.on_rotor + pb.on_stator + pb.penalty_rate;
        prop_assert!((net + pb.dissipation).abs() <= 1e-10 * pb.scale().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn grams_conversion_is_linear_and_monotone(a in 0.0..1e5f64, b in 0.0..1e5f64) {
        let (na, nb) = (grams_to_newtons(a).unwrap(), grams_to_newtons(b).unwrap());
        let sum = grams_to_newtons(a + b).unwrap();
        prop_assert!((sum - (na + nb)).abs() <= 1e-12 * sum.max(1.0));
        if a < b {
            prop_assert!(na < nb);
        }
    }

    #[test]
    fn peak_is_scale_invariant(torque in prop::collection::vec(0.0..1.0f64, 3..20), c in 1e-3..1e3f64) {
        let make = |scale: f64| SweepCurve {
            parameter: SweepParam::PreloadN,
            rows: torque
                .iter()
                .enumerate()
                .map(|(i, t)| SweepRow {
                    param: i as f64,
                    torque: t * scale,
                    speed: 0.0,
                    t_ss: 0.0,
                    settled: true,
                    error: None,
                })
                .collect(),
        };
        let (a, b) = (find_peak(&make(1.0), 1).unwrap(), find_peak(&make(c), 1).unwrap());
        prop_assert_eq!(a.index, b.index);
    }
}

#[test]
fn friction_approaches_coulomb_as_regularization_shrinks() {
    let geom = StatorGeometry::usr30();
    let pts = [SurfacePoint {
        w: 1e-7,
        v_t: 0.0,
        ..Default::default()
    }];
    let slip = 0.01;
    let mut last = f64::INFINITY;
    for v_reg in [1e-3, 1e-4, 1e-5, 1e-6] {
        let cfg = ContactConfig {
            point_count: 1,
            regularization_velocity: v_reg,
            ..Default::default()
        };
        let s = evaluate_contact(&pts, 0.0, slip / geom.mean_radius, &geom, &cfg);
        let gap = (s.friction[0] + cfg.cof * s.normal[0]).abs();
        assert!(gap < last || gap < 1e-12 * s.normal[0]);
        last = gap;
    }
    assert!(last < 1e-12);
}

#[test]
fn uniform_normal_load_does_not_excite_the_wave() {
    let geom = StatorGeometry::usr30();
    let cfg = ContactConfig::default();
    let angles = cfg.point_angles();
    let pts = vec![
        SurfacePoint {
            w: 1e-8,
            ..Default::default()
        };
        angles.len()
    ];
    let s = evaluate_contact(&pts, 0.0, 0.0, &geom, &cfg);
    for phase in [0.0, 0.3, 1.1] {
        let shape = ShapeSamples {
            value: angles.iter().map(|t| (4.0 * t + phase).cos()).collect(),
            dtheta: angles.iter().map(|t| -4.0 * (4.0 * t + phase).sin()).collect(),
        };
        let q = modal_reaction_single(&s, &shape, &geom);
        assert!(q.abs() < 1e-12 * s.axial_force, "{q}");
    }
}

fn map_strategy() -> impl Strategy<Value = HeightMap> {
    (2usize..16, 2usize..16, 0.1..5.0f64, 0.1..5.0f64).prop_flat_map(|(r, c, dx, dy)| {
        prop::collection::vec(-10.0..10.0f64, r * c)
            .prop_map(move |z| level_mean_plane(&HeightMap::new(r, c, z, dx, dy).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn moment_inequalities(m in map_strategy()) {
        let p = areal_params(&m).unwrap();
        prop_assert!(p.sa <= p.sq * (1.0 + 1e-12));
        prop_assert_eq!(p.sz, p.sp + p.sv);
        prop_assert!(p.sp >= 0.0 && p.sv >= 0.0);
        if let (Some(ssk), Some(sku)) = (p.ssk, p.sku) {
            prop_assert!(sku >= ssk * ssk + 1.0 - 1e-9);
        }
    }

    #[test]
    fn scaling_and_negation(m in map_strategy(), c in 0.01..100.0f64) {
        let p = areal_params(&m).unwrap();
        let s = areal_params(&m.scaled(c)).unwrap();
        let n = areal_params(&m.scaled(-1.0)).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12);
        for (a, b) in [(s.sa, c * p.sa), (s.sq, c * p.sq), (s.sz, c * p.sz), (s.sp, c * p.sp), (s.sv, c * p.sv)] {
            prop_assert!(close(a, b), "{} vs {}", a, b);
        }
        // Ssk and Sku are dimensionless; skewness of a symmetric map is pure round-off
        let near = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        if let (Some(k), Some(ks)) = (p.ssk, s.ssk) {
            prop_assert!(near(k, ks), "{} vs {}", k, ks);
            prop_assert!(near(p.sku.unwrap(), s.sku.unwrap()));
            prop_assert!(near(-k, n.ssk.unwrap()));
            prop_assert!(near(p.sku.unwrap(), n.sku.unwrap()));
        }
        prop_assert_eq!((n.sp, n.sv), (p.sv, p.sp));
        prop_assert_eq!((n.sa, n.sq, n.sz), (p.sa, p.sq, p.sz));
    }

    #[test]
    fn leveled_map_has_zero_mean_and_tilt(m in map_strategy()) {
        let (r, c) = (m.rows(), m.cols());
        let (mut s, mut sx, mut sy, mut scale) = (0.0, 0.0, 0.0, 0.0f64);
        for i in 0..r {
            for j in 0..c {
                let z = m.get(i, j);
                s += z;
                sx += j as f64 * z;
                sy += i as f64 * z;
                scale = scale.max(z.abs());
            }
        }
        let tol = 1e-10 * scale.max(1.0) * (r * c * (r + c)) as f64;
        prop_assert!(s.abs() < tol && sx.abs() < tol && sy.abs() < tol);
    }
}

/// Least-squares plane by the 3x3 normal equations, solved with Cramer's rule.
fn brute_plane(z: &[f64], rows: usize, cols: usize, dx: f64, dy: f64) -> [f64; 3] {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for i in 0..rows {
        for j in 0..cols {
            let row = [1.0, j as f64 * dx, i as f64 * dy];
            for a in 0..3 {
                for b in 0..3 {
                    ata[a][b] += row[a] * row[b];
                }
                atb[a] += row[a] * z[i * cols + j];
            }
        }
    }
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(ata);
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut m = ata;
        for a in 0..3 {
            m[a][k] = atb[a];
        }
        *slot = det(m) / d;
    }
    out
}

#[test]
fn leveling_recovers_texture_under_a_plane() {
    let (rows, cols, dx, dy) = (30, 40, 0.5, 0.7);
    let texture = HeightMap::from_fn(rows, cols, dx, dy, |x, y| 0.3 * (x * 1.3).sin() * (y * 0.8).cos()).unwrap();
    let tilted = HeightMap::from_fn(rows, cols, dx, dy, |x, y| {
        0.3 * (x * 1.3).sin() * (y * 0.8).cos() + 4.0 - 0.7 * x + 1.9 * y
    })
    .unwrap();
    let a = level_mean_plane(&texture);
    let b = level_mean_plane(&tilted);
    for (p, q) in a.heights().iter().zip(b.heights()) {
        assert!((p - q).abs() < 1e-10);
    }
    // independent fit: residual of the normal-equation plane equals our leveling
    let plane = brute_plane(tilted.heights(), rows, cols, dx, dy);
    for i in 0..rows {
        for j in 0..cols {
            let fit = plane[0] + plane[1] * j as f64 * dx + plane[2] * i as f64 * dy;
            assert!((tilted.get(i, j) - fit - b.get(i, j)).abs() < 1e-10);
        }
    }
}
