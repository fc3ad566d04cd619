//! End-to-end acceptance gate: one test per acceptance criterion, each
//! printing a single PASS/FAIL line with its headline numbers.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use quadmpc::config::RobotConfig;
use quadmpc::dynamics::{build_continuous_model, discretize, RobotState};
use quadmpc::gait::stall_detect;
use quadmpc::kinematics::{
    forward_kinematics, inverse_kinematics, leg_jacobian, JointAngles, LegConfig, Side,
};
use quadmpc::mpc::ReferenceMode;
use quadmpc::qp::{projected_gradient_oracle, QpOptions, QpProblem, QpSolver};
use quadmpc::sim::world::terrain_height;
use quadmpc::sim::{run_scenario, Outcome, ScenarioKind, ScenarioOptions, Terrain};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn verdict(name: &str, pass: bool, detail: &str) {
    let line = format!(
        "{}: acceptance {name} — {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // Write past the harness's output capture so the verdict line is visible
    // even for passing tests; fall back to the captured stream otherwise.
    use std::io::Write;
    match std::fs::OpenOptions::new().write(true).open("/dev/stdout") {
        Ok(mut out) => {
            let _ = out.write_all(line.as_bytes());
        }
        Err(_) => print!("{line}"),
    }
    assert!(pass, "acceptance {name} failed: {detail}");
}

fn opts(seed: u64) -> ScenarioOptions {
    ScenarioOptions {
        seed,
        ..ScenarioOptions::default()
    }
}

#[test]
fn criterion_1_kinematics_oracles() {
    let start = Instant::now();
    let legs = [
        LegConfig::new(0.11, 0.35, 0.36, Vector3::new(0.25, 0.11, 0.0), Side::Left),
        LegConfig::new(0.11, 0.35, 0.36, Vector3::new(0.25, -0.11, 0.0), Side::Right),
        LegConfig::new(0.11, 0.35, 0.36, Vector3::new(-0.25, 0.11, 0.0), Side::Left),
        LegConfig::new(0.11, 0.35, 0.36, Vector3::new(-0.25, -0.11, 0.0), Side::Right),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_pos = 0.0f64;
    let mut worst_jac = 0.0f64;
    for leg in &legs {
        for _ in 0..1000 {
            let q = JointAngles::new(
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.5..1.0),
                rng.gen_range(0.15..2.8),
            );
            let p = forward_kinematics(&q, leg);
            let q_ik = inverse_kinematics(&p, leg).expect("FK image is reachable");
            let p_back = forward_kinematics(&q_ik, leg);
            worst_pos = worst_pos.max((p - p_back).norm());

            let j = leg_jacobian(&q, leg);
            let h = 1e-6;
            let mut j_fd = Matrix3::zeros();
            for col in 0..3 {
                let mut qp = q;
                let mut qm = q;
                match col {
                    0 => {
                        qp.theta1 += h;
                        qm.theta1 -= h;
                    }
                    1 => {
                        qp.theta2 += h;
                        qm.theta2 -= h;
                    }
                    _ => {
                        qp.theta3 += h;
                        qm.theta3 -= h;
                    }
                }
                let d = (forward_kinematics(&qp, leg) - forward_kinematics(&qm, leg))
                    / (2.0 * h);
                j_fd.set_column(col, &d);
            }
            worst_jac = worst_jac.max((j - j_fd).norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "1 kinematics",
        worst_pos < 1e-9 && worst_jac < 1e-6 && secs < 1.0,
        &format!(
            "FK∘IK worst {worst_pos:.2e} m, Jacobian worst {worst_jac:.2e}, {secs:.2} s"
        ),
    );
}

#[test]
fn criterion_2_dynamics_model() {
    let start = Instant::now();
    let cfg = RobotConfig::default();
    let params = cfg.body_params();
    let state = RobotState::at_rest(Vector3::new(0.1, -0.05, 0.42));
    let feet = [
        Vector3::new(0.35, 0.11, 0.0),
        Vector3::new(0.35, -0.11, 0.0),
        Vector3::new(-0.15, 0.11, 0.0),
        Vector3::new(-0.15, -0.11, 0.0),
    ];
    let model = build_continuous_model(&state, &feet, &params).unwrap();

    // Structural sparsity: Euler-rate block, velocity integration block and
    // the gravity augmentation column are the only non-zero entries of A.
    let mut sparsity_ok = true;
    for i in 0..13 {
        for j in 0..13 {
            let allowed = (i < 3 && (6..9).contains(&j))
                || ((3..6).contains(&i) && (9..12).contains(&j))
                || (i == 11 && j == 12);
            if !allowed && model.a[(i, j)] != 0.0 {
                sparsity_ok = false;
            }
        }
    }

    // Free fall: zero input must accelerate at exactly (0, 0, -g).
    let xdot = &model.a * state.to_vector();
    let ff_err = (xdot[9].abs())
        .max(xdot[10].abs())
        .max((xdot[11] + cfg.world.gravity).abs());

    // ZOH discretization vs a 1000-substep RK4 integration of the LTI system.
    let dt = 0.05;
    let disc = discretize(&model, dt);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = state.to_vector();
    for i in 0..12 {
        x[i] += rng.gen_range(-0.2..0.2);
    }
    let u = DVector::from_fn(12, |_, _| rng.gen_range(-50.0..50.0));
    let exact = &disc.ad * &x + &disc.bd * &u;
    let mut fine = x.clone();
    let h = dt / 1000.0;
    let deriv = |x: &DVector<f64>| &model.a * x + &model.b * &u;
    for _ in 0..1000 {
        let k1 = deriv(&fine);
        let k2 = deriv(&(&fine + &k1 * (h / 2.0)));
        let k3 = deriv(&(&fine + &k2 * (h / 2.0)));
        let k4 = deriv(&(&fine + &k3 * h));
        fine += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    let disc_err = (exact - fine).norm();

    let secs = start.elapsed().as_secs_f64();
    verdict(
        "2 dynamics",
        sparsity_ok && ff_err < 1e-12 && disc_err < 1e-8 && secs < 5.0,
        &format!(
            "sparsity {sparsity_ok}, free-fall err {ff_err:.2e}, ZOH vs RK4 {disc_err:.2e}, {secs:.2} s"
        ),
    );
}

#[test]
fn criterion_3_qp_solver() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut solver = QpSolver::new();
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_kkt = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=8);
        let m = rng.gen_range(1..=12);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut h = &a * a.transpose();
        for i in 0..n {
            h[(i, i)] += 0.1;
        }
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
        let cx0 = &c * &x0;
        let lb = DVector::from_fn(m, |i, _| cx0[i] - rng.gen_range(0.1..1.0));
        let ub = DVector::from_fn(m, |i, _| cx0[i] + rng.gen_range(0.1..1.0));
        let prob = QpProblem { h, g, c, lb, ub };

        let sol = solver.solve(&prob, &QpOptions::default()).unwrap();
        let x_ref = projected_gradient_oracle(&prob, 40_000);
        worst_gap = worst_gap.max(sol.objective - prob.objective(&x_ref));
        worst_kkt = worst_kkt.max(sol.kkt_residual);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "3 qp solver",
        worst_gap < 1e-8 && worst_kkt < 1e-6 && secs < 10.0,
        &format!(
            "worst objective gap {worst_gap:.2e}, worst KKT {worst_kkt:.2e}, {secs:.2} s"
        ),
    );
}

#[test]
fn criterion_4_static_stand() {
    let cfg = RobotConfig::default();
    let o = ScenarioOptions {
        duration: 5.5, // 0.5 s settle + the 5 s under evaluation
        ..opts(7)
    };
    let result = run_scenario(ScenarioKind::Stand, &cfg, &o).unwrap();

    let weight = cfg.body.mass * cfg.world.gravity;
    let settled: Vec<_> = result.records.iter().filter(|r| r.t >= 0.5).collect();
    let mean_fz: f64 = settled
        .iter()
        .map(|r| r.forces.iter().map(|f| f.z).sum::<f64>())
        .sum::<f64>()
        / settled.len() as f64;
    let p0 = settled.first().unwrap().position;
    let drift = settled
        .iter()
        .map(|r| (r.position - p0).norm())
        .fold(0.0f64, f64::max);
    let tilt_deg = result.metrics.max_tilt.to_degrees();

    let fz_rel = (mean_fz - weight).abs() / weight;
    verdict(
        "4 static stand",
        result.outcome == Outcome::Completed && fz_rel < 0.01 && drift < 0.01 && tilt_deg < 1.0,
        &format!(
            "mean Σfz {mean_fz:.1} N vs weight {weight:.1} N ({:.2}%), drift {:.4} m, tilt {tilt_deg:.3}°",
            100.0 * fz_rel,
            drift
        ),
    );
}

#[test]
fn criterion_5_disturbance_sweep() {
    let start = Instant::now();
    let cfg = RobotConfig::default();
    let mut recoveries = Vec::new();
    for force in [25.0, 50.0, 100.0, 150.0] {
        let o = ScenarioOptions { force, ..opts(7) };
        let result = run_scenario(ScenarioKind::Disturbance, &cfg, &o).unwrap();
        let rec = result.metrics.recovery_time;
        assert_eq!(result.outcome, Outcome::Completed, "{force} N pulse toppled");
        recoveries.push(rec.unwrap_or(f64::INFINITY));
    }
    let all_recover = recoveries.iter().all(|r| r.is_finite());
    // Monotone nondecreasing, allowing 20% noise on each step down.
    let monotone = recoveries
        .windows(2)
        .all(|w| w[1] >= 0.8 * w[0] - 1e-9);
    let last_ok = recoveries[3] <= 4.5;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "5 disturbance",
        all_recover && monotone && last_ok && secs < 120.0,
        &format!(
            "recoveries {:?} s for 25/50/100/150 N, {secs:.1} s",
            recoveries
                .iter()
                .map(|r| (r * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_6_reference_models() {
    let start = Instant::now();
    let cfg = RobotConfig::default();
    let terrain = Terrain::SineUneven {
        amplitude: 0.06,
        wavelength: 6.0,
    };
    let run = |mode: ReferenceMode| {
        let o = ScenarioOptions {
            ref_mode: Some(mode),
            ..opts(7)
        };
        run_scenario(ScenarioKind::UnevenSine, &cfg, &o).unwrap()
    };
    let rms = |result: &quadmpc::sim::RunResult| {
        let errs: Vec<f64> = result
            .records
            .iter()
            .filter(|r| r.t >= 0.5)
            .map(|r| {
                r.position.z - (terrain_height(&terrain, r.position.x, r.position.y) + 0.42)
            })
            .collect();
        (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
    };

    let sine = run(ReferenceMode::Sine);
    let constant = run(ReferenceMode::Constant);
    let rms_sine = rms(&sine);
    let rms_const = rms(&constant);

    // The constant-height reference cannot follow the terrain: its height
    // error drifts monotonically over the final ticks (sign test: at least
    // 7 of the 9 successive differences share a sign).
    let tail: Vec<f64> = constant
        .records
        .iter()
        .rev()
        .take(10)
        .map(|r| r.position.z - (terrain_height(&terrain, r.position.x, r.position.y) + 0.42))
        .collect();
    let diffs: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    let neg = diffs.iter().filter(|d| **d < 0.0).count();
    let trend = neg >= 7 || diffs.len() - neg >= 7;

    let secs = start.elapsed().as_secs_f64();
    verdict(
        "6 reference models",
        sine.outcome == Outcome::Completed
            && rms_sine < rms_const
            && trend
            && secs < 60.0,
        &format!(
            "height RMS sine {rms_sine:.4} m < constant {rms_const:.4} m, drift sign {}/{}, {secs:.1} s",
            neg.max(diffs.len() - neg),
            diffs.len()
        ),
    );
}

#[test]
fn criterion_7_gait_transition() {
    let start = Instant::now();
    let cfg = RobotConfig::default();
    let o = ScenarioOptions {
        duration: 15.0,
        ..opts(7)
    };
    let result = run_scenario(ScenarioKind::Transition, &cfg, &o).unwrap();
    let m = &result.metrics;

    // Reconstruct the earliest tick at which the armed detector could have
    // fired from the logged torso positions: the reported stall time must be
    // within one control tick of it, i.e. within window + 1 tick of the
    // moment the torso actually stopped.
    let window = cfg.bound.stall_window;
    let threshold = cfg.bound.stall_threshold;
    let dt_c = 1.0 / cfg.mpc.update_rate;
    let armed_from = result
        .records
        .iter()
        .find(|r| r.gait_mode == "bound")
        .map(|r| r.t + 3.0 + window)
        .unwrap_or(f64::INFINITY);
    let mut earliest = None;
    for r in &result.records {
        if r.t < armed_from || r.gait_mode != "bound" {
            continue;
        }
        let samples: Vec<(f64, Vector3<f64>)> = result
            .records
            .iter()
            .filter(|s| s.t >= r.t - window - 0.5 && s.t <= r.t + 1e-9)
            .map(|s| (s.t, s.position))
            .collect();
        if stall_detect(&samples, window, threshold) {
            earliest = Some(r.t);
            break;
        }
    }
    let stall_ok = match (m.stall_time, earliest) {
        (Some(t), Some(e)) => (t - e).abs() <= dt_c + 1e-9,
        _ => false,
    };

    let worst_margin = result
        .records
        .iter()
        .filter(|r| r.gait_mode == "transitioning")
        .map(|r| r.support_margin)
        .fold(f64::INFINITY, f64::min);

    // The established trot must also handle the 20° incline without
    // toppling for 5 s.
    let incline = run_scenario(
        ScenarioKind::Incline,
        &cfg,
        &ScenarioOptions {
            duration: 5.5,
            incline_deg: 20.0,
            ..opts(7)
        },
    )
    .unwrap();

    let secs = start.elapsed().as_secs_f64();
    verdict(
        "7 gait transition",
        result.outcome == Outcome::Completed
            && stall_ok
            && m.transition_time.is_some()
            && worst_margin >= 0.0
            && incline.outcome == Outcome::Completed
            && secs < 120.0,
        &format!(
            "stall at {:?} s (earliest possible {:?}), transition {:?} s, worst dwell margin {worst_margin:+.3} m, incline {:?}, {secs:.1} s",
            m.stall_time, earliest, m.transition_time, incline.outcome
        ),
    );
}

#[test]
fn criterion_8_drop_tests() {
    let start = Instant::now();
    let cfg = RobotConfig::default();
    let mut outcomes = Vec::new();
    let mut blowup = false;
    for height in [0.2, 0.4, 0.8] {
        let o = ScenarioOptions {
            drop_height: height,
            ..opts(7)
        };
        let result = run_scenario(ScenarioKind::Drop, &cfg, &o).unwrap();
        blowup |= result
            .records
            .iter()
            .any(|r| r.event.starts_with("numerical_blowup"));
        outcomes.push(result.outcome);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "8 drop tests",
        outcomes[0] == Outcome::Completed
            && outcomes[1] == Outcome::Completed
            && !blowup
            && secs < 60.0,
        &format!(
            "0.2 m {:?}, 0.4 m {:?}, 0.8 m {:?} (no numerical blowup: {}), {secs:.1} s",
            outcomes[0],
            outcomes[1],
            outcomes[2],
            !blowup
        ),
    );
}

#[test]
fn criterion_9_determinism() {
    let cfg = RobotConfig::default();
    let run = || {
        let result = run_scenario(ScenarioKind::UnevenSine, &cfg, &opts(7)).unwrap();
        let mut csv = quadmpc::sim::log::csv_header();
        for r in &result.records {
            csv.push_str(&quadmpc::sim::log::csv_row(r));
        }
        csv
    };
    let a = run();
    let b = run();
    verdict(
        "9 determinism",
        a == b && !a.is_empty(),
        &format!("two identical runs, {} bytes of CSV each", a.len()),
    );
}
