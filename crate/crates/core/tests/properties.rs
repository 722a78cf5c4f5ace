mod common;

use avclbf::qp::{solve, solve_warm, QpStatus};
use avclbf::reach::{critical_value, negative_hold_bound, predicted_reach_time, Envelope};
use avclbf::sim::{assemble_qp, Simulator, TerminationReason};
use avclbf::{signed_pow, CSchedule};
use common::{enumerate_optimum, load, offset, random_lie_cases, random_qp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn signed_pow_million_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1_000_000 {
        let s: f64 = rng.random_range(-1e3..1e3);
        let q: f64 = rng.random_range(1e-3..1.0);
        let v = signed_pow(s, q);
        assert_eq!(v, -signed_pow(-s, q));
        assert!(v.signum() * s.signum() >= 0.0);
        let want = s.abs().powf(q);
        assert!((v.abs() - want).abs() <= 1e-12 * want.max(1.0), "{s} {q}");
    }
    assert_eq!(signed_pow(0.0, 0.25), 0.0);
}

proptest! {
    #[test]
    fn signed_pow_monotone(a in -50.0f64..50.0, b in -50.0f64..50.0, q in 0.05f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(signed_pow(lo, q) <= signed_pow(hi, q));
    }

    #[test]
    fn envelope_decreases_to_zero(h0 in 0.01f64..100.0, q in 0.05f64..0.95, k in 0.1f64..10.0, slope in 0.0f64..5.0) {
        let sched = CSchedule::new(vec![k, slope], 0.0).unwrap();
        let env = Envelope::new(h0, q, &sched).unwrap();
        let tr = env.reach_time();
        prop_assert!(tr.is_finite());
        prop_assert!((env.eval(0.0) - h0).abs() <= 1e-9 * h0.max(1.0));
        let mut prev = env.eval(0.0);
        for i in 1..=50 {
            let v = env.eval(tr * i as f64 / 40.0);
            prop_assert!(v <= prev + 1e-12);
            prev = v;
        }
        prop_assert_eq!(env.eval(tr), 0.0);
        let grown = sched.integral(tr) - sched.integral(0.0);
        prop_assert!((grown - critical_value(h0, q).unwrap()).abs() <= 1e-8 * grown.max(1.0));
        prop_assert!((predicted_reach_time(h0, q, &sched).unwrap() - tr).abs() <= 1e-12);
    }

    #[test]
    fn hold_boundary_is_zero(q in 0.05f64..0.95, tr in 0.0f64..3.0, dt in 0.0f64..3.0) {
        let sched = CSchedule::new(vec![1.0, 2.0], 0.0).unwrap();
        let m = negative_hold_bound(0.0, q, &sched, tr, tr + dt).unwrap();
        prop_assert_eq!(m.bound, 0.0);
        prop_assert!(m.condition_holds);
    }

    #[test]
    fn qp_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_qp(&mut rng);
        let sol = solve(&p).unwrap();
        match enumerate_optimum(&p) {
            Some((obj, _)) => {
                prop_assert_eq!(sol.status, QpStatus::Optimal);
                prop_assert!((sol.objective - obj).abs() <= 1e-6 * obj.abs().max(1.0));
                prop_assert!(sol.kkt_residual <= 1e-8);
                for r in &p.rows {
                    prop_assert!(r.slack(&sol.z) >= -1e-9 * r.scale(&sol.z));
                }
            }
            None => {
                prop_assert_eq!(sol.status, QpStatus::Infeasible);
                prop_assert!(sol.certificate.unwrap().verify(&p));
            }
        }
    }

    #[test]
    fn warm_start_agrees_with_cold(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_qp(&mut rng);
        let cold = solve(&p).unwrap();
        prop_assume!(cold.is_optimal());
        // perturb the right-hand sides so the guess is near but not exact
        let mut q = p.clone();
        for r in &mut q.rows {
            r.b += rng.random_range(-1e-3..1e-3);
        }
        let warm = solve_warm(&q, &cold.active).unwrap();
        let fresh = solve(&q).unwrap();
        prop_assert_eq!(warm.status, fresh.status);
        if fresh.is_optimal() {
            prop_assert!((warm.objective - fresh.objective).abs() <= 1e-8 * fresh.objective.abs().max(1.0));
            for (a, b) in warm.z.iter().zip(&fresh.z) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn rows_match_flow_derivatives(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in random_lie_cases(&mut rng) {
            prop_assert!(c.rel_err() <= 1e-4, "{:?}", c);
        }
    }
}

#[test]
fn applied_inputs_satisfy_every_row() {
    for cfg in [offset(load("fig5_avclbf.json")), load("fig6_tvcbf_pi4.json")] {
        let log = avclbf::run(&cfg).unwrap();
        for s in log.samples.iter().filter(|s| s.u.is_some()) {
            let u = s.u.unwrap();
            assert!(u.u1 >= cfg.sim.u_min[0] - 1e-9 && u.u1 <= cfg.sim.u_max[0] + 1e-9);
            assert!(u.u2 >= cfg.sim.u_min[1] - 1e-9 && u.u2 <= cfg.sim.u_max[1] + 1e-9);
            for r in &s.rows {
                assert!(r.lhs - r.rhs >= -1e-9 * r.scale, "{} at t = {}", r.tag, s.t);
            }
            assert!(s.kkt_residual.unwrap() <= 1e-8);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = offset(load("fig2_r1.json"));
    let a = avclbf::run(&cfg).unwrap();
    let b = avclbf::run(&cfg).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.summary.status, TerminationReason::Reached);
    assert_eq!(a.summary.t_r_s, b.summary.t_r_s);
}

#[test]
fn warm_and_cold_steps_coincide() {
    let cfg = offset(load("fig6_avclbf.json"));
    let mut sim = Simulator::new(&cfg);
    let (mut s, mut a1, dt) = (cfg.initial_state(), cfg.initial_a1(), cfg.sim.dt);
    for k in 0..150 {
        let t = k as f64 * dt;
        let cold = solve(&assemble_qp(&cfg, &s, a1, t).unwrap().problem).unwrap();
        let r = sim.step(&s, a1, t).unwrap();
        let u = r.sample.u.unwrap();
        assert!((u.u1 - cold.z[0]).abs() <= 1e-6 && (u.u2 - cold.z[1]).abs() <= 1e-6, "t = {t}");
        s = r.state;
        a1 = r.a1;
    }
}

#[test]
fn benchmarks_leave_auxiliary_untouched() {
    let log = avclbf::run(&load("fig6_tvcbf_0.json")).unwrap();
    assert!(log.samples.iter().all(|s| s.a1 == 1.0 && s.nu1.is_none()));
}
