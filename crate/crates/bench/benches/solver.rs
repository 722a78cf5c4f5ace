use std::hint::black_box;

use avclbf::qp::{solve, solve_warm};
use avclbf::sim::{assemble_qp, Simulator};
use avclbf_bench::load;
use criterion::{criterion_group, criterion_main, Criterion};

fn qp(c: &mut Criterion) {
    let cfg = load("fig2_r1.json");
    let s = cfg.initial_state();
    let a1 = cfg.initial_a1();
    let p = assemble_qp(&cfg, &s, a1, 0.0).unwrap().problem;
    let cold = solve(&p).unwrap();
    c.bench_function("qp/avclbf_cold", |b| b.iter(|| solve(black_box(&p)).unwrap()));
    c.bench_function("qp/avclbf_warm", |b| {
        b.iter(|| solve_warm(black_box(&p), &cold.active).unwrap())
    });
}

fn closed_loop(c: &mut Criterion) {
    let cfg = load("fig5_avclbf.json");
    c.bench_function("sim/step", |b| {
        let s = cfg.initial_state();
        let a1 = cfg.initial_a1();
        b.iter(|| {
            let mut sim = Simulator::new(&cfg);
            sim.step(black_box(&s), a1, 0.0).unwrap()
        })
    });
    let cfg = load("fig6_tvcbf_pi2.json");
    c.bench_function("sim/run_tvcbf", |b| b.iter(|| avclbf::run(black_box(&cfg)).unwrap()));
}

criterion_group!(benches, qp, closed_loop);
criterion_main!(benches);
