use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sswpt_core::{
    probe_impedance_angle, run_session, solve_tank, two_step_identify, IdentifyConfig, Scenario,
};

fn bench_solve_tank(c: &mut Criterion) {
    let tank = Scenario::builtin("table1").unwrap().resolved_tank();
    let w = 2.0 * PI * 85e3;
    c.bench_function("solve_tank", |b| {
        b.iter(|| solve_tank(black_box(&tank), black_box(w)).unwrap())
    });
}

fn bench_identify(c: &mut Criterion) {
    let scenario = Scenario::builtin("case1").unwrap();
    let tank = scenario.resolved_tank();
    let cfg = IdentifyConfig::default();
    c.bench_function("two_step_identify", |b| {
        b.iter(|| {
            let probe =
                |f: f64| probe_impedance_angle(&tank, &scenario.scc, black_box(f), &scenario.disturbances);
            two_step_identify(probe, &cfg)
        })
    });
}

fn bench_session(c: &mut Criterion) {
    let scenario = Scenario::builtin("case1").unwrap();
    c.bench_function("run_session_case1", |b| {
        b.iter(|| run_session(black_box(&scenario)).unwrap())
    });
}

criterion_group!(benches, bench_solve_tank, bench_identify, bench_session);
criterion_main!(benches);
