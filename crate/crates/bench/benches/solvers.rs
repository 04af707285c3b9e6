use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use bcsreach::bcs::solve_np;
use bcsreach::monoid::{is_identity, rewrite_oracle};
use bcsreach::polytime::solve_poly;
use bcsreach::saturation::saturate;
use bcsreach::system::brute_force_bcsreach;
use bcsreach::{Op, StorageGraph};
use bcsreach_bench::{c4_family, pushdown_family, sat_instance};

fn word_problem(c: &mut Criterion) {
    let mut g = StorageGraph::new(["a1", "a2", "b1", "b2"]).unwrap();
    for (a, b) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
        g.add_edge(a, b);
    }
    let w: Vec<Op> = [Op::pos(0), Op::pos(2), Op::pos(1), Op::pos(3), Op::neg(3), Op::neg(1), Op::neg(2), Op::neg(0)].to_vec();
    let mut group = c.benchmark_group("word_problem");
    group.bench_function("normal_form", |b| b.iter(|| is_identity(&g, black_box(&w))));
    group.bench_function("rewrite_oracle", |b| b.iter(|| rewrite_oracle(&g, black_box(&w)).unwrap()));
    group.finish();
}

fn saturation(c: &mut Criterion) {
    let family: Vec<_> = pushdown_family(3, 32).into_iter().filter(|i| i.system.is_dependent()).collect();
    c.bench_function("saturate/pushdown", |b| {
        b.iter(|| family.iter().map(|i| saturate(&i.system).unwrap().added.len()).sum::<usize>())
    });
}

fn pushdown_solvers(c: &mut Criterion) {
    let family = pushdown_family(2, 16);
    let mut group = c.benchmark_group("pushdown");
    for k in [0u32, 1, 2] {
        group.bench_with_input(BenchmarkId::new("np", k), &k, |b, &k| {
            b.iter(|| family.iter().filter(|i| solve_np(&i.system, i.q_init, i.q_fin, k).unwrap().certificate.is_some()).count())
        });
        group.bench_with_input(BenchmarkId::new("poly", k), &k, |b, &k| {
            b.iter(|| family.iter().filter(|i| solve_poly(&i.system, i.q_init, i.q_fin, k).unwrap()).count())
        });
        group.bench_with_input(BenchmarkId::new("oracle", k), &k, |b, &k| {
            b.iter(|| {
                family.iter().filter(|i| brute_force_bcsreach(&i.system, i.q_init, i.q_fin, k, 8).is_ok_and(|o| o.reachable)).count()
            })
        });
    }
    group.finish();
}

fn c4_solvers(c: &mut Criterion) {
    let family = c4_family(16);
    c.bench_function("c4/np_k2", |b| {
        b.iter(|| family.iter().filter(|i| solve_np(&i.system, i.q_init, i.q_fin, 2).unwrap().certificate.is_some()).count())
    });
    let mut group = c.benchmark_group("sat_reduction");
    group.sample_size(10);
    for vars in [2usize, 3] {
        let inst = sat_instance(7, vars, 2);
        let k = inst.k.expect("reduction sets k");
        group.bench_with_input(BenchmarkId::new("np", vars), &inst, |b, i| {
            b.iter(|| solve_np(&i.system, i.q_init, i.q_fin, k).unwrap().answer)
        });
    }
    group.finish();
}

criterion_group!(benches, word_problem, saturation, pushdown_solvers, c4_solvers);
criterion_main!(benches);
