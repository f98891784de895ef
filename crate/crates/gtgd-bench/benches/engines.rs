//! Benchmarks of the main engines on desk-scale inputs.

use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gtgd_bench::*;
use gtgd_core::approx::ucq_k_approx;
use gtgd_core::chase::{chase, ChaseBudget};
use gtgd_core::decision::{omq_equiv_k, DecisionOptions};
use gtgd_core::guarded::certain_answers;
use gtgd_core::linearize::fpt_eval_omq;
use gtgd_core::reductions::{clique_reduction_constraint_free, clique_reduction_cqs};
use gtgd_core::textio::parse_cq;
use gtgd_core::treewidth::treewidth;
use gtgd_core::{name, Cq, Name, Omq, Schema, Ucq};

fn chase_levels(c: &mut Criterion) {
    let sigma = lasso();
    let mut g = c.benchmark_group("chase_levels");
    for n in [4usize, 16, 64] {
        let d = path_db(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &d, |b, d| {
            b.iter(|| chase(black_box(d), &sigma, ChaseBudget::Levels(8)))
        });
    }
    g.finish();
}

fn guarded_answers(c: &mut Criterion) {
    let sigma = guarded_sigma();
    let q = Ucq::single(Cq::build(&["x"], &[("C", &["x"]), ("R", &["x", "y"])]));
    let mut g = c.benchmark_group("guarded_certain_answers");
    for n in [4usize, 16, 64] {
        let d = path_db(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &d, |b, d| {
            b.iter(|| certain_answers(black_box(d), &sigma, &q).unwrap())
        });
    }
    g.finish();
}

fn fpt_pipeline(c: &mut Criterion) {
    let schema = Schema::from_pairs([("A", 1), ("R", 2)]).unwrap();
    let q = Ucq::single(Cq::build(&[], &[("S", &["x", "y"]), ("C", &["x"])]));
    let omq = Omq::new(schema, guarded_sigma(), q);
    let d = path_db(6);
    c.bench_function("fpt_eval_omq/path6", |b| b.iter(|| fpt_eval_omq(&omq, black_box(&d), &[]).unwrap()));
}

fn exact_treewidth(c: &mut Criterion) {
    let mut g = c.benchmark_group("treewidth_grid");
    for n in [3usize, 4] {
        let graph = grid(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &graph, |b, graph| b.iter(|| treewidth(black_box(graph)).unwrap()));
    }
    g.finish();
}

fn approximation_and_deciders(c: &mut Criterion) {
    let q1 = example_q1();
    let q2 = example_q2();
    let opts = DecisionOptions::default();
    let mut g = c.benchmark_group("deciders");
    g.sample_size(10);
    g.bench_function("ucq_1_approx/q1", |b| b.iter(|| ucq_k_approx(black_box(&q1), 1).unwrap()));
    g.bench_function("omq_equiv_1/q1", |b| b.iter(|| omq_equiv_k(black_box(&q1), 1, &opts).unwrap()));
    g.bench_function("omq_equiv_1/q2", |b| b.iter(|| omq_equiv_k(black_box(&q2), 1, &opts).unwrap()));
    g.finish();
}

fn clique_reduction(c: &mut Criterion) {
    let q = parse_cq("q() :- E(x,y)").unwrap();
    let graph = k6();
    let mut g = c.benchmark_group("clique_reduction");
    g.bench_function("edge_query/k6", |b| b.iter(|| clique_reduction_constraint_free(black_box(&graph), 2, &q).unwrap()));
    let (s, p, pp) = constrained_with_p();
    let x: BTreeSet<Name> = [name("x"), name("y")].into_iter().collect();
    let opts = DecisionOptions::default();
    g.sample_size(10);
    g.bench_function("constrained_cqs/k6", |b| {
        b.iter(|| clique_reduction_cqs(black_box(&graph), 2, &s, &p, &pp, &x, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, chase_levels, guarded_answers, fpt_pipeline, exact_treewidth, approximation_and_deciders, clique_reduction);
criterion_main!(benches);
