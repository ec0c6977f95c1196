use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quotamatch::assignment_lp::extract_assignment_with;
use quotamatch::constraints::enumerate_feasible_sets_with;
use quotamatch::stability::brute_force_efficient_with;
use quotamatch::{ConstraintFamily, Execution, MarketInstance, QuotaEntry, Rational, WorkerSet};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

/// `n` workers, `m` firms, each firm capped at two hires from each half of the workers.
fn market(n: usize, m: usize) -> MarketInstance {
    let workers = (0..n).map(|i| format!("w{i}")).collect();
    let firms = (0..m).map(|i| format!("f{i}")).collect();
    let a = (0..n).map(|w| (0..m).map(|f| Rational::new(((w * 3 + f) % 5) as i64 - 2, 4)).collect()).collect();
    let c = (0..n).map(|w| (0..m).map(|f| Rational::new(((w * 7 + f * 3) % 11) as i64, 5)).collect()).collect();
    let halves = [WorkerSet::from_indices(0..n / 2), WorkerSet::from_indices(n / 2..n)];
    let fam = ConstraintFamily::new(halves.iter().map(|h| QuotaEntry::upper_only(*h, 2)).collect()).unwrap();
    MarketInstance::linear(workers, firms, a, c, vec![fam; m]).unwrap()
}

fn brute_force(c: &mut Criterion) {
    let mut group = c.benchmark_group("brute_force_efficient");
    group.sample_size(10);
    for (n, m) in [(8, 2), (9, 3)] {
        let inst = market(n, m);
        for (label, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(label, format!("{n}x{m}")), &inst, |b, inst| {
                b.iter(|| brute_force_efficient_with(inst, u128::MAX, false, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn feasible_sets(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumerate_feasible_sets");
    group.sample_size(10);
    let inst = market(18, 1);
    for (label, exec) in MODES {
        group.bench_function(BenchmarkId::new(label, 18), |b| {
            b.iter(|| enumerate_feasible_sets_with(&inst, 0, u128::MAX, exec).unwrap())
        });
    }
    group.finish();
}

fn vertex_search(c: &mut Criterion) {
    // Pairwise caps over three workers: the optimum is fractional and the
    // search exhausts every fixing before giving up.
    let pairs = [[0, 1], [1, 2], [0, 2]];
    let fam = ConstraintFamily::new(pairs.iter().map(|p| QuotaEntry::upper_only(WorkerSet::from_indices(*p), 1)).collect())
        .unwrap();
    let one = || vec![Rational::one()];
    let inst = MarketInstance::linear(
        vec!["w1".into(), "w2".into(), "w3".into()],
        vec!["f".into()],
        vec![vec![Rational::zero()]; 3],
        vec![one(), one(), one()],
        vec![fam],
    )
    .unwrap();
    let art = quotamatch::assignment_lp::build_ub_lp(&inst).unwrap();
    let sol = quotamatch::lp::solve_lp(&art.problem).unwrap();
    let mut group = c.benchmark_group("vertex_search");
    for (label, exec) in MODES {
        group.bench_function(label, |b| b.iter(|| extract_assignment_with(&art, &sol, true, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, brute_force, feasible_sets, vertex_search);
criterion_main!(benches);
