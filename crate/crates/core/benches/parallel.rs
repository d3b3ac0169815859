use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mglab::complexity::{minimax_eluder_dimension, EluderSettings};
use mglab::harness::generators::{decoy_family, random_game, realizable_family};
use mglab::hypothesis::LinearFeatures;
use mglab::linear::{run_linear, LinearConfig, PlanMode};
use mglab::onemg::{self, OnemgConfig, Opponent};
use mglab::Execution;

const MODES: [(&str, Execution); 2] = [("serial", Execution::Serial), ("parallel", Execution::Parallel)];

fn onemg_elimination(c: &mut Criterion) {
    let g = random_game(4, 4, 3, 0.0, 0).unwrap();
    let fam = realizable_family(&g, None, 255, 0.4, 0).unwrap();
    let mut group = c.benchmark_group("onemg_256_members_k50");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = OnemgConfig { execution: exec, ..OnemgConfig::new(50, 1) };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(onemg::run(&g, &fam, &cfg, &Opponent::BestResponse).unwrap().cumulative_regret()))
        });
    }
    group.finish();
}

fn linear_search(c: &mut Criterion) {
    let g = random_game(3, 3, 2, 0.0, 0).unwrap();
    let f = LinearFeatures::one_hot(g.shape());
    let mut group = c.benchmark_group("linear_search_k20");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = LinearConfig { mode: PlanMode::Search, execution: exec, ..LinearConfig::new(20, 1) };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(run_linear(&g, &f, &cfg, &Opponent::BestResponse).unwrap().cumulative_regret()))
        });
    }
    group.finish();
}

fn eluder_exact(c: &mut Criterion) {
    let g = random_game(2, 3, 2, 0.0, 2).unwrap();
    let fam = decoy_family(&g, 10, 2).unwrap();
    let mut group = c.benchmark_group("eluder_exact_12_cells");
    group.sample_size(10);
    for (name, exec) in MODES {
        let settings = EluderSettings { execution: exec, ..EluderSettings::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(minimax_eluder_dimension(&g, &fam, None, 0.2, settings).unwrap().dimension))
        });
    }
    group.finish();
}

criterion_group!(benches, onemg_elimination, linear_search, eluder_exact);
criterion_main!(benches);
