use criterion::{criterion_group, criterion_main, Criterion};

use vaxnet::inference::{prepare_fixture, run_replicate, Hypothesis, ScenarioConfig};
use vaxnet::par;

fn scenario() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::family_network(4000, Hypothesis::Null);
    cfg.n_sims = 8;
    cfg.estimation.n_bootstrap = 100;
    cfg
}

fn replicates(c: &mut Criterion) {
    let cfg = scenario();
    let fixture = prepare_fixture(&cfg).unwrap();
    let mut group = c.benchmark_group("network_replicates");
    group.sample_size(10);
    // One worker: the replicate and bootstrap loops run in index order.
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::with_threads(1, || {
                par::map_indices_seq(cfg.n_sims, |r| run_replicate(&cfg, fixture.as_ref(), r).is_ok())
            })
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| par::map_indices(cfg.n_sims, |r| run_replicate(&cfg, fixture.as_ref(), r).is_ok()))
    });
    group.finish();
}

criterion_group!(benches, replicates);
criterion_main!(benches);
