use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use edgecollab_core::{Algorithm, SystemConfig};
use edgecollab_marl::{Execution, Mode, TrainConfig, Trainer};

fn rollouts(c: &mut Criterion) {
    let cfg = SystemConfig::desk();
    let catalog = Arc::new(cfg.build_catalog().unwrap());
    let trainer = Trainer::new(&cfg, catalog, Algorithm::HcMappoL.spec(), TrainConfig::default(), 0).unwrap();
    let seeds = trainer.train_seeds(0);
    let mut group = c.benchmark_group("collect");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(name, |b| b.iter(|| trainer.collect(&seeds, Mode::Train, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, rollouts);
criterion_main!(benches);
