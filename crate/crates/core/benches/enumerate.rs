//! Compares sequential and data-parallel per-user enumeration on a
//! generated snapshot.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cloudlens_core::ingest::compile;
use cloudlens_core::model::AttackType;
use cloudlens_core::plan::{
    enumerate_compromisable_users, enumerate_compromisable_users_sequential, AssumeConstraint,
    FlowMode, Goal, PlanningDomain, SearchLimits,
};
use cloudlens_core::scenario::{random_snapshot, GenParams};

fn bench_enumerate(c: &mut Criterion) {
    let params = GenParams {
        seed: 11,
        users: 24,
        groups: 4,
        roles: 6,
        datastores: 6,
        policies: 6,
        membership_density: 0.3,
        trust_density: 0.2,
        attachment_density: 0.3,
        grant_density: 0.25,
        sensitive_fraction: 0.5,
        public_fraction: 0.2,
    };
    let snapshot = random_snapshot(&params);
    let compiled = compile(&snapshot).expect("generated snapshots compile");
    let limits = SearchLimits::default();

    let mut group = c.benchmark_group("enumerate_compromisable_users");
    for goal in [AttackType::Ransomware, AttackType::Impact, AttackType::SensitiveDataExfiltration] {
        let domain = PlanningDomain::new(compiled.catalog.clone(), FlowMode::PerTuple, AssumeConstraint::Unrestricted);
        group.bench_with_input(BenchmarkId::new("sequential", goal.name()), &domain, |b, domain| {
            b.iter(|| {
                enumerate_compromisable_users_sequential(domain, &compiled.initial, Goal::Attack(goal), &limits)
            })
        });
        group.bench_with_input(BenchmarkId::new("parallel", goal.name()), &domain, |b, domain| {
            b.iter(|| enumerate_compromisable_users(domain, &compiled.initial, Goal::Attack(goal), &limits))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_enumerate);
criterion_main!(benches);
