use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use pilotbox_core::wavefield::{ForcingProjector, Propagator};
use pilotbox_core::{run, NormalizedParams, WaveField};

fn seeded_field(p: &NormalizedParams) -> WaveField {
    let mut f = WaveField::for_params(p);
    for (m, a) in f.coeffs.iter_mut().enumerate() {
        *a = 1.0 / (1.0 + m as f64).powi(2);
    }
    f
}

fn propagator(c: &mut Criterion) {
    let p = NormalizedParams::desk().with_epsilon(2.73);
    let field = seeded_field(&p);
    let prop = Propagator::new(&field, p.time_step()).unwrap();
    let forcing = vec![1e-3; field.n_modes()];
    c.bench_function("propagator_advance_77_modes", |b| {
        b.iter_batched_ref(
            || field.clone(),
            |f| prop.advance(f, black_box(&forcing), black_box(&forcing)),
            BatchSize::SmallInput,
        )
    });
}

fn evaluation(c: &mut Criterion) {
    let p = NormalizedParams::desk().with_epsilon(2.73);
    let field = seeded_field(&p);
    c.bench_function("value_and_slope_77_modes", |b| {
        b.iter(|| field.value_and_slope(black_box(1.234)))
    });
    let projector = ForcingProjector::new(&p);
    let mut out = vec![0.0; projector.n_modes()];
    c.bench_function("forcing_projection_77_modes", |b| {
        b.iter(|| projector.project_into(black_box(1.234), black_box(0.5), &mut out))
    });
}

fn short_run(c: &mut Criterion) {
    let p = NormalizedParams {
        t_final: 20.0,
        t_transient: 2.0,
        ..NormalizedParams::desk().with_epsilon(2.73)
    };
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    group.bench_function("desk_params_t20", |b| b.iter(|| run(black_box(&p)).unwrap()));
    group.finish();
}

criterion_group!(benches, propagator, evaluation, short_run);
criterion_main!(benches);
