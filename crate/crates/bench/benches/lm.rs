use criterion::{criterion_group, criterion_main, Criterion};
use legalret_bench::sentences;
use legalret_core::lm::{select_indomain, train_lm, LmConfig, SelectionConfig};

fn lm(c: &mut Criterion) {
    let train = sentences(1, 20_000, 2000);
    let held_out = sentences(2, 2000, 2000);
    c.bench_function("lm/train_trigram_20k", |b| {
        b.iter(|| train_lm(&train, LmConfig::default()).unwrap())
    });
    let model = train_lm(&train, LmConfig::default()).unwrap();
    c.bench_function("lm/perplexity_2k", |b| {
        b.iter(|| held_out.iter().map(|s| model.perplexity(s)).sum::<f64>())
    });
    let cfg = SelectionConfig::keep_below(2000.0).unwrap();
    c.bench_function("lm/select_indomain_2k", |b| {
        b.iter(|| select_indomain(&model, held_out.clone(), &cfg).len())
    });
}

criterion_group!(benches, lm);
criterion_main!(benches);
