use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use finchat_core::knowledge::{financial_bank, HashingEmbedder, KnowledgeIndex, DEFAULT_K, DEFAULT_THRESHOLD};
use finchat_core::metrics::score_pair;
use finchat_core::tinylm::{Sampler, SamplerConfig};
use finchat_core::{ModelConfig, TinyLm};

fn model() -> TinyLm {
    let config = ModelConfig {
        d_model: 64,
        n_layers: 2,
        n_heads: 4,
        d_ff: 128,
        context_length: 128,
        vocab_size: 1000,
        ..ModelConfig::default()
    };
    TinyLm::init(config, 0).expect("valid config")
}

fn forward(c: &mut Criterion) {
    let lm = model();
    let ids: Vec<u32> = (0..96).map(|i| 4 + (i * 37) % 990).collect();
    c.bench_function("forward_96_tokens", |b| b.iter(|| lm.forward(black_box(&ids)).unwrap()));
    c.bench_function("generate_16_tokens", |b| {
        b.iter(|| {
            let cfg = SamplerConfig { max_target_length: 16, ..SamplerConfig::default() };
            let mut sampler = Sampler::new(cfg).unwrap();
            sampler.generate(&lm, black_box(&ids[..32]), None).unwrap()
        })
    });
}

fn retrieval(c: &mut Criterion) {
    let embedder = HashingEmbedder::default();
    let triples: Vec<_> = financial_bank().into_iter().map(|e| e.triple).collect();
    let index = KnowledgeIndex::build(&triples, &embedder, DEFAULT_THRESHOLD).unwrap();
    c.bench_function("retrieve_top3", |b| {
        b.iter(|| index.retrieve(&embedder, black_box("what gold bullion is used for ?"), DEFAULT_K).unwrap())
    });
    c.bench_function("build_index", |b| b.iter(|| KnowledgeIndex::build(black_box(&triples), &embedder, 0.7).unwrap()));
}

fn metrics(c: &mut Criterion) {
    let embedder = HashingEmbedder::default();
    let hyp = "happy to help ! index funds is used for spreading risk . start early and stay consistent .";
    let gold =
        "Happy to help! index funds is used for spreading risk. Rebalance your portfolio once a year. Hope this helps!";
    c.bench_function("score_pair", |b| b.iter(|| score_pair(black_box(hyp), black_box(gold), &embedder).unwrap()));
}

criterion_group!(benches, forward, retrieval, metrics);
criterion_main!(benches);
