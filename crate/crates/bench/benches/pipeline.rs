use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use manifestscope_core::axml::decode_axml;
use manifestscope_core::dexscan::scan_dex;
use manifestscope_core::risk::{assess, IndicatorVector, RiskPolicy};
use manifestscope_core::{Analyzer, ApkArchive};
use manifestscope_fixtures::corpus;
use manifestscope_fixtures::dex::build_dex;

fn decoders(c: &mut Criterion) {
    let manifest = corpus::sdk_signals_app().manifest_bytes();
    c.bench_function("decode_axml/manifest", |b| {
        b.iter(|| decode_axml(black_box(&manifest)).unwrap())
    });

    let names: Vec<String> = (0..5_000)
        .map(|i| format!("Lcom/example/pkg{}/Class{i};", i % 50))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let dex = build_dex(&refs, "035");
    c.bench_function("scan_dex/5000_strings", |b| {
        b.iter(|| scan_dex(black_box(&dex)).unwrap())
    });
}

fn analysis(c: &mut Criterion) {
    let analyzer = Analyzer::default();
    let apks: Vec<(String, Vec<u8>)> = corpus::corpus()
        .iter()
        .map(|a| (a.file_name(), a.apk()))
        .collect();
    c.bench_function("analyze_archive/corpus_21", |b| {
        b.iter(|| {
            for (name, bytes) in &apks {
                let archive = ApkArchive::from_bytes(name.as_str(), bytes.clone()).unwrap();
                black_box(analyzer.analyze_archive(&archive).unwrap());
            }
        })
    });

    let policy = RiskPolicy::default();
    let v = IndicatorVector {
        tracking_present: true,
        backup_enabled: true,
        exported_unprotected_count: 1,
        ..IndicatorVector::default()
    };
    c.bench_function("assess", |b| b.iter(|| assess(black_box(&v), &policy)));
}

criterion_group!(benches, decoders, analysis);
criterion_main!(benches);
