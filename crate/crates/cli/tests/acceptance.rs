//! Acceptance criteria AC1-AC7. Each test writes one `[PASS]`/`[FAIL]` line
//! straight to stderr so it shows even when output is captured.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use manifestscope_core::axml::{decode_axml, AxmlElement, AxmlError};
use manifestscope_core::dexscan::{scan_dex, DexError};
use manifestscope_core::fingerprints::SdkCategory;
use manifestscope_core::manifest::{AllowBackup, CleartextTraffic, ComponentKind, NscCleartext};
use manifestscope_core::report::{CohortReport, RiskCounts};
use manifestscope_core::risk::{assess, IndicatorVector, RiskLevel, RiskPolicy};
use manifestscope_core::{Analyzer, ApkArchive, AppReport};
use manifestscope_fixtures::reference::{self, AttributeRow, ElementRow};
use manifestscope_fixtures::{corpus, fixtures_dir, oracle_axml, oracle_dex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: &str, what: &str, result: Result<String, String>) {
    let line = match &result {
        Ok(detail) => format!("[PASS] {id} {what}: {detail}\n"),
        Err(why) => format!("[FAIL] {id} {what}: {why}\n"),
    };
    let _ = std::io::stderr().write_all(line.as_bytes());
    if let Err(why) = result {
        panic!("{id} failed: {why}");
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_manifestscope"));
    c.env_remove("MANIFESTSCOPE_DB");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn corpus_dir() -> PathBuf {
    fixtures_dir().join("corpus")
}

#[test]
fn ac1_cohort_risk_table() {
    let result = (|| {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = tmp.path().join("reports");
        let start = Instant::now();
        let analyze = run(bin()
            .arg("analyze")
            .arg("--out")
            .arg(&out)
            .arg(corpus_dir()));
        check(analyze.status.code() == Some(0), || {
            format!(
                "analyze exit {:?}: {}",
                analyze.status.code(),
                String::from_utf8_lossy(&analyze.stderr)
            )
        })?;
        let labels = fixtures_dir().join("labels.csv");
        let md = run(bin()
            .args(["report", "--format", "markdown", "--labels"])
            .arg(&labels)
            .arg(&out));
        let json = run(bin()
            .args(["report", "--format", "json", "--labels"])
            .arg(&labels)
            .arg(&out));
        let elapsed = start.elapsed();
        check(md.status.success() && json.status.success(), || {
            "report failed".into()
        })?;

        let report: CohortReport =
            serde_json::from_slice(&json.stdout).map_err(|e| e.to_string())?;
        let expect = [
            (
                "children-oriented",
                RiskCounts {
                    high: 5,
                    medium: 7,
                    low: 0,
                },
            ),
            (
                "general-audience",
                RiskCounts {
                    high: 4,
                    medium: 4,
                    low: 1,
                },
            ),
        ];
        check(report.cohorts.len() == 2, || {
            format!("cohorts {:?}", report.cohorts.keys())
        })?;
        for (label, counts) in expect {
            let got = report.cohorts.get(label).map(|c| c.counts);
            check(got == Some(counts), || {
                format!("{label}: {got:?} != {counts:?}")
            })?;
        }
        let totals = report.totals.counts;
        check(
            totals
                == RiskCounts {
                    high: 9,
                    medium: 11,
                    low: 1,
                }
                && report.totals.app_count == 21,
            || format!("totals {totals:?}"),
        )?;
        let text = String::from_utf8_lossy(&md.stdout);
        for row in [
            "| Risk Assessment | High risk | Medium risk | Low risk | Total |",
            "| Children-oriented | 5 | 7 | 0 | 12 |",
            "| General-audience | 4 | 4 | 1 | 9 |",
            "| Total | 9 | 11 | 1 | 21 |",
        ] {
            check(text.contains(row), || format!("markdown lacks {row:?}"))?;
        }
        check(elapsed < Duration::from_secs(10), || {
            format!("took {elapsed:?}")
        })?;
        Ok(format!(
            "9/11/1 over 21, exact, {:.2}s",
            elapsed.as_secs_f64()
        ))
    })();
    verdict("AC1", "cohort risk table", result);
}

fn analyze_fixture(file: &str) -> Result<AppReport, String> {
    let archive = ApkArchive::open(corpus_dir().join(file)).map_err(|e| e.to_string())?;
    Analyzer::default()
        .analyze_archive(&archive)
        .map_err(|e| e.to_string())
}

#[test]
fn ac2_example_app_regressions() {
    let result = (|| {
        let r = analyze_fixture(&corpus::backup_disabled_app().file_name())?;
        check(r.facts.allow_backup == AllowBackup::False, || {
            "backup-disabled app: allow_backup".into()
        })?;

        let r = analyze_fixture(&corpus::backup_agent_app().file_name())?;
        let f = &r.facts;
        check(
            f.backup_agent_declared
                && f.restore_any_version
                && f.nsc_reference
                && f.nsc_permits_cleartext == Some(NscCleartext::Unresolved),
            || format!("backup-agent app facts {f:?}"),
        )?;

        let r = analyze_fixture(&corpus::cleartext_nsc_app().file_name())?;
        check(
            r.facts.cleartext_traffic == CleartextTraffic::ExplicitTrue,
            || "cleartext app: cleartext_traffic".into(),
        )?;

        let r = analyze_fixture(&corpus::exposed_components_app().file_name())?;
        let deep = r.facts.components.iter().any(|c| {
            c.kind == ComponentKind::Activity
                && c.deep_link
                && c.exported_effective
                && c.filter_actions
                    .iter()
                    .any(|a| a == "android.intent.action.VIEW")
        });
        let service = r.facts.components.iter().any(|c| {
            c.kind == ComponentKind::Service && c.exported_effective && !c.protected_by_permission
        });
        check(deep && service, || {
            format!("exposed-components app deep_link={deep} exported_service={service}")
        })?;

        let r = analyze_fixture(&corpus::sdk_signals_app().file_name())?;
        let cats: Vec<SdkCategory> = r.sdk_hits.iter().map(|h| h.signature.category).collect();
        check(
            cats == [
                SdkCategory::Analytics,
                SdkCategory::Advertising,
                SdkCategory::Attribution,
            ],
            || format!("SDK-signals app hits {cats:?}"),
        )?;
        Ok("5 example fixtures, exact field equality".into())
    })();
    verdict("AC2", "example-app regressions", result);
}

fn expected_level(v: &IndicatorVector, p: &RiskPolicy) -> (RiskLevel, Vec<&'static str>) {
    let strong = [
        v.cleartext_strong,
        v.tracking_present,
        v.backup_explicit && v.backup_enabled,
        v.exported_unprotected_count >= p.exported_strong_min,
    ]
    .iter()
    .filter(|b| **b)
    .count() as u32;
    let high: Vec<&str> = [
        (v.cleartext_strong && v.tracking_present, "R1"),
        (v.ad_attrib_vendor_count >= p.extensive_vendor_min, "R2"),
        (strong >= p.strong_cooccur_min, "R3"),
    ]
    .iter()
    .filter(|(on, _)| *on)
    .map(|(_, id)| *id)
    .collect();
    if !high.is_empty() {
        return (RiskLevel::High, high);
    }
    let medium: Vec<&str> = [
        (v.tracking_present, "M1"),
        (v.backup_enabled, "M2"),
        (v.cleartext_strong, "M3"),
        (v.sensitive_permission_count >= 1, "M4"),
        (v.exported_unprotected_count >= 1, "M5"),
    ]
    .iter()
    .filter(|(on, _)| *on)
    .map(|(_, id)| *id)
    .collect();
    if !medium.is_empty() {
        return (RiskLevel::Medium, medium);
    }
    (RiskLevel::Low, vec!["L0"])
}

fn all_vectors() -> Vec<IndicatorVector> {
    let mut out = Vec::new();
    for bits in 0u8..16 {
        for ad in 0..4 {
            for sens in 0..4 {
                for exp in 0..4 {
                    out.push(IndicatorVector {
                        cleartext_strong: bits & 1 != 0,
                        backup_enabled: bits & 2 != 0,
                        backup_explicit: bits & 4 != 0,
                        tracking_present: bits & 8 != 0,
                        ad_attrib_vendor_count: ad,
                        sensitive_permission_count: sens,
                        exported_unprotected_count: exp,
                    });
                }
            }
        }
    }
    out
}

fn increments(v: &IndicatorVector) -> Vec<IndicatorVector> {
    let mut out = Vec::new();
    let mut push = |cond: bool, f: &dyn Fn(&mut IndicatorVector)| {
        if cond {
            let mut w = *v;
            f(&mut w);
            out.push(w);
        }
    };
    push(!v.cleartext_strong, &|w| w.cleartext_strong = true);
    push(!v.backup_enabled, &|w| w.backup_enabled = true);
    push(!v.backup_explicit, &|w| w.backup_explicit = true);
    push(!v.tracking_present, &|w| w.tracking_present = true);
    push(v.ad_attrib_vendor_count < 3, &|w| {
        w.ad_attrib_vendor_count += 1
    });
    push(v.sensitive_permission_count < 3, &|w| {
        w.sensitive_permission_count += 1
    });
    push(v.exported_unprotected_count < 3, &|w| {
        w.exported_unprotected_count += 1
    });
    out
}

#[test]
fn ac3_rubric_brute_force() {
    let result = (|| {
        let policy = RiskPolicy::default();
        let start = Instant::now();
        let vectors = all_vectors();
        check(vectors.len() == 1024, || {
            format!("{} vectors", vectors.len())
        })?;
        let mut steps = 0usize;
        for v in &vectors {
            let a = assess(v, &policy);
            check(a == assess(v, &policy), || {
                format!("non-deterministic on {v:?}")
            })?;
            let (level, ids) = expected_level(v, &policy);
            let got: Vec<&str> = a.fired_rules.iter().map(|r| r.id.as_str()).collect();
            check(a.level == level && got == ids, || {
                format!("{v:?}: got {:?} {got:?}, want {level:?} {ids:?}", a.level)
            })?;
            for w in increments(v) {
                steps += 1;
                let up = assess(&w, &policy).level;
                check(up >= a.level, || {
                    format!("{v:?} -> {w:?} lowered {:?} to {up:?}", a.level)
                })?;
            }
        }
        let elapsed = start.elapsed();
        check(elapsed < Duration::from_secs(1), || {
            format!("took {elapsed:?}")
        })?;
        Ok(format!(
            "1024 vectors, {steps} increments, {:.1} ms",
            elapsed.as_secs_f64() * 1e3
        ))
    })();
    verdict("AC3", "rubric brute force", result);
}

fn axml_rows(root: &AxmlElement) -> (Vec<ElementRow>, BTreeSet<AttributeRow>) {
    let mut elements = Vec::new();
    let mut attributes = BTreeSet::new();
    let mut stack = vec![(root, None)];
    while let Some((e, parent)) = stack.pop() {
        let index = elements.len() as u64;
        elements.push((index, parent, e.namespace.clone(), e.name.clone()));
        for a in &e.attributes {
            let value = a.value.raw_data().map_or_else(
                || a.value.as_str().unwrap_or_default().to_string(),
                |d| d.to_string(),
            );
            attributes.insert((
                index,
                a.namespace.clone(),
                a.name.clone(),
                a.value.data_type(),
                value,
            ));
        }
        stack.extend(e.children.iter().rev().map(|c| (c, Some(index))));
    }
    (elements, attributes)
}

#[test]
fn ac4_axml_oracle_equivalence() {
    let result = (|| {
        let names: Vec<String> = oracle_axml().into_iter().map(|(n, _)| n).collect();
        check(names.len() >= 5, || {
            format!("only {} manifests", names.len())
        })?;
        for name in &names {
            let bytes = fs::read(fixtures_dir().join("axml").join(format!("{name}.axml")))
                .map_err(|e| e.to_string())?;
            let doc = decode_axml(&bytes).map_err(|e| format!("{name}: {e}"))?;
            let (elements, attributes) = axml_rows(&doc.root);
            let dump = reference::axml(name);
            check(elements == dump.elements, || {
                format!("{name}: element rows differ")
            })?;
            check(attributes == dump.attributes, || {
                let ours: Vec<_> = attributes.symmetric_difference(&dump.attributes).collect();
                format!("{name}: attribute sets differ: {ours:?}")
            })?;
        }
        Ok(format!("{} documents, exact set equality", names.len()))
    })();
    verdict("AC4", "AXML oracle equivalence", result);
}

#[test]
fn ac5_dex_oracle_equivalence() {
    let result = (|| {
        let names: Vec<String> = oracle_dex().into_iter().map(|(n, _)| n).collect();
        let mut supplementary = false;
        let mut nul = false;
        for name in &names {
            let bytes = fs::read(fixtures_dir().join("dex").join(format!("{name}.dex")))
                .map_err(|e| e.to_string())?;
            let table = scan_dex(&bytes).map_err(|e| format!("{name}: {e}"))?;
            let dump = reference::dex(name);
            check(table.strings == dump.strings, || {
                format!("{name}: string tables differ")
            })?;
            supplementary |= dump
                .strings
                .iter()
                .any(|s| s.chars().any(|c| c as u32 > 0xFFFF));
            nul |= dump.strings.iter().any(|s| s.contains('\0'));
        }
        check(names.len() >= 3 && supplementary && nul, || {
            format!(
                "coverage: files={} supplementary={supplementary} nul={nul}",
                names.len()
            )
        })?;
        Ok(format!(
            "{} files incl. supplementary-plane and embedded NUL, exact",
            names.len()
        ))
    })();
    verdict("AC5", "DEX oracle equivalence", result);
}

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8]) -> Vec<u8> {
    let mut d = seed.to_vec();
    let rounds = rng.gen_range(1..=4);
    for _ in 0..rounds {
        if d.is_empty() {
            d.push(rng.gen());
            continue;
        }
        let at = rng.gen_range(0..d.len());
        match rng.gen_range(0..7) {
            0 => d[at] ^= 1 << rng.gen_range(0..8),
            1 => d[at] = [0x00, 0xFF, 0x7F, 0x80, 0x01][rng.gen_range(0..5)],
            2 => {
                let word: u32 =
                    [0, u32::MAX, 0x7FFF_FFFF, 0x8000_0000, rng.gen()][rng.gen_range(0..5)];
                let at = at & !3;
                for (i, b) in word.to_le_bytes().iter().enumerate() {
                    if let Some(slot) = d.get_mut(at + i) {
                        *slot = *b;
                    }
                }
            }
            3 => d.truncate(at),
            4 => {
                let n = rng.gen_range(1..=8).min(d.len() - at);
                d.drain(at..at + n);
            }
            5 => {
                let junk: Vec<u8> = (0..rng.gen_range(1..=8)).map(|_| rng.gen()).collect();
                d.splice(at..at, junk);
            }
            _ => {
                let end = rng.gen_range(at..=d.len());
                let chunk = d[at..end].to_vec();
                d.splice(at..at, chunk);
            }
        }
    }
    d
}

#[derive(Clone, Copy)]
enum Target {
    Axml,
    Dex,
}

/// Outcome for one mutated input: `Err` describes a crash or undefined error.
fn decode_one(target: Target, data: &[u8]) -> Result<(), String> {
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| match target {
        Target::Axml => match decode_axml(data) {
            Ok(_)
            | Err(AxmlError::NotBinaryXml)
            | Err(AxmlError::MalformedChunk(_))
            | Err(AxmlError::DanglingStringIndex(_)) => Ok(()),
        },
        Target::Dex => match scan_dex(data) {
            Ok(_)
            | Err(DexError::NotADex)
            | Err(DexError::TruncatedDex(_))
            | Err(DexError::BadStringOffset { .. }) => Ok(()),
        },
    }));
    outcome.map_err(|_| "panic".to_string())?
}

#[test]
fn ac6_decoder_robustness() {
    const INPUTS: usize = 10_000;
    const HANG: Duration = Duration::from_secs(2);
    let result = (|| {
        let mut seeds: Vec<(Target, Vec<u8>)> = Vec::new();
        seeds.extend(oracle_axml().into_iter().map(|(_, b)| (Target::Axml, b)));
        seeds.extend(
            corpus::corpus()
                .iter()
                .take(5)
                .map(|a| (Target::Axml, a.manifest_bytes())),
        );
        seeds.extend(oracle_dex().into_iter().map(|(_, b)| (Target::Dex, b)));
        for app in corpus::corpus().iter().take(5) {
            seeds.extend(app.dex_files().into_iter().map(|(_, b)| (Target::Dex, b)));
        }

        let (tx, rx) = mpsc::channel();
        let worker = thread::spawn(move || {
            let default_hook = panic::take_hook();
            panic::set_hook(Box::new(|_| {}));
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ac06);
            for i in 0..INPUTS {
                let (target, seed) = &seeds[i % seeds.len()];
                let data = mutate(&mut rng, seed);
                let outcome = decode_one(*target, &data);
                if tx.send((i, outcome)).is_err() {
                    break;
                }
            }
            panic::set_hook(default_hook);
        });

        let mut crashes = Vec::new();
        let mut slowest = Duration::ZERO;
        let mut last = Instant::now();
        for expected in 0..INPUTS {
            match rx.recv_timeout(HANG) {
                Ok((i, outcome)) => {
                    slowest = slowest.max(last.elapsed());
                    last = Instant::now();
                    if let Err(e) = outcome {
                        crashes.push(format!("input {i}: {e}"));
                    }
                }
                Err(_) => return Err(format!("input {expected} exceeded {HANG:?}")),
            }
        }
        worker.join().map_err(|_| "fuzz worker died".to_string())?;
        check(crashes.is_empty(), || {
            format!("{} crashes, first: {}", crashes.len(), crashes[0])
        })?;
        Ok(format!(
            "{INPUTS} mutated inputs, 0 crashes, slowest {:.1} ms",
            slowest.as_secs_f64() * 1e3
        ))
    })();
    verdict("AC6", "decoder robustness", result);
}

fn dir_snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        let bytes = fs::read(e.path()).map_err(|e| e.to_string())?;
        out.push((e.file_name().to_string_lossy().into_owned(), bytes));
    }
    out.sort();
    Ok(out)
}

#[test]
fn ac7_parallel_determinism() {
    let result = (|| {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut snaps = Vec::new();
        let mut streams = Vec::new();
        for jobs in ["1", "8"] {
            let out = tmp.path().join(format!("jobs{jobs}"));
            let r = run(bin()
                .args(["analyze", "--jobs", jobs, "--out"])
                .arg(&out)
                .arg(corpus_dir()));
            check(r.status.success(), || {
                format!("--jobs {jobs} exit {:?}", r.status.code())
            })?;
            snaps.push(dir_snapshot(&out)?);
            let r = run(bin().args(["analyze", "--jobs", jobs]).arg(corpus_dir()));
            streams.push(r.stdout);
        }
        check(snaps[0].len() == 21, || {
            format!("{} report files", snaps[0].len())
        })?;
        check(snaps[0] == snaps[1], || "report directories differ".into())?;
        check(streams[0] == streams[1], || "stdout streams differ".into())?;
        Ok("21 reports byte-identical at --jobs 1 and --jobs 8".into())
    })();
    verdict("AC7", "parallel determinism", result);
}
