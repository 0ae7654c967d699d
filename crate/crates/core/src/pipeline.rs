//! End-to-end analysis of one APK and of batches.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::axml::{decode_axml, AxmlError};
use crate::container::{ApkArchive, ContainerError};
use crate::dexscan::{classes_dex_order, collect_class_prefixes, is_classes_dex, scan_dex};
use crate::fingerprints::{dex_coverage, match_signatures, DexClassIndex, SignatureDb};
use crate::manifest::{extract_facts, ManifestError};
use crate::report::{AppReport, ANALYZER_VERSION};
use crate::risk::{assess, derive_vector, RiskPolicy};

pub const MANIFEST_ENTRY: &str = "AndroidManifest.xml";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("archive has no {MANIFEST_ENTRY}")]
    MissingManifest,
    #[error("{MANIFEST_ENTRY}: {0}")]
    Axml(#[from] AxmlError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

#[derive(Debug, Clone)]
pub struct Analyzer {
    pub db: SignatureDb,
    pub policy: RiskPolicy,
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer {
            db: SignatureDb::bundled().clone(),
            policy: RiskPolicy::default(),
        }
    }
}

/// Class index over every `classes*.dex`, in multidex order. Unreadable DEX
/// files become warnings.
pub fn index_dex_classes(archive: &ApkArchive, warnings: &mut Vec<String>) -> DexClassIndex {
    let mut names: Vec<&str> = archive
        .entries()
        .iter()
        .map(|e| e.name.as_str())
        .filter(|n| is_classes_dex(n))
        .collect();
    names.sort_by_key(|n| classes_dex_order(n));
    let mut index = DexClassIndex::new();
    for name in names {
        let table = match archive.read_entry(name).map(|b| scan_dex(&b)) {
            Ok(Ok(t)) => t,
            Ok(Err(e)) => {
                warnings.push(format!("{name}: {e}"));
                continue;
            }
            Err(e) => {
                warnings.push(format!("{name}: {e}"));
                continue;
            }
        };
        warnings.extend(table.warnings.iter().map(|w| format!("{name}: {w}")));
        for class in collect_class_prefixes(&table) {
            index.entry(class).or_insert_with(|| name.to_string());
        }
    }
    index
}

impl Analyzer {
    pub fn new(db: SignatureDb, policy: RiskPolicy) -> Self {
        Analyzer { db, policy }
    }

    /// Analyzes an opened archive. `app_id` defaults to the package.
    pub fn analyze_archive(&self, archive: &ApkArchive) -> Result<AppReport, AnalysisError> {
        if !archive.contains(MANIFEST_ENTRY) {
            return Err(AnalysisError::MissingManifest);
        }
        let doc = decode_axml(&archive.read_entry(MANIFEST_ENTRY)?)?;
        let mut facts = extract_facts(&doc, Some(archive))?;
        let mut warnings: Vec<String> = doc
            .warnings
            .iter()
            .map(|w| format!("{MANIFEST_ENTRY}: {w}"))
            .collect();
        warnings.append(&mut facts.warnings);

        let classes = index_dex_classes(archive, &mut warnings);
        let hits = match_signatures(&facts, &classes, &self.db.signatures);
        let coverage = dex_coverage(&classes, &self.db.signatures);
        let (vector, caveats) = derive_vector(&facts, &hits);
        let risk = assess(&vector, &self.policy);

        let source = archive
            .source_path()
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(AppReport {
            app_id: facts.package_id.clone(),
            package: facts.package_id.clone(),
            source,
            facts,
            sdk_hits: hits,
            fingerprint_coverage: coverage,
            indicator_vector: vector,
            risk,
            caveats,
            warnings,
            analyzer_version: ANALYZER_VERSION.to_string(),
            signature_db_version: self.db.version_label().to_string(),
        })
    }

    pub fn analyze_path(&self, path: &Path) -> Result<AppReport, AnalysisError> {
        self.analyze_archive(&ApkArchive::open(path)?)
    }

    /// Analyzes every path on a pool of `jobs` threads. Results keep input
    /// order and receive final app ids (see [`assign_app_ids`]).
    pub fn analyze_batch(
        &self,
        paths: &[PathBuf],
        jobs: usize,
        anonymize: bool,
    ) -> Vec<Result<AppReport, AnalysisError>> {
        let run = || {
            paths
                .par_iter()
                .map(|p| self.analyze_path(p))
                .collect::<Vec<_>>()
        };
        let mut results = match rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
        {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}); running sequentially");
                paths.iter().map(|p| self.analyze_path(p)).collect()
            }
        };
        assign_app_ids(&mut results, anonymize);
        results
    }
}

/// Gives each successful report a unique id: the package, suffixed `-2`,
/// `-3`, ... on repeats, or `App<n>` by input position when anonymizing.
pub fn assign_app_ids(results: &mut [Result<AppReport, AnalysisError>], anonymize: bool) {
    let mut used: HashMap<String, u32> = HashMap::new();
    for (i, r) in results.iter_mut().enumerate() {
        let Ok(report) = r else { continue };
        if anonymize {
            report.app_id = format!("App{}", i + 1);
            continue;
        }
        let base = if report.package.is_empty() {
            report
                .source
                .strip_suffix(".apk")
                .unwrap_or(&report.source)
                .to_string()
        } else {
            report.package.clone()
        };
        let mut id = base.clone();
        let mut n = 1;
        while used.contains_key(&id) {
            n += 1;
            id = format!("{base}-{n}");
        }
        used.insert(id.clone(), n);
        report.app_id = id;
    }
}
