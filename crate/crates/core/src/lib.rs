//! Static privacy-exposure analysis for Android APKs: archive reading, binary
//! XML and DEX decoding, manifest indicator extraction, SDK fingerprinting,
//! rule-based risk labeling and cohort reporting.

pub mod axml;
pub mod container;
pub mod dexscan;
pub mod fingerprints;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod risk;

pub use axml::{decode_axml, AxmlDocument, AxmlElement, AxmlError, TypedValue};
pub use container::{open_archive, ApkArchive, ContainerError};
pub use dexscan::{scan_dex, DexError, DexStringTable};
pub use fingerprints::{
    load_signatures, match_signatures, FingerprintError, SdkHit, SdkSignature, SignatureDb,
};
pub use manifest::{extract_facts, ManifestError, ManifestFacts};
pub use pipeline::{AnalysisError, Analyzer};
pub use report::{
    aggregate, render, AppError, AppReport, CohortLabeling, CohortReport, OutputFormat, ReportError,
};
pub use risk::{assess, IndicatorVector, RiskAssessment, RiskLevel, RiskPolicy};
