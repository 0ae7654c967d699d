//! Third-party SDK fingerprinting against manifest declarations and DEX
//! class names.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::ManifestFacts;

const BUNDLED_DB: &str = include_str!("../data/signatures.tsv");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("signature file line {line}: {reason}")]
    MalformedSignatureFile { line: usize, reason: String },
    #[error("signature file line {line}: duplicate of line {first_line}")]
    DuplicateSignature { line: usize, first_line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdkCategory {
    Analytics,
    Advertising,
    Attribution,
}

impl SdkCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            SdkCategory::Analytics => "analytics",
            SdkCategory::Advertising => "advertising",
            SdkCategory::Attribution => "attribution",
        }
    }
}

impl fmt::Display for SdkCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SdkCategory {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "analytics" => Ok(SdkCategory::Analytics),
            "advertising" => Ok(SdkCategory::Advertising),
            "attribution" => Ok(SdkCategory::Attribution),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchKind {
    PackagePrefix,
    MetadataKey,
    ComponentClass,
    PermissionName,
}

impl MatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchKind::PackagePrefix => "package-prefix",
            MatchKind::MetadataKey => "metadata-key",
            MatchKind::ComponentClass => "component-class",
            MatchKind::PermissionName => "permission-name",
        }
    }
}

impl fmt::Display for MatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatchKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "package-prefix" => Ok(MatchKind::PackagePrefix),
            "metadata-key" => Ok(MatchKind::MetadataKey),
            "component-class" => Ok(MatchKind::ComponentClass),
            "permission-name" => Ok(MatchKind::PermissionName),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SdkSignature {
    pub vendor: String,
    pub category: SdkCategory,
    pub match_kind: MatchKind,
    pub pattern: String,
}

/// Dotted prefix match that stops at package boundaries.
pub fn package_prefix_matches(pattern: &str, name: &str) -> bool {
    name.strip_prefix(pattern)
        .is_some_and(|rest| rest.is_empty() || rest.starts_with('.'))
}

impl SdkSignature {
    /// Whether `candidate` matches this signature's pattern under its kind.
    pub fn matches(&self, candidate: &str) -> bool {
        match self.match_kind {
            MatchKind::PackagePrefix => package_prefix_matches(&self.pattern, candidate),
            _ => self.pattern == candidate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceSource {
    ManifestMetadata,
    ManifestComponent,
    ManifestPermission,
    DexString,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub source: EvidenceSource,
    pub matched: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dex_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdkHit {
    pub signature: SdkSignature,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignatureDb {
    /// From a `# version: X` comment, if present.
    pub version: Option<String>,
    pub signatures: Vec<SdkSignature>,
}

impl SignatureDb {
    pub fn bundled() -> &'static SignatureDb {
        static DB: OnceLock<SignatureDb> = OnceLock::new();
        DB.get_or_init(|| {
            load_signatures(BUNDLED_DB.as_bytes()).expect("bundled signature DB is valid")
        })
    }

    pub fn version_label(&self) -> &str {
        self.version.as_deref().unwrap_or("unversioned")
    }
}

/// Parses the tab-separated signature format.
pub fn load_signatures(db: &[u8]) -> Result<SignatureDb, FingerprintError> {
    let text = std::str::from_utf8(db).map_err(|e| {
        let line = 1 + db[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        FingerprintError::MalformedSignatureFile {
            line,
            reason: "not valid UTF-8".into(),
        }
    })?;
    let mut out = SignatureDb::default();
    let mut seen: BTreeMap<(String, SdkCategory, MatchKind, String), usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("version:") {
                out.version = Some(v.trim().to_string());
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let malformed = |reason: String| FingerprintError::MalformedSignatureFile { line, reason };
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        let [vendor, category, kind, pattern] = fields[..] else {
            return Err(malformed(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            )));
        };
        if vendor.is_empty() {
            return Err(malformed("empty vendor".into()));
        }
        let category: SdkCategory = category
            .parse()
            .map_err(|_| malformed(format!("unknown category {category:?}")))?;
        let match_kind: MatchKind = kind
            .parse()
            .map_err(|_| malformed(format!("unknown match kind {kind:?}")))?;
        if pattern.is_empty() || pattern.chars().any(char::is_whitespace) {
            return Err(malformed(
                "pattern must be non-empty and contain no whitespace".into(),
            ));
        }
        if match_kind == MatchKind::PackagePrefix
            && (pattern.starts_with('.') || pattern.ends_with('.'))
        {
            return Err(malformed(format!(
                "package prefix {pattern:?} has a leading or trailing dot"
            )));
        }
        let key = (
            vendor.to_string(),
            category,
            match_kind,
            pattern.to_string(),
        );
        if let Some(&first_line) = seen.get(&key) {
            return Err(FingerprintError::DuplicateSignature { line, first_line });
        }
        seen.insert(key, line);
        out.signatures.push(SdkSignature {
            vendor: vendor.to_string(),
            category,
            match_kind,
            pattern: pattern.to_string(),
        });
    }
    Ok(out)
}

/// Dotted class name to the first `classes*.dex` entry that references it.
pub type DexClassIndex = BTreeMap<String, String>;

fn dex_prefix_hits<'a>(
    pattern: &'a str,
    classes: &'a DexClassIndex,
) -> impl Iterator<Item = (&'a String, &'a String)> + 'a {
    classes
        .range::<str, _>((
            std::ops::Bound::Included(pattern),
            std::ops::Bound::Unbounded,
        ))
        .take_while(move |(c, _)| c.starts_with(pattern))
        .filter(move |(c, _)| package_prefix_matches(pattern, c))
}

fn first_evidence(
    sig: &SdkSignature,
    facts: &ManifestFacts,
    classes: &DexClassIndex,
) -> Option<Evidence> {
    let manifest = |source: EvidenceSource, matched: &str| Evidence {
        source,
        matched: matched.to_string(),
        dex_file: None,
    };
    match sig.match_kind {
        MatchKind::MetadataKey => facts
            .metadata_keys
            .iter()
            .find(|m| sig.matches(&m.name))
            .map(|m| manifest(EvidenceSource::ManifestMetadata, &m.name)),
        MatchKind::ComponentClass => facts
            .components
            .iter()
            .find(|c| sig.matches(&c.name))
            .map(|c| manifest(EvidenceSource::ManifestComponent, &c.name)),
        MatchKind::PermissionName => facts
            .permissions
            .iter()
            .find(|p| sig.matches(&p.name))
            .map(|p| manifest(EvidenceSource::ManifestPermission, &p.name)),
        MatchKind::PackagePrefix => facts
            .components
            .iter()
            .find(|c| sig.matches(&c.name))
            .map(|c| manifest(EvidenceSource::ManifestComponent, &c.name))
            .or_else(|| {
                dex_prefix_hits(&sig.pattern, classes)
                    .next()
                    .map(|(class, dex)| Evidence {
                        source: EvidenceSource::DexString,
                        matched: class.clone(),
                        dex_file: Some(dex.clone()),
                    })
            }),
    }
}

/// Matches every signature, keeping the first hit per (vendor, category) in
/// database order.
pub fn match_signatures(
    facts: &ManifestFacts,
    classes: &DexClassIndex,
    sigs: &[SdkSignature],
) -> Vec<SdkHit> {
    let mut seen: HashSet<(&str, SdkCategory)> = HashSet::new();
    let mut hits = Vec::new();
    for sig in sigs {
        if seen.contains(&(sig.vendor.as_str(), sig.category)) {
            continue;
        }
        if let Some(evidence) = first_evidence(sig, facts, classes) {
            seen.insert((sig.vendor.as_str(), sig.category));
            hits.push(SdkHit {
                signature: sig.clone(),
                evidence,
            });
        }
    }
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FingerprintCoverage {
    /// At least one DEX class matched a known SDK root.
    Dex,
    /// No DEX class matched; detection rests on manifest declarations.
    ManifestOnly,
}

pub fn dex_coverage(classes: &DexClassIndex, sigs: &[SdkSignature]) -> FingerprintCoverage {
    let any = sigs
        .iter()
        .filter(|s| s.match_kind == MatchKind::PackagePrefix)
        .any(|s| dex_prefix_hits(&s.pattern, classes).next().is_some());
    if any {
        FingerprintCoverage::Dex
    } else {
        FingerprintCoverage::ManifestOnly
    }
}

/// Distinct vendors with at least one hit in `category`.
pub fn vendors_in(hits: &[SdkHit], categories: &[SdkCategory]) -> usize {
    hits.iter()
        .filter(|h| categories.contains(&h.signature.category))
        .map(|h| h.signature.vendor.as_str())
        .collect::<HashSet<_>>()
        .len()
}
