//! Rule-based qualitative risk labeling with a fired-rule trace.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprints::{vendors_in, SdkCategory, SdkHit};
use crate::manifest::{
    AllowBackup, CleartextTraffic, ManifestFacts, NscCleartext, PermissionClass,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskLevel {
    Low,
    Medium,
    High,
}

impl RiskLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskLevel::Low => "low",
            RiskLevel::Medium => "medium",
            RiskLevel::High => "high",
        }
    }
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct IndicatorVector {
    pub cleartext_strong: bool,
    pub backup_enabled: bool,
    pub backup_explicit: bool,
    pub tracking_present: bool,
    pub ad_attrib_vendor_count: u32,
    pub sensitive_permission_count: u32,
    pub exported_unprotected_count: u32,
}

impl IndicatorVector {
    /// Named boolean view used for prevalence tables.
    pub fn flags(&self) -> [(&'static str, bool); 7] {
        [
            ("cleartext_strong", self.cleartext_strong),
            ("backup_enabled", self.backup_enabled),
            (
                "backup_explicit_enabled",
                self.backup_explicit && self.backup_enabled,
            ),
            ("tracking_present", self.tracking_present),
            ("ad_attrib_vendors_ge_1", self.ad_attrib_vendor_count >= 1),
            ("sensitive_permission", self.sensitive_permission_count >= 1),
            ("exported_unprotected", self.exported_unprotected_count >= 1),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskPolicy {
    pub extensive_vendor_min: u32,
    pub strong_cooccur_min: u32,
    pub exported_strong_min: u32,
}

impl Default for RiskPolicy {
    fn default() -> Self {
        RiskPolicy {
            extensive_vendor_min: 2,
            strong_cooccur_min: 3,
            exported_strong_min: 2,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("policy line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

impl RiskPolicy {
    /// Parses `key=value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let mut p = RiskPolicy::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let malformed = |reason: String| PolicyError::Malformed { line, reason };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| malformed("expected key=value".into()))?;
            let value: u32 = value.trim().parse().map_err(|_| {
                malformed(format!("{:?} is not a non-negative integer", value.trim()))
            })?;
            match key.trim() {
                "extensive_vendor_min" => p.extensive_vendor_min = value,
                "strong_cooccur_min" => p.strong_cooccur_min = value,
                "exported_strong_min" => p.exported_strong_min = value,
                other => return Err(malformed(format!("unknown key {other:?}"))),
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiredRule {
    pub id: String,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub level: RiskLevel,
    pub fired_rules: Vec<FiredRule>,
}

fn rule(id: &str, justification: String) -> FiredRule {
    FiredRule {
        id: id.to_string(),
        justification,
    }
}

/// Labels a vector. Only the winning tier's rules are reported.
pub fn assess(v: &IndicatorVector, policy: &RiskPolicy) -> RiskAssessment {
    let mut high = Vec::new();
    if v.cleartext_strong && v.tracking_present {
        high.push(rule(
            "R1",
            "cleartext traffic permitted alongside tracking or analytics SDKs".into(),
        ));
    }
    if v.ad_attrib_vendor_count >= policy.extensive_vendor_min {
        high.push(rule(
            "R2",
            format!(
                "{} advertising/attribution vendors (threshold {})",
                v.ad_attrib_vendor_count, policy.extensive_vendor_min
            ),
        ));
    }
    let strong: Vec<&str> = [
        (v.cleartext_strong, "cleartext"),
        (v.tracking_present, "tracking"),
        (v.backup_explicit && v.backup_enabled, "explicit backup"),
        (
            v.exported_unprotected_count >= policy.exported_strong_min,
            "exported components",
        ),
    ]
    .iter()
    .filter(|(on, _)| *on)
    .map(|(_, name)| *name)
    .collect();
    if strong.len() as u32 >= policy.strong_cooccur_min {
        high.push(rule(
            "R3",
            format!(
                "{} strong indicators co-occur: {}",
                strong.len(),
                strong.join(", ")
            ),
        ));
    }
    if !high.is_empty() {
        return RiskAssessment {
            level: RiskLevel::High,
            fired_rules: high,
        };
    }

    let mut medium = Vec::new();
    if v.tracking_present {
        medium.push(rule("M1", "tracking or analytics signals present".into()));
    }
    if v.backup_enabled {
        let how = if v.backup_explicit {
            "explicitly"
        } else {
            "by platform default"
        };
        medium.push(rule("M2", format!("backup enabled {how}")));
    }
    if v.cleartext_strong {
        medium.push(rule("M3", "cleartext traffic permitted".into()));
    }
    if v.sensitive_permission_count >= 1 {
        medium.push(rule(
            "M4",
            format!(
                "{} sensitive permission(s) requested",
                v.sensitive_permission_count
            ),
        ));
    }
    if v.exported_unprotected_count >= 1 {
        medium.push(rule(
            "M5",
            format!(
                "{} exported component(s) without permission protection",
                v.exported_unprotected_count
            ),
        ));
    }
    if !medium.is_empty() {
        return RiskAssessment {
            level: RiskLevel::Medium,
            fired_rules: medium,
        };
    }
    RiskAssessment {
        level: RiskLevel::Low,
        fired_rules: vec![rule("L0", "no indicators".into())],
    }
}

/// Builds the indicator vector for one app, plus caveats about indicators
/// that could not be established with certainty.
pub fn derive_vector(facts: &ManifestFacts, hits: &[SdkHit]) -> (IndicatorVector, Vec<String>) {
    let mut caveats = Vec::new();
    let nsc_true = facts.nsc_permits_cleartext == Some(NscCleartext::True);
    if facts.nsc_permits_cleartext == Some(NscCleartext::Unresolved) {
        caveats
            .push("network security config could not be resolved; not counted as cleartext".into());
    }
    if facts.allow_backup == AllowBackup::DefaultUnset {
        caveats.push("allowBackup absent; backup enabled by platform default".into());
    }
    if facts.cleartext_permitted_by_default() {
        caveats.push("usesCleartextTraffic absent and target SDK below 28; platform default permits cleartext".into());
    }
    let count = |n: usize| u32::try_from(n).unwrap_or(u32::MAX);
    let v = IndicatorVector {
        cleartext_strong: facts.cleartext_traffic == CleartextTraffic::ExplicitTrue || nsc_true,
        backup_enabled: facts.allow_backup != AllowBackup::False,
        backup_explicit: facts.allow_backup != AllowBackup::DefaultUnset,
        tracking_present: !hits.is_empty()
            || facts.count_permissions(PermissionClass::TrackingRelevant) > 0,
        ad_attrib_vendor_count: count(vendors_in(
            hits,
            &[SdkCategory::Advertising, SdkCategory::Attribution],
        )),
        sensitive_permission_count: count(facts.count_permissions(PermissionClass::Sensitive)),
        exported_unprotected_count: count(facts.exported_unprotected_count()),
    };
    (v, caveats)
}
