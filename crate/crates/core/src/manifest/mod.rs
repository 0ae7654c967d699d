//! Indicator extraction from a decoded `AndroidManifest.xml`: permission
//! footprint, backup and network configuration, and component exposure.

mod nsc;
mod permissions;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axml::{AxmlDocument, AxmlElement, TypedValue};
use crate::container::ApkArchive;

pub use nsc::{candidate_paths as nsc_candidate_paths, config_permits_cleartext, NscCleartext};
pub use permissions::{
    classify_permission, PermissionClass, PermissionTable, PermissionTableError,
};

pub const ACTION_MAIN: &str = "android.intent.action.MAIN";
pub const ACTION_VIEW: &str = "android.intent.action.VIEW";
pub const CATEGORY_LAUNCHER: &str = "android.intent.category.LAUNCHER";
pub const CATEGORY_BROWSABLE: &str = "android.intent.category.BROWSABLE";
pub const ACTION_INSTALL_REFERRER: &str = "com.android.vending.INSTALL_REFERRER";

/// First SDK level where an intent filter without `android:exported` is an
/// install-time error.
const EXPLICIT_EXPORT_REQUIRED_SDK: i32 = 31;
/// First SDK level where cleartext defaults to not permitted.
const CLEARTEXT_DEFAULT_OFF_SDK: i32 = 28;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ManifestError {
    #[error("root element is <{0}>, not <manifest>")]
    NotAManifest(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermissionRecord {
    pub name: String,
    pub classification: PermissionClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Activity,
    Service,
    Receiver,
    Provider,
}

impl ComponentKind {
    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "activity" | "activity-alias" => Some(ComponentKind::Activity),
            "service" => Some(ComponentKind::Service),
            "receiver" => Some(ComponentKind::Receiver),
            "provider" => Some(ComponentKind::Provider),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportedSource {
    Explicit,
    ImpliedByIntentFilter,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub kind: ComponentKind,
    pub name: String,
    pub exported_effective: bool,
    pub exported_source: ExportedSource,
    pub has_intent_filter: bool,
    pub protected_by_permission: bool,
    pub deep_link: bool,
    pub install_referrer: bool,
    /// Carries a MAIN + LAUNCHER filter.
    pub launcher: bool,
    /// Distinct intent-filter actions, sorted.
    pub filter_actions: Vec<String>,
}

impl ComponentRecord {
    pub fn exposed_unprotected(&self) -> bool {
        self.exported_effective && !self.protected_by_permission && !self.launcher
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllowBackup {
    True,
    False,
    DefaultUnset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CleartextTraffic {
    ExplicitTrue,
    ExplicitFalse,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataEntry {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFacts {
    pub package_id: String,
    pub min_sdk: Option<i32>,
    /// `targetSdkVersion`, falling back to `minSdkVersion` as the platform does.
    pub target_sdk: Option<i32>,
    pub permissions: Vec<PermissionRecord>,
    pub allow_backup: AllowBackup,
    pub backup_agent_declared: bool,
    pub restore_any_version: bool,
    pub full_backup_content_declared: bool,
    pub data_extraction_rules_declared: bool,
    pub cleartext_traffic: CleartextTraffic,
    pub nsc_reference: bool,
    /// `None` when no config is referenced.
    pub nsc_permits_cleartext: Option<NscCleartext>,
    pub components: Vec<ComponentRecord>,
    pub metadata_keys: Vec<MetadataEntry>,
    pub warnings: Vec<String>,
}

impl ManifestFacts {
    pub fn exported_non_launcher_count(&self) -> usize {
        self.components
            .iter()
            .filter(|c| c.exported_effective && !c.launcher)
            .count()
    }

    pub fn exported_unprotected_count(&self) -> usize {
        self.components
            .iter()
            .filter(|c| c.exposed_unprotected())
            .count()
    }

    pub fn count_permissions(&self, class: PermissionClass) -> usize {
        self.permissions
            .iter()
            .filter(|p| p.classification == class)
            .count()
    }

    /// Cleartext permitted only because the attribute is absent and the
    /// target SDK predates the secure default.
    pub fn cleartext_permitted_by_default(&self) -> bool {
        self.cleartext_traffic == CleartextTraffic::Default
            && self
                .target_sdk
                .is_none_or(|t| t < CLEARTEXT_DEFAULT_OFF_SDK)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportResolution {
    pub exported: bool,
    pub source: ExportedSource,
    /// The component would be rejected at install time (intent filter with
    /// no explicit `exported` on target SDK 31+).
    pub lint: bool,
}

/// Effective export state of a component.
pub fn resolve_exported(
    explicit: Option<bool>,
    has_intent_filter: bool,
    target_sdk: Option<i32>,
) -> ExportResolution {
    if let Some(exported) = explicit {
        return ExportResolution {
            exported,
            source: ExportedSource::Explicit,
            lint: false,
        };
    }
    let modern = target_sdk.is_some_and(|t| t >= EXPLICIT_EXPORT_REQUIRED_SDK);
    match (has_intent_filter, modern) {
        (true, false) => ExportResolution {
            exported: true,
            source: ExportedSource::ImpliedByIntentFilter,
            lint: false,
        },
        (true, true) => ExportResolution {
            exported: false,
            source: ExportedSource::Default,
            lint: true,
        },
        (false, _) => ExportResolution {
            exported: false,
            source: ExportedSource::Default,
            lint: false,
        },
    }
}

fn qualify_class(package: &str, name: &str) -> String {
    if let Some(rest) = name.strip_prefix('.') {
        format!("{package}.{rest}")
    } else if !name.contains('.') && !package.is_empty() {
        format!("{package}.{name}")
    } else {
        name.to_string()
    }
}

fn sdk_level(e: &AxmlElement, attr: &str, warnings: &mut Vec<String>) -> Option<i32> {
    let v = e.android_attr(attr)?;
    match v.as_int().and_then(|n| i32::try_from(n).ok()) {
        Some(n) => Some(n),
        None => {
            warnings.push(format!("uses-sdk {attr}={v} is not a numeric level"));
            None
        }
    }
}

fn android_names<'a>(e: &'a AxmlElement, tag: &'a str) -> impl Iterator<Item = &'a str> + 'a {
    e.children_named(tag).filter_map(|c| c.android_str("name"))
}

fn component_record(
    e: &AxmlElement,
    kind: ComponentKind,
    package: &str,
    target_sdk: Option<i32>,
    warnings: &mut Vec<String>,
) -> ComponentRecord {
    let name = qualify_class(package, e.android_str("name").unwrap_or_default());
    let filters: Vec<&AxmlElement> = e.children_named("intent-filter").collect();
    let has_intent_filter = !filters.is_empty();

    let explicit = match e.android_attr("exported") {
        None => None,
        Some(v) => match v.as_bool() {
            Some(b) => Some(b),
            None => {
                warnings.push(format!(
                    "{name}: android:exported={v} is not a boolean; treated as absent"
                ));
                None
            }
        },
    };
    let resolution = resolve_exported(explicit, has_intent_filter, target_sdk);
    if resolution.lint {
        warnings.push(format!(
            "{name}: intent filter without android:exported is invalid for target SDK {}+; recorded as not exported",
            EXPLICIT_EXPORT_REQUIRED_SDK
        ));
    }

    let non_empty = |attr: &str| e.android_str(attr).is_some_and(|s| !s.is_empty());
    let protected_by_permission = non_empty("permission")
        || (kind == ComponentKind::Provider
            && non_empty("readPermission")
            && non_empty("writePermission"));

    let mut deep_link = false;
    let mut launcher = false;
    let mut actions: Vec<String> = Vec::new();
    for f in &filters {
        let f_actions: Vec<&str> = android_names(f, "action").collect();
        let f_categories: Vec<&str> = android_names(f, "category").collect();
        let has_scheme = f
            .children_named("data")
            .any(|d| d.android_attr("scheme").is_some());
        if f_actions.contains(&ACTION_VIEW)
            && f_categories.contains(&CATEGORY_BROWSABLE)
            && has_scheme
        {
            deep_link = true;
        }
        if f_actions.contains(&ACTION_MAIN) && f_categories.contains(&CATEGORY_LAUNCHER) {
            launcher = true;
        }
        actions.extend(f_actions.iter().map(|s| s.to_string()));
    }
    actions.sort();
    actions.dedup();

    ComponentRecord {
        kind,
        install_referrer: actions.iter().any(|a| a == ACTION_INSTALL_REFERRER),
        name,
        exported_effective: resolution.exported,
        exported_source: resolution.source,
        has_intent_filter,
        protected_by_permission,
        deep_link,
        launcher,
        filter_actions: actions,
    }
}

/// Extracts every manifest indicator. `archive`, when given, is probed for a
/// referenced network security config.
pub fn extract_facts(
    doc: &AxmlDocument,
    archive: Option<&ApkArchive>,
) -> Result<ManifestFacts, ManifestError> {
    extract_facts_with(doc, archive, PermissionTable::bundled())
}

pub fn extract_facts_with(
    doc: &AxmlDocument,
    archive: Option<&ApkArchive>,
    table: &PermissionTable,
) -> Result<ManifestFacts, ManifestError> {
    let manifest = &doc.root;
    if manifest.name != "manifest" {
        return Err(ManifestError::NotAManifest(manifest.name.clone()));
    }
    let mut warnings = Vec::new();
    let package_id = manifest
        .attr(None, "package")
        .map(ToString::to_string)
        .unwrap_or_default();
    if package_id.is_empty() {
        warnings.push("manifest has no package attribute".into());
    }

    let uses_sdk = manifest.children_named("uses-sdk").next();
    let min_sdk = uses_sdk.and_then(|e| sdk_level(e, "minSdkVersion", &mut warnings));
    let target_sdk = uses_sdk
        .and_then(|e| sdk_level(e, "targetSdkVersion", &mut warnings))
        .or(min_sdk);

    let mut permissions: Vec<PermissionRecord> = Vec::new();
    for tag in [
        "uses-permission",
        "uses-permission-sdk-23",
        "uses-permission-sdk-m",
    ] {
        for name in android_names(manifest, tag) {
            if !permissions.iter().any(|p| p.name == name) {
                permissions.push(PermissionRecord {
                    name: name.to_string(),
                    classification: table.classify(name),
                });
            }
        }
    }

    let application = manifest.children_named("application").next();
    let app_attr = |name: &str| application.and_then(|a| a.android_attr(name));

    let allow_backup = match app_attr("allowBackup") {
        None => AllowBackup::DefaultUnset,
        Some(TypedValue::Boolean(true)) => AllowBackup::True,
        Some(TypedValue::Boolean(false)) => AllowBackup::False,
        Some(other) => {
            warnings.push(format!(
                "android:allowBackup={other} is not a boolean; treated as unset"
            ));
            AllowBackup::DefaultUnset
        }
    };
    let cleartext_traffic = match app_attr("usesCleartextTraffic") {
        None => CleartextTraffic::Default,
        Some(TypedValue::Boolean(true)) => CleartextTraffic::ExplicitTrue,
        Some(TypedValue::Boolean(false)) => CleartextTraffic::ExplicitFalse,
        Some(other) => {
            warnings.push(format!(
                "android:usesCleartextTraffic={other} is not a boolean; treated as default"
            ));
            CleartextTraffic::Default
        }
    };

    let nsc_ref = app_attr("networkSecurityConfig")
        .or_else(|| manifest.android_attr("networkSecurityConfig"));
    let nsc_permits_cleartext = nsc_ref.map(|r| match archive {
        Some(archive) => nsc::resolve(archive, r, &mut warnings),
        None => NscCleartext::Unresolved,
    });
    if nsc_permits_cleartext == Some(NscCleartext::Unresolved) {
        warnings.push(
            "network security config referenced but not located; cleartext status unresolved"
                .into(),
        );
    }

    let mut components = Vec::new();
    let mut metadata_keys = Vec::new();
    if let Some(app) = application {
        for child in &app.children {
            if let Some(kind) = ComponentKind::from_tag(&child.name) {
                components.push(component_record(
                    child,
                    kind,
                    &package_id,
                    target_sdk,
                    &mut warnings,
                ));
            }
        }
        for e in app.descendants() {
            if e.name == "meta-data" {
                if let Some(name) = e.android_str("name") {
                    let value = e
                        .android_attr("value")
                        .or_else(|| e.android_attr("resource"))
                        .map(ToString::to_string)
                        .unwrap_or_default();
                    metadata_keys.push(MetadataEntry {
                        name: name.to_string(),
                        value,
                    });
                }
            }
        }
    }

    Ok(ManifestFacts {
        package_id,
        min_sdk,
        target_sdk,
        permissions,
        allow_backup,
        backup_agent_declared: app_attr("backupAgent").is_some(),
        restore_any_version: app_attr("restoreAnyVersion").and_then(TypedValue::as_bool)
            == Some(true),
        full_backup_content_declared: app_attr("fullBackupContent")
            .is_some_and(|v| v.as_bool() != Some(false)),
        data_extraction_rules_declared: app_attr("dataExtractionRules").is_some(),
        cleartext_traffic,
        nsc_reference: nsc_ref.is_some(),
        nsc_permits_cleartext,
        components,
        metadata_keys,
        warnings,
    })
}
