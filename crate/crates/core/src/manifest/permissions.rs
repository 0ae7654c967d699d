use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_TABLE: &str = include_str!("../../data/permissions.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermissionClass {
    Normal,
    Sensitive,
    TrackingRelevant,
    Unknown,
}

impl PermissionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PermissionClass::Normal => "normal",
            PermissionClass::Sensitive => "sensitive",
            PermissionClass::TrackingRelevant => "tracking-relevant",
            PermissionClass::Unknown => "unknown",
        }
    }
}

impl fmt::Display for PermissionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PermissionClass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "normal" => Ok(PermissionClass::Normal),
            "sensitive" => Ok(PermissionClass::Sensitive),
            "tracking-relevant" => Ok(PermissionClass::TrackingRelevant),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermissionTableError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: {name} already classified on line {first_line}")]
    Conflict {
        line: usize,
        first_line: usize,
        name: String,
    },
}

/// Permission name to class lookup.
#[derive(Debug, Clone, Default)]
pub struct PermissionTable {
    classes: HashMap<String, PermissionClass>,
}

impl PermissionTable {
    /// Parses the `<permission-name> <class>` text format.
    pub fn parse(text: &str) -> Result<Self, PermissionTableError> {
        let mut classes = HashMap::new();
        let mut lines_seen: HashMap<String, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut fields = content.split_whitespace();
            let (Some(name), Some(class), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(PermissionTableError::Malformed {
                    line,
                    reason: "expected `<permission-name> <class>`".into(),
                });
            };
            let class = class.parse().map_err(|_| PermissionTableError::Malformed {
                line,
                reason: format!("unknown class {class:?}"),
            })?;
            if let Some(&first_line) = lines_seen.get(name) {
                return Err(PermissionTableError::Conflict {
                    line,
                    first_line,
                    name: name.to_string(),
                });
            }
            lines_seen.insert(name.to_string(), line);
            classes.insert(name.to_string(), class);
        }
        Ok(PermissionTable { classes })
    }

    /// The table shipped with the analyzer.
    pub fn bundled() -> &'static PermissionTable {
        static TABLE: OnceLock<PermissionTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            PermissionTable::parse(BUNDLED_TABLE).expect("bundled permission table is valid")
        })
    }

    pub fn classify(&self, name: &str) -> PermissionClass {
        self.classes
            .get(name)
            .copied()
            .unwrap_or(PermissionClass::Unknown)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Classifies against the bundled table.
pub fn classify_permission(name: &str) -> PermissionClass {
    PermissionTable::bundled().classify(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn named_examples() {
        assert_eq!(
            classify_permission("android.permission.INTERNET"),
            PermissionClass::Normal
        );
        assert_eq!(
            classify_permission("android.permission.RECORD_AUDIO"),
            PermissionClass::Sensitive
        );
        assert_eq!(
            classify_permission("com.google.android.gms.permission.AD_ID"),
            PermissionClass::TrackingRelevant
        );
        assert_eq!(
            classify_permission("com.example.CUSTOM"),
            PermissionClass::Unknown
        );
        assert_eq!(classify_permission(""), PermissionClass::Unknown);
    }

    #[test]
    fn bundled_table_covers_sensitive_families() {
        for p in [
            "READ_EXTERNAL_STORAGE",
            "WRITE_EXTERNAL_STORAGE",
            "READ_MEDIA_IMAGES",
            "READ_MEDIA_VIDEO",
            "READ_MEDIA_AUDIO",
            "CAMERA",
            "ACCESS_FINE_LOCATION",
            "ACCESS_COARSE_LOCATION",
            "READ_CONTACTS",
            "READ_PHONE_STATE",
        ] {
            assert_eq!(
                classify_permission(&format!("android.permission.{p}")),
                PermissionClass::Sensitive,
                "{p}"
            );
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            PermissionTable::parse("a.B normal extra"),
            Err(PermissionTableError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            PermissionTable::parse("# c\n\na.B dangerous"),
            Err(PermissionTableError::Malformed { line: 3, .. })
        ));
        assert_eq!(
            PermissionTable::parse("a.B normal\na.B sensitive").unwrap_err(),
            PermissionTableError::Conflict {
                line: 2,
                first_line: 1,
                name: "a.B".into()
            }
        );
        let t = PermissionTable::parse("a.B normal # trailing comment\n").unwrap();
        assert_eq!(t.classify("a.B"), PermissionClass::Normal);
    }

    proptest! {
        #[test]
        fn classification_is_pure(name in "[a-zA-Z._]{0,40}") {
            prop_assert_eq!(classify_permission(&name), classify_permission(&name));
        }
    }
}
