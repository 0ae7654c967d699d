//! Fixture builders for manifestscope tests: binary XML, DEX, APK
//! containers and the synthetic app corpus.
//!
//! Everything here is written independently of the analyzer's decoders so
//! the two can check each other.

pub mod apk;
pub mod axml;
pub mod corpus;
pub mod dex;

use std::path::PathBuf;

use axml::{AttrValue, AxmlWriter, XmlElement};

/// Root of the committed fixture tree (`<workspace>/fixtures`).
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Standalone compiled XML documents used for decoder oracle checks.
pub fn oracle_axml() -> Vec<(String, Vec<u8>)> {
    let mut out = vec![
        (
            "backup_disabled".to_string(),
            corpus::backup_disabled_app().manifest_bytes(),
        ),
        (
            "backup_agent".to_string(),
            corpus::backup_agent_app().manifest_bytes(),
        ),
        (
            "cleartext_nsc".to_string(),
            corpus::cleartext_nsc_app().manifest_bytes(),
        ),
        (
            "exposed_components".to_string(),
            corpus::exposed_components_app().manifest_bytes(),
        ),
        (
            "sdk_signals".to_string(),
            corpus::sdk_signals_app().manifest_bytes(),
        ),
        (
            "sdk_signals_utf8".to_string(),
            AxmlWriter::utf8().encode(&corpus::sdk_signals_app().manifest()),
        ),
        (
            "empty_manifest".to_string(),
            AxmlWriter::default()
                .without_namespaces()
                .encode(&XmlElement::new("manifest")),
        ),
        (
            "nsc_cleartext".to_string(),
            corpus::NscFile {
                base_cleartext: Some(false),
                domain_cleartext: vec![("legacy.example.com".into(), true)],
            }
            .encode(),
        ),
    ];
    let typed = XmlElement::new("manifest")
        .plain("package", AttrValue::Str("com.example.typed".into()))
        .child(
            XmlElement::new("application")
                .android("allowBackup", AttrValue::Bool(false))
                .android(
                    "label",
                    AttrValue::Str("Typed \u{00e9}\u{4e2d}\u{1F600}".into()),
                )
                .child(
                    XmlElement::new("activity")
                        .android("name", AttrValue::Str(".A".into()))
                        .android("screenOrientation", AttrValue::Int(-1))
                        .android("configChanges", AttrValue::Hex(0x4a0))
                        .android("windowSoftInputMode", AttrValue::Typed(0x11, 0x20))
                        .plain("ratio", AttrValue::Float(1.5))
                        .plain("tint", AttrValue::Typed(0x1c, 0xff00_ff00))
                        .plain("pad", AttrValue::Typed(0x05, 0x0000_1001))
                        .android("theme", AttrValue::Ref(0x0103_0010)),
                )
                .child(XmlElement::new("activity").android("name", AttrValue::Str(".B".into()))),
        );
    out.push((
        "typed_values".to_string(),
        AxmlWriter::default().encode(&typed),
    ));
    out
}

/// Standalone DEX files used for scanner oracle checks.
pub fn oracle_dex() -> Vec<(String, Vec<u8>)> {
    vec![
        (
            "appsflyer".to_string(),
            dex::build_dex(&["Lcom/appsflyer/AppsFlyerLib;"], "035"),
        ),
        ("empty".to_string(), dex::build_dex(&[], "035")),
        (
            "supplementary".to_string(),
            dex::build_dex(
                &["Lcom/example/Emoji;", "smile \u{1F600} end", "\u{10437}"],
                "038",
            ),
        ),
        (
            "embedded_nul".to_string(),
            dex::build_dex(&["a\u{0}b", "\u{0}", "plain"], "039"),
        ),
        (
            "mixed".to_string(),
            dex::build_dex(
                &[
                    "<init>",
                    "Lcom/google/firebase/analytics/FirebaseAnalytics;",
                    "Lcom/appsflyer/SingleInstallBroadcastReceiver;",
                    "[I",
                    "caf\u{00e9}",
                    "\u{4e2d}\u{6587}",
                    "hello world",
                ],
                "035",
            ),
        ),
    ]
}

/// Reference dumps written by `tools/reference_dump.py`.
pub mod reference {
    use std::collections::BTreeSet;
    use std::fs;

    use serde_json::Value;

    use super::fixtures_dir;

    /// `(index, parent, namespace, name)` in document order.
    pub type ElementRow = (u64, Option<u64>, Option<String>, String);
    /// `(element, namespace, name, data_type, value)`. Strings keep their
    /// text; every other type is the decimal 32-bit data word.
    pub type AttributeRow = (u64, Option<String>, String, u8, String);

    pub struct AxmlDump {
        pub elements: Vec<ElementRow>,
        pub attributes: BTreeSet<AttributeRow>,
    }

    pub struct DexDump {
        pub version: String,
        pub strings: Vec<String>,
    }

    fn load(dir: &str, name: &str) -> Value {
        let path = fixtures_dir().join(dir).join(format!("{name}.ref.json"));
        let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
    }

    fn opt_str(v: &Value) -> Option<String> {
        v.as_str().filter(|s| !s.is_empty()).map(str::to_string)
    }

    pub fn axml(name: &str) -> AxmlDump {
        let v = load("axml", name);
        let elements = v["elements"]
            .as_array()
            .expect("elements array")
            .iter()
            .map(|e| {
                (
                    e["index"].as_u64().expect("index"),
                    e["parent"].as_u64(),
                    opt_str(&e["namespace"]),
                    e["name"].as_str().expect("name").to_string(),
                )
            })
            .collect();
        let attributes = v["attributes"]
            .as_array()
            .expect("attributes array")
            .iter()
            .map(|a| {
                let value = match &a["value"] {
                    Value::String(s) => s.clone(),
                    other => other.as_u64().expect("numeric value").to_string(),
                };
                (
                    a["element"].as_u64().expect("element"),
                    opt_str(&a["namespace"]),
                    a["name"].as_str().expect("name").to_string(),
                    a["type"].as_u64().expect("type") as u8,
                    value,
                )
            })
            .collect();
        AxmlDump {
            elements,
            attributes,
        }
    }

    pub fn dex(name: &str) -> DexDump {
        let v = load("dex", name);
        DexDump {
            version: v["version"].as_str().expect("version").to_string(),
            strings: v["strings"]
                .as_array()
                .expect("strings array")
                .iter()
                .map(|s| s.as_str().expect("string entry").to_string())
                .collect(),
        }
    }
}
