//! Network security config lookup. Without `resources.arsc` a resource id
//! cannot be mapped to a file, so the archive is probed at conventional
//! compiled-resource paths.

use serde::{Deserialize, Serialize};

use crate::axml::{decode_axml, AxmlDocument, AxmlElement, TypedValue, ANDROID_NS};
use crate::container::ApkArchive;

const CONVENTIONAL_PATHS: &[&str] = &[
    "res/xml/network_security_config.xml",
    "res/xml/network_security.xml",
    "res/xml/network_config.xml",
    "res/xml/nsc.xml",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NscCleartext {
    True,
    False,
    Unresolved,
}

/// Candidate archive paths for a network security config reference, most
/// specific first.
pub fn candidate_paths(archive: &ApkArchive, reference: &TypedValue) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |p: String| {
        if archive.contains(&p) && !out.contains(&p) {
            out.push(p);
        }
    };
    if let Some(name) = reference.as_str().and_then(|s| s.strip_prefix("@xml/")) {
        push(format!("res/xml/{name}.xml"));
    }
    for p in CONVENTIONAL_PATHS {
        push(p.to_string());
    }
    let mut qualified: Vec<&str> = archive
        .entries()
        .iter()
        .map(|e| e.name.as_str())
        .filter(|n| {
            let mut parts = n.split('/');
            matches!(
                (parts.next(), parts.next(), parts.next(), parts.next()),
                (Some("res"), Some(dir), Some(file), None)
                    if dir.starts_with("xml") && file.contains("network_security") && file.ends_with(".xml")
            )
        })
        .collect();
    qualified.sort_unstable();
    for p in qualified {
        push(p.to_string());
    }
    out
}

fn cleartext_attr(e: &AxmlElement) -> Option<bool> {
    e.attr(None, "cleartextTrafficPermitted")
        .or_else(|| e.attr(Some(ANDROID_NS), "cleartextTrafficPermitted"))
        .and_then(TypedValue::as_bool)
}

/// Whether a decoded network security config explicitly permits cleartext
/// anywhere outside `debug-overrides`. `None` if the document is not a
/// network security config.
pub fn config_permits_cleartext(doc: &AxmlDocument) -> Option<bool> {
    if doc.root.name != "network-security-config" {
        return None;
    }
    let mut stack: Vec<&AxmlElement> = doc
        .root
        .children
        .iter()
        .filter(|c| c.name != "debug-overrides")
        .collect();
    while let Some(e) = stack.pop() {
        if matches!(e.name.as_str(), "base-config" | "domain-config")
            && cleartext_attr(e) == Some(true)
        {
            return Some(true);
        }
        stack.extend(e.children.iter().filter(|c| c.name == "domain-config"));
    }
    Some(false)
}

/// Locates and evaluates the referenced config.
pub fn resolve(
    archive: &ApkArchive,
    reference: &TypedValue,
    warnings: &mut Vec<String>,
) -> NscCleartext {
    for path in candidate_paths(archive, reference) {
        let doc = match archive.read_entry(&path).map(|b| decode_axml(&b)) {
            Ok(Ok(doc)) => doc,
            Ok(Err(e)) => {
                warnings.push(format!("network security config {path}: {e}"));
                continue;
            }
            Err(e) => {
                warnings.push(format!("network security config {path}: {e}"));
                continue;
            }
        };
        if let Some(permits) = config_permits_cleartext(&doc) {
            return if permits {
                NscCleartext::True
            } else {
                NscCleartext::False
            };
        }
    }
    NscCleartext::Unresolved
}

#[cfg(test)]
mod tests {
    use super::*;
    use manifestscope_fixtures::apk::ApkBuilder;
    use manifestscope_fixtures::axml::{AttrValue, AxmlWriter, XmlElement};
    use manifestscope_fixtures::corpus::NscFile;

    fn archive(entries: &[(&str, Vec<u8>)]) -> ApkArchive {
        let mut b = ApkBuilder::new();
        for (n, d) in entries {
            b = b.deflated(n, d.clone());
        }
        ApkArchive::from_bytes("t.apk", b.build()).unwrap()
    }

    fn nsc(base: Option<bool>, domains: &[bool]) -> Vec<u8> {
        NscFile {
            base_cleartext: base,
            domain_cleartext: domains
                .iter()
                .map(|&p| ("d.example".to_string(), p))
                .collect(),
        }
        .encode()
    }

    #[test]
    fn base_config_true() {
        let a = archive(&[("res/xml/network_security_config.xml", nsc(Some(true), &[]))]);
        assert_eq!(
            resolve(&a, &TypedValue::Reference(0x7f130000), &mut vec![]),
            NscCleartext::True
        );
    }

    #[test]
    fn domain_config_true_counts() {
        let a = archive(&[(
            "res/xml/network_security_config.xml",
            nsc(Some(false), &[true]),
        )]);
        assert_eq!(
            resolve(&a, &TypedValue::Reference(1), &mut vec![]),
            NscCleartext::True
        );
        let a = archive(&[(
            "res/xml/network_security_config.xml",
            nsc(Some(false), &[false]),
        )]);
        assert_eq!(
            resolve(&a, &TypedValue::Reference(1), &mut vec![]),
            NscCleartext::False
        );
    }

    #[test]
    fn debug_overrides_are_ignored() {
        let doc = XmlElement::new("network-security-config").child(
            XmlElement::new("debug-overrides").child(
                XmlElement::new("base-config")
                    .plain("cleartextTrafficPermitted", AttrValue::Bool(true)),
            ),
        );
        let bytes = AxmlWriter::default().without_namespaces().encode(&doc);
        let a = archive(&[("res/xml/nsc.xml", bytes)]);
        assert_eq!(
            resolve(&a, &TypedValue::Reference(1), &mut vec![]),
            NscCleartext::False
        );
    }

    #[test]
    fn missing_file_is_unresolved() {
        let a = archive(&[("res/xml/other.xml", nsc(Some(true), &[]))]);
        assert_eq!(
            resolve(&a, &TypedValue::Reference(1), &mut vec![]),
            NscCleartext::Unresolved
        );
    }

    #[test]
    fn undecodable_candidate_is_skipped_with_warning() {
        let a = archive(&[
            ("res/xml/network_security_config.xml", b"<xml/>".to_vec()),
            (
                "res/xml-v24/network_security_config.xml",
                nsc(Some(true), &[]),
            ),
        ]);
        let mut w = vec![];
        assert_eq!(
            resolve(&a, &TypedValue::Reference(1), &mut w),
            NscCleartext::True
        );
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn string_reference_names_the_file() {
        let a = archive(&[
            ("res/xml/custom_net.xml", nsc(Some(true), &[])),
            ("res/xml/network_security_config.xml", nsc(Some(false), &[])),
        ]);
        let r = TypedValue::String("@xml/custom_net".into());
        assert_eq!(candidate_paths(&a, &r)[0], "res/xml/custom_net.xml");
        assert_eq!(resolve(&a, &r, &mut vec![]), NscCleartext::True);
    }
}
