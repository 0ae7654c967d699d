//! DEX string-table extraction. Only `string_ids` and the string data items
//! they point at are parsed.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const HEADER_LEN: usize = 0x70;
const STRING_IDS_SIZE_OFF: usize = 0x38;
const STRING_IDS_OFF_OFF: usize = 0x3C;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DexError {
    #[error("not a DEX file (bad magic)")]
    NotADex,
    #[error("truncated DEX: {0}")]
    TruncatedDex(String),
    #[error("string {index} has data offset {offset:#x} outside the file")]
    BadStringOffset { index: usize, offset: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DexStringTable {
    /// Archive entry name, e.g. `classes2.dex`. Empty when scanned standalone.
    pub dex_name: String,
    /// Three-digit format version from the magic, e.g. `"035"`.
    pub version: String,
    pub strings: Vec<String>,
    pub warnings: Vec<String>,
}

fn u32_at(data: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]])
}

fn read_uleb128(data: &[u8], pos: &mut usize) -> Option<u32> {
    let mut result: u32 = 0;
    for shift in (0..35).step_by(7) {
        let byte = *data.get(*pos)?;
        *pos += 1;
        result |= ((byte & 0x7F) as u32).checked_shl(shift).unwrap_or(0);
        if byte & 0x80 == 0 {
            return Some(result);
        }
    }
    None
}

/// Decodes modified UTF-8 into UTF-16 code units. Returns `None` on an
/// ill-formed byte sequence.
pub fn mutf8_to_utf16(bytes: &[u8]) -> Option<Vec<u16>> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b0 = bytes[i] as u16;
        let cont = |k: usize| -> Option<u16> {
            let b = *bytes.get(i + k)? as u16;
            (b & 0xC0 == 0x80).then_some(b & 0x3F)
        };
        match b0 {
            0x01..=0x7F => {
                out.push(b0);
                i += 1;
            }
            0xC0..=0xDF => {
                out.push(((b0 & 0x1F) << 6) | cont(1)?);
                i += 2;
            }
            0xE0..=0xEF => {
                out.push(((b0 & 0x0F) << 12) | (cont(1)? << 6) | cont(2)?);
                i += 3;
            }
            _ => return None,
        }
    }
    Some(out)
}

/// Parses the string table of one DEX file.
pub fn scan_dex(data: &[u8]) -> Result<DexStringTable, DexError> {
    if data.len() < 4 || &data[..4] != b"dex\n" {
        return Err(DexError::NotADex);
    }
    if data.len() < 8 {
        return Err(DexError::TruncatedDex("magic cut short".into()));
    }
    let version = &data[4..7];
    if !version.iter().all(u8::is_ascii_digit) || data[7] != 0 {
        return Err(DexError::NotADex);
    }
    let version = String::from_utf8_lossy(version).into_owned();
    let mut warnings = Vec::new();
    if !("035"..="041").contains(&version.as_str()) {
        warnings.push(format!(
            "unrecognized DEX version {version}, parsing best-effort"
        ));
    }
    if data.len() < HEADER_LEN {
        return Err(DexError::TruncatedDex(format!(
            "header needs {HEADER_LEN} bytes, file has {}",
            data.len()
        )));
    }

    let count = u32_at(data, STRING_IDS_SIZE_OFF) as usize;
    let ids_off = u32_at(data, STRING_IDS_OFF_OFF) as usize;
    if count > 0 {
        let fits = count
            .checked_mul(4)
            .and_then(|n| n.checked_add(ids_off))
            .is_some_and(|end| end <= data.len());
        if !fits {
            return Err(DexError::TruncatedDex(format!(
                "string_ids ({count} entries at {ids_off:#x}) extend past end of file"
            )));
        }
    }

    // Offsets into string data are frequently shared by fuzzed inputs; cache
    // by offset so each data item is decoded once.
    let mut cache: HashMap<u32, String> = HashMap::new();
    let mut strings = Vec::with_capacity(count);
    for index in 0..count {
        let offset = u32_at(data, ids_off + 4 * index);
        if let Some(s) = cache.get(&offset) {
            strings.push(s.clone());
            continue;
        }
        if offset as usize >= data.len() {
            return Err(DexError::BadStringOffset { index, offset });
        }
        let mut pos = offset as usize;
        let utf16_len = read_uleb128(data, &mut pos).ok_or_else(|| {
            DexError::TruncatedDex(format!("string {index} length runs past end of file"))
        })?;
        let end = data[pos..]
            .iter()
            .position(|&b| b == 0)
            .map(|n| pos + n)
            .ok_or_else(|| {
                DexError::TruncatedDex(format!("string {index} is not NUL-terminated"))
            })?;
        let s = match mutf8_to_utf16(&data[pos..end]) {
            Some(units) => {
                if units.len() != utf16_len as usize {
                    warnings.push(format!(
                        "string {index}: declared {utf16_len} UTF-16 units, decoded {}",
                        units.len()
                    ));
                }
                String::from_utf16(&units).unwrap_or_else(|_| {
                    warnings.push(format!("string {index}: unpaired surrogate replaced"));
                    String::from_utf16_lossy(&units)
                })
            }
            None => {
                warnings.push(format!(
                    "string {index}: ill-formed modified UTF-8 replaced"
                ));
                String::from_utf8_lossy(&data[pos..end]).into_owned()
            }
        };
        cache.insert(offset, s.clone());
        strings.push(s);
    }

    Ok(DexStringTable {
        dex_name: String::new(),
        version,
        strings,
        warnings,
    })
}

/// Turns a type descriptor `Lcom/example/Foo;` into `com.example.Foo`.
/// Anything else (primitives, arrays, free text) yields `None`.
pub fn descriptor_to_class(s: &str) -> Option<String> {
    let inner = s.strip_prefix('L')?.strip_suffix(';')?;
    let valid = !inner.is_empty()
        && !inner.starts_with('/')
        && !inner.ends_with('/')
        && !inner.contains("//")
        && inner
            .chars()
            .all(|c| !c.is_whitespace() && !matches!(c, ';' | '[' | '.' | '(' | ')' | '<' | '>'));
    valid.then(|| inner.replace('/', "."))
}

/// All class names referenced by descriptor strings in the table, in dotted
/// form.
pub fn collect_class_prefixes(table: &DexStringTable) -> BTreeSet<String> {
    table
        .strings
        .iter()
        .filter_map(|s| descriptor_to_class(s))
        .collect()
}

/// True for archive entries holding bytecode: `classes.dex`, `classes2.dex`, ...
pub fn is_classes_dex(entry: &str) -> bool {
    entry
        .strip_prefix("classes")
        .and_then(|rest| rest.strip_suffix(".dex"))
        .is_some_and(|n| {
            n.is_empty() || (n.chars().all(|c| c.is_ascii_digit()) && !n.starts_with('0'))
        })
}

/// Multidex ordering key: `classes.dex` first, then by numeric suffix.
pub fn classes_dex_order(entry: &str) -> u32 {
    entry
        .strip_prefix("classes")
        .and_then(|rest| rest.strip_suffix(".dex"))
        .map_or(u32::MAX, |n| {
            if n.is_empty() {
                1
            } else {
                n.parse().unwrap_or(u32::MAX)
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use manifestscope_fixtures::dex::{build_dex, mutf8_encode};
    use proptest::prelude::*;

    #[test]
    fn single_descriptor() {
        let t = scan_dex(&build_dex(&["Lcom/appsflyer/AppsFlyerLib;"], "035")).unwrap();
        assert_eq!(t.strings, vec!["Lcom/appsflyer/AppsFlyerLib;"]);
        assert_eq!(t.version, "035");
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn empty_table() {
        let t = scan_dex(&build_dex(&[], "035")).unwrap();
        assert!(t.strings.is_empty());
    }

    #[test]
    fn zip_magic_is_not_a_dex() {
        assert_eq!(scan_dex(b"PK\x03\x04rest"), Err(DexError::NotADex));
        assert_eq!(scan_dex(b"dex\n03x\0"), Err(DexError::NotADex));
        assert!(matches!(
            scan_dex(b"dex\n0"),
            Err(DexError::TruncatedDex(_))
        ));
        assert!(matches!(
            scan_dex(b"dex\n035\0short"),
            Err(DexError::TruncatedDex(_))
        ));
    }

    #[test]
    fn future_version_warns() {
        let t = scan_dex(&build_dex(&["a"], "042")).unwrap();
        assert_eq!(t.strings, vec!["a"]);
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn bad_string_offset() {
        let mut d = build_dex(&["abc"], "035");
        d[0x70..0x74].copy_from_slice(&0xFFFF_0000u32.to_le_bytes());
        assert_eq!(
            scan_dex(&d),
            Err(DexError::BadStringOffset {
                index: 0,
                offset: 0xFFFF_0000
            })
        );
    }

    #[test]
    fn oversized_id_table_is_truncation() {
        let mut d = build_dex(&["abc"], "035");
        d[0x38..0x3C].copy_from_slice(&0x4000_0000u32.to_le_bytes());
        assert!(matches!(scan_dex(&d), Err(DexError::TruncatedDex(_))));
    }

    #[test]
    fn modified_utf8_edge_cases() {
        assert_eq!(mutf8_to_utf16(&[0xC0, 0x80]).unwrap(), vec![0]);
        let t = scan_dex(&build_dex(&["a\0b", "\u{1F600}", "caf\u{e9}"], "035")).unwrap();
        assert_eq!(t.strings, vec!["a\0b", "\u{1F600}", "caf\u{e9}"]);
        assert!(t.warnings.is_empty(), "{:?}", t.warnings);
        assert_eq!(mutf8_to_utf16(&[0xFF]), None);
        assert_eq!(mutf8_to_utf16(&[0xE0, 0x80]), None);
    }

    #[test]
    fn class_prefix_normalization() {
        let table = |v: &[&str]| DexStringTable {
            dex_name: "classes.dex".into(),
            version: "035".into(),
            strings: v.iter().map(|s| s.to_string()).collect(),
            warnings: vec![],
        };
        let got = collect_class_prefixes(&table(&[
            "Lcom/google/firebase/analytics/FirebaseAnalytics;",
        ]));
        assert_eq!(
            got.into_iter().collect::<Vec<_>>(),
            vec!["com.google.firebase.analytics.FirebaseAnalytics"]
        );
        assert!(
            collect_class_prefixes(&table(&["hello world", "[I", "L;", "Lfoo", "[Lcom/a/B;"]))
                .is_empty()
        );
        let got =
            collect_class_prefixes(&table(&["Lcom/appsflyer/SingleInstallBroadcastReceiver;"]));
        assert!(got.contains("com.appsflyer.SingleInstallBroadcastReceiver"));
    }

    #[test]
    fn classes_dex_names() {
        assert!(is_classes_dex("classes.dex"));
        assert!(is_classes_dex("classes12.dex"));
        assert!(!is_classes_dex("classes01.dex"));
        assert!(!is_classes_dex("assets/classes.dex.bak"));
        assert!(!is_classes_dex("lib/classes2.dex"));
        let mut v = vec!["classes10.dex", "classes2.dex", "classes.dex"];
        v.sort_by_key(|n| classes_dex_order(n));
        assert_eq!(v, vec!["classes.dex", "classes2.dex", "classes10.dex"]);
    }

    proptest! {
        #[test]
        fn mutf8_round_trips_through_reference_encoder(s in "\\PC{0,24}") {
            let units: Vec<u16> = s.encode_utf16().collect();
            prop_assert_eq!(mutf8_to_utf16(&mutf8_encode(&s)), Some(units));
        }

        #[test]
        fn ascii_is_identity(s in "[\\x01-\\x7f]{0,40}") {
            prop_assert_eq!(mutf8_encode(&s), s.as_bytes().to_vec());
            let t = scan_dex(&build_dex(&[s.as_str()], "035")).unwrap();
            prop_assert_eq!(&t.strings[0], &s);
        }

        #[test]
        fn scanned_table_matches_built_strings(v in proptest::collection::vec("\\PC{0,12}", 0..16)) {
            let refs: Vec<&str> = v.iter().map(String::as_str).collect();
            let t = scan_dex(&build_dex(&refs, "035")).unwrap();
            prop_assert_eq!(t.strings, v);
        }
    }
}
