//! Decoder for Android's compiled binary XML (AXML), as used by
//! `AndroidManifest.xml` and `res/xml/*` inside an APK.
//!
//! The decoder is tolerant where tolerance keeps facts intact (unknown chunk
//! types are skipped, undecodable strings become U+FFFD) and strict where a
//! partial tree would mislead (any size or nesting inconsistency fails the
//! whole document).

mod string_pool;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

const RES_XML_TYPE: u16 = 0x0003;
const RES_STRING_POOL_TYPE: u16 = 0x0001;
const RES_XML_RESOURCE_MAP_TYPE: u16 = 0x0180;
const RES_XML_START_NAMESPACE_TYPE: u16 = 0x0100;
const RES_XML_END_NAMESPACE_TYPE: u16 = 0x0101;
const RES_XML_START_ELEMENT_TYPE: u16 = 0x0102;
const RES_XML_END_ELEMENT_TYPE: u16 = 0x0103;
const RES_XML_CDATA_TYPE: u16 = 0x0104;

const TYPE_REFERENCE: u8 = 0x01;
const TYPE_STRING: u8 = 0x03;
const TYPE_FLOAT: u8 = 0x04;
const TYPE_INT_DEC: u8 = 0x10;
const TYPE_INT_HEX: u8 = 0x11;
const TYPE_INT_BOOLEAN: u8 = 0x12;
const TYPE_LAST_INT: u8 = 0x1f;

const NO_INDEX: u32 = 0xFFFF_FFFF;
const MAX_DEPTH: usize = 256;

/// Framework attribute names by resource id, used when a compiled document
/// blanks out attribute name strings (a common packer trick).
const FRAMEWORK_ATTRS: &[(u32, &str)] = &[
    (0x0101_0001, "label"),
    (0x0101_0002, "icon"),
    (0x0101_0003, "name"),
    (0x0101_0006, "permission"),
    (0x0101_0010, "exported"),
    (0x0101_0024, "value"),
    (0x0101_0025, "resource"),
    (0x0101_0027, "scheme"),
    (0x0101_0028, "host"),
    (0x0101_020c, "minSdkVersion"),
    (0x0101_021b, "versionCode"),
    (0x0101_021c, "versionName"),
    (0x0101_0270, "targetSdkVersion"),
    (0x0101_027f, "backupAgent"),
    (0x0101_0280, "allowBackup"),
    (0x0101_02ba, "restoreAnyVersion"),
    (0x0101_04eb, "fullBackupContent"),
    (0x0101_04ec, "usesCleartextTraffic"),
    (0x0101_0527, "networkSecurityConfig"),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AxmlError {
    #[error("not a binary XML document")]
    NotBinaryXml,
    #[error("malformed chunk: {0}")]
    MalformedChunk(String),
    #[error("string index {0} outside string pool")]
    DanglingStringIndex(u32),
}

/// A typed attribute value as stored in a `Res_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum TypedValue {
    String(String),
    Boolean(bool),
    IntDec(i32),
    IntHex(u32),
    /// Resource id, kept verbatim.
    Reference(u32),
    Float(f32),
    /// Other members of the integer family (colors and friends).
    Integer {
        data_type: u8,
        value: u32,
    },
    /// Any type the decoder does not interpret.
    Raw {
        data_type: u8,
        data: u32,
    },
}

impl TypedValue {
    fn from_raw(
        data_type: u8,
        data: u32,
        string: Option<String>,
        warnings: &mut Vec<String>,
    ) -> Self {
        match data_type {
            TYPE_STRING => TypedValue::String(string.unwrap_or_default()),
            TYPE_REFERENCE => TypedValue::Reference(data),
            TYPE_FLOAT => TypedValue::Float(f32::from_bits(data)),
            TYPE_INT_DEC => TypedValue::IntDec(data as i32),
            TYPE_INT_HEX => TypedValue::IntHex(data),
            TYPE_INT_BOOLEAN => match data {
                0 => TypedValue::Boolean(false),
                0xFFFF_FFFF => TypedValue::Boolean(true),
                other => {
                    warnings.push(format!(
                        "boolean attribute with raw data {other:#010x} kept as raw"
                    ));
                    TypedValue::Raw { data_type, data }
                }
            },
            0x13..=TYPE_LAST_INT => TypedValue::Integer {
                data_type,
                value: data,
            },
            _ => TypedValue::Raw { data_type, data },
        }
    }

    /// The on-disk `Res_value` data type.
    pub fn data_type(&self) -> u8 {
        match self {
            TypedValue::String(_) => TYPE_STRING,
            TypedValue::Boolean(_) => TYPE_INT_BOOLEAN,
            TypedValue::IntDec(_) => TYPE_INT_DEC,
            TypedValue::IntHex(_) => TYPE_INT_HEX,
            TypedValue::Reference(_) => TYPE_REFERENCE,
            TypedValue::Float(_) => TYPE_FLOAT,
            TypedValue::Integer { data_type, .. } | TypedValue::Raw { data_type, .. } => *data_type,
        }
    }

    /// The on-disk 32-bit data word. `None` for strings, whose data is a
    /// pool index.
    pub fn raw_data(&self) -> Option<u32> {
        match self {
            TypedValue::String(_) => None,
            TypedValue::Boolean(b) => Some(if *b { 0xFFFF_FFFF } else { 0 }),
            TypedValue::IntDec(v) => Some(*v as u32),
            TypedValue::IntHex(v) | TypedValue::Reference(v) => Some(*v),
            TypedValue::Float(v) => Some(v.to_bits()),
            TypedValue::Integer { value: data, .. } | TypedValue::Raw { data, .. } => Some(*data),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            TypedValue::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            TypedValue::String(s) => Some(s),
            _ => None,
        }
    }

    /// Integer view: decimal, hex or other integer-family values, or a
    /// string holding a decimal number.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            TypedValue::IntDec(v) => Some(*v as i64),
            TypedValue::IntHex(v) => Some(*v as i64),
            TypedValue::Integer { value, .. } => Some(*value as i64),
            TypedValue::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }
}

impl fmt::Display for TypedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypedValue::String(s) => f.write_str(s),
            TypedValue::Boolean(b) => write!(f, "{b}"),
            TypedValue::IntDec(v) => write!(f, "{v}"),
            TypedValue::IntHex(v) => write!(f, "{v:#010x}"),
            TypedValue::Reference(id) => write!(f, "@{id:#010x}"),
            TypedValue::Float(v) => write!(f, "{v}"),
            TypedValue::Integer { value, .. } => write!(f, "#{value:08x}"),
            TypedValue::Raw { data_type, data } => write!(f, "raw({data_type:#04x}, {data:#010x})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxmlAttribute {
    pub namespace: Option<String>,
    pub name: String,
    pub value: TypedValue,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AxmlElement {
    pub namespace: Option<String>,
    pub name: String,
    pub attributes: Vec<AxmlAttribute>,
    pub children: Vec<AxmlElement>,
}

impl AxmlElement {
    /// Attribute lookup by namespace URI (`None` for unqualified) and name.
    pub fn attr(&self, namespace: Option<&str>, name: &str) -> Option<&TypedValue> {
        self.attributes
            .iter()
            .find(|a| a.namespace.as_deref() == namespace && a.name == name)
            .map(|a| &a.value)
    }

    pub fn android_attr(&self, name: &str) -> Option<&TypedValue> {
        self.attr(Some(ANDROID_NS), name)
    }

    pub fn android_str(&self, name: &str) -> Option<&str> {
        self.android_attr(name).and_then(TypedValue::as_str)
    }

    pub fn android_bool(&self, name: &str) -> Option<bool> {
        self.android_attr(name).and_then(TypedValue::as_bool)
    }

    pub fn children_named<'a>(
        &'a self,
        name: &'a str,
    ) -> impl Iterator<Item = &'a AxmlElement> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// This element and all descendants in document (pre-)order.
    pub fn descendants(&self) -> Vec<&AxmlElement> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            out.push(e);
            stack.extend(e.children.iter().rev());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxmlDocument {
    pub root: AxmlElement,
    pub string_pool: Vec<String>,
    pub resource_map: Vec<u32>,
    /// Declared (prefix, uri) pairs in document order.
    pub namespaces: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl AxmlDocument {
    /// All elements reached by the root-anchored element-name path, in
    /// document order. `["manifest"]` yields the root itself.
    pub fn find_elements(&self, path: &[&str]) -> Vec<&AxmlElement> {
        let Some((first, rest)) = path.split_first() else {
            return Vec::new();
        };
        if self.root.name != *first {
            return Vec::new();
        }
        let mut current = vec![&self.root];
        for name in rest {
            current = current
                .into_iter()
                .flat_map(|e| e.children.iter().filter(move |c| c.name == **name))
                .collect();
        }
        current
    }
}

/// Free-function form of [`AxmlDocument::find_elements`].
pub fn find_elements<'a>(doc: &'a AxmlDocument, path: &[&str]) -> Vec<&'a AxmlElement> {
    doc.find_elements(path)
}

/// Free-function form of [`AxmlElement::attr`].
pub fn get_attr<'a>(
    elem: &'a AxmlElement,
    namespace: Option<&str>,
    name: &str,
) -> Option<&'a TypedValue> {
    elem.attr(namespace, name)
}

fn u16_at(data: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([data[at], data[at + 1]])
}

fn u32_at(data: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]])
}

fn malformed(msg: impl Into<String>) -> AxmlError {
    AxmlError::MalformedChunk(msg.into())
}

struct Decoder {
    strings: Vec<String>,
    resource_map: Vec<u32>,
    namespaces: Vec<(String, String)>,
    warnings: Vec<String>,
    stack: Vec<(AxmlElement, u32, u32)>,
    root: Option<AxmlElement>,
}

impl Decoder {
    fn string(&self, idx: u32) -> Result<&str, AxmlError> {
        self.strings
            .get(idx as usize)
            .map(String::as_str)
            .ok_or(AxmlError::DanglingStringIndex(idx))
    }

    fn opt_string(&self, idx: u32) -> Result<Option<String>, AxmlError> {
        if idx == NO_INDEX {
            Ok(None)
        } else {
            self.string(idx).map(|s| Some(s.to_string()))
        }
    }

    fn attribute_name(&self, idx: u32) -> Result<String, AxmlError> {
        let name = self.string(idx)?;
        if !name.is_empty() {
            return Ok(name.to_string());
        }
        let by_id = self
            .resource_map
            .get(idx as usize)
            .and_then(|id| FRAMEWORK_ATTRS.iter().find(|(rid, _)| rid == id))
            .map(|(_, n)| n.to_string());
        Ok(by_id.unwrap_or_default())
    }

    fn start_element(&mut self, chunk: &[u8], header_size: usize) -> Result<(), AxmlError> {
        if header_size < 16 || chunk.len() < header_size + 20 {
            return Err(malformed("start element chunk too small"));
        }
        if self.root.is_some() {
            return Err(malformed("second root element"));
        }
        if self.stack.len() >= MAX_DEPTH {
            return Err(malformed(format!(
                "element nesting deeper than {MAX_DEPTH}"
            )));
        }
        let body = header_size;
        let ns_idx = u32_at(chunk, body);
        let name_idx = u32_at(chunk, body + 4);
        let attr_start = u16_at(chunk, body + 8) as usize;
        let attr_size = u16_at(chunk, body + 10) as usize;
        let attr_count = u16_at(chunk, body + 12) as usize;
        if attr_count > 0 && attr_size < 20 {
            return Err(malformed(format!("attribute size {attr_size} below 20")));
        }
        let attrs_begin = body + attr_start;
        if attrs_begin + attr_count * attr_size > chunk.len() {
            return Err(malformed("attributes overrun start element chunk"));
        }

        let mut element = AxmlElement {
            namespace: self.opt_string(ns_idx)?,
            name: self.string(name_idx)?.to_string(),
            attributes: Vec::with_capacity(attr_count),
            children: Vec::new(),
        };
        for i in 0..attr_count {
            let at = attrs_begin + i * attr_size;
            let a_ns = u32_at(chunk, at);
            let a_name = u32_at(chunk, at + 4);
            let raw = u32_at(chunk, at + 8);
            let data_type = chunk[at + 15];
            let data = u32_at(chunk, at + 16);
            let string = if data_type == TYPE_STRING {
                let idx = if raw != NO_INDEX { raw } else { data };
                Some(self.string(idx)?.to_string())
            } else {
                None
            };
            let attribute = AxmlAttribute {
                namespace: self.opt_string(a_ns)?,
                name: self.attribute_name(a_name)?,
                value: TypedValue::from_raw(data_type, data, string, &mut self.warnings),
            };
            if element
                .attributes
                .iter()
                .any(|a| a.namespace == attribute.namespace && a.name == attribute.name)
            {
                self.warnings.push(format!(
                    "duplicate attribute {} on <{}> ignored",
                    attribute.name, element.name
                ));
                continue;
            }
            element.attributes.push(attribute);
        }
        self.stack.push((element, ns_idx, name_idx));
        Ok(())
    }

    fn end_element(&mut self, chunk: &[u8], header_size: usize) -> Result<(), AxmlError> {
        if header_size < 16 || chunk.len() < header_size + 8 {
            return Err(malformed("end element chunk too small"));
        }
        let ns_idx = u32_at(chunk, header_size);
        let name_idx = u32_at(chunk, header_size + 4);
        let (element, open_ns, open_name) = self
            .stack
            .pop()
            .ok_or_else(|| malformed("end element without matching start"))?;
        if open_name != name_idx || open_ns != ns_idx {
            return Err(malformed(format!(
                "mismatched end element for <{}>",
                element.name
            )));
        }
        match self.stack.last_mut() {
            Some((parent, _, _)) => parent.children.push(element),
            None => self.root = Some(element),
        }
        Ok(())
    }
}

/// Decodes a complete binary XML document.
pub fn decode_axml(data: &[u8]) -> Result<AxmlDocument, AxmlError> {
    if data.len() < 2 || u16_at(data, 0) != RES_XML_TYPE {
        return Err(AxmlError::NotBinaryXml);
    }
    if data.len() < 8 {
        return Err(malformed("truncated document header"));
    }
    let header_size = u16_at(data, 2) as usize;
    let size = u32_at(data, 4) as usize;
    if header_size < 8 || header_size > size {
        return Err(malformed(format!(
            "document header size {header_size} invalid"
        )));
    }
    if size > data.len() {
        return Err(malformed(format!(
            "document declares {size} bytes, only {} present",
            data.len()
        )));
    }

    let mut d = Decoder {
        strings: Vec::new(),
        resource_map: Vec::new(),
        namespaces: Vec::new(),
        warnings: Vec::new(),
        stack: Vec::new(),
        root: None,
    };
    if size < data.len() {
        d.warnings
            .push(format!("{} trailing bytes ignored", data.len() - size));
    }
    let doc = &data[..size];
    let mut seen_pool = false;
    let mut pos = header_size;
    while pos < size {
        if pos + 8 > size {
            return Err(malformed(format!("truncated chunk header at {pos}")));
        }
        let ty = u16_at(doc, pos);
        let hs = u16_at(doc, pos + 2) as usize;
        let len = u32_at(doc, pos + 4) as usize;
        if hs < 8 || len < hs || len > size - pos {
            return Err(malformed(format!(
                "chunk {ty:#06x} at {pos}: header {hs}, size {len} inconsistent"
            )));
        }
        let chunk = &doc[pos..pos + len];
        match ty {
            RES_STRING_POOL_TYPE if !seen_pool => {
                d.strings = string_pool::decode(chunk, hs, &mut d.warnings)?;
                seen_pool = true;
            }
            RES_STRING_POOL_TYPE => d.warnings.push("extra string pool ignored".into()),
            RES_XML_RESOURCE_MAP_TYPE => {
                d.resource_map = chunk[hs..]
                    .chunks_exact(4)
                    .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect();
            }
            RES_XML_START_NAMESPACE_TYPE => {
                if hs < 16 || len < hs + 8 {
                    return Err(malformed("namespace chunk too small"));
                }
                let prefix = d.string(u32_at(chunk, hs))?.to_string();
                let uri = d.string(u32_at(chunk, hs + 4))?.to_string();
                d.namespaces.push((prefix, uri));
            }
            RES_XML_END_NAMESPACE_TYPE | RES_XML_CDATA_TYPE => {}
            RES_XML_START_ELEMENT_TYPE => d.start_element(chunk, hs)?,
            RES_XML_END_ELEMENT_TYPE => d.end_element(chunk, hs)?,
            other => d
                .warnings
                .push(format!("unknown chunk type {other:#06x} at {pos} skipped")),
        }
        pos += len;
    }

    if !d.stack.is_empty() {
        return Err(malformed(format!("{} unclosed element(s)", d.stack.len())));
    }
    let root = d
        .root
        .ok_or_else(|| malformed("document has no root element"))?;
    Ok(AxmlDocument {
        root,
        string_pool: d.strings,
        resource_map: d.resource_map,
        namespaces: d.namespaces,
        warnings: d.warnings,
    })
}
