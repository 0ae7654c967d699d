//! Binary XML writer producing the same chunk layout the platform asset
//! compiler emits. Test-only: the analyzer never writes binary XML.

use std::collections::HashMap;

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

const RES_XML_TYPE: u16 = 0x0003;
const RES_STRING_POOL_TYPE: u16 = 0x0001;
const RES_XML_RESOURCE_MAP_TYPE: u16 = 0x0180;
const RES_XML_START_NAMESPACE_TYPE: u16 = 0x0100;
const RES_XML_END_NAMESPACE_TYPE: u16 = 0x0101;
const RES_XML_START_ELEMENT_TYPE: u16 = 0x0102;
const RES_XML_END_ELEMENT_TYPE: u16 = 0x0103;
const UTF8_FLAG: u32 = 1 << 8;
const NO_INDEX: u32 = 0xFFFF_FFFF;

/// Public framework attribute ids for the attributes fixtures use.
fn framework_attr_id(name: &str) -> Option<u32> {
    Some(match name {
        "label" => 0x0101_0001,
        "icon" => 0x0101_0002,
        "name" => 0x0101_0003,
        "permission" => 0x0101_0006,
        "exported" => 0x0101_0010,
        "value" => 0x0101_0024,
        "resource" => 0x0101_0025,
        "scheme" => 0x0101_0027,
        "host" => 0x0101_0028,
        "versionCode" => 0x0101_021b,
        "versionName" => 0x0101_021c,
        "minSdkVersion" => 0x0101_020c,
        "targetSdkVersion" => 0x0101_0270,
        "backupAgent" => 0x0101_027f,
        "allowBackup" => 0x0101_0280,
        "restoreAnyVersion" => 0x0101_02ba,
        "fullBackupContent" => 0x0101_04eb,
        "usesCleartextTraffic" => 0x0101_04ec,
        "networkSecurityConfig" => 0x0101_0527,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Str(String),
    Bool(bool),
    Int(i32),
    Hex(u32),
    Ref(u32),
    Float(f32),
    /// Arbitrary (data type, data) pair, written verbatim.
    Typed(u8, u32),
}

impl AttrValue {
    fn type_and_data(&self, strings: &StringTable) -> (u8, u32, u32) {
        match self {
            AttrValue::Str(s) => {
                let idx = strings.index(s);
                (0x03, idx, idx)
            }
            AttrValue::Bool(b) => (0x12, if *b { 0xFFFF_FFFF } else { 0 }, NO_INDEX),
            AttrValue::Int(v) => (0x10, *v as u32, NO_INDEX),
            AttrValue::Hex(v) => (0x11, *v, NO_INDEX),
            AttrValue::Ref(v) => (0x01, *v, NO_INDEX),
            AttrValue::Float(f) => (0x04, f.to_bits(), NO_INDEX),
            AttrValue::Typed(t, d) => (*t, *d, NO_INDEX),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XmlAttr {
    pub ns: Option<String>,
    pub name: String,
    pub value: AttrValue,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct XmlElement {
    pub ns: Option<String>,
    pub name: String,
    pub attrs: Vec<XmlAttr>,
    pub children: Vec<XmlElement>,
}

impl XmlElement {
    pub fn new(name: &str) -> Self {
        XmlElement {
            name: name.to_string(),
            ..Default::default()
        }
    }

    /// Attribute in the android namespace.
    pub fn android(mut self, name: &str, value: AttrValue) -> Self {
        self.attrs.push(XmlAttr {
            ns: Some(ANDROID_NS.to_string()),
            name: name.to_string(),
            value,
        });
        self
    }

    /// Attribute without a namespace (e.g. `package` on `<manifest>`).
    pub fn plain(mut self, name: &str, value: AttrValue) -> Self {
        self.attrs.push(XmlAttr {
            ns: None,
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn child(mut self, child: XmlElement) -> Self {
        self.children.push(child);
        self
    }

    pub fn children(mut self, children: impl IntoIterator<Item = XmlElement>) -> Self {
        self.children.extend(children);
        self
    }

    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a XmlElement)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

#[derive(Default)]
struct StringTable {
    strings: Vec<String>,
    index: HashMap<String, u32>,
}

impl StringTable {
    fn add(&mut self, s: &str) {
        if !self.index.contains_key(s) {
            self.index.insert(s.to_string(), self.strings.len() as u32);
            self.strings.push(s.to_string());
        }
    }

    fn index(&self, s: &str) -> u32 {
        self.index[s]
    }

    fn opt_index(&self, s: Option<&str>) -> u32 {
        s.map_or(NO_INDEX, |s| self.index(s))
    }
}

#[derive(Debug, Clone)]
pub struct AxmlWriter {
    pub utf8: bool,
    pub namespaces: Vec<(String, String)>,
}

impl Default for AxmlWriter {
    fn default() -> Self {
        AxmlWriter {
            utf8: false,
            namespaces: vec![("android".to_string(), ANDROID_NS.to_string())],
        }
    }
}

impl AxmlWriter {
    pub fn utf8() -> Self {
        AxmlWriter {
            utf8: true,
            ..Default::default()
        }
    }

    pub fn without_namespaces(mut self) -> Self {
        self.namespaces.clear();
        self
    }

    pub fn encode(&self, root: &XmlElement) -> Vec<u8> {
        // Attribute names carrying framework ids come first, aligned with the
        // resource map, exactly as aapt lays them out.
        let mut strings = StringTable::default();
        let mut res_ids = Vec::new();
        root.walk(&mut |e| {
            for a in &e.attrs {
                if a.ns.as_deref() == Some(ANDROID_NS) {
                    if let Some(id) = framework_attr_id(&a.name) {
                        if !strings.index.contains_key(&a.name) {
                            strings.add(&a.name);
                            res_ids.push(id);
                        }
                    }
                }
            }
        });
        for (prefix, uri) in &self.namespaces {
            strings.add(prefix);
            strings.add(uri);
        }
        root.walk(&mut |e| {
            if let Some(ns) = &e.ns {
                strings.add(ns);
            }
            strings.add(&e.name);
            for a in &e.attrs {
                if let Some(ns) = &a.ns {
                    strings.add(ns);
                }
                strings.add(&a.name);
                if let AttrValue::Str(s) = &a.value {
                    strings.add(s);
                }
            }
        });

        let mut body = Vec::new();
        body.extend(string_pool_chunk(&strings.strings, self.utf8));
        if !res_ids.is_empty() {
            let mut chunk = Vec::new();
            chunk_header(
                &mut chunk,
                RES_XML_RESOURCE_MAP_TYPE,
                8,
                8 + 4 * res_ids.len() as u32,
            );
            for id in &res_ids {
                chunk.extend(id.to_le_bytes());
            }
            body.extend(chunk);
        }
        for (prefix, uri) in &self.namespaces {
            body.extend(namespace_chunk(
                RES_XML_START_NAMESPACE_TYPE,
                strings.index(prefix),
                strings.index(uri),
            ));
        }
        let mut line = 1;
        write_element(&mut body, root, &strings, &mut line);
        for (prefix, uri) in self.namespaces.iter().rev() {
            body.extend(namespace_chunk(
                RES_XML_END_NAMESPACE_TYPE,
                strings.index(prefix),
                strings.index(uri),
            ));
        }

        let mut out = Vec::with_capacity(body.len() + 8);
        chunk_header(&mut out, RES_XML_TYPE, 8, 8 + body.len() as u32);
        out.extend(body);
        out
    }
}

fn chunk_header(out: &mut Vec<u8>, ty: u16, header_size: u16, size: u32) {
    out.extend(ty.to_le_bytes());
    out.extend(header_size.to_le_bytes());
    out.extend(size.to_le_bytes());
}

fn namespace_chunk(ty: u16, prefix: u32, uri: u32) -> Vec<u8> {
    let mut c = Vec::with_capacity(24);
    chunk_header(&mut c, ty, 16, 24);
    c.extend(1u32.to_le_bytes());
    c.extend(NO_INDEX.to_le_bytes());
    c.extend(prefix.to_le_bytes());
    c.extend(uri.to_le_bytes());
    c
}

fn write_element(out: &mut Vec<u8>, e: &XmlElement, strings: &StringTable, line: &mut u32) {
    let ns = strings.opt_index(e.ns.as_deref());
    let name = strings.index(&e.name);
    let size = 16 + 20 + 20 * e.attrs.len() as u32;
    chunk_header(out, RES_XML_START_ELEMENT_TYPE, 16, size);
    out.extend(line.to_le_bytes());
    out.extend(NO_INDEX.to_le_bytes());
    out.extend(ns.to_le_bytes());
    out.extend(name.to_le_bytes());
    out.extend(20u16.to_le_bytes()); // attributeStart
    out.extend(20u16.to_le_bytes()); // attributeSize
    out.extend((e.attrs.len() as u16).to_le_bytes());
    out.extend([0u8; 6]); // id, class, style indices
    for a in &e.attrs {
        let (ty, data, raw) = a.value.type_and_data(strings);
        out.extend(strings.opt_index(a.ns.as_deref()).to_le_bytes());
        out.extend(strings.index(&a.name).to_le_bytes());
        out.extend(raw.to_le_bytes());
        out.extend(8u16.to_le_bytes());
        out.push(0);
        out.push(ty);
        out.extend(data.to_le_bytes());
    }
    *line += 1;
    for c in &e.children {
        write_element(out, c, strings, line);
    }
    chunk_header(out, RES_XML_END_ELEMENT_TYPE, 16, 24);
    out.extend(line.to_le_bytes());
    out.extend(NO_INDEX.to_le_bytes());
    out.extend(ns.to_le_bytes());
    out.extend(name.to_le_bytes());
    *line += 1;
}

fn string_pool_chunk(strings: &[String], utf8: bool) -> Vec<u8> {
    let mut data = Vec::new();
    let mut offsets = Vec::with_capacity(strings.len());
    for s in strings {
        offsets.push(data.len() as u32);
        if utf8 {
            let units = s.encode_utf16().count();
            push_utf8_len(&mut data, units);
            push_utf8_len(&mut data, s.len());
            data.extend(s.as_bytes());
            data.push(0);
        } else {
            let units: Vec<u16> = s.encode_utf16().collect();
            if units.len() > 0x7FFF {
                data.extend((((units.len() >> 16) as u16) | 0x8000).to_le_bytes());
                data.extend((units.len() as u16).to_le_bytes());
            } else {
                data.extend((units.len() as u16).to_le_bytes());
            }
            for u in units {
                data.extend(u.to_le_bytes());
            }
            data.extend(0u16.to_le_bytes());
        }
    }
    while data.len() % 4 != 0 {
        data.push(0);
    }
    let header_size = 28u32;
    let strings_start = header_size + 4 * strings.len() as u32;
    let size = strings_start + data.len() as u32;
    let mut c = Vec::with_capacity(size as usize);
    chunk_header(&mut c, RES_STRING_POOL_TYPE, header_size as u16, size);
    c.extend((strings.len() as u32).to_le_bytes());
    c.extend(0u32.to_le_bytes()); // style count
    c.extend((if utf8 { UTF8_FLAG } else { 0 }).to_le_bytes());
    c.extend(strings_start.to_le_bytes());
    c.extend(0u32.to_le_bytes()); // styles start
    for o in offsets {
        c.extend(o.to_le_bytes());
    }
    c.extend(data);
    c
}

fn push_utf8_len(out: &mut Vec<u8>, len: usize) {
    if len > 0x7F {
        out.push(((len >> 8) as u8) | 0x80);
        out.push(len as u8);
    } else {
        out.push(len as u8);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_layout() {
        let bytes = AxmlWriter::default().encode(&XmlElement::new("manifest"));
        assert_eq!(&bytes[0..2], &[0x03, 0x00]);
        let size = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        assert_eq!(size as usize, bytes.len());
        assert_eq!(bytes.len() % 4, 0);
    }
}
