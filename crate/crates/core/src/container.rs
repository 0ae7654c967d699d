//! APK container access: classic ZIP central-directory parsing with stored
//! and deflate entries.
//!
//! Only the directory structures are parsed here; inflating is delegated to
//! `flate2`. Every entry read is checked against its declared size and CRC32.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::DeflateDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const LOCAL_HEADER_SIG: u32 = 0x0403_4b50;
const CENTRAL_HEADER_SIG: u32 = 0x0201_4b50;
const EOCD_SIG: u32 = 0x0605_4b50;
const ZIP64_LOCATOR_SIG: u32 = 0x0706_4b50;
const EOCD_LEN: usize = 22;
const CENTRAL_HEADER_LEN: usize = 46;
const LOCAL_HEADER_LEN: usize = 30;
const MAX_COMMENT_LEN: usize = 0xFFFF;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a ZIP archive: end-of-central-directory signature not found")]
    NotAZip,
    #[error("truncated archive: {0}")]
    TruncatedArchive(String),
    #[error("unsupported compression method {method} for entry {name}")]
    UnsupportedCompressionMethod { name: String, method: u16 },
    #[error("unsupported archive feature: {0}")]
    UnsupportedArchiveFeature(String),
    #[error("invalid entry name {0:?}")]
    InvalidEntryName(String),
    #[error("duplicate entry {0:?}")]
    DuplicateEntry(String),
    #[error("entry not found: {0}")]
    EntryNotFound(String),
    #[error("corrupt entry {name}: {reason}")]
    CorruptEntry { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompressionMethod {
    Stored,
    Deflate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZipEntry {
    pub name: String,
    pub compressed_size: u64,
    pub uncompressed_size: u64,
    pub method: CompressionMethod,
    pub crc32: u32,
    local_header_offset: u64,
}

/// An opened APK. Immutable after [`ApkArchive::open`]; entry bodies are
/// decompressed lazily by [`ApkArchive::read_entry`].
#[derive(Debug, Clone)]
pub struct ApkArchive {
    source_path: PathBuf,
    data: Vec<u8>,
    entries: Vec<ZipEntry>,
    index: HashMap<String, usize>,
}

fn u16_at(data: &[u8], at: usize) -> Option<u16> {
    data.get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
}

fn u32_at(data: &[u8], at: usize) -> Option<u32> {
    data.get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Normalizes an archive path: backslashes become `/`, leading `./` and
/// empty segments are dropped. `..` segments are rejected.
fn normalize_name(raw: &str) -> Result<String, ContainerError> {
    let unified = raw.replace('\\', "/");
    let mut parts = Vec::new();
    for seg in unified.split('/') {
        match seg {
            "" | "." => continue,
            ".." => return Err(ContainerError::InvalidEntryName(raw.to_string())),
            s => parts.push(s),
        }
    }
    if parts.is_empty() {
        return Err(ContainerError::InvalidEntryName(raw.to_string()));
    }
    let mut name = parts.join("/");
    if unified.ends_with('/') {
        name.push('/');
    }
    Ok(name)
}

fn find_eocd(data: &[u8]) -> Option<usize> {
    if data.len() < EOCD_LEN {
        return None;
    }
    let lowest = data.len().saturating_sub(EOCD_LEN + MAX_COMMENT_LEN);
    (lowest..=data.len() - EOCD_LEN)
        .rev()
        .find(|&pos| u32_at(data, pos) == Some(EOCD_SIG))
}

impl ApkArchive {
    /// Opens and catalogs the archive at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        let path = path.as_ref();
        let data = fs::read(path).map_err(|source| ContainerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(path, data)
    }

    /// Catalogs an in-memory archive. `source_path` is informational.
    pub fn from_bytes(
        source_path: impl Into<PathBuf>,
        data: Vec<u8>,
    ) -> Result<Self, ContainerError> {
        let eocd = find_eocd(&data).ok_or(ContainerError::NotAZip)?;
        if eocd >= 20 && u32_at(&data, eocd - 20) == Some(ZIP64_LOCATOR_SIG) {
            return Err(ContainerError::UnsupportedArchiveFeature("ZIP64".into()));
        }
        let disk = u16_at(&data, eocd + 4).unwrap_or(0);
        let cd_disk = u16_at(&data, eocd + 6).unwrap_or(0);
        let disk_entries = u16_at(&data, eocd + 8).unwrap_or(0);
        let total_entries = u16_at(&data, eocd + 10).unwrap_or(0);
        let cd_size = u32_at(&data, eocd + 12).unwrap_or(0);
        let cd_offset = u32_at(&data, eocd + 16).unwrap_or(0);
        if total_entries == 0xFFFF || cd_size == 0xFFFF_FFFF || cd_offset == 0xFFFF_FFFF {
            return Err(ContainerError::UnsupportedArchiveFeature("ZIP64".into()));
        }
        if disk != 0 || cd_disk != 0 || disk_entries != total_entries {
            return Err(ContainerError::UnsupportedArchiveFeature(
                "multi-disk archive".into(),
            ));
        }
        let cd_start = cd_offset as usize;
        let cd_end = cd_start
            .checked_add(cd_size as usize)
            .filter(|&end| end <= eocd)
            .ok_or_else(|| {
                ContainerError::TruncatedArchive(
                    "central directory extends past its end record".into(),
                )
            })?;

        let mut entries = Vec::with_capacity(total_entries as usize);
        let mut index = HashMap::with_capacity(total_entries as usize);
        let mut pos = cd_start;
        for _ in 0..total_entries {
            if pos + CENTRAL_HEADER_LEN > cd_end {
                return Err(ContainerError::TruncatedArchive(
                    "central directory shorter than its entry count".into(),
                ));
            }
            if u32_at(&data, pos) != Some(CENTRAL_HEADER_SIG) {
                return Err(ContainerError::TruncatedArchive(format!(
                    "bad central directory signature at offset {pos}"
                )));
            }
            let field16 = |off: usize| u16_at(&data, pos + off).unwrap_or(0);
            let field32 = |off: usize| u32_at(&data, pos + off).unwrap_or(0);
            let flags = field16(8);
            let method = field16(10);
            let crc32 = field32(16);
            let compressed_size = field32(20);
            let uncompressed_size = field32(24);
            let name_len = field16(28) as usize;
            let extra_len = field16(30) as usize;
            let comment_len = field16(32) as usize;
            let local_offset = field32(42);
            let name_start = pos + CENTRAL_HEADER_LEN;
            let next = name_start + name_len + extra_len + comment_len;
            if next > cd_end {
                return Err(ContainerError::TruncatedArchive(
                    "central directory record overruns directory".into(),
                ));
            }
            let raw_name =
                String::from_utf8_lossy(&data[name_start..name_start + name_len]).into_owned();
            if compressed_size == 0xFFFF_FFFF
                || uncompressed_size == 0xFFFF_FFFF
                || local_offset == 0xFFFF_FFFF
            {
                return Err(ContainerError::UnsupportedArchiveFeature(format!(
                    "ZIP64 entry {raw_name}"
                )));
            }
            if flags & 0x1 != 0 {
                return Err(ContainerError::UnsupportedArchiveFeature(format!(
                    "encrypted entry {raw_name}"
                )));
            }
            let method = match method {
                0 => CompressionMethod::Stored,
                8 => CompressionMethod::Deflate,
                other => {
                    return Err(ContainerError::UnsupportedCompressionMethod {
                        name: raw_name,
                        method: other,
                    })
                }
            };
            let name = normalize_name(&raw_name)?;
            if index.insert(name.clone(), entries.len()).is_some() {
                return Err(ContainerError::DuplicateEntry(name));
            }
            entries.push(ZipEntry {
                name,
                compressed_size: compressed_size as u64,
                uncompressed_size: uncompressed_size as u64,
                method,
                crc32,
                local_header_offset: local_offset as u64,
            });
            pos = next;
        }

        Ok(ApkArchive {
            source_path: source_path.into(),
            data,
            entries,
            index,
        })
    }

    pub fn source_path(&self) -> &Path {
        &self.source_path
    }

    /// Entries in central-directory order.
    pub fn entries(&self) -> &[ZipEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&ZipEntry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Returns the fully decompressed, CRC-checked bytes of `name`.
    pub fn read_entry(&self, name: &str) -> Result<Vec<u8>, ContainerError> {
        let entry = self
            .entry(name)
            .ok_or_else(|| ContainerError::EntryNotFound(name.to_string()))?;
        let corrupt = |reason: String| ContainerError::CorruptEntry {
            name: entry.name.clone(),
            reason,
        };

        let local = entry.local_header_offset as usize;
        if u32_at(&self.data, local) != Some(LOCAL_HEADER_SIG) {
            return Err(corrupt("missing local file header".into()));
        }
        let name_len = u16_at(&self.data, local + 26).unwrap_or(0) as usize;
        let extra_len = u16_at(&self.data, local + 28).unwrap_or(0) as usize;
        let start = local + LOCAL_HEADER_LEN + name_len + extra_len;
        let end = start
            .checked_add(entry.compressed_size as usize)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| corrupt("entry data extends past end of archive".into()))?;
        let raw = &self.data[start..end];

        let expected = entry.uncompressed_size as usize;
        let bytes = match entry.method {
            CompressionMethod::Stored => {
                if raw.len() != expected {
                    return Err(corrupt(format!(
                        "stored size {} differs from declared {}",
                        raw.len(),
                        expected
                    )));
                }
                raw.to_vec()
            }
            CompressionMethod::Deflate => {
                // Read one byte past the declared size to detect overlong streams.
                let mut out = Vec::with_capacity(expected);
                DeflateDecoder::new(raw)
                    .take(expected as u64 + 1)
                    .read_to_end(&mut out)
                    .map_err(|e| corrupt(format!("inflate failed: {e}")))?;
                if out.len() != expected {
                    return Err(corrupt(format!(
                        "inflated {} bytes, expected {}",
                        out.len(),
                        expected
                    )));
                }
                out
            }
        };
        let crc = crc32fast::hash(&bytes);
        if crc != entry.crc32 {
            return Err(corrupt(format!(
                "CRC32 mismatch: computed {crc:08x}, recorded {:08x}",
                entry.crc32
            )));
        }
        Ok(bytes)
    }
}

/// Free-function form of [`ApkArchive::open`].
pub fn open_archive(path: impl AsRef<Path>) -> Result<ApkArchive, ContainerError> {
    ApkArchive::open(path)
}

/// Free-function form of [`ApkArchive::read_entry`].
pub fn read_entry(archive: &ApkArchive, name: &str) -> Result<Vec<u8>, ContainerError> {
    archive.read_entry(name)
}
