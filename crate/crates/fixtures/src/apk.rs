//! ZIP/APK assembly through the `zip` crate, with fixed timestamps so
//! fixture bytes are reproducible.

use std::io::{Cursor, Write};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Stored,
    Deflated,
}

#[derive(Debug, Clone, Default)]
pub struct ApkBuilder {
    entries: Vec<(String, Vec<u8>, Method)>,
}

impl ApkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entry(mut self, name: &str, data: impl Into<Vec<u8>>, method: Method) -> Self {
        self.entries.push((name.to_string(), data.into(), method));
        self
    }

    pub fn deflated(self, name: &str, data: impl Into<Vec<u8>>) -> Self {
        self.entry(name, data, Method::Deflated)
    }

    pub fn stored(self, name: &str, data: impl Into<Vec<u8>>) -> Self {
        self.entry(name, data, Method::Stored)
    }

    pub fn entries(&self) -> &[(String, Vec<u8>, Method)] {
        &self.entries
    }

    pub fn build(&self) -> Vec<u8> {
        let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
        for (name, data, method) in &self.entries {
            let options = SimpleFileOptions::default()
                .compression_method(match method {
                    Method::Stored => CompressionMethod::Stored,
                    Method::Deflated => CompressionMethod::Deflated,
                })
                .last_modified_time(DateTime::default())
                .unix_permissions(0o644);
            zip.start_file(name.as_str(), options)
                .expect("start zip entry");
            zip.write_all(data).expect("write zip entry");
        }
        zip.finish().expect("finish zip").into_inner()
    }
}
