use super::AxmlError;

const UTF8_FLAG: u32 = 1 << 8;
pub(crate) const REPLACEMENT: &str = "\u{FFFD}";

/// Decodes a string-pool chunk. `chunk` spans the whole chunk including its
/// header. Entries that cannot be decoded become [`REPLACEMENT`] and add a
/// warning; structural problems with the pool itself are errors.
pub(crate) fn decode(
    chunk: &[u8],
    header_size: usize,
    warnings: &mut Vec<String>,
) -> Result<Vec<String>, AxmlError> {
    if header_size < 28 || chunk.len() < 28 {
        return Err(AxmlError::MalformedChunk(
            "string pool header shorter than 28 bytes".into(),
        ));
    }
    let rd = |at: usize| u32::from_le_bytes(chunk[at..at + 4].try_into().unwrap());
    let count = rd(8) as usize;
    let flags = rd(16);
    let strings_start = rd(20) as usize;
    let utf8 = flags & UTF8_FLAG != 0;

    let offsets_end = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(header_size))
        .filter(|&end| end <= chunk.len())
        .ok_or_else(|| {
            AxmlError::MalformedChunk(format!(
                "string pool offset table for {count} strings overruns chunk"
            ))
        })?;
    if count > 0 && (strings_start < offsets_end || strings_start > chunk.len()) {
        return Err(AxmlError::MalformedChunk(format!(
            "string data start {strings_start} outside chunk"
        )));
    }

    let mut strings = Vec::with_capacity(count);
    for i in 0..count {
        let off = rd(header_size + 4 * i) as usize;
        let decoded = strings_start
            .checked_add(off)
            .and_then(|at| chunk.get(at..))
            .and_then(|data| {
                if utf8 {
                    utf8_entry(data)
                } else {
                    utf16_entry(data)
                }
            });
        match decoded {
            Some(s) => strings.push(s),
            None => {
                warnings.push(format!("string pool entry {i} is malformed"));
                strings.push(REPLACEMENT.to_string());
            }
        }
    }
    Ok(strings)
}

fn utf8_len(data: &[u8], pos: &mut usize) -> Option<usize> {
    let first = *data.get(*pos)? as usize;
    *pos += 1;
    if first & 0x80 != 0 {
        let second = *data.get(*pos)? as usize;
        *pos += 1;
        Some(((first & 0x7F) << 8) | second)
    } else {
        Some(first)
    }
}

fn utf8_entry(data: &[u8]) -> Option<String> {
    let mut pos = 0;
    let _utf16_len = utf8_len(data, &mut pos)?;
    let byte_len = utf8_len(data, &mut pos)?;
    let bytes = data.get(pos..pos.checked_add(byte_len)?)?;
    String::from_utf8(bytes.to_vec()).ok()
}

fn utf16_entry(data: &[u8]) -> Option<String> {
    let unit = |at: usize| {
        data.get(at..at + 2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]) as usize)
    };
    let first = unit(0)?;
    let (len, start): (usize, usize) = if first & 0x8000 != 0 {
        (((first & 0x7FFF) << 16) | unit(2)?, 4)
    } else {
        (first, 2)
    };
    let bytes = data.get(start..start.checked_add(len.checked_mul(2)?)?)?;
    let units: Vec<u16> = bytes
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    String::from_utf16(&units).ok()
}
