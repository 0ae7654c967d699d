//! Minimal DEX writer: header, string_ids, string_data and a map list.
//! Enough for string-table scanners and for reference dump tools.

const HEADER_SIZE: u32 = 0x70;
const ENDIAN_CONSTANT: u32 = 0x1234_5678;

/// Encodes one string as modified UTF-8 (no terminator).
pub fn mutf8_encode(s: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len());
    for unit in s.encode_utf16() {
        match unit {
            0x0001..=0x007F => out.push(unit as u8),
            0x0000 | 0x0080..=0x07FF => {
                out.push(0xC0 | ((unit >> 6) as u8 & 0x1F));
                out.push(0x80 | (unit as u8 & 0x3F));
            }
            _ => {
                out.push(0xE0 | ((unit >> 12) as u8 & 0x0F));
                out.push(0x80 | ((unit >> 6) as u8 & 0x3F));
                out.push(0x80 | (unit as u8 & 0x3F));
            }
        }
    }
    out
}

fn uleb128(out: &mut Vec<u8>, mut v: u32) {
    loop {
        let byte = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            break;
        }
        out.push(byte | 0x80);
    }
}

fn adler32(data: &[u8]) -> u32 {
    let (mut a, mut b) = (1u32, 0u32);
    for &byte in data {
        a = (a + byte as u32) % 65521;
        b = (b + a) % 65521;
    }
    (b << 16) | a
}

fn put_u32(buf: &mut [u8], at: usize, v: u32) {
    buf[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

/// Builds a DEX file whose string table holds `strings` in the given order.
/// `version` is the three-digit format version, e.g. `"035"`.
pub fn build_dex(strings: &[&str], version: &str) -> Vec<u8> {
    assert_eq!(version.len(), 3);
    let count = strings.len() as u32;
    let ids_off = HEADER_SIZE;
    let data_off = ids_off + 4 * count;

    let mut data = Vec::new();
    let mut offsets = Vec::with_capacity(strings.len());
    for s in strings {
        offsets.push(data_off + data.len() as u32);
        uleb128(&mut data, s.encode_utf16().count() as u32);
        data.extend(mutf8_encode(s));
        data.push(0);
    }
    while data.len() % 4 != 0 {
        data.push(0);
    }
    let map_off = data_off + data.len() as u32;
    let mut map = Vec::new();
    let mut items: Vec<(u16, u32, u32)> = vec![(0x0000, 1, 0)];
    if count > 0 {
        items.push((0x0001, count, ids_off));
        items.push((0x2002, count, data_off));
    }
    items.push((0x1000, 1, map_off));
    map.extend((items.len() as u32).to_le_bytes());
    for (ty, size, off) in items {
        map.extend(ty.to_le_bytes());
        map.extend(0u16.to_le_bytes());
        map.extend(size.to_le_bytes());
        map.extend(off.to_le_bytes());
    }
    let file_size = map_off + map.len() as u32;

    let mut out = vec![0u8; HEADER_SIZE as usize];
    out[0..4].copy_from_slice(b"dex\n");
    out[4..7].copy_from_slice(version.as_bytes());
    out[7] = 0;
    put_u32(&mut out, 0x20, file_size);
    put_u32(&mut out, 0x24, HEADER_SIZE);
    put_u32(&mut out, 0x28, ENDIAN_CONSTANT);
    put_u32(&mut out, 0x34, map_off);
    put_u32(&mut out, 0x38, count);
    put_u32(&mut out, 0x3C, if count > 0 { ids_off } else { 0 });
    put_u32(&mut out, 0x68, file_size - data_off);
    put_u32(&mut out, 0x6C, data_off);
    for o in offsets {
        out.extend(o.to_le_bytes());
    }
    out.extend(data);
    out.extend(map);
    let checksum = adler32(&out[12..]);
    put_u32(&mut out, 0x08, checksum);
    out
}
