//! Bitcoin-style compact-size integers.

use super::WireError;

/// Decodes a compact-size integer from the front of `bytes`.
///
/// Returns the value and the number of bytes consumed. Encodings that use
/// more bytes than the value needs are rejected.
pub fn parse_varint(bytes: &[u8]) -> Result<(u64, usize), WireError> {
    let first = *bytes.first().ok_or(WireError::Truncated { context: "compact size" })?;
    let (len, min) = match first {
        0..=0xfc => return Ok((u64::from(first), 1)),
        0xfd => (2, 0xfd),
        0xfe => (4, 0x1_0000),
        0xff => (8, 0x1_0000_0000),
    };
    let body = bytes
        .get(1..1 + len)
        .ok_or(WireError::Truncated { context: "compact size" })?;
    let mut buf = [0u8; 8];
    buf[..len].copy_from_slice(body);
    let value = u64::from_le_bytes(buf);
    if value < min {
        return Err(WireError::NonCanonicalVarint { value, width: 1 + len });
    }
    Ok((value, 1 + len))
}

/// Appends the canonical compact-size encoding of `value`.
pub fn write_varint(out: &mut Vec<u8>, value: u64) {
    match value {
        0..=0xfc => out.push(value as u8),
        0xfd..=0xffff => {
            out.push(0xfd);
            out.extend_from_slice(&(value as u16).to_le_bytes());
        }
        0x1_0000..=0xffff_ffff => {
            out.push(0xfe);
            out.extend_from_slice(&(value as u32).to_le_bytes());
        }
        _ => {
            out.push(0xff);
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
}
