//! Portable FloatMap, grayscale variant only.
//!
//! Header: `Pf`, then `width height`, then a scale whose sign gives the byte
//! order (negative = little-endian). Rows run bottom to top.

use std::path::Path;

use crate::error::{Error, Result};
use crate::map::SaliencyMap;

pub fn load_pfm(path: &Path) -> Result<SaliencyMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes).map_err(|msg| Error::format(path, msg))
}

pub fn save_pfm(path: &Path, map: &SaliencyMap) -> Result<()> {
    std::fs::write(path, encode_pfm(map)).map_err(|e| Error::io(path, e))
}

/// Little-endian encoding. Values are stored as `f32`.
pub fn encode_pfm(map: &SaliencyMap) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for row in map.values().chunks(w).rev() {
        for v in row {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

/// Splits off the next whitespace-delimited header token.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()
}

pub fn decode_pfm(bytes: &[u8]) -> std::result::Result<SaliencyMap, String> {
    let mut pos = 0;
    match token(bytes, &mut pos) {
        Some("Pf") => {}
        Some("PF") => return Err("colour PFM (PF) is not supported; expected grayscale Pf".into()),
        _ => return Err("not a PFM file: missing Pf magic".into()),
    }
    let mut dim = |what: &str| -> std::result::Result<usize, String> {
        token(bytes, &mut pos)
            .and_then(|t| t.parse::<usize>().ok())
            .filter(|v| *v > 0)
            .ok_or_else(|| format!("malformed PFM header: bad {what}"))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let scale: f64 = token(bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .filter(|s: &f64| *s != 0.0 && s.is_finite())
        .ok_or("malformed PFM header: bad scale")?;
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("malformed PFM header: no payload".into());
    }
    pos += 1;

    let count = width
        .checked_mul(height)
        .ok_or("malformed PFM header: image too large")?;
    let payload = &bytes[pos..];
    if payload.len() < count * 4 {
        return Err(format!(
            "truncated PFM payload: {} bytes for {width}x{height} (need {})",
            payload.len(),
            count * 4
        ));
    }
    let little = scale < 0.0;
    let mut values = vec![0.0; count];
    let mut negative = 0usize;
    let mut non_finite = 0usize;
    for (i, chunk) in payload[..count * 4].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        if !v.is_finite() {
            non_finite += 1;
        } else if v < 0.0 {
            negative += 1;
        }
        let (row, col) = (i / width, i % width);
        // -0.0 becomes 0.0
        values[(height - 1 - row) * width + col] = f64::from(v) + 0.0;
    }
    if non_finite > 0 {
        return Err(format!("{non_finite} non-finite values in PFM payload"));
    }
    if negative > 0 {
        return Err(format!("{negative} negative values in PFM payload"));
    }
    SaliencyMap::new(width, height, values).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(scale: &str) -> Vec<u8> {
        format!("Pf\n2 2\n{scale}\n").into_bytes()
    }

    #[test]
    fn little_endian_rows_bottom_up() {
        let mut b = header("-1.0");
        for v in [0.3f32, 0.4, 0.1, 0.2] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let m = decode_pfm(&b).unwrap();
        let want: Vec<f64> = [0.1f32, 0.2, 0.3, 0.4]
            .iter()
            .map(|v| f64::from(*v))
            .collect();
        assert_eq!(m.values(), &want[..]);
    }

    #[test]
    fn big_endian() {
        let mut b = header("1.0");
        for v in [0.3f32, 0.4, 0.1, 0.2] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        assert_eq!(decode_pfm(&b).unwrap().get(0, 0), f64::from(0.1f32));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let vals: Vec<f64> = [0.1f32, 0.2, 0.3, 0.4, 7.5, 0.0]
            .iter()
            .map(|v| f64::from(*v))
            .collect();
        let m = SaliencyMap::new(3, 2, vals).unwrap();
        let back = decode_pfm(&encode_pfm(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_input() {
        let mut b = header("-1.0");
        b.extend_from_slice(&[0u8; 7]);
        assert!(decode_pfm(&b).unwrap_err().contains("truncated"));

        let mut b = header("-1.0");
        for v in [-1.0f32, 0.5, -0.25, 0.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        assert!(decode_pfm(&b).unwrap_err().starts_with("2 negative"));

        assert!(decode_pfm(b"PF\n1 1\n-1\n\0\0\0\0\0\0\0\0\0\0\0\0").is_err());
        assert!(decode_pfm(b"Pf\n0 1\n-1\n").is_err());
        assert!(decode_pfm(b"Pf\n1 1\n0\n\0\0\0\0").is_err());
    }
}
