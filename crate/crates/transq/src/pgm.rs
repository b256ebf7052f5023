//! Binary PGM (P5, maxval 255) frames.

use std::path::Path;

/// `round(255 · clip(p, 0, 1))`.
pub fn quantize(p: f64) -> u8 {
    let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
    (255.0 * p).round() as u8
}

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count mismatch");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write(path: &Path, width: usize, height: usize, pixels: &[u8]) -> std::io::Result<()> {
    std::fs::write(path, encode(width, height, pixels))
}

/// `(width, height, pixels)` of a P5 file with maxval 255.
pub fn decode(bytes: &[u8]) -> Option<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let (w, h): (usize, usize) = (fields[1].parse().ok()?, fields[2].parse().ok()?);
    let data = bytes.get(pos + 1..)?;
    (data.len() == w * h).then(|| (w, h, data.to_vec()))
}
