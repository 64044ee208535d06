//! Grayscale PGM images (plain `P2` and raw `P5`), scaled to `[0, 1]`.

use std::path::Path;

use rpca_core::Matrix;

use crate::error::{CliError, CliResult};

const MAX_MAXVAL: u32 = 65535;

pub fn read_pgm(path: &Path) -> CliResult<Matrix> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(path, e.to_string()))?;
    parse_pgm(&bytes).map_err(|msg| CliError::input(path, msg))
}

struct Header {
    raw: bool,
    width: usize,
    height: usize,
    maxval: u32,
    /// Offset of the first pixel byte (raw) or token (plain).
    data_start: usize,
}

/// Cursor over the whitespace- and comment-separated header tokens.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Option<&'a [u8]> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn next_uint(&mut self, what: &str) -> Result<u32, String> {
        let tok = self.next_token().ok_or_else(|| format!("truncated header: missing {what}"))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| format!("invalid {what} {:?}", String::from_utf8_lossy(tok)))
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header, String> {
    let raw = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        Some(m) => return Err(format!("unsupported format {:?}: expected P2 or P5", String::from_utf8_lossy(m))),
        None => return Err("file too short for a PGM header".into()),
    };
    let mut t = Tokens { bytes, pos: 2 };
    let width = t.next_uint("width")? as usize;
    let height = t.next_uint("height")? as usize;
    let maxval = t.next_uint("max value")?;
    if width == 0 || height == 0 {
        return Err(format!("empty image {width}x{height}"));
    }
    if maxval == 0 || maxval > MAX_MAXVAL {
        return Err(format!("max value {maxval} outside 1..={MAX_MAXVAL}"));
    }
    // Exactly one whitespace byte separates the header from raw pixels.
    let data_start = if raw {
        match bytes.get(t.pos) {
            Some(b) if b.is_ascii_whitespace() => t.pos + 1,
            _ => return Err("truncated header".into()),
        }
    } else {
        t.pos
    };
    Ok(Header { raw, width, height, maxval, data_start })
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Matrix, String> {
    let h = parse_header(bytes)?;
    let count = h.width * h.height;
    let mut values = Vec::with_capacity(count);
    if h.raw {
        let wide = h.maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let payload = bytes.get(h.data_start..).unwrap_or(&[]);
        if payload.len() < need {
            return Err(format!("truncated payload: {} of {need} pixel bytes", payload.len()));
        }
        if wide {
            values.extend(payload[..need].chunks_exact(2).map(|p| u16::from_be_bytes([p[0], p[1]]) as u32));
        } else {
            values.extend(payload[..need].iter().map(|&b| b as u32));
        }
    } else {
        let mut t = Tokens { bytes, pos: h.data_start };
        for k in 0..count {
            let tok = t.next_token().ok_or_else(|| format!("truncated payload: {k} of {count} pixels"))?;
            let s = String::from_utf8_lossy(tok);
            values.push(s.parse::<u32>().map_err(|_| format!("invalid pixel value {s:?}"))?);
        }
    }
    if let Some(v) = values.iter().find(|&&v| v > h.maxval) {
        return Err(format!("pixel value {v} exceeds max value {}", h.maxval));
    }
    let scale = h.maxval as f64;
    Matrix::from_row_major(h.height, h.width, values.into_iter().map(|v| v as f64 / scale).collect())
        .map_err(|e| e.to_string())
}
