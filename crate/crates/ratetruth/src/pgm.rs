//! Binary greyscale PGM (`P5`) reading and grey-level histograms.

use std::path::Path;

use ratetruth_core::prob::normalize;
use ratetruth_core::Distribution;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PgmError {
    #[error("not a binary PGM (expected magic `P5`)")]
    BadMagic,
    #[error("file ends before the header or raster is complete")]
    TruncatedFile,
    #[error("maxval {0} is not supported (only 255)")]
    UnsupportedMaxval(u32),
    #[error("malformed header: {0}")]
    BadHeader(&'static str),
}

/// An 8-bit greyscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreyImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    /// Skips whitespace and `#` comments (which run to the end of the line).
    fn skip_blank(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<u32, PgmError> {
        self.skip_blank();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(if self.pos >= self.bytes.len() {
                PgmError::TruncatedFile
            } else {
                PgmError::BadHeader("expected a decimal number")
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::BadHeader("number out of range"))
    }
}

/// Parses a `P5` image with maxval 255. Bytes after the first raster are
/// ignored.
pub fn parse_pgm(bytes: &[u8]) -> Result<GreyImage, PgmError> {
    if bytes.len() < 2 {
        return Err(if b"P5".starts_with(bytes) {
            PgmError::TruncatedFile
        } else {
            PgmError::BadMagic
        });
    }
    if &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut h = Header { bytes, pos: 2 };
    match bytes.get(2) {
        None => return Err(PgmError::TruncatedFile),
        Some(b) if !b.is_ascii_whitespace() && *b != b'#' => return Err(PgmError::BadMagic),
        _ => {}
    }
    let width = h.number()? as usize;
    let height = h.number()? as usize;
    let maxval = h.number()?;
    if width == 0 || height == 0 {
        return Err(PgmError::BadHeader("zero image dimension"));
    }
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(h.pos) {
        None => return Err(PgmError::TruncatedFile),
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        Some(_) => return Err(PgmError::BadHeader("no whitespace after maxval")),
    }
    let count = width
        .checked_mul(height)
        .ok_or(PgmError::BadHeader("image too large"))?;
    let raster = bytes.get(h.pos..h.pos + count).ok_or(PgmError::TruncatedFile)?;
    Ok(GreyImage {
        width,
        height,
        pixels: raster.to_vec(),
    })
}

/// Normalized histogram over the grey levels `0..=255`.
pub fn histogram(img: &GreyImage) -> Distribution {
    let mut counts = [0u64; 256];
    for &p in &img.pixels {
        counts[p as usize] += 1;
    }
    let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    normalize(&w).expect("a non-empty image has a positive count")
}

/// Reads `path` and returns the grey-level distribution and the pixel count.
pub fn ingest_pgm(path: &Path) -> Result<(Distribution, usize)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let img = parse_pgm(&bytes).map_err(|source| CliError::Pgm {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((histogram(&img), img.pixels.len()))
}
