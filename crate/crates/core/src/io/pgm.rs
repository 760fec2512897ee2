//! Binary PGM (P5, maxval 255).

use std::fs;
use std::path::Path;

use crate::{DadlError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Pixels scaled to `[0, 1]`, row-major.
    pub fn to_unit(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64 / 255.0).collect()
    }

    /// Quantize `[0, 1]` values (clamped) to 8 bits.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        if values.len() != width * height {
            return Err(DadlError::DimensionMismatch(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        let pixels = values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        Ok(Self { width, height, pixels })
    }
}

pub fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err("not a binary PGM (P5)".into());
    }
    let num = |s: String| s.parse::<usize>().map_err(|_| format!("bad header value {s:?}"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval != 255 {
        return Err(format!("maxval {maxval} unsupported, expected 255"));
    }
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let len = width * height;
    if bytes.len() < start + len {
        return Err(format!(
            "raster has {} bytes, expected {len}",
            bytes.len().saturating_sub(start)
        ));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: bytes[start..start + len].to_vec(),
    })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| DadlError::io(path, e))?;
    parse_pgm(&bytes).map_err(|reason| DadlError::CorruptImage {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| DadlError::io(dir, e))?;
        }
    }
    fs::write(path, encode_pgm(img)).map_err(|e| DadlError::io(path, e))
}
