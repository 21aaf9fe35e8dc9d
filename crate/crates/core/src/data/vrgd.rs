//! VRGD container: `"VRGD"`, u32 version 1, u32 height, u32 width, RGB
//! bytes, then f32 depth, all little-endian and row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::RawSample;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VRGD";
const VERSION: u32 = 1;
const HEADER: usize = 16;

pub fn write_sample(sample: &RawSample, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    for v in [VERSION, sample.height as u32, sample.width as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&sample.rgb)?;
    let mut depth = Vec::with_capacity(sample.depth.len() * 4);
    for d in &sample.depth {
        depth.extend_from_slice(&d.to_le_bytes());
    }
    out.write_all(&depth)
}

/// Parses a VRGD stream; `origin` names the source in errors.
pub fn read_sample(mut input: impl Read, origin: &Path) -> Result<RawSample> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(format!("reading {}", origin.display()), e))?;
    let truncated = |section, expected, got| Error::Truncated {
        path: origin.to_path_buf(),
        section,
        expected,
        got,
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            path: origin.to_path_buf(),
            expected: "VRGD",
            found: String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned(),
        });
    }
    if bytes.len() < HEADER {
        return Err(truncated("header", HEADER, bytes.len()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    let version = word(1);
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: origin.to_path_buf(),
            version,
        });
    }
    let (h, w) = (word(2) as usize, word(3) as usize);
    let n = h.checked_mul(w).ok_or_else(|| Error::SizeMismatch {
        path: origin.to_path_buf(),
        detail: format!("{h}x{w} overflows"),
    })?;
    let body = &bytes[HEADER..];
    if body.len() < 3 * n {
        return Err(truncated("rgb payload", 3 * n, body.len()));
    }
    let depth_bytes = &body[3 * n..];
    if depth_bytes.len() < 4 * n {
        return Err(truncated("depth payload", 4 * n, depth_bytes.len()));
    }
    if depth_bytes.len() > 4 * n {
        return Err(Error::SizeMismatch {
            path: origin.to_path_buf(),
            detail: format!("{} trailing bytes after a {h}x{w} sample", depth_bytes.len() - 4 * n),
        });
    }
    Ok(RawSample {
        height: h,
        width: w,
        rgb: body[..3 * n].to_vec(),
        depth: depth_bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect(),
    })
}

pub fn save_sample(path: &Path, sample: &RawSample) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER + sample.rgb.len() + 4 * sample.depth.len());
    write_sample(sample, &mut buf).expect("writing to memory");
    fs::write(path, buf).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_sample(path: &Path) -> Result<RawSample> {
    let f = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    read_sample(std::io::BufReader::new(f), path)
}
